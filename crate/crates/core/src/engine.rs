//! The pseudo-equator iteration: read the critical values off the current
//! curve, build the normalized quadratic, lift the curve through it, and
//! re-embed the postcritical set from the lift.

use rayon::prelude::*;
use thiserror::Error;

use crate::angle::{Angle, AngleError};
use crate::config::Tolerances;
use crate::curve::{init_embedding, read_critical_values, relabel, requantize, CurveError, CurveSample, DiscreteCurve};
use crate::mating::{base_schedule, fsr_valid, pullback_schedule, Color, MarkKind, MatingError, Schedule};
use crate::prune::{clear_marks, prune, PruneError, PruneOptions};
use crate::rational::{
    chordal_distance, cross, dot, norm, spherical_midpoint, stereographic, sub, MapError, NormalizedQuadratic, SpherePoint,
};

/// Iterations without a new smallest increment before giving up.
pub const STALL_LIMIT: usize = 20;

/// A fork choice is settled by continuity when its postcritical drift is
/// below this fraction of the next best choice.
pub const CONTINUITY_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("branch tracking lost at parameter {0}")]
    BranchTrackingLost(Angle),
    #[error("lift does not close up: lap {lap} ends {distance:e} from {expected}")]
    LapClosure { lap: usize, expected: SpherePoint, distance: f64 },
    #[error("subdivision rule construction fails for this pair")]
    NoSubdivisionRule,
    #[error(transparent)]
    Mating(#[from] MatingError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Angle(#[from] AngleError),
}

impl EngineError {
    /// Combinatorial failures as opposed to numerical ones.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            EngineError::Mating(_) | EngineError::NoSubdivisionRule | EngineError::Curve(CurveError::CriticalValueCollision(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterOptions {
    pub max_iters: usize,
    /// Convergence threshold on `d(u_n, u_{n+1}) + d(v_n, v_{n+1})`.
    pub tol: f64,
    /// Iterations to run before convergence may be declared.
    pub min_iters: usize,
    pub samples_per_arc: usize,
    pub budget: usize,
    pub parallel: bool,
    pub tolerances: Tolerances,
}

impl Default for IterOptions {
    fn default() -> Self {
        IterOptions {
            max_iters: 200,
            tol: 1e-9,
            min_iters: 1,
            samples_per_arc: 64,
            budget: 4096,
            parallel: true,
            tolerances: Tolerances::default(),
        }
    }
}

type Lifted = Vec<(Angle, SpherePoint)>;

fn near(a: SpherePoint, b: SpherePoint) -> f64 {
    chordal_distance(a, b)
}

struct ArcLifter<'a> {
    f: &'a NormalizedQuadratic,
    tol: &'a Tolerances,
}

impl ArcLifter<'_> {
    fn near_critical(&self, z: SpherePoint) -> bool {
        near(z, SpherePoint::ZERO) < self.tol.critical_radius || near(z, SpherePoint::Infinity) < self.tol.critical_radius
    }

    /// The double preimage of a point at a critical value.
    fn critical_preimage(&self, w: SpherePoint) -> Option<(SpherePoint, SpherePoint)> {
        if near(w, self.f.u()) <= self.tol.degenerate {
            Some((SpherePoint::ZERO, SpherePoint::ZERO))
        } else if near(w, self.f.v()) <= self.tol.degenerate {
            Some((SpherePoint::Infinity, SpherePoint::Infinity))
        } else {
            None
        }
    }

    /// Lift the parent step `from → to` continuing from `z`, subdividing the
    /// parent segment while the choice of root is ambiguous or the lifted
    /// step is too long. Appends the lifted samples after `z`.
    fn step(
        &self,
        z: SpherePoint,
        from: (Angle, SpherePoint),
        to: (Angle, SpherePoint),
        forward: bool,
        depth: usize,
        out: &mut Lifted,
    ) -> Result<SpherePoint, EngineError> {
        let (r0, r1) = self.critical_preimage(to.1).unwrap_or_else(|| self.f.preimages(to.1));
        let (d0, d1) = (near(z, r0), near(z, r1));
        let (pick, dn, df) = if d0 <= d1 { (r0, d0, d1) } else { (r1, d1, d0) };
        let coincident = r0 == r1 || near(r0, r1) == 0.0;
        let ambiguous = !coincident && dn > self.tol.ambiguity_ratio * df;
        let limit = if self.near_critical(z) || self.near_critical(pick) {
            self.tol.critical_segment
        } else {
            self.tol.max_segment
        };
        let too_long = dn > limit;
        if ambiguous || too_long {
            if depth < self.tol.max_refine_depth {
                if let Some(mid) = spherical_midpoint(from.1, to.1) {
                    let t = if forward {
                        from.0.ccw_midpoint(to.0)?
                    } else {
                        to.0.ccw_midpoint(from.0)?
                    };
                    let m = (t, mid);
                    let zm = self.step(z, from, m, forward, depth + 1, out)?;
                    return self.step(zm, m, to, forward, depth + 1, out);
                }
            }
            if ambiguous {
                return Err(EngineError::BranchTrackingLost(to.0));
            }
        }
        out.push((to.0, pick));
        Ok(pick)
    }

    /// One of the two lifts of a parent arc running from mark to mark. The
    /// other lift is its negation.
    fn lift(&self, arc: &[(Angle, SpherePoint)]) -> Result<Lifted, EngineError> {
        let m = arc.len() - 1;
        // Start from an interior sample: at a critical value endpoint the two
        // roots coincide and give no direction.
        let k = if m >= 2 { m / 2 } else { 0 };
        let start = self.f.preimages(arc[k].1).0;
        let mut fwd = vec![(arc[k].0, start)];
        let mut z = start;
        for i in k..m {
            z = self.step(z, arc[i], arc[i + 1], true, 0, &mut fwd)?;
        }
        let mut back = Vec::new();
        let mut z = start;
        for i in (1..=k).rev() {
            z = self.step(z, arc[i], arc[i - 1], false, 0, &mut back)?;
        }
        back.reverse();
        back.extend(fwd);
        Ok(back)
    }
}

/// Turn direction at `p` along `prev → p → next` on the sphere with the
/// outward normal: positive for a left turn.
pub fn turn(prev: SpherePoint, p: SpherePoint, next: SpherePoint) -> f64 {
    let (a, b, c) = (stereographic(prev), stereographic(p), stereographic(next));
    dot(cross(sub(b, a), sub(c, b)), b)
}

fn negated(l: &Lifted) -> Lifted {
    l.iter().map(|&(t, z)| (t, -z)).collect()
}

struct Stitched {
    samples: Lifted,
    end: SpherePoint,
    /// Arc index and certainty (|sine of the turn|) of each critical fork.
    forks: Vec<(usize, f64)>,
}

struct Stitcher<'a> {
    lifts: &'a [Lifted],
    black: Angle,
    red: Angle,
}

impl Stitcher<'_> {
    /// Chain one lift of every arc into a lap starting at the preimage
    /// nearest 1. At a critical point the
    /// curve forks right at the black one and left at the red one, except
    /// at the `flip`-th critical point of the lap, counted from bit 0, where
    /// the other fork is taken.
    fn lap(&self, flip: u32) -> Stitched {
        let mut samples: Lifted = Vec::new();
        let mut forks = Vec::new();
        let mut prev: Option<SpherePoint> = None;
        for (j, lift) in self.lifts.iter().enumerate() {
            let neg = negated(lift);
            let start_param = lift[0].0;
            let first = match prev {
                None => near(lift[0].1, SpherePoint::ONE) <= near(neg[0].1, SpherePoint::ONE),
                Some(end) if (start_param == self.black || start_param == self.red) && !samples.is_empty() => {
                    let before = samples[samples.len() - 1].1;
                    let after = lift[1].1;
                    let t = turn(before, end, after);
                    let (a, b, c) = (stereographic(before), stereographic(end), stereographic(after));
                    let scale = norm(sub(b, a)) * norm(sub(c, b));
                    forks.push((j, if scale > 0.0 { (t / scale).abs() } else { 0.0 }));
                    let want_left = start_param == self.red;
                    ((t > 0.0) == want_left) != (flip >> (forks.len() - 1) & 1 == 1)
                }
                Some(end) => near(lift[0].1, end) <= near(neg[0].1, end),
            };
            let chosen = if first { lift } else { &neg };
            samples.extend_from_slice(&chosen[..chosen.len() - 1]);
            prev = Some(chosen[chosen.len() - 1].1);
        }
        Stitched {
            samples,
            end: prev.expect("at least one arc"),
            forks,
        }
    }
}

/// Lift `c` through `f`. The result starts at parameter 0 on the preimage 1
/// of the anchor, runs twice around the parent (parameters `t/2`, then
/// `t/2 + 1/2`) and carries the marks of `next`.
pub fn pullback_curve(
    c: &DiscreteCurve,
    f: &NormalizedQuadratic,
    next: &Schedule,
    tol: &Tolerances,
    parallel: bool,
) -> Result<DiscreteCurve, EngineError> {
    let marks = c.mark_indices();
    let n = c.samples.len();
    let arcs: Vec<Vec<(Angle, SpherePoint)>> = (0..marks.len())
        .map(|j| {
            let s = marks[j];
            let e = marks.get(j + 1).copied().unwrap_or(n);
            let mut arc: Vec<(Angle, SpherePoint)> =
                c.samples[s..e].iter().map(|x| (x.parameter, x.position)).collect();
            let end = c.samples[e % n];
            arc.push((end.parameter, end.position));
            arc
        })
        .collect();
    let lifter = ArcLifter { f, tol };
    let lifts: Vec<Result<Lifted, EngineError>> = if parallel {
        arcs.par_iter().map(|a| lifter.lift(a)).collect()
    } else {
        arcs.iter().map(|a| lifter.lift(a)).collect()
    };
    let lifts: Vec<Lifted> = lifts.into_iter().collect::<Result<_, _>>()?;

    let stitcher = Stitcher {
        lifts: &lifts,
        black: c.schedule.black_value,
        red: c.schedule.red_value,
    };
    let half = Angle::reduce(1, 2)?;
    // F is even, so the second lap is the negation of the first and every
    // lift of every arc is used once. The first lap must end at -1, which
    // fixes the parity of its forks. Among the closing choices the
    // postcritical points keep their parameters, so a choice that clearly
    // moves them least wins; otherwise the turn test decides.
    let expected = SpherePoint::from_re_im(-1.0, 0.0);
    let drift = |l: &Stitched| -> f64 {
        l.samples
            .iter()
            .filter_map(|&(t, z)| {
                let (h0, _) = t.try_halves().ok()?;
                let far = h0.checked_add(half).ok()?;
                let here = c.schedule.id_of(h0).and_then(|_| c.position_at(h0).ok());
                let there = c.schedule.id_of(far).and_then(|_| c.position_at(far).ok());
                let d = here.map_or(0.0, |p| near(z, p)) + there.map_or(0.0, |p| near(-z, p));
                (here.is_some() || there.is_some()).then_some(d)
            })
            .sum()
    };
    let geometric = stitcher.lap(0);
    let mut closing: Vec<(f64, u32, Stitched)> = (0..1u32 << geometric.forks.len())
        .map(|flip| (flip, stitcher.lap(flip)))
        .filter(|(_, l)| near(l.end, expected) <= tol.closure)
        .map(|(flip, l)| (drift(&l), flip, l))
        .collect();
    closing.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let clear = match closing.as_slice() {
        [_] => true,
        [a, b, ..] => a.0 < CONTINUITY_RATIO * b.0,
        [] => false,
    };
    let stitched = if clear || !closing.iter().any(|x| x.1 == 0) {
        closing.into_iter().next().map_or(geometric, |x| x.2)
    } else {
        geometric
    };
    let distance = near(stitched.end, expected);
    if distance > tol.closure {
        return Err(EngineError::LapClosure { lap: 0, expected, distance });
    }
    let mut out: Vec<CurveSample> = Vec::with_capacity(2 * stitched.samples.len());
    for lap in 0..2 {
        for &(t, z) in &stitched.samples {
            let (h0, _) = t.try_halves()?;
            let (parameter, position) = if lap == 0 { (h0, z) } else { (h0.checked_add(half)?, -z) };
            out.push(CurveSample {
                parameter,
                position,
                mark: None,
            });
        }
    }
    for s in out.iter_mut() {
        s.mark = next.mark_at(s.parameter).map(|m| m.kind);
    }
    Ok(DiscreteCurve {
        level: c.level + 1,
        samples: out,
        schedule: next.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    pub u: SpherePoint,
    pub v: SpherePoint,
    pub samples_before: usize,
    pub samples_after: usize,
    /// Largest chordal move of a postcritical position in this step.
    pub max_displacement: f64,
    /// `d(u_{n-1}, u_n) + d(v_{n-1}, v_n)`; zero for `n = 0`.
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Converged,
    MaxIterations,
    Diverged,
    StructuralError(String),
    NumericError(String),
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max-iterations",
            Status::Diverged => "diverged",
            Status::StructuralError(_) => "structural-error",
            Status::NumericError(_) => "numeric-error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub alpha: Angle,
    pub beta: Angle,
    pub options: IterOptions,
    pub records: Vec<IterationRecord>,
    pub status: Status,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// State of one run: the level-0 and level-1 schedules and the current
/// embedding of `C_0`.
#[derive(Debug, Clone)]
pub struct Engine {
    pub base: Schedule,
    pub lifted: Schedule,
    pub curve: DiscreteCurve,
    pub options: IterOptions,
    pub iteration: usize,
}

/// Result of one pullback step.
#[derive(Debug, Clone)]
pub struct Step {
    pub map: NormalizedQuadratic,
    /// The lift with its level-1 marks, before relabeling and pruning.
    pub lifted: DiscreteCurve,
    pub record: IterationRecord,
}

impl Engine {
    pub fn new(alpha: Angle, beta: Angle, options: IterOptions) -> Result<Engine, EngineError> {
        let base = base_schedule(alpha, beta)?;
        if !fsr_valid(alpha, beta)? {
            return Err(EngineError::NoSubdivisionRule);
        }
        let lifted = pullback_schedule(&base)?;
        let curve = init_embedding(&base, options.samples_per_arc)?;
        Ok(Engine {
            base,
            lifted,
            curve,
            options,
            iteration: 0,
        })
    }

    pub fn critical_values(&self) -> Result<(SpherePoint, SpherePoint), EngineError> {
        Ok(read_critical_values(&self.curve)?)
    }

    pub fn map(&self) -> Result<NormalizedQuadratic, EngineError> {
        let (u, v) = self.critical_values()?;
        Ok(NormalizedQuadratic::with_tolerances(u, v, &self.options.tolerances)?)
    }

    pub fn initial_record(&self) -> Result<IterationRecord, EngineError> {
        let (u, v) = self.critical_values()?;
        Ok(IterationRecord {
            n: 0,
            u,
            v,
            samples_before: self.curve.samples.len(),
            samples_after: self.curve.samples.len(),
            max_displacement: 0.0,
            increment: 0.0,
        })
    }

    pub fn step(&mut self) -> Result<Step, EngineError> {
        let tol = self.options.tolerances;
        let (u0, v0) = self.critical_values()?;
        let f = NormalizedQuadratic::with_tolerances(u0, v0, &tol)?;
        let lifted = pullback_curve(&self.curve, &f, &self.lifted, &tol, self.options.parallel)?;
        let mut next = relabel(&lifted, &self.base);
        let before = next.samples.len();
        let values = [self.base.black_value, self.base.red_value];
        next = clear_marks(&next, &values, tol.value_clearance);
        next = prune(
            &next,
            &PruneOptions {
                budget: self.options.budget,
                clearance: tol.prune_clearance,
                max_chord: tol.max_segment,
            },
        )?;
        requantize(&mut next)?;
        let old = self.curve.postcritical_positions()?;
        let new = next.postcritical_positions()?;
        let max_displacement = old
            .iter()
            .zip(&new)
            .map(|(a, b)| chordal_distance(*a, *b))
            .fold(0.0, f64::max);
        next.level = 0;
        self.curve = next;
        self.iteration += 1;
        let (u, v) = self.critical_values()?;
        let record = IterationRecord {
            n: self.iteration,
            u,
            v,
            samples_before: before,
            samples_after: self.curve.samples.len(),
            max_displacement,
            increment: chordal_distance(u0, u) + chordal_distance(v0, v),
        };
        Ok(Step { map: f, lifted, record })
    }
}

/// Run the iteration to convergence, divergence or the iteration cap.
pub fn iterate(alpha: Angle, beta: Angle, options: IterOptions) -> RunReport {
    iterate_with(alpha, beta, options, |_, _| {})
}

/// [`iterate`], calling `observe` with the engine state after the initial
/// embedding and after every successful step.
pub fn iterate_with<O>(alpha: Angle, beta: Angle, options: IterOptions, mut observe: O) -> RunReport
where
    O: FnMut(&Engine, &IterationRecord),
{
    let mut report = RunReport {
        alpha,
        beta,
        options,
        records: Vec::new(),
        status: Status::MaxIterations,
        warnings: Vec::new(),
    };
    let fail = |e: EngineError| {
        if e.is_structural() {
            Status::StructuralError(e.to_string())
        } else {
            Status::NumericError(e.to_string())
        }
    };
    let mut engine = match Engine::new(alpha, beta, options) {
        Ok(e) => e,
        Err(e) => {
            report.status = fail(e);
            return report;
        }
    };
    report.warnings.extend(engine.base.orbifold_warning());
    match engine.initial_record() {
        Ok(r) => {
            observe(&engine, &r);
            report.records.push(r);
        }
        Err(e) => {
            report.status = fail(e);
            return report;
        }
    }
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for _ in 0..options.max_iters {
        let record = match engine.step() {
            Ok(s) => s.record,
            Err(e) => {
                report.status = fail(e);
                return report;
            }
        };
        observe(&engine, &record);
        report.records.push(record);
        if record.increment < options.tol {
            if record.n >= options.min_iters {
                report.status = Status::Converged;
                return report;
            }
            continue;
        }
        if record.increment < best {
            best = record.increment;
            stale = 0;
        } else {
            stale += 1;
            if stale >= STALL_LIMIT {
                report.status = Status::Diverged;
                return report;
            }
        }
    }
    report
}

/// Curve parameters whose lift passes through a critical point, for display.
pub fn critical_point_marks(c: &DiscreteCurve) -> Vec<(Angle, Color)> {
    c.samples
        .iter()
        .filter_map(|s| match s.mark {
            Some(MarkKind::CriticalPoint(col)) => Some((s.parameter, col)),
            _ => None,
        })
        .collect()
}
