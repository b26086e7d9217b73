//! Discretized embeddings of the pseudo-equator.

use std::f64::consts::TAU;

use num_complex::Complex64;
use thiserror::Error;

use crate::angle::{Angle, AngleError};
use crate::mating::{Color, MarkKind, Schedule};
use crate::rational::{chordal_distance, SpherePoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("critical value collision: u and v are {0:e} apart")]
    CriticalValueCollision(f64),
    #[error("curve has no sample at parameter {0}")]
    MissingParameter(Angle),
    #[error("samples_per_arc must be positive")]
    NoSamples,
    #[error("curve invariant violated: {0}")]
    Invalid(String),
    #[error(transparent)]
    Angle(#[from] AngleError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub parameter: Angle,
    pub position: SpherePoint,
    /// Schedule mark at this parameter; `None` for unmarked samples.
    pub mark: Option<MarkKind>,
}

/// Samples in increasing parameter order starting at parameter 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    pub level: usize,
    pub samples: Vec<CurveSample>,
    pub schedule: Schedule,
}

fn circle_point(t: Angle) -> SpherePoint {
    let (s, c) = (TAU * t.to_f64()).sin_cos();
    SpherePoint::Finite(Complex64::new(c, s))
}

/// Marks in increasing order from 0, the reverse of the schedule's 0-last
/// order.
fn marks_from_zero(s: &Schedule) -> Vec<(Angle, MarkKind)> {
    let mut v: Vec<(Angle, MarkKind)> = s.marks.iter().map(|m| (m.parameter, m.kind)).collect();
    v.sort_by_key(|m| m.0);
    v
}

/// Unit-circle embedding `t ↦ e^{2πit}` with `samples_per_arc` unmarked
/// samples strictly between consecutive marks.
pub fn init_embedding(s: &Schedule, samples_per_arc: usize) -> Result<DiscreteCurve, CurveError> {
    if samples_per_arc == 0 {
        return Err(CurveError::NoSamples);
    }
    let marks = marks_from_zero(s);
    let n = marks.len();
    let mut samples = Vec::with_capacity(n * (samples_per_arc + 1));
    for j in 0..n {
        let (a, kind) = marks[j];
        let b = marks[(j + 1) % n].0;
        let position = if a.is_zero() { SpherePoint::ONE } else { circle_point(a) };
        samples.push(CurveSample {
            parameter: a,
            position,
            mark: Some(kind),
        });
        for k in 1..=samples_per_arc {
            let t = a.lerp_ccw(b, k as u64, samples_per_arc as u64 + 1)?;
            samples.push(CurveSample {
                parameter: t,
                position: circle_point(t),
                mark: None,
            });
        }
    }
    Ok(DiscreteCurve {
        level: s.level,
        samples,
        schedule: s.clone(),
    })
}

impl DiscreteCurve {
    pub fn position_at(&self, t: Angle) -> Result<SpherePoint, CurveError> {
        self.samples
            .binary_search_by_key(&t, |s| s.parameter)
            .map(|i| self.samples[i].position)
            .map_err(|_| CurveError::MissingParameter(t))
    }

    pub fn mark_indices(&self) -> Vec<usize> {
        (0..self.samples.len())
            .filter(|&i| self.samples[i].mark.is_some())
            .collect()
    }

    /// Positions of the postcritical marks, indexed by id - 1.
    pub fn postcritical_positions(&self) -> Result<Vec<SpherePoint>, CurveError> {
        self.schedule
            .postcritical
            .iter()
            .map(|&t| self.position_at(t))
            .collect()
    }

    /// Checks ordering, mark realization, critical coincidence and anchor.
    pub fn validate(&self, critical_tol: f64) -> Result<(), CurveError> {
        let bad = |m: String| Err(CurveError::Invalid(m));
        if self.samples.first().map(|s| s.parameter) != Some(Angle::ZERO) {
            return bad("first sample is not at parameter 0".into());
        }
        for w in self.samples.windows(2) {
            if w[0].parameter >= w[1].parameter {
                return bad(format!("parameters out of order at {}", w[1].parameter));
            }
        }
        let marked: Vec<(Angle, MarkKind)> = self
            .samples
            .iter()
            .filter_map(|s| s.mark.map(|k| (s.parameter, k)))
            .collect();
        if marked != marks_from_zero(&self.schedule) {
            return bad("marked samples differ from the schedule".into());
        }
        for color in [Color::Black, Color::Red] {
            let target = match color {
                Color::Black => SpherePoint::ZERO,
                Color::Red => SpherePoint::Infinity,
            };
            for t in self.schedule.critical_points(color) {
                let d = chordal_distance(self.position_at(t)?, target);
                if d > critical_tol {
                    return bad(format!("critical point at {t} is {d:e} from its pole"));
                }
            }
        }
        let d = chordal_distance(self.samples[0].position, SpherePoint::ONE);
        if d > critical_tol {
            return bad(format!("anchor is {d:e} from 1"));
        }
        Ok(())
    }
}

/// Positions `(u, v)` of the black and red critical values.
pub fn read_critical_values(c: &DiscreteCurve) -> Result<(SpherePoint, SpherePoint), CurveError> {
    let u = c.position_at(c.schedule.black_value)?;
    let v = c.position_at(c.schedule.red_value)?;
    let d = chordal_distance(u, v);
    if d <= 1e-13 {
        return Err(CurveError::CriticalValueCollision(d));
    }
    Ok((u, v))
}

/// Restrict the marks of a lifted curve to the postcritical set (and the
/// anchor) of `base`, so it can serve as the next `C_0` embedding.
pub fn relabel(c: &DiscreteCurve, base: &Schedule) -> DiscreteCurve {
    let samples = c
        .samples
        .iter()
        .map(|s| {
            let mark = base.mark_at(s.parameter).map(|m| m.kind);
            CurveSample { mark, ..*s }
        })
        .collect();
    DiscreteCurve {
        level: c.level,
        samples,
        schedule: base.clone(),
    }
}

/// Respace unmarked parameters evenly between consecutive marks. Only their
/// order matters, and this keeps denominators from doubling every step.
pub fn requantize(c: &mut DiscreteCurve) -> Result<(), CurveError> {
    let marks = c.mark_indices();
    let n = c.samples.len();
    for (j, &start) in marks.iter().enumerate() {
        let end = marks.get(j + 1).copied().unwrap_or(n);
        let a = c.samples[start].parameter;
        let b = if end == n { Angle::ZERO } else { c.samples[end].parameter };
        let k = (end - start) as u64;
        for i in start + 1..end {
            c.samples[i].parameter = a.lerp_ccw(b, (i - start) as u64, k)?;
        }
    }
    Ok(())
}
