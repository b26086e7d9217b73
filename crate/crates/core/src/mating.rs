//! Combinatorics of the essential mating: ray-equivalence graphs on the
//! formal mating sphere, the classes collapsed by the essential mating, and
//! the marked-point schedules carried by the pseudo-equator and its
//! pullbacks.
//!
//! Black angles are parameters of the curve as they are; a red angle `s`
//! sits at curve parameter `1 - s`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::angle::{Angle, AngleError};
use crate::lamination::{mateable, LaminationError, Landing};

/// Ray graphs larger than this are treated as a failure of the input.
pub const MAX_GRAPH_POINTS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatingError {
    #[error("angle {0} is not strictly preperiodic")]
    NotPreperiodic(Angle),
    #[error("parameters {0} and {1} lie in conjugate limbs and are not mateable")]
    NotMateable(Angle, Angle),
    #[error("critical values identified")]
    CriticalValuesIdentified,
    #[error("{0}")]
    Pinched(Pinch),
    #[error("ray graph exceeds {MAX_GRAPH_POINTS} points")]
    GraphTooLarge,
    #[error(transparent)]
    Lamination(#[from] LaminationError),
    #[error(transparent)]
    Angle(#[from] AngleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    Black,
    Red,
}

impl Color {
    pub fn other(self) -> Color {
        match self {
            Color::Black => Color::Red,
            Color::Red => Color::Black,
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Color::Black => "black",
            Color::Red => "red",
        })
    }
}

/// An external angle of one of the two polynomials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SideAngle {
    pub side: Color,
    pub angle: Angle,
}

impl SideAngle {
    pub fn black(angle: Angle) -> SideAngle {
        SideAngle { side: Color::Black, angle }
    }

    pub fn red(angle: Angle) -> SideAngle {
        SideAngle { side: Color::Red, angle }
    }

    /// Parameter of this ray's landing point on the curve.
    pub fn parameter(self) -> Angle {
        match self.side {
            Color::Black => self.angle,
            Color::Red => self.angle.negate(),
        }
    }

    pub fn double(self) -> SideAngle {
        SideAngle {
            side: self.side,
            angle: self.angle.double(),
        }
    }
}

impl fmt::Display for SideAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.side, self.angle)
    }
}

/// A class of tracked angles collapsed to one point by the essential mating.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EssentialClass {
    pub members: BTreeSet<SideAngle>,
    /// Index of the class containing the doubled members.
    pub image: usize,
}

/// A class of postcritical angles whose curve parameters disagree, so the
/// curve through the postcritical set would be pinched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pinch {
    pub members: Vec<SideAngle>,
    pub parameters: Vec<Angle>,
}

impl fmt::Display for Pinch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pinched class {{")?;
        for (i, m) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}} at parameters {{")?;
        for (i, p) in self.parameters.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

/// A point of the formal mating sphere: one side plus the smallest angle of
/// its co-landing class.
pub type Point = (Color, Angle);

/// Ray-graph bookkeeping for one pair of parameters.
#[derive(Debug, Clone)]
pub struct Mating {
    alpha: Angle,
    beta: Angle,
    black: Landing,
    red: Landing,
    graph_of: HashMap<Point, usize>,
    graphs: Vec<BTreeSet<Point>>,
    tracked: Vec<SideAngle>,
    postcritical: BTreeSet<Point>,
    critical: BTreeSet<Point>,
}

fn orbit(a: Angle) -> Vec<Angle> {
    a.orbit_info().distinct().to_vec()
}

impl Mating {
    pub fn new(alpha: Angle, beta: Angle) -> Result<Mating, MatingError> {
        for x in [alpha, beta] {
            if !x.is_preperiodic() {
                return Err(MatingError::NotPreperiodic(x));
            }
        }
        if !mateable(alpha, beta)? {
            return Err(MatingError::NotMateable(alpha, beta));
        }
        let mut m = Mating {
            alpha,
            beta,
            black: Landing::new(alpha)?,
            red: Landing::new(beta)?,
            graph_of: HashMap::new(),
            graphs: Vec::new(),
            tracked: Vec::new(),
            postcritical: BTreeSet::new(),
            critical: BTreeSet::new(),
        };
        let mut tracked = Vec::new();
        for a in orbit(alpha) {
            tracked.push(SideAngle::black(a));
        }
        for b in orbit(beta) {
            tracked.push(SideAngle::red(b));
        }
        let post: Vec<SideAngle> = tracked.clone();
        let (a0, a1) = alpha.try_halves()?;
        let (b0, b1) = beta.try_halves()?;
        let crit = [
            SideAngle::black(a0),
            SideAngle::black(a1),
            SideAngle::red(b0),
            SideAngle::red(b1),
        ];
        tracked.extend_from_slice(&crit);
        for s in post {
            let p = m.point(s)?;
            m.postcritical.insert(p);
        }
        for s in crit {
            let p = m.point(s)?;
            m.critical.insert(p);
        }
        m.tracked = tracked;
        Ok(m)
    }

    pub fn alpha(&self) -> Angle {
        self.alpha
    }

    pub fn beta(&self) -> Angle {
        self.beta
    }

    /// Postcritical angles followed by the four critical-point angles.
    pub fn tracked(&self) -> &[SideAngle] {
        &self.tracked
    }

    pub fn is_postcritical(&self, s: SideAngle) -> bool {
        let orbit_angle = match s.side {
            Color::Black => orbit(self.alpha),
            Color::Red => orbit(self.beta),
        };
        orbit_angle.contains(&s.angle)
    }

    fn landing(&mut self, side: Color) -> &mut Landing {
        match side {
            Color::Black => &mut self.black,
            Color::Red => &mut self.red,
        }
    }

    /// Classes of tracked angles under the essential identification, sorted
    /// by smallest member.
    pub fn essential_classes(&mut self) -> Result<Vec<EssentialClass>, MatingError> {
        let tracked = self.tracked.clone();
        let mut key_of: BTreeMap<SideAngle, (usize, Point)> = BTreeMap::new();
        for &s in &tracked {
            let p = self.point(s)?;
            let g = self.graph(p)?;
            let key = if self.collapsed(g)? { (g, (Color::Black, Angle::ZERO)) } else { (g, p) };
            key_of.insert(s, (key.0, key.1));
        }
        let mut groups: BTreeMap<(usize, Point), BTreeSet<SideAngle>> = BTreeMap::new();
        for (s, k) in &key_of {
            groups.entry(*k).or_default().insert(*s);
        }
        let mut members: Vec<BTreeSet<SideAngle>> = groups.into_values().collect();
        members.sort();
        let mut classes = Vec::with_capacity(members.len());
        for m in &members {
            let first = *m.iter().next().expect("nonempty");
            let img = self.point(first.double())?;
            let mut image = None;
            for (j, other) in members.iter().enumerate() {
                let rep = *other.iter().next().expect("nonempty");
                let q = self.point(rep)?;
                if self.essentially_equal(img, q)? {
                    image = Some(j);
                    break;
                }
            }
            classes.push(EssentialClass {
                members: m.clone(),
                image: image.expect("images of tracked angles are tracked"),
            });
        }
        Ok(classes)
    }

    /// The first class whose postcritical members sit at two or more curve
    /// parameters, joins a critical point to the postcritical set, or holds
    /// both critical values.
    pub fn pinch(&mut self) -> Result<Option<Pinch>, MatingError> {
        for class in self.essential_classes()? {
            let post: Vec<SideAngle> = class
                .members
                .iter()
                .copied()
                .filter(|s| self.is_postcritical(*s))
                .collect();
            let params: BTreeSet<Angle> = post.iter().map(|s| s.parameter()).collect();
            let has_critical = class.members.iter().any(|s| !self.is_postcritical(*s));
            let both_values = class.members.contains(&SideAngle::black(self.alpha))
                && class.members.contains(&SideAngle::red(self.beta));
            if params.len() >= 2 || (has_critical && !post.is_empty()) || both_values {
                return Ok(Some(Pinch {
                    members: class.members.into_iter().collect(),
                    parameters: params.into_iter().collect(),
                }));
            }
        }
        Ok(None)
    }
}

/// Ray graphs on a sphere built from two sides, enough to decide the
/// essential identification.
pub trait RayGraphs {
    fn point(&mut self, s: SideAngle) -> Result<Point, MatingError>;

    fn image(&mut self, p: Point) -> Result<Point, MatingError>;

    /// Index of the maximal ray graph through `p`.
    fn graph(&mut self, p: Point) -> Result<usize, MatingError>;

    fn graph_points(&self, g: usize) -> &BTreeSet<Point>;

    fn is_postcritical_point(&self, p: &Point) -> bool;

    fn is_critical_point(&self, p: &Point) -> bool;

    fn tracked_angles(&self) -> Vec<SideAngle>;

    fn graph_image(&mut self, g: usize) -> Result<usize, MatingError> {
        let p = *self.graph_points(g).iter().next().expect("graphs are nonempty");
        let q = self.image(p)?;
        self.graph(q)
    }

    fn postcritical_count(&self, g: usize) -> usize {
        self.graph_points(g)
            .iter()
            .filter(|p| self.is_postcritical_point(p))
            .count()
    }

    /// Whether the graph `g` is collapsed by the essential mating: it meets
    /// the critical orbit and some forward image holds two postcritical
    /// points.
    fn collapsed(&mut self, g: usize) -> Result<bool, MatingError> {
        let meets = self
            .graph_points(g)
            .iter()
            .any(|p| self.is_postcritical_point(p) || self.is_critical_point(p));
        if !meets {
            return Ok(false);
        }
        let mut visited = HashSet::new();
        let mut cur = self.graph_image(g)?;
        while visited.insert(cur) {
            if self.postcritical_count(cur) >= 2 {
                return Ok(true);
            }
            cur = self.graph_image(cur)?;
        }
        Ok(false)
    }

    /// Points `x`, `y` are identified by the essential mating.
    fn essentially_equal(&mut self, x: Point, y: Point) -> Result<bool, MatingError> {
        if x == y {
            return Ok(true);
        }
        let gx = self.graph(x)?;
        let gy = self.graph(y)?;
        Ok(gx == gy && self.collapsed(gx)?)
    }

    /// A pair of tracked angles in one ray graph that the essential mating
    /// keeps apart although their images are identified.
    fn fsr_obstruction(&mut self) -> Result<Option<(SideAngle, SideAngle)>, MatingError> {
        let tracked = self.tracked_angles();
        for (i, &x) in tracked.iter().enumerate() {
            for &y in &tracked[i + 1..] {
                let px = self.point(x)?;
                let py = self.point(y)?;
                if px == py || self.graph(px)? != self.graph(py)? {
                    continue;
                }
                if self.essentially_equal(px, py)? {
                    continue;
                }
                let hx = self.image(px)?;
                let hy = self.image(py)?;
                if self.essentially_equal(hx, hy)? {
                    return Ok(Some((x, y)));
                }
            }
        }
        Ok(None)
    }
}

impl RayGraphs for Mating {
    fn point(&mut self, s: SideAngle) -> Result<Point, MatingError> {
        let rep = self.landing(s.side).representative(s.angle)?;
        Ok((s.side, rep))
    }

    fn image(&mut self, p: Point) -> Result<Point, MatingError> {
        self.point(SideAngle {
            side: p.0,
            angle: p.1.double(),
        })
    }

    fn graph(&mut self, p: Point) -> Result<usize, MatingError> {
        if let Some(&g) = self.graph_of.get(&p) {
            return Ok(g);
        }
        let mut seen = BTreeSet::from([p]);
        let mut queue = VecDeque::from([p]);
        while let Some((side, rep)) = queue.pop_front() {
            let class = self.landing(side).class_of(rep)?;
            for a in class {
                let q = self.point(SideAngle {
                    side: side.other(),
                    angle: a.negate(),
                })?;
                if seen.insert(q) {
                    if seen.len() > MAX_GRAPH_POINTS {
                        return Err(MatingError::GraphTooLarge);
                    }
                    queue.push_back(q);
                }
            }
        }
        let id = self.graphs.len();
        for &q in &seen {
            self.graph_of.insert(q, id);
        }
        self.graphs.push(seen);
        Ok(id)
    }

    fn graph_points(&self, g: usize) -> &BTreeSet<Point> {
        &self.graphs[g]
    }

    fn is_postcritical_point(&self, p: &Point) -> bool {
        self.postcritical.contains(p)
    }

    fn is_critical_point(&self, p: &Point) -> bool {
        self.critical.contains(p)
    }

    fn tracked_angles(&self) -> Vec<SideAngle> {
        self.tracked.clone()
    }
}

pub fn essential_classes(alpha: Angle, beta: Angle) -> Result<Vec<EssentialClass>, MatingError> {
    Mating::new(alpha, beta)?.essential_classes()
}

pub fn is_jordan(alpha: Angle, beta: Angle) -> Result<bool, MatingError> {
    Ok(Mating::new(alpha, beta)?.pinch()?.is_none())
}

pub fn fsr_valid(alpha: Angle, beta: Angle) -> Result<bool, MatingError> {
    Ok(Mating::new(alpha, beta)?.fsr_obstruction()?.is_none())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarkKind {
    /// Postcritical point with 1-based id.
    Postcritical(usize),
    CriticalPoint(Color),
    Plumbing,
    /// Parameter 0 when it is not postcritical.
    Anchor,
}

impl fmt::Display for MarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkKind::Postcritical(id) => write!(f, "p{id}"),
            MarkKind::CriticalPoint(c) => write!(f, "critical-{c}"),
            MarkKind::Plumbing => write!(f, "plumbing"),
            MarkKind::Anchor => write!(f, "anchor"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mark {
    pub parameter: Angle,
    pub kind: MarkKind,
    /// Index into the essential classes of the mating.
    pub class: Option<usize>,
}

/// Marked parameters on the curve `C_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub level: usize,
    /// Ascending parameters with 0 last.
    pub marks: Vec<Mark>,
    /// Level-0 postcritical parameters, indexed by id - 1.
    pub postcritical: Vec<Angle>,
    pub black_value: Angle,
    pub red_value: Angle,
}

/// Ascending with 0 moved to the end.
fn circular_key(a: Angle) -> (bool, Angle) {
    (a.is_zero(), a)
}

impl Schedule {
    pub fn parameters(&self) -> Vec<Angle> {
        self.marks.iter().map(|m| m.parameter).collect()
    }

    pub fn postcritical_count(&self) -> usize {
        self.postcritical.len()
    }

    /// Orbifold caveat: Thurston's algorithm is not guaranteed to converge
    /// with four or fewer postcritical points.
    pub fn orbifold_warning(&self) -> Option<String> {
        (self.postcritical.len() <= 4).then(|| {
            format!(
                "only {} postcritical points; the orbifold may be parabolic and convergence is not guaranteed",
                self.postcritical.len()
            )
        })
    }

    pub fn id_of(&self, parameter: Angle) -> Option<usize> {
        self.postcritical.iter().position(|&p| p == parameter).map(|i| i + 1)
    }

    pub fn mark_at(&self, parameter: Angle) -> Option<&Mark> {
        self.marks.iter().find(|m| m.parameter == parameter)
    }

    pub fn critical_points(&self, color: Color) -> Vec<Angle> {
        self.marks
            .iter()
            .filter(|m| m.kind == MarkKind::CriticalPoint(color))
            .map(|m| m.parameter)
            .collect()
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "level {}", self.level)?;
        for m in &self.marks {
            writeln!(f, "{:>12}  {}", m.parameter.to_string(), m.kind)?;
        }
        Ok(())
    }
}

/// Level-0 schedule: the postcritical parameters plus the anchor at 0.
pub fn base_schedule(alpha: Angle, beta: Angle) -> Result<Schedule, MatingError> {
    let mut mating = Mating::new(alpha, beta)?;
    if alpha == beta.negate() {
        return Err(MatingError::CriticalValuesIdentified);
    }
    let classes = mating.essential_classes()?;
    let class_of = |s: SideAngle| classes.iter().position(|c| c.members.contains(&s));
    let bv = class_of(SideAngle::black(alpha));
    if bv.is_some() && bv == class_of(SideAngle::red(beta)) {
        return Err(MatingError::CriticalValuesIdentified);
    }
    if let Some(p) = mating.pinch()? {
        return Err(MatingError::Pinched(p));
    }
    let mut by_param: BTreeMap<(bool, Angle), Option<usize>> = BTreeMap::new();
    for &s in mating.tracked() {
        if mating.is_postcritical(s) {
            by_param.insert(circular_key(s.parameter()), class_of(s));
        }
    }
    let postcritical: Vec<Angle> = by_param.keys().map(|k| k.1).collect();
    let mut marks: Vec<Mark> = by_param
        .iter()
        .enumerate()
        .map(|(i, (k, c))| Mark {
            parameter: k.1,
            kind: MarkKind::Postcritical(i + 1),
            class: *c,
        })
        .collect();
    if !postcritical.contains(&Angle::ZERO) {
        marks.push(Mark {
            parameter: Angle::ZERO,
            kind: MarkKind::Anchor,
            class: None,
        });
    }
    Ok(Schedule {
        level: 0,
        marks,
        postcritical,
        black_value: alpha,
        red_value: beta.negate(),
    })
}

/// Schedule on `C_{n+1}`: every half of every parameter of `s`.
pub fn pullback_schedule(s: &Schedule) -> Result<Schedule, MatingError> {
    let (b0, b1) = s.black_value.try_halves()?;
    let (r0, r1) = s.red_value.try_halves()?;
    let mut params = Vec::with_capacity(2 * s.marks.len());
    for m in &s.marks {
        let (h0, h1) = m.parameter.try_halves()?;
        params.push(h0);
        params.push(h1);
    }
    params.sort_by_key(|&a| circular_key(a));
    params.dedup();
    let marks = params
        .into_iter()
        .map(|p| {
            let kind = if let Some(id) = s.id_of(p) {
                MarkKind::Postcritical(id)
            } else if p == b0 || p == b1 {
                MarkKind::CriticalPoint(Color::Black)
            } else if p == r0 || p == r1 {
                MarkKind::CriticalPoint(Color::Red)
            } else if p.is_zero() {
                MarkKind::Anchor
            } else {
                MarkKind::Plumbing
            };
            let class = match kind {
                MarkKind::Postcritical(id) => s
                    .marks
                    .iter()
                    .find(|m| m.kind == MarkKind::Postcritical(id))
                    .and_then(|m| m.class),
                _ => None,
            };
            Mark {
                parameter: p,
                kind,
                class,
            }
        })
        .collect();
    Ok(Schedule {
        level: s.level + 1,
        marks,
        postcritical: s.postcritical.clone(),
        black_value: s.black_value,
        red_value: s.red_value,
    })
}

/// Schedule at `level`, by repeated pullback of the base schedule.
pub fn schedule_at(alpha: Angle, beta: Angle, level: usize) -> Result<Schedule, MatingError> {
    let mut s = base_schedule(alpha, beta)?;
    for _ in 0..level {
        s = pullback_schedule(&s)?;
    }
    Ok(s)
}
