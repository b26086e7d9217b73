//! Co-landing of external rays for a critically preperiodic quadratic
//! polynomial, read off from its characteristic angle, plus the limb test
//! used to decide mateability.
//!
//! Two rational rays land together exactly when their itineraries with
//! respect to the critical diameter `{θ/2, θ/2 + 1/2}` agree. The class of an
//! angle is built by enumerating the periodic rays with the same itinerary
//! as its periodic image and pulling them back along the preperiodic part of
//! the itinerary.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::angle::{in_open_arc, Angle, AngleError};

/// Largest ray period whose periodic candidates are enumerated.
pub const MAX_RAY_PERIOD: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LaminationError {
    #[error("angle {0} is periodic; a strictly preperiodic angle is required")]
    Periodic(Angle),
    #[error("lamination depth must be positive")]
    ZeroDepth,
    #[error("invalid limb rotation {0}/{1}")]
    InvalidRotation(u64, u64),
    #[error("ray period {0} exceeds the supported maximum {MAX_RAY_PERIOD}")]
    PeriodTooLarge(usize),
    #[error(transparent)]
    Angle(#[from] AngleError),
}

/// A chord of the circle joining two distinct angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Leaf {
    lo: Angle,
    hi: Angle,
}

impl Leaf {
    pub fn new(a: Angle, b: Angle) -> Leaf {
        assert_ne!(a, b, "leaf endpoints must differ");
        if a < b {
            Leaf { lo: a, hi: b }
        } else {
            Leaf { lo: b, hi: a }
        }
    }

    pub fn endpoints(self) -> (Angle, Angle) {
        (self.lo, self.hi)
    }

    /// Strict interleaving of endpoints. Leaves sharing an endpoint do not
    /// cross.
    pub fn crosses(self, other: Leaf) -> bool {
        let inside = |x: Angle| self.lo < x && x < self.hi;
        let shared = [other.lo, other.hi]
            .iter()
            .any(|&x| x == self.lo || x == self.hi);
        !shared && (inside(other.lo) != inside(other.hi))
    }
}

impl fmt::Display for Leaf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.lo, self.hi)
    }
}

fn require_preperiodic(theta: Angle) -> Result<(), LaminationError> {
    if theta.is_preperiodic() {
        Ok(())
    } else {
        Err(LaminationError::Periodic(theta))
    }
}

/// The leaf `{θ/2, θ/2 + 1/2}` whose endpoints land at the critical point.
pub fn critical_leaf(theta: Angle) -> Result<Leaf, LaminationError> {
    require_preperiodic(theta)?;
    let (lo, hi) = theta.try_halves()?;
    Ok(Leaf::new(lo, hi))
}

/// Iterated preimages of the critical leaf: generation 0 is the critical
/// leaf, generation `k + 1` holds the two non-crossing preimages of every
/// generation-`k` leaf. Returns `2^depth - 1` leaves ordered by generation.
pub fn pullback_lamination(theta: Angle, depth: usize) -> Result<Vec<Leaf>, LaminationError> {
    if depth == 0 {
        return Err(LaminationError::ZeroDepth);
    }
    let crit = critical_leaf(theta)?;
    let (c0, c1) = crit.endpoints();
    let mut all = vec![crit];
    let mut frontier = vec![crit];
    for _ in 1..depth {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for leaf in &frontier {
            let (a, b) = leaf.endpoints();
            let (a0, a1) = a.try_halves()?;
            let (b0, b1) = b.try_halves()?;
            // Each half-open side [c0, c1), [c1, c0) of the critical leaf holds
            // exactly one preimage of every angle; pair them up side by side.
            let on_first_side = |x: Angle| x == c0 || in_open_arc(x, c0, c1);
            let (a_first, a_second) = if on_first_side(a0) { (a0, a1) } else { (a1, a0) };
            let (b_first, b_second) = if on_first_side(b0) { (b0, b1) } else { (b1, b0) };
            next.push(Leaf::new(a_first, b_first));
            next.push(Leaf::new(a_second, b_second));
        }
        all.extend_from_slice(&next);
        frontier = next;
    }
    Ok(all)
}

/// Whether a family of leaves with pairwise distinct endpoints is free of
/// crossings, by a parenthesis-matching sweep around the circle.
pub fn is_non_crossing(leaves: &[Leaf]) -> bool {
    let mut ends: Vec<(Angle, usize)> = Vec::with_capacity(leaves.len() * 2);
    for (i, l) in leaves.iter().enumerate() {
        ends.push((l.lo, i));
        ends.push((l.hi, i));
    }
    ends.sort();
    let mut stack: Vec<usize> = Vec::new();
    for (_, i) in ends {
        if stack.last() == Some(&i) {
            stack.pop();
        } else {
            stack.push(i);
        }
    }
    stack.is_empty()
}

/// Position of an angle relative to the critical diameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    /// Open arc from `θ/2` counterclockwise to `θ/2 + 1/2`.
    A,
    /// The complementary open arc.
    B,
    /// On the critical diameter itself.
    Critical,
}

/// Limb of the main cardioid with rotation number `p/q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LimbId {
    pub p: u64,
    pub q: u64,
}

impl LimbId {
    pub fn new(p: u64, q: u64) -> Result<LimbId, LaminationError> {
        if q < 2 || p == 0 || p >= q || gcd(p, q) != 1 || q > 62 {
            return Err(LaminationError::InvalidRotation(p, q));
        }
        Ok(LimbId { p, q })
    }

    pub fn conjugate(self) -> LimbId {
        LimbId {
            p: self.q - self.p,
            q: self.q,
        }
    }
}

impl fmt::Display for LimbId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Co-landing oracle for one polynomial, memoizing computed classes.
#[derive(Debug, Clone)]
pub struct Landing {
    theta: Angle,
    c0: Angle,
    c1: Angle,
    cache: HashMap<Angle, BTreeSet<Angle>>,
}

impl Landing {
    pub fn new(theta: Angle) -> Result<Landing, LaminationError> {
        let (c0, c1) = critical_leaf(theta)?.endpoints();
        Ok(Landing {
            theta,
            c0,
            c1,
            cache: HashMap::new(),
        })
    }

    pub fn theta(&self) -> Angle {
        self.theta
    }

    pub fn symbol(&self, x: Angle) -> Symbol {
        if x == self.c0 || x == self.c1 {
            Symbol::Critical
        } else if in_open_arc(x, self.c0, self.c1) {
            Symbol::A
        } else {
            Symbol::B
        }
    }

    /// Whether `s` and `t` have identical itineraries.
    pub fn same_itinerary(&self, s: Angle, t: Angle) -> bool {
        let mut seen = HashSet::new();
        let (mut x, mut y) = (s, t);
        while seen.insert((x, y)) {
            if self.symbol(x) != self.symbol(y) {
                return false;
            }
            x = x.double();
            y = y.double();
        }
        true
    }

    fn preimage_in(&self, x: Angle, sym: Symbol) -> Result<Angle, LaminationError> {
        let (h0, h1) = x.try_halves()?;
        Ok(if self.symbol(h0) == sym { h0 } else { h1 })
    }

    /// All angles whose rays land at the same point as the ray at `s`.
    pub fn class_of(&mut self, s: Angle) -> Result<BTreeSet<Angle>, LaminationError> {
        if let Some(c) = self.cache.get(&s) {
            return Ok(c.clone());
        }
        let info = s.orbit_info();
        let l = info.preperiod;
        let periodic = info.orbit[l];
        let mut class = match self.cache.get(&periodic) {
            Some(c) => c.clone(),
            None => self.periodic_class(periodic, info.period)?,
        };
        for j in (0..l).rev() {
            if class.contains(&self.theta) {
                // Preimages of the critical value class all land at the
                // critical point.
                let mut next = BTreeSet::new();
                for &x in &class {
                    let (h0, h1) = x.try_halves()?;
                    next.insert(h0);
                    next.insert(h1);
                }
                class = next;
            } else {
                let sym = self.symbol(info.orbit[j]);
                class = class
                    .iter()
                    .map(|&x| self.preimage_in(x, sym))
                    .collect::<Result<_, _>>()?;
            }
        }
        for &x in &class {
            self.cache.insert(x, class.clone());
        }
        Ok(class)
    }

    fn periodic_class(&self, p: Angle, period: usize) -> Result<BTreeSet<Angle>, LaminationError> {
        if period > MAX_RAY_PERIOD {
            return Err(LaminationError::PeriodTooLarge(period));
        }
        let den = (1u64 << period) - 1;
        let mut target = Vec::with_capacity(period);
        let mut x = p;
        for _ in 0..period {
            target.push(self.symbol(x));
            x = x.double();
        }
        let mut class = BTreeSet::new();
        for k in 0..den {
            let mut y = Angle::reduce(k as i128, den)?;
            let start = y;
            let mut ok = true;
            for &sym in &target {
                if self.symbol(y) != sym {
                    ok = false;
                    break;
                }
                y = y.double();
            }
            if ok && y == start {
                class.insert(start);
            }
        }
        Ok(class)
    }

    /// Canonical representative (smallest angle) of the landing class.
    pub fn representative(&mut self, s: Angle) -> Result<Angle, LaminationError> {
        Ok(*self.class_of(s)?.iter().next().expect("class contains s"))
    }
}

/// Partition of a finite angle set into co-landing classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandingPartition {
    pub classes: Vec<Vec<Angle>>,
}

impl LandingPartition {
    pub fn class_index(&self, a: Angle) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&a))
    }
}

pub fn landing_partition(theta: Angle, angles: &[Angle]) -> Result<LandingPartition, LaminationError> {
    let mut oracle = Landing::new(theta)?;
    let mut groups: Vec<(Angle, Vec<Angle>)> = Vec::new();
    let mut distinct: Vec<Angle> = angles.to_vec();
    distinct.sort();
    distinct.dedup();
    for a in distinct {
        let rep = oracle.representative(a)?;
        match groups.iter_mut().find(|(r, _)| *r == rep) {
            Some((_, g)) => g.push(a),
            None => groups.push((rep, vec![a])),
        }
    }
    Ok(LandingPartition {
        classes: groups.into_iter().map(|(_, g)| g).collect(),
    })
}

/// The `q`-cycle under doubling with combinatorial rotation number `p/q`,
/// sorted ascending.
pub fn rotation_cycle(limb: LimbId) -> Vec<Angle> {
    let (p, q) = (limb.p, limb.q);
    let den = (1u64 << q) - 1;
    (0..q)
        .map(|i| {
            let mut num = 0u64;
            for n in 0..q {
                let idx = (i + n * p) % q;
                let bit = (idx >= q - p) as u64;
                num = (num << 1) | bit;
            }
            Angle::reduce(num as i128, den).expect("den < 2^62")
        })
        .collect()
}

/// The two angles bounding the wake of the `p/q`-limb.
pub fn wake(limb: LimbId) -> (Angle, Angle) {
    let cycle = rotation_cycle(limb);
    let n = cycle.len();
    (0..n)
        .map(|i| (cycle[i], cycle[(i + 1) % n]))
        .min_by_key(|&(a, b)| a.ccw_distance(b).expect("same denominator"))
        .expect("q >= 2")
}

/// Largest rotation denominator tried by [`limb_of`].
pub fn limb_search_bound(theta: Angle) -> u64 {
    let bits = 64 - theta.denominator().leading_zeros() as u64;
    (1 + bits).clamp(16, 62)
}

/// The primary limb whose wake contains `theta`, if any.
pub fn limb_of(theta: Angle) -> Result<Option<LimbId>, LaminationError> {
    require_preperiodic(theta)?;
    for q in 2..=limb_search_bound(theta) {
        for p in 1..q {
            if gcd(p, q) != 1 {
                continue;
            }
            let limb = LimbId { p, q };
            let (lo, hi) = wake(limb);
            if in_open_arc(theta, lo, hi) {
                return Ok(Some(limb));
            }
        }
    }
    Ok(None)
}

/// False exactly when the two parameters sit in complex conjugate limbs.
pub fn mateable(alpha: Angle, beta: Angle) -> Result<bool, LaminationError> {
    let la = limb_of(alpha)?;
    let lb = limb_of(beta)?;
    Ok(match (la, lb) {
        (Some(a), Some(b)) => a.conjugate() != b,
        _ => true,
    })
}
