//! Exact rational angles modulo 1 and the doubling map.
//!
//! Angles are stored reduced, so structural equality is value equality and
//! an [`Angle`] can be used directly as a map key. Doubling never grows the
//! denominator; halving doubles it, and every operation that can outgrow the
//! representation is checked.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Largest denominator an angle may carry.
pub const MAX_DENOMINATOR: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AngleError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("denominator exceeds 2^62")]
    Overflow,
    #[error("cyclic order needs three distinct angles, got {0}, {1}, {2}")]
    NotDistinct(Angle, Angle, Angle),
    #[error("cannot parse angle {0:?}: expected p/q")]
    Parse(String),
}

/// A rational number in `[0, 1)`, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Angle {
    num: u64,
    den: u64,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Angle {
    pub const ZERO: Angle = Angle { num: 0, den: 1 };

    /// `(p mod q) / q` in lowest terms.
    pub fn reduce(p: i128, q: u64) -> Result<Angle, AngleError> {
        if q == 0 {
            return Err(AngleError::ZeroDenominator);
        }
        let r = p.rem_euclid(q as i128) as u128;
        Self::from_wide(r, q as u128)
    }

    /// Reduce `num / den` where `num < den` is not required; the value is
    /// taken mod 1.
    fn from_wide(num: u128, den: u128) -> Result<Angle, AngleError> {
        debug_assert!(den > 0);
        let num = num % den;
        let g = gcd(num, den);
        let (n, d) = (num / g, den / g);
        if d > MAX_DENOMINATOR as u128 {
            return Err(AngleError::Overflow);
        }
        Ok(Angle {
            num: n as u64,
            den: d as u64,
        })
    }

    pub fn numerator(self) -> u64 {
        self.num
    }

    pub fn denominator(self) -> u64 {
        self.den
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `2a mod 1`.
    pub fn double(self) -> Angle {
        // The denominator can only shrink, so this never overflows.
        Self::from_wide(2 * self.num as u128, self.den as u128).expect("doubling shrinks")
    }

    /// The two preimages under doubling, `(a/2, a/2 + 1/2)`.
    pub fn halves(self) -> (Angle, Angle) {
        self.try_halves().expect("angle denominator overflow while halving")
    }

    pub fn try_halves(self) -> Result<(Angle, Angle), AngleError> {
        let d = 2 * self.den as u128;
        let lo = Self::from_wide(self.num as u128, d)?;
        let hi = Self::from_wide(self.num as u128 + self.den as u128, d)?;
        Ok((lo, hi))
    }

    /// `1 - a mod 1`; the angle of the opposing ray in the formal mating.
    pub fn negate(self) -> Angle {
        if self.num == 0 {
            self
        } else {
            Angle {
                num: self.den - self.num,
                den: self.den,
            }
        }
    }

    pub fn checked_add(self, other: Angle) -> Result<Angle, AngleError> {
        let (a, b) = (self.num as u128, self.den as u128);
        let (c, d) = (other.num as u128, other.den as u128);
        let g = gcd(b, d);
        let den = b / g * d;
        Self::from_wide(a * (d / g) + c * (b / g), den)
    }

    /// Counterclockwise arc length from `self` to `other`, in `[0, 1)`.
    pub fn ccw_distance(self, other: Angle) -> Result<Angle, AngleError> {
        self.negate().checked_add(other)
    }

    /// The point `k/n` of the way along the counterclockwise arc from `self`
    /// to `to`. A zero-length arc is read as the full circle.
    pub fn lerp_ccw(self, to: Angle, k: u64, n: u64) -> Result<Angle, AngleError> {
        if n == 0 {
            return Err(AngleError::ZeroDenominator);
        }
        let span = self.ccw_distance(to)?;
        let (sn, sd) = if span.is_zero() {
            (1u128, 1u128)
        } else {
            (span.num as u128, span.den as u128)
        };
        let step_num = sn
            .checked_mul(k as u128)
            .ok_or(AngleError::Overflow)?;
        let step_den = sd.checked_mul(n as u128).ok_or(AngleError::Overflow)?;
        let g = gcd(step_num, step_den);
        let step = Self::from_wide(step_num / g, step_den / g)?;
        self.checked_add(step)
    }

    /// Midpoint of the counterclockwise arc from `self` to `to`.
    pub fn ccw_midpoint(self, to: Angle) -> Result<Angle, AngleError> {
        self.lerp_ccw(to, 1, 2)
    }

    pub fn orbit_info(self) -> OrbitInfo {
        let preperiod = self.den.trailing_zeros() as usize;
        let odd = self.den >> preperiod;
        let mut period = 1usize;
        if odd > 1 {
            let mut r = 2 % odd;
            while r != 1 {
                r = (r as u128 * 2 % odd as u128) as u64;
                period += 1;
            }
        }
        let mut orbit = Vec::with_capacity(preperiod + period + 1);
        orbit.push(self);
        for _ in 0..preperiod + period {
            orbit.push(orbit.last().unwrap().double());
        }
        OrbitInfo {
            preperiod,
            period,
            orbit,
        }
    }

    /// Strictly preperiodic under doubling, i.e. the reduced denominator is
    /// even.
    pub fn is_preperiodic(self) -> bool {
        self.den.is_multiple_of(2)
    }
}

impl Ord for Angle {
    fn cmp(&self, other: &Self) -> Ordering {
        let l = self.num as u128 * other.den as u128;
        let r = other.num as u128 * self.den as u128;
        l.cmp(&r)
    }
}

impl PartialOrd for Angle {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num == 0 {
            write!(f, "0")
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Angle {
    type Err = AngleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || AngleError::Parse(s.to_string());
        match t.split_once('/') {
            None => {
                let p: i128 = t.parse().map_err(|_| bad())?;
                Angle::reduce(p, 1)
            }
            Some((p, q)) => {
                let p: i128 = p.trim().parse().map_err(|_| bad())?;
                let q: u64 = q.trim().parse().map_err(|_| bad())?;
                Angle::reduce(p, q)
            }
        }
    }
}

/// The forward orbit of an angle under doubling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitInfo {
    pub preperiod: usize,
    pub period: usize,
    /// All distinct orbit entries followed by the first repeat.
    pub orbit: Vec<Angle>,
}

impl OrbitInfo {
    /// The distinct angles of the orbit.
    pub fn distinct(&self) -> &[Angle] {
        &self.orbit[..self.orbit.len() - 1]
    }
}

/// True iff walking counterclockwise from `a` reaches `b` before `c`.
pub fn cyclic_between(a: Angle, b: Angle, c: Angle) -> Result<bool, AngleError> {
    if a == b || b == c || a == c {
        return Err(AngleError::NotDistinct(a, b, c));
    }
    Ok(a.ccw_distance(b)? < a.ccw_distance(c)?)
}

/// Whether `x` lies in the open counterclockwise arc `(from, to)`.
pub fn in_open_arc(x: Angle, from: Angle, to: Angle) -> bool {
    if x == from || x == to {
        return false;
    }
    if from == to {
        return true;
    }
    cyclic_between(from, x, to).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(p: i128, q: u64) -> Angle {
        Angle::reduce(p, q).unwrap()
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(a(5, 4), a(1, 4));
        assert_eq!(a(2, 8), a(1, 4));
        assert_eq!(a(-1, 4), a(3, 4));
        assert_eq!(Angle::reduce(1, 0), Err(AngleError::ZeroDenominator));
    }

    #[test]
    fn double_examples() {
        assert_eq!(a(1, 4).double(), a(1, 2));
        assert_eq!(a(7, 8).double(), a(3, 4));
        assert_eq!(Angle::ZERO.double(), Angle::ZERO);
    }

    #[test]
    fn halves_examples() {
        assert_eq!(a(1, 4).halves(), (a(1, 8), a(5, 8)));
        assert_eq!(a(7, 8).halves(), (a(7, 16), a(15, 16)));
        assert_eq!(Angle::ZERO.halves(), (Angle::ZERO, a(1, 2)));
    }

    #[test]
    fn orbit_examples() {
        let o = a(1, 4).orbit_info();
        assert_eq!((o.preperiod, o.period), (2, 1));
        assert_eq!(o.orbit, vec![a(1, 4), a(1, 2), Angle::ZERO, Angle::ZERO]);
        let o = a(1, 6).orbit_info();
        assert_eq!((o.preperiod, o.period), (1, 2));
        assert_eq!(o.orbit, vec![a(1, 6), a(1, 3), a(2, 3), a(1, 3)]);
        let o = Angle::ZERO.orbit_info();
        assert_eq!((o.preperiod, o.period), (0, 1));
    }

    #[test]
    fn preperiodic_examples() {
        assert!(a(1, 4).is_preperiodic());
        assert!(!a(1, 3).is_preperiodic());
        assert!(!Angle::ZERO.is_preperiodic());
    }

    #[test]
    fn cyclic_examples() {
        assert!(cyclic_between(Angle::ZERO, a(1, 4), a(1, 2)).unwrap());
        assert!(cyclic_between(a(1, 2), a(3, 4), a(1, 4)).unwrap());
        assert!(!cyclic_between(Angle::ZERO, a(1, 2), a(1, 4)).unwrap());
        assert!(cyclic_between(Angle::ZERO, Angle::ZERO, a(1, 4)).is_err());
    }

    #[test]
    fn parse_and_print() {
        assert_eq!("1/4".parse::<Angle>().unwrap(), a(1, 4));
        assert_eq!("0".parse::<Angle>().unwrap(), Angle::ZERO);
        assert_eq!(" 13/14 ".parse::<Angle>().unwrap(), a(13, 14));
        assert!("1/0".parse::<Angle>().is_err());
        assert!("x".parse::<Angle>().is_err());
        assert_eq!(a(15, 16).to_string(), "15/16");
        assert_eq!(Angle::ZERO.to_string(), "0");
    }

    #[test]
    fn halves_invert_double_exhaustive() {
        for q in 1..=(1u64 << 12) {
            for p in 0..q {
                let x = a(p as i128, q);
                if x.denominator() != q {
                    continue;
                }
                let (lo, hi) = x.halves();
                assert_eq!(lo.double(), x);
                assert_eq!(hi.double(), x);
                assert!(lo < a(1, 2));
            }
        }
    }

    #[test]
    fn preperiod_iff_even_denominator_exhaustive() {
        for q in 1..=(1u64 << 10) {
            for p in 0..q {
                let x = a(p as i128, q);
                if x.denominator() != q {
                    continue;
                }
                let info = x.orbit_info();
                assert_eq!(info.orbit[info.preperiod + info.period], info.orbit[info.preperiod]);
                let distinct: std::collections::HashSet<_> = info.distinct().iter().collect();
                assert_eq!(distinct.len(), info.distinct().len());
                assert_eq!(info.preperiod >= 1, q % 2 == 0, "{x}");
            }
        }
    }

    #[test]
    fn lerp_and_midpoint() {
        assert_eq!(a(1, 4).ccw_midpoint(a(1, 2)).unwrap(), a(3, 8));
        assert_eq!(a(7, 8).ccw_midpoint(Angle::ZERO).unwrap(), a(15, 16));
        assert_eq!(Angle::ZERO.lerp_ccw(Angle::ZERO, 1, 4).unwrap(), a(1, 4));
        assert_eq!(a(3, 4).lerp_ccw(a(1, 4), 1, 2).unwrap(), Angle::ZERO);
    }

    use proptest::prelude::*;

    fn any_angle() -> impl Strategy<Value = Angle> {
        (1u64..100_000).prop_flat_map(|q| (0..q).prop_map(move |p| a(p as i128, q)))
    }

    proptest! {
        #[test]
        fn reduce_is_idempotent(x in any_angle()) {
            prop_assert_eq!(Angle::reduce(x.numerator() as i128, x.denominator()).unwrap(), x);
        }

        #[test]
        fn cyclic_order_is_exclusive(x in any_angle(), y in any_angle(), z in any_angle()) {
            prop_assume!(x != y && y != z && x != z);
            let l = cyclic_between(x, y, z).unwrap();
            let r = cyclic_between(x, z, y).unwrap();
            prop_assert!(l ^ r);
        }
    }
}
