//! Points of the Riemann sphere and the normalized quadratic rational maps
//! with critical points 0 and ∞ and fixed point 1.
//!
//! The map with critical values `u = F(0)` and `v = F(∞)` is
//!
//! ```text
//! F(z) = ((u-1) v z² - u (v-1)) / ((u-1) z² - (v-1))
//! ```
//!
//! Stereographic projection sends 0 to the north pole `(0, 0, 1)`, ∞ to the
//! south pole and 1 to `(1, 0, 0)`.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::config::Tolerances;

pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// A point of the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl std::ops::Neg for SpherePoint {
    type Output = SpherePoint;

    fn neg(self) -> SpherePoint {
        match self {
            SpherePoint::Finite(z) => SpherePoint::Finite(-z),
            SpherePoint::Infinity => SpherePoint::Infinity,
        }
    }
}

impl SpherePoint {
    pub const ZERO: SpherePoint = SpherePoint::Finite(Complex64::new(0.0, 0.0));
    pub const ONE: SpherePoint = SpherePoint::Finite(Complex64::new(1.0, 0.0));

    /// Non-finite input maps to ∞.
    pub fn new(z: Complex64) -> SpherePoint {
        if z.re.is_finite() && z.im.is_finite() {
            SpherePoint::Finite(z)
        } else {
            SpherePoint::Infinity
        }
    }

    pub fn from_re_im(re: f64, im: f64) -> SpherePoint {
        SpherePoint::new(Complex64::new(re, im))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn finite(self) -> Option<Complex64> {
        match self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }

    pub fn recip(self) -> SpherePoint {
        match self {
            SpherePoint::Infinity => SpherePoint::ZERO,
            SpherePoint::Finite(z) if z == Complex64::new(0.0, 0.0) => SpherePoint::Infinity,
            SpherePoint::Finite(z) => SpherePoint::new(z.inv()),
        }
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpherePoint::Finite(z) => write!(f, "{:.17e} {:.17e}", z.re, z.im),
            SpherePoint::Infinity => f.write_str("inf"),
        }
    }
}

/// Chordal distance on the unit sphere, in `[0, 2]`.
pub fn chordal_distance(a: SpherePoint, b: SpherePoint) -> f64 {
    match (a, b) {
        (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
        (SpherePoint::Infinity, SpherePoint::Finite(z)) | (SpherePoint::Finite(z), SpherePoint::Infinity) => {
            2.0 / (1.0 + z.norm_sqr()).sqrt()
        }
        (SpherePoint::Finite(x), SpherePoint::Finite(y)) => {
            // Fixed argument order keeps the result bit-symmetric.
            let key = |z: Complex64| (z.norm(), z.re, z.im);
            let (x, y) = if key(x) <= key(y) { (x, y) } else { (y, x) };
            if x.norm() > 1.0 {
                // Inversion is an isometry and keeps the moduli small.
                let (x, y) = (x.inv(), y.inv());
                2.0 * (x - y).norm() / (1.0 + x.norm_sqr()).sqrt() / (1.0 + y.norm_sqr()).sqrt()
            } else if y.norm() > 1.0 {
                // |x - y| / sqrt(1 + |y|²) written in terms of 1/y.
                let r = y.inv();
                2.0 * (x * r - 1.0).norm() / (1.0 + x.norm_sqr()).sqrt() / (1.0 + r.norm_sqr()).sqrt()
            } else {
                2.0 * (x - y).norm() / (1.0 + x.norm_sqr()).sqrt() / (1.0 + y.norm_sqr()).sqrt()
            }
        }
    }
}

pub fn stereographic(z: SpherePoint) -> Vec3 {
    match z {
        SpherePoint::Infinity => [0.0, 0.0, -1.0],
        SpherePoint::Finite(z) if z.norm() <= 1.0 => {
            let r2 = z.norm_sqr();
            let s = 1.0 + r2;
            [2.0 * z.re / s, 2.0 * z.im / s, (1.0 - r2) / s]
        }
        SpherePoint::Finite(z) => {
            let w = z.inv();
            let r2 = w.norm_sqr();
            let s = 1.0 + r2;
            [2.0 * w.re / s, -2.0 * w.im / s, (r2 - 1.0) / s]
        }
    }
}

/// Inverse of [`stereographic`] for a (not necessarily unit) nonzero vector.
pub fn from_sphere(p: Vec3) -> SpherePoint {
    let n = norm(p);
    let [x, y, z] = [p[0] / n, p[1] / n, p[2] / n];
    if z >= 0.0 {
        SpherePoint::new(Complex64::new(x, y) / (1.0 + z))
    } else {
        let w = Complex64::new(x, -y) / (1.0 - z);
        SpherePoint::Finite(w).recip()
    }
}

/// Point halfway along the shorter great-circle arc, or `None` for
/// antipodal input.
pub fn spherical_midpoint(a: SpherePoint, b: SpherePoint) -> Option<SpherePoint> {
    let s = add(stereographic(a), stereographic(b));
    (norm(s) > 1e-12).then(|| from_sphere(s))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("degenerate critical values: u = v = {0}")]
    Degenerate(SpherePoint),
    #[error("normalization collision: a critical value equals the fixed point 1")]
    NormalizationCollision,
    #[error("normalization check failed: residual {0:e}")]
    NormalizationCheck(f64),
}

/// `F(z) = 1 + k (z² - 1) / (c z² + d)` with `k = (u-1)(v-1)`, `c = u - 1`,
/// `d = -(v-1)`. This factored form fixes 1 exactly and avoids the
/// cancellation of the expanded coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedQuadratic {
    u: SpherePoint,
    v: SpherePoint,
    k: Complex64,
    c: Complex64,
    d: Complex64,
    pole_radius: f64,
}

impl NormalizedQuadratic {
    pub fn from_critical_values(u: SpherePoint, v: SpherePoint) -> Result<Self, MapError> {
        Self::with_tolerances(u, v, &Tolerances::default())
    }

    pub fn with_tolerances(u: SpherePoint, v: SpherePoint, tol: &Tolerances) -> Result<Self, MapError> {
        if chordal_distance(u, v) <= tol.degenerate {
            return Err(MapError::Degenerate(u));
        }
        if chordal_distance(u, SpherePoint::ONE) <= tol.degenerate
            || chordal_distance(v, SpherePoint::ONE) <= tol.degenerate
        {
            return Err(MapError::NormalizationCollision);
        }
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let (k, c, d) = match (u, v) {
            (SpherePoint::Finite(u), SpherePoint::Finite(v)) => ((u - one) * (v - one), u - one, -(v - one)),
            // Limits of the generic form after dividing through by u or v.
            (SpherePoint::Infinity, SpherePoint::Finite(v)) => (v - one, one, zero),
            (SpherePoint::Finite(u), SpherePoint::Infinity) => (u - one, zero, -one),
            (SpherePoint::Infinity, SpherePoint::Infinity) => unreachable!("u = v rejected above"),
        };
        let f = NormalizedQuadratic {
            u,
            v,
            k,
            c,
            d,
            pole_radius: tol.pole_radius,
        };
        let residual = chordal_distance(f.eval(SpherePoint::ZERO), u)
            .max(chordal_distance(f.eval(SpherePoint::Infinity), v))
            .max(chordal_distance(f.eval(SpherePoint::ONE), SpherePoint::ONE));
        if residual > tol.normalization {
            return Err(MapError::NormalizationCheck(residual));
        }
        Ok(f)
    }

    pub fn u(&self) -> SpherePoint {
        self.u
    }

    pub fn v(&self) -> SpherePoint {
        self.v
    }

    /// Coefficients `(a, b, c, d)` of `F(z) = (a z² + b) / (c z² + d)`.
    pub fn coefficients(&self) -> [Complex64; 4] {
        [self.c + self.k, self.d - self.k, self.c, self.d]
    }

    pub fn eval(&self, z: SpherePoint) -> SpherePoint {
        let one = Complex64::new(1.0, 0.0);
        let (num, den) = match z {
            SpherePoint::Infinity => (self.k, self.c),
            SpherePoint::Finite(z) if z.norm() > self.pole_radius => {
                let t = (z * z).inv();
                (self.k * (one - t), self.c + self.d * t)
            }
            SpherePoint::Finite(z) => {
                let s = z * z;
                (self.k * (s - one), self.c * s + self.d)
            }
        };
        match ratio(num, den) {
            SpherePoint::Finite(q) => SpherePoint::new(one + q),
            SpherePoint::Infinity => SpherePoint::Infinity,
        }
    }

    /// `m(w) = (v-1)(u-w) / ((u-1)(v-w))`, so that `F(z) = w` exactly when
    /// `z² = m(w)`.
    pub fn square_of_preimage(&self, w: SpherePoint) -> SpherePoint {
        let one = Complex64::new(1.0, 0.0);
        match (self.u, self.v, w) {
            (SpherePoint::Finite(u), SpherePoint::Finite(v), SpherePoint::Finite(w)) => {
                ratio((v - one) * (u - w), (u - one) * (v - w))
            }
            (SpherePoint::Finite(u), SpherePoint::Finite(v), SpherePoint::Infinity) => ratio(v - one, u - one),
            (SpherePoint::Infinity, SpherePoint::Finite(v), SpherePoint::Finite(w)) => ratio(v - one, v - w),
            (SpherePoint::Infinity, SpherePoint::Finite(_), SpherePoint::Infinity) => SpherePoint::ZERO,
            (SpherePoint::Finite(u), SpherePoint::Infinity, SpherePoint::Finite(w)) => ratio(u - w, u - one),
            (SpherePoint::Finite(_), SpherePoint::Infinity, SpherePoint::Infinity) => SpherePoint::Infinity,
            (SpherePoint::Infinity, SpherePoint::Infinity, _) => unreachable!("u = v rejected on construction"),
        }
    }

    /// The two solutions of `F(z) = w`, principal square root first.
    pub fn preimages(&self, w: SpherePoint) -> (SpherePoint, SpherePoint) {
        match self.square_of_preimage(w) {
            SpherePoint::Infinity => (SpherePoint::Infinity, SpherePoint::Infinity),
            SpherePoint::Finite(m) => {
                let r = m.sqrt();
                (SpherePoint::Finite(r), SpherePoint::Finite(-r))
            }
        }
    }
}

fn ratio(num: Complex64, den: Complex64) -> SpherePoint {
    if den == Complex64::new(0.0, 0.0) {
        SpherePoint::Infinity
    } else {
        SpherePoint::new(num / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> SpherePoint {
        SpherePoint::from_re_im(re, im)
    }

    fn close(a: SpherePoint, b: SpherePoint, tol: f64) -> bool {
        chordal_distance(a, b) <= tol
    }

    #[test]
    fn example_one_coefficients() {
        let f = NormalizedQuadratic::from_critical_values(c(0.0, 1.0), c(0.0, -1.0)).unwrap();
        let [a, b, cc, d] = f.coefficients();
        let expect = [(1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (1.0, 1.0)];
        for (got, (re, im)) in [a, b, cc, d].iter().zip(expect) {
            assert!((got - Complex64::new(re, im)).norm() < 1e-15);
        }
    }

    #[test]
    fn example_two_preimages() {
        let v = c(FRAC_1_SQRT_2, -FRAC_1_SQRT_2);
        let f = NormalizedQuadratic::from_critical_values(c(0.0, 1.0), v).unwrap();
        let m = f.square_of_preimage(c(-1.0, 0.0)).finite().unwrap();
        assert!((m - Complex64::new(1.0 - 2f64.sqrt(), 0.0)).norm() < 1e-12);
        let (p, q) = f.preimages(c(-1.0, 0.0));
        assert!(close(p, c(0.0, 0.643594), 1e-6) || close(q, c(0.0, 0.643594), 1e-6));
        let (p, q) = f.preimages(c(0.0, -1.0));
        assert!(close(p, c(0.0, 1.18921), 1e-5) || close(q, c(0.0, 1.18921), 1e-5));
        assert_eq!(-p, q);
    }

    #[test]
    fn critical_value_preimages_coincide() {
        let f = NormalizedQuadratic::from_critical_values(c(0.3, 0.2), c(-2.0, 1.0)).unwrap();
        let (p, q) = f.preimages(f.u());
        assert!(close(p, SpherePoint::ZERO, 0.0) && close(q, SpherePoint::ZERO, 0.0));
        let (p, q) = f.preimages(f.v());
        assert!(p.is_infinite() && q.is_infinite());
    }

    #[test]
    fn construction_errors() {
        let i = c(0.0, 1.0);
        assert!(matches!(
            NormalizedQuadratic::from_critical_values(i, i),
            Err(MapError::Degenerate(_))
        ));
        assert_eq!(
            NormalizedQuadratic::from_critical_values(SpherePoint::ONE, i),
            Err(MapError::NormalizationCollision)
        );
        assert!(NormalizedQuadratic::from_critical_values(SpherePoint::Infinity, SpherePoint::Infinity).is_err());
    }

    #[test]
    fn infinite_critical_values() {
        for (u, v) in [
            (SpherePoint::Infinity, c(0.5, -0.5)),
            (c(2.0, 3.0), SpherePoint::Infinity),
            (SpherePoint::ZERO, SpherePoint::Infinity),
            (SpherePoint::Infinity, SpherePoint::ZERO),
        ] {
            let f = NormalizedQuadratic::from_critical_values(u, v).unwrap();
            assert!(close(f.eval(SpherePoint::ZERO), u, 1e-14));
            assert!(close(f.eval(SpherePoint::Infinity), v, 1e-14));
            assert!(close(f.eval(SpherePoint::ONE), SpherePoint::ONE, 1e-14));
        }
    }

    #[test]
    fn chordal_examples() {
        assert!((chordal_distance(SpherePoint::ZERO, SpherePoint::Infinity) - 2.0).abs() < 1e-15);
        assert_eq!(chordal_distance(c(0.3, 0.4), c(0.3, 0.4)), 0.0);
        assert!((chordal_distance(c(1.0, 0.0), c(-1.0, 0.0)) - 2.0).abs() < 1e-15);
        assert!((chordal_distance(c(1e200, 0.0), SpherePoint::Infinity)).abs() < 1e-15);
    }

    #[test]
    fn stereographic_examples() {
        assert_eq!(stereographic(SpherePoint::ZERO), [0.0, 0.0, 1.0]);
        assert_eq!(stereographic(SpherePoint::Infinity), [0.0, 0.0, -1.0]);
        assert_eq!(stereographic(SpherePoint::ONE), [1.0, 0.0, 0.0]);
        assert!(from_sphere([0.0, 0.0, -1.0]).is_infinite());
    }

    #[test]
    fn midpoint_examples() {
        let m = spherical_midpoint(SpherePoint::ONE, c(0.0, 1.0)).unwrap();
        assert!(close(m, c(FRAC_1_SQRT_2, FRAC_1_SQRT_2), 1e-15));
        assert!(spherical_midpoint(SpherePoint::ZERO, SpherePoint::Infinity).is_none());
    }

    fn point() -> impl Strategy<Value = SpherePoint> {
        (-1.0f64..1.0, -1.0f64..1.0, 0.0f64..1.0).prop_map(|(x, y, t)| {
            // Spread moduli over many orders of magnitude.
            let s = 10f64.powf(8.0 * t - 4.0);
            c(x * s, y * s)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig {
            cases: 10_000,
            max_global_rejects: 200_000,
            ..ProptestConfig::default()
        })]

        #[test]
        fn preimages_solve_equation(u in point(), v in point(), w in point()) {
            // The forward error of F grows like 1/|u - v| near the
            // preimages, so samples keep a fixed distance from degeneracy.
            prop_assume!(chordal_distance(u, v) > 1e-2);
            prop_assume!(chordal_distance(u, SpherePoint::ONE) > 1e-2);
            prop_assume!(chordal_distance(v, SpherePoint::ONE) > 1e-2);
            prop_assume!(chordal_distance(w, u) > 1e-2 && chordal_distance(w, v) > 1e-2);
            let f = NormalizedQuadratic::from_critical_values(u, v).unwrap();
            let (p, q) = f.preimages(w);
            prop_assert!(chordal_distance(f.eval(p), w) <= 1e-12);
            prop_assert!(chordal_distance(f.eval(q), w) <= 1e-12);
            prop_assert_eq!(-p, q);
            prop_assert!(chordal_distance(p, q) > 0.0);
        }

        #[test]
        fn normalization_round_trip(u in point(), v in point()) {
            prop_assume!(chordal_distance(u, v) > 1e-6);
            prop_assume!(chordal_distance(u, SpherePoint::ONE) > 1e-6);
            prop_assume!(chordal_distance(v, SpherePoint::ONE) > 1e-6);
            let f = NormalizedQuadratic::from_critical_values(u, v).unwrap();
            prop_assert!(chordal_distance(f.eval(SpherePoint::ZERO), u) <= 1e-14);
            prop_assert!(chordal_distance(f.eval(SpherePoint::Infinity), v) <= 1e-14);
            prop_assert!(chordal_distance(f.eval(SpherePoint::ONE), SpherePoint::ONE) <= 1e-14);
        }

        #[test]
        fn stereographic_round_trip(z in point()) {
            let p = stereographic(z);
            prop_assert!((norm(p) - 1.0).abs() < 1e-15);
            prop_assert!(chordal_distance(from_sphere(p), z) < 1e-15);
            prop_assert!((norm(sub(p, stereographic(SpherePoint::ZERO))) - chordal_distance(z, SpherePoint::ZERO)).abs() < 1e-14);
        }

        #[test]
        fn chordal_is_symmetric_and_bounded(a in point(), b in point()) {
            let d = chordal_distance(a, b);
            prop_assert!((0.0..=2.0 + 1e-15).contains(&d));
            prop_assert_eq!(d, chordal_distance(b, a));
            prop_assert!((d - norm(sub(stereographic(a), stereographic(b)))).abs() < 1e-13);
        }
    }
}
