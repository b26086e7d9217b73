//! Numeric tolerances shared by the rational-map and pullback code.

/// Every floating-point threshold used by the numeric modules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Finite points beyond this modulus are evaluated in the reciprocal chart.
    pub pole_radius: f64,
    /// Points this close (chordally) are treated as equal when validating
    /// critical values.
    pub degenerate: f64,
    /// Allowed chordal error of `F(0) = u`, `F(∞) = v`, `F(1) = 1` after
    /// construction.
    pub normalization: f64,
    /// Lifting is ambiguous when the nearer root is more than this fraction
    /// of the distance to the farther root.
    pub ambiguity_ratio: f64,
    /// Longest chordal step allowed between consecutive lifted samples.
    pub max_segment: f64,
    /// Longest step allowed within `critical_radius` of a critical point.
    pub critical_segment: f64,
    pub critical_radius: f64,
    /// Maximum number of midpoint subdivisions of one parent segment.
    pub max_refine_depth: usize,
    /// Lap endpoints and paired critical marks must agree to this distance.
    pub closure: f64,
    /// Pruning keeps marks out of removed triangles by at least this margin.
    pub prune_clearance: f64,
    /// Unmarked samples are pushed at least this far from the critical
    /// values before the next lift.
    pub value_clearance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pole_radius: 1e8,
            degenerate: 1e-12,
            normalization: 1e-9,
            ambiguity_ratio: 0.5,
            max_segment: 0.2,
            critical_segment: 0.05,
            critical_radius: 0.2,
            max_refine_depth: 8,
            closure: 1e-6,
            prune_clearance: 1e-3,
            value_clearance: 1e-3,
        }
    }
}
