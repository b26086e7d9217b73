//! Curve simplification that keeps the homotopy class relative to the marked
//! points.
//!
//! Unmarked samples are removed smallest triangle first. A removal replaces
//! the path `prev → x → next` by the chord `prev → next`; it is refused when
//! a marked point lies inside the swept triangle or too close to its edges,
//! or when the new chord would be longer than the lifting step limit.
//!
//! Other strands of the curve may be crossed, so the result need not be
//! embedded. What must survive is the corner at each mark: the angle between
//! the two segments meeting there decides the fork taken at a critical point
//! of the next lift. Lifting preserves these corners, so a removal next to a
//! mark may turn the mark's segment by at most [`MAX_CORNER_TURN`], and never
//! past the mark's other segment.
//!
//! [`clear_marks`] moves strands away from chosen marks instead: samples in a
//! small disk around the mark slide radially out to its rim, which is an
//! isotopy as long as no other mark lies in the swept region.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::angle::Angle;
use crate::curve::{CurveSample, DiscreteCurve};
use crate::rational::{cross, dot, from_sphere, norm, spherical_midpoint, stereographic, sub, Vec3};

/// Unmarked samples kept between consecutive marks.
pub const MIN_INTERIOR: usize = 2;

/// Largest turn, in radians, of a segment at a mark caused by one removal.
pub const MAX_CORNER_TURN: f64 = 1e-3;

/// Samples closer than this to a mark carry no usable direction and may be
/// removed without the corner checks.
pub const MARK_GAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PruneError {
    #[error("budget {budget} is smaller than the {marks} marked samples")]
    BudgetTooSmall { budget: usize, marks: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneOptions {
    pub budget: usize,
    /// Minimum chordal clearance between a marked point and a swept triangle.
    pub clearance: f64,
    /// Longest chord a removal may create.
    pub max_chord: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Area(f64);

impl Eq for Area {}

impl PartialOrd for Area {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Area {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * norm(cross(sub(b, a), sub(c, a)))
}

/// Chordal distance from `p` to the minor great-circle arc `a`–`b`.
fn arc_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let n = cross(a, b);
    let len = norm(n);
    let ends = norm(sub(p, a)).min(norm(sub(p, b)));
    if len < 1e-15 {
        return ends;
    }
    let n = [n[0] / len, n[1] / len, n[2] / len];
    let within = dot(cross(a, p), n) >= 0.0 && dot(cross(p, b), n) >= 0.0;
    if within {
        // Distance to the plane of the great circle, as a chord.
        let h = dot(p, n).abs().min(1.0);
        let ang = h.asin();
        (2.0 * (ang / 2.0).sin()).min(ends)
    } else {
        ends
    }
}

fn det(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    dot(a, cross(b, c))
}

/// Whether `p` lies in the spherical triangle `abc` or within `clearance`
/// of its boundary.
pub fn blocks(p: Vec3, a: Vec3, b: Vec3, c: Vec3, clearance: f64) -> bool {
    if arc_distance(p, a, b) < clearance
        || arc_distance(p, b, c) < clearance
        || arc_distance(p, c, a) < clearance
    {
        return true;
    }
    let orient = det(a, b, c);
    if orient == 0.0 {
        return false;
    }
    let s = orient.signum();
    let centroid = [a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]];
    dot(p, centroid) > 0.0
        && det(a, b, p) * s >= 0.0
        && det(b, c, p) * s >= 0.0
        && det(c, a, p) * s >= 0.0
}

/// Whether turning the segment `apex → from` to `apex → to` changes the
/// corner at `apex` too much, or sweeps over the segment `apex → other`.
fn turns_corner(apex: Vec3, from: Vec3, to: Vec3, other: Vec3) -> bool {
    let (f, t) = (sub(from, apex), sub(to, apex));
    if norm(f) < MARK_GAP {
        return false;
    }
    let turn = |x: Vec3, y: Vec3| dot(cross(sub(x, apex), sub(y, apex)), apex);
    let sweep = turn(from, to);
    norm(cross(f, t)).atan2(dot(f, t)) > MAX_CORNER_TURN
        || (turn(from, other) * sweep > 0.0 && turn(other, to) * sweep > 0.0)
}

/// Removes unmarked samples until at most `budget` remain or no further
/// removal is allowed.
pub fn prune(c: &DiscreteCurve, opts: &PruneOptions) -> Result<DiscreteCurve, PruneError> {
    let n = c.samples.len();
    let marks = c.mark_indices();
    if opts.budget < marks.len() {
        return Err(PruneError::BudgetTooSmall {
            budget: opts.budget,
            marks: marks.len(),
        });
    }
    if n <= opts.budget {
        return Ok(c.clone());
    }
    let pts: Vec<Vec3> = c.samples.iter().map(|s| stereographic(s.position)).collect();
    let marked: Vec<Vec3> = marks.iter().map(|&m| pts[m]).collect();
    // Arc index of every sample and interior counts per arc.
    let mut arc_of = vec![0usize; n];
    let mut interior = vec![0usize; marks.len()];
    let mut arc = marks.len() - 1;
    for (i, slot) in arc_of.iter_mut().enumerate() {
        if c.samples[i].mark.is_some() {
            arc = marks.iter().position(|&m| m == i).expect("mark index");
        } else {
            interior[arc] += 1;
        }
        *slot = arc;
    }
    let mut prev: Vec<usize> = (0..n).map(|i| (i + n - 1) % n).collect();
    let mut next: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    let mut alive = vec![true; n];
    let mut version = vec![0u32; n];
    let mut heap = BinaryHeap::new();
    let area = |i: usize, prev: &[usize], next: &[usize]| triangle_area(pts[prev[i]], pts[i], pts[next[i]]);
    for i in 0..n {
        if c.samples[i].mark.is_none() {
            heap.push(Reverse((Area(area(i, &prev, &next)), i, 0u32)));
        }
    }
    let mut count = n;
    while count > opts.budget {
        let Some(Reverse((_, i, ver))) = heap.pop() else { break };
        if !alive[i] || ver != version[i] {
            continue;
        }
        let (p, q) = (prev[i], next[i]);
        if interior[arc_of[i]] <= MIN_INTERIOR || norm(sub(pts[p], pts[q])) > opts.max_chord {
            continue;
        }
        let (a, b, e) = (pts[p], pts[i], pts[q]);
        let covers_mark = marks
            .iter()
            .zip(&marked)
            .any(|(&m, &x)| m != p && m != q && blocks(x, a, b, e, opts.clearance));
        let corner = (c.samples[p].mark.is_some() && turns_corner(a, b, e, pts[prev[p]]))
            || (c.samples[q].mark.is_some() && turns_corner(e, b, a, pts[next[q]]));
        if covers_mark || corner {
            continue;
        }
        alive[i] = false;
        interior[arc_of[i]] -= 1;
        count -= 1;
        next[p] = q;
        prev[q] = p;
        for j in [p, q] {
            if c.samples[j].mark.is_none() {
                version[j] += 1;
                heap.push(Reverse((Area(area(j, &prev, &next)), j, version[j])));
            }
        }
    }
    let samples = c
        .samples
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(s, _)| *s)
        .collect();
    Ok(DiscreteCurve {
        level: c.level,
        samples,
        schedule: c.schedule.clone(),
    })
}

/// Angle at `apex` between the directions to `a` and `b`.
fn angle_at(apex: Vec3, a: Vec3, b: Vec3) -> f64 {
    let (x, y) = (sub(a, apex), sub(b, apex));
    norm(cross(x, y)).atan2(dot(x, y))
}

/// Largest angle a segment near a cleared mark may subtend there.
const MAX_SUBTENDED: f64 = std::f64::consts::FRAC_PI_3;

/// Deepest subdivision of one segment by [`clear_marks`].
const MAX_CLEAR_DEPTH: usize = 48;

/// Subdivides `a → b` until every piece within `r` of `center` subtends at
/// most [`MAX_SUBTENDED`] there, appending the new interior samples.
fn refine_near(center: Vec3, r: f64, a: (Angle, Vec3), b: (Angle, Vec3), depth: usize, out: &mut Vec<(Angle, Vec3)>) {
    if depth >= MAX_CLEAR_DEPTH
        || arc_distance(center, a.1, b.1) >= r
        || angle_at(center, a.1, b.1) <= MAX_SUBTENDED
        || norm(sub(a.1, b.1)) < 1e-13
    {
        return;
    }
    let Ok(t) = a.0.ccw_midpoint(b.0) else { return };
    let Some(m) = spherical_midpoint(from_sphere(a.1), from_sphere(b.1)) else { return };
    let m = (t, stereographic(m));
    refine_near(center, r, a, m, depth + 1, out);
    out.push(m);
    refine_near(center, r, m, b, depth + 1, out);
}

/// Point at chordal distance `r` from `center` on the great circle through
/// `p`, on the side of `p`.
fn push_out(center: Vec3, p: Vec3, r: f64) -> Option<Vec3> {
    let k = dot(p, center);
    let t = [p[0] - k * center[0], p[1] - k * center[1], p[2] - k * center[2]];
    let len = norm(t);
    if len < 1e-14 {
        return None;
    }
    let (s, c) = (2.0 * (r / 2.0).asin()).sin_cos();
    Some([
        c * center[0] + s * t[0] / len,
        c * center[1] + s * t[1] / len,
        c * center[2] + s * t[2] / len,
    ])
}

/// Pushes unmarked samples out to chordal distance `radius` from each mark
/// at a parameter in `centers`, refining segments that pass close by first.
/// The radius shrinks to a quarter of the distance to the nearest other
/// mark, and a sample stays put when its move would sweep over a mark.
pub fn clear_marks(c: &DiscreteCurve, centers: &[Angle], radius: f64) -> DiscreteCurve {
    let mut samples = c.samples.clone();
    for &t in centers {
        let Some(m) = samples.iter().position(|s| s.parameter == t && s.mark.is_some()) else { continue };
        let center = stereographic(samples[m].position);
        let r = samples
            .iter()
            .filter(|s| s.mark.is_some() && s.parameter != t)
            .map(|s| 0.25 * norm(sub(stereographic(s.position), center)))
            .fold(radius, f64::min);
        let n = samples.len();
        let mut refined = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (samples[i], samples[(i + 1) % n]);
            refined.push(a);
            if i == m || (i + 1) % n == m {
                continue;
            }
            let mut extra = Vec::new();
            let end = if i + 1 == n { Angle::ZERO } else { b.parameter };
            refine_near(
                center,
                r,
                (a.parameter, stereographic(a.position)),
                (end, stereographic(b.position)),
                0,
                &mut extra,
            );
            refined.extend(extra.into_iter().map(|(parameter, p)| CurveSample {
                parameter,
                position: from_sphere(p),
                mark: None,
            }));
        }
        samples = refined;
        let n = samples.len();
        let m = samples.iter().position(|s| s.parameter == t).expect("center kept");
        let marks: Vec<(usize, Vec3)> = (0..n)
            .filter(|&i| samples[i].mark.is_some())
            .map(|i| (i, stereographic(samples[i].position)))
            .collect();
        let mut pts: Vec<Vec3> = samples.iter().map(|s| stereographic(s.position)).collect();
        for i in 0..n {
            if i == m || samples[i].mark.is_some() || norm(sub(pts[i], center)) >= r {
                continue;
            }
            let Some(q) = push_out(center, pts[i], r) else { continue };
            let (p, nx) = ((i + n - 1) % n, (i + 1) % n);
            // The move points straight away from the center, which therefore
            // stays outside the swept region.
            let swept = marks.iter().filter(|&&(j, _)| j != m).any(|&(j, x)| {
                (j != p && blocks(x, pts[p], pts[i], q, 0.0)) || (j != nx && blocks(x, pts[i], q, pts[nx], 0.0))
            });
            if !swept {
                pts[i] = q;
                samples[i].position = from_sphere(q);
            }
        }
    }
    DiscreteCurve {
        level: c.level,
        samples,
        schedule: c.schedule.clone(),
    }
}
