//! Run configuration, run reports, curve dumps and SVG renders.
//!
//! Curve dump format, one record per line, `#` starts a comment:
//!
//! ```text
//! pseudo-equator-curve 1
//! level <n>
//! map <u> <v>                       (optional)
//! black-value <p/q>
//! red-value <p/q>
//! postcritical <p/q> ...
//! mark <p/q> <kind> <class|->       (kind: pK, critical-black, critical-red, plumbing, anchor)
//! sample <p/q> <re> <im> <kind|->   (or `sample <p/q> inf <kind|->`)
//! ```

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::angle::Angle;
use crate::curve::{CurveSample, DiscreteCurve};
use crate::engine::{IterOptions, IterationRecord, RunReport};
use crate::mating::{Color, Mark, MarkKind, Schedule};
use crate::rational::{stereographic, SpherePoint, Vec3};

const DUMP_MAGIC: &str = "pseudo-equator-curve 1";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: Angle,
    pub beta: Angle,
    pub options: IterOptions,
    pub dump_dir: Option<PathBuf>,
    pub render: bool,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(alpha: Angle, beta: Angle, options: IterOptions) -> RunConfig {
        RunConfig {
            alpha,
            beta,
            options,
            dump_dir: None,
            render: false,
            seed: 0,
        }
    }

    /// Everything that can change the numbers a run produces. Parallelism
    /// and output locations are excluded.
    pub fn canonical(&self) -> String {
        let o = &self.options;
        format!(
            "alpha={}\nbeta={}\n{}\nseed={}\n",
            self.alpha,
            self.beta,
            options_line(o),
            self.seed
        )
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::canonical`].
    pub fn run_id(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn options_line(o: &IterOptions) -> String {
    let t = &o.tolerances;
    format!(
        "max_iters={} tol={:e} min_iters={} samples_per_arc={} budget={}\n\
         pole_radius={:e} degenerate={:e} normalization={:e} ambiguity_ratio={} max_segment={} \
         critical_segment={} critical_radius={} max_refine_depth={} closure={:e} prune_clearance={:e} \
         value_clearance={:e}",
        o.max_iters,
        o.tol,
        o.min_iters,
        o.samples_per_arc,
        o.budget,
        t.pole_radius,
        t.degenerate,
        t.normalization,
        t.ambiguity_ratio,
        t.max_segment,
        t.critical_segment,
        t.critical_radius,
        t.max_refine_depth,
        t.closure,
        t.prune_clearance,
        t.value_clearance
    )
}

/// A point with `digits` significant digits per component.
pub fn format_point(z: SpherePoint, digits: usize) -> String {
    match z {
        SpherePoint::Infinity => "inf".to_string(),
        SpherePoint::Finite(w) => {
            let p = digits.saturating_sub(1);
            format!("{:.*e} {:.*e}", p, w.re, p, w.im)
        }
    }
}

fn record_line(r: &IterationRecord) -> String {
    format!(
        "{} {} {} {} {} {:.6e} {:.6e}",
        r.n,
        format_point(r.u, 17),
        format_point(r.v, 17),
        r.samples_before,
        r.samples_after,
        r.max_displacement,
        r.increment
    )
}

/// Plain-text run report. Byte-identical for identical configurations.
pub fn report_text(config: &RunConfig, report: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "pseudo-equator run report");
    let _ = writeln!(s, "run-id {}", config.run_id());
    let _ = writeln!(s, "alpha {}", report.alpha);
    let _ = writeln!(s, "beta {}", report.beta);
    for line in options_line(&report.options).lines() {
        let _ = writeln!(s, "option {line}");
    }
    let _ = writeln!(s, "status {}", report.status.label());
    if let crate::engine::Status::StructuralError(m) | crate::engine::Status::NumericError(m) = &report.status {
        let _ = writeln!(s, "reason {m}");
    }
    for w in &report.warnings {
        let _ = writeln!(s, "warning {w}");
    }
    let _ = writeln!(s, "iterations {}", report.records.len().saturating_sub(1));
    let _ = writeln!(s, "# n u.re u.im v.re v.im samples_before samples_after max_displacement increment");
    for r in &report.records {
        let _ = writeln!(s, "iter {}", record_line(r));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {field}: {message}")]
pub struct ParseError {
    /// 1-based line number; 0 for errors about the file as a whole.
    pub line: usize,
    pub field: String,
    pub message: String,
}

fn perr(line: usize, field: &str, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

/// A curve with the map it was read under.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveDump {
    pub curve: DiscreteCurve,
    pub map: Option<(SpherePoint, SpherePoint)>,
}

pub fn parse_kind(s: &str) -> Option<MarkKind> {
    match s {
        "critical-black" => Some(MarkKind::CriticalPoint(Color::Black)),
        "critical-red" => Some(MarkKind::CriticalPoint(Color::Red)),
        "plumbing" => Some(MarkKind::Plumbing),
        "anchor" => Some(MarkKind::Anchor),
        _ => s
            .strip_prefix('p')
            .and_then(|id| id.parse().ok())
            .filter(|&id| id > 0)
            .map(MarkKind::Postcritical),
    }
}

impl fmt::Display for CurveDump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.curve;
        let s = &c.schedule;
        writeln!(f, "{DUMP_MAGIC}")?;
        writeln!(f, "level {}", c.level)?;
        if let Some((u, v)) = self.map {
            writeln!(f, "map {u} {v}")?;
        }
        writeln!(f, "black-value {}", s.black_value)?;
        writeln!(f, "red-value {}", s.red_value)?;
        write!(f, "postcritical")?;
        for p in &s.postcritical {
            write!(f, " {p}")?;
        }
        writeln!(f)?;
        for m in &s.marks {
            match m.class {
                Some(k) => writeln!(f, "mark {} {} {k}", m.parameter, m.kind)?,
                None => writeln!(f, "mark {} {} -", m.parameter, m.kind)?,
            }
        }
        for x in &c.samples {
            write!(f, "sample {} {} ", x.parameter, x.position)?;
            match x.mark {
                Some(k) => writeln!(f, "{k}")?,
                None => writeln!(f, "-")?,
            }
        }
        Ok(())
    }
}

struct Fields<'a> {
    line: usize,
    words: Vec<&'a str>,
    next: usize,
}

impl<'a> Fields<'a> {
    fn take(&mut self, field: &str) -> Result<&'a str, ParseError> {
        let w = self
            .words
            .get(self.next)
            .copied()
            .ok_or_else(|| perr(self.line, field, "missing"))?;
        self.next += 1;
        Ok(w)
    }

    fn angle(&mut self, field: &str) -> Result<Angle, ParseError> {
        let w = self.take(field)?;
        w.parse().map_err(|_| perr(self.line, field, format!("bad fraction {w:?}")))
    }

    fn float(&mut self, field: &str) -> Result<f64, ParseError> {
        let w = self.take(field)?;
        w.parse().map_err(|_| perr(self.line, field, format!("bad number {w:?}")))
    }

    fn point(&mut self, field: &str) -> Result<SpherePoint, ParseError> {
        if self.words.get(self.next) == Some(&"inf") {
            self.next += 1;
            return Ok(SpherePoint::Infinity);
        }
        let re = self.float(field)?;
        let im = self.float(field)?;
        Ok(SpherePoint::from_re_im(re, im))
    }

    fn kind(&mut self, field: &str) -> Result<Option<MarkKind>, ParseError> {
        let w = self.take(field)?;
        if w == "-" {
            return Ok(None);
        }
        parse_kind(w)
            .map(Some)
            .ok_or_else(|| perr(self.line, field, format!("unknown kind {w:?}")))
    }

    fn end(&self) -> Result<(), ParseError> {
        match self.words.get(self.next) {
            None => Ok(()),
            Some(w) => Err(perr(self.line, "end of line", format!("unexpected {w:?}"))),
        }
    }
}

impl std::str::FromStr for CurveDump {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<CurveDump, ParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            None => return Err(perr(0, "header", "empty file")),
            Some((_, l)) if l == DUMP_MAGIC => {}
            Some((n, _)) => return Err(perr(n, "header", format!("expected {DUMP_MAGIC:?}"))),
        }
        let mut level = None;
        let mut map = None;
        let mut black = None;
        let mut red = None;
        let mut postcritical = None;
        let mut marks = Vec::new();
        let mut samples = Vec::new();
        let mut last_line = 1;
        for (n, l) in lines {
            last_line = n;
            let mut words = l.split_whitespace();
            let key = words.next().expect("line is non-empty");
            let mut f = Fields {
                line: n,
                words: words.collect(),
                next: 0,
            };
            match key {
                "level" => {
                    let w = f.take("level")?;
                    level = Some(w.parse::<usize>().map_err(|_| perr(n, "level", format!("bad level {w:?}")))?);
                }
                "map" => map = Some((f.point("u")?, f.point("v")?)),
                "black-value" => black = Some(f.angle("black-value")?),
                "red-value" => red = Some(f.angle("red-value")?),
                "postcritical" => {
                    let mut v = Vec::new();
                    while f.next < f.words.len() {
                        v.push(f.angle("postcritical")?);
                    }
                    postcritical = Some(v);
                }
                "mark" => {
                    let parameter = f.angle("parameter")?;
                    let kind = f.kind("kind")?.ok_or_else(|| perr(n, "kind", "a mark needs a kind"))?;
                    let w = f.take("class")?;
                    let class = if w == "-" {
                        None
                    } else {
                        Some(w.parse().map_err(|_| perr(n, "class", format!("bad class {w:?}")))?)
                    };
                    marks.push(Mark { parameter, kind, class });
                }
                "sample" => {
                    let parameter = f.angle("parameter")?;
                    let position = f.point("position")?;
                    let mark = f.kind("kind")?;
                    samples.push(CurveSample {
                        parameter,
                        position,
                        mark,
                    });
                }
                other => return Err(perr(n, "record", format!("unknown record {other:?}"))),
            }
            f.end()?;
        }
        let missing = |field: &str| perr(last_line, field, "missing record");
        let schedule = Schedule {
            level: level.ok_or_else(|| missing("level"))?,
            marks,
            postcritical: postcritical.ok_or_else(|| missing("postcritical"))?,
            black_value: black.ok_or_else(|| missing("black-value"))?,
            red_value: red.ok_or_else(|| missing("red-value"))?,
        };
        if samples.is_empty() {
            return Err(missing("sample"));
        }
        Ok(CurveDump {
            curve: DiscreteCurve {
                level: schedule.level,
                samples,
                schedule,
            },
            map,
        })
    }
}

/// Orthographic view of the unit sphere: screen right, screen up, and the
/// direction toward the viewer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View {
    pub name: &'static str,
    pub right: Vec3,
    pub up: Vec3,
    pub toward: Vec3,
}

impl View {
    /// Looking down on the critical point 0.
    pub fn poles_front() -> View {
        View {
            name: "poles",
            right: [1.0, 0.0, 0.0],
            up: [0.0, 1.0, 0.0],
            toward: [0.0, 0.0, 1.0],
        }
    }

    /// 0 at the top, 1 to the right, −i toward the viewer.
    pub fn equator_front() -> View {
        View {
            name: "equator",
            right: [1.0, 0.0, 0.0],
            up: [0.0, 0.0, 1.0],
            toward: [0.0, -1.0, 0.0],
        }
    }

    /// 1 right, −1 left, i to the rear right, −i to the front left, seen
    /// from slightly above the equator.
    pub fn oblique() -> View {
        let (az, el) = (PI / 9.0, PI / 9.0);
        let (sa, ca) = az.sin_cos();
        let (se, ce) = el.sin_cos();
        let right = [ca, sa, 0.0];
        // Unrotated toward direction is −i; tilt it up toward 0.
        let flat = [sa, -ca, 0.0];
        let toward = [flat[0] * ce, flat[1] * ce, se];
        let up = [-flat[0] * se, -flat[1] * se, ce];
        View {
            name: "oblique",
            right,
            up,
            toward,
        }
    }

    pub fn presets() -> [View; 3] {
        [View::poles_front(), View::equator_front(), View::oblique()]
    }

    fn project(&self, p: Vec3) -> (f64, f64, f64) {
        let d = |a: Vec3| a[0] * p[0] + a[1] * p[1] + a[2] * p[2];
        (d(self.right), d(self.up), d(self.toward))
    }
}

const SIZE: f64 = 400.0;
const RADIUS: f64 = 180.0;

fn screen(x: f64, y: f64) -> (f64, f64) {
    (SIZE / 2.0 + RADIUS * x, SIZE / 2.0 - RADIUS * y)
}

/// SVG 1.1 orthographic render of a curve. Segments on the far hemisphere
/// are drawn translucent; marked samples are dotted and labeled.
pub fn render_sphere(c: &DiscreteCurve, view: &View) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, "<title>level {} curve, {} view</title>", c.level, view.name);
    let _ = writeln!(
        s,
        r##"<circle cx="{0}" cy="{0}" r="{RADIUS}" fill="#f4f4f8" stroke="#888" stroke-width="1"/>"##,
        SIZE / 2.0
    );
    let pts: Vec<(f64, f64, f64)> = c
        .samples
        .iter()
        .map(|x| view.project(stereographic(x.position)))
        .collect();
    let n = pts.len();
    // Runs of segments on one hemisphere become one polyline.
    let mut runs: Vec<(bool, Vec<(f64, f64)>)> = Vec::new();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let front = a.2 + b.2 >= 0.0;
        let pa = screen(a.0, a.1);
        let pb = screen(b.0, b.1);
        match runs.last_mut() {
            Some((f, v)) if *f == front => v.push(pb),
            _ => runs.push((front, vec![pa, pb])),
        }
    }
    for (front, run) in &runs {
        let opacity = if *front { 1.0 } else { 0.3 };
        let _ = write!(s, r##"<polyline fill="none" stroke="#1f4fbf" stroke-width="1.2" stroke-opacity="{opacity}" points=""##);
        for (k, (x, y)) in run.iter().enumerate() {
            let sep = if k == 0 { "" } else { " " };
            let _ = write!(s, "{sep}{x:.3},{y:.3}");
        }
        let _ = writeln!(s, r#""/>"#);
    }
    for (x, p) in c.samples.iter().zip(&pts) {
        let Some(kind) = x.mark else { continue };
        let color = match kind {
            MarkKind::CriticalPoint(Color::Black) => "#000000",
            MarkKind::CriticalPoint(Color::Red) => "#c01010",
            MarkKind::Anchor => "#208020",
            _ => "#e08000",
        };
        let opacity = if p.2 >= 0.0 { 1.0 } else { 0.4 };
        let (sx, sy) = screen(p.0, p.1);
        let _ = writeln!(
            s,
            r#"<circle cx="{sx:.3}" cy="{sy:.3}" r="3.5" fill="{color}" fill-opacity="{opacity}"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="10" fill-opacity="{opacity}">{} {}</text>"#,
            sx + 5.0,
            sy - 5.0,
            kind,
            x.parameter
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::init_embedding;
    use crate::engine::{iterate, Engine};
    use crate::mating::base_schedule;
    use crate::rational::chordal_distance;

    fn a(p: i128, q: u64) -> Angle {
        Angle::reduce(p, q).unwrap()
    }

    fn small() -> IterOptions {
        IterOptions {
            samples_per_arc: 8,
            max_iters: 3,
            ..IterOptions::default()
        }
    }

    #[test]
    fn run_id_is_stable_and_ignores_parallelism() {
        let c = RunConfig::new(a(1, 4), a(1, 8), IterOptions::default());
        let mut d = c.clone();
        d.options.parallel = !c.options.parallel;
        d.dump_dir = Some("elsewhere".into());
        assert_eq!(c.run_id(), d.run_id());
        assert_eq!(c.run_id().len(), 16);
        let mut e = c.clone();
        e.options.tol = 1e-8;
        assert_ne!(c.run_id(), e.run_id());
    }

    #[test]
    fn report_lists_every_record() {
        let cfg = RunConfig::new(a(1, 4), a(1, 8), small());
        let r = iterate(cfg.alpha, cfg.beta, cfg.options);
        let text = report_text(&cfg, &r);
        assert_eq!(text.lines().filter(|l| l.starts_with("iter ")).count(), 4);
        assert!(text.contains("status max-iterations"));
        assert!(text.contains(&format!("run-id {}", cfg.run_id())));
        assert_eq!(text, report_text(&cfg, &iterate(cfg.alpha, cfg.beta, cfg.options)));
    }

    #[test]
    fn structural_report_has_reason() {
        let cfg = RunConfig::new(a(1, 4), a(3, 4), small());
        let text = report_text(&cfg, &iterate(cfg.alpha, cfg.beta, cfg.options));
        assert!(text.contains("status structural-error"));
        assert!(text.contains("conjugate limbs"));
    }

    #[test]
    fn format_point_digits() {
        assert_eq!(format_point(SpherePoint::from_re_im(0.5, -1.0), 3), "5.00e-1 -1.00e0");
        assert_eq!(format_point(SpherePoint::Infinity, 17), "inf");
    }

    fn lifted_dump() -> CurveDump {
        let mut e = Engine::new(a(1, 4), a(1, 8), small()).unwrap();
        let step = e.step().unwrap();
        let (u, v) = (step.map.u(), step.map.v());
        CurveDump {
            curve: step.lifted,
            map: Some((u, v)),
        }
    }

    #[test]
    fn dump_round_trip() {
        let d = lifted_dump();
        let text = d.to_string();
        let back: CurveDump = text.parse().unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_string(), text);
        assert!(d.curve.samples.iter().any(|s| s.position.is_infinite()));
        let plain = CurveDump {
            curve: init_embedding(&base_schedule(a(1, 6), a(1, 6)).unwrap(), 3).unwrap(),
            map: None,
        };
        assert_eq!(plain.to_string().parse::<CurveDump>().unwrap(), plain);
    }

    #[test]
    fn dump_parse_errors() {
        let e = "".parse::<CurveDump>().unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (0, "header"));
        let e = "# only a comment\n".parse::<CurveDump>().unwrap_err();
        assert_eq!(e.field, "header");
        let text = lifted_dump().to_string();
        let edited = text.replacen("critical-black", "critical-blue", 1);
        let e = edited.parse::<CurveDump>().unwrap_err();
        assert_eq!(e.field, "kind");
        let line = edited.lines().position(|l| l.contains("critical-blue")).unwrap() + 1;
        assert_eq!(e.line, line);
        let e = text.replacen("sample 0 ", "sample zero ", 1).parse::<CurveDump>().unwrap_err();
        assert_eq!(e.field, "parameter");
        let e = text.replacen("level 1", "level 1 extra", 1).parse::<CurveDump>().unwrap_err();
        assert_eq!(e.field, "end of line");
        let no_samples: String = text.lines().filter(|l| !l.starts_with("sample")).map(|l| format!("{l}\n")).collect();
        assert_eq!(no_samples.parse::<CurveDump>().unwrap_err().field, "sample");
    }

    #[test]
    fn kinds_parse_back() {
        for k in [
            MarkKind::Postcritical(3),
            MarkKind::CriticalPoint(Color::Black),
            MarkKind::CriticalPoint(Color::Red),
            MarkKind::Plumbing,
            MarkKind::Anchor,
        ] {
            assert_eq!(parse_kind(&k.to_string()), Some(k));
        }
        assert_eq!(parse_kind("p0"), None);
        assert_eq!(parse_kind("px"), None);
    }

    #[test]
    fn level_zero_render_is_great_circle() {
        let c = init_embedding(&base_schedule(a(1, 4), a(1, 8)).unwrap(), 16).unwrap();
        let svg = render_sphere(&c, &View::poles_front());
        assert_eq!(svg.matches("<text").count(), 5);
        // The unit circle is the equator: seen from the pole it is the rim.
        for x in &c.samples {
            let (px, py, pz) = View::poles_front().project(stereographic(x.position));
            assert!((px.hypot(py) - 1.0).abs() < 1e-12 && pz.abs() < 1e-12);
        }
        assert_eq!(svg, render_sphere(&c, &View::poles_front()));
    }

    #[test]
    fn example_one_lift_visits_both_poles_twice() {
        let mut e = Engine::new(a(1, 4), a(1, 4), small()).unwrap();
        let lifted = e.step().unwrap().lifted;
        let near = |p: SpherePoint| {
            lifted
                .samples
                .iter()
                .filter(|s| s.mark.is_some() && chordal_distance(s.position, p) < 1e-9)
                .count()
        };
        assert_eq!(near(SpherePoint::ZERO), 2);
        assert_eq!(near(SpherePoint::Infinity), 2);
        for v in View::presets() {
            let svg = render_sphere(&lifted, &v);
            assert!(svg.starts_with("<?xml"));
            assert!(svg.contains("stroke-opacity=\"0.3\""));
            assert_eq!(svg.matches("<text").count(), 8);
        }
    }

    #[test]
    fn oblique_orientation() {
        let v = View::oblique();
        let p = |z: SpherePoint| v.project(stereographic(z));
        let one = p(SpherePoint::ONE);
        let minus_one = p(SpherePoint::from_re_im(-1.0, 0.0));
        let i = p(SpherePoint::from_re_im(0.0, 1.0));
        let minus_i = p(SpherePoint::from_re_im(0.0, -1.0));
        assert!(one.0 > 0.5 && minus_one.0 < -0.5);
        assert!(i.0 > 0.0 && i.2 < 0.0);
        assert!(minus_i.0 < 0.0 && minus_i.2 > 0.0);
        for w in View::presets() {
            let d = |a: Vec3, b: Vec3| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            assert!(d(w.right, w.up).abs() < 1e-15 && d(w.up, w.toward).abs() < 1e-15 && d(w.right, w.toward).abs() < 1e-15);
        }
    }
}
