//! Grid and pattern search over flexure geometry and beam count.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::mechanism::{cantilever_stress, CantileverSection, DEFAULT_LENGTH_BUDGET};
use crate::report::format_sig;
use crate::tebc::{
    bistability_margin, force_curve, MaterialModel, VBeamGeometry, DEFAULT_CURVE_SAMPLES,
};

pub const RANKED_CSV_HEADER: &str =
    "rank,L_mm,T_mm,W_mm,theta_deg,n_beams,peak_force_N,objective,violations";
pub const DEFAULT_STRESS_LIMIT: f64 = 50.0;
pub const DEFAULT_GRID_CAP: u64 = 1_000_000;
/// Environment variable capping the worker count; 0 or unset means all cores.
pub const THREADS_ENV: &str = "GRASPSYNTH_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn point(x: f64) -> Self {
        Self { min: x, max: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    fn span(&self) -> f64 {
        self.max - self.min
    }

    /// `count` evenly spaced values from `min` to `max`; one value is `min`.
    /// A degenerate range yields one value whatever the count.
    pub fn grid(&self, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            _ if count == 1 || self.span() == 0.0 => vec![self.min],
            _ => (0..count)
                .map(|i| {
                    if i + 1 == count {
                        self.max
                    } else {
                        self.min + self.span() * i as f64 / (count - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBounds {
    pub length: Range,
    pub thickness: Range,
    pub width: Range,
    /// Degrees.
    pub tilt_deg: Range,
    pub n_beams: (u32, u32),
}

impl DesignBounds {
    /// Collapsed onto a single geometry.
    pub fn around(geom: &VBeamGeometry, n_beams: u32) -> Self {
        Self {
            length: Range::point(geom.length),
            thickness: Range::point(geom.thickness),
            width: Range::point(geom.width),
            tilt_deg: Range::point(geom.tilt_degrees()),
            n_beams: (n_beams, n_beams),
        }
    }

    pub fn contains(&self, geom: &VBeamGeometry, n_beams: u32) -> bool {
        self.length.contains(geom.length)
            && self.thickness.contains(geom.thickness)
            && self.width.contains(geom.width)
            && self.tilt_deg.contains(geom.tilt_degrees())
            && (self.n_beams.0..=self.n_beams.1).contains(&n_beams)
    }
}

/// Number of grid values per parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDensity {
    pub length: usize,
    pub thickness: usize,
    pub width: usize,
    pub tilt: usize,
    pub n_beams: usize,
}

impl GridDensity {
    pub fn uniform(count: usize) -> Self {
        Self {
            length: count,
            thickness: count,
            width: count,
            tilt: count,
            n_beams: count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    /// Ring-level peak force to hit, N.
    pub target_force: f64,
    pub target_travel: f64,
    pub bounds: DesignBounds,
    pub material: MaterialModel,
    /// Allowable beam-root bending stress, MPa.
    pub stress_limit: f64,
    pub length_budget: f64,
    /// Added to the flexure span `2·L·cos θ` before the budget check.
    pub fixture_allowance: f64,
    pub require_non_bistable_at_travel: bool,
    pub grid_cap: u64,
}

impl DesignSpec {
    pub fn new(target_force: f64, target_travel: f64, bounds: DesignBounds) -> Self {
        Self {
            target_force,
            target_travel,
            bounds,
            material: MaterialModel::pla(),
            stress_limit: DEFAULT_STRESS_LIMIT,
            length_budget: DEFAULT_LENGTH_BUDGET,
            fixture_allowance: 0.0,
            require_non_bistable_at_travel: false,
            grid_cap: DEFAULT_GRID_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.target_force.is_finite() && self.target_force > 0.0,
            "target_force must be positive",
        )?;
        ensure(
            self.target_travel.is_finite() && self.target_travel > 0.0,
            "target_travel must be positive",
        )?;
        let b = &self.bounds;
        for (name, r) in [
            ("length", b.length),
            ("thickness", b.thickness),
            ("width", b.width),
            ("tilt", b.tilt_deg),
        ] {
            ensure(
                r.min.is_finite() && r.max.is_finite() && r.min <= r.max,
                &format!("{name} bounds must be finite and ordered"),
            )?;
        }
        ensure(
            b.n_beams.0 >= 1 && b.n_beams.0 <= b.n_beams.1,
            "n_beams bounds must be ordered and at least 1",
        )?;
        ensure(
            self.stress_limit.is_finite() && self.stress_limit >= 0.0,
            "stress_limit must be non-negative",
        )?;
        ensure(
            self.length_budget.is_finite() && self.length_budget > 0.0,
            "length_budget must be positive",
        )?;
        ensure(
            self.fixture_allowance.is_finite() && self.fixture_allowance >= 0.0,
            "fixture_allowance must be non-negative",
        )?;
        self.material.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: &'static str,
    /// Relative excess, always positive.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub geometry: VBeamGeometry,
    pub n_beams: u32,
    /// Peak ring force over the target travel, N.
    pub peak_force: f64,
    pub objective: f64,
    pub root_stress: f64,
    pub violations: Vec<Violation>,
}

impl Candidate {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn total_violation(&self) -> f64 {
        self.violations.iter().map(|v| v.magnitude).sum()
    }

    fn tie_key(&self) -> [f64; 5] {
        let g = &self.geometry;
        [g.length, g.thickness, g.tilt, g.width, f64::from(self.n_beams)]
    }

    /// Search order: feasible by objective, then infeasible by total
    /// violation, ties by `(L, T, θ, W, n)`.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        let primary = match (self.is_feasible(), other.is_feasible()) {
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (true, true) => self.objective.total_cmp(&other.objective),
            (false, false) => self.total_violation().total_cmp(&other.total_violation()),
        };
        primary.then_with(|| {
            self.tie_key()
                .iter()
                .zip(other.tie_key())
                .map(|(a, b)| a.total_cmp(&b))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    }

    fn violations_label(&self) -> String {
        self.violations
            .iter()
            .map(|v| format!("{}={}", v.constraint, format_sig(v.magnitude)))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Geometry-dependent part of a candidate; the beam count only scales it.
struct GeometryScreen {
    double_peak: f64,
    root_stress: f64,
    bistable_at_travel: Option<f64>,
}

fn screen_geometry(spec: &DesignSpec, geom: &VBeamGeometry) -> Result<GeometryScreen> {
    let curve = force_curve(geom, &spec.material, spec.target_travel, DEFAULT_CURVE_SAMPLES)?;
    let double_peak = curve
        .samples()
        .iter()
        .map(|s| s.force)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_fo = curve
        .samples()
        .iter()
        .map(|s| s.f_o.abs())
        .fold(0.0, f64::max);
    // Root moment of a guided beam with end shear F_o is F_o·L/2.
    let ei = spec.material.youngs_modulus * geom.second_moment();
    let end_shear = max_fo * 4.0 * ei / (geom.length * geom.length);
    let section = CantileverSection {
        out_of_plane_b: geom.width,
        in_plane_h: geom.thickness,
        jaw_length: geom.length,
    };
    let root_stress = cantilever_stress(end_shear * geom.length / 2.0, &section)?;
    let (d1, _) = bistability_margin(geom, spec.target_travel)?;
    Ok(GeometryScreen {
        double_peak,
        root_stress,
        bistable_at_travel: (d1 >= 0.0).then_some(d1),
    })
}

fn assemble_candidate(
    spec: &DesignSpec,
    geom: &VBeamGeometry,
    n_beams: u32,
    screen: &GeometryScreen,
) -> Candidate {
    let peak_force = screen.double_peak / 2.0 * f64::from(n_beams);
    let mut violations = Vec::new();
    if screen.root_stress > spec.stress_limit {
        violations.push(Violation {
            constraint: "stress",
            magnitude: (screen.root_stress - spec.stress_limit) / spec.stress_limit.max(1e-12),
        });
    }
    let span = 2.0 * geom.length * geom.tilt.cos() + spec.fixture_allowance;
    if span > spec.length_budget {
        violations.push(Violation {
            constraint: "length",
            magnitude: (span - spec.length_budget) / spec.length_budget,
        });
    }
    if spec.require_non_bistable_at_travel {
        if let Some(d1) = screen.bistable_at_travel {
            violations.push(Violation {
                constraint: "bistable_at_travel",
                magnitude: d1.max(f64::MIN_POSITIVE),
            });
        }
    }
    Candidate {
        geometry: *geom,
        n_beams,
        peak_force,
        objective: (peak_force - spec.target_force).abs() / spec.target_force,
        root_stress: screen.root_stress,
        violations,
    }
}

pub fn evaluate_candidate(spec: &DesignSpec, geom: &VBeamGeometry, n_beams: u32) -> Result<Candidate> {
    spec.validate()?;
    geom.validate()?;
    ensure(
        spec.bounds.contains(geom, n_beams),
        "candidate lies outside the design bounds",
    )?;
    let screen = screen_geometry(spec, geom)?;
    Ok(assemble_candidate(spec, geom, n_beams, &screen))
}

fn beam_count_grid(bounds: (u32, u32), count: usize) -> Vec<u32> {
    let (lo, hi) = bounds;
    let all = (hi - lo) as usize + 1;
    if count >= all {
        return (lo..=hi).collect();
    }
    let mut v: Vec<u32> = Range::new(f64::from(lo), f64::from(hi))
        .grid(count)
        .into_iter()
        .map(|x| x.round() as u32)
        .collect();
    v.dedup();
    v
}

fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not build a {threads}-thread pool ({e}); using the global pool");
            f()
        }
    }
}

/// Evaluates the full Cartesian grid and returns it ranked.
pub fn grid_search(spec: &DesignSpec, density: &GridDensity) -> Result<Vec<Candidate>> {
    spec.validate()?;
    let b = &spec.bounds;
    let lengths = b.length.grid(density.length);
    let thicknesses = b.thickness.grid(density.thickness);
    let widths = b.width.grid(density.width);
    let tilts = b.tilt_deg.grid(density.tilt);
    let counts = beam_count_grid(b.n_beams, density.n_beams);

    let requested = [lengths.len(), thicknesses.len(), widths.len(), tilts.len(), counts.len()]
        .iter()
        .fold(1u64, |acc, &n| acc.saturating_mul(n as u64));
    if requested > spec.grid_cap {
        return Err(Error::GridTooLarge {
            requested,
            cap: spec.grid_cap,
        });
    }
    ensure(requested > 0, "grid density must be at least 1 per parameter")?;

    let mut geometries = Vec::new();
    for &l in &lengths {
        for &t in &thicknesses {
            for &w in &widths {
                for &th in &tilts {
                    geometries.push((l, t, w, th));
                }
            }
        }
    }

    let per_geometry: Vec<Result<Vec<Candidate>>> = with_pool(|| {
        geometries
            .par_iter()
            .map(|&(l, t, w, th)| {
                let geom = VBeamGeometry::from_degrees(l, t, w, th)?;
                let screen = screen_geometry(spec, &geom)?;
                Ok(counts
                    .iter()
                    .map(|&n| assemble_candidate(spec, &geom, n, &screen))
                    .collect())
            })
            .collect()
    });

    let mut all = Vec::with_capacity(requested as usize);
    for r in per_geometry {
        all.extend(r?);
    }
    all.sort_by(Candidate::rank_cmp);
    Ok(all)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub candidate: Candidate,
    pub evaluations: usize,
    /// The evaluation budget ran out before the pattern collapsed.
    pub exhausted: bool,
}

/// Relative step below which a continuous coordinate stops being polled.
const MIN_RELATIVE_STEP: f64 = 1e-6;

/// Coordinate pattern search from `start`. Polls L, T, W, θ, then n ± 1,
/// moves to the first improvement and halves the continuous steps when a
/// full poll fails.
pub fn refine(spec: &DesignSpec, start: &Candidate, max_evals: usize) -> Result<RefineOutcome> {
    spec.validate()?;
    ensure(
        spec.bounds.contains(&start.geometry, start.n_beams),
        "refine start lies outside the design bounds",
    )?;
    if max_evals == 0 {
        return Ok(RefineOutcome {
            candidate: start.clone(),
            evaluations: 0,
            exhausted: true,
        });
    }
    let b = spec.bounds;
    let ranges = [b.length, b.thickness, b.width, b.tilt_deg];
    let mut steps: Vec<f64> = ranges.iter().map(|r| r.span() / 4.0).collect();
    let floors: Vec<f64> = ranges
        .iter()
        .map(|r| MIN_RELATIVE_STEP * r.span().max(r.max.abs()))
        .collect();

    let mut best = start.clone();
    let mut evals = 0;
    loop {
        let g = best.geometry;
        let x = [g.length, g.thickness, g.width, g.tilt_degrees()];
        let mut trials: Vec<([f64; 4], u32)> = Vec::new();
        for k in 0..4 {
            if steps[k] < floors[k] || ranges[k].span() == 0.0 {
                continue;
            }
            for dir in [1.0, -1.0] {
                let mut y = x;
                y[k] = (x[k] + dir * steps[k]).clamp(ranges[k].min, ranges[k].max);
                if y[k] != x[k] {
                    trials.push((y, best.n_beams));
                }
            }
        }
        for n in [best.n_beams.saturating_add(1), best.n_beams.saturating_sub(1)] {
            if n != best.n_beams && (b.n_beams.0..=b.n_beams.1).contains(&n) {
                trials.push((x, n));
            }
        }

        let mut moved = false;
        for (y, n) in trials {
            if evals >= max_evals {
                return Ok(RefineOutcome {
                    candidate: best,
                    evaluations: evals,
                    exhausted: true,
                });
            }
            let Ok(geom) = VBeamGeometry::from_degrees(y[0], y[1], y[2], y[3]) else {
                continue;
            };
            evals += 1;
            let cand = match evaluate_candidate(spec, &geom, n) {
                Ok(c) => c,
                Err(e) if e.is_numerical() => continue,
                Err(e) => return Err(e),
            };
            if improves(&cand, &best) {
                best = cand;
                moved = true;
                break;
            }
        }
        if !moved {
            let mut any = false;
            for k in 0..4 {
                steps[k] *= 0.5;
                any |= steps[k] >= floors[k] && ranges[k].span() > 0.0;
            }
            if !any {
                return Ok(RefineOutcome {
                    candidate: best,
                    evaluations: evals,
                    exhausted: false,
                });
            }
        }
    }
}

fn improves(cand: &Candidate, best: &Candidate) -> bool {
    match (cand.is_feasible(), best.is_feasible()) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => cand.objective < best.objective,
        (false, false) => cand.total_violation() < best.total_violation(),
    }
}

pub fn write_ranked_csv<W: Write>(candidates: &[Candidate], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{RANKED_CSV_HEADER}")?;
    for (i, c) in candidates.iter().enumerate() {
        let g = &c.geometry;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            i + 1,
            format_sig(g.length),
            format_sig(g.thickness),
            format_sig(g.width),
            format_sig(g.tilt_degrees()),
            c.n_beams,
            format_sig(c.peak_force),
            format_sig(c.objective),
            c.violations_label()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_spec(target: f64) -> DesignSpec {
        let mut spec = DesignSpec::new(target, 5.0, DesignBounds::around(&VBeamGeometry::table1(), 12));
        spec.stress_limit = 100.0;
        spec
    }

    #[test]
    fn table1_objective_against_paper_force() {
        let c = evaluate_candidate(&table1_spec(21.6), &VBeamGeometry::table1(), 12).unwrap();
        assert!((c.peak_force - 18.1).abs() < 0.2, "{}", c.peak_force);
        assert!((c.objective - 0.16).abs() < 0.01, "{}", c.objective);
    }

    #[test]
    fn self_target_gives_zero_objective() {
        let peak = evaluate_candidate(&table1_spec(1.0), &VBeamGeometry::table1(), 12)
            .unwrap()
            .peak_force;
        let c = evaluate_candidate(&table1_spec(peak), &VBeamGeometry::table1(), 12).unwrap();
        assert_eq!(c.objective, 0.0);
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let spec = table1_spec(20.0);
        let g = VBeamGeometry::from_degrees(41.0, 1.2, 5.0, 7.0).unwrap();
        assert!(evaluate_candidate(&spec, &g, 12).is_err());
    }

    #[test]
    fn default_stress_limit_flags_table1() {
        let mut spec = table1_spec(20.0);
        spec.stress_limit = DEFAULT_STRESS_LIMIT;
        let c = evaluate_candidate(&spec, &VBeamGeometry::table1(), 12).unwrap();
        assert!(c.root_stress > 50.0 && c.root_stress < 100.0, "{}", c.root_stress);
        assert_eq!(c.violations[0].constraint, "stress");
    }

    #[test]
    fn length_budget_violation() {
        let mut spec = table1_spec(20.0);
        spec.length_budget = 70.0;
        let c = evaluate_candidate(&spec, &VBeamGeometry::table1(), 12).unwrap();
        assert!(c.violations.iter().any(|v| v.constraint == "length"));
    }

    #[test]
    fn one_point_grid() {
        let spec = table1_spec(20.0);
        let r = grid_search(&spec, &GridDensity::uniform(1)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].geometry, VBeamGeometry::table1());
    }

    #[test]
    fn grid_cap_is_enforced() {
        let mut spec = table1_spec(20.0);
        spec.bounds.length = Range::new(36.0, 44.0);
        spec.bounds.thickness = Range::new(1.0, 1.4);
        spec.bounds.width = Range::new(4.0, 6.0);
        spec.bounds.tilt_deg = Range::new(6.0, 8.0);
        spec.bounds.n_beams = (10, 12);
        spec.grid_cap = 10;
        match grid_search(&spec, &GridDensity::uniform(2)) {
            Err(Error::GridTooLarge { requested, cap }) => assert_eq!((requested, cap), (32, 10)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn max_evals_zero_returns_start() {
        let spec = table1_spec(20.0);
        let start = evaluate_candidate(&spec, &VBeamGeometry::table1(), 12).unwrap();
        let out = refine(&spec, &start, 0).unwrap();
        assert!(out.exhausted);
        assert_eq!(out.candidate, start);
    }

    #[test]
    fn degenerate_region_returns_start() {
        let spec = table1_spec(20.0);
        let start = evaluate_candidate(&spec, &VBeamGeometry::table1(), 12).unwrap();
        let out = refine(&spec, &start, 100).unwrap();
        assert!(!out.exhausted);
        assert_eq!(out.evaluations, 0);
        assert_eq!(out.candidate, start);
    }

    #[test]
    fn refine_recovers_from_thicker_start() {
        let base = evaluate_candidate(&table1_spec(1.0), &VBeamGeometry::table1(), 12)
            .unwrap()
            .peak_force;
        let mut spec = table1_spec(base);
        spec.bounds.thickness = Range::new(1.0, 1.4);
        spec.bounds.length = Range::new(36.0, 44.0);
        let g = VBeamGeometry::from_degrees(40.0, 1.26, 5.0, 7.0).unwrap();
        let start = evaluate_candidate(&spec, &g, 12).unwrap();
        let out = refine(&spec, &start, 200).unwrap();
        assert!(out.candidate.objective < start.objective);
        assert!(out.candidate.objective < 0.01, "{}", out.candidate.objective);
    }
}
