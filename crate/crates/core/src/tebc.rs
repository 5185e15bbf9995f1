//! Closed-form load/deflection model of a guided, tilted V-beam pair
//! (two-element beam constraint model).
//!
//! Travel `ΔY` of the shuttle is normalized by the beam length, the
//! bistability margin `d1` selects between a constant-axial-load branch and
//! a branch where the axial load is a root of a cubic, and the end loads are
//! converted back to the shuttle force of a symmetric double V-beam.
//!
//! Units are mm, N and MPa throughout.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::cubic::Cubic;
use crate::error::{ensure, Error, Result};

/// Normalized axial load on the bistable branch.
pub const BISTABLE_AXIAL_LOAD: f64 = -9.8837;
/// `f_o = BISTABLE_TRANSVERSE_GAIN · y_o` on the bistable branch.
pub const BISTABLE_TRANSVERSE_GAIN: f64 = -4.8618;
/// Sample count used by [`force_curve`] callers that have no preference.
pub const DEFAULT_CURVE_SAMPLES: usize = 500;

const DENOMINATOR_GUARD: f64 = 1e-9;
const CARDANO_AGREEMENT: f64 = 1e-6;
/// Largest normalized-deflection increment taken while following the cubic
/// root through a region with several real roots.
const CONTINUATION_STEP: f64 = 1e-3;

/// Dimensions of one tilted flexure. The tilt is stored in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VBeamGeometry {
    pub length: f64,
    pub thickness: f64,
    pub width: f64,
    pub tilt: f64,
}

impl VBeamGeometry {
    pub fn new(length: f64, thickness: f64, width: f64, tilt: f64) -> Result<Self> {
        let geom = Self {
            length,
            thickness,
            width,
            tilt,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn from_degrees(length: f64, thickness: f64, width: f64, tilt_deg: f64) -> Result<Self> {
        Self::new(length, thickness, width, tilt_deg.to_radians())
    }

    /// Flexure used for the 12-beam trigger: 40 × 1.2 × 5 mm, tilted 7°.
    pub fn table1() -> Self {
        Self::from_degrees(40.0, 1.2, 5.0, 7.0).expect("valid reference geometry")
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.length.is_finite() && self.length > 0.0,
            "beam length L must be positive",
        )?;
        ensure(
            self.thickness.is_finite() && self.thickness > 0.0,
            "beam thickness T must be positive",
        )?;
        ensure(
            self.width.is_finite() && self.width > 0.0,
            "beam width W must be positive",
        )?;
        ensure(
            self.tilt.is_finite() && (0.0..FRAC_PI_2).contains(&self.tilt),
            "tilt angle must satisfy 0 <= theta < 90 deg",
        )?;
        ensure(
            self.thickness < self.length,
            "slender beam requires thickness T < length L",
        )
    }

    pub fn tilt_degrees(&self) -> f64 {
        self.tilt.to_degrees()
    }

    /// Second moment of area `W·T³/12` for in-plane bending.
    pub fn second_moment(&self) -> f64 {
        self.width * self.thickness.powi(3) / 12.0
    }

    pub fn area(&self) -> f64 {
        self.width * self.thickness
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    /// Young's modulus in MPa.
    pub youngs_modulus: f64,
    /// Only the finite-element model reads this.
    pub poisson_ratio: f64,
}

impl MaterialModel {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        let mat = Self {
            youngs_modulus,
            poisson_ratio,
        };
        mat.validate()?;
        Ok(mat)
    }

    /// Printed PLA: E = 1800 MPa, ν = 0.3.
    pub fn pla() -> Self {
        Self {
            youngs_modulus: 1800.0,
            poisson_ratio: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.youngs_modulus.is_finite() && self.youngs_modulus > 0.0,
            "Young's modulus E must be positive",
        )?;
        ensure(
            (0.0..0.5).contains(&self.poisson_ratio),
            "Poisson ratio must satisfy 0 <= nu < 0.5",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedDeflection {
    pub x_o: f64,
    pub y_o: f64,
    pub t: f64,
    pub delta_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Bistable,
    Monostable,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Bistable => "Bistable",
            Branch::Monostable => "Monostable",
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Normalized guided-end loads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamLoadState {
    pub f_o: f64,
    pub p_o: f64,
    /// The model gives no expression for the end moment; always `None`.
    pub m_o: Option<f64>,
    pub branch: Branch,
    pub d1_value: f64,
}

/// Coefficients of the axial-load cubic `k1·p³ + k2·p² + k3·p + k4 = 0` and
/// the pieces of its closed-form solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonostableIntermediates {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub c1: f64,
    /// Real cube root term; `None` when the radicand under the square root
    /// is negative (three real roots) or the term vanishes.
    pub c2: Option<f64>,
    /// Closed-form real root built from `c1` and `c2`.
    pub p1: Option<f64>,
}

impl MonostableIntermediates {
    pub fn from_normalized(t: f64, x_o: f64, y_o: f64) -> Self {
        let t2 = t * t;
        let y2 = y_o * y_o;
        let k1 = 4.0 * t2 / 675.0 + y2 / 42000.0;
        let k2 = 16.0 * t2 / 45.0 - 17.0 * y2 / 2100.0 - 8.0 * x_o / 225.0;
        let k3 = 16.0 * t2 / 3.0 - 96.0 * y2 / 175.0 - 32.0 * x_o / 15.0;
        let k4 = -48.0 * y2 / 5.0 - 32.0 * x_o;
        Self::from_coefficients(k1, k2, k3, k4)
    }

    pub fn from_coefficients(k1: f64, k2: f64, k3: f64, k4: f64) -> Self {
        let c1 = -k2 * k2 + 3.0 * k1 * k3;
        let q = -2.0 * k2.powi(3) + 9.0 * k1 * k2 * k3 - 27.0 * k1 * k1 * k4;
        let radicand = 4.0 * c1.powi(3) + q * q;
        let c2 = if radicand >= 0.0 {
            Some((q + radicand.sqrt()).cbrt()).filter(|c| *c != 0.0 && c.is_finite())
        } else {
            None
        };
        let cbrt2 = 2f64.cbrt();
        let p1 = c2.map(|c2| {
            -k2 / (3.0 * k1) - cbrt2 * c1 / (3.0 * k1 * c2) + c2 / (3.0 * cbrt2 * k1)
        });
        Self {
            k1,
            k2,
            k3,
            k4,
            c1,
            c2,
            p1,
        }
    }

    pub fn cubic(&self) -> Cubic {
        Cubic::new(self.k1, self.k2, self.k3, self.k4)
    }

    pub fn residual_bound(&self) -> f64 {
        1e-9 * self.k4.abs().max(1.0)
    }
}

pub fn normalize_deflection(geom: &VBeamGeometry, delta_y: f64) -> Result<NormalizedDeflection> {
    geom.validate()?;
    ensure(
        delta_y.is_finite() && delta_y >= 0.0,
        "travel delta_y must be non-negative",
    )?;
    let (sin, cos) = geom.tilt.sin_cos();
    Ok(NormalizedDeflection {
        x_o: -2.0 * delta_y * sin / geom.length,
        y_o: -2.0 * delta_y * cos / geom.length,
        t: 2.0 * geom.thickness / geom.length,
        delta_y,
    })
}

/// Bistability margin `d1` and whether the necessary condition `d1 >= 0`
/// holds at this travel.
pub fn bistability_margin(geom: &VBeamGeometry, delta_y: f64) -> Result<(f64, bool)> {
    geom.validate()?;
    ensure(
        delta_y.is_finite() && delta_y >= 0.0,
        "travel delta_y must be non-negative",
    )?;
    let d1 = d1_slope(geom) * delta_y + d1_intercept(geom);
    Ok((d1, d1 >= 0.0))
}

fn d1_slope(geom: &VBeamGeometry) -> f64 {
    let l = geom.length;
    let (sin, cos) = geom.tilt.sin_cos();
    -4.652 * cos * cos / (l * l) + 6.514 * sin / l
}

fn d1_intercept(geom: &VBeamGeometry) -> f64 {
    -21.46 * geom.thickness * geom.thickness / (geom.length * geom.length)
}

/// Travel at which `d1` changes sign, if it ever does for positive travel.
pub fn bistable_onset(geom: &VBeamGeometry) -> Option<f64> {
    let slope = d1_slope(geom);
    (slope > 0.0).then(|| -d1_intercept(geom) / slope)
}

/// Real root of the axial-load cubic nearest `seed`, checked against the
/// residual bound.
pub fn solve_monostable_cubic(inter: &MonostableIntermediates, seed: f64) -> Result<f64> {
    if !(inter.k1 > 0.0) {
        return Err(Error::validation("cubic leading coefficient k1 must be positive"));
    }
    let cubic = inter.cubic();
    let p = cubic.root_nearest(seed);
    let residual = cubic.eval(p).abs();
    if !(residual < inter.residual_bound()) {
        return Err(Error::Numerical(format!(
            "axial-load cubic residual {residual:e} exceeds bound {:e} at p = {p}",
            inter.residual_bound()
        )));
    }
    Ok(p)
}

/// Follows the physical root of the axial-load cubic along the ray
/// `s·(x_o, y_o)` from `s_from` (where the root is `p_from`) to `s = 1`.
///
/// When only one real root exists at the end point it is taken directly;
/// otherwise the ray is walked in small increments, each time keeping the
/// root closest to the previous one.
pub fn continue_monostable_root(t: f64, x_o: f64, y_o: f64, s_from: f64, p_from: f64) -> Result<f64> {
    let end = MonostableIntermediates::from_normalized(t, x_o, y_o);
    let roots = end.cubic().real_roots();
    if roots.len() == 1 {
        return solve_monostable_cubic(&end, roots[0]);
    }

    let span = (1.0 - s_from) * x_o.abs().max(y_o.abs());
    let n = ((span / CONTINUATION_STEP).ceil() as usize).max(1);
    let mut p = p_from;
    for k in 1..=n {
        let s = s_from + (1.0 - s_from) * k as f64 / n as f64;
        let inter = MonostableIntermediates::from_normalized(t, s * x_o, s * y_o);
        p = solve_monostable_cubic(&inter, p)?;
    }
    Ok(p)
}

/// Root of the cubic on the branch that starts at `p = 0` for zero deflection.
pub fn monostable_root(t: f64, x_o: f64, y_o: f64) -> Result<f64> {
    continue_monostable_root(t, x_o, y_o, 0.0, 0.0)
}

/// Normalized transverse load on the cubic branch for axial load `p`.
pub fn monostable_transverse_load(y_o: f64, p: f64) -> Result<f64> {
    let den = 4.0 + 2.0 / 15.0 * p - 11.0 / 6300.0 * p * p;
    if den.abs() < DENOMINATOR_GUARD {
        return Err(Error::Singular(format!(
            "transverse-load denominator {den:e} vanishes at p = {p}"
        )));
    }
    let stiff = 12.0 + 6.0 / 5.0 * p + p * p / 700.0;
    let coupling = -6.0 - p / 10.0 + p * p / 1400.0;
    Ok(0.5 * y_o * (stiff - coupling * coupling / den))
}

/// Branch selection and end loads, continuing from a known state on the
/// cubic branch when one is available.
fn branch_loads_from(
    geom: &VBeamGeometry,
    delta_y: f64,
    previous: Option<(f64, f64)>,
) -> Result<BeamLoadState> {
    let nd = normalize_deflection(geom, delta_y)?;
    let (d1_value, bistable) = bistability_margin(geom, delta_y)?;
    if bistable {
        return Ok(BeamLoadState {
            f_o: BISTABLE_TRANSVERSE_GAIN * nd.y_o,
            p_o: BISTABLE_AXIAL_LOAD,
            m_o: None,
            branch: Branch::Bistable,
            d1_value,
        });
    }
    if delta_y == 0.0 {
        return Ok(BeamLoadState {
            f_o: 0.0,
            p_o: 0.0,
            m_o: None,
            branch: Branch::Monostable,
            d1_value,
        });
    }

    let (s_from, p_from) = match previous {
        Some((dy, p)) if dy <= delta_y => (dy / delta_y, p),
        _ => (0.0, 0.0),
    };
    let p_o = continue_monostable_root(nd.t, nd.x_o, nd.y_o, s_from, p_from)?;

    let inter = MonostableIntermediates::from_normalized(nd.t, nd.x_o, nd.y_o);
    if let Some(closed) = inter.p1 {
        let rel = (closed - p_o).abs() / p_o.abs().max(1e-300);
        if rel > CARDANO_AGREEMENT {
            log::warn!(
                "closed-form axial load {closed} disagrees with continued root {p_o} \
                 (rel. {rel:e}) at delta_y = {delta_y} mm"
            );
        }
    }

    Ok(BeamLoadState {
        f_o: monostable_transverse_load(nd.y_o, p_o)?,
        p_o,
        m_o: None,
        branch: Branch::Monostable,
        d1_value,
    })
}

pub fn branch_loads(geom: &VBeamGeometry, delta_y: f64) -> Result<BeamLoadState> {
    branch_loads_from(geom, delta_y, None)
}

fn force_from_loads(geom: &VBeamGeometry, mat: &MaterialModel, loads: &BeamLoadState) -> f64 {
    let scale = 4.0 * mat.youngs_modulus * geom.second_moment() / (geom.length * geom.length);
    let (sin, cos) = geom.tilt.sin_cos();
    -(scale * loads.f_o * cos + scale * loads.p_o * sin)
}

/// Shuttle force (N) of the symmetric double V-beam at travel `delta_y`.
pub fn actuation_force(geom: &VBeamGeometry, mat: &MaterialModel, delta_y: f64) -> Result<f64> {
    mat.validate()?;
    let loads = branch_loads(geom, delta_y)?;
    Ok(force_from_loads(geom, mat, &loads))
}

/// What a curve's force column measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveBasis {
    /// Symmetric double V-beam.
    DoubleBeam,
    SingleBeam,
    /// `n_beams` single beams acting in parallel on the pull ring.
    Ring { n_beams: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveSource {
    ClosedForm,
    FiniteElement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub geometry: VBeamGeometry,
    pub material: MaterialModel,
    pub basis: CurveBasis,
    pub source: CurveSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub delta_y: f64,
    pub force: f64,
    /// `None` for samples that did not come from the closed-form model.
    pub branch: Option<Branch>,
    pub f_o: f64,
    pub p_o: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceDisplacementCurve {
    samples: Vec<CurveSample>,
    provenance: Provenance,
}

impl ForceDisplacementCurve {
    /// Builds a curve, checking that `delta_y` is strictly increasing.
    pub fn new(samples: Vec<CurveSample>, provenance: Provenance) -> Result<Self> {
        ensure(!samples.is_empty(), "curve must contain at least one sample")?;
        ensure(
            samples.iter().all(|s| s.delta_y.is_finite() && s.force.is_finite()),
            "curve samples must be finite",
        )?;
        ensure(
            samples.windows(2).all(|w| w[0].delta_y < w[1].delta_y),
            "curve delta_y must be strictly increasing",
        )?;
        Ok(Self {
            samples,
            provenance,
        })
    }

    pub fn samples(&self) -> &[CurveSample] {
        &self.samples
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (
            self.samples[0].delta_y,
            self.samples[self.samples.len() - 1].delta_y,
        )
    }

    /// Linear interpolation of the force; `None` outside the sampled domain.
    pub fn force_at(&self, delta_y: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if delta_y < lo || delta_y > hi {
            return None;
        }
        let idx = self.samples.partition_point(|s| s.delta_y < delta_y);
        if idx < self.samples.len() && self.samples[idx].delta_y == delta_y {
            return Some(self.samples[idx].force);
        }
        let (a, b) = (&self.samples[idx - 1], &self.samples[idx]);
        let w = (delta_y - a.delta_y) / (b.delta_y - a.delta_y);
        Some(a.force + w * (b.force - a.force))
    }

    /// Same samples with forces mapped through `f`.
    pub(crate) fn map_forces(&self, basis: CurveBasis, f: impl Fn(f64) -> f64) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| CurveSample {
                force: f(s.force),
                ..*s
            })
            .collect();
        Self {
            samples,
            provenance: Provenance {
                basis,
                ..self.provenance
            },
        }
    }
}

/// Double-beam force on a uniform grid of `n_samples` points in
/// `(0, travel_max]`.
pub fn force_curve(
    geom: &VBeamGeometry,
    mat: &MaterialModel,
    travel_max: f64,
    n_samples: usize,
) -> Result<ForceDisplacementCurve> {
    geom.validate()?;
    mat.validate()?;
    ensure(
        travel_max.is_finite() && travel_max > 0.0,
        "curve travel_max must be positive",
    )?;
    ensure(n_samples >= 2, "curve needs at least 2 samples")?;

    let step = travel_max / n_samples as f64;
    let mut previous: Option<(f64, f64)> = None;
    let mut samples = Vec::with_capacity(n_samples);
    for i in 1..=n_samples {
        let delta_y = if i == n_samples { travel_max } else { step * i as f64 };
        let loads = branch_loads_from(geom, delta_y, previous)?;
        if loads.branch == Branch::Monostable {
            previous = Some((delta_y, loads.p_o));
        }
        samples.push(CurveSample {
            delta_y,
            force: force_from_loads(geom, mat, &loads),
            branch: Some(loads.branch),
            f_o: loads.f_o,
            p_o: loads.p_o,
        });
    }
    ForceDisplacementCurve::new(
        samples,
        Provenance {
            geometry: *geom,
            material: *mat,
            basis: CurveBasis::DoubleBeam,
            source: CurveSource::ClosedForm,
        },
    )
}

/// Sample with the largest force; the earliest one wins ties.
pub fn peak_force(curve: &ForceDisplacementCurve) -> Result<(f64, f64)> {
    let mut best: Option<&CurveSample> = None;
    for s in curve.samples() {
        if best.is_none_or(|b| s.force > b.force) {
            best = Some(s);
        }
    }
    best.map(|s| (s.delta_y, s.force))
        .ok_or_else(|| Error::validation("peak of an empty curve"))
}
