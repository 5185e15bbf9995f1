//! Whole-grasper behaviour assembled from single-flexure results.
//!
//! The closed-form model describes a symmetric double V-beam; one flexure
//! of the trigger is taken as half of that, and `n` flexures act in
//! parallel on the shuttle. The shuttle is tied to the pull ring through a
//! lumped series spring, the ring is held by a notch once it has travelled
//! far enough, and the jaw opening follows a calibrated trigger-to-jaw map.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::tebc::{
    actuation_force, CurveBasis, ForceDisplacementCurve, MaterialModel, VBeamGeometry,
};

/// Central-difference step for the flexure tangent stiffness, mm.
pub const STIFFNESS_FD_STEP: f64 = 1e-3;
pub const DEFAULT_SERIES_STIFFNESS: f64 = 10.0;
pub const DEFAULT_LATCH_TRAVEL: f64 = 8.0;
pub const DEFAULT_LENGTH_BUDGET: f64 = 200.0;
pub const DEFAULT_LATCH_RAMP_FACTOR: f64 = 1.5;
/// Fraction of the latch travel over which the notch stiffening ramps in.
pub const LATCH_RAMP_FRACTION: f64 = 0.05;

/// Trigger displacement → jaw opening anchors from the full-grasper FE run.
pub const TABLE2_JAW_CALIBRATION: [(f64, f64); 3] = [(3.2, 7.13), (6.4, 15.99), (8.0, 20.52)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantileverSection {
    /// Out-of-plane thickness `b`.
    pub out_of_plane_b: f64,
    /// In-plane thickness `h`.
    pub in_plane_h: f64,
    pub jaw_length: f64,
}

impl CantileverSection {
    pub fn new(out_of_plane_b: f64, in_plane_h: f64, jaw_length: f64) -> Result<Self> {
        let s = Self {
            out_of_plane_b,
            in_plane_h,
            jaw_length,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.out_of_plane_b.is_finite() && self.out_of_plane_b > 0.0,
            "jaw section out-of-plane thickness b must be positive",
        )?;
        ensure(
            self.in_plane_h.is_finite() && self.in_plane_h > 0.0,
            "jaw section in-plane thickness h must be positive",
        )?;
        ensure(
            self.jaw_length.is_finite() && self.jaw_length > 0.0,
            "jaw length must be positive",
        )
    }

    pub fn second_moment(&self) -> f64 {
        self.out_of_plane_b * self.in_plane_h.powi(3) / 12.0
    }
}

impl Default for CantileverSection {
    /// 3 mm extrusion; jaw thickness and length are uncalibrated placeholders.
    fn default() -> Self {
        Self {
            out_of_plane_b: 3.0,
            in_plane_h: 1.0,
            jaw_length: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub beam_geometry: VBeamGeometry,
    pub n_beams: u32,
    pub material: MaterialModel,
    /// Ring displacement at which the notch engages, mm.
    pub latch_travel: f64,
    /// `(trigger_disp, jaw_disp)` anchors, mm; `(0, 0)` is implicit.
    pub jaw_calibration: Vec<(f64, f64)>,
    /// Lumped handle/ring compliance between ring and shuttle, N/mm.
    pub series_stiffness_ks: f64,
    pub jaw_section: CantileverSection,
    pub overall_length_budget: f64,
    /// Ring-force multiplier reached when the notch is fully crossed.
    pub latch_ramp_factor: f64,
}

impl MechanismConfig {
    /// Defaults for everything but the flexures and their count.
    pub fn with_beams(beam_geometry: VBeamGeometry, n_beams: u32, material: MaterialModel) -> Self {
        Self {
            beam_geometry,
            n_beams,
            material,
            latch_travel: DEFAULT_LATCH_TRAVEL,
            jaw_calibration: TABLE2_JAW_CALIBRATION.to_vec(),
            series_stiffness_ks: DEFAULT_SERIES_STIFFNESS,
            jaw_section: CantileverSection::default(),
            overall_length_budget: DEFAULT_LENGTH_BUDGET,
            latch_ramp_factor: DEFAULT_LATCH_RAMP_FACTOR,
        }
    }

    /// Twelve reference flexures in PLA.
    pub fn table1() -> Self {
        Self::with_beams(VBeamGeometry::table1(), 12, MaterialModel::pla())
    }

    /// The six-flexure configuration of the final prototype.
    pub fn final_prototype() -> Self {
        Self::with_beams(VBeamGeometry::table1(), 6, MaterialModel::pla())
    }

    pub fn validate(&self) -> Result<()> {
        self.beam_geometry.validate()?;
        self.material.validate()?;
        self.jaw_section.validate()?;
        ensure(self.n_beams >= 1, "n_beams must be at least 1")?;
        ensure(
            self.latch_travel.is_finite() && self.latch_travel > 0.0,
            "latch_travel must be positive",
        )?;
        ensure(
            self.series_stiffness_ks.is_finite() && self.series_stiffness_ks > 0.0,
            "series_stiffness_ks must be positive",
        )?;
        ensure(
            self.overall_length_budget.is_finite() && self.overall_length_budget > 0.0,
            "overall_length_budget must be positive",
        )?;
        ensure(
            self.latch_ramp_factor.is_finite() && self.latch_ramp_factor >= 1.0,
            "latch_ramp_factor must be at least 1",
        )?;
        ensure(
            !self.jaw_calibration.is_empty(),
            "jaw_calibration needs at least one anchor",
        )?;
        let mut prev = (0.0, 0.0);
        for &(trigger, jaw) in &self.jaw_calibration {
            ensure(
                trigger.is_finite() && jaw.is_finite() && trigger > prev.0 && jaw > prev.1,
                "jaw_calibration anchors must be strictly increasing from (0, 0) in both coordinates",
            )?;
            prev = (trigger, jaw);
        }
        Ok(())
    }

    pub fn max_calibrated_trigger(&self) -> f64 {
        self.jaw_calibration.last().map_or(0.0, |a| a.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatchPhase {
    Unstressed,
    StressedLatched,
}

impl LatchPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            LatchPhase::Unstressed => "Unstressed",
            LatchPhase::StressedLatched => "StressedLatched",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatchState {
    pub phase: LatchPhase,
    pub ring_displacement: f64,
}

impl LatchState {
    pub const RELEASED: LatchState = LatchState {
        phase: LatchPhase::Unstressed,
        ring_displacement: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatchEvent {
    PullRing(f64),
    PressTrigger,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrasperResponse {
    pub ring_force: f64,
    pub shuttle_displacement: f64,
    pub jaw_opening: f64,
    pub latch: LatchState,
    pub jaw_root_stress: f64,
}

/// Force of one flexure: half the double V-beam force.
pub fn single_beam_force(geom: &VBeamGeometry, mat: &MaterialModel, delta_y: f64) -> Result<f64> {
    Ok(0.5 * actuation_force(geom, mat, delta_y)?)
}

/// Halves a double-beam curve and scales it by the flexure count.
pub fn aggregate_ring_force(
    double_beam_curve: &ForceDisplacementCurve,
    n_beams: u32,
) -> Result<ForceDisplacementCurve> {
    ensure(n_beams >= 1, "n_beams must be at least 1")?;
    ensure(
        double_beam_curve.provenance().basis == CurveBasis::DoubleBeam,
        "aggregation expects a double V-beam curve",
    )?;
    let n = f64::from(n_beams);
    Ok(double_beam_curve.map_forces(CurveBasis::Ring { n_beams }, |f| f / 2.0 * n))
}

/// One flexure's share of a double-beam curve.
pub fn single_beam_curve(double_beam_curve: &ForceDisplacementCurve) -> Result<ForceDisplacementCurve> {
    ensure(
        double_beam_curve.provenance().basis == CurveBasis::DoubleBeam,
        "halving expects a double V-beam curve",
    )?;
    Ok(double_beam_curve.map_forces(CurveBasis::SingleBeam, |f| f / 2.0))
}

/// Tangent stiffness of one flexure at `delta_y`, clamped at zero.
pub fn flexure_tangent_stiffness(config: &MechanismConfig, delta_y: f64) -> Result<f64> {
    let h = STIFFNESS_FD_STEP;
    let geom = &config.beam_geometry;
    let mat = &config.material;
    // One-sided near zero travel, where the backward point does not exist.
    let (lo, hi) = if delta_y >= h {
        (delta_y - h, delta_y + h)
    } else {
        (delta_y, delta_y + h)
    };
    let k = (single_beam_force(geom, mat, hi)? - single_beam_force(geom, mat, lo)?) / (hi - lo);
    if !k.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite flexure tangent stiffness at delta_y = {delta_y} mm"
        )));
    }
    Ok(k.max(0.0))
}

/// Fraction of ring travel reaching the shuttle under the series-spring
/// model `k_s / (k_s + n·k_b)`.
pub fn shuttle_transfer_ratio(config: &MechanismConfig, delta_y: f64) -> Result<f64> {
    config.validate()?;
    let kb = flexure_tangent_stiffness(config, delta_y)?;
    let ks = config.series_stiffness_ks;
    Ok(ks / (ks + f64::from(config.n_beams) * kb))
}

/// Jaw opening from the trigger displacement by piecewise-linear
/// interpolation through `(0, 0)` and the calibration anchors.
pub fn jaw_opening(config: &MechanismConfig, trigger_disp: f64) -> Result<f64> {
    let max = config.max_calibrated_trigger();
    if !(trigger_disp >= 0.0 && trigger_disp <= max) {
        return Err(Error::OutOfRange {
            quantity: "trigger displacement",
            value: trigger_disp,
            min: 0.0,
            max,
        });
    }
    let mut prev = (0.0, 0.0);
    for &(x, y) in &config.jaw_calibration {
        if trigger_disp == x {
            return Ok(y);
        }
        if trigger_disp < x {
            let w = (trigger_disp - prev.0) / (x - prev.0);
            return Ok(prev.1 + w * (y - prev.1));
        }
        prev = (x, y);
    }
    Ok(prev.1)
}

/// Peak bending stress `6·M / (b·h²)` of a rectangular section, MPa.
pub fn cantilever_stress(moment: f64, section: &CantileverSection) -> Result<f64> {
    section.validate()?;
    Ok(6.0 * moment / (section.out_of_plane_b * section.in_plane_h * section.in_plane_h))
}

pub fn latch_step(state: LatchState, event: LatchEvent, latch_travel: f64) -> Result<LatchState> {
    ensure(
        latch_travel.is_finite() && latch_travel > 0.0,
        "latch_travel must be positive",
    )?;
    Ok(match (state.phase, event) {
        (_, LatchEvent::PullRing(d)) if !d.is_finite() || d < 0.0 => {
            return Err(Error::validation("ring pull displacement must be non-negative"));
        }
        (LatchPhase::Unstressed, LatchEvent::PullRing(d)) if d >= latch_travel => LatchState {
            phase: LatchPhase::StressedLatched,
            ring_displacement: d,
        },
        (LatchPhase::Unstressed, LatchEvent::PullRing(d)) => LatchState {
            phase: LatchPhase::Unstressed,
            ring_displacement: d,
        },
        (LatchPhase::StressedLatched, LatchEvent::PullRing(d)) => LatchState {
            phase: LatchPhase::StressedLatched,
            ring_displacement: d.max(latch_travel),
        },
        (LatchPhase::StressedLatched, LatchEvent::PressTrigger) => LatchState::RELEASED,
        (LatchPhase::Unstressed, LatchEvent::PressTrigger) => state,
    })
}

/// Multiplier on the ring force as the notch is crossed: 1 until the last
/// 5% of the latch travel, then a smoothstep up to `latch_ramp_factor`.
pub fn latch_ramp(config: &MechanismConfig, ring_disp: f64) -> f64 {
    let start = (1.0 - LATCH_RAMP_FRACTION) * config.latch_travel;
    let width = LATCH_RAMP_FRACTION * config.latch_travel;
    let s = ((ring_disp - start) / width).clamp(0.0, 1.0);
    1.0 + (config.latch_ramp_factor - 1.0) * s * s * (3.0 - 2.0 * s)
}

/// Shuttle travel `s` satisfying `s = ratio(s) · ring_disp`, by bisection.
pub fn shuttle_displacement(config: &MechanismConfig, ring_disp: f64) -> Result<f64> {
    if ring_disp == 0.0 {
        return Ok(0.0);
    }
    let gap = |s: f64| -> Result<f64> { Ok(s - shuttle_transfer_ratio(config, s)? * ring_disp) };
    let (mut lo, mut hi) = (0.0, ring_disp);
    if gap(hi)? <= 0.0 {
        return Ok(hi);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * ring_disp {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn grasper_response(config: &MechanismConfig, ring_disp: f64) -> Result<GrasperResponse> {
    config.validate()?;
    let max = config.max_calibrated_trigger();
    if !(ring_disp >= 0.0 && ring_disp <= max) {
        return Err(Error::OutOfRange {
            quantity: "ring displacement",
            value: ring_disp,
            min: 0.0,
            max,
        });
    }

    let shuttle = shuttle_displacement(config, ring_disp)?;
    let per_beam = single_beam_force(&config.beam_geometry, &config.material, shuttle)?;
    let base = per_beam * f64::from(config.n_beams);
    // The notch adds resistance whatever the sign of the flexure force.
    let ring_force = base + (latch_ramp(config, ring_disp) - 1.0) * base.abs();

    let opening = jaw_opening(config, ring_disp)?;
    let latch = latch_step(
        LatchState::RELEASED,
        LatchEvent::PullRing(ring_disp),
        config.latch_travel,
    )?;

    // Linear cantilever: tip force from tip deflection, then root moment.
    let section = &config.jaw_section;
    let tip_force = 3.0 * config.material.youngs_modulus * section.second_moment() * opening
        / section.jaw_length.powi(3);
    let jaw_root_stress = cantilever_stress(tip_force * section.jaw_length, section)?;

    let response = GrasperResponse {
        ring_force,
        shuttle_displacement: shuttle,
        jaw_opening: opening,
        latch,
        jaw_root_stress,
    };
    if ![ring_force, shuttle, opening, jaw_root_stress]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(Error::Numerical(format!(
            "non-finite grasper response at ring displacement {ring_disp} mm"
        )));
    }
    Ok(response)
}
