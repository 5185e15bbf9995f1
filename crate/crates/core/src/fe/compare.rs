use super::{build_vbeam_mesh, solve_guided_sweep, Dof, EquilibriumPath, FeSettings};
use crate::error::{ensure, Error, Result};
use crate::mechanism::single_beam_curve;
use crate::tebc::{
    force_curve, peak_force, CurveBasis, CurveSample, CurveSource, ForceDisplacementCurve,
    MaterialModel, Provenance, VBeamGeometry,
};

/// Differences of `b` relative to `a`, all normalized by the peak of `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveComparison {
    pub rms_rel: f64,
    pub max_rel: f64,
    /// `(peak_b - peak_a) / peak_a`.
    pub peak_force_rel_diff: f64,
    /// `|ΔY_peak(b) - ΔY_peak(a)|`, mm.
    pub peak_location_diff: f64,
    pub n_points: usize,
}

/// Samples `b` at the abscissae of `a` that fall inside `b`'s domain.
pub fn compare_curves(
    a: &ForceDisplacementCurve,
    b: &ForceDisplacementCurve,
) -> Result<CurveComparison> {
    let (lo, hi) = b.domain();
    let pairs: Vec<(f64, f64, f64)> = a
        .samples()
        .iter()
        .filter(|s| s.delta_y >= lo && s.delta_y <= hi)
        .map(|s| (s.delta_y, s.force, b.force_at(s.delta_y).expect("inside domain")))
        .collect();
    ensure(!pairs.is_empty(), "compared curves share no displacement range")?;

    let (pa_loc, pa) = peak_force(a)?;
    let (pb_loc, pb) = peak_force(b)?;
    let scale = pa.abs();
    if scale == 0.0 {
        return Err(Error::Numerical(
            "reference curve has zero peak force".into(),
        ));
    }
    let mut sq = 0.0;
    let mut max = 0.0f64;
    for &(_, fa, fb) in &pairs {
        let d = (fb - fa) / scale;
        sq += d * d;
        max = max.max(d.abs());
    }
    Ok(CurveComparison {
        rms_rel: (sq / pairs.len() as f64).sqrt(),
        max_rel: max,
        peak_force_rel_diff: (pb - pa) / pa,
        peak_location_diff: (pb_loc - pa_loc).abs(),
        n_points: pairs.len(),
    })
}

/// Turns a guided-beam sweep into a single-beam force curve. The tip
/// reaction is resolved along and across the undeformed beam axis and
/// scaled by `L²/(4EI)` to give `f_o` and `p_o`.
pub fn path_to_curve(
    path: &EquilibriumPath,
    geom: &VBeamGeometry,
    mat: &MaterialModel,
) -> Result<ForceDisplacementCurve> {
    let scale = geom.length * geom.length / (4.0 * mat.youngs_modulus * geom.second_moment());
    let (c, s) = (geom.tilt.cos(), geom.tilt.sin());
    let samples: Vec<CurveSample> = path
        .steps
        .iter()
        .filter(|st| st.control > 0.0)
        .map(|st| {
            // The guided tip is the last node of a V-beam mesh.
            let tip = st.displacements.len() / 3 - 1;
            let rx = st.reaction(tip, Dof::Ux).unwrap_or(0.0);
            let ry = st.reaction(tip, Dof::Uy).unwrap_or(0.0);
            CurveSample {
                delta_y: st.control,
                force: st.drive_force,
                branch: None,
                f_o: (-rx * s + ry * c) * scale,
                p_o: (rx * c + ry * s) * scale,
            }
        })
        .collect();
    ensure(!samples.is_empty(), "FE path has no deflected steps")?;
    ForceDisplacementCurve::new(
        samples,
        Provenance {
            geometry: *geom,
            material: *mat,
            basis: CurveBasis::SingleBeam,
            source: CurveSource::FiniteElement,
        },
    )
}

/// Summary of a closed-form vs finite-element comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyReport {
    /// Closed-form single flexure against FE.
    pub single: CurveComparison,
    /// Unhalved closed-form force against the same FE curve.
    pub unhalved: CurveComparison,
    pub closed_form_peak: f64,
    pub fe_peak: f64,
    pub fe_iterations: usize,
    pub fe_max_residual: f64,
}

/// Sweeps one flexure with the FE model and compares it with the
/// closed-form single-flexure curve sampled at `n_samples` points.
pub fn verify_against_closed_form(
    geom: &VBeamGeometry,
    mat: &MaterialModel,
    travel: f64,
    n_samples: usize,
    settings: &FeSettings,
) -> Result<(VerifyReport, EquilibriumPath)> {
    let double = force_curve(geom, mat, travel, n_samples)?;
    let single = single_beam_curve(&double)?;
    let model = build_vbeam_mesh(geom, mat, settings.n_elements)?;
    let path = solve_guided_sweep(&model, travel, settings.n_steps, settings)?;
    let fe = path_to_curve(&path, geom, mat)?;
    let report = VerifyReport {
        single: compare_curves(&single, &fe)?,
        unhalved: compare_curves(&double, &fe)?,
        closed_form_peak: peak_force(&single)?.1,
        fe_peak: peak_force(&fe)?.1,
        fe_iterations: path.total_iterations(),
        fe_max_residual: path.max_residual(),
    };
    Ok((report, path))
}
