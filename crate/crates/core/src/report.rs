//! CSV writers for curves, tables and verification summaries.
//!
//! Numbers are rounded to 9 significant digits and written in plain
//! decimal notation; lines end in `\n`.

use std::io::Write;
use std::path::Path;

use crate::error::{ensure, Error, Result};
use crate::fe::VerifyReport;
use crate::mechanism::{grasper_response, MechanismConfig};
use crate::tebc::{bistability_margin, CurveBasis, ForceDisplacementCurve, VBeamGeometry};

pub const CURVE_CSV_HEADER: &str = "delta_y_mm,branch,f_o,p_o,force_single_N,force_ring_N";
pub const D1_CSV_HEADER: &str = "delta_y_mm,d1,bistable";
pub const GRASPER_CSV_HEADER: &str =
    "ring_disp_mm,shuttle_disp_mm,ring_force_N,jaw_opening_mm,latch_phase,jaw_root_stress_MPa";
pub const VERIFY_CSV_HEADER: &str = "metric,value";

/// Rounds to 9 significant digits and prints in plain decimal notation.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("round trip");
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// One row per sample of a double-beam curve, with the single-flexure
/// share and the ring total for `n_beams` flexures.
pub fn write_curve_csv<W: Write>(
    double_curve: &ForceDisplacementCurve,
    n_beams: u32,
    mut out: W,
) -> Result<()> {
    ensure(
        double_curve.provenance().basis == CurveBasis::DoubleBeam,
        "curve CSV expects a double V-beam curve",
    )?;
    let mut buf = String::new();
    buf.push_str(CURVE_CSV_HEADER);
    buf.push('\n');
    for s in double_curve.samples() {
        let single = s.force / 2.0;
        buf.push_str(&format!(
            "{},{},{},{},{},{}\n",
            format_sig(s.delta_y),
            s.branch.map_or("", |b| b.as_str()),
            format_sig(s.f_o),
            format_sig(s.p_o),
            format_sig(single),
            format_sig(single * f64::from(n_beams)),
        ));
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::io("<curve csv>", e))
}

/// Bistability margin on `n_samples` evenly spaced points of `(0, travel]`.
pub fn write_d1_csv<W: Write>(
    geom: &VBeamGeometry,
    travel: f64,
    n_samples: usize,
    mut out: W,
) -> Result<()> {
    ensure(n_samples >= 1, "d1 table needs at least one sample")?;
    let mut buf = format!("{D1_CSV_HEADER}\n");
    for i in 1..=n_samples {
        let dy = if i == n_samples {
            travel
        } else {
            travel * i as f64 / n_samples as f64
        };
        let (d1, ok) = bistability_margin(geom, dy)?;
        buf.push_str(&format!("{},{},{}\n", format_sig(dy), format_sig(d1), ok));
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::io("<d1 csv>", e))
}

/// Grasper state at `n_samples + 1` ring displacements from 0 to `max`.
pub fn write_grasper_csv<W: Write>(
    config: &MechanismConfig,
    max: f64,
    n_samples: usize,
    mut out: W,
) -> Result<()> {
    ensure(n_samples >= 1, "grasper table needs at least one sample")?;
    let mut buf = format!("{GRASPER_CSV_HEADER}\n");
    for i in 0..=n_samples {
        let d = if i == n_samples {
            max
        } else {
            max * i as f64 / n_samples as f64
        };
        let r = grasper_response(config, d)?;
        buf.push_str(&format!(
            "{},{},{},{},{},{}\n",
            format_sig(d),
            format_sig(r.shuttle_displacement),
            format_sig(r.ring_force),
            format_sig(r.jaw_opening),
            r.latch.phase.as_str(),
            format_sig(r.jaw_root_stress),
        ));
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::io("<grasper csv>", e))
}

pub fn write_verify_csv<W: Write>(report: &VerifyReport, mut out: W) -> Result<()> {
    let rows = [
        ("rms_rel", report.single.rms_rel),
        ("max_rel", report.single.max_rel),
        ("peak_force_rel_diff", report.single.peak_force_rel_diff),
        ("peak_location_diff_mm", report.single.peak_location_diff),
        ("closed_form_single_peak_N", report.closed_form_peak),
        ("fe_single_peak_N", report.fe_peak),
        ("unhalved_rms_rel", report.unhalved.rms_rel),
        ("unhalved_peak_force_rel_diff", report.unhalved.peak_force_rel_diff),
        ("fe_newton_iterations", report.fe_iterations as f64),
        ("fe_max_residual_N", report.fe_max_residual),
    ];
    let mut buf = format!("{VERIFY_CSV_HEADER}\n");
    for (k, v) in rows {
        buf.push_str(&format!("{k},{}\n", format_sig(v)));
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::io("<verify csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tebc::{force_curve, MaterialModel};

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(0.1 + 0.2), "0.3");
        assert_eq!(format_sig(123456789.4), "123456789");
        assert_eq!(format_sig(-2.0000000004e-7), "-0.0000002");
        assert_eq!(format_sig(-0.0), "0");
    }

    #[test]
    fn two_sample_curve_file() {
        let c = force_curve(&VBeamGeometry::table1(), &MaterialModel::pla(), 5.0, 2).unwrap();
        let mut out = Vec::new();
        write_curve_csv(&c, 12, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(CURVE_CSV_HEADER));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn branch_tags_flip_at_crossover() {
        let c = force_curve(&VBeamGeometry::table1(), &MaterialModel::pla(), 5.0, 500).unwrap();
        let mut out = Vec::new();
        write_curve_csv(&c, 12, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let tags: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
        let flip = tags.iter().position(|t| *t == "Bistable").unwrap();
        assert!(tags[..flip].iter().all(|t| *t == "Monostable"));
        assert!(tags[flip..].iter().all(|t| *t == "Bistable"));
        let dy: f64 = text.lines().nth(flip + 1).unwrap().split(',').next().unwrap().parse().unwrap();
        assert!((dy - 1.137).abs() <= 0.01, "{dy}");
    }
}
