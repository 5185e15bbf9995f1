//! One check per acceptance criterion. Every criterion runs and prints a
//! PASS or FAIL line before the test asserts that all of them passed.

use std::time::{Duration, Instant};

use graspsynth::design::{grid_search, DesignBounds, DesignSpec, GridDensity, Range};
use graspsynth::fe::{
    build_vbeam_mesh, compare_curves, path_to_curve, solve_guided_sweep, solve_multibeam_assembly,
    verify_against_closed_form, FeSettings,
};
use graspsynth::mechanism::{
    aggregate_ring_force, cantilever_stress, grasper_response, jaw_opening, latch_step,
    shuttle_transfer_ratio, single_beam_curve, CantileverSection, LatchEvent, LatchPhase,
    LatchState, MechanismConfig,
};
use graspsynth::tebc::{
    bistability_margin, bistable_onset, force_curve, monostable_root, normalize_deflection,
    peak_force, ForceDisplacementCurve, MaterialModel, MonostableIntermediates, VBeamGeometry,
};
use proptest::prelude::RngExt;
use proptest::test_runner::{RngAlgorithm, TestRng};

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn rng() -> TestRng {
    TestRng::from_seed(RngAlgorithm::ChaCha, &[7u8; 32])
}

fn ring_peak() -> Outcome {
    let ((at, peak), dt) = timed(|| {
        let c = force_curve(&VBeamGeometry::table1(), &MaterialModel::pla(), 5.0, 500).unwrap();
        peak_force(&aggregate_ring_force(&c, 12).unwrap()).unwrap()
    });
    let (lo, hi) = (21.6 * 0.7, 21.6 * 1.3);
    Outcome {
        id: 1,
        name: "ring peak force vs 21.6 N",
        pass: peak >= lo && peak <= hi && dt < Duration::from_secs(1),
        detail: format!(
            "computed {peak:.4} N at {at:.4} mm, band [{lo:.2}, {hi:.2}], {:.3} s",
            dt.as_secs_f64()
        ),
    }
}

fn crossover() -> Outcome {
    let g = VBeamGeometry::table1();
    let n = 500;
    let step = 5.0 / n as f64;
    let xs: Vec<f64> = (1..=n).map(|i| 5.0 * i as f64 / n as f64).collect();
    let first = xs
        .iter()
        .position(|&x| bistability_margin(&g, x).unwrap().0 >= 0.0);
    // d1 is affine in the travel, so two evaluations pin its root.
    let (d_a, _) = bistability_margin(&g, 1.0).unwrap();
    let (d_b, _) = bistability_margin(&g, 2.0).unwrap();
    let root = 1.0 - d_a / (d_b - d_a);
    let (pass, detail) = match first {
        Some(i) if i > 0 => {
            let x = xs[i];
            (
                (x - 1.137).abs() <= step && (root - 1.137).abs() <= step,
                format!("sign change at {x:.4} mm, affine root {root:.5} mm, step {step}"),
            )
        }
        _ => (false, "no sign change inside the sweep".into()),
    };
    Outcome { id: 2, name: "branch crossover at 1.137 mm", pass, detail }
}

fn jaw_anchors() -> Outcome {
    let cfg = MechanismConfig::final_prototype();
    let anchors = [(3.2, 7.13), (6.4, 15.99), (8.0, 20.52)];
    let got: Vec<f64> = anchors.iter().map(|&(x, _)| jaw_opening(&cfg, x).unwrap()).collect();
    Outcome {
        id: 3,
        name: "jaw opening anchors",
        pass: anchors.iter().zip(&got).all(|(&(_, y), &g)| g == y),
        detail: format!("{got:?}"),
    }
}

/// Real roots of a cubic by scanning for sign changes and bisecting.
fn oracle_roots(k: [f64; 4]) -> Vec<f64> {
    let f = |x: f64| ((k[0] * x + k[1]) * x + k[2]) * x + k[3];
    let bound = 1.0 + k[1..].iter().map(|c| (c / k[0]).abs()).fold(0.0, f64::max);
    let n = 100_000;
    let mut roots = Vec::new();
    let mut prev = -bound;
    for i in 1..=n {
        let x = -bound + 2.0 * bound * i as f64 / n as f64;
        if f(prev) == 0.0 {
            roots.push(prev);
        } else if f(prev) * f(x) < 0.0 {
            let (mut lo, mut hi) = (prev, x);
            while hi - lo > f64::EPSILON * hi.abs().max(1.0) {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(lo) * f(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = x;
    }
    roots
}

fn cubic_roots() -> Outcome {
    let mut r = rng();
    let mut worst = 0.0f64;
    let mut done = 0;
    let (_, dt) = timed(|| {
        while done < 1000 {
            let g = VBeamGeometry::from_degrees(
                r.random_range(20.0..80.0),
                r.random_range(0.5..2.0),
                r.random_range(2.0..8.0),
                r.random_range(1.0..15.0),
            )
            .unwrap();
            let limit = bistable_onset(&g).unwrap_or(10.0).min(10.0);
            let travel = limit * r.random_range(0.001..0.999);
            let nd = normalize_deflection(&g, travel).unwrap();
            let p = monostable_root(nd.t, nd.x_o, nd.y_o).unwrap();
            let i = MonostableIntermediates::from_normalized(nd.t, nd.x_o, nd.y_o);
            let nearest = oracle_roots([i.k1, i.k2, i.k3, i.k4])
                .into_iter()
                .map(|q| (q - p).abs() / p.abs().max(1.0))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest);
            done += 1;
        }
    });
    Outcome {
        id: 4,
        name: "monostable root vs bisection oracle",
        pass: worst <= 1e-8 && dt < Duration::from_secs(10),
        detail: format!("{done} states, worst rel diff {worst:.2e}, {:.3} s", dt.as_secs_f64()),
    }
}

fn linear_stiffness() -> Outcome {
    let g = VBeamGeometry::new(40.0, 1.2, 5.0, 0.0).unwrap();
    let mat = MaterialModel::pla();
    let settings = FeSettings::default();
    let model = build_vbeam_mesh(&g, &mat, settings.n_elements).unwrap();
    let travel = 1e-4 * g.length;
    let path = solve_guided_sweep(&model, travel, 1, &settings).unwrap();
    let k = path.last().unwrap().drive_force / travel;
    let want = 12.0 * mat.youngs_modulus * g.second_moment() / g.length.powi(3);
    let rel = (k - want) / want;
    Outcome {
        id: 5,
        name: "FE guided-beam linear stiffness",
        pass: rel.abs() <= 0.01,
        detail: format!("{k:.6} N/mm vs {want:.6} N/mm ({rel:+.2e})"),
    }
}

/// One interior maximum, then no meaningful rise, ending below 15% of the peak.
fn single_peak_then_decline(c: &ForceDisplacementCurve) -> bool {
    let f: Vec<f64> = c.samples().iter().map(|s| s.force).collect();
    let (i, &peak) = f
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let rises = f[i..].windows(2).any(|w| w[1] > w[0] + 1e-3 * peak);
    i > 0 && i + 1 < f.len() && !rises && f.last().unwrap().abs() <= 0.15 * peak
}

fn fe_cross_validation() -> Outcome {
    let g = VBeamGeometry::table1();
    let mat = MaterialModel::pla();
    let settings = FeSettings::default();
    let (res, dt) = timed(|| verify_against_closed_form(&g, &mat, 5.0, 500, &settings));
    let (report, path) = match res {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                id: 6,
                name: "closed form vs FE single flexure",
                pass: false,
                detail: format!("FE sweep failed: {e}"),
            }
        }
    };
    let single = single_beam_curve(&force_curve(&g, &mat, 5.0, 500).unwrap()).unwrap();
    let fe = path_to_curve(&path, &g, &mat).unwrap();
    let again = compare_curves(&single, &fe).unwrap();
    assert_eq!(again, report.single);
    let shapes = single_peak_then_decline(&single) && single_peak_then_decline(&fe);
    let s = report.single;
    Outcome {
        id: 6,
        name: "closed form vs FE single flexure",
        pass: s.rms_rel <= 0.20
            && s.peak_location_diff <= 0.5
            && shapes
            && dt < Duration::from_secs(60),
        detail: format!(
            "rms_rel {:.4}, max_rel {:.4}, peak diff {:+.4}, peak location diff {:.4} mm, \
             closed-form peak {:.4} N, FE peak {:.4} N, shapes ok {shapes}, \
             unhalved rms_rel {:.4}, unhalved peak diff {:+.4}, {:.3} s",
            s.rms_rel,
            s.max_rel,
            s.peak_force_rel_diff,
            s.peak_location_diff,
            report.closed_form_peak,
            report.fe_peak,
            report.unhalved.rms_rel,
            report.unhalved.peak_force_rel_diff,
            dt.as_secs_f64()
        ),
    }
}

fn beam_count_ordering() -> Outcome {
    let ten = MechanismConfig::with_beams(VBeamGeometry::table1(), 10, MaterialModel::pla());
    let twelve = MechanismConfig::with_beams(VBeamGeometry::table1(), 12, MaterialModel::pla());
    let settings = FeSettings::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for dy in [0.25, 0.5, 1.0] {
        let a = shuttle_transfer_ratio(&ten, dy).unwrap();
        let b = shuttle_transfer_ratio(&twelve, dy).unwrap();
        pass &= a > b;
        detail.push(format!("ratio@{dy}: {a:.4}>{b:.4}"));
    }
    for ring in [1.0, 2.0, 3.0] {
        match (
            solve_multibeam_assembly(&ten, ring, &settings),
            solve_multibeam_assembly(&twelve, ring, &settings),
        ) {
            (Ok((a, _)), Ok((b, _))) => {
                pass &= a > b;
                detail.push(format!("FE@{ring}: {a:.4}>{b:.4}"));
            }
            (a, b) => {
                pass = false;
                detail.push(format!("FE@{ring} failed: {:?} {:?}", a.err(), b.err()));
            }
        }
    }
    Outcome { id: 7, name: "10 beams move the shuttle further than 12", pass, detail: detail.join(", ") }
}

fn latch_machine() -> Outcome {
    let travel = 8.0;
    let alphabet = [
        LatchEvent::PullRing(0.0),
        LatchEvent::PullRing(4.0),
        LatchEvent::PullRing(7.999),
        LatchEvent::PullRing(8.0),
        LatchEvent::PullRing(8.001),
        LatchEvent::PullRing(12.0),
        LatchEvent::PressTrigger,
    ];
    let mut sequences = 0u64;
    let mut failures = 0u64;
    for len in 0..=6u32 {
        for code in 0..alphabet.len().pow(len) {
            sequences += 1;
            let mut c = code;
            let mut s = LatchState::RELEASED;
            // Reference model: a pull to the notch latches, a press releases.
            let mut latched = false;
            let mut ok = true;
            for _ in 0..len {
                let e = alphabet[c % alphabet.len()];
                c /= alphabet.len();
                let next = latch_step(s, e, travel).unwrap();
                if s.phase == LatchPhase::Unstressed && e == LatchEvent::PressTrigger {
                    ok &= next == s;
                }
                match e {
                    LatchEvent::PullRing(d) => latched |= d >= travel,
                    LatchEvent::PressTrigger => latched = false,
                }
                ok &= (next.phase == LatchPhase::StressedLatched) == latched;
                ok &= (next.phase == LatchPhase::StressedLatched) == (next.ring_displacement >= travel);
                s = next;
            }
            failures += u64::from(!ok);
        }
    }
    Outcome {
        id: 8,
        name: "latch state machine, sequences up to 6",
        pass: failures == 0,
        detail: format!("{sequences} sequences, {failures} failing"),
    }
}

fn stress_scaling() -> Outcome {
    let mut r = rng();
    let m = 137.5;
    let reference = 6.0 * m;
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let b = r.random_range(0.1..20.0);
        let h = r.random_range(0.1..20.0);
        let s = CantileverSection::new(b, h, 30.0).unwrap();
        let v = cantilever_stress(m, &s).unwrap() * b * h * h;
        worst = worst.max((v - reference).abs() / reference);
    }
    Outcome {
        id: 9,
        name: "stress times b h^2 is constant",
        pass: worst <= 1e-12,
        detail: format!("worst rel diff {worst:.2e} over 10000 sections"),
    }
}

fn design_self_consistency() -> Outcome {
    let table1 = VBeamGeometry::table1();
    let bounds = DesignBounds {
        length: Range::new(36.0, 44.0),
        thickness: Range::new(1.0, 1.4),
        width: Range::new(4.5, 5.5),
        tilt_deg: Range::new(5.0, 9.0),
        n_beams: (11, 13),
    };
    let mut spec = DesignSpec::new(1.0, 5.0, bounds);
    spec.stress_limit = 100.0;
    let own = graspsynth::design::evaluate_candidate(&spec, &table1, 12).unwrap();
    spec.target_force = own.peak_force;
    let density = GridDensity { length: 5, thickness: 5, width: 3, tilt: 5, n_beams: 3 };
    let (ranked, dt) = timed(|| grid_search(&spec, &density).unwrap());
    let best = &ranked[0];
    let g = best.geometry;
    let same = best.n_beams == 12
        && (g.length - table1.length).abs() <= 1e-12
        && (g.thickness - table1.thickness).abs() <= 1e-12
        && (g.width - table1.width).abs() <= 1e-12
        && (g.tilt - table1.tilt).abs() <= 1e-12;
    Outcome {
        id: 10,
        name: "design search recovers its own reference",
        pass: same
            && best.is_feasible()
            && best.objective < 1e-9
            && ranked.len() <= 100_000
            && dt < Duration::from_secs(30),
        detail: format!(
            "rank 1 L={} T={} W={} tilt={:.4} deg n={} objective {:.2e}, {} points, {:.3} s",
            g.length,
            g.thickness,
            g.width,
            g.tilt_degrees(),
            best.n_beams,
            best.objective,
            ranked.len(),
            dt.as_secs_f64()
        ),
    }
}

fn prototype_band() -> Outcome {
    let cfg = MechanismConfig::final_prototype();
    let max = cfg.max_calibrated_trigger();
    let n = 1600;
    let peak = (0..=n)
        .map(|i| grasper_response(&cfg, max * i as f64 / n as f64).unwrap().ring_force)
        .fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = (16.829 / 2.0, 16.829 * 2.0);
    Outcome {
        id: 11,
        name: "final prototype ring force within 2x of 16.829 N",
        pass: peak >= lo && peak <= hi,
        detail: format!("peak {peak:.4} N, band [{lo:.3}, {hi:.3}]"),
    }
}

#[test]
fn acceptance() {
    let outcomes = [
        ring_peak(),
        crossover(),
        jaw_anchors(),
        cubic_roots(),
        linear_stiffness(),
        fe_cross_validation(),
        beam_count_ordering(),
        latch_machine(),
        stress_scaling(),
        design_self_consistency(),
        prototype_band(),
    ];
    for o in &outcomes {
        println!(
            "{} criterion {:>2} {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.detail
        );
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
