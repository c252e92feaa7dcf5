use std::f64::consts::PI;

use gaussfish::channels::ModeBath;
use gaussfish::gaussian::{uncertainty_matrix, GaussianState};
use gaussfish::numkit::{CMat, RMat};
use gaussfish::scenarios::{
    closed_form_bounds, run_point, run_point_full, sweep, Axis, Probe, ProbeKind, ScenarioConfig, Sweep,
};

struct Derived {
    b_s: f64,
    b_r: f64,
    r_q: f64,
    b_h_upper: f64,
}

/// Bounds for displacing mode 0 of a two-mode state whose output covariance is
/// [[a I, c Z], [c Z, a I]], Z = diag(-1, 1), with mode-0 amplitude damping η.
/// F_S = 2η² [V⁻¹]₀₀ and F_R = 2η² [(V + iΩ)⁻¹]₀₀ computed directly.
fn two_mode_oracle(a: f64, c: f64, eta2: f64) -> Derived {
    let mut v = RMat::identity(4, 4) * a;
    for (i, s) in [(0, -1.0), (1, 1.0)] {
        v[(i, i + 2)] = s * c;
        v[(i + 2, i)] = s * c;
    }
    let vinv = v.clone().try_inverse().unwrap();
    let f_s = vinv.view((0, 0), (2, 2)).into_owned() * (2.0 * eta2);
    let b_s = f_s.try_inverse().unwrap().trace();
    let m_inv: CMat = uncertainty_matrix(&v).try_inverse().unwrap();
    let f_r: CMat = m_inv.view((0, 0), (2, 2)).into_owned() * num_complex::Complex64::new(2.0 * eta2, 0.0);
    let f_r_inv = f_r.try_inverse().unwrap();
    // The imaginary part of a 2x2 Hermitian inverse is antisymmetric; its trace norm is 2|x|.
    let b_r = f_r_inv.trace().re + 2.0 * f_r_inv[(0, 1)].im.abs();
    // From the block structure: F_S⁻¹ U = Ω / a, so R_Q = 1 / a.
    let r_q = 1.0 / a;
    Derived { b_s, b_r, r_q, b_h_upper: (1.0 + r_q) * b_s }
}

fn oracle_for(r: f64, n_th: f64, gamma: f64, t: f64, n_e: f64) -> Derived {
    let eta2 = (-gamma * t).exp();
    let v0 = 2.0 * n_th + 1.0;
    let a = eta2 * v0 * (2.0 * r).cosh() + (1.0 - eta2) * (2.0 * n_e + 1.0);
    let c = eta2 * v0 * (2.0 * r).sinh();
    two_mode_oracle(a, c, eta2)
}

fn probe_for(r: f64, n_th: f64, squeezed: bool) -> Probe {
    match (squeezed, n_th > 0.0) {
        (true, false) => Probe::Tmsv { r, phi: PI },
        (true, true) => Probe::Tmst { r, n_th, phi: PI },
        (false, false) => Probe::Tmdv { alpha: [0.2, -0.1, 0.3, 0.0] },
        (false, true) => Probe::Tmdt { alpha: [0.0; 4], n_th },
    }
}

fn point(probe: Probe, gamma: f64, n_e: f64, t: f64) -> gaussfish::scenarios::SweepRow {
    let cfg = ScenarioConfig::new(
        probe,
        ModeBath::thermal(gamma, n_e),
        t,
        Sweep { axis: Axis::T, start: t, stop: t, step: 1.0 },
    );
    run_point(&cfg, t).unwrap()
}

#[test]
fn pipeline_matches_direct_derivation_for_unequal_occupations() {
    for &(n_th, n_e) in &[(0.3, 0.5), (0.5, 0.3), (0.0, 0.8), (1.2, 0.0)] {
        for &r in &[0.0, 0.3, 0.9] {
            for &t in &[0.1, 0.6] {
                for squeezed in [true, false] {
                    let r_eff = if squeezed { r } else { 0.0 };
                    let row = point(probe_for(r_eff, n_th, squeezed), 1.3, n_e, t);
                    let o = oracle_for(r_eff, n_th, 1.3, t, n_e);
                    let tol = 1e-9 * o.b_r.max(1.0);
                    assert!((row.b_s - o.b_s).abs() < tol, "b_s {} vs {}", row.b_s, o.b_s);
                    assert!(
                        (row.b_r - o.b_r).abs() < tol,
                        "b_r {} vs {} at r {r_eff} nth {n_th} ne {n_e}",
                        row.b_r,
                        o.b_r
                    );
                    assert!((row.r_q - o.r_q).abs() < 1e-9);
                    assert!((row.b_h_upper - o.b_h_upper).abs() < tol);
                }
            }
        }
    }
}

#[test]
fn published_forms_match_pipeline_on_hundred_point_grid() {
    let (gamma, n_e, n_th) = (1.0, 0.5, 0.5);
    let mut worst: f64 = 0.0;
    for kind in [ProbeKind::Tmsv, ProbeKind::Tmst, ProbeKind::Tmdv, ProbeKind::Tmdt] {
        let squeezed = matches!(kind, ProbeKind::Tmsv | ProbeKind::Tmst);
        let occ = if matches!(kind, ProbeKind::Tmst | ProbeKind::Tmdt) { n_th } else { 0.0 };
        for i in 0..25 {
            for &t in &[0.05, 0.2, 0.5, 1.0] {
                let r = if squeezed { 0.06 * i as f64 } else { 0.0 };
                let row = point(probe_for(r, occ, squeezed), gamma, n_e, t);
                let cf = closed_form_bounds(kind, r, occ, gamma, t, n_e).unwrap();
                let mut gaps = vec![(row.b_s - cf.b_s).abs(), (row.b_r - cf.b_r).abs()];
                if kind != ProbeKind::Tmst {
                    gaps.push((row.r_q - cf.r_q).abs());
                    gaps.push((row.b_h_upper - cf.b_h_upper).abs());
                }
                let g = gaps.iter().cloned().fold(0.0, f64::max);
                assert!(g <= 1e-8, "{kind:?} r {r} t {t}: {gaps:?}");
                worst = worst.max(g);
            }
        }
    }
    assert!(worst < 1e-8);
}

#[test]
fn published_mixed_probe_forms_assume_equal_occupations() {
    // Thermal-probe closed forms carry no bath occupation: they agree with the
    // first-principles value only when n_th equals n_e.
    let (r, t) = (0.4, 0.2);
    let cf = closed_form_bounds(ProbeKind::Tmst, r, 0.3, 1.0, t, 0.5).unwrap();
    let o = oracle_for(r, 0.3, 1.0, t, 0.5);
    assert!((cf.b_s - o.b_s).abs() > 1e-2);
    let cf = closed_form_bounds(ProbeKind::Tmdt, 0.0, 0.3, 1.0, t, 0.5).unwrap();
    let o = oracle_for(0.0, 0.3, 1.0, t, 0.5);
    assert!((cf.b_s - o.b_s).abs() > 1e-2);
    let cf = closed_form_bounds(ProbeKind::Tmst, r, 0.5, 1.0, t, 0.5).unwrap();
    let o = oracle_for(r, 0.5, 1.0, t, 0.5);
    assert!((cf.b_s - o.b_s).abs() < 1e-12 && (cf.b_r - o.b_r).abs() < 1e-12);
}

#[test]
fn published_squeezed_thermal_quantumness_differs_from_derivation() {
    // The printed squeezed-thermal R_Q and Holevo upper bound are kept verbatim
    // in closed_form_bounds; the pipeline follows the derivation instead.
    let (r, t) = (0.9, 0.7);
    let cf = closed_form_bounds(ProbeKind::Tmst, r, 0.5, 1.0, t, 0.5).unwrap();
    let row = point(probe_for(r, 0.5, true), 1.0, 0.5, t);
    let o = oracle_for(r, 0.5, 1.0, t, 0.5);
    assert!((row.r_q - o.r_q).abs() < 1e-12);
    assert!((cf.r_q - o.r_q).abs() > 1e-2);
    assert!((cf.b_h_upper - o.b_h_upper).abs() > 1e-2);
}

fn squeezing_sweep(probe: Probe) -> Vec<gaussfish::scenarios::SweepRow> {
    let cfg = ScenarioConfig::new(
        probe,
        ModeBath::thermal(1.0, 0.5),
        0.2,
        Sweep { axis: Axis::R, start: 0.0, stop: 1.5, step: 0.05 },
    );
    let out = sweep(&cfg).unwrap();
    assert!(out.failures.is_empty());
    out.rows
}

#[test]
fn holevo_upper_decreases_with_squeezing() {
    let rows = squeezing_sweep(Probe::Tmsv { r: 0.0, phi: PI });
    assert_eq!(rows.len(), 31);
    for w in rows.windows(2) {
        assert!(w[1].b_h_upper < w[0].b_h_upper, "{} -> {}", w[0].b_h_upper, w[1].b_h_upper);
    }
}

#[test]
fn homodyne_bound_approaches_sld_at_large_squeezing() {
    let rows = squeezing_sweep(Probe::Tmsv { r: 0.0, phi: PI });
    for r in &rows {
        assert!(r.hdb >= r.b_s * (1.0 - 1e-12));
    }
    let tail: Vec<f64> = rows.iter().filter(|r| r.axis >= 1.0 - 1e-9).map(|r| r.hdb - r.b_s).collect();
    assert!(tail.windows(2).all(|w| w[1] < w[0]), "{tail:?}");
    assert!(tail.last().unwrap() / rows.last().unwrap().b_s < 0.2);
}

#[test]
fn time_sweep_starts_below_the_coherent_reference() {
    let cfg = ScenarioConfig::new(
        Probe::Tmsv { r: 0.4, phi: PI },
        ModeBath::thermal(1.0, 0.5),
        0.0,
        Sweep { axis: Axis::T, start: 0.0, stop: 1.0, step: 0.05 },
    );
    let rows = sweep(&cfg).unwrap().rows;
    assert_eq!(rows.len(), 21);
    assert!(rows[0].b_h_upper < rows[0].sql);
    assert!(rows.windows(2).all(|w| w[1].sql > w[0].sql));
}

#[test]
fn single_mode_custom_probe_uses_heterodyne() {
    let probe = Probe::Custom { state: GaussianState::coherent(&[(0.5, -0.2)]).unwrap() };
    let cfg = ScenarioConfig::new(
        probe,
        ModeBath::thermal(0.5, 0.2),
        0.3,
        Sweep { axis: Axis::T, start: 0.0, stop: 0.5, step: 0.25 },
    );
    let p = run_point_full(&cfg, 0.5).unwrap();
    let eta2 = (-0.25f64).exp();
    let v = eta2 + (1.0 - eta2) * 1.4;
    // Heterodyne adds one unit of vacuum noise per quadrature.
    let expect = 2.0 * eta2 / (v + 1.0);
    assert!((p.f_c[(0, 0)] - expect).abs() < 1e-12);
    assert!(p.row.hdb >= p.row.b_h_upper - 1e-12);
}

#[test]
fn failing_point_is_reported_with_its_axis_value() {
    let cfg = ScenarioConfig::new(
        Probe::Tmsv { r: 0.0, phi: PI },
        ModeBath::thermal(1.0, 0.5),
        0.2,
        Sweep { axis: Axis::R, start: 0.0, stop: 800.0, step: 400.0 },
    );
    let out = sweep(&cfg).unwrap();
    assert_eq!(out.rows.len(), 3);
    assert!(!out.rows[0].is_failed());
    assert!(out.rows[2].is_failed());
    assert!(out.failures.iter().any(|f| f.contains("at r = 800")), "{:?}", out.failures);
}
