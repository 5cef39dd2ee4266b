//! Monte Carlo moment checks of the session synthesis: fading law, activity
//! statistics, noise calibration, and the decorrelator-output covariance.

use nalgebra::DVector;
use num_complex::Complex64;

use ndsim_core::channel::{
    draw_activity, draw_fading, median_tau_a, session_rng, synthesize_slots, NetworkConfig,
    SessionRealization,
};
use ndsim_core::signatures::{decorrelator, full_load_length7};

#[test]
fn fading_power_and_median_threshold() {
    let cfg = NetworkConfig::uniform(1, 10, 0.5, 1.0, 1.0, median_tau_a(1.0)).unwrap();
    let mut rng = session_rng(11, 0);
    let n = 1_000_000usize;
    let mut power_sum = 0.0;
    let mut above = 0usize;
    for _ in 0..n {
        let a = draw_fading(&cfg, &mut rng)[0];
        power_sum += a.norm_sqr();
        if a.norm() > cfg.tau_a() {
            above += 1;
        }
    }
    let mean_power = power_sum / n as f64;
    assert!((mean_power - 1.0).abs() < 0.01, "E|alpha|^2 = {mean_power}");
    let p_above = above as f64 / n as f64;
    assert!((p_above - 0.5).abs() < 0.005, "P(|alpha| > tau_A) = {p_above}");
}

#[test]
fn activity_first_moments() {
    let cfg = NetworkConfig::uniform(2, 500, 0.5, 1.0, 1.0, median_tau_a(1.0)).unwrap();
    let mut rng = session_rng(12, 0);
    let sessions = 20_000usize;
    let mut m0_sum = 0.0;
    let mut nu_ratio_sum = 0.0;
    let mut nonempty = 0usize;
    for _ in 0..sessions {
        let (_, nu, m0) = draw_activity(&cfg, &mut rng);
        m0_sum += m0 as f64;
        if m0 > 0 {
            nu_ratio_sum += f64::from(nu[0]) / m0 as f64;
            nonempty += 1;
        }
    }
    let mean_m0 = m0_sum / sessions as f64;
    assert!((mean_m0 - 250.0).abs() < 2.5, "E[M0] = {mean_m0}");
    let mean_ratio = nu_ratio_sum / nonempty as f64;
    assert!((mean_ratio - 0.5).abs() < 0.005, "E[nu/M0] = {mean_ratio}");
}

#[test]
fn pure_noise_component_variance() {
    // every node silent: the slots are raw complex noise of variance 2 N0 = 1
    let cfg = NetworkConfig::new(
        150_000,
        vec![0.0; 7],
        vec![1.0; 6],
        1.0,
        median_tau_a(1.0),
    )
    .unwrap();
    let sigs = full_load_length7();
    let mut rng = session_rng(13, 0);
    let session = SessionRealization {
        alpha: vec![Complex64::new(0.0, 0.0); 6],
        psi: vec![vec![false; 6]; cfg.session_slots()],
        nu: vec![0; 6],
        m0: cfg.session_slots(),
        neighbor_truth: vec![false; 6],
    };
    let obs = synthesize_slots(&sigs, &session, &cfg, &mut rng).unwrap();
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for y in &obs.slots {
        for l in 0..7 {
            sum_sq += y[l].norm_sqr();
            count += 1;
        }
    }
    let var = sum_sq / count as f64;
    assert!((var - 1.0).abs() < 0.01, "per-component variance {var}");
}

#[test]
fn decorrelated_noise_covariance_matches_enhanced_n0() {
    // Cov(S^+ z) = 2 N0 (S^T S)^{-1}; check the node-1 diagonal 21/16
    let slots = 400_000usize;
    let cfg = NetworkConfig::new(
        slots,
        vec![0.0; 7],
        vec![1.0; 6],
        1.0,
        median_tau_a(1.0),
    )
    .unwrap();
    let sigs = full_load_length7();
    let dec = decorrelator(&sigs);
    let mut rng = session_rng(14, 0);
    let session = SessionRealization {
        alpha: vec![Complex64::new(0.0, 0.0); 6],
        psi: vec![vec![false; 6]; slots],
        nu: vec![0; 6],
        m0: slots,
        neighbor_truth: vec![false; 6],
    };
    let obs = synthesize_slots(&sigs, &session, &cfg, &mut rng).unwrap();
    let mut sum_sq = 0.0;
    for y in &obs.slots {
        let u = dec.apply(y).unwrap();
        sum_sq += u[0].norm_sqr();
    }
    let var = sum_sq / slots as f64;
    let expect = 21.0 / 16.0;
    // MC relative error of a variance estimate ~ sqrt(2/n); allow 4 sigma
    let tol = 4.0 * (2.0 / slots as f64).sqrt() * expect;
    assert!((var - expect).abs() < tol, "var {var} vs {expect} +- {tol}");
}

#[test]
fn decorrelator_mean_recovers_active_gains() {
    // conditional on Psi and alpha, E[S^+ y_p] = Psi_p alpha
    let cfg = NetworkConfig::uniform(6, 10, 0.5, 1.0, 1.0, median_tau_a(1.0)).unwrap();
    let sigs = full_load_length7();
    let dec = decorrelator(&sigs);
    let mut rng = session_rng(15, 0);
    let alpha: Vec<Complex64> = (0..6)
        .map(|i| Complex64::new(1.0 - 0.2 * i as f64, 0.1 * i as f64))
        .collect();
    let row = vec![true, false, true, true, false, true];
    let trials = 200_000usize;
    let session = SessionRealization {
        alpha: alpha.clone(),
        psi: vec![row.clone(); trials],
        nu: vec![0; 6],
        m0: trials,
        neighbor_truth: vec![true; 6],
    };
    let obs = synthesize_slots(&sigs, &session, &cfg, &mut rng).unwrap();
    let mut mean = DVector::from_element(6, Complex64::new(0.0, 0.0));
    for y in &obs.slots {
        mean += dec.apply(y).unwrap();
    }
    mean /= Complex64::new(trials as f64, 0.0);
    // per-component MC std ~ sqrt(2 N0 g / trials) per dimension
    let sigma = (21.0 / 16.0 / trials as f64).sqrt();
    for j in 0..6 {
        let expect = if row[j] { alpha[j] } else { Complex64::new(0.0, 0.0) };
        assert!(
            (mean[j] - expect).norm() < 5.0 * sigma,
            "node {j}: {} vs {expect}",
            mean[j]
        );
    }
}

#[test]
fn two_node_mean_recovers_superposition() {
    // K = 2 both always on, alpha = (1, j): slot mean -> s_1 + j s_2
    let base = ndsim_core::signatures::gen_msequence(3, 0x3, 1).unwrap();
    let sigs = ndsim_core::signatures::build_signature_set(&base, 2).unwrap();
    let slots = 100_000usize;
    let cfg = NetworkConfig::new(slots, vec![0.0, 1.0, 1.0], vec![1.0, 1.0], 1.0, 0.5).unwrap();
    let mut rng = session_rng(16, 0);
    let alpha = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
    let session = SessionRealization {
        alpha: alpha.clone(),
        psi: vec![vec![true, true]; slots],
        nu: vec![slots as u32; 2],
        m0: slots,
        neighbor_truth: vec![true; 2],
    };
    let obs = synthesize_slots(&sigs, &session, &cfg, &mut rng).unwrap();
    let mean = &obs.sum / Complex64::new(slots as f64, 0.0);
    let sigma = (1.0 / slots as f64).sqrt(); // per complex component
    for l in 0..7 {
        let expect = sigs.matrix()[(l, 0)] * alpha[0] + sigs.matrix()[(l, 1)] * alpha[1];
        assert!(
            (mean[l] - expect).norm() < 5.0 * sigma,
            "component {l}: {} vs {expect}",
            mean[l]
        );
    }
}
