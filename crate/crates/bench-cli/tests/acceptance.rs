//! Acceptance suite: each test exercises one exit criterion end to end at
//! its stated tolerance and prints one PASS/FAIL line (visible with
//! --nocapture, or in the failure output).
//!
//! Shared scenario unless a criterion says otherwise: fully loaded network
//! (six targets plus the discovering node on length-7 signatures), uniform
//! activity 0.5, unit mean fading power and unit noise power (SNR_1 = 0 dB),
//! activity threshold at the fading-amplitude median.

use ndsim_bench::config::{FileConfig, Overrides, PerNode, Resolved};
use ndsim_bench::engine::{count_errors, simulate};
use ndsim_bench::experiments::{run_compare, run_convergence, run_oracle_check, run_threshold_sweep};
use ndsim_core::analysis::special::{marcum_q, reg_gamma_pair};
use ndsim_core::analysis::{cond_perf_id, cond_perf_lndt, CorrelatorSinr, SinrContext};
use ndsim_core::channel::{
    draw_fading, median_tau_a, session_rng, synthesize_slots, NetworkConfig, SessionRealization,
};
use ndsim_core::detectors::{decorrelate_all, estimate_ci, estimate_ii};
use ndsim_core::signatures::{decorrelator, full_load_length7, zf_correlator};
use rand::Rng;

const SEED: u64 = 0xacce_97ed;

fn default_cfg(n: usize) -> NetworkConfig {
    NetworkConfig::uniform(6, n, 0.5, 1.0, 1.0, median_tau_a(1.0)).unwrap()
}

fn resolved_for(mutate: impl FnOnce(&mut FileConfig)) -> Resolved {
    let mut file = FileConfig::default();
    mutate(&mut file);
    Resolved::from_parts(file, &Overrides::default()).unwrap()
}

fn binom_sigma(p: f64, n: usize) -> f64 {
    (p.clamp(1e-12, 1.0) * (1.0 - p.clamp(0.0, 1.0 - 1e-12)) / n as f64).sqrt()
}

/// Criterion 1: the conditional false-alarm and miss series match pinned
/// Monte Carlo frequencies within 3 binomial sigma at 1e5 trials.
#[test]
fn criterion_1_conditional_formulas_match_simulation() {
    let cfg = default_cfg(100);
    let sigs = full_load_length7();
    let (m0, nu1) = (50usize, 25usize);
    let trials = 100_000usize;
    let batch = simulate(&cfg, &sigs, SEED, trials, Some((m0, nu1)));
    let n_above = batch.stats.iter().filter(|t| t.truth).count();
    let n_below = batch.stats.len() - n_above;

    let id_ctx = SinrContext::decorrelator(&cfg, &sigs, nu1 as f64, m0 as f64);
    let zf = zf_correlator(&sigs, 0).unwrap();
    let nu: Vec<f64> = (0..6)
        .map(|j| if j == 0 { nu1 as f64 } else { m0 as f64 * 0.5 })
        .collect();
    let zf_ctx = CorrelatorSinr::from_correlator(&zf, &cfg, &sigs, &nu, m0 as f64).unwrap();

    let sigma2_n1 = cfg.n0() * sigs.noise_enhancement(0);
    let sigma_c = zf_ctx.sigma_sq;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    // three operating points per detector spanning the mid-range
    for factor in [0.8, 1.0, 1.25] {
        let tau_id = 2.0 * sigma2_n1 * m0 as f64 * factor * 1.35;
        let pred = cond_perf_id(&id_ctx, tau_id, cfg.tau_a(), cfg.sigma_sq(1)).unwrap();
        let sim = count_errors(&batch, |t| t.stat_id, tau_id);
        for (label, p, e, n) in [
            ("ID P_F", pred.p_f, sim.p_f, n_below),
            ("ID P_M", pred.p_m, sim.p_m, n_above),
        ] {
            assert!(
                (0.002..0.998).contains(&p),
                "{label} operating point degenerate: {p}"
            );
            let z = (p - e).abs() / binom_sigma(p, n);
            worst = worst.max(z);
            checked += 1;
            assert!(z < 3.0, "criterion 1 FAIL: {label} formula {p} vs sim {e}, z = {z:.2}");
        }

        let tau_zf = 2.0 * sigma_c * (1.0 + zf_ctx.nu1 * zf_ctx.nu1 * zf_ctx.rho_eq * 0.5) * factor;
        let pred = cond_perf_lndt(&zf_ctx, tau_zf, cfg.tau_a(), cfg.sigma_sq(1)).unwrap();
        let sim_zf = count_errors(&batch, |t| t.stat_cd, tau_zf * (21f64 / 16.0).powi(2));
        for (label, p, e, n) in [
            ("ZF-CD P_F", pred.p_f, sim_zf.p_f, n_below),
            ("ZF-CD P_M", pred.p_m, sim_zf.p_m, n_above),
        ] {
            assert!(
                (0.002..0.998).contains(&p),
                "{label} operating point degenerate: {p}"
            );
            let z = (p - e).abs() / binom_sigma(p, n);
            worst = worst.max(z);
            checked += 1;
            assert!(z < 3.0, "criterion 1 FAIL: {label} formula {p} vs sim {e}, z = {z:.2}");
        }
    }
    println!(
        "criterion 1 (conditional formulas vs pinned simulation): PASS \
         ({checked} checks at (nu1, M0) = ({nu1}, {m0}), worst z = {worst:.2})"
    );
}

// --- independent special-function oracles (no code shared with the crate) --

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

fn reg_gamma_upper_quadrature(k: f64, x: f64) -> f64 {
    const PANELS: usize = 200_000;
    if k < 1.5 {
        let f = move |u: f64| {
            if u <= 0.0 && 2.0 * k - 1.0 < 1.0 {
                return if 2.0 * k - 1.0 == 0.0 { 2.0 } else { 0.0 };
            }
            2.0 * u.powf(2.0 * k - 1.0) * (-u * u).exp()
        };
        let hi = (x.sqrt() + 10.0).max(12.0);
        let total = simpson(&f, 0.0, hi, PANELS);
        if x <= 0.0 {
            return 1.0;
        }
        return simpson(&f, x.sqrt(), hi, PANELS) / total;
    }
    let t_star = k - 1.0;
    let ln_scale = (k - 1.0) * t_star.ln() - t_star;
    let f = move |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        ((k - 1.0) * t.ln() - t - ln_scale).exp()
    };
    let hi = (t_star + 45.0 * (t_star.sqrt() + 1.0)).max(x + 90.0);
    let total = simpson(&f, 0.0, hi, PANELS);
    if x <= 0.0 {
        return 1.0;
    }
    let upper = if x >= hi { 0.0 } else { simpson(&f, x, hi, PANELS) };
    upper / total
}

fn noncentral_chi_sq_cdf(m: usize, lambda: f64, x: f64) -> f64 {
    let half_l = 0.5 * lambda;
    let half_x = 0.5 * x;
    let central = |n: usize, y: f64| -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for i in 1..n {
            term *= y / i as f64;
            sum += term;
        }
        1.0 - (-y).exp() * sum
    };
    let mut w = (-half_l).exp();
    let mut cdf = 0.0;
    for j in 0..3000 {
        if w > 0.0 {
            cdf += w * central(m + j, half_x);
        }
        w *= half_l / (j + 1) as f64;
        if j as f64 > half_l && w < 1e-18 {
            break;
        }
    }
    cdf.clamp(0.0, 1.0)
}

/// Criterion 2: Marcum Q and the regularized gammas agree with independent
/// quadrature / CDF oracles to 1e-9 over the documented grids.
#[test]
fn criterion_2_special_function_oracles() {
    let mut worst_gamma: f64 = 0.0;
    for &k in &[0.5, 1.0, 2.5, 5.0, 10.0, 50.5, 200.0] {
        for &frac in &[0.0, 0.25, 0.6, 1.0, 1.5, 3.0] {
            let x = k * frac;
            let q = reg_gamma_pair(k, x).unwrap().1;
            let oracle = reg_gamma_upper_quadrature(k, x);
            worst_gamma = worst_gamma.max((q - oracle).abs());
        }
    }
    assert!(
        worst_gamma < 1e-9,
        "criterion 2 FAIL: gamma sup-norm {worst_gamma:e}"
    );

    let mut worst_marcum: f64 = 0.0;
    for &m in &[1usize, 2, 5, 10] {
        for ia in 0..=10 {
            for ib in 0..=10 {
                let (a, b) = (ia as f64, ib as f64);
                let q = marcum_q(m as f64, a, b).unwrap();
                let oracle = 1.0 - noncentral_chi_sq_cdf(m, a * a, b * b);
                worst_marcum = worst_marcum.max((q - oracle).abs());
            }
        }
    }
    assert!(
        worst_marcum < 1e-9,
        "criterion 2 FAIL: Marcum sup-norm {worst_marcum:e}"
    );
    println!(
        "criterion 2 (special functions vs independent oracles): PASS \
         (gamma sup {worst_gamma:.2e}, Marcum sup {worst_marcum:.2e})"
    );
}

/// Criterion 3: exact zero-forcing orthogonality and the 21/16 noise
/// enhancement of the fully loaded length-7 set.
#[test]
fn criterion_3_zero_forcing_orthogonality() {
    let sigs = full_load_length7();
    let mut worst_leak: f64 = 0.0;
    let mut worst_diag: f64 = 0.0;
    for i in 0..6 {
        let c = zf_correlator(&sigs, i).unwrap();
        for k in 0..6 {
            if k != i {
                worst_leak = worst_leak.max(c.dot(&sigs.signature(k)).abs());
            }
        }
        worst_diag = worst_diag.max((sigs.noise_enhancement(i) - 21.0 / 16.0).abs());
    }
    assert!(worst_leak < 1e-10, "criterion 3 FAIL: leak {worst_leak:e}");
    assert!(worst_diag < 1e-12, "criterion 3 FAIL: diag {worst_diag:e}");
    println!(
        "criterion 3 (ZF orthogonality + 21/16 enhancement): PASS \
         (max leak {worst_leak:.2e}, diag error {worst_diag:.2e})"
    );
}

/// Criterion 4: Monte Carlo means of the coherent/incoherent estimators
/// match the closed-form biases within 3 sigma at 1e4 sessions for
/// eps_1 in {0.2, 0.5, 0.8}.
#[test]
fn criterion_4_estimator_bias_formulas() {
    let sigs = full_load_length7();
    let dec = decorrelator(&sigs);
    let m0 = 50usize;
    let g = 21.0 / 16.0;
    let mut report = String::new();
    for (i, &eps) in [0.2, 0.5, 0.8].iter().enumerate() {
        let cfg = NetworkConfig::uniform(6, 100, eps, 1.0, 1.0, median_tau_a(1.0)).unwrap();
        let mut rng = session_rng(SEED ^ (i as u64 + 1), 0);
        let sessions = 10_000usize;
        let mut ci = Vec::with_capacity(sessions);
        let mut ii = Vec::with_capacity(sessions);
        for _ in 0..sessions {
            let mut alpha = draw_fading(&cfg, &mut rng);
            alpha[0] = num_complex::Complex64::new(1.0, 0.0);
            let mut psi = vec![vec![false; 6]; m0];
            let mut nu = vec![0u32; 6];
            for row in psi.iter_mut() {
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = rng.random_bool(cfg.epsilon(j + 1));
                    nu[j] += u32::from(*slot);
                }
            }
            let session = SessionRealization {
                alpha,
                psi,
                nu,
                m0,
                neighbor_truth: vec![true; 6],
            };
            let obs = synthesize_slots(&sigs, &session, &cfg, &mut rng).unwrap();
            let u = decorrelate_all(&dec, &obs).unwrap();
            ci.push(estimate_ci(&u).unwrap()[0].value);
            ii.push(estimate_ii(&u).unwrap()[0].value);
        }
        let stats = |xs: &[f64]| {
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var =
                xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
            (mean, (var / xs.len() as f64).sqrt())
        };
        let (ci_mean, ci_se) = stats(&ci);
        let (ii_mean, ii_se) = stats(&ii);
        let ci_expect = eps * (eps + (1.0 - eps) / m0 as f64) + g / m0 as f64;
        let ii_expect = eps + g;
        let z_ci = (ci_mean - ci_expect).abs() / ci_se;
        let z_ii = (ii_mean - ii_expect).abs() / ii_se;
        assert!(
            z_ci < 3.0,
            "criterion 4 FAIL: CI bias at eps = {eps}: mean {ci_mean} vs {ci_expect}, z = {z_ci:.2}"
        );
        assert!(
            z_ii < 3.0,
            "criterion 4 FAIL: II bias at eps = {eps}: mean {ii_mean} vs {ii_expect}, z = {z_ii:.2}"
        );
        report.push_str(&format!(" eps={eps}: z_CI={z_ci:.2} z_II={z_ii:.2}"));
    }
    println!("criterion 4 (estimator bias formulas): PASS{report}");
}

/// Criterion 5: the asymptotic approximation approaches the simulation as N
/// grows (max gap strictly decreasing over {100, 300, 500}) and, as stated,
/// its gap at the P(e) minimum at N = 500 falls within 3 simulation sigma.
#[test]
fn criterion_5_asymptotic_convergence() {
    let res = resolved_for(|f| {
        f.run.trials = 100_000;
        f.run.seed = SEED;
        f.run.detectors = vec!["zf-cd".into(), "id".into()];
        f.run.slots = Some(vec![100, 300, 500]);
        f.run.tau_points = 15;
    });
    let table = run_convergence(&res).unwrap();
    let gaps = table.manifest.summary["gaps"].as_array().unwrap().clone();
    let mut pass = true;
    let mut detail = String::new();
    for det in ["zf-cd", "id"] {
        let series: Vec<&serde_json::Value> = gaps
            .iter()
            .filter(|g| g["detector"] == det)
            .collect();
        let max_gaps: Vec<f64> = series.iter().map(|g| g["max_gap"].as_f64().unwrap()).collect();
        let decreasing = max_gaps.windows(2).all(|w| w[1] < w[0]);
        let last = series.last().unwrap();
        let gap_at_min = last["gap_at_min"].as_f64().unwrap();
        let sigma = last["sim_sigma_at_min"].as_f64().unwrap();
        let tight = gap_at_min < 3.0 * sigma;
        // the semi-analytic average must track the simulation at N = 500
        let semi_gap = last["semi_gap_at_min"].as_f64().unwrap();
        let semi_ok = semi_gap < 3.0 * sigma;
        detail.push_str(&format!(
            " {det}: max_gaps {max_gaps:.4?} decreasing={decreasing}, \
             N=500 semi gap@min {semi_gap:.4} ({}), \
             asym gap@min {gap_at_min:.4} vs 3sigma {:.4} -> {}",
            if semi_ok { "ok" } else { "exceeds" },
            3.0 * sigma,
            if tight { "ok" } else { "exceeds" }
        ));
        pass &= decreasing && tight && semi_ok;
    }
    println!(
        "criterion 5 (asymptotic convergence): {}{detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion 5 FAIL:{detail}");
}

/// Criterion 6: every P(e)-versus-threshold curve has one interior minimum;
/// the asymptotic threshold rules land within 10% of the numeric optimum at
/// N = 500; the coherent detector's optimum is flat in SNR (< 5% spread)
/// while the incoherent detector's tracks SNR strongly and monotonically.
#[test]
fn criterion_6_threshold_optimality() {
    let res = resolved_for(|f| {
        f.network.n = 500;
        f.run.seed = SEED;
        f.run.detectors = vec!["zf-cd".into(), "id".into()];
        f.run.snr_db = Some(vec![0.0, 5.0, 10.0]);
        f.run.tau_points = 15;
    });
    let table = run_threshold_sweep(&res).unwrap();
    let optima = table.manifest.summary["optima"].as_array().unwrap().clone();
    let mut cd_stars = Vec::new();
    let mut id_stars = Vec::new();
    for o in &optima {
        let boundary = o["boundary"].as_bool().unwrap();
        let minima = o["interior_minima"].as_u64().unwrap();
        let rel_gap = o["rel_gap"].as_f64().unwrap();
        assert!(
            !boundary && minima == 1,
            "criterion 6 FAIL: {o} must have a unique interior minimum"
        );
        assert!(
            rel_gap < 0.10,
            "criterion 6 FAIL: asymptotic threshold off by {rel_gap:.3} at {o}"
        );
        let star = o["tau_star_sq"].as_f64().unwrap();
        if o["detector"] == "zf-cd" {
            cd_stars.push(star);
        } else {
            id_stars.push(star);
        }
    }
    let cd_spread = (cd_stars.iter().cloned().fold(f64::MIN, f64::max)
        - cd_stars.iter().cloned().fold(f64::MAX, f64::min))
        / cd_stars.iter().cloned().fold(f64::MIN, f64::max);
    assert!(
        cd_spread < 0.05,
        "criterion 6 FAIL: CD optimum varies {cd_spread:.3} over SNR"
    );
    // SNR sweeps hold the fading power fixed and shrink the noise, so the
    // ID optimum tracks its shrinking noise term: strongly tied to SNR,
    // strictly monotone downward
    let id_monotone = id_stars.windows(2).all(|w| w[1] < w[0]);
    let id_swing = (id_stars[0] - id_stars[id_stars.len() - 1]) / id_stars[0];
    assert!(
        id_monotone && id_swing > 0.5,
        "criterion 6 FAIL: ID optimum not strongly tied to SNR: {id_stars:?}"
    );
    println!(
        "criterion 6 (threshold optimality): PASS (CD spread {:.2}%, ID swing {:.0}% monotone, \
         asym rule within 10% everywhere)",
        cd_spread * 100.0,
        id_swing * 100.0
    );
}

/// Criterion 7: with per-point optimized thresholds the coherent detector
/// wins at -5 and 0 dB and the incoherent detector wins at 15 dB, each
/// outside 3 sigma.
#[test]
fn criterion_7_cd_id_crossover() {
    let res = resolved_for(|f| {
        f.network.n = 500;
        f.run.seed = SEED;
        f.run.trials = 60_000;
        f.run.detectors = vec!["zf-cd".into(), "id".into()];
        f.run.snr_db = Some(vec![-5.0, 0.0, 15.0]);
    });
    let table = run_compare(&res).unwrap();
    let mut detail = String::new();
    for &(snr, cd_should_win) in &[(-5.0, true), (0.0, true), (15.0, false)] {
        let find = |det: &str| {
            table
                .rows
                .iter()
                .find(|r| {
                    r.detector == det && r.provenance == "simulated" && r.grid_value == snr
                })
                .unwrap()
        };
        let cd = find("zf-cd");
        let id = find("id");
        let sigma = (cd.stderr.unwrap().powi(2) + id.stderr.unwrap().powi(2)).sqrt();
        let diff = id.p_e - cd.p_e;
        let ok = if cd_should_win {
            diff > 3.0 * sigma
        } else {
            -diff > 3.0 * sigma
        };
        detail.push_str(&format!(
            " {snr} dB: CD {:.4} vs ID {:.4} ({:+.1} sigma)",
            cd.p_e,
            id.p_e,
            diff / sigma
        ));
        assert!(
            ok,
            "criterion 7 FAIL: wrong ordering at {snr} dB (CD {}, ID {}, sigma {sigma})",
            cd.p_e, id.p_e
        );
    }
    println!("criterion 7 (CD/ID crossover): PASS{detail}");
}

/// Criterion 8: the matched filter's ROC has an interference floor (its
/// miss rate at P_F = 0.1 sits above zero forcing's by more than 3 sigma)
/// while the ZF and MMOE curves nearly coincide.
#[test]
fn criterion_8_matched_filter_floor() {
    let cfg = default_cfg(100);
    let sigs = full_load_length7();
    let trials = 100_000usize;
    let batch = simulate(&cfg, &sigs, SEED ^ 8, trials, None);
    let n_above = batch.stats.iter().filter(|t| t.truth).count();

    // miss rate at P_F = 0.1, interpolated along each simulated ROC
    let pm_at_pf = |stat: fn(&ndsim_bench::engine::TrialStats) -> f64, center: f64| -> f64 {
        let grid: Vec<f64> = (0..60)
            .map(|i| center * (0.02f64.ln() + i as f64 / 59.0 * (50f64.ln() - 0.02f64.ln())).exp())
            .collect();
        let mut prev: Option<(f64, f64)> = None;
        for &tau in &grid {
            let e = count_errors(&batch, stat, tau);
            if let Some((pf_hi, pm_lo)) = prev {
                if e.p_f <= 0.1 && pf_hi > 0.1 {
                    let t = (pf_hi - 0.1) / (pf_hi - e.p_f);
                    return pm_lo + t * (e.p_m - pm_lo);
                }
            }
            prev = Some((e.p_f, e.p_m));
        }
        panic!("P_F = 0.1 not bracketed");
    };
    let thr = ndsim_core::analysis::asymptotic_thresholds(&cfg, &sigs);
    let g = sigs.noise_enhancement(0);
    let m0_typ = (cfg.session_slots() as f64 * 0.5).round() as usize;
    let c_m = ndsim_core::signatures::mmoe_correlator(&sigs, &cfg, m0_typ, 0).unwrap();
    let mmoe_center = thr.cd / (g * g) * (c_m.dot(&sigs.signature(0)) * g).powi(2);

    let pm_mf = pm_at_pf(|t| t.stat_mf, thr.cd / (g * g));
    let pm_zf = pm_at_pf(|t| t.stat_cd, thr.cd);
    let pm_mmoe = pm_at_pf(|t| t.stat_mmoe, mmoe_center);
    let sigma = (binom_sigma(pm_mf, n_above).powi(2) + binom_sigma(pm_zf, n_above).powi(2)).sqrt();
    assert!(
        pm_mf - pm_zf > 3.0 * sigma,
        "criterion 8 FAIL: MF floor not separated (MF {pm_mf}, ZF {pm_zf}, sigma {sigma})"
    );
    let coincide = (pm_zf - pm_mmoe).abs();
    assert!(
        coincide < 0.03 + 3.0 * sigma,
        "criterion 8 FAIL: ZF {pm_zf} and MMOE {pm_mmoe} do not coincide"
    );
    println!(
        "criterion 8 (MF interference floor): PASS (P_M at P_F=0.1: MF {pm_mf:.4}, \
         ZF {pm_zf:.4}, MMOE {pm_mmoe:.4})"
    );
}

/// Criterion 9: the Bayesian oracle beats (within 3 sigma) every suboptimum
/// detector on neighbor-set error at 1e4 tiny sessions, and the joint-ML
/// enumeration never loses to the true activity pattern.
#[test]
fn criterion_9_oracle_sanity() {
    let res = resolved_for(|f| {
        f.network.k = 2;
        f.network.n = 2;
        f.network.epsilon = PerNode::Each(vec![0.0, 0.5, 0.5]);
        f.run.seed = SEED ^ 9;
        f.run.trials = 10_000;
        f.run.tau_points = 15;
    });
    let table = run_oracle_check(&res).unwrap();
    let summary = &table.manifest.summary;
    let sessions = summary["sessions"].as_u64().unwrap() as usize;
    let ml_violations = summary["ml_residual_violations"].as_u64().unwrap();
    assert_eq!(
        ml_violations, 0,
        "criterion 9 FAIL: joint ML lost to the true pattern {ml_violations} times"
    );
    let map_pe = summary["map_set_error"].as_f64().unwrap();
    let map_sigma = binom_sigma(map_pe, sessions);
    let mut detail = format!(" MAP {map_pe:.4}");
    for det in summary["detectors"].as_array().unwrap() {
        let pe = det["set_error"].as_f64().unwrap();
        let sigma = (map_sigma.powi(2) + binom_sigma(pe, sessions).powi(2)).sqrt();
        detail.push_str(&format!(", {} {pe:.4}", det["detector"].as_str().unwrap()));
        assert!(
            map_pe <= pe + 3.0 * sigma,
            "criterion 9 FAIL: MAP {map_pe} worse than {} ({pe}) beyond 3 sigma",
            det["detector"]
        );
    }
    println!("criterion 9 (oracle sanity at 1e4 sessions): PASS{detail}");
}
