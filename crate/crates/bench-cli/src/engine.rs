//! Monte Carlo driver: generates discovery sessions trial by trial and
//! records the node-1 decision statistics of every detector family at once.
//!
//! Each trial owns the ChaCha substream keyed by (seed, trial index), so a
//! campaign produces identical numbers no matter how the trials are spread
//! over threads; results are collected in trial order.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use ndsim_core::channel::{draw_fading, session_rng, NetworkConfig};
use ndsim_core::signatures::{mmoe_correlator, Decorrelator, SignatureSet};

/// Node-1 statistics of one session.
#[derive(Debug, Clone, Copy)]
pub struct TrialStats {
    pub m0: u32,
    pub nu1: u32,
    /// |alpha_1| strictly above the activity threshold.
    pub truth: bool,
    /// Coherent detector: |(S^+ y_sum)_1|^2.
    pub stat_cd: f64,
    /// Incoherent detector: sum over slots of |(S^+ y_p)_1|^2.
    pub stat_id: f64,
    /// Matched filter: |s_1^T y_sum|^2.
    pub stat_mf: f64,
    /// MMOE linear test: |c_1^T y_sum|^2 with the session's M0.
    pub stat_mmoe: f64,
}

/// A finished campaign. `stats` holds the sessions that had at least one
/// sensing slot; the rest are only counted.
#[derive(Debug, Clone)]
pub struct SimBatch {
    pub stats: Vec<TrialStats>,
    pub empty_sessions: usize,
    pub trials: usize,
}

/// Optional conditioning: pin the sensing-window size and node 1's transmit
/// count instead of drawing them.
pub type Pin = Option<(usize, usize)>;

pub fn simulate(
    cfg: &NetworkConfig,
    sigs: &SignatureSet,
    seed: u64,
    trials: usize,
    pin: Pin,
) -> SimBatch {
    let dec = Decorrelator::new(sigs);
    let row1: Vec<f64> = (0..sigs.chip_length())
        .map(|l| dec.pinv()[(0, l)])
        .collect();
    let s1: Vec<f64> = (0..sigs.chip_length())
        .map(|l| sigs.matrix()[(l, 0)])
        .collect();
    // MMOE correlators for every sensing-window size that can occur
    let n = cfg.session_slots();
    let mmoe: Vec<Option<DVector<f64>>> = (0..=n)
        .map(|m0| {
            if m0 == 0 {
                None
            } else {
                mmoe_correlator(sigs, cfg, m0, 0).ok()
            }
        })
        .collect();

    let results: Vec<Option<TrialStats>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| run_trial(cfg, sigs, &row1, &s1, &mmoe, seed, trial, pin))
        .collect();
    let mut stats = Vec::with_capacity(trials);
    let mut empty = 0usize;
    for r in results {
        match r {
            Some(t) => stats.push(t),
            None => empty += 1,
        }
    }
    SimBatch {
        stats,
        empty_sessions: empty,
        trials,
    }
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    cfg: &NetworkConfig,
    sigs: &SignatureSet,
    row1: &[f64],
    s1: &[f64],
    mmoe: &[Option<DVector<f64>>],
    seed: u64,
    trial: u64,
    pin: Pin,
) -> Option<TrialStats> {
    let mut rng = session_rng(seed, trial);
    let k = cfg.node_count();
    let l = sigs.chip_length();
    let alpha = draw_fading(cfg, &mut rng);

    // activity: either the free draw (node 0 first, then the targets row by
    // row, matching the core sampler call for call) or the pinned pattern
    let (m0, rows, nu1) = match pin {
        None => {
            let mut m0 = 0usize;
            for _ in 0..cfg.session_slots() {
                if !rng.random_bool(cfg.epsilon(0)) {
                    m0 += 1;
                }
            }
            let mut rows: Vec<u8> = Vec::with_capacity(m0);
            let mut nu1 = 0u32;
            for _ in 0..m0 {
                let mut row = 0u8;
                for j in 0..k {
                    if rng.random_bool(cfg.epsilon(j + 1)) {
                        row |= 1 << j;
                    }
                }
                nu1 += u32::from(row & 1);
                rows.push(row);
            }
            (m0, rows, nu1)
        }
        Some((m0, nu1)) => {
            let mut rows = Vec::with_capacity(m0);
            for p in 0..m0 {
                let mut row = if p < nu1 { 1u8 } else { 0u8 };
                for j in 1..k {
                    if rng.random_bool(cfg.epsilon(j + 1)) {
                        row |= 1 << j;
                    }
                }
                rows.push(row);
            }
            (m0, rows, nu1 as u32)
        }
    };
    if m0 == 0 {
        return None;
    }

    let noise_sigma = cfg.n0().sqrt();
    let s = sigs.matrix();
    let mut y = vec![Complex64::new(0.0, 0.0); l];
    let mut y_sum = vec![Complex64::new(0.0, 0.0); l];
    let mut stat_id = 0.0;
    for &row in &rows {
        for slot in y.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *slot = Complex64::new(re * noise_sigma, im * noise_sigma);
        }
        for j in 0..k {
            if row >> j & 1 == 1 {
                let a = alpha[j];
                for (li, slot) in y.iter_mut().enumerate() {
                    *slot += a * s[(li, j)];
                }
            }
        }
        let mut u1 = Complex64::new(0.0, 0.0);
        for (li, slot) in y.iter().enumerate() {
            u1 += slot * row1[li];
            y_sum[li] += slot;
        }
        stat_id += u1.norm_sqr();
    }

    let dot = |c: &[f64]| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (li, ys) in y_sum.iter().enumerate() {
            acc += ys * c[li];
        }
        acc.norm_sqr()
    };
    let stat_cd = dot(row1);
    let stat_mf = dot(s1);
    let stat_mmoe = mmoe[m0].as_ref().map_or(0.0, |c| dot(c.as_slice()));

    Some(TrialStats {
        m0: m0 as u32,
        nu1,
        truth: alpha[0].norm() > cfg.tau_a(),
        stat_cd,
        stat_id,
        stat_mf,
        stat_mmoe,
    })
}

/// Empirical (P_F, P_M, P(e)) of one statistic stream at one threshold.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalPoint {
    pub p_f: f64,
    pub p_m: f64,
    pub p_e: f64,
    /// Wrong decisions behind `p_e`.
    pub error_events: usize,
    pub sessions: usize,
}

pub fn count_errors(batch: &SimBatch, stat: impl Fn(&TrialStats) -> f64, tau_sq: f64) -> EmpiricalPoint {
    let mut fa = 0usize;
    let mut miss = 0usize;
    let mut above = 0usize;
    for t in &batch.stats {
        let decide = stat(t) > tau_sq;
        if t.truth {
            above += 1;
            if !decide {
                miss += 1;
            }
        } else if decide {
            fa += 1;
        }
    }
    let below = batch.stats.len() - above;
    EmpiricalPoint {
        p_f: fa as f64 / below.max(1) as f64,
        p_m: miss as f64 / above.max(1) as f64,
        p_e: (fa + miss) as f64 / batch.stats.len().max(1) as f64,
        error_events: fa + miss,
        sessions: batch.stats.len(),
    }
}
