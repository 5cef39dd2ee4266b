//! Discovery-session synthesis: network parameters, random fading and
//! activity realizations, and the received chip-rate slot vectors.
//!
//! The simulation runs in discrete time at the chip-matched-filter output;
//! the continuous chip waveform is never instantiated. Node 0 is the
//! discovering node: slots in which it transmits are discarded and the
//! remaining M0 sensing slots are re-indexed consecutively.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::signatures::SignatureSet;

/// Static parameters of a discovery session.
///
/// Node indices run 0..=K with node 0 the discovering node. `epsilon[i]` is
/// the per-slot transmit probability of node i. `fading_power[i-1]` is the
/// mean received power 2 sigma_i^2 of target node i (node 0 never receives
/// itself). `noise_power` is the variance 2 N0 of each complex noise
/// component, i.e. N0 per real dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    k: usize,
    n: usize,
    epsilon: Vec<f64>,
    fading_power: Vec<f64>,
    noise_power: f64,
    tau_a: f64,
}

impl NetworkConfig {
    /// Fully general constructor. `epsilon` has K + 1 entries (node 0
    /// first), `fading_power` has K entries for nodes 1..=K.
    pub fn new(
        n: usize,
        epsilon: Vec<f64>,
        fading_power: Vec<f64>,
        noise_power: f64,
        tau_a: f64,
    ) -> Result<Self> {
        if epsilon.is_empty() || fading_power.len() + 1 != epsilon.len() {
            return Err(Error::invalid(
                "need epsilon for nodes 0..=K and fading power for nodes 1..=K",
            ));
        }
        if n == 0 {
            return Err(Error::invalid("session length N must be at least 1"));
        }
        if epsilon.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::invalid("activity factors must lie in [0, 1]"));
        }
        if fading_power.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::invalid("fading powers must be positive"));
        }
        if !(noise_power > 0.0) {
            return Err(Error::invalid("noise power must be positive"));
        }
        if !(tau_a >= 0.0) {
            return Err(Error::invalid("activity threshold must be nonnegative"));
        }
        Ok(Self {
            k: fading_power.len(),
            n,
            epsilon,
            fading_power,
            noise_power,
            tau_a,
        })
    }

    /// Power-controlled scenario: every node shares the activity factor and
    /// every target is received with the same mean power.
    pub fn uniform(
        k: usize,
        n: usize,
        epsilon: f64,
        fading_power: f64,
        noise_power: f64,
        tau_a: f64,
    ) -> Result<Self> {
        Self::new(
            n,
            vec![epsilon; k + 1],
            vec![fading_power; k],
            noise_power,
            tau_a,
        )
    }

    /// Number of target nodes K (excluding node 0).
    pub fn node_count(&self) -> usize {
        self.k
    }

    /// Slots per discovery session.
    pub fn session_slots(&self) -> usize {
        self.n
    }

    /// Activity factor of node `i`, 0 <= i <= K.
    pub fn epsilon(&self, i: usize) -> f64 {
        self.epsilon[i]
    }

    /// Mean received power 2 sigma_i^2 of target node `i`, 1 <= i <= K.
    pub fn fading_power(&self, i: usize) -> f64 {
        self.fading_power[i - 1]
    }

    /// Per-dimension Rayleigh parameter sigma_i^2 of target node `i`.
    pub fn sigma_sq(&self, i: usize) -> f64 {
        0.5 * self.fading_power(i)
    }

    /// Complex noise variance 2 N0 per component.
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// N0, the noise variance per real dimension.
    pub fn n0(&self) -> f64 {
        0.5 * self.noise_power
    }

    /// Activity threshold tau_A in amplitude units.
    pub fn tau_a(&self) -> f64 {
        self.tau_a
    }

    /// P(|alpha_i| > tau_A) under the Rayleigh fading of target node `i`.
    pub fn prob_neighbor(&self, i: usize) -> f64 {
        (-self.tau_a * self.tau_a / self.fading_power(i)).exp()
    }

    /// Replace the activity threshold.
    pub fn with_tau_a(mut self, tau_a: f64) -> Result<Self> {
        if !(tau_a >= 0.0) {
            return Err(Error::invalid("activity threshold must be nonnegative"));
        }
        self.tau_a = tau_a;
        Ok(self)
    }
}

/// Threshold at the median of a Rayleigh amplitude with mean power
/// `fading_power`, i.e. exceeded with probability one half.
pub fn median_tau_a(fading_power: f64) -> f64 {
    (fading_power * std::f64::consts::LN_2).sqrt()
}

/// One random draw of everything the channel decides for a session.
#[derive(Debug, Clone)]
pub struct SessionRealization {
    /// Complex channel gains alpha_1..alpha_K, constant over the session.
    pub alpha: Vec<Complex64>,
    /// Activity pattern: psi[p][k] is true when target node k + 1 transmits
    /// in sensing slot p. M0 rows.
    pub psi: Vec<Vec<bool>>,
    /// Per-node transmit counts within the sensing slots (column sums).
    pub nu: Vec<u32>,
    /// Number of sensing slots of node 0.
    pub m0: usize,
    /// Ground truth: |alpha_k| strictly above the activity threshold.
    pub neighbor_truth: Vec<bool>,
}

/// Received chip-rate vectors of one session.
#[derive(Debug, Clone)]
pub struct SlotObservations {
    /// One complex L-vector per sensing slot.
    pub slots: Vec<DVector<Complex64>>,
    /// Cumulative sum of the slot vectors.
    pub sum: DVector<Complex64>,
}

/// Deterministic per-trial generator: `trial` selects a dedicated ChaCha
/// stream under the master seed, so trial t sees the same randomness no
/// matter how trials are scheduled across threads.
pub fn session_rng(seed: u64, trial: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draw the channel gains: alpha_k circularly symmetric complex Gaussian
/// with E|alpha_k|^2 equal to the configured fading power.
pub fn draw_fading<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Vec<Complex64> {
    (1..=cfg.node_count())
        .map(|i| {
            let sigma = cfg.sigma_sq(i).sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re * sigma, im * sigma)
        })
        .collect()
}

/// Draw node 0's sensing pattern and the targets' activity within it.
///
/// Node 0 transmits in each of the N slots with probability epsilon_0; the
/// remaining M0 slots become the sensing phase, re-indexed consecutively,
/// and each target transmits i.i.d. per sensing slot. Returns (psi, nu, m0).
pub fn draw_activity<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    rng: &mut R,
) -> (Vec<Vec<bool>>, Vec<u32>, usize) {
    let eps0 = cfg.epsilon(0);
    let mut m0 = 0usize;
    for _ in 0..cfg.session_slots() {
        if !rng.random_bool(eps0) {
            m0 += 1;
        }
    }
    let k = cfg.node_count();
    let mut psi = Vec::with_capacity(m0);
    let mut nu = vec![0u32; k];
    for _ in 0..m0 {
        let mut row = Vec::with_capacity(k);
        for (j, count) in nu.iter_mut().enumerate() {
            let on = rng.random_bool(cfg.epsilon(j + 1));
            if on {
                *count += 1;
            }
            row.push(on);
        }
        psi.push(row);
    }
    (psi, nu, m0)
}

/// Draw a full session realization: fading first, then activity.
pub fn draw_session<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> SessionRealization {
    let alpha = draw_fading(cfg, rng);
    let (psi, nu, m0) = draw_activity(cfg, rng);
    let neighbor_truth = alpha.iter().map(|a| a.norm() > cfg.tau_a()).collect();
    SessionRealization { alpha, psi, nu, m0, neighbor_truth }
}

/// Synthesize the received slot vectors y_p = S Psi_p alpha + z_p, with
/// i.i.d. complex Gaussian noise of per-component variance 2 N0, independent
/// across slots, plus their cumulative sum.
pub fn synthesize_slots<R: Rng + ?Sized>(
    sigs: &SignatureSet,
    session: &SessionRealization,
    cfg: &NetworkConfig,
    rng: &mut R,
) -> Result<SlotObservations> {
    let k = sigs.node_count();
    if session.alpha.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "session has {} gains, signature set has {k} nodes",
            session.alpha.len()
        )));
    }
    if cfg.node_count() != k {
        return Err(Error::DimensionMismatch(format!(
            "config has {} target nodes, signature set has {k}",
            cfg.node_count()
        )));
    }
    let l = sigs.chip_length();
    let noise_sigma = cfg.n0().sqrt();
    let s = sigs.matrix();
    let mut slots = Vec::with_capacity(session.m0);
    let mut sum = DVector::from_element(l, Complex64::new(0.0, 0.0));
    for row in &session.psi {
        let mut y = DVector::from_fn(l, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re * noise_sigma, im * noise_sigma)
        });
        for (j, &active) in row.iter().enumerate() {
            if active {
                let a = session.alpha[j];
                for li in 0..l {
                    y[li] += a * s[(li, j)];
                }
            }
        }
        sum += &y;
        slots.push(y);
    }
    Ok(SlotObservations { slots, sum })
}
