//! Exhaustive reference detectors for tiny problem sizes: the joint
//! maximum-likelihood estimator over all activity patterns, and the Bayesian
//! hypothesis test on the neighbor set with the activity sequence and fading
//! amplitudes marginalized out.
//!
//! Both scale exponentially with the pattern space and are gated by hard
//! preconditions; they exist to sanity-check the practical detectors, not to
//! run at scale.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::analysis::special::ln_bessel_i0;
use crate::channel::{NetworkConfig, SlotObservations};
use crate::error::{Error, Result};
use crate::signatures::SignatureSet;

/// Enumeration bound for the joint-ML search: at most 2^16 linear systems.
pub const ML_ENUMERATION_BITS: usize = 16;

/// MAP oracle bounds.
pub const MAP_MAX_NODES: usize = 2;
pub const MAP_MAX_SLOTS: usize = 4;

/// Quadrature resolution of the amplitude marginalization: 64 radial nodes
/// per amplitude dimension (32 on each side of the activity threshold).
pub const MAP_RADIAL_NODES_PER_BRANCH: usize = 32;
/// Phase nodes of the outer trapezoid rule; the inner phase integral is
/// resolved exactly through the Bessel function I0.
pub const MAP_PHASE_NODES: usize = 32;

const LN_2PI: f64 = 1.8378770664093453;

/// Fast ln I0 for the two-node quadrature kernel (classic rational fits,
/// relative error below 2e-7, which sits well under the phase-grid error).
/// The single-node path keeps the full-precision series.
fn fast_ln_i0(x: f64) -> f64 {
    if x < 3.75 {
        let t = x / 3.75;
        let t2 = t * t;
        let p = 1.0
            + t2 * (3.5156229
                + t2 * (3.0899424
                    + t2 * (1.2067492 + t2 * (0.2659732 + t2 * (0.0360768 + t2 * 0.0045813)))));
        p.ln()
    } else {
        let t = 3.75 / x;
        let p = 0.39894228
            + t * (0.01328592
                + t * (0.00225319
                    + t * (-0.00157565
                        + t * (0.00916281
                            + t * (-0.02057706
                                + t * (0.02635537 + t * (-0.01647633 + t * 0.00392377)))))));
        x - 0.5 * x.ln() + p.ln()
    }
}

/// Joint ML estimate over activity patterns and channel gains.
#[derive(Debug, Clone)]
pub struct MlJointEstimate {
    /// Gain estimate; inactive nodes of the best pattern get exactly zero.
    pub alpha: Vec<Complex64>,
    /// Squared reconstruction error of the best pattern.
    pub residual: f64,
    /// The minimizing activity pattern, rows indexed by sensing slot.
    pub best_pattern: Vec<Vec<bool>>,
}

/// Bayesian decision on the neighbor set.
#[derive(Debug, Clone)]
pub struct MapDecision {
    /// Index of the winning hypothesis; bit k set means node k + 1 is
    /// declared a neighbor. For K = 2 the four indices enumerate the
    /// hypothesis table: 0 = neither, 1 = node 1 only, 2 = node 2 only,
    /// 3 = both.
    pub hypothesis: usize,
    pub neighbor_set: Vec<bool>,
    /// Unnormalized log posterior score per hypothesis.
    pub log_scores: Vec<f64>,
}

fn matched_outputs(sigs: &SignatureSet, obs: &SlotObservations) -> Vec<DVector<Complex64>> {
    let s = sigs.matrix();
    let k = sigs.node_count();
    obs.slots
        .iter()
        .map(|y| {
            DVector::from_fn(k, |i, _| {
                let mut acc = Complex64::new(0.0, 0.0);
                for li in 0..s.nrows() {
                    acc += y[li] * s[(li, i)];
                }
                acc
            })
        })
        .collect()
}

/// Normal-equation pieces of one activity pattern: A = sum_p Psi_p G Psi_p
/// and b = sum_p Psi_p S^T y_p.
fn normal_equations(
    gram: &DMatrix<f64>,
    st_y: &[DVector<Complex64>],
    psi: &[Vec<bool>],
) -> (DMatrix<f64>, DVector<Complex64>, Vec<u32>) {
    let k = gram.nrows();
    let mut a = DMatrix::zeros(k, k);
    let mut b = DVector::from_element(k, Complex64::new(0.0, 0.0));
    let mut nu = vec![0u32; k];
    for (row, my) in psi.iter().zip(st_y) {
        for j in 0..k {
            if row[j] {
                nu[j] += 1;
                b[j] += my[j];
                for i in 0..k {
                    if row[i] {
                        a[(i, j)] += gram[(i, j)];
                    }
                }
            }
        }
    }
    (a, b, nu)
}

/// Least-squares gain estimate for a known activity pattern. Nodes inactive
/// in every slot are assigned zero; the system is solved on the active
/// submatrix, which is positive definite whenever the signatures have full
/// column rank.
pub fn pattern_least_squares(
    sigs: &SignatureSet,
    obs: &SlotObservations,
    psi: &[Vec<bool>],
) -> Result<(Vec<Complex64>, f64)> {
    if psi.len() != obs.slots.len() {
        return Err(Error::DimensionMismatch(format!(
            "pattern has {} rows, session has {} slots",
            psi.len(),
            obs.slots.len()
        )));
    }
    let k = sigs.node_count();
    if psi.iter().any(|row| row.len() != k) {
        return Err(Error::DimensionMismatch(
            "pattern rows must have one entry per node".into(),
        ));
    }
    let st_y = matched_outputs(sigs, obs);
    let (a, b, nu) = normal_equations(sigs.gram(), &st_y, psi);
    let energy: f64 = obs.slots.iter().map(|y| y.norm_squared()).sum();
    solve_active(&a, &b, &nu, energy)
}

fn solve_active(
    a: &DMatrix<f64>,
    b: &DVector<Complex64>,
    nu: &[u32],
    observation_energy: f64,
) -> Result<(Vec<Complex64>, f64)> {
    let k = nu.len();
    let active: Vec<usize> = (0..k).filter(|&j| nu[j] > 0).collect();
    let mut alpha = vec![Complex64::new(0.0, 0.0); k];
    if !active.is_empty() {
        let na = active.len();
        let sub = DMatrix::from_fn(na, na, |r, c| a[(active[r], active[c])]);
        let chol = sub
            .cholesky()
            .ok_or_else(|| Error::SingularMatrix("active-pattern normal equations".into()))?;
        let re = chol.solve(&DVector::from_fn(na, |r, _| b[active[r]].re));
        let im = chol.solve(&DVector::from_fn(na, |r, _| b[active[r]].im));
        for (idx, &j) in active.iter().enumerate() {
            alpha[j] = Complex64::new(re[idx], im[idx]);
        }
    }
    // ||y - S Psi alpha||^2 summed over slots, expanded through A and b
    let mut quad = 0.0;
    let mut cross = 0.0;
    for i in 0..k {
        cross += (alpha[i].conj() * b[i]).re;
        for j in 0..k {
            quad += a[(i, j)] * (alpha[i].conj() * alpha[j]).re;
        }
    }
    let residual = (observation_energy - 2.0 * cross + quad).max(0.0);
    Ok((alpha, residual))
}

/// Exhaustive joint ML over the 2^(K M0) activity patterns: solves each
/// pattern's normal equations and returns the gain estimate of the pattern
/// with the smallest reconstruction error.
pub fn ml_joint_oracle(sigs: &SignatureSet, obs: &SlotObservations) -> Result<MlJointEstimate> {
    let k = sigs.node_count();
    let m0 = obs.slots.len();
    if m0 == 0 {
        return Err(Error::NoObservation);
    }
    let bits = k * m0;
    if bits > ML_ENUMERATION_BITS {
        return Err(Error::CapabilityExceeded(format!(
            "joint ML enumerates 2^(K*M0) systems; K*M0 = {bits} exceeds {ML_ENUMERATION_BITS}"
        )));
    }
    let st_y = matched_outputs(sigs, obs);
    let energy: f64 = obs.slots.iter().map(|y| y.norm_squared()).sum();
    let gram = sigs.gram();

    let mut best: Option<MlJointEstimate> = None;
    for mask in 0u32..(1u32 << bits) {
        let psi: Vec<Vec<bool>> = (0..m0)
            .map(|p| (0..k).map(|j| mask >> (p * k + j) & 1 == 1).collect())
            .collect();
        let (a, b, nu) = normal_equations(gram, &st_y, &psi);
        let Ok((alpha, residual)) = solve_active(&a, &b, &nu, energy) else {
            continue; // numerically singular pattern: skip per the search rule
        };
        if best.as_ref().is_none_or(|cur| residual < cur.residual) {
            best = Some(MlJointEstimate {
                alpha,
                residual,
                best_pattern: psi,
            });
        }
    }
    best.ok_or_else(|| Error::SingularMatrix("every pattern was singular".into()))
}

/// Online log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn add(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY {
            self.max = t;
            self.sum = 1.0;
        } else if t <= self.max {
            self.sum += (t - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - t).exp() + 1.0;
            self.max = t;
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }

    fn max(&self) -> f64 {
        self.max
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // evaluate P_n and P_n' by the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for j in 2..=n {
            let jf = j as f64;
            let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// One radial quadrature node: abscissa and the log of its full weight
/// (quadrature weight, Jacobian r, Gaussian decay, density constant, branch
/// prior multiplier).
#[derive(Debug, Clone, Copy)]
struct RadialNode {
    r: f64,
    ln_w: f64,
    above: bool,
}

/// Place `budget` Gauss-Legendre nodes on [lo, hi], concentrating on the
/// window where exp(-m r^2 + 2 c r) carries its mass.
fn radial_panel(
    lo: f64,
    hi: f64,
    m_kk: f64,
    c_abs: f64,
    budget: usize,
    ln_extra: f64,
    above: bool,
    out: &mut Vec<RadialNode>,
) {
    if hi <= lo || budget == 0 {
        return;
    }
    let peak = c_abs / m_kk;
    let sigma = (2.0 * m_kk).sqrt().recip();
    let win_lo = (peak - 10.0 * sigma).max(lo);
    let win_hi = (peak + 10.0 * sigma).min(hi);

    let mut panels: Vec<(f64, f64, usize)> = Vec::new();
    if win_hi <= win_lo {
        panels.push((lo, hi, budget));
    } else {
        let side = budget / 4;
        let left = win_lo > lo;
        let right = win_hi < hi;
        let mut used = 0;
        if left {
            panels.push((lo, win_lo, side));
            used += side;
        }
        if right {
            used += side;
        }
        panels.push((win_lo, win_hi, budget - used));
        if right {
            panels.push((win_hi, hi, side));
        }
    }
    for (a, b, n) in panels {
        if b <= a || n == 0 {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in gauss_legendre(n) {
            let r = mid + half * x;
            let ln_w = (w * half).ln() + r.ln() - m_kk * r * r + ln_extra;
            out.push(RadialNode { r, ln_w, above });
        }
    }
}

/// Bayesian neighbor-set decision for K <= 2 nodes and M0 <= 4 sensing
/// slots.
///
/// Scores every hypothesis H (a below/above-threshold assignment per node)
/// as P(H) p(y | H), marginalizing the 2^(K M0) activity patterns exactly
/// and the complex gains by quadrature: 64 radial nodes per amplitude
/// dimension and, for the two-node case, one exact Bessel phase reduction
/// plus a 32-point periodic trapezoid on the remaining phase.
///
/// `priors` optionally overrides the per-node neighbor probabilities; the
/// default is the fading-induced P(|alpha_k| > tau_A) = exp(-tau_A^2 /
/// (2 sigma_k^2)).
pub fn map_oracle(
    sigs: &SignatureSet,
    obs: &SlotObservations,
    cfg: &NetworkConfig,
    priors: Option<&[f64]>,
) -> Result<MapDecision> {
    let k = sigs.node_count();
    let m0 = obs.slots.len();
    if k > MAP_MAX_NODES {
        return Err(Error::CapabilityExceeded(format!(
            "MAP oracle handles at most {MAP_MAX_NODES} nodes, got {k}"
        )));
    }
    if m0 == 0 {
        return Err(Error::NoObservation);
    }
    if m0 > MAP_MAX_SLOTS {
        return Err(Error::CapabilityExceeded(format!(
            "MAP oracle handles at most {MAP_MAX_SLOTS} sensing slots, got {m0}"
        )));
    }
    if cfg.node_count() != k {
        return Err(Error::DimensionMismatch(format!(
            "config has {} target nodes, signature set has {k}",
            cfg.node_count()
        )));
    }
    let default_priors: Vec<f64> = (1..=k).map(|i| cfg.prob_neighbor(i)).collect();
    let priors = match priors {
        Some(p) => {
            if p.len() != k {
                return Err(Error::DimensionMismatch(
                    "need one prior per target node".into(),
                ));
            }
            if p.iter().any(|w| !(0.0..=1.0).contains(w)) {
                return Err(Error::invalid("priors must lie in [0, 1]"));
            }
            p.to_vec()
        }
        None => default_priors.clone(),
    };

    let tau_a = cfg.tau_a();
    let inv_2n0 = 1.0 / cfg.noise_power();
    let st_y = matched_outputs(sigs, obs);
    let gram = sigs.gram();

    // per-node constants: density normalization and branch prior multipliers
    let mut ln_density = vec![0.0; k];
    let mut ln_mult_below = vec![0.0; k];
    let mut ln_mult_above = vec![0.0; k];
    for j in 0..k {
        let sig_sq = cfg.sigma_sq(j + 1);
        ln_density[j] = -(2.0 * std::f64::consts::PI * sig_sq).ln();
        let p_above = (-tau_a * tau_a / (2.0 * sig_sq)).exp();
        let p_below = 1.0 - p_above;
        ln_mult_above[j] = if p_above > 0.0 {
            (priors[j] / p_above).ln()
        } else {
            f64::NEG_INFINITY
        };
        ln_mult_below[j] = if p_below > 0.0 {
            ((1.0 - priors[j]) / p_below).ln()
        } else {
            f64::NEG_INFINITY
        };
    }

    let hyp_count = 1usize << k;
    let mut scores = vec![LogSum::new(); hyp_count];

    let bits = k * m0;
    for mask in 0u32..(1u32 << bits) {
        let psi: Vec<Vec<bool>> = (0..m0)
            .map(|p| (0..k).map(|j| mask >> (p * k + j) & 1 == 1).collect())
            .collect();
        let (a, b, nu) = normal_equations(gram, &st_y, &psi);

        // pattern prior
        let mut ln_p_psi = 0.0;
        for j in 0..k {
            let eps = cfg.epsilon(j + 1);
            let on = f64::from(nu[j]);
            let off = m0 as f64 - on;
            if on > 0.0 {
                if eps == 0.0 {
                    ln_p_psi = f64::NEG_INFINITY;
                    break;
                }
                ln_p_psi += on * eps.ln();
            }
            if off > 0.0 {
                if eps == 1.0 {
                    ln_p_psi = f64::NEG_INFINITY;
                    break;
                }
                ln_p_psi += off * (1.0 - eps).ln();
            }
        }
        if ln_p_psi == f64::NEG_INFINITY {
            continue;
        }

        // Gaussian in alpha: exponent 2 Re(alpha^H c) - alpha^H M alpha
        let m_diag: Vec<f64> = (0..k)
            .map(|j| a[(j, j)] * inv_2n0 + 0.5 / cfg.sigma_sq(j + 1))
            .collect();
        let c: Vec<Complex64> = (0..k).map(|j| b[j] * inv_2n0).collect();

        // radial nodes per node, both branch regions
        let mut nodes: Vec<Vec<RadialNode>> = Vec::with_capacity(k);
        for j in 0..k {
            let mut list = Vec::with_capacity(2 * MAP_RADIAL_NODES_PER_BRANCH);
            let sigma = (2.0 * m_diag[j]).sqrt().recip();
            let peak = c[j].norm() / m_diag[j];
            radial_panel(
                0.0,
                tau_a,
                m_diag[j],
                c[j].norm(),
                MAP_RADIAL_NODES_PER_BRANCH,
                ln_density[j] + ln_mult_below[j],
                false,
                &mut list,
            );
            let hi = peak.max(tau_a) + 12.0 * sigma;
            radial_panel(
                tau_a,
                hi,
                m_diag[j],
                c[j].norm(),
                MAP_RADIAL_NODES_PER_BRANCH,
                ln_density[j] + ln_mult_above[j],
                true,
                &mut list,
            );
            nodes.push(list);
        }

        if k == 1 {
            // phase integral is exactly 2 pi I0(2 r |c|)
            let mut region = [LogSum::new(), LogSum::new()];
            for node in &nodes[0] {
                let t = node.ln_w + LN_2PI + ln_bessel_i0(2.0 * node.r * c[0].norm());
                region[usize::from(node.above)].add(t);
            }
            for (h, score) in scores.iter_mut().enumerate() {
                score.add(ln_p_psi + region[h & 1].value());
            }
        } else {
            // theta_2 integrated exactly via I0; theta_1 by trapezoid
            let m12 = a[(0, 1)] * inv_2n0;
            let ln_theta_w = LN_2PI - (MAP_PHASE_NODES as f64).ln();
            let mut region = [
                LogSum::new(),
                LogSum::new(),
                LogSum::new(),
                LogSum::new(),
            ];
            let mut ln_e1 = [0.0; MAP_PHASE_NODES];
            let mut gmag = [0.0; MAP_PHASE_NODES];
            let c1_norm = c[0].norm();
            let c2_norm = c[1].norm();
            for n1 in &nodes[0] {
                let mut filled = false;
                for n2 in &nodes[1] {
                    let base = n1.ln_w + n2.ln_w + LN_2PI + ln_theta_w;
                    let block = usize::from(n1.above) | usize::from(n2.above) << 1;
                    let acc = &mut region[block];
                    // cheap upper bound on any theta term: Re(..) <= |..|
                    // and ln I0(x) <= x; skip pairs that cannot matter
                    let bound = base
                        + 2.0 * n1.r * c1_norm
                        + 2.0 * n2.r * (c2_norm + m12.abs() * n1.r);
                    if bound < acc.max() - 46.0 {
                        continue;
                    }
                    if !filled {
                        for m in 0..MAP_PHASE_NODES {
                            let theta = 2.0 * std::f64::consts::PI * m as f64
                                / MAP_PHASE_NODES as f64;
                            let (sin_t, cos_t) = theta.sin_cos();
                            ln_e1[m] = 2.0 * n1.r * (c[0].re * cos_t + c[0].im * sin_t);
                            let wre = c[1].re - m12 * n1.r * cos_t;
                            let wim = c[1].im - m12 * n1.r * sin_t;
                            gmag[m] = (wre * wre + wim * wim).sqrt();
                        }
                        filled = true;
                    }
                    for m in 0..MAP_PHASE_NODES {
                        acc.add(base + ln_e1[m] + fast_ln_i0(2.0 * n2.r * gmag[m]));
                    }
                }
            }
            for (h, score) in scores.iter_mut().enumerate() {
                score.add(ln_p_psi + region[h].value());
            }
        }
    }

    let log_scores: Vec<f64> = scores.iter().map(LogSum::value).collect();
    let hypothesis = log_scores
        .iter()
        .enumerate()
        .max_by(|(_, x), (_, y)| x.partial_cmp(y).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let neighbor_set = (0..k).map(|j| hypothesis >> j & 1 == 1).collect();
    Ok(MapDecision {
        hypothesis,
        neighbor_set,
        log_scores,
    })
}
