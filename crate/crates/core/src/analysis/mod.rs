//! Closed-form performance evaluation: conditional false-alarm and miss
//! probabilities of the incoherent detector and of the linear test family,
//! unconditional averaging over the random activity counts, the asymptotic
//! large-session approximation, asymptotically optimal thresholds, and
//! numerical threshold optimization.

pub mod special;

use std::collections::HashMap;

use nalgebra::DVector;
use rand_distr::{Binomial, Distribution};

use crate::channel::{session_rng, NetworkConfig};
use crate::error::{Error, Result};
use crate::signatures::{mmoe_correlator, zf_correlator, SignatureSet};
use special::{UpperGammaLadder, SERIES_TOL};

/// The detector families the analysis and the experiments cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    /// Matched-filter linear test on the cumulative observation.
    MatchedFilter,
    /// Zero-forcing linear test, identical to the coherent detector.
    ZeroForcingCd,
    /// Minimum-mean-output-energy linear test.
    Mmoe,
    /// Incoherent detector on per-slot decorrelator outputs.
    IncoherentDetector,
}

impl DetectorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mf" => Ok(Self::MatchedFilter),
            "zf-cd" | "zf" | "cd" => Ok(Self::ZeroForcingCd),
            "mmoe" => Ok(Self::Mmoe),
            "id" => Ok(Self::IncoherentDetector),
            other => Err(Error::invalid(format!(
                "unknown detector '{other}' (expected mf, zf-cd, mmoe, or id)"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::MatchedFilter => "mf",
            Self::ZeroForcingCd => "zf-cd",
            Self::Mmoe => "mmoe",
            Self::IncoherentDetector => "id",
        }
    }
}

/// How a performance figure was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Simulated,
    SemiAnalytic,
    Asymptotic,
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Simulated => "simulated",
            Self::SemiAnalytic => "semi-analytic",
            Self::Asymptotic => "asymptotic",
        }
    }
}

/// A false-alarm / miss / error-probability triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfPoint {
    pub p_f: f64,
    pub p_m: f64,
    pub p_e: f64,
    pub provenance: Provenance,
    /// Sampling standard error of `p_e`, when the value was averaged by
    /// Monte Carlo rather than exact enumeration.
    pub stderr: Option<f64>,
    /// The (nu_1, M_0) pair a conditional figure refers to.
    pub conditioning: Option<(f64, f64)>,
}

/// Post-decorrelation SNR context of the node under test (node 1).
#[derive(Debug, Clone, Copy)]
pub struct SinrContext {
    /// Transmit count of node 1 within the sensing window.
    pub nu1: f64,
    /// Sensing-slot count.
    pub m0: f64,
    /// Per-dimension noise variance after decorrelation:
    /// sigma_{n,1}^2 = (S^T S)^{-1}_{11} N0.
    pub sigma2_n1: f64,
    /// rho_1 = sigma_1^2 / sigma_{n,1}^2.
    pub rho1: f64,
}

impl SinrContext {
    /// Context of the decorrelating receiver for given conditioning counts.
    pub fn decorrelator(cfg: &NetworkConfig, sigs: &SignatureSet, nu1: f64, m0: f64) -> Self {
        let sigma2_n1 = cfg.n0() * sigs.noise_enhancement(0);
        Self {
            nu1,
            m0,
            sigma2_n1,
            rho1: cfg.sigma_sq(1) / sigma2_n1,
        }
    }
}

/// Output SINR context of a linear correlator for given conditioning counts.
#[derive(Debug, Clone, Copy)]
pub struct CorrelatorSinr {
    pub nu1: f64,
    pub m0: f64,
    /// Sigma^2(c_1): per-dimension interference-plus-noise variance at the
    /// correlator output.
    pub sigma_sq: f64,
    /// rho_eq = sigma_1^2 (c_1^T s_1)^2 / Sigma^2(c_1).
    pub rho_eq: f64,
}

impl CorrelatorSinr {
    /// Build the context from an explicit correlator and the conditioning
    /// transmit counts `nu` (one entry per target node, node 1 first).
    pub fn from_correlator(
        c: &DVector<f64>,
        cfg: &NetworkConfig,
        sigs: &SignatureSet,
        nu: &[f64],
        m0: f64,
    ) -> Result<Self> {
        let k = sigs.node_count();
        if nu.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "need {k} transmit counts, got {}",
                nu.len()
            )));
        }
        let gain0 = c.dot(&sigs.signature(0));
        let mut sigma_sq = m0 * cfg.n0() * c.norm_squared();
        for j in 1..k {
            let cross = c.dot(&sigs.signature(j));
            sigma_sq += cfg.sigma_sq(j + 1) * nu[j] * nu[j] * cross * cross;
        }
        Ok(Self {
            nu1: nu[0],
            m0,
            sigma_sq,
            rho_eq: cfg.sigma_sq(1) * gain0 * gain0 / sigma_sq,
        })
    }
}

fn clamp_unit(x: f64) -> f64 {
    debug_assert!(
        x > -1e-9 && x < 1.0 + 1e-9,
        "probability out of range before clamping: {x}"
    );
    x.clamp(0.0, 1.0)
}

/// First gamma factor of the performance series: a live ladder, or a slice
/// of precomputed ladder values when many conditioning cells share the same
/// threshold argument.
enum FirstFactor<'a> {
    Ladder(UpperGammaLadder),
    Table { values: &'a [f64], idx: usize },
}

impl FirstFactor<'_> {
    fn value(&self) -> f64 {
        match self {
            FirstFactor::Ladder(l) => l.value(),
            // beyond the precomputed range the factor has saturated
            FirstFactor::Table { values, idx } => values[(*idx).min(values.len() - 1)],
        }
    }

    fn step(&mut self) {
        match self {
            FirstFactor::Ladder(l) => l.step(),
            FirstFactor::Table { idx, .. } => *idx += 1,
        }
    }
}

/// Precomputed Q(base + j; x) for j = 0..len.
fn q_ladder_table(base: f64, x: f64, len: usize) -> Result<Vec<f64>> {
    let mut ladder = UpperGammaLadder::new(base, x)?;
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(ladder.value());
        ladder.step();
    }
    Ok(values)
}

/// Both conditional series in one pass:
///
///   P_M = 1 - e^{x_a} / s * sum_k q^k F1(k) Q(k + 1; x_a s)
///   P_F = pref / s      * sum_k q^k F1(k) P(k + 1; x_a s)
///
/// with s = 1 + nu rho, q = (s - 1) / s, F1 the detector-specific upper
/// gamma factor, and pref the literal e^{x/2} csch(x/2) / 2 prefactor.
/// Each branch truncates when its residual tail bound drops below
/// `SERIES_TOL` relative to the accumulated value (1e-14 absolute floor);
/// the miss branch also closes the bare geometric tail in closed form once
/// both gamma factors saturate. The false-alarm branch requires x_a > 0 and
/// is skipped (`None`) at x_a = 0.
fn dual_series(
    mut first: FirstFactor,
    nu_rho: f64,
    x_a: f64,
    want_pf: bool,
) -> Result<(f64, Option<f64>)> {
    let s = 1.0 + nu_rho;
    let q = nu_rho / s;
    let mut second = UpperGammaLadder::new(1.0, x_a * s)?;
    let scale = x_a.exp();
    // the shared weight below carries the 1/s, so the csch prefactor keeps
    // only its e^{x/2} / (2 sinh(x/2)) part
    let prefactor = if want_pf && x_a > 0.0 {
        let half = 0.5 * x_a;
        half.exp() / (2.0 * half.sinh())
    } else {
        f64::NAN
    };
    let mut weight = 1.0 / s; // q^k / s
    let mut pm_sum = 0.0;
    let mut pf_sum = 0.0;
    let mut pm_done = false;
    let mut pf_done = !(want_pf && x_a > 0.0);
    for _ in 0..40_000_000usize {
        let f1 = first.value();
        let q2 = second.value();
        if !pm_done {
            pm_sum += weight * f1 * q2;
            if f1 > 1.0 - 1e-13 && q2 > 1.0 - 1e-13 {
                // remaining terms are a bare geometric tail of mass w q s
                pm_sum += weight * q * s;
                pm_done = true;
            } else if scale * weight * q * s < (SERIES_TOL * scale * pm_sum).max(1e-14) {
                pm_done = true;
            }
        }
        if !pf_done {
            let p2 = 1.0 - q2;
            pf_sum += weight * f1 * p2;
            let tail = prefactor * weight * q * s * p2;
            if tail < (SERIES_TOL * prefactor * pf_sum).max(1e-14) {
                pf_done = true;
            }
        }
        if pm_done && pf_done {
            let p_m = clamp_unit(1.0 - scale * pm_sum);
            let p_f = if want_pf && x_a > 0.0 {
                Some(clamp_unit(prefactor * pf_sum))
            } else {
                None
            };
            return Ok((p_m, p_f));
        }
        weight *= q;
        first.step();
        second.step();
    }
    Err(Error::invalid(format!(
        "performance series failed to converge (nu*rho = {nu_rho}, x_a = {x_a})"
    )))
}

fn compose(p_f: f64, p_m: f64, x_a: f64) -> f64 {
    let p_above = (-x_a).exp();
    p_f * (1.0 - p_above) + p_m * p_above
}

/// Conditional miss probability of the incoherent detector given
/// (nu_1, M_0). Valid for any tau_a >= 0.
pub fn cond_miss_id(ctx: &SinrContext, tau_sq: f64, tau_a: f64, sigma1_sq: f64) -> Result<f64> {
    if ctx.m0 < 1.0 {
        return Err(Error::NoObservation);
    }
    let x_a = tau_a * tau_a / (2.0 * sigma1_sq);
    let x_tau = tau_sq / (2.0 * ctx.sigma2_n1);
    let first = FirstFactor::Ladder(UpperGammaLadder::new(ctx.m0, x_tau)?);
    Ok(dual_series(first, ctx.nu1 * ctx.rho1, x_a, false)?.0)
}

/// Conditional false-alarm and miss probabilities of the incoherent
/// detector given (nu_1, M_0).
///
/// The false alarm conditions on |alpha_1| < tau_a, so tau_a must be
/// strictly positive; use [`cond_miss_id`] when only the miss branch is
/// needed.
pub fn cond_perf_id(
    ctx: &SinrContext,
    tau_sq: f64,
    tau_a: f64,
    sigma1_sq: f64,
) -> Result<PerfPoint> {
    if !(tau_a > 0.0) {
        return Err(Error::invalid(
            "false-alarm probability is undefined at tau_a = 0 (conditioning event has probability zero)",
        ));
    }
    if ctx.m0 < 1.0 {
        return Err(Error::NoObservation);
    }
    let x_a = tau_a * tau_a / (2.0 * sigma1_sq);
    let x_tau = tau_sq / (2.0 * ctx.sigma2_n1);
    let nu_rho = ctx.nu1 * ctx.rho1;
    let first = FirstFactor::Ladder(UpperGammaLadder::new(ctx.m0, x_tau)?);
    let (p_m, p_f) = dual_series(first, nu_rho, x_a, true)?;
    let p_f = p_f.expect("tau_a > 0 was checked");
    Ok(PerfPoint {
        p_f,
        p_m,
        p_e: compose(p_f, p_m, x_a),
        provenance: Provenance::SemiAnalytic,
        stderr: None,
        conditioning: Some((ctx.nu1, ctx.m0)),
    })
}

/// Conditional miss probability of a linear test given the transmit counts.
pub fn cond_miss_lndt(
    ctx: &CorrelatorSinr,
    tau_sq: f64,
    tau_a: f64,
    sigma1_sq: f64,
) -> Result<f64> {
    if ctx.m0 < 1.0 {
        return Err(Error::NoObservation);
    }
    let x_a = tau_a * tau_a / (2.0 * sigma1_sq);
    let x_tau = tau_sq / (2.0 * ctx.sigma_sq);
    let first = FirstFactor::Ladder(UpperGammaLadder::new(1.0, x_tau)?);
    Ok(dual_series(first, ctx.nu1 * ctx.nu1 * ctx.rho_eq, x_a, false)?.0)
}

/// Conditional false-alarm and miss probabilities of a linear test given
/// the transmit counts. Same shape as the incoherent-detector series with
/// nu_1^2 rho_eq in place of nu_1 rho_1 and order-one gamma factors.
pub fn cond_perf_lndt(
    ctx: &CorrelatorSinr,
    tau_sq: f64,
    tau_a: f64,
    sigma1_sq: f64,
) -> Result<PerfPoint> {
    if !(tau_a > 0.0) {
        return Err(Error::invalid(
            "false-alarm probability is undefined at tau_a = 0 (conditioning event has probability zero)",
        ));
    }
    if ctx.m0 < 1.0 {
        return Err(Error::NoObservation);
    }
    let x_a = tau_a * tau_a / (2.0 * sigma1_sq);
    let x_tau = tau_sq / (2.0 * ctx.sigma_sq);
    let nu_rho = ctx.nu1 * ctx.nu1 * ctx.rho_eq;
    let first = FirstFactor::Ladder(UpperGammaLadder::new(1.0, x_tau)?);
    let (p_m, p_f) = dual_series(first, nu_rho, x_a, true)?;
    let p_f = p_f.expect("tau_a > 0 was checked");
    Ok(PerfPoint {
        p_f,
        p_m,
        p_e: compose(p_f, p_m, x_a),
        provenance: Provenance::SemiAnalytic,
        stderr: None,
        conditioning: Some((ctx.nu1, ctx.m0)),
    })
}

/// Asymptotically optimal squared thresholds, from the consistency of the
/// coherent and incoherent power estimators in the large-session limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticThresholds {
    /// tau^2 for the coherent detector statistic |sum_p (S^+ y_p)_1|^2.
    pub cd: f64,
    /// tau^2 for the incoherent statistic sum_p |(S^+ y_p)_1|^2.
    pub id: f64,
}

pub fn asymptotic_thresholds(cfg: &NetworkConfig, sigs: &SignatureSet) -> AsymptoticThresholds {
    let m0 = cfg.session_slots() as f64 * (1.0 - cfg.epsilon(0));
    let eps1 = cfg.epsilon(1);
    let tau_a_sq = cfg.tau_a() * cfg.tau_a();
    let noise = cfg.noise_power() * sigs.noise_enhancement(0);
    AsymptoticThresholds {
        cd: m0 * (eps1 * tau_a_sq * (m0 * eps1 + 1.0 - eps1) + noise),
        id: m0 * (tau_a_sq * eps1 + noise),
    }
}

/// How interferer transmit counts are averaged for the matched-filter and
/// MMOE formulas, whose output SINR depends on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfererAveraging {
    /// Sample the interferer counts by seeded Monte Carlo and average the
    /// conditional formula (reported with a standard error).
    MonteCarlo,
    /// Substitute the typical counts nu_k = M0 eps_k.
    Typical,
}

/// Options of the unconditional (semi-analytic) average.
#[derive(Debug, Clone, Copy)]
pub struct UncondOptions {
    pub interferers: InterfererAveraging,
    /// Sample count of the Monte Carlo interferer average.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for UncondOptions {
    fn default() -> Self {
        Self {
            interferers: InterfererAveraging::MonteCarlo,
            mc_samples: 10_000,
            seed: 0x5eed_ab1e,
        }
    }
}

/// Cap on the exact-enumeration support of (M0, nu_1) cells; beyond it the
/// heaviest cells are kept and the average renormalized over them.
const EXACT_SUPPORT_LIMIT: usize = 10_000;
/// Probability mass the exact enumeration aims to capture.
const ENUM_MASS_TARGET: f64 = 1.0 - 1e-9;

struct BinomialTable {
    ln_fact: Vec<f64>,
}

impl BinomialTable {
    fn new(n: usize) -> Self {
        let mut ln_fact = vec![0.0; n + 1];
        for i in 1..=n {
            ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
        }
        Self { ln_fact }
    }

    fn pmf(&self, n: usize, k: usize, p: f64) -> f64 {
        if p == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if p == 1.0 {
            return if k == n { 1.0 } else { 0.0 };
        }
        let ln = self.ln_fact[n] - self.ln_fact[k] - self.ln_fact[n - k]
            + k as f64 * p.ln()
            + (n - k) as f64 * (1.0 - p).ln();
        ln.exp()
    }
}

/// The heaviest (M0, nu_1) cells of the joint activity-count distribution,
/// conditioned on M0 >= 1, with their probabilities. Covers at least
/// `ENUM_MASS_TARGET` of the mass unless the support cap bites first.
fn dominant_cells(cfg: &NetworkConfig) -> Result<Vec<(usize, usize, f64)>> {
    let n = cfg.session_slots();
    let p_sense = 1.0 - cfg.epsilon(0);
    if p_sense == 0.0 {
        return Err(Error::NoObservation);
    }
    let eps1 = cfg.epsilon(1);
    let table = BinomialTable::new(n);
    let mut cells = Vec::new();
    for m0 in 1..=n {
        let wm = table.pmf(n, m0, p_sense);
        if wm < 1e-17 {
            continue;
        }
        for nu1 in 0..=m0 {
            let w = wm * table.pmf(m0, nu1, eps1);
            if w >= 1e-17 {
                cells.push((m0, nu1, w));
            }
        }
    }
    cells.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap()
            .then_with(|| (a.0, a.1).cmp(&(b.0, b.1)))
    });
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for cell in cells {
        kept.push(cell);
        mass += cell.2;
        if mass >= ENUM_MASS_TARGET || kept.len() >= EXACT_SUPPORT_LIMIT {
            break;
        }
    }
    Ok(kept)
}

/// Unconditional semi-analytic performance of one detector at threshold
/// `tau_sq`, obtained by averaging the conditional formulas over the random
/// counts (M0, nu_1) and, where the formula depends on them, the interferer
/// counts.
///
/// The (M0, nu_1) average enumerates the dominant probability cells exactly
/// (support capped at 10^4 cells, mass target 1 - 1e-9). Interferer counts
/// enter only the matched-filter and MMOE formulas and are averaged per
/// `opts.interferers`.
pub fn uncond_perf(
    kind: DetectorKind,
    cfg: &NetworkConfig,
    sigs: &SignatureSet,
    tau_sq: f64,
    opts: &UncondOptions,
) -> Result<PerfPoint> {
    let tau_a = cfg.tau_a();
    let sigma1_sq = cfg.sigma_sq(1);
    let needs_interferers = matches!(kind, DetectorKind::MatchedFilter | DetectorKind::Mmoe)
        && sigs.node_count() > 1;

    if needs_interferers && opts.interferers == InterfererAveraging::MonteCarlo {
        return uncond_perf_mc(kind, cfg, sigs, tau_sq, opts);
    }

    let cells = dominant_cells(cfg)?;
    // group by sensing-window size; each group shares its first-factor table
    let mut by_m0: std::collections::BTreeMap<usize, Vec<(usize, f64)>> =
        std::collections::BTreeMap::new();
    for &(m0, nu1, w) in &cells {
        by_m0.entry(m0).or_default().push((nu1, w));
    }
    let x_a = tau_a * tau_a / (2.0 * sigma1_sq);
    if !(x_a > 0.0) {
        return Err(Error::invalid(
            "false-alarm probability is undefined at tau_a = 0 (conditioning event has probability zero)",
        ));
    }

    let mut mass = 0.0;
    let mut p_f = 0.0;
    let mut p_m = 0.0;
    let mut p_e = 0.0;
    let mut add = |w: f64, pm: f64, pf: f64| {
        mass += w;
        p_f += w * pf;
        p_m += w * pm;
        p_e += w * compose(pf, pm, x_a);
    };

    if kind == DetectorKind::IncoherentDetector {
        let sigma2_n1 = cfg.n0() * sigs.noise_enhancement(0);
        let rho1 = cfg.sigma_sq(1) / sigma2_n1;
        let x_tau = tau_sq / (2.0 * sigma2_n1);
        let m0_min = *by_m0.keys().next().unwrap();
        let m0_max = *by_m0.keys().next_back().unwrap();
        let max_nu_rho = by_m0
            .values()
            .flatten()
            .map(|&(nu1, _)| nu1 as f64 * rho1)
            .fold(0.0, f64::max);
        let len = series_span(x_tau, x_a, max_nu_rho) + (m0_max - m0_min) + 1;
        let table = q_ladder_table(m0_min as f64, x_tau, len)?;
        for (&m0, list) in &by_m0 {
            for &(nu1, w) in list {
                let first = FirstFactor::Table {
                    values: &table,
                    idx: m0 - m0_min,
                };
                let (pm, pf) = dual_series(first, nu1 as f64 * rho1, x_a, true)?;
                add(w, pm, pf.unwrap());
            }
        }
    } else {
        let mut eval = KindEvalSimple::new(kind, cfg, sigs)?;
        for (&m0, list) in &by_m0 {
            let m0f = m0 as f64;
            let c = eval.correlator(m0f)?;
            let mut nu = vec![0.0; sigs.node_count()];
            for (j, slot) in nu.iter_mut().enumerate().skip(1) {
                *slot = m0f * cfg.epsilon(j + 1);
            }
            let ctx = CorrelatorSinr::from_correlator(&c, cfg, sigs, &nu, m0f)?;
            let x_tau = tau_sq / (2.0 * ctx.sigma_sq);
            let max_nu_rho = list
                .iter()
                .map(|&(nu1, _)| (nu1 as f64).powi(2) * ctx.rho_eq)
                .fold(0.0, f64::max);
            let table = q_ladder_table(1.0, x_tau, series_span(x_tau, x_a, max_nu_rho))?;
            for &(nu1, w) in list {
                let first = FirstFactor::Table {
                    values: &table,
                    idx: 0,
                };
                let nu_rho = (nu1 as f64).powi(2) * ctx.rho_eq;
                let (pm, pf) = dual_series(first, nu_rho, x_a, true)?;
                add(w, pm, pf.unwrap());
            }
        }
    }
    Ok(PerfPoint {
        p_f: p_f / mass,
        p_m: p_m / mass,
        p_e: p_e / mass,
        provenance: Provenance::SemiAnalytic,
        stderr: None,
        conditioning: None,
    })
}

/// Upper bound on the series index needed before both gamma factors
/// saturate, across all cells sharing the table.
fn series_span(x_tau: f64, x_a: f64, max_nu_rho: f64) -> usize {
    let y_max = x_a * (1.0 + max_nu_rho);
    let sat = x_tau.max(y_max);
    (sat + 12.0 * sat.sqrt() + 128.0) as usize
}

/// Monte Carlo average over all random counts for the interference-limited
/// linear tests.
fn uncond_perf_mc(
    kind: DetectorKind,
    cfg: &NetworkConfig,
    sigs: &SignatureSet,
    tau_sq: f64,
    opts: &UncondOptions,
) -> Result<PerfPoint> {
    let n = cfg.session_slots();
    let p_sense = 1.0 - cfg.epsilon(0);
    if p_sense == 0.0 {
        return Err(Error::NoObservation);
    }
    let tau_a = cfg.tau_a();
    let sigma1_sq = cfg.sigma_sq(1);
    let k = sigs.node_count();
    let mut rng = session_rng(opts.seed, 0);
    let m0_dist = Binomial::new(n as u64, p_sense)
        .map_err(|e| Error::invalid(format!("binomial: {e}")))?;
    let mut eval = KindEvalSimple::new(kind, cfg, sigs)?;
    let mut nu = vec![0.0; k];
    let mut sum_f = 0.0;
    let mut sum_m = 0.0;
    let mut sum_e = 0.0;
    let mut sum_e_sq = 0.0;
    let mut kept = 0usize;
    let samples = opts.mc_samples.max(1);
    let mut guard = 0usize;
    while kept < samples {
        guard += 1;
        if guard > samples * 1000 {
            return Err(Error::NoObservation); // M0 >= 1 essentially never happens
        }
        let m0 = m0_dist.sample(&mut rng) as usize;
        if m0 == 0 {
            continue;
        }
        for (j, slot) in nu.iter_mut().enumerate() {
            let dist = Binomial::new(m0 as u64, cfg.epsilon(j + 1))
                .map_err(|e| Error::invalid(format!("binomial: {e}")))?;
            *slot = dist.sample(&mut rng) as f64;
        }
        let point = eval.with_counts(tau_sq, &nu, m0 as f64, tau_a, sigma1_sq)?;
        sum_f += point.p_f;
        sum_m += point.p_m;
        sum_e += point.p_e;
        sum_e_sq += point.p_e * point.p_e;
        kept += 1;
    }
    let nf = kept as f64;
    let mean_e = sum_e / nf;
    let var = (sum_e_sq / nf - mean_e * mean_e).max(0.0);
    Ok(PerfPoint {
        p_f: sum_f / nf,
        p_m: sum_m / nf,
        p_e: mean_e,
        provenance: Provenance::SemiAnalytic,
        stderr: Some((var / nf).sqrt()),
        conditioning: None,
    })
}

/// Evaluates the conditional formula of one detector kind with caching of
/// whatever does not change between cells.
struct KindEvalSimple<'a> {
    kind: DetectorKind,
    cfg: &'a NetworkConfig,
    sigs: &'a SignatureSet,
    sigma2_n1: f64,
    rho1: f64,
    mmoe_cache: HashMap<usize, DVector<f64>>,
    zf: Option<DVector<f64>>,
}

impl<'a> KindEvalSimple<'a> {
    fn new(kind: DetectorKind, cfg: &'a NetworkConfig, sigs: &'a SignatureSet) -> Result<Self> {
        let sigma2_n1 = cfg.n0() * sigs.noise_enhancement(0);
        let zf = if kind == DetectorKind::ZeroForcingCd {
            Some(zf_correlator(sigs, 0)?)
        } else {
            None
        };
        Ok(Self {
            kind,
            cfg,
            sigs,
            sigma2_n1,
            rho1: cfg.sigma_sq(1) / sigma2_n1,
            mmoe_cache: HashMap::new(),
            zf,
        })
    }

    fn correlator(&mut self, m0: f64) -> Result<DVector<f64>> {
        match self.kind {
            DetectorKind::MatchedFilter => Ok(self.sigs.signature(0)),
            DetectorKind::ZeroForcingCd => Ok(self.zf.as_ref().unwrap().clone()),
            DetectorKind::Mmoe => {
                let key = (m0.round() as usize).max(1);
                if let Some(c) = self.mmoe_cache.get(&key) {
                    return Ok(c.clone());
                }
                let c = mmoe_correlator(self.sigs, self.cfg, key, 0)?;
                self.mmoe_cache.insert(key, c.clone());
                Ok(c)
            }
            DetectorKind::IncoherentDetector => unreachable!(),
        }
    }

    /// Conditional point with interferer counts at their typical values
    /// nu_k = M0 eps_k (exact for the incoherent detector and zero forcing,
    /// whose formulas have no interferer terms).
    fn typical(
        &mut self,
        tau_sq: f64,
        nu1: f64,
        m0: f64,
        tau_a: f64,
        sigma1_sq: f64,
    ) -> Result<PerfPoint> {
        let k = self.sigs.node_count();
        let mut nu = vec![0.0; k];
        nu[0] = nu1;
        for (j, slot) in nu.iter_mut().enumerate().skip(1) {
            *slot = m0 * self.cfg.epsilon(j + 1);
        }
        self.with_counts(tau_sq, &nu, m0, tau_a, sigma1_sq)
    }

    fn with_counts(
        &mut self,
        tau_sq: f64,
        nu: &[f64],
        m0: f64,
        tau_a: f64,
        sigma1_sq: f64,
    ) -> Result<PerfPoint> {
        if self.kind == DetectorKind::IncoherentDetector {
            let ctx = SinrContext {
                nu1: nu[0],
                m0,
                sigma2_n1: self.sigma2_n1,
                rho1: self.rho1,
            };
            cond_perf_id(&ctx, tau_sq, tau_a, sigma1_sq)
        } else {
            let c = self.correlator(m0)?;
            let ctx = CorrelatorSinr::from_correlator(&c, self.cfg, self.sigs, nu, m0)?;
            cond_perf_lndt(&ctx, tau_sq, tau_a, sigma1_sq)
        }
    }
}

/// Large-session approximation: substitute M0 = N(1 - eps_0) and the typical
/// transmit counts nu_k = M0 eps_k into the conditional formulas.
pub fn asymptotic_perf(
    kind: DetectorKind,
    cfg: &NetworkConfig,
    sigs: &SignatureSet,
    tau_sq: f64,
) -> Result<PerfPoint> {
    let m0 = cfg.session_slots() as f64 * (1.0 - cfg.epsilon(0));
    if m0 < 1.0 {
        return Err(Error::NoObservation);
    }
    let nu1 = m0 * cfg.epsilon(1);
    let mut eval = KindEvalSimple::new(kind, cfg, sigs)?;
    let point = eval.typical(tau_sq, nu1, m0, cfg.tau_a(), cfg.sigma_sq(1))?;
    Ok(PerfPoint {
        provenance: Provenance::Asymptotic,
        conditioning: None,
        ..point
    })
}

/// One sampled point of a threshold sweep.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdCurvePoint {
    pub tau_sq: f64,
    pub perf: PerfPoint,
}

/// Result of the numerical threshold optimization.
#[derive(Debug, Clone)]
pub struct ThresholdOptimum {
    /// Minimizing squared threshold.
    pub tau_sq: f64,
    /// Error probability at the minimizer.
    pub p_e: f64,
    /// The sampled curve (log-spaced over the bracket), for plotting.
    pub curve: Vec<ThresholdCurvePoint>,
    /// True when the minimum sat on a bracket endpoint, i.e. the bracket did
    /// not contain an interior minimum.
    pub boundary: bool,
}

/// Minimize the semi-analytic P(e) over tau^2 in `bracket` by sampling a
/// log-spaced curve and refining the best interior sample with a
/// golden-section search to 1e-3 relative accuracy.
pub fn optimize_threshold(
    kind: DetectorKind,
    cfg: &NetworkConfig,
    sigs: &SignatureSet,
    bracket: (f64, f64),
    samples: usize,
    opts: &UncondOptions,
) -> Result<ThresholdOptimum> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(format!(
            "bracket must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    let samples = samples.max(5);
    let ln_lo = lo.ln();
    let ln_hi = hi.ln();
    let mut curve = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = i as f64 / (samples - 1) as f64;
        let tau_sq = (ln_lo + t * (ln_hi - ln_lo)).exp();
        let perf = uncond_perf(kind, cfg, sigs, tau_sq, opts)?;
        curve.push(ThresholdCurvePoint { tau_sq, perf });
    }
    let best = curve
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.perf.p_e.partial_cmp(&b.perf.p_e).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    if best == 0 || best == samples - 1 {
        return Ok(ThresholdOptimum {
            tau_sq: curve[best].tau_sq,
            p_e: curve[best].perf.p_e,
            curve,
            boundary: true,
        });
    }

    // golden-section on ln tau^2 between the samples flanking the minimum
    let mut a = curve[best - 1].tau_sq.ln();
    let mut b = curve[best + 1].tau_sq.ln();
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let pe_at = |ln_tau: f64| -> Result<f64> {
        Ok(uncond_perf(kind, cfg, sigs, ln_tau.exp(), opts)?.p_e)
    };
    let mut f1 = pe_at(x1)?;
    let mut f2 = pe_at(x2)?;
    while (b - a) > 1e-3 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = pe_at(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = pe_at(x2)?;
        }
    }
    let (ln_star, p_e) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Ok(ThresholdOptimum {
        tau_sq: ln_star.exp(),
        p_e,
        curve,
        boundary: false,
    })
}

/// Binomial standard error of an empirical probability.
pub fn binomial_stderr(p: f64, trials: usize) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Empirical probability with its event count.
pub fn empirical(successes: usize, trials: usize) -> (f64, f64) {
    let p = successes as f64 / trials.max(1) as f64;
    (p, binomial_stderr(p, trials))
}
