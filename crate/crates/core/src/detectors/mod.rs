//! Decision rules: per-slot decorrelation, coherent/incoherent integration
//! estimators, the coherent and incoherent detectors built on them, and the
//! family of linear tests on the cumulative observation.
//!
//! Every decision uses a strict inequality against its threshold; a statistic
//! exactly equal to the threshold decides "not a neighbor". Sessions without
//! sensing slots yield a distinguished no-observation error instead of a
//! default decision.

pub mod oracles;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::SlotObservations;
use crate::error::{Error, Result};
use crate::signatures::{CorrelatorBank, Decorrelator};

/// Which integration strategy produced a power estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationKind {
    Coherent,
    Incoherent,
}

/// A (biased) estimate of the instantaneous received power of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub kind: IntegrationKind,
}

/// Per-node neighbor decisions with the statistics and thresholds that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub per_node: Vec<bool>,
    pub statistics: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl Decision {
    fn from_statistics(statistics: Vec<f64>, thresholds: &[f64]) -> Result<Self> {
        if statistics.len() != thresholds.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} statistics vs {} thresholds",
                statistics.len(),
                thresholds.len()
            )));
        }
        let per_node = statistics
            .iter()
            .zip(thresholds)
            .map(|(s, t)| s > t)
            .collect();
        Ok(Self {
            per_node,
            statistics,
            thresholds: thresholds.to_vec(),
        })
    }
}

/// Decorrelate one received slot: S^+ y_p = Psi_p alpha + w_p.
pub fn slot_decorrelate(
    dec: &Decorrelator,
    y_p: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    dec.apply(y_p)
}

/// Decorrelate every slot of a session.
pub fn decorrelate_all(
    dec: &Decorrelator,
    obs: &SlotObservations,
) -> Result<Vec<DVector<Complex64>>> {
    obs.slots.iter().map(|y| dec.apply(y)).collect()
}

/// Coherent-integration power estimates: |mean of the decorrelated slots|^2
/// per node.
pub fn estimate_ci(decorrelated: &[DVector<Complex64>]) -> Result<Vec<PowerEstimate>> {
    if decorrelated.is_empty() {
        return Err(Error::NoObservation);
    }
    let k = decorrelated[0].len();
    let m0 = decorrelated.len() as f64;
    let mut mean = DVector::from_element(k, Complex64::new(0.0, 0.0));
    for u in decorrelated {
        mean += u;
    }
    mean /= Complex64::new(m0, 0.0);
    Ok((0..k)
        .map(|i| PowerEstimate {
            value: mean[i].norm_sqr(),
            kind: IntegrationKind::Coherent,
        })
        .collect())
}

/// Incoherent-integration power estimates: mean of |decorrelated slot|^2
/// per node.
pub fn estimate_ii(decorrelated: &[DVector<Complex64>]) -> Result<Vec<PowerEstimate>> {
    if decorrelated.is_empty() {
        return Err(Error::NoObservation);
    }
    let k = decorrelated[0].len();
    let m0 = decorrelated.len() as f64;
    Ok((0..k)
        .map(|i| {
            let sum: f64 = decorrelated.iter().map(|u| u[i].norm_sqr()).sum();
            PowerEstimate {
                value: sum / m0,
                kind: IntegrationKind::Incoherent,
            }
        })
        .collect())
}

/// Coherent detector: node i is a neighbor when |sum over slots of the i-th
/// decorrelated component|^2 exceeds its threshold. The sum of decorrelated
/// slots equals the decorrelated cumulative observation, which is what gets
/// computed here.
pub fn decide_cd(
    dec: &Decorrelator,
    obs: &SlotObservations,
    thresholds: &[f64],
) -> Result<Decision> {
    if obs.slots.is_empty() {
        return Err(Error::NoObservation);
    }
    let u = dec.apply(&obs.sum)?;
    let stats = (0..u.len()).map(|i| u[i].norm_sqr()).collect();
    Decision::from_statistics(stats, thresholds)
}

/// Incoherent detector: node i is a neighbor when the sum over slots of
/// |i-th decorrelated component|^2 exceeds its threshold.
pub fn decide_id(
    dec: &Decorrelator,
    obs: &SlotObservations,
    thresholds: &[f64],
) -> Result<Decision> {
    if obs.slots.is_empty() {
        return Err(Error::NoObservation);
    }
    let k = dec.node_count();
    let mut stats = vec![0.0; k];
    for y in &obs.slots {
        let u = dec.apply(y)?;
        for i in 0..k {
            stats[i] += u[i].norm_sqr();
        }
    }
    Decision::from_statistics(stats, thresholds)
}

/// Linear neighbor-discovery test: node i is a neighbor when
/// |c_i^T y_sum|^2 exceeds its threshold, with the correlators drawn from a
/// matched-filter, zero-forcing, or MMOE bank.
pub fn decide_lndt(
    bank: &CorrelatorBank,
    obs: &SlotObservations,
    thresholds: &[f64],
) -> Result<Decision> {
    if obs.slots.is_empty() {
        return Err(Error::NoObservation);
    }
    let stats = (0..bank.node_count())
        .map(|i| correlate(bank.correlator(i), &obs.sum).norm_sqr())
        .collect();
    Decision::from_statistics(stats, thresholds)
}

/// c^T y for a real correlator and complex observation.
pub fn correlate(c: &DVector<f64>, y: &DVector<Complex64>) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (ci, yi) in c.iter().zip(y.iter()) {
        acc += yi * *ci;
    }
    acc
}
