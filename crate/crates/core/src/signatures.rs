//! Node signatures and the linear algebra derived from them: the signature
//! matrix, its Gram matrix and pseudo-inverse, and the matched-filter,
//! zero-forcing and minimum-mean-output-energy correlator banks.
//!
//! Signatures are antipodal chip sequences scaled to unit energy. The default
//! construction assigns each target node a distinct cyclic shift of one
//! maximal-length (m-)sequence, which reproduces the -1/L cross-correlation
//! between any two signatures of a fully loaded set.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::NetworkConfig;
use crate::error::{Error, Result};

/// Relative condition-number threshold beyond which a signature matrix is
/// treated as rank deficient.
pub const RANK_CONDITION_LIMIT: f64 = 1e12;

/// Antipodal chip sequence, every element exactly -1 or +1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChipSequence {
    chips: Vec<i8>,
}

impl ChipSequence {
    /// Wrap an explicit chip vector. Errors unless every entry is +-1.
    pub fn new(chips: Vec<i8>) -> Result<Self> {
        if chips.is_empty() {
            return Err(Error::invalid("chip sequence must be nonempty"));
        }
        if chips.iter().any(|&c| c != 1 && c != -1) {
            return Err(Error::invalid("chips must be exactly -1 or +1"));
        }
        Ok(Self { chips })
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn chips(&self) -> &[i8] {
        &self.chips
    }

    /// Cyclic shift by `shift` positions: element l of the result is element
    /// (l + shift) mod L of the original.
    pub fn cyclic_shift(&self, shift: usize) -> ChipSequence {
        let l = self.chips.len();
        let chips = (0..l).map(|i| self.chips[(i + shift) % l]).collect();
        ChipSequence { chips }
    }
}

/// Feedback tap masks of primitive polynomials over GF(2) for registers of
/// degree 2 through 10. Bit j of the mask is the coefficient of x^j; the
/// leading x^m term is implicit. Callers may override with their own taps;
/// non-primitive choices are rejected by the full-period check.
const PRIMITIVE_TAPS: [(u32, u32); 9] = [
    (2, 0x3),  // x^2 + x + 1
    (3, 0x3),  // x^3 + x + 1
    (4, 0x3),  // x^4 + x + 1
    (5, 0x5),  // x^5 + x^2 + 1
    (6, 0x3),  // x^6 + x + 1
    (7, 0x9),  // x^7 + x^3 + 1
    (8, 0x1d), // x^8 + x^4 + x^3 + x^2 + 1
    (9, 0x11), // x^9 + x^4 + 1
    (10, 0x9), // x^10 + x^3 + 1
];

/// Default primitive-polynomial tap mask for a register of degree `m`.
pub fn default_taps(m: u32) -> Result<u32> {
    PRIMITIVE_TAPS
        .iter()
        .find(|&&(deg, _)| deg == m)
        .map(|&(_, taps)| taps)
        .ok_or_else(|| Error::invalid(format!("no default taps for degree {m} (have 2..=10)")))
}

/// Generate one period of a maximal-length sequence from a Fibonacci LFSR.
///
/// `taps` encodes the feedback polynomial (bit j = coefficient of x^j, x^m
/// implicit), `seed` the initial register contents. Register bits are output
/// LSB-first and mapped 0 -> +1, 1 -> -1, so the result has length 2^m - 1
/// and unnormalized periodic autocorrelation -1 at every nonzero lag.
///
/// A zero seed or taps whose orbit does not reach the full period 2^m - 1
/// (i.e. a non-primitive polynomial) are rejected.
pub fn gen_msequence(m: u32, taps: u32, seed: u32) -> Result<ChipSequence> {
    if !(2..=24).contains(&m) {
        return Err(Error::invalid(format!("degree m must be in 2..=24, got {m}")));
    }
    let mask: u32 = (1 << m) - 1;
    let start = seed & mask;
    if start == 0 {
        return Err(Error::invalid("LFSR seed must be nonzero"));
    }
    let period = 1usize << m;
    let length = period - 1;
    let mut state = start;
    let mut chips = Vec::with_capacity(length);
    for step in 0..length {
        chips.push(if state & 1 == 0 { 1 } else { -1 });
        let feedback = (state & taps & mask).count_ones() & 1;
        state = (state >> 1) | (feedback << (m - 1));
        if state == start && step + 1 != length {
            return Err(Error::invalid(format!(
                "taps 0x{taps:x} are not primitive for degree {m}: period {} < {length}",
                step + 1
            )));
        }
    }
    if state != start {
        return Err(Error::invalid(format!(
            "taps 0x{taps:x} are not primitive for degree {m}: register did not return"
        )));
    }
    Ok(ChipSequence { chips })
}

/// The L x K signature matrix together with its cached Gram algebra.
///
/// Column k (0-based) holds the signature of target node k + 1: the
/// (k + 1)-th cyclic shift of the base sequence scaled by 1/sqrt(L). Shift 0
/// is reserved for the discovering node itself, which never appears in its
/// own observations.
#[derive(Debug, Clone)]
pub struct SignatureSet {
    matrix: DMatrix<f64>,
    chips: Vec<ChipSequence>,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

impl SignatureSet {
    /// Build a signature set from arbitrary chip sequences (one per node).
    pub fn from_chips(chips: Vec<ChipSequence>) -> Result<Self> {
        if chips.is_empty() {
            return Err(Error::invalid("at least one signature is required"));
        }
        let l = chips[0].len();
        if chips.iter().any(|c| c.len() != l) {
            return Err(Error::DimensionMismatch(
                "all signatures must share the chip length".into(),
            ));
        }
        if chips.len() > l {
            return Err(Error::invalid(format!(
                "cannot place {} signatures of length {l}: rank would collapse",
                chips.len()
            )));
        }
        let k = chips.len();
        let scale = 1.0 / (l as f64).sqrt();
        let matrix = DMatrix::from_fn(l, k, |r, c| f64::from(chips[c].chips()[r]) * scale);

        // rank check via singular values
        let svd = matrix.clone().svd(false, false);
        let sv = svd.singular_values;
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 0.0) || smax / smin > RANK_CONDITION_LIMIT {
            return Err(Error::SingularMatrix(format!(
                "signature matrix is rank deficient (condition {:e})",
                if smin > 0.0 { smax / smin } else { f64::INFINITY }
            )));
        }

        let gram = matrix.transpose() * &matrix;
        let gram_inv = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularMatrix("Gram matrix is not positive definite".into()))?
            .inverse();
        Ok(Self { matrix, chips, gram, gram_inv })
    }

    /// Number of target nodes K.
    pub fn node_count(&self) -> usize {
        self.matrix.ncols()
    }

    /// Chip length L (processing gain).
    pub fn chip_length(&self) -> usize {
        self.matrix.nrows()
    }

    /// The L x K matrix with unit-norm columns.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Unit-norm signature of target node `node` (0-based).
    pub fn signature(&self, node: usize) -> DVector<f64> {
        self.matrix.column(node).into_owned()
    }

    /// Raw +-1 chips of target node `node`, before the 1/sqrt(L) scaling.
    pub fn chips(&self, node: usize) -> &ChipSequence {
        &self.chips[node]
    }

    /// Cached Gram matrix S^T S.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Cached inverse Gram matrix (S^T S)^{-1}.
    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    /// Noise-enhancement factor (S^T S)^{-1}_{ii} of target node `node`.
    pub fn noise_enhancement(&self, node: usize) -> f64 {
        self.gram_inv[(node, node)]
    }

    /// Serialize the chip matrix as CSV, one column per node, +-1 entries.
    pub fn write_chips_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        for l in 0..self.chip_length() {
            let row: Vec<String> = self
                .chips
                .iter()
                .map(|c| c.chips()[l].to_string())
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Assign `k` target nodes the cyclic shifts 1..=k of `base`, scaled to unit
/// energy. Fails if k exceeds the chip length.
pub fn build_signature_set(base: &ChipSequence, k: usize) -> Result<SignatureSet> {
    if k == 0 {
        return Err(Error::invalid("node count must be at least 1"));
    }
    if k > base.len() {
        return Err(Error::invalid(format!(
            "node count {k} exceeds chip length {}: rank would collapse",
            base.len()
        )));
    }
    let chips = (1..=k).map(|s| base.cyclic_shift(s)).collect();
    SignatureSet::from_chips(chips)
}

/// The fully loaded length-7 set used throughout the experiments: K = 6
/// targets plus the discovering node on a degree-3 m-sequence.
pub fn full_load_length7() -> SignatureSet {
    let base = gen_msequence(3, default_taps(3).unwrap(), 0b001).unwrap();
    build_signature_set(&base, 6).unwrap()
}

/// Decorrelating front end S^+ = (S^T S)^{-1} S^T.
#[derive(Debug, Clone)]
pub struct Decorrelator {
    pinv: DMatrix<f64>,
    gram_inv_diag: DVector<f64>,
}

impl Decorrelator {
    pub fn new(sigs: &SignatureSet) -> Self {
        let pinv = sigs.gram_inv() * sigs.matrix().transpose();
        let gram_inv_diag = sigs.gram_inv().diagonal();
        Self { pinv, gram_inv_diag }
    }

    /// The K x L pseudo-inverse matrix.
    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn node_count(&self) -> usize {
        self.pinv.nrows()
    }

    /// (S^T S)^{-1}_{ii}, the noise enhancement of node `node`.
    pub fn noise_enhancement(&self, node: usize) -> f64 {
        self.gram_inv_diag[node]
    }

    /// Apply S^+ to a complex observation vector.
    pub fn apply(&self, y: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if y.len() != self.pinv.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "observation has {} components, expected {}",
                y.len(),
                self.pinv.ncols()
            )));
        }
        let k = self.pinv.nrows();
        let mut out = DVector::from_element(k, Complex64::new(0.0, 0.0));
        for i in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.pinv.ncols() {
                acc += y[j] * self.pinv[(i, j)];
            }
            out[i] = acc;
        }
        Ok(out)
    }
}

/// Compute the pseudo-inverse S^+ of the signature matrix.
pub fn decorrelator(sigs: &SignatureSet) -> Decorrelator {
    Decorrelator::new(sigs)
}

/// Zero-forcing correlator of target node `node` (0-based): the projection
/// of its signature onto the orthogonal complement of all other signatures.
/// Satisfies c^T s_k = 0 for k != node and c^T s_node = 1 / (S^T S)^{-1}_{ii}.
pub fn zf_correlator(sigs: &SignatureSet, node: usize) -> Result<DVector<f64>> {
    let k = sigs.node_count();
    if node >= k {
        return Err(Error::invalid(format!(
            "node index {node} out of range for {k} nodes"
        )));
    }
    let s_i = sigs.signature(node);
    if k == 1 {
        return Ok(s_i); // nothing to project out
    }
    let l = sigs.chip_length();
    let mut others = DMatrix::zeros(l, k - 1);
    let mut col = 0;
    for j in 0..k {
        if j != node {
            others.set_column(col, &sigs.matrix().column(j));
            col += 1;
        }
    }
    let gram = others.transpose() * &others;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::SingularMatrix("interferer Gram is singular".into()))?;
    // P_i s_i = s_i - S_i (S_i^T S_i)^{-1} S_i^T s_i
    let coeffs = chol.solve(&(others.transpose() * &s_i));
    Ok(&s_i - &others * coeffs)
}

/// Minimum-mean-output-energy correlator of target node `node`, given the
/// network parameters and the sensing-slot count of the current session.
///
/// c = M_yy^{-1} s_node with M_yy = sum_k 2 sigma_k^2 E[nu_k^2] s_k s_k^T
/// + 2 N0 M0 I, where nu_k is binomial(M0, eps_k). The spectral scaling of c
/// is left unnormalized; decisions are invariant to positive scaling.
pub fn mmoe_correlator(
    sigs: &SignatureSet,
    cfg: &NetworkConfig,
    m0: usize,
    node: usize,
) -> Result<DVector<f64>> {
    let k = sigs.node_count();
    if node >= k {
        return Err(Error::invalid(format!(
            "node index {node} out of range for {k} nodes"
        )));
    }
    if cfg.node_count() != k {
        return Err(Error::DimensionMismatch(format!(
            "config has {} target nodes, signature set has {k}",
            cfg.node_count()
        )));
    }
    if m0 == 0 {
        return Err(Error::NoObservation);
    }
    let l = sigs.chip_length();
    let m0f = m0 as f64;
    let mut cov = DMatrix::<f64>::identity(l, l) * (cfg.noise_power() * m0f);
    for j in 0..k {
        let node_id = j + 1;
        let eps = cfg.epsilon(node_id);
        let nu_sq_mean = m0f * eps * (1.0 - eps) + (m0f * eps).powi(2);
        let s_j = sigs.matrix().column(j);
        let weight = cfg.fading_power(node_id) * nu_sq_mean;
        // rank-one update cov += weight * s_j s_j^T
        for r in 0..l {
            for c in 0..l {
                cov[(r, c)] += weight * s_j[r] * s_j[c];
            }
        }
    }
    let chol = cov.cholesky().ok_or_else(|| {
        Error::SingularMatrix("output covariance is singular (zero noise, deficient signal span)".into())
    })?;
    Ok(chol.solve(&sigs.signature(node)))
}

/// Which linear test the correlator bank implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelatorKind {
    MatchedFilter,
    ZeroForcing,
    Mmoe,
}

/// Per-node correlator vectors for the linear neighbor-discovery tests,
/// together with the signature Gram algebra they were derived from.
#[derive(Debug, Clone)]
pub struct CorrelatorBank {
    kind: CorrelatorKind,
    correlators: Vec<DVector<f64>>,
    gram_inv_diag: DVector<f64>,
}

impl CorrelatorBank {
    /// Matched filter: c_i is exactly signature i.
    pub fn matched(sigs: &SignatureSet) -> Self {
        let correlators = (0..sigs.node_count()).map(|i| sigs.signature(i)).collect();
        Self {
            kind: CorrelatorKind::MatchedFilter,
            correlators,
            gram_inv_diag: sigs.gram_inv().diagonal(),
        }
    }

    /// Zero-forcing bank; identical decisions to the coherent detector up to
    /// threshold scaling.
    pub fn zero_forcing(sigs: &SignatureSet) -> Result<Self> {
        let correlators = (0..sigs.node_count())
            .map(|i| zf_correlator(sigs, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: CorrelatorKind::ZeroForcing,
            correlators,
            gram_inv_diag: sigs.gram_inv().diagonal(),
        })
    }

    /// MMOE bank for a session with `m0` sensing slots.
    pub fn mmoe(sigs: &SignatureSet, cfg: &NetworkConfig, m0: usize) -> Result<Self> {
        let correlators = (0..sigs.node_count())
            .map(|i| mmoe_correlator(sigs, cfg, m0, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: CorrelatorKind::Mmoe,
            correlators,
            gram_inv_diag: sigs.gram_inv().diagonal(),
        })
    }

    pub fn kind(&self) -> CorrelatorKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.correlators.len()
    }

    pub fn correlator(&self, node: usize) -> &DVector<f64> {
        &self.correlators[node]
    }

    pub fn noise_enhancement(&self, node: usize) -> f64 {
        self.gram_inv_diag[node]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msequence_m3_matches_hand_derivation() {
        // x^3 + x + 1, register (1,0,0): bits 1,0,0,1,0,1,1 -> chips below
        let seq = gen_msequence(3, 0x3, 0b001).unwrap();
        assert_eq!(seq.chips(), &[-1, 1, 1, -1, 1, -1, -1]);
    }

    #[test]
    fn msequence_m2_has_length_3() {
        let seq = gen_msequence(2, default_taps(2).unwrap(), 1).unwrap();
        assert_eq!(seq.len(), 3);
    }

    #[test]
    fn msequence_rejects_bad_inputs() {
        assert!(gen_msequence(3, 0x3, 0).is_err());
        // x^3 + x^2 + x + 1 = (x+1)(x^2+1) is not primitive
        assert!(gen_msequence(3, 0x7, 1).is_err());
        // x^4 + x^2 + 1 = (x^2+x+1)^2 is not primitive
        assert!(gen_msequence(4, 0x5, 1).is_err());
        assert!(gen_msequence(1, 0x1, 1).is_err());
        assert!(default_taps(11).is_err());
    }

    #[test]
    fn chip_sequence_validation() {
        assert!(ChipSequence::new(vec![1, -1, 1]).is_ok());
        assert!(ChipSequence::new(vec![1, 0, 1]).is_err());
        assert!(ChipSequence::new(vec![]).is_err());
    }

    #[test]
    fn signature_set_shapes_and_norms() {
        let sigs = full_load_length7();
        assert_eq!(sigs.chip_length(), 7);
        assert_eq!(sigs.node_count(), 6);
        for i in 0..6 {
            let norm = sigs.signature(i).norm();
            assert!((norm - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn build_rejects_overload() {
        let base = gen_msequence(3, 0x3, 1).unwrap();
        assert!(build_signature_set(&base, 8).is_err());
        assert!(build_signature_set(&base, 0).is_err());
        assert!(build_signature_set(&base, 7).is_ok());
    }

    #[test]
    fn single_node_gram_is_identity() {
        let base = gen_msequence(3, 0x3, 1).unwrap();
        let sigs = build_signature_set(&base, 1).unwrap();
        assert_eq!(sigs.gram().nrows(), 1);
        assert!((sigs.gram()[(0, 0)] - 1.0).abs() < 1e-14);
        // K = 1 zero forcing degenerates to the signature itself
        let c = zf_correlator(&sigs, 0).unwrap();
        assert!((c - sigs.signature(0)).norm() < 1e-15);
    }

    #[test]
    fn duplicate_columns_are_rejected() {
        let base = gen_msequence(3, 0x3, 1).unwrap();
        let chips = vec![base.cyclic_shift(1), base.cyclic_shift(1)];
        assert!(matches!(
            SignatureSet::from_chips(chips),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn zf_index_out_of_range() {
        let sigs = full_load_length7();
        assert!(zf_correlator(&sigs, 6).is_err());
    }

    #[test]
    fn chips_csv_round_trip() {
        let sigs = full_load_length7();
        let mut buf = Vec::new();
        sigs.write_chips_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 7);
        for (l, row) in rows.iter().enumerate() {
            let cells: Vec<i8> = row.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cells.len(), 6);
            for (k, &cell) in cells.iter().enumerate() {
                assert_eq!(cell, sigs.chips(k).chips()[l]);
            }
        }
    }
}
