//! Experiment configuration: a versioned JSON file format, command-line
//! overrides, and the stable hash that ties every output row back to the
//! exact settings that produced it.

use ndsim_core::analysis::DetectorKind;
use ndsim_core::channel::{median_tau_a, NetworkConfig};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Scalar applied to every node, or one value per node.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerNode {
    fn resolve(&self, count: usize, name: &str) -> Result<Vec<f64>, String> {
        match self {
            PerNode::Uniform(v) => Ok(vec![*v; count]),
            PerNode::Each(vs) => {
                if vs.len() == count {
                    Ok(vs.clone())
                } else {
                    Err(format!("{name} needs {count} entries, got {}", vs.len()))
                }
            }
        }
    }
}

/// Network section of the configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSection {
    /// Target-node count K (the discovering node is extra).
    pub k: usize,
    /// Slots per discovery session.
    pub n: usize,
    /// Activity factors for nodes 0..=K.
    pub epsilon: PerNode,
    /// Mean received powers 2 sigma^2 for nodes 1..=K.
    pub fading_power: PerNode,
    /// Complex noise variance 2 N0.
    pub noise_power: f64,
    /// Activity threshold; omitted means the fading-amplitude median.
    #[serde(default)]
    pub tau_a: Option<f64>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            k: 6,
            n: 100,
            epsilon: PerNode::Uniform(0.5),
            fading_power: PerNode::Uniform(1.0),
            noise_power: 1.0,
            tau_a: None,
        }
    }
}

/// Run section of the configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSection {
    pub seed: u64,
    pub trials: usize,
    /// Detector labels (mf, zf-cd, mmoe, id).
    pub detectors: Vec<String>,
    /// SNR_1 grid in dB for the sweep and comparison experiments.
    #[serde(default)]
    pub snr_db: Option<Vec<f64>>,
    /// Session lengths for the convergence experiment.
    #[serde(default)]
    pub slots: Option<Vec<usize>>,
    /// Points per threshold grid.
    pub tau_points: usize,
    /// Threshold bracket around the asymptotic rule, as factors.
    pub tau_lo_factor: f64,
    pub tau_hi_factor: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0x6e64_7369,
            trials: 20_000,
            detectors: vec!["mf".into(), "zf-cd".into(), "mmoe".into(), "id".into()],
            snr_db: None,
            slots: None,
            tau_points: 21,
            tau_lo_factor: 0.05,
            tau_hi_factor: 20.0,
        }
    }
}

/// On-disk configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileConfig {
    #[serde(default = "schema_default")]
    pub schema_version: u32,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub run: RunSection,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            network: NetworkSection::default(),
            run: RunSection::default(),
        }
    }
}

fn schema_default() -> u32 {
    SCHEMA_VERSION
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub detectors: Option<Vec<String>>,
    pub snr_db: Option<Vec<f64>>,
    pub slots: Option<Vec<usize>>,
}

/// Fully resolved settings plus their stable hash.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub network: NetworkSection,
    pub run: RunSection,
    pub detectors: Vec<DetectorKind>,
    pub config_hash: String,
}

impl Resolved {
    pub fn from_parts(mut file: FileConfig, overrides: &Overrides) -> Result<Self, String> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            ));
        }
        if let Some(seed) = overrides.seed {
            file.run.seed = seed;
        }
        if let Some(trials) = overrides.trials {
            file.run.trials = trials;
        }
        if let Some(dets) = &overrides.detectors {
            file.run.detectors = dets.clone();
        }
        if let Some(snr) = &overrides.snr_db {
            file.run.snr_db = Some(snr.clone());
        }
        if let Some(slots) = &overrides.slots {
            file.run.slots = Some(slots.clone());
        }
        if file.run.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        if file.run.detectors.is_empty() {
            return Err("at least one detector is required".into());
        }
        let detectors = file
            .run
            .detectors
            .iter()
            .map(|s| DetectorKind::parse(s).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        // canonical serialization of the resolved settings
        let canonical = serde_json::to_string(&file).map_err(|e| e.to_string())?;
        let config_hash = format!("{:016x}", fnv1a64(canonical.as_bytes()));
        Ok(Self {
            network: file.network,
            run: file.run,
            detectors,
            config_hash,
        })
    }

    /// Instantiate the network at its configured size.
    pub fn network_config(&self) -> Result<NetworkConfig, String> {
        self.network_config_with(self.network.n, self.network.noise_power)
    }

    /// Instantiate the network with a different session length or noise
    /// level (the sweep experiments vary those along their grids).
    pub fn network_config_with(&self, n: usize, noise_power: f64) -> Result<NetworkConfig, String> {
        let k = self.network.k;
        let epsilon = self.network.epsilon.resolve(k + 1, "epsilon")?;
        let fading = self.network.fading_power.resolve(k, "fading_power")?;
        let tau_a = self.network.tau_a.unwrap_or_else(|| median_tau_a(fading[0]));
        NetworkConfig::new(n, epsilon, fading, noise_power, tau_a).map_err(|e| e.to_string())
    }

    /// The JSON echo stored in the manifest.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "network": self.network,
            "run": self.run,
        })
    }
}

/// Stable 64-bit FNV-1a over the canonical configuration bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let r = Resolved::from_parts(FileConfig::default(), &Overrides::default()).unwrap();
        assert_eq!(r.network.k, 6);
        assert_eq!(r.detectors.len(), 4);
        let cfg = r.network_config().unwrap();
        assert_eq!(cfg.session_slots(), 100);
        // median threshold at unit power
        assert!((cfg.tau_a().powi(2) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn overrides_change_hash() {
        let a = Resolved::from_parts(FileConfig::default(), &Overrides::default()).unwrap();
        let b = Resolved::from_parts(
            FileConfig::default(),
            &Overrides {
                seed: Some(7),
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(a.config_hash, b.config_hash);
        // resolution is deterministic
        let c = Resolved::from_parts(FileConfig::default(), &Overrides::default()).unwrap();
        assert_eq!(a.config_hash, c.config_hash);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let mut f = FileConfig::default();
        f.run.detectors = vec!["bogus".into()];
        assert!(Resolved::from_parts(f, &Overrides::default()).is_err());

        let mut f = FileConfig::default();
        f.schema_version = 99;
        assert!(Resolved::from_parts(f, &Overrides::default()).is_err());

        let mut f = FileConfig::default();
        f.network.epsilon = PerNode::Each(vec![0.5; 3]); // wrong length for k=6
        let r = Resolved::from_parts(f, &Overrides::default()).unwrap();
        assert!(r.network_config().is_err());
    }
}
