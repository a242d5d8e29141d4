//! Scenario configuration.
//!
//! Config files are flat TOML. Every key is optional and falls back to the
//! value of [`ScenarioConfig::default`]; unknown keys are rejected.
//!
//! | key | unit | default |
//! |---|---|---|
//! | `name` | label | `"scenarioA"` |
//! | `mh`, `mv` | antennas per row / column | 12, 12 |
//! | `spacing_wl` | wavelengths | 0.25 |
//! | `wavelength_m` | metres | 0.1 |
//! | `snr_db` | dB, the product ρβ | -20 |
//! | `beta` | linear channel gain, optional | from budget |
//! | `tx_power_dbm`, `noise_dbm` | dBm | 20, -94 |
//! | `tau_c` | channel uses | 200 |
//! | `n_clusters` | count | 5 |
//! | `angle_range_deg` | degrees, nominal angles in ±range | 60 |
//! | `angular_std_deg` | degrees | 5 |
//! | `directivity` | `"cosine"` or `"isotropic"` | `"cosine"` |
//! | `n_correlation_samples` | count | 500 |
//! | `n_mc_trials` | count | 100000 |
//! | `seed` | integer below 2^63 | 1 |
//! | `rank_threshold` | relative eigenvalue cutoff | 1e-6 |
//! | `quadrature_nodes` | Gauss-Legendre nodes per axis | 200 |
//! | `reference_tau_p` | channel uses, optional | 10 below -15 dB, else 1 |
//! | `pilot_mode` | `"direct"` or `"full"` | `"direct"` |
//! | `validation_snr_db` | dB list | [-20, -10, 0] |
//! | `validation_tau_p` | channel uses list | [1, 10, 100] |
//! | `validation_tolerance` | relative | 0.02 |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::PilotMode;
use crate::correlation::Directivity;
use crate::geometry::UpaGeometry;
use crate::quadrature::Quadrature;
use crate::subspace::DEFAULT_RANK_THRESHOLD;
use crate::{Error, Result};

pub const PRESET_NAMES: [&str; 5] = ["scenarioA", "scenarioB", "scenarioC", "scenarioD", "validation"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub mh: usize,
    pub mv: usize,
    pub spacing_wl: f64,
    pub wavelength_m: f64,
    pub snr_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub tau_c: usize,
    pub n_clusters: usize,
    pub angle_range_deg: f64,
    pub angular_std_deg: f64,
    pub directivity: Directivity,
    pub n_correlation_samples: usize,
    pub n_mc_trials: usize,
    pub seed: u64,
    pub rank_threshold: f64,
    pub quadrature_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_tau_p: Option<usize>,
    pub pilot_mode: PilotMode,
    pub validation_snr_db: Vec<f64>,
    pub validation_tau_p: Vec<usize>,
    pub validation_tolerance: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenarioA".into(),
            mh: 12,
            mv: 12,
            spacing_wl: 0.25,
            wavelength_m: 0.1,
            snr_db: -20.0,
            beta: None,
            tx_power_dbm: 20.0,
            noise_dbm: -94.0,
            tau_c: 200,
            n_clusters: 5,
            angle_range_deg: 60.0,
            angular_std_deg: 5.0,
            directivity: Directivity::Cosine,
            n_correlation_samples: 500,
            n_mc_trials: 100_000,
            seed: 1,
            rank_threshold: DEFAULT_RANK_THRESHOLD,
            quadrature_nodes: 200,
            reference_tau_p: Some(10),
            pilot_mode: PilotMode::Direct,
            validation_snr_db: vec![-20.0, -10.0, 0.0],
            validation_tau_p: vec![1, 10, 100],
            validation_tolerance: 0.02,
        }
    }
}

/// Resolved `(ρ, β)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub rho: f64,
    pub beta: f64,
}

impl LinkBudget {
    pub fn snr(&self) -> f64 {
        self.rho * self.beta
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ScenarioConfig {
    /// Built-in scenarios: the two array variants at -20 and -10 dB, and a
    /// small instance for Monte Carlo validation.
    pub fn preset(name: &str) -> Option<Self> {
        let base = Self::default();
        let cfg = match name {
            "scenarioA" => base,
            "scenarioB" => Self { name: name.into(), mh: 24, mv: 24, spacing_wl: 0.125, ..base },
            "scenarioC" => Self { name: name.into(), snr_db: -10.0, reference_tau_p: Some(1), ..base },
            "scenarioD" => Self {
                name: name.into(),
                mh: 24,
                mv: 24,
                spacing_wl: 0.125,
                snr_db: -10.0,
                reference_tau_p: Some(1),
                ..base
            },
            "validation" => Self { name: name.into(), mh: 4, mv: 4, n_mc_trials: 1_000_000, ..base },
            _ => return None,
        };
        Some(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config `{}`: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// A preset name or a path to a config file. An existing file wins.
    pub fn load(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.is_file() {
            return Self::from_file(path);
        }
        if let Some(cfg) = Self::preset(spec) {
            return Ok(cfg);
        }
        Err(Error::Config(format!(
            "config file `{spec}` not found and not a preset (presets: {})",
            PRESET_NAMES.join(", ")
        )))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.mh == 0 || self.mv == 0 {
            return fail("mh and mv must be at least 1".into());
        }
        if !(self.spacing_wl > 0.0 && self.spacing_wl.is_finite()) {
            return fail(format!("spacing_wl must be positive, got {}", self.spacing_wl));
        }
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return fail(format!("wavelength_m must be positive, got {}", self.wavelength_m));
        }
        if !self.snr_db.is_finite() {
            return fail("snr_db must be finite".into());
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return fail(format!("beta must be positive, got {b}"));
            }
        }
        if !(self.tx_power_dbm.is_finite() && self.noise_dbm.is_finite()) {
            return fail("tx_power_dbm and noise_dbm must be finite".into());
        }
        if self.tau_c < 2 {
            return fail(format!("tau_c must be at least 2, got {}", self.tau_c));
        }
        if self.n_clusters == 0 || self.n_correlation_samples == 0 || self.n_mc_trials == 0 {
            return fail("n_clusters, n_correlation_samples and n_mc_trials must be at least 1".into());
        }
        if !(0.0..=90.0).contains(&self.angle_range_deg) {
            return fail(format!("angle_range_deg must lie in [0, 90], got {}", self.angle_range_deg));
        }
        if !(self.angular_std_deg > 0.0 && self.angular_std_deg.is_finite()) {
            return fail(format!("angular_std_deg must be positive, got {}", self.angular_std_deg));
        }
        if self.seed > i64::MAX as u64 {
            return fail("seed must be below 2^63".into());
        }
        if !(self.rank_threshold > 0.0 && self.rank_threshold < 1.0) {
            return fail(format!("rank_threshold must lie in (0, 1), got {}", self.rank_threshold));
        }
        Quadrature::gauss_legendre(self.quadrature_nodes).map_err(|e| Error::Config(e.to_string()))?;
        let tau_ok = |t: usize| (1..self.tau_c).contains(&t);
        if let Some(t) = self.reference_tau_p {
            if !tau_ok(t) {
                return fail(format!("reference_tau_p {t} outside [1, {}]", self.tau_c - 1));
            }
        }
        if let Some(&t) = self.validation_tau_p.iter().find(|&&t| t == 0) {
            return fail(format!("validation_tau_p entries must be at least 1, got {t}"));
        }
        if self.validation_snr_db.iter().any(|s| !s.is_finite()) {
            return fail("validation_snr_db entries must be finite".into());
        }
        if self.validation_tolerance.is_nan() || self.validation_tolerance <= 0.0 {
            return fail("validation_tolerance must be positive".into());
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<UpaGeometry> {
        UpaGeometry::from_wavelengths(self.mh, self.mv, self.spacing_wl, self.wavelength_m)
    }

    pub fn quadrature(&self) -> Result<Quadrature> {
        Quadrature::gauss_legendre(self.quadrature_nodes)
    }

    pub fn angle_range_rad(&self) -> f64 {
        self.angle_range_deg.to_radians()
    }

    pub fn angular_std_rad(&self) -> f64 {
        self.angular_std_deg.to_radians()
    }

    /// Transmit SNR `ρ` from the power budget.
    pub fn budget_rho(&self) -> f64 {
        db_to_linear(self.tx_power_dbm - self.noise_dbm)
    }

    /// `(ρ, β)` at `snr_db`. With an explicit `beta`, `ρ` follows from the SNR;
    /// otherwise `ρ` comes from the budget and `β` from the SNR.
    pub fn link_budget(&self) -> LinkBudget {
        self.link_budget_at(self.snr_db)
    }

    pub fn link_budget_at(&self, snr_db: f64) -> LinkBudget {
        let snr = db_to_linear(snr_db);
        match self.beta {
            Some(beta) => LinkBudget { rho: snr / beta, beta },
            None => {
                let rho = self.budget_rho();
                LinkBudget { rho, beta: snr / rho }
            }
        }
    }

    pub fn reference_tau(&self) -> usize {
        self.reference_tau_p.unwrap_or(if self.snr_db < -15.0 { 10 } else { 1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_scenarios() {
        for name in PRESET_NAMES {
            let cfg = ScenarioConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.tau_c, 200);
            assert_eq!(cfg.n_clusters, 5);
            assert_eq!(cfg.angle_range_deg, 60.0);
            assert_eq!(cfg.angular_std_deg, 5.0);
            assert_eq!(cfg.directivity, Directivity::Cosine);
        }
        let b = ScenarioConfig::preset("scenarioB").unwrap();
        assert_eq!((b.mh, b.mv, b.spacing_wl, b.snr_db), (24, 24, 0.125, -20.0));
        let c = ScenarioConfig::preset("scenarioC").unwrap();
        assert_eq!((c.mh, c.snr_db, c.reference_tau()), (12, -10.0, 1));
        assert_eq!(ScenarioConfig::default().reference_tau(), 10);
        assert!(ScenarioConfig::preset("nope").is_none());
    }

    #[test]
    fn budget_resolution() {
        let cfg = ScenarioConfig::default();
        let lb = cfg.link_budget();
        assert!((lb.rho - 10f64.powf(11.4)).abs() / lb.rho < 1e-12);
        assert!((lb.snr() - 0.01).abs() < 1e-15);
        let explicit = ScenarioConfig { beta: Some(1e-3), ..cfg };
        let lb = explicit.link_budget();
        assert_eq!(lb.beta, 1e-3);
        assert!((lb.rho - 10.0).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig { beta: Some(2.5e-13), seed: 77, ..ScenarioConfig::preset("scenarioD").unwrap() };
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ScenarioConfig::from_toml_str("mh = 4\nmv = 3\nsnr_db = -10.0\n").unwrap();
        assert_eq!((cfg.mh, cfg.mv, cfg.tau_c), (4, 3, 200));
    }

    #[test]
    fn bad_configs_rejected() {
        for text in [
            "unknown_key = 1",
            "tau_c = 1",
            "mh = 0",
            "n_mc_trials = 0",
            "snr_db = \"loud\"",
            "rank_threshold = 2.0",
            "quadrature_nodes = 4",
            "reference_tau_p = 200",
            "directivity = \"dipole\"",
        ] {
            assert!(matches!(ScenarioConfig::from_toml_str(text), Err(Error::Config(_))), "{text}");
        }
        assert!(ScenarioConfig::load("/definitely/not/here.toml").is_err());
    }
}
