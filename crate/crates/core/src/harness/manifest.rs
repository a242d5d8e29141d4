//! Jobs and run manifests.
//!
//! Each run is described by a [`Job`] plus a fully resolved
//! [`ScenarioConfig`]. The manifest written next to the output records both,
//! together with the output schema, so [`replay`] regenerates the output
//! byte for byte.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::experiments::{
    default_cdf_choices, optimize_summary, run_cdf, run_se_curve, run_validation, Scenario, TauChoice,
    CDF_COLUMNS, SENSITIVITY_THRESHOLDS, SE_CURVE_COLUMNS, VALIDATION_COLUMNS,
};
use crate::correlation::{isotropic_correlation, CorrelationKind};
use crate::rng::Domain;
use crate::subspace::rank_at;
use crate::{Error, Result};

pub const TOOL_NAME: &str = "rsls";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    /// Isotropic matrix or the `sample`-th clustered matrix of the scenario.
    Correlation { kind: CorrelationKind, sample: u64 },
    Rank,
    SeCurve,
    Optimize,
    /// Default choices plus extra fixed pilot lengths.
    Cdf { extra_tau_p: Vec<usize> },
    Validate,
}

impl Job {
    pub fn command(&self) -> &'static str {
        match self {
            Self::Correlation { .. } => "correlation",
            Self::Rank => "rank",
            Self::SeCurve => "se-curve",
            Self::Optimize => "optimize",
            Self::Cdf { .. } => "cdf",
            Self::Validate => "validate",
        }
    }

    /// Schema tag and columns of the output file.
    pub fn schema(&self) -> (&'static str, Vec<String>) {
        let cols = |c: &[&str]| c.iter().map(|s| s.to_string()).collect();
        match self {
            Self::Correlation { .. } => {
                ("rsls-correlation/v1", vec!["re(R[m,1])".into(), "im(R[m,1])".into(), "...".into()])
            }
            Self::Rank => ("rsls-rank/v1", cols(&["threshold", "rank"])),
            Self::SeCurve => ("rsls-se-curve/v1", cols(&SE_CURVE_COLUMNS)),
            Self::Optimize => ("rsls-optimize/v1", cols(&["key", "value"])),
            Self::Cdf { .. } => ("rsls-cdf/v1", cols(&CDF_COLUMNS)),
            Self::Validate => ("rsls-validate/v1", cols(&VALIDATION_COLUMNS)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub csv_schema: String,
    pub columns: Vec<String>,
    pub output: PathBuf,
    pub job: Job,
    pub scenario: ScenarioConfig,
}

impl Manifest {
    pub fn new(job: Job, scenario: ScenarioConfig, output: PathBuf) -> Self {
        let (schema, columns) = job.schema();
        Self {
            tool: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            csv_schema: schema.into(),
            columns,
            output,
            job,
            scenario,
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        m.scenario.validate()?;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read manifest `{}`: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

/// `out.csv` → `out.manifest.toml`.
pub fn default_manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.toml")
}

/// What a job reports besides its output file.
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutcome {
    pub summary: String,
    pub validation_passed: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs a job; when `output` is given the result is written there.
pub fn execute(job: &Job, cfg: &ScenarioConfig, output: Option<&Path>) -> Result<JobOutcome> {
    cfg.validate()?;
    let need_output = || output.ok_or_else(|| Error::Config(format!("`{}` requires an output path", job.command())));
    let mut validation_passed = true;
    let summary = match job {
        Job::Correlation { kind, sample } => {
            let out = need_output()?;
            let geom = cfg.geometry()?;
            let r = match kind {
                CorrelationKind::Isotropic => isotropic_correlation(&geom),
                CorrelationKind::Clustered => Scenario::new(cfg)?.correlation(Domain::ClusterModel, *sample)?,
            };
            r.write_csv(create(out)?)?;
            format!("M = {}\nkind = {kind}\ntrace = {}\ntr_r_squared = {}\n", r.dim(), r.trace(), r.tr_squared())
        }
        Job::Rank => {
            let scenario = Scenario::new(cfg)?;
            let mut thresholds = SENSITIVITY_THRESHOLDS.to_vec();
            thresholds.push(cfg.rank_threshold);
            thresholds.sort_by(|a, b| b.total_cmp(a));
            thresholds.dedup();
            if let Some(out) = output {
                let mut w = csv::Writer::from_writer(create(out)?);
                w.write_record(["threshold", "rank"])?;
                for &t in &thresholds {
                    w.write_record([t.to_string(), rank_at(&scenario.spectrum, t).max(1).to_string()])?;
                }
                w.flush()?;
            }
            let mut s = format!("M = {}\nr = {} (threshold {:e})\n", scenario.antennas(), scenario.rank, cfg.rank_threshold);
            for &t in &thresholds {
                s.push_str(&format!("  threshold {t:e}: r = {}\n", rank_at(&scenario.spectrum, t).max(1)));
            }
            s
        }
        Job::SeCurve => {
            let out = need_output()?;
            let curve = run_se_curve(cfg)?;
            curve.write_csv(create(out)?)?;
            let r = &curve.recommendation;
            format!(
                "M = {}\nr = {}\ntau_opt_exact = {}\ntau_opt_bound = {}\ntau_low_snr = {}\n",
                curve.link.antennas, curve.link.rank, r.tau_opt_exact, r.tau_opt_bound, r.tau_low_snr
            )
        }
        Job::Optimize => {
            let out = need_output()?;
            let curve = run_se_curve(cfg)?;
            let text = optimize_summary(cfg, &curve)?;
            std::fs::write(out, &text)?;
            text
        }
        Job::Cdf { extra_tau_p } => {
            let out = need_output()?;
            let mut choices = default_cdf_choices();
            choices.extend(extra_tau_p.iter().map(|&t| TauChoice::Fixed(t)));
            let res = run_cdf(cfg, &choices)?;
            res.write_csv(create(out)?)?;
            let mut s = String::new();
            for series in &res.series {
                let d = series.deciles().map(|v| format!("{v:.4}"));
                s.push_str(&format!("{} (tau_p = {}): deciles {}\n", series.label, series.tau_p, d.join(" ")));
            }
            s
        }
        Job::Validate => {
            let out = need_output()?;
            let rep = run_validation(cfg)?;
            rep.write_csv(create(out)?)?;
            validation_passed = rep.passed();
            let mut s = format!("M = {}\nr = {}\n", rep.antennas, rep.rank);
            for c in &rep.cases {
                let ok = c.pass.iter().all(|&p| p);
                s.push_str(&format!("snr {} dB, tau_p {}: {}\n", c.snr_db, c.tau_p, if ok { "pass" } else { "FAIL" }));
            }
            for sl in &rep.slopes {
                s.push_str(&format!(
                    "snr {} dB: penalty slope {:.4}: {}\n",
                    sl.snr_db,
                    sl.slope,
                    if sl.pass { "pass" } else { "FAIL" }
                ));
            }
            for f in rep.failures() {
                s.push_str(&format!("failure: {f}\n"));
            }
            s
        }
    };
    Ok(JobOutcome { summary, validation_passed })
}

/// Runs a job, writes its output and the manifest, and returns the outcome.
pub fn execute_recorded(job: &Job, cfg: &ScenarioConfig, output: &Path, manifest: Option<&Path>) -> Result<JobOutcome> {
    let outcome = execute(job, cfg, Some(output))?;
    let path = manifest.map(Path::to_path_buf).unwrap_or_else(|| default_manifest_path(output));
    Manifest::new(job.clone(), cfg.clone(), output.to_path_buf()).write(&path)?;
    Ok(outcome)
}

/// Re-runs a manifest, writing to `output` instead of the recorded path.
pub fn replay(manifest: &Manifest, output: &Path) -> Result<JobOutcome> {
    execute(&manifest.job, &manifest.scenario, Some(output))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let jobs = [
            Job::Correlation { kind: CorrelationKind::Clustered, sample: 3 },
            Job::Rank,
            Job::SeCurve,
            Job::Optimize,
            Job::Cdf { extra_tau_p: vec![2, 5] },
            Job::Validate,
        ];
        for job in jobs {
            let m = Manifest::new(job, ScenarioConfig::preset("scenarioB").unwrap(), "out.csv".into());
            let text = m.to_toml_string().unwrap();
            assert_eq!(Manifest::from_toml_str(&text).unwrap(), m, "{text}");
        }
    }

    #[test]
    fn manifest_path_convention() {
        assert_eq!(default_manifest_path(Path::new("a/curve.csv")), PathBuf::from("a/curve.manifest.toml"));
    }

    #[test]
    fn output_required() {
        let cfg = ScenarioConfig { mh: 2, mv: 2, ..Default::default() };
        assert!(matches!(execute(&Job::SeCurve, &cfg, None), Err(Error::Config(_))));
        let rank = execute(&Job::Rank, &cfg, None).unwrap();
        assert!(rank.summary.starts_with("M = 4\n"));
    }
}
