//! Command-line interface.
//!
//! ```text
//! rsls correlation --config scenarioA --kind clustered --sample 0 --out r.csv
//! rsls rank --mh 24 --mv 24 --spacing-wl 0.125
//! rsls se-curve --config scenarioA --out curve.csv
//! rsls optimize --config scenarioB --out summary.toml
//! rsls cdf --config scenarioB --tau-p 5,20 --out cdf.csv
//! rsls validate --config validation --out moments.csv
//! rsls replay curve.manifest.toml --out again.csv
//! rsls show-config --config scenarioD
//! ```
//!
//! `--config` takes a TOML file or a preset name (`scenarioA`..`scenarioD`,
//! `validation`); flags override individual keys. Every command that writes
//! an output also writes `<out>.manifest.toml` unless `--manifest` is given.
//!
//! Exit codes: [`EXIT_OK`], [`EXIT_USAGE`] (bad arguments, config or I/O),
//! [`EXIT_ACCURACY`] (quadrature or factorization accuracy failure),
//! [`EXIT_VALIDATION`] (a Monte Carlo term out of tolerance).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::ScenarioConfig;
use super::manifest::{default_manifest_path, execute, execute_recorded, replay, Job, JobOutcome, Manifest};
use crate::channel::PilotMode;
use crate::correlation::{CorrelationKind, Directivity};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ACCURACY: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rsls", version, about = "RS-LS channel estimation and pilot-length optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the isotropic or a sampled clustered correlation matrix.
    Correlation {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "clustered")]
        kind: CorrelationKind,
        /// Index of the sampled cluster model.
        #[arg(long, default_value_t = 0)]
        sample: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Report the reduced-subspace rank against the eigenvalue threshold.
    Rank {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, requires = "out")]
        manifest: Option<PathBuf>,
    },
    /// Average SE, lower bound and low-SNR approximation for every pilot length.
    SeCurve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Key-value summary of the three pilot-length optimizers.
    Optimize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Empirical SE CDFs at the optimized, low-SNR and reference pilot lengths.
    Cdf {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Extra fixed pilot lengths, comma separated.
        #[arg(long = "tau-p", value_delimiter = ',')]
        tau_p: Vec<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo check of the effective-noise closed form.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Re-run a recorded manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the resolved scenario as TOML.
    ShowConfig {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long)]
    out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest.toml`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// TOML config file or preset name.
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    mh: Option<usize>,
    #[arg(long)]
    mv: Option<usize>,
    #[arg(long)]
    spacing_wl: Option<f64>,
    #[arg(long)]
    wavelength_m: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tau_c: Option<usize>,
    #[arg(long)]
    n_clusters: Option<usize>,
    #[arg(long)]
    directivity: Option<Directivity>,
    #[arg(long)]
    n_correlation_samples: Option<usize>,
    #[arg(long)]
    n_mc_trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rank_threshold: Option<f64>,
    #[arg(long)]
    quadrature_nodes: Option<usize>,
    #[arg(long)]
    reference_tau_p: Option<usize>,
    #[arg(long)]
    pilot_mode: Option<CliPilotMode>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum CliPilotMode {
    Direct,
    Full,
}

impl ScenarioArgs {
    fn resolve(&self) -> crate::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(spec) => ScenarioConfig::load(spec)?,
            None => ScenarioConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$( if let Some(v) = self.$field { cfg.$field = v; } )*};
        }
        set!(mh, mv, spacing_wl, wavelength_m, snr_db, tau_c, n_clusters, directivity);
        set!(n_correlation_samples, n_mc_trials, seed, rank_threshold, quadrature_nodes);
        if self.beta.is_some() {
            cfg.beta = self.beta;
        }
        if self.reference_tau_p.is_some() {
            cfg.reference_tau_p = self.reference_tau_p;
        }
        if let Some(m) = self.pilot_mode {
            cfg.pilot_mode = match m {
                CliPilotMode::Direct => PilotMode::Direct,
                CliPilotMode::Full => PilotMode::Full,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Accuracy { .. } | Error::NotPositiveSemidefinite { .. } | Error::NotHermitian(_) | Error::Certificate(_) => {
            EXIT_ACCURACY
        }
        _ => EXIT_USAGE,
    }
}

fn finish(result: crate::Result<JobOutcome>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match result {
        Ok(outcome) => {
            let _ = stdout.write_all(outcome.summary.as_bytes());
            if outcome.validation_passed {
                EXIT_OK
            } else {
                let _ = writeln!(stderr, "error: validation failed");
                EXIT_VALIDATION
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let recorded = |job: Job, scenario: &ScenarioArgs, output: &OutputArgs| {
        scenario.resolve().and_then(|cfg| execute_recorded(&job, &cfg, &output.out, output.manifest.as_deref()))
    };
    let result = match &cli.command {
        Command::Correlation { scenario, kind, sample, output } => {
            recorded(Job::Correlation { kind: *kind, sample: *sample }, scenario, output)
        }
        Command::Rank { scenario, out, manifest } => scenario.resolve().and_then(|cfg| match out {
            Some(out) => execute_recorded(&Job::Rank, &cfg, out, manifest.as_deref()),
            None => execute(&Job::Rank, &cfg, None),
        }),
        Command::SeCurve { scenario, output } => recorded(Job::SeCurve, scenario, output),
        Command::Optimize { scenario, output } => recorded(Job::Optimize, scenario, output),
        Command::Cdf { scenario, tau_p, output } => recorded(Job::Cdf { extra_tau_p: tau_p.clone() }, scenario, output),
        Command::Validate { scenario, output } => recorded(Job::Validate, scenario, output),
        Command::Replay { manifest, out } => Manifest::read(manifest).and_then(|m| {
            let outcome = replay(&m, out)?;
            Manifest { output: out.clone(), ..m }.write(&default_manifest_path(out))?;
            Ok(outcome)
        }),
        Command::ShowConfig { scenario } => scenario
            .resolve()
            .and_then(|cfg| cfg.to_toml_string())
            .map(|summary| JobOutcome { summary, validation_passed: true }),
    };
    finish(result, stdout, stderr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("rsls").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_capture(&[]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["se-curve"]).0, EXIT_USAGE);
        let (code, _, err) = run_capture(&["se-curve", "--config", "/no/such/file.toml", "--out", "x.csv"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("not found"), "{err}");
        assert_eq!(run_capture(&["rank", "--tau-c", "1"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn overrides_apply() {
        let (code, out, _) =
            run_capture(&["show-config", "--config", "scenarioB", "--snr-db", "-30", "--seed", "9", "--pilot-mode", "full"]);
        assert_eq!(code, EXIT_OK);
        let cfg = ScenarioConfig::from_toml_str(&out).unwrap();
        assert_eq!((cfg.mh, cfg.snr_db, cfg.seed, cfg.pilot_mode), (24, -30.0, 9, PilotMode::Full));
    }

    #[test]
    fn rank_small_array() {
        let (code, out, _) = run_capture(&["rank", "--mh", "4", "--mv", "4", "--spacing-wl", "0.5"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("M = 16\nr = 16"), "{out}");
    }

    #[test]
    fn accuracy_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.csv");
        let (code, _, err) = run_capture(&[
            "correlation",
            "--mh",
            "16",
            "--mv",
            "16",
            "--spacing-wl",
            "2.0",
            "--quadrature-nodes",
            "8",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_ACCURACY, "{err}");
    }
}
