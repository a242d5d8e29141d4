use std::fs;
use std::path::Path;

use rsls::correlation::CorrelationMatrix;
use rsls::harness::cli::{run, EXIT_ACCURACY, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};
use rsls::harness::{Manifest, ScenarioConfig};

fn rsls(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("rsls").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn se_curve_header_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "curve.csv");
    let (code, stdout, err) = rsls(&["se-curve", "--config", "scenarioA", "--out", &out]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(stdout.contains("tau_opt_exact"));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "tau_p,se_exact_avg,se_exact_stderr,se_lower_bound,se_low_snr_approx");
    assert_eq!(lines.count(), 199);

    let manifest = Manifest::read(&dir.path().join("curve.manifest.toml")).unwrap();
    assert_eq!(manifest.job.command(), "se-curve");
    assert_eq!(manifest.csv_schema, "rsls-se-curve/v1");
    assert_eq!(manifest.scenario, ScenarioConfig::preset("scenarioA").unwrap());
}

#[test]
fn rank_of_dense_array() {
    let (code, stdout, _) = rsls(&["rank", "--mh", "24", "--mv", "24", "--spacing-wl", "0.125"]);
    assert_eq!(code, EXIT_OK);
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), "M = 576");
    let r: usize = lines.next().unwrap().strip_prefix("r = ").unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!(r < 576 && r > 0);
}

#[test]
fn rank_table_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "rank.csv");
    assert_eq!(rsls(&["rank", "--mh", "12", "--mv", "12", "--out", &out]).0, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "threshold,rank");
    let ranks: Vec<usize> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(ranks.windows(2).all(|w| w[0] <= w[1]), "{ranks:?}");
}

#[test]
fn missing_config_is_usage_error() {
    let (code, _, err) = rsls(&["optimize", "--config", "does/not/exist.toml", "--out", "x.toml"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.starts_with("error:"));
}

#[test]
fn malformed_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "mh = 4\ncolour = \"blue\"\n").unwrap();
    let out = path(dir.path(), "x.csv");
    let (code, _, err) = rsls(&["se-curve", "--config", cfg.to_str().unwrap(), "--out", &out]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("colour"), "{err}");
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, "name = \"small\"\nmh = 4\nmv = 4\nn_correlation_samples = 5\nquadrature_nodes = 64\n").unwrap();
    let out = path(dir.path(), "opt.toml");
    let (code, _, err) = rsls(&["optimize", "--config", cfg.to_str().unwrap(), "--snr-db", "-10", "--out", &out]);
    assert_eq!(code, EXIT_OK, "{err}");
    let summary: toml::Table = toml::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(summary["antennas"].as_integer(), Some(16));
    assert_eq!(summary["snr_db"].as_float(), Some(-10.0));
    let manifest = Manifest::read(&dir.path().join("opt.manifest.toml")).unwrap();
    assert_eq!(manifest.scenario.snr_db, -10.0);
    assert_eq!(manifest.scenario.n_correlation_samples, 5);
}

#[test]
fn correlation_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["isotropic", "clustered"] {
        let out = path(dir.path(), &format!("{kind}.csv"));
        let (code, _, err) = rsls(&["correlation", "--mh", "5", "--mv", "3", "--kind", kind, "--out", &out]);
        assert_eq!(code, EXIT_OK, "{err}");
        let r = CorrelationMatrix::read_csv(fs::File::open(&out).unwrap()).unwrap();
        assert_eq!(r.dim(), 15);
        assert_eq!(r.kind().to_string(), kind);
        r.validate().unwrap();
    }
}

#[test]
fn validation_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.toml");
    fs::write(
        &cfg,
        "mh = 2\nmv = 2\nn_mc_trials = 2000\nvalidation_snr_db = [0.0]\nvalidation_tau_p = [1]\nvalidation_tolerance = 1e-9\n",
    )
    .unwrap();
    let out = path(dir.path(), "v.csv");
    let (code, stdout, _) = rsls(&["validate", "--config", cfg.to_str().unwrap(), "--out", &out]);
    assert_eq!(code, EXIT_VALIDATION);
    assert!(stdout.contains("FAIL"));
    assert!(fs::read_to_string(&out).unwrap().contains(",false"));
}

#[test]
fn accuracy_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "c.csv");
    let (code, _, _) = rsls(&["se-curve", "--mh", "4", "--mv", "4", "--quadrature-nodes", "8", "--out", &out]);
    assert_eq!(code, EXIT_ACCURACY);
}

#[test]
fn replay_reproduces_bytes_and_rejects_bad_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "cdf.csv");
    let args = ["cdf", "--mh", "6", "--mv", "6", "--n-correlation-samples", "40", "--tau-p", "2,7", "--out", &out];
    assert_eq!(rsls(&args).0, EXIT_OK);
    let again = path(dir.path(), "again.csv");
    let manifest = path(dir.path(), "cdf.manifest.toml");
    assert_eq!(rsls(&["replay", &manifest, "--out", &again]).0, EXIT_OK);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
    let labels: std::collections::BTreeSet<String> =
        fs::read_to_string(&out).unwrap().lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(labels.len(), 6, "{labels:?}");

    let broken = path(dir.path(), "broken.toml");
    fs::write(&broken, "tool = \"rsls\"\n").unwrap();
    assert_eq!(rsls(&["replay", &broken, "--out", &again]).0, EXIT_USAGE);
}
