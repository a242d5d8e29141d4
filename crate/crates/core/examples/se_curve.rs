//! Average SE versus pilot length for the 12 x 12 array at -20 dB, written
//! as CSV to stdout (gnuplot: `plot 'curve.csv' using 1:2, '' using 1:4`).

use rsls::harness::{run_se_curve, ScenarioConfig};

fn main() -> rsls::Result<()> {
    let cfg = ScenarioConfig::preset("scenarioA").expect("preset");
    let curve = run_se_curve(&cfg)?;
    let r = curve.recommendation;
    eprintln!(
        "exact optimum {} ({:.4}), bound optimum {}, low-SNR {}, max bound gap {:.2}% of peak",
        r.tau_opt_exact,
        r.se_at_exact,
        r.tau_opt_bound,
        r.tau_low_snr,
        100.0 * curve.max_bound_gap_relative()
    );
    curve.write_csv(std::io::stdout())
}
