//! The three pilot-length optimizers on both arrays across SNRs, with the
//! exact-average SE lost by the low-SNR closed form.

use rsls::harness::experiments::curve_at_snr;
use rsls::harness::{run_se_curve, ScenarioConfig};

fn main() -> rsls::Result<()> {
    println!("array   SNR   r  exact  bound  tau*     low-snr loss");
    for name in ["scenarioA", "scenarioB"] {
        let cfg = ScenarioConfig { n_correlation_samples: 200, ..ScenarioConfig::preset(name).expect("preset") };
        let base = run_se_curve(&cfg)?;
        for snr in [-40.0, -30.0, -20.0, -10.0, 0.0] {
            let c = curve_at_snr(&cfg, &base.tr_r_squared, snr)?;
            let r = c.recommendation;
            println!(
                "{:>2}x{:<2} {snr:>5} {:>3} {:>6} {:>6} {:>6.1}   {:.2e}",
                cfg.mh,
                cfg.mv,
                c.link.rank,
                r.tau_opt_exact,
                r.tau_opt_bound,
                r.tau_star_low_snr,
                c.low_snr_loss()
            );
        }
    }
    Ok(())
}
