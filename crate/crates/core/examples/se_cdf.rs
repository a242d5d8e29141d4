//! SE CDFs of the 24 x 24 array at -20 dB under optimized and reference
//! pilot lengths, summarized by deciles.

use rsls::harness::experiments::default_cdf_choices;
use rsls::harness::{run_cdf, ScenarioConfig};

fn main() -> rsls::Result<()> {
    let cfg = ScenarioConfig::preset("scenarioB").expect("preset");
    let res = run_cdf(&cfg, &default_cdf_choices())?;
    println!("{:<10} {:>5}  deciles 10%..90%", "choice", "tau_p");
    for s in &res.series {
        let d: Vec<String> = s.deciles().iter().map(|v| format!("{v:.3}")).collect();
        println!("{:<10} {:>5}  {}", s.label, s.tau_p, d.join(" "));
    }
    Ok(())
}
