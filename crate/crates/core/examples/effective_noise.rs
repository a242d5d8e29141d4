//! Monte Carlo moments of the data-phase effective noise against their
//! closed forms on a 4 x 4 array.

use rsls::channel::{measure_effective_noise, TrialSetup};
use rsls::harness::{Scenario, ScenarioConfig};
use rsls::rng::Domain;

fn main() -> rsls::Result<()> {
    let cfg = ScenarioConfig::preset("validation").expect("preset");
    let scenario = Scenario::new(&cfg)?;
    let r = scenario.correlation(Domain::Validation, 0)?;
    let sub = scenario.subspace()?;
    let budget = cfg.link_budget_at(-10.0);
    let setup = TrialSetup { r: &r, sub: &sub, beta: budget.beta, rho: budget.rho, tau_p: 10, mode: cfg.pilot_mode };
    let report = measure_effective_noise(&setup, 200_000, cfg.seed)?;
    println!("{:<36} {:>12} {:>12} {:>9}", "term", "analytic", "empirical", "rel err");
    for rec in &report.records {
        let rel = if rec.analytic == 0.0 { rec.z_score() } else { rec.relative_error() };
        println!("{:<36} {:>12.4e} {:>12.4e} {:>9.2e}", rec.term, rec.analytic, rec.empirical, rel);
    }
    let mut csv = csv::Writer::from_writer(std::io::stdout());
    for rec in &report.records {
        csv.serialize(rec)?;
    }
    csv.flush()?;
    Ok(())
}
