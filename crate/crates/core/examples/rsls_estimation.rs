//! One channel draw, a noisy pilot, and the RS-LS estimate compared with
//! plain least squares.

use rsls::channel::{rs_ls_estimate, simulate_pilot, ChannelSampler, PilotMode};
use rsls::correlation::isotropic_correlation;
use rsls::harness::{Scenario, ScenarioConfig};
use rsls::rng::{stream, Domain};
use rsls::subspace::reduce;

fn main() -> rsls::Result<()> {
    let cfg = ScenarioConfig::preset("scenarioB").expect("preset");
    let scenario = Scenario::new(&cfg)?;
    let r = scenario.correlation(Domain::ClusterModel, 0)?;
    let sub = reduce(&isotropic_correlation(&scenario.geom), cfg.rank_threshold)?;
    let (beta, rho) = (1.0, 0.01);
    let sampler = ChannelSampler::new(&r, beta)?;
    let mut rng = stream(cfg.seed, Domain::User, 0);

    println!("M = {}, r = {}, SNR = {} dB", r.dim(), sub.rank(), 10.0 * (rho * beta).log10());
    println!("tau_p  LS error/‖h‖²  RS-LS error/‖h‖²  predicted RS-LS");
    for tau_p in [1, 4, 16, 64] {
        let h = sampler.sample(&mut rng);
        let obs = simulate_pilot(&h, rho, tau_p, PilotMode::Full, &mut rng)?;
        let ls = &obs.y_pilot / rsls::C64::new((rho * tau_p as f64).sqrt(), 0.0);
        let est = rs_ls_estimate(&obs, &sub)?;
        let gain = h.h.norm_squared();
        let predicted = sub.rank() as f64 / (rho * tau_p as f64) / (beta * r.dim() as f64);
        println!(
            "{tau_p:>5}  {:>14.3}  {:>16.3}  {:>15.3}",
            (&ls - &h.h).norm_squared() / gain,
            est.error(&h).norm_squared() / gain,
            predicted
        );
    }
    Ok(())
}
