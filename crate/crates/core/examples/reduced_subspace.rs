//! Rank of the reduced subspace against the eigenvalue threshold, and how
//! well it captures clustered correlation matrices.

use rsls::correlation::isotropic_correlation;
use rsls::geometry::UpaGeometry;
use rsls::harness::{Scenario, ScenarioConfig};
use rsls::rng::Domain;
use rsls::subspace::{rank_at, reduce, spectrum};

fn main() -> rsls::Result<()> {
    for (mh, spacing) in [(12, 0.25), (24, 0.125)] {
        let geom = UpaGeometry::from_wavelengths(mh, mh, spacing, 0.1)?;
        let eig = spectrum(&isotropic_correlation(&geom));
        let ranks: Vec<String> =
            [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8].iter().map(|&t| format!("{t:e}:{}", rank_at(&eig, t))).collect();
        println!("{mh}x{mh} @ {spacing} wavelengths, M = {}: {}", mh * mh, ranks.join(" "));
    }

    let cfg = ScenarioConfig::default();
    let scenario = Scenario::new(&cfg)?;
    let sub = reduce(&isotropic_correlation(&scenario.geom), cfg.rank_threshold)?;
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let r = scenario.correlation(Domain::ClusterModel, k)?;
        worst = worst.max(sub.residual_ratio(&r)?);
    }
    println!("r = {} at threshold {:e}; worst out-of-subspace residual over 20 models {worst:.2e}", sub.rank(), cfg.rank_threshold);
    Ok(())
}
