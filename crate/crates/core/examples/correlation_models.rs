//! Isotropic and clustered spatial correlation on a 12 x 12 array at λ/4.

use std::f64::consts::PI;

use rsls::correlation::{
    clustered_correlation, integrated_correlation, isotropic_correlation, sample_cluster_model, Directivity,
    IsotropicScattering,
};
use rsls::geometry::UpaGeometry;
use rsls::quadrature::Quadrature;
use rsls::rng::{stream, Domain};

fn main() -> rsls::Result<()> {
    let geom = UpaGeometry::from_wavelengths(12, 12, 0.25, 0.1)?;
    let quad = Quadrature::default();

    let closed = isotropic_correlation(&geom);
    let numeric = integrated_correlation(&geom, &IsotropicScattering, &quad)?;
    let err = (numeric.entries() - closed.entries()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    println!("isotropic: closed form vs quadrature, max entry error {err:.2e}");
    println!("isotropic: tr(R^2)/M^2 = {:.4}", closed.tr_squared() / 144f64.powi(2));

    let mut rng = stream(7, Domain::User, 0);
    for k in 0..3 {
        let model = sample_cluster_model(&mut rng, 5, PI / 3.0, 5f64.to_radians(), Directivity::Cosine)?;
        let r = clustered_correlation(&geom, &model, &quad)?;
        let top = r.eigenvalues();
        println!(
            "clustered #{k}: tr(R) = {:.6}, tr(R^2)/M^2 = {:.4}, top eigenvalues {:.2} {:.2} {:.2}",
            r.trace(),
            r.tr_squared() / 144f64.powi(2),
            top[0],
            top[1],
            top[2]
        );
    }

    let mut csv = Vec::new();
    closed.write_csv(&mut csv)?;
    println!("isotropic CSV: {} bytes, first line {:?}", csv.len(), String::from_utf8_lossy(&csv).lines().next());
    Ok(())
}
