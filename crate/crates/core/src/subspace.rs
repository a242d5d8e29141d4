//! The reduced subspace: dominant eigenvectors of the isotropic correlation
//! matrix, which span every correlation matrix the array geometry admits.

use nalgebra::{DMatrix, DVector};

use crate::correlation::CorrelationMatrix;
use crate::geometry::UpaGeometry;
use crate::{Error, Result, C64};

/// Relative eigenvalue cutoff used when nothing else is configured.
pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-6;

/// Orthonormal basis `U1` (M × r) of the reduced subspace and its eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSubspace {
    basis: DMatrix<C64>,
    eigenvalues: Vec<f64>,
    threshold: f64,
    source_geom: UpaGeometry,
}

/// Descending eigenvalues of a correlation matrix.
pub fn spectrum(r: &CorrelationMatrix) -> Vec<f64> {
    r.eigenvalues()
}

/// Number of eigenvalues above `threshold · λ_max` in a descending spectrum.
pub fn rank_at(eigenvalues: &[f64], threshold: f64) -> usize {
    let Some(&max) = eigenvalues.first() else { return 0 };
    eigenvalues.iter().take_while(|&&l| l > threshold * max).count()
}

/// Builds `U1` from the eigenvectors of `r_iso` whose eigenvalues exceed
/// `threshold · λ_max`.
///
/// Columns are ordered by descending eigenvalue. Each column is rotated so its
/// largest-magnitude entry (first one on ties) is real and positive.
pub fn reduce(r_iso: &CorrelationMatrix, threshold: f64) -> Result<ReducedSubspace> {
    if !(threshold.is_finite() && threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!("rank threshold must lie in (0, 1), got {threshold}")));
    }
    let defect = r_iso.hermitian_defect();
    if defect > 1e-10 {
        return Err(Error::NotHermitian(defect));
    }
    let (values, vectors) = r_iso.eigen();
    let r = rank_at(&values, threshold).max(1);
    let m = r_iso.dim();
    let mut basis = vectors.columns(0, r).into_owned();
    for mut col in basis.column_iter_mut() {
        let peak = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let pivot = col.iter().find(|z| z.norm() >= peak * (1.0 - 1e-9)).copied().unwrap_or(C64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        for z in col.iter_mut() {
            *z *= phase;
        }
    }
    debug_assert_eq!(basis.nrows(), m);
    Ok(ReducedSubspace { basis, eigenvalues: values[..r].to_vec(), threshold, source_geom: *r_iso.geometry() })
}

impl ReducedSubspace {
    pub fn basis(&self) -> &DMatrix<C64> {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn geometry(&self) -> &UpaGeometry {
        &self.source_geom
    }

    /// Dense projector `U1 U1ᴴ`.
    pub fn projector(&self) -> DMatrix<C64> {
        &self.basis * self.basis.adjoint()
    }

    /// `U1 (U1ᴴ v)`.
    pub fn project(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        let coeffs = self.basis.ad_mul(v);
        Ok(&self.basis * coeffs)
    }

    fn check_geometry(&self, r: &CorrelationMatrix) -> Result<()> {
        if r.geometry() != &self.source_geom {
            return Err(Error::GeometryMismatch);
        }
        Ok(())
    }

    /// `‖(I − U1U1ᴴ) R‖_F / ‖R‖_F`.
    pub fn residual_ratio(&self, r: &CorrelationMatrix) -> Result<f64> {
        self.check_geometry(r)?;
        let inside = &self.basis * self.basis.ad_mul(r.entries());
        let outside = r.entries() - inside;
        Ok(outside.norm() / r.entries().norm())
    }

    /// `tr(U1U1ᴴ R)`, computed as `Σ_k u_kᴴ R u_k`.
    pub fn captured_trace(&self, r: &CorrelationMatrix) -> Result<f64> {
        self.check_geometry(r)?;
        let ru = r.entries() * &self.basis;
        Ok(self.basis.iter().zip(ru.iter()).map(|(u, v)| (u.conj() * v).re).sum())
    }
}

/// Whether `R` lies in the span of `U1` up to a relative Frobenius residual `tol`.
pub fn subspace_contains(sub: &ReducedSubspace, r: &CorrelationMatrix, tol: f64) -> Result<bool> {
    Ok(sub.residual_ratio(r)? < tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{clustered_correlation, isotropic_correlation, sample_cluster_model, CorrelationKind, Directivity};
    use crate::quadrature::Quadrature;
    use crate::rng::{complex_normal, stream, Domain};
    use std::f64::consts::PI;

    fn geom(mh: usize, mv: usize, s: f64) -> UpaGeometry {
        UpaGeometry::from_wavelengths(mh, mv, s, 0.1).unwrap()
    }

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn single_antenna() {
        let g = geom(1, 1, 0.25);
        let sub = reduce(&isotropic_correlation(&g), DEFAULT_RANK_THRESHOLD).unwrap();
        assert_eq!(sub.rank(), 1);
        assert!((sub.basis()[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn half_wavelength_ula_is_full_rank() {
        let g = geom(9, 1, 0.5);
        let r = isotropic_correlation(&g);
        let off = r.entries() - DMatrix::<C64>::identity(9, 9);
        assert!(max_abs(&off) < 1e-15);
        assert_eq!(reduce(&r, DEFAULT_RANK_THRESHOLD).unwrap().rank(), 9);
    }

    #[test]
    fn rank_matches_independent_count() {
        let g = geom(12, 12, 0.25);
        let r = isotropic_correlation(&g);
        let sub = reduce(&r, 1e-5).unwrap();
        // oracle: real symmetric eigenvalues directly from nalgebra, unsorted
        let real = r.entries().map(|z| z.re);
        let eig = nalgebra::SymmetricEigen::new(real).eigenvalues;
        let max = eig.iter().copied().fold(f64::MIN, f64::max);
        let count = eig.iter().filter(|&&l| l > 1e-5 * max).count();
        assert_eq!(sub.rank(), count);
        assert!(sub.rank() * 10 < 144 * 6, "rank {}", sub.rank());
        // order of magnitude of the asymptotic degrees of freedom π·A/λ²
        let dof = PI * g.aperture_area_wl2();
        assert!((sub.rank() as f64) > dof && (sub.rank() as f64) < 4.0 * dof);
    }

    #[test]
    fn basis_is_orthonormal_and_projector_idempotent() {
        let sub = reduce(&isotropic_correlation(&geom(8, 6, 0.25)), DEFAULT_RANK_THRESHOLD).unwrap();
        let gram = sub.basis().ad_mul(sub.basis());
        assert!(max_abs(&(gram - DMatrix::identity(sub.rank(), sub.rank()))) < 1e-10);
        let p = sub.projector();
        assert!(max_abs(&(&p * &p - &p)) < 1e-9);
        assert!(max_abs(&(p.adjoint() - &p)) < 1e-12);
        assert!(sub.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        assert!(sub.eigenvalues().iter().all(|&l| l > 0.0));
    }

    #[test]
    fn phase_convention_pins_largest_entry() {
        let sub = reduce(&isotropic_correlation(&geom(5, 5, 0.3)), DEFAULT_RANK_THRESHOLD).unwrap();
        for col in sub.basis().column_iter() {
            let peak = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let pivot = col.iter().find(|z| z.norm() >= peak * (1.0 - 1e-9)).unwrap();
            assert!(pivot.re > 0.0 && pivot.im.abs() < 1e-15);
        }
    }

    #[test]
    fn projection_examples() {
        let sub = reduce(&isotropic_correlation(&geom(6, 6, 0.25)), DEFAULT_RANK_THRESHOLD).unwrap();
        let mut rng = stream(1, Domain::User, 0);
        let coeffs = DVector::from_fn(sub.rank(), |_, _| complex_normal(&mut rng));
        let inside = sub.basis() * coeffs;
        assert!((sub.project(&inside).unwrap() - &inside).norm() < 1e-9 * inside.norm());

        let v = DVector::from_fn(36, |_, _| complex_normal(&mut rng));
        let pv = sub.project(&v).unwrap();
        let orth = &v - &pv;
        assert!(sub.project(&orth).unwrap().norm() < 1e-9);
        assert!(pv.norm() <= v.norm());
        assert!((orth.norm_squared() + pv.norm_squared() - v.norm_squared()).abs() < 1e-9);
        assert!((sub.project(&pv).unwrap() - &pv).norm() < 1e-9);

        assert!(matches!(sub.project(&DVector::zeros(5)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn span_checks() {
        let g = geom(8, 8, 0.25);
        let r_iso = isotropic_correlation(&g);
        let sub = reduce(&r_iso, DEFAULT_RANK_THRESHOLD).unwrap();
        assert!(sub.rank() < 64);
        assert!(subspace_contains(&sub, &r_iso, 1e-6).unwrap());

        let eye = CorrelationMatrix::from_entries(DMatrix::identity(64, 64), g, CorrelationKind::Clustered).unwrap();
        assert!(!subspace_contains(&sub, &eye, 1e-3).unwrap());

        let mut rng = stream(8, Domain::User, 0);
        let model = sample_cluster_model(&mut rng, 5, PI / 3.0, 5f64.to_radians(), Directivity::Cosine).unwrap();
        let r = clustered_correlation(&g, &model, &Quadrature::default()).unwrap();
        assert!(subspace_contains(&sub, &r, 1e-3).unwrap());
        assert!((sub.captured_trace(&r).unwrap() - 64.0).abs() < 0.064);

        let other = CorrelationMatrix::from_entries(DMatrix::identity(16, 16), geom(4, 4, 0.25), CorrelationKind::Clustered)
            .unwrap();
        assert!(matches!(subspace_contains(&sub, &other, 1e-3), Err(Error::GeometryMismatch)));
    }

    #[test]
    fn non_hermitian_input_rejected() {
        let g = geom(2, 1, 0.25);
        let r = isotropic_correlation(&g);
        let mut bad = r.entries().clone();
        bad[(0, 1)] = C64::new(0.3, 0.2);
        assert!(CorrelationMatrix::from_entries(bad, g, CorrelationKind::Isotropic).is_err());
        assert!(reduce(&r, 0.0).is_err());
        assert!(reduce(&r, 1.5).is_err());
    }

    #[test]
    fn denser_array_same_aperture_has_similar_rank() {
        let coarse = reduce(&isotropic_correlation(&geom(12, 12, 0.25)), DEFAULT_RANK_THRESHOLD).unwrap();
        let dense = reduce(&isotropic_correlation(&geom(24, 24, 0.125)), DEFAULT_RANK_THRESHOLD).unwrap();
        assert!(dense.rank() < 576);
        let rel = (dense.rank() as f64 - coarse.rank() as f64).abs() / coarse.rank() as f64;
        assert!(rel < 0.25, "{} vs {}", dense.rank(), coarse.rank());
    }
}
