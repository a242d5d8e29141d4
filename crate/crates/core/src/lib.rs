//! Reduced-subspace least-squares (RS-LS) channel estimation for large,
//! densely packed planar arrays, and uplink pilot-length optimization built
//! on the spectral efficiency it achieves.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: uniform planar array layout and plane-wave array responses.
//! - [`quadrature`]: tensor-product Gauss-Legendre rules over the front half-space.
//! - [`correlation`]: isotropic and cluster-scattering spatial correlation matrices.
//! - [`subspace`]: the reduced subspace spanned by the isotropic correlation matrix.
//! - [`channel`]: Monte Carlo simulation of channels, pilots, RS-LS estimates and
//!   the effective noise moments of the data phase.
//! - [`se`]: closed-form spectral efficiency, its population average, the Jensen
//!   lower bound and the pilot-length optimizers.
//! - [`harness`]: scenario configuration, experiments, CSV output and the CLI.
//!
//! ```
//! use rsls::geometry::UpaGeometry;
//! use rsls::correlation::isotropic_correlation;
//! use rsls::subspace::reduce;
//!
//! let geom = UpaGeometry::from_wavelengths(8, 8, 0.25, 0.1).unwrap();
//! let r_iso = isotropic_correlation(&geom);
//! let sub = reduce(&r_iso, 1e-6).unwrap();
//! assert!(sub.rank() < geom.antenna_count());
//! ```

pub mod channel;
pub mod correlation;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod quadrature;
pub mod rng;
pub mod se;
pub mod stats;
pub mod subspace;

pub use error::{Error, Result};

/// Complex double used for every vector and matrix entry in the crate.
pub type C64 = nalgebra::Complex<f64>;
