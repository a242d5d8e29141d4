//! Uniform planar array layout and plane-wave array response vectors.
//!
//! Antennas lie in the y-z plane and are numbered row by row starting at 1:
//! antenna `m` sits at `[0, i(m)·Δ, j(m)·Δ]` with `i(m) = (m-1) mod M_H` and
//! `j(m) = floor((m-1) / M_H)`. Antenna 1 is always at the origin.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Immutable description of an `m_h × m_v` uniform planar array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaGeometry {
    m_h: usize,
    m_v: usize,
    spacing: f64,
    wavelength: f64,
}

impl UpaGeometry {
    /// `spacing` and `wavelength` are in meters.
    pub fn new(m_h: usize, m_v: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if m_h == 0 || m_v == 0 {
            return Err(Error::InvalidGeometry(format!(
                "antenna counts must be positive (m_h={m_h}, m_v={m_v})"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGeometry(format!("spacing must be positive, got {spacing}")));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        Ok(Self { m_h, m_v, spacing, wavelength })
    }

    /// Spacing given as a fraction of the wavelength (e.g. `0.25` for λ/4).
    pub fn from_wavelengths(m_h: usize, m_v: usize, spacing_wl: f64, wavelength: f64) -> Result<Self> {
        Self::new(m_h, m_v, spacing_wl * wavelength, wavelength)
    }

    pub fn m_h(&self) -> usize {
        self.m_h
    }

    pub fn m_v(&self) -> usize {
        self.m_v
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Δ/λ.
    pub fn spacing_in_wavelengths(&self) -> f64 {
        self.spacing / self.wavelength
    }

    /// Total antenna count `M = m_h · m_v`.
    pub fn antenna_count(&self) -> usize {
        self.m_h * self.m_v
    }

    /// Horizontal and vertical grid indices `(i(m), j(m))` of the 1-based antenna `m`.
    pub fn grid_index(&self, m: usize) -> Result<(usize, usize)> {
        let count = self.antenna_count();
        if m == 0 || m > count {
            return Err(Error::IndexOutOfRange { index: m, count });
        }
        Ok(self.grid_index0(m - 1))
    }

    /// Grid indices from a 0-based storage index.
    pub(crate) fn grid_index0(&self, idx: usize) -> (usize, usize) {
        (idx % self.m_h, idx / self.m_h)
    }

    /// Position in meters of the 1-based antenna `m`.
    pub fn antenna_position(&self, m: usize) -> Result<[f64; 3]> {
        let (i, j) = self.grid_index(m)?;
        Ok([0.0, i as f64 * self.spacing, j as f64 * self.spacing])
    }

    /// Positions of all antennas in storage order.
    pub fn positions(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.antenna_count()).map(move |idx| {
            let (i, j) = self.grid_index0(idx);
            [0.0, i as f64 * self.spacing, j as f64 * self.spacing]
        })
    }

    /// Aperture area in square wavelengths, `(m_h Δ/λ)·(m_v Δ/λ)`.
    pub fn aperture_area_wl2(&self) -> f64 {
        let s = self.spacing_in_wavelengths();
        (self.m_h as f64 * s) * (self.m_v as f64 * s)
    }
}

/// Plane-wave arrival direction. Both angles are in radians and restricted to
/// the front half-space `[-π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        let ok = |a: f64| a.is_finite() && (-FRAC_PI_2..=FRAC_PI_2).contains(&a);
        if !ok(azimuth) || !ok(elevation) {
            return Err(Error::InvalidDirection { azimuth, elevation });
        }
        Ok(Self { azimuth, elevation })
    }

    pub fn broadside() -> Self {
        Self { azimuth: 0.0, elevation: 0.0 }
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }
}

/// `k(φ, θ) = (2π/λ)·[cos θ cos φ, cos θ sin φ, sin θ]` in rad/m.
pub fn wave_vector(dir: Direction, wavelength: f64) -> [f64; 3] {
    let k = 2.0 * PI / wavelength;
    let (sp, cp) = dir.azimuth.sin_cos();
    let (st, ct) = dir.elevation.sin_cos();
    [k * ct * cp, k * ct * sp, k * st]
}

/// Unit-modulus response of the array to a plane wave.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayResponse(DVector<C64>);

impl ArrayResponse {
    pub fn entries(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<C64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `a(φ, θ)` with entries `exp(j kᵀ u_m)`.
pub fn array_response(geom: &UpaGeometry, dir: Direction) -> ArrayResponse {
    let k = wave_vector(dir, geom.wavelength());
    let entries = geom.positions().map(|u| {
        let phase = k[0] * u[0] + k[1] * u[1] + k[2] * u[2];
        C64::from_polar(1.0, phase)
    });
    ArrayResponse(DVector::from_iterator(geom.antenna_count(), entries))
}
