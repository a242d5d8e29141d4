//! Normalized spatial correlation matrices.
//!
//! Entry `(m, l)` of a correlation matrix depends only on the grid offset
//! `(i(m) - i(l), j(m) - j(l))` between the two antennas, so the numerical
//! route integrates the scattering function once per offset on a
//! [`CorrelationLattice`] and expands it into the dense matrix afterwards.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Direction, UpaGeometry};
use crate::quadrature::{AxisRule, Quadrature};
use crate::{Error, Result, C64};

/// Largest tolerated relative trace error of a numerically integrated matrix
/// before it is rescaled to `tr(R) = M`.
pub const MAX_TRACE_DEVIATION: f64 = 0.01;

/// Eigenvalues below `-PSD_CLIP * λ_max` are treated as quadrature noise and
/// clipped when a factorization is requested.
pub const PSD_CLIP: f64 = 1e-10;

/// Eigenvalues below `-PSD_TOLERANCE * λ_max` make a matrix non-PSD.
pub const PSD_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Isotropic,
    Clustered,
}

impl fmt::Display for CorrelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Isotropic => "isotropic",
            Self::Clustered => "clustered",
        })
    }
}

impl FromStr for CorrelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isotropic" => Ok(Self::Isotropic),
            "clustered" => Ok(Self::Clustered),
            other => Err(Error::InvalidParameter(format!("unknown correlation kind `{other}`"))),
        }
    }
}

/// Dense `M × M` Hermitian correlation matrix normalized to `tr(R) = M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<C64>,
    geom: UpaGeometry,
    kind: CorrelationKind,
}

impl CorrelationMatrix {
    /// Wraps an existing matrix. Only the shape and Hermitian symmetry are
    /// checked here; [`validate`](Self::validate) checks the rest.
    pub fn from_entries(entries: DMatrix<C64>, geom: UpaGeometry, kind: CorrelationKind) -> Result<Self> {
        let m = geom.antenna_count();
        if entries.nrows() != m || entries.ncols() != m {
            return Err(Error::DimensionMismatch { expected: m, got: entries.nrows() });
        }
        let out = Self { entries, geom, kind };
        let defect = out.hermitian_defect();
        if defect > 1e-10 {
            return Err(Error::NotHermitian(defect));
        }
        Ok(out)
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn geometry(&self) -> &UpaGeometry {
        &self.geom
    }

    pub fn kind(&self) -> CorrelationKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    /// `tr(R²) = Σ |R_ml|²` for Hermitian `R`.
    pub fn tr_squared(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for c in 0..n {
            for r in c..n {
                worst = worst.max((self.entries[(r, c)] - self.entries[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Whether every entry has a negligible imaginary part.
    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im.abs() <= 1e-14 * z.norm().max(1.0))
    }

    /// Eigen-decomposition, eigenvalues in descending order.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        hermitian_eigen(&self.entries)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    /// Checks Hermitian symmetry, the trace normalization and positive
    /// semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        let defect = self.hermitian_defect();
        if defect > 1e-10 {
            return Err(Error::NotHermitian(defect));
        }
        let m = self.dim() as f64;
        let dev = (self.trace() - m).abs() / m;
        if dev > 1e-8 {
            return Err(Error::Accuracy { deviation: dev });
        }
        let eig = self.eigenvalues();
        let (max, min) = (eig[0], *eig.last().unwrap());
        if min < -PSD_TOLERANCE * max {
            return Err(Error::NotPositiveSemidefinite { min, max });
        }
        Ok(())
    }

    /// Hermitian square root `R^{1/2}`, with eigenvalues in
    /// `[-PSD_TOLERANCE·λ_max, PSD_CLIP·λ_max)` clipped to zero.
    pub fn sqrt_factor(&self) -> Result<DMatrix<C64>> {
        let (eig, vecs) = self.eigen();
        let max = eig[0];
        let min = *eig.last().unwrap();
        if min < -PSD_TOLERANCE * max {
            return Err(Error::NotPositiveSemidefinite { min, max });
        }
        let n = self.dim();
        let mut scaled = vecs.clone();
        for (k, &lam) in eig.iter().enumerate() {
            let s = if lam < PSD_CLIP * max { 0.0 } else { lam.sqrt() };
            scaled.column_mut(k).scale_mut(s);
        }
        let out = &scaled * vecs.adjoint();
        debug_assert_eq!(out.nrows(), n);
        Ok(out)
    }

    /// Writes the matrix as CSV: two `#` header lines carrying the schema
    /// version and the geometry, then one row per antenna with real and
    /// imaginary parts interleaved.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let g = &self.geom;
        writeln!(out, "# rsls-correlation v1")?;
        writeln!(
            out,
            "# m_h={} m_v={} spacing_m={} wavelength_m={} kind={}",
            g.m_h(),
            g.m_v(),
            g.spacing(),
            g.wavelength(),
            self.kind
        )?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        let n = self.dim();
        let mut row = Vec::with_capacity(2 * n);
        for r in 0..n {
            row.clear();
            for c in 0..n {
                let z = self.entries[(r, c)];
                row.push(z.re.to_string());
                row.push(z.im.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        if line.trim() != "# rsls-correlation v1" {
            return Err(Error::MatrixFormat(format!("unexpected schema line `{}`", line.trim())));
        }
        line.clear();
        reader.read_line(&mut line)?;
        let header = line
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::MatrixFormat("missing geometry header".into()))?;
        let mut m_h = None;
        let mut m_v = None;
        let mut spacing = None;
        let mut wavelength = None;
        let mut kind = None;
        for kv in header.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::MatrixFormat(format!("bad header field `{kv}`")))?;
            let bad = |_| Error::MatrixFormat(format!("bad value for `{k}`: `{v}`"));
            match k {
                "m_h" => m_h = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "m_v" => m_v = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "spacing_m" => spacing = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "wavelength_m" => wavelength = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "kind" => kind = Some(v.parse::<CorrelationKind>()?),
                _ => return Err(Error::MatrixFormat(format!("unknown header field `{k}`"))),
            }
        }
        let missing = |name: &str| Error::MatrixFormat(format!("header lacks `{name}`"));
        let geom = UpaGeometry::new(
            m_h.ok_or_else(|| missing("m_h"))?,
            m_v.ok_or_else(|| missing("m_v"))?,
            spacing.ok_or_else(|| missing("spacing_m"))?,
            wavelength.ok_or_else(|| missing("wavelength_m"))?,
        )?;
        let kind = kind.ok_or_else(|| missing("kind"))?;

        let n = geom.antenna_count();
        let mut entries = DMatrix::<C64>::zeros(n, n);
        let mut rows = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut count = 0;
        for (r, rec) in rows.records().enumerate() {
            let rec = rec?;
            if r >= n || rec.len() != 2 * n {
                return Err(Error::MatrixFormat(format!("row {r} has {} fields, expected {}", rec.len(), 2 * n)));
            }
            for c in 0..n {
                let parse = |s: &str| {
                    s.trim().parse::<f64>().map_err(|e| Error::MatrixFormat(format!("row {r}: {e}")))
                };
                entries[(r, c)] = C64::new(parse(&rec[2 * c])?, parse(&rec[2 * c + 1])?);
            }
            count += 1;
        }
        if count != n {
            return Err(Error::MatrixFormat(format!("found {count} rows, expected {n}")));
        }
        Self::from_entries(entries, geom, kind)
    }
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Real-valued input goes through the real symmetric solver.
pub(crate) fn hermitian_eigen(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.nrows();
    let real = a.iter().all(|z| z.im.abs() <= 1e-14 * z.norm().max(1.0));
    let (values, vectors): (Vec<f64>, DMatrix<C64>) = if real {
        let sym = DMatrix::from_fn(n, n, |r, c| 0.5 * (a[(r, c)].re + a[(c, r)].re));
        let eig = SymmetricEigen::new(sym);
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let herm = DMatrix::from_fn(n, n, |r, c| (a[(r, c)] + a[(c, r)].conj()) * 0.5);
        let eig = SymmetricEigen::new(herm);
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    (sorted_values, sorted_vectors)
}

/// `sinc(x) = sin(πx)/(πx)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Closed-form correlation under isotropic scattering with isotropic antennas:
/// `[R_iso]_{m,l} = sinc(2·sqrt(d_H² + d_V²))` with offsets in wavelengths.
pub fn isotropic_correlation(geom: &UpaGeometry) -> CorrelationMatrix {
    let n = geom.antenna_count();
    let s = geom.spacing_in_wavelengths();
    let entries = DMatrix::from_fn(n, n, |r, c| {
        let (ir, jr) = geom.grid_index0(r);
        let (ic, jc) = geom.grid_index0(c);
        let dh = (ir as f64 - ic as f64) * s;
        let dv = (jr as f64 - jc as f64) * s;
        C64::new(sinc(2.0 * dh.hypot(dv)), 0.0)
    });
    CorrelationMatrix { entries, geom: *geom, kind: CorrelationKind::Isotropic }
}

/// A normalized spatial scattering function `f(φ, θ)` over `[-π/2, π/2]²`.
pub trait ScatteringFunction: Sync {
    fn density(&self, dir: Direction) -> f64;

    fn kind(&self) -> CorrelationKind;

    /// Density on the tensor grid of `rule`, laid out `[theta][phi]`.
    fn density_grid(&self, rule: &AxisRule) -> Vec<f64> {
        let mut out = Vec::with_capacity(rule.len() * rule.len());
        for &theta in &rule.nodes {
            for &phi in &rule.nodes {
                out.push(self.density(Direction::new(phi, theta).expect("quadrature nodes lie in range")));
            }
        }
        out
    }
}

/// Uniform scattering from the whole front half-space seen by isotropic
/// antennas: `f = cos θ / (2π)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IsotropicScattering;

impl ScatteringFunction for IsotropicScattering {
    fn density(&self, dir: Direction) -> f64 {
        dir.elevation().cos() / (2.0 * PI)
    }

    fn kind(&self) -> CorrelationKind {
        CorrelationKind::Isotropic
    }
}

/// Element gain pattern folded into the scattering function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Directivity {
    /// Unit gain in every direction.
    Isotropic,
    /// `cos φ · cos θ`.
    Cosine,
}

impl Directivity {
    fn axis_gain(&self, angle: f64) -> f64 {
        match self {
            Self::Isotropic => 1.0,
            Self::Cosine => angle.cos(),
        }
    }

    pub fn gain(&self, dir: Direction) -> f64 {
        self.axis_gain(dir.azimuth()) * self.axis_gain(dir.elevation())
    }
}

impl FromStr for Directivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isotropic" => Ok(Self::Isotropic),
            "cosine" => Ok(Self::Cosine),
            other => Err(Error::InvalidParameter(format!("unknown directivity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub weight: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

/// Mixture of truncated Gaussian clusters in `(φ, θ)` with a common angular
/// spread, multiplied by the element gain and renormalized to unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterScattering {
    clusters: Vec<Cluster>,
    angular_std: f64,
    directivity: Directivity,
    // weight_k / (Z_k · C): Z_k truncates cluster k to the square, C absorbs the gain.
    coefficients: Vec<f64>,
}

impl ClusterScattering {
    pub fn new(clusters: Vec<Cluster>, angular_std: f64, directivity: Directivity) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::InvalidParameter("at least one cluster is required".into()));
        }
        if !(angular_std.is_finite() && angular_std > 0.0) {
            return Err(Error::InvalidParameter(format!("angular std must be positive, got {angular_std}")));
        }
        let total: f64 = clusters.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 || clusters.iter().any(|c| c.weight.is_nan() || c.weight < 0.0) {
            return Err(Error::InvalidParameter(format!("cluster weights must be nonnegative and sum to 1 (sum {total})")));
        }
        for c in &clusters {
            Direction::new(c.azimuth, c.elevation)?;
        }

        let gauss = |x: f64, mu: f64| (-(x - mu) * (x - mu) / (2.0 * angular_std * angular_std)).exp();
        let mut mass_with_gain = 0.0;
        let mut trunc = Vec::with_capacity(clusters.len());
        for c in &clusters {
            let z_phi = local_integral(c.azimuth, angular_std, |x| gauss(x, c.azimuth));
            let z_theta = local_integral(c.elevation, angular_std, |x| gauss(x, c.elevation));
            let g_phi = local_integral(c.azimuth, angular_std, |x| gauss(x, c.azimuth) * directivity.axis_gain(x));
            let g_theta =
                local_integral(c.elevation, angular_std, |x| gauss(x, c.elevation) * directivity.axis_gain(x));
            let z = z_phi * z_theta;
            trunc.push(z);
            mass_with_gain += c.weight * g_phi * g_theta / z;
        }
        let coefficients = clusters.iter().zip(&trunc).map(|(c, z)| c.weight / (z * mass_with_gain)).collect();
        Ok(Self { clusters, angular_std, directivity, coefficients })
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn angular_std(&self) -> f64 {
        self.angular_std
    }

    pub fn directivity(&self) -> Directivity {
        self.directivity
    }

    fn axis_factor(&self, x: f64, mu: f64) -> f64 {
        let s = self.angular_std;
        (-(x - mu) * (x - mu) / (2.0 * s * s)).exp()
    }
}

/// Integral of a function concentrated around `center` (spread `std`) over the
/// part of `[-π/2, π/2]` within ten spreads of the center.
fn local_integral(center: f64, std: f64, f: impl Fn(f64) -> f64) -> f64 {
    const PANELS: usize = 16;
    let lo = (center - 10.0 * std).max(-FRAC_PI_2);
    let hi = (center + 10.0 * std).min(FRAC_PI_2);
    if hi <= lo {
        return 0.0;
    }
    let rule = AxisRule::half_space(16);
    let width = (hi - lo) / PANELS as f64;
    let mut total = 0.0;
    for p in 0..PANELS {
        let a = lo + p as f64 * width;
        let mid = a + 0.5 * width;
        let scale = width / PI;
        total += rule.integrate(|x| f(mid + x * scale)) * scale;
    }
    total
}

impl ScatteringFunction for ClusterScattering {
    fn density(&self, dir: Direction) -> f64 {
        let (phi, theta) = (dir.azimuth(), dir.elevation());
        let mix: f64 = self
            .clusters
            .iter()
            .zip(&self.coefficients)
            .map(|(c, k)| k * self.axis_factor(phi, c.azimuth) * self.axis_factor(theta, c.elevation))
            .sum();
        mix * self.directivity.gain(dir)
    }

    fn kind(&self) -> CorrelationKind {
        CorrelationKind::Clustered
    }

    fn density_grid(&self, rule: &AxisRule) -> Vec<f64> {
        let n = rule.len();
        let axis = |mu: f64| -> Vec<f64> { rule.nodes.iter().map(|&x| self.axis_factor(x, mu)).collect() };
        let phi_tabs: Vec<Vec<f64>> = self.clusters.iter().map(|c| axis(c.azimuth)).collect();
        let theta_tabs: Vec<Vec<f64>> = self.clusters.iter().map(|c| axis(c.elevation)).collect();
        let gains: Vec<f64> = rule.nodes.iter().map(|&x| self.directivity.axis_gain(x)).collect();
        let mut out = vec![0.0; n * n];
        for (k, coef) in self.coefficients.iter().copied().enumerate() {
            for t in 0..n {
                let ct = coef * theta_tabs[k][t];
                if ct == 0.0 {
                    continue;
                }
                let row = &mut out[t * n..(t + 1) * n];
                for (p, v) in row.iter_mut().enumerate() {
                    *v += ct * phi_tabs[k][p];
                }
            }
        }
        for t in 0..n {
            for p in 0..n {
                out[t * n + p] *= gains[t] * gains[p];
            }
        }
        out
    }
}

/// Free-function form of [`ClusterScattering::density`].
pub fn scattering_density(model: &ClusterScattering, dir: Direction) -> f64 {
    model.density(dir)
}

/// Draws a random cluster model: weights uniform on `[0, 1]` normalized by
/// their sum, nominal angles uniform on `[-angle_range, angle_range]`.
pub fn sample_cluster_model<R: Rng + ?Sized>(
    rng: &mut R,
    n_clusters: usize,
    angle_range: f64,
    angular_std: f64,
    directivity: Directivity,
) -> Result<ClusterScattering> {
    if n_clusters == 0 {
        return Err(Error::InvalidParameter("n_clusters must be at least 1".into()));
    }
    if !(angle_range.is_finite() && (0.0..=FRAC_PI_2).contains(&angle_range)) {
        return Err(Error::InvalidParameter(format!("angle range must lie in [0, pi/2], got {angle_range}")));
    }
    let mut raw: Vec<(f64, f64, f64)> = (0..n_clusters)
        .map(|_| {
            let w: f64 = rng.random();
            let az = rng.random_range(-angle_range..=angle_range);
            let el = rng.random_range(-angle_range..=angle_range);
            (w, az, el)
        })
        .collect();
    let mut total: f64 = raw.iter().map(|c| c.0).sum();
    if total <= 0.0 {
        // every power drew exactly zero; fall back to equal powers
        raw.iter_mut().for_each(|c| c.0 = 1.0);
        total = n_clusters as f64;
    }
    let mut clusters: Vec<Cluster> =
        raw.into_iter().map(|(w, azimuth, elevation)| Cluster { weight: w / total, azimuth, elevation }).collect();
    // absorb rounding so the weights sum to one within 1e-12
    let drift: f64 = 1.0 - clusters.iter().map(|c| c.weight).sum::<f64>();
    if let Some(c) = clusters.iter_mut().max_by(|a, b| a.weight.total_cmp(&b.weight)) {
        c.weight += drift;
    }
    ClusterScattering::new(clusters, angular_std, directivity)
}

/// Correlation values indexed by the grid offset `(a, b) = (i(m)-i(l), j(m)-j(l))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationLattice {
    geom: UpaGeometry,
    kind: CorrelationKind,
    values: Vec<C64>,
    trace_deviation: f64,
}

impl CorrelationLattice {
    fn width(&self) -> usize {
        2 * self.geom.m_h() - 1
    }

    fn slot(&self, a: isize, b: isize) -> usize {
        let a0 = (a + self.geom.m_h() as isize - 1) as usize;
        let b0 = (b + self.geom.m_v() as isize - 1) as usize;
        a0 + b0 * self.width()
    }

    /// Correlation between two antennas whose grid offset is `(a, b)`.
    pub fn at(&self, a: isize, b: isize) -> C64 {
        self.values[self.slot(a, b)]
    }

    pub fn geometry(&self) -> &UpaGeometry {
        &self.geom
    }

    /// Relative trace error of the raw quadrature result, before rescaling.
    pub fn trace_deviation(&self) -> f64 {
        self.trace_deviation
    }

    /// `tr(R²)` from offset multiplicities, without forming the matrix.
    pub fn tr_squared(&self) -> f64 {
        let (mh, mv) = (self.geom.m_h() as isize, self.geom.m_v() as isize);
        let mut total = 0.0;
        for b in -(mv - 1)..mv {
            for a in -(mh - 1)..mh {
                let mult = ((mh - a.abs()) * (mv - b.abs())) as f64;
                total += mult * self.at(a, b).norm_sqr();
            }
        }
        total
    }

    pub fn to_matrix(&self) -> CorrelationMatrix {
        let n = self.geom.antenna_count();
        let entries = DMatrix::from_fn(n, n, |r, c| {
            let (ir, jr) = self.geom.grid_index0(r);
            let (ic, jc) = self.geom.grid_index0(c);
            self.at(ir as isize - ic as isize, jr as isize - jc as isize)
        });
        let entries = (&entries + entries.adjoint()) * C64::new(0.5, 0.0);
        CorrelationMatrix { entries, geom: self.geom, kind: self.kind }
    }
}

/// Integrates `f(φ,θ)·exp(j2π(d_H sin φ cos θ + d_V sin θ))` over the front
/// half-space for every antenna offset, then rescales so the diagonal is one.
pub fn correlation_lattice(
    geom: &UpaGeometry,
    scattering: &dyn ScatteringFunction,
    quad: &Quadrature,
) -> Result<CorrelationLattice> {
    let rule = quad.axis_rule();
    let n = rule.len();
    let (mh, mv) = (geom.m_h(), geom.m_v());
    let s = geom.spacing_in_wavelengths();
    let f = scattering.density_grid(&rule);

    // inner[t][a] = Σ_φ w_φ f(φ, θ_t) exp(j2π a s sin φ cos θ_t), a = 0..mh
    let inner: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|t| {
            let cos_t = rule.nodes[t].cos();
            let mut acc = vec![C64::new(0.0, 0.0); mh];
            for p in 0..n {
                let wf = rule.weights[p] * f[t * n + p];
                if wf == 0.0 {
                    continue;
                }
                let z = C64::from_polar(1.0, 2.0 * PI * s * rule.nodes[p].sin() * cos_t);
                let mut zp = C64::new(wf, 0.0);
                for slot in acc.iter_mut() {
                    *slot += zp;
                    zp *= z;
                }
            }
            acc
        })
        .collect();

    // vertical phase powers v_t^b, b = 0..mv
    let vpow: Vec<Vec<C64>> = rule
        .nodes
        .iter()
        .map(|&theta| {
            let v = C64::from_polar(1.0, 2.0 * PI * s * theta.sin());
            let mut out = Vec::with_capacity(mv);
            let mut vp = C64::new(1.0, 0.0);
            for _ in 0..mv {
                out.push(vp);
                vp *= v;
            }
            out
        })
        .collect();

    let width = 2 * mh - 1;
    let height = 2 * mv - 1;
    let mut values = vec![C64::new(0.0, 0.0); width * height];
    let mut lattice = CorrelationLattice { geom: *geom, kind: scattering.kind(), values: Vec::new(), trace_deviation: 0.0 };
    for bi in 0..height {
        let b = bi as isize - (mv as isize - 1);
        for ai in 0..width {
            let a = ai as isize - (mh as isize - 1);
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..n {
                let g = inner[t][a.unsigned_abs()];
                let g = if a < 0 { g.conj() } else { g };
                let v = vpow[t][b.unsigned_abs()];
                let v = if b < 0 { v.conj() } else { v };
                acc += g * v * rule.weights[t];
            }
            values[ai + bi * width] = acc;
        }
    }
    lattice.values = values;

    let diag = lattice.at(0, 0).re;
    let deviation = (diag - 1.0).abs();
    if !deviation.is_finite() || deviation > MAX_TRACE_DEVIATION {
        return Err(Error::Accuracy { deviation });
    }
    let scale = 1.0 / diag;
    lattice.values.iter_mut().for_each(|z| *z *= scale);
    lattice.trace_deviation = deviation;
    Ok(lattice)
}

/// Numerically integrated correlation matrix for an arbitrary scattering function.
pub fn integrated_correlation(
    geom: &UpaGeometry,
    scattering: &dyn ScatteringFunction,
    quad: &Quadrature,
) -> Result<CorrelationMatrix> {
    Ok(correlation_lattice(geom, scattering, quad)?.to_matrix())
}

/// Correlation matrix of a cluster-scattering model.
pub fn clustered_correlation(
    geom: &UpaGeometry,
    model: &ClusterScattering,
    quad: &Quadrature,
) -> Result<CorrelationMatrix> {
    integrated_correlation(geom, model, quad)
}
