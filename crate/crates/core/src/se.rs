//! Spectral efficiency with RS-LS estimation and pilot-length optimization.
//!
//! Per UE, the achievable SE is
//!
//! ```text
//! SE = (τ_c − τ_p)/τ_c · log2(1 + ρM²β² / (ρβ²tr(R²) + Mβ + (Mβ + r/ρ)/τ_p))
//! ```
//!
//! Averaged over a population of correlation matrices it depends only on the
//! distribution of `tr(R²)`. Moving the expectation inside the logarithm gives
//! a lower bound `(τ_c − τ_p)/τ_c · log2(1 + 1/(A + B/τ_p))` that is strictly
//! concave in `τ_p`.

use std::f64::consts::{LN_2, LOG2_E};

use serde::Serialize;

use crate::stats::RunningMean;
use crate::{Error, Result};

/// Link-level constants shared by every UE of a population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkParams {
    /// Antenna count `M`.
    pub antennas: usize,
    /// Reduced-subspace rank `r`.
    pub rank: usize,
    /// Channel gain `β` (linear).
    pub beta: f64,
    /// Uplink SNR `ρ` (linear).
    pub rho: f64,
    /// Channel uses per coherence block.
    pub tau_c: usize,
}

impl LinkParams {
    pub fn new(antennas: usize, rank: usize, beta: f64, rho: f64, tau_c: usize) -> Result<Self> {
        if antennas == 0 || rank == 0 || rank > antennas {
            return Err(Error::InvalidParameter(format!("need 1 <= r <= M (r={rank}, M={antennas})")));
        }
        if !(beta > 0.0 && beta.is_finite() && rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta and rho must be positive (beta={beta}, rho={rho})")));
        }
        if tau_c < 2 {
            return Err(Error::InvalidParameter(format!("tau_c must be at least 2, got {tau_c}")));
        }
        Ok(Self { antennas, rank, beta, rho, tau_c })
    }

    /// Receive SNR `ρβ`.
    pub fn snr(&self) -> f64 {
        self.rho * self.beta
    }

    pub fn check_tau_p(&self, tau_p: usize) -> Result<()> {
        check_tau_p(tau_p, self.tau_c)
    }

    /// `E{|υ|²} = ρβ²tr(R²) + Mβ + (Mβ + r/ρ)/τ_p`.
    pub fn effective_noise_variance(&self, tr_r_squared: f64, tau_p: f64) -> f64 {
        let m = self.antennas as f64;
        let (b, rho) = (self.beta, self.rho);
        rho * b * b * tr_r_squared + m * b + (m * b + self.rank as f64 / rho) / tau_p
    }

    /// Effective SINR `ρM²β² / E{|υ|²}`.
    pub fn sinr(&self, tr_r_squared: f64, tau_p: f64) -> f64 {
        let m = self.antennas as f64;
        self.rho * m * m * self.beta * self.beta / self.effective_noise_variance(tr_r_squared, tau_p)
    }

    /// SE at a real-valued pilot length, without range checks.
    pub fn se_continuous(&self, tr_r_squared: f64, tau_p: f64) -> f64 {
        let tau_c = self.tau_c as f64;
        (tau_c - tau_p) / tau_c * (1.0 + self.sinr(tr_r_squared, tau_p)).log2()
    }
}

fn check_tau_p(tau_p: usize, tau_c: usize) -> Result<()> {
    if tau_p == 0 || tau_p + 1 > tau_c {
        return Err(Error::PilotLengthOutOfRange { tau_p, max: tau_c.saturating_sub(1) });
    }
    Ok(())
}

/// Achievable SE of one UE whose correlation matrix has the given `tr(R²)`.
pub fn se_lemma1(link: &LinkParams, tr_r_squared: f64, tau_p: usize) -> Result<f64> {
    link.check_tau_p(tau_p)?;
    Ok(link.se_continuous(tr_r_squared, tau_p as f64))
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Population-average SE, estimated by the sample mean over `tr(R²)` samples.
pub fn average_se_exact(tr_r_squared_samples: &[f64], link: &LinkParams, tau_p: usize) -> Result<Estimate> {
    if tr_r_squared_samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    link.check_tau_p(tau_p)?;
    let acc: RunningMean =
        tr_r_squared_samples.iter().map(|&t| link.se_continuous(t, tau_p as f64)).collect();
    Ok(Estimate { mean: acc.mean(), stderr: acc.stderr() })
}

/// Constants of the lower bound, independent of `τ_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbConstants {
    pub a: f64,
    pub b: f64,
}

/// `A = E{tr(R²)}/M² + 1/(ρMβ)`, `B = (M/β + r/(ρβ²))/(ρM²)`.
pub fn ab_constants(mean_tr_r_squared: f64, antennas: usize, rank: usize, beta: f64, rho: f64) -> Result<AbConstants> {
    if !(mean_tr_r_squared > 0.0 && beta > 0.0 && rho > 0.0) || antennas == 0 || rank == 0 {
        return Err(Error::InvalidParameter("A/B constants need positive inputs".into()));
    }
    let m = antennas as f64;
    let r = rank as f64;
    let a = mean_tr_r_squared / (m * m) + 1.0 / (rho * m * beta);
    let b = (m / beta + r / (rho * beta * beta)) / (rho * m * m);
    AbConstants::new(a, b)
}

impl AbConstants {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("A and B must be positive (A={a}, B={b})")));
        }
        Ok(Self { a, b })
    }

    /// Lower bound at a real-valued pilot length. Zero at `τ_p = 0` and `τ_p = τ_c`.
    pub fn lower_bound_at(&self, tau_p: f64, tau_c: f64) -> f64 {
        if tau_p <= 0.0 {
            return 0.0;
        }
        (tau_c - tau_p) / tau_c * (1.0 + 1.0 / (self.a + self.b / tau_p)).log2()
    }

    /// Linearized objective `log2(e)·(τ_c − τ_p)/τ_c · 1/(A + B/τ_p)`.
    pub fn low_snr_objective(&self, tau_p: f64, tau_c: f64) -> f64 {
        if tau_p <= 0.0 {
            return 0.0;
        }
        LOG2_E * (tau_c - tau_p) / tau_c / (self.a + self.b / tau_p)
    }

    /// Closed-form second derivative of the lower bound with respect to `τ_p`.
    pub fn second_derivative(&self, tau_p: f64, tau_c: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        let num = b
            * (((2.0 * a * a + 2.0 * a) * tau_c + (2.0 * a + 1.0) * b) * tau_p
                + (2.0 * a + 1.0) * b * tau_c
                + 2.0 * b * b);
        let d1 = a * tau_p + b;
        let d2 = (a + 1.0) * tau_p + b;
        -num / (LN_2 * tau_c * d1 * d1 * d2 * d2)
    }
}

/// Integer lower bound, checked for `1 ≤ τ_p ≤ τ_c − 1`.
pub fn average_se_lower_bound(ab: &AbConstants, tau_p: usize, tau_c: usize) -> Result<f64> {
    check_tau_p(tau_p, tau_c)?;
    Ok(ab.lower_bound_at(tau_p as f64, tau_c as f64))
}

/// Low-SNR pilot length: the continuous maximizer of the linearized objective
/// and the better neighbouring integer under the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowSnrPilot {
    pub tau_star: f64,
    pub tau_p: usize,
}

pub fn low_snr_tau_star(ab: &AbConstants, tau_c: usize) -> LowSnrPilot {
    let (a, b) = (ab.a, ab.b);
    let tau_star = ((b * (b + a * tau_c as f64)).sqrt() - b) / a;
    let hi = tau_c.saturating_sub(1).max(1);
    let lo_int = (tau_star.floor().max(1.0) as usize).min(hi);
    let hi_int = (tau_star.ceil().max(1.0) as usize).min(hi);
    let f = |t: usize| ab.lower_bound_at(t as f64, tau_c as f64);
    // ties go to the shorter pilot
    let tau_p = if f(hi_int) > f(lo_int) { hi_int } else { lo_int };
    LowSnrPilot { tau_star, tau_p }
}

/// Index of the first maximum, i.e. the smallest `τ_p` on ties.
fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Exhaustive integer argmax of `f` over `[1, τ_c − 1]`.
pub fn argmax_exhaustive(tau_c: usize, f: impl Fn(usize) -> f64) -> usize {
    let values: Vec<f64> = (1..tau_c).map(f).collect();
    first_argmax(&values) + 1
}

/// Maximizes the concave lower bound by scanning upward until the first
/// non-increase.
pub fn optimize_lower_bound(ab: &AbConstants, tau_c: usize) -> usize {
    let f = |t: usize| ab.lower_bound_at(t as f64, tau_c as f64);
    let mut tau = 1;
    while tau + 1 < tau_c && f(tau + 1) > f(tau) {
        tau += 1;
    }
    tau
}

/// Which curve a pilot length is optimized against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    ExactAverage,
    LowerBound,
}

/// A population of UEs sharing the link parameters: the `tr(R²)` samples
/// drawn from the correlation-matrix distribution.
#[derive(Debug, Clone)]
pub struct Population<'a> {
    pub link: LinkParams,
    pub tr_r_squared: &'a [f64],
}

impl Population<'_> {
    pub fn mean_tr_r_squared(&self) -> Result<f64> {
        if self.tr_r_squared.is_empty() {
            return Err(Error::EmptySamples);
        }
        Ok(self.tr_r_squared.iter().sum::<f64>() / self.tr_r_squared.len() as f64)
    }

    pub fn ab(&self) -> Result<AbConstants> {
        let l = &self.link;
        ab_constants(self.mean_tr_r_squared()?, l.antennas, l.rank, l.beta, l.rho)
    }

    /// Exact average SE for every `τ_p ∈ [1, τ_c − 1]`.
    pub fn exact_curve(&self) -> Result<Vec<Estimate>> {
        (1..self.link.tau_c).map(|t| average_se_exact(self.tr_r_squared, &self.link, t)).collect()
    }
}

/// Integer pilot length maximizing the chosen objective. The exact average is
/// scanned exhaustively since only the bound is certified concave.
pub fn optimize_pilot_length(objective: Objective, population: &Population<'_>) -> Result<usize> {
    let tau_c = population.link.tau_c;
    match objective {
        Objective::LowerBound => Ok(optimize_lower_bound(&population.ab()?, tau_c)),
        Objective::ExactAverage => {
            let curve = population.exact_curve()?;
            let means: Vec<f64> = curve.iter().map(|e| e.mean).collect();
            Ok(first_argmax(&means) + 1)
        }
    }
}

/// The three recommended pilot lengths and the exact average SE at each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PilotRecommendation {
    pub tau_opt_exact: usize,
    pub tau_opt_bound: usize,
    pub tau_star_low_snr: f64,
    pub tau_low_snr: usize,
    pub se_at_exact: f64,
    pub se_at_bound: f64,
    pub se_at_low_snr: f64,
}

pub fn recommend(population: &Population<'_>) -> Result<PilotRecommendation> {
    let tau_c = population.link.tau_c;
    let ab = population.ab()?;
    let curve = population.exact_curve()?;
    let means: Vec<f64> = curve.iter().map(|e| e.mean).collect();
    let tau_opt_exact = first_argmax(&means) + 1;
    let tau_opt_bound = optimize_lower_bound(&ab, tau_c);
    let low = low_snr_tau_star(&ab, tau_c);
    Ok(PilotRecommendation {
        tau_opt_exact,
        tau_opt_bound,
        tau_star_low_snr: low.tau_star,
        tau_low_snr: low.tau_p,
        se_at_exact: means[tau_opt_exact - 1],
        se_at_bound: means[tau_opt_bound - 1],
        se_at_low_snr: means[low.tau_p - 1],
    })
}

/// Outcome of checking strict concavity of the lower bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavityReport {
    /// Largest closed-form second derivative on the grid.
    pub max_second_derivative: f64,
    /// Largest discrete second difference over integers `1..τ_c−1`.
    pub max_second_difference: f64,
    pub grid_points: usize,
    pub value_at_tau_c: f64,
    pub value_near_zero: f64,
}

/// Evaluates the closed-form second derivative on a grid of step 1/4 over
/// `(0, τ_c]` and the discrete second difference of the integer bound, using
/// the zero endpoint values at `τ_p = 0` and `τ_p = τ_c`.
pub fn concavity_certificate(ab: &AbConstants, tau_c: usize) -> Result<ConcavityReport> {
    if tau_c < 2 {
        return Err(Error::InvalidParameter(format!("tau_c must be at least 2, got {tau_c}")));
    }
    let tc = tau_c as f64;
    let grid_points = 4 * tau_c;
    let max_second_derivative = (1..=grid_points)
        .map(|k| ab.second_derivative(k as f64 * 0.25, tc))
        .fold(f64::NEG_INFINITY, f64::max);

    let f = |t: usize| ab.lower_bound_at(t as f64, tc);
    let max_second_difference =
        (1..tau_c).map(|t| f(t + 1) - 2.0 * f(t) + f(t - 1)).fold(f64::NEG_INFINITY, f64::max);

    let report = ConcavityReport {
        max_second_derivative,
        max_second_difference,
        grid_points,
        value_at_tau_c: f(tau_c),
        value_near_zero: ab.lower_bound_at(1e-12, tc),
    };
    if report.max_second_derivative.is_nan() || report.max_second_derivative >= 0.0 {
        return Err(Error::Certificate(format!(
            "second derivative reaches {:.3e}",
            report.max_second_derivative
        )));
    }
    if report.max_second_difference.is_nan() || report.max_second_difference >= 0.0 {
        return Err(Error::Certificate(format!(
            "second difference reaches {:.3e}",
            report.max_second_difference
        )));
    }
    if report.value_at_tau_c != 0.0 {
        return Err(Error::Certificate(format!("bound at tau_c is {}", report.value_at_tau_c)));
    }
    Ok(report)
}

/// Number of strict local maxima of a sequence (plateaus count once).
pub fn local_maxima(values: &[f64]) -> usize {
    let mut count = 0;
    let mut rising = true;
    for w in values.windows(2) {
        if w[1] < w[0] && rising {
            count += 1;
            rising = false;
        } else if w[1] > w[0] {
            rising = true;
        }
    }
    if rising && !values.is_empty() {
        count += 1;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn link(m: usize, r: usize, beta: f64, rho: f64, tau_c: usize) -> LinkParams {
        LinkParams::new(m, r, beta, rho, tau_c).unwrap()
    }

    /// Lemma-1 SE written out term by term, independent of `LinkParams`.
    fn se_oracle(tr2: f64, m: f64, r: f64, beta: f64, rho: f64, tau_p: f64, tau_c: f64) -> f64 {
        let num = rho * m * m * beta * beta;
        let den = rho * beta * beta * tr2 + m * beta + (1.0 / tau_p) * (m * beta + r / rho);
        (tau_c - tau_p) / tau_c * (1.0 + num / den).log2()
    }

    #[test]
    fn regression_identity_population() {
        // R = I (tr R² = M), r = M = 4, ρ = β = 1, τ_p = 2, τ_c = 10:
        // SINR = 16 / (4 + 4 + (4 + 4)/2) = 4/3, SE = 0.8·log2(7/3)
        let l = link(4, 4, 1.0, 1.0, 10);
        let se = se_lemma1(&l, 4.0, 2).unwrap();
        assert!((se - 0.8 * (7.0f64 / 3.0).log2()).abs() < 1e-15);
        assert!((se - 0.977_913_937_069_158_5).abs() < 1e-12);
        assert!((se - se_oracle(4.0, 4.0, 4.0, 1.0, 1.0, 2.0, 10.0)).abs() < 1e-15);
    }

    #[test]
    fn se_vanishes_at_low_rho_and_at_tau_c() {
        let l = link(64, 30, 1.0, 1e-12, 200);
        assert!(se_lemma1(&l, 500.0, 10).unwrap() < 1e-9);
        let l = link(64, 30, 1.0, 1.0, 200);
        assert_eq!(l.se_continuous(500.0, 200.0), 0.0);
    }

    #[test]
    fn tau_p_range_checked() {
        let l = link(16, 8, 1.0, 1.0, 10);
        assert!(matches!(se_lemma1(&l, 20.0, 0), Err(Error::PilotLengthOutOfRange { .. })));
        assert!(matches!(se_lemma1(&l, 20.0, 10), Err(Error::PilotLengthOutOfRange { tau_p: 10, max: 9 })));
        assert!(se_lemma1(&l, 20.0, 9).is_ok());
        let ab = AbConstants::new(1.0, 1.0).unwrap();
        assert!(average_se_lower_bound(&ab, 10, 10).is_err());
    }

    #[test]
    fn average_se_degenerate_cases() {
        let l = link(16, 8, 0.5, 2.0, 50);
        let one = average_se_exact(&[30.0], &l, 7).unwrap();
        assert_eq!(one.mean, se_lemma1(&l, 30.0, 7).unwrap());
        let same = average_se_exact(&[30.0; 20], &l, 7).unwrap();
        assert_eq!(same.stderr, 0.0);
        assert!(matches!(average_se_exact(&[], &l, 7), Err(Error::EmptySamples)));
    }

    #[test]
    fn ab_parameterizations_agree() {
        let (m, r, beta, rho, tr) = (144usize, 92usize, 3e-13, 2.5e11, 3900.0);
        let ab = ab_constants(tr, m, r, beta, rho).unwrap();
        let snr = rho * beta;
        let (mf, rf) = (m as f64, r as f64);
        let a2 = tr / (mf * mf) + 1.0 / (snr * mf);
        let b2 = 1.0 / (snr * mf) + rf / (snr * snr * mf * mf);
        assert!((ab.a - a2).abs() < 1e-12 * a2);
        assert!((ab.b - b2).abs() < 1e-12 * b2);
    }

    #[test]
    fn ab_limits() {
        let ab = ab_constants(100.0, 16, 16, 1e6, 1e6).unwrap();
        assert!((ab.a - 100.0 / 256.0).abs() < 1e-9);
        assert!(ab.b < 1e-9);
        // R = I population, r = M, ρβ = 1
        let ab = ab_constants(16.0, 16, 16, 1.0, 1.0).unwrap();
        assert!((ab.a - 2.0 / 16.0).abs() < 1e-15);
        assert!((ab.b - 2.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_regression() {
        let ab = AbConstants::new(1.0, 1.0).unwrap();
        let v = average_se_lower_bound(&ab, 5, 10).unwrap();
        assert!((v - 0.5 * (1.0f64 + 1.0 / 1.2).log2()).abs() < 1e-15);
        assert!((v - 0.437_234_558_958_070_6).abs() < 1e-12);
    }

    #[test]
    fn negligible_b_prefers_shortest_pilot() {
        let ab = AbConstants::new(0.3, 1e-12).unwrap();
        let vals: Vec<f64> = (1..200).map(|t| ab.lower_bound_at(t as f64, 200.0)).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(optimize_lower_bound(&ab, 200), 1);
        let low = low_snr_tau_star(&ab, 200);
        assert!(low.tau_star < 1e-3);
        assert_eq!(low.tau_p, 1);
    }

    #[test]
    fn tau_star_for_equal_constants() {
        for (a, tc) in [(0.5, 200usize), (3.0, 50), (1e-2, 1000)] {
            let ab = AbConstants::new(a, a).unwrap();
            let low = low_snr_tau_star(&ab, tc);
            assert!((low.tau_star - ((1.0 + tc as f64).sqrt() - 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn tau_star_is_stationary_for_linearized_objective() {
        for (a, b) in [(0.88, 45.0), (0.38, 3.2), (7.1, 4400.0), (0.25, 0.5)] {
            let ab = AbConstants::new(a, b).unwrap();
            let t = low_snr_tau_star(&ab, 200).tau_star;
            let h = 1e-4 * t;
            let d = (ab.low_snr_objective(t + h, 200.0) - ab.low_snr_objective(t - h, 200.0)) / (2.0 * h);
            assert!(d.abs() < 1e-9, "A={a} B={b}: {d}");
        }
    }

    #[test]
    fn bound_optimizer_within_one_of_continuous_maximizer() {
        for (a, b) in [(0.88, 45.0), (0.38, 3.2), (7.1, 4400.0), (0.25, 0.05), (2.0, 0.5)] {
            let ab = AbConstants::new(a, b).unwrap();
            let tc = 200.0;
            let mut best = (1.0, f64::MIN);
            let mut t = 1.0;
            while t <= tc - 1.0 {
                let v = ab.lower_bound_at(t, tc);
                if v > best.1 {
                    best = (t, v);
                }
                t += 1e-3;
            }
            let opt = optimize_lower_bound(&ab, 200) as f64;
            assert!((opt - best.0).abs() <= 1.0, "A={a} B={b}: {opt} vs {}", best.0);
        }
    }

    #[test]
    fn low_snr_needs_longer_pilots() {
        // same array and population, SNR from +20 dB down to -30 dB
        let (m, r, tr) = (144usize, 92usize, 0.19 * 144.0 * 144.0);
        let taus: Vec<usize> = [20.0, 0.0, -10.0, -20.0, -30.0]
            .iter()
            .map(|db: &f64| {
                let snr = 10f64.powf(db / 10.0);
                let ab = ab_constants(tr, m, r, snr, 1.0).unwrap();
                optimize_lower_bound(&ab, 200)
            })
            .collect();
        assert!(taus.windows(2).all(|w| w[0] <= w[1]), "{taus:?}");
        assert!(taus[0] <= 2, "{taus:?}");
        assert!(taus[4] > 10 * taus[0]);
    }

    #[test]
    fn scan_matches_exhaustive() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let a = 10f64.powf(rng.random_range(-2.0..2.0));
            let b = 10f64.powf(rng.random_range(-3.0..4.0));
            let tc = rng.random_range(2usize..400);
            let ab = AbConstants::new(a, b).unwrap();
            let exhaustive = argmax_exhaustive(tc, |t| ab.lower_bound_at(t as f64, tc as f64));
            assert_eq!(optimize_lower_bound(&ab, tc), exhaustive, "A={a} B={b} tc={tc}");
        }
    }

    #[test]
    fn ties_pick_shorter_pilot() {
        assert_eq!(first_argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax_exhaustive(5, |t| if t >= 2 { 1.0 } else { 0.0 }), 2);
    }

    #[test]
    fn concavity_certificate_random_constants() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10_000 {
            let a = 10f64.powf(rng.random_range(-2.0..2.0));
            let b = 10f64.powf(rng.random_range(-2.0..2.0));
            let ab = AbConstants::new(a, b).unwrap();
            let rep = concavity_certificate(&ab, 200).unwrap();
            assert_eq!(rep.value_at_tau_c, 0.0);
            assert!(rep.value_near_zero < 1e-9);
        }
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        for (a, b) in [(0.88, 45.0), (0.38, 3.2), (0.25, 0.5), (3.0, 30.0)] {
            let ab = AbConstants::new(a, b).unwrap();
            for t in [1.0, 2.5, 10.0, 37.0, 80.0, 150.0, 199.0] {
                // Richardson-extrapolated central difference
                let d = |h: f64| {
                    (ab.lower_bound_at(t + h, 200.0) - 2.0 * ab.lower_bound_at(t, 200.0)
                        + ab.lower_bound_at(t - h, 200.0))
                        / (h * h)
                };
                let h = 0.02 * t.clamp(0.5, 1.0);
                let fd = (4.0 * d(h / 2.0) - d(h)) / 3.0;
                let exact = ab.second_derivative(t, 200.0);
                assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "A={a} B={b} t={t}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn local_maxima_counting() {
        assert_eq!(local_maxima(&[1.0, 2.0, 3.0, 2.0, 1.0]), 1);
        assert_eq!(local_maxima(&[3.0, 2.0, 1.0]), 1);
        assert_eq!(local_maxima(&[1.0, 2.0, 1.0, 2.0, 1.0]), 2);
        assert_eq!(local_maxima(&[1.0, 2.0, 2.0, 1.0]), 1);
    }

    #[test]
    fn recommendation_on_synthetic_population() {
        let samples: Vec<f64> = (0..50).map(|k| 3000.0 + 40.0 * k as f64).collect();
        let snr = 0.01;
        let l = link(144, 92, snr, 1.0, 200);
        let pop = Population { link: l, tr_r_squared: &samples };
        let rec = recommend(&pop).unwrap();
        assert_eq!(rec.tau_opt_exact, optimize_pilot_length(Objective::ExactAverage, &pop).unwrap());
        assert_eq!(rec.tau_opt_bound, optimize_pilot_length(Objective::LowerBound, &pop).unwrap());
        assert!(rec.se_at_exact >= rec.se_at_bound && rec.se_at_exact >= rec.se_at_low_snr);
        let ab = pop.ab().unwrap();
        for t in 1..200 {
            let exact = average_se_exact(&samples, &l, t).unwrap();
            assert!(ab.lower_bound_at(t as f64, 200.0) <= exact.mean + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn sinr_depends_on_snr_only(
            beta in 1e-14f64..1.0, snr_db in -40f64..20.0, c_exp in -6f64..6.0,
            tr in 100f64..1e4, tau_p in 1usize..199,
        ) {
            let rho = 10f64.powf(snr_db / 10.0) / beta;
            let c = 10f64.powf(c_exp);
            let l1 = link(100, 40, beta, rho, 200);
            let l2 = link(100, 40, beta / c, rho * c, 200);
            let a = se_lemma1(&l1, tr, tau_p).unwrap();
            let b = se_lemma1(&l2, tr, tau_p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn matches_term_by_term_oracle(
            m in 1usize..600, r_frac in 0.01f64..1.0, beta in 1e-3f64..10.0, rho in 1e-3f64..10.0,
            tau_c in 2usize..400, tau_frac in 0f64..1.0, tr_frac in 0f64..1.0,
        ) {
            let r = ((m as f64 * r_frac).ceil() as usize).clamp(1, m);
            let tau_p = 1 + ((tau_c - 2) as f64 * tau_frac) as usize;
            let mf = m as f64;
            let tr = mf + tr_frac * (mf * mf - mf);
            let l = link(m, r, beta, rho, tau_c);
            let se = se_lemma1(&l, tr, tau_p).unwrap();
            let want = se_oracle(tr, mf, r as f64, beta, rho, tau_p as f64, tau_c as f64);
            prop_assert!((se - want).abs() <= 1e-12 * want.max(1e-300) + 1e-300);
            prop_assert!(se >= 0.0);
        }

        #[test]
        fn bound_is_unimodal(a_exp in -2f64..2.0, b_exp in -3f64..4.0, tau_c in 2usize..300) {
            let ab = AbConstants::new(10f64.powf(a_exp), 10f64.powf(b_exp)).unwrap();
            let vals: Vec<f64> = (1..tau_c).map(|t| ab.lower_bound_at(t as f64, tau_c as f64)).collect();
            prop_assert_eq!(local_maxima(&vals), 1);
        }
    }
}
