//! Monte Carlo simulation of the pilot and data phases with RS-LS estimation.
//!
//! Trials are grouped into fixed-size blocks; block `k` draws from the random
//! stream `(seed, k)` and partial moments are merged in block order, so every
//! report is bit-identical for a given seed regardless of thread count.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationMatrix;
use crate::rng::{complex_normal, stream, Domain, StreamRng};
use crate::stats::{merge_in_order, ComplexRunningMean, Mergeable, RunningMean};
use crate::subspace::ReducedSubspace;
use crate::{Error, Result, C64};

/// Trials per random-stream block.
pub const TRIALS_PER_BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: DVector<C64>,
}

/// Draws `h = √β R^{1/2} z` with `z ∼ CN(0, I)`.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    factor: DMatrix<C64>,
    beta: f64,
}

impl ChannelSampler {
    pub fn new(r: &CorrelationMatrix, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        let factor = r.sqrt_factor()? * C64::new(beta.sqrt(), 0.0);
        Ok(Self { factor, beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let z = DVector::from_fn(self.dim(), |_, _| complex_normal(rng));
        ChannelRealization { h: &self.factor * z }
    }
}

/// One-shot channel draw. Prefer [`ChannelSampler`] for repeated draws.
pub fn sample_channel<R: Rng + ?Sized>(r: &CorrelationMatrix, beta: f64, rng: &mut R) -> Result<ChannelRealization> {
    Ok(ChannelSampler::new(r, beta)?.sample(rng))
}

/// How the despread pilot observation is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PilotMode {
    /// `y = √(ρτ_p) h + n` directly.
    #[default]
    Direct,
    /// Full `M × τ_p` received block despread by `φ*/‖φ‖`.
    Full,
}

/// Unit-modulus pilot `φ_t = exp(j2πt/τ_p)`, so `‖φ‖² = τ_p`.
pub fn pilot_sequence(tau_p: usize) -> Vec<C64> {
    (0..tau_p).map(|t| C64::from_polar(1.0, 2.0 * PI * t as f64 / tau_p as f64)).collect()
}

/// Despread pilot observation and the pilot noise that entered it.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub y_pilot: DVector<C64>,
    pub noise: DVector<C64>,
    pub tau_p: usize,
    pub rho: f64,
}

pub fn simulate_pilot<R: Rng + ?Sized>(
    h: &ChannelRealization,
    rho: f64,
    tau_p: usize,
    mode: PilotMode,
    rng: &mut R,
) -> Result<PilotObservation> {
    if tau_p == 0 {
        return Err(Error::PilotLengthOutOfRange { tau_p, max: usize::MAX });
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let m = h.h.len();
    let (y_pilot, noise) = match mode {
        PilotMode::Direct => {
            let n = DVector::from_fn(m, |_, _| complex_normal(rng));
            ((&h.h * C64::new((rho * tau_p as f64).sqrt(), 0.0)) + &n, n)
        }
        PilotMode::Full => {
            let phi = pilot_sequence(tau_p);
            let norm = (tau_p as f64).sqrt();
            let sqrt_rho = rho.sqrt();
            let mut y = DVector::<C64>::zeros(m);
            let mut n_pilot = DVector::<C64>::zeros(m);
            for &p in &phi {
                let despread = p.conj() / norm;
                for k in 0..m {
                    let noise = complex_normal(rng);
                    let received = h.h[k] * p * sqrt_rho + noise;
                    y[k] += received * despread;
                    n_pilot[k] += noise * despread;
                }
            }
            (y, n_pilot)
        }
    };
    Ok(PilotObservation { y_pilot, noise, tau_p, rho })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsLsEstimate {
    pub h_hat: DVector<C64>,
}

impl RsLsEstimate {
    /// Estimation error `w = ĥ − h` against the true channel.
    pub fn error(&self, truth: &ChannelRealization) -> DVector<C64> {
        &self.h_hat - &truth.h
    }
}

/// `ĥ = U1 U1ᴴ y_pilot / √(ρτ_p)`.
pub fn rs_ls_estimate(obs: &PilotObservation, sub: &ReducedSubspace) -> Result<RsLsEstimate> {
    let scale = 1.0 / (obs.rho * obs.tau_p as f64).sqrt();
    let h_hat = sub.project(&obs.y_pilot)? * C64::new(scale, 0.0);
    Ok(RsLsEstimate { h_hat })
}

/// One row of a moment report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRecord {
    pub term: String,
    pub analytic: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub n_trials: u64,
}

impl MomentRecord {
    /// `|empirical − analytic| / |analytic|`.
    pub fn relative_error(&self) -> f64 {
        (self.empirical - self.analytic).abs() / self.analytic.abs()
    }

    /// Distance from the analytic value in standard errors.
    pub fn z_score(&self) -> f64 {
        if self.stderr == 0.0 {
            return if self.empirical == self.analytic { 0.0 } else { f64::INFINITY };
        }
        (self.empirical - self.analytic).abs() / self.stderr
    }
}

pub const TERM_UPSILON_POWER: &str = "E{|v|^2}";
pub const TERM_SYMBOL_CROSS: &str = "|E{s* v}|";
pub const TERM_GAIN_SECOND_MOMENT: &str = "E{(h^H h)^2}";
pub const TERM_GAIN: &str = "E{h^H h}";
pub const TERM_ERROR_GAIN: &str = "E{|w^H h|^2}";
pub const TERM_ERROR_POWER: &str = "E{w^H w}";
pub const TERM_COMBINED_NOISE: &str = "E{|(h+w)^H n|^2}";
/// The part of `υ` driven by the estimation error, `√ρ wᴴh s + wᴴn`.
pub const TERM_ESTIMATION_PENALTY: &str = "E{|sqrt(rho) w^H h s + w^H n|^2}";

/// Empirical moments of the data-phase effective noise
/// `υ = √ρ(hᴴh + wᴴh − Mβ)s + (h+w)ᴴn`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveNoiseReport {
    pub beta: f64,
    pub rho: f64,
    pub tau_p: usize,
    pub records: Vec<MomentRecord>,
}

impl EffectiveNoiseReport {
    pub fn get(&self, term: &str) -> Option<&MomentRecord> {
        self.records.iter().find(|r| r.term == term)
    }
}

#[derive(Debug, Clone, Default)]
struct NoiseMoments {
    upsilon: RunningMean,
    cross: ComplexRunningMean,
    gain2: RunningMean,
    gain: RunningMean,
    error_gain: RunningMean,
    error_power: RunningMean,
    combined: RunningMean,
    penalty: RunningMean,
}

impl Mergeable for NoiseMoments {
    fn merge_from(&mut self, o: &Self) {
        self.upsilon.merge(&o.upsilon);
        self.cross.merge(&o.cross);
        self.gain2.merge(&o.gain2);
        self.gain.merge(&o.gain);
        self.error_gain.merge(&o.error_gain);
        self.error_power.merge(&o.error_power);
        self.combined.merge(&o.combined);
        self.penalty.merge(&o.penalty);
    }
}

/// Shared inputs of a Monte Carlo experiment on one correlation matrix.
#[derive(Debug, Clone)]
pub struct TrialSetup<'a> {
    pub r: &'a CorrelationMatrix,
    pub sub: &'a ReducedSubspace,
    pub beta: f64,
    pub rho: f64,
    pub tau_p: usize,
    pub mode: PilotMode,
}

impl TrialSetup<'_> {
    fn check(&self) -> Result<()> {
        if self.r.geometry() != self.sub.geometry() {
            return Err(Error::GeometryMismatch);
        }
        if self.tau_p == 0 {
            return Err(Error::PilotLengthOutOfRange { tau_p: 0, max: usize::MAX });
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {}", self.rho)));
        }
        Ok(())
    }
}

fn blocks(n_trials: usize) -> impl IndexedParallelIterator<Item = (u64, usize)> {
    let n_blocks = n_trials.div_ceil(TRIALS_PER_BLOCK);
    (0..n_blocks).into_par_iter().map(move |b| {
        let len = TRIALS_PER_BLOCK.min(n_trials - b * TRIALS_PER_BLOCK);
        (b as u64, len)
    })
}

/// Simulates pilot transmission, RS-LS estimation and one data symbol per
/// trial, and compares the measured moments with their closed forms.
pub fn measure_effective_noise(setup: &TrialSetup<'_>, n_trials: usize, seed: u64) -> Result<EffectiveNoiseReport> {
    setup.check()?;
    if n_trials == 0 {
        return Err(Error::InvalidParameter("n_trials must be at least 1".into()));
    }
    let sampler = ChannelSampler::new(setup.r, setup.beta)?;
    let m = setup.r.dim();
    let (beta, rho, tau_p) = (setup.beta, setup.rho, setup.tau_p);
    let mean_gain = m as f64 * beta;
    let sqrt_rho = rho.sqrt();

    let parts: Vec<NoiseMoments> = blocks(n_trials)
        .map(|(block, len)| -> Result<NoiseMoments> {
            let mut rng: StreamRng = stream(seed, Domain::Trials, block);
            let mut acc = NoiseMoments::default();
            for _ in 0..len {
                let h = sampler.sample(&mut rng);
                let obs = simulate_pilot(&h, rho, tau_p, setup.mode, &mut rng)?;
                let est = rs_ls_estimate(&obs, setup.sub)?;
                let w = est.error(&h);
                let s = complex_normal(&mut rng);
                let n = DVector::from_fn(m, |_, _| complex_normal(&mut rng));

                // received data signal after combining with ĥᴴ
                let y_data = (&h.h * (s * sqrt_rho)) + &n;
                let y = est.h_hat.dotc(&y_data);
                let upsilon = y - C64::new(sqrt_rho * mean_gain, 0.0) * s;

                let hh = h.h.norm_squared();
                let wh = w.dotc(&h.h);
                acc.upsilon.push(upsilon.norm_sqr());
                acc.cross.push(s.conj() * upsilon);
                acc.gain2.push(hh * hh);
                acc.gain.push(hh);
                acc.error_gain.push(wh.norm_sqr());
                acc.error_power.push(w.norm_squared());
                let wn = w.dotc(&n);
                acc.combined.push(est.h_hat.dotc(&n).norm_sqr());
                acc.penalty.push((wh * s * sqrt_rho + wn).norm_sqr());
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let acc: NoiseMoments = merge_in_order(&parts);

    let tr = setup.r.trace();
    let tr2 = setup.r.tr_squared();
    let r = setup.sub.rank() as f64;
    let captured = setup.sub.captured_trace(setup.r)?;
    let tau = tau_p as f64;
    let n = acc.upsilon.count();
    let rec = |term: &str, analytic: f64, x: &RunningMean| MomentRecord {
        term: term.to_string(),
        analytic,
        empirical: x.mean(),
        stderr: x.stderr(),
        n_trials: n,
    };
    let records = vec![
        rec(
            TERM_UPSILON_POWER,
            rho * beta * beta * tr2 + m as f64 * beta + (m as f64 * beta + r / rho) / tau,
            &acc.upsilon,
        ),
        MomentRecord {
            term: TERM_SYMBOL_CROSS.to_string(),
            analytic: 0.0,
            empirical: acc.cross.mean().norm(),
            stderr: acc.cross.stderr(),
            n_trials: n,
        },
        rec(TERM_GAIN_SECOND_MOMENT, beta * beta * (tr * tr + tr2), &acc.gain2),
        rec(TERM_GAIN, beta * tr, &acc.gain),
        rec(TERM_ERROR_GAIN, beta * captured / (rho * tau), &acc.error_gain),
        rec(TERM_ERROR_POWER, r / (rho * tau), &acc.error_power),
        rec(TERM_COMBINED_NOISE, beta * tr + r / (rho * tau), &acc.combined),
        rec(TERM_ESTIMATION_PENALTY, (beta * captured + r / rho) / tau, &acc.penalty),
    ];
    Ok(EffectiveNoiseReport { beta, rho, tau_p, records })
}

/// Empirical statistics of the RS-LS estimation error.
#[derive(Debug, Clone)]
pub struct EstimationErrorStats {
    pub n_trials: u64,
    /// `E{‖w‖²}`.
    pub error_power: RunningMean,
    /// `E{w wᴴ}`.
    pub covariance: DMatrix<C64>,
    /// Normalized `|E{wᴴh}| / sqrt(E‖w‖² E‖h‖²)` and its standard error.
    pub error_channel_correlation: (f64, f64),
    /// `E{‖h − U1U1ᴴh‖² / ‖h‖²}` worst case over trials.
    pub worst_out_of_subspace: f64,
}

#[derive(Debug, Clone)]
struct ErrorMoments {
    power: RunningMean,
    gain: RunningMean,
    cross: ComplexRunningMean,
    cov_sum: DMatrix<C64>,
    worst_out: f64,
}

impl Default for ErrorMoments {
    fn default() -> Self {
        Self {
            power: RunningMean::default(),
            gain: RunningMean::default(),
            cross: ComplexRunningMean::default(),
            cov_sum: DMatrix::zeros(0, 0),
            worst_out: 0.0,
        }
    }
}

impl Mergeable for ErrorMoments {
    fn merge_from(&mut self, o: &Self) {
        self.power.merge(&o.power);
        self.gain.merge(&o.gain);
        self.cross.merge(&o.cross);
        if self.cov_sum.is_empty() {
            self.cov_sum = o.cov_sum.clone();
        } else if !o.cov_sum.is_empty() {
            self.cov_sum += &o.cov_sum;
        }
        self.worst_out = self.worst_out.max(o.worst_out);
    }
}

pub fn measure_estimation_error(setup: &TrialSetup<'_>, n_trials: usize, seed: u64) -> Result<EstimationErrorStats> {
    setup.check()?;
    if n_trials == 0 {
        return Err(Error::InvalidParameter("n_trials must be at least 1".into()));
    }
    let sampler = ChannelSampler::new(setup.r, setup.beta)?;
    let m = setup.r.dim();
    let parts: Vec<ErrorMoments> = blocks(n_trials)
        .map(|(block, len)| -> Result<ErrorMoments> {
            let mut rng = stream(seed, Domain::Trials, block);
            let mut acc = ErrorMoments { cov_sum: DMatrix::zeros(m, m), ..Default::default() };
            for _ in 0..len {
                let h = sampler.sample(&mut rng);
                let obs = simulate_pilot(&h, setup.rho, setup.tau_p, setup.mode, &mut rng)?;
                let w = rs_ls_estimate(&obs, setup.sub)?.error(&h);
                acc.power.push(w.norm_squared());
                acc.gain.push(h.h.norm_squared());
                acc.cross.push(w.dotc(&h.h));
                acc.cov_sum.ger(C64::new(1.0, 0.0), &w, &w.conjugate(), C64::new(1.0, 0.0));
                let out = (&h.h - setup.sub.project(&h.h)?).norm() / h.h.norm();
                acc.worst_out = acc.worst_out.max(out);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let acc: ErrorMoments = merge_in_order(&parts);
    let n = acc.power.count();
    let scale = (acc.power.mean() * acc.gain.mean()).sqrt();
    Ok(EstimationErrorStats {
        n_trials: n,
        error_power: acc.power,
        covariance: acc.cov_sum / C64::new(n as f64, 0.0),
        error_channel_correlation: (acc.cross.mean().norm() / scale, acc.cross.stderr() / scale),
        worst_out_of_subspace: acc.worst_out,
    })
}
