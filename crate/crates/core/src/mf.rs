//! Matched-filter precoding: expected per-user SINR, a Monte Carlo downlink
//! oracle, and the large-system SINR limit.
//!
//! The precoder transmits `s = Ĝ* q / sqrt(γ)` with `γ = tr(Ĝ^T Ĝ*) / K`,
//! so user `i` receives `x_i = sqrt(ρ_f/γ) g_i^T Ĝ* q + w_i`. Conditioned on
//! the estimate, the true channel is `g_i = ξ ĝ_i + sqrt(1-ξ²) e_i` with `e_i`
//! independent of `Ĝ` and distributed like `g_i`. Averaging over `e`, `q` and
//! `w` gives, with `c = ρ_f / (K γ)`,
//!
//! ```text
//! signal_i = c (ξ² |ĝ_i^H ĝ_i|² + (1-ξ²) ĝ_i^H P_i ĝ_i)
//! interf_i = c Σ_{k≠i} (ξ² |ĝ_i^H ĝ_k|² + (1-ξ²) ĝ_k^H P_i ĝ_k) + σ²
//! ```
//!
//! and the expected SINR is taken as their ratio. As `K, M → ∞` with
//! `α = M/K` fixed the ratio tends to
//!
//! ```text
//! ρ_f α ξ² β̄_i² / (σ² β̄ + ρ_f β̄_ik Λ̄²)
//! ```

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{cluster_energies, ComplexMatrix};
use crate::correlation::TransmitCorrelation;
use crate::error::{Error, Result};
use crate::linkgain::{BetaAverages, LinkGains};
use crate::rng::{complex_normal, substream};
use crate::units::to_db;

/// Scalars needed to evaluate the finite-size SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrParams {
    /// Transmit SNR, linear.
    pub rho_f: f64,
    /// CSI accuracy in `[0, 1]`.
    pub xi: f64,
    /// Receiver noise power `σ²`.
    pub noise_power: f64,
}

impl SinrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_f > 0.0 && self.rho_f.is_finite()) {
            return Err(Error::config(format!("rho_f must be positive, got {}", self.rho_f)));
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(Error::config(format!("xi must lie in [0, 1], got {}", self.xi)));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::config(format!(
                "noise power must be positive, got {}",
                self.noise_power
            )));
        }
        Ok(())
    }
}

/// Power normalization `γ = (1/K) Σ_k ‖ĝ_k‖²`.
pub fn gamma_norm(g_hat: &ComplexMatrix) -> Result<f64> {
    let k = g_hat.ncols();
    if k == 0 {
        return Err(Error::config("channel estimate has no users"));
    }
    let gamma = g_hat.iter().map(|z| z.norm_sqr()).sum::<f64>() / k as f64;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::DegenerateChannel);
    }
    Ok(gamma)
}

/// Closed-form per-user signal and interference-plus-noise powers for a
/// given channel estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedPowers {
    pub gamma: f64,
    pub signal: Vec<f64>,
    pub interference_noise: Vec<f64>,
}

impl ExpectedPowers {
    pub fn sinr(&self) -> Vec<f64> {
        self.signal
            .iter()
            .zip(&self.interference_noise)
            .map(|(s, i)| s / i)
            .collect()
    }
}

fn check_estimate(
    g_hat: &ComplexMatrix,
    gains: &LinkGains,
    corr: &TransmitCorrelation,
) -> Result<()> {
    if g_hat.nrows() != gains.clusters() * corr.dim() || g_hat.ncols() != gains.users() {
        return Err(Error::config(format!(
            "estimate is {}x{} but gains/correlation imply {}x{}",
            g_hat.nrows(),
            g_hat.ncols(),
            gains.clusters() * corr.dim(),
            gains.users()
        )));
    }
    Ok(())
}

/// Expected signal and interference-plus-noise power per user.
pub fn expected_powers(
    g_hat: &ComplexMatrix,
    gains: &LinkGains,
    corr: &TransmitCorrelation,
    params: &SinrParams,
) -> Result<ExpectedPowers> {
    params.validate()?;
    check_estimate(g_hat, gains, corr)?;
    let k_users = g_hat.ncols();
    let gamma = gamma_norm(g_hat)?;
    let gram = g_hat.ad_mul(g_hat);
    let xi2 = params.xi * params.xi;
    let scale = params.rho_f / (k_users as f64 * gamma);

    // ĝ_k^H P_i ĝ_k = Σ_n beta[n,i] w[n,k]; only needed when ξ < 1.
    let cross_quad: Option<DMatrix<f64>> = (xi2 < 1.0).then(|| {
        let w = cluster_energies(g_hat, gains.clusters(), corr);
        gains.beta.transpose() * w
    });

    let mut signal = Vec::with_capacity(k_users);
    let mut interference_noise = Vec::with_capacity(k_users);
    for i in 0..k_users {
        let quad = |k: usize| cross_quad.as_ref().map_or(0.0, |q| q[(i, k)]);
        let own = gram[(i, i)].re;
        signal.push(scale * (xi2 * own * own + (1.0 - xi2) * quad(i)));
        let mut acc = 0.0;
        for k in 0..k_users {
            if k != i {
                acc += xi2 * gram[(i, k)].norm_sqr() + (1.0 - xi2) * quad(k);
            }
        }
        interference_noise.push(scale * acc + params.noise_power);
    }
    Ok(ExpectedPowers {
        gamma,
        signal,
        interference_noise,
    })
}

/// Finite-size expected SINR of every user.
pub fn expected_sinr(
    g_hat: &ComplexMatrix,
    gains: &LinkGains,
    corr: &TransmitCorrelation,
    params: &SinrParams,
) -> Result<(Vec<f64>, f64)> {
    let p = expected_powers(g_hat, gains, corr, params)?;
    Ok((p.sinr(), p.gamma))
}

/// Received vector `x = sqrt(ρ_f/γ) G^T Ĝ* q + w`.
pub fn received_signal(
    g: &ComplexMatrix,
    g_hat: &ComplexMatrix,
    q: &[Complex64],
    w: &[Complex64],
    rho_f: f64,
) -> Result<Vec<Complex64>> {
    let k = g.ncols();
    if g.shape() != g_hat.shape() || q.len() != k || w.len() != k {
        return Err(Error::config("received_signal: inconsistent dimensions"));
    }
    let gamma = gamma_norm(g_hat)?;
    let a = (rho_f / gamma).sqrt();
    let coupling = g.transpose() * g_hat.map(|z| z.conj());
    Ok((0..k)
        .map(|i| {
            let s: Complex64 = (0..k).map(|j| coupling[(i, j)] * q[j]).sum();
            s * a + w[i]
        })
        .collect())
}

/// Monte Carlo averages from [`simulate_downlink`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DownlinkEstimate {
    pub draws: usize,
    /// Mean `|sqrt(ρ_f/γ) g_i^T ĝ_i* q_i|²` per user.
    pub signal: Vec<f64>,
    /// Mean `|sqrt(ρ_f/γ) Σ_{k≠i} g_i^T ĝ_k* q_k + w_i|²` per user.
    pub interference_noise: Vec<f64>,
    /// Mean `|w_i|²` over users and draws.
    pub noise_only: f64,
}

const DRAWS_PER_BATCH: usize = 8192;

struct Accum {
    signal: Vec<f64>,
    interference_noise: Vec<f64>,
    noise: f64,
}

/// Simulates the downlink for a fixed estimate `Ĝ`.
///
/// Each draw redraws the true channel around the estimate,
/// `G = ξ Ĝ + sqrt(1-ξ²) E`, the data symbols `q ~ CN(0, I/K)` and the noise
/// `w ~ CN(0, σ² I)`, then splits `x_i` into its desired and
/// interference-plus-noise parts. Draws are processed in fixed batches on
/// independent substreams keyed by a seed taken from `rng`, so the result
/// does not depend on the thread count.
pub fn simulate_downlink<R: Rng + ?Sized>(
    rng: &mut R,
    g_hat: &ComplexMatrix,
    gains: &LinkGains,
    corr: &TransmitCorrelation,
    params: &SinrParams,
    n_draws: usize,
) -> Result<DownlinkEstimate> {
    params.validate()?;
    check_estimate(g_hat, gains, corr)?;
    if n_draws < 1 {
        return Err(Error::config("simulate_downlink needs at least one draw"));
    }
    let gamma = gamma_norm(g_hat)?;
    let seed: u64 = rng.random();
    let batches = n_draws.div_ceil(DRAWS_PER_BATCH);
    let k_users = g_hat.ncols();

    let partials: Vec<Accum> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = DRAWS_PER_BATCH.min(n_draws - b * DRAWS_PER_BATCH);
            let mut local = substream(seed, &[b as u64]);
            downlink_batch(&mut local, g_hat, gains, corr, params, gamma, count)
        })
        .collect();

    let mut signal = vec![0.0; k_users];
    let mut interference_noise = vec![0.0; k_users];
    let mut noise = 0.0;
    for p in &partials {
        for i in 0..k_users {
            signal[i] += p.signal[i];
            interference_noise[i] += p.interference_noise[i];
        }
        noise += p.noise;
    }
    let nd = n_draws as f64;
    Ok(DownlinkEstimate {
        draws: n_draws,
        signal: signal.into_iter().map(|s| s / nd).collect(),
        interference_noise: interference_noise.into_iter().map(|s| s / nd).collect(),
        noise_only: noise / (nd * k_users as f64),
    })
}

fn downlink_batch<R: Rng + ?Sized>(
    rng: &mut R,
    g_hat: &ComplexMatrix,
    gains: &LinkGains,
    corr: &TransmitCorrelation,
    params: &SinrParams,
    gamma: f64,
    count: usize,
) -> Accum {
    let (m_total, k_users) = g_hat.shape();
    let dim = corr.dim();
    let clusters = gains.clusters();
    let xi = params.xi;
    let w_e = (1.0 - xi * xi).sqrt();
    let amp = (params.rho_f / gamma).sqrt();
    let sqrt_r = corr.sqrt_matrix();
    let sqrt_beta = gains.beta.map(f64::sqrt);
    let g_hat_conj = g_hat.map(|z| z.conj());

    let mut g = g_hat.clone();
    let mut h = vec![Complex64::new(0.0, 0.0); dim];
    let mut coupling = vec![Complex64::new(0.0, 0.0); k_users * k_users];
    let mut q = vec![Complex64::new(0.0, 0.0); k_users];
    let mut acc = Accum {
        signal: vec![0.0; k_users],
        interference_noise: vec![0.0; k_users],
        noise: 0.0,
    };
    let q_var = 1.0 / k_users as f64;

    for _ in 0..count {
        if xi < 1.0 {
            for n in 0..clusters {
                for k in 0..k_users {
                    for v in h.iter_mut() {
                        *v = complex_normal(rng, 1.0);
                    }
                    let s = sqrt_beta[(n, k)];
                    for r in 0..dim {
                        let e = if corr.is_identity() {
                            h[r]
                        } else {
                            let mut e = Complex64::new(0.0, 0.0);
                            for c in 0..dim {
                                e += h[c] * sqrt_r[(r, c)];
                            }
                            e
                        };
                        let row = n * dim + r;
                        g[(row, k)] = g_hat[(row, k)] * xi + e * (s * w_e);
                    }
                }
            }
        }
        // coupling[i][k] = g_i^T ĝ_k*
        for i in 0..k_users {
            for k in 0..k_users {
                let mut c = Complex64::new(0.0, 0.0);
                for m in 0..m_total {
                    c += g[(m, i)] * g_hat_conj[(m, k)];
                }
                coupling[i * k_users + k] = c;
            }
        }
        for v in q.iter_mut() {
            *v = complex_normal(rng, q_var);
        }
        for i in 0..k_users {
            let w = complex_normal(rng, params.noise_power);
            let desired = coupling[i * k_users + i] * q[i] * amp;
            let mut other = Complex64::new(0.0, 0.0);
            for k in 0..k_users {
                if k != i {
                    other += coupling[i * k_users + k] * q[k];
                }
            }
            let interf = other * amp + w;
            acc.signal[i] += desired.norm_sqr();
            acc.interference_noise[i] += interf.norm_sqr();
            acc.noise += w.norm_sqr();
        }
    }
    acc
}

/// Inputs of the large-system limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitInputs {
    pub rho_f: f64,
    pub alpha: f64,
    pub xi: f64,
    pub lambda_bar_sq: f64,
    pub averages: BetaAverages,
    pub noise_power: f64,
}

impl LimitInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.rho_f > 0.0 && self.rho_f.is_finite()) {
            return Err(Error::config(format!("rho_f must be positive, got {}", self.rho_f)));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::config("noise power must be positive"));
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(Error::config(format!("xi must lie in [0, 1], got {}", self.xi)));
        }
        if !(self.lambda_bar_sq > 0.0) {
            return Err(Error::config("lambda_bar_sq must be positive"));
        }
        if !(self.averages.beta_bar > 0.0) {
            return Err(Error::config("invalid gains: beta_bar must be positive"));
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.averages.beta_bar_i.len()
    }

    fn user(&self, i: usize) -> Result<(f64, f64)> {
        if i >= self.users() {
            return Err(Error::config(format!("user index {i} out of range")));
        }
        Ok((self.averages.beta_bar_i[i], self.averages.beta_ik_bar[i]))
    }
}

/// Limiting SINR of user `i`.
pub fn limit_sinr(inputs: &LimitInputs, i: usize) -> Result<f64> {
    inputs.validate()?;
    let (bi, bik) = inputs.user(i)?;
    let num = inputs.rho_f * inputs.alpha * inputs.xi * inputs.xi * bi * bi;
    let den = inputs.noise_power * inputs.averages.beta_bar
        + inputs.rho_f * bik * inputs.lambda_bar_sq;
    Ok(num / den)
}

/// The high-SNR ceiling `α ξ² β̄_i² / (β̄_ik Λ̄²)` of user `i`'s limit.
/// Infinite for a single user (no interference).
pub fn limit_ceiling(inputs: &LimitInputs, i: usize) -> Result<f64> {
    inputs.validate()?;
    let (bi, bik) = inputs.user(i)?;
    Ok(inputs.alpha * inputs.xi * inputs.xi * bi * bi / (bik * inputs.lambda_bar_sq))
}

/// Limiting SINR of every user.
pub fn limit_sinr_all(inputs: &LimitInputs) -> Result<Vec<f64>> {
    (0..inputs.users()).map(|i| limit_sinr(inputs, i)).collect()
}

/// Closed-form special cases of the limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpecialCase {
    PerfectCsi,
    NoCorrelation,
    EqualPowerCorrelated,
    NoCorrelationEqualPower,
    NoCorrelationEqualPowerPerfectCsi,
}

const CONSISTENCY_TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONSISTENCY_TOL * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn require_perfect_csi(inputs: &LimitInputs) -> Result<()> {
    if inputs.xi != 1.0 {
        return Err(Error::config(format!(
            "perfect-CSI case requires xi = 1, got {}",
            inputs.xi
        )));
    }
    Ok(())
}

fn require_uncorrelated(inputs: &LimitInputs) -> Result<()> {
    if !close(inputs.lambda_bar_sq, 1.0) {
        return Err(Error::config(format!(
            "uncorrelated case requires lambda_bar_sq = 1, got {}",
            inputs.lambda_bar_sq
        )));
    }
    Ok(())
}

/// The common gain `β` when every link has the same gain.
fn require_equal_power(inputs: &LimitInputs) -> Result<f64> {
    let a = &inputs.averages;
    let beta = a.beta_bar;
    let equal = a.beta_bar_i.iter().all(|&b| close(b, beta))
        && a.beta_sq_bar_i.iter().all(|&b| close(b, beta * beta))
        && a.beta_ik_bar.iter().all(|&b| close(b, beta * beta));
    if !equal {
        return Err(Error::config(
            "equal-power case requires the same link gain for every cluster and user (K >= 2)",
        ));
    }
    Ok(beta)
}

/// Evaluates a special-case formula for user `i` after checking that the
/// inputs satisfy the case's restriction.
pub fn limit_sinr_special(case: SpecialCase, inputs: &LimitInputs, i: usize) -> Result<f64> {
    inputs.validate()?;
    let (bi, bik) = inputs.user(i)?;
    let (rho, alpha, s2) = (inputs.rho_f, inputs.alpha, inputs.noise_power);
    let xi2 = inputs.xi * inputs.xi;
    let bbar = inputs.averages.beta_bar;
    let lam = inputs.lambda_bar_sq;
    match case {
        SpecialCase::PerfectCsi => {
            require_perfect_csi(inputs)?;
            Ok(rho * alpha * bi * bi / (s2 * bbar + rho * bik * lam))
        }
        SpecialCase::NoCorrelation => {
            require_uncorrelated(inputs)?;
            Ok(rho * alpha * xi2 * bi * bi / (s2 * bbar + rho * bik))
        }
        SpecialCase::EqualPowerCorrelated => {
            let beta = require_equal_power(inputs)?;
            Ok(rho * alpha * xi2 * beta / (s2 + rho * beta * lam))
        }
        SpecialCase::NoCorrelationEqualPower => {
            require_uncorrelated(inputs)?;
            let beta = require_equal_power(inputs)?;
            Ok(rho * alpha * xi2 * beta / (s2 + rho * beta))
        }
        SpecialCase::NoCorrelationEqualPowerPerfectCsi => {
            require_uncorrelated(inputs)?;
            require_perfect_csi(inputs)?;
            let beta = require_equal_power(inputs)?;
            Ok(rho * alpha * beta / (s2 + rho * beta))
        }
    }
}

/// Per-user finite-size and limiting SINR of one drop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinrReport {
    pub per_user_sinr: Vec<f64>,
    pub gamma: f64,
    pub per_user_limit: Vec<f64>,
    /// `10 log10` of the mean linear SINR over users.
    pub mean_sinr_db: f64,
    /// Standard deviation over users of the per-user SINR in dB.
    pub std_sinr_db: f64,
}

impl SinrReport {
    pub fn new(per_user_sinr: Vec<f64>, gamma: f64, per_user_limit: Vec<f64>) -> Result<Self> {
        if per_user_sinr.len() != per_user_limit.len() || per_user_sinr.is_empty() {
            return Err(Error::config("SINR and limit vectors must have equal non-zero length"));
        }
        if per_user_sinr
            .iter()
            .chain(&per_user_limit)
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(Error::config("SINR values must be finite and nonnegative"));
        }
        let k = per_user_sinr.len() as f64;
        let mean = per_user_sinr.iter().sum::<f64>() / k;
        let db: Vec<f64> = per_user_sinr.iter().map(|s| to_db(*s)).collect();
        let mean_db = db.iter().sum::<f64>() / k;
        let var = db.iter().map(|d| (d - mean_db).powi(2)).sum::<f64>() / k;
        Ok(SinrReport {
            per_user_sinr,
            gamma,
            per_user_limit,
            mean_sinr_db: to_db(mean),
            std_sinr_db: var.sqrt(),
        })
    }

    /// Computes both the finite-size expected SINR and the limit for one estimate.
    pub fn evaluate(
        g_hat: &ComplexMatrix,
        gains: &LinkGains,
        corr: &TransmitCorrelation,
        params: &SinrParams,
        limit: &LimitInputs,
    ) -> Result<Self> {
        let (sinr, gamma) = expected_sinr(g_hat, gains, corr, params)?;
        SinrReport::new(sinr, gamma, limit_sinr_all(limit)?)
    }

    pub fn mean_sinr(&self) -> f64 {
        self.per_user_sinr.iter().sum::<f64>() / self.per_user_sinr.len() as f64
    }

    pub fn mean_limit(&self) -> f64 {
        self.per_user_limit.iter().sum::<f64>() / self.per_user_limit.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per user: `user_id,sinr_db,limit_db`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "user_id,sinr_db,limit_db")?;
        for (i, (s, l)) in self.per_user_sinr.iter().zip(&self.per_user_limit).enumerate() {
            writeln!(w, "{i},{:.10},{:.10}", to_db(*s), to_db(*l))?;
        }
        Ok(())
    }
}
