//! Experiment runners.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::ChannelPair;
use crate::correlation::{build_geometry, TransmitCorrelation};
use crate::error::{Error, Result};
use crate::linkgain::{
    beta_averages, limiting_profile, statistical_drop, DropParams, GainModel, LinkGains,
};
use crate::mf::{expected_sinr, limit_sinr_all, LimitInputs, SinrParams};
use crate::rng::{substream, SimRng};
use crate::units::to_db;

use super::cdf::{CdfSeries, SeriesLabel};
use super::config::{ExperimentConfig, ExperimentKind, SystemConfig, VirtualLimit};

/// Λ̄² values for the 1 m, 2.6 GHz, a = 4 array, indexed [N][r_pol].
pub const REFERENCE_LAMBDA_N: [usize; 4] = [1, 2, 5, 10];
pub const REFERENCE_LAMBDA_R: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
pub const REFERENCE_LAMBDA: [[f64; 5]; 4] = [
    [28.71, 29.57, 30.99, 32.98, 35.54],
    [13.95, 14.36, 15.05, 16.02, 17.26],
    [1.42, 1.46, 1.53, 1.63, 1.75],
    [1.17, 1.21, 1.26, 1.34, 1.47],
];

pub fn reference_lambda(n: usize, r_pol: f64) -> Option<f64> {
    let i = REFERENCE_LAMBDA_N.iter().position(|&v| v == n)?;
    let j = REFERENCE_LAMBDA_R
        .iter()
        .position(|&v| (v - r_pol).abs() < 1e-9)?;
    Some(REFERENCE_LAMBDA[i][j])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub k: usize,
    pub n: usize,
    pub xi: f64,
    pub mean_sinr_db: f64,
    /// Std across fading realizations of the user-mean SINR in dB.
    pub std_sinr_db: f64,
    pub limit_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaRecord {
    pub n: usize,
    pub r_pol: f64,
    pub m_per_cluster: usize,
    pub lambda_bar_sq: f64,
    pub reference: Option<f64>,
    pub rel_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ExperimentOutput {
    Convergence(Vec<ConvergenceRecord>),
    Cdf(Vec<CdfSeries>),
    LambdaTable(Vec<LambdaRecord>),
}

impl ExperimentOutput {
    pub fn rows(&self) -> usize {
        match self {
            ExperimentOutput::Convergence(r) => r.len(),
            ExperimentOutput::Cdf(s) => s.iter().map(CdfSeries::len).sum(),
            ExperimentOutput::LambdaTable(r) => r.len(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            ExperimentOutput::Convergence(records) => {
                out.push_str("K,N,xi,mean_sinr_db,std_sinr_db,limit_db\n");
                for r in records {
                    let _ = writeln!(
                        out,
                        "{},{},{},{:.6},{:.6},{:.6}",
                        r.k, r.n, r.xi, r.mean_sinr_db, r.std_sinr_db, r.limit_db
                    );
                }
            }
            ExperimentOutput::Cdf(series) => {
                out.push_str("series,K,N,xi,shadow_sigma_db,correlated,value,cdf\n");
                for (idx, s) in series.iter().enumerate() {
                    let l = &s.label;
                    for (v, p) in s.values.iter().zip(&s.probabilities) {
                        let _ = writeln!(
                            out,
                            "{idx},{},{},{},{},{},{:.6},{:.6}",
                            l.k, l.n, l.xi, l.shadow_sigma_db, l.correlated, v, p
                        );
                    }
                }
            }
            ExperimentOutput::LambdaTable(records) => {
                out.push_str("N,r_pol,m_per_cluster,lambda_bar_sq,reference,rel_deviation\n");
                for r in records {
                    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "{},{},{},{:.6},{},{}",
                        r.n,
                        r.r_pol,
                        r.m_per_cluster,
                        r.lambda_bar_sq,
                        opt(r.reference),
                        opt(r.rel_deviation)
                    );
                }
            }
        }
        out
    }

    /// Short human summary of the result.
    pub fn summary(&self) -> String {
        match self {
            ExperimentOutput::Convergence(r) => match r.last() {
                Some(l) => format!(
                    "{} records; last K={} N={} xi={}: {:.2} dB (limit {:.2} dB)",
                    r.len(),
                    l.k,
                    l.n,
                    l.xi,
                    l.mean_sinr_db,
                    l.limit_db
                ),
                None => "0 records".into(),
            },
            ExperimentOutput::Cdf(series) => {
                let medians: Vec<String> = series
                    .iter()
                    .map(|s| {
                        format!(
                            "K={} N={} xi={} sigma={}: {:.2}",
                            s.label.k,
                            s.label.n,
                            s.label.xi,
                            s.label.shadow_sigma_db,
                            s.median()
                        )
                    })
                    .collect();
                format!("{} series, medians [{}]", series.len(), medians.join("; "))
            }
            ExperimentOutput::LambdaTable(r) => {
                let worst = r
                    .iter()
                    .filter_map(|x| x.rel_deviation.map(f64::abs))
                    .fold(0.0, f64::max);
                format!("{} entries, max |relative deviation| {:.3}", r.len(), worst)
            }
        }
    }
}

/// Validates the config and runs its experiment.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::Convergence => run_convergence(config).map(ExperimentOutput::Convergence),
        ExperimentKind::ErrorCdf => run_error_cdf(config).map(ExperimentOutput::Cdf),
        ExperimentKind::ShadowSweep => run_shadow_sweep(config).map(ExperimentOutput::Cdf),
        ExperimentKind::SinrCdf => run_sinr_cdf(config, CdfMode::MeanUser).map(ExperimentOutput::Cdf),
        ExperimentKind::SingleUserCdf => {
            run_sinr_cdf(config, CdfMode::SingleUser).map(ExperimentOutput::Cdf)
        }
        ExperimentKind::LambdaTable => run_lambda_table(config).map(ExperimentOutput::LambdaTable),
    }
}

/// Transmit correlation of one cluster with `m_per_cluster` antennas.
pub fn cluster_correlation(
    system: &SystemConfig,
    m_per_cluster: usize,
    r_pol: f64,
) -> Result<TransmitCorrelation> {
    if !system.correlated {
        return Ok(TransmitCorrelation::identity(m_per_cluster));
    }
    let geom = build_geometry(m_per_cluster, system.side_length_m, system.carrier_freq_hz)?;
    TransmitCorrelation::build(&geom, system.corr_a, r_pol, system.distance_unit()?)
}

#[derive(Default)]
struct CorrelationCache {
    entries: BTreeMap<usize, Arc<TransmitCorrelation>>,
}

impl CorrelationCache {
    fn get(&mut self, system: &SystemConfig, m_per_cluster: usize) -> Result<Arc<TransmitCorrelation>> {
        if let Some(c) = self.entries.get(&m_per_cluster) {
            return Ok(c.clone());
        }
        let c = Arc::new(cluster_correlation(system, m_per_cluster, system.r_pol)?);
        self.entries.insert(m_per_cluster, c.clone());
        Ok(c)
    }
}

fn antennas(config: &ExperimentConfig, k: usize) -> Result<usize> {
    config
        .antennas(k)
        .ok_or_else(|| Error::config(format!("K * alpha is not an integer for K = {k}")))
}

fn sinr_params(system: &SystemConfig, xi: f64) -> SinrParams {
    SinrParams {
        rho_f: system.rho_f(),
        xi,
        noise_power: system.noise_power,
    }
}

fn limit_inputs(system: &SystemConfig, xi: f64, lambda_bar_sq: f64, gains: &LinkGains) -> LimitInputs {
    LimitInputs {
        rho_f: system.rho_f(),
        alpha: system.alpha,
        xi,
        lambda_bar_sq,
        averages: beta_averages(gains),
        noise_power: system.noise_power,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn cell_labels(tag: u64, k: usize, n: usize, xi: f64, sigma: f64, index: usize) -> [u64; 6] {
    [tag, k as u64, n as u64, xi.to_bits(), sigma.to_bits(), index as u64]
}

/// Mean SINR and limit curves under the limiting link gain model.
pub fn run_convergence(config: &ExperimentConfig) -> Result<Vec<ConvergenceRecord>> {
    let sys = &config.system;
    let profile = sys.profile()?;
    let mut cache = CorrelationCache::default();
    let mut records = Vec::new();
    for &k in &config.k_values {
        let m = antennas(config, k)?;
        for &n in &config.n_values {
            if n > 2 {
                return Err(Error::Unsupported(format!(
                    "the limiting link gain model supports N <= 2, got N = {n}"
                )));
            }
            let gains = limiting_profile(k, sys.beta_min(), sys.beta_max(), n, profile)?;
            let corr = cache.get(sys, m / n)?;
            for &xi in &config.xi_values {
                let params = sinr_params(sys, xi);
                let user_means = (0..config.n_fading_realizations)
                    .into_par_iter()
                    .map(|r| {
                        let mut rng = substream(
                            config.seed,
                            &cell_labels(config.experiment.tag(), k, n, xi, 0.0, r),
                        );
                        let pair = ChannelPair::sample(&mut rng, &gains, &corr, xi)?;
                        let (sinr, _) = expected_sinr(&pair.g_hat, &gains, &corr, &params)?;
                        Ok(mean(&sinr))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let db: Vec<f64> = user_means.iter().map(|s| to_db(*s)).collect();
                let mean_db = mean(&db);
                let var = db.iter().map(|d| (d - mean_db).powi(2)).sum::<f64>()
                    / (db.len().max(2) - 1) as f64;
                let limit = mean(&limit_sinr_all(&limit_inputs(
                    sys,
                    xi,
                    corr.lambda_bar_sq(),
                    &gains,
                ))?);
                records.push(ConvergenceRecord {
                    k,
                    n,
                    xi,
                    mean_sinr_db: to_db(mean(&user_means)),
                    std_sinr_db: if db.len() > 1 { var.sqrt() } else { 0.0 },
                    limit_db: to_db(limit),
                });
            }
        }
    }
    Ok(records)
}

/// Result of one statistical drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropOutcome {
    /// Expected SINR of every user (averaged over fading if requested).
    pub user_sinr: Vec<f64>,
    pub mean_sinr: f64,
    /// Mean over users of the limit for this drop's link gains.
    pub mean_limit: f64,
}

impl DropOutcome {
    pub fn error_pct(&self) -> f64 {
        error_pct(self.mean_sinr, self.mean_limit)
    }
}

/// Relative deviation of the limit from the simulated mean SINR, in percent.
pub fn error_pct(mean_sinr: f64, mean_limit: f64) -> f64 {
    (mean_limit - mean_sinr).abs() / mean_sinr * 100.0
}

/// Parameters shared by every drop of one CDF cell.
#[derive(Debug, Clone)]
pub struct DropSetup {
    pub drop: DropParams,
    pub sinr: SinrParams,
    pub corr: Arc<TransmitCorrelation>,
    pub fading_draws: usize,
    pub virtual_system: Option<VirtualSystem>,
}

/// Large system used for the simulated virtual limit.
#[derive(Debug, Clone)]
pub struct VirtualSystem {
    pub users: usize,
    pub corr: Arc<TransmitCorrelation>,
}

/// Draws one drop and evaluates it. `limit_of` gives the per-user limit of
/// the drop's gains.
pub fn evaluate_drop(
    rng: &mut SimRng,
    setup: &DropSetup,
    limit_of: &dyn Fn(&LinkGains) -> Result<Vec<f64>>,
) -> Result<DropOutcome> {
    let (_, gains) = statistical_drop(rng, &setup.drop)?;
    let users = gains.users();
    let mut acc = vec![0.0; users];
    for _ in 0..setup.fading_draws {
        let pair = ChannelPair::sample(rng, &gains, &setup.corr, setup.sinr.xi)?;
        let (sinr, _) = expected_sinr(&pair.g_hat, &gains, &setup.corr, &setup.sinr)?;
        for (a, s) in acc.iter_mut().zip(sinr) {
            *a += s;
        }
    }
    let user_sinr: Vec<f64> = acc.iter().map(|a| a / setup.fading_draws as f64).collect();
    let mean_limit = match &setup.virtual_system {
        None => mean(&limit_of(&gains)?),
        Some(v) => simulate_virtual(rng, setup, v, &gains)?,
    };
    Ok(DropOutcome {
        mean_sinr: mean(&user_sinr),
        user_sinr,
        mean_limit,
    })
}

/// Mean expected SINR of a large system whose users cycle through the
/// columns of `gains`.
fn simulate_virtual(
    rng: &mut SimRng,
    setup: &DropSetup,
    v: &VirtualSystem,
    gains: &LinkGains,
) -> Result<f64> {
    let k = gains.users();
    let beta = DMatrix::from_fn(gains.clusters(), v.users, |n, j| gains.beta[(n, j % k)]);
    let big = LinkGains::new(beta, GainModel::Statistical)?;
    let pair = ChannelPair::sample(rng, &big, &v.corr, setup.sinr.xi)?;
    let (sinr, _) = expected_sinr(&pair.g_hat, &big, &v.corr, &setup.sinr)?;
    Ok(mean(&sinr))
}

/// Smallest user count whose antenna count is at least `target`, a whole
/// number and a multiple of `2 n`.
fn virtual_users(config: &ExperimentConfig, n: usize, target: usize) -> Result<usize> {
    let start = (target as f64 / config.system.alpha).ceil().max(1.0) as usize;
    (start..start + 100_000)
        .find(|&k| config.antennas(k).is_some_and(|m| m % (2 * n) == 0))
        .ok_or_else(|| Error::config("no valid virtual system size for the given alpha and N"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CdfValue {
    ErrorPct,
    MeanSinrDb,
    TaggedUserDb(usize),
}

fn run_cdf_cells(
    config: &ExperimentConfig,
    sigmas: &[f64],
    value: CdfValue,
) -> Result<Vec<CdfSeries>> {
    let sys = &config.system;
    let mut cache = CorrelationCache::default();
    let mut series = Vec::new();
    for &k in &config.k_values {
        let m = antennas(config, k)?;
        for &n in &config.n_values {
            let corr = cache.get(sys, m / n)?;
            let lambda = corr.lambda_bar_sq();
            let virtual_system = match (value, config.virtual_limit) {
                (CdfValue::ErrorPct, VirtualLimit::Simulated) => {
                    let users = virtual_users(config, n, config.virtual_limit_antennas)?;
                    let mv = antennas(config, users)?;
                    Some(VirtualSystem {
                        users,
                        corr: cache.get(sys, mv / n)?,
                    })
                }
                _ => None,
            };
            for &xi in &config.xi_values {
                for &sigma in sigmas {
                    let setup = DropSetup {
                        drop: DropParams {
                            clusters: n,
                            users: k,
                            shadow_sigma_db: sigma,
                            pathloss_exponent: sys.pathloss_exponent,
                            d_min: sys.d_min_m,
                            d_max: sys.d_max_m,
                            region_radius: sys.region_radius_m,
                            beta_max: sys.beta_max(),
                        },
                        sinr: sinr_params(sys, xi),
                        corr: corr.clone(),
                        fading_draws: if config.average_fading {
                            config.n_fading_realizations
                        } else {
                            1
                        },
                        virtual_system: virtual_system.clone(),
                    };
                    let limit_of = |g: &LinkGains| limit_sinr_all(&limit_inputs(sys, xi, lambda, g));
                    let samples = (0..config.n_drops)
                        .into_par_iter()
                        .map(|d| {
                            let mut rng = substream(
                                config.seed,
                                &cell_labels(config.experiment.tag(), k, n, xi, sigma, d),
                            );
                            let o = evaluate_drop(&mut rng, &setup, &limit_of)?;
                            Ok(match value {
                                CdfValue::ErrorPct => o.error_pct(),
                                CdfValue::MeanSinrDb => to_db(o.mean_sinr),
                                CdfValue::TaggedUserDb(u) => to_db(o.user_sinr[u]),
                            })
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    let label = SeriesLabel {
                        k,
                        n,
                        xi,
                        shadow_sigma_db: sigma,
                        correlated: sys.correlated,
                    };
                    series.push(CdfSeries::from_samples(label, samples)?);
                }
            }
        }
    }
    Ok(series)
}

/// CDF over drops of the Error % between mean SINR and its limit.
pub fn run_error_cdf(config: &ExperimentConfig) -> Result<Vec<CdfSeries>> {
    run_cdf_cells(config, &[config.system.shadow_sigma_db], CdfValue::ErrorPct)
}

/// CDF over drops of the mean per-user SINR for each shadowing spread.
pub fn run_shadow_sweep(config: &ExperimentConfig) -> Result<Vec<CdfSeries>> {
    run_cdf_cells(config, &config.shadow_sigma_values, CdfValue::MeanSinrDb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdfMode {
    MeanUser,
    SingleUser,
}

/// CDF over drops of the mean per-user SINR or of one tagged user's SINR.
pub fn run_sinr_cdf(config: &ExperimentConfig, mode: CdfMode) -> Result<Vec<CdfSeries>> {
    let value = match mode {
        CdfMode::MeanUser => CdfValue::MeanSinrDb,
        CdfMode::SingleUser => CdfValue::TaggedUserDb(config.tagged_user),
    };
    run_cdf_cells(config, &[config.system.shadow_sigma_db], value)
}

/// Λ̄² over the (N, r_pol) grid with the total antenna count fixed.
pub fn run_lambda_table(config: &ExperimentConfig) -> Result<Vec<LambdaRecord>> {
    let mut sys = config.system.clone();
    sys.correlated = true;
    let mut records = Vec::new();
    for &n in &config.n_values {
        let m_per_cluster = config.lambda_table_m / n;
        for &r_pol in &config.r_pol_values {
            let corr = cluster_correlation(&sys, m_per_cluster, r_pol)?;
            let value = corr.lambda_bar_sq();
            let reference = reference_lambda(n, r_pol);
            records.push(LambdaRecord {
                n,
                r_pol,
                m_per_cluster,
                lambda_bar_sq: value,
                reference,
                rel_deviation: reference.map(|r| (value - r) / r),
            });
        }
    }
    Ok(records)
}
