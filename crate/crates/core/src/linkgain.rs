//! Large-scale link gains `beta[n, k]` between cluster `n` and user `k`.
//!
//! Two generators are provided: a statistical cell drop (uniform users,
//! distance path loss, i.i.d. log-normal shadowing) and the deterministic
//! exponential limiting profile `beta(x) = beta_max (beta_min / beta_max)^x`
//! sampled at `x = (2k - 1) / 2K`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// How BS2's limiting profile relates to BS1's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Profile {
    /// Profile 1: both clusters see the same gains.
    Same,
    /// Profile 2: BS2's gains are BS1's in reverse user order.
    Reversed,
    /// Profile 3: BS2's gains are BS1's cyclically shifted by `ceil(K/2)`.
    Shifted,
}

impl Profile {
    pub fn from_index(index: u32) -> Result<Self> {
        match index {
            1 => Ok(Profile::Same),
            2 => Ok(Profile::Reversed),
            3 => Ok(Profile::Shifted),
            other => Err(Error::config(format!("profile must be 1, 2 or 3, got {other}"))),
        }
    }

    pub fn index(self) -> u32 {
        match self {
            Profile::Same => 1,
            Profile::Reversed => 2,
            Profile::Shifted => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum GainModel {
    Statistical,
    Limiting(Profile),
}

/// `N x K` matrix of linear link gains.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub beta: DMatrix<f64>,
    pub model: GainModel,
}

impl LinkGains {
    /// Wraps an explicit gain matrix after checking every entry is positive and finite.
    pub fn new(beta: DMatrix<f64>, model: GainModel) -> Result<Self> {
        if beta.nrows() == 0 || beta.ncols() == 0 {
            return Err(Error::config("link gain matrix must be non-empty"));
        }
        if let Some(bad) = beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::config(format!(
                "link gains must be positive and finite, found {bad}"
            )));
        }
        Ok(LinkGains { beta, model })
    }

    pub fn clusters(&self) -> usize {
        self.beta.nrows()
    }

    pub fn users(&self) -> usize {
        self.beta.ncols()
    }

    /// Returns a copy with every gain multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        LinkGains {
            beta: &self.beta * c,
            model: self.model,
        }
    }

    /// CSV with one row per (cluster, user) link.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cluster,user,beta")?;
        for n in 0..self.clusters() {
            for k in 0..self.users() {
                writeln!(w, "{n},{k},{:.17e}", self.beta[(n, k)])?;
            }
        }
        Ok(())
    }
}

/// Positions of one statistical drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropLayout {
    pub bs_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    pub region_radius: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// `N x K` distances used for path loss, i.e. geometric distance capped at `d_max`.
    pub link_distances: DMatrix<f64>,
}

impl DropLayout {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kind,index,x_m,y_m")?;
        for (i, [x, y]) in self.bs_positions.iter().enumerate() {
            writeln!(w, "bs,{i},{x:.17e},{y:.17e}")?;
        }
        for (i, [x, y]) in self.user_positions.iter().enumerate() {
            writeln!(w, "user,{i},{x:.17e},{y:.17e}")?;
        }
        Ok(())
    }
}

/// Parameters of the statistical drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropParams {
    pub clusters: usize,
    pub users: usize,
    pub shadow_sigma_db: f64,
    pub pathloss_exponent: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub region_radius: f64,
    /// Largest gain of the drop after normalization (linear).
    pub beta_max: f64,
}

impl Default for DropParams {
    fn default() -> Self {
        DropParams {
            clusters: 1,
            users: 10,
            shadow_sigma_db: 8.0,
            pathloss_exponent: 4.0,
            d_min: 50.0,
            d_max: 1000.0,
            region_radius: 1000.0,
            beta_max: 10f64.powf(1.5),
        }
    }
}

const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Base station positions: the disc center for one cluster, otherwise
/// equally spaced on the periphery starting at angle zero.
pub fn bs_positions(clusters: usize, radius: f64) -> Vec<[f64; 2]> {
    if clusters == 1 {
        return vec![[0.0, 0.0]];
    }
    (0..clusters)
        .map(|n| {
            let t = 2.0 * PI * n as f64 / clusters as f64;
            [radius * t.cos(), radius * t.sin()]
        })
        .collect()
}

/// One random drop of users and the resulting link gains.
///
/// Users are uniform over the coverage disc and are redrawn while closer
/// than `d_min` to any cluster. Distances beyond `d_max` are capped for the
/// path-loss computation. Gains are `A · L · d^(-gamma)` with `L` log-normal
/// and `A` chosen so the largest gain of the drop equals `beta_max`.
pub fn statistical_drop<R: Rng + ?Sized>(
    rng: &mut R,
    params: &DropParams,
) -> Result<(DropLayout, LinkGains)> {
    let p = params;
    if p.clusters == 0 || p.users == 0 {
        return Err(Error::config("drop needs at least one cluster and one user"));
    }
    if !(p.d_min > 0.0) {
        return Err(Error::config(format!("d_min must be positive, got {}", p.d_min)));
    }
    if !(p.d_max > p.d_min) {
        return Err(Error::config(format!(
            "d_max ({}) must exceed d_min ({})",
            p.d_max, p.d_min
        )));
    }
    if !(p.region_radius > 0.0) {
        return Err(Error::config("region radius must be positive"));
    }
    if !(p.shadow_sigma_db >= 0.0) {
        return Err(Error::config("shadowing standard deviation must be nonnegative"));
    }
    if !(p.beta_max > 0.0 && p.beta_max.is_finite()) {
        return Err(Error::config("beta_max must be positive"));
    }
    let bs = bs_positions(p.clusters, p.region_radius);
    let mut users = Vec::with_capacity(p.users);
    let mut distances = DMatrix::zeros(p.clusters, p.users);
    for k in 0..p.users {
        let mut attempts = 0;
        let pos = loop {
            attempts += 1;
            if attempts > MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::config(format!(
                    "could not place a user at least {} m from every cluster",
                    p.d_min
                )));
            }
            let r = p.region_radius * rng.random::<f64>().sqrt();
            let t = 2.0 * PI * rng.random::<f64>();
            let pos = [r * t.cos(), r * t.sin()];
            if bs
                .iter()
                .all(|b| (pos[0] - b[0]).hypot(pos[1] - b[1]) >= p.d_min)
            {
                break pos;
            }
        };
        for (n, b) in bs.iter().enumerate() {
            distances[(n, k)] = (pos[0] - b[0]).hypot(pos[1] - b[1]).min(p.d_max);
        }
        users.push(pos);
    }

    let shadow = Normal::new(0.0, p.shadow_sigma_db)
        .map_err(|e| Error::config(format!("shadowing: {e}")))?;
    let mut raw = DMatrix::zeros(p.clusters, p.users);
    for k in 0..p.users {
        for n in 0..p.clusters {
            let x_db: f64 = shadow.sample(rng);
            let l = 10f64.powf(x_db / 10.0);
            raw[(n, k)] = l * distances[(n, k)].powf(-p.pathloss_exponent);
        }
    }
    let peak = raw.max();
    let beta = raw * (p.beta_max / peak);
    let gains = LinkGains::new(beta, GainModel::Statistical)?;
    let layout = DropLayout {
        bs_positions: bs,
        user_positions: users,
        region_radius: p.region_radius,
        d_min: p.d_min,
        d_max: p.d_max,
        link_distances: distances,
    };
    Ok((layout, gains))
}

/// Exponential profile `beta(x) = beta_max (beta_min / beta_max)^x`.
pub fn profile_value(x: f64, beta_min: f64, beta_max: f64) -> f64 {
    beta_max * (beta_min / beta_max).powf(x)
}

/// Deterministic link gains from the limiting profile.
pub fn limiting_profile(
    users: usize,
    beta_min: f64,
    beta_max: f64,
    clusters: usize,
    profile: Profile,
) -> Result<LinkGains> {
    if users == 0 {
        return Err(Error::config("limiting profile needs at least one user"));
    }
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max.is_finite()) {
        return Err(Error::config(format!(
            "need 0 < beta_min <= beta_max, got beta_min={beta_min}, beta_max={beta_max}"
        )));
    }
    if clusters == 0 {
        return Err(Error::config("limiting profile needs at least one cluster"));
    }
    if clusters > 2 {
        return Err(Error::Unsupported(format!(
            "the limiting link gain model supports at most 2 clusters, got {clusters}"
        )));
    }
    let row1: Vec<f64> = (1..=users)
        .map(|k| profile_value((2 * k - 1) as f64 / (2 * users) as f64, beta_min, beta_max))
        .collect();
    let mut beta = DMatrix::zeros(clusters, users);
    for (k, v) in row1.iter().enumerate() {
        beta[(0, k)] = *v;
    }
    if clusters == 2 {
        let shift = users.div_ceil(2);
        for k in 0..users {
            beta[(1, k)] = match profile {
                Profile::Same => row1[k],
                Profile::Reversed => row1[users - 1 - k],
                Profile::Shifted => row1[(k + shift) % users],
            };
        }
    }
    LinkGains::new(beta, GainModel::Limiting(profile))
}

/// Finite-size link gain averages entering the SINR limit.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BetaAverages {
    /// Mean over clusters of `beta[n, i]`, per user.
    pub beta_bar_i: Vec<f64>,
    /// Mean over clusters of `beta[n, i]^2`, per user.
    pub beta_sq_bar_i: Vec<f64>,
    /// Grand mean of all gains.
    pub beta_bar: f64,
    /// `1/(N(K-1)) Σ_{k≠i} Σ_n beta[n,i] beta[n,k]`, per user; zero when `K = 1`.
    pub beta_ik_bar: Vec<f64>,
}

pub fn beta_averages(gains: &LinkGains) -> BetaAverages {
    let b = &gains.beta;
    let (n, k) = (b.nrows(), b.ncols());
    let nf = n as f64;
    let row_sums: Vec<f64> = (0..n).map(|r| b.row(r).sum()).collect();
    let mut beta_bar_i = Vec::with_capacity(k);
    let mut beta_sq_bar_i = Vec::with_capacity(k);
    let mut beta_ik_bar = Vec::with_capacity(k);
    for i in 0..k {
        let col = b.column(i);
        beta_bar_i.push(col.sum() / nf);
        beta_sq_bar_i.push(col.iter().map(|v| v * v).sum::<f64>() / nf);
        if k > 1 {
            let cross: f64 = (0..n).map(|r| b[(r, i)] * (row_sums[r] - b[(r, i)])).sum();
            beta_ik_bar.push(cross / (nf * (k - 1) as f64));
        } else {
            beta_ik_bar.push(0.0);
        }
    }
    BetaAverages {
        beta_bar_i,
        beta_sq_bar_i,
        beta_bar: b.sum() / (n * k) as f64,
        beta_ik_bar,
    }
}

/// Large-`K` averages of the single-cluster exponential profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormLimits {
    pub beta_min: f64,
    pub beta_max: f64,
    /// `∫_0^1 beta(x) dx = (beta_max - beta_min) / (ln beta_max - ln beta_min)`.
    pub beta_bar: f64,
}

impl ClosedFormLimits {
    /// Limiting cross-product average of user `i` (1-based) among `users`,
    /// `beta((2i-1)/2K) · beta_bar`.
    pub fn beta_ik_bar(&self, i: usize, users: usize) -> f64 {
        let x = (2 * i - 1) as f64 / (2 * users) as f64;
        profile_value(x, self.beta_min, self.beta_max) * self.beta_bar
    }
}

pub fn closed_form_limits(beta_min: f64, beta_max: f64) -> Result<ClosedFormLimits> {
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max.is_finite()) {
        return Err(Error::config(format!(
            "need 0 < beta_min <= beta_max, got beta_min={beta_min}, beta_max={beta_max}"
        )));
    }
    let log_ratio = beta_max.ln() - beta_min.ln();
    // (e^t - 1)/t -> 1 as t -> 0; use exp_m1 for accuracy near equality.
    let beta_bar = if log_ratio == 0.0 {
        beta_max
    } else {
        beta_min * log_ratio.exp_m1() / log_ratio
    };
    Ok(ClosedFormLimits {
        beta_min,
        beta_max,
        beta_bar,
    })
}
