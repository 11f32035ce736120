//! Channel synthesis and the imperfect-CSI model.
//!
//! The stacked `M x K` channel has block `(n, k)` equal to
//! `sqrt(beta[n,k]) · R_t^(1/2) · H[n,k]` with `H` i.i.d. CN(0, 1). Column
//! `i` therefore has covariance `P_i = blockdiag(beta[1,i] R_t, ..., beta[N,i] R_t)`,
//! which is never materialized on the hot path.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::correlation::TransmitCorrelation;
use crate::error::{Error, Result};
use crate::linkgain::LinkGains;
use crate::rng::complex_normal;

pub type ComplexMatrix = DMatrix<Complex64>;

/// `a · z` for real `a` and complex `z`, as two real products.
pub(crate) fn real_times_complex(a: &DMatrix<f64>, z: &ComplexMatrix) -> ComplexMatrix {
    let re = z.map(|c| c.re);
    let im = z.map(|c| c.im);
    let pr = a * re;
    let pi = a * im;
    pr.zip_map(&pi, Complex64::new)
}

fn check_dims(gains: &LinkGains, corr: &TransmitCorrelation) -> Result<()> {
    if corr.dim() == 0 || gains.users() == 0 || gains.clusters() == 0 {
        return Err(Error::config("empty channel dimensions"));
    }
    Ok(())
}

/// Draws one channel realization `G` (`M x K`, `M = N · dim(R_t)`).
///
/// Entries of `H` are drawn cluster by cluster, column-major within a
/// cluster, independently of the gains: scaling `beta` by `c` scales the
/// result by `sqrt(c)` for the same stream.
pub fn sample_channel<R: Rng + ?Sized>(
    rng: &mut R,
    gains: &LinkGains,
    corr: &TransmitCorrelation,
) -> Result<ComplexMatrix> {
    check_dims(gains, corr)?;
    let dim = corr.dim();
    let (n_clusters, k_users) = (gains.clusters(), gains.users());
    let mut g = ComplexMatrix::zeros(n_clusters * dim, k_users);
    for n in 0..n_clusters {
        let mut h = ComplexMatrix::zeros(dim, k_users);
        for k in 0..k_users {
            for m in 0..dim {
                h[(m, k)] = complex_normal(rng, 1.0);
            }
        }
        let block = if corr.is_identity() {
            h
        } else {
            real_times_complex(corr.sqrt_matrix(), &h)
        };
        for k in 0..k_users {
            let s = gains.beta[(n, k)].sqrt();
            for m in 0..dim {
                g[(n * dim + m, k)] = block[(m, k)] * s;
            }
        }
    }
    Ok(g)
}

/// `ξ G + sqrt(1 - ξ²) E` with a fresh, independent `E` drawn like `G`.
///
/// At `ξ = 1` the input is returned unchanged and no randomness is consumed.
pub fn apply_imperfect_csi<R: Rng + ?Sized>(
    rng: &mut R,
    g: &ComplexMatrix,
    xi: f64,
    gains: &LinkGains,
    corr: &TransmitCorrelation,
) -> Result<ComplexMatrix> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::config(format!("xi must lie in [0, 1], got {xi}")));
    }
    if g.nrows() != gains.clusters() * corr.dim() || g.ncols() != gains.users() {
        return Err(Error::config(format!(
            "channel is {}x{} but gains/correlation imply {}x{}",
            g.nrows(),
            g.ncols(),
            gains.clusters() * corr.dim(),
            gains.users()
        )));
    }
    if xi == 1.0 {
        return Ok(g.clone());
    }
    let e = sample_channel(rng, gains, corr)?;
    let w = (1.0 - xi * xi).sqrt();
    Ok(g.zip_map(&e, |a, b| a * xi + b * w))
}

/// True channel together with the transmitter's estimate.
#[derive(Debug, Clone)]
pub struct ChannelPair {
    pub g: ComplexMatrix,
    pub g_hat: ComplexMatrix,
    pub xi: f64,
}

impl ChannelPair {
    pub fn sample<R: Rng + ?Sized>(
        rng: &mut R,
        gains: &LinkGains,
        corr: &TransmitCorrelation,
        xi: f64,
    ) -> Result<Self> {
        let g = sample_channel(rng, gains, corr)?;
        let g_hat = apply_imperfect_csi(rng, &g, xi, gains, corr)?;
        Ok(ChannelPair { g, g_hat, xi })
    }
}

/// Spectral form of user `i`'s covariance `P_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserGainSpectrum {
    pub user: usize,
    /// `(beta[1,i], ..., beta[N,i])`.
    pub cluster_gains: Vec<f64>,
    /// Eigenvalues of `P_i`: `beta[n,i] · Λ` concatenated over `n`.
    pub q_eigenvalues: DVector<f64>,
}

impl UserGainSpectrum {
    pub fn dim(&self) -> usize {
        self.q_eigenvalues.len()
    }

    pub fn trace(&self) -> f64 {
        self.q_eigenvalues.sum()
    }
}

pub fn user_gain_spectrum(
    user: usize,
    gains: &LinkGains,
    corr: &TransmitCorrelation,
) -> Result<UserGainSpectrum> {
    if user >= gains.users() {
        return Err(Error::config(format!(
            "user index {user} out of range for {} users",
            gains.users()
        )));
    }
    let dim = corr.dim();
    let cluster_gains: Vec<f64> = gains.beta.column(user).iter().copied().collect();
    let lambda = corr.eigenvalues();
    let q = DVector::from_fn(cluster_gains.len() * dim, |m, _| {
        cluster_gains[m / dim] * lambda[m % dim]
    });
    Ok(UserGainSpectrum {
        user,
        cluster_gains,
        q_eigenvalues: q,
    })
}

/// Dense `P_i`. Only meant for small systems and cross-checks.
pub fn user_gain_matrix(user: usize, gains: &LinkGains, corr: &TransmitCorrelation) -> DMatrix<f64> {
    let dim = corr.dim();
    let n = gains.clusters();
    let mut p = DMatrix::zeros(n * dim, n * dim);
    for c in 0..n {
        let b = gains.beta[(c, user)];
        p.view_mut((c * dim, c * dim), (dim, dim))
            .copy_from(&(corr.matrix() * b));
    }
    p
}

/// `(1/M) Σ_m q_m |v_m|²` for a fresh standard complex Gaussian `v`.
/// Concentrates at `mean(beta[., i])` as `M` grows.
pub fn quadratic_form_limit_check<R: Rng + ?Sized>(
    rng: &mut R,
    spectrum: &UserGainSpectrum,
) -> f64 {
    let m = spectrum.dim();
    spectrum
        .q_eigenvalues
        .iter()
        .map(|q| q * complex_normal(rng, 1.0).norm_sqr())
        .sum::<f64>()
        / m as f64
}

/// Per-cluster correlated energies `w[n, k] = s^H R_t s` of the segment `s`
/// of column `k` belonging to cluster `n`.
///
/// With these, `x_k^H P_i x_k = Σ_n beta[n,i] · w[n,k]` for any column `x_k`.
pub fn cluster_energies(
    x: &ComplexMatrix,
    clusters: usize,
    corr: &TransmitCorrelation,
) -> DMatrix<f64> {
    let dim = corr.dim();
    let k_users = x.ncols();
    let mut w = DMatrix::zeros(clusters, k_users);
    for n in 0..clusters {
        let seg = x.rows(n * dim, dim).into_owned();
        if corr.is_identity() {
            for k in 0..k_users {
                w[(n, k)] = seg.column(k).norm_squared();
            }
        } else {
            let rs = real_times_complex(corr.matrix(), &seg);
            for k in 0..k_users {
                let e: Complex64 = seg
                    .column(k)
                    .iter()
                    .zip(rs.column(k).iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                w[(n, k)] = e.re;
            }
        }
    }
    w
}

/// CSV dump with one quoted `"re,im"` cell per entry.
pub fn write_channel_csv<W: Write>(g: &ComplexMatrix, mut w: W) -> Result<()> {
    for i in 0..g.nrows() {
        let row: Vec<String> = (0..g.ncols())
            .map(|j| format!("\"{:.17e},{:.17e}\"", g[(i, j)].re, g[(i, j)].im))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
