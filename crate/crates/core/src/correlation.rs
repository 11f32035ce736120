//! Antenna cluster geometry and transmit spatial correlation.
//!
//! Each cluster holds `M/N` elements arranged as `M/(2N)` cross-polarized
//! pairs on a square array. The pair-to-pair correlation follows the
//! exponential model `rho_ij = a^(-d_ij)` and the full matrix has the
//! Kronecker form `R_t = rho ⊗ X_pol`, where `X_pol = [[1, r], [r, 1]]`.
//!
//! The Kronecker form is used for the spectral data as well: the
//! eigenpairs of `R_t` are products of the eigenpairs of the pair matrix
//! `rho` and of `X_pol`, and `R_t^(1/2) = rho^(1/2) ⊗ X_pol^(1/2)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::units::SPEED_OF_LIGHT;

/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as round-off and set to zero.
pub const PSD_CLAMP: f64 = 1e-8;

/// How pair distances enter the exponential correlation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceUnit {
    /// Distances divided by the carrier wavelength.
    #[default]
    Wavelength,
    /// Distances in meters.
    Meter,
}

impl std::str::FromStr for DistanceUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wavelength" | "wavelengths" => Ok(DistanceUnit::Wavelength),
            "meter" | "meters" | "m" => Ok(DistanceUnit::Meter),
            other => Err(Error::config(format!(
                "distance_unit must be 'wavelength' or 'meter', got '{other}'"
            ))),
        }
    }
}

/// Positions of the x-pol pairs of one antenna cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub side_length: f64,
    pub carrier_freq: f64,
    pub wavelength: f64,
    pub pair_positions: Vec<[f64; 2]>,
}

impl ArrayGeometry {
    pub fn num_pairs(&self) -> usize {
        self.pair_positions.len()
    }

    /// Number of antenna elements (two per pair).
    pub fn num_elements(&self) -> usize {
        2 * self.pair_positions.len()
    }

    /// Distance between pairs `i` and `j` in the requested unit.
    pub fn distance(&self, i: usize, j: usize, unit: DistanceUnit) -> f64 {
        let [xi, yi] = self.pair_positions[i];
        let [xj, yj] = self.pair_positions[j];
        let d = (xi - xj).hypot(yi - yj);
        match unit {
            DistanceUnit::Wavelength => d / self.wavelength,
            DistanceUnit::Meter => d,
        }
    }
}

/// Grid dimensions (rows, columns) used to place `pairs` points.
///
/// A perfect square gives an `r x r` grid. Otherwise `r = floor(sqrt(pairs))`
/// and `c = ceil(pairs / r)`; rows are then trimmed to the number actually
/// needed for row-major filling.
pub fn grid_shape(pairs: usize) -> (usize, usize) {
    let r = (pairs as f64).sqrt().floor() as usize;
    let r = r.max(1);
    let c = pairs.div_ceil(r);
    let rows = pairs.div_ceil(c);
    (rows, c)
}

/// Lays out `m_per_cluster / 2` x-pol pairs on a uniform grid spanning a
/// `side_length` square. A partial last row is centered horizontally.
pub fn build_geometry(
    m_per_cluster: usize,
    side_length: f64,
    carrier_freq: f64,
) -> Result<ArrayGeometry> {
    if m_per_cluster == 0 || !m_per_cluster.is_multiple_of(2) {
        return Err(Error::config(format!(
            "antennas per cluster must be a positive even number (x-pol pairs), got {m_per_cluster}"
        )));
    }
    if !(side_length > 0.0 && side_length.is_finite()) {
        return Err(Error::config(format!(
            "array side length must be positive, got {side_length}"
        )));
    }
    if !(carrier_freq > 0.0 && carrier_freq.is_finite()) {
        return Err(Error::config(format!(
            "carrier frequency must be positive, got {carrier_freq}"
        )));
    }
    let pairs = m_per_cluster / 2;
    let (rows, cols) = grid_shape(pairs);
    let coord = |idx: usize, count: usize| {
        if count == 1 {
            0.5 * side_length
        } else {
            idx as f64 * side_length / (count - 1) as f64
        }
    };
    let mut positions = Vec::with_capacity(pairs);
    for row in 0..rows {
        let in_row = (pairs - row * cols).min(cols);
        let offset = (cols - in_row) as f64 / 2.0;
        let y = coord(row, rows);
        for col in 0..in_row {
            let x = if cols == 1 {
                0.5 * side_length
            } else {
                (col as f64 + offset) * side_length / (cols - 1) as f64
            };
            positions.push([x, y]);
        }
    }
    debug_assert_eq!(positions.len(), pairs);
    Ok(ArrayGeometry {
        side_length,
        carrier_freq,
        wavelength: SPEED_OF_LIGHT / carrier_freq,
        pair_positions: positions,
    })
}

/// Exponential correlation coefficient `a^(-d)`.
pub fn exp_correlation(a: f64, d: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::config(format!(
            "correlation base a must be positive, got {a}"
        )));
    }
    if !(d >= 0.0) {
        return Err(Error::config(format!("distance must be nonnegative, got {d}")));
    }
    Ok(a.powf(-d))
}

/// Transmit correlation matrix of one cluster with cached spectral data.
#[derive(Debug, Clone)]
pub struct TransmitCorrelation {
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    sqrt_matrix: DMatrix<f64>,
    identity: bool,
}

impl TransmitCorrelation {
    /// Uncorrelated cluster of `dim` elements: `R_t = I`.
    pub fn identity(dim: usize) -> Self {
        TransmitCorrelation {
            matrix: DMatrix::identity(dim, dim),
            eigenvalues: DVector::from_element(dim, 1.0),
            eigenvectors: DMatrix::identity(dim, dim),
            sqrt_matrix: DMatrix::identity(dim, dim),
            identity: true,
        }
    }

    /// Assembles `R_t = rho ⊗ X_pol` for the given geometry.
    pub fn build(
        geometry: &ArrayGeometry,
        a: f64,
        r_pol: f64,
        unit: DistanceUnit,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&r_pol) {
            return Err(Error::config(format!(
                "r_pol must lie in [0, 1), got {r_pol}"
            )));
        }
        if !(a >= 1.0) || !a.is_finite() {
            return Err(Error::config(format!(
                "correlation base a must be >= 1 so that a^(-d) <= 1, got {a}"
            )));
        }
        let pairs = geometry.num_pairs();
        if pairs == 0 {
            return Err(Error::config("geometry has no antenna pairs"));
        }
        let mut rho = DMatrix::<f64>::identity(pairs, pairs);
        for i in 0..pairs {
            for j in (i + 1)..pairs {
                let v = exp_correlation(a, geometry.distance(i, j, unit))?;
                rho[(i, j)] = v;
                rho[(j, i)] = v;
            }
        }
        Self::from_pair_matrix(rho, r_pol)
    }

    /// Builds the correlation from an explicit symmetric pair matrix.
    pub fn from_pair_matrix(rho: DMatrix<f64>, r_pol: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r_pol) {
            return Err(Error::config(format!(
                "r_pol must lie in [0, 1), got {r_pol}"
            )));
        }
        if !rho.is_square() {
            return Err(Error::config("pair correlation matrix must be square"));
        }
        let pairs = rho.nrows();
        let eig = SymmetricEigen::new(rho.clone());
        let mut pair_vals = eig.eigenvalues;
        let mut clamped = false;
        let min = pair_vals.min();
        // The smallest element eigenvalue is min(rho) * (1 - r_pol).
        if min * (1.0 - r_pol) < -PSD_CLAMP {
            return Err(Error::Indefinite {
                min_eigenvalue: min * (1.0 - r_pol),
            });
        }
        for v in pair_vals.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                clamped = true;
            }
        }
        let u = eig.eigenvectors;

        let xpol = DMatrix::from_row_slice(2, 2, &[1.0, r_pol, r_pol, 1.0]);
        let xpol_vals = [1.0 + r_pol, 1.0 - r_pol];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let xpol_vecs = DMatrix::from_row_slice(2, 2, &[s, s, s, -s]);
        let (s1, s2) = (xpol_vals[0].sqrt(), xpol_vals[1].sqrt());
        let xpol_sqrt = DMatrix::from_row_slice(
            2,
            2,
            &[
                0.5 * (s1 + s2),
                0.5 * (s1 - s2),
                0.5 * (s1 - s2),
                0.5 * (s1 + s2),
            ],
        );

        let rho = if clamped {
            &u * DMatrix::from_diagonal(&pair_vals) * u.transpose()
        } else {
            rho
        };
        let rho_sqrt = &u * DMatrix::from_diagonal(&pair_vals.map(f64::sqrt)) * u.transpose();

        let dim = 2 * pairs;
        let mut eigenvalues = DVector::zeros(dim);
        for j in 0..pairs {
            for c in 0..2 {
                eigenvalues[2 * j + c] = pair_vals[j] * xpol_vals[c];
            }
        }
        Ok(TransmitCorrelation {
            matrix: rho.kronecker(&xpol),
            eigenvalues,
            eigenvectors: u.kronecker(&xpol_vecs),
            sqrt_matrix: rho_sqrt.kronecker(&xpol_sqrt),
            identity: false,
        })
    }

    /// Dimension `M/N`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Eigenvalues `Λ`, ordered consistently with the columns of [`Self::eigenvectors`].
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn sqrt_matrix(&self) -> &DMatrix<f64> {
        &self.sqrt_matrix
    }

    /// True when built with [`TransmitCorrelation::identity`]; enables the
    /// uncorrelated fast paths elsewhere.
    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Average squared eigenvalue.
    pub fn lambda_bar_sq(&self) -> f64 {
        lambda_bar_sq(self)
    }

    /// Writes the matrix as row-major CSV in full-precision scientific notation.
    pub fn write_matrix_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| format!("{:.17e}", self.matrix[(i, j)]))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Writes the eigenvalues one per line.
    pub fn write_eigenvalues_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,eigenvalue")?;
        for (i, v) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{i},{v:.17e}")?;
        }
        Ok(())
    }
}

/// `(N/M) Σ Λ_ii²`, the mean of the squared eigenvalues of `R_t`.
pub fn lambda_bar_sq(corr: &TransmitCorrelation) -> f64 {
    let n = corr.eigenvalues.len() as f64;
    corr.eigenvalues.iter().map(|l| l * l).sum::<f64>() / n
}
