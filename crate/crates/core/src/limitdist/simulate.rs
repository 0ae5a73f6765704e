//! Monte Carlo simulation of ζ⁽ˢ⁾: the descending eigenvalues of the inverse
//! Gram matrix of an s-dimensional standard Brownian path.
//!
//! Replications run on independent, seed-derived RNG substreams keyed by
//! replication index, and results are merged in index order, so output is
//! identical for any worker count.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::RngExt;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::substream_rng;

/// Retries allowed per replication before a singular Gram matrix aborts.
const MAX_ATTEMPTS: u64 = 10;

/// Simulation settings for critical-value tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SimSettings {
    pub reps: usize,
    pub grid: usize,
    pub seed: u64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            reps: 100_000,
            grid: 2_000,
            seed: 42,
        }
    }
}

/// Simulated draws of ζ⁽ᵈⁱᵐ⁾; row r holds the descending eigenvalues of one
/// inverse Brownian Gram matrix.
#[derive(Clone, Debug)]
pub struct ZetaDraws {
    dim: usize,
    grid: usize,
    seed: u64,
    retries: usize,
    values: DMatrix<f64>,
}

impl ZetaDraws {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reps(&self) -> usize {
        self.values.nrows()
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Replications that hit a singular Gram matrix and were redrawn.
    pub fn retries(&self) -> usize {
        self.retries
    }

    /// reps×dim matrix of draws, rows non-increasing.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// ‖ζ⁽ᵈⁱᵐ⁾‖ per replication: sum of entries (One) or the largest (Inf).
    pub fn norms(&self, norm: NormKind) -> Vec<f64> {
        (0..self.reps())
            .map(|r| match norm {
                NormKind::One => self.values.row(r).sum(),
                NormKind::Inf => self.values[(r, 0)],
            })
            .collect()
    }

    /// All draws of coordinate ζ_j (1-based j).
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.values.column(j - 1).iter().copied().collect()
    }
}

/// Vector norm selector for the test statistics: One sums the entries
/// (trace-type), Inf takes the maximum (largest-root-type).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NormKind {
    One,
    Inf,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::One => "one",
            NormKind::Inf => "inf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "one" | "1" => Ok(NormKind::One),
            "inf" | "max" => Ok(NormKind::Inf),
            other => Err(Error::Domain(format!(
                "unknown norm '{other}', expected 'one' or 'inf'"
            ))),
        }
    }
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// One replication: eigenvalues of the inverse Gram matrix, descending.
/// Returns None when the Gram matrix is numerically singular.
fn draw_inverse_gram_eigs(dim: usize, grid: usize, seed: u64, stream: u64) -> Option<Vec<f64>> {
    let mut rng = substream_rng(seed, stream);
    let step_sd = (1.0 / grid as f64).sqrt();
    let mut path = vec![0.0f64; dim];
    // accumulate the upper triangle of Σ B(u_g)B(u_g)'
    let mut upper = vec![0.0f64; dim * dim];
    for _ in 0..grid {
        for b in path.iter_mut() {
            *b += step_sd * rng.sample::<f64, _>(StandardNormal);
        }
        for a in 0..dim {
            let pa = path[a];
            for c in a..dim {
                upper[a * dim + c] += pa * path[c];
            }
        }
    }
    let gram = DMatrix::from_fn(dim, dim, |r, c| {
        let (a, b) = if r <= c { (r, c) } else { (c, r) };
        upper[a * dim + b] / grid as f64
    });
    let mut eigs: Vec<f64> = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    if !eigs[0].is_finite() || eigs[0] <= 0.0 {
        return None;
    }
    // reciprocals of ascending Gram eigenvalues are descending
    Some(eigs.into_iter().map(|v| 1.0 / v).collect())
}

/// Simulates `reps` draws of ζ⁽ᵈⁱᵐ⁾ from Brownian paths on a uniform grid.
///
/// Each replication uses the RNG substream with its own index; a singular
/// Gram matrix triggers a redraw on a shifted substream, at most
/// [`MAX_ATTEMPTS`] times.
pub fn simulate_zeta(dim: usize, reps: usize, grid: usize, seed: u64) -> Result<ZetaDraws> {
    if dim < 1 || reps < 1 {
        return Err(Error::Domain(format!(
            "need dim >= 1 and reps >= 1, got dim = {dim}, reps = {reps}"
        )));
    }
    if grid < 100 || grid < dim {
        return Err(Error::Domain(format!(
            "need grid >= max(100, dim), got grid = {grid}, dim = {dim}"
        )));
    }
    let rows: Vec<(Vec<f64>, usize)> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            for attempt in 0..MAX_ATTEMPTS {
                let stream = (attempt << 48) | rep;
                if let Some(eigs) = draw_inverse_gram_eigs(dim, grid, seed, stream) {
                    return Ok((eigs, attempt as usize));
                }
            }
            Err(Error::Simulation(format!(
                "singular Brownian Gram matrix in replication {rep} after {MAX_ATTEMPTS} attempts"
            )))
        })
        .collect::<Result<_>>()?;

    let retries = rows.iter().map(|(_, a)| a).sum();
    let values = DMatrix::from_fn(reps, dim, |r, c| rows[r].0[c]);
    Ok(ZetaDraws {
        dim,
        grid,
        seed,
        retries,
        values,
    })
}
