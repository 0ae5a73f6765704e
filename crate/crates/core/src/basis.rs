//! Orthonormal L²[0,1] basis functions and the discretized design matrix
//! forming the deterministic side of the canonical correlation analysis.

use nalgebra::DMatrix;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Basis family used to build design vectors.
///
/// Only the sine (Karhunen-Loeve) system is shipped: element k is
/// √2·sin((k−½)πu), the eigenfunctions of the Brownian covariance kernel.
/// The limit law of the scaled eigenvalue statistics is specific to this
/// basis, so downstream tests are only valid for `KarhunenLoeve` designs;
/// the enumeration exists to make that coupling explicit and extensible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisKind {
    KarhunenLoeve,
}

impl BasisKind {
    /// Short tag used in provenance fields and reports.
    pub fn as_str(self) -> &'static str {
        match self {
            BasisKind::KarhunenLoeve => "kl",
        }
    }
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// T×K matrix of basis values; row t holds (φ₁(t/T), ..., φ_K(t/T)).
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    kind: BasisKind,
}

impl DesignMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Number of time points (rows).
    pub fn t_len(&self) -> usize {
        self.values.nrows()
    }

    /// Number of basis elements (columns).
    pub fn k(&self) -> usize {
        self.values.ncols()
    }
}

fn kl_value_unchecked(k: usize, u: f64) -> f64 {
    std::f64::consts::SQRT_2 * ((k as f64 - 0.5) * PI * u).sin()
}

/// Value of the k-th sine basis element at u: √2·sin((k−½)πu).
///
/// Errors with [`Error::Domain`] if `k < 1` or `u` lies outside [0, 1].
pub fn kl_basis_value(k: usize, u: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain(format!("basis index k = {k} must be >= 1")));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!(
            "basis argument u = {u} outside [0, 1]"
        )));
    }
    Ok(kl_value_unchecked(k, u))
}

/// Design matrix with entry (t, k) = φ_k(t/T) on the grid t/T, t = 1..T.
///
/// The grid starts at 1/T and ends at 1 (no point at u = 0), so the matrix is
/// a pure function of (T, K, kind). Requires T ≥ K ≥ 1.
pub fn design_matrix(t_len: usize, k: usize, kind: BasisKind) -> Result<DesignMatrix> {
    if t_len == 0 || k == 0 {
        return Err(Error::Dimension(format!(
            "design matrix needs T >= 1 and K >= 1, got T = {t_len}, K = {k}"
        )));
    }
    if k > t_len {
        return Err(Error::Dimension(format!(
            "design matrix needs K <= T, got K = {k}, T = {t_len}"
        )));
    }
    let t_f = t_len as f64;
    let values = DMatrix::from_fn(t_len, k, |t, j| {
        kl_value_unchecked(j + 1, (t + 1) as f64 / t_f)
    });
    Ok(DesignMatrix { values, kind })
}

/// Default number of basis elements: ⌈T^(3/4)⌉.
///
/// The float power is corrected by exact integer comparisons of K⁴ against
/// T³, so integer-valued powers (e.g. T = 10000 → 1000) never drift to the
/// neighbouring integer. Exact ties keep the integer (no +1).
pub fn default_k(t_len: usize) -> usize {
    assert!(t_len >= 1, "default_k needs T >= 1");
    let t3 = (t_len as u128).pow(3);
    let mut k = (t_len as f64).powf(0.75).ceil() as u128;
    k = k.max(1);
    // smallest k with k^4 >= T^3
    while k > 1 && (k - 1).pow(4) >= t3 {
        k -= 1;
    }
    while k.pow(4) < t3 {
        k += 1;
    }
    k as usize
}
