//! Moment matrices and squared canonical correlations between a series panel
//! and a design matrix.
//!
//! The generalized eigenvalue problem |λ·M_yy − M_yd·M_dd⁻¹·M_dy| = 0 is
//! solved by symmetric whitening: factor M_yy = LLᵀ and take the eigenvalues
//! of L⁻¹·M_yd·M_dd⁻¹·M_dy·L⁻ᵀ, which are real and lie in [0, 1] up to
//! rounding. Moments are raw second moments; any centering happens upstream.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::basis::DesignMatrix;
use crate::error::{Error, Result};

/// Condition-number cap above which a moment matrix is declared singular.
pub const DEFAULT_COND_CAP: f64 = 1e12;

/// Eigenvalue clamping beyond this amount is flagged as a diagnostic.
pub const CLAMP_DIAGNOSTIC: f64 = 1e-8;

/// A T×p observed panel with column labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesPanel {
    values: DMatrix<f64>,
    labels: Vec<String>,
}

impl SeriesPanel {
    /// Wraps a T×p value matrix; all entries must be finite, labels must
    /// match the column count, and both dimensions must be at least 1.
    pub fn new(values: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "panel needs T >= 1 and p >= 1, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if labels.len() != values.ncols() {
            return Err(Error::Dimension(format!(
                "{} labels for {} columns",
                labels.len(),
                values.ncols()
            )));
        }
        if let Some((t, c)) = first_non_finite(&values) {
            return Err(Error::NonFinite(format!(
                "panel entry at row {}, column {} ({})",
                t + 1,
                c + 1,
                labels[c]
            )));
        }
        Ok(Self { values, labels })
    }

    /// Wraps a value matrix with generated labels x1..xp.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let labels = (1..=values.ncols()).map(|i| format!("x{i}")).collect();
        Self::new(values, labels)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of time points (rows).
    pub fn t_len(&self) -> usize {
        self.values.nrows()
    }

    /// Number of series (columns).
    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    /// Panel of the linear combinations X·W for a p×l weight matrix W
    /// (row t becomes W′x_t).
    pub fn transformed(&self, weights: &DMatrix<f64>, labels: Vec<String>) -> Result<SeriesPanel> {
        if weights.nrows() != self.width() {
            return Err(Error::Dimension(format!(
                "weight matrix has {} rows for a {}-column panel",
                weights.nrows(),
                self.width()
            )));
        }
        SeriesPanel::new(&self.values * weights, labels)
    }
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Some((r, c));
            }
        }
    }
    None
}

/// Sample second-moment matrix T⁻¹·Σₜ aₜbₜᵀ for two matrices with T rows.
pub fn moment(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() || a.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "moment needs equal nonzero row counts, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    Ok(a.transpose() * b / a.nrows() as f64)
}

/// Squared canonical correlations of a panel against a design matrix.
#[derive(Clone, Debug)]
pub struct CcaOutput {
    /// λ₁ ≥ … ≥ λ_p, clamped to [0, 1].
    pub lambdas: Vec<f64>,
    /// p×p matrix; column i is the canonical direction paired with λ_i,
    /// normalized so that directionsᵀ·M_yy·directions = I.
    pub directions: DMatrix<f64>,
    pub t_len: usize,
    pub k: usize,
    pub p: usize,
    /// Largest adjustment applied when clamping eigenvalues into [0, 1].
    pub clamp_adjust: f64,
    pub cond_yy: f64,
    pub cond_dd: f64,
}

impl CcaOutput {
    /// True when clamping exceeded [`CLAMP_DIAGNOSTIC`]; worth surfacing.
    pub fn clamp_flagged(&self) -> bool {
        self.clamp_adjust > CLAMP_DIAGNOSTIC
    }
}

/// Condition number of a symmetric PSD matrix from its eigenvalue range;
/// infinite when the smallest eigenvalue is not strictly positive.
fn sym_cond(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in eig.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for a in 0..n {
        for b in (a + 1)..n {
            let v = 0.5 * (m[(a, b)] + m[(b, a)]);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
}

/// Reusable CCA context holding the factored design moment M_dd.
///
/// Building the factorization once and solving many panels against it (Monte
/// Carlo replications, subsystem panels) avoids refactoring a K×K matrix per
/// call; results are identical to [`squared_canonical_correlations`].
pub struct CcaSolver<'d> {
    design: &'d DesignMatrix,
    chol_dd: Cholesky<f64, Dyn>,
    cond_dd: f64,
    cond_cap: f64,
}

impl<'d> CcaSolver<'d> {
    pub fn new(design: &'d DesignMatrix, cond_cap: f64) -> Result<Self> {
        let mut m_dd = moment(design.values(), design.values())?;
        symmetrize(&mut m_dd);
        let cond_dd = sym_cond(&m_dd);
        if !cond_dd.is_finite() || cond_dd > cond_cap {
            return Err(Error::SingularMoment {
                name: "M_dd",
                cond: cond_dd,
                cap: cond_cap,
            });
        }
        let chol_dd = Cholesky::new(m_dd).ok_or(Error::SingularMoment {
            name: "M_dd",
            cond: cond_dd,
            cap: cond_cap,
        })?;
        Ok(Self {
            design,
            chol_dd,
            cond_dd,
            cond_cap,
        })
    }

    pub fn design(&self) -> &DesignMatrix {
        self.design
    }

    /// Squared canonical correlations of `y` against the held design.
    pub fn solve(&self, y: &SeriesPanel) -> Result<CcaOutput> {
        let (t_len, p, k) = (y.t_len(), y.width(), self.design.k());
        if t_len != self.design.t_len() {
            return Err(Error::Dimension(format!(
                "panel has T = {t_len}, design has T = {}",
                self.design.t_len()
            )));
        }
        if k < p {
            return Err(Error::Dimension(format!(
                "design must have K >= p, got K = {k}, p = {p}"
            )));
        }

        let mut m_yy = moment(y.values(), y.values())?;
        symmetrize(&mut m_yy);
        let cond_yy = sym_cond(&m_yy);
        if !cond_yy.is_finite() || cond_yy > self.cond_cap {
            return Err(Error::SingularMoment {
                name: "M_yy",
                cond: cond_yy,
                cap: self.cond_cap,
            });
        }
        let chol_yy = Cholesky::new(m_yy).ok_or(Error::SingularMoment {
            name: "M_yy",
            cond: cond_yy,
            cap: self.cond_cap,
        })?;

        let m_yd = moment(y.values(), self.design.values())?;
        // G = M_yd M_dd^-1 M_dy, then whiten: S = L^-1 G L^-T
        let mut g = &m_yd * self.chol_dd.solve(&m_yd.transpose());
        symmetrize(&mut g);
        let l = chol_yy.l();
        let half = l
            .solve_lower_triangular(&g)
            .ok_or_else(|| numerical_failure("lower-triangular solve"))?;
        let mut s = l
            .solve_lower_triangular(&half.transpose())
            .ok_or_else(|| numerical_failure("lower-triangular solve"))?
            .transpose();
        symmetrize(&mut s);

        let eig = SymmetricEigen::new(s);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        let mut lambdas = Vec::with_capacity(p);
        let mut clamp_adjust = 0.0f64;
        let mut u_sorted = DMatrix::zeros(p, p);
        for (pos, &i) in order.iter().enumerate() {
            let raw = eig.eigenvalues[i];
            let clamped = raw.clamp(0.0, 1.0);
            clamp_adjust = clamp_adjust.max((raw - clamped).abs());
            lambdas.push(clamped);
            u_sorted.set_column(pos, &eig.eigenvectors.column(i));
        }

        // directions v_i = L^-T u_i keep v' M_yy v = I
        let directions = l
            .transpose()
            .solve_upper_triangular(&u_sorted)
            .ok_or_else(|| numerical_failure("upper-triangular solve"))?;

        Ok(CcaOutput {
            lambdas,
            directions,
            t_len,
            k,
            p,
            clamp_adjust,
            cond_yy,
            cond_dd: self.cond_dd,
        })
    }
}

fn numerical_failure(what: &str) -> Error {
    Error::Simulation(format!("{what} failed on a factored matrix"))
}

/// Squared canonical correlations between `y` and `d` with the default
/// condition cap. One-shot form of [`CcaSolver`].
pub fn squared_canonical_correlations(y: &SeriesPanel, d: &DesignMatrix) -> Result<CcaOutput> {
    CcaSolver::new(d, DEFAULT_COND_CAP)?.solve(y)
}
