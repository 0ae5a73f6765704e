//! Inclusion hypotheses on the attractor space: restriction specs, the
//! orthogonal-complement construction, rank diagnostics, subsystem panels,
//! and the joint/single decision rules.
//!
//! A hypothesis either bounds the attractor space from above (ContainedIn:
//! col ψ ⊆ col A, so A must carry all n = s trends) or from below (Contains:
//! col a ⊆ col ψ, so a carries n = l trends of its own). Both reduce to
//! counting trends in the projected panels H′X and H⊥′X.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::basis::{design_matrix, BasisKind};
use crate::cca::{CcaSolver, SeriesPanel, DEFAULT_COND_CAP};
use crate::error::{Error, Result};
use crate::limitdist::CriticalValueTable;
use crate::trends::{estimate_s, SelectionMethod};

/// Relative singular-value cutoff for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Direction of the inclusion being tested.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HypothesisKind {
    /// col ψ ⊆ col A: the restriction matrix contains the attractor space.
    ContainedIn,
    /// col a ⊆ col ψ: the restriction matrix lies inside the attractor space.
    Contains,
}

impl HypothesisKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HypothesisKind::ContainedIn => "contained-in",
            HypothesisKind::Contains => "contains",
        }
    }
}

impl std::str::FromStr for HypothesisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contained-in" => Ok(HypothesisKind::ContainedIn),
            "contains" => Ok(HypothesisKind::Contains),
            other => Err(Error::Domain(format!(
                "unknown hypothesis kind '{other}' (expected contained-in or contains)"
            ))),
        }
    }
}

impl std::fmt::Display for HypothesisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A p×l full-column-rank restriction matrix with the trend count s of the
/// full system; n = min(l, s) trends are expected in H′X and s − n in H⊥′X.
#[derive(Clone, Debug)]
pub struct HypothesisSpec {
    kind: HypothesisKind,
    matrix: DMatrix<f64>,
    s_full: usize,
}

impl HypothesisSpec {
    fn validated(kind: HypothesisKind, matrix: DMatrix<f64>, s_full: usize) -> Result<Self> {
        let (p, l) = (matrix.nrows(), matrix.ncols());
        if p == 0 || l == 0 || l > p {
            return Err(Error::Dimension(format!(
                "restriction matrix must be p×l with 1 <= l <= p, got {p}x{l}"
            )));
        }
        if s_full > p {
            return Err(Error::Dimension(format!(
                "s_full = {s_full} exceeds system dimension p = {p}"
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("restriction matrix entry".into()));
        }
        let rank = numerical_rank(&matrix, DEFAULT_RANK_TOL);
        if rank < l {
            return Err(Error::RankDeficient { rank, cols: l });
        }
        match kind {
            HypothesisKind::ContainedIn if l < s_full => Err(Error::Dimension(format!(
                "containment of the attractor space needs l >= s, got l = {l}, s = {s_full}"
            ))),
            HypothesisKind::Contains if l > s_full => Err(Error::Dimension(format!(
                "inclusion in the attractor space needs l <= s, got l = {l}, s = {s_full}"
            ))),
            _ => Ok(Self {
                kind,
                matrix,
                s_full,
            }),
        }
    }

    /// col ψ ⊆ col A with A = `matrix` (requires l ≥ s_full).
    pub fn contained_in(matrix: DMatrix<f64>, s_full: usize) -> Result<Self> {
        Self::validated(HypothesisKind::ContainedIn, matrix, s_full)
    }

    /// col a ⊆ col ψ with a = `matrix` (requires l ≤ s_full).
    pub fn contains(matrix: DMatrix<f64>, s_full: usize) -> Result<Self> {
        Self::validated(HypothesisKind::Contains, matrix, s_full)
    }

    pub fn kind(&self) -> HypothesisKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn l(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn s_full(&self) -> usize {
        self.s_full
    }

    /// Trends expected inside col H under the null: n = min(l, s).
    pub fn n(&self) -> usize {
        self.matrix.ncols().min(self.s_full)
    }

    /// (n, s − n): expected trend counts in H′X and H⊥′X under the null.
    pub fn expected(&self) -> (usize, usize) {
        (self.n(), self.s_full - self.n())
    }
}

/// Count of singular values above `tol` × the largest.
fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// M⊥: a p×(p−q) matrix with M′M⊥ = 0 and [M, M⊥] nonsingular, from the
/// left-null-space block of a singular value decomposition. q = p yields a
/// zero-column matrix (the empty-complement convention).
pub fn orthogonal_complement(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (p, q) = (m.nrows(), m.ncols());
    if p == 0 || q > p {
        return Err(Error::Dimension(format!(
            "complement needs a p×q matrix with q <= p, got {p}x{q}"
        )));
    }
    let rank = numerical_rank(m, DEFAULT_RANK_TOL);
    if rank < q {
        return Err(Error::RankDeficient { rank, cols: q });
    }
    if q == p {
        return Ok(DMatrix::zeros(p, 0));
    }
    // pad to square so the factorization exposes all p left singular vectors
    let mut padded = DMatrix::zeros(p, p);
    padded.view_mut((0, 0), (p, q)).copy_from(m);
    let svd = padded.svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::Simulation("singular value decomposition failed".into()))?;
    let smax = svd.singular_values.max();
    let null_cols: Vec<usize> = (0..p)
        .filter(|&i| svd.singular_values[i] <= DEFAULT_RANK_TOL * smax)
        .collect();
    debug_assert_eq!(null_cols.len(), p - q);
    let mut out = DMatrix::zeros(p, null_cols.len());
    for (j, &i) in null_cols.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    Ok(out)
}

/// Ranks of H′ψ and H⊥′ψ; the evidence pair the decision rules act on.
/// Diagnostic for settings where ψ is known (simulations).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RankProfile {
    pub rank_h: usize,
    pub rank_hperp: usize,
}

/// Numerical ranks of H′ψ and H⊥′ψ at relative tolerance `tol`.
pub fn rank_profile(psi: &DMatrix<f64>, h: &DMatrix<f64>, tol: f64) -> Result<RankProfile> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Domain(format!(
            "rank tolerance must be > 0, got {tol}"
        )));
    }
    if psi.nrows() != h.nrows() {
        return Err(Error::Dimension(format!(
            "psi has {} rows, H has {}",
            psi.nrows(),
            h.nrows()
        )));
    }
    for (name, m) in [("psi", psi), ("H", h)] {
        let rank = numerical_rank(m, tol);
        if rank < m.ncols() {
            return Err(Error::Domain(format!(
                "{name} is not full column rank ({rank} < {})",
                m.ncols()
            )));
        }
    }
    let hperp = orthogonal_complement(h)?;
    let rank_h = numerical_rank(&(h.transpose() * psi), tol);
    let rank_hperp = if hperp.ncols() == 0 {
        0
    } else {
        numerical_rank(&(hperp.transpose() * psi), tol)
    };
    Ok(RankProfile { rank_h, rank_hperp })
}

/// The two projected panels a hypothesis is tested on. The complement panel
/// is absent when l = p.
#[derive(Clone, Debug)]
pub struct Subsystems {
    pub h_panel: SeriesPanel,
    pub hperp_panel: Option<SeriesPanel>,
    /// (n, s − n) expected under the null.
    pub expected: (usize, usize),
}

/// Projects a panel onto col H and col H⊥ with the expected trend counts.
pub fn subsystems(x: &SeriesPanel, spec: &HypothesisSpec) -> Result<Subsystems> {
    if x.width() != spec.p() {
        return Err(Error::Dimension(format!(
            "panel has p = {}, restriction has p = {}",
            x.width(),
            spec.p()
        )));
    }
    let h_labels = (1..=spec.l()).map(|j| format!("h{j}")).collect();
    let h_panel = x.transformed(spec.matrix(), h_labels)?;
    let hperp = orthogonal_complement(spec.matrix())?;
    let hperp_panel = if hperp.ncols() == 0 {
        None
    } else {
        let labels = (1..=hperp.ncols()).map(|j| format!("hperp{j}")).collect();
        Some(x.transformed(&hperp, labels)?)
    };
    Ok(Subsystems {
        h_panel,
        hperp_panel,
        expected: spec.expected(),
    })
}

/// How the two indicator outcomes combine into the decision z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DecisionRule {
    /// z = w·v: both subsystems must match their expected counts.
    Joint,
    /// z = v: only the complement side decides.
    Single,
}

impl DecisionRule {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionRule::Joint => "joint",
            DecisionRule::Single => "single",
        }
    }
}

impl std::str::FromStr for DecisionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(DecisionRule::Joint),
            "single" => Ok(DecisionRule::Single),
            other => Err(Error::Domain(format!(
                "unknown rule '{other}' (expected joint or single)"
            ))),
        }
    }
}

impl std::fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Significance levels for the two test sequences: ν on the H side, η on
/// the H⊥ side. Ignored by the non-sequential estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecisionLevels {
    pub nu: f64,
    pub eta: f64,
}

impl Default for DecisionLevels {
    fn default() -> Self {
        Self {
            nu: 0.05,
            eta: 0.05,
        }
    }
}

/// Outcome of a hypothesis decision: w says the H side matched n, v says the
/// complement matched s − n, z combines them per the rule.
///
/// `varsigma` is the ς of the limiting acceptance probability 1 − ν − ς
/// (0 for ContainedIn, η for Contains); reported unadjusted, sequential
/// methods only.
#[derive(Clone, Debug, Serialize)]
pub struct DecisionOutcome {
    pub w: bool,
    pub v: bool,
    pub z: bool,
    pub rule: DecisionRule,
    pub s_hat_h: usize,
    pub s_hat_hperp: usize,
    pub expected: (usize, usize),
    pub varsigma: Option<f64>,
}

fn estimate_count(
    solver: &CcaSolver<'_>,
    panel: &SeriesPanel,
    method: SelectionMethod,
    level: f64,
    cvs: &CriticalValueTable,
) -> Result<usize> {
    let cca = solver.solve(panel)?;
    Ok(estimate_s(&cca, method, level, cvs)?.s_hat)
}

/// Decides a hypothesis on a panel by estimating the trend count of both
/// subsystem panels against a K-column design built for the panel's span.
pub fn decide(
    x: &SeriesPanel,
    spec: &HypothesisSpec,
    method: SelectionMethod,
    levels: DecisionLevels,
    rule: DecisionRule,
    k: usize,
    cvs: &CriticalValueTable,
) -> Result<DecisionOutcome> {
    let design = design_matrix(x.t_len(), k, BasisKind::KarhunenLoeve)?;
    let solver = CcaSolver::new(&design, DEFAULT_COND_CAP)?;
    decide_with_solver(&solver, x, spec, method, levels, rule, cvs)
}

/// [`decide`] against a prebuilt solver; replication loops share the design
/// factorization this way.
pub fn decide_with_solver(
    solver: &CcaSolver<'_>,
    x: &SeriesPanel,
    spec: &HypothesisSpec,
    method: SelectionMethod,
    levels: DecisionLevels,
    rule: DecisionRule,
    cvs: &CriticalValueTable,
) -> Result<DecisionOutcome> {
    let subs = subsystems(x, spec)?;
    let (n, rem) = subs.expected;
    let s_hat_h = estimate_count(solver, &subs.h_panel, method, levels.nu, cvs)?;
    let s_hat_hperp = match &subs.hperp_panel {
        Some(panel) => estimate_count(solver, panel, method, levels.eta, cvs)?,
        None => 0,
    };
    let w = s_hat_h == n;
    let v = s_hat_hperp == rem;
    let z = match rule {
        DecisionRule::Joint => w && v,
        DecisionRule::Single => v,
    };
    let varsigma = match method {
        SelectionMethod::SeqInf | SelectionMethod::SeqOne => Some(match spec.kind {
            HypothesisKind::ContainedIn => 0.0,
            HypothesisKind::Contains => levels.eta,
        }),
        _ => None,
    };
    Ok(DecisionOutcome {
        w,
        v,
        z,
        rule,
        s_hat_h,
        s_hat_hperp,
        expected: subs.expected,
        varsigma,
    })
}

/// The two aggregation-invariance specs sharing the matrix ι = (1,…,1)′:
/// ContainedIn ∧ Contains ⟺ col ψ = col ι with s = 1.
pub fn build_aggregation_hypothesis(p: usize) -> Result<(HypothesisSpec, HypothesisSpec)> {
    if p < 2 {
        return Err(Error::Dimension(format!(
            "aggregation needs p >= 2, got {p}"
        )));
    }
    let iota = DMatrix::from_element(p, 1, 1.0);
    Ok((
        HypothesisSpec::contained_in(iota.clone(), 1)?,
        HypothesisSpec::contains(iota, 1)?,
    ))
}

/// Contains spec with a = {e_i : i ∈ J} (1-based indices): the selected
/// coordinates carry |J| autonomous trends of the s in the full system.
pub fn build_autonomy_hypothesis(
    p: usize,
    indices: &[usize],
    s_full: usize,
) -> Result<HypothesisSpec> {
    if indices.is_empty() {
        return Err(Error::Dimension("autonomy needs at least one index".into()));
    }
    let mut seen = vec![false; p];
    for &i in indices {
        if i < 1 || i > p {
            return Err(Error::Domain(format!("index {i} outside 1..={p}")));
        }
        if seen[i - 1] {
            return Err(Error::Domain(format!("duplicate index {i}")));
        }
        seen[i - 1] = true;
    }
    let mut a = DMatrix::zeros(p, indices.len());
    for (j, &i) in indices.iter().enumerate() {
        a[(i - 1, j)] = 1.0;
    }
    HypothesisSpec::contains(a, s_full)
}
