//! The benchmark cointegrated VAR(1) data-generating process and the Monte
//! Carlo experiments built on it: trend-count selection frequencies and
//! size/power of the inclusion-hypothesis decision rules.
//!
//! ΔX_t = αβ′X_{t−1} + ε_t with β = (0, I_{p−s})′, α = −β, ε_t ~ N(0, I_p)
//! and X₀ = 0, so the first s coordinates are independent random walks and
//! the rest are white noise; ψ = (I_s, 0)′.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::RngExt;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{default_k, design_matrix, BasisKind};
use crate::cca::{CcaSolver, SeriesPanel, DEFAULT_COND_CAP};
use crate::error::{Error, Result};
use crate::hypotheses::{subsystems, DecisionRule, HypothesisSpec};
use crate::limitdist::{CriticalValueTable, NormKind};
use crate::rng::{derive_seed, substream_rng};
use crate::trends::{estimate_s, SelectionMethod};

/// One draw of the benchmark process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DgpConfig {
    pub p: usize,
    pub s: usize,
    pub t_len: usize,
    pub seed: u64,
}

fn validate_shape(p: usize, s: usize, t_len: usize) -> Result<()> {
    if p < 1 || s > p {
        return Err(Error::Dimension(format!(
            "need 0 <= s <= p with p >= 1, got p = {p}, s = {s}"
        )));
    }
    if t_len < 2 {
        return Err(Error::Dimension(format!("need T >= 2, got T = {t_len}")));
    }
    Ok(())
}

/// Simulates the panel on a specific RNG substream.
fn simulate_var1_stream(
    p: usize,
    s: usize,
    t_len: usize,
    seed: u64,
    stream: u64,
) -> Result<SeriesPanel> {
    validate_shape(p, s, t_len)?;
    let mut rng = substream_rng(seed, stream);
    let mut state = vec![0.0f64; p];
    let mut values = DMatrix::zeros(t_len, p);
    for t in 0..t_len {
        for (i, x) in state.iter_mut().enumerate() {
            let eps: f64 = rng.sample(StandardNormal);
            // X_t = X_{t-1} - beta beta' X_{t-1} + eps: the projection wipes
            // the last p-s coordinates, the first s accumulate
            *x = if i < s { *x + eps } else { eps };
            values[(t, i)] = *x;
        }
    }
    SeriesPanel::from_values(values)
}

/// T×p panel from the benchmark VAR(1); rows are X₁ … X_T.
pub fn simulate_var1(cfg: &DgpConfig) -> Result<SeriesPanel> {
    simulate_var1_stream(cfg.p, cfg.s, cfg.t_len, cfg.seed, 0)
}

/// Monte Carlo experiment layout: full factorial over T and s at fixed p.
#[derive(Clone, Debug, Serialize)]
pub struct McGrid {
    pub p: usize,
    pub t_lens: Vec<usize>,
    pub s_values: Vec<usize>,
    /// Basis size; None applies the T^(3/4) default rule per T.
    pub k: Option<usize>,
    pub methods: Vec<SelectionMethod>,
    /// Significance for the sequential methods (both test sequences).
    pub level: f64,
}

impl McGrid {
    fn validate(&self) -> Result<()> {
        if self.t_lens.is_empty() || self.s_values.is_empty() || self.methods.is_empty() {
            return Err(Error::Dimension(
                "grid needs at least one T, one s, and one method".into(),
            ));
        }
        if !self.level.is_finite() || self.level <= 0.0 || self.level >= 1.0 {
            return Err(Error::Domain(format!(
                "significance must lie strictly inside (0, 1), got {}",
                self.level
            )));
        }
        for &s in &self.s_values {
            validate_shape(self.p, s, *self.t_lens.iter().max().unwrap())?;
        }
        Ok(())
    }

    fn k_for(&self, t_len: usize) -> usize {
        self.k.unwrap_or_else(|| default_k(t_len))
    }

    fn needs_critical_values(&self) -> bool {
        self.methods
            .iter()
            .any(|m| matches!(m, SelectionMethod::SeqInf | SelectionMethod::SeqOne))
    }

    fn sequential_norms(&self) -> Vec<NormKind> {
        let mut norms = Vec::new();
        if self.methods.contains(&SelectionMethod::SeqInf) {
            norms.push(NormKind::Inf);
        }
        if self.methods.contains(&SelectionMethod::SeqOne) {
            norms.push(NormKind::One);
        }
        norms
    }

    /// Fills the table for every dim a panel of width p can produce.
    fn prepare_table(&self, cvs: &mut CriticalValueTable) -> Result<()> {
        if !self.needs_critical_values() {
            return Ok(());
        }
        let dims: Vec<usize> = (1..=self.p).collect();
        cvs.ensure(&dims, &self.sequential_norms(), &[1.0 - self.level])
    }
}

/// The four benchmark hypotheses of the size/power experiment, stated for
/// the DGP's ψ = (I_s, 0)′.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum McCase {
    /// col ψ ⊆ span(e₁,…,e_{p−1}): true whenever s ≤ p−1.
    ContainedInLeading,
    /// col e₁ ⊆ col ψ: true whenever s ≥ 1.
    ContainsFirst,
    /// col ψ ⊆ span(e₂,…,e_p): false whenever s ≥ 1.
    ContainedInTrailing,
    /// col e_p ⊆ col ψ: false whenever s < p.
    ContainsLast,
}

impl McCase {
    pub const ALL: [McCase; 4] = [
        McCase::ContainedInLeading,
        McCase::ContainsFirst,
        McCase::ContainedInTrailing,
        McCase::ContainsLast,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            McCase::ContainedInLeading => "contained-in-leading",
            McCase::ContainsFirst => "contains-first",
            McCase::ContainedInTrailing => "contained-in-trailing",
            McCase::ContainsLast => "contains-last",
        }
    }

    /// Whether the inclusion actually holds under the DGP.
    pub fn holds_in_dgp(self, p: usize, s: usize) -> bool {
        match self {
            McCase::ContainedInLeading => s < p,
            McCase::ContainsFirst => s >= 1,
            McCase::ContainedInTrailing => s == 0,
            McCase::ContainsLast => s == p,
        }
    }

    /// The restriction spec at system size p with true trend count s.
    pub fn spec(self, p: usize, s: usize) -> Result<HypothesisSpec> {
        let coordinate_block = |from: usize, cols: usize| {
            DMatrix::from_fn(p, cols, |r, c| if r == from + c { 1.0 } else { 0.0 })
        };
        match self {
            McCase::ContainedInLeading => {
                HypothesisSpec::contained_in(coordinate_block(0, p - 1), s)
            }
            McCase::ContainsFirst => HypothesisSpec::contains(coordinate_block(0, 1), s),
            McCase::ContainedInTrailing => {
                HypothesisSpec::contained_in(coordinate_block(1, p - 1), s)
            }
            McCase::ContainsLast => HypothesisSpec::contains(coordinate_block(p - 1, 1), s),
        }
    }
}

impl std::str::FromStr for McCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        McCase::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "unknown case '{s}' (expected contained-in-leading, contains-first, \
                     contained-in-trailing, or contains-last)"
                ))
            })
    }
}

impl std::fmt::Display for McCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Selection-frequency result for one (T, s, method) cell.
#[derive(Clone, Debug, Serialize)]
pub struct SelectionCell {
    pub t_len: usize,
    pub s: usize,
    pub k: usize,
    pub method: SelectionMethod,
    /// Fraction of replications with ŝ ≠ s.
    pub incorrect: f64,
}

/// Rejection-frequency result for one (T, s, case, method) cell.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCell {
    pub t_len: usize,
    pub s: usize,
    pub k: usize,
    pub case: McCase,
    pub method: SelectionMethod,
    pub rule: DecisionRule,
    /// Fraction of replications with z = 0.
    pub rejection: f64,
    /// Whether the hypothesis is true under the DGP (size vs power).
    pub holds: bool,
}

/// Results of a Monte Carlo run; either section may be empty.
#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    pub p: usize,
    pub reps: usize,
    pub seed: u64,
    pub level: f64,
    pub selection: Vec<SelectionCell>,
    pub hypothesis: Vec<HypothesisCell>,
}

impl McReport {
    pub fn selection_frequency(
        &self,
        t_len: usize,
        s: usize,
        method: SelectionMethod,
    ) -> Option<f64> {
        self.selection
            .iter()
            .find(|c| c.t_len == t_len && c.s == s && c.method == method)
            .map(|c| c.incorrect)
    }

    pub fn rejection_frequency(
        &self,
        t_len: usize,
        s: usize,
        case: McCase,
        method: SelectionMethod,
    ) -> Option<f64> {
        self.hypothesis
            .iter()
            .find(|c| c.t_len == t_len && c.s == s && c.case == case && c.method == method)
            .map(|c| c.rejection)
    }

    /// Tab-separated flat form: one row per cell with a stable column set.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("kind\tT\ts\tK\tcase\tmethod\trule\tholds\tvalue\n");
        for c in &self.selection {
            let _ = writeln!(
                out,
                "selection\t{}\t{}\t{}\t-\t{}\t-\t-\t{:.4}",
                c.t_len, c.s, c.k, c.method, c.incorrect
            );
        }
        for c in &self.hypothesis {
            let _ = writeln!(
                out,
                "hypothesis\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.4}",
                c.t_len, c.s, c.k, c.case, c.method, c.rule, c.holds, c.rejection
            );
        }
        out
    }

    fn ordered_methods(
        cells_methods: impl Iterator<Item = SelectionMethod>,
    ) -> Vec<SelectionMethod> {
        let mut seen = Vec::new();
        for m in cells_methods {
            if !seen.contains(&m) {
                seen.push(m);
            }
        }
        seen
    }
}

impl std::fmt::Display for McReport {
    /// Renders one block per T: rows are s, columns are methods.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if !self.selection.is_empty() {
            let methods = Self::ordered_methods(self.selection.iter().map(|c| c.method));
            let mut by_t: BTreeMap<(usize, usize), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
            for c in &self.selection {
                by_t.entry((c.t_len, c.k))
                    .or_default()
                    .entry(c.s)
                    .or_insert_with(|| vec![f64::NAN; methods.len()])
                    [methods.iter().position(|&m| m == c.method).unwrap()] = c.incorrect;
            }
            for ((t_len, k), rows) in by_t {
                writeln!(
                    f,
                    "Frequency of incorrect selection of s (p={}, T={t_len}, K={k}, N={})",
                    self.p, self.reps
                )?;
                write!(f, "{:>4}", "s")?;
                for m in &methods {
                    write!(f, "{:>12}", m.as_str())?;
                }
                writeln!(f)?;
                for (s, freqs) in rows {
                    write!(f, "{s:>4}")?;
                    for v in freqs {
                        write!(f, "{v:>12.3}")?;
                    }
                    writeln!(f)?;
                }
                writeln!(f)?;
            }
        }
        if !self.hypothesis.is_empty() {
            let methods = Self::ordered_methods(self.hypothesis.iter().map(|c| c.method));
            let mut by_case: BTreeMap<(&str, usize, usize), BTreeMap<usize, Vec<f64>>> =
                BTreeMap::new();
            let mut holds_label: BTreeMap<&str, bool> = BTreeMap::new();
            for c in &self.hypothesis {
                by_case
                    .entry((c.case.as_str(), c.t_len, c.k))
                    .or_default()
                    .entry(c.s)
                    .or_insert_with(|| vec![f64::NAN; methods.len()])
                    [methods.iter().position(|&m| m == c.method).unwrap()] = c.rejection;
                holds_label.insert(c.case.as_str(), c.holds);
            }
            for ((case, t_len, k), rows) in by_case {
                let rule = self.hypothesis[0].rule;
                writeln!(
                    f,
                    "Rejection frequency: {case} ({} under the DGP; {rule} rule, T={t_len}, K={k}, N={})",
                    if holds_label[case] { "holds" } else { "fails" },
                    self.reps
                )?;
                write!(f, "{:>4}", "s")?;
                for m in &methods {
                    write!(f, "{:>12}", m.as_str())?;
                }
                writeln!(f)?;
                for (s, freqs) in rows {
                    write!(f, "{s:>4}")?;
                    for v in freqs {
                        write!(f, "{v:>12.3}")?;
                    }
                    writeln!(f)?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// Seed for a (T, s) cell; replication index is the RNG stream within it.
fn cell_seed(master: u64, t_len: usize, s: usize) -> u64 {
    derive_seed(derive_seed(master, t_len as u64), s as u64)
}

/// Selection-frequency experiment: for each (T, s) cell simulate `reps`
/// panels and record, per method, the fraction of replications whose
/// estimate misses the true s.
///
/// The table is pre-filled for dims 1…p when sequential methods are present
/// and read immutably inside the replication loop.
pub fn mc_selection(
    grid: &McGrid,
    reps: usize,
    seed: u64,
    cvs: &mut CriticalValueTable,
) -> Result<McReport> {
    grid.validate()?;
    if reps < 1 {
        return Err(Error::Domain("reps must be >= 1".into()));
    }
    grid.prepare_table(cvs)?;
    let mut selection = Vec::new();
    for &t_len in &grid.t_lens {
        let k = grid.k_for(t_len);
        let design = design_matrix(t_len, k, BasisKind::KarhunenLoeve)?;
        let solver = CcaSolver::new(&design, DEFAULT_COND_CAP)?;
        for &s in &grid.s_values {
            let cell = cell_seed(seed, t_len, s);
            let wrong_counts: Vec<usize> = (0..reps as u64)
                .into_par_iter()
                .map(|rep| -> Result<Vec<usize>> {
                    let x = simulate_var1_stream(grid.p, s, t_len, cell, rep)?;
                    let cca = solver.solve(&x)?;
                    grid.methods
                        .iter()
                        .map(|&m| {
                            let est = estimate_s(&cca, m, grid.level, cvs)?;
                            Ok(usize::from(est.s_hat != s))
                        })
                        .collect()
                })
                .try_reduce(
                    || vec![0usize; grid.methods.len()],
                    |mut acc, row| {
                        for (a, b) in acc.iter_mut().zip(row) {
                            *a += b;
                        }
                        Ok(acc)
                    },
                )?;
            for (mi, &method) in grid.methods.iter().enumerate() {
                selection.push(SelectionCell {
                    t_len,
                    s,
                    k,
                    method,
                    incorrect: wrong_counts[mi] as f64 / reps as f64,
                });
            }
        }
    }
    Ok(McReport {
        p: grid.p,
        reps,
        seed,
        level: grid.level,
        selection,
        hypothesis: Vec::new(),
    })
}

/// Size/power experiment for the benchmark hypotheses: per (T, s, case)
/// cell, the rejection frequency (z = 0) of each method under `rule`.
///
/// Panels are drawn from the same per-(T, s, replication) streams as
/// [`mc_selection`], so both experiments see identical data.
pub fn mc_hypothesis(
    grid: &McGrid,
    cases: &[McCase],
    rule: DecisionRule,
    reps: usize,
    seed: u64,
    cvs: &mut CriticalValueTable,
) -> Result<McReport> {
    grid.validate()?;
    if reps < 1 {
        return Err(Error::Domain("reps must be >= 1".into()));
    }
    if cases.is_empty() {
        return Err(Error::Dimension("no hypothesis cases requested".into()));
    }
    grid.prepare_table(cvs)?;
    let mut hypothesis = Vec::new();
    for &t_len in &grid.t_lens {
        let k = grid.k_for(t_len);
        let design = design_matrix(t_len, k, BasisKind::KarhunenLoeve)?;
        let solver = CcaSolver::new(&design, DEFAULT_COND_CAP)?;
        for &s in &grid.s_values {
            let specs: Vec<HypothesisSpec> = cases
                .iter()
                .map(|&c| c.spec(grid.p, s))
                .collect::<Result<_>>()?;
            let cell = cell_seed(seed, t_len, s);
            // reject_counts[case][method]
            let reject_counts: Vec<Vec<usize>> = (0..reps as u64)
                .into_par_iter()
                .map(|rep| -> Result<Vec<Vec<usize>>> {
                    let x = simulate_var1_stream(grid.p, s, t_len, cell, rep)?;
                    specs
                        .iter()
                        .map(|spec| {
                            let subs = subsystems(&x, spec)?;
                            let (n, rem) = subs.expected;
                            let cca_h = solver.solve(&subs.h_panel)?;
                            let cca_perp = subs
                                .hperp_panel
                                .as_ref()
                                .map(|panel| solver.solve(panel))
                                .transpose()?;
                            grid.methods
                                .iter()
                                .map(|&m| {
                                    let s_hat_h = estimate_s(&cca_h, m, grid.level, cvs)?.s_hat;
                                    let s_hat_perp = match &cca_perp {
                                        Some(cca) => estimate_s(cca, m, grid.level, cvs)?.s_hat,
                                        None => 0,
                                    };
                                    let w = s_hat_h == n;
                                    let v = s_hat_perp == rem;
                                    let z = match rule {
                                        DecisionRule::Joint => w && v,
                                        DecisionRule::Single => v,
                                    };
                                    Ok(usize::from(!z))
                                })
                                .collect()
                        })
                        .collect()
                })
                .try_reduce(
                    || vec![vec![0usize; grid.methods.len()]; specs.len()],
                    |mut acc, row| {
                        for (accs, cols) in acc.iter_mut().zip(row) {
                            for (a, b) in accs.iter_mut().zip(cols) {
                                *a += b;
                            }
                        }
                        Ok(acc)
                    },
                )?;
            for (ci, &case) in cases.iter().enumerate() {
                for (mi, &method) in grid.methods.iter().enumerate() {
                    hypothesis.push(HypothesisCell {
                        t_len,
                        s,
                        k,
                        case,
                        method,
                        rule,
                        rejection: reject_counts[ci][mi] as f64 / reps as f64,
                        holds: case.holds_in_dgp(grid.p, s),
                    });
                }
            }
        }
    }
    Ok(McReport {
        p: grid.p,
        reps,
        seed,
        level: grid.level,
        selection: Vec::new(),
        hypothesis,
    })
}
