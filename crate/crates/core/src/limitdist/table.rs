//! Critical-value tables c_{i,h,η} for the sequential trend tests, with a
//! persistent cache format, plus the per-coordinate confidence stripe.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::BasisKind;
use crate::error::{Error, Result};
use crate::limitdist::exact::zeta1_quantile;
use crate::limitdist::simulate::{simulate_zeta, NormKind, SimSettings, ZetaDraws};
use crate::rng::derive_seed;

const FORMAT_TAG: &str = "cotrend-critical-values/1";

/// Simulation inputs recorded with every persisted table so a stale cache is
/// detectable and any entry can be regenerated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub basis: String,
    pub grid: usize,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    format: String,
    provenance: Provenance,
    values: BTreeMap<String, f64>,
}

/// Quantiles of ‖ζ⁽ᵈⁱᵐ⁾‖ₕ keyed by (dim, norm, level).
///
/// Level is the quantile probability (a test at significance η uses level
/// 1−η). Entries for dim = 1 come from the exact univariate law; higher
/// dims are simulated on demand with a per-dim derived seed, so an entry's
/// value never depends on which other dims were requested. Simulated draws
/// are kept for the session so several (norm, level) lookups on one dim cost
/// a single simulation.
#[derive(Clone, Debug)]
pub struct CriticalValueTable {
    provenance: Provenance,
    values: BTreeMap<String, f64>,
    draws_cache: BTreeMap<usize, ZetaDraws>,
    simulations_run: usize,
}

impl CriticalValueTable {
    pub fn new(settings: SimSettings) -> Self {
        Self {
            provenance: Provenance {
                basis: BasisKind::KarhunenLoeve.as_str().to_owned(),
                grid: settings.grid,
                reps: settings.reps,
                seed: settings.seed,
            },
            values: BTreeMap::new(),
            draws_cache: BTreeMap::new(),
            simulations_run: 0,
        }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.values
    }

    /// Simulations performed this session (cache-warmth instrumentation).
    pub fn simulations_run(&self) -> usize {
        self.simulations_run
    }

    /// Levels are quantized to 4 decimals (basis points) for exact keying.
    fn level_bp(level: f64) -> Result<u32> {
        if !level.is_finite() || level <= 0.0 || level >= 1.0 {
            return Err(Error::Domain(format!(
                "level must lie strictly inside (0, 1), got {level}"
            )));
        }
        let bp = (level * 1e4).round() as u32;
        if bp == 0 || bp == 10_000 {
            return Err(Error::Domain(format!(
                "level {level} rounds outside the representable (0.0001, 0.9999) range"
            )));
        }
        Ok(bp)
    }

    fn key(dim: usize, norm: NormKind, bp: u32) -> String {
        format!("{dim:03}/{}/{:.4}", norm.as_str(), f64::from(bp) / 1e4)
    }

    fn parse_key(key: &str) -> Option<(usize, NormKind, u32)> {
        let mut parts = key.split('/');
        let dim: usize = parts.next()?.parse().ok()?;
        let norm = NormKind::parse(parts.next()?).ok()?;
        let level: f64 = parts.next()?.parse().ok()?;
        if parts.next().is_some() || dim == 0 {
            return None;
        }
        let bp = Self::level_bp(level).ok()?;
        Some((dim, norm, bp))
    }

    /// Read-only lookup: exact for dim 1, stored entry otherwise.
    pub fn get(&self, dim: usize, norm: NormKind, level: f64) -> Result<f64> {
        if dim < 1 {
            return Err(Error::Domain("dim must be >= 1".into()));
        }
        let bp = Self::level_bp(level)?;
        if dim == 1 {
            return zeta1_quantile(f64::from(bp) / 1e4);
        }
        self.values
            .get(&Self::key(dim, norm, bp))
            .copied()
            .ok_or(Error::MissingCriticalValue {
                dim,
                norm: norm.as_str(),
                level: f64::from(bp) / 1e4,
            })
    }

    /// Simulated ζ⁽ᵈⁱᵐ⁾ draws under this table's provenance (seed derived
    /// per dimension), cached for the session.
    pub fn draws_for(&mut self, dim: usize) -> Result<&ZetaDraws> {
        if !self.draws_cache.contains_key(&dim) {
            let seed = derive_seed(self.provenance.seed, dim as u64);
            let draws = simulate_zeta(dim, self.provenance.reps, self.provenance.grid, seed)?;
            self.simulations_run += 1;
            self.draws_cache.insert(dim, draws);
        }
        Ok(&self.draws_cache[&dim])
    }

    /// Level-quantile of ‖ζ⁽ᵈⁱᵐ⁾‖ₕ; simulates and stores on a miss.
    pub fn critical_value(&mut self, dim: usize, norm: NormKind, level: f64) -> Result<f64> {
        if dim < 1 {
            return Err(Error::Domain("dim must be >= 1".into()));
        }
        let bp = Self::level_bp(level)?;
        let level = f64::from(bp) / 1e4;
        if dim == 1 {
            // both norms of a length-1 vector are its entry: use the exact law
            return zeta1_quantile(level);
        }
        let key = Self::key(dim, norm, bp);
        if let Some(&v) = self.values.get(&key) {
            return Ok(v);
        }
        let mut norms = self.draws_for(dim)?.norms(norm);
        norms.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let q = empirical_quantile_sorted(&norms, level);
        self.values.insert(key, q);
        Ok(q)
    }

    /// Populates every (dim, norm, level) combination, including exact dim-1
    /// entries, so the table can be persisted complete.
    pub fn ensure(&mut self, dims: &[usize], norms: &[NormKind], levels: &[f64]) -> Result<()> {
        for &dim in dims {
            for &norm in norms {
                for &level in levels {
                    if dim < 1 {
                        return Err(Error::Domain("dim must be >= 1".into()));
                    }
                    let bp = Self::level_bp(level)?;
                    let key = Self::key(dim, norm, bp);
                    if self.values.contains_key(&key) {
                        continue;
                    }
                    let v = self.critical_value(dim, norm, f64::from(bp) / 1e4)?;
                    self.values.insert(key, v);
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: TableFile = serde_json::from_str(&text)
            .map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
        if file.format != FORMAT_TAG {
            return Err(Error::Cache(format!(
                "{}: format '{}' is not '{FORMAT_TAG}'",
                path.display(),
                file.format
            )));
        }
        for (key, value) in &file.values {
            if Self::parse_key(key).is_none() {
                return Err(Error::Cache(format!(
                    "{}: malformed entry key '{key}'",
                    path.display()
                )));
            }
            if !value.is_finite() || *value <= 0.0 {
                return Err(Error::Cache(format!(
                    "{}: entry '{key}' has non-positive value {value}",
                    path.display()
                )));
            }
        }
        Ok(Self {
            provenance: file.provenance,
            values: file.values,
            draws_cache: BTreeMap::new(),
            simulations_run: 0,
        })
    }

    /// Writes the table as canonical JSON; identical content produces
    /// identical bytes, so regenerating a cache is diff-clean.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = TableFile {
            format: FORMAT_TAG.to_owned(),
            provenance: self.provenance.clone(),
            values: self.values.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Cache(format!("serializing table: {e}")))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Type-7 (linear interpolation) empirical quantile of an ascending slice.
pub(crate) fn empirical_quantile_sorted(xs: &[f64], prob: f64) -> f64 {
    debug_assert!(!xs.is_empty());
    let n = xs.len();
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return xs[n - 1];
    }
    xs[lo] + (h - lo as f64) * (xs[lo + 1] - xs[lo])
}

/// Pointwise confidence band for the log-coordinates of ζ⁽ᵈⁱᵐ⁾.
///
/// `kind` records that the band is pointwise per coordinate, not
/// simultaneous; downstream output surfaces this label.
#[derive(Clone, Debug, Serialize)]
pub struct ConfidenceStripe {
    pub dim: usize,
    pub coverage: f64,
    pub reps: usize,
    pub kind: String,
    pub lower_log: Vec<f64>,
    pub mean_log: Vec<f64>,
    pub upper_log: Vec<f64>,
}

impl ConfidenceStripe {
    /// True when log-value falls inside coordinate j's band (1-based j).
    pub fn contains(&self, j: usize, log_value: f64) -> bool {
        self.lower_log[j - 1] <= log_value && log_value <= self.upper_log[j - 1]
    }
}

/// Per-coordinate ((1−coverage)/2, (1+coverage)/2) empirical quantile
/// intervals of log ζ_j with the mean of log ζ_j, j = 1…dim.
pub fn confidence_stripe(dim: usize, coverage: f64, draws: &ZetaDraws) -> Result<ConfidenceStripe> {
    if draws.dim() != dim {
        return Err(Error::Dimension(format!(
            "stripe dim {dim} does not match draws dim {}",
            draws.dim()
        )));
    }
    if !coverage.is_finite() || coverage <= 0.0 || coverage >= 1.0 {
        return Err(Error::Domain(format!(
            "coverage must lie strictly inside (0, 1), got {coverage}"
        )));
    }
    if draws.reps() < 1000 {
        return Err(Error::InsufficientDraws {
            have: draws.reps(),
            need: 1000,
        });
    }
    let (mut lower, mut mean, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for j in 1..=dim {
        let mut logs: Vec<f64> = draws.coordinate(j).iter().map(|v| v.ln()).collect();
        logs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        lower.push(empirical_quantile_sorted(&logs, (1.0 - coverage) / 2.0));
        upper.push(empirical_quantile_sorted(&logs, (1.0 + coverage) / 2.0));
        mean.push(logs.iter().sum::<f64>() / logs.len() as f64);
    }
    Ok(ConfidenceStripe {
        dim,
        coverage,
        reps: draws.reps(),
        kind: "pointwise".to_owned(),
        lower_log: lower,
        mean_log: mean,
        upper_log: upper,
    })
}
