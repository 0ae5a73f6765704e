//! One function per subcommand. Flag structs live next to their runners;
//! main.rs only dispatches.

use std::path::{Path, PathBuf};

use clap::Args;
use cotrend::{
    build_aggregation_hypothesis, build_autonomy_hypothesis, confidence_stripe, decide_with_solver,
    default_k, design_matrix, mc_hypothesis, mc_selection, subsystems, tau, test_statistic,
    zeta1_cdf, zeta1_mean, zeta1_pdf, zeta1_quantile, BasisKind, CcaSolver, CriticalValueTable,
    DecisionLevels, DecisionRule, HypothesisKind, HypothesisSpec, McCase, McGrid, NormKind,
    SelectionMethod, SeriesPanel, SimSettings, DEFAULT_COND_CAP,
};

use crate::error::{classify, CliError, Result};
use crate::ingest::{load_matrix, load_panel};
use crate::report::{
    render_analysis, render_hypothesis, write_json, AnalysisProvenance, AnalysisReport,
    CacheIdentity, EstimateEntry, HypothesisProvenance, HypothesisReport, HypothesisTest,
    StatisticEntry, StripeCoordinate, StripeReport, SubsystemReport,
};

/// Cache file resolution: explicit flag, else $COTREND_CACHE_DIR, else the
/// working directory.
fn resolve_cache_path(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| match std::env::var_os("COTREND_CACHE_DIR") {
        Some(dir) => PathBuf::from(dir).join("critical-values.json"),
        None => PathBuf::from("cotrend-critical-values.json"),
    })
}

fn open_table(path: &Path, settings: SimSettings) -> Result<CriticalValueTable> {
    if path.exists() {
        CriticalValueTable::load(path).map_err(|e| CliError::Data(e.to_string()))
    } else {
        Ok(CriticalValueTable::new(settings))
    }
}

fn persist_table(path: &Path, table: &CriticalValueTable) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    table.save(path).map_err(classify)
}

fn cache_identity(path: &Path, table: &CriticalValueTable) -> CacheIdentity {
    let prov = table.provenance();
    CacheIdentity {
        path: path.display().to_string(),
        basis: prov.basis.clone(),
        grid: prov.grid,
        reps: prov.reps,
        seed: prov.seed,
    }
}

fn check_unit_interval(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 || value >= 1.0 {
        return Err(CliError::Usage(format!(
            "--{name} must lie strictly inside (0, 1), got {value}"
        )));
    }
    Ok(())
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Delimited panel with a header row (comma or tab).
    pub input: PathBuf,
    /// Basis size; defaults to ceil(T^(3/4)).
    #[arg(long)]
    pub k: Option<usize>,
    /// Take natural logs before the analysis.
    #[arg(long)]
    pub log: bool,
    /// Subtract each column's first observation.
    #[arg(long = "normalize-start")]
    pub normalize_start: bool,
    /// Selection methods to run (comma-separated).
    #[arg(
        long,
        value_delimiter = ',',
        default_values_t = [SelectionMethod::MaxGap, SelectionMethod::ArgmaxAlt,
                            SelectionMethod::SeqInf, SelectionMethod::SeqOne]
    )]
    pub methods: Vec<SelectionMethod>,
    /// Significance level for the sequential tests.
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Norm for the reported statistics: inf or one.
    #[arg(long, default_value_t = NormKind::Inf)]
    pub norm: NormKind,
    /// Emit the confidence stripe at the first method's selected s.
    #[arg(long)]
    pub stripe: bool,
    /// Stripe coverage probability.
    #[arg(long = "stripe-coverage", default_value_t = 0.90)]
    pub stripe_coverage: f64,
    /// Critical-value cache file (created on demand).
    #[arg(long = "cv-cache")]
    pub cv_cache: Option<PathBuf>,
    /// Write the machine-readable report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    check_unit_interval("level", args.level)?;
    if args.stripe {
        check_unit_interval("stripe-coverage", args.stripe_coverage)?;
    }
    if args.methods.is_empty() {
        return Err(CliError::Usage(
            "--methods must name at least one method".into(),
        ));
    }

    let loaded = load_panel(&args.input, args.log, args.normalize_start)?;
    let panel = &loaded.panel;
    let (t_len, p) = (panel.t_len(), panel.width());
    let k = args.k.unwrap_or_else(|| default_k(t_len));

    let design = design_matrix(t_len, k, BasisKind::KarhunenLoeve).map_err(classify)?;
    let solver = CcaSolver::new(&design, DEFAULT_COND_CAP).map_err(classify)?;
    let out = solver.solve(panel).map_err(classify)?;

    let sequential_norms: Vec<NormKind> = [NormKind::Inf, NormKind::One]
        .into_iter()
        .filter(|&n| args.methods.contains(&SelectionMethod::sequential(n)))
        .collect();
    let needs_table = !sequential_norms.is_empty() || args.stripe;

    let cache_path = resolve_cache_path(args.cv_cache.clone());
    let mut table = if needs_table {
        open_table(&cache_path, SimSettings::default())?
    } else {
        CriticalValueTable::new(SimSettings::default())
    };
    if !sequential_norms.is_empty() {
        let dims: Vec<usize> = (1..=p).collect();
        table
            .ensure(&dims, &sequential_norms, &[1.0 - args.level])
            .map_err(classify)?;
    }

    let mut estimates = Vec::new();
    for &method in &args.methods {
        let est = cotrend::estimate_s(&out, method, args.level, &table).map_err(classify)?;
        estimates.push(EstimateEntry {
            method: method.as_str().to_string(),
            s_hat: est.s_hat,
            r_hat: est.r_hat(p),
            level: est.level,
        });
    }

    let mut statistics = Vec::new();
    for i in 1..=p {
        statistics.push(StatisticEntry {
            order: i,
            statistic: test_statistic(&out.lambdas, i, k, args.norm).map_err(classify)?,
        });
    }

    let stripe = if args.stripe {
        let anchor = &estimates[0];
        if anchor.s_hat == 0 {
            eprintln!(
                "note: selected s = 0 by {}; no stripe to draw",
                anchor.method
            );
            None
        } else {
            let s_hat = anchor.s_hat;
            let draws = table.draws_for(s_hat).map_err(classify)?;
            let band = confidence_stripe(s_hat, args.stripe_coverage, draws).map_err(classify)?;
            let tau_vec = tau(&out.lambdas, s_hat).map_err(classify)?;
            let scale = k as f64 * std::f64::consts::PI.powi(2);
            let coordinates = (1..=s_hat)
                .map(|j| {
                    let log_statistic = (scale * tau_vec.values[j - 1]).ln();
                    StripeCoordinate {
                        j,
                        log_statistic,
                        lower_log: band.lower_log[j - 1],
                        mean_log: band.mean_log[j - 1],
                        upper_log: band.upper_log[j - 1],
                        inside: band.contains(j, log_statistic),
                    }
                })
                .collect();
            Some(StripeReport {
                method: anchor.method.clone(),
                s_hat,
                coverage: band.coverage,
                reps: band.reps,
                kind: band.kind.clone(),
                coordinates,
            })
        }
    } else {
        None
    };

    if needs_table && table.simulations_run() > 0 {
        persist_table(&cache_path, &table)?;
    }

    let report = AnalysisReport {
        schema: "cotrend-analysis/1",
        provenance: AnalysisProvenance {
            input: args.input.display().to_string(),
            t: t_len,
            p,
            k,
            basis: BasisKind::KarhunenLoeve.as_str().to_string(),
            log: args.log,
            normalize_start: args.normalize_start,
            date_column: loaded.date_column,
            labels: panel.labels().to_vec(),
            methods: args
                .methods
                .iter()
                .map(|m| m.as_str().to_string())
                .collect(),
            level: args.level,
            norm: args.norm.as_str().to_string(),
            cache: needs_table.then(|| cache_identity(&cache_path, &table)),
        },
        eigenvalues: out.lambdas.clone(),
        statistics,
        estimates,
        stripe,
    };

    print!("{}", render_analysis(&report));
    if let Some(out_path) = &args.out {
        write_json(out_path, &report)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct CritvalArgs {
    /// Dimensions to cover (comma-separated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    /// Norms to cover: inf, one.
    #[arg(long, value_delimiter = ',', default_values_t = [NormKind::Inf, NormKind::One])]
    pub norms: Vec<NormKind>,
    /// Quantile levels to cover, e.g. 0.95 for a 5% test.
    #[arg(long, value_delimiter = ',', required = true)]
    pub levels: Vec<f64>,
    /// Monte Carlo replications per dimension.
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    /// Brownian-motion discretization steps.
    #[arg(long, default_value_t = 2_000)]
    pub grid: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Cache file to create or extend.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

pub fn run_critval(args: CritvalArgs) -> Result<()> {
    let settings = SimSettings {
        reps: args.reps,
        grid: args.grid,
        seed: args.seed,
    };
    let path = resolve_cache_path(args.cache.clone());
    let mut table = open_table(&path, settings)?;
    let prov = table.provenance();
    if (prov.grid, prov.reps, prov.seed) != (settings.grid, settings.reps, settings.seed) {
        return Err(CliError::Usage(format!(
            "cache {} was built with reps = {}, grid = {}, seed = {}; pass matching flags or a \
             different --cache",
            path.display(),
            prov.reps,
            prov.grid,
            prov.seed
        )));
    }

    let before = table.entries().len();
    table
        .ensure(&args.dims, &args.norms, &args.levels)
        .map_err(classify)?;
    persist_table(&path, &table)?;

    println!(
        "cache {}: {} new entries, {} total",
        path.display(),
        table.entries().len() - before,
        table.entries().len()
    );
    for &dim in &args.dims {
        for &norm in &args.norms {
            for &level in &args.levels {
                let value = table.get(dim, norm, level).map_err(classify)?;
                println!(
                    "  dim {dim:>3}  norm {:<4} level {level:.4}  {value:.5}",
                    norm.as_str()
                );
            }
        }
    }
    Ok(())
}

#[derive(Args)]
pub struct HypothesisArgs {
    /// Delimited panel with a header row (comma or tab).
    pub input: PathBuf,
    /// Restriction kind for --matrix: contained-in or contains.
    #[arg(long, requires = "matrix", conflicts_with = "builder")]
    pub kind: Option<HypothesisKind>,
    /// Restriction matrix file (delimited, no header; one row per series).
    #[arg(long, requires = "kind")]
    pub matrix: Option<PathBuf>,
    /// Named construction: aggregation, or autonomy with --indices.
    #[arg(long, conflicts_with_all = ["kind", "matrix"])]
    pub builder: Option<String>,
    /// 1-based series indices for the autonomy builder.
    #[arg(long, value_delimiter = ',')]
    pub indices: Vec<usize>,
    /// Common-trend count of the full system under the null.
    #[arg(long = "s-full")]
    pub s_full: usize,
    #[arg(long, default_value_t = DecisionRule::Joint)]
    pub rule: DecisionRule,
    #[arg(long, default_value_t = SelectionMethod::MaxGap)]
    pub method: SelectionMethod,
    /// Significance for the restricted subsystem (sequential methods).
    #[arg(long, default_value_t = 0.05)]
    pub nu: f64,
    /// Significance for the complement subsystem (sequential methods).
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    /// Basis size; defaults to ceil(T^(3/4)).
    #[arg(long)]
    pub k: Option<usize>,
    /// Take natural logs before the analysis.
    #[arg(long)]
    pub log: bool,
    /// Subtract each column's first observation.
    #[arg(long = "normalize-start")]
    pub normalize_start: bool,
    #[arg(long = "cv-cache")]
    pub cv_cache: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Builds the list of restrictions to test; the aggregation builder expands
/// to its contained-in and contains halves.
fn hypothesis_specs(args: &HypothesisArgs, p: usize) -> Result<Vec<HypothesisSpec>> {
    match (&args.matrix, args.builder.as_deref()) {
        (Some(path), None) => {
            let kind = args
                .kind
                .ok_or_else(|| CliError::Usage("--matrix needs --kind".into()))?;
            let m = load_matrix(path)?;
            if m.nrows() != p {
                return Err(CliError::Data(format!(
                    "{}: matrix has {} rows but the panel has {p} series",
                    path.display(),
                    m.nrows()
                )));
            }
            let spec = match kind {
                HypothesisKind::ContainedIn => HypothesisSpec::contained_in(m, args.s_full),
                HypothesisKind::Contains => HypothesisSpec::contains(m, args.s_full),
            }
            .map_err(classify)?;
            Ok(vec![spec])
        }
        (None, Some("aggregation")) => {
            if args.s_full != 1 {
                return Err(CliError::Usage(
                    "the aggregation builder tests a single shared trend; use --s-full 1".into(),
                ));
            }
            let (contained, contains) = build_aggregation_hypothesis(p).map_err(classify)?;
            Ok(vec![contained, contains])
        }
        (None, Some("autonomy")) => {
            if args.indices.is_empty() {
                return Err(CliError::Usage(
                    "the autonomy builder needs --indices".into(),
                ));
            }
            let spec =
                build_autonomy_hypothesis(p, &args.indices, args.s_full).map_err(classify)?;
            Ok(vec![spec])
        }
        (None, Some(other)) => Err(CliError::Usage(format!(
            "unknown builder '{other}' (expected aggregation or autonomy)"
        ))),
        (None, None) => Err(CliError::Usage(
            "name a restriction: --kind + --matrix, or --builder".into(),
        )),
        (Some(_), Some(_)) => unreachable!("clap rejects --matrix with --builder"),
    }
}

pub fn run_hypothesis(args: HypothesisArgs) -> Result<()> {
    check_unit_interval("nu", args.nu)?;
    check_unit_interval("eta", args.eta)?;

    let loaded = load_panel(&args.input, args.log, args.normalize_start)?;
    let panel = &loaded.panel;
    let (t_len, p) = (panel.t_len(), panel.width());
    let k = args.k.unwrap_or_else(|| default_k(t_len));
    let specs = hypothesis_specs(&args, p)?;

    let design = design_matrix(t_len, k, BasisKind::KarhunenLoeve).map_err(classify)?;
    let solver = CcaSolver::new(&design, DEFAULT_COND_CAP).map_err(classify)?;

    let needs_table = matches!(
        args.method,
        SelectionMethod::SeqInf | SelectionMethod::SeqOne
    );
    let cache_path = resolve_cache_path(args.cv_cache.clone());
    let mut table = if needs_table {
        open_table(&cache_path, SimSettings::default())?
    } else {
        CriticalValueTable::new(SimSettings::default())
    };
    if needs_table {
        let dims: Vec<usize> = (1..=p).collect();
        let norm = match args.method {
            SelectionMethod::SeqOne => NormKind::One,
            _ => NormKind::Inf,
        };
        table
            .ensure(&dims, &[norm], &[1.0 - args.nu, 1.0 - args.eta])
            .map_err(classify)?;
    }

    let levels = DecisionLevels {
        nu: args.nu,
        eta: args.eta,
    };
    let mut tests = Vec::new();
    for spec in &specs {
        let outcome =
            decide_with_solver(&solver, panel, spec, args.method, levels, args.rule, &table)
                .map_err(classify)?;
        let subs = subsystems(panel, spec).map_err(classify)?;
        let restricted = subsystem_report(&solver, &subs.h_panel)?;
        let complement = match &subs.hperp_panel {
            Some(sub) => Some(subsystem_report(&solver, sub)?),
            None => None,
        };
        tests.push(HypothesisTest {
            kind: spec.kind().as_str().to_string(),
            l: spec.l(),
            outcome,
            restricted,
            complement,
        });
    }

    if needs_table && table.simulations_run() > 0 {
        persist_table(&cache_path, &table)?;
    }

    let source = match (&args.matrix, args.builder.as_deref()) {
        (Some(path), _) => format!(
            "{} from {}",
            args.kind.expect("checked above"),
            path.display()
        ),
        (None, Some("autonomy")) => format!(
            "builder autonomy of series {}",
            args.indices
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ),
        (None, Some(name)) => format!("builder {name}"),
        (None, None) => unreachable!("specs built above"),
    };
    let report = HypothesisReport {
        schema: "cotrend-hypothesis/1",
        provenance: HypothesisProvenance {
            input: args.input.display().to_string(),
            t: t_len,
            p,
            k,
            basis: BasisKind::KarhunenLoeve.as_str().to_string(),
            log: args.log,
            normalize_start: args.normalize_start,
            source,
            s_full: args.s_full,
            rule: args.rule.as_str().to_string(),
            method: args.method.as_str().to_string(),
            nu: args.nu,
            eta: args.eta,
            cache: needs_table.then(|| cache_identity(&cache_path, &table)),
        },
        z_all: tests.iter().all(|t| t.outcome.z),
        tests,
    };

    print!("{}", render_hypothesis(&report));
    if let Some(out_path) = &args.out {
        write_json(out_path, &report)?;
    }
    Ok(())
}

fn subsystem_report(solver: &CcaSolver<'_>, panel: &SeriesPanel) -> Result<SubsystemReport> {
    let out = solver.solve(panel).map_err(classify)?;
    Ok(SubsystemReport {
        labels: panel.labels().to_vec(),
        eigenvalues: out.lambdas,
    })
}

#[derive(Args)]
pub struct McArgs {
    /// System dimension.
    #[arg(long)]
    pub p: usize,
    /// Sample sizes (comma-separated).
    #[arg(long = "t", value_delimiter = ',', required = true)]
    pub t_lens: Vec<usize>,
    /// True trend counts (comma-separated).
    #[arg(long = "s", value_delimiter = ',', required = true)]
    pub s_values: Vec<usize>,
    /// Basis size override; defaults to ceil(T^(3/4)) per T.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(
        long,
        value_delimiter = ',',
        default_values_t = [SelectionMethod::MaxGap, SelectionMethod::ArgmaxAlt,
                            SelectionMethod::SeqInf, SelectionMethod::SeqOne]
    )]
    pub methods: Vec<SelectionMethod>,
    /// Significance level for the sequential tests.
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Hypothesis cases to test; omit to run selection only.
    #[arg(long, value_delimiter = ',')]
    pub cases: Vec<McCase>,
    #[arg(long, default_value_t = DecisionRule::Joint)]
    pub rule: DecisionRule,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long = "cv-cache")]
    pub cv_cache: Option<PathBuf>,
    /// Directory for the report files.
    #[arg(long = "out")]
    pub out_dir: PathBuf,
}

pub fn run_mc(args: McArgs) -> Result<()> {
    check_unit_interval("level", args.level)?;
    let grid = McGrid {
        p: args.p,
        t_lens: args.t_lens.clone(),
        s_values: args.s_values.clone(),
        k: args.k,
        methods: args.methods.clone(),
        level: args.level,
    };

    let cache_path = resolve_cache_path(args.cv_cache.clone());
    let mut table = open_table(&cache_path, SimSettings::default())?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let write = |name: &str, content: String| -> Result<()> {
        let path = args.out_dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
    };

    let selection = mc_selection(&grid, args.reps, args.seed, &mut table).map_err(classify)?;
    write("selection.tsv", selection.to_delimited())?;
    write("selection.txt", selection.to_string())?;
    print!("{selection}");

    if !args.cases.is_empty() {
        let hypothesis = mc_hypothesis(
            &grid,
            &args.cases,
            args.rule,
            args.reps,
            args.seed,
            &mut table,
        )
        .map_err(classify)?;
        write("hypothesis.tsv", hypothesis.to_delimited())?;
        write("hypothesis.txt", hypothesis.to_string())?;
        print!("{hypothesis}");
    }

    if table.simulations_run() > 0 {
        persist_table(&cache_path, &table)?;
    }
    println!("reports written to {}", args.out_dir.display());
    Ok(())
}

#[derive(Args)]
pub struct DistArgs {
    /// pdf, cdf, quantile, or mean.
    pub query: String,
    /// Point (pdf/cdf) or probability (quantile).
    #[arg(allow_negative_numbers = true)]
    pub value: Option<f64>,
}

const DIST_USAGE: &str = "usage: cotrend dist <pdf|cdf|quantile> <value>\n       cotrend dist mean";

pub fn run_dist(args: DistArgs) -> Result<()> {
    let usage = |msg: String| CliError::Usage(format!("{msg}\n{DIST_USAGE}"));
    let result = match args.query.as_str() {
        "mean" => {
            if args.value.is_some() {
                return Err(usage("mean takes no argument".into()));
            }
            zeta1_mean()
        }
        q @ ("pdf" | "cdf" | "quantile") => {
            let v = args
                .value
                .ok_or_else(|| usage(format!("{q} needs a numeric argument")))?;
            let eval = match q {
                "pdf" => zeta1_pdf(v),
                "cdf" => zeta1_cdf(v),
                _ => zeta1_quantile(v),
            };
            eval.map_err(|e| usage(e.to_string()))?
        }
        other => return Err(usage(format!("unknown query '{other}'"))),
    };
    println!("{result:.5}");
    Ok(())
}
