//! Replication studies over `(N, T)` grids.
//!
//! Each replication draws a panel, fits it, aligns the labels against the
//! truth and records estimation error, misclassification and interval
//! coverage. Replication `r` at grid point `(N, T)` is seeded by
//! [`replication_seed`], so rows do not depend on the thread schedule or on
//! the total number of replications.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{align, scaled_mu_errors};
use crate::dgp::{
    asymptotic_sequence_value, classify_units, design_diagnostics, generate_panel,
    generate_panel_with_noise_sums, misclassification_budget, noise_partial_sums,
    sigma_threshold, DgpConfig, ErrorLaw,
};
use crate::error::{Error, Result};
use crate::estimator::{estimate, FitOptions};
use crate::inference::infer;
use crate::numeric::{min_pairwise_gap, normal_quantile};
use crate::rng::{mix_seed, replication_seed};

/// Where the group separation entering the classification threshold comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinGapSource {
    /// Smallest gap between the true means.
    #[default]
    Truth,
    /// Smallest gap between the estimated means of each replication.
    Estimated,
}

/// Pass/fail assertions evaluated on the summary; any failure makes the
/// `mc` command exit with status 3.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McChecks {
    /// Allowed range of per-group coverage at every grid point.
    pub coverage: Option<[f64; 2]>,
    /// Allowed range of the per-group log-RMSE slope on `log(NT)`.
    pub slope: Option<[f64; 2]>,
    /// Largest tolerated share of flagged (non-converged or failed) rows.
    pub max_flagged_fraction: Option<f64>,
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Design template; `n` and `t` are overridden by each grid point.
    pub design: DgpConfig,
    pub grid: Vec<(usize, usize)>,
    pub replications: usize,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub mg_source: MinGapSource,
    /// Record `max_i |T^{-1/2} sum_t v_it|` per replication.
    #[serde(default)]
    pub retain_noise: bool,
    #[serde(default)]
    pub checks: McChecks,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("grid must not be empty".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.fit.validate()?;
        for (k, &(n, t)) in self.grid.iter().enumerate() {
            if t < 2 {
                return Err(Error::Config(format!("grid point ({n}, {t}): inference needs T >= 2")));
            }
            if self.grid[..k].contains(&(n, t)) {
                return Err(Error::Config(format!("grid point ({n}, {t}) is repeated")));
            }
            self.design.with_size(n, t).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// The winning Lloyd run hit the iteration cap.
    NotConverged,
    /// Fitting or inference raised an error; numeric fields are NaN.
    Failed,
}

impl RowStatus {
    fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::NotConverged => "not_converged",
            RowStatus::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(RowStatus::Ok),
            "not_converged" => Some(RowStatus::NotConverged),
            "failed" => Some(RowStatus::Failed),
            _ => None,
        }
    }
}

/// Outcome for one true group in one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupOutcome {
    /// Estimate of the aligned group, `mu_hat[pi(g)]`.
    pub mu_hat: f64,
    pub mu_err: f64,
    pub scaled_err: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub covered: bool,
    pub degenerate: bool,
}

impl GroupOutcome {
    fn failed() -> Self {
        Self {
            mu_hat: f64::NAN,
            mu_err: f64::NAN,
            scaled_err: f64::NAN,
            ci_lower: f64::NAN,
            ci_upper: f64::NAN,
            covered: false,
            degenerate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRow {
    pub n: usize,
    pub t: usize,
    pub rep: usize,
    pub seed: u64,
    pub status: RowStatus,
    pub objective: f64,
    pub eq3_lhs: f64,
    pub misclassified_in_i: usize,
    pub misclassified_in_ic: usize,
    pub misclassified_total: usize,
    pub max_partial_sum: Option<f64>,
    pub groups: Vec<GroupOutcome>,
}

impl ReplicationRow {
    pub fn is_usable(&self) -> bool {
        self.status != RowStatus::Failed
    }
}

fn replicate(cfg: &McConfig, n: usize, t: usize, rep: usize) -> ReplicationRow {
    let seed = replication_seed(cfg.base_seed, n, t, rep);
    let g = cfg.design.num_groups;
    let mut row = ReplicationRow {
        n,
        t,
        rep,
        seed,
        status: RowStatus::Failed,
        objective: f64::NAN,
        eq3_lhs: f64::NAN,
        misclassified_in_i: 0,
        misclassified_in_ic: 0,
        misclassified_total: 0,
        max_partial_sum: None,
        groups: vec![GroupOutcome::failed(); g],
    };
    let _ = fill_replication(cfg, &mut row);
    row
}

fn fill_replication(cfg: &McConfig, row: &mut ReplicationRow) -> Result<()> {
    let (n, t) = (row.n, row.t);
    let design = cfg.design.with_size(n, t);
    let panel = if cfg.retain_noise {
        let (panel, sums) = generate_panel_with_noise_sums(&design, row.seed)?;
        row.max_partial_sum = Some(sums.iter().fold(0.0f64, |m, s| m.max(s.abs())));
        panel
    } else {
        generate_panel(&design, row.seed)?
    };
    let truth = panel.truth.clone().expect("generated panels carry truth");
    let est = estimate(&panel, design.num_groups, &cfg.fit, mix_seed(row.seed, &[1]))?;
    let inf = infer(&panel, &est, cfg.alpha)?;

    let min_gap = match cfg.mg_source {
        MinGapSource::Truth => design.min_gap(),
        MinGapSource::Estimated => min_pairwise_gap(est.mu_hat.as_slice()),
    };
    let (i_set, ic_set) = match sigma_threshold(min_gap, n, t) {
        Ok(threshold) => classify_units(&truth.sigma, threshold),
        // Merged estimated groups: no unit is guaranteed to be classified.
        Err(_) => (Vec::new(), (0..n).collect()),
    };
    let report = align(est.mu_hat.as_slice(), &est.g_hat, &truth.mu0, &truth.g0, &i_set)?;
    let scaled = scaled_mu_errors(est.mu_hat.as_slice(), &truth.mu0, &report.perm, n, t);

    row.objective = est.objective;
    row.eq3_lhs = misclassification_budget(&truth.sigma, &ic_set, n, t);
    row.misclassified_in_i = report.misclassified_in_i;
    row.misclassified_in_ic = report.misclassified_in_ic;
    row.misclassified_total = report.misclassified_total;
    for (g, out) in row.groups.iter_mut().enumerate() {
        let h = report.perm.apply(g);
        let gi = &inf.groups[h];
        let mu0 = truth.mu0[g];
        *out = GroupOutcome {
            mu_hat: gi.mu_hat,
            mu_err: gi.mu_hat - mu0,
            scaled_err: scaled[g],
            ci_lower: gi.ci_lower,
            ci_upper: gi.ci_upper,
            covered: gi.ci_lower <= mu0 && mu0 <= gi.ci_upper,
            degenerate: gi.degenerate,
        };
    }
    row.status = if est.converged { RowStatus::Ok } else { RowStatus::NotConverged };
    Ok(())
}

/// Runs every replication of every grid point on the current rayon pool.
/// Rows come back sorted by `(N, T, rep)`.
pub fn run_mc(cfg: &McConfig) -> Result<Vec<ReplicationRow>> {
    cfg.validate()?;
    let mut jobs: Vec<(usize, usize, usize)> = cfg
        .grid
        .iter()
        .flat_map(|&(n, t)| (0..cfg.replications).map(move |r| (n, t, r)))
        .collect();
    jobs.sort_unstable();
    Ok(jobs.into_par_iter().map(|(n, t, r)| replicate(cfg, n, t, r)).collect())
}

/// [`run_mc`] on a dedicated pool of `threads` workers.
pub fn run_mc_with_threads(cfg: &McConfig, threads: usize) -> Result<Vec<ReplicationRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_mc(cfg))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn rows_header(num_groups: usize) -> String {
    let mut cols: Vec<String> = [
        "n",
        "t",
        "rep",
        "seed",
        "status",
        "objective",
        "eq3_lhs",
        "misclassified_in_i",
        "misclassified_in_ic",
        "misclassified_total",
        "max_partial_sum",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for g in 1..=num_groups {
        for name in ["mu_hat", "mu_err", "scaled_err", "ci_lower", "ci_upper", "covered", "degenerate"] {
            cols.push(format!("{name}_{g}"));
        }
    }
    cols.join(",")
}

/// Writes rows as CSV; floats use the shortest round-trip representation.
pub fn write_rows<W: Write>(mut out: W, rows: &[ReplicationRow], num_groups: usize) -> Result<()> {
    writeln!(out, "{}", rows_header(num_groups))?;
    for r in rows {
        let mut fields = vec![
            r.n.to_string(),
            r.t.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.status.as_str().to_string(),
            r.objective.to_string(),
            r.eq3_lhs.to_string(),
            r.misclassified_in_i.to_string(),
            r.misclassified_in_ic.to_string(),
            r.misclassified_total.to_string(),
            fmt_opt(r.max_partial_sum),
        ];
        for o in &r.groups {
            fields.extend([
                o.mu_hat.to_string(),
                o.mu_err.to_string(),
                o.scaled_err.to_string(),
                o.ci_lower.to_string(),
                o.ci_upper.to_string(),
                u8::from(o.covered).to_string(),
                u8::from(o.degenerate).to_string(),
            ]);
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a rows CSV written by [`write_rows`].
pub fn read_rows<R: Read>(input: R) -> Result<Vec<ReplicationRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let width = reader.headers()?.len();
    if width < 11 || (width - 11) % 7 != 0 {
        return Err(Error::Data(format!("row 1: unexpected rows header width {width}")));
    }
    let num_groups = (width - 11) / 7;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |col: usize| Error::Data(format!("row {line}: bad value in column {}", col + 1));
        let int = |col: usize| record[col].parse::<usize>().map_err(|_| bad(col));
        let real = |col: usize| record[col].parse::<f64>().map_err(|_| bad(col));
        let flag = |col: usize| match &record[col] {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(col)),
        };
        let mut groups = Vec::with_capacity(num_groups);
        for g in 0..num_groups {
            let b = 11 + 7 * g;
            groups.push(GroupOutcome {
                mu_hat: real(b)?,
                mu_err: real(b + 1)?,
                scaled_err: real(b + 2)?,
                ci_lower: real(b + 3)?,
                ci_upper: real(b + 4)?,
                covered: flag(b + 5)?,
                degenerate: flag(b + 6)?,
            });
        }
        rows.push(ReplicationRow {
            n: int(0)?,
            t: int(1)?,
            rep: int(2)?,
            seed: record[3].parse().map_err(|_| bad(3))?,
            status: RowStatus::parse(&record[4]).ok_or_else(|| bad(4))?,
            objective: real(5)?,
            eq3_lhs: real(6)?,
            misclassified_in_i: int(7)?,
            misclassified_in_ic: int(8)?,
            misclassified_total: int(9)?,
            max_partial_sum: if record[10].is_empty() { None } else { Some(real(10)?) },
            groups,
        });
    }
    Ok(rows)
}

/// Root mean squared aligned error of group `g` over usable rows.
pub fn rmse(rows: &[ReplicationRow], g: usize) -> f64 {
    let errs: Vec<f64> = rows.iter().filter(|r| r.is_usable()).map(|r| r.groups[g].mu_err).collect();
    (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
}

/// Fraction of usable rows whose interval for group `g` covers the truth.
pub fn coverage(rows: &[ReplicationRow], g: usize) -> Result<f64> {
    let usable: Vec<&ReplicationRow> = rows.iter().filter(|r| r.is_usable()).collect();
    if usable.is_empty() {
        return Err(Error::Domain("coverage needs at least one usable row".into()));
    }
    if usable.iter().any(|r| r.groups[g].degenerate) {
        return Err(Error::Domain("coverage is undefined for degenerate intervals".into()));
    }
    Ok(usable.iter().filter(|r| r.groups[g].covered).count() as f64 / usable.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Sample mean, unbiased variance, and moment-ratio skewness and excess
/// kurtosis (NaN when the variance is zero).
pub fn sample_moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (f64::NAN, f64::NAN)
    };
    Moments {
        mean,
        variance: if xs.len() > 1 { m2 * n / (n - 1.0) } else { 0.0 },
        skewness,
        excess_kurtosis,
    }
}

/// Moments of `sqrt(NT)(mu_hat - mu0)` for group `g`; needs 100 usable rows.
pub fn normality_moments(rows: &[ReplicationRow], g: usize) -> Result<Moments> {
    let xs: Vec<f64> = rows.iter().filter(|r| r.is_usable()).map(|r| r.groups[g].scaled_err).collect();
    if xs.len() < 100 {
        return Err(Error::Domain(format!("normality moments need >= 100 rows, got {}", xs.len())));
    }
    Ok(sample_moments(&xs))
}

/// OLS slope of `ys` on `xs` with intercept, and its standard error.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let k = xs.len();
    if k < 3 || ys.len() != k {
        return Err(Error::Domain(format!("slope regression needs >= 3 points, got {k}")));
    }
    let kf = k as f64;
    let mx = xs.iter().sum::<f64>() / kf;
    let my = ys.iter().sum::<f64>() / kf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all regressors are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok((slope, (ssr / (kf - 2.0) / sxx).sqrt()))
}

fn grid_points(rows: &[ReplicationRow]) -> Vec<(usize, usize)> {
    let mut points: Vec<(usize, usize)> = Vec::new();
    for r in rows {
        if !points.contains(&(r.n, r.t)) {
            points.push((r.n, r.t));
        }
    }
    points
}

fn at_point(rows: &[ReplicationRow], n: usize, t: usize) -> Vec<ReplicationRow> {
    rows.iter().filter(|r| r.n == n && r.t == t).cloned().collect()
}

/// Regression of `log rmse_g(N, T)` on `log(NT)` across grid points; the
/// root-NT rate predicts a slope of -1/2.
pub fn rate_regression(rows: &[ReplicationRow], g: usize) -> Result<(f64, f64)> {
    let points = grid_points(rows);
    if points.len() < 3 {
        return Err(Error::Domain(format!("rate regression needs >= 3 grid points, got {}", points.len())));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, t) in points {
        let e = rmse(&at_point(rows, n, t), g);
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::Domain(format!("rmse at ({n}, {t}) is {e}; log undefined")));
        }
        xs.push(((n * t) as f64).ln());
        ys.push(e.ln());
    }
    ols_slope(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub rmse: f64,
    pub mean_scaled: f64,
    pub var_scaled: f64,
    /// NaN when any interval is degenerate.
    pub coverage: f64,
}

/// Aggregates for one grid point over one subset of rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub n: usize,
    pub t: usize,
    /// `all` (every usable row) or `converged` (status ok only).
    pub subset: &'static str,
    pub reps: usize,
    pub flagged: usize,
    pub asymptotic_seq_value: f64,
    pub eq3_lhs: f64,
    pub eq3_lhs_nominal: f64,
    pub p_any_mis_in_i: f64,
    pub p_any_mis: f64,
    pub mean_mis_rate: f64,
    pub groups: Vec<GroupSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSummary {
    pub grid: Vec<GridSummary>,
    /// Per group `(slope, stderr)`, when at least three grid points are usable.
    pub slopes: Option<Vec<(f64, f64)>>,
}

fn summarize_subset(rows: &[ReplicationRow], n: usize, t: usize, subset: &'static str, flagged: usize, nominal: f64, num_groups: usize) -> GridSummary {
    let k = rows.len() as f64;
    let frac = |pred: &dyn Fn(&ReplicationRow) -> bool| rows.iter().filter(|r| pred(r)).count() as f64 / k;
    let groups = (0..num_groups)
        .map(|g| {
            let scaled: Vec<f64> = rows.iter().map(|r| r.groups[g].scaled_err).collect();
            let m = sample_moments(&scaled);
            GroupSummary {
                rmse: rmse(rows, g),
                mean_scaled: m.mean,
                var_scaled: m.variance,
                coverage: coverage(rows, g).unwrap_or(f64::NAN),
            }
        })
        .collect();
    GridSummary {
        n,
        t,
        subset,
        reps: rows.len(),
        flagged,
        asymptotic_seq_value: asymptotic_sequence_value(n, t),
        eq3_lhs: rows.iter().map(|r| r.eq3_lhs).sum::<f64>() / k,
        eq3_lhs_nominal: nominal,
        p_any_mis_in_i: frac(&|r| r.misclassified_in_i > 0),
        p_any_mis: frac(&|r| r.misclassified_total > 0),
        mean_mis_rate: rows.iter().map(|r| r.misclassified_total as f64 / n as f64).sum::<f64>() / k,
        groups,
    }
}

/// Per-grid-point aggregates (all usable rows, and converged rows only)
/// plus the rate-regression slopes.
pub fn summarize(rows: &[ReplicationRow], design: &DgpConfig) -> RateSummary {
    let num_groups = design.num_groups;
    let mut grid = Vec::new();
    for (n, t) in grid_points(rows) {
        let point = at_point(rows, n, t);
        let flagged = point.iter().filter(|r| r.status != RowStatus::Ok).count();
        let nominal = design_diagnostics(&design.with_size(n, t), design.min_gap())
            .map(|d| d.eq3_lhs_nominal)
            .unwrap_or(f64::NAN);
        let usable: Vec<ReplicationRow> = point.iter().filter(|r| r.is_usable()).cloned().collect();
        let converged: Vec<ReplicationRow> = point.iter().filter(|r| r.status == RowStatus::Ok).cloned().collect();
        grid.push(summarize_subset(&usable, n, t, "all", flagged, nominal, num_groups));
        grid.push(summarize_subset(&converged, n, t, "converged", flagged, nominal, num_groups));
    }
    let slopes = (0..num_groups).map(|g| rate_regression(rows, g)).collect::<Result<Vec<_>>>().ok();
    RateSummary { grid, slopes }
}

pub fn write_summary<W: Write>(mut out: W, summary: &RateSummary, num_groups: usize) -> Result<()> {
    let mut header: Vec<String> = [
        "row", "n", "t", "subset", "reps", "flagged", "asym_seq", "eq3_lhs", "eq3_lhs_nominal",
        "p_any_mis_in_i", "p_any_mis", "mean_mis_rate",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for g in 1..=num_groups {
        for name in ["rmse", "mean_scaled", "var_scaled", "coverage"] {
            header.push(format!("{name}_{g}"));
        }
    }
    for g in 1..=num_groups {
        header.push(format!("slope_{g}"));
        header.push(format!("slope_stderr_{g}"));
    }
    writeln!(out, "{}", header.join(","))?;
    for s in &summary.grid {
        let mut f = vec![
            "grid".to_string(),
            s.n.to_string(),
            s.t.to_string(),
            s.subset.to_string(),
            s.reps.to_string(),
            s.flagged.to_string(),
            s.asymptotic_seq_value.to_string(),
            s.eq3_lhs.to_string(),
            s.eq3_lhs_nominal.to_string(),
            s.p_any_mis_in_i.to_string(),
            s.p_any_mis.to_string(),
            s.mean_mis_rate.to_string(),
        ];
        for g in &s.groups {
            f.extend([g.rmse.to_string(), g.mean_scaled.to_string(), g.var_scaled.to_string(), g.coverage.to_string()]);
        }
        f.extend(std::iter::repeat_n(String::new(), 2 * num_groups));
        writeln!(out, "{}", f.join(","))?;
    }
    let mut f = vec!["slope".to_string(), String::new(), String::new(), "all".to_string()];
    f.extend(std::iter::repeat_n(String::new(), 8 + 4 * num_groups));
    match &summary.slopes {
        Some(slopes) => {
            for (s, e) in slopes {
                f.push(s.to_string());
                f.push(e.to_string());
            }
        }
        None => f.extend(std::iter::repeat_n(String::new(), 2 * num_groups)),
    }
    writeln!(out, "{}", f.join(","))?;
    out.flush()?;
    Ok(())
}

/// Sorted scaled errors against standard normal quantiles at `(k - 0.5) / R`,
/// per grid point and group: `(n, t, group, rank, normal_quantile, scaled_err)`.
pub fn qq_table(rows: &[ReplicationRow], num_groups: usize) -> Vec<(usize, usize, usize, usize, f64, f64)> {
    let mut out = Vec::new();
    for (n, t) in grid_points(rows) {
        let point: Vec<&ReplicationRow> = rows.iter().filter(|r| r.n == n && r.t == t && r.is_usable()).collect();
        let m = point.len() as f64;
        for g in 0..num_groups {
            let mut xs: Vec<f64> = point.iter().map(|r| r.groups[g].scaled_err).collect();
            xs.sort_by(f64::total_cmp);
            for (k, x) in xs.into_iter().enumerate() {
                out.push((n, t, g + 1, k + 1, normal_quantile((k as f64 + 0.5) / m), x));
            }
        }
    }
    out
}

pub fn write_qq<W: Write>(mut out: W, rows: &[ReplicationRow], num_groups: usize) -> Result<()> {
    writeln!(out, "n,t,group,rank,normal_quantile,scaled_err")?;
    for (n, t, g, k, q, x) in qq_table(rows, num_groups) {
        writeln!(out, "{n},{t},{g},{k},{q},{x}")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Evaluates the configured checks against a summary.
pub fn evaluate_checks(checks: &McChecks, summary: &RateSummary, rows: &[ReplicationRow]) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    if let Some([lo, hi]) = checks.coverage {
        for s in summary.grid.iter().filter(|s| s.subset == "all") {
            for (g, gs) in s.groups.iter().enumerate() {
                out.push(CheckOutcome {
                    name: format!("coverage group {} at N={} T={}", g + 1, s.n, s.t),
                    passed: gs.coverage >= lo && gs.coverage <= hi,
                    detail: format!("{} in [{lo}, {hi}]", gs.coverage),
                });
            }
        }
    }
    if let Some([lo, hi]) = checks.slope {
        match &summary.slopes {
            Some(slopes) => {
                for (g, (s, _)) in slopes.iter().enumerate() {
                    out.push(CheckOutcome {
                        name: format!("rate slope group {}", g + 1),
                        passed: *s >= lo && *s <= hi,
                        detail: format!("{s} in [{lo}, {hi}]"),
                    });
                }
            }
            None => out.push(CheckOutcome {
                name: "rate slope".into(),
                passed: false,
                detail: "slope unavailable (needs >= 3 grid points with positive rmse)".into(),
            }),
        }
    }
    if let Some(max) = checks.max_flagged_fraction {
        let flagged = rows.iter().filter(|r| r.status != RowStatus::Ok).count() as f64 / rows.len().max(1) as f64;
        out.push(CheckOutcome {
            name: "flagged fraction".into(),
            passed: flagged <= max,
            detail: format!("{flagged} <= {max}"),
        });
    }
    out
}

/// Empirical check of the maximal inequality
/// `P(max_i |T^{-1/2} sum_t v_it| > 14 sqrt(log N)) <= 3 / N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCheck {
    pub threshold: f64,
    pub bound: f64,
    pub empirical_freq: f64,
    pub largest_max: f64,
}

impl TailCheck {
    pub fn holds(&self) -> bool {
        self.empirical_freq <= self.bound
    }
}

pub fn tail_bound_check(n: usize, t: usize, reps: usize, law: &ErrorLaw, seed: u64) -> Result<TailCheck> {
    if n < 2 {
        return Err(Error::Domain(format!("tail check needs N >= 2, got {n}")));
    }
    if t < 1 || reps < 1 {
        return Err(Error::Domain("tail check needs T >= 1 and R >= 1".into()));
    }
    let threshold = 14.0 * (n as f64).ln().sqrt();
    let maxima = (0..reps)
        .into_par_iter()
        .map(|r| {
            noise_partial_sums(law, n, t, mix_seed(seed, &[r as u64]))
                .map(|s| s.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        })
        .collect::<Result<Vec<f64>>>()?;
    let exceed = maxima.iter().filter(|&&m| m > threshold).count();
    Ok(TailCheck {
        threshold,
        bound: 3.0 / n as f64,
        empirical_freq: exceed as f64 / reps as f64,
        largest_max: maxima.iter().copied().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::SigmaSchedule;

    fn config(sigma: f64, grid: Vec<(usize, usize)>, reps: usize) -> McConfig {
        McConfig {
            design: DgpConfig {
                num_groups: 2,
                mu0: vec![-1.0, 1.0],
                group_proportions: vec![0.5, 0.5],
                sigma_schedule: SigmaSchedule::Constant { sigma },
                error_law: ErrorLaw::StandardNormal,
                n: 0,
                t: 0,
            },
            grid,
            replications: reps,
            fit: FitOptions { restarts: 10, ..FitOptions::default() },
            alpha: 0.05,
            base_seed: 42,
            mg_source: MinGapSource::Truth,
            retain_noise: true,
            checks: McChecks::default(),
        }
    }

    fn synthetic(n: usize, t: usize, errs: &[f64]) -> Vec<ReplicationRow> {
        errs.iter()
            .enumerate()
            .map(|(rep, &e)| ReplicationRow {
                n,
                t,
                rep,
                seed: 0,
                status: RowStatus::Ok,
                objective: 1.0,
                eq3_lhs: 0.0,
                misclassified_in_i: 0,
                misclassified_in_ic: 0,
                misclassified_total: 0,
                max_partial_sum: None,
                groups: vec![GroupOutcome {
                    mu_hat: e,
                    mu_err: e,
                    scaled_err: e * ((n * t) as f64).sqrt(),
                    ci_lower: -1.0,
                    ci_upper: if rep % 2 == 0 { 1.0 } else { -0.5 },
                    covered: rep % 2 == 0,
                    degenerate: false,
                }],
            })
            .collect()
    }

    #[test]
    fn noiseless_replication_is_exact() {
        let rows = run_mc(&config(0.0, vec![(20, 4)], 1)).unwrap();
        let r = &rows[0];
        assert_eq!(r.status, RowStatus::Ok);
        assert_eq!(r.misclassified_total, 0);
        for o in &r.groups {
            assert_eq!(o.mu_err, 0.0);
            assert!(o.covered && o.degenerate);
        }
        assert_eq!(r.max_partial_sum.map(|m| m > 0.0), Some(true));
    }

    #[test]
    fn rows_are_deterministic_and_prefix_stable() {
        let cfg = config(1.0, vec![(30, 10), (40, 5)], 4);
        let a = run_mc_with_threads(&cfg, 1).unwrap();
        let b = run_mc_with_threads(&cfg, 3).unwrap();
        assert_eq!(a, b);
        let longer = run_mc(&McConfig { replications: 6, ..cfg }).unwrap();
        for row in &a {
            let twin = longer.iter().find(|r| (r.n, r.t, r.rep) == (row.n, row.t, row.rep)).unwrap();
            assert_eq!(twin, row);
        }
        let order: Vec<_> = a.iter().map(|r| (r.n, r.rep)).collect();
        assert_eq!(order, vec![(30, 0), (30, 1), (30, 2), (30, 3), (40, 0), (40, 1), (40, 2), (40, 3)]);
    }

    #[test]
    fn aggregates_survive_csv_round_trip() {
        let cfg = config(1.5, vec![(20, 5), (30, 5), (40, 5)], 5);
        let rows = run_mc(&cfg).unwrap();
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows, 2).unwrap();
        let back = read_rows(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        let a = summarize(&rows, &cfg.design);
        let b = summarize(&back, &cfg.design);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn exact_rate_gives_half_slope() {
        let mut rows = Vec::new();
        for (n, t) in [(10, 10), (20, 40), (80, 50), (100, 300)] {
            rows.extend(synthetic(n, t, &[((n * t) as f64).powf(-0.5); 3]));
        }
        let (slope, se) = rate_regression(&rows, 0).unwrap();
        assert!((slope + 0.5).abs() < 1e-12);
        assert!(se < 1e-10);

        let mut flat = Vec::new();
        for (n, t) in [(10, 10), (20, 40), (80, 50)] {
            flat.extend(synthetic(n, t, &[0.3, -0.3]));
        }
        assert!(rate_regression(&flat, 0).unwrap().0.abs() < 1e-12);
        assert!(rate_regression(&flat[..4], 0).is_err());
    }

    #[test]
    fn coverage_identities() {
        let rows = synthetic(10, 10, &[0.1; 4]);
        assert_eq!(coverage(&rows, 0).unwrap(), 0.5);
        let all: Vec<_> = rows.iter().cloned().map(|mut r| { r.groups[0].covered = true; r }).collect();
        assert_eq!(coverage(&all, 0).unwrap(), 1.0);
        let none: Vec<_> = rows.iter().cloned().map(|mut r| { r.groups[0].covered = false; r }).collect();
        assert_eq!(coverage(&none, 0).unwrap(), 0.0);
        assert!(coverage(&[], 0).is_err());
    }

    #[test]
    fn moments_of_constant_and_normal_samples() {
        let c = sample_moments(&[2.0; 150]);
        assert_eq!(c.variance, 0.0);
        let rows = synthetic(1, 1, &[0.5; 99]);
        assert!(normality_moments(&rows, 0).is_err());

        let sampler = ErrorLaw::StandardNormal.sampler().unwrap();
        let mut rng = crate::rng::stream_rng(5, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| sampler.sample(&mut rng)).collect();
        let m = sample_moments(&xs);
        // Standard errors: sqrt(6/R) = 0.0077, sqrt(24/R) = 0.015.
        assert!(m.skewness.abs() < 0.03, "{m:?}");
        assert!(m.excess_kurtosis.abs() < 0.06, "{m:?}");
        assert!((m.variance - 1.0).abs() < 0.02);
    }

    #[test]
    fn tail_check_constants() {
        let c = tail_bound_check(1000, 20, 4, &ErrorLaw::Rademacher, 1).unwrap();
        assert!((c.threshold - 36.795_652_388_298_53).abs() < 1e-9);
        assert_eq!(c.bound, 0.003);
        assert_eq!(c.empirical_freq, 0.0);
        assert!(c.holds());
        assert!(tail_bound_check(1, 20, 4, &ErrorLaw::Rademacher, 1).is_err());
    }

    #[test]
    fn checks_report_failures() {
        let cfg = config(1.0, vec![(30, 10)], 3);
        let rows = run_mc(&cfg).unwrap();
        let summary = summarize(&rows, &cfg.design);
        let checks = McChecks { coverage: Some([1.1, 1.2]), slope: Some([-0.6, -0.4]), max_flagged_fraction: Some(0.0) };
        let out = evaluate_checks(&checks, &summary, &rows);
        assert!(out.iter().filter(|c| c.name.starts_with("coverage")).all(|c| !c.passed));
        assert!(out.iter().any(|c| c.name == "rate slope" && !c.passed));
        assert!(out.iter().any(|c| c.name == "flagged fraction" && c.passed));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(run_mc(&config(1.0, vec![], 3)).is_err());
        assert!(run_mc(&config(1.0, vec![(10, 2)], 0)).is_err());
        assert!(run_mc(&McConfig { alpha: 1.5, ..config(1.0, vec![(10, 2)], 1) }).is_err());
        assert!(run_mc(&config(1.0, vec![(10, 1)], 1)).is_err());
        assert!(run_mc(&config(1.0, vec![(10, 2), (10, 2)], 1)).is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: McConfig = serde_json::from_str(
            r#"{"design":{"num_groups":2,"mu0":[-1,1],"group_proportions":[0.5,0.5],
                "sigma_schedule":{"kind":"constant","sigma":1}},
                "grid":[[50,50]],"replications":3,"fit":{"restarts":5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.fit.restarts, 5);
        assert_eq!(cfg.fit.max_iterations_per_restart, 1000);
        assert_eq!(cfg.mg_source, MinGapSource::Truth);
        assert!(cfg.validate().is_ok());
    }
}
