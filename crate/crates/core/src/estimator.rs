//! Least-squares kmeans estimation of group means and memberships.
//!
//! The objective is `Q(g, mu) = (NT)^{-1} sum_i sum_t (y_it - mu[g_i])^2`.
//! It splits exactly into a within-unit part `W`, which does not depend on
//! `(g, mu)`, and a between part `B = N^{-1} sum_i (ybar_i - mu[g_i])^2`, so
//! every update below works on the unit means `ybar_i` alone.

use itertools::Itertools;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::PanelData;
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::rng::stream_rng;

/// Group label per unit, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupAssignment(Vec<usize>);

impl GroupAssignment {
    pub fn new(labels: Vec<usize>, num_groups: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Dimension("assignment needs at least one unit".into()));
        }
        if let Some(bad) = labels.iter().find(|&&g| g >= num_groups) {
            return Err(Error::Dimension(format!(
                "label {bad} outside 0..{num_groups}"
            )));
        }
        Ok(Self(labels))
    }

    pub(crate) fn from_labels(labels: Vec<usize>) -> Self {
        Self(labels)
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn counts(&self, num_groups: usize) -> Vec<usize> {
        let mut counts = vec![0; num_groups];
        for &g in &self.0 {
            counts[g] += 1;
        }
        counts
    }

    /// Renames label `g` to `map[g]`.
    pub fn relabel(&self, map: &[usize]) -> Self {
        Self(self.0.iter().map(|&g| map[g]).collect())
    }

    /// Whether both assignments induce the same set partition of the units.
    pub fn same_partition(&self, other: &Self) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let mut forward = std::collections::HashMap::new();
        let mut backward = std::collections::HashMap::new();
        self.0.iter().zip(&other.0).all(|(&a, &b)| {
            *forward.entry(a).or_insert(b) == b && *backward.entry(b).or_insert(a) == a
        })
    }
}

/// Group means, one per group label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans(pub Vec<f64>);

impl GroupMeans {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Uniform random labels.
    RandomAssignment,
    /// Max-min spread of initial centers over the unit means, from a random first center.
    SpreadSeeding,
    /// Spread seeding on even restarts, random labels on odd ones.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iterations_per_restart: usize,
    /// Means are clamped to `[-h, h]`; `None` uses `10 * max_i |ybar_i|`.
    pub parameter_box_halfwidth: Option<f64>,
    pub init_strategy: InitStrategy,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 100,
            max_iterations_per_restart: 1000,
            parameter_box_halfwidth: None,
            init_strategy: InitStrategy::Mixed,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be >= 1".into()));
        }
        if self.max_iterations_per_restart == 0 {
            return Err(Error::Config("max_iterations_per_restart must be >= 1".into()));
        }
        if let Some(h) = self.parameter_box_halfwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("parameter box halfwidth must be > 0, got {h}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub mu_hat: GroupMeans,
    pub g_hat: GroupAssignment,
    pub objective: f64,
    pub restarts_run: usize,
    pub iterations_total: usize,
    pub best_restart_index: usize,
    /// Whether the winning run reached an assignment fixed point.
    pub converged: bool,
    /// Whether clamping to the parameter box changed any final mean.
    pub box_active: bool,
    /// Objective after every half-step of the winning run.
    pub trace: Vec<f64>,
}

/// Unit time averages `ybar_i`, compensated.
pub fn unit_means(data: &PanelData) -> Vec<f64> {
    let t = data.t() as f64;
    data.rows().map(|r| compensated_sum(r.iter().copied()) / t).collect()
}

/// `Q(g, mu)` evaluated directly from the outcomes.
pub fn objective(data: &PanelData, g: &GroupAssignment, mu: &GroupMeans) -> Result<f64> {
    check_dims(data, g, mu)?;
    let mut acc = CompensatedSum::new();
    for (row, &gi) in data.rows().zip(g.labels()) {
        let m = mu.0[gi];
        for &y in row {
            acc.add((y - m) * (y - m));
        }
    }
    Ok(acc.value() / (data.n() * data.t()) as f64)
}

/// Within-unit part `W = (NT)^{-1} sum_i sum_t (y_it - ybar_i)^2`.
pub fn within_component(data: &PanelData) -> f64 {
    let ybar = unit_means(data);
    within_from_means(data, &ybar)
}

fn within_from_means(data: &PanelData, ybar: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (row, &m) in data.rows().zip(ybar) {
        for &y in row {
            acc.add((y - m) * (y - m));
        }
    }
    acc.value() / (data.n() * data.t()) as f64
}

/// Between part `B = N^{-1} sum_i (ybar_i - mu[g_i])^2`.
pub fn between_component(ybar: &[f64], g: &GroupAssignment, mu: &GroupMeans) -> f64 {
    // Plain left-to-right sum: per-term decreases then give an exactly
    // non-increasing total in the assignment step.
    let s: f64 = ybar
        .iter()
        .zip(g.labels())
        .map(|(&y, &gi)| (y - mu.0[gi]) * (y - mu.0[gi]))
        .sum();
    s / ybar.len() as f64
}

fn check_dims(data: &PanelData, g: &GroupAssignment, mu: &GroupMeans) -> Result<()> {
    if g.len() != data.n() {
        return Err(Error::Dimension(format!(
            "assignment has {} units, panel has {}",
            g.len(),
            data.n()
        )));
    }
    if let Some(bad) = g.labels().iter().find(|&&l| l >= mu.len()) {
        return Err(Error::Dimension(format!(
            "label {bad} but only {} group means",
            mu.len()
        )));
    }
    Ok(())
}

fn default_halfwidth(ybar: &[f64]) -> f64 {
    10.0 * ybar.iter().fold(0.0f64, |m, y| m.max(y.abs()))
}

/// Mean-update result on the unit means.
struct MeanUpdate {
    means: Vec<f64>,
    clamped: bool,
}

fn update_means_on(ybar: &[f64], g: &[usize], num_groups: usize, halfwidth: f64) -> MeanUpdate {
    let mut sums = vec![CompensatedSum::new(); num_groups];
    let mut counts = vec![0usize; num_groups];
    for (&y, &gi) in ybar.iter().zip(g) {
        sums[gi].add(y);
        counts[gi] += 1;
    }
    let mut means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s.value() / c as f64 } else { f64::NAN })
        .collect();
    // Empty groups take the unit mean farthest from its current center.
    let mut taken = vec![false; ybar.len()];
    for k in 0..num_groups {
        if counts[k] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, (&y, &gi)) in ybar.iter().zip(g).enumerate() {
            if taken[i] {
                continue;
            }
            let d = if means[gi].is_nan() { 0.0 } else { (y - means[gi]).powi(2) };
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        means[k] = match best {
            Some((i, _)) => {
                taken[i] = true;
                ybar[i]
            }
            None => ybar.iter().sum::<f64>() / ybar.len() as f64,
        };
    }
    let mut clamped = false;
    for m in &mut means {
        let c = m.clamp(-halfwidth, halfwidth);
        if c != *m {
            clamped = true;
            *m = c;
        }
    }
    MeanUpdate { means, clamped }
}

fn update_assignment_on(ybar: &[f64], mu: &[f64]) -> Vec<usize> {
    ybar.iter()
        .map(|&y| {
            let mut best = 0;
            let mut best_d = (y - mu[0]) * (y - mu[0]);
            for (k, &m) in mu.iter().enumerate().skip(1) {
                let d = (y - m) * (y - m);
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Group means minimizing `Q(g, .)` inside the default parameter box.
///
/// An empty group is reseeded to the unit mean with the largest squared
/// distance to its own group's center.
pub fn update_means(data: &PanelData, g: &GroupAssignment, num_groups: usize) -> Result<GroupMeans> {
    if g.len() != data.n() {
        return Err(Error::Dimension("assignment length differs from N".into()));
    }
    if g.labels().iter().any(|&l| l >= num_groups) {
        return Err(Error::Dimension("label outside 0..G".into()));
    }
    let ybar = unit_means(data);
    let h = default_halfwidth(&ybar);
    Ok(GroupMeans(update_means_on(&ybar, g.labels(), num_groups, h).means))
}

/// Nearest-mean assignment; ties go to the lowest label.
pub fn update_assignment(data: &PanelData, mu: &GroupMeans) -> GroupAssignment {
    GroupAssignment(update_assignment_on(&unit_means(data), mu.as_slice()))
}

/// Precomputed sufficient statistics for repeated Lloyd runs on one panel.
struct Prepared {
    ybar: Vec<f64>,
    within: f64,
    halfwidth: f64,
}

impl Prepared {
    fn new(data: &PanelData, opts: &FitOptions) -> Self {
        let ybar = unit_means(data);
        let within = within_from_means(data, &ybar);
        let halfwidth = opts.parameter_box_halfwidth.unwrap_or_else(|| default_halfwidth(&ybar));
        Self {
            ybar,
            within,
            halfwidth,
        }
    }

    fn q(&self, g: &[usize], mu: &[f64]) -> f64 {
        let s: f64 = self
            .ybar
            .iter()
            .zip(g)
            .map(|(&y, &gi)| (y - mu[gi]) * (y - mu[gi]))
            .sum();
        self.within + s / self.ybar.len() as f64
    }

    fn lloyd(&self, init: Vec<usize>, num_groups: usize, max_iter: usize) -> EstimateResult {
        let mut g = init;
        let mut mu: Vec<f64>;
        let mut clamped;
        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        loop {
            iterations += 1;
            let upd = update_means_on(&self.ybar, &g, num_groups, self.halfwidth);
            mu = upd.means;
            clamped = upd.clamped;
            let q_mu = self.q(&g, &mu);
            debug_assert!(trace.last().is_none_or(|&p: &f64| q_mu <= p + 1e-12 * p.abs()));
            trace.push(q_mu);
            let next = update_assignment_on(&self.ybar, &mu);
            let q_g = self.q(&next, &mu);
            debug_assert!(q_g <= q_mu);
            trace.push(q_g);
            if next == g {
                converged = true;
                break;
            }
            g = next;
            if iterations >= max_iter {
                // Means for the final assignment keep (g, mu) consistent.
                let upd = update_means_on(&self.ybar, &g, num_groups, self.halfwidth);
                mu = upd.means;
                clamped = upd.clamped;
                trace.push(self.q(&g, &mu));
                break;
            }
        }
        let objective = self.q(&g, &mu);
        EstimateResult {
            mu_hat: GroupMeans(mu),
            g_hat: GroupAssignment(g),
            objective,
            restarts_run: 1,
            iterations_total: iterations,
            best_restart_index: 0,
            converged,
            box_active: clamped,
            trace,
        }
    }

    fn initial_assignment(&self, strategy: InitStrategy, num_groups: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        match strategy {
            InitStrategy::RandomAssignment | InitStrategy::Mixed => {
                (0..self.ybar.len()).map(|_| rng.random_range(0..num_groups)).collect()
            }
            InitStrategy::SpreadSeeding => {
                let n = self.ybar.len();
                let mut centers = vec![self.ybar[rng.random_range(0..n)]];
                let mut nearest: Vec<f64> = self.ybar.iter().map(|y| (y - centers[0]).powi(2)).collect();
                while centers.len() < num_groups {
                    let (far, _) = nearest
                        .iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
                    let c = self.ybar[far];
                    centers.push(c);
                    for (d, y) in nearest.iter_mut().zip(&self.ybar) {
                        *d = d.min((y - c).powi(2));
                    }
                }
                update_assignment_on(&self.ybar, &centers)
            }
        }
    }
}

/// Alternates mean and assignment updates from `g_init` until the assignment
/// is a fixed point or the iteration cap is hit (`converged == false`).
pub fn lloyd(data: &PanelData, g_init: &GroupAssignment, num_groups: usize, opts: &FitOptions) -> Result<EstimateResult> {
    opts.validate()?;
    if g_init.len() != data.n() {
        return Err(Error::Dimension("initial assignment length differs from N".into()));
    }
    if g_init.labels().iter().any(|&l| l >= num_groups) {
        return Err(Error::Dimension("initial label outside 0..G".into()));
    }
    let prep = Prepared::new(data, opts);
    Ok(prep.lloyd(g_init.labels().to_vec(), num_groups, opts.max_iterations_per_restart))
}

/// Multi-start Lloyd estimate: the run with the smallest objective wins,
/// ties going to the lowest restart index. Restarts run in parallel; the
/// result is identical to sequential execution.
pub fn estimate(data: &PanelData, num_groups: usize, opts: &FitOptions, seed: u64) -> Result<EstimateResult> {
    opts.validate()?;
    if num_groups == 0 {
        return Err(Error::Config("number of groups must be >= 1".into()));
    }
    let prep = Prepared::new(data, opts);
    let runs: Vec<EstimateResult> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let strategy = match opts.init_strategy {
                InitStrategy::Mixed if r % 2 == 0 => InitStrategy::SpreadSeeding,
                InitStrategy::Mixed => InitStrategy::RandomAssignment,
                s => s,
            };
            let init = prep.initial_assignment(strategy, num_groups, &mut rng);
            prep.lloyd(init, num_groups, opts.max_iterations_per_restart)
        })
        .collect();
    let iterations_total = runs.iter().map(|r| r.iterations_total).sum();
    let (best_index, _) = runs
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, r)| if r.objective < acc.1 { (i, r.objective) } else { acc });
    let mut best = runs.into_iter().nth(best_index).expect("restarts >= 1");
    best.restarts_run = opts.restarts;
    best.iterations_total = iterations_total;
    best.best_restart_index = best_index;
    Ok(best)
}

/// Largest `G^N` the enumeration oracle accepts.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

fn exact_result(prep: &Prepared, g: Vec<usize>, num_groups: usize) -> EstimateResult {
    let upd = update_means_on(&prep.ybar, &g, num_groups, f64::INFINITY);
    let objective = prep.q(&g, &upd.means);
    EstimateResult {
        mu_hat: GroupMeans(upd.means),
        g_hat: GroupAssignment(g),
        objective,
        restarts_run: 0,
        iterations_total: 0,
        best_restart_index: 0,
        converged: true,
        box_active: false,
        trace: vec![objective],
    }
}

/// Global minimum of `Q` by enumerating every assignment in `{0..G}^N`.
pub fn exact_global_enumeration(data: &PanelData, num_groups: usize) -> Result<EstimateResult> {
    if num_groups == 0 {
        return Err(Error::Config("number of groups must be >= 1".into()));
    }
    let n = data.n();
    let size = (num_groups as u64).checked_pow(n as u32).filter(|&s| s <= ENUMERATION_LIMIT);
    let Some(size) = size else {
        return Err(Error::TooLarge(format!(
            "{num_groups}^{n} assignments exceeds the enumeration limit {ENUMERATION_LIMIT}"
        )));
    };
    let prep = Prepared::new(data, &FitOptions::default());
    let mut labels = vec![0usize; n];
    let mut sums = vec![0.0; num_groups];
    let mut counts = vec![0usize; num_groups];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for code in 0..size {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = (c % num_groups as u64) as usize;
            c /= num_groups as u64;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|k| *k = 0);
        for (&y, &l) in prep.ybar.iter().zip(&labels) {
            sums[l] += y;
            counts[l] += 1;
        }
        let cost: f64 = prep
            .ybar
            .iter()
            .zip(&labels)
            .map(|(&y, &l)| (y - sums[l] / counts[l] as f64).powi(2))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, labels.clone()));
        }
    }
    let (_, g) = best.expect("at least one assignment");
    Ok(exact_result(&prep, g, num_groups))
}

/// Global minimum of `Q` by dynamic programming over contiguous blocks of
/// the sorted unit means, `O(N^2 G)` time and `O(N G)` memory.
pub fn exact_global_dp(data: &PanelData, num_groups: usize) -> Result<EstimateResult> {
    if num_groups == 0 {
        return Err(Error::Config("number of groups must be >= 1".into()));
    }
    let prep = Prepared::new(data, &FitOptions::default());
    let n = prep.ybar.len();
    let order: Vec<usize> = (0..n).sorted_by(|&a, &b| prep.ybar[a].total_cmp(&prep.ybar[b])).collect();
    let x: Vec<f64> = order.iter().map(|&i| prep.ybar[i]).collect();
    let blocks = num_groups.min(n);

    // cost[k][b]: best cost of x[0..b] in k+1 blocks; split[k][b]: start of the last block.
    let mut cost = vec![vec![f64::INFINITY; n + 1]; blocks];
    let mut split = vec![vec![0usize; n + 1]; blocks];
    for b in 1..=n {
        cost[0][b] = interval_sse(&x[..b]);
    }
    for k in 1..blocks {
        for b in (k + 1)..=n {
            // Last block x[a..b]; running mean/SSE extended leftwards (Welford).
            let mut mean = 0.0;
            let mut sse = 0.0;
            let mut count = 0.0;
            let mut best = (f64::INFINITY, b - 1);
            for a in (k..b).rev() {
                count += 1.0;
                let delta = x[a] - mean;
                mean += delta / count;
                sse += delta * (x[a] - mean);
                let total = cost[k - 1][a] + sse;
                if total < best.0 {
                    best = (total, a);
                }
            }
            cost[k][b] = best.0;
            split[k][b] = best.1;
        }
    }
    let mut sorted_labels = vec![0usize; n];
    let mut end = n;
    for k in (0..blocks).rev() {
        let start = if k == 0 { 0 } else { split[k][end] };
        for l in &mut sorted_labels[start..end] {
            *l = k;
        }
        end = start;
    }
    let mut g = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        g[i] = sorted_labels[pos];
    }
    Ok(exact_result(&prep, g, num_groups))
}

fn interval_sse(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum()
}
