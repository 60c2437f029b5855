//! Data-generating process for the grouped panel model
//! `y_it = mu0[g0_i] + sigma_i * v_it` and design-level diagnostics.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::GroupAssignment;
use crate::numeric::min_pairwise_gap;
use crate::rng::stream_rng;

/// Per-unit noise scale schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaSchedule {
    Constant {
        sigma: f64,
    },
    PerUnit {
        sigma: Vec<f64>,
    },
    /// `base` for every unit except the last `divergent_count`, which get
    /// `scale * sqrt(T)`.
    Diverging {
        base: f64,
        divergent_count: usize,
        scale: f64,
    },
}

impl SigmaSchedule {
    pub fn sigmas(&self, n: usize, t: usize) -> Vec<f64> {
        match self {
            SigmaSchedule::Constant { sigma } => vec![*sigma; n],
            SigmaSchedule::PerUnit { sigma } => sigma.clone(),
            SigmaSchedule::Diverging {
                base,
                divergent_count,
                scale,
            } => {
                let high = scale * (t as f64).sqrt();
                let cut = n.saturating_sub(*divergent_count);
                (0..n).map(|i| if i < cut { *base } else { high }).collect()
            }
        }
    }

    /// Units the schedule deliberately places above every classification
    /// threshold (the diverging tail); empty for the other variants.
    pub fn divergent_units(&self, n: usize) -> Vec<usize> {
        match self {
            SigmaSchedule::Diverging {
                divergent_count, ..
            } => (n.saturating_sub(*divergent_count)..n).collect(),
            _ => Vec::new(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let check = |s: f64, what: &str| {
            if s.is_finite() && s >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be finite and >= 0, got {s}")))
            }
        };
        match self {
            SigmaSchedule::Constant { sigma } => check(*sigma, "sigma"),
            SigmaSchedule::PerUnit { sigma } => {
                if sigma.len() != n {
                    return Err(Error::Config(format!(
                        "per-unit sigma has length {}, expected N = {n}",
                        sigma.len()
                    )));
                }
                sigma.iter().try_for_each(|&s| check(s, "sigma_i"))
            }
            SigmaSchedule::Diverging {
                base,
                divergent_count,
                scale,
            } => {
                check(*base, "base sigma")?;
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::Config(format!(
                        "divergent scale must be > 0, got {scale}"
                    )));
                }
                if *divergent_count > n {
                    return Err(Error::Config(format!(
                        "divergent_count {divergent_count} exceeds N = {n}"
                    )));
                }
                Ok(())
            }
        }
    }
}

fn default_poisson_lambda() -> f64 {
    1.0
}

fn default_chi_squared_dof() -> u32 {
    1
}

/// Standardized noise law: every variant has mean 0 and variance 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorLaw {
    #[default]
    StandardNormal,
    /// `(X - lambda) / sqrt(lambda)` with `X ~ Poisson(lambda)`.
    CenteredScaledPoisson {
        #[serde(default = "default_poisson_lambda")]
        lambda: f64,
    },
    /// `(X - k) / sqrt(2k)` with `X ~ ChiSquared(k)`.
    CenteredScaledChiSquared {
        #[serde(default = "default_chi_squared_dof")]
        dof: u32,
    },
    Rademacher,
}

impl ErrorLaw {
    pub fn sampler(&self) -> Result<NoiseSampler> {
        Ok(match *self {
            ErrorLaw::StandardNormal => NoiseSampler::Normal,
            ErrorLaw::CenteredScaledPoisson { lambda } => {
                let dist = Poisson::new(lambda).map_err(|e| {
                    Error::Config(format!("poisson lambda {lambda}: {e}"))
                })?;
                NoiseSampler::Poisson {
                    dist,
                    mean: lambda,
                    sd: lambda.sqrt(),
                }
            }
            ErrorLaw::CenteredScaledChiSquared { dof } => {
                if dof == 0 {
                    return Err(Error::Config("chi-squared dof must be >= 1".into()));
                }
                let k = dof as f64;
                let dist = ChiSquared::new(k)
                    .map_err(|e| Error::Config(format!("chi-squared dof {dof}: {e}")))?;
                NoiseSampler::ChiSquared {
                    dist,
                    mean: k,
                    sd: (2.0 * k).sqrt(),
                }
            }
            ErrorLaw::Rademacher => NoiseSampler::Rademacher,
        })
    }
}

/// Prepared sampler for one [`ErrorLaw`].
#[derive(Debug, Clone, Copy)]
pub enum NoiseSampler {
    Normal,
    Poisson {
        dist: Poisson<f64>,
        mean: f64,
        sd: f64,
    },
    ChiSquared {
        dist: ChiSquared<f64>,
        mean: f64,
        sd: f64,
    },
    Rademacher,
}

impl NoiseSampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSampler::Normal => rng.sample(StandardNormal),
            NoiseSampler::Poisson { dist, mean, sd } => (dist.sample(rng) - mean) / sd,
            NoiseSampler::ChiSquared { dist, mean, sd } => (dist.sample(rng) - mean) / sd,
            NoiseSampler::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Full description of a simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub num_groups: usize,
    pub mu0: Vec<f64>,
    pub group_proportions: Vec<f64>,
    pub sigma_schedule: SigmaSchedule,
    #[serde(default)]
    pub error_law: ErrorLaw,
    /// Number of units; a Monte Carlo grid overrides it.
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub t: usize,
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let g = self.num_groups;
        if g < 2 {
            return Err(Error::Config(format!("num_groups must be >= 2, got {g}")));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("N must be >= 2, got {}", self.n)));
        }
        if self.t < 1 {
            return Err(Error::Config("T must be >= 1".into()));
        }
        if self.mu0.len() != g || self.group_proportions.len() != g {
            return Err(Error::Config(format!(
                "mu0 and group_proportions must have length num_groups = {g}"
            )));
        }
        if self.mu0.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("mu0 entries must be finite".into()));
        }
        if self.group_proportions.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Config("group proportions must be strictly positive".into()));
        }
        let total: f64 = self.group_proportions.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "group proportions sum to {total}, expected 1"
            )));
        }
        if min_pairwise_gap(&self.mu0) <= 0.0 {
            return Err(Error::Config(
                "pairwise gap between true group means must be > 0".into(),
            ));
        }
        self.sigma_schedule.validate(self.n)
    }

    pub fn with_size(&self, n: usize, t: usize) -> DgpConfig {
        DgpConfig {
            n,
            t,
            ..self.clone()
        }
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.sigma_schedule.sigmas(self.n, self.t)
    }

    /// Quota assignment: the first `floor(N * sum_{h<=g} p_h)` units fill
    /// groups `0..=g`, so every group count is within one of `N * p_g`.
    pub fn true_assignment(&self) -> GroupAssignment {
        let n = self.n;
        let g = self.num_groups;
        let mut bounds = Vec::with_capacity(g);
        let mut cumulative = 0.0;
        for (k, p) in self.group_proportions.iter().enumerate() {
            cumulative += p;
            let b = if k + 1 == g {
                n
            } else {
                ((n as f64 * cumulative).floor() as usize).min(n)
            };
            bounds.push(b);
        }
        let mut labels = Vec::with_capacity(n);
        let mut group = 0;
        for i in 0..n {
            while i >= bounds[group] {
                group += 1;
            }
            labels.push(group);
        }
        GroupAssignment::from_labels(labels)
    }

    /// True minimal separation between group means.
    pub fn min_gap(&self) -> f64 {
        min_pairwise_gap(&self.mu0)
    }
}

/// Ground truth attached to a generated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub g0: GroupAssignment,
    pub mu0: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// An `N x T` balanced panel stored row-major by unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    n: usize,
    t: usize,
    y: Vec<f64>,
    pub truth: Option<Truth>,
}

impl PanelData {
    pub fn new(n: usize, t: usize, y: Vec<f64>) -> Result<Self> {
        if n == 0 || t == 0 {
            return Err(Error::Dimension(format!("empty panel ({n} x {t})")));
        }
        if y.len() != n * t {
            return Err(Error::Dimension(format!(
                "{} observations for a {n} x {t} panel",
                y.len()
            )));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite outcome at unit {}, time {}",
                pos / t + 1,
                pos % t + 1
            )));
        }
        Ok(Self {
            n,
            t,
            y,
            truth: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), t, rows.concat())
    }

    pub fn with_truth(mut self, truth: Truth) -> Result<Self> {
        if truth.g0.len() != self.n || truth.sigma.len() != self.n {
            return Err(Error::Dimension(
                "truth vectors must have one entry per unit".into(),
            ));
        }
        if truth.g0.labels().iter().any(|&g| g >= truth.mu0.len()) {
            return Err(Error::Dimension("true label outside mu0".into()));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.y[i * self.t..(i + 1) * self.t]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.y.chunks_exact(self.t)
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    /// Applies `f` to every outcome, keeping the truth block.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut out = Self::new(self.n, self.t, self.y.iter().map(|&v| f(v)).collect())?;
        out.truth = self.truth.clone();
        Ok(out)
    }
}

/// Generates a panel from `config`; a pure function of `(config, seed)`.
///
/// Unit `i` draws its noise from ChaCha8 stream `i` under key `seed`, so
/// panels of different sizes share their low-index draws.
pub fn generate_panel(config: &DgpConfig, seed: u64) -> Result<PanelData> {
    generate(config, seed, false).map(|(panel, _)| panel)
}

/// Like [`generate_panel`], also returning `T^{-1/2} sum_t v_it` per unit.
pub fn generate_panel_with_noise_sums(
    config: &DgpConfig,
    seed: u64,
) -> Result<(PanelData, Vec<f64>)> {
    generate(config, seed, true)
}

fn generate(config: &DgpConfig, seed: u64, keep_sums: bool) -> Result<(PanelData, Vec<f64>)> {
    config.validate()?;
    let sampler = config.error_law.sampler()?;
    let (n, t) = (config.n, config.t);
    let g0 = config.true_assignment();
    let sigma = config.sigmas();
    let root_t = (t as f64).sqrt();
    let mut y = Vec::with_capacity(n * t);
    let mut sums = Vec::with_capacity(if keep_sums { n } else { 0 });
    for (i, (&s_i, &g_i)) in sigma.iter().zip(g0.labels()).enumerate() {
        let mut rng: ChaCha8Rng = stream_rng(seed, i as u64);
        let level = config.mu0[g_i];
        let mut acc = 0.0;
        for _ in 0..t {
            let v = sampler.sample(&mut rng);
            acc += v;
            y.push(level + s_i * v);
        }
        if keep_sums {
            sums.push(acc / root_t);
        }
    }
    let panel = PanelData::new(n, t, y)?.with_truth(Truth {
        g0,
        mu0: config.mu0.clone(),
        sigma,
    })?;
    Ok((panel, sums))
}

/// Draws an `n x t` block of pure noise and returns `T^{-1/2} sum_t v_it` per unit.
pub fn noise_partial_sums(law: &ErrorLaw, n: usize, t: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = law.sampler()?;
    let root_t = (t as f64).sqrt();
    Ok((0..n)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            (0..t).map(|_| sampler.sample(&mut rng)).sum::<f64>() / root_t
        })
        .collect())
}

/// Noise bound `(M_G / 140) sqrt(T / log N)` below which a unit is
/// classified uniformly consistently.
pub fn sigma_threshold(min_gap: f64, n: usize, t: usize) -> Result<f64> {
    if !(min_gap > 0.0) || !min_gap.is_finite() {
        return Err(Error::Domain(format!(
            "group separation must be positive, got {min_gap}"
        )));
    }
    if n < 2 {
        return Err(Error::Domain(format!("log N must be positive, got N = {n}")));
    }
    if t < 1 {
        return Err(Error::Domain("T must be >= 1".into()));
    }
    Ok(min_gap / 140.0 * (t as f64 / (n as f64).ln()).sqrt())
}

/// Splits unit indices (0-based) into `{i : sigma_i <= threshold}` and its complement.
pub fn classify_units(sigma: &[f64], threshold: f64) -> (Vec<usize>, Vec<usize>) {
    (0..sigma.len()).partition(|&i| sigma[i] <= threshold)
}

/// Left-hand side of the misclassification budget,
/// `(#Ic / N) * max{ sqrt(NT), sqrt(N * mean_{Ic} sigma^2) }`; zero when `Ic` is empty.
pub fn misclassification_budget(sigma: &[f64], ic: &[usize], n: usize, t: usize) -> f64 {
    if ic.is_empty() {
        return 0.0;
    }
    let k = ic.len() as f64;
    let mean_sq = ic.iter().map(|&i| sigma[i] * sigma[i]).sum::<f64>() / k;
    let nf = n as f64;
    let spread = (nf * t as f64).sqrt().max((nf * mean_sq).sqrt());
    k / nf * spread
}

/// `(log T) sqrt(log N) / sqrt(T)`.
pub fn asymptotic_sequence_value(n: usize, t: usize) -> f64 {
    let tf = t as f64;
    tf.ln() * (n as f64).ln().sqrt() / tf.sqrt()
}

/// Design-level quantities for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignDiagnostics {
    pub min_gap_used: f64,
    pub sigma_threshold: f64,
    /// Units (0-based) with `sigma_i <= sigma_threshold`.
    pub i_set: Vec<usize>,
    pub ic_set: Vec<usize>,
    pub eq3_lhs: f64,
    /// Diverging-tail units of the schedule, regardless of the threshold.
    pub nominal_ic_set: Vec<usize>,
    /// Budget evaluated on `nominal_ic_set`.
    pub eq3_lhs_nominal: f64,
    pub avg_variance_over_t: f64,
    pub min_group_gap: f64,
    pub min_group_share: f64,
    pub asymptotic_seq_value: f64,
}

pub fn design_diagnostics(config: &DgpConfig, min_gap: f64) -> Result<DesignDiagnostics> {
    config.validate()?;
    let (n, t) = (config.n, config.t);
    let sigma = config.sigmas();
    let threshold = sigma_threshold(min_gap, n, t)?;
    let (i_set, ic_set) = classify_units(&sigma, threshold);
    let eq3_lhs = misclassification_budget(&sigma, &ic_set, n, t);
    let nominal_ic_set = config.sigma_schedule.divergent_units(n);
    let eq3_lhs_nominal = misclassification_budget(&sigma, &nominal_ic_set, n, t);
    let avg_variance_over_t = sigma.iter().map(|s| s * s).sum::<f64>() / n as f64 / t as f64;
    let counts = config.true_assignment().counts(config.num_groups);
    let min_group_share = counts.iter().copied().min().unwrap_or(0) as f64 / n as f64;
    Ok(DesignDiagnostics {
        min_gap_used: min_gap,
        sigma_threshold: threshold,
        i_set,
        ic_set,
        eq3_lhs,
        nominal_ic_set,
        eq3_lhs_nominal,
        avg_variance_over_t,
        min_group_gap: config.min_gap(),
        min_group_share,
        asymptotic_seq_value: asymptotic_sequence_value(n, t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_group(sigma: SigmaSchedule, law: ErrorLaw, n: usize, t: usize) -> DgpConfig {
        DgpConfig {
            num_groups: 2,
            mu0: vec![-1.0, 1.0],
            group_proportions: vec![0.5, 0.5],
            sigma_schedule: sigma,
            error_law: law,
            n,
            t,
        }
    }

    #[test]
    fn zero_noise_panel_is_the_group_means() {
        let cfg = two_group(SigmaSchedule::Constant { sigma: 0.0 }, ErrorLaw::Rademacher, 4, 2);
        let panel = generate_panel(&cfg, 99).unwrap();
        let rows: Vec<_> = panel.rows().map(<[f64]>::to_vec).collect();
        assert_eq!(rows, vec![vec![-1.0, -1.0], vec![-1.0, -1.0], vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(panel.truth.unwrap().g0.labels(), &[0, 0, 1, 1]);
    }

    #[test]
    fn rejects_coincident_means() {
        let mut cfg = two_group(SigmaSchedule::Constant { sigma: 1.0 }, ErrorLaw::StandardNormal, 4, 2);
        cfg.mu0 = vec![0.0, 0.0];
        let err = generate_panel(&cfg, 1).unwrap_err();
        assert!(err.to_string().contains("pairwise gap"), "{err}");
    }

    #[test]
    fn rejects_bad_proportions_and_sizes() {
        let base = two_group(SigmaSchedule::Constant { sigma: 1.0 }, ErrorLaw::StandardNormal, 4, 2);
        let mut c = base.clone();
        c.group_proportions = vec![0.5, 0.6];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.group_proportions = vec![1.0, 0.0];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.n = 1;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.sigma_schedule = SigmaSchedule::Diverging { base: 1.0, divergent_count: 5, scale: 1.0 };
        assert!(c.validate().is_err());
        let mut c = base;
        c.num_groups = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn large_gaussian_panel_has_unit_moments() {
        let (n, t) = (1000, 100);
        let cfg = two_group(SigmaSchedule::Constant { sigma: 1.0 }, ErrorLaw::StandardNormal, n, t);
        let panel = generate_panel(&cfg, 2024).unwrap();
        let mean = panel.values().iter().sum::<f64>() / (n * t) as f64;
        assert!(mean.abs() <= 3.0 / ((n * t) as f64).sqrt(), "grand mean {mean}");
        let avg_var = panel
            .rows()
            .map(|r| {
                let m = r.iter().sum::<f64>() / t as f64;
                r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (t - 1) as f64
            })
            .sum::<f64>()
            / n as f64;
        assert!((avg_var - 1.0).abs() < 0.02, "average within-unit variance {avg_var}");
    }

    #[test]
    fn generation_is_reproducible_and_prefix_stable() {
        let cfg = two_group(
            SigmaSchedule::Constant { sigma: 1.0 },
            ErrorLaw::CenteredScaledPoisson { lambda: 1.0 },
            10,
            6,
        );
        let a = generate_panel(&cfg, 5).unwrap();
        let b = generate_panel(&cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), generate_panel(&cfg, 6).unwrap().values());
        // A longer panel extends each unit's stream; the first 6 draws coincide.
        let longer = generate_panel(&cfg.with_size(10, 9), 5).unwrap();
        for i in 0..10 {
            assert_eq!(&longer.row(i)[..6], a.row(i));
        }
    }

    #[test]
    fn every_error_law_is_standardized() {
        let laws = [
            ErrorLaw::StandardNormal,
            ErrorLaw::CenteredScaledPoisson { lambda: 1.0 },
            ErrorLaw::CenteredScaledChiSquared { dof: 1 },
            ErrorLaw::Rademacher,
        ];
        for law in laws {
            let sampler = law.sampler().unwrap();
            let mut rng = stream_rng(3, 0);
            let xs: Vec<f64> = (0..1_000_000).map(|_| sampler.sample(&mut rng)).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            assert!(m.abs() <= 4e-3, "{law:?}: mean {m}");
            assert!((v - 1.0).abs() <= 0.02, "{law:?}: variance {v}");
        }
    }

    #[test]
    fn quota_counts_are_within_one() {
        for n in [2usize, 3, 7, 10, 101, 999] {
            let cfg = DgpConfig {
                num_groups: 3,
                mu0: vec![0.0, 1.0, 2.0],
                group_proportions: vec![0.2, 0.3, 0.5],
                sigma_schedule: SigmaSchedule::Constant { sigma: 1.0 },
                error_law: ErrorLaw::StandardNormal,
                n,
                t: 1,
            };
            let counts = cfg.true_assignment().counts(3);
            assert_eq!(counts.iter().sum::<usize>(), n);
            for (c, p) in counts.iter().zip(&cfg.group_proportions) {
                assert!((*c as f64 - n as f64 * p).abs() <= 1.0, "n={n}: {counts:?}");
            }
        }
    }

    #[test]
    fn diverging_schedule_targets_the_tail() {
        let s = SigmaSchedule::Diverging { base: 1.0, divergent_count: 2, scale: 0.5 };
        assert_eq!(s.sigmas(4, 16), vec![1.0, 1.0, 2.0, 2.0]);
        assert_eq!(s.divergent_units(4), vec![2, 3]);
    }

    #[test]
    fn threshold_values() {
        // Frozen from a direct high-precision evaluation of the formula.
        let a = sigma_threshold(140.0, 2, 100).unwrap();
        assert!((a - 12.011_224_087_864_498).abs() < 1e-12);
        let b = sigma_threshold(1.0, 100, 400).unwrap();
        assert!((b - 0.066_570_085_969_236_58).abs() < 1e-15);
        assert!(sigma_threshold(0.0, 100, 400).is_err());
        assert!(sigma_threshold(1.0, 1, 400).is_err());
    }

    #[test]
    fn classification_boundary_is_inclusive() {
        assert_eq!(classify_units(&[0.1, 0.2, 5.0], 1.0), (vec![0, 1], vec![2]));
        assert_eq!(classify_units(&[0.1, 0.2], 1.0).1, Vec::<usize>::new());
        let t = 0.734;
        assert_eq!(classify_units(&[t, t, t], t), (vec![0, 1, 2], vec![]));
    }

    #[test]
    fn budget_examples() {
        assert_eq!(misclassification_budget(&[1.0; 5], &[], 5, 10), 0.0);
        let mut sigma = vec![1.0; 100];
        sigma[99] = 10.0;
        assert!((misclassification_budget(&sigma, &[99], 100, 100) - 1.0).abs() < 1e-12);
        let mut sigma = vec![1.0; 10_000];
        for s in &mut sigma[9990..] {
            *s = 10f64.sqrt();
        }
        let ic: Vec<usize> = (9990..10_000).collect();
        let v = misclassification_budget(&sigma, &ic, 10_000, 10);
        assert!((v - 0.316_227_766_016_837_94).abs() < 1e-12, "{v}");
    }

    #[test]
    fn budget_is_monotone_in_ic_size() {
        let sigma = vec![3.0; 50];
        let mut last = 0.0;
        for k in 0..=50 {
            let ic: Vec<usize> = (0..k).collect();
            let v = misclassification_budget(&sigma, &ic, 50, 4);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn diagnostics_for_clean_design() {
        let cfg = two_group(SigmaSchedule::Constant { sigma: 0.001 }, ErrorLaw::StandardNormal, 100, 400);
        let d = design_diagnostics(&cfg, cfg.min_gap()).unwrap();
        assert!(d.ic_set.is_empty());
        assert_eq!(d.eq3_lhs, 0.0);
        assert_eq!(d.i_set.len(), 100);
        assert_eq!(d.min_group_gap, 2.0);
        assert_eq!(d.min_group_share, 0.5);
        assert!((d.avg_variance_over_t - 1e-6 / 400.0).abs() < 1e-18);
        let expected = 400f64.ln() * 100f64.ln().sqrt() / 20.0;
        assert!((d.asymptotic_seq_value - expected).abs() < 1e-15);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = two_group(
            SigmaSchedule::Diverging { base: 1.0, divergent_count: 3, scale: 1.0 },
            ErrorLaw::CenteredScaledChiSquared { dof: 2 },
            20,
            5,
        );
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<DgpConfig>(&text).unwrap(), cfg);
        let minimal: DgpConfig = serde_json::from_str(
            r#"{"num_groups":2,"mu0":[-1,1],"group_proportions":[0.5,0.5],
                "sigma_schedule":{"kind":"constant","sigma":1},
                "error_law":{"kind":"centered_scaled_poisson"},"n":10,"t":3}"#,
        )
        .unwrap();
        assert_eq!(minimal.error_law, ErrorLaw::CenteredScaledPoisson { lambda: 1.0 });
    }
}
