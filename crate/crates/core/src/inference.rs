//! Plug-in confidence intervals for the group means at the root-NT rate.
//!
//! The limiting variance of `sqrt(NT)(mu_hat_g - mu0_g)` is `delta_g / q_g`.
//! `q_g` is estimated by the estimated group share and `delta_g` by the
//! average within-unit sample variance over the units assigned to `g`
//! (errors are cross-sectionally independent, so the covariance term is 0).

use serde::Serialize;

use crate::dgp::PanelData;
use crate::error::{Error, Result};
use crate::estimator::{unit_means, EstimateResult, GroupAssignment};
use crate::numeric::{normal_quantile, CompensatedSum};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupInference {
    pub group: usize,
    pub mu_hat: f64,
    pub q_hat: f64,
    pub delta_hat: f64,
    pub std_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// `delta_hat == 0`: the interval collapses to the point estimate.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceResult {
    pub alpha: f64,
    pub groups: Vec<GroupInference>,
}

/// Within-unit sample variances `s_i^2` with divisor `T - 1`.
pub fn unit_variances(data: &PanelData) -> Result<Vec<f64>> {
    let t = data.t();
    if t < 2 {
        return Err(Error::Unsupported(format!(
            "within-unit variance needs T >= 2, got T = {t}"
        )));
    }
    let ybar = unit_means(data);
    Ok(data
        .rows()
        .zip(&ybar)
        .map(|(row, m)| {
            let ss: CompensatedSum = row.iter().map(|y| (y - m) * (y - m)).collect();
            ss.value() / (t - 1) as f64
        })
        .collect())
}

fn delta_from_variances(s2: &[f64], g_hat: &GroupAssignment, g: usize) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    let mut count = 0usize;
    for (v, &l) in s2.iter().zip(g_hat.labels()) {
        if l == g {
            acc.add(*v);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Domain(format!("group {} is empty", g + 1)));
    }
    Ok(acc.value() / count as f64)
}

/// `delta_hat_g = N_hat_g^{-1} sum_{i : g_hat_i = g} s_i^2`.
pub fn estimate_delta(data: &PanelData, g_hat: &GroupAssignment, g: usize) -> Result<f64> {
    if g_hat.len() != data.n() {
        return Err(Error::Dimension("assignment length differs from N".into()));
    }
    delta_from_variances(&unit_variances(data)?, g_hat, g)
}

/// Standard error `sqrt(delta / (q N T))`.
pub fn std_error(delta_hat: f64, q_hat: f64, n: usize, t: usize) -> f64 {
    (delta_hat / (q_hat * n as f64 * t as f64)).sqrt()
}

/// `mu_hat +- z_{1 - alpha/2} * std_error`; the flag is set when `delta_hat == 0`.
pub fn confidence_interval(
    mu_hat: f64,
    delta_hat: f64,
    q_hat: f64,
    n: usize,
    t: usize,
    alpha: f64,
) -> Result<(f64, f64, bool)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(delta_hat >= 0.0) || !(q_hat > 0.0) {
        return Err(Error::Domain(format!(
            "need delta_hat >= 0 and q_hat > 0, got {delta_hat}, {q_hat}"
        )));
    }
    let half = normal_quantile(1.0 - alpha / 2.0) * std_error(delta_hat, q_hat, n, t);
    Ok((mu_hat - half, mu_hat + half, delta_hat == 0.0))
}

/// Per-group inference for a fitted panel.
pub fn infer(data: &PanelData, est: &EstimateResult, alpha: f64) -> Result<InferenceResult> {
    let (n, t) = (data.n(), data.t());
    if est.g_hat.len() != n {
        return Err(Error::Dimension("estimate does not match panel".into()));
    }
    let s2 = unit_variances(data)?;
    let counts = est.g_hat.counts(est.mu_hat.len());
    let groups = est
        .mu_hat
        .as_slice()
        .iter()
        .enumerate()
        .map(|(g, &mu)| {
            let delta = delta_from_variances(&s2, &est.g_hat, g)?;
            let q = counts[g] as f64 / n as f64;
            let (lo, hi, degenerate) = confidence_interval(mu, delta, q, n, t, alpha)?;
            Ok(GroupInference {
                group: g,
                mu_hat: mu,
                q_hat: q,
                delta_hat: delta,
                std_error: std_error(delta, q, n, t),
                ci_lower: lo,
                ci_upper: hi,
                degenerate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InferenceResult { alpha, groups })
}
