//! Label alignment between estimated and true groups, and error metrics.

use itertools::Itertools;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::GroupAssignment;

/// Largest `G` accepted by the `G!` enumeration.
pub const MAX_ALIGN_GROUPS: usize = 10;

/// Bijection from true group `g` to estimated label `map[g]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupPermutation(pub Vec<usize>);

impl GroupPermutation {
    pub fn identity(g: usize) -> Self {
        Self((0..g).collect())
    }

    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || std::mem::replace(&mut seen[m], true) {
                return Err(Error::Domain(format!("{map:?} is not a permutation")));
            }
        }
        Ok(Self(map))
    }

    pub fn apply(&self, g: usize) -> usize {
        self.0[g]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (g, &h) in self.0.iter().enumerate() {
            inv[h] = g;
        }
        Self(inv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    pub perm: GroupPermutation,
    pub max_mu_error: f64,
    pub per_group_mu_error: Vec<f64>,
    pub misclassified_total: usize,
    pub misclassified_in_i: usize,
    pub misclassified_in_ic: usize,
}

fn max_error(mu_hat: &[f64], mu0: &[f64], map: &[usize]) -> f64 {
    mu0.iter()
        .enumerate()
        .map(|(g, m)| (mu_hat[map[g]] - m).abs())
        .fold(0.0, f64::max)
}

/// Permutation minimizing `max_g |mu_hat[pi(g)] - mu0[g]|` over all `G!`
/// candidates; ties go to the lexicographically smallest map.
pub fn best_permutation(mu_hat: &[f64], mu0: &[f64]) -> Result<GroupPermutation> {
    let g = mu0.len();
    if mu_hat.len() != g {
        return Err(Error::Dimension(format!(
            "{} estimated means for {g} true groups",
            mu_hat.len()
        )));
    }
    if g > MAX_ALIGN_GROUPS {
        return Err(Error::TooLarge(format!(
            "alignment enumerates G! permutations; G = {g} exceeds {MAX_ALIGN_GROUPS}"
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for map in (0..g).permutations(g) {
        let err = max_error(mu_hat, mu0, &map);
        if best.as_ref().is_none_or(|(b, _)| err < *b) {
            best = Some((err, map));
        }
    }
    Ok(GroupPermutation(best.map(|(_, m)| m).unwrap_or_default()))
}

/// Counts units with `g_hat_i != pi(g0_i)`, split by membership in `i_set`.
pub fn classification_errors(
    g_hat: &GroupAssignment,
    g0: &GroupAssignment,
    perm: &GroupPermutation,
    i_set: &[usize],
) -> Result<(usize, usize, usize)> {
    if g_hat.len() != g0.len() {
        return Err(Error::Dimension("assignments differ in length".into()));
    }
    let mut in_i = vec![false; g0.len()];
    for &i in i_set {
        in_i[i] = true;
    }
    let (mut total, mut mis_i) = (0, 0);
    for (i, (&gh, &gt)) in g_hat.labels().iter().zip(g0.labels()).enumerate() {
        if gh != perm.apply(gt) {
            total += 1;
            if in_i[i] {
                mis_i += 1;
            }
        }
    }
    Ok((total, mis_i, total - mis_i))
}

/// `sqrt(NT) (mu_hat[pi(g)] - mu0[g])` per true group.
pub fn scaled_mu_errors(mu_hat: &[f64], mu0: &[f64], perm: &GroupPermutation, n: usize, t: usize) -> Vec<f64> {
    let root = ((n * t) as f64).sqrt();
    mu0.iter()
        .enumerate()
        .map(|(g, m)| root * (mu_hat[perm.apply(g)] - m))
        .collect()
}

/// Full alignment of an estimate against the truth.
pub fn align(
    mu_hat: &[f64],
    g_hat: &GroupAssignment,
    mu0: &[f64],
    g0: &GroupAssignment,
    i_set: &[usize],
) -> Result<AlignmentReport> {
    let perm = best_permutation(mu_hat, mu0)?;
    let per_group_mu_error: Vec<f64> = mu0
        .iter()
        .enumerate()
        .map(|(g, m)| (mu_hat[perm.apply(g)] - m).abs())
        .collect();
    let (misclassified_total, misclassified_in_i, misclassified_in_ic) =
        classification_errors(g_hat, g0, &perm, i_set)?;
    Ok(AlignmentReport {
        max_mu_error: per_group_mu_error.iter().copied().fold(0.0, f64::max),
        per_group_mu_error,
        perm,
        misclassified_total,
        misclassified_in_i,
        misclassified_in_ic,
    })
}
