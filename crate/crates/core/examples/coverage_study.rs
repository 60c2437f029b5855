// A small Monte Carlo study: root-NT rate regression, interval coverage
// and moments of the scaled errors.

use panel_kmeans::dgp::{DgpConfig, ErrorLaw, SigmaSchedule};
use panel_kmeans::estimator::FitOptions;
use panel_kmeans::montecarlo::{coverage, rate_regression, run_mc, sample_moments, McChecks, McConfig, MinGapSource};
use panel_kmeans::Result;

fn run_example() -> Result<()> {
    let cfg = McConfig {
        design: DgpConfig {
            num_groups: 2,
            mu0: vec![-1.0, 1.0],
            group_proportions: vec![0.5, 0.5],
            sigma_schedule: SigmaSchedule::Constant { sigma: 1.0 },
            error_law: ErrorLaw::StandardNormal,
            n: 0,
            t: 0,
        },
        grid: vec![(20, 20), (40, 40), (80, 80)],
        replications: 60,
        fit: FitOptions { restarts: 10, ..FitOptions::default() },
        alpha: 0.05,
        base_seed: 2024,
        mg_source: MinGapSource::Truth,
        retain_noise: false,
        checks: McChecks::default(),
    };
    let rows = run_mc(&cfg)?;
    for g in 0..2 {
        let (slope, se) = rate_regression(&rows, g)?;
        println!("group {}: log-rmse slope on log(NT) = {slope:.3} (se {se:.3})", g + 1);
    }
    for &(n, t) in &cfg.grid {
        let point: Vec<_> = rows.iter().filter(|r| (r.n, r.t) == (n, t)).cloned().collect();
        let scaled: Vec<f64> = point.iter().map(|r| r.groups[0].scaled_err).collect();
        let m = sample_moments(&scaled);
        println!(
            "N={n:>3} T={t:>3}: coverage {:.3}/{:.3}, scaled error mean {:+.3} var {:.3}",
            coverage(&point, 0)?,
            coverage(&point, 1)?,
            m.mean,
            m.variance
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
