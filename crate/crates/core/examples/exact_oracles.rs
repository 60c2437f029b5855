// Compare multi-start Lloyd with the two exact global optima: brute-force
// enumeration and the sorted-means dynamic program.

use panel_kmeans::dgp::{generate_panel, DgpConfig, ErrorLaw, SigmaSchedule};
use panel_kmeans::estimator::{estimate, exact_global_dp, exact_global_enumeration, FitOptions};
use panel_kmeans::Result;

fn run_example() -> Result<()> {
    let design = DgpConfig {
        num_groups: 3,
        mu0: vec![-1.0, 0.0, 1.0],
        group_proportions: vec![1.0 / 3.0; 3],
        sigma_schedule: SigmaSchedule::Constant { sigma: 1.5 },
        error_law: ErrorLaw::CenteredScaledChiSquared { dof: 1 },
        n: 8,
        t: 4,
    };
    let panel = generate_panel(&design, 3)?;
    let lloyd = estimate(&panel, 3, &FitOptions { restarts: 50, ..FitOptions::default() }, 4)?;
    let brute = exact_global_enumeration(&panel, 3)?;
    let dp = exact_global_dp(&panel, 3)?;
    println!("lloyd       Q = {:.15}", lloyd.objective);
    println!("enumeration Q = {:.15}", brute.objective);
    println!("dp          Q = {:.15}", dp.objective);
    assert!((dp.objective - brute.objective).abs() <= 1e-12 * brute.objective);

    // The DP scales to sizes where enumeration is impossible.
    let big = generate_panel(&design.with_size(2000, 4), 5)?;
    let dp = exact_global_dp(&big, 3)?;
    let lloyd = estimate(&big, 3, &FitOptions::default(), 6)?;
    println!("N = 2000: dp Q = {:.12}, lloyd Q = {:.12}", dp.objective, lloyd.objective);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
