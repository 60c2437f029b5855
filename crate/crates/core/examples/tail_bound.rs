// Empirical frequency of `max_i |T^{-1/2} sum_t v_it| > 14 sqrt(log N)`
// against the `3 / N` bound, for several noise laws.

use panel_kmeans::dgp::ErrorLaw;
use panel_kmeans::montecarlo::tail_bound_check;
use panel_kmeans::Result;

fn run_example() -> Result<()> {
    let laws = [
        ErrorLaw::StandardNormal,
        ErrorLaw::CenteredScaledPoisson { lambda: 1.0 },
        ErrorLaw::CenteredScaledChiSquared { dof: 1 },
        ErrorLaw::Rademacher,
    ];
    for law in &laws {
        let c = tail_bound_check(500, 100, 20, law, 99)?;
        println!(
            "{law:?}: threshold {:.2}, largest max {:.2}, frequency {} <= bound {:.4}: {}",
            c.threshold,
            c.largest_max,
            c.empirical_freq,
            c.bound,
            c.holds()
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
