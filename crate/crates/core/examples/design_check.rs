// Design diagnostics: the noise threshold separating uniformly classified
// units, the misclassification budget and the asymptotic sequence value.

use panel_kmeans::dgp::{design_diagnostics, DgpConfig, ErrorLaw, SigmaSchedule};
use panel_kmeans::Result;

fn run_example() -> Result<()> {
    let quiet = DgpConfig {
        num_groups: 2,
        mu0: vec![-1.0, 1.0],
        group_proportions: vec![0.5, 0.5],
        sigma_schedule: SigmaSchedule::Constant { sigma: 0.01 },
        error_law: ErrorLaw::StandardNormal,
        n: 100,
        t: 400,
    };
    let d = design_diagnostics(&quiet, quiet.min_gap())?;
    println!(
        "quiet design: threshold {:.6}, #I = {}, #Ic = {}, budget {}",
        d.sigma_threshold,
        d.i_set.len(),
        d.ic_set.len(),
        d.eq3_lhs
    );

    let tail = DgpConfig {
        sigma_schedule: SigmaSchedule::Diverging { base: 1.0, divergent_count: 10, scale: 1.0 },
        n: 10_000,
        t: 10,
        ..quiet
    };
    let d = design_diagnostics(&tail, tail.min_gap())?;
    println!(
        "diverging tail: threshold {:.6}, #Ic = {} (budget {:.4}), nominal tail {} units (budget {:.4})",
        d.sigma_threshold,
        d.ic_set.len(),
        d.eq3_lhs,
        d.nominal_ic_set.len(),
        d.eq3_lhs_nominal
    );
    println!("asymptotic sequence value {:.4}", d.asymptotic_seq_value);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
