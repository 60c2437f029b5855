// Simulate a two-group panel with a diverging tail of noisy units and
// write it as long-format CSV.

use panel_kmeans::dgp::{generate_panel, DgpConfig, ErrorLaw, SigmaSchedule};
use panel_kmeans::panel_csv::{read_panel, write_panel};
use panel_kmeans::Result;

fn run_example() -> Result<()> {
    let design = DgpConfig {
        num_groups: 2,
        mu0: vec![-1.0, 1.0],
        group_proportions: vec![0.5, 0.5],
        sigma_schedule: SigmaSchedule::Diverging { base: 1.0, divergent_count: 2, scale: 1.0 },
        error_law: ErrorLaw::CenteredScaledPoisson { lambda: 1.0 },
        n: 8,
        t: 5,
    };
    let panel = generate_panel(&design, 7)?;
    let mut csv = Vec::new();
    write_panel(&mut csv, &panel)?;
    let text = String::from_utf8(csv).expect("utf-8");
    for line in text.lines().take(6) {
        println!("{line}");
    }
    println!("... {} rows", text.lines().count() - 1);

    let back = read_panel(text.as_bytes())?;
    assert_eq!(back.panel.values(), panel.values());
    let sigma = &panel.truth.as_ref().expect("simulated").sigma;
    println!("sigma per unit: {sigma:?}");
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
