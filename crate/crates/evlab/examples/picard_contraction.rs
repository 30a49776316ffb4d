//! The constructive fixed-point iteration on small-momentum data: per-iterate
//! working norms, successive differences, contraction ratios, and the
//! distance between the fixed point and the time stepper.
//!
//! ```bash
//! cargo run --release --example picard_contraction
//! ```

use evlab::grid::{Grid, RealField};
use evlab::models::Params;
use evlab::picard::run_picard;
use evlab::propagators::{Scheme, StepperConfig};

fn main() -> evlab::Result<()> {
    let grid = Grid::uniform(1, 128)?;
    let params = Params::constrained(0.1, 1.0)?;
    // Large depth variation, small transformed momentum.
    let q0 = RealField::from_fn(grid, "q", |x| 0.6 * x[0].cos())?;
    let m0 = vec![RealField::from_fn(grid, "m", |x| 0.05 * x[0].sin())?];

    let cfg = StepperConfig::new(0.01, 1.0, Scheme::Etdrk2, 1)?;
    let result = run_picard(&q0, &m0, &params, &cfg, 1e-10, 12)?;

    println!(
        "{:>4} {:>14} {:>14} {:>10}",
        "n", "|barred_n|", "delta_n", "ratio"
    );
    for row in &result.trace.rows {
        println!(
            "{:>4} {:>14.6e} {:>14} {:>10}",
            row.iterate,
            row.barred.total,
            row.delta.map(|d| format!("{d:.6e}")).unwrap_or_default(),
            row.ratio.map(|r| format!("{r:.4}")).unwrap_or_default(),
        );
    }
    println!("\noutcome            {:?}", result.trace.outcome);
    println!("min depth along run {:.4}", result.trace.min_depth);
    if let Some(res) = result.trace.residual_vs_stepper {
        println!("fixed point vs stepper: sup_t distance {res:.3e}");
    }
    Ok(())
}
