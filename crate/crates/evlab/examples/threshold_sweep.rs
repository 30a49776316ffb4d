//! Momentum-amplitude sweep: where the fixed-point iteration stops
//! contracting, and how the threshold moves with the initial depth minimum.
//!
//! ```bash
//! cargo run --release --example threshold_sweep
//! ```

use evlab::grid::{Grid, RealField};
use evlab::models::Params;
use evlab::picard::threshold_sweep;
use evlab::propagators::{Scheme, StepperConfig};

fn main() -> evlab::Result<()> {
    let grid = Grid::uniform(1, 128)?;
    let params = Params::constrained(0.1, 1.0)?;
    let families: Vec<(String, RealField)> = [0.3, 0.6, 0.8]
        .iter()
        .map(|&a| {
            Ok((
                format!("a_q={a}"),
                RealField::from_fn(grid, "q", move |x| a * x[0].cos())?,
            ))
        })
        .collect::<evlab::Result<_>>()?;
    // Momentum direction aligned with the depth minimum (the hard case).
    let direction = vec![RealField::from_fn(grid, "m", |x| x[0].cos())?];
    let amplitudes: Vec<f64> = (0..9).map(|i| 0.05 * 1.5f64.powi(i)).collect();
    let cfg = StepperConfig::new(0.01, 1.0, Scheme::Etdrk2, 1)?;

    let sweeps = threshold_sweep(&families, &direction, &amplitudes, &params, &cfg, 1e-7, 12)?;
    for fam in &sweeps {
        println!(
            "\nfamily {} (min h0 = {:.2}, ||q0|| = {:.3})",
            fam.label, fam.min_h0, fam.q0_norm
        );
        println!(
            "{:>12} {:>12} {:>6} {:>10} {:>10}",
            "amplitude", "outcome", "iters", "max ratio", "min h"
        );
        for row in &fam.rows {
            println!(
                "{:>12.4} {:>12} {:>6} {:>10} {:>10.3}",
                row.amplitude,
                format!("{:?}", row.outcome).to_lowercase(),
                row.iterations,
                row.max_ratio.map(|r| format!("{r:.3}")).unwrap_or_default(),
                row.min_depth,
            );
        }
        println!(
            "bracket: largest converged {:?}, smallest failed {:?}",
            fam.largest_converged, fam.smallest_failed
        );
    }
    Ok(())
}
