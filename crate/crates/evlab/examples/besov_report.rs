//! Dyadic block decomposition and Besov norms of a field, with the
//! per-block breakdown printed and the report serialized as JSON.
//!
//! ```bash
//! cargo run --release --example besov_report
//! ```

use evlab::grid::{Grid, RealField};
use evlab::littlewood_paley::{BesovSpec, DyadicMultiplier, Exponent};

fn main() -> evlab::Result<()> {
    let grid = Grid::uniform(1, 256)?;
    let mult = DyadicMultiplier::build(grid)?;
    let (lo, hi) = mult.block_range();
    println!("dyadic blocks l = {lo} ..= {hi} on {}", grid.id());

    // Content at |k| = 2, 8, and 40 lands in well-separated blocks.
    let u = RealField::from_fn(grid, "u", |x| {
        (2.0 * x[0]).cos() + 0.5 * (8.0 * x[0]).sin() + 0.1 * (40.0 * x[0]).cos()
    })?;

    for spec in [
        BesovSpec::l2_summed(0.5),
        BesovSpec::l2_summed(2.5),
        BesovSpec::new(0.5, Exponent::Finite(2.0), Exponent::Infinity)?,
    ] {
        let report = mult.besov_norm(&u, spec)?;
        println!("\n{}  aggregate = {:.6}", spec.tag(), report.aggregate);
        for b in report.blocks.iter().filter(|b| b.value > 1e-14) {
            println!("  l = {:>3}  2^(ls) |block|_L2 = {:.6}", b.l, b.value);
        }
    }

    let json = serde_json::to_string_pretty(&mult.besov_norm(&u, BesovSpec::l2_summed(0.5))?)
        .expect("serializable");
    println!("\nJSON report:\n{json}");
    Ok(())
}
