//! Smoothing of the heat flow measured in time-integrated block norms: the
//! flow gains two derivatives, with a constant independent of the data and
//! of the resolution.
//!
//! ```bash
//! cargo run --release --example heat_smoothing
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use evlab::cli::random_band_field;
use evlab::grid::Grid;
use evlab::littlewood_paley::{trapezoid, BesovSpec, DyadicMultiplier};
use evlab::propagators::damped_semigroup_spectral;

#[allow(clippy::needless_range_loop)]
fn main() -> evlab::Result<()> {
    let mu = 0.1;
    let s = 0.5;
    let steps = 64usize;
    let dt = 1.0 / steps as f64;

    for n in [64usize, 128] {
        let grid = Grid::uniform(1, n)?;
        let mult = DyadicMultiplier::build(grid)?;
        let blocks: Vec<i32> = mult.blocks().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let u0 = random_band_field(grid, 1, (n / 4 - 1) as i64, 1.0, &mut rng, "u0")?;
            let denom = mult.besov_norm(&u0, BesovSpec::l2_summed(s))?.aggregate;
            if denom == 0.0 {
                continue;
            }
            let u0_spec = u0.to_spectral()?;
            // Per-block time-L1 at regularity s + 2; the flow is exact per mode.
            let mut per_block = vec![vec![0.0; steps + 1]; blocks.len()];
            for j in 0..=steps {
                let t = j as f64 * dt;
                let ut = damped_semigroup_spectral(&u0_spec, t, mu, 0.0);
                let table = mult.block_l2_table(std::slice::from_ref(&ut))?;
                for (b, v) in table.iter().enumerate() {
                    per_block[b][j] = *v;
                }
            }
            let mut smooth_l1 = 0.0;
            for (b, &l) in blocks.iter().enumerate() {
                smooth_l1 += 2f64.powf(l as f64 * (s + 2.0)) * trapezoid(&per_block[b], dt);
            }
            worst = worst.max(smooth_l1 / denom);
        }
        println!("n = {n:>4}: fitted smoothing constant over 100 draws: {worst:.4}");
    }
    println!("(stability of the constant across n is the resolution-independence check)");
    Ok(())
}
