//! Energy bookkeeping along a seeded small-data run: the discrete energy
//! never increases, mass is conserved to machine precision, and the drop is
//! compared against the integrated viscous dissipation.
//!
//! ```bash
//! cargo run --release --example energy_budget
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use evlab::cli::random_band_field;
use evlab::grid::Grid;
use evlab::littlewood_paley::trapezoid;
use evlab::models::{viscous_dissipation, Params, PrimitiveState};
use evlab::propagators::{evolve_primitive, Scheme, StepperConfig};

fn main() -> evlab::Result<()> {
    let grid = Grid::uniform(1, 128)?;
    let params = Params::constrained(0.1, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let q0 = random_band_field(grid, 1, 4, 0.2, &mut rng, "q")?;
    let u0 = vec![random_band_field(grid, 1, 4, 0.1, &mut rng, "u")?];
    let state0 = PrimitiveState::new(q0.map("h", |v| 1.0 + v), u0)?;

    let cfg = StepperConfig::new(5e-4, 0.5, Scheme::Etdrk2, 100)?;
    let traj = evolve_primitive(&state0, &params, &cfg)?;

    println!(
        "{:>6} {:>14} {:>18} {:>10}",
        "t", "energy", "mass drift", "min h"
    );
    let mass0 = traj.diagnostics[0].mass;
    for row in &traj.diagnostics {
        println!(
            "{:>6.3} {:>14.8e} {:>18.3e} {:>10.4}",
            row.t,
            row.energy,
            row.mass - mass0,
            row.min_h
        );
    }

    let drop = traj.diagnostics[0].energy - traj.diagnostics.last().unwrap().energy;
    let dissip: Vec<f64> = traj
        .states
        .iter()
        .map(|s| viscous_dissipation(s, &params))
        .collect::<evlab::Result<_>>()?;
    let dt_row = traj.times[1] - traj.times[0];
    let integral = trapezoid(&dissip, dt_row);
    println!("\nenergy drop        {drop:.6e}");
    println!("int mu h |Du|^2 dt {integral:.6e} (viscous part of the budget)");
    println!("max CFL number     {:.3}", traj.max_cfl);
    Ok(())
}
