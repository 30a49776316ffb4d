//! The nontrivial exact solution: h follows the heat flow while the
//! velocity u = -mu grad(ln h) stays purely compressible (curl-free).
//!
//! ```bash
//! cargo run --release --example exact_solution
//! ```

use evlab::grid::{Grid, RealField};
use evlab::models::{curl_l2, effective_rest_state, energy, Params};
use evlab::propagators::{evolve_primitive, heat_semigroup, Scheme, StepperConfig};

fn main() -> evlab::Result<()> {
    let grid = Grid::uniform(1, 128)?;
    let params = Params::constrained(0.1, 1.0)?;
    let h0 = RealField::from_fn(grid, "depth", |x| 1.0 + 0.5 * x[0].cos())?;
    let state0 = effective_rest_state(&h0, &params)?;
    println!(
        "initial depth in [{:.3}, {:.3}], |u|_max = {:.4}",
        h0.min(),
        h0.linf(),
        state0.u[0].linf()
    );

    let cfg = StepperConfig::new(5e-4, 1.0, Scheme::Etdrk2, 200)?;
    let traj = evolve_primitive(&state0, &params, &cfg)?;

    println!(
        "{:>6} {:>14} {:>14} {:>12}",
        "t", "|h-heat|_L2", "|curl u|_L2", "energy"
    );
    for ((t, state), row) in traj.times.iter().zip(&traj.states).zip(&traj.diagnostics) {
        let exact = heat_semigroup(&h0, *t, params.mu)?;
        let dev = state.h.sub(&exact)?.l2();
        let curl = curl_l2(&state.u)?;
        println!("{t:>6.2} {dev:>14.3e} {curl:>14.3e} {:>12.6e}", row.energy);
    }
    let final_energy = energy(traj.final_state(), &params)?;
    println!(
        "final energy {final_energy:.6e}; termination {:?}",
        traj.termination
    );
    Ok(())
}
