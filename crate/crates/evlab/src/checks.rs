//! A named, re-runnable verification suite.
//!
//! Each structural claim the solver relies on is bound to exactly one check
//! with a pass/fail verdict; the binding is recorded in [`CLAIM_BINDINGS`]
//! and enforced by a unit test. Checks are deterministic under a fixed seed,
//! share no state, and each builds its own grids and multipliers.
//!
//! Fitted-constant checks compare the constant across two grid resolutions
//! and pass when it is stable within 20 percent; the constants themselves
//! are reported, never pinned to a value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cli::random_band_field;
use crate::error::Result;
use crate::grid::{Grid, RealField};
use crate::littlewood_paley::{
    chi, phi, time_lp_of_besov, trapezoid, BesovSpec, DyadicMultiplier, Exponent,
};
use crate::models::{
    self, classical_momentum, effective_rest_state, energy, from_effective, pi_potential,
    pi_potential_quadrature, viscous_dissipation, MomentumState, Params, PrimitiveState,
    ViscosityForm,
};
use crate::picard::{
    linear_seed, picard_step, run_picard, threshold_sweep, working_norm, working_spec, Outcome,
};
use crate::propagators::{
    damped_semigroup, damped_semigroup_spectral, evolve_momentum, evolve_primitive, heat_semigroup,
    Scheme, StepperConfig, Termination,
};

/// Claim identifiers bound to the single check that verifies each.
pub const CLAIM_BINDINGS: &[(&str, &str)] = &[
    ("dyadic_annulus_support", "norm_toolbox"),
    ("partition_of_unity", "norm_toolbox"),
    ("besov_norm_definition", "norm_toolbox"),
    ("derivative_norm_equivalence", "norm_toolbox"),
    ("embedding_monotonicity", "norm_toolbox"),
    ("product_law_uniform", "norm_toolbox"),
    ("product_law_critical", "norm_toolbox"),
    ("composition_bound", "norm_toolbox"),
    ("chemin_lerner_minkowski", "norm_toolbox"),
    ("heat_smoothing", "norm_toolbox"),
    ("pressure_potential_stationary", "potential"),
    ("exact_solution_family", "exact_solution"),
    ("purely_compressible_curl_free", "exact_solution"),
    ("pressure_coupling_removed", "decoupling"),
    ("energy_inequality", "energy_decay"),
    ("mass_conservation", "energy_decay"),
    ("heat_minimum_principle", "maximum_principle"),
    ("vacuum_regime_guard", "maximum_principle"),
    ("momentum_damping_rate", "damping"),
    ("integrable_momentum_decay", "damping"),
    ("linear_seed_norm_bound", "linear_seed_bounds"),
    ("quadratic_source_smallness", "contraction"),
    ("cauchy_contraction", "contraction"),
    ("induction_bound", "contraction"),
    ("depth_lower_bound_persistence", "contraction"),
    ("uniqueness_by_contraction", "uniqueness"),
    ("smallness_threshold_bracket", "threshold"),
    ("threshold_depth_trend", "threshold"),
    ("large_density_no_smallness", "large_density"),
    ("classical_momentum_split", "large_density"),
];

/// Names of all checks, in execution order.
pub fn check_names() -> Vec<&'static str> {
    vec![
        "norm_toolbox",
        "potential",
        "exact_solution",
        "decoupling",
        "energy_decay",
        "maximum_principle",
        "damping",
        "linear_seed_bounds",
        "contraction",
        "uniqueness",
        "threshold",
        "large_density",
    ]
}

/// Claims covered by one check, from the registry.
pub fn claims_of(check: &str) -> Vec<&'static str> {
    CLAIM_BINDINGS
        .iter()
        .filter(|(_, c)| *c == check)
        .map(|(claim, _)| *claim)
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FittedConstant {
    pub label: String,
    pub resolution: String,
    pub value: f64,
}

/// Outcome of one named check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub claims: Vec<String>,
    pub verdict: bool,
    pub tolerance: String,
    pub samples: usize,
    pub seeds: Vec<u64>,
    pub fitted: Vec<FittedConstant>,
    pub details: Vec<String>,
}

impl CheckReport {
    fn new(name: &str, tolerance: &str, seed: u64) -> Self {
        CheckReport {
            name: name.to_string(),
            claims: claims_of(name).iter().map(|s| s.to_string()).collect(),
            verdict: true,
            tolerance: tolerance.to_string(),
            samples: 0,
            seeds: vec![seed],
            fitted: Vec::new(),
            details: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, detail: String) {
        self.verdict &= ok;
        self.details
            .push(format!("[{}] {detail}", if ok { "ok" } else { "FAIL" }));
    }

    fn note(&mut self, detail: String) {
        self.details.push(format!("[--] {detail}"));
    }

    fn fit(&mut self, label: &str, resolution: &str, value: f64) {
        self.fitted.push(FittedConstant {
            label: label.to_string(),
            resolution: resolution.to_string(),
            value,
        });
    }

    /// Stability of a fitted constant across the recorded resolutions.
    fn require_stable(&mut self, label: &str, window: f64) {
        let values: Vec<f64> = self
            .fitted
            .iter()
            .filter(|f| f.label == label)
            .map(|f| f.value)
            .collect();
        let ok = values.len() >= 2
            && values
                .windows(2)
                .all(|w| (w[1] - w[0]).abs() <= window * w[0].abs().max(1e-300));
        self.require(
            ok,
            format!("{label} stable within {window:.0e}: {values:?}"),
        );
    }

    pub fn summary(&self) -> String {
        let fails: Vec<&String> = self
            .details
            .iter()
            .filter(|d| d.starts_with("[FAIL"))
            .collect();
        if fails.is_empty() {
            format!(
                "{} assertions, {} samples",
                self.details.len(),
                self.samples
            )
        } else {
            fails
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(" | ")
        }
    }
}

/// Run the whole suite (or the single check matching `only`).
pub fn run_all(seed: u64, only: Option<&str>) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for name in check_names() {
        if let Some(filter) = only {
            if filter != name {
                continue;
            }
        }
        let report = match name {
            "norm_toolbox" => check_norm_toolbox(seed)?,
            "potential" => check_potential(seed)?,
            "exact_solution" => check_exact_solution(seed)?,
            "decoupling" => check_decoupling(seed)?,
            "energy_decay" => check_energy_decay(seed)?,
            "maximum_principle" => check_maximum_principle(seed)?,
            "damping" => check_damping(seed)?,
            "linear_seed_bounds" => check_linear_seed_bounds(seed)?,
            "contraction" => check_contraction(seed)?,
            "uniqueness" => check_uniqueness(seed)?,
            "threshold" => check_threshold(seed)?,
            "large_density" => check_large_density(seed)?,
            _ => unreachable!(),
        };
        out.push(report);
    }
    Ok(out)
}

fn params_default() -> Params {
    Params::constrained(0.1, 1.0).expect("valid defaults")
}

/// Band of the matched ensembles shared by both toolbox resolutions; the
/// pointwise product of two such fields is alias-free already at n = 64.
const MATCHED_BAND: i64 = 15;

/// A (q-like, m-like) pair of coefficient draws.
type PairDraw = (Vec<(f64, f64)>, Vec<(f64, f64)>);

/// Coefficient draw of a random trigonometric polynomial on the fixed band;
/// the same draw yields the same continuum field at every resolution.
fn trig_draw(rng: &mut ChaCha8Rng, band: i64) -> Vec<(f64, f64)> {
    use rand::Rng;
    (1..=band)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn trig_field(grid: Grid, coefs: &[(f64, f64)], label: &str) -> Result<RealField> {
    RealField::from_fn(grid, label, |x| {
        coefs
            .iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let k = (i + 1) as f64;
                a * (k * x[0]).cos() + b * (k * x[0]).sin()
            })
            .sum()
    })
}

/// The exact-solution regression: from (h0, u0 = -mu grad ln h0) the depth
/// must track the heat flow and the velocity must stay curl-free, for both
/// viscosity forms.
pub fn check_exact_solution(seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("exact_solution", "1e-6 in L2, [0,1]", seed);
    // N = 1, n = 256, both viscosity forms.
    let g = Grid::uniform(1, 256)?;
    let h0 = RealField::from_fn(g, "h", |x| 1.0 + 0.5 * x[0].cos())?;
    for form in [ViscosityForm::Gradient, ViscosityForm::Strain] {
        let p = params_default().with_viscosity_form(form);
        let s0 = effective_rest_state(&h0, &p)?;
        let cfg = StepperConfig::new(2.5e-4, 1.0, Scheme::Etdrk2, 400)?;
        let traj = evolve_primitive(&s0, &p, &cfg)?;
        rep.require(
            traj.termination == Termination::Completed,
            format!("{form:?}: run completed"),
        );
        let mut worst_h = 0.0f64;
        let mut worst_curl = 0.0f64;
        for (t, state) in traj.times.iter().zip(&traj.states) {
            let exact = heat_semigroup(&h0, *t, p.mu)?;
            worst_h = worst_h.max(state.h.sub(&exact)?.l2());
            worst_curl = worst_curl.max(models::curl_l2(&state.u)?);
        }
        rep.require(
            worst_h <= 1e-6,
            format!("{form:?}: sup_t ||h - heat flow||_L2 = {worst_h:.3e} <= 1e-6"),
        );
        rep.require(
            worst_curl <= 1e-6,
            format!("{form:?}: sup_t ||curl u||_L2 = {worst_curl:.3e} <= 1e-6"),
        );
        rep.samples += traj.states.len();
    }
    // N = 2 spot check, gradient form.
    let g2 = Grid::uniform(2, 64)?;
    let h0 = RealField::from_fn(g2, "h", |x| 1.0 + 0.4 * x[0].cos() * x[1].cos())?;
    let p = params_default();
    let s0 = effective_rest_state(&h0, &p)?;
    let cfg = StepperConfig::new(1e-3, 0.5, Scheme::Etdrk2, 100)?;
    let traj = evolve_primitive(&s0, &p, &cfg)?;
    let mut worst_h = 0.0f64;
    let mut worst_curl = 0.0f64;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let exact = heat_semigroup(&h0, *t, p.mu)?;
        worst_h = worst_h.max(state.h.sub(&exact)?.l2());
        worst_curl = worst_curl.max(models::curl_l2(&state.u)?);
    }
    rep.require(
        worst_h <= 1e-6,
        format!("2-D gradient: sup_t ||h - heat flow||_L2 = {worst_h:.3e} <= 1e-6"),
    );
    rep.require(
        worst_curl <= 1e-6,
        format!("2-D gradient: sup_t ||curl u||_L2 = {worst_curl:.3e} <= 1e-6"),
    );
    rep.samples += traj.states.len();
    Ok(rep)
}

/// Evolve the two formulations from matched data and compare depth
/// trajectories; the deviation must shrink like the stepper order.
pub fn check_decoupling(seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("decoupling", "deviation halves under dt/2", seed);
    // N = 1 (forms coincide).
    {
        let g = Grid::uniform(1, 128)?;
        let p = params_default();
        let q0 = RealField::from_fn(g, "q", |x| 0.2 * x[0].cos())?;
        let m0 = vec![RealField::from_fn(g, "m", |x| 0.05 * x[0].sin())?];
        let dev = |dt: f64| -> Result<f64> { cross_formulation_deviation(&q0, &m0, &p, dt, 0.25) };
        let d1 = dev(2e-3)?;
        let d2 = dev(1e-3)?;
        rep.note(format!(
            "1-D deviation {d1:.3e} at dt=2e-3, {d2:.3e} at dt=1e-3"
        ));
        rep.require(
            d2 <= 0.5 * d1 || d2 < 1e-10,
            format!("1-D deviation converges with dt: ratio {:.3}", d2 / d1),
        );
    }
    // N = 2, strain form (the exactly decoupling one); gradient recorded.
    {
        let g = Grid::uniform(2, 32)?;
        let q0 = RealField::from_fn(g, "q", |x| 0.15 * x[0].cos() + 0.1 * x[1].sin())?;
        let m0 = vec![
            RealField::from_fn(g, "m1", |x| 0.03 * x[0].sin())?,
            RealField::from_fn(g, "m2", |x| 0.03 * x[1].sin())?,
        ];
        let p_strain = params_default().with_viscosity_form(ViscosityForm::Strain);
        let d1 = cross_formulation_deviation(&q0, &m0, &p_strain, 2e-3, 0.2)?;
        let d2 = cross_formulation_deviation(&q0, &m0, &p_strain, 1e-3, 0.2)?;
        rep.require(
            d2 <= 0.5 * d1 || d2 < 1e-10,
            format!("2-D strain deviation converges with dt: {d1:.3e} -> {d2:.3e}"),
        );
        let p_grad = params_default();
        let dg = cross_formulation_deviation(&q0, &m0, &p_grad, 1e-3, 0.2)?;
        rep.note(format!(
            "2-D gradient-form deviation {dg:.3e} at dt=1e-3 (recorded, no verdict)"
        ));
        rep.samples += 4;
    }
    Ok(rep)
}

/// sup_t L2 distance between h from the primitive run and 1 + q from the
/// momentum run started from matched data.
fn cross_formulation_deviation(
    q0: &RealField,
    m0: &[RealField],
    p: &Params,
    dt: f64,
    t_end: f64,
) -> Result<f64> {
    let cfg = StepperConfig::new(dt, t_end, Scheme::Etdrk2, ((t_end / dt) as usize) / 8)?;
    let mom0 = MomentumState::new(q0.clone(), m0.to_vec())?;
    let prim0 = from_effective(&mom0.to_transformed(p.vacuum_floor)?, p)?;
    let tm = evolve_momentum(&mom0, p, &cfg)?;
    let tp = evolve_primitive(&prim0, p, &cfg)?;
    let mut worst = 0.0f64;
    for (jm, t) in tm.times.iter().enumerate() {
        if let Some(jp) = tp.times.iter().position(|s| (s - t).abs() < 1e-12) {
            let h_m = tm.states[jm].q.map("h", |v| 1.0 + v);
            worst = worst.max(h_m.sub(&tp.states[jp].h)?.l2());
        }
    }
    Ok(worst)
}

/// Twenty seeded small-data primitive runs: discrete energy never increases
/// beyond the per-step tolerance, mass is conserved to 1e-12, and the
/// friction-only mode matches the closed-form kinetic decay.
pub fn check_energy_decay(seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("energy_decay", "1e-6*(1+|E|) per step; mass 1e-12", seed);
    let p = params_default();
    let mut run =
        |dim: usize, n: usize, dt: f64, t_end: f64, stride: usize, s: u64| -> Result<()> {
            let g = Grid::uniform(dim, n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let q0 = random_band_field(g, 1, 4, 0.15, &mut rng, "q")?;
            let u0: Vec<RealField> = (0..dim)
                .map(|i| random_band_field(g, 1, 4, 0.08, &mut rng, &format!("u{i}")))
                .collect::<Result<_>>()?;
            let h0 = q0.map("h", |v| 1.0 + v);
            let s0 = PrimitiveState::new(h0, u0)?;
            let cfg = StepperConfig::new(dt, t_end, Scheme::Etdrk2, stride)?;
            let traj = evolve_primitive(&s0, &p, &cfg)?;
            rep.require(
                traj.termination == Termination::Completed,
                format!("seed {s}: run completed"),
            );
            let mut monotone = true;
            let mut worst_jump = 0.0f64;
            for w in traj.diagnostics.windows(2) {
                let jump = w[1].energy - w[0].energy;
                let allowance = 1e-6 * (1.0 + w[0].energy.abs());
                if jump > allowance {
                    monotone = false;
                }
                worst_jump = worst_jump.max(jump);
            }
            rep.require(
                monotone,
                format!("seed {s}: energy non-increasing (worst jump {worst_jump:.3e})"),
            );
            let mass0 = traj.diagnostics[0].mass;
            let worst_mass = traj
                .diagnostics
                .iter()
                .map(|r| (r.mass - mass0).abs())
                .fold(0.0, f64::max);
            rep.require(
                worst_mass <= 1e-12,
                format!("seed {s}: mass drift {worst_mass:.3e}"),
            );
            // Dissipation bookkeeping, reported not asserted.
            let e_drop = traj.diagnostics[0].energy - traj.diagnostics.last().unwrap().energy;
            let dissip: Vec<f64> = traj
                .states
                .iter()
                .map(|st| viscous_dissipation(st, &p))
                .collect::<Result<_>>()?;
            let dt_row = traj.times[1] - traj.times[0];
            let integral = trapezoid(&dissip, dt_row);
            rep.note(format!(
                "seed {s}: energy drop {e_drop:.4e}, int mu h |Du|^2 = {integral:.4e}"
            ));
            rep.samples += 1;
            Ok(())
        };
    for i in 0..10u64 {
        run(1, 128, 5e-4, 0.25, 50, seed.wrapping_add(i))?;
    }
    for i in 0..10u64 {
        run(2, 64, 1e-3, 0.3, 30, seed.wrapping_add(100 + i))?;
    }
    // Friction-only closed form: h = 1, u = const decays at rate r exactly.
    {
        let g = Grid::uniform(1, 64)?;
        let c0 = 0.3;
        let s0 = PrimitiveState::new(
            RealField::constant(g, 1.0, "h"),
            vec![RealField::constant(g, c0, "u")],
        )?;
        let cfg = StepperConfig::new(0.01, 1.0, Scheme::Etdrk2, 10)?;
        let traj = evolve_primitive(&s0, &p, &cfg)?;
        let vol = g.volume();
        let mut worst = 0.0f64;
        for row in &traj.diagnostics {
            let expect = 0.5 * c0 * c0 * (-2.0 * p.r * row.t).exp() * vol;
            worst = worst.max((row.energy - expect).abs());
        }
        rep.require(
            worst <= 1e-10,
            format!("friction-only kinetic decay matches e^(-2rt): worst {worst:.3e}"),
        );
        // Rest state stays at zero energy.
        let rest = evolve_primitive(&PrimitiveState::rest(g), &p, &cfg)?;
        let worst = rest
            .diagnostics
            .iter()
            .map(|r| r.energy.abs())
            .fold(0.0, f64::max);
        rep.require(
            worst <= 1e-13,
            format!("rest state energy stays 0 ({worst:.1e})"),
        );
    }
    Ok(rep)
}

/// Pure-heat branch: the discrete minimum never drops below its initial
/// value, and the reciprocal guard reports a breach below the floor.
pub fn check_maximum_principle(seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("maximum_principle", "min h(t) >= min h(0) - 1e-10", seed);
    let p = params_default();
    // Depth families whose minimum sits exactly on a grid point.
    let g = Grid::uniform(1, 128)?;
    let h0s = [
        RealField::from_fn(g, "h", |x| 1.0 - 0.5 * x[0].cos())?,
        RealField::from_fn(g, "h", |x| {
            1.0 - 0.3 * x[0].cos() - 0.2 * (2.0 * x[0]).cos()
        })?,
    ];
    for (i, h0) in h0s.iter().enumerate() {
        let q0 = h0.map("q", |v| v - 1.0);
        let s0 = MomentumState::new(q0, vec![RealField::zeros(g, "m")])?;
        let cfg = StepperConfig::new(0.01, 1.0, Scheme::Etdrk2, 10)?;
        let traj = evolve_momentum(&s0, &p, &cfg)?;
        let min0 = traj.diagnostics[0].min_h;
        let worst = traj
            .diagnostics
            .iter()
            .map(|r| r.min_h)
            .fold(f64::INFINITY, f64::min);
        rep.require(
            worst >= min0 - 1e-10,
            format!("family {i}: min h along heat branch {worst:.12} >= {min0:.12} - 1e-10"),
        );
        rep.samples += traj.diagnostics.len();
    }
    // 2-D variant.
    {
        let g2 = Grid::uniform(2, 32)?;
        let h0 = RealField::from_fn(g2, "h", |x| 1.0 - 0.3 * x[0].cos() - 0.2 * x[1].cos())?;
        let q0 = h0.map("q", |v| v - 1.0);
        let s0 = MomentumState::new(
            q0,
            vec![RealField::zeros(g2, "m1"), RealField::zeros(g2, "m2")],
        )?;
        let cfg = StepperConfig::new(0.01, 0.5, Scheme::Etdrk2, 10)?;
        let traj = evolve_momentum(&s0, &p, &cfg)?;
        let min0 = traj.diagnostics[0].min_h;
        let worst = traj
            .diagnostics
            .iter()
            .map(|r| r.min_h)
            .fold(f64::INFINITY, f64::min);
        rep.require(
            worst >= min0 - 1e-10,
            format!("2-D family: min h {worst:.12} >= {min0:.12} - 1e-10"),
        );
    }
    // The guard: dipping below the floor is a typed breach with location.
    {
        let h = RealField::from_fn(g, "h", |x| 0.55 + 0.5 * x[0].cos())?;
        match h.safe_reciprocal(0.1) {
            Err(crate::error::Error::VacuumBreach { min_value, .. }) => {
                rep.require(
                    min_value <= 0.1,
                    format!("breach reported at min {min_value:.3}"),
                );
            }
            _ => rep.require(false, "breach not reported".into()),
        }
    }
    Ok(rep)
}

/// Damping of the transformed momentum: pointwise decay bound along a
/// nonlinear run, exact mode-zero decay, and the integrability proxy.
pub fn check_damping(seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("damping", "||m(t)|| <= 2||m0|| e^{-rt/2} on [0, 5/r]", seed);
    let p = params_default();
    let g = Grid::uniform(1, 128)?;
    let mult = DyadicMultiplier::build(g)?;
    let (s_q, _, s_m, _) = working_spec(1);
    // Normalized data: ||m0|| = 1e-2, ||q0|| = 1.
    let q_raw = RealField::from_fn(g, "q", |x| x[0].cos())?;
    let m_raw = vec![RealField::from_fn(g, "m", |x| x[0].sin())?];
    let qn = mult
        .besov_norm(&q_raw, BesovSpec::l2_summed(s_q))?
        .aggregate;
    let mn = mult
        .besov_norm_vector(&m_raw, BesovSpec::l2_summed(s_m))?
        .aggregate;
    let q0 = q_raw.scaled(1.0 / qn);
    let m0 = vec![m_raw[0].scaled(1e-2 / mn)];
    let m0_norm = 1e-2;
    let horizon = 5.0 / p.r;
    let cfg = StepperConfig::new(0.01, horizon, Scheme::Etdrk2, 25)?;
    let s0 = MomentumState::new(q0, m0)?;
    let traj = evolve_momentum(&s0, &p, &cfg)?;
    rep.require(
        traj.termination == Termination::Completed,
        "damping run stays vacuum-free".into(),
    );
    let mut worst_excess: f64 = 0.0;
    let mut norms = Vec::new();
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let norm = mult
            .besov_norm_vector(&state.m, BesovSpec::l2_summed(s_m))?
            .aggregate;
        let bound = 2.0 * m0_norm * (-p.r * t / 2.0).exp();
        worst_excess = worst_excess.max(norm / bound);
        norms.push(norm);
    }
    rep.require(
        worst_excess <= 1.0,
        format!("decay bound margin: max ratio to bound {worst_excess:.3}"),
    );
    // Time-integrability proxy: the L1-in-time norm is finite and below the
    // integral of the bound.
    let dt_row = traj.times[1] - traj.times[0];
    let l1 = trapezoid(&norms, dt_row);
    let bound_l1 = 2.0 * m0_norm * 2.0 / p.r;
    rep.require(
        l1 <= bound_l1,
        format!("int ||m||(t) dt = {l1:.4e} <= {bound_l1:.4e}"),
    );
    // Mode zero of a constant momentum decays exactly at rate r.
    let c = RealField::constant(g, 0.4, "m");
    let out = damped_semigroup(&c, 0.7, p.mu, p.r)?;
    let expect = 0.4 * (-p.r * 0.7f64).exp();
    rep.require(
        (out.values[0] - expect).abs() <= 1e-12,
        format!(
            "mode-0 exact decay ({:.2e} error)",
            (out.values[0] - expect).abs()
        ),
    );
    rep.samples = traj.states.len();
    let _ = seed;
    Ok(rep)
}

/// The seed norms are controlled by the data norms with a constant stable
/// across resolutions and random draws.
pub fn check_linear_seed_bounds(seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("linear_seed_bounds", "fitted C stable within 20%", seed);
    let p = params_default();
    // Matched ensembles across the two resolutions.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<PairDraw> = (0..20)
        .map(|_| {
            (
                trig_draw(&mut rng, MATCHED_BAND),
                trig_draw(&mut rng, MATCHED_BAND),
            )
        })
        .collect();
    for n in [64usize, 128] {
        let g = Grid::uniform(1, n)?;
        let mult = DyadicMultiplier::build(g)?;
        let (s_q, _, s_m, _) = working_spec(1);
        let mut worst: f64 = 0.0;
        for (cq, cm) in &draws {
            let q_raw = trig_field(g, cq, "q")?;
            let scale = 0.4 / q_raw.linf().max(1e-30);
            let q0 = q_raw.scaled(scale);
            let m0 = vec![trig_field(g, cm, "m")?.scaled(0.2)];
            let cfg = StepperConfig::new(0.02, 0.5, Scheme::Etdrk2, 1)?;
            let seed_pair = linear_seed(&q0, &m0, &p, &cfg)?;
            let wn = working_norm(&seed_pair, &mult)?;
            let data = mult.besov_norm(&q0, BesovSpec::l2_summed(s_q))?.aggregate
                + mult
                    .besov_norm_vector(&m0, BesovSpec::l2_summed(s_m))?
                    .aggregate;
            if data > 0.0 {
                worst = worst.max(wn.total / data);
            }
            rep.samples += 1;
        }
        rep.fit("seed_bound_C", &format!("n={n}"), worst);
    }
    rep.require_stable("seed_bound_C", 0.2);
    Ok(rep)
}

/// Quadratic smallness of the first correction, contraction of the
/// iteration, and the uniform induction bound along a converged run.
pub fn check_contraction(seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("contraction", "ratios < 1; exponent in [1.8, 2.2]", seed);
    let p = params_default();
    let g = Grid::uniform(1, 64)?;
    let mult = DyadicMultiplier::build(g)?;
    let cfg = StepperConfig::new(0.01, 0.5, Scheme::Etdrk2, 1)?;
    // Quadratic scaling of the first correction.
    let q0 = RealField::from_fn(g, "q", |x| 0.3 * x[0].cos())?;
    let base = vec![RealField::from_fn(g, "m", |x| 0.01 * x[0].sin())?];
    let corr = |m0: &[RealField]| -> Result<f64> {
        let seed_pair = linear_seed(&q0, m0, &p, &cfg)?;
        let (_, barred) = picard_step(&seed_pair, &seed_pair, &p, &cfg)?;
        Ok(working_norm(&barred, &mult)?.total)
    };
    let c1 = corr(&base)?;
    let c2 = corr(&[base[0].scaled(2.0)])?;
    let exponent = (c2 / c1).log2();
    rep.require(
        (1.8..=2.2).contains(&exponent),
        format!("first-correction exponent {exponent:.3} in [1.8, 2.2]"),
    );
    // Contraction along a converged small-data run.
    let m0 = vec![RealField::from_fn(g, "m", |x| 0.02 * x[0].sin())?];
    let res = run_picard(&q0, &m0, &p, &cfg, 1e-9, 12)?;
    rep.require(
        res.trace.outcome == Outcome::Converged,
        format!("small-data run converged ({:?})", res.trace.outcome),
    );
    let max_ratio = res.trace.max_ratio().unwrap_or(0.0);
    rep.require(
        max_ratio < 1.0,
        format!("all ratios < 1 (max {max_ratio:.3})"),
    );
    // Induction-style uniform bound on the barred iterates.
    let first = res.trace.rows.get(1).map(|r| r.barred.total).unwrap_or(0.0);
    let tail: f64 = res.trace.rows.iter().filter_map(|r| r.delta).sum();
    let eps = res
        .trace
        .rows
        .iter()
        .map(|r| r.barred.total)
        .fold(0.0, f64::max);
    rep.require(
        eps <= first + tail + 1e-12,
        format!(
            "sup_n ||barred_n|| = {eps:.3e} <= first + sum(delta) = {:.3e}",
            first + tail
        ),
    );
    // The depth never leaves the half-of-initial-minimum regime along the
    // converged run.
    let c = 0.7; // min h0 for q0 = 0.3 cos x
    rep.require(
        res.trace.min_depth >= c / 2.0,
        format!(
            "min(1 + q^n) = {:.4} >= c/2 = {:.4} along the run",
            res.trace.min_depth,
            c / 2.0
        ),
    );
    rep.fit("max_ratio", "n=64", max_ratio);
    rep.fit("induction_eps", "n=64", eps);
    rep.samples = res.trace.rows.len();
    Ok(rep)
}

/// Determinism of the limit: different iteration budgets agree to tolerance,
/// and the fixed point shadows the time stepper.
pub fn check_uniqueness(seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("uniqueness", "runs agree within combined tolerance", seed);
    let p = params_default();
    let g = Grid::uniform(1, 64)?;
    let cfg = StepperConfig::new(0.01, 0.5, Scheme::Etdrk2, 1)?;
    let q0 = RealField::from_fn(g, "q", |x| 0.4 * x[0].cos())?;
    let m0 = vec![RealField::from_fn(g, "m", |x| 0.02 * x[0].sin())?];
    let loose = run_picard(&q0, &m0, &p, &cfg, 1e-6, 6)?;
    let tight = run_picard(&q0, &m0, &p, &cfg, 1e-11, 20)?;
    rep.require(
        loose.trace.outcome == Outcome::Converged && tight.trace.outcome == Outcome::Converged,
        "both runs converged".into(),
    );
    let mut worst = 0.0f64;
    for j in 0..loose.trajectory.len() {
        let mut d = loose.trajectory.q[j].sub(&tight.trajectory.q[j])?.l2();
        for (a, b) in loose.trajectory.m[j].iter().zip(&tight.trajectory.m[j]) {
            d += a.sub(b)?.l2();
        }
        worst = worst.max(d);
    }
    rep.require(
        worst <= 1e-5,
        format!("fixed points agree: sup distance {worst:.3e} <= 1e-5"),
    );
    let residual = tight.trace.residual_vs_stepper.unwrap_or(f64::NAN);
    rep.require(
        residual <= 1e-5,
        format!("fixed point shadows stepper: {residual:.3e} <= 1e-5"),
    );
    rep.samples = loose.trajectory.len();
    Ok(rep)
}

/// Coarse threshold sweep: finite brackets for each depth family, and the
/// bracket shrinking as min h0 decreases.
pub fn check_threshold(seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("threshold", "finite bracket; trend vs 1/min h0", seed);
    let p = params_default();
    let g = Grid::uniform(1, 128)?;
    let families: Vec<(String, RealField)> = [0.3, 0.6, 0.8]
        .iter()
        .map(|&a| {
            Ok((
                format!("a_q={a}"),
                RealField::from_fn(g, "q", move |x| a * x[0].cos())?,
            ))
        })
        .collect::<Result<_>>()?;
    let dir = vec![RealField::from_fn(g, "m", |x| x[0].sin())?];
    let amplitudes: Vec<f64> = (0..9).map(|i| 0.01 * 2f64.powi(i)).collect();
    let cfg = StepperConfig::new(0.02, 1.0, Scheme::Etdrk2, 1)?;
    let sweeps = threshold_sweep(&families, &dir, &amplitudes, &p, &cfg, 1e-7, 12)?;
    let mut uppers = Vec::new();
    for fam in &sweeps {
        rep.require(
            fam.largest_converged.is_some() && fam.smallest_failed.is_some(),
            format!(
                "{}: bracket [{:?}, {:?}] finite",
                fam.label, fam.largest_converged, fam.smallest_failed
            ),
        );
        rep.require(
            fam.monotone_violations.is_empty(),
            format!("{}: outcomes monotone in amplitude", fam.label),
        );
        if let Some(u) = fam.smallest_failed {
            uppers.push((fam.min_h0, u));
            rep.fit("bracket_upper", &format!("min_h0={:.2}", fam.min_h0), u);
        }
        rep.samples += fam.rows.len();
    }
    // Trend: smaller min h0 never enlarges the bracket, and shrinks it overall.
    if uppers.len() == 3 {
        let non_increasing = uppers.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12));
        let strict = uppers.last().unwrap().1 < uppers[0].1;
        rep.require(
            non_increasing && strict,
            format!("threshold shrinks with min h0: {uppers:?}"),
        );
    }
    let _ = seed;
    Ok(rep)
}

/// Large depth variation with zero transformed momentum: one-iteration
/// convergence regardless of the size of q0, with the classical momentum
/// split recorded.
pub fn check_large_density(seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("large_density", "1 iteration for every A < 1", seed);
    let p = params_default();
    let g = Grid::uniform(1, 128)?;
    let mult = DyadicMultiplier::build(g)?;
    let (s_q, _, s_m, _) = working_spec(1);
    let cfg = StepperConfig::new(0.01, 1.0, Scheme::Etdrk2, 1)?;
    // One-iteration convergence for every depth amplitude: zero transformed
    // momentum makes the seed the exact fixed point no matter how large q0 is.
    let mut q_norm_large = 0.0;
    for a in [0.3, 0.6, 0.9] {
        let q0 = RealField::from_fn(g, "q", move |x| a * x[0].cos())?;
        let res = run_picard(&q0, &[RealField::zeros(g, "m")], &p, &cfg, 1e-10, 8)?;
        rep.require(
            res.trace.outcome == Outcome::Converged && res.trace.rows.len() == 2,
            format!("A={a}: converged in one iteration"),
        );
        let qn = mult.besov_norm(&q0, BesovSpec::l2_summed(s_q))?.aggregate;
        if a == 0.9 {
            q_norm_large = qn;
        }
        rep.note(format!("A={a}: ||q0|| = {qn:.4}"));
        rep.samples += 1;
    }
    // Compare the large-q0 norm against the momentum threshold of the same
    // family. Weak friction keeps the nonlinearity active over the whole
    // window, and a momentum peak aligned with the depth minimum is the
    // worst case; both push the threshold down to its honest value.
    let p_weak = Params::constrained(0.1, 0.1)?;
    let q09 = RealField::from_fn(g, "q", |x| 0.9 * x[0].cos())?;
    let dir = vec![RealField::from_fn(g, "m", |x| x[0].cos())?];
    let amplitudes: Vec<f64> = (0..8).map(|i| 0.005 * 2f64.powi(i)).collect();
    let sweeps = threshold_sweep(
        &[("A=0.9".to_string(), q09.clone())],
        &dir,
        &amplitudes,
        &p_weak,
        &cfg,
        1e-7,
        10,
    )?;
    let upper = sweeps[0].smallest_failed.unwrap_or(f64::INFINITY);
    rep.require(
        q_norm_large >= 10.0 * upper,
        format!("||q0|| = {q_norm_large:.3} >= 10 x bracket upper {upper:.3}"),
    );
    // Classical momentum m' = m - mu grad h is large although m = 0: its
    // norm alone would violate the smallness threshold.
    let s = MomentumState::new(q09, vec![RealField::zeros(g, "m")])?;
    let mp = classical_momentum(&s, &p_weak)?;
    let mp_norm = mult
        .besov_norm_vector(&mp, BesovSpec::l2_summed(s_m))?
        .aggregate;
    rep.require(
        mp_norm > upper,
        format!("classical momentum norm {mp_norm:.3} exceeds the threshold {upper:.3}"),
    );
    let _ = seed;
    Ok(rep)
}

/// Potential bookkeeping: stationarity at the reference depth and the
/// closed-form value at e, cross-checked against quadrature.
pub fn check_potential(seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("potential", "closed form vs quadrature 1e-10", seed);
    let p = params_default();
    rep.require(
        pi_potential(1.0, &p)? == 0.0,
        "Pi(1) - Pi(1) = 0 exactly".into(),
    );
    let eps = 1e-5;
    let slope = (pi_potential(1.0 + eps, &p)? - pi_potential(1.0 - eps, &p)?) / (2.0 * eps);
    rep.require(
        slope.abs() <= 1e-9,
        format!("Pi'(1) = {slope:.2e} by finite differences"),
    );
    let e = std::f64::consts::E;
    let v = pi_potential(e, &p)?;
    rep.require(
        (v - p.inv_fr2()).abs() <= 1e-14,
        format!("Pi(e) - Pi(1) = {v:.12} matches 1/Fr^2 = {}", p.inv_fr2()),
    );
    for s in [0.25, 0.8, 1.7, 3.5] {
        let quad = pi_potential_quadrature(s, |z| p.inv_fr2() * z, 4096)?;
        let closed = pi_potential(s, &p)?;
        rep.require(
            (quad - closed).abs() <= 1e-10 * (1.0 + closed.abs()),
            format!("s={s}: quadrature {quad:.12e} vs closed {closed:.12e}"),
        );
        rep.samples += 1;
    }
    // Rest-state energy vanishes.
    let g = Grid::uniform(1, 32)?;
    rep.require(
        energy(&PrimitiveState::rest(g), &p)?.abs() < 1e-14,
        "rest state has zero energy".into(),
    );
    Ok(rep)
}

/// The functional-analysis toolbox at n in {64, 128}: partition of unity,
/// Parseval, the norm definition, derivative equivalence, embeddings,
/// product laws, composition, time-norm comparison, and heat smoothing.
///
/// Fitted constants use matched ensembles: the same random trigonometric
/// polynomials evaluated on both grids, so stability under refinement is a
/// statement about the toolbox, not about sampling noise.
#[allow(clippy::needless_range_loop)]
pub fn check_norm_toolbox(seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new(
        "norm_toolbox",
        "exact identities 1e-12; fitted constants stable 20%",
        seed,
    );
    // Annulus support of the ring function.
    let mut support_ok = true;
    for xi in [0.0, 0.2, 0.5, 0.74, 2.67, 3.0, 10.0, 100.0] {
        support_ok &= phi(xi).abs() < 1e-14;
    }
    for xi in [0.8, 1.0, 1.5, 2.0, 2.5] {
        support_ok &= phi(xi) > 0.0;
    }
    support_ok &= chi(0.75) == 1.0 && chi(4.0 / 3.0) == 0.0;
    rep.require(
        support_ok,
        "ring supported exactly in 3/4 <= |xi| <= 8/3".into(),
    );

    // Matched coefficient draws shared by both resolutions.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_samples = 200usize;
    let draws: Vec<PairDraw> = (0..n_samples)
        .map(|_| {
            (
                trig_draw(&mut rng, MATCHED_BAND),
                trig_draw(&mut rng, MATCHED_BAND),
            )
        })
        .collect();
    let mink_amps: Vec<(f64, f64)> = (0..20)
        .map(|_| (0.5 + 0.5 * rng_f64(&mut rng), 0.2 + 0.5 * rng_f64(&mut rng)))
        .collect();

    for n in [64usize, 128] {
        let g = Grid::uniform(1, n)?;
        let mult = DyadicMultiplier::build(g)?;
        let res = format!("n={n}");
        let mut noise = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5 ^ (n as u64));

        // Partition of unity on every nonzero mode.
        let mut worst = 0.0f64;
        let mut sums = vec![0.0; g.total_points()];
        for l in mult.blocks() {
            for (s, v) in sums.iter_mut().zip(mult.block_mask(l)) {
                *s += v;
            }
        }
        for (i, s) in sums.iter().enumerate() {
            if g.wavevector_sq(i) > 0.0 {
                worst = worst.max((s - 1.0).abs());
            }
        }
        rep.require(
            worst <= 1e-12,
            format!("{res}: partition of unity ({worst:.2e})"),
        );

        // Parseval on random full-band fields.
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let f = random_band_field(g, 1, (n / 2 - 1) as i64, 0.7, &mut noise, "f")?;
            let quad = f.l2();
            let spec = f.to_spectral()?.energy_l2_sq().sqrt();
            worst = worst.max((quad - spec).abs() / quad.max(1e-30));
        }
        rep.require(worst <= 1e-12, format!("{res}: Parseval ({worst:.2e})"));

        // Two-block closed form of the norm definition.
        let u = RealField::from_fn(g, "u", |x| (8.0 * x[0]).cos())?;
        let s_test = 0.5;
        let norm = mult.besov_norm(&u, BesovSpec::l2_summed(s_test))?.aggregate;
        let expect = (2f64.powf(2.0 * s_test) * phi(2.0) + 2f64.powf(3.0 * s_test) * phi(1.0))
            * std::f64::consts::PI.sqrt();
        rep.require(
            (norm - expect).abs() <= 1e-12 * expect,
            format!("{res}: two-block norm value"),
        );

        // Fitted constants over the matched ensembles.
        let mut c_deriv: f64 = 0.0;
        let mut c_prod: f64 = 0.0;
        let mut c_crit: f64 = 0.0;
        let mut c_comp: f64 = 0.0;
        let mut c_heat: f64 = 0.0;
        let mut embed_ok = true;
        let spec_half = BesovSpec::l2_summed(0.5);
        let spec_quarter = BesovSpec::l2_summed(0.25);
        let spec_half_inf = BesovSpec::new(0.5, Exponent::Finite(2.0), Exponent::Infinity)?;
        let heat_steps = 64usize;
        let heat_dt = 1.0 / heat_steps as f64;
        let heat_mu = 0.1;
        let blocks: Vec<i32> = mult.blocks().collect();
        for (cu, cv) in &draws {
            let u = trig_field(g, cu, "u")?;
            let v = trig_field(g, cv, "v")?;

            // Derivative norm equivalence, two-sided.
            let nu = mult.besov_norm(&u, spec_half)?.aggregate;
            if nu > 0.0 {
                let du = &u.gradient()?[0];
                let nd = mult.besov_norm(du, BesovSpec::l2_summed(-0.5))?.aggregate;
                c_deriv = c_deriv.max(nd / nu).max(nu / nd);
            }

            // Embedding inequalities, exact per sample.
            let n1 = nu;
            let n2 = mult
                .besov_norm(
                    &u,
                    BesovSpec::new(0.5, Exponent::Finite(2.0), Exponent::Finite(2.0))?,
                )?
                .aggregate;
            let ninf = mult
                .besov_norm(
                    &u,
                    BesovSpec::new(0.5, Exponent::Finite(2.0), Exponent::Infinity)?,
                )?
                .aggregate;
            embed_ok &= n1 >= n2 && n2 >= ninf;
            let (lo, _) = mult.block_range();
            let kfac = 2f64.powf(lo as f64 * (0.25 - 1.0));
            let nhi = mult.besov_norm(&u, BesovSpec::l2_summed(1.0))?.aggregate;
            let nlo = mult.besov_norm(&u, spec_quarter)?.aggregate;
            embed_ok &= nlo <= kfac * nhi * (1.0 + 1e-12);

            // Product law with two uniform factors.
            let uv = u.zip_map(&v, "uv", |a, b| a * b)?;
            let lhs = mult.besov_norm(&uv, spec_half)?.aggregate;
            let rhs = u.linf() * mult.besov_norm(&v, spec_half)?.aggregate
                + v.linf() * mult.besov_norm(&u, spec_half)?.aggregate;
            if rhs > 0.0 {
                c_prod = c_prod.max(lhs / rhs);
            }

            // Product law with the critical-space factor.
            let lhs = mult.besov_norm(&uv, spec_quarter)?.aggregate;
            let rhs = mult.besov_norm(&u, spec_quarter)?.aggregate
                * (mult.besov_norm(&v, spec_half_inf)?.aggregate + v.linf());
            if rhs > 0.0 {
                c_crit = c_crit.max(lhs / rhs);
            }

            // Composition with F(x) = 1/(1+x) - 1 under a fixed max-norm budget.
            let linf = u.linf();
            if linf > 0.0 {
                let q = u.scaled(0.4 / linf);
                let fq = q.map("F(q)", |w| 1.0 / (1.0 + w) - 1.0);
                let nq = mult.besov_norm(&q, spec_half)?.aggregate;
                if nq > 0.0 {
                    c_comp = c_comp.max(mult.besov_norm(&fq, spec_half)?.aggregate / nq);
                }
            }

            // Heat smoothing: two derivatives gained in the time-integrated
            // norm; the flow is exact per mode, so no stepping error enters.
            let u0_spec = u.to_spectral()?;
            let denom = nu;
            if denom > 0.0 {
                let mut per_block = vec![vec![0.0; heat_steps + 1]; blocks.len()];
                for j in 0..=heat_steps {
                    let t = j as f64 * heat_dt;
                    let ut = damped_semigroup_spectral(&u0_spec, t, heat_mu, 0.0);
                    let table = mult.block_l2_table(std::slice::from_ref(&ut))?;
                    for (b, val) in table.iter().enumerate() {
                        per_block[b][j] = *val;
                    }
                }
                let mut tilde_l1 = 0.0;
                for (b, &l) in blocks.iter().enumerate() {
                    tilde_l1 += 2f64.powf(l as f64 * 2.5) * trapezoid(&per_block[b], heat_dt);
                }
                c_heat = c_heat.max(tilde_l1 / denom);
            }
            rep.samples += 1;
        }
        rep.require(
            embed_ok,
            format!("{res}: embedding inequalities exact per sample"),
        );
        rep.fit("derivative_equivalence_C", &res, c_deriv);
        rep.fit("product_law_uniform_C", &res, c_prod);
        rep.fit("product_law_critical_C", &res, c_crit);
        rep.fit("composition_C", &res, c_comp);
        rep.fit("heat_smoothing_C", &res, c_heat);

        // Time-norm comparison, strict in both directions on decay data with
        // block maxima at different times.
        let nsamp = 33;
        let dt = 1.0 / (nsamp - 1) as f64;
        let mut mink_ok = true;
        for &(a, b) in &mink_amps {
            let series: Vec<RealField> = (0..nsamp)
                .map(|i| {
                    let t = i as f64 * dt;
                    RealField::from_fn(g, "u", |x| {
                        a * (-t).exp() * x[0].cos()
                            + b * (1.0 - (-5.0 * t).exp()) * (3.0 * x[0]).sin()
                            + 0.1 * (-49.0 * t).exp() * (7.0 * x[0]).cos()
                    })
                    .unwrap()
                })
                .collect();
            let spec22 = BesovSpec::new(0.5, Exponent::Finite(2.0), Exponent::Finite(2.0))?;
            let tilde = mult
                .chemin_lerner_norm(&series, dt, Exponent::Finite(1.0), spec22)?
                .aggregate;
            let plain = time_lp_of_besov(&mult, &series, dt, Exponent::Finite(1.0), spec22)?;
            mink_ok &= tilde < plain;
            let spec21 = BesovSpec::l2_summed(0.5);
            let tilde_sup = mult
                .chemin_lerner_norm(&series, dt, Exponent::Infinity, spec21)?
                .aggregate;
            let plain_sup = time_lp_of_besov(&mult, &series, dt, Exponent::Infinity, spec21)?;
            mink_ok &= tilde_sup > plain_sup;
            rep.samples += 1;
        }
        rep.require(
            mink_ok,
            format!("{res}: time-norm comparison strict per sample"),
        );
    }
    rep.require_stable("derivative_equivalence_C", 0.2);
    rep.require_stable("product_law_uniform_C", 0.2);
    rep.require_stable("product_law_critical_C", 0.2);
    rep.require_stable("composition_C", 0.2);
    rep.require_stable("heat_smoothing_C", 0.2);
    Ok(rep)
}

fn rng_f64(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    rng.random_range(0.0..1.0)
}
