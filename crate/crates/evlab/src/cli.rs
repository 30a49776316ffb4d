//! Configuration parsing, initial-data generation, and the drivers behind
//! the `evlab` binary's subcommands.
//!
//! A run is described by one JSON file; unknown keys are rejected and the
//! constrained-coefficient relation is validated, never silently repaired.
//! All randomness flows from the single seed in the `initial` block. Every
//! output directory receives a manifest (config copy, crate version, seed)
//! from which the run can be reproduced byte-for-byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checks;
use crate::error::{Error, Result};
use crate::grid::{Grid, RealField, SpectralField};
use crate::io;
use crate::littlewood_paley::{BesovSpec, DyadicMultiplier, NormReport};
use crate::models::{self, MomentumState, Params, PrimitiveState, ViscosityForm};
use crate::picard::{self, working_spec};
use crate::propagators::{
    evolve_momentum, evolve_primitive, Scheme, StepperConfig, System, Termination,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default = "default_system")]
    pub system: System,
    pub params: ParamsConfig,
    pub initial: InitialConfig,
    pub stepper: StepperBlock,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub picard: PicardBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
}

fn default_system() -> System {
    System::Momentum
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    #[serde(default = "default_length")]
    pub length: f64,
}

fn default_length() -> f64 {
    2.0 * std::f64::consts::PI
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(
            self.dim,
            &vec![self.n; self.dim],
            &vec![self.length; self.dim],
        )
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub mu: f64,
    pub r: f64,
    #[serde(default = "default_true")]
    pub constrained: bool,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub fr: Option<f64>,
    #[serde(default = "default_viscosity")]
    pub viscosity_form: ViscosityForm,
    #[serde(default = "default_floor")]
    pub vacuum_floor: f64,
}

fn default_true() -> bool {
    true
}

fn default_viscosity() -> ViscosityForm {
    ViscosityForm::Gradient
}

fn default_floor() -> f64 {
    models::DEFAULT_VACUUM_FLOOR
}

impl ParamsConfig {
    pub fn build(&self) -> Result<Params> {
        let p = if self.constrained {
            let p = Params::constrained(self.mu, self.r)?;
            if let Some(kappa) = self.kappa {
                if kappa != p.kappa {
                    return Err(Error::Config(format!(
                        "constrained mode requires kappa = mu^2 = {}, got {kappa}",
                        p.kappa
                    )));
                }
            }
            if let Some(fr) = self.fr {
                let claimed = 1.0 / (fr * fr);
                if (claimed - p.inv_fr2()).abs() > 1e-12 * p.inv_fr2().max(1e-300) {
                    return Err(Error::Config(format!(
                        "constrained mode requires 1/Fr^2 = r*mu = {}, got {claimed}",
                        p.inv_fr2()
                    )));
                }
            }
            p
        } else {
            let kappa = self.kappa.ok_or_else(|| {
                Error::Config("unconstrained mode needs an explicit kappa".into())
            })?;
            let fr = self
                .fr
                .ok_or_else(|| Error::Config("unconstrained mode needs an explicit fr".into()))?;
            Params::unconstrained(self.mu, self.r, kappa, fr)?
        };
        if !(self.vacuum_floor.is_finite() && self.vacuum_floor > 0.0) {
            return Err(Error::Config(format!(
                "vacuum_floor must be positive, got {}",
                self.vacuum_floor
            )));
        }
        Ok(p.with_viscosity_form(self.viscosity_form)
            .with_vacuum_floor(self.vacuum_floor))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub seed: u64,
    pub generator: GeneratorSpec,
}

/// One cosine mode a * cos(k . x + phase).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Explicit cosine modes for q and for each momentum component.
    Modes {
        #[serde(default)]
        q_modes: Vec<ModeSpec>,
        #[serde(default)]
        m_modes: Vec<Vec<ModeSpec>>,
    },
    /// Seeded random band-limited fields, normalized in the max norm.
    RandomBand {
        k_min: i64,
        k_max: i64,
        amplitude_q: f64,
        amplitude_m: f64,
    },
    /// h0 = 1 + a cos(k . x) with an optional small momentum.
    LargeGradient {
        a: f64,
        k: Vec<i64>,
        #[serde(default)]
        momentum: Vec<Vec<ModeSpec>>,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default)]
    pub besov: Vec<BesovSpec>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperBlock {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
}

fn default_scheme() -> Scheme {
    Scheme::Etdrk2
}

fn default_stride() -> usize {
    1
}

impl StepperBlock {
    pub fn build(&self) -> Result<StepperConfig> {
        StepperConfig::new(self.dt, self.t_end, self.scheme, self.output_stride)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardBlock {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Working-norm window; defaults to min(1, 3/r).
    #[serde(default)]
    pub t_window: Option<f64>,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    16
}

impl Default for PicardBlock {
    fn default() -> Self {
        PicardBlock {
            tol: default_tol(),
            max_iter: default_max_iter(),
            t_window: None,
        }
    }
}

impl PicardBlock {
    /// Stepper over the fixed-point window (dt from the main stepper block).
    pub fn build(&self, stepper: &StepperBlock, params: &Params) -> Result<StepperConfig> {
        let window = self.t_window.unwrap_or_else(|| {
            if params.r > 0.0 {
                1.0f64.min(3.0 / params.r)
            } else {
                1.0
            }
        });
        let steps = (window / stepper.dt).round().max(1.0);
        StepperConfig::new(stepper.dt, steps * stepper.dt, stepper.scheme, 1)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub amplitudes: Vec<f64>,
    /// Depth families h0 = 1 + a_q cos(k . x).
    pub families: Vec<FamilyBlock>,
    /// Momentum direction modes per component (normalized internally).
    pub direction: Vec<Vec<ModeSpec>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyBlock {
    pub label: String,
    pub a_q: f64,
    pub k: Vec<i64>,
}

/// Parse and validate a config file; collects all violations found.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut violations = Vec::new();
    let mut push = |e: Error| {
        violations.push(match e {
            Error::Config(m) => m,
            other => other.to_string(),
        })
    };
    if let Err(e) = cfg.grid.build() {
        push(e);
    }
    if let Err(e) = cfg.params.build() {
        push(e);
    }
    if let Err(e) = cfg.stepper.build() {
        push(e);
    }
    if let Err(e) = validate_generator(&cfg) {
        push(e);
    }
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(violations.join("; ")))
    }
}

fn validate_generator(cfg: &RunConfig) -> Result<()> {
    let dim = cfg.grid.dim;
    let check_modes = |modes: &[ModeSpec], what: &str| -> Result<f64> {
        let mut total = 0.0;
        for m in modes {
            if m.k.len() != dim {
                return Err(Error::Config(format!(
                    "{what}: wavevector {:?} has {} entries, grid dim is {dim}",
                    m.k,
                    m.k.len()
                )));
            }
            total += m.amplitude.abs();
        }
        Ok(total)
    };
    match &cfg.initial.generator {
        GeneratorSpec::Modes { q_modes, m_modes } => {
            let total = check_modes(q_modes, "q_modes")?;
            if total >= 1.0 {
                return Err(Error::Config(format!(
                    "depth amplitudes sum to {total} >= 1; min h0 would not stay positive"
                )));
            }
            if !m_modes.is_empty() && m_modes.len() != dim {
                return Err(Error::Config(format!(
                    "m_modes needs one list per component ({dim}), got {}",
                    m_modes.len()
                )));
            }
            for comp in m_modes {
                check_modes(comp, "m_modes")?;
            }
        }
        GeneratorSpec::RandomBand {
            k_min,
            k_max,
            amplitude_q,
            ..
        } => {
            if *k_min < 1 || k_max < k_min {
                return Err(Error::Config(format!(
                    "random band needs 1 <= k_min <= k_max, got [{k_min}, {k_max}]"
                )));
            }
            if amplitude_q.abs() >= 1.0 {
                return Err(Error::Config(format!(
                    "depth amplitude {amplitude_q} >= 1; min h0 would not stay positive"
                )));
            }
        }
        GeneratorSpec::LargeGradient { a, k, momentum } => {
            if a.abs() >= 1.0 {
                return Err(Error::Config(format!(
                    "large-gradient amplitude {a} >= 1; min h0 would not stay positive"
                )));
            }
            if k.len() != dim {
                return Err(Error::Config(format!(
                    "large-gradient wavevector {k:?} does not match dim {dim}"
                )));
            }
            if !momentum.is_empty() && momentum.len() != dim {
                return Err(Error::Config(format!(
                    "momentum spec needs one list per component ({dim}), got {}",
                    momentum.len()
                )));
            }
            for comp in momentum {
                check_modes(comp, "momentum")?;
            }
        }
    }
    Ok(())
}

fn cosine_field(grid: Grid, modes: &[ModeSpec], label: &str) -> Result<RealField> {
    RealField::from_fn(grid, label, |x| {
        modes
            .iter()
            .map(|m| {
                let phase: f64 =
                    m.k.iter()
                        .zip(x)
                        .zip(grid.lengths())
                        .map(|((&k, &xi), &l)| k as f64 * 2.0 * std::f64::consts::PI / l * xi)
                        .sum();
                m.amplitude * (phase + m.phase).cos()
            })
            .sum()
    })
}

/// Seeded random band-limited field: independent coefficients on the integer
/// modes with k_min <= |k| <= k_max, Hermitian by construction, normalized to
/// the requested max norm. Returns zero for zero amplitude.
pub fn random_band_field(
    grid: Grid,
    k_min: i64,
    k_max: i64,
    amplitude: f64,
    rng: &mut ChaCha8Rng,
    label: &str,
) -> Result<RealField> {
    let mut spec = SpectralField::zeros(grid, label);
    let total = grid.total_points();
    for flat in 0..total {
        let conj = grid.conjugate_index(flat);
        if conj < flat {
            continue;
        }
        let multi = grid.multi_index(flat);
        let mut ksq = 0.0f64;
        for (a, &n) in grid.points().iter().enumerate() {
            let k = Grid::freq_index(multi[a], n) as f64;
            ksq += k * k;
        }
        let kmag = ksq.sqrt();
        if kmag < k_min as f64 || kmag > k_max as f64 {
            continue;
        }
        let re: f64 = rng.random_range(-1.0..1.0);
        let im: f64 = rng.random_range(-1.0..1.0);
        if conj == flat {
            spec.coeffs[flat] = num_complex::Complex64::new(re, 0.0);
        } else {
            spec.coeffs[flat] = num_complex::Complex64::new(re, im);
            spec.coeffs[conj] = num_complex::Complex64::new(re, -im);
        }
    }
    let field = spec.to_real()?;
    let max = field.linf();
    if max == 0.0 || amplitude == 0.0 {
        return Ok(RealField::zeros(grid, label));
    }
    Ok(field.scaled(amplitude / max))
}

/// Both state views of the generated data plus their critical norms.
pub struct GeneratedInitial {
    pub momentum: MomentumState,
    pub primitive: PrimitiveState,
    pub q0_norm: NormReport,
    pub m0_norm: NormReport,
}

/// Build the initial data; both representations are emitted consistently
/// through the effective-velocity maps and reported with the Besov norms of
/// (q0, m0) so a "large q0, small m0" run is documented per run.
pub fn generate_initial(
    initial: &InitialConfig,
    grid: Grid,
    params: &Params,
) -> Result<GeneratedInitial> {
    let dim = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(initial.seed);
    let (q, m): (RealField, Vec<RealField>) = match &initial.generator {
        GeneratorSpec::Modes { q_modes, m_modes } => {
            let q = cosine_field(grid, q_modes, "q")?;
            let m = (0..dim)
                .map(|i| {
                    let modes = m_modes.get(i).map(|v| v.as_slice()).unwrap_or(&[]);
                    cosine_field(grid, modes, &format!("m{i}"))
                })
                .collect::<Result<_>>()?;
            (q, m)
        }
        GeneratorSpec::RandomBand {
            k_min,
            k_max,
            amplitude_q,
            amplitude_m,
        } => {
            let q = random_band_field(grid, *k_min, *k_max, *amplitude_q, &mut rng, "q")?;
            let m = (0..dim)
                .map(|i| {
                    random_band_field(
                        grid,
                        *k_min,
                        *k_max,
                        *amplitude_m,
                        &mut rng,
                        &format!("m{i}"),
                    )
                })
                .collect::<Result<_>>()?;
            (q, m)
        }
        GeneratorSpec::LargeGradient { a, k, momentum } => {
            let q = cosine_field(
                grid,
                &[ModeSpec {
                    k: k.clone(),
                    amplitude: *a,
                    phase: 0.0,
                }],
                "q",
            )?;
            let m = (0..dim)
                .map(|i| {
                    let modes = momentum.get(i).map(|v| v.as_slice()).unwrap_or(&[]);
                    cosine_field(grid, modes, &format!("m{i}"))
                })
                .collect::<Result<_>>()?;
            (q, m)
        }
    };
    let momentum = MomentumState::new(q, m)?;
    let primitive = models::from_effective(&momentum.to_transformed(params.vacuum_floor)?, params)?;
    let mult = DyadicMultiplier::build(grid)?;
    let (s_q, _, s_m, _) = working_spec(dim);
    let q0_norm = mult.besov_norm(&momentum.q, BesovSpec::l2_summed(s_q))?;
    let m0_norm = mult.besov_norm_vector(&momentum.m, BesovSpec::l2_summed(s_m))?;
    Ok(GeneratedInitial {
        momentum,
        primitive,
        q0_norm,
        m0_norm,
    })
}

/// Everything needed to reproduce an output directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
}

fn write_manifest(out: &Path, cfg: &RunConfig) -> Result<()> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.initial.seed,
        config: cfg.clone(),
    };
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

fn besov_columns(
    mult: &DyadicMultiplier,
    specs: &[BesovSpec],
    q: &RealField,
    m: &[RealField],
) -> Result<Vec<f64>> {
    let mut cols = Vec::with_capacity(2 * specs.len());
    for spec in specs {
        cols.push(mult.besov_norm(q, *spec)?.aggregate);
        cols.push(mult.besov_norm_vector(m, *spec)?.aggregate);
    }
    Ok(cols)
}

/// Run `simulate`: evolve the configured system, write snapshots, the
/// diagnostics CSV, the termination record, and the manifest.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Termination> {
    fs::create_dir_all(out)?;
    let grid = cfg.grid.build()?;
    let params = cfg.params.build()?;
    let stepper = cfg.stepper.build()?;
    let init = generate_initial(&cfg.initial, grid, &params)?;
    let mult = DyadicMultiplier::build(grid)?;
    let specs = &cfg.diagnostics.besov;

    let mut header: Vec<String> = ["t", "energy", "mass", "min_h", "cfl"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for spec in specs {
        header.push(format!("depth_{}", spec.tag()));
        header.push(format!("momentum_{}", spec.tag()));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();

    let mut rows: Vec<Vec<String>> = Vec::new();
    let termination = match cfg.system {
        System::Momentum => {
            let traj = evolve_momentum(&init.momentum, &params, &stepper)?;
            for ((idx, state), row) in traj.states.iter().enumerate().zip(&traj.diagnostics) {
                io::write_field(&out.join(format!("snap_{idx:05}_q.evf1")), &state.q)?;
                for (i, mc) in state.m.iter().enumerate() {
                    io::write_field(&out.join(format!("snap_{idx:05}_m{i}.evf1")), mc)?;
                }
                let mut r = vec![
                    io::fmt_float(row.t),
                    io::fmt_float(row.energy),
                    io::fmt_float(row.mass),
                    io::fmt_float(row.min_h),
                    io::fmt_float(row.cfl),
                ];
                for v in besov_columns(&mult, specs, &state.q, &state.m)? {
                    r.push(io::fmt_float(v));
                }
                rows.push(r);
            }
            traj.termination
        }
        System::Primitive => {
            let traj = evolve_primitive(&init.primitive, &params, &stepper)?;
            for ((idx, state), row) in traj.states.iter().enumerate().zip(&traj.diagnostics) {
                io::write_field(&out.join(format!("snap_{idx:05}_h.evf1")), &state.h)?;
                for (i, uc) in state.u.iter().enumerate() {
                    io::write_field(&out.join(format!("snap_{idx:05}_u{i}.evf1")), uc)?;
                }
                let q = state.h.map("q", |v| v - 1.0);
                let hu: Vec<RealField> = state
                    .u
                    .iter()
                    .enumerate()
                    .map(|(i, ui)| state.h.zip_map(ui, &format!("hu{i}"), |a, b| a * b))
                    .collect::<Result<_>>()?;
                let mut r = vec![
                    io::fmt_float(row.t),
                    io::fmt_float(row.energy),
                    io::fmt_float(row.mass),
                    io::fmt_float(row.min_h),
                    io::fmt_float(row.cfl),
                ];
                for v in besov_columns(&mult, specs, &q, &hu)? {
                    r.push(io::fmt_float(v));
                }
                rows.push(r);
            }
            traj.termination
        }
    };
    io::write_csv(&out.join("diagnostics.csv"), &header_refs, &rows)?;
    fs::write(
        out.join("termination.json"),
        serde_json::to_string_pretty(&termination)?,
    )?;
    write_manifest(out, cfg)?;
    Ok(termination)
}

/// Run `besov`: norm reports of a stored snapshot for every configured spec.
pub fn cmd_besov(
    cfg: &RunConfig,
    field_path: &Path,
    out: Option<&Path>,
) -> Result<Vec<NormReport>> {
    let field = io::read_field(field_path)?;
    let mult = DyadicMultiplier::build(field.grid)?;
    let mut specs = cfg.diagnostics.besov.clone();
    if specs.is_empty() {
        let (s_q, _, _, _) = working_spec(field.grid.dim());
        specs.push(BesovSpec::l2_summed(s_q));
    }
    let reports: Vec<NormReport> = specs
        .iter()
        .map(|s| mult.besov_norm(&field, *s))
        .collect::<Result<_>>()?;
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        fs::write(
            out.join("norms.json"),
            serde_json::to_string_pretty(&reports)?,
        )?;
        write_manifest(out, cfg)?;
    }
    Ok(reports)
}

/// Run `picard`: fixed-point iteration from the configured data; writes the
/// trace and the final iterate.
pub fn cmd_picard(cfg: &RunConfig, out: &Path) -> Result<picard::IterationTrace> {
    fs::create_dir_all(out)?;
    let grid = cfg.grid.build()?;
    let params = cfg.params.build()?;
    let stepper = cfg.picard.build(&cfg.stepper, &params)?;
    let init = generate_initial(&cfg.initial, grid, &params)?;
    let result = picard::run_picard(
        &init.momentum.q,
        &init.momentum.m,
        &params,
        &stepper,
        cfg.picard.tol,
        cfg.picard.max_iter,
    )?;
    fs::write(
        out.join("trace.json"),
        serde_json::to_string_pretty(&result.trace)?,
    )?;
    let last = result.trajectory.len() - 1;
    io::write_field(&out.join("fixed_point_q.evf1"), &result.trajectory.q[last])?;
    for (i, mc) in result.trajectory.m[last].iter().enumerate() {
        io::write_field(&out.join(format!("fixed_point_m{i}.evf1")), mc)?;
    }
    write_manifest(out, cfg)?;
    Ok(result.trace)
}

/// Run `sweep`: amplitude sweep across the configured depth families; writes
/// a CSV of all rows plus a JSON bracket summary.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<picard::FamilySweep>> {
    fs::create_dir_all(out)?;
    let grid = cfg.grid.build()?;
    let params = cfg.params.build()?;
    let stepper = cfg.picard.build(&cfg.stepper, &params)?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep block missing from config".into()))?;
    let families: Vec<(String, RealField)> = sweep
        .families
        .iter()
        .map(|f| {
            let q0 = cosine_field(
                grid,
                &[ModeSpec {
                    k: f.k.clone(),
                    amplitude: f.a_q,
                    phase: 0.0,
                }],
                "q0",
            )?;
            Ok((f.label.clone(), q0))
        })
        .collect::<Result<_>>()?;
    let direction: Vec<RealField> = (0..grid.dim())
        .map(|i| {
            let modes = sweep.direction.get(i).map(|v| v.as_slice()).unwrap_or(&[]);
            cosine_field(grid, modes, &format!("dir{i}"))
        })
        .collect::<Result<_>>()?;
    let results = picard::threshold_sweep(
        &families,
        &direction,
        &sweep.amplitudes,
        &params,
        &stepper,
        cfg.picard.tol,
        cfg.picard.max_iter,
    )?;

    let header = [
        "family",
        "min_h0",
        "amplitude",
        "outcome",
        "iterations",
        "max_ratio",
        "final_q_norm",
        "final_m_norm",
        "min_h",
    ];
    let mut rows = Vec::new();
    for fam in &results {
        for row in &fam.rows {
            rows.push(vec![
                fam.label.clone(),
                io::fmt_float(fam.min_h0),
                io::fmt_float(row.amplitude),
                format!("{:?}", row.outcome).to_lowercase(),
                row.iterations.to_string(),
                row.max_ratio.map(io::fmt_float).unwrap_or_default(),
                io::fmt_float(row.final_q_norm),
                io::fmt_float(row.final_m_norm),
                io::fmt_float(row.min_depth),
            ]);
        }
    }
    io::write_csv(&out.join("sweep.csv"), &header, &rows)?;
    fs::write(
        out.join("sweep.json"),
        serde_json::to_string_pretty(&results)?,
    )?;
    write_manifest(out, cfg)?;
    Ok(results)
}

/// Run `verify`: execute the named check suite (optionally a single check),
/// write one JSON per check, print a summary table, report overall success.
pub fn cmd_verify(seed: u64, only: Option<&str>, out: Option<&Path>) -> Result<bool> {
    let reports = checks::run_all(seed, only)?;
    if reports.is_empty() {
        return Err(Error::Config(format!(
            "no check matches {:?}; known: {}",
            only,
            checks::check_names().join(", ")
        )));
    }
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        for report in &reports {
            fs::write(
                out.join(format!("check_{}.json", report.name)),
                serde_json::to_string_pretty(report)?,
            )?;
        }
    }
    let mut all = true;
    println!("{:<22} {:>8}  details", "check", "verdict");
    for report in &reports {
        all &= report.verdict;
        println!(
            "{:<22} {:>8}  {}",
            report.name,
            if report.verdict { "pass" } else { "FAIL" },
            report.summary()
        );
    }
    Ok(all)
}

/// Re-run a manifest into a fresh directory (reproducibility hook).
pub fn reproduce(manifest_path: &Path, out: &Path) -> Result<Termination> {
    let text = fs::read_to_string(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", manifest_path.display())))?;
    cmd_simulate(&manifest.config, out)
}

/// Stable ordering helper used by reports.
pub fn sorted_map<K: Ord, V>(items: impl IntoIterator<Item = (K, V)>) -> BTreeMap<K, V> {
    items.into_iter().collect()
}
