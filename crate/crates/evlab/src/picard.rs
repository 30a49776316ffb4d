//! Constructive fixed-point iteration for the momentum system.
//!
//! The scheme mirrors the mild-solution construction: a linear seed
//!
//!   m0(t) = damped heat flow of m_0,
//!   q0(t) = heat flow of q_0 driven by the source -div m0,
//!
//! then repeated linear solves with the quadratic source frozen from the
//! previous iterate,
//!
//!   qbar, mbar solving the same linear system with source G^n = -div(m^n/h^n (x) m^n),
//!   (q^{n+1}, m^{n+1}) = (q0 + qbar^{n+1}, m0 + mbar^{n+1}).
//!
//! Iterates are measured in one composite working norm (both the induction
//! bound and the contraction ratios use it):
//!
//!   ||q||_{L~inf_T(B^{N/2}_{2,1})} + ||q||_{L1_T(B^{N/2+2}_{2,1})}
//!   + ||m||_{L~inf_T(B^{N/2-1}_{2,1})}
//!   + ||m||_{L1_T(B^{N/2+1}_{2,1})} + ||m||_{L1_T(B^{N/2-1}_{2,1})},
//!
//! where the intersection norm of the last pair is taken as the sum of its
//! two pieces and every piece is reported separately.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{RealField, SpectralField};
use crate::littlewood_paley::{BesovSpec, DyadicMultiplier};
use crate::models::{self, MomentumState, Params};
use crate::propagators::{
    damped_semigroup_spectral, duhamel_trajectory_spectral, evolve_momentum, StepperConfig,
    Termination,
};

/// A (q, m) trajectory sampled at every stepper time.
#[derive(Clone, Debug)]
pub struct TrajectoryPair {
    pub dt: f64,
    pub q: Vec<RealField>,
    pub m: Vec<Vec<RealField>>,
}

impl TrajectoryPair {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| i as f64 * self.dt).collect()
    }

    pub fn zeros_like(other: &TrajectoryPair) -> TrajectoryPair {
        let grid = other.q[0].grid;
        TrajectoryPair {
            dt: other.dt,
            q: other
                .q
                .iter()
                .map(|_| RealField::zeros(grid, "q"))
                .collect(),
            m: other
                .m
                .iter()
                .map(|mv| mv.iter().map(|_| RealField::zeros(grid, "m")).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &TrajectoryPair) -> Result<TrajectoryPair> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &TrajectoryPair) -> Result<TrajectoryPair> {
        self.combine(other, |a, b| a - b)
    }

    fn combine(
        &self,
        other: &TrajectoryPair,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<TrajectoryPair> {
        if self.len() != other.len() || self.dt != other.dt {
            return Err(Error::SamplingMismatch(
                "trajectory pairs sampled differently".into(),
            ));
        }
        let q = self
            .q
            .iter()
            .zip(&other.q)
            .map(|(a, b)| a.zip_map(b, &a.label.clone(), &f))
            .collect::<Result<_>>()?;
        let m = self
            .m
            .iter()
            .zip(&other.m)
            .map(|(av, bv)| {
                av.iter()
                    .zip(bv)
                    .map(|(a, b)| a.zip_map(b, &a.label.clone(), &f))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(TrajectoryPair { dt: self.dt, q, m })
    }

    /// min over samples of min(1 + q).
    pub fn min_depth(&self) -> f64 {
        self.q
            .iter()
            .map(|q| 1.0 + q.min())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn final_state(&self) -> Result<MomentumState> {
        MomentumState::new(
            self.q.last().expect("nonempty trajectory").clone(),
            self.m.last().expect("nonempty trajectory").clone(),
        )
    }
}

/// Composite trajectory norm; `total` is the sum of the five pieces.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WorkingNorm {
    /// sup-in-time of the blockwise q norm at regularity N/2.
    pub q_sup: f64,
    /// time integral of the q norm at regularity N/2 + 2.
    pub q_smooth_l1: f64,
    /// sup-in-time of the blockwise m norm at regularity N/2 - 1.
    pub m_sup: f64,
    /// time integral of the m norm at regularity N/2 + 1.
    pub m_smooth_l1: f64,
    /// time integral of the m norm at regularity N/2 - 1.
    pub m_rough_l1: f64,
    pub total: f64,
}

impl WorkingNorm {
    pub fn zero() -> Self {
        WorkingNorm {
            q_sup: 0.0,
            q_smooth_l1: 0.0,
            m_sup: 0.0,
            m_smooth_l1: 0.0,
            m_rough_l1: 0.0,
            total: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// Regularity indices of the working spaces in dimension N.
pub fn working_spec(dim: usize) -> (f64, f64, f64, f64) {
    let half = dim as f64 / 2.0;
    (half, half + 2.0, half - 1.0, half + 1.0)
}

/// Evaluate the composite norm of a trajectory pair with one spectral pass
/// per sample.
pub fn working_norm(pair: &TrajectoryPair, mult: &DyadicMultiplier) -> Result<WorkingNorm> {
    if pair.is_empty() {
        return Err(Error::EmptySeries);
    }
    let dim = pair.q[0].grid.dim();
    let (s_q, s_q_high, s_m, s_m_high) = working_spec(dim);
    let blocks: Vec<i32> = mult.blocks().collect();
    let nblocks = blocks.len();
    let nsamp = pair.len();

    let mut q_blocks = vec![vec![0.0; nsamp]; nblocks];
    let mut m_blocks = vec![vec![0.0; nsamp]; nblocks];
    for j in 0..nsamp {
        let qs = pair.q[j].to_spectral()?;
        let q_table = mult.block_l2_table(std::slice::from_ref(&qs))?;
        let ms: Vec<SpectralField> = pair.m[j]
            .iter()
            .map(|f| f.to_spectral())
            .collect::<Result<_>>()?;
        let m_table = mult.block_l2_table(&ms)?;
        for b in 0..nblocks {
            q_blocks[b][j] = q_table[b];
            m_blocks[b][j] = m_table[b];
        }
    }

    let weight = |l: i32, s: f64| (2f64).powf(l as f64 * s);
    let sup = |series: &[f64]| series.iter().fold(0.0f64, |m, &v| m.max(v));
    let trapz = |series: &[f64]| crate::littlewood_paley::trapezoid(series, pair.dt);

    let mut q_sup = 0.0;
    let mut m_sup = 0.0;
    for (b, &l) in blocks.iter().enumerate() {
        q_sup += weight(l, s_q) * sup(&q_blocks[b]);
        m_sup += weight(l, s_m) * sup(&m_blocks[b]);
    }
    // Plain L1-in-time of the pointwise block sums.
    let mut q_high_series = vec![0.0; nsamp];
    let mut m_high_series = vec![0.0; nsamp];
    let mut m_low_series = vec![0.0; nsamp];
    for j in 0..nsamp {
        for (b, &l) in blocks.iter().enumerate() {
            q_high_series[j] += weight(l, s_q_high) * q_blocks[b][j];
            m_high_series[j] += weight(l, s_m_high) * m_blocks[b][j];
            m_low_series[j] += weight(l, s_m) * m_blocks[b][j];
        }
    }
    let q_smooth_l1 = trapz(&q_high_series);
    let m_smooth_l1 = trapz(&m_high_series);
    let m_rough_l1 = trapz(&m_low_series);
    let total = q_sup + q_smooth_l1 + m_sup + m_smooth_l1 + m_rough_l1;
    Ok(WorkingNorm {
        q_sup,
        q_smooth_l1,
        m_sup,
        m_smooth_l1,
        m_rough_l1,
        total,
    })
}

/// Linear seed of the iteration: m0 by the damped semigroup, q0 by heat flow
/// plus the Duhamel integral with source -div m0.
pub fn linear_seed(
    q0: &RealField,
    m0: &[RealField],
    p: &Params,
    cfg: &StepperConfig,
) -> Result<TrajectoryPair> {
    p.require_constrained()?;
    cfg.validate()?;
    let grid = q0.grid;
    let steps = cfg.steps();
    let m0_hat: Vec<SpectralField> = m0
        .iter()
        .map(|f| Ok(f.to_spectral()?.dealiased()))
        .collect::<Result<_>>()?;
    let q0_hat = q0.to_spectral()?.dealiased();

    // Momentum decays mode-by-mode; sample it on the step grid.
    let mut m_samples: Vec<Vec<SpectralField>> = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        let t = j as f64 * cfg.dt;
        m_samples.push(
            m0_hat
                .iter()
                .map(|f| damped_semigroup_spectral(f, t, p.mu, p.r))
                .collect(),
        );
    }
    // Source of the depth equation: -div m0(t).
    let sources: Vec<SpectralField> = m_samples
        .iter()
        .map(|ms| {
            let mut s = SpectralField::zeros(grid, "div");
            for (j, mj) in ms.iter().enumerate() {
                let d = mj.derivative(j);
                for (a, b) in s.coeffs.iter_mut().zip(&d.coeffs) {
                    *a -= b;
                }
            }
            s
        })
        .collect();
    let q_traj = duhamel_trajectory_spectral(&q0_hat, &sources, cfg.dt, p.mu, 0.0)?;

    Ok(TrajectoryPair {
        dt: cfg.dt,
        q: q_traj.iter().map(|s| s.to_real()).collect::<Result<_>>()?,
        m: m_samples
            .iter()
            .map(|ms| ms.iter().map(|s| s.to_real()).collect::<Result<_>>())
            .collect::<Result<_>>()?,
    })
}

/// One iteration: solve the linear system with the source frozen from `prev`,
/// returning (next full iterate, barred correction).
///
/// Fails with a vacuum breach when min(1 + q^n) dips to the floor anywhere on
/// the sampled trajectory.
pub fn picard_step(
    prev: &TrajectoryPair,
    seed: &TrajectoryPair,
    p: &Params,
    cfg: &StepperConfig,
) -> Result<(TrajectoryPair, TrajectoryPair)> {
    let grid = prev.q[0].grid;
    let dim = grid.dim();
    let nsamp = prev.len();
    if nsamp != cfg.steps() + 1 {
        return Err(Error::SamplingMismatch(format!(
            "iterate has {} samples, stepper expects {}",
            nsamp,
            cfg.steps() + 1
        )));
    }

    // G^n at every sample.
    let mut g_samples: Vec<Vec<SpectralField>> = Vec::with_capacity(nsamp);
    for j in 0..nsamp {
        g_samples.push(models::g_nonlinear_spectral(&prev.q[j], &prev.m[j], p)?);
    }

    // mbar component-wise from zero data.
    let zero = SpectralField::zeros(grid, "0");
    let mut mbar_hat: Vec<Vec<SpectralField>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let src: Vec<SpectralField> = g_samples.iter().map(|g| g[i].clone()).collect();
        mbar_hat.push(duhamel_trajectory_spectral(&zero, &src, cfg.dt, p.mu, p.r)?);
    }
    // qbar driven by -div mbar.
    let q_sources: Vec<SpectralField> = (0..nsamp)
        .map(|j| {
            let mut s = SpectralField::zeros(grid, "div");
            for (i, mb) in mbar_hat.iter().enumerate() {
                let d = mb[j].derivative(i);
                for (a, b) in s.coeffs.iter_mut().zip(&d.coeffs) {
                    *a -= b;
                }
            }
            s
        })
        .collect();
    let qbar_hat = duhamel_trajectory_spectral(&zero, &q_sources, cfg.dt, p.mu, 0.0)?;

    let barred = TrajectoryPair {
        dt: cfg.dt,
        q: qbar_hat
            .iter()
            .map(|s| s.to_real())
            .collect::<Result<_>>()?,
        m: (0..nsamp)
            .map(|j| {
                (0..dim)
                    .map(|i| mbar_hat[i][j].to_real())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?,
    };
    let next = seed.add(&barred)?;
    Ok((next, barred))
}

/// Why an iteration run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    Stalled,
    Diverged,
    Vacuum,
}

/// One row of the iteration record.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TraceRow {
    pub iterate: usize,
    /// Working norm of the barred correction (qbar^n, mbar^n).
    pub barred: WorkingNorm,
    /// delta^n = ||(q^{n+1} - q^n, m^{n+1} - m^n)|| once two iterates exist.
    pub delta: Option<f64>,
    /// delta^n / delta^{n-1}, defined only when delta^{n-1} > 1e-14.
    pub ratio: Option<f64>,
}

/// Per-iterate norms, successive differences, contraction ratios, outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    pub outcome: Outcome,
    pub tol: f64,
    /// min over iterates and samples of min(1 + q).
    pub min_depth: f64,
    /// Trajectory distance between the fixed point and the time stepper,
    /// present on converged runs.
    pub residual_vs_stepper: Option<f64>,
}

impl IterationTrace {
    pub fn max_ratio(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.ratio)
            .fold(None, |m, v| Some(m.map_or(v, |x: f64| x.max(v))))
    }
}

/// Fixed point plus its trace.
#[derive(Clone, Debug)]
pub struct PicardResult {
    pub trajectory: TrajectoryPair,
    pub trace: IterationTrace,
}

const RATIO_FLOOR: f64 = 1e-14;
const STALL_WINDOW: usize = 5;
const STALL_BAND: (f64, f64) = (0.95, 1.05);
const DIVERGENCE_GROWTH: f64 = 1e3;

/// Classify a run from its successive-difference history.
///
/// `reached_tol` marks whether the last delta met the convergence criterion.
/// Convergence additionally demands monotone decrease of the deltas (checked
/// only while they sit above the ratio floor).
pub fn classify(deltas: &[f64], reached_tol: bool, exhausted: bool) -> Option<Outcome> {
    if deltas.iter().any(|d| !d.is_finite()) {
        return Some(Outcome::Diverged);
    }
    if let Some(&first) = deltas.iter().find(|d| **d > RATIO_FLOOR) {
        if deltas.iter().any(|&d| d > DIVERGENCE_GROWTH * first) {
            return Some(Outcome::Diverged);
        }
    }
    let ratios: Vec<f64> = deltas
        .windows(2)
        .filter(|w| w[0] > RATIO_FLOOR)
        .map(|w| w[1] / w[0])
        .collect();
    if reached_tol {
        let monotone = ratios.iter().all(|&r| r <= 1.0 + 1e-9);
        return Some(if monotone {
            Outcome::Converged
        } else {
            Outcome::Stalled
        });
    }
    if ratios.len() >= STALL_WINDOW
        && ratios
            .iter()
            .rev()
            .take(STALL_WINDOW)
            .all(|&r| r >= STALL_BAND.0 && r <= STALL_BAND.1)
    {
        return Some(Outcome::Stalled);
    }
    if exhausted {
        let last = ratios.last().copied().unwrap_or(0.0);
        return Some(if last > STALL_BAND.1 {
            Outcome::Diverged
        } else {
            Outcome::Stalled
        });
    }
    None
}

/// Run the iteration until delta^n < tol * (1 + ||iterate||) or `max_iter`.
///
/// On convergence the fixed point is cross-validated against the time
/// stepper from the same data and the trajectory distance recorded.
pub fn run_picard(
    q0: &RealField,
    m0: &[RealField],
    p: &Params,
    cfg: &StepperConfig,
    tol: f64,
    max_iter: usize,
) -> Result<PicardResult> {
    let grid = q0.grid;
    let mult = DyadicMultiplier::build(grid)?;
    let seed = linear_seed(q0, m0, p, cfg)?;
    let mut prev = seed.clone();
    let mut prev_barred = TrajectoryPair::zeros_like(&seed);
    let mut min_depth = seed.min_depth();
    let mut rows = vec![TraceRow {
        iterate: 0,
        barred: WorkingNorm::zero(),
        delta: None,
        ratio: None,
    }];
    let mut deltas: Vec<f64> = Vec::new();
    let mut outcome = Outcome::Stalled;
    let mut converged = false;

    for n in 1..=max_iter {
        let (next, barred) = match picard_step(&prev, &seed, p, cfg) {
            Ok(v) => v,
            Err(Error::VacuumBreach { .. }) => {
                outcome = Outcome::Vacuum;
                rows.push(TraceRow {
                    iterate: n,
                    barred: WorkingNorm::zero(),
                    delta: None,
                    ratio: None,
                });
                return finish(prev, rows, outcome, tol, min_depth, None);
            }
            Err(e) => return Err(e),
        };
        let barred_norm = working_norm(&barred, &mult)?;
        let diff = barred.sub(&prev_barred)?;
        let delta = working_norm(&diff, &mult)?.total;
        let ratio = deltas
            .last()
            .filter(|&&d| d > RATIO_FLOOR)
            .map(|&d| delta / d);
        deltas.push(delta);
        min_depth = min_depth.min(next.min_depth());
        rows.push(TraceRow {
            iterate: n,
            barred: barred_norm,
            delta: Some(delta),
            ratio,
        });

        let iterate_norm = working_norm(&next, &mult)?.total;
        let reached = delta < tol * (1.0 + iterate_norm);
        prev = next;
        prev_barred = barred;
        if let Some(o) = classify(&deltas, reached, n == max_iter) {
            outcome = o;
            converged = o == Outcome::Converged;
            break;
        }
    }

    let residual = if converged {
        Some(stepper_residual(&prev, q0, m0, p, cfg)?)
    } else {
        None
    };
    finish(prev, rows, outcome, tol, min_depth, residual)
}

fn finish(
    trajectory: TrajectoryPair,
    rows: Vec<TraceRow>,
    outcome: Outcome,
    tol: f64,
    min_depth: f64,
    residual: Option<f64>,
) -> Result<PicardResult> {
    Ok(PicardResult {
        trajectory,
        trace: IterationTrace {
            rows,
            outcome,
            tol,
            min_depth,
            residual_vs_stepper: residual,
        },
    })
}

/// sup over samples of the L2 distance between a fixed point and the
/// trajectory of the exponential time stepper from the same data.
fn stepper_residual(
    fixed: &TrajectoryPair,
    q0: &RealField,
    m0: &[RealField],
    p: &Params,
    cfg: &StepperConfig,
) -> Result<f64> {
    let state0 = MomentumState::new(q0.clone(), m0.to_vec())?;
    let dense = StepperConfig {
        output_stride: 1,
        ..*cfg
    };
    let traj = evolve_momentum(&state0, p, &dense)?;
    if traj.termination != Termination::Completed {
        return Ok(f64::NAN);
    }
    let mut worst = 0.0f64;
    for (j, state) in traj.states.iter().enumerate() {
        let mut d = state.q.sub(&fixed.q[j])?.l2();
        for (a, b) in state.m.iter().zip(&fixed.m[j]) {
            d += a.sub(b)?.l2();
        }
        worst = worst.max(d);
    }
    Ok(worst)
}

/// One amplitude of a threshold sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub amplitude: f64,
    pub outcome: Outcome,
    pub iterations: usize,
    pub max_ratio: Option<f64>,
    pub final_q_norm: f64,
    pub final_m_norm: f64,
    pub min_depth: f64,
}

/// Sweep result for one initial-depth family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilySweep {
    pub label: String,
    pub min_h0: f64,
    pub q0_norm: f64,
    pub rows: Vec<SweepRow>,
    /// Largest amplitude that converged (bracket lower end).
    pub largest_converged: Option<f64>,
    /// Smallest amplitude that failed (bracket upper end).
    pub smallest_failed: Option<f64>,
    /// Amplitudes above a failure that nevertheless converged.
    pub monotone_violations: Vec<f64>,
}

/// Sweep the momentum amplitude along a fixed direction for each depth family.
///
/// `m_direction` is normalized to unit B^{N/2-1}_{2,1} norm so the amplitude
/// is the momentum norm itself. Amplitudes must be sorted ascending; failures
/// are recorded as data, never as errors.
pub fn threshold_sweep(
    families: &[(String, RealField)],
    m_direction: &[RealField],
    amplitudes: &[f64],
    p: &Params,
    cfg: &StepperConfig,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<FamilySweep>> {
    if amplitudes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams(
            "sweep amplitudes must be strictly ascending".into(),
        ));
    }
    let grid = m_direction
        .first()
        .ok_or_else(|| Error::InvalidState("empty sweep direction".into()))?
        .grid;
    let mult = DyadicMultiplier::build(grid)?;
    let (s_q, _, s_m, _) = working_spec(grid.dim());
    let dir_norm = mult
        .besov_norm_vector(m_direction, BesovSpec::l2_summed(s_m))?
        .aggregate;
    if dir_norm <= 0.0 {
        return Err(Error::InvalidState("sweep direction has zero norm".into()));
    }
    let unit: Vec<RealField> = m_direction
        .iter()
        .map(|f| f.scaled(1.0 / dir_norm))
        .collect();

    let mut out = Vec::with_capacity(families.len());
    for (label, q0) in families {
        let q0_norm = mult.besov_norm(q0, BesovSpec::l2_summed(s_q))?.aggregate;
        let mut rows = Vec::with_capacity(amplitudes.len());
        let mut largest_converged = None;
        let mut smallest_failed = None;
        let mut monotone_violations = Vec::new();
        for &a in amplitudes {
            let m0: Vec<RealField> = unit.iter().map(|f| f.scaled(a)).collect();
            let result = run_picard(q0, &m0, p, cfg, tol, max_iter)?;
            let (fq, fm) = match result.trajectory.final_state() {
                Ok(s) => (
                    mult.besov_norm(&s.q, BesovSpec::l2_summed(s_q))?.aggregate,
                    mult.besov_norm_vector(&s.m, BesovSpec::l2_summed(s_m))?
                        .aggregate,
                ),
                Err(_) => (f64::NAN, f64::NAN),
            };
            let outcome = result.trace.outcome;
            if outcome == Outcome::Converged {
                if smallest_failed.is_some() {
                    monotone_violations.push(a);
                } else {
                    largest_converged = Some(a);
                }
            } else if smallest_failed.is_none() {
                smallest_failed = Some(a);
            }
            rows.push(SweepRow {
                amplitude: a,
                outcome,
                iterations: result.trace.rows.len() - 1,
                max_ratio: result.trace.max_ratio(),
                final_q_norm: fq,
                final_m_norm: fm,
                min_depth: result.trace.min_depth,
            });
        }
        out.push(FamilySweep {
            label: label.clone(),
            min_h0: 1.0 + q0.min(),
            q0_norm,
            rows,
            largest_converged,
            smallest_failed,
            monotone_violations,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::propagators::Scheme;
    use num_complex::Complex64;

    fn grid1(n: usize) -> Grid {
        Grid::uniform(1, n).unwrap()
    }

    fn params() -> Params {
        Params::constrained(0.1, 1.0).unwrap()
    }

    fn cfg(dt: f64, t: f64) -> StepperConfig {
        StepperConfig::new(dt, t, Scheme::Etdrk2, 1).unwrap()
    }

    #[test]
    fn seed_with_zero_momentum_is_heat_flow() {
        let g = grid1(64);
        let p = params();
        let q0 =
            RealField::from_fn(g, "q", |x| 0.5 * x[0].cos() + 0.2 * (3.0 * x[0]).sin()).unwrap();
        let m0 = vec![RealField::zeros(g, "m")];
        let c = cfg(0.02, 0.5);
        let seed = linear_seed(&q0, &m0, &p, &c).unwrap();
        for (j, t) in seed.times().iter().enumerate() {
            let exact = crate::propagators::heat_semigroup(&q0, *t, p.mu).unwrap();
            assert!(seed.q[j].sub(&exact).unwrap().linf() < 1e-12);
            assert!(seed.m[j][0].linf() < 1e-14);
        }
    }

    #[test]
    fn seed_single_mode_matches_scalar_recurrence() {
        // Independent oracle: the same exponential trapezoid run in scalar
        // arithmetic on the mode k = 1.
        let g = grid1(64);
        let p = params();
        let a = 0.3;
        let q0 = RealField::zeros(g, "q");
        let m0 = vec![RealField::from_fn(g, "m", |x| a * x[0].sin()).unwrap()];
        let c = cfg(0.02, 0.4);
        let seed = linear_seed(&q0, &m0, &p, &c).unwrap();
        // m is the exact decay of the single mode.
        for (j, t) in seed.times().iter().enumerate() {
            let exact =
                RealField::from_fn(g, "e", |x| a * (-(p.mu + p.r) * t).exp() * x[0].sin()).unwrap();
            assert!(seed.m[j][0].sub(&exact).unwrap().linf() < 1e-12);
        }
        // Scalar recurrence for the q coefficient at mode +1.
        let m_hat0 = Complex64::new(0.0, -a / 2.0);
        let lam_m = p.mu + p.r;
        let lam_q = p.mu;
        let ik = Complex64::new(0.0, 1.0);
        let zq = lam_q * c.dt;
        let (aw, bw) = crate::propagators::trapezoid_weights(zq);
        let decay_q = (-zq).exp();
        let mut qc = Complex64::new(0.0, 0.0);
        for (j, _) in seed.times().iter().enumerate() {
            let spec = seed.q[j].to_spectral().unwrap();
            assert!(
                (spec.coeffs[1] - qc).norm() < 1e-12,
                "sample {j}: {:?} vs {qc:?}",
                spec.coeffs[1]
            );
            // advance: source s(t) = -ik m_hat(t)
            let t0 = j as f64 * c.dt;
            let t1 = t0 + c.dt;
            let s0 = -ik * m_hat0 * (-lam_m * t0).exp();
            let s1 = -ik * m_hat0 * (-lam_m * t1).exp();
            qc = qc * decay_q + c.dt * (aw * s0 + bw * s1);
        }
    }

    #[test]
    fn seed_norm_controlled_by_data_norm() {
        // Working norm of the seed versus the Besov norms of the data; the
        // fitted constant must be stable under grid refinement.
        let p = params();
        let mut fitted = Vec::new();
        for n in [64usize, 128] {
            let g = grid1(n);
            let mult = DyadicMultiplier::build(g).unwrap();
            let mut worst: f64 = 0.0;
            for (aq, am, kq, km) in [
                (0.5, 0.1, 1.0, 2.0),
                (0.2, 0.3, 3.0, 1.0),
                (0.8, 0.05, 2.0, 5.0),
            ] {
                let q0 = RealField::from_fn(g, "q", |x| aq * (kq * x[0]).cos()).unwrap();
                let m0 = vec![RealField::from_fn(g, "m", |x| am * (km * x[0]).sin()).unwrap()];
                let c = cfg(0.02, 0.5);
                let seed = linear_seed(&q0, &m0, &p, &c).unwrap();
                let wn = working_norm(&seed, &mult).unwrap();
                let d = mult
                    .besov_norm(&q0, BesovSpec::l2_summed(0.5))
                    .unwrap()
                    .aggregate
                    + mult
                        .besov_norm_vector(&m0, BesovSpec::l2_summed(-0.5))
                        .unwrap()
                        .aggregate;
                worst = worst.max(wn.total / d);
            }
            fitted.push(worst);
        }
        let rel = (fitted[0] - fitted[1]).abs() / fitted[0];
        assert!(rel < 0.2, "fitted constants {fitted:?}");
    }

    #[test]
    fn working_norm_zero_iff_zero() {
        let g = grid1(64);
        let mult = DyadicMultiplier::build(g).unwrap();
        let zero = TrajectoryPair {
            dt: 0.1,
            q: vec![RealField::zeros(g, "q"); 3],
            m: vec![vec![RealField::zeros(g, "m")]; 3],
        };
        assert_eq!(working_norm(&zero, &mult).unwrap().total, 0.0);
        let mut nz = zero.clone();
        nz.q[1] = RealField::from_fn(g, "q", |x| x[0].cos()).unwrap();
        assert!(working_norm(&nz, &mult).unwrap().total > 0.0);
    }

    #[test]
    fn zero_momentum_converges_in_one_iteration() {
        let g = grid1(64);
        let p = params();
        let q0 = RealField::from_fn(g, "q", |x| 0.8 * x[0].cos()).unwrap();
        let m0 = vec![RealField::zeros(g, "m")];
        let res = run_picard(&q0, &m0, &p, &cfg(0.02, 0.5), 1e-10, 8).unwrap();
        assert_eq!(res.trace.outcome, Outcome::Converged);
        assert_eq!(res.trace.rows.len(), 2, "one correction iteration");
        // Fixed point is the pure heat flow of q0.
        for (j, t) in res.trajectory.times().iter().enumerate() {
            let exact = crate::propagators::heat_semigroup(&q0, *t, p.mu).unwrap();
            assert!(res.trajectory.q[j].sub(&exact).unwrap().linf() < 1e-11);
        }
    }

    #[test]
    fn first_correction_scales_quadratically() {
        let g = grid1(64);
        let p = params();
        let q0 = RealField::from_fn(g, "q", |x| 0.3 * x[0].cos()).unwrap();
        let base = vec![RealField::from_fn(g, "m", |x| 0.01 * x[0].sin()).unwrap()];
        let double = vec![base[0].scaled(2.0)];
        let c = cfg(0.02, 0.5);
        let mult = DyadicMultiplier::build(g).unwrap();
        let corr = |m0: &[RealField]| {
            let seed = linear_seed(&q0, m0, &p, &c).unwrap();
            let (_, barred) = picard_step(&seed, &seed, &p, &c).unwrap();
            working_norm(&barred, &mult).unwrap().total
        };
        let c1 = corr(&base);
        let c2 = corr(&double);
        let exponent = (c2 / c1).log2();
        assert!(
            (1.8..=2.2).contains(&exponent),
            "quadratic exponent {exponent}"
        );
    }

    #[test]
    fn small_data_contracts_and_matches_stepper() {
        let g = grid1(64);
        let p = params();
        let q0 = RealField::from_fn(g, "q", |x| 0.5 * x[0].cos()).unwrap();
        let m0 = vec![RealField::from_fn(g, "m", |x| 0.02 * x[0].sin()).unwrap()];
        let res = run_picard(&q0, &m0, &p, &cfg(0.01, 0.5), 1e-9, 12).unwrap();
        assert_eq!(res.trace.outcome, Outcome::Converged);
        for row in &res.trace.rows {
            if let Some(r) = row.ratio {
                assert!(r < 1.0, "non-contracting ratio {r}");
            }
        }
        let residual = res.trace.residual_vs_stepper.unwrap();
        assert!(residual < 1e-5, "stepper residual {residual}");
        // Induction-style bound: every barred iterate is controlled by the
        // first correction plus the geometric tail of the deltas.
        let first = res.trace.rows[1].barred.total;
        let tail: f64 = res.trace.rows.iter().filter_map(|r| r.delta).sum();
        let bound = first + tail + 1e-12;
        for row in &res.trace.rows {
            assert!(row.barred.total <= bound);
        }
        // The lower depth bound holds along the run.
        assert!(res.trace.min_depth >= 0.5 - 1e-6);
    }

    #[test]
    fn vacuum_outcome_when_depth_collapses() {
        let g = grid1(64);
        // The floor sits above the initial depth minimum, so the first
        // quadratic-source evaluation already leaves the admissible regime.
        let p = params().with_vacuum_floor(0.55);
        let q0 = RealField::from_fn(g, "q", |x| 0.5 * x[0].cos()).unwrap();
        let m0 = vec![RealField::from_fn(g, "m", |x| 0.8 * x[0].sin()).unwrap()];
        let res = run_picard(&q0, &m0, &p, &cfg(0.02, 0.5), 1e-9, 8).unwrap();
        assert_eq!(res.trace.outcome, Outcome::Vacuum);
    }

    #[test]
    fn classifier_patterns() {
        // Monotone then tolerance: converged.
        assert_eq!(
            classify(&[1.0, 0.5, 0.25, 1e-9], true, false),
            Some(Outcome::Converged)
        );
        // Tolerance reached but with growth along the way: stalled.
        assert_eq!(
            classify(&[1.0, 2.0, 1e-9], true, false),
            Some(Outcome::Stalled)
        );
        // Five consecutive near-unit ratios: stalled.
        let flat = vec![1.0, 1.0, 0.99, 1.01, 1.0, 0.98, 1.02];
        assert_eq!(classify(&flat, false, false), Some(Outcome::Stalled));
        // Sustained growth: diverged.
        assert_eq!(
            classify(&[1.0, 10.0, 100.0, 2000.0], false, false),
            Some(Outcome::Diverged)
        );
        // Exhausted while clearly growing: diverged.
        assert_eq!(
            classify(&[1.0, 1.5, 2.2], false, true),
            Some(Outcome::Diverged)
        );
        // Exhausted while slowly shrinking: stalled.
        assert_eq!(
            classify(&[1.0, 0.9, 0.8], false, true),
            Some(Outcome::Stalled)
        );
        // No verdict yet.
        assert_eq!(classify(&[1.0, 0.5], false, false), None);
    }

    #[test]
    fn sweep_brackets_and_flags() {
        let g = grid1(64);
        let p = params();
        let fam = vec![(
            "shallow".to_string(),
            RealField::from_fn(g, "q", |x| 0.3 * x[0].cos()).unwrap(),
        )];
        let dir = vec![RealField::from_fn(g, "m", |x| x[0].sin()).unwrap()];
        let amplitudes = [0.0, 1e-3, 1e-2, 0.1, 0.8, 2.0, 4.0];
        let sweeps =
            threshold_sweep(&fam, &dir, &amplitudes, &p, &cfg(0.02, 0.5), 1e-8, 10).unwrap();
        let s = &sweeps[0];
        assert_eq!(s.rows.len(), amplitudes.len());
        assert_eq!(s.rows[0].outcome, Outcome::Converged, "zero amplitude");
        assert_eq!(s.rows[0].iterations, 1, "zero amplitude is trivial");
        assert_eq!(s.rows[1].outcome, Outcome::Converged, "tiny amplitude");
        assert!(s.largest_converged.is_some());
        // The sweep records a failure somewhere and a finite bracket.
        assert!(s.smallest_failed.is_some(), "{:?}", s.rows);
        assert!(s.largest_converged.unwrap() < s.smallest_failed.unwrap());
        // Ascending order enforced.
        assert!(threshold_sweep(&fam, &dir, &[0.5, 0.1], &p, &cfg(0.02, 0.5), 1e-8, 4).is_err());
    }
}
