//! Physical parameters, state descriptions, and right-hand sides.
//!
//! Three equivalent descriptions of the same flow are used throughout:
//!
//! - primitive (h, u): depth and velocity, the variables of the physical
//!   system with friction r h u, pressure grad(h)/Fr^2, viscous stress
//!   div(2 mu h D(u)), and the capillary tensor div K for kappa(h) = kappa/h;
//! - transformed (h, v): v = u + mu * grad(ln h) is the effective velocity;
//! - momentum (q, m): q = h - 1 and m = h v, in which the system becomes
//!   d_t q = -div m + mu lap q,
//!   d_t m = -div(m/h (x) m) + mu lap m - r m,
//!   provided kappa = mu^2 and 1/Fr^2 = r mu.
//!
//! The viscous stress carries the coefficient 2 mu: with kappa = mu^2 that is
//! the unique normalization for which the change of unknown above removes the
//! pressure coupling exactly (strain form, any dimension; gradient form on
//! curl-free flows) and for which (h solving d_t h = mu lap h,
//! u = -mu grad ln h) is an exact solution of the primitive system.
//!
//! All quadratic terms go through dealiased products; derivatives are
//! spectral.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, RealField, SpectralField};

/// How the viscous stress contracts the velocity gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViscosityForm {
    /// D(u) = (grad u + grad u^T) / 2; decouples exactly in any dimension.
    Strain,
    /// D(u) = grad u; coincides with strain on curl-free flows.
    Gradient,
}

/// Physical coefficients.
///
/// In constrained mode kappa = mu^2 and 1/Fr^2 = r * mu hold exactly (both
/// stored as the products themselves); unconstrained coefficients are allowed
/// only for the primitive solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub mu: f64,
    pub r: f64,
    pub kappa: f64,
    inv_fr2: f64,
    pub viscosity_form: ViscosityForm,
    pub vacuum_floor: f64,
    pub constrained: bool,
}

pub const DEFAULT_VACUUM_FLOOR: f64 = 1e-3;

impl Params {
    /// Coefficients satisfying kappa = mu^2 and 1/Fr^2 = r mu exactly.
    pub fn constrained(mu: f64, r: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParams(format!("mu must be > 0, got {mu}")));
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidParams(format!("r must be >= 0, got {r}")));
        }
        Ok(Params {
            mu,
            r,
            kappa: mu * mu,
            inv_fr2: r * mu,
            viscosity_form: ViscosityForm::Gradient,
            vacuum_floor: DEFAULT_VACUUM_FLOOR,
            constrained: true,
        })
    }

    /// Free coefficients; only the primitive system accepts these.
    pub fn unconstrained(mu: f64, r: f64, kappa: f64, fr: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParams(format!("mu must be > 0, got {mu}")));
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidParams(format!("r must be >= 0, got {r}")));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "kappa must be >= 0, got {kappa}"
            )));
        }
        if !(fr.is_finite() && fr > 0.0) {
            return Err(Error::InvalidParams(format!("Fr must be > 0, got {fr}")));
        }
        Ok(Params {
            mu,
            r,
            kappa,
            inv_fr2: 1.0 / (fr * fr),
            viscosity_form: ViscosityForm::Gradient,
            vacuum_floor: DEFAULT_VACUUM_FLOOR,
            constrained: false,
        })
    }

    pub fn with_viscosity_form(mut self, form: ViscosityForm) -> Self {
        self.viscosity_form = form;
        self
    }

    pub fn with_vacuum_floor(mut self, floor: f64) -> Self {
        self.vacuum_floor = floor;
        self
    }

    /// 1/Fr^2; in constrained mode this is exactly r * mu.
    pub fn inv_fr2(&self) -> f64 {
        self.inv_fr2
    }

    /// Froude number (infinite when the pressure scale vanishes).
    pub fn fr(&self) -> f64 {
        if self.inv_fr2 == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.inv_fr2.sqrt()
        }
    }

    pub fn require_constrained(&self) -> Result<()> {
        if self.constrained {
            Ok(())
        } else {
            Err(Error::InvalidParams(
                "this operation needs constrained coefficients (kappa = mu^2, 1/Fr^2 = r mu)"
                    .into(),
            ))
        }
    }
}

/// Depth and velocity.
#[derive(Clone, Debug)]
pub struct PrimitiveState {
    pub h: RealField,
    pub u: Vec<RealField>,
}

/// Depth and effective velocity v = u + mu grad(ln h).
#[derive(Clone, Debug)]
pub struct TransformedState {
    pub h: RealField,
    pub v: Vec<RealField>,
}

/// Depth perturbation q = h - 1 and transformed momentum m = h v.
#[derive(Clone, Debug)]
pub struct MomentumState {
    pub q: RealField,
    pub m: Vec<RealField>,
}

fn check_vector(grid: &Grid, comps: &[RealField], what: &str) -> Result<()> {
    if comps.len() != grid.dim() {
        return Err(Error::InvalidState(format!(
            "{what} needs {} components, got {}",
            grid.dim(),
            comps.len()
        )));
    }
    for c in comps {
        if c.grid != *grid {
            return Err(Error::GridMismatch(format!(
                "{what} component grid differs"
            )));
        }
    }
    Ok(())
}

impl PrimitiveState {
    pub fn new(h: RealField, u: Vec<RealField>) -> Result<Self> {
        check_vector(&h.grid, &u, "velocity")?;
        if h.min() <= 0.0 {
            return Err(Error::InvalidState("depth must be positive".into()));
        }
        Ok(PrimitiveState { h, u })
    }

    pub fn rest(grid: Grid) -> Self {
        PrimitiveState {
            h: RealField::constant(grid, 1.0, "depth"),
            u: (0..grid.dim())
                .map(|i| RealField::zeros(grid, &format!("u{i}")))
                .collect(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.h.grid
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite() && self.u.iter().all(|c| c.is_finite())
    }
}

impl TransformedState {
    pub fn new(h: RealField, v: Vec<RealField>) -> Result<Self> {
        check_vector(&h.grid, &v, "effective velocity")?;
        if h.min() <= 0.0 {
            return Err(Error::InvalidState("depth must be positive".into()));
        }
        Ok(TransformedState { h, v })
    }

    /// q = h - 1, m = h v (plain pointwise products; data-prep map).
    pub fn to_momentum(&self) -> Result<MomentumState> {
        let q = self.h.map("q", |v| v - 1.0);
        let m = self
            .v
            .iter()
            .enumerate()
            .map(|(i, v)| self.h.zip_map(v, &format!("m{i}"), |a, b| a * b))
            .collect::<Result<_>>()?;
        Ok(MomentumState { q, m })
    }
}

impl MomentumState {
    pub fn new(q: RealField, m: Vec<RealField>) -> Result<Self> {
        check_vector(&q.grid, &m, "momentum")?;
        if q.min() <= -1.0 {
            return Err(Error::InvalidState("1 + q must be positive".into()));
        }
        Ok(MomentumState { q, m })
    }

    pub fn rest(grid: Grid) -> Self {
        MomentumState {
            q: RealField::zeros(grid, "q"),
            m: (0..grid.dim())
                .map(|i| RealField::zeros(grid, &format!("m{i}")))
                .collect(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.q.grid
    }

    pub fn depth(&self) -> RealField {
        self.q.map("depth", |v| 1.0 + v)
    }

    /// h = 1 + q, v = m / h (pointwise; data-prep map).
    pub fn to_transformed(&self, floor: f64) -> Result<TransformedState> {
        let h = self.depth();
        let recip = h.safe_reciprocal(floor)?;
        let v = self
            .m
            .iter()
            .enumerate()
            .map(|(i, m)| m.zip_map(&recip, &format!("v{i}"), |a, b| a * b))
            .collect::<Result<_>>()?;
        Ok(TransformedState { h, v })
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.m.iter().all(|c| c.is_finite())
    }
}

/// mu * grad(ln h), guarded by the vacuum floor.
fn mu_grad_ln(h: &RealField, mu: f64, floor: f64) -> Result<Vec<RealField>> {
    let (min, location) = h.min_with_location();
    if min <= floor {
        return Err(Error::VacuumBreach {
            min_value: min,
            location,
            floor,
        });
    }
    let ln_h = h.map("ln h", |v| v.ln());
    Ok(ln_h.gradient()?.into_iter().map(|g| g.scaled(mu)).collect())
}

/// v = u + mu grad(ln h).
pub fn to_effective(s: &PrimitiveState, p: &Params) -> Result<TransformedState> {
    let shift = mu_grad_ln(&s.h, p.mu, p.vacuum_floor)?;
    let v =
        s.u.iter()
            .zip(&shift)
            .enumerate()
            .map(|(i, (u, g))| u.zip_map(g, &format!("v{i}"), |a, b| a + b))
            .collect::<Result<_>>()?;
    TransformedState::new(s.h.clone(), v)
}

/// u = v - mu grad(ln h); inverse of [`to_effective`].
pub fn from_effective(s: &TransformedState, p: &Params) -> Result<PrimitiveState> {
    let shift = mu_grad_ln(&s.h, p.mu, p.vacuum_floor)?;
    let u =
        s.v.iter()
            .zip(&shift)
            .enumerate()
            .map(|(i, (v, g))| v.zip_map(g, &format!("u{i}"), |a, b| a - b))
            .collect::<Result<_>>()?;
    PrimitiveState::new(s.h.clone(), u)
}

/// Exact-solution family: v = 0, so u = -mu grad(ln h0).
pub fn effective_rest_state(h0: &RealField, p: &Params) -> Result<PrimitiveState> {
    let grid = h0.grid;
    let v = (0..grid.dim())
        .map(|i| RealField::zeros(grid, &format!("v{i}")))
        .collect();
    from_effective(&TransformedState::new(h0.clone(), v)?, p)
}

/// Classical momentum m' = h u = m - mu grad(h).
pub fn classical_momentum(s: &MomentumState, p: &Params) -> Result<Vec<RealField>> {
    let grad_q = s.q.gradient()?;
    s.m.iter()
        .zip(&grad_q)
        .enumerate()
        .map(|(i, (m, g))| m.zip_map(&g.scaled(p.mu), &format!("m'{i}"), |a, b| a - b))
        .collect()
}

/// Dealias a physical field (forward, 2/3 mask, inverse).
fn dealias_real(f: &RealField) -> Result<RealField> {
    f.to_spectral()?.dealiased().to_real()
}

/// Pointwise product of two band-limited fields with the tail re-masked,
/// returned spectrally.
fn masked_product_spectral(a: &RealField, b: &RealField) -> Result<SpectralField> {
    let prod = a.zip_map(b, "prod", |x, y| x * y)?;
    Ok(prod.to_spectral()?.dealiased())
}

/// Same as [`masked_product_spectral`] but back in physical space.
fn masked_product(a: &RealField, b: &RealField) -> Result<RealField> {
    masked_product_spectral(a, b)?.to_real()
}

/// div K for kappa(h) = kappa / h via the simplified algebraic form
/// grad(kappa lap h) - div((kappa/h) grad h (x) grad h).
pub fn capillary_divk(h: &RealField, p: &Params) -> Result<Vec<RealField>> {
    let grid = h.grid;
    let h_d = dealias_real(h)?;
    let recip = h_d.safe_reciprocal(p.vacuum_floor)?;
    let recip_d = dealias_real(&recip)?;
    let h_spec = h_d.to_spectral()?;
    let lap = h_spec.laplacian();
    let grad_h: Vec<RealField> = (0..grid.dim())
        .map(|a| h_spec.derivative(a).to_real())
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(grid.dim());
    for i in 0..grid.dim() {
        // kappa * d_i(lap h), a purely linear multiplier.
        let mut acc = lap.derivative(i);
        for c in acc.coeffs.iter_mut() {
            *c *= p.kappa;
        }
        // - sum_j d_j( (kappa/h) d_i h d_j h )
        let gi_over_h = masked_product(&recip_d, &grad_h[i])?;
        for (j, gj) in grad_h.iter().enumerate() {
            let t = masked_product_spectral(&gi_over_h, gj)?;
            let d = t.derivative(j);
            for (a, b) in acc.coeffs.iter_mut().zip(&d.coeffs) {
                *a -= p.kappa * b;
            }
        }
        out.push(acc.to_real()?);
    }
    Ok(out)
}

/// div K evaluated literally from the tensor definition
/// grad(h kappa(h) lap h + (kappa(h) + h kappa'(h)) |grad h|^2 / 2)
/// - div(kappa(h) grad h (x) grad h), with kappa(h) = kappa/h.
///
/// Algebraically identical to [`capillary_divk`]; kept as a cross-check route.
pub fn capillary_divk_general(h: &RealField, p: &Params) -> Result<Vec<RealField>> {
    let grid = h.grid;
    let h_d = dealias_real(h)?;
    let recip = h_d.safe_reciprocal(p.vacuum_floor)?;
    let recip_d = dealias_real(&recip)?;
    // kappa(h) = kappa / h and kappa'(h) = -kappa / h^2, evaluated literally.
    let kappa_h = recip_d.scaled(p.kappa);
    let kappa_h_d = dealias_real(&kappa_h)?;
    let h_spec = h_d.to_spectral()?;
    let lap = h_spec.laplacian().to_real()?;
    let grad_h: Vec<RealField> = (0..grid.dim())
        .map(|a| h_spec.derivative(a).to_real())
        .collect::<Result<_>>()?;

    // A = h kappa(h) lap h
    let h_kappa = masked_product(&h_d, &kappa_h_d)?;
    let a_term = masked_product(&h_kappa, &lap)?;
    // B = (kappa(h) + h kappa'(h)) |grad h|^2 / 2 with h kappa'(h) = -kappa/h.
    let h_kappa_prime = recip_d.scaled(-p.kappa);
    let coeff = kappa_h_d.add(&dealias_real(&h_kappa_prime)?)?.scaled(0.5);
    let mut grad_sq = RealField::zeros(grid, "grad_sq");
    for g in &grad_h {
        grad_sq = grad_sq.add(&masked_product(g, g)?)?;
    }
    let b_term = masked_product(&coeff, &grad_sq)?;
    let scalar = a_term.add(&b_term)?.to_spectral()?;

    let mut out = Vec::with_capacity(grid.dim());
    for i in 0..grid.dim() {
        let mut acc = scalar.derivative(i);
        let gi_kappa = masked_product(&kappa_h_d, &grad_h[i])?;
        for (j, gj) in grad_h.iter().enumerate() {
            let t = masked_product_spectral(&gi_kappa, gj)?;
            let d = t.derivative(j);
            for (a, b) in acc.coeffs.iter_mut().zip(&d.coeffs) {
                *a -= b;
            }
        }
        out.push(acc.to_real()?);
    }
    Ok(out)
}

/// Time derivatives (d_t h, d_t(hu)) of the primitive system.
pub fn rhs_primitive(s: &PrimitiveState, p: &Params) -> Result<(RealField, Vec<RealField>)> {
    let grid = s.grid();
    let dim = grid.dim();
    let (min, location) = s.h.min_with_location();
    if min <= p.vacuum_floor {
        return Err(Error::VacuumBreach {
            min_value: min,
            location,
            floor: p.vacuum_floor,
        });
    }
    let h_d = dealias_real(&s.h)?;
    let u_d: Vec<RealField> = s.u.iter().map(dealias_real).collect::<Result<_>>()?;
    // Conserved momentum w = h u.
    let w: Vec<RealField> = (0..dim)
        .map(|i| masked_product(&h_d, &u_d[i]))
        .collect::<Result<_>>()?;
    let w_spec: Vec<SpectralField> = w.iter().map(|f| f.to_spectral()).collect::<Result<_>>()?;

    // d_t h = -div(h u)
    let mut dh = SpectralField::zeros(grid, "dh");
    for (j, ws) in w_spec.iter().enumerate() {
        let d = ws.derivative(j);
        for (a, b) in dh.coeffs.iter_mut().zip(&d.coeffs) {
            *a -= b;
        }
    }

    // Velocity gradients d_j u_i.
    let u_spec: Vec<SpectralField> = u_d.iter().map(|f| f.to_spectral()).collect::<Result<_>>()?;
    let mut grad_u: Vec<Vec<RealField>> = Vec::with_capacity(dim);
    for spec in &u_spec {
        let mut row = Vec::with_capacity(dim);
        for j in 0..dim {
            row.push(spec.derivative(j).to_real()?);
        }
        grad_u.push(row);
    }

    let h_spec = h_d.to_spectral()?;
    let cap = if p.kappa > 0.0 {
        Some(capillary_divk(&s.h, p)?)
    } else {
        None
    };

    let mut dw = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut acc = SpectralField::zeros(grid, &format!("dm{i}"));
        let visc_coeff = match p.viscosity_form {
            ViscosityForm::Gradient => 2.0 * p.mu,
            ViscosityForm::Strain => p.mu,
        };
        for j in 0..dim {
            // -d_j( (h u_i) u_j )
            let conv = masked_product_spectral(&w[i], &u_d[j])?.derivative(j);
            // viscous stress: gradient form 2 mu d_j(h d_j u_i),
            // strain form mu d_j(h (d_j u_i + d_i u_j)).
            let stress = match p.viscosity_form {
                ViscosityForm::Gradient => masked_product_spectral(&h_d, &grad_u[i][j])?,
                ViscosityForm::Strain => {
                    let sym = grad_u[i][j].add(&grad_u[j][i])?;
                    masked_product_spectral(&h_d, &sym)?
                }
            };
            let visc = stress.derivative(j);
            for ((a, c), v) in acc.coeffs.iter_mut().zip(&conv.coeffs).zip(&visc.coeffs) {
                *a += -c + visc_coeff * v;
            }
        }
        // pressure -grad(h)/Fr^2 and friction -r h u
        let pres = h_spec.derivative(i);
        let w_i = &w_spec[i];
        for ((a, pc), wc) in acc.coeffs.iter_mut().zip(&pres.coeffs).zip(&w_i.coeffs) {
            *a += -p.inv_fr2 * pc - p.r * wc;
        }
        let mut field = acc.to_real()?;
        if let Some(cap) = &cap {
            field = field.add(&cap[i])?;
        }
        dw.push(field);
    }
    Ok((dh.to_real()?, dw))
}

/// The quadratic source G = -div(m/h (x) m), h = 1 + q, returned spectrally.
///
/// Inputs are assumed band-limited (the stepper keeps them so); the
/// reciprocal is dealiased before entering any product and every product is
/// re-masked, so the result matches the composition of public dealiased
/// products to rounding.
pub fn g_nonlinear_spectral(
    q: &RealField,
    m: &[RealField],
    p: &Params,
) -> Result<Vec<SpectralField>> {
    let grid = q.grid;
    let dim = grid.dim();
    check_vector(&grid, m, "momentum")?;
    let h = q.map("h", |v| 1.0 + v);
    let recip = h.safe_reciprocal(p.vacuum_floor)?;
    let recip_d = dealias_real(&recip)?;
    let mut out = Vec::with_capacity(dim);
    for i in 0..dim {
        let ti = masked_product(&m[i], &recip_d)?;
        let mut acc = SpectralField::zeros(grid, &format!("G{i}"));
        for (j, mj) in m.iter().enumerate() {
            let t = masked_product_spectral(&ti, mj)?;
            let d = t.derivative(j);
            for (a, b) in acc.coeffs.iter_mut().zip(&d.coeffs) {
                *a -= b;
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Physical-space wrapper around [`g_nonlinear_spectral`].
pub fn g_nonlinear(q: &RealField, m: &[RealField], p: &Params) -> Result<Vec<RealField>> {
    let q_d = dealias_real(q)?;
    let m_d: Vec<RealField> = m.iter().map(dealias_real).collect::<Result<_>>()?;
    g_nonlinear_spectral(&q_d, &m_d, p)?
        .iter()
        .map(|s| s.to_real())
        .collect()
}

/// Time derivatives (d_t q, d_t m) of the momentum system.
///
/// Requires constrained coefficients: the decoupled form only holds under
/// kappa = mu^2 and 1/Fr^2 = r mu.
pub fn rhs_momentum(s: &MomentumState, p: &Params) -> Result<(RealField, Vec<RealField>)> {
    p.require_constrained()?;
    let q_d = dealias_real(&s.q)?;
    let m_d: Vec<RealField> = s.m.iter().map(dealias_real).collect::<Result<_>>()?;
    let g = g_nonlinear_spectral(&q_d, &m_d, p)?;

    // d_t q = -div m + mu lap q
    let q_spec = q_d.to_spectral()?;
    let mut dq = q_spec.laplacian();
    for c in dq.coeffs.iter_mut() {
        *c *= p.mu;
    }
    for (j, mj) in m_d.iter().enumerate() {
        let d = mj.to_spectral()?.derivative(j);
        for (a, b) in dq.coeffs.iter_mut().zip(&d.coeffs) {
            *a -= b;
        }
    }

    let mut dm = Vec::with_capacity(m_d.len());
    for (i, mi) in m_d.iter().enumerate() {
        let ms = mi.to_spectral()?;
        let lap = ms.laplacian();
        let mut acc = g[i].clone();
        for ((a, l), mm) in acc.coeffs.iter_mut().zip(&lap.coeffs).zip(&ms.coeffs) {
            *a += p.mu * l - p.r * mm;
        }
        dm.push(acc.to_real()?);
    }
    Ok((dq.to_real()?, dm))
}

/// Pressure potential: Pi(s) - Pi(1) = (s ln s - s + 1) / Fr^2 for the linear
/// pressure law P(z) = z / Fr^2.
pub fn pi_potential(s: f64, p: &Params) -> Result<f64> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidParams(format!(
            "potential argument must be positive, got {s}"
        )));
    }
    Ok(p.inv_fr2() * (s * s.ln() - s + 1.0))
}

/// Quadrature fallback for a general pressure law:
/// Pi(s) - Pi(1) = s * int_1^s P(z)/z^2 dz - (s - 1) P(1), by Simpson's rule.
pub fn pi_potential_quadrature(s: f64, pressure: impl Fn(f64) -> f64, steps: usize) -> Result<f64> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidParams(format!(
            "potential argument must be positive, got {s}"
        )));
    }
    let n = steps.max(2) & !1; // even
    let (a, b) = (1.0f64, s);
    let hstep = (b - a) / n as f64;
    let f = |z: f64| pressure(z) / (z * z);
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let z = a + hstep * i as f64;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(z);
    }
    let integral = sum * hstep / 3.0;
    Ok(s * integral - (s - 1.0) * pressure(1.0))
}

/// Total energy int( h|u|^2/2 + Pi(h) - Pi(1) + kappa(h)|grad h|^2/2 ) dx with
/// kappa(h) = kappa/h, by grid quadrature.
pub fn energy(s: &PrimitiveState, p: &Params) -> Result<f64> {
    if s.h.min() <= 0.0 {
        return Err(Error::InvalidState("depth must be positive".into()));
    }
    let grid = s.grid();
    let w = grid.cell_volume();
    let grad_h = s.h.gradient()?;
    let mut total = 0.0;
    for idx in 0..grid.total_points() {
        let h = s.h.values[idx];
        let mut usq = 0.0;
        for c in &s.u {
            usq += c.values[idx] * c.values[idx];
        }
        let mut gsq = 0.0;
        for g in &grad_h {
            gsq += g.values[idx] * g.values[idx];
        }
        let potential = p.inv_fr2() * (h * h.ln() - h + 1.0);
        total += 0.5 * h * usq + potential + 0.5 * (p.kappa / h) * gsq;
    }
    Ok(total * w)
}

/// int mu h |D(u)|^2 dx for the configured viscosity form.
#[allow(clippy::needless_range_loop)]
pub fn viscous_dissipation(s: &PrimitiveState, p: &Params) -> Result<f64> {
    let grid = s.grid();
    let dim = grid.dim();
    let mut grads: Vec<Vec<RealField>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let spec = s.u[i].to_spectral()?;
        let mut row = Vec::with_capacity(dim);
        for j in 0..dim {
            row.push(spec.derivative(j).to_real()?);
        }
        grads.push(row);
    }
    let w = grid.cell_volume();
    let mut total = 0.0;
    for idx in 0..grid.total_points() {
        let mut dsq = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let d = match p.viscosity_form {
                    ViscosityForm::Gradient => grads[i][j].values[idx],
                    ViscosityForm::Strain => {
                        0.5 * (grads[i][j].values[idx] + grads[j][i].values[idx])
                    }
                };
                dsq += d * d;
            }
        }
        total += p.mu * s.h.values[idx] * dsq;
    }
    Ok(total * w)
}

/// Curl components of a velocity field: empty for N = 1 (identically zero),
/// the scalar d_1 u_2 - d_2 u_1 for N = 2, the full 3-vector for N = 3.
pub fn curl_components(u: &[RealField]) -> Result<Vec<RealField>> {
    let grid = u
        .first()
        .ok_or_else(|| Error::InvalidState("curl of empty vector".into()))?
        .grid;
    check_vector(&grid, u, "curl input")?;
    match grid.dim() {
        1 => Ok(Vec::new()),
        2 => {
            let d1u2 = u[1].to_spectral()?.derivative(0).to_real()?;
            let d2u1 = u[0].to_spectral()?.derivative(1).to_real()?;
            Ok(vec![d1u2.sub(&d2u1)?])
        }
        _ => {
            let spec: Vec<SpectralField> =
                u.iter().map(|f| f.to_spectral()).collect::<Result<_>>()?;
            let d = |i: usize, j: usize| spec[i].derivative(j).to_real();
            Ok(vec![
                d(2, 1)?.sub(&d(1, 2)?)?,
                d(0, 2)?.sub(&d(2, 0)?)?,
                d(1, 0)?.sub(&d(0, 1)?)?,
            ])
        }
    }
}

/// L^2 norm of the curl; zero for N = 1 by convention.
pub fn curl_l2(u: &[RealField]) -> Result<f64> {
    let comps = curl_components(u)?;
    Ok(comps.iter().map(|c| c.l2().powi(2)).sum::<f64>().sqrt())
}

/// Mean depth, conserved by both systems.
pub fn mass(h: &RealField) -> f64 {
    h.mean()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{divergence, Grid, RealField};

    fn grid1(n: usize) -> Grid {
        Grid::uniform(1, n).unwrap()
    }

    fn params() -> Params {
        Params::constrained(0.1, 1.0).unwrap()
    }

    #[test]
    fn constrained_params_exact_relations() {
        let p = params();
        assert_eq!(p.kappa, 0.1 * 0.1);
        assert_eq!(p.inv_fr2(), 0.1);
        assert!(p.require_constrained().is_ok());
        let q = Params::unconstrained(0.1, 1.0, 0.0, 2.0).unwrap();
        assert!(q.require_constrained().is_err());
        assert!((q.inv_fr2() - 0.25).abs() < 1e-15);
        assert!(Params::constrained(-1.0, 1.0).is_err());
        assert!(Params::constrained(0.1, -1.0).is_err());
        assert!(Params::unconstrained(0.1, 1.0, -0.5, 1.0).is_err());
    }

    #[test]
    fn effective_velocity_identity_on_flat_depth() {
        let g = grid1(32);
        let p = params();
        let u = vec![RealField::from_fn(g, "u", |x| x[0].sin()).unwrap()];
        let s = PrimitiveState::new(RealField::constant(g, 1.0, "h"), u.clone()).unwrap();
        let t = to_effective(&s, &p).unwrap();
        assert!(t.v[0].sub(&u[0]).unwrap().linf() < 1e-13);
    }

    #[test]
    fn effective_velocity_closed_form() {
        // u = 0, h = 1 + 0.3 cos x: v = mu d_x ln h = -0.3 mu sin x / (1 + 0.3 cos x).
        let g = grid1(128);
        let p = params();
        let h = RealField::from_fn(g, "h", |x| 1.0 + 0.3 * x[0].cos()).unwrap();
        let s = PrimitiveState::new(h, vec![RealField::zeros(g, "u")]).unwrap();
        let t = to_effective(&s, &p).unwrap();
        let exact = RealField::from_fn(g, "v", |x| {
            -0.3 * p.mu * x[0].sin() / (1.0 + 0.3 * x[0].cos())
        })
        .unwrap();
        assert!(t.v[0].sub(&exact).unwrap().linf() < 1e-12);
    }

    #[test]
    fn effective_velocity_roundtrip() {
        let g = grid1(64);
        let p = params();
        let h = RealField::from_fn(g, "h", |x| {
            1.0 + 0.4 * x[0].cos() + 0.1 * (3.0 * x[0]).sin()
        })
        .unwrap();
        let u = vec![RealField::from_fn(g, "u", |x| 0.2 * (2.0 * x[0]).sin()).unwrap()];
        let s = PrimitiveState::new(h, u).unwrap();
        let back = from_effective(&to_effective(&s, &p).unwrap(), &p).unwrap();
        assert!(back.h.sub(&s.h).unwrap().linf() < 1e-12);
        assert!(back.u[0].sub(&s.u[0]).unwrap().linf() < 1e-12);
    }

    #[test]
    fn classical_momentum_cases() {
        let g = grid1(64);
        let p = params();
        // m = 0, q = 0 -> m' = 0
        let rest = MomentumState::rest(g);
        let mp = classical_momentum(&rest, &p).unwrap();
        assert!(mp[0].linf() < 1e-14);
        // m = 0, q = 0.3 cos x -> m' = -mu grad q = 0.3 mu sin x
        let q = RealField::from_fn(g, "q", |x| 0.3 * x[0].cos()).unwrap();
        let s = MomentumState::new(q, vec![RealField::zeros(g, "m")]).unwrap();
        let mp = classical_momentum(&s, &p).unwrap();
        let exact = RealField::from_fn(g, "e", |x| 0.3 * p.mu * x[0].sin()).unwrap();
        assert!(mp[0].sub(&exact).unwrap().linf() < 1e-12);
    }

    #[test]
    fn classical_momentum_two_routes_agree() {
        // m - mu grad h must match h u with u reconstructed through the
        // effective-velocity map.
        let g = grid1(128);
        let p = params();
        let q =
            RealField::from_fn(g, "q", |x| 0.2 * x[0].cos() + 0.05 * (2.0 * x[0]).sin()).unwrap();
        let m = vec![RealField::from_fn(g, "m", |x| 0.1 * x[0].sin()).unwrap()];
        let s = MomentumState::new(q, m).unwrap();
        let direct = classical_momentum(&s, &p).unwrap();
        let prim = from_effective(&s.to_transformed(p.vacuum_floor).unwrap(), &p).unwrap();
        let via_u = prim.h.zip_map(&prim.u[0], "hu", |a, b| a * b).unwrap();
        assert!(direct[0].sub(&via_u).unwrap().linf() < 1e-10);
    }

    #[test]
    fn capillary_constant_depth_vanishes() {
        let g = grid1(32);
        let p = params();
        let h = RealField::constant(g, 1.7, "h");
        let k = capillary_divk(&h, &p).unwrap();
        assert!(k[0].linf() < 1e-13);
        let kg = capillary_divk_general(&h, &p).unwrap();
        assert!(kg[0].linf() < 1e-13);
    }

    #[test]
    fn capillary_symbolic_oracle_1d() {
        // h = 1 + a cos x: div K = kappa a sin x
        //   - kappa [2 a^2 sin x cos x (1 + a cos x) + a^3 sin^3 x] / (1 + a cos x)^2.
        let g = grid1(256);
        let p = params();
        let a = 0.4;
        let h = RealField::from_fn(g, "h", |x| 1.0 + a * x[0].cos()).unwrap();
        let k = capillary_divk(&h, &p).unwrap();
        let exact = RealField::from_fn(g, "e", |x| {
            let (s, c) = x[0].sin_cos();
            let hh = 1.0 + a * c;
            p.kappa * (a * s - (2.0 * a * a * s * c * hh + a * a * a * s * s * s) / (hh * hh))
        })
        .unwrap();
        let err = k[0].sub(&exact).unwrap().linf();
        assert!(err < 1e-8, "capillary oracle error {err}");
    }

    #[test]
    fn capillary_general_matches_simplified() {
        let g = grid1(128);
        let p = params();
        let h = RealField::from_fn(g, "h", |x| {
            1.0 + 0.3 * x[0].cos() + 0.1 * (2.0 * x[0]).sin() + 0.05 * (5.0 * x[0]).cos()
        })
        .unwrap();
        assert!(h.min() > 0.5);
        let a = capillary_divk(&h, &p).unwrap();
        let b = capillary_divk_general(&h, &p).unwrap();
        let err = a[0].sub(&b[0]).unwrap().linf();
        assert!(err < 1e-10, "route disagreement {err}");
    }

    #[test]
    fn capillary_general_matches_simplified_2d() {
        let g = Grid::uniform(2, 32).unwrap();
        let p = params();
        let h = RealField::from_fn(g, "h", |x| {
            1.0 + 0.25 * x[0].cos() * x[1].cos() + 0.1 * (x[1]).sin()
        })
        .unwrap();
        let a = capillary_divk(&h, &p).unwrap();
        let b = capillary_divk_general(&h, &p).unwrap();
        for (ai, bi) in a.iter().zip(&b) {
            assert!(ai.sub(bi).unwrap().linf() < 1e-10);
        }
    }

    #[test]
    fn rhs_primitive_rest_state() {
        let g = grid1(32);
        let p = params();
        let (dh, dw) = rhs_primitive(&PrimitiveState::rest(g), &p).unwrap();
        assert!(dh.linf() < 1e-13);
        assert!(dw[0].linf() < 1e-13);
    }

    #[test]
    fn rhs_primitive_vacuum_breach() {
        let g = grid1(32);
        let p = params().with_vacuum_floor(0.6);
        let h = RealField::from_fn(g, "h", |x| 1.0 + 0.5 * x[0].cos()).unwrap();
        let s = PrimitiveState::new(h, vec![RealField::zeros(g, "u")]).unwrap();
        assert!(matches!(
            rhs_primitive(&s, &p),
            Err(Error::VacuumBreach { .. })
        ));
    }

    /// The family (h solving d_t h = mu lap h, u = -mu grad ln h) is an exact
    /// solution: the right-hand side must report d_t h = mu lap h and
    /// d_t(hu) = -mu grad(d_t h) = -mu^2 grad lap h.
    #[test]
    fn rhs_primitive_exact_family_residual() {
        let g = grid1(256);
        for form in [ViscosityForm::Gradient, ViscosityForm::Strain] {
            let p = params().with_viscosity_form(form);
            let h0 = RealField::from_fn(g, "h", |x| 1.0 + 0.5 * x[0].cos()).unwrap();
            let state = effective_rest_state(&h0, &p).unwrap();
            let (dh, dw) = rhs_primitive(&state, &p).unwrap();
            let lap_h = h0.laplacian().unwrap();
            let res_h = dh.sub(&lap_h.scaled(p.mu)).unwrap().linf();
            assert!(res_h < 1e-8, "{form:?}: mass residual {res_h}");
            let expected_dw = lap_h.gradient().unwrap()[0].scaled(-p.mu * p.mu);
            let res_w = dw[0].sub(&expected_dw).unwrap().linf();
            assert!(res_w < 1e-8, "{form:?}: momentum residual {res_w}");
        }
    }

    /// Manufactured fields with hand-differentiated spatial terms; pins every
    /// sign and coefficient of the assembled right-hand side.
    #[test]
    fn rhs_primitive_manufactured_oracle() {
        let g = grid1(256);
        let p = params();
        let (a, b) = (0.3, 0.2);
        let h = RealField::from_fn(g, "h", |x| 1.0 + a * x[0].cos()).unwrap();
        let u = vec![RealField::from_fn(g, "u", |x| b * x[0].sin()).unwrap()];
        let s = PrimitiveState::new(h, u).unwrap();
        let (dh, dw) = rhs_primitive(&s, &p).unwrap();

        // h = 1 + a cos, u = b sin; all derivatives in closed form.
        let hf = |x: f64| 1.0 + a * x.cos();
        let hx = |x: f64| -a * x.sin();
        let hxx = |x: f64| -a * x.cos();
        let hxxx = |x: f64| a * x.sin();
        let uf = |x: f64| b * x.sin();
        let ux = |x: f64| b * x.cos();
        let uxx = |x: f64| -b * x.sin();

        let dh_exact = RealField::from_fn(g, "dh", |pt| {
            let x = pt[0];
            -(hx(x) * uf(x) + hf(x) * ux(x))
        })
        .unwrap();
        assert!(dh.sub(&dh_exact).unwrap().linf() < 1e-8);

        let dw_exact = RealField::from_fn(g, "dw", |pt| {
            let x = pt[0];
            let conv = -(hx(x) * uf(x) * uf(x) + 2.0 * hf(x) * uf(x) * ux(x));
            let visc = 2.0 * p.mu * (hx(x) * ux(x) + hf(x) * uxx(x));
            let pres = -p.inv_fr2() * hx(x);
            let fric = -p.r * hf(x) * uf(x);
            let cap = p.kappa
                * (hxxx(x) - (2.0 * hx(x) * hxx(x) * hf(x) - hx(x).powi(3)) / (hf(x) * hf(x)));
            conv + visc + pres + fric + cap
        })
        .unwrap();
        let err = dw[0].sub(&dw_exact).unwrap().linf();
        assert!(err < 1e-8, "manufactured momentum residual {err}");
    }

    #[test]
    fn rhs_momentum_pure_heat_branch() {
        let g = grid1(64);
        let p = params();
        let q =
            RealField::from_fn(g, "q", |x| 0.4 * x[0].cos() + 0.1 * (3.0 * x[0]).sin()).unwrap();
        let s = MomentumState::new(q.clone(), vec![RealField::zeros(g, "m")]).unwrap();
        let (dq, dm) = rhs_momentum(&s, &p).unwrap();
        assert!(dm[0].linf() < 1e-13, "momentum must stay zero");
        let heat = q.laplacian().unwrap().scaled(p.mu);
        assert!(dq.sub(&heat).unwrap().linf() < 1e-11);
    }

    #[test]
    fn rhs_momentum_rest_state() {
        let g = grid1(32);
        let (dq, dm) = rhs_momentum(&MomentumState::rest(g), &params()).unwrap();
        assert!(dq.linf() < 1e-14 && dm[0].linf() < 1e-14);
    }

    #[test]
    fn rhs_momentum_requires_constrained() {
        let g = grid1(32);
        let p = Params::unconstrained(0.1, 1.0, 0.01, 3.0).unwrap();
        assert!(rhs_momentum(&MomentumState::rest(g), &p).is_err());
    }

    #[test]
    fn g_nonlinear_cases() {
        let g = grid1(128);
        let p = params();
        // m = 0 -> 0
        let z = g_nonlinear(&RealField::zeros(g, "q"), &[RealField::zeros(g, "m")], &p).unwrap();
        assert!(z[0].linf() < 1e-14);
        // q = 0, m = sin x -> G = -d_x(sin^2 x) = -sin(2x)
        let m = vec![RealField::from_fn(g, "m", |x| x[0].sin()).unwrap()];
        let gv = g_nonlinear(&RealField::zeros(g, "q"), &m, &p).unwrap();
        let exact = RealField::from_fn(g, "e", |x| -(2.0 * x[0]).sin()).unwrap();
        assert!(gv[0].sub(&exact).unwrap().linf() < 1e-12);
        // quadratic scaling is exact for power-of-two factors
        let q = RealField::from_fn(g, "q", |x| 0.2 * x[0].cos()).unwrap();
        let m2 = vec![m[0].scaled(2.0)];
        let g1 = g_nonlinear(&q, &m, &p).unwrap();
        let g2 = g_nonlinear(&q, &m2, &p).unwrap();
        assert!(g2[0].sub(&g1[0].scaled(4.0)).unwrap().linf() == 0.0);
    }

    #[test]
    fn g_nonlinear_matches_refined_grid() {
        let p = params();
        let g = grid1(64);
        let gf = grid1(128);
        let qf = |x: &[f64]| 0.3 * x[0].cos() + 0.1 * (2.0 * x[0]).sin();
        let mf = |x: &[f64]| 0.5 * x[0].sin() + 0.2 * (3.0 * x[0]).cos();
        let q = RealField::from_fn(g, "q", qf).unwrap();
        let m = vec![RealField::from_fn(g, "m", mf).unwrap()];
        let coarse = g_nonlinear(&q, &m, &p).unwrap();
        let qr = RealField::from_fn(gf, "q", qf).unwrap();
        let mr = vec![RealField::from_fn(gf, "m", mf).unwrap()];
        let fine = g_nonlinear(&qr, &mr, &p).unwrap();
        // Compare on the band below the coarse dealias cutoff.
        let cs = coarse[0].to_spectral().unwrap();
        let fs = fine[0].to_spectral().unwrap();
        let cutoff = g.dealias_keep(0);
        let mut max_err = 0.0f64;
        for j in 0..64usize {
            let k = Grid::freq_index(j, 64);
            if k.abs() > cutoff {
                continue;
            }
            let jf = if k >= 0 {
                k as usize
            } else {
                (128 - (-k)) as usize
            };
            max_err = max_err.max((cs.coeffs[j] - fs.coeffs[jf]).norm());
        }
        // The reciprocal tail the coarse grid cannot represent dominates; for
        // these smooth fields it sits far below 1e-10.
        assert!(max_err < 1e-10, "refined-grid deviation {max_err}");
    }

    #[test]
    fn potential_properties() {
        let p = params();
        assert_eq!(pi_potential(1.0, &p).unwrap(), 0.0);
        // Pi'(1) = 0 by finite differences.
        let eps = 1e-5;
        let d = (pi_potential(1.0 + eps, &p).unwrap() - pi_potential(1.0 - eps, &p).unwrap())
            / (2.0 * eps);
        assert!(d.abs() < 1e-9);
        // Pi(e) - Pi(1) = 1/Fr^2.
        let e = std::f64::consts::E;
        let v = pi_potential(e, &p).unwrap();
        assert!((v - p.inv_fr2()).abs() < 1e-14);
        // Quadrature fallback agrees with the closed form.
        for s in [0.3, 0.9, 1.5, e, 4.0] {
            let q = pi_potential_quadrature(s, |z| p.inv_fr2() * z, 2048).unwrap();
            let c = pi_potential(s, &p).unwrap();
            assert!((q - c).abs() < 1e-10 * (1.0 + c.abs()), "s={s}: {q} vs {c}");
        }
        assert!(pi_potential(-1.0, &p).is_err());
        assert!(pi_potential(0.0, &p).is_err());
    }

    #[test]
    fn energy_of_rest_state_vanishes() {
        let g = grid1(32);
        let p = params();
        assert!(energy(&PrimitiveState::rest(g), &p).unwrap().abs() < 1e-14);
        // Perturbed states carry positive energy.
        let h = RealField::from_fn(g, "h", |x| 1.0 + 0.2 * x[0].cos()).unwrap();
        let u = vec![RealField::from_fn(g, "u", |x| 0.1 * x[0].sin()).unwrap()];
        let e = energy(&PrimitiveState::new(h, u).unwrap(), &p).unwrap();
        assert!(e > 0.0);
    }

    #[test]
    fn curl_conventions() {
        let g1 = grid1(32);
        let u1 = vec![RealField::from_fn(g1, "u", |x| x[0].sin()).unwrap()];
        assert_eq!(curl_l2(&u1).unwrap(), 0.0);
        let g2 = Grid::uniform(2, 32).unwrap();
        // Gradient fields are curl-free.
        let psi = RealField::from_fn(g2, "psi", |x| x[0].cos() * x[1].sin()).unwrap();
        let grad = psi.gradient().unwrap();
        assert!(curl_l2(&grad).unwrap() < 1e-11);
        // A shear has curl d1 u2 - d2 u1 = -cos(x2).
        let shear = vec![
            RealField::from_fn(g2, "u1", |x| x[1].sin()).unwrap(),
            RealField::zeros(g2, "u2"),
        ];
        let c = curl_components(&shear).unwrap();
        let exact = RealField::from_fn(g2, "e", |x| -x[1].cos()).unwrap();
        assert!(c[0].sub(&exact).unwrap().linf() < 1e-11);
    }

    /// The divergence terms of both systems have exactly zero mean, which is
    /// what conserves mass discretely.
    #[test]
    fn rhs_mass_mean_is_zero() {
        let g = grid1(64);
        let p = params();
        let h = RealField::from_fn(g, "h", |x| 1.0 + 0.3 * x[0].cos()).unwrap();
        let u = vec![RealField::from_fn(g, "u", |x| 0.2 * (2.0 * x[0]).sin()).unwrap()];
        let (dh, _) = rhs_primitive(&PrimitiveState::new(h, u).unwrap(), &p).unwrap();
        assert!(dh.mean().abs() < 1e-15);
        let q = RealField::from_fn(g, "q", |x| 0.2 * x[0].cos()).unwrap();
        let m = vec![RealField::from_fn(g, "m", |x| 0.3 * x[0].sin()).unwrap()];
        let (dq, _) = rhs_momentum(&MomentumState::new(q, m).unwrap(), &p).unwrap();
        assert!(dq.mean().abs() < 1e-15);
    }

    #[test]
    fn divergence_free_shear_is_steady_nonlinearity_free() {
        // Sanity check of the tensor layout: m = (sin x2, 0) gives G = 0 in 2-D.
        let g = Grid::uniform(2, 32).unwrap();
        let p = params();
        let m = vec![
            RealField::from_fn(g, "m1", |x| x[1].sin()).unwrap(),
            RealField::zeros(g, "m2"),
        ];
        let gv = g_nonlinear(&RealField::zeros(g, "q"), &m, &p).unwrap();
        assert!(gv[0].linf() < 1e-12 && gv[1].linf() < 1e-12);
        // whereas the crossed shear pair does generate a source.
        let m2 = vec![
            RealField::from_fn(g, "m1", |x| x[1].sin()).unwrap(),
            RealField::from_fn(g, "m2", |x| x[0].sin()).unwrap(),
        ];
        let gv2 = g_nonlinear(&RealField::zeros(g, "q"), &m2, &p).unwrap();
        assert!(gv2[0].linf() > 1e-3);
        assert!(divergence(&m2).unwrap().linf() < 1e-12);
    }
}
