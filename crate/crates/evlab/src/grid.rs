//! Uniform periodic grids, real/spectral field storage, and spectral calculus.
//!
//! Fields live on an N-torus (N = 1, 2, 3) sampled uniformly with a
//! power-of-two point count per axis. The discrete Fourier transform is
//! normalized so that mode zero carries the spatial mean, which keeps
//! Parseval bookkeeping and semigroup multipliers readable. Quadratic
//! nonlinearities go through [`RealField::dealiased_mul`], which zeroes all
//! modes above two thirds of the Nyquist index per axis before and after the
//! pointwise product, so products of band-limited fields are alias-free.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Relative tolerance for the imaginary residue tolerated when transforming
/// spectral data back to physical space.
pub const HERMITIAN_TOL: f64 = 1e-12;

const MAX_DIM: usize = 3;

/// Uniform periodic grid on the N-torus, N in {1, 2, 3}.
///
/// Wavenumbers along an axis with n points and period L are (2*pi/L) * k with
/// integer k in {-n/2, ..., n/2 - 1}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    n: [usize; MAX_DIM],
    len: [f64; MAX_DIM],
}

impl Grid {
    pub fn new(dim: usize, points: &[usize], lengths: &[f64]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1..=3, got {dim}")));
        }
        if points.len() != dim || lengths.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} point counts and lengths, got {} and {}",
                points.len(),
                lengths.len()
            )));
        }
        let mut n = [1usize; MAX_DIM];
        let mut len = [1.0f64; MAX_DIM];
        for a in 0..dim {
            let na = points[a];
            if na < 8 || !na.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "points per axis must be a power of two >= 8, got {na}"
                )));
            }
            if !(lengths[a].is_finite() && lengths[a] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "period must be positive, got {}",
                    lengths[a]
                )));
            }
            n[a] = na;
            len[a] = lengths[a];
        }
        Ok(Grid { dim, n, len })
    }

    /// Grid with period 2*pi and the same point count along every axis.
    pub fn uniform(dim: usize, n: usize) -> Result<Self> {
        let points = vec![n; dim];
        let lengths = vec![2.0 * PI; dim];
        Self::new(dim, &points, &lengths)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.len[..self.dim]
    }

    pub fn total_points(&self) -> usize {
        self.points().iter().product()
    }

    /// Volume of the periodic cell, prod of the periods.
    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Quadrature weight of one grid point.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.total_points() as f64
    }

    fn strides(&self) -> [usize; MAX_DIM] {
        let mut s = [1usize; MAX_DIM];
        for a in (0..self.dim).rev() {
            s[a] = if a + 1 == self.dim {
                1
            } else {
                s[a + 1] * self.n[a + 1]
            };
        }
        s
    }

    /// Signed integer frequency of storage index j on an axis with n points.
    pub fn freq_index(j: usize, n: usize) -> i64 {
        if j < n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    /// Physical wavenumber (2*pi/L) * k for storage index j along `axis`.
    pub fn wavenumber(&self, axis: usize, j: usize) -> f64 {
        let n = self.n[axis];
        2.0 * PI / self.len[axis] * Self::freq_index(j, n) as f64
    }

    /// Largest integer frequency kept by the 2/3 dealiasing rule on `axis`.
    pub fn dealias_keep(&self, axis: usize) -> i64 {
        (2 * (self.n[axis] / 2) / 3) as i64
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let s = self.strides();
        let mut m = [0usize; MAX_DIM];
        let mut rem = flat;
        for a in 0..self.dim {
            m[a] = rem / s[a];
            rem %= s[a];
        }
        m
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let s = self.strides();
        (0..self.dim).map(|a| multi[a] * s[a]).sum()
    }

    /// Physical coordinates of the grid point with flat index `flat`.
    pub fn coords(&self, flat: usize) -> [f64; MAX_DIM] {
        let m = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.len[a] * m[a] as f64 / self.n[a] as f64;
        }
        x
    }

    /// Physical wavevector of the spectral entry with flat index `flat`.
    pub fn wavevector(&self, flat: usize) -> [f64; MAX_DIM] {
        let m = self.multi_index(flat);
        let mut k = [0.0; MAX_DIM];
        for a in 0..self.dim {
            k[a] = self.wavenumber(a, m[a]);
        }
        k
    }

    /// |k|^2 of the spectral entry with flat index `flat`.
    pub fn wavevector_sq(&self, flat: usize) -> f64 {
        let k = self.wavevector(flat);
        (0..self.dim).map(|a| k[a] * k[a]).sum()
    }

    /// Smallest nonzero |k| representable on the grid.
    pub fn min_nonzero_wavenumber(&self) -> f64 {
        (0..self.dim)
            .map(|a| 2.0 * PI / self.len[a])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest |k| representable on the grid (Nyquist corner).
    pub fn max_wavenumber(&self) -> f64 {
        (0..self.dim)
            .map(|a| {
                let k = 2.0 * PI / self.len[a] * (self.n[a] / 2) as f64;
                k * k
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Flat index of the mode at -k (component-wise j -> (n - j) mod n).
    pub fn conjugate_index(&self, flat: usize) -> usize {
        let m = self.multi_index(flat);
        let mut c = [0usize; MAX_DIM];
        for a in 0..self.dim {
            c[a] = if m[a] == 0 { 0 } else { self.n[a] - m[a] };
        }
        self.flat_index(&c[..self.dim])
    }

    /// Short human-readable descriptor used in reports.
    pub fn id(&self) -> String {
        let pts: Vec<String> = self.points().iter().map(|n| n.to_string()).collect();
        let lens: Vec<String> = self.lengths().iter().map(|l| format!("{l:.6}")).collect();
        format!(
            "dim={} n=[{}] L=[{}]",
            self.dim,
            pts.join(","),
            lens.join(",")
        )
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place complex FFT along every axis of a row-major array.
fn fft_all_axes(grid: &Grid, data: &mut [Complex64], forward: bool) {
    let dims = grid.points();
    let strides = grid.strides();
    let total = grid.total_points();
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        for axis in 0..grid.dim() {
            let n = dims[axis];
            let stride = strides[axis];
            let fft = if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            };
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            let block = n * stride;
            let mut base = 0;
            while base < total {
                for off in 0..stride {
                    let start = base + off;
                    for i in 0..n {
                        line[i] = data[start + i * stride];
                    }
                    fft.process(&mut line);
                    for i in 0..n {
                        data[start + i * stride] = line[i];
                    }
                }
                base += block;
            }
        }
    });
}

/// Real-valued samples on a [`Grid`], with a free-form unit label.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    pub grid: Grid,
    pub label: String,
    pub values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid, values: Vec<f64>, label: &str) -> Result<Self> {
        if values.len() != grid.total_points() {
            return Err(Error::InvalidGrid(format!(
                "value count {} does not match grid point count {}",
                values.len(),
                grid.total_points()
            )));
        }
        let f = RealField {
            grid,
            label: label.to_string(),
            values,
        };
        f.check_finite("RealField::new")?;
        Ok(f)
    }

    pub fn zeros(grid: Grid, label: &str) -> Self {
        RealField {
            grid,
            label: label.to_string(),
            values: vec![0.0; grid.total_points()],
        }
    }

    pub fn constant(grid: Grid, value: f64, label: &str) -> Self {
        RealField {
            grid,
            label: label.to_string(),
            values: vec![value; grid.total_points()],
        }
    }

    /// Build a field from a closure of the physical coordinates.
    pub fn from_fn(grid: Grid, label: &str, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..grid.total_points())
            .map(|i| {
                let x = grid.coords(i);
                f(&x[..grid.dim()])
            })
            .collect();
        Self::new(grid, values, label)
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: context.to_string(),
            })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Minimum value together with the multi-index where it is attained.
    pub fn min_with_location(&self) -> (f64, Vec<usize>) {
        let mut min = f64::INFINITY;
        let mut at = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < min {
                min = v;
                at = i;
            }
        }
        let m = self.grid.multi_index(at);
        (min, m[..self.grid.dim()].to_vec())
    }

    pub fn min(&self) -> f64 {
        self.min_with_location().0
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// L^2 norm by grid quadrature, sqrt(sum f^2 * cell volume).
    pub fn l2(&self) -> f64 {
        let w = self.grid.cell_volume();
        (self.values.iter().map(|v| v * v).sum::<f64>() * w).sqrt()
    }

    /// L^p norm by grid quadrature; `p = infinity` is the max norm.
    pub fn lp(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.linf();
        }
        let w = self.grid.cell_volume();
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * w).powf(1.0 / p)
    }

    pub fn map(&self, label: &str, f: impl Fn(f64) -> f64) -> RealField {
        RealField {
            grid: self.grid,
            label: label.to_string(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &RealField,
        label: &str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<RealField> {
        self.same_grid(other)?;
        Ok(RealField {
            grid: self.grid,
            label: label.to_string(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> RealField {
        self.map(&self.label.clone(), |v| v * s)
    }

    pub fn add(&self, other: &RealField) -> Result<RealField> {
        self.zip_map(other, &self.label.clone(), |a, b| a + b)
    }

    pub fn sub(&self, other: &RealField) -> Result<RealField> {
        self.zip_map(other, &self.label.clone(), |a, b| a - b)
    }

    fn same_grid(&self, other: &RealField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{} vs {}",
                self.grid.id(),
                other.grid.id()
            )))
        }
    }

    /// Forward DFT, normalized so mode zero equals the spatial mean.
    ///
    /// Hermitian symmetry is enforced exactly on the output (conjugate mode
    /// pairs are averaged), so real-valued multiplier chains keep the
    /// symmetry to the last bit.
    pub fn to_spectral(&self) -> Result<SpectralField> {
        self.check_finite("forward transform input")?;
        let mut data: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft_all_axes(&self.grid, &mut data, true);
        let scale = 1.0 / self.grid.total_points() as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
        let grid = self.grid;
        for i in 0..data.len() {
            let ci = grid.conjugate_index(i);
            if ci > i {
                let sym = 0.5 * (data[i] + data[ci].conj());
                data[i] = sym;
                data[ci] = sym.conj();
            } else if ci == i {
                data[i] = Complex64::new(data[i].re, 0.0);
            }
        }
        Ok(SpectralField {
            grid: self.grid,
            label: self.label.clone(),
            coeffs: data,
        })
    }

    /// Pointwise product with 2/3-rule dealiasing applied to both factors and
    /// to the result.
    pub fn dealiased_mul(&self, other: &RealField) -> Result<RealField> {
        self.same_grid(other)?;
        let a = self.to_spectral()?.dealiased().to_real()?;
        let b = other.to_spectral()?.dealiased().to_real()?;
        let prod = a.zip_map(&b, &self.label.clone(), |x, y| x * y)?;
        prod.to_spectral()?.dealiased().to_real()
    }

    /// Pointwise 1/h, guarded by a positivity floor.
    ///
    /// Fails with a vacuum-breach diagnostic carrying the offending location
    /// when min(h) <= floor.
    pub fn safe_reciprocal(&self, floor: f64) -> Result<RealField> {
        let (min, location) = self.min_with_location();
        if min <= floor {
            return Err(Error::VacuumBreach {
                min_value: min,
                location,
                floor,
            });
        }
        Ok(self.map("reciprocal", |v| 1.0 / v))
    }

    /// Spectral gradient; component j is the inverse transform of i*k_j*F.
    pub fn gradient(&self) -> Result<Vec<RealField>> {
        let spec = self.to_spectral()?;
        (0..self.grid.dim())
            .map(|axis| spec.derivative(axis).to_real())
            .collect()
    }

    /// Spectral Laplacian, multiplier -|k|^2.
    pub fn laplacian(&self) -> Result<RealField> {
        self.to_spectral()?.laplacian().to_real()
    }
}

/// Divergence of a vector field, sum_j d_j F_j, computed spectrally.
pub fn divergence(components: &[RealField]) -> Result<RealField> {
    let grid = components
        .first()
        .ok_or_else(|| Error::InvalidGrid("divergence of empty vector".into()))?
        .grid;
    if components.len() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "divergence expects {} components, got {}",
            grid.dim(),
            components.len()
        )));
    }
    let mut acc = SpectralField::zeros(grid, "divergence");
    for (axis, f) in components.iter().enumerate() {
        if f.grid != grid {
            return Err(Error::GridMismatch(
                "divergence component grids differ".into(),
            ));
        }
        let d = f.to_spectral()?.derivative(axis);
        for (a, b) in acc.coeffs.iter_mut().zip(&d.coeffs) {
            *a += b;
        }
    }
    acc.to_real()
}

/// Complex Fourier coefficients of a field on a [`Grid`].
///
/// Coefficients of real data satisfy coeff(-k) = conj(coeff(k)); the inverse
/// transform enforces this by rejecting data whose imaginary residue exceeds
/// [`HERMITIAN_TOL`] relative to the field magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub label: String,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid, label: &str) -> Self {
        SpectralField {
            grid,
            label: label.to_string(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.total_points()],
        }
    }

    /// Inverse DFT back to real samples.
    ///
    /// The imaginary residue must stay below [`HERMITIAN_TOL`] relative to
    /// 1 + the field magnitude (the absolute allowance lets analytically-zero
    /// fields made of roundoff pass); larger residue signals corrupted
    /// spectral data.
    pub fn to_real(&self) -> Result<RealField> {
        let mut data = self.coeffs.clone();
        fft_all_axes(&self.grid, &mut data, false);
        let mut max_abs = 0.0f64;
        let mut max_im = 0.0f64;
        for c in &data {
            max_abs = max_abs.max(c.norm_sqr());
            max_im = max_im.max(c.im.abs());
        }
        let scale = 1.0 + max_abs.sqrt();
        if max_im > HERMITIAN_TOL * scale {
            return Err(Error::HermitianViolation {
                residue: max_im / scale,
            });
        }
        RealField::new(self.grid, data.iter().map(|c| c.re).collect(), &self.label)
    }

    /// Multiply every coefficient by a real function of the wavevector.
    pub fn map_modes(&self, f: impl Fn(&[f64]) -> f64) -> SpectralField {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let k = self.grid.wavevector(i);
            *c *= f(&k[..self.grid.dim()]);
        }
        out
    }

    /// i*k_axis multiplier; the unmatched Nyquist mode is zeroed so that
    /// derivatives of real data stay real.
    pub fn derivative(&self, axis: usize) -> SpectralField {
        let n = self.grid.points()[axis];
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let m = self.grid.multi_index(i);
            if m[axis] == n / 2 {
                *c = Complex64::new(0.0, 0.0);
            } else {
                let k = self.grid.wavenumber(axis, m[axis]);
                *c *= Complex64::new(0.0, k);
            }
        }
        out
    }

    /// -|k|^2 multiplier.
    pub fn laplacian(&self) -> SpectralField {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            *c *= -self.grid.wavevector_sq(i);
        }
        out
    }

    /// Zero all modes with an integer frequency above the 2/3 cutoff on any axis.
    pub fn dealiased(&self) -> SpectralField {
        let mut out = self.clone();
        out.dealias_in_place();
        out
    }

    pub fn dealias_in_place(&mut self) {
        let grid = self.grid;
        let keep: Vec<i64> = (0..grid.dim()).map(|a| grid.dealias_keep(a)).collect();
        let dims = grid.points().to_vec();
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            let m = grid.multi_index(i);
            for a in 0..grid.dim() {
                let k = Grid::freq_index(m[a], dims[a]).abs();
                if k > keep[a] {
                    *c = Complex64::new(0.0, 0.0);
                    break;
                }
            }
        }
    }

    /// sum |coeff|^2 * volume; equals the squared L^2 norm of the samples.
    pub fn energy_l2_sq(&self) -> f64 {
        let vol = self.grid.volume();
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * vol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid1(n: usize) -> Grid {
        Grid::uniform(1, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::uniform(0, 16).is_err());
        assert!(Grid::uniform(4, 16).is_err());
        assert!(Grid::uniform(1, 12).is_err());
        assert!(Grid::uniform(1, 4).is_err());
        assert!(Grid::new(1, &[16], &[-1.0]).is_err());
        let g = Grid::new(2, &[16, 32], &[1.0, 2.0]).unwrap();
        assert_eq!(g.total_points(), 512);
        assert!((g.volume() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn wavenumber_layout() {
        let g = grid1(8);
        let freqs: Vec<i64> = (0..8).map(|j| Grid::freq_index(j, 8)).collect();
        assert_eq!(freqs, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert!((g.wavenumber(0, 1) - 1.0).abs() < 1e-15);
        let g2 = Grid::new(1, &[8], &[4.0 * PI]).unwrap();
        assert!((g2.wavenumber(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_field_transforms_to_mean() {
        let g = grid1(16);
        let f = RealField::constant(g, 3.25, "c");
        let spec = f.to_spectral().unwrap();
        assert!((spec.coeffs[0].re - 3.25).abs() < 1e-13);
        assert!(spec.coeffs[1..].iter().all(|c| c.norm() < 1e-13));
    }

    #[test]
    fn cosine_single_mode() {
        let g = grid1(32);
        let f = RealField::from_fn(g, "u", |x| x[0].cos()).unwrap();
        let spec = f.to_spectral().unwrap();
        assert!((spec.coeffs[1] - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        assert!((spec.coeffs[31] - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        let others: f64 = (0..32)
            .filter(|&j| j != 1 && j != 31)
            .map(|j| spec.coeffs[j].norm())
            .sum();
        assert!(others < 1e-12);
    }

    #[test]
    fn inverse_of_zero_and_constant() {
        let g = grid1(16);
        let zero = SpectralField::zeros(g, "z").to_real().unwrap();
        assert!(zero.linf() < 1e-15);
        let mut c = SpectralField::zeros(g, "c");
        c.coeffs[0] = Complex64::new(3.0, 0.0);
        let f = c.to_real().unwrap();
        assert!((f.values[0] - 3.0).abs() < 1e-13);
        assert!(f.values.iter().all(|v| (v - 3.0).abs() < 1e-13));
    }

    #[test]
    fn hermitian_violation_detected() {
        let g = grid1(16);
        let mut s = SpectralField::zeros(g, "bad");
        // A lone complex coefficient without its conjugate partner.
        s.coeffs[1] = Complex64::new(0.0, 1.0);
        match s.to_real() {
            Err(Error::HermitianViolation { residue }) => assert!(residue > 1e-6),
            other => panic!("expected Hermitian violation, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let g = grid1(16);
        let mut vals = vec![0.0; 16];
        vals[3] = f64::NAN;
        assert!(RealField::new(g, vals, "bad").is_err());
    }

    #[test]
    fn gradient_of_cosine() {
        let g = grid1(64);
        let f = RealField::from_fn(g, "u", |x| x[0].cos()).unwrap();
        let grad = f.gradient().unwrap();
        let exact = RealField::from_fn(g, "du", |x| -x[0].sin()).unwrap();
        let err = grad[0].sub(&exact).unwrap().linf();
        assert!(err < 1e-12, "gradient error {err}");
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = Grid::uniform(2, 16).unwrap();
        let f = RealField::constant(g, 5.0, "c");
        let grad = f.gradient().unwrap();
        assert!(grad.iter().all(|c| c.linf() < 1e-13));
    }

    #[test]
    fn gradient_2d_closed_form() {
        // f = sin(2 x1) cos(x2) on L = 2 pi.
        let g = Grid::uniform(2, 64).unwrap();
        let f = RealField::from_fn(g, "f", |x| (2.0 * x[0]).sin() * x[1].cos()).unwrap();
        let grad = f.gradient().unwrap();
        let gx = RealField::from_fn(g, "gx", |x| 2.0 * (2.0 * x[0]).cos() * x[1].cos()).unwrap();
        let gy = RealField::from_fn(g, "gy", |x| -(2.0 * x[0]).sin() * x[1].sin()).unwrap();
        assert!(grad[0].sub(&gx).unwrap().linf() < 1e-12);
        assert!(grad[1].sub(&gy).unwrap().linf() < 1e-12);
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let g = Grid::uniform(2, 32).unwrap();
        let f = RealField::from_fn(g, "f", |x| {
            (x[0]).cos() * (2.0 * x[1]).sin() + 0.3 * x[0].sin()
        })
        .unwrap();
        let lap1 = divergence(&f.gradient().unwrap()).unwrap();
        let lap2 = f.laplacian().unwrap();
        assert!(lap1.sub(&lap2).unwrap().linf() < 1e-11);
    }

    #[test]
    fn laplacian_eigenfunction() {
        let g = grid1(32);
        let f = RealField::from_fn(g, "f", |x| (2.0 * x[0]).cos()).unwrap();
        let lap = f.laplacian().unwrap();
        let exact = f.scaled(-4.0);
        assert!(lap.sub(&exact).unwrap().linf() < 1e-11);
    }

    #[test]
    fn divergence_of_curl_type_field_vanishes() {
        // (-d2 psi, d1 psi) is divergence free for any stream function psi.
        let g = Grid::uniform(2, 32).unwrap();
        let psi = RealField::from_fn(g, "psi", |x| (x[0]).sin() * (3.0 * x[1]).cos()).unwrap();
        let grad = psi.gradient().unwrap();
        let u = vec![grad[1].scaled(-1.0), grad[0].clone()];
        let div = divergence(&u).unwrap();
        assert!(div.linf() < 1e-11);
    }

    #[test]
    fn dealias_identity_on_one() {
        let g = grid1(32);
        let f = RealField::from_fn(g, "f", |x| 0.7 + (3.0 * x[0]).cos()).unwrap();
        let one = RealField::constant(g, 1.0, "1");
        let prod = f.dealiased_mul(&one).unwrap();
        // f is band-limited below the cutoff, so dealias(f) * 1 = f.
        assert!(prod.sub(&f).unwrap().linf() < 1e-12);
    }

    #[test]
    fn dealias_product_to_sum() {
        // cos^2 = 1/2 + cos(2x)/2 as long as mode 2 survives the cutoff.
        let g = grid1(16);
        let f = RealField::from_fn(g, "f", |x| x[0].cos()).unwrap();
        let prod = f.dealiased_mul(&f).unwrap();
        let exact = RealField::from_fn(g, "e", |x| 0.5 + 0.5 * (2.0 * x[0]).cos()).unwrap();
        assert!(prod.sub(&exact).unwrap().linf() < 1e-13);
    }

    /// Independent oracle: multiply on a twice-refined grid where the product
    /// is alias-free, truncate to the coarse cutoff, and compare.
    #[test]
    fn dealias_matches_refined_grid_oracle() {
        let n = 32;
        let g = grid1(n);
        let gf = grid1(2 * n);
        let cutoff = g.dealias_keep(0);
        let mut rng_state = 88172645463325252u64;
        let mut next = move || {
            // xorshift; deterministic small-noise generator for the test
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state as f64 / u64::MAX as f64) - 0.5
        };
        let mut mk = |seed_shift: f64| {
            let coefs: Vec<(f64, f64)> = (1..=cutoff).map(|_| (next(), next())).collect();
            move |x: &[f64]| {
                let mut v = seed_shift;
                for (k, (a, b)) in coefs.iter().enumerate() {
                    let kk = (k + 1) as f64;
                    v += a * (kk * x[0]).cos() + b * (kk * x[0]).sin();
                }
                v
            }
        };
        let f1 = mk(0.2);
        let f2 = mk(-0.1);
        let a = RealField::from_fn(g, "a", &f1).unwrap();
        let b = RealField::from_fn(g, "b", &f2).unwrap();
        let coarse = a.dealiased_mul(&b).unwrap();

        let af = RealField::from_fn(gf, "a", &f1).unwrap();
        let bf = RealField::from_fn(gf, "b", &f2).unwrap();
        let pf = af.zip_map(&bf, "p", |x, y| x * y).unwrap();
        let spec_f = pf.to_spectral().unwrap();
        // Truncate the refined product to the coarse cutoff and restrict.
        let mut coarse_spec = SpectralField::zeros(g, "p");
        for j in 0..n {
            let k = Grid::freq_index(j, n);
            if k.abs() > cutoff {
                continue;
            }
            let jf = if k >= 0 {
                k as usize
            } else {
                (2 * n) as i64 as usize - (-k) as usize
            };
            coarse_spec.coeffs[j] = spec_f.coeffs[jf];
        }
        let oracle = coarse_spec.to_real().unwrap();
        let err = coarse.sub(&oracle).unwrap().linf();
        assert!(err < 1e-10, "refined-grid oracle mismatch {err}");
    }

    #[test]
    fn dealias_grid_mismatch_rejected() {
        let a = RealField::zeros(grid1(16), "a");
        let b = RealField::zeros(grid1(32), "b");
        assert!(matches!(a.dealiased_mul(&b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn safe_reciprocal_constant() {
        let g = grid1(16);
        let h = RealField::constant(g, 2.0, "h");
        let r = h.safe_reciprocal(0.1).unwrap();
        assert!(r.values.iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn safe_reciprocal_pointwise_oracle() {
        let g = grid1(64);
        let h = RealField::from_fn(g, "h", |x| 1.0 + 0.5 * x[0].cos()).unwrap();
        let r = h.safe_reciprocal(0.1).unwrap();
        for i in 0..g.total_points() {
            let x = g.coords(i);
            let exact = 1.0 / (1.0 + 0.5 * x[0].cos());
            assert!((r.values[i] - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn safe_reciprocal_vacuum_breach() {
        let g = grid1(64);
        let h = RealField::from_fn(g, "h", |x| 0.55 + 0.5 * x[0].cos()).unwrap();
        match h.safe_reciprocal(0.1) {
            Err(Error::VacuumBreach {
                min_value,
                location,
                floor,
            }) => {
                assert!(min_value <= 0.1);
                assert!((floor - 0.1).abs() < 1e-15);
                // Minimum of 0.55 + 0.5 cos(x) sits at x = pi, index n/2.
                assert_eq!(location, vec![32]);
            }
            other => panic!("expected vacuum breach, got {other:?}"),
        }
    }

    #[test]
    fn parseval_identity() {
        let g = Grid::uniform(2, 32).unwrap();
        let f = RealField::from_fn(g, "f", |x| {
            0.3 + (x[0]).cos() * (2.0 * x[1]).sin() + 0.2 * (3.0 * x[0] + x[1]).sin()
        })
        .unwrap();
        let quad = f.l2();
        let spec = f.to_spectral().unwrap().energy_l2_sq().sqrt();
        assert!((quad - spec).abs() <= 1e-12 * quad.max(1.0));
    }

    #[test]
    fn single_mode_coefficients_invert_to_cosine() {
        let g = grid1(32);
        let mut s = SpectralField::zeros(g, "c");
        s.coeffs[1] = Complex64::new(0.5, 0.0);
        s.coeffs[31] = Complex64::new(0.5, 0.0);
        let f = s.to_real().unwrap();
        let exact = RealField::from_fn(g, "e", |x| x[0].cos()).unwrap();
        assert!(f.sub(&exact).unwrap().linf() < 1e-12);
    }

    #[test]
    fn three_dimensional_calculus() {
        let g = Grid::uniform(3, 16).unwrap();
        let f = RealField::from_fn(g, "f", |x| {
            (x[0]).cos() * (2.0 * x[1]).sin() + 0.5 * (x[2]).sin()
        })
        .unwrap();
        // Closed-form gradient.
        let grad = f.gradient().unwrap();
        let gx = RealField::from_fn(g, "gx", |x| -(x[0]).sin() * (2.0 * x[1]).sin()).unwrap();
        let gy = RealField::from_fn(g, "gy", |x| 2.0 * (x[0]).cos() * (2.0 * x[1]).cos()).unwrap();
        let gz = RealField::from_fn(g, "gz", |x| 0.5 * (x[2]).cos()).unwrap();
        assert!(grad[0].sub(&gx).unwrap().linf() < 1e-12);
        assert!(grad[1].sub(&gy).unwrap().linf() < 1e-12);
        assert!(grad[2].sub(&gz).unwrap().linf() < 1e-12);
        // Laplacian agrees with divergence of the gradient.
        let lap1 = divergence(&grad).unwrap();
        let lap2 = f.laplacian().unwrap();
        assert!(lap1.sub(&lap2).unwrap().linf() < 1e-11);
        // Parseval.
        let quad = f.l2();
        let spec = f.to_spectral().unwrap().energy_l2_sq().sqrt();
        assert!((quad - spec).abs() <= 1e-12 * quad.max(1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn roundtrip_identity(seed in 0u64..1_000_000) {
            let g = grid1(32);
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            let mut next = || {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                (state as f64 / u64::MAX as f64) - 0.5
            };
            let values: Vec<f64> = (0..32).map(|_| next()).collect();
            let f = RealField::new(g, values, "r").unwrap();
            let back = f.to_spectral().unwrap().to_real().unwrap();
            let err = back.sub(&f).unwrap().linf();
            let scale = f.linf().max(1e-30);
            prop_assert!(err <= 1e-12 * scale);
        }

        #[test]
        fn parseval_random(seed in 0u64..1_000_000) {
            let g = grid1(64);
            let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            let mut next = || {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                (state as f64 / u64::MAX as f64) - 0.5
            };
            let values: Vec<f64> = (0..64).map(|_| next()).collect();
            let f = RealField::new(g, values, "r").unwrap();
            let quad = f.l2();
            let spec = f.to_spectral().unwrap().energy_l2_sq().sqrt();
            prop_assert!((quad - spec).abs() <= 1e-12 * quad.max(1e-30));
        }

        #[test]
        fn dealiased_product_symmetric_and_bilinear(seed in 0u64..100_000) {
            let g = grid1(32);
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15u64).wrapping_add(7);
            let mut next = || {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                (state as f64 / u64::MAX as f64) - 0.5
            };
            let a = RealField::new(g, (0..32).map(|_| next()).collect(), "a").unwrap();
            let b = RealField::new(g, (0..32).map(|_| next()).collect(), "b").unwrap();
            let ab = a.dealiased_mul(&b).unwrap();
            let ba = b.dealiased_mul(&a).unwrap();
            // Symmetry is exact: both paths perform identical operations.
            prop_assert!(ab.sub(&ba).unwrap().linf() == 0.0);
            // Scaling by a power of two commutes exactly with the transform chain.
            let a2 = a.scaled(2.0);
            let a2b = a2.dealiased_mul(&b).unwrap();
            let ab2 = ab.scaled(2.0);
            prop_assert!(a2b.sub(&ab2).unwrap().linf() == 0.0);
        }
    }
}
