//! Dyadic frequency decomposition and Besov-type norms.
//!
//! The decomposition uses a smooth radial cutoff chi equal to 1 on
//! |xi| <= 3/4 and 0 on |xi| >= 4/3, and the ring function
//! phi(xi) = chi(xi/2) - chi(xi), supported in the annulus
//! 3/4 <= |xi| <= 8/3. Block l applies phi(2^-l xi) as a Fourier multiplier,
//! and the low-frequency partial sum S_l u = sum_{k <= l-1} Delta_k u is the
//! multiplier chi(2^-l xi) (which also carries the mean mode, chi(0) = 1).
//!
//! On the torus the annuli below the smallest nonzero wavenumber are empty,
//! so only finitely many blocks are active; the mean is excluded from every
//! block and the homogeneous norms reported here measure the mean-free part
//! of a field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, RealField, SpectralField};

/// An integrability or summation exponent in [1, infinity].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn finite(self) -> Option<f64> {
        match self {
            Exponent::Finite(p) => Some(p),
            Exponent::Infinity => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn validate(self, name: &str) -> Result<()> {
        match self {
            Exponent::Finite(p) if p >= 1.0 && p.is_finite() => Ok(()),
            Exponent::Infinity => Ok(()),
            Exponent::Finite(p) => Err(Error::InvalidParams(format!(
                "{name} exponent must lie in [1, inf], got {p}"
            ))),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) if p.is_infinite() => Ok(Exponent::Infinity),
            Raw::Num(p) => Ok(Exponent::Finite(p)),
            Raw::Text(t) if t == "inf" || t == "infinity" => Ok(Exponent::Infinity),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad exponent {t:?}"))),
        }
    }
}

/// Index triple (s, p, r) of a Besov space B^s_{p,r}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovSpec {
    pub s: f64,
    pub p: Exponent,
    pub r: Exponent,
}

impl BesovSpec {
    pub fn new(s: f64, p: Exponent, r: Exponent) -> Result<Self> {
        p.validate("p")?;
        r.validate("r")?;
        Ok(BesovSpec { s, p, r })
    }

    /// B^s_{2,1}, the workhorse scale of the solver.
    pub fn l2_summed(s: f64) -> Self {
        BesovSpec {
            s,
            p: Exponent::Finite(2.0),
            r: Exponent::Finite(1.0),
        }
    }

    /// Compact identifier, safe for CSV headers and file names.
    pub fn tag(&self) -> String {
        let fmt = |e: Exponent| match e {
            Exponent::Finite(p) => format!("{p}"),
            Exponent::Infinity => "inf".to_string(),
        };
        format!("B_s{}_p{}_r{}", self.s, fmt(self.p), fmt(self.r))
    }
}

/// Per-block norm breakdown of one field.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormReport {
    pub spec: BesovSpec,
    pub grid: String,
    pub blocks: Vec<BlockValue>,
    pub aggregate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockValue {
    pub l: i32,
    /// 2^(l s) * ||Delta_l u||_{L^p}
    pub value: f64,
}

impl NormReport {
    /// Recompute the aggregate from the block values (the r-sum, or the sup
    /// for r = infinity).
    pub fn recompute_aggregate(&self) -> f64 {
        aggregate(self.blocks.iter().map(|b| b.value), self.spec.r)
    }
}

fn aggregate(values: impl Iterator<Item = f64>, r: Exponent) -> f64 {
    match r {
        Exponent::Infinity => values.fold(0.0, f64::max),
        Exponent::Finite(r) if (r - 1.0).abs() < 1e-14 => values.sum(),
        Exponent::Finite(r) => values.map(|v| v.powf(r)).sum::<f64>().powf(1.0 / r),
    }
}

/// C-infinity step: 1 for t <= 0, 0 for t >= 1.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        b / (a + b)
    }
}

/// Radial cutoff: 1 on |xi| <= 3/4, 0 on |xi| >= 4/3, smooth in between.
pub fn chi(xi: f64) -> f64 {
    smooth_step((xi.abs() - 0.75) / (4.0 / 3.0 - 0.75))
}

/// Ring function phi(xi) = chi(xi/2) - chi(xi), supported in 3/4 <= |xi| <= 8/3.
pub fn phi(xi: f64) -> f64 {
    chi(xi / 2.0) - chi(xi)
}

/// Dyadic multiplier bank for one grid.
///
/// Stores chi(2^-l |k|) for every mode and every l in l_min ..= l_max + 1, so
/// that block masks telescope exactly:
/// phi(2^-l |k|) = chi(2^-(l+1) |k|) - chi(2^-l |k|).
#[derive(Clone, Debug)]
pub struct DyadicMultiplier {
    grid: Grid,
    l_min: i32,
    l_max: i32,
    /// chi_levels[i][mode] = chi(2^-(l_min + i) |k_mode|), i = 0 ..= (l_max - l_min + 1).
    chi_levels: Vec<Vec<f64>>,
    /// |k| per mode.
    mags: Vec<f64>,
}

impl DyadicMultiplier {
    pub fn build(grid: Grid) -> Result<Self> {
        let kmin = grid.min_nonzero_wavenumber();
        let kmax = grid.max_wavenumber();
        let l_min = (0.75 * kmin).log2().floor() as i32;
        let l_max = ((2.0 / 3.0) * kmax).log2().ceil() as i32;
        let blocks = l_max - l_min + 1;
        if blocks < 3 {
            return Err(Error::TooCoarse(format!(
                "only {blocks} dyadic blocks fit between |k|={kmin:.3} and |k|={kmax:.3}"
            )));
        }
        let total = grid.total_points();
        let mags: Vec<f64> = (0..total).map(|i| grid.wavevector_sq(i).sqrt()).collect();
        let mut chi_levels = Vec::with_capacity((blocks + 2) as usize);
        for level in 0..=blocks {
            let l = l_min + level;
            let scale = 2f64.powi(-l);
            chi_levels.push(mags.iter().map(|&m| chi(m * scale)).collect());
        }
        Ok(DyadicMultiplier {
            grid,
            l_min,
            l_max,
            chi_levels,
            mags,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn block_range(&self) -> (i32, i32) {
        (self.l_min, self.l_max)
    }

    pub fn blocks(&self) -> impl Iterator<Item = i32> {
        self.l_min..=self.l_max
    }

    /// phi(2^-l |k|) for every mode; zero outside l_min ..= l_max.
    pub fn block_mask(&self, l: i32) -> Vec<f64> {
        let total = self.grid.total_points();
        if l < self.l_min || l > self.l_max {
            return vec![0.0; total];
        }
        let i = (l - self.l_min) as usize;
        self.chi_levels[i + 1]
            .iter()
            .zip(&self.chi_levels[i])
            .map(|(hi, lo)| hi - lo)
            .collect()
    }

    /// chi(2^-l |k|) for every mode; the multiplier of S_l (mean included).
    pub fn low_mask(&self, l: i32) -> Vec<f64> {
        let total = self.grid.total_points();
        if l < self.l_min {
            // Below every annulus only the mean survives.
            let mut m = vec![0.0; total];
            for (i, v) in m.iter_mut().enumerate() {
                if self.mags[i] == 0.0 {
                    *v = 1.0;
                }
            }
            return m;
        }
        if l > self.l_max + 1 {
            return vec![1.0; total];
        }
        self.chi_levels[(l - self.l_min) as usize].clone()
    }

    fn check_grid(&self, u: &RealField) -> Result<()> {
        if u.grid == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "multiplier built for {}, field on {}",
                self.grid.id(),
                u.grid.id()
            )))
        }
    }

    /// Frequency-localized piece Delta_l u.
    pub fn dyadic_block(&self, u: &RealField, l: i32) -> Result<RealField> {
        self.check_grid(u)?;
        let spec = u.to_spectral()?;
        self.block_from_spectral(&spec, l).to_real()
    }

    fn block_from_spectral(&self, spec: &SpectralField, l: i32) -> SpectralField {
        let mask = self.block_mask(l);
        let mut out = spec.clone();
        for (c, m) in out.coeffs.iter_mut().zip(&mask) {
            *c *= m;
        }
        out
    }

    /// Low-frequency partial sum S_l u = sum_{k <= l-1} Delta_k u plus the mean.
    pub fn low_freq(&self, u: &RealField, l: i32) -> Result<RealField> {
        self.check_grid(u)?;
        let spec = u.to_spectral()?;
        let mask = self.low_mask(l);
        let mut out = spec;
        for (c, m) in out.coeffs.iter_mut().zip(&mask) {
            *c *= m;
        }
        out.to_real()
    }

    /// ||Delta_l u||_{L^p} for one scalar field already transformed.
    fn block_lp(&self, spec: &SpectralField, l: i32, p: Exponent) -> Result<f64> {
        match p {
            Exponent::Finite(pv) if (pv - 2.0).abs() < 1e-14 => {
                let mask = self.block_mask(l);
                let vol = self.grid.volume();
                let sum: f64 = spec
                    .coeffs
                    .iter()
                    .zip(&mask)
                    .map(|(c, m)| {
                        let a = m * c.norm();
                        a * a
                    })
                    .sum();
                Ok((sum * vol).sqrt())
            }
            p => {
                let block = self.block_from_spectral(spec, l).to_real()?;
                Ok(block.lp(p.as_f64()))
            }
        }
    }

    /// ||Delta_l m||_{L^p} of a vector field: pointwise Euclidean magnitude in
    /// physical space (for p = 2, equivalently the root of the component sum).
    fn block_lp_vector(&self, specs: &[SpectralField], l: i32, p: Exponent) -> Result<f64> {
        match p {
            Exponent::Finite(pv) if (pv - 2.0).abs() < 1e-14 => {
                let mut sq = 0.0;
                for s in specs {
                    let v = self.block_lp(s, l, p)?;
                    sq += v * v;
                }
                Ok(sq.sqrt())
            }
            p => {
                let comps: Vec<RealField> = specs
                    .iter()
                    .map(|s| self.block_from_spectral(s, l).to_real())
                    .collect::<Result<_>>()?;
                let grid = self.grid;
                let mut mag = RealField::zeros(grid, "block magnitude");
                for c in &comps {
                    for (m, v) in mag.values.iter_mut().zip(&c.values) {
                        *m += v * v;
                    }
                }
                for m in mag.values.iter_mut() {
                    *m = m.sqrt();
                }
                Ok(mag.lp(p.as_f64()))
            }
        }
    }

    /// Unweighted per-block L^2 norms of a (possibly vector) field, ordered
    /// l_min ..= l_max. One spectral pass feeds any number of (s, r) reads.
    pub fn block_l2_table(&self, fields: &[SpectralField]) -> Result<Vec<f64>> {
        self.blocks()
            .map(|l| self.block_lp_vector(fields, l, Exponent::Finite(2.0)))
            .collect()
    }

    /// Besov norm of a scalar field with per-block breakdown.
    pub fn besov_norm(&self, u: &RealField, spec: BesovSpec) -> Result<NormReport> {
        self.check_grid(u)?;
        u.check_finite("besov_norm input")?;
        let f = u.to_spectral()?;
        self.besov_from_spectral(std::slice::from_ref(&f), spec)
    }

    /// Besov norm of a vector field (blocks measured in the Euclidean norm).
    pub fn besov_norm_vector(&self, u: &[RealField], spec: BesovSpec) -> Result<NormReport> {
        let specs: Vec<SpectralField> = u
            .iter()
            .map(|c| {
                self.check_grid(c)?;
                c.to_spectral()
            })
            .collect::<Result<_>>()?;
        self.besov_from_spectral(&specs, spec)
    }

    fn besov_from_spectral(&self, fields: &[SpectralField], spec: BesovSpec) -> Result<NormReport> {
        let mut blocks = Vec::new();
        for l in self.blocks() {
            let lp = self.block_lp_vector(fields, l, spec.p)?;
            let w = (2f64).powf(l as f64 * spec.s);
            blocks.push(BlockValue { l, value: w * lp });
        }
        let agg = aggregate(blocks.iter().map(|b| b.value), spec.r);
        Ok(NormReport {
            spec,
            grid: self.grid.id(),
            blocks,
            aggregate: agg,
        })
    }

    /// Time-integrated norm with the time integral taken inside the block
    /// sum: ( sum_l 2^(l r s) || ||Delta_l u(t)||_Lp ||^r_{L^rho over [0, T]} )^(1/r).
    ///
    /// The series must be uniformly sampled with step `dt`; the inner time
    /// norm uses trapezoidal quadrature (the sup over samples for rho = inf).
    pub fn chemin_lerner_norm(
        &self,
        series: &[RealField],
        dt: f64,
        rho: Exponent,
        spec: BesovSpec,
    ) -> Result<NormReport> {
        let views: Vec<&[RealField]> = series.iter().map(std::slice::from_ref).collect();
        self.chemin_lerner_impl(&views, dt, rho, spec)
    }

    /// Vector-field variant of [`Self::chemin_lerner_norm`].
    pub fn chemin_lerner_norm_vector(
        &self,
        series: &[Vec<RealField>],
        dt: f64,
        rho: Exponent,
        spec: BesovSpec,
    ) -> Result<NormReport> {
        let views: Vec<&[RealField]> = series.iter().map(|v| v.as_slice()).collect();
        self.chemin_lerner_impl(&views, dt, rho, spec)
    }

    fn chemin_lerner_impl(
        &self,
        series: &[&[RealField]],
        dt: f64,
        rho: Exponent,
        spec: BesovSpec,
    ) -> Result<NormReport> {
        if series.is_empty() {
            return Err(Error::EmptySeries);
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::SamplingMismatch(format!("bad sample step {dt}")));
        }
        rho.validate("rho")?;
        // Per-sample spectral transforms, once.
        let mut spectra: Vec<Vec<SpectralField>> = Vec::with_capacity(series.len());
        for sample in series {
            let fs: Vec<SpectralField> = sample
                .iter()
                .map(|f| {
                    self.check_grid(f)?;
                    f.to_spectral()
                })
                .collect::<Result<_>>()?;
            spectra.push(fs);
        }
        let mut blocks = Vec::new();
        for l in self.blocks() {
            let values: Vec<f64> = spectra
                .iter()
                .map(|fs| self.block_lp_vector(fs, l, spec.p))
                .collect::<Result<_>>()?;
            let time_norm = match rho {
                Exponent::Infinity => values.iter().fold(0.0, |m: f64, &v| m.max(v)),
                Exponent::Finite(rv) => {
                    trapezoid(&values.iter().map(|v| v.powf(rv)).collect::<Vec<_>>(), dt)
                        .powf(1.0 / rv)
                }
            };
            let w = (2f64).powf(l as f64 * spec.s);
            blocks.push(BlockValue {
                l,
                value: w * time_norm,
            });
        }
        let agg = aggregate(blocks.iter().map(|b| b.value), spec.r);
        Ok(NormReport {
            spec,
            grid: self.grid.id(),
            blocks,
            aggregate: agg,
        })
    }
}

/// Trapezoidal quadrature of uniformly sampled values.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let interior: f64 = values[1..n - 1].iter().sum();
            dt * (0.5 * values[0] + interior + 0.5 * values[n - 1])
        }
    }
}

/// L^rho-in-time of pointwise Besov norms (time norm outside the block sum).
pub fn time_lp_of_besov(
    multiplier: &DyadicMultiplier,
    series: &[RealField],
    dt: f64,
    rho: Exponent,
    spec: BesovSpec,
) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let norms: Vec<f64> = series
        .iter()
        .map(|f| multiplier.besov_norm(f, spec).map(|r| r.aggregate))
        .collect::<Result<_>>()?;
    Ok(match rho {
        Exponent::Infinity => norms.iter().fold(0.0, |m: f64, &v| m.max(v)),
        Exponent::Finite(rv) => {
            trapezoid(&norms.iter().map(|v| v.powf(rv)).collect::<Vec<_>>(), dt).powf(1.0 / rv)
        }
    })
}

/// Vector variant of [`time_lp_of_besov`].
pub fn time_lp_of_besov_vector(
    multiplier: &DyadicMultiplier,
    series: &[Vec<RealField>],
    dt: f64,
    rho: Exponent,
    spec: BesovSpec,
) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let norms: Vec<f64> = series
        .iter()
        .map(|f| multiplier.besov_norm_vector(f, spec).map(|r| r.aggregate))
        .collect::<Result<_>>()?;
    Ok(match rho {
        Exponent::Infinity => norms.iter().fold(0.0, |m: f64, &v| m.max(v)),
        Exponent::Finite(rv) => {
            trapezoid(&norms.iter().map(|v| v.powf(rv)).collect::<Vec<_>>(), dt).powf(1.0 / rv)
        }
    })
}
