//! Matrix-valued Laurent series on the unit circle and their grid samples.
//!
//! Every symbol in the crate (the operator symbol, its Wiener-Hopf factors,
//! the Blaschke product, derived products) is carried as finitely supported
//! Fourier data. Rational symbols enter through geometrically decaying tails
//! trimmed at a configured threshold; the discarded mass is always reported.

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{det_small, inv_small, wrap_phase, CMat, C64};
use crate::params::{next_pow2, NumericParams};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_inplace(buf: &mut [C64], inverse: bool) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let plan = if inverse {
            planner.plan_fft_inverse(buf.len())
        } else {
            planner.plan_fft_forward(buf.len())
        };
        plan.process(buf);
    });
}

const ZERO: C64 = C64::new(0.0, 0.0);

/// Finitely supported Fourier data `{a_n : n_min <= n <= n_max}` of an
/// `m x m` matrix function on the unit circle.
///
/// Blocks are stored contiguously in column-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixLaurentSeries {
    m: usize,
    n_min: i64,
    data: Vec<C64>,
}

/// Where a series is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// `|z| < 1`, plus-type series only.
    Inside,
    /// `|z| > 1`, minus-type series only.
    Outside,
    /// `|z| = 1`, any series.
    Circle,
}

/// Which side of the Fourier axis a function is expected to live on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    Plus,
    Minus,
    TwoSided,
}

impl MatrixLaurentSeries {
    pub fn new(m: usize, n_min: i64, coeffs: Vec<CMat>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidSeries("block size must be positive".into()));
        }
        if coeffs.is_empty() {
            return Ok(Self::zero(m));
        }
        let mut data = Vec::with_capacity(coeffs.len() * m * m);
        for c in &coeffs {
            if c.nrows() != m || c.ncols() != m {
                return Err(Error::BlockSizeMismatch {
                    left: m,
                    right: c.nrows().max(c.ncols()),
                });
            }
            data.extend(c.iter());
        }
        Ok(MatrixLaurentSeries { m, n_min, data })
    }

    /// Raw constructor from column-major block data.
    pub fn from_flat(m: usize, n_min: i64, data: Vec<C64>) -> Result<Self> {
        if m == 0 || data.is_empty() || !data.len().is_multiple_of(m * m) {
            return Err(Error::InvalidSeries(format!(
                "{} values do not form whole {m}x{m} blocks",
                data.len()
            )));
        }
        Ok(MatrixLaurentSeries { m, n_min, data })
    }

    pub fn scalar(n_min: i64, coeffs: &[C64]) -> Self {
        if coeffs.is_empty() {
            return Self::zero(1);
        }
        MatrixLaurentSeries {
            m: 1,
            n_min,
            data: coeffs.to_vec(),
        }
    }

    /// Sum of `(index, block)` terms; repeated indices accumulate.
    pub fn from_terms(m: usize, terms: impl IntoIterator<Item = (i64, CMat)>) -> Result<Self> {
        let terms: Vec<(i64, CMat)> = terms.into_iter().collect();
        if terms.is_empty() {
            return Ok(Self::zero(m));
        }
        let lo = terms.iter().map(|t| t.0).min().unwrap();
        let hi = terms.iter().map(|t| t.0).max().unwrap();
        let mut out = MatrixLaurentSeries {
            m,
            n_min: lo,
            data: vec![ZERO; (hi - lo + 1) as usize * m * m],
        };
        for (n, c) in terms {
            if c.nrows() != m || c.ncols() != m {
                return Err(Error::BlockSizeMismatch {
                    left: m,
                    right: c.nrows().max(c.ncols()),
                });
            }
            let blk = out.block_mut(n);
            for (d, s) in blk.iter_mut().zip(c.iter()) {
                *d += *s;
            }
        }
        Ok(out)
    }

    pub fn zero(m: usize) -> Self {
        MatrixLaurentSeries {
            m,
            n_min: 0,
            data: vec![ZERO; m * m],
        }
    }

    pub fn identity(m: usize) -> Self {
        Self::constant(CMat::identity(m, m))
    }

    pub fn constant(c: CMat) -> Self {
        assert!(c.is_square());
        MatrixLaurentSeries {
            m: c.nrows(),
            n_min: 0,
            data: c.iter().copied().collect(),
        }
    }

    /// `t^n I_m`.
    pub fn monomial(m: usize, n: i64) -> Self {
        let mut s = Self::identity(m);
        s.n_min = n;
        s
    }

    pub fn block_size(&self) -> usize {
        self.m
    }

    pub fn n_min(&self) -> i64 {
        self.n_min
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.len() as i64 - 1
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.data.len() / (self.m * self.m)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `max(|n_min|, |n_max|)`.
    pub fn bandwidth(&self) -> usize {
        self.n_min.unsigned_abs().max(self.n_max().unsigned_abs()) as usize
    }

    /// Column-major block of coefficient `n`, if stored.
    pub fn block(&self, n: i64) -> Option<&[C64]> {
        if n < self.n_min || n > self.n_max() {
            return None;
        }
        let mm = self.m * self.m;
        let k = (n - self.n_min) as usize;
        Some(&self.data[k * mm..(k + 1) * mm])
    }

    fn block_mut(&mut self, n: i64) -> &mut [C64] {
        let mm = self.m * self.m;
        let k = (n - self.n_min) as usize;
        &mut self.data[k * mm..(k + 1) * mm]
    }

    /// Coefficient `a_n` (zero outside the band).
    pub fn coeff(&self, n: i64) -> CMat {
        match self.block(n) {
            Some(b) => CMat::from_column_slice(self.m, self.m, b),
            None => CMat::zeros(self.m, self.m),
        }
    }

    /// Scalar coefficient; only meaningful for `m == 1`.
    pub fn scalar_coeff(&self, n: i64) -> C64 {
        debug_assert_eq!(self.m, 1);
        self.block(n).map_or(ZERO, |b| b[0])
    }

    /// Iterator over `(n, a_n)`.
    pub fn terms(&self) -> impl Iterator<Item = (i64, CMat)> + '_ {
        (self.n_min..=self.n_max()).map(move |n| (n, self.coeff(n)))
    }

    fn block_norm(&self, k: usize) -> f64 {
        let mm = self.m * self.m;
        self.data[k * mm..(k + 1) * mm]
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest coefficient norm (Frobenius).
    pub fn max_coeff_norm(&self) -> f64 {
        (0..self.len()).map(|k| self.block_norm(k)).fold(0.0, f64::max)
    }

    /// Wiener norm `sum_n ||a_n||` with the Frobenius norm on blocks.
    pub fn wiener_norm(&self) -> f64 {
        (0..self.len()).map(|k| self.block_norm(k)).sum()
    }

    /// Krein seminorm `sum_n |n| ||a_n||^2`.
    pub fn krein_seminorm(&self) -> f64 {
        (0..self.len())
            .map(|k| {
                let n = self.n_min + k as i64;
                n.unsigned_abs() as f64 * self.block_norm(k).powi(2)
            })
            .sum()
    }

    pub fn is_plus_type(&self) -> bool {
        self.n_min >= 0 || self.wrong_sign_mass(Support::Plus) == 0.0
    }

    pub fn is_minus_type(&self) -> bool {
        self.n_max() <= 0 || self.wrong_sign_mass(Support::Minus) == 0.0
    }

    /// Wiener mass of the coefficients that violate `support`.
    pub fn wrong_sign_mass(&self, support: Support) -> f64 {
        (0..self.len())
            .filter(|&k| {
                let n = self.n_min + k as i64;
                match support {
                    Support::Plus => n < 0,
                    Support::Minus => n > 0,
                    Support::TwoSided => false,
                }
            })
            .map(|k| self.block_norm(k))
            .sum()
    }

    /// Coefficients with index in `[lo, hi]` (clamped to the band).
    pub fn restrict(&self, lo: i64, hi: i64) -> Self {
        let lo = lo.max(self.n_min);
        let hi = hi.min(self.n_max());
        if lo > hi {
            return Self::zero(self.m);
        }
        let mm = self.m * self.m;
        let a = (lo - self.n_min) as usize;
        let b = (hi - self.n_min) as usize + 1;
        MatrixLaurentSeries {
            m: self.m,
            n_min: lo,
            data: self.data[a * mm..b * mm].to_vec(),
        }
    }

    /// Part with nonnegative (or strictly positive) indices.
    pub fn plus_part(&self, include_zero: bool) -> Self {
        self.restrict(if include_zero { 0 } else { 1 }, i64::MAX)
    }

    /// Part with nonpositive (or strictly negative) indices.
    pub fn minus_part(&self, include_zero: bool) -> Self {
        self.restrict(i64::MIN, if include_zero { 0 } else { -1 })
    }

    /// Drops end coefficients whose norm is at most
    /// `tail_tol * max(1, max_coeff_norm)`; returns the trimmed series and the
    /// Wiener norm of what was dropped.
    pub fn trimmed(&self, tail_tol: f64) -> (Self, f64) {
        let thr = tail_tol * self.max_coeff_norm().max(1.0);
        let len = self.len();
        let mut lo = 0;
        let mut dropped = 0.0;
        while lo < len && self.block_norm(lo) <= thr {
            dropped += self.block_norm(lo);
            lo += 1;
        }
        if lo == len {
            return (Self::zero(self.m), dropped);
        }
        let mut hi = len - 1;
        while hi > lo && self.block_norm(hi) <= thr {
            dropped += self.block_norm(hi);
            hi -= 1;
        }
        let out = self.restrict(self.n_min + lo as i64, self.n_min + hi as i64);
        (out, dropped)
    }

    /// Exact block convolution `x * y`; factor order is preserved.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.m != other.m {
            return Err(Error::BlockSizeMismatch {
                left: self.m,
                right: other.m,
            });
        }
        let m = self.m;
        let mm = m * m;
        let len = self.len() + other.len() - 1;
        let mut data = vec![ZERO; len * mm];
        for i in 0..self.len() {
            let a = &self.data[i * mm..(i + 1) * mm];
            if a.iter().all(|z| *z == ZERO) {
                continue;
            }
            for j in 0..other.len() {
                let b = &other.data[j * mm..(j + 1) * mm];
                let out = &mut data[(i + j) * mm..(i + j + 1) * mm];
                if m == 1 {
                    out[0] += a[0] * b[0];
                    continue;
                }
                for c in 0..m {
                    for k in 0..m {
                        let bkc = b[k + c * m];
                        if bkc == ZERO {
                            continue;
                        }
                        for r in 0..m {
                            out[r + c * m] += a[r + k * m] * bkc;
                        }
                    }
                }
            }
        }
        Ok(MatrixLaurentSeries {
            m,
            n_min: self.n_min + other.n_min,
            data,
        })
    }

    /// Product computed by sampling both factors on a grid wide enough to
    /// hold the product band exactly.
    pub fn multiply_on_grid(&self, other: &Self) -> Result<Self> {
        if self.m != other.m {
            return Err(Error::BlockSizeMismatch {
                left: self.m,
                right: other.m,
            });
        }
        let lo = self.n_min + other.n_min;
        let hi = self.n_max() + other.n_max();
        let n_pts = next_pow2((hi - lo + 1) as usize);
        let g = self.to_grid(n_pts)?.mul(&other.to_grid(n_pts)?)?;
        Self::from_grid(&g, lo, hi)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.m != other.m {
            return Err(Error::BlockSizeMismatch {
                left: self.m,
                right: other.m,
            });
        }
        let lo = self.n_min.min(other.n_min);
        let hi = self.n_max().max(other.n_max());
        let mm = self.m * self.m;
        let mut data = vec![ZERO; (hi - lo + 1) as usize * mm];
        for n in lo..=hi {
            let k = (n - lo) as usize;
            let a = self.block(n);
            let b = other.block(n);
            for e in 0..mm {
                data[k * mm + e] = f(a.map_or(ZERO, |x| x[e]), b.map_or(ZERO, |x| x[e]));
            }
        }
        Ok(MatrixLaurentSeries {
            m: self.m,
            n_min: lo,
            data,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: C64) -> Self {
        MatrixLaurentSeries {
            m: self.m,
            n_min: self.n_min,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `x~(t) = x(1/t)`: coefficient `n` becomes coefficient `-n`.
    pub fn tilde_reverse(&self) -> Self {
        let mm = self.m * self.m;
        let len = self.len();
        let mut data = Vec::with_capacity(self.data.len());
        for k in (0..len).rev() {
            data.extend_from_slice(&self.data[k * mm..(k + 1) * mm]);
        }
        MatrixLaurentSeries {
            m: self.m,
            n_min: -self.n_max(),
            data,
        }
    }

    /// Pointwise adjoint on the circle, `t -> x(t)^*`: coefficients
    /// `(x^*)_n = (x_{-n})^H`.
    pub fn star(&self) -> Self {
        let rev = self.tilde_reverse();
        let m = self.m;
        let mm = m * m;
        let mut data = rev.data.clone();
        for k in 0..rev.len() {
            for r in 0..m {
                for c in 0..m {
                    data[k * mm + r + c * m] = rev.data[k * mm + c + r * m].conj();
                }
            }
        }
        MatrixLaurentSeries {
            m,
            n_min: rev.n_min,
            data,
        }
    }

    /// Samples at `t_k = exp(2 pi i k / n_pts)`. Exact for any band.
    pub fn to_grid(&self, n_pts: usize) -> Result<TorusGrid> {
        check_pow2(n_pts)?;
        let m = self.m;
        let mm = m * m;
        let mut samples = vec![ZERO; n_pts * mm];
        let mut buf = vec![ZERO; n_pts];
        for e in 0..mm {
            buf.iter_mut().for_each(|z| *z = ZERO);
            for k in 0..self.len() {
                let n = self.n_min + k as i64;
                buf[n.rem_euclid(n_pts as i64) as usize] += self.data[k * mm + e];
            }
            fft_inplace(&mut buf, true);
            for (k, z) in buf.iter().enumerate() {
                samples[k * mm + e] = *z;
            }
        }
        Ok(TorusGrid { m, samples })
    }

    /// Fourier coefficients `n_min..=n_max` of grid data.
    pub fn from_grid(grid: &TorusGrid, n_min: i64, n_max: i64) -> Result<Self> {
        let n_pts = grid.n_pts();
        check_pow2(n_pts)?;
        if n_max < n_min || (n_max - n_min + 1) as usize > n_pts {
            return Err(Error::Aliasing {
                n_min,
                n_max,
                n_pts,
            });
        }
        let m = grid.m;
        let mm = m * m;
        let len = (n_max - n_min + 1) as usize;
        let mut data = vec![ZERO; len * mm];
        let mut buf = vec![ZERO; n_pts];
        let scale = 1.0 / n_pts as f64;
        for e in 0..mm {
            for (k, z) in buf.iter_mut().enumerate() {
                *z = grid.samples[k * mm + e];
            }
            fft_inplace(&mut buf, false);
            for i in 0..len {
                let n = n_min + i as i64;
                data[i * mm + e] = buf[n.rem_euclid(n_pts as i64) as usize] * scale;
            }
        }
        Ok(MatrixLaurentSeries { m, n_min, data })
    }

    /// Direct summation `sum_n a_n z^n`, no region check.
    pub(crate) fn eval_raw(&self, z: C64) -> CMat {
        let m = self.m;
        let mm = m * m;
        let mut acc = vec![ZERO; mm];
        // Horner from the top index down, then scale by z^{n_min}.
        for k in (0..self.len()).rev() {
            for e in 0..mm {
                acc[e] = acc[e] * z + self.data[k * mm + e];
            }
        }
        let zp = if self.n_min == 0 {
            C64::new(1.0, 0.0)
        } else {
            z.powi(self.n_min as i32)
        };
        CMat::from_iterator(m, m, acc.into_iter().map(|v| v * zp))
    }

    /// `sum_n a_n z^n` with the absolute-convergence contract of `region`.
    pub fn evaluate(&self, z: C64, region: Region) -> Result<CMat> {
        let r = z.norm();
        match region {
            Region::Inside => {
                if !self.is_plus_type() {
                    return Err(Error::RegionMismatch {
                        kind: "non-plus",
                        region: "inside",
                    });
                }
                if r >= 1.0 {
                    return Err(Error::InvalidArgument(format!("|z| = {r} is not < 1")));
                }
            }
            Region::Outside => {
                if !self.is_minus_type() {
                    return Err(Error::RegionMismatch {
                        kind: "non-minus",
                        region: "outside",
                    });
                }
                if r <= 1.0 {
                    return Err(Error::InvalidArgument(format!("|z| = {r} is not > 1")));
                }
            }
            Region::Circle => {
                if (r - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!("|z| = {r} is not 1")));
                }
            }
        }
        Ok(self.eval_raw(z))
    }

    /// For a minus-type series, `x(1/conj(alpha)) = sum_{k>=0} x_{-k} conj(alpha)^k`,
    /// including the limit `x(infinity) = x_0` at `alpha = 0`.
    pub fn evaluate_minus_at_reflection(&self, alpha: C64) -> Result<CMat> {
        if !self.is_minus_type() {
            return Err(Error::RegionMismatch {
                kind: "non-minus",
                region: "outside",
            });
        }
        if alpha.norm() >= 1.0 {
            return Err(Error::ZeroOutsideDisk {
                re: alpha.re,
                im: alpha.im,
            });
        }
        Ok(self.tilde_reverse().restrict(0, i64::MAX).eval_raw(alpha.conj()))
    }

    /// Winding number of `det x` about the origin.
    ///
    /// The grid is doubled until successive unwrapped phase increments stay
    /// below `pi/2`.
    pub fn winding_number(&self, n_pts: usize, params: &NumericParams) -> Result<i64> {
        let mut n = next_pow2(n_pts.max(4 * self.bandwidth() + 8));
        loop {
            let dets = self.to_grid(n)?.dets();
            check_det_floor(&dets, params)?;
            let mut total = 0.0;
            let mut max_jump = 0.0f64;
            for k in 0..n {
                let d = wrap_phase(dets[(k + 1) % n].arg() - dets[k].arg());
                max_jump = max_jump.max(d.abs());
                total += d;
            }
            if max_jump < PI / 2.0 {
                return Ok((total / (2.0 * PI)).round() as i64);
            }
            if n >= params.grid_cap {
                return Err(Error::UnwrapNotResolved {
                    cap: params.grid_cap,
                });
            }
            n *= 2;
        }
    }

    /// Pointwise inverse on the grid, converted back to trimmed Fourier data.
    ///
    /// The grid starts at `n_pts` and doubles until the outer window of the
    /// coefficient array is below the tail threshold.
    pub fn invert_on_grid(&self, n_pts: usize, params: &NumericParams) -> Result<Adaptive> {
        let start = n_pts.max(2 * self.len() + 2);
        adaptive_series(self.m, Support::TwoSided, start, params, |n| {
            self.to_grid(n)?.inverse()
        })
    }
}

fn check_pow2(n_pts: usize) -> Result<()> {
    if n_pts < 1 || !n_pts.is_power_of_two() {
        return Err(Error::GridNotPowerOfTwo { n_pts });
    }
    Ok(())
}

pub(crate) fn check_det_floor(dets: &[C64], params: &NumericParams) -> Result<()> {
    let max = dets.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let min = dets.iter().fold(f64::INFINITY, |a, z| a.min(z.norm()));
    if !(min > params.det_floor * max.max(1.0)) {
        return Err(Error::NearSingular { min_abs_det: min });
    }
    Ok(())
}

/// Continuous branch of `log z_k` along a closed sampled curve.
pub(crate) fn unwrapped_log(values: &[C64]) -> Vec<C64> {
    // Principal argument plus an integer branch count, so roundoff does not
    // accumulate along long grids.
    let mut out = Vec::with_capacity(values.len());
    let mut branch = 0i64;
    let mut prev = values.first().map_or(0.0, |z| z.arg());
    for z in values {
        let raw = z.arg();
        let step = raw - prev;
        branch += ((wrap_phase(step) - step) / TAU).round() as i64;
        prev = raw;
        out.push(C64::new(z.norm().ln(), raw + TAU * branch as f64));
    }
    out
}

/// Result of an adaptive grid-to-series conversion.
#[derive(Clone, Debug)]
pub struct Adaptive {
    pub series: MatrixLaurentSeries,
    /// Wiener norm of the trimmed coefficients.
    pub tail: f64,
    /// Grid size that passed the tail check.
    pub n_pts: usize,
}

/// Samples a function on successively doubled grids until its coefficient
/// array has a negligible outer window, then trims it.
pub(crate) fn adaptive_series(
    m: usize,
    support: Support,
    n_start: usize,
    params: &NumericParams,
    mut sampler: impl FnMut(usize) -> Result<TorusGrid>,
) -> Result<Adaptive> {
    let mut n = next_pow2(n_start.max(16));
    loop {
        let grid = sampler(n)?;
        debug_assert_eq!(grid.m, m);
        let half = (n / 2) as i64;
        let (lo, hi) = match support {
            Support::Plus => (0, n as i64 - 1),
            Support::Minus => (1 - n as i64, 0),
            Support::TwoSided => (1 - half, half),
        };
        let full = MatrixLaurentSeries::from_grid(&grid, lo, hi)?;
        let thr = params.tail_tol * full.max_coeff_norm().max(1.0);
        let quarter = (n / 4) as i64;
        let outer = full
            .terms_norms()
            .filter(|(idx, _)| match support {
                Support::Plus => *idx >= half,
                Support::Minus => *idx <= -half,
                Support::TwoSided => idx.abs() >= quarter,
            })
            .map(|(_, v)| v)
            .fold(0.0f64, f64::max);
        if outer <= thr {
            let (series, tail) = full.trimmed(params.tail_tol);
            return Ok(Adaptive {
                series,
                tail,
                n_pts: n,
            });
        }
        if n >= params.grid_cap {
            return Err(Error::TailTooLarge {
                tail: outer,
                cap: params.grid_cap,
            });
        }
        n *= 2;
    }
}

impl MatrixLaurentSeries {
    fn terms_norms(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        (0..self.len()).map(move |k| (self.n_min + k as i64, self.block_norm(k)))
    }
}

/// Samples of an `m x m` matrix function at `t_k = exp(2 pi i k / n_pts)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusGrid {
    m: usize,
    samples: Vec<C64>,
}

impl TorusGrid {
    /// Samples `f(t_k)` for every grid point.
    pub fn from_fn(m: usize, n_pts: usize, mut f: impl FnMut(C64) -> CMat) -> Self {
        let mut samples = Vec::with_capacity(n_pts * m * m);
        for k in 0..n_pts {
            let v = f(grid_point(k, n_pts));
            debug_assert_eq!(v.nrows(), m);
            samples.extend(v.iter());
        }
        TorusGrid { m, samples }
    }

    pub fn from_scalars(values: Vec<C64>) -> Self {
        TorusGrid {
            m: 1,
            samples: values,
        }
    }

    pub fn n_pts(&self) -> usize {
        self.samples.len() / (self.m * self.m)
    }

    pub fn block_size(&self) -> usize {
        self.m
    }

    pub fn point(&self, k: usize) -> C64 {
        grid_point(k, self.n_pts())
    }

    pub fn sample(&self, k: usize) -> CMat {
        let mm = self.m * self.m;
        CMat::from_column_slice(self.m, self.m, &self.samples[k * mm..(k + 1) * mm])
    }

    /// Scalar view (entry (0,0) of every sample).
    pub fn scalars(&self) -> Vec<C64> {
        let mm = self.m * self.m;
        self.samples.iter().step_by(mm).copied().collect()
    }

    pub fn dets(&self) -> Vec<C64> {
        if self.m == 1 {
            return self.samples.clone();
        }
        (0..self.n_pts()).map(|k| det_small(&self.sample(k))).collect()
    }

    pub fn mul(&self, other: &TorusGrid) -> Result<TorusGrid> {
        if self.m != other.m || self.n_pts() != other.n_pts() {
            return Err(Error::BlockSizeMismatch {
                left: self.m,
                right: other.m,
            });
        }
        if self.m == 1 {
            return Ok(TorusGrid {
                m: 1,
                samples: self
                    .samples
                    .iter()
                    .zip(&other.samples)
                    .map(|(a, b)| a * b)
                    .collect(),
            });
        }
        let mut samples = Vec::with_capacity(self.samples.len());
        for k in 0..self.n_pts() {
            let p = self.sample(k) * other.sample(k);
            samples.extend(p.iter());
        }
        Ok(TorusGrid { m: self.m, samples })
    }

    pub fn inverse(&self) -> Result<TorusGrid> {
        let mut samples = Vec::with_capacity(self.samples.len());
        let scale = self.samples.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        for k in 0..self.n_pts() {
            let s = self.sample(k);
            let singular = || {
                let t = self.point(k);
                Error::SingularSample {
                    index: k,
                    re: t.re,
                    im: t.im,
                }
            };
            if det_small(&s).norm() <= scale.powi(self.m as i32) * 1e-14 {
                return Err(singular());
            }
            let inv = inv_small(&s).ok_or_else(singular)?;
            samples.extend(inv.iter());
        }
        Ok(TorusGrid { m: self.m, samples })
    }

    /// Applies `f` to every sample.
    pub fn map(&self, mut f: impl FnMut(&CMat) -> CMat) -> TorusGrid {
        let mut samples = Vec::with_capacity(self.samples.len());
        for k in 0..self.n_pts() {
            samples.extend(f(&self.sample(k)).iter());
        }
        TorusGrid { m: self.m, samples }
    }

    /// Largest Frobenius norm of the samplewise difference.
    pub fn max_diff(&self, other: &TorusGrid) -> f64 {
        let mm = self.m * self.m;
        self.samples
            .chunks(mm)
            .zip(other.samples.chunks(mm))
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// `exp(2 pi i k / n)`.
pub fn grid_point(k: usize, n: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
}
