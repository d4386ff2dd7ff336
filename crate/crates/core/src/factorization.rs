//! Canonical right and left Wiener-Hopf factorizations `a = w_- w_+ = v_+ v_-`,
//! the derived pair `b = v_- w_+^{-1}`, `c = w_-^{-1} v_+`, and geometric means.
//!
//! Normalization: `(w_-)_0 = I` and `(v_+)_0 = I`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::laurent::{
    adaptive_series, check_det_floor, grid_point, unwrapped_log, MatrixLaurentSeries, Support,
    TorusGrid,
};
use crate::linalg::{det_small, wrap_phase, CMat, NeumaierSum, C64};
use crate::modelspace::moebius;
use crate::operators::toeplitz_section;
use crate::params::{next_pow2, NumericParams};

/// How the right factorization is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorizationMethod {
    /// Log splitting for scalar symbols, finite sections otherwise.
    #[default]
    Auto,
    /// Split the unwrapped logarithm into its Fourier halves (scalar only).
    LogSplit,
    /// Solve a growing finite section of the block Toeplitz matrix.
    FiniteSection,
}

#[derive(Clone, Debug)]
pub struct RightFactorization {
    pub w_minus: MatrixLaurentSeries,
    pub w_plus: MatrixLaurentSeries,
    /// `max_t ||a(t) - w_-(t) w_+(t)||` on a check grid.
    pub residual: f64,
    /// Final section size (block rows) of the finite-section route.
    pub section_size: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct LeftFactorization {
    pub v_plus: MatrixLaurentSeries,
    pub v_minus: MatrixLaurentSeries,
    pub residual: f64,
    pub section_size: Option<usize>,
}

/// Both canonical factorizations of a symbol together with `b` and `c`.
#[derive(Clone, Debug)]
pub struct CanonicalFactorization {
    pub w_minus: MatrixLaurentSeries,
    pub w_plus: MatrixLaurentSeries,
    pub v_plus: MatrixLaurentSeries,
    pub v_minus: MatrixLaurentSeries,
    pub b: MatrixLaurentSeries,
    pub c: MatrixLaurentSeries,
    pub right_residual: f64,
    pub left_residual: f64,
    /// Wiener mass trimmed from `b` and `c`.
    pub bc_tail: f64,
    /// For scalar symbols, `max_t |b(t) c(t) - 1|`; zero otherwise.
    pub scalar_bc_defect: f64,
    pub method: FactorizationMethod,
}

impl CanonicalFactorization {
    pub fn compute(
        a: &MatrixLaurentSeries,
        method: FactorizationMethod,
        params: &NumericParams,
    ) -> Result<Self> {
        let right = right_factorize(a, method, params).stage("right factorization")?;
        let left = left_factorize(a, method, params).stage("left factorization")?;
        let (b, c, bc_tail) = bc_pair(&right, &left, params).stage("b/c pair")?;
        let scalar_bc_defect = if a.block_size() == 1 {
            let n = next_pow2(4 * (b.len() + c.len()));
            let prod = b.to_grid(n)?.mul(&c.to_grid(n)?)?;
            prod.scalars()
                .iter()
                .map(|z| (z - 1.0).norm())
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        Ok(CanonicalFactorization {
            w_minus: right.w_minus,
            w_plus: right.w_plus,
            v_plus: left.v_plus,
            v_minus: left.v_minus,
            b,
            c,
            right_residual: right.residual,
            left_residual: left.residual,
            bc_tail,
            scalar_bc_defect,
            method: resolve(method, a.block_size()),
        })
    }
}

fn resolve(method: FactorizationMethod, m: usize) -> FactorizationMethod {
    match method {
        FactorizationMethod::Auto if m == 1 => FactorizationMethod::LogSplit,
        FactorizationMethod::Auto => FactorizationMethod::FiniteSection,
        other => other,
    }
}

/// `max_t ||x(t) - y(t) z(t)||` on a grid that resolves all three series.
fn product_residual(
    x: &MatrixLaurentSeries,
    y: &MatrixLaurentSeries,
    z: &MatrixLaurentSeries,
) -> Result<f64> {
    let n = next_pow2(2 * (x.len() + y.len() + z.len()));
    let prod = y.to_grid(n)?.mul(&z.to_grid(n)?)?;
    Ok(x.to_grid(n)?.max_diff(&prod))
}

/// Rejects symbols that are singular on the circle or have nonzero winding.
pub fn check_symbol(a: &MatrixLaurentSeries, params: &NumericParams) -> Result<()> {
    let w = a.winding_number(64, params)?;
    if w != 0 {
        return Err(Error::NonzeroWinding(w));
    }
    Ok(())
}

/// Right canonical factorization `a = w_- w_+` with `(w_-)_0 = I`.
pub fn right_factorize(
    a: &MatrixLaurentSeries,
    method: FactorizationMethod,
    params: &NumericParams,
) -> Result<RightFactorization> {
    check_symbol(a, params)?;
    match resolve(method, a.block_size()) {
        FactorizationMethod::LogSplit => {
            if a.block_size() != 1 {
                return Err(Error::InvalidArgument(
                    "log splitting needs a scalar symbol".into(),
                ));
            }
            let parts = LogParts::compute(a, params)?;
            let w_minus = parts.exp_part(Support::Minus, false, params)?;
            let w_plus = parts.exp_part(Support::Plus, true, params)?;
            let residual = product_residual(a, &w_minus, &w_plus)?;
            if residual > params.tol {
                return Err(Error::NoCanonicalFactorization { residual });
            }
            Ok(RightFactorization {
                w_minus,
                w_plus,
                residual,
                section_size: None,
            })
        }
        _ => finite_section_right(a, params),
    }
}

/// Left canonical factorization `a = v_+ v_-` with `(v_+)_0 = I`, obtained
/// from the right factorization of `a~`.
pub fn left_factorize(
    a: &MatrixLaurentSeries,
    method: FactorizationMethod,
    params: &NumericParams,
) -> Result<LeftFactorization> {
    let r = right_factorize(&a.tilde_reverse(), method, params)?;
    let v_plus = r.w_minus.tilde_reverse();
    let v_minus = r.w_plus.tilde_reverse();
    let residual = product_residual(a, &v_plus, &v_minus)?;
    Ok(LeftFactorization {
        v_plus,
        v_minus,
        residual,
        section_size: r.section_size,
    })
}

/// `b = v_- w_+^{-1}` and `c = w_-^{-1} v_+`, plus the trimmed Wiener mass.
pub fn bc_pair(
    right: &RightFactorization,
    left: &LeftFactorization,
    params: &NumericParams,
) -> Result<(MatrixLaurentSeries, MatrixLaurentSeries, f64)> {
    let m = right.w_plus.block_size();
    let start_b = 4 * (left.v_minus.len() + right.w_plus.len());
    let b = adaptive_series(m, Support::TwoSided, start_b, params, |n| {
        left.v_minus.to_grid(n)?.mul(&right.w_plus.to_grid(n)?.inverse()?)
    })?;
    let start_c = 4 * (right.w_minus.len() + left.v_plus.len());
    let c = adaptive_series(m, Support::TwoSided, start_c, params, |n| {
        right.w_minus.to_grid(n)?.inverse()?.mul(&left.v_plus.to_grid(n)?)
    })?;
    Ok((b.series, c.series, b.tail + c.tail))
}

/// Fourier halves of the unwrapped `log a` for a scalar symbol of winding zero.
#[derive(Clone, Debug)]
pub struct LogParts {
    /// Coefficients with negative index.
    pub minus: MatrixLaurentSeries,
    pub zero: C64,
    /// Coefficients with positive index.
    pub plus: MatrixLaurentSeries,
}

impl LogParts {
    pub fn compute(a: &MatrixLaurentSeries, params: &NumericParams) -> Result<Self> {
        if a.block_size() != 1 {
            return Err(Error::InvalidArgument("log split needs a scalar symbol".into()));
        }
        check_symbol(a, params)?;
        let full = adaptive_series(1, Support::TwoSided, 8 * a.len() + 64, params, |n| {
            let g = a.to_grid(n)?;
            Ok(TorusGrid::from_scalars(unwrapped_log(&g.scalars())))
        })?;
        let log = full.series;
        Ok(LogParts {
            minus: log.minus_part(false),
            zero: log.scalar_coeff(0),
            plus: log.plus_part(false),
        })
    }

    /// `exp` of one half (optionally with the constant term folded in).
    fn exp_part(
        &self,
        support: Support,
        with_zero: bool,
        params: &NumericParams,
    ) -> Result<MatrixLaurentSeries> {
        let half = match support {
            Support::Plus => &self.plus,
            _ => &self.minus,
        };
        let shift = if with_zero { self.zero } else { C64::new(0.0, 0.0) };
        let out = adaptive_series(1, support, 4 * half.len() + 32, params, |n| {
            let g = half.to_grid(n)?;
            Ok(TorusGrid::from_scalars(
                g.scalars().into_iter().map(|z| (z + shift).exp()).collect(),
            ))
        })?;
        Ok(out.series)
    }

    /// `sum_{k>=1} k (log a)_k (log a)_{-k}`.
    pub fn szego_exponent(&self) -> C64 {
        let mut s = NeumaierSum::default();
        for k in 1..=self.plus.n_max().max(0) {
            s.add(self.plus.scalar_coeff(k) * self.minus.scalar_coeff(-k) * k as f64);
        }
        s.total()
    }
}

/// Scalar strong-Szego constant `exp sum_k k (log a)_k (log a)_{-k}`.
pub fn szego_constant_scalar(a: &MatrixLaurentSeries, params: &NumericParams) -> Result<C64> {
    Ok(LogParts::compute(a, params)?.szego_exponent().exp())
}

/// Finite-section route: the first block column of `T_n(a)^{-1}` converges
/// to the coefficients of `w_+^{-1}` under `(w_-)_0 = I`.
fn finite_section_right(
    a: &MatrixLaurentSeries,
    params: &NumericParams,
) -> Result<RightFactorization> {
    let m = a.block_size();
    let mut n = 8 * a.bandwidth().max(1);
    let mut prev: Option<f64> = None;
    loop {
        let size = n * m;
        let t = toeplitz_section(a, n);
        let mut rhs = CMat::zeros(size, m);
        for i in 0..m {
            rhs[(i, i)] = C64::new(1.0, 0.0);
        }
        let x = t
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularSection { size: n })?;
        let blocks: Vec<CMat> = (0..n)
            .map(|j| x.view((j * m, 0), (m, m)).into_owned())
            .collect();
        let (w_plus_inv, _) = MatrixLaurentSeries::new(m, 0, blocks)?.trimmed(params.tail_tol);
        let inv = w_plus_inv.invert_on_grid(4 * w_plus_inv.len(), params)?;
        let plus_leak = inv.series.wrong_sign_mass(Support::Plus);
        let w_plus = inv.series.plus_part(true);
        let (w_minus, _) = a
            .multiply(&w_plus_inv)?
            .minus_part(true)
            .trimmed(params.tail_tol);
        let residual = product_residual(a, &w_minus, &w_plus)?.max(plus_leak);
        if residual < params.tol {
            if let Some(p) = prev {
                if (p - residual).abs() < 0.1 * params.tol {
                    return Ok(RightFactorization {
                        w_minus,
                        w_plus,
                        residual,
                        section_size: Some(n),
                    });
                }
            }
        } else if let Some(p) = prev {
            if residual > 0.9 * p {
                return Err(Error::NoCanonicalFactorization { residual });
            }
        }
        if 2 * n > params.section_cap {
            return Err(Error::NoCanonicalFactorization { residual });
        }
        prev = Some(residual);
        n *= 2;
    }
}

/// Mean of the continuous `log det` along sampled circle values; `None`
/// when the grid is too coarse to unwrap safely.
fn mean_log(dets: &[C64]) -> Result<Option<C64>> {
    let n = dets.len();
    let mut max_jump = 0.0f64;
    for k in 0..n {
        let d = wrap_phase(dets[(k + 1) % n].arg() - dets[k].arg());
        max_jump = max_jump.max(d.abs());
    }
    if max_jump >= std::f64::consts::FRAC_PI_2 {
        return Ok(None);
    }
    let logs = unwrapped_log(dets);
    let closing = logs[n - 1].im + wrap_phase(dets[0].arg() - dets[n - 1].arg()) - logs[0].im;
    let winding = (closing / (2.0 * std::f64::consts::PI)).round() as i64;
    if winding != 0 {
        return Err(Error::NonzeroWinding(winding));
    }
    let mut s = NeumaierSum::default();
    for l in &logs {
        s.add(*l);
    }
    Ok(Some(s.total() / n as f64))
}

/// Grid mean of `log det f(t)` with doubling until two successive grids agree.
fn adaptive_log_mean(
    n_start: usize,
    params: &NumericParams,
    mut dets_at: impl FnMut(usize) -> Result<Vec<C64>>,
) -> Result<C64> {
    let mut n = next_pow2(n_start);
    let mut prev: Option<C64> = None;
    loop {
        let dets = dets_at(n)?;
        check_det_floor(&dets, params)?;
        if let Some(mean) = mean_log(&dets)? {
            if let Some(p) = prev {
                // Branches agree because both grids start at t = 1.
                let change = (mean - p).norm();
                if change <= params.quad_tol * mean.norm().max(1.0) {
                    return Ok(mean);
                }
            }
            prev = Some(mean);
        }
        if n >= params.grid_cap {
            return Err(Error::QuadratureNotConverged {
                change: f64::NAN,
                cap: params.grid_cap,
            });
        }
        n *= 2;
    }
}

/// `log G(a)`: the mean of the unwrapped `log det a` (defined modulo `2 pi i`).
pub fn log_geometric_mean(a: &MatrixLaurentSeries, params: &NumericParams) -> Result<C64> {
    adaptive_log_mean(4 * a.len() + 32, params, |n| Ok(a.to_grid(n)?.dets()))
}

/// `G(a) = exp (log det a)_0`.
pub fn geometric_mean(a: &MatrixLaurentSeries, params: &NumericParams) -> Result<C64> {
    Ok(log_geometric_mean(a, params)?.exp())
}

/// `log G(a o mu_{-alpha})` by quadrature over `mu_{-alpha}(t_k)`.
pub fn log_composed_mean(
    a: &MatrixLaurentSeries,
    alpha: C64,
    params: &NumericParams,
) -> Result<C64> {
    let r = alpha.norm();
    if r >= 1.0 {
        return Err(Error::ZeroOutsideDisk {
            re: alpha.re,
            im: alpha.im,
        });
    }
    let stretch = (1.0 + r) / (1.0 - r);
    let start = ((a.len() as f64 + 8.0) * 4.0 * stretch) as usize;
    adaptive_log_mean(start, params, |n| {
        (0..n)
            .map(|k| {
                let z = moebius(-alpha, grid_point(k, n))?;
                Ok(det_small(&a.eval_raw(z)))
            })
            .collect()
    })
}

/// `G(a o mu_{-alpha})`.
pub fn composed_mean(a: &MatrixLaurentSeries, alpha: C64, params: &NumericParams) -> Result<C64> {
    Ok(log_composed_mean(a, alpha, params)?.exp())
}

/// `det v_+(alpha) * det v_-(1/conj(alpha))`, the factor form of the
/// composed mean.
pub fn composed_mean_from_factors(
    v_plus: &MatrixLaurentSeries,
    v_minus: &MatrixLaurentSeries,
    alpha: C64,
) -> Result<C64> {
    let p = v_plus.evaluate(alpha, crate::laurent::Region::Inside)?;
    let q = v_minus.evaluate_minus_at_reflection(alpha)?;
    Ok(det_small(&p) * det_small(&q))
}

/// Builds `w_- w_+` from prescribed factors; convenience for tests and the CLI.
pub fn symbol_from_factors(factors: &[MatrixLaurentSeries]) -> Result<MatrixLaurentSeries> {
    let mut it = factors.iter();
    let first = it
        .next()
        .ok_or_else(|| Error::InvalidArgument("no factors given".into()))?
        .clone();
    it.try_fold(first, |acc, f| acc.multiply(f))
}
