//! Finite sections of Toeplitz and Hankel operators, compressions `T_u(a)`
//! to model spaces, and truncated Fredholm determinants.
//!
//! Block matrices use the layout `row = j*m + r` for block row `j` and
//! component `r`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{MatrixLaurentSeries, Region};
use crate::linalg::{det_small, log_det, matmul, max_abs, CMat, LogDet, C64};
use crate::modelspace::{tm_coefficients, tu_section, BlaschkeProduct, TmBasis};
use crate::params::NumericParams;

fn put_block(mat: &mut CMat, j: usize, k: usize, m: usize, blk: &[C64]) {
    for c in 0..m {
        for r in 0..m {
            mat[(j * m + r, k * m + c)] = blk[r + c * m];
        }
    }
}

/// `rows x cols` block section of `T(a)`: block `(j, k)` is `a_{j-k}`.
pub fn toeplitz_rect(a: &MatrixLaurentSeries, rows: usize, cols: usize) -> CMat {
    let m = a.block_size();
    let mut out = CMat::zeros(rows * m, cols * m);
    for j in 0..rows {
        for k in 0..cols {
            if let Some(blk) = a.block(j as i64 - k as i64) {
                put_block(&mut out, j, k, m, blk);
            }
        }
    }
    out
}

/// `T_n(a)`: block `(j, k)` is `a_{j-k}` for `0 <= j, k < n`.
pub fn toeplitz_section(a: &MatrixLaurentSeries, n: usize) -> CMat {
    toeplitz_rect(a, n, n)
}

/// Section of `H(psi)`: block `(j, k)` is `psi_{j+k+1}`.
pub fn hankel_matrix(psi: &MatrixLaurentSeries, rows: usize, cols: usize) -> CMat {
    let m = psi.block_size();
    let mut out = CMat::zeros(rows * m, cols * m);
    for j in 0..rows {
        for k in 0..cols {
            if let Some(blk) = psi.block((j + k + 1) as i64) {
                put_block(&mut out, j, k, m, blk);
            }
        }
    }
    out
}

/// `sum_{n > skip} (n - skip) ||psi_n||_F^2`, the squared Hilbert-Schmidt
/// norm of `H(psi)` with its first `skip` rows removed.
fn hankel_hs_sq(psi: &MatrixLaurentSeries, skip: usize) -> f64 {
    let mut s = 0.0;
    for n in (skip as i64 + 1)..=psi.n_max() {
        if let Some(blk) = psi.block(n) {
            let w: f64 = blk.iter().map(|z| z.norm_sqr()).sum();
            s += (n - skip as i64) as f64 * w;
        }
    }
    s
}

/// Number of block rows outside which `H(psi)` vanishes.
pub fn hankel_extent(psi: &MatrixLaurentSeries) -> usize {
    psi.n_max().max(0) as usize
}

/// A finite section `P_M K P_M` of a trace-class operator, stored as a
/// product `X Y` (`X` is `d x r`, `Y` is `r x d`), together with a bound on
/// `||K - P_M K P_M||_1`.
///
/// Determinants reduce to the inner dimension through
/// `det(I_d - X Y) = det(I_r - Y X)`.
#[derive(Clone, Debug)]
pub struct OperatorTruncation {
    pub left: CMat,
    pub right: CMat,
    /// Cutoff `M` in block rows.
    pub size: usize,
    pub block: usize,
    pub tail_bound: f64,
    /// Upper bound for `||K||_1`.
    pub trace_norm_bound: f64,
}

impl OperatorTruncation {
    pub fn from_matrix(matrix: CMat, block: usize, tail_bound: f64) -> Self {
        assert!(matrix.is_square() && matrix.nrows().is_multiple_of(block.max(1)));
        let d = matrix.nrows();
        let size = d / block.max(1);
        let trace_norm_bound =
            matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() * (d as f64).sqrt();
        OperatorTruncation {
            left: matrix,
            right: CMat::identity(d, d),
            size,
            block,
            tail_bound,
            trace_norm_bound,
        }
    }

    /// `P_M H(x) H(y) P_M`. The inner sum is exact since `H(x)` has only
    /// `x.n_max` nonzero columns; the tail bound is
    /// `||(I-P_M) H(x)||_2 ||H(y)||_2 + ||H(x)||_2 ||H(y)(I-P_M)||_2`.
    /// Exact once `size >= max(x.n_max, y.n_max)`.
    pub fn hankel_product(x: &MatrixLaurentSeries, y: &MatrixLaurentSeries, size: usize) -> Self {
        let m = x.block_size();
        let inner = hankel_extent(x).min(hankel_extent(y));
        let nx = hankel_hs_sq(x, 0).sqrt();
        let ny = hankel_hs_sq(y, 0).sqrt();
        let tail_bound = hankel_hs_sq(x, size).sqrt() * ny + nx * hankel_hs_sq(y, size).sqrt();
        OperatorTruncation {
            left: hankel_matrix(x, size, inner),
            right: hankel_matrix(y, inner, size),
            size,
            block: m,
            tail_bound,
            trace_norm_bound: nx * ny,
        }
    }

    /// The exact finite matrix of `H(x) H(y)`.
    pub fn hankel_product_exact(x: &MatrixLaurentSeries, y: &MatrixLaurentSeries) -> Self {
        let l = hankel_extent(x).max(hankel_extent(y)).max(1);
        Self::hankel_product(x, y, l)
    }

    /// Dimension `M * m` of the section.
    pub fn dim(&self) -> usize {
        self.left.nrows()
    }

    /// `K_M = X Y`.
    pub fn matrix(&self) -> CMat {
        matmul(&self.left, &self.right)
    }

    /// `I_r - Y X`.
    fn inner_identity_minus(&self) -> CMat {
        let r = self.right.nrows();
        CMat::identity(r, r) - matmul(&self.right, &self.left)
    }

    /// `det(I - K_M)`.
    pub fn log_det_identity_minus(&self) -> Result<LogDet> {
        log_det(&self.inner_identity_minus(), "I - K")
    }

    /// `(I_r - Y X)^{-1} Y`, so that `K (I - K)^{-1} = X S`.
    fn resolvent_right(&self) -> Result<CMat> {
        if self.right.nrows() == 0 {
            return Ok(self.right.clone());
        }
        self.inner_identity_minus()
            .lu()
            .solve(&self.right)
            .ok_or(Error::SingularMatrix { context: "I - K" })
    }
}

/// Quadrature record of a compression matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadratureRecord {
    pub n_pts: usize,
    /// `(n_pts, max entry change against the previous grid)`.
    pub history: Vec<(usize, f64)>,
    pub gram_defect: f64,
}

/// `T_u(a)` in the Takenaka-Malmquist basis of `K_u`.
#[derive(Clone, Debug)]
pub struct CompressionMatrix {
    pub matrix: CMat,
    pub u: BlaschkeProduct,
    pub quadrature: QuadratureRecord,
}

impl CompressionMatrix {
    /// Leading `n` functions: the compression to `K_{u_n}` for the prefix
    /// `u_n` of `u`, since the basis is nested.
    pub fn leading(&self, n: usize) -> CMat {
        let d = n * self.matrix.nrows() / self.u.degree().max(1);
        self.matrix.view((0, 0), (d, d)).into_owned()
    }

    pub fn log_det(&self) -> Result<LogDet> {
        log_det(&self.matrix, "compression matrix")
    }
}

/// Block `(l, k)` = grid mean of `conj(phi_l) a phi_k`.
fn assemble(a: &MatrixLaurentSeries, basis: &TmBasis) -> Result<CMat> {
    let m = a.block_size();
    let nz = basis.samples.ncols();
    let n = basis.n_pts;
    let grid = a.to_grid(n)?;
    let phi = &basis.samples;
    let phi_h = phi.adjoint();
    let mut comps = vec![vec![C64::new(0.0, 0.0); n]; m * m];
    for t in 0..n {
        let s = grid.sample(t);
        for (i, z) in s.iter().enumerate() {
            comps[i][t] = *z;
        }
    }
    let cols: Vec<(usize, usize, usize, Vec<C64>)> = (0..m * m * nz)
        .into_par_iter()
        .map(|idx| {
            let k = idx % nz;
            let rc = idx / nz;
            let (r, c) = (rc % m, rc / m);
            let w = CMat::from_fn(n, 1, |t, _| comps[r + c * m][t] * phi[(t, k)]);
            let col = &phi_h * w;
            (r, c, k, col.iter().map(|z| z / n as f64).collect())
        })
        .collect();
    let mut out = CMat::zeros(nz * m, nz * m);
    for (r, c, k, col) in cols {
        for (l, v) in col.into_iter().enumerate() {
            out[(l * m + r, k * m + c)] = v;
        }
    }
    Ok(out)
}

/// `T_u(a)` by quadrature on doubled grids until the entries settle.
pub fn compression_matrix(
    a: &MatrixLaurentSeries,
    u: &BlaschkeProduct,
    params: &NumericParams,
) -> Result<CompressionMatrix> {
    if u.degree() == 0 {
        return Ok(CompressionMatrix {
            matrix: CMat::zeros(0, 0),
            u: u.clone(),
            quadrature: QuadratureRecord {
                n_pts: 0,
                history: vec![],
                gram_defect: 0.0,
            },
        });
    }
    let mut n = TmBasis::initial_grid(u, a.bandwidth());
    let mut prev: Option<CMat> = None;
    let mut history = Vec::new();
    loop {
        let basis = TmBasis::on_grid(u, n);
        let mat = assemble(a, &basis)?;
        if let Some(p) = &prev {
            let change = max_abs(&(&mat - p));
            history.push((n, change));
            let scale = max_abs(&mat).max(1.0);
            if change <= 10.0 * params.quad_tol * scale
                && basis.gram_defect <= 100.0 * params.quad_tol
            {
                return Ok(CompressionMatrix {
                    matrix: mat,
                    u: u.clone(),
                    quadrature: QuadratureRecord {
                        n_pts: n,
                        history,
                        gram_defect: basis.gram_defect,
                    },
                });
            }
            if n >= params.grid_cap {
                return Err(Error::QuadratureNotConverged {
                    change,
                    cap: params.grid_cap,
                });
            }
        }
        prev = Some(mat);
        n *= 2;
    }
}

/// Closed-form and quadrature determinants of `T_u(phi)` for analytic `phi`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AnalyticCompressionDet {
    /// `prod det phi(alpha)` (plus type) or `prod det phi(1/conj alpha)` (minus type).
    pub analytic: LogDet,
    pub quadrature: LogDet,
    pub defect: f64,
}

pub fn analytic_compression_det(
    phi: &MatrixLaurentSeries,
    u: &BlaschkeProduct,
    params: &NumericParams,
) -> Result<AnalyticCompressionDet> {
    let plus = phi.is_plus_type();
    if !plus && !phi.is_minus_type() {
        return Err(Error::RegionMismatch {
            kind: "two-sided",
            region: "inside or outside",
        });
    }
    let analytic = u
        .zeros()
        .iter()
        .map(|&alpha| {
            let v = if plus {
                phi.evaluate(alpha, Region::Inside)?
            } else {
                phi.evaluate_minus_at_reflection(alpha)?
            };
            Ok(LogDet::from_complex(det_small(&v)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .product::<LogDet>();
    let quadrature = compression_matrix(phi, u, params)?.log_det()?;
    Ok(AnalyticCompressionDet {
        analytic,
        quadrature,
        defect: analytic.rel_defect(quadrature),
    })
}

/// `det(I - K)` with an error estimate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FredholmDet {
    pub value: LogDet,
    /// `tail * exp(1 + 2 ||K||_1)`, the perturbation bound for `det(I - .)`.
    pub error_estimate: f64,
    pub size: usize,
    pub tail_bound: f64,
}

/// `det(I - K_M)` by pivoted LU.
pub fn fredholm_det(k: &OperatorTruncation) -> Result<FredholmDet> {
    if !(k.tail_bound < 0.5) {
        return Err(Error::TailBoundTooLarge { tail: k.tail_bound });
    }
    let value = k.log_det_identity_minus()?;
    Ok(FredholmDet {
        value,
        error_estimate: k.tail_bound * (1.0 + 2.0 * k.trace_norm_bound + k.tail_bound).exp(),
        size: k.size,
        tail_bound: k.tail_bound,
    })
}

/// `det(I - H(x) H(y))` with `M` doubled until the value settles within
/// `tol`, or until the truncation is exact.
pub fn fredholm_det_hankel(
    x: &MatrixLaurentSeries,
    y: &MatrixLaurentSeries,
    params: &NumericParams,
) -> Result<FredholmDet> {
    let exact = hankel_extent(x).max(hankel_extent(y)).max(1);
    let mut size = 8usize.min(exact);
    let mut prev: Option<LogDet> = None;
    loop {
        let k = OperatorTruncation::hankel_product(x, y, size);
        let det = if k.tail_bound < 0.5 {
            Some(fredholm_det(&k)?)
        } else {
            None
        };
        if let Some(d) = det {
            if size >= exact {
                return Ok(d);
            }
            if let Some(p) = prev {
                if d.value.rel_defect(p) < params.tol && d.error_estimate < params.tol {
                    return Ok(d);
                }
            }
            prev = Some(d.value);
        }
        if size >= params.truncation_cap {
            return Err(Error::FredholmStagnation {
                change: prev.map_or(f64::NAN, |p| det.map_or(f64::NAN, |d| d.value.rel_defect(p))),
                cap: params.truncation_cap,
            });
        }
        size = (2 * size).min(exact.max(size));
    }
}

/// Positive-index part of `x * conj(w)` on the circle, for `w` analytic
/// (`conj_w = true`), or of `x * w~` with `w~(t) = w(1/t)` (`conj_w = false`):
/// `out_n = sum_{j>=0} w'_j x_{n+j}`, `n >= 1`.
fn hankel_symbol_twisted(x: &MatrixLaurentSeries, w: &[C64], conj_w: bool) -> MatrixLaurentSeries {
    let m = x.block_size();
    let top = x.n_max();
    if top < 1 {
        return MatrixLaurentSeries::zero(m);
    }
    let blocks: Vec<CMat> = (1..=top)
        .map(|n| {
            let mut acc = CMat::zeros(m, m);
            for (j, wj) in w.iter().enumerate() {
                let idx = n + j as i64;
                if idx > top {
                    break;
                }
                let wj = if conj_w { wj.conj() } else { *wj };
                acc += x.coeff(idx) * wj;
            }
            acc
        })
        .collect();
    MatrixLaurentSeries::new(m, 1, blocks).expect("consistent blocks")
}

/// Both routes to `det(I - Q_u H(b) H(c~) Q_u)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuRestrictedDet {
    /// `det(I - K_L Q_L)` with `Q_u` sandwiched around the exact kernel.
    pub sandwich: LogDet,
    /// `det(I - H(conj(u) b) H(c~ u~))`.
    pub hankel: LogDet,
    pub discrepancy: f64,
    pub size: usize,
}

/// `K = H(b) H(c~)` lives on the first `L` block coordinates, so
/// `det(I - Q K Q) = det(I_L - K_L Q_L)` exactly; with `K_L = X Y` and
/// `Q_L = T T^*` this is `det(I_r - (Y T)(T^* X))`.
pub fn qu_restricted_det(
    u_coeffs: &MatrixLaurentSeries,
    b: &MatrixLaurentSeries,
    c: &MatrixLaurentSeries,
    params: &NumericParams,
) -> Result<QuRestrictedDet> {
    let m = b.block_size();
    let c_tilde = c.tilde_reverse();
    let k = OperatorTruncation::hankel_product_exact(b, &c_tilde);
    let t = tu_section(u_coeffs, k.size, m);
    let r = k.right.nrows();
    let yqx = matmul(&matmul(&k.right, &t), &matmul(&t.adjoint(), &k.left));
    let sandwich = log_det(&(CMat::identity(r, r) - yqx), "I - K Q_u")?;
    let uc: Vec<C64> = (0..=u_coeffs.n_max().max(0))
        .map(|j| u_coeffs.scalar_coeff(j))
        .collect();
    let x = hankel_symbol_twisted(b, &uc, true);
    let y = hankel_symbol_twisted(&c_tilde, &uc, false);
    let hankel = OperatorTruncation::hankel_product_exact(&x, &y).log_det_identity_minus()?;
    let discrepancy = sandwich.rel_defect(hankel);
    if discrepancy > params.route_tol {
        return Err(Error::RouteDiscrepancy { discrepancy });
    }
    Ok(QuRestrictedDet {
        sandwich,
        hankel,
        discrepancy,
        size: k.size,
    })
}

/// Both sides of `det P(I-L)^{-1}P = det(I - Q L Q) / det(I - L)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JacobiCheck {
    pub lhs: LogDet,
    pub rhs: LogDet,
    pub defect: f64,
    /// Truncation (block rows) carrying the orthonormal basis of `ran P_u`.
    pub size: usize,
}

fn lift(v: &CMat, m: usize) -> CMat {
    if m == 1 {
        v.clone()
    } else {
        v.kronecker(&CMat::identity(m, m))
    }
}

/// Rows needed for the TM coefficients of `u` to decay below roundoff.
fn tm_rows(u: &BlaschkeProduct) -> usize {
    let rho = u.max_modulus();
    let decay = if rho > 0.0 {
        (1e-17f64.ln() / rho.ln()).ceil() as usize
    } else {
        0
    };
    u.degree() + decay + 1
}

/// `det(I + (V^* X) S V)` with `S = (I_r - Y X)^{-1} Y`: the compression of
/// `(I - L)^{-1} = I + X S` to the span of the orthonormal columns `V`.
fn compressed_inverse_det(l: &OperatorTruncation, v: &CMat) -> Result<LogDet> {
    let n = v.ncols();
    let s = l.resolvent_right()?;
    log_det(
        &(CMat::identity(n, n) + matmul(&matmul(&v.adjoint(), &l.left), &matmul(&s, v))),
        "compressed inverse",
    )
}

/// Jacobi's identity for minors of the inverse, on a truncation `M` where
/// `P_u` is replaced by the orthogonal projection onto the span of the
/// truncated TM coefficient vectors.
pub fn jacobi_check(
    u: &BlaschkeProduct,
    l: &OperatorTruncation,
    params: &NumericParams,
) -> Result<JacobiCheck> {
    let m = l.block;
    let nz = u.degree();
    let size = tm_rows(u)
        .max(l.size)
        .min(params.truncation_cap.max(l.size));
    let v = tm_coefficients(u, size, params)?;
    let vq = if nz == 0 { v } else { v.qr().q() };
    let vl = lift(&vq.rows(0, l.size).into_owned(), m);
    let lhs = compressed_inverse_det(l, &vl)?;
    // Y (I - V V^*) X = Y X - (Y V)(V^* X).
    let r = l.right.nrows();
    let yqx = matmul(&l.right, &l.left)
        - matmul(&matmul(&l.right, &vl), &matmul(&vl.adjoint(), &l.left));
    let num = log_det(&(CMat::identity(r, r) - yqx), "I - Q L Q")?;
    let den = l.log_det_identity_minus()?;
    let rhs = num / den;
    Ok(JacobiCheck {
        lhs,
        rhs,
        defect: lhs.rel_defect(rhs),
        size,
    })
}

/// `det P_u (I - K)^{-1} P_u` on `K_u`, computed as `det(I + V^* K (I - K)^{-1} V)`
/// with `V` the TM coefficient columns; exact when `K` is supported on the
/// first `K.size` block coordinates.
pub fn compressed_resolvent_det(
    u: &BlaschkeProduct,
    k: &OperatorTruncation,
    params: &NumericParams,
) -> Result<LogDet> {
    if u.degree() == 0 {
        return Ok(LogDet::ONE);
    }
    let v = lift(&tm_coefficients(u, k.size, params)?, k.block);
    compressed_inverse_det(k, &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{CanonicalFactorization, FactorizationMethod};
    use crate::modelspace::u_fourier;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pq_symbol(p: f64, q: f64) -> MatrixLaurentSeries {
        MatrixLaurentSeries::scalar(-1, &[c(-q, 0.0), c(1.0 + p * q, 0.0), c(-p, 0.0)])
    }

    fn params() -> NumericParams {
        NumericParams::default()
    }

    fn bc(p: f64, q: f64) -> (MatrixLaurentSeries, MatrixLaurentSeries) {
        let f = CanonicalFactorization::compute(&pq_symbol(p, q), FactorizationMethod::Auto, &params())
            .unwrap();
        (f.b, f.c)
    }

    #[test]
    fn sections_of_simple_symbols() {
        let id = MatrixLaurentSeries::identity(2);
        assert_eq!(toeplitz_section(&id, 3), CMat::identity(6, 6));
        let t = toeplitz_section(&MatrixLaurentSeries::monomial(1, 1), 4);
        for j in 0..4 {
            for k in 0..4 {
                let want = if j == k + 1 { 1.0 } else { 0.0 };
                assert_eq!(t[(j, k)], c(want, 0.0));
            }
        }
    }

    #[test]
    fn hankel_of_b_is_geometric() {
        let (p, q) = (0.5, 1.0 / 3.0);
        let (b, _) = bc(p, q);
        let h = hankel_matrix(&b, 5, 5);
        for j in 0..5 {
            for k in 0..5 {
                let want = p.powi((j + k + 1) as i32) * (1.0 - p * q);
                assert!((h[(j, k)] - c(want, 0.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn rank_one_fredholm_det() {
        let (b, cc) = bc(0.5, 1.0 / 3.0);
        let ct = cc.tilde_reverse();
        let k = OperatorTruncation::hankel_product(&b, &ct, 60);
        let d = fredholm_det(&k).unwrap();
        assert!((d.value.to_complex() - c(5.0 / 6.0, 0.0)).norm() < 1e-10);
        let d = fredholm_det_hankel(&b, &ct, &params()).unwrap();
        assert!((d.value.to_complex() - c(5.0 / 6.0, 0.0)).norm() < 1e-12);
        let zero = OperatorTruncation::from_matrix(CMat::zeros(3, 3), 1, 0.0);
        assert_eq!(fredholm_det(&zero).unwrap().value, LogDet::ONE);
    }

    #[test]
    fn tail_bound_covers_doubling() {
        let (b, cc) = bc(0.7, 0.6);
        let ct = cc.tilde_reverse();
        for m in [4, 8, 16] {
            let k1 = OperatorTruncation::hankel_product(&b, &ct, m);
            let k2 = OperatorTruncation::hankel_product(&b, &ct, 2 * m);
            if k1.tail_bound >= 0.5 {
                continue;
            }
            let d1 = fredholm_det(&k1).unwrap().value.to_complex();
            let d2 = fredholm_det(&k2).unwrap().value.to_complex();
            assert!((d1 - d2).norm() <= k1.tail_bound, "M = {m}");
        }
    }

    #[test]
    fn compression_for_monomial_u_is_toeplitz_section() {
        let a = pq_symbol(0.5, 0.25);
        let u = BlaschkeProduct::monomial(5);
        let t = compression_matrix(&a, &u, &params()).unwrap();
        assert!(max_abs(&(t.matrix - toeplitz_section(&a, 5))) < 1e-13);
    }

    #[test]
    fn compression_single_zero_closed_form() {
        let (p, q) = (0.5, 1.0 / 3.0);
        let alpha = c(0.4, 0.2);
        let u = BlaschkeProduct::new(vec![alpha]).unwrap();
        let t = compression_matrix(&pq_symbol(p, q), &u, &params()).unwrap();
        let want = 1.0 + p * q - p * alpha - q * alpha.conj();
        assert!((t.matrix[(0, 0)] - want).norm() < 1e-13);
        let id = compression_matrix(&MatrixLaurentSeries::identity(2), &u, &params()).unwrap();
        assert!(max_abs(&(id.matrix - CMat::identity(2, 2))) < 1e-13);
    }

    #[test]
    fn analytic_det_two_zeros() {
        let p = 0.6;
        let phi = MatrixLaurentSeries::scalar(0, &[c(1.0, 0.0), c(-p, 0.0)]);
        let (a1, a2) = (c(0.3, -0.5), c(-0.7, 0.1));
        let u = BlaschkeProduct::new(vec![a1, a2]).unwrap();
        let r = analytic_compression_det(&phi, &u, &params()).unwrap();
        let want = (1.0 - p * a1) * (1.0 - p * a2);
        assert!((r.analytic.to_complex() - want).norm() < 1e-14);
        let t = compression_matrix(&phi, &u, &params()).unwrap();
        assert!((det_small(&t.matrix) - want).norm() < 1e-12);
        assert!(r.defect < 1e-12);
        let minus = phi.tilde_reverse();
        let r = analytic_compression_det(&minus, &u, &params()).unwrap();
        assert!(r.defect < 1e-12);
    }

    #[test]
    fn analytic_det_monomial_u() {
        let phi = MatrixLaurentSeries::scalar(0, &[c(2.0, 0.0), c(0.5, 0.0)]);
        let r = analytic_compression_det(&phi, &BlaschkeProduct::monomial(4), &params()).unwrap();
        assert!((r.analytic.to_complex() - c(16.0, 0.0)).norm() < 1e-12);
        assert!(r.defect < 1e-12);
    }

    #[test]
    fn qu_restricted_monomial_u() {
        let (p, q) = (0.5, 1.0 / 3.0);
        let (b, cc) = bc(p, q);
        for n in 0..6 {
            let uf = u_fourier(&BlaschkeProduct::monomial(n), &params()).unwrap();
            let r = qu_restricted_det(&uf.series, &b, &cc, &params()).unwrap();
            let want = 1.0 - (p * q).powi(n as i32 + 1);
            assert!((r.sandwich.to_complex() - c(want, 0.0)).norm() < 1e-12, "N = {n}");
            assert!(r.discrepancy < 1e-12);
        }
    }

    #[test]
    fn qu_restricted_single_zero() {
        let (p, q) = (0.5, 1.0 / 3.0);
        let (b, cc) = bc(p, q);
        let alpha = c(0.4, 0.2);
        let u = BlaschkeProduct::new(vec![alpha]).unwrap();
        let uf = u_fourier(&u, &params()).unwrap();
        let r = qu_restricted_det(&uf.series, &b, &cc, &params()).unwrap();
        let want = (1.0 - p * q)
            * (1.0 + (1.0 - alpha.norm_sqr()) * p * q / ((1.0 - q * alpha.conj()) * (1.0 - p * alpha)));
        assert!((r.sandwich.to_complex() - want).norm() < 1e-12);
        assert!((r.hankel.to_complex() - want).norm() < 1e-12);
    }

    #[test]
    fn toeplitz_hankel_identity() {
        let (b, cc) = bc(0.5, -0.4);
        let n = 12;
        let extra = b.n_max().max(-cc.n_min()).max(0) as usize + cc.n_max().max(0) as usize + 2;
        let tt = toeplitz_rect(&b, n, n + extra) * toeplitz_rect(&cc, n + extra, n);
        let k = OperatorTruncation::hankel_product(&b, &cc.tilde_reverse(), n);
        let defect = max_abs(&(tt + k.matrix() - CMat::identity(n, n)));
        assert!(defect < 1e-12, "{defect}");
    }

    #[test]
    fn jacobi_trivial_and_rank_one() {
        let alpha = c(0.4, 0.2);
        let u = BlaschkeProduct::new(vec![alpha]).unwrap();
        let zero = OperatorTruncation::from_matrix(CMat::zeros(4, 4), 1, 0.0);
        let j = jacobi_check(&u, &zero, &params()).unwrap();
        assert!(j.lhs.rel_defect(LogDet::ONE) < 1e-14 && j.rhs.rel_defect(LogDet::ONE) < 1e-14);

        let (p, q) = (0.5, 1.0 / 3.0);
        let (b, cc) = bc(p, q);
        let k = OperatorTruncation::hankel_product_exact(&b, &cc.tilde_reverse());
        let j = jacobi_check(&u, &k, &params()).unwrap();
        assert!(j.defect < 1e-10);
        let uf = u_fourier(&u, &params()).unwrap();
        let qd = qu_restricted_det(&uf.series, &b, &cc, &params()).unwrap();
        let via21 = compressed_resolvent_det(&u, &k, &params()).unwrap();
        let den = LogDet::from_complex(c(1.0 - p * q, 0.0));
        assert!(via21.rel_defect(qd.sandwich / den) < 1e-8);
        assert!(j.lhs.rel_defect(via21) < 1e-8);
    }

    #[test]
    fn jacobi_random_hermitian() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 6;
        let mut h = CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        h = (&h + h.adjoint()) * c(0.5, 0.0);
        let norm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        h *= c(0.4 / norm, 0.0);
        let l = OperatorTruncation::from_matrix(h, 1, 0.0);
        let j = jacobi_check(&BlaschkeProduct::monomial(2), &l, &params()).unwrap();
        assert!(j.defect < 1e-9);
    }
}
