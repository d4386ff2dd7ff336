//! Finite Blaschke products, Moebius maps, the Takenaka-Malmquist basis of
//! the model space `K_u`, and the projections `P_u`, `Q_u = T(u)T(conj u)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::examples::{example3_direction, RadiusRule};
use crate::laurent::{adaptive_series, grid_point, Adaptive, MatrixLaurentSeries, Support, TorusGrid};
use crate::linalg::{max_abs, CMat, C64};
use crate::params::{next_pow2, NumericParams};

const ONE: C64 = C64::new(1.0, 0.0);

/// `mu_alpha(z) = (z - alpha) / (1 - conj(alpha) z)`.
pub fn moebius(alpha: C64, z: C64) -> Result<C64> {
    let den = ONE - alpha.conj() * z;
    if den.norm() == 0.0 {
        return Err(Error::PoleHit);
    }
    Ok((z - alpha) / den)
}

/// `B_alpha = (-conj(alpha)/|alpha|) mu_alpha`, with `B_0(z) = z`.
pub fn blaschke_factor(alpha: C64, z: C64) -> Result<C64> {
    let r = alpha.norm();
    if r == 0.0 {
        return Ok(z);
    }
    Ok(-alpha.conj() / r * moebius(alpha, z)?)
}

/// `u = B_{alpha_1} ... B_{alpha_N}`; the zero list is sigma(u) with multiplicity.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeProduct {
    #[serde(with = "crate::linalg::cx_vec")]
    zeros: Vec<C64>,
}

impl BlaschkeProduct {
    pub fn new(zeros: Vec<C64>) -> Result<Self> {
        for z in &zeros {
            if !(z.norm() < 1.0) {
                return Err(Error::ZeroOutsideDisk { re: z.re, im: z.im });
            }
        }
        Ok(BlaschkeProduct { zeros })
    }

    /// `u(z) = z^n`.
    pub fn monomial(n: usize) -> Self {
        BlaschkeProduct {
            zeros: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn degree(&self) -> usize {
        self.zeros.len()
    }

    pub fn zeros(&self) -> &[C64] {
        &self.zeros
    }

    /// The product of the first `n` factors.
    pub fn prefix(&self, n: usize) -> Self {
        BlaschkeProduct {
            zeros: self.zeros[..n.min(self.zeros.len())].to_vec(),
        }
    }

    pub fn max_modulus(&self) -> f64 {
        self.zeros.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        self.zeros
            .iter()
            .try_fold(ONE, |acc, &a| Ok(acc * blaschke_factor(a, z)?))
    }

    /// Rejects zeros beyond the desk-scale radius.
    pub fn check_desk_scale(&self, radius: f64) -> Result<()> {
        for (index, z) in self.zeros.iter().enumerate() {
            if z.norm() > radius {
                return Err(Error::DeskScaleCap {
                    index,
                    modulus: z.norm(),
                    cap: radius,
                });
            }
        }
        Ok(())
    }
}

/// Named zero sequences `alpha_1, alpha_2, ...` (1-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSequence {
    Explicit(#[serde(with = "crate::linalg::cx_vec")] Vec<C64>),
    /// `alpha_j = 1 - 1/j`; `sum (1 - |alpha_j|)` diverges.
    OneMinusInvJ,
    /// `alpha_j = 1 - 1/j^2`; `sum (1 - |alpha_j|)` converges.
    OneMinusInvJSquared,
    /// `alpha_j = r_j z_j` with `z_j = +-1` from the counterexample schedule.
    Example3 { radii: RadiusRule },
}

impl ZeroSequence {
    pub fn name(&self) -> &'static str {
        match self {
            ZeroSequence::Explicit(_) => "explicit",
            ZeroSequence::OneMinusInvJ => "one_minus_inv_j",
            ZeroSequence::OneMinusInvJSquared => "one_minus_inv_j_squared",
            ZeroSequence::Example3 { .. } => "example3",
        }
    }

    /// `alpha_j`, `j >= 1`.
    pub fn alpha(&self, j: usize) -> Option<C64> {
        assert!(j >= 1, "zero sequences are 1-based");
        let jf = j as f64;
        match self {
            ZeroSequence::Explicit(v) => v.get(j - 1).copied(),
            ZeroSequence::OneMinusInvJ => Some(C64::new(1.0 - 1.0 / jf, 0.0)),
            ZeroSequence::OneMinusInvJSquared => Some(C64::new(1.0 - 1.0 / (jf * jf), 0.0)),
            ZeroSequence::Example3 { radii } => {
                Some(C64::new(radii.radius(j) * example3_direction(j as u64) as f64, 0.0))
            }
        }
    }

    /// First `n` zeros.
    pub fn take(&self, n: usize) -> Result<Vec<C64>> {
        (1..=n)
            .map(|j| {
                self.alpha(j).ok_or_else(|| {
                    Error::InvalidArgument(format!("explicit zero list has fewer than {n} entries"))
                })
            })
            .collect()
    }

    pub fn blaschke(&self, n: usize) -> Result<BlaschkeProduct> {
        BlaschkeProduct::new(self.take(n)?)
    }

    /// Whether `sum_j (1 - |alpha_j|)` is finite (finite lists count as summable).
    pub fn is_summable(&self) -> bool {
        match self {
            ZeroSequence::OneMinusInvJ => false,
            ZeroSequence::Example3 { radii } => radii.is_summable(),
            _ => true,
        }
    }

    /// Largest `n` such that the first `n` zeros stay within `radius`.
    pub fn feasible_len(&self, n: usize, radius: f64) -> usize {
        (1..=n)
            .take_while(|&j| self.alpha(j).is_some_and(|a| a.norm() <= radius))
            .count()
    }
}

/// Samples of the Takenaka-Malmquist functions
/// `phi_k(z) = sqrt(1-|a_k|^2)/(1 - conj(a_k) z) * prod_{j<k} mu_{a_j}(z)`
/// on the `n_pts` grid, one column per function.
pub fn tm_samples(u: &BlaschkeProduct, n_pts: usize) -> CMat {
    let nz = u.degree();
    let mut out = CMat::zeros(n_pts, nz);
    for k in 0..n_pts {
        let t = grid_point(k, n_pts);
        let mut prefix = ONE;
        for (j, &a) in u.zeros().iter().enumerate() {
            let den = ONE - a.conj() * t;
            out[(k, j)] = prefix * (1.0 - a.norm_sqr()).sqrt() / den;
            prefix *= (t - a) / den;
        }
    }
    out
}

/// Orthonormal basis of `K_u` sampled on a grid fine enough for its Gram
/// matrix to be the identity.
#[derive(Clone, Debug)]
pub struct TmBasis {
    pub samples: CMat,
    pub n_pts: usize,
    pub gram_defect: f64,
}

impl TmBasis {
    /// Grid size that resolves products of basis functions with a symbol of
    /// the given bandwidth to machine precision.
    pub fn initial_grid(u: &BlaschkeProduct, bandwidth: usize) -> usize {
        let rho = u.max_modulus();
        let decay = if rho > 0.0 {
            (1e-17f64.ln() / rho.ln()).ceil() as usize
        } else {
            0
        };
        next_pow2(2 * (bandwidth + u.degree()) + decay + 16)
    }

    pub fn on_grid(u: &BlaschkeProduct, n_pts: usize) -> Self {
        let samples = tm_samples(u, n_pts);
        let gram = samples.ad_mul(&samples) / C64::new(n_pts as f64, 0.0);
        let gram_defect = max_abs(&(gram - CMat::identity(u.degree(), u.degree())));
        TmBasis {
            samples,
            n_pts,
            gram_defect,
        }
    }
}

/// TM basis with grid doubling until the Gram defect is below `quad_tol`.
pub fn tm_basis(u: &BlaschkeProduct, params: &NumericParams) -> Result<TmBasis> {
    let mut n = TmBasis::initial_grid(u, 0);
    loop {
        let basis = TmBasis::on_grid(u, n);
        if basis.gram_defect <= 100.0 * params.quad_tol {
            return Ok(basis);
        }
        if n >= params.grid_cap {
            return Err(Error::GramDefect {
                defect: basis.gram_defect,
                cap: params.grid_cap,
            });
        }
        n *= 2;
    }
}

/// Fourier coefficients `0..rows` of every TM function, one column each.
/// The grid doubles until every column has a negligible upper half.
pub fn tm_coefficients(u: &BlaschkeProduct, rows: usize, params: &NumericParams) -> Result<CMat> {
    let nz = u.degree();
    let mut n = next_pow2(TmBasis::initial_grid(u, 0).max(2 * rows));
    let thr = params.tail_tol.max(1e-13);
    loop {
        let samples = tm_samples(u, n);
        let mut out = CMat::zeros(rows, nz);
        let mut tail = 0.0f64;
        for k in 0..nz {
            let col: Vec<C64> = samples.column(k).iter().copied().collect();
            let series =
                MatrixLaurentSeries::from_grid(&TorusGrid::from_scalars(col), 0, n as i64 - 1)?;
            tail = (n / 2..n)
                .map(|i| series.scalar_coeff(i as i64).norm())
                .fold(tail, f64::max);
            for r in 0..rows {
                out[(r, k)] = series.scalar_coeff(r as i64);
            }
        }
        if tail <= thr {
            return Ok(out);
        }
        if n >= params.grid_cap {
            return Err(Error::TailTooLarge {
                tail,
                cap: params.grid_cap,
            });
        }
        n *= 2;
    }
}

/// Plus-type Fourier data of `u`, tail trimmed at `tail_tol`.
pub fn u_fourier(u: &BlaschkeProduct, params: &NumericParams) -> Result<Adaptive> {
    u.check_desk_scale(params.desk_radius)?;
    let start = TmBasis::initial_grid(u, 0);
    adaptive_series(1, Support::Plus, start, params, |n| {
        let vals = (0..n)
            .map(|k| u.eval(grid_point(k, n)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TorusGrid::from_scalars(vals))
    })
}

/// Section `T_M(u) (x) I_m`: lower triangular, `(j, l)` entry `u_{j-l}`.
pub fn tu_section(u_coeffs: &MatrixLaurentSeries, size: usize, m: usize) -> CMat {
    let tu = CMat::from_fn(size, size, |j, l| {
        if j >= l {
            u_coeffs.scalar_coeff((j - l) as i64)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    if m == 1 {
        tu
    } else {
        tu.kronecker(&CMat::identity(m, m))
    }
}

/// Section `P_M Q_u P_M` of `Q_u = T(u) T(conj u)` in the standard basis,
/// lifted to block size `m` (`Q_u (x) I_m`). Exact given the coefficients
/// of `u`: `(Q_u)_{jk} = sum_{l<=min(j,k)} u_{j-l} conj(u_{k-l})`.
pub fn qu_matrix(u_coeffs: &MatrixLaurentSeries, size: usize, m: usize) -> CMat {
    let tu = tu_section(u_coeffs, size, m);
    &tu * tu.adjoint()
}

/// `qu_matrix` with the projection check: `||Q^2 - Q||` below `tol`.
pub fn qu_matrix_checked(
    u: &BlaschkeProduct,
    size: usize,
    m: usize,
    params: &NumericParams,
) -> Result<CMat> {
    let uf = u_fourier(u, params)?;
    let q = qu_matrix(&uf.series, size, 1);
    let defect = max_abs(&(&q * &q - &q));
    if defect > params.tol {
        return Err(Error::TruncationTooSmall { size, defect });
    }
    Ok(if m == 1 { q } else { q.kronecker(&CMat::identity(m, m)) })
}

/// `||Q_u f||` for `f` supported on the first `f.len()` coordinates.
///
/// Uses `||Q_u f||^2 = <Q_u f, f> = ||T(conj u) f||^2`, exact given the
/// coefficients of `u`.
pub fn qu_norm(u_coeffs: &MatrixLaurentSeries, f: &[C64]) -> f64 {
    let mut total = 0.0;
    for l in 0..f.len() {
        let mut g = C64::new(0.0, 0.0);
        for (k, fk) in f.iter().enumerate().skip(l) {
            g += u_coeffs.scalar_coeff((k - l) as i64).conj() * fk;
        }
        total += g.norm_sqr();
    }
    total.sqrt()
}
