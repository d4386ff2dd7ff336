#![allow(dead_code)]

use mstoep::factorization::check_symbol;
use mstoep::laurent::MatrixLaurentSeries;
use mstoep::linalg::{CMat, C64};
use mstoep::params::NumericParams;
use rand::Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `(1 - p t)(1 - q/t) = -q/t + (1 + pq) - p t`.
pub fn pq_symbol(p: f64, q: f64) -> MatrixLaurentSeries {
    MatrixLaurentSeries::scalar(-1, &[c(-q, 0.0), c(1.0 + p * q, 0.0), c(-p, 0.0)])
}

pub fn disk_point<R: Rng>(rng: &mut R, radius: f64) -> C64 {
    let r = radius * rng.gen::<f64>().sqrt();
    C64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Random coefficients `a_{-2..=2}`, rejected until the symbol is well
/// away from zero on the circle and has winding number zero.
pub fn random_band2_symbol<R: Rng>(rng: &mut R) -> MatrixLaurentSeries {
    let params = NumericParams::default();
    loop {
        let mut coeffs: Vec<C64> = (0..5).map(|_| disk_point(rng, 1.0)).collect();
        coeffs[2] += C64::from_polar(2.0, rng.gen_range(0.0..std::f64::consts::TAU));
        let a = MatrixLaurentSeries::scalar(-2, &coeffs);
        let vals = a.to_grid(256).unwrap().scalars();
        let lo = vals.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if lo > 0.2 && check_symbol(&a, &params).is_ok() {
            return a;
        }
    }
}

pub fn random_zeros<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Vec<C64> {
    (0..n).map(|_| disk_point(rng, radius)).collect()
}

fn random_matrix<R: Rng>(rng: &mut R, m: usize, scale: f64) -> CMat {
    let mut x = CMat::from_fn(m, m, |_, _| disk_point(rng, 1.0));
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    x *= c(scale / norm, 0.0);
    x
}

/// Prescribed band-1 factors `w_- = I + A t^{-1}`, `w_+ = B_0 + B_1 t` with
/// `||A|| = 0.5` and `||B_0^{-1} B_1|| <= 0.6`, so both are invertible in
/// their regions.
pub fn random_block_factors<R: Rng>(
    rng: &mut R,
    m: usize,
) -> (MatrixLaurentSeries, MatrixLaurentSeries) {
    let a1 = random_matrix(rng, m, 0.5);
    let b0 = CMat::identity(m, m) + random_matrix(rng, m, 0.3);
    let b1 = &b0 * random_matrix(rng, m, 0.6);
    let w_minus =
        MatrixLaurentSeries::new(m, -1, vec![a1, CMat::identity(m, m)]).unwrap();
    let w_plus = MatrixLaurentSeries::new(m, 0, vec![b0, b1]).unwrap();
    (w_minus, w_plus)
}

/// Largest coefficient difference over the union of both bands.
pub fn coeff_distance(x: &MatrixLaurentSeries, y: &MatrixLaurentSeries) -> f64 {
    let lo = x.n_min().min(y.n_min());
    let hi = x.n_max().max(y.n_max());
    (lo..=hi)
        .map(|n| {
            (x.coeff(n) - y.coeff(n))
                .iter()
                .fold(0.0f64, |a, z| a.max(z.norm()))
        })
        .fold(0.0, f64::max)
}
