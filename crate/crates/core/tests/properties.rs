mod common;

use common::*;
use mstoep::examples::{example3_f, gu_log};
use mstoep::laurent::MatrixLaurentSeries;
use mstoep::linalg::{log_det, CMat, C64};
use mstoep::modelspace::BlaschkeProduct;
use mstoep::operators::{compression_matrix, OperatorTruncation};
use mstoep::params::NumericParams;
use mstoep::verify::bo_report;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn phase_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn determinant_identity_holds(seed in any::<u64>(), n in 1usize..6) {
        let mut r = rng(seed);
        let a = random_band2_symbol(&mut r);
        let u = BlaschkeProduct::new(random_zeros(&mut r, n, 0.8)).unwrap();
        let rep = bo_report(&a, &u, &NumericParams::default()).unwrap();
        prop_assert!(rep.rel_defect < 1e-10, "defect {}", rep.rel_defect);
        prop_assert!(rep.verdict);
    }

    /// `T_u(phi psi) = T_u(phi) T_u(psi)` when both factors are analytic or
    /// both are co-analytic.
    #[test]
    fn compressions_multiply_within_a_type(seed in any::<u64>(), n in 1usize..6, coanalytic in any::<bool>()) {
        let mut r = rng(seed);
        let mut phi = MatrixLaurentSeries::scalar(0, &random_zeros(&mut r, 3, 1.0));
        let mut psi = MatrixLaurentSeries::scalar(0, &random_zeros(&mut r, 4, 1.0));
        if coanalytic {
            phi = phi.tilde_reverse();
            psi = psi.tilde_reverse();
        }
        let u = BlaschkeProduct::new(random_zeros(&mut r, n, 0.8)).unwrap();
        let p = NumericParams::default();
        let lhs = compression_matrix(&phi.multiply(&psi).unwrap(), &u, &p).unwrap().matrix;
        let rhs = compression_matrix(&phi, &u, &p).unwrap().matrix
            * compression_matrix(&psi, &u, &p).unwrap().matrix;
        prop_assert!(max_abs(&(lhs - rhs)) < 1e-11);
    }

    #[test]
    fn determinant_invariant_under_zero_permutation(seed in any::<u64>(), n in 2usize..7) {
        let mut r = rng(seed);
        let a = random_band2_symbol(&mut r);
        let zeros = random_zeros(&mut r, n, 0.8);
        let mut rev = zeros.clone();
        rev.reverse();
        rev.rotate_left(1);
        let p = NumericParams::default();
        let d1 = compression_matrix(&a, &BlaschkeProduct::new(zeros).unwrap(), &p).unwrap().log_det().unwrap();
        let d2 = compression_matrix(&a, &BlaschkeProduct::new(rev).unwrap(), &p).unwrap().log_det().unwrap();
        prop_assert!((d1.log_abs - d2.log_abs).abs() < 1e-11);
        prop_assert!(phase_dist(d1.arg, d2.arg) < 1e-11);
    }

    /// `||K - P_M K P_M||_HS` never exceeds the reported tail bound.
    #[test]
    fn hankel_tail_bound_dominates_truncation_error(seed in any::<u64>(), size in 1usize..8) {
        let mut r = rng(seed);
        let x = MatrixLaurentSeries::scalar(1, &random_zeros(&mut r, 8, 0.7));
        let y = MatrixLaurentSeries::scalar(1, &random_zeros(&mut r, 6, 0.7));
        let exact = OperatorTruncation::hankel_product_exact(&x, &y).matrix();
        let cut = OperatorTruncation::hankel_product(&x, &y, size);
        let k = cut.matrix();
        let mut diff = exact.clone();
        diff.view_mut((0, 0), (size, size)).copy_from(&(exact.view((0, 0), (size, size)) - k));
        let err = diff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err <= cut.tail_bound * (1.0 + 1e-12) + 1e-15, "{err} > {}", cut.tail_bound);
    }

    #[test]
    fn counting_function_steps(n in 2u64..5_000_000) {
        let (a, b) = (example3_f(n - 1), example3_f(n));
        prop_assert!(a <= b && b <= a + 1);
        prop_assert!(b <= n);
    }

    #[test]
    fn laurent_product_matches_grid_product(seed in any::<u64>(), m in 1usize..4) {
        let mut r = rng(seed);
        let (wm, wp) = random_block_factors(&mut r, m);
        let exact = wm.multiply(&wp).unwrap();
        let grid = wm.multiply_on_grid(&wp).unwrap();
        prop_assert!(coeff_distance(&exact, &grid) < 1e-12);
    }

    /// The analytic route `prod G(a o mu)` equals `G_u(v)` for `a = 1 - v t`.
    #[test]
    fn single_factor_determinant_is_gu(seed in any::<u64>(), n in 1usize..6) {
        let mut r = rng(seed);
        let v = disk_point(&mut r, 0.9);
        let zeros = random_zeros(&mut r, n, 0.8);
        let a = MatrixLaurentSeries::scalar(0, &[c(1.0, 0.0), -v]);
        let u = BlaschkeProduct::new(zeros.clone()).unwrap();
        let d = compression_matrix(&a, &u, &NumericParams::default()).unwrap().log_det().unwrap();
        let g = gu_log(v, zeros);
        prop_assert!((d.log_abs - g.re).abs() < 1e-11);
        prop_assert!(phase_dist(d.arg, g.im) < 1e-11);
    }
}

#[test]
fn log_det_of_permuted_identity_tracks_sign() {
    let mut p = CMat::zeros(3, 3);
    p[(0, 1)] = C64::new(1.0, 0.0);
    p[(1, 0)] = C64::new(1.0, 0.0);
    p[(2, 2)] = C64::new(2.0, 0.0);
    let d = log_det(&p, "test").unwrap().to_complex();
    assert!((d - C64::new(-2.0, 0.0)).norm() < 1e-14);
}
