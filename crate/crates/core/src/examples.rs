//! The products `G_u(v) = prod_{alpha in sigma(u)} (1 - v alpha)` along three
//! zero sequences: two with closed-form asymptotics and one whose `N`-th
//! roots have no limit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{LogDet, NeumaierSum, C64};

/// `log G_u(v)` as a compensated sum of principal logarithms.
pub fn gu_log(v: C64, zeros: impl IntoIterator<Item = C64>) -> C64 {
    let mut s = NeumaierSum::default();
    for a in zeros {
        s.add((C64::new(1.0, 0.0) - v * a).ln());
    }
    s.total()
}

/// `G_u(v)` in log form; requires `|v| < 1`.
pub fn gu_product(v: C64, zeros: &[C64]) -> Result<LogDet> {
    if !(v.norm() < 1.0) {
        return Err(Error::InvalidArgument(format!("|v| = {} is not < 1", v.norm())));
    }
    Ok(LogDet::from_log(gu_log(v, zeros.iter().copied())))
}

/// Measured versus predicted value of `G_{u_N}(v)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub n: u64,
    pub measured: LogDet,
    pub predicted: LogDet,
    pub rel_err: f64,
}

impl Comparison {
    fn new(n: u64, measured: C64, predicted: C64) -> Self {
        let measured = LogDet::from_log(measured);
        let predicted = LogDet::from_log(predicted);
        Comparison {
            n,
            measured,
            predicted,
            rel_err: measured.rel_defect(predicted),
        }
    }

    /// `G_{u_N}(v) / (1-v)^N`, measured and predicted.
    pub fn normalized(&self, v: f64) -> (f64, f64) {
        let shift = self.n as f64 * (1.0 - v).ln();
        (
            (self.measured.log_abs - shift).exp(),
            (self.predicted.log_abs - shift).exp(),
        )
    }
}

fn check_v(v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::InvalidArgument(format!("v = {v} is not in (0, 1)")));
    }
    Ok(())
}

/// `sinh(pi s) / (pi s)` with `s = sqrt(v/(1-v))`.
pub fn example1_constant(v: f64) -> f64 {
    let x = PI * (v / (1.0 - v)).sqrt();
    if x < 1e-8 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

/// `alpha_j = 1 - 1/j^2`: `G_{u_N}(v) ~ (1-v)^N sinh(pi s)/(pi s)`.
pub fn example1_compare(v: f64, n: u64) -> Result<Comparison> {
    check_v(v)?;
    let vc = C64::new(v, 0.0);
    let measured = gu_log(
        vc,
        (1..=n).map(|j| C64::new(1.0 - 1.0 / (j as f64 * j as f64), 0.0)),
    );
    let predicted = n as f64 * (1.0 - v).ln() + example1_constant(v).ln();
    Ok(Comparison::new(n, measured, C64::new(predicted, 0.0)))
}

/// `alpha_j = 1 - 1/j`: `G_{u_N}(v) ~ (1-v)^N N^{v/(1-v)} / Gamma(1/(1-v))`.
pub fn example2_compare(v: f64, n: u64) -> Result<Comparison> {
    check_v(v)?;
    let vc = C64::new(v, 0.0);
    let measured = gu_log(vc, (1..=n).map(|j| C64::new(1.0 - 1.0 / j as f64, 0.0)));
    let q = v / (1.0 - v);
    let predicted = n as f64 * (1.0 - v).ln() + q * (n as f64).ln() - ln_gamma(1.0 / (1.0 - v));
    Ok(Comparison::new(n, measured, C64::new(predicted, 0.0)))
}

/// `N = 2*3^k + l` with `1 <= l <= 4*3^k`, for `N >= 3`.
pub fn example3_decompose(n: u64) -> Option<(u32, u64)> {
    if n < 3 {
        return None;
    }
    let mut k = 0u32;
    let mut p = 1u64;
    while n > 6 * p {
        p *= 3;
        k += 1;
    }
    Some((k, n - 2 * p))
}

/// The counting function: `f(1) = f(2) = 1`, and for `N = 2*3^k + l`,
/// `f = 3^k` when `l <= 2*3^k`, `f = l - 3^k` otherwise.
pub fn example3_f(n: u64) -> u64 {
    assert!(n >= 1, "f is defined on positive integers");
    match example3_decompose(n) {
        None => 1,
        Some((k, l)) => {
            let p = 3u64.pow(k);
            if l <= 2 * p {
                p
            } else {
                l - p
            }
        }
    }
}

/// `z_j`: `+1` when `f` increases at `j` (and for `j = 1`), else `-1`.
pub fn example3_direction(j: u64) -> i8 {
    if j == 1 || example3_f(j) == example3_f(j - 1) + 1 {
        1
    } else {
        -1
    }
}

/// Radii `r_j = 1 - j^{-p}` for the counterexample zeros `alpha_j = r_j z_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusRule {
    pub exponent: f64,
}

impl Default for RadiusRule {
    fn default() -> Self {
        RadiusRule { exponent: 2.0 }
    }
}

impl RadiusRule {
    pub fn radius(&self, j: usize) -> f64 {
        1.0 - (j as f64).powf(-self.exponent)
    }

    pub fn is_summable(&self) -> bool {
        self.exponent > 1.0
    }

    /// Partial-sum heuristic for `sum (1 - r_j) < infinity`: dyadic block
    /// sums must shrink by a clear factor.
    pub fn check_summability(&self) -> Result<()> {
        let block = |k: u32| -> f64 {
            let lo = 1usize << k;
            (lo..2 * lo).map(|j| 1.0 - self.radius(j)).sum()
        };
        let (b1, b2) = (block(12), block(13));
        if !(self.exponent.is_finite()) || b2 > 0.95 * b1 {
            return Err(Error::SummabilityViolation(format!(
                "dyadic block sums {b1:.3e} -> {b2:.3e} do not decay"
            )));
        }
        Ok(())
    }
}

/// `f`, the directions `z_j` and the radii `r_j` up to `n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct CounterexampleSchedule {
    /// `f[N]` for `1 <= N <= n_max` (index 0 unused).
    pub f: Vec<u64>,
    /// `z[j]` for `1 <= j <= n_max` (index 0 unused).
    pub z: Vec<i8>,
    pub radii: RadiusRule,
}

impl CounterexampleSchedule {
    pub fn n_max(&self) -> u64 {
        self.f.len() as u64 - 1
    }

    /// `f(N-1) <= f(N) <= f(N-1) + 1` for every `N >= 2`.
    pub fn monotone_steps_hold(&self) -> bool {
        self.f
            .windows(2)
            .skip(1)
            .all(|w| w[0] <= w[1] && w[1] <= w[0] + 1)
    }

    pub fn zeros(&self, n: usize) -> Vec<C64> {
        (1..=n)
            .map(|j| C64::new(self.radii.radius(j) * self.z[j] as f64, 0.0))
            .collect()
    }
}

pub fn example3_schedule(n_max: u64, radii: RadiusRule) -> Result<CounterexampleSchedule> {
    if n_max < 3 {
        return Err(Error::InvalidArgument("n_max must be at least 3".into()));
    }
    radii.check_summability()?;
    let mut f = vec![0u64; n_max as usize + 1];
    let mut z = vec![0i8; n_max as usize + 1];
    for n in 1..=n_max {
        f[n as usize] = example3_f(n);
        z[n as usize] = if n == 1 || f[n as usize] == f[n as usize - 1] + 1 {
            1
        } else {
            -1
        };
    }
    Ok(CounterexampleSchedule { f, z, radii })
}

/// One row of the counterexample sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example3Row {
    pub n: u64,
    pub f: u64,
    /// `|G_{u_N}(v)|^{1/N}`.
    pub root: f64,
    /// `(1+v) ((1-v)/(1+v))^{f(N)/N}`.
    pub predicted_root: f64,
    /// N-th root of the convergent correction product.
    pub correction_root: f64,
}

/// `G_{u_N}(v)^{1/N}` at each requested `N`, in a single pass over `j`.
pub fn example3_sweep(v: f64, radii: RadiusRule, n_list: &[u64]) -> Result<Vec<Example3Row>> {
    if !(v.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!("|v| = {v} is not < 1")));
    }
    let mut wanted: Vec<u64> = n_list.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let n_max = *wanted.last().unwrap_or(&3);
    let sched = example3_schedule(n_max.max(3), radii)?;
    let mut log_g = NeumaierSum::default();
    let mut rows = Vec::with_capacity(wanted.len());
    let mut next = wanted.iter().peekable();
    for j in 1..=n_max {
        let alpha = radii.radius(j as usize) * sched.z[j as usize] as f64;
        log_g.add(C64::new((1.0 - v * alpha).ln(), 0.0));
        while next.peek() == Some(&&j) {
            next.next();
            let nf = j as f64;
            let f = sched.f[j as usize];
            let root = (log_g.total().re / nf).exp();
            let predicted_root = (1.0 + v) * ((1.0 - v) / (1.0 + v)).powf(f as f64 / nf);
            rows.push(Example3Row {
                n: j,
                f,
                root,
                predicted_root,
                correction_root: root / predicted_root,
            });
        }
    }
    Ok(rows)
}

/// The two witness subsequences `N = 2*3^k` and `N = 4*3^k`, `k <= k_max`.
pub fn example3_witness_points(k_max: u32) -> Vec<u64> {
    (0..=k_max)
        .flat_map(|k| [2 * 3u64.pow(k), 4 * 3u64.pow(k)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn gu_trivial_cases() {
        assert_eq!(gu_product(c(0.3), &[]).unwrap(), LogDet::ONE);
        let g = gu_product(c(0.0), &[c(0.4), C64::new(0.1, 0.7)]).unwrap();
        assert!(g.rel_defect(LogDet::ONE) < 1e-16);
        let g = gu_product(c(0.5), &[c(0.5), c(1.0 / 3.0)]).unwrap();
        assert!((g.to_complex() - c(5.0 / 8.0)).norm() < 1e-15);
        assert!(gu_product(c(1.0), &[c(0.5)]).is_err());
    }

    #[test]
    fn quotient_law() {
        let v = C64::new(0.3, 0.4);
        let zeros: Vec<C64> = (1..50).map(|j| C64::from_polar(1.0 - 1.0 / j as f64, j as f64)).collect();
        for n in 1..zeros.len() {
            let q = gu_product(v, &zeros[..n + 1]).unwrap() / gu_product(v, &zeros[..n]).unwrap();
            assert!(q.rel_defect(LogDet::from_complex(1.0 - v * zeros[n])) < 1e-14);
        }
    }

    #[test]
    fn example1_constant_values() {
        assert!((example1_constant(0.5) - PI.sinh() / PI).abs() < 1e-14);
        assert!((example1_constant(1e-20) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn example2_exact_at_half() {
        // prod (1/2)(1 + 1/j) = (1/2)^N (N+1), so the relative error is exactly 1/N.
        for n in [10u64, 100, 1000] {
            let cmp = example2_compare(0.5, n).unwrap();
            assert!((cmp.rel_err - 1.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_and_f() {
        assert_eq!(example3_decompose(3), Some((0, 1)));
        assert_eq!(example3_decompose(6), Some((0, 4)));
        assert_eq!(example3_decompose(7), Some((1, 1)));
        assert_eq!(example3_decompose(18), Some((1, 12)));
        assert_eq!(example3_decompose(19), Some((2, 1)));
        let f: Vec<u64> = (1..=18).map(example3_f).collect();
        assert_eq!(f, [1, 1, 1, 1, 2, 3, 3, 3, 3, 3, 3, 3, 4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn first_directions() {
        let z: Vec<i8> = (1..=18).map(example3_direction).collect();
        assert_eq!(
            z,
            [1, -1, -1, -1, 1, 1, -1, -1, -1, -1, -1, -1, 1, 1, 1, 1, 1, 1]
        );
    }

    #[test]
    fn divergent_radii_rejected() {
        assert!(matches!(
            RadiusRule { exponent: 1.0 }.check_summability(),
            Err(Error::SummabilityViolation(_))
        ));
        assert!(RadiusRule::default().check_summability().is_ok());
        assert!(example3_schedule(100, RadiusRule { exponent: 0.5 }).is_err());
    }
}
