//! Dense complex helpers: overflow-free determinants and compensated sums.

use std::f64::consts::PI;
use std::ops::{Div, Mul};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Wraps an angle into (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// A nonzero complex number stored as `(log|z|, arg z)`.
///
/// Long products such as `(1 - v)^N` leave double range quickly, so every
/// determinant in the crate travels in this form.
///
/// Serialized as `{log_abs, arg, re, im}`; `re` and `im` are `null` when the
/// value leaves double range.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
pub struct LogDet {
    pub log_abs: f64,
    pub arg: f64,
}

impl LogDet {
    pub const ONE: LogDet = LogDet {
        log_abs: 0.0,
        arg: 0.0,
    };

    pub fn new(log_abs: f64, arg: f64) -> Self {
        LogDet {
            log_abs,
            arg: wrap_phase(arg),
        }
    }

    /// From any branch of the complex logarithm.
    pub fn from_log(log: C64) -> Self {
        LogDet::new(log.re, log.im)
    }

    pub fn from_complex(z: C64) -> Self {
        LogDet::new(z.norm().ln(), z.arg())
    }

    pub fn to_complex(self) -> C64 {
        C64::from_polar(self.log_abs.exp(), self.arg)
    }

    /// Principal logarithm `log|z| + i arg z`.
    pub fn ln(self) -> C64 {
        C64::new(self.log_abs, self.arg)
    }

    pub fn inv(self) -> Self {
        LogDet::new(-self.log_abs, -self.arg)
    }

    pub fn powf(self, p: f64) -> Self {
        LogDet::new(self.log_abs * p, self.arg * p)
    }

    /// `|self / other - 1|`, evaluated without leaving log space.
    pub fn rel_defect(self, other: LogDet) -> f64 {
        let d = C64::new(self.log_abs - other.log_abs, wrap_phase(self.arg - other.arg));
        (d.exp() - 1.0).norm()
    }

    /// `|self - other|` in the complex plane (may under/overflow).
    pub fn abs_defect(self, other: LogDet) -> f64 {
        (self.to_complex() - other.to_complex()).norm()
    }
}

impl Serialize for LogDet {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let z = self.to_complex();
        let fits = z.re.is_finite() && z.im.is_finite() && (z != C64::new(0.0, 0.0));
        let mut st = ser.serialize_struct("LogDet", 4)?;
        st.serialize_field("log_abs", &self.log_abs)?;
        st.serialize_field("arg", &self.arg)?;
        st.serialize_field("re", &fits.then_some(z.re))?;
        st.serialize_field("im", &fits.then_some(z.im))?;
        st.end()
    }
}

impl Mul for LogDet {
    type Output = LogDet;
    fn mul(self, rhs: LogDet) -> LogDet {
        LogDet::new(self.log_abs + rhs.log_abs, self.arg + rhs.arg)
    }
}

impl Div for LogDet {
    type Output = LogDet;
    fn div(self, rhs: LogDet) -> LogDet {
        LogDet::new(self.log_abs - rhs.log_abs, self.arg - rhs.arg)
    }
}

impl std::iter::Product for LogDet {
    fn product<I: Iterator<Item = LogDet>>(iter: I) -> LogDet {
        let mut log = NeumaierSum::default();
        for d in iter {
            log.add(d.ln());
        }
        LogDet::from_log(log.total())
    }
}

/// Determinant of a square matrix by LU with partial pivoting, accumulated
/// as log-magnitude and phase.
pub fn log_det(mat: &CMat, context: &'static str) -> Result<LogDet> {
    assert!(mat.is_square(), "log_det needs a square matrix");
    let n = mat.nrows();
    if n == 0 {
        return Ok(LogDet::ONE);
    }
    let scale = mat.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if scale == 0.0 {
        return Err(Error::SingularMatrix { context });
    }
    let lu = mat.clone().lu();
    let u = lu.u();
    let mut log_abs = NeumaierSum::default();
    let mut arg = if lu.p().determinant::<f64>() < 0.0 { PI } else { 0.0 };
    for k in 0..n {
        let p = u[(k, k)];
        if p.norm() <= scale * f64::EPSILON * 1e-6 {
            return Err(Error::SingularMatrix { context });
        }
        log_abs.add(C64::new(p.norm().ln(), 0.0));
        arg += p.arg();
    }
    Ok(LogDet::new(log_abs.total().re, arg))
}

/// Determinant of a small matrix as a plain complex number.
pub fn det_small(mat: &CMat) -> C64 {
    match mat.nrows() {
        0 => C64::new(1.0, 0.0),
        1 => mat[(0, 0)],
        2 => mat[(0, 0)] * mat[(1, 1)] - mat[(0, 1)] * mat[(1, 0)],
        _ => mat.clone().lu().determinant(),
    }
}

/// Inverse of a small matrix, `None` when numerically singular.
pub fn inv_small(mat: &CMat) -> Option<CMat> {
    match mat.nrows() {
        1 => {
            let z = mat[(0, 0)];
            (z.norm() > 0.0).then(|| CMat::from_element(1, 1, z.inv()))
        }
        2 => {
            let d = det_small(mat);
            if d.norm() == 0.0 {
                return None;
            }
            let di = d.inv();
            Some(CMat::from_row_slice(
                2,
                2,
                &[
                    mat[(1, 1)] * di,
                    -mat[(0, 1)] * di,
                    -mat[(1, 0)] * di,
                    mat[(0, 0)] * di,
                ],
            ))
        }
        _ => mat.clone().try_inverse(),
    }
}

/// Neumaier-compensated complex summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    re: (f64, f64),
    im: (f64, f64),
}

fn neumaier_step((sum, comp): (f64, f64), x: f64) -> (f64, f64) {
    let t = sum + x;
    let comp = if sum.abs() >= x.abs() {
        comp + ((sum - t) + x)
    } else {
        comp + ((x - t) + sum)
    };
    (t, comp)
}

impl NeumaierSum {
    pub fn add(&mut self, z: C64) {
        self.re = neumaier_step(self.re, z.re);
        self.im = neumaier_step(self.im, z.im);
    }

    pub fn total(&self) -> C64 {
        C64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

/// A complex number as `{re, im}` in configs and reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Cx {
    fn from(z: C64) -> Self {
        Cx { re: z.re, im: z.im }
    }
}

impl From<Cx> for C64 {
    fn from(z: Cx) -> Self {
        C64::new(z.re, z.im)
    }
}

/// `#[serde(with = "cx_vec")]` for `Vec<C64>` fields.
pub mod cx_vec {
    use super::{Cx, C64};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], ser: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&z| Cx::from(z)).collect::<Vec<_>>().serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<C64>, D::Error> {
        Ok(Vec::<Cx>::deserialize(de)?.into_iter().map(C64::from).collect())
    }
}

/// Complex product through four real products, which take nalgebra's
/// blocked `f64` kernel.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul dimension mismatch");
    let (n, k, m) = (a.nrows(), a.ncols(), b.ncols());
    if n * k * m < 32 * 32 * 32 {
        return a * b;
    }
    let ar = a.map(|z| z.re);
    let ai = a.map(|z| z.im);
    let br = b.map(|z| z.re);
    let bi = b.map(|z| z.im);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMat::from_fn(n, m, |i, j| C64::new(re[(i, j)], im[(i, j)]))
}

/// Largest entry modulus.
pub fn max_abs(mat: &CMat) -> f64 {
    mat.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_det_matches_small_determinants() {
        let m = CMat::from_row_slice(
            3,
            3,
            &[
                C64::new(2.0, 1.0),
                C64::new(0.5, 0.0),
                C64::new(0.0, -1.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 3.0),
                C64::new(1.0, 1.0),
                C64::new(-1.0, 0.0),
                C64::new(0.2, 0.0),
                C64::new(4.0, 0.0),
            ],
        );
        let direct = m.clone().lu().determinant();
        let ld = log_det(&m, "test").unwrap();
        assert!((ld.to_complex() - direct).norm() < 1e-12 * direct.norm());
    }

    #[test]
    fn log_det_survives_underflow() {
        let n = 400;
        let m = CMat::from_diagonal_element(n, n, C64::new(0.1, 0.0));
        let ld = log_det(&m, "test").unwrap();
        assert!((ld.log_abs - n as f64 * 0.1f64.ln()).abs() < 1e-9);
        assert!(ld.to_complex().norm() == 0.0);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = CMat::zeros(3, 3);
        assert!(log_det(&m, "zero").is_err());
    }

    #[test]
    fn rel_defect_compares_modulo_two_pi() {
        let a = LogDet::new(1.0, PI - 1e-12);
        let b = LogDet::new(1.0, -PI + 1e-12);
        assert!(a.rel_defect(b) < 1e-11);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = NeumaierSum::default();
        s.add(C64::new(1e16, 0.0));
        for _ in 0..1000 {
            s.add(C64::new(1.0, 0.0));
        }
        s.add(C64::new(-1e16, 0.0));
        assert_eq!(s.total().re, 1000.0);
    }
}
