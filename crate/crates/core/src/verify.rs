//! End-to-end checks of the determinant identity for finite Blaschke
//! products and of its limits along growing zero sequences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::factorization::{
    composed_mean_from_factors, log_composed_mean, CanonicalFactorization, FactorizationMethod,
};
use crate::laurent::MatrixLaurentSeries;
use crate::linalg::{log_det, LogDet, C64};
use crate::modelspace::{qu_norm, u_fourier, BlaschkeProduct, ZeroSequence};
use crate::operators::{
    compressed_resolvent_det, compression_matrix, fredholm_det, jacobi_check, qu_restricted_det,
    FredholmDet, JacobiCheck, OperatorTruncation, QuRestrictedDet, QuadratureRecord,
};
use crate::params::NumericParams;

/// Errors below this are indistinguishable from roundoff in `D_N` and count
/// as converged.
pub const NOISE_FLOOR: f64 = 1e-12;

/// One named comparison against a tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            tolerance,
            pass: value < tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationSummary {
    pub method: FactorizationMethod,
    pub right_residual: f64,
    pub left_residual: f64,
    pub bc_tail: f64,
    pub b_band: (i64, i64),
    pub c_band: (i64, i64),
}

/// Both sides of `det T_u(a) = prod G(a o mu_{-alpha}) det(I - Q_u K Q_u) / det(I - K)`,
/// `K = H(b) H(c~)`, with the auxiliary routes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeterminantReport {
    pub block_size: usize,
    #[serde(with = "crate::linalg::cx_vec")]
    pub zeros: Vec<C64>,
    /// `det T_u(a)`.
    pub lhs: LogDet,
    pub rhs: LogDet,
    pub abs_defect: f64,
    pub rel_defect: f64,
    /// `prod G(a o mu_{-alpha})` by quadrature.
    pub mean_product: LogDet,
    /// `prod det v_+(alpha) det v_-(1/conj alpha)`.
    pub factor_product: LogDet,
    pub mean_route_defect: f64,
    pub qu_det: QuRestrictedDet,
    pub fredholm: FredholmDet,
    /// `det P_u (I - K)^{-1} P_u`.
    pub resolvent_det: LogDet,
    /// Against `det T_u(a) / prod G`.
    pub resolvent_route_defect: f64,
    pub jacobi: JacobiCheck,
    pub factorization: FactorizationSummary,
    pub quadrature: QuadratureRecord,
    pub checks: Vec<Check>,
    pub tolerance: f64,
    pub verdict: bool,
}

/// Factorizes `a` and builds the report.
pub fn bo_report(
    a: &MatrixLaurentSeries,
    u: &BlaschkeProduct,
    params: &NumericParams,
) -> Result<DeterminantReport> {
    let f = CanonicalFactorization::compute(a, FactorizationMethod::Auto, params)
        .stage("factorization")?;
    bo_report_with(a, &f, u, params)
}

/// `log prod G(a o mu_{-alpha})` over the given zeros.
pub fn log_mean_product(
    a: &MatrixLaurentSeries,
    zeros: &[C64],
    params: &NumericParams,
) -> Result<Vec<C64>> {
    zeros
        .par_iter()
        .map(|&alpha| log_composed_mean(a, alpha, params))
        .collect()
}

fn sum_logs(logs: &[C64]) -> LogDet {
    logs.iter().map(|l| LogDet::from_log(*l)).product()
}

/// The report for a symbol whose factorization is already known.
pub fn bo_report_with(
    a: &MatrixLaurentSeries,
    f: &CanonicalFactorization,
    u: &BlaschkeProduct,
    params: &NumericParams,
) -> Result<DeterminantReport> {
    let zeros = u.zeros().to_vec();
    let comp = compression_matrix(a, u, params).stage("compression matrix")?;
    let lhs = comp.log_det().stage("compression determinant")?;

    let mean_product = sum_logs(&log_mean_product(a, &zeros, params).stage("geometric means")?);
    let factor_product = zeros
        .iter()
        .map(|&alpha| {
            composed_mean_from_factors(&f.v_plus, &f.v_minus, alpha).map(LogDet::from_complex)
        })
        .collect::<Result<Vec<_>>>()
        .stage("factor means")?
        .into_iter()
        .product::<LogDet>();

    let c_tilde = f.c.tilde_reverse();
    let k = OperatorTruncation::hankel_product_exact(&f.b, &c_tilde);
    let fredholm = fredholm_det(&k).stage("fredholm determinant")?;
    let uf = u_fourier(u, params).stage("fourier data of u")?;
    let qu_det = qu_restricted_det(&uf.series, &f.b, &f.c, params).stage("restricted determinant")?;
    let rhs = mean_product * qu_det.sandwich / fredholm.value;

    let resolvent_det = compressed_resolvent_det(u, &k, params).stage("compressed resolvent")?;
    let jacobi = jacobi_check(u, &k, params).stage("jacobi identity")?;

    let rel_defect = lhs.rel_defect(rhs);
    let mean_route_defect = mean_product.rel_defect(factor_product);
    let resolvent_route_defect = resolvent_det.rel_defect(lhs / mean_product);
    let checks = vec![
        Check::below("determinant identity", rel_defect, params.tol),
        Check::below("mean routes", mean_route_defect, params.route_tol),
        Check::below("resolvent route", resolvent_route_defect, params.route_tol),
        Check::below("jacobi identity", jacobi.defect, params.route_tol),
        Check::below("hankel routes", qu_det.discrepancy, params.route_tol),
    ];
    let verdict = checks.iter().all(|c| c.pass);
    Ok(DeterminantReport {
        block_size: a.block_size(),
        zeros,
        lhs,
        rhs,
        abs_defect: lhs.abs_defect(rhs),
        rel_defect,
        mean_product,
        factor_product,
        mean_route_defect,
        qu_det,
        fredholm,
        resolvent_det,
        resolvent_route_defect,
        jacobi,
        factorization: FactorizationSummary {
            method: f.method,
            right_residual: f.right_residual,
            left_residual: f.left_residual,
            bc_tail: f.bc_tail,
            b_band: (f.b.n_min(), f.b.n_max()),
            c_band: (f.c.n_min(), f.c.n_max()),
        },
        quadrature: comp.quadrature,
        checks,
        tolerance: params.tol,
        verdict,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SzegoRow {
    pub n: usize,
    /// `det T_{u_N}(a) / prod G(a o mu_{-alpha})`.
    pub d_n: LogDet,
    /// `|D_N / target - 1|`.
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// `1 / det(I - K)`: the zeros are not Blaschke summable.
    InverseFredholm,
    /// `det(I - Q K Q) / det(I - K)` with `Q` from the longest prefix.
    BlaschkeSurrogate,
}

/// `D_N` along nested prefixes of a zero sequence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SzegoSweep {
    pub generator: ZeroSequence,
    pub requested: Vec<usize>,
    /// First `N` dropped by the desk-scale cap, if any.
    pub truncated_at: Option<usize>,
    pub rows: Vec<SzegoRow>,
    pub target: LogDet,
    pub target_kind: TargetKind,
    /// `|target(N_max) / target(N_max/2) - 1|` for the surrogate target.
    pub surrogate_gap: Option<f64>,
    /// Over the second half of the rows, each error is below its
    /// predecessor or below `noise_floor`.
    pub eventually_decreasing: bool,
    pub noise_floor: f64,
    /// Power-law fit of the error on earlier rows, evaluated at the last `N`.
    pub extrapolated_error: Option<f64>,
    pub verdict: bool,
}

/// Least-squares fit of `ln err = c + s ln N` on `rows`, evaluated at `n`.
fn power_law_at(rows: &[SzegoRow], n: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| ((r.n as f64).ln(), r.error.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((my + slope * ((n as f64).ln() - mx)).exp())
}

pub fn szego_sweep(
    a: &MatrixLaurentSeries,
    generator: &ZeroSequence,
    n_list: &[usize],
    params: &NumericParams,
) -> Result<SzegoSweep> {
    let mut ns: Vec<usize> = n_list.iter().copied().filter(|&n| n > 0).collect();
    ns.sort_unstable();
    ns.dedup();
    let requested = ns.clone();
    let want = *ns
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty N list".into()))?;
    let feasible = generator.feasible_len(want, params.desk_radius);
    let truncated_at = (feasible < want).then_some(feasible + 1);
    ns.retain(|&n| n <= feasible);
    let n_max = *ns.last().ok_or(Error::DeskScaleCap {
        index: 1,
        modulus: generator.alpha(1).map_or(f64::NAN, |z| z.norm()),
        cap: params.desk_radius,
    })?;

    let f = CanonicalFactorization::compute(a, FactorizationMethod::Auto, params)
        .stage("factorization")?;
    let u = generator.blaschke(n_max).stage("zero sequence")?;
    let comp = compression_matrix(a, &u, params).stage("compression matrix")?;
    let logs = log_mean_product(a, u.zeros(), params).stage("geometric means")?;
    let c_tilde = f.c.tilde_reverse();
    let k = OperatorTruncation::hankel_product_exact(&f.b, &c_tilde);
    let fred = fredholm_det(&k).stage("fredholm determinant")?;

    let d: Vec<(usize, LogDet)> = ns
        .par_iter()
        .map(|&n| {
            let det = log_det(&comp.leading(n), "compression determinant")?;
            Ok((n, det / sum_logs(&logs[..n])))
        })
        .collect::<Result<_>>()?;

    let summable = generator.is_summable();
    let surrogate = |n: usize| -> Result<LogDet> {
        let uf = u_fourier(&u.prefix(n), params)?;
        Ok(qu_restricted_det(&uf.series, &f.b, &f.c, params)?.sandwich / fred.value)
    };
    let (target, target_kind, surrogate_gap) = if summable {
        let t = surrogate(n_max).stage("surrogate target")?;
        let half = surrogate((n_max / 2).max(1)).stage("surrogate target")?;
        (t, TargetKind::BlaschkeSurrogate, Some(t.rel_defect(half)))
    } else {
        (fred.value.inv(), TargetKind::InverseFredholm, None)
    };

    let rows: Vec<SzegoRow> = d
        .into_iter()
        .map(|(n, d_n)| SzegoRow {
            n,
            d_n,
            error: d_n.rel_defect(target),
        })
        .collect();
    let tail = &rows[rows.len() / 2..];
    let eventually_decreasing = tail
        .windows(2)
        .all(|w| w[1].error < w[0].error || w[1].error <= NOISE_FLOOR);
    let extrapolated_error = if rows.len() >= 3 {
        let last = rows[rows.len() - 1].n;
        let fit: Vec<SzegoRow> = rows[..rows.len() - 1]
            .iter()
            .copied()
            .filter(|r| 8 * r.n >= last && r.error > NOISE_FLOOR)
            .collect();
        power_law_at(&fit, last)
    } else {
        None
    };
    let last_err = rows.last().map_or(f64::NAN, |r| r.error);
    let verdict = match target_kind {
        TargetKind::InverseFredholm => {
            eventually_decreasing
                && (last_err <= NOISE_FLOOR
                    || extrapolated_error.is_some_and(|e| last_err < 2.0 * e))
        }
        TargetKind::BlaschkeSurrogate => surrogate_gap.is_some_and(|g| last_err < g),
    };
    Ok(SzegoSweep {
        generator: generator.clone(),
        requested,
        truncated_at,
        rows,
        target,
        target_kind,
        surrogate_gap,
        eventually_decreasing,
        noise_floor: NOISE_FLOOR,
        extrapolated_error,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub n: usize,
    /// `|u_N(z)|` per probe point.
    pub u_abs: Vec<f64>,
    /// `||Q_{u_N} f||` per test vector; `None` beyond the desk-scale cap.
    pub q_norms: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub generator: ZeroSequence,
    #[serde(with = "crate::linalg::cx_vec")]
    pub probes: Vec<C64>,
    pub rows: Vec<ProbeRow>,
    /// `|u_N(z)|` is non-increasing in `N` for every probe.
    pub u_monotone: bool,
    /// `||Q_{u_N} f||` is non-increasing in `N` for every test vector.
    pub q_monotone: bool,
    /// Per probe, `| |u_N(z)| - |u_N'(z)| |` between the last two rows.
    pub final_gaps: Vec<f64>,
    /// Per probe, the successive gaps shrink.
    pub gaps_shrinking: bool,
}

/// `|u_N(z_0)|` and `||Q_{u_N} f||` along nested prefixes.
pub fn strong_convergence_probe(
    generator: &ZeroSequence,
    n_list: &[usize],
    probes: &[C64],
    test_vectors: &[Vec<C64>],
    params: &NumericParams,
) -> Result<ProbeTable> {
    let mut ns: Vec<usize> = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let n_max = ns.last().copied().unwrap_or(0);
    let feasible = generator.feasible_len(n_max, params.desk_radius);
    let zeros = generator.take(n_max)?;
    for z in probes {
        if !(z.norm() < 1.0) {
            return Err(Error::ZeroOutsideDisk { re: z.re, im: z.im });
        }
    }
    // Running products in log form, sampled at each requested N.
    let mut logs = vec![C64::new(0.0, 0.0); probes.len()];
    let mut u_abs_at = Vec::with_capacity(ns.len());
    let mut next = ns.iter().peekable();
    while next.peek() == Some(&&0) {
        next.next();
        u_abs_at.push(vec![1.0; probes.len()]);
    }
    for (j, &alpha) in zeros.iter().enumerate() {
        for (l, &z) in logs.iter_mut().zip(probes) {
            *l += crate::modelspace::blaschke_factor(alpha, z)?.ln();
        }
        while next.peek() == Some(&&(j + 1)) {
            next.next();
            u_abs_at.push(logs.iter().map(|l| l.re.exp()).collect());
        }
    }
    let rows: Vec<ProbeRow> = ns
        .par_iter()
        .zip(u_abs_at.into_par_iter())
        .map(|(&n, u_abs)| {
            let q_norms = if n <= feasible && !test_vectors.is_empty() {
                let uf = u_fourier(&BlaschkeProduct::new(zeros[..n].to_vec())?, params)?;
                Some(test_vectors.iter().map(|f| qu_norm(&uf.series, f)).collect())
            } else {
                None
            };
            Ok(ProbeRow { n, u_abs, q_norms })
        })
        .collect::<Result<_>>()?;

    let slack = 1e-12;
    let u_monotone = rows
        .windows(2)
        .all(|w| w[0].u_abs.iter().zip(&w[1].u_abs).all(|(a, b)| *b <= a + slack));
    let q_rows: Vec<&Vec<f64>> = rows.iter().filter_map(|r| r.q_norms.as_ref()).collect();
    let q_monotone = q_rows
        .windows(2)
        .all(|w| w[0].iter().zip(w[1]).all(|(a, b)| *b <= a + slack));
    let gaps: Vec<Vec<f64>> = rows
        .windows(2)
        .map(|w| {
            w[0].u_abs
                .iter()
                .zip(&w[1].u_abs)
                .map(|(a, b)| (a - b).abs())
                .collect()
        })
        .collect();
    let final_gaps = gaps.last().cloned().unwrap_or_default();
    let gaps_shrinking = gaps
        .windows(2)
        .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| *b <= *a));
    Ok(ProbeTable {
        generator: generator.clone(),
        probes: probes.to_vec(),
        rows,
        u_monotone,
        q_monotone,
        final_gaps,
        gaps_shrinking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pq_symbol(p: f64, q: f64) -> MatrixLaurentSeries {
        MatrixLaurentSeries::scalar(-1, &[c(-q, 0.0), c(1.0 + p * q, 0.0), c(-p, 0.0)])
    }

    #[test]
    fn single_zero_closed_form() {
        let (p, q) = (0.5, 1.0 / 3.0);
        let alpha = c(0.4, 0.2);
        let u = BlaschkeProduct::new(vec![alpha]).unwrap();
        let r = bo_report(&pq_symbol(p, q), &u, &NumericParams::default()).unwrap();
        let lhs = 1.0 + p * q - p * alpha - q * alpha.conj();
        let rhs = (1.0 - p * alpha) * (1.0 - q * alpha.conj()) + (1.0 - alpha.norm_sqr()) * p * q;
        assert!((lhs - rhs).norm() < 1e-15);
        assert!((r.lhs.to_complex() - lhs).norm() < 1e-12);
        assert!((r.rhs.to_complex() - rhs).norm() < 1e-10);
        assert!(r.verdict, "{:?}", r.checks);
    }

    #[test]
    fn classical_case() {
        let (p, q) = (0.5, 1.0 / 3.0);
        for n in [1, 4, 9] {
            let r = bo_report(&pq_symbol(p, q), &BlaschkeProduct::monomial(n), &NumericParams::default())
                .unwrap();
            let want = (1.0 - (p * q).powi(n as i32 + 1)) / (1.0 - p * q);
            assert!((r.lhs.to_complex() - c(want, 0.0)).norm() < 1e-12);
            assert!(r.verdict);
        }
    }

    #[test]
    fn identity_symbol() {
        let u = BlaschkeProduct::new(vec![c(0.1, 0.5), c(-0.3, 0.0)]).unwrap();
        let r = bo_report(&MatrixLaurentSeries::identity(2), &u, &NumericParams::default()).unwrap();
        assert!(r.lhs.rel_defect(LogDet::ONE) < 1e-12);
        assert!(r.rhs.rel_defect(LogDet::ONE) < 1e-12);
    }

    #[test]
    fn identity_sweep_is_one() {
        let s = szego_sweep(
            &MatrixLaurentSeries::identity(1),
            &ZeroSequence::OneMinusInvJ,
            &[1, 2, 4, 8],
            &NumericParams::default(),
        )
        .unwrap();
        for row in &s.rows {
            assert!(row.d_n.rel_defect(LogDet::ONE) < 1e-12);
        }
    }

    #[test]
    fn monomial_probe_kills_e0() {
        let t = strong_convergence_probe(
            &ZeroSequence::Explicit(vec![c(0.0, 0.0); 6]),
            &[1, 2, 4, 6],
            &[c(0.3, 0.0)],
            &[vec![c(1.0, 0.0)]],
            &NumericParams::default(),
        )
        .unwrap();
        for row in &t.rows {
            assert!(row.q_norms.as_ref().unwrap()[0] < 1e-15);
            assert!((row.u_abs[0] - 0.3f64.powi(row.n as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let rows: Vec<SzegoRow> = [4usize, 8, 16]
            .iter()
            .map(|&n| SzegoRow {
                n,
                d_n: LogDet::ONE,
                error: 3.0 / (n as f64).powi(2),
            })
            .collect();
        let e = power_law_at(&rows, 32).unwrap();
        assert!((e - 3.0 / 1024.0).abs() < 1e-12);
    }
}
