//! (f,g)-series expansions: coefficient generation, partial sums, the
//! exact interpolation invariant, empirical convergence diagnostics, the
//! Gessel–Stanton / Liu / Carlitz coefficient formulas with their
//! reconstruction series, and the K_{n,k} power-series machinery.

use crate::dd::{self, DdC};
use crate::diff::{condition_of, direct_terms, qdiff_n_fn, w_table};
use crate::error::{FgError, Result};
use crate::nodes::NodeSystem;
use crate::operand::Operand;
use crate::qcore::{qpoch_inf, QBase, SeriesValue};
use num_complex::Complex64;
use serde::Serialize;

/// Relative floor below which further series terms are pure roundoff.
const TERM_FLOOR: f64 = 1e-16;
/// Ratio-test margin: converged needs sustained ratios < 1 - margin,
/// diverged sustained ratios > 1 + margin.
const RATIO_MARGIN: f64 = 0.02;
/// Number of consecutive term ratios the verdict must be sustained over.
const RATIO_WINDOW: usize = 10;
/// Reconstruction agreement threshold for the convergence diagnostic.
const AGREE_TOL: f64 = 1e-6;

/// What to expand: a target function, the node system generating the
/// basis, how many orders, and where to evaluate partial sums.
pub struct ExpansionSpec {
    pub operand: Operand,
    pub sys: NodeSystem,
    pub max_order: usize,
    pub eval_points: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converged,
    Diverged,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub max_order: usize,
    /// Coefficients G(0)..G(max_order) (or up to the truncation point).
    #[serde(with = "crate::ser::c64_vec")]
    pub coeffs: Vec<Complex64>,
    /// Cancellation ratio of each coefficient's defining sum.
    pub condition_estimates: Vec<f64>,
    #[serde(with = "crate::ser::c64_vec")]
    pub eval_points: Vec<Complex64>,
    /// partial_sums[i][n] = S_n(eval_points[i]).
    #[serde(with = "crate::ser::c64_mat")]
    pub partial_sums: Vec<Vec<Complex64>>,
    /// |F(b_n) - S_n(b_n)|; roundoff-level at every order regardless of
    /// convergence (finite inversion identity, not a limit).
    pub interpolation_residuals: Vec<f64>,
    /// Shifted-over-unshifted difference ratios; None where the unshifted
    /// difference vanishes.
    #[serde(with = "crate::ser::c64_opt_vec")]
    pub lambda_ratios: Vec<Option<Complex64>>,
    /// Largest term ratio inside the verdict window at the first eval point.
    pub ratio_test_bound: f64,
    pub verdict: Verdict,
    /// Set when the report stopped before max_order because further terms
    /// fell below the roundoff floor at every eval point.
    pub truncated_at: Option<usize>,
}

/// Basis values phi_k(x) = f(x_k,b_k) prod_{i=0}^{k-1} g(b_i,x) /
/// prod_{i=1}^{k} f(x_i,x) for k = 0..=n, built by stepwise ratios.
fn basis_column(sys: &NodeSystem, x: DdC, n: usize) -> Result<Vec<DdC>> {
    let pair = sys.pair();
    let mut out = Vec::with_capacity(n + 1);
    let mut fdiag_prev = pair.f_dd(sys.param_dd(0)?, sys.node_dd(0)?)?;
    if fdiag_prev.abs_est() == 0.0 {
        return Err(FgError::ZeroDenominator {
            i: 0,
            k: 0,
            what: "f(x_0, b_0) vanishes".to_string(),
        });
    }
    out.push(fdiag_prev);
    for k in 0..n {
        let fdiag_next = pair.f_dd(sys.param_dd(k + 1)?, sys.node_dd(k + 1)?)?;
        if fdiag_next.abs_est() == 0.0 {
            return Err(FgError::ZeroDenominator {
                i: k + 1,
                k: k + 1,
                what: format!("f(x_{0}, b_{0}) vanishes", k + 1),
            });
        }
        let fx = pair.f_dd(sys.param_dd(k + 1)?, x)?;
        if fx.abs_est() == 0.0 {
            return Err(FgError::Domain(format!(
                "evaluation point is a pole of the basis factor 1/f(x_{}, x)",
                k + 1
            )));
        }
        let next = out[k] * (fdiag_next / fdiag_prev) * pair.g_dd(sys.node_dd(k)?, x)? / fx;
        out.push(next);
        fdiag_prev = fdiag_next;
    }
    Ok(out)
}

/// Coefficients G(n) = order-n difference of F over the leading window,
/// for n = 0..=max_order, via the shared difference table.
pub fn expansion_coeffs(spec: &ExpansionSpec) -> Result<Vec<Complex64>> {
    let table = w_table(&spec.operand, &spec.sys, spec.max_order)?;
    Ok((0..=spec.max_order).map(|n| table[n][0].to_c64()).collect())
}

/// S_n(x) = sum_{k=0}^{n} G(k) f(x_k,b_k) prod_{i=0}^{k-1} g(b_i,x) /
/// prod_{i=1}^{k} f(x_i,x).
pub fn partial_sum(spec: &ExpansionSpec, n: usize, x: Complex64) -> Result<Complex64> {
    let table = w_table(&spec.operand, &spec.sys, n)?;
    let basis = basis_column(&spec.sys, DdC::from_c64(x), n)?;
    let mut s = DdC::ZERO;
    for k in 0..=n {
        s = s + table[k][0] * basis[k];
    }
    Ok(s.to_c64())
}

/// Residuals |F(b_n) - S_n(b_n)| for n = 0..=max_order. These encode the
/// finite inversion identity and must be roundoff-level at every order.
pub fn interpolation_check(spec: &ExpansionSpec) -> Result<Vec<f64>> {
    let table = w_table(&spec.operand, &spec.sys, spec.max_order)?;
    let mut residuals = Vec::with_capacity(spec.max_order + 1);
    for n in 0..=spec.max_order {
        let bn = spec.sys.node_dd(n)?;
        let basis = basis_column(&spec.sys, bn, n)?;
        let mut s = DdC::ZERO;
        for k in 0..=n {
            s = s + table[k][0] * basis[k];
        }
        let f = spec.operand.eval_dd(bn)?;
        residuals.push((f - s).abs_est());
    }
    Ok(residuals)
}

/// lambda_n = (order-n difference over b_1..b_{n+1}) / (same over
/// b_0..b_n), parameters unshifted. Entry n holds lambda_n for
/// 1 <= n < max_order; entry 0 is None (there is no order-0 ratio), as is
/// any entry whose denominator vanishes.
pub fn lambda_ratios(spec: &ExpansionSpec) -> Result<Vec<Option<Complex64>>> {
    if spec.max_order == 0 {
        return Ok(Vec::new());
    }
    let table = w_table(&spec.operand, &spec.sys, spec.max_order)?;
    Ok(lambda_from_table(&table, spec.max_order))
}

fn lambda_from_table(table: &[Vec<DdC>], len: usize) -> Vec<Option<Complex64>> {
    (0..len)
        .map(|n| {
            if n == 0 || table[n].len() < 2 {
                return None;
            }
            let den = table[n][0];
            if den.abs_est() == 0.0 {
                None
            } else {
                Some((table[n][1] / den).to_c64())
            }
        })
        .collect()
}

/// Ratio-test verdict over a term-magnitude sequence. `floored` marks that
/// summation already hit the roundoff floor (decisive convergence).
fn ratio_verdict(mags: &[f64], floored: bool) -> (f64, Verdict) {
    let ratios: Vec<f64> = mags
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    // An identically-zero tail is a trivially convergent series.
    let tail_zeros = mags.iter().rev().take_while(|&&m| m == 0.0).count();
    if tail_zeros >= RATIO_WINDOW || (tail_zeros > 0 && tail_zeros + 1 >= mags.len()) {
        return (0.0, Verdict::Converged);
    }
    if floored {
        let bound = ratios.iter().copied().fold(0.0f64, f64::max).min(1.0);
        return (bound, Verdict::Converged);
    }
    if ratios.len() < RATIO_WINDOW {
        let bound = ratios.iter().copied().fold(0.0f64, f64::max);
        return (bound, Verdict::Inconclusive);
    }
    let window = &ratios[ratios.len() - RATIO_WINDOW..];
    let max_r = window.iter().copied().fold(0.0f64, f64::max);
    let min_r = window.iter().copied().fold(f64::INFINITY, f64::min);
    if max_r < 1.0 - RATIO_MARGIN {
        (max_r, Verdict::Converged)
    } else if min_r > 1.0 + RATIO_MARGIN {
        (max_r, Verdict::Diverged)
    } else {
        (max_r, Verdict::Inconclusive)
    }
}

/// Build the full expansion report: coefficients with condition estimates,
/// partial sums at the eval points (truncated once terms fall below the
/// roundoff floor everywhere), exact interpolation residuals, lambda
/// ratios, and a ratio-test verdict at the first eval point.
pub fn expansion_report(spec: &ExpansionSpec) -> Result<ExpansionReport> {
    let max = spec.max_order;
    let table = w_table(&spec.operand, &spec.sys, max)?;
    let coeffs_dd: Vec<DdC> = (0..=max).map(|n| table[n][0]).collect();

    // Terms G(k)*phi_k and running sums per eval point.
    let mut columns: Vec<(Vec<f64>, Vec<DdC>)> = Vec::with_capacity(spec.eval_points.len());
    for &pt in &spec.eval_points {
        let basis = basis_column(&spec.sys, DdC::from_c64(pt), max)?;
        let mut sums = Vec::with_capacity(max + 1);
        let mut mags = Vec::with_capacity(max + 1);
        let mut s = DdC::ZERO;
        for k in 0..=max {
            let t = coeffs_dd[k] * basis[k];
            s = s + t;
            sums.push(s);
            mags.push(t.abs_est());
        }
        columns.push((mags, sums));
    }

    // Truncate once two consecutive orders n >= 4 have nonzero terms below
    // the floor at every eval point.
    let mut cutoff = max;
    if !columns.is_empty() {
        let below = |n: usize| {
            columns.iter().all(|(mags, sums)| {
                let scale = sums[n].abs_est();
                mags[n] > 0.0 && mags[n] < TERM_FLOOR * scale
            })
        };
        for n in 4..=max {
            if below(n) && below(n - 1) {
                cutoff = n;
                break;
            }
        }
    }
    let truncated_at = if cutoff < max { Some(cutoff) } else { None };

    let mut condition_estimates = Vec::with_capacity(cutoff + 1);
    for n in 0..=cutoff {
        let terms = direct_terms(&spec.operand, &spec.sys, 0, n)?;
        condition_estimates.push(condition_of(&terms, coeffs_dd[n]));
    }

    let mut interpolation_residuals = Vec::with_capacity(cutoff + 1);
    for n in 0..=cutoff {
        let bn = spec.sys.node_dd(n)?;
        let basis = basis_column(&spec.sys, bn, n)?;
        let mut s = DdC::ZERO;
        for k in 0..=n {
            s = s + coeffs_dd[k] * basis[k];
        }
        interpolation_residuals.push((spec.operand.eval_dd(bn)? - s).abs_est());
    }

    let mut lambda_ratios = lambda_from_table(&table, max);
    lambda_ratios.truncate(cutoff + 1);
    lambda_ratios.resize(cutoff + 1, None);

    let (ratio_test_bound, verdict) = match columns.first() {
        Some((mags, _)) => ratio_verdict(&mags[..=cutoff], truncated_at.is_some()),
        None => (0.0, Verdict::Inconclusive),
    };

    Ok(ExpansionReport {
        max_order: max,
        coeffs: coeffs_dd[..=cutoff].iter().map(|v| v.to_c64()).collect(),
        condition_estimates,
        eval_points: spec.eval_points.clone(),
        partial_sums: columns
            .iter()
            .map(|(_, sums)| sums[..=cutoff].iter().map(|v| v.to_c64()).collect())
            .collect(),
        interpolation_residuals,
        lambda_ratios,
        ratio_test_bound,
        verdict,
        truncated_at,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IsmailReport {
    #[serde(with = "crate::ser::c64")]
    pub probe: Complex64,
    pub verdict: Verdict,
    /// Geometric mean of the term ratios in the verdict window, when
    /// enough nonzero terms exist.
    pub empirical_rate: Option<f64>,
    pub ratio_test_bound: f64,
    pub terms_used: usize,
    /// Partial sum at the probe (roundoff-floor truncated).
    #[serde(with = "crate::ser::c64")]
    pub s_value: Complex64,
    #[serde(with = "crate::ser::c64")]
    pub f_value: Complex64,
    pub reconstruction_error: f64,
    /// False when the series value does not match F at the probe — a
    /// convergent-looking series may still converge to the wrong function.
    pub agrees: bool,
}

/// Empirical convergence diagnostic at a probe point: ratio test on the
/// expansion terms, plus a comparison of the summed series against F.
pub fn ismail_diagnostic(spec: &ExpansionSpec, probe: Complex64) -> Result<IsmailReport> {
    let max = spec.max_order;
    let table = w_table(&spec.operand, &spec.sys, max)?;
    let basis = basis_column(&spec.sys, DdC::from_c64(probe), max)?;
    let mut s = DdC::ZERO;
    let mut mags: Vec<f64> = Vec::with_capacity(max + 1);
    let mut floored = false;
    let mut terms_used = 0usize;
    for k in 0..=max {
        let t = table[k][0] * basis[k];
        let mag = t.abs_est();
        // Noise guard: once terms are deep below the sum they only add
        // roundoff; rising magnitudes past that point are noise onset.
        if k >= 4 && mag > 0.0 && mags.last().is_some_and(|&p| p > 0.0 && mag > p) {
            let scale = s.abs_est();
            if mag < 1e-10 * scale {
                floored = true;
                break;
            }
        }
        s = s + t;
        mags.push(mag);
        terms_used += 1;
        if k > 2 && mag > 0.0 && mag < TERM_FLOOR * s.abs_est() {
            floored = true;
            break;
        }
    }
    let (ratio_test_bound, verdict) = ratio_verdict(&mags, floored);
    let ratios: Vec<f64> = mags
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    let empirical_rate = if ratios.len() >= RATIO_WINDOW {
        let tail = &ratios[ratios.len() - RATIO_WINDOW..];
        Some((tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp())
    } else {
        None
    };
    let f_value = spec.operand.eval(probe)?;
    let s_value = s.to_c64();
    let reconstruction_error = (s_value - f_value).norm();
    let agrees = reconstruction_error <= AGREE_TOL * (1.0 + f_value.norm());
    Ok(IsmailReport {
        probe,
        verdict,
        empirical_rate,
        ratio_test_bound,
        terms_used,
        s_value,
        f_value,
        reconstruction_error,
        agrees,
    })
}

fn gs_coeff_dd(
    op: &Operand,
    a: Complex64,
    p: Complex64,
    q_value: Complex64,
    n: usize,
) -> Result<DdC> {
    if p.norm() >= 1.0 || q_value.norm() >= 1.0 {
        return Err(FgError::Invalid(
            "the coefficient formula needs |p| < 1 and |q| < 1".to_string(),
        ));
    }
    if q_value.norm() == 0.0 && n >= 1 {
        return Err(FgError::DivisionByZero(
            "the coefficient formula carries q^{-nk}; q must be nonzero".to_string(),
        ));
    }
    let ad = DdC::from_c64(a);
    let pd = DdC::from_c64(p);
    let qd = DdC::from_c64(q_value);
    let mut sum = DdC::ZERO;
    let mut qk = DdC::ONE; // q^k
    for k in 0..=n {
        let e = (k as i64) * (k as i64 + 1) / 2 - (n as i64) * (k as i64);
        let sign = if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
        let poch = dd::qpoch_int(ad * pd * qk, pd, n as i64 - 1)?;
        let term = qd.powi(e) * dd::qbin(n, k, qd) * poch * op.eval_dd(qk)? * sign;
        sum = sum + term;
        qk = qk * qd;
    }
    Ok(sum)
}

/// Gessel–Stanton expansion coefficient:
/// sum_{k=0}^{n} (-1)^{n-k} q^{C(k+1,2)-nk} [n k]_q (Apq^k;p)_{n-1} F(q^k).
pub fn gs_coeff(
    op: &Operand,
    a: Complex64,
    p: Complex64,
    q_value: Complex64,
    n: usize,
) -> Result<Complex64> {
    Ok(gs_coeff_dd(op, a, p, q_value, n)?.to_c64())
}

fn liu_coeff_dd(op: &Operand, a: Complex64, q_value: Complex64, n: usize) -> Result<DdC> {
    if a.norm() == 0.0 {
        return Err(FgError::Domain(
            "a = 0 is outside this formula; use the Carlitz coefficient".to_string(),
        ));
    }
    if q_value.norm() >= 1.0 || q_value.norm() == 0.0 {
        return Err(FgError::Invalid(
            "the coefficient formula needs 0 < |q| < 1".to_string(),
        ));
    }
    let ad = DdC::from_c64(a);
    let qd = DdC::from_c64(q_value);
    let mut sum = DdC::ZERO;
    let mut aqk1 = ad * qd; // a q^{k+1}
    for k in 0..=n {
        let e = (k as i64) * (k as i64 + 1) / 2 - (n as i64) * (k as i64);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let poch = dd::qpoch_int(aqk1, qd, n as i64 - 1)?;
        let term = qd.powi(e) * dd::qbin(n, k, qd) * poch * op.eval_dd(aqk1)? * sign;
        sum = sum + term;
        aqk1 = aqk1 * qd;
    }
    Ok(sum / (ad * qd).powu(n as u32))
}

/// Liu's expansion coefficient:
/// (aq)^{-n} sum_{k=0}^{n} (-1)^k q^{C(k+1,2)-nk} [n k]_q (aq^{k+1};q)_{n-1} F(aq^{k+1}).
pub fn liu_coeff(op: &Operand, a: Complex64, q_value: Complex64, n: usize) -> Result<Complex64> {
    Ok(liu_coeff_dd(op, a, q_value, n)?.to_c64())
}

#[derive(Debug, Clone, Serialize)]
pub struct CarlitzCoeff {
    /// Primary route: the k-th q-derivative of F(x)(x;q)_{k-1} extrapolated
    /// to x = 0 from two off-origin probes.
    #[serde(with = "crate::ser::c64")]
    pub value: Complex64,
    /// Independent route: Liu's coefficient extrapolated a -> 0.
    #[serde(with = "crate::ser::c64")]
    pub cross_check: Complex64,
    /// |value - cross_check| / max(1, |value|).
    pub deviation: f64,
    /// False when the two routes disagree beyond 1e-6 scaled — treat the
    /// value as numerically unstable.
    pub stable: bool,
}

/// Per-order base probe for the limit extrapolations. Small orders tolerate
/// (and need) tiny probes — the extrapolation bias shrinks with the probe —
/// while large orders need big probes because the defining sums divide by
/// probe^k, amplifying roundoff. Values balance the two error terms,
/// validated against closed-form coefficients at every order.
fn carlitz_probe_base(k: usize) -> f64 {
    const BASES: [f64; 10] = [
        0.0, 1e-7, 2e-6, 3e-5, 2e-4, 1e-3, 3e-3, 1e-2, 5e-2, 7.5e-2,
    ];
    if k < BASES.len() {
        BASES[k]
    } else {
        0.15
    }
}

/// Extrapolate eval(t) -> 0: three-point Lagrange through (4t, 2t, t)
/// cancels the linear and quadratic probe bias; two-point cancels linear
/// only but amplifies roundoff less (used where roundoff dominates).
fn extrapolate_to_zero(
    eval: &dyn Fn(f64) -> Result<DdC>,
    t: f64,
    three_point: bool,
) -> Result<DdC> {
    if three_point {
        let d1 = eval(4.0 * t)?;
        let d2 = eval(2.0 * t)?;
        let d3 = eval(t)?;
        Ok(d1 / DdC::from_f64(3.0) - d2 * DdC::from_f64(2.0) + d3 * DdC::from_f64(8.0 / 3.0))
    } else {
        let d1 = eval(2.0 * t)?;
        let d2 = eval(t)?;
        Ok(d2 * DdC::from_f64(2.0) - d1)
    }
}

/// Carlitz's expansion coefficient [the k-th q-derivative of
/// F(x)(x;q)_{k-1} at x = 0], computed by two independent limit routes
/// that cross-check each other. Accuracy degrades past k ~ 10 (the routes
/// lose roughly two digits per order); the `stable` flag reports it.
pub fn carlitz_coeff(op: &Operand, q_value: Complex64, k: usize) -> Result<CarlitzCoeff> {
    if q_value.norm() >= 1.0 || q_value.norm() == 0.0 {
        return Err(FgError::Invalid(
            "the coefficient formula needs 0 < |q| < 1".to_string(),
        ));
    }
    let qd = DdC::from_c64(q_value);
    let h = |x: DdC| -> Result<DdC> {
        let poch = if k == 0 {
            dd::qpoch_int(x, qd, -1)?
        } else {
            dd::qpoch(x, qd, k - 1)
        };
        Ok(op.eval_dd(x)? * poch)
    };
    let value = if k == 0 {
        // The order-0 limit point is regular: evaluate it directly.
        h(DdC::ZERO)?.to_c64()
    } else {
        let qdiff_probe = |x0: f64| qdiff_n_fn(&h, qd, DdC::from_f64(x0), k);
        extrapolate_to_zero(&qdiff_probe, carlitz_probe_base(k), k <= 9)?.to_c64()
    };

    let liu_probe = |a: f64| liu_coeff_dd(op, Complex64::new(a, 0.0), q_value, k);
    let cross_t = match k {
        0 => 1e-7,
        1..=8 => carlitz_probe_base(k),
        _ => 0.15,
    };
    let cross_check = extrapolate_to_zero(&liu_probe, cross_t, k <= 8)?.to_c64();

    let deviation = (value - cross_check).norm() / value.norm().max(1.0);
    Ok(CarlitzCoeff {
        value,
        cross_check,
        deviation,
        stable: deviation <= 1e-6,
    })
}

/// Reconstruction series for the Gessel–Stanton coefficients:
/// sum_k G3(k) (1 - Ap^k q^k) prod_{i=0}^{k-1}(q^i - x) / ((q;q)_k (Apx;p)_k).
pub fn gs_reconstruction(
    op: &Operand,
    a: Complex64,
    p: Complex64,
    q_value: Complex64,
    x: Complex64,
    max_terms: usize,
) -> Result<Complex64> {
    let ad = DdC::from_c64(a);
    let pd = DdC::from_c64(p);
    let qd = DdC::from_c64(q_value);
    let xd = DdC::from_c64(x);
    let mut sum = DdC::ZERO;
    let mut prev_mag = f64::INFINITY;
    let mut num = DdC::ONE;
    let mut qq = DdC::ONE;
    let mut apx_poch = DdC::ONE;
    let mut qk = DdC::ONE; // q^k
    let mut pqk = DdC::ONE; // (pq)^k
    let mut ppow = DdC::ONE; // p^{k-1} tracker inside (Apx;p)_k updates
    for k in 0..max_terms {
        if k > 0 {
            // advance the running products from k-1 to k
            num = num * (qk / qd - xd); // q^{k-1} - x
            qq = qq * (DdC::ONE - qk);
            apx_poch = apx_poch * (DdC::ONE - ad * pd * xd * ppow);
            ppow = ppow * pd;
        }
        let g3 = gs_coeff_dd(op, a, p, q_value, k)?;
        let den = qq * apx_poch;
        if den.abs_est() == 0.0 {
            return Err(FgError::DivisionByZero(
                "reconstruction basis denominator vanishes".to_string(),
            ));
        }
        let t = g3 * (DdC::ONE - ad * pqk) * num / den;
        let mag = t.abs_est();
        if k >= 4 && mag > prev_mag {
            break;
        }
        sum = sum + t;
        if k > 2 && mag < TERM_FLOOR * sum.abs_est() {
            break;
        }
        prev_mag = mag;
        qk = qk * qd;
        pqk = pqk * pd * qd;
    }
    Ok(sum.to_c64())
}

/// Reconstruction series for Liu's coefficients:
/// sum_k G4(k) (1 - aq^{2k}) (aq/x;q)_k x^k / ((q;q)_k (x;q)_k).
pub fn liu_reconstruction(
    op: &Operand,
    a: Complex64,
    q_value: Complex64,
    x: Complex64,
    max_terms: usize,
) -> Result<Complex64> {
    if x.norm() == 0.0 {
        return Err(FgError::Domain(
            "the reconstruction basis carries aq/x; x must be nonzero".to_string(),
        ));
    }
    let ad = DdC::from_c64(a);
    let qd = DdC::from_c64(q_value);
    let xd = DdC::from_c64(x);
    let aqx = ad * qd / xd;
    let mut sum = DdC::ZERO;
    let mut prev_mag = f64::INFINITY;
    let mut aqx_poch = DdC::ONE; // (aq/x;q)_k
    let mut qq = DdC::ONE; // (q;q)_k
    let mut xpoch = DdC::ONE; // (x;q)_k
    let mut xk = DdC::ONE; // x^k
    let mut q2k = DdC::ONE; // q^{2k}
    let mut qk = DdC::ONE; // q^k
    for k in 0..max_terms {
        if k > 0 {
            aqx_poch = aqx_poch * (DdC::ONE - aqx * qk / qd);
            qq = qq * (DdC::ONE - qk);
            xpoch = xpoch * (DdC::ONE - xd * qk / qd);
            xk = xk * xd;
            q2k = q2k * qd * qd;
        }
        let g4 = liu_coeff_dd(op, a, q_value, k)?;
        let den = qq * xpoch;
        if den.abs_est() == 0.0 {
            return Err(FgError::DivisionByZero(
                "reconstruction basis denominator vanishes".to_string(),
            ));
        }
        let t = g4 * (DdC::ONE - ad * q2k) * aqx_poch * xk / den;
        let mag = t.abs_est();
        if k >= 4 && mag > prev_mag {
            break;
        }
        sum = sum + t;
        if k > 2 && mag < TERM_FLOOR * sum.abs_est() {
            break;
        }
        prev_mag = mag;
        qk = qk * qd;
    }
    Ok(sum.to_c64())
}

/// Reconstruction series for Carlitz's coefficients:
/// sum_k h_k x^k / (x;q)_k with h_k = carlitz_coeff / (q;q)_k.
pub fn carlitz_reconstruction(
    op: &Operand,
    q_value: Complex64,
    x: Complex64,
    max_terms: usize,
) -> Result<Complex64> {
    let qd = DdC::from_c64(q_value);
    let xd = DdC::from_c64(x);
    let mut sum = DdC::ZERO;
    let mut prev_mag = f64::INFINITY;
    let mut qq = DdC::ONE; // (q;q)_k
    let mut xpoch = DdC::ONE; // (x;q)_k
    let mut xk = DdC::ONE; // x^k
    let mut qk = DdC::ONE; // q^k
    for k in 0..max_terms {
        if k > 0 {
            qq = qq * (DdC::ONE - qk);
            xpoch = xpoch * (DdC::ONE - xd * qk / qd);
            xk = xk * xd;
        }
        let ck = carlitz_coeff(op, q_value, k)?;
        let den = qq * xpoch;
        if den.abs_est() == 0.0 {
            return Err(FgError::DivisionByZero(
                "reconstruction basis denominator vanishes".to_string(),
            ));
        }
        let t = DdC::from_c64(ck.value) * xk / den;
        let mag = t.abs_est();
        if k >= 4 && mag > prev_mag {
            break;
        }
        sum = sum + t;
        if k > 2 && mag < TERM_FLOOR * sum.abs_est() {
            break;
        }
        prev_mag = mag;
        qk = qk * qd;
    }
    Ok(sum.to_c64())
}

/// Closed-form expansion coefficient of F(x) = 1/(1-cx) over the geometric
/// system b_i = q^i, x_i = a p^i with the pair (1-xy, x-y):
/// G(0) = 1/((1-c)(1-a)), G(n) = (-1)^n c^n (ap/c;p)_{n-1} / (c;q)_{n+1}.
pub fn geometric_coeff_closed(
    c: Complex64,
    a: Complex64,
    p: Complex64,
    q_value: Complex64,
    n: usize,
) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    if n == 0 {
        let den = (one - c) * (one - a);
        if den.norm() == 0.0 {
            return Err(FgError::DivisionByZero("closed form pole".to_string()));
        }
        return Ok(one / den);
    }
    if c.norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let cd = DdC::from_c64(c);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let num = dd::qpoch(
        DdC::from_c64(a) * DdC::from_c64(p) / cd,
        DdC::from_c64(p),
        n - 1,
    );
    let den = dd::qpoch(cd, DdC::from_c64(q_value), n + 1);
    if den.abs_est() == 0.0 {
        return Err(FgError::DivisionByZero("closed form pole".to_string()));
    }
    Ok(((cd.powu(n as u32) * num / den) * DdC::from_f64(sign)).to_c64())
}

/// Closed-form lambda ratio for F(x) = 1/(1-cx) over b_i = q^i:
/// lambda_n = (1-c)/(1-c q^{n+1}).
pub fn geometric_lambda_closed(c: Complex64, q_value: Complex64, n: usize) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    (one - c) / (one - c * q_value.powi(n as i32 + 1))
}

fn qbin_gauss_c64(m: i64, j: i64, q_value: Complex64) -> Complex64 {
    if j < 0 || j > m {
        return Complex64::new(0.0, 0.0);
    }
    let one = Complex64::new(1.0, 0.0);
    let mut acc = one;
    for i in 1..=j {
        acc *= (one - q_value.powi((m - j + i) as i32)) / (one - q_value.powi(i as i32));
    }
    acc
}

/// Closed form of the order-n difference of x^r over b_i = q^i, x_i = a p^i
/// with the pair (1-xy, x-y):
/// sum_{k=0}^{n-1} (-1)^{n-k} a^k p^{C(k+1,2)} [n-1 k]_p [r+k n]_q.
pub fn power_difference_closed(
    r: u32,
    a: Complex64,
    p: Complex64,
    q_value: Complex64,
    n: usize,
) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let sign = if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
        let e = (k * (k + 1) / 2) as i32;
        sum += sign
            * a.powi(k as i32)
            * p.powi(e)
            * qbin_gauss_c64(n as i64 - 1, k as i64, p)
            * qbin_gauss_c64(r as i64 + k as i64, n as i64, q_value);
    }
    sum
}

/// Closed-form lambda ratio for F(x) = x^r over the same system: shifting
/// the node window b_i -> q b_i scales each expanded power term by
/// q^{r+k-n}, so lambda_n = sum_k t_k q^{r+k-n} / sum_k t_k with
/// t_k = (-1)^{n-k} a^k p^{C(k+1,2)} [n-1 k]_p [r+k n]_q.
pub fn power_lambda_closed(
    r: u32,
    a: Complex64,
    p: Complex64,
    q_value: Complex64,
    n: usize,
) -> Result<Complex64> {
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let sign = if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
        let e = (k * (k + 1) / 2) as i32;
        let t = sign
            * a.powi(k as i32)
            * p.powi(e)
            * qbin_gauss_c64(n as i64 - 1, k as i64, p)
            * qbin_gauss_c64(r as i64 + k as i64, n as i64, q_value);
        num += t * q_value.powi(r as i32 + k as i32 - n as i32);
        den += t;
    }
    if den.norm() == 0.0 {
        return Err(FgError::DivisionByZero(
            "unshifted difference of x^r vanishes".to_string(),
        ));
    }
    Ok(num / den)
}

/// K_{n,k}(x) = sum_{r >= max(0,-k)} a_{r+k} [r+n choose r]_q x^r with tail
/// diagnostics.
pub fn k_nk(
    a_fn: &dyn Fn(i64) -> Complex64,
    base: &QBase,
    n: usize,
    k: i64,
    x: Complex64,
) -> Result<SeriesValue> {
    let q = base.q();
    let eps = base.truncation_eps();
    let one = Complex64::new(1.0, 0.0);
    let r0 = (-k).max(0);
    // [r0+n r0]_q by direct product, then updated incrementally.
    let mut binom = one;
    for i in 1..=r0 {
        binom *= (one - q.powi((n as i64 + i) as i32)) / (one - q.powi(i as i32));
    }
    let mut xr = x.powi(r0 as i32);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut small_run = 0usize;
    let mut growth_run = 0usize;
    let mut prev_mag = f64::INFINITY;
    let mut last_mag = 0.0f64;
    let mut terms_used = 0usize;
    // Smallness is judged against the series' own scale (running sum or
    // peak term), so coefficient sequences of tiny overall magnitude are
    // summed to full relative accuracy rather than truncated early.
    let mut scale = 0.0f64;
    for step in 0..base.max_terms() {
        let r = r0 + step as i64;
        let t = a_fn(r + k) * binom * xr;
        sum += t;
        terms_used += 1;
        let mag = t.norm();
        last_mag = mag;
        scale = scale.max(mag).max(sum.norm());
        if mag <= eps * scale {
            small_run += 1;
            if small_run >= 2 && step >= 3 {
                return Ok(SeriesValue {
                    value: sum,
                    terms_used,
                    tail_bound: mag,
                    converged: true,
                });
            }
        } else {
            small_run = 0;
        }
        if step >= 10 && mag > prev_mag {
            growth_run += 1;
            if growth_run >= 25 {
                return Err(FgError::Divergent(format!(
                    "kernel-coefficient series grows persistently at |x| = {}",
                    x.norm()
                )));
            }
        } else {
            growth_run = 0;
        }
        prev_mag = mag;
        binom *= (one - q.powi((n as i64 + r + 1) as i32)) / (one - q.powi((r + 1) as i32));
        xr *= x;
    }
    let _ = last_mag;
    Err(FgError::MaxTermsExceeded(base.max_terms()))
}

/// K_{n,k}(x) rebuilt from order n-m via the m-fold recursion:
/// (q;q)_{n-m}/(q;q)_n sum_{i=0}^{m} (-1)^i q^{(n-m+1)i + C(i,2)} [m i]_q
/// K_{n-m,k}(q^i x).
pub fn k_nk_iterated(
    a_fn: &dyn Fn(i64) -> Complex64,
    base: &QBase,
    n: usize,
    k: i64,
    x: Complex64,
    m: usize,
) -> Result<Complex64> {
    if m > n {
        return Err(FgError::OutOfRange(format!(
            "iteration depth {m} exceeds order {n}"
        )));
    }
    let q = base.q();
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..=m {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let e = ((n - m + 1) * i + i * (i.max(1) - 1) / 2) as i32;
        let inner = k_nk(a_fn, base, n - m, k, q.powi(i as i32) * x)?.value;
        sum += sign * q.powi(e) * crate::qcore::qbinom(m as i64, i as i64, q)? * inner;
    }
    let ratio = crate::qcore::qpoch(q, base, (n - m) as i64)?
        / crate::qcore::qpoch(q, base, n as i64)?;
    Ok(ratio * sum)
}

#[derive(Debug, Clone, Serialize)]
pub struct KnnLimitRow {
    pub n: usize,
    #[serde(with = "crate::ser::c64")]
    pub ratio: Complex64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KnnLimitReport {
    #[serde(with = "crate::ser::c64")]
    pub target: Complex64,
    pub tolerance: f64,
    pub rows: Vec<KnnLimitRow>,
    /// True when the final tabulated row is within tolerance of the target.
    pub converged: bool,
}

/// Tabulate K_{n,n}(x)/a_n against the limit 1/(x c0;q)_inf, where c0 is
/// the limit of consecutive coefficient ratios a_{n+1}/a_n.
pub fn knn_limit_check(
    a_fn: &dyn Fn(i64) -> Complex64,
    base: &QBase,
    c0: Complex64,
    x: Complex64,
    n_max: usize,
    tolerance: f64,
) -> Result<KnnLimitReport> {
    let denom = qpoch_inf(x * c0, base)?;
    if denom.value.norm() == 0.0 {
        return Err(FgError::DivisionByZero(
            "limit target pole: (x c0;q)_inf vanishes".to_string(),
        ));
    }
    let target = Complex64::new(1.0, 0.0) / denom.value;
    let mut rows = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let an = a_fn(n as i64);
        if an.norm() == 0.0 {
            return Err(FgError::DivisionByZero(format!(
                "coefficient a_{n} vanishes; the ratio K_nn/a_n is undefined"
            )));
        }
        let knn = k_nk(a_fn, base, n, n as i64, x)?.value;
        let ratio = knn / an;
        rows.push(KnnLimitRow {
            n,
            ratio,
            abs_error: (ratio - target).norm(),
        });
    }
    let converged = rows.last().map(|r| r.abs_error <= tolerance).unwrap_or(false);
    Ok(KnnLimitReport {
        target,
        tolerance,
        rows,
        converged,
    })
}
