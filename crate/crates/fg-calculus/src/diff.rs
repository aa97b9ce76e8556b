//! The n-th order (f,g)-difference operator: direct sum, recursion, Leibniz
//! rule, classical divided differences, and the q-difference specialization.
//!
//! Conventions. The order-n difference over the window b_0..b_n uses the
//! parameters x_1..x_{n-1}; the order-0 value is F(b_0)/f(x_0, b_0). A
//! window starting at b_j (needed by the Leibniz rule) shifts the parameter
//! list with it: order m over b_j..b_{j+m} uses x_{j+1}..x_{j+m-1}, and its
//! order-0 value is F(b_j)/f(x_j, b_j). The recursion builds order m+1 from
//! two order-m windows sharing the *unshifted* parameter list, consuming
//! x_m in the weights; the f(x_0, ·) factors of the order-0 row cancel in
//! the first step, which is exactly why the order-0 convention is shaped
//! the way it is.
//!
//! Every sum accumulates in extended precision internally; results are
//! returned in double precision together with a condition estimate
//! (sum of term magnitudes over magnitude of the sum) that tests and
//! callers use to scale tolerances.

use crate::dd::{self, DdC};
use crate::error::{FgError, Result};
use crate::nodes::NodeSystem;
use crate::operand::Operand;
use num_complex::Complex64;
use serde::Serialize;

/// Cap applied to condition estimates so that fully cancelled sums stay
/// finite and serializable.
const CONDITION_CAP: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffMethod {
    Direct,
    Recursive,
    Leibniz,
}

#[derive(Debug, Clone, Serialize)]
pub struct DifferenceResult {
    #[serde(with = "crate::ser::c64")]
    pub value: Complex64,
    pub order: usize,
    pub method: DiffMethod,
    /// Sum of |term| over |sum| for the defining sum; always >= 1, capped
    /// at 1e300 when the sum cancels to zero.
    pub condition_estimate: f64,
}

pub(crate) fn condition_of(terms: &[DdC], value: DdC) -> f64 {
    let mag: f64 = terms.iter().map(|t| t.abs_est()).sum();
    if mag == 0.0 {
        return 1.0;
    }
    let v = value.abs_est();
    if v == 0.0 {
        return CONDITION_CAP;
    }
    (mag / v).clamp(1.0, CONDITION_CAP)
}

fn sum_terms(terms: &[DdC]) -> DdC {
    let mut s = DdC::ZERO;
    for t in terms {
        s = s + *t;
    }
    s
}

/// Terms of the order-m difference over the window b_start..b_{start+m}
/// with the shifted parameter list x_{start+1}..x_{start+m-1} (order 0:
/// the single term F(b_start)/f(x_start, b_start)).
pub(crate) fn direct_terms(op: &Operand, sys: &NodeSystem, start: usize, m: usize) -> Result<Vec<DdC>> {
    let pair = sys.pair();
    if m == 0 {
        let b0 = sys.node_dd(start)?;
        let f0 = pair.f_dd(sys.param_dd(start)?, b0)?;
        if f0.abs_est() == 0.0 {
            return Err(FgError::ZeroDenominator {
                i: start,
                k: start,
                what: format!("f(x_{start}, b_{start}) vanishes in the order-0 convention"),
            });
        }
        return Ok(vec![op.eval_dd(b0)? / f0]);
    }
    let nodes: Vec<DdC> = (0..=m)
        .map(|j| sys.node_dd(start + j))
        .collect::<Result<_>>()?;
    let params: Vec<DdC> = (1..m)
        .map(|i| sys.param_dd(start + i))
        .collect::<Result<_>>()?;
    let mut terms = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let bk = nodes[k];
        let mut num = op.eval_dd(bk)?;
        for x in &params {
            num = num * pair.f_dd(*x, bk)?;
        }
        let mut den = DdC::ONE;
        for i in 0..=m {
            if i == k {
                continue;
            }
            let gv = pair.g_dd(nodes[i], bk)?;
            if gv.abs_est() == 0.0 {
                return Err(FgError::ZeroDenominator {
                    i: start + i,
                    k: start + k,
                    what: format!("g(b_{}, b_{}) vanishes", start + i, start + k),
                });
            }
            den = den * gv;
        }
        terms.push(num / den);
    }
    Ok(terms)
}

/// Full difference table T[m][j] = order-m difference over b_j..b_{j+m}
/// with the unshifted parameter list, for 0 <= m <= n, 0 <= j <= n-m.
/// T[m][0] is the order-m difference over the leading window.
pub(crate) fn w_table(op: &Operand, sys: &NodeSystem, n: usize) -> Result<Vec<Vec<DdC>>> {
    sys.check_distinct(n)?;
    let pair = sys.pair();
    let nodes: Vec<DdC> = (0..=n).map(|j| sys.node_dd(j)).collect::<Result<_>>()?;
    let x0 = sys.param_dd(0)?;
    let mut row = Vec::with_capacity(n + 1);
    for (j, b) in nodes.iter().enumerate() {
        let f0 = pair.f_dd(x0, *b)?;
        if f0.abs_est() == 0.0 {
            return Err(FgError::ZeroDenominator {
                i: 0,
                k: j,
                what: format!("f(x_0, b_{j}) vanishes in the order-0 row"),
            });
        }
        row.push(op.eval_dd(*b)? / f0);
    }
    let mut table = vec![row];
    for m in 0..n {
        let xm = sys.param_dd(m)?;
        let prev = &table[m];
        let mut next = Vec::with_capacity(n - m);
        for j in 0..(n - m) {
            let b_lo = nodes[j];
            let b_hi = nodes[j + m + 1];
            let g_hl = pair.g_dd(b_hi, b_lo)?;
            let g_lh = pair.g_dd(b_lo, b_hi)?;
            if g_hl.abs_est() == 0.0 || g_lh.abs_est() == 0.0 {
                return Err(FgError::ZeroDenominator {
                    i: j + m + 1,
                    k: j,
                    what: format!("g(b_{}, b_{}) vanishes in the recursion", j + m + 1, j),
                });
            }
            let t = pair.f_dd(xm, b_lo)? / g_hl * prev[j] + pair.f_dd(xm, b_hi)? / g_lh * prev[j + 1];
            next.push(t);
        }
        table.push(next);
    }
    Ok(table)
}

/// The order-n (f,g)-difference of F by its defining sum.
pub fn fg_difference(op: &Operand, sys: &NodeSystem, n: usize) -> Result<DifferenceResult> {
    sys.check_distinct(n)?;
    let terms = direct_terms(op, sys, 0, n)?;
    let value = sum_terms(&terms);
    Ok(DifferenceResult {
        value: value.to_c64(),
        order: n,
        method: DiffMethod::Direct,
        condition_estimate: condition_of(&terms, value),
    })
}

/// The order-n (f,g)-difference of F by the two-window recursion. The value
/// agrees with [`fg_difference`] to roundoff; the condition estimate is
/// computed from the defining sum in both cases.
pub fn fg_difference_recursive(op: &Operand, sys: &NodeSystem, n: usize) -> Result<DifferenceResult> {
    let table = w_table(op, sys, n)?;
    let value = table[n][0];
    let terms = direct_terms(op, sys, 0, n)?;
    Ok(DifferenceResult {
        value: value.to_c64(),
        order: n,
        method: DiffMethod::Recursive,
        condition_estimate: condition_of(&terms, value),
    })
}

/// The order-n difference of the pointwise product F·H by the Leibniz rule:
/// sum over k of f(x_k, b_k) times the order-k difference of H on the
/// leading window b_0..b_k times the order-(n-k) difference of F on the
/// trailing window b_k..b_n (shifted parameters).
pub fn fg_leibniz(
    f_factor: &Operand,
    h_factor: &Operand,
    sys: &NodeSystem,
    n: usize,
) -> Result<DifferenceResult> {
    sys.check_distinct(n)?;
    let pair = sys.pair();
    let h_table = w_table(h_factor, sys, n)?;
    let mut terms = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let suffix = sum_terms(&direct_terms(f_factor, sys, k, n - k)?);
        let fk = pair.f_dd(sys.param_dd(k)?, sys.node_dd(k)?)?;
        terms.push(fk * h_table[k][0] * suffix);
    }
    let value = sum_terms(&terms);
    Ok(DifferenceResult {
        value: value.to_c64(),
        order: n,
        method: DiffMethod::Leibniz,
        condition_estimate: condition_of(&terms, value),
    })
}

/// Classical divided difference F[nodes]. Related to the operator by
/// D^(n) with the pair (1, x-y) = (-1)^n F[nodes].
pub fn divided_difference(op: &Operand, nodes: &[Complex64]) -> Result<Complex64> {
    if nodes.is_empty() {
        return Err(FgError::Invalid(
            "divided difference needs at least one node".to_string(),
        ));
    }
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let sep = (nodes[i] - nodes[j]).norm();
            if sep <= 1e-12 * 1f64.max(nodes[i].norm()).max(nodes[j].norm()) {
                return Err(FgError::CoincidentNodes {
                    i,
                    j,
                    separation: sep,
                });
            }
        }
    }
    let pts: Vec<DdC> = nodes.iter().map(|z| DdC::from_c64(*z)).collect();
    let mut col: Vec<DdC> = pts
        .iter()
        .map(|z| op.eval_dd(*z))
        .collect::<Result<_>>()?;
    for level in 1..pts.len() {
        for i in 0..(pts.len() - level) {
            col[i] = (col[i + 1] - col[i]) / (pts[i + level] - pts[i]);
        }
    }
    Ok(col[0].to_c64())
}

#[derive(Debug, Clone, Serialize)]
pub struct BackwardDifferenceRow {
    pub h: f64,
    #[serde(with = "crate::ser::c64")]
    pub value: Complex64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BackwardDifferenceReport {
    pub order: usize,
    /// The comparison target F^(n)(x) / n!.
    #[serde(with = "crate::ser::c64")]
    pub target: Complex64,
    pub rows: Vec<BackwardDifferenceRow>,
    /// Least-squares slope of log(error) against log(h); `None` when the
    /// errors sit at roundoff (e.g. polynomial operands, where the divided
    /// difference is exact for every h).
    pub observed_order: Option<f64>,
}

/// Tabulate the n-th backward difference quotient of F at x — the divided
/// difference over the descending nodes x, x-h, ..., x-nh — against
/// F^(n)(x)/n! for each step size, and estimate the convergence order.
/// The caller supplies the true n-th derivative.
pub fn backward_difference_limit(
    op: &Operand,
    x: Complex64,
    n: usize,
    nth_derivative: Complex64,
    h_sequence: &[f64],
) -> Result<BackwardDifferenceReport> {
    let mut factorial = 1.0f64;
    for j in 2..=n {
        factorial *= j as f64;
    }
    let target = nth_derivative / factorial;
    let mut rows = Vec::with_capacity(h_sequence.len());
    for &h in h_sequence {
        if !(h > 0.0) {
            return Err(FgError::Invalid(format!(
                "step sizes must be positive, got {h}"
            )));
        }
        let nodes: Vec<Complex64> = (0..=n)
            .map(|k| x - Complex64::new(k as f64 * h, 0.0))
            .collect();
        let value = divided_difference(op, &nodes)?;
        rows.push(BackwardDifferenceRow {
            h,
            value,
            abs_error: (value - target).norm(),
        });
    }
    let floor = 1e-14 * (1.0 + target.norm());
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.abs_error > floor)
        .map(|r| (r.h.ln(), r.abs_error.ln()))
        .collect();
    let observed_order = if pts.len() < 2 {
        None
    } else {
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        Some((m * sxy - sx * sy) / (m * sxx - sx * sx))
    };
    Ok(BackwardDifferenceReport {
        order: n,
        target,
        rows,
        observed_order,
    })
}

/// The q-difference quotient (F(x) - F(qx)) / x.
pub fn qdiff(op: &Operand, q_value: Complex64, x: Complex64) -> Result<Complex64> {
    if x.norm() == 0.0 {
        return Err(FgError::Domain("q-difference pole at x = 0".to_string()));
    }
    let xd = DdC::from_c64(x);
    let qd = DdC::from_c64(q_value);
    let v = (op.eval_dd(xd)? - op.eval_dd(qd * xd)?) / xd;
    Ok(v.to_c64())
}

pub(crate) fn qdiff_n_dd(op: &Operand, q: DdC, x: DdC, n: usize) -> Result<DdC> {
    qdiff_n_fn(&|v| op.eval_dd(v), q, x, n)
}

/// Same explicit formula over a raw extended-precision evaluator, for
/// callers that wrap another operand on the fly.
pub(crate) fn qdiff_n_fn(
    f: &dyn Fn(DdC) -> Result<DdC>,
    q: DdC,
    x: DdC,
    n: usize,
) -> Result<DdC> {
    if n == 0 {
        return f(x);
    }
    if x.abs_est() == 0.0 {
        return Err(FgError::Domain("q-difference pole at x = 0".to_string()));
    }
    let mut sum = DdC::ZERO;
    let mut qk = DdC::ONE;
    for k in 0..=n {
        let e = (k as i64) * (k as i64 + 1) / 2 - (n as i64) * (k as i64);
        if e < 0 && q.abs_est() == 0.0 {
            return Err(FgError::Domain(
                "q-difference of order >= 2 needs q != 0".to_string(),
            ));
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let term = q.powi(e) * dd::qbin(n, k, q) * f(x * qk)? * sign;
        sum = sum + term;
        qk = qk * q;
    }
    Ok(sum / x.powu(n as u32))
}

/// The n-th q-derivative by the explicit single-sum formula
/// x^{-n} · sum_k (-1)^k q^{k(k+1)/2 - nk} [n k]_q F(x q^k).
pub fn qdiff_n(op: &Operand, q_value: Complex64, x: Complex64, n: usize) -> Result<Complex64> {
    Ok(qdiff_n_dd(op, DdC::from_c64(q_value), DdC::from_c64(x), n)?.to_c64())
}

/// The n-th q-derivative by literally iterating the first-order quotient n
/// times; a deliberately independent route used to cross-check the explicit
/// formula.
pub fn qdiff_iterated(
    op: &Operand,
    q_value: Complex64,
    x: Complex64,
    n: usize,
) -> Result<Complex64> {
    let q = DdC::from_c64(q_value);
    let x0 = DdC::from_c64(x);
    let mut col = Vec::with_capacity(n + 1);
    let mut pt = x0;
    for _ in 0..=n {
        col.push(op.eval_dd(pt)?);
        pt = pt * q;
    }
    for level in 0..n {
        for j in 0..(n - level) {
            let xj = x0 * q.powu(j as u32);
            if xj.abs_est() == 0.0 {
                return Err(FgError::Domain("q-difference pole at x = 0".to_string()));
            }
            col[j] = (col[j] - col[j + 1]) / xj;
        }
    }
    Ok(col[0].to_c64())
}

#[derive(Debug, Clone, Serialize)]
pub struct QdiffShiftedReport {
    /// The difference-operator side: pair (1, x-y) over the window
    /// x q^m, ..., x q^{n+m}.
    #[serde(with = "crate::ser::c64")]
    pub value: Complex64,
    /// The q-derivative side: (-1)^n/(q;q)_n · D_q^n{F} evaluated at x q^m
    /// (the window-shift power of q is absorbed by evaluating the
    /// derivative at the shifted point).
    #[serde(with = "crate::ser::c64")]
    pub q_derivative_side: Complex64,
    pub scaled_residual: f64,
    pub passes: bool,
}

/// Both sides of the shifted-window bridge between the difference operator
/// and the q-derivative; m = 0 is the unshifted bridge. `passes` asserts
/// agreement within 1e-10 relative to the larger side.
pub fn qdiff_shifted(
    op: &Operand,
    q_value: Complex64,
    x: Complex64,
    n: usize,
    m: usize,
) -> Result<QdiffShiftedReport> {
    if x.norm() == 0.0 {
        return Err(FgError::Domain("q-difference pole at x = 0".to_string()));
    }
    let q = DdC::from_c64(q_value);
    let base = DdC::from_c64(x) * q.powu(m as u32);
    // Difference-operator side with pair (1, x - y): parameters drop out.
    let window: Vec<DdC> = (0..=n).map(|j| base * q.powu(j as u32)).collect();
    let mut lhs = DdC::ZERO;
    for k in 0..=n {
        let mut den = DdC::ONE;
        for i in 0..=n {
            if i == k {
                continue;
            }
            let d = window[i] - window[k];
            if d.abs_est() == 0.0 {
                return Err(FgError::ZeroDenominator {
                    i: m + i,
                    k: m + k,
                    what: "coincident window points x q^i".to_string(),
                });
            }
            den = den * d;
        }
        lhs = lhs + op.eval_dd(window[k])? / den;
    }
    let qq_n = dd::qpoch(q, q, n);
    if qq_n.abs_est() == 0.0 {
        return Err(FgError::DivisionByZero(
            "(q;q)_n vanishes at this q".to_string(),
        ));
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let rhs = qdiff_n_dd(op, q, base, n)? / qq_n * sign;
    let lv = lhs.to_c64();
    let rv = rhs.to_c64();
    let scale = lv.norm().max(rv.norm()).max(1e-300);
    let scaled_residual = (lv - rv).norm() / scale;
    Ok(QdiffShiftedReport {
        value: lv,
        q_derivative_side: rv,
        scaled_residual,
        passes: scaled_residual <= 1e-10,
    })
}

/// The n-th q-derivative of the pointwise product F·H by the q-Leibniz
/// rule, in the evaluated form sum_k [n k]_q D_q^k{F}(x) · D_q^{n-k}{H}(x q^k)
/// (the textbook prefactor q^{(k-n)k} cancels against the chain-rule power
/// produced by differentiating the dilated composite, so it does not appear
/// once both factors are written as plain derivatives at shifted points).
pub fn qdiff_leibniz(
    f_factor: &Operand,
    h_factor: &Operand,
    q_value: Complex64,
    x: Complex64,
    n: usize,
) -> Result<Complex64> {
    if x.norm() == 0.0 {
        return Err(FgError::Domain("q-difference pole at x = 0".to_string()));
    }
    let q = DdC::from_c64(q_value);
    let xd = DdC::from_c64(x);
    let mut sum = DdC::ZERO;
    let mut qk = DdC::ONE;
    for k in 0..=n {
        let df = qdiff_n_dd(f_factor, q, xd, k)?;
        let dh = qdiff_n_dd(h_factor, q, xd * qk, n - k)?;
        sum = sum + dd::qbin(n, k, q) * df * dh;
        qk = qk * q;
    }
    Ok(sum.to_c64())
}
