//! Foundational q-arithmetic: shifted factorials, Gaussian binomials, the
//! theta product, basic and bilateral hypergeometric series with explicit
//! truncation and convergence control.

use crate::error::{FgError, Result};
use num_complex::Complex64;
use serde::Serialize;

/// Near-unity threshold used to detect lattice hits such as a terminating
/// upper parameter a = q^{-N} or an exactly vanishing bilateral factor.
const LATTICE_EPS: f64 = 1e-9;

/// A fixed base q with |q| < 1 plus the truncation policy every series and
/// infinite product under this base obeys.
#[derive(Clone, Copy, Debug)]
pub struct QBase {
    q: Complex64,
    truncation_eps: f64,
    max_terms: usize,
}

impl QBase {
    pub const DEFAULT_TRUNCATION_EPS: f64 = 1e-14;
    pub const DEFAULT_MAX_TERMS: usize = 10_000;

    /// Base with the default truncation policy. Fails unless |q| < 1.
    pub fn new(q: Complex64) -> Result<QBase> {
        Self::with_policy(q, Self::DEFAULT_TRUNCATION_EPS, Self::DEFAULT_MAX_TERMS)
    }

    /// Convenience constructor for a real base.
    pub fn real(q: f64) -> Result<QBase> {
        Self::new(Complex64::new(q, 0.0))
    }

    pub fn with_policy(q: Complex64, truncation_eps: f64, max_terms: usize) -> Result<QBase> {
        if !(q.norm() < 1.0) {
            return Err(FgError::Invalid(format!(
                "base must satisfy |q| < 1, got |q| = {}",
                q.norm()
            )));
        }
        if !(truncation_eps > 0.0) {
            return Err(FgError::Invalid(
                "truncation_eps must be positive".to_string(),
            ));
        }
        if max_terms == 0 {
            return Err(FgError::Invalid("max_terms must be at least 1".to_string()));
        }
        Ok(QBase {
            q,
            truncation_eps,
            max_terms,
        })
    }

    /// Same base with a different term cap (used for environment overrides).
    pub fn with_max_terms(self, max_terms: usize) -> Result<QBase> {
        Self::with_policy(self.q, self.truncation_eps, max_terms)
    }

    pub fn q(&self) -> Complex64 {
        self.q
    }

    pub fn truncation_eps(&self) -> f64 {
        self.truncation_eps
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }
}

/// Value of a truncated series/product together with its numeric provenance.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeriesValue {
    #[serde(with = "crate::ser::c64")]
    pub value: Complex64,
    pub terms_used: usize,
    pub tail_bound: f64,
    pub converged: bool,
}

/// q-shifted factorial (a;q)_n for any integer n.
///
/// For n >= 0 this is the finite product prod_{k=0}^{n-1}(1 - a q^k); for
/// n < 0 it is 1 / prod_{k=1}^{-n}(1 - a q^{-k}), the finite reciprocal
/// product (evaluated directly, not as a ratio of infinite products, so the
/// only failure mode is an exactly vanishing factor).
pub fn qpoch(a: Complex64, base: &QBase, n: i64) -> Result<Complex64> {
    let q = base.q();
    if n >= 0 {
        let mut p = Complex64::new(1.0, 0.0);
        let mut aq = a;
        for _ in 0..n {
            p *= Complex64::new(1.0, 0.0) - aq;
            aq *= q;
        }
        Ok(p)
    } else {
        if q.norm() == 0.0 {
            return Err(FgError::DivisionByZero(
                "negative-order shifted factorial needs q != 0".to_string(),
            ));
        }
        let mut p = Complex64::new(1.0, 0.0);
        let mut aq = a;
        for k in 1..=(-n) {
            aq /= q;
            let factor = Complex64::new(1.0, 0.0) - aq;
            if factor.norm() == 0.0 {
                return Err(FgError::DivisionByZero(format!(
                    "(a;q)_n with n = {n}: factor 1 - a q^-{k} vanishes (a = {a})"
                )));
            }
            p *= factor;
        }
        Ok(p.finv())
    }
}

/// Infinite product (a;q)_infty truncated under the base's policy.
pub fn qpoch_inf(a: Complex64, base: &QBase) -> Result<SeriesValue> {
    let q = base.q();
    let eps = base.truncation_eps();
    let qn = q.norm();
    let mut p = Complex64::new(1.0, 0.0);
    let mut aq = a;
    let mut terms = 0usize;
    loop {
        // Remaining factors perturb the product by at most ~sum |a q^j|,
        // a geometric tail starting at the current cursor.
        let tail = if qn < 1.0 {
            aq.norm() / (1.0 - qn)
        } else {
            f64::INFINITY
        };
        if aq.norm() < eps && tail < eps {
            return Ok(SeriesValue {
                value: p,
                terms_used: terms,
                tail_bound: tail,
                converged: true,
            });
        }
        if terms >= base.max_terms() {
            return Err(FgError::MaxTermsExceeded(base.max_terms()));
        }
        p *= Complex64::new(1.0, 0.0) - aq;
        aq *= q;
        terms += 1;
    }
}

/// Gaussian binomial coefficient [n choose k]_q via telescoping ratios
/// prod_{i=1}^{k} (1 - q^{n-k+i})/(1 - q^i).
pub fn qbinom(n: i64, k: i64, q_value: Complex64) -> Result<Complex64> {
    if k < 0 || k > n {
        return Err(FgError::OutOfRange(format!(
            "q-binomial needs 0 <= k <= n, got n = {n}, k = {k}"
        )));
    }
    let k = k.min(n - k);
    let mut num_pow = q_value.powi((n - k) as i32);
    let mut den_pow = q_value;
    let one = Complex64::new(1.0, 0.0);
    let mut acc = one;
    for i in 1..=k {
        num_pow *= q_value;
        let den = one - den_pow;
        if den.norm() == 0.0 {
            return Err(FgError::DivisionByZero(format!(
                "q-binomial factor 1 - q^{i} vanishes"
            )));
        }
        acc *= (one - num_pow) / den;
        den_pow *= q_value;
    }
    Ok(acc)
}

/// theta(x) = (x;q)_infty (q/x;q)_infty. Vanishes exactly on x = q^m, m in Z.
pub fn theta(x: Complex64, base: &QBase) -> Result<Complex64> {
    if x.norm() == 0.0 {
        return Err(FgError::Domain(
            "theta is undefined at x = 0 (q/x pole)".to_string(),
        ));
    }
    let left = qpoch_inf(x, base)?;
    let right = qpoch_inf(base.q() / x, base)?;
    Ok(left.value * right.value)
}

/// Smallest N >= 0 with a q^N within LATTICE_EPS of 1, i.e. a ~ q^{-N}.
/// Since |q| < 1 the search stops as soon as |a q^N| < 1/2.
fn lattice_index(a: Complex64, q: Complex64, cap: usize) -> Option<usize> {
    let mut cursor = a;
    for n in 0..=cap {
        if (cursor - Complex64::new(1.0, 0.0)).norm() <= LATTICE_EPS {
            return Some(n);
        }
        if cursor.norm() < 0.5 {
            return None;
        }
        cursor *= q;
    }
    None
}

/// Basic hypergeometric series r+1-style sum
/// sum_n (a_1..a_r;q)_n / ((q;q)_n (b_1..b_s;q)_n) [(-1)^n q^C(n,2)]^{1+s-r} z^n.
///
/// Terminates after exactly N+1 terms when some upper parameter is q^{-N};
/// otherwise runs until the increment and a geometric tail bound both fall
/// below the base's truncation threshold.
pub fn phi(
    upper: &[Complex64],
    lower: &[Complex64],
    base: &QBase,
    z: Complex64,
) -> Result<SeriesValue> {
    let q = base.q();
    let eps = base.truncation_eps();
    let exponent = 1 + lower.len() as i32 - upper.len() as i32;
    let one = Complex64::new(1.0, 0.0);

    let terminate_at = upper
        .iter()
        .filter_map(|&a| lattice_index(a, q, base.max_terms()))
        .min();
    if let Some(m) = lower
        .iter()
        .filter_map(|&b| lattice_index(b, q, base.max_terms()))
        .min()
    {
        if terminate_at.map_or(true, |n| n > m) {
            return Err(FgError::PoleInLowerParams(format!(
                "a lower parameter equals q^-{m} and the series does not terminate first"
            )));
        }
    }

    let mut sum = Complex64::new(0.0, 0.0);
    let mut term = one;
    let mut qn = one; // q^n cursor
    let mut growth_run = 0usize;
    let mut n = 0usize;
    loop {
        sum += term;
        n += 1;
        if let Some(stop) = terminate_at {
            if n == stop + 1 {
                return Ok(SeriesValue {
                    value: sum,
                    terms_used: n,
                    tail_bound: 0.0,
                    converged: true,
                });
            }
        }
        if n >= base.max_terms() {
            return Err(FgError::MaxTermsExceeded(base.max_terms()));
        }

        let mut ratio = z;
        for &a in upper {
            ratio *= one - a * qn;
        }
        for &b in lower {
            let den = one - b * qn;
            if den.norm() == 0.0 {
                return Err(FgError::PoleInLowerParams(format!(
                    "lower-parameter factor vanished at term {n}"
                )));
            }
            ratio /= den;
        }
        let den = one - q * qn;
        if den.norm() == 0.0 {
            return Err(FgError::DivisionByZero(format!(
                "(q;q)_n factor vanished at term {n}"
            )));
        }
        ratio /= den;
        if exponent != 0 {
            ratio *= (-qn).powi(exponent);
        }

        let prev_mag = term.norm();
        term *= ratio;
        let rho = ratio.norm();

        if terminate_at.is_none() {
            if prev_mag > 0.0 && rho >= 1.0 && n >= 10 {
                growth_run += 1;
                if growth_run >= 25 {
                    return Err(FgError::Divergent(format!(
                        "term ratio stayed >= 1 for {growth_run} consecutive terms"
                    )));
                }
            } else {
                growth_run = 0;
            }
            let tail = if rho < 1.0 {
                term.norm() / (1.0 - rho)
            } else {
                f64::INFINITY
            };
            if term.norm() < eps && tail < eps {
                return Ok(SeriesValue {
                    value: sum,
                    terms_used: n,
                    tail_bound: tail,
                    converged: true,
                });
            }
        }
        qn *= q;
    }
}

/// Bilateral basic hypergeometric sum over n in [-window, window]:
/// sum_n (a_1..a_r;q)_n / (b_1..b_s;q)_n [(-1)^n q^C(n,2)]^{s-r} z^n,
/// with the negative-index shifted factorials under the reciprocal-product
/// convention (an exactly vanishing downward factor zeroes the entire lower
/// tail, which the sum short-circuits).
///
/// The window is the caller's choice: window = 0 returns the bare n = 0 term
/// with tail diagnostics; a positive window whose tails miss the truncation
/// threshold is an error (`WindowTooSmall`, or `Divergent` when the tail
/// terms grow).
pub fn psi_bilateral(
    upper: &[Complex64],
    lower: &[Complex64],
    base: &QBase,
    z: Complex64,
    window: usize,
) -> Result<SeriesValue> {
    let q = base.q();
    let eps = base.truncation_eps();
    let one = Complex64::new(1.0, 0.0);
    if z.norm() == 0.0 {
        return Err(FgError::Domain(
            "bilateral series needs z != 0 (negative powers of z)".to_string(),
        ));
    }
    if q.norm() == 0.0 {
        return Err(FgError::Domain(
            "bilateral series needs q != 0 (negative powers of q)".to_string(),
        ));
    }
    let exponent = lower.len() as i32 - upper.len() as i32;

    // Upward pass: t_{n+1} = t_n * prod(1 - a q^n)/prod(1 - b q^n) * z * (-q^n)^e.
    let mut up_sum = Complex64::new(0.0, 0.0);
    let mut term = one;
    let mut qn = one;
    let mut up_terms = 0usize;
    let mut up_tail;
    let mut up_grows;
    loop {
        up_sum += term;
        up_terms += 1;
        let mut ratio = z;
        for &a in upper {
            ratio *= one - a * qn;
        }
        for &b in lower {
            let den = one - b * qn;
            if den.norm() == 0.0 {
                return Err(FgError::PoleInLowerParams(format!(
                    "bilateral upward factor vanished at n = {}",
                    up_terms - 1
                )));
            }
            ratio /= den;
        }
        if exponent != 0 {
            ratio *= (-qn).powi(exponent);
        }
        term *= ratio;
        let rho = ratio.norm();
        up_grows = rho >= 1.0;
        up_tail = if rho < 1.0 {
            term.norm() / (1.0 - rho)
        } else {
            term.norm()
        };
        if up_terms > window {
            break;
        }
        qn *= q;
    }

    // Downward pass: t_{n-1} = t_n * prod(1 - b q^{n-1})/prod(1 - a q^{n-1})
    //                          * z^{-1} * (-q^{n-1})^{-e}.
    let mut down_sum = Complex64::new(0.0, 0.0);
    let mut term = one; // t_0, re-derived; only ratios from it are added
    let mut qc = one; // q^{n-1} cursor starting at n = 0 -> q^{-1}
    let mut down_terms = 0usize;
    let mut down_tail = 0.0f64;
    let mut down_grows = false;
    while down_terms < window + 1 {
        qc /= q;
        let mut ratio = z.finv();
        let mut vanished = false;
        for &b in lower {
            let factor = one - b * qc;
            if factor.norm() <= LATTICE_EPS {
                vanished = true;
            }
            ratio *= factor;
        }
        for &a in upper {
            let den = one - a * qc;
            if den.norm() == 0.0 {
                return Err(FgError::PoleInLowerParams(format!(
                    "bilateral downward factor vanished at n = -{}",
                    down_terms + 1
                )));
            }
            ratio /= den;
        }
        if exponent != 0 {
            ratio *= (-qc).powi(-exponent);
        }
        term *= ratio;
        if vanished {
            // All terms from here down are exactly zero by the reciprocal
            // convention: 1/(q^{N+1};q)_n = 0 once the vanishing factor enters.
            down_tail = 0.0;
            down_grows = false;
            break;
        }
        down_terms += 1;
        if down_terms <= window {
            down_sum += term;
        } else {
            let rho = ratio.norm();
            down_grows = rho >= 1.0;
            down_tail = if rho < 1.0 {
                term.norm() / (1.0 - rho)
            } else {
                term.norm()
            };
        }
    }
    let value = up_sum + down_sum;
    let tail_bound = up_tail + down_tail;
    let converged = tail_bound <= eps;
    let sv = SeriesValue {
        value,
        terms_used: up_terms + down_terms,
        tail_bound,
        converged,
    };
    if converged || window == 0 {
        return Ok(sv);
    }
    if up_grows || down_grows {
        return Err(FgError::Divergent(
            "bilateral tail terms grow at the window edge".to_string(),
        ));
    }
    Err(FgError::WindowTooSmall {
        window,
        tail: tail_bound,
    })
}

/// Product over an integer index range under the over-Z convention:
/// A_k..A_m for m >= k, the empty product 1 for m = k-1, and the reciprocal
/// 1/(A_{m+1}..A_{k-1}) for m <= k-2.
pub fn product_over_z(factor: &dyn Fn(i64) -> Complex64, k: i64, m: i64) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    if m >= k {
        let mut p = one;
        for j in k..=m {
            p *= factor(j);
        }
        Ok(p)
    } else if m == k - 1 {
        Ok(one)
    } else {
        let mut p = one;
        for j in (m + 1)..=(k - 1) {
            p *= factor(j);
        }
        if p.norm() == 0.0 {
            return Err(FgError::DivisionByZero(
                "reciprocal branch of the over-Z product hit a zero factor".to_string(),
            ));
        }
        Ok(p.finv())
    }
}
