//! Extended-precision accumulation for catastrophically cancelling sums.
//!
//! Several alternating sums in this crate cancel by factors up to ~1e26 while
//! callers still need ~1e-10 agreement in the result; plain f64 carries only
//! ~16 digits, so those paths accumulate in an unevaluated double-double
//! representation (~31 digits). The error-free transforms are the classical
//! Dekker/Knuth ones; `f64::mul_add` supplies the exact product residual
//! whether it compiles to a hardware FMA or the libm soft implementation.
//!
//! This module is internal: public APIs take and return `Complex64`, and the
//! extended precision exists only between the inputs and the rounded result.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Exact sum: returns (fl(a+b), roundoff).
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Exact sum assuming |a| >= |b|.
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// Exact product: returns (fl(a*b), roundoff).
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Real double-double value hi + lo with |lo| <= ulp(hi)/2.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Round to nearest f64.
    #[inline]
    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, rhs: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: f64) -> Dd {
        let (p, e) = two_prod(self.hi, rhs);
        let e = e + self.lo * rhs;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * q1;
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * q2;
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

/// Complex double-double value.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct DdC {
    pub re: Dd,
    pub im: Dd,
}

impl DdC {
    pub const ZERO: DdC = DdC {
        re: Dd::ZERO,
        im: Dd::ZERO,
    };
    pub const ONE: DdC = DdC {
        re: Dd::ONE,
        im: Dd::ZERO,
    };

    #[inline]
    pub fn from_c64(z: Complex64) -> DdC {
        DdC {
            re: Dd::from_f64(z.re),
            im: Dd::from_f64(z.im),
        }
    }

    #[inline]
    pub fn from_f64(x: f64) -> DdC {
        DdC {
            re: Dd::from_f64(x),
            im: Dd::ZERO,
        }
    }

    #[inline]
    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }

    /// Magnitude estimate; f64 precision suffices for thresholds/diagnostics.
    #[inline]
    pub fn abs_est(self) -> f64 {
        self.to_c64().norm()
    }

    #[inline]
    pub fn conj(self) -> DdC {
        DdC {
            re: self.re,
            im: -self.im,
        }
    }

    /// Integer power by square-and-multiply (n >= 0).
    pub fn powu(self, n: u32) -> DdC {
        let mut base = self;
        let mut n = n;
        let mut acc = DdC::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    /// Integer power, negative exponents via one final division.
    pub fn powi(self, n: i64) -> DdC {
        if n >= 0 {
            self.powu(n as u32)
        } else {
            DdC::ONE / self.powu((-n) as u32)
        }
    }
}

impl Add for DdC {
    type Output = DdC;
    #[inline]
    fn add(self, rhs: DdC) -> DdC {
        DdC {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

impl Sub for DdC {
    type Output = DdC;
    #[inline]
    fn sub(self, rhs: DdC) -> DdC {
        DdC {
            re: self.re - rhs.re,
            im: self.im - rhs.im,
        }
    }
}

impl Neg for DdC {
    type Output = DdC;
    #[inline]
    fn neg(self) -> DdC {
        DdC {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Mul for DdC {
    type Output = DdC;
    #[inline]
    fn mul(self, rhs: DdC) -> DdC {
        DdC {
            re: self.re * rhs.re - self.im * rhs.im,
            im: self.re * rhs.im + self.im * rhs.re,
        }
    }
}

impl Mul<f64> for DdC {
    type Output = DdC;
    #[inline]
    fn mul(self, rhs: f64) -> DdC {
        DdC {
            re: self.re * rhs,
            im: self.im * rhs,
        }
    }
}

impl Div for DdC {
    type Output = DdC;
    #[inline]
    fn div(self, rhs: DdC) -> DdC {
        let num = self * rhs.conj();
        let den = rhs.re * rhs.re + rhs.im * rhs.im;
        DdC {
            re: num.re / den,
            im: num.im / den,
        }
    }
}

/// Finite shifted factorial (a;q)_n = prod_{k=0}^{n-1} (1 - a q^k), n >= 0.
pub(crate) fn qpoch(a: DdC, q: DdC, n: usize) -> DdC {
    let mut p = DdC::ONE;
    let mut aq = a;
    for _ in 0..n {
        p = p * (DdC::ONE - aq);
        aq = aq * q;
    }
    p
}

/// Shifted factorial (a;q)_n for any integer n; negative orders use the
/// finite reciprocal product, whose only failure mode is a vanishing factor.
pub(crate) fn qpoch_int(a: DdC, q: DdC, n: i64) -> crate::error::Result<DdC> {
    use crate::error::FgError;
    if n >= 0 {
        return Ok(qpoch(a, q, n as usize));
    }
    if q.abs_est() == 0.0 {
        return Err(FgError::DivisionByZero(
            "negative-order shifted factorial needs q != 0".to_string(),
        ));
    }
    let mut den = DdC::ONE;
    let mut aq = a;
    for _ in 0..(-n) {
        aq = aq / q;
        let factor = DdC::ONE - aq;
        if factor.abs_est() == 0.0 {
            return Err(FgError::DivisionByZero(
                "pole in negative-order shifted factorial".to_string(),
            ));
        }
        den = den * factor;
    }
    Ok(DdC::ONE / den)
}

/// Infinite product (a;q)_inf, truncated once the remaining factors sit
/// below the extended-precision roundoff floor. Requires |q| < 1.
pub(crate) fn qpoch_inf(a: DdC, q: DdC) -> crate::error::Result<DdC> {
    use crate::error::FgError;
    if !(q.abs_est() < 1.0) {
        return Err(FgError::Invalid(format!(
            "infinite shifted factorial needs |q| < 1, got |q| = {}",
            q.abs_est()
        )));
    }
    let mut p = DdC::ONE;
    let mut aq = a;
    for _ in 0..100_000 {
        if aq.abs_est() < 1e-35 {
            return Ok(p);
        }
        p = p * (DdC::ONE - aq);
        aq = aq * q;
    }
    Err(FgError::MaxTermsExceeded(100_000))
}

/// Gaussian binomial coefficient by telescoping ratios:
/// prod_{i=1}^{k} (1 - q^{n-k+i}) / (1 - q^i).
pub(crate) fn qbin(n: usize, k: usize, q: DdC) -> DdC {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    let mut num_pow = q.powu((n - k) as u32);
    let mut den_pow = q;
    let mut acc = DdC::ONE;
    for _ in 1..=k {
        num_pow = num_pow * q;
        acc = acc * ((DdC::ONE - num_pow) / (DdC::ONE - den_pow));
        den_pow = den_pow * q;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_keeps_cancelled_tail() {
        let big = Dd::from_f64(1e16);
        let one = Dd::ONE;
        let s = big + one - big;
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn mul_div_roundtrip_beyond_f64() {
        let third = Dd::ONE / Dd::from_f64(3.0);
        let back = third * 3.0;
        assert!((back - Dd::ONE).value().abs() < 1e-30);
    }

    #[test]
    fn complex_div_identity() {
        let z = DdC {
            re: Dd::from_f64(0.3),
            im: Dd::from_f64(-0.7),
        };
        let w = z / z;
        assert!((w - DdC::ONE).abs_est() < 1e-30);
    }

    #[test]
    fn powi_matches_repeated_multiplication() {
        let q = DdC::from_f64(0.5);
        let mut p = DdC::ONE;
        for _ in 0..11 {
            p = p * q;
        }
        assert!((q.powi(11) - p).abs_est() < 1e-33);
        let inv = q.powi(-3);
        assert!((inv - DdC::from_f64(8.0)).abs_est() < 1e-30);
    }

    #[test]
    fn qpoch_small_exact() {
        // (q;q)_3 at q = 1/2: (1/2)(3/4)(7/8) = 21/64.
        let q = DdC::from_f64(0.5);
        let v = qpoch(q, q, 3);
        assert!((v - DdC::from_f64(21.0 / 64.0)).abs_est() < 1e-31);
    }

    #[test]
    fn qbin_matches_polynomial_expansion() {
        // [4 2]_q = 1 + q + 2q^2 + q^3 + q^4 = 35/16 at q = 1/2.
        let v = qbin(4, 2, DdC::from_f64(0.5));
        assert!((v - DdC::from_f64(35.0 / 16.0)).abs_est() < 1e-30);
    }
}
