//! Function operands accepted by the difference operators.
//!
//! An [`Operand`] wraps a complex-valued function of one complex variable.
//! Plain closures evaluate in double precision; the built-in constructors
//! ([`Operand::inv1mcx`], [`Operand::power`], [`Operand::exp_truncated`],
//! [`Operand::constant`]) additionally carry an extended-precision evaluation
//! path that the operator sums use internally. The distinction matters
//! because the alternating operator sums cancel catastrophically as the
//! order grows: an operand evaluated only in double precision re-injects
//! roundoff of order `condition × 1e-16` into the result, while the built-in
//! operands keep the whole pipeline accurate. Tolerances that are stated
//! relative to a condition estimate are safe with plain closures; tight
//! absolute tolerances at high order need the built-in constructors.

use crate::dd::DdC;
use crate::error::{FgError, Result};
use num_complex::Complex64;

enum Inner {
    Plain(Box<dyn Fn(Complex64) -> Result<Complex64>>),
    Extended(Box<dyn Fn(DdC) -> Result<DdC>>),
}

pub struct Operand {
    inner: Inner,
}

impl Operand {
    /// Wrap a double-precision callback.
    pub fn new(f: impl Fn(Complex64) -> Result<Complex64> + 'static) -> Operand {
        Operand {
            inner: Inner::Plain(Box::new(f)),
        }
    }

    /// Wrap an extended-precision callback (internal constructor).
    pub(crate) fn extended(f: impl Fn(DdC) -> Result<DdC> + 'static) -> Operand {
        Operand {
            inner: Inner::Extended(Box::new(f)),
        }
    }

    /// The constant function x -> v.
    pub fn constant(v: Complex64) -> Operand {
        let vd = DdC::from_c64(v);
        Operand::extended(move |_| Ok(vd))
    }

    /// The constant function x -> 1.
    pub fn one() -> Operand {
        Operand::constant(Complex64::new(1.0, 0.0))
    }

    /// x -> 1/(1 - c x), with a domain error on the pole.
    pub fn inv1mcx(c: Complex64) -> Operand {
        let cd = DdC::from_c64(c);
        Operand::extended(move |x| {
            let den = DdC::ONE - cd * x;
            if den.abs_est() == 0.0 {
                return Err(FgError::Domain(format!(
                    "1/(1 - c x) pole at x = {}",
                    x.to_c64()
                )));
            }
            Ok(DdC::ONE / den)
        })
    }

    /// x -> x^r for integer r; negative r has a pole at x = 0.
    pub fn power(r: i64) -> Operand {
        Operand::extended(move |x| {
            if r < 0 && x.abs_est() == 0.0 {
                return Err(FgError::Domain(format!("x^{r} pole at x = 0")));
            }
            Ok(x.powi(r))
        })
    }

    /// The polynomial with the given coefficients in ascending-degree order,
    /// evaluated by Horner's rule.
    pub fn polynomial(coefficients: &[Complex64]) -> Operand {
        let coeffs: Vec<DdC> = coefficients.iter().map(|c| DdC::from_c64(*c)).collect();
        Operand::extended(move |x| {
            let mut v = DdC::ZERO;
            for c in coeffs.iter().rev() {
                v = v * x + *c;
            }
            Ok(v)
        })
    }

    /// x -> sum_{j=0}^{terms} x^j / j!, the truncated exponential series.
    pub fn exp_truncated(terms: usize) -> Operand {
        Operand::extended(move |x| {
            let mut sum = DdC::ONE;
            let mut term = DdC::ONE;
            for j in 1..=terms {
                term = term * x / DdC::from_f64(j as f64);
                sum = sum + term;
            }
            Ok(sum)
        })
    }

    /// x -> sin(pi x), exactly zero at exactly-integer real arguments.
    ///
    /// Computed as (-1)^n sin(pi (x - n)) with n the nearest integer to
    /// Re(x), which keeps the values accurate near every integer (the naive
    /// sin(pi*x) loses all relative accuracy there) and returns a true zero
    /// when x is an integer.
    pub fn sinpi() -> Operand {
        Operand::new(|x| {
            let n = x.re.round();
            let frac = Complex64::new(x.re - n, x.im);
            let s = (frac * std::f64::consts::PI).sin();
            let sign = if (n as i64) % 2 == 0 { 1.0 } else { -1.0 };
            Ok(sign * s)
        })
    }

    /// Evaluate at a double-precision point.
    pub fn eval(&self, x: Complex64) -> Result<Complex64> {
        match &self.inner {
            Inner::Plain(f) => f(x),
            Inner::Extended(f) => Ok(f(DdC::from_c64(x))?.to_c64()),
        }
    }

    pub(crate) fn eval_dd(&self, x: DdC) -> Result<DdC> {
        match &self.inner {
            Inner::Plain(f) => Ok(DdC::from_c64(f(x.to_c64())?)),
            Inner::Extended(f) => f(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inv1mcx_matches_direct_quotient() {
        let op = Operand::inv1mcx(c(0.3, 0.0));
        let x = c(0.7, 0.2);
        let want = Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - c(0.3, 0.0) * x);
        assert!((op.eval(x).unwrap() - want).norm() < 1e-15);
        let pole = Operand::inv1mcx(c(2.0, 0.0));
        assert!(matches!(pole.eval(c(0.5, 0.0)), Err(FgError::Domain(_))));
    }

    #[test]
    fn power_handles_negative_exponents() {
        let op = Operand::power(-2);
        assert!((op.eval(c(2.0, 0.0)).unwrap() - c(0.25, 0.0)).norm() < 1e-16);
        assert!(matches!(op.eval(c(0.0, 0.0)), Err(FgError::Domain(_))));
        let cube = Operand::power(3);
        assert!((cube.eval(c(-1.5, 0.0)).unwrap() - c(-3.375, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn exp_truncated_matches_exp_for_long_truncation() {
        let op = Operand::exp_truncated(30);
        let x = c(0.8, -0.3);
        assert!((op.eval(x).unwrap() - x.exp()).norm() < 1e-15);
    }

    #[test]
    fn sinpi_zero_at_integers_and_accurate_elsewhere() {
        let op = Operand::sinpi();
        for n in [-3.0f64, 0.0, 1.0, 7.0, 12.0] {
            assert_eq!(op.eval(c(n, 0.0)).unwrap(), c(0.0, 0.0));
        }
        let v = op.eval(c(0.5, 0.0)).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-15);
        let w = op.eval(c(2.25, 0.0)).unwrap();
        assert!((w - c(0.5f64.sqrt(), 0.0)).norm() < 1e-15);
    }
}
