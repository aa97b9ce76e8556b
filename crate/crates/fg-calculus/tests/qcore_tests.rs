//! q-arithmetic checks against independently computed 40-digit reference
//! values (frozen constants) and the module's own closed-form identities.

use fg_calculus::error::FgError;
use fg_calculus::qcore::{phi, product_over_z, psi_bilateral, qbinom, qpoch, qpoch_inf, theta};
use fg_calculus::QBase;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn qbase_rejects_modulus_one_and_bad_policy() {
    assert!(matches!(
        QBase::real(1.0),
        Err(FgError::Invalid(_))
    ));
    assert!(QBase::new(c(0.8, 0.7)).is_err()); // |q| > 1
    assert!(QBase::with_policy(c(0.5, 0.0), 0.0, 100).is_err());
    assert!(QBase::with_policy(c(0.5, 0.0), 1e-14, 0).is_err());
    assert!(QBase::real(0.0).is_ok()); // q = 0 is a legal degenerate base
}

#[test]
fn qpoch_finite_products() {
    let base = QBase::real(0.5).unwrap();
    // Empty product.
    assert_eq!(qpoch(c(123.0, -4.0), &base, 0).unwrap(), c(1.0, 0.0));
    // (q;q)_3 at q = 1/2 = 21/64.
    let v = qpoch(c(0.5, 0.0), &base, 3).unwrap();
    assert!((v - c(0.328125, 0.0)).norm() < 1e-16);
    // Reference: (0.3; 0.5)_{-3} = 8.928571428571428571429.
    let v = qpoch(c(0.3, 0.0), &base, -3).unwrap();
    assert!(rel(v, c(8.928571428571428571429, 0.0)) < 1e-14);
}

#[test]
fn qpoch_inf_reference_values() {
    let base = QBase::real(0.5).unwrap();
    // (q;q)_inf at q = 1/2 = 0.2887880950866024212789 (40-digit reference).
    let v = qpoch_inf(c(0.5, 0.0), &base).unwrap();
    assert!(v.converged);
    assert!(v.tail_bound <= base.truncation_eps());
    assert!(rel(v.value, c(0.2887880950866024212789, 0.0)) < 1e-13);
    // (0.3; 0.5)_inf = 0.5101178266339875718323.
    let v = qpoch_inf(c(0.3, 0.0), &base).unwrap();
    assert!(rel(v.value, c(0.5101178266339875718323, 0.0)) < 1e-13);
    // Complex argument: (0.3+0.1i; 0.5)_inf.
    let v = qpoch_inf(c(0.3, 0.1), &base).unwrap();
    assert!(
        rel(
            v.value,
            c(0.4999521029788976041909, -0.1294274012355580414422)
        ) < 1e-13
    );
    // (0; q)_inf = 1 with zero terms; (1; q)_inf = 0.
    let v = qpoch_inf(c(0.0, 0.0), &base).unwrap();
    assert_eq!(v.value, c(1.0, 0.0));
    assert_eq!(v.terms_used, 0);
    let v = qpoch_inf(c(1.0, 0.0), &base).unwrap();
    assert_eq!(v.value.norm(), 0.0);
}

#[test]
fn qpoch_inf_term_cap_errors() {
    let base = QBase::with_policy(c(0.99, 0.0), 1e-14, 50).unwrap();
    assert!(matches!(
        qpoch_inf(c(0.5, 0.0), &base),
        Err(FgError::MaxTermsExceeded(50))
    ));
}

#[test]
fn qbinom_values_and_range() {
    // [7 3] at q = 1/2 = 2.883544921875 (exact dyadic rational).
    let v = qbinom(7, 3, c(0.5, 0.0)).unwrap();
    assert!((v - c(2.883544921875, 0.0)).norm() < 1e-14);
    // [4 2] at q = 1/2 = 35/16.
    let v = qbinom(4, 2, c(0.5, 0.0)).unwrap();
    assert!((v - c(2.1875, 0.0)).norm() < 1e-14);
    // [n 0] = 1 for any n.
    assert_eq!(qbinom(9, 0, c(0.3, 0.2)).unwrap(), c(1.0, 0.0));
    assert!(matches!(
        qbinom(4, 5, c(0.5, 0.0)),
        Err(FgError::OutOfRange(_))
    ));
    assert!(matches!(
        qbinom(4, -1, c(0.5, 0.0)),
        Err(FgError::OutOfRange(_))
    ));
}

#[test]
fn theta_reference_value_and_lattice_zeros() {
    let base = QBase::real(0.4).unwrap();
    // theta(0.7; 0.4) = 0.05020643635695986279701 (40-digit reference).
    let v = theta(c(0.7, 0.0), &base).unwrap();
    assert!(rel(v, c(0.05020643635695986279701, 0.0)) < 1e-12);
    // Lattice zeros theta(q^m) = 0: exact at a dyadic base, within roundoff
    // of the product otherwise.
    let dyadic = QBase::real(0.25).unwrap();
    assert_eq!(theta(c(0.0625, 0.0), &dyadic).unwrap().norm(), 0.0);
    assert!(theta(c(0.16, 0.0), &base).unwrap().norm() < 1e-12);
    // x = 0 is a pole of the defining product.
    assert!(matches!(
        theta(c(0.0, 0.0), &base),
        Err(FgError::Domain(_))
    ));
}

#[test]
fn theta_symmetry_and_triple_product() {
    let base = QBase::real(0.4).unwrap();
    // theta(q/x) = theta(x).
    for &x in &[c(0.7, 0.0), c(0.3, 0.4), c(-0.9, 0.1), c(1.7, -0.2)] {
        let lhs = theta(base.q() / x, &base).unwrap();
        let rhs = theta(x, &base).unwrap();
        assert!(rel(lhs, rhs) < 1e-12, "x = {x}");
    }
    // Triple product: theta(x) (q;q)_inf = sum_{k in Z} (-1)^k q^C(k,2) x^k.
    let x = c(0.7, 0.0);
    let q = 0.4f64;
    let mut sum = c(0.0, 0.0);
    for k in -40i64..=40 {
        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let exp = (k * (k - 1) / 2) as f64;
        sum += c(sign, 0.0) * q.powf(exp) * x.powf(k as f64);
    }
    let lhs = theta(x, &base).unwrap() * qpoch_inf(c(q, 0.0), &base).unwrap().value;
    assert!(rel(lhs, sum) < 1e-10);
}

#[test]
fn phi_qbinomial_theorem_and_termination() {
    let base = QBase::real(0.5).unwrap();
    // 1phi0(a; -; q, z) = (az;q)_inf / (z;q)_inf.
    let a = c(0.7, 0.0);
    let z = c(0.25, 0.0);
    let lhs = phi(&[a], &[], &base, z).unwrap();
    assert!(lhs.converged);
    let rhs = qpoch_inf(a * z, &base).unwrap().value / qpoch_inf(z, &base).unwrap().value;
    assert!(rel(lhs.value, rhs) < 1e-10);

    // Terminating 2phi1(a, q^{-n}; c; q, q): exactly n+1 terms, equal to the
    // direct finite sum.
    let n = 5i64;
    let q = base.q();
    let a = c(0.3, 0.0);
    let cc = c(0.7, 0.0);
    let qneg = q.powi(-(n as i32));
    let sv = phi(&[a, qneg], &[cc], &base, q).unwrap();
    assert_eq!(sv.terms_used as i64, n + 1);
    assert_eq!(sv.tail_bound, 0.0);
    let mut direct = c(0.0, 0.0);
    let mut mag = 0.0f64;
    for k in 0..=n {
        let t = qpoch(a, &base, k).unwrap() * qpoch(qneg, &base, k).unwrap()
            / (qpoch(q, &base, k).unwrap() * qpoch(cc, &base, k).unwrap())
            * q.powi(k as i32);
        direct += t;
        mag += t.norm();
    }
    // The terminating sum cancels its ~1e4 terms down to ~1e-3, so the two
    // f64 evaluation orders agree to roundoff scaled by that cancellation.
    assert!((sv.value - direct).norm() <= 5e-12 * mag);
}

#[test]
fn phi_detects_lower_pole_and_divergence() {
    let base = QBase::real(0.5).unwrap();
    // Lower parameter q^{-2} poles at term 3 and nothing terminates first.
    let err = phi(&[c(0.3, 0.0)], &[c(4.0, 0.0)], &base, c(0.2, 0.0));
    assert!(matches!(err, Err(FgError::PoleInLowerParams(_))));
    // Upper terminating at N = 1 <= m = 2 makes the same lower parameter fine.
    let ok = phi(&[c(0.3, 0.0), c(2.0, 0.0)], &[c(4.0, 0.0)], &base, c(0.2, 0.0));
    assert!(ok.is_ok());
    assert_eq!(ok.unwrap().terms_used, 2);
    // |z| > 1 in a 1phi0 diverges (ratio -> z).
    let err = phi(&[c(0.3, 0.0)], &[], &base, c(1.5, 0.0));
    assert!(matches!(err, Err(FgError::Divergent(_))));
}

#[test]
fn ramanujan_bilateral_sum_matches_product_form() {
    let base = QBase::real(0.5).unwrap();
    let (a, b, x) = (c(0.6, 0.0), c(0.2, 0.0), c(0.5, 0.0));
    let q = base.q();
    let sv = psi_bilateral(&[a], &[b], &base, x, 120).unwrap();
    assert!(sv.converged);
    let inf = |v: Complex64| qpoch_inf(v, &base).map(|s| s.value);
    let num = inf(q).unwrap() * inf(b / a).unwrap() * inf(a * x).unwrap() * inf(q / (a * x)).unwrap();
    let den = inf(b).unwrap() * inf(q / a).unwrap() * inf(x).unwrap() * inf(b / (a * x)).unwrap();
    assert!(rel(sv.value, num / den) < 1e-9);
}

#[test]
fn bilateral_window_zero_and_window_growth() {
    let base = QBase::real(0.5).unwrap();
    let (a, b, x) = (c(0.6, 0.0), c(0.2, 0.0), c(0.5, 0.0));
    let sv = psi_bilateral(&[a], &[b], &base, x, 0).unwrap();
    assert_eq!(sv.value, c(1.0, 0.0));
    assert!(!sv.converged);
    // A positive but insufficient window is an explicit error.
    assert!(matches!(
        psi_bilateral(&[a], &[b], &base, x, 10),
        Err(FgError::WindowTooSmall { window: 10, .. })
    ));
}

#[test]
fn bilateral_lower_tail_vanishes_on_the_lattice() {
    // b = q^{N+1} zeroes every term from n = -N-1 down; the sum
    // short-circuits, so widening the window only adds upward tail terms.
    let base = QBase::real(0.5).unwrap();
    let n_cap = 2i32;
    let b = base.q().powi(n_cap + 1);
    let a = c(0.6, 0.0);
    let x = c(0.5, 0.0);
    let w1 = psi_bilateral(&[a], &[b], &base, x, 60).unwrap();
    let w2 = psi_bilateral(&[a], &[b], &base, x, 200).unwrap();
    assert!(rel(w1.value, w2.value) < 1e-13);
    // Downward side contributes exactly N = 2 nonzero terms.
    assert_eq!(w2.terms_used, 201 + n_cap as usize);
}

#[test]
fn product_over_z_reciprocal_branch_guards_zero() {
    let f = |j: i64| c(j as f64, 0.0); // factor 0 at j = 0
    assert!(matches!(
        product_over_z(&f, 2, -1),
        Err(FgError::DivisionByZero(_))
    ));
    // m >= k branch multiplies straight through.
    let v = product_over_z(&f, 1, 3).unwrap();
    assert_eq!(v, c(6.0, 0.0));
}
