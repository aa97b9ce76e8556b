//! Difference-operator tests against frozen high-precision references and
//! the structural identities the operator must satisfy.

use fg_calculus::diff::{
    backward_difference_limit, divided_difference, fg_difference, fg_difference_recursive,
    fg_leibniz, qdiff, qdiff_iterated, qdiff_leibniz, qdiff_n, qdiff_shifted,
};
use fg_calculus::{FGPair, FgError, Generator, NodeSystem, Operand, QBase};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn geo(start: f64, ratio: f64) -> Generator {
    Generator::Geometric {
        start: c(start, 0.0),
        ratio: c(ratio, 0.0),
    }
}

/// Pair (1-xy, x-y) over b_i = 0.5^i, x_i = 0.3 * 0.4^i.
fn onexy_system() -> NodeSystem {
    NodeSystem::new(FGPair::onexy_diff(), geo(1.0, 0.5), geo(0.3, 0.4))
}

/// Theta pair at q = 0.4 over b_i = 1.6 * 0.8^i, x_i = 0.9 * 0.95^i.
fn theta_system() -> NodeSystem {
    NodeSystem::new(
        FGPair::theta_pair(QBase::real(0.4).unwrap()),
        geo(1.6, 0.8),
        geo(0.9, 0.95),
    )
}

fn rel(a: Complex64, want: f64) -> f64 {
    (a - c(want, 0.0)).norm() / want.abs()
}

#[test]
fn cube_frozen_values_direct_and_recursive() {
    let sys = onexy_system();
    let cube = Operand::power(3);
    let frozen = [
        1.428571428571428571429,
        -1.75,
        1.4875,
        -0.69895,
        -0.170071632,
        -0.01007191784448,
        -0.0002088483775709184,
    ];
    for (n, want) in frozen.iter().enumerate() {
        let d = fg_difference(&cube, &sys, n).unwrap();
        let r = fg_difference_recursive(&cube, &sys, n).unwrap();
        assert!(rel(d.value, *want) <= 1e-12, "direct n={n}: {}", d.value);
        assert!(rel(r.value, *want) <= 1e-12, "recursive n={n}: {}", r.value);
        assert!(d.condition_estimate >= 1.0);
        assert_eq!(d.order, n);
    }
}

#[test]
fn recursive_agrees_with_direct_to_spec_tolerance() {
    // Relative agreement of the two methods for the cubic through order 8.
    let sys = onexy_system();
    let cube = Operand::power(3);
    for n in 0..=8 {
        let d = fg_difference(&cube, &sys, n).unwrap().value;
        let r = fg_difference_recursive(&cube, &sys, n).unwrap().value;
        let scale = d.norm().max(r.norm());
        assert!(
            (d - r).norm() <= 1e-11 * scale,
            "n={n}: direct {d} vs recursive {r}"
        );
    }
}

#[test]
fn inv1mcx_frozen_values_and_closed_form() {
    let sys = onexy_system();
    let op = Operand::inv1mcx(c(0.3, 0.0));
    let frozen = [
        2.040816326530612244898,
        -0.504201680672268907563,
        0.09811492164433340903929,
        -0.02568827039415274709392,
        0.007351099441200602684304,
    ];
    for (n, want) in frozen.iter().enumerate() {
        let d = fg_difference(&op, &sys, n).unwrap();
        assert!(rel(d.value, *want) <= 1e-12, "n={n}: {}", d.value);
    }
    // Closed form (-1)^n c^n (Ap/c;p)_{n-1} / (c;q)_{n+1} for the same system.
    let (cc, a, p, q) = (0.3f64, 0.3f64, 0.4f64, 0.5f64);
    let pb = QBase::real(p).unwrap();
    let qb = QBase::real(q).unwrap();
    for n in 1..=4usize {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let closed = sign * cc.powi(n as i32)
            * fg_calculus::qcore::qpoch(c(a * p / cc, 0.0), &pb, n as i64 - 1).unwrap()
            / fg_calculus::qcore::qpoch(c(cc, 0.0), &qb, n as i64 + 1).unwrap();
        let d = fg_difference(&op, &sys, n).unwrap();
        assert!((d.value - closed).norm() <= 1e-13 * closed.norm(), "n={n}");
    }
}

#[test]
fn constant_annihilation_all_pairs() {
    let one = Operand::one();
    let systems = [
        onexy_system(),
        NodeSystem::new(FGPair::one_diff(), geo(1.0, 0.5), geo(0.3, 0.4)),
        NodeSystem::new(FGPair::diff_diff(), geo(1.0, 0.5), geo(0.3, 0.4)),
        NodeSystem::new(
            FGPair::bibasic(c(0.2, 0.0), c(0.1, 0.0)).unwrap(),
            geo(1.6, 0.8),
            geo(0.9, 0.95),
        ),
        theta_system(),
    ];
    for sys in &systems {
        for n in 1..=8 {
            let d = fg_difference(&one, sys, n).unwrap();
            assert!(
                d.value.norm() <= 1e-11 * d.condition_estimate,
                "pair {} n={n}: |D({})| = {}",
                sys.pair().name(),
                n,
                d.value.norm()
            );
        }
    }
}

#[test]
fn delta_property_on_basis_functions() {
    // D^(n) of the basis function prod g(b_i,x)/prod f(x_i,x) is
    // delta_{n,m} / f(x_m, b_m).
    let sys = onexy_system();
    for m in 0..=5usize {
        let pair = sys.pair().clone();
        let b: Vec<Complex64> = (0..m).map(|i| sys.node(i).unwrap()).collect();
        let x: Vec<Complex64> = (1..=m).map(|i| sys.param(i).unwrap()).collect();
        let basis = Operand::new(move |t| {
            let mut v = c(1.0, 0.0);
            for bi in &b {
                v *= pair.g(*bi, t)?;
            }
            for xi in &x {
                v /= pair.f(*xi, t)?;
            }
            Ok(v)
        });
        let target = 1.0
            / sys
                .pair()
                .f(sys.param(m).unwrap(), sys.node(m).unwrap())
                .unwrap();
        for n in 0..=5usize {
            let d = fg_difference(&basis, &sys, n).unwrap();
            let want = if n == m { target } else { c(0.0, 0.0) };
            assert!(
                (d.value - want).norm() <= 1e-10 * d.condition_estimate,
                "m={m} n={n}: got {} want {}",
                d.value,
                want
            );
        }
    }
}

#[test]
fn leibniz_matches_product_difference() {
    let sys = onexy_system();
    let f_op = Operand::inv1mcx(c(0.3, 0.0));
    let h_op = Operand::power(2);
    let product = Operand::new(|t| Ok(t * t / (c(1.0, 0.0) - 0.3 * t)));
    for n in 1..=6usize {
        let lhs = fg_difference(&product, &sys, n).unwrap();
        let rhs = fg_leibniz(&f_op, &h_op, &sys, n).unwrap();
        let tol = 1e-12 * lhs.condition_estimate.max(rhs.condition_estimate);
        assert!(
            (lhs.value - rhs.value).norm() <= tol,
            "n={n}: product {} vs leibniz {}",
            lhs.value,
            rhs.value
        );
    }
}

#[test]
fn leibniz_order_one_structure() {
    // n = 1: H(b_0) D^1{F} + F(b_1) D^1{H}.
    let sys = onexy_system();
    let f_op = Operand::inv1mcx(c(0.3, 0.0));
    let h_op = Operand::power(2);
    let d1f = fg_difference(&f_op, &sys, 1).unwrap().value;
    let d1h = fg_difference(&h_op, &sys, 1).unwrap().value;
    let b0 = sys.node(0).unwrap();
    let b1 = sys.node(1).unwrap();
    let hand = h_op.eval(b0).unwrap() * d1f + f_op.eval(b1).unwrap() * d1h;
    let leib = fg_leibniz(&f_op, &h_op, &sys, 1).unwrap().value;
    assert!((hand - leib).norm() <= 1e-14 * hand.norm());
}

#[test]
fn leibniz_with_constant_factor_reduces_to_difference() {
    let sys = onexy_system();
    let f_op = Operand::inv1mcx(c(0.3, 0.0));
    let one = Operand::one();
    for n in 1..=5usize {
        let plain = fg_difference(&f_op, &sys, n).unwrap().value;
        let leib = fg_leibniz(&f_op, &one, &sys, n).unwrap().value;
        assert!((plain - leib).norm() <= 1e-13 * plain.norm(), "n={n}");
    }
}

#[test]
fn theta_pair_frozen_values() {
    let sys = theta_system();
    let op = Operand::inv1mcx(c(0.3, 0.0));
    let frozen = [
        -69.34197596765529278135,
        -51.38902793327899350095,
        -52.23289866468726892593,
    ];
    for (i, want) in frozen.iter().enumerate() {
        let n = i + 1;
        let d = fg_difference(&op, &sys, n).unwrap();
        let r = fg_difference_recursive(&op, &sys, n).unwrap();
        assert!(rel(d.value, *want) <= 1e-12, "direct n={n}: {}", d.value);
        assert!((d.value - r.value).norm() <= 1e-12 * d.value.norm());
    }
}

#[test]
fn bibasic_pair_frozen_values() {
    let sys = NodeSystem::new(
        FGPair::bibasic(c(0.2, 0.0), c(0.1, 0.0)).unwrap(),
        geo(1.6, 0.8),
        geo(0.9, 0.95),
    );
    let op = Operand::inv1mcx(c(0.3, 0.0));
    let frozen = [
        -1.239071006512866977983,
        -0.01813385471201996399431,
        -1.758948369146148416934,
    ];
    for (i, want) in frozen.iter().enumerate() {
        let d = fg_difference(&op, &sys, i + 1).unwrap();
        assert!(rel(d.value, *want) <= 1e-12, "n={}: {}", i + 1, d.value);
    }
}

#[test]
fn divided_difference_classical_values() {
    // Degree-n polynomials: F[nodes] over n+1 nodes is the leading coefficient.
    let sq = Operand::power(2);
    let v = divided_difference(&sq, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]).unwrap();
    assert!((v - c(1.0, 0.0)).norm() <= 1e-14);
    let quint = Operand::power(5);
    let nodes: Vec<Complex64> = (1..=6).map(|i| c(0.1 * i as f64, 0.0)).collect();
    let v = divided_difference(&quint, &nodes).unwrap();
    assert!((v - c(1.0, 0.0)).norm() <= 1e-13);
    // Frozen rational value.
    let op = Operand::inv1mcx(c(0.3, 0.0));
    let nodes: Vec<Complex64> = (1..=4).map(|i| c(0.1 * i as f64, 0.0)).collect();
    let v = divided_difference(&op, &nodes).unwrap();
    assert!(rel(v, 0.03697771848682136025852) <= 1e-13);
    // Single node: F[x_1] = F(x_1).
    let v = divided_difference(&op, &[c(0.2, 0.0)]).unwrap();
    assert!((v - op.eval(c(0.2, 0.0)).unwrap()).norm() <= 1e-16);
}

#[test]
fn divided_difference_is_signed_one_diff_operator() {
    // D^(n) with pair (1, x-y) equals (-1)^n F[nodes].
    let op = Operand::inv1mcx(c(0.3, 0.0));
    let nodes: Vec<Complex64> = (1..=4).map(|i| c(0.1 * i as f64, 0.0)).collect();
    let sys = NodeSystem::new(
        FGPair::one_diff(),
        Generator::List(nodes.clone()),
        Generator::Geometric {
            start: c(1.0, 0.0),
            ratio: c(1.0, 0.0),
        },
    );
    let d = fg_difference(&op, &sys, 3).unwrap().value;
    let dd = divided_difference(&op, &nodes).unwrap();
    assert!((d - -dd).norm() <= 1e-13 * dd.norm());
}

#[test]
fn divided_difference_rejects_coincident_nodes() {
    let op = Operand::power(2);
    let res = divided_difference(&op, &[c(0.5, 0.0), c(0.5 + 1e-15, 0.0)]);
    assert!(matches!(res, Err(FgError::CoincidentNodes { .. })));
}

#[test]
fn backward_difference_exponential_and_sine() {
    let exp_op = Operand::new(|t| Ok(t.exp()));
    let report = backward_difference_limit(
        &exp_op,
        c(0.0, 0.0),
        2,
        c(1.0, 0.0),
        &[1e-1, 1e-2, 1e-3],
    )
    .unwrap();
    assert!((report.target - c(0.5, 0.0)).norm() <= 1e-16);
    let last = report.rows.last().unwrap();
    assert!((last.value - c(0.499500291542, 0.0)).norm() <= 2e-9);
    let order = report.observed_order.unwrap();
    assert!((0.8..1.2).contains(&order), "order {order}");

    let sin_op = Operand::new(|t| Ok(t.sin()));
    let report =
        backward_difference_limit(&sin_op, c(0.0, 0.0), 1, c(1.0, 0.0), &[1e-1, 1e-2, 1e-3])
            .unwrap();
    let last = report.rows.last().unwrap();
    assert!((last.value - c(0.999999833333, 0.0)).norm() <= 2e-9);
}

#[test]
fn backward_difference_exact_for_polynomials() {
    // Divided differences of a degree-n polynomial at order n are constant in
    // h, so every error sits at roundoff and no convergence order is fitted.
    let op = Operand::power(2);
    let report =
        backward_difference_limit(&op, c(0.3, 0.0), 2, c(2.0, 0.0), &[0.5, 0.1, 0.01]).unwrap();
    for row in &report.rows {
        assert!(row.abs_error <= 1e-13, "h={}: {}", row.h, row.abs_error);
    }
    assert!(report.observed_order.is_none());
}

#[test]
fn qdiff_first_order_basics() {
    let sq = Operand::power(2);
    // (F(x) - F(qx))/x = (1 - q^2) x.
    let v = qdiff(&sq, c(0.5, 0.0), c(0.7, 0.0)).unwrap();
    assert!((v - c(0.75 * 0.7, 0.0)).norm() <= 1e-15);
    let konst = Operand::constant(c(3.5, 0.0));
    assert_eq!(qdiff(&konst, c(0.5, 0.0), c(0.7, 0.0)).unwrap(), c(0.0, 0.0));
    assert!(matches!(
        qdiff(&sq, c(0.5, 0.0), c(0.0, 0.0)),
        Err(FgError::Domain(_))
    ));
}

#[test]
fn qdiff_n_frozen_values_and_closed_form() {
    let op = Operand::inv1mcx(c(0.3, 0.0));
    let (q, x) = (c(0.5, 0.0), c(1.0, 0.0));
    let frozen = [
        0.2521008403361344537815,
        0.06132182602770838064956,
        0.01672413437119319472261,
        0.004793541698749641799473,
    ];
    let qb = QBase::real(0.5).unwrap();
    for (i, want) in frozen.iter().enumerate() {
        let n = i + 1;
        let v = qdiff_n(&op, q, x, n).unwrap();
        assert!(rel(v, *want) <= 1e-13, "n={n}: {v}");
        // c^n (q;q)_n / (c;q)_{n+1}
        let closed = c(0.3f64.powi(n as i32), 0.0)
            * fg_calculus::qcore::qpoch(q, &qb, n as i64).unwrap()
            / fg_calculus::qcore::qpoch(c(0.3, 0.0), &qb, n as i64 + 1).unwrap();
        assert!((v - closed).norm() <= 1e-13 * closed.norm(), "closed n={n}");
    }
}

#[test]
fn qdiff_explicit_matches_iteration_to_order_ten() {
    let op = Operand::inv1mcx(c(0.3, 0.0));
    let (q, x) = (c(0.5, 0.0), c(1.0, 0.0));
    for n in 1..=10usize {
        let e = qdiff_n(&op, q, x, n).unwrap();
        let it = qdiff_iterated(&op, q, x, n).unwrap();
        assert!((e - it).norm() <= 1e-12 * e.norm(), "n={n}: {e} vs {it}");
    }
}

#[test]
fn qdiff_n_annihilates_low_degree_polynomials() {
    // Degree-5 polynomial, q-derivatives of order 6 and up: zero, far below
    // the 1e-12 mark (the alternating weights grow like q^{-nk}, so this
    // needs the extended-precision polynomial operand to stay clean).
    let p5 = Operand::polynomial(&[c(3.0, 0.0), c(-2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    for n in 6..=10usize {
        let v = qdiff_n(&p5, c(0.5, 0.0), c(0.7, 0.0), n).unwrap();
        assert!(v.norm() <= 1e-12, "n={n}: {v}");
    }
}

#[test]
fn qdiff_shifted_bridges_operator_and_derivative() {
    // Shifted-window bridge at the worked parameters.
    let sq = Operand::power(2);
    let report = qdiff_shifted(&sq, c(0.5, 0.0), c(1.0, 0.0), 3, 2).unwrap();
    assert!(report.scaled_residual <= 1e-13, "{}", report.scaled_residual);
    assert!(report.passes);
    // Unshifted bridge across orders and bases, including a complex q.
    let op = Operand::inv1mcx(c(0.3, 0.0));
    for q in [c(0.5, 0.0), c(0.8, 0.0), c(0.3, 0.4)] {
        for n in 1..=10usize {
            let report = qdiff_shifted(&op, q, c(1.0, 0.0), n, 0).unwrap();
            assert!(
                report.passes,
                "q={q} n={n}: residual {}",
                report.scaled_residual
            );
        }
    }
}

#[test]
fn qdiff_leibniz_product_rule() {
    let f_op = Operand::inv1mcx(c(0.3, 0.0));
    let h_op = Operand::power(2);
    let (q, x) = (c(0.5, 0.0), c(1.0, 0.0));
    // First order against the direct difference of the product.
    let product = Operand::new(|t| Ok(t * t / (c(1.0, 0.0) - 0.3 * t)));
    let lhs = qdiff(&product, q, x).unwrap();
    let rhs = qdiff_leibniz(&f_op, &h_op, q, x, 1).unwrap();
    assert!((lhs - rhs).norm() <= 1e-14 * lhs.norm());
    // Orders 1..5 against the explicit formula on the product.
    for n in 1..=5usize {
        let direct = qdiff_n(&product, q, x, n).unwrap();
        let leib = qdiff_leibniz(&f_op, &h_op, q, x, n).unwrap();
        assert!((direct - leib).norm() <= 1e-12 * direct.norm(), "n={n}");
    }
    // H = 1 reduces to the plain q-derivative.
    let one = Operand::one();
    for n in 1..=6usize {
        let a = qdiff_n(&f_op, q, x, n).unwrap();
        let b = qdiff_leibniz(&f_op, &one, q, x, n).unwrap();
        assert!((a - b).norm() <= 1e-14 * a.norm(), "n={n}");
    }
    // Squared factor against the q-derivative of 1/(1-cx)^2.
    let square = Operand::new(|t| {
        let d = c(1.0, 0.0) - 0.3 * t;
        Ok(1.0 / (d * d))
    });
    let direct = qdiff_n(&square, q, x, 4).unwrap();
    let leib = qdiff_leibniz(&f_op, &f_op, q, x, 4).unwrap();
    assert!((direct - leib).norm() <= 1e-11 * direct.norm());
}

#[test]
fn sinpi_on_integer_nodes_vanishes_identically() {
    // Integer nodes hit the zeros of sin(pi x) exactly, so every difference
    // is exactly zero with a unit condition estimate: the classical failure
    // setup for node-based reconstruction.
    let sys = NodeSystem::new(
        FGPair::one_diff(),
        Generator::Affine {
            start: c(0.0, 0.0),
            step: c(1.0, 0.0),
        },
        geo(1.0, 1.0),
    );
    let op = Operand::sinpi();
    for n in 0..=10 {
        let d = fg_difference(&op, &sys, n).unwrap();
        assert_eq!(d.value, c(0.0, 0.0));
        assert_eq!(d.condition_estimate, 1.0);
    }
}

#[test]
fn zero_denominator_reports_indices() {
    // Bibasic g(x,y) = (x-y)(1 - b/(a x y)) vanishes when a x y = b:
    // nodes 1.0 and 0.5 with a = 0.2, b = 0.1 give a b_0 b_1 = 0.1 = b.
    let sys = NodeSystem::new(
        FGPair::bibasic(c(0.2, 0.0), c(0.1, 0.0)).unwrap(),
        Generator::List(vec![c(1.0, 0.0), c(0.5, 0.0)]),
        geo(0.9, 0.95),
    );
    let op = Operand::one();
    match fg_difference(&op, &sys, 1) {
        Err(FgError::ZeroDenominator { i, k, .. }) => {
            assert!((i, k) == (0, 1) || (i, k) == (1, 0), "({i},{k})");
        }
        other => panic!("expected ZeroDenominator, got {other:?}"),
    }
}

#[test]
fn coincident_nodes_rejected_before_summing() {
    let sys = NodeSystem::new(
        FGPair::one_diff(),
        Generator::List(vec![c(0.5, 0.0), c(0.5, 0.0)]),
        geo(1.0, 1.0),
    );
    let op = Operand::one();
    assert!(matches!(
        fg_difference(&op, &sys, 1),
        Err(FgError::CoincidentNodes { .. })
    ));
}

#[test]
fn one_diff_recursion_is_divided_difference_recursion() {
    // With f = 1 the two-window recursion collapses to the classical
    // divided-difference recursion (D[b_0..b_n] - D[b_1..b_{n+1}]) / g(b_{n+1}, b_0).
    let nodes: Vec<Complex64> = vec![
        c(0.1, 0.0),
        c(0.35, 0.0),
        c(0.6, 0.0),
        c(0.85, 0.0),
        c(1.1, 0.0),
    ];
    let op = Operand::inv1mcx(c(0.4, 0.0));
    let sys = NodeSystem::new(
        FGPair::one_diff(),
        Generator::List(nodes.clone()),
        geo(1.0, 1.0),
    );
    let d4 = fg_difference_recursive(&op, &sys, 4).unwrap().value;
    let low = fg_difference(&op, &sys, 3).unwrap().value;
    let sys_hi = NodeSystem::new(
        FGPair::one_diff(),
        Generator::List(nodes[1..].to_vec()),
        geo(1.0, 1.0),
    );
    let high = fg_difference(&op, &sys_hi, 3).unwrap().value;
    let hand = (low - high) / (nodes[4] - nodes[0]);
    assert!((d4 - hand).norm() <= 1e-13 * d4.norm());
}
