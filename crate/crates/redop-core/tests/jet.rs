mod common;

use std::sync::Arc;

use common::random_expr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redop_core::jet::{
    apply_prolonged, characteristic, ord, prolong, swap_axes, total_derivative, Axis,
    DifferentialFunction, JetError, MultiIndex, VectorField,
};
use redop_core::symbolic::{Atom, Expr, FormalArg, Names, UnknownFunction};

fn names() -> Names {
    Names::default()
}

fn zeta() -> Arc<UnknownFunction> {
    Arc::new(
        UnknownFunction::new(
            "zeta",
            vec![
                FormalArg::Var("x1".into()),
                FormalArg::Var("x2".into()),
                FormalArg::Jet(0, 0),
            ],
        )
        .unwrap(),
    )
}

fn f_of_u() -> Arc<UnknownFunction> {
    Arc::new(UnknownFunction::new("F", vec![FormalArg::Jet(0, 0)]).unwrap())
}

fn u(a: u32, b: u32) -> Expr {
    Expr::jet(a, b)
}

/// Random coefficient depending on `(x, u)` only.
fn random_coefficient(rng: &mut impl Rng, depth: u32) -> Expr {
    let leaves = [Expr::var("x1"), Expr::var("x2"), u(0, 0)];
    if depth == 0 || rng.random_bool(0.3) {
        return if rng.random_bool(0.75) {
            leaves[rng.random_range(0..3)].clone()
        } else {
            Expr::int(rng.random_range(-3..=3))
        };
    }
    let a = random_coefficient(rng, depth - 1);
    let b = random_coefficient(rng, depth - 1);
    match rng.random_range(0..5) {
        0 => a.add(&b),
        1 => a.sub(&b),
        2 => a.mul(&b),
        3 => a.div(&Expr::int(1).add(&b.mul(&b))).unwrap(),
        _ => a.scale(&redop_core::symbolic::ratio(1, 3)).exp(),
    }
}

fn random_field(rng: &mut impl Rng) -> VectorField {
    loop {
        let q = VectorField::new(
            random_coefficient(rng, 2),
            random_coefficient(rng, 2),
            random_coefficient(rng, 2),
        );
        if let Ok(q) = q {
            return q;
        }
    }
}

#[test]
fn total_derivative_examples() {
    let n = names();
    assert_eq!(total_derivative(&u(0, 0), Axis::One, &n), u(1, 0));
    let z = zeta();
    let d = total_derivative(&z.formal_symbol(), Axis::One, &n);
    let expected = z
        .symbol(vec![1, 0, 0])
        .add(&z.symbol(vec![0, 0, 1]).mul(&u(1, 0)));
    assert_eq!(d, expected);
    let x2 = Expr::var("x2");
    let d = total_derivative(&u(1, 0).mul(&x2), Axis::Two, &n);
    assert_eq!(d, u(1, 1).mul(&x2).add(&u(1, 0)));
}

#[test]
fn order_examples() {
    let f = f_of_u();
    assert_eq!(ord(&u(1, 2).sub(&f.formal_symbol())), 3);
    assert_eq!(ord(&Expr::zero()), -1);
    let e = u(2, 0).mul(&u(0, 0)).div(&u(2, 0)).unwrap();
    assert_eq!(ord(&e), 0);
    let l = DifferentialFunction::new(Expr::var("x1"), names());
    assert_eq!(l.ord(), 0);
    assert!(!l.depends_on_u());
}

#[test]
fn characteristic_examples() {
    let z = zeta().formal_symbol();
    let q = VectorField::new(Expr::zero(), Expr::one(), z.clone()).unwrap();
    assert_eq!(characteristic(&q), z.sub(&u(0, 1)));
    let q = VectorField::new(Expr::one(), Expr::zero(), Expr::zero()).unwrap();
    assert_eq!(characteristic(&q), u(1, 0).neg());
    let q = VectorField::new(u(0, 0), Expr::one(), Expr::zero()).unwrap();
    assert_eq!(characteristic(&q), u(0, 0).mul(&u(1, 0)).add(&u(0, 1)).neg());
}

#[test]
fn vector_field_invariants_are_enforced() {
    assert_eq!(
        VectorField::new(Expr::zero(), Expr::zero(), u(0, 0)).unwrap_err(),
        JetError::ZeroField
    );
    assert!(matches!(
        VectorField::new(Expr::one(), u(1, 0), Expr::zero()),
        Err(JetError::JetInCoefficient { .. })
    ));
}

#[test]
fn prolongation_examples() {
    let n = names();
    let shift = VectorField::new(Expr::one(), Expr::zero(), Expr::zero()).unwrap();
    assert!(prolong(&shift, 2, &n).values().all(Expr::is_zero));

    let z = zeta();
    let q = VectorField::new(Expr::zero(), Expr::one(), z.formal_symbol()).unwrap();
    let p = prolong(&q, 1, &n);
    assert_eq!(
        p[&MultiIndex(1, 0)],
        z.symbol(vec![1, 0, 0])
            .add(&z.symbol(vec![0, 0, 1]).mul(&u(1, 0)))
    );
}

#[test]
fn pure_u_field_prolongation_matches_hand_expansion() {
    let n = names();
    let q = VectorField {
        xi: [Expr::zero(), Expr::zero()],
        eta: Expr::var("x2"),
    };
    let p = prolong(&q, 1, &n);
    assert!(p[&MultiIndex(0, 1)].is_one());
    assert!(p[&MultiIndex(1, 0)].is_zero());
}

#[test]
fn apply_prolonged_examples() {
    let n = names();
    let shift = VectorField::new(Expr::one(), Expr::zero(), Expr::zero()).unwrap();
    let l = DifferentialFunction::new(u(1, 0), n.clone());
    assert!(apply_prolonged(&shift, &l).unwrap().is_zero());

    let f = f_of_u();
    let du = VectorField {
        xi: [Expr::zero(), Expr::zero()],
        eta: Expr::one(),
    };
    let l = DifferentialFunction::new(u(1, 2).sub(&f.formal_symbol()), n.clone());
    assert_eq!(apply_prolonged(&du, &l).unwrap(), f.symbol(vec![1]).neg());

    let z = zeta();
    let q = VectorField::new(Expr::zero(), Expr::one(), z.formal_symbol()).unwrap();
    let l = DifferentialFunction::new(u(0, 1), n.clone());
    assert_eq!(
        apply_prolonged(&q, &l).unwrap(),
        z.symbol(vec![0, 1, 0])
            .add(&z.symbol(vec![0, 0, 1]).mul(&u(0, 1)))
    );

    let l = DifferentialFunction::new(Expr::zero(), n);
    assert_eq!(apply_prolonged(&q, &l).unwrap_err(), JetError::OrderUndefined);
}

#[test]
fn total_derivatives_commute() {
    let n = names();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let e = random_expr(&mut rng, 3);
        let a = total_derivative(&total_derivative(&e, Axis::One, &n), Axis::Two, &n);
        let b = total_derivative(&total_derivative(&e, Axis::Two, &n), Axis::One, &n);
        assert_eq!(a, b, "D1 D2 vs D2 D1 of {e}");
    }
}

#[test]
fn total_derivative_raises_order_by_at_most_one() {
    let n = names();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..100 {
        let e = random_expr(&mut rng, 3);
        let r = ord(&e);
        let top = e
            .free_leaves()
            .iter()
            .any(|a| matches!(a, Atom::Jet(..)) && a.jet_order() == Some(r.max(0) as u32));
        for axis in [Axis::One, Axis::Two] {
            let d = ord(&total_derivative(&e, axis, &n));
            assert!(d <= r + 1, "{e}");
            if top {
                assert_eq!(d, r + 1, "{e} along {axis}");
            }
        }
    }
}

#[test]
fn prolongation_matches_classical_recursion() {
    let n = names();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..12 {
        let q = random_field(&mut rng);
        let p = prolong(&q, 3, &n);
        let dxi = |axis: Axis| -> [Expr; 2] {
            [
                total_derivative(&q.xi[0], axis, &n),
                total_derivative(&q.xi[1], axis, &n),
            ]
        };
        let d1 = dxi(Axis::One);
        let d2 = dxi(Axis::Two);
        for m in std::iter::once(MultiIndex(0, 0)).chain(MultiIndex::up_to(2)) {
            for (axis, dx) in [(Axis::One, &d1), (Axis::Two, &d2)] {
                let next = m.shifted(axis);
                let classical = total_derivative(&p[&m], axis, &n)
                    .sub(&dx[0].mul(&m.shifted(Axis::One).expr()))
                    .sub(&dx[1].mul(&m.shifted(Axis::Two).expr()));
                assert_eq!(p[&next], classical, "coefficient {next}");
            }
        }
    }
}

#[test]
fn swapping_axes_twice_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..30 {
        let l = DifferentialFunction::new(random_expr(&mut rng, 3), names());
        let s = swap_axes(&l);
        assert_eq!(&*s.names().x[0], "x2");
        assert_eq!(swap_axes(&s).body(), l.body());
    }
}
