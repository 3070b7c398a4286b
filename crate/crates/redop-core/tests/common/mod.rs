//! Shared generators and numeric oracles for the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use redop_core::symbolic::{Application, Atom, Expr, Valuation};

/// Leaf atoms used by the random expression generator.
pub fn leaves() -> Vec<Atom> {
    vec![
        Atom::var("x1"),
        Atom::var("x2"),
        Atom::Jet(0, 0),
        Atom::Jet(1, 0),
        Atom::Jet(0, 1),
    ]
}

fn positive(rng: &mut impl Rng, a: &Expr) -> Expr {
    let c = rng.random_range(1..=3);
    Expr::int(c).add(&a.mul(a))
}

/// Random expression built from rational arithmetic and the kernels, with
/// every denominator and kernel argument kept positive on real points.
pub fn random_expr(rng: &mut impl Rng, depth: u32) -> Expr {
    let atoms = leaves();
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.8) {
            Expr::atom(atoms[rng.random_range(0..atoms.len())].clone())
        } else {
            Expr::int(rng.random_range(-3..=3))
        };
    }
    let a = random_expr(rng, depth - 1);
    match rng.random_range(0..8) {
        0 => a.add(&random_expr(rng, depth - 1)),
        1 => a.sub(&random_expr(rng, depth - 1)),
        2 | 3 => a.mul(&random_expr(rng, depth - 1)),
        4 => {
            let b = random_expr(rng, depth - 1);
            let d = positive(rng, &b);
            a.div(&d).expect("positive denominator")
        }
        5 => a.scale(&redop_core::symbolic::ratio(1, 2)).exp(),
        6 => positive(rng, &a).ln().expect("positive argument"),
        _ => positive(rng, &a).sqrt(),
    }
}

/// Rational-fragment expression (no kernels).
pub fn random_rational(rng: &mut impl Rng, depth: u32) -> Expr {
    let atoms = leaves();
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.8) {
            Expr::atom(atoms[rng.random_range(0..atoms.len())].clone())
        } else {
            Expr::int(rng.random_range(-3..=3))
        };
    }
    let a = random_rational(rng, depth - 1);
    let b = random_rational(rng, depth - 1);
    match rng.random_range(0..4) {
        0 => a.add(&b),
        1 => a.sub(&b),
        2 => a.mul(&b),
        _ => a.div(&positive(rng, &b)).expect("positive denominator"),
    }
}

/// A fixed real point for numeric evaluation.
#[derive(Clone, Debug, Default)]
pub struct Point(pub HashMap<Atom, f64>);

impl Point {
    pub fn random(rng: &mut impl Rng, atoms: &[Atom]) -> Point {
        Point(
            atoms
                .iter()
                .map(|a| (a.clone(), rng.random_range(-1.0..1.0)))
                .collect(),
        )
    }

    pub fn shifted(&self, a: &Atom, h: f64) -> Point {
        let mut p = self.clone();
        *p.0.entry(a.clone()).or_insert(0.0) += h;
        p
    }
}

impl Valuation for Point {
    fn leaf(&mut self, a: &Atom) -> f64 {
        self.0.get(a).copied().unwrap_or(f64::NAN)
    }

    fn apply(&mut self, _app: &Application, _args: &[f64]) -> f64 {
        f64::NAN
    }
}

/// Centered finite difference of `e` along `a` at `p`.
pub fn central_difference(e: &Expr, a: &Atom, p: &Point, h: f64) -> f64 {
    let hi = e.eval(&mut p.shifted(a, h));
    let lo = e.eval(&mut p.shifted(a, -h));
    (hi - lo) / (2.0 * h)
}

pub fn relative_error(exact: f64, approx: f64) -> f64 {
    (exact - approx).abs() / exact.abs().max(1.0)
}

/// Coordinates `(t, x, u)` used by the evolution-equation generators.
pub fn evolution_names() -> redop_core::symbolic::Names {
    redop_core::symbolic::Names::new("t", "x", "u")
}

/// Small polynomial in `(t, x, u)` with integer coefficients.
pub fn random_point_function(rng: &mut impl Rng) -> Expr {
    let base = [Expr::var("t"), Expr::var("x"), Expr::jet(0, 0)];
    let mut acc = Expr::int(rng.random_range(-2..=2));
    for _ in 0..rng.random_range(1..=2) {
        let c = rng.random_range(1..=3) * if rng.random_bool(0.5) { 1 } else { -1 };
        let a = &base[rng.random_range(0..3)];
        let b = &base[rng.random_range(0..3)];
        let term = if rng.random_bool(0.5) { a.clone() } else { a.mul(b) };
        acc = acc.add(&term.scale(&redop_core::symbolic::rat(c)));
    }
    acc
}

/// Point function that cannot vanish: a positive constant plus a square,
/// or an exponential.
pub fn random_nonvanishing(rng: &mut impl Rng) -> Expr {
    let p = random_point_function(rng);
    if rng.random_bool(0.5) {
        Expr::int(rng.random_range(1..=3)).add(&p.mul(&p))
    } else {
        p.scale(&redop_core::symbolic::ratio(1, 2)).exp()
    }
}

/// `u_t − H` with `H` polynomial or exponential in `u_{x^k}`, `k <= r`, and
/// `∂H/∂u_{x^r}` not identically zero.
pub fn random_evolution(rng: &mut impl Rng, r: u32) -> redop_core::jet::DifferentialFunction {
    use redop_core::symbolic::{is_zero, TriBool};
    loop {
        let mut h = random_point_function(rng);
        for k in 1..=r {
            let v = Expr::jet(0, k);
            let c = random_point_function(rng);
            let term = match rng.random_range(0..3) {
                0 => v.mul(&c),
                1 => v.mul(&v).mul(&c),
                _ => v.scale(&redop_core::symbolic::ratio(1, 2)).exp().mul(&c),
            };
            h = h.add(&term);
        }
        let top = h.diff(&Atom::Jet(0, r));
        if is_zero(&top).unwrap() == TriBool::ProvenZero {
            continue;
        }
        let body = Expr::jet(1, 0).sub(&h);
        return redop_core::jet::DifferentialFunction::new(body, evolution_names());
    }
}

/// Random field with `τ ≡ 0` (and then `ξ` nonvanishing) or with `τ`
/// nonvanishing.
pub fn random_field(rng: &mut impl Rng, tau_zero: bool) -> redop_core::jet::VectorField {
    let tau = if tau_zero {
        Expr::zero()
    } else {
        random_nonvanishing(rng)
    };
    let xi = if tau_zero {
        random_nonvanishing(rng)
    } else {
        random_point_function(rng)
    };
    redop_core::jet::VectorField::new(tau, xi, random_point_function(rng)).unwrap()
}
