use std::sync::Arc;

use redop_core::jet::{DifferentialFunction, VectorField};
use redop_core::problem::{parse_expression, parse_problem, Problem};
use redop_core::reduction::{
    conditional_invariance_test, determining_regular, determining_singular,
    general_singular_equation, instantiate_zeta, invariance_check, reduce_with_ansatz, same_equation,
    solve_for_leader, Ansatz, CaseLabel, ReductionError, PHI,
};
use redop_core::singularity::{weak_coorder, ReducedXi};
use redop_core::symbolic::{is_zero, Atom, Expr, FormalArg, SampleConfig, TriBool, UnknownFunction};

fn cfg() -> SampleConfig {
    SampleConfig::default()
}

fn problem(text: &str) -> Problem {
    parse_problem(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

fn expr(p: &Problem, text: &str) -> Expr {
    parse_expression(p, text, &[]).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn field(p: &Problem, a: &str, b: &str, c: &str) -> VectorField {
    VectorField::new(expr(p, a), expr(p, b), expr(p, c)).unwrap()
}

fn ansatz(p: &Problem, body: &str, omega: &str) -> Ansatz {
    let body = parse_expression(p, body, &[PHI.to_string()]).unwrap();
    Ansatz {
        body,
        omega: expr(p, omega),
    }
}

const HEAT: &str = "vars t x; dep u; fn zeta(t, x, u); eq: u_t = u_xx;";
const WAVE: &str = "vars x y; dep u; fn F(u); fn zeta(x, y, u); eq: u_xy = F;";
const LIOUVILLE: &str = "vars x y; dep u; fn zeta(x, y, u); eq: u_xy = exp(u);";
const FLAT: &str = "vars x y; dep u; eq: u_xy = 0;";

#[test]
fn heat_invariance_verdicts() {
    let p = problem(HEAT);
    let l = p.differential_function();
    let scaling = field(&p, "0", "1", "u");
    assert_eq!(conditional_invariance_test(&l, &scaling, &cfg()).unwrap(), TriBool::ProvenZero);
    let wrong = field(&p, "0", "1", "t");
    assert!(conditional_invariance_test(&l, &wrong, &cfg()).unwrap().is_nonzero());
    let galilei = field(&p, "0", "2*t", "-x*u");
    assert_eq!(conditional_invariance_test(&l, &galilei, &cfg()).unwrap(), TriBool::ProvenZero);
}

#[test]
fn lie_symmetries_of_heat_pass() {
    let p = problem(HEAT);
    let l = p.differential_function();
    for (a, b, c) in [
        ("1", "0", "0"),
        ("0", "1", "0"),
        ("0", "0", "u"),
        ("2*t", "x", "0"),
        ("4*t^2", "4*t*x", "-(x^2 + 2*t)*u"),
    ] {
        let q = VectorField::new(expr(&p, a), expr(&p, b), expr(&p, c));
        let Ok(q) = q else { continue };
        assert_eq!(
            conditional_invariance_test(&l, &q, &cfg()).unwrap(),
            TriBool::ProvenZero,
            "{a}, {b}, {c}"
        );
    }
}

#[test]
fn heat_determining_equation_matches_hand_expansion() {
    let p = problem(HEAT);
    let l = p.differential_function();
    let sys = determining_singular(&l, ReducedXi::Zero, &cfg()).unwrap();
    assert_eq!(sys.label, CaseLabel::Evolution);
    let expected = expr(&p, "zeta_t - zeta_xx - 2*zeta*zeta_xu - zeta^2*zeta_uu");
    assert_eq!(sys.equations.len(), 1);
    assert!(same_equation(&sys.equations[0], &expected), "{}", sys.equations[0]);
    assert_eq!(sys.g.unwrap(), expr(&p, "zeta_x + zeta*zeta_u"));
}

#[test]
fn heat_determining_equation_on_concrete_values() {
    let p = problem(HEAT);
    let l = p.differential_function();
    let eq = &determining_singular(&l, ReducedXi::Zero, &cfg()).unwrap().equations[0];
    for z in ["u", "x", "u/x", "-x*u/(2*t)"] {
        let r = instantiate_zeta(eq, &expr(&p, z), &p.names).unwrap();
        assert_eq!(is_zero(&r).unwrap(), TriBool::ProvenZero, "zeta = {z}");
    }
    let r = instantiate_zeta(eq, &expr(&p, "t"), &p.names).unwrap();
    assert!(is_zero(&r).unwrap().is_nonzero());
}

#[test]
fn wave_determining_equation_matches_hand_expansion() {
    let p = problem(WAVE);
    let l = p.differential_function();
    let sys = determining_singular(&l, ReducedXi::Zero, &cfg()).unwrap();
    assert_eq!(sys.label, CaseLabel::Wave);
    let expected = expr(
        &p,
        "zeta_xy + zeta*zeta_xu + (zeta_yu + zeta*zeta_uu)*(F - zeta_x)/zeta_u + zeta_u*F - zeta*F_u",
    );
    assert!(same_equation(&sys.equations[0], &expected));
    let (g, general) = general_singular_equation(&l, ReducedXi::Zero, &cfg()).unwrap();
    assert_eq!(g.value, expr(&p, "(F - zeta_x)/zeta_u"));
    assert!(same_equation(&general, &expected));
}

#[test]
fn liouville_determining_equation_and_its_solution() {
    let p = problem(LIOUVILLE);
    let l = p.differential_function();
    let sys = determining_singular(&l, ReducedXi::Zero, &cfg()).unwrap();
    let expected = expr(
        &p,
        "zeta_xy + zeta*zeta_xu + (zeta_yu + zeta*zeta_uu)*(exp(u) - zeta_x)/zeta_u + zeta_u*exp(u) - zeta*exp(u)",
    );
    assert!(same_equation(&sys.equations[0], &expected));
    let zeta = expr(&p, "-sqrt(2)*exp(u/2)");
    let r = instantiate_zeta(&sys.equations[0], &zeta, &p.names).unwrap();
    assert_eq!(is_zero(&r).unwrap(), TriBool::ProvenZero);
}

#[test]
fn evolution_specialization_on_nonlinear_equation() {
    let p = problem("vars t x; dep u; fn zeta(t, x, u); eq: u_t = u*u_xx + u_x^2;");
    let l = p.differential_function();
    let sys = determining_singular(&l, ReducedXi::Zero, &cfg()).unwrap();
    assert_eq!(sys.label, CaseLabel::Evolution);
    // H̃ = u(ζ_x + ζζ_u) + ζ²
    let h = "(u*(zeta_x + zeta*zeta_u) + zeta^2)";
    let direct = format!(
        "zeta_t + zeta_u*{h} - (u*(zeta_xx + zeta_x*zeta_u + zeta*zeta_xu) + 2*zeta*zeta_x) \
         - zeta*((zeta_x + zeta*zeta_u) + u*(zeta_xu + zeta_u^2 + zeta*zeta_uu) + 2*zeta*zeta_u)"
    );
    assert!(same_equation(&sys.equations[0], &expr(&p, &direct)));
}

#[test]
fn u_xi_set_has_general_label() {
    let p = problem(WAVE);
    let sys = determining_singular(&p.differential_function(), ReducedXi::U, &cfg());
    match sys {
        Ok(s) => assert_eq!(s.label, CaseLabel::SingularGeneral),
        Err(ReductionError::SetNotFirstCoorder { k }) => assert_ne!(k, 1),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn regular_set_is_rejected() {
    let p = problem("vars x y; dep u; fn zeta(x, y, u); eq: u_xx - u_yy = 0;");
    let err = determining_singular(&p.differential_function(), ReducedXi::Zero, &cfg()).unwrap_err();
    assert_eq!(err, ReductionError::SetNotFirstCoorder { k: 2 });
}

#[test]
fn regular_heat_system_contains_xi_uu() {
    let p = problem("vars t x; dep u; fn xi(t, x, u); fn eta(t, x, u); eq: u_t = u_xx;");
    let l = p.differential_function();
    let q = field(&p, "1", "xi", "eta");
    let sys = determining_regular(&l, &q, &cfg()).unwrap();
    assert_eq!(sys.label, CaseLabel::RegularSplit);
    let target = expr(&p, "xi_uu");
    assert!(
        sys.equations.iter().any(|e| same_equation(e, &target)),
        "{:?}",
        sys.equations.iter().map(|e| e.render(&p.names)).collect::<Vec<_>>()
    );
    for e in &sys.equations {
        assert!(e.free_leaves().iter().all(|a| a.jet_order().is_none_or(|n| n == 0)));
    }
}

/// Replaces the symbols of the unknown function `name` by derivatives of
/// a concrete function of `(x, y, u)`.
fn instantiate(e: &Expr, name: &str, value: &Expr) -> Expr {
    let coords = [Atom::var("x"), Atom::var("y"), Atom::Jet(0, 0)];
    let mut map = std::collections::HashMap::new();
    for a in e.syntactic_atoms() {
        if let Atom::Apply(app) = &a {
            if &*app.func.name == name {
                let mut v = value.clone();
                for (slot, n) in app.index.iter().enumerate() {
                    for _ in 0..*n {
                        v = v.diff(&coords[slot]);
                    }
                }
                map.insert(a.clone(), v);
            }
        }
    }
    e.substitute(&map).unwrap()
}

#[test]
fn regular_wave_system_is_finite() {
    let p = problem("vars x y; dep u; fn F(u); fn eta(x, y, u); eq: u_xy = F;");
    let l = p.differential_function();
    let q = field(&p, "1", "1", "eta");
    let sys = determining_regular(&l, &q, &cfg()).unwrap();
    assert!(!sys.equations.is_empty() && sys.equations.len() <= 4);
    // translations along x - y are Lie symmetries; u∂_u is not for general F
    for e in &sys.equations {
        assert!(instantiate(e, "eta", &Expr::zero()).is_zero());
    }
    assert!(sys
        .equations
        .iter()
        .any(|e| is_zero(&instantiate(e, "eta", &expr(&p, "u"))).unwrap().is_nonzero()));
}

#[test]
fn trivial_first_order_template() {
    let p = problem("vars x y; dep u; fn eta(x, y, u); eq: u_x = 0;");
    let q = field(&p, "0", "1", "eta");
    let sys = determining_regular(&p.differential_function(), &q, &cfg()).unwrap();
    assert_eq!(sys.equations.len(), 1);
    assert!(same_equation(&sys.equations[0], &expr(&p, "eta_x")));
}

#[test]
fn solving_for_leaders() {
    let p = problem("vars x y; dep u; fn F(u) inverse G; fn zeta(x, y, u) assume nonzero zeta_u; fn h(x, y); eq: u_xy = F;");
    let u1 = Atom::Jet(1, 0);
    let e = expr(&p, "zeta_x + zeta_u*u_x - F");
    let s = solve_for_leader(&e, &u1, &cfg()).unwrap();
    assert_eq!(s.value, expr(&p, "(F - zeta_x)/zeta_u"));
    assert!(s.assumptions.is_empty());

    // on the zero co-order branch ζ does not depend on u
    let e = expr(&p, "h_x - F");
    let s = solve_for_leader(&e, &Atom::Jet(0, 0), &cfg()).unwrap();
    let f = p.function("F").unwrap();
    let inv = Arc::new(f.inverse_function().unwrap());
    assert_eq!(s.value, Expr::apply(&inv, vec![0], vec![expr(&p, "h_x")]));

    let e = expr(&p, "u_x^2 - 1");
    assert!(matches!(
        solve_for_leader(&e, &u1, &cfg()),
        Err(ReductionError::LeaderNotSolvable { .. })
    ));
}

#[test]
fn exponential_leader_is_inverted() {
    let p = problem(LIOUVILLE);
    let e = expr(&p, "x^2 - exp(u)");
    let s = solve_for_leader(&e, &Atom::Jet(0, 0), &cfg()).unwrap();
    assert_eq!(s.value, expr(&p, "ln(x^2)"));
}

#[test]
fn non_affine_leader_in_invariance_test() {
    let p = problem("vars x y; dep u; eq: u_x^2 + u_y = 1;");
    let q = field(&p, "0", "1", "0");
    let err = conditional_invariance_test(&p.differential_function(), &q, &cfg()).unwrap_err();
    assert!(matches!(err, ReductionError::NotAffineInLeader { .. }), "{err}");
}

#[test]
fn heat_ansatz_reduction() {
    let p = problem(HEAT);
    let l = p.differential_function();
    let q = field(&p, "0", "1", "u");
    let a = ansatz(&p, "phi*exp(x)", "t");
    let red = reduce_with_ansatz(&l, &q, &a, &cfg()).unwrap();
    assert_eq!(red.multiplier, expr(&p, "exp(x)"));
    assert_eq!(red.body, Expr::var("phi'").sub(&Expr::var("phi")));
    assert_eq!(red.essential_order, 1);
    assert!(red.exact);
    let weak = weak_coorder(&l, &q, &cfg()).unwrap();
    assert!(weak.weak_is_exact());
    assert_eq!(weak.weak_lower, red.essential_order);
}

#[test]
fn ultra_singular_ansatz_reduces_to_identity() {
    let p = problem(FLAT);
    let q = field(&p, "0", "1", "y");
    let a = ansatz(&p, "phi + y^2/2", "x");
    let red = reduce_with_ansatz(&p.differential_function(), &q, &a, &cfg()).unwrap();
    assert!(red.body.is_zero());
    assert_eq!(red.essential_order, -1);
}

#[test]
fn liouville_zero_coorder_ansatz_is_algebraic() {
    let p = problem(LIOUVILLE);
    let q = field(&p, "0", "1", "-2/(x + y)");
    let a = ansatz(&p, "phi - 2*ln(x + y)", "x");
    let red = reduce_with_ansatz(&p.differential_function(), &q, &a, &cfg()).unwrap();
    assert_eq!(red.essential_order, 0);
    assert!(same_equation(&red.body, &expr(&p, "2").sub(&Expr::var("phi").exp())));
}

#[test]
fn non_invariant_ansatz_is_rejected() {
    let p = problem(HEAT);
    let q = field(&p, "0", "1", "u");
    let a = ansatz(&p, "phi*x", "t");
    let err = reduce_with_ansatz(&p.differential_function(), &q, &a, &cfg()).unwrap_err();
    assert!(matches!(err, ReductionError::AnsatzNotInvariant { .. }));
}

#[test]
fn non_reduction_operator_leaves_invariant_residual() {
    let p = problem(HEAT);
    let q = field(&p, "0", "1", "t");
    let a = ansatz(&p, "phi + t*x", "t");
    let err = reduce_with_ansatz(&p.differential_function(), &q, &a, &cfg()).unwrap_err();
    assert!(matches!(err, ReductionError::ResidualNonInvariant { .. }), "{err}");
}

#[test]
fn slanted_invariant_is_rewritten() {
    let p = problem("vars x y; dep u; eq: u_x + u_y = u;");
    let q = field(&p, "1", "-1", "0");
    let a = ansatz(&p, "phi", "x + y");
    let red = reduce_with_ansatz(&p.differential_function(), &q, &a, &cfg()).unwrap();
    assert_eq!(red.essential_order, 1);
    let leaves = red.body.free_leaves();
    assert!(!leaves.contains(&Atom::var("x")) && !leaves.contains(&Atom::var("y")));
}

#[test]
fn phi_placeholder_is_a_plain_function_of_omega() {
    let f = UnknownFunction::new(PHI, vec![FormalArg::Var("omega".into())]).unwrap();
    assert_eq!(f.arity(), 1);
    let l = DifferentialFunction::new(Expr::jet(1, 0), Default::default());
    assert_eq!(l.ord(), 1);
}

#[test]
fn nonvanishing_associated_function_has_no_invariant_solutions() {
    let p = problem(LIOUVILLE);
    let err = invariance_check(&p.differential_function(), &field(&p, "1", "0", "0"), &cfg()).unwrap_err();
    assert!(matches!(err, ReductionError::EmptyManifold { .. }), "{err}");
}

#[test]
fn nonvanishing_factor_is_ignored_when_solving_for_the_leader() {
    let p = problem("vars t x; dep u; eq: u_t = exp(u_xx)*(u_x + u);");
    let check = invariance_check(&p.differential_function(), &field(&p, "1", "0", "0"), &cfg()).unwrap();
    assert_eq!(check.leader.unwrap().0, Atom::Jet(0, 1));
    assert_eq!(check.verdict, TriBool::ProvenZero);
}
