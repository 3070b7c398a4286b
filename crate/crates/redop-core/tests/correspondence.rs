use redop_core::correspondence::{
    adjoint_operator, backlund_verify, coorder0_solution, planned_samples, verify_bijection,
    verify_family_solves, zeta_from_family, CoorderBranch, CorrespondenceError, SolutionFamily,
    SurfaceSampling,
};
use redop_core::jet::Axis;
use redop_core::problem::{parse_expression, parse_problem, Problem};
use redop_core::reduction::{reduce_with_ansatz, same_equation, Ansatz, ReductionError, PHI};
use redop_core::singularity::{reduced_field, weak_coorder, ReducedXi};
use redop_core::symbolic::{is_zero, Expr, SampleConfig, SymbolicError, TriBool};

fn cfg() -> SampleConfig {
    SampleConfig::default()
}

fn problem(text: &str) -> Problem {
    parse_problem(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

fn expr(p: &Problem, text: &str) -> Expr {
    parse_expression(p, text, &["k".to_string()]).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn family(p: &Problem, f: &str, inverse: &str) -> SolutionFamily {
    SolutionFamily {
        f: expr(p, f),
        param: "k".into(),
        inverse: expr(p, inverse),
    }
}

const HEAT: &str = "vars t x; dep u; eq: u_t = u_xx;";
const LIOUVILLE: &str = "vars x y; dep u; eq: u_xy = exp(u);";
const LIOUVILLE_FAMILY: &str = "ln(2/(x + y + k)^2)";
const LIOUVILLE_INVERSE: &str = "sqrt(2)*exp(-u/2) - x - y";

#[test]
fn zeta_from_heat_families() {
    let p = problem(HEAT);
    let fam = family(&p, "k*exp(t + x)", "u*exp(-t - x)");
    fam.validate(&cfg()).unwrap();
    assert_eq!(zeta_from_family(&fam, ReducedXi::Zero, &p.names, &cfg()).unwrap(), expr(&p, "u"));
    let fam = family(&p, "x^2/2 + t + k", "u - x^2/2 - t");
    fam.validate(&cfg()).unwrap();
    assert_eq!(zeta_from_family(&fam, ReducedXi::Zero, &p.names, &cfg()).unwrap(), expr(&p, "x"));
}

#[test]
fn zeta_from_liouville_family() {
    let p = problem(LIOUVILLE);
    let fam = family(&p, LIOUVILLE_FAMILY, LIOUVILLE_INVERSE);
    fam.validate(&cfg()).unwrap();
    let zeta = zeta_from_family(&fam, ReducedXi::Zero, &p.names, &cfg()).unwrap();
    assert_eq!(zeta, expr(&p, "-sqrt(2)*exp(u/2)"));
}

#[test]
fn degenerate_and_inconsistent_inverses() {
    let p = problem(HEAT);
    let fam = family(&p, "k*exp(t + x)", "t");
    assert_eq!(
        zeta_from_family(&fam, ReducedXi::Zero, &p.names, &cfg()).unwrap_err(),
        CorrespondenceError::DegenerateInverse
    );
    let fam = family(&p, "k*exp(t + x)", "u*exp(t)");
    assert!(matches!(
        fam.validate(&cfg()),
        Err(CorrespondenceError::InconsistentInverse { .. })
    ));
    let fam = family(&p, "exp(t + x)", "u*exp(-t - x)");
    assert!(fam.validate(&cfg()).is_err());
}

#[test]
fn family_solutions() {
    let p = problem(HEAT);
    let l = p.differential_function();
    let ok = family(&p, "k*exp(t + x)", "u*exp(-t - x)");
    assert_eq!(verify_family_solves(&l, &ok, &cfg()).unwrap(), TriBool::ProvenZero);
    let bad = family(&p, "k*t", "u/t");
    assert!(verify_family_solves(&l, &bad, &cfg()).unwrap().is_nonzero());

    let p = problem(LIOUVILLE);
    let fam = family(&p, LIOUVILLE_FAMILY, LIOUVILLE_INVERSE);
    assert_eq!(
        verify_family_solves(&p.differential_function(), &fam, &cfg()).unwrap(),
        TriBool::ProvenZero
    );
}

#[test]
fn bijections_are_certified() {
    let p = problem(HEAT);
    let l = p.differential_function();
    for (f, inv) in [("k*exp(t + x)", "u*exp(-t - x)"), ("k*x", "u/x"), ("x^2/2 + t + k", "u - x^2/2 - t")] {
        let rep = verify_bijection(&l, &family(&p, f, inv), ReducedXi::Zero, &cfg()).unwrap();
        assert!(rep.certified(), "{f}: {rep:?}");
        assert!(rep.zeta_star.is_none());
    }
    let p = problem(LIOUVILLE);
    let fam = family(&p, LIOUVILLE_FAMILY, LIOUVILLE_INVERSE);
    let rep = verify_bijection(&p.differential_function(), &fam, ReducedXi::Zero, &cfg()).unwrap();
    assert!(rep.certified());
    assert_eq!(rep.zeta_star.unwrap(), expr(&p, "-sqrt(2)*exp(u/2)"));
}

#[test]
fn wrong_family_is_not_certified() {
    let p = problem(HEAT);
    let rep = verify_bijection(
        &p.differential_function(),
        &family(&p, "k*t", "u/t"),
        ReducedXi::Zero,
        &cfg(),
    )
    .unwrap();
    assert!(!rep.certified());
    assert!(rep.family_solves.is_nonzero());
    assert_eq!(rep.invariance, TriBool::ProvenZero);
}

#[test]
fn adjoint_examples() {
    let p = problem(LIOUVILLE);
    let f = expr(&p, "exp(u)");
    let zeta = expr(&p, "-sqrt(2)*exp(u/2)");
    let star = adjoint_operator(&zeta, &f, CoorderBranch::One, Axis::Two, &p.names, &cfg()).unwrap();
    assert_eq!(star, zeta);
    let back = adjoint_operator(&star, &f, CoorderBranch::One, Axis::One, &p.names, &cfg()).unwrap();
    assert_eq!(back, zeta);

    let zeta0 = expr(&p, "-2/(x + y)");
    let star = adjoint_operator(&zeta0, &f, CoorderBranch::Zero, Axis::Two, &p.names, &cfg()).unwrap();
    assert_eq!(star, expr(&p, "-2/(x + y)"));
    let err = adjoint_operator(&zeta0, &f, CoorderBranch::One, Axis::Two, &p.names, &cfg()).unwrap_err();
    assert!(matches!(err, CorrespondenceError::WrongCoorderBranch { .. }));
    let err = adjoint_operator(&zeta, &f, CoorderBranch::Zero, Axis::Two, &p.names, &cfg()).unwrap_err();
    assert!(matches!(err, CorrespondenceError::WrongCoorderBranch { .. }));
}

#[test]
fn adjoint_is_an_involution_on_wave_solutions() {
    // u_xy = u has the family u = k*exp(x + y) with ζ = u on both sides.
    let p = problem("vars x y; dep u; eq: u_xy = u;");
    let f = expr(&p, "u");
    let fam = family(&p, "k*exp(2*x + y/2)", "u*exp(-2*x - y/2)");
    let zeta = zeta_from_family(&fam, ReducedXi::Zero, &p.names, &cfg()).unwrap();
    let star = adjoint_operator(&zeta, &f, CoorderBranch::One, Axis::Two, &p.names, &cfg()).unwrap();
    assert_eq!(star, expr(&p, "2*u"));
    let back = adjoint_operator(&star, &f, CoorderBranch::One, Axis::One, &p.names, &cfg()).unwrap();
    assert!(same_equation(&back, &zeta));
}

#[test]
fn zero_coorder_solutions() {
    let p = problem(LIOUVILLE);
    let l = p.differential_function();
    let s = coorder0_solution(&l, &expr(&p, "-2/(x + y)"), ReducedXi::Zero, &cfg()).unwrap();
    assert_eq!(s.solution, expr(&p, "ln(2/(x + y)^2)"));
    assert_eq!(s.verdict, TriBool::ProvenZero);
    let err = coorder0_solution(&l, &expr(&p, "1"), ReducedXi::Zero, &cfg()).unwrap_err();
    assert!(matches!(err, CorrespondenceError::Reduction(ReductionError::Symbolic(SymbolicError::Domain { .. }))), "{err:?}");

    let p = problem("vars x y; dep u; eq: u_xy = u;");
    let s = coorder0_solution(&p.differential_function(), &expr(&p, "y"), ReducedXi::Zero, &cfg()).unwrap();
    assert!(s.solution.is_zero());
    assert!(s.verdict.is_nonzero());
}

#[test]
fn zero_coorder_operator_has_a_single_invariant_solution() {
    let p = problem(LIOUVILLE);
    let l = p.differential_function();
    let q = reduced_field(ReducedXi::Zero, &expr(&p, "-2/(x + y)"));
    let report = weak_coorder(&l, &q, &cfg()).unwrap();
    assert!(report.weak_is_exact());
    assert_eq!(report.weak_lower, 0);
    let ansatz = Ansatz {
        body: parse_expression(&p, "phi - 2*ln(x + y)", &[PHI.to_string()]).unwrap(),
        omega: expr(&p, "x"),
    };
    let red = reduce_with_ansatz(&l, &q, &ansatz, &cfg()).unwrap();
    assert_eq!(red.essential_order, report.weak_lower);
}

#[test]
fn backlund_round_trips() {
    let sampling = SurfaceSampling::default();
    let p = problem(HEAT);
    let rep = backlund_verify(
        &p.differential_function(),
        &expr(&p, "u"),
        &expr(&p, "u*exp(-t - x)"),
        ReducedXi::Zero,
        &sampling,
        &cfg(),
    )
    .unwrap();
    assert_eq!((rep.first, rep.second), (TriBool::ProvenZero, TriBool::ProvenZero));
    assert_eq!(rep.surface_identity, TriBool::ProvenZero);
    assert_eq!(rep.samples.len(), planned_samples(&sampling));
    assert!(rep.all_samples_zero());

    let p = problem(LIOUVILLE);
    let rep = backlund_verify(
        &p.differential_function(),
        &expr(&p, "-sqrt(2)*exp(u/2)"),
        &expr(&p, LIOUVILLE_INVERSE),
        ReducedXi::Zero,
        &sampling,
        &cfg(),
    )
    .unwrap();
    assert_eq!((rep.first, rep.second), (TriBool::ProvenZero, TriBool::ProvenZero));
    assert_eq!(rep.samples.len(), 50);
    assert!(rep.all_samples_zero());
}

#[test]
fn backlund_detects_wrong_inverse() {
    let p = problem(HEAT);
    let rep = backlund_verify(
        &p.differential_function(),
        &expr(&p, "u"),
        &expr(&p, "u"),
        ReducedXi::Zero,
        &SurfaceSampling::default(),
        &cfg(),
    )
    .unwrap();
    assert!(rep.first.is_nonzero());
    assert_eq!(is_zero(&expr(&p, "u")).unwrap(), TriBool::ProbablyNonZero);
}
