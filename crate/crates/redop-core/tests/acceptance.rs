//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion fails or exceeds its time budget.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{
    central_difference, random_evolution, random_expr, random_field, relative_error, Point,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redop_core::correspondence::{
    adjoint_operator, backlund_verify, coorder0_solution, verify_bijection, verify_family_solves,
    zeta_from_family, CoorderBranch, SolutionFamily, SurfaceSampling,
};
use redop_core::jet::{total_derivative, Axis, VectorField};
use redop_core::problem::{parse_expression, parse_problem, Problem};
use redop_core::reduction::{
    determining_singular, general_singular_equation, instantiate_zeta, reduce_with_ansatz,
    same_equation, CaseLabel,
};
use redop_core::singularity::{strong_coorder, weak_coorder, ReducedXi};
use redop_core::symbolic::{is_zero, Atom, Expr, Names, SampleConfig, TriBool};

/// Wall-clock budget of every criterion.
const TIME_BUDGET: Duration = Duration::from_secs(10);
/// Random evolution bodies, and fields per body and per branch of `τ`.
const EVOLUTION_BODIES: usize = 20;
const FIELDS_PER_BRANCH: usize = 10;
/// Implicit-surface samples per family: κ values times points per κ.
const SURFACE_SAMPLES: usize = 50;
const FD_CHECKS: usize = 200;
const FD_STEP: f64 = 1e-5;
const FD_TOLERANCE: f64 = 1e-6;
const NORMALIZATION_CHECKS: usize = 200;
const COMMUTATION_CHECKS: usize = 100;

type Outcome = Result<(), String>;

fn cfg() -> SampleConfig {
    SampleConfig::default()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus(name: &str) -> Problem {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../corpus/{name}.redop"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_problem(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn corpus_all() -> Vec<(String, Problem)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "redop"))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), corpus(&n))).collect()
}

fn problem(text: &str) -> Problem {
    parse_problem(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

fn expr(p: &Problem, text: &str) -> Expr {
    parse_expression(p, text, &["k".to_string()]).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Strong and weak co-orders of `∂_t` on the two third- and first-order
/// examples.
fn coorder_pair() -> Outcome {
    let third = corpus("third_order");
    let l = third.differential_function();
    let r = weak_coorder(&l, third.field("dt").unwrap(), &cfg()).map_err(err)?;
    ensure(r.strong == 2, || format!("third order: strong co-order {}", r.strong))?;
    ensure(r.weak_is_exact() && r.weak_lower == 1, || {
        format!("third order: weak co-order in [{}, {}]", r.weak_lower, r.weak_upper)
    })?;

    let first = corpus("first_order_t");
    let l = first.differential_function();
    let r = weak_coorder(&l, first.field("dt").unwrap(), &cfg()).map_err(err)?;
    ensure(r.strong == 2 && r.strong == l.ord(), || {
        format!("first order in t: strong co-order {} (ord {})", r.strong, l.ord())
    })?;
    ensure(r.weak_is_exact() && r.weak_lower == 1, || {
        format!("first order in t: weak co-order in [{}, {}]", r.weak_lower, r.weak_upper)
    })
}

/// Evolution equations: co-order `r` when `τ ≠ 0`, and 1 when `τ = 0`.
fn evolution_dichotomy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    for i in 0..EVOLUTION_BODIES {
        let r = 2 + (i % 3) as u32;
        let l = random_evolution(&mut rng, r);
        for tau_zero in [false, true] {
            let expected = if tau_zero { 1 } else { r as i32 };
            for _ in 0..FIELDS_PER_BRANCH {
                let q = random_field(&mut rng, tau_zero);
                let k = strong_coorder(&l, &q, &cfg()).map_err(err)?;
                ensure(k == expected, || {
                    format!("{} with {}: co-order {k}, expected {expected}", l.body(), q.render(l.names()))
                })?;
            }
        }
    }
    Ok(())
}

const HEAT: &str = "vars t x; dep u; fn zeta(t, x, u); eq: u_t = u_xx;";
const WAVE: &str = "vars x y; dep u; fn F(u); fn zeta(x, y, u); eq: u_xy = F;";

/// The heat determining equation against its hand expansion and on
/// concrete operators.
fn heat_determining() -> Outcome {
    let p = problem(HEAT);
    let l = p.differential_function();
    let sys = determining_singular(&l, ReducedXi::Zero, &cfg()).map_err(err)?;
    ensure(sys.label == CaseLabel::Evolution && sys.equations.len() == 1, || {
        format!("case {:?} with {} equations", sys.label, sys.equations.len())
    })?;
    let eq = &sys.equations[0];
    let hand = expr(&p, "zeta_t - zeta_xx - 2*zeta*zeta_xu - zeta^2*zeta_uu");
    ensure(same_equation(eq, &hand), || format!("equation {eq}"))?;
    for z in ["u", "x", "u/x", "-x*u/(2*t)"] {
        let r = instantiate_zeta(eq, &expr(&p, z), &p.names).map_err(err)?;
        let v = is_zero(&r).map_err(err)?;
        ensure(v == TriBool::ProvenZero, || format!("zeta = {z}: {v:?}"))?;
    }
    let r = instantiate_zeta(eq, &expr(&p, "t"), &p.names).map_err(err)?;
    let v = is_zero(&r).map_err(err)?;
    ensure(v.is_nonzero(), || format!("zeta = t: {v:?}"))
}

/// The wave determining equation against its hand expansion, through both
/// the case dispatch and the general singular pipeline.
fn wave_determining() -> Outcome {
    let p = problem(WAVE);
    let l = p.differential_function();
    let sys = determining_singular(&l, ReducedXi::Zero, &cfg()).map_err(err)?;
    ensure(sys.label == CaseLabel::Wave, || format!("case {:?}", sys.label))?;
    let hand = expr(
        &p,
        "zeta_xy + zeta*zeta_xu + (zeta_yu + zeta*zeta_uu)*(F - zeta_x)/zeta_u + zeta_u*F - zeta*F_u",
    );
    ensure(same_equation(&sys.equations[0], &hand), || format!("equation {}", sys.equations[0]))?;
    let (g, general) = general_singular_equation(&l, ReducedXi::Zero, &cfg()).map_err(err)?;
    ensure(g.value == expr(&p, "(F - zeta_x)/zeta_u"), || format!("G = {}", g.value))?;
    ensure(same_equation(&general, &hand), || format!("general pipeline gave {general}"))
}

const LIOUVILLE: &str = "vars x y; dep u; eq: u_xy = exp(u);";

/// Liouville end to end: family, operator, adjoint and the co-order 0
/// operator with its single invariant solution.
fn liouville() -> Outcome {
    let p = problem(LIOUVILLE);
    let l = p.differential_function();
    let family = SolutionFamily {
        f: expr(&p, "ln(2/(x + y + k)^2)"),
        param: "k".into(),
        inverse: expr(&p, "sqrt(2)*exp(-u/2) - x - y"),
    };
    family.validate(&cfg()).map_err(err)?;
    let rep = verify_bijection(&l, &family, ReducedXi::Zero, &cfg()).map_err(err)?;
    ensure(rep.certified(), || format!("bijection not certified: {rep:?}"))?;
    let zeta = expr(&p, "-sqrt(2)*exp(u/2)");
    ensure(rep.zeta == zeta, || format!("zeta = {}", rep.zeta))?;

    let f = expr(&p, "exp(u)");
    let star = adjoint_operator(&zeta, &f, CoorderBranch::One, Axis::Two, &p.names, &cfg()).map_err(err)?;
    let back = adjoint_operator(&star, &f, CoorderBranch::One, Axis::One, &p.names, &cfg()).map_err(err)?;
    ensure(same_equation(&back, &zeta), || format!("adjoint of adjoint is {back}"))?;

    // co-order 0: the adjoint is ζ_11/ζ_1, computed here directly
    let zeta0 = expr(&p, "-2/(x + y)");
    let x = Atom::Var("x".into());
    let ratio = zeta0.diff(&x).diff(&x).div(&zeta0.diff(&x)).map_err(err)?;
    let star0 = adjoint_operator(&zeta0, &f, CoorderBranch::Zero, Axis::Two, &p.names, &cfg()).map_err(err)?;
    ensure(star0 == ratio && star0 == zeta0, || format!("co-order 0 adjoint {star0}, ratio {ratio}"))?;
    let s = coorder0_solution(&l, &zeta0, ReducedXi::Zero, &cfg()).map_err(err)?;
    let expected = expr(&p, "ln(2/(x + y)^2)");
    ensure(s.solution == expected && s.verdict == TriBool::ProvenZero, || {
        format!("invariant solution {} ({:?})", s.solution, s.verdict)
    })?;
    let single = SolutionFamily {
        f: s.solution,
        param: "k".into(),
        inverse: Expr::zero(),
    };
    let v = verify_family_solves(&l, &single, &cfg()).map_err(err)?;
    ensure(v == TriBool::ProvenZero, || format!("invariant solution residual {v:?}"))
}

/// `u_xy = 0` with `ζ = y`: co-order −1 and an identity after reduction.
fn ultra_singular() -> Outcome {
    let p = corpus("ultra");
    let l = p.differential_function();
    let q = p.field("ultra").unwrap();
    let r = weak_coorder(&l, q, &cfg()).map_err(err)?;
    ensure(r.weak_is_exact() && r.weak_lower == -1, || {
        format!("weak co-order in [{}, {}]", r.weak_lower, r.weak_upper)
    })?;
    let red = reduce_with_ansatz(&l, q, p.ansatz("ultra").unwrap(), &cfg()).map_err(err)?;
    ensure(red.body.is_zero() && red.essential_order == -1, || {
        format!("reduced {} of order {}", red.body, red.essential_order)
    })
}

/// Hodograph round trips for the heat and Liouville families.
fn backlund() -> Outcome {
    let sampling = SurfaceSampling::default();
    let cases = [
        (HEAT, "u", "u*exp(-t - x)"),
        (LIOUVILLE, "-sqrt(2)*exp(u/2)", "sqrt(2)*exp(-u/2) - x - y"),
    ];
    for (text, zeta, inverse) in cases {
        let p = problem(text);
        let rep = backlund_verify(
            &p.differential_function(),
            &expr(&p, zeta),
            &expr(&p, inverse),
            ReducedXi::Zero,
            &sampling,
            &cfg(),
        )
        .map_err(err)?;
        ensure(rep.first == TriBool::ProvenZero && rep.second == TriBool::ProvenZero, || {
            format!("zeta = {zeta}: identities {:?}, {:?}", rep.first, rep.second)
        })?;
        ensure(rep.surface_identity == TriBool::ProvenZero, || {
            format!("zeta = {zeta}: surface identity {:?}", rep.surface_identity)
        })?;
        ensure(rep.samples.len() == SURFACE_SAMPLES && rep.all_samples_zero(), || {
            let worst = rep.samples.iter().map(|s| s.residual.abs()).fold(0.0, f64::max);
            format!("zeta = {zeta}: {} samples, worst residual {worst:e}", rep.samples.len())
        })?;
    }
    Ok(())
}

/// Number of parameters of the invariant solutions of `(0, 1, ζ)`: 1 when
/// a certified family produces `ζ`, 0 when `ζ` has a single invariant
/// solution, `None` otherwise.
fn parameter_count(p: &Problem, zeta: &Expr) -> Result<Option<i32>, String> {
    let l = p.differential_function();
    for fam in &p.families {
        let z = zeta_from_family(&fam.family, ReducedXi::Zero, &p.names, &cfg()).map_err(err)?;
        if same_equation(&z, zeta) {
            let rep = verify_bijection(&l, &fam.family, ReducedXi::Zero, &cfg()).map_err(err)?;
            return Ok(rep.certified().then_some(1));
        }
    }
    match coorder0_solution(&l, zeta, ReducedXi::Zero, &cfg()) {
        Ok(s) if s.verdict == TriBool::ProvenZero => Ok(Some(0)),
        _ => Ok(None),
    }
}

fn is_reduced_form(q: &VectorField) -> bool {
    q.xi[0].is_zero() && q.xi[1] == Expr::one()
}

/// Every corpus reduction: essential order of the reduced equation equals
/// the exact weak co-order, which equals the number of parameters of the
/// invariant solutions.
fn corpus_orders() -> Outcome {
    let mut checked = 0;
    let mut families_used = 0;
    let mut families_total = 0;
    for (name, p) in corpus_all() {
        let l = p.differential_function();
        families_total += p.families.len();
        for a in &p.ansatzes {
            let Some(q) = p.field(&a.name) else { continue };
            let r = weak_coorder(&l, q, &cfg()).map_err(err)?;
            ensure(r.weak_is_exact(), || {
                format!("{name}/{}: weak co-order in [{}, {}]", a.name, r.weak_lower, r.weak_upper)
            })?;
            let red = reduce_with_ansatz(&l, q, &a.ansatz, &cfg()).map_err(err)?;
            ensure(red.essential_order == r.weak_lower, || {
                format!(
                    "{name}/{}: essential order {} but weak co-order {}",
                    a.name, red.essential_order, r.weak_lower
                )
            })?;
            checked += 1;
            if r.weak_lower < 0 {
                continue;
            }
            ensure(is_reduced_form(q), || format!("{name}/{}: field not in reduced form", a.name))?;
            let count = parameter_count(&p, &q.eta)?;
            ensure(count == Some(r.weak_lower), || {
                format!("{name}/{}: parameters {count:?}, weak co-order {}", a.name, r.weak_lower)
            })?;
            if count == Some(1) {
                families_used += 1;
            }
        }
    }
    ensure(checked >= 8, || format!("only {checked} corpus reductions"))?;
    ensure(families_used == families_total, || {
        format!("{families_used} of {families_total} corpus families have a reduction")
    })
}

/// Derivatives against finite differences, idempotent normalization and
/// commuting total derivatives on random expressions.
fn kernel_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x50de);
    let atoms = common::leaves();
    let mut checked = 0;
    while checked < FD_CHECKS {
        let e = random_expr(&mut rng, 3);
        let v = atoms[rng.random_range(0..atoms.len())].clone();
        let d = e.diff(&v);
        let pt = Point::random(&mut rng, &atoms);
        let exact = d.eval(&mut pt.clone());
        let fd = central_difference(&e, &v, &pt, FD_STEP);
        if !exact.is_finite() || !fd.is_finite() {
            continue;
        }
        let rel = relative_error(exact, fd);
        ensure(rel < FD_TOLERANCE, || format!("d/d{v} of {e}: {exact} vs {fd}"))?;
        checked += 1;
    }
    for _ in 0..NORMALIZATION_CHECKS {
        let e = random_expr(&mut rng, 3);
        let again = e.normalize().map_err(err)?;
        ensure(again == e, || format!("{e} normalizes to {again}"))?;
    }
    let names = Names::default();
    for _ in 0..COMMUTATION_CHECKS {
        let e = random_expr(&mut rng, 3);
        let a = total_derivative(&total_derivative(&e, Axis::One, &names), Axis::Two, &names);
        let b = total_derivative(&total_derivative(&e, Axis::Two, &names), Axis::One, &names);
        ensure(a == b, || format!("D1 D2 and D2 D1 differ on {e}"))?;
    }
    Ok(())
}

#[test]
fn acceptance_criteria() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "strong and weak co-orders of d/dt", coorder_pair),
        (2, "evolution co-order dichotomy", evolution_dichotomy),
        (3, "heat determining equation", heat_determining),
        (4, "wave determining equation", wave_determining),
        (5, "Liouville family, operator and adjoints", liouville),
        (6, "ultra-singular reduction", ultra_singular),
        (7, "hodograph round trips", backlund),
        (8, "corpus orders and parameter counts", corpus_orders),
        (9, "kernel soundness", kernel_soundness),
    ];
    let mut failed = Vec::new();
    for (n, title, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|()| {
            ensure(elapsed <= TIME_BUDGET, || format!("took {elapsed:?}, budget {TIME_BUDGET:?}"))
        });
        match outcome {
            Ok(()) => println!("criterion {n}: PASS {title} ({} ms)", elapsed.as_millis()),
            Err(e) => {
                println!("criterion {n}: FAIL {title} ({} ms): {e}", elapsed.as_millis());
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
