//! Conditional invariance, determining equations and ansatz reductions.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jet::{apply_prolonged, ord, Axis, DifferentialFunction, JetError, MultiIndex, VectorField};
use crate::singularity::{
    eliminate_along, eliminate_on_q, reduced_field, split_atoms, split_coefficients, zeta_function,
    ReducedXi, SingularityError,
};
use crate::symbolic::{
    is_zero_with, Atom, Expr, FormalArg, Names, Poly, SampleConfig, SymbolicError, TriBool,
    UnknownFunction,
};

/// Placeholder name standing for `φ(ω)` inside an ansatz body.
pub const PHI: &str = "phi";

/// A user-supplied ansatz `u = f(x, φ(ω))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ansatz {
    pub body: Expr,
    pub omega: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("cannot isolate the leader {leader}; unsolved residual {residual}")]
    NotAffineInLeader { leader: String, residual: String },
    #[error("cannot solve for {leader}: {detail}")]
    LeaderNotSolvable { leader: String, detail: String },
    #[error("the associated function {associated} never vanishes, so no solution is invariant")]
    EmptyManifold { associated: String },
    #[error("the reduced-form set has co-order {k}, not a singular co-order 1")]
    SetNotFirstCoorder { k: i32 },
    #[error("residual is not polynomial in the jet variable {atom}")]
    NonPolynomialSplit { atom: String },
    #[error("reduced body still depends on the non-invariant variable: {residual}")]
    ResidualNonInvariant { residual: String },
    #[error("ansatz is not invariant under the field: {detail}")]
    AnsatzNotInvariant { detail: String },
    #[error("specialized {label} equation differs from the general pipeline")]
    SpecializationMismatch { label: CaseLabel },
    #[error(transparent)]
    Singularity(#[from] SingularityError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Result of solving `e = 0` for one variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeaderSolution {
    pub value: Expr,
    /// Divisors that were only sampled, not proven, to be nonzero.
    pub assumptions: Vec<Expr>,
}

fn carries(a: &Atom, leader: &Atom) -> bool {
    a == leader || (a.is_kernel() || matches!(a, Atom::Apply(_))) && Expr::atom(a.clone()).free_leaves().contains(leader)
}

/// Solves `e = 0` for `leader` when `e` is affine in it, or affine in a
/// single kernel around it that has a known inverse (`exp`, `ln`, or an
/// unknown function with a declared inverse).
pub fn solve_for_leader(
    e: &Expr,
    leader: &Atom,
    cfg: &SampleConfig,
) -> Result<LeaderSolution, ReductionError> {
    let fail = |detail: &str| ReductionError::LeaderNotSolvable {
        leader: leader.to_string(),
        detail: detail.to_string(),
    };
    let num = e.numer();
    let found: BTreeSet<Atom> = num.atoms().into_iter().filter(|a| carries(a, leader)).collect();
    let carrier = match found.len() {
        0 => return Err(fail("does not occur")),
        1 => found.into_iter().next().expect("one element"),
        _ => return Err(fail("occurs in more than one place")),
    };
    if num.degree_in(&carrier) != 1 {
        return Err(fail("not affine"));
    }
    let coeffs = num.coefficients_in(&carrier);
    let b = Expr::poly(coeffs[0].clone());
    let a = Expr::poly(coeffs[1].clone());
    let mut assumptions = Vec::new();
    match is_zero_with(&a, cfg)? {
        TriBool::ProvenNonZero => {}
        TriBool::ProbablyNonZero => assumptions.push(a.clone()),
        _ => return Err(fail("coefficient vanishes")),
    }
    let value = b.neg().div(&a)?;
    if carrier == *leader {
        return Ok(LeaderSolution { value, assumptions });
    }
    let inner = match &carrier {
        Atom::Exp(arg) => arg.sub(&value.ln()?),
        Atom::Ln(arg) => arg.sub(&value.exp()),
        Atom::Apply(app) if app.args.len() == 1 && app.index.iter().all(|i| *i == 0) => {
            let Some(inv) = app.func.inverse_function() else {
                return Err(fail(&format!("{} has no declared inverse", app.func.name)));
            };
            app.args[0].sub(&Expr::apply(&Arc::new(inv), vec![0], vec![value]))
        }
        _ => return Err(fail(&format!("{carrier} has no inverse"))),
    };
    let mut inner_solution = solve_for_leader(&inner, leader, cfg)?;
    inner_solution.assumptions.extend(assumptions);
    Ok(inner_solution)
}

/// Highest-order jet variable of `e`, or `u` when only `u` occurs.
fn leader_of(e: &Expr) -> Option<Atom> {
    e.free_leaves()
        .into_iter()
        .filter(|a| matches!(a, Atom::Jet(..)))
        .max_by_key(|a| (a.jet_order(), a.clone()))
}

/// `Q_(r)L` restricted to the manifold `L ∩ Q_(r)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvarianceCheck {
    pub verdict: TriBool,
    pub residual: Expr,
    pub associated: Expr,
    pub axis: Axis,
    pub leader: Option<(Atom, Expr)>,
    pub assumptions: Vec<Expr>,
}

fn restricted_residual(
    l: &DifferentialFunction,
    q: &VectorField,
    elimination: crate::singularity::EliminationResult,
    cfg: &SampleConfig,
) -> Result<(Expr, Option<(Atom, Expr)>, Vec<Expr>, Expr, Axis), ReductionError> {
    let applied = apply_prolonged(q, l)?;
    let restricted = crate::singularity::restrict_to_q(l.names(), q, elimination.axis, &applied)?;
    let hat = elimination.associated.body().clone();
    // The manifold `L̂ = 0` is unchanged by a nonvanishing factor, and the
    // factor may hide the leader inside a kernel that never vanishes.
    let (_, core) = crate::singularity::extract_multiplier(&hat);
    if crate::symbolic::provably_nonvanishing(&core) {
        return Err(ReductionError::EmptyManifold {
            associated: hat.to_string(),
        });
    }
    let Some(leader) = leader_of(&core) else {
        return Ok((restricted, None, Vec::new(), hat, elimination.axis));
    };
    let solution = solve_for_leader(&core, &leader, cfg).map_err(|err| match err {
        ReductionError::LeaderNotSolvable { leader, .. } => ReductionError::NotAffineInLeader {
            leader,
            residual: restricted.to_string(),
        },
        other => other,
    })?;
    let residual = restricted.substitute_one(&leader, &solution.value)?;
    Ok((
        residual,
        Some((leader, solution.value)),
        solution.assumptions,
        hat,
        elimination.axis,
    ))
}

/// Eliminates on `Q_(r)`, solves `L̂ = 0` for its leader and tests the
/// remaining residual of the conditional invariance criterion.
pub fn invariance_check(
    l: &DifferentialFunction,
    q: &VectorField,
    cfg: &SampleConfig,
) -> Result<InvarianceCheck, ReductionError> {
    let elimination = eliminate_on_q(l, q, cfg)?;
    let (residual, leader, assumptions, associated, axis) = restricted_residual(l, q, elimination, cfg)?;
    let verdict = is_zero_with(&residual, cfg)?;
    Ok(InvarianceCheck {
        verdict,
        residual,
        associated,
        axis,
        leader,
        assumptions,
    })
}

pub fn conditional_invariance_test(
    l: &DifferentialFunction,
    q: &VectorField,
    cfg: &SampleConfig,
) -> Result<TriBool, ReductionError> {
    Ok(invariance_check(l, q, cfg)?.verdict)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseLabel {
    SingularGeneral,
    Evolution,
    Wave,
    RegularSplit,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseLabel::SingularGeneral => "singular-general",
            CaseLabel::Evolution => "evolution",
            CaseLabel::Wave => "wave",
            CaseLabel::RegularSplit => "regular-split",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeterminingSystem {
    pub label: CaseLabel,
    pub equations: Vec<Expr>,
    pub g: Option<Expr>,
    pub assumptions: Vec<Expr>,
}

/// Monic numerator; two equations agree when their normal forms are equal.
pub fn equation_normal_form(e: &Expr) -> Poly {
    e.numer().make_monic()
}

pub fn same_equation(a: &Expr, b: &Expr) -> bool {
    equation_normal_form(a) == equation_normal_form(b)
}

fn check_free_of_jets(equations: &[Expr]) -> Result<(), ReductionError> {
    for e in equations {
        if let Some(a) = e.free_leaves().into_iter().find(|a| a.jet_order().is_some_and(|n| n > 0)) {
            return Err(ReductionError::NonPolynomialSplit { atom: a.to_string() });
        }
    }
    Ok(())
}

/// `H` when `L = c·(u_{1,0} − H)` with `H` free of derivatives along axis 1.
pub fn evolution_rhs(l: &DifferentialFunction) -> Option<Expr> {
    let body = l.body();
    let c = body.diff(&Atom::Jet(1, 0)).constant_value()?;
    if c == num_traits::Zero::zero() {
        return None;
    }
    let h = Expr::jet(1, 0).sub(&body.scale(&c.recip()));
    let clean = h
        .free_leaves()
        .iter()
        .all(|a| !matches!(a, Atom::Jet(p, _) if *p > 0));
    clean.then_some(h)
}

/// `F` when `L = c·(u_{1,1} − F(u))`.
pub fn wave_rhs(l: &DifferentialFunction) -> Option<Expr> {
    let body = l.body();
    let c = body.diff(&Atom::Jet(1, 1)).constant_value()?;
    if c == num_traits::Zero::zero() {
        return None;
    }
    let f = Expr::jet(1, 1).sub(&body.scale(&c.recip()));
    let clean = f
        .free_leaves()
        .iter()
        .all(|a| matches!(a, Atom::Jet(0, 0) | Atom::Apply(_)));
    clean.then_some(f)
}

fn coordinate_atoms(names: &Names) -> [Atom; 3] {
    [
        Atom::Var(names.x[0].clone()),
        Atom::Var(names.x[1].clone()),
        Atom::Jet(0, 0),
    ]
}

/// The evolution-case determining equation
/// `ζ_1 + ζ_u H̃ − H̃_2 − ζH̃_u` with `u_{0,k} ↦ (∂_2 + ζ∂_u)^{k−1}ζ` in `H`.
pub fn evolution_determining_equation(h: &Expr, names: &Names) -> Result<Expr, ReductionError> {
    let zeta = zeta_function(names).formal_symbol();
    let along = VectorField {
        xi: [Expr::zero(), Expr::one()],
        eta: zeta.clone(),
    };
    let top = ord(h).max(0) as u32;
    let mut map = HashMap::new();
    let mut current = zeta.clone();
    for k in 1..=top {
        map.insert(Atom::Jet(0, k), current.clone());
        current = along.apply(&current, names);
    }
    let h_tilde = h.substitute(&map)?;
    let [x1, x2, u] = coordinate_atoms(names);
    Ok(zeta
        .diff(&x1)
        .add(&zeta.diff(&u).mul(&h_tilde))
        .sub(&h_tilde.diff(&x2))
        .sub(&zeta.mul(&h_tilde.diff(&u))))
}

/// The wave-case determining equation for `u_{1,1} = F(u)`, as
/// `lhs − rhs` of
/// `ζ_12 + ζζ_1u + (ζ_2u + ζζ_uu)(F − ζ_1)/ζ_u + ζ_u F = ζF_u`.
pub fn wave_determining_equation(f: &Expr, names: &Names) -> Result<Expr, ReductionError> {
    let zf = zeta_function(names);
    let z = |i: u32, j: u32, k: u32| zf.symbol(vec![i, j, k]);
    let zeta = z(0, 0, 0);
    let f_u = f.diff(&Atom::Jet(0, 0));
    let middle = z(0, 1, 1)
        .add(&zeta.mul(&z(0, 0, 2)))
        .mul(&f.sub(&z(1, 0, 0)))
        .div(&z(0, 0, 1))?;
    Ok(z(1, 1, 0)
        .add(&zeta.mul(&z(1, 0, 1)))
        .add(&middle)
        .add(&z(0, 0, 1).mul(f))
        .sub(&zeta.mul(&f_u)))
}

/// Singular-set residual
/// `ζ_1 + ζ_u G − (ξ_1 + ξ_u G)G − ξG_1 − G_2 − ζG_u` of the set
/// `{ξ∂₁ + ∂₂ + ζ∂_u}` together with the solved `u_1 = G^ζ`.
pub fn general_singular_equation(
    l: &DifferentialFunction,
    xi: ReducedXi,
    cfg: &SampleConfig,
) -> Result<(LeaderSolution, Expr), ReductionError> {
    let names = l.names();
    let zeta = zeta_function(names).formal_symbol();
    let q = reduced_field(xi, &zeta);
    let hat = eliminate_along(l, &q, Axis::Two)?.associated;
    let k = hat.ord();
    if k != 1 || k >= l.ord() {
        return Err(ReductionError::SetNotFirstCoorder { k });
    }
    let solution = solve_for_leader(hat.body(), &Atom::Jet(1, 0), cfg)?;
    let g = &solution.value;
    let [x1, x2, u] = coordinate_atoms(names);
    let xi_e = xi.expr();
    let equation = zeta
        .diff(&x1)
        .add(&zeta.diff(&u).mul(g))
        .sub(&xi_e.diff(&x1).add(&xi_e.diff(&u).mul(g)).mul(g))
        .sub(&xi_e.mul(&g.diff(&x1)))
        .sub(&g.diff(&x2))
        .sub(&zeta.mul(&g.diff(&u)));
    Ok((solution, equation))
}

/// The single determining equation of a first co-order singular set,
/// in the specialized evolution or wave form when `L` has that shape.
pub fn determining_singular(
    l: &DifferentialFunction,
    xi: ReducedXi,
    cfg: &SampleConfig,
) -> Result<DeterminingSystem, ReductionError> {
    let names = l.names();
    let (solution, general) = general_singular_equation(l, xi, cfg)?;
    let specialized = match xi {
        ReducedXi::Zero => {
            if let Some(h) = evolution_rhs(l) {
                Some((CaseLabel::Evolution, evolution_determining_equation(&h, names)?))
            } else if let Some(f) = wave_rhs(l) {
                Some((CaseLabel::Wave, wave_determining_equation(&f, names)?))
            } else {
                None
            }
        }
        ReducedXi::U => None,
    };
    let (label, equation) = match specialized {
        Some((label, eq)) => {
            if !same_equation(&eq, &general) {
                return Err(ReductionError::SpecializationMismatch { label });
            }
            (label, eq)
        }
        None => (CaseLabel::SingularGeneral, general),
    };
    let equations = vec![equation];
    check_free_of_jets(&equations)?;
    Ok(DeterminingSystem {
        label,
        equations,
        g: Some(solution.value),
        assumptions: solution.assumptions,
    })
}

/// Replaces every derivative symbol of `ζ` by the corresponding partial
/// derivative of a concrete function of `(x, u)`.
pub fn instantiate_zeta(e: &Expr, value: &Expr, names: &Names) -> Result<Expr, ReductionError> {
    let zf = zeta_function(names);
    let coords = coordinate_atoms(names);
    let mut map = HashMap::new();
    for a in e.syntactic_atoms() {
        let Atom::Apply(app) = &a else { continue };
        if app.func != zf {
            continue;
        }
        let mut v = value.clone();
        for (slot, n) in app.index.iter().enumerate() {
            for _ in 0..*n {
                v = v.diff(&coords[slot]);
            }
        }
        map.insert(a.clone(), v);
    }
    Ok(e.substitute(&map)?)
}

/// Splits the conditional-invariance residual of a template field with
/// unknown coefficients into its coefficient system.
pub fn determining_regular(
    l: &DifferentialFunction,
    template: &VectorField,
    cfg: &SampleConfig,
) -> Result<DeterminingSystem, ReductionError> {
    let elimination = eliminate_on_q(l, template, cfg)?;
    let (residual, _, assumptions, _, _) = restricted_residual(l, template, elimination, cfg)?;
    let vars = split_atoms(&residual).map_err(|e| match e {
        SingularityError::NonPolynomialSplit { atom } => ReductionError::NonPolynomialSplit { atom },
        other => other.into(),
    })?;
    let (constant, others) = split_coefficients(residual.numer(), &vars);
    let equations: Vec<Expr> = constant
        .into_iter()
        .chain(others)
        .filter(|p| !p.is_zero())
        .map(Expr::poly)
        .collect();
    check_free_of_jets(&equations)?;
    Ok(DeterminingSystem {
        label: CaseLabel::RegularSplit,
        equations,
        g: None,
        assumptions,
    })
}

/// Outcome of substituting an ansatz into the equation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnsatzReduction {
    pub multiplier: Expr,
    /// Reduced body in `phi`, `phi'`, … and the invariant.
    pub body: Expr,
    pub essential_order: i32,
    /// True when the order is certified minimal by the maximal-rank test.
    pub exact: bool,
}

fn phi_derivative_name(k: u32) -> String {
    format!("{PHI}{}", "'".repeat(k as usize))
}

fn is_phi_var(a: &Atom) -> bool {
    matches!(a, Atom::Var(n) if n.starts_with(PHI) && n[PHI.len()..].chars().all(|c| c == '\''))
}

fn phi_order(a: &Atom) -> Option<u32> {
    match a {
        Atom::Var(n) if is_phi_var(a) => Some((n.len() - PHI.len()) as u32),
        _ => None,
    }
}

fn involves_phi(a: &Atom) -> bool {
    is_phi_var(a) || (a.is_kernel() || matches!(a, Atom::Apply(_))) && Expr::atom(a.clone()).free_leaves().iter().any(is_phi_var)
}

fn vanishes(e: &Expr, cfg: &SampleConfig) -> Result<bool, ReductionError> {
    Ok(!is_zero_with(e, cfg)?.is_nonzero())
}

/// The part of one numerator term that does not involve `φ`.
fn non_phi_factor(m: &crate::symbolic::Monomial) -> Expr {
    let mut out = Expr::one();
    for (a, e) in m.factors() {
        let factor = match a {
            Atom::Exp(arg) => {
                if arg.denom().atoms().iter().any(involves_phi) {
                    continue;
                }
                let kept: Vec<_> = arg
                    .numer()
                    .terms()
                    .iter()
                    .filter(|(t, _)| !t.atoms().any(involves_phi))
                    .cloned()
                    .collect();
                Expr::poly(Poly::from_terms(kept))
                    .div(&Expr::poly(arg.denom().clone()))
                    .expect("denominator of a normal form is nonzero")
                    .exp()
            }
            _ if involves_phi(a) => continue,
            _ => Expr::atom(a.clone()),
        };
        out = out.mul(&factor.powi(*e as i64).expect("nonzero base"));
    }
    out
}

fn essential_order(body: &Expr) -> i32 {
    if body.is_zero() {
        return -1;
    }
    body.free_leaves()
        .iter()
        .filter_map(phi_order)
        .max()
        .map_or(0, |k| k as i32)
}

/// Substitutes `u = f(x, φ(ω))` into `L`, factors out a multiplier that
/// may depend on the non-invariant variable and returns the reduced body.
pub fn reduce_with_ansatz(
    l: &DifferentialFunction,
    q: &VectorField,
    ansatz: &Ansatz,
    cfg: &SampleConfig,
) -> Result<AnsatzReduction, ReductionError> {
    let names = l.names();
    let [x1, x2, u] = coordinate_atoms(names);
    let phi_atom = Atom::Var(PHI.into());
    let omega = &ansatz.omega;
    let f = &ansatz.body;
    let invalid = |detail: &str| ReductionError::AnsatzNotInvariant {
        detail: detail.to_string(),
    };
    if omega.free_leaves().iter().any(|a| *a == phi_atom || a.jet_order().is_some()) {
        return Err(invalid("the invariant may depend on the independent variables only"));
    }
    let on_ansatz = |e: &Expr| e.substitute_one(&u, f);
    let xi1 = on_ansatz(&q.xi[0])?;
    let xi2 = on_ansatz(&q.xi[1])?;
    let eta = on_ansatz(&q.eta)?;
    if !vanishes(&xi1.mul(&omega.diff(&x1)).add(&xi2.mul(&omega.diff(&x2))), cfg)? {
        return Err(invalid("the invariant is not annihilated by the field"));
    }
    let char_on_f = xi1.mul(&f.diff(&x1)).add(&xi2.mul(&f.diff(&x2))).sub(&eta);
    if !vanishes(&char_on_f, cfg)? {
        return Err(invalid("the characteristic does not vanish on the ansatz"));
    }

    let phi_fn = Arc::new(UnknownFunction::new(PHI, vec![FormalArg::Var("omega".into())])?);
    let f_sub = f.substitute_one(&phi_atom, &Expr::apply(&phi_fn, vec![0], vec![omega.clone()]))?;
    let mut derivatives: HashMap<MultiIndex, Expr> = HashMap::new();
    derivatives.insert(MultiIndex(0, 0), f_sub);
    let mut jet_map = HashMap::new();
    for a in l.body().free_leaves() {
        let Atom::Jet(p, s) = a else { continue };
        for i in 0..=p {
            for j in 0..=s {
                let m = MultiIndex(i, j);
                if derivatives.contains_key(&m) {
                    continue;
                }
                let v = if j > 0 {
                    derivatives[&MultiIndex(i, j - 1)].diff(&x2)
                } else {
                    derivatives[&MultiIndex(i - 1, j)].diff(&x1)
                };
                derivatives.insert(m, v);
            }
        }
        jet_map.insert(a.clone(), derivatives[&MultiIndex(p, s)].clone());
    }
    let substituted = l.body().substitute(&jet_map)?;
    let mut freeze = HashMap::new();
    for a in substituted.free_atoms() {
        if let Atom::Apply(app) = &a {
            if app.func == phi_fn {
                let name = phi_derivative_name(app.index[0]);
                freeze.insert(a.clone(), Expr::var(&name));
            }
        }
    }
    let frozen = substituted.substitute(&freeze)?;

    let omega_1 = omega.diff(&x1);
    let omega_2 = omega.diff(&x2);
    let invariant = |g: &Expr| -> Result<bool, ReductionError> {
        vanishes(&omega_2.mul(&g.diff(&x1)).sub(&omega_1.mul(&g.diff(&x2))), cfg)
    };
    let mut candidates = vec![Expr::one()];
    if !frozen.is_zero() {
        let den = Expr::poly(frozen.denom().clone());
        let (lambda, _) = crate::singularity::extract_multiplier(&frozen);
        candidates.push(lambda.div(&den)?);
        for (m, c) in frozen.numer().terms() {
            let lambda = non_phi_factor(m).mul(&Expr::constant(c.clone())).div(&den)?;
            if !candidates.contains(&lambda) {
                candidates.push(lambda);
            }
        }
    }
    let mut best: Option<(i32, Expr, Expr)> = None;
    for lambda in candidates {
        if !is_zero_with(&lambda, cfg)?.is_nonzero() {
            continue;
        }
        let rest = frozen.div(&lambda)?;
        if !invariant(&rest)? {
            continue;
        }
        let k = essential_order(&rest);
        if best.as_ref().is_none_or(|b| k < b.0) {
            best = Some((k, lambda, rest));
        }
    }
    let Some((k, multiplier, body)) = best else {
        return Err(ReductionError::ResidualNonInvariant {
            residual: frozen.render(names),
        });
    };
    let (multiplier, body) = orient(multiplier, body, k);
    let body = in_invariant_coordinate(&body, omega, names, cfg)?;
    let exact = k <= 0 || {
        let top = Atom::Var(phi_derivative_name(k as u32).as_str().into());
        is_zero_with(&body.diff(&top), cfg)? == TriBool::ProvenNonZero
    };
    Ok(AnsatzReduction {
        multiplier,
        body,
        essential_order: k,
        exact,
    })
}

/// Flips signs so that the highest derivative of `φ` has a positive
/// leading coefficient.
fn orient(multiplier: Expr, body: Expr, k: i32) -> (Expr, Expr) {
    if k < 0 {
        return (multiplier, body);
    }
    let top = Atom::Var(phi_derivative_name(k as u32).as_str().into());
    let coeffs = body.numer().coefficients_in(&top);
    let negative = coeffs
        .last()
        .filter(|_| coeffs.len() > 1)
        .is_some_and(|c| c.leading_coeff() < num_traits::Zero::zero());
    if negative {
        (multiplier.neg(), body.neg())
    } else {
        (multiplier, body)
    }
}

/// Rewrites an invariant body in terms of a variable named `omega` when
/// the invariant is not itself a coordinate and can be solved for one.
fn in_invariant_coordinate(
    body: &Expr,
    omega: &Expr,
    names: &Names,
    cfg: &SampleConfig,
) -> Result<Expr, ReductionError> {
    let xs = [Atom::Var(names.x[0].clone()), Atom::Var(names.x[1].clone())];
    if omega.as_atom().is_some_and(|a| xs.contains(&a)) {
        return Ok(body.clone());
    }
    let w = Expr::var("omega");
    for (i, x) in xs.iter().enumerate() {
        let Ok(sol) = solve_for_leader(&omega.sub(&w), x, cfg) else {
            continue;
        };
        let rewritten = body.substitute_one(x, &sol.value)?;
        let other = &xs[1 - i];
        if !rewritten.free_leaves().contains(other) && !rewritten.free_leaves().contains(x) {
            return Ok(rewritten);
        }
    }
    Ok(body.clone())
}
