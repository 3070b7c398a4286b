//! Elimination on the invariant-surface manifold and singularity co-orders.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jet::{ord, total_derivative, Axis, DifferentialFunction, JetError, MultiIndex, VectorField};
use crate::symbolic::{
    is_zero_with, nonvanishing_atom, Atom, Expr, FormalArg, Monomial, Names, Poly, SampleConfig,
    SymbolicError, TriBool, UnknownFunction,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SingularityError {
    #[error("neither coefficient of the independent variables is confirmably nonzero")]
    BothCoefficientsZero,
    #[error("associated function is not polynomial in the jet variable {atom}")]
    NonPolynomialSplit { atom: String },
    #[error("not representable with the requested co-order: {atom} occurs")]
    NotRepresentable { atom: String },
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// `L̂`: the function associated with `L` on the manifold `Q_(r)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationResult {
    pub associated: DifferentialFunction,
    /// Axis whose derivatives were eliminated.
    pub axis: Axis,
    pub table: BTreeMap<MultiIndex, Expr>,
}

/// Picks the axis to eliminate: axis 2 when its coefficient is proved
/// nonzero, otherwise axis 1 when that coefficient is not zero, and axis 2
/// on sampled evidence only as a last resort.
pub fn elimination_axis(q: &VectorField, cfg: &SampleConfig) -> Result<Axis, SingularityError> {
    let z2 = is_zero_with(q.xi(Axis::Two), cfg)?;
    let z1 = is_zero_with(q.xi(Axis::One), cfg)?;
    let axis = match (z2, z1) {
        (TriBool::ProvenNonZero, _) => Axis::Two,
        (_, TriBool::ProvenNonZero | TriBool::ProbablyNonZero) => Axis::One,
        (TriBool::ProbablyNonZero, _) => Axis::Two,
        _ => return Err(SingularityError::BothCoefficientsZero),
    };
    Ok(axis)
}

/// Placeholder for `1/ξ` of the eliminated axis while rewrites are built,
/// so that intermediate results stay polynomial in it.
fn reciprocal_atom() -> Atom {
    Atom::Var("#1/xi".into())
}

/// Rewrites of `u_α` on `Q_(r)` for multi-indices containing the
/// eliminated axis.
struct Eliminator<'a> {
    names: &'a Names,
    elim: Axis,
    keep: Axis,
    /// `ξ` of the eliminated axis when it is a polynomial without kernels;
    /// rewrites then carry `reciprocal_atom()` in place of `1/ξ`.
    lead: Option<Poly>,
    w0: Expr,
    /// Derivatives of the reciprocal atom along the eliminated and the kept
    /// axis.
    reciprocal_derivatives: Option<(Expr, Expr)>,
    memo: RefCell<HashMap<MultiIndex, Expr>>,
}

impl<'a> Eliminator<'a> {
    fn new(names: &'a Names, q: &VectorField, elim: Axis) -> Result<Self, SingularityError> {
        let keep = elim.other();
        let lead = q.xi(elim);
        let u_keep = keep.unit().expr();
        let polynomial_lead = (lead.is_polynomial() && !lead.contains_kernels() && lead.constant_value().is_none())
            .then(|| lead.numer().clone());
        let w0 = match &polynomial_lead {
            Some(_) => q.eta.sub(&q.xi(keep).mul(&u_keep)).mul(&Expr::atom(reciprocal_atom())),
            None => q.eta.div(lead)?.sub(&q.xi(keep).div(lead)?.mul(&u_keep)),
        };
        let mut e = Eliminator {
            names,
            elim,
            keep,
            lead: polynomial_lead,
            w0,
            reciprocal_derivatives: None,
            memo: RefCell::new(HashMap::new()),
        };
        if e.lead.is_some() {
            let minus_square = Expr::atom(reciprocal_atom()).powi(2)?.neg();
            let along_elim = minus_square.mul(&e.evolve(lead));
            let along_keep = minus_square.mul(&total_derivative(lead, keep, names));
            e.reciprocal_derivatives = Some((along_elim, along_keep));
        }
        Ok(e)
    }

    /// Restricted evolution operator along the eliminated axis.
    fn evolve(&self, e: &Expr) -> Expr {
        let x_elim = Atom::Var(self.names.x[self.elim.index()].clone());
        let lambda = reciprocal_atom();
        e.derive(&|a: &Atom| -> Option<Expr> {
            match a {
                Atom::Jet(0, 0) => Some(self.w0.clone()),
                Atom::Jet(p, q) => {
                    let m = MultiIndex(*p, *q);
                    debug_assert_eq!(m.along(self.elim), 0);
                    Some(self.rewrite(m.shifted(self.elim)))
                }
                Atom::Apply(_) => None,
                _ if *a == x_elim => Some(Expr::one()),
                _ if *a == lambda => Some(self.reciprocal_derivatives.as_ref().map_or_else(Expr::zero, |d| d.0.clone())),
                _ => Some(Expr::zero()),
            }
        })
    }

    /// Total derivative along the kept axis, aware of the reciprocal atom.
    fn along_keep(&self, e: &Expr) -> Expr {
        let x_keep = Atom::Var(self.names.x[self.keep.index()].clone());
        let lambda = reciprocal_atom();
        e.derive(&|a: &Atom| -> Option<Expr> {
            match a {
                Atom::Jet(p, q) => Some(MultiIndex(*p, *q).shifted(self.keep).expr()),
                Atom::Apply(_) => None,
                _ if *a == x_keep => Some(Expr::one()),
                _ if *a == lambda => Some(self.reciprocal_derivatives.as_ref().map_or_else(Expr::zero, |d| d.1.clone())),
                _ => Some(Expr::zero()),
            }
        })
    }

    fn rewrite(&self, m: MultiIndex) -> Expr {
        if let Some(v) = self.memo.borrow().get(&m) {
            return v.clone();
        }
        let along_keep = m.along(self.keep);
        let along_elim = m.along(self.elim);
        let v = if along_keep > 0 {
            let lower = match self.keep {
                Axis::One => MultiIndex(m.0 - 1, m.1),
                Axis::Two => MultiIndex(m.0, m.1 - 1),
            };
            self.along_keep(&self.rewrite(lower))
        } else if along_elim == 1 {
            self.w0.clone()
        } else {
            let lower = match self.elim {
                Axis::One => MultiIndex(m.0 - 1, m.1),
                Axis::Two => MultiIndex(m.0, m.1 - 1),
            };
            self.evolve(&self.rewrite(lower))
        };
        self.memo.borrow_mut().insert(m, v.clone());
        v
    }

    /// Replaces the reciprocal atom by `1/ξ`.
    fn resolve(&self, e: &Expr) -> Result<Expr, SingularityError> {
        match &self.lead {
            Some(lead) => Ok(e.substitute_reciprocal(&reciprocal_atom(), lead)?),
            None => Ok(e.clone()),
        }
    }

    /// Unresolved rewrites of the jet variables of `e` with a derivative
    /// along the eliminated axis.
    fn raw_table(&self, e: &Expr) -> BTreeMap<MultiIndex, Expr> {
        let mut table = BTreeMap::new();
        for a in e.syntactic_leaves() {
            if let Atom::Jet(p, r) = a {
                let m = MultiIndex(p, r);
                if m.along(self.elim) > 0 {
                    table.insert(m, self.rewrite(m));
                }
            }
        }
        table
    }

    /// `e` restricted to `Q_(r)`.
    fn restrict(&self, e: &Expr) -> Result<Expr, SingularityError> {
        let map: HashMap<Atom, Expr> = self.raw_table(e).into_iter().map(|(m, v)| (m.atom(), v)).collect();
        self.resolve(&e.substitute(&map)?)
    }
}

/// Eliminates derivatives along one axis using `Q[u] = 0` and its
/// differential consequences.
pub fn eliminate_on_q(
    l: &DifferentialFunction,
    q: &VectorField,
    cfg: &SampleConfig,
) -> Result<EliminationResult, SingularityError> {
    let elim = elimination_axis(q, cfg)?;
    eliminate_along(l, q, elim)
}

/// Elimination along a fixed axis; the caller guarantees that the
/// corresponding coefficient does not vanish. The rewrite table covers the
/// jet variables that occur in `L`.
pub fn eliminate_along(
    l: &DifferentialFunction,
    q: &VectorField,
    elim: Axis,
) -> Result<EliminationResult, SingularityError> {
    let eliminator = Eliminator::new(l.names(), q, elim)?;
    let body = eliminator.restrict(l.body())?;
    let table = eliminator
        .raw_table(l.body())
        .into_iter()
        .map(|(m, v)| Ok((m, eliminator.resolve(&v)?)))
        .collect::<Result<_, SingularityError>>()?;
    Ok(EliminationResult {
        associated: l.with_body(body),
        axis: elim,
        table,
    })
}

/// `e` restricted to `Q_(r)` by eliminating derivatives along `elim`.
pub fn restrict_to_q(names: &Names, q: &VectorField, elim: Axis, e: &Expr) -> Result<Expr, SingularityError> {
    Eliminator::new(names, q, elim)?.restrict(e)
}

/// Strong singularity co-order: the order of `L̂`.
pub fn strong_coorder(
    l: &DifferentialFunction,
    q: &VectorField,
    cfg: &SampleConfig,
) -> Result<i32, SingularityError> {
    Ok(eliminate_on_q(l, q, cfg)?.associated.ord())
}

/// Strong and weak co-order data for one vector field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoorderReport {
    pub strong: i32,
    pub weak_lower: i32,
    pub weak_upper: i32,
    pub multiplier: Expr,
    pub residual: DifferentialFunction,
    pub maximal_rank: TriBool,
    pub elimination: EliminationResult,
}

impl CoorderReport {
    pub fn weak_is_exact(&self) -> bool {
        self.weak_lower == self.weak_upper
    }
}

/// Product of the factors of a single monomial that cannot vanish.
fn nonvanishing_part(m: &Monomial) -> Monomial {
    let mut out = Monomial::one();
    for (a, e) in m.factors() {
        if nonvanishing_atom(a) && !matches!(a, Atom::Exp(_)) {
            out = out.mul(&Monomial::atom(a.clone()).pow(*e));
        }
    }
    out
}

/// Splits `e = λ·rest` with `λ` a product of a nonzero rational, an
/// exponential and registered nonvanishing symbols. Among the available
/// exponentials the one giving the lowest residual order is used.
pub fn extract_multiplier(e: &Expr) -> (Expr, Expr) {
    let num = e.numer();
    if num.is_zero() {
        return (Expr::one(), e.clone());
    }
    let lead = num.rational_content();
    let common = nonvanishing_part(&num.monomial_content());
    let mut exps: Vec<Option<Expr>> = vec![None];
    for (m, _) in num.terms() {
        let arg = m.exp_arg().cloned();
        if arg.is_some() && !exps.contains(&arg) {
            exps.push(arg);
        }
    }
    let base = Expr::poly(Poly::term(common, lead));
    let mut best: Option<(i32, Expr, Expr)> = None;
    for arg in exps {
        let lambda = match &arg {
            Some(a) => base.mul(&a.exp()),
            None => base.clone(),
        };
        let rest = e.div(&lambda).expect("multiplier is nonzero");
        let k = ord(&rest);
        if best.as_ref().is_none_or(|b| k < b.0) {
            best = Some((k, lambda, rest));
        }
    }
    let (_, lambda, rest) = best.expect("at least one candidate");
    (lambda, rest)
}

/// Strong co-order, multiplier extraction and weak co-order bounds.
pub fn weak_coorder(
    l: &DifferentialFunction,
    q: &VectorField,
    cfg: &SampleConfig,
) -> Result<CoorderReport, SingularityError> {
    let elimination = eliminate_on_q(l, q, cfg)?;
    coorder_report(elimination, cfg)
}

pub fn coorder_report(
    elimination: EliminationResult,
    cfg: &SampleConfig,
) -> Result<CoorderReport, SingularityError> {
    let hat = elimination.associated.clone();
    let strong = hat.ord();
    let (multiplier, rest) = extract_multiplier(hat.body());
    let residual = hat.with_body(rest);
    let upper = residual.ord();
    let maximal_rank = if upper <= 0 {
        TriBool::ProvenNonZero
    } else {
        maximal_rank(residual.body(), upper as u32, cfg)?
    };
    let lower = if strong < 0 {
        -1
    } else if maximal_rank == TriBool::ProvenNonZero {
        upper
    } else {
        0
    };
    Ok(CoorderReport {
        strong,
        weak_lower: lower,
        weak_upper: upper,
        multiplier,
        residual,
        maximal_rank,
        elimination,
    })
}

/// Best zero-test verdict among the partial derivatives with respect to
/// the highest-order jet variables.
fn maximal_rank(e: &Expr, order: u32, cfg: &SampleConfig) -> Result<TriBool, SingularityError> {
    let mut best = TriBool::ProvenZero;
    for a in e.free_leaves() {
        if a.jet_order() != Some(order) {
            continue;
        }
        let verdict = is_zero_with(&e.diff(&a), cfg)?;
        best = match (best, verdict) {
            (_, TriBool::ProvenNonZero) => return Ok(TriBool::ProvenNonZero),
            (TriBool::ProbablyNonZero, _) | (_, TriBool::ProbablyNonZero) => TriBool::ProbablyNonZero,
            (TriBool::ProbablyZero, _) | (_, TriBool::ProbablyZero) => TriBool::ProbablyZero,
            _ => TriBool::ProvenZero,
        };
    }
    Ok(best)
}

/// The coefficient `ξ ∈ {0, u}` of a reduced-form set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReducedXi {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "u")]
    U,
}

impl ReducedXi {
    pub fn expr(self) -> Expr {
        match self {
            ReducedXi::Zero => Expr::zero(),
            ReducedXi::U => Expr::jet(0, 0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ReducedXi::Zero => "0",
            ReducedXi::U => "u",
        }
    }
}

/// The parameter function `ζ(x₁, x₂, u)` of a reduced-form set.
pub fn zeta_function(names: &Names) -> Arc<UnknownFunction> {
    Arc::new(
        UnknownFunction::new(
            "zeta",
            vec![
                FormalArg::Var(names.x[0].clone()),
                FormalArg::Var(names.x[1].clone()),
                FormalArg::Jet(0, 0),
            ],
        )
        .expect("distinct formal arguments"),
    )
}

/// `Q^ζ = ξ∂₁ + ∂₂ + ζ∂_u`.
pub fn reduced_field(xi: ReducedXi, zeta: &Expr) -> VectorField {
    VectorField::new(xi.expr(), Expr::one(), zeta.clone()).expect("second coefficient is one")
}

/// Outcome of the consistency search on a split system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Consistency {
    /// A differential consequence is provably nonzero.
    Inconsistent { witness: Expr },
    /// No contradiction up to the search depth.
    NoContradictionFound,
}

impl Consistency {
    pub fn is_inconsistent(&self) -> bool {
        matches!(self, Consistency::Inconsistent { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSystem {
    pub equations: Vec<Expr>,
    pub consistency: Consistency,
}

/// Singular-set analysis of `{Q^ζ}` for one value of `ξ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetAnalysis {
    pub xi: ReducedXi,
    pub zeta: Arc<UnknownFunction>,
    pub associated: Expr,
    /// Set co-order `k`; equal to `ord L` when the set is regular.
    pub k: i32,
    pub regular: bool,
    pub ultra_singular: Option<SplitSystem>,
    pub zero_coorder: Option<SplitSystem>,
    pub inequality: Option<Expr>,
    /// Set when the associated function is not polynomial in the
    /// remaining jet variables, so the split systems are unavailable.
    pub split_obstruction: Option<String>,
}

/// Jet variables that remain after elimination along axis 2.
pub(crate) fn split_atoms(e: &Expr) -> Result<BTreeSet<Atom>, SingularityError> {
    let mut out = BTreeSet::new();
    for a in e.free_leaves() {
        if let Atom::Jet(_, _) = a {
            if a != Atom::Jet(0, 0) {
                out.insert(a);
            }
        }
    }
    for (m, _) in e.numer().terms() {
        for a in m.atoms() {
            if !out.contains(a) && matches!(a, Atom::Jet(..)) {
                continue;
            }
            let hidden = match a {
                Atom::Jet(..) => false,
                Atom::Var(_) | Atom::Omega(..) | Atom::Slot(_) => false,
                _ => Expr::atom(a.clone())
                    .free_leaves()
                    .iter()
                    .any(|b| matches!(b, Atom::Jet(p, q) if p + q > 0)),
            };
            if hidden {
                return Err(SingularityError::NonPolynomialSplit { atom: a.to_string() });
            }
        }
    }
    Ok(out)
}

/// Coefficients of `p` as a polynomial in `vars`, grouped by monomial in
/// those variables. The constant coefficient comes first when present.
pub fn split_coefficients(p: &Poly, vars: &BTreeSet<Atom>) -> (Option<Poly>, Vec<Poly>) {
    let mut groups: BTreeMap<Vec<(Atom, u32)>, Vec<(Monomial, crate::symbolic::Rat)>> = BTreeMap::new();
    for (m, c) in p.terms() {
        let mut key = Vec::new();
        let mut rest = m.clone();
        for v in vars {
            let (r, e) = rest.without(v);
            if e > 0 {
                key.push((v.clone(), e));
            }
            rest = r;
        }
        groups.entry(key).or_default().push((rest, c.clone()));
    }
    let mut constant = None;
    let mut others = Vec::new();
    for (key, terms) in groups {
        let poly = Poly::from_terms(terms);
        if key.is_empty() {
            constant = Some(poly);
        } else {
            others.push(poly);
        }
    }
    (constant, others)
}

/// Searches differential consequences of a system in the ζ-symbols for
/// a provably nonzero expression.
pub fn check_consistency(
    equations: &[Expr],
    zeta: &Arc<UnknownFunction>,
    names: &Names,
    depth: u32,
    cfg: &SampleConfig,
) -> Result<Consistency, SingularityError> {
    let coords = [
        Atom::Var(names.x[0].clone()),
        Atom::Var(names.x[1].clone()),
        Atom::Jet(0, 0),
    ];
    let mut vanishing: Vec<Vec<u32>> = Vec::new();
    let mut frontier: Vec<Expr> = equations.to_vec();
    let mut all: Vec<Expr> = Vec::new();
    for round in 0..=depth {
        let mut queue = frontier.clone();
        all.append(&mut frontier);
        loop {
            let mut found = false;
            for e in &mut all {
                *e = kill_vanishing(e, zeta, &vanishing)?;
                if let Some(idx) = single_zeta_symbol(e, zeta) {
                    if !vanishing.iter().any(|v| dominates(&idx, v)) {
                        vanishing.push(idx);
                        found = true;
                    }
                }
            }
            if !found {
                break;
            }
        }
        for e in &all {
            if e.is_zero() {
                continue;
            }
            if is_zero_with(e, cfg)? == TriBool::ProvenNonZero {
                return Ok(Consistency::Inconsistent { witness: e.clone() });
            }
        }
        if round == depth {
            break;
        }
        queue = queue
            .iter()
            .map(|e| kill_vanishing(e, zeta, &vanishing))
            .collect::<Result<_, _>>()?;
        for e in queue.iter().filter(|e| !e.is_zero()) {
            for c in &coords {
                let d = kill_vanishing(&e.diff(c), zeta, &vanishing)?;
                if !d.is_zero() && !all.contains(&d) && !frontier.contains(&d) {
                    frontier.push(d);
                }
            }
        }
    }
    Ok(Consistency::NoContradictionFound)
}

fn dominates(idx: &[u32], base: &[u32]) -> bool {
    idx.iter().zip(base).all(|(a, b)| a >= b)
}

/// Index of `ζ^{(α)}` when `e` states that this symbol vanishes.
fn single_zeta_symbol(e: &Expr, zeta: &Arc<UnknownFunction>) -> Option<Vec<u32>> {
    let [(m, _)] = e.numer().terms() else {
        return None;
    };
    let mut found = None;
    for (a, _) in m.factors() {
        if nonvanishing_atom(a) {
            continue;
        }
        match a {
            Atom::Apply(app) if app.func == *zeta && app.is_formal() && found.is_none() => {
                found = Some(app.index.clone());
            }
            _ => return None,
        }
    }
    found
}

fn kill_vanishing(
    e: &Expr,
    zeta: &Arc<UnknownFunction>,
    vanishing: &[Vec<u32>],
) -> Result<Expr, SymbolicError> {
    if vanishing.is_empty() {
        return Ok(e.clone());
    }
    let mut map = HashMap::new();
    for a in e.syntactic_atoms() {
        if let Atom::Apply(app) = &a {
            if app.func == *zeta && vanishing.iter().any(|v| dominates(&app.index, v)) {
                map.insert(a.clone(), Expr::zero());
            }
        }
    }
    e.substitute(&map)
}

/// Analysis of the reduced-form set `{ξ∂₁ + ∂₂ + ζ∂_u}`.
pub fn analyze_reduced_set(
    l: &DifferentialFunction,
    xi: ReducedXi,
    cfg: &SampleConfig,
) -> Result<SetAnalysis, SingularityError> {
    let names = l.names();
    let zeta = zeta_function(names);
    let q = reduced_field(xi, &zeta.formal_symbol());
    let elim = eliminate_along(l, &q, Axis::Two)?;
    let hat = elim.associated.body().clone();
    let k = ord(&hat);
    let regular = k >= l.ord();
    let mut analysis = SetAnalysis {
        xi,
        zeta: zeta.clone(),
        associated: hat.clone(),
        k,
        regular,
        ultra_singular: None,
        zero_coorder: None,
        inequality: None,
        split_obstruction: None,
    };
    if regular || k < 0 {
        return Ok(analysis);
    }
    let vars = match split_atoms(&hat) {
        Ok(vars) => vars,
        Err(SingularityError::NonPolynomialSplit { atom }) => {
            analysis.split_obstruction = Some(atom);
            return Ok(analysis);
        }
        Err(e) => return Err(e),
    };
    let (constant, others) = split_coefficients(hat.numer(), &vars);
    let zero_eqs: Vec<Expr> = others.into_iter().map(Expr::poly).collect();
    let mut ultra_eqs = zero_eqs.clone();
    if let Some(c) = constant {
        ultra_eqs.push(Expr::poly(c));
    }
    let depth = 2;
    analysis.zero_coorder = Some(SplitSystem {
        consistency: check_consistency(&zero_eqs, &zeta, names, depth, cfg)?,
        equations: zero_eqs,
    });
    analysis.ultra_singular = Some(SplitSystem {
        consistency: check_consistency(&ultra_eqs, &zeta, names, depth, cfg)?,
        equations: ultra_eqs,
    });
    analysis.inequality = Some(match representation_check(l, xi, k as u32) {
        Ok(rep) => note_one_inequality(&rep, l, xi, &zeta, k as u32)?,
        Err(_) => hat.diff(&Atom::Jet(k as u32, 0)),
    });
    Ok(analysis)
}

/// `Σ_ν Ľ_{ω(k,ν)} ∂_u (Q^ζ)^ν u` evaluated on the manifold.
fn note_one_inequality(
    rep: &Representation,
    l: &DifferentialFunction,
    xi: ReducedXi,
    zeta: &Arc<UnknownFunction>,
    k: u32,
) -> Result<Expr, SingularityError> {
    let names = l.names();
    let r = l.ord() as u32;
    let q = reduced_field(xi, &zeta.formal_symbol());
    // g_ν = (Q^ζ)^ν u as functions of (x, u)
    let mut g = vec![Expr::jet(0, 0)];
    for nu in 1..=r {
        let next = q.apply(&g[nu as usize - 1], names);
        g.push(next);
    }
    let mut values = HashMap::new();
    for m in std::iter::once(MultiIndex(0, 0)).chain(MultiIndex::up_to(r)) {
        let mut v = g[m.1 as usize].clone();
        for _ in 0..m.0 {
            v = total_derivative(&v, Axis::One, names);
        }
        values.insert(Atom::Omega(m.0, m.1), v);
    }
    let mut sum = Expr::zero();
    for nu in 0..=(r - k) {
        let partial = rep.body.diff(&Atom::Omega(k, nu));
        if partial.is_zero() {
            continue;
        }
        let on_manifold = partial.substitute(&values)?;
        sum = sum.add(&on_manifold.mul(&g[nu as usize].diff(&Atom::Jet(0, 0))));
    }
    Ok(sum)
}

/// `L` rewritten in the coordinates `ω_α = D₁^{α₁}(ξD₁ + D₂)^{α₂}u`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Representation {
    pub body: Expr,
    pub k: u32,
}

/// Triangular change of jet coordinates followed by the co-order check.
pub fn representation_check(
    l: &DifferentialFunction,
    xi: ReducedXi,
    k: u32,
) -> Result<Representation, SingularityError> {
    let names = l.names();
    let r = l.ord().max(0) as u32;
    let xi_e = xi.expr();
    let advance = |e: &Expr| -> Expr {
        total_derivative(e, Axis::One, names)
            .mul(&xi_e)
            .add(&total_derivative(e, Axis::Two, names))
    };
    // ω_α in jet coordinates
    let mut omega: BTreeMap<MultiIndex, Expr> = BTreeMap::new();
    omega.insert(MultiIndex(0, 0), Expr::jet(0, 0));
    for n in 1..=r {
        for a2 in 0..=n {
            let m = MultiIndex(n - a2, a2);
            let v = if m.0 > 0 {
                total_derivative(&omega[&MultiIndex(m.0 - 1, m.1)], Axis::One, names)
            } else {
                advance(&omega[&MultiIndex(0, m.1 - 1)])
            };
            omega.insert(m, v);
        }
    }
    // invert in the order |α| first, then α₂
    let mut inverse: HashMap<Atom, Expr> = HashMap::new();
    inverse.insert(Atom::Jet(0, 0), Expr::atom(Atom::Omega(0, 0)));
    for n in 1..=r {
        for a2 in 0..=n {
            let m = MultiIndex(n - a2, a2);
            let rest = omega[&m].sub(&m.expr());
            let rest = rest.substitute(&inverse)?;
            inverse.insert(m.atom(), Expr::atom(Atom::Omega(m.0, m.1)).sub(&rest));
        }
    }
    let body = l.body().substitute(&inverse)?;
    let mut top = false;
    for a in body.free_leaves() {
        match a {
            Atom::Omega(a1, _) if a1 > k => {
                return Err(SingularityError::NotRepresentable {
                    atom: render_omega(&a),
                });
            }
            Atom::Omega(a1, _) if a1 == k => top = true,
            Atom::Jet(..) => {
                return Err(SingularityError::NotRepresentable { atom: a.to_string() });
            }
            _ => {}
        }
    }
    if !top {
        return Err(SingularityError::NotRepresentable {
            atom: format!("no omega with first index {k}"),
        });
    }
    Ok(Representation { body, k })
}

fn render_omega(a: &Atom) -> String {
    match a {
        Atom::Omega(p, q) => format!("omega[{p},{q}]"),
        other => other.to_string(),
    }
}

/// Lie bracket of two vector fields as a coefficient triple
/// `(ξ¹, ξ², η)`; the result may vanish identically.
pub fn bracket(q1: &VectorField, q2: &VectorField, names: &Names) -> [Expr; 3] {
    let c1 = [&q1.xi[0], &q1.xi[1], &q1.eta];
    let c2 = [&q2.xi[0], &q2.xi[1], &q2.eta];
    std::array::from_fn(|i| q1.apply(c2[i], names).sub(&q2.apply(c1[i], names)))
}

/// True when the bracket lies in the span of the two fields over
/// functions of `(x, u)`.
pub fn module_closed(
    q1: &VectorField,
    q2: &VectorField,
    names: &Names,
    cfg: &SampleConfig,
) -> Result<bool, SingularityError> {
    let b = bracket(q1, q2, names);
    let rows = [
        [q1.xi[0].clone(), q1.xi[1].clone(), q1.eta.clone()],
        [q2.xi[0].clone(), q2.xi[1].clone(), q2.eta.clone()],
        b,
    ];
    let det = determinant3(&rows);
    Ok(!is_zero_with(&det, cfg)?.is_nonzero())
}

fn determinant3(m: &[[Expr; 3]; 3]) -> Expr {
    let minor = |i: usize, j: usize, k: usize, l: usize| m[1][i].mul(&m[2][j]).sub(&m[1][k].mul(&m[2][l]));
    m[0][0]
        .mul(&minor(1, 2, 2, 1))
        .sub(&m[0][1].mul(&minor(0, 2, 2, 0)))
        .add(&m[0][2].mul(&minor(0, 1, 1, 0)))
}
