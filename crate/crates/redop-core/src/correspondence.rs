//! Correspondences between reduction operators and solution families.

use std::collections::{BTreeMap, HashMap};

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::jet::{Axis, DifferentialFunction, MultiIndex};
use crate::reduction::{
    determining_singular, instantiate_zeta, invariance_check, solve_for_leader, wave_rhs,
    ReductionError,
};
use crate::singularity::{eliminate_along, reduced_field, ReducedXi, SingularityError};
use crate::symbolic::{
    is_zero_with, rat, Application, Atom, Expr, Name, Names, Rat, SampleConfig, SymbolicError,
    TriBool, Valuation,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorrespondenceError {
    #[error("the inverse does not depend on u")]
    DegenerateInverse,
    #[error("inverse is inconsistent with the family: Φ(x, f) − κ = {residual}")]
    InconsistentInverse { residual: String },
    #[error("the parameter {param} is not essential")]
    InessentialParameter { param: String },
    #[error("wrong co-order branch: {detail}")]
    WrongCoorderBranch { detail: String },
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Singularity(#[from] SingularityError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

/// A one-parameter family `u = f(x, κ)` with its supplied inverse
/// `κ = Φ(x, u)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionFamily {
    pub f: Expr,
    pub param: Name,
    pub inverse: Expr,
}

impl SolutionFamily {
    pub fn param_atom(&self) -> Atom {
        Atom::Var(self.param.clone())
    }

    /// Zero-test verdict of `∂f/∂κ`; a nonzero verdict means the
    /// parameter is essential.
    pub fn parameter_derivative(&self, cfg: &SampleConfig) -> Result<TriBool, CorrespondenceError> {
        Ok(is_zero_with(&self.f.diff(&self.param_atom()), cfg)?)
    }

    /// Checks `Φ(x, f(x, κ)) = κ` and that `κ` is essential.
    pub fn validate(&self, cfg: &SampleConfig) -> Result<(), CorrespondenceError> {
        let back = self
            .inverse
            .substitute_one(&Atom::Jet(0, 0), &self.f)?
            .sub(&Expr::atom(self.param_atom()));
        if is_zero_with(&back, cfg)?.is_nonzero() {
            return Err(CorrespondenceError::InconsistentInverse {
                residual: back.to_string(),
            });
        }
        if self.parameter_derivative(cfg)? == TriBool::ProvenZero {
            return Err(CorrespondenceError::InessentialParameter {
                param: self.param.to_string(),
            });
        }
        Ok(())
    }
}

fn coordinates(names: &Names) -> [Atom; 2] {
    [Atom::Var(names.x[0].clone()), Atom::Var(names.x[1].clone())]
}

fn inverse_u_derivative(phi: &Expr, cfg: &SampleConfig) -> Result<Expr, CorrespondenceError> {
    let phi_u = phi.diff(&Atom::Jet(0, 0));
    if is_zero_with(&phi_u, cfg)? == TriBool::ProvenZero {
        return Err(CorrespondenceError::DegenerateInverse);
    }
    Ok(phi_u)
}

/// `ζ = −(ξΦ_1 + Φ_2)/Φ_u`.
pub fn zeta_from_family(
    family: &SolutionFamily,
    xi: ReducedXi,
    names: &Names,
    cfg: &SampleConfig,
) -> Result<Expr, CorrespondenceError> {
    let phi = &family.inverse;
    let phi_u = inverse_u_derivative(phi, cfg)?;
    let [x1, x2] = coordinates(names);
    let top = xi.expr().mul(&phi.diff(&x1)).add(&phi.diff(&x2));
    Ok(top.neg().div(&phi_u)?)
}

/// `u_α ↦ ∂^α f` for every jet variable of `L`.
fn jets_of(l: &DifferentialFunction, f: &Expr) -> HashMap<Atom, Expr> {
    let [x1, x2] = coordinates(l.names());
    let mut cache: BTreeMap<MultiIndex, Expr> = BTreeMap::new();
    cache.insert(MultiIndex(0, 0), f.clone());
    let mut map = HashMap::new();
    let r = l.ord().max(0) as u32;
    for m in MultiIndex::up_to(r) {
        let v = if m.1 > 0 {
            cache[&MultiIndex(m.0, m.1 - 1)].diff(&x2)
        } else {
            cache[&MultiIndex(m.0 - 1, 0)].diff(&x1)
        };
        cache.insert(m, v);
    }
    for (m, v) in cache {
        map.insert(m.atom(), v);
    }
    map
}

pub fn verify_family_solves(
    l: &DifferentialFunction,
    family: &SolutionFamily,
    cfg: &SampleConfig,
) -> Result<TriBool, CorrespondenceError> {
    let residual = l.body().substitute(&jets_of(l, &family.f))?;
    Ok(is_zero_with(&residual, cfg)?)
}

/// Verdicts certifying one instance of the family/operator bijection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BijectionReport {
    pub zeta: Expr,
    pub zeta_star: Option<Expr>,
    pub family_solves: TriBool,
    pub determining: TriBool,
    pub invariance: TriBool,
}

impl BijectionReport {
    pub fn certified(&self) -> bool {
        [self.family_solves, self.determining, self.invariance]
            .iter()
            .all(|v| *v == TriBool::ProvenZero)
    }
}

/// Zero-test verdict of the determining equation at a concrete `ζ`, with
/// the conditional invariance criterion as fallback when no single
/// determining equation applies.
pub fn determining_verdict(
    l: &DifferentialFunction,
    xi: ReducedXi,
    zeta: &Expr,
    cfg: &SampleConfig,
) -> Result<TriBool, CorrespondenceError> {
    let names = l.names();
    if let Ok(sys) = determining_singular(l, xi, cfg) {
        if let Ok(r) = instantiate_zeta(&sys.equations[0], zeta, names) {
            return Ok(is_zero_with(&r, cfg)?);
        }
    }
    let q = reduced_field(xi, zeta);
    Ok(invariance_check(l, &q, cfg)?.verdict)
}

pub fn verify_bijection(
    l: &DifferentialFunction,
    family: &SolutionFamily,
    xi: ReducedXi,
    cfg: &SampleConfig,
) -> Result<BijectionReport, CorrespondenceError> {
    let names = l.names();
    let family_solves = verify_family_solves(l, family, cfg)?;
    let zeta = zeta_from_family(family, xi, names, cfg)?;
    let [x1, x2] = coordinates(names);
    let on_family = |e: &Expr| e.substitute_one(&Atom::Jet(0, 0), &family.f);
    let char_on_f = on_family(&xi.expr())?
        .mul(&family.f.diff(&x1))
        .add(&family.f.diff(&x2))
        .sub(&on_family(&zeta)?);
    let invariance = is_zero_with(&char_on_f, cfg)?;
    let determining = determining_verdict(l, xi, &zeta, cfg)?;
    let zeta_star = match (xi, wave_rhs(l)) {
        (ReducedXi::Zero, Some(f)) => {
            adjoint_operator(&zeta, &f, CoorderBranch::One, Axis::Two, names, cfg).ok()
        }
        _ => None,
    };
    Ok(BijectionReport {
        zeta,
        zeta_star,
        family_solves,
        determining,
        invariance,
    })
}

/// Which formula relates an operator to its adjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoorderBranch {
    Zero,
    One,
}

/// Adjoint of `∂_source + ζ∂_u` for `u_{1,1} = F(u)`. The returned
/// coefficient belongs to `∂_other + ζ*∂_u`.
pub fn adjoint_operator(
    zeta: &Expr,
    f: &Expr,
    branch: CoorderBranch,
    source: Axis,
    names: &Names,
    cfg: &SampleConfig,
) -> Result<Expr, CorrespondenceError> {
    let u = Atom::Jet(0, 0);
    let along = coordinates(names)[source.other().index()].clone();
    let zeta_u = zeta.diff(&u);
    let zeta_u_zero = is_zero_with(&zeta_u, cfg)? == TriBool::ProvenZero;
    let wrong = |detail: &str| CorrespondenceError::WrongCoorderBranch {
        detail: detail.to_string(),
    };
    match branch {
        CoorderBranch::One => {
            if zeta_u_zero {
                return Err(wrong("ζ_u vanishes, use the co-order 0 formula"));
            }
            Ok(f.sub(&zeta.diff(&along)).div(&zeta_u)?)
        }
        CoorderBranch::Zero => {
            if !zeta_u_zero {
                return Err(wrong("ζ depends on u, use the co-order 1 formula"));
            }
            let f_u = f.diff(&u);
            if is_zero_with(&f_u, cfg)? == TriBool::ProvenZero {
                return Err(wrong("F_u vanishes"));
            }
            let z1 = zeta.diff(&along);
            let inverse = solve_for_leader(&f.sub(&z1), &u, cfg)?.value;
            let denominator = f_u.substitute_one(&u, &inverse)?;
            Ok(z1.diff(&along).div(&denominator)?)
        }
    }
}

/// The unique invariant solution `u = G^ζ(x)` of a zero co-order operator
/// and the verdict of `ζ = ξG_1 + G_2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coorder0Solution {
    pub solution: Expr,
    pub verdict: TriBool,
}

pub fn coorder0_solution(
    l: &DifferentialFunction,
    zeta: &Expr,
    xi: ReducedXi,
    cfg: &SampleConfig,
) -> Result<Coorder0Solution, CorrespondenceError> {
    let u = Atom::Jet(0, 0);
    if is_zero_with(&zeta.diff(&u), cfg)? != TriBool::ProvenZero {
        return Err(CorrespondenceError::WrongCoorderBranch {
            detail: "ζ depends on u".into(),
        });
    }
    let q = reduced_field(xi, zeta);
    let hat = eliminate_along(l, &q, Axis::Two)?.associated;
    if hat.ord() > 0 {
        return Err(ReductionError::LeaderNotSolvable {
            leader: u.to_string(),
            detail: format!("associated function has order {}", hat.ord()),
        }
        .into());
    }
    let g = solve_for_leader(hat.body(), &u, cfg)?.value;
    let [x1, x2] = coordinates(l.names());
    let xi_on = xi.expr().substitute_one(&u, &g)?;
    let criterion = zeta.sub(&xi_on.mul(&g.diff(&x1))).sub(&g.diff(&x2));
    Ok(Coorder0Solution {
        verdict: is_zero_with(&criterion, cfg)?,
        solution: g,
    })
}

/// κ-values and points per value used for implicit-surface sampling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurfaceSampling {
    pub kappas: Vec<Rat>,
    pub points: usize,
    pub seed: u64,
}

impl Default for SurfaceSampling {
    fn default() -> Self {
        SurfaceSampling {
            kappas: (1..=5).map(rat).collect(),
            points: 10,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceSample {
    pub kappa: f64,
    pub point: [f64; 3],
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BacklundReport {
    /// `ξΦ_1 + Φ_2 + ζΦ_u`.
    pub first: TriBool,
    /// `Φ_1 + G^ζΦ_u`.
    pub second: TriBool,
    pub g: Expr,
    /// `L` with its jets replaced by implicit derivatives of `Φ = κ`.
    pub surface_identity: TriBool,
    pub samples: Vec<SurfaceSample>,
}

impl BacklundReport {
    pub fn all_samples_zero(&self) -> bool {
        self.samples.iter().all(|s| s.residual == 0.0)
    }
}

struct Coordinates(HashMap<Atom, f64>);

impl Valuation for Coordinates {
    fn leaf(&mut self, a: &Atom) -> f64 {
        self.0.get(a).copied().unwrap_or(f64::NAN)
    }

    fn apply(&mut self, _app: &Application, _args: &[f64]) -> f64 {
        f64::NAN
    }
}

/// Jets of the function defined implicitly by `Φ(x, u) = κ`, as functions
/// of `(x, u)`.
fn implicit_jets(phi: &Expr, phi_u: &Expr, l: &DifferentialFunction) -> Result<HashMap<Atom, Expr>, CorrespondenceError> {
    let u = Atom::Jet(0, 0);
    let xs = coordinates(l.names());
    let first: [Expr; 2] = [
        phi.diff(&xs[0]).neg().div(phi_u)?,
        phi.diff(&xs[1]).neg().div(phi_u)?,
    ];
    let total = |e: &Expr, axis: Axis| e.diff(&xs[axis.index()]).add(&first[axis.index()].mul(&e.diff(&u)));
    let mut cache: BTreeMap<MultiIndex, Expr> = BTreeMap::new();
    cache.insert(MultiIndex(1, 0), first[0].clone());
    cache.insert(MultiIndex(0, 1), first[1].clone());
    for m in MultiIndex::up_to(l.ord().max(0) as u32) {
        if cache.contains_key(&m) {
            continue;
        }
        let v = if m.1 > 0 {
            total(&cache[&MultiIndex(m.0, m.1 - 1)], Axis::Two)
        } else {
            total(&cache[&MultiIndex(m.0 - 1, 0)], Axis::One)
        };
        cache.insert(m, v);
    }
    Ok(cache.into_iter().map(|(m, v)| (m.atom(), v)).collect())
}

/// Root of `g(u) = 0` found by scanning for a sign change and bisecting.
fn find_root(g: &dyn Fn(f64) -> f64) -> Option<f64> {
    let (lo, hi, steps) = (-60.0, 60.0, 4800);
    let h = (hi - lo) / steps as f64;
    let mut a = lo;
    let mut ga = g(a);
    for i in 1..=steps {
        let b = lo + h * i as f64;
        let gb = g(b);
        if ga.is_finite() && gb.is_finite() && (ga == 0.0 || ga.signum() != gb.signum()) {
            let (mut a, mut b, mut ga) = (a, b, ga);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let gm = g(m);
                if gm == 0.0 {
                    return Some(m);
                }
                if gm.signum() == ga.signum() {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            return Some(0.5 * (a + b));
        }
        a = b;
        ga = gb;
    }
    None
}

/// Checks both transformation identities and samples `L` on the surfaces
/// `Φ(x, u) = κ`.
pub fn backlund_verify(
    l: &DifferentialFunction,
    zeta: &Expr,
    phi: &Expr,
    xi: ReducedXi,
    sampling: &SurfaceSampling,
    cfg: &SampleConfig,
) -> Result<BacklundReport, CorrespondenceError> {
    let names = l.names();
    let u = Atom::Jet(0, 0);
    let phi_u = inverse_u_derivative(phi, cfg)?;
    let [x1, x2] = coordinates(names);
    let first = xi
        .expr()
        .mul(&phi.diff(&x1))
        .add(&phi.diff(&x2))
        .add(&zeta.mul(&phi_u));
    let q = reduced_field(xi, zeta);
    let hat = eliminate_along(l, &q, Axis::Two)?.associated;
    let g = solve_for_leader(hat.body(), &Atom::Jet(1, 0), cfg)?.value;
    let second = phi.diff(&x1).add(&g.mul(&phi_u));

    let on_surface = l.body().substitute(&implicit_jets(phi, &phi_u, l)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut samples = Vec::new();
    for kappa in &sampling.kappas {
        let k = kappa.to_f64().unwrap_or(f64::NAN);
        let mut found = 0;
        let mut attempts = 0;
        while found < sampling.points && attempts < 50 * sampling.points {
            attempts += 1;
            let a: f64 = rng.random_range(-0.4..0.4);
            let b: f64 = rng.random_range(-0.4..0.4);
            let level = |v: f64| {
                let mut at = Coordinates(HashMap::from([(x1.clone(), a), (x2.clone(), b), (u.clone(), v)]));
                phi.eval(&mut at) - k
            };
            let Some(v) = find_root(&level) else { continue };
            if level(v).abs() > 1e-8 * k.abs().max(1.0) {
                continue;
            }
            let mut at = Coordinates(HashMap::from([(x1.clone(), a), (x2.clone(), b), (u.clone(), v)]));
            let residual = on_surface.eval(&mut at);
            if !residual.is_finite() {
                continue;
            }
            samples.push(SurfaceSample {
                kappa: k,
                point: [a, b, v],
                residual,
            });
            found += 1;
        }
    }
    Ok(BacklundReport {
        first: is_zero_with(&first, cfg)?,
        second: is_zero_with(&second, cfg)?,
        g,
        surface_identity: is_zero_with(&on_surface, cfg)?,
        samples,
    })
}

/// Number of points requested by a sampling plan.
pub fn planned_samples(sampling: &SurfaceSampling) -> usize {
    sampling.kappas.len() * sampling.points
}
