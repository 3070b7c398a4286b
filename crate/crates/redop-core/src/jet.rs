//! Jet variables, total derivatives, characteristics and prolongations.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbolic::{Atom, Expr, Names};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JetError {
    #[error("vector field has both independent-variable coefficients equal to zero")]
    ZeroField,
    #[error("vector field coefficient depends on the derivative {atom}")]
    JetInCoefficient { atom: String },
    #[error("the order of an identically vanishing function is undefined here")]
    OrderUndefined,
}

/// One of the two independent variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::One => 0,
            Axis::Two => 1,
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::One => Axis::Two,
            Axis::Two => Axis::One,
        }
    }

    /// Multi-index of a single derivative along this axis.
    pub fn unit(self) -> MultiIndex {
        match self {
            Axis::One => MultiIndex(1, 0),
            Axis::Two => MultiIndex(0, 1),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}

/// Derivative counts `(α₁, α₂)` of a jet variable `u_{α₁,α₂}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub u32, pub u32);

impl MultiIndex {
    pub fn order(self) -> u32 {
        self.0 + self.1
    }

    pub fn along(self, axis: Axis) -> u32 {
        match axis {
            Axis::One => self.0,
            Axis::Two => self.1,
        }
    }

    pub fn shifted(self, axis: Axis) -> MultiIndex {
        match axis {
            Axis::One => MultiIndex(self.0 + 1, self.1),
            Axis::Two => MultiIndex(self.0, self.1 + 1),
        }
    }

    pub fn atom(self) -> Atom {
        Atom::Jet(self.0, self.1)
    }

    pub fn expr(self) -> Expr {
        Expr::jet(self.0, self.1)
    }

    /// All multi-indices with `0 < |α| <= r`, graded.
    pub fn up_to(r: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for n in 1..=r {
            for a in (0..=n).rev() {
                out.push(MultiIndex(a, n - a));
            }
        }
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0, self.1)
    }
}

/// Total derivative `D_i` on the jet space.
pub fn total_derivative(e: &Expr, axis: Axis, names: &Names) -> Expr {
    let x = Atom::Var(names.x[axis.index()].clone());
    e.derive(&|a: &Atom| -> Option<Expr> {
        match a {
            Atom::Jet(p, q) => Some(MultiIndex(*p, *q).shifted(axis).expr()),
            Atom::Apply(_) => None,
            _ if *a == x => Some(Expr::one()),
            _ => Some(Expr::zero()),
        }
    })
}

/// Order of a differential function: the highest jet order among the
/// atoms it genuinely depends on, `0` when it depends on none and `-1`
/// when it vanishes identically.
pub fn ord(e: &Expr) -> i32 {
    if e.is_zero() {
        return -1;
    }
    e.max_free_leaf(Atom::jet_order).map_or(0, |m| m as i32)
}

/// True when `e` depends on `u` or any of its derivatives.
pub fn depends_on_u(e: &Expr) -> bool {
    e.free_leaves().iter().any(|a| matches!(a, Atom::Jet(..)))
}

/// An expression together with the coordinates that give its jet
/// variables their meaning.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferentialFunction {
    body: Expr,
    names: Names,
    order: i32,
}

impl DifferentialFunction {
    pub fn new(body: Expr, names: Names) -> Self {
        let order = ord(&body);
        DifferentialFunction { body, names, order }
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn names(&self) -> &Names {
        &self.names
    }

    pub fn ord(&self) -> i32 {
        self.order
    }

    pub fn depends_on_u(&self) -> bool {
        depends_on_u(&self.body)
    }

    pub fn total_derivative(&self, axis: Axis) -> DifferentialFunction {
        DifferentialFunction::new(total_derivative(&self.body, axis, &self.names), self.names.clone())
    }

    pub fn with_body(&self, body: Expr) -> DifferentialFunction {
        DifferentialFunction::new(body, self.names.clone())
    }
}

/// `Q = ξ¹∂₁ + ξ²∂₂ + η∂_u` with coefficients depending on `(x, u)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorField {
    pub xi: [Expr; 2],
    pub eta: Expr,
}

impl VectorField {
    pub fn new(xi1: Expr, xi2: Expr, eta: Expr) -> Result<Self, JetError> {
        if xi1.is_zero() && xi2.is_zero() {
            return Err(JetError::ZeroField);
        }
        for c in [&xi1, &xi2, &eta] {
            if let Some(a) = c
                .free_leaves()
                .into_iter()
                .find(|a| a.jet_order().is_some_and(|n| n > 0))
            {
                return Err(JetError::JetInCoefficient {
                    atom: a.to_string(),
                });
            }
        }
        Ok(VectorField {
            xi: [xi1, xi2],
            eta,
        })
    }

    pub fn xi(&self, axis: Axis) -> &Expr {
        &self.xi[axis.index()]
    }

    /// The vector field multiplied by a function.
    pub fn scaled(&self, lambda: &Expr) -> Result<Self, JetError> {
        VectorField::new(
            self.xi[0].mul(lambda),
            self.xi[1].mul(lambda),
            self.eta.mul(lambda),
        )
    }

    /// Action on a function of `(x, u)`.
    pub fn apply(&self, f: &Expr, names: &Names) -> Expr {
        let x1 = Atom::Var(names.x[0].clone());
        let x2 = Atom::Var(names.x[1].clone());
        f.derive(&|a: &Atom| -> Option<Expr> {
            match a {
                Atom::Jet(0, 0) => Some(self.eta.clone()),
                Atom::Apply(_) => None,
                _ if *a == x1 => Some(self.xi[0].clone()),
                _ if *a == x2 => Some(self.xi[1].clone()),
                _ => Some(Expr::zero()),
            }
        })
    }

    pub fn render(&self, names: &Names) -> String {
        format!(
            "{}, {}, {}",
            self.xi[0].render(names),
            self.xi[1].render(names),
            self.eta.render(names)
        )
    }
}

/// `Q[u] = η − ξ¹u₁ − ξ²u₂`.
pub fn characteristic(q: &VectorField) -> Expr {
    q.eta
        .sub(&q.xi[0].mul(&Expr::jet(1, 0)))
        .sub(&q.xi[1].mul(&Expr::jet(0, 1)))
}

/// Memoized coefficients `η^{αβ}` of the prolonged vector field.
struct Prolongation<'a> {
    q: &'a VectorField,
    names: &'a Names,
    derivatives: RefCell<HashMap<MultiIndex, Expr>>,
}

impl<'a> Prolongation<'a> {
    fn new(q: &'a VectorField, names: &'a Names) -> Self {
        let mut derivatives = HashMap::new();
        derivatives.insert(MultiIndex(0, 0), characteristic(q));
        Prolongation {
            q,
            names,
            derivatives: RefCell::new(derivatives),
        }
    }

    /// `D₁^α D₂^β Q[u]`.
    fn derived(&self, m: MultiIndex) -> Expr {
        if let Some(v) = self.derivatives.borrow().get(&m) {
            return v.clone();
        }
        let v = if m.1 > 0 {
            total_derivative(&self.derived(MultiIndex(m.0, m.1 - 1)), Axis::Two, self.names)
        } else {
            total_derivative(&self.derived(MultiIndex(m.0 - 1, 0)), Axis::One, self.names)
        };
        self.derivatives.borrow_mut().insert(m, v.clone());
        v
    }

    fn coefficient(&self, m: MultiIndex) -> Expr {
        if m.order() == 0 {
            return self.q.eta.clone();
        }
        self.derived(m)
            .add(&self.q.xi[0].mul(&m.shifted(Axis::One).expr()))
            .add(&self.q.xi[1].mul(&m.shifted(Axis::Two).expr()))
    }
}

/// Coefficients `η^{αβ}` for `|α| <= r`, including `η^{00} = η`.
pub fn prolong(q: &VectorField, r: u32, names: &Names) -> BTreeMap<MultiIndex, Expr> {
    let p = Prolongation::new(q, names);
    let mut out = BTreeMap::new();
    out.insert(MultiIndex(0, 0), q.eta.clone());
    for m in MultiIndex::up_to(r) {
        out.insert(m, p.coefficient(m));
    }
    out
}

/// `Q_(r) L` with `r = ord L`.
pub fn apply_prolonged(q: &VectorField, l: &DifferentialFunction) -> Result<Expr, JetError> {
    if l.ord() < 0 {
        return Err(JetError::OrderUndefined);
    }
    let names = l.names();
    let p = Prolongation::new(q, names);
    let x1 = Atom::Var(names.x[0].clone());
    let x2 = Atom::Var(names.x[1].clone());
    Ok(l.body().derive(&|a: &Atom| -> Option<Expr> {
        match a {
            Atom::Jet(i, j) => Some(p.coefficient(MultiIndex(*i, *j))),
            Atom::Apply(_) => None,
            _ if *a == x1 => Some(q.xi[0].clone()),
            _ if *a == x2 => Some(q.xi[1].clone()),
            _ => Some(Expr::zero()),
        }
    }))
}

/// Exchanges the roles of the two independent variables.
pub fn swap_axes(l: &DifferentialFunction) -> DifferentialFunction {
    let names = l.names();
    let swapped = Names {
        x: [names.x[1].clone(), names.x[0].clone()],
        u: names.u.clone(),
    };
    let mut map = HashMap::new();
    for a in l.body().free_leaves() {
        if let Atom::Jet(p, q) = a {
            if p != q {
                map.insert(Atom::Jet(p, q), Expr::jet(q, p));
            }
        }
    }
    let body = l
        .body()
        .substitute(&map)
        .expect("renaming jet variables cannot create a zero denominator");
    DifferentialFunction::new(body, swapped)
}
