use std::sync::Arc;

use num_traits::One;
use serde::{Deserialize, Serialize};

use super::atom::{Atom, UnknownFunction};
use super::expr::Expr;
use super::poly::{Monomial, Poly, Rat};
use super::SymbolicError;

/// Expression tree with explicit node kinds.
///
/// Parsers produce trees in source order; [`Expr::to_tree`] produces the
/// canonical tree, with flattened sums and products in display order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum ExprTree {
    Rational { value: String },
    Variable { name: String },
    Jet { a: u32, b: u32 },
    Omega { a: u32, b: u32 },
    Symbol {
        function: Arc<UnknownFunction>,
        index: Vec<u32>,
        args: Vec<ExprTree>,
    },
    Sum { terms: Vec<ExprTree> },
    Product { factors: Vec<ExprTree> },
    Power { base: Box<ExprTree>, exponent: i64 },
    Exp { arg: Box<ExprTree> },
    Ln { arg: Box<ExprTree> },
    Sqrt { arg: Box<ExprTree> },
}

impl ExprTree {
    pub fn rational(r: &Rat) -> ExprTree {
        let value = if r.is_integer() {
            r.numer().to_string()
        } else {
            format!("{}/{}", r.numer(), r.denom())
        };
        ExprTree::Rational { value }
    }

    /// Canonical rational normal form of the tree.
    pub fn normalize(&self) -> Result<Expr, SymbolicError> {
        Ok(match self {
            ExprTree::Rational { value } => Expr::constant(parse_rat(value)?),
            ExprTree::Variable { name } => Expr::var(name),
            ExprTree::Jet { a, b } => Expr::jet(*a, *b),
            ExprTree::Omega { a, b } => Expr::atom(Atom::Omega(*a, *b)),
            ExprTree::Symbol {
                function,
                index,
                args,
            } => {
                let args = args.iter().map(|t| t.normalize()).collect::<Result<_, _>>()?;
                Expr::apply(function, index.clone(), args)
            }
            ExprTree::Sum { terms } => {
                let mut acc = Expr::zero();
                for t in terms {
                    acc = acc.add(&t.normalize()?);
                }
                acc
            }
            ExprTree::Product { factors } => {
                let mut acc = Expr::one();
                for t in factors {
                    acc = acc.mul(&t.normalize()?);
                }
                acc
            }
            ExprTree::Power { base, exponent } => base.normalize()?.powi(*exponent)?,
            ExprTree::Exp { arg } => arg.normalize()?.exp(),
            ExprTree::Ln { arg } => arg.normalize()?.ln()?,
            ExprTree::Sqrt { arg } => arg.normalize()?.sqrt(),
        })
    }
}

fn parse_rat(s: &str) -> Result<Rat, SymbolicError> {
    let bad = || SymbolicError::MalformedTree {
        detail: format!("bad rational literal {s:?}"),
    };
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: num_bigint::BigInt = n.trim().parse().map_err(|_| bad())?;
    let d: num_bigint::BigInt = d.trim().parse().map_err(|_| bad())?;
    if d == 0.into() {
        return Err(SymbolicError::DivisionByZero);
    }
    Ok(Rat::new(n, d))
}

fn atom_tree(a: &Atom) -> ExprTree {
    match a {
        Atom::Var(n) => ExprTree::Variable { name: n.to_string() },
        Atom::Jet(a, b) => ExprTree::Jet { a: *a, b: *b },
        Atom::Omega(a, b) => ExprTree::Omega { a: *a, b: *b },
        Atom::Slot(i) => ExprTree::Variable {
            name: format!("slot{i}"),
        },
        Atom::Apply(app) => ExprTree::Symbol {
            function: app.func.clone(),
            index: app.index.clone(),
            args: app.args.iter().map(|x| x.to_tree()).collect(),
        },
        Atom::Exp(arg) => ExprTree::Exp {
            arg: Box::new(arg.to_tree()),
        },
        Atom::Ln(arg) => ExprTree::Ln {
            arg: Box::new(arg.to_tree()),
        },
        Atom::Sqrt(p) => ExprTree::Sqrt {
            arg: Box::new(poly_tree(p)),
        },
    }
}

fn monomial_tree(m: &Monomial, c: &Rat) -> ExprTree {
    let mut factors = Vec::new();
    if !c.is_one() || m.is_one() {
        factors.push(ExprTree::rational(c));
    }
    for (a, e) in m.factors() {
        let t = atom_tree(a);
        factors.push(if *e == 1 {
            t
        } else {
            ExprTree::Power {
                base: Box::new(t),
                exponent: *e as i64,
            }
        });
    }
    if factors.len() == 1 {
        factors.pop().expect("one factor")
    } else {
        ExprTree::Product { factors }
    }
}

fn poly_tree(p: &Poly) -> ExprTree {
    let mut terms: Vec<ExprTree> = p
        .terms()
        .iter()
        .map(|(m, c)| monomial_tree(m, c))
        .collect();
    match terms.len() {
        0 => ExprTree::rational(&Rat::from_integer(0.into())),
        1 => terms.pop().expect("one term"),
        _ => ExprTree::Sum { terms },
    }
}

impl Expr {
    /// Canonical tree view of the normal form.
    pub fn to_tree(&self) -> ExprTree {
        let num = poly_tree(self.numer());
        if self.is_polynomial() {
            return num;
        }
        let den = ExprTree::Power {
            base: Box::new(poly_tree(self.denom())),
            exponent: -1,
        };
        match num {
            ExprTree::Product { mut factors } => {
                factors.push(den);
                ExprTree::Product { factors }
            }
            other => ExprTree::Product {
                factors: vec![other, den],
            },
        }
    }

    /// Re-normalizes through the tree view; the identity on canonical forms.
    pub fn normalize(&self) -> Result<Expr, SymbolicError> {
        self.to_tree().normalize()
    }
}
