use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::poly::Poly;
use super::SymbolicError;

/// Interned-by-value identifier.
pub type Name = Arc<str>;

/// A formal argument of an unknown function.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormalArg {
    Var(Name),
    Jet(u32, u32),
}

impl FormalArg {
    pub fn atom(&self) -> Atom {
        match self {
            FormalArg::Var(n) => Atom::Var(n.clone()),
            FormalArg::Jet(a, b) => Atom::Jet(*a, *b),
        }
    }
}

/// A named arbitrary element with its formal argument list.
///
/// Nonvanishing assumptions are stored as derivative multi-indices over the
/// formal arguments; `[1]` on `F(u)` means `F_u != 0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnknownFunction {
    pub name: Name,
    pub formal: Vec<FormalArg>,
    pub nonzero: Vec<Vec<u32>>,
    pub inverse: Option<Name>,
}

impl UnknownFunction {
    pub fn new(name: &str, formal: Vec<FormalArg>) -> Result<Self, SymbolicError> {
        for (i, a) in formal.iter().enumerate() {
            if formal[..i].contains(a) {
                return Err(SymbolicError::DuplicateFormalArg {
                    function: name.to_string(),
                });
            }
        }
        Ok(UnknownFunction {
            name: name.into(),
            formal,
            nonzero: Vec::new(),
            inverse: None,
        })
    }

    pub fn arity(&self) -> usize {
        self.formal.len()
    }

    /// Registers `∂^index self != 0`.
    pub fn assume_nonzero(mut self, index: Vec<u32>) -> Result<Self, SymbolicError> {
        if index.len() != self.arity() {
            return Err(SymbolicError::ForeignAssumption {
                function: self.name.to_string(),
            });
        }
        if !self.nonzero.contains(&index) {
            self.nonzero.push(index);
            self.nonzero.sort();
        }
        Ok(self)
    }

    pub fn with_inverse(mut self, inverse: &str) -> Self {
        self.inverse = Some(inverse.into());
        self
    }

    pub fn is_nonzero(&self, index: &[u32]) -> bool {
        self.nonzero.iter().any(|i| i == index)
    }

    /// Signature of the declared formal inverse, a function of one argument.
    pub fn inverse_function(&self) -> Option<UnknownFunction> {
        let inv = self.inverse.as_ref()?;
        if self.arity() != 1 {
            return None;
        }
        Some(UnknownFunction {
            name: inv.clone(),
            formal: vec![FormalArg::Var("s".into())],
            nonzero: Vec::new(),
            inverse: Some(self.name.clone()),
        })
    }

    /// The symbol `∂^index self` evaluated at its formal arguments.
    pub fn symbol(self: &Arc<Self>, index: Vec<u32>) -> Expr {
        let args = self.formal.iter().map(|a| Expr::atom(a.atom())).collect();
        Expr::apply(self, index, args)
    }

    pub fn formal_symbol(self: &Arc<Self>) -> Expr {
        self.symbol(vec![0; self.arity()])
    }
}

/// An unknown-function derivative symbol applied to actual arguments.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Application {
    pub func: Arc<UnknownFunction>,
    pub index: Vec<u32>,
    pub args: Vec<Expr>,
}

impl Application {
    pub fn order(&self) -> u32 {
        self.index.iter().sum()
    }

    /// True when the actual arguments are exactly the formal ones.
    pub fn is_formal(&self) -> bool {
        self.func
            .formal
            .iter()
            .zip(&self.args)
            .all(|(f, a)| a.as_atom().is_some_and(|x| x == f.atom()))
    }

    pub fn shifted(&self, slot: usize) -> Application {
        let mut index = self.index.clone();
        index[slot] += 1;
        Application {
            func: self.func.clone(),
            index,
            args: self.args.clone(),
        }
    }
}

/// Indivisible symbols of the polynomial layer.
///
/// Kernels carry their normalized argument. `Slot` is a placeholder used
/// while computing gcds in a plain polynomial ring.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Var(Name),
    Jet(u32, u32),
    Omega(u32, u32),
    Apply(Arc<Application>),
    Ln(Expr),
    Sqrt(Arc<Poly>),
    Exp(Expr),
    Slot(u32),
}

impl Atom {
    pub fn var(name: &str) -> Atom {
        Atom::Var(name.into())
    }

    pub fn is_kernel(&self) -> bool {
        matches!(self, Atom::Ln(_) | Atom::Sqrt(_) | Atom::Exp(_))
    }

    /// Atoms that are coordinates rather than composite symbols.
    pub fn is_leaf(&self) -> bool {
        matches!(
            self,
            Atom::Var(_) | Atom::Jet(..) | Atom::Omega(..) | Atom::Slot(_)
        )
    }

    pub fn jet_order(&self) -> Option<u32> {
        match self {
            Atom::Jet(a, b) => Some(a + b),
            _ => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = super::render::Names::default();
        write!(f, "{}", super::render::render_atom(self, &names))
    }
}
