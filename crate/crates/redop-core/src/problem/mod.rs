//! Problem files: declarations, the equation, and named inputs.

mod lexer;
mod parse;

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

pub use parse::{parse_expression, parse_problem};

use crate::correspondence::SolutionFamily;
use crate::jet::{DifferentialFunction, VectorField};
use crate::reduction::Ansatz;
use crate::symbolic::{render_atom, Expr, Names, SampleConfig, SymbolicError, UnknownFunction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProblemError {
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: undeclared identifier {name}")]
    UndeclaredIdentifier {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("{line}:{column}: {source}")]
    Symbolic {
        line: usize,
        column: usize,
        source: SymbolicError,
    },
    #[error("the equation must have order at least 1")]
    OrderTooLow,
}

/// `lhs = rhs`, kept as written so the file can be re-rendered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Equation {
    pub fn body(&self) -> Expr {
        self.lhs.sub(&self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedField {
    pub name: String,
    pub field: VectorField,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedFamily {
    pub name: String,
    pub family: SolutionFamily,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedAnsatz {
    pub name: String,
    pub ansatz: Ansatz,
}

/// Overrides of the sampling configuration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Settings {
    pub samples: Option<u32>,
    pub seed: Option<u64>,
}

impl Settings {
    pub fn apply(&self, mut cfg: SampleConfig) -> SampleConfig {
        if let Some(n) = self.samples {
            cfg.samples = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub names: Names,
    pub functions: Vec<Arc<UnknownFunction>>,
    pub equation: Equation,
    pub fields: Vec<NamedField>,
    pub families: Vec<NamedFamily>,
    pub ansatzes: Vec<NamedAnsatz>,
    pub settings: Settings,
}

impl Problem {
    pub fn differential_function(&self) -> DifferentialFunction {
        DifferentialFunction::new(self.equation.body(), self.names.clone())
    }

    pub fn field(&self, name: &str) -> Option<&VectorField> {
        self.fields.iter().find(|f| f.name == name).map(|f| &f.field)
    }

    pub fn family(&self, name: &str) -> Option<&SolutionFamily> {
        self.families.iter().find(|f| f.name == name).map(|f| &f.family)
    }

    pub fn ansatz(&self, name: &str) -> Option<&Ansatz> {
        self.ansatzes.iter().find(|f| f.name == name).map(|f| &f.ansatz)
    }

    pub fn function(&self, name: &str) -> Option<&Arc<UnknownFunction>> {
        self.functions.iter().find(|f| &*f.name == name)
    }

    /// Renders the problem back into the input grammar.
    pub fn render(&self) -> String {
        let n = &self.names;
        let r = |e: &Expr| e.render(n);
        let mut out = String::new();
        let _ = writeln!(out, "vars {} {};", n.x[0], n.x[1]);
        let _ = writeln!(out, "dep {};", n.u);
        for f in &self.functions {
            let args: Vec<String> = f.formal.iter().map(|a| render_atom(&a.atom(), n)).collect();
            let _ = write!(out, "fn {}({})", f.name, args.join(", "));
            if !f.nonzero.is_empty() {
                out.push_str(" assume nonzero");
                for idx in &f.nonzero {
                    let sym = f.symbol(idx.clone());
                    let atom = sym.as_atom().expect("symbol is an atom");
                    let _ = write!(out, " {}", render_atom(&atom, n));
                }
            }
            if let Some(inv) = &f.inverse {
                let _ = write!(out, " inverse {inv}");
            }
            out.push_str(";\n");
        }
        let _ = writeln!(out, "eq: {} = {};", r(&self.equation.lhs), r(&self.equation.rhs));
        for f in &self.fields {
            let _ = writeln!(out, "field {}: {};", f.name, f.field.render(n));
        }
        for f in &self.families {
            let fam = &f.family;
            let _ = writeln!(
                out,
                "family {}: {} param {} inverse {};",
                f.name,
                r(&fam.f),
                fam.param,
                r(&fam.inverse)
            );
        }
        for a in &self.ansatzes {
            let _ = writeln!(
                out,
                "ansatz {}: {} omega {};",
                a.name,
                r(&a.ansatz.body),
                r(&a.ansatz.omega)
            );
        }
        if let Some(s) = self.settings.samples {
            let _ = writeln!(out, "set samples {s};");
        }
        if let Some(s) = self.settings.seed {
            let _ = writeln!(out, "set seed {s};");
        }
        out
    }
}
