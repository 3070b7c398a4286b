use std::sync::Arc;

use num_traits::ToPrimitive;

use super::lexer::{tokenize, Tok, Token};
use super::{Equation, NamedAnsatz, NamedFamily, NamedField, Problem, ProblemError, Settings};
use crate::correspondence::SolutionFamily;
use crate::jet::VectorField;
use crate::reduction::{Ansatz, PHI};
use crate::symbolic::{Expr, FormalArg, Names, UnknownFunction};

/// Identifiers visible while parsing one expression.
struct Scope<'a> {
    names: &'a Names,
    functions: &'a [Arc<UnknownFunction>],
    extras: &'a [String],
}

impl Scope<'_> {
    fn function(&self, name: &str) -> Option<&Arc<UnknownFunction>> {
        self.functions.iter().find(|f| &*f.name == name)
    }

    fn is_independent(&self, name: &str) -> Option<usize> {
        self.names.x.iter().position(|x| &**x == name)
    }

    /// `u_txx` style token with letters from single-letter independents.
    fn jet_suffix(&self, suffix: &str) -> Option<(u32, u32)> {
        let mut idx = [0u32; 2];
        for c in suffix.chars() {
            let k = self
                .names
                .x
                .iter()
                .position(|x| x.chars().count() == 1 && x.starts_with(c))?;
            idx[k] += 1;
        }
        Some((idx[0], idx[1]))
    }
}

fn formal_letter(f: &FormalArg, names: &Names) -> Option<char> {
    let name = match f {
        FormalArg::Var(n) => n.to_string(),
        FormalArg::Jet(0, 0) => names.u.to_string(),
        FormalArg::Jet(..) => return None,
    };
    let mut it = name.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

/// Derivative multi-index over formal arguments for a suffix like `xu`.
fn function_suffix(func: &UnknownFunction, suffix: &str, names: &Names) -> Option<Vec<u32>> {
    let letters: Vec<Option<char>> = func.formal.iter().map(|f| formal_letter(f, names)).collect();
    let mut idx = vec![0u32; func.arity()];
    for c in suffix.chars() {
        let k = letters.iter().position(|l| *l == Some(c))?;
        idx[k] += 1;
    }
    Some(idx)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos) {
            Some(t) => (t.line, t.column),
            None => (self.end_line, 1),
        }
    }

    fn error(&self, message: impl Into<String>) -> ProblemError {
        let (line, column) = self.here();
        ProblemError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn undeclared(&self, name: &str) -> ProblemError {
        let (line, column) = self.here();
        ProblemError::UndeclaredIdentifier {
            name: name.to_string(),
            line,
            column,
        }
    }

    fn symbolic(&self, e: crate::symbolic::SymbolicError) -> ProblemError {
        let (line, column) = self.here();
        ProblemError::Symbolic {
            line,
            column,
            source: e,
        }
    }

    fn is_sym(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Sym(c))
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.is_sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ProblemError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ProblemError> {
        if self.is_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{kw}'")))
        }
    }

    fn ident(&mut self) -> Result<String, ProblemError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn int(&mut self) -> Result<i64, ProblemError> {
        let neg = self.eat_sym('-');
        match self.peek() {
            Some(Tok::Int(n)) => {
                let v = n.to_i64().ok_or_else(|| self.error("integer too large"))?;
                self.pos += 1;
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.error("expected integer")),
        }
    }

    fn index_list(&mut self) -> Result<Vec<u32>, ProblemError> {
        self.expect_sym('[')?;
        let mut out = Vec::new();
        loop {
            let v = self.int()?;
            out.push(u32::try_from(v).map_err(|_| self.error("negative derivative count"))?);
            if self.eat_sym(']') {
                return Ok(out);
            }
            self.expect_sym(',')?;
        }
    }

    fn expr(&mut self, s: &Scope) -> Result<Expr, ProblemError> {
        let mut acc = self.term(s)?;
        loop {
            if self.eat_sym('+') {
                acc = acc.add(&self.term(s)?);
            } else if self.eat_sym('-') {
                acc = acc.sub(&self.term(s)?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self, s: &Scope) -> Result<Expr, ProblemError> {
        let mut acc = self.unary(s)?;
        loop {
            if self.eat_sym('*') {
                acc = acc.mul(&self.unary(s)?);
            } else if self.is_sym('/') {
                self.pos += 1;
                let d = self.unary(s)?;
                acc = acc.div(&d).map_err(|e| self.symbolic(e))?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self, s: &Scope) -> Result<Expr, ProblemError> {
        if self.eat_sym('-') {
            return Ok(self.unary(s)?.neg());
        }
        if self.eat_sym('+') {
            return self.unary(s);
        }
        self.power(s)
    }

    fn power(&mut self, s: &Scope) -> Result<Expr, ProblemError> {
        let base = self.primary(s)?;
        if !self.eat_sym('^') {
            return Ok(base);
        }
        let n = if self.eat_sym('(') {
            let n = self.int()?;
            self.expect_sym(')')?;
            n
        } else {
            self.int()?
        };
        base.powi(n).map_err(|e| self.symbolic(e))
    }

    fn args(&mut self, s: &Scope) -> Result<Vec<Expr>, ProblemError> {
        self.expect_sym('(')?;
        let mut out = Vec::new();
        if self.eat_sym(')') {
            return Ok(out);
        }
        loop {
            out.push(self.expr(s)?);
            if self.eat_sym(')') {
                return Ok(out);
            }
            self.expect_sym(',')?;
        }
    }

    fn application(
        &mut self,
        s: &Scope,
        func: &Arc<UnknownFunction>,
        index: Vec<u32>,
    ) -> Result<Expr, ProblemError> {
        if self.is_sym('(') {
            let args = self.args(s)?;
            if args.len() != func.arity() {
                return Err(self.error(format!(
                    "{} expects {} arguments, got {}",
                    func.name,
                    func.arity(),
                    args.len()
                )));
            }
            Ok(Expr::apply(func, index, args))
        } else {
            Ok(func.symbol(index))
        }
    }

    fn primary(&mut self, s: &Scope) -> Result<Expr, ProblemError> {
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok(Expr::constant(n.into()))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr(s)?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                self.identifier(s, &name)
            }
            _ => Err(self.error("expected expression")),
        }
    }

    fn identifier(&mut self, s: &Scope, name: &str) -> Result<Expr, ProblemError> {
        if matches!(name, "exp" | "ln" | "sqrt") && self.is_sym('(') {
            let args = self.args(s)?;
            let [arg] = <[Expr; 1]>::try_from(args)
                .map_err(|_| self.error(format!("{name} takes one argument")))?;
            return match name {
                "exp" => Ok(arg.exp()),
                "ln" => arg.ln().map_err(|e| self.symbolic(e)),
                _ => Ok(arg.sqrt()),
            };
        }
        if name == &*s.names.u {
            if self.is_sym('[') {
                let idx = self.index_list()?;
                return match idx[..] {
                    [a, b] => Ok(Expr::jet(a, b)),
                    _ => Err(self.error("jet index needs two entries")),
                };
            }
            return Ok(Expr::jet(0, 0));
        }
        if s.is_independent(name).is_some() || s.extras.iter().any(|e| e == name) {
            return Ok(Expr::var(name));
        }
        if let Some(func) = s.function(name).cloned() {
            let index = if self.is_sym('[') {
                let idx = self.index_list()?;
                if idx.len() != func.arity() {
                    return Err(self.error("derivative index length differs from arity"));
                }
                idx
            } else {
                vec![0; func.arity()]
            };
            return self.application(s, &func, index);
        }
        for (k, _) in name.match_indices('_') {
            let (head, suffix) = (&name[..k], &name[k + 1..]);
            if suffix.is_empty() {
                continue;
            }
            if head == &*s.names.u {
                if let Some((a, b)) = s.jet_suffix(suffix) {
                    return Ok(Expr::jet(a, b));
                }
            }
            if let Some(func) = s.function(head).cloned() {
                if let Some(index) = function_suffix(&func, suffix, s.names) {
                    return self.application(s, &func, index);
                }
            }
        }
        let head = name.split('_').next().unwrap_or(name);
        let known = head == &*s.names.u || s.function(head).is_some();
        self.pos -= 1;
        let err = self.undeclared(if known { name } else { head });
        self.pos += 1;
        Err(err)
    }
}

/// Statement-level parser state.
struct Builder {
    names: Option<Names>,
    vars: Option<[String; 2]>,
    problem_fns: Vec<Arc<UnknownFunction>>,
    equation: Option<Equation>,
    fields: Vec<NamedField>,
    families: Vec<NamedFamily>,
    ansatzes: Vec<NamedAnsatz>,
    settings: Settings,
}

impl Builder {
    fn names(&self, p: &Parser) -> Result<Names, ProblemError> {
        self.names
            .clone()
            .ok_or_else(|| p.error("'vars' and 'dep' must precede this statement"))
    }

    fn declared(&self, name: &str) -> bool {
        let in_names = self
            .names
            .as_ref()
            .is_some_and(|n| n.x.iter().any(|x| &**x == name) || &*n.u == name);
        let in_vars = self.vars.as_ref().is_some_and(|v| v.iter().any(|x| x == name));
        in_names || in_vars || self.problem_fns.iter().any(|f| &*f.name == name)
    }

    fn check_fresh(&self, p: &Parser, name: &str) -> Result<(), ProblemError> {
        if self.declared(name) || is_reserved(name) {
            return Err(p.error(format!("identifier {name} is already in use")));
        }
        Ok(())
    }
}

fn is_reserved(name: &str) -> bool {
    matches!(
        name,
        "exp" | "ln" | "sqrt" | "vars" | "dep" | "fn" | "eq" | "field" | "family" | "ansatz"
            | "param" | "inverse" | "omega" | "assume" | "nonzero" | "set"
    ) || name == PHI
}

pub fn parse_problem(text: &str) -> Result<Problem, ProblemError> {
    let toks = tokenize(text)?;
    let end_line = text.lines().count().max(1);
    let mut p = Parser {
        toks,
        pos: 0,
        end_line,
    };
    let mut b = Builder {
        names: None,
        vars: None,
        problem_fns: Vec::new(),
        equation: None,
        fields: Vec::new(),
        families: Vec::new(),
        ansatzes: Vec::new(),
        settings: Settings::default(),
    };
    while p.peek().is_some() {
        let kw = p.ident()?;
        match kw.as_str() {
            "vars" => {
                let a = p.ident()?;
                let c = p.ident()?;
                if a == c {
                    return Err(p.error("independent variables must differ"));
                }
                for n in [&a, &c] {
                    if is_reserved(n) || n.contains('_') {
                        return Err(p.error(format!("{n} cannot name a variable")));
                    }
                }
                b.vars = Some([a, c]);
            }
            "dep" => {
                let u = p.ident()?;
                let Some([a, c]) = b.vars.clone() else {
                    return Err(p.error("'vars' must precede 'dep'"));
                };
                if u == a || u == c || is_reserved(&u) || u.contains('_') {
                    return Err(p.error(format!("{u} cannot name the dependent variable")));
                }
                b.names = Some(Names::new(&a, &c, &u));
            }
            "fn" => {
                let names = b.names(&p)?;
                let f = function_decl(&mut p, &b, &names)?;
                b.problem_fns.push(Arc::new(f));
            }
            "eq" => {
                p.expect_sym(':')?;
                let names = b.names(&p)?;
                if b.equation.is_some() {
                    return Err(p.error("duplicate equation"));
                }
                let scope = Scope {
                    names: &names,
                    functions: &b.problem_fns,
                    extras: &[],
                };
                let lhs = p.expr(&scope)?;
                let rhs = if p.eat_sym('=') {
                    p.expr(&scope)?
                } else {
                    Expr::zero()
                };
                b.equation = Some(Equation { lhs, rhs });
            }
            "field" => {
                let names = b.names(&p)?;
                let name = p.ident()?;
                p.expect_sym(':')?;
                let scope = Scope {
                    names: &names,
                    functions: &b.problem_fns,
                    extras: &[],
                };
                let xi1 = p.expr(&scope)?;
                p.expect_sym(',')?;
                let xi2 = p.expr(&scope)?;
                p.expect_sym(',')?;
                let eta = p.expr(&scope)?;
                let field = VectorField::new(xi1, xi2, eta).map_err(|e| p.error(e.to_string()))?;
                b.fields.push(NamedField { name, field });
            }
            "family" => {
                let names = b.names(&p)?;
                let name = p.ident()?;
                p.expect_sym(':')?;
                let param = find_param(&p)?;
                b.check_fresh(&p, &param)?;
                let extras = [param.clone()];
                let scope = Scope {
                    names: &names,
                    functions: &b.problem_fns,
                    extras: &extras,
                };
                let f = p.expr(&scope)?;
                p.expect_keyword("param")?;
                p.ident()?;
                p.expect_keyword("inverse")?;
                let plain = Scope {
                    names: &names,
                    functions: &b.problem_fns,
                    extras: &[],
                };
                let inverse = p.expr(&plain)?;
                b.families.push(NamedFamily {
                    name,
                    family: SolutionFamily {
                        f,
                        param: param.as_str().into(),
                        inverse,
                    },
                });
            }
            "ansatz" => {
                let names = b.names(&p)?;
                let name = p.ident()?;
                p.expect_sym(':')?;
                let extras = [PHI.to_string()];
                let scope = Scope {
                    names: &names,
                    functions: &b.problem_fns,
                    extras: &extras,
                };
                let body = p.expr(&scope)?;
                p.expect_keyword("omega")?;
                let plain = Scope {
                    names: &names,
                    functions: &b.problem_fns,
                    extras: &[],
                };
                let omega = p.expr(&plain)?;
                b.ansatzes.push(NamedAnsatz {
                    name,
                    ansatz: Ansatz { body, omega },
                });
            }
            "set" => {
                let key = p.ident()?;
                let v = p.int()?;
                match key.as_str() {
                    "samples" if v > 0 => b.settings.samples = Some(v as u32),
                    "seed" if v >= 0 => b.settings.seed = Some(v as u64),
                    _ => return Err(p.error(format!("invalid setting {key} = {v}"))),
                }
            }
            other => {
                p.pos -= 1;
                return Err(p.error(format!("unknown statement {other:?}")));
            }
        }
        p.expect_sym(';')?;
    }
    let names = b
        .names
        .clone()
        .ok_or_else(|| p.error("missing 'vars' or 'dep' declaration"))?;
    let equation = b.equation.ok_or_else(|| p.error("missing 'eq:' statement"))?;
    let problem = Problem {
        names,
        functions: b.problem_fns,
        equation,
        fields: b.fields,
        families: b.families,
        ansatzes: b.ansatzes,
        settings: b.settings,
    };
    if problem.differential_function().ord() < 1 {
        return Err(ProblemError::OrderTooLow);
    }
    Ok(problem)
}

/// Name following the `param` keyword of the current statement.
fn find_param(p: &Parser) -> Result<String, ProblemError> {
    let mut k = 0;
    loop {
        match p.peek_at(k) {
            Some(Tok::Ident(s)) if s == "param" => {
                return match p.peek_at(k + 1) {
                    Some(Tok::Ident(n)) => Ok(n.clone()),
                    _ => Err(p.error("expected parameter name after 'param'")),
                };
            }
            Some(Tok::Sym(';')) | None => return Err(p.error("family without 'param'")),
            _ => k += 1,
        }
    }
}

fn function_decl(p: &mut Parser, b: &Builder, names: &Names) -> Result<UnknownFunction, ProblemError> {
    let name = p.ident()?;
    b.check_fresh(p, &name)?;
    if name.contains('_') {
        return Err(p.error("function names cannot contain '_'"));
    }
    p.expect_sym('(')?;
    let mut formal = Vec::new();
    let scope = Scope {
        names,
        functions: &[],
        extras: &[],
    };
    if !p.eat_sym(')') {
        loop {
            let arg = p.ident()?;
            let e = p.identifier(&scope, &arg)?;
            let fa = match e.as_atom() {
                Some(crate::symbolic::Atom::Var(n)) => FormalArg::Var(n),
                Some(crate::symbolic::Atom::Jet(a, c)) => FormalArg::Jet(a, c),
                _ => return Err(p.error(format!("{arg} is not a coordinate"))),
            };
            formal.push(fa);
            if p.eat_sym(')') {
                break;
            }
            p.expect_sym(',')?;
        }
    }
    let mut f = UnknownFunction::new(&name, formal).map_err(|e| p.symbolic(e))?;
    if p.is_keyword("assume") {
        p.pos += 1;
        p.expect_keyword("nonzero")?;
        let mut any = false;
        while let Some(Tok::Ident(tok)) = p.peek().cloned() {
            if tok == "inverse" {
                break;
            }
            let index = assumption_index(p, &f, &tok, names)?;
            f = f.assume_nonzero(index).map_err(|e| p.symbolic(e))?;
            any = true;
        }
        if !any {
            return Err(p.error("expected derivative symbols after 'assume nonzero'"));
        }
    }
    if p.is_keyword("inverse") {
        p.pos += 1;
        let inv = p.ident()?;
        b.check_fresh(p, &inv)?;
        if inv == name || f.arity() != 1 {
            return Err(p.error("only functions of one argument can declare an inverse"));
        }
        f = f.with_inverse(&inv);
    }
    Ok(f)
}

fn assumption_index(
    p: &mut Parser,
    f: &UnknownFunction,
    tok: &str,
    names: &Names,
) -> Result<Vec<u32>, ProblemError> {
    let foreign = |p: &Parser| {
        p.symbolic(crate::symbolic::SymbolicError::ForeignAssumption {
            function: f.name.to_string(),
        })
    };
    if tok == &*f.name {
        p.pos += 1;
        if p.is_sym('[') {
            return p.index_list();
        }
        return Ok(vec![0; f.arity()]);
    }
    let Some(suffix) = tok.strip_prefix(&*f.name).and_then(|s| s.strip_prefix('_')) else {
        return Err(foreign(p));
    };
    let index = function_suffix(f, suffix, names).ok_or_else(|| foreign(p))?;
    p.pos += 1;
    Ok(index)
}

/// Parses a standalone expression in the scope of a problem.
pub fn parse_expression(problem: &Problem, text: &str, extras: &[String]) -> Result<Expr, ProblemError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end_line: 1,
    };
    let scope = Scope {
        names: &problem.names,
        functions: &problem.functions,
        extras,
    };
    let e = p.expr(&scope)?;
    if p.peek().is_some() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}
