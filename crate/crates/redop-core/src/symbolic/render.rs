//! Plain-text rendering in the problem-file notation.

use std::sync::Arc;

use num_traits::{One, Signed};

use super::atom::{Application, Atom, FormalArg, Name};
use super::expr::Expr;
use super::poly::{Monomial, Poly, Rat};

/// Names of the independent and dependent variables used when printing
/// jet variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Names {
    pub x: [Name; 2],
    pub u: Name,
}

impl Default for Names {
    fn default() -> Self {
        Names {
            x: ["x1".into(), "x2".into()],
            u: "u".into(),
        }
    }
}

impl Names {
    pub fn new(x1: &str, x2: &str, u: &str) -> Self {
        Names {
            x: [x1.into(), x2.into()],
            u: u.into(),
        }
    }

    fn single_letters(&self) -> bool {
        self.x.iter().all(|n| n.chars().count() == 1)
    }

    pub fn jet(&self, a: u32, b: u32) -> String {
        if a + b == 0 {
            return self.u.to_string();
        }
        if self.single_letters() {
            format!(
                "{}_{}{}",
                self.u,
                self.x[0].repeat(a as usize),
                self.x[1].repeat(b as usize)
            )
        } else {
            format!("{}[{},{}]", self.u, a, b)
        }
    }

    fn formal_name(&self, f: &FormalArg) -> Option<String> {
        match f {
            FormalArg::Var(n) => Some(n.to_string()),
            FormalArg::Jet(0, 0) => Some(self.u.to_string()),
            FormalArg::Jet(..) => None,
        }
    }
}

pub fn symbol_name(app: &Application, names: &Names) -> String {
    let name = &app.func.name;
    if app.index.iter().all(|i| *i == 0) {
        return name.to_string();
    }
    let letters: Option<Vec<String>> = app
        .func
        .formal
        .iter()
        .map(|f| names.formal_name(f).filter(|s| s.chars().count() == 1))
        .collect();
    match letters {
        Some(letters) => {
            let mut s = format!("{name}_");
            for (l, k) in letters.iter().zip(&app.index) {
                s.push_str(&l.repeat(*k as usize));
            }
            s
        }
        None => {
            let idx: Vec<String> = app.index.iter().map(|i| i.to_string()).collect();
            format!("{name}[{}]", idx.join(","))
        }
    }
}

pub fn render_atom(a: &Atom, names: &Names) -> String {
    match a {
        Atom::Var(n) => n.to_string(),
        Atom::Jet(a, b) => names.jet(*a, *b),
        Atom::Omega(a, b) => format!("omega[{a},{b}]"),
        Atom::Slot(i) => format!("slot{i}"),
        Atom::Exp(arg) => format!("exp({})", render(arg, names)),
        Atom::Ln(arg) => format!("ln({})", render(arg, names)),
        Atom::Sqrt(p) => format!("sqrt({})", render_poly(p, names)),
        Atom::Apply(app) => {
            let head = symbol_name(app, names);
            let implicit = app.is_formal() && !app.func.formal.is_empty();
            if implicit {
                head
            } else {
                let args: Vec<String> = app.args.iter().map(|x| render(x, names)).collect();
                format!("{head}({})", args.join(", "))
            }
        }
    }
}

fn render_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn render_monomial(m: &Monomial, names: &Names) -> Vec<String> {
    m.factors()
        .iter()
        .map(|(a, e)| {
            let s = render_atom(a, names);
            if *e == 1 {
                s
            } else {
                format!("{s}^{e}")
            }
        })
        .collect()
}

/// Display order: ascending degree, constants last.
fn display_order(p: &Poly) -> Vec<&(Monomial, Rat)> {
    let mut t: Vec<_> = p.terms().iter().collect();
    t.sort_by(|a, b| {
        a.0.is_one()
            .cmp(&b.0.is_one())
            .then(a.0.degree().cmp(&b.0.degree()))
            .then(b.0.cmp(&a.0))
    });
    t
}

pub fn render_poly(p: &Poly, names: &Names) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (k, (m, c)) in display_order(p).into_iter().enumerate() {
        let neg = c.is_negative();
        let abs = c.abs();
        if k == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let mut factors = render_monomial(m, names);
        if factors.is_empty() || !abs.is_one() {
            factors.insert(0, render_rat(&abs));
        }
        out.push_str(&factors.join("*"));
    }
    out
}

fn needs_parens(p: &Poly) -> bool {
    p.len() > 1
        || p.terms().first().is_some_and(|(m, c)| {
            m.factors().len() + usize::from(!c.is_one()) > 1 || c.is_negative() || !c.is_integer()
        })
}

pub fn render(e: &Expr, names: &Names) -> String {
    let num = render_poly(e.numer(), names);
    if e.is_polynomial() {
        return num;
    }
    let den = render_poly(e.denom(), names);
    let num = if e.numer().len() > 1 { format!("({num})") } else { num };
    let den = if needs_parens(e.denom()) { format!("({den})") } else { den };
    format!("{num}/{den}")
}

/// Renders `lhs = rhs` for a single equation `e = 0`, isolating a linear
/// unknown-function symbol with constant coefficient when one exists.
pub fn render_equation(e: &Expr, names: &Names, prefer: &dyn Fn(&Arc<Application>) -> (u32, u32)) -> String {
    let num = e.numer();
    let mut best: Option<(Atom, Rat, (u32, u32))> = None;
    for (m, c) in num.terms() {
        if let [(a @ Atom::Apply(app), 1)] = m.factors() {
            let elsewhere = num
                .terms()
                .iter()
                .filter(|(n, _)| n != m)
                .any(|(n, _)| n.exponent(a) > 0 || mentions(n, a));
            if elsewhere {
                continue;
            }
            let key = prefer(app);
            if best.as_ref().is_none_or(|b| key > b.2) {
                best = Some((a.clone(), c.clone(), key));
            }
        }
    }
    match best {
        Some((a, c, _)) => {
            let lhs = Expr::atom(a.clone());
            let rest = Expr::poly(num.clone()).sub(&lhs.scale(&c));
            let rhs = rest.scale(&(-c.recip()));
            format!("{} = {}", render_atom(&a, names), render(&rhs, names))
        }
        None => format!("{} = 0", render_poly(num, names)),
    }
}

fn mentions(m: &Monomial, a: &Atom) -> bool {
    m.atoms().any(|b| match b {
        Atom::Apply(app) => app.args.iter().any(|x| x.syntactic_atoms().contains(a)),
        _ => false,
    })
}

impl Expr {
    pub fn render(&self, names: &Names) -> String {
        render(self, names)
    }
}
