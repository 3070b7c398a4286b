use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;


use super::atom::{Application, Atom};
use super::expr::{plain_div, plain_div_exact, plain_gcd, Expr};
use super::poly::{rat, Monomial, Poly, Rat};
use super::SymbolicError;

/// Derivation rule for atoms.
///
/// `leaf` must answer for every leaf atom. For unknown-function symbols it
/// may answer `None`, in which case the chain rule through the actual
/// arguments is used.
pub trait Derivation {
    fn leaf(&self, a: &Atom) -> Option<Expr>;
}

impl<F: Fn(&Atom) -> Option<Expr>> Derivation for F {
    fn leaf(&self, a: &Atom) -> Option<Expr> {
        self(a)
    }
}

struct Deriver<'a> {
    rule: &'a dyn Derivation,
    cache: RefCell<HashMap<Atom, Expr>>,
}

impl<'a> Deriver<'a> {
    fn atom(&self, a: &Atom) -> Expr {
        if let Some(v) = self.cache.borrow().get(a) {
            return v.clone();
        }
        let v = match a {
            Atom::Apply(app) => match self.rule.leaf(a) {
                Some(v) => v,
                None => self.chain(app),
            },
            Atom::Ln(arg) => {
                let d = self.expr(arg);
                if d.is_zero() {
                    d
                } else {
                    d.div(arg).expect("logarithm argument is nonzero")
                }
            }
            Atom::Sqrt(p) => {
                let d = self.poly(p);
                if d.is_zero() {
                    d
                } else {
                    let root = Expr::atom(a.clone());
                    let twice = Expr::poly((**p).clone()).scale(&rat(2));
                    d.mul(&root).div(&twice).expect("square-root radicand is nonzero")
                }
            }
            Atom::Exp(arg) => self.expr(arg),
            _ => self.rule.leaf(a).unwrap_or_else(Expr::zero),
        };
        self.cache.borrow_mut().insert(a.clone(), v.clone());
        v
    }

    fn chain(&self, app: &Arc<Application>) -> Expr {
        let mut acc = Expr::zero();
        for (slot, arg) in app.args.iter().enumerate() {
            let d = self.expr(arg);
            if d.is_zero() {
                continue;
            }
            let s = app.shifted(slot);
            let sym = Expr::apply(&s.func, s.index, s.args);
            acc = acc.add(&sym.mul(&d));
        }
        acc
    }

    fn poly(&self, p: &Poly) -> Expr {
        // Group contributions per atom: sum_a (∂p/∂a) * δa.
        let mut partials: Vec<(Atom, Vec<(Monomial, Rat)>)> = Vec::new();
        let mut index: HashMap<Atom, usize> = HashMap::new();
        for (m, c) in p.terms() {
            for (a, e) in m.factors() {
                let slot = *index.entry(a.clone()).or_insert_with(|| {
                    partials.push((a.clone(), Vec::new()));
                    partials.len() - 1
                });
                let term = match a {
                    Atom::Exp(_) => (m.clone(), c.clone()),
                    _ => {
                        let (rest, _) = m.without(a);
                        let lowered = if *e > 1 {
                            rest.mul_plain(&Monomial::atom(a.clone()).pow(e - 1))
                        } else {
                            rest
                        };
                        (lowered, c * rat(*e as i64))
                    }
                };
                partials[slot].1.push(term);
            }
        }
        let mut acc = Expr::zero();
        for (a, terms) in partials {
            let d = self.atom(&a);
            if d.is_zero() {
                continue;
            }
            let part = Expr::poly(Poly::from_terms(terms));
            acc = acc.add(&part.mul(&d));
        }
        acc
    }

    fn expr(&self, e: &Expr) -> Expr {
        let dn = self.poly(e.numer());
        if e.is_polynomial() {
            return dn;
        }
        let dd = self.poly(e.denom());
        if dn.is_polynomial() && dd.is_polynomial() {
            // With g = gcd(D, D'), (N/D)' = (N'·D/g − N·D'/g) / (D·D/g), which
            // avoids a gcd against the full D².
            let d = e.denom();
            let g = plain_gcd(d, dd.numer());
            let d1 = plain_div(d, &g);
            let d2 = plain_div(dd.numer(), &g);
            let top = dn.numer().mul(&d1).sub(&e.numer().mul(&d2));
            return Expr::fraction(top, d.mul(&d1)).expect("nonzero denominator");
        }
        let den = Expr::poly(e.denom().clone());
        let num = Expr::poly(e.numer().clone());
        let top = dn.mul(&den).sub(&num.mul(&dd));
        top.div(&den.mul(&den)).expect("nonzero denominator")
    }
}

impl Expr {
    /// Applies a derivation to the expression.
    pub fn derive(&self, rule: &dyn Derivation) -> Expr {
        let d = Deriver {
            rule,
            cache: RefCell::new(HashMap::new()),
        };
        d.expr(self)
    }

    /// Partial derivative with respect to a variable or jet variable, with
    /// the chain rule through unknown-function arguments.
    pub fn diff(&self, v: &Atom) -> Expr {
        let target = v.clone();
        self.derive(&move |a: &Atom| -> Option<Expr> {
            if *a == target {
                return Some(Expr::one());
            }
            if a.is_leaf() {
                Some(Expr::zero())
            } else {
                None
            }
        })
    }

    /// Partial derivative treating `v` and every unknown-function symbol as
    /// independent coordinates.
    pub fn diff_opaque(&self, v: &Atom) -> Expr {
        let target = v.clone();
        self.derive(&move |a: &Atom| -> Option<Expr> {
            Some(if *a == target { Expr::one() } else { Expr::zero() })
        })
    }

    /// Atoms on which the normal form genuinely depends. Unknown-function
    /// symbols are reported as atoms; kernels are looked through.
    pub fn free_atoms(&self) -> BTreeSet<Atom> {
        // An atom that occurs only outside kernels cannot cancel from a
        // reduced fraction, so only kernel-internal atoms need the test.
        let mut direct = BTreeSet::new();
        let mut nested = BTreeSet::new();
        for p in [self.numer(), self.denom()] {
            for (m, _) in p.terms() {
                for a in m.atoms() {
                    if a.is_kernel() {
                        nested.extend(Expr::atom(a.clone()).syntactic_atoms());
                    } else {
                        direct.insert(a.clone());
                    }
                }
            }
        }
        let mut out: BTreeSet<Atom> = direct.difference(&nested).cloned().collect();
        out.extend(nested.into_iter().filter(|a| !self.diff_opaque(a).is_zero()));
        out
    }

    /// Leaf atoms reached through free unknown-function arguments as well.
    pub fn free_leaves(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        for a in self.free_atoms() {
            match &a {
                Atom::Apply(app) => {
                    for arg in &app.args {
                        out.extend(arg.free_leaves());
                    }
                    out.insert(a);
                }
                _ => {
                    out.insert(a);
                }
            }
        }
        out
    }

    /// Highest `key` over the leaves the normal form genuinely depends on.
    /// Candidates are tried from the highest key down, so only the top
    /// level that survives needs a derivative test.
    pub fn max_free_leaf<F: Fn(&Atom) -> Option<u32>>(&self, key: F) -> Option<u32> {
        let mut direct = BTreeSet::new();
        let mut nested = BTreeSet::new();
        for p in [self.numer(), self.denom()] {
            for (m, _) in p.terms() {
                for a in m.atoms() {
                    if a.is_leaf() {
                        direct.insert(a.clone());
                    } else {
                        collect_leaves(&Expr::atom(a.clone()), &mut nested);
                    }
                }
            }
        }
        let mut candidates: Vec<(u32, &Atom)> = direct
            .iter()
            .chain(nested.difference(&direct))
            .filter_map(|a| key(a).map(|k| (k, a)))
            .collect();
        candidates.sort_by(|a, b| b.0.cmp(&a.0));
        candidates
            .into_iter()
            .find(|(_, a)| !nested.contains(*a) || !self.diff(a).is_zero())
            .map(|(k, _)| k)
    }

    /// Leaves that occur anywhere in the expression, including inside
    /// kernels and unknown-function arguments, whether or not they cancel.
    pub fn syntactic_leaves(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        collect_leaves(self, &mut out);
        out
    }

    /// Replaces the leaf `lambda` by `1/base` for a polynomial `base`
    /// without kernels. Where `lambda` occurs polynomially the result is
    /// assembled over a single power of `base`.
    pub fn substitute_reciprocal(&self, lambda: &Atom, base: &Poly) -> Result<Expr, SymbolicError> {
        if !self.syntactic_leaves().contains(lambda) {
            return Ok(self.clone());
        }
        let mut composite = HashMap::new();
        for p in [self.numer(), self.denom()] {
            for (m, _) in p.terms() {
                for a in m.atoms() {
                    if !a.is_leaf()
                        && !composite.contains_key(a)
                        && Expr::atom(a.clone()).syntactic_leaves().contains(lambda)
                    {
                        composite.insert(a.clone(), reciprocal_in_atom(a, lambda, base)?);
                    }
                }
            }
        }
        let e = self.substitute(&composite)?;
        if e.denom().degree_in(lambda) > 0 {
            let inverse = Expr::one().div(&Expr::poly(base.clone()))?;
            return e.substitute(&HashMap::from([(lambda.clone(), inverse)]));
        }
        let mut k = e.numer().degree_in(lambda) as usize;
        let mut by_power: Vec<Poly> = vec![Poly::zero(); k + 1];
        let mut terms: Vec<Vec<(Monomial, Rat)>> = vec![Vec::new(); k + 1];
        for (m, c) in e.numer().terms() {
            let (rest, j) = m.without(lambda);
            terms[j as usize].push((rest, c.clone()));
        }
        for (slot, t) in by_power.iter_mut().zip(terms) {
            *slot = Poly::from_terms(t);
        }
        // The assembled numerator is Σ c_j·base^(k−j), which is congruent to
        // c_k modulo base: divisibility and coprimality are decided on c_k.
        while k > 0 {
            if by_power[k].is_zero() {
                k -= 1;
                continue;
            }
            match plain_div_exact(&by_power[k], base) {
                Some(q) => {
                    by_power[k - 1] = by_power[k - 1].add(&q);
                    k -= 1;
                }
                None => break,
            }
        }
        let coprime = k == 0 || plain_gcd(&by_power[k], base).is_one();
        let mut total = Poly::zero();
        let mut power = Poly::one();
        for c in by_power[..=k].iter().rev() {
            total = total.add(&c.mul(&power));
            power = power.mul(base);
        }
        let r = if k == 0 {
            Expr::poly(total)
        } else if coprime {
            Expr::coprime_fraction(total, base.pow(k as u32))
        } else {
            Expr::fraction(total, base.pow(k as u32))?
        };
        if e.is_polynomial() {
            Ok(r)
        } else {
            r.div(&Expr::poly(e.denom().clone()))
        }
    }

    /// Simultaneous substitution followed by normalization.
    pub fn substitute(&self, map: &HashMap<Atom, Expr>) -> Result<Expr, SymbolicError> {
        if map.is_empty() {
            return Ok(self.clone());
        }
        let mut cache: HashMap<Atom, Option<Expr>> = HashMap::new();
        let num = subst_poly(self.numer(), map, &mut cache)?;
        if self.is_polynomial() {
            return Ok(num);
        }
        let den = subst_poly(self.denom(), map, &mut cache)?;
        num.div(&den)
    }

    pub fn substitute_one(&self, a: &Atom, value: &Expr) -> Result<Expr, SymbolicError> {
        let mut map = HashMap::new();
        map.insert(a.clone(), value.clone());
        self.substitute(&map)
    }
}

/// Value of an atom under substitution; `None` means unchanged.
fn subst_atom(
    a: &Atom,
    map: &HashMap<Atom, Expr>,
    cache: &mut HashMap<Atom, Option<Expr>>,
) -> Result<Option<Expr>, SymbolicError> {
    if let Some(v) = map.get(a) {
        return Ok(Some(v.clone()));
    }
    if let Some(v) = cache.get(a) {
        return Ok(v.clone());
    }
    let v = match a {
        Atom::Apply(app) => {
            let mut changed = false;
            let mut args = Vec::with_capacity(app.args.len());
            for arg in &app.args {
                let s = arg.substitute(map)?;
                changed |= &s != arg;
                args.push(s);
            }
            changed.then(|| Expr::apply(&app.func, app.index.clone(), args))
        }
        Atom::Exp(arg) => {
            let s = arg.substitute(map)?;
            (&s != arg).then(|| s.exp())
        }
        Atom::Ln(arg) => {
            let s = arg.substitute(map)?;
            if &s != arg {
                Some(s.ln()?)
            } else {
                None
            }
        }
        Atom::Sqrt(p) => {
            let e = Expr::poly((**p).clone());
            let s = e.substitute(map)?;
            (s != e).then(|| s.sqrt())
        }
        _ => None,
    };
    cache.insert(a.clone(), v.clone());
    Ok(v)
}

fn subst_poly(
    p: &Poly,
    map: &HashMap<Atom, Expr>,
    cache: &mut HashMap<Atom, Option<Expr>>,
) -> Result<Expr, SymbolicError> {
    let mut poly_acc: Vec<(Monomial, Rat)> = Vec::new();
    let mut polys = Poly::zero();
    let mut rational = Expr::zero();
    for (m, c) in p.terms() {
        let mut kept = Monomial::one();
        let mut factor: Option<Expr> = None;
        for (a, e) in m.factors() {
            match subst_atom(a, map, cache)? {
                None => kept = kept.mul(&Monomial::atom(a.clone()).pow(*e)),
                Some(v) => {
                    let pw = if *e == 1 { v } else { v.powi(*e as i64)? };
                    factor = Some(match factor {
                        None => pw,
                        Some(f) => f.mul(&pw),
                    });
                }
            }
        }
        match factor {
            None => poly_acc.push((kept, c.clone())),
            Some(f) => {
                let t = f.mul(&Expr::poly(Poly::term(kept, c.clone())));
                if t.is_polynomial() {
                    polys = polys.add(t.numer());
                } else {
                    rational = rational.add(&t);
                }
            }
        }
    }
    let base = Poly::from_terms(poly_acc).add(&polys);
    Ok(Expr::poly(base).add(&rational))
}

/// Every leaf reachable through kernels and unknown-function arguments.
fn collect_leaves(e: &Expr, out: &mut BTreeSet<Atom>) {
    for a in e.syntactic_atoms() {
        match &a {
            Atom::Apply(app) => {
                for arg in &app.args {
                    collect_leaves(arg, out);
                }
            }
            _ if a.is_leaf() => {
                out.insert(a);
            }
            _ => {}
        }
    }
}

fn reciprocal_in_atom(a: &Atom, lambda: &Atom, base: &Poly) -> Result<Expr, SymbolicError> {
    Ok(match a {
        Atom::Exp(arg) => arg.substitute_reciprocal(lambda, base)?.exp(),
        Atom::Ln(arg) => arg.substitute_reciprocal(lambda, base)?.ln()?,
        Atom::Sqrt(p) => Expr::poly((**p).clone()).substitute_reciprocal(lambda, base)?.sqrt(),
        Atom::Apply(app) => {
            let args = app
                .args
                .iter()
                .map(|arg| arg.substitute_reciprocal(lambda, base))
                .collect::<Result<Vec<_>, _>>()?;
            Expr::apply(&app.func, app.index.clone(), args)
        }
        _ => Expr::atom(a.clone()),
    })
}
