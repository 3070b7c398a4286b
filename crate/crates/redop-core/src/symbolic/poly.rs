use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::atom::Atom;
use super::expr::Expr;

pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// A power product of atoms, kept sorted by atom with positive exponents.
///
/// At most one `Exp` atom is present and it has exponent one: products of
/// exponentials are merged into a single exponential of the summed argument.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    degree: u32,
    factors: Vec<(Atom, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial::default()
    }

    pub fn atom(a: Atom) -> Self {
        Monomial {
            degree: 1,
            factors: vec![(a, 1)],
        }
    }

    fn from_sorted(factors: Vec<(Atom, u32)>) -> Self {
        let degree = factors.iter().map(|(_, e)| e).sum();
        Monomial { degree, factors }
    }

    pub fn factors(&self) -> &[(Atom, u32)] {
        &self.factors
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn exponent(&self, a: &Atom) -> u32 {
        self.factors
            .binary_search_by(|(x, _)| x.cmp(a))
            .map(|i| self.factors[i].1)
            .unwrap_or(0)
    }

    pub fn exp_arg(&self) -> Option<&Expr> {
        self.factors.iter().find_map(|(a, _)| match a {
            Atom::Exp(e) => Some(e),
            _ => None,
        })
    }

    fn merge(&self, o: &Self) -> Vec<(Atom, u32)> {
        let mut out = Vec::with_capacity(self.factors.len() + o.factors.len());
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() && j < o.factors.len() {
            let (a, e) = &self.factors[i];
            let (b, f) = &o.factors[j];
            match a.cmp(b) {
                Ordering::Less => {
                    out.push((a.clone(), *e));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b.clone(), *f));
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a.clone(), e + f));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.factors[i..]);
        out.extend_from_slice(&o.factors[j..]);
        out
    }

    /// Product with exponential merging.
    pub fn mul(&self, o: &Self) -> Self {
        if self.is_one() {
            return o.clone();
        }
        if o.is_one() {
            return self.clone();
        }
        Monomial::from_sorted(merge_exponentials(self.merge(o)))
    }

    /// Product treating every atom as an independent indeterminate.
    pub fn mul_plain(&self, o: &Self) -> Self {
        Monomial::from_sorted(self.merge(o))
    }

    pub fn pow(&self, n: u32) -> Self {
        if n == 0 {
            return Monomial::one();
        }
        let f = self
            .factors
            .iter()
            .map(|(a, e)| match a {
                Atom::Exp(arg) => (Atom::Exp(arg.scale(&rat(n as i64))), *e),
                _ => (a.clone(), e * n),
            })
            .collect();
        Monomial::from_sorted(f)
    }

    pub fn divides(&self, o: &Self) -> bool {
        self.factors.iter().all(|(a, e)| o.exponent(a) >= *e)
    }

    /// Quotient treating atoms as independent indeterminates.
    pub fn div(&self, o: &Self) -> Option<Self> {
        if !o.divides(self) {
            return None;
        }
        let f = self
            .factors
            .iter()
            .filter_map(|(a, e)| {
                let r = e - o.exponent(a);
                (r > 0).then(|| (a.clone(), r))
            })
            .collect();
        Some(Monomial::from_sorted(f))
    }

    pub fn gcd(&self, o: &Self) -> Self {
        let f = self
            .factors
            .iter()
            .filter_map(|(a, e)| {
                let m = (*e).min(o.exponent(a));
                (m > 0).then(|| (a.clone(), m))
            })
            .collect();
        Monomial::from_sorted(f)
    }

    pub fn without(&self, a: &Atom) -> (Self, u32) {
        let e = self.exponent(a);
        if e == 0 {
            return (self.clone(), 0);
        }
        let f = self.factors.iter().filter(|(x, _)| x != a).cloned().collect();
        (Monomial::from_sorted(f), e)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.factors.iter().map(|(a, _)| a)
    }

    pub fn has_sqrt_power(&self) -> bool {
        self.factors
            .iter()
            .any(|(a, e)| matches!(a, Atom::Sqrt(_)) && *e >= 2)
    }
}

fn merge_exponentials(mut f: Vec<(Atom, u32)>) -> Vec<(Atom, u32)> {
    let count = f.iter().filter(|(a, _)| matches!(a, Atom::Exp(_))).count();
    if count == 0 || (count == 1 && f.iter().all(|(a, e)| !matches!(a, Atom::Exp(_)) || *e == 1)) {
        return f;
    }
    let mut arg = Expr::zero();
    f.retain(|(a, e)| match a {
        Atom::Exp(x) => {
            arg = arg.add(&x.scale(&rat(*e as i64)));
            false
        }
        _ => true,
    });
    if !arg.is_zero() {
        let atom = Atom::Exp(arg);
        let pos = f.partition_point(|(a, _)| a < &atom);
        f.insert(pos, (atom, 1));
    }
    f
}

/// Graded lexicographic order; atoms earlier in the atom order rank higher.
impl Ord for Monomial {
    fn cmp(&self, o: &Self) -> Ordering {
        self.degree.cmp(&o.degree).then_with(|| {
            let (mut i, mut j) = (0, 0);
            loop {
                match (self.factors.get(i), o.factors.get(j)) {
                    (None, None) => return Ordering::Equal,
                    (Some(_), None) => return Ordering::Greater,
                    (None, Some(_)) => return Ordering::Less,
                    (Some((x, e)), Some((y, f))) => match x.cmp(y) {
                        Ordering::Less => return Ordering::Greater,
                        Ordering::Greater => return Ordering::Less,
                        Ordering::Equal => {
                            if e != f {
                                return e.cmp(f);
                            }
                            i += 1;
                            j += 1;
                        }
                    },
                }
            }
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Sparse polynomial with rational coefficients, terms in descending
/// monomial order and no zero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Poly {
    terms: Vec<(Monomial, Rat)>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly {
                terms: vec![(Monomial::one(), c)],
            }
        }
    }

    pub fn atom(a: Atom) -> Self {
        Poly {
            terms: vec![(Monomial::atom(a), Rat::one())],
        }
    }

    pub fn term(m: Monomial, c: Rat) -> Self {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly { terms: vec![(m, c)] }
        }
    }

    /// Collects like terms and restores the ordering invariant.
    pub fn from_terms(raw: Vec<(Monomial, Rat)>) -> Self {
        let mut map: HashMap<Monomial, Rat> = HashMap::with_capacity(raw.len());
        let mut extra = Poly::zero();
        for (m, c) in raw {
            if m.has_sqrt_power() {
                extra = extra.add(&reduce_sqrt_powers(&m, &c));
                continue;
            }
            *map.entry(m).or_insert_with(Rat::zero) += c;
        }
        let mut terms: Vec<_> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_by(|a, b| b.0.cmp(&a.0));
        let p = Poly { terms };
        if extra.is_zero() {
            p
        } else {
            p.add(&extra)
        }
    }

    pub fn terms(&self) -> &[(Monomial, Rat)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms[0].0.is_one())
    }

    pub fn constant_value(&self) -> Option<Rat> {
        match self.terms.as_slice() {
            [] => Some(Rat::zero()),
            [(m, c)] if m.is_one() => Some(c.clone()),
            _ => None,
        }
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().is_some_and(|c| c.is_one())
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    pub fn leading(&self) -> Option<&(Monomial, Rat)> {
        self.terms.first()
    }

    pub fn leading_coeff(&self) -> Rat {
        self.terms.first().map(|t| t.1.clone()).unwrap_or_else(Rat::zero)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.iter().map(|(m, _)| m.degree()).max().unwrap_or(0)
    }

    pub fn neg(&self) -> Self {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, q: &Rat) -> Self {
        if q.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * q)).collect(),
        }
    }

    pub fn make_monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let lc = self.leading_coeff();
        self.scale(&lc.recip())
    }

    pub fn add(&self, o: &Self) -> Self {
        if o.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return o.clone();
        }
        let mut out = Vec::with_capacity(self.terms.len() + o.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < o.terms.len() {
            let (a, c) = &self.terms[i];
            let (b, d) = &o.terms[j];
            match a.cmp(b) {
                Ordering::Greater => {
                    out.push((a.clone(), c.clone()));
                    i += 1;
                }
                Ordering::Less => {
                    out.push((b.clone(), d.clone()));
                    j += 1;
                }
                Ordering::Equal => {
                    let s = c + d;
                    if !s.is_zero() {
                        out.push((a.clone(), s));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.terms[i..]);
        out.extend_from_slice(&o.terms[j..]);
        Poly { terms: out }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul_term(&self, m: &Monomial, c: &Rat) -> Self {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly::from_terms(
            self.terms
                .iter()
                .map(|(n, d)| (n.mul(m), d * c))
                .collect(),
        )
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        if let Some(c) = self.constant_value() {
            return o.scale(&c);
        }
        if let Some(c) = o.constant_value() {
            return self.scale(&c);
        }
        let mut raw = Vec::with_capacity(self.terms.len() * o.terms.len());
        for (a, c) in &self.terms {
            for (b, d) in &o.terms {
                raw.push((a.mul(b), c * d));
            }
        }
        Poly::from_terms(raw)
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Product that treats every atom as an independent indeterminate.
    pub fn mul_plain(&self, o: &Self) -> Self {
        let mut map: HashMap<Monomial, Rat> = HashMap::new();
        for (a, c) in &self.terms {
            for (b, d) in &o.terms {
                *map.entry(a.mul_plain(b)).or_insert_with(Rat::zero) += c * d;
            }
        }
        let mut terms: Vec<_> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_by(|a, b| b.0.cmp(&a.0));
        Poly { terms }
    }

    fn mul_term_plain(&self, m: &Monomial, c: &Rat) -> Self {
        // Multiplying by a monomial preserves the relative order of terms.
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(n, d)| (n.mul_plain(m), d * c))
                .collect(),
        }
    }

    /// Exact quotient in the plain polynomial ring, or `None`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if let Some(c) = d.constant_value() {
            return Some(self.scale(&c.recip()));
        }
        let (lm, lc) = d.leading()?.clone();
        let mut r = self.clone();
        let mut q = Vec::new();
        while let Some((m, c)) = r.leading().cloned() {
            let qm = m.div(&lm)?;
            let qc = c / &lc;
            r = r.sub(&d.mul_term_plain(&qm, &qc));
            q.push((qm, qc));
        }
        Some(Poly { terms: q })
    }

    pub fn div_monomial(&self, m: &Monomial) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(n, c)| (n.div(m).expect("monomial divides every term"), c.clone()))
                .collect(),
        }
    }

    /// Greatest common monomial divisor of the terms.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.iter();
        let Some((first, _)) = it.next() else {
            return Monomial::one();
        };
        let mut g = first.clone();
        for (m, _) in it {
            if g.is_one() {
                break;
            }
            g = g.gcd(m);
        }
        g
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.terms
            .iter()
            .flat_map(|(m, _)| m.atoms().cloned())
            .collect()
    }

    pub fn degree_in(&self, a: &Atom) -> u32 {
        self.terms.iter().map(|(m, _)| m.exponent(a)).max().unwrap_or(0)
    }

    /// Coefficients with respect to the powers of `a`; index is the power.
    pub fn coefficients_in(&self, a: &Atom) -> Vec<Poly> {
        let deg = self.degree_in(a) as usize;
        let mut raw: Vec<Vec<(Monomial, Rat)>> = vec![Vec::new(); deg + 1];
        for (m, c) in &self.terms {
            let (rest, e) = m.without(a);
            raw[e as usize].push((rest, c.clone()));
        }
        raw.into_iter()
            .map(|mut t| {
                t.sort_by(|x, y| y.0.cmp(&x.0));
                Poly { terms: t }
            })
            .collect()
    }

    pub fn from_coefficients(a: &Atom, coeffs: &[Poly]) -> Poly {
        let mut acc = Poly::zero();
        for (k, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let m = if k == 0 {
                Monomial::one()
            } else {
                Monomial::from_sorted(vec![(a.clone(), k as u32)])
            };
            acc = acc.add(&c.mul_term_plain(&m, &Rat::one()));
        }
        acc
    }

    /// Rebuilds the polynomial with atoms replaced, re-applying the
    /// exponential and square-root rules.
    pub fn map_atoms(&self, f: &impl Fn(&Atom) -> Atom) -> Poly {
        let raw = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut out = Monomial::one();
                for (a, e) in m.factors() {
                    let b = Monomial::from_sorted(vec![(f(a), *e)]);
                    out = out.mul(&b);
                }
                (out, c.clone())
            })
            .collect();
        Poly::from_terms(raw)
    }

    /// Integer content made positive so that the primitive part has
    /// coprime integer coefficients and a positive leading coefficient.
    pub fn rational_content(&self) -> Rat {
        use num_integer::Integer;
        if self.is_zero() {
            return Rat::one();
        }
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for (_, c) in &self.terms {
            num = num.gcd(c.numer());
            den = den.lcm(c.denom());
        }
        let mut content = Rat::new(num, den);
        if self.leading_coeff().is_negative() {
            content = -content;
        }
        content
    }
}

fn reduce_sqrt_powers(m: &Monomial, c: &Rat) -> Poly {
    let mut base = Vec::new();
    let mut extra = Poly::constant(c.clone());
    for (a, e) in m.factors() {
        match a {
            Atom::Sqrt(p) if *e >= 2 => {
                extra = extra.mul(&p.pow(e / 2));
                if e % 2 == 1 {
                    base.push((a.clone(), 1));
                }
            }
            _ => base.push((a.clone(), *e)),
        }
    }
    extra.mul(&Poly::term(Monomial::from_sorted(base), Rat::one()))
}

pub(crate) fn sqrt_atom(p: Poly) -> Atom {
    Atom::Sqrt(Arc::new(p))
}
