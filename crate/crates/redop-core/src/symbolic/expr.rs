use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::atom::{Application, Atom, UnknownFunction};
use super::gcd::gcd;
use super::poly::{rat, sqrt_atom, Monomial, Poly, Rat};
use super::SymbolicError;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Fraction {
    num: Poly,
    den: Poly,
}

/// Canonical rational normal form: `num / den` with the gcd removed and a
/// monic denominator free of exponential and square-root content.
///
/// Values are immutable and cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr(Arc<Fraction>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = super::render::Names::default();
        write!(f, "{}", super::render::render(self, &names))
    }
}

impl Expr {
    fn raw(num: Poly, den: Poly) -> Expr {
        Expr(Arc::new(Fraction { num, den }))
    }

    pub fn zero() -> Expr {
        Expr::raw(Poly::zero(), Poly::one())
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(rat(n))
    }

    pub fn ratio(n: i64, d: i64) -> Expr {
        Expr::constant(super::poly::ratio(n, d))
    }

    pub fn constant(c: Rat) -> Expr {
        Expr::raw(Poly::constant(c), Poly::one())
    }

    pub fn atom(a: Atom) -> Expr {
        Expr::raw(Poly::atom(a), Poly::one())
    }

    pub fn var(name: &str) -> Expr {
        Expr::atom(Atom::var(name))
    }

    pub fn jet(a: u32, b: u32) -> Expr {
        Expr::atom(Atom::Jet(a, b))
    }

    pub fn poly(p: Poly) -> Expr {
        Expr::raw(p, Poly::one())
    }

    pub fn numer(&self) -> &Poly {
        &self.0.num
    }

    pub fn denom(&self) -> &Poly {
        &self.0.den
    }

    pub fn is_zero(&self) -> bool {
        self.0.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.num.is_one() && self.0.den.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.0.den.is_one()
    }

    pub fn constant_value(&self) -> Option<Rat> {
        if self.0.den.is_one() {
            self.0.num.constant_value()
        } else {
            None
        }
    }

    pub fn as_atom(&self) -> Option<Atom> {
        if !self.0.den.is_one() {
            return None;
        }
        match self.0.num.terms() {
            [(m, c)] if c.is_one() && m.factors().len() == 1 && m.factors()[0].1 == 1 => {
                Some(m.factors()[0].0.clone())
            }
            _ => None,
        }
    }

    /// Builds the canonical form of `num / den`.
    pub fn fraction(num: Poly, den: Poly) -> Result<Expr, SymbolicError> {
        if den.is_zero() {
            return Err(SymbolicError::DivisionByZero);
        }
        if num.is_zero() {
            return Ok(Expr::zero());
        }
        if let Some(c) = den.constant_value() {
            return Ok(Expr::raw(num.scale(&c.recip()), Poly::one()));
        }
        let (num, den) = cancel(num, den);
        Ok(Expr::coprime_fraction(num, den))
    }

    /// Canonical form of `num / den` for a pair already known to be coprime.
    pub(super) fn coprime_fraction(mut num: Poly, mut den: Poly) -> Expr {
        for _ in 0..4 {
            let content = den.monomial_content();
            let mut moved_sqrt = false;
            let mut unit = Monomial::one();
            for (a, e) in content.factors() {
                match a {
                    Atom::Exp(arg) => {
                        let inverse = Monomial::atom(Atom::Exp(arg.neg()));
                        num = num.mul_term(&inverse, &Rat::one());
                        unit = unit.mul_plain(&Monomial::atom(a.clone()));
                    }
                    Atom::Sqrt(p) => {
                        // Multiply through by sqrt(p)^e so the denominator
                        // picks up p^e instead.
                        let s = Monomial::atom(a.clone()).pow(*e);
                        num = num.mul_term(&s, &Rat::one());
                        let m = Monomial::atom(a.clone()).pow(*e);
                        den = den.div_monomial(&m).mul(&p.pow(*e));
                        moved_sqrt = true;
                    }
                    _ => {}
                }
            }
            if !unit.is_one() {
                den = den.div_monomial(&unit);
            }
            if moved_sqrt {
                let (n, d) = cancel(num, den);
                num = n;
                den = d;
            } else {
                break;
            }
        }
        if let Some(c) = den.constant_value() {
            return Expr::raw(num.scale(&c.recip()), Poly::one());
        }
        let lc = den.leading_coeff().recip();
        Expr::raw(num.scale(&lc), den.scale(&lc))
    }

    pub fn add(&self, o: &Expr) -> Expr {
        if o.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return o.clone();
        }
        if self.0.den == o.0.den {
            let num = self.0.num.add(&o.0.num);
            if self.0.den.is_one() {
                return Expr::raw(num, Poly::one());
            }
            return Expr::fraction(num, self.0.den.clone()).expect("nonzero denominator");
        }
        let (d1, d2) = (&self.0.den, &o.0.den);
        let g = plain_gcd(d1, d2);
        let (c1, c2) = if g.is_one() {
            (d2.clone(), d1.clone())
        } else {
            (plain_div(d2, &g), plain_div(d1, &g))
        };
        let num = self.0.num.mul(&c1).add(&o.0.num.mul(&c2));
        let den = d1.mul(&c1);
        Expr::fraction(num, den).expect("nonzero denominator")
    }

    pub fn sub(&self, o: &Expr) -> Expr {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Expr {
        Expr::raw(self.0.num.neg(), self.0.den.clone())
    }

    pub fn scale(&self, q: &Rat) -> Expr {
        if q.is_zero() {
            return Expr::zero();
        }
        Expr::raw(self.0.num.scale(q), self.0.den.clone())
    }

    pub fn mul(&self, o: &Expr) -> Expr {
        if self.is_zero() || o.is_zero() {
            return Expr::zero();
        }
        if let Some(c) = self.constant_value() {
            return o.scale(&c);
        }
        if let Some(c) = o.constant_value() {
            return self.scale(&c);
        }
        let num = self.0.num.mul(&o.0.num);
        if self.0.den.is_one() && o.0.den.is_one() {
            return Expr::raw(num, Poly::one());
        }
        let den = self.0.den.mul(&o.0.den);
        Expr::fraction(num, den).expect("nonzero denominator")
    }

    pub fn recip(&self) -> Result<Expr, SymbolicError> {
        Expr::fraction(self.0.den.clone(), self.0.num.clone())
    }

    pub fn div(&self, o: &Expr) -> Result<Expr, SymbolicError> {
        if o.is_zero() {
            return Err(SymbolicError::DivisionByZero);
        }
        if let Some(c) = o.constant_value() {
            return Ok(self.scale(&c.recip()));
        }
        let num = self.0.num.mul(&o.0.den);
        let den = self.0.den.mul(&o.0.num);
        Expr::fraction(num, den)
    }

    pub fn powi(&self, n: i64) -> Result<Expr, SymbolicError> {
        let base = if n < 0 { self.recip()? } else { self.clone() };
        let k = n.unsigned_abs() as u32;
        let num = base.0.num.pow(k);
        let den = base.0.den.pow(k);
        if den.is_one() {
            return Ok(Expr::raw(num, den));
        }
        Expr::fraction(num, den)
    }

    /// Exponential kernel. `exp(c*ln(a) + r)` with integer or half-integer
    /// `c` is rewritten to a power of `a` times `exp(r)`.
    pub fn exp(&self) -> Expr {
        if self.is_zero() {
            return Expr::one();
        }
        if let Some(c) = self.0.den.constant_value() {
            let scale = c.recip();
            let mut rest = Poly::zero();
            let mut factor = Expr::one();
            for (m, q) in self.0.num.terms() {
                let coeff = q * &scale;
                let extracted = match m.factors() {
                    [(Atom::Ln(arg), 1)] => ln_power(arg, &coeff),
                    _ => None,
                };
                match extracted {
                    Some(f) => factor = factor.mul(&f),
                    None => rest = rest.add(&Poly::term(m.clone(), coeff)),
                }
            }
            if !factor.is_one() {
                return factor.mul(&Expr::poly(rest).exp());
            }
        }
        Expr::atom(Atom::Exp(self.clone()))
    }

    pub fn ln(&self) -> Result<Expr, SymbolicError> {
        if self.is_zero() {
            return Err(SymbolicError::Domain {
                detail: "logarithm of zero".into(),
            });
        }
        if self.is_one() {
            return Ok(Expr::zero());
        }
        Ok(Expr::atom(Atom::Ln(self.clone())))
    }

    /// Square-root kernel with the formal branch `sqrt(p^2) = p`.
    pub fn sqrt(&self) -> Expr {
        let radicand = self.0.num.mul(&self.0.den);
        let root = poly_sqrt(&radicand);
        let den = Expr::poly(self.0.den.clone());
        root.div(&den).expect("nonzero denominator")
    }

    /// Applies `∂^index func` to the given arguments.
    pub fn apply(func: &Arc<UnknownFunction>, index: Vec<u32>, args: Vec<Expr>) -> Expr {
        if index.iter().all(|i| *i == 0) && args.len() == 1 {
            if let Some(Atom::Apply(inner)) = args[0].as_atom() {
                let cancels = inner.index.iter().all(|i| *i == 0)
                    && inner.args.len() == 1
                    && func.inverse.as_deref() == Some(&*inner.func.name)
                    && inner.func.inverse.as_deref() == Some(&*func.name);
                if cancels {
                    return inner.args[0].clone();
                }
            }
        }
        Expr::atom(Atom::Apply(Arc::new(Application {
            func: func.clone(),
            index,
            args,
        })))
    }

    /// Atoms occurring syntactically, descending into kernels but not
    /// into the arguments of unknown functions.
    pub fn syntactic_atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        collect_atoms(self, &mut out);
        out
    }

    pub fn contains_kernels(&self) -> bool {
        self.0
            .num
            .terms()
            .iter()
            .chain(self.0.den.terms())
            .any(|(m, _)| m.atoms().any(|a| a.is_kernel()))
    }
}

fn collect_atoms(e: &Expr, out: &mut BTreeSet<Atom>) {
    for p in [e.numer(), e.denom()] {
        for (m, _) in p.terms() {
            for a in m.atoms() {
                match a {
                    Atom::Exp(x) | Atom::Ln(x) => collect_atoms(x, out),
                    Atom::Sqrt(p) => collect_atoms(&Expr::poly((**p).clone()), out),
                    _ => {
                        out.insert(a.clone());
                    }
                }
            }
        }
    }
}

fn ln_power(arg: &Expr, coeff: &Rat) -> Option<Expr> {
    let two = rat(2);
    if coeff.is_integer() {
        return arg.powi(coeff.to_integer().to_i64()?).ok();
    }
    let doubled = coeff * &two;
    if doubled.is_integer() {
        let n = doubled.to_integer().to_i64()?;
        let base = arg.powi((n - 1) / 2).ok()?;
        return Some(base.mul(&arg.sqrt()));
    }
    None
}

/// Maps kernels to fresh slots so the gcd sees a plain polynomial ring.
struct SlotMap {
    atoms: Vec<Atom>,
}

impl SlotMap {
    fn new() -> Self {
        SlotMap { atoms: Vec::new() }
    }

    fn to_plain(&mut self, p: &Poly) -> Poly {
        let needs = p.terms().iter().any(|(m, _)| {
            m.atoms()
                .any(|a| matches!(a, Atom::Exp(_) | Atom::Sqrt(_)))
        });
        if !needs {
            return p.clone();
        }
        let raw = p
            .terms()
            .iter()
            .map(|(m, c)| {
                let mut out = Monomial::one();
                for (a, e) in m.factors() {
                    let b = match a {
                        Atom::Exp(_) | Atom::Sqrt(_) => {
                            let i = match self.atoms.iter().position(|x| x == a) {
                                Some(i) => i,
                                None => {
                                    self.atoms.push(a.clone());
                                    self.atoms.len() - 1
                                }
                            };
                            Atom::Slot(i as u32)
                        }
                        _ => a.clone(),
                    };
                    out = out.mul_plain(&Monomial::atom(b).pow(*e));
                }
                (out, c.clone())
            })
            .collect::<Vec<_>>();
        let mut acc = Poly::zero();
        for (m, c) in raw {
            acc = acc.add(&Poly::term(m, c));
        }
        acc
    }

    fn from_plain(&self, p: &Poly) -> Poly {
        if self.atoms.is_empty() {
            return p.clone();
        }
        p.map_atoms(&|a| match a {
            Atom::Slot(i) => self.atoms[*i as usize].clone(),
            _ => a.clone(),
        })
    }
}

pub(super) fn plain_gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_monomial() && b.is_monomial() {
        return Poly::term(a.terms()[0].0.gcd(&b.terms()[0].0), Rat::one());
    }
    let mut slots = SlotMap::new();
    let pa = slots.to_plain(a);
    let pb = slots.to_plain(b);
    slots.from_plain(&gcd(&pa, &pb))
}

/// Exact quotient `a / b` treating kernels as independent symbols, or
/// `None` when `b` does not divide `a`.
pub(super) fn plain_div_exact(a: &Poly, b: &Poly) -> Option<Poly> {
    let mut slots = SlotMap::new();
    let pa = slots.to_plain(a);
    let pb = slots.to_plain(b);
    pa.div_exact(&pb).map(|q| slots.from_plain(&q))
}

pub(super) fn plain_div(a: &Poly, b: &Poly) -> Poly {
    if b.is_monomial() {
        let (m, c) = &b.terms()[0];
        return a.div_monomial(m).scale(&c.recip());
    }
    let mut slots = SlotMap::new();
    let pa = slots.to_plain(a);
    let pb = slots.to_plain(b);
    slots.from_plain(&pa.div_exact(&pb).expect("exact division by a gcd factor"))
}

fn cancel(num: Poly, den: Poly) -> (Poly, Poly) {
    if den.is_monomial() {
        let g = num.monomial_content().gcd(&den.terms()[0].0);
        if g.is_one() {
            return (num, den);
        }
        return (num.div_monomial(&g), den.div_monomial(&g));
    }
    let mut slots = SlotMap::new();
    let pn = slots.to_plain(&num);
    let pd = slots.to_plain(&den);
    let g = gcd(&pn, &pd);
    if g.is_one() {
        return (num, den);
    }
    let qn = pn.div_exact(&g).expect("gcd divides numerator");
    let qd = pd.div_exact(&g).expect("gcd divides denominator");
    (slots.from_plain(&qn), slots.from_plain(&qd))
}

/// Square root of a polynomial: square factors of the rational and monomial
/// content are pulled out, and a perfect-square remainder is taken exactly.
fn poly_sqrt(p: &Poly) -> Expr {
    if p.is_zero() {
        return Expr::zero();
    }
    let content = p.rational_content();
    let primitive = p.scale(&content.recip());
    let mono = primitive.monomial_content();
    let rest = primitive.div_monomial(&mono);

    let mut outside = Expr::one();
    let mut inside = Poly::one();

    let (c_out, c_in) = rational_sqrt_split(&content);
    outside = outside.scale(&c_out);
    inside = inside.scale(&c_in);

    let mut even = Monomial::one();
    let mut odd = Monomial::one();
    for (a, e) in mono.factors() {
        if let Atom::Exp(arg) = a {
            outside = outside.mul(&arg.scale(&super::poly::ratio(1, 2)).exp());
            continue;
        }
        if e / 2 > 0 {
            even = even.mul(&Monomial::atom(a.clone()).pow(e / 2));
        }
        if e % 2 == 1 {
            odd = odd.mul(&Monomial::atom(a.clone()));
        }
    }
    outside = outside.mul(&Expr::poly(Poly::term(even, Rat::one())));
    inside = inside.mul(&Poly::term(odd, Rat::one()));

    match perfect_square_root(&rest) {
        Some(r) => outside = outside.mul(&Expr::poly(r)),
        None => inside = inside.mul(&rest),
    }
    if let Some(c) = inside.constant_value() {
        if c.is_one() {
            return outside;
        }
    }
    outside.mul(&Expr::atom(sqrt_atom(inside)))
}

/// Splits `q = a^2 * b` with `b` a square-free integer (up to a trial
/// division bound), returning `(a, b)`.
fn rational_sqrt_split(q: &Rat) -> (Rat, Rat) {
    // sqrt(n/d) = sqrt(n*d)/d
    let n = q.numer() * q.denom();
    let negative = n.is_negative();
    let mut m = n.abs();
    let mut out = BigInt::one();
    let mut f = BigInt::from(2);
    let limit = BigInt::from(100_000);
    while &f * &f <= m && f <= limit {
        let sq = &f * &f;
        while (&m % &sq).is_zero() {
            m /= &sq;
            out *= &f;
        }
        f += 1;
    }
    let r = m.sqrt();
    if &r * &r == m {
        out *= r;
        m = BigInt::one();
    }
    if negative {
        m = -m;
    }
    (
        Rat::new(out, q.denom().clone()),
        Rat::from_integer(m),
    )
}

/// Exact square root of a polynomial with a positive leading coefficient,
/// by successive leading-term matching.
fn perfect_square_root(p: &Poly) -> Option<Poly> {
    if p.is_one() {
        return Some(Poly::one());
    }
    let (lm, lc) = p.leading()?.clone();
    if lc.is_negative() || !lm.factors().iter().all(|(_, e)| e % 2 == 0) {
        return None;
    }
    let c = rational_exact_sqrt(&lc)?;
    let half: Vec<_> = lm.factors().iter().map(|(a, e)| (a.clone(), e / 2)).collect();
    let mut root_m = Monomial::one();
    for (a, e) in half {
        root_m = root_m.mul_plain(&Monomial::atom(a).pow(e));
    }
    let mut root = Poly::term(root_m.clone(), c.clone());
    let two_lead = (root_m, c * rat(2));
    let mut rem = p.sub(&root.mul_plain(&root));
    let mut steps = 0;
    while !rem.is_zero() {
        steps += 1;
        if steps > p.len() + 2 {
            return None;
        }
        let (m, q) = rem.leading()?.clone();
        let t_m = m.div(&two_lead.0)?;
        let t_c = q / &two_lead.1;
        if t_m >= two_lead.0 {
            return None;
        }
        let t = Poly::term(t_m, t_c);
        let next = root.add(&t);
        rem = p.sub(&next.mul_plain(&next));
        root = next;
    }
    Some(root)
}

fn rational_exact_sqrt(q: &Rat) -> Option<Rat> {
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    (&n * &n == *q.numer() && &d * &d == *q.denom()).then(|| Rat::new(n, d))
}
