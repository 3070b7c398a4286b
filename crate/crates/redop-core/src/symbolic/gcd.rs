//! Multivariate polynomial gcd over the rationals.
//!
//! Inputs are plain polynomials: kernels must already be replaced by `Slot`
//! atoms so that every atom behaves as an independent indeterminate.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::atom::Atom;
use super::poly::{Poly, Rat};

/// Monic gcd; `gcd(0, 0) = 0`.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.make_monic();
    }
    if b.is_zero() {
        return a.make_monic();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    let ma = a.monomial_content();
    let mb = b.monomial_content();
    let mg = ma.gcd(&mb);
    let a1 = a.div_monomial(&ma);
    let b1 = b.div_monomial(&mb);
    let g = gcd_without_content(&a1, &b1);
    g.mul_plain(&Poly::term(mg, Rat::one())).make_monic()
}

fn gcd_without_content(a: &Poly, b: &Poly) -> Poly {
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    if a == b {
        return a.make_monic();
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if large.div_exact(small).is_some() {
        return small.make_monic();
    }
    let va = a.atoms();
    let vb = b.atoms();
    let shared: BTreeSet<Atom> = va.intersection(&vb).cloned().collect();
    if shared.is_empty() || coprime_by_images(a, b, &shared) {
        return Poly::one();
    }
    if let Some(x) = va.difference(&vb).next() {
        return gcd_with_coefficients(b, a, x);
    }
    if let Some(x) = vb.difference(&va).next() {
        return gcd_with_coefficients(a, b, x);
    }
    let x = pick_main(a, b, &va);
    if va.len() == 1 {
        return univariate_gcd(a, b, &x);
    }
    let ca = content_in(a, &x);
    let cb = content_in(b, &x);
    let c = gcd(&ca, &cb);
    let pa = a.div_exact(&ca).expect("content divides");
    let pb = b.div_exact(&cb).expect("content divides");
    let g = interpolated_gcd(&pa, &pb, &x).unwrap_or_else(|| primitive_prs(&pa, &pb, &x));
    g.mul_plain(&c).make_monic()
}

/// gcd(p, q) where `x` occurs in `q` but not in `p`.
fn gcd_with_coefficients(p: &Poly, q: &Poly, x: &Atom) -> Poly {
    let mut g = p.make_monic();
    for c in q.coefficients_in(x) {
        if c.is_zero() {
            continue;
        }
        g = gcd(&g, &c);
        if g.is_constant() {
            return Poly::one();
        }
    }
    g
}

fn pick_main(a: &Poly, b: &Poly, vars: &BTreeSet<Atom>) -> Atom {
    vars.iter()
        .min_by_key(|x| (a.degree_in(x).max(b.degree_in(x)), a.degree_in(x) + b.degree_in(x)))
        .cloned()
        .expect("non-constant polynomials have atoms")
}

/// gcd of the coefficients of `p` viewed as a polynomial in `x`.
pub fn content_in(p: &Poly, x: &Atom) -> Poly {
    let mut g = Poly::zero();
    for c in p.coefficients_in(x) {
        if c.is_zero() {
            continue;
        }
        g = gcd(&g, &c);
        if g.is_constant() {
            return Poly::one();
        }
    }
    g
}

fn primitive_part(p: &Poly, x: &Atom) -> Poly {
    let c = content_in(p, x);
    if c.is_one() {
        p.clone()
    } else {
        p.div_exact(&c).expect("content divides")
    }
}

fn pseudo_remainder(a: &[Poly], b: &[Poly]) -> Vec<Poly> {
    let mut r: Vec<Poly> = a.to_vec();
    let db = b.len() - 1;
    let lcb = &b[db];
    while r.len() > db && !r.is_empty() {
        let da = r.len() - 1;
        let lca = r[da].clone();
        let shift = da - db;
        let mut next: Vec<Poly> = r.iter().map(|c| c.mul_plain(lcb)).collect();
        for (k, bk) in b.iter().enumerate() {
            let t = bk.mul_plain(&lca);
            next[k + shift] = next[k + shift].sub(&t);
        }
        next.pop();
        while next.last().is_some_and(|c| c.is_zero()) {
            next.pop();
        }
        r = next;
    }
    r
}

fn primitive_prs(a: &Poly, b: &Poly, x: &Atom) -> Poly {
    let (mut f, mut g) = if a.degree_in(x) >= b.degree_in(x) {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    };
    loop {
        let fc = f.coefficients_in(x);
        let gc = g.coefficients_in(x);
        let r = pseudo_remainder(&fc, &gc);
        if r.is_empty() {
            return primitive_part(&g, x);
        }
        if r.len() == 1 {
            return Poly::one();
        }
        let rp = Poly::from_coefficients(x, &r);
        f = g;
        g = primitive_part(&rp, x);
    }
}

fn univariate_gcd(a: &Poly, b: &Poly, x: &Atom) -> Poly {
    let dense = |p: &Poly| -> Vec<Rat> {
        p.coefficients_in(x)
            .iter()
            .map(|c| c.constant_value().expect("univariate"))
            .collect()
    };
    let mut f = dense(a);
    let mut g = dense(b);
    if f.len() < g.len() {
        std::mem::swap(&mut f, &mut g);
    }
    while !g.is_empty() {
        let r = dense_rem(&f, &g);
        f = g;
        g = r;
    }
    let coeffs: Vec<Poly> = f.into_iter().map(Poly::constant).collect();
    Poly::from_coefficients(x, &coeffs).make_monic()
}

fn dense_rem(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let inv = b[db].recip();
    while r.len() > db {
        let da = r.len() - 1;
        let q = &r[da] * &inv;
        if !q.is_zero() {
            for k in 0..=db {
                let t = &q * &b[k];
                r[k + da - db] -= t;
            }
        }
        r.pop();
        while r.last().is_some_and(|c| c.is_zero()) {
            r.pop();
        }
    }
    r
}

/// Modulus for the coprimality images: the Mersenne prime 2^61 − 1.
const PRIME: u64 = (1 << 61) - 1;

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % PRIME as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64) -> u64 {
    let mut r = 1;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a);
        }
        a = mul_mod(a, a);
        e >>= 1;
    }
    r
}

fn inv_mod(a: u64) -> u64 {
    pow_mod(a, PRIME - 2)
}

fn rat_mod(c: &Rat) -> Option<u64> {
    let p = BigInt::from(PRIME);
    let n = c.numer().mod_floor(&p).to_u64()?;
    let d = c.denom().mod_floor(&p).to_u64()?;
    (d != 0).then(|| mul_mod(n, inv_mod(d)))
}

/// Value assigned to an atom in evaluation round `round`.
fn image_value(a: &Atom, round: u64) -> u64 {
    let mut h = DefaultHasher::new();
    round.hash(&mut h);
    a.hash(&mut h);
    h.finish() % PRIME
}

/// Dense coefficients in `x` of the image of `p` modulo the prime.
fn eval_except(p: &Poly, x: &Atom, round: u64) -> Option<Vec<u64>> {
    let mut out: Vec<u64> = Vec::new();
    for (m, c) in p.terms() {
        let mut v = rat_mod(c)?;
        let mut k = 0usize;
        for (a, e) in m.factors() {
            if a == x {
                k = *e as usize;
            } else {
                v = mul_mod(v, pow_mod(image_value(a, round), *e as u64));
            }
        }
        if out.len() <= k {
            out.resize(k + 1, 0);
        }
        out[k] = (out[k] + v) % PRIME;
    }
    while out.last() == Some(&0) {
        out.pop();
    }
    Some(out)
}

fn rem_mod(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let inv = inv_mod(b[db]);
    while r.len() > db {
        let da = r.len() - 1;
        let q = mul_mod(r[da], inv);
        if q != 0 {
            for k in 0..=db {
                let t = mul_mod(q, b[k]);
                r[k + da - db] = (r[k + da - db] + PRIME - t) % PRIME;
            }
        }
        r.pop();
        while r.last() == Some(&0) {
            r.pop();
        }
    }
    r
}

/// Proves `gcd(a, b) = 1` through univariate images modulo a prime: when
/// the leading coefficients survive the evaluation, the image gcd bounds
/// the degree of the true gcd in the kept variable, so a constant image in
/// every variable proves coprimality.
fn coprime_by_images(a: &Poly, b: &Poly, vars: &BTreeSet<Atom>) -> bool {
    'vars: for x in vars {
        let (da, db) = (a.degree_in(x) as usize, b.degree_in(x) as usize);
        for round in 0..3 {
            let (Some(fa), Some(fb)) = (eval_except(a, x, round), eval_except(b, x, round)) else {
                return false;
            };
            if fa.len() != da + 1 || fb.len() != db + 1 {
                continue;
            }
            let (mut f, mut g) = if fa.len() >= fb.len() { (fa, fb) } else { (fb, fa) };
            while !g.is_empty() {
                let r = rem_mod(&f, &g);
                f = g;
                g = r;
            }
            if f.len() == 1 {
                continue 'vars;
            }
            return false;
        }
        return false;
    }
    true
}

fn leading_in(p: &Poly, x: &Atom) -> Poly {
    p.coefficients_in(x).pop().unwrap_or_else(Poly::zero)
}

/// `p` with the atom `v` replaced by the constant `c`.
fn eval_var(p: &Poly, v: &Atom, c: &Rat) -> Poly {
    let raw = p
        .terms()
        .iter()
        .map(|(m, k)| {
            let (rest, e) = m.without(v);
            let mut coeff = k.clone();
            for _ in 0..e {
                coeff *= c;
            }
            (rest, coeff)
        })
        .collect();
    Poly::from_terms(raw)
}

/// Dense interpolation gcd of two polynomials that are primitive in `x`.
///
/// One other variable `v` is evaluated at integer points, the images are
/// combined by the recursive gcd, scaled to the common leading coefficient
/// `γ = gcd(lc_x a, lc_x b)`, and interpolated in `v`. The result is
/// checked by trial division; `None` sends the caller to the PRS fallback.
fn interpolated_gcd(a: &Poly, b: &Poly, x: &Atom) -> Option<Poly> {
    let mut vars = a.atoms();
    vars.extend(b.atoms());
    vars.remove(x);
    let v = vars
        .iter()
        .max_by_key(|v| a.degree_in(v).min(b.degree_in(v)))?
        .clone();
    let (la, lb) = (leading_in(a, x), leading_in(b, x));
    let gamma = gcd(&la, &lb);
    let bound = (gamma.degree_in(&v) + a.degree_in(&v).min(b.degree_in(&v))) as usize;
    let mut points: Vec<(Rat, Poly)> = Vec::new();
    let mut min_deg = u32::MAX;
    for step in 1..=(bound as i64 + 40) {
        if points.len() > bound {
            break;
        }
        let c = Rat::from_integer(if step % 2 == 0 { -(step / 2) } else { step / 2 + 1 }.into());
        if eval_var(&la, &v, &c).is_zero() || eval_var(&lb, &v, &c).is_zero() {
            continue;
        }
        let image = gcd(&eval_var(a, &v, &c), &eval_var(b, &v, &c));
        let deg = image.degree_in(x);
        if deg > min_deg {
            continue;
        }
        if deg < min_deg {
            min_deg = deg;
            points.clear();
        }
        if deg == 0 {
            return Some(Poly::one());
        }
        let target = eval_var(&gamma, &v, &c);
        let Some(scale) = target.div_exact(&leading_in(&image, x)) else {
            continue;
        };
        points.push((c, image.mul_plain(&scale)));
    }
    if points.len() <= bound {
        return None;
    }
    let var = Poly::atom(v.clone());
    let mut acc = Poly::zero();
    for (j, (cj, hj)) in points.iter().enumerate() {
        let mut basis = Poly::one();
        for (k, (ck, _)) in points.iter().enumerate() {
            if k != j {
                let factor = var.sub(&Poly::constant(ck.clone())).scale(&(cj - ck).recip());
                basis = basis.mul_plain(&factor);
            }
        }
        acc = acc.add(&hj.mul_plain(&basis));
    }
    let g = primitive_part(&acc, x);
    if g.degree_in(x) == 0 {
        return None;
    }
    (a.div_exact(&g).is_some() && b.div_exact(&g).is_some()).then(|| g.make_monic())
}
