use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::atom::{Application, Atom};
use super::expr::Expr;
use super::poly::{Poly, Rat};
use super::SymbolicError;

/// Outcome of a zero test.
///
/// `ProbablyZero` is returned when the normal form is not the zero quotient
/// but every sample evaluated to zero, which can happen only outside the
/// rational fragment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriBool {
    ProvenZero,
    ProvenNonZero,
    ProbablyNonZero,
    ProbablyZero,
}

impl TriBool {
    pub fn is_proven_zero(self) -> bool {
        self == TriBool::ProvenZero
    }

    /// Nonzero either by proof or by a nonzero sample.
    pub fn is_nonzero(self) -> bool {
        matches!(self, TriBool::ProvenNonZero | TriBool::ProbablyNonZero)
    }

    pub fn is_proven(self) -> bool {
        matches!(self, TriBool::ProvenZero | TriBool::ProvenNonZero)
    }
}

/// Parameters of randomized zero testing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub samples: u32,
    pub retries: u32,
    pub seed: u64,
    pub bound: i64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            samples: 5,
            retries: 50,
            seed: 0x5eed,
            bound: 1000,
        }
    }
}

/// Assigns values to atoms during evaluation.
pub trait Valuation {
    fn leaf(&mut self, a: &Atom) -> f64;
    fn apply(&mut self, app: &Application, args: &[f64]) -> f64;
}

/// Random rational point with consistent values for unknown functions.
pub struct RandomPoint {
    rng: ChaCha8Rng,
    bound: i64,
    leaves: HashMap<Atom, Rat>,
    fn_seed: u64,
}

impl RandomPoint {
    pub fn new(rng_seed: u64, bound: i64) -> Self {
        RandomPoint {
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            bound: bound.max(2),
            leaves: HashMap::new(),
            fn_seed: rng_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        }
    }

    /// Rational with numerator and denominator bounded by `bound`, kept in
    /// a moderate range so exponentials stay finite.
    pub fn draw(&mut self) -> Rat {
        let d = self.rng.random_range(self.bound / 10..=self.bound).max(1);
        let n = self.rng.random_range(-self.bound..=self.bound);
        Rat::new(n.into(), d.into())
    }

    /// Value of a leaf atom. Values depend only on the seed and the atom,
    /// so repeated evaluations of different expressions agree.
    pub fn exact_leaf(&mut self, a: &Atom) -> Rat {
        if let Some(v) = self.leaves.get(a) {
            return v.clone();
        }
        let mut h = DefaultHasher::new();
        self.fn_seed.hash(&mut h);
        a.hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        let d = rng.random_range(self.bound / 10..=self.bound).max(1);
        let n = rng.random_range(-self.bound..=self.bound);
        let v = Rat::new(n.into(), d.into());
        self.leaves.insert(a.clone(), v.clone());
        v
    }

    pub fn set(&mut self, a: Atom, v: Rat) {
        self.leaves.insert(a, v);
    }

    fn fn_value(&self, app: &Application, args: &[u64]) -> u64 {
        let mut h = DefaultHasher::new();
        self.fn_seed.hash(&mut h);
        app.func.name.hash(&mut h);
        app.index.hash(&mut h);
        args.hash(&mut h);
        h.finish()
    }

    pub fn exact_apply(&mut self, app: &Application, args: &[Rat]) -> Rat {
        let keys: Vec<u64> = args
            .iter()
            .map(|r| {
                let mut h = DefaultHasher::new();
                r.hash(&mut h);
                h.finish()
            })
            .collect();
        let bits = self.fn_value(app, &keys);
        let n = (bits % (2 * self.bound as u64 + 1)) as i64 - self.bound;
        let d = ((bits >> 32) % self.bound as u64) as i64 + self.bound / 10 + 1;
        Rat::new(n.into(), d.into())
    }
}

impl Valuation for RandomPoint {
    fn leaf(&mut self, a: &Atom) -> f64 {
        self.exact_leaf(a).to_f64().unwrap_or(f64::NAN)
    }

    fn apply(&mut self, app: &Application, args: &[f64]) -> f64 {
        let keys: Vec<u64> = args.iter().map(|x| x.to_bits() >> 16).collect();
        let bits = self.fn_value(app, &keys);
        let n = (bits % (2 * self.bound as u64 + 1)) as f64 - self.bound as f64;
        let d = ((bits >> 32) % self.bound as u64) as f64 + (self.bound / 10) as f64 + 1.0;
        n / d
    }
}

fn rat_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl Expr {
    /// Floating-point evaluation; singular points give non-finite values.
    pub fn eval(&self, val: &mut dyn Valuation) -> f64 {
        let mut cache = HashMap::new();
        let n = eval_poly(self.numer(), val, &mut cache);
        if self.is_polynomial() {
            return n;
        }
        let d = eval_poly(self.denom(), val, &mut cache);
        if d == 0.0 {
            return f64::NAN;
        }
        n / d
    }

    /// Magnitude scale of the numerator terms at a point, for relative
    /// tolerances.
    pub fn eval_scale(&self, val: &mut dyn Valuation) -> f64 {
        let mut cache = HashMap::new();
        let mut s = 0.0;
        for (m, c) in self.numer().terms() {
            let mut t = rat_f64(c).abs();
            for (a, e) in m.factors() {
                t *= eval_atom(a, val, &mut cache).abs().powi(*e as i32);
            }
            s += t;
        }
        let d = eval_poly(self.denom(), val, &mut cache).abs();
        if d > 0.0 {
            s / d
        } else {
            f64::NAN
        }
    }

    /// Exact evaluation on the rational fragment; `None` when a kernel is
    /// present or a denominator vanishes.
    pub fn eval_exact(&self, point: &mut RandomPoint) -> Option<Rat> {
        let n = eval_poly_exact(self.numer(), point)?;
        if self.is_polynomial() {
            return Some(n);
        }
        let d = eval_poly_exact(self.denom(), point)?;
        if d.is_zero() {
            None
        } else {
            Some(n / d)
        }
    }
}

fn eval_atom(a: &Atom, val: &mut dyn Valuation, cache: &mut HashMap<Atom, f64>) -> f64 {
    if let Some(v) = cache.get(a) {
        return *v;
    }
    let v = match a {
        Atom::Apply(app) => {
            let args: Vec<f64> = app.args.iter().map(|x| x.eval(val)).collect();
            if args.iter().any(|x| !x.is_finite()) {
                f64::NAN
            } else {
                val.apply(app, &args)
            }
        }
        Atom::Exp(arg) => arg.eval(val).exp(),
        Atom::Ln(arg) => {
            let x = arg.eval(val);
            if x > 0.0 {
                x.ln()
            } else {
                f64::NAN
            }
        }
        Atom::Sqrt(p) => {
            let x = eval_poly(p, val, cache);
            if x >= 0.0 {
                x.sqrt()
            } else {
                f64::NAN
            }
        }
        _ => val.leaf(a),
    };
    cache.insert(a.clone(), v);
    v
}

fn eval_poly(p: &Poly, val: &mut dyn Valuation, cache: &mut HashMap<Atom, f64>) -> f64 {
    let mut s = 0.0;
    for (m, c) in p.terms() {
        let mut t = rat_f64(c);
        for (a, e) in m.factors() {
            t *= eval_atom(a, val, cache).powi(*e as i32);
        }
        s += t;
    }
    s
}

fn eval_poly_exact(p: &Poly, point: &mut RandomPoint) -> Option<Rat> {
    let mut s = Rat::zero();
    for (m, c) in p.terms() {
        let mut t = c.clone();
        for (a, e) in m.factors() {
            let v = match a {
                Atom::Apply(app) => {
                    let mut args = Vec::with_capacity(app.args.len());
                    for x in &app.args {
                        args.push(x.eval_exact(point)?);
                    }
                    point.exact_apply(app, &args)
                }
                a if a.is_kernel() => return None,
                _ => point.exact_leaf(a),
            };
            t *= num_traits::pow(v, *e as usize);
        }
        s += t;
    }
    Some(s)
}

/// Relative tolerance used when comparing floating-point samples to zero.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

/// True when the numerator is a single term built from provably
/// nonvanishing factors.
pub fn provably_nonvanishing(e: &Expr) -> bool {
    match e.numer().terms() {
        [(m, c)] => !c.is_zero() && m.factors().iter().all(|(a, _)| nonvanishing_atom(a)),
        _ => false,
    }
}

/// Atoms that cannot vanish: exponentials, registered assumption symbols,
/// and square roots or logarithms of nonzero constants other than one.
pub fn nonvanishing_atom(a: &Atom) -> bool {
    match a {
        Atom::Exp(_) => true,
        Atom::Apply(app) => app.func.is_nonzero(&app.index),
        Atom::Sqrt(p) => p.constant_value().is_some_and(|c| !c.is_zero()),
        Atom::Ln(arg) => arg
            .constant_value()
            .is_some_and(|c| !c.is_zero() && c != Rat::from_integer(1.into())),
        _ => false,
    }
}

/// Zero test with the default sampling configuration.
pub fn is_zero(e: &Expr) -> Result<TriBool, SymbolicError> {
    is_zero_with(e, &SampleConfig::default())
}

pub fn is_zero_with(e: &Expr, cfg: &SampleConfig) -> Result<TriBool, SymbolicError> {
    if e.is_zero() {
        return Ok(TriBool::ProvenZero);
    }
    if e.numer().is_constant() || provably_nonvanishing(e) {
        return Ok(TriBool::ProvenNonZero);
    }
    let exact = !e.contains_kernels();
    let mut successes = 0;
    let mut attempts = 0;
    let max_attempts = cfg.samples.max(1) * cfg.retries.max(1);
    while successes < cfg.samples.max(1) {
        if attempts >= max_attempts {
            return Err(SymbolicError::EvaluationExhausted { attempts });
        }
        let mut point = RandomPoint::new(cfg.seed.wrapping_add(attempts as u64), cfg.bound);
        attempts += 1;
        if exact {
            match e.eval_exact(&mut point) {
                Some(v) if !v.is_zero() => return Ok(TriBool::ProbablyNonZero),
                Some(_) => successes += 1,
                None => continue,
            }
        } else {
            let v = e.eval(&mut point);
            if !v.is_finite() {
                continue;
            }
            let mut again = RandomPoint::new(cfg.seed.wrapping_add(attempts as u64 - 1), cfg.bound);
            let scale = e.eval_scale(&mut again);
            if !scale.is_finite() {
                continue;
            }
            if v.abs() > FLOAT_TOLERANCE * scale.max(1e-300) {
                return Ok(TriBool::ProbablyNonZero);
            }
            successes += 1;
        }
    }
    Ok(TriBool::ProbablyZero)
}
