//! One-loop heat-kernel integrals for the holomorphic free theory.
//!
//! The regulated propagator edge has t-integrand
//! `P_t(ξ) = (1/4πt)(ξ̄/2t) e^{-|ξ|²/4t}` and the Laplacian edge is the heat
//! kernel `K_ℓ(ξ) = (1/4πℓ) e^{-|ξ|²/4ℓ}`, with `ξ = z - w`. Powers of `4π`
//! are carried as a formal exponent so every output is rational.
//!
//! Sign conventions: `∂_z` acts as `∂_ξ`, `∂_w` as `-∂_ξ`. The four bracket
//! terms of a two-vertex wheel are
//!
//! ```text
//! I   = f ∂_zP · g ∂_wK      II = ∂f P · g ∂_wK
//! III = f ∂_zP · ∂g K        IV = ∂f P · ∂g K
//! ```
//!
//! and after the `ℓ → 0` limit their signed values are `1/12, -3/8, -1/8, 1/2`
//! in units of `(1/4π)∫∂³f g`. A field of tensor weight `-n` has vertex
//! `f∂ - n f'`, which weights the terms by `1, -n, -n, n²`; a fermionic loop
//! contributes an extra `-1`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::exactlin::{format_rational, int, rat, serialize_rational, Rational};

#[derive(Debug, Error, PartialEq)]
pub enum AnomalyError {
    #[error("t-integral diverges as ℓ → 0: {0}")]
    Divergent(String),
    #[error("t-integral limit depends on L: {0}")]
    LDependent(String),
    #[error("t-integral limit has a log 2 term with coefficient {0}")]
    Transcendental(String),
    #[error("unexpected external functional ∂^{hol}∂̄^{antihol} f · g")]
    UnexpectedFunctional { hol: u32, antihol: u32 },
    #[error("invalid argument: {0}")]
    Argument(String),
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Rational function `Σ c_{ij} ℓ^i t^j / (ℓ + t)^s`, `i, j ∈ ℤ`.
///
/// Kept in lowest terms with respect to `ℓ + t`, so structural equality is
/// equality of functions. The second variable is printed as `t`; after a
/// t-integral the same shape is read with `L` in its place.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParamRational {
    num: BTreeMap<(i64, i64), Rational>,
    sum_power: u32,
}

impl ParamRational {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(c, 0, 0)
    }

    /// `c ℓ^i t^j`.
    pub fn monomial(c: Rational, i: i64, j: i64) -> Self {
        let mut num = BTreeMap::new();
        if !c.is_zero() {
            num.insert((i, j), c);
        }
        Self { num, sum_power: 0 }
    }

    /// `c ℓ^i t^j / (ℓ + t)^s`.
    pub fn with_sum_power(c: Rational, i: i64, j: i64, s: u32) -> Self {
        let mut r = Self::monomial(c, i, j);
        r.sum_power = s;
        r.normalized()
    }

    /// The Gaussian parameter `τ = 1/ℓ + 1/t`.
    pub fn tau() -> Self {
        Self::monomial(int(1), -1, 0).add(&Self::monomial(int(1), 0, -1))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_empty()
    }

    pub fn sum_power(&self) -> u32 {
        self.sum_power
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, i64, &Rational)> {
        self.num.iter().map(|(&(i, j), c)| (i, j, c))
    }

    fn raised_to(&self, s: u32) -> BTreeMap<(i64, i64), Rational> {
        let mut num = self.num.clone();
        for _ in self.sum_power..s {
            let mut next = BTreeMap::new();
            for (&(i, j), c) in &num {
                add_term(&mut next, (i + 1, j), c);
                add_term(&mut next, (i, j + 1), c);
            }
            num = next;
        }
        num
    }

    pub fn add(&self, other: &Self) -> Self {
        let s = self.sum_power.max(other.sum_power);
        let mut num = self.raised_to(s);
        for (k, c) in other.raised_to(s) {
            add_term(&mut num, k, &c);
        }
        Self { num, sum_power: s }.normalized()
    }

    pub fn neg(&self) -> Self {
        self.scale(&int(-1))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            num: self.num.iter().map(|(k, v)| (*k, v * c)).collect(),
            sum_power: self.sum_power,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut num = BTreeMap::new();
        for (&(i, j), a) in &self.num {
            for (&(k, l), b) in &other.num {
                add_term(&mut num, (i + k, j + l), &(a * b));
            }
        }
        Self { num, sum_power: self.sum_power + other.sum_power }.normalized()
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Self::constant(int(1)), |acc, _| acc.mul(self))
    }

    /// Multiplicative inverse, available when the numerator is a monomial
    /// times a power of `ℓ + t`.
    pub fn recip(&self) -> Option<Self> {
        let mut num = self.num.clone();
        let mut k = 0u32;
        loop {
            if num.len() == 1 {
                let (&(i, j), c) = num.iter().next().unwrap();
                let mut r = Self::monomial(c.recip(), -i, -j);
                let extra = Self::monomial(int(1), 1, 0).add(&Self::monomial(int(1), 0, 1));
                r = r.mul(&extra.pow(self.sum_power));
                r.sum_power += k;
                return Some(r.normalized());
            }
            num = divide_by_sum(&num)?;
            k += 1;
        }
    }

    fn normalized(mut self) -> Self {
        self.num.retain(|_, c| !c.is_zero());
        if self.num.is_empty() {
            self.sum_power = 0;
            return self;
        }
        while self.sum_power > 0 {
            match divide_by_sum(&self.num) {
                Some(q) => {
                    self.num = q;
                    self.sum_power -= 1;
                }
                None => break,
            }
        }
        self
    }

    pub fn eval(&self, ell: f64, t: f64) -> f64 {
        let n: f64 = self
            .num
            .iter()
            .map(|(&(i, j), c)| to_f64(c) * ell.powi(i as i32) * t.powi(j as i32))
            .sum();
        n / (ell + t).powi(self.sum_power as i32)
    }
}

fn add_term(map: &mut BTreeMap<(i64, i64), Rational>, k: (i64, i64), c: &Rational) {
    let e = map.entry(k).or_insert_with(Rational::zero);
    *e += c;
    if e.is_zero() {
        map.remove(&k);
    }
}

/// Exact quotient by `ℓ + t`, if it exists.
fn divide_by_sum(num: &BTreeMap<(i64, i64), Rational>) -> Option<BTreeMap<(i64, i64), Rational>> {
    let imin = num.keys().map(|k| k.0).min()?;
    let jmin = num.keys().map(|k| k.1).min()?;
    let mut rem: BTreeMap<(i64, i64), Rational> =
        num.iter().map(|(&(i, j), c)| ((i - imin, j - jmin), c.clone())).collect();
    let mut quot = BTreeMap::new();
    while let Some((&(i, j), c)) = rem.iter().next_back() {
        if i == 0 {
            return None;
        }
        let c = c.clone();
        add_term(&mut quot, (i - 1 + imin, j + jmin), &c);
        add_term(&mut rem, (i, j), &-c.clone());
        add_term(&mut rem, (i - 1, j + 1), &-c);
    }
    Some(quot)
}

fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn write_monomial(f: &mut fmt::Formatter<'_>, i: i64, j: i64, second: &str) -> fmt::Result {
    for (v, e) in [("ℓ", i), (second, j)] {
        match e {
            0 => {}
            1 => write!(f, "·{v}")?,
            _ => write!(f, "·{v}^{e}")?,
        }
    }
    Ok(())
}

impl fmt::Display for ParamRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        write!(f, "(")?;
        for (n, (&(i, j), c)) in self.num.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", format_rational(c))?;
            write_monomial(f, i, j, "t")?;
        }
        write!(f, ")")?;
        if self.sum_power > 0 {
            write!(f, "/(ℓ+t)^{}", self.sum_power)?;
        }
        Ok(())
    }
}

impl Serialize for ParamRational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// A `ParamRational` times `(4π)^four_pi_power`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PiMultiple {
    pub four_pi_power: i32,
    pub value: ParamRational,
}

/// `∫ ξ^a ξ̄^b e^{-τ|ξ|²/4} d²ξ` with Lebesgue measure: zero unless `a = b`,
/// else `4π · a! · (4/τ)^a · τ^{-1}`.
///
/// Panics if `τ` is not invertible in the `ParamRational` ring.
pub fn gaussian_moment(a: u32, b: u32, tau: &ParamRational) -> PiMultiple {
    if a != b {
        return PiMultiple { four_pi_power: 1, value: ParamRational::zero() };
    }
    let tau_inv = tau.recip().expect("Gaussian parameter must be invertible");
    let c = Rational::from(factorial(a)) * Rational::from(BigInt::from(4).pow(a));
    PiMultiple { four_pi_power: 1, value: tau_inv.pow(a + 1).scale(&c) }
}

/// Laurent polynomial in `ℓ`.
type Laurent = BTreeMap<i64, Rational>;

fn lp_add(into: &mut Laurent, p: &Laurent, c: &Rational) {
    for (&i, v) in p {
        let e = into.entry(i).or_insert_with(Rational::zero);
        *e += v * c;
        if e.is_zero() {
            into.remove(&i);
        }
    }
}

fn lp_mono(c: Rational, i: i64) -> Laurent {
    let mut p = Laurent::new();
    if !c.is_zero() {
        p.insert(i, c);
    }
    p
}

fn lp_mul(a: &Laurent, b: &Laurent) -> Laurent {
    let mut out = Laurent::new();
    for (&i, x) in a {
        lp_add(&mut out, &b.iter().map(|(&j, y)| (i + j, y.clone())).collect(), x);
    }
    out
}

fn lp_eval(p: &Laurent, ell: f64) -> f64 {
    p.iter().map(|(&i, c)| to_f64(c) * ell.powi(i as i32)).sum()
}

fn binom_i(n: i64, k: i64) -> Rational {
    // generalized binomial for any integer n and k ≥ 0
    if n >= 0 {
        if k > n {
            return Rational::zero();
        }
        return Rational::from(binomial(BigInt::from(n), BigInt::from(k)));
    }
    let sign = if k % 2 == 0 { 1 } else { -1 };
    Rational::from(binomial(BigInt::from(-n + k - 1), BigInt::from(k))) * int(sign)
}

/// Which logarithm multiplies an expansion term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum LogKind {
    None,
    LogL,
    LogEll,
    Log2,
}

/// `coefficient · ℓ^ell_power · L^upper_power · log`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExpansionTerm {
    pub ell_power: i64,
    pub upper_power: i64,
    pub log: LogKind,
    #[serde(serialize_with = "serialize_rational")]
    pub coefficient: Rational,
}

impl fmt::Display for ExpansionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_rational(&self.coefficient))?;
        write_monomial(f, self.ell_power, self.upper_power, "L")?;
        match self.log {
            LogKind::None => Ok(()),
            LogKind::LogL => write!(f, "·log L"),
            LogKind::LogEll => write!(f, "·log ℓ"),
            LogKind::Log2 => write!(f, "·log 2"),
        }
    }
}

/// `∫_ℓ^L f dt` in partial-fraction form
/// `Σ q_k t^k + Σ a_m t^{-m} + Σ b_m (t+ℓ)^{-m}` (coefficients Laurent in ℓ),
/// together with the classified `ℓ → 0` expansion.
#[derive(Clone, Debug)]
pub struct TIntegral {
    poly: Vec<Laurent>,
    at_zero: Vec<Laurent>,
    at_minus_ell: Vec<Laurent>,
    pub constant: Rational,
    pub log2_coefficient: Rational,
    pub l_dependent: Vec<ExpansionTerm>,
    pub divergent: Vec<ExpansionTerm>,
}

impl TIntegral {
    /// The exact value of `∫_ℓ^L f dt` before any limit.
    pub fn exact_value(&self, ell: f64, upper: f64) -> f64 {
        let anti = |t: f64| {
            let mut s = 0.0;
            for (k, c) in self.poly.iter().enumerate() {
                s += lp_eval(c, ell) * t.powi(k as i32 + 1) / (k as f64 + 1.0);
            }
            for (idx, c) in self.at_zero.iter().enumerate() {
                let m = idx as i32 + 1;
                let c = lp_eval(c, ell);
                s += if m == 1 { c * t.ln() } else { -c / ((m - 1) as f64 * t.powi(m - 1)) };
            }
            for (idx, c) in self.at_minus_ell.iter().enumerate() {
                let m = idx as i32 + 1;
                let c = lp_eval(c, ell);
                let u = t + ell;
                s += if m == 1 { c * u.ln() } else { -c / ((m - 1) as f64 * u.powi(m - 1)) };
            }
            s
        };
        anti(upper) - anti(ell)
    }

    pub fn is_finite(&self) -> bool {
        self.divergent.is_empty()
    }

    pub fn is_l_independent(&self) -> bool {
        self.l_dependent.is_empty()
    }

    /// The rational `ℓ → 0` limit, or the reason there is none.
    pub fn limit(&self) -> Result<Rational, AnomalyError> {
        let join = |ts: &[ExpansionTerm]| {
            ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" + ")
        };
        if !self.divergent.is_empty() {
            return Err(AnomalyError::Divergent(join(&self.divergent)));
        }
        if !self.l_dependent.is_empty() {
            return Err(AnomalyError::LDependent(join(&self.l_dependent)));
        }
        if !self.log2_coefficient.is_zero() {
            return Err(AnomalyError::Transcendental(format_rational(&self.log2_coefficient)));
        }
        Ok(self.constant.clone())
    }
}

/// Integrate `f(ℓ, t)` over `t ∈ [ℓ, L]` and expand at `ℓ = 0`.
pub fn t_integral(f: &ParamRational) -> TIntegral {
    let s = f.sum_power() as usize;
    let b = f.terms().map(|(_, j, _)| (-j).max(0)).max().unwrap_or(0) as usize;
    // f = N(t) / (t^b (t+ℓ)^s)
    let deg = f.terms().map(|(_, j, _)| j + b as i64).max().unwrap_or(0) as usize;
    let mut num: Vec<Laurent> = vec![Laurent::new(); deg + 1];
    for (i, j, c) in f.terms() {
        lp_add(&mut num[(j + b as i64) as usize], &lp_mono(int(1), i), c);
    }
    // D(t) = t^b (t+ℓ)^s, monic
    let mut den: Vec<Laurent> = vec![Laurent::new(); b + s + 1];
    for r in 0..=s {
        den[b + r] = lp_mono(binom_i(s as i64, r as i64), (s - r) as i64);
    }
    let (poly, rem) = divide_monic(&num, &den);

    let mut at_zero = vec![Laurent::new(); b];
    for m in 1..=b {
        let target = b - m;
        for k in 0..=target.min(rem.len().saturating_sub(1)) {
            let i = (target - k) as i64;
            let ser = lp_mono(binom_i(-(s as i64), i), -(s as i64) - i);
            let term = lp_mul(&rem[k], &ser);
            lp_add(&mut at_zero[m - 1], &term, &int(1));
        }
    }
    let mut at_minus_ell = vec![Laurent::new(); s];
    if s > 0 {
        // R(u - ℓ) as a polynomial in u
        let mut shifted = vec![Laurent::new(); rem.len().max(1)];
        for (k, rk) in rem.iter().enumerate() {
            for r in 0..=k {
                let c = binom_i(k as i64, r as i64) * int(if (k - r) % 2 == 0 { 1 } else { -1 });
                lp_add(&mut shifted[r], &lp_mul(rk, &lp_mono(c, (k - r) as i64)), &int(1));
            }
        }
        for m in 1..=s {
            let target = s - m;
            for r in 0..=target.min(shifted.len() - 1) {
                let i = (target - r) as i64;
                // [u^i] (u - ℓ)^{-b}
                let ser = if b == 0 {
                    if i == 0 { lp_mono(int(1), 0) } else { Laurent::new() }
                } else {
                    let sign = if b % 2 == 0 { 1 } else { -1 };
                    lp_mono(binom_i(b as i64 + i - 1, i) * int(sign), -(b as i64) - i)
                };
                lp_add(&mut at_minus_ell[m - 1], &lp_mul(&shifted[r], &ser), &int(1));
            }
        }
    }
    expand_limit(poly, at_zero, at_minus_ell)
}

fn divide_monic(num: &[Laurent], den: &[Laurent]) -> (Vec<Laurent>, Vec<Laurent>) {
    let dd = den.len() - 1;
    let mut rem: Vec<Laurent> = num.to_vec();
    if rem.len() <= dd {
        return (Vec::new(), rem);
    }
    let mut quot = vec![Laurent::new(); rem.len() - dd];
    for k in (dd..rem.len()).rev() {
        let lead = std::mem::take(&mut rem[k]);
        if lead.is_empty() {
            continue;
        }
        for (r, d) in den.iter().enumerate().take(dd) {
            let prod = lp_mul(&lead, d);
            lp_add(&mut rem[k - dd + r], &prod, &int(-1));
        }
        quot[k - dd] = lead;
    }
    rem.truncate(dd);
    (quot, rem)
}

fn expand_limit(poly: Vec<Laurent>, at_zero: Vec<Laurent>, at_minus_ell: Vec<Laurent>) -> TIntegral {
    let mut acc: BTreeMap<(i64, i64, LogKind), Rational> = BTreeMap::new();
    let mut push = |i: i64, j: i64, log: LogKind, c: Rational| {
        if i > 0 || c.is_zero() {
            return;
        }
        let e = acc.entry((i, j, log)).or_insert_with(Rational::zero);
        *e += c;
    };
    for (k, c) in poly.iter().enumerate() {
        let k = k as i64;
        for (&i, v) in c {
            let w = v / int(k + 1);
            push(i, k + 1, LogKind::None, w.clone());
            push(i + k + 1, 0, LogKind::None, -w);
        }
    }
    for (idx, c) in at_zero.iter().enumerate() {
        let m = idx as i64 + 1;
        for (&i, v) in c {
            if m == 1 {
                push(i, 0, LogKind::LogL, v.clone());
                push(i, 0, LogKind::LogEll, -v.clone());
            } else {
                let w = v / int(m - 1);
                push(i, -(m - 1), LogKind::None, -w.clone());
                push(i - (m - 1), 0, LogKind::None, w);
            }
        }
    }
    for (idx, c) in at_minus_ell.iter().enumerate() {
        let m = idx as i64 + 1;
        for (&i, v) in c {
            let depth = (-i).max(0);
            if m == 1 {
                // log(L + ℓ) = log L + Σ_{r≥1} (-1)^{r+1} (ℓ/L)^r / r
                push(i, 0, LogKind::LogL, v.clone());
                for r in 1..=depth {
                    let sign = if r % 2 == 1 { 1 } else { -1 };
                    push(i + r, -r, LogKind::None, v * rat(sign, r));
                }
                // minus log(2ℓ)
                push(i, 0, LogKind::Log2, -v.clone());
                push(i, 0, LogKind::LogEll, -v.clone());
            } else {
                let w = v / int(m - 1);
                for r in 0..=depth {
                    push(i + r, -(m - 1) - r, LogKind::None, -&w * binom_i(-(m - 1), r));
                }
                let two = Rational::from(BigInt::from(2).pow((m - 1) as u32));
                push(i - (m - 1), 0, LogKind::None, &w / two);
            }
        }
    }
    let mut constant = Rational::zero();
    let mut log2_coefficient = Rational::zero();
    let mut l_dependent = Vec::new();
    let mut divergent = Vec::new();
    for ((i, j, log), c) in acc {
        if c.is_zero() {
            continue;
        }
        let term = ExpansionTerm { ell_power: i, upper_power: j, log, coefficient: c.clone() };
        match (i, j, log) {
            (i, _, _) if i < 0 => divergent.push(term),
            (_, _, LogKind::LogEll) => divergent.push(term),
            (_, 0, LogKind::None) => constant = c,
            (_, 0, LogKind::Log2) => log2_coefficient = c,
            _ => l_dependent.push(term),
        }
    }
    TIntegral {
        poly,
        at_zero,
        at_minus_ell,
        constant,
        log2_coefficient,
        l_dependent,
        divergent,
    }
}

/// The rational `ℓ → 0` limit of `∫_ℓ^L f dt`.
pub fn t_integral_limit(f: &ParamRational) -> Result<Rational, AnomalyError> {
    t_integral(f).limit()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Leg {
    /// Heat kernel `K_ℓ`.
    HeatKernel,
    /// Propagator integrand `P_t`.
    Propagator,
}

/// A heat-kernel edge with derivatives applied, as a polynomial in `ξ, ξ̄`
/// times its Gaussian.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HeatKernelFactor {
    pub leg: Leg,
    pub hol: u32,
    pub antihol: u32,
    pub four_pi_power: i32,
    /// Coefficients of `ξ^p ξ̄^q`.
    pub poly: BTreeMap<(u32, u32), ParamRational>,
}

impl HeatKernelFactor {
    pub fn heat_kernel() -> Self {
        let mut poly = BTreeMap::new();
        poly.insert((0, 0), ParamRational::monomial(int(1), -1, 0));
        Self { leg: Leg::HeatKernel, hol: 0, antihol: 0, four_pi_power: -1, poly }
    }

    pub fn propagator() -> Self {
        let mut poly = BTreeMap::new();
        poly.insert((0, 1), ParamRational::monomial(rat(1, 2), 0, -2));
        Self { leg: Leg::Propagator, hol: 0, antihol: 0, four_pi_power: -1, poly }
    }

    fn inverse_width(&self) -> ParamRational {
        match self.leg {
            Leg::HeatKernel => ParamRational::monomial(rat(1, 4), -1, 0),
            Leg::Propagator => ParamRational::monomial(rat(1, 4), 0, -1),
        }
    }

    fn differentiate(&self, antiholomorphic: bool, sign: i64) -> Self {
        let w = self.inverse_width().scale(&int(-sign));
        let mut poly: BTreeMap<(u32, u32), ParamRational> = BTreeMap::new();
        let mut put = |k: (u32, u32), v: ParamRational| {
            let e = poly.entry(k).or_default();
            *e = e.add(&v);
        };
        for (&(p, q), c) in &self.poly {
            let own = if antiholomorphic { q } else { p };
            if own > 0 {
                let k = if antiholomorphic { (p, q - 1) } else { (p - 1, q) };
                put(k, c.scale(&int(sign * own as i64)));
            }
            // the Gaussian brings down the conjugate variable
            let k = if antiholomorphic { (p + 1, q) } else { (p, q + 1) };
            put(k, c.mul(&w));
        }
        poly.retain(|_, v| !v.is_zero());
        let mut out = self.clone();
        out.poly = poly;
        if antiholomorphic {
            out.antihol += 1;
        } else {
            out.hol += 1;
        }
        out
    }

    pub fn d_z(&self) -> Self {
        self.differentiate(false, 1)
    }

    pub fn d_w(&self) -> Self {
        self.differentiate(false, -1)
    }

    pub fn d_zbar(&self) -> Self {
        self.differentiate(true, 1)
    }

    pub fn d_wbar(&self) -> Self {
        self.differentiate(true, -1)
    }

    /// Value on the diagonal `ξ = 0`.
    pub fn diagonal(&self) -> PiMultiple {
        PiMultiple {
            four_pi_power: self.four_pi_power,
            value: self.poly.get(&(0, 0)).cloned().unwrap_or_default(),
        }
    }
}

/// One of the four bracket terms of the two-vertex wheel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum BracketTerm {
    I,
    II,
    III,
    IV,
}

impl BracketTerm {
    pub const ALL: [BracketTerm; 4] = [Self::I, Self::II, Self::III, Self::IV];

    /// `(∂-order on f, ∂_z on P, ∂-order on g, ∂_w on K)`.
    fn shape(self) -> (u32, u32, u32, u32) {
        match self {
            Self::I => (0, 1, 0, 1),
            Self::II => (1, 0, 0, 1),
            Self::III => (0, 1, 1, 0),
            Self::IV => (1, 0, 1, 0),
        }
    }

    /// Multiplicity in the vertex product `(f∂ - n f')(g∂ - n g')`.
    pub fn vertex_weight(self, n: u32) -> Rational {
        let n = int(n as i64);
        match self {
            Self::I => int(1),
            Self::II | Self::III => -n,
            Self::IV => &n * &n,
        }
    }
}

/// Product of the two edges of a wheel, with Gaussian `e^{-τ|ξ|²/4}`,
/// `τ = 1/ℓ + 1/t`, and the derivative orders on the external functions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WheelIntegrand {
    pub poly: BTreeMap<(u32, u32), ParamRational>,
    pub four_pi_power: i32,
    pub f_order: u32,
    pub g_order: u32,
}

impl WheelIntegrand {
    pub fn assemble(term: BracketTerm) -> Self {
        let (f_order, dp, g_order, dk) = term.shape();
        let p = (0..dp).fold(HeatKernelFactor::propagator(), |h, _| h.d_z());
        let k = (0..dk).fold(HeatKernelFactor::heat_kernel(), |h, _| h.d_w());
        let mut poly: BTreeMap<(u32, u32), ParamRational> = BTreeMap::new();
        for (&(a, b), x) in &p.poly {
            for (&(c, d), y) in &k.poly {
                let e = poly.entry((a + c, b + d)).or_default();
                *e = e.add(&x.mul(y));
            }
        }
        poly.retain(|_, v| !v.is_zero());
        Self { poly, four_pi_power: p.four_pi_power + k.four_pi_power, f_order, g_order }
    }

    /// Integrate over `ξ` after Taylor-expanding `f(w + ξ)` to antiholomorphic
    /// order `antihol_depth`, then move derivatives off `g`. Keys are
    /// `(∂-order, ∂̄-order)` of the resulting functional `∫ ∂^a ∂̄^b f · g`.
    pub fn integrate_xi(&self, antihol_depth: u32) -> BTreeMap<(u32, u32), PiMultiple> {
        let tau = ParamRational::tau();
        let mut out: BTreeMap<(u32, u32), PiMultiple> = BTreeMap::new();
        let ibp = int(if self.g_order % 2 == 0 { 1 } else { -1 });
        for (&(p, q), c) in &self.poly {
            for beta in 0..=antihol_depth {
                if q + beta < p {
                    continue;
                }
                let alpha = q + beta - p;
                let m = gaussian_moment(p + alpha, q + beta, &tau);
                let taylor = Rational::new(
                    BigInt::one(),
                    factorial(alpha) * factorial(beta),
                );
                let v = c.mul(&m.value).scale(&(taylor * &ibp));
                let key = (self.f_order + alpha + self.g_order, beta);
                let e = out.entry(key).or_insert(PiMultiple {
                    four_pi_power: self.four_pi_power + m.four_pi_power,
                    value: ParamRational::zero(),
                });
                e.value = e.value.add(&v);
            }
        }
        out.retain(|_, v| !v.value.is_zero());
        out
    }
}

/// Volume-form normalization fixing the unit `(1/4π)∫∂³f g d²w`; applied once.
pub fn volume_normalization() -> Rational {
    rat(-1, 2)
}

const UNIT_FUNCTIONAL: (u32, u32) = (3, 0);
const TAYLOR_DEPTH: u32 = 2;

/// Per-term data: the normalized t-integrand of the unit functional and its
/// limit, plus the limits of the higher `∂̄` functionals (all zero).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TermReport {
    pub term: BracketTerm,
    pub integrand: ParamRational,
    #[serde(serialize_with = "serialize_rational")]
    pub limit: Rational,
    pub higher: Vec<((u32, u32), ParamRational)>,
}

pub fn bracket_term(term: BracketTerm) -> Result<TermReport, AnomalyError> {
    let norm = volume_normalization();
    let parts = WheelIntegrand::assemble(term).integrate_xi(TAYLOR_DEPTH);
    let mut integrand = ParamRational::zero();
    let mut higher = Vec::new();
    for ((hol, antihol), v) in parts {
        if v.four_pi_power != -1 || hol != 3 + antihol {
            return Err(AnomalyError::UnexpectedFunctional { hol, antihol });
        }
        let f = v.value.scale(&norm);
        if (hol, antihol) == UNIT_FUNCTIONAL {
            integrand = f;
        } else {
            let lim = t_integral_limit(&f)?;
            if !lim.is_zero() {
                return Err(AnomalyError::UnexpectedFunctional { hol, antihol });
            }
            higher.push(((hol, antihol), f));
        }
    }
    let limit = t_integral_limit(&integrand)?;
    Ok(TermReport { term, integrand, limit, higher })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Edge {
    Bc,
    BetaGamma { weight: u32 },
}

impl Edge {
    pub fn tensor_weight(self) -> u32 {
        match self {
            Edge::Bc => 1,
            Edge::BetaGamma { weight } => weight,
        }
    }

    pub fn loop_sign(self) -> Rational {
        match self {
            Edge::Bc => int(-1),
            Edge::BetaGamma { .. } => int(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TermSelection {
    All,
    Only(BracketTerm),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WheelSpec {
    pub edge: Edge,
    pub terms: TermSelection,
}

impl WheelSpec {
    pub fn full(edge: Edge) -> Self {
        Self { edge, terms: TermSelection::All }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WheelReport {
    pub spec: WheelSpec,
    #[serde(serialize_with = "serialize_rational")]
    pub coefficient: Rational,
    pub units: &'static str,
    pub l_independent: bool,
    pub terms: Vec<TermReport>,
}

pub const WHEEL_UNITS: &str = "(1/4π)∫∂³f g d²w";

pub fn wheel_report(spec: WheelSpec) -> Result<WheelReport, AnomalyError> {
    let selected: Vec<BracketTerm> = match spec.terms {
        TermSelection::All => BracketTerm::ALL.to_vec(),
        TermSelection::Only(t) => vec![t],
    };
    let n = spec.edge.tensor_weight();
    let mut coefficient = Rational::zero();
    let mut terms = Vec::new();
    for t in selected {
        let r = bracket_term(t)?;
        coefficient += &r.limit * t.vertex_weight(n);
        terms.push(r);
    }
    coefficient *= spec.edge.loop_sign();
    Ok(WheelReport { spec, coefficient, units: WHEEL_UNITS, l_independent: true, terms })
}

pub fn wheel_coefficient(spec: WheelSpec) -> Result<Rational, AnomalyError> {
    wheel_report(spec).map(|r| r.coefficient)
}

/// Diagonal value of the tadpole integrand for a tensor-weight-`n` loop:
/// the vertex `f∂ - n f'` on a propagator from a point to itself. The
/// diagnostic flag lets the vertex derivative act as `∂_z̄` instead of `∂_z`,
/// which does not vanish on the diagonal.
pub fn tadpole_diagonal(n: u32, diagnostic: bool) -> PiMultiple {
    let p = HeatKernelFactor::propagator();
    let dp = if diagnostic { p.d_zbar() } else { p.d_z() }.diagonal();
    let p0 = p.diagonal();
    PiMultiple {
        four_pi_power: p0.four_pi_power,
        value: dp.value.add(&p0.value.scale(&-int(n as i64))),
    }
}

/// Weight of the tadpole of a tensor-weight-`n` loop.
pub fn tadpole_weight_for(n: u32) -> Result<Rational, AnomalyError> {
    t_integral_limit(&tadpole_diagonal(n, false).value)
}

pub fn tadpole_weight() -> Rational {
    tadpole_weight_for(0).expect("tadpole integrand vanishes on the diagonal")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ObstructionReport {
    pub dim_v: u64,
    /// Single weight-0 βγ wheel.
    #[serde(serialize_with = "serialize_rational")]
    pub g: Rational,
    /// bc wheel.
    #[serde(serialize_with = "serialize_rational")]
    pub f: Rational,
    /// `dim_v·G + F` in wheel units.
    #[serde(serialize_with = "serialize_rational")]
    pub total: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub in_g_units: Rational,
}

pub fn obstruction(dim_v: u64) -> Result<ObstructionReport, AnomalyError> {
    if dim_v == 0 {
        return Err(AnomalyError::Argument("dimV must be at least 1".into()));
    }
    let g = wheel_coefficient(WheelSpec::full(Edge::BetaGamma { weight: 0 }))?;
    let f = wheel_coefficient(WheelSpec::full(Edge::Bc))?;
    let total = Rational::from(BigInt::from(dim_v)) * &g + &f;
    let in_g_units = &total / &g;
    Ok(ObstructionReport { dim_v, g, f, total, in_g_units })
}

/// `dim_v·G + F` in units of `G`.
pub fn obstruction_coefficient(dim_v: u64) -> Result<Rational, AnomalyError> {
    obstruction(dim_v).map(|r| r.in_g_units)
}
