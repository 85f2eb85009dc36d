//! Grothendieck-Riemann-Roch for a family of curves `π`, at the level of
//! first Chern classes of determinant lines, plus Riemann-Roch on a single
//! curve for the global-observables line.
//!
//! Chow classes are polynomials in formal first Chern classes. Each `c1` has
//! cohomological degree 2 and products above degree 4 are dropped.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::exactlin::{format_rational, int, rat, serialize_rational, Rational};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrrError {
    #[error("line bundle must be a non-negative power of K or T, got {0:?}")]
    Bundle(String),
    #[error("genus must be at least {min}, got {got}")]
    Genus { min: u64, got: u64 },
    #[error("c1 of a summand must have degree at most 2")]
    C1Degree,
}

pub const MAX_DEGREE: u32 = 4;

/// A formal first Chern class.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Generator {
    /// `c1(T_π)`.
    Tangent,
    /// `c1` of a named bundle.
    Bundle(String),
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Tangent => write!(f, "c1(T)"),
            Generator::Bundle(n) => write!(f, "c1({n})"),
        }
    }
}

type Monomial = BTreeMap<Generator, u32>;

fn monomial_degree(m: &Monomial) -> u32 {
    2 * m.values().sum::<u32>()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChowPoly {
    terms: BTreeMap<Monomial, Rational>,
}

impl ChowPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self::term(c, Monomial::new())
    }

    pub fn generator(g: Generator) -> Self {
        Self::term(int(1), Monomial::from([(g, 1)]))
    }

    pub fn tangent() -> Self {
        Self::generator(Generator::Tangent)
    }

    fn term(c: Rational, m: Monomial) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() && monomial_degree(&m) <= MAX_DEGREE {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(monomial_degree).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            let e = out.terms.entry(m.clone()).or_insert_with(Rational::zero);
            *e += c;
            if e.is_zero() {
                out.terms.remove(m);
            }
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self { terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                let mut m = a.clone();
                for (g, e) in b {
                    *m.entry(g.clone()).or_insert(0) += e;
                }
                out = out.add(&Self::term(x * y, m));
            }
        }
        out
    }

    /// Homogeneous part of cohomological degree `d`.
    pub fn component(&self, d: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| monomial_degree(m) == d)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn coefficient(&self, monomial: &[(Generator, u32)]) -> Rational {
        let m: Monomial = monomial.iter().cloned().filter(|(_, e)| *e > 0).collect();
        self.terms.get(&m).cloned().unwrap_or_else(Rational::zero)
    }

    /// Coefficient of `c1(T_π)²`.
    pub fn tangent_squared(&self) -> Rational {
        self.coefficient(&[(Generator::Tangent, 2)])
    }

    pub fn todd_tangent() -> Self {
        let c = Self::tangent();
        Self::constant(int(1)).add(&c.scale(&rat(1, 2))).add(&c.mul(&c).scale(&rat(1, 12)))
    }
}

impl fmt::Display for ChowPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (n, (m, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", format_rational(c))?;
            for (g, e) in m {
                if *e == 1 {
                    write!(f, "·{g}")?;
                } else {
                    write!(f, "·{g}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

impl Serialize for ChowPoly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// `F ⊗ T_π^{⊗tangent_power}` placed in cohomological degree `-shift`, where
/// `F` has the given rank and first Chern class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Summand {
    pub rank: u64,
    pub c1: ChowPoly,
    pub shift: i64,
    pub tangent_power: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SheafSpec {
    pub summands: Vec<Summand>,
}

impl SheafSpec {
    /// `O ⊗ V` with `dim V = d`.
    pub fn trivial(d: u64) -> Self {
        Self { summands: vec![Summand { rank: d, c1: ChowPoly::zero(), shift: 0, tangent_power: 0 }] }
    }

    /// `T_π^{⊗n}[shift]`.
    pub fn tangent_power(n: i64, shift: i64) -> Self {
        Self { summands: vec![Summand { rank: 1, c1: ChowPoly::zero(), shift, tangent_power: n }] }
    }

    /// `O ⊗ V ⊕ T_π[1]`: the free string fields.
    pub fn string(dim_v: u64) -> Self {
        Self::trivial(dim_v).direct_sum(&Self::tangent_power(1, 1))
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        let mut summands = self.summands.clone();
        summands.extend(other.summands.iter().cloned());
        Self { summands }
    }

    pub fn validate(&self) -> Result<(), GrrError> {
        if self.summands.iter().any(|s| s.c1.degree() > 2) {
            return Err(GrrError::C1Degree);
        }
        Ok(())
    }
}

/// `Σ (-1)^shift (rank + c + c²/2)` with `c = c1 + rank·n·c1(T_π)`, the first
/// Chern class of the twisted summand. Second Chern classes are not tracked.
pub fn characteristic_expansion(s: &SheafSpec) -> Result<ChowPoly, GrrError> {
    s.validate()?;
    let mut out = ChowPoly::zero();
    for m in &s.summands {
        let c = m.c1.add(&ChowPoly::tangent().scale(&int(m.rank as i64 * m.tangent_power)));
        let ch = ChowPoly::constant(int(m.rank as i64)).add(&c).add(&c.mul(&c).scale(&rat(1, 2)));
        let sign = if m.shift.rem_euclid(2) == 0 { 1 } else { -1 };
        out = out.add(&ch.scale(&int(sign)));
    }
    Ok(out)
}

/// `c1(det Rπ_* F)`: the degree-4 part of `ch(F)·Td(T_π)`, pushed down to a
/// degree-2 class on the base.
pub fn grr_pushforward_c1(s: &SheafSpec) -> Result<ChowPoly, GrrError> {
    let ch = characteristic_expansion(s)?;
    Ok(ch.mul(&ChowPoly::todd_tangent()).component(4))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GrrReport {
    pub sheaf: SheafSpec,
    pub characteristic: ChowPoly,
    pub c1: ChowPoly,
    #[serde(serialize_with = "serialize_rational")]
    pub tangent_squared: Rational,
}

pub fn grr_report(s: &SheafSpec) -> Result<GrrReport, GrrError> {
    let characteristic = characteristic_expansion(s)?;
    let c1 = grr_pushforward_c1(s)?;
    let tangent_squared = c1.tangent_squared();
    Ok(GrrReport { sheaf: s.clone(), characteristic, c1, tangent_squared })
}

/// A line bundle `K^j` on a curve; `T = K^{-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LineBundle {
    pub canonical_power: i64,
}

impl LineBundle {
    pub const O: LineBundle = LineBundle { canonical_power: 0 };
    pub const K: LineBundle = LineBundle { canonical_power: 1 };
    pub const T: LineBundle = LineBundle { canonical_power: -1 };

    pub fn canonical(m: i64) -> Result<Self, GrrError> {
        if m < 0 {
            return Err(GrrError::Bundle(format!("K^{m}")));
        }
        Ok(Self { canonical_power: m })
    }

    pub fn tangent(m: i64) -> Result<Self, GrrError> {
        if m < 0 {
            return Err(GrrError::Bundle(format!("T^{m}")));
        }
        Ok(Self { canonical_power: -m })
    }

    /// Accepts `O`, `K`, `T`, `K^m`, `T^m` with `m ≥ 0`.
    pub fn parse(s: &str) -> Result<Self, GrrError> {
        let bad = || GrrError::Bundle(s.to_string());
        let s = s.trim();
        if s == "O" {
            return Ok(Self::O);
        }
        let (base, exp) = match s.split_once('^') {
            Some((b, e)) => (b, e.parse::<i64>().map_err(|_| bad())?),
            None => (s, 1),
        };
        match base {
            "K" => Self::canonical(exp).map_err(|_| bad()),
            "T" => Self::tangent(exp).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }

    pub fn degree(self, genus: u64) -> i64 {
        self.canonical_power * (2 * genus as i64 - 2)
    }
}

impl fmt::Display for LineBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.canonical_power {
            0 => write!(f, "O"),
            1 => write!(f, "K"),
            -1 => write!(f, "T"),
            j if j > 0 => write!(f, "K^{j}"),
            j => write!(f, "T^{}", -j),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CurveGenusData {
    pub genus: u64,
    pub bundle: LineBundle,
}

/// `(h⁰, h¹)` of `K^j` on a smooth projective curve of the given genus.
pub fn riemann_roch_dims(d: CurveGenusData) -> (u64, u64) {
    let g = d.genus as i64;
    let j = d.bundle.canonical_power;
    let deg = d.bundle.degree(d.genus);
    let chi = deg + 1 - g;
    let h0 = match (g, j) {
        // every power of K is trivial on an elliptic curve
        (1, _) => 1,
        (0, _) => (deg + 1).max(0),
        (_, 0) => 1,
        (_, 1) => g,
        (_, j) if j < 0 => 0,
        _ => chi,
    };
    (h0 as u64, (h0 - chi) as u64)
}

/// `det H^i(Σ; bundle)^exponent`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DetFactor {
    pub degree: u8,
    pub bundle: LineBundle,
    pub exponent: i64,
    pub dimension: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GlobalObservablesLine {
    pub genus: u64,
    pub dim_v: u64,
    /// Nontrivial factors, with isomorphic lines merged.
    pub factors: Vec<DetFactor>,
    pub k_exponent: i64,
    pub shift: i64,
}

/// The determinant line of the free global observables of `O ⊗ V ⊕ T[1]` on
/// a genus-`g` curve, and its cohomological shift
/// `d = dimV (h⁰(O) + h¹(O)) + h⁰(T) - h¹(T)`.
///
/// The matter sector contributes `det H⁰(K)^{-dimV}` through Serre duality
/// `H¹(O) ≅ H⁰(K)^∨`, the ghost sector `det H¹(T) ⊗ det H⁰(T)^{-1}`. At
/// genus 1 the lines `T` and `K` are both trivial and are identified.
pub fn global_observables_line(genus: u64, dim_v: u64) -> Result<GlobalObservablesLine, GrrError> {
    if genus < 1 {
        return Err(GrrError::Genus { min: 1, got: genus });
    }
    let dims = |b: LineBundle| riemann_roch_dims(CurveGenusData { genus, bundle: b });
    let identify = |b: LineBundle| if genus == 1 && b == LineBundle::T { LineBundle::K } else { b };
    let mut raw: Vec<(u8, LineBundle, i64)> = vec![
        (0, LineBundle::K, -(dim_v as i64)),
        (1, LineBundle::T, 1),
        (0, LineBundle::T, -1),
    ];
    for r in raw.iter_mut() {
        r.1 = identify(r.1);
    }
    let mut merged: BTreeMap<(u8, LineBundle), i64> = BTreeMap::new();
    for (deg, b, e) in raw {
        *merged.entry((deg, b)).or_insert(0) += e;
    }
    let mut factors = Vec::new();
    for ((degree, bundle), exponent) in merged {
        let (h0, h1) = dims(bundle);
        let dimension = if degree == 0 { h0 } else { h1 };
        if exponent != 0 && dimension > 0 {
            factors.push(DetFactor { degree, bundle, exponent, dimension });
        }
    }
    let k_exponent = factors
        .iter()
        .filter(|f| f.degree == 0 && f.bundle == LineBundle::K)
        .map(|f| f.exponent)
        .sum();
    let (o0, o1) = dims(LineBundle::O);
    let (t0, t1) = dims(LineBundle::T);
    let shift = dim_v as i64 * (o0 + o1) as i64 + t0 as i64 - t1 as i64;
    Ok(GlobalObservablesLine { genus, dim_v, factors, k_exponent, shift })
}

/// `((dimV - 13)/12)`, the expected `c1(T_π)²` coefficient for the string.
pub fn expected_string_c1(dim_v: u64) -> Rational {
    Rational::new((dim_v as i64 - 13).into(), 12.into())
}

/// `-(1 + 6n + 6n²)/12`, the expected coefficient for `T_π^{⊗n}[1]`.
pub fn expected_tensor_c1(n: i64) -> Rational {
    -Rational::new((1 + 6 * n + 6 * n * n).into(), 12.into())
}
