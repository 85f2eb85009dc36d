//! Chevalley-Eilenberg cochains of truncated Lie algebras of formal vector
//! fields on the line, with trivial or jet-symmetric coefficients.
//!
//! `L_n = z^{n+1}∂_z` for `-1 ≤ n ≤ M`, `[L_m, L_n] = (n - m) L_{m+n}`,
//! brackets beyond the cutoff dropped. Cochains are written in the basis
//! `λ_n`, normalized so that `dλ_k = Σ_{m<n, m+n=k} (n - m) λ_m λ_n`
//! (in particular `dλ_0 = 2 λ_{-1} λ_1`); as functionals `λ_n(L_m) = -δ_{nm}`.
//! With that normalization the contraction `ι_{L_0}` sends `λ_0` to `-1`
//! and Cartan's formula reads `dι + ιd = L_0`-weight, where `λ_n` has weight
//! `-n` and the dual jet `ζ_k = (z^k)^∨` has weight `-k`.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::exactlin::{
    format_rational, int, ChainComplex, LinAlgError, Rational, SparseMatrix, SparseVector,
};

#[derive(Debug, Error)]
pub enum GfError {
    #[error("truncation cutoff must be at least {min}, got {got}")]
    Cutoff { min: i64, got: i64 },
    #[error("cochain degree {degree} exceeds the {available} available generators")]
    Degree { degree: usize, available: usize },
    #[error("module action is not a representation: {0}")]
    InconsistentAction(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
}

/// Span of `L_{-1}, …, L_M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TruncatedW1 {
    cutoff: i64,
}

impl TruncatedW1 {
    pub fn new(cutoff: i64) -> Result<Self, GfError> {
        if cutoff < 1 {
            return Err(GfError::Cutoff { min: 1, got: cutoff });
        }
        Ok(TruncatedW1 { cutoff })
    }

    pub fn cutoff(&self) -> i64 {
        self.cutoff
    }

    pub fn basis(&self) -> Vec<i64> {
        (-1..=self.cutoff).collect()
    }

    pub fn contains(&self, n: i64) -> bool {
        (-1..=self.cutoff).contains(&n)
    }

    /// `[L_m, L_n]` as `(coefficient, index)`, `None` when zero or truncated.
    pub fn bracket(&self, m: i64, n: i64) -> Option<(i64, i64)> {
        let k = m + n;
        (n != m && self.contains(k)).then_some((n - m, k))
    }
}

/// Monomial in the jet generators `x_{a,k} = v_a^∨ ⊗ ζ_k`, as a sorted
/// multiset of `(a, k)`.
pub type SymMonomial = Vec<(usize, usize)>;

/// Coefficient module for the CE complex.
#[derive(Clone, Debug)]
pub enum CEModuleSpec {
    Trivial,
    /// `Sym^{min..=max}(V^∨ ⊗ span{ζ_0..ζ_J})` with the coadjoint jet action
    /// `L_n ζ_k = -(k - n) ζ_{k-n}` (zero below `ζ_0` or above `ζ_J`).
    SymJets {
        dim_v: usize,
        min_sym_degree: usize,
        max_sym_degree: usize,
        jet_order_cap: usize,
    },
    /// Finite module given by explicit matrices, `action[(n, j)]` = image of
    /// basis vector `j` under `L_n`; weights are the `L_0`-eigenvalues.
    Explicit {
        weights: Vec<i64>,
        action: BTreeMap<(i64, usize), Vec<(usize, Rational)>>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ModuleElement {
    One,
    Sym(SymMonomial),
    Basis(usize),
}

struct Module {
    basis: Vec<ModuleElement>,
    index: HashMap<ModuleElement, usize>,
    weights: Vec<i64>,
    spec: CEModuleSpec,
}

fn sym_monomials(dim_v: usize, jets: usize, degree: usize) -> Vec<SymMonomial> {
    let gens: Vec<(usize, usize)> = (0..dim_v).flat_map(|a| (0..=jets).map(move |k| (a, k))).collect();
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(gens: &[(usize, usize)], start: usize, left: usize, cur: &mut SymMonomial, out: &mut Vec<SymMonomial>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..gens.len() {
            cur.push(gens[i]);
            rec(gens, i, left - 1, cur, out);
            cur.pop();
        }
    }
    rec(&gens, 0, degree, &mut cur, &mut out);
    out
}

impl Module {
    fn new(spec: &CEModuleSpec, w: &TruncatedW1) -> Result<Self, GfError> {
        let (basis, weights): (Vec<ModuleElement>, Vec<i64>) = match spec {
            CEModuleSpec::Trivial => (vec![ModuleElement::One], vec![0]),
            CEModuleSpec::SymJets {
                dim_v,
                min_sym_degree,
                max_sym_degree,
                jet_order_cap,
            } => {
                if *dim_v == 0 {
                    return Err(GfError::Argument("dim V must be at least 1".into()));
                }
                let mut b = Vec::new();
                for deg in *min_sym_degree..=*max_sym_degree {
                    b.extend(sym_monomials(*dim_v, *jet_order_cap, deg));
                }
                let wts = b.iter().map(|m| -m.iter().map(|(_, k)| *k as i64).sum::<i64>()).collect();
                (b.into_iter().map(ModuleElement::Sym).collect(), wts)
            }
            CEModuleSpec::Explicit { weights, action } => {
                validate_explicit(w, weights, action)?;
                ((0..weights.len()).map(ModuleElement::Basis).collect(), weights.clone())
            }
        };
        let index = basis.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        Ok(Module {
            basis,
            index,
            weights,
            spec: spec.clone(),
        })
    }

    /// `L_n` applied to basis element `j`.
    fn act(&self, n: i64, j: usize) -> Vec<(usize, Rational)> {
        match (&self.spec, &self.basis[j]) {
            (CEModuleSpec::Trivial, _) => Vec::new(),
            (CEModuleSpec::SymJets { jet_order_cap, .. }, ModuleElement::Sym(m)) => {
                let mut out: BTreeMap<usize, Rational> = BTreeMap::new();
                for (i, &(a, k)) in m.iter().enumerate() {
                    let target = k as i64 - n;
                    if target < 0 || target > *jet_order_cap as i64 {
                        continue;
                    }
                    let coef = -(k as i64 - n);
                    if coef == 0 {
                        continue;
                    }
                    let mut image = m.clone();
                    image[i] = (a, target as usize);
                    image.sort();
                    let idx = self.index[&ModuleElement::Sym(image)];
                    *out.entry(idx).or_insert_with(Rational::zero) += int(coef);
                }
                out.into_iter().filter(|(_, c)| !c.is_zero()).collect()
            }
            (CEModuleSpec::Explicit { action, .. }, _) => action.get(&(n, j)).cloned().unwrap_or_default(),
            _ => unreachable!("module basis matches its spec"),
        }
    }
}

fn validate_explicit(
    w: &TruncatedW1,
    weights: &[i64],
    action: &BTreeMap<(i64, usize), Vec<(usize, Rational)>>,
) -> Result<(), GfError> {
    let dim = weights.len();
    let apply = |n: i64, v: &SparseVector| -> SparseVector {
        let mut out = SparseVector::new();
        for (&j, c) in v {
            for (i, x) in action.get(&(n, j)).into_iter().flatten() {
                crate::exactlin::add_into(&mut out, *i, &(x * c));
            }
        }
        out
    };
    for (&(n, j), image) in action {
        if !w.contains(n) || j >= dim {
            return Err(GfError::InconsistentAction(format!("action entry ({n}, {j}) out of range")));
        }
        for (i, x) in image {
            if *i >= dim {
                return Err(GfError::InconsistentAction(format!("image index {i} out of range")));
            }
            if !x.is_zero() && weights[*i] != weights[j] + n {
                return Err(GfError::InconsistentAction(format!("L_{n} does not shift weight by {n}")));
            }
        }
    }
    for m in w.basis() {
        for n in w.basis() {
            for j in 0..dim {
                let e: SparseVector = [(j, Rational::one())].into_iter().collect();
                let mut lhs = apply(m, &apply(n, &e));
                for (i, x) in apply(n, &apply(m, &e)) {
                    crate::exactlin::add_into(&mut lhs, i, &-x);
                }
                let mut rhs = SparseVector::new();
                if let Some((c, k)) = w.bracket(m, n) {
                    for (i, x) in apply(k, &e) {
                        crate::exactlin::add_into(&mut rhs, i, &(x * int(c)));
                    }
                } else if m + n > w.cutoff() {
                    continue;
                }
                if lhs != rhs {
                    return Err(GfError::InconsistentAction(format!(
                        "[L_{m}, L_{n}] acts incorrectly on basis vector {j}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Basis cochain `λ_S ⊗ f` with `S` strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Cochain {
    pub lambdas: Vec<i64>,
    pub module: ModuleElement,
}

/// Inserts `extra` (in order) into the sorted `s`; `None` on a repeat.
fn wedge(s: &[i64], extra: &[i64]) -> Option<(i64, Vec<i64>)> {
    let mut v: Vec<i64> = s.iter().chain(extra).copied().collect();
    // bubble sort to count transpositions
    let mut sign = 1;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            } else if v[j] == v[j + 1] {
                return None;
            }
        }
    }
    if v.windows(2).any(|p| p[0] == p[1]) {
        return None;
    }
    Some((sign, v))
}

/// CE complex with a conformal-weight label on every basis cochain.
pub struct GradedCEComplex {
    algebra: TruncatedW1,
    module: Module,
    bases: Vec<Vec<Cochain>>,
    weights: Vec<Vec<i64>>,
    index: Vec<HashMap<Cochain, usize>>,
}

fn subsets(items: &[i64], p: usize) -> Vec<Vec<i64>> {
    if p == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        for mut rest in subsets(&items[i + 1..], p - 1) {
            rest.insert(0, x);
            out.push(rest);
        }
    }
    out
}

/// Builds the CE complex in cochain degrees `0..=max_cochain_degree`.
pub fn build_ce_complex(
    g: &TruncatedW1,
    m: &CEModuleSpec,
    max_cochain_degree: usize,
) -> Result<GradedCEComplex, GfError> {
    build_filtered(g, m, max_cochain_degree, None)
}

fn build_filtered(
    g: &TruncatedW1,
    m: &CEModuleSpec,
    max_cochain_degree: usize,
    only_weight: Option<i64>,
) -> Result<GradedCEComplex, GfError> {
    let gens = g.basis();
    if max_cochain_degree > gens.len() + 1 {
        return Err(GfError::Degree {
            degree: max_cochain_degree,
            available: gens.len(),
        });
    }
    let module = Module::new(m, g)?;
    let mut bases = Vec::new();
    let mut weights = Vec::new();
    for p in 0..=max_cochain_degree {
        let mut basis = Vec::new();
        let mut wts = Vec::new();
        for s in subsets(&gens, p) {
            let sw: i64 = -s.iter().sum::<i64>();
            for (j, f) in module.basis.iter().enumerate() {
                let w = sw + module.weights[j];
                if only_weight.is_none_or(|x| x == w) {
                    basis.push(Cochain {
                        lambdas: s.clone(),
                        module: f.clone(),
                    });
                    wts.push(w);
                }
            }
        }
        bases.push(basis);
        weights.push(wts);
    }
    let index = bases
        .iter()
        .map(|b| b.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect())
        .collect();
    Ok(GradedCEComplex {
        algebra: *g,
        module,
        bases,
        weights,
        index,
    })
}

impl GradedCEComplex {
    pub fn algebra(&self) -> &TruncatedW1 {
        &self.algebra
    }

    pub fn max_degree(&self) -> usize {
        self.bases.len() - 1
    }

    pub fn basis(&self, p: usize) -> &[Cochain] {
        &self.bases[p]
    }

    pub fn weights(&self, p: usize) -> &[i64] {
        &self.weights[p]
    }

    pub fn weight_of(&self, c: &Cochain) -> i64 {
        let j = self.module.index[&c.module];
        -c.lambdas.iter().sum::<i64>() + self.module.weights[j]
    }

    /// `d` of one basis cochain as a map cochain → coefficient (not
    /// restricted to any stored basis).
    pub fn differential_of(&self, c: &Cochain) -> BTreeMap<Cochain, Rational> {
        let mut out: BTreeMap<Cochain, Rational> = BTreeMap::new();
        let mut add = |c: Cochain, x: Rational| {
            let e = out.entry(c).or_insert_with(Rational::zero);
            *e += x;
        };
        let p = c.lambdas.len();
        // cobracket part
        for (i, &k) in c.lambdas.iter().enumerate() {
            for m in self.algebra.basis() {
                let n = k - m;
                if n <= m {
                    continue;
                }
                let Some((coef, _)) = self.algebra.bracket(m, n) else {
                    continue;
                };
                // λ_{s_0} … (λ_m λ_n at slot i) …
                let mut seq: Vec<i64> = c.lambdas[..i].to_vec();
                seq.push(m);
                seq.push(n);
                seq.extend_from_slice(&c.lambdas[i + 1..]);
                if let Some((sign, sorted)) = wedge(&[], &seq) {
                    let s = if i % 2 == 0 { sign } else { -sign };
                    add(
                        Cochain {
                            lambdas: sorted,
                            module: c.module.clone(),
                        },
                        int(s * coef),
                    );
                }
            }
        }
        // module part: (-1)^{p+1} Σ_n λ_S λ_n ⊗ L_n f
        let j = self.module.index[&c.module];
        for n in self.algebra.basis() {
            let Some((sign, sorted)) = wedge(&c.lambdas, &[n]) else {
                continue;
            };
            let s = if p % 2 == 0 { -sign } else { sign };
            for (i, x) in self.module.act(n, j) {
                add(
                    Cochain {
                        lambdas: sorted.clone(),
                        module: self.module.basis[i].clone(),
                    },
                    x * int(s),
                );
            }
        }
        out.into_iter().filter(|(_, x)| !x.is_zero()).collect()
    }

    /// `ι_{L_0}` on one basis cochain.
    pub fn contraction_of(&self, c: &Cochain) -> BTreeMap<Cochain, Rational> {
        let mut out = BTreeMap::new();
        if let Some(pos) = c.lambdas.iter().position(|&x| x == 0) {
            let mut lambdas = c.lambdas.clone();
            lambdas.remove(pos);
            // λ_0(L_0) = -1, moved to the front past `pos` factors
            let s = if pos % 2 == 0 { -1 } else { 1 };
            out.insert(
                Cochain {
                    lambdas,
                    module: c.module.clone(),
                },
                int(s),
            );
        }
        out
    }

    fn matrix(&self, p: usize, weight: Option<i64>) -> Result<(Vec<usize>, Vec<usize>, SparseMatrix), GfError> {
        let keep = |q: usize| -> Vec<usize> {
            (0..self.bases[q].len())
                .filter(|&i| weight.is_none_or(|w| self.weights[q][i] == w))
                .collect()
        };
        let src = keep(p);
        let tgt = keep(p + 1);
        let pos: HashMap<usize, usize> = tgt.iter().enumerate().map(|(r, &i)| (i, r)).collect();
        let mut mat = SparseMatrix::zeros(tgt.len(), src.len());
        for (col, &i) in src.iter().enumerate() {
            for (c, x) in self.differential_of(&self.bases[p][i]) {
                // d preserves weight, so images of stored cochains are stored
                let row = self.index[p + 1]
                    .get(&c)
                    .and_then(|r| pos.get(r))
                    .ok_or_else(|| GfError::Argument("differential left the complex".into()))?;
                mat.set(*row, col, x)?;
            }
        }
        Ok((src, tgt, mat))
    }

    /// Subcomplex of a fixed conformal weight as a checked cochain complex.
    pub fn weight_subcomplex(&self, weight: i64) -> Result<ChainComplex<Cochain>, GfError> {
        let mut bases = Vec::new();
        let mut diffs = Vec::new();
        for p in 0..self.max_degree() {
            let (src, _, mat) = self.matrix(p, Some(weight))?;
            bases.push(src.iter().map(|&i| self.bases[p][i].clone()).collect());
            diffs.push(mat);
        }
        let last = self.max_degree();
        bases.push(
            (0..self.bases[last].len())
                .filter(|&i| self.weights[last][i] == weight)
                .map(|i| self.bases[last][i].clone())
                .collect(),
        );
        Ok(ChainComplex::new(0, bases, diffs)?)
    }
}

/// Per-weight outcome of the Cartan check.
#[derive(Clone, Debug, Serialize)]
pub struct CartanWeight {
    pub weight: i64,
    pub cochains: usize,
    /// The scalar, if `dι + ιd` acts as one on every cochain of this weight.
    pub scalar: Option<String>,
    pub non_scalar: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CartanReport {
    pub checked: usize,
    pub scalar_fraction: f64,
    pub by_weight: Vec<CartanWeight>,
}

impl CartanReport {
    /// Every cochain is scaled by its weight, which vanishes only in weight 0.
    pub fn passed(&self) -> bool {
        self.by_weight
            .iter()
            .all(|w| w.non_scalar == 0 && w.scalar.as_deref() == Some(&format_rational(&int(w.weight))))
    }
}

fn add_map(acc: &mut BTreeMap<Cochain, Rational>, src: BTreeMap<Cochain, Rational>, scale: &Rational) {
    for (c, x) in src {
        let e = acc.entry(c).or_insert_with(Rational::zero);
        *e += x * scale;
    }
}

/// Evaluates `dι_{L_0} + ι_{L_0}d` on every basis cochain and records the
/// scalar it acts by in each weight.
pub fn cartan_homotopy_check(c: &GradedCEComplex) -> CartanReport {
    let mut by_weight: BTreeMap<i64, (usize, Option<Rational>, usize)> = BTreeMap::new();
    let mut checked = 0;
    let mut scalar_ok = 0;
    for p in 0..=c.max_degree() {
        for (i, x) in c.bases[p].iter().enumerate() {
            let w = c.weights[p][i];
            let mut total = BTreeMap::new();
            for (y, a) in c.contraction_of(x) {
                add_map(&mut total, c.differential_of(&y), &a);
            }
            for (y, a) in c.differential_of(x) {
                add_map(&mut total, c.contraction_of(&y), &a);
            }
            total.retain(|_, v| !v.is_zero());
            let own = total.remove(x).unwrap_or_else(Rational::zero);
            let scalar = total.is_empty().then_some(own);
            checked += 1;
            let entry = by_weight.entry(w).or_insert((0, None, 0));
            entry.0 += 1;
            match scalar {
                Some(s) if entry.1.is_none() || entry.1.as_ref() == Some(&s) => {
                    entry.1 = Some(s);
                    scalar_ok += 1;
                }
                _ => entry.2 += 1,
            }
        }
    }
    CartanReport {
        checked,
        scalar_fraction: if checked == 0 { 1.0 } else { scalar_ok as f64 / checked as f64 },
        by_weight: by_weight
            .into_iter()
            .map(|(weight, (cochains, s, non_scalar))| CartanWeight {
                weight,
                cochains,
                scalar: if non_scalar == 0 { s.map(|s| format_rational(&s)) } else { None },
                non_scalar,
            })
            .collect(),
    }
}

/// One cochain term of a representative.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct CochainTerm {
    pub lambdas: Vec<i64>,
    pub module: ModuleElement,
    pub coefficient: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CohomologyEntry {
    pub degree: i64,
    pub dimension: usize,
    pub representatives: Vec<Vec<CochainTerm>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReducedW1Cohomology {
    pub cutoff: i64,
    /// Dimensions in degrees 1, 2, 3.
    pub dims: [usize; 3],
    pub degree3_generator: Vec<CochainTerm>,
    /// Coefficient of `λ_{-1} λ_0 λ_1` in the generator.
    pub top_coefficient: String,
}

fn terms(basis: &[Cochain], v: &SparseVector) -> Vec<CochainTerm> {
    v.iter()
        .map(|(&i, x)| CochainTerm {
            lambdas: basis[i].lambdas.clone(),
            module: basis[i].module.clone(),
            coefficient: format_rational(x),
        })
        .collect()
}

/// Cohomology of a weight subcomplex with representatives.
pub fn weight_cohomology(c: &GradedCEComplex, weight: i64) -> Result<Vec<CohomologyEntry>, GfError> {
    let cx = c.weight_subcomplex(weight)?;
    Ok(cx
        .cohomology()
        .into_iter()
        .map(|g| CohomologyEntry {
            degree: g.degree,
            dimension: g.dim,
            representatives: g.representatives.iter().map(|v| terms(cx.basis(g.degree), v)).collect(),
        })
        .collect())
}

/// Reduced cohomology of `W_1` through the weight-zero subcomplex of the
/// truncation at `cutoff`.
pub fn reduced_w1_cohomology(cutoff: i64) -> Result<ReducedW1Cohomology, GfError> {
    if cutoff < 3 {
        return Err(GfError::Cutoff { min: 3, got: cutoff });
    }
    let g = TruncatedW1::new(cutoff)?;
    let c = build_filtered(&g, &CEModuleSpec::Trivial, 4, Some(0))?;
    let cx = c.weight_subcomplex(0)?;
    let groups = cx.cohomology();
    let dim = |d: i64| groups.iter().find(|x| x.degree == d).map_or(0, |x| x.dim);
    let top = groups.iter().find(|x| x.degree == 3).expect("degree 3 present");
    let gen = top.representatives.first().cloned().unwrap_or_default();
    let basis = cx.basis(3);
    let key = Cochain {
        lambdas: vec![-1, 0, 1],
        module: ModuleElement::One,
    };
    let coef = basis
        .iter()
        .position(|b| *b == key)
        .and_then(|i| gen.get(&i).cloned())
        .unwrap_or_else(Rational::zero);
    Ok(ReducedW1Cohomology {
        cutoff,
        dims: [dim(1), dim(2), dim(3)],
        degree3_generator: terms(basis, &gen),
        top_coefficient: format_rational(&coef),
    })
}

/// Polynomial `p`-forms on `ℂ^n` whose coefficients are homogeneous of
/// degree `poly_degree`; with `closed`, only those killed by `d`.
pub fn derham_count(dim_v: usize, form_degree: usize, poly_degree: usize, closed: bool) -> Result<usize, GfError> {
    if form_degree > dim_v {
        return Ok(0);
    }
    let monos = |deg: usize| -> Vec<Vec<usize>> {
        // exponent vectors of total degree `deg`
        fn rec(n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == n - 1 {
                cur.push(left);
                out.push(cur.clone());
                cur.pop();
                return;
            }
            for e in 0..=left {
                cur.push(e);
                rec(n, left - e, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(dim_v, deg, &mut Vec::new(), &mut out);
        out
    };
    let idx: Vec<i64> = (0..dim_v as i64).collect();
    let forms = subsets(&idx, form_degree);
    let total = monos(poly_degree).len() * forms.len();
    if !closed || poly_degree == 0 || form_degree == dim_v {
        // constants and top forms are closed
        return Ok(total);
    }
    let src: Vec<(Vec<usize>, Vec<i64>)> = monos(poly_degree)
        .into_iter()
        .flat_map(|m| forms.iter().map(move |f| (m.clone(), f.clone())))
        .collect();
    let tgt_forms = subsets(&idx, form_degree + 1);
    let tgt: HashMap<(Vec<usize>, Vec<i64>), usize> = monos(poly_degree - 1)
        .into_iter()
        .flat_map(|m| tgt_forms.iter().map(move |f| (m.clone(), f.clone())))
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    let mut d = SparseMatrix::zeros(tgt.len(), src.len());
    for (col, (m, f)) in src.iter().enumerate() {
        for a in 0..dim_v {
            if m[a] == 0 {
                continue;
            }
            // d(x^m dx_f) ∋ m_a x^{m - e_a} dx_a ∧ dx_f
            let Some((sign, sorted)) = wedge(&[], &[&[a as i64][..], f].concat()) else {
                continue;
            };
            let mut mm = m.clone();
            mm[a] -= 1;
            let row = tgt[&(mm, sorted)];
            d.add_to(row, col, &int(sign * m[a] as i64))?;
        }
    }
    Ok(total - crate::exactlin::rank(&d))
}

/// Cumulative count over coefficient degrees `0..=poly_cap`.
pub fn derham_oracle(dim_v: usize, form_degree: usize, poly_cap: usize, closed: bool) -> Result<usize, GfError> {
    (0..=poly_cap).map(|j| derham_count(dim_v, form_degree, j, closed)).sum()
}

/// One `(shifted degree, Sym degree)` cell of the weight-zero deformation
/// complex.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct DefCell {
    pub degree: i64,
    pub sym_degree: usize,
    pub dimension: usize,
    pub expected: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DefComplexReport {
    pub dim_v: usize,
    pub poly_cap: usize,
    pub cells: Vec<DefCell>,
    /// Total dimension per shifted degree.
    pub totals: BTreeMap<i64, usize>,
}

impl DefComplexReport {
    pub fn matches_oracle(&self) -> bool {
        self.cells.iter().all(|c| c.dimension == c.expected)
    }
}

/// Expected dimension of a cell: in Sym degree `k`, shifted degree -1 holds
/// closed 2-forms with coefficients of degree `k - 2`, degree 0 all 1-forms
/// with coefficients of degree `k - 1`, and degree 1 closed 1-forms of
/// coefficient degree `k - 1` plus the constants when `k = 0`.
fn expected_cell(dim_v: usize, degree: i64, k: usize) -> Result<usize, GfError> {
    Ok(match degree {
        -1 if k >= 2 => derham_count(dim_v, 2, k - 2, true)?,
        0 if k >= 1 => derham_count(dim_v, 1, k - 1, false)?,
        1 if k >= 1 => derham_count(dim_v, 1, k - 1, true)?,
        1 => 1,
        _ => 0,
    })
}

/// Weight-zero subcomplex of `C^*(W_1; Sym(V^∨[ζ]))` split by Sym degree
/// `k ≤ poly_cap`, with the constant Sym-degree-0 part reduced. Degrees are
/// shifted down by two.
pub fn weight0_def_complex_dims(dim_v: usize, poly_cap: usize) -> Result<DefComplexReport, GfError> {
    if dim_v == 0 || poly_cap == 0 {
        return Err(GfError::Argument("dim V and poly_cap must be at least 1".into()));
    }
    // weight-zero cochains use ζ_0, ζ_1 and λ_{-1}, λ_0, λ_1 only
    let g = TruncatedW1::new(3)?;
    let mut cells = Vec::new();
    for k in 0..=poly_cap {
        let module = if k == 0 {
            CEModuleSpec::Trivial
        } else {
            CEModuleSpec::SymJets {
                dim_v,
                min_sym_degree: k,
                max_sym_degree: k,
                jet_order_cap: 1,
            }
        };
        let c = build_filtered(&g, &module, 4, Some(0))?;
        let cx = c.weight_subcomplex(0)?;
        for grp in cx.cohomology() {
            if grp.degree > 3 || (k == 0 && grp.degree == 0) {
                continue;
            }
            let degree = grp.degree - 2;
            cells.push(DefCell {
                degree,
                sym_degree: k,
                dimension: grp.dim,
                expected: expected_cell(dim_v, degree, k)?,
            });
        }
    }
    let mut totals = BTreeMap::new();
    for c in &cells {
        *totals.entry(c.degree).or_insert(0) += c.dimension;
    }
    Ok(DefComplexReport {
        dim_v,
        poly_cap,
        cells,
        totals,
    })
}
