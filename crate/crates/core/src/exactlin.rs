//! Exact sparse linear algebra over the rationals.
//!
//! Everything here is fraction-free on the inside: rows are scaled to
//! primitive integer vectors before elimination, and every elimination step
//! `r <- a*r - b*p` is followed by dividing out the row content. Pivots are
//! chosen in (row, column) order so echelon forms and kernel bases are
//! reproducible bit for bit.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Arbitrary-precision rational in lowest terms with positive denominator.
pub type Rational = BigRational;

/// Sparse vector: index to nonzero coefficient.
pub type SparseVector = BTreeMap<usize, Rational>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinAlgError {
    #[error("matrix index ({row}, {col}) out of range for {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("d∘d ≠ 0 between degrees {degree} and {}", degree + 2)]
    NotAComplex { degree: i64 },
    #[error("cannot parse rational {0:?}")]
    ParseRational(String),
}

/// Shorthand constructor for small rationals.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Wire format for rationals: always `"num/den"`, even for integers.
pub fn format_rational(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// `serialize_with` adapter writing the wire format.
pub fn serialize_rational<S: serde::Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(q))
}

pub fn parse_rational(s: &str) -> Result<Rational, LinAlgError> {
    let err = || LinAlgError::ParseRational(s.to_string());
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: BigInt = n.parse().map_err(|_| err())?;
    let d: BigInt = d.parse().map_err(|_| err())?;
    if d.is_zero() {
        return Err(err());
    }
    Ok(Rational::new(n, d))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), Rational>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries.insert((i, i), Rational::one());
        }
        m
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged dense input");
            for (c, &x) in row.iter().enumerate() {
                if x != 0 {
                    m.entries.insert((r, c), int(x));
                }
            }
        }
        m
    }

    /// Builds a matrix whose columns are the given sparse vectors.
    pub fn from_columns(rows: usize, columns: &[SparseVector]) -> Result<Self, LinAlgError> {
        let mut m = Self::zeros(rows, columns.len());
        for (c, col) in columns.iter().enumerate() {
            for (&r, x) in col {
                m.set(r, c, x.clone())?;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Rational)> {
        self.entries.iter().map(|(&(r, c), x)| (r, c, x))
    }

    pub fn get(&self, row: usize, col: usize) -> Rational {
        self.entries
            .get(&(row, col))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Sets an entry; writing zero removes it.
    pub fn set(&mut self, row: usize, col: usize, value: Rational) -> Result<(), LinAlgError> {
        if row >= self.rows || col >= self.cols {
            return Err(LinAlgError::IndexOutOfRange {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        if value.is_zero() {
            self.entries.remove(&(row, col));
        } else {
            self.entries.insert((row, col), value);
        }
        Ok(())
    }

    pub fn add_to(&mut self, row: usize, col: usize, value: &Rational) -> Result<(), LinAlgError> {
        let cur = self.get(row, col);
        self.set(row, col, cur + value)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn transpose(&self) -> Self {
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            entries: self
                .entries
                .iter()
                .map(|(&(r, c), x)| ((c, r), x.clone()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &SparseMatrix) -> Result<SparseMatrix, LinAlgError> {
        if self.cols != other.rows {
            return Err(LinAlgError::Shape(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let other_rows = other.row_vectors();
        let mut out = SparseMatrix::zeros(self.rows, other.cols);
        for (&(r, k), a) in &self.entries {
            for (&c, b) in &other_rows[k] {
                let v = out.get(r, c) + a * b;
                out.set(r, c, v)?;
            }
        }
        Ok(out)
    }

    pub fn apply(&self, v: &SparseVector) -> SparseVector {
        let mut out = SparseVector::new();
        for (&(r, c), a) in &self.entries {
            if let Some(x) = v.get(&c) {
                add_into(&mut out, r, &(a * x));
            }
        }
        out
    }

    pub fn row_vectors(&self) -> Vec<SparseVector> {
        let mut rows = vec![SparseVector::new(); self.rows];
        for (&(r, c), x) in &self.entries {
            rows[r].insert(c, x.clone());
        }
        rows
    }

    pub fn column_vectors(&self) -> Vec<SparseVector> {
        let mut cols = vec![SparseVector::new(); self.cols];
        for (&(r, c), x) in &self.entries {
            cols[c].insert(r, x.clone());
        }
        cols
    }
}

impl fmt::Display for SparseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.get(r, c).to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

pub(crate) fn add_into(v: &mut SparseVector, idx: usize, x: &Rational) {
    if x.is_zero() {
        return;
    }
    let e = v.entry(idx).or_insert_with(Rational::zero);
    *e += x;
    if e.is_zero() {
        v.remove(&idx);
    }
}

/// Primitive integer row, sorted by column.
type IntRow = Vec<(usize, BigInt)>;

fn primitive_row(v: &SparseVector) -> IntRow {
    let lcm = v
        .values()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let mut row: IntRow = v
        .iter()
        .map(|(&c, x)| (c, x.numer() * (&lcm / x.denom())))
        .collect();
    normalize(&mut row);
    row
}

/// Divides out the content and makes the leading entry positive.
fn normalize(row: &mut IntRow) {
    let Some(first) = row.first() else { return };
    let mut g = first.1.abs();
    for (_, x) in row.iter().skip(1) {
        if g.is_one() {
            break;
        }
        g = g.gcd(x);
    }
    let flip = first.1.is_negative();
    if !g.is_one() || flip {
        let g = if flip { -g } else { g };
        for (_, x) in row.iter_mut() {
            *x = &*x / &g;
        }
    }
}

/// `a*row - b*pivot` for the scalars that cancel the pivot column.
fn eliminate(row: &IntRow, pivot: &IntRow, col: usize) -> IntRow {
    let a = &pivot[0].1;
    let b = &row.iter().find(|(c, _)| *c == col).expect("column present").1;
    let g = a.gcd(b);
    let (ra, rb) = (a / &g, b / &g);
    let mut out = IntRow::with_capacity(row.len() + pivot.len());
    let (mut i, mut j) = (0, 0);
    while i < row.len() || j < pivot.len() {
        let take_row = j >= pivot.len() || (i < row.len() && row[i].0 < pivot[j].0);
        let take_piv = i >= row.len() || (j < pivot.len() && pivot[j].0 < row[i].0);
        if take_row {
            out.push((row[i].0, &ra * &row[i].1));
            i += 1;
        } else if take_piv {
            out.push((pivot[j].0, -(&rb * &pivot[j].1)));
            j += 1;
        } else {
            let x = &ra * &row[i].1 - &rb * &pivot[j].1;
            if !x.is_zero() {
                out.push((row[i].0, x));
            }
            i += 1;
            j += 1;
        }
    }
    normalize(&mut out);
    out
}

/// Incremental row-echelon basis of a subspace of ℚ^n.
///
/// Pivot rows are kept primitive with a positive leading entry; a vector is
/// reduced only against the pivot of its current leading column, which is
/// enough for rank and membership.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    pivots: BTreeMap<usize, IntRow>,
}

impl Echelon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivot_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.pivots.keys().copied()
    }

    fn reduce_int(&self, mut row: IntRow) -> IntRow {
        while let Some(&(lead, _)) = row.first() {
            match self.pivots.get(&lead) {
                Some(p) => row = eliminate(&row, p, lead),
                None => break,
            }
        }
        row
    }

    /// Inserts a vector; returns true when it enlarged the span.
    pub fn insert(&mut self, v: &SparseVector) -> bool {
        if v.is_empty() {
            return false;
        }
        let row = self.reduce_int(primitive_row(v));
        match row.first() {
            Some(&(lead, _)) => {
                self.pivots.insert(lead, row);
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, v: &SparseVector) -> bool {
        v.is_empty() || self.reduce_int(primitive_row(v)).is_empty()
    }

    /// Reduced row echelon rows over ℚ (pivot entry 1), keyed by pivot column.
    pub fn reduced_rows(&self) -> BTreeMap<usize, SparseVector> {
        let mut out: BTreeMap<usize, SparseVector> = BTreeMap::new();
        // back-substitute from the last pivot column down
        for (&pc, row) in self.pivots.iter().rev() {
            let lead = Rational::from_integer(row[0].1.clone());
            let mut v: SparseVector = row
                .iter()
                .map(|(c, x)| (*c, Rational::from_integer(x.clone()) / &lead))
                .collect();
            let later: Vec<usize> = v.keys().copied().filter(|c| *c > pc).collect();
            for c in later {
                if let (Some(x), Some(r)) = (v.get(&c).cloned(), out.get(&c)) {
                    for (&k, y) in r {
                        add_into(&mut v, k, &-(&x * y));
                    }
                }
            }
            out.insert(pc, v);
        }
        out
    }
}

pub fn rank(m: &SparseMatrix) -> usize {
    let mut ech = Echelon::new();
    for row in m.row_vectors() {
        ech.insert(&row);
    }
    ech.dim()
}

/// Kernel basis in the reduced-echelon convention: one vector per free
/// column `f`, with `v[f] = 1` and zeros on the other free columns.
pub fn kernel_basis(m: &SparseMatrix) -> Vec<SparseVector> {
    let mut ech = Echelon::new();
    for row in m.row_vectors() {
        ech.insert(&row);
    }
    let rref = ech.reduced_rows();
    let mut free_to_pivots: BTreeMap<usize, Vec<(usize, Rational)>> = BTreeMap::new();
    for (&pc, row) in &rref {
        for (&c, x) in row {
            if c != pc {
                free_to_pivots.entry(c).or_default().push((pc, x.clone()));
            }
        }
    }
    (0..m.cols())
        .filter(|c| !rref.contains_key(c))
        .map(|f| {
            let mut v = SparseVector::new();
            v.insert(f, Rational::one());
            if let Some(list) = free_to_pivots.get(&f) {
                for (pc, x) in list {
                    v.insert(*pc, -x.clone());
                }
            }
            v
        })
        .collect()
}

/// A cochain complex `C^k --d_k--> C^{k+1}` with labelled bases.
///
/// `bases[i]` is the basis of degree `start_degree + i`; `differentials[i]`
/// maps degree `start_degree + i` to the next one (rows = target basis).
#[derive(Clone, Debug)]
pub struct ChainComplex<L> {
    start_degree: i64,
    bases: Vec<Vec<L>>,
    differentials: Vec<SparseMatrix>,
}

#[derive(Clone, Debug)]
pub struct CohomologyGroup {
    pub degree: i64,
    pub dim: usize,
    pub representatives: Vec<SparseVector>,
}

impl<L> ChainComplex<L> {
    pub fn new(
        start_degree: i64,
        bases: Vec<Vec<L>>,
        differentials: Vec<SparseMatrix>,
    ) -> Result<Self, LinAlgError> {
        if differentials.len() + 1 != bases.len() && !(bases.is_empty() && differentials.is_empty()) {
            return Err(LinAlgError::Shape(format!(
                "{} bases need {} differentials, got {}",
                bases.len(),
                bases.len().saturating_sub(1),
                differentials.len()
            )));
        }
        for (i, d) in differentials.iter().enumerate() {
            if d.cols() != bases[i].len() || d.rows() != bases[i + 1].len() {
                return Err(LinAlgError::Shape(format!(
                    "d in degree {} is {}x{}, bases are {} -> {}",
                    start_degree + i as i64,
                    d.rows(),
                    d.cols(),
                    bases[i].len(),
                    bases[i + 1].len()
                )));
            }
        }
        for i in 1..differentials.len() {
            if !differentials[i].mul(&differentials[i - 1])?.is_zero() {
                return Err(LinAlgError::NotAComplex {
                    degree: start_degree + i as i64 - 1,
                });
            }
        }
        Ok(ChainComplex {
            start_degree,
            bases,
            differentials,
        })
    }

    pub fn start_degree(&self) -> i64 {
        self.start_degree
    }

    pub fn degrees(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.bases.len()).map(move |i| self.start_degree + i as i64)
    }

    pub fn basis(&self, degree: i64) -> &[L] {
        let i = degree - self.start_degree;
        if i < 0 || i as usize >= self.bases.len() {
            return &[];
        }
        &self.bases[i as usize]
    }

    /// Differential leaving `degree`, if the complex stores one.
    pub fn differential(&self, degree: i64) -> Option<&SparseMatrix> {
        let i = degree - self.start_degree;
        if i < 0 {
            return None;
        }
        self.differentials.get(i as usize)
    }

    pub fn cohomology(&self) -> Vec<CohomologyGroup> {
        self.degrees()
            .map(|k| {
                let n = self.basis(k).len();
                let cocycles = match self.differential(k) {
                    Some(d) => kernel_basis(d),
                    None => (0..n)
                        .map(|i| SparseVector::from([(i, Rational::one())]))
                        .collect(),
                };
                let mut span = Echelon::new();
                if let Some(dprev) = self.differential(k - 1) {
                    for col in dprev.column_vectors() {
                        span.insert(&col);
                    }
                }
                let representatives: Vec<SparseVector> =
                    cocycles.into_iter().filter(|z| span.insert(z)).collect();
                CohomologyGroup {
                    degree: k,
                    dim: representatives.len(),
                    representatives,
                }
            })
            .collect()
    }
}

/// Dimension of cohomology in each stored degree.
pub fn cohomology_dims<L>(c: &ChainComplex<L>) -> Vec<usize> {
    c.degrees()
        .map(|k| {
            let n = c.basis(k).len();
            let out = c.differential(k).map_or(0, rank);
            let inc = c.differential(k - 1).map_or(0, rank);
            n - out - inc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&SparseMatrix::identity(2)), 2);
        assert_eq!(rank(&SparseMatrix::zeros(3, 4)), 0);
        assert_eq!(rank(&SparseMatrix::from_i64_rows(&[vec![1, 2], vec![2, 4]])), 1);
    }

    #[test]
    fn kernel_examples() {
        assert!(kernel_basis(&SparseMatrix::identity(3)).is_empty());
        let k = kernel_basis(&SparseMatrix::zeros(2, 2));
        assert_eq!(
            k,
            vec![
                SparseVector::from([(0, int(1))]),
                SparseVector::from([(1, int(1))])
            ]
        );
        let k = kernel_basis(&SparseMatrix::from_i64_rows(&[vec![1, 1]]));
        assert_eq!(k, vec![SparseVector::from([(0, int(-1)), (1, int(1))])]);
    }

    #[test]
    fn kernel_with_fractions() {
        let m = SparseMatrix::from_i64_rows(&[vec![2, 3, 0, 1], vec![4, 6, 1, 0]]);
        let k = kernel_basis(&m);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(m.apply(v).is_empty());
        }
        assert_eq!(k[0], SparseVector::from([(0, rat(-3, 2)), (1, int(1))]));
    }

    #[test]
    fn acyclic_and_zero_complexes() {
        let c = ChainComplex::new(0, vec![vec!["a"], vec!["b"]], vec![SparseMatrix::identity(1)])
            .unwrap();
        assert_eq!(cohomology_dims(&c), vec![0, 0]);
        let c = ChainComplex::new(
            0,
            vec![vec![0; 2], vec![0; 3], vec![0; 1]],
            vec![SparseMatrix::zeros(3, 2), SparseMatrix::zeros(1, 3)],
        )
        .unwrap();
        assert_eq!(cohomology_dims(&c), vec![2, 3, 1]);
    }

    #[test]
    fn rejects_non_complex() {
        let err = ChainComplex::new(
            0,
            vec![vec![()], vec![()], vec![()]],
            vec![SparseMatrix::identity(1), SparseMatrix::identity(1)],
        )
        .unwrap_err();
        assert_eq!(err, LinAlgError::NotAComplex { degree: 0 });
    }

    #[test]
    fn representatives_are_cocycles_not_boundaries() {
        // C0 = Q, C1 = Q^2, C2 = Q with d0 = (1,1)^T, d1 = (1,-1)
        let d0 = SparseMatrix::from_i64_rows(&[vec![1], vec![1]]);
        let d1 = SparseMatrix::from_i64_rows(&[vec![1, -1]]);
        let c = ChainComplex::new(0, vec![vec![0], vec![0, 1], vec![0]], vec![d0, d1]).unwrap();
        let h = c.cohomology();
        assert_eq!(h.iter().map(|g| g.dim).collect::<Vec<_>>(), vec![0, 0, 0]);
    }

    #[test]
    fn rational_wire_format() {
        assert_eq!(format_rational(&rat(-6, 4)), "-3/2");
        assert_eq!(format_rational(&int(5)), "5/1");
        assert_eq!(parse_rational("-3/2").unwrap(), rat(-3, 2));
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert!(parse_rational("1/0").is_err());
    }

    fn arb_matrix() -> impl Strategy<Value = SparseMatrix> {
        (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
            proptest::collection::vec((0..r, 0..c, -4i64..=4, 1i64..=3), 0..(r * c)).prop_map(
                move |trip| {
                    let mut m = SparseMatrix::zeros(r, c);
                    for (i, j, n, d) in trip {
                        m.set(i, j, rat(n, d)).unwrap();
                    }
                    m
                },
            )
        })
    }

    proptest! {
        #[test]
        fn rank_nullity(m in arb_matrix()) {
            let k = kernel_basis(&m);
            prop_assert_eq!(rank(&m) + k.len(), m.cols());
            for v in &k {
                prop_assert!(m.apply(v).is_empty());
            }
            let mut ech = Echelon::new();
            for v in &k {
                prop_assert!(ech.insert(v));
            }
        }

        #[test]
        fn rank_of_transpose(m in arb_matrix()) {
            prop_assert_eq!(rank(&m), rank(&m.transpose()));
        }
    }
}
