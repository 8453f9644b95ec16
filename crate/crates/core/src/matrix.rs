//! Dense complex square matrices, index sets and minors.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const MAX_DIM: usize = 8;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Square complex matrix stored row-major. Indices are 0-based throughout.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// Validating constructor: `2 <= n <= 8`, `n*n` finite entries.
    pub fn new(n: usize, data: Vec<C64>) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        if data.len() != n * n {
            return Err(Error::ShapeMismatch { n, len: data.len() });
        }
        if let Some(p) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(p / n, p % n));
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |j, k| if j == k { ONE } else { ZERO })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                data.push(f(j, k));
            }
        }
        Self { n, data }
    }

    pub fn from_diag(d: &[C64]) -> Self {
        Self::from_fn(d.len(), |j, k| if j == k { d[j] } else { ZERO })
    }

    /// Real-valued convenience constructor from nested rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        Self::from_fn(n, |j, k| C64::new(rows[j][k], 0.0))
    }

    /// Matrix unit e_jk.
    pub fn unit(n: usize, j: usize, k: usize) -> Self {
        let mut m = Self::zeros(n);
        m[(j, k)] = ONE;
        m
    }

    /// The antidiagonal permutation matrix r = Σ e_{j, n-1-j}.
    pub fn antidiagonal(n: usize) -> Self {
        Self::from_fn(n, |j, k| if j + k + 1 == n { ONE } else { ZERO })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |j, k| self[(k, j)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |j, k| self[(k, j)].conj())
    }

    pub fn conj(&self) -> Self {
        Self { n: self.n, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|j| self[(j, j)]).sum()
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.n).map(|j| self[(j, j)]).collect()
    }

    /// Diagonal part as a matrix.
    pub fn diagonal_part(&self) -> Self {
        Self::from_fn(self.n, |j, k| if j == k { self[(j, k)] } else { ZERO })
    }

    /// Upper triangle including the diagonal.
    pub fn upper(&self) -> Self {
        Self::from_fn(self.n, |j, k| if j <= k { self[(j, k)] } else { ZERO })
    }

    /// Lower triangle including the diagonal.
    pub fn lower(&self) -> Self {
        Self::from_fn(self.n, |j, k| if j >= k { self[(j, k)] } else { ZERO })
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest Euclidean row norm; used to scale minor tolerances.
    pub fn max_row_norm(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|k| self[(j, k)].norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn dist(&self, other: &Self) -> f64 {
        (self - other).norm_fro()
    }

    /// Conjugation by a permutation: `b[j][k] = a[p[j]][p[k]]`.
    pub fn permute(&self, p: &[usize]) -> Self {
        Self::from_fn(self.n, |j, k| self[(p[j], p[k])])
    }

    pub fn det(&self) -> C64 {
        det_dense(self.n, &self.data)
    }

    pub fn inverse(&self) -> Result<Self> {
        let lu = Lu::new(self.n, &self.data);
        if lu.singular {
            return Err(Error::Singular);
        }
        let mut out = Self::zeros(self.n);
        let mut e = vec![ZERO; self.n];
        for c in 0..self.n {
            e.iter_mut().for_each(|z| *z = ZERO);
            e[c] = ONE;
            let x = lu.solve(&e);
            for r in 0..self.n {
                out[(r, c)] = x[r];
            }
        }
        Ok(out)
    }

    /// Solves `self · x = b` column-wise.
    pub fn solve(&self, b: &Self) -> Result<Self> {
        let lu = Lu::new(self.n, &self.data);
        if lu.singular {
            return Err(Error::Singular);
        }
        let mut out = Self::zeros(self.n);
        let mut col = vec![ZERO; self.n];
        for c in 0..self.n {
            for r in 0..self.n {
                col[r] = b[(r, c)];
            }
            let x = lu.solve(&col);
            for r in 0..self.n {
                out[(r, c)] = x[r];
            }
        }
        Ok(out)
    }

    /// Cofactor matrix A = (det a)(a⁻¹)ᵗ, computed from minors so it is
    /// defined for singular `a` as well.
    pub fn cofactor(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |j, k| {
            let rows: Vec<usize> = (0..n).filter(|&r| r != j).collect();
            let cols: Vec<usize> = (0..n).filter(|&c| c != k).collect();
            let m = minor_raw(self, &rows, &cols);
            if (j + k) % 2 == 0 {
                m
            } else {
                -m
            }
        })
    }

    /// Matrix exponential by scaling and squaring with a Taylor kernel.
    pub fn expm(&self) -> Self {
        let norm = self.norm_fro();
        let mut s = 0;
        let mut scale = 1.0;
        while norm * scale > 0.5 {
            scale *= 0.5;
            s += 1;
        }
        let a = self.scale(C64::new(scale, 0.0));
        let mut term = Self::identity(self.n);
        let mut sum = Self::identity(self.n);
        for k in 1..=18 {
            term = &(&term * &a) * C64::new(1.0 / k as f64, 0.0);
            sum = &sum + &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    /// Exponential of a diagonal matrix given by its entries.
    pub fn exp_diag(d: &[C64]) -> Self {
        Self::from_diag(&d.iter().map(|z| z.exp()).collect::<Vec<_>>())
    }

    /// Commutator [self, other].
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (j, k): (usize, usize)) -> &C64 {
        &self.data[j * self.n + k]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (j, k): (usize, usize)) -> &mut C64 {
        &mut self.data[j * self.n + k]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let n = self.n;
        debug_assert_eq!(n, rhs.n);
        let mut out = ComplexMatrix::zeros(n);
        for j in 0..n {
            for l in 0..n {
                let a = self.data[j * n + l];
                if a == ZERO {
                    continue;
                }
                for k in 0..n {
                    out.data[j * n + k] += a * rhs.data[l * n + k];
                }
            }
        }
        out
    }
}

impl Mul<C64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: C64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(-ONE)
    }
}

/// LU factorization with partial pivoting of a k×k row-major block.
struct Lu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    fn new(n: usize, data: &[C64]) -> Self {
        let mut lu = data.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for c in 0..n {
            let (p, best) = (c..n)
                .map(|r| (r, lu[r * n + c].norm()))
                .fold((c, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != c {
                for k in 0..n {
                    lu.swap(p * n + k, c * n + k);
                }
                perm.swap(p, c);
                sign = -sign;
            }
            let piv = lu[c * n + c];
            for r in c + 1..n {
                let f = lu[r * n + c] / piv;
                lu[r * n + c] = f;
                for k in c + 1..n {
                    let t = lu[c * n + k];
                    lu[r * n + k] -= f * t;
                }
            }
        }
        Self { n, lu, perm, sign, singular }
    }

    fn det(&self) -> C64 {
        if self.singular {
            return ZERO;
        }
        (0..self.n).map(|j| self.lu[j * self.n + j]).product::<C64>() * self.sign
    }

    fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            for k in 0..r {
                let t = x[k];
                x[r] -= self.lu[r * n + k] * t;
            }
        }
        for r in (0..n).rev() {
            for k in r + 1..n {
                let t = x[k];
                x[r] -= self.lu[r * n + k] * t;
            }
            x[r] /= self.lu[r * n + r];
        }
        x
    }
}

pub(crate) fn det_dense(n: usize, data: &[C64]) -> C64 {
    match n {
        0 => ONE,
        1 => data[0],
        2 => data[0] * data[3] - data[1] * data[2],
        _ => Lu::new(n, data).det(),
    }
}

/// Inverse of a k×k row-major block, `None` if singular.
pub(crate) fn inverse_dense(n: usize, data: &[C64]) -> Option<Vec<C64>> {
    let lu = Lu::new(n, data);
    if lu.singular {
        return None;
    }
    let mut out = vec![ZERO; n * n];
    let mut e = vec![ZERO; n];
    for c in 0..n {
        e.iter_mut().for_each(|z| *z = ZERO);
        e[c] = ONE;
        let x = lu.solve(&e);
        for r in 0..n {
            out[r * n + c] = x[r];
        }
    }
    Some(out)
}

/// Strictly increasing subset of {0, …, n−1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut idx: Vec<usize>) -> Result<Self> {
        idx.sort_unstable();
        if idx.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("repeated index in index set".into()));
        }
        Ok(Self(idx))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// {start, …, end−1}.
    pub fn range(start: usize, end: usize) -> Self {
        Self((start..end).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// Union with extra indices.
    pub fn with(&self, extra: &[usize]) -> Result<Self> {
        let mut v = self.0.clone();
        v.extend_from_slice(extra);
        Self::new(v)
    }

    pub fn intersection_len(&self, other: &Self) -> usize {
        self.0.iter().filter(|j| other.contains(**j)).count()
    }
}

fn check_sets(a: &ComplexMatrix, rows: &IndexSet, cols: &IndexSet) -> Result<()> {
    if rows.len() != cols.len() {
        return Err(Error::InvalidIndexSets { rows: rows.len(), cols: cols.len() });
    }
    let n = a.n();
    if let Some(&j) = rows.0.iter().chain(&cols.0).find(|&&j| j >= n) {
        return Err(Error::IndexOutOfRange { index: j, n });
    }
    Ok(())
}

pub(crate) fn submatrix(a: &ComplexMatrix, rows: &[usize], cols: &[usize]) -> Vec<C64> {
    let mut v = Vec::with_capacity(rows.len() * cols.len());
    for &r in rows {
        for &c in cols {
            v.push(a[(r, c)]);
        }
    }
    v
}

pub(crate) fn minor_raw(a: &ComplexMatrix, rows: &[usize], cols: &[usize]) -> C64 {
    det_dense(rows.len(), &submatrix(a, rows, cols))
}

/// m(rows; cols; a), with m(∅; ∅) = 1.
pub fn minor(a: &ComplexMatrix, rows: &IndexSet, cols: &IndexSet) -> Result<C64> {
    check_sets(a, rows, cols)?;
    Ok(minor_raw(a, &rows.0, &cols.0))
}

/// Gradient of a minor: `g[(r, c)] = ∂ m / ∂ a_rc`, by Jacobi's formula
/// on the submatrix (cofactors, so it stays valid when the minor vanishes).
pub fn minor_gradient(a: &ComplexMatrix, rows: &IndexSet, cols: &IndexSet) -> Result<ComplexMatrix> {
    check_sets(a, rows, cols)?;
    let k = rows.len();
    let mut g = ComplexMatrix::zeros(a.n());
    if k == 0 {
        return Ok(g);
    }
    for (i, &r) in rows.0.iter().enumerate() {
        for (j, &c) in cols.0.iter().enumerate() {
            let rr: Vec<usize> = rows.0.iter().copied().filter(|&x| x != r).collect();
            let cc: Vec<usize> = cols.0.iter().copied().filter(|&x| x != c).collect();
            let m = minor_raw(a, &rr, &cc);
            g[(r, c)] = if (i + j) % 2 == 0 { m } else { -m };
        }
    }
    Ok(g)
}

/// Gradient of log m(rows; cols): `(M⁻¹)ᵗ` scattered back into place.
pub fn log_minor_gradient(a: &ComplexMatrix, rows: &[usize], cols: &[usize]) -> Option<ComplexMatrix> {
    let k = rows.len();
    let mut g = ComplexMatrix::zeros(a.n());
    if k == 0 {
        return Some(g);
    }
    let inv = inverse_dense(k, &submatrix(a, rows, cols))?;
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            g[(r, c)] = inv[j * k + i];
        }
    }
    Some(g)
}

/// Upper and lower principal minors `(d⁺_1..d⁺_n, d⁻_1..d⁻_n)`, where
/// `d⁺_j = m(0..j; 0..j)` and `d⁻_j = m(j−1..n; j−1..n)` in 1-based labels.
pub fn principal_minors(a: &ComplexMatrix) -> (Vec<C64>, Vec<C64>) {
    let n = a.n();
    let up = (1..=n)
        .map(|j| {
            let s: Vec<usize> = (0..j).collect();
            minor_raw(a, &s, &s)
        })
        .collect();
    let low = (1..=n)
        .map(|j| {
            let s: Vec<usize> = (j - 1..n).collect();
            minor_raw(a, &s, &s)
        })
        .collect();
    (up, low)
}

/// Hadamard-type bound for k×k minors of `a`.
pub(crate) fn minor_bound(a: &ComplexMatrix, k: usize) -> f64 {
    a.max_row_norm().max(f64::MIN_POSITIVE).powi(k as i32)
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ComplexMatrix {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(MatrixJson {
            n: self.n,
            re: self.data.iter().map(|z| z.re).collect(),
            im: self.data.iter().map(|z| z.im).collect(),
        })
        .expect("matrix serializes")
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self> {
        let m: MatrixJson =
            serde_json::from_value(v.clone()).map_err(|e| Error::Format(e.to_string()))?;
        if m.re.len() != m.im.len() {
            return Err(Error::Format("re and im lengths differ".into()));
        }
        Self::new(m.n, m.re.iter().zip(&m.im).map(|(&r, &i)| C64::new(r, i)).collect())
    }

    pub fn to_json(&self) -> String {
        self.to_json_value().to_string()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)
            .map_err(|e| Error::Format(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        Self::from_json_value(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Laplace expansion along the first row.
    fn laplace(m: &[C64], k: usize) -> C64 {
        if k == 0 {
            return ONE;
        }
        let mut s = ZERO;
        for j in 0..k {
            let sub: Vec<C64> = (1..k)
                .flat_map(|r| (0..k).filter(move |&cc| cc != j).map(move |cc| (r, cc)))
                .map(|(r, cc)| m[r * k + cc])
                .collect();
            let t = m[j] * laplace(&sub, k - 1);
            s += if j % 2 == 0 { t } else { -t };
        }
        s
    }

    fn sample(n: usize, seed: u64) -> ComplexMatrix {
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        ComplexMatrix::from_fn(n, |_, _| c(next(), next()))
    }

    #[test]
    fn empty_minor_is_one() {
        let a = sample(3, 1);
        assert_eq!(minor(&a, &IndexSet::empty(), &IndexSet::empty()).unwrap(), ONE);
    }

    #[test]
    fn identity_minor() {
        let s = IndexSet::new(vec![0, 1]).unwrap();
        assert_eq!(minor(&ComplexMatrix::identity(3), &s, &s).unwrap(), ONE);
    }

    #[test]
    fn minor_matches_laplace() {
        let a = sample(4, 7);
        let r = IndexSet::new(vec![0, 2]).unwrap();
        let cset = IndexSet::new(vec![1, 3]).unwrap();
        let m = minor(&a, &r, &cset).unwrap();
        let sub = submatrix(&a, r.as_slice(), cset.as_slice());
        assert!((m - laplace(&sub, 2)).norm() < 1e-14);
        for n in 3..=6 {
            let b = sample(n, 11 + n as u64);
            assert!((b.det() - laplace(b.as_slice(), n)).norm() < 1e-12);
        }
    }

    #[test]
    fn cardinality_mismatch() {
        let a = sample(3, 2);
        let e = minor(&a, &IndexSet::range(0, 2), &IndexSet::range(0, 1)).unwrap_err();
        assert_eq!(e, Error::InvalidIndexSets { rows: 2, cols: 1 });
    }

    #[test]
    fn principal_minors_diagonal() {
        let a = ComplexMatrix::from_real_rows(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let (up, low) = principal_minors(&a);
        assert_eq!(up, vec![c(2.0, 0.0), c(6.0, 0.0)]);
        assert_eq!(low, vec![c(6.0, 0.0), c(3.0, 0.0)]);
    }

    #[test]
    fn principal_minors_match_minor() {
        let a = sample(3, 5);
        let (up, low) = principal_minors(&a);
        for j in 1..=3 {
            let s = IndexSet::range(0, j);
            assert!((up[j - 1] - minor(&a, &s, &s).unwrap()).norm() < 1e-15);
            let s = IndexSet::range(j - 1, 3);
            assert!((low[j - 1] - minor(&a, &s, &s).unwrap()).norm() < 1e-15);
        }
    }

    #[test]
    fn inverse_and_cofactor() {
        let a = sample(4, 3);
        let inv = a.inverse().unwrap();
        assert!((&a * &inv).dist(&ComplexMatrix::identity(4)) < 1e-12);
        let cof = a.cofactor();
        let expect = inv.transpose().scale(a.det());
        assert!(cof.dist(&expect) < 1e-12);
    }

    #[test]
    fn minor_gradient_matches_finite_difference() {
        let a = sample(4, 9);
        let r = IndexSet::new(vec![0, 1, 3]).unwrap();
        let cs = IndexSet::new(vec![0, 2, 3]).unwrap();
        let g = minor_gradient(&a, &r, &cs).unwrap();
        let h = 1e-6;
        for j in 0..4 {
            for k in 0..4 {
                let mut p = a.clone();
                p[(j, k)] += h;
                let mut m = a.clone();
                m[(j, k)] -= h;
                let fd = (minor(&p, &r, &cs).unwrap() - minor(&m, &r, &cs).unwrap()) / (2.0 * h);
                assert!((fd - g[(j, k)]).norm() < 1e-8);
            }
        }
        let lg = log_minor_gradient(&a, r.as_slice(), cs.as_slice()).unwrap();
        let m0 = minor(&a, &r, &cs).unwrap();
        assert!(lg.scale(m0).dist(&g) < 1e-12);
    }

    #[test]
    fn expm_of_diagonal() {
        let d = [c(0.3, 1.0), c(-0.5, 0.2), c(0.2, -1.2)];
        let e = ComplexMatrix::from_diag(&d).expm();
        assert!(e.dist(&ComplexMatrix::exp_diag(&d)) < 1e-13);
    }

    #[test]
    fn json_roundtrip() {
        let a = sample(3, 4);
        let back = ComplexMatrix::from_json(&a.to_json()).unwrap();
        assert_eq!(a, back);
        assert!(matches!(ComplexMatrix::from_json("{\"n\": 2, \"re\": [1"), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_non_finite() {
        let mut v = vec![ONE; 4];
        v[3] = c(f64::NAN, 0.0);
        assert_eq!(ComplexMatrix::new(2, v), Err(Error::NonFinite(1, 1)));
    }
}
