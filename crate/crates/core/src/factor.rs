//! Triangular factorizations a = a₊v₊⁻¹ = a₋v₋⁻¹, Gauss decomposition,
//! transposition schedules and the 2×2 block reduction.

use crate::error::{Error, Result, Side};
use crate::matrix::{minor_bound, principal_minors, submatrix, ComplexMatrix, C64, ONE, ZERO};

/// Minors smaller than this multiple of their Hadamard bound count as zero.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Reconstruction tolerance, relative to the matrix norm.
pub const TOL_FACTOR: f64 = 1e-9;

/// The four factors of a point in the big cell plus their diagonals.
///
/// `a_plus` is upper triangular and `v_plus` unit lower triangular with
/// `a·v_plus = a_plus`; `a_minus` is lower triangular and `v_minus` unit
/// upper triangular with `a·v_minus = a_minus`.
#[derive(Clone, Debug)]
pub struct TriangularFactorization {
    pub a_plus: ComplexMatrix,
    pub a_minus: ComplexMatrix,
    pub v_plus: ComplexMatrix,
    pub v_minus: ComplexMatrix,
    pub delta_plus: Vec<C64>,
    pub delta_minus: Vec<C64>,
    pub delta: Vec<C64>,
}

struct Ldu {
    l: ComplexMatrix,
    d: Vec<C64>,
    u: ComplexMatrix,
}

/// Doolittle LDU without pivoting; fails at the first vanishing leading
/// minor (reported 1-based).
fn ldu(a: &ComplexMatrix) -> std::result::Result<Ldu, usize> {
    let n = a.n();
    let mut w = a.clone();
    let mut l = ComplexMatrix::identity(n);
    let mut d = vec![ZERO; n];
    for k in 0..n {
        let piv = w[(k, k)];
        let lead = submatrix(a, &(0..=k).collect::<Vec<_>>(), &(0..=k).collect::<Vec<_>>());
        let m = crate::matrix::det_dense(k + 1, &lead);
        if m.norm() < SINGULAR_TOL * minor_bound(a, k + 1) || piv == ZERO {
            return Err(k + 1);
        }
        d[k] = piv;
        for r in k + 1..n {
            let f = w[(r, k)] / piv;
            l[(r, k)] = f;
            for c in k..n {
                let t = w[(k, c)];
                w[(r, c)] -= f * t;
            }
        }
    }
    let mut u = ComplexMatrix::identity(n);
    for r in 0..n {
        for c in r + 1..n {
            u[(r, c)] = w[(r, c)] / d[r];
        }
    }
    Ok(Ldu { l, d, u })
}

/// Inverse of a unit upper triangular matrix by back substitution.
fn unit_upper_inverse(u: &ComplexMatrix) -> ComplexMatrix {
    let n = u.n();
    let mut x = ComplexMatrix::identity(n);
    for c in 0..n {
        for r in (0..c).rev() {
            let mut s = ZERO;
            for k in r + 1..=c {
                s += u[(r, k)] * x[(k, c)];
            }
            x[(r, c)] = -s;
        }
    }
    x
}

fn unit_lower_inverse(l: &ComplexMatrix) -> ComplexMatrix {
    unit_upper_inverse(&l.transpose()).transpose()
}

fn reverse(n: usize) -> Vec<usize> {
    (0..n).rev().collect()
}

impl TriangularFactorization {
    pub fn residual_plus(&self, a: &ComplexMatrix) -> f64 {
        (a * &self.v_plus).dist(&self.a_plus)
    }

    pub fn residual_minus(&self, a: &ComplexMatrix) -> f64 {
        (a * &self.v_minus).dist(&self.a_minus)
    }
}

/// Both triangular factorizations of a point of GL_*.
///
/// The minus side is the LDU decomposition a = L·D·U, so a₋ = LD and
/// v₋ = U⁻¹. The plus side is the same construction applied to r·a·r.
pub fn factorize(a: &ComplexMatrix) -> Result<TriangularFactorization> {
    let n = a.n();
    let minus = ldu(a).map_err(|order| Error::NotInGLStar { order, side: Side::Upper })?;
    let rev = reverse(n);
    let flipped = a.permute(&rev);
    let plus = ldu(&flipped).map_err(|order| Error::NotInGLStar { order, side: Side::Lower })?;

    let a_minus = &minus.l * &ComplexMatrix::from_diag(&minus.d);
    let v_minus = unit_upper_inverse(&minus.u);
    let a_plus = (&plus.l * &ComplexMatrix::from_diag(&plus.d)).permute(&rev);
    let v_plus = unit_upper_inverse(&plus.u).permute(&rev);

    let delta_plus = a_plus.diag();
    let delta_minus = a_minus.diag();
    let delta = delta_plus.iter().zip(&delta_minus).map(|(p, m)| p / m).collect();
    Ok(TriangularFactorization { a_plus, a_minus, v_plus, v_minus, delta_plus, delta_minus, delta })
}

/// The diagonals predicted by principal minors:
/// (δ₊)_jj = d⁻_j/d⁻_{j+1} and (δ₋)_jj = d⁺_j/d⁺_{j−1}.
pub fn deltas_from_minors(a: &ComplexMatrix) -> (Vec<C64>, Vec<C64>) {
    let n = a.n();
    let (up, low) = principal_minors(a);
    let dlow = |j: usize| if j >= n { ONE } else { low[j] };
    let dup = |j: usize| if j == 0 { ONE } else { up[j - 1] };
    let plus = (0..n).map(|j| low[j] / dlow(j + 1)).collect();
    let minus = (0..n).map(|j| up[j] / dup(j)).collect();
    (plus, minus)
}

/// Gauss decomposition v = b₋⁻¹·δ·b₊ with b₋ unit lower and b₊ unit upper
/// triangular.
#[derive(Clone, Debug)]
pub struct GaussFactors {
    pub b_minus: ComplexMatrix,
    pub delta: Vec<C64>,
    pub b_plus: ComplexMatrix,
}

impl GaussFactors {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let binv = unit_lower_inverse(&self.b_minus);
        &(&binv * &ComplexMatrix::from_diag(&self.delta)) * &self.b_plus
    }
}

pub fn gauss_factorize(v: &ComplexMatrix) -> Result<GaussFactors> {
    let f = ldu(v).map_err(Error::SingularLeadingMinor)?;
    Ok(GaussFactors { b_minus: unit_lower_inverse(&f.l), delta: f.d, b_plus: f.u })
}

/// A word of adjacent transpositions whose product is the antidiagonal
/// permutation. `positions[ν] = k` means the transposition of k and k+1
/// (0-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationSchedule {
    n: usize,
    positions: Vec<usize>,
    /// `partials[ν]` is r_ν as an index map: (r_ν⁻¹ a r_ν)_{jk} = a_{σ(j)σ(k)}.
    partials: Vec<Vec<usize>>,
}

impl PermutationSchedule {
    pub fn new(n: usize, positions: Vec<usize>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSchedule(format!("dimension {n} < 2")));
        }
        let len = n * (n - 1) / 2;
        if positions.len() != len {
            return Err(Error::InvalidSchedule(format!(
                "{} transpositions, expected {len}",
                positions.len()
            )));
        }
        let mut sigma: Vec<usize> = (0..n).collect();
        let mut partials = vec![sigma.clone()];
        for &k in &positions {
            if k + 1 >= n {
                return Err(Error::InvalidSchedule(format!("position {k} out of range")));
            }
            sigma.swap(k, k + 1);
            partials.push(sigma.clone());
        }
        if sigma != reverse(n) {
            return Err(Error::InvalidSchedule("product is not the antidiagonal".into()));
        }
        Ok(Self { n, positions, partials })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    /// Index map of r_ν for ν = 0..=N.
    pub fn partial(&self, nu: usize) -> &[usize] {
        &self.partials[nu]
    }

    /// r_ν as a permutation matrix, r_ν = Σ_j e_{σ(j), j}.
    pub fn partial_matrix(&self, nu: usize) -> ComplexMatrix {
        let s = &self.partials[nu];
        ComplexMatrix::from_fn(self.n, |r, c| if s[c] == r { ONE } else { ZERO })
    }

    /// The pair of original indices exchanged at step ν (0-based ν).
    pub fn pair(&self, nu: usize) -> (usize, usize) {
        let k = self.positions[nu];
        let s = &self.partials[nu];
        (s[k], s[k + 1])
    }

    /// r_{ν}⁻¹ a r_{ν} as a matrix, by index remapping.
    pub fn conjugate(&self, a: &ComplexMatrix, nu: usize) -> ComplexMatrix {
        a.permute(&self.partials[nu])
    }
}

/// Canonical word: move 1 to the far right, then 2, and so on
/// (positions 1..n−1, 1..n−2, …, 1 in 1-based labels).
pub fn default_schedule(n: usize) -> Result<PermutationSchedule> {
    let positions = (1..n).rev().flat_map(|m| 0..m).collect();
    PermutationSchedule::new(n, positions)
}

/// Nontrivial 2×2 block of step ν (0-based): the Schur complement of the
/// leading J×J block inside rows/cols J ∪ {k, k+1} of b = r_ν⁻¹ a r_ν with
/// r = r_{ν} before the ν-th transposition, written as minor ratios
/// m(J+i; J+j)/m(J; J).
pub fn block_reduce(a: &ComplexMatrix, schedule: &PermutationSchedule, nu: usize) -> Result<[[C64; 2]; 2]> {
    let b = schedule.conjugate(a, nu);
    let k = schedule.positions()[nu];
    let j: Vec<usize> = (0..k).collect();
    let mj = crate::matrix::minor_raw(&b, &j, &j);
    if mj.norm() < SINGULAR_TOL * minor_bound(&b, k) {
        return Err(Error::SingularLeadingMinor(k));
    }
    let entry = |r: usize, c: usize| {
        let mut rows = j.clone();
        rows.push(r);
        let mut cols = j.clone();
        cols.push(c);
        crate::matrix::minor_raw(&b, &rows, &cols) / mj
    };
    Ok([[entry(k, k), entry(k, k + 1)], [entry(k + 1, k), entry(k + 1, k + 1)]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Sampler;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn identity_factors() {
        let f = factorize(&ComplexMatrix::identity(3)).unwrap();
        let id = ComplexMatrix::identity(3);
        for m in [&f.a_plus, &f.a_minus, &f.v_plus, &f.v_minus] {
            assert!(m.dist(&id) < 1e-15);
        }
        assert!(f.delta.iter().all(|d| (d - ONE).norm() < 1e-15));
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = ComplexMatrix::new(2, vec![c(2.0), C64::new(0.5, 1.0), C64::new(-0.3, 0.2), c(1.5)]).unwrap();
        let f = factorize(&a).unwrap();
        let (a11, a12, a21, a22) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
        let det = a.det();
        let vp = ComplexMatrix::new(2, vec![ONE, ZERO, -a21 / a22, ONE]).unwrap();
        let ap = ComplexMatrix::new(2, vec![det / a22, a12, ZERO, a22]).unwrap();
        let vm = ComplexMatrix::new(2, vec![ONE, -a12 / a11, ZERO, ONE]).unwrap();
        let am = ComplexMatrix::new(2, vec![a11, ZERO, a21, det / a11]).unwrap();
        assert!(f.v_plus.dist(&vp) < 1e-14);
        assert!(f.a_plus.dist(&ap) < 1e-14);
        assert!(f.v_minus.dist(&vm) < 1e-14);
        assert!(f.a_minus.dist(&am) < 1e-14);
    }

    #[test]
    fn degenerate_two_by_two() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(
            factorize(&a).unwrap_err(),
            Error::NotInGLStar { order: 1, side: Side::Lower }
        );
    }

    #[test]
    fn invariants_on_samples() {
        let mut s = Sampler::new(3, "factor-unit", 0);
        for n in 2..=6 {
            for _ in 0..20 {
                let a = s.gl_star(n);
                let f = factorize(&a).unwrap();
                let tol = TOL_FACTOR * a.norm_fro();
                assert!(f.residual_plus(&a) <= tol);
                assert!(f.residual_minus(&a) <= tol);
                for j in 0..n {
                    assert_eq!(f.v_plus[(j, j)], ONE);
                    assert_eq!(f.v_minus[(j, j)], ONE);
                    for k in 0..n {
                        if j > k {
                            assert_eq!(f.a_plus[(j, k)], ZERO);
                            assert_eq!(f.v_minus[(j, k)], ZERO);
                        }
                        if j < k {
                            assert_eq!(f.a_minus[(j, k)], ZERO);
                            assert_eq!(f.v_plus[(j, k)], ZERO);
                        }
                    }
                }
                let (dp, dm) = deltas_from_minors(&a);
                for j in 0..n {
                    assert!((dp[j] - f.delta_plus[j]).norm() < 1e-10 * dp[j].norm().max(1.0));
                    assert!((dm[j] - f.delta_minus[j]).norm() < 1e-10 * dm[j].norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn gauss_identity_and_errors() {
        let g = gauss_factorize(&ComplexMatrix::identity(3)).unwrap();
        assert!(g.b_minus.dist(&ComplexMatrix::identity(3)) < 1e-15);
        assert!(g.b_plus.dist(&ComplexMatrix::identity(3)) < 1e-15);
        let v = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(gauss_factorize(&v).unwrap_err(), Error::SingularLeadingMinor(1));
    }

    #[test]
    fn gauss_two_by_two_oracle() {
        // v = b₋⁻¹ δ b₊ with b₋ = [[1,0],[x,1]], b₊ = [[1,y],[0,1]]:
        // v11 = d1, v12 = d1 y, v21 = −x d1, v22 = −x d1 y + d2.
        let v = ComplexMatrix::new(2, vec![C64::new(1.2, 0.3), C64::new(-0.4, 0.8), C64::new(0.6, -0.1), C64::new(0.9, 0.5)]).unwrap();
        let g = gauss_factorize(&v).unwrap();
        let d1 = v[(0, 0)];
        let y = v[(0, 1)] / d1;
        let x = -v[(1, 0)] / d1;
        let d2 = v[(1, 1)] + x * d1 * y;
        assert!((g.delta[0] - d1).norm() < 1e-14 && (g.delta[1] - d2).norm() < 1e-14);
        assert!((g.b_minus[(1, 0)] - x).norm() < 1e-14);
        assert!((g.b_plus[(0, 1)] - y).norm() < 1e-14);
        assert!(g.reconstruct().dist(&v) < 1e-14);
    }

    #[test]
    fn schedules() {
        let s2 = default_schedule(2).unwrap();
        assert_eq!(s2.positions(), &[0]);
        let s3 = default_schedule(3).unwrap();
        assert_eq!(s3.positions(), &[0, 1, 0]);
        assert_eq!(s3.partial(1), &[1, 0, 2]);
        assert_eq!(s3.partial(2), &[1, 2, 0]);
        assert_eq!(s3.partial(3), &[2, 1, 0]);
        for n in 2..=8 {
            let s = default_schedule(n).unwrap();
            assert_eq!(s.len(), n * (n - 1) / 2);
            assert_eq!(s.partial_matrix(s.len()), ComplexMatrix::antidiagonal(n));
            // r_ν = π_1 ⋯ π_ν as matrices.
            let mut prod = ComplexMatrix::identity(n);
            for (nu, &k) in s.positions().iter().enumerate() {
                let mut p: Vec<usize> = (0..n).collect();
                p.swap(k, k + 1);
                prod = &prod * &ComplexMatrix::from_fn(n, |r, c| if p[c] == r { ONE } else { ZERO });
                assert_eq!(prod, s.partial_matrix(nu + 1));
            }
        }
        assert!(PermutationSchedule::new(3, vec![0, 0, 1]).is_err());
    }

    #[test]
    fn conjugation_matches_matrix_product() {
        let mut smp = Sampler::new(4, "factor-unit", 1);
        let a = smp.gl_star(4);
        let s = default_schedule(4).unwrap();
        for nu in 0..=s.len() {
            let r = s.partial_matrix(nu);
            let direct = &(&r.transpose() * &a) * &r;
            assert!(direct.dist(&s.conjugate(&a, nu)) < 1e-15);
        }
    }

    #[test]
    fn block_reduce_basic() {
        let s = default_schedule(3).unwrap();
        let blk = block_reduce(&ComplexMatrix::identity(3), &s, 1).unwrap();
        assert_eq!(blk, [[ONE, ZERO], [ZERO, ONE]]);
        let mut smp = Sampler::new(5, "factor-unit", 2);
        let a = smp.gl_star(2);
        let blk = block_reduce(&a, &default_schedule(2).unwrap(), 0).unwrap();
        assert_eq!(blk, [[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]]);
    }
}
