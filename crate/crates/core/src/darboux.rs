//! The 2-form Ω on the big cell, its minor-ratio Darboux coordinates and
//! the two anti-symplectic involutions.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{factorize, PermutationSchedule, TriangularFactorization, SINGULAR_TOL};
use crate::matrix::{log_minor_gradient, minor_bound, minor_raw, ComplexMatrix, IndexSet, C64, ZERO};
use crate::poisson::casimir_values;
use crate::sample::Sampler;

/// A direction `direction` at the point `base`.
#[derive(Clone, Debug)]
pub struct TangentVector {
    pub base: ComplexMatrix,
    pub direction: ComplexMatrix,
}

impl TangentVector {
    pub fn new(base: ComplexMatrix, direction: ComplexMatrix) -> Result<Self> {
        if base.n() != direction.n() {
            return Err(Error::InvalidInput("tangent direction has the wrong dimension".into()));
        }
        Ok(Self { base, direction })
    }
}

/// Differentials of the four factors along one direction, as
/// (a₊⁻¹da₊, v₊⁻¹dv₊, a₋⁻¹da₋, v₋⁻¹dv₋).
struct FactorDifferentials {
    ap: ComplexMatrix,
    vp: ComplexMatrix,
    am: ComplexMatrix,
    vm: ComplexMatrix,
}

fn differentials(f: &TriangularFactorization, x: &ComplexMatrix) -> Result<FactorDifferentials> {
    let mp = &f.a_plus.solve(x)? * &f.v_plus;
    let mm = &f.a_minus.solve(x)? * &f.v_minus;
    let ap = mp.upper();
    let vp = &ap - &mp;
    let am = mm.lower();
    let vm = &am - &mm;
    Ok(FactorDifferentials { ap, vp, am, vm })
}

fn wedge(x1: &ComplexMatrix, y1: &ComplexMatrix, x2: &ComplexMatrix, y2: &ComplexMatrix) -> C64 {
    (x1 * y2).trace() - (x2 * y1).trace()
}

fn same_base(t1: &TangentVector, t2: &TangentVector) -> Result<()> {
    if t1.base != t2.base {
        return Err(Error::InvalidInput("tangent vectors have different base points".into()));
    }
    Ok(())
}

/// Ω_a(x1, x2) for Ω = tr[v₊⁻¹dv₊ ∧ a₊⁻¹da₊ − v₋⁻¹dv₋ ∧ a₋⁻¹da₋].
pub fn omega_at(a: &ComplexMatrix, x1: &ComplexMatrix, x2: &ComplexMatrix) -> Result<C64> {
    let f = factorize(a)?;
    omega_with(&f, x1, x2)
}

pub(crate) fn omega_with(f: &TriangularFactorization, x1: &ComplexMatrix, x2: &ComplexMatrix) -> Result<C64> {
    let d1 = differentials(f, x1)?;
    let d2 = differentials(f, x2)?;
    Ok(wedge(&d1.vp, &d1.ap, &d2.vp, &d2.ap) - wedge(&d1.vm, &d1.am, &d2.vm, &d2.am))
}

pub fn omega_eval(t1: &TangentVector, t2: &TangentVector) -> Result<C64> {
    same_base(t1, t2)?;
    omega_at(&t1.base, &t1.direction, &t2.direction)
}

/// Ω via tr[v₋(dv)v₊⁻¹ ∧ a⁻¹da] with v = v₋⁻¹v₊.
pub fn omega_alt_at(a: &ComplexMatrix, x1: &ComplexMatrix, x2: &ComplexMatrix) -> Result<C64> {
    let f = factorize(a)?;
    let vp_inv = f.v_plus.inverse()?;
    let vm_inv = f.v_minus.inverse()?;
    let pieces = |x: &ComplexMatrix| -> Result<(ComplexMatrix, ComplexMatrix)> {
        let d = differentials(&f, x)?;
        let dvp = &f.v_plus * &d.vp;
        let dvm = &f.v_minus * &d.vm;
        let left = &(&dvp * &vp_inv) - &(&dvm * &vm_inv);
        Ok((left, a.solve(x)?))
    };
    let (l1, r1) = pieces(x1)?;
    let (l2, r2) = pieces(x2)?;
    Ok(wedge(&l1, &r1, &l2, &r2))
}

pub fn omega_eval_alt(t1: &TangentVector, t2: &TangentVector) -> Result<C64> {
    same_base(t1, t2)?;
    omega_alt_at(&t1.base, &t1.direction, &t2.direction)
}

/// Values of the canonical coordinates at one point.
#[derive(Clone, Debug)]
pub struct DarbouxChart {
    pub p: Vec<C64>,
    pub q: Vec<C64>,
    pub schedule: PermutationSchedule,
    pub casimirs: Vec<C64>,
}

/// Row/column sets of the minors entering block ν, all in the coordinates
/// of b = r_ν⁻¹ a r_ν.
struct BlockMinors {
    j: Vec<usize>,
    k0: usize,
    k1: usize,
}

impl BlockMinors {
    fn new(schedule: &PermutationSchedule, nu: usize) -> Self {
        let k = schedule.positions()[nu];
        Self { j: (0..k).collect(), k0: k, k1: k + 1 }
    }

    fn with(&self, extra: &[usize]) -> Vec<usize> {
        let mut v = self.j.clone();
        v.extend_from_slice(extra);
        v
    }

    /// (rows, cols, exponent) for p_ν and q_ν as products of minors.
    fn p_terms(&self) -> [(Vec<usize>, Vec<usize>, f64); 4] {
        let a = self.with(&[self.k0]);
        let b = self.with(&[self.k1]);
        let ab = self.with(&[self.k0, self.k1]);
        [
            (a.clone(), a, 1.0),
            (b.clone(), b, 1.0),
            (self.j.clone(), self.j.clone(), -1.0),
            (ab.clone(), ab, -1.0),
        ]
    }

    fn q_terms(&self) -> [(Vec<usize>, Vec<usize>, f64); 2] {
        [(self.with(&[self.k1]), self.with(&[self.k0]), 1.0), (self.with(&[self.k0]), self.with(&[self.k1]), -1.0)]
    }
}

fn ratio(b: &ComplexMatrix, terms: &[(Vec<usize>, Vec<usize>, f64)], nu: usize) -> Result<C64> {
    let mut num = C64::new(1.0, 0.0);
    let mut den = C64::new(1.0, 0.0);
    for (r, c, e) in terms {
        let m = minor_raw(b, r, c);
        if m.norm() < SINGULAR_TOL * minor_bound(b, r.len()) {
            return Err(Error::DegeneratePoint(nu));
        }
        if *e > 0.0 {
            num *= m;
        } else {
            den *= m;
        }
    }
    Ok(num / den)
}

fn ratio_gradient(
    b: &ComplexMatrix,
    sigma: &[usize],
    terms: &[(Vec<usize>, Vec<usize>, f64)],
    nu: usize,
) -> Result<ComplexMatrix> {
    let n = b.n();
    let mut gb = ComplexMatrix::zeros(n);
    for (r, c, e) in terms {
        let g = log_minor_gradient(b, r, c).ok_or(Error::DegeneratePoint(nu))?;
        gb = &gb + &g.scale(C64::new(*e, 0.0));
    }
    // b_{jk} = a_{σ(j)σ(k)}
    let mut ga = ComplexMatrix::zeros(n);
    for j in 0..n {
        for k in 0..n {
            ga[(sigma[j], sigma[k])] = gb[(j, k)];
        }
    }
    Ok(ga)
}

/// p_ν = log[m(J+k)m(J+k+1)/(m(J)m(J+k+k+1))] and q_ν = log[m(J+k+1; J+k)/m(J+k; J+k+1)]
/// for the minors of r_ν⁻¹ a r_ν, principal branch.
pub fn darboux_coordinates(a: &ComplexMatrix, schedule: &PermutationSchedule) -> Result<DarbouxChart> {
    if schedule.n() != a.n() {
        return Err(Error::InvalidInput("schedule dimension differs from the matrix".into()));
    }
    let mut p = Vec::with_capacity(schedule.len());
    let mut q = Vec::with_capacity(schedule.len());
    for nu in 0..schedule.len() {
        let b = schedule.conjugate(a, nu);
        let bm = BlockMinors::new(schedule, nu);
        p.push(ratio(&b, &bm.p_terms(), nu)?.ln());
        q.push(ratio(&b, &bm.q_terms(), nu)?.ln());
    }
    let casimirs = casimir_values(a)?;
    Ok(DarbouxChart { p, q, schedule: schedule.clone(), casimirs })
}

/// Holomorphic gradients (∂p_ν/∂a_jk, ∂q_ν/∂a_jk) of every chart function.
pub fn chart_gradients(
    a: &ComplexMatrix,
    schedule: &PermutationSchedule,
) -> Result<(Vec<ComplexMatrix>, Vec<ComplexMatrix>)> {
    let mut gp = Vec::with_capacity(schedule.len());
    let mut gq = Vec::with_capacity(schedule.len());
    for nu in 0..schedule.len() {
        let b = schedule.conjugate(a, nu);
        let sigma = schedule.partial(nu);
        let bm = BlockMinors::new(schedule, nu);
        ratio(&b, &bm.p_terms(), nu)?;
        ratio(&b, &bm.q_terms(), nu)?;
        gp.push(ratio_gradient(&b, sigma, &bm.p_terms(), nu)?);
        gq.push(ratio_gradient(&b, sigma, &bm.q_terms(), nu)?);
    }
    Ok((gp, gq))
}

/// The momenta p_ν alone; they need only principal-type minors, so they
/// exist at points (such as diagonal ones) where the q_ν do not.
pub fn momenta(a: &ComplexMatrix, schedule: &PermutationSchedule) -> Result<Vec<C64>> {
    Ok(DarbouxChart::p_ratios(a, schedule)?.into_iter().map(|r| r.ln()).collect())
}

/// Gradients of the momenta p_ν.
pub fn momentum_gradients(a: &ComplexMatrix, schedule: &PermutationSchedule) -> Result<Vec<ComplexMatrix>> {
    (0..schedule.len())
        .map(|nu| {
            let b = schedule.conjugate(a, nu);
            let bm = BlockMinors::new(schedule, nu);
            ratio(&b, &bm.p_terms(), nu)?;
            ratio_gradient(&b, schedule.partial(nu), &bm.p_terms(), nu)
        })
        .collect()
}

/// Directional derivative Σ g_jk x_jk of a holomorphic function.
pub fn directional(g: &ComplexMatrix, x: &ComplexMatrix) -> C64 {
    g.as_slice().iter().zip(x.as_slice()).map(|(a, b)| a * b).sum()
}

/// Σ_ν dp_ν ∧ dq_ν evaluated on (x1, x2).
pub fn chart_form(a: &ComplexMatrix, schedule: &PermutationSchedule, x1: &ComplexMatrix, x2: &ComplexMatrix) -> Result<C64> {
    let (gp, gq) = chart_gradients(a, schedule)?;
    Ok(gp
        .iter()
        .zip(&gq)
        .map(|(p, q)| directional(p, x1) * directional(q, x2) - directional(p, x2) * directional(q, x1))
        .sum())
}

/// Largest relative discrepancy |Ω − Σ dp∧dq| / max(1, |Ω|) over random
/// tangent pairs at `a`.
pub fn verify_decomposition(
    a: &ComplexMatrix,
    schedule: &PermutationSchedule,
    trials: usize,
    sampler: &mut Sampler,
) -> Result<f64> {
    let f = factorize(a)?;
    let (gp, gq) = chart_gradients(a, schedule)?;
    let n = a.n();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x1 = sampler.tangent(n);
        let x2 = sampler.tangent(n);
        let om = omega_with(&f, &x1, &x2)?;
        let chart: C64 = gp
            .iter()
            .zip(&gq)
            .map(|(p, q)| directional(p, &x1) * directional(q, &x2) - directional(p, &x2) * directional(q, &x1))
            .sum();
        worst = worst.max((om - chart).norm() / om.norm().max(1.0));
    }
    Ok(worst)
}

/// The involutions Φ₁(a) = (a⁻¹)ᵗ and Φ₂(a) = r·a·r.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    TransposeInverse,
    AntidiagonalConjugation,
}

impl Symmetry {
    pub fn apply(self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        match self {
            Symmetry::TransposeInverse => Ok(a.inverse()?.transpose()),
            Symmetry::AntidiagonalConjugation => Ok(a.permute(&(0..a.n()).rev().collect::<Vec<_>>())),
        }
    }

    /// Pushforward of the direction x at a.
    pub fn push(self, a: &ComplexMatrix, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        match self {
            Symmetry::TransposeInverse => {
                let inv = a.inverse()?;
                Ok((&(&inv * x) * &inv).transpose().scale(C64::new(-1.0, 0.0)))
            }
            Symmetry::AntidiagonalConjugation => Ok(x.permute(&(0..a.n()).rev().collect::<Vec<_>>())),
        }
    }
}

/// (Φ*Ω)_a(t1, t2) = Ω_{Φ(a)}(dΦ t1, dΦ t2).
pub fn symmetry_pullback(which: Symmetry, t1: &TangentVector, t2: &TangentVector) -> Result<C64> {
    same_base(t1, t2)?;
    let a = &t1.base;
    let b = which.apply(a)?;
    omega_at(&b, &which.push(a, &t1.direction)?, &which.push(a, &t2.direction)?)
}

/// Shifts `value` by a multiple of 2πi to be nearest to `previous`.
pub fn unwrap_log(previous: C64, value: C64) -> C64 {
    let k = ((previous.im - value.im) / TAU).round();
    value + C64::new(0.0, k * TAU)
}

#[derive(Serialize, Deserialize)]
struct ChartJson {
    n: usize,
    positions: Vec<usize>,
    p_re: Vec<f64>,
    p_im: Vec<f64>,
    q_re: Vec<f64>,
    q_im: Vec<f64>,
    casimirs_re: Vec<f64>,
    casimirs_im: Vec<f64>,
}

impl DarbouxChart {
    pub fn to_json_value(&self) -> serde_json::Value {
        let re = |v: &[C64]| v.iter().map(|z| z.re).collect();
        let im = |v: &[C64]| v.iter().map(|z| z.im).collect();
        serde_json::to_value(ChartJson {
            n: self.schedule.n(),
            positions: self.schedule.positions().iter().map(|k| k + 1).collect(),
            p_re: re(&self.p),
            p_im: im(&self.p),
            q_re: re(&self.q),
            q_im: im(&self.q),
            casimirs_re: re(&self.casimirs),
            casimirs_im: im(&self.casimirs),
        })
        .expect("chart serializes")
    }

    /// Reads a chart; positions are stored 1-based.
    pub fn from_json_value(v: &serde_json::Value) -> Result<Self> {
        let c: ChartJson = serde_json::from_value(v.clone()).map_err(|e| Error::Format(e.to_string()))?;
        if c.positions.iter().any(|&k| k == 0) {
            return Err(Error::Format("positions are 1-based".into()));
        }
        let schedule = PermutationSchedule::new(c.n, c.positions.iter().map(|k| k - 1).collect())?;
        let zip = |re: &[f64], im: &[f64]| re.iter().zip(im).map(|(&r, &i)| C64::new(r, i)).collect();
        Ok(Self {
            p: zip(&c.p_re, &c.p_im),
            q: zip(&c.q_re, &c.q_im),
            schedule,
            casimirs: zip(&c.casimirs_re, &c.casimirs_im),
        })
    }

    /// exp(p_ν) recomputed from the block minors, for round-trip checks.
    pub fn p_ratios(a: &ComplexMatrix, schedule: &PermutationSchedule) -> Result<Vec<C64>> {
        (0..schedule.len())
            .map(|nu| ratio(&schedule.conjugate(a, nu), &BlockMinors::new(schedule, nu).p_terms(), nu))
            .collect()
    }
}

/// The n = 3 chart written with cofactors A = (det a)(a⁻¹)ᵗ and Δ = det a:
/// p = (log(a₁₁a₂₂/A₃₃), log(A₁₁A₃₃/(Δa₂₂)), log(a₂₂a₃₃/A₁₁)),
/// q = (log(a₂₁/a₁₂), log(A₁₃/A₃₁), log(a₃₂/a₂₃)).
pub fn cofactor_chart3(a: &ComplexMatrix) -> Result<([C64; 3], [C64; 3])> {
    if a.n() != 3 {
        return Err(Error::InvalidInput("cofactor chart needs n = 3".into()));
    }
    let c = a.cofactor();
    let d = a.det();
    let p = [
        (a[(0, 0)] * a[(1, 1)] / c[(2, 2)]).ln(),
        (c[(0, 0)] * c[(2, 2)] / (d * a[(1, 1)])).ln(),
        (a[(1, 1)] * a[(2, 2)] / c[(0, 0)]).ln(),
    ];
    let q = [(a[(1, 0)] / a[(0, 1)]).ln(), (c[(0, 2)] / c[(2, 0)]).ln(), (a[(2, 1)] / a[(1, 2)]).ln()];
    if p.iter().chain(&q).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::DegeneratePoint(0));
    }
    Ok((p, q))
}

/// Gradients of the six functions of `cofactor_chart3`.
pub fn cofactor_chart3_gradients(a: &ComplexMatrix) -> Result<([ComplexMatrix; 3], [ComplexMatrix; 3])> {
    if a.n() != 3 {
        return Err(Error::InvalidInput("cofactor chart needs n = 3".into()));
    }
    let entry = |j: usize, k: usize| ComplexMatrix::unit(3, j, k).scale(1.0 / a[(j, k)]);
    let cof = |j: usize, k: usize| -> Result<ComplexMatrix> {
        let rows = IndexSet::new((0..3).filter(|&r| r != j).collect())?;
        let cols = IndexSet::new((0..3).filter(|&c| c != k).collect())?;
        let m = crate::matrix::minor(a, &rows, &cols)?;
        Ok(crate::matrix::minor_gradient(a, &rows, &cols)?.scale(1.0 / m))
    };
    let det = a.inverse()?.transpose();
    let p = [
        &(&entry(0, 0) + &entry(1, 1)) - &cof(2, 2)?,
        &(&(&cof(0, 0)? + &cof(2, 2)?) - &det) - &entry(1, 1),
        &(&entry(1, 1) + &entry(2, 2)) - &cof(0, 0)?,
    ];
    let q = [&entry(1, 0) - &entry(0, 1), &cof(0, 2)? - &cof(2, 0)?, &entry(2, 1) - &entry(1, 2)];
    Ok((p, q))
}

/// Rank of the Gram matrix of Ω on the off-diagonal matrix units at a.
pub fn omega_rank_offdiagonal(a: &ComplexMatrix, tol: f64) -> Result<usize> {
    let n = a.n();
    let units: Vec<ComplexMatrix> = (0..n)
        .flat_map(|j| (0..n).filter(move |&k| k != j).map(move |k| (j, k)))
        .map(|(j, k)| ComplexMatrix::unit(n, j, k))
        .collect();
    let f = factorize(a)?;
    let m = units.len();
    let mut g = vec![ZERO; m * m];
    for r in 0..m {
        for c in 0..m {
            g[r * m + c] = omega_with(&f, &units[r], &units[c])?;
        }
    }
    Ok(rank(m, &mut g, tol))
}

fn rank(m: usize, g: &mut [C64], tol: f64) -> usize {
    let mut rank = 0;
    let mut row = 0;
    for col in 0..m {
        if row >= m {
            break;
        }
        let (p, best) = (row..m).map(|r| (r, g[r * m + col].norm())).fold((row, 0.0), |a, x| if x.1 > a.1 { x } else { a });
        if best <= tol {
            continue;
        }
        for k in 0..m {
            g.swap(p * m + k, row * m + k);
        }
        for r in row + 1..m {
            let f = g[r * m + col] / g[row * m + col];
            for k in col..m {
                let t = g[row * m + k];
                g[r * m + k] -= f * t;
            }
        }
        row += 1;
        rank += 1;
    }
    rank
}
