//! The quadratic Poisson bracket
//! (a_jk, a_lm) = ¼[sgn(l−j) − sgn(m−k)]·a_jm·a_lk on n×n matrices, its
//! Casimirs, Hamiltonian flows and the bilinear bracket used on
//! scattering data.

use std::f64::consts::PI;

use crate::darboux::{chart_gradients, DarbouxChart};
use crate::error::{Error, Result};
use crate::factor::{factorize, PermutationSchedule, SINGULAR_TOL};
use crate::matrix::{log_minor_gradient, minor_bound, minor_gradient, minor_raw, principal_minors, ComplexMatrix, IndexSet, C64, I, ZERO};
use crate::ode::{Dopri5, OdeOptions};

/// sgn with sgn(0) = 0.
pub fn sgn(x: isize) -> f64 {
    match x.cmp(&0) {
        std::cmp::Ordering::Less => -1.0,
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Greater => 1.0,
    }
}

/// ¼[sgn(l−j) − sgn(m−k)].
#[inline]
fn coeff(j: usize, k: usize, l: usize, m: usize) -> f64 {
    0.25 * (sgn(l as isize - j as isize) - sgn(m as isize - k as isize))
}

/// A holomorphic function of the matrix entries with its gradient
/// ∂f/∂a_jk.
pub trait SmoothFunction: Sync {
    fn value(&self, a: &ComplexMatrix) -> Result<C64>;

    fn gradient(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        fd_gradient(&|m: &ComplexMatrix| self.value(m), a)
    }
}

/// Five-point central differences with step 1e-5·max(1, max|a_jk|).
pub fn fd_gradient(f: &dyn Fn(&ComplexMatrix) -> Result<C64>, a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.n();
    let h = 1e-5 * a.max_abs().max(1.0);
    let mut g = ComplexMatrix::zeros(n);
    for j in 0..n {
        for k in 0..n {
            let at = |s: f64| {
                let mut b = a.clone();
                b[(j, k)] += s * h;
                f(&b)
            };
            g[(j, k)] = (at(-2.0)? - at(2.0)? + 8.0 * (at(1.0)? - at(-1.0)?)) / (12.0 * h);
        }
    }
    Ok(g)
}

/// The coordinate function a ↦ a_jk.
pub struct Coordinate(pub usize, pub usize);

impl SmoothFunction for Coordinate {
    fn value(&self, a: &ComplexMatrix) -> Result<C64> {
        Ok(a[(self.0, self.1)])
    }
    fn gradient(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        Ok(ComplexMatrix::unit(a.n(), self.0, self.1))
    }
}

/// a ↦ m(rows; cols; a).
pub struct MinorFunction {
    pub rows: IndexSet,
    pub cols: IndexSet,
}

impl SmoothFunction for MinorFunction {
    fn value(&self, a: &ComplexMatrix) -> Result<C64> {
        crate::matrix::minor(a, &self.rows, &self.cols)
    }
    fn gradient(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        minor_gradient(a, &self.rows, &self.cols)
    }
}

/// Casimir φ_j = d⁺_j/d⁻_{j+1} (0-based j, d⁻_{n+1} = 1).
pub struct Casimir(pub usize);

impl SmoothFunction for Casimir {
    fn value(&self, a: &ComplexMatrix) -> Result<C64> {
        Ok(casimir_values(a)?[self.0])
    }
    fn gradient(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = a.n();
        let j = self.0;
        let up: Vec<usize> = (0..=j).collect();
        let low: Vec<usize> = (j + 1..n).collect();
        let g1 = log_minor_gradient(a, &up, &up).ok_or(Error::SingularLeadingMinor(j + 1))?;
        let g2 = log_minor_gradient(a, &low, &low).ok_or(Error::SingularLeadingMinor(j + 2))?;
        Ok((&g1 - &g2).scale(self.value(a)?))
    }
}

/// Chart function p_ν or q_ν of a schedule.
pub struct ChartFunction<'a> {
    pub schedule: &'a PermutationSchedule,
    pub nu: usize,
    pub momentum: bool,
}

impl SmoothFunction for ChartFunction<'_> {
    fn value(&self, a: &ComplexMatrix) -> Result<C64> {
        let ch = crate::darboux::darboux_coordinates(a, self.schedule)?;
        Ok(if self.momentum { ch.p[self.nu] } else { ch.q[self.nu] })
    }
    fn gradient(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        let (gp, gq) = chart_gradients(a, self.schedule)?;
        Ok(if self.momentum { gp[self.nu].clone() } else { gq[self.nu].clone() })
    }
}

/// Any closure, with finite-difference gradient.
pub struct FnFunction<F>(pub F);

impl<F: Fn(&ComplexMatrix) -> Result<C64> + Sync> SmoothFunction for FnFunction<F> {
    fn value(&self, a: &ComplexMatrix) -> Result<C64> {
        (self.0)(a)
    }
}

/// Pointwise product f·g.
pub struct Product<'a>(pub &'a dyn SmoothFunction, pub &'a dyn SmoothFunction);

impl SmoothFunction for Product<'_> {
    fn value(&self, a: &ComplexMatrix) -> Result<C64> {
        Ok(self.0.value(a)? * self.1.value(a)?)
    }
    fn gradient(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        let (f, g) = (self.0.value(a)?, self.1.value(a)?);
        Ok(&self.1.gradient(a)?.scale(f) + &self.0.gradient(a)?.scale(g))
    }
}

/// The function a ↦ (f, g)(a), differentiated numerically.
pub struct BracketFunction<'a>(pub &'a dyn SmoothFunction, pub &'a dyn SmoothFunction);

impl SmoothFunction for BracketFunction<'_> {
    fn value(&self, a: &ComplexMatrix) -> Result<C64> {
        bracket(self.0, self.1, a)
    }
}

/// Σ ∂f/∂a_jk · ∂g/∂a_lm · ¼[sgn(l−j) − sgn(m−k)]·a_jm·a_lk.
pub fn bracket_from_gradients(gf: &ComplexMatrix, gg: &ComplexMatrix, a: &ComplexMatrix) -> C64 {
    let n = a.n();
    let mut s = ZERO;
    for j in 0..n {
        for k in 0..n {
            let fjk = gf[(j, k)];
            if fjk == ZERO {
                continue;
            }
            for l in 0..n {
                for m in 0..n {
                    let c = coeff(j, k, l, m);
                    if c != 0.0 {
                        s += fjk * gg[(l, m)] * a[(j, m)] * a[(l, k)] * c;
                    }
                }
            }
        }
    }
    s
}

pub fn bracket(f: &dyn SmoothFunction, g: &dyn SmoothFunction, a: &ComplexMatrix) -> Result<C64> {
    Ok(bracket_from_gradients(&f.gradient(a)?, &g.gradient(a)?, a))
}

/// Hamiltonian vector field ȧ_jk = (H, a_jk) from the gradient of H.
pub fn hamiltonian_vector_field(gh: &ComplexMatrix, a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.n();
    ComplexMatrix::from_fn(n, |j, k| {
        let mut s = ZERO;
        for l in 0..n {
            for m in 0..n {
                let c = coeff(l, m, j, k);
                if c != 0.0 {
                    s += gh[(l, m)] * a[(l, k)] * a[(j, m)] * c;
                }
            }
        }
        s
    })
}

/// φ_j = d⁺_j/d⁻_{j+1}, j = 1..n, with φ_n = det a.
pub fn casimir_values(a: &ComplexMatrix) -> Result<Vec<C64>> {
    let n = a.n();
    let (up, low) = principal_minors(a);
    (0..n)
        .map(|j| {
            if j + 1 == n {
                return Ok(up[j]);
            }
            let d = low[j + 1];
            if d.norm() < SINGULAR_TOL * minor_bound(a, n - j - 1) {
                return Err(Error::SingularLeadingMinor(j + 2));
            }
            Ok(up[j] / d)
        })
        .collect()
}

/// Diagonal trace-free generator μ.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalGenerator {
    mu: Vec<C64>,
}

impl DiagonalGenerator {
    pub fn new(mu: Vec<C64>) -> Result<Self> {
        let tr: C64 = mu.iter().sum();
        let scale = mu.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if tr.norm() > 1e-14 * scale {
            return Err(Error::TraceNotZero(tr.norm()));
        }
        Ok(Self { mu })
    }

    pub fn entries(&self) -> &[C64] {
        &self.mu
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// μ + μ* = 0.
    pub fn is_skew(&self) -> bool {
        self.mu.iter().all(|m| m.re.abs() < 1e-14)
    }
}

/// exp(tμ)·a0·exp(−tμ), entrywise.
pub fn linear_flow(a0: &ComplexMatrix, mu: &DiagonalGenerator, t: f64) -> ComplexMatrix {
    let m = mu.entries();
    ComplexMatrix::from_fn(a0.n(), |j, k| a0[(j, k)] * ((m[j] - m[k]) * t).exp())
}

/// tr(μ log δ) computed two ways, and its expansion Σ c_ν p_ν.
#[derive(Clone, Debug)]
pub struct FlowHamiltonianValue {
    /// Σ μ_j log δ_jj with δ from the factorization.
    pub via_delta: C64,
    /// Σ μ_j log[d⁻_j d⁺_{j−1} / (d⁻_{j+1} d⁺_j)].
    pub via_minors: C64,
    /// c_ν = μ_{k} − μ_{j} for the pair (j, k) exchanged at step ν.
    pub coefficients: Vec<C64>,
}

pub fn chart_coefficients(mu: &DiagonalGenerator, schedule: &PermutationSchedule) -> Vec<C64> {
    let m = mu.entries();
    (0..schedule.len())
        .map(|nu| {
            let (j, k) = schedule.pair(nu);
            m[k] - m[j]
        })
        .collect()
}

pub fn flow_hamiltonian(a: &ComplexMatrix, mu: &DiagonalGenerator, schedule: &PermutationSchedule) -> Result<FlowHamiltonianValue> {
    let n = a.n();
    let f = factorize(a)?;
    let m = mu.entries();
    let via_delta = (0..n).map(|j| m[j] * f.delta[j].ln()).sum();
    let (up, low) = principal_minors(a);
    let dlow = |j: usize| if j >= n { C64::new(1.0, 0.0) } else { low[j] };
    let dup = |j: usize| if j == 0 { C64::new(1.0, 0.0) } else { up[j - 1] };
    let via_minors = (0..n).map(|j| m[j] * (low[j] * dup(j) / (dlow(j + 1) * up[j])).ln()).sum();
    Ok(FlowHamiltonianValue { via_delta, via_minors, coefficients: chart_coefficients(mu, schedule) })
}

/// H = tr(μ log δ) as a smooth function.
pub struct FlowHamiltonian(pub DiagonalGenerator);

impl SmoothFunction for FlowHamiltonian {
    fn value(&self, a: &ComplexMatrix) -> Result<C64> {
        let f = factorize(a)?;
        Ok(self.0.entries().iter().zip(&f.delta).map(|(m, d)| m * d.ln()).sum())
    }
    fn gradient(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = a.n();
        let mut g = ComplexMatrix::zeros(n);
        let lg = |s: Vec<usize>| log_minor_gradient(a, &s, &s).ok_or(Error::Singular);
        for (j, m) in self.0.entries().iter().enumerate() {
            if *m == ZERO {
                continue;
            }
            // log δ_jj = log d⁻_j + log d⁺_{j−1} − log d⁻_{j+1} − log d⁺_j
            let term = &(&lg((j..n).collect())? + &lg((0..j).collect())?) - &(&lg((j + 1..n).collect())? + &lg((0..=j).collect())?);
            g = &g + &term.scale(*m);
        }
        Ok(g)
    }
}

/// Sampled trajectory of a Hamiltonian flow.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
    pub casimirs: Vec<Vec<C64>>,
    /// max_j |φ_j(t) − φ_j(0)| at each sample.
    pub casimir_drift: Vec<f64>,
}

fn check_stratum(a: &ComplexMatrix, t: f64) -> Result<()> {
    let (up, low) = principal_minors(a);
    let n = a.n();
    for (k, m) in up.iter().enumerate() {
        if m.norm() < SINGULAR_TOL * minor_bound(a, k + 1) {
            return Err(Error::StratumExit(t));
        }
    }
    for (j, m) in low.iter().enumerate() {
        if m.norm() < SINGULAR_TOL * minor_bound(a, n - j) {
            return Err(Error::StratumExit(t));
        }
    }
    Ok(())
}

pub(crate) fn to_state(a: &ComplexMatrix) -> Vec<C64> {
    a.as_slice().to_vec()
}

pub(crate) fn from_state(n: usize, y: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |j, k| y[j * n + k])
}

/// Integrates ȧ_jk = scale·(H, a_jk) and samples `steps + 1` equally spaced times in [0, t].
pub fn hamiltonian_flow_scaled(
    a0: &ComplexMatrix,
    h: &dyn SmoothFunction,
    scale: C64,
    t: f64,
    steps: usize,
    opts: OdeOptions,
) -> Result<Trajectory> {
    let n = a0.n();
    check_stratum(a0, 0.0)?;
    let mut rhs = |tt: f64, y: &[C64]| -> Result<Vec<C64>> {
        let a = from_state(n, y);
        check_stratum(&a, tt)?;
        let g = h.gradient(&a)?;
        Ok(to_state(&hamiltonian_vector_field(&g, &a).scale(scale)))
    };
    let steps = steps.max(1);
    let phi0 = casimir_values(a0)?;
    let mut stepper = Dopri5::new(opts);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![a0.clone()],
        casimirs: vec![phi0.clone()],
        casimir_drift: vec![0.0],
    };
    let mut y = to_state(a0);
    for s in 1..=steps {
        let t0 = t * (s - 1) as f64 / steps as f64;
        let t1 = t * s as f64 / steps as f64;
        y = stepper.advance(&mut rhs, t0, &y, t1)?;
        let a = from_state(n, &y);
        let phi = casimir_values(&a)?;
        let drift = phi.iter().zip(&phi0).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        traj.times.push(t1);
        traj.states.push(a);
        traj.casimirs.push(phi);
        traj.casimir_drift.push(drift);
    }
    Ok(traj)
}

/// Integrates ȧ_jk = (H, a_jk).
pub fn hamiltonian_flow(a0: &ComplexMatrix, h: &dyn SmoothFunction, t: f64, steps: usize, opts: OdeOptions) -> Result<Trajectory> {
    hamiltonian_flow_scaled(a0, h, C64::new(1.0, 0.0), t, steps, opts)
}

/// ⟨f, g⟩(s1, s2) = Σ ∂f/∂a_jk(s1)·∂g/∂a_lm(s2)·a_jk(s1)·a_lm(s2)·[δ_jl − δ_km].
pub fn nonlocal_bracket_from_gradients(gf: &ComplexMatrix, gg: &ComplexMatrix, s1: &ComplexMatrix, s2: &ComplexMatrix) -> C64 {
    let n = s1.n();
    let u = ComplexMatrix::from_fn(n, |j, k| gf[(j, k)] * s1[(j, k)]);
    let w = ComplexMatrix::from_fn(n, |j, k| gg[(j, k)] * s2[(j, k)]);
    let row = |m: &ComplexMatrix, j: usize| (0..n).map(|k| m[(j, k)]).sum::<C64>();
    let col = |m: &ComplexMatrix, k: usize| (0..n).map(|j| m[(j, k)]).sum::<C64>();
    (0..n).map(|j| row(&u, j) * row(&w, j) - col(&u, j) * col(&w, j)).sum()
}

pub fn nonlocal_bracket(f: &dyn SmoothFunction, g: &dyn SmoothFunction, s1: &ComplexMatrix, s2: &ComplexMatrix) -> Result<C64> {
    Ok(nonlocal_bracket_from_gradients(&f.gradient(s1)?, &g.gradient(s2)?, s1, s2))
}

/// ε(J,K;J′,K′) = |J∩J′| − |K∩K′|.
pub fn epsilon(j: &IndexSet, k: &IndexSet, j2: &IndexSet, k2: &IndexSet) -> f64 {
    j.intersection_len(j2) as f64 - k.intersection_len(k2) as f64
}

/// Local bracket [a_jk, a_lm] = πi·a_jm·a_lk·[sgn(l−j) − sgn(m−k)].
pub fn local_bracket_coordinates(a: &ComplexMatrix, (j, k): (usize, usize), (l, m): (usize, usize)) -> C64 {
    I * PI * a[(j, m)] * a[(l, k)] * (sgn(l as isize - j as isize) - sgn(m as isize - k as isize))
}

/// p ↦ p/2, q ↦ q/(2πi).
pub fn renormalized_chart(chart: &DarbouxChart) -> DarbouxChart {
    DarbouxChart {
        p: chart.p.iter().map(|p| p * 0.5).collect(),
        q: chart.q.iter().map(|q| q / (2.0 * PI * I)).collect(),
        schedule: chart.schedule.clone(),
        casimirs: chart.casimirs.clone(),
    }
}

/// log of a minor, for use as a bracket argument.
pub fn log_minor(a: &ComplexMatrix, rows: &[usize], cols: &[usize]) -> C64 {
    minor_raw(a, rows, cols).ln()
}
