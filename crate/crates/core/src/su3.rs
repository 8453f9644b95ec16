//! Real action-angle variables on SU(3).
//!
//! Actions I_j = a_jj·A_jj (A the cofactor matrix), ζ = a₁₁a₂₂a₃₃ and the
//! pendulum angle ω = arg ζ. The angles Θ_j come from a generating function
//! whose integrand has the square root of F + G = ζ(4ζ² + Bζ + C); they are
//! evaluated with Carlson's R_F and R_J.

use std::f64::consts::{PI, TAU};

use crate::darboux::directional;
use crate::elliptic::{first_kind, path_clear, third_kind};
use crate::error::{Error, Result};
use crate::matrix::{log_minor_gradient, ComplexMatrix, C64, I};
use crate::ode::{Dopri5, OdeOptions};
use crate::poisson::{from_state, hamiltonian_vector_field, to_state};
use crate::quad::integrate_over_sqrt;
use crate::table::Table;

const DEGENERATE: f64 = 1e-14;

/// A point of SU(3).
#[derive(Clone, Debug, PartialEq)]
pub struct SU3Point(ComplexMatrix);

impl SU3Point {
    pub fn new(a: ComplexMatrix) -> Result<Self> {
        if a.n() != 3 {
            return Err(Error::InvalidInput(format!("expected a 3x3 matrix, got {0}x{0}", a.n())));
        }
        let unitarity = (&a * &a.adjoint()).dist(&ComplexMatrix::identity(3));
        if unitarity > 1e-10 {
            return Err(Error::InvalidInput(format!("a·a* deviates from 1 by {unitarity:e}")));
        }
        let det = (a.det() - 1.0).norm();
        if det > 1e-10 {
            return Err(Error::InvalidInput(format!("det a deviates from 1 by {det:e}")));
        }
        Ok(Self(a))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }
}

/// Nearest point of SU(3): polar factor by Newton's iteration
/// X ← ½(X + X^{−*}), then the determinant phase removed.
pub fn project_su3(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut x = a.clone();
    for _ in 0..50 {
        let next = (&x + &x.inverse()?.adjoint()).scale(C64::new(0.5, 0.0));
        let change = next.dist(&x);
        x = next;
        if change < 1e-15 {
            break;
        }
    }
    let phase = x.det().powf(-1.0 / 3.0);
    Ok(x.scale(phase))
}

fn check_3x3(a: &ComplexMatrix) -> Result<()> {
    if a.n() != 3 {
        return Err(Error::InvalidInput(format!("expected a 3x3 matrix, got {0}x{0}", a.n())));
    }
    Ok(())
}

/// Which constant enters I₀ = I₂ − I₁ − I₃ ± 1.
///
/// `Corrected` (−1) is the value for which the quartic identity holds
/// and the roots satisfy αβ = I₁I₂I₃; `Literal` (+1) is kept for
/// comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum I0Convention {
    Corrected,
    Literal,
}

impl I0Convention {
    pub fn value(self, i: &[C64; 3]) -> C64 {
        let base = i[1] - i[0] - i[2];
        match self {
            I0Convention::Corrected => base - 1.0,
            I0Convention::Literal => base + 1.0,
        }
    }
}

/// Actions and the pendulum angle at a point of SL(3, ℂ).
#[derive(Clone, Debug)]
pub struct Actions {
    pub i: [C64; 3],
    pub zeta: C64,
    /// A₁₁A₂₂A₃₃.
    pub cofactor_product: C64,
    pub i0: C64,
    pub rho: C64,
    /// ω as a complex number, (log ζ − log A₁₁A₂₂A₃₃)/2i with principal logs.
    pub omega_complex: C64,
    /// Re ω, shifted by 2π to be nearest the previous value when one is given.
    pub omega: f64,
    /// |ζ| < 1e-12: ω is ill-defined.
    pub branch_ambiguity: bool,
}

pub fn actions(a: &ComplexMatrix, previous_omega: Option<f64>) -> Result<Actions> {
    check_3x3(a)?;
    let cof = a.cofactor();
    let i = [a[(0, 0)] * cof[(0, 0)], a[(1, 1)] * cof[(1, 1)], a[(2, 2)] * cof[(2, 2)]];
    let zeta = a[(0, 0)] * a[(1, 1)] * a[(2, 2)];
    let cofactor_product = cof[(0, 0)] * cof[(1, 1)] * cof[(2, 2)];
    let omega_complex = (zeta.ln() - cofactor_product.ln()) / (2.0 * I);
    let mut omega = omega_complex.re;
    if let Some(prev) = previous_omega {
        omega += TAU * ((prev - omega) / TAU).round();
    }
    Ok(Actions {
        i,
        zeta,
        cofactor_product,
        i0: I0Convention::Corrected.value(&i),
        rho: (i[0] * i[1] * i[2]).sqrt(),
        omega_complex,
        omega,
        branch_ambiguity: zeta.norm() < 1e-12,
    })
}

fn nonzero(x: C64, which: usize) -> Result<C64> {
    if x.norm() < DEGENERATE {
        Err(Error::DegeneratePoint(which))
    } else {
        Ok(x)
    }
}

/// The chart (p₁, p₂, p₃; q₁, q₂, q₃) built from entries and cofactors.
pub fn su3_chart(a: &ComplexMatrix) -> Result<([C64; 3], [C64; 3])> {
    check_3x3(a)?;
    let c = a.cofactor();
    let e = |j: usize, k: usize| nonzero(a[(j, k)], 0);
    let f = |j: usize, k: usize| nonzero(c[(j, k)], 0);
    let p = [
        (e(0, 0)? * f(0, 0)?).ln(),
        (e(0, 0)? * e(1, 1)? * e(2, 2)?).ln(),
        (e(2, 2)? * f(2, 2)?).ln(),
    ];
    let q1 = (e(1, 2)? * f(0, 2)? / (e(2, 1)? * f(2, 0)?)).ln();
    let q2 = (e(1, 0)? * f(2, 0)? * e(2, 1)? / (e(0, 1)? * f(0, 2)? * e(1, 2)?)).ln();
    let q3 = (f(0, 2)? * e(0, 1)? / (f(2, 0)? * e(1, 0)?)).ln();
    Ok((p, [I * q1, I * q2, I * q3]))
}

/// Left-hand side of (ζI₀ + 2I₁I₃)² + 4cos²(q₂/2)(ζ−I₁)(ζ−I₃)(ζ−I₁I₃) = 0.
#[derive(Clone, Copy, Debug)]
pub struct QuarticResidual {
    pub value: C64,
    /// max(1, |(ζI₀ + 2I₁I₃)²|), for relative comparison.
    pub scale: f64,
}

pub fn quartic_identity_residual(a: &ComplexMatrix, convention: I0Convention) -> Result<QuarticResidual> {
    let act = actions(a, None)?;
    let (_, q) = su3_chart(a)?;
    let [i1, _, i3] = act.i;
    let z = act.zeta;
    let i0 = convention.value(&act.i);
    let f = (z * i0 + 2.0 * i1 * i3).powi(2);
    let cos = (q[1] / 2.0).cos();
    let value = f + 4.0 * cos * cos * (z - i1) * (z - i3) * (z - i1 * i3);
    Ok(QuarticResidual { value, scale: f.norm().max(1.0) })
}

/// Full state: actions plus chart values.
#[derive(Clone, Debug)]
pub struct ActionAngleState {
    pub actions: Actions,
    pub p: [C64; 3],
    pub q: [C64; 3],
}

impl ActionAngleState {
    pub fn new(a: &ComplexMatrix, previous_omega: Option<f64>) -> Result<Self> {
        let actions = actions(a, previous_omega)?;
        let (p, q) = su3_chart(a)?;
        Ok(Self { actions, p, q })
    }
}

/// Roots of 4ζ² + Bζ + C, where F + G = ζ(4ζ² + Bζ + C).
#[derive(Clone, Copy, Debug)]
pub struct QuadraticRoots {
    pub b: C64,
    pub c: C64,
    /// The root with larger imaginary part (larger real part on ties).
    pub alpha: C64,
    pub beta: C64,
}

/// Roots for the corrected I₀. With c = 4I₁I₂I₃ the discriminant
/// b² − 16c factors as the product of (√I₁ ± √I₂ ± √I₃ ± 1) over all sign
/// choices, which keeps the root gap accurate near the double-root locus;
/// the smaller root comes from αβ = I₁I₂I₃.
pub fn roots(i: &[C64; 3]) -> Result<QuadraticRoots> {
    let [i1, i2, i3] = *i;
    let i0 = I0Convention::Corrected.value(i);
    let b = i0 * i0 - 4.0 * (i1 + i3 + i1 * i3);
    let c = 4.0 * i1 * i2 * i3;
    let (x, y, z) = (i1.sqrt(), i2.sqrt(), i3.sqrt());
    let mut disc = C64::new(1.0, 0.0);
    for sy in [1.0, -1.0] {
        for sz in [1.0, -1.0] {
            for s1 in [1.0, -1.0] {
                disc *= x + sy * y + sz * z + s1;
            }
        }
    }
    let mut d = disc.sqrt();
    if (b.conj() * d).re > 0.0 {
        d = -d;
    }
    // −b + d with d opposite to b never cancels.
    let big = (-b + d) / 8.0;
    if big.norm() == 0.0 {
        return Err(Error::CoincidentRoots);
    }
    let (r1, r2) = (big, c / (4.0 * big));
    let scale = r1.norm().max(r2.norm());
    let first = if (r1.im - r2.im).abs() > 1e-12 * scale { r1.im > r2.im } else { r1.re >= r2.re };
    let (alpha, beta) = if first { (r1, r2) } else { (r2, r1) };
    if (alpha - beta).norm() < 1e-8 * alpha.norm() {
        return Err(Error::CoincidentRoots);
    }
    Ok(QuadraticRoots { b, c, alpha, beta })
}

/// Angle variables and the data used to evaluate them.
#[derive(Clone, Debug)]
pub struct AngleVariables {
    pub theta: [C64; 3],
    pub theta_re: [f64; 3],
    /// Some |Im Θ_j| exceeds 1e-8.
    pub imaginary_parts_flagged: bool,
    pub roots: QuadraticRoots,
    /// z with z² = (ζ−α)/(ζ−β), sign fixed by the branch of √(F+G).
    pub z: C64,
    /// √(F+G) at ζ on the branch induced by q₂.
    pub sqrt_branch: C64,
}

struct Integrand {
    i1: C64,
    i3: C64,
    zeta: C64,
    i0: C64,
    roots: QuadraticRoots,
    target: C64,
}

fn integrand(state: &ActionAngleState) -> Result<Integrand> {
    let act = &state.actions;
    let [i1, _, i3] = act.i;
    let z = act.zeta;
    let i0 = act.i0;
    let roots = roots(&act.i)?;
    let g = 4.0 * (z - i1) * (z - i3) * (z - i1 * i3);
    let denom = z * i0 + 2.0 * i1 * i3;
    if denom.norm() < DEGENERATE {
        return Err(Error::BranchPathFailure);
    }
    // √(F + G) with F = (ζI₀ + 2I₁I₃)² and cos²(u/2)G, u = q₂, as
    // −(i/2)·sin(q₂)·G/(ζI₀ + 2I₁I₃).
    let target = -0.5 * I * state.q[1].sin() * g / denom;
    Ok(Integrand { i1, i3, zeta: z, i0, roots, target })
}

pub fn angle_variables(state: &ActionAngleState) -> Result<AngleVariables> {
    let it = integrand(state)?;
    let QuadraticRoots { alpha, beta, .. } = it.roots;
    let zeta = it.zeta;
    if (zeta - beta).norm() < DEGENERATE {
        return Err(Error::BranchPathFailure);
    }
    let k2 = beta / alpha;
    let mut z = ((zeta - alpha) / (zeta - beta)).sqrt();
    let sa = alpha.sqrt();
    let z2 = z * z;
    let implied = 2.0 * z * (alpha - beta) / ((1.0 - z2) * (1.0 - z2)) * sa * (1.0 - z2).sqrt() * (1.0 - k2 * z2).sqrt();
    if (implied - it.target).norm() > (implied + it.target).norm() {
        z = -z;
    }
    let (i1, i3, i0) = (it.i1, it.i3, it.i0);
    let n_of = |c: C64| (beta - c) / (alpha - c);
    let params = [n_of(i1), n_of(i3), n_of(i1 * i3)];
    if !path_clear(z2) || !path_clear(k2 * z2) || params.iter().any(|n| !path_clear(n * z2) || n.norm() < DEGENERATE) {
        return Err(Error::BranchPathFailure);
    }
    let f = first_kind(z, k2);
    let theta2 = 2.0 * I / sa * f;
    let third = |c: C64| {
        let n = n_of(c);
        let pi = third_kind(z, k2, n);
        (f / n + (1.0 - 1.0 / n) * pi) / ((alpha - c) * sa)
    };
    let (t1, t3, t13) = (third(i1), third(i3), third(i1 * i3));
    let q = state.q;
    let theta1 = q[0] / i1 - theta2 + I * ((i0 + 2.0 * i3) * t1 + i3 * (i0 + 2.0) * t13);
    let theta3 = q[2] / i3 - theta2 + I * ((i0 + 2.0 * i1) * t3 + i1 * (i0 + 2.0) * t13);
    let theta = [theta1, theta2, theta3];
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::BranchPathFailure);
    }
    Ok(AngleVariables {
        theta,
        theta_re: [theta1.re, theta2.re, theta3.re],
        imaginary_parts_flagged: theta.iter().any(|t| t.im.abs() > 1e-8),
        roots: it.roots,
        z,
        sqrt_branch: it.target,
    })
}

/// Θ₂ = 2i∫_α^ζ dζ/√(F+G) by adaptive Gauss–Kronrod quadrature, with the
/// square root continued along the path. The path is the one the elliptic
/// evaluation uses, ζ(t) = (α − βw)/(1 − w) with w = t²z², so both sides
/// see the same sheet; a straight segment in ζ can pass on the other side
/// of the branch point ζ = 0 and differ by a period.
pub fn theta2_quadrature(state: &ActionAngleState) -> Result<C64> {
    let av = angle_variables(state)?;
    let QuadraticRoots { alpha, beta, .. } = av.roots;
    let z = av.z;
    let d = alpha - beta;
    // ζ − α = d·w/(1−w), so √(F+G) = 2tz·h(t) with h² = ζ(ζ−β)·d/(1−w), and
    // dζ/√(F+G) = z·d/((1−w)²·h) dt.
    let zeta_of = |t: f64| {
        let w = z * z * t * t;
        (alpha - beta * w) / (1.0 - w)
    };
    let radicand = |t: f64| {
        let w = z * z * t * t;
        let zeta = zeta_of(t);
        zeta * (zeta - beta) * d / (1.0 - w)
    };
    let num = |t: f64| {
        let w = z * z * t * t;
        z * d / ((1.0 - w) * (1.0 - w))
    };
    let r = integrate_over_sqrt(num, radicand, radicand(0.0).sqrt(), 0.0, 1.0, 1e-13);
    if !r.value.is_finite() {
        return Err(Error::BranchPathFailure);
    }
    let end = 2.0 * z * r.h_end;
    let value = if (end - av.sqrt_branch).norm() <= (end + av.sqrt_branch).norm() { r.value } else { -r.value };
    Ok(2.0 * I * value)
}

/// ȧ = −i·(log I₂, a).
pub fn pendulum_vector_field(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let g1 = log_minor_gradient(a, &[1], &[1]).ok_or(Error::DegeneratePoint(1))?;
    let g2 = log_minor_gradient(a, &[0, 2], &[0, 2]).ok_or(Error::DegeneratePoint(1))?;
    Ok(hamiltonian_vector_field(&(&g1 + &g2), a).scale(-I))
}

/// dω/dt along the direction x.
pub fn omega_rate(a: &ComplexMatrix, x: &ComplexMatrix) -> Result<f64> {
    let mut zeta_rate = C64::new(0.0, 0.0);
    let mut cof_rate = C64::new(0.0, 0.0);
    for j in 0..3 {
        zeta_rate += x[(j, j)] / nonzero(a[(j, j)], j)?;
        let rest: Vec<usize> = (0..3).filter(|&k| k != j).collect();
        let g = log_minor_gradient(a, &rest, &rest).ok_or(Error::DegeneratePoint(j))?;
        cof_rate += directional(&g, x);
    }
    Ok(((zeta_rate - cof_rate) / (2.0 * I)).re)
}

/// Sampled pendulum trajectory.
#[derive(Clone, Debug)]
pub struct PendulumTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
    pub actions: Vec<[f64; 3]>,
    pub omega: Vec<f64>,
    pub omega_dot: Vec<f64>,
    /// |quartic identity residual| (NaN where the chart is degenerate).
    pub quartic_residual: Vec<f64>,
    /// ρ and I₂ at t = 0.
    pub rho: f64,
    pub i2: f64,
}

fn pendulum_options(dt: f64) -> OdeOptions {
    OdeOptions { rtol: 1e-12, atol: 1e-14, max_step: dt, min_step: 1e-14 }
}

fn pendulum_rhs(t: f64, y: &[C64]) -> Result<Vec<C64>> {
    let a = from_state(3, y);
    pendulum_vector_field(&a).map(|x| to_state(&x)).map_err(|e| match e {
        Error::DegeneratePoint(_) => Error::StratumExit(t),
        other => other,
    })
}

/// Integrates ȧ = −i(log I₂, a) over [0, t], sampling every t/steps and
/// projecting back onto SU(3) at each sample.
pub fn pendulum_flow(a0: &SU3Point, t: f64, steps: usize) -> Result<PendulumTrajectory> {
    let steps = steps.max(1);
    let dt = t / steps as f64;
    let mut stepper = Dopri5::new(pendulum_options(dt.abs()));
    let a0 = a0.matrix().clone();
    let act0 = actions(&a0, None)?;
    let mut traj = PendulumTrajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        actions: Vec::with_capacity(steps + 1),
        omega: Vec::with_capacity(steps + 1),
        omega_dot: Vec::with_capacity(steps + 1),
        quartic_residual: Vec::with_capacity(steps + 1),
        rho: act0.rho.re,
        i2: act0.i[1].re,
    };
    let mut a = a0;
    let mut prev = None;
    let mut rhs = pendulum_rhs;
    for s in 0..=steps {
        let ts = dt * s as f64;
        if s > 0 {
            let y = stepper.advance(&mut rhs, ts - dt, &to_state(&a), ts)?;
            a = project_su3(&from_state(3, &y))?;
        }
        let act = actions(&a, prev)?;
        prev = Some(act.omega);
        let x = pendulum_vector_field(&a).map_err(|_| Error::StratumExit(ts))?;
        traj.times.push(ts);
        traj.actions.push([act.i[0].re, act.i[1].re, act.i[2].re]);
        traj.omega.push(act.omega);
        traj.omega_dot.push(omega_rate(&a, &x)?);
        traj.quartic_residual.push(quartic_identity_residual(&a, I0Convention::Corrected).map(|r| r.value.norm()).unwrap_or(f64::NAN));
        traj.states.push(a.clone());
    }
    Ok(traj)
}

impl PendulumTrajectory {
    pub fn to_table(&self) -> Table {
        let mut header: Vec<String> = ["t", "I1", "I2", "I3", "omega", "omega_dot", "quartic_residual"].iter().map(|s| s.to_string()).collect();
        for j in 1..=3 {
            for k in 1..=3 {
                header.push(format!("abs2_a{j}{k}"));
            }
        }
        let mut t = Table::new(header);
        for (idx, a) in self.states.iter().enumerate() {
            let mut row = vec![self.times[idx]];
            row.extend_from_slice(&self.actions[idx]);
            row.extend([self.omega[idx], self.omega_dot[idx], self.quartic_residual[idx]]);
            row.extend(a.as_slice().iter().map(|z| z.norm_sqr()));
            t.push(row);
        }
        t
    }

    /// max_j max_t |I_j(t) − I_j(0)|.
    pub fn action_drift(&self) -> f64 {
        let first = self.actions[0];
        self.actions
            .iter()
            .flat_map(|i| (0..3).map(move |j| (i[j] - first[j]).abs()))
            .fold(0.0, f64::max)
    }

    /// max over interior samples of |ω̈ + κ sin ω|, ω̈ by second differences.
    pub fn pendulum_residual(&self, kappa: f64) -> f64 {
        let mut worst = 0.0_f64;
        for i in 1..self.omega.len().saturating_sub(1) {
            let h1 = self.times[i] - self.times[i - 1];
            let h2 = self.times[i + 1] - self.times[i];
            let dd = 2.0 * (h1 * self.omega[i + 1] - (h1 + h2) * self.omega[i] + h2 * self.omega[i - 1]) / (h1 * h2 * (h1 + h2));
            worst = worst.max((dd + kappa * self.omega[i].sin()).abs());
        }
        worst
    }

    /// max_t |E(t) − E(0)| for E = ½ω̇² − κ cos ω.
    pub fn energy_drift(&self, kappa: f64) -> f64 {
        let e = |i: usize| 0.5 * self.omega_dot[i].powi(2) - kappa * self.omega[i].cos();
        let e0 = e(0);
        (0..self.omega.len()).map(|i| (e(i) - e0).abs()).fold(0.0, f64::max)
    }

    /// Times where ω̇ changes sign, refined by bisection on re-integrated states.
    pub fn turning_points(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for i in 1..self.omega_dot.len() {
            let (d0, d1) = (self.omega_dot[i - 1], self.omega_dot[i]);
            if d0 == 0.0 {
                out.push(self.times[i - 1]);
                continue;
            }
            if d0.signum() == d1.signum() || d1 == 0.0 {
                continue;
            }
            let (t0, a0) = (self.times[i - 1], &self.states[i - 1]);
            let (mut lo, mut hi) = (t0, self.times[i]);
            let mut stepper = Dopri5::new(pendulum_options(hi - lo));
            let mut rhs = pendulum_rhs;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let a = from_state(3, &stepper.advance(&mut rhs, t0, &to_state(a0), mid)?);
                let r = omega_rate(&a, &pendulum_vector_field(&a)?)?;
                if r.signum() == d0.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        Ok(out)
    }
}

/// Residuals of a_jk·A_jk + a_kj·A_kj = 1 − I_j − I_k + I_ℓ and
/// (a_jk·A_jk)(a_kj·A_kj) = I_jI_k + I_ℓ − 2ρ cos ω; returns the largest.
pub fn quadratic_relations_residual(a: &ComplexMatrix, act: &Actions) -> f64 {
    let c = a.cofactor();
    let i = act.i;
    let mut worst = 0.0_f64;
    for (j, k, l) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        let x = a[(j, k)] * c[(j, k)];
        let y = a[(k, j)] * c[(k, j)];
        let sum = x + y - (1.0 - i[j] - i[k] + i[l]);
        let prod = x * y - (i[j] * i[k] + i[l] - 2.0 * act.rho * act.omega_complex.cos());
        worst = worst.max(sum.norm()).max(prod.norm());
    }
    worst
}

/// Recovers {|a_jk|², |a_kj|²} as the roots of x² − Sx + P with S, P from
/// the quadratic relations, matches them to the observed pair and returns
/// the largest mismatch.
pub fn moduli_from_omega_residual(a: &ComplexMatrix, act: &Actions) -> f64 {
    let i = [act.i[0].re, act.i[1].re, act.i[2].re];
    let rho = act.rho.re;
    let mut worst = 0.0_f64;
    for (j, k, l) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        let s = 1.0 - i[j] - i[k] + i[l];
        let p = i[j] * i[k] + i[l] - 2.0 * rho * act.omega.cos();
        let disc = (s * s - 4.0 * p).max(0.0).sqrt();
        let (r1, r2) = (0.5 * (s + disc), 0.5 * (s - disc));
        let (x, y) = (a[(j, k)].norm_sqr(), a[(k, j)].norm_sqr());
        let m = ((x - r1).abs().max((y - r2).abs())).min((x - r2).abs().max((y - r1).abs()));
        worst = worst.max(m);
    }
    worst
}

/// Monotonicity of Re Θ₂ along a trajectory, segment by segment between
/// turning points.
#[derive(Clone, Debug)]
pub struct Theta2Monotonicity {
    pub segments: usize,
    pub monotone_segments: usize,
    /// Mean dΘ₂/dt over the monotone segments.
    pub rates: Vec<f64>,
}

pub fn theta2_monotonicity(traj: &PendulumTrajectory, turning_points: &[f64]) -> Result<Theta2Monotonicity> {
    let theta: Vec<Option<f64>> = traj
        .states
        .iter()
        .map(|a| ActionAngleState::new(a, None).and_then(|s| angle_variables(&s)).map(|v| v.theta_re[1]).ok())
        .collect();
    let dt = traj.times.get(1).map_or(1.0, |t| t - traj.times[0]);
    let mut bounds = vec![traj.times[0] - dt];
    bounds.extend_from_slice(turning_points);
    bounds.push(traj.times[traj.times.len() - 1] + dt);
    let mut out = Theta2Monotonicity { segments: 0, monotone_segments: 0, rates: Vec::new() };
    for w in bounds.windows(2) {
        // Stay one sample away from the turning points.
        let idx: Vec<usize> = (0..traj.times.len()).filter(|&i| traj.times[i] > w[0] + dt && traj.times[i] < w[1] - dt).collect();
        if idx.len() < 3 {
            continue;
        }
        out.segments += 1;
        let vals: Option<Vec<f64>> = idx.iter().map(|&i| theta[i]).collect();
        let Some(vals) = vals else { continue };
        let diffs: Vec<f64> = vals.windows(2).map(|v| v[1] - v[0]).collect();
        if diffs.iter().all(|d| *d > 0.0) || diffs.iter().all(|d| *d < 0.0) {
            out.monotone_segments += 1;
            let span = traj.times[idx[idx.len() - 1]] - traj.times[idx[0]];
            out.rates.push((vals[vals.len() - 1] - vals[0]) / span);
        }
    }
    Ok(out)
}

/// Both sides of iΩ = Σ dI_j∧dΘ_j on a pair of tangent vectors u·x₁, u·x₂
/// at u ∈ SU(3) (x_i skew-hermitian), with dI and d(Re Θ) by Ridders'
/// extrapolation of central differences along u·exp(t x).
#[derive(Clone, Copy, Debug)]
pub struct AngleFormCheck {
    pub i_omega: C64,
    pub action_angle: C64,
}

impl AngleFormCheck {
    pub fn relative_error(&self) -> f64 {
        (self.i_omega - self.action_angle).norm() / self.i_omega.norm().max(1.0)
    }
}

/// Derivative at 0 of a vector function by Ridders' polynomial
/// extrapolation of central differences with shrinking steps. Each component
/// keeps its own best tableau entry; returns the estimates and their errors.
pub fn ridders(f: &dyn Fn(f64) -> Result<Vec<f64>>, h0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    const CON: f64 = 1.4;
    const NTAB: usize = 10;
    let central = |h: f64| -> Result<Vec<f64>> {
        let (p, m) = (f(h)?, f(-h)?);
        Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let mut h = h0;
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![central(h)?]];
    let dim = table[0][0].len();
    let mut best = table[0][0].clone();
    let mut best_err = vec![f64::INFINITY; dim];
    let mut done = vec![false; dim];
    for i in 1..NTAB {
        h /= CON;
        let mut row = vec![central(h)?];
        let mut fac = CON * CON;
        for j in 1..=i {
            let prev = &table[i - 1][j - 1];
            let cur = &row[j - 1];
            let next: Vec<f64> = cur.iter().zip(prev).map(|(c, p)| (c * fac - p) / (fac - 1.0)).collect();
            fac *= CON * CON;
            for c in (0..dim).filter(|&c| !done[c]) {
                let e = (next[c] - cur[c]).abs().max((next[c] - prev[c]).abs());
                if e <= best_err[c] {
                    best_err[c] = e;
                    best[c] = next[c];
                }
            }
            row.push(next);
        }
        for c in 0..dim {
            done[c] |= (row[i][c] - table[i - 1][i - 1][c]).abs() >= 2.0 * best_err[c];
        }
        table.push(row);
        if done.iter().all(|&d| d) {
            break;
        }
    }
    Ok((best, best_err))
}

pub fn angle_form_check(u: &ComplexMatrix, x1: &ComplexMatrix, x2: &ComplexMatrix) -> Result<AngleFormCheck> {
    let eval = |a: &ComplexMatrix| -> Result<([f64; 3], [f64; 3])> {
        let st = ActionAngleState::new(a, None)?;
        let av = angle_variables(&st)?;
        let i = st.actions.i;
        Ok(([i[0].re, i[1].re, i[2].re], av.theta_re))
    };
    let diff = |x: &ComplexMatrix| -> Result<([f64; 3], [f64; 3])> {
        let f = |t: f64| -> Result<Vec<f64>> {
            let (i, th) = eval(&(u * &x.scale(C64::new(t, 0.0)).expm()))?;
            Ok(i.iter().chain(th.iter()).copied().collect())
        };
        // A branch cut of Re Θ within reach of the widest step spoils the
        // whole tableau; restart from smaller steps and keep the estimate
        // with the smallest error.
        let (mut d, mut err) = ridders(&f, 1e-2)?;
        for h0 in [3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5] {
            let (r, e) = ridders(&f, h0)?;
            for c in 0..d.len() {
                if e[c] < err[c] {
                    d[c] = r[c];
                    err[c] = e[c];
                }
            }
        }
        Ok((std::array::from_fn(|j| d[j]), std::array::from_fn(|j| d[j + 3])))
    };
    let (di1, dt1) = diff(x1)?;
    let (di2, dt2) = diff(x2)?;
    let action_angle: f64 = (0..3).map(|j| di1[j] * dt2[j] - di2[j] * dt1[j]).sum();
    let i_omega = I * crate::darboux::omega_at(u, &(u * x1), &(u * x2))?;
    Ok(AngleFormCheck { i_omega, action_angle: C64::new(action_angle, 0.0) })
}

/// ρ/I₂², the coefficient of sin ω in the pendulum equation for this flow.
pub fn pendulum_coefficient(act: &Actions) -> f64 {
    (act.rho / (act.i[1] * act.i[1])).re
}

/// Angles reduced to (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darboux::omega_at;
    use crate::sample::Sampler;

    #[test]
    fn identity_values() {
        let act = actions(&ComplexMatrix::identity(3), None).unwrap();
        assert!(act.i.iter().all(|i| (i - 1.0).norm() < 1e-15));
        assert!((act.zeta - 1.0).norm() < 1e-15 && (act.rho - 1.0).norm() < 1e-15);
        assert_eq!(act.omega, 0.0);
        assert!((act.i0 + 2.0).norm() < 1e-15);
        assert!((I0Convention::Literal.value(&act.i)).norm() < 1e-15);
        let p = {
            let c = ComplexMatrix::identity(3).cofactor();
            [c[(0, 0)], c[(2, 2)]]
        };
        assert!(p.iter().all(|x| (x - 1.0).norm() < 1e-15));
        assert!(matches!(su3_chart(&ComplexMatrix::identity(3)), Err(Error::DegeneratePoint(_))));
    }

    #[test]
    fn su3_actions_are_real_and_cofactor_is_conjugate() {
        let mut s = Sampler::new(3, "su3-unit", 0);
        for _ in 0..20 {
            let a = s.special_unitary(3);
            SU3Point::new(a.clone()).unwrap();
            assert!(a.cofactor().dist(&a.conj()) < 1e-12);
            let act = actions(&a, None).unwrap();
            assert!(act.i.iter().all(|i| i.im.abs() < 1e-12));
            let (p, _) = su3_chart(&a).unwrap();
            assert!(p[0].im.abs() < 1e-12 && p[2].im.abs() < 1e-12);
            assert!((act.omega - act.zeta.arg()).abs() < 1e-12);
        }
    }

    #[test]
    fn quartic_identity_and_negative_control() {
        let mut s = Sampler::new(3, "su3-unit", 1);
        for _ in 0..20 {
            for a in [s.special_unitary(3), s.sl(3)] {
                let r = quartic_identity_residual(&a, I0Convention::Corrected).unwrap();
                assert!(r.value.norm() <= 1e-9 * r.scale, "{}", r.value);
            }
        }
        let a = s.sl(3).scale(C64::new(1.1, 0.0));
        assert!(quartic_identity_residual(&a, I0Convention::Corrected).unwrap().value.norm() > 1e-6);
    }

    #[test]
    fn root_product() {
        let mut s = Sampler::new(3, "su3-unit", 2);
        for _ in 0..20 {
            let act = actions(&s.special_unitary(3), None).unwrap();
            let r = roots(&act.i).unwrap();
            assert!((r.alpha * r.beta - act.i[0] * act.i[1] * act.i[2]).norm() < 1e-12);
        }
    }

    #[test]
    fn chart_is_canonical_on_su3() {
        let mut s = Sampler::new(3, "su3-unit", 3);
        let h = 1e-6;
        for _ in 0..10 {
            let u = s.special_unitary(3);
            let (x1, x2) = (s.skew_hermitian(3), s.skew_hermitian(3));
            let d = |x: &ComplexMatrix| {
                let plus = su3_chart(&(&u * &x.scale(C64::new(h, 0.0)).expm())).unwrap();
                let minus = su3_chart(&(&u * &x.scale(C64::new(-h, 0.0)).expm())).unwrap();
                let dp: Vec<C64> = (0..3).map(|j| (plus.0[j] - minus.0[j]) / (2.0 * h)).collect();
                let dq: Vec<C64> = (0..3).map(|j| (plus.1[j] - minus.1[j]) / (2.0 * h)).collect();
                (dp, dq)
            };
            let (dp1, dq1) = d(&x1);
            let (dp2, dq2) = d(&x2);
            let rhs: C64 = (0..3).map(|j| dp1[j] * dq2[j] - dp2[j] * dq1[j]).sum();
            let lhs = I * omega_at(&u, &(&u * &x1), &(&u * &x2)).unwrap();
            assert!((lhs - rhs).norm() < 1e-6 * lhs.norm().max(1.0), "{lhs} {rhs}");
        }
    }

    #[test]
    fn theta2_two_ways() {
        let mut s = Sampler::new(3, "su3-unit", 4);
        let mut checked = 0;
        for _ in 0..30 {
            let st = ActionAngleState::new(&s.special_unitary(3), None).unwrap();
            let (Ok(av), Ok(q)) = (angle_variables(&st), theta2_quadrature(&st)) else { continue };
            checked += 1;
            assert!((av.theta[1] - q).norm() < 1e-10, "{} {}", av.theta[1], q);
        }
        assert!(checked > 20);
    }

    #[test]
    fn projection_fixes_su3_and_repairs_drift() {
        let mut s = Sampler::new(3, "su3-unit", 5);
        let u = s.special_unitary(3);
        assert!(project_su3(&u).unwrap().dist(&u) < 1e-14);
        let v = &u + &s.tangent(3).scale(C64::new(1e-6, 0.0));
        let w = project_su3(&v).unwrap();
        SU3Point::new(w.clone()).unwrap();
        assert!(w.dist(&u) < 1e-5);
    }

    #[test]
    fn pendulum_field_is_tangent_and_conserves_actions() {
        let mut s = Sampler::new(3, "su3-unit", 6);
        let u = s.special_unitary(3);
        let x = pendulum_vector_field(&u).unwrap();
        // u⁻¹ẋ skew-hermitian and traceless.
        let y = &u.adjoint() * &x;
        assert!((&y + &y.adjoint()).max_abs() < 1e-12);
        assert!(y.trace().norm() < 1e-12);
        for j in 0..3 {
            let rest: Vec<usize> = (0..3).filter(|&k| k != j).collect();
            let g = log_minor_gradient(&u, &[j], &[j]).unwrap();
            let gc = log_minor_gradient(&u, &rest, &rest).unwrap();
            assert!((directional(&g, &x) + directional(&gc, &x)).norm() < 1e-12);
        }
    }

    #[test]
    fn short_pendulum_run() {
        let mut s = Sampler::new(3, "su3-unit", 7);
        let u = SU3Point::new(s.special_unitary(3)).unwrap();
        let tr = pendulum_flow(&u, 0.5, 500).unwrap();
        assert!(tr.action_drift() < 1e-10);
        let kappa = tr.rho / (tr.i2 * tr.i2);
        assert!(tr.pendulum_residual(kappa) < 1e-5);
        assert!(tr.energy_drift(kappa) < 1e-8);
        for (a, _) in tr.states.iter().zip(&tr.omega) {
            let act = actions(a, None).unwrap();
            assert!(quadratic_relations_residual(a, &act) < 1e-10);
            assert!(moduli_from_omega_residual(a, &act) < 1e-6);
        }
        assert_eq!(tr.to_table().header.len(), 16);
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }
}
