//! Forward scattering for m′ = ξ(Jm − mJ) + q·m on [−L, L], the F_k
//! hierarchy, linear evolution of scattering data and the associated
//! Hamiltonians.
//!
//! J = diag(iλ₁, …, iλₙ) with λ strictly decreasing; m = ψe^{−xξJ} with
//! m(−L) = 1 and s(ξ) = e^{−LξJ}m(L)e^{LξJ}.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::darboux::{chart_gradients, darboux_coordinates, momenta, momentum_gradients};
use crate::error::{Error, Result};
use crate::factor::{default_schedule, factorize, TriangularFactorization};
use crate::matrix::{ComplexMatrix, C64, I, ZERO};
use crate::ode::{Dopri5, OdeOptions};
use crate::poisson::{bracket_from_gradients, chart_coefficients, local_bracket_coordinates, nonlocal_bracket_from_gradients, DiagonalGenerator};
use crate::table::Table;

/// Sign of the commutator term in the F_k recursion.
///
/// `Literal`: [J, F_{k+1}] = F_k′ + [q, F_k]. `Corrected`: [J, F_{k+1}] =
/// F_k′ − [q, F_k], the zero-curvature recursion for d/dx − zJ − q. The two
/// agree on the part linear in q, so they give the same k = 0 flow and the
/// same linearized k = 1 flow; they differ from the quadratic terms on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecursionConvention {
    Literal,
    Corrected,
}

impl RecursionConvention {
    fn commutator_sign(self) -> f64 {
        match self {
            Self::Literal => 1.0,
            Self::Corrected => -1.0,
        }
    }

    /// σ in ṡ = σξ^k[μ, s] for q̇ = [J, F_{k+1}], resolved at n = 2, k = 0
    /// against the exact conjugation flow.
    pub fn flow_sign(self) -> f64 {
        match self {
            Self::Literal => -1.0,
            Self::Corrected => 1.0,
        }
    }
}

/// Matrix potential sampled on a uniform grid, zero on the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    x0: f64,
    h: f64,
    values: Vec<ComplexMatrix>,
    skew: bool,
}

#[derive(Serialize, Deserialize)]
struct PotentialJson {
    x0: f64,
    h: f64,
    n_nodes: usize,
    n: usize,
    matrices: Vec<serde_json::Value>,
}

impl Potential {
    /// Tail tolerance for ‖q(±L)‖.
    pub const TAIL_TOL: f64 = 1e-12;

    pub fn new(x0: f64, h: f64, values: Vec<ComplexMatrix>) -> Result<Self> {
        if values.len() < 5 {
            return Err(Error::InvalidInput("a potential needs at least 5 nodes".into()));
        }
        if !(h > 0.0) || !x0.is_finite() {
            return Err(Error::InvalidInput(format!("invalid grid x0 = {x0}, h = {h}")));
        }
        let n = values[0].n();
        for (i, v) in values.iter().enumerate() {
            if v.n() != n {
                return Err(Error::InvalidInput(format!("node {i} has dimension {}, expected {n}", v.n())));
            }
            if v.diag().iter().any(|d| *d != ZERO) {
                return Err(Error::InvalidInput(format!("node {i} has a nonzero diagonal")));
            }
        }
        for end in [&values[0], &values[values.len() - 1]] {
            if end.norm_fro() > Self::TAIL_TOL {
                return Err(Error::InvalidInput(format!("potential does not decay: tail norm {:e}", end.norm_fro())));
            }
        }
        let skew = values.iter().all(|v| (v + &v.adjoint()).max_abs() <= 1e-14);
        Ok(Self { x0, h, values, skew })
    }

    /// Samples f on the nodes −L, −L + h, …, L, zeroing the diagonal.
    pub fn from_fn(n: usize, l: f64, h: f64, f: impl Fn(f64) -> ComplexMatrix) -> Result<Self> {
        let nodes = (2.0 * l / h).round() as usize + 1;
        let values = (0..nodes)
            .map(|i| {
                let mut m = f(-l + h * i as f64);
                for j in 0..n {
                    m[(j, j)] = ZERO;
                }
                m
            })
            .collect();
        Self::new(-l, h, values)
    }

    pub fn zero(n: usize, l: f64, h: f64) -> Result<Self> {
        Self::from_fn(n, l, h, |_| ComplexMatrix::zeros(n))
    }

    /// c·e^{−x²} for an off-diagonal coefficient matrix c.
    pub fn gaussian(coefficients: &ComplexMatrix, l: f64, h: f64) -> Result<Self> {
        Self::from_fn(coefficients.n(), l, h, |x| coefficients.scale(C64::new((-x * x).exp(), 0.0)))
    }

    /// Skew-hermitian n = 3 potential of three-wave type: each wave a
    /// Gaussian packet with its own centre and carrier, scaled by `amplitude`.
    pub fn three_wave_demo(amplitude: f64, l: f64, h: f64) -> Result<Self> {
        let waves = [((0, 1), C64::new(1.0, 0.5), -1.0, 0.8), ((0, 2), C64::new(0.3, 0.0), 0.0, -0.5), ((1, 2), C64::new(0.0, 0.7), 1.0, 0.3)];
        Self::from_fn(3, l, h, |x| {
            let mut m = ComplexMatrix::zeros(3);
            for ((j, k), c, centre, carrier) in waves {
                let v = c * amplitude * (-(x - centre) * (x - centre)).exp() * C64::new(0.0, carrier * x).exp();
                m[(j, k)] = v;
                m[(k, j)] = -v.conj();
            }
            m
        })
    }

    pub fn n(&self) -> usize {
        self.values[0].n()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + self.h * i as f64
    }

    pub fn values(&self) -> &[ComplexMatrix] {
        &self.values
    }

    pub fn is_skew(&self) -> bool {
        self.skew
    }

    /// ∫‖q(x)‖_F dx by the trapezoid rule.
    pub fn integrated_norm(&self) -> f64 {
        trapezoid(self.h, &self.values.iter().map(|v| C64::new(v.norm_fro(), 0.0)).collect::<Vec<_>>()).re
    }

    /// Cubic Lagrange interpolation through the four nearest nodes.
    pub fn at(&self, x: f64) -> ComplexMatrix {
        let last = self.values.len() - 1;
        let u = ((x - self.x0) / self.h).clamp(0.0, last as f64);
        let i = (u.floor() as usize).clamp(1, last - 2);
        let t = u - i as f64;
        // Nodes at offsets −1, 0, 1, 2.
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
        let n = self.n();
        ComplexMatrix::from_fn(n, |j, k| (0..4).map(|o| self.values[i + o - 1][(j, k)] * w[o]).sum())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(PotentialJson {
            x0: self.x0,
            h: self.h,
            n_nodes: self.values.len(),
            n: self.n(),
            matrices: self.values.iter().map(|m| m.to_json_value()).collect(),
        })
        .expect("potential serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: PotentialJson = serde_json::from_str(s).map_err(|e| Error::Format(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        if p.matrices.len() != p.n_nodes {
            return Err(Error::Format(format!("n_nodes = {} but {} matrices", p.n_nodes, p.matrices.len())));
        }
        let values = p.matrices.iter().map(ComplexMatrix::from_json_value).collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| v.n() != p.n) {
            return Err(Error::Format(format!("matrix dimension differs from n = {}", p.n)));
        }
        Self::new(p.x0, p.h, values)
    }
}

fn trapezoid(h: f64, f: &[C64]) -> C64 {
    if f.len() < 2 {
        return ZERO;
    }
    let inner: C64 = f[1..f.len() - 1].iter().sum();
    (inner + 0.5 * (f[0] + f[f.len() - 1])) * h
}

/// Trapezoid rule on arbitrary (increasing) abscissae.
fn trapezoid_nonuniform(x: &[f64], f: &[C64]) -> C64 {
    x.windows(2).zip(f.windows(2)).map(|(xs, fs)| (fs[0] + fs[1]) * (0.5 * (xs[1] - xs[0]))).sum()
}

/// J = diag(iλ), λ strictly decreasing, plus the ξ-grid and solver settings.
#[derive(Clone, Debug)]
pub struct SpectralConfig {
    lambda: Vec<f64>,
    pub xi: Vec<f64>,
    pub ode: OdeOptions,
    /// Hard limit on ∫‖q‖; above 1 the record only carries a warning.
    pub norm_cap: f64,
}

impl SpectralConfig {
    pub fn new(lambda: Vec<f64>, xi_min: f64, xi_max: f64, nodes: usize) -> Result<Self> {
        if lambda.len() < 2 || lambda.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::InvalidInput(format!("λ must be strictly decreasing, got {lambda:?}")));
        }
        if nodes == 0 || !(xi_max >= xi_min) {
            return Err(Error::InvalidInput("empty ξ-grid".into()));
        }
        let xi = if nodes == 1 {
            vec![xi_min]
        } else {
            (0..nodes).map(|i| xi_min + (xi_max - xi_min) * i as f64 / (nodes - 1) as f64).collect()
        };
        Ok(Self { lambda, xi, ode: OdeOptions { rtol: 1e-10, atol: 1e-12, max_step: 1.0 / 64.0, min_step: 1e-14 }, norm_cap: 10.0 })
    }

    /// λ = (n−1)/2, …, −(n−1)/2 on ξ ∈ [−4, 4] with 257 nodes.
    pub fn standard(n: usize) -> Result<Self> {
        let lambda = (0..n).map(|j| (n as f64 - 1.0) / 2.0 - j as f64).collect();
        Self::new(lambda, -4.0, 4.0, 257)
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn j_diag(&self) -> Vec<C64> {
        self.lambda.iter().map(|l| C64::new(0.0, *l)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ScatteringNode {
    pub xi: f64,
    pub s: ComplexMatrix,
    /// s = s₊v₊⁻¹ = s₋v₋⁻¹ with s_± = `a_plus`/`a_minus`; None when s ∉ GL_*.
    pub factors: Option<TriangularFactorization>,
}

impl ScatteringNode {
    fn new(xi: f64, s: ComplexMatrix) -> Self {
        let factors = factorize(&s).ok();
        Self { xi, s, factors }
    }

    pub fn flagged(&self) -> bool {
        self.factors.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct ScatteringRecord {
    pub lambda: Vec<f64>,
    pub nodes: Vec<ScatteringNode>,
    pub integrated_norm: f64,
    /// ∫‖q‖ ≥ 1: uniqueness of the normalized solutions is not guaranteed.
    pub large_norm_warning: bool,
}

/// Residuals of the structural identities of a record.
#[derive(Clone, Copy, Debug, Default)]
pub struct RecordResiduals {
    /// max |det s − 1|.
    pub det: f64,
    /// max ‖s − s_±v_±⁻¹‖ and ‖v₋⁻¹v₊ − s₋⁻¹s₊‖.
    pub factorization: f64,
    /// max ‖ss* − 1‖.
    pub unitarity: f64,
    /// max ‖v₊*v₋ − 1‖.
    pub reduction: f64,
    pub flagged: usize,
}

impl ScatteringRecord {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn residuals(&self) -> Result<RecordResiduals> {
        let n = self.n();
        let one = ComplexMatrix::identity(n);
        let mut r = RecordResiduals::default();
        for node in &self.nodes {
            let s = &node.s;
            r.det = r.det.max((s.det() - 1.0).norm());
            r.unitarity = r.unitarity.max((s * &s.adjoint()).dist(&one));
            let Some(f) = &node.factors else {
                r.flagged += 1;
                continue;
            };
            let vp_inv = f.v_plus.inverse()?;
            let vm_inv = f.v_minus.inverse()?;
            let plus = (&f.a_plus * &vp_inv).dist(s);
            let minus = (&f.a_minus * &vm_inv).dist(s);
            let v = &vm_inv * &f.v_plus;
            let v_alt = &f.a_minus.inverse()? * &f.a_plus;
            r.factorization = r.factorization.max(plus).max(minus).max(v.dist(&v_alt));
            r.reduction = r.reduction.max((&f.v_plus.adjoint() * &f.v_minus).dist(&one));
        }
        Ok(r)
    }

    /// JSON array of {xi, s, flagged}.
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.nodes
                .iter()
                .map(|node| serde_json::json!({ "xi": node.xi, "s": node.s.to_json_value(), "flagged": node.flagged() }))
                .collect(),
        )
    }

    /// ξ, det residual, unitarity residual, then Re/Im of every p_ν (NaN where undefined).
    pub fn summary_table(&self) -> Result<Table> {
        let n = self.n();
        let sched = default_schedule(n)?;
        let mut header = vec!["xi".to_string(), "det_residual".to_string(), "unitarity_residual".to_string()];
        for nu in 1..=sched.len() {
            header.push(format!("p{nu}_re"));
            header.push(format!("p{nu}_im"));
        }
        let one = ComplexMatrix::identity(n);
        let mut t = Table::new(header);
        for node in &self.nodes {
            let mut row = vec![node.xi, (node.s.det() - 1.0).norm(), (&node.s * &node.s.adjoint()).dist(&one)];
            match momenta(&node.s, &sched) {
                Ok(p) => p.iter().for_each(|z| row.extend([z.re, z.im])),
                Err(_) => row.extend(std::iter::repeat(f64::NAN).take(2 * sched.len())),
            }
            t.push(row);
        }
        Ok(t)
    }
}

/// s(ξ) for a single ξ.
pub fn scatter_at(q: &Potential, j: &[C64], xi: f64, opts: OdeOptions) -> Result<ComplexMatrix> {
    let n = q.n();
    if j.len() != n {
        return Err(Error::InvalidInput(format!("J has {} entries for a {n}x{n} potential", j.len())));
    }
    let mut rhs = |x: f64, y: &[C64]| -> Result<Vec<C64>> {
        let qx = q.at(x);
        let mut out = vec![ZERO; n * n];
        for r in 0..n {
            for c in 0..n {
                let mut acc = (j[r] - j[c]) * xi * y[r * n + c];
                for k in 0..n {
                    acc += qx[(r, k)] * y[k * n + c];
                }
                out[r * n + c] = acc;
            }
        }
        Ok(out)
    };
    let (a, b) = (q.x0(), q.x_end());
    let mut stepper = Dopri5::new(OdeOptions { max_step: opts.max_step.min(q.h()), ..opts });
    let y = stepper.advance(&mut rhs, a, ComplexMatrix::identity(n).as_slice(), b)?;
    let m = ComplexMatrix::new(n, y)?;
    // s = e^{−LξJ} m(L) e^{LξJ}
    Ok(ComplexMatrix::from_fn(n, |r, c| m[(r, c)] * (-(j[r] - j[c]) * xi * b).exp()))
}

pub fn forward_scatter(q: &Potential, cfg: &SpectralConfig) -> Result<ScatteringRecord> {
    let norm = q.integrated_norm();
    if norm > cfg.norm_cap {
        return Err(Error::NormTooLarge { norm, cap: cfg.norm_cap });
    }
    let j = cfg.j_diag();
    let nodes = cfg
        .xi
        .par_iter()
        .map(|&xi| scatter_at(q, &j, xi, cfg.ode).map(|s| ScatteringNode::new(xi, s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScatteringRecord { lambda: cfg.lambda.clone(), nodes, integrated_norm: norm, large_norm_warning: norm >= 1.0 })
}

/// 1 + ∫e^{−yξ ad J}q(y)dy by the trapezoid rule on the potential's grid.
pub fn born_approximation(q: &Potential, j: &[C64], xi: f64) -> ComplexMatrix {
    let n = q.n();
    let mut out = ComplexMatrix::identity(n);
    for r in 0..n {
        for c in 0..n {
            if r == c {
                continue;
            }
            let f: Vec<C64> = (0..q.len()).map(|i| q.values()[i][(r, c)] * (-(j[r] - j[c]) * xi * q.x(i)).exp()).collect();
            out[(r, c)] = trapezoid(q.h(), &f);
        }
    }
    out
}

/// max over ξ of ‖s(ξ) − Born(ξ)‖.
pub fn born_residual(q: &Potential, rec: &ScatteringRecord) -> f64 {
    let j: Vec<C64> = rec.lambda.iter().map(|l| C64::new(0.0, *l)).collect();
    rec.nodes.iter().map(|node| node.s.dist(&born_approximation(q, &j, node.xi))).fold(0.0, f64::max)
}

/// F_k on the potential's grid.
#[derive(Clone, Debug)]
pub struct HierarchyTerm {
    pub k: usize,
    pub values: Vec<ComplexMatrix>,
    /// max‖diag(F_k′ + [q, F_k])‖ relative to the larger of max‖F_k‖ and
    /// max‖F_k′ + [q, F_k]‖; this
    /// diagonal must vanish for the next step to exist.
    pub compatibility_residual: f64,
}

/// Fourth-order finite differences (one-sided at the two nodes nearest each end).
fn derivative(h: f64, f: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
    let m = f.len();
    let n = f[0].n();
    let lin = |terms: &[(usize, f64)]| ComplexMatrix::from_fn(n, |r, c| terms.iter().map(|(i, w)| f[*i][(r, c)] * *w).sum::<C64>() / h);
    (0..m)
        .map(|i| {
            if i >= 2 && i + 2 < m {
                lin(&[(i - 2, 1.0 / 12.0), (i - 1, -8.0 / 12.0), (i + 1, 8.0 / 12.0), (i + 2, -1.0 / 12.0)])
            } else if i < 2 {
                let b = if i == 0 { [-25.0, 48.0, -36.0, 16.0, -3.0] } else { [-3.0, -10.0, 18.0, -6.0, 1.0] };
                lin(&(0..5).map(|o| (o, b[o] / 12.0)).collect::<Vec<_>>())
            } else {
                let b = if i == m - 1 { [-25.0, 48.0, -36.0, 16.0, -3.0] } else { [-3.0, -10.0, 18.0, -6.0, 1.0] };
                lin(&(0..5).map(|o| (m - 1 - o, -b[o] / 12.0)).collect::<Vec<_>>())
            }
        })
        .collect()
}

/// F₀ = μ and F_{k+1} from [J, F_{k+1}] = F_k′ ± [q, F_k], with the
/// diagonal of F_{k+1} fixed by diag(F_{k+1}′) = ∓diag([q, F_{k+1}]) and
/// F_{k+1}(−L) = 0.
pub fn hierarchy_terms(
    q: &Potential,
    j: &[C64],
    mu: &DiagonalGenerator,
    k_max: usize,
    conv: RecursionConvention,
    recursion_tol: f64,
) -> Result<Vec<HierarchyTerm>> {
    if k_max > 3 {
        return Err(Error::InvalidInput(format!("k_max = {k_max} exceeds 3")));
    }
    let n = q.n();
    if mu.n() != n || j.len() != n {
        return Err(Error::InvalidInput("μ and J must match the potential's dimension".into()));
    }
    let h = q.h();
    let qs = q.values();
    let sign = C64::new(conv.commutator_sign(), 0.0);
    let f0 = vec![ComplexMatrix::from_diag(mu.entries()); q.len()];
    let mut terms = vec![HierarchyTerm { k: 0, values: f0, compatibility_residual: 0.0 }];
    for k in 0..k_max {
        let fk = &terms[k].values;
        let df = derivative(h, fk);
        let rhs: Vec<ComplexMatrix> = (0..q.len()).map(|i| &df[i] + &qs[i].commutator(&fk[i]).scale(sign)).collect();
        let scale = rhs.iter().map(|r| r.max_abs()).fold(0.0, f64::max);
        let diag_err = rhs.iter().map(|r| r.diag().iter().map(|d| d.norm()).fold(0.0, f64::max)).fold(0.0, f64::max);
        let size = fk.iter().map(|f| f.max_abs()).fold(scale, f64::max);
        let rel = if size > 0.0 { diag_err / size } else { 0.0 };
        terms[k].compatibility_residual = rel;
        if rel > recursion_tol {
            return Err(Error::RecursionInconsistency(rel));
        }
        let mut next: Vec<ComplexMatrix> = rhs
            .iter()
            .map(|r| ComplexMatrix::from_fn(n, |a, b| if a == b { ZERO } else { r[(a, b)] / (j[a] - j[b]) }))
            .collect();
        let src: Vec<Vec<C64>> = (0..q.len()).map(|i| qs[i].commutator(&next[i]).diag()).collect();
        let mut acc = vec![ZERO; n];
        for i in 1..q.len() {
            for d in 0..n {
                acc[d] -= sign * 0.5 * h * (src[i - 1][d] + src[i][d]);
                next[i][(d, d)] = acc[d];
            }
        }
        terms.push(HierarchyTerm { k: k + 1, values: next, compatibility_residual: 0.0 });
    }
    Ok(terms)
}

/// [J, F_{k+1}(q)] at every node, the right side of q̇ = [J, F_{k+1}].
pub fn hierarchy_velocity(
    q: &Potential,
    j: &[C64],
    mu: &DiagonalGenerator,
    k: usize,
    conv: RecursionConvention,
    recursion_tol: f64,
) -> Result<Vec<ComplexMatrix>> {
    let terms = hierarchy_terms(q, j, mu, k + 1, conv, recursion_tol)?;
    let jm = ComplexMatrix::from_diag(j);
    Ok(terms[k + 1].values.iter().map(|f| jm.commutator(f)).collect())
}

/// Default relative tolerance on the diagonal compatibility residual.
pub const RECURSION_TOL: f64 = 1e-3;

/// s(ξ, t) = exp(tξ^kμ)·s(ξ)·exp(−tξ^kμ), refactorized.
pub fn evolve_scattering(rec: &ScatteringRecord, mu: &DiagonalGenerator, k: usize, t: f64) -> ScatteringRecord {
    let m = mu.entries();
    let nodes = rec
        .nodes
        .iter()
        .map(|node| {
            let w = t * node.xi.powi(k as i32);
            let s = ComplexMatrix::from_fn(rec.n(), |r, c| node.s[(r, c)] * ((m[r] - m[c]) * w).exp());
            ScatteringNode::new(node.xi, s)
        })
        .collect();
    ScatteringRecord { nodes, ..rec.clone() }
}

/// max over ξ of ‖(s(q + dt·[J, F_{k+1}]) − s(q))/dt − σξ^k[μ, s]‖ with σ
/// the convention's flow sign.
#[derive(Clone, Copy, Debug)]
pub struct LinearizationReport {
    pub dt: f64,
    pub residual: f64,
    /// max over ξ of ‖ξ^k[μ, s]‖.
    pub scale: f64,
}

pub fn linearization_check(
    q: &Potential,
    mu: &DiagonalGenerator,
    k: usize,
    dt: f64,
    conv: RecursionConvention,
    cfg: &SpectralConfig,
) -> Result<LinearizationReport> {
    Ok(linearization_sweep(q, mu, k, &[dt], conv, cfg)?[0])
}

/// `linearization_check` for several dt, sharing the unperturbed transform.
pub fn linearization_sweep(
    q: &Potential,
    mu: &DiagonalGenerator,
    k: usize,
    dts: &[f64],
    conv: RecursionConvention,
    cfg: &SpectralConfig,
) -> Result<Vec<LinearizationReport>> {
    if k > 2 {
        return Err(Error::InvalidInput(format!("k = {k} exceeds 2")));
    }
    let j = cfg.j_diag();
    let vel = hierarchy_velocity(q, &j, mu, k, conv, RECURSION_TOL)?;
    let base = forward_scatter(q, cfg)?;
    let mum = ComplexMatrix::from_diag(mu.entries());
    let predicted: Vec<ComplexMatrix> =
        base.nodes.iter().map(|b| mum.commutator(&b.s).scale(C64::new(conv.flow_sign() * b.xi.powi(k as i32), 0.0))).collect();
    let scale = predicted.iter().map(|p| p.norm_fro()).fold(0.0, f64::max);
    dts.iter()
        .map(|&dt| {
            let moved: Vec<ComplexMatrix> = q.values().iter().zip(&vel).map(|(a, v)| a + &v.scale(C64::new(dt, 0.0))).collect();
            let after = forward_scatter(&Potential::new(q.x0(), q.h(), moved)?, cfg)?;
            let residual = base
                .nodes
                .iter()
                .zip(&after.nodes)
                .zip(&predicted)
                .map(|((b, a), p)| (&a.s - &b.s).scale(C64::new(1.0 / dt, 0.0)).dist(p))
                .fold(0.0, f64::max);
            Ok(LinearizationReport { dt, residual, scale })
        })
        .collect()
}

/// Least-squares slope of log residual against log dt.
pub fn observed_order(reports: &[LinearizationReport]) -> f64 {
    let pts: Vec<(f64, f64)> = reports.iter().map(|r| (r.dt.ln(), r.residual.ln())).collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    num / den
}

/// forward_scatter(e^{−dtμ}qe^{dtμ}) against e^{−dtμ}s e^{dtμ}: the exact
/// k = 0 flow, free of the Euler step's O(dt) error.
pub fn conjugation_flow_residual(q: &Potential, mu: &DiagonalGenerator, dt: f64, cfg: &SpectralConfig) -> Result<f64> {
    let m = mu.entries();
    let conj = |a: &ComplexMatrix| ComplexMatrix::from_fn(a.n(), |r, c| a[(r, c)] * (-(m[r] - m[c]) * dt).exp());
    let moved = Potential::new(q.x0(), q.h(), q.values().iter().map(conj).collect())?;
    let base = forward_scatter(q, cfg)?;
    let after = forward_scatter(&moved, cfg)?;
    Ok(base.nodes.iter().zip(&after.nodes).map(|(b, a)| a.s.dist(&conj(&b.s))).fold(0.0, f64::max))
}

/// (1/2πi)∫ξ^k tr(μ log δ(ξ))dξ and its expansion in the action functionals.
#[derive(Clone, Debug)]
pub struct HierarchyHamiltonian {
    /// From the diagonal factors δ = δ₋⁻¹δ₊.
    pub direct: C64,
    /// (1/2πi)Σ c_ν∫ξ^k p_ν dξ.
    pub via_chart: C64,
    /// ∫ξ^k p_ν(s(ξ))dξ for the default schedule.
    pub action_integrals: Vec<C64>,
    pub coefficients: Vec<C64>,
    pub flagged: usize,
}

pub fn hierarchy_hamiltonian(rec: &ScatteringRecord, mu: &DiagonalGenerator, k: usize) -> Result<HierarchyHamiltonian> {
    let n = rec.n();
    let total = rec.nodes.len();
    let flagged = rec.nodes.iter().filter(|n| n.flagged()).count();
    if flagged * 100 > total {
        return Err(Error::FlaggedNodesExceeded { flagged, total });
    }
    let sched = default_schedule(n)?;
    let coefficients = chart_coefficients(mu, &sched);
    let mut xs = Vec::new();
    let mut direct = Vec::new();
    let mut ps: Vec<Vec<C64>> = vec![Vec::new(); sched.len()];
    for node in rec.nodes.iter().filter(|n| !n.flagged()) {
        let f = node.factors.as_ref().expect("unflagged");
        let w = node.xi.powi(k as i32);
        xs.push(node.xi);
        direct.push(w * mu.entries().iter().zip(&f.delta).map(|(m, d)| m * d.ln()).sum::<C64>());
        for (nu, p) in momenta(&node.s, &sched)?.into_iter().enumerate() {
            ps[nu].push(w * p);
        }
    }
    let norm = 1.0 / (2.0 * PI * I);
    let action_integrals: Vec<C64> = ps.iter().map(|p| trapezoid_nonuniform(&xs, p)).collect();
    let via_chart = norm * coefficients.iter().zip(&action_integrals).map(|(c, a)| c * a).sum::<C64>();
    Ok(HierarchyHamiltonian {
        direct: norm * trapezoid_nonuniform(&xs, &direct),
        via_chart,
        action_integrals,
        coefficients,
        flagged,
    })
}

/// Pointwise algebraic content of the scattering-side brackets.
#[derive(Clone, Copy, Debug, Default)]
pub struct BracketReport {
    /// max |[a_jk, a_lm] − 4πi(a_jk, a_lm)| over nodes and coordinate pairs.
    pub local_vs_quadratic: f64,
    /// max |⟨p_ν, a_jk⟩(s, s)| over nodes, ν and (j, k).
    pub momentum_nonlocal: f64,
    /// max |[p̃_μ, q̃_ν] − δ_μν| for the renormalized chart p̃ = p/2,
    /// q̃ = q/2πi, over nodes where the chart exists.
    pub renormalized_canonical: f64,
    pub chart_nodes: usize,
    pub nodes: usize,
}

pub fn pointwise_bracket_check(rec: &ScatteringRecord) -> Result<BracketReport> {
    let n = rec.n();
    let sched = default_schedule(n)?;
    let mut r = BracketReport { nodes: rec.nodes.len(), ..Default::default() };
    let units: Vec<ComplexMatrix> = (0..n * n).map(|i| ComplexMatrix::unit(n, i / n, i % n)).collect();
    for node in &rec.nodes {
        let s = &node.s;
        for (a, ua) in units.iter().enumerate() {
            for (b, ub) in units.iter().enumerate() {
                let quad = bracket_from_gradients(ua, ub, s);
                let local = local_bracket_coordinates(s, (a / n, a % n), (b / n, b % n));
                r.local_vs_quadratic = r.local_vs_quadratic.max((local - 4.0 * PI * I * quad).norm());
            }
        }
        if let Ok(gp) = momentum_gradients(s, &sched) {
            for g in &gp {
                for u in &units {
                    r.momentum_nonlocal = r.momentum_nonlocal.max(nonlocal_bracket_from_gradients(g, u, s, s).norm());
                }
            }
        }
        if darboux_coordinates(s, &sched).is_ok() {
            let (gp, gq) = chart_gradients(s, &sched)?;
            r.chart_nodes += 1;
            for (mu_i, p) in gp.iter().enumerate() {
                for (nu_i, q) in gq.iter().enumerate() {
                    let renorm = 4.0 * PI * I * bracket_from_gradients(&p.scale(C64::new(0.5, 0.0)), &q.scale(1.0 / (2.0 * PI * I)), s);
                    let expect = if mu_i == nu_i { 1.0 } else { 0.0 };
                    r.renormalized_canonical = r.renormalized_canonical.max((renorm - expect).norm());
                }
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(n: usize, nodes: usize) -> SpectralConfig {
        let mut c = SpectralConfig::standard(n).unwrap();
        c.xi = (0..nodes).map(|i| -3.0 + 6.0 * i as f64 / (nodes - 1) as f64).collect();
        c
    }

    fn bump2(eps: f64) -> Potential {
        let c = ComplexMatrix::from_fn(2, |j, k| match (j, k) {
            (0, 1) => C64::new(eps, 0.5 * eps),
            (1, 0) => C64::new(-0.3 * eps, eps),
            _ => ZERO,
        });
        Potential::gaussian(&c, 12.0, 1.0 / 64.0).unwrap()
    }

    #[test]
    fn zero_potential_gives_identity() {
        let q = Potential::zero(3, 12.0, 1.0 / 64.0).unwrap();
        let rec = forward_scatter(&q, &small_cfg(3, 9)).unwrap();
        for node in &rec.nodes {
            assert!(node.s.dist(&ComplexMatrix::identity(3)) < 1e-12);
        }
    }

    #[test]
    fn born_term_is_first_order() {
        let cfg = small_cfg(2, 9);
        for eps in [1e-2, 1e-3] {
            let q = bump2(eps);
            let rec = forward_scatter(&q, &cfg).unwrap();
            assert!(born_residual(&q, &rec) <= 5.0 * eps * eps, "{eps}");
        }
    }

    #[test]
    fn skew_potential_gives_unitary_data() {
        let q = Potential::three_wave_demo(0.2, 12.0, 1.0 / 64.0).unwrap();
        assert!(q.is_skew());
        let rec = forward_scatter(&q, &small_cfg(3, 9)).unwrap();
        let r = rec.residuals().unwrap();
        assert!(r.det < 1e-8 && r.unitarity < 1e-7 && r.reduction < 1e-7 && r.factorization < 1e-8, "{r:?}");
        assert_eq!(r.flagged, 0);
    }

    #[test]
    fn interpolation_is_exact_on_cubics() {
        let vals: Vec<ComplexMatrix> = (0..9)
            .map(|i| {
                let x = -1.0 + 0.25 * i as f64;
                let mut m = ComplexMatrix::zeros(2);
                m[(0, 1)] = C64::new(x * x * x - x, 0.0);
                m
            })
            .collect();
        let mut q = Potential { x0: -1.0, h: 0.25, values: vals, skew: false };
        q.skew = false;
        for x in [-0.9, -0.3, 0.1, 0.77, 0.95] {
            assert!((q.at(x)[(0, 1)].re - (x * x * x - x)).abs() < 1e-14);
        }
    }

    #[test]
    fn first_hierarchy_term_2x2() {
        let q = bump2(0.1);
        let mu = DiagonalGenerator::new(vec![C64::new(0.0, 1.0), C64::new(0.0, -1.0)]).unwrap();
        let j = [C64::new(0.0, 0.5), C64::new(0.0, -0.5)];
        for (conv, sign) in [(RecursionConvention::Literal, 1.0), (RecursionConvention::Corrected, -1.0)] {
            let terms = hierarchy_terms(&q, &j, &mu, 2, conv, RECURSION_TOL).unwrap();
            assert_eq!(terms[0].values[100], ComplexMatrix::from_diag(mu.entries()));
            for (i, qi) in q.values().iter().enumerate() {
                // [J, F₁] = ±[q, μ]: (F₁)₁₂ = ±q₁₂(μ₂ − μ₁)/(J₁ − J₂)
                let f = &terms[1].values[i];
                let e12 = sign * qi[(0, 1)] * (mu.entries()[1] - mu.entries()[0]) / (j[0] - j[1]);
                let e21 = sign * qi[(1, 0)] * (mu.entries()[0] - mu.entries()[1]) / (j[1] - j[0]);
                assert!((f[(0, 1)] - e12).norm() < 1e-15 && (f[(1, 0)] - e21).norm() < 1e-15);
                assert_eq!(f[(0, 0)], ZERO);
            }
            assert!(terms[1].compatibility_residual < 1e-3);
        }
        let zero = Potential::zero(2, 12.0, 1.0 / 64.0).unwrap();
        let t0 = hierarchy_terms(&zero, &j, &mu, 3, RecursionConvention::Corrected, RECURSION_TOL).unwrap();
        assert!(t0[1..].iter().all(|t| t.values.iter().all(|v| v.max_abs() < 1e-13)));
    }

    #[test]
    fn evolution_preserves_momenta_and_hamiltonian() {
        let q = Potential::three_wave_demo(0.2, 12.0, 1.0 / 64.0).unwrap();
        let rec = forward_scatter(&q, &small_cfg(3, 17)).unwrap();
        let mu = DiagonalGenerator::new(vec![C64::new(0.0, 1.0), C64::new(0.0, 0.5), C64::new(0.0, -1.5)]).unwrap();
        let h0 = hierarchy_hamiltonian(&rec, &mu, 1).unwrap();
        assert!((h0.direct - h0.via_chart).norm() < 1e-8);
        let later = evolve_scattering(&rec, &mu, 1, 0.7);
        let sched = default_schedule(3).unwrap();
        for (a, b) in rec.nodes.iter().zip(&later.nodes) {
            let (pa, pb) = (momenta(&a.s, &sched).unwrap(), momenta(&b.s, &sched).unwrap());
            assert!(pa.iter().zip(&pb).all(|(x, y)| (x - y).norm() < 1e-8));
        }
        let h1 = hierarchy_hamiltonian(&later, &mu, 1).unwrap();
        assert!((h1.direct - h0.direct).norm() < 1e-8);
        let same = evolve_scattering(&rec, &mu, 1, 0.0);
        assert!(rec.nodes.iter().zip(&same.nodes).all(|(a, b)| a.s == b.s));
    }

    #[test]
    fn k0_flow_sign() {
        let q = bump2(0.2);
        let cfg = small_cfg(2, 5);
        let mu = DiagonalGenerator::new(vec![C64::new(0.3, 0.2), C64::new(-0.3, -0.2)]).unwrap();
        assert!(conjugation_flow_residual(&q, &mu, 1e-2, &cfg).unwrap() < 1e-6);
        for conv in [RecursionConvention::Literal, RecursionConvention::Corrected] {
            let reports = linearization_sweep(&q, &mu, 0, &[1e-3, 1e-4], conv, &cfg).unwrap();
            assert!(reports[1].residual < 1e-3 * reports[1].scale, "{reports:?}");
            assert!((observed_order(&reports) - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn k1_flow_linearizes_with_corrected_recursion() {
        let q = Potential::three_wave_demo(0.2, 12.0, 1.0 / 64.0).unwrap();
        let cfg = small_cfg(3, 7);
        let mu = DiagonalGenerator::new(vec![C64::new(0.0, 1.0), C64::new(0.0, 0.5), C64::new(0.0, -1.5)]).unwrap();
        let good = linearization_sweep(&q, &mu, 1, &[1e-3, 1e-4], RecursionConvention::Corrected, &cfg).unwrap();
        assert!(good[1].residual < 1e-3 && (observed_order(&good) - 1.0).abs() < 0.1, "{good:?}");
        let literal = linearization_sweep(&q, &mu, 1, &[1e-3, 1e-4], RecursionConvention::Literal, &cfg).unwrap();
        assert!(literal[1].residual > 1e-2, "{literal:?}");
    }

    #[test]
    fn bracket_report_on_demo() {
        let q = Potential::three_wave_demo(0.2, 12.0, 1.0 / 64.0).unwrap();
        let rec = forward_scatter(&q, &small_cfg(3, 5)).unwrap();
        let r = pointwise_bracket_check(&rec).unwrap();
        assert!(r.local_vs_quadratic < 1e-12 && r.momentum_nonlocal < 1e-10, "{r:?}");
        assert!(r.chart_nodes > 0 && r.renormalized_canonical < 1e-8, "{r:?}");
    }

    #[test]
    fn json_round_trip_and_norm_cap() {
        let q = bump2(0.1);
        let back = Potential::from_json(&q.to_json_value().to_string()).unwrap();
        assert_eq!(back, q);
        let big = bump2(20.0);
        assert!(matches!(forward_scatter(&big, &small_cfg(2, 3)), Err(Error::NormTooLarge { .. })));
        assert!(SpectralConfig::new(vec![0.0, 1.0], -1.0, 1.0, 3).is_err());
    }
}
