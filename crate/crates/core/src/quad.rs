//! Adaptive Gauss–Kronrod (7/15) quadrature of `num(s)/h(s)` on a real
//! interval, where `h` is the continuous branch of √(radicand(s)) fixed by
//! its value at the left endpoint.
//!
//! Panels are processed depth-first, left to right, and the nodes of each
//! panel in increasing order, so the branch of the square root is always
//! continued from a nearby known value.

use crate::matrix::C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a branch-tracked integration.
#[derive(Clone, Copy, Debug)]
pub struct BranchIntegral {
    pub value: C64,
    pub error: f64,
    /// Branch of the square root reached at the right endpoint.
    pub h_end: C64,
    pub panels: usize,
}

fn nearest_root(radicand: C64, previous: C64) -> C64 {
    let r = radicand.sqrt();
    if (r - previous).norm() <= (r + previous).norm() {
        r
    } else {
        -r
    }
}

struct Tracker<'a, N, R> {
    num: &'a N,
    radicand: &'a R,
    tol: f64,
    panels: usize,
    max_depth: usize,
}

impl<N: Fn(f64) -> C64, R: Fn(f64) -> C64> Tracker<'_, N, R> {
    /// Returns (Kronrod value, error estimate, branch at b).
    fn panel(&mut self, a: f64, b: f64, h_a: C64) -> (C64, f64, C64) {
        self.panels += 1;
        let c = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        // Abscissae in increasing order: −x_0 … −x_6, 0, x_6 … x_0.
        let mut nodes: Vec<(f64, f64, Option<f64>)> = Vec::with_capacity(15);
        for i in 0..7 {
            nodes.push((-XGK[i], WGK[i], if i % 2 == 1 { Some(WG[i / 2]) } else { None }));
        }
        nodes.push((0.0, WGK[7], Some(WG[3])));
        for i in (0..7).rev() {
            nodes.push((XGK[i], WGK[i], if i % 2 == 1 { Some(WG[i / 2]) } else { None }));
        }
        let mut prev = h_a;
        let mut kron = C64::new(0.0, 0.0);
        let mut gauss = C64::new(0.0, 0.0);
        for (x, wk, wg) in nodes {
            let s = c + half * x;
            let h = nearest_root((self.radicand)(s), prev);
            prev = h;
            let f = (self.num)(s) / h;
            kron += f * wk;
            if let Some(w) = wg {
                gauss += f * w;
            }
        }
        let h_b = nearest_root((self.radicand)(b), prev);
        (kron * half, ((kron - gauss) * half).norm(), h_b)
    }

    fn recurse(&mut self, a: f64, b: f64, h_a: C64, depth: usize) -> (C64, f64, C64) {
        let (v, e, h_b) = self.panel(a, b, h_a);
        if e <= self.tol * v.norm().max(1e-300) || e < 1e-15 || depth >= self.max_depth {
            return (v, e, h_b);
        }
        let m = 0.5 * (a + b);
        let (v1, e1, h_m) = self.recurse(a, m, h_a, depth + 1);
        let (v2, e2, h_b) = self.recurse(m, b, h_m, depth + 1);
        (v1 + v2, e1 + e2, h_b)
    }
}

/// ∫_a^b num(s)/h(s) ds with h² = radicand and h(a) = `h_start`.
pub fn integrate_over_sqrt<N, R>(num: N, radicand: R, h_start: C64, a: f64, b: f64, rel_tol: f64) -> BranchIntegral
where
    N: Fn(f64) -> C64,
    R: Fn(f64) -> C64,
{
    let mut t = Tracker { num: &num, radicand: &radicand, tol: rel_tol, panels: 0, max_depth: 40 };
    let h0 = nearest_root(radicand(a), h_start);
    let (value, error, h_end) = t.recurse(a, b, h0, 0);
    BranchIntegral { value, error, h_end, panels: t.panels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate_over_sqrt(|s| C64::new(s * s, 0.0), |_| C64::new(1.0, 0.0), C64::new(1.0, 0.0), 0.0, 2.0, 1e-12);
        assert!((r.value.re - 8.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn follows_branch_around_origin() {
        // h(s) = e^{iπs}: radicand e^{2πis} winds once, h must end at −1.
        let rad = |s: f64| C64::from_polar(1.0, std::f64::consts::TAU * s);
        let r = integrate_over_sqrt(|_| C64::new(1.0, 0.0), rad, C64::new(1.0, 0.0), 0.0, 1.0, 1e-12);
        assert!((r.h_end + 1.0).norm() < 1e-12);
        // ∫₀¹ e^{−iπs} ds = 2/(iπ)
        let exact = C64::new(0.0, -2.0 / std::f64::consts::PI);
        assert!((r.value - exact).norm() < 1e-12);
    }
}
