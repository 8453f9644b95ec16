//! Carlson symmetric elliptic integrals for complex arguments, by the
//! duplication theorem.
//!
//! Principal square roots are used throughout, so the results are the
//! principal-value integrals; callers must keep their arguments off the
//! closed negative real axis (see [`path_clear`]).

use crate::matrix::C64;

/// Stop duplicating once every argument is within this relative distance
/// of the mean; the truncated series is then accurate to ~TOL⁶.
const TOL: f64 = 1e-4;
const MAX_ITER: usize = 100;

pub fn rf(x: C64, y: C64, z: C64) -> C64 {
    let (mut x, mut y, mut z) = (x, y, z);
    let mut a = (x + y + z) / 3.0;
    for _ in 0..MAX_ITER {
        if (a - x).norm().max((a - y).norm()).max((a - z).norm()) < TOL * a.norm() {
            break;
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * sy + sx * sz + sy * sz;
        x = (x + lam) * 0.25;
        y = (y + lam) * 0.25;
        z = (z + lam) * 0.25;
        a = (x + y + z) / 3.0;
    }
    let dx = 1.0 - x / a;
    let dy = 1.0 - y / a;
    let dz = -dx - dy;
    let e2 = dx * dy - dz * dz;
    let e3 = dx * dy * dz;
    (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / a.sqrt()
}

pub fn rc(x: C64, y: C64) -> C64 {
    rf(x, y, y)
}

pub fn rj(x: C64, y: C64, z: C64, p: C64) -> C64 {
    let (mut x, mut y, mut z, mut p) = (x, y, z, p);
    let mut sum = C64::new(0.0, 0.0);
    let mut fac = 1.0;
    let mut a = (x + y + z + 2.0 * p) / 5.0;
    for _ in 0..MAX_ITER {
        let spread = (a - x).norm().max((a - y).norm()).max((a - z).norm()).max((a - p).norm());
        if spread < TOL * a.norm() {
            break;
        }
        let (sx, sy, sz, sp) = (x.sqrt(), y.sqrt(), z.sqrt(), p.sqrt());
        let lam = sx * sy + sx * sz + sy * sz;
        let d = (sp + sx) * (sp + sy) * (sp + sz);
        let e = (p - x) * (p - y) * (p - z);
        sum += fac * 6.0 * rc(C64::new(1.0, 0.0), 1.0 + e / (d * d)) / d;
        fac *= 0.25;
        x = (x + lam) * 0.25;
        y = (y + lam) * 0.25;
        z = (z + lam) * 0.25;
        p = (p + lam) * 0.25;
        a = (x + y + z + 2.0 * p) / 5.0;
    }
    let dx = 1.0 - x / a;
    let dy = 1.0 - y / a;
    let dz = 1.0 - z / a;
    let dp = -(dx + dy + dz) / 2.0;
    let e2 = dx * dy + dx * dz + dy * dz - 3.0 * dp * dp;
    let e3 = dx * dy * dz + 2.0 * e2 * dp + 4.0 * dp * dp * dp;
    let e4 = (2.0 * dx * dy * dz + e2 * dp + 3.0 * dp * dp * dp) * dp;
    let e5 = dx * dy * dz * dp * dp;
    let series = 1.0 - 3.0 * e2 / 14.0 + e3 / 6.0 + 9.0 * e2 * e2 / 88.0 - 3.0 * e4 / 22.0 - 9.0 * e2 * e3 / 52.0
        + 3.0 * e5 / 26.0;
    sum + fac * series / (a * a.sqrt())
}

/// True if 1 − s·w stays off the closed negative real axis for s ∈ [0, 1].
pub fn path_clear(w: C64) -> bool {
    // 1 − s·w is real only where s·Im w = 0; for real w it is ≤ 0 iff s·w ≥ 1.
    if w.im != 0.0 {
        return true;
    }
    w.re < 1.0
}

/// Incomplete integral of the first kind ∫₀^z dt/√((1−t²)(1−m t²)) along
/// the straight segment, as z·R_F(1−z², 1−m z², 1).
pub fn first_kind(z: C64, m: C64) -> C64 {
    let z2 = z * z;
    z * rf(1.0 - z2, 1.0 - m * z2, C64::new(1.0, 0.0))
}

/// Incomplete integral of the third kind ∫₀^z dt/((1−n t²)√((1−t²)(1−m t²))).
pub fn third_kind(z: C64, m: C64, n: C64) -> C64 {
    let z2 = z * z;
    let one = C64::new(1.0, 0.0);
    let x = 1.0 - z2;
    let y = 1.0 - m * z2;
    z * rf(x, y, one) + n / 3.0 * z * z2 * rj(x, y, one, 1.0 - n * z2)
}
