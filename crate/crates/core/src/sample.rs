//! Reproducible random points and tangent vectors.
//!
//! Every stream is keyed by `(seed, suite, trial)`, so a trial draws the
//! same numbers whether suites run serially or in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::{principal_minors, ComplexMatrix, C64, ZERO};

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64, suite: &str, trial: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&fnv1a(suite).to_le_bytes());
        key[16..24].copy_from_slice(&trial.to_le_bytes());
        Self { rng: ChaCha8Rng::from_seed(key) }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// Uniform point of the complex disc of the given radius.
    pub fn disc(&mut self, radius: f64) -> C64 {
        let r = radius * self.uniform().sqrt();
        C64::from_polar(r, std::f64::consts::TAU * self.uniform())
    }

    /// Standard complex normal (unit variance per component).
    pub fn normal(&mut self) -> C64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        C64::from_polar((-2.0 * u1.ln()).sqrt(), std::f64::consts::TAU * u2)
    }

    /// Identity plus disc(0.4) noise, resampled until every principal minor
    /// has magnitude at least 1e-3.
    pub fn gl_star(&mut self, n: usize) -> ComplexMatrix {
        loop {
            let a = ComplexMatrix::from_fn(n, |j, k| {
                let d = self.disc(0.4);
                if j == k {
                    d + 1.0
                } else {
                    d
                }
            });
            let (up, low) = principal_minors(&a);
            if up.iter().chain(&low).all(|m| m.norm() >= 1e-3) {
                return a;
            }
        }
    }

    /// A GL_* sample rescaled to determinant one.
    pub fn sl(&mut self, n: usize) -> ComplexMatrix {
        let a = self.gl_star(n);
        let s = a.det().powf(-1.0 / n as f64);
        a.scale(s)
    }

    /// Matrix with standard complex normal entries.
    pub fn tangent(&mut self, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, |_, _| self.normal())
    }

    /// Traceless skew-hermitian matrix with normal entries.
    pub fn skew_hermitian(&mut self, n: usize) -> ComplexMatrix {
        let g = self.tangent(n);
        let mut x = &g - &g.adjoint();
        let t = x.trace() / n as f64;
        for j in 0..n {
            x[(j, j)] -= t;
        }
        x.scale(C64::new(0.5, 0.0))
    }

    /// Haar-distributed element of SU(n) (Gram–Schmidt on a Ginibre matrix,
    /// then the determinant phase removed).
    pub fn special_unitary(&mut self, n: usize) -> ComplexMatrix {
        let g = self.tangent(n);
        let mut q = ComplexMatrix::zeros(n);
        for c in 0..n {
            let mut v: Vec<C64> = (0..n).map(|r| g[(r, c)]).collect();
            for p in 0..c {
                let dot: C64 = (0..n).map(|r| q[(r, p)].conj() * v[r]).sum();
                for r in 0..n {
                    v[r] -= dot * q[(r, p)];
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for r in 0..n {
                q[(r, c)] = v[r] / norm;
            }
        }
        let phase = q.det().powf(-1.0 / n as f64);
        q.scale(phase)
    }

    /// Diagonal trace-zero generator with entries in the unit disc.
    pub fn generator(&mut self, n: usize, skew: bool) -> Vec<C64> {
        let mut mu: Vec<C64> = (0..n)
            .map(|_| if skew { C64::new(0.0, self.range(-1.0, 1.0)) } else { self.disc(1.0) })
            .collect();
        let mean: C64 = mu.iter().sum::<C64>() / n as f64;
        mu.iter_mut().for_each(|m| *m -= mean);
        if mu.iter().all(|m| *m == ZERO) {
            mu[0] = C64::new(1.0, 0.0);
            mu[n - 1] = C64::new(-1.0, 0.0);
        }
        mu
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyed_streams_are_reproducible() {
        let a = Sampler::new(1, "form", 3).gl_star(3);
        let b = Sampler::new(1, "form", 3).gl_star(3);
        let c = Sampler::new(1, "form", 4).gl_star(3);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn special_unitary_is_unitary() {
        let mut s = Sampler::new(2, "su", 0);
        for n in 2..=4 {
            let u = s.special_unitary(n);
            assert!((&u * &u.adjoint()).dist(&ComplexMatrix::identity(n)) < 1e-13);
            assert!((u.det() - 1.0).norm() < 1e-13);
        }
    }
}
