use integrable_core::factor::{block_reduce, default_schedule, factorize, PermutationSchedule};
use integrable_core::sample::Sampler;
use integrable_core::{ComplexMatrix, C64};
use proptest::prelude::*;

fn schur_block(a: &ComplexMatrix, sched: &PermutationSchedule, nu: usize) -> ComplexMatrix {
    let b = sched.conjugate(a, nu);
    let k = sched.positions()[nu];
    let blk = |r0: usize, c0: usize, rows: usize, cols: usize| {
        let n = rows.max(cols);
        ComplexMatrix::from_fn(n, |r, c| if r < rows && c < cols { b[(r0 + r, c0 + c)] } else { C64::new(0.0, 0.0) })
    };
    let d = blk(k, k, 2, 2);
    if k == 0 {
        return d;
    }
    // D − C·A⁻¹·B with A = b[..k, ..k], B = b[..k, k..k+2], C = b[k..k+2, ..k].
    let a_inv = blk(0, 0, k, k).inverse().unwrap();
    let mut out = d;
    for r in 0..2 {
        for c in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    acc += b[(k + r, i)] * a_inv[(i, j)] * b[(j, k + c)];
                }
            }
            out[(r, c)] -= acc;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn block_reduce_is_a_schur_complement(seed in any::<u64>(), n in 2usize..=4) {
        let mut s = Sampler::new(seed, "schur", 0);
        let a = s.gl_star(n);
        let sched = default_schedule(n).unwrap();
        for nu in 0..sched.len() {
            let Ok(m) = block_reduce(&a, &sched, nu) else { continue };
            let oracle = schur_block(&a, &sched, nu);
            for r in 0..2 {
                for c in 0..2 {
                    prop_assert!((m[r][c] - oracle[(r, c)]).norm() <= 1e-10 * (1.0 + oracle.max_abs()));
                }
            }
        }
    }

    #[test]
    fn factorization_is_unique(seed in any::<u64>(), n in 2usize..=4) {
        let mut s = Sampler::new(seed, "unique", 0);
        let a = s.gl_star(n);
        let f = factorize(&a).unwrap();
        prop_assert!(f.residual_plus(&a) <= 1e-12 * a.norm_fro());
        prop_assert!(f.residual_minus(&a) <= 1e-12 * a.norm_fro());
        let rebuilt = &f.a_plus * &f.v_plus.inverse().unwrap();
        let g = factorize(&rebuilt).unwrap();
        prop_assert!(g.a_plus.dist(&f.a_plus) <= 1e-10 && g.v_minus.dist(&f.v_minus) <= 1e-10);
    }

    #[test]
    fn unitary_factors_are_paired(seed in any::<u64>(), n in 2usize..=4) {
        let mut s = Sampler::new(seed, "unitary-factors", 0);
        let u = s.special_unitary(n);
        let Ok(f) = factorize(&u) else { return Ok(()) };
        let tol = 1e-8;
        prop_assert!(f.a_plus.dist(&f.a_minus.inverse().unwrap().adjoint()) <= tol * f.a_plus.norm_fro().max(1.0));
        prop_assert!(f.v_plus.dist(&f.v_minus.inverse().unwrap().adjoint()) <= tol * f.v_plus.norm_fro().max(1.0));
    }
}

#[test]
fn final_schedule_matrix_is_antidiagonal() {
    for n in 2..=6 {
        let sched = default_schedule(n).unwrap();
        assert_eq!(sched.partial_matrix(sched.len()), ComplexMatrix::antidiagonal(n));
    }
}
