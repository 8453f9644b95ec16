use integrable_core::darboux::{darboux_coordinates, unwrap_log};
use integrable_core::factor::default_schedule;
use integrable_core::poisson::{chart_coefficients, DiagonalGenerator};
use integrable_core::scattering::{evolve_scattering, forward_scatter, hierarchy_hamiltonian, Potential, SpectralConfig};
use integrable_core::C64;

fn cfg(n: usize, nodes: usize) -> SpectralConfig {
    let mut c = SpectralConfig::standard(n).unwrap();
    c.xi = (0..nodes).map(|i| -3.0 + 6.0 * i as f64 / (nodes - 1) as f64).collect();
    c
}

fn mu3() -> DiagonalGenerator {
    DiagonalGenerator::new(vec![C64::new(0.0, 0.8), C64::new(0.0, 0.4), C64::new(0.0, -1.2)]).unwrap()
}

#[test]
fn self_convergence_under_refinement() {
    let coarse_q = Potential::three_wave_demo(0.2, 12.0, 1.0 / 32.0).unwrap();
    let fine_q = Potential::three_wave_demo(0.2, 12.0, 1.0 / 64.0).unwrap();
    let finer_q = Potential::three_wave_demo(0.2, 12.0, 1.0 / 128.0).unwrap();
    let c = cfg(3, 5);
    let run = |q: &Potential, tol_scale: f64| {
        let mut cc = c.clone();
        cc.ode.rtol *= tol_scale;
        cc.ode.atol *= tol_scale;
        forward_scatter(q, &cc).unwrap()
    };
    let (a, b, d) = (run(&coarse_q, 1.0), run(&fine_q, 1.0 / 16.0), run(&finer_q, 1.0 / 256.0));
    let e1 = a.nodes.iter().zip(&d.nodes).map(|(x, y)| x.s.dist(&y.s)).fold(0.0, f64::max);
    let e2 = b.nodes.iter().zip(&d.nodes).map(|(x, y)| x.s.dist(&y.s)).fold(0.0, f64::max);
    // Halving h must reduce the error by at least a quarter of the fourth-order factor 16.
    assert!(e2 <= e1 / 4.0 || e2 < 1e-11, "coarse {e1:e}, fine {e2:e}");
}

#[test]
fn det_is_one_and_skew_data_is_unitary() {
    let q = Potential::three_wave_demo(0.5, 12.0, 1.0 / 64.0).unwrap();
    let rec = forward_scatter(&q, &cfg(3, 13)).unwrap();
    let r = rec.residuals().unwrap();
    assert!(r.det <= 1e-8 && r.unitarity <= 1e-7 && r.reduction <= 1e-7, "{r:?}");
}

#[test]
fn angles_advance_linearly_under_evolution() {
    let q = Potential::three_wave_demo(0.2, 12.0, 1.0 / 64.0).unwrap();
    let rec = forward_scatter(&q, &cfg(3, 9)).unwrap();
    let mu = mu3();
    let sched = default_schedule(3).unwrap();
    let c = chart_coefficients(&mu, &sched);
    for k in 0..=2 {
        let t = 0.37;
        let later = evolve_scattering(&rec, &mu, k, t);
        for (a, b) in rec.nodes.iter().zip(&later.nodes) {
            let (ca, cb) = (darboux_coordinates(&a.s, &sched).unwrap(), darboux_coordinates(&b.s, &sched).unwrap());
            for nu in 0..sched.len() {
                assert!((ca.p[nu] - cb.p[nu]).norm() <= 1e-8);
                let expect = ca.q[nu] + 2.0 * t * a.xi.powi(k as i32) * c[nu];
                assert!((unwrap_log(expect, cb.q[nu]) - expect).norm() <= 1e-8, "k = {k}, ν = {nu}");
            }
        }
    }
}

#[test]
fn hamiltonians_are_conserved_by_every_flow() {
    let q = Potential::three_wave_demo(0.2, 12.0, 1.0 / 64.0).unwrap();
    let rec = forward_scatter(&q, &cfg(3, 33)).unwrap();
    let mu = mu3();
    let other = DiagonalGenerator::new(vec![C64::new(0.0, -0.3), C64::new(0.0, 1.0), C64::new(0.0, -0.7)]).unwrap();
    for k in 0..=2 {
        let h0 = hierarchy_hamiltonian(&rec, &mu, k).unwrap();
        assert!((h0.direct - h0.via_chart).norm() <= 1e-8 * h0.direct.norm().max(1.0));
        for (flow_k, gen) in [(0, &other), (1, &mu), (2, &other)] {
            let later = evolve_scattering(&rec, gen, flow_k, 1.3);
            let h1 = hierarchy_hamiltonian(&later, &mu, k).unwrap();
            assert!((h1.direct - h0.direct).norm() <= 1e-8 * h0.direct.norm().max(1.0));
        }
    }
}
