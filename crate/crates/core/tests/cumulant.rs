use cascadia::cumulant::reference::solve_ce2_whole_system;
use cascadia::cumulant::{solve_ce2, Pauli};
use cascadia::exact::{exact_steady_state_with, DensityState};
use cascadia::{ModelParams, ModelTag, SolverOptions};

fn tight() -> SolverOptions {
    SolverOptions::default().with_residual(1e-12)
}

fn exact(p: &ModelParams) -> DensityState {
    exact_steady_state_with(ModelTag::Uwm, p, None, 1e-12).unwrap()
}

// Two cascaded sites have no three-body moments, so the truncation is exact.
#[test]
fn two_sites_match_master_equation() {
    for beta in [0.25, 0.05] {
        for s0 in [0.5, 4.0, 20.0] {
            let p = ModelParams::from_beta(beta, 2, s0).unwrap();
            let ce = solve_ce2(&p, 2, &tight()).unwrap();
            let rho = exact(&p);
            for k in 0..2 {
                let s = rho.moment(&[(k, Pauli::Minus)]);
                let z = rho.moment(&[(k, Pauli::Z)]).re;
                assert!((ce.sigma_minus[k] - s).norm() < 1e-8, "beta {beta} s0 {s0} site {k}");
                assert!((ce.sigma_z[k] - z).abs() < 1e-8);
            }
            for a in Pauli::ALL {
                for b in Pauli::ALL {
                    let m = rho.moment(&[(0, a), (1, b)]);
                    let c = ce.moment(0, a, 1, b).unwrap();
                    assert!((m - c).norm() < 1e-8, "beta {beta} s0 {s0} {a:?}{b:?}: {m} vs {c}");
                }
            }
        }
    }
}

#[test]
fn block_solver_matches_whole_system_integration() {
    for (beta, n, s0) in [(0.1, 6, 3.0), (0.2, 10, 12.0), (0.05, 4, 0.7)] {
        let p = ModelParams::from_beta(beta, n, s0).unwrap();
        let fast = solve_ce2(&p, n, &tight()).unwrap();
        let slow = solve_ce2_whole_system(&p, n, &tight()).unwrap();
        for i in 0..n {
            assert!((fast.sigma_minus[i] - slow.sigma_minus[i]).norm() < 1e-9);
            assert!((fast.sigma_z[i] - slow.sigma_z[i]).abs() < 1e-9);
            for j in 0..n {
                if i != j {
                    let a = fast.sigma_xx_cumulant(i, j).unwrap();
                    let b = slow.sigma_xx_cumulant(i, j).unwrap();
                    assert!((a - b).abs() < 1e-9, "n {n} ({i},{j}): {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn detuned_chain_matches_whole_system_integration() {
    let mut p = ModelParams::from_beta(0.15, 5, 5.0).unwrap();
    p.detuning = 0.7;
    let fast = solve_ce2(&p, 5, &tight()).unwrap();
    let slow = solve_ce2_whole_system(&p, 5, &tight()).unwrap();
    for a in Pauli::ALL {
        for b in Pauli::ALL {
            let x = fast.moment(1, a, 4, b).unwrap();
            let y = slow.moment(1, a, 4, b).unwrap();
            assert!((x - y).norm() < 1e-9);
        }
    }
}

#[test]
fn three_sites_close_to_master_equation() {
    // first site where the truncation bites; agreement is approximate
    let p = ModelParams::from_beta(0.05, 3, 2.0).unwrap();
    let ce = solve_ce2(&p, 3, &tight()).unwrap();
    let rho = exact(&p);
    let z = rho.moment(&[(2, Pauli::Z)]).re;
    assert!((ce.sigma_z[2] - z).abs() < 1e-4);
}
