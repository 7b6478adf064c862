use gpelab_core::energy::{Problem, ProblemForm};
use gpelab_core::grid::GridSpec;
use gpelab_core::potential::PotentialSpec;
use gpelab_core::experiments::{peak_location, density};
use gpelab_core::solver::{solve_scalar, Component, InitStrategy, SolverParams};

fn main() {
    let grid = GridSpec::new(1, 16.0, 321).unwrap();
    let p = Problem {
        mu1: 1.0, mu2: 2.0, beta: 3.0, eps: 1.0,
        a: PotentialSpec::Constant { tau: 1.0 },
        b: PotentialSpec::Constant { tau: 1.0 },
        grid, form: ProblemForm::Limit,
    };
    for seed in [11u64, 977] {
        let sp = SolverParams {
            tol_residual: 1e-10, max_iters: 120_000, restarts: 0,
            init: InitStrategy::RandomPositive { seed },
            ..SolverParams::default()
        };
        let u = solve_scalar(&p, Component::U, &sp).unwrap();
        let v = solve_scalar(&p, Component::V, &sp).unwrap();
        let pu = peak_location(&density(&u.state));
        let pv = peak_location(&density(&v.state));
        println!("seed {seed}: U peak {:.6} E {:.9} iters {} | V peak {:.6} E {:.9} iters {}",
            pu[0], u.breakdown.total, u.iterations, pv[0], v.breakdown.total, v.iterations);
    }
}
