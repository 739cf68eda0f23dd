//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p weyl-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use weyl_core::suites::{
    adding, appendix_bounds, d_squared, degree1_base_case, invariance, lower_degree, m_invariant_dist_bound,
    oracle_equivalence, rank1_solver, sobolev_ratio, splitting, top_coeff_trends, top_degree, Check,
};

const SEED: u64 = 20_241_015;
const DIMS: [usize; 3] = [3, 4, 5];

struct Outcome {
    id: usize,
    title: &'static str,
    checks: Vec<Check>,
    seconds: f64,
}

fn run(id: usize, title: &'static str, body: impl FnOnce() -> Vec<Check>) -> Outcome {
    let start = Instant::now();
    let checks = body();
    Outcome {
        id,
        title,
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn main() -> ExitCode {
    // Criteria 1 and 2 share the 30-per-dimension spec ensemble.
    let outcomes = vec![
        run(1, "oracle equivalence (recursion vs path sum)", || {
            vec![oracle_equivalence(SEED, &DIMS, 30, 3, 6, 1e-9)]
        }),
        run(2, "double-step ratio bounds up to height 100", || {
            vec![appendix_bounds(SEED, &DIMS, 30, 3, 100)]
        }),
        run(3, "|D^(m,0)| <= 1 up to height 200", || {
            vec![m_invariant_dist_bound(SEED, &[3, 4, 5, 6], 4, 200)]
        }),
        run(4, "invariance D^w(Xh) = 0", || vec![invariance(SEED, &DIMS, 4, 200, 1e-10)]),
        run(5, "rank-one solver residual and oracle agreement", || {
            vec![rank1_solver(SEED, &DIMS, 200, 12, 1e-9)]
        }),
        run(6, "top coefficient growth constants stabilise", || {
            vec![top_coeff_trends(SEED, &[4, 6], &[3, 5], 10, 200)]
        }),
        run(7, "splitting f = f_otimes + f_d and slice kernels", || {
            vec![splitting(SEED, &[2, 3], 25, 1e-9)]
        }),
        run(8, "top-degree solver", || vec![top_degree(SEED, &[2, 3], 100, 50, 1e-8)]),
        run(9, "forms: d o d = 0, degree-one base case, lower-degree solver", || {
            vec![
                d_squared(SEED, 3, 100, 1e-11),
                degree1_base_case(SEED, 100, 1e-8),
                lower_degree(SEED, 3, &[1, 2], 20, 1e-7),
            ]
        }),
        run(10, "adding inequality", || vec![adding(SEED, 200, 1e-12)]),
        run(11, "Sobolev ratio boundedness within a spec", || {
            let (within, across) = sobolev_ratio(SEED, &DIMS, 2, 100, 2.0, 1.0);
            vec![within, across]
        }),
    ];

    let mut failed = 0;
    for o in &outcomes {
        let ok = o.checks.iter().all(|c| c.passed || !c.asserted);
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            o.id,
            o.title,
            o.seconds
        );
        for c in &o.checks {
            let tag = if !c.asserted { "reported" } else if c.passed { "ok" } else { "failed" };
            println!("      {} [{tag}] samples={}", c.name, c.samples);
            for (k, v) in &c.metrics {
                println!("        {k}: {v:.6e}");
            }
            for f in &c.failures {
                println!("        ! {f}");
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
