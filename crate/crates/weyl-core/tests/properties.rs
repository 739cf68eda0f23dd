use proptest::prelude::*;

use weyl_core::coboundary::{floor_obstructions, project_to_kernel, residual, solve_rank1, solve_rank1_sweep};
use weyl_core::coefficients::CoeffContext;
use weyl_core::distributions::{dist_values_pathsum, dist_values_recursive, evaluate, InvariantDistribution};
use weyl_core::gc_lattice::{
    cone_leq, enumerate_m_for_lambda, enumerate_paths, validate_point, Cylinder, GcArray, LatticePoint,
};
use weyl_core::operator::{apply_x, is_m_invariant, sobolev_norm, StateVector};
use weyl_core::product::forms::exterior_derivative;
use weyl_core::product::{adding_inequality, split_f};
use weyl_core::rep_params::{classify, RepSpec, SeriesClass};
use weyl_core::sampling::{chain_point, Sampler, SeriesChoice};
use weyl_core::C64;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        ..ProptestConfig::default()
    }
}

fn draw(seed: u64, dim: usize) -> (Sampler, RepSpec, GcArray) {
    let mut s = Sampler::new(seed);
    let spec = s.spec(dim, 3, SeriesChoice::Either);
    let lam = s.lambda(&spec, 3).unwrap();
    (s, spec, lam)
}

fn close(a: &StateVector, b: &StateVector, rel: f64) -> bool {
    a.sub(b).unwrap().norm0() <= rel * a.norm0().max(b.norm0()).max(1.0)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn classification_round_trip(seed in any::<u64>(), dim in 3usize..=8) {
        let mut s = Sampler::new(seed);
        let spec = s.spec(dim, 4, SeriesChoice::Either);
        let class = classify(dim, spec.n(), spec.nu()).unwrap();
        prop_assert_eq!(class, spec.series());
        match class {
            SeriesClass::Principal => prop_assert!(spec.nu().re.abs() <= 1e-9 && spec.nu().im >= -1e-9),
            SeriesClass::Complementary { j } => {
                let hi = if dim % 2 == 0 { j as f64 - 0.5 } else { j as f64 };
                prop_assert!(spec.nu().im.abs() <= 1e-9 && spec.nu().re > 0.0 && spec.nu().re < hi);
            }
            other => prop_assert!(false, "unexpected class {:?}", other),
        }
    }

    #[test]
    fn enumeration_matches_brute_force(seed in any::<u64>(), dim in 3usize..=7, height in 0i64..=8) {
        let (_, spec, lam) = draw(seed, dim);
        let floor = Cylinder::new(&spec, &lam).unwrap().floor_height();
        if height < floor {
            prop_assert!(enumerate_m_for_lambda(&spec, &lam, height).is_err());
            return Ok(());
        }
        let listed = enumerate_m_for_lambda(&spec, &lam, height).unwrap();
        let k = spec.k();
        let mut brute = Vec::new();
        let mut m = vec![-height; k];
        loop {
            if m[k - 1] <= height && validate_point(&spec, &LatticePoint::new(m.clone(), lam.clone())).unwrap() {
                brute.push(m.clone());
            }
            let mut i = 0;
            while i < k {
                m[i] += 1;
                if m[i] <= height {
                    break;
                }
                m[i] = -height;
                i += 1;
            }
            if i == k {
                break;
            }
        }
        let mut listed_sorted = listed.clone();
        listed_sorted.sort();
        brute.sort();
        prop_assert_eq!(listed_sorted, brute);
    }

    #[test]
    fn path_endpoints_and_prefixes(seed in any::<u64>(), dim in 3usize..=6, rise in 0i64..=4) {
        let (mut s, spec, lam) = draw(seed, dim);
        let cyl = Cylinder::new(&spec, &lam).unwrap();
        let top = cyl.floor_height() + rise;
        let pts = cyl.points_up_to(top);
        let from = pts[(s.complex().re.abs() * pts.len() as f64) as usize % pts.len()].clone();
        let to = pts[(s.complex().im.abs() * pts.len() as f64) as usize % pts.len()].clone();
        let paths = enumerate_paths(&spec, &lam, &from, &to, !spec.is_even()).unwrap();
        if !paths.is_empty() {
            prop_assert!(cone_leq(&from, &to));
        } else if !spec.is_even() {
            prop_assert!(!cone_leq(&from, &to));
        }
        for p in &paths {
            let visited = p.points();
            prop_assert_eq!(visited.last().unwrap(), &to);
            for q in visited {
                prop_assert!(validate_point(&spec, &LatticePoint::new(q, lam.clone())).unwrap());
            }
        }
    }

    #[test]
    fn coefficient_identities(seed in any::<u64>(), dim in 3usize..=7) {
        let (_, spec, lam) = draw(seed, dim);
        let ctx = CoeffContext::new(&spec, &lam).unwrap();
        let cyl = ctx.cylinder();
        let k = spec.k();
        let pref = if spec.is_even() { 0.25 } else { 1.0 };
        for m in cyl.points_up_to(cyl.floor_height() + 4) {
            for j in 1..=k {
                let mut down = m.clone();
                down[j - 1] -= 1;
                prop_assert_eq!(ctx.minus(&m, j), ctx.plus(&down, j));
                let a = ctx.plus(&m, j);
                if j < k && m[j - 1] == m[j] {
                    prop_assert_eq!(a, C64::new(0.0, 0.0));
                }
                if a != C64::new(0.0, 0.0) {
                    let want = ctx.radicand(&m, j) * pref;
                    prop_assert!((a * a - want).norm() <= 1e-12 * want.abs().max(1e-300));
                }
            }
            if ctx.x().iter().chain(ctx.z()).any(|&v| v == 0.0) {
                prop_assert_eq!(ctx.diag(&m).unwrap(), C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn operator_is_linear_and_block_diagonal(seed in any::<u64>(), dim in 3usize..=6) {
        let mut s = Sampler::new(seed);
        let spec = s.spec(dim, 3, SeriesChoice::Either);
        let f = s.vector(&spec, 3, 8, 6).unwrap();
        let g = s.vector(&spec, 3, 8, 6).unwrap();
        let (a, b) = (s.complex(), s.complex());
        let lhs = apply_x(&f.scale(a).add(&g.scale(b)).unwrap());
        let rhs = apply_x(&f).scale(a).add(&apply_x(&g).scale(b)).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
        let xf = apply_x(&f);
        prop_assert!(xf.diagrams().is_subset(&f.diagrams()));
        for lam in f.diagrams() {
            prop_assert_eq!(apply_x(&f.restrict_to(&lam)), xf.restrict_to(&lam));
        }
        if let (Some(hx), Some(hf)) = (xf.support_height(), f.support_height()) {
            prop_assert!(hx <= hf + 1);
        }
    }

    #[test]
    fn sobolev_norms_are_monotone(seed in any::<u64>(), dim in 3usize..=6, s1 in 0.0f64..3.0, ds in 0.0f64..2.0) {
        let mut s = Sampler::new(seed);
        let spec = s.spec(dim, 3, SeriesChoice::Either);
        let f = s.vector(&spec, 3, 10, 6).unwrap();
        prop_assert!(sobolev_norm(&f, s1).unwrap() <= sobolev_norm(&f, s1 + ds).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn recursion_matches_path_sum(seed in any::<u64>(), dim in 3usize..=5) {
        let (_, spec, lam) = draw(seed, dim);
        let cyl = Cylinder::new(&spec, &lam).unwrap();
        for w in cyl.floor_points() {
            let anchor = LatticePoint::new(w, lam.clone());
            for (m, v) in dist_values_recursive(&spec, &anchor, cyl.floor_height() + 5).unwrap() {
                let p = dist_values_pathsum(&spec, &anchor, &m).unwrap();
                prop_assert!((p - v).norm() < 1e-9, "{:?}: {} vs {}", m, p, v);
            }
        }
    }

    #[test]
    fn floor_basis(seed in any::<u64>(), dim in 3usize..=7) {
        let (_, spec, lam) = draw(seed, dim);
        let floor = Cylinder::new(&spec, &lam).unwrap().floor_points();
        for w in &floor {
            let dist = InvariantDistribution::new(&spec, LatticePoint::new(w.clone(), lam.clone())).unwrap();
            for v in &floor {
                let u = StateVector::basis(&spec, LatticePoint::new(v.clone(), lam.clone())).unwrap();
                let want = if v == w { 1.0 } else { 0.0 };
                prop_assert_eq!(evaluate(&dist, &u).unwrap(), C64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn m_invariant_distribution_bounded(seed in any::<u64>(), dim in 3usize..=8) {
        let mut s = Sampler::new(seed);
        let spec = s.m_invariant_spec(dim, 4, SeriesChoice::Either);
        let mut dist = InvariantDistribution::new(&spec, chain_point(&spec, spec.n_ceil())).unwrap();
        dist.extend_to(spec.n_ceil() + 120).unwrap();
        for (_, v) in dist.values() {
            prop_assert!(v.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn distributions_are_invariant(seed in any::<u64>(), dim in 3usize..=6) {
        let mut s = Sampler::new(seed);
        let spec = s.spec(dim, 3, SeriesChoice::Either);
        let h = s.vector(&spec, 3, 10, 8).unwrap();
        prop_assert!(floor_obstructions(&apply_x(&h)).unwrap().max_abs() <= 1e-10 * h.norm0());
    }

    #[test]
    fn rank1_solver_properties(seed in any::<u64>(), dim in 3usize..=6, m_inv in any::<bool>()) {
        let mut s = Sampler::new(seed);
        let (spec, raw) = if m_inv {
            let spec = s.m_invariant_spec(dim, 3, SeriesChoice::Either);
            let raw = s.m_invariant_vector(&spec, 10);
            (spec, raw)
        } else {
            let spec = s.spec(dim, 3, SeriesChoice::Either);
            let raw = s.vector(&spec, 3, 10, 8).unwrap();
            (spec, raw)
        };
        let f = project_to_kernel(&raw).unwrap();
        prop_assert_eq!(f.spec(), &spec);
        let g = solve_rank1(&f).unwrap();
        prop_assert!(residual(&f, &g).unwrap() <= 1e-9 * f.norm0().max(1e-300));
        prop_assert!(close(&g, &solve_rank1_sweep(&f).unwrap(), 1e-9));
        if let (Some(hg), Some(hf)) = (g.support_height(), f.support_height()) {
            prop_assert!(hg <= hf - 1);
        }
        if is_m_invariant(&f) {
            prop_assert!(is_m_invariant(&g));
        }
    }

    #[test]
    fn splitting_is_exact(seed in any::<u64>(), d in 2usize..=3) {
        let mut s = Sampler::new(seed);
        let pspec = s.m_invariant_product(d, &[3, 4, 5], 2);
        let f = s.product_vector(&pspec, &vec![3; d]);
        let (f_otimes, f_d) = split_f(&f).unwrap();
        prop_assert_eq!(f_d, f.sub(&f_otimes).unwrap());
    }

    #[test]
    fn adding_inequality_holds(seed in any::<u64>(), d in 2usize..=3, s1 in 0u8..=3, s2 in 0u8..=3) {
        let mut s = Sampler::new(seed);
        let pspec = s.m_invariant_product(d, &[3, 4, 5, 6], 3);
        let f = s.product_vector(&pspec, &vec![3; d]);
        for l in 1..=d {
            let (lhs, rhs) = adding_inequality(&f, l, s1 as f64, s2 as f64).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn d_squared_vanishes(seed in any::<u64>(), degree in 0usize..=1) {
        let mut s = Sampler::new(seed);
        let pspec = s.m_invariant_product(3, &[3, 4, 5], 2);
        let omega = s.nform(&pspec, degree, 2).unwrap();
        let dd = exterior_derivative(&exterior_derivative(&omega).unwrap()).unwrap();
        prop_assert!(dd.norm0() <= 1e-11);
    }
}
