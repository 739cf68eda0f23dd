//! Reproducible verification suites. Every check draws its ensemble from a
//! seed, runs the samples in parallel and assembles its report in sample
//! order, so a report is a function of the seed and the parameters alone.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::coboundary::{
    floor_obstructions, project_to_kernel, residual, solve_rank1, solve_rank1_sweep, sobolev_ratio_report,
};
use crate::coefficients::{verify_alpha_beta_bounds, verify_top_coeff_bounds};
use crate::distributions::{dist_values_pathsum, dist_values_recursive, InvariantDistribution};
use crate::error::{Result, WeylError};
use crate::gc_lattice::{Cylinder, GcArray, LatticePoint};
use crate::operator::apply_x;
use crate::product::forms::{exterior_derivative, lower_degree_residual, solve_degree1_rank2, solve_lower_degree, NForm};
use crate::product::{
    adding_inequality, apply_xi, project_product_to_kernel, slice_obstructions, solve_top_degree, split_f,
    top_degree_residual, ProductVector,
};
use crate::rep_params::RepSpec;
use crate::sampling::{chain_point, Sampler, SeriesChoice};

/// Suite names accepted by [`run_suite`].
pub const SUITES: [&str; 5] = ["appendix", "distributions", "coboundary", "product", "forms"];

/// Derives an independent stream seed from `(seed, tag, index)`.
pub fn sub_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut x = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Outcome of one check.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    /// The mathematical property the check embodies.
    pub property: String,
    /// Unasserted checks are reported but never fail a suite.
    pub asserted: bool,
    pub passed: bool,
    pub samples: usize,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Check {
    fn new(name: &str, property: &str) -> Self {
        Self {
            name: name.into(),
            property: property.into(),
            asserted: true,
            passed: true,
            samples: 0,
            metrics: BTreeMap::new(),
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn max_metric(&mut self, key: &str, value: f64) {
        let slot = self.metrics.entry(key.into()).or_insert(0.0);
        if value > *slot || value.is_nan() {
            *slot = value;
        }
    }

    fn fail(&mut self, msg: String) {
        self.passed = false;
        if self.failures.len() < 20 {
            self.failures.push(msg);
        }
    }

    /// Folds one sample's outcome: its metrics, or the error it raised.
    fn absorb(&mut self, label: String, outcome: Result<Vec<(&'static str, f64)>>) {
        self.samples += 1;
        match outcome {
            Ok(metrics) => {
                for (k, v) in metrics {
                    self.max_metric(k, v);
                }
            }
            Err(e) => self.fail(format!("{label}: {e}")),
        }
    }

    /// Fails the check when `metric` exceeds `bound`.
    fn bound(&mut self, metric: &str, bound: f64) {
        let v = self.metrics.get(metric).copied().unwrap_or(0.0);
        self.metrics.insert(format!("{metric} bound"), bound);
        if !(v <= bound) {
            self.fail(format!("{metric} = {v:.3e} exceeds {bound:.3e}"));
        }
    }
}

/// One random `(spec, lambda)` per draw from a per-dimension stream, shared
/// by every check that draws from the same single-factor ensemble.
pub fn spec_ensemble(seed: u64, dim: usize, count: usize, max_ceil: i64) -> Result<Vec<(RepSpec, GcArray)>> {
    let mut sampler = Sampler::new(sub_seed(seed, 1, dim as u64));
    (0..count)
        .map(|_| {
            let spec = sampler.spec(dim, max_ceil, SeriesChoice::Either);
            let lam = sampler.lambda(&spec, max_ceil)?;
            Ok((spec, lam))
        })
        .collect()
}

fn ensembles(seed: u64, dims: &[usize], count: usize, max_ceil: i64) -> Result<Vec<(RepSpec, GcArray)>> {
    let mut out = Vec::new();
    for &dim in dims {
        out.extend(spec_ensemble(seed, dim, count, max_ceil)?);
    }
    Ok(out)
}

fn describe(spec: &RepSpec, lam: &GcArray) -> String {
    format!(
        "N={} n={:?} nu={}{:+}i lambda={:?}",
        spec.dim(),
        spec.n(),
        spec.nu().re,
        spec.nu().im,
        lam.rows_top_down()
    )
}

fn ensemble_failure(name: &str, property: &str, e: WeylError) -> Check {
    let mut c = Check::new(name, property);
    c.fail(format!("could not draw the ensemble: {e}"));
    c
}

/// The recursive distribution values agree with the path-sum formula at
/// every target up to `floor + depth`, for every floor anchor.
pub fn oracle_equivalence(seed: u64, dims: &[usize], count: usize, max_ceil: i64, depth: i64, tol: f64) -> Check {
    let name = "oracle-equivalence";
    let property = "level recursion for D agrees with the cocubic path-sum formula";
    let specs = match ensembles(seed, dims, count, max_ceil) {
        Ok(s) => s,
        Err(e) => return ensemble_failure(name, property, e),
    };
    let outcomes: Vec<_> = specs
        .par_iter()
        .map(|(spec, lam)| {
            let run = || -> Result<Vec<(&'static str, f64)>> {
                let cyl = Cylinder::new(spec, lam)?;
                let top = cyl.floor_height() + depth;
                let mut worst: f64 = 0.0;
                let mut targets = 0usize;
                for w in cyl.floor_points() {
                    let anchor = LatticePoint::new(w, lam.clone());
                    let rec = dist_values_recursive(spec, &anchor, top)?;
                    for (m, v) in &rec {
                        let p = dist_values_pathsum(spec, &anchor, m)?;
                        worst = worst.max((p - v).norm());
                        targets += 1;
                    }
                }
                Ok(vec![("max |recursive - pathsum|", worst), ("targets per spec", targets as f64)])
            };
            (describe(spec, lam), run())
        })
        .collect();
    let mut c = Check::new(name, property);
    for (label, o) in outcomes {
        c.absorb(label, o);
    }
    c.bound("max |recursive - pathsum|", tol);
    c
}

/// `|alpha_{2e_k}| <= 1` (even `N`) or `|beta_{2e_k}| <= 1` (odd `N`) at every
/// point up to `height`, with the side-step decay constants fitted.
pub fn appendix_bounds(seed: u64, dims: &[usize], count: usize, max_ceil: i64, height: i64) -> Check {
    let name = "double-step-ratio-bound";
    let property = "|alpha_2e_k| <= 1 and |beta_2e_k| <= 1 at every valid point";
    let specs = match ensembles(seed, dims, count, max_ceil) {
        Ok(s) => s,
        Err(e) => return ensemble_failure(name, property, e),
    };
    let outcomes: Vec<_> = specs
        .par_iter()
        .map(|(spec, lam)| {
            let run = || -> Result<Vec<(&'static str, f64)>> {
                let report = verify_alpha_beta_bounds(spec, lam, height)?.ensure()?;
                let mut out = Vec::new();
                for (k, v) in &report.fitted_constants {
                    if k.starts_with("max |") {
                        out.push(("max |ratio_2e_k|", *v));
                    } else if k.contains("e_k +- e_j") {
                        out.push(("max fitted C (side steps)", *v));
                    } else {
                        out.push(("max fitted C (single step)", *v));
                    }
                }
                Ok(out)
            };
            (describe(spec, lam), run())
        })
        .collect();
    let mut c = Check::new(name, property);
    for (label, o) in outcomes {
        c.absorb(label, o);
    }
    c.bound("max |ratio_2e_k|", 1.0 + 1e-12);
    c.metrics.insert("sweep height".into(), height as f64);
    c
}

/// `|D^{m,0}(k,0)| <= 1` up to `height` for the floor anchor of `lambda ≡ 0`,
/// over `n = (0, …, 0, c)` with `c <= max_ceil`, principal and complementary.
pub fn m_invariant_dist_bound(seed: u64, dims: &[usize], max_ceil: i64, height: i64) -> Check {
    let mut specs = Vec::new();
    for &dim in dims {
        let mut sampler = Sampler::new(sub_seed(seed, 3, dim as u64));
        for c in 0..=max_ceil {
            let mut n = vec![0; (dim - 1) / 2];
            *n.last_mut().expect("N >= 3") = c;
            for choice in [SeriesChoice::Principal, SeriesChoice::Complementary] {
                specs.push(sampler.with_n(dim, n.clone(), choice));
            }
        }
    }
    let outcomes: Vec<_> = specs
        .par_iter()
        .map(|spec| {
            let run = || -> Result<Vec<(&'static str, f64)>> {
                let anchor = chain_point(spec, spec.n_ceil());
                let mut dist = InvariantDistribution::new(spec, anchor)?;
                dist.extend_to(height)?;
                let worst = dist.values().iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
                Ok(vec![("max |D^(m,0)|", worst)])
            };
            (describe(spec, &GcArray::zero(spec.dim())), run())
        })
        .collect();
    let mut c = Check::new("m-invariant-distribution-bound", "|D^(m,0)(k,0)| <= 1 on the lambda = 0 chain");
    let complementary = specs.iter().filter(|s| s.nu().im == 0.0).count();
    c.notes.push(format!("{} principal, {} complementary", specs.len() - complementary, complementary));
    for (label, o) in outcomes {
        c.absorb(label, o);
    }
    c.bound("max |D^(m,0)|", 1.0 + 1e-12);
    c.metrics.insert("sweep height".into(), height as f64);
    c
}

/// `|D^w(Xh)| <= tol ||h||_0` for random finite-support `h` and every floor
/// anchor `w` of a diagram meeting the support.
pub fn invariance(seed: u64, dims: &[usize], specs_per_dim: usize, per_spec: usize, tol: f64) -> Check {
    let name = "invariance";
    let property = "D^w(Xh) = 0 for every floor anchor w";
    let specs = match ensembles(seed, dims, specs_per_dim, 3) {
        Ok(s) => s,
        Err(e) => return ensemble_failure(name, property, e),
    };
    let outcomes: Vec<_> = specs
        .par_iter()
        .enumerate()
        .map(|(i, (spec, _))| {
            let run = || -> Result<Vec<(&'static str, f64)>> {
                let mut sampler = Sampler::new(sub_seed(seed, 4, i as u64));
                let mut worst: f64 = 0.0;
                for _ in 0..per_spec {
                    let h = sampler.vector(spec, 3, 10, 6)?;
                    let obs = floor_obstructions(&apply_x(&h))?;
                    worst = worst.max(obs.max_abs() / h.norm0());
                }
                Ok(vec![("max |D^w(Xh)| / ||h||_0", worst)])
            };
            (describe(spec, &GcArray::zero(spec.dim())), run())
        })
        .collect();
    let mut c = Check::new(name, property);
    for (label, o) in outcomes {
        c.absorb(label, o);
    }
    c.samples *= per_spec;
    c.bound("max |D^w(Xh)| / ||h||_0", tol);
    c
}

/// For random kernel-projected `f`: `||X g - f||_0 <= tol ||f||_0` with `g`
/// from the distribution formula, which must agree with the descending
/// level-sweep solution to `tol ||g||_0`.
pub fn rank1_solver(seed: u64, dims: &[usize], count: usize, max_height: i64, tol: f64) -> Check {
    let outcomes: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut sampler = Sampler::new(sub_seed(seed, 5, i as u64));
            let dim = dims[i % dims.len()];
            let spec = sampler.spec(dim, 3, SeriesChoice::Either);
            let mut run = || -> Result<Vec<(&'static str, f64)>> {
                let f = project_to_kernel(&sampler.vector(&spec, 3, max_height, 8)?)?;
                let scale = f.norm0().max(f64::MIN_POSITIVE);
                let g = solve_rank1(&f)?;
                let g_sweep = solve_rank1_sweep(&f)?;
                let agree = g.sub(&g_sweep)?.norm0() / g.norm0().max(f64::MIN_POSITIVE);
                Ok(vec![
                    ("max ||Xg - f||_0 / ||f||_0", residual(&f, &g)? / scale),
                    ("max ||g - g_sweep||_0 / ||g||_0", agree),
                ])
            };
            (format!("sample {i} ({})", describe(&spec, &GcArray::zero(dim))), run())
        })
        .collect();
    let mut c = Check::new("rank-one-solver", "Xg = f solved on the kernel of all invariant distributions");
    for (label, o) in outcomes {
        c.absorb(label, o);
    }
    c.bound("max ||Xg - f||_0 / ||f||_0", tol);
    c.bound("max ||g - g_sweep||_0 / ||g||_0", tol);
    c
}

/// The top-coefficient growth constants stabilise between the windows
/// `[H/4, H/2]` and `[H/2, H]`, for `per_parity` specs of each parity.
pub fn top_coeff_trends(seed: u64, even_dims: &[usize], odd_dims: &[usize], per_parity: usize, height: i64) -> Check {
    let mut specs = Vec::new();
    for (tag, dims) in [(6, even_dims), (7, odd_dims)] {
        let mut sampler = Sampler::new(sub_seed(seed, tag, 0));
        for i in 0..per_parity {
            specs.push(sampler.m_invariant_spec(dims[i % dims.len()], 4, SeriesChoice::Either));
        }
    }
    let outcomes: Vec<_> = specs
        .par_iter()
        .map(|spec| {
            let run = || -> Result<Vec<(&'static str, f64)>> {
                let report = verify_top_coeff_bounds(spec, height)?.ensure()?;
                let fc = &report.fitted_constants;
                let drift = |a: &str, b: &str| (fc[b] / fc[a] - 1.0).abs();
                Ok(vec![
                    (
                        "max relative drift (upper)",
                        drift("upper constant (early window)", "upper constant (late window)"),
                    ),
                    (
                        "max relative drift (lower)",
                        drift("lower constant (early window)", "lower constant (late window)"),
                    ),
                ])
            };
            (describe(spec, &GcArray::zero(spec.dim())), run())
        })
        .collect();
    let mut c = Check::new(
        "top-coefficient-growth",
        "|A_k(m,0)|^2 and |B_k(m,0)|^2 are bounded above and below by quadratics in ceil(m)",
    );
    for (label, o) in outcomes {
        c.absorb(label, o);
    }
    c.bound("max relative drift (upper)", 0.1);
    c.bound("max relative drift (lower)", 0.1);
    c
}

fn product_heights(d: usize) -> Vec<i64> {
    vec![if d == 2 { 5 } else { 3 }; d]
}

/// `f = f_otimes + f_d` and both parts have vanishing slice obstructions for
/// random kernel `f` on `d`-factor products.
pub fn splitting(seed: u64, ds: &[usize], per_d: usize, tol: f64) -> Check {
    let jobs: Vec<(usize, usize)> = ds.iter().flat_map(|&d| (0..per_d).map(move |i| (d, i))).collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(d, i)| {
            let mut sampler = Sampler::new(sub_seed(seed, 8, (d * 1000 + i) as u64));
            let pspec = sampler.m_invariant_product(d, &[3, 4, 5], 2);
            let mut run = || -> Result<Vec<(&'static str, f64)>> {
                let f = project_product_to_kernel(&sampler.product_vector(&pspec, &product_heights(d)))?;
                let scale = f.norm0().max(f64::MIN_POSITIVE);
                let (f_otimes, f_d) = split_f(&f)?;
                if f_d != f.sub(&f_otimes)? {
                    return Err(WeylError::ShapeMismatch("f_d differs from f - f_otimes".into()));
                }
                let gap = f_otimes.add(&f_d)?.sub(&f)?.norm0();
                let ulp_scale = f64::EPSILON * (f.norm0() + f_otimes.norm0()).max(f64::MIN_POSITIVE);
                let (obs_otimes, obs_d) = slice_obstructions(&f)?;
                Ok(vec![
                    ("max ||f_otimes + f_d - f||_0 / (eps scale)", gap / ulp_scale),
                    ("max slice obstruction / ||f||_0", obs_otimes.max(obs_d) / scale),
                ])
            };
            (format!("d={d} sample {i}"), run())
        })
        .collect();
    let mut c = Check::new("splitting-and-kernels", "f = f_otimes + f_d with both parts in the slice kernels");
    for (label, o) in outcomes {
        c.absorb(label, o);
    }
    c.bound("max ||f_otimes + f_d - f||_0 / (eps scale)", 4.0);
    c.bound("max slice obstruction / ||f||_0", tol);
    c
}

/// Recovers `(g_i)` with `sum_i X_i g_i = f` for constructed coboundaries and
/// for random kernel-projected `f`.
pub fn top_degree(seed: u64, ds: &[usize], constructed: usize, random: usize, tol: f64) -> Check {
    let jobs: Vec<(usize, bool)> = (0..constructed)
        .map(|i| (i, true))
        .chain((0..random).map(|i| (i, false)))
        .collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(i, built)| {
            let d = ds[i % ds.len()];
            let mut sampler = Sampler::new(sub_seed(seed, if built { 9 } else { 10 }, i as u64));
            let pspec = sampler.m_invariant_product(d, &[3, 4, 5], 2);
            let heights = product_heights(d);
            let mut run = || -> Result<Vec<(&'static str, f64)>> {
                let f = if built {
                    let mut acc = ProductVector::zero(&pspec);
                    for l in 1..=d {
                        acc = acc.add(&apply_xi(&sampler.product_vector(&pspec, &heights), l)?)?;
                    }
                    acc
                } else {
                    project_product_to_kernel(&sampler.product_vector(&pspec, &heights))?
                };
                let gs = solve_top_degree(&f)?;
                let r = top_degree_residual(&f, &gs)? / f.norm0().max(f64::MIN_POSITIVE);
                Ok(vec![(
                    if built {
                        "max residual / ||f||_0 (constructed)"
                    } else {
                        "max residual / ||f||_0 (kernel-projected)"
                    },
                    r,
                )])
            };
            (format!("d={d} {} sample {i}", if built { "constructed" } else { "projected" }), run())
        })
        .collect();
    let mut c = Check::new("top-degree-solver", "sum_i X_i g_i = f solved for M-invariant kernel f");
    for (label, o) in outcomes {
        c.absorb(label, o);
    }
    c.bound("max residual / ||f||_0 (constructed)", tol);
    c.bound("max residual / ||f||_0 (kernel-projected)", tol);
    c
}

/// `d(d omega) = 0` on random forms of every degree where it is defined.
pub fn d_squared(seed: u64, d: usize, count: usize, tol: f64) -> Check {
    let outcomes: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut sampler = Sampler::new(sub_seed(seed, 11, i as u64));
            let pspec = sampler.m_invariant_product(d, &[3, 4, 5], 2);
            let degree = i % (d - 1);
            let mut run = || -> Result<Vec<(&'static str, f64)>> {
                let omega = sampler.nform(&pspec, degree, 3)?;
                let dd = exterior_derivative(&exterior_derivative(&omega)?)?;
                Ok(vec![
                    ("max ||dd omega||_0", dd.norm0()),
                    ("max ||dd omega||_0 / ||omega||_0", dd.norm0() / omega.norm0().max(f64::MIN_POSITIVE)),
                ])
            };
            (format!("degree {degree} sample {i}"), run())
        })
        .collect();
    let mut c = Check::new("d-squared", "d o d = 0 on M-invariant forms");
    c.notes.push(format!("degrees 0..={} (d o d of a form of degree >= {} is not defined)", d - 2, d - 1));
    for (label, o) in outcomes {
        c.absorb(label, o);
    }
    c.bound("max ||dd omega||_0", tol);
    c
}

/// The two slice constructions of the degree-1 rank-2 solver agree and
/// `d eta = omega`, on closed cocycles `omega = d h`.
pub fn degree1_base_case(seed: u64, count: usize, tol: f64) -> Check {
    let outcomes: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut sampler = Sampler::new(sub_seed(seed, 12, i as u64));
            let pspec = sampler.m_invariant_product(2, &[3, 4, 5], 2);
            let mut run = || -> Result<Vec<(&'static str, f64)>> {
                let h = sampler.product_vector(&pspec, &product_heights(2));
                let omega = exterior_derivative(&NForm::from_function(h))?;
                let eta = solve_degree1_rank2(&omega)?;
                let r = lower_degree_residual(&omega, &NForm::from_function(eta))?;
                Ok(vec![("max ||d eta - omega||_0 / ||omega||_0", r / omega.norm0().max(f64::MIN_POSITIVE))])
            };
            (format!("sample {i}"), run())
        })
        .collect();
    let mut c = Check::new("degree-one-base-case", "closed M-invariant 1-forms on two factors are exact");
    c.notes.push("slice agreement eta_1 = eta_2 is enforced by the solver to 1e-8".into());
    for (label, o) in outcomes {
        c.absorb(label, o);
    }
    c.bound("max ||d eta - omega||_0 / ||omega||_0", tol);
    c
}

/// `omega = d kappa` is recovered as `d eta` by the lower-degree solver.
pub fn lower_degree(seed: u64, d: usize, degrees: &[usize], per_degree: usize, tol: f64) -> Check {
    let jobs: Vec<(usize, usize)> = degrees.iter().flat_map(|&n| (0..per_degree).map(move |i| (n, i))).collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(n, i)| {
            let mut sampler = Sampler::new(sub_seed(seed, 13, (n * 1000 + i) as u64));
            let pspec = sampler.m_invariant_product(d, &[3, 4, 5], 2);
            let mut run = || -> Result<Vec<(&'static str, f64)>> {
                let kappa = sampler.nform(&pspec, n - 1, 3)?;
                let omega = exterior_derivative(&kappa)?;
                let eta = solve_lower_degree(&omega)?;
                let r = lower_degree_residual(&omega, &eta)?;
                Ok(vec![("max ||d eta - omega||_0 / ||omega||_0", r / omega.norm0().max(f64::MIN_POSITIVE))])
            };
            (format!("degree {n} sample {i}"), run())
        })
        .collect();
    let mut c = Check::new("lower-degree-solver", "closed M-invariant forms below top degree are exact");
    for (label, o) in outcomes {
        c.absorb(label, o);
    }
    c.bound("max ||d eta - omega||_0 / ||omega||_0", tol);
    c
}

/// `sum_{z_l} (1 + Q_l)^s ||f|_{z_l}||_{s'}^2 <= ||f||_{s+s'}^2`.
pub fn adding(seed: u64, count: usize, slack: f64) -> Check {
    let outcomes: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut sampler = Sampler::new(sub_seed(seed, 14, i as u64));
            let d = 2 + i % 2;
            let pspec = sampler.m_invariant_product(d, &[3, 4, 5], 3);
            let l = 1 + i % d;
            let s = (i / 2 % 4) as f64;
            let s_prime = (i / 8 % 4) as f64;
            let mut run = || -> Result<Vec<(&'static str, f64)>> {
                let f = sampler.product_vector(&pspec, &product_heights(d));
                let (lhs, rhs) = adding_inequality(&f, l, s, s_prime)?;
                Ok(vec![("max lhs / rhs", lhs / rhs)])
            };
            (format!("d={d} l={l} s={s} s'={s_prime} sample {i}"), run())
        })
        .collect();
    let mut c = Check::new("adding-inequality", "slice norms add up to at most the full Sobolev norm");
    for (label, o) in outcomes {
        c.absorb(label, o);
    }
    c.bound("max lhs / rhs", 1.0 + slack);
    c
}

/// Within each spec, `max / median` of `||g||_t / ||f||_s` over kernel
/// ensembles stays below 20. The spread across specs is reported only.
pub fn sobolev_ratio(seed: u64, dims: &[usize], specs_per_dim: usize, per_spec: usize, s: f64, t: f64) -> (Check, Check) {
    let mut specs = Vec::new();
    for &dim in dims {
        let mut sampler = Sampler::new(sub_seed(seed, 15, dim as u64));
        for _ in 0..specs_per_dim {
            specs.push(sampler.m_invariant_spec(dim, 3, SeriesChoice::Either));
        }
    }
    let outcomes: Vec<_> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let run = || -> Result<_> {
                let mut sampler = Sampler::new(sub_seed(seed, 16, i as u64));
                let mut pairs = Vec::with_capacity(per_spec);
                for _ in 0..per_spec {
                    let f = project_to_kernel(&sampler.m_invariant_vector(spec, 12))?;
                    let g = solve_rank1(&f)?;
                    pairs.push((f, g));
                }
                sobolev_ratio_report(&pairs, s, t)
            };
            (describe(spec, &GcArray::zero(spec.dim())), run())
        })
        .collect();
    let mut within = Check::new(
        "sobolev-ratio-within-spec",
        "||g||_t <= C ||f||_s with C depending only on the representation",
    );
    let mut across = Check::new("sobolev-ratio-across-specs", "spread of ||g||_t / ||f||_s over representations");
    across.asserted = false;
    let mut all = Vec::new();
    for (label, o) in outcomes {
        within.samples += per_spec;
        match o {
            Ok(report) => {
                within.max_metric("max (max / median)", report.max_over_median);
                if !report.bounded {
                    within.fail(format!("{label}: max / median = {:.3}", report.max_over_median));
                }
                if !report.precondition_met {
                    within.notes.push(format!("{label}: t > s - s_0"));
                }
                all.extend(report.ratios.iter().flatten().copied());
            }
            Err(e) => within.fail(format!("{label}: {e}")),
        }
    }
    within.bound("max (max / median)", 20.0);
    within.metrics.insert("s".into(), s);
    within.metrics.insert("t".into(), t);
    all.sort_by(f64::total_cmp);
    across.samples = all.len();
    if let (Some(&max), false) = (all.last(), all.is_empty()) {
        let median = all[all.len() / 2];
        across.metrics.insert("max".into(), max);
        across.metrics.insert("median".into(), median);
        across.metrics.insert("max / median".into(), max / median);
    }
    (within, across)
}

/// Parameters of a `verify` run.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Dimensions `N` of the single-factor ensembles.
    pub dims: Vec<usize>,
    /// Sweep height for the bound checks.
    pub height: i64,
}

/// Report of one suite.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: SuiteConfig,
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// Runs a named suite. Unknown names are a [`WeylError::Parse`] error.
pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<SuiteReport> {
    let s = cfg.seed;
    let dims = &cfg.dims;
    if dims.iter().any(|&d| d < 3) {
        return Err(WeylError::InvalidN(dims.iter().copied().min().unwrap_or(0)));
    }
    let evens: Vec<usize> = dims.iter().copied().filter(|d| d % 2 == 0).collect();
    let odds: Vec<usize> = dims.iter().copied().filter(|d| d % 2 == 1).collect();
    let checks = match name {
        "appendix" => {
            let mut v = vec![appendix_bounds(s, dims, 30, 3, cfg.height)];
            if !evens.is_empty() || !odds.is_empty() {
                let ev = if evens.is_empty() { odds.clone() } else { evens.clone() };
                let od = if odds.is_empty() { evens.clone() } else { odds.clone() };
                v.push(top_coeff_trends(s, &ev, &od, 10, 2 * cfg.height));
            }
            v
        }
        "distributions" => vec![
            oracle_equivalence(s, dims, 30, 3, 6, 1e-9),
            m_invariant_dist_bound(s, dims, 4, 2 * cfg.height),
            invariance(s, dims, 5, 200, 1e-10),
        ],
        "coboundary" => {
            let (within, across) = sobolev_ratio(s, dims, 2, 100, 2.0, 1.0);
            vec![rank1_solver(s, dims, 200, 12, 1e-9), within, across]
        }
        "product" => vec![
            splitting(s, &[2, 3], 20, 1e-9),
            top_degree(s, &[2, 3], 100, 50, 1e-8),
            adding(s, 200, 1e-12),
        ],
        "forms" => vec![
            d_squared(s, 3, 100, 1e-11),
            degree1_base_case(s, 100, 1e-8),
            lower_degree(s, 3, &[1, 2], 20, 1e-7),
        ],
        other => {
            return Err(WeylError::Parse(format!(
                "unknown suite {other:?}; expected one of {}",
                SUITES.join(", ")
            )))
        }
    };
    Ok(SuiteReport {
        suite: name.into(),
        config: cfg.clone(),
        passed: checks.iter().all(|c| c.passed || !c.asserted),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_pass_at_small_scale() {
        for c in [
            oracle_equivalence(1, &[3, 4], 3, 2, 4, 1e-9),
            appendix_bounds(1, &[3, 4, 5], 3, 3, 30),
            invariance(1, &[4], 2, 5, 1e-10),
            rank1_solver(1, &[3, 5], 6, 8, 1e-9),
            adding(1, 16, 1e-12),
        ] {
            assert!(c.passed, "{c:?}");
            assert!(c.samples > 0);
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let a = serde_json::to_string(&invariance(9, &[3, 5], 2, 4, 1e-10)).unwrap();
        let b = serde_json::to_string(&invariance(9, &[3, 5], 2, 4, 1e-10)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_suite_rejected() {
        let cfg = SuiteConfig {
            seed: 0,
            dims: vec![3],
            height: 10,
        };
        assert!(matches!(run_suite("nope", &cfg), Err(WeylError::Parse(_))));
    }
}
