//! Rank-1 coboundary problem `Xg = f` for finite-support `f`.
//!
//! The equation decouples over diagrams `lambda`. On one diagram, `f` is a
//! coboundary iff every floor distribution annihilates it, and then
//! `g(m - e_k) = D^m(f) / A_k^-(m)` for every `m` above the floor.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::ser::SerializeSeq;
use serde::Serialize;

use crate::coefficients::{CoeffContext, EPS_DIV};
use crate::distributions::LevelSweep;
use crate::error::{Result, WeylError};
use crate::gc_lattice::{GcArray, LatticePoint};
use crate::operator::{apply_x, is_m_invariant, sobolev_norm, StateVector};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Largest accepted condition number of a projection Gram matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Default relative obstruction tolerance.
pub const TOL_OBS: f64 = 1e-9;

/// Sweep of all floor distributions of one diagram at once; column `c` is
/// `D^w` for the floor point with lower index `c`.
pub(crate) fn floor_family(ctx: &Arc<CoeffContext>, height: i64) -> Result<LevelSweep> {
    let cyl = ctx.cylinder();
    let w = cyl.len_lower();
    let mut init = vec![ZERO; w * w];
    for i in 0..w {
        init[i * w + i] = ONE;
    }
    let mut sweep = LevelSweep::new(Arc::clone(ctx), cyl.floor_height(), w, init);
    sweep.extend_to(height)?;
    Ok(sweep)
}

/// A block `m -> value` located in the cylinder as `(lower index, height, value)`.
fn locate_block(ctx: &CoeffContext, block: &BTreeMap<Vec<i64>, C64>) -> Vec<(usize, i64, C64)> {
    block
        .iter()
        .map(|(m, &v)| {
            let (i, h) = ctx.cylinder().locate(m).expect("entry of a validated vector");
            (i, h, v)
        })
        .collect()
}

fn block_height(located: &[(usize, i64, C64)], floor: i64) -> i64 {
    located.iter().map(|&(_, h, _)| h).max().unwrap_or(floor).max(floor)
}

/// `D^w(block)` for every floor anchor `w` (indexed by lower index).
pub(crate) fn block_obstructions(ctx: &Arc<CoeffContext>, block: &BTreeMap<Vec<i64>, C64>) -> Result<Vec<C64>> {
    let located = locate_block(ctx, block);
    let height = block_height(&located, ctx.cylinder().floor_height());
    let fam = floor_family(ctx, height)?;
    let w = ctx.cylinder().len_lower();
    Ok((0..w)
        .map(|c| located.iter().map(|&(i, h, v)| v * fam.get(i, h, c)).sum())
        .collect())
}

/// Floor obstructions keyed by anchor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObstructionSet {
    pub values: BTreeMap<LatticePoint, C64>,
}

impl ObstructionSet {
    pub fn max_abs(&self) -> f64 {
        self.values.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Anchors whose obstruction exceeds `tol` in modulus.
    pub fn offending(&self, tol: f64) -> Vec<(&LatticePoint, C64)> {
        self.values.iter().filter(|(_, v)| v.norm() > tol).map(|(w, &v)| (w, v)).collect()
    }

    pub(crate) fn ensure_below(&self, tol: f64) -> Result<()> {
        let bad = self.offending(tol);
        if bad.is_empty() {
            return Ok(());
        }
        let listing: Vec<String> = bad
            .iter()
            .map(|(w, v)| format!("m={:?} lambda={:?}: {:.3e}", w.m, w.lam.rows_top_down(), v.norm()))
            .collect();
        Err(WeylError::ObstructionNonzero(listing.join("; ")))
    }
}

#[derive(Serialize)]
struct ObstructionJson<'a> {
    anchor: &'a LatticePoint,
    re: f64,
    im: f64,
}

impl Serialize for ObstructionSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.values.len()))?;
        for (anchor, v) in &self.values {
            seq.serialize_element(&ObstructionJson {
                anchor,
                re: v.re,
                im: v.im,
            })?;
        }
        seq.end()
    }
}

fn contexts(f: &StateVector) -> Result<Vec<(GcArray, Arc<CoeffContext>)>> {
    f.diagrams()
        .into_iter()
        .map(|lam| {
            let ctx = CoeffContext::new(f.spec(), &lam)?;
            Ok((lam, Arc::new(ctx)))
        })
        .collect()
}

/// Evaluates every floor distribution of every diagram met by `f`.
pub fn floor_obstructions(f: &StateVector) -> Result<ObstructionSet> {
    if f.spec().is_trivial() {
        return Err(WeylError::TrivialRepresentation);
    }
    let per: Vec<Vec<(LatticePoint, C64)>> = contexts(f)?
        .into_par_iter()
        .map(|(lam, ctx)| {
            let obs = block_obstructions(&ctx, &f.block(&lam))?;
            Ok(ctx
                .cylinder()
                .floor_points()
                .into_iter()
                .zip(obs)
                .map(|(m, v)| (LatticePoint::new(m, lam.clone()), v))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(ObstructionSet {
        values: per.into_iter().flatten().collect(),
    })
}

/// Solves the Hermitian positive system `G c = b`, rejecting ill-conditioned `G`.
pub(crate) fn solve_gram(gram: DMatrix<C64>, rhs: Vec<C64>) -> Result<Vec<C64>> {
    let n = rhs.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if cond > MAX_CONDITION {
        return Err(WeylError::IllConditioned(cond));
    }
    let chol = gram.cholesky().ok_or(WeylError::IllConditioned(cond))?;
    let sol = chol.solve(&DMatrix::from_vec(n, 1, rhs));
    Ok(sol.iter().copied().collect())
}

/// Corrections `f' - f` for one diagram: `-sum_w c_w conj(D^w)` over the box
/// `F x [m_lambda, h_max]`.
fn project_block(ctx: &Arc<CoeffContext>, block: &BTreeMap<Vec<i64>, C64>) -> Result<Vec<(Vec<i64>, C64)>> {
    let cyl = ctx.cylinder();
    let located = locate_block(ctx, block);
    let top = block_height(&located, cyl.floor_height());
    let fam = floor_family(ctx, top)?;
    let w = cyl.len_lower();
    let mut gram = DMatrix::<C64>::zeros(w, w);
    for h in cyl.floor_height()..=top {
        for i in 0..w {
            for v in 0..w {
                let dv = fam.get(i, h, v);
                if dv == ZERO {
                    continue;
                }
                for u in 0..w {
                    gram[(v, u)] += dv * fam.get(i, h, u).conj();
                }
            }
        }
    }
    let rhs: Vec<C64> = (0..w)
        .map(|c| located.iter().map(|&(i, h, v)| v * fam.get(i, h, c)).sum())
        .collect();
    let coef = solve_gram(gram, rhs)?;
    let mut out = Vec::new();
    for h in cyl.floor_height()..=top {
        for i in 0..w {
            let corr: C64 = (0..w).map(|u| coef[u] * fam.get(i, h, u).conj()).sum();
            if corr != ZERO {
                out.push((cyl.point(i, h), -corr));
            }
        }
    }
    Ok(out)
}

/// Projects `f` onto the common kernel of its floor distributions by a
/// least-squares correction supported in the bounding box of `supp(f)`.
pub fn project_to_kernel(f: &StateVector) -> Result<StateVector> {
    if f.spec().is_trivial() {
        return Err(WeylError::TrivialRepresentation);
    }
    let per: Vec<(GcArray, Vec<(Vec<i64>, C64)>)> = contexts(f)?
        .into_par_iter()
        .map(|(lam, ctx)| Ok((lam.clone(), project_block(&ctx, &f.block(&lam))?)))
        .collect::<Result<_>>()?;
    let mut out = f.clone();
    for (lam, corr) in per {
        for (m, v) in corr {
            out.add_unchecked(LatticePoint::new(m, lam.clone()), v);
        }
    }
    Ok(out)
}

/// Distribution-formula solve on one diagram: for every `m` strictly above
/// the floor, `g(m - e_k) = D^m(f) / A_k^-(m)` with `D^m` anchored at `m`.
fn solve_block_formula(ctx: &Arc<CoeffContext>, block: &BTreeMap<Vec<i64>, C64>) -> Result<Vec<(Vec<i64>, C64)>> {
    let cyl = ctx.cylinder();
    let k = ctx.k();
    let located = locate_block(ctx, block);
    let top = block_height(&located, cyl.floor_height());
    let w = cyl.len_lower();
    let mut out = Vec::new();
    for h in cyl.floor_height() + 1..=top {
        let mut init = vec![ZERO; w * w];
        for i in 0..w {
            init[i * w + i] = ONE;
        }
        let mut sweep = LevelSweep::new(Arc::clone(ctx), h, w, init);
        sweep.extend_to(top)?;
        for c in 0..w {
            let pairing: C64 = located.iter().map(|&(i, hq, v)| v * sweep.get(i, hq, c)).sum();
            if pairing == ZERO {
                continue;
            }
            let m = cyl.point(c, h);
            let den = ctx.minus(&m, k);
            if den.norm() < EPS_DIV {
                return Err(WeylError::DivisionNearZero { m, value: den.norm() });
            }
            let mut target = m;
            target[k - 1] -= 1;
            out.push((target, pairing / den));
        }
    }
    Ok(out)
}

/// Descending solve on one diagram: `g = 0` from the top height of `f`
/// upward, then the equation at each `m` is solved for `g(m - e_k)`.
fn solve_block_sweep(ctx: &Arc<CoeffContext>, block: &BTreeMap<Vec<i64>, C64>) -> Result<Vec<(Vec<i64>, C64)>> {
    let cyl = ctx.cylinder();
    let k = ctx.k();
    let floor = cyl.floor_height();
    let located = locate_block(ctx, block);
    let top = block_height(&located, floor);
    let w = cyl.len_lower();
    let levels = (top - floor + 2) as usize;
    let mut g = vec![vec![ZERO; w]; levels];
    let mut rhs = vec![vec![ZERO; w]; levels];
    for &(i, h, v) in &located {
        rhs[(h - floor) as usize][i] = v;
    }
    let at = |g: &Vec<Vec<C64>>, i: usize, h: i64| -> C64 {
        if h < floor || h > top {
            ZERO
        } else {
            g[(h - floor) as usize][i]
        }
    };
    for h in (floor + 1..=top).rev() {
        for i in 0..w {
            let m = cyl.point(i, h);
            let mut acc = rhs[(h - floor) as usize][i];
            for j in 0..k - 1 {
                let up = ctx.plus(&m, j + 1);
                if up != ZERO {
                    acc -= up * at(&g, cyl.neighbor(i, j, true).expect("lattice neighbour"), h);
                }
                let down = ctx.minus(&m, j + 1);
                if down != ZERO {
                    acc -= down * at(&g, cyl.neighbor(i, j, false).expect("lattice neighbour"), h);
                }
            }
            acc -= ctx.plus(&m, k) * at(&g, i, h + 1);
            acc -= ctx.diag(&m)? * at(&g, i, h);
            let den = ctx.minus(&m, k);
            if den.norm() < EPS_DIV {
                return Err(WeylError::DivisionNearZero { m, value: den.norm() });
            }
            g[(h - 1 - floor) as usize][i] = acc / den;
        }
    }
    let mut out = Vec::new();
    for (t, row) in g.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            if v != ZERO {
                out.push((cyl.point(i, floor + t as i64), v));
            }
        }
    }
    Ok(out)
}

type BlockSolver = fn(&Arc<CoeffContext>, &BTreeMap<Vec<i64>, C64>) -> Result<Vec<(Vec<i64>, C64)>>;

fn solve_blocks(f: &StateVector, solver: BlockSolver) -> Result<StateVector> {
    let per: Vec<(GcArray, Vec<(Vec<i64>, C64)>)> = contexts(f)?
        .into_par_iter()
        .map(|(lam, ctx)| Ok((lam.clone(), solver(&ctx, &f.block(&lam))?)))
        .collect::<Result<_>>()?;
    let mut g = StateVector::zero(f.spec());
    for (lam, vals) in per {
        for (m, v) in vals {
            g.insert_unchecked(LatticePoint::new(m, lam.clone()), v);
        }
    }
    Ok(g)
}

/// Solves `Xg = f`, requiring every floor obstruction to be at most
/// `1e-9 * max(1, ||f||_0)`.
pub fn solve_rank1(f: &StateVector) -> Result<StateVector> {
    solve_rank1_with_tol(f, TOL_OBS * f.norm0().max(1.0))
}

/// [`solve_rank1`] with an absolute obstruction tolerance.
pub fn solve_rank1_with_tol(f: &StateVector, tol: f64) -> Result<StateVector> {
    floor_obstructions(f)?.ensure_below(tol)?;
    solve_blocks(f, solve_block_formula)
}

/// Independent solver of `Xg = f` by a descending level sweep. Floor
/// obstructions are not checked; for obstructed `f` the residual lands on
/// the floor.
pub fn solve_rank1_sweep(f: &StateVector) -> Result<StateVector> {
    if f.spec().is_trivial() {
        return Err(WeylError::TrivialRepresentation);
    }
    solve_blocks(f, solve_block_sweep)
}

/// `||Xg - f||_0`.
pub fn residual(f: &StateVector, g: &StateVector) -> Result<f64> {
    Ok(apply_x(g).sub(f)?.norm0())
}

/// `||g||_t / ||f||_s`, or `None` when `f = 0`.
pub fn sobolev_ratio(f: &StateVector, g: &StateVector, s: f64, t: f64) -> Result<Option<f64>> {
    let fs = sobolev_norm(f, s)?;
    if fs == 0.0 {
        return Ok(None);
    }
    Ok(Some(sobolev_norm(g, t)? / fs))
}

fn serialize_ratios<S: serde::Serializer>(ratios: &[Option<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(ratios.len()))?;
    for r in ratios {
        match r {
            Some(v) => seq.serialize_element(v)?,
            None => seq.serialize_element("undefined")?,
        }
    }
    seq.end()
}

/// Ratio statistics of `||g||_t / ||f||_s` over an ensemble at one spec.
#[derive(Clone, Debug, Serialize)]
pub struct RatioReport {
    pub s: f64,
    pub t: f64,
    #[serde(serialize_with = "serialize_ratios")]
    pub ratios: Vec<Option<f64>>,
    pub max: f64,
    pub median: f64,
    pub max_over_median: f64,
    /// Whether `t <= s - s_0` holds for the loss `s_0` of this branch.
    pub precondition_met: bool,
    /// `max / median <= 20`.
    pub bounded: bool,
}

/// Builds the ratio report for pairs `(f, g)` with `Xg = f`.
pub fn sobolev_ratio_report(pairs: &[(StateVector, StateVector)], s: f64, t: f64) -> Result<RatioReport> {
    let ratios: Vec<Option<f64>> = pairs
        .iter()
        .map(|(f, g)| sobolev_ratio(f, g, s, t))
        .collect::<Result<_>>()?;
    let mut defined: Vec<f64> = ratios.iter().flatten().copied().collect();
    defined.sort_by(f64::total_cmp);
    let max = defined.last().copied().unwrap_or(f64::NAN);
    let median = if defined.is_empty() {
        f64::NAN
    } else if defined.len() % 2 == 1 {
        defined[defined.len() / 2]
    } else {
        0.5 * (defined[defined.len() / 2 - 1] + defined[defined.len() / 2])
    };
    let max_over_median = max / median;
    let loss = match pairs.first() {
        Some((f, _)) if !pairs.iter().all(|(f, _)| is_m_invariant(f)) => (f.spec().dim() / 2) as f64 - 0.5,
        _ => 1.0,
    };
    Ok(RatioReport {
        s,
        t,
        ratios,
        max,
        median,
        max_over_median,
        precondition_met: t <= s - loss,
        bounded: max_over_median.is_finite() && max_over_median <= 20.0,
    })
}

/// Exposes the obstruction check for a spec-specific absolute tolerance.
pub fn check_kernel(f: &StateVector, tol: f64) -> Result<ObstructionSet> {
    let obs = floor_obstructions(f)?;
    obs.ensure_below(tol)?;
    Ok(obs)
}

/// Convenience used by tests and suites: the distribution-formula solution
/// of `Xg = Xh`, which recovers `h` up to `ker X` (trivial on finite support).
pub fn roundtrip(h: &StateVector) -> Result<(StateVector, StateVector)> {
    let f = apply_x(h);
    let g = solve_rank1(&f)?;
    Ok((f, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rep_params::RepSpec;

    fn spec4() -> RepSpec {
        RepSpec::new(4, vec![1], C64::new(0.0, 0.7)).unwrap()
    }

    fn lam4() -> GcArray {
        GcArray::from_rows_top_down(vec![vec![1], vec![0]])
    }

    fn sample_h(spec: &RepSpec) -> StateVector {
        StateVector::from_entries(
            spec,
            [
                (LatticePoint::new(vec![0, 2], lam4()), C64::new(1.0, 0.5)),
                (LatticePoint::new(vec![-1, 3], lam4()), C64::new(-0.3, 0.2)),
                (LatticePoint::new(vec![1, 4], lam4()), C64::new(0.0, 2.0)),
                (LatticePoint::new(vec![0, 1], GcArray::zero(4)), C64::new(0.4, 0.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn obstructions_of_basics() {
        let spec = spec4();
        let w = LatticePoint::new(vec![1, 1], lam4());
        let obs = floor_obstructions(&StateVector::basis(&spec, w.clone()).unwrap()).unwrap();
        assert_eq!(obs.values[&w], ONE);
        assert_eq!(obs.values.len(), 3);
        assert_eq!(obs.values[&LatticePoint::new(vec![0, 1], lam4())], ZERO);
        let obs = floor_obstructions(&apply_x(&sample_h(&spec))).unwrap();
        assert!(obs.max_abs() < 1e-12);
    }

    #[test]
    fn projection() {
        let spec = spec4();
        let xh = apply_x(&sample_h(&spec));
        let p = project_to_kernel(&xh).unwrap();
        assert!(p.sub(&xh).unwrap().norm0() < 1e-12 * xh.norm0());
        let w = LatticePoint::new(vec![1, 1], lam4());
        let f = StateVector::basis(&spec, w).unwrap().add(&xh).unwrap();
        let p = project_to_kernel(&f).unwrap();
        assert!(floor_obstructions(&p).unwrap().max_abs() < 1e-10 * f.norm0());
    }

    #[test]
    fn rank1_roundtrip_and_oracle() {
        let spec = spec4();
        let h = sample_h(&spec);
        let (f, g) = roundtrip(&h).unwrap();
        assert!(residual(&f, &g).unwrap() < 1e-10 * f.norm0());
        assert!(g.sub(&h).unwrap().norm0() < 1e-10 * h.norm0());
        let g2 = solve_rank1_sweep(&f).unwrap();
        assert!(g.sub(&g2).unwrap().norm0() < 1e-12 * g.norm0());
        assert!(g.support_height().unwrap() < f.support_height().unwrap());
        assert!(solve_rank1(&StateVector::zero(&spec)).unwrap().is_empty());
        let w = LatticePoint::new(vec![1, 1], lam4());
        let err = solve_rank1(&StateVector::basis(&spec, w).unwrap()).unwrap_err();
        assert!(matches!(err, WeylError::ObstructionNonzero(_)));
    }

    #[test]
    fn odd_rank1() {
        let spec = RepSpec::new(5, vec![0, 2], C64::new(0.5, 0.0)).unwrap();
        let h = StateVector::from_entries(
            &spec,
            (2..7).map(|t| (LatticePoint::new(vec![0, t], GcArray::zero(5)), C64::new(t as f64, 1.0))),
        )
        .unwrap();
        let (f, g) = roundtrip(&h).unwrap();
        assert!(residual(&f, &g).unwrap() < 1e-10 * f.norm0());
        assert!(is_m_invariant(&g));
    }

    #[test]
    fn ratios() {
        let spec = spec4();
        let h = sample_h(&spec);
        let f = apply_x(&h);
        let r = sobolev_ratio(&f, &h, 2.0, 1.0).unwrap().unwrap();
        let expect = sobolev_norm(&h, 1.0).unwrap() / sobolev_norm(&f, 2.0).unwrap();
        assert!((r - expect).abs() < 1e-15);
        assert_eq!(sobolev_ratio(&StateVector::zero(&spec), &h, 2.0, 1.0).unwrap(), None);
        let rep = sobolev_ratio_report(&[(f, h), (StateVector::zero(&spec), StateVector::zero(&spec))], 2.0, 1.0).unwrap();
        let text = serde_json::to_string(&rep).unwrap();
        assert!(text.contains("\"undefined\""));
    }
}
