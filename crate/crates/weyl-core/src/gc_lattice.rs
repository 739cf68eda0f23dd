//! Gelfand–Cejtlin combinatorics: arrays, lattice points, floors, the cone
//! order and (clipped) cocubic paths.
//!
//! A lattice point is `z = (m, lambda)` where `m` labels an SO(N) K-type and
//! `lambda` is a chain of labels for SO(N-1) ⊃ … ⊃ SO(2). Row `i` of an
//! array (1-based, counted from the bottom) labels SO(i+1) and has
//! `ceil(i/2)` entries.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WeylError};
use crate::rep_params::RepSpec;

/// Default hard cap on the number of enumerated paths.
pub const PATH_CAP: usize = 10_000_000;

/// A Gelfand–Cejtlin array. `rows[0]` is the bottom row (SO(2)).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GcArray {
    rows: Vec<Vec<i64>>,
}

/// Interval of admissible values for each entry of a label of SO(g-1)
/// sitting under the SO(g) label `upper`.
fn branch_ranges(upper: &[i64], group: usize) -> Vec<(i64, i64)> {
    if group % 2 == 1 {
        // SO(2p+1) -> SO(2p): |mu_1| <= l_1 <= mu_2 <= ... <= mu_p <= l_p
        (0..upper.len())
            .map(|i| if i == 0 { (-upper[0], upper[0]) } else { (upper[i - 1], upper[i]) })
            .collect()
    } else {
        // SO(2p) -> SO(2p-1): |m_1| <= l_1 <= m_2 <= ... <= l_{p-1} <= m_p
        (0..upper.len().saturating_sub(1))
            .map(|i| {
                let lo = if i == 0 { upper[0].abs() } else { upper[i] };
                (lo, upper[i + 1])
            })
            .collect()
    }
}

fn within(values: &[i64], ranges: &[(i64, i64)]) -> bool {
    values.len() == ranges.len() && values.iter().zip(ranges).all(|(v, (lo, hi))| lo <= v && v <= hi)
}

fn cartesian(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(ranges.len())];
    for &(lo, hi) in ranges {
        let mut next = Vec::new();
        for prefix in &out {
            for v in lo..=hi {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

impl GcArray {
    /// Builds an array from rows listed bottom (SO(2)) first.
    pub fn from_rows_bottom_up(rows: Vec<Vec<i64>>) -> Self {
        Self { rows }
    }

    /// Builds an array from rows listed top (largest group) first, as in JSON.
    pub fn from_rows_top_down(mut rows: Vec<Vec<i64>>) -> Self {
        rows.reverse();
        Self { rows }
    }

    /// The all-zero array for SO(N).
    pub fn zero(dim: usize) -> Self {
        let rows = (1..=dim.saturating_sub(2)).map(|i| vec![0; i.div_ceil(2)]).collect();
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.rows
    }

    pub fn rows_top_down(&self) -> Vec<Vec<i64>> {
        self.rows.iter().rev().cloned().collect()
    }

    pub fn top_row(&self) -> &[i64] {
        self.rows.last().map(|r| r.as_slice()).unwrap_or(&[])
    }

    /// Absolute value of the top-right entry.
    pub fn ceil(&self) -> i64 {
        self.top_row().last().map(|v| v.abs()).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|&v| v == 0))
    }

    /// Checks the row shape for SO(N).
    pub fn check_shape(&self, dim: usize) -> Result<()> {
        if self.rows.len() != dim - 2 {
            return Err(WeylError::ShapeMismatch(format!(
                "expected {} rows for N = {dim}, got {}",
                dim - 2,
                self.rows.len()
            )));
        }
        for (idx, row) in self.rows.iter().enumerate() {
            let want = (idx + 1).div_ceil(2);
            if row.len() != want {
                return Err(WeylError::ShapeMismatch(format!(
                    "row {} needs {want} entries, got {}",
                    idx + 1,
                    row.len()
                )));
            }
        }
        Ok(())
    }

    /// True when every pair of consecutive rows interlaces.
    pub fn rows_interlace(&self) -> bool {
        (1..self.rows.len()).all(|i| within(&self.rows[i - 1], &branch_ranges(&self.rows[i], i + 2)))
    }
}

/// A basis index `(m, lambda)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LatticePoint {
    pub m: Vec<i64>,
    pub lam: GcArray,
}

impl LatticePoint {
    pub fn new(m: Vec<i64>, lam: GcArray) -> Self {
        Self { m, lam }
    }

    /// `ceil(m) = m_k`.
    pub fn height(&self) -> i64 {
        *self.m.last().expect("m is nonempty")
    }
}

impl Ord for LatticePoint {
    fn cmp(&self, other: &Self) -> Ordering {
        self.height()
            .cmp(&other.height())
            .then_with(|| self.m.cmp(&other.m))
            .then_with(|| self.lam.rows.cmp(&other.lam.rows))
    }
}

impl PartialOrd for LatticePoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Serialize, Deserialize)]
struct LatticePointJson {
    m: Vec<i64>,
    lambda: Vec<Vec<i64>>,
}

impl Serialize for LatticePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LatticePointJson {
            m: self.m.clone(),
            lambda: self.lam.rows_top_down(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = LatticePointJson::deserialize(d)?;
        Ok(Self {
            m: raw.m,
            lam: GcArray::from_rows_top_down(raw.lambda),
        })
    }
}

/// Checks the branching inequalities, the interlacing of `lambda` under `m`
/// and of consecutive rows.
pub fn validate_point(spec: &RepSpec, z: &LatticePoint) -> Result<bool> {
    if z.m.len() != spec.k() {
        return Err(WeylError::ShapeMismatch(format!(
            "m needs {} entries, got {}",
            spec.k(),
            z.m.len()
        )));
    }
    z.lam.check_shape(spec.dim())?;
    Ok(spec.m_condition(&z.m)
        && within(z.lam.top_row(), &branch_ranges(&z.m, spec.dim()))
        && z.lam.rows_interlace())
}

/// All arrays that can sit under `m`, in canonical order.
pub fn enumerate_lambda_under_m(spec: &RepSpec, m: &[i64]) -> Result<Vec<GcArray>> {
    if m.len() != spec.k() || !spec.m_condition(m) {
        return Err(WeylError::InvalidM {
            m: m.to_vec(),
            reason: "branching inequalities against n fail".into(),
        });
    }
    // Build top-down chains, then flip each to bottom-up storage.
    let mut chains: Vec<Vec<Vec<i64>>> = vec![vec![m.to_vec()]];
    for group in (3..=spec.dim()).rev() {
        let mut next = Vec::new();
        for chain in &chains {
            let upper = chain.last().unwrap();
            for row in cartesian(&branch_ranges(upper, group)) {
                let mut c = chain.clone();
                c.push(row);
                next.push(c);
            }
        }
        chains = next;
    }
    let mut out: Vec<GcArray> = chains
        .into_iter()
        .map(|mut c| {
            c.remove(0);
            GcArray::from_rows_top_down(c)
        })
        .collect();
    out.sort();
    Ok(out)
}

/// The cylinder `M_lambda = F x [m_lambda, inf)`: the lower coordinates
/// `(m_1, …, m_{k-1})` range over a finite set `F` that does not depend on
/// the height `m_k`.
#[derive(Clone, Debug)]
pub struct Cylinder {
    spec: RepSpec,
    lam: GcArray,
    floor_height: i64,
    lower: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
    up: Vec<Vec<Option<usize>>>,
    down: Vec<Vec<Option<usize>>>,
}

impl Cylinder {
    pub fn new(spec: &RepSpec, lam: &GcArray) -> Result<Self> {
        lam.check_shape(spec.dim())?;
        if !lam.rows_interlace() {
            return Err(WeylError::ShapeMismatch("rows of lambda do not interlace".into()));
        }
        let k = spec.k();
        let floor_height = spec.n_ceil().max(lam.ceil());
        let b = floor_height;
        let lower: Vec<Vec<i64>> = cartesian(&vec![(-b, b); k - 1])
            .into_iter()
            .filter(|low| {
                let mut m = low.clone();
                m.push(floor_height);
                spec.m_condition(&m) && within(lam.top_row(), &branch_ranges(&m, spec.dim()))
            })
            .collect();
        let index: HashMap<Vec<i64>, usize> = lower.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        let shift = |low: &Vec<i64>, j: usize, d: i64| {
            let mut v = low.clone();
            v[j] += d;
            index.get(&v).copied()
        };
        let up = lower.iter().map(|low| (0..k - 1).map(|j| shift(low, j, 1)).collect()).collect();
        let down = lower.iter().map(|low| (0..k - 1).map(|j| shift(low, j, -1)).collect()).collect();
        Ok(Self {
            spec: spec.clone(),
            lam: lam.clone(),
            floor_height,
            lower,
            index,
            up,
            down,
        })
    }

    pub fn spec(&self) -> &RepSpec {
        &self.spec
    }

    pub fn lam(&self) -> &GcArray {
        &self.lam
    }

    /// `m_lambda = max(ceil(n), ceil(lambda))`.
    pub fn floor_height(&self) -> i64 {
        self.floor_height
    }

    /// The lower-coordinate set `F`.
    pub fn lower(&self) -> &[Vec<i64>] {
        &self.lower
    }

    pub fn len_lower(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Index in `F` of `lower ± e_j` (`j` 0-based, `j < k-1`).
    pub fn neighbor(&self, idx: usize, j: usize, up: bool) -> Option<usize> {
        if up {
            self.up[idx][j]
        } else {
            self.down[idx][j]
        }
    }

    /// Splits `m` into (lower index, height) when `m ∈ M_lambda`.
    pub fn locate(&self, m: &[i64]) -> Option<(usize, i64)> {
        let (&h, low) = m.split_last()?;
        if h < self.floor_height {
            return None;
        }
        self.index.get(low).map(|&i| (i, h))
    }

    pub fn contains(&self, m: &[i64]) -> bool {
        m.len() == self.spec.k() && self.locate(m).is_some()
    }

    pub fn point(&self, idx: usize, height: i64) -> Vec<i64> {
        let mut m = self.lower[idx].clone();
        m.push(height);
        m
    }

    pub fn floor_points(&self) -> Vec<Vec<i64>> {
        (0..self.lower.len()).map(|i| self.point(i, self.floor_height)).collect()
    }

    /// All `m ∈ M_lambda` with `m_k <= height`, sorted by (height, m).
    pub fn points_up_to(&self, height: i64) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        for h in self.floor_height..=height {
            for i in 0..self.lower.len() {
                out.push(self.point(i, h));
            }
        }
        out.sort_by(|a, b| a.last().cmp(&b.last()).then_with(|| a.cmp(b)));
        out
    }
}

/// All `m ∈ M_lambda` with `m_k <= height`, sorted by (height, lexicographic).
pub fn enumerate_m_for_lambda(spec: &RepSpec, lam: &GcArray, height: i64) -> Result<Vec<Vec<i64>>> {
    let cyl = Cylinder::new(spec, lam)?;
    if height < cyl.floor_height() {
        return Err(WeylError::HeightBelowFloor {
            height,
            floor: cyl.floor_height(),
        });
    }
    Ok(cyl.points_up_to(height))
}

/// The floor height `m_lambda` and the floor points.
pub fn floor_of(spec: &RepSpec, lam: &GcArray) -> Result<(i64, Vec<Vec<i64>>)> {
    let cyl = Cylinder::new(spec, lam)?;
    let mut pts = cyl.floor_points();
    pts.sort();
    Ok((cyl.floor_height(), pts))
}

/// `m1 <= m2` in the cone order: `sum_{j<k} |Δ_j| <= Δ_k`.
pub fn cone_leq(m1: &[i64], m2: &[i64]) -> bool {
    let k = m1.len();
    assert_eq!(k, m2.len(), "cone_leq needs equal lengths");
    let spread: i64 = (0..k - 1).map(|j| (m2[j] - m1[j]).abs()).sum();
    spread <= m2[k - 1] - m1[k - 1]
}

/// A step of a cocubic path. Indices `j` are 1-based and satisfy `j < k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    /// `e_k + e_j`
    Plus(usize),
    /// `e_k - e_j`
    Minus(usize),
    /// `2 e_k`
    Double,
    /// `e_k` (clipped paths only)
    Single,
}

impl Step {
    /// Applies the step to `m` in place.
    pub fn apply(&self, m: &mut [i64]) {
        let k = m.len();
        match *self {
            Step::Plus(j) => {
                m[k - 1] += 1;
                m[j - 1] += 1;
            }
            Step::Minus(j) => {
                m[k - 1] += 1;
                m[j - 1] -= 1;
            }
            Step::Double => m[k - 1] += 2,
            Step::Single => m[k - 1] += 1,
        }
    }

    /// Every step available in rank `k`.
    pub fn all(k: usize, clipped: bool) -> Vec<Step> {
        let mut out = vec![Step::Double];
        for j in 1..k {
            out.push(Step::Plus(j));
            out.push(Step::Minus(j));
        }
        if clipped {
            out.push(Step::Single);
        }
        out
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Plus(j) => write!(f, "e_k+e_{j}"),
            Step::Minus(j) => write!(f, "e_k-e_{j}"),
            Step::Double => write!(f, "2e_k"),
            Step::Single => write!(f, "e_k"),
        }
    }
}

impl Serialize for Step {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Path {
    pub start: Vec<i64>,
    pub steps: Vec<Step>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The points visited, starting with `start` and ending at the target.
    pub fn points(&self) -> Vec<Vec<i64>> {
        let mut cur = self.start.clone();
        let mut out = vec![cur.clone()];
        for s in &self.steps {
            s.apply(&mut cur);
            out.push(cur.clone());
        }
        out
    }
}

pub(crate) fn check_clipped(spec: &RepSpec, clipped: bool) -> Result<()> {
    if clipped == spec.is_even() {
        return Err(WeylError::ParityMismatch(format!(
            "clipped = {clipped} does not match N = {}",
            spec.dim()
        )));
    }
    Ok(())
}

/// Depth-first walk over all (clipped) cocubic paths from `from` to `to`
/// inside `cyl`, calling `visit` with the step sequence of each path.
pub(crate) fn walk_paths<F: FnMut(&[Step], &[Vec<i64>]) -> Result<()>>(
    cyl: &Cylinder,
    from: &[i64],
    to: &[i64],
    clipped: bool,
    cap: usize,
    mut visit: F,
) -> Result<usize> {
    let k = from.len();
    let steps = Step::all(k, clipped);
    let mut count = 0usize;
    let mut stack_steps: Vec<Step> = Vec::new();
    let mut stack_points: Vec<Vec<i64>> = vec![from.to_vec()];
    // Iterative DFS: frames hold the index of the next step to try.
    let mut frames: Vec<usize> = vec![0];
    let reachable = |p: &[i64]| {
        if !cone_leq(p, to) {
            return false;
        }
        if clipped {
            return true;
        }
        let parity: i64 = (0..k).map(|j| to[j] - p[j]).sum();
        parity.rem_euclid(2) == 0
    };
    if !cyl.contains(from) || !cyl.contains(to) || !reachable(from) {
        return Ok(0);
    }
    while let Some(next) = frames.last_mut() {
        let cur = stack_points.last().unwrap().clone();
        if cur == to && *next == 0 {
            count += 1;
            if count > cap {
                return Err(WeylError::PathCapExceeded { cap });
            }
            visit(&stack_steps, &stack_points)?;
            // Heights strictly increase, so a path cannot pass through its target.
            frames.pop();
            stack_points.pop();
            stack_steps.pop();
            continue;
        }
        if *next >= steps.len() {
            frames.pop();
            stack_points.pop();
            stack_steps.pop();
            continue;
        }
        let step = steps[*next];
        *next += 1;
        let mut p = cur;
        step.apply(&mut p);
        if cyl.contains(&p) && reachable(&p) {
            stack_points.push(p);
            stack_steps.push(step);
            frames.push(0);
        }
    }
    Ok(count)
}

/// All (clipped) cocubic paths from `m` to `target` inside `M_lambda`.
pub fn enumerate_paths(
    spec: &RepSpec,
    lam: &GcArray,
    m: &[i64],
    target: &[i64],
    clipped: bool,
) -> Result<Vec<Path>> {
    check_clipped(spec, clipped)?;
    let cyl = Cylinder::new(spec, lam)?;
    for p in [m, target] {
        if !cyl.contains(p) {
            return Err(WeylError::InvalidM {
                m: p.to_vec(),
                reason: "endpoint lies outside M_lambda".into(),
            });
        }
    }
    let mut out = Vec::new();
    walk_paths(&cyl, m, target, clipped, PATH_CAP, |steps, _| {
        out.push(Path {
            start: m.to_vec(),
            steps: steps.to_vec(),
        });
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn spec(dim: usize, n: Vec<i64>) -> RepSpec {
        RepSpec::new(dim, n, Complex64::new(0.0, 1.0)).unwrap()
    }

    fn lam(rows: Vec<Vec<i64>>) -> GcArray {
        GcArray::from_rows_top_down(rows)
    }

    #[test]
    fn validate_examples() {
        let s = spec(4, vec![1]);
        let l = lam(vec![vec![1], vec![0]]);
        assert!(validate_point(&s, &LatticePoint::new(vec![0, 2], l.clone())).unwrap());
        assert!(!validate_point(&s, &LatticePoint::new(vec![2, 1], l.clone())).unwrap());
        let s3 = spec(3, vec![0]);
        assert!(validate_point(&s3, &LatticePoint::new(vec![1], lam(vec![vec![1]]))).unwrap());
        assert!(!validate_point(&s3, &LatticePoint::new(vec![1], lam(vec![vec![2]]))).unwrap());
        assert!(matches!(
            validate_point(&s, &LatticePoint::new(vec![0, 2], lam(vec![vec![1]]))),
            Err(WeylError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn lambda_enumeration_examples() {
        let s3 = spec(3, vec![0]);
        let l = enumerate_lambda_under_m(&s3, &[1]).unwrap();
        assert_eq!(l, vec![lam(vec![vec![-1]]), lam(vec![vec![0]]), lam(vec![vec![1]])]);
        assert_eq!(enumerate_lambda_under_m(&s3, &[0]).unwrap().len(), 1);
        let s4 = spec(4, vec![0]);
        assert_eq!(enumerate_lambda_under_m(&s4, &[0, 1]).unwrap().len(), 4);
    }

    #[test]
    fn m_enumeration_examples() {
        let s = spec(4, vec![0]);
        assert_eq!(
            enumerate_m_for_lambda(&s, &GcArray::zero(4), 3).unwrap(),
            vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![0, 3]]
        );
        let s3 = spec(3, vec![0]);
        assert_eq!(
            enumerate_m_for_lambda(&s3, &GcArray::zero(3), 2).unwrap(),
            vec![vec![0], vec![1], vec![2]]
        );
        let s = spec(4, vec![1]);
        assert_eq!(
            enumerate_m_for_lambda(&s, &lam(vec![vec![1], vec![0]]), 1).unwrap(),
            vec![vec![-1, 1], vec![0, 1], vec![1, 1]]
        );
        assert!(matches!(
            enumerate_m_for_lambda(&s, &lam(vec![vec![1], vec![0]]), 0),
            Err(WeylError::HeightBelowFloor { .. })
        ));
    }

    #[test]
    fn floor_examples() {
        let (h, pts) = floor_of(&spec(4, vec![0]), &GcArray::zero(4)).unwrap();
        assert_eq!((h, pts), (0, vec![vec![0, 0]]));
        let (h, pts) = floor_of(&spec(4, vec![2]), &lam(vec![vec![1], vec![0]])).unwrap();
        assert_eq!(h, 2);
        assert_eq!(pts, vec![vec![-1, 2], vec![0, 2], vec![1, 2]]);
        let (h, pts) = floor_of(&spec(5, vec![0, 3]), &GcArray::zero(5)).unwrap();
        assert_eq!((h, pts), (3, vec![vec![0, 3]]));
    }

    #[test]
    fn cone_examples() {
        assert!(cone_leq(&[0, 0], &[2, 6]));
        assert!(!cone_leq(&[0, 0], &[3, 2]));
        assert!(cone_leq(&[1, 4], &[1, 4]));
    }

    #[test]
    fn path_examples() {
        let s = spec(4, vec![1]);
        let l = lam(vec![vec![1], vec![0]]);
        let paths = enumerate_paths(&s, &l, &[0, 1], &[0, 3], false).unwrap();
        let mut steps: Vec<Vec<Step>> = paths.iter().map(|p| p.steps.clone()).collect();
        steps.sort();
        assert_eq!(
            steps,
            vec![
                vec![Step::Plus(1), Step::Minus(1)],
                vec![Step::Minus(1), Step::Plus(1)],
                vec![Step::Double],
            ]
        );
        let trivial = enumerate_paths(&s, &l, &[0, 1], &[0, 1], false).unwrap();
        assert_eq!(trivial.len(), 1);
        assert!(trivial[0].is_empty());
        let s3 = spec(3, vec![0]);
        let paths = enumerate_paths(&s3, &GcArray::zero(3), &[0], &[3], true).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(matches!(
            enumerate_paths(&s3, &GcArray::zero(3), &[0], &[3], false),
            Err(WeylError::ParityMismatch(_))
        ));
        // parity obstruction for even N
        assert!(enumerate_paths(&s, &l, &[0, 1], &[0, 2], false).unwrap().is_empty());
    }
}
