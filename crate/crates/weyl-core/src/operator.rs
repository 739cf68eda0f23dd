//! Finite-support vectors in the Gelfand–Cejtlin basis and the action of the
//! geodesic-flow generator `X` on them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::coefficients::CoeffContext;
use crate::error::{Result, WeylError};
use crate::gc_lattice::{validate_point, GcArray, LatticePoint};
use crate::rep_params::{laplace_eigenvalue, RepSpec};
use crate::C64;

/// A finite linear combination of basis vectors `u(m, lambda)`.
///
/// Only literal zeros are pruned, so floating-point cancellation noise stays
/// visible.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    spec: RepSpec,
    entries: BTreeMap<LatticePoint, C64>,
}

impl StateVector {
    pub fn zero(spec: &RepSpec) -> Self {
        Self {
            spec: spec.clone(),
            entries: BTreeMap::new(),
        }
    }

    /// The basis vector `u(z)`.
    pub fn basis(spec: &RepSpec, z: LatticePoint) -> Result<Self> {
        let mut v = Self::zero(spec);
        v.insert(z, C64::new(1.0, 0.0))?;
        Ok(v)
    }

    /// Builds a vector from `(point, value)` pairs; repeated points are summed.
    pub fn from_entries<I: IntoIterator<Item = (LatticePoint, C64)>>(spec: &RepSpec, items: I) -> Result<Self> {
        let mut v = Self::zero(spec);
        for (z, c) in items {
            v.add_at(z, c)?;
        }
        Ok(v)
    }

    fn check(&self, z: &LatticePoint) -> Result<()> {
        if validate_point(&self.spec, z)? {
            Ok(())
        } else {
            Err(WeylError::InvalidM {
                m: z.m.clone(),
                reason: format!("({:?}, {:?}) is not a lattice point", z.m, z.lam.rows_top_down()),
            })
        }
    }

    /// Sets the coefficient at `z`, replacing any previous value.
    pub fn insert(&mut self, z: LatticePoint, value: C64) -> Result<()> {
        self.check(&z)?;
        self.insert_unchecked(z, value);
        Ok(())
    }

    /// Adds `value` to the coefficient at `z`.
    pub fn add_at(&mut self, z: LatticePoint, value: C64) -> Result<()> {
        self.check(&z)?;
        self.add_unchecked(z, value);
        Ok(())
    }

    pub(crate) fn insert_unchecked(&mut self, z: LatticePoint, value: C64) {
        if value == C64::new(0.0, 0.0) {
            self.entries.remove(&z);
        } else {
            self.entries.insert(z, value);
        }
    }

    pub(crate) fn add_unchecked(&mut self, z: LatticePoint, value: C64) {
        let cur = self.entries.get(&z).copied().unwrap_or_default();
        self.insert_unchecked(z, cur + value);
    }

    pub fn spec(&self) -> &RepSpec {
        &self.spec
    }

    pub fn entries(&self) -> &BTreeMap<LatticePoint, C64> {
        &self.entries
    }

    pub fn get(&self, z: &LatticePoint) -> C64 {
        self.entries.get(z).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `max m_k` over the support, `None` for the zero vector.
    pub fn support_height(&self) -> Option<i64> {
        self.entries.keys().map(LatticePoint::height).max()
    }

    /// Diagrams `lambda` met by the support.
    pub fn diagrams(&self) -> BTreeSet<GcArray> {
        self.entries.keys().map(|z| z.lam.clone()).collect()
    }

    /// The entries on diagram `lam`, keyed by `m`.
    pub fn block(&self, lam: &GcArray) -> BTreeMap<Vec<i64>, C64> {
        self.entries
            .iter()
            .filter(|(z, _)| &z.lam == lam)
            .map(|(z, &v)| (z.m.clone(), v))
            .collect()
    }

    /// The restriction to diagram `lam`.
    pub fn restrict_to(&self, lam: &GcArray) -> Self {
        Self {
            spec: self.spec.clone(),
            entries: self.entries.iter().filter(|(z, _)| &z.lam == lam).map(|(z, &v)| (z.clone(), v)).collect(),
        }
    }

    fn same_spec(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(WeylError::SpecMismatch("vectors belong to different representations".into()));
        }
        Ok(())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: C64, other: &Self) -> Result<Self> {
        self.same_spec(other)?;
        let mut out = self.clone();
        for (z, &v) in &other.entries {
            out.add_unchecked(z.clone(), a * v);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn scale(&self, a: C64) -> Self {
        let mut out = Self::zero(&self.spec);
        for (z, &v) in &self.entries {
            out.insert_unchecked(z.clone(), a * v);
        }
        out
    }

    /// The Euclidean norm of the coefficients.
    pub fn norm0(&self) -> f64 {
        self.entries.values().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `Xf`, computed diagram by diagram.
pub fn apply_x(f: &StateVector) -> StateVector {
    let mut out = StateVector::zero(f.spec());
    for lam in f.diagrams() {
        let ctx = CoeffContext::new(f.spec(), &lam).expect("diagram of a validated point");
        for (m, v) in f.block(&lam) {
            for (target, c) in x_column(&ctx, &m) {
                out.add_unchecked(LatticePoint::new(target, lam.clone()), c * v);
            }
        }
    }
    out
}

/// The nonzero entries of `X u(m, lambda)`.
pub(crate) fn x_column(ctx: &CoeffContext, m: &[i64]) -> Vec<(Vec<i64>, C64)> {
    let mut out = Vec::with_capacity(2 * ctx.k() + 1);
    for j in 1..=ctx.k() {
        // X u(m) has coefficient A_j^-(m + e_j) = A_j^+(m) at m + e_j.
        let up = ctx.plus(m, j);
        if up.norm_sqr() != 0.0 {
            let mut t = m.to_vec();
            t[j - 1] += 1;
            out.push((t, up));
        }
        let down = ctx.minus(m, j);
        if down.norm_sqr() != 0.0 {
            let mut t = m.to_vec();
            t[j - 1] -= 1;
            out.push((t, down));
        }
    }
    // The denominator of C vanishes only when m_1 is 0 or -1, which for a
    // lattice point forces n_1 = 0 and hence C = 0 before the division.
    let c = ctx.diag(m).expect("C is regular on lattice points");
    if c.norm_sqr() != 0.0 {
        out.push((m.to_vec(), c));
    }
    out
}

/// `||f||_s = (sum (1 + Q(m))^s |f(m, lambda)|^2)^{1/2}`.
pub fn sobolev_norm(f: &StateVector, s: f64) -> Result<f64> {
    let mut total = 0.0;
    for (z, v) in f.entries() {
        total += laplace_eigenvalue(f.spec(), &z.m)?.powf(s) * v.norm_sqr();
    }
    Ok(total.sqrt())
}

/// True when every support point has `lambda ≡ 0`.
pub fn is_m_invariant(f: &StateVector) -> bool {
    f.entries().keys().all(|z| z.lam.is_zero())
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    m: Vec<i64>,
    lambda: Vec<Vec<i64>>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct StateVectorJson {
    spec: RepSpec,
    entries: Vec<EntryJson>,
}

impl Serialize for StateVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateVectorJson {
            spec: self.spec.clone(),
            entries: self
                .entries
                .iter()
                .map(|(z, v)| EntryJson {
                    m: z.m.clone(),
                    lambda: z.lam.rows_top_down(),
                    re: v.re,
                    im: v.im,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = StateVectorJson::deserialize(d)?;
        let items = raw.entries.into_iter().map(|e| {
            (
                LatticePoint::new(e.m, GcArray::from_rows_top_down(e.lambda)),
                C64::new(e.re, e.im),
            )
        });
        StateVector::from_entries(&raw.spec, items).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoeffContext;
    use approx::assert_relative_eq;

    fn pt(m: Vec<i64>, rows: Vec<Vec<i64>>) -> LatticePoint {
        LatticePoint::new(m, GcArray::from_rows_top_down(rows))
    }

    #[test]
    fn x_on_basis_vectors() {
        let spec = RepSpec::new(4, vec![1], C64::new(0.0, 1.0)).unwrap();
        let lam = GcArray::from_rows_top_down(vec![vec![1], vec![0]]);
        let z = LatticePoint::new(vec![0, 2], lam.clone());
        let xf = apply_x(&StateVector::basis(&spec, z).unwrap());
        assert!(xf.len() <= 4);
        let ctx = CoeffContext::new(&spec, &lam).unwrap();
        for (w, v) in xf.entries() {
            let d: Vec<i64> = w.m.iter().zip([0, 2]).map(|(a, b)| a - b).collect();
            let j = d.iter().position(|&x| x != 0).unwrap() + 1;
            let expect = if d[j - 1] > 0 { ctx.plus(&[0, 2], j) } else { ctx.minus(&[0, 2], j) };
            assert_eq!(*v, expect);
        }

        let spec = RepSpec::new(3, vec![0], C64::new(0.0, 1.0)).unwrap();
        let xf = apply_x(&StateVector::basis(&spec, pt(vec![0], vec![vec![0]])).unwrap());
        assert_eq!(xf.len(), 1);
        let ctx = CoeffContext::new(&spec, &GcArray::zero(3)).unwrap();
        assert_eq!(xf.get(&pt(vec![1], vec![vec![0]])), ctx.plus(&[0], 1));
        assert!(apply_x(&StateVector::zero(&spec)).is_empty());
    }

    #[test]
    fn norms() {
        let spec = RepSpec::new(3, vec![0], C64::new(0.0, 0.0)).unwrap();
        let f = StateVector::from_entries(
            &spec,
            [
                (pt(vec![0], vec![vec![0]]), C64::new(1.0, 0.0)),
                (pt(vec![1], vec![vec![0]]), C64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        assert_relative_eq!(sobolev_norm(&f, 1.0).unwrap(), 8f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(sobolev_norm(&f, 0.0).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
        let u = StateVector::basis(&spec, pt(vec![3], vec![vec![-2]])).unwrap();
        let q = laplace_eigenvalue(&spec, &[3]).unwrap();
        assert_relative_eq!(sobolev_norm(&u, 1.5).unwrap(), q.powf(0.75), epsilon = 1e-12);
    }

    #[test]
    fn m_invariance() {
        let spec = RepSpec::new(4, vec![1], C64::new(0.0, 1.0)).unwrap();
        assert!(is_m_invariant(&StateVector::zero(&spec)));
        let f = StateVector::basis(&spec, pt(vec![0, 2], vec![vec![0], vec![0]])).unwrap();
        assert!(is_m_invariant(&f));
        let g = StateVector::basis(&spec, pt(vec![1, 2], vec![vec![1], vec![0]])).unwrap();
        assert!(!is_m_invariant(&f.add(&g).unwrap()));
    }

    #[test]
    fn json_round_trip() {
        let spec = RepSpec::new(5, vec![0, 1], C64::new(0.0, 0.5)).unwrap();
        let f = StateVector::from_entries(
            &spec,
            [(pt(vec![1, 2], vec![vec![1, 2], vec![1], vec![0]]), C64::new(0.5, -1.0))],
        )
        .unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let back: StateVector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
        let bad = text.replace("[1,2]", "[3,4]");
        assert!(serde_json::from_str::<StateVector>(&bad).is_err());
    }
}
