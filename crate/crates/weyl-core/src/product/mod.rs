//! Tensor products of representations of `SO(N_1,1) x … x SO(N_d,1)`:
//! product vectors, the commuting generators `X_i`, restrictions, the
//! splitting `f = f_otimes + f_d`, product obstructions and the inductive
//! top-degree solver. Forms and the lower-degree solvers live in [`forms`].

pub mod forms;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coboundary::{floor_family, solve_gram, solve_rank1_with_tol, TOL_OBS};
use crate::coefficients::CoeffContext;
use crate::distributions::{InvariantDistribution, LevelSweep};
use crate::error::{Result, WeylError};
use crate::gc_lattice::{validate_point, GcArray, LatticePoint};
use crate::operator::{x_column, StateVector};
use crate::rep_params::{admits_m_invariants, laplace_eigenvalue, RepSpec};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Parameters of a tensor product, one [`RepSpec`] per factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductRepSpec {
    factors: Vec<RepSpec>,
}

impl ProductRepSpec {
    pub fn new(factors: Vec<RepSpec>) -> Result<Self> {
        if factors.is_empty() {
            return Err(WeylError::ShapeMismatch("a product needs at least one factor".into()));
        }
        Ok(Self { factors })
    }

    pub fn d(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[RepSpec] {
        &self.factors
    }

    /// Factor `i` (0-based).
    pub fn factor(&self, i: usize) -> &RepSpec {
        &self.factors[i]
    }

    /// Every factor admits `M`-invariant vectors.
    pub fn admits_m_invariants(&self) -> bool {
        self.factors.iter().all(admits_m_invariants)
    }

    /// The product of the factors in `range` (0-based, half-open).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            factors: self.factors[range].to_vec(),
        }
    }

    /// The product with factor `l` (0-based) removed.
    pub fn without(&self, l: usize) -> Self {
        let mut factors = self.factors.clone();
        factors.remove(l);
        Self { factors }
    }
}

/// A product basis index `z = (z_1, …, z_d)`.
pub type ProductPoint = Vec<LatticePoint>;

/// A finite linear combination of tensor basis vectors `u_1(z_1) ⊗ … ⊗ u_d(z_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductVector {
    pspec: ProductRepSpec,
    entries: BTreeMap<ProductPoint, C64>,
}

impl ProductVector {
    pub fn zero(pspec: &ProductRepSpec) -> Self {
        Self {
            pspec: pspec.clone(),
            entries: BTreeMap::new(),
        }
    }

    pub fn basis(pspec: &ProductRepSpec, z: ProductPoint) -> Result<Self> {
        let mut v = Self::zero(pspec);
        v.insert(z, C64::new(1.0, 0.0))?;
        Ok(v)
    }

    /// Builds a vector from `(point, value)` pairs; repeated points are summed.
    pub fn from_entries<I: IntoIterator<Item = (ProductPoint, C64)>>(pspec: &ProductRepSpec, items: I) -> Result<Self> {
        let mut v = Self::zero(pspec);
        for (z, c) in items {
            v.check(&z)?;
            v.add_unchecked(z, c);
        }
        Ok(v)
    }

    /// The one-factor product vector with the entries of `f`.
    pub fn from_state_vector(f: &StateVector) -> Self {
        Self {
            pspec: ProductRepSpec {
                factors: vec![f.spec().clone()],
            },
            entries: f.entries().iter().map(|(z, &v)| (vec![z.clone()], v)).collect(),
        }
    }

    /// The single-factor view of a one-factor product vector.
    pub fn to_state_vector(&self) -> Result<StateVector> {
        if self.pspec.d() != 1 {
            return Err(WeylError::ShapeMismatch(format!("expected one factor, got {}", self.pspec.d())));
        }
        let mut out = StateVector::zero(self.pspec.factor(0));
        for (z, &v) in &self.entries {
            out.insert_unchecked(z[0].clone(), v);
        }
        Ok(out)
    }

    /// `a ⊗ b`.
    pub fn tensor(a: &Self, b: &Self) -> Self {
        let mut factors = a.pspec.factors.clone();
        factors.extend(b.pspec.factors.iter().cloned());
        let mut out = Self::zero(&ProductRepSpec { factors });
        for (za, &va) in &a.entries {
            for (zb, &vb) in &b.entries {
                let mut z = za.clone();
                z.extend(zb.iter().cloned());
                out.insert_unchecked(z, va * vb);
            }
        }
        out
    }

    fn check(&self, z: &ProductPoint) -> Result<()> {
        if z.len() != self.pspec.d() {
            return Err(WeylError::ShapeMismatch(format!(
                "product point has {} components, expected {}",
                z.len(),
                self.pspec.d()
            )));
        }
        for (zi, spec) in z.iter().zip(&self.pspec.factors) {
            if !validate_point(spec, zi)? {
                return Err(WeylError::InvalidM {
                    m: zi.m.clone(),
                    reason: format!("({:?}, {:?}) is not a lattice point", zi.m, zi.lam.rows_top_down()),
                });
            }
        }
        Ok(())
    }

    pub fn insert(&mut self, z: ProductPoint, value: C64) -> Result<()> {
        self.check(&z)?;
        self.insert_unchecked(z, value);
        Ok(())
    }

    pub fn add_at(&mut self, z: ProductPoint, value: C64) -> Result<()> {
        self.check(&z)?;
        self.add_unchecked(z, value);
        Ok(())
    }

    pub(crate) fn insert_unchecked(&mut self, z: ProductPoint, value: C64) {
        if value == ZERO {
            self.entries.remove(&z);
        } else {
            self.entries.insert(z, value);
        }
    }

    pub(crate) fn add_unchecked(&mut self, z: ProductPoint, value: C64) {
        let cur = self.entries.get(&z).copied().unwrap_or_default();
        self.insert_unchecked(z, cur + value);
    }

    pub fn pspec(&self) -> &ProductRepSpec {
        &self.pspec
    }

    pub fn entries(&self) -> &BTreeMap<ProductPoint, C64> {
        &self.entries
    }

    pub fn get(&self, z: &ProductPoint) -> C64 {
        self.entries.get(z).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm0(&self) -> f64 {
        self.entries.values().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max m_k` of factor `i` (0-based) over the support.
    pub fn support_height(&self, i: usize) -> Option<i64> {
        self.entries.keys().map(|z| z[i].height()).max()
    }

    /// Every component has `lambda ≡ 0`.
    pub fn is_m_invariant(&self) -> bool {
        self.entries.keys().all(|z| z.iter().all(|zi| zi.lam.is_zero()))
    }

    fn same_pspec(&self, other: &Self) -> Result<()> {
        if self.pspec != other.pspec {
            return Err(WeylError::SpecMismatch("product vectors belong to different representations".into()));
        }
        Ok(())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: C64, other: &Self) -> Result<Self> {
        self.same_pspec(other)?;
        let mut out = self.clone();
        for (z, &v) in &other.entries {
            out.add_unchecked(z.clone(), a * v);
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    pub fn scale(&self, a: C64) -> Self {
        let mut out = Self::zero(&self.pspec);
        for (z, &v) in &self.entries {
            out.insert_unchecked(z.clone(), a * v);
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct ProductEntryJson {
    z: Vec<LatticePoint>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct ProductVectorJson {
    pspec: ProductRepSpec,
    entries: Vec<ProductEntryJson>,
}

impl Serialize for ProductVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProductVectorJson {
            pspec: self.pspec.clone(),
            entries: self
                .entries
                .iter()
                .map(|(z, v)| ProductEntryJson {
                    z: z.clone(),
                    re: v.re,
                    im: v.im,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProductVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ProductVectorJson::deserialize(d)?;
        let items = raw.entries.into_iter().map(|e| (e.z, C64::new(e.re, e.im)));
        ProductVector::from_entries(&raw.pspec, items).map_err(serde::de::Error::custom)
    }
}

/// Coefficient contexts per diagram of one factor, built on demand.
struct ContextCache<'a> {
    spec: &'a RepSpec,
    map: HashMap<GcArray, Arc<CoeffContext>>,
}

impl<'a> ContextCache<'a> {
    fn new(spec: &'a RepSpec) -> Self {
        Self {
            spec,
            map: HashMap::new(),
        }
    }

    fn get(&mut self, lam: &GcArray) -> Result<Arc<CoeffContext>> {
        if let Some(c) = self.map.get(lam) {
            return Ok(Arc::clone(c));
        }
        let c = Arc::new(CoeffContext::new(self.spec, lam)?);
        self.map.insert(lam.clone(), Arc::clone(&c));
        Ok(c)
    }
}

fn check_index(i: usize, d: usize) -> Result<usize> {
    if i == 0 || i > d {
        return Err(WeylError::IndexOutOfRange { index: i, len: d });
    }
    Ok(i - 1)
}

/// `X_i f` (`i` is 1-based): the ladder action on factor `i` only.
pub fn apply_xi(f: &ProductVector, i: usize) -> Result<ProductVector> {
    let i0 = check_index(i, f.pspec.d())?;
    let mut cache = ContextCache::new(f.pspec.factor(i0));
    let mut out = ProductVector::zero(&f.pspec);
    for (z, &v) in &f.entries {
        let ctx = cache.get(&z[i0].lam)?;
        for (m, c) in x_column(&ctx, &z[i0].m) {
            let mut y = z.clone();
            y[i0].m = m;
            out.add_unchecked(y, c * v);
        }
    }
    Ok(out)
}

/// `Q_+(z) = sum_i Q_i(m_{z_i})`.
fn q_plus(pspec: &ProductRepSpec, z: &ProductPoint) -> Result<f64> {
    let mut q = 0.0;
    for (zi, spec) in z.iter().zip(&pspec.factors) {
        q += laplace_eigenvalue(spec, &zi.m)? - 1.0;
    }
    Ok(q)
}

/// `||f||_s = (sum (1 + Q_+(z))^s |f(z)|^2)^{1/2}`.
pub fn product_sobolev_norm(f: &ProductVector, s: f64) -> Result<f64> {
    let mut total = 0.0;
    for (z, v) in &f.entries {
        total += (1.0 + q_plus(&f.pspec, z)?).powf(s) * v.norm_sqr();
    }
    Ok(total.sqrt())
}

/// `(f|_{z_l})`: the vector on the remaining factors obtained by fixing
/// component `l` (1-based) at `z_l`.
pub fn restrict(f: &ProductVector, l: usize, z_l: &LatticePoint) -> Result<ProductVector> {
    let l0 = check_index(l, f.pspec.d())?;
    if f.pspec.d() < 2 {
        return Err(WeylError::ShapeMismatch("restriction needs at least two factors".into()));
    }
    let mut out = ProductVector::zero(&f.pspec.without(l0));
    for (z, &v) in &f.entries {
        if &z[l0] == z_l {
            let mut y = z.clone();
            y.remove(l0);
            out.insert_unchecked(y, v);
        }
    }
    Ok(out)
}

/// `||(f|_{z_l})||_s`, which omits `Q_l`.
pub fn restricted_norm(f: &ProductVector, l: usize, z_l: &LatticePoint, s: f64) -> Result<f64> {
    product_sobolev_norm(&restrict(f, l, z_l)?, s)
}

/// Both sides of `sum_{z_l} (1 + Q_l(z_l))^s ||(f|_{z_l})||_{s'}^2 <= ||f||_{s+s'}^2`.
pub fn adding_inequality(f: &ProductVector, l: usize, s: f64, s_prime: f64) -> Result<(f64, f64)> {
    let l0 = check_index(l, f.pspec.d())?;
    let slots: BTreeSet<LatticePoint> = f.entries.keys().map(|z| z[l0].clone()).collect();
    let mut lhs = 0.0;
    for z_l in &slots {
        let weight = laplace_eigenvalue(f.pspec.factor(l0), &z_l.m)?.powf(s);
        lhs += weight * restricted_norm(f, l, z_l, s_prime)?.powi(2);
    }
    let rhs = product_sobolev_norm(f, s + s_prime)?.powi(2);
    Ok((lhs, rhs))
}

/// Floor families of factor `i` for each diagram it meets, swept to the
/// highest point of the support on that diagram.
fn factor_families(f: &ProductVector, i: usize) -> Result<HashMap<GcArray, LevelSweep>> {
    let mut tops: BTreeMap<GcArray, i64> = BTreeMap::new();
    for z in f.entries.keys() {
        let t = tops.entry(z[i].lam.clone()).or_insert(i64::MIN);
        *t = (*t).max(z[i].height());
    }
    let mut cache = ContextCache::new(f.pspec.factor(i));
    let mut out = HashMap::new();
    for (lam, top) in tops {
        let ctx = cache.get(&lam)?;
        out.insert(lam, floor_family(&ctx, top)?);
    }
    Ok(out)
}

/// The nonzero floor-distribution values `(anchor index, D^anchor(z_i))`.
fn family_values(fam: &LevelSweep, zi: &LatticePoint) -> Vec<(usize, C64)> {
    let cyl = fam.ctx().cylinder();
    let (idx, h) = cyl.locate(&zi.m).expect("validated component");
    (0..cyl.len_lower())
        .map(|c| (c, fam.get(idx, h, c)))
        .filter(|(_, v)| *v != ZERO)
        .collect()
}

/// `f = f_otimes + f_d` with `f_otimes(z, w) = sum_{z'} f(z, z') D^w(z')` for
/// floor anchors `w` of the last factor and zero elsewhere.
pub fn split_f(f: &ProductVector) -> Result<(ProductVector, ProductVector)> {
    let last = f.pspec.d() - 1;
    let fams = factor_families(f, last)?;
    let mut f_otimes = ProductVector::zero(&f.pspec);
    for (z, &v) in &f.entries {
        let lam = &z[last].lam;
        let fam = &fams[lam];
        let cyl = fam.ctx().cylinder();
        for (c, dv) in family_values(fam, &z[last]) {
            let mut y = z.clone();
            y[last] = LatticePoint::new(cyl.point(c, cyl.floor_height()), lam.clone());
            f_otimes.add_unchecked(y, v * dv);
        }
    }
    let f_d = f.sub(&f_otimes)?;
    Ok((f_otimes, f_d))
}

/// `D^w(f) = sum_z f(z) prod_i D^{w_i}(z_i)` for a tuple of floor anchors.
pub fn product_dist_evaluate(pspec: &ProductRepSpec, anchors: &[LatticePoint], f: &ProductVector) -> Result<C64> {
    if &f.pspec != pspec || anchors.len() != pspec.d() {
        return Err(WeylError::SpecMismatch("anchors, vector and product spec disagree".into()));
    }
    let mut dists = Vec::with_capacity(anchors.len());
    for (i, w) in anchors.iter().enumerate() {
        let mut d = InvariantDistribution::new(pspec.factor(i), w.clone())?;
        d.extend_to(f.support_height(i).unwrap_or(w.height()))?;
        dists.push(d);
    }
    let mut total = ZERO;
    for (z, &v) in &f.entries {
        let mut term = v;
        for (d, zi) in dists.iter().zip(z) {
            if zi.lam != *d.lam() {
                term = ZERO;
                break;
            }
            term *= d.value(&zi.m)?;
        }
        total += term;
    }
    Ok(total)
}

/// Product floor obstructions keyed by anchor tuples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProductObstructions {
    pub values: BTreeMap<ProductPoint, C64>,
}

impl ProductObstructions {
    pub fn max_abs(&self) -> f64 {
        self.values.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub(crate) fn ensure_below(&self, tol: f64) -> Result<()> {
        let bad: Vec<String> = self
            .values
            .iter()
            .filter(|(_, v)| v.norm() > tol)
            .map(|(w, v)| {
                let ms: Vec<&Vec<i64>> = w.iter().map(|p| &p.m).collect();
                format!("anchors {ms:?}: {:.3e}", v.norm())
            })
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(WeylError::ObstructionNonzero(bad.join("; ")))
        }
    }
}

#[derive(Serialize)]
struct ProductObstructionJson<'a> {
    anchors: &'a ProductPoint,
    re: f64,
    im: f64,
}

impl Serialize for ProductObstructions {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.values.len()))?;
        for (anchors, v) in &self.values {
            seq.serialize_element(&ProductObstructionJson { anchors, re: v.re, im: v.im })?;
        }
        seq.end()
    }
}

fn cartesian_indices(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(sizes.len())];
    for &n in sizes {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// Every product floor obstruction over the diagram tuples met by `f`.
pub fn product_floor_obstructions(f: &ProductVector) -> Result<ProductObstructions> {
    let d = f.pspec.d();
    if f.pspec.factors.iter().any(RepSpec::is_trivial) {
        return Err(WeylError::TrivialRepresentation);
    }
    let fams: Vec<HashMap<GcArray, LevelSweep>> = (0..d).map(|i| factor_families(f, i)).collect::<Result<_>>()?;
    let anchor = |i: usize, lam: &GcArray, c: usize| {
        let cyl = fams[i][lam].ctx().cylinder();
        LatticePoint::new(cyl.point(c, cyl.floor_height()), lam.clone())
    };
    let mut values: BTreeMap<ProductPoint, C64> = BTreeMap::new();
    let tuples: BTreeSet<Vec<GcArray>> = f.entries.keys().map(|z| z.iter().map(|p| p.lam.clone()).collect()).collect();
    for lams in &tuples {
        let sizes: Vec<usize> = lams.iter().enumerate().map(|(i, l)| fams[i][l].ctx().cylinder().len_lower()).collect();
        for idx in cartesian_indices(&sizes) {
            let key = idx.iter().enumerate().map(|(i, &c)| anchor(i, &lams[i], c)).collect();
            values.insert(key, ZERO);
        }
    }
    for (z, &v) in &f.entries {
        let per: Vec<Vec<(usize, C64)>> = (0..d).map(|i| family_values(&fams[i][&z[i].lam], &z[i])).collect();
        let sizes: Vec<usize> = per.iter().map(Vec::len).collect();
        for idx in cartesian_indices(&sizes) {
            let mut term = v;
            let mut key = Vec::with_capacity(d);
            for (i, &t) in idx.iter().enumerate() {
                let (c, dv) = per[i][t];
                term *= dv;
                key.push(anchor(i, &z[i].lam, c));
            }
            *values.get_mut(&key).expect("anchor tuple registered") += term;
        }
    }
    Ok(ProductObstructions { values })
}

/// Removes every product floor obstruction: `f' = f - sum_w c_w Phi_w` where
/// `Phi_w = ⊗_i conj(D^{w_i})` on the per-factor bounding boxes and the Gram
/// matrix is the Kronecker product of the per-factor Gram matrices.
pub fn project_product_to_kernel(f: &ProductVector) -> Result<ProductVector> {
    let d = f.pspec.d();
    if f.pspec.factors.iter().any(RepSpec::is_trivial) {
        return Err(WeylError::TrivialRepresentation);
    }
    let mut groups: BTreeMap<Vec<GcArray>, Vec<(&ProductPoint, C64)>> = BTreeMap::new();
    for (z, &v) in &f.entries {
        groups.entry(z.iter().map(|p| p.lam.clone()).collect()).or_default().push((z, v));
    }
    let mut out = f.clone();
    let mut caches: Vec<ContextCache> = f.pspec.factors.iter().map(ContextCache::new).collect();
    for (lams, items) in groups {
        // Per-factor boxes, families and Gram matrices.
        let mut fams = Vec::with_capacity(d);
        let mut boxes: Vec<Vec<(usize, i64)>> = Vec::with_capacity(d);
        let mut grams = Vec::with_capacity(d);
        for i in 0..d {
            let ctx = caches[i].get(&lams[i])?;
            let cyl = ctx.cylinder();
            let top = items.iter().map(|(z, _)| z[i].height()).max().expect("nonempty group");
            let fam = floor_family(&ctx, top)?;
            let w = cyl.len_lower();
            let pts: Vec<(usize, i64)> = (cyl.floor_height()..=top).flat_map(|h| (0..w).map(move |j| (j, h))).collect();
            let mut g = DMatrix::<C64>::zeros(w, w);
            for &(j, h) in &pts {
                for a in 0..w {
                    for b in 0..w {
                        g[(a, b)] += fam.get(j, h, a) * fam.get(j, h, b).conj();
                    }
                }
            }
            grams.push(g);
            boxes.push(pts);
            fams.push(fam);
        }
        let gram = grams.iter().skip(1).fold(grams[0].clone(), |acc, g| acc.kronecker(g));
        let sizes: Vec<usize> = fams.iter().map(|f| f.ctx().cylinder().len_lower()).collect();
        let multi = cartesian_indices(&sizes);
        let rhs: Vec<C64> = multi
            .iter()
            .map(|v| {
                items
                    .iter()
                    .map(|(z, val)| {
                        let mut t = *val;
                        for i in 0..d {
                            let (j, h) = fams[i].ctx().cylinder().locate(&z[i].m).expect("validated");
                            t *= fams[i].get(j, h, v[i]);
                        }
                        t
                    })
                    .sum()
            })
            .collect();
        let coef = solve_gram(gram, rhs)?;
        let box_sizes: Vec<usize> = boxes.iter().map(Vec::len).collect();
        for pos in cartesian_indices(&box_sizes) {
            let corr: C64 = multi
                .iter()
                .zip(&coef)
                .map(|(v, &c)| {
                    let mut t = c;
                    for i in 0..d {
                        let (j, h) = boxes[i][pos[i]];
                        t *= fams[i].get(j, h, v[i]).conj();
                    }
                    t
                })
                .sum();
            if corr != ZERO {
                let z: ProductPoint = (0..d)
                    .map(|i| {
                        let (j, h) = boxes[i][pos[i]];
                        LatticePoint::new(fams[i].ctx().cylinder().point(j, h), lams[i].clone())
                    })
                    .collect();
                out.add_unchecked(z, -corr);
            }
        }
    }
    Ok(out)
}

/// Groups `f` by the component of factor `l` (0-based) into restricted vectors.
pub(crate) fn slices(f: &ProductVector, l: usize) -> BTreeMap<LatticePoint, ProductVector> {
    let rest = f.pspec.without(l);
    let mut out: BTreeMap<LatticePoint, ProductVector> = BTreeMap::new();
    for (z, &v) in &f.entries {
        let mut y = z.clone();
        let key = y.remove(l);
        out.entry(key).or_insert_with(|| ProductVector::zero(&rest)).insert_unchecked(y, v);
    }
    out
}

/// Inserts the entries of `part` (over factors other than `l`) with
/// component `l` fixed at `z_l`.
pub(crate) fn embed(out: &mut ProductVector, part: &ProductVector, l: usize, z_l: &LatticePoint) {
    for (y, &v) in &part.entries {
        let mut z = y.clone();
        z.insert(l, z_l.clone());
        out.add_unchecked(z, v);
    }
}

/// Largest product obstruction of the slices `(f_otimes|_w)` and largest
/// last-factor obstruction of the slices `(f_d|_z)`.
pub fn slice_obstructions(f: &ProductVector) -> Result<(f64, f64)> {
    let d = f.pspec.d();
    if d < 2 {
        return Err(WeylError::ShapeMismatch("slicing needs at least two factors".into()));
    }
    let (f_otimes, f_d) = split_f(f)?;
    let mut worst_otimes: f64 = 0.0;
    for part in slices(&f_otimes, d - 1).values() {
        worst_otimes = worst_otimes.max(product_floor_obstructions(part)?.max_abs());
    }
    let mut worst_d: f64 = 0.0;
    let rest: Vec<usize> = (0..d - 1).collect();
    for part in slices_keep(&f_d, &rest).values() {
        worst_d = worst_d.max(product_floor_obstructions(part)?.max_abs());
    }
    Ok((worst_otimes, worst_d))
}

/// Groups `f` by the components listed in `fixed`, keeping the others.
pub(crate) fn slices_keep(f: &ProductVector, fixed: &[usize]) -> BTreeMap<ProductPoint, ProductVector> {
    let keep: Vec<usize> = (0..f.pspec.d()).filter(|i| !fixed.contains(i)).collect();
    let rest = ProductRepSpec {
        factors: keep.iter().map(|&i| f.pspec.factors[i].clone()).collect(),
    };
    let mut out: BTreeMap<ProductPoint, ProductVector> = BTreeMap::new();
    for (z, &v) in &f.entries {
        let key: ProductPoint = fixed.iter().map(|&i| z[i].clone()).collect();
        let y: ProductPoint = keep.iter().map(|&i| z[i].clone()).collect();
        out.entry(key).or_insert_with(|| ProductVector::zero(&rest)).insert_unchecked(y, v);
    }
    out
}

fn top_degree_inner(f: &ProductVector, tol: f64) -> Result<Vec<ProductVector>> {
    let d = f.pspec.d();
    if d == 1 {
        let g = solve_rank1_with_tol(&f.to_state_vector()?, tol)?;
        return Ok(vec![ProductVector::from_state_vector(&g)]);
    }
    let (f_otimes, f_d) = split_f(f)?;
    let last = d - 1;

    // (f_otimes|_w) is solved in the first d-1 factors for each floor anchor w.
    let by_anchor: Vec<(LatticePoint, ProductVector)> = slices(&f_otimes, last).into_iter().collect();
    let solved: Vec<(LatticePoint, Vec<ProductVector>)> = by_anchor
        .into_par_iter()
        .map(|(w, part)| Ok((w, top_degree_inner(&part, tol)?)))
        .collect::<Result<_>>()?;

    // (f_d|_z) is solved in the last factor for each z.
    let fixed: Vec<usize> = (0..last).collect();
    let by_rest: Vec<(ProductPoint, ProductVector)> = slices_keep(&f_d, &fixed).into_iter().collect();
    let solved_last: Vec<(ProductPoint, StateVector)> = by_rest
        .into_par_iter()
        .map(|(z, part)| Ok((z, solve_rank1_with_tol(&part.to_state_vector()?, tol)?)))
        .collect::<Result<_>>()?;

    let mut gs = vec![ProductVector::zero(&f.pspec); d];
    for (w, parts) in &solved {
        for (i, g) in parts.iter().enumerate() {
            embed(&mut gs[i], g, last, w);
        }
    }
    for (z, g) in &solved_last {
        for (p, &v) in g.entries() {
            let mut y = z.clone();
            y.push(p.clone());
            gs[last].add_unchecked(y, v);
        }
    }
    Ok(gs)
}

fn top_degree_entry(f: &ProductVector) -> Result<Vec<ProductVector>> {
    if f.pspec.d() < 2 {
        return Err(WeylError::ShapeMismatch("the top-degree solver needs d >= 2".into()));
    }
    let tol = TOL_OBS * f.norm0().max(1.0);
    product_floor_obstructions(f)?.ensure_below(tol)?;
    top_degree_inner(f, tol)
}

/// Solves `sum_i X_i g_i = f` for `M`-invariant `f` in a product whose factors
/// all admit `M`-invariant vectors.
pub fn solve_top_degree(f: &ProductVector) -> Result<Vec<ProductVector>> {
    if !f.pspec.admits_m_invariants() || !f.is_m_invariant() {
        return Err(WeylError::NotMInvariant);
    }
    top_degree_entry(f)
}

/// Experimental: the same induction for arbitrary diagrams.
pub fn solve_top_degree_general(f: &ProductVector) -> Result<Vec<ProductVector>> {
    top_degree_entry(f)
}

/// `||sum_i X_i g_i - f||_0`.
pub fn top_degree_residual(f: &ProductVector, gs: &[ProductVector]) -> Result<f64> {
    let mut acc = f.scale(C64::new(-1.0, 0.0));
    for (i, g) in gs.iter().enumerate() {
        acc = acc.add(&apply_xi(g, i + 1)?)?;
    }
    Ok(acc.norm0())
}

/// `sigma_d(s) = (2^d + 2^{d-1} - 2) s - (2^{d-1} - 1)`, the solution of
/// `sigma_n = 2 (sigma_{n-1} + s) - 1`, `sigma_1 = s`.
pub fn sigma_d(d: u32, s: f64) -> f64 {
    assert!(d >= 1, "sigma_d needs d >= 1");
    let p = 2f64.powi(d as i32);
    (p + p / 2.0 - 2.0) * s - (p / 2.0 - 1.0)
}

/// `varsigma_2(s) = 4s - 1` and, for `d >= 3`,
/// `varsigma_d(s) = max(varsigma_{d-1}(r), sigma_{d-1}(r)) + varsigma_{d-1}(s) + s`
/// with `r = varsigma_{d-1}(s) + s + 1`.
pub fn varsigma_d(d: u32, s: f64) -> f64 {
    assert!(d >= 2, "varsigma_d needs d >= 2");
    if d == 2 {
        return 4.0 * s - 1.0;
    }
    let prev = varsigma_d(d - 1, s);
    let r = prev + s + 1.0;
    varsigma_d(d - 1, r).max(sigma_d(d - 1, r)) + prev + s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(spec: &RepSpec, h: i64) -> LatticePoint {
        let mut m = vec![0; spec.k()];
        m[spec.k() - 1] = h;
        LatticePoint::new(m, GcArray::zero(spec.dim()))
    }

    fn pspec2() -> ProductRepSpec {
        ProductRepSpec::new(vec![
            RepSpec::new(3, vec![0], C64::new(0.0, 1.0)).unwrap(),
            RepSpec::new(4, vec![1], C64::new(0.3, 0.0)).unwrap(),
        ])
        .unwrap()
    }

    fn sample(ps: &ProductRepSpec, seed: u64) -> ProductVector {
        let mut items = Vec::new();
        let mut x = seed;
        for a in 0..4 {
            for b in 1..4 {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let re = ((x >> 33) as f64 / (1u64 << 31) as f64) - 0.5;
                let im = ((x >> 13) as u32 as f64 / u32::MAX as f64) - 0.5;
                items.push((vec![chain(ps.factor(0), a), chain(ps.factor(1), b)], C64::new(re, im)));
            }
        }
        ProductVector::from_entries(ps, items).unwrap()
    }

    #[test]
    fn generators_commute_and_index_checks() {
        let ps = pspec2();
        let f = sample(&ps, 1);
        let a = apply_xi(&apply_xi(&f, 1).unwrap(), 2).unwrap();
        let b = apply_xi(&apply_xi(&f, 2).unwrap(), 1).unwrap();
        assert!(a.sub(&b).unwrap().norm0() < 1e-12 * a.norm0());
        assert!(matches!(apply_xi(&f, 3), Err(WeylError::IndexOutOfRange { .. })));
        assert!(apply_xi(&ProductVector::zero(&ps), 1).unwrap().is_empty());
    }

    #[test]
    fn restriction_and_adding() {
        let ps = pspec2();
        let z = vec![chain(ps.factor(0), 1), chain(ps.factor(1), 2)];
        let u = ProductVector::basis(&ps, z.clone()).unwrap();
        let r = restrict(&u, 1, &z[0]).unwrap();
        assert_eq!(r.entries().keys().next().unwrap(), &vec![z[1].clone()]);
        let f = sample(&ps, 7);
        for s in 0..4 {
            for sp in 0..4 {
                for l in 1..=2 {
                    let (lhs, rhs) = adding_inequality(&f, l, s as f64, sp as f64).unwrap();
                    assert!(lhs <= rhs * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn splitting() {
        let ps = pspec2();
        let f = sample(&ps, 3);
        let (fo, fd) = split_f(&f).unwrap();
        assert_eq!(fd, f.sub(&fo).unwrap());
        let w = chain(ps.factor(1), 1);
        let z = chain(ps.factor(0), 2);
        let u = ProductVector::basis(&ps, vec![z.clone(), w]).unwrap();
        let (fo, fd) = split_f(&u).unwrap();
        assert_eq!(fo, u);
        assert!(fd.is_empty());
        let h = ProductVector::from_entries(
            &ps,
            [(vec![z.clone(), chain(ps.factor(1), 2)], C64::new(1.0, 0.0)), (vec![z, chain(ps.factor(1), 4)], C64::new(0.0, 1.0))],
        )
        .unwrap();
        let xh = apply_xi(&h, 2).unwrap();
        let (fo, _) = split_f(&xh).unwrap();
        assert!(fo.norm0() < 1e-13);
    }

    #[test]
    fn product_distributions() {
        let ps = pspec2();
        let anchors = vec![chain(ps.factor(0), 0), chain(ps.factor(1), 1)];
        let u = ProductVector::basis(&ps, anchors.clone()).unwrap();
        assert_eq!(product_dist_evaluate(&ps, &anchors, &u).unwrap(), C64::new(1.0, 0.0));
        let h = sample(&ps, 11);
        for i in 1..=2 {
            let xh = apply_xi(&h, i).unwrap();
            assert!(product_dist_evaluate(&ps, &anchors, &xh).unwrap().norm() < 1e-10 * h.norm0());
        }
    }

    #[test]
    fn projection_and_top_degree() {
        let ps = pspec2();
        let f = project_product_to_kernel(&sample(&ps, 5)).unwrap();
        assert!(product_floor_obstructions(&f).unwrap().max_abs() < 1e-10 * f.norm0());
        let (a, b) = slice_obstructions(&f).unwrap();
        assert!(a < 1e-9 * f.norm0() && b < 1e-9 * f.norm0());
        let gs = solve_top_degree(&f).unwrap();
        assert!(top_degree_residual(&f, &gs).unwrap() < 1e-8 * f.norm0());
        let u = ProductVector::basis(&ps, vec![chain(ps.factor(0), 0), chain(ps.factor(1), 1)]).unwrap();
        assert!(matches!(solve_top_degree(&u), Err(WeylError::ObstructionNonzero(_))));
        let gs = solve_top_degree(&ProductVector::zero(&ps)).unwrap();
        assert!(gs.iter().all(ProductVector::is_empty));
    }

    #[test]
    fn sobolev_bookkeeping() {
        for d in 1..6 {
            let mut rec = 1.5;
            for _ in 1..d {
                rec = 2.0 * (rec + 1.5) - 1.0;
            }
            assert_eq!(sigma_d(d, 1.5), rec);
        }
        assert_eq!(varsigma_d(2, 2.0), 7.0);
        assert_eq!(varsigma_d(3, 2.0), (4.0 * 10.0 - 1.0f64).max(sigma_d(2, 10.0)) + 7.0 + 2.0);
    }
}
