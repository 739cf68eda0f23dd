//! `n`-forms over the commuting generators `X_1, …, X_d`, the exterior
//! derivative, and the lower-degree solvers `d eta = omega`.
//!
//! Components are keyed by strictly increasing 0-based index lists; JSON
//! uses comma-joined 1-based indices such as `"1,3"`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_xi, embed, product_sobolev_norm, slices, top_degree_inner, ProductRepSpec, ProductVector};
use crate::coboundary::{solve_rank1_with_tol, TOL_OBS};
use crate::error::{Result, WeylError};
use crate::gc_lattice::LatticePoint;
use crate::C64;

/// Relative tolerance for the closedness precondition.
pub const TOL_CLOSED: f64 = 1e-10;

/// Relative tolerance for the agreement of the two slice solutions.
pub const TOL_SLICES: f64 = 1e-8;

/// An `n`-form with finitely supported components.
#[derive(Clone, Debug, PartialEq)]
pub struct NForm {
    pspec: ProductRepSpec,
    degree: usize,
    components: BTreeMap<Vec<usize>, ProductVector>,
}

/// All strictly increasing `n`-subsets of `0..d`.
pub fn index_sets(d: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, n, &mut Vec::new(), &mut out);
    out
}

impl NForm {
    pub fn zero(pspec: &ProductRepSpec, degree: usize) -> Result<Self> {
        if degree > pspec.d() {
            return Err(WeylError::DegreeOverflow { degree, rank: pspec.d() });
        }
        Ok(Self {
            pspec: pspec.clone(),
            degree,
            components: BTreeMap::new(),
        })
    }

    /// The 0-form with value `f`.
    pub fn from_function(f: ProductVector) -> Self {
        let pspec = f.pspec().clone();
        let mut components = BTreeMap::new();
        if !f.is_empty() {
            components.insert(Vec::new(), f);
        }
        Self {
            pspec,
            degree: 0,
            components,
        }
    }

    pub fn pspec(&self) -> &ProductRepSpec {
        &self.pspec
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &BTreeMap<Vec<usize>, ProductVector> {
        &self.components
    }

    /// Sets `omega(X_{i_1}, …, X_{i_n})` for a strictly increasing 0-based index list.
    pub fn set(&mut self, index: Vec<usize>, value: ProductVector) -> Result<()> {
        if index.len() != self.degree || index.windows(2).any(|w| w[0] >= w[1]) {
            return Err(WeylError::ShapeMismatch(format!(
                "index {index:?} is not a strictly increasing list of length {}",
                self.degree
            )));
        }
        if let Some(&i) = index.iter().find(|&&i| i >= self.pspec.d()) {
            return Err(WeylError::IndexOutOfRange {
                index: i + 1,
                len: self.pspec.d(),
            });
        }
        if value.pspec() != &self.pspec {
            return Err(WeylError::SpecMismatch("component belongs to a different product".into()));
        }
        if value.is_empty() {
            self.components.remove(&index);
        } else {
            self.components.insert(index, value);
        }
        Ok(())
    }

    /// The component at `index` (zero when absent).
    pub fn get(&self, index: &[usize]) -> ProductVector {
        self.components
            .get(index)
            .cloned()
            .unwrap_or_else(|| ProductVector::zero(&self.pspec))
    }

    /// `(sum over components of ||.||_0^2)^{1/2}`.
    pub fn norm0(&self) -> f64 {
        self.components.values().map(|v| v.norm0().powi(2)).sum::<f64>().sqrt()
    }

    /// `(sum over components of ||.||_s^2)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> Result<f64> {
        let mut total = 0.0;
        for v in self.components.values() {
            total += product_sobolev_norm(v, s)?.powi(2);
        }
        Ok(total.sqrt())
    }

    pub fn is_m_invariant(&self) -> bool {
        self.components.values().all(ProductVector::is_m_invariant)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.pspec != other.pspec || self.degree != other.degree {
            return Err(WeylError::SpecMismatch("forms of different shape".into()));
        }
        let mut out = self.clone();
        for (idx, v) in &other.components {
            let diff = out.get(idx).sub(v)?;
            out.set(idx.clone(), diff)?;
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct NFormJson {
    pspec: ProductRepSpec,
    degree: usize,
    components: BTreeMap<String, ProductVector>,
}

fn index_key(idx: &[usize]) -> String {
    idx.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
}

fn parse_key(key: &str) -> std::result::Result<Vec<usize>, String> {
    if key.trim().is_empty() {
        return Ok(Vec::new());
    }
    key.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(i) if i >= 1 => Ok(i - 1),
            _ => Err(format!("bad component index {t:?} in {key:?}")),
        })
        .collect()
}

impl Serialize for NForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NFormJson {
            pspec: self.pspec.clone(),
            degree: self.degree,
            components: self.components.iter().map(|(k, v)| (index_key(k), v.clone())).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = NFormJson::deserialize(d)?;
        let mut form = NForm::zero(&raw.pspec, raw.degree).map_err(D::Error::custom)?;
        for (key, v) in raw.components {
            let idx = parse_key(&key).map_err(D::Error::custom)?;
            form.set(idx, v).map_err(D::Error::custom)?;
        }
        Ok(form)
    }
}

/// `(d omega)(X_I) = sum_j (-1)^j X_{i_j} omega(X_{I \ i_j})` (0-based `j`).
pub fn exterior_derivative(omega: &NForm) -> Result<NForm> {
    let d = omega.pspec.d();
    let n = omega.degree;
    if n + 1 > d {
        return Err(WeylError::DegreeOverflow { degree: n, rank: d });
    }
    let mut out = NForm::zero(&omega.pspec, n + 1)?;
    for idx in index_sets(d, n + 1) {
        let mut acc = ProductVector::zero(&omega.pspec);
        for (j, &i) in idx.iter().enumerate() {
            let mut rest = idx.clone();
            rest.remove(j);
            let Some(part) = omega.components.get(&rest) else { continue };
            let term = apply_xi(part, i + 1)?;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc = acc.axpy(C64::new(sign, 0.0), &term)?;
        }
        out.set(idx, acc)?;
    }
    Ok(out)
}

fn check_closed(omega: &NForm) -> Result<()> {
    if omega.degree < omega.pspec.d() {
        let r = exterior_derivative(omega)?.norm0();
        if r > TOL_CLOSED * omega.norm0().max(1.0) {
            return Err(WeylError::NotClosed(r));
        }
    }
    Ok(())
}

fn check_m_invariant(omega: &NForm) -> Result<()> {
    if !omega.pspec.admits_m_invariants() || !omega.is_m_invariant() {
        return Err(WeylError::NotMInvariant);
    }
    Ok(())
}

/// Solves `X_a eta = f` slice by slice along factor `a` (0-based), with the
/// other factor of a two-factor product held fixed.
fn slice_solve(f: &ProductVector, a: usize, tol: f64) -> Result<ProductVector> {
    let other = 1 - a;
    let parts: Vec<(LatticePoint, ProductVector)> = slices(f, other).into_iter().collect();
    let solved: Vec<(LatticePoint, ProductVector)> = parts
        .into_par_iter()
        .map(|(z, part)| {
            let g = solve_rank1_with_tol(&part.to_state_vector()?, tol)?;
            Ok((z, ProductVector::from_state_vector(&g)))
        })
        .collect::<Result<_>>()?;
    let mut out = ProductVector::zero(f.pspec());
    for (z, g) in &solved {
        embed(&mut out, g, other, z);
    }
    Ok(out)
}

fn degree1_rank2_inner(omega: &NForm, tol: f64) -> Result<ProductVector> {
    let f = omega.get(&[0]);
    let g = omega.get(&[1]);
    let eta1 = slice_solve(&f, 0, tol)?;
    let eta2 = slice_solve(&g, 1, tol)?;
    let gap = eta1.sub(&eta2)?.norm0();
    if gap > TOL_SLICES * f.norm0().max(g.norm0()) {
        return Err(WeylError::SlicesDisagree(gap));
    }
    Ok(eta1)
}

/// Given a closed 1-form `omega = (f, g)` on a two-factor product, returns
/// the 0-form `eta` with `X_1 eta = f` and `X_2 eta = g`. Both slice
/// constructions are carried out and must agree.
pub fn solve_degree1_rank2(omega: &NForm) -> Result<ProductVector> {
    if omega.pspec.d() != 2 || omega.degree != 1 {
        return Err(WeylError::ShapeMismatch("expected a 1-form on a two-factor product".into()));
    }
    check_m_invariant(omega)?;
    check_closed(omega)?;
    degree1_rank2_inner(omega, TOL_OBS * omega.norm0().max(1.0))
}

/// `(omega|_z)`: the form on factors `2..d` obtained by fixing factor 1 at
/// `z` and keeping the components that do not involve `X_1`.
fn restrict_first(omega: &NForm, z: &LatticePoint) -> Result<NForm> {
    let rest = omega.pspec.without(0);
    let mut out = NForm::zero(&rest, omega.degree)?;
    for (idx, v) in &omega.components {
        if idx.first() == Some(&0) {
            continue;
        }
        if let Some(part) = slices(v, 0).remove(z) {
            out.set(idx.iter().map(|i| i - 1).collect(), part)?;
        }
    }
    Ok(out)
}

/// Adds `part` (a form on factors `2..d`) into `out` at factor-1 component
/// `z`, prefixing every index with `prefix` when given.
fn embed_form(out: &mut NForm, part: &NForm, z: &LatticePoint, prefix: Option<usize>) -> Result<()> {
    for (idx, v) in &part.components {
        let mut full: Vec<usize> = prefix.into_iter().collect();
        full.extend(idx.iter().map(|i| i + 1));
        let mut cur = out.get(&full);
        embed(&mut cur, v, 0, z);
        out.set(full, cur)?;
    }
    Ok(())
}

/// Factor-1 components met by the given components of `omega`.
fn first_components<'a, I: Iterator<Item = &'a ProductVector>>(parts: I) -> BTreeSet<LatticePoint> {
    parts.flat_map(|v| v.entries().keys().map(|z| z[0].clone())).collect()
}

/// Top-degree solve on a slice, returned as a form of one degree lower:
/// `eta(I \ i_j) = (-1)^j g_j`.
fn top_degree_as_form(omega: &NForm, tol: f64) -> Result<NForm> {
    let d = omega.pspec.d();
    let all: Vec<usize> = (0..d).collect();
    let gs = top_degree_inner(&omega.get(&all), tol)?;
    let mut out = NForm::zero(&omega.pspec, d - 1)?;
    for (j, g) in gs.into_iter().enumerate() {
        let mut idx = all.clone();
        idx.remove(j);
        let val = if j % 2 == 0 { g } else { g.scale(C64::new(-1.0, 0.0)) };
        out.set(idx, val)?;
    }
    Ok(out)
}

fn lower_inner(omega: &NForm, tol: f64) -> Result<NForm> {
    let d = omega.pspec.d();
    let n = omega.degree;
    if d == 2 && n == 1 {
        return Ok(NForm::from_function(degree1_rank2_inner(omega, tol)?));
    }

    // eta_1 from the slices (omega|_z) on factors 2..d.
    let zs = first_components(omega.components.iter().filter(|(k, _)| k.first() != Some(&0)).map(|(_, v)| v));
    let solved: Vec<(LatticePoint, NForm)> = zs
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|z| {
            let part = restrict_first(omega, &z)?;
            let eta = if n == d - 1 { top_degree_as_form(&part, tol)? } else { lower_inner(&part, tol)? };
            Ok((z, eta))
        })
        .collect::<Result<_>>()?;
    let mut eta = NForm::zero(&omega.pspec, n - 1)?;
    for (z, part) in &solved {
        embed_form(&mut eta, part, z, None)?;
    }
    if n == 1 {
        return Ok(eta);
    }

    // theta(X_J) = omega(X_1, X_J) - X_1 eta_1(X_J) on J in {2..d}; then
    // d kappa = -theta on each slice and eta(X_1, X_K) = kappa(X_K).
    let mut neg_theta = NForm::zero(&omega.pspec, n - 1)?;
    for idx in index_sets(d - 1, n - 1) {
        let shifted: Vec<usize> = idx.iter().map(|i| i + 1).collect();
        let mut with_first = vec![0];
        with_first.extend(&shifted);
        let theta = omega.get(&with_first).sub(&apply_xi(&eta.get(&shifted), 1)?)?;
        neg_theta.set(shifted, theta.scale(C64::new(-1.0, 0.0)))?;
    }
    let zs = first_components(neg_theta.components.values());
    let kappas: Vec<(LatticePoint, NForm)> = zs
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|z| Ok((z.clone(), lower_inner(&restrict_first(&neg_theta, &z)?, tol)?)))
        .collect::<Result<_>>()?;
    for (z, kappa) in &kappas {
        embed_form(&mut eta, kappa, z, Some(0))?;
    }
    Ok(eta)
}

/// Solves `d eta = omega` for a closed `M`-invariant `n`-form with
/// `1 <= n <= d - 1`, by induction on the number of factors: slice along
/// factor 1, solve the slices, correct with `theta` and recurse.
pub fn solve_lower_degree(omega: &NForm) -> Result<NForm> {
    let d = omega.pspec.d();
    let n = omega.degree;
    if n == 0 || n >= d {
        return Err(WeylError::DegreeOverflow { degree: n, rank: d });
    }
    check_m_invariant(omega)?;
    check_closed(omega)?;
    lower_inner(omega, TOL_OBS * omega.norm0().max(1.0))
}

/// `||d eta - omega||_0`.
pub fn lower_degree_residual(omega: &NForm, eta: &NForm) -> Result<f64> {
    Ok(exterior_derivative(eta)?.sub(omega)?.norm0())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gc_lattice::GcArray;
    use crate::rep_params::RepSpec;

    fn chain(spec: &RepSpec, h: i64) -> LatticePoint {
        let mut m = vec![0; spec.k()];
        m[spec.k() - 1] = h;
        LatticePoint::new(m, GcArray::zero(spec.dim()))
    }

    fn pspec(d: usize) -> ProductRepSpec {
        let all = [
            RepSpec::new(3, vec![0], C64::new(0.0, 1.0)).unwrap(),
            RepSpec::new(4, vec![1], C64::new(0.3, 0.0)).unwrap(),
            RepSpec::new(5, vec![0, 1], C64::new(0.0, 0.4)).unwrap(),
        ];
        ProductRepSpec::new(all[..d].to_vec()).unwrap()
    }

    fn function(ps: &ProductRepSpec, seed: u64) -> ProductVector {
        let mut x = seed;
        let mut items = Vec::new();
        let floors: Vec<i64> = ps.factors().iter().map(|s| s.n_ceil()).collect();
        let d = ps.d();
        let mut idx = vec![0i64; d];
        loop {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let v = C64::new(((x >> 40) as f64) / (1u64 << 24) as f64 - 0.5, ((x >> 16) & 0xffff) as f64 / 65536.0 - 0.5);
            items.push(((0..d).map(|i| chain(ps.factor(i), floors[i] + idx[i])).collect(), v));
            let mut i = 0;
            while i < d {
                idx[i] += 1;
                if idx[i] < 3 {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == d {
                break;
            }
        }
        ProductVector::from_entries(ps, items).unwrap()
    }

    fn random_form(ps: &ProductRepSpec, n: usize, seed: u64) -> NForm {
        let mut form = NForm::zero(ps, n).unwrap();
        for (t, idx) in index_sets(ps.d(), n).into_iter().enumerate() {
            form.set(idx, function(ps, seed + t as u64)).unwrap();
        }
        form
    }

    #[test]
    fn derivative_examples() {
        let ps = pspec(2);
        let h = function(&ps, 1);
        let dh = exterior_derivative(&NForm::from_function(h.clone())).unwrap();
        assert_eq!(dh.get(&[0]), apply_xi(&h, 1).unwrap());
        assert_eq!(dh.get(&[1]), apply_xi(&h, 2).unwrap());
        let w = random_form(&ps, 1, 9);
        let dw = exterior_derivative(&w).unwrap();
        let expect = apply_xi(&w.get(&[1]), 1).unwrap().sub(&apply_xi(&w.get(&[0]), 2).unwrap()).unwrap();
        assert!(dw.get(&[0, 1]).sub(&expect).unwrap().norm0() < 1e-14 * expect.norm0());
        assert!(matches!(exterior_derivative(&dw), Err(WeylError::DegreeOverflow { .. })));
        let ps3 = pspec(3);
        for n in 0..2 {
            let w = random_form(&ps3, n, 3);
            let dd = exterior_derivative(&exterior_derivative(&w).unwrap()).unwrap();
            assert!(dd.norm0() < 1e-11 * w.norm0().max(1.0));
        }
    }

    #[test]
    fn base_case() {
        let ps = pspec(2);
        let h = function(&ps, 4);
        let omega = exterior_derivative(&NForm::from_function(h.clone())).unwrap();
        let eta = solve_degree1_rank2(&omega).unwrap();
        assert!(eta.sub(&h).unwrap().norm0() < 1e-8 * h.norm0());
        let zero = NForm::zero(&ps, 1).unwrap();
        assert!(solve_degree1_rank2(&zero).unwrap().is_empty());
        let open = random_form(&ps, 1, 2);
        assert!(matches!(solve_degree1_rank2(&open), Err(WeylError::NotClosed(_))));
    }

    #[test]
    fn lower_degree_d3() {
        let ps = pspec(3);
        let h = NForm::from_function(function(&ps, 8));
        let omega = exterior_derivative(&h).unwrap();
        let eta = solve_lower_degree(&omega).unwrap();
        assert!(lower_degree_residual(&omega, &eta).unwrap() < 1e-7 * omega.norm0());
        let kappa = random_form(&ps, 1, 21);
        let omega = exterior_derivative(&kappa).unwrap();
        let eta = solve_lower_degree(&omega).unwrap();
        assert!(lower_degree_residual(&omega, &eta).unwrap() < 1e-7 * omega.norm0());
        let zero = NForm::zero(&ps, 2).unwrap();
        assert!(solve_lower_degree(&zero).unwrap().components().is_empty());
    }

    #[test]
    fn json_keys() {
        let ps = pspec(3);
        let w = random_form(&ps, 2, 5);
        let text = serde_json::to_string(&w).unwrap();
        assert!(text.contains("\"1,3\""));
        let back: NForm = serde_json::from_str(&text).unwrap();
        assert_eq!(back, w);
    }
}
