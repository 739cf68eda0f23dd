//! Seeded random ensembles: representation parameters, diagrams, vectors
//! and forms. A seed fully determines every draw.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::gc_lattice::{enumerate_lambda_under_m, Cylinder, GcArray, LatticePoint};
use crate::operator::StateVector;
use crate::product::forms::{index_sets, NForm};
use crate::product::{ProductRepSpec, ProductVector};
use crate::rep_params::{RepSpec, SeriesClass};
use crate::C64;

/// Which family `nu` is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesChoice {
    Principal,
    Complementary,
    /// Principal or complementary with equal probability (complementary
    /// only where it exists).
    Either,
}

/// Deterministic random source for ensembles.
#[derive(Clone, Debug)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// A complex number with real and imaginary parts uniform in `[-1, 1]`.
    pub fn complex(&mut self) -> C64 {
        C64::new(self.rng.gen_range(-1.0..=1.0), self.rng.gen_range(-1.0..=1.0))
    }

    /// Upper end of the complementary interval for `(N, n)`, if there is one.
    fn complementary_bound(dim: usize, n: &[i64]) -> Option<f64> {
        if dim % 2 == 0 {
            let zeros = n.iter().take_while(|&&v| v == 0).count();
            Some(zeros as f64 + 0.5)
        } else if n.first().is_some_and(|&v| v != 0) {
            None
        } else {
            Some(n.iter().filter(|&&v| v == 0).count() as f64)
        }
    }

    fn nu_for(&mut self, dim: usize, n: &[i64], choice: SeriesChoice) -> C64 {
        let principal = C64::new(0.0, self.rng.gen_range(0.0..2.0));
        let bound = Self::complementary_bound(dim, n).filter(|&b| b > 0.2);
        let complementary = bound.map(|b| C64::new(self.rng.gen_range(0.05..b - 0.05), 0.0));
        match (choice, complementary) {
            (SeriesChoice::Principal, _) | (_, None) => principal,
            (SeriesChoice::Complementary, Some(c)) => c,
            (SeriesChoice::Either, Some(c)) => {
                if self.rng.gen_bool(0.5) {
                    principal
                } else {
                    c
                }
            }
        }
    }

    fn build(&mut self, dim: usize, n: Vec<i64>, choice: SeriesChoice) -> RepSpec {
        loop {
            let nu = self.nu_for(dim, &n, choice);
            if let Ok(spec) = RepSpec::new(dim, n.clone(), nu) {
                if matches!(spec.series(), SeriesClass::Principal | SeriesClass::Complementary { .. }) {
                    return spec;
                }
            }
        }
    }

    /// A principal or complementary series representation with `ceil(n) <= max_ceil`.
    pub fn spec(&mut self, dim: usize, max_ceil: i64, choice: SeriesChoice) -> RepSpec {
        let len = (dim - 1) / 2;
        let mut n: Vec<i64> = (0..len).map(|_| self.rng.gen_range(0..=max_ceil)).collect();
        n.sort_unstable();
        if dim % 2 == 1 && len >= 2 && n[0] > 0 && self.rng.gen_bool(0.5) {
            n[0] = -n[0];
        }
        self.build(dim, n, choice)
    }

    /// A representation with `n = (0, …, 0, c)`, `c <= max_ceil`, so that
    /// it admits `M`-invariant vectors.
    pub fn m_invariant_spec(&mut self, dim: usize, max_ceil: i64, choice: SeriesChoice) -> RepSpec {
        let len = (dim - 1) / 2;
        let mut n = vec![0; len];
        if let Some(last) = n.last_mut() {
            *last = self.rng.gen_range(0..=max_ceil);
        }
        self.build(dim, n, choice)
    }

    /// A representation with the given `n` and a random `nu` from `choice`.
    pub fn with_n(&mut self, dim: usize, n: Vec<i64>, choice: SeriesChoice) -> RepSpec {
        self.build(dim, n, choice)
    }

    /// A product of `d` factors drawn from `dims`, each admitting
    /// `M`-invariant vectors.
    pub fn m_invariant_product(&mut self, d: usize, dims: &[usize], max_ceil: i64) -> ProductRepSpec {
        let factors = (0..d)
            .map(|_| {
                let dim = *dims.choose(&mut self.rng).expect("nonempty dims");
                self.m_invariant_spec(dim, max_ceil, SeriesChoice::Either)
            })
            .collect();
        ProductRepSpec::new(factors).expect("nonempty factor list")
    }

    /// A diagram with `ceil(lambda) <= max_ceil` whose cylinder is nonempty.
    pub fn lambda(&mut self, spec: &RepSpec, max_ceil: i64) -> Result<GcArray> {
        let k = spec.k();
        let top = spec.n_ceil().max(max_ceil);
        loop {
            let mut m: Vec<i64> = (0..k - 1).map(|_| self.rng.gen_range(-top..=top)).collect();
            m.push(self.rng.gen_range(spec.n_ceil()..=top));
            if !spec.m_condition(&m) {
                continue;
            }
            let options: Vec<GcArray> = enumerate_lambda_under_m(spec, &m)?
                .into_iter()
                .filter(|l| l.ceil() <= max_ceil)
                .collect();
            if let Some(l) = options.choose(&mut self.rng) {
                return Ok(l.clone());
            }
        }
    }

    /// `count` random entries on diagram `lam` with `m_k <= floor + height`.
    pub fn vector_on(&mut self, spec: &RepSpec, lam: &GcArray, height: i64, count: usize) -> Result<StateVector> {
        let cyl = Cylinder::new(spec, lam)?;
        let pts = cyl.points_up_to(cyl.floor_height() + height);
        let mut f = StateVector::zero(spec);
        for _ in 0..count {
            let m = pts.choose(&mut self.rng).expect("nonempty cylinder").clone();
            let v = self.complex();
            f.insert_unchecked(LatticePoint::new(m, lam.clone()), v);
        }
        Ok(f)
    }

    /// Random entries on one or two random diagrams, every `m_k <= max_height`.
    pub fn vector(&mut self, spec: &RepSpec, max_ceil: i64, max_height: i64, count: usize) -> Result<StateVector> {
        let diagrams = self.rng.gen_range(1..=2);
        let mut f = StateVector::zero(spec);
        for _ in 0..diagrams {
            let lam = self.lambda(spec, max_ceil)?;
            let floor = Cylinder::new(spec, &lam)?.floor_height();
            let part = self.vector_on(spec, &lam, (max_height - floor).max(0), count)?;
            f = f.add(&part)?;
        }
        Ok(f)
    }

    /// Dense random values on the `lambda ≡ 0` chain from the floor up to
    /// `floor + height`.
    pub fn m_invariant_vector(&mut self, spec: &RepSpec, height: i64) -> StateVector {
        let floor = spec.n_ceil();
        let mut f = StateVector::zero(spec);
        for h in floor..=floor + height {
            let v = self.complex();
            f.insert_unchecked(chain_point(spec, h), v);
        }
        f
    }

    /// Dense random `M`-invariant product vector over the box
    /// `prod_i [floor_i, floor_i + heights[i]]`.
    pub fn product_vector(&mut self, pspec: &ProductRepSpec, heights: &[i64]) -> ProductVector {
        let d = pspec.d();
        let mut out = ProductVector::zero(pspec);
        let mut idx = vec![0i64; d];
        loop {
            let z: Vec<LatticePoint> = (0..d)
                .map(|i| chain_point(pspec.factor(i), pspec.factor(i).n_ceil() + idx[i]))
                .collect();
            let v = self.complex();
            out.insert_unchecked(z, v);
            let mut i = 0;
            while i < d {
                idx[i] += 1;
                if idx[i] <= heights[i] {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == d {
                return out;
            }
        }
    }

    /// A random `M`-invariant `degree`-form, each component dense on a box of
    /// side `height + 1`.
    pub fn nform(&mut self, pspec: &ProductRepSpec, degree: usize, height: i64) -> Result<NForm> {
        let mut form = NForm::zero(pspec, degree)?;
        let heights = vec![height; pspec.d()];
        for idx in index_sets(pspec.d(), degree) {
            let v = self.product_vector(pspec, &heights);
            form.set(idx, v)?;
        }
        Ok(form)
    }
}

/// The point `((0, …, 0, h), lambda ≡ 0)`.
pub fn chain_point(spec: &RepSpec, h: i64) -> LatticePoint {
    let mut m = vec![0; spec.k()];
    m[spec.k() - 1] = h;
    LatticePoint::new(m, GcArray::zero(spec.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gc_lattice::validate_point;

    #[test]
    fn deterministic_and_valid() {
        let run = |seed: u64| {
            let mut a = Sampler::new(seed);
            let mut out = Vec::new();
            for dim in 3..=6 {
                let sa = a.spec(dim, 3, SeriesChoice::Either);
                let la = a.lambda(&sa, 3).unwrap();
                let f = a.vector_on(&sa, &la, 5, 6).unwrap();
                for z in f.entries().keys() {
                    assert!(validate_point(&sa, z).unwrap());
                }
                let s = a.m_invariant_spec(dim, 4, SeriesChoice::Complementary);
                assert!(crate::rep_params::admits_m_invariants(&s));
                let v = a.m_invariant_vector(&s, 4);
                assert_eq!(v.len(), 5);
                out.push((sa, la, f, s, v));
            }
            out
        };
        assert_eq!(run(7), run(7));
    }
}
