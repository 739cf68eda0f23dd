//! Ladder coefficients `A_j^±` (even N), `B_j^±` and `C` (odd N), the path
//! weights `alpha`/`beta`, and numerical sweeps of their growth bounds.
//!
//! All square roots use the principal branch. Steps that leave `M_lambda`
//! have coefficient exactly zero.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, WeylError};
use crate::gc_lattice::{Cylinder, GcArray, Step};
use crate::rep_params::{admits_m_invariants, nu_tilde, RepSpec, SeriesClass};

/// Smallest modulus accepted for a top-coefficient denominator.
pub const EPS_DIV: f64 = 1e-12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Evaluation context for a fixed representation and diagram.
#[derive(Clone, Debug)]
pub struct CoeffContext {
    cyl: Cylinder,
    k: usize,
    even: bool,
    x: Vec<f64>,
    z: Vec<f64>,
    nu: Complex64,
    nu2: f64,
}

impl CoeffContext {
    pub fn new(spec: &RepSpec, lam: &GcArray) -> Result<Self> {
        let cyl = Cylinder::new(spec, lam)?;
        let even = spec.is_even();
        let top = lam.top_row();
        let (x, z) = if even {
            (
                top.iter().enumerate().map(|(i, &l)| (l + i as i64 + 1) as f64).collect(),
                spec.n().iter().enumerate().map(|(i, &n)| n as f64 + i as f64 + 0.5).collect(),
            )
        } else {
            (
                top.iter().enumerate().map(|(i, &l)| (l + i as i64) as f64).collect(),
                spec.n().iter().enumerate().map(|(i, &n)| (n + i as i64) as f64).collect(),
            )
        };
        Ok(Self {
            k: spec.k(),
            even,
            x,
            z,
            nu: spec.nu(),
            nu2: spec.nu_squared(),
            cyl,
        })
    }

    pub fn cylinder(&self) -> &Cylinder {
        &self.cyl
    }

    pub fn spec(&self) -> &RepSpec {
        self.cyl.spec()
    }

    pub fn lam(&self) -> &GcArray {
        self.cyl.lam()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_even(&self) -> bool {
        self.even
    }

    /// Translated coordinates `x_r`.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Translated coordinates `z_r`.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Translated coordinates `y_j` at `m`.
    pub fn y(&self, m: &[i64]) -> Vec<f64> {
        let off = if self.even { 0 } else { 1 };
        m.iter().enumerate().map(|(i, &v)| (v + i as i64 + off) as f64).collect()
    }

    /// The quantity under the square root (the prefactor 1/2 of the even case
    /// is not included). Ignores the lattice-exit and zero rules.
    pub fn radicand(&self, m: &[i64], j: usize) -> f64 {
        let y = self.y(m);
        let jj = j - 1;
        if self.even {
            let t = y[jj] + 0.5;
            let mut num = self.nu2 - t * t;
            for r in 0..self.k - 1 {
                num *= ((self.x[r] - 0.5).powi(2) - t * t) * (self.z[r] * self.z[r] - t * t);
            }
            let mut den = 1.0;
            for r in (0..self.k).filter(|&r| r != jj) {
                den *= (y[r] * y[r] - y[jj] * y[jj]) * (y[r] * y[r] - (y[jj] + 1.0).powi(2));
            }
            num / den
        } else {
            let yj2 = y[jj] * y[jj];
            let mut num = self.nu2 - yj2;
            for r in 0..self.k {
                num *= (self.x[r] * self.x[r] - yj2) * (self.z[r] * self.z[r] - yj2);
            }
            let mut den = yj2 * (4.0 * yj2 - 1.0);
            for r in (0..self.k).filter(|&r| r != jj) {
                den *= (y[r] * y[r] - yj2) * ((y[r] - 1.0).powi(2) - yj2);
            }
            num / den
        }
    }

    fn raise_allowed(&self, m: &[i64], j: usize) -> bool {
        if !self.cyl.contains(m) {
            return false;
        }
        if j < self.k && m[j - 1] == m[j] {
            return false;
        }
        let mut up = m.to_vec();
        up[j - 1] += 1;
        self.cyl.contains(&up)
    }

    /// `A_j^+(m)` for even N, `B_j^+(m)` for odd N (`j` is 1-based).
    pub fn plus(&self, m: &[i64], j: usize) -> Complex64 {
        if !self.raise_allowed(m, j) {
            return ZERO;
        }
        let root = Complex64::new(self.radicand(m, j), 0.0).sqrt();
        if self.even {
            0.5 * root
        } else {
            root
        }
    }

    /// `A_j^-(m) = A_j^+(m - e_j)`, likewise for `B`.
    pub fn minus(&self, m: &[i64], j: usize) -> Complex64 {
        if !self.cyl.contains(m) {
            return ZERO;
        }
        let mut down = m.to_vec();
        down[j - 1] -= 1;
        self.plus(&down, j)
    }

    /// The diagonal coefficient: `C(m)` for odd N, zero for even N.
    pub fn diag(&self, m: &[i64]) -> Result<Complex64> {
        if self.even || !self.cyl.contains(m) {
            return Ok(ZERO);
        }
        if self.x.iter().chain(&self.z).any(|&v| v == 0.0) {
            return Ok(ZERO);
        }
        let num: f64 = self.x.iter().product::<f64>() * self.z.iter().product::<f64>();
        let den: f64 = self.y(m).iter().map(|&y| y * (y - 1.0)).product();
        if den == 0.0 {
            return Err(WeylError::SingularC { m: m.to_vec() });
        }
        Ok(self.nu * (num / den))
    }

    /// The path weight `alpha_h(p)` (even N) or `beta_h(p)` (odd N).
    pub fn ratio(&self, step: Step, p: &[i64]) -> Result<Complex64> {
        let k = self.k;
        let mut q = p.to_vec();
        step.apply(&mut q);
        if !self.cyl.contains(p) || !self.cyl.contains(&q) {
            return Err(WeylError::InvalidM {
                m: q,
                reason: format!("step {step} leaves M_lambda"),
            });
        }
        let num = match step {
            Step::Plus(j) => self.plus(p, j),
            Step::Minus(j) => self.minus(p, j),
            Step::Double => self.plus(p, k),
            Step::Single => {
                if self.even {
                    return Err(WeylError::ParityMismatch("clipped step e_k needs odd N".into()));
                }
                self.diag(p)?
            }
        };
        let den = self.minus(&q, k);
        if den.norm() < EPS_DIV {
            return Err(WeylError::DivisionNearZero {
                m: q,
                value: den.norm(),
            });
        }
        Ok(num / den)
    }
}

fn require_even(ctx: &CoeffContext, even: bool) -> Result<()> {
    if ctx.is_even() != even {
        let want = if even { "even" } else { "odd" };
        return Err(WeylError::ParityMismatch(format!(
            "this coefficient needs {want} N, got N = {}",
            ctx.spec().dim()
        )));
    }
    Ok(())
}

pub fn coeff_a_plus(ctx: &CoeffContext, m: &[i64], j: usize) -> Result<Complex64> {
    require_even(ctx, true)?;
    Ok(ctx.plus(m, j))
}

pub fn coeff_a_minus(ctx: &CoeffContext, m: &[i64], j: usize) -> Result<Complex64> {
    require_even(ctx, true)?;
    Ok(ctx.minus(m, j))
}

pub fn coeff_b_plus(ctx: &CoeffContext, m: &[i64], j: usize) -> Result<Complex64> {
    require_even(ctx, false)?;
    Ok(ctx.plus(m, j))
}

pub fn coeff_b_minus(ctx: &CoeffContext, m: &[i64], j: usize) -> Result<Complex64> {
    require_even(ctx, false)?;
    Ok(ctx.minus(m, j))
}

pub fn coeff_c(ctx: &CoeffContext, m: &[i64]) -> Result<Complex64> {
    require_even(ctx, false)?;
    ctx.diag(m)
}

pub fn alpha(ctx: &CoeffContext, step: Step, point: &[i64]) -> Result<Complex64> {
    require_even(ctx, true)?;
    ctx.ratio(step, point)
}

pub fn beta(ctx: &CoeffContext, step: Step, point: &[i64]) -> Result<Complex64> {
    require_even(ctx, false)?;
    ctx.ratio(step, point)
}

/// A point at which a check was violated.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Witness {
    pub m: Vec<i64>,
    pub check: String,
    pub value: f64,
}

/// Outcome of a numerical bound sweep.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BoundReport {
    pub property: String,
    pub passed: bool,
    pub fitted_constants: BTreeMap<String, f64>,
    pub witnesses: Vec<Witness>,
    pub sweep_height: i64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl BoundReport {
    /// Converts a failing report into a [`WeylError::BoundViolation`].
    pub fn ensure(self) -> Result<Self> {
        if self.passed {
            return Ok(self);
        }
        match self.witnesses.first() {
            Some(w) => Err(WeylError::BoundViolation {
                check: w.check.clone(),
                m: w.m.clone(),
                value: w.value,
            }),
            None => Err(WeylError::UnboundedTrend {
                check: self.property.clone(),
                detail: format!("{:?}", self.fitted_constants),
            }),
        }
    }
}

fn series_flags(spec: &RepSpec) -> Vec<String> {
    match spec.series() {
        SeriesClass::Endpoint { j } => vec![format!("end-point series (j = {j}): lattice from branching inequalities only")],
        SeriesClass::Discrete { p, .. } => vec![format!("discrete series (p = {p}): |m_1| >= p enforced")],
        _ => Vec::new(),
    }
}

/// Sweeps every point up to height `height`: asserts `|alpha_{2e_k}| <= 1`
/// (resp. `beta`) and fits the constants of the `e_k ± e_j` and `e_k`
/// decay bounds.
pub fn verify_alpha_beta_bounds(spec: &RepSpec, lam: &GcArray, height: i64) -> Result<BoundReport> {
    let ctx = CoeffContext::new(spec, lam)?;
    let cyl = ctx.cylinder();
    let floor = cyl.floor_height();
    if height < floor + 2 {
        return Err(WeylError::HeightBelowFloor { height, floor: floor + 2 });
    }
    let k = spec.k();
    let nc = spec.n_ceil() as f64;
    let lc = lam.ceil() as f64;
    let name = if spec.is_even() { "alpha" } else { "beta" };
    let mut witnesses = Vec::new();
    let mut c_side: f64 = 0.0;
    let mut c_clip: f64 = 0.0;
    let mut max_double: f64 = 0.0;
    let side_steps: Vec<Step> = Step::all(k, false).into_iter().filter(|s| *s != Step::Double).collect();
    for p in cyl.points_up_to(height - 2) {
        let h = *p.last().unwrap() as f64;
        let double = ctx.ratio(Step::Double, &p)?.norm();
        max_double = max_double.max(double);
        if double > 1.0 + 1e-12 {
            witnesses.push(Witness {
                m: p.clone(),
                check: format!("|{name}_2e_k| <= 1"),
                value: double,
            });
        }
        let hp = (h + 1.0) * (h + 1.0);
        let decay = lc * lc / (hp - lc * lc) * nc * nc / (hp - nc * nc);
        let side_rhs = nc.min(lc).powi(2) / hp * decay;
        let mut fit = |value: f64, rhs: f64, label: &str, slot: &mut f64, p: &Vec<i64>| {
            if rhs > 0.0 {
                *slot = slot.max(value * value / rhs);
            } else if value != 0.0 {
                witnesses.push(Witness {
                    m: p.clone(),
                    check: format!("{label} vanishes when ceil(n) or ceil(lambda) is 0"),
                    value,
                });
            }
        };
        for &s in &side_steps {
            let mut q = p.clone();
            s.apply(&mut q);
            if cyl.contains(&q) {
                let v = ctx.ratio(s, &p)?.norm();
                fit(v, side_rhs, &format!("{name}_{s}"), &mut c_side, &p);
            }
        }
        if !spec.is_even() {
            let v = ctx.ratio(Step::Single, &p)?.norm();
            fit(v, decay / hp, &format!("{name}_e_k"), &mut c_clip, &p);
        }
    }
    let mut fitted = BTreeMap::new();
    fitted.insert(format!("max |{name}_2e_k|"), max_double);
    fitted.insert(format!("C for {name}_(e_k +- e_j)"), c_side);
    if !spec.is_even() {
        fitted.insert(format!("C for {name}_e_k"), c_clip);
    }
    Ok(BoundReport {
        property: format!("|{name}_2e_k| <= 1 and decay of the side steps"),
        passed: witnesses.is_empty(),
        fitted_constants: fitted,
        witnesses,
        sweep_height: height,
        flags: series_flags(spec),
    })
}

/// Per-height ratios used by [`verify_top_coeff_bounds`].
#[derive(Clone, Debug)]
pub struct TopCoeffTrend {
    pub heights: Vec<i64>,
    /// `|A_k^+(m,0)|^2 / (1 + nu_tilde + 2 ceil(m)^2 - ceil(n)^2)`
    pub upper: Vec<f64>,
    /// `|A_k^+(m,0)|^2 / ((ceil(m)+1)^2 - ceil(n)^2)`
    pub lower: Vec<f64>,
    pub all_imaginary: bool,
}

/// Ratios of the squared top coefficient at `lambda = 0` to the two
/// quadratic growth profiles, over heights `ceil(n)..=height`.
pub fn top_coeff_trend(spec: &RepSpec, height: i64) -> Result<TopCoeffTrend> {
    if !admits_m_invariants(spec) {
        return Err(WeylError::NotMInvariant);
    }
    let ctx = CoeffContext::new(spec, &GcArray::zero(spec.dim()))?;
    let nc = spec.n_ceil() as f64;
    let nt = nu_tilde(spec);
    let floor = ctx.cylinder().floor_height();
    let mut out = TopCoeffTrend {
        heights: Vec::new(),
        upper: Vec::new(),
        lower: Vec::new(),
        all_imaginary: true,
    };
    for h in floor..=height {
        let m = ctx.cylinder().point(0, h);
        let a = ctx.plus(&m, spec.k());
        out.all_imaginary &= a.re.abs() <= 1e-12 * a.norm();
        let a2 = a.norm_sqr();
        let hf = h as f64;
        out.heights.push(h);
        out.upper.push(a2 / (1.0 + nt + 2.0 * hf * hf - nc * nc));
        out.lower.push(a2 / ((hf + 1.0).powi(2) - nc * nc));
    }
    Ok(out)
}

/// Checks that the constants bounding the top coefficient at `lambda = 0`
/// from above and below stabilise: over `[H/2, H]` the running max of the
/// upper ratio and the running min of the lower ratio are within 10% of their
/// values over `[H/4, H/2]`.
pub fn verify_top_coeff_bounds(spec: &RepSpec, height: i64) -> Result<BoundReport> {
    let trend = top_coeff_trend(spec, height)?;
    let window = |lo: i64, hi: i64, data: &[f64], take_max: bool| {
        let vals = trend
            .heights
            .iter()
            .zip(data)
            .filter(|(&h, _)| h >= lo && h <= hi)
            .map(|(_, &v)| v);
        if take_max {
            vals.fold(f64::NEG_INFINITY, f64::max)
        } else {
            vals.fold(f64::INFINITY, f64::min)
        }
    };
    let (a, b, c) = (height / 4, height / 2, height);
    let up_early = window(a, b, &trend.upper, true);
    let up_late = window(b, c, &trend.upper, true);
    let lo_early = window(a, b, &trend.lower, false);
    let lo_late = window(b, c, &trend.lower, false);
    let mut witnesses = Vec::new();
    for (idx, &h) in trend.heights.iter().enumerate() {
        for (label, v) in [("upper ratio", trend.upper[idx]), ("lower ratio", trend.lower[idx])] {
            if !(v.is_finite() && v > 0.0) {
                let mut m = vec![0; spec.k()];
                m[spec.k() - 1] = h;
                witnesses.push(Witness {
                    m,
                    check: format!("{label} finite and positive"),
                    value: v,
                });
            }
        }
    }
    let stable = |early: f64, late: f64| early.is_finite() && late.is_finite() && (late / early - 1.0).abs() <= 0.1;
    let passed = witnesses.is_empty() && stable(up_early, up_late) && stable(lo_early, lo_late);
    let mut fitted = BTreeMap::new();
    fitted.insert("upper constant (early window)".into(), up_early);
    fitted.insert("upper constant (late window)".into(), up_late);
    fitted.insert("lower constant (early window)".into(), lo_early);
    fitted.insert("lower constant (late window)".into(), lo_late);
    let mut flags = series_flags(spec);
    flags.push(format!("top coefficients purely imaginary: {}", trend.all_imaginary));
    let top = if spec.is_even() { "A_k" } else { "B_k" };
    Ok(BoundReport {
        property: format!("quadratic growth of |{top}(m,0)|^2"),
        passed,
        fitted_constants: fitted,
        witnesses,
        sweep_height: height,
        flags,
    })
}
