use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use weyl_core::coboundary::{floor_obstructions, project_to_kernel, residual, solve_rank1, solve_rank1_sweep};
use weyl_core::coefficients::CoeffContext;
use weyl_core::distributions::InvariantDistribution;
use weyl_core::gc_lattice::{enumerate_m_for_lambda, enumerate_paths, floor_of, Cylinder, LatticePoint, Step};
use weyl_core::operator::{is_m_invariant, sobolev_norm, StateVector};
use weyl_core::product::forms::{exterior_derivative, lower_degree_residual, solve_lower_degree, NForm};
use weyl_core::product::{
    product_floor_obstructions, project_product_to_kernel, solve_top_degree, solve_top_degree_general,
    top_degree_residual, ProductRepSpec, ProductVector,
};
use weyl_core::rep_params::{admits_m_invariants, RepSpec};
use weyl_core::sampling::{Sampler, SeriesChoice};
use weyl_core::suites::{run_suite, SuiteConfig, SUITES};
use weyl_core::C64;

use crate::error::CliError;
use crate::parse::{parse_lambda, parse_spec, parse_tuple};

/// A command's machine-readable output plus the lines of its summary table.
pub struct Report {
    pub json: Value,
    pub summary: Vec<(String, String)>,
    /// Set when an asserted check failed; the report is still written.
    pub failure: Option<String>,
}

impl Report {
    fn ok(json: Value) -> Self {
        Self {
            json,
            summary: Vec::new(),
            failure: None,
        }
    }

    fn line(mut self, key: &str, value: impl ToString) -> Self {
        self.summary.push((key.to_string(), value.to_string()));
        self
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Resolves `--spec` / `--spec-file`.
pub fn load_spec(inline: Option<&str>, file: Option<&Path>) -> Result<RepSpec, CliError> {
    match (inline, file) {
        (Some(s), None) => parse_spec(s),
        (None, Some(p)) => read_json(p),
        (Some(_), Some(_)) => Err(CliError::Usage("give either --spec or --spec-file, not both".into())),
        (None, None) => Err(CliError::Usage("a representation is required (--spec or --spec-file)".into())),
    }
}

pub enum EnumerateMode {
    Points { height: i64 },
    Paths { from: String, to: String },
    Floor,
}

pub fn enumerate(spec: &RepSpec, lambda: &str, mode: EnumerateMode) -> Result<Report, CliError> {
    let lam = parse_lambda(lambda, spec.dim())?;
    match mode {
        EnumerateMode::Points { height } => {
            let points: Vec<LatticePoint> = enumerate_m_for_lambda(spec, &lam, height)?
                .into_iter()
                .map(|m| LatticePoint::new(m, lam.clone()))
                .collect();
            let n = points.len();
            Ok(Report::ok(json!({
                "spec": spec,
                "lambda": lam.rows_top_down(),
                "height": height,
                "count": n,
                "points": points,
            }))
            .line("lattice points", n)
            .line("height", height))
        }
        EnumerateMode::Paths { from, to } => {
            let (from, to) = (parse_tuple(&from)?, parse_tuple(&to)?);
            let clipped = !spec.is_even();
            let paths = enumerate_paths(spec, &lam, &from, &to, clipped)?;
            let n = paths.len();
            Ok(Report::ok(json!({
                "spec": spec,
                "lambda": lam.rows_top_down(),
                "from": from,
                "to": to,
                "clipped": clipped,
                "count": n,
                "paths": paths,
            }))
            .line("paths", n)
            .line("clipped", clipped))
        }
        EnumerateMode::Floor => {
            let (height, points) = floor_of(spec, &lam)?;
            let n = points.len();
            Ok(Report::ok(json!({
                "spec": spec,
                "lambda": lam.rows_top_down(),
                "floor_height": height,
                "count": n,
                "points": points,
            }))
            .line("floor height", height)
            .line("floor points", n))
        }
    }
}

fn complex(c: C64) -> Value {
    json!({ "re": c.re, "im": c.im })
}

pub fn coeffs(spec: &RepSpec, lambda: &str, m: &str) -> Result<Report, CliError> {
    let lam = parse_lambda(lambda, spec.dim())?;
    let m = parse_tuple(m)?;
    let ctx = CoeffContext::new(spec, &lam)?;
    if !ctx.cylinder().contains(&m) {
        return Err(weyl_core::WeylError::InvalidM {
            m,
            reason: "not a point of M_lambda".into(),
        }
        .into());
    }
    let name = if spec.is_even() { "A" } else { "B" };
    let ladder: Vec<Value> = (1..=spec.k())
        .map(|j| json!({ "j": j, "plus": complex(ctx.plus(&m, j)), "minus": complex(ctx.minus(&m, j)) }))
        .collect();
    let mut ratios = Vec::new();
    for step in Step::all(spec.k(), !spec.is_even()) {
        let mut q = m.clone();
        step.apply(&mut q);
        if ctx.cylinder().contains(&q) {
            let value = ctx.ratio(step, &m).map(complex).unwrap_or(Value::Null);
            ratios.push(json!({ "step": step.to_string(), "value": value }));
        }
    }
    let diag = ctx.diag(&m)?;
    let top = ctx.plus(&m, spec.k());
    Ok(Report::ok(json!({
        "spec": spec,
        "lambda": lam.rows_top_down(),
        "m": m,
        "family": name,
        "ladder": ladder,
        "diagonal": complex(diag),
        "ratios": ratios,
    }))
    .line(&format!("{name}_k^+"), format!("{:.6}{:+.6}i", top.re, top.im))
    .line("C", format!("{:.6}{:+.6}i", diag.re, diag.im)))
}

pub fn dist(spec: &RepSpec, lambda: &str, anchor: &str, height: i64) -> Result<Report, CliError> {
    let lam = parse_lambda(lambda, spec.dim())?;
    let cyl = Cylinder::new(spec, &lam)?;
    let floor = cyl.floor_points();
    let m = if let Some(idx) = anchor.strip_prefix("floor") {
        let i: usize = idx
            .parse()
            .map_err(|_| CliError::Usage(format!("bad anchor {anchor:?}: expected floorI or a tuple")))?;
        floor.get(i).cloned().ok_or_else(|| {
            CliError::Usage(format!("anchor index {i} out of range: the floor has {} points", floor.len()))
        })?
    } else {
        parse_tuple(anchor)?
    };
    let point = LatticePoint::new(m.clone(), lam.clone());
    let mut d = if floor.contains(&m) {
        InvariantDistribution::new(spec, point)?
    } else {
        InvariantDistribution::anchored_at(spec, point)?
    };
    d.extend_to(height)?;
    let values: Vec<Value> = d
        .values()
        .into_iter()
        .map(|(m, v)| json!({ "m": m, "re": v.re, "im": v.im }))
        .collect();
    let at_anchor = d.value(&m)?;
    let n = values.len();
    Ok(Report::ok(json!({
        "spec": spec,
        "anchor": d.anchor(),
        "height": height,
        "values": values,
    }))
    .line("anchor", format!("{m:?}"))
    .line("D(anchor)", format!("{}{:+}i", at_anchor.re, at_anchor.im))
    .line("values", n))
}

pub fn project(input: &Path) -> Result<Report, CliError> {
    let f: StateVector = read_json(input)?;
    let before = floor_obstructions(&f)?.max_abs();
    let p = project_to_kernel(&f)?;
    let after = floor_obstructions(&p)?.max_abs();
    Ok(Report::ok(to_value(&p))
        .line("max obstruction before", format!("{before:.3e}"))
        .line("max obstruction after", format!("{after:.3e}"))
        .line("||f||_0 before", format!("{:.6e}", f.norm0()))
        .line("||f||_0 after", format!("{:.6e}", p.norm0())))
}

pub fn solve(input: &Path, sweep: bool, tol: f64) -> Result<Report, CliError> {
    let f: StateVector = read_json(input)?;
    let g = if sweep { solve_rank1_sweep(&f)? } else { solve_rank1(&f)? };
    let r = residual(&f, &g)?;
    let rel = r / f.norm0().max(f64::MIN_POSITIVE);
    let mut rep = Report::ok(json!({
        "g": g,
        "method": if sweep { "sweep" } else { "formula" },
        "residual": r,
        "relative_residual": rel,
        "norm_f_0": f.norm0(),
        "norm_g_0": g.norm0(),
        "m_invariant": is_m_invariant(&f),
    }))
    .line("residual ||Xg - f||_0", format!("{r:.3e}"))
    .line("relative residual", format!("{rel:.3e}"))
    .line("||g||_1", format!("{:.6e}", sobolev_norm(&g, 1.0)?));
    if !(rel <= tol) {
        rep.failure = Some(format!("relative residual {rel:.3e} exceeds {tol:.1e}"));
    }
    Ok(rep)
}

pub fn solve_topdegree(input: &Path, general: bool, tol: f64) -> Result<Report, CliError> {
    let f: ProductVector = read_json(input)?;
    let gs = if general {
        solve_top_degree_general(&f)?
    } else {
        solve_top_degree(&f)?
    };
    let r = top_degree_residual(&f, &gs)?;
    let rel = r / f.norm0().max(f64::MIN_POSITIVE);
    let mut rep = Report::ok(json!({
        "g": gs,
        "residual": r,
        "relative_residual": rel,
    }))
    .line("factors", f.pspec().d())
    .line("residual ||sum X_i g_i - f||_0", format!("{r:.3e}"))
    .line("relative residual", format!("{rel:.3e}"));
    if !(rel <= tol) {
        rep.failure = Some(format!("relative residual {rel:.3e} exceeds {tol:.1e}"));
    }
    Ok(rep)
}

pub fn check_cocycle(input: &Path, tol: f64) -> Result<Report, CliError> {
    let omega: NForm = read_json(input)?;
    let d = omega.pspec().d();
    let scale = omega.norm0().max(1.0);
    let mut out = json!({
        "degree": omega.degree(),
        "factors": d,
        "norm_0": omega.norm0(),
        "m_invariant": omega.is_m_invariant(),
    });
    let mut rep;
    if omega.degree() < d {
        let dw = exterior_derivative(&omega)?.norm0();
        let closed = dw <= tol * scale;
        out["d_omega_norm_0"] = json!(dw);
        out["closed"] = json!(closed);
        rep = Report::ok(out).line("||d omega||_0", format!("{dw:.3e}")).line("closed", closed);
        if !closed {
            rep.failure = Some(format!("||d omega||_0 = {dw:.3e} exceeds {:.1e}", tol * scale));
        }
    } else {
        let top = omega.get(&(0..d).collect::<Vec<_>>());
        let obs = product_floor_obstructions(&top)?;
        let worst = obs.max_abs();
        let vanish = worst <= tol * scale;
        out["closed"] = json!(true);
        out["max_obstruction"] = json!(worst);
        out["obstructions"] = to_value(&obs);
        rep = Report::ok(out)
            .line("top degree", "closed automatically")
            .line("max obstruction", format!("{worst:.3e}"));
        if !vanish {
            rep.failure = Some(format!("obstruction {worst:.3e} exceeds {:.1e}", tol * scale));
        }
    }
    Ok(rep)
}

pub fn solve_lowerdegree(input: &Path, tol: f64) -> Result<Report, CliError> {
    let omega: NForm = read_json(input)?;
    let eta = solve_lower_degree(&omega)?;
    let r = lower_degree_residual(&omega, &eta)?;
    let rel = r / omega.norm0().max(f64::MIN_POSITIVE);
    let mut rep = Report::ok(json!({
        "eta": eta,
        "residual": r,
        "relative_residual": rel,
    }))
    .line("degree", omega.degree())
    .line("residual ||d eta - omega||_0", format!("{r:.3e}"))
    .line("relative residual", format!("{rel:.3e}"));
    if !(rel <= tol) {
        rep.failure = Some(format!("relative residual {rel:.3e} exceeds {tol:.1e}"));
    }
    Ok(rep)
}

pub fn verify(suite: &str, cfg: SuiteConfig) -> Result<Report, CliError> {
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    let mut reports = Vec::new();
    let mut summary = Vec::new();
    let mut failed = Vec::new();
    for name in names {
        let report = run_suite(name, &cfg)?;
        for c in &report.checks {
            let status = match (c.asserted, c.passed) {
                (false, _) => "reported",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            summary.push((format!("{name}/{}", c.name), format!("{status} ({} samples)", c.samples)));
            if c.asserted && !c.passed {
                failed.push(format!("{name}/{} ({})", c.name, c.property));
            }
        }
        reports.push(report);
    }
    let json = if reports.len() == 1 {
        to_value(&reports[0])
    } else {
        to_value(&reports)
    };
    Ok(Report {
        json,
        summary,
        failure: (!failed.is_empty()).then(|| format!("violated: {}", failed.join("; "))),
    })
}

pub enum SampleKind {
    Vector { spec: RepSpec, kernel: bool },
    MInvariant { spec: RepSpec, kernel: bool },
    Product { dims: Vec<usize>, kernel: bool },
    Form { dims: Vec<usize>, degree: usize, closed: bool },
}

fn product_spec(sampler: &mut Sampler, dims: &[usize]) -> Result<ProductRepSpec, CliError> {
    let factors = dims
        .iter()
        .map(|&dim| {
            if dim < 3 {
                return Err(weyl_core::WeylError::InvalidN(dim));
            }
            Ok(sampler.m_invariant_spec(dim, 2, SeriesChoice::Either))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProductRepSpec::new(factors)?)
}

pub fn sample(kind: SampleKind, seed: u64, height: i64, count: usize) -> Result<Report, CliError> {
    let mut s = Sampler::new(seed);
    let (json, what) = match kind {
        SampleKind::Vector { spec, kernel } => {
            let mut f = s.vector(&spec, 3, spec.n_ceil() + height, count)?;
            if kernel {
                f = project_to_kernel(&f)?;
            }
            (to_value(&f), "vector")
        }
        SampleKind::MInvariant { spec, kernel } => {
            if !admits_m_invariants(&spec) {
                return Err(weyl_core::WeylError::NotMInvariant.into());
            }
            let mut f = s.m_invariant_vector(&spec, height);
            if kernel {
                f = project_to_kernel(&f)?;
            }
            (to_value(&f), "M-invariant vector")
        }
        SampleKind::Product { dims, kernel } => {
            let pspec = product_spec(&mut s, &dims)?;
            let mut f = s.product_vector(&pspec, &vec![height; dims.len()]);
            if kernel {
                f = project_product_to_kernel(&f)?;
            }
            (to_value(&f), "product vector")
        }
        SampleKind::Form { dims, degree, closed } => {
            let pspec = product_spec(&mut s, &dims)?;
            let omega = if closed && degree > 0 {
                exterior_derivative(&s.nform(&pspec, degree - 1, height)?)?
            } else {
                s.nform(&pspec, degree, height)?
            };
            (to_value(&omega), "form")
        }
    };
    Ok(Report::ok(json).line("sampled", what).line("seed", seed))
}
