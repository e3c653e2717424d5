use std::collections::BTreeMap;
use std::path::Path;

use gammalab::curvature::{be_diagnostics, curvature_global, CurvatureReport, CurvatureValue};
use gammalab::gauss::isoperimetric_profile;
use gammalab::spaces::{self, SpaceSpec};
use gammalab::verifiers::{self, tolerance, IntervalUnion};
use gammalab::{MarkovTriple, ScalarField, SpectralCache};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Alpha, CheckName, CheckParams, ExperimentConfig, Format};
use crate::fields::{sigmoid_family, uniform_fields};
use crate::output::{fmt_num, write_table, Num, Row};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub seed: u64,
    /// Multiplies the tolerance of every criterion that is reported but not asserted.
    pub tolerance_scale: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { seed: 0, tolerance_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    /// Fraction of `max(|lhs|, |rhs|)` of each row.
    Relative(f64),
}

impl Tolerance {
    fn allowance(self, row: &Row) -> f64 {
        match self {
            Tolerance::Absolute(t) => t,
            Tolerance::Relative(r) => r * row.lhs.abs().max(row.rhs.abs()),
        }
    }

    fn scaled(self, s: f64) -> Self {
        match self {
            Tolerance::Absolute(t) => Tolerance::Absolute(t * s),
            Tolerance::Relative(r) => Tolerance::Relative(r * s),
        }
    }

    fn value(self) -> f64 {
        match self {
            Tolerance::Absolute(t) | Tolerance::Relative(t) => t,
        }
    }
}

/// One inequality inside a check, `margin ≤ allowance` on every row.
#[derive(Debug, Clone)]
pub struct Criterion {
    pub label: String,
    pub asserted: bool,
    pub tolerance: Tolerance,
    pub rows: Vec<Row>,
}

impl Criterion {
    fn new(label: impl Into<String>, asserted: bool, tolerance: Tolerance, rows: Vec<Row>) -> Self {
        Self { label: label.into(), asserted, tolerance, rows }
    }

    fn summarize(&self, tolerance_scale: f64) -> CriterionSummary {
        let tol = if self.asserted { self.tolerance } else { self.tolerance.scaled(tolerance_scale) };
        let mut worst: Option<(&Row, f64)> = None;
        for r in &self.rows {
            let excess = r.margin - tol.allowance(r);
            if worst.is_none_or(|(_, e)| excess > e) {
                worst = Some((r, excess));
            }
        }
        let pass = worst.is_none_or(|(_, e)| e <= 0.0);
        CriterionSummary {
            criterion: self.label.clone(),
            asserted: self.asserted,
            tolerance: Num(tol.value()),
            relative: matches!(tol, Tolerance::Relative(_)),
            rows: self.rows.len(),
            worst_margin: worst.map(|(r, _)| Num(r.margin)),
            worst_row: worst.map(|(r, _)| r.check.clone()),
            worst_state: worst.and_then(|(r, _)| r.state),
            worst_time: worst.and_then(|(r, _)| r.time.map(Num)),
            pass,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub check: CheckName,
    /// Reason the check did not run.
    pub skipped: Option<String>,
    pub parameters: BTreeMap<String, Vec<f64>>,
    pub values: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub criteria: Vec<Criterion>,
}

impl CheckOutcome {
    fn new(check: CheckName) -> Self {
        Self {
            check,
            skipped: None,
            parameters: BTreeMap::new(),
            values: BTreeMap::new(),
            notes: Vec::new(),
            criteria: Vec::new(),
        }
    }

    fn skipped(check: CheckName, reason: impl Into<String>) -> Self {
        Self { skipped: Some(reason.into()), ..Self::new(check) }
    }

    fn param(&mut self, key: &str, values: &[f64]) {
        self.parameters.insert(key.to_string(), values.to_vec());
    }

    pub fn rows(&self) -> Vec<Row> {
        self.criteria.iter().flat_map(|c| c.rows.iter().cloned()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Reported,
    Skipped,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Reported => "reported",
            Status::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionSummary {
    pub criterion: String,
    pub asserted: bool,
    pub tolerance: Num,
    pub relative: bool,
    pub rows: usize,
    pub worst_margin: Option<Num>,
    pub worst_row: Option<String>,
    pub worst_state: Option<usize>,
    pub worst_time: Option<Num>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub check: CheckName,
    pub status: Status,
    pub skipped_because: Option<String>,
    pub parameters: BTreeMap<String, Vec<Num>>,
    pub values: BTreeMap<String, Num>,
    pub notes: Vec<String>,
    pub criteria: Vec<CriterionSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpaceSummary {
    pub spec: SpaceSpec,
    pub model: Option<String>,
    pub states: usize,
    pub edges: usize,
    pub parameters: BTreeMap<String, Num>,
    pub curvature: Option<Num>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub software: String,
    pub version: String,
    pub seed: u64,
    pub tolerance_scale: Num,
    pub pass: bool,
    pub space: Option<SpaceSummary>,
    pub checks: Vec<CheckSummary>,
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub outcomes: Vec<CheckOutcome>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.summary.pass
    }

    /// Writes `summary.json` and one table per check into `dir`.
    pub fn write(&self, dir: &Path, format: Format) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
        let json = serde_json::to_string_pretty(&self.summary).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(dir.join("summary.json"), json + "\n")?;
        for o in &self.outcomes {
            let path = dir.join(format!("{}.{}", o.check, format.extension()));
            let file = std::fs::File::create(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            write_table(file, &o.rows(), format)?;
        }
        Ok(())
    }

    /// Human-readable digest, one line per criterion.
    pub fn digest(&self) -> String {
        let mut s = format!("gammalab {} seed {}\n", self.summary.version, self.summary.seed);
        if let Some(space) = &self.summary.space {
            s += &format!("space {} ({} states)", space.model.as_deref().unwrap_or("file"), space.states);
            if let Some(k) = space.curvature {
                s += &format!(" K* = {}", fmt_num(k.0));
            }
            s.push('\n');
        }
        for c in &self.summary.checks {
            if let Some(why) = &c.skipped_because {
                s += &format!("{:<18} skipped   {why}\n", c.check.as_str());
                continue;
            }
            for cr in &c.criteria {
                let status = match (cr.asserted, cr.pass) {
                    (true, true) => "pass",
                    (true, false) => "FAIL",
                    (false, _) => "reported",
                };
                s += &format!(
                    "{:<18} {:<9} {:<28} worst {} (tol {}{})\n",
                    c.check.as_str(),
                    status,
                    cr.criterion,
                    cr.worst_margin.map_or("-".to_string(), |m| fmt_num(m.0)),
                    fmt_num(cr.tolerance.0),
                    if cr.relative { " rel" } else { "" }
                );
            }
            for n in &c.notes {
                s += &format!("{:<18} note      {n}\n", c.check.as_str());
            }
        }
        s += if self.summary.pass { "overall: pass\n" } else { "overall: FAIL\n" };
        s
    }
}

/// Everything the checks share, computed once.
struct Ctx<'a> {
    triple: Option<&'a MarkovTriple>,
    cache: Option<&'a SpectralCache<'a>>,
    curvature: Option<&'a CurvatureReport>,
    coords: Vec<f64>,
    chain: bool,
    two_point: bool,
    seed: u64,
}

impl Ctx<'_> {
    fn triple(&self) -> &MarkovTriple {
        self.triple.expect("space-dependent check without a space")
    }

    fn cache(&self) -> &SpectralCache<'_> {
        self.cache.expect("heat-flow check without a spectral cache")
    }

    /// `K` for a check: the override, or `K*`; `None` when `K* = −∞`.
    fn curvature_for(&self, p: &CheckParams) -> Result<Option<f64>, CliError> {
        if let Some(k) = p.k {
            if !k.is_finite() {
                return Err(CliError::Config(format!("K override must be finite, got {k}")));
            }
            return Ok(Some(k));
        }
        Ok(self.curvature.expect("curvature computed").global.finite())
    }

    fn rng(&self, check: CheckName) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(check as u64 + 1);
        rng
    }

    /// Sigmoid family on chains unless a sample count is given; uniform fields in `[lo, hi)` otherwise.
    fn unit_fields(&self, check: CheckName, p: &CheckParams, default_samples: usize, lo: f64, hi: f64) -> Vec<ScalarField> {
        if self.chain && p.samples.is_none() {
            sigmoid_family(&self.coords)
        } else {
            uniform_fields(&mut self.rng(check), self.triple().n(), p.samples.unwrap_or(default_samples), lo, hi)
        }
    }
}

/// Resolved `α` list; `1/K` is dropped with a note when `K ≤ 0`.
fn alphas(p: &CheckParams, k: f64, out: &mut CheckOutcome) -> Result<Vec<f64>, CliError> {
    let default = [Alpha::Value(0.0), Alpha::Symbol("1/K".into())];
    let mut resolved = Vec::new();
    for a in p.alpha.as_deref().unwrap_or(&default) {
        if matches!(a, Alpha::Symbol(_)) && !(k > 0.0) {
            a.resolve(1.0)?;
            out.notes.push(format!("alpha = 1/K dropped since K = {} is not positive", fmt_num(k)));
            continue;
        }
        resolved.push(a.resolve(k)?);
    }
    if resolved.is_empty() {
        return Err(CliError::Config("no usable alpha values".into()));
    }
    Ok(resolved)
}

fn label(check: CheckName, parts: &[String]) -> String {
    let mut s = check.as_str().to_string();
    for p in parts {
        s.push(':');
        s.push_str(p);
    }
    s
}

/// Runs every check of `config`; `Err` only for configuration and numeric failures,
/// never for a failed inequality.
pub fn run(config: &ExperimentConfig, settings: &RunSettings) -> Result<RunOutput, CliError> {
    if config.checks.is_empty() {
        return Err(CliError::Config("no checks selected".into()));
    }
    if !(settings.tolerance_scale.is_finite() && settings.tolerance_scale > 0.0) {
        return Err(CliError::Config(format!("tolerance scale must be positive, got {}", settings.tolerance_scale)));
    }
    let needs_space: Vec<&str> = config.checks.keys().filter(|c| !c.space_free()).map(|c| c.as_str()).collect();
    let triple = match (&config.space, needs_space.is_empty()) {
        (Some(spec), _) => Some(spec.build()?),
        (None, true) => None,
        (None, false) => return Err(CliError::Config(format!("checks [{}] need a [space] section", needs_space.join(", ")))),
    };
    let chain = triple.as_ref().is_some_and(spaces::is_diffusion_chain);
    let two_point = triple.as_ref().and_then(|t| t.meta()).is_some_and(|m| m.model == "two_point");

    if let Some(p) = config.checks.get(&CheckName::Isoperimetry) {
        if p.asserted == Some(true) && !chain {
            let model = triple.as_ref().and_then(|t| t.meta()).map_or("file", |m| m.model.as_str()).to_string();
            return Err(CliError::Config(format!(
                "check/space incompatibility: isoperimetry can be asserted only on diffusion chains, space is {model}"
            )));
        }
    }

    let needs_cache = config.checks.keys().any(|c| c.uses_heat_flow());
    let needs_curvature = config.checks.iter().any(|(c, p)| *c == CheckName::Curvature || (c.uses_curvature() && p.k.is_none()));
    let cache = match (&triple, needs_cache) {
        (Some(t), true) => Some(SpectralCache::build(t)?),
        _ => None,
    };
    let curvature = match (&triple, needs_curvature) {
        (Some(t), true) => Some(curvature_global(t)?),
        _ => None,
    };

    let ctx = Ctx {
        triple: triple.as_ref(),
        cache: cache.as_ref(),
        curvature: curvature.as_ref(),
        coords: triple.as_ref().map(spaces::coordinates).unwrap_or_default(),
        chain,
        two_point,
        seed: settings.seed,
    };

    let selected: Vec<(&CheckName, &CheckParams)> = config.checks.iter().collect();
    let outcomes = selected
        .par_iter()
        .map(|(c, p)| run_check(&ctx, **c, p))
        .collect::<Result<Vec<_>, CliError>>()?;

    let checks: Vec<CheckSummary> = outcomes.iter().map(|o| summarize(o, settings.tolerance_scale)).collect();
    let pass = checks.iter().all(|c| c.status != Status::Fail);
    let space = match (&config.space, &triple) {
        (Some(spec), Some(t)) => Some(SpaceSummary {
            spec: spec.clone(),
            model: t.meta().map(|m| m.model.clone()),
            states: t.n(),
            edges: t.edge_count(),
            parameters: t.meta().map(|m| m.parameters.iter().map(|(k, v)| (k.clone(), Num(*v))).collect()).unwrap_or_default(),
            curvature: curvature.as_ref().map(|c| Num(c.global.as_f64())),
        }),
        _ => None,
    };
    Ok(RunOutput {
        summary: RunSummary {
            software: "gammalab".into(),
            version: VERSION.into(),
            seed: settings.seed,
            tolerance_scale: Num(settings.tolerance_scale),
            pass,
            space,
            checks,
        },
        outcomes,
    })
}

fn summarize(o: &CheckOutcome, tolerance_scale: f64) -> CheckSummary {
    let criteria: Vec<CriterionSummary> = o.criteria.iter().map(|c| c.summarize(tolerance_scale)).collect();
    let status = if o.skipped.is_some() {
        Status::Skipped
    } else if criteria.iter().any(|c| c.asserted && !c.pass) {
        Status::Fail
    } else if criteria.iter().any(|c| c.asserted) {
        Status::Pass
    } else {
        Status::Reported
    };
    CheckSummary {
        check: o.check,
        status,
        skipped_because: o.skipped.clone(),
        parameters: o.parameters.iter().map(|(k, v)| (k.clone(), v.iter().copied().map(Num).collect())).collect(),
        values: o.values.iter().map(|(k, v)| (k.clone(), Num(*v))).collect(),
        notes: o.notes.clone(),
        criteria,
    }
}

const NEG_INF_SKIP: &str = "curvature is -inf (NEG_INF); no finite K to test against";

fn run_check(ctx: &Ctx<'_>, check: CheckName, p: &CheckParams) -> Result<CheckOutcome, CliError> {
    let k = if check.uses_curvature() {
        match ctx.curvature_for(p)? {
            Some(k) => k,
            None => return Ok(CheckOutcome::skipped(check, NEG_INF_SKIP)),
        }
    } else {
        f64::NAN
    };
    let mut out = CheckOutcome::new(check);
    if check.uses_curvature() {
        out.param("K", &[k]);
    }
    if let Some(t) = p.tolerance {
        out.param("tolerance", &[t]);
    }
    let tol = |default: f64| Tolerance::Absolute(p.tolerance.unwrap_or(default));
    match check {
        CheckName::Curvature => curvature_check(ctx, &mut out),
        CheckName::GradientEstimate | CheckName::VarianceBound => flow_check(ctx, check, p, k, tol, &mut out)?,
        CheckName::BeDiagnostics => be_check(ctx, p, k, tol, &mut out)?,
        CheckName::BobkovLocal => bobkov_local_check(ctx, p, k, tol, &mut out)?,
        CheckName::BobkovGlobal => {
            if !(k > 0.0) {
                return Ok(CheckOutcome::skipped(check, format!("needs K > 0, got {}", fmt_num(k))));
            }
            bobkov_global_check(ctx, p, k, &mut out)?
        }
        CheckName::TwoPointGrid => two_point_grid_check(p, tol, &mut out)?,
        CheckName::PhiTrace => phi_check(ctx, p, k, tol, &mut out)?,
        CheckName::Zeta => zeta_check(ctx, p, k, tol, &mut out)?,
        CheckName::Isoperimetry => {
            if !(k > 0.0) {
                return Ok(CheckOutcome::skipped(check, format!("needs K > 0, got {}", fmt_num(k))));
            }
            isoperimetry_check(ctx, p, k, &mut out)?
        }
        CheckName::GaussOracle => gauss_check(p, tol, &mut out)?,
    }
    Ok(out)
}

fn curvature_check(ctx: &Ctx<'_>, out: &mut CheckOutcome) {
    let report = ctx.curvature.expect("curvature computed");
    let kstar = report.global.as_f64();
    let rows = report
        .states
        .iter()
        .map(|s| {
            let kx = s.value.as_f64();
            let margin = if kx == kstar { 0.0 } else { kstar - kx };
            Row { check: "curvature".into(), state: Some(s.state), time: None, margin, lhs: kstar, rhs: kx }
        })
        .collect();
    out.values.insert("K*".into(), kstar);
    out.values.insert("argmin".into(), report.argmin as f64);
    if report.global == CurvatureValue::NegInfinity {
        out.notes.push(format!("curvature is NEG_INF at state {}; dependent checks are skipped", report.argmin));
    }
    out.criteria.push(Criterion::new("K* <= K(x)", false, Tolerance::Absolute(0.0), rows));
}

fn flow_check(
    ctx: &Ctx<'_>,
    check: CheckName,
    p: &CheckParams,
    k: f64,
    tol: impl Fn(f64) -> Tolerance,
    out: &mut CheckOutcome,
) -> Result<(), CliError> {
    let times = p.t.clone().unwrap_or_else(|| vec![0.1, 0.5, 1.0, 2.0]);
    let samples = p.samples.unwrap_or(100);
    out.param("t", &times);
    out.param("samples", &[samples as f64]);
    let fields = uniform_fields(&mut ctx.rng(check), ctx.triple().n(), samples, -1.0, 1.0);
    let cache = ctx.cache();
    let per_field = fields
        .par_iter()
        .enumerate()
        .map(|(i, f)| -> Result<(Vec<Row>, Vec<Row>), CliError> {
            let mut main = Vec::with_capacity(times.len());
            let mut cap = Vec::new();
            for &t in &times {
                let field = match check {
                    CheckName::GradientEstimate => cache.gradient_estimate(f, t, k)?,
                    _ => cache.variance_regularization(f, t, k)?,
                };
                let (x, _) = field.worst();
                let name = label(check, &[format!("f{i}")]);
                main.push(Row::new(name.clone(), Some(x), Some(t), field.lhs[x], field.rhs[x]));
                if check == CheckName::VarianceBound {
                    let (y, v) = field.rhs.argmax().expect("nonempty");
                    cap.push(Row::new(name, Some(y), Some(t), v, f.sup_norm().powi(2)));
                }
            }
            Ok((main, cap))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let (main, cap): (Vec<_>, Vec<_>) = per_field.into_iter().unzip();
    let title = if check == CheckName::GradientEstimate {
        "G(H_t f) <= e^(-2Kt) H_t G(f)"
    } else {
        "2 iota G(H_t f) <= var_t(f)"
    };
    out.criteria.push(Criterion::new(title, true, tol(tolerance::EXACT), main.concat()));
    if check == CheckName::VarianceBound {
        out.criteria.push(Criterion::new("var_t(f) <= |f|^2", true, Tolerance::Absolute(tolerance::EXACT), cap.concat()));
    }
    Ok(())
}

fn be_check(ctx: &Ctx<'_>, p: &CheckParams, k: f64, tol: impl Fn(f64) -> Tolerance, out: &mut CheckOutcome) -> Result<(), CliError> {
    let triple = ctx.triple();
    let fields = if ctx.chain && p.samples.is_none() {
        sigmoid_family(&ctx.coords)
    } else {
        uniform_fields(&mut ctx.rng(CheckName::BeDiagnostics), triple.n(), p.samples.unwrap_or(20), -1.0, 1.0)
    };
    out.param("samples", &[fields.len() as f64]);
    let diags = fields
        .par_iter()
        .map(|f| -> Result<_, CliError> {
            let g = triple.carre_du_champ(f)?.sup_norm();
            Ok((be_diagnostics(triple, f, k)?, g * g))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut si = Vec::new();
    let mut mass = Vec::new();
    let mut g3 = Vec::new();
    for (i, (d, g2)) in diags.iter().enumerate() {
        let name = label(CheckName::BeDiagnostics, &[format!("f{i}")]);
        let rel = if *g2 > 0.0 { d.self_improvement_margin / g2 } else { d.self_improvement_margin };
        si.push(Row::new(name.clone(), None, None, rel, 0.0));
        mass.push(Row::new(name.clone(), None, None, d.mass_identity_residual, 0.0));
        g3.push(Row::new(name, None, None, d.g3_margin, 0.0));
    }
    out.notes.push("self-improvement rows are divided by sup G(f)^2".into());
    out.criteria.push(Criterion::new("self-improvement", ctx.chain, tol(tolerance::SELF_IMPROVEMENT_RELATIVE), si));
    out.criteria.push(Criterion::new("mass identity", true, Tolerance::Absolute(tolerance::IDENTITY), mass));
    out.criteria.push(Criterion::new("G3", ctx.chain, Tolerance::Absolute(tolerance::EXACT), g3));
    Ok(())
}

fn bobkov_local_check(
    ctx: &Ctx<'_>,
    p: &CheckParams,
    k: f64,
    tol: impl Fn(f64) -> Tolerance,
    out: &mut CheckOutcome,
) -> Result<(), CliError> {
    let times = p.t.clone().unwrap_or_else(|| vec![0.1, 0.5, 1.0]);
    let alphas = alphas(p, k, out)?;
    let epsilon = p.epsilon.unwrap_or(verifiers::DEFAULT_EPSILON);
    let fields = ctx.unit_fields(CheckName::BobkovLocal, p, 10, 0.0, 1.0);
    out.param("t", &times);
    out.param("alpha", &alphas);
    out.param("epsilon", &[epsilon]);
    out.param("samples", &[fields.len() as f64]);
    let cells: Vec<(usize, f64)> = (0..fields.len()).flat_map(|i| alphas.iter().map(move |&a| (i, a))).collect();
    let rows = cells
        .par_iter()
        .map(|&(i, a)| -> Result<Vec<Row>, CliError> {
            let r = verifiers::bobkov_local(ctx.cache(), &fields[i], a, k, &times, epsilon)?;
            let name = label(CheckName::BobkovLocal, &[format!("f{i}"), format!("alpha={}", fmt_num(a))]);
            Ok(r.rows.iter().map(|m| Row::new(name.clone(), m.state, m.time, m.lhs, m.rhs)).collect())
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    out.criteria.push(Criterion::new("local Bobkov", ctx.chain, tol(tolerance::LOCAL_BOBKOV), rows.concat()));
    Ok(())
}

fn unit_grid(points: usize) -> Result<Vec<f64>, CliError> {
    if points < 2 {
        return Err(CliError::Config(format!("grid needs at least 2 points per axis, got {points}")));
    }
    Ok((0..points).map(|i| i as f64 / (points - 1) as f64).collect())
}

fn bobkov_global_check(ctx: &Ctx<'_>, p: &CheckParams, k: f64, out: &mut CheckOutcome) -> Result<(), CliError> {
    let triple = ctx.triple();
    let cells: Vec<(String, ScalarField)> = if ctx.two_point {
        let g = unit_grid(p.grid.unwrap_or(201))?;
        out.param("grid", &[g.len() as f64]);
        g.iter()
            .flat_map(|&a| g.iter().map(move |&b| (a, b)))
            .map(|(a, b)| (format!("a={}:b={}", fmt_num(a), fmt_num(b)), ScalarField::new(vec![a, b]).expect("finite")))
            .collect()
    } else {
        let fields = ctx.unit_fields(CheckName::BobkovGlobal, p, 10, 0.0, 1.0);
        out.param("samples", &[fields.len() as f64]);
        fields.into_iter().enumerate().map(|(i, f)| (format!("f{i}"), f)).collect()
    };
    let reports = cells
        .par_iter()
        .map(|(_, f)| verifiers::bobkov_global(triple, f, k))
        .collect::<Result<Vec<_>, _>>()?;
    let (asserted, default_tol) = (reports[0].asserted, reports[0].tolerance);
    let rows = cells
        .iter()
        .zip(&reports)
        .map(|((name, _), r)| Row::new(label(CheckName::BobkovGlobal, &[name.clone()]), None, None, r.worst.lhs, r.worst.rhs))
        .collect();
    let tol = Tolerance::Absolute(p.tolerance.unwrap_or(default_tol));
    out.criteria.push(Criterion::new("global Bobkov", asserted, tol, rows));
    Ok(())
}

fn two_point_grid_check(p: &CheckParams, tol: impl Fn(f64) -> Tolerance, out: &mut CheckOutcome) -> Result<(), CliError> {
    let g = unit_grid(p.grid.unwrap_or(201))?;
    out.param("grid", &[g.len() as f64]);
    let mut rows = Vec::with_capacity(g.len() * g.len());
    for &a in &g {
        for &b in &g {
            let margin = verifiers::two_point_bobkov_margin(a, b)?;
            let lhs = isoperimetric_profile(0.5 * (a + b))?;
            rows.push(Row {
                check: label(CheckName::TwoPointGrid, &[format!("a={}", fmt_num(a)), format!("b={}", fmt_num(b))]),
                state: None,
                time: None,
                margin,
                lhs,
                rhs: lhs - margin,
            });
        }
    }
    out.criteria.push(Criterion::new("two-point Bobkov", true, tol(tolerance::TIGHT), rows));
    Ok(())
}

struct TraceSetup {
    horizon: f64,
    times: Vec<f64>,
    alphas: Vec<f64>,
    fields: Vec<ScalarField>,
    cells: Vec<(usize, f64)>,
}

fn trace_setup(
    ctx: &Ctx<'_>,
    check: CheckName,
    p: &CheckParams,
    k: f64,
    default_times: &[f64],
    default_samples: usize,
    out: &mut CheckOutcome,
) -> Result<TraceSetup, CliError> {
    let horizon = p.horizon.unwrap_or(1.0);
    let times = p.t.clone().unwrap_or_else(|| default_times.iter().map(|t| t * horizon).collect());
    let alphas = alphas(p, k, out)?;
    // ζ and Φ need values strictly inside (0, 1).
    let fields = ctx.unit_fields(check, p, default_samples, 0.05, 0.95);
    out.param("T", &[horizon]);
    out.param("t", &times);
    out.param("alpha", &alphas);
    out.param("samples", &[fields.len() as f64]);
    let cells = (0..fields.len()).flat_map(|i| alphas.iter().map(move |&a| (i, a))).collect();
    Ok(TraceSetup { horizon, times, alphas, fields, cells })
}

fn phi_check(ctx: &Ctx<'_>, p: &CheckParams, k: f64, tol: impl Fn(f64) -> Tolerance, out: &mut CheckOutcome) -> Result<(), CliError> {
    let s = trace_setup(ctx, CheckName::PhiTrace, p, k, &[0.1, 0.25, 0.5, 0.75, 0.9], 3, out)?;
    let phi = ScalarField::constant(ctx.triple().n(), 1.0);
    out.notes.push("test function phi = 1".into());
    let traces = s
        .cells
        .par_iter()
        .map(|&(i, a)| verifiers::phi_trace(ctx.cache(), &s.fields[i], &phi, s.horizon, a, k, &s.times))
        .collect::<Result<Vec<_>, _>>()?;
    let mut deriv = Vec::new();
    let mut endpoint = Vec::new();
    for (&(i, a), tr) in s.cells.iter().zip(&traces) {
        let name = label(CheckName::PhiTrace, &[format!("f{i}"), format!("alpha={}", fmt_num(a))]);
        for ((&t, &b), &d) in tr.times.iter().zip(&tr.derivative_bound).zip(&tr.derivative) {
            deriv.push(Row::new(name.clone(), None, Some(t), b, d));
        }
        endpoint.push(Row::new(name, None, Some(s.horizon), tr.endpoint_residual, 0.0));
    }
    debug_assert_eq!(s.alphas.len() * s.fields.len(), traces.len());
    out.criteria.push(Criterion::new("int zeta H_t phi <= Phi'", ctx.chain, tol(tolerance::PHI_DERIVATIVE), deriv));
    out.criteria.push(Criterion::new("endpoint identity", true, Tolerance::Absolute(tolerance::IDENTITY), endpoint));
    Ok(())
}

fn zeta_check(ctx: &Ctx<'_>, p: &CheckParams, k: f64, tol: impl Fn(f64) -> Tolerance, out: &mut CheckOutcome) -> Result<(), CliError> {
    let s = trace_setup(ctx, CheckName::Zeta, p, k, &[0.25, 0.5, 0.75], 5, out)?;
    let triple = ctx.triple();
    let cache = ctx.cache();
    let per_cell = s
        .cells
        .par_iter()
        .map(|&(i, a)| -> Result<_, CliError> {
            let name = label(CheckName::Zeta, &[format!("f{i}"), format!("alpha={}", fmt_num(a))]);
            let mut sign = Vec::new();
            let mut agree = Vec::new();
            let mut disc = Vec::new();
            let mut degenerate = 0;
            for &t in &s.times {
                let z = verifiers::zeta_field(cache, &s.fields[i], s.horizon, t, a, k)?;
                sign.extend(z.values.iter().enumerate().map(|(x, &v)| Row::new(name.clone(), Some(x), Some(t), 0.0, v)));
                agree.push(Row::new(name.clone(), None, Some(t), z.agreement(), 0.0));
                let g = cache.heat(&s.fields[i], s.horizon - t)?;
                disc.push(Row::new(name.clone(), None, Some(t), verifiers::discriminant_margin(triple, &g)?, 0.0));
                degenerate += z.degenerate_states.len();
            }
            Ok((sign, agree, disc, degenerate))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut sign = Vec::new();
    let mut agree = Vec::new();
    let mut disc = Vec::new();
    let mut degenerate = 0;
    for (a, b, c, d) in per_cell {
        sign.extend(a);
        agree.extend(b);
        disc.extend(c);
        degenerate += d;
    }
    out.values.insert("degenerate states".into(), degenerate as f64);
    if degenerate > 0 {
        out.notes.push(format!("{degenerate} state evaluations with G(g) = 0 but G(G(g)) > 0"));
    }
    out.criteria.push(Criterion::new("zeta >= 0", ctx.chain, tol(tolerance::ZETA), sign));
    out.criteria.push(Criterion::new("two-formula agreement", true, Tolerance::Absolute(tolerance::IDENTITY), agree));
    out.criteria.push(Criterion::new("discriminant", true, Tolerance::Absolute(tolerance::IDENTITY), disc));
    Ok(())
}

fn isoperimetry_check(ctx: &Ctx<'_>, p: &CheckParams, k: f64, out: &mut CheckOutcome) -> Result<(), CliError> {
    let triple = ctx.triple();
    let asserted = p.asserted.unwrap_or(ctx.chain);
    let sets: Vec<(String, Vec<usize>)> = match (&p.sets, ctx.chain) {
        (Some(sets), _) => sets.iter().enumerate().map(|(i, s)| (format!("set{i}"), s.clone())).collect(),
        (None, true) => {
            let thresholds = p.thresholds.clone().unwrap_or_else(|| vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
            out.param("thresholds", &thresholds);
            thresholds
                .iter()
                .map(|&r| (format!("x<={}", fmt_num(r)), (0..triple.n()).filter(|&i| ctx.coords[i] <= r).collect()))
                .collect()
        }
        (None, false) => vec![("set0".into(), vec![0])],
    };
    let mut rows = Vec::with_capacity(sets.len());
    for (name, set) in &sets {
        if let Some(&bad) = set.iter().find(|&&x| x >= triple.n()) {
            return Err(CliError::Config(format!("isoperimetry set {name} names state {bad}, space has {}", triple.n())));
        }
        let r = verifiers::isoperimetric_margin(triple, set, k)?;
        out.values.insert(format!("mass:{name}"), r.parameters["mass"][0]);
        rows.push(Row::new(label(CheckName::Isoperimetry, &[name.clone()]), None, None, r.worst.lhs, r.worst.rhs));
    }
    let tol = Tolerance::Relative(p.tolerance.unwrap_or(tolerance::ISOPERIMETRY_RELATIVE));
    out.criteria.push(Criterion::new("sqrt(K) I(m(E)) <= P(E)", asserted, tol, rows));
    Ok(())
}

fn gauss_check(p: &CheckParams, tol: impl Fn(f64) -> Tolerance, out: &mut CheckOutcome) -> Result<(), CliError> {
    let default = vec!["[-inf,0]".to_string(), "[-1,1]".to_string()];
    let specs = p.intervals.as_ref().unwrap_or(&default);
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let set: IntervalUnion = spec.parse().map_err(|e: gammalab::Error| CliError::Config(format!("intervals {spec:?}: {e}")))?;
        let (mass, per) = verifiers::gaussian_interval_oracle(&set);
        out.notes.push(format!("{spec}: mass {} perimeter {}", fmt_num(mass), fmt_num(per)));
        out.values.insert(format!("mass:{spec}"), mass);
        out.values.insert(format!("perimeter:{spec}"), per);
        rows.push(Row::new(label(CheckName::GaussOracle, &[spec.clone()]), None, None, isoperimetric_profile(mass)?, per));
    }
    out.criteria.push(Criterion::new("I(mass) <= perimeter", true, tol(tolerance::TIGHT), rows));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text, Path::new("t.toml")).unwrap()
    }

    #[test]
    fn two_point_curvature_and_global_bobkov() {
        let c = config("[space]\nmodel = \"two_point\"\nrho = 1.0\n[checks.curvature]\n[checks.bobkov-global]\ngrid = 21\n");
        let out = run(&c, &RunSettings::default()).unwrap();
        assert!(out.passed());
        let k = out.summary.space.as_ref().unwrap().curvature.unwrap().0;
        assert_eq!(fmt_num(k), "2.0");
        let global = &out.summary.checks[1];
        assert_eq!(global.status, Status::Pass);
        assert_eq!(global.criteria[0].rows, 441);
    }

    #[test]
    fn isoperimetry_assertion_needs_a_chain() {
        let c = config("[space]\nmodel = \"complete\"\nn = 4\n[checks.isoperimetry]\nassert = true\n");
        let err = run(&c, &RunSettings::default()).err().unwrap();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("check/space incompatibility"));
        let c = config("[space]\nmodel = \"complete\"\nn = 4\n[checks.isoperimetry]\n");
        let out = run(&c, &RunSettings::default()).unwrap();
        assert_eq!(out.summary.checks[0].status, Status::Reported);
    }

    #[test]
    fn space_free_checks_run_without_space() {
        let c = config("[checks.gauss-oracle]\nintervals = [\"[-1,1]\"]\n[checks.two-point-grid]\ngrid = 11\n");
        let out = run(&c, &RunSettings::default()).unwrap();
        assert!(out.passed());
        assert!(out.summary.checks[1].notes[0].starts_with("[-1,1]: mass 0.682689492137 perimeter 0.483941449038"));
        let c = config("[checks.zeta]\n");
        assert_eq!(run(&c, &RunSettings::default()).err().unwrap().exit_code(), 2);
    }

    #[test]
    fn neg_inf_curvature_skips_dependent_checks() {
        let t = spaces::two_point(1.0).unwrap();
        let mut report = curvature_global(&t).unwrap();
        report.states[1].value = CurvatureValue::NegInfinity;
        report.states[1].witness = None;
        report.global = CurvatureValue::NegInfinity;
        report.argmin = 1;
        let ctx = Ctx {
            triple: Some(&t),
            cache: None,
            curvature: Some(&report),
            coords: spaces::coordinates(&t),
            chain: false,
            two_point: true,
            seed: 0,
        };
        let p = CheckParams::default();
        let grad = run_check(&ctx, CheckName::GradientEstimate, &p).unwrap();
        assert_eq!(grad.skipped.as_deref(), Some(NEG_INF_SKIP));
        assert_eq!(summarize(&grad, 1.0).status, Status::Skipped);

        let curv = run_check(&ctx, CheckName::Curvature, &p).unwrap();
        assert!(curv.notes[0].contains("NEG_INF at state 1"));
        let mut buf = Vec::new();
        write_table(&mut buf, &curv.rows(), Format::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("curvature,0,,NEG_INF,NEG_INF,2.0"), "{text}");
        assert!(text.contains("curvature,1,,0.0,NEG_INF,NEG_INF"), "{text}");
    }

    #[test]
    fn tolerance_scale_only_touches_reported_criteria() {
        let text = "[space]\nmodel = \"cycle\"\nn = 5\n[checks.be-diagnostics]\nsamples = 3\n";
        let a = run(&config(text), &RunSettings::default()).unwrap();
        let b = run(&config(text), &RunSettings { seed: 0, tolerance_scale: 10.0 }).unwrap();
        let (ca, cb) = (&a.summary.checks[0].criteria, &b.summary.checks[0].criteria);
        assert_eq!(cb[0].tolerance.0, 10.0 * ca[0].tolerance.0);
        assert_eq!(cb[1].tolerance.0, ca[1].tolerance.0);
    }
}
