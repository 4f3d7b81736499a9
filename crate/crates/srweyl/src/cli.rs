//! Subcommand definitions and dispatch.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use srweyl_core::expand::{
    expand_nested_exact, expand_nested_leading, expand_single, quadrature_oracle, Coefficient, CoefficientSource,
    ExpansionResult, GFunction, NestedSpec,
};
use srweyl_core::flag::{compute_flag, is_privileged, restricted_q, Order};
use srweyl_core::models::{
    cutoff_for, grushin_flat_kernel, grushin_sphere_expected, heisenberg_kernel, two_term_fit, ModelKind, SpectrumModel,
    SPHERE_SHIFT,
};
use srweyl_core::nilpotent::{dilate_frame, multi_dilate, nilpotentize};
use srweyl_core::polyfield::parse_rational;
use srweyl_core::strata::weyl_predict;
use srweyl_core::volume::{build_catalog, default_times, fit_exponents, lattice_q_max, VolumeOptions};
use srweyl_core::{MultiPoly, Rational};

use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use crate::{json as fmt, parallel, table, verify};

/// Sub-Riemannian spectral invariants from polynomial frames.
#[derive(Parser, Debug)]
#[command(name = "srweyl", version, about)]
pub struct Cli {
    /// Maximum worker threads (falls back to SRWEYL_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the result here instead of stdout, with a `.manifest.json` sidecar.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// The subcommands.
#[derive(Subcommand, Debug)]
pub enum Command {
    /// Growth vector, weights, Hausdorff dimension and privileged-coordinate test at a point.
    Flag(FlagArgs),
    /// Nilpotent approximation at a point (or the whole dilated family with --dilated).
    Nilpotentize(NilpotentizeArgs),
    /// Iterated dilation along a chain of points.
    MultiDilate(MultiDilateArgs),
    /// Volume integrals of 1/v(q, sqrt t) over a box, as CSV (t, V).
    VolumeScan(VolumeScanArgs),
    /// Fits gamma, log power and constant to (t, V) samples from CSV.
    Fit(FitArgs),
    /// Predicted leading Weyl term of a stratification.
    Predict(PredictArgs),
    /// Eigenvalues and multiplicities of a model spectrum, as CSV.
    Spectrum(SpectrumArgs),
    /// Fits the small-time heat trace of a model spectrum.
    HeatFit(HeatFitArgs),
    /// Closed-form heat kernels.
    Kernel(KernelArgs),
    /// Asymptotic expansion of single-layer or nested integrals.
    Expand(ExpandArgs),
    /// Runs the acceptance table.
    Verify(VerifyArgs),
}

/// `flag` options.
#[derive(Args, Debug)]
pub struct FlagArgs {
    /// Frame JSON file, `-` or absent for stdin.
    pub frame: Option<PathBuf>,
    /// Point as comma-separated rationals (default: origin).
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Cap on bracket length.
    #[arg(long, default_value_t = srweyl_core::flag::DEFAULT_R_MAX)]
    pub r_max: usize,
    /// Also report the flag restricted to the span of these coordinates (1-based).
    #[arg(long)]
    pub subset: Option<String>,
}

/// `nilpotentize` options.
#[derive(Args, Debug)]
pub struct NilpotentizeArgs {
    /// Frame JSON file, `-` or absent for stdin.
    pub frame: Option<PathBuf>,
    /// Base point (default: origin).
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Emit the dilated family with per-term `eps_exp` instead of its limit.
    #[arg(long)]
    pub dilated: bool,
    /// Weights to use instead of the computed ones.
    #[arg(long)]
    pub weights: Option<String>,
}

/// `multi-dilate` options.
#[derive(Args, Debug)]
pub struct MultiDilateArgs {
    /// Frame JSON file, `-` or absent for stdin.
    pub frame: Option<PathBuf>,
    /// Chain `[{"point": [..], "weights": [..]?, "tau": "p/q"?}]`, inline or as a file path.
    #[arg(long)]
    pub chain: String,
}

/// `volume-scan` options.
#[derive(Args, Debug)]
pub struct VolumeScanArgs {
    /// Frame JSON file, `-` or absent for stdin.
    pub frame: Option<PathBuf>,
    /// Box as `a:b,c:d,..` with rational ends.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub bx: String,
    /// Comma-separated times (default: 12 geometric in [1e-9, 1e-3]).
    #[arg(long)]
    pub times: Option<String>,
    /// Base cells per axis.
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    /// Relative accuracy target.
    #[arg(long, default_value_t = 1e-4)]
    pub rel_tol: f64,
}

/// `fit` options.
#[derive(Args, Debug)]
pub struct FitArgs {
    /// CSV with columns t, V; `-` or absent for stdin.
    pub csv: Option<PathBuf>,
}

/// `predict` options.
#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Stratification JSON file, `-` or absent for stdin.
    pub strata: Option<PathBuf>,
    /// Treat the structure as not nilpotentizable (prediction is then a lower bound).
    #[arg(long)]
    pub not_nilpotentizable: bool,
}

/// Model spectra.
#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum Model {
    /// `l(l+1) - m^2`.
    GrushinSphere,
    /// Heisenberg nilmanifold.
    Heisenberg,
    /// bi-Heisenberg nilmanifold.
    BiHeisenberg,
    /// `j^(1/gamma)`.
    Synthetic,
}

/// Model parameters shared by `spectrum` and `heat-fit`.
#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Which model.
    #[arg(long, value_enum)]
    pub model: Model,
    /// First bi-Heisenberg frequency.
    #[arg(long, default_value_t = 1.0)]
    pub omega1: f64,
    /// Second bi-Heisenberg frequency.
    #[arg(long, default_value_t = 1.0)]
    pub omega2: f64,
    /// Growth exponent of the synthetic spectrum.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
}

impl ModelArgs {
    fn kind(&self) -> ModelKind {
        match self.model {
            Model::GrushinSphere => ModelKind::GrushinSphere,
            Model::Heisenberg => ModelKind::HeisenbergQuotient,
            Model::BiHeisenberg => ModelKind::BiHeisenberg { omega1: self.omega1, omega2: self.omega2 },
            Model::Synthetic => ModelKind::Synthetic { gamma: self.gamma },
        }
    }

    fn build(&self, cutoff: f64) -> srweyl_core::Result<SpectrumModel> {
        match self.model {
            Model::GrushinSphere => SpectrumModel::grushin_sphere(cutoff),
            Model::Heisenberg => SpectrumModel::heisenberg(cutoff),
            Model::BiHeisenberg => SpectrumModel::biheisenberg(self.omega1, self.omega2, cutoff),
            Model::Synthetic => SpectrumModel::synthetic(self.gamma, cutoff),
        }
    }
}

/// `spectrum` options.
#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Largest eigenvalue listed.
    #[arg(long)]
    pub cutoff: f64,
}

/// `heat-fit` options.
#[derive(Args, Debug)]
pub struct HeatFitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Smallest time.
    #[arg(long)]
    pub tmin: f64,
    /// Largest time.
    #[arg(long)]
    pub tmax: f64,
    /// Number of geometric sample times.
    #[arg(long, default_value_t = 12)]
    pub samples: usize,
    /// 2 fits `A |ln t|/t + B/t`; 1 fits `C |ln t|^k / t^gamma`.
    #[arg(long, default_value_t = 2)]
    pub terms: u32,
    /// Spectral shift (default 1/4 for the sphere, 0 otherwise).
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<f64>,
    /// Absolute truncation error allowed at the smallest time.
    #[arg(long, default_value_t = 1e-8)]
    pub tail_tol: f64,
}

/// Kernel models.
#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum KernelModel {
    /// Flat Baouendi-Grushin kernel `e(t, x, x')`.
    GrushinFlat,
    /// Heisenberg kernel from the origin, `e(t, (x1, x2, y))`.
    Heisenberg,
}

/// `kernel` options.
#[derive(Args, Debug)]
pub struct KernelArgs {
    /// Which kernel.
    #[arg(long, value_enum)]
    pub model: KernelModel,
    /// Time.
    #[arg(long)]
    pub t: f64,
    /// First point (`x1,x2`, or `x1,x2,y` for Heisenberg).
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    /// Second point (Grushin only).
    #[arg(long, allow_hyphen_values = true)]
    pub xp: Option<String>,
}

/// `expand` options.
#[derive(Args, Debug)]
pub struct ExpandArgs {
    /// Expand a nested integral instead of a single layer.
    #[arg(long)]
    pub nested: bool,
    /// Exponent of the single layer.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<i64>,
    /// Log power of the single layer.
    #[arg(long, default_value_t = 0)]
    pub j: u32,
    /// Exponents `k1,..,kp` of the nested layers.
    #[arg(long, allow_hyphen_values = true)]
    pub klist: Option<String>,
    /// `poly:<polynomial>` in `tau, eps` (single) or `tau1..taup, eps` (nested).
    #[arg(long = "G", default_value = "poly:1")]
    pub g: String,
    /// Keep terms with power at most this (single layer).
    #[arg(long, allow_hyphen_values = true, default_value_t = 3)]
    pub order: i64,
    /// Point at which the nested expansion is compared with the oracle.
    #[arg(long, default_value_t = 1e-3)]
    pub x: f64,
}

/// `verify` options.
#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// `all`, `expansion`, or comma-separated criterion numbers.
    #[arg(long, default_value = "all")]
    pub suite: String,
}

/// What a command produced.
enum Output {
    Json(Value),
    Text(String),
}

struct Run {
    input: Vec<u8>,
    params: BTreeMap<String, String>,
    output: Output,
    failure: Option<String>,
}

impl Run {
    fn new(input: Vec<u8>, output: Output) -> Self {
        Run { input, params: BTreeMap::new(), output, failure: None }
    }

    fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.into(), value.to_string());
        self
    }
}

fn read_input(path: Option<&Path>) -> Result<Vec<u8>> {
    match path {
        Some(p) if p != Path::new("-") => Ok(std::fs::read(p)?),
        _ => {
            let mut buf = Vec::new();
            std::io::stdin().read_to_end(&mut buf)?;
            Ok(buf)
        }
    }
}

fn utf8(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| CliError::Input(format!("input is not UTF-8: {e}")))
}

fn rationals(s: &str) -> Result<Vec<Rational>> {
    s.split(',').map(|v| parse_rational(v).map_err(CliError::from)).collect()
}

fn floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Input(format!("not a number: {v:?}"))))
        .collect()
}

fn integers<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| CliError::Input(format!("not an integer: {v:?}"))))
        .collect()
}

fn point_or_origin(point: &Option<String>, n: usize) -> Result<Vec<Rational>> {
    let q = match point {
        Some(s) => rationals(s)?,
        None => vec![srweyl_core::polyfield::int(0); n],
    };
    if q.len() != n {
        return Err(srweyl_core::Error::DimensionMismatch { expected: n, found: q.len() }.into());
    }
    Ok(q)
}

fn order_value(o: &Order) -> Value {
    match o {
        Order::Exact(k) => json!(k),
        Order::AtLeast(k) => json!(format!(">={k}")),
    }
}

fn words_value(words: &[srweyl_core::BracketWord]) -> Value {
    json!(words.iter().map(|w| w.indices().to_vec()).collect::<Vec<_>>())
}

fn cmd_flag(a: &FlagArgs) -> Result<Run> {
    let input = read_input(a.frame.as_deref())?;
    let frame = fmt::parse_frame(utf8(&input)?)?;
    let q = point_or_origin(&a.point, frame.dim())?;
    let fd = compute_flag(&frame, &q, a.r_max)?;
    let pr = is_privileged(&frame, &q)?;
    let mut out = json!({
        "point": q.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
        "growth": fd.growth,
        "weights": fd.weights,
        "Q": fd.hausdorff,
        "r": fd.degree,
        "adapted_words": words_value(&fd.adapted_words),
        "privileged": pr.privileged,
        "orders": pr.orders.iter().map(order_value).collect::<Vec<_>>(),
    });
    if let Some(s) = &a.subset {
        let rf = restricted_q(&frame, &q, &integers::<usize>(s)?)?;
        out["restricted"] = json!({ "subset": rf.subset, "growth": rf.growth, "Q": rf.hausdorff });
    }
    Ok(Run::new(input, Output::Json(out)).param("point", a.point.as_deref().unwrap_or("origin")).param("r_max", a.r_max))
}

fn cmd_nilpotentize(a: &NilpotentizeArgs) -> Result<Run> {
    let input = read_input(a.frame.as_deref())?;
    let frame = fmt::parse_frame(utf8(&input)?)?;
    let q = point_or_origin(&a.point, frame.dim())?;
    let weights = a.weights.as_deref().map(integers::<u32>).transpose()?;
    let out = if a.dilated {
        let d = dilate_frame(&frame, &q, weights.as_deref())?;
        let mut v = fmt::scaled_frame_value(&d);
        v["weights"] = json!(d.stage_weights()[0]);
        v
    } else if let Some(w) = &weights {
        let d = dilate_frame(&frame, &q, Some(w))?;
        let mut v = fmt::frame_value(&d.leading()?.to_frame()?);
        v["weights"] = json!(w);
        v
    } else {
        let nil = nilpotentize(&frame, &q)?;
        let mut v = fmt::frame_value(&nil.frame);
        v["weights"] = json!(nil.weights);
        v
    };
    Ok(Run::new(input, Output::Json(out))
        .param("point", a.point.as_deref().unwrap_or("origin"))
        .param("dilated", a.dilated)
        .param("weights", a.weights.as_deref().unwrap_or("computed")))
}

fn cmd_multi_dilate(a: &MultiDilateArgs) -> Result<Run> {
    let input = read_input(a.frame.as_deref())?;
    let frame = fmt::parse_frame(utf8(&input)?)?;
    let chain_text = if a.chain.trim_start().starts_with('[') { a.chain.clone() } else { std::fs::read_to_string(&a.chain)? };
    let chain = fmt::parse_chain(&chain_text)?;
    let d = multi_dilate(&frame, &chain)?;
    let mut v = fmt::scaled_frame_value(&d);
    v["stage_weights"] = json!(d.stage_weights());
    Ok(Run::new(input, Output::Json(v)).param("chain", chain_text.trim()))
}

fn parse_box(s: &str) -> Result<Vec<(Rational, Rational)>> {
    s.split(',')
        .map(|side| {
            let (a, b) = side.split_once(':').ok_or_else(|| CliError::Input(format!("box side {side:?} is not a:b")))?;
            let (a, b) = (parse_rational(a)?, parse_rational(b)?);
            if a >= b {
                return Err(CliError::Input(format!("empty box side {side:?}")));
            }
            Ok((a, b))
        })
        .collect()
}

fn cmd_volume_scan(a: &VolumeScanArgs) -> Result<Run> {
    let input = read_input(a.frame.as_deref())?;
    let frame = fmt::parse_frame(utf8(&input)?)?;
    let bx = parse_box(&a.bx)?;
    let times = match &a.times {
        Some(s) => floats(s)?,
        None => default_times(),
    };
    let catalog = build_catalog(&frame, lattice_q_max(&frame, &bx)?)?;
    let opts = VolumeOptions { base_grid: a.grid, rel_tol: a.rel_tol, ..VolumeOptions::default() };
    let mut rows = Vec::with_capacity(times.len());
    for &t in &times {
        rows.push(vec![t, parallel::volume_integral(&catalog, &bx, t, &opts)?]);
    }
    let text = table::write(&["t", "V"], &rows)?;
    Ok(Run::new(input, Output::Text(text))
        .param("box", &a.bx)
        .param("times", a.times.as_deref().unwrap_or("default"))
        .param("grid", a.grid)
        .param("rel_tol", a.rel_tol))
}

fn cmd_fit(a: &FitArgs) -> Result<Run> {
    let input = read_input(a.csv.as_deref())?;
    let samples = table::read_pairs(&input)?;
    let fit = fit_exponents(&samples)?;
    let out = json!({ "gamma": fit.gamma, "k": fit.log_power, "C": fit.constant, "residual": fit.residual });
    Ok(Run::new(input, Output::Json(out)))
}

fn prediction_value(p: &srweyl_core::strata::WeylPrediction) -> Value {
    json!({
        "gamma": p.gamma.to_string(),
        "gamma_value": srweyl_core::polyfield::to_f64(&p.gamma),
        "log_power": p.log_power,
        "support": p.support,
        "max_hausdorff": p.max_hausdorff,
        "multiplicity": p.multiplicity,
        "lower_bound_only": p.lower_bound_only,
    })
}

fn cmd_predict(a: &PredictArgs) -> Result<Run> {
    let input = read_input(a.strata.as_deref())?;
    let (s, nil) = fmt::parse_stratification(utf8(&input)?)?;
    let p = weyl_predict(&s, nil && !a.not_nilpotentizable)?;
    let mut out = prediction_value(&p);
    out["chains"] = json!(s.chains().iter().map(|c| c.iter().map(|&i| s.strata[i].name.clone()).collect::<Vec<_>>()).collect::<Vec<_>>());
    Ok(Run::new(input, Output::Json(out)).param("not_nilpotentizable", a.not_nilpotentizable))
}

fn model_params(run: Run, m: &ModelArgs) -> Run {
    let run = run.param("model", format!("{:?}", m.model));
    match m.model {
        Model::BiHeisenberg => run.param("omega1", m.omega1).param("omega2", m.omega2),
        Model::Synthetic => run.param("gamma", m.gamma),
        _ => run,
    }
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<Run> {
    let model = a.model.build(a.cutoff)?;
    let rows: Vec<Vec<f64>> = model.levels().iter().map(|&(v, m)| vec![v, m as f64]).collect();
    let text = table::write_levels(&rows)?;
    Ok(model_params(Run::new(Vec::new(), Output::Text(text)), &a.model).param("cutoff", a.cutoff))
}

fn cmd_heat_fit(a: &HeatFitArgs) -> Result<Run> {
    if !(a.tmin > 0.0 && a.tmax > a.tmin) || a.samples < 3 {
        return Err(CliError::Input("need 0 < tmin < tmax and at least 3 samples".into()));
    }
    let shift = a.shift.unwrap_or(if a.model.model == Model::GrushinSphere { SPHERE_SHIFT } else { 0.0 });
    let cutoff = cutoff_for(a.model.kind(), a.tmin, shift, a.tail_tol);
    let model = a.model.build(cutoff)?;
    let times: Vec<f64> =
        (0..a.samples).map(|i| a.tmin * (a.tmax / a.tmin).powf(i as f64 / (a.samples - 1) as f64)).collect();
    let mut samples = Vec::with_capacity(times.len());
    let mut tail: f64 = 0.0;
    for &t in &times {
        let s = parallel::heat_trace(&model, t, shift)?;
        tail = tail.max(s.tail_bound);
        samples.push((s.t, s.z));
    }
    let mut out = match a.terms {
        2 => {
            let (aa, bb) = two_term_fit(&samples)?;
            let mut v = json!({ "A": aa, "B": bb });
            if a.model.model == Model::GrushinSphere && shift == SPHERE_SHIFT {
                let (ea, eb) = grushin_sphere_expected();
                v["expected"] = json!({ "A": ea, "B": eb });
            }
            v
        }
        1 => {
            let f = fit_exponents(&samples)?;
            json!({ "gamma": f.gamma, "k": f.log_power, "C": f.constant, "residual": f.residual })
        }
        n => return Err(CliError::Input(format!("--terms must be 1 or 2, got {n}"))),
    };
    out["cutoff"] = json!(cutoff);
    out["max_tail_bound"] = json!(tail);
    out["shift"] = json!(shift);
    let run = Run::new(Vec::new(), Output::Json(out))
        .param("tmin", a.tmin)
        .param("tmax", a.tmax)
        .param("samples", a.samples)
        .param("terms", a.terms)
        .param("shift", shift);
    Ok(model_params(run, &a.model))
}

fn cmd_kernel(a: &KernelArgs) -> Result<Run> {
    let x = floats(&a.x)?;
    let value = match a.model {
        KernelModel::GrushinFlat => {
            let xp = floats(a.xp.as_deref().ok_or_else(|| CliError::Input("--xp is required".into()))?)?;
            if x.len() != 2 || xp.len() != 2 {
                return Err(CliError::Input("Grushin points have two coordinates".into()));
            }
            grushin_flat_kernel(a.t, [x[0], x[1]], [xp[0], xp[1]])?
        }
        KernelModel::Heisenberg => {
            if x.len() != 3 {
                return Err(CliError::Input("Heisenberg points have three coordinates".into()));
            }
            heisenberg_kernel(a.t, [x[0], x[1]], x[2])?
        }
    };
    let run = Run::new(Vec::new(), Output::Text(format!("{}\n", fmt::fmt_f64(value))))
        .param("model", format!("{:?}", a.model))
        .param("t", a.t)
        .param("x", &a.x);
    Ok(match &a.xp {
        Some(xp) => run.param("xp", xp),
        None => run,
    })
}

fn coefficient_value(c: &Coefficient) -> Value {
    match c {
        Coefficient::Exact(r) => json!({ "exact": r.to_string(), "value": srweyl_core::polyfield::to_f64(r) }),
        Coefficient::Approx(v) => json!({ "value": v }),
    }
}

fn expansion_value(r: &ExpansionResult) -> Value {
    let terms: Vec<Value> = r
        .terms
        .iter()
        .map(|t| json!({ "power": t.power, "log_power": t.log_power, "coefficient": coefficient_value(&t.coefficient) }))
        .collect();
    json!({ "terms": terms, "order": r.order })
}

fn parse_g(src: &str, vars: &[&str]) -> Result<MultiPoly> {
    let body = src
        .strip_prefix("poly:")
        .ok_or_else(|| CliError::Input(format!("G must be given as poly:<polynomial>, got {src:?}")))?;
    Ok(MultiPoly::parse(body.trim().trim_matches('"'), vars)?)
}

fn cmd_expand(a: &ExpandArgs) -> Result<Run> {
    if !a.nested {
        let k = a.k.ok_or_else(|| CliError::Input("--k is required".into()))?;
        let g = parse_g(&a.g, &["tau", "eps"])?;
        let r = expand_single(GFunction::Poly(&g), k, a.j, a.order)?;
        let run = Run::new(Vec::new(), Output::Json(expansion_value(&r)));
        return Ok(run.param("k", k).param("j", a.j).param("G", &a.g).param("order", a.order));
    }
    let klist_src = a.klist.as_deref().ok_or_else(|| CliError::Input("--klist is required with --nested".into()))?;
    let ks: Vec<i64> = integers(klist_src)?;
    if ks.is_empty() {
        return Err(CliError::Input("--klist is empty".into()));
    }
    let names: Vec<String> = (1..=ks.len()).map(|i| format!("tau{i}")).chain(["eps".to_string()]).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let g = parse_g(&a.g, &refs)?;
    let spec = NestedSpec { klist: &ks, g: GFunction::Poly(&g) };
    let lead = expand_nested_leading(spec)?;
    let full = expand_nested_exact(&ks, &g)?;
    let oracle = quadrature_oracle(spec, a.x)?;
    let expansion = full.eval(a.x);
    let c = &lead.concentration;
    let out = json!({
        "power": lead.power,
        "log_power": lead.log_power,
        "coefficient": coefficient_value(&lead.coefficient),
        "source": match lead.source {
            CoefficientSource::Exact => "exact",
            CoefficientSource::Quadrature => "quadrature",
            CoefficientSource::Numeric => "numeric",
        },
        "concentration": {
            "epsilon": c.epsilon,
            "tau": c.tau,
            "tau_indices": c.tau_indices,
            "minimal_tau_index": c.minimal_tau_index,
        },
        "expansion": expansion_value(&full),
        "x": a.x,
        "oracle": oracle,
        "expansion_value": expansion,
        "relative_difference": ((expansion - oracle) / oracle).abs(),
    });
    Ok(Run::new(Vec::new(), Output::Json(out)).param("klist", klist_src).param("G", &a.g).param("x", a.x))
}

fn cmd_verify(a: &VerifyArgs) -> Result<Run> {
    let ids = verify::suite(&a.suite).ok_or_else(|| CliError::Input(format!("unknown suite {:?}", a.suite)))?;
    let mut text = String::new();
    let mut failed = Vec::new();
    for id in ids {
        let r = verify::run(id);
        text.push_str(&r.line());
        text.push('\n');
        for c in &r.checks {
            text.push_str(&format!("    {} {}: {}\n", if c.passed { "ok  " } else { "FAIL" }, c.label, c.detail));
        }
        if !r.passed() {
            failed.push(id.to_string());
        }
    }
    let mut run = Run::new(Vec::new(), Output::Text(text)).param("suite", &a.suite);
    if !failed.is_empty() {
        run.failure = Some(format!("criteria {}", failed.join(", ")));
    }
    Ok(run)
}

fn execute(cli: &Cli) -> Result<Run> {
    match &cli.command {
        Command::Flag(a) => cmd_flag(a),
        Command::Nilpotentize(a) => cmd_nilpotentize(a),
        Command::MultiDilate(a) => cmd_multi_dilate(a),
        Command::VolumeScan(a) => cmd_volume_scan(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::HeatFit(a) => cmd_heat_fit(a),
        Command::Kernel(a) => cmd_kernel(a),
        Command::Expand(a) => cmd_expand(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Flag(_) => "flag",
        Command::Nilpotentize(_) => "nilpotentize",
        Command::MultiDilate(_) => "multi-dilate",
        Command::VolumeScan(_) => "volume-scan",
        Command::Fit(_) => "fit",
        Command::Predict(_) => "predict",
        Command::Spectrum(_) => "spectrum",
        Command::HeatFit(_) => "heat-fit",
        Command::Kernel(_) => "kernel",
        Command::Expand(_) => "expand",
        Command::Verify(_) => "verify",
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Runs a parsed command line, writing results to `stdout` or `--out`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let threads = parallel::thread_count(cli.threads);
    let run = parallel::with_pool(threads, || execute(cli))?;
    let body = match &run.output {
        Output::Json(v) => fmt::to_string(v),
        Output::Text(t) => t.clone(),
    };
    match &cli.out {
        Some(path) => {
            std::fs::write(path, &body)?;
            let mut params = run.params.clone();
            if let Some(n) = threads {
                params.insert("threads".into(), n.to_string());
            }
            let manifest = RunManifest::new(command_name(&cli.command), &run.input, params);
            std::fs::write(manifest_path(path), fmt::to_string(&manifest.to_value()))?;
        }
        None => stdout.write_all(body.as_bytes())?,
    }
    match run.failure {
        Some(msg) => Err(CliError::VerificationFailed(msg)),
        None => Ok(()),
    }
}

/// Parses `argv`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("srweyl: {e}");
            e.exit_code()
        }
    }
}
