mod config;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use cgw::cft;
use cgw::combinatorics::enumerate_connectivities;
use cgw::coulomb_gas::{build_spec, evaluate_basis, BasisFunction, PointConfig};
use cgw::evaluator::{Combination, Evaluator};
use cgw::frobenius::classify_interval;
use cgw::limits::{apply_l_index, collapse_limit};
use cgw::meander::{build_meander_matrix, fugacity, numeric_rank, rank_at_zero, meander_zero, zero_labels};
use cgw::weights::{crossing_probabilities, regularized_weights, solve_weights, Weight};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "cgw", version, about = "Multiple-SLE partition functions, connectivity weights and crossing probabilities")]
struct Cli {
    /// TOML or JSON file with quad, ladder, threshold and seed settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// List the connectivities of N arcs in canonical (or anchored) order.
    Enumerate {
        #[arg(long)]
        n_arcs: usize,
        #[arg(long)]
        anchor: Option<usize>,
    },
    /// Meander matrix, determinant, rank and determinant zeros.
    Meander {
        #[arg(long)]
        n_arcs: usize,
        #[arg(long, value_parser = parse_kappa, conflicts_with = "fugacity")]
        kappa: Option<f64>,
        /// Loop weight `n` used directly instead of `n(kappa)`.
        #[arg(long, allow_negative_numbers = true)]
        fugacity: Option<f64>,
        #[arg(long)]
        anchor: Option<usize>,
        #[arg(long)]
        det: bool,
        #[arg(long)]
        rank: bool,
        #[arg(long)]
        zeros: bool,
    },
    /// Evaluate one basis function `F_{c,theta}`.
    Eval {
        #[command(flatten)]
        at: Point,
        /// 1-based canonical index.
        #[arg(long)]
        connectivity: usize,
        /// Conjugate point; picked automatically when omitted.
        #[arg(long)]
        conjugate: Option<usize>,
        #[arg(long)]
        quad_tol: Option<f64>,
    },
    /// Collapse limit at one interval, or the full `[L_s]` functional.
    Limit {
        #[command(flatten)]
        at: Point,
        #[arg(long = "fn", value_parser = parse_fn)]
        func: FnSpec,
        #[arg(long, required_unless_present = "interval")]
        connectivity: Option<usize>,
        #[arg(long, conflicts_with = "connectivity")]
        interval: Option<usize>,
        /// Anchor of the order used to index `--connectivity`.
        #[arg(long)]
        anchor: Option<usize>,
    },
    /// Connectivity weights `Pi_1..Pi_{C_N}`.
    Weights {
        #[command(flatten)]
        at: Point,
        #[command(flatten)]
        sweep: Sweep,
        /// Use the symmetric extrapolation in kappa (needed at exceptional speeds).
        #[arg(long)]
        regularize: bool,
    },
    /// Crossing probabilities of a partition function.
    Crossing {
        #[command(flatten)]
        at: Point,
        #[arg(long = "fn", value_parser = parse_fn, default_value = "basis:1")]
        func: FnSpec,
        /// Shorthand for `--fn basis:T`.
        #[arg(long, conflicts_with = "func")]
        basis: Option<usize>,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Multiple-SLE and CFT type of an interval.
    Classify {
        #[command(flatten)]
        at: Point,
        #[arg(long = "fn", value_parser = parse_fn)]
        func: FnSpec,
        #[arg(long)]
        interval: usize,
    },
    /// Central charge, weights and minimal-model data of a speed.
    Cft {
        #[arg(long, value_parser = parse_kappa_text)]
        kappa: KappaText,
    },
    /// Run built-in consistency checks and print a pass/fail table.
    Verify {
        #[arg(long, value_enum, default_value_t = verify::Suite::All)]
        suite: verify::Suite,
    },
}

#[derive(Args, Debug, Clone)]
struct Point {
    #[arg(long, value_parser = parse_kappa)]
    kappa: f64,
    /// Comma-separated increasing coordinates `x_1,...,x_{2N}`.
    #[arg(long, value_parser = parse_points, allow_hyphen_values = true)]
    points: Points,
    /// Checked against the number of points when given.
    #[arg(long)]
    n_arcs: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct Sweep {
    /// `start:stop:count` grid in kappa; output one row per value.
    #[arg(long, value_parser = parse_grid)]
    kappa_sweep: Option<Grid>,
}

#[derive(Clone, Debug)]
struct Points(Vec<f64>);

#[derive(Clone, Debug)]
struct Grid(Vec<f64>);

#[derive(Clone, Debug)]
struct KappaText {
    text: String,
    value: f64,
}

#[derive(Clone, Debug)]
enum FnSpec {
    Basis(usize),
    Weight(usize),
    File(PathBuf),
}

#[derive(Deserialize)]
struct FnFile {
    terms: Vec<FnTerm>,
}

#[derive(Deserialize)]
struct FnTerm {
    coef: f64,
    basis: Option<usize>,
    weight: Option<usize>,
}

fn parse_kappa(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{e}"))?,
    };
    if !(v > 0.0 && v < 8.0) {
        return Err(format!("kappa = {v} must lie in (0, 8)"));
    }
    Ok(v)
}

fn parse_kappa_text(s: &str) -> Result<KappaText, String> {
    Ok(KappaText { text: s.to_string(), value: parse_kappa(s)? })
}

fn parse_points(s: &str) -> Result<Points, String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<Result<_, _>>()?;
    if v.len() < 2 || v.len() % 2 != 0 {
        return Err(format!("need an even number of points, got {}", v.len()));
    }
    if v.windows(2).any(|w| !(w[0] < w[1])) {
        return Err("points must be strictly increasing".into());
    }
    Ok(Points(v))
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected start:stop:count".into());
    }
    let a = parse_kappa(parts[0])?;
    let b = parse_kappa(parts[1])?;
    let n: usize = parts[2].parse().map_err(|e| format!("{e}"))?;
    if n == 0 {
        return Err("count must be positive".into());
    }
    if n == 1 {
        return Ok(Grid(vec![a]));
    }
    Ok(Grid((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()))
}

fn parse_fn(s: &str) -> Result<FnSpec, String> {
    let (kind, arg) = s.split_once(':').ok_or("expected basis:T, weight:T or file:PATH")?;
    match kind {
        "basis" => Ok(FnSpec::Basis(arg.parse().map_err(|e| format!("{e}"))?)),
        "weight" => Ok(FnSpec::Weight(arg.parse().map_err(|e| format!("{e}"))?)),
        "file" => Ok(FnSpec::File(PathBuf::from(arg))),
        _ => Err(format!("unknown function kind {kind:?}")),
    }
}

/// Usage problems found after parsing exit with 2, numerical ones with 1.
enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<cgw::Error> for Failure {
    fn from(e: cgw::Error) -> Self {
        match e {
            cgw::Error::Invalid(_) | cgw::Error::SizeMismatch { .. } | cgw::Error::SizeLimit { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

type Out = Result<Output, Failure>;

enum Output {
    Json(Value),
    Csv { header: Vec<String>, rows: Vec<Vec<String>> },
    /// Pass/fail table; the flag says whether everything passed.
    Table(String, bool),
}

impl Point {
    fn n_arcs(&self) -> Result<usize, Failure> {
        let n = self.points.0.len() / 2;
        match self.n_arcs {
            Some(m) if m != n => Err(Failure::Usage(format!("--n-arcs {m} does not match {} points", self.points.0.len()))),
            _ => Ok(n),
        }
    }

    fn config(&self) -> Result<PointConfig, Failure> {
        Ok(PointConfig::new(self.points.0.clone())?)
    }
}

fn build_fn(spec: &FnSpec, n_arcs: usize, kappa: f64, cfg: &RunConfig) -> Result<Arc<dyn Evaluator>, Failure> {
    Ok(match spec {
        FnSpec::Basis(t) => Arc::new(BasisFunction::canonical(n_arcs, *t, kappa, cfg.quad.clone())?),
        FnSpec::Weight(t) => Arc::new(Weight::new(n_arcs, *t, kappa, cfg.quad.clone())?),
        FnSpec::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let file: FnFile = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let mut comb = Combination::new(2 * n_arcs);
            for term in file.terms {
                let f: Arc<dyn Evaluator> = match (term.basis, term.weight) {
                    (Some(t), None) => Arc::new(BasisFunction::canonical(n_arcs, t, kappa, cfg.quad.clone())?),
                    (None, Some(t)) => Arc::new(Weight::new(n_arcs, t, kappa, cfg.quad.clone())?),
                    _ => return Err(Failure::Usage("each term needs exactly one of basis, weight".into())),
                };
                comb = comb.with(term.coef, f)?;
            }
            Arc::new(comb)
        }
    })
}

fn with_schema(mut v: Value) -> Value {
    if let Value::Object(m) = &mut v {
        m.insert("schema".into(), json!(1));
    }
    v
}

fn run(cli: &Cli, cfg: &RunConfig) -> Out {
    match &cli.cmd {
        Cmd::Enumerate { n_arcs, anchor } => {
            let ds = enumerate_connectivities(*n_arcs, *anchor)?;
            let names: Vec<String> = ds.iter().map(|d| d.to_parens()).collect();
            if cli.format == Format::Csv {
                let rows = names.iter().enumerate().map(|(k, s)| vec![(k + 1).to_string(), s.clone()]).collect();
                return Ok(Output::Csv { header: vec!["index".into(), "diagram".into()], rows });
            }
            Ok(Output::Json(json!({ "n_arcs": n_arcs, "anchor": anchor, "count": names.len(), "diagrams": names })))
        }
        Cmd::Meander { n_arcs, kappa, fugacity: n_direct, anchor, det, rank, zeros } => {
            let n = match (kappa, n_direct) {
                (Some(k), None) => fugacity(*k)?,
                (None, Some(n)) => *n,
                _ => return Err(Failure::Usage("give one of --kappa or --fugacity".into())),
            };
            let m = build_meander_matrix(*n_arcs, n, *anchor)?;
            let rows: Vec<Vec<f64>> = (0..m.size).map(|i| (0..m.size).map(|j| m.entries[(i, j)]).collect()).collect();
            if cli.format == Format::Csv {
                let header = (1..=m.size).map(|j| format!("t{j}")).collect();
                let rows = rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()).collect();
                return Ok(Output::Csv { header, rows });
            }
            let mut out = json!({ "n_arcs": n_arcs, "fugacity": n, "exponents": m.exponents, "matrix": rows });
            if *det {
                out["det"] = json!(m.determinant());
            }
            if *rank {
                out["rank"] = json!(numeric_rank(&m, 1e-9)?);
            }
            if *zeros {
                let z: Vec<Value> = zero_labels(*n_arcs)
                    .into_iter()
                    .map(|(q, q2)| Ok(json!({ "q": q, "q2": q2, "n": meander_zero(q, q2)?, "rank": rank_at_zero(*n_arcs, q, q2)? })))
                    .collect::<Result<_, cgw::Error>>()?;
                out["zeros"] = json!(z);
            }
            Ok(Output::Json(out))
        }
        Cmd::Eval { at, connectivity, conjugate, quad_tol } => {
            let n = at.n_arcs()?;
            let mut quad = cfg.quad.clone();
            if let Some(t) = quad_tol {
                quad.rel_tol = *t;
            }
            let x = at.config()?;
            let r = match conjugate {
                Some(c) => evaluate_basis(&build_spec(n, *connectivity, *c, at.kappa)?, &x, &quad)?,
                None => BasisFunction::canonical(n, *connectivity, at.kappa, quad)?.evaluate(&x)?,
            };
            Ok(Output::Json(json!({ "value": r.value, "error": r.abs_error_est, "imag_leak": r.imag_leak, "n_evals": r.n_evals })))
        }
        Cmd::Limit { at, func, connectivity, interval, anchor } => {
            let n = at.n_arcs()?;
            let f = build_fn(func, n, at.kappa, cfg)?;
            let x = &at.points.0;
            if let Some(i) = interval {
                let r = collapse_limit(&f, x, *i, at.kappa, &cfg.ladder)?;
                if cli.format == Format::Csv {
                    let rows = r.deltas.iter().zip(&r.values).map(|(d, v)| vec![d.to_string(), v.to_string()]).collect();
                    return Ok(Output::Csv { header: vec!["delta".into(), "value".into()], rows });
                }
                return Ok(Output::Json(json!({
                    "interval": i, "value": r.value, "residual": r.fit.residual, "stability": r.fit.stability,
                    "accepted": r.accepted, "deltas": r.deltas, "values": r.values,
                })));
            }
            let s = connectivity.expect("clap enforces one of --connectivity, --interval");
            let v = apply_l_index(s, *anchor, f.as_ref(), x, at.kappa, &cfg.ladder)?;
            Ok(Output::Json(json!({ "connectivity": s, "anchor": anchor, "value": v })))
        }
        Cmd::Weights { at, sweep, regularize } => {
            let kappas = sweep.kappa_sweep.as_ref().map(|g| g.0.clone()).unwrap_or_else(|| vec![at.kappa]);
            let x = at.config()?;
            at.n_arcs()?;
            let mut rows = Vec::new();
            for &k in &kappas {
                let w = if *regularize { regularized_weights(&x, k, cfg.quad.pole_step, &cfg.quad)? } else { solve_weights(&x, k, &cfg.quad)? };
                rows.push((k, w));
            }
            if cli.format == Format::Csv {
                let size = rows[0].1.values.len();
                let mut header = vec!["kappa".to_string()];
                header.extend((1..=size).map(|s| format!("pi{s}")));
                let rows = rows.iter().map(|(k, w)| std::iter::once(k.to_string()).chain(w.values.iter().map(|v| v.to_string())).collect()).collect();
                return Ok(Output::Csv { header, rows });
            }
            let arr: Vec<Value> = rows.iter().map(|(k, w)| json!({ "kappa": k, "values": w.values, "provenance": w.provenance, "rcond": w.rcond })).collect();
            Ok(Output::Json(json!({ "weights": arr })))
        }
        Cmd::Crossing { at, func, basis, sweep } => {
            let n = at.n_arcs()?;
            let x = at.config()?;
            let spec = basis.map(FnSpec::Basis).unwrap_or_else(|| func.clone());
            let kappas = sweep.kappa_sweep.as_ref().map(|g| g.0.clone()).unwrap_or_else(|| vec![at.kappa]);
            let mut rows = Vec::new();
            for &k in &kappas {
                let f = build_fn(&spec, n, k, cfg)?;
                rows.push((k, crossing_probabilities(f.as_ref(), &x, k, &cfg.quad, &cfg.ladder)?));
            }
            if cli.format == Format::Csv {
                let size = rows[0].1.probs.len();
                let mut header = vec!["kappa".to_string()];
                header.extend((1..=size).map(|s| format!("p{s}")));
                let rows = rows.iter().map(|(k, d)| std::iter::once(k.to_string()).chain(d.probs.iter().map(|v| v.to_string())).collect()).collect();
                return Ok(Output::Csv { header, rows });
            }
            let arr: Vec<Value> = rows
                .iter()
                .map(|(k, d)| json!({ "kappa": k, "probs": d.probs, "sum": d.probs.iter().sum::<f64>(), "coefficients": d.coefficients, "weights": d.weights, "partition_value": d.partition_value, "negative": d.negative }))
                .collect();
            if arr.len() == 1 {
                return Ok(Output::Json(arr.into_iter().next().expect("one row")));
            }
            Ok(Output::Json(json!({ "sweep": arr })))
        }
        Cmd::Classify { at, func, interval } => {
            let n = at.n_arcs()?;
            let f = build_fn(func, n, at.kappa, cfg)?;
            let c = classify_interval(f.as_ref(), &at.points.0, *interval, at.kappa, &cfg.ladder, &cfg.threshold)?;
            let nc = c.fit.normalized();
            Ok(Output::Json(json!({
                "interval": interval, "sle_type": c.sle_type, "cft_type": c.cft_type,
                "A0": c.fit.a0, "B0": c.fit.b0, "C0": c.fit.c0, "normalized": { "A0": nc.a0, "A1": nc.a1, "B0": nc.b, "C0": nc.c0 },
                "residuals": { "fit": c.fit.residual, "stability": c.fit.stability }, "coefficients": c.coefficients,
            })))
        }
        Cmd::Cft { kappa } => {
            let s = cft::summary(kappa.value)?;
            let labels: Vec<Value> = [(1u32, 2u32), (2, 1), (1, 3)]
                .iter()
                .map(|&(r, s)| Ok(json!({ "r": r, "s": s, "h": cft::kac_weight(r, s, kappa.value)?.value })))
                .collect::<Result<_, cgw::Error>>()?;
            let facts = match &s.minimal_model {
                Some(m) => json!({
                    "exceptional": true,
                    "fact": match m.correspondence { cft::Correspondence::TwoToOne => 2, cft::Correspondence::OneToOne => 3 },
                    "correspondence": m.correspondence,
                    "min_n_arcs": m.q - 1,
                }),
                None => json!({ "exceptional": false }),
            };
            Ok(Output::Json(json!({
                "kappa": kappa.text, "c": s.central_charge, "phase": s.phase, "one_leg_label": s.one_leg_label,
                "leg_weights": s.leg_weights, "labels": labels, "minimal_model": s.minimal_model.map(|m| m.model), "facts": facts,
            })))
        }
        Cmd::Verify { suite } => {
            let rows = verify::run(*suite, cfg);
            let ok = rows.iter().all(|r| r.passed);
            let mut t = String::new();
            for r in &rows {
                t.push_str(&format!("{:<4} {:<40} {}\n", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail));
            }
            t.push_str(&format!("{} of {} checks passed\n", rows.iter().filter(|r| r.passed).count(), rows.len()));
            Ok(Output::Table(t, ok))
        }
    }
}

fn emit(out: Output) -> Result<bool, String> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match out {
        Output::Json(v) => {
            let text = serde_json::to_string_pretty(&with_schema(v)).map_err(|e| e.to_string())?;
            writeln!(lock, "{text}").map_err(|e| e.to_string())?;
            Ok(true)
        }
        Output::Csv { header, rows } => {
            let mut w = csv::Writer::from_writer(lock);
            w.write_record(&header).map_err(|e| e.to_string())?;
            for r in rows {
                w.write_record(&r).map_err(|e| e.to_string())?;
            }
            w.flush().map_err(|e| e.to_string())?;
            Ok(true)
        }
        Output::Table(t, ok) => {
            write!(lock, "{t}").map_err(|e| e.to_string())?;
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    // A closed pipe (`cgw ... | head`) is not an error.
    let ok = |e: &String| e.contains("Broken pipe");
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("CGW_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: CGW_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    let cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    match run(&cli, &cfg) {
        Ok(out) => match emit(out) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) if ok(&e) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
