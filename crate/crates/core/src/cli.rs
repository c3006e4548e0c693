//! Batch front end: argument and config handling, report assembly, output.

use crate::aharonov_bohm::{self as ab, AdmissiblePair, M2, TABLE_ROWS};
use crate::boundary::{sample_closed_path, QuadrantBoundary};
use crate::chern_pairing::{convergence_ladder, GridSpec3D, SphereManifold, XOrientation};
use crate::point_models::{self as pm, PointModel, PointModelKind, COUPLING_GRID};
use crate::schrodinger::{
    self as sc, Levinson3DOptions, PhaseShiftTable, Potential1D, Profile, RadialPotential,
};
use crate::specialfn::C64;
use crate::winding::{wind_regularized, PhiABLoop, QuadratureSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "levlab", version, about = "Levinson-type winding checks for scattering models")]
pub struct Cli {
    /// TOML file with `command`, global keys and a `[params]` table
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// report file; without it the report goes to stdout and the summary to stderr
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// tolerance override for the command's checks
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, env = "LEVLAB_JOBS")]
    pub jobs: Option<usize>,
    /// CSV of sampled boundary phases or phase shifts
    #[arg(long, global = true)]
    pub plot: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Point interactions on the coupling grid
    VerifyPoint(PointArgs),
    /// One Aharonov–Bohm extension
    VerifyAb(AbArgs),
    /// Every row of the Aharonov–Bohm case tables
    AbTables(AbTablesArgs),
    /// Regularized winding of the non-smooth loops φ_{a,b}
    PhiAb(PhiAbArgs),
    /// Degree-three pairing over the sphere of extensions
    Chern(ChernArgs),
    /// 1D Schrödinger operator on the line
    #[command(name = "schrodinger-1d")]
    Schrodinger1d(Schro1dArgs),
    /// 3D radial Schrödinger operator
    #[command(name = "schrodinger-3d")]
    Schrodinger3d(Schro3dArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyPoint(_) => "verify-point",
            Command::VerifyAb(_) => "verify-ab",
            Command::AbTables(_) => "ab-tables",
            Command::PhiAb(_) => "phi-ab",
            Command::Chern(_) => "chern",
            Command::Schrodinger1d(_) => "schrodinger-1d",
            Command::Schrodinger3d(_) => "schrodinger-3d",
        }
    }
}

macro_rules! params {
    ($(#[$m:meta])* $name:ident { $($(#[$fm:meta])* $f:ident : $t:ty),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(
                $(#[$fm])*
                #[arg(long)]
                #[serde(skip_serializing_if = "Option::is_none", default)]
                pub $f: Option<$t>,
            )*
        }
    };
}

params!(PointArgs {
    /// baby, delta1d, deltaprime1d, point2d, point3d or all
    model: String,
    #[arg(value_delimiter = ',', allow_negative_numbers = true)]
    coupling: Vec<f64>,
    /// replaces the bound-state count as the expected total
    expect_total: i64,
});

params!(AbArgs {
    alpha: f64,
    /// name from the representative list, e.g. "E=diag(1,2)"
    pair: String,
    /// U as re00,im00,re01,im01,re10,im10,re11,im11
    #[arg(value_delimiter = ',', allow_negative_numbers = true)]
    unitary: Vec<f64>,
    expect_total: i64,
});

params!(AbTablesArgs {
    #[arg(value_delimiter = ',')]
    alphas: Vec<f64>,
});

params!(PhiAbArgs {
    a: f64,
    b: f64,
    /// regularization order; the minimal valid one by default
    p: u32,
    expected: f64,
});

params!(ChernArgs {
    #[arg(allow_negative_numbers = true)]
    lambda1_arg: f64,
    #[arg(allow_negative_numbers = true)]
    lambda2_arg: f64,
    alpha: f64,
    levels: usize,
    n_rho: usize,
    n_phi: usize,
    n_xi: usize,
    ladder_tol: f64,
    /// phi-rho (default) or rho-phi
    orientation: String,
    expected: f64,
});

params!(Schro1dArgs {
    /// zero, sech2, square_well, gaussian or tabulated
    potential: String,
    #[arg(allow_negative_numbers = true)]
    depth: f64,
    width: f64,
    #[arg(allow_negative_numbers = true)]
    strength: f64,
    /// tabulated x,V rows
    csv: PathBuf,
    cutoff: f64,
    expect_bound_states: usize,
});

params!(Schro3dArgs {
    /// zero, square_well, gaussian or tabulated
    potential: String,
    #[arg(allow_negative_numbers = true)]
    depth: f64,
    width: f64,
    csv: PathBuf,
    cutoff: f64,
    #[arg(value_delimiter = ',')]
    p: Vec<u32>,
    k_max: f64,
    l_max: u32,
    expect_bound_states: usize,
});

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<String>,
    out: Option<PathBuf>,
    format: Option<Format>,
    tol: Option<f64>,
    jobs: Option<usize>,
    plot: Option<PathBuf>,
    #[serde(default)]
    params: toml::Table,
}

/// Fully resolved run: command with merged parameters and output settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub tol: Option<f64>,
    pub jobs: Option<usize>,
    pub plot: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn merge<T: Serialize + for<'de> Deserialize<'de>>(cli: &T, file: &toml::Table) -> Result<T, CliError> {
    let mut base = serde_json::to_value(file).map_err(|e| invalid(e.to_string()))?;
    let over = serde_json::to_value(cli).map_err(|e| invalid(e.to_string()))?;
    if let (Value::Object(b), Value::Object(o)) = (&mut base, over) {
        b.extend(o);
    }
    serde_json::from_value(base).map_err(|e| invalid(format!("parameters: {e}")))
}

impl RunConfig {
    pub fn resolve(cli: Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
                toml::from_str::<FileConfig>(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };
        let command = match (cli.command, file.command.as_deref()) {
            (Some(c), Some(f)) if c.name() != f => {
                return Err(invalid(format!("command {} conflicts with config command {f}", c.name())))
            }
            (Some(c), _) => c,
            (None, Some(f)) => default_command(f)?,
            (None, None) => return Err(invalid("no command given")),
        };
        let p = &file.params;
        let command = match command {
            Command::VerifyPoint(a) => Command::VerifyPoint(merge(&a, p)?),
            Command::VerifyAb(a) => Command::VerifyAb(merge(&a, p)?),
            Command::AbTables(a) => Command::AbTables(merge(&a, p)?),
            Command::PhiAb(a) => Command::PhiAb(merge(&a, p)?),
            Command::Chern(a) => Command::Chern(merge(&a, p)?),
            Command::Schrodinger1d(a) => Command::Schrodinger1d(merge(&a, p)?),
            Command::Schrodinger3d(a) => Command::Schrodinger3d(merge(&a, p)?),
        };
        let tol = cli.tol.or(file.tol);
        if let Some(t) = tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(invalid(format!("tol must be positive, got {t}")));
            }
        }
        let jobs = cli.jobs.or(file.jobs);
        if jobs == Some(0) {
            return Err(invalid("jobs must be at least 1"));
        }
        Ok(RunConfig {
            command,
            out: cli.out.or(file.out),
            format: cli.format.or(file.format).unwrap_or_default(),
            tol,
            jobs,
            plot: cli.plot.or(file.plot),
        })
    }
}

fn default_command(name: &str) -> Result<Command, CliError> {
    Ok(match name {
        "verify-point" => Command::VerifyPoint(Default::default()),
        "verify-ab" => Command::VerifyAb(Default::default()),
        "ab-tables" => Command::AbTables(Default::default()),
        "phi-ab" => Command::PhiAb(Default::default()),
        "chern" => Command::Chern(Default::default()),
        "schrodinger-1d" => Command::Schrodinger1d(Default::default()),
        "schrodinger-3d" => Command::Schrodinger3d(Default::default()),
        other => return Err(invalid(format!("unknown command {other}"))),
    })
}

// ---------------------------------------------------------------- reports

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub name: String,
    pub pass: bool,
    #[serde(flatten)]
    pub fields: Map<String, Value>,
}

impl Row {
    fn new(name: impl Into<String>, pass: bool, fields: Value) -> Self {
        let fields = match fields {
            Value::Object(m) => m,
            other => Map::from_iter([("value".to_string(), other)]),
        };
        Row { name: name.into(), pass, fields }
    }

    fn failed(name: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Row::new(name, false, json!({ "error": err.to_string() }))
    }
}

#[derive(Clone)]
pub enum PlotData {
    Boundaries(Vec<(String, QuadrantBoundary)>),
    PhaseShifts(PhaseShiftTable),
}

#[derive(Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub tol: f64,
    pub pass: bool,
    pub rows: Vec<Row>,
    #[serde(skip)]
    pub plot: Option<PlotData>,
}

impl Report {
    fn new(command: &str, tol: f64, rows: Vec<Row>, plot: Option<PlotData>) -> Self {
        let pass = !rows.is_empty() && rows.iter().all(|r| r.pass);
        Report { command: command.to_string(), tol, pass, rows, plot }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut keys: Vec<String> = Vec::new();
        for r in &self.rows {
            for k in r.fields.keys() {
                if !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        let mut header = vec!["name".to_string(), "pass".to_string()];
        header.extend(keys.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for r in &self.rows {
            let mut rec = vec![r.name.clone(), r.pass.to_string()];
            for k in &keys {
                rec.push(match r.fields.get(k) {
                    None | Some(Value::Null) => String::new(),
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                });
            }
            w.write_record(&rec).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let status = if r.pass { "PASS" } else { "FAIL" };
            let err = r.fields.get("error").and_then(Value::as_str).map(|e| format!(" ({e})")).unwrap_or_default();
            s.push_str(&format!("{status} {} {}{err}\n", self.command, r.name));
        }
        let passed = self.rows.iter().filter(|r| r.pass).count();
        s.push_str(&format!("{}: {passed}/{} checks passed\n", self.command, self.rows.len()));
        s
    }
}

/// Sampled boundary phases (`arg det`, unwrapped, and the accumulated
/// winding in turns) or phase shifts per channel.
pub fn emit_plot_data(report: &Report, path: &Path) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let plot = report.plot.as_ref().ok_or_else(|| CliError::Io("report has no plot data".into()))?;
    let mut out = String::new();
    match plot {
        PlotData::Boundaries(list) => {
            if list.is_empty() {
                return Err(CliError::Io("report has no plot data".into()));
            }
            out.push_str("label,segment,edge,parameter,arg_det,turns\n");
            for (label, qb) in list {
                let samples = sample_closed_path(qb, 401).map_err(|e| CliError::Io(e.to_string()))?;
                let mut acc = 0.0;
                let mut prev: Option<f64> = None;
                for s in samples {
                    let arg = s.matrix.determinant().arg();
                    if let Some(p) = prev {
                        let mut d = arg - p;
                        d -= 2.0 * std::f64::consts::PI * (d / (2.0 * std::f64::consts::PI)).round();
                        acc -= d / (2.0 * std::f64::consts::PI);
                    }
                    prev = Some(arg);
                    out.push_str(&format!("{label},{},{},{},{arg},{acc}\n", s.segment, s.edge, s.param));
                }
            }
        }
        PlotData::PhaseShifts(t) => {
            if t.lambdas.is_empty() {
                return Err(CliError::Io("report has no plot data".into()));
            }
            out.push_str("lambda");
            for l in 0..t.deltas.len() {
                out.push_str(&format!(",delta_{l}"));
            }
            out.push('\n');
            for (i, lam) in t.lambdas.iter().enumerate() {
                out.push_str(&lam.to_string());
                for d in &t.deltas {
                    out.push_str(&format!(",{}", d[i]));
                }
                out.push('\n');
            }
        }
    }
    File::create(path).and_then(|mut f| f.write_all(out.as_bytes())).map_err(io)
}

// ---------------------------------------------------------------- commands

fn point_rows(a: &PointArgs, tol: f64) -> Result<(Vec<Row>, PlotData), CliError> {
    let kinds: Vec<PointModelKind> = match a.model.as_deref() {
        None | Some("all") => PointModelKind::ALL.to_vec(),
        Some(name) => vec![name.parse().map_err(|_| invalid(format!("unknown model {name}")))?],
    };
    let couplings = a.coupling.clone().unwrap_or_else(|| COUPLING_GRID.to_vec());
    if couplings.iter().any(|c| !c.is_finite()) {
        return Err(invalid("couplings must be finite"));
    }
    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for kind in kinds {
        for &c in &couplings {
            let model = PointModel { kind, coupling: c };
            let name = format!("{} alpha={c}", kind.name());
            match pm::levinson_verify(model, tol) {
                Ok(chk) => {
                    let expected = a.expect_total.unwrap_or(chk.bound_states as i64);
                    let pass = chk.pass && chk.winding.rounded() == expected;
                    rows.push(Row::new(
                        name.clone(),
                        pass,
                        json!({
                            "model": kind.name(),
                            "coupling": c,
                            "per_segment": chk.winding.per_segment,
                            "total": chk.winding.total,
                            "bound_states": chk.bound_states,
                            "expected_total": expected,
                            "residual": chk.residual,
                        }),
                    ));
                    plots.push((name, pm::gamma_boundary(model)));
                }
                Err(e) => rows.push(Row::failed(name, e)),
            }
        }
    }
    Ok((rows, PlotData::Boundaries(plots)))
}

fn parse_unitary(v: &[f64]) -> Result<M2, CliError> {
    if v.len() != 8 {
        return Err(invalid("unitary needs 8 numbers"));
    }
    let z = |i: usize| C64::new(v[2 * i], v[2 * i + 1]);
    Ok(M2::new(z(0), z(1), z(2), z(3)))
}

fn ab_row(name: &str, pair: &AdmissiblePair, alpha: f64, tol: f64, expect: Option<i64>) -> Row {
    match ab::levinson_verify(pair, alpha, tol) {
        Ok(r) => {
            let expected = expect.unwrap_or(r.expected_count as i64);
            let pass = r.pass && r.computed.rounded() == expected;
            let w = r.case.row.w;
            Row::new(
                name,
                pass,
                json!({
                    "alpha": alpha,
                    "table": r.case.row.table,
                    "condition": r.case.row.condition,
                    "symbolic_w": format!("({}, {}, {})", w[0], w[1], w[2]),
                    "expected_w": r.expected_w,
                    "per_segment": r.computed.per_segment,
                    "total": r.computed.total,
                    "bound_states": r.bound_states,
                    "expected_total": expected,
                    "max_segment_error": r.max_segment_error,
                }),
            )
        }
        Err(e) => Row::failed(name, e),
    }
}

fn verify_ab(a: &AbArgs, tol: f64) -> Result<(Vec<Row>, PlotData), CliError> {
    let alpha = a.alpha.unwrap_or(0.5);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let pairs: Vec<(String, AdmissiblePair)> = match (&a.pair, &a.unitary) {
        (Some(_), Some(_)) => return Err(invalid("give either pair or unitary")),
        (Some(name), None) => {
            let found = ab::representative_pairs().into_iter().find(|(n, _)| n == name);
            vec![found.ok_or_else(|| invalid(format!("unknown pair {name}")))?]
        }
        (None, Some(u)) => {
            let pair = AdmissiblePair::from_unitary(&parse_unitary(u)?).map_err(|e| invalid(e.to_string()))?;
            vec![("U".to_string(), pair)]
        }
        (None, None) => ab::representative_pairs(),
    };
    let rows = pairs.iter().map(|(n, p)| ab_row(n, p, alpha, tol, a.expect_total)).collect();
    let plots = pairs.iter().filter_map(|(n, p)| ab::gamma_boundary(p, alpha).ok().map(|qb| (n.clone(), qb))).collect();
    Ok((rows, PlotData::Boundaries(plots)))
}

fn ab_tables(a: &AbTablesArgs, tol: f64) -> Result<Vec<Row>, CliError> {
    let alphas = a.alphas.clone().unwrap_or_else(|| vec![0.3, 0.5, 0.7]);
    if alphas.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
        return Err(invalid("alphas must lie in (0, 1)"));
    }
    let mut witnessed: Vec<Option<Row>> = vec![None; TABLE_ROWS.len()];
    for &alpha in &alphas {
        for (name, pair) in ab::representative_pairs() {
            let Ok(case) = ab::classify_case(&pair, alpha) else { continue };
            let idx = TABLE_ROWS.iter().position(|r| *r == case.row).expect("row from the table");
            if witnessed[idx].as_ref().is_some_and(|r| r.pass) {
                continue;
            }
            let mut row = ab_row(&name, &pair, alpha, tol, None);
            row.fields.insert("witness".into(), Value::String(name));
            row.name = format!("table {} [{}]", case.row.table, case.row.condition);
            witnessed[idx] = Some(row);
        }
    }
    Ok(witnessed
        .into_iter()
        .zip(TABLE_ROWS.iter())
        .map(|(w, r)| w.unwrap_or_else(|| Row::failed(format!("table {} [{}]", r.table, r.condition), "no witness")))
        .collect())
}

fn phi_ab(a: &PhiAbArgs, tol: f64) -> Result<Vec<Row>, CliError> {
    let pairs = match (a.a, a.b) {
        (Some(x), Some(y)) => vec![(x, y)],
        (None, None) => vec![(2.0, 1.0), (1.0, 2.0), (1.0, 3.0)],
        _ => return Err(invalid("give both a and b")),
    };
    let expected = a.expected.unwrap_or(1.0);
    let quad = QuadratureSpec { tol: 1e-6, ..QuadratureSpec::default() };
    let mut rows = Vec::new();
    for (x, y) in pairs {
        let name = format!("phi a={x} b={y}");
        let lp = PhiABLoop::new(x, y).ok_or_else(|| invalid(format!("need a, b > 0, got ({x}, {y})")))?;
        let p = a.p.unwrap_or_else(|| lp.minimal_p());
        let vals: Result<Vec<f64>, _> = [p, p + 1, p + 2].iter().map(|&q| wind_regularized(&lp, q, &quad)).collect();
        match vals {
            Ok(v) => {
                let spread = (v[1] - v[0]).abs().max((v[2] - v[0]).abs());
                let pass = (v[0] - expected).abs() < tol && spread < tol;
                rows.push(Row::new(
                    name,
                    pass,
                    json!({ "a": x, "b": y, "p": p, "wind_p": v[0], "wind_p1": v[1], "wind_p2": v[2],
                            "expected": expected, "spread": spread }),
                ));
            }
            Err(e) => rows.push(Row::failed(name, e)),
        }
    }
    Ok(rows)
}

fn chern(a: &ChernArgs, tol: f64) -> Result<Vec<Row>, CliError> {
    let l1 = a.lambda1_arg.unwrap_or(-std::f64::consts::PI / 3.0);
    let l2 = a.lambda2_arg.unwrap_or(std::f64::consts::PI / 3.0);
    let x = SphereManifold::new(C64::from_polar(1.0, l1), C64::from_polar(1.0, l2)).map_err(|e| invalid(e.to_string()))?;
    let alpha = a.alpha.unwrap_or(0.5);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let orientation = match a.orientation.as_deref() {
        None | Some("phi-rho") => XOrientation::PhiRho,
        Some("rho-phi") => XOrientation::RhoPhi,
        Some(o) => return Err(invalid(format!("unknown orientation {o}"))),
    };
    let start = GridSpec3D::new(a.n_rho.unwrap_or(8), a.n_phi.unwrap_or(8), a.n_xi.unwrap_or(32));
    let levels = a.levels.unwrap_or(3);
    if levels < 2 {
        return Err(invalid("levels must be at least 2"));
    }
    let expected = a.expected.unwrap_or(1.0);
    let run = match convergence_ladder(&x, alpha, start, levels, a.ladder_tol.unwrap_or(tol), orientation) {
        Ok(r) => r,
        Err(crate::chern_pairing::ChernError::BadGrid) => return Err(invalid("grid sizes must be at least 4")),
        Err(e) => return Ok(vec![Row::failed("three_form", e)]),
    };
    let ladder: Vec<Value> = run
        .ladder
        .iter()
        .map(|s| json!({ "grid": [s.grid.n_rho, s.grid.n_phi, s.grid.n_xi], "value": s.value, "change": s.change }))
        .collect();
    let changes: Vec<f64> = run.ladder.iter().filter_map(|s| s.change).collect();
    let monotone = changes.windows(2).all(|w| w[1] < w[0]);
    Ok(vec![
        Row::new(
            "three_form",
            (run.value - expected).abs() < tol,
            json!({ "value": run.value, "expected": expected, "alpha": alpha,
                    "orientation": format!("{orientation:?}"), "ladder": ladder }),
        ),
        Row::new(
            "bundle_identity",
            (run.raw_rho_phi_xi - run.bundle_chern_rho_phi).abs() < tol,
            json!({ "three_form_rho_phi_xi": run.raw_rho_phi_xi, "bundle_chern_rho_phi": run.bundle_chern_rho_phi }),
        ),
        Row::new("ladder_monotone", monotone, json!({ "changes": changes })),
    ])
}

fn profile(name: Option<&str>, depth: Option<f64>, width: Option<f64>, strength: Option<f64>, csv: &Option<PathBuf>) -> Result<Profile, CliError> {
    Ok(match name {
        Some("zero") => Profile::Zero,
        Some("sech2") => Profile::Sech2 { strength: strength.unwrap_or(2.0) },
        Some("square_well") => Profile::SquareWell { depth: depth.unwrap_or(5.0), width: width.unwrap_or(2.0) },
        Some("gaussian") => Profile::Gaussian { depth: depth.unwrap_or(10.0), width: width.unwrap_or(1.0) },
        Some("tabulated") => {
            let p = csv.as_ref().ok_or_else(|| invalid("tabulated potential needs csv"))?;
            Profile::from_csv(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?
        }
        Some(other) => return Err(invalid(format!("unknown potential {other}"))),
        None => unreachable!("callers pick a default"),
    })
}

fn schrodinger_1d(a: &Schro1dArgs, tol: f64) -> Result<(Vec<Row>, PlotData), CliError> {
    let prof = profile(Some(a.potential.as_deref().unwrap_or("sech2")), a.depth, a.width, a.strength, &a.csv)?;
    let pot = match a.cutoff {
        Some(c) => Potential1D::with_cutoff(prof, c),
        None => Potential1D::new(prof),
    }
    .map_err(|e| invalid(e.to_string()))?;
    let mut rows = Vec::new();
    let ks: Vec<f64> = (0..=40).map(|j| 0.05 * (400f64).powf(j as f64 / 40.0)).collect();
    let mut defect: f64 = 0.0;
    let mut refl: f64 = 0.0;
    let mut err = None;
    for &k in &ks {
        match sc::channels_1d(&pot, k) {
            Ok(ch) => {
                defect = defect.max(crate::boundary::unitarity_defect(&sc::even_odd(&ch)));
                refl = refl.max(ch.r_left.norm()).max(ch.r_right.norm());
            }
            Err(e) => err = Some(e),
        }
    }
    match err {
        Some(e) => rows.push(Row::failed("unitarity", e)),
        None => rows.push(Row::new(
            "unitarity",
            defect < 1e-8,
            json!({ "k_range": [0.05, 20.0], "max_defect": defect, "max_reflection": refl }),
        )),
    }
    let mut plots = Vec::new();
    match sc::levinson_1d(&pot, tol) {
        Ok(r) => {
            let expected = a.expect_bound_states.unwrap_or(r.bound_states);
            rows.push(Row::new(
                "levinson",
                r.pass && r.bound_states == expected,
                json!({
                    "class": format!("{:?}", r.class),
                    "det_s0": [r.det_s0.re, r.det_s0.im],
                    "bound_states": r.bound_states,
                    "expected_bound_states": expected,
                    "per_segment": r.winding.per_segment,
                    "total": r.winding.total,
                    "wind_s": r.wind_s,
                    "expected_wind_s": r.expected_wind_s,
                    "threshold_contribution": r.threshold_contribution,
                    "residual": r.residual,
                }),
            ));
            if let Ok((qb, _)) = sc::gamma_boundary_1d(&pot) {
                plots.push(("gamma".to_string(), qb));
            }
        }
        Err(e) => rows.push(Row::failed("levinson", e)),
    }
    Ok((rows, PlotData::Boundaries(plots)))
}

fn schrodinger_3d(a: &Schro3dArgs, tol: f64) -> Result<(Vec<Row>, Option<PlotData>), CliError> {
    let name = a.potential.as_deref().unwrap_or("gaussian");
    if name == "sech2" {
        return Err(invalid("sech2 is a 1D potential"));
    }
    let prof = profile(Some(name), a.depth, a.width, None, &a.csv)?;
    let pot = match a.cutoff {
        Some(c) => RadialPotential::with_cutoff(prof, c),
        None => RadialPotential::new(prof),
    }
    .map_err(|e| invalid(e.to_string()))?;
    let ps = a.p.clone().unwrap_or_else(|| vec![2, 3]);
    if ps.is_empty() || ps.iter().any(|&p| p < 2) {
        return Err(invalid("p values must be at least 2"));
    }
    let opts = Levinson3DOptions { k_max: a.k_max.unwrap_or(20.0), l_max: a.l_max, ..Levinson3DOptions::default() };
    let rep = match sc::regularized_levinson_3d(&pot, &ps, &opts) {
        Ok(r) => r,
        Err(e) => return Ok((vec![Row::failed("levinson", e)], None)),
    };
    let expected = a.expect_bound_states.unwrap_or(rep.bound_states);
    let mut rows: Vec<Row> = ps
        .iter()
        .zip(&rep.lhs)
        .map(|(p, v)| {
            Row::new(
                format!("levinson p={p}"),
                (v - expected as f64).abs() < tol && rep.bound_states == expected,
                json!({ "p": p, "lhs": v, "bound_states": rep.bound_states, "expected_bound_states": expected,
                        "l_max": rep.l_max,
                        "per_channel": rep.channels.iter().map(|c| json!({"l": c.l, "bound_states": c.bound_states, "lhs": c.lhs})).collect::<Vec<_>>() }),
            )
        })
        .collect();
    let spread = rep.lhs.iter().map(|v| (v - rep.lhs[0]).abs()).fold(0.0, f64::max);
    rows.push(Row::new("p_independence", spread < 1e-2, json!({ "spread": spread })));
    let lambdas: Vec<f64> = (1..=200).map(|j| (j as f64 * 0.1).powi(2)).collect();
    let plot = sc::phase_shift_table(&pot, &lambdas, rep.l_max).ok().map(PlotData::PhaseShifts);
    Ok((rows, plot))
}

/// Runs a resolved configuration and returns the report.
pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    let c = &cfg.command;
    let tol = |d: f64| cfg.tol.unwrap_or(d);
    let report = match c {
        Command::VerifyPoint(a) => {
            let (rows, plot) = point_rows(a, tol(1e-3))?;
            Report::new(c.name(), tol(1e-3), rows, Some(plot))
        }
        Command::VerifyAb(a) => {
            let (rows, plot) = verify_ab(a, tol(1e-3))?;
            Report::new(c.name(), tol(1e-3), rows, Some(plot))
        }
        Command::AbTables(a) => Report::new(c.name(), tol(1e-3), ab_tables(a, tol(1e-3))?, None),
        Command::PhiAb(a) => Report::new(c.name(), tol(1e-3), phi_ab(a, tol(1e-3))?, None),
        Command::Chern(a) => Report::new(c.name(), tol(0.02), chern(a, tol(0.02))?, None),
        Command::Schrodinger1d(a) => {
            let (rows, plot) = schrodinger_1d(a, tol(1e-2))?;
            Report::new(c.name(), tol(1e-2), rows, Some(plot))
        }
        Command::Schrodinger3d(a) => {
            let (rows, plot) = schrodinger_3d(a, tol(5e-2))?;
            Report::new(c.name(), tol(5e-2), rows, plot)
        }
    };
    Ok(report)
}

/// Writes the report and plot file; returns the exit status.
pub fn run(cfg: &RunConfig) -> Result<i32, CliError> {
    let report = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(e.to_string()))?
            .install(|| execute(cfg))?,
        None => execute(cfg)?,
    };
    let body = match cfg.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv()?,
    };
    match &cfg.out {
        Some(p) => {
            std::fs::write(p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            print!("{}", report.summary());
        }
        None => {
            print!("{body}");
            eprint!("{}", report.summary());
        }
    }
    if let Some(p) = &cfg.plot {
        emit_plot_data(&report, p)?;
    }
    Ok(if report.pass { 0 } else { 1 })
}

/// Entry point for the binary: parses `args` and maps outcomes to exit codes
/// (0 pass, 1 failed check, 2 invalid input).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = RunConfig::resolve(cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Validation(_) => 2,
                CliError::Io(_) => 1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str]) -> RunConfig {
        let mut v = vec!["levlab"];
        v.extend_from_slice(args);
        RunConfig::resolve(Cli::try_parse_from(v).unwrap()).unwrap()
    }

    #[test]
    fn baby_report_matches_table() {
        let r = execute(&cfg(&["verify-point", "--model", "baby", "--coupling", "-1"])).unwrap();
        assert!(r.pass);
        let w = r.rows[0].fields["per_segment"].as_array().unwrap();
        let want = [0.0, 0.5, 0.5, 0.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a.as_f64().unwrap() - b).abs() < 1e-6);
        }
    }

    #[test]
    fn wrong_expectation_fails() {
        let r = execute(&cfg(&["verify-point", "--model", "baby", "--coupling", "-1", "--expect-total", "0"])).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn config_file_and_flag_override() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "command = \"verify-point\"\ntol = 0.5\n[params]\nmodel = \"delta1d\"\ncoupling = [1.0]\n")
            .unwrap();
        let c = cfg(&["--config", p.to_str().unwrap()]);
        let Command::VerifyPoint(a) = &c.command else { panic!() };
        assert_eq!(a.model.as_deref(), Some("delta1d"));
        assert_eq!(c.tol, Some(0.5));
        let c = cfg(&["--config", p.to_str().unwrap(), "--tol", "0.1", "verify-point", "--model", "baby"]);
        let Command::VerifyPoint(a) = &c.command else { panic!() };
        assert_eq!((a.model.as_deref(), a.coupling.as_deref()), (Some("baby"), Some(&[1.0][..])));
        assert_eq!(c.tol, Some(0.1));
        std::fs::write(&p, "command = \"verify-point\"\n[params]\nbogus = 1\n").unwrap();
        let cli = Cli::try_parse_from(["levlab", "--config", p.to_str().unwrap()]).unwrap();
        assert!(matches!(RunConfig::resolve(cli), Err(CliError::Validation(_))));
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let r = execute(&cfg(&["verify-point", "--model", "point3d"])).unwrap();
        let text = r.to_csv().unwrap();
        assert_eq!(text.lines().count(), 1 + COUPLING_GRID.len());
        assert!(text.starts_with("name,pass,"));
    }

    #[test]
    fn plot_of_empty_report_is_an_error() {
        let r = Report::new("x", 1.0, vec![], None);
        assert!(emit_plot_data(&r, Path::new("/nonexistent/never")).is_err());
        let r = Report::new("x", 1.0, vec![], Some(PlotData::Boundaries(vec![])));
        assert!(emit_plot_data(&r, Path::new("/nonexistent/never")).is_err());
    }
}
