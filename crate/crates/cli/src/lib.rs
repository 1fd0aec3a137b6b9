//! The `plmin` command line. Each subcommand composes library calls;
//! [`run`] returns the exit code and the text meant for standard output
//! and standard error, so that tests can drive it in-process.
//!
//! Exit codes: 0 success, 1 verification or convergence failure, 2 usage
//! error, 3 runtime error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use plmin::catalog::{self, Instance};
use plmin::energy::{minimality_residual_at, MinimalityReport, CLOSED_FORM_TOL, SOLVER_TOL};
use plmin::expr::{Env, Expr};
use plmin::io::{export_mesh, g17, import_obj, mesh_to_string, parse_domain_spec, MeshFormat};
use plmin::solver::{solve, Method};
use plmin::symmetry::{detect_periods, Aabb, Extension, DEFAULT_MAX_COPIES};
use plmin::verify::{printed_equation_residuals, self_intersection_check, IntersectionReport};
use plmin::{Error, SimplicialSurface, Vec3, VertexKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Largest accepted residual of a printed equation.
pub const PRINTED_TOL: f64 = 1e-8;

/// Iteration cap when an example has to be solved before use.
const SETTLE_ITERATIONS: usize = 100;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    /// The machine-readable report, when the command got that far.
    pub report: Option<Value>,
}

#[derive(Parser, Debug)]
#[command(name = "plmin", version, about = "Piecewise-linear triply-periodic minimal surfaces")]
struct Cli {
    /// Output on standard output
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Also write the JSON report to this file
    #[arg(long, value_name = "PATH", global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Newton,
    Descent,
}

#[derive(Args, Debug)]
struct Params {
    /// NAME=VALUE, repeatable; VALUE may be an expression such as sqrt(2)/2
    #[arg(long = "param", value_name = "NAME=VALUE", num_args = 1..)]
    param: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Catalog ids with triangle counts and parameter ranges
    List,
    /// Export the fundamental piece at a minimal configuration
    Generate {
        /// Catalog id or domain-spec file
        target: String,
        #[command(flatten)]
        params: Params,
        /// Mesh file; .obj, .ply or .off by extension. Without it the mesh goes to standard output
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Mesh format when the extension does not say: obj, ply or off
        #[arg(long)]
        mesh_format: Option<String>,
    },
    /// Solve for the free parameters
    Solve {
        /// Catalog id or domain-spec file
        target: String,
        #[command(flatten)]
        params: Params,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Newton)]
        method: MethodArg,
    },
    /// Extend the piece by its symmetries over a window
    Tile {
        /// Catalog id or domain-spec file
        target: String,
        #[command(flatten)]
        params: Params,
        /// lo:hi for a cube, or lo:hi,lo:hi,lo:hi per axis
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        /// Largest number of copies to place
        #[arg(long, default_value_t = DEFAULT_MAX_COPIES)]
        depth: usize,
        /// Gradient tolerance of the minimality report
        #[arg(long, default_value_t = SOLVER_TOL)]
        tol: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mesh_format: Option<String>,
    },
    /// Check minimality, embeddedness and printed equations
    #[command(group(ArgGroup::new("input").required(true).args(["target", "mesh"])))]
    Verify {
        /// Catalog id or domain-spec file
        target: Option<String>,
        /// An .obj mesh instead of an example
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[command(flatten)]
        params: Params,
        #[arg(long, default_value_t = SOLVER_TOL)]
        tol: f64,
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_COPIES)]
        depth: usize,
    },
}

#[derive(Debug)]
enum Fail {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Parse { .. } => Fail::Usage(e.to_string()),
            _ => Fail::Runtime(e.to_string()),
        }
    }
}

/// What a command produced: exit code, human text and JSON report.
struct Done {
    code: i32,
    text: String,
    json: Value,
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: text,
                    report: None,
                }
            } else {
                // --help and --version
                Outcome {
                    code: EXIT_OK,
                    stdout: text,
                    stderr: String::new(),
                    report: None,
                }
            };
        }
    };
    let result = match cli.cmd {
        Cmd::List => cmd_list(),
        Cmd::Generate {
            target,
            params,
            out,
            mesh_format,
        } => cmd_generate(&target, &params, out.as_deref(), mesh_format.as_deref()),
        Cmd::Solve {
            target,
            params,
            tol,
            max_iter,
            method,
        } => cmd_solve(&target, &params, tol, max_iter, method),
        Cmd::Tile {
            target,
            params,
            window,
            depth,
            tol,
            out,
            mesh_format,
        } => cmd_tile(
            &target,
            &params,
            window.as_deref(),
            depth,
            tol,
            out.as_deref(),
            mesh_format.as_deref(),
        ),
        Cmd::Verify {
            target,
            mesh,
            params,
            tol,
            window,
            depth,
        } => match (target, mesh) {
            (_, Some(m)) => cmd_verify_mesh(&m, tol),
            (Some(t), None) => cmd_verify(&t, &params, tol, window.as_deref(), depth),
            (None, None) => Err(Fail::Usage("nothing to verify".into())),
        },
    };
    let done = match result {
        Ok(d) => d,
        Err(Fail::Usage(m)) => {
            return Outcome {
                code: EXIT_USAGE,
                stdout: String::new(),
                stderr: format!("error: {m}\n"),
                report: None,
            }
        }
        Err(Fail::Runtime(m)) => {
            return Outcome {
                code: EXIT_RUNTIME,
                stdout: String::new(),
                stderr: format!("error: {m}\n"),
                report: None,
            }
        }
    };
    let pretty = serde_json::to_string_pretty(&done.json).expect("json") + "\n";
    if let Some(path) = &cli.report {
        if let Err(e) = std::fs::write(path, &pretty) {
            return Outcome {
                code: EXIT_RUNTIME,
                stdout: String::new(),
                stderr: format!("error: cannot write {}: {e}\n", path.display()),
                report: Some(done.json),
            };
        }
    }
    Outcome {
        code: done.code,
        stdout: if cli.format == Format::Json { pretty } else { done.text },
        stderr: String::new(),
        report: Some(done.json),
    }
}

// ---------------------------------------------------------------------------
// argument parsing

fn parse_params(p: &Params) -> Result<BTreeMap<String, f64>, Fail> {
    let mut m = BTreeMap::new();
    for s in &p.param {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Fail::Usage(format!("--param `{s}`: expected NAME=VALUE")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Fail::Usage(format!("--param `{s}`: empty name")));
        }
        let x = Expr::parse(v)
            .and_then(|e| e.eval(&Env::new()))
            .map_err(|e| Fail::Usage(format!("--param `{s}`: {e}")))?;
        if !x.is_finite() {
            return Err(Fail::Usage(format!("--param `{s}`: not finite")));
        }
        m.insert(k.to_string(), x);
    }
    Ok(m)
}

fn parse_window(s: &str) -> Result<Aabb, Fail> {
    let bad = || Fail::Usage(format!("--window `{s}`: expected lo:hi or lo:hi,lo:hi,lo:hi"));
    let axes: Vec<(f64, f64)> = s
        .split(',')
        .map(|a| {
            let (lo, hi) = a.split_once(':').ok_or_else(bad)?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            Ok((lo, hi))
        })
        .collect::<Result<_, Fail>>()?;
    let axes = match axes.len() {
        1 => vec![axes[0]; 3],
        3 => axes,
        _ => return Err(bad()),
    };
    if axes
        .iter()
        .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
    {
        return Err(bad());
    }
    Ok(Aabb::new(
        [axes[0].0, axes[1].0, axes[2].0],
        [axes[0].1, axes[1].1, axes[2].1],
    )?)
}

fn mesh_format(out: &Path, name: Option<&str>) -> Result<MeshFormat, Fail> {
    match name {
        Some(n) => MeshFormat::from_name(n).ok_or_else(|| Fail::Usage(format!("unknown mesh format `{n}`"))),
        None => Ok(MeshFormat::from_path(out).unwrap_or(MeshFormat::Obj)),
    }
}

// ---------------------------------------------------------------------------
// shared steps

struct Loaded {
    id: String,
    /// Built-in example, as opposed to a spec file.
    builtin: bool,
    inst: Instance,
}

fn load(target: &str, fixed: &BTreeMap<String, f64>) -> Result<Loaded, Fail> {
    if catalog::ids().contains(&target) {
        return Ok(Loaded {
            id: target.to_string(),
            builtin: true,
            inst: catalog::instantiate(target, fixed)?,
        });
    }
    let path = Path::new(target);
    if !path.is_file() {
        return Err(Fail::Usage(format!(
            "`{target}` is neither a catalog id (see `plmin list`) nor a spec file"
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Fail::Runtime(format!("{}: {e}", path.display())))?;
    let spec = parse_domain_spec(&text)?;
    Ok(Loaded {
        id: spec.name.clone(),
        builtin: false,
        inst: catalog::instantiate_spec(spec, fixed)?,
    })
}

/// Declared parameters of an instance with their values.
fn parameters(inst: &Instance) -> BTreeMap<String, f64> {
    inst.spec
        .parameters
        .iter()
        .map(|p| (p.name.clone(), inst.env[&p.name]))
        .collect()
}

/// Loads and settles an example; `Err(done)` carries the failure report
/// when no minimal configuration was found.
fn load_minimal(command: &str, target: &str, params: &Params) -> Result<Result<(Loaded, bool), Done>, Fail> {
    let fixed = parse_params(params)?;
    let l = load(target, &fixed)?;
    let (inst, rep) = catalog::settle(l.inst, &fixed, CLOSED_FORM_TOL, SETTLE_ITERATIONS)?;
    let solved = rep.is_some();
    if let Some(rep) = rep.filter(|r| !r.converged) {
        return Ok(Err(Done {
            code: EXIT_FAILED,
            text: format!("{}: no minimal configuration found: {}\n", l.id, rep.message),
            json: json!({ "command": command, "id": l.id, "solve": rep }),
        }));
    }
    Ok(Ok((Loaded { inst, ..l }, solved)))
}

/// One indented line listing parameter values, or nothing.
fn params_line(p: &BTreeMap<String, f64>) -> String {
    if p.is_empty() {
        return String::new();
    }
    format!("  {}\n", fmt_params(p))
}

fn fmt_params(p: &BTreeMap<String, f64>) -> String {
    p.iter()
        .map(|(k, v)| format!("{k} = {}", g17(*v)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_vec(v: &Vec3) -> String {
    format!("({}, {}, {})", g17(v.x), g17(v.y), g17(v.z))
}

fn minimality_json(m: &MinimalityReport, surface: &SimplicialSurface) -> Value {
    json!({
        "vertices": m.norms.len(),
        "worst": m.worst,
        "worst_vertex": m.worst_vertex.map(|v| { let p = surface.position(v); [p.x, p.y, p.z] }),
        "tol": m.tol,
        "pass": m.pass,
        "norms": m.norms,
    })
}

fn minimality_line(m: &MinimalityReport) -> String {
    format!(
        "minimality: {} ({} vertices, worst gradient {:.3e}, tol {:.1e})\n",
        if m.pass { "pass" } else { "FAIL" },
        m.norms.len(),
        m.worst,
        m.tol
    )
}

fn intersection_line(r: &IntersectionReport) -> String {
    format!(
        "embeddedness: {} ({} triangles, {} candidate pairs, {} intersecting)\n",
        if r.clean { "pass" } else { "FAIL" },
        r.triangles_tested,
        r.pairs_tested,
        r.intersecting_pairs.len()
    )
}

fn write_mesh(surface: &SimplicialSurface, out: &Path, name: Option<&str>) -> Result<(), Fail> {
    let f = mesh_format(out, name)?;
    Ok(export_mesh(surface, f, out)?)
}

// ---------------------------------------------------------------------------
// commands

fn cmd_list() -> Result<Done, Fail> {
    let mut text = String::new();
    let mut rows = vec![];
    for d in catalog::catalog_list() {
        let spec = catalog::spec(&d.id)?;
        let ranges: Vec<String> = spec
            .parameters
            .iter()
            .map(|p| {
                format!(
                    "{} in {}{}, {}{} {}",
                    p.name,
                    if p.lo_open { "(" } else { "[" },
                    p.lo,
                    p.hi,
                    if p.hi_open { ")" } else { "]" },
                    if p.free { "free" } else { "fixed" }
                )
            })
            .collect();
        writeln!(
            text,
            "{:<20} {:>2} triangles  {}",
            d.id,
            d.fundamental_triangles,
            ranges.join("; ")
        )
        .unwrap();
        let params: Vec<Value> = spec
            .parameters
            .iter()
            .map(|p| {
                json!({
                    "name": p.name, "default": p.default.to_string(),
                    "lo": p.lo.to_string(), "hi": p.hi.to_string(),
                    "lo_open": p.lo_open, "hi_open": p.hi_open, "free": p.free,
                })
            })
            .collect();
        rows.push(json!({
            "id": d.id, "title": d.title, "family": d.family,
            "fundamental_triangles": d.fundamental_triangles,
            "parameters": params, "closed_form": d.closed_form,
        }));
    }
    Ok(Done {
        code: EXIT_OK,
        text,
        json: Value::Array(rows),
    })
}

fn cmd_generate(target: &str, params: &Params, out: Option<&Path>, fmt: Option<&str>) -> Result<Done, Fail> {
    let (l, solved) = match load_minimal("generate", target, params)? {
        Ok(x) => x,
        Err(done) => return Ok(done),
    };
    let seed = &l.inst.seed;
    let p = parameters(&l.inst);
    let text = match out {
        Some(path) => {
            write_mesh(seed, path, fmt)?;
            format!(
                "{}: {} vertices, {} triangles{}\n{}wrote {}\n",
                l.id,
                seed.num_vertices(),
                seed.num_triangles(),
                if solved { " (solved)" } else { "" },
                params_line(&p),
                path.display()
            )
        }
        None => mesh_to_string(
            seed,
            fmt.map(|n| mesh_format(Path::new(""), Some(n)))
                .transpose()?
                .unwrap_or(MeshFormat::Obj),
        ),
    };
    let json = json!({
        "command": "generate",
        "id": l.id,
        "parameters": p,
        "solved": solved,
        "vertices": seed.positions().iter().map(|q| [q.x, q.y, q.z]).collect::<Vec<_>>(),
        "triangles": seed.triangles(),
        "out": out.map(|p| p.display().to_string()),
    });
    Ok(Done {
        code: EXIT_OK,
        text,
        json,
    })
}

fn cmd_solve(target: &str, params: &Params, tol: f64, max_iter: usize, method: MethodArg) -> Result<Done, Fail> {
    let fixed = parse_params(params)?;
    let l = load(target, &fixed)?;
    let problem = l.inst.problem()?;
    let method = match method {
        MethodArg::Newton => Method::NewtonFdJacobian,
        MethodArg::Descent => Method::DampedGradientDescent,
    };
    let rep = solve(&problem, method, tol, max_iter)?;
    let held: BTreeMap<String, f64> = parameters(&l.inst)
        .into_iter()
        .filter(|(k, _)| !rep.final_parameters.contains_key(k))
        .collect();
    let mut text = format!(
        "{}: {} after {} iterations, residual {:.3e}\n",
        l.id,
        if rep.converged { "converged" } else { "NOT converged" },
        rep.iterations,
        rep.residual_norm
    );
    if !held.is_empty() {
        writeln!(text, "  held: {}", fmt_params(&held)).unwrap();
    }
    for (k, v) in &rep.final_parameters {
        writeln!(text, "  {k} = {}", g17(*v)).unwrap();
    }
    if let Some(c) = rep.jacobian_condition {
        writeln!(text, "  jacobian condition {c:.3e}").unwrap();
    }
    if !rep.converged {
        writeln!(text, "  {}", rep.message).unwrap();
        if let Some((v, n)) = rep.per_vertex_gradient_norms.iter().max_by(|a, b| a.1.total_cmp(b.1)) {
            writeln!(text, "  largest vertex gradient {n:.3e} at patch vertex {v}").unwrap();
        }
    }
    let code = if rep.converged { EXIT_OK } else { EXIT_FAILED };
    let json = json!({ "command": "solve", "id": l.id, "held": held, "report": rep });
    Ok(Done { code, text, json })
}

/// Periods of the instance, and the extension's own, that the extension
/// is confirmed to be invariant under.
fn confirmed_periods(inst: &Instance, ext: &Extension) -> Vec<Vec3> {
    let mut cands = inst.periods.clone();
    for t in ext.translation_periods() {
        if cands.iter().all(|c| (c - t).norm() > 1e-9 && (c + t).norm() > 1e-9) {
            cands.push(t);
        }
    }
    detect_periods(&ext.surface, &cands)
}

fn cmd_tile(
    target: &str,
    params: &Params,
    window: Option<&str>,
    depth: usize,
    tol: f64,
    out: Option<&Path>,
    fmt: Option<&str>,
) -> Result<Done, Fail> {
    let window = window.map(parse_window).transpose()?;
    let (mut l, _) = match load_minimal("tile", target, params)? {
        Ok(x) => x,
        Err(done) => return Ok(done),
    };
    if let Some(w) = window {
        l.inst.window = w;
    }
    let ext = l.inst.extend(depth)?;
    let periods = confirmed_periods(&l.inst, &ext);
    let vs = l.inst.window_vertices(&ext);
    let m = minimality_residual_at(&ext.surface, &vs, tol)?;
    if let Some(path) = out {
        write_mesh(&ext.surface, path, fmt)?;
    }
    let s = &ext.surface;
    let mut text = format!(
        "{}: {} copies, {} vertices, {} triangles\n{}",
        l.id,
        ext.copies.len(),
        s.num_vertices(),
        s.num_triangles(),
        params_line(&parameters(&l.inst))
    );
    for p in &periods {
        writeln!(text, "period {}", fmt_vec(p)).unwrap();
    }
    if let Some(path) = out {
        writeln!(text, "wrote {}", path.display()).unwrap();
    }
    text += &minimality_line(&m);
    let json = json!({
        "command": "tile",
        "id": l.id,
        "parameters": parameters(&l.inst),
        "window": l.inst.window,
        "copies": ext.copies.len(),
        "vertices": s.num_vertices(),
        "triangles": s.num_triangles(),
        "periods": periods.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>(),
        "minimality": minimality_json(&m, s),
        "out": out.map(|p| p.display().to_string()),
    });
    Ok(Done {
        code: if m.pass { EXIT_OK } else { EXIT_FAILED },
        text,
        json,
    })
}

fn cmd_verify(target: &str, params: &Params, tol: f64, window: Option<&str>, depth: usize) -> Result<Done, Fail> {
    let window = window.map(parse_window).transpose()?;
    let (mut l, solved) = match load_minimal("verify", target, params)? {
        Ok(x) => x,
        Err(done) => return Ok(done),
    };
    if let Some(w) = window {
        l.inst.window = w;
    }
    let p = parameters(&l.inst);
    let ext = l.inst.extend(depth)?;
    let vs = l.inst.window_vertices(&ext);
    let m = minimality_residual_at(&ext.surface, &vs, tol)?;
    let x = self_intersection_check(&ext.surface);
    let printed = if l.builtin {
        printed_equation_residuals(&l.id, &p)?
    } else {
        None
    };
    let printed_pass = printed
        .as_ref()
        .map_or(true, |r| r.iter().all(|(_, v)| v.abs() <= PRINTED_TOL));
    let pass = m.pass && x.clean && printed_pass && !vs.is_empty();

    let mut text = format!("{}{}\n{}", l.id, if solved { " (solved)" } else { "" }, params_line(&p));
    text += &minimality_line(&m);
    text += &intersection_line(&x);
    if let Some(r) = &printed {
        let worst = r.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
        writeln!(
            text,
            "printed equations: {} (worst {worst:.3e}, tol {PRINTED_TOL:.0e})",
            if printed_pass { "pass" } else { "FAIL" }
        )
        .unwrap();
    }
    if vs.is_empty() {
        text += "no interior vertex inside the window\n";
    }
    writeln!(text, "{}", if pass { "PASS" } else { "FAIL" }).unwrap();
    let json = json!({
        "command": "verify",
        "id": l.id,
        "parameters": p,
        "solved": solved,
        "minimality": minimality_json(&m, &ext.surface),
        "intersections": x,
        "printed_equations": printed.map(|r| r.into_iter().collect::<BTreeMap<_, _>>()),
        "pass": pass,
    });
    Ok(Done {
        code: if pass { EXIT_OK } else { EXIT_FAILED },
        text,
        json,
    })
}

fn cmd_verify_mesh(path: &Path, tol: f64) -> Result<Done, Fail> {
    if MeshFormat::from_path(path) != Some(MeshFormat::Obj) {
        return Err(Fail::Usage(format!("{}: only .obj meshes can be read", path.display())));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Fail::Runtime(format!("{}: {e}", path.display())))?;
    let s = import_obj(&text)?;
    let kinds = s.classify_vertices();
    let vs: Vec<usize> = (0..s.num_vertices())
        .filter(|&v| kinds[v] == VertexKind::Interior)
        .collect();
    let m = minimality_residual_at(&s, &vs, tol)?;
    let x = self_intersection_check(&s);
    let pass = m.pass && x.clean && !vs.is_empty();
    let mut text = format!(
        "{}: {} vertices, {} triangles\n",
        path.display(),
        s.num_vertices(),
        s.num_triangles()
    );
    text += &minimality_line(&m);
    text += &intersection_line(&x);
    writeln!(text, "{}", if pass { "PASS" } else { "FAIL" }).unwrap();
    let json = json!({
        "command": "verify",
        "mesh": path.display().to_string(),
        "minimality": minimality_json(&m, &s),
        "intersections": x,
        "pass": pass,
    });
    Ok(Done {
        code: if pass { EXIT_OK } else { EXIT_FAILED },
        text,
        json,
    })
}
