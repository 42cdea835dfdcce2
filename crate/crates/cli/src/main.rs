use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use conecontrol::hjb::{self, DirichletMode, Method, SchemeParams, ValueField};
use conecontrol::simulator::{self, Policy, SystemConfig};
use conecontrol::workload::{self, BcpSpec};
use conecontrol::{Error, ProblemSpec};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "conecontrol", version, about = "Singular stochastic control on polyhedral cones")]
struct Cli {
    /// Directory for artifacts.
    #[arg(long, global = true, env = "CONECONTROL_OUT_DIR", default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
enum Command {
    /// Check the geometric and growth assumptions of a problem.
    Validate { spec: PathBuf },
    /// Solve the HJB variational inequality on the truncated cone.
    Solve {
        spec: PathBuf,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.01)]
        mesh: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Howard)]
        method: MethodArg,
        /// Stem of the field CSV and its JSON sidecar.
        #[arg(long, default_value = "value")]
        name: String,
    },
    /// Solve on a nested sequence of truncations.
    SolveNested {
        spec: PathBuf,
        #[arg(long = "r-list", value_delimiter = ',', required = true)]
        r_list: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        mesh: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = DirichletArg::GrowthMatched)]
        dirichlet: DirichletArg,
    },
    /// Discrete viscosity residual of a stored field.
    Residual {
        spec: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Monte Carlo value estimate of a policy.
    Simulate {
        spec: PathBuf,
        /// Starting point, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        x: Vec<f64>,
        #[arg(long, value_enum, default_value_t = PolicyArg::Reflect)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 12.0)]
        horizon: f64,
        /// Solved field whose push region drives the value policy.
        #[arg(long)]
        field: Option<PathBuf>,
        /// Also write the first path as CSV.
        #[arg(long)]
        path_csv: bool,
    },
    /// Dynamic-programming consistency check of a field along a policy.
    DppCheck {
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        x: Vec<f64>,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        field: PathBuf,
        #[arg(long, value_enum, default_value_t = PolicyArg::Reflect)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Reduce a Brownian control problem to its workload problem.
    Reduce {
        #[arg(long)]
        bcp: PathBuf,
        #[arg(long)]
        prefer_nonneg: bool,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MethodArg {
    Howard,
    Jacobi,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum DirichletArg {
    GrowthMatched,
    ExtendPrevious,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum PolicyArg {
    Null,
    Reflect,
    Value,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::AssumptionViolated { .. } => 3,
        Error::NoConvergence { .. } => 4,
        Error::DimensionMismatch { .. }
        | Error::DegenerateCone(_)
        | Error::NotPsd(_)
        | Error::InvalidSpec(_)
        | Error::RankDeficient(_)
        | Error::NotInCone(_)
        | Error::Infeasible(_)
        | Error::Json(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print_json(&out);
            ExitCode::SUCCESS
        }
        Err(e) => {
            print_json(&json!({"error": {"kind": e.kind(), "message": e.to_string()}}));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn print_json(v: &Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(v).expect("json"));
}

fn provenance(cli: &Cli, spec_hash: &str, seed: Option<u64>) -> Value {
    json!({
        "tool": "conecontrol",
        "version": VERSION,
        "spec_hash": spec_hash,
        "seed": seed,
        "config": &cli.command,
    })
}

fn write_json(dir: &Path, name: &str, v: &Value) -> conecontrol::Result<()> {
    std::fs::write(dir.join(name), serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn load_spec(path: &Path) -> conecontrol::Result<ProblemSpec> {
    ProblemSpec::from_path(path)
}

fn params(mesh: f64, tol: f64) -> SchemeParams {
    SchemeParams {
        tol,
        ..SchemeParams::with_mesh(mesh)
    }
}

fn policy_for(spec: &ProblemSpec, policy: PolicyArg, field: Option<&Path>) -> conecontrol::Result<Policy> {
    Ok(match policy {
        PolicyArg::Null => Policy::Null,
        PolicyArg::Reflect => Policy::Reflect,
        PolicyArg::Value => {
            let path = field.ok_or_else(|| Error::InvalidSpec("the value policy needs --field".into()))?;
            let field = ValueField::read(path, spec)?;
            Policy::ValueDriven(Box::new(hjb::extract_policy(spec, &field)?))
        }
    })
}

fn run(cli: &Cli) -> conecontrol::Result<Value> {
    let dir = &cli.out;
    std::fs::create_dir_all(dir)?;
    match &cli.command {
        Command::Validate { spec } => {
            let spec = load_spec(spec)?;
            let report = spec.validate()?;
            let out = json!({"provenance": provenance(cli, &spec.hash(), None), "report": report});
            write_json(dir, "validation.json", &out)?;
            Ok(out)
        }
        Command::Solve {
            spec,
            r,
            mesh,
            tol,
            method,
            name,
        } => {
            let spec = load_spec(spec)?;
            let mut p = params(*mesh, *tol);
            p.method = match method {
                MethodArg::Howard => Method::Howard,
                MethodArg::Jacobi => Method::Jacobi,
            };
            let field = hjb::Solver::new(&spec, p)?.solve(*r)?;
            let csv = format!("{name}.csv");
            field.write(&dir.join(&csv))?;
            let table = hjb::extract_policy(&spec, &field)?;
            let policy_csv = format!("{name}_policy.csv");
            write_policy(&dir.join(&policy_csv), &table)?;
            let out = json!({
                "provenance": provenance(cli, &spec.hash(), None),
                "field": csv,
                "policy": policy_csv,
                "nodes": field.grid().len(),
                "push_nodes": table.active_count(),
                "meta": field.meta,
            });
            write_json(dir, &format!("{name}_summary.json"), &out)?;
            Ok(out)
        }
        Command::SolveNested {
            spec,
            r_list,
            mesh,
            tol,
            dirichlet,
        } => {
            let spec = load_spec(spec)?;
            let mut p = params(*mesh, *tol);
            p.dirichlet_mode = match dirichlet {
                DirichletArg::GrowthMatched => DirichletMode::GrowthMatched,
                DirichletArg::ExtendPrevious => DirichletMode::ExtendPrevious,
            };
            let report = hjb::solve_nested(&spec, r_list, &p)?;
            let mut files = Vec::new();
            for (field, r) in report.fields.iter().zip(r_list) {
                let csv = format!("value_r{r}.csv");
                field.write(&dir.join(&csv))?;
                files.push(csv);
            }
            let out = json!({
                "provenance": provenance(cli, &spec.hash(), None),
                "fields": files,
                "report": report,
            });
            write_json(dir, "nested.json", &out)?;
            Ok(out)
        }
        Command::Residual { spec, field, tol } => {
            let spec = load_spec(spec)?;
            let field = ValueField::read(field, &spec)?;
            if field.meta.spec_hash != spec.hash() {
                return Err(Error::Inconsistent("field was solved for a different spec".into()));
            }
            let report = hjb::viscosity_residual(&spec, &field, *tol)?;
            let monotonicity = hjb::gradient_monotonicity(&spec, &field)?;
            let out = json!({
                "provenance": provenance(cli, &spec.hash(), None),
                "report": report,
                "gradient_monotonicity_slack": monotonicity,
            });
            write_json(dir, "residual.json", &out)?;
            Ok(out)
        }
        Command::Simulate {
            spec,
            x,
            policy,
            paths,
            seed,
            dt,
            horizon,
            field,
            path_csv,
        } => {
            let spec = load_spec(spec)?;
            let vecs = spec.validate()?.vectors;
            let cfg = SystemConfig::from_spec(&spec, *dt, *horizon, *seed, *paths);
            let pol = policy_for(&spec, *policy, field.as_deref())?;
            let x0 = DVector::from_column_slice(x);
            let est = simulator::estimate_value(&spec, &vecs, &cfg, &x0, &pol)?;
            if *path_csv {
                let sim = simulator::simulate(&spec, &vecs, &cfg, &x0, &pol, 0)?;
                write_path(&dir.join("path_0.csv"), &sim)?;
            }
            let out = json!({
                "provenance": provenance(cli, &spec.hash(), Some(*seed)),
                "policy": pol.name(),
                "x": x,
                "estimate": est,
            });
            write_json(dir, "simulate.json", &out)?;
            Ok(out)
        }
        Command::DppCheck {
            spec,
            x,
            eps,
            t,
            field,
            policy,
            paths,
            seed,
            dt,
        } => {
            let spec = load_spec(spec)?;
            let vecs = spec.validate()?.vectors;
            let value = ValueField::read(field, &spec)?;
            let cfg = SystemConfig::from_spec(&spec, *dt, *t, *seed, *paths);
            let pol = policy_for(&spec, *policy, Some(field))?;
            let x0 = DVector::from_column_slice(x);
            let est = simulator::dpp_check(&spec, &vecs, &cfg, &x0, &pol, &value, *eps, *t)?;
            let out = json!({
                "provenance": provenance(cli, &spec.hash(), Some(*seed)),
                "policy": pol.name(),
                "x": x,
                "dpp": est,
            });
            write_json(dir, "dpp.json", &out)?;
            Ok(out)
        }
        Command::Reduce { bcp, prefer_nonneg } => {
            let text = std::fs::read_to_string(bcp)?;
            let bcp = BcpSpec::from_json(&text)?;
            let wp = workload::reduce(&bcp, *prefer_nonneg)?;
            let lifted = workload::lift_problem(&wp, &bcp)?;
            let bcp_hash = conecontrol::problem::hex_digest(text.as_bytes());
            let out = json!({
                "provenance": provenance(cli, &bcp_hash, None),
                "workload": wp.to_json(),
                "lifted_spec": "lifted_spec.json",
                "lifted_spec_hash": lifted.hash(),
            });
            write_json(dir, "workload.json", &out)?;
            let lifted_json: Value = serde_json::from_str(&lifted.canonical_json())?;
            write_json(dir, "lifted_spec.json", &lifted_json)?;
            Ok(out)
        }
    }
}

fn write_policy(path: &Path, table: &hjb::PushTable) -> conecontrol::Result<()> {
    let grid = table.grid();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for c in 0..grid.dim() {
        write!(f, "x{},", c + 1)?;
    }
    writeln!(f, "push,direction")?;
    for i in 0..grid.len() {
        for v in grid.coords(i).iter() {
            write!(f, "{v:?},")?;
        }
        match table.direction_index(i) {
            Some(d) => writeln!(f, "1,{d}")?,
            None => writeln!(f, "0,")?,
        }
    }
    f.flush()?;
    Ok(())
}

fn write_path(path: &Path, sim: &simulator::SimulatedPath) -> conecontrol::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let (x, y) = (&sim.x, sim.y.path());
    write!(f, "t")?;
    for c in 0..x.dim() {
        write!(f, ",x{}", c + 1)?;
    }
    for c in 0..y.dim() {
        write!(f, ",y{}", c + 1)?;
    }
    writeln!(f)?;
    for i in 0..x.len() {
        write!(f, "{:?}", x.times()[i])?;
        for v in x.value(i).iter().chain(y.value(i).iter()) {
            write!(f, ",{v:?}")?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}
