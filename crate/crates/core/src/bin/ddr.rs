use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ddr::harness::{self, MeshSource, RunConfig};
use ddr::hodge::Bc;
use ddr::Result;

#[derive(Parser)]
#[command(name = "ddr", about = "Discrete de Rham complexes on polytopal meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BcArg {
    Natural,
    Essential,
}

#[derive(clap::Args)]
struct Common {
    /// Mesh file or generator `gen:<kind>:<n>`.
    #[arg(long)]
    mesh: String,
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    #[arg(long, value_enum, default_value_t = BcArg::Natural)]
    bc: BcArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Quadrature degree for smooth data (default 2r + 4).
    #[arg(long)]
    quad: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant suite.
    Check(Common),
    /// Validate a mesh and print its summary.
    CheckMesh {
        mesh: Option<String>,
        #[arg(long = "mesh")]
        mesh_flag: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence table of a manufactured solution.
    Convergence(Common),
    /// Betti numbers of the discrete complex.
    Cohomology(Common),
    /// Discrete Poincare constants along the refinement ladder.
    Poincare(Common),
}

fn config(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(c.mesh.parse::<MeshSource>()?, c.k, c.r);
    cfg.tau = c.tau;
    cfg.levels = c.levels;
    cfg.bc = match c.bc {
        BcArg::Natural => Bc::Natural,
        BcArg::Essential => Bc::Essential,
    };
    cfg.seed = c.seed;
    cfg.quad_order = c.quad;
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Check(c) => {
            let report = harness::cmd_check(&config(&c)?)?;
            emit(&c.out, &json(&report)?)?;
            for f in &report.failures {
                eprintln!("invariant failed: {f}");
            }
            Ok(report.passed())
        }
        Command::CheckMesh { mesh, mesh_flag, seed, out } => {
            let source = mesh.or(mesh_flag).ok_or_else(|| ddr::DdrError::Invalid("no mesh given".into()))?;
            let m = source.parse::<MeshSource>()?.mesh(0, seed)?;
            emit(&out, &json(&harness::cmd_check_mesh(&m)?)?)?;
            Ok(true)
        }
        Command::Convergence(c) => {
            let table = harness::cmd_convergence(&config(&c)?)?;
            emit(&c.out, &table.to_csv())?;
            let f = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
            eprintln!("least-squares rates: u {}, p {}", f(table.rate_u), f(table.rate_p));
            Ok(true)
        }
        Command::Cohomology(c) => {
            let report = harness::cmd_cohomology(&config(&c)?)?;
            emit(&c.out, &json(&report)?)?;
            Ok(true)
        }
        Command::Poincare(c) => {
            let report = harness::cmd_poincare(&config(&c)?)?;
            emit(&c.out, &json(&report)?)?;
            Ok(report.max_variation < 0.2)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
