use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nlfem::assembly::{AssemblyConfig, Kernel};
use nlfem::ball_approx::Strategy;
use nlfem::harness::mesh::{generate_mesh, Mesh};
use nlfem::harness::problem::{ManufacturedProblem, Polynomial};
use nlfem::harness::study::{
    convergence_study, geoerr_study, solve_problem, write_geoerr, write_records, DeltaPolicy, GeoErrConfig,
    StudyConfig, StudyRecord,
};
use nlfem::quadrature::McConfig;

type Error = Box<dyn std::error::Error>;

#[derive(Parser)]
#[command(name = "nlfem", about = "Nonlocal Poisson finite elements with approximate interaction balls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a structured mesh of the unit square or cube with its interaction layer.
    Mesh {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        res: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble and solve a manufactured problem on a mesh file.
    Solve(SolveArgs),
    /// Run a convergence study on structured meshes.
    Convergence {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        strategy: Strategy,
        /// Comma-separated mesh sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<f64>,
        #[arg(long, default_value = "fixed:0.1")]
        delta_policy: DeltaPolicy,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure the ball approximation error against the mesh size.
    Geoerr {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        strategy: Strategy,
        #[arg(long)]
        delta: f64,
        /// Comma-separated mesh sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        h_seq: Vec<f64>,
        #[arg(long, default_value_t = 200_000)]
        mc: usize,
        #[arg(long, default_value_t = 4)]
        centers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 200)]
    mc_samples: usize,
    #[arg(long, env = "NLFEM_THREADS", default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ProblemKind {
    Poly2d,
    Poly3d,
    File,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    strategy: Strategy,
    #[arg(long)]
    delta: f64,
    #[arg(long, value_enum)]
    problem: ProblemKind,
    /// Exact solution for `--problem file`: one `coefficient e1 e2 [e3]` term per line.
    #[arg(long)]
    problem_file: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    out_solution: Option<PathBuf>,
    #[arg(long)]
    out_stats: Option<PathBuf>,
}

fn resolution(h: f64) -> Result<usize, Error> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(format!("mesh size {h} is not in (0, 1]").into());
    }
    Ok((1.0 / h).round() as usize)
}

fn solve(args: SolveArgs) -> Result<(), Error> {
    let mesh = Mesh::read(File::open(&args.mesh)?)?;
    let kernel = Kernel::new(mesh.dim, args.delta)?;
    let problem = match args.problem {
        ProblemKind::Poly2d if mesh.dim == 2 => ManufacturedProblem::poly2d(kernel),
        ProblemKind::Poly3d if mesh.dim == 3 => ManufacturedProblem::poly3d(kernel),
        ProblemKind::File => {
            let path = args.problem_file.as_ref().ok_or("--problem file needs --problem-file")?;
            let exact: Polynomial = std::fs::read_to_string(path)?.parse()?;
            ManufacturedProblem::new(exact, kernel)
        }
        _ => return Err(format!("problem does not match the {}D mesh", mesh.dim).into()),
    };
    let map = mesh.to_cmap()?;
    let cfg = AssemblyConfig {
        threads: args.run.threads,
        mc: McConfig { samples: args.run.mc_samples, seed: args.run.seed },
        ..AssemblyConfig::new(args.strategy)
    };
    let out = solve_problem(&map, &problem, &cfg)?;
    let (h_avg, h_min) = mesh.edge_stats();
    let record = StudyRecord {
        h_avg,
        h_min,
        dof: out.dof,
        k_omega: mesh.interior_count(),
        strategy: args.strategy,
        l2_error: out.l2_error,
        assembly_s: out.assembly_s,
        solve_s: out.solve_s,
        lambda: None,
    };
    if let Some(path) = &args.out_solution {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "vertex,x,y,z,u_h,u")?;
        for (v, p) in map.coords().iter().enumerate() {
            writeln!(w, "{v},{:?},{:?},{:?},{:?},{:?}", p.x, p.y, p.z, out.values[v], problem.u(p))?;
        }
        w.flush()?;
    }
    match &args.out_stats {
        Some(path) => write_records(File::create(path)?, &[record])?,
        None => write_records(std::io::stdout(), &[record])?,
    }
    eprintln!("cg: {} iterations, relative residual {:.3e}", out.report.iterations, out.report.relative_residual);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Mesh { dim, res, delta, out } => {
            let mesh = generate_mesh(dim, res, delta)?;
            mesh.write(BufWriter::new(File::create(out)?))?;
        }
        Command::Solve(args) => solve(args)?,
        Command::Convergence { dim, strategy, levels, delta_policy, run, out } => {
            let resolutions = levels.iter().map(|&h| resolution(h)).collect::<Result<Vec<_>, _>>()?;
            let mut cfg = StudyConfig::new(dim, strategy, resolutions, delta_policy);
            cfg.threads = run.threads;
            cfg.mc = McConfig { samples: run.mc_samples, seed: run.seed };
            let outcome = convergence_study(&cfg)?;
            write_records(File::create(out)?, &outcome.records)?;
            eprintln!("fitted L2 order {:.3}", outcome.slope);
        }
        Command::Geoerr { dim, strategy, delta, h_seq, mc, centers, seed, out } => {
            let report = geoerr_study(&GeoErrConfig { dim, strategy, delta, hs: h_seq, n_mc: mc, centers, seed })?;
            write_geoerr(File::create(out)?, &report.rows)?;
            eprintln!("fitted order {:.3}", report.slope);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or_default();
            eprintln!("error: {}", line.strip_prefix("error: ").unwrap_or(line));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
