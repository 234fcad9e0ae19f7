//! Solves on mesh sequences, L2 errors, efficiency ratios and geometric
//! error studies.

use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{assemble, AssemblyConfig, AssemblyError, Kernel, LinearSystem, Normalization};
use crate::ball_approx::{estimate_symmetric_difference, locate, BallError, Strategy};
use crate::cmap::{CMap, CMapError, Region};
use crate::geometry::Point;
use crate::harness::mesh::{generate_mesh, structured_box, MeshError};
use crate::harness::problem::ManufacturedProblem;
use crate::quadrature::{error_rule, integrate_with, McConfig};
use crate::solver::{cg_solve, default_max_iterations, SolveError, SolveReport};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Topology(#[from] CMapError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Ball(#[from] BallError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub h_avg: f64,
    pub h_min: f64,
    pub dof: usize,
    #[serde(rename = "K_omega")]
    pub k_omega: usize,
    pub strategy: Strategy,
    pub l2_error: f64,
    pub assembly_s: f64,
    pub solve_s: f64,
    /// Efficiency ratio against the previous row.
    pub lambda: Option<f64>,
}

pub fn write_records<W: Write>(w: W, records: &[StudyRecord]) -> Result<(), StudyError> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<StudyRecord>, StudyError> {
    let mut rd = csv::Reader::from_reader(r);
    Ok(rd.deserialize().collect::<Result<_, _>>()?)
}

/// Horizon as a function of the mesh size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPolicy {
    Fixed(f64),
    Ratio(f64),
}

impl DeltaPolicy {
    pub fn delta(&self, h: f64) -> f64 {
        match *self {
            DeltaPolicy::Fixed(d) => d,
            DeltaPolicy::Ratio(r) => r * h,
        }
    }
}

impl FromStr for DeltaPolicy {
    type Err = String;

    /// `fixed:D` or `ratio:R`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, value) = s.split_once(':').ok_or_else(|| format!("expected fixed:D or ratio:R, got {s:?}"))?;
        let v: f64 = value.parse().map_err(|e| format!("{value:?}: {e}"))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("{s:?}: value must be positive"));
        }
        match kind {
            "fixed" => Ok(DeltaPolicy::Fixed(v)),
            "ratio" => Ok(DeltaPolicy::Ratio(v)),
            _ => Err(format!("unknown delta policy {kind:?}")),
        }
    }
}

/// Nodal values on every vertex: the solution on free dofs, `g` elsewhere.
pub fn nodal_values(map: &CMap, sys: &LinearSystem, u: &[f64], g: impl Fn(&Point) -> f64) -> Vec<f64> {
    (0..map.vertex_count())
        .map(|v| if sys.dofs.is_free(v) { u[sys.dofs.index(v)] } else { g(&map.coords()[v]) })
        .collect()
}

/// `‖u_h − u‖` over the interior elements, `u_h` given by nodal values.
pub fn l2_error(map: &CMap, values: &[f64], exact: impl Fn(&Point) -> f64) -> f64 {
    let rule = error_rule(map.dim()).expect("mesh dimension is 2 or 3");
    let mut sum = 0.0;
    for t in 0..map.element_count() {
        if map.region(t) != Region::Interior {
            continue;
        }
        let s = map.simplex(t);
        let verts = map.element_vertices(t);
        sum += integrate_with(rule, &s, |p| {
            let l = s.barycentric(p);
            let uh: f64 = verts.iter().enumerate().map(|(k, &v)| l[k] * values[v as usize]).sum();
            (uh - exact(p)).powi(2)
        });
    }
    sum.sqrt()
}

/// Result of one assemble + solve on a mesh.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub values: Vec<f64>,
    pub report: SolveReport,
    pub dof: usize,
    pub assembly_s: f64,
    pub solve_s: f64,
    pub l2_error: f64,
}

/// Assembles and solves the manufactured problem on `map`.
pub fn solve_problem(map: &CMap, problem: &ManufacturedProblem, cfg: &AssemblyConfig) -> Result<SolveOutcome, StudyError> {
    let t0 = Instant::now();
    let sys = assemble(map, &problem.kernel, |p| problem.f(p), |p| problem.g(p), cfg)?;
    let assembly_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let n = sys.dofs.free_count();
    let (u, report) = cg_solve(&sys.matrix, &sys.rhs, 1e-10, default_max_iterations(n))?;
    let solve_s = t1.elapsed().as_secs_f64();
    let values = nodal_values(map, &sys, &u, |p| problem.g(p));
    let l2_error = l2_error(map, &values, |p| problem.u(p));
    Ok(SolveOutcome { values, report, dof: n, assembly_s, solve_s, l2_error })
}

/// `λ = −log(e₀/e₁) / log(t₀/t₁)`.
pub fn efficiency_ratio(e0: f64, t0: f64, e1: f64, t1: f64) -> f64 {
    -(e0 / e1).ln() / (t0 / t1).ln()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub dim: usize,
    pub strategy: Strategy,
    /// Cells per unit length, one entry per level.
    pub resolutions: Vec<usize>,
    pub delta: DeltaPolicy,
    pub normalization: Normalization,
    pub threads: usize,
    pub mc: McConfig,
}

impl StudyConfig {
    pub fn new(dim: usize, strategy: Strategy, resolutions: Vec<usize>, delta: DeltaPolicy) -> Self {
        Self { dim, strategy, resolutions, delta, normalization: Normalization::Mass, threads: 1, mc: McConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub records: Vec<StudyRecord>,
    /// Fitted order of `l2_error` in `h_avg`.
    pub slope: f64,
}

/// The shipped manufactured problem of each dimension.
pub fn default_problem(kernel: Kernel) -> ManufacturedProblem {
    if kernel.dim == 2 {
        ManufacturedProblem::poly2d(kernel)
    } else {
        ManufacturedProblem::poly3d(kernel)
    }
}

pub fn convergence_study(cfg: &StudyConfig) -> Result<StudyOutcome, StudyError> {
    if cfg.resolutions.len() < 2 {
        return Err(StudyError::Invalid("a convergence study needs at least two levels".into()));
    }
    let mut records: Vec<StudyRecord> = Vec::new();
    for &res in &cfg.resolutions {
        let delta = cfg.delta.delta(1.0 / res as f64);
        let mesh = generate_mesh(cfg.dim, res, delta)?;
        let (h_avg, h_min) = mesh.edge_stats();
        let map = mesh.to_cmap()?;
        let kernel = Kernel::with_normalization(cfg.dim, delta, cfg.normalization)?;
        let problem = default_problem(kernel);
        let acfg = AssemblyConfig { threads: cfg.threads, mc: cfg.mc, ..AssemblyConfig::new(cfg.strategy) };
        let out = solve_problem(&map, &problem, &acfg)?;
        let lambda = records.last().map(|prev| {
            efficiency_ratio(prev.l2_error, prev.assembly_s + prev.solve_s, out.l2_error, out.assembly_s + out.solve_s)
        });
        records.push(StudyRecord {
            h_avg,
            h_min,
            dof: out.dof,
            k_omega: mesh.interior_count(),
            strategy: cfg.strategy,
            l2_error: out.l2_error,
            assembly_s: out.assembly_s,
            solve_s: out.solve_s,
            lambda,
        });
    }
    let h: Vec<f64> = records.iter().map(|r| r.h_avg).collect();
    let e: Vec<f64> = records.iter().map(|r| r.l2_error).collect();
    Ok(StudyOutcome { slope: loglog_slope(&h, &e), records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoErrConfig {
    pub dim: usize,
    pub strategy: Strategy,
    pub delta: f64,
    pub hs: Vec<f64>,
    /// Monte Carlo samples per ball.
    pub n_mc: usize,
    /// Ball centres per mesh size.
    pub centers: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoErrRow {
    pub h: f64,
    pub strategy: Strategy,
    /// Mean of `|B_δ(x) Δ B_{δ,h}(x)|` over the centres.
    pub sym_diff: f64,
    /// The same, relative to `|B_δ|`.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoErrReport {
    pub rows: Vec<GeoErrRow>,
    pub slope: f64,
}

/// Symmetric-difference volume of the approximate ball against `h`, on a
/// structured mesh around each sampled centre.
pub fn geoerr_study(cfg: &GeoErrConfig) -> Result<GeoErrReport, StudyError> {
    if cfg.hs.len() < 2 {
        return Err(StudyError::Invalid("a geometric error study needs at least two mesh sizes".into()));
    }
    let measure = crate::geometry::ball_measure(cfg.dim, cfg.delta);
    let mut rows = Vec::new();
    for (level, &h) in cfg.hs.iter().enumerate() {
        if !(h > 0.0 && h.is_finite()) {
            return Err(StudyError::Invalid(format!("bad mesh size {h}")));
        }
        let half = (cfg.delta / h).ceil() as usize + 3;
        let origin = Point::from_fn(|k, _| if k < cfg.dim { -(half as f64) * h } else { 0.0 });
        let map = structured_box(cfg.dim, &origin, h, 2 * half)?.to_cmap()?;
        let mut rng = Pcg64Mcg::seed_from_u64(crate::quadrature::task_seed(cfg.seed, level, 0, 0));
        let mut total = 0.0;
        for _ in 0..cfg.centers.max(1) {
            let p = Point::from_fn(|k, _| if k < cfg.dim { rng.gen_range(-0.5..0.5) * h } else { 0.0 });
            let seed = locate(&map, &p).ok_or_else(|| StudyError::Invalid("centre outside the local mesh".into()))?;
            total += estimate_symmetric_difference(&map, seed, &p, cfg.delta, cfg.strategy, cfg.n_mc, &mut rng)?;
        }
        let sym_diff = total / cfg.centers.max(1) as f64;
        rows.push(GeoErrRow { h, strategy: cfg.strategy, sym_diff, relative: sym_diff / measure });
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.sym_diff).collect();
    Ok(GeoErrReport { slope: loglog_slope(&h, &e), rows })
}

pub fn write_geoerr<W: Write>(w: W, rows: &[GeoErrRow]) -> Result<(), StudyError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
