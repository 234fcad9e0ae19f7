//! Python bindings: meshes, combinatorial maps, manufactured problems,
//! assembly, solves and the two studies.

use std::fs::File;
use std::io::BufWriter;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nlfem::assembly::{assemble as assemble_system, AssemblyConfig, Kernel, LinearSystem, Normalization};
use nlfem::ball_approx::{build_approx_ball, locate, piece_volume_sum, Strategy};
use nlfem::cmap::{CMap as CoreMap, CellId, Generators, Region};
use nlfem::geometry::Point;
use nlfem::harness::mesh::{generate_mesh, structured_box, Mesh as CoreMesh};
use nlfem::harness::problem::{ManufacturedProblem, Polynomial};
use nlfem::harness::study::{self, DeltaPolicy, GeoErrConfig, StudyConfig, StudyRecord};
use nlfem::quadrature::McConfig;
use nlfem::solver::{cg_solve, default_max_iterations};
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn strategy(name: &str) -> PyResult<Strategy> {
    name.parse().map_err(err)
}

fn point(x: &[f64]) -> PyResult<Point> {
    match *x {
        [a, b] => Ok(Point::new(a, b, 0.0)),
        [a, b, c] => Ok(Point::new(a, b, c)),
        _ => Err(PyValueError::new_err("points have two or three coordinates")),
    }
}

fn normalization(name: &str) -> PyResult<Normalization> {
    match name {
        "mass" => Ok(Normalization::Mass),
        "second_moment" => Ok(Normalization::SecondMoment),
        other => Err(PyValueError::new_err(format!("unknown normalization {other:?}"))),
    }
}

/// Simplicial mesh of a domain and its interaction layer.
#[pyclass(module = "nlfem_py", skip_from_py_object)]
#[derive(Clone)]
struct Mesh {
    inner: CoreMesh,
}

#[pymethods]
impl Mesh {
    /// Structured mesh of the unit square or cube with a layer covering `delta`.
    #[staticmethod]
    fn generate(dim: usize, res: usize, delta: f64) -> PyResult<Self> {
        Ok(Self { inner: generate_mesh(dim, res, delta).map_err(err)? })
    }

    /// All-interior box of `cells` cells of size `h` per direction from `origin`.
    #[staticmethod]
    fn structured_box(dim: usize, origin: Vec<f64>, h: f64, cells: usize) -> PyResult<Self> {
        Ok(Self { inner: structured_box(dim, &point(&origin)?, h, cells).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: CoreMesh::read(File::open(path).map_err(err)?).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.write(BufWriter::new(File::create(path).map_err(err)?)).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn vertices(&self) -> Vec<[f64; 3]> {
        self.inner.vertices.iter().map(|p| [p.x, p.y, p.z]).collect()
    }

    #[getter]
    fn cells(&self) -> Vec<Vec<usize>> {
        self.inner.cells.clone()
    }

    /// `"interior"` or `"interaction"` per cell.
    #[getter]
    fn regions(&self) -> Vec<&'static str> {
        self.inner
            .tags
            .iter()
            .map(|t| if *t == Region::Interior { "interior" } else { "interaction" })
            .collect()
    }

    /// `(h_avg, h_min)` over the edges.
    fn edge_stats(&self) -> (f64, f64) {
        self.inner.edge_stats()
    }

    fn interior_count(&self) -> usize {
        self.inner.interior_count()
    }

    fn to_cmap(&self) -> PyResult<CMap> {
        Ok(CMap { inner: self.inner.to_cmap().map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("Mesh(dim={}, vertices={}, cells={})", self.inner.dim, self.inner.vertices.len(), self.inner.cells.len())
    }
}

/// Combinatorial map of a mesh.
#[pyclass(module = "nlfem_py", skip_from_py_object)]
struct CMap {
    inner: CoreMap,
}

#[pymethods]
impl CMap {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn dart_count(&self) -> usize {
        self.inner.dart_count()
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn element_count(&self) -> usize {
        self.inner.element_count()
    }

    fn cell_count(&self, i: usize) -> PyResult<usize> {
        if i > self.inner.dim() {
            return Err(PyValueError::new_err(format!("no {i}-cells in a {}D map", self.inner.dim())));
        }
        Ok(self.inner.cell_count(i))
    }

    /// `βi(d)`, or `None` on a free dart.
    fn beta(&self, i: usize, dart: u32) -> PyResult<Option<u32>> {
        if i == 0 || i > self.inner.dim() || dart as usize >= self.inner.dart_count() {
            return Err(PyValueError::new_err("bad involution index or dart"));
        }
        let b = self.inner.beta(i, dart);
        Ok((b != nlfem::cmap::NULL).then_some(b))
    }

    /// Darts of the vertex (`cell=0`) or `i`-cell of `dart`.
    #[pyo3(signature = (dart, cell = 0))]
    fn orbit(&self, dart: u32, cell: usize) -> PyResult<Vec<u32>> {
        let g = if cell == 0 { Generators::Vertex } else { Generators::Cell(cell) };
        self.inner.orbit(dart, g).map_err(err)
    }

    /// Elements sharing a facet with `element`.
    fn neighbors(&self, element: usize) -> PyResult<Vec<u32>> {
        if element >= self.inner.element_count() {
            return Err(PyValueError::new_err(format!("no element {element}")));
        }
        let it = self.inner.neighbor_ncells(CellId::new(self.inner.dim(), element)).map_err(err)?;
        Ok(it.map(|c| c.index).collect())
    }

    fn element_vertices(&self, element: usize) -> PyResult<Vec<u32>> {
        if element >= self.inner.element_count() {
            return Err(PyValueError::new_err(format!("no element {element}")));
        }
        Ok(self.inner.element_vertices(element).to_vec())
    }

    /// One line per broken law; empty for a valid map.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().iter().map(|v| format!("{v:?}")).collect()
    }

    /// Some element containing `x`.
    fn locate(&self, x: Vec<f64>) -> PyResult<Option<usize>> {
        Ok(locate(&self.inner, &point(&x)?))
    }

    /// Measure of the approximate ball of radius `delta` around `x`.
    #[pyo3(signature = (x, delta, strategy, samples = 1000, seed = 0))]
    fn ball_volume(&self, x: Vec<f64>, delta: f64, strategy: &str, samples: usize, seed: u64) -> PyResult<f64> {
        let p = point(&x)?;
        let t = locate(&self.inner, &p).ok_or_else(|| PyValueError::new_err("point is outside the mesh"))?;
        let b = build_approx_ball(&self.inner, t, &p, delta, self::strategy(strategy)?).map_err(err)?;
        Ok(piece_volume_sum(&self.inner, &b, samples, &mut Pcg64Mcg::seed_from_u64(seed)))
    }
}

/// Polynomial exact solution with its nonlocal forcing.
#[pyclass(module = "nlfem_py", skip_from_py_object)]
struct Problem {
    inner: ManufacturedProblem,
}

#[pymethods]
impl Problem {
    #[staticmethod]
    #[pyo3(signature = (delta, normalization = "mass"))]
    fn poly2d(delta: f64, normalization: &str) -> PyResult<Self> {
        let k = Kernel::with_normalization(2, delta, self::normalization(normalization)?).map_err(err)?;
        Ok(Self { inner: ManufacturedProblem::poly2d(k) })
    }

    #[staticmethod]
    #[pyo3(signature = (delta, normalization = "mass"))]
    fn poly3d(delta: f64, normalization: &str) -> PyResult<Self> {
        let k = Kernel::with_normalization(3, delta, self::normalization(normalization)?).map_err(err)?;
        Ok(Self { inner: ManufacturedProblem::poly3d(k) })
    }

    /// Exact solution from `coefficient e1 e2 [e3]` lines.
    #[staticmethod]
    #[pyo3(signature = (dim, delta, text, normalization = "mass"))]
    fn from_text(dim: usize, delta: f64, text: &str, normalization: &str) -> PyResult<Self> {
        let k = Kernel::with_normalization(dim, delta, self::normalization(normalization)?).map_err(err)?;
        let exact: Polynomial = text.parse().map_err(err)?;
        Ok(Self { inner: ManufacturedProblem::new(exact, k) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.kernel.delta
    }

    #[getter]
    fn kernel_constant(&self) -> f64 {
        self.inner.kernel.constant
    }

    fn u(&self, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.u(&point(&x)?))
    }

    fn f(&self, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.f(&point(&x)?))
    }

    fn exact_text(&self) -> String {
        self.inner.exact.to_string()
    }

    fn forcing_text(&self) -> String {
        self.inner.forcing.to_string()
    }
}

/// Assembled stiffness matrix and load vector over the free vertices.
#[pyclass(module = "nlfem_py", skip_from_py_object)]
struct System {
    inner: LinearSystem,
}

#[pymethods]
impl System {
    #[getter]
    fn dof(&self) -> usize {
        self.inner.dofs.free_count()
    }

    #[getter]
    fn rhs(&self) -> Vec<f64> {
        self.inner.rhs.clone()
    }

    /// Mesh vertex of each unknown.
    #[getter]
    fn free_vertices(&self) -> Vec<usize> {
        (0..self.inner.dofs.free_count()).map(|k| self.inner.dofs.vertex(k)).collect()
    }

    /// `(rows, cols, values)` of the stored entries.
    fn triplets(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let m = &self.inner.matrix;
        let (mut r, mut c, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..m.dim() {
            for (j, x) in m.row(i) {
                r.push(i);
                c.push(j);
                v.push(x);
            }
        }
        (r, c, v)
    }

    fn max_asymmetry(&self) -> f64 {
        self.inner.matrix.max_asymmetry()
    }

    /// Conjugate gradients from zero: `(u, iterations, relative_residual)`.
    #[pyo3(signature = (tol = 1e-10))]
    fn solve(&self, py: Python<'_>, tol: f64) -> PyResult<(Vec<f64>, usize, f64)> {
        let n = self.inner.dofs.free_count();
        let (u, rep) =
            py.detach(|| cg_solve(&self.inner.matrix, &self.inner.rhs, tol, default_max_iterations(n))).map_err(err)?;
        Ok((u, rep.iterations, rep.relative_residual))
    }
}

fn config(strategy: &str, threads: usize, mc_samples: usize, seed: u64) -> PyResult<AssemblyConfig> {
    Ok(AssemblyConfig {
        threads,
        mc: McConfig { samples: mc_samples, seed },
        ..AssemblyConfig::new(self::strategy(strategy)?)
    })
}

/// Assembles the problem's linear system on `cmap`.
#[pyfunction]
#[pyo3(signature = (cmap, problem, strategy, threads = 1, mc_samples = 200, seed = 0))]
fn assemble(
    py: Python<'_>,
    cmap: &CMap,
    problem: &Problem,
    strategy: &str,
    threads: usize,
    mc_samples: usize,
    seed: u64,
) -> PyResult<System> {
    let cfg = config(strategy, threads, mc_samples, seed)?;
    let p = &problem.inner;
    let sys = py.detach(|| assemble_system(&cmap.inner, &p.kernel, |x| p.f(x), |x| p.g(x), &cfg)).map_err(err)?;
    Ok(System { inner: sys })
}

/// Assembles, solves and measures the L2 error; returns a dict.
#[pyfunction]
#[pyo3(signature = (cmap, problem, strategy, threads = 1, mc_samples = 200, seed = 0))]
fn solve<'py>(
    py: Python<'py>,
    cmap: &CMap,
    problem: &Problem,
    strategy: &str,
    threads: usize,
    mc_samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(strategy, threads, mc_samples, seed)?;
    let out = py.detach(|| study::solve_problem(&cmap.inner, &problem.inner, &cfg)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("values", out.values)?;
    d.set_item("dof", out.dof)?;
    d.set_item("l2_error", out.l2_error)?;
    d.set_item("assembly_s", out.assembly_s)?;
    d.set_item("solve_s", out.solve_s)?;
    d.set_item("iterations", out.report.iterations)?;
    d.set_item("relative_residual", out.report.relative_residual)?;
    Ok(d)
}

fn record_dict<'py>(py: Python<'py>, r: &StudyRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("h_avg", r.h_avg)?;
    d.set_item("h_min", r.h_min)?;
    d.set_item("dof", r.dof)?;
    d.set_item("K_omega", r.k_omega)?;
    d.set_item("strategy", r.strategy.name())?;
    d.set_item("l2_error", r.l2_error)?;
    d.set_item("assembly_s", r.assembly_s)?;
    d.set_item("solve_s", r.solve_s)?;
    d.set_item("lambda", r.lambda)?;
    Ok(d)
}

/// Convergence study on structured meshes: `(rows, fitted_order)`.
#[pyfunction]
#[pyo3(signature = (dim, strategy, levels, delta_policy = "fixed:0.1", threads = 1, mc_samples = 200, seed = 0))]
fn convergence<'py>(
    py: Python<'py>,
    dim: usize,
    strategy: &str,
    levels: Vec<f64>,
    delta_policy: &str,
    threads: usize,
    mc_samples: usize,
    seed: u64,
) -> PyResult<(Vec<Bound<'py, PyDict>>, f64)> {
    let policy: DeltaPolicy = delta_policy.parse().map_err(err)?;
    let mut res = Vec::with_capacity(levels.len());
    for h in levels {
        if !(h > 0.0 && h <= 1.0) {
            return Err(PyValueError::new_err(format!("mesh size {h} is not in (0, 1]")));
        }
        res.push((1.0 / h).round() as usize);
    }
    let mut cfg = StudyConfig::new(dim, self::strategy(strategy)?, res, policy);
    cfg.threads = threads;
    cfg.mc = McConfig { samples: mc_samples, seed };
    let out = py.detach(|| study::convergence_study(&cfg)).map_err(err)?;
    let rows = out.records.iter().map(|r| record_dict(py, r)).collect::<PyResult<_>>()?;
    Ok((rows, out.slope))
}

/// Ball approximation error study: `([(h, sym_diff, relative)], fitted_order)`.
#[pyfunction]
#[pyo3(signature = (dim, strategy, delta, hs, mc = 200_000, centers = 4, seed = 0))]
fn geoerr(
    py: Python<'_>,
    dim: usize,
    strategy: &str,
    delta: f64,
    hs: Vec<f64>,
    mc: usize,
    centers: usize,
    seed: u64,
) -> PyResult<(Vec<(f64, f64, f64)>, f64)> {
    let cfg = GeoErrConfig { dim, strategy: self::strategy(strategy)?, delta, hs, n_mc: mc, centers, seed };
    let out = py.detach(|| study::geoerr_study(&cfg)).map_err(err)?;
    Ok((out.rows.iter().map(|r| (r.h, r.sym_diff, r.relative)).collect(), out.slope))
}

#[pymodule]
fn nlfem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Mesh>()?;
    m.add_class::<CMap>()?;
    m.add_class::<Problem>()?;
    m.add_class::<System>()?;
    m.add_function(wrap_pyfunction!(assemble, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(geoerr, m)?)?;
    m.add("STRATEGIES", Strategy::ALL.iter().map(|s| s.name()).collect::<Vec<_>>())?;
    Ok(())
}
