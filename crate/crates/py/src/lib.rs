//! Python bindings for kiteflow.

use kiteflow::bquad::{bquad_from_json, bquad_to_json, generate_square_grid, BQuadGraph, Labelling, WhiteGraph};
use kiteflow::dcmap::{build_map, dilatation, DiscreteConformalMap};
use kiteflow::euclid::{solve_dirichlet, DirichletProblem, SolveOptions};
use kiteflow::harness::{run_convergence, run_rigidity, ConvergenceSpec, Domain, RefMap, RigiditySpec};
use kiteflow::hyper::{minimize_s_hyp, HypSolveOptions};
use kiteflow::layout::{layout, pattern_from_json, pattern_to_json, to_svg, Anchor, CirclePattern, Point, SvgOptions};
use kiteflow::network::{conductances_from_pattern, effective_resistance, vel, Graph as PathGraph, VelOptions};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(pykiteflow, KiteflowError, PyException, "Raised for invalid input or failed computations.");

fn err(e: kiteflow::Error) -> PyErr {
    KiteflowError::new_err(format!("{}: {e}", e.kind()))
}

/// Parse a JSON string into Python objects.
fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serialization")
}

/// A bipartite quad graph with its intersection angles.
#[pyclass(module = "pykiteflow", frozen)]
struct QuadGraph {
    bquad: BQuadGraph,
    alpha: Labelling,
    white: WhiteGraph,
}

impl QuadGraph {
    fn wrap(bquad: BQuadGraph, alpha: Labelling) -> Self {
        let white = bquad.white_graph();
        QuadGraph { bquad, alpha, white }
    }
}

#[pymethods]
impl QuadGraph {
    /// `n` by `m` grid of squares with a constant angle.
    #[staticmethod]
    #[pyo3(signature = (n, m, alpha = std::f64::consts::FRAC_PI_2))]
    fn square_grid(n: usize, m: usize, alpha: f64) -> PyResult<Self> {
        let (d, a) = generate_square_grid(n, m, alpha).map_err(err)?;
        Ok(Self::wrap(d, a))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let (d, a) = bquad_from_json(text).map_err(err)?;
        Ok(Self::wrap(d, a))
    }

    fn to_json(&self) -> String {
        bquad_to_json(&self.bquad, &self.alpha)
    }

    #[getter]
    fn n_white(&self) -> usize {
        self.white.n
    }

    #[getter]
    fn n_quads(&self) -> usize {
        self.bquad.n_quads()
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.alpha.alpha.clone()
    }

    /// Boundary flag per white vertex.
    #[getter]
    fn boundary(&self) -> Vec<bool> {
        self.white.boundary.clone()
    }

    /// White-graph edges, one per quad.
    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.white.edges.iter().map(|&[a, b]| (a, b)).collect()
    }

    fn __repr__(&self) -> String {
        format!("QuadGraph(n_white={}, n_quads={})", self.white.n, self.bquad.n_quads())
    }
}

/// A laid-out circle pattern.
#[pyclass(module = "pykiteflow", frozen)]
struct Pattern {
    inner: CirclePattern,
}

#[pymethods]
impl Pattern {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Pattern { inner: pattern_from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        pattern_to_json(&self.inner)
    }

    fn to_svg(&self) -> String {
        to_svg(&self.inner, &SvgOptions::default())
    }

    #[getter]
    fn centers(&self) -> Vec<(f64, f64)> {
        self.inner.center.iter().map(|z| (z.re, z.im)).collect()
    }

    #[getter]
    fn radii(&self) -> Vec<f64> {
        self.inner.radius.clone()
    }

    #[getter]
    fn black(&self) -> Vec<(f64, f64)> {
        self.inner.black.iter().map(|z| (z.re, z.im)).collect()
    }

    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }
}

/// Piecewise affine map between two patterns with the same combinatorics.
#[pyclass(module = "pykiteflow", frozen)]
struct ConformalMap {
    inner: DiscreteConformalMap,
}

#[pymethods]
impl ConformalMap {
    #[new]
    fn new(source: &Pattern, target: &Pattern) -> PyResult<Self> {
        let m = build_map(&source.inner.kite_pattern(), &target.inner.kite_pattern()).map_err(err)?;
        Ok(ConformalMap { inner: m })
    }

    fn __call__(&self, x: f64, y: f64) -> PyResult<(f64, f64)> {
        let w = self.inner.eval(Point::new(x, y)).map_err(err)?;
        Ok((w.re, w.im))
    }

    fn inverse(&self) -> PyResult<Self> {
        Ok(ConformalMap { inner: self.inner.inverse().map_err(err)? })
    }

    fn max_dilatation(&self) -> PyResult<f64> {
        Ok(dilatation(&self.inner).map_err(err)?.max)
    }
}

/// Euclidean Dirichlet problem. `boundary` has one entry per white vertex;
/// entries at interior vertices are ignored. Returns `(radii, report)`.
#[pyfunction]
#[pyo3(signature = (graph, boundary, tol = 1e-10, max_iter = 100))]
fn solve<'py>(
    py: Python<'py>,
    graph: &QuadGraph,
    boundary: Vec<Option<f64>>,
    tol: f64,
    max_iter: usize,
) -> PyResult<(Vec<f64>, Bound<'py, PyAny>)> {
    let g = &graph.white;
    if boundary.len() != g.n {
        return Err(err(kiteflow::Error::InvalidInput(format!(
            "{} entries for {} white vertices",
            boundary.len(),
            g.n
        ))));
    }
    let b = (0..g.n).map(|v| if g.boundary[v] { boundary[v] } else { None }).collect();
    let problem = DirichletProblem::new(g, &graph.alpha, b).map_err(err)?;
    let opts = SolveOptions { tol, max_iter, ..Default::default() };
    let (rho, report) = py.detach(|| solve_dirichlet(&problem, &opts)).map_err(err)?;
    Ok((rho.radii(), loads(py, &to_json(&report))?))
}

/// Minimize the hyperbolic functional with the given boundary `ρ`; interior
/// entries are ignored. Returns `(rho, report)`.
#[pyfunction]
#[pyo3(signature = (graph, boundary_rho, tol = 1e-10, max_iter = 200))]
fn hsolve<'py>(
    py: Python<'py>,
    graph: &QuadGraph,
    boundary_rho: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> PyResult<(Vec<f64>, Bound<'py, PyAny>)> {
    let rho: Vec<f64> = boundary_rho
        .iter()
        .enumerate()
        .map(|(v, &x)| if graph.white.boundary.get(v).copied().unwrap_or(true) { x } else { -1.0 })
        .collect();
    let opts = HypSolveOptions { tol, max_iter, ..Default::default() };
    let (a, report) = py.detach(|| minimize_s_hyp(&graph.white, &graph.alpha, &rho, &opts)).map_err(err)?;
    Ok((a.rho, loads(py, &to_json(&report))?))
}

#[pyfunction(name = "layout")]
#[pyo3(signature = (graph, radii, root = 0, position = (0.0, 0.0), direction = 0.0))]
fn layout_py(
    graph: &QuadGraph,
    radii: Vec<f64>,
    root: usize,
    position: (f64, f64),
    direction: f64,
) -> PyResult<Pattern> {
    let anchor = Anchor { root, position: Point::new(position.0, position.1), direction };
    Ok(Pattern { inner: layout(&graph.white, &graph.alpha, &radii, anchor).map_err(err)? })
}

#[pyfunction(name = "effective_resistance")]
fn effective_resistance_py(graph: &QuadGraph, radii: Vec<f64>, a: Vec<usize>, z: Vec<usize>) -> PyResult<f64> {
    let wg = conductances_from_pattern(&graph.white, &graph.alpha, &radii).map_err(err)?;
    effective_resistance(&wg, &a, &z).map_err(err)
}

/// Vertex extremal length of the paths from `v1` to `v2` with the optimal metric.
#[pyfunction(name = "vel")]
fn vel_py<'py>(py: Python<'py>, graph: &QuadGraph, v1: Vec<usize>, v2: Vec<usize>) -> PyResult<Bound<'py, PyAny>> {
    let g = PathGraph::from(&graph.white);
    let res = py.detach(|| vel(&g, &v1, &v2, &VelOptions::default())).map_err(err)?;
    loads(py, &to_json(&res))
}

/// Convergence experiment; the report is returned as parsed JSON.
#[pyfunction]
#[pyo3(signature = (map = "moebius:0.3", levels = vec![8, 16, 32], margin = 0.2, sample_step = 0.02, disc = (0.0, 0.0, 1.0)))]
fn convergence<'py>(
    py: Python<'py>,
    map: &str,
    levels: Vec<usize>,
    margin: f64,
    sample_step: f64,
    disc: (f64, f64, f64),
) -> PyResult<Bound<'py, PyAny>> {
    let spec = ConvergenceSpec {
        domain: Domain::Disc { center: (disc.0, disc.1), radius: disc.2 },
        map: map.parse::<RefMap>().map_err(err)?,
        levels,
        margin,
        sample_step,
        ..Default::default()
    };
    let report = py.detach(|| run_convergence(&spec)).map_err(err)?;
    loads(py, &to_json(&report))
}

/// Rigidity interpolation experiment; the report is returned as parsed JSON.
#[pyfunction]
#[pyo3(signature = (sizes = vec![8, 16, 24], amplitude = 0.1, replicates = 8, seed = 7))]
fn rigidity<'py>(
    py: Python<'py>,
    sizes: Vec<usize>,
    amplitude: f64,
    replicates: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = RigiditySpec { sizes, amplitude, replicates, seed, ..Default::default() };
    let report = py.detach(|| run_rigidity(&spec)).map_err(err)?;
    loads(py, &to_json(&report))
}

#[pymodule]
fn pykiteflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("KiteflowError", m.py().get_type::<KiteflowError>())?;
    m.add_class::<QuadGraph>()?;
    m.add_class::<Pattern>()?;
    m.add_class::<ConformalMap>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(hsolve, m)?)?;
    m.add_function(wrap_pyfunction!(layout_py, m)?)?;
    m.add_function(wrap_pyfunction!(effective_resistance_py, m)?)?;
    m.add_function(wrap_pyfunction!(vel_py, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(rigidity, m)?)?;
    Ok(())
}
