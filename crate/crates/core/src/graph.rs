//! Manifold graph construction: K nearest neighbours under the group
//! distance, Gaussian weights, the symmetric normalized Laplacian and its
//! rescaled form, random sub-graphs, and the CLGR container.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{arg, Error, Result};
use crate::io::{Reader, Writer};
use crate::lie_group::{self, GroupElement, Metric};
use crate::rng::Rng64;
use crate::sampling::{GridKind, GridSpec, VertexSet};
use crate::sparse::Csr;

/// Default K for lifted (SE(2), SO(3)) graphs.
pub const DEFAULT_KNN_LIFTED: usize = 16;
/// Default K for base-space (ℝ², S²) graphs.
pub const DEFAULT_KNN_BASE: usize = 8;

/// Relative tolerance under which two candidate distances count as tied.
pub const TIE_RTOL: f64 = 1e-9;

/// `ξ = sqrt(α·|V_o| / |V_s|)`.
pub fn xi_from_alpha(alpha: f64, n_orient: usize, n_spatial: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) || n_orient == 0 || n_spatial == 0 {
        return Err(arg("alpha, |V_o| and |V_s| must be positive"));
    }
    Ok((alpha * n_orient as f64 / n_spatial as f64).sqrt())
}

/// How the distance between two vertices is measured for a grid kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    /// Log-norm minimised over the ±π orientation offsets (lifted groups).
    Periodic,
    /// Plain log-norm (ℝ²: all vertices share one orientation).
    Plain,
    /// Torsion-free sphere logarithm (S²).
    Sphere,
}

impl DistanceKind {
    pub fn for_grid(kind: GridKind) -> Self {
        match kind {
            GridKind::Se2Grid | GridKind::So3Icosahedral => DistanceKind::Periodic,
            GridKind::R2Grid => DistanceKind::Plain,
            GridKind::S2Icosahedral => DistanceKind::Sphere,
        }
    }

    pub fn eval(&self, g: &GroupElement, h: &GroupElement, m: &Metric) -> f64 {
        match self {
            DistanceKind::Periodic => lie_group::distance(g, h, m),
            DistanceKind::Plain => lie_group::plain_distance(g, h, m),
            DistanceKind::Sphere => lie_group::sphere_distance(g, h, m),
        }
    }
}

/// Tie handling at the K-th neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Candidates tied with the K-th distance (within [`TIE_RTOL`]) are all
    /// kept. Keeps the edge set invariant under grid automorphisms.
    #[default]
    KeepTied,
    /// Exactly K per vertex, ties broken by lower vertex id.
    LowerId,
}

/// Undirected K-NN edge set, `i < j`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnEdges {
    pub edges: Vec<(usize, usize, f64)>,
    pub k_effective: usize,
    /// Set when the requested K was clamped to `|V| − 1`.
    pub clamped: bool,
}

/// For every vertex select its K nearest others; keep an edge when either
/// endpoint selected it. Distances are evaluated once per pair as
/// `d(v_min, v_max)`.
pub fn knn_edges(
    vertices: &VertexSet,
    metric: &Metric,
    dist: DistanceKind,
    k: usize,
    ties: TieRule,
) -> Result<KnnEdges> {
    let n = vertices.len();
    if k == 0 {
        return Err(arg("K must be at least 1"));
    }
    if n < 2 {
        return Err(arg("need at least two vertices"));
    }
    let clamped = k >= n;
    let k = k.min(n - 1);
    let els = &vertices.elements;

    #[cfg(feature = "parallel")]
    let rows = (0..n).into_par_iter();
    #[cfg(not(feature = "parallel"))]
    let rows = 0..n;
    let selected: Vec<Vec<usize>> = rows
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let (a, b) = (i.min(j), i.max(j));
                    (dist.eval(&els[a], &els[b], metric), j)
                })
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut take = k;
            if ties == TieRule::KeepTied {
                let dk = cand[k - 1].0;
                while take < cand.len() && cand[take].0 <= dk + dk.abs() * TIE_RTOL {
                    take += 1;
                }
            }
            cand[..take].iter().map(|&(_, j)| j).collect()
        })
        .collect();

    let mut pairs: Vec<(usize, usize)> = selected
        .iter()
        .enumerate()
        .flat_map(|(i, js)| js.iter().map(move |&j| (i.min(j), i.max(j))))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    #[cfg(feature = "parallel")]
    let pairs = pairs.into_par_iter();
    #[cfg(not(feature = "parallel"))]
    let pairs = pairs.into_iter();
    let edges = pairs
        .map(|(i, j)| (i, j, dist.eval(&els[i], &els[j], metric)))
        .collect();
    Ok(KnnEdges { edges, k_effective: k, clamped })
}

/// Kernel bandwidth: 20% of the mean squared distance over undirected edges.
pub fn bandwidth(distances: &[f64]) -> Result<f64> {
    if distances.is_empty() {
        return Err(arg("bandwidth needs at least one edge"));
    }
    let mean = distances.iter().map(|d| d * d).sum::<f64>() / distances.len() as f64;
    Ok(0.2 * mean)
}

/// `exp(−d² / 4t)` per edge.
pub fn gaussian_weights(distances: &[f64], t: f64) -> Vec<f64> {
    assert!(t > 0.0, "bandwidth must be positive");
    distances.iter().map(|d| (-d * d / (4.0 * t)).exp()).collect()
}

/// How ξ is set: directly, or through `ξ² = α|V_o|/|V_s|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Orientation {
    Xi(f64),
    Alpha(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphConfig {
    pub spec: GridSpec,
    pub epsilon: f64,
    pub orientation: Orientation,
    /// `None` selects 16 for lifted grids and 8 for base spaces.
    pub knn: Option<usize>,
    pub ties: TieRule,
}

impl GraphConfig {
    pub fn new(spec: GridSpec, epsilon: f64, orientation: Orientation) -> Self {
        GraphConfig { spec, epsilon, orientation, knn: None, ties: TieRule::default() }
    }

    /// Isotropic base-space graph; ε = ξ = 1 is forced.
    pub fn isotropic(spec: GridSpec) -> Self {
        Self::new(spec, 1.0, Orientation::Xi(1.0))
    }

    pub fn with_knn(mut self, k: usize) -> Self {
        self.knn = Some(k);
        self
    }

    pub fn effective_knn(&self) -> usize {
        self.knn.unwrap_or(if self.spec.kind.is_isotropic() {
            DEFAULT_KNN_BASE
        } else {
            DEFAULT_KNN_LIFTED
        })
    }

    /// Resolved `(metric, alpha)`; isotropic kinds always get ε = ξ = 1.
    pub fn metric(&self) -> Result<(Metric, Option<f64>)> {
        if self.spec.kind.is_isotropic() {
            return Ok((Metric::isotropic(), None));
        }
        match self.orientation {
            Orientation::Xi(xi) => Ok((Metric::new(self.epsilon, xi)?, None)),
            Orientation::Alpha(a) => {
                let xi = xi_from_alpha(a, self.spec.n_orient, self.spec.n_spatial())?;
                Ok((Metric::new(self.epsilon, xi)?, Some(a)))
            }
        }
    }

    pub fn build(&self) -> Result<ManifoldGraph> {
        let vertices = self.spec.sample()?;
        let (metric, alpha) = self.metric()?;
        ManifoldGraph::build(vertices, metric, alpha, self.effective_knn(), self.ties)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldGraph {
    pub vertices: VertexSet,
    /// Symmetric weights, no diagonal.
    pub adjacency: Csr,
    /// Edge distances aligned with `adjacency` storage.
    pub distances: Vec<f64>,
    pub metric: Metric,
    pub alpha: Option<f64>,
    pub knn: usize,
    pub bandwidth: f64,
    pub knn_clamped: bool,
}

impl ManifoldGraph {
    pub fn build(
        vertices: VertexSet,
        metric: Metric,
        alpha: Option<f64>,
        k: usize,
        ties: TieRule,
    ) -> Result<Self> {
        let dist = DistanceKind::for_grid(vertices.spec.kind);
        let knn = knn_edges(&vertices, &metric, dist, k, ties)?;
        let d: Vec<f64> = knn.edges.iter().map(|e| e.2).collect();
        let t = bandwidth(&d)?;
        let w = gaussian_weights(&d, t);
        let undirected: Vec<(usize, usize, f64, f64)> = knn
            .edges
            .iter()
            .zip(&w)
            .map(|(&(i, j, d), &w)| (i, j, w, d))
            .collect();
        let (adjacency, distances) = assemble(vertices.len(), &undirected);
        Ok(ManifoldGraph {
            vertices,
            adjacency,
            distances,
            metric,
            alpha,
            knn: knn.k_effective,
            bandwidth: t,
            knn_clamped: knn.clamped,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    /// Undirected edges `(i, j, weight, distance)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64, f64)> {
        self.adjacency
            .iter()
            .zip(&self.distances)
            .filter(|((i, j, _), _)| i < j)
            .map(|((i, j, w), &d)| (i, j, w, d))
            .collect()
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.adjacency.row_sums()
    }

    /// Fraction of neighbours in the same orientation layer (and its
    /// complement), averaged over vertices with at least one neighbour.
    pub fn neighbor_ratio(&self) -> (f64, f64) {
        let els = &self.vertices.elements;
        let mut acc = 0.0;
        let mut count = 0usize;
        for r in 0..self.n_vertices() {
            let (cols, _) = self.adjacency.row(r);
            if cols.is_empty() {
                continue;
            }
            let same = cols
                .iter()
                .filter(|&&c| (els[c].orientation() - els[r].orientation()).abs() < 1e-12)
                .count();
            acc += same as f64 / cols.len() as f64;
            count += 1;
        }
        let same = if count == 0 { 0.0 } else { acc / count as f64 };
        (same, 1.0 - same)
    }

    fn with_edges(&self, vertices: VertexSet, undirected: &[(usize, usize, f64, f64)]) -> Self {
        let (adjacency, distances) = assemble(vertices.len(), undirected);
        ManifoldGraph { vertices, adjacency, distances, ..self.clone() }
    }

    /// Keeps each edge with probability `min(1, c·w)`, `c` chosen so the
    /// expected kept fraction is `kappa`. Draws happen in edge order
    /// (row-major over `i < j`), one uniform per edge.
    pub fn sample_edges(&self, kappa: f64, seed: u64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(arg(format!("edge rate must be in (0, 1], got {kappa}")));
        }
        if kappa == 1.0 {
            return Ok(self.clone());
        }
        let edges = self.edges();
        let weights: Vec<f64> = edges.iter().map(|e| e.2).collect();
        let scale = keep_scale(&weights, kappa);
        let mut rng = Rng64::new(seed);
        let kept: Vec<_> = edges
            .into_iter()
            .filter(|e| rng.next_f64() < (scale * e.2).min(1.0))
            .collect();
        Ok(self.with_edges(self.vertices.clone(), &kept))
    }

    /// Keeps `⌈κ·|V|⌉` uniformly drawn vertices and the edges between them.
    /// Returns the graph and the map from new to old vertex ids.
    pub fn sample_vertices(&self, kappa: f64, seed: u64) -> Result<(Self, Vec<usize>)> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(arg(format!("vertex rate must be in (0, 1], got {kappa}")));
        }
        let n = self.n_vertices();
        let m = ceil_count(kappa, n);
        if m == 0 {
            return Err(arg("vertex sampling kept no vertices"));
        }
        let mut ids: Vec<usize> = (0..n).collect();
        let mut rng = Rng64::new(seed);
        for i in 0..m {
            let j = i + rng.below(n - i);
            ids.swap(i, j);
        }
        let mut keep = ids[..m].to_vec();
        keep.sort_unstable();
        let mut new_id = vec![usize::MAX; n];
        for (new, &old) in keep.iter().enumerate() {
            new_id[old] = new;
        }
        let kept: Vec<_> = self
            .edges()
            .into_iter()
            .filter(|e| new_id[e.0] != usize::MAX && new_id[e.1] != usize::MAX)
            .map(|(i, j, w, d)| (new_id[i], new_id[j], w, d))
            .collect();
        let vertices = VertexSet {
            spec: self.vertices.spec,
            elements: keep.iter().map(|&i| self.vertices.elements[i]).collect(),
        };
        Ok((self.with_edges(vertices, &kept), keep))
    }
}

/// `⌈κ·n⌉`, treating products within 1e-9 of an integer as that integer.
fn ceil_count(kappa: f64, n: usize) -> usize {
    let x = kappa * n as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Solves `Σ min(1, c·w) = κ·|E|` for `c` by bisection.
fn keep_scale(weights: &[f64], kappa: f64) -> f64 {
    let target = kappa * weights.len() as f64;
    let expected = |c: f64| weights.iter().map(|w| (c * w).min(1.0)).sum::<f64>();
    let wmin = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, 1.0 / wmin);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Mirrors undirected `(i, j, w, d)` edges into CSR weights and distances.
fn assemble(n: usize, undirected: &[(usize, usize, f64, f64)]) -> (Csr, Vec<f64>) {
    let mut trip: Vec<(usize, usize, f64, f64)> = Vec::with_capacity(2 * undirected.len());
    for &(i, j, w, d) in undirected {
        assert!(i != j, "self-loop {i}");
        trip.push((i, j, w, d));
        trip.push((j, i, w, d));
    }
    trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let distances = trip.iter().map(|t| t.3).collect();
    let adjacency = Csr::from_triplets(n, trip.into_iter().map(|(i, j, w, _)| (i, j, w)).collect());
    (adjacency, distances)
}

/// Symmetric normalized Laplacian, optionally rescaled to `2Δ/λ_max − I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub matrix: Csr,
    pub lambda_max: Option<f64>,
    pub rescaled: bool,
    /// Set when the λ_max estimate fell back to 2.0.
    pub lambda_warning: bool,
}

impl Laplacian {
    /// `Δ_ii = 1` when `deg > 0`, `Δ_ij = −w_ij / sqrt(deg_i deg_j)`, zero
    /// rows for isolated vertices.
    pub fn from_adjacency(w: &Csr) -> Self {
        let deg = w.row_sums();
        let mut trip = Vec::with_capacity(w.nnz() + w.n());
        for (i, &d) in deg.iter().enumerate() {
            if d > 0.0 {
                trip.push((i, i, 1.0));
            }
        }
        for (i, j, v) in w.iter() {
            assert!(i != j, "adjacency has a self-loop at {i}");
            // deg_i·deg_j is commutative in floating point, so Δ stays exactly symmetric
            trip.push((i, j, -v / (deg[i] * deg[j]).sqrt()));
        }
        Laplacian { matrix: Csr::from_triplets(w.n(), trip), lambda_max: None, rescaled: false, lambda_warning: false }
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }
}

pub fn laplacian(g: &ManifoldGraph) -> Laplacian {
    Laplacian::from_adjacency(&g.adjacency)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    PowerIteration { tol: f64, max_iter: usize },
    /// `λ_max ≃ 2`.
    Fixed2,
}

impl Default for LambdaMode {
    fn default() -> Self {
        LambdaMode::PowerIteration { tol: 1e-6, max_iter: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaEstimate {
    pub value: f64,
    pub converged: bool,
}

/// Largest eigenvalue of an unrescaled Laplacian by power iteration with a
/// Rayleigh-quotient stopping rule, clamped to `(0, 2]`. Falls back to 2.0
/// (with `converged = false`) when the iteration does not settle.
pub fn lambda_max(l: &Laplacian, mode: LambdaMode) -> Result<LambdaEstimate> {
    if l.rescaled {
        return Err(Error::State("lambda_max needs an unrescaled Laplacian".into()));
    }
    let (tol, max_iter) = match mode {
        LambdaMode::Fixed2 => return Ok(LambdaEstimate { value: 2.0, converged: true }),
        LambdaMode::PowerIteration { tol, max_iter } => (tol, max_iter),
    };
    let n = l.n();
    let mut rng = Rng64::new(0x1a3b_5c7d);
    let mut v: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    normalize(&mut v);
    let mut w = vec![0.0; n];
    let mut prev = f64::NAN;
    for _ in 0..max_iter {
        l.matrix.mul_vec_into(&v, &mut w);
        let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        if (rayleigh - prev).abs() <= tol * rayleigh.abs() {
            return Ok(LambdaEstimate { value: rayleigh.clamp(f64::MIN_POSITIVE, 2.0), converged: true });
        }
        prev = rayleigh;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    Ok(LambdaEstimate { value: 2.0, converged: false })
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// `Δ̃ = (2/λ_max)·Δ − I`.
pub fn rescale(l: &Laplacian, lambda_max: f64) -> Result<Laplacian> {
    if l.rescaled {
        return Err(Error::State("Laplacian is already rescaled".into()));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(arg(format!("lambda_max must be positive, got {lambda_max}")));
    }
    let s = 2.0 / lambda_max;
    let mut trip: Vec<(usize, usize, f64)> = l.matrix.iter().map(|(i, j, v)| (i, j, s * v)).collect();
    trip.extend((0..l.n()).map(|i| (i, i, -1.0)));
    Ok(Laplacian {
        matrix: Csr::from_triplets(l.n(), trip),
        lambda_max: Some(lambda_max),
        rescaled: true,
        lambda_warning: l.lambda_warning,
    })
}

/// Laplacian of `g` with λ_max estimated per `mode`, then rescaled.
pub fn rescaled_laplacian(g: &ManifoldGraph, mode: LambdaMode) -> Result<(Laplacian, Laplacian)> {
    let mut lap = laplacian(g);
    let est = lambda_max(&lap, mode)?;
    lap.lambda_max = Some(est.value);
    lap.lambda_warning = !est.converged;
    let resc = rescale(&lap, est.value)?;
    Ok((lap, resc))
}

pub const CLGR_MAGIC: &[u8; 4] = b"CLGR";
pub const CLGR_VERSION: u32 = 1;
const LAPL_TAG: &[u8; 4] = b"LAPL";

/// Writes the CLGR container (little-endian), with an optional trailing
/// Laplacian section.
pub fn serialize(g: &ManifoldGraph, lap: Option<&Laplacian>) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(CLGR_MAGIC);
    w.u32(CLGR_VERSION);
    let spec = g.vertices.spec;
    w.u8(spec.kind.code());
    for v in [spec.nx, spec.ny, spec.level, spec.n_orient] {
        w.u32(v as u32);
    }
    w.f64(g.metric.epsilon());
    w.f64(g.metric.xi());
    w.f64(g.alpha.unwrap_or(f64::NAN));
    w.u32(g.knn as u32);
    w.f64(g.bandwidth);
    w.u64(g.n_vertices() as u64);
    for e in &g.vertices.elements {
        w.f64s(&e.params());
    }
    write_csr(&mut w, &g.adjacency);
    w.f64s(&g.distances);
    if let Some(l) = lap {
        w.bytes(LAPL_TAG);
        write_csr(&mut w, &l.matrix);
        w.f64(l.lambda_max.unwrap_or(f64::NAN));
    }
    w.finish()
}

fn write_csr(w: &mut Writer, m: &Csr) {
    w.usizes_as_u64(m.indptr());
    w.u64(m.nnz() as u64);
    w.usizes_as_u64(m.indices());
    w.f64s(m.values());
}

fn read_csr(r: &mut Reader, n: usize) -> Result<Csr> {
    let start = r.offset();
    if r.remaining() / 8 < n + 1 {
        return Err(r.error("truncated: row pointers"));
    }
    let indptr = r.u64s_as_usize(n + 1)?;
    let nnz = r.len(16)?;
    let indices = r.u64s_as_usize(nnz)?;
    let values = r.f64s(nnz)?;
    Csr::from_raw(n, indptr, indices, values)
        .ok_or(Error::Format { msg: "malformed CSR".into(), offset: start })
}

/// Reads a CLGR container. Returns the graph and the Laplacian section when present.
pub fn deserialize(bytes: &[u8]) -> Result<(ManifoldGraph, Option<Laplacian>)> {
    let mut r = Reader::new(bytes);
    r.magic(CLGR_MAGIC)?;
    r.version(CLGR_VERSION)?;
    let kind_at = r.offset();
    let kind = GridKind::from_code(r.u8()?)
        .ok_or(Error::Format { msg: "unknown grid kind".into(), offset: kind_at })?;
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let spec = GridSpec { kind, nx: dims[0], ny: dims[1], level: dims[2], n_orient: dims[3] };
    let metric_at = r.offset();
    let (eps, xi, alpha) = (r.f64()?, r.f64()?, r.f64()?);
    let metric = Metric::new(eps, xi)
        .map_err(|e| Error::Format { msg: format!("bad metric: {e}"), offset: metric_at })?;
    let knn = r.u32()? as usize;
    let bandwidth = r.f64()?;
    let n = r.len(24)?;
    let params = r.f64s(3 * n)?;
    let group = kind.group();
    let elements = params
        .chunks_exact(3)
        .map(|p| GroupElement::from_params(group, [p[0], p[1], p[2]]))
        .collect();
    let adjacency = read_csr(&mut r, n)?;
    let distances = r.f64s(adjacency.nnz())?;
    let graph = ManifoldGraph {
        vertices: VertexSet { spec, elements },
        adjacency,
        distances,
        metric,
        alpha: if alpha.is_nan() { None } else { Some(alpha) },
        knn,
        bandwidth,
        knn_clamped: knn + 1 == n && n > 1,
    };
    if r.at_end() {
        return Ok((graph, None));
    }
    let tag_at = r.offset();
    if r.take(4)? != LAPL_TAG {
        return Err(Error::Format { msg: "unknown trailing section".into(), offset: tag_at });
    }
    let matrix = read_csr(&mut r, n)?;
    let lambda = r.f64()?;
    if !r.at_end() {
        return Err(r.error("trailing bytes"));
    }
    let lap = Laplacian {
        matrix,
        lambda_max: if lambda.is_nan() { None } else { Some(lambda) },
        rescaled: false,
        lambda_warning: false,
    };
    Ok((graph, Some(lap)))
}
