//! Browser bindings: impulse diffusion, group distance fields and eigenmaps
//! on an SE(2) grid graph.
//!
//! Fields are returned as flat `Float64Array`s, vertex `id = slice·nx² + j·nx + i`.

use liegraph::graph::{self, LambdaMode, Orientation};
use liegraph::lie_group::distance;
use liegraph::spectral::{self, EigenOptions, EigenSystem};
use liegraph::{GraphConfig, GridSpec, GroupElement, Laplacian, ManifoldGraph, Metric};
use nalgebra::DMatrix;
use wasm_bindgen::prelude::*;

/// Lanczos above this size keeps eigenmaps interactive.
const DENSE_CAP: usize = 400;

#[wasm_bindgen]
pub struct Se2Demo {
    graph: ManifoldGraph,
    lap: Laplacian,
    eigen: Option<EigenSystem>,
}

impl Se2Demo {
    pub fn build(nx: usize, n_orient: usize, epsilon: f64, alpha: f64) -> liegraph::Result<Self> {
        let graph = GraphConfig::new(GridSpec::se2(nx, nx, n_orient), epsilon, Orientation::Alpha(alpha)).build()?;
        let mut lap = graph::laplacian(&graph);
        lap.lambda_max = Some(graph::lambda_max(&lap, LambdaMode::default())?.value);
        Ok(Se2Demo { graph, lap, eigen: None })
    }

    fn nx(&self) -> usize {
        self.graph.vertices.spec.nx
    }

    /// `exp(−τΔ)` applied to a unit impulse at pixel `(i, j)` of `slice`.
    pub fn diffusion(&self, i: usize, j: usize, slice: usize, tau: f64) -> liegraph::Result<Vec<f64>> {
        let nx = self.nx();
        if i >= nx || j >= nx || slice >= self.graph.vertices.spec.n_orient {
            return Err(liegraph::Error::Argument(format!("impulse ({i}, {j}, {slice}) outside the grid")));
        }
        let mut x = DMatrix::zeros(self.graph.n_vertices(), 1);
        x[(slice * nx * nx + j * nx + i, 0)] = 1.0;
        Ok(spectral::heat_diffuse(&self.lap, &x, tau, 30)?.as_slice().to_vec())
    }

    /// Eigenvector `k` (ascending eigenvalue), computing up to `k + 1` pairs.
    pub fn eigenpair(&mut self, k: usize) -> liegraph::Result<(f64, Vec<f64>)> {
        if self.eigen.as_ref().is_none_or(|e| e.k() <= k) {
            let want = (k + 1).max(8).min(self.graph.n_vertices());
            let opts = EigenOptions { dense_cap: DENSE_CAP, ..EigenOptions::default() };
            self.eigen = Some(spectral::eigensystem_with(&self.lap, want, opts)?);
        }
        let es = self.eigen.as_ref().unwrap();
        if k >= es.k() {
            return Err(liegraph::Error::Argument(format!("eigenvector {k} out of range")));
        }
        Ok((es.values[k], es.vectors.column(k).iter().copied().collect()))
    }

    pub fn rotation_error(&self) -> liegraph::Result<f64> {
        let perm = spectral::rotation_permutation(&self.graph.vertices.spec, 1)?;
        spectral::equivariance_error(&self.lap, &perm)
    }
}

fn js(e: liegraph::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
impl Se2Demo {
    /// `nx × nx × n_orient` grid; ε is the flag value itself (ε² = 0.1 ↔ 0.316).
    #[wasm_bindgen(constructor)]
    pub fn new(nx: usize, n_orient: usize, epsilon: f64, alpha: f64) -> Result<Se2Demo, JsError> {
        Self::build(nx, n_orient, epsilon, alpha).map_err(js)
    }

    #[wasm_bindgen(js_name = nVertices)]
    pub fn n_vertices(&self) -> usize {
        self.graph.n_vertices()
    }

    #[wasm_bindgen(js_name = nEdges)]
    pub fn n_edges(&self) -> usize {
        self.graph.n_edges()
    }

    /// Fraction of neighbours within the same orientation slice.
    #[wasm_bindgen(js_name = sameSliceRatio)]
    pub fn same_slice_ratio(&self) -> f64 {
        self.graph.neighbor_ratio().0
    }

    #[wasm_bindgen(js_name = rotationError)]
    pub fn rotation_error_js(&self) -> Result<f64, JsError> {
        self.rotation_error().map_err(js)
    }

    pub fn diffuse(&self, i: usize, j: usize, slice: usize, tau: f64) -> Result<Vec<f64>, JsError> {
        self.diffusion(i, j, slice, tau).map_err(js)
    }

    pub fn eigenvector(&mut self, k: usize) -> Result<Vec<f64>, JsError> {
        self.eigenpair(k).map(|p| p.1).map_err(js)
    }

    pub fn eigenvalue(&mut self, k: usize) -> Result<f64, JsError> {
        self.eigenpair(k).map(|p| p.0).map_err(js)
    }
}

/// Group distance from `(0.5, 0.5, θ0)` to `(x, y, θ)` on a `res × res`
/// raster of `[0, 1)²`, row-major with `y` increasing downwards.
pub fn distance_raster(epsilon: f64, xi: f64, theta0: f64, theta: f64, res: usize) -> liegraph::Result<Vec<f64>> {
    let m = Metric::new(epsilon, xi)?;
    let g = GroupElement::se2(0.5, 0.5, theta0);
    let step = 1.0 / res as f64;
    let mut out = Vec::with_capacity(res * res);
    for r in 0..res {
        for c in 0..res {
            let h = GroupElement::se2((c as f64 + 0.5) * step, 1.0 - (r as f64 + 0.5) * step, theta);
            out.push(distance(&g, &h, &m));
        }
    }
    Ok(out)
}

#[wasm_bindgen(js_name = distanceField)]
pub fn distance_field(epsilon: f64, xi: f64, theta0: f64, theta: f64, res: usize) -> Result<Vec<f64>, JsError> {
    distance_raster(epsilon, xi, theta0, theta, res).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diffusion_keeps_mass_near_one() {
        let d = Se2Demo::build(8, 4, 0.1f64.sqrt(), 1.0).unwrap();
        let y = d.diffusion(3, 4, 1, 2.0).unwrap();
        assert_eq!(y.len(), 256);
        assert!(y.iter().sum::<f64>() > 0.5);
        let peak = y.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert_eq!(peak, 64 + 4 * 8 + 3);
        assert!(d.diffusion(8, 0, 0, 1.0).is_err());
    }

    #[test]
    fn eigenpairs_grow_on_demand() {
        let mut d = Se2Demo::build(8, 4, 0.1f64.sqrt(), 1.0).unwrap();
        let (l0, v0) = d.eigenpair(0).unwrap();
        assert!(l0.abs() < 1e-9);
        assert_eq!(v0.len(), 256);
        let (l10, _) = d.eigenpair(10).unwrap();
        assert!(l10 >= l0);
        assert!(d.eigenpair(256).is_err());
        assert!(d.rotation_error().unwrap() < 1e-9);
    }

    #[test]
    fn distance_raster_is_zero_at_the_reference() {
        let f = distance_raster(0.3, 1.0, 0.0, 0.0, 5).unwrap();
        assert!(f[12] < 1e-12);
        // forward (x) is cheaper than sideways (y) when ε < 1
        assert!(f[13] < f[7]);
    }
}
