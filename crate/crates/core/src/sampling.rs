//! Vertex sampling on the groups: regular SE(2) / ℝ² grids over `[0, 1)²`
//! and icosahedral SO(3) / S² grids.
//!
//! Vertex ids follow one layout everywhere:
//! `id = orientation_index · |V_s| + spatial_index`. On planar grids the
//! spatial index is `j · nx + i` for the point `(i / nx, j / ny)`.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;

use crate::error::{arg, Result};
use crate::lie_group::{GroupElement, GroupKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridKind {
    Se2Grid,
    So3Icosahedral,
    R2Grid,
    S2Icosahedral,
}

impl GridKind {
    pub fn group(&self) -> GroupKind {
        match self {
            GridKind::Se2Grid | GridKind::R2Grid => GroupKind::Se2,
            GridKind::So3Icosahedral | GridKind::S2Icosahedral => GroupKind::So3,
        }
    }

    /// Planar or spherical base space without an orientation axis.
    pub fn is_isotropic(&self) -> bool {
        matches!(self, GridKind::R2Grid | GridKind::S2Icosahedral)
    }

    pub fn is_planar(&self) -> bool {
        matches!(self, GridKind::Se2Grid | GridKind::R2Grid)
    }

    pub fn code(&self) -> u8 {
        match self {
            GridKind::Se2Grid => 0,
            GridKind::So3Icosahedral => 1,
            GridKind::R2Grid => 2,
            GridKind::S2Icosahedral => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => GridKind::Se2Grid,
            1 => GridKind::So3Icosahedral,
            2 => GridKind::R2Grid,
            3 => GridKind::S2Icosahedral,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            GridKind::Se2Grid => "se2",
            GridKind::So3Icosahedral => "so3",
            GridKind::R2Grid => "r2",
            GridKind::S2Icosahedral => "s2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub kind: GridKind,
    pub nx: usize,
    pub ny: usize,
    pub level: usize,
    pub n_orient: usize,
}

impl GridSpec {
    pub fn se2(nx: usize, ny: usize, n_orient: usize) -> Self {
        GridSpec { kind: GridKind::Se2Grid, nx, ny, level: 0, n_orient }
    }

    pub fn r2(nx: usize, ny: usize) -> Self {
        GridSpec { kind: GridKind::R2Grid, nx, ny, level: 0, n_orient: 1 }
    }

    pub fn so3(level: usize, n_orient: usize) -> Self {
        GridSpec { kind: GridKind::So3Icosahedral, nx: 0, ny: 0, level, n_orient }
    }

    pub fn s2(level: usize) -> Self {
        GridSpec { kind: GridKind::S2Icosahedral, nx: 0, ny: 0, level, n_orient: 1 }
    }

    /// `|V_s|`.
    pub fn n_spatial(&self) -> usize {
        if self.kind.is_planar() {
            self.nx * self.ny
        } else {
            icosahedral_count(self.level)
        }
    }

    /// `|V| = |V_s|·|V_o|`.
    pub fn n_vertices(&self) -> usize {
        self.n_spatial() * self.n_orient
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_orient == 0 {
            return Err(arg("orientation count must be at least 1"));
        }
        if self.kind.is_isotropic() && self.n_orient != 1 {
            return Err(arg("isotropic grids have a single orientation"));
        }
        if self.kind.is_planar() && (self.nx == 0 || self.ny == 0) {
            return Err(arg("grid dimensions must be at least 1"));
        }
        if !self.kind.is_planar() && self.level > 12 {
            return Err(arg(format!("icosahedral level {} too large", self.level)));
        }
        Ok(())
    }

    /// Builds the vertex set for this spec.
    pub fn sample(&self) -> Result<VertexSet> {
        self.validate()?;
        match self.kind {
            GridKind::Se2Grid => grid_se2(self.nx, self.ny, self.n_orient),
            GridKind::R2Grid => grid_r2(self.nx, self.ny),
            GridKind::So3Icosahedral => grid_so3(self.level, self.n_orient),
            GridKind::S2Icosahedral => grid_s2(self.level),
        }
    }
}

/// `10·4^level + 2`.
pub fn icosahedral_count(level: usize) -> usize {
    10 * 4usize.pow(level as u32) + 2
}

/// Orientation sample `k` of `n`: `−π/2 + k·π/n`.
pub fn orientation_angle(k: usize, n_orient: usize) -> f64 {
    -FRAC_PI_2 + k as f64 * PI / n_orient as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    pub spec: GridSpec,
    pub elements: Vec<GroupElement>,
}

impl VertexSet {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// True when the set still holds every grid vertex in canonical order.
    pub fn is_full_grid(&self) -> bool {
        self.elements.len() == self.spec.n_vertices()
    }

    pub fn n_spatial(&self) -> usize {
        self.spec.n_spatial()
    }

    pub fn flat_id(&self, spatial: usize, orient: usize) -> usize {
        orient * self.n_spatial() + spatial
    }

    /// `(spatial_index, orientation_index)` of a flat id.
    pub fn split_id(&self, id: usize) -> (usize, usize) {
        let ns = self.n_spatial();
        (id % ns, id / ns)
    }
}

pub fn grid_se2(nx: usize, ny: usize, n_orient: usize) -> Result<VertexSet> {
    if nx == 0 || ny == 0 || n_orient == 0 {
        return Err(arg(format!("zero grid dimension in {nx}x{ny}x{n_orient}")));
    }
    planar_grid(GridSpec::se2(nx, ny, n_orient))
}

pub fn grid_r2(nx: usize, ny: usize) -> Result<VertexSet> {
    if nx == 0 || ny == 0 {
        return Err(arg(format!("zero grid dimension in {nx}x{ny}")));
    }
    planar_grid(GridSpec::r2(nx, ny))
}

fn planar_grid(spec: GridSpec) -> Result<VertexSet> {
    let mut elements = Vec::with_capacity(spec.n_vertices());
    for k in 0..spec.n_orient {
        let theta = orientation_angle(k, spec.n_orient);
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                elements.push(GroupElement::se2(
                    i as f64 / spec.nx as f64,
                    j as f64 / spec.ny as f64,
                    theta,
                ));
            }
        }
    }
    Ok(VertexSet { spec, elements })
}

/// Icosphere subdivision hierarchy. Vertices of level `l − 1` keep their ids
/// as a prefix of level `l`; every later vertex is the midpoint of a level
/// `l − 1` edge, recorded in `midpoint_parents`.
#[derive(Debug, Clone)]
pub struct Icosphere {
    pub points: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    /// `midpoint_parents[l][m]` are the two endpoints of the coarse edge that
    /// produced vertex `icosahedral_count(l − 1) + m` at level `l` (`l ≥ 1`).
    pub midpoint_parents: Vec<Vec<(usize, usize)>>,
}

impl Icosphere {
    pub fn new(level: usize) -> Self {
        let (mut points, mut faces) = base_icosahedron();
        let mut midpoint_parents = vec![Vec::new()];
        for _ in 0..level {
            let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
            let mut parents = Vec::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            for &[a, b, c] in &faces {
                let mut mid = |u: usize, v: usize| -> usize {
                    let key = (u.min(v), u.max(v));
                    *cache.entry(key).or_insert_with(|| {
                        let p = Vector3::from(points[u]) + Vector3::from(points[v]);
                        let p = p / p.norm();
                        points.push([p.x, p.y, p.z]);
                        parents.push(key);
                        points.len() - 1
                    })
                };
                let ab = mid(a, b);
                let bc = mid(b, c);
                let ca = mid(c, a);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
            midpoint_parents.push(parents);
        }
        Icosphere { points, faces, midpoint_parents }
    }

    pub fn level(&self) -> usize {
        self.midpoint_parents.len() - 1
    }
}

/// Icosahedron with two vertices on the poles and two rings of five at
/// `z = ±1/√5`.
fn base_icosahedron() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let z = 1.0 / 5f64.sqrt();
    let r = 2.0 * z;
    let mut points = vec![[0.0, 0.0, 1.0]];
    for k in 0..5 {
        let phi = 2.0 * PI * k as f64 / 5.0;
        points.push([r * phi.cos(), r * phi.sin(), z]);
    }
    for k in 0..5 {
        let phi = 2.0 * PI * (k as f64 + 0.5) / 5.0;
        points.push([r * phi.cos(), r * phi.sin(), -z]);
    }
    points.push([0.0, 0.0, -1.0]);

    let mut faces = Vec::with_capacity(20);
    for k in 0..5 {
        let (u0, u1) = (1 + k, 1 + (k + 1) % 5);
        let (l0, l1) = (6 + k, 6 + (k + 1) % 5);
        faces.push([0, u0, u1]);
        faces.push([u0, l0, u1]);
        faces.push([u1, l0, l1]);
        faces.push([11, l1, l0]);
    }
    (points, faces)
}

/// Unit vectors of the level-`level` icosahedral sphere grid.
pub fn icosahedral_sphere(level: usize) -> Vec<[f64; 3]> {
    Icosphere::new(level).points
}

/// ZYZ angles `(β, γ)` placing the north pole at `p`; `γ = 0` at the poles.
pub fn sphere_angles(p: &[f64; 3]) -> (f64, f64) {
    let beta = p[0].hypot(p[1]).atan2(p[2]);
    let gamma = if p[0].hypot(p[1]) > 1e-12 { p[1].atan2(p[0]) } else { 0.0 };
    (beta, gamma)
}

pub fn grid_so3(level: usize, n_orient: usize) -> Result<VertexSet> {
    if n_orient == 0 {
        return Err(arg("orientation count must be at least 1"));
    }
    sphere_grid(GridSpec::so3(level, n_orient))
}

pub fn grid_s2(level: usize) -> Result<VertexSet> {
    sphere_grid(GridSpec::s2(level))
}

fn sphere_grid(spec: GridSpec) -> Result<VertexSet> {
    let points = icosahedral_sphere(spec.level);
    let mut elements = Vec::with_capacity(points.len() * spec.n_orient);
    for k in 0..spec.n_orient {
        let alpha = orientation_angle(k, spec.n_orient);
        for p in &points {
            let (beta, gamma) = sphere_angles(p);
            elements.push(GroupElement::so3(alpha, beta, gamma));
        }
    }
    Ok(VertexSet { spec, elements })
}
