//! SE(2) and SO(3) elements, closed-form logarithms and the log-norm
//! distance.
//!
//! Elements are kept both as parameters and as 3×3 matrices. Products,
//! inverses and logarithms work on the matrices; parameters are re-extracted
//! canonically after every operation.
//!
//! Lie algebra coordinates `(c1, c2, c3)` are expressed in the left-invariant
//! basis
//!
//! * SE(2): `A1` forward translation, `A2` sideways translation, `A3` rotation;
//! * SO(3): `A1` rotation about y, `A2` rotation about z, `A3` rotation about x.
//!
//! For SO(3) the reference point of the sphere is the north pole `e_z`, so
//! `A2` is the generator that fixes it (the orientation direction), and `A1`
//! moves the reference point towards `+x`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Below this angle the closed forms switch to their series expansions.
pub const SMALL_ANGLE: f64 = 1e-6;

/// SO(3) switches to the symmetric-part axis recovery when `tr(G) <= -1 + NEAR_PI_TRACE`.
pub const NEAR_PI_TRACE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    Se2,
    So3,
}

/// Wraps an angle to `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let mut t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        t -= 2.0 * PI;
    }
    t
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rot_y(b: f64) -> Matrix3<f64> {
    let (s, c) = b.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// The orientation offset by π. For SE(2) it is the planar rotation by π, for
/// SO(3) the rotation `R_z(π)` acting on the orientation angle from the right.
/// Both are `diag(-1, -1, 1)`, and the offsets +π and −π coincide.
fn half_turn() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    kind: GroupKind,
    params: [f64; 3],
    matrix: Matrix3<f64>,
}

impl GroupElement {
    pub fn identity(kind: GroupKind) -> Self {
        match kind {
            GroupKind::Se2 => Self::se2(0.0, 0.0, 0.0),
            GroupKind::So3 => Self::so3(0.0, 0.0, 0.0),
        }
    }

    /// Planar roto-translation `(x, y, θ)`; θ is stored wrapped to `[-π, π)`.
    pub fn se2(x: f64, y: f64, theta: f64) -> Self {
        let theta = wrap_angle(theta);
        let (s, c) = theta.sin_cos();
        GroupElement {
            kind: GroupKind::Se2,
            params: [x, y, theta],
            matrix: Matrix3::new(c, -s, x, s, c, y, 0.0, 0.0, 1.0),
        }
    }

    /// Rotation `R_z(γ) R_y(β) R_z(α)` from ZYZ angles.
    ///
    /// The stored parameters are canonical: `β ∈ [0, π]`, `α, γ ∈ [-π, π)`,
    /// and `γ = 0` at the poles.
    pub fn so3(alpha: f64, beta: f64, gamma: f64) -> Self {
        let matrix = rot_z(gamma) * rot_y(beta) * rot_z(alpha);
        let b = wrap_angle(beta);
        if (0.0..=PI).contains(&b) && b.sin() > 1e-12 {
            GroupElement {
                kind: GroupKind::So3,
                params: [wrap_angle(alpha), b, wrap_angle(gamma)],
                matrix,
            }
        } else {
            Self::from_matrix(GroupKind::So3, matrix)
        }
    }

    /// Element with the given parameters stored verbatim and the matrix built
    /// from them. Used when reading containers so that re-serialization is
    /// byte-identical.
    pub fn from_params(kind: GroupKind, params: [f64; 3]) -> Self {
        let matrix = match kind {
            GroupKind::Se2 => {
                let (s, c) = params[2].sin_cos();
                Matrix3::new(c, -s, params[0], s, c, params[1], 0.0, 0.0, 1.0)
            }
            GroupKind::So3 => rot_z(params[2]) * rot_y(params[1]) * rot_z(params[0]),
        };
        GroupElement { kind, params, matrix }
    }

    /// Builds an element from its matrix, extracting canonical parameters.
    pub fn from_matrix(kind: GroupKind, m: Matrix3<f64>) -> Self {
        let params = match kind {
            GroupKind::Se2 => [m[(0, 2)], m[(1, 2)], wrap_angle(m[(1, 0)].atan2(m[(0, 0)]))],
            GroupKind::So3 => zyz_angles(&m),
        };
        GroupElement { kind, params, matrix: m }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    /// `(x, y, θ)` for SE(2), `(α, β, γ)` for SO(3).
    pub fn params(&self) -> [f64; 3] {
        self.params
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    /// The orientation parameter (θ or α).
    pub fn orientation(&self) -> f64 {
        match self.kind {
            GroupKind::Se2 => self.params[2],
            GroupKind::So3 => self.params[0],
        }
    }

    /// Point of the homogeneous space: `(x, y, 0)` in the plane, or the image
    /// of the north pole on the unit sphere.
    pub fn position(&self) -> [f64; 3] {
        match self.kind {
            GroupKind::Se2 => [self.params[0], self.params[1], 0.0],
            GroupKind::So3 => [self.matrix[(0, 2)], self.matrix[(1, 2)], self.matrix[(2, 2)]],
        }
    }

    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        if self.kind != other.kind {
            return Err(Error::KindMismatch(self.kind, other.kind));
        }
        Ok(Self::from_matrix(self.kind, self.matrix * other.matrix))
    }

    pub fn inverse(&self) -> GroupElement {
        Self::from_matrix(self.kind, inverse_matrix(self.kind, &self.matrix))
    }

    /// Principal logarithm in the left-invariant basis.
    pub fn log(&self) -> AlgebraVector {
        log_matrix(self.kind, &self.matrix)
    }
}

fn inverse_matrix(kind: GroupKind, m: &Matrix3<f64>) -> Matrix3<f64> {
    match kind {
        GroupKind::So3 => m.transpose(),
        GroupKind::Se2 => {
            let (c, s) = (m[(0, 0)], m[(1, 0)]);
            let (x, y) = (m[(0, 2)], m[(1, 2)]);
            Matrix3::new(c, s, -(c * x + s * y), -s, c, s * x - c * y, 0.0, 0.0, 1.0)
        }
    }
}

fn zyz_angles(m: &Matrix3<f64>) -> [f64; 3] {
    let cb = m[(2, 2)].clamp(-1.0, 1.0);
    let sb = m[(0, 2)].hypot(m[(1, 2)]);
    let beta = sb.atan2(cb);
    if sb > 1e-12 {
        let gamma = m[(1, 2)].atan2(m[(0, 2)]);
        let alpha = m[(2, 1)].atan2(-m[(2, 0)]);
        [wrap_angle(alpha), beta, wrap_angle(gamma)]
    } else if cb > 0.0 {
        // north pole: G = R_z(α + γ), gauge γ = 0
        [wrap_angle(m[(1, 0)].atan2(m[(0, 0)])), 0.0, 0.0]
    } else {
        // south pole: G = R_z(-α) R_y(π), gauge γ = 0
        [wrap_angle(m[(1, 0)].atan2(m[(1, 1)])), PI, 0.0]
    }
}

/// Coordinates `(c1, c2, c3)` of a Lie algebra element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraVector(pub [f64; 3]);

impl AlgebraVector {
    pub fn zero() -> Self {
        AlgebraVector([0.0; 3])
    }

    /// The 3×3 matrix `c1 A1 + c2 A2 + c3 A3`.
    pub fn hat(&self, kind: GroupKind) -> Matrix3<f64> {
        let [c1, c2, c3] = self.0;
        match kind {
            GroupKind::Se2 => Matrix3::new(0.0, -c3, c1, c3, 0.0, c2, 0.0, 0.0, 0.0),
            GroupKind::So3 => Matrix3::new(0.0, -c2, c1, c2, 0.0, -c3, -c1, c3, 0.0),
        }
    }
}

fn log_matrix(kind: GroupKind, m: &Matrix3<f64>) -> AlgebraVector {
    match kind {
        GroupKind::Se2 => se2_log_params(m[(0, 2)], m[(1, 2)], m[(1, 0)].atan2(m[(0, 0)])),
        GroupKind::So3 => so3_log_matrix(m),
    }
}

/// `(θ/2)·cot(θ/2)`, with its series below [`SMALL_ANGLE`].
fn half_angle_cot(theta: f64) -> f64 {
    if theta.abs() < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 - t2 / 12.0 - t2 * t2 / 720.0
    } else {
        let h = 0.5 * theta;
        h / h.tan()
    }
}

fn se2_log_params(x: f64, y: f64, theta: f64) -> AlgebraVector {
    let h = 0.5 * theta;
    let hc = half_angle_cot(theta);
    AlgebraVector([h * y + hc * x, -h * x + hc * y, theta])
}

/// Closed-form SE(2) logarithm `(c1, c2, c3)` with
/// `c1 = (θ/2)(y + x cot(θ/2))`, `c2 = (θ/2)(−x + y cot(θ/2))`, `c3 = θ`.
pub fn se2_log(g: &GroupElement) -> AlgebraVector {
    assert_eq!(g.kind, GroupKind::Se2, "se2_log on {:?}", g.kind);
    let [x, y, theta] = g.params;
    se2_log_params(x, y, theta)
}

/// Closed-form SO(3) logarithm via the antisymmetric part of the rotation.
pub fn so3_log(g: &GroupElement) -> AlgebraVector {
    assert_eq!(g.kind, GroupKind::So3, "so3_log on {:?}", g.kind);
    so3_log_matrix(&g.matrix)
}

fn so3_log_matrix(m: &Matrix3<f64>) -> AlgebraVector {
    // axis-angle vector in xyz, from the antisymmetric part
    let v = Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    );
    let trace = m.trace();
    let sin_t = v.norm();
    let cos_t = 0.5 * (trace - 1.0);
    let theta = sin_t.atan2(cos_t);

    let w = if trace <= -1.0 + NEAR_PI_TRACE {
        // (G + Gᵀ)/2 = cosθ·I + (1 − cosθ)·aaᵀ
        let sym = 0.5 * (m + m.transpose());
        let outer = (sym - Matrix3::identity() * cos_t) / (1.0 - cos_t);
        let k = (0..3)
            .max_by(|&i, &j| outer[(i, i)].total_cmp(&outer[(j, j)]))
            .unwrap_or(0);
        let mut axis: Vector3<f64> = outer.column(k).into();
        axis /= axis.norm();
        if axis.dot(&v) < 0.0 {
            axis = -axis;
        }
        axis * theta
    } else if theta < SMALL_ANGLE {
        v * (1.0 + theta * theta / 6.0)
    } else {
        v * (theta / sin_t)
    };
    // basis order: A1 = y, A2 = z, A3 = x
    AlgebraVector([w.y, w.z, w.x])
}

/// Torsion-free logarithm used for isotropic sphere graphs: the logarithm of
/// the rotation with angles `(−γ, β, γ)`, i.e. with the orientation angle of
/// `g` replaced so that the generator fixing the reference point drops out.
pub fn sphere_log(g: &GroupElement) -> AlgebraVector {
    assert_eq!(g.kind, GroupKind::So3, "sphere_log on {:?}", g.kind);
    let [_, beta, gamma] = g.params;
    let m = rot_z(gamma) * rot_y(beta) * rot_z(-gamma);
    let mut c = so3_log_matrix(&m);
    // the axis lies in the xy-plane; drop rounding noise
    c.0[1] = 0.0;
    c
}

/// Which algebra component receives which metric weight for SO(3).
///
/// Entries are component indices for the forward (weight 1), sideways
/// (weight ε⁻²) and orientation (weight ξ²) roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct So3Layout {
    pub forward: usize,
    pub sideways: usize,
    pub orientation: usize,
}

impl Default for So3Layout {
    fn default() -> Self {
        So3Layout { forward: 0, sideways: 2, orientation: 1 }
    }
}

/// Diagonal left-invariant metric `diag(1, ε⁻², ξ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    epsilon: f64,
    xi: f64,
    so3_layout: So3Layout,
}

impl Metric {
    pub fn new(epsilon: f64, xi: f64) -> Result<Self> {
        Self::with_layout(epsilon, xi, So3Layout::default())
    }

    pub fn with_layout(epsilon: f64, xi: f64, so3_layout: So3Layout) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(crate::error::arg(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(xi.is_finite() && xi > 0.0) {
            return Err(crate::error::arg(format!("xi must be positive, got {xi}")));
        }
        let mut roles = [so3_layout.forward, so3_layout.sideways, so3_layout.orientation];
        roles.sort_unstable();
        if roles != [0, 1, 2] {
            return Err(crate::error::arg("SO(3) layout must be a permutation of 0, 1, 2"));
        }
        let m = Metric { epsilon, xi, so3_layout };
        if m.role_weights().iter().any(|w| !w.is_finite()) {
            return Err(crate::error::arg("metric weights overflow"));
        }
        Ok(m)
    }

    pub fn isotropic() -> Self {
        Metric { epsilon: 1.0, xi: 1.0, so3_layout: So3Layout::default() }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn so3_layout(&self) -> So3Layout {
        self.so3_layout
    }

    /// `(1, ε⁻², ξ²)`: forward, sideways and orientation weights.
    pub fn role_weights(&self) -> [f64; 3] {
        [1.0, 1.0 / (self.epsilon * self.epsilon), self.xi * self.xi]
    }

    /// Weights indexed by algebra component for the given group.
    pub fn weights(&self, kind: GroupKind) -> [f64; 3] {
        let r = self.role_weights();
        match kind {
            GroupKind::Se2 => r,
            GroupKind::So3 => {
                let l = self.so3_layout;
                let mut w = [0.0; 3];
                w[l.forward] = r[0];
                w[l.sideways] = r[1];
                w[l.orientation] = r[2];
                w
            }
        }
    }
}

/// `sqrt(uᵀ R u)` for the diagonal metric `R`.
pub fn metric_norm(u: &AlgebraVector, m: &Metric, kind: GroupKind) -> f64 {
    let w = m.weights(kind);
    (0..3).map(|i| w[i] * u.0[i] * u.0[i]).sum::<f64>().sqrt()
}

/// Log-norm approximation of the left-invariant distance, minimised over the
/// orientation offsets {−π, 0, +π}.
pub fn distance(g: &GroupElement, h: &GroupElement, m: &Metric) -> f64 {
    assert_eq!(g.kind, h.kind, "distance between different groups");
    if g.matrix == h.matrix {
        return 0.0;
    }
    relative_distance(g.kind, &relative(g, h), m)
}

/// Distance without the π-periodic offsets (plain log-norm).
pub fn plain_distance(g: &GroupElement, h: &GroupElement, m: &Metric) -> f64 {
    assert_eq!(g.kind, h.kind, "distance between different groups");
    metric_norm(&log_matrix(g.kind, &relative(g, h)), m, g.kind)
}

/// Distance on the sphere through the torsion-free logarithm.
pub fn sphere_distance(g: &GroupElement, h: &GroupElement, m: &Metric) -> f64 {
    assert_eq!(g.kind, GroupKind::So3, "sphere distance needs SO(3) elements");
    assert_eq!(h.kind, GroupKind::So3, "sphere distance needs SO(3) elements");
    let rel = GroupElement::from_matrix(GroupKind::So3, relative(g, h));
    metric_norm(&sphere_log(&rel), m, GroupKind::So3)
}

fn relative(g: &GroupElement, h: &GroupElement) -> Matrix3<f64> {
    inverse_matrix(g.kind, &g.matrix) * h.matrix
}

fn relative_distance(kind: GroupKind, rel: &Matrix3<f64>, m: &Metric) -> f64 {
    let d0 = metric_norm(&log_matrix(kind, rel), m, kind);
    // +π and −π give the same matrix
    let d1 = metric_norm(&log_matrix(kind, &(rel * half_turn())), m, kind);
    d0.min(d1)
}
