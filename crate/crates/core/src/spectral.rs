//! Spectral operators on manifold graphs: Chebyshev filtering, heat
//! diffusion, eigenmaps, the graph Fourier transform and the
//! permutation-equivariance audit.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{arg, shape, Error, Result};
use crate::graph::{lambda_max, LambdaMode, Laplacian};
use crate::io::{Reader, Writer};
use crate::rng::Rng64;
use crate::sampling::{GridKind, GridSpec, VertexSet};

/// Vertex features, `|V| × d`.
pub type Signal = DMatrix<f64>;

/// Filter coefficients `Θ_0 … Θ_{R−1}`, each `d_in × d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebCoeffs {
    theta: Vec<DMatrix<f64>>,
}

impl ChebCoeffs {
    pub fn new(theta: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = theta.first().ok_or_else(|| arg("need at least one Chebyshev order"))?;
        let (di, dout) = first.shape();
        if theta.iter().any(|t| t.shape() != (di, dout)) {
            return Err(shape("all orders must share one d_in × d_out shape"));
        }
        if theta.iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(arg("non-finite filter coefficient"));
        }
        Ok(ChebCoeffs { theta })
    }

    pub fn zeros(order: usize, d_in: usize, d_out: usize) -> Self {
        ChebCoeffs { theta: vec![DMatrix::zeros(d_in, d_out); order.max(1)] }
    }

    /// Uniform in `±bound`.
    pub fn random(order: usize, d_in: usize, d_out: usize, bound: f64, rng: &mut Rng64) -> Self {
        let theta = (0..order.max(1))
            .map(|_| DMatrix::from_fn(d_in, d_out, |_, _| rng.uniform(-bound, bound)))
            .collect();
        ChebCoeffs { theta }
    }

    pub fn order(&self) -> usize {
        self.theta.len()
    }

    pub fn d_in(&self) -> usize {
        self.theta[0].nrows()
    }

    pub fn d_out(&self) -> usize {
        self.theta[0].ncols()
    }

    pub fn theta(&self) -> &[DMatrix<f64>] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [DMatrix<f64>] {
        &mut self.theta
    }
}

/// `z_0 = x`, `z_1 = Δ̃x`, `z_j = 2Δ̃z_{j−1} − z_{j−2}` for `j < order`.
pub fn cheb_basis(lt: &Laplacian, x: &Signal, order: usize) -> Vec<Signal> {
    let mut z = Vec::with_capacity(order);
    z.push(x.clone());
    if order > 1 {
        z.push(lt.matrix.mul_dense(x));
    }
    for j in 2..order {
        let next = lt.matrix.mul_dense(&z[j - 1]) * 2.0 - &z[j - 2];
        z.push(next);
    }
    z
}

/// `y = Σ_j z_j Θ_j` on a rescaled Laplacian.
pub fn cheb_apply(lt: &Laplacian, x: &Signal, coeffs: &ChebCoeffs) -> Result<Signal> {
    if !lt.rescaled {
        return Err(Error::State("Chebyshev filtering needs the rescaled Laplacian".into()));
    }
    if x.nrows() != lt.n() || x.ncols() != coeffs.d_in() {
        return Err(shape(format!(
            "signal is {}×{}, expected {}×{}",
            x.nrows(),
            x.ncols(),
            lt.n(),
            coeffs.d_in()
        )));
    }
    let z = cheb_basis(lt, x, coeffs.order());
    let mut y = DMatrix::zeros(x.nrows(), coeffs.d_out());
    for (zj, tj) in z.iter().zip(coeffs.theta()) {
        y += zj * tj;
    }
    Ok(y)
}

/// Chebyshev coefficients `a_0 … a_{order−1}` of `f` on `[−1, 1]`, from a
/// discrete cosine transform on `nodes` Chebyshev points. The series is
/// `f ≈ a_0/2 + Σ_{k≥1} a_k T_k`; the returned `a_0` is already halved.
pub fn chebyshev_series(f: impl Fn(f64) -> f64, order: usize, nodes: usize) -> Vec<f64> {
    let m = nodes.max(order);
    let samples: Vec<(f64, f64)> = (0..m)
        .map(|j| {
            let t = std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
            (t, f(t.cos()))
        })
        .collect();
    let mut a: Vec<f64> = (0..order)
        .map(|k| 2.0 / m as f64 * samples.iter().map(|&(t, fx)| fx * (k as f64 * t).cos()).sum::<f64>())
        .collect();
    a[0] *= 0.5;
    a
}

/// Approximates `exp(−τΔ)x` by a Chebyshev expansion of
/// `t ↦ exp(−τ(λ_max/2)(t + 1))` applied through the three-term recurrence.
/// `l` is the unrescaled Laplacian; its stored λ_max is used when present.
pub fn heat_diffuse(l: &Laplacian, x: &Signal, tau: f64, order: usize) -> Result<Signal> {
    if order < 1 {
        return Err(arg("expansion order must be at least 1"));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(arg(format!("diffusion time must be non-negative, got {tau}")));
    }
    if l.rescaled {
        return Err(Error::State("heat diffusion takes the unrescaled Laplacian".into()));
    }
    if x.nrows() != l.n() {
        return Err(shape(format!("signal has {} rows, graph has {} vertices", x.nrows(), l.n())));
    }
    if tau == 0.0 {
        return Ok(x.clone());
    }
    let lmax = match l.lambda_max {
        Some(v) => v,
        None => lambda_max(l, LambdaMode::default())?.value,
    };
    let lt = crate::graph::rescale(l, lmax)?;
    let a = chebyshev_series(|t| (-tau * 0.5 * lmax * (t + 1.0)).exp(), order, 4 * order + 32);
    let z = cheb_basis(&lt, x, order);
    let mut y = DMatrix::zeros(x.nrows(), x.ncols());
    for (zk, ak) in z.iter().zip(&a) {
        y += zk * *ak;
    }
    Ok(y)
}

/// Smallest eigenpairs of a Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Ascending.
    pub values: Vec<f64>,
    /// `|V| × k`, orthonormal columns.
    pub vectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn is_complete(&self) -> bool {
        self.k() == self.vectors.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Dense solver up to this many vertices, Lanczos above.
    pub dense_cap: usize,
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { dense_cap: 5000, tol: 1e-8, max_restarts: 500 }
    }
}

pub fn eigensystem(l: &Laplacian, k: usize) -> Result<EigenSystem> {
    eigensystem_with(l, k, EigenOptions::default())
}

pub fn eigensystem_with(l: &Laplacian, k: usize, opts: EigenOptions) -> Result<EigenSystem> {
    let n = l.n();
    if k > n {
        return Err(arg(format!("requested {k} eigenpairs of a {n}-vertex graph")));
    }
    let mut es = if n <= opts.dense_cap {
        dense_eigensystem(&l.matrix.to_dense(), k)
    } else {
        lanczos_smallest(l, k, opts)?
    };
    fix_signs(&mut es.vectors);
    Ok(es)
}

/// `k` smallest eigenpairs of a dense symmetric matrix, ascending.
pub fn dense_eigensystem(a: &DMatrix<f64>, k: usize) -> EigenSystem {
    let se = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    order.truncate(k);
    let values = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), k, |r, c| se.eigenvectors[(r, order[c])]);
    EigenSystem { values, vectors }
}

/// First clearly nonzero entry of every column made positive.
fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let big = col.amax();
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-8 * big).copied() {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Thick-restart Lanczos with full reorthogonalization on `2I − Δ`, whose
/// largest eigenpairs are the smallest of `Δ`.
fn lanczos_smallest(l: &Laplacian, k: usize, opts: EigenOptions) -> Result<EigenSystem> {
    let n = l.n();
    let apply = |x: &DVector<f64>| -> DVector<f64> {
        let lx = DVector::from_vec(l.matrix.mul_vec(x.as_slice()));
        x * 2.0 - lx
    };
    let keep = (k + 8).min(n);
    let max_dim = (2 * keep + 20).min(n);

    let mut rng = Rng64::new(0x1a2c_20a5);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut images: Vec<DVector<f64>> = Vec::new();
    let mut next = DVector::from_fn(n, |_, _| rng.uniform(-1.0, 1.0));

    for _ in 0..opts.max_restarts {
        while basis.len() < max_dim {
            let q = match orthonormalize(&basis, next.clone()) {
                Some(q) => q,
                // invariant subspace reached: continue from a fresh direction
                None => match orthonormalize(&basis, DVector::from_fn(n, |_, _| rng.uniform(-1.0, 1.0))) {
                    Some(q) => q,
                    None => break,
                },
            };
            next = apply(&q);
            images.push(next.clone());
            basis.push(q);
        }
        let m = basis.len();
        let h = DMatrix::from_fn(m, m, |i, j| 0.5 * (basis[i].dot(&images[j]) + basis[j].dot(&images[i])));
        let se = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| se.eigenvalues[j].total_cmp(&se.eigenvalues[i]));
        let take = keep.min(m);
        let mut ritz = Vec::with_capacity(take);
        let mut ritz_img = Vec::with_capacity(take);
        let mut worst = 0.0f64;
        let mut worst_resid = DVector::zeros(n);
        for (rank, &c) in order.iter().take(take).enumerate() {
            let s = se.eigenvectors.column(c);
            let y = basis.iter().zip(s.iter()).fold(DVector::zeros(n), |acc, (b, &w)| acc + b * w);
            let by = images.iter().zip(s.iter()).fold(DVector::zeros(n), |acc, (b, &w)| acc + b * w);
            if rank < k {
                let r = &by - &y * se.eigenvalues[c];
                let rn = r.norm();
                if rn > worst {
                    worst = rn;
                    worst_resid = r;
                }
            }
            ritz.push(y);
            ritz_img.push(by);
        }
        if worst <= opts.tol || m == n {
            let values = order.iter().take(k).map(|&c| 2.0 - se.eigenvalues[c]).collect();
            let vectors = DMatrix::from_fn(n, k, |r, c| ritz[c][r]);
            return Ok(EigenSystem { values, vectors });
        }
        basis = ritz;
        images = ritz_img;
        next = worst_resid;
    }
    Err(Error::State(format!("Lanczos did not converge in {} restarts", opts.max_restarts)))
}

fn orthonormalize(basis: &[DVector<f64>], mut v: DVector<f64>) -> Option<DVector<f64>> {
    let start = v.norm();
    for _ in 0..2 {
        for b in basis {
            let p = b.dot(&v);
            v.axpy(-p, b, 1.0);
        }
    }
    let nv = v.norm();
    if nv <= 1e-10 * start.max(1e-300) {
        return None;
    }
    Some(v / nv)
}

/// Graph Fourier coefficients `Φᵀf`.
pub fn gft(phi: &EigenSystem, f: &Signal) -> Result<DMatrix<f64>> {
    if f.nrows() != phi.vectors.nrows() {
        return Err(shape("signal and eigenbasis sizes differ"));
    }
    Ok(phi.vectors.tr_mul(f))
}

/// Inverse transform `Φf̂`; needs the complete eigenbasis.
pub fn igft(phi: &EigenSystem, coeffs: &DMatrix<f64>) -> Result<Signal> {
    if !phi.is_complete() {
        return Err(arg(format!(
            "inverse transform needs all {} eigenvectors, have {}",
            phi.vectors.nrows(),
            phi.k()
        )));
    }
    if coeffs.nrows() != phi.k() {
        return Err(shape("coefficient count differs from eigenbasis size"));
    }
    Ok(&phi.vectors * coeffs)
}

/// Vertex permutation `perm[i] = image of i` realising `quarter_turns`
/// counter-clockwise quarter turns of a square planar grid about its center,
/// with the orientation axis rolled by `quarter_turns·|V_o|/2` slots (π-wrapped).
pub fn rotation_permutation(spec: &GridSpec, quarter_turns: i64) -> Result<Vec<usize>> {
    if !spec.kind.is_planar() {
        return Err(arg("rotation permutations exist for planar grids only"));
    }
    if spec.nx != spec.ny {
        return Err(arg(format!("grid is {}×{}, quarter turns need a square grid", spec.nx, spec.ny)));
    }
    let q = quarter_turns.rem_euclid(4) as usize;
    let no = spec.n_orient;
    let roll = if spec.kind == GridKind::R2Grid {
        0
    } else {
        if q % 2 == 1 && no % 2 != 0 {
            return Err(arg(format!("odd quarter turns need an even orientation count, got {no}")));
        }
        q * no / 2
    };
    let n = spec.nx;
    let ns = n * n;
    let mut perm = vec![0; ns * no];
    for o in 0..no {
        for j in 0..n {
            for i in 0..n {
                let (mut a, mut b) = (i, j);
                for _ in 0..q {
                    (a, b) = (n - 1 - b, a);
                }
                perm[o * ns + j * n + i] = ((o + roll) % no) * ns + b * n + a;
            }
        }
    }
    Ok(perm)
}

/// `(Px)[perm[i]] = x[i]`.
pub fn permute_rows(perm: &[usize], x: &Signal) -> Signal {
    assert_eq!(perm.len(), x.nrows(), "permutation size");
    let mut y = DMatrix::zeros(x.nrows(), x.ncols());
    for (i, &p) in perm.iter().enumerate() {
        y.set_row(p, &x.row(i));
    }
    y
}

pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    perm.iter().all(|&p| p < seen.len() && !std::mem::replace(&mut seen[p], true))
}

/// `‖PᵀLP − L‖_F / ‖L‖_F`, evaluated on the sparsity patterns.
pub fn equivariance_error(l: &Laplacian, perm: &[usize]) -> Result<f64> {
    let n = l.n();
    if perm.len() != n || !is_permutation(perm) {
        return Err(arg("not a permutation of the vertex set"));
    }
    let mut inv = vec![0; n];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    let m = &l.matrix;
    let mut sq = 0.0;
    for (i, j, v) in m.iter() {
        let pv = m.get(perm[i], perm[j]).unwrap_or(0.0);
        sq += (pv - v) * (pv - v);
        // entries of PᵀLP at positions where L has none
        let (a, b) = (inv[i], inv[j]);
        if m.get(a, b).is_none() {
            sq += v * v;
        }
    }
    let norm = m.frobenius();
    Ok(if norm == 0.0 { sq.sqrt() } else { sq.sqrt() / norm })
}

/// Mass-weighted spatial covariance of one orientation slice, as the ratio
/// of the variance along the slice's forward axis to the perpendicular one.
/// Negative values (approximation noise) are clipped to zero.
pub fn slice_anisotropy(vertices: &VertexSet, values: &[f64], slice: usize) -> Result<f64> {
    if !vertices.spec.kind.is_planar() || !vertices.is_full_grid() {
        return Err(arg("slice anisotropy needs a full planar grid"));
    }
    if values.len() != vertices.len() {
        return Err(shape("one value per vertex expected"));
    }
    let ns = vertices.n_spatial();
    if slice >= vertices.spec.n_orient {
        return Err(arg(format!("slice {slice} out of range")));
    }
    let range = slice * ns..(slice + 1) * ns;
    let theta = vertices.elements[range.start].orientation();
    let pts: Vec<([f64; 3], f64)> = range
        .map(|id| (vertices.elements[id].position(), values[id].max(0.0)))
        .collect();
    let mass: f64 = pts.iter().map(|p| p.1).sum();
    if mass <= 0.0 {
        return Err(arg("slice carries no mass"));
    }
    let mx = pts.iter().map(|(p, w)| w * p[0]).sum::<f64>() / mass;
    let my = pts.iter().map(|(p, w)| w * p[1]).sum::<f64>() / mass;
    let (c, s) = (theta.cos(), theta.sin());
    let (mut along, mut across) = (0.0, 0.0);
    for (p, w) in &pts {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        along += w * u * u;
        across += w * v * v;
    }
    Ok(along / across)
}

pub const CLSG_MAGIC: &[u8; 4] = b"CLSG";
pub const CLSG_VERSION: u32 = 1;

/// CLSG container: magic, version, `|V|` (u64), `d` (u32), row-major f64 values.
pub fn write_signal(x: &Signal) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(CLSG_MAGIC);
    w.u32(CLSG_VERSION);
    w.u64(x.nrows() as u64);
    w.u32(x.ncols() as u32);
    for r in 0..x.nrows() {
        for c in 0..x.ncols() {
            w.f64(x[(r, c)]);
        }
    }
    w.finish()
}

pub fn read_signal(bytes: &[u8]) -> Result<Signal> {
    let mut r = Reader::new(bytes);
    r.magic(CLSG_MAGIC)?;
    r.version(CLSG_VERSION)?;
    let rows = r.u64()? as usize;
    let cols = r.u32()? as usize;
    let count = rows
        .checked_mul(cols)
        .filter(|c| c.checked_mul(8).is_some_and(|b| b <= r.remaining()))
        .ok_or_else(|| r.error(format!("truncated: {rows}×{cols} values")))?;
    let vals = r.f64s(count)?;
    if !r.at_end() {
        return Err(r.error("trailing bytes"));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &vals))
}

/// Full round-trip formatting: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Eigenmap CSV: one row per eigenpair, `k,lambda,v0,…,v{|V|−1}`.
pub fn eigenmap_csv(es: &EigenSystem) -> String {
    let n = es.vectors.nrows();
    let mut out = String::from("k,lambda");
    for i in 0..n {
        out.push_str(&format!(",v{i}"));
    }
    out.push('\n');
    for (k, lam) in es.values.iter().enumerate() {
        out.push_str(&format!("{k},{}", fmt_f64(*lam)));
        for v in es.vectors.column(k).iter() {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Eigenvectors as a CLSG signal (`|V| × k`).
pub fn eigenmap_signal(es: &EigenSystem) -> Vec<u8> {
    write_signal(&es.vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, rescale, GraphConfig, Orientation};
    use crate::sparse::Csr;

    fn cycle(n: usize) -> Laplacian {
        Laplacian::from_adjacency(&Csr::from_triplets(
            n,
            (0..n).flat_map(|i| [(i, (i + 1) % n, 1.0), ((i + 1) % n, i, 1.0)]).collect(),
        ))
    }

    #[test]
    fn cheb_base_cases() {
        let lt = rescale(&cycle(5), 2.0).unwrap();
        let mut rng = Rng64::new(1);
        let x = DMatrix::from_fn(5, 2, |_, _| rng.uniform(-1.0, 1.0));
        let c = ChebCoeffs::random(1, 2, 3, 1.0, &mut rng);
        assert_eq!(cheb_apply(&lt, &x, &c).unwrap(), &x * &c.theta()[0]);

        let c = ChebCoeffs::new(vec![DMatrix::zeros(2, 2), DMatrix::identity(2, 2)]).unwrap();
        let y = cheb_apply(&lt, &x, &c).unwrap();
        assert!((y - lt.matrix.mul_dense(&x)).abs().max() < 1e-15);

        assert!(matches!(cheb_apply(&lt, &DMatrix::zeros(4, 2), &c), Err(Error::Shape(_))));
        assert!(matches!(cheb_apply(&cycle(5), &x, &c), Err(Error::State(_))));
    }

    #[test]
    fn chebyshev_series_of_polynomial() {
        // t² = (T_0 + T_2)/2
        let a = chebyshev_series(|t| t * t, 4, 16);
        assert!((a[0] - 0.5).abs() < 1e-15 && a[1].abs() < 1e-15);
        assert!((a[2] - 0.5).abs() < 1e-15 && a[3].abs() < 1e-15);
    }

    #[test]
    fn heat_identity_at_zero() {
        let l = cycle(6);
        let x = DMatrix::from_fn(6, 1, |r, _| r as f64);
        assert_eq!(heat_diffuse(&l, &x, 0.0, 30).unwrap(), x);
        assert!(heat_diffuse(&l, &x, 1.0, 0).is_err());
        assert!(heat_diffuse(&l, &x, -1.0, 5).is_err());
    }

    #[test]
    fn eigen_small_cases() {
        let es = eigensystem(&cycle(4), 4).unwrap();
        for (a, b) in es.values.iter().zip([0.0, 1.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(eigensystem(&cycle(4), 5).is_err());
        for c in es.vectors.column_iter() {
            assert!(c.iter().find(|v| v.abs() > 1e-8).unwrap() > &0.0);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let g = GraphConfig::new(GridSpec::se2(6, 6, 4), 0.5, Orientation::Alpha(1.0))
            .with_knn(8)
            .build()
            .unwrap();
        let l = laplacian(&g);
        let dense = eigensystem(&l, 6).unwrap();
        let opts = EigenOptions { dense_cap: 10, ..Default::default() };
        let lz = eigensystem_with(&l, 6, opts).unwrap();
        for (a, b) in dense.values.iter().zip(&lz.values) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let res = l.matrix.to_dense() * &lz.vectors - &lz.vectors * DMatrix::from_diagonal(&DVector::from_vec(lz.values.clone()));
        assert!(res.norm() < 1e-7);
    }

    #[test]
    fn fourier_round_trip() {
        let es = eigensystem(&cycle(7), 7).unwrap();
        let mut rng = Rng64::new(2);
        let f = DMatrix::from_fn(7, 2, |_, _| rng.uniform(-1.0, 1.0));
        let fh = gft(&es, &f).unwrap();
        assert!((igft(&es, &fh).unwrap() - &f).abs().max() < 1e-12);
        assert!((f.norm() - fh.norm()).abs() < 1e-12);
        let phi3 = es.vectors.columns(3, 1).into_owned();
        let e3 = gft(&es, &phi3).unwrap();
        for i in 0..7 {
            assert!((e3[(i, 0)] - if i == 3 { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
        let partial = eigensystem(&cycle(7), 3).unwrap();
        assert!(igft(&partial, &DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn rotation_permutation_examples() {
        let spec = GridSpec::se2(4, 4, 2);
        assert_eq!(rotation_permutation(&spec, 0).unwrap(), (0..32).collect::<Vec<_>>());
        assert_eq!(rotation_permutation(&spec, 4).unwrap(), (0..32).collect::<Vec<_>>());
        assert!(rotation_permutation(&GridSpec::se2(4, 3, 2), 1).is_err());
        assert!(rotation_permutation(&GridSpec::se2(4, 4, 3), 1).is_err());
        assert!(rotation_permutation(&GridSpec::se2(4, 4, 3), 2).is_ok());
        let p = rotation_permutation(&spec, 1).unwrap();
        let mut q: Vec<usize> = (0..32).collect();
        for _ in 0..4 {
            q = q.iter().map(|&i| p[i]).collect();
        }
        assert_eq!(q, (0..32).collect::<Vec<_>>());
    }

    #[test]
    fn equivariance_trivial_cases() {
        let l = cycle(6);
        assert_eq!(equivariance_error(&l, &(0..6).collect::<Vec<_>>()).unwrap(), 0.0);
        // cyclic shift is an automorphism of the cycle
        let shift: Vec<usize> = (0..6).map(|i| (i + 1) % 6).collect();
        assert!(equivariance_error(&l, &shift).unwrap() < 1e-15);
        let swap = vec![1, 0, 2, 4, 3, 5];
        assert!(equivariance_error(&l, &swap).unwrap() > 0.1);
        assert!(equivariance_error(&l, &[0, 0, 1, 2, 3, 4]).is_err());
    }

    #[test]
    fn clsg_round_trip_and_errors() {
        let x = DMatrix::from_fn(5, 3, |r, c| r as f64 - 0.25 * c as f64);
        let b = write_signal(&x);
        assert_eq!(read_signal(&b).unwrap(), x);
        assert!(read_signal(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[1] = 0;
        assert!(matches!(read_signal(&bad), Err(Error::Format { ref msg, .. }) if msg == "bad magic"));
    }

    #[test]
    fn csv_layout() {
        let es = eigensystem(&cycle(3), 2).unwrap();
        let csv = eigenmap_csv(&es);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,lambda,v0,v1,v2");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,"));
        assert_eq!(lines[1].split(',').count(), 5);
    }
}
