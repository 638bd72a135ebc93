//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use liegraph::rng::Rng64;
use liegraph::{Csr, Laplacian};
use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};

/// Principal matrix logarithm: Denman–Beavers square roots until the matrix
/// is close to I, then 60 terms of the Mercator series, scaled back up.
pub fn matrix_log(g: &Matrix3<f64>) -> Matrix3<f64> {
    let id = Matrix3::identity();
    let mut a = *g;
    let mut k = 0;
    while (a - id).norm() > 0.05 {
        let (mut y, mut z) = (a, id);
        for _ in 0..100 {
            let yi = y.try_inverse().expect("invertible");
            let zi = z.try_inverse().expect("invertible");
            let (ny, nz) = (0.5 * (y + zi), 0.5 * (z + yi));
            let done = (ny - y).norm() < 1e-15;
            y = ny;
            z = nz;
            if done {
                break;
            }
        }
        a = y;
        k += 1;
        assert!(k < 60, "square roots did not approach the identity");
    }
    let x = a - id;
    let mut term = id;
    let mut sum = Matrix3::zeros();
    for n in 1..=60 {
        term *= x;
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        sum += term * (sign / n as f64);
    }
    sum * 2f64.powi(k)
}

/// Matrix exponential by scaling and squaring a 30-term Taylor series.
pub fn matrix_exp(a: &Matrix3<f64>) -> Matrix3<f64> {
    let s = a.norm().log2().ceil().max(0.0) as i32 + 1;
    let b = a / 2f64.powi(s);
    let mut term = Matrix3::identity();
    let mut sum = Matrix3::identity();
    for n in 1..=30 {
        term = term * b / n as f64;
        sum += term;
    }
    for _ in 0..s {
        sum *= sum;
    }
    sum
}

/// `(c1, c2, c3)` of an se(2) matrix `[[0, −c3, c1], [c3, 0, c2], [0, 0, 0]]`.
pub fn se2_coords(m: &Matrix3<f64>) -> [f64; 3] {
    [m[(0, 2)], m[(1, 2)], 0.5 * (m[(1, 0)] - m[(0, 1)])]
}

/// so(3) coordinates in the basis A1 = y-, A2 = z-, A3 = x-rotation.
pub fn so3_coords(m: &Matrix3<f64>) -> [f64; 3] {
    [0.5 * (m[(0, 2)] - m[(2, 0)]), 0.5 * (m[(1, 0)] - m[(0, 1)]), 0.5 * (m[(2, 1)] - m[(1, 2)])]
}

/// Random symmetric weighted graph, roughly `density` of all pairs, with a
/// ring added so it is connected.
pub fn random_adjacency(n: usize, density: f64, rng: &mut Rng64) -> Csr {
    let mut trip = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let ring = j == i + 1 || (i == 0 && j == n - 1);
            if ring || rng.next_f64() < density {
                let w = rng.uniform(0.05, 1.0);
                trip.push((i, j, w));
                trip.push((j, i, w));
            }
        }
    }
    Csr::from_triplets(n, trip)
}

/// Dense reference Laplacian `I − D^{-1/2} W D^{-1/2}`.
pub fn dense_laplacian(w: &Csr) -> DMatrix<f64> {
    let a = w.to_dense();
    let n = a.nrows();
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let off = if d[i] > 0.0 && d[j] > 0.0 { a[(i, j)] / (d[i] * d[j]).sqrt() } else { 0.0 };
        let diag = if i == j && d[i] > 0.0 { 1.0 } else { 0.0 };
        diag - off
    })
}

/// `Φ f(Λ) Φᵀ` of a symmetric matrix.
pub fn spectral_apply(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let e = SymmetricEigen::new(a.clone());
    let fl = DVector::from_iterator(e.eigenvalues.len(), e.eigenvalues.iter().map(|&l| f(l)));
    &e.eigenvectors * DMatrix::from_diagonal(&fl) * e.eigenvectors.transpose()
}

/// Sorted eigenvalues of a dense symmetric matrix.
pub fn dense_spectrum(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Chebyshev polynomial `T_k(t)` from its trigonometric/hyperbolic closed
/// form (no recurrence).
pub fn cheb_t(k: usize, t: f64) -> f64 {
    let k = k as f64;
    if t.abs() <= 1.0 {
        (k * t.acos()).cos()
    } else if t > 1.0 {
        (k * t.acosh()).cosh()
    } else {
        (-1f64).powf(k) * (k * (-t).acosh()).cosh()
    }
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.norm().max(1e-300);
    (a - b).norm() / scale
}

pub fn laplacian_of(w: &Csr) -> Laplacian {
    Laplacian::from_adjacency(w)
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checks

use liegraph::network::{
    nll, ChebLayer, DenseLogSoftmax, GlobalMaxPool, Layer, LayerSpec, Model, ModelSpec, PoolLayer, PoolMode,
    PoolPlan, Relu,
};
use liegraph::{GraphConfig, GridSpec};
use std::sync::Arc;

pub const FD_STEP: f64 = 1e-5;
/// Minimum distance to a ReLU kink or an argmax tie at accepted points.
pub const KINK_MARGIN: f64 = 1e-4;

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn grad_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn central_diff(x: &DMatrix<f64>, mut f: impl FnMut(&DMatrix<f64>) -> f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(x.nrows(), x.ncols());
    let mut xp = x.clone();
    for k in 0..x.len() {
        let v = x[k];
        xp[k] = v + FD_STEP;
        let up = f(&xp);
        xp[k] = v - FD_STEP;
        let down = f(&xp);
        xp[k] = v;
        g[k] = (up - down) / (2.0 * FD_STEP);
    }
    g
}

/// Redraws until `ok`; a bounded loop so a degenerate setup fails loudly.
pub fn draw_smooth<T>(mut draw: impl FnMut() -> T, ok: impl Fn(&T) -> bool) -> T {
    for _ in 0..10_000 {
        let x = draw();
        if ok(&x) {
            return x;
        }
    }
    panic!("no smooth point found in 10000 draws");
}

fn err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    grad_rel_err(a.as_slice(), b.as_slice())
}

fn rand_mat(r: usize, c: usize, rng: &mut Rng64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.uniform(-1.0, 1.0))
}

fn readout(y: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    y.component_mul(r).sum()
}

/// Exact zeros only come out of a ReLU whose input is already kept away
/// from the kink, so a tie between them does not move under perturbation.
fn relu_tie(a: f64, b: f64) -> bool {
    a == 0.0 && b == 0.0
}

/// Smallest top-1/top-2 gap over pooling clusters and channels.
fn pool_margin(plan: &PoolPlan, x: &DMatrix<f64>) -> f64 {
    let mut m = f64::INFINITY;
    for members in &plan.members {
        for ch in 0..x.ncols() {
            let mut v: Vec<f64> = members.iter().map(|&i| x[(i, ch)]).collect();
            v.sort_by(|a, b| b.total_cmp(a));
            if v.len() > 1 && !relu_tie(v[0], v[1]) {
                m = m.min(v[0] - v[1]);
            }
        }
    }
    m
}

fn global_margin(x: &DMatrix<f64>) -> f64 {
    (0..x.ncols())
        .map(|ch| {
            let mut v: Vec<f64> = x.column(ch).iter().copied().collect();
            v.sort_by(|a, b| b.total_cmp(a));
            if v.len() > 1 && !relu_tie(v[0], v[1]) { v[0] - v[1] } else { f64::INFINITY }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Chebyshev layer on a 5-vertex random graph: worst relative error over
/// `dL/dx`, `dL/dΘ`, `dL/dbias` for a random linear readout.
pub fn gradcheck_cheb(rng: &mut Rng64) -> f64 {
    let w = random_adjacency(5, 0.5, rng);
    let lt = Arc::new(liegraph::graph::rescale(&Laplacian::from_adjacency(&w), 1.7).unwrap());
    let (order, di, dout) = (1 + rng.below(5), 1 + rng.below(3), 1 + rng.below(3));
    let mut layer = ChebLayer::init(lt, order, di, dout, rng).unwrap();
    layer.bias = DVector::from_fn(dout, |_, _| rng.uniform(-1.0, 1.0));
    let x = rand_mat(5, di, rng);
    let r = rand_mat(5, dout, rng);
    layer.forward(&x).unwrap();
    let (dx, g) = layer.backward(&r).unwrap();
    let mut worst = err(&dx, &central_diff(&x, |xp| readout(&layer.apply(xp).unwrap(), &r)));
    for j in 0..order {
        let t0 = layer.coeffs.theta()[j].clone();
        let mut probe = layer.clone();
        let num = central_diff(&t0, |tp| {
            probe.coeffs.theta_mut()[j].copy_from(tp);
            readout(&probe.apply(&x).unwrap(), &r)
        });
        worst = worst.max(err(&g.theta[j], &num));
    }
    let b0 = DMatrix::from_column_slice(dout, 1, layer.bias.as_slice());
    let mut probe = layer.clone();
    let num = central_diff(&b0, |bp| {
        probe.bias.copy_from_slice(bp.as_slice());
        readout(&probe.apply(&x).unwrap(), &r)
    });
    worst.max(err(&DMatrix::from_column_slice(dout, 1, g.bias.as_slice()), &num))
}

pub fn gradcheck_relu(rng: &mut Rng64) -> f64 {
    let x = draw_smooth(|| rand_mat(12, 3, rng), |x| x.iter().all(|v| v.abs() >= KINK_MARGIN));
    let r = rand_mat(12, 3, rng);
    let mut relu = Relu::default();
    relu.forward(&x);
    let dx = relu.backward(&r).unwrap();
    err(&dx, &central_diff(&x, |xp| readout(&Relu::apply(xp), &r)))
}

/// Pool forward/backward for one mode (planar modes on a 4×4×2 SE(2) grid,
/// spherical ones on a level-1 SO(3) grid with two slices).
pub fn gradcheck_pool(mode: PoolMode, rng: &mut Rng64) -> f64 {
    let plan = if mode.is_planar() {
        PoolPlan::planar(&GridSpec::se2(4, 4, 2), mode, rng.next_u64()).unwrap()
    } else {
        PoolPlan::spherical(&GridSpec::so3(1, 2), mode).unwrap()
    };
    let n = plan.n_fine();
    let max_mode = matches!(mode, PoolMode::R2Max | PoolMode::S2Max);
    let x = draw_smooth(|| rand_mat(n, 2, rng), |x| !max_mode || pool_margin(&plan, x) >= KINK_MARGIN);
    let r = rand_mat(plan.n_coarse(), 2, rng);
    let mut layer = PoolLayer::new(plan.clone());
    layer.forward(&x).unwrap();
    let dx = layer.backward(&r).unwrap();
    err(&dx, &central_diff(&x, |xp| readout(&plan.apply(xp).unwrap(), &r)))
}

/// Unpooling backward (Rand and Avg modes).
pub fn gradcheck_unpool(mode: PoolMode, rng: &mut Rng64) -> f64 {
    let plan = if mode.is_planar() {
        PoolPlan::planar(&GridSpec::se2(4, 4, 2), mode, rng.next_u64()).unwrap()
    } else {
        PoolPlan::spherical(&GridSpec::s2(1), mode).unwrap()
    };
    let x = rand_mat(plan.n_coarse(), 2, rng);
    let r = rand_mat(plan.n_fine(), 2, rng);
    let dx = plan.unpool_backward(&r).unwrap();
    err(&dx, &central_diff(&x, |xp| readout(&plan.unpool(xp).unwrap(), &r)))
}

pub fn gradcheck_global_max(rng: &mut Rng64) -> f64 {
    let x = draw_smooth(|| rand_mat(30, 4, rng), |x| global_margin(x) >= KINK_MARGIN);
    let r = rand_mat(1, 4, rng);
    let mut gm = GlobalMaxPool::default();
    gm.forward(&x).unwrap();
    let dx = gm.backward(&r).unwrap();
    err(&dx, &central_diff(&x, |xp| readout(&GlobalMaxPool::reduce(xp).unwrap().0, &r)))
}

/// Dense + LogSoftmax under an NLL loss plus a random readout of `logp`.
pub fn gradcheck_dense(rng: &mut Rng64) -> f64 {
    let (di, dout) = (1 + rng.below(6), 2 + rng.below(4));
    let mut d = DenseLogSoftmax::init(di, dout, rng);
    d.bias = DVector::from_fn(dout, |_, _| rng.uniform(-1.0, 1.0));
    let h = rand_mat(1, di, rng);
    let r = rand_mat(1, dout, rng);
    let label = rng.below(dout);
    let loss = |d: &DenseLogSoftmax, h: &DMatrix<f64>| {
        let lp = d.apply(h).unwrap();
        nll(&lp, label).0 + readout(&lp, &r)
    };
    let lp = d.forward(&h).unwrap();
    let g = nll(&lp, label).1 + &r;
    let (dh, grad) = d.backward(&g).unwrap();
    let mut worst = err(&dh, &central_diff(&h, |hp| loss(&d, hp)));
    let mut probe = d.clone();
    let num_w = central_diff(&d.weight, |wp| {
        probe.weight.copy_from(wp);
        loss(&probe, &h)
    });
    worst = worst.max(err(&grad.weight, &num_w));
    let b0 = DMatrix::from_column_slice(dout, 1, d.bias.as_slice());
    let mut probe = d.clone();
    let num_b = central_diff(&b0, |bp| {
        probe.bias.copy_from_slice(bp.as_slice());
        loss(&probe, &h)
    });
    worst.max(err(&DMatrix::from_column_slice(dout, 1, grad.bias.as_slice()), &num_b))
}

/// Small two-level model used for whole-network checks.
pub fn small_model_spec(mode: PoolMode) -> ModelSpec {
    let cfg = |s| GraphConfig::new(s, 0.5, liegraph::graph::Orientation::Alpha(1.0));
    ModelSpec {
        levels: vec![cfg(GridSpec::se2(4, 4, 2)), cfg(GridSpec::se2(2, 2, 2))],
        layers: vec![
            LayerSpec::Cheb { order: 3, d_in: 1, d_out: 3 },
            LayerSpec::Relu,
            LayerSpec::Pool { mode },
            LayerSpec::Cheb { order: 2, d_in: 3, d_out: 2 },
            LayerSpec::Relu,
            LayerSpec::GlobalMax,
            LayerSpec::Dense { d_in: 2, d_out: 3 },
        ],
    }
}

/// Distance of the forward pass at `x` from any ReLU kink or argmax tie.
pub fn model_margin(model: &Model, x: &DMatrix<f64>) -> f64 {
    let mut h = x.clone();
    let mut m = f64::INFINITY;
    for l in &model.layers {
        h = match l {
            Layer::Cheb(c) => c.apply(&h).unwrap(),
            Layer::Relu(_) => {
                m = m.min(h.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min));
                Relu::apply(&h)
            }
            Layer::Pool(p) => {
                if p.plan.mode != PoolMode::R2Rand {
                    m = m.min(pool_margin(&p.plan, &h));
                }
                p.plan.apply(&h).unwrap()
            }
            Layer::GlobalMax(_) => {
                m = m.min(global_margin(&h));
                GlobalMaxPool::reduce(&h).unwrap().0
            }
            Layer::Dense(d) => d.apply(&h).unwrap(),
        };
    }
    m
}

/// Whole-model backward against finite differences of the NLL loss, for
/// the input and every parameter. Redraws the input until it is smooth.
pub fn gradcheck_model(rng: &mut Rng64) -> f64 {
    let mut model = Model::new(small_model_spec(PoolMode::R2Max), rng.next_u64()).unwrap();
    for l in &mut model.layers {
        if let Layer::Cheb(c) = l {
            c.bias = DVector::from_fn(c.bias.len(), |_, _| rng.uniform(-0.5, 0.5));
        }
    }
    let n = model.n_vertices();
    let x = draw_smooth(|| rand_mat(n, 1, rng), |x| model_margin(&model, x) >= KINK_MARGIN);
    let label = rng.below(3);
    let loss = |m: &Model, x: &DMatrix<f64>| nll(&m.logits(x).unwrap(), label).0;
    model.zero_grad();
    let lp = model.forward(&x).unwrap();
    let dx = model.backward(&nll(&lp, label).1).unwrap();
    let mut worst = err(&dx, &central_diff(&x, |xp| loss(&model, xp)));
    for k in 0..model.layers.len() {
        match &model.layers[k] {
            Layer::Cheb(c) => {
                let grad = c.grad().clone();
                for j in 0..c.coeffs.order() {
                    let t0 = c.coeffs.theta()[j].clone();
                    let mut probe = model.clone();
                    let num = central_diff(&t0, |tp| {
                        if let Layer::Cheb(pc) = &mut probe.layers[k] {
                            pc.coeffs.theta_mut()[j].copy_from(tp);
                        }
                        loss(&probe, &x)
                    });
                    worst = worst.max(err(&grad.theta[j], &num));
                }
                let b0 = DMatrix::from_column_slice(c.bias.len(), 1, c.bias.as_slice());
                let mut probe = model.clone();
                let num = central_diff(&b0, |bp| {
                    if let Layer::Cheb(pc) = &mut probe.layers[k] {
                        pc.bias.copy_from_slice(bp.as_slice());
                    }
                    loss(&probe, &x)
                });
                worst = worst.max(err(&DMatrix::from_column_slice(b0.nrows(), 1, grad.bias.as_slice()), &num));
            }
            Layer::Dense(d) => {
                let grad = d.grad().clone();
                let mut probe = model.clone();
                let num = central_diff(&d.weight, |wp| {
                    if let Layer::Dense(pd) = &mut probe.layers[k] {
                        pd.weight.copy_from(wp);
                    }
                    loss(&probe, &x)
                });
                worst = worst.max(err(&grad.weight, &num));
            }
            _ => {}
        }
    }
    worst
}
