//! A small hand-differentiated Chebyshev network on manifold graphs.
//!
//! Layers keep whatever their backward pass needs from the last `forward`
//! call; `apply` is the cache-free variant used for evaluation. Gradients
//! accumulate into per-layer buffers until [`Model::step`] applies them.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{arg, shape, Error, Result};
use crate::graph::{rescaled_laplacian, GraphConfig, LambdaMode, Laplacian, Orientation, TieRule};
use crate::io::{Reader, Writer};
use crate::rng::Rng64;
use crate::sampling::{icosahedral_count, GridKind, GridSpec, Icosphere};
use crate::spectral::{cheb_basis, permute_rows, rotation_permutation, ChebCoeffs, Signal};

/// `sqrt(6 / (R·d_in + d_out))`.
pub fn init_bound(order: usize, d_in: usize, d_out: usize) -> f64 {
    (6.0 / (order * d_in + d_out) as f64).sqrt()
}

fn check_cols(x: &Signal, rows: usize, cols: usize, what: &str) -> Result<()> {
    if x.nrows() != rows || x.ncols() != cols {
        return Err(shape(format!("{what}: got {}×{}, expected {rows}×{cols}", x.nrows(), x.ncols())));
    }
    Ok(())
}

fn not_run(what: &str) -> Error {
    Error::State(format!("{what}: backward called before forward"))
}

// ---------------------------------------------------------------------------
// Chebyshev convolution

#[derive(Debug, Clone, PartialEq)]
pub struct ChebGrad {
    pub theta: Vec<DMatrix<f64>>,
    pub bias: DVector<f64>,
}

/// `y = Σ_j z_j Θ_j + 1·biasᵀ` on a rescaled Laplacian.
#[derive(Debug, Clone)]
pub struct ChebLayer {
    pub coeffs: ChebCoeffs,
    pub bias: DVector<f64>,
    lt: Arc<Laplacian>,
    cache: Option<Vec<Signal>>,
    grad: ChebGrad,
}

impl ChebLayer {
    pub fn new(lt: Arc<Laplacian>, coeffs: ChebCoeffs, bias: DVector<f64>) -> Result<Self> {
        if !lt.rescaled {
            return Err(Error::State("Chebyshev layers need the rescaled Laplacian".into()));
        }
        if bias.len() != coeffs.d_out() {
            return Err(shape(format!("bias has {} entries, d_out is {}", bias.len(), coeffs.d_out())));
        }
        let grad = ChebGrad {
            theta: vec![DMatrix::zeros(coeffs.d_in(), coeffs.d_out()); coeffs.order()],
            bias: DVector::zeros(coeffs.d_out()),
        };
        Ok(ChebLayer { coeffs, bias, lt, cache: None, grad })
    }

    /// Coefficients uniform in `±sqrt(6/(R·d_in + d_out))`, zero bias.
    pub fn init(lt: Arc<Laplacian>, order: usize, d_in: usize, d_out: usize, rng: &mut Rng64) -> Result<Self> {
        let coeffs = ChebCoeffs::random(order, d_in, d_out, init_bound(order, d_in, d_out), rng);
        Self::new(lt, coeffs, DVector::zeros(d_out))
    }

    pub fn laplacian(&self) -> &Laplacian {
        &self.lt
    }

    pub fn grad(&self) -> &ChebGrad {
        &self.grad
    }

    fn check_input(&self, x: &Signal) -> Result<()> {
        check_cols(x, self.lt.n(), self.coeffs.d_in(), "Chebyshev input")
    }

    fn combine(&self, z: &[Signal]) -> Signal {
        let mut y = DMatrix::zeros(self.lt.n(), self.coeffs.d_out());
        for (zj, tj) in z.iter().zip(self.coeffs.theta()) {
            y += zj * tj;
        }
        for mut row in y.row_iter_mut() {
            row += self.bias.transpose();
        }
        y
    }

    pub fn apply(&self, x: &Signal) -> Result<Signal> {
        self.check_input(x)?;
        Ok(self.combine(&cheb_basis(&self.lt, x, self.coeffs.order())))
    }

    pub fn forward(&mut self, x: &Signal) -> Result<Signal> {
        self.check_input(x)?;
        let z = cheb_basis(&self.lt, x, self.coeffs.order());
        let y = self.combine(&z);
        self.cache = Some(z);
        Ok(y)
    }

    /// Returns `(dL/dx, dL/dΘ, dL/dbias)` for the cached input. `dL/dx` uses
    /// the Clenshaw recurrence `b_k = g_k + 2Δ̃b_{k+1} − b_{k+2}` on
    /// `g_j = dy·Θ_jᵀ`, valid because `Δ̃` is symmetric.
    pub fn backward(&self, dy: &Signal) -> Result<(Signal, ChebGrad)> {
        let z = self.cache.as_ref().ok_or_else(|| not_run("Chebyshev layer"))?;
        check_cols(dy, self.lt.n(), self.coeffs.d_out(), "Chebyshev output gradient")?;
        let theta: Vec<DMatrix<f64>> = z.iter().map(|zj| zj.tr_mul(dy)).collect();
        let bias = DVector::from_iterator(dy.ncols(), dy.column_iter().map(|c| c.sum()));
        let g: Vec<Signal> = self.coeffs.theta().iter().map(|t| dy * t.transpose()).collect();
        let l = &self.lt.matrix;
        let r = g.len();
        let dx = if r == 1 {
            g[0].clone()
        } else {
            let mut b1 = DMatrix::zeros(dy.nrows(), self.coeffs.d_in());
            let mut b2 = b1.clone();
            for gk in g[1..].iter().rev() {
                let bk = gk + l.mul_dense(&b1) * 2.0 - &b2;
                b2 = std::mem::replace(&mut b1, bk);
            }
            &g[0] + l.mul_dense(&b1) - b2
        };
        Ok((dx, ChebGrad { theta, bias }))
    }

    fn accumulate(&mut self, dy: &Signal) -> Result<Signal> {
        let (dx, g) = self.backward(dy)?;
        for (acc, d) in self.grad.theta.iter_mut().zip(&g.theta) {
            *acc += d;
        }
        self.grad.bias += &g.bias;
        Ok(dx)
    }

    fn zero_grad(&mut self) {
        self.grad.theta.iter_mut().for_each(|t| t.fill(0.0));
        self.grad.bias.fill(0.0);
    }

    fn step(&mut self, lr: f64) {
        for (t, g) in self.coeffs.theta_mut().iter_mut().zip(&self.grad.theta) {
            *t -= g * lr;
        }
        self.bias -= &self.grad.bias * lr;
    }
}

// ---------------------------------------------------------------------------
// ReLU

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<DMatrix<bool>>,
}

impl Relu {
    pub fn apply(x: &Signal) -> Signal {
        x.map(|v| v.max(0.0))
    }

    pub fn forward(&mut self, x: &Signal) -> Signal {
        self.mask = Some(x.map(|v| v > 0.0));
        Self::apply(x)
    }

    pub fn backward(&self, dy: &Signal) -> Result<Signal> {
        let mask = self.mask.as_ref().ok_or_else(|| not_run("ReLU"))?;
        if mask.shape() != dy.shape() {
            return Err(shape("ReLU gradient shape differs from its input"));
        }
        Ok(dy.zip_map(mask, |g, m| if m { g } else { 0.0 }))
    }
}

// ---------------------------------------------------------------------------
// Pooling

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    /// One seeded member per 2×2 block.
    R2Rand,
    /// Per-channel maximum over 2×2 blocks.
    R2Max,
    /// Per-channel maximum over icosahedral child groups.
    S2Max,
    /// Mean over icosahedral child groups; unpooling replicates.
    S2Avg,
}

impl PoolMode {
    pub fn is_planar(&self) -> bool {
        matches!(self, PoolMode::R2Rand | PoolMode::R2Max)
    }

    pub fn code(&self) -> u8 {
        match self {
            PoolMode::R2Rand => 0,
            PoolMode::R2Max => 1,
            PoolMode::S2Max => 2,
            PoolMode::S2Avg => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        [PoolMode::R2Rand, PoolMode::R2Max, PoolMode::S2Max, PoolMode::S2Avg].into_iter().find(|m| m.code() == c)
    }
}

/// Fine-to-coarse cluster map between two grid resolutions. Spatial clusters
/// are replicated across orientation slices.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolPlan {
    pub mode: PoolMode,
    pub fine: GridSpec,
    pub coarse: GridSpec,
    /// `cluster[i]` is the coarse vertex of fine vertex `i`; `None` for
    /// vertices dropped from an odd trailing row or column.
    pub cluster: Vec<Option<usize>>,
    /// Fine members of each coarse vertex, ascending.
    pub members: Vec<Vec<usize>>,
    /// Chosen member per cluster (random mode only).
    pub selected: Vec<usize>,
    pub seed: u64,
}

impl PoolPlan {
    /// Non-overlapping 2×2 blocks on a planar grid. Odd dimensions drop the
    /// trailing row/column; [`PoolPlan::dropped`] reports how many vertices.
    pub fn planar(fine: &GridSpec, mode: PoolMode, seed: u64) -> Result<Self> {
        if !mode.is_planar() {
            return Err(arg(format!("{mode:?} is not a planar pooling mode")));
        }
        if !fine.kind.is_planar() {
            return Err(arg("planar pooling needs an SE(2) or R2 grid"));
        }
        fine.validate()?;
        if fine.nx < 2 || fine.ny < 2 {
            return Err(arg(format!("cannot halve a {}×{} grid", fine.nx, fine.ny)));
        }
        let coarse = GridSpec { nx: fine.nx / 2, ny: fine.ny / 2, ..*fine };
        let (ns, cs) = (fine.n_spatial(), coarse.n_spatial());
        let mut spatial = vec![None; ns];
        for j in 0..coarse.ny * 2 {
            for i in 0..coarse.nx * 2 {
                spatial[j * fine.nx + i] = Some((j / 2) * coarse.nx + i / 2);
            }
        }
        Self::replicate(mode, *fine, coarse, &spatial, cs, seed)
    }

    /// Level `l → l − 1` on the icosahedral hierarchy. Parents keep their own
    /// id; each edge midpoint joins whichever endpoint currently has fewer
    /// children (lower id on ties).
    pub fn spherical(fine: &GridSpec, mode: PoolMode) -> Result<Self> {
        if mode.is_planar() {
            return Err(arg(format!("{mode:?} is not a spherical pooling mode")));
        }
        if fine.kind.is_planar() {
            return Err(arg("spherical pooling needs an SO(3) or S2 grid"));
        }
        fine.validate()?;
        if fine.level == 0 {
            return Err(arg("level-0 icosahedron has no coarser level"));
        }
        let coarse = GridSpec { level: fine.level - 1, ..*fine };
        let cs = icosahedral_count(coarse.level);
        let ico = Icosphere::new(fine.level);
        let mut spatial: Vec<Option<usize>> = (0..cs).map(Some).collect();
        let mut children = vec![0usize; cs];
        for &(a, b) in &ico.midpoint_parents[fine.level] {
            let p = if children[b] < children[a] { b } else { a };
            children[p] += 1;
            spatial.push(Some(p));
        }
        Self::replicate(mode, *fine, coarse, &spatial, cs, 0)
    }

    fn replicate(
        mode: PoolMode,
        fine: GridSpec,
        coarse: GridSpec,
        spatial: &[Option<usize>],
        cs: usize,
        seed: u64,
    ) -> Result<Self> {
        let ns = spatial.len();
        let mut cluster = Vec::with_capacity(ns * fine.n_orient);
        let mut members = vec![Vec::new(); cs * fine.n_orient];
        for o in 0..fine.n_orient {
            for (s, c) in spatial.iter().enumerate() {
                let c = c.map(|c| o * cs + c);
                if let Some(c) = c {
                    members[c].push(o * ns + s);
                }
                cluster.push(c);
            }
        }
        let mut plan = PoolPlan { mode, fine, coarse, cluster, members, selected: Vec::new(), seed };
        plan.reseed(seed);
        Ok(plan)
    }

    /// Redraws the random-mode selections from `seed`.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        if self.mode == PoolMode::R2Rand {
            let mut rng = Rng64::new(seed);
            self.selected = self.members.iter().map(|m| m[rng.below(m.len())]).collect();
        } else {
            self.selected.clear();
        }
    }

    pub fn n_fine(&self) -> usize {
        self.cluster.len()
    }

    pub fn n_coarse(&self) -> usize {
        self.members.len()
    }

    pub fn dropped(&self) -> usize {
        self.cluster.iter().filter(|c| c.is_none()).count()
    }

    /// Coarse signal plus, for Max and Rand modes, the fine vertex routed to
    /// each `(coarse, channel)` entry (row-major).
    pub fn forward(&self, x: &Signal) -> Result<(Signal, Vec<usize>)> {
        if x.nrows() != self.n_fine() {
            return Err(shape(format!("signal has {} rows, fine graph has {}", x.nrows(), self.n_fine())));
        }
        let d = x.ncols();
        let mut y = DMatrix::zeros(self.n_coarse(), d);
        let mut route = Vec::new();
        match self.mode {
            PoolMode::S2Avg => {
                for (c, m) in self.members.iter().enumerate() {
                    for ch in 0..d {
                        y[(c, ch)] = m.iter().map(|&i| x[(i, ch)]).sum::<f64>() / m.len() as f64;
                    }
                }
            }
            PoolMode::R2Rand => {
                route.reserve(self.n_coarse() * d);
                for (c, &s) in self.selected.iter().enumerate() {
                    for ch in 0..d {
                        y[(c, ch)] = x[(s, ch)];
                        route.push(s);
                    }
                }
            }
            PoolMode::R2Max | PoolMode::S2Max => {
                route.reserve(self.n_coarse() * d);
                for (c, m) in self.members.iter().enumerate() {
                    for ch in 0..d {
                        let mut best = m[0];
                        for &i in &m[1..] {
                            if x[(i, ch)] > x[(best, ch)] {
                                best = i;
                            }
                        }
                        y[(c, ch)] = x[(best, ch)];
                        route.push(best);
                    }
                }
            }
        }
        Ok((y, route))
    }

    pub fn apply(&self, x: &Signal) -> Result<Signal> {
        Ok(self.forward(x)?.0)
    }

    /// Fine gradient: routed entries for Max/Rand, evenly shared for Avg.
    pub fn backward(&self, route: &[usize], dy: &Signal) -> Result<Signal> {
        if dy.nrows() != self.n_coarse() {
            return Err(shape(format!("gradient has {} rows, coarse graph has {}", dy.nrows(), self.n_coarse())));
        }
        let d = dy.ncols();
        let mut dx = DMatrix::zeros(self.n_fine(), d);
        if self.mode == PoolMode::S2Avg {
            for (c, m) in self.members.iter().enumerate() {
                for ch in 0..d {
                    let share = dy[(c, ch)] / m.len() as f64;
                    m.iter().for_each(|&i| dx[(i, ch)] += share);
                }
            }
        } else {
            if route.len() != self.n_coarse() * d {
                return Err(shape("pooling route does not match the gradient"));
            }
            for c in 0..self.n_coarse() {
                for ch in 0..d {
                    dx[(route[c * d + ch], ch)] += dy[(c, ch)];
                }
            }
        }
        Ok(dx)
    }

    /// Rand: value placed on the selected member, zeros elsewhere.
    /// Avg: value replicated on every member.
    pub fn unpool(&self, x: &Signal) -> Result<Signal> {
        if x.nrows() != self.n_coarse() {
            return Err(shape(format!("signal has {} rows, coarse graph has {}", x.nrows(), self.n_coarse())));
        }
        let mut y = DMatrix::zeros(self.n_fine(), x.ncols());
        match self.mode {
            PoolMode::R2Rand => {
                for (c, &s) in self.selected.iter().enumerate() {
                    y.set_row(s, &x.row(c));
                }
            }
            PoolMode::S2Avg => {
                for (c, m) in self.members.iter().enumerate() {
                    m.iter().for_each(|&i| y.set_row(i, &x.row(c)));
                }
            }
            mode => return Err(arg(format!("{mode:?} has no unpooling"))),
        }
        Ok(y)
    }

    /// Adjoint of [`PoolPlan::unpool`].
    pub fn unpool_backward(&self, dy: &Signal) -> Result<Signal> {
        if dy.nrows() != self.n_fine() {
            return Err(shape(format!("gradient has {} rows, fine graph has {}", dy.nrows(), self.n_fine())));
        }
        let mut dx = DMatrix::zeros(self.n_coarse(), dy.ncols());
        match self.mode {
            PoolMode::R2Rand => {
                for (c, &s) in self.selected.iter().enumerate() {
                    dx.set_row(c, &dy.row(s));
                }
            }
            PoolMode::S2Avg => {
                for (c, m) in self.members.iter().enumerate() {
                    for &i in m {
                        let r = dx.row(c) + dy.row(i);
                        dx.set_row(c, &r);
                    }
                }
            }
            mode => return Err(arg(format!("{mode:?} has no unpooling"))),
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone)]
pub struct PoolLayer {
    pub plan: PoolPlan,
    route: Option<Vec<usize>>,
}

impl PoolLayer {
    pub fn new(plan: PoolPlan) -> Self {
        PoolLayer { plan, route: None }
    }

    pub fn forward(&mut self, x: &Signal) -> Result<Signal> {
        let (y, route) = self.plan.forward(x)?;
        self.route = Some(route);
        Ok(y)
    }

    pub fn backward(&self, dy: &Signal) -> Result<Signal> {
        let route = self.route.as_ref().ok_or_else(|| not_run("pooling"))?;
        self.plan.backward(route, dy)
    }
}

// ---------------------------------------------------------------------------
// Global max pooling

/// Per-channel maximum over every vertex, as a `1 × d` row.
#[derive(Debug, Clone, Default)]
pub struct GlobalMaxPool {
    argmax: Option<(usize, Vec<usize>)>,
}

impl GlobalMaxPool {
    /// Maximum and its lowest-id argmax per channel.
    pub fn reduce(x: &Signal) -> Result<(Signal, Vec<usize>)> {
        if x.nrows() == 0 {
            return Err(shape("global pooling of an empty signal"));
        }
        let mut arg = vec![0; x.ncols()];
        let y = DMatrix::from_fn(1, x.ncols(), |_, ch| {
            let col = x.column(ch);
            let mut best = 0;
            for i in 1..col.len() {
                if col[i] > col[best] {
                    best = i;
                }
            }
            arg[ch] = best;
            col[best]
        });
        Ok((y, arg))
    }

    pub fn forward(&mut self, x: &Signal) -> Result<Signal> {
        let (y, arg) = Self::reduce(x)?;
        self.argmax = Some((x.nrows(), arg));
        Ok(y)
    }

    pub fn backward(&self, dy: &Signal) -> Result<Signal> {
        let (n, arg) = self.argmax.as_ref().ok_or_else(|| not_run("global max pooling"))?;
        check_cols(dy, 1, arg.len(), "global pooling gradient")?;
        let mut dx = DMatrix::zeros(*n, arg.len());
        for (ch, &i) in arg.iter().enumerate() {
            dx[(i, ch)] = dy[(0, ch)];
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------------------
// Dense + LogSoftmax

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// `logp = log_softmax(h·Wᵀ + b)` on a `1 × d_in` row.
#[derive(Debug, Clone)]
pub struct DenseLogSoftmax {
    /// `d_out × d_in`.
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    cache: Option<(Signal, DVector<f64>)>,
    grad: DenseGrad,
}

fn row(v: &DVector<f64>) -> Signal {
    DMatrix::from_row_slice(1, v.len(), v.as_slice())
}

pub fn log_softmax(z: &DVector<f64>) -> DVector<f64> {
    let m = z.max();
    let ln_sum = z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.map(|v| (v - m) - ln_sum)
}

impl DenseLogSoftmax {
    pub fn new(weight: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        if bias.len() != weight.nrows() {
            return Err(shape("dense bias length differs from output size"));
        }
        let grad = DenseGrad { weight: DMatrix::zeros(weight.nrows(), weight.ncols()), bias: DVector::zeros(bias.len()) };
        Ok(DenseLogSoftmax { weight, bias, cache: None, grad })
    }

    pub fn init(d_in: usize, d_out: usize, rng: &mut Rng64) -> Self {
        let b = init_bound(1, d_in, d_out);
        let w = DMatrix::from_fn(d_out, d_in, |_, _| rng.uniform(-b, b));
        Self::new(w, DVector::zeros(d_out)).expect("shapes agree")
    }

    pub fn d_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.weight.nrows()
    }

    pub fn grad(&self) -> &DenseGrad {
        &self.grad
    }

    pub fn apply(&self, h: &Signal) -> Result<Signal> {
        check_cols(h, 1, self.d_in(), "dense input")?;
        let z = &self.weight * h.row(0).transpose() + &self.bias;
        Ok(row(&log_softmax(&z)))
    }

    pub fn forward(&mut self, h: &Signal) -> Result<Signal> {
        let y = self.apply(h)?;
        self.cache = Some((h.clone(), DVector::from_column_slice(y.as_slice())));
        Ok(y)
    }

    /// Backward from `dL/dlogp` (a `1 × d_out` row).
    pub fn backward(&self, dlogp: &Signal) -> Result<(Signal, DenseGrad)> {
        let (h, logp) = self.cache.as_ref().ok_or_else(|| not_run("dense layer"))?;
        check_cols(dlogp, 1, self.d_out(), "dense output gradient")?;
        let g = dlogp.transpose();
        let total = g.sum();
        let dz = DVector::from_fn(g.len(), |k, _| g[k] - logp[k].exp() * total);
        let weight = &dz * h;
        let dh = row(&(self.weight.transpose() * &dz));
        Ok((dh, DenseGrad { weight, bias: dz }))
    }

    fn accumulate(&mut self, dlogp: &Signal) -> Result<Signal> {
        let (dh, g) = self.backward(dlogp)?;
        self.grad.weight += &g.weight;
        self.grad.bias += &g.bias;
        Ok(dh)
    }

    fn zero_grad(&mut self) {
        self.grad.weight.fill(0.0);
        self.grad.bias.fill(0.0);
    }

    fn step(&mut self, lr: f64) {
        self.weight -= &self.grad.weight * lr;
        self.bias -= &self.grad.bias * lr;
    }
}

/// `−logp[label]` and its gradient with respect to `logp`.
pub fn nll(logp: &Signal, label: usize) -> (f64, Signal) {
    let mut g = DMatrix::zeros(1, logp.ncols());
    g[(0, label)] = -1.0;
    (-logp[(0, label)], g)
}

// ---------------------------------------------------------------------------
// Models

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Cheb { order: usize, d_in: usize, d_out: usize },
    Relu,
    /// Pools from the current resolution level to the next one.
    Pool { mode: PoolMode },
    GlobalMax,
    Dense { d_in: usize, d_out: usize },
}

/// Layer list plus one graph configuration per resolution level.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub levels: Vec<GraphConfig>,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    /// Checks dimension flow and that each pool maps level `l` onto level
    /// `l + 1`. Returns the input channel count.
    pub fn validate(&self) -> Result<usize> {
        if self.levels.is_empty() {
            return Err(arg("model needs at least one graph level"));
        }
        let mut level = 0;
        let mut width: Option<usize> = None;
        let mut global = false;
        let mut d_input = None;
        for (k, l) in self.layers.iter().enumerate() {
            let need = |d: usize, width: &mut Option<usize>| -> Result<()> {
                match *width {
                    Some(w) if w != d => Err(shape(format!("layer {k} expects {d} channels, gets {w}"))),
                    _ => Ok(()),
                }
            };
            match *l {
                LayerSpec::Cheb { order, d_in, d_out } => {
                    if global {
                        return Err(shape(format!("layer {k}: convolution after global pooling")));
                    }
                    if order == 0 || d_in == 0 || d_out == 0 {
                        return Err(arg(format!("layer {k}: zero-sized convolution")));
                    }
                    need(d_in, &mut width)?;
                    d_input.get_or_insert(d_in);
                    width = Some(d_out);
                }
                LayerSpec::Relu => {}
                LayerSpec::Pool { mode } => {
                    if global {
                        return Err(shape(format!("layer {k}: pooling after global pooling")));
                    }
                    let next = self
                        .levels
                        .get(level + 1)
                        .ok_or_else(|| arg(format!("layer {k}: pool has no coarser graph level")))?;
                    let plan = plan_for(&self.levels[level].spec, mode, 0)?;
                    if plan.coarse != next.spec {
                        return Err(arg(format!("layer {k}: pool output {:?} is not level {}", plan.coarse, level + 1)));
                    }
                    level += 1;
                }
                LayerSpec::GlobalMax => {
                    if global {
                        return Err(shape(format!("layer {k}: repeated global pooling")));
                    }
                    global = true;
                }
                LayerSpec::Dense { d_in, d_out } => {
                    if !global {
                        return Err(shape(format!("layer {k}: dense head needs global pooling first")));
                    }
                    if k + 1 != self.layers.len() {
                        return Err(shape("the dense log-softmax head must be the last layer"));
                    }
                    need(d_in, &mut width)?;
                    d_input.get_or_insert(d_in);
                    width = Some(d_out);
                }
            }
        }
        if !matches!(self.layers.last(), Some(LayerSpec::Dense { .. })) {
            return Err(shape("model must end in a dense log-softmax head"));
        }
        d_input.ok_or_else(|| arg("model has no parametrized layer"))
    }
}

fn plan_for(fine: &GridSpec, mode: PoolMode, seed: u64) -> Result<PoolPlan> {
    if mode.is_planar() {
        PoolPlan::planar(fine, mode, seed)
    } else {
        PoolPlan::spherical(fine, mode)
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Cheb(ChebLayer),
    Relu(Relu),
    Pool(PoolLayer),
    GlobalMax(GlobalMaxPool),
    Dense(DenseLogSoftmax),
}

#[derive(Debug, Clone)]
pub struct Level {
    pub config: GraphConfig,
    /// Unrescaled Laplacian with λ_max set.
    pub laplacian: Arc<Laplacian>,
    pub rescaled: Arc<Laplacian>,
}

impl Level {
    pub fn build(config: &GraphConfig) -> Result<Self> {
        let g = config.build()?;
        let (lap, resc) = rescaled_laplacian(&g, LambdaMode::default())?;
        Ok(Level { config: config.clone(), laplacian: Arc::new(lap), rescaled: Arc::new(resc) })
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub levels: Vec<Level>,
    pub layers: Vec<Layer>,
    pub d_input: usize,
}

impl Model {
    /// Builds every graph level and initialises parameters from `seed`.
    /// Random pooling plans are seeded from the same stream.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        let levels = spec.levels.iter().map(Level::build).collect::<Result<Vec<_>>>()?;
        Self::with_levels(spec, levels, seed)
    }

    pub fn with_levels(spec: ModelSpec, levels: Vec<Level>, seed: u64) -> Result<Self> {
        let d_input = spec.validate()?;
        if levels.len() != spec.levels.len() {
            return Err(shape("one built level per configured level expected"));
        }
        let mut rng = Rng64::new(seed);
        let mut level = 0;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            layers.push(match *l {
                LayerSpec::Cheb { order, d_in, d_out } => {
                    Layer::Cheb(ChebLayer::init(levels[level].rescaled.clone(), order, d_in, d_out, &mut rng)?)
                }
                LayerSpec::Relu => Layer::Relu(Relu::default()),
                LayerSpec::Pool { mode } => {
                    let plan = plan_for(&levels[level].config.spec, mode, rng.next_u64())?;
                    level += 1;
                    Layer::Pool(PoolLayer::new(plan))
                }
                LayerSpec::GlobalMax => Layer::GlobalMax(GlobalMaxPool::default()),
                LayerSpec::Dense { d_in, d_out } => Layer::Dense(DenseLogSoftmax::init(d_in, d_out, &mut rng)),
            });
        }
        Ok(Model { spec, levels, layers, d_input })
    }

    pub fn n_vertices(&self) -> usize {
        self.levels[0].laplacian.n()
    }

    pub fn n_classes(&self) -> usize {
        match self.layers.last() {
            Some(Layer::Dense(d)) => d.d_out(),
            _ => unreachable!("validated model ends in a dense head"),
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Cheb(c) => c.coeffs.order() * c.coeffs.d_in() * c.coeffs.d_out() + c.bias.len(),
                Layer::Dense(d) => d.weight.len() + d.bias.len(),
                _ => 0,
            })
            .sum()
    }

    /// Log-probabilities (`1 × classes`) without touching any cache.
    pub fn logits(&self, x: &Signal) -> Result<Signal> {
        check_cols(x, self.n_vertices(), self.d_input, "model input")?;
        let mut h = x.clone();
        for l in &self.layers {
            h = match l {
                Layer::Cheb(c) => c.apply(&h)?,
                Layer::Relu(_) => Relu::apply(&h),
                Layer::Pool(p) => p.plan.apply(&h)?,
                Layer::GlobalMax(_) => GlobalMaxPool::reduce(&h)?.0,
                Layer::Dense(d) => d.apply(&h)?,
            };
        }
        Ok(h)
    }

    pub fn predict(&self, x: &Signal) -> Result<usize> {
        Ok(self.logits(x)?.row(0).transpose().argmax().0)
    }

    pub fn forward(&mut self, x: &Signal) -> Result<Signal> {
        check_cols(x, self.n_vertices(), self.d_input, "model input")?;
        let mut h = x.clone();
        for l in &mut self.layers {
            h = match l {
                Layer::Cheb(c) => c.forward(&h)?,
                Layer::Relu(r) => r.forward(&h),
                Layer::Pool(p) => p.forward(&h)?,
                Layer::GlobalMax(g) => g.forward(&h)?,
                Layer::Dense(d) => d.forward(&h)?,
            };
        }
        Ok(h)
    }

    /// Accumulates parameter gradients for `dL/dlogp`; returns `dL/dx`.
    pub fn backward(&mut self, dlogp: &Signal) -> Result<Signal> {
        let mut g = dlogp.clone();
        for l in self.layers.iter_mut().rev() {
            g = match l {
                Layer::Cheb(c) => c.accumulate(&g)?,
                Layer::Relu(r) => r.backward(&g)?,
                Layer::Pool(p) => p.backward(&g)?,
                Layer::GlobalMax(gm) => gm.backward(&g)?,
                Layer::Dense(d) => d.accumulate(&g)?,
            };
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for l in &mut self.layers {
            match l {
                Layer::Cheb(c) => c.zero_grad(),
                Layer::Dense(d) => d.zero_grad(),
                _ => {}
            }
        }
    }

    /// `θ ← θ − lr·∇θ` with the accumulated gradients.
    pub fn step(&mut self, lr: f64) {
        for l in &mut self.layers {
            match l {
                Layer::Cheb(c) => c.step(lr),
                Layer::Dense(d) => d.step(lr),
                _ => {}
            }
        }
    }

    /// Redraws every random-mode pooling selection.
    pub fn reseed_pools(&mut self, seed: u64) {
        let mut rng = Rng64::new(seed);
        for l in &mut self.layers {
            if let Layer::Pool(p) = l {
                p.plan.reseed(rng.next_u64());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

pub const CLMD_MAGIC: &[u8; 4] = b"CLMD";
pub const CLMD_VERSION: u32 = 1;

const TAG_CHEB: u8 = 0;
const TAG_RELU: u8 = 1;
const TAG_POOL: u8 = 2;
const TAG_GLOBAL: u8 = 3;
const TAG_DENSE: u8 = 4;

/// Layout: magic, version, u32 level count, per level (u8 kind, u32 nx, ny,
/// level, n_orient, f64 ε, u8 orientation tag 0=ξ/1=α, f64 value, u32 K or
/// 0 for the default, u8 tie rule), u32 layer count, per layer a u8 tag and
/// its fields; parameters are u64-counted f64 blobs (Θ order-major, each
/// `d_in × d_out` row-major; dense weights `d_out × d_in` row-major).
pub fn write_checkpoint(m: &Model) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(CLMD_MAGIC);
    w.u32(CLMD_VERSION);
    w.u32(m.levels.len() as u32);
    for l in &m.spec.levels {
        let s = &l.spec;
        w.u8(s.kind.code());
        for v in [s.nx, s.ny, s.level, s.n_orient] {
            w.u32(v as u32);
        }
        w.f64(l.epsilon);
        match l.orientation {
            Orientation::Xi(v) => {
                w.u8(0);
                w.f64(v);
            }
            Orientation::Alpha(v) => {
                w.u8(1);
                w.f64(v);
            }
        }
        w.u32(l.knn.unwrap_or(0) as u32);
        w.u8(match l.ties {
            TieRule::KeepTied => 0,
            TieRule::LowerId => 1,
        });
    }
    w.u32(m.layers.len() as u32);
    let put_blob = |w: &mut Writer, v: Vec<f64>| {
        w.u64(v.len() as u64);
        w.f64s(&v);
    };
    for l in &m.layers {
        match l {
            Layer::Cheb(c) => {
                w.u8(TAG_CHEB);
                for v in [c.coeffs.order(), c.coeffs.d_in(), c.coeffs.d_out()] {
                    w.u32(v as u32);
                }
                let mut p = Vec::new();
                for t in c.coeffs.theta() {
                    p.extend(t.transpose().iter());
                }
                put_blob(&mut w, p);
                put_blob(&mut w, c.bias.iter().copied().collect());
            }
            Layer::Relu(_) => w.u8(TAG_RELU),
            Layer::Pool(p) => {
                w.u8(TAG_POOL);
                w.u8(p.plan.mode.code());
                w.u64(p.plan.seed);
            }
            Layer::GlobalMax(_) => w.u8(TAG_GLOBAL),
            Layer::Dense(d) => {
                w.u8(TAG_DENSE);
                w.u32(d.d_in() as u32);
                w.u32(d.d_out() as u32);
                put_blob(&mut w, d.weight.transpose().iter().copied().collect());
                put_blob(&mut w, d.bias.iter().copied().collect());
            }
        }
    }
    w.finish()
}

enum Params {
    Cheb(Vec<DMatrix<f64>>, DVector<f64>),
    Pool(u64),
    Dense(DMatrix<f64>, DVector<f64>),
    None,
}

/// Rebuilds the graph levels and restores every parameter.
pub fn read_checkpoint(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader::new(bytes);
    r.magic(CLMD_MAGIC)?;
    r.version(CLMD_VERSION)?;
    let n_levels = r.u32()? as usize;
    let mut levels = Vec::new();
    for _ in 0..n_levels {
        let at = r.offset();
        let kind = GridKind::from_code(r.u8()?).ok_or_else(|| Error::Format { msg: "unknown grid kind".into(), offset: at })?;
        let nx = r.u32()? as usize;
        let ny = r.u32()? as usize;
        let level = r.u32()? as usize;
        let n_orient = r.u32()? as usize;
        let spec = GridSpec { kind, nx, ny, level, n_orient };
        spec.validate().map_err(|e| Error::Format { msg: e.to_string(), offset: at })?;
        let epsilon = r.f64()?;
        let at = r.offset();
        let orientation = match r.u8()? {
            0 => Orientation::Xi(r.f64()?),
            1 => Orientation::Alpha(r.f64()?),
            _ => return Err(Error::Format { msg: "unknown orientation tag".into(), offset: at }),
        };
        let k = r.u32()? as usize;
        let at = r.offset();
        let ties = match r.u8()? {
            0 => TieRule::KeepTied,
            1 => TieRule::LowerId,
            _ => return Err(Error::Format { msg: "unknown tie rule".into(), offset: at }),
        };
        let mut cfg = GraphConfig::new(spec, epsilon, orientation);
        cfg.knn = (k > 0).then_some(k);
        cfg.ties = ties;
        levels.push(cfg);
    }
    let n_layers = r.u32()? as usize;
    let mut layers = Vec::new();
    let mut params = Vec::new();
    for _ in 0..n_layers {
        let at = r.offset();
        match r.u8()? {
            TAG_CHEB => {
                let order = r.u32()? as usize;
                let d_in = r.u32()? as usize;
                let d_out = r.u32()? as usize;
                let p = blob(&mut r, order * d_in * d_out)?;
                let b = blob(&mut r, d_out)?;
                let theta = p.chunks((d_in * d_out).max(1)).map(|c| DMatrix::from_row_slice(d_in, d_out, c)).collect();
                layers.push(LayerSpec::Cheb { order, d_in, d_out });
                params.push(Params::Cheb(theta, DVector::from_vec(b)));
            }
            TAG_RELU => {
                layers.push(LayerSpec::Relu);
                params.push(Params::None);
            }
            TAG_POOL => {
                let at = r.offset();
                let mode = PoolMode::from_code(r.u8()?)
                    .ok_or_else(|| Error::Format { msg: "unknown pooling mode".into(), offset: at })?;
                layers.push(LayerSpec::Pool { mode });
                params.push(Params::Pool(r.u64()?));
            }
            TAG_GLOBAL => {
                layers.push(LayerSpec::GlobalMax);
                params.push(Params::None);
            }
            TAG_DENSE => {
                let d_in = r.u32()? as usize;
                let d_out = r.u32()? as usize;
                let w = blob(&mut r, d_in * d_out)?;
                let b = blob(&mut r, d_out)?;
                layers.push(LayerSpec::Dense { d_in, d_out });
                params.push(Params::Dense(DMatrix::from_row_slice(d_out, d_in, &w), DVector::from_vec(b)));
            }
            t => return Err(Error::Format { msg: format!("unknown layer tag {t}"), offset: at }),
        }
    }
    if !r.at_end() {
        return Err(r.error("trailing bytes"));
    }
    let spec = ModelSpec { levels, layers };
    let mut model = Model::new(spec, 0).map_err(|e| Error::Format { msg: format!("invalid model: {e}"), offset: 0 })?;
    for (l, p) in model.layers.iter_mut().zip(params) {
        match (l, p) {
            (Layer::Cheb(c), Params::Cheb(theta, b)) => {
                c.coeffs = ChebCoeffs::new(theta).map_err(|e| Error::Format { msg: e.to_string(), offset: 0 })?;
                c.bias = b;
            }
            (Layer::Pool(p), Params::Pool(seed)) => p.plan.reseed(seed),
            (Layer::Dense(d), Params::Dense(w, b)) => {
                d.weight = w;
                d.bias = b;
            }
            _ => {}
        }
    }
    Ok(model)
}

fn blob(r: &mut Reader, expected: usize) -> Result<Vec<f64>> {
    let at = r.offset();
    let n = r.len(8)?;
    if n != expected {
        return Err(Error::Format { msg: format!("parameter blob has {n} values, expected {expected}"), offset: at });
    }
    r.f64s(n)
}

// ---------------------------------------------------------------------------
// Synthetic oriented bars

/// Class angles in degrees. Global max pooling over a rotation- and
/// reflection-symmetric grid makes the network invariant to the square's
/// symmetry group, so classes are bar orientations modulo that group.
pub const BAR_CLASS_DEGREES: [f64; 4] = [0.0, 15.0, 30.0, 45.0];

#[derive(Debug, Clone, PartialEq)]
pub struct BarDataset {
    pub nx: usize,
    pub ny: usize,
    /// Row-major `ny × nx` images, pixel `(i, j)` at index `j·nx + i`.
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl BarDataset {
    /// Antialiased bars through the (jittered) image center. Each image shows
    /// its class angle `φ` as one of `φ, 90° − φ, 90° + φ, 180° − φ`, picked
    /// at random, plus uniform pixel noise in `±0.05`.
    pub fn generate(n: usize, nx: usize, ny: usize, seed: u64) -> Self {
        let mut rng = Rng64::new(seed);
        let mut images = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let half_len = 0.35 * nx.min(ny) as f64;
        for _ in 0..n {
            let label = rng.below(BAR_CLASS_DEGREES.len());
            let phi = BAR_CLASS_DEGREES[label];
            let shown = [phi, 90.0 - phi, 90.0 + phi, 180.0 - phi][rng.below(4)].to_radians();
            let cx = (nx as f64 - 1.0) / 2.0 + rng.uniform(-1.0, 1.0);
            let cy = (ny as f64 - 1.0) / 2.0 + rng.uniform(-1.0, 1.0);
            let (s, c) = shown.sin_cos();
            let mut img = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let (dx, dy) = (i as f64 - cx, j as f64 - cy);
                    let along = dx * c + dy * s;
                    let across = -dx * s + dy * c;
                    let v = (1.0 - (across.abs() - 0.5).max(0.0)).clamp(0.0, 1.0)
                        * (half_len + 0.5 - along.abs()).clamp(0.0, 1.0);
                    img.push(v + rng.uniform(-0.05, 0.05));
                }
            }
            images.push(img);
            labels.push(label);
        }
        BarDataset { nx, ny, images, labels }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Copies a planar image onto every orientation slice (`|V| × 1`).
pub fn lift(image: &[f64], spec: &GridSpec) -> Result<Signal> {
    if !spec.kind.is_planar() || image.len() != spec.n_spatial() {
        return Err(shape(format!("image has {} pixels, grid slice has {}", image.len(), spec.n_spatial())));
    }
    let ns = spec.n_spatial();
    Ok(DMatrix::from_fn(spec.n_vertices(), 1, |v, _| image[v % ns]))
}

// ---------------------------------------------------------------------------
// Training demo

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub nx: usize,
    pub n_orient: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub order: usize,
    pub channels: [usize; 2],
    pub pool: PoolMode,
    pub train: usize,
    pub test: usize,
    pub batch: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            nx: 8,
            n_orient: 4,
            epsilon: 0.1f64.sqrt(),
            alpha: 1.0,
            order: 4,
            channels: [8, 16],
            pool: PoolMode::R2Max,
            train: 256,
            test: 128,
            batch: 8,
            epochs: 30,
            lr: 0.1,
            seed: 0,
        }
    }
}

impl DemoConfig {
    /// `nx × nx × |V_o|` → one 2×2 pool → global max → dense head.
    pub fn model_spec(&self) -> ModelSpec {
        let fine = GridSpec::se2(self.nx, self.nx, self.n_orient);
        let coarse = GridSpec::se2(self.nx / 2, self.nx / 2, self.n_orient);
        let cfg = |s| GraphConfig::new(s, self.epsilon, Orientation::Alpha(self.alpha));
        let [c1, c2] = self.channels;
        ModelSpec {
            levels: vec![cfg(fine), cfg(coarse)],
            layers: vec![
                LayerSpec::Cheb { order: self.order, d_in: 1, d_out: c1 },
                LayerSpec::Relu,
                LayerSpec::Pool { mode: self.pool },
                LayerSpec::Cheb { order: self.order, d_in: c1, d_out: c2 },
                LayerSpec::Relu,
                LayerSpec::GlobalMax,
                LayerSpec::Dense { d_in: c2, d_out: BAR_CLASS_DEGREES.len() },
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training NLL after the epoch.
    pub loss: f64,
    pub accuracy: f64,
    pub test_accuracy: f64,
    /// Fraction of test samples whose prediction survives a quarter turn.
    pub rotation_consistency: f64,
}

#[derive(Debug, Clone)]
pub struct DemoReport {
    /// Row 0 is the untrained model.
    pub metrics: Vec<EpochMetrics>,
    pub model: Model,
}

pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

pub fn evaluate(model: &Model, inputs: &[Signal], labels: &[usize]) -> Result<Evaluation> {
    let mut loss = 0.0;
    let mut hits = 0;
    for (x, &y) in inputs.iter().zip(labels) {
        let logp = model.logits(x)?;
        loss -= logp[(0, y)];
        hits += usize::from(logp.row(0).transpose().argmax().0 == y);
    }
    let n = inputs.len().max(1) as f64;
    Ok(Evaluation { loss: loss / n, accuracy: hits as f64 / n })
}

pub fn rotation_consistency(model: &Model, inputs: &[Signal], perm: &[usize]) -> Result<f64> {
    let mut same = 0;
    for x in inputs {
        same += usize::from(model.predict(x)? == model.predict(&permute_rows(perm, x))?);
    }
    Ok(same as f64 / inputs.len().max(1) as f64)
}

/// Mini-batch SGD on the oriented-bar task. Aborts with
/// [`Error::Diverged`] on a non-finite loss.
pub fn train_demo(cfg: &DemoConfig) -> Result<DemoReport> {
    if cfg.batch == 0 || !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(arg("batch size and learning rate must be positive"));
    }
    let spec = cfg.model_spec();
    let grid = spec.levels[0].spec;
    let mut model = Model::new(spec, cfg.seed)?;
    let train = BarDataset::generate(cfg.train, cfg.nx, cfg.nx, cfg.seed ^ 0x7472_6169_6e00);
    let test = BarDataset::generate(cfg.test, cfg.nx, cfg.nx, cfg.seed ^ 0x7465_7374_0000);
    let xs: Vec<Signal> = train.images.iter().map(|im| lift(im, &grid)).collect::<Result<_>>()?;
    let ts: Vec<Signal> = test.images.iter().map(|im| lift(im, &grid)).collect::<Result<_>>()?;
    let perm = rotation_permutation(&grid, 1)?;

    let measure = |model: &Model, epoch: usize| -> Result<EpochMetrics> {
        let tr = evaluate(model, &xs, &train.labels)?;
        let te = evaluate(model, &ts, &test.labels)?;
        Ok(EpochMetrics {
            epoch,
            loss: tr.loss,
            accuracy: tr.accuracy,
            test_accuracy: te.accuracy,
            rotation_consistency: rotation_consistency(model, &ts, &perm)?,
        })
    };

    let mut metrics = vec![measure(&model, 0)?];
    let mut rng = Rng64::new(cfg.seed ^ 0x5367_4400);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for epoch in 1..=cfg.epochs {
        model.reseed_pools(rng.next_u64());
        for i in (1..order.len()).rev() {
            order.swap(i, rng.below(i + 1));
        }
        for (step, batch) in order.chunks(cfg.batch).enumerate() {
            model.zero_grad();
            for &k in batch {
                let logp = model.forward(&xs[k])?;
                let (loss, g) = nll(&logp, train.labels[k]);
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!(
                        "epoch {epoch}, step {step}: loss {loss} on sample {k} (lr {})",
                        cfg.lr
                    )));
                }
                model.backward(&g)?;
            }
            model.step(cfg.lr / batch.len() as f64);
        }
        let m = measure(&model, epoch)?;
        if !m.loss.is_finite() {
            return Err(Error::Diverged(format!("epoch {epoch}: mean loss {} (lr {})", m.loss, cfg.lr)));
        }
        metrics.push(m);
    }
    Ok(DemoReport { metrics, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::rescale;
    use crate::sparse::Csr;

    fn path_laplacian(n: usize) -> Arc<Laplacian> {
        let trip = (0..n - 1).flat_map(|i| [(i, i + 1, 1.0), (i + 1, i, 1.0)]).collect();
        let l = Laplacian::from_adjacency(&Csr::from_triplets(n, trip));
        Arc::new(rescale(&l, 2.0).unwrap())
    }

    #[test]
    fn backward_before_forward_is_a_state_error() {
        let mut rng = Rng64::new(1);
        let layer = ChebLayer::init(path_laplacian(4), 3, 2, 2, &mut rng).unwrap();
        assert!(matches!(layer.backward(&DMatrix::zeros(4, 2)), Err(Error::State(_))));
        assert!(matches!(Relu::default().backward(&DMatrix::zeros(1, 1)), Err(Error::State(_))));
        assert!(matches!(GlobalMaxPool::default().backward(&DMatrix::zeros(1, 1)), Err(Error::State(_))));
    }

    #[test]
    fn order_one_theta_gradient_is_xt_dy() {
        let mut rng = Rng64::new(2);
        let mut layer = ChebLayer::init(path_laplacian(5), 1, 2, 3, &mut rng).unwrap();
        let x = DMatrix::from_fn(5, 2, |_, _| rng.uniform(-1.0, 1.0));
        let dy = DMatrix::from_fn(5, 3, |_, _| rng.uniform(-1.0, 1.0));
        layer.forward(&x).unwrap();
        let (_, g) = layer.backward(&dy).unwrap();
        assert!((&g.theta[0] - x.transpose() * &dy).abs().max() < 1e-15);
    }

    #[test]
    fn order_two_identity_backward_is_laplacian_times_dy() {
        let lt = path_laplacian(6);
        let coeffs = ChebCoeffs::new(vec![DMatrix::zeros(1, 1), DMatrix::identity(1, 1)]).unwrap();
        let mut layer = ChebLayer::new(lt.clone(), coeffs, DVector::zeros(1)).unwrap();
        let dy = DMatrix::from_fn(6, 1, |i, _| (i as f64).sin());
        layer.forward(&DMatrix::zeros(6, 1)).unwrap();
        let (dx, _) = layer.backward(&dy).unwrap();
        assert!((dx - lt.matrix.mul_dense(&dy)).abs().max() < 1e-15);
    }

    #[test]
    fn planar_clusters_are_blocks() {
        let plan = PoolPlan::planar(&GridSpec::se2(4, 4, 2), PoolMode::R2Max, 0).unwrap();
        assert_eq!(plan.n_coarse(), 8);
        assert!(plan.members.iter().all(|m| m.len() == 4));
        assert_eq!(plan.members[0], vec![0, 1, 4, 5]);
        assert_eq!(plan.members[4], vec![16, 17, 20, 21]);
        let odd = PoolPlan::planar(&GridSpec::r2(5, 4), PoolMode::R2Max, 0).unwrap();
        assert_eq!(odd.dropped(), 4);
    }

    #[test]
    fn max_pool_of_a_single_block() {
        let plan = PoolPlan::planar(&GridSpec::se2(2, 2, 1), PoolMode::R2Max, 0).unwrap();
        let x = DMatrix::from_column_slice(4, 1, &[0.5, 3.0, -1.0, 2.0]);
        let (y, route) = plan.forward(&x).unwrap();
        assert_eq!(y[(0, 0)], 3.0);
        assert_eq!(route, vec![1]);
    }

    #[test]
    fn dense_head_gradient_is_softmax_minus_onehot() {
        let mut rng = Rng64::new(5);
        let mut d = DenseLogSoftmax::init(3, 4, &mut rng);
        let h = DMatrix::from_row_slice(1, 3, &[0.3, -0.2, 0.9]);
        let logp = d.forward(&h).unwrap();
        let (_, g) = nll(&logp, 2);
        let (_, grad) = d.backward(&g).unwrap();
        for k in 0..4 {
            let expect = logp[(0, k)].exp() - if k == 2 { 1.0 } else { 0.0 };
            assert!((grad.bias[k] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_identical() {
        let cfg = DemoConfig { nx: 4, n_orient: 2, channels: [2, 3], ..DemoConfig::default() };
        let m = Model::new(cfg.model_spec(), 3).unwrap();
        let bytes = write_checkpoint(&m);
        let back = read_checkpoint(&bytes).unwrap();
        assert_eq!(write_checkpoint(&back), bytes);
        let x = DMatrix::from_fn(m.n_vertices(), 1, |i, _| (i as f64 * 0.37).cos());
        assert_eq!(m.logits(&x).unwrap(), back.logits(&x).unwrap());
    }

    #[test]
    fn spec_validation_catches_mismatches() {
        let mut spec = DemoConfig::default().model_spec();
        spec.layers[3] = LayerSpec::Cheb { order: 4, d_in: 5, d_out: 16 };
        assert!(spec.validate().is_err());
        let mut spec = DemoConfig::default().model_spec();
        spec.levels.pop();
        assert!(spec.validate().is_err());
    }
}
