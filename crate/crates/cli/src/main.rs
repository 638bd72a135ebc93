//! `liegraph` command-line front end.
//!
//! Exit codes: 0 success or passing check, 1 failing check, 2 usage or
//! input error (bad flags, unreadable or corrupted files, out-of-range ids).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use liegraph::graph::{self, LambdaMode, Orientation, TieRule};
use liegraph::network::{self, DemoConfig, CLMD_MAGIC};
use liegraph::spectral::{self, fmt_f64, CLSG_MAGIC};
use liegraph::{GraphConfig, GridKind, GridSpec, Laplacian, ManifoldGraph};
use nalgebra::DMatrix;

/// Equivariance errors at or below this pass.
const EQUIVARIANCE_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "liegraph", version, about = "Anisotropic manifold graphs on SE(2) and SO(3)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a grid, build its K-NN graph and write a CLGR file.
    BuildGraph(BuildGraph),
    /// Summarise a CLGR, CLSG or CLMD file.
    Info {
        path: PathBuf,
    },
    /// Smallest Laplacian eigenpairs as CSV (one row per eigenpair).
    Eigenmaps {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value = "eigenmaps.csv")]
        out: PathBuf,
        /// Also write the eigenvectors as a CLSG signal.
        #[arg(long)]
        signal: Option<PathBuf>,
    },
    /// Heat diffusion of an impulse, `exp(−τΔ)δ`, as CSV.
    Diffuse {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        impulse: usize,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 30)]
        order: usize,
        #[arg(long, default_value = "diffusion.csv")]
        out: PathBuf,
    },
    /// Relative Frobenius error of the Laplacian under quarter-turn permutations.
    CheckEquivariance {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        quarter_turns: i64,
    },
    /// Random edge or vertex sub-graph.
    Sample {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, conflicts_with = "vertices", required_unless_present = "vertices")]
        edges: Option<f64>,
        #[arg(long)]
        vertices: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "sampled.clgr")]
        out: PathBuf,
    },
    /// Train the oriented-bar classifier and write per-epoch metrics.
    TrainDemo {
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "metrics.csv")]
        metrics: PathBuf,
        /// Write the trained model as a CLMD checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Se2,
    So3,
    R2,
    S2,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Ties {
    KeepTied,
    LowerId,
}

#[derive(Args)]
struct BuildGraph {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    /// Icosahedral subdivision level (so3, s2).
    #[arg(long)]
    level: Option<usize>,
    /// Number of orientation slices (se2, so3).
    #[arg(long)]
    orient: Option<usize>,
    /// ε itself, not ε²: for ε² = 0.1 pass `--epsilon 0.3162`.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sets ξ through ξ² = α·|V_o|/|V_s|.
    #[arg(long, conflicts_with = "xi")]
    alpha: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    /// Neighbours per vertex (default 16 on lifted grids, 8 on base spaces).
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long, value_enum, default_value_t = Ties::KeepTied)]
    ties: Ties,
    /// Use λ_max = 2 instead of power iteration.
    #[arg(long)]
    lambda_fixed: bool,
    #[arg(long, default_value = "graph.clgr")]
    out: PathBuf,
}

enum Failure {
    /// Bad flags or input: exit 2.
    Usage(String),
    /// A check ran and failed: exit 1.
    Check,
}

impl From<liegraph::Error> for Failure {
    fn from(e: liegraph::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::BuildGraph(b) => build_graph(b),
        Command::Info { path } => info(&path),
        Command::Eigenmaps { graph, k, out, signal } => eigenmaps(&graph, k, &out, signal.as_deref()),
        Command::Diffuse { graph, impulse, tau, order, out } => diffuse(&graph, impulse, tau, order, &out),
        Command::CheckEquivariance { graph, quarter_turns } => check_equivariance(&graph, quarter_turns),
        Command::Sample { graph, edges, vertices, seed, out } => sample(&graph, edges, vertices, seed, &out),
        Command::TrainDemo { epochs, lr, seed, metrics, checkpoint } => {
            train_demo(epochs, lr, seed, &metrics, checkpoint.as_deref())
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Outcome {
    fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<(ManifoldGraph, Laplacian), Failure> {
    let bytes = read(path)?;
    let (g, lap) = graph::deserialize(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let lap = match lap {
        Some(l) => l,
        None => {
            let mut l = graph::laplacian(&g);
            let est = graph::lambda_max(&l, LambdaMode::default())?;
            l.lambda_max = Some(est.value);
            l.lambda_warning = !est.converged;
            l
        }
    };
    Ok((g, lap))
}

fn spec_string(s: &GridSpec) -> String {
    match s.kind {
        GridKind::Se2Grid => format!("nx={} ny={} orient={}", s.nx, s.ny, s.n_orient),
        GridKind::R2Grid => format!("nx={} ny={}", s.nx, s.ny),
        GridKind::So3Icosahedral => format!("level={} orient={}", s.level, s.n_orient),
        GridKind::S2Icosahedral => format!("level={}", s.level),
    }
}

fn graph_summary(g: &ManifoldGraph, lambda: Option<f64>) -> String {
    let (same, cross) = g.neighbor_ratio();
    let mut s = String::new();
    let _ = writeln!(s, "vertices: {}", g.n_vertices());
    let _ = writeln!(s, "edges: {}", g.n_edges());
    let _ = writeln!(s, "knn: {}{}", g.knn, if g.knn_clamped { " (clamped to |V|-1)" } else { "" });
    let _ = writeln!(s, "bandwidth t: {}", fmt_f64(g.bandwidth));
    if let Some(l) = lambda {
        let _ = writeln!(s, "lambda_max: {}", fmt_f64(l));
    }
    let _ = write!(s, "neighbors: same-slice {same:.4}, cross-slice {cross:.4}");
    s
}

fn build_graph(b: BuildGraph) -> Outcome {
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| usage(format!("--kind needs --{flag}")));
    let forbid = |present: bool, flag: &str| {
        if present {
            Err(usage(format!("--{flag} does not apply to this --kind")))
        } else {
            Ok(())
        }
    };
    let spec = match b.kind {
        Kind::Se2 | Kind::R2 => {
            forbid(b.level.is_some(), "level")?;
            let (nx, ny) = (need(b.nx, "nx")?, need(b.ny, "ny")?);
            if b.kind == Kind::Se2 {
                GridSpec::se2(nx, ny, need(b.orient, "orient")?)
            } else {
                forbid(b.orient.is_some(), "orient")?;
                GridSpec::r2(nx, ny)
            }
        }
        Kind::So3 | Kind::S2 => {
            forbid(b.nx.is_some(), "nx")?;
            forbid(b.ny.is_some(), "ny")?;
            let level = need(b.level, "level")?;
            if b.kind == Kind::So3 {
                GridSpec::so3(level, need(b.orient, "orient")?)
            } else {
                forbid(b.orient.is_some(), "orient")?;
                GridSpec::s2(level)
            }
        }
    };
    spec.validate()?;
    let isotropic = spec.kind.is_isotropic();
    let mut cfg = if isotropic {
        if b.epsilon.is_some() || b.alpha.is_some() || b.xi.is_some() {
            eprintln!("note: {} graphs use the isotropic metric; metric flags ignored", spec.kind.name());
        }
        GraphConfig::isotropic(spec)
    } else {
        let orientation = match (b.alpha, b.xi) {
            (Some(a), None) => Orientation::Alpha(a),
            (None, Some(x)) => Orientation::Xi(x),
            _ => return Err(usage("exactly one of --alpha / --xi is required")),
        };
        GraphConfig::new(spec, b.epsilon.unwrap_or(1.0), orientation)
    };
    cfg.knn = b.knn;
    cfg.ties = match b.ties {
        Ties::KeepTied => TieRule::KeepTied,
        Ties::LowerId => TieRule::LowerId,
    };
    let (metric, alpha) = cfg.metric()?;
    let mode = if b.lambda_fixed { LambdaMode::Fixed2 } else { LambdaMode::default() };
    println!(
        "config: build-graph kind={} {} epsilon={} xi={} alpha={} knn={} ties={} lambda={} out={}",
        spec.kind.name(),
        spec_string(&spec),
        metric.epsilon(),
        metric.xi(),
        alpha.map_or("none".into(), |a| a.to_string()),
        cfg.effective_knn(),
        if b.ties == Ties::KeepTied { "keep-tied" } else { "lower-id" },
        if b.lambda_fixed { "fixed-2" } else { "power-iteration" },
        b.out.display()
    );
    if isotropic {
        println!("metric: isotropic (epsilon = xi = 1 forced)");
    }
    let g = cfg.build()?;
    let mut lap = graph::laplacian(&g);
    let est = graph::lambda_max(&lap, mode)?;
    lap.lambda_max = Some(est.value);
    if !est.converged {
        eprintln!("warning: power iteration did not converge; using lambda_max = 2");
    }
    write(&b.out, graph::serialize(&g, Some(&lap)))?;
    println!("{}", graph_summary(&g, Some(est.value)));
    Ok(())
}

fn info(path: &Path) -> Outcome {
    println!("config: info path={}", path.display());
    let bytes = read(path)?;
    let err = |e: liegraph::Error| usage(format!("{}: {e}", path.display()));
    match bytes.get(..4) {
        Some(m) if m == CLSG_MAGIC => {
            let x = spectral::read_signal(&bytes).map_err(err)?;
            println!("format: CLSG signal");
            println!("shape: {} x {}", x.nrows(), x.ncols());
        }
        Some(m) if m == CLMD_MAGIC => {
            let model = network::read_checkpoint(&bytes).map_err(err)?;
            println!("format: CLMD model");
            for (i, lvl) in model.spec.levels.iter().enumerate() {
                println!("level {i}: {} {}", lvl.spec.kind.name(), spec_string(&lvl.spec));
            }
            println!("layers: {}", model.spec.layers.len());
            println!("parameters: {}", model.n_params());
            println!("classes: {}", model.n_classes());
        }
        _ => {
            let (g, lap) = graph::deserialize(&bytes).map_err(err)?;
            println!("format: CLGR graph");
            println!("kind: {} {}", g.vertices.spec.kind.name(), spec_string(&g.vertices.spec));
            println!("epsilon: {}  xi: {}", fmt_f64(g.metric.epsilon()), fmt_f64(g.metric.xi()));
            println!("{}", graph_summary(&g, lap.and_then(|l| l.lambda_max)));
        }
    }
    Ok(())
}

fn eigenmaps(path: &Path, k: usize, out: &Path, signal: Option<&Path>) -> Outcome {
    let (g, lap) = load_graph(path)?;
    if k == 0 || k > g.n_vertices() {
        return Err(usage(format!("--k must be in 1..={}", g.n_vertices())));
    }
    println!(
        "config: eigenmaps graph={} k={k} out={} signal={}",
        path.display(),
        out.display(),
        signal.map_or("none".into(), |p| p.display().to_string())
    );
    let es = spectral::eigensystem(&lap, k)?;
    write(out, spectral::eigenmap_csv(&es))?;
    if let Some(p) = signal {
        write(p, spectral::eigenmap_signal(&es))?;
    }
    let shown: Vec<String> = es.values.iter().take(8).map(|v| format!("{v:.6}")).collect();
    println!("eigenvalues: {}{}", shown.join(" "), if k > 8 { " ..." } else { "" });
    Ok(())
}

fn diffuse(path: &Path, impulse: usize, tau: f64, order: usize, out: &Path) -> Outcome {
    let (g, lap) = load_graph(path)?;
    let n = g.n_vertices();
    if impulse >= n {
        return Err(usage(format!("--impulse {impulse} out of range (graph has {n} vertices)")));
    }
    println!(
        "config: diffuse graph={} impulse={impulse} tau={} order={order} out={}",
        path.display(),
        tau,
        out.display()
    );
    let mut x = DMatrix::zeros(n, 1);
    x[(impulse, 0)] = 1.0;
    let y = spectral::heat_diffuse(&lap, &x, tau, order)?;
    let planar = g.vertices.spec.kind.is_planar();
    let mut csv = String::from(if planar { "vertex_id,x,y,theta,value\n" } else { "vertex_id,x,y,z,alpha,value\n" });
    for (id, e) in g.vertices.elements.iter().enumerate() {
        let p = e.position();
        let coords = if planar { &p[..2] } else { &p[..] };
        let _ = write!(csv, "{id}");
        for c in coords.iter().chain(std::iter::once(&e.orientation())) {
            let _ = write!(csv, ",{}", fmt_f64(*c));
        }
        let _ = writeln!(csv, ",{}", fmt_f64(y[(id, 0)]));
    }
    write(out, csv)?;
    println!("total: {}", fmt_f64(y.sum()));
    if planar && g.vertices.is_full_grid() && tau > 0.0 {
        let slice = g.vertices.split_id(impulse).1;
        match spectral::slice_anisotropy(&g.vertices, y.as_slice(), slice) {
            Ok(r) => println!("anisotropy: slice {slice} forward/perpendicular variance ratio {r:.6}"),
            Err(e) => println!("anisotropy: unavailable ({e})"),
        }
    }
    Ok(())
}

fn check_equivariance(path: &Path, quarter_turns: i64) -> Outcome {
    let (g, lap) = load_graph(path)?;
    println!(
        "config: check-equivariance graph={} quarter-turns={quarter_turns} tol={}",
        path.display(),
        EQUIVARIANCE_TOL
    );
    if !g.vertices.is_full_grid() {
        return Err(usage("equivariance check needs a full (unsampled) grid"));
    }
    let perm = spectral::rotation_permutation(&g.vertices.spec, quarter_turns)?;
    let err = spectral::equivariance_error(&lap, &perm)?;
    let pass = err <= EQUIVARIANCE_TOL;
    println!("relative Frobenius error: {}", fmt_f64(err));
    println!("{}", if pass { "PASS" } else { "FAIL" });
    if pass {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn sample(path: &Path, edges: Option<f64>, vertices: Option<f64>, seed: u64, out: &Path) -> Outcome {
    let (g, _) = load_graph(path)?;
    let (what, kappa) = match (edges, vertices) {
        (Some(k), None) => ("edges", k),
        (None, Some(k)) => ("vertices", k),
        _ => return Err(usage("exactly one of --edges / --vertices is required")),
    };
    println!(
        "config: sample graph={} {what}={} seed={seed} out={}",
        path.display(),
        kappa,
        out.display()
    );
    let sub = if what == "edges" { g.sample_edges(kappa, seed)? } else { g.sample_vertices(kappa, seed)?.0 };
    let mut lap = graph::laplacian(&sub);
    let est = graph::lambda_max(&lap, LambdaMode::default())?;
    lap.lambda_max = Some(est.value);
    write(out, graph::serialize(&sub, Some(&lap)))?;
    if what == "edges" {
        println!("kept edges: {} of {} ({:.4})", sub.n_edges(), g.n_edges(), sub.n_edges() as f64 / g.n_edges().max(1) as f64);
    } else {
        println!("kept vertices: {} of {}", sub.n_vertices(), g.n_vertices());
    }
    println!("{}", graph_summary(&sub, Some(est.value)));
    Ok(())
}

fn train_demo(epochs: usize, lr: f64, seed: u64, metrics: &Path, checkpoint: Option<&Path>) -> Outcome {
    let cfg = DemoConfig { epochs, lr, seed, ..DemoConfig::default() };
    println!(
        "config: train-demo epochs={epochs} lr={} seed={seed} nx={} orient={} epsilon={} alpha={} order={} \
         channels={}x{} pool={:?} train={} test={} batch={} metrics={} checkpoint={}",
        lr,
        cfg.nx,
        cfg.n_orient,
        cfg.epsilon,
        cfg.alpha,
        cfg.order,
        cfg.channels[0],
        cfg.channels[1],
        cfg.pool,
        cfg.train,
        cfg.test,
        cfg.batch,
        metrics.display(),
        checkpoint.map_or("none".into(), |p| p.display().to_string())
    );
    let report = network::train_demo(&cfg)?;
    let mut csv = String::from("epoch,loss,accuracy,rotation_consistency\n");
    for m in &report.metrics {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            m.epoch,
            fmt_f64(m.loss),
            fmt_f64(m.test_accuracy),
            fmt_f64(m.rotation_consistency)
        );
        println!(
            "epoch {:>3}  loss {:.4}  train {:.3}  test {:.3}  rotation {:.3}",
            m.epoch, m.loss, m.accuracy, m.test_accuracy, m.rotation_consistency
        );
    }
    write(metrics, csv)?;
    if let Some(p) = checkpoint {
        write(p, network::write_checkpoint(&report.model))?;
    }
    Ok(())
}
