//! Command-line front end: wires the built-in and grid models to the
//! invariant computations and emits machine-readable CSV/JSON.
//!
//! Exit codes: 0 success, 2 usage error (including grid-alignment violations),
//! 3 numerical failure (defective frames, degeneracies, non-convergence),
//! 4 I/O error. Diagnostics go to standard error; machine output goes to
//! standard output or to `--out` files, byte-identical across repeated runs
//! and across thread counts.

use clap::{Args, Parser, Subcommand};
use nhb_core::algebra::Permutation;
use nhb_core::braids::{braid_along_loop, BraidError};
use nhb_core::models::{load_grid_model, BlochModel, GridError, LoopSpec, ModelError, Momentum};
use nhb_core::nodes::{classify_node, find_nodes, nodes_to_json, NodeError, Region};
use nhb_core::spectra::SpectraError;
use nhb_core::wilson::{count_crossings, wilson_flow, write_flow_csv, CylinderSpec, WilsonError};
use serde_json::json;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            // off-node evaluation of a grid model is a misuse of the grid
            // contract, not a numerical failure
            ModelError::GridMisaligned { .. } | ModelError::DimensionMismatch { .. } => {
                usage(e.to_string())
            }
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn spectra_error(e: SpectraError) -> CliError {
    match e {
        SpectraError::Model(m) => m.into(),
        other => CliError::Numerical(other.to_string()),
    }
}

impl From<BraidError> for CliError {
    fn from(e: BraidError) -> Self {
        match e {
            BraidError::Spectra(s) => spectra_error(s),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<WilsonError> for CliError {
    fn from(e: WilsonError) -> Self {
        fn unwrap_slices(e: WilsonError) -> WilsonError {
            match e {
                WilsonError::Slice { source, .. } => unwrap_slices(*source),
                other => other,
            }
        }
        let message = e.to_string();
        match unwrap_slices(e) {
            WilsonError::Spectra(s) => match spectra_error(s) {
                CliError::Usage(m) => CliError::Usage(m),
                _ => CliError::Numerical(message),
            },
            _ => CliError::Numerical(message),
        }
    }
}

impl From<NodeError> for CliError {
    fn from(e: NodeError) -> Self {
        match e {
            NodeError::InvalidRegion(m) => usage(m),
            NodeError::Model(m) => m.into(),
            NodeError::Spectra(s) => spectra_error(s),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// Topological invariants of non-Hermitian Bloch Hamiltonians.
#[derive(Parser, Debug)]
#[command(name = "nhb", version, disable_help_subcommand = true)]
struct Cli {
    /// Worker threads (defaults to the NHB_THREADS environment variable,
    /// then to all cores). Output does not depend on the thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ModelArg {
    /// Model selector: `lattice-main:m=<f>`, `lattice-supp:m=<f>`,
    /// `kp:alpha=<f>[,pert=on|off]`, `kp-base`, or `grid:<path>`.
    #[arg(long)]
    model: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Braid invariant of the eigenvalues along an axis-aligned loop.
    Braid {
        #[command(flatten)]
        model: ModelArg,
        /// Loop description as two tokens: `axis=<x|y|z>` and `at=<a,b>`,
        /// the fixed coordinates of the remaining axes in axis order.
        #[arg(long = "loop", num_args = 2, value_names = ["AXIS", "AT"])]
        loop_spec: Vec<String>,
        /// Samples along the loop.
        #[arg(long, default_value_t = 401)]
        resolution: usize,
    },
    /// Wilson eigenphase flow on a cylinder, CSV export plus crossing report.
    WilsonFlow {
        #[command(flatten)]
        model: ModelArg,
        /// Cylinder center in the (k_x, k_y) plane: `cx,cy`.
        #[arg(long, allow_hyphen_values = true)]
        center: String,
        /// Cylinder radius.
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 401)]
        loop_samples: usize,
        #[arg(long, default_value_t = 401)]
        flow_samples: usize,
        /// CSV output path (`kz,phi1,phi2,mod1,mod2`).
        #[arg(long)]
        out: PathBuf,
    },
    /// Scan a region for band degeneracies and classify each node.
    Nodes {
        #[command(flatten)]
        model: ModelArg,
        /// Search box `x0,x1,y0,y1,z0,z1`; defaults to one full Brillouin
        /// zone for the periodic lattice models.
        #[arg(long, allow_hyphen_values = true)]
        region: Option<String>,
        /// Coarse scan resolution per axis.
        #[arg(long, default_value_t = 32)]
        coarse: usize,
        /// Convergence tolerance on |Disc| at a node.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Probe radius for classification.
        #[arg(long, default_value_t = 0.3)]
        probe_radius: f64,
    },
    /// Per-band sphere charges around a point.
    Chern {
        #[command(flatten)]
        model: ModelArg,
        /// Sphere center `kx,ky,kz`.
        #[arg(long, allow_hyphen_values = true)]
        center: String,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 201)]
        n_theta: usize,
        #[arg(long, default_value_t = 201)]
        n_phi: usize,
    },
    /// Classification group for a pair of boundary permutations.
    Classify {
        /// Number of bands.
        #[arg(long)]
        n: usize,
        /// First permutation in cycle notation, e.g. `"(1 2)"`; empty for
        /// the identity.
        #[arg(long, default_value = "")]
        sigma1: String,
        #[arg(long, default_value = "")]
        sigma2: String,
    },
    /// In-plane Weyl positions of the perturbed k·p model.
    KpWeyl {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
    },
}

fn parse_floats(text: &str, want: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|v| v.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if v.len() == want => Ok(v),
        _ => Err(usage(format!(
            "{what} must be {want} comma-separated numbers, got {text:?}"
        ))),
    }
}

fn parse_model(selector: &str) -> Result<BlochModel, CliError> {
    let (kind, rest) = selector.split_once(':').unwrap_or((selector, ""));
    let params: Vec<(&str, &str)> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',')
            .map(|pair| pair.split_once('=').unwrap_or((pair, "")))
            .collect()
    };
    let lookup = |key: &str| params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
    match kind {
        "lattice-main" | "lattice-supp" => {
            let m: f64 = lookup("m")
                .ok_or_else(|| usage(format!("{kind} needs m=<value>")))?
                .parse()
                .map_err(|_| usage(format!("bad m in {selector:?}")))?;
            Ok(if kind == "lattice-main" {
                BlochModel::LatticeMain { m }
            } else {
                BlochModel::LatticeSupp { m }
            })
        }
        "kp" => {
            let alpha: f64 = lookup("alpha")
                .ok_or_else(|| usage("kp needs alpha=<value>"))?
                .parse()
                .map_err(|_| usage(format!("bad alpha in {selector:?}")))?;
            match lookup("pert").unwrap_or("on") {
                "on" => Ok(BlochModel::KpExceptional { alpha }),
                "off" => Ok(BlochModel::KpBase),
                other => Err(usage(format!("pert must be on or off, got {other:?}"))),
            }
        }
        "kp-base" => Ok(BlochModel::KpBase),
        "grid" => {
            if rest.is_empty() {
                return Err(usage("grid model needs a path: grid:<file>"));
            }
            let file = File::open(rest)
                .map_err(|e| CliError::Io(format!("cannot open grid file {rest:?}: {e}")))?;
            Ok(BlochModel::Grid(load_grid_model(std::io::BufReader::new(file))?))
        }
        other => Err(usage(format!(
            "unknown model kind {other:?} (expected lattice-main, lattice-supp, kp, kp-base or grid)"
        ))),
    }
}

fn parse_loop(model: &BlochModel, tokens: &[String]) -> Result<LoopSpec, CliError> {
    let mut axis: Option<usize> = None;
    let mut fixed: Option<Vec<f64>> = None;
    for token in tokens {
        match token.split_once('=') {
            Some(("axis", v)) => {
                axis = Some(match v {
                    "x" => 0,
                    "y" => 1,
                    "z" => 2,
                    _ => return Err(usage(format!("axis must be x, y or z, got {v:?}"))),
                })
            }
            Some(("at", v)) => {
                let want = model.dim().saturating_sub(1);
                fixed = Some(parse_floats(v, want, "at")?);
            }
            _ => {
                return Err(usage(format!(
                    "loop tokens are axis=<x|y|z> and at=<a,b>, got {token:?}"
                )))
            }
        }
    }
    let axis = axis.ok_or_else(|| usage("loop needs axis=<x|y|z>"))?;
    let fixed = fixed.unwrap_or_default();
    if axis >= model.dim() {
        return Err(usage(format!(
            "loop axis index {axis} out of range for a {}-dimensional model",
            model.dim()
        )));
    }
    if fixed.len() + 1 != model.dim() {
        return Err(usage(format!(
            "at= needs {} fixed coordinates for a {}-dimensional model",
            model.dim() - 1,
            model.dim()
        )));
    }
    Ok(LoopSpec::Axis { axis, fixed })
}

fn default_region(model: &BlochModel) -> Result<Region, CliError> {
    match model {
        BlochModel::LatticeMain { .. } | BlochModel::LatticeSupp { .. } => Ok(Region::full_bz()),
        _ => Err(usage(
            "this model has no default region; pass --region x0,x1,y0,y1,z0,z1",
        )),
    }
}

fn dispatch(command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    let emit = |out: &mut dyn Write, value: serde_json::Value| -> Result<(), CliError> {
        writeln!(out, "{value}").map_err(|e| CliError::Io(e.to_string()))
    };
    match command {
        Command::Braid {
            model,
            loop_spec,
            resolution,
        } => {
            if *resolution < 8 {
                return Err(usage("braid resolution must be at least 8"));
            }
            let model = parse_model(&model.model)?;
            let spec = parse_loop(&model, loop_spec)?;
            let invariant = braid_along_loop(&model, &spec, *resolution)?;
            emit(out, invariant.to_json())
        }
        Command::WilsonFlow {
            model,
            center,
            radius,
            loop_samples,
            flow_samples,
            out: path,
        } => {
            if *loop_samples < 32 || *flow_samples < 32 {
                return Err(usage("wilson-flow needs at least 32 loop and flow samples"));
            }
            if *radius <= 0.0 {
                return Err(usage("cylinder radius must be positive"));
            }
            let model = parse_model(&model.model)?;
            let c = parse_floats(center, 2, "center")?;
            let spec = CylinderSpec {
                loop_samples: *loop_samples,
                flow_samples: *flow_samples,
                ..CylinderSpec::new((c[0], c[1]), *radius)
            };
            let flow = wilson_flow(&model, &spec)?;
            let report = count_crossings(&flow)?;
            let file = File::create(path)
                .map_err(|e| CliError::Io(format!("cannot create {path:?}: {e}")))?;
            write_flow_csv(&flow, std::io::BufWriter::new(file))
                .map_err(|e| CliError::Io(e.to_string()))?;
            emit(out, report.to_json())
        }
        Command::Nodes {
            model,
            region,
            coarse,
            tol,
            probe_radius,
        } => {
            let model = parse_model(&model.model)?;
            let region = match region {
                Some(text) => {
                    let v = parse_floats(text, 6, "region")?;
                    Region::new([v[0], v[2], v[4]], [v[1], v[3], v[5]])
                }
                None => default_region(&model)?,
            };
            let scan = find_nodes(&model, &region, [*coarse; 3], *tol)?;
            let mut classified = Vec::with_capacity(scan.nodes.len());
            for node in &scan.nodes {
                classified.push(classify_node(&model, &node.position, *probe_radius)?);
            }
            emit(out, nodes_to_json(&classified))
        }
        Command::Chern {
            model,
            center,
            radius,
            n_theta,
            n_phi,
        } => {
            if *radius <= 0.0 {
                return Err(usage("sphere radius must be positive"));
            }
            if *n_theta < 16 || *n_phi < 16 {
                return Err(usage("sphere sampling needs at least 16 points per angle"));
            }
            let model = parse_model(&model.model)?;
            let c = parse_floats(center, 3, "center")?;
            let charges = nhb_core::nodes::chern_sphere(
                &model,
                &Momentum::k3(c[0], c[1], c[2]),
                *radius,
                *n_theta,
                *n_phi,
            )?;
            emit(out, json!(charges))
        }
        Command::Classify { n, sigma1, sigma2 } => {
            if *n < 2 {
                return Err(usage("classification needs at least two bands"));
            }
            let s1 = Permutation::from_cycles(*n, sigma1).map_err(|e| usage(e.to_string()))?;
            let s2 = Permutation::from_cycles(*n, sigma2).map_err(|e| usage(e.to_string()))?;
            let group = nhb_core::algebra::classification_group(&s1, &s2)
                .map_err(|e| usage(e.to_string()))?;
            writeln!(out, "{group}").map_err(|e| CliError::Io(e.to_string()))?;
            emit(out, group.to_json())
        }
        Command::KpWeyl { alpha } => {
            let points: Vec<Vec<f64>> = nhb_core::models::kp_weyl_positions(*alpha)
                .iter()
                .map(|p| p.components().to_vec())
                .collect();
            emit(out, json!(points))
        }
    }
}

/// Runs the CLI against explicit argument and output streams; returns the
/// process exit code. `args` must include the program name.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version output; keep its exit code
            // semantics (0 for --help/--version, 2 for usage errors)
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_USAGE;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("NHB_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(err, "error: cannot build thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    // compute into an owned buffer inside the pool, then hand the bytes to
    // the caller's stream (which need not be Send)
    let (result, buffer) = pool.install(|| {
        let mut buffer = Vec::new();
        let result = dispatch(&cli.command, &mut buffer);
        (result, buffer)
    });
    if out.write_all(&buffer).is_err() {
        return EXIT_IO;
    }
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}
