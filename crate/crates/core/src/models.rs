//! Built-in Bloch Hamiltonians and grid-sampled models.
//!
//! Two families are built in, both two-band and three-dimensional:
//!
//! * a lattice model `H(k; m) = e^{i k_z/2} [cos(k_z/2 − c) sin k_x σ_x +
//!   cos(k_z/2 + c) sin k_y σ_y + (sin k_z cos(k_z/2) − 2m sin(k_z/2)) σ_z]`
//!   in two phase variants c = π/3 ([`LatticeVariant::Main`]) and c = π/4
//!   ([`LatticeVariant::Supp`]); the half-angle prefactor makes the unwrapped
//!   determinant phase wind with k_z while the model stays exactly 2π-periodic,
//! * a k·p model `½(σ₊ + k₊σ₋) + k_z σ_z` hosting an exceptional nodal line,
//!   optionally perturbed by `(k₋+e^{−iα})(k₊+e^{−iα})σ₊ +
//!   (k₊+e^{iα})(k₋+e^{iα})k₊σ₋` which ejects a pair of Weyl points.
//!
//! Externally sampled models are ingested through a binary grid format and are
//! evaluated only at their stored nodes — no interpolation, since interpolated
//! matrices would break the analyticity assumptions behind eigenvalue tracking.

use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, TAU};
use std::fmt;
use std::io::{self, Read, Write};
use thiserror::Error;

pub type CMat = Array2<Complex64>;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// A point in momentum space, 1 to 3 components. Lattice-model components are
/// radians and interpreted modulo 2π; k·p components are dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Momentum {
    coords: [f64; 3],
    dim: usize,
}

impl Momentum {
    pub fn new(components: &[f64]) -> Self {
        assert!(
            (1..=3).contains(&components.len()),
            "momentum must have 1 to 3 components"
        );
        let mut coords = [0.0; 3];
        coords[..components.len()].copy_from_slice(components);
        Momentum {
            coords,
            dim: components.len(),
        }
    }

    pub fn k1(t: f64) -> Self {
        Self::new(&[t])
    }

    pub fn k3(kx: f64, ky: f64, kz: f64) -> Self {
        Self::new(&[kx, ky, kz])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    /// The combination k₊ = k_x + i k_y (needs dim ≥ 2).
    pub fn k_plus(&self) -> Complex64 {
        assert!(self.dim >= 2);
        Complex64::new(self.coords[0], self.coords[1])
    }

    pub fn distance(&self, other: &Momentum) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Display for Momentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.components().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Phase offset of the lattice model: π/3 for the main variant, π/4 for the
/// alternative. The two differ only in this offset; both are exposed because
/// node inventories and Wilson flows are anchored to a specific variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeVariant {
    Main,
    Supp,
}

impl LatticeVariant {
    fn offset(self) -> f64 {
        match self {
            LatticeVariant::Main => FRAC_PI_3,
            LatticeVariant::Supp => FRAC_PI_4,
        }
    }
}

fn mat2(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> CMat {
    Array2::from_shape_vec((2, 2), vec![m00, m01, m10, m11]).unwrap()
}

/// Evaluates the lattice Hamiltonian. Total on all of momentum space;
/// components are reduced modulo 2π before evaluation, so a shift by a
/// reciprocal lattice vector is a no-op.
pub fn eval_lattice(k: &Momentum, m: f64, variant: LatticeVariant) -> CMat {
    assert_eq!(k.dim(), 3, "lattice model lives in three dimensions");
    let kx = k.coords[0].rem_euclid(TAU);
    let ky = k.coords[1].rem_euclid(TAU);
    let kz = k.coords[2].rem_euclid(TAU);
    let c = variant.offset();
    let half = kz / 2.0;
    let dx = (half - c).cos() * kx.sin();
    let dy = (half + c).cos() * ky.sin();
    let dz = kz.sin() * half.cos() - 2.0 * m * half.sin();
    let pref = Complex64::from_polar(1.0, half);
    // d·σ with real coefficients, then the winding prefactor
    mat2(
        pref * dz,
        pref * Complex64::new(dx, -dy),
        pref * Complex64::new(dx, dy),
        pref * (-dz),
    )
}

/// Evaluates the k·p Hamiltonian ½(σ₊ + k₊σ₋) + k_zσ_z, plus the Weyl-pair
/// perturbation when requested. σ_± = σ_x ± iσ_y.
pub fn eval_kp(k: &Momentum, alpha: f64, include_perturbation: bool) -> CMat {
    assert_eq!(k.dim(), 3, "k·p model lives in three dimensions");
    let kp = k.k_plus();
    let km = kp.conj();
    let kz = k.coords[2];
    let mut h_plus = Complex64::new(0.5, 0.0);
    let mut h_minus = 0.5 * kp;
    if include_perturbation {
        let e_neg = Complex64::from_polar(1.0, -alpha);
        let e_pos = Complex64::from_polar(1.0, alpha);
        h_plus += (km + e_neg) * (kp + e_neg);
        h_minus += (kp + e_pos) * (km + e_pos) * kp;
    }
    // h₊σ₊ + h₋σ₋ + k_zσ_z = [[k_z, 2h₊], [2h₋, −k_z]]
    mat2(
        Complex64::new(kz, 0.0),
        2.0 * h_plus,
        2.0 * h_minus,
        Complex64::new(-kz, 0.0),
    )
}

/// In-plane Weyl points of the perturbed k·p model: two points at
/// k₊ = (1/√2) e^{±iφ}, k_z = 0 with cos φ = −√2 cos α, which exist exactly
/// when |√2 cos α| < 1 (the open window α ∈ (π/4, 3π/4) modulo 2π). At the
/// window boundary the pair merges and the list is empty.
pub fn kp_weyl_positions(alpha: f64) -> Vec<Momentum> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let cos_phi = -std::f64::consts::SQRT_2 * alpha.cos();
    if cos_phi.abs() >= 1.0 {
        return Vec::new();
    }
    let sin_phi = (1.0 - cos_phi * cos_phi).sqrt();
    let kx = r * cos_phi;
    let ky = r * sin_phi;
    vec![Momentum::k3(kx, -ky, 0.0), Momentum::k3(kx, ky, 0.0)]
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(
        "momentum component {value} on axis {axis} does not sit on a grid node \
         (nearest node {nearest}); grid models are evaluated only at stored nodes"
    )]
    GridMisaligned {
        axis: usize,
        value: f64,
        nearest: f64,
    },
    #[error("momentum has {got} components but the model is {expected}-dimensional")]
    DimensionMismatch { got: usize, expected: usize },
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("i/o error reading grid: {0}")]
    Io(#[from] io::Error),
    #[error("malformed grid header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("grid dimension mismatch at byte {offset}: {reason}")]
    DimensionMismatch { offset: usize, reason: String },
    #[error("non-finite matrix entry at byte {offset}")]
    NonFinite { offset: usize },
}

/// One sampled axis: `nodes` uniformly spaced points starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub nodes: usize,
    pub start: f64,
    pub step: f64,
    pub periodic: bool,
}

impl GridAxis {
    fn span(&self) -> f64 {
        self.step * self.nodes as f64
    }

    fn node_index(&self, value: f64, axis: usize) -> Result<usize, ModelError> {
        let rel = if self.periodic {
            (value - self.start).rem_euclid(self.span())
        } else {
            value - self.start
        };
        let idx = (rel / self.step).round();
        let nearest = self.start + idx * self.step;
        if (rel - idx * self.step).abs() > 1e-9 {
            return Err(ModelError::GridMisaligned {
                axis,
                value,
                nearest,
            });
        }
        let mut i = idx as isize;
        if self.periodic {
            i = i.rem_euclid(self.nodes as isize);
        }
        if i < 0 || i as usize >= self.nodes {
            return Err(ModelError::GridMisaligned {
                axis,
                value,
                nearest,
            });
        }
        Ok(i as usize)
    }
}

/// A model defined by N×N matrices stored on a rectangular grid of momenta,
/// row-major in axis order. Evaluation reproduces stored matrices bit-exactly
/// and fails on any momentum that is not a node.
#[derive(Debug, Clone)]
pub struct GridModel {
    bands: usize,
    axes: Vec<GridAxis>,
    data: Vec<CMat>,
}

impl GridModel {
    pub fn new(bands: usize, axes: Vec<GridAxis>, data: Vec<CMat>) -> Result<Self, GridError> {
        let expected: usize = axes.iter().map(|a| a.nodes).product();
        if data.len() != expected {
            return Err(GridError::DimensionMismatch {
                offset: 0,
                reason: format!(
                    "{} matrices supplied for {} grid nodes",
                    data.len(),
                    expected
                ),
            });
        }
        for (i, m) in data.iter().enumerate() {
            if m.shape() != [bands, bands] {
                return Err(GridError::DimensionMismatch {
                    offset: 0,
                    reason: format!(
                        "matrix {i} has shape {:?}, expected {bands}×{bands}",
                        m.shape()
                    ),
                });
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(GridError::NonFinite { offset: 0 });
            }
        }
        Ok(GridModel { bands, axes, data })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn eval(&self, k: &Momentum) -> Result<CMat, ModelError> {
        if k.dim() != self.axes.len() {
            return Err(ModelError::DimensionMismatch {
                got: k.dim(),
                expected: self.axes.len(),
            });
        }
        let mut flat = 0usize;
        for (axis, (coord, ax)) in k.components().iter().zip(&self.axes).enumerate() {
            let i = ax.node_index(*coord, axis)?;
            flat = flat * ax.nodes + i;
        }
        Ok(self.data[flat].clone())
    }
}

const GRID_MAGIC: &str = "NHGRID1";

/// Reads a grid model. Format: one ASCII header line
/// `NHGRID1 N=<bands> D=<dim> AXES=<n1,...> PERIODIC=<0/1,...>\n` followed by
/// little-endian binary data — for each node in row-major axis order, N²
/// complex entries as (real, imag) f64 pairs, row-major within the matrix.
/// Axes span [0, 2π) with uniform spacing 2π/nᵢ.
pub fn load_grid_model<R: Read>(mut source: R) -> Result<GridModel, GridError> {
    // header line
    let mut header = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = source.read(&mut byte)?;
        if n == 0 {
            return Err(GridError::MalformedHeader {
                offset: header.len(),
                reason: "unterminated header line".into(),
            });
        }
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
        if header.len() > 4096 {
            return Err(GridError::MalformedHeader {
                offset: header.len(),
                reason: "header line too long".into(),
            });
        }
    }
    let header_len = header.len() + 1;
    let text = String::from_utf8(header).map_err(|e| GridError::MalformedHeader {
        offset: e.utf8_error().valid_up_to(),
        reason: "header is not valid UTF-8".into(),
    })?;
    let bad = |reason: &str| GridError::MalformedHeader {
        offset: 0,
        reason: reason.to_string(),
    };
    let mut fields = text.split_whitespace();
    if fields.next() != Some(GRID_MAGIC) {
        return Err(bad("missing NHGRID1 magic"));
    }
    let mut bands = None;
    let mut dim = None;
    let mut axes_counts: Option<Vec<usize>> = None;
    let mut periodic: Option<Vec<bool>> = None;
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| bad("field without '='"))?;
        match key {
            "N" => bands = Some(value.parse().map_err(|_| bad("bad N"))?),
            "D" => dim = Some(value.parse().map_err(|_| bad("bad D"))?),
            "AXES" => {
                axes_counts = Some(
                    value
                        .split(',')
                        .map(|v| v.parse().map_err(|_| bad("bad AXES entry")))
                        .collect::<Result<_, _>>()?,
                )
            }
            "PERIODIC" => {
                periodic = Some(
                    value
                        .split(',')
                        .map(|v| match v {
                            "0" => Ok(false),
                            "1" => Ok(true),
                            _ => Err(bad("PERIODIC entries must be 0 or 1")),
                        })
                        .collect::<Result<_, _>>()?,
                )
            }
            other => return Err(bad(&format!("unknown field {other:?}"))),
        }
    }
    let bands: usize = bands.ok_or_else(|| bad("missing N"))?;
    let dim: usize = dim.ok_or_else(|| bad("missing D"))?;
    let axes_counts = axes_counts.ok_or_else(|| bad("missing AXES"))?;
    let periodic = periodic.ok_or_else(|| bad("missing PERIODIC"))?;
    if bands == 0 || dim == 0 || dim > 3 {
        return Err(bad("N must be positive and D in 1..=3"));
    }
    if axes_counts.len() != dim || periodic.len() != dim {
        return Err(GridError::DimensionMismatch {
            offset: 0,
            reason: format!(
                "D={dim} but AXES has {} entries and PERIODIC has {}",
                axes_counts.len(),
                periodic.len()
            ),
        });
    }
    if axes_counts.contains(&0) {
        return Err(bad("axis node counts must be positive"));
    }

    let axes: Vec<GridAxis> = axes_counts
        .iter()
        .zip(&periodic)
        .map(|(&nodes, &periodic)| GridAxis {
            nodes,
            start: 0.0,
            step: TAU / nodes as f64,
            periodic,
        })
        .collect();
    let total: usize = axes_counts.iter().product();
    let entry_count = bands * bands;

    let mut data = Vec::with_capacity(total);
    let mut offset = header_len;
    let mut buf = vec![0u8; entry_count * 16];
    for _ in 0..total {
        source.read_exact(&mut buf).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                GridError::DimensionMismatch {
                    offset,
                    reason: format!("file ends before all {total} node matrices are read"),
                }
            } else {
                GridError::Io(e)
            }
        })?;
        let mut m = Array2::from_elem((bands, bands), C0);
        for (e, slot) in m.iter_mut().enumerate() {
            let re = f64::from_le_bytes(buf[e * 16..e * 16 + 8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[e * 16 + 8..e * 16 + 16].try_into().unwrap());
            if !re.is_finite() || !im.is_finite() {
                return Err(GridError::NonFinite {
                    offset: offset + e * 16,
                });
            }
            *slot = Complex64::new(re, im);
        }
        data.push(m);
        offset += entry_count * 16;
    }
    // anything left over means the header undercounted the nodes
    let trailing = source.read(&mut byte)?;
    if trailing != 0 {
        return Err(GridError::DimensionMismatch {
            offset,
            reason: "file holds more matrices than the AXES header declares".into(),
        });
    }
    GridModel::new(bands, axes, data)
}

/// Writes a grid model in the format read by [`load_grid_model`].
pub fn write_grid_model<W: Write>(model: &GridModel, mut sink: W) -> io::Result<()> {
    let axes: Vec<String> = model.axes.iter().map(|a| a.nodes.to_string()).collect();
    let per: Vec<String> = model
        .axes
        .iter()
        .map(|a| if a.periodic { "1" } else { "0" }.to_string())
        .collect();
    writeln!(
        sink,
        "{GRID_MAGIC} N={} D={} AXES={} PERIODIC={}",
        model.bands,
        model.axes.len(),
        axes.join(","),
        per.join(",")
    )?;
    for m in &model.data {
        for z in m.iter() {
            sink.write_all(&z.re.to_le_bytes())?;
            sink.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

/// A momentum-space Hamiltonian family. The built-in variants are pure
/// functions of (parameters, k); evaluators are immutable and safe to share
/// across worker threads.
#[derive(Debug, Clone)]
pub enum BlochModel {
    /// Lattice model with phase offset π/3.
    LatticeMain {
        m: f64,
    },
    /// Lattice model with phase offset π/4.
    LatticeSupp {
        m: f64,
    },
    /// k·p exceptional-line model with the Weyl-pair perturbation.
    KpExceptional {
        alpha: f64,
    },
    /// k·p exceptional-line model without the perturbation.
    KpBase,
    Grid(GridModel),
}

impl BlochModel {
    pub fn bands(&self) -> usize {
        match self {
            BlochModel::Grid(g) => g.bands(),
            _ => 2,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BlochModel::Grid(g) => g.dim(),
            _ => 3,
        }
    }

    pub fn periodic(&self, axis: usize) -> bool {
        match self {
            BlochModel::LatticeMain { .. } | BlochModel::LatticeSupp { .. } => axis < 3,
            BlochModel::KpExceptional { .. } | BlochModel::KpBase => false,
            BlochModel::Grid(g) => g.axes().get(axis).is_some_and(|a| a.periodic),
        }
    }

    pub fn eval(&self, k: &Momentum) -> Result<CMat, ModelError> {
        if k.dim() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                got: k.dim(),
                expected: self.dim(),
            });
        }
        match self {
            BlochModel::LatticeMain { m } => Ok(eval_lattice(k, *m, LatticeVariant::Main)),
            BlochModel::LatticeSupp { m } => Ok(eval_lattice(k, *m, LatticeVariant::Supp)),
            BlochModel::KpExceptional { alpha } => Ok(eval_kp(k, *alpha, true)),
            BlochModel::KpBase => Ok(eval_kp(k, 0.0, false)),
            BlochModel::Grid(g) => g.eval(k),
        }
    }
}

/// A closed loop in momentum space, parameterized over t ∈ [0, 1).
#[derive(Debug, Clone)]
pub enum LoopSpec {
    /// One full 2π period along a coordinate axis; `fixed` holds the other
    /// components in axis order.
    Axis { axis: usize, fixed: Vec<f64> },
    /// A circle of the given radius in the plane normal to a coordinate axis,
    /// traversed right-handedly about that axis.
    Circle {
        center: Momentum,
        radius: f64,
        normal: usize,
    },
    /// An explicit closed polyline; the first and last vertices must coincide.
    Polyline(Vec<Momentum>),
}

impl LoopSpec {
    pub fn dim(&self) -> usize {
        match self {
            LoopSpec::Axis { fixed, .. } => fixed.len() + 1,
            LoopSpec::Circle { center, .. } => center.dim(),
            LoopSpec::Polyline(points) => points.first().map_or(0, |p| p.dim()),
        }
    }

    /// Axis and circle loops close by construction; a polyline must be given
    /// with coinciding first and last vertices.
    pub fn is_closed(&self) -> bool {
        match self {
            LoopSpec::Polyline(points) => match (points.first(), points.last()) {
                (Some(a), Some(b)) => points.len() >= 3 && a == b,
                _ => false,
            },
            _ => true,
        }
    }

    /// The loop point at parameter t (wrapped into [0, 1)).
    pub fn point_at(&self, t: f64) -> Momentum {
        let t = t - t.floor();
        match self {
            LoopSpec::Axis { axis, fixed } => {
                let dim = fixed.len() + 1;
                assert!(*axis < dim);
                let mut coords = [0.0; 3];
                let mut fi = 0;
                for (d, slot) in coords.iter_mut().enumerate().take(dim) {
                    if d == *axis {
                        *slot = TAU * t;
                    } else {
                        *slot = fixed[fi];
                        fi += 1;
                    }
                }
                Momentum::new(&coords[..dim])
            }
            LoopSpec::Circle {
                center,
                radius,
                normal,
            } => {
                assert_eq!(center.dim(), 3, "circles need three-dimensional momenta");
                let angle = TAU * t;
                let (ca, sa) = (angle.cos(), angle.sin());
                let k = center.components();
                let (dx, dy, dz) = match normal {
                    0 => (0.0, radius * ca, radius * sa),
                    1 => (radius * sa, 0.0, radius * ca),
                    2 => (radius * ca, radius * sa, 0.0),
                    _ => panic!("normal axis must be 0, 1 or 2"),
                };
                Momentum::k3(k[0] + dx, k[1] + dy, k[2] + dz)
            }
            LoopSpec::Polyline(points) => {
                assert!(points.len() >= 2, "polyline needs at least two vertices");
                let segments = points.len() - 1;
                let scaled = t * segments as f64;
                let seg = (scaled.floor() as usize).min(segments - 1);
                let frac = scaled - seg as f64;
                let a = points[seg].components();
                let b = points[seg + 1].components();
                let coords: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + frac * (y - x)).collect();
                Momentum::new(&coords)
            }
        }
    }

    /// `resolution` evenly spaced samples over one traversal, open at t = 1.
    pub fn sample(&self, resolution: usize) -> Vec<Momentum> {
        assert!(resolution >= 2);
        (0..resolution)
            .map(|i| self.point_at(i as f64 / resolution as f64))
            .collect()
    }

    /// Same loop traversed backwards.
    pub fn reversed(&self) -> LoopSpec {
        match self {
            LoopSpec::Polyline(points) => {
                LoopSpec::Polyline(points.iter().rev().cloned().collect())
            }
            other => {
                // reverse parametrically via an explicit polyline at high resolution
                let mut pts: Vec<Momentum> = (0..=1024)
                    .map(|i| other.point_at(1.0 - i as f64 / 1024.0))
                    .collect();
                let first = pts[0];
                *pts.last_mut().unwrap() = first;
                LoopSpec::Polyline(pts)
            }
        }
    }
}
