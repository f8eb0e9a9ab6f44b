//! Constellation topology, formation generators, ISL visibility and TOA
//! measurement model.

use nalgebra::{DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbit::{SatelliteState, EARTH, STATE_DIM};

/// Default ISL range limit [m].
pub const ISL_RANGE_LIMIT: f64 = 8.0e6;
/// Default cube edge [m].
pub const DEFAULT_CUBE_EDGE: f64 = 1.0e6;
/// Default planar ring radius [m]; places the ring 11.77° below the local
/// horizon of the formation center at 550 km.
pub const DEFAULT_RING_RADIUS: f64 = 2.764e6;
pub const DEFAULT_ALTITUDE: f64 = 550e3;
pub const DEFAULT_PERTURBATION_SIGMA: f64 = 100e3;

/// Minimum separation below which a LOS direction is undefined [m].
const MIN_LOS_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub tx: usize,
    pub rx: usize,
    /// [m]
    pub distance: f64,
    /// Unit vector from tx to rx.
    pub los: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationGraph {
    pub satellites: Vec<SatelliteState>,
    pub links: Vec<Link>,
    pub epoch: f64,
}

impl ConstellationGraph {
    pub fn new(satellites: Vec<SatelliteState>) -> Self {
        Self {
            satellites,
            links: Vec::new(),
            epoch: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.satellites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.satellites.is_empty()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.satellites.iter().map(|s| s.position).collect()
    }

    /// Full state dimension 8·N.
    pub fn state_dim(&self) -> usize {
        STATE_DIM * self.len()
    }

    /// Link between two nodes with geometry taken from the current positions.
    pub fn link(&self, tx: usize, rx: usize) -> Result<Link> {
        if tx >= self.len() || rx >= self.len() {
            return Err(Error::InvalidArgument(format!("node id out of range: ({tx}, {rx})")));
        }
        let d = self.satellites[rx].position - self.satellites[tx].position;
        let dist = d.norm();
        if !(dist >= MIN_LOS_DISTANCE) {
            return Err(Error::DegenerateLos(tx, rx));
        }
        Ok(Link {
            tx,
            rx,
            distance: dist,
            los: d / dist,
        })
    }

    /// Replace the link set with every pair within `max_range`.
    pub fn with_active_links(mut self, max_range: f64) -> Self {
        self.links = active_links(&self, max_range);
        self
    }

    /// Full mesh over all node pairs.
    pub fn with_full_mesh(self) -> Self {
        self.with_active_links(f64::INFINITY)
    }
}

// ---------------------------------------------------------------------------
// Formation generators
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Planar,
    Cubic,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub count: usize,
    /// [m]
    #[serde(default = "default_altitude")]
    pub altitude: f64,
    /// Cube edge (cubic) or ring radius (planar, random) [m]; kind default when absent.
    #[serde(default)]
    pub scale: Option<f64>,
    /// Per-axis position perturbation for the random kind [m].
    #[serde(default = "default_sigma")]
    pub perturbation_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_altitude() -> f64 {
    DEFAULT_ALTITUDE
}

fn default_sigma() -> f64 {
    DEFAULT_PERTURBATION_SIGMA
}

impl GeometrySpec {
    pub fn new(kind: GeometryKind, count: usize) -> Self {
        Self {
            kind,
            count,
            altitude: DEFAULT_ALTITUDE,
            scale: None,
            perturbation_sigma: DEFAULT_PERTURBATION_SIGMA,
            seed: 0,
        }
    }

    pub fn effective_scale(&self) -> f64 {
        self.scale.unwrap_or(match self.kind {
            GeometryKind::Cubic => DEFAULT_CUBE_EDGE,
            GeometryKind::Planar | GeometryKind::Random => DEFAULT_RING_RADIUS,
        })
    }

    /// Orbital radius of the formation center [m].
    pub fn orbital_radius(&self) -> f64 {
        EARTH.re + self.altitude
    }

    /// Formation center (R_e + altitude)·ẑ.
    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.orbital_radius())
    }
}

/// Cube vertex pattern; the first four form a regular tetrahedron.
const CUBE_VERTICES: [[f64; 3]; 8] = [
    [0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [1.0, 1.0, 1.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

/// Build a formation snapshot around the center (R_e + altitude)·ẑ.
///
/// * planar: `count` satellites equally spaced on the small circle of the
///   orbital shell with radius `scale` about the ẑ axis (all z equal);
/// * cubic: the first `count` vertices of an axis-aligned cube of edge
///   `scale` centered on the formation center;
/// * random: planar plus i.i.d. Gaussian perturbations per coordinate.
///
/// Velocities are circular at each position, clocks are zero, links empty.
pub fn generate_geometry(spec: &GeometrySpec) -> Result<ConstellationGraph> {
    if spec.count < 2 {
        return Err(Error::InvalidGeometry(format!("count = {} < 2", spec.count)));
    }
    if !(spec.altitude > 0.0) {
        return Err(Error::InvalidGeometry("altitude must be > 0".into()));
    }
    let scale = spec.effective_scale();
    if !(scale > 0.0) {
        return Err(Error::InvalidGeometry("scale must be > 0".into()));
    }
    let r = spec.orbital_radius();
    let center = spec.center();
    let positions: Vec<Vector3<f64>> = match spec.kind {
        GeometryKind::Cubic => {
            if spec.count > 8 {
                return Err(Error::InvalidGeometry(format!(
                    "cubic formation holds at most 8 satellites, got {}",
                    spec.count
                )));
            }
            CUBE_VERTICES[..spec.count]
                .iter()
                .map(|v| center + Vector3::new(v[0] - 0.5, v[1] - 0.5, v[2] - 0.5) * scale)
                .collect()
        }
        GeometryKind::Planar | GeometryKind::Random => {
            let mut ps = ring_positions(spec.count, r, scale)?;
            if spec.kind == GeometryKind::Random {
                if !(spec.perturbation_sigma >= 0.0) {
                    return Err(Error::InvalidGeometry("perturbation_sigma must be >= 0".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                let normal = Normal::new(0.0, spec.perturbation_sigma)
                    .map_err(|e| Error::InvalidGeometry(e.to_string()))?;
                for p in ps.iter_mut() {
                    for k in 0..3 {
                        p[k] += normal.sample(&mut rng);
                    }
                }
            }
            ps
        }
    };
    let sats = positions
        .into_iter()
        .map(|p| SatelliteState::circular(p, &EARTH))
        .collect();
    Ok(ConstellationGraph::new(sats))
}

fn ring_positions(count: usize, shell_radius: f64, ring_radius: f64) -> Result<Vec<Vector3<f64>>> {
    if ring_radius >= shell_radius {
        return Err(Error::InvalidGeometry(format!(
            "ring radius {ring_radius} m exceeds shell radius {shell_radius} m"
        )));
    }
    let z = (shell_radius * shell_radius - ring_radius * ring_radius).sqrt();
    Ok((0..count)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            Vector3::new(ring_radius * phi.cos(), ring_radius * phi.sin(), z)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Links and measurements
// ---------------------------------------------------------------------------

/// All pairs (i < j) within `max_range`, ordered by (i, j); tx = i, rx = j.
pub fn active_links(g: &ConstellationGraph, max_range: f64) -> Vec<Link> {
    let n = g.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = g.satellites[j].position - g.satellites[i].position;
            let dist = d.norm();
            if dist <= max_range && dist >= MIN_LOS_DISTANCE {
                out.push(Link {
                    tx: i,
                    rx: j,
                    distance: dist,
                    los: d / dist,
                });
            }
        }
    }
    out
}

/// Range-equivalent TOA: |p_rx − p_tx| + (cb_rx − cb_tx) [m].
pub fn toa_measurement(g: &ConstellationGraph, l: &Link) -> f64 {
    let tx = &g.satellites[l.tx];
    let rx = &g.satellites[l.rx];
    (rx.position - tx.position).norm() + (rx.clock.bias - tx.clock.bias)
}

/// Sparse Jacobian row of one TOA measurement over the 8·N state.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub len: usize,
    /// (state index, value), ordered by index.
    pub entries: Vec<(usize, f64)>,
}

impl SparseRow {
    /// Structural nonzeros of a dense row (exact zeros dropped).
    pub fn from_dense(v: &DVector<f64>) -> Self {
        Self {
            len: v.len(),
            entries: v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, x)| (i, *x)).collect(),
        }
    }

    pub fn to_dense(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.len);
        for &(i, x) in &self.entries {
            v[i] += x;
        }
        v
    }
}

/// ∂z/∂x for the link: −uᵀ / +uᵀ at tx / rx position slots, −1 / +1 at the
/// clock-bias slots. The LOS is recomputed from the graph positions.
pub fn measurement_jacobian(g: &ConstellationGraph, l: &Link) -> Result<SparseRow> {
    let fresh = g.link(l.tx, l.rx)?;
    let u = fresh.los;
    let mut entries = Vec::with_capacity(8);
    let push_node = |node: usize, sign: f64, entries: &mut Vec<(usize, f64)>| {
        let base = STATE_DIM * node;
        for k in 0..3 {
            entries.push((base + k, sign * u[k]));
        }
        entries.push((base + 6, sign));
    };
    push_node(l.tx, -1.0, &mut entries);
    push_node(l.rx, 1.0, &mut entries);
    entries.sort_by_key(|e| e.0);
    Ok(SparseRow {
        len: g.state_dim(),
        entries,
    })
}
