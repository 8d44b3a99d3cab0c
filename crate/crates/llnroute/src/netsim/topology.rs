//! Random topology generation.
//!
//! The sink sits at the field center. Node-count scenarios place the
//! remaining routers uniformly at random and resample until the
//! communication graph (edges where d <= R) is connected. Distance
//! scenarios pin a probe node at an exact distance from the sink and place
//! uniform relays to keep the graph connected.
//!
//! Sparse deployments (e.g. 25..75 nodes over 1000x1000 m at R = 150 m)
//! sit below the random-geometric-graph connectivity threshold, so a fully
//! uniform draw is essentially never connected. After a bounded number of
//! pure-rejection attempts the sampler switches to connected growth:
//! each node is still drawn uniformly over the field but redrawn until it
//! lands in range of an already-placed node, with a final whole-graph
//! check covering the pinned probe.

use rand::Rng;

/// Placement attempts before giving up on a connected draw.
const MAX_ATTEMPTS: u32 = 1000;
/// Pure rejection attempts before switching to connected growth.
const REJECTION_ATTEMPTS: u32 = 100;
/// Uniform draws allowed per node while growing the connected component.
const ATTACH_DRAWS: u32 = 200;
/// Growth attaches within this fraction of the radio range, so the links
/// that carry connectivity have headroom; longer in-range cross links
/// still arise between independently placed nodes.
const ATTACH_MARGIN: f64 = 0.8;

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance_to(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct FieldSize {
    pub width_m: f64,
    pub height_m: f64,
}

impl Default for FieldSize {
    fn default() -> Self {
        FieldSize { width_m: 1000.0, height_m: 1000.0 }
    }
}

impl FieldSize {
    pub fn center(&self) -> Position {
        Position { x: self.width_m / 2.0, y: self.height_m / 2.0 }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TopologyError {
    #[error("need at least 2 nodes, got {0}")]
    TooFewNodes(u32),
    #[error("probe distance {dist}m does not fit the field from its center")]
    ProbeOutOfField { dist: f64 },
    #[error("no connected placement for {n} nodes within {attempts} attempts")]
    ConnectivityUnsatisfiable { n: u32, attempts: u32 },
}

/// Draws node positions: index 0 is the sink at the field center; with
/// `dist_to_sink` set, index 1 is the probe at exactly that distance.
/// Resamples until the radio graph is connected.
pub fn generate_topology<R: Rng>(
    n: u32,
    field: FieldSize,
    range_m: f64,
    dist_to_sink: Option<f64>,
    rng: &mut R,
) -> Result<Vec<Position>, TopologyError> {
    if n < 2 {
        return Err(TopologyError::TooFewNodes(n));
    }
    let center = field.center();
    if let Some(dist) = dist_to_sink {
        let max_fit = center.x.min(center.y);
        if dist <= 0.0 || dist > max_fit {
            return Err(TopologyError::ProbeOutOfField { dist });
        }
    }

    let pinned = |rng: &mut R| {
        let mut positions = Vec::with_capacity(n as usize);
        positions.push(center);
        if let Some(dist) = dist_to_sink {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            positions.push(Position {
                x: center.x + dist * angle.cos(),
                y: center.y + dist * angle.sin(),
            });
        }
        positions
    };

    // Accept only graphs that stay connected with the attach margin, so
    // no deployment hangs off a single edge-of-range link.
    let attach_m = range_m * ATTACH_MARGIN;
    for _ in 0..REJECTION_ATTEMPTS {
        let mut positions = pinned(rng);
        while positions.len() < n as usize {
            positions.push(Position {
                x: rng.gen_range(0.0..field.width_m),
                y: rng.gen_range(0.0..field.height_m),
            });
        }
        if connected(&positions, attach_m) {
            return Ok(positions);
        }
    }
    'attempt: for _ in REJECTION_ATTEMPTS..MAX_ATTEMPTS {
        let mut positions = pinned(rng);
        while positions.len() < n as usize {
            let mut attached = false;
            for _ in 0..ATTACH_DRAWS {
                let cand = Position {
                    x: rng.gen_range(0.0..field.width_m),
                    y: rng.gen_range(0.0..field.height_m),
                };
                if positions.iter().any(|p| p.distance_to(&cand) <= attach_m) {
                    positions.push(cand);
                    attached = true;
                    break;
                }
            }
            if !attached {
                continue 'attempt;
            }
        }
        // Growth can leave a pinned probe in its own component; verify.
        if connected(&positions, attach_m) {
            return Ok(positions);
        }
    }
    Err(TopologyError::ConnectivityUnsatisfiable { n, attempts: MAX_ATTEMPTS })
}

/// Flood-fill connectivity over the d <= R graph.
fn connected(positions: &[Position], range_m: f64) -> bool {
    let n = positions.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut reached = 1;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && positions[i].distance_to(&positions[j]) <= range_m {
                seen[j] = true;
                reached += 1;
                stack.push(j);
            }
        }
    }
    reached == n
}
