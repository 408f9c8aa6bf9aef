//! Node motion models.
//!
//! The world is a 2-D Cartesian plane with the access point at the origin
//! and the array facing +y. Nodes advance one fixed `dt` per tick.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A point in the simulation plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x_m: f64,
    pub y_m: f64,
}

impl Position {
    pub fn new(x_m: f64, y_m: f64) -> Self {
        Position { x_m, y_m }
    }

    pub fn range_m(&self) -> f64 {
        (self.x_m * self.x_m + self.y_m * self.y_m).sqrt()
    }
}

/// Axis-aligned rectangle bounding random-waypoint motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn contains(&self, p: Position) -> bool {
        p.x_m >= self.x_min && p.x_m <= self.x_max && p.y_m >= self.y_min && p.y_m <= self.y_max
    }
}

/// How a node moves between ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MobilityModel {
    Stationary,
    ConstantVelocity { vx_mps: f64, vy_mps: f64 },
    RandomWaypoint { speed_mps: f64, bounds: Bounds },
}

/// A client node as configured in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub node_id: u32,
    /// Tick at which the node appears and requests to join.
    pub arrival_tick: u64,
    /// Position at the arrival tick.
    pub initial_position: Position,
    pub model: MobilityModel,
    /// Traffic demand in requests per tick.
    pub demand: f64,
}

impl NodeSpec {
    pub fn validate(&self, field: &str) -> crate::error::Result<()> {
        if self.arrival_tick == u64::MAX {
            return Err(crate::error::Error::config(
                format!("{field}.arrival_tick"),
                "arrival tick out of range",
            ));
        }
        if self.demand < 0.0 || !self.demand.is_finite() {
            return Err(crate::error::Error::config(
                format!("{field}.demand"),
                "demand must be finite and nonnegative",
            ));
        }
        match self.model {
            MobilityModel::Stationary => {}
            MobilityModel::ConstantVelocity { vx_mps, vy_mps } => {
                if !vx_mps.is_finite() || !vy_mps.is_finite() {
                    return Err(crate::error::Error::config(
                        format!("{field}.model"),
                        "velocity components must be finite",
                    ));
                }
            }
            MobilityModel::RandomWaypoint { speed_mps, bounds } => {
                if !(speed_mps >= 0.0) {
                    return Err(crate::error::Error::config(
                        format!("{field}.model.speed_mps"),
                        "speed must be nonnegative",
                    ));
                }
                if bounds.x_min > bounds.x_max || bounds.y_min > bounds.y_max {
                    return Err(crate::error::Error::config(
                        format!("{field}.model.bounds"),
                        "bounds must be a nonempty rectangle",
                    ));
                }
                if !bounds.contains(self.initial_position) {
                    return Err(crate::error::Error::config(
                        format!("{field}.initial_position"),
                        "initial position outside the waypoint bounds",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Per-node runtime motion state.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMotion {
    pub position: Position,
    waypoint: Option<Position>,
}

impl NodeMotion {
    pub fn new(position: Position) -> Self {
        NodeMotion {
            position,
            waypoint: None,
        }
    }
}

/// Advance one node by `dt_s` seconds. Deterministic given the RNG stream;
/// only the random-waypoint model consumes randomness.
pub fn advance(motion: &mut NodeMotion, model: &MobilityModel, dt_s: f64, rng: &mut ChaCha8Rng) {
    debug_assert!(dt_s > 0.0);
    match *model {
        MobilityModel::Stationary => {}
        MobilityModel::ConstantVelocity { vx_mps, vy_mps } => {
            motion.position.x_m += vx_mps * dt_s;
            motion.position.y_m += vy_mps * dt_s;
        }
        MobilityModel::RandomWaypoint { speed_mps, bounds } => {
            if speed_mps == 0.0 {
                return;
            }
            let wp = *motion
                .waypoint
                .get_or_insert_with(|| draw_waypoint(bounds, rng));
            let dx = wp.x_m - motion.position.x_m;
            let dy = wp.y_m - motion.position.y_m;
            let dist = (dx * dx + dy * dy).sqrt();
            let step = speed_mps * dt_s;
            if dist <= step {
                // Arrived: snap to the waypoint and draw the next one. The
                // leftover fraction of the step is dropped, which keeps the
                // update exactly one uniform pair per arrival.
                motion.position = wp;
                motion.waypoint = Some(draw_waypoint(bounds, rng));
            } else {
                motion.position.x_m += dx / dist * step;
                motion.position.y_m += dy / dist * step;
            }
        }
    }
}

fn draw_waypoint(bounds: Bounds, rng: &mut ChaCha8Rng) -> Position {
    let x = if bounds.x_max > bounds.x_min {
        rng.gen_range(bounds.x_min..=bounds.x_max)
    } else {
        bounds.x_min
    };
    let y = if bounds.y_max > bounds.y_min {
        rng.gen_range(bounds.y_min..=bounds.y_max)
    } else {
        bounds.y_min
    };
    Position::new(x, y)
}
