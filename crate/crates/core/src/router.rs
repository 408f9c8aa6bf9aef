//! Access-point control logic.
//!
//! The router beacons its SSID intermittently while capacity remains,
//! resolves join requests by estimating the requester's direction of
//! arrival and steering a null-formed beam at it, suppresses the beacon
//! when every service slot is taken, re-points beams as tracked nodes move,
//! and releases beams on detach or when a node leaves the service range.
//!
//! The FSM is single threaded and event ordered: all inputs arrive as an
//! ordered event list per tick and the tick handler is the only mutator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, SnapshotMatrix};
use crate::beam::{conjugate_weights, null_steering_weights, BeamWeights, MIN_CONSTRAINT_SEPARATION_DEG};
use crate::doa::{estimate_doa, DoaMethod, DoaOptions};
use crate::error::{Error, Result};
use crate::mobility::Position;

pub type NodeId = u32;

fn default_capacity() -> u32 {
    256
}
fn default_beacon_period() -> u64 {
    10
}
fn default_beacon_duty() -> f64 {
    1.0
}
fn default_track_update() -> u64 {
    1
}
fn default_doa_method() -> DoaMethod {
    DoaMethod::Music
}

/// Static configuration of the access point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterConfig {
    /// Maximum simultaneously served nodes (1..=65535).
    #[serde(default = "default_capacity")]
    pub capacity: u32,
    /// Service radius in meters.
    pub range_m: f64,
    /// SSID beacon fires on ticks divisible by this period.
    #[serde(default = "default_beacon_period")]
    pub beacon_period_ticks: u64,
    /// Fraction of a beacon tick actually spent transmitting.
    #[serde(default = "default_beacon_duty")]
    pub beacon_duty: f64,
    /// Tracking pass cadence in ticks.
    #[serde(default = "default_track_update")]
    pub track_update_ticks: u64,
    /// Re-point a beam once the node drifts this far from its beam center.
    /// Defaults to half the broadside 3 dB beamwidth so a node stays inside
    /// the main lobe between updates.
    #[serde(default)]
    pub retrack_threshold_deg: Option<f64>,
    pub geometry: ArrayGeometry,
    /// Estimator used to resolve join requests.
    #[serde(default = "default_doa_method")]
    pub doa_method: DoaMethod,
    /// When set, the harness feeds re-estimated rather than ground-truth
    /// azimuths into the tracking pass.
    #[serde(default)]
    pub measured_tracking: bool,
}

impl RouterConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let field = |name: &str| format!("{prefix}.{name}");
        if self.capacity < 1 || self.capacity > 65_535 {
            return Err(Error::config(
                field("capacity"),
                "capacity must be in 1..=65535",
            ));
        }
        if !(self.range_m > 0.0) || !self.range_m.is_finite() {
            return Err(Error::config(field("range_m"), "range must be positive"));
        }
        if self.beacon_period_ticks < 1 {
            return Err(Error::config(
                field("beacon_period_ticks"),
                "beacon period must be at least 1 tick",
            ));
        }
        if !(self.beacon_duty > 0.0 && self.beacon_duty <= 1.0) {
            return Err(Error::config(
                field("beacon_duty"),
                "beacon duty must be in (0, 1]",
            ));
        }
        if self.track_update_ticks < 1 {
            return Err(Error::config(
                field("track_update_ticks"),
                "track update cadence must be at least 1 tick",
            ));
        }
        if let Some(t) = self.retrack_threshold_deg {
            if !(t > 0.0) {
                return Err(Error::config(
                    field("retrack_threshold_deg"),
                    "retrack threshold must be positive",
                ));
            }
        }
        self.geometry
            .validate()
            .map_err(|e| Error::config(field("geometry"), e.to_string()))?;
        if self.geometry.has_ambiguous_spacing() {
            log::warn!(
                "element spacing {} wavelengths exceeds 0.5: DOA over (-90, +90) is ambiguous",
                self.geometry.spacing
            );
        }
        Ok(())
    }

    /// Threshold actually used by the tracking pass.
    pub fn resolved_retrack_threshold_deg(&self) -> f64 {
        self.retrack_threshold_deg.unwrap_or_else(|| {
            let m = self.geometry.num_elements as f64;
            0.5 * (0.886 / (m * self.geometry.spacing)).to_degrees()
        })
    }
}

/// Beaconing state of the access point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RouterMode {
    /// Capacity remains: the SSID beacon fires every beacon period.
    Broadcasting,
    /// Every slot taken: the beacon is suppressed and joins are rejected.
    Saturated,
}

/// One served node and its beam.
#[derive(Debug, Clone, PartialEq)]
pub struct ServedEntry {
    pub node_id: NodeId,
    pub beam: BeamWeights,
    /// The azimuth the beam currently points at (the paper's theta_a).
    pub last_doa_deg: f64,
    pub last_update_tick: u64,
    /// Traffic demand in requests per tick.
    pub demand: f64,
}

/// FSM snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct RouterState {
    pub mode: RouterMode,
    pub served: BTreeMap<NodeId, ServedEntry>,
    pub tick: u64,
}

impl RouterState {
    pub fn new() -> Self {
        RouterState {
            mode: RouterMode::Broadcasting,
            served: BTreeMap::new(),
            tick: 0,
        }
    }
}

impl Default for RouterState {
    fn default() -> Self {
        Self::new()
    }
}

/// Inputs to one tick of the FSM.
#[derive(Debug, Clone, PartialEq)]
pub enum RouterEvent {
    JoinRequest {
        node_id: NodeId,
        snapshot: SnapshotMatrix,
        demand: f64,
    },
    Detach {
        node_id: NodeId,
    },
    /// Pure passage of time; carries no payload.
    TickElapsed,
}

impl RouterEvent {
    fn order_key(&self) -> (u8, NodeId) {
        match self {
            RouterEvent::Detach { node_id } => (0, *node_id),
            RouterEvent::JoinRequest { node_id, .. } => (1, *node_id),
            RouterEvent::TickElapsed => (2, 0),
        }
    }
}

/// Why a join was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Saturated,
    DoaFailed,
    AlreadyServed,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::Saturated => "saturated",
            RejectReason::DoaFailed => "doa-failed",
            RejectReason::AlreadyServed => "already-served",
        }
    }
}

/// Why a beam was released.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReleaseReason {
    Detach,
    RangeExit,
    OutOfSector,
}

impl ReleaseReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReleaseReason::Detach => "detach",
            ReleaseReason::RangeExit => "range-exit",
            ReleaseReason::OutOfSector => "out-of-sector",
        }
    }
}

/// Outputs of one tick, in emission order.
#[derive(Debug, Clone, PartialEq)]
pub enum RouterAction {
    EmitBeacon,
    AssignBeam {
        node_id: NodeId,
        beam: BeamWeights,
        /// Nulls that could not be honored (too close or beyond aperture).
        nulls_skipped: usize,
    },
    UpdateBeam {
        node_id: NodeId,
        beam: BeamWeights,
        previous_deg: f64,
    },
    ReleaseBeam {
        node_id: NodeId,
        last_doa_deg: f64,
        reason: ReleaseReason,
    },
    RejectJoin {
        node_id: NodeId,
        reason: RejectReason,
    },
}

/// Azimuth and range of a position relative to the array: theta_a =
/// atan2(x, y) with broadside along +y. Positions behind the array
/// (y <= 0) are unservable by the forward-facing aperture.
pub fn azimuth_of(position: Position) -> Result<(f64, f64)> {
    if position.x_m == 0.0 && position.y_m == 0.0 {
        return Err(Error::domain("position at the array origin has no azimuth"));
    }
    if position.y_m <= 0.0 {
        return Err(Error::domain(format!(
            "position ({}, {}) is out of sector (rear half plane)",
            position.x_m, position.y_m
        )));
    }
    let theta = position.x_m.atan2(position.y_m).to_degrees();
    Ok((theta, position.range_m()))
}

/// The access point: configuration plus mutable FSM state.
#[derive(Debug, Clone, PartialEq)]
pub struct Router {
    config: RouterConfig,
    state: RouterState,
}

impl Router {
    pub fn new(config: RouterConfig) -> Result<Self> {
        config.validate("router")?;
        Ok(Router {
            config,
            state: RouterState::new(),
        })
    }

    pub fn config(&self) -> &RouterConfig {
        &self.config
    }

    pub fn state(&self) -> &RouterState {
        &self.state
    }

    /// Process one tick: detaches, then joins, then tracking, then
    /// beaconing. The event list is re-sorted by (kind, node id) so the
    /// outcome does not depend on arrival order.
    pub fn tick(
        &mut self,
        mut events: Vec<RouterEvent>,
        positions: &BTreeMap<NodeId, Position>,
    ) -> Result<Vec<RouterAction>> {
        events.sort_by_key(RouterEvent::order_key);
        let mut actions = Vec::new();

        for event in events {
            match event {
                RouterEvent::Detach { node_id } => {
                    if let Some(entry) = self.state.served.remove(&node_id) {
                        self.sync_mode();
                        actions.push(RouterAction::ReleaseBeam {
                            node_id,
                            last_doa_deg: entry.last_doa_deg,
                            reason: ReleaseReason::Detach,
                        });
                    } else {
                        log::warn!("detach for unknown node {node_id} ignored");
                    }
                }
                RouterEvent::JoinRequest {
                    node_id,
                    snapshot,
                    demand,
                } => {
                    let action = self.handle_join(node_id, &snapshot, demand)?;
                    actions.push(action);
                }
                RouterEvent::TickElapsed => {}
            }
        }

        if self.state.tick % self.config.track_update_ticks == 0 {
            let mut tracked = self.track(positions);
            actions.append(&mut tracked);
        }

        self.sync_mode();
        if self.state.tick % self.config.beacon_period_ticks == 0
            && self.state.mode == RouterMode::Broadcasting
        {
            actions.push(RouterAction::EmitBeacon);
        }

        self.state.tick += 1;
        Ok(actions)
    }

    /// Resolve one join request. At capacity the request is rejected
    /// without running the estimator.
    pub fn handle_join(
        &mut self,
        node_id: NodeId,
        snapshot: &SnapshotMatrix,
        demand: f64,
    ) -> Result<RouterAction> {
        if snapshot.geometry() != self.config.geometry {
            return Err(Error::domain(
                "join snapshot geometry does not match the router array",
            ));
        }
        if self.state.served.contains_key(&node_id) {
            log::warn!("join from already-served node {node_id} rejected");
            return Ok(RouterAction::RejectJoin {
                node_id,
                reason: RejectReason::AlreadyServed,
            });
        }
        if self.state.served.len() as u32 >= self.config.capacity {
            return Ok(RouterAction::RejectJoin {
                node_id,
                reason: RejectReason::Saturated,
            });
        }

        let estimate = match estimate_doa(snapshot, self.config.doa_method, 1, DoaOptions::default())
        {
            Ok(r) => r,
            Err(e) => {
                log::warn!("DOA estimation failed for node {node_id}: {e}");
                return Ok(RouterAction::RejectJoin {
                    node_id,
                    reason: RejectReason::DoaFailed,
                });
            }
        };
        let theta = estimate.azimuths_deg[0];

        let (beam, nulls_skipped) = self.form_beam(theta, node_id)?;
        self.state.served.insert(
            node_id,
            ServedEntry {
                node_id,
                beam: beam.clone(),
                last_doa_deg: theta,
                last_update_tick: self.state.tick,
                demand,
            },
        );
        self.sync_mode();
        Ok(RouterAction::AssignBeam {
            node_id,
            beam,
            nulls_skipped,
        })
    }

    /// Tracking pass: for every served node, take its current azimuth from
    /// `positions` (ground truth under ideal tracking) and re-point the
    /// beam once the drift reaches the retrack threshold. Nodes beyond the
    /// service range or behind the array are released.
    pub fn track(&mut self, positions: &BTreeMap<NodeId, Position>) -> Vec<RouterAction> {
        let threshold = self.config.resolved_retrack_threshold_deg();
        let ids: Vec<NodeId> = self.state.served.keys().copied().collect();
        let mut actions = Vec::new();

        for node_id in ids {
            let entry = &self.state.served[&node_id];
            let last = entry.last_doa_deg;
            let position = match positions.get(&node_id) {
                Some(p) => *p,
                None => {
                    log::warn!("served node {node_id} has no position; releasing");
                    self.release(node_id, ReleaseReason::RangeExit, &mut actions);
                    continue;
                }
            };
            match azimuth_of(position) {
                Err(_) => self.release(node_id, ReleaseReason::OutOfSector, &mut actions),
                Ok((theta, range)) => {
                    if range > self.config.range_m {
                        self.release(node_id, ReleaseReason::RangeExit, &mut actions);
                    } else if (theta - last).abs() >= threshold {
                        match self.form_beam(theta, node_id) {
                            Ok((beam, _)) => {
                                let tick = self.state.tick;
                                let entry = self
                                    .state
                                    .served
                                    .get_mut(&node_id)
                                    .expect("entry present");
                                entry.beam = beam.clone();
                                entry.last_doa_deg = theta;
                                entry.last_update_tick = tick;
                                actions.push(RouterAction::UpdateBeam {
                                    node_id,
                                    beam,
                                    previous_deg: last,
                                });
                            }
                            Err(e) => {
                                // Beam synthesis failing here is a bug, but
                                // keep the old beam rather than dropping the
                                // node mid-service.
                                log::error!("retrack of node {node_id} failed: {e}");
                            }
                        }
                    }
                }
            }
        }
        actions
    }

    fn release(&mut self, node_id: NodeId, reason: ReleaseReason, actions: &mut Vec<RouterAction>) {
        if let Some(entry) = self.state.served.remove(&node_id) {
            self.sync_mode();
            actions.push(RouterAction::ReleaseBeam {
                node_id,
                last_doa_deg: entry.last_doa_deg,
                reason,
            });
        }
    }

    /// Null-steered beam toward `target`, nulling the nearest other served
    /// azimuths. The aperture affords at most M-2 nulls; directions closer
    /// than the constraint separation to the target or to an already
    /// accepted null are skipped (degraded nulling).
    fn form_beam(&self, target_deg: f64, for_node: NodeId) -> Result<(BeamWeights, usize)> {
        let m = self.config.geometry.num_elements;
        let max_nulls = m.saturating_sub(2);

        let mut candidates: Vec<f64> = self
            .state
            .served
            .values()
            .filter(|e| e.node_id != for_node)
            .map(|e| e.last_doa_deg)
            .collect();
        candidates.sort_by(|a, b| {
            let da = (a - target_deg).abs();
            let db = (b - target_deg).abs();
            da.partial_cmp(&db)
                .expect("azimuths are finite")
                .then(a.partial_cmp(b).expect("azimuths are finite"))
        });

        let mut nulls: Vec<f64> = Vec::new();
        let mut skipped = 0usize;
        for cand in candidates {
            if nulls.len() >= max_nulls {
                skipped += 1;
                continue;
            }
            let separated = (cand - target_deg).abs() >= MIN_CONSTRAINT_SEPARATION_DEG
                && nulls
                    .iter()
                    .all(|&n| (cand - n).abs() >= MIN_CONSTRAINT_SEPARATION_DEG);
            if separated {
                nulls.push(cand);
            } else {
                skipped += 1;
            }
        }
        if skipped > 0 {
            log::warn!(
                "beam toward {target_deg:.2} deg: {skipped} co-azimuth(s) not nulled (degraded nulling)"
            );
        }

        // Zero-forcing can still hit a conditioning wall when many nulls
        // crowd the visible region; shed the farthest nulls until it solves.
        loop {
            match null_steering_weights(self.config.geometry, target_deg, &nulls) {
                Ok(beam) => return Ok((beam, skipped)),
                Err(Error::Conditioning { .. }) if !nulls.is_empty() => {
                    nulls.pop();
                    skipped += 1;
                    log::warn!(
                        "beam toward {target_deg:.2} deg: dropped a null due to conditioning"
                    );
                }
                Err(Error::Conditioning { .. }) => {
                    return Ok((conjugate_weights(self.config.geometry, target_deg)?, skipped))
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn sync_mode(&mut self) {
        debug_assert!(self.state.served.len() as u32 <= self.config.capacity);
        self.state.mode = if self.state.served.len() as u32 >= self.config.capacity {
            RouterMode::Saturated
        } else {
            RouterMode::Broadcasting
        };
    }
}
