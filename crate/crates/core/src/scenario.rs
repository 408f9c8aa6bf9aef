//! Scenario configuration and the deterministic tick loop.
//!
//! A scenario wires everything together: per tick, node positions advance,
//! arriving nodes synthesize a join snapshot at their true azimuth, the
//! router processes its events, and the power ledger accounts the tick.
//! The whole run is a pure function of the scenario (including its seed);
//! repeated runs produce identical results byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::{synthesize_snapshots, SourceSpec};
use crate::beam::beam_pattern;
use crate::doa::{estimate_doa, DoaOptions};
use crate::error::{Error, Result};
use crate::mobility::{advance, NodeMotion, NodeSpec, Position};
use crate::power::{savings_report, tick_power, PowerLedger, PowerParams};
use crate::router::{azimuth_of, NodeId, Router, RouterAction, RouterConfig, RouterEvent};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn default_dt_s() -> f64 {
    0.1
}
fn default_join_snr_db() -> f64 {
    20.0
}
fn default_join_snapshots() -> usize {
    256
}

/// A complete simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Number of ticks to run.
    pub ticks: u64,
    /// Seconds per tick.
    #[serde(default = "default_dt_s")]
    pub dt_s: f64,
    pub seed: u64,
    /// Per-element SNR of synthesized join snapshots, in dB.
    #[serde(default = "default_join_snr_db")]
    pub join_snr_db: f64,
    /// Snapshot count for synthesized join requests.
    #[serde(default = "default_join_snapshots")]
    pub join_snapshots: usize,
    pub router: RouterConfig,
    pub power: PowerParams,
    pub nodes: Vec<NodeSpec>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.ticks < 1 {
            return Err(Error::config("ticks", "must run at least one tick"));
        }
        if !(self.dt_s > 0.0) || !self.dt_s.is_finite() {
            return Err(Error::config("dt_s", "must be positive"));
        }
        if self.join_snapshots < 1 {
            return Err(Error::config("join_snapshots", "must be at least 1"));
        }
        self.router.validate("router")?;
        self.power.validate("power")?;
        let mut seen = std::collections::BTreeSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            node.validate(&format!("nodes[{i}]"))?;
            if !seen.insert(node.node_id) {
                return Err(Error::config(
                    format!("nodes[{i}].node_id"),
                    format!("duplicate node id {}", node.node_id),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(scenario)
    }
}

/// One logged router action with the tick it happened on.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub tick: u64,
    pub action: RouterAction,
}

/// Beam geometry log row, written whenever a beam is assigned or updated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamLogRow {
    pub tick: u64,
    pub node_id: NodeId,
    pub theta_deg: f64,
    pub beamwidth_deg: f64,
}

/// Flat run summary; the counters equal the corresponding event-log
/// tallies by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub ticks: u64,
    pub joins: u64,
    pub rejects: u64,
    pub releases: u64,
    pub beam_updates: u64,
    pub beacons: u64,
    pub savings_ratio: f64,
    pub mean_adaptive_w: f64,
    pub mean_baseline_w: f64,
    pub adaptive_j: f64,
    pub baseline_j: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub events: Vec<ActionRecord>,
    pub ledger: PowerLedger,
    pub beam_log: Vec<BeamLogRow>,
    pub summary: RunSummary,
}

/// Sub-stream tags for seed derivation.
const STREAM_MOBILITY: u64 = 1;
const STREAM_JOIN: u64 = 2;
const STREAM_TRACK: u64 = 3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed for an independent sub-stream of the scenario seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut acc = splitmix64(base);
    for &p in parts {
        acc = splitmix64(acc ^ splitmix64(p));
    }
    acc
}

struct NodeRuntime {
    spec: NodeSpec,
    motion: NodeMotion,
    rng: ChaCha8Rng,
}

/// Grid step used when measuring logged beamwidths.
const BEAM_LOG_GRID_STEP_DEG: f64 = 0.05;

/// Run a scenario to completion.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    let geometry = scenario.router.geometry;
    let mut router = Router::new(scenario.router.clone())?;
    let mut ledger = PowerLedger::new(scenario.dt_s)?;
    let mut events_log: Vec<ActionRecord> = Vec::new();
    let mut beam_log: Vec<BeamLogRow> = Vec::new();

    let mut nodes: BTreeMap<NodeId, NodeRuntime> = scenario
        .nodes
        .iter()
        .map(|spec| {
            (
                spec.node_id,
                NodeRuntime {
                    spec: spec.clone(),
                    motion: NodeMotion::new(spec.initial_position),
                    rng: ChaCha8Rng::seed_from_u64(derive_seed(
                        scenario.seed,
                        &[STREAM_MOBILITY, u64::from(spec.node_id)],
                    )),
                },
            )
        })
        .collect();

    for t in 0..scenario.ticks {
        // Motion starts the tick after arrival; a node joins from its
        // configured initial position.
        for rt in nodes.values_mut() {
            if rt.spec.arrival_tick < t {
                advance(&mut rt.motion, &rt.spec.model, scenario.dt_s, &mut rt.rng);
            }
        }
        let positions: BTreeMap<NodeId, Position> = nodes
            .values()
            .filter(|rt| rt.spec.arrival_tick <= t)
            .map(|rt| (rt.spec.node_id, rt.motion.position))
            .collect();

        let mut events: Vec<RouterEvent> = Vec::new();
        for rt in nodes.values() {
            if rt.spec.arrival_tick == t {
                match azimuth_of(rt.motion.position) {
                    Ok((theta, _)) => {
                        let snapshot = synthesize_snapshots(
                            geometry,
                            &[SourceSpec::gaussian(theta, scenario.join_snr_db)],
                            scenario.join_snapshots,
                            derive_seed(scenario.seed, &[STREAM_JOIN, u64::from(rt.spec.node_id)]),
                        )?;
                        events.push(RouterEvent::JoinRequest {
                            node_id: rt.spec.node_id,
                            snapshot,
                            demand: rt.spec.demand,
                        });
                    }
                    Err(e) => {
                        log::warn!(
                            "node {} arrives outside the serviceable sector: {e}",
                            rt.spec.node_id
                        );
                    }
                }
            }
        }

        // Under measured tracking the FSM sees re-estimated azimuths at
        // track ticks instead of ground truth; power always uses truth.
        let fsm_positions = if scenario.router.measured_tracking
            && t % scenario.router.track_update_ticks == 0
        {
            measured_positions(scenario, &router, &positions, t)?
        } else {
            positions.clone()
        };

        let actions = router.tick(events, &fsm_positions)?;

        let beacon_emitted = actions.iter().any(|a| matches!(a, RouterAction::EmitBeacon));
        let row = tick_power(
            t,
            router.state(),
            &positions,
            &scenario.power,
            geometry,
            beacon_emitted,
            scenario.router.beacon_duty,
        )?;
        ledger.push(row);

        for action in &actions {
            if let RouterAction::AssignBeam { node_id, beam, .. }
            | RouterAction::UpdateBeam { node_id, beam, .. } = action
            {
                let pattern = beam_pattern(beam, geometry, BEAM_LOG_GRID_STEP_DEG)?;
                beam_log.push(BeamLogRow {
                    tick: t,
                    node_id: *node_id,
                    theta_deg: beam.target_azimuth_deg(),
                    beamwidth_deg: pattern.beamwidth_3db_deg,
                });
            }
        }
        events_log.extend(actions.into_iter().map(|action| ActionRecord { tick: t, action }));
    }

    let savings = savings_report(&ledger)?;
    let count = |f: &dyn Fn(&RouterAction) -> bool| -> u64 {
        events_log.iter().filter(|r| f(&r.action)).count() as u64
    };
    let summary = RunSummary {
        name: scenario.name.clone(),
        ticks: scenario.ticks,
        joins: count(&|a| matches!(a, RouterAction::AssignBeam { .. })),
        rejects: count(&|a| matches!(a, RouterAction::RejectJoin { .. })),
        releases: count(&|a| matches!(a, RouterAction::ReleaseBeam { .. })),
        beam_updates: count(&|a| matches!(a, RouterAction::UpdateBeam { .. })),
        beacons: count(&|a| matches!(a, RouterAction::EmitBeacon)),
        savings_ratio: savings.savings_ratio,
        mean_adaptive_w: savings.mean_adaptive_w,
        mean_baseline_w: savings.mean_baseline_w,
        adaptive_j: ledger.adaptive_j(),
        baseline_j: ledger.baseline_j(),
    };

    Ok(RunResult {
        events: events_log,
        ledger,
        beam_log,
        summary,
    })
}

/// Re-estimate served nodes' azimuths from fresh snapshots and rebuild
/// their apparent positions at the true range.
fn measured_positions(
    scenario: &Scenario,
    router: &Router,
    truth: &BTreeMap<NodeId, Position>,
    tick: u64,
) -> Result<BTreeMap<NodeId, Position>> {
    let geometry = scenario.router.geometry;
    let mut out = truth.clone();
    for &node_id in router.state().served.keys() {
        let Some(&position) = truth.get(&node_id) else {
            continue;
        };
        let Ok((theta, range)) = azimuth_of(position) else {
            continue; // let the tracking pass release it
        };
        let snapshot = synthesize_snapshots(
            geometry,
            &[SourceSpec::gaussian(theta, scenario.join_snr_db)],
            scenario.join_snapshots,
            derive_seed(scenario.seed, &[STREAM_TRACK, u64::from(node_id), tick]),
        )?;
        match estimate_doa(
            &snapshot,
            scenario.router.doa_method,
            1,
            DoaOptions::default(),
        ) {
            Ok(est) => {
                let t = est.azimuths_deg[0].to_radians();
                out.insert(node_id, Position::new(range * t.sin(), range * t.cos()));
            }
            Err(e) => {
                log::warn!("measured tracking of node {node_id} failed, using truth: {e}");
            }
        }
    }
    Ok(out)
}
