//! Energy accounting: adaptive router versus an always-on omni baseline.
//!
//! The link budget holds received power constant: a beam with gain G
//! serving a node at range r needs transmit power
//! p_omni * (r / ref_range)^alpha / G, scaled by a demand-driven duty
//! cycle. The baseline spends p_omni every tick regardless of load. Beacon
//! ticks add a low-power omni burst. Nothing forbids the adaptive side
//! from exceeding the baseline under heavy spread-out load; the savings
//! claim is about meager-load scenarios.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::beam::beam_gain_at;
use crate::error::{Error, Result};
use crate::mobility::Position;
use crate::router::{NodeId, RouterState, ServedEntry};

fn default_beacon_fraction() -> f64 {
    0.1
}
fn default_pathloss_exponent() -> f64 {
    2.0
}

/// Monotone map from demand (requests/tick) to transmit duty in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DemandDutyMap {
    /// duty = clamp(demand / d_ref, floor, 1.0). The floor keeps a
    /// keep-alive trickle so associated nodes are never fully silenced.
    LinearClamp { d_ref: f64, floor: f64 },
}

impl Default for DemandDutyMap {
    fn default() -> Self {
        DemandDutyMap::LinearClamp {
            d_ref: 1.0,
            floor: 0.01,
        }
    }
}

impl DemandDutyMap {
    pub fn duty(&self, demand: f64) -> f64 {
        match *self {
            DemandDutyMap::LinearClamp { d_ref, floor } => (demand / d_ref).clamp(floor, 1.0),
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        match *self {
            DemandDutyMap::LinearClamp { d_ref, floor } => {
                if !(d_ref > 0.0) {
                    return Err(Error::config(format!("{field}.d_ref"), "d_ref must be positive"));
                }
                if !(floor > 0.0 && floor <= 1.0) {
                    return Err(Error::config(
                        format!("{field}.floor"),
                        "floor must be in (0, 1]",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Power model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    /// Baseline omni transmit power in watts.
    pub p_omni_w: f64,
    /// Fraction of p_omni used by the low-power SSID beacon.
    #[serde(default = "default_beacon_fraction")]
    pub beacon_fraction: f64,
    /// Pathloss exponent alpha.
    #[serde(default = "default_pathloss_exponent")]
    pub pathloss_exponent: f64,
    /// Range at which a unit-gain transmitter needs exactly p_omni_w.
    pub ref_range_m: f64,
    #[serde(default)]
    pub demand_duty: DemandDutyMap,
}

impl PowerParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let field = |name: &str| format!("{prefix}.{name}");
        if !(self.p_omni_w > 0.0) {
            return Err(Error::config(field("p_omni_w"), "must be positive"));
        }
        if !(self.beacon_fraction > 0.0 && self.beacon_fraction < 1.0) {
            return Err(Error::config(field("beacon_fraction"), "must be in (0, 1)"));
        }
        if !(1.5..=4.5).contains(&self.pathloss_exponent) {
            return Err(Error::config(
                field("pathloss_exponent"),
                "must be in [1.5, 4.5]",
            ));
        }
        if !(self.ref_range_m > 0.0) {
            return Err(Error::config(field("ref_range_m"), "must be positive"));
        }
        self.demand_duty.validate(&field("demand_duty"))?;
        Ok(())
    }
}

/// One accounting row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickPowerRow {
    pub tick: u64,
    pub beacon_w: f64,
    pub beams_w: f64,
    pub baseline_w: f64,
}

impl TickPowerRow {
    pub fn adaptive_w(&self) -> f64 {
        self.beacon_w + self.beams_w
    }
}

/// Cumulative energy ledger. Energy = power * dt per tick.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLedger {
    rows: Vec<TickPowerRow>,
    adaptive_j: f64,
    baseline_j: f64,
    dt_s: f64,
}

impl PowerLedger {
    pub fn new(dt_s: f64) -> Result<Self> {
        if !(dt_s > 0.0) {
            return Err(Error::domain("dt must be positive"));
        }
        Ok(PowerLedger {
            rows: Vec::new(),
            adaptive_j: 0.0,
            baseline_j: 0.0,
            dt_s,
        })
    }

    pub fn push(&mut self, row: TickPowerRow) {
        debug_assert!(row.beacon_w >= 0.0 && row.beams_w >= 0.0 && row.baseline_w >= 0.0);
        self.adaptive_j += row.adaptive_w() * self.dt_s;
        self.baseline_j += row.baseline_w * self.dt_s;
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TickPowerRow] {
        &self.rows
    }

    pub fn adaptive_j(&self) -> f64 {
        self.adaptive_j
    }

    pub fn baseline_j(&self) -> f64 {
        self.baseline_j
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Savings summary over a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    /// 1 - adaptive/baseline energy; 1 means everything saved, negative
    /// means the adaptive router spent more.
    pub savings_ratio: f64,
    pub mean_adaptive_w: f64,
    pub mean_baseline_w: f64,
}

/// Transmit power for one served beam.
pub fn beam_power(
    entry: &ServedEntry,
    node_range_m: f64,
    params: &PowerParams,
    geometry: ArrayGeometry,
) -> Result<f64> {
    if !(node_range_m > 0.0) {
        return Err(Error::domain("node range must be positive"));
    }
    let gain = beam_gain_at(&entry.beam, geometry, entry.last_doa_deg)?;
    if gain < 1e-6 {
        return Err(Error::Integrity(format!(
            "beam for node {} has gain {gain:.3e} at its own target",
            entry.node_id
        )));
    }
    let duty = params.demand_duty.duty(entry.demand);
    let pathloss = (node_range_m / params.ref_range_m).powf(params.pathloss_exponent);
    Ok(params.p_omni_w * pathloss / gain * duty)
}

/// Account one tick: beacon burst (if one fired), served beams, and the
/// always-on omni baseline. `tick` is the tick being accounted (the router
/// state has already advanced past it).
pub fn tick_power(
    tick: u64,
    state: &RouterState,
    positions: &BTreeMap<NodeId, Position>,
    params: &PowerParams,
    geometry: ArrayGeometry,
    beacon_emitted: bool,
    beacon_duty: f64,
) -> Result<TickPowerRow> {
    let beacon_w = if beacon_emitted {
        params.beacon_fraction * params.p_omni_w * beacon_duty
    } else {
        0.0
    };
    let mut beams_w = 0.0;
    for entry in state.served.values() {
        let position = positions.get(&entry.node_id).ok_or_else(|| {
            Error::domain(format!("served node {} has no position", entry.node_id))
        })?;
        beams_w += beam_power(entry, position.range_m(), params, geometry)?;
    }
    Ok(TickPowerRow {
        tick,
        beacon_w,
        beams_w,
        baseline_w: params.p_omni_w,
    })
}

/// Savings over a completed ledger.
pub fn savings_report(ledger: &PowerLedger) -> Result<SavingsReport> {
    if ledger.is_empty() {
        return Err(Error::domain("power ledger is empty"));
    }
    let n = ledger.len() as f64;
    let mean_adaptive_w = ledger.rows().iter().map(TickPowerRow::adaptive_w).sum::<f64>() / n;
    let mean_baseline_w = ledger.rows().iter().map(|r| r.baseline_w).sum::<f64>() / n;
    Ok(SavingsReport {
        savings_ratio: 1.0 - ledger.adaptive_j() / ledger.baseline_j(),
        mean_adaptive_w,
        mean_baseline_w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::conjugate_weights;
    use proptest::prelude::*;

    fn params() -> PowerParams {
        PowerParams {
            p_omni_w: 1.0,
            beacon_fraction: 0.1,
            pathloss_exponent: 2.0,
            ref_range_m: 100.0,
            demand_duty: DemandDutyMap::default(),
        }
    }

    fn entry(m: usize, theta: f64, demand: f64) -> ServedEntry {
        let g = ArrayGeometry::new(m, 0.5).unwrap();
        ServedEntry {
            node_id: 1,
            beam: conjugate_weights(g, theta).unwrap(),
            last_doa_deg: theta,
            last_update_tick: 0,
            demand,
        }
    }

    #[test]
    fn beam_power_at_reference_conditions() {
        // gain = M = 8, range = ref_range, duty = 1 -> p_omni / 8.
        let g = ArrayGeometry::new(8, 0.5).unwrap();
        let p = beam_power(&entry(8, 0.0, 1.0), 100.0, &params(), g).unwrap();
        assert!((p - 1.0 / 8.0).abs() < 1e-12, "got {p}");
    }

    #[test]
    fn beam_power_inverse_square() {
        // Half the range at alpha = 2 quarters the power (M = 1 => gain 1).
        let g = ArrayGeometry::new(1, 0.5).unwrap();
        let p = beam_power(&entry(1, 0.0, 1.0), 50.0, &params(), g).unwrap();
        assert!((p - 0.25).abs() < 1e-12, "got {p}");
    }

    #[test]
    fn zero_demand_hits_duty_floor() {
        let g = ArrayGeometry::new(1, 0.5).unwrap();
        let p = beam_power(&entry(1, 0.0, 0.0), 100.0, &params(), g).unwrap();
        assert!((p - 0.01).abs() < 1e-12, "got {p}");
    }

    #[test]
    fn beacon_tick_much_cheaper_than_baseline() {
        let state = RouterState::new();
        let positions = BTreeMap::new();
        let g = ArrayGeometry::new(8, 0.5).unwrap();
        let row = tick_power(0, &state, &positions, &params(), g, true, 1.0).unwrap();
        assert!((row.beacon_w - 0.1).abs() < 1e-12);
        assert_eq!(row.beams_w, 0.0);
        assert!(row.adaptive_w() < 0.2 * row.baseline_w);
    }

    #[test]
    fn single_node_ratio_is_one_over_m() {
        let g = ArrayGeometry::new(8, 0.5).unwrap();
        let mut state = RouterState::new();
        state.served.insert(1, entry(8, 0.0, 1.0));
        let mut positions = BTreeMap::new();
        positions.insert(1, Position::new(0.0, 100.0));
        let row = tick_power(0, &state, &positions, &params(), g, false, 1.0).unwrap();
        assert!((row.adaptive_w() / row.baseline_w - 0.125).abs() < 1e-12);
    }

    #[test]
    fn savings_report_edge_values() {
        let mut ledger = PowerLedger::new(1.0).unwrap();
        for t in 0..4 {
            ledger.push(TickPowerRow {
                tick: t,
                beacon_w: 0.0,
                beams_w: 1.0,
                baseline_w: 1.0,
            });
        }
        let r = savings_report(&ledger).unwrap();
        assert!(r.savings_ratio.abs() < 1e-12);

        let mut ledger = PowerLedger::new(1.0).unwrap();
        ledger.push(TickPowerRow {
            tick: 0,
            beacon_w: 0.0,
            beams_w: 0.0,
            baseline_w: 1.0,
        });
        let r = savings_report(&ledger).unwrap();
        assert!((r.savings_ratio - 1.0).abs() < 1e-12);

        let empty = PowerLedger::new(1.0).unwrap();
        assert!(savings_report(&empty).is_err());
    }

    #[test]
    fn ledger_cumulative_monotone() {
        let mut ledger = PowerLedger::new(0.1).unwrap();
        let mut last_a = 0.0;
        let mut last_b = 0.0;
        for t in 0..100 {
            ledger.push(TickPowerRow {
                tick: t,
                beacon_w: 0.01 * (t % 3) as f64,
                beams_w: 0.2,
                baseline_w: 1.0,
            });
            assert!(ledger.adaptive_j() >= last_a);
            assert!(ledger.baseline_j() >= last_b);
            last_a = ledger.adaptive_j();
            last_b = ledger.baseline_j();
        }
    }

    #[test]
    fn misaimed_beam_is_an_integrity_error() {
        // Point the beam at 0 but claim the node is at a pattern null.
        let g = ArrayGeometry::new(8, 0.5).unwrap();
        let mut e = entry(8, 0.0, 1.0);
        e.last_doa_deg = (1.0f64 / 4.0).asin().to_degrees();
        let err = beam_power(&e, 100.0, &params(), g);
        assert!(matches!(err, Err(Error::Integrity(_))));
    }

    proptest! {
        #[test]
        fn duty_map_monotone(d1 in 0.0f64..10.0, d2 in 0.0f64..10.0) {
            let map = DemandDutyMap::default();
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(map.duty(lo) <= map.duty(hi));
            prop_assert!(map.duty(lo) >= 0.01 && map.duty(hi) <= 1.0);
        }
    }
}
