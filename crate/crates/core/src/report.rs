//! Run artifacts: event log, power CSV, summary JSON, beam snapshot CSV,
//! plus the parser/recompute side used by the `report` cross-check command.
//!
//! No timestamps or hostnames appear in any output: identical runs produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::router::RouterAction;
use crate::scenario::{ActionRecord, RunResult};

pub const EVENTS_FILE: &str = "events.log";
pub const POWER_FILE: &str = "power.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BEAMS_FILE: &str = "beam_snapshots.csv";

pub const POWER_HEADER: &str =
    "tick,beacon_w,beams_w,adaptive_w,baseline_w,cum_adaptive_j,cum_baseline_j";
pub const BEAMS_HEADER: &str = "tick,node_id,theta_deg,beamwidth_deg";

/// One `events.log` line: `tick=<n> action=<kind> node=<id> theta=<deg>
/// detail=<text>`, with `-` for fields an action does not carry.
pub fn format_action_record(record: &ActionRecord) -> String {
    let (kind, node, theta, detail) = match &record.action {
        RouterAction::EmitBeacon => ("emit_beacon", None, None, "-".to_string()),
        RouterAction::AssignBeam {
            node_id,
            beam,
            nulls_skipped,
        } => (
            "assign_beam",
            Some(*node_id),
            Some(beam.target_azimuth_deg()),
            if *nulls_skipped > 0 {
                format!("nulls={};skipped={}", beam.null_azimuths_deg().len(), nulls_skipped)
            } else {
                format!("nulls={}", beam.null_azimuths_deg().len())
            },
        ),
        RouterAction::UpdateBeam {
            node_id,
            beam,
            previous_deg,
        } => (
            "update_beam",
            Some(*node_id),
            Some(beam.target_azimuth_deg()),
            format!("prev={previous_deg:.4}"),
        ),
        RouterAction::ReleaseBeam {
            node_id,
            last_doa_deg,
            reason,
        } => (
            "release_beam",
            Some(*node_id),
            Some(*last_doa_deg),
            reason.as_str().to_string(),
        ),
        RouterAction::RejectJoin { node_id, reason } => (
            "reject_join",
            Some(*node_id),
            None,
            reason.as_str().to_string(),
        ),
    };
    let node = node.map_or_else(|| "-".to_string(), |n| n.to_string());
    let theta = theta.map_or_else(|| "-".to_string(), |t| format!("{t:.4}"));
    format!(
        "tick={} action={kind} node={node} theta={theta} detail={detail}",
        record.tick
    )
}

/// Render `power.csv` content. Cumulative columns re-integrate the rows in
/// order, matching the ledger's own accumulation.
pub fn render_power_csv(result: &RunResult) -> String {
    let dt = result.ledger.dt_s();
    let mut out = String::with_capacity(64 * (result.ledger.len() + 1));
    out.push_str(POWER_HEADER);
    out.push('\n');
    let mut cum_adaptive = 0.0f64;
    let mut cum_baseline = 0.0f64;
    for row in result.ledger.rows() {
        cum_adaptive += row.adaptive_w() * dt;
        cum_baseline += row.baseline_w * dt;
        writeln!(
            out,
            "{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
            row.tick,
            row.beacon_w,
            row.beams_w,
            row.adaptive_w(),
            row.baseline_w,
            cum_adaptive,
            cum_baseline
        )
        .expect("writing to a String cannot fail");
    }
    out
}

fn render_events_log(result: &RunResult) -> String {
    let mut out = String::new();
    for record in &result.events {
        out.push_str(&format_action_record(record));
        out.push('\n');
    }
    out
}

fn render_beams_csv(result: &RunResult) -> String {
    let mut out = String::new();
    out.push_str(BEAMS_HEADER);
    out.push('\n');
    for row in &result.beam_log {
        writeln!(
            out,
            "{},{},{:.4},{:.4}",
            row.tick, row.node_id, row.theta_deg, row.beamwidth_deg
        )
        .expect("writing to a String cannot fail");
    }
    out
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Write `events.log`, `power.csv`, `summary.json`, and
/// `beam_snapshots.csv` into `out_dir`, creating it if needed. Returns the
/// paths written.
pub fn emit_reports(result: &RunResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let summary_json = to_pretty_json(&result.summary)?;
    Ok(vec![
        write_file(out_dir, EVENTS_FILE, &render_events_log(result))?,
        write_file(out_dir, POWER_FILE, &render_power_csv(result))?,
        write_file(out_dir, SUMMARY_FILE, &summary_json)?,
        write_file(out_dir, BEAMS_FILE, &render_beams_csv(result))?,
    ])
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: PathBuf::from("<memory>"),
        message: e.to_string(),
    })?;
    s.push('\n');
    Ok(s)
}

/// A parsed `events.log` line.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEvent {
    pub tick: u64,
    pub kind: String,
    pub node: Option<u32>,
    pub theta_deg: Option<f64>,
    pub detail: String,
}

pub fn parse_event_line(line: &str) -> Result<ParsedEvent> {
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for token in line.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::domain(format!("malformed event token `{token}`")))?;
        fields.insert(key, value);
    }
    let get = |key: &str| -> Result<&str> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| Error::domain(format!("event line missing `{key}`: {line}")))
    };
    let tick: u64 = get("tick")?
        .parse()
        .map_err(|_| Error::domain(format!("bad tick in: {line}")))?;
    let kind = get("action")?.to_string();
    let node = match get("node")? {
        "-" => None,
        v => Some(
            v.parse()
                .map_err(|_| Error::domain(format!("bad node in: {line}")))?,
        ),
    };
    let theta_deg = match get("theta")? {
        "-" => None,
        v => Some(
            v.parse()
                .map_err(|_| Error::domain(format!("bad theta in: {line}")))?,
        ),
    };
    Ok(ParsedEvent {
        tick,
        kind,
        node,
        theta_deg,
        detail: get("detail")?.to_string(),
    })
}

/// Summary recomputed from `events.log` + `power.csv` alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecomputedSummary {
    pub joins: u64,
    pub rejects: u64,
    pub releases: u64,
    pub beam_updates: u64,
    pub beacons: u64,
    pub ticks: u64,
    pub savings_ratio: f64,
    pub mean_adaptive_w: f64,
    pub mean_baseline_w: f64,
}

/// Cross-check tool: rebuild the summary from the emitted files.
pub fn recompute_from_dir(dir: &Path) -> Result<RecomputedSummary> {
    let events_path = dir.join(EVENTS_FILE);
    let events_text =
        std::fs::read_to_string(&events_path).map_err(|e| Error::io(&events_path, e))?;
    let mut joins = 0u64;
    let mut rejects = 0u64;
    let mut releases = 0u64;
    let mut beam_updates = 0u64;
    let mut beacons = 0u64;
    for line in events_text.lines().filter(|l| !l.trim().is_empty()) {
        let event = parse_event_line(line)?;
        match event.kind.as_str() {
            "assign_beam" => joins += 1,
            "reject_join" => rejects += 1,
            "release_beam" => releases += 1,
            "update_beam" => beam_updates += 1,
            "emit_beacon" => beacons += 1,
            other => {
                return Err(Error::Parse {
                    path: events_path.clone(),
                    message: format!("unknown action kind `{other}`"),
                })
            }
        }
    }

    let power_path = dir.join(POWER_FILE);
    let power_text =
        std::fs::read_to_string(&power_path).map_err(|e| Error::io(&power_path, e))?;
    let mut lines = power_text.lines();
    match lines.next() {
        Some(header) if header == POWER_HEADER => {}
        other => {
            return Err(Error::Parse {
                path: power_path.clone(),
                message: format!("unexpected power.csv header: {other:?}"),
            })
        }
    }
    let mut ticks = 0u64;
    let mut sum_adaptive_w = 0.0f64;
    let mut sum_baseline_w = 0.0f64;
    let mut cum_adaptive = 0.0f64;
    let mut cum_baseline = 0.0f64;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(Error::Parse {
                path: power_path.clone(),
                message: format!("expected 7 columns, got {}: {line}", cols.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                path: power_path.clone(),
                message: format!("bad number `{s}` in: {line}"),
            })
        };
        ticks += 1;
        sum_adaptive_w += parse(cols[3])?;
        sum_baseline_w += parse(cols[4])?;
        cum_adaptive = parse(cols[5])?;
        cum_baseline = parse(cols[6])?;
    }
    if ticks == 0 {
        return Err(Error::Parse {
            path: power_path,
            message: "power.csv has no data rows".to_string(),
        });
    }

    Ok(RecomputedSummary {
        joins,
        rejects,
        releases,
        beam_updates,
        beacons,
        ticks,
        savings_ratio: 1.0 - cum_adaptive / cum_baseline,
        mean_adaptive_w: sum_adaptive_w / ticks as f64,
        mean_baseline_w: sum_baseline_w / ticks as f64,
    })
}
