//! Run orchestration and result emission.
//!
//! A sweep is the cartesian product of protocols x axis values x seeds.
//! Cells may execute on several threads; rows are sorted by
//! (protocol, axis_value, seed) before emission so parallelism never
//! changes a single output byte.

use crate::metrics::MetricsReport;
use crate::netsim::{
    generate_topology, stream_rng, Engine, EngineConfig, SimError, RNG_STREAM_TOPOLOGY,
    RNG_STREAM_TRAFFIC,
};
use crate::router::Protocol;
use crate::scenario::{ScenarioConfig, SweepAxis};
use crate::time::SimTime;
use crate::traffic::{schedule_config_pushes, schedule_meter_reports};
use crate::wire::Address;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Published RPL comparison point; printed by reports for context, never
/// simulated here.
pub const RPL_REFERENCE_NOTE: &str =
    "# reference (paper-reported, not simulated): rpl pdr=1.00 delay_ms=94..96";

/// One (protocol, axis value, seed) cell, flattened for CSV/JSON.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ResultRow {
    pub protocol: String,
    pub axis: String,
    pub axis_value: f64,
    pub seed: u64,
    pub mp2p_sent: u64,
    pub mp2p_delivered: u64,
    pub mp2p_pdr: f64,
    pub mp2p_delay_mean_ms: f64,
    pub mp2p_delay_p95_ms: f64,
    pub p2mp_sent: u64,
    pub p2mp_delivered: u64,
    pub p2mp_pdr: f64,
    pub p2mp_delay_mean_ms: f64,
    pub p2mp_delay_p95_ms: f64,
    pub ctl_packets: u64,
    pub ctl_bytes: u64,
    pub ctl_bytes_per_s: f64,
    pub drops_total: u64,
}

/// Frozen column set (schema 1); adding a column is a versioned change.
pub const CSV_HEADER: &str = "protocol,axis,axis_value,seed,mp2p_sent,mp2p_delivered,mp2p_pdr,\
mp2p_delay_mean_ms,mp2p_delay_p95_ms,p2mp_sent,p2mp_delivered,p2mp_pdr,p2mp_delay_mean_ms,\
p2mp_delay_p95_ms,ctl_packets,ctl_bytes,ctl_bytes_per_s,drops_total";

impl ResultRow {
    pub fn from_report(
        protocol: Protocol,
        axis: &str,
        axis_value: f64,
        seed: u64,
        report: &MetricsReport,
    ) -> Self {
        ResultRow {
            protocol: protocol.label().to_string(),
            axis: axis.to_string(),
            axis_value,
            seed,
            mp2p_sent: report.mp2p.sent,
            mp2p_delivered: report.mp2p.delivered,
            mp2p_pdr: report.mp2p.pdr,
            mp2p_delay_mean_ms: report.mp2p.delay_mean_ms,
            mp2p_delay_p95_ms: report.mp2p.delay_p95_ms,
            p2mp_sent: report.p2mp.sent,
            p2mp_delivered: report.p2mp.delivered,
            p2mp_pdr: report.p2mp.pdr,
            p2mp_delay_mean_ms: report.p2mp.delay_mean_ms,
            p2mp_delay_p95_ms: report.p2mp.delay_p95_ms,
            ctl_packets: report.control_total_packets,
            ctl_bytes: report.control_total_bytes,
            ctl_bytes_per_s: report.control_bytes_per_s,
            drops_total: report.drops_total,
        }
    }

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.protocol,
            self.axis,
            self.axis_value,
            self.seed,
            self.mp2p_sent,
            self.mp2p_delivered,
            self.mp2p_pdr,
            self.mp2p_delay_mean_ms,
            self.mp2p_delay_p95_ms,
            self.p2mp_sent,
            self.p2mp_delivered,
            self.p2mp_pdr,
            self.p2mp_delay_mean_ms,
            self.p2mp_delay_p95_ms,
            self.ctl_packets,
            self.ctl_bytes,
            self.ctl_bytes_per_s,
            self.drops_total
        )
    }
}

#[derive(Debug, thiserror::Error)]
#[error("run aborted at ({protocol}, {axis}={axis_value}, seed={seed}): {source}")]
pub struct RunError {
    pub protocol: Protocol,
    pub axis: String,
    pub axis_value: f64,
    pub seed: u64,
    #[source]
    pub source: SimError,
}

/// Output of one simulation cell.
pub struct RunOutput {
    pub report: MetricsReport,
    pub trace: Option<Vec<String>>,
}

/// Executes one cell: topology, traffic, event loop, frozen metrics.
pub fn run_single(
    cfg: &ScenarioConfig,
    protocol: Protocol,
    n_nodes: u32,
    distance_to_sink_m: Option<f64>,
    seed: u64,
    trace: bool,
) -> Result<RunOutput, SimError> {
    let mut topo_rng = stream_rng(seed, RNG_STREAM_TOPOLOGY);
    let positions = generate_topology(
        n_nodes,
        cfg.field,
        cfg.radio.range_m,
        distance_to_sink_m,
        &mut topo_rng,
    )?;
    let mut engine = Engine::new(EngineConfig {
        positions,
        protocol,
        radio: cfg.radio,
        mac: cfg.mac,
        timers: cfg.timers,
        addr_width: cfg.addr_width,
        seed,
        app_ack_enabled: cfg.traffic.app_ack_enabled,
        ack_payload: cfg.traffic.ack_payload,
        trace,
    });
    let sink = engine.sink_addr();
    // In probe mode only the probe (node index 1) talks, so the distance
    // axis is measured in isolation; relays still route.
    let clients: Vec<Address> = if distance_to_sink_m.is_some() {
        vec![engine.nodes()[1].addr]
    } else {
        engine.nodes().iter().skip(1).map(|n| n.addr).collect()
    };
    let mut traffic_rng = stream_rng(seed, RNG_STREAM_TRAFFIC);
    let reports =
        schedule_meter_reports(&cfg.traffic, &clients, sink, cfg.duration_s, &mut traffic_rng)
            .map_err(|e| SimError::Traffic(e.to_string()))?;
    let pushes =
        schedule_config_pushes(&cfg.traffic, &clients, sink, cfg.duration_s, &mut traffic_rng)
            .map_err(|e| SimError::Traffic(e.to_string()))?;
    for a in reports.into_iter().chain(pushes) {
        engine.schedule_arrival(a.at, a.src, a.dst, a.kind, a.payload);
    }
    engine.run_until(SimTime::from_secs_f64(cfg.duration_s))?;
    let trace_lines = engine.trace_lines().map(<[String]>::to_vec);
    Ok(RunOutput { report: engine.finish(), trace: trace_lines })
}

/// One work item of a sweep.
#[derive(Clone, Copy, PartialEq, Debug)]
struct Cell {
    protocol: Protocol,
    axis_value: f64,
    seed: u64,
}

fn cell_params(cfg: &ScenarioConfig, axis: SweepAxis, value: f64) -> (u32, Option<f64>) {
    match axis {
        SweepAxis::Nodes => (value as u32, cfg.distance_to_sink_m),
        SweepAxis::Distance => (cfg.n_nodes, Some(value)),
    }
}

/// Effective axis when the config has no sweep section: a single cell.
fn implicit_axis(cfg: &ScenarioConfig) -> (SweepAxis, f64) {
    match cfg.distance_to_sink_m {
        Some(d) => (SweepAxis::Distance, d),
        None => (SweepAxis::Nodes, f64::from(cfg.n_nodes)),
    }
}

/// Runs every (protocol, axis value, seed) cell, up to `jobs` at a time.
/// Rows come back sorted by (protocol, axis_value, seed).
pub fn run_sweep(cfg: &ScenarioConfig, jobs: usize) -> Result<Vec<ResultRow>, RunError> {
    let (axis, values): (SweepAxis, Vec<f64>) = match &cfg.sweep {
        Some(sweep) => (sweep.axis, sweep.values.clone()),
        None => {
            let (axis, value) = implicit_axis(cfg);
            (axis, vec![value])
        }
    };
    let mut cells = Vec::new();
    for &protocol in &cfg.protocols {
        for &axis_value in &values {
            for &seed in &cfg.seeds {
                cells.push(Cell { protocol, axis_value, seed });
            }
        }
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ResultRow, RunError>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    let workers = jobs.max(1).min(cells.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= cells.len() {
                    break;
                }
                let cell = cells[idx];
                let (n_nodes, distance) = cell_params(cfg, axis, cell.axis_value);
                let outcome =
                    run_single(cfg, cell.protocol, n_nodes, distance, cell.seed, false)
                        .map(|out| {
                            ResultRow::from_report(
                                cell.protocol,
                                axis.label(),
                                cell.axis_value,
                                cell.seed,
                                &out.report,
                            )
                        })
                        .map_err(|source| RunError {
                            protocol: cell.protocol,
                            axis: axis.label().to_string(),
                            axis_value: cell.axis_value,
                            seed: cell.seed,
                            source,
                        });
                results.lock().expect("worker poisoned")[idx] = Some(outcome);
            });
        }
    });

    let mut rows = Vec::with_capacity(cells.len());
    for slot in results.into_inner().expect("workers done") {
        rows.push(slot.expect("every cell executed")?);
    }
    rows.sort_by(|a, b| {
        a.protocol
            .cmp(&b.protocol)
            .then(a.axis_value.total_cmp(&b.axis_value))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

/// Rows as CSV: the frozen 18-column header plus one line per row.
pub fn emit_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(128 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

/// Rows as a JSON document: `{"schema": 1, "rows": [...]}`.
pub fn emit_json(rows: &[ResultRow]) -> String {
    let doc = JsonDoc { schema: 1, rows: rows.to_vec() };
    let mut text = serde_json::to_string_pretty(&doc).expect("rows serialize");
    text.push('\n');
    text
}

/// Inverse of [`emit_json`].
pub fn parse_json(text: &str) -> Result<Vec<ResultRow>, serde_json::Error> {
    let doc: JsonDoc = serde_json::from_str(text)?;
    Ok(doc.rows)
}

#[derive(Serialize, Deserialize)]
struct JsonDoc {
    schema: u32,
    rows: Vec<ResultRow>,
}

/// Per-(protocol, axis value) means with 95% Student-t confidence
/// intervals over seeds.
pub fn summary_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("# schema=1\n");
    out.push_str(
        "protocol,axis,axis_value,n_seeds,mp2p_pdr_mean,mp2p_pdr_ci95,p2mp_pdr_mean,\
         p2mp_pdr_ci95,mp2p_delay_ms_mean,mp2p_delay_ms_ci95,p2mp_delay_ms_mean,\
         p2mp_delay_ms_ci95,ctl_bytes_per_s_mean,ctl_bytes_per_s_ci95\n",
    );
    let mut groups: Vec<(&str, &str, f64)> = rows
        .iter()
        .map(|r| (r.protocol.as_str(), r.axis.as_str(), r.axis_value))
        .collect();
    groups.sort_by(|a, b| a.0.cmp(b.0).then(a.2.total_cmp(&b.2)));
    groups.dedup();
    for (protocol, axis, axis_value) in groups {
        let members: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| r.protocol == protocol && r.axis == axis && r.axis_value == axis_value)
            .collect();
        let stats = |f: &dyn Fn(&ResultRow) -> f64| mean_ci95(&members.iter().map(|r| f(r)).collect::<Vec<f64>>());
        let (pdr_m, pdr_c) = stats(&|r| r.mp2p_pdr);
        let (ppdr_m, ppdr_c) = stats(&|r| r.p2mp_pdr);
        let (dly_m, dly_c) = stats(&|r| r.mp2p_delay_mean_ms);
        let (pdly_m, pdly_c) = stats(&|r| r.p2mp_delay_mean_ms);
        let (ctl_m, ctl_c) = stats(&|r| r.ctl_bytes_per_s);
        out.push_str(&format!(
            "{protocol},{axis},{axis_value},{n},{pdr_m},{pdr_c},{ppdr_m},{ppdr_c},{dly_m},{dly_c},{pdly_m},{pdly_c},{ctl_m},{ctl_c}\n",
            n = members.len(),
        ));
    }
    out
}

/// Two-tailed 97.5% Student-t quantiles for df 1..=30; beyond that the
/// normal approximation is close enough.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

fn mean_ci95(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = if n - 1 <= 30 { T_975[n - 2] } else { 1.96 };
    (mean, t * (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_config_str;

    fn tiny_cfg(extra: &str) -> ScenarioConfig {
        let text = format!(
            "protocol = loadng,aodv\nnodes = 5\nduration_s = 120\nseeds = 1,2,3\n\
             radio.distance_loss = false\nfield.width_m = 400\nfield.height_m = 400\n{extra}"
        );
        parse_config_str(&text).unwrap()
    }

    #[test]
    fn sweep_produces_product_rows_in_stable_order() {
        let cfg = tiny_cfg("sweep.axis = nodes\nsweep.values = 4,5\n");
        let rows = run_sweep(&cfg, 4).unwrap();
        // 2 protocols x 2 axis values x 3 seeds.
        assert_eq!(rows.len(), 12);
        let mut expected_order = rows.clone();
        expected_order.sort_by(|a, b| {
            a.protocol
                .cmp(&b.protocol)
                .then(a.axis_value.total_cmp(&b.axis_value))
                .then(a.seed.cmp(&b.seed))
        });
        assert_eq!(rows, expected_order);
        assert!(rows.iter().all(|r| r.axis == "nodes"));
    }

    #[test]
    fn parallel_and_serial_sweeps_emit_identical_bytes() {
        let cfg = tiny_cfg("sweep.axis = nodes\nsweep.values = 4,6\n");
        let serial = emit_csv(&run_sweep(&cfg, 1).unwrap());
        let parallel = emit_csv(&run_sweep(&cfg, 8).unwrap());
        assert_eq!(serial, parallel);
        let again = emit_csv(&run_sweep(&cfg, 8).unwrap());
        assert_eq!(parallel, again, "identical invocations are byte-identical");
    }

    #[test]
    fn csv_has_header_plus_one_line_per_row() {
        let cfg = parse_config_str(
            "protocol = loadng\nnodes = 4\nduration_s = 120\nseeds = 7\n\
             radio.distance_loss = false\nfield.width_m = 400\nfield.height_m = 400\n",
        )
        .unwrap();
        let rows = run_sweep(&cfg, 1).unwrap();
        assert_eq!(rows.len(), 1);
        let csv = emit_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2, "header + one row");
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("loadng,nodes,4,7,"));
    }

    #[test]
    fn json_round_trip_and_csv_agree_field_for_field() {
        let cfg = tiny_cfg("sweep.axis = nodes\nsweep.values = 4\n");
        let rows = run_sweep(&cfg, 2).unwrap();
        let parsed = parse_json(&emit_json(&rows)).unwrap();
        assert_eq!(rows, parsed, "json round trip is lossless");
        // CSV cells must be the Display form of the same values.
        let csv = emit_csv(&rows);
        for (line, row) in csv.lines().skip(1).zip(&rows) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), 18);
            assert_eq!(cells[0], row.protocol);
            assert_eq!(cells[2], row.axis_value.to_string());
            assert_eq!(cells[3], row.seed.to_string());
            assert_eq!(cells[6], row.mp2p_pdr.to_string());
            assert_eq!(cells[16], row.ctl_bytes_per_s.to_string());
        }
    }

    #[test]
    fn summary_groups_by_protocol_and_axis_value() {
        let cfg = tiny_cfg("sweep.axis = nodes\nsweep.values = 4,5\n");
        let rows = run_sweep(&cfg, 4).unwrap();
        let summary = summary_csv(&rows);
        let lines: Vec<&str> = summary.lines().collect();
        assert_eq!(lines[0], "# schema=1");
        assert_eq!(lines.len(), 2 + 4, "schema line, header, 2 protocols x 2 values");
        assert!(lines[2].starts_with("aodv,nodes,4,3,"));
        assert!(lines[5].starts_with("loadng,nodes,5,3,"));
    }

    #[test]
    fn ci_is_zero_for_single_seed_and_tightens_sensibly() {
        let (mean, ci) = mean_ci95(&[5.0]);
        assert_eq!((mean, ci), (5.0, 0.0));
        let (mean, ci) = mean_ci95(&[1.0, 2.0, 3.0]);
        assert!((mean - 2.0).abs() < 1e-12);
        // t(0.975, df=2) * sd/sqrt(3) = 4.303 * 1/sqrt(3)
        assert!((ci - 4.303 / 3f64.sqrt()).abs() < 1e-9);
    }
}
