//! Scenario configuration: a flat-key text format (`section.key = value`)
//! with strict validation. Unknown keys, duplicate keys, and out-of-range
//! values are errors that name the key and line — config typos must never
//! silently change an experiment.

use crate::netsim::{FieldSize, MacModel, RadioModel};
use crate::router::{Protocol, ProtocolTimers};
use crate::traffic::TrafficProfile;
use crate::wire::AddressWidth;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key `{key}`: {message}")]
    InvalidValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("missing required key `protocol`")]
    MissingProtocol,
    #[error("key `{key}`: {message}")]
    Range { key: String, message: String },
}

/// Which axis a sweep varies.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SweepAxis {
    Nodes,
    Distance,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Nodes => "nodes",
            SweepAxis::Distance => "distance",
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// A fully resolved experiment description.
#[derive(Clone, PartialEq, Debug)]
pub struct ScenarioConfig {
    /// One row set per listed protocol (usually one; two for comparisons).
    pub protocols: Vec<Protocol>,
    pub n_nodes: u32,
    pub duration_s: f64,
    pub addr_width: AddressWidth,
    pub seeds: Vec<u64>,
    pub field: FieldSize,
    pub radio: RadioModel,
    pub mac: MacModel,
    pub traffic: TrafficProfile,
    pub timers: ProtocolTimers,
    /// Distance-sweep probe placement; also makes the probe the only
    /// traffic source so results isolate distance effects.
    pub distance_to_sink_m: Option<f64>,
    pub sweep: Option<SweepSpec>,
}

impl ScenarioConfig {
    /// Field-level defaults; `protocols` stays empty until parsed.
    fn base() -> Self {
        ScenarioConfig {
            protocols: Vec::new(),
            n_nodes: 50,
            duration_s: 28_800.0,
            addr_width: AddressWidth::default(),
            seeds: (1..=10).collect(),
            field: FieldSize::default(),
            radio: RadioModel::default(),
            mac: MacModel::default(),
            traffic: TrafficProfile::default(),
            timers: ProtocolTimers::default(),
            distance_to_sink_m: None,
            sweep: None,
        }
    }

    /// Canonical text form; parsing it back yields an identical config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let protocols: Vec<&str> = self.protocols.iter().map(|p| p.label()).collect();
        let _ = writeln!(out, "protocol = {}", protocols.join(","));
        let _ = writeln!(out, "nodes = {}", self.n_nodes);
        let _ = writeln!(out, "duration_s = {}", self.duration_s);
        let _ = writeln!(out, "addr_width = {}", self.addr_width.octets());
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "seeds = {}", seeds.join(","));
        let _ = writeln!(out, "field.width_m = {}", self.field.width_m);
        let _ = writeln!(out, "field.height_m = {}", self.field.height_m);
        let _ = writeln!(out, "radio.range_m = {}", self.radio.range_m);
        let _ = writeln!(out, "radio.alpha = {}", self.radio.alpha);
        let _ = writeln!(out, "radio.base_success = {}", self.radio.base_success);
        let _ = writeln!(out, "radio.distance_loss = {}", self.radio.distance_loss);
        let _ = writeln!(out, "mac.base_delay_ms = {}", self.mac.base_delay_us / 1_000);
        let _ = writeln!(out, "mac.jitter_ms = {}", self.mac.jitter_us / 1_000);
        let _ = writeln!(out, "mac.retries = {}", self.mac.retries);
        let _ = writeln!(out, "mac.backoff_ms = {}", self.mac.backoff_us / 1_000);
        let _ = writeln!(out, "traffic.meter_period_s = {}", self.traffic.meter_period_s);
        let _ = writeln!(out, "traffic.meter_payload = {}", self.traffic.meter_payload);
        let _ = writeln!(out, "traffic.app_ack = {}", self.traffic.app_ack_enabled);
        let _ = writeln!(out, "traffic.ack_payload = {}", self.traffic.ack_payload);
        let _ = writeln!(
            out,
            "traffic.config_mean_interval_s = {}",
            self.traffic.config_mean_interval_s
        );
        let _ = writeln!(out, "traffic.config_payload = {}", self.traffic.config_payload);
        let _ = writeln!(out, "timers.route_hold_s = {}", us_to_s(self.timers.route_hold_us));
        let _ = writeln!(out, "timers.blacklist_s = {}", us_to_s(self.timers.blacklist_us));
        let _ = writeln!(out, "timers.ack_deadline_s = {}", us_to_s(self.timers.ack_deadline_us));
        let _ = writeln!(out, "timers.rreq_retries = {}", self.timers.rreq_retries);
        let _ = writeln!(out, "timers.rreq_backoff_s = {}", us_to_s(self.timers.rreq_backoff_us));
        let _ = writeln!(out, "timers.hop_limit = {}", self.timers.hop_limit);
        let _ = writeln!(out, "timers.buffer_cap = {}", self.timers.buffer_cap);
        if let Some(d) = self.distance_to_sink_m {
            let _ = writeln!(out, "run.distance_to_sink_m = {d}");
        }
        if let Some(sweep) = &self.sweep {
            let _ = writeln!(out, "sweep.axis = {}", sweep.axis.label());
            let values: Vec<String> = sweep.values.iter().map(f64::to_string).collect();
            let _ = writeln!(out, "sweep.values = {}", values.join(","));
        }
        out
    }
}

fn us_to_s(us: u64) -> f64 {
    us as f64 / 1_000_000.0
}

fn s_to_us(s: f64) -> u64 {
    (s * 1_000_000.0).round() as u64
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::base();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut protocol_given = false;
    let mut sweep_axis: Option<SweepAxis> = None;
    let mut sweep_values: Option<Vec<f64>> = None;
    let mut sweep_line = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((lhs, rhs)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: line_no, text: line.to_string() });
        };
        let key = lhs.trim();
        let value = rhs.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line: line_no, text: line.to_string() });
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::DuplicateKey { line: line_no, key: key.to_string() });
        }

        let invalid = |message: String| ConfigError::InvalidValue {
            line: line_no,
            key: key.to_string(),
            message,
        };

        match key {
            "protocol" => {
                let mut protocols = Vec::new();
                for part in value.split(',') {
                    let p = Protocol::from_str(part.trim()).map_err(&invalid)?;
                    if !protocols.contains(&p) {
                        protocols.push(p);
                    }
                }
                cfg.protocols = protocols;
                protocol_given = true;
            }
            "nodes" => cfg.n_nodes = parse_num(value).map_err(&invalid)?,
            "duration_s" => cfg.duration_s = parse_num(value).map_err(&invalid)?,
            "addr_width" => {
                let octets: u8 = parse_num(value).map_err(&invalid)?;
                cfg.addr_width = AddressWidth::new(octets)
                    .ok_or_else(|| invalid(format!("width {octets} outside 1..=16 octets")))?;
            }
            "seeds" => cfg.seeds = parse_list(value).map_err(&invalid)?,
            "field.width_m" => cfg.field.width_m = parse_num(value).map_err(&invalid)?,
            "field.height_m" => cfg.field.height_m = parse_num(value).map_err(&invalid)?,
            "radio.range_m" => cfg.radio.range_m = parse_num(value).map_err(&invalid)?,
            "radio.alpha" => cfg.radio.alpha = parse_num(value).map_err(&invalid)?,
            "radio.base_success" => cfg.radio.base_success = parse_num(value).map_err(&invalid)?,
            "radio.distance_loss" => cfg.radio.distance_loss = parse_bool(value).map_err(&invalid)?,
            "mac.base_delay_ms" => cfg.mac.base_delay_us = parse_millis(value).map_err(&invalid)?,
            "mac.jitter_ms" => cfg.mac.jitter_us = parse_millis(value).map_err(&invalid)?,
            "mac.retries" => cfg.mac.retries = parse_num(value).map_err(&invalid)?,
            "mac.backoff_ms" => cfg.mac.backoff_us = parse_millis(value).map_err(&invalid)?,
            "traffic.meter_period_s" => {
                cfg.traffic.meter_period_s = parse_num(value).map_err(&invalid)?
            }
            "traffic.meter_payload" => {
                cfg.traffic.meter_payload = parse_num(value).map_err(&invalid)?
            }
            "traffic.app_ack" => cfg.traffic.app_ack_enabled = parse_bool(value).map_err(&invalid)?,
            "traffic.ack_payload" => cfg.traffic.ack_payload = parse_num(value).map_err(&invalid)?,
            "traffic.config_mean_interval_s" => {
                cfg.traffic.config_mean_interval_s = parse_num(value).map_err(&invalid)?
            }
            "traffic.config_payload" => {
                cfg.traffic.config_payload = parse_num(value).map_err(&invalid)?
            }
            "timers.route_hold_s" => {
                cfg.timers.route_hold_us = parse_seconds(value).map_err(&invalid)?
            }
            "timers.blacklist_s" => {
                cfg.timers.blacklist_us = parse_seconds(value).map_err(&invalid)?
            }
            "timers.ack_deadline_s" => {
                cfg.timers.ack_deadline_us = parse_seconds(value).map_err(&invalid)?
            }
            "timers.rreq_retries" => cfg.timers.rreq_retries = parse_num(value).map_err(&invalid)?,
            "timers.rreq_backoff_s" => {
                cfg.timers.rreq_backoff_us = parse_seconds(value).map_err(&invalid)?
            }
            "timers.hop_limit" => cfg.timers.hop_limit = parse_num(value).map_err(&invalid)?,
            "timers.buffer_cap" => cfg.timers.buffer_cap = parse_num(value).map_err(&invalid)?,
            "run.distance_to_sink_m" => {
                cfg.distance_to_sink_m = Some(parse_num(value).map_err(&invalid)?)
            }
            "sweep.axis" => {
                sweep_line = line_no;
                sweep_axis = Some(match value {
                    "nodes" => SweepAxis::Nodes,
                    "distance" => SweepAxis::Distance,
                    other => return Err(invalid(format!("unknown axis `{other}`"))),
                });
            }
            "sweep.values" => {
                sweep_line = line_no;
                sweep_values = Some(parse_list(value).map_err(&invalid)?);
            }
            _ => return Err(ConfigError::UnknownKey { line: line_no, key: key.to_string() }),
        }
    }

    if !protocol_given || cfg.protocols.is_empty() {
        return Err(ConfigError::MissingProtocol);
    }
    match (sweep_axis, sweep_values) {
        (None, None) => {}
        (Some(axis), Some(values)) => cfg.sweep = Some(SweepSpec { axis, values }),
        (Some(_), None) => {
            return Err(ConfigError::InvalidValue {
                line: sweep_line,
                key: "sweep.values".to_string(),
                message: "sweep.axis given without sweep.values".to_string(),
            })
        }
        (None, Some(_)) => {
            return Err(ConfigError::InvalidValue {
                line: sweep_line,
                key: "sweep.axis".to_string(),
                message: "sweep.values given without sweep.axis".to_string(),
            })
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ScenarioConfig) -> Result<(), ConfigError> {
    let range = |key: &str, message: String| ConfigError::Range { key: key.to_string(), message };
    let positive = |key: &str, v: f64| -> Result<(), ConfigError> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(range(key, format!("must be positive and finite, got {v}")))
        }
    };

    if cfg.n_nodes < 2 {
        return Err(range("nodes", format!("need at least 2, got {}", cfg.n_nodes)));
    }
    positive("duration_s", cfg.duration_s)?;
    if cfg.seeds.is_empty() {
        return Err(range("seeds", "need at least one seed".to_string()));
    }
    positive("field.width_m", cfg.field.width_m)?;
    positive("field.height_m", cfg.field.height_m)?;
    positive("radio.range_m", cfg.radio.range_m)?;
    if !cfg.radio.alpha.is_finite() || cfg.radio.alpha < 0.0 {
        return Err(range("radio.alpha", format!("must be >= 0, got {}", cfg.radio.alpha)));
    }
    if !(0.0..=1.0).contains(&cfg.radio.base_success) {
        return Err(range(
            "radio.base_success",
            format!("must be within [0, 1], got {}", cfg.radio.base_success),
        ));
    }
    if cfg.mac.base_delay_us == 0 {
        return Err(range("mac.base_delay_ms", "must be at least 1 ms".to_string()));
    }
    positive("traffic.meter_period_s", cfg.traffic.meter_period_s)?;
    positive("traffic.config_mean_interval_s", cfg.traffic.config_mean_interval_s)?;
    for (key, v) in [
        ("traffic.meter_payload", cfg.traffic.meter_payload),
        ("traffic.ack_payload", cfg.traffic.ack_payload),
        ("traffic.config_payload", cfg.traffic.config_payload),
    ] {
        if v == 0 {
            return Err(range(key, "payload must be positive".to_string()));
        }
    }
    if cfg.timers.route_hold_us == 0 || cfg.timers.ack_deadline_us == 0 || cfg.timers.rreq_backoff_us == 0 {
        return Err(range("timers", "hold/deadline/backoff must be positive".to_string()));
    }
    if cfg.timers.rreq_retries > 16 {
        return Err(range("timers.rreq_retries", "at most 16 (doubling backoff)".to_string()));
    }
    if cfg.timers.hop_limit == 0 || cfg.timers.buffer_cap == 0 {
        return Err(range("timers", "hop_limit and buffer_cap must be positive".to_string()));
    }
    let max_probe = cfg.field.width_m.min(cfg.field.height_m) / 2.0;
    if let Some(d) = cfg.distance_to_sink_m {
        if !d.is_finite() || d <= 0.0 || d > max_probe {
            return Err(range(
                "run.distance_to_sink_m",
                format!("must be within (0, {max_probe}], got {d}"),
            ));
        }
    }
    if let Some(sweep) = &cfg.sweep {
        if sweep.values.is_empty() {
            return Err(range("sweep.values", "need at least one value".to_string()));
        }
        for &v in &sweep.values {
            match sweep.axis {
                SweepAxis::Nodes => {
                    if !v.is_finite() || v.fract() != 0.0 || !(2.0..=100_000.0).contains(&v) {
                        return Err(range(
                            "sweep.values",
                            format!("node counts must be integers >= 2, got {v}"),
                        ));
                    }
                }
                SweepAxis::Distance => {
                    if !v.is_finite() || v <= 0.0 || v > max_probe {
                        return Err(range(
                            "sweep.values",
                            format!("distances must be within (0, {max_probe}], got {v}"),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

fn parse_num<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("cannot parse `{value}`: {e}"))
}

fn parse_seconds(value: &str) -> Result<u64, String> {
    let s: f64 = parse_num(value)?;
    if !s.is_finite() || s < 0.0 || s > 1e9 {
        return Err(format!("seconds out of range: {value}"));
    }
    Ok(s_to_us(s))
}

fn parse_millis(value: &str) -> Result<u64, String> {
    let ms: u64 = parse_num(value)?;
    ms.checked_mul(1_000)
        .ok_or_else(|| format!("milliseconds value too large: {value}"))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true or false, got `{other}`")),
    }
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|part| parse_num(part.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_only_file_resolves_to_defaults() {
        let cfg = parse_config_str("protocol = loadng\n").unwrap();
        assert_eq!(cfg.protocols, vec![Protocol::Loadng]);
        assert_eq!(cfg.n_nodes, 50);
        assert_eq!(cfg.duration_s, 28_800.0);
        assert_eq!(cfg.field, FieldSize { width_m: 1000.0, height_m: 1000.0 });
        assert_eq!(cfg.radio.range_m, 150.0);
        assert_eq!(cfg.radio.alpha, 2.0);
        assert_eq!(cfg.seeds, (1..=10).collect::<Vec<u64>>());
        assert_eq!(cfg.traffic.meter_period_s, 60.0);
        assert_eq!(cfg.traffic.meter_payload, 512);
        assert_eq!(cfg.timers.route_hold_us, 100_000_000);
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn missing_protocol_is_an_error() {
        assert!(matches!(
            parse_config_str("nodes = 10\n").unwrap_err(),
            ConfigError::MissingProtocol
        ));
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = parse_config_str("protocol = aodv\nradio.rnage_m = 10\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 2);
                assert_eq!(key, "radio.rnage_m");
            }
            other => panic!("wrong error {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = parse_config_str("protocol = aodv\nnodes = 10\nnodes = 20\n").unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { line: 3, .. }));
    }

    #[test]
    fn negative_alpha_is_a_range_error() {
        let err = parse_config_str("protocol = loadng\nradio.alpha = -1\n").unwrap_err();
        match err {
            ConfigError::Range { key, .. } => assert_eq!(key, "radio.alpha"),
            other => panic!("wrong error {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = parse_config_str("# experiment\nprotocol = loadng # both? no\n\nnodes = 25\n")
            .unwrap();
        assert_eq!(cfg.n_nodes, 25);
    }

    #[test]
    fn sweep_requires_both_keys() {
        let err = parse_config_str("protocol = loadng\nsweep.axis = nodes\n").unwrap_err();
        assert!(matches!(err, ConfigError::InvalidValue { .. }));
        let err =
            parse_config_str("protocol = loadng\nsweep.values = 25,50\n").unwrap_err();
        assert!(matches!(err, ConfigError::InvalidValue { .. }));
    }

    #[test]
    fn protocol_list_parses_both() {
        let cfg = parse_config_str("protocol = loadng,aodv\n").unwrap();
        assert_eq!(cfg.protocols, vec![Protocol::Loadng, Protocol::Aodv]);
    }

    #[test]
    fn render_parse_round_trip_is_identity() {
        let text = "protocol = loadng,aodv\nnodes = 75\nduration_s = 900\nseeds = 1,2,3\n\
                    radio.alpha = 2.5\nmac.jitter_ms = 0\ntraffic.meter_period_s = 5\n\
                    timers.ack_deadline_s = 0.5\nsweep.axis = nodes\nsweep.values = 25,50,75\n";
        let cfg = parse_config_str(text).unwrap();
        let echoed = cfg.render();
        let reparsed = parse_config_str(&echoed).unwrap();
        assert_eq!(cfg, reparsed, "resolved echo must re-parse identically");
        assert_eq!(echoed, reparsed.render());
    }

    #[test]
    fn distance_probe_round_trip() {
        let text = "protocol = aodv\nrun.distance_to_sink_m = 250\nsweep.axis = distance\n\
                    sweep.values = 50,100,150,200,250\n";
        let cfg = parse_config_str(text).unwrap();
        assert_eq!(cfg.distance_to_sink_m, Some(250.0));
        let reparsed = parse_config_str(&cfg.render()).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn probe_beyond_field_rejected() {
        let err =
            parse_config_str("protocol = aodv\nrun.distance_to_sink_m = 600\n").unwrap_err();
        assert!(matches!(err, ConfigError::Range { .. }));
    }

    #[test]
    fn garbage_lines_report_syntax_errors() {
        for bad in ["protocol loadng", "= 5", "nodes =", "protocol = loadng\nwat"] {
            let err = parse_config_str(bad).unwrap_err();
            assert!(
                matches!(err, ConfigError::Syntax { .. } | ConfigError::MissingProtocol),
                "{bad:?} -> {err:?}"
            );
        }
    }
}
