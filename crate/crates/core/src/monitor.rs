//! Deposition monitoring service: ingest timestamped sweep records over a
//! line-delimited TCP protocol (or from files), run dip extraction and
//! calibration inversion, keep per-sensor time series, estimate deposition
//! rates, and raise threshold alarms with hysteresis.

use crate::inversion::{invert_frequency, CalibrationCurve, EstimateStatus, ThicknessEstimate,
    DEFAULT_F_RESOLUTION_GHZ};
use crate::sparams::{self, FrequencyTrace};
use chrono::{DateTime, Duration, Utc};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("journal: {0}")]
    Journal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-sensor calibration curves keyed by sensor id.
pub type SensorSet = BTreeMap<String, CalibrationCurve>;

/// One accepted ingest line: when it arrived, which sensor, what the trace
/// inverted to, and where the trace came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepositionRecord {
    pub timestamp: DateTime<Utc>,
    pub sensor_id: String,
    pub estimate: ThicknessEstimate,
    pub source_trace_ref: String,
}

/// A rejected ingest line, with a machine-readable reason such as
/// `missing-field:ts` or `edge-dip`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub reason: String,
}

impl Rejection {
    fn new(reason: impl Into<String>) -> Self {
        Self {
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct IngestLine {
    ts: Option<String>,
    sensor: Option<String>,
    trace: Option<InlineTrace>,
    s1p_path: Option<String>,
}

#[derive(Debug, Deserialize)]
struct InlineTrace {
    freq_ghz: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Parse one ingest line, extract the resonance dip and invert it through
/// the sensor's calibration curve. Rejections carry machine-readable
/// reasons and are never fatal to the caller.
pub fn ingest_record(line: &str, sensors: &SensorSet) -> Result<DepositionRecord, Rejection> {
    let parsed: IngestLine = serde_json::from_str(line)
        .map_err(|e| Rejection::new(format!("malformed-json:{e}")))?;
    let ts_raw = parsed.ts.ok_or_else(|| Rejection::new("missing-field:ts"))?;
    let timestamp = DateTime::parse_from_rfc3339(&ts_raw)
        .map_err(|_| Rejection::new(format!("bad-timestamp:{ts_raw}")))?
        .with_timezone(&Utc);
    let sensor_id = parsed
        .sensor
        .ok_or_else(|| Rejection::new("missing-field:sensor"))?;
    let curve = sensors
        .get(&sensor_id)
        .ok_or_else(|| Rejection::new(format!("unknown-sensor:{sensor_id}")))?;
    let (trace, source_trace_ref) = match (parsed.trace, parsed.s1p_path) {
        (Some(t), _) => {
            if t.freq_ghz.len() != t.re.len() || t.re.len() != t.im.len() {
                return Err(Rejection::new("trace-length-mismatch"));
            }
            let values: Vec<Complex64> = t
                .re
                .iter()
                .zip(&t.im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect();
            let trace = FrequencyTrace::new(t.freq_ghz, values)
                .map_err(|e| Rejection::new(format!("invalid-trace:{e}")))?;
            (trace, "inline".to_string())
        }
        (None, Some(path)) => {
            let trace = sparams::read_touchstone_file(Path::new(&path))
                .map_err(|e| Rejection::new(format!("invalid-trace:{e}")))?;
            (trace, path)
        }
        (None, None) => return Err(Rejection::new("missing-field:trace")),
    };
    let dip = sparams::find_dip(&trace).map_err(|e| {
        Rejection::new(match e {
            sparams::SparamError::EdgeDip { .. } => "edge-dip".to_string(),
            other => format!("dip-extraction:{other}"),
        })
    })?;
    let mut estimate = invert_frequency(curve, dip.f_res_ghz, DEFAULT_F_RESOLUTION_GHZ)
        .map_err(|e| Rejection::new(format!("inversion:{e}")))?;
    estimate.sensor_id = Some(sensor_id.clone());
    Ok(DepositionRecord {
        timestamp,
        sensor_id,
        estimate,
        source_trace_ref,
    })
}

/// Per-sensor time-ordered deposition records with an optional retention
/// window measured from each sensor's newest record.
#[derive(Debug, Clone, Default)]
pub struct DepositionSeries {
    per_sensor: BTreeMap<String, Vec<DepositionRecord>>,
    retention: Option<Duration>,
}

impl DepositionSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_retention(retention: Duration) -> Self {
        Self {
            per_sensor: BTreeMap::new(),
            retention: Some(retention),
        }
    }

    /// Insert keeping per-sensor time order (out-of-order arrivals are
    /// sorted in), then apply the retention window.
    pub fn insert(&mut self, record: DepositionRecord) {
        let recs = self.per_sensor.entry(record.sensor_id.clone()).or_default();
        let pos = recs.partition_point(|r| r.timestamp <= record.timestamp);
        recs.insert(pos, record);
        if let Some(window) = self.retention {
            let newest = recs.last().unwrap().timestamp;
            recs.retain(|r| newest - r.timestamp <= window);
        }
    }

    pub fn records(&self, sensor_id: &str) -> &[DepositionRecord] {
        self.per_sensor
            .get(sensor_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn sensor_ids(&self) -> impl Iterator<Item = &String> {
        self.per_sensor.keys()
    }

    pub fn len(&self) -> usize {
        self.per_sensor.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Least-squares deposition rate in mm/hour over the window ending at the
/// sensor's newest record; in-range estimates only. `None` with fewer than
/// two usable records or zero time spread.
pub fn rate_estimate(
    series: &DepositionSeries,
    sensor_id: &str,
    window: Duration,
) -> Option<f64> {
    let recs = series.records(sensor_id);
    let newest = recs.last()?.timestamp;
    let pts: Vec<(f64, f64)> = recs
        .iter()
        .filter(|r| {
            r.estimate.status == EstimateStatus::InRange && newest - r.timestamp <= window
        })
        .map(|r| {
            let hours = (r.timestamp - newest).num_milliseconds() as f64 / 3.6e6;
            (hours, r.estimate.thickness_mm)
        })
        .collect();
    ols_slope(&pts)
}

fn ols_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlarmKind {
    ThicknessThreshold,
    RateThreshold,
    SensorSaturated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub timestamp: DateTime<Utc>,
    pub sensor_id: String,
    pub kind: AlarmKind,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct AlarmConfig {
    pub thickness_mm: f64,
    pub rate_mm_per_hour: f64,
    /// Re-arm fraction: after firing, the value must fall below
    /// threshold * (1 - hysteresis) before another event can fire.
    pub hysteresis: f64,
    /// Window used for rate alarms.
    pub rate_window: Duration,
}

impl Default for AlarmConfig {
    fn default() -> Self {
        Self {
            thickness_mm: 5.0,
            rate_mm_per_hour: 0.5,
            hysteresis: 0.1,
            rate_window: Duration::hours(6),
        }
    }
}

/// Walk every sensor's series in time order and emit one event per upward
/// threshold crossing (with hysteresis re-arm) plus one sensor-saturated
/// event per saturation episode.
///
/// The walk is a pure function of the stored series, so the emitted list is
/// independent of how the input stream was chunked, and a server can emit
/// incrementally by remembering how many events it has already written.
pub fn evaluate_alarms(series: &DepositionSeries, config: &AlarmConfig) -> Vec<AlarmEvent> {
    let mut events = Vec::new();
    for sensor in series.sensor_ids() {
        let recs = series.records(sensor);
        let mut thickness_armed = true;
        let mut rate_armed = true;
        let mut saturated = false;
        let mut upto = DepositionSeries::new();
        for r in recs {
            // thickness crossing (in-range readings only)
            if r.estimate.status == EstimateStatus::InRange {
                let v = r.estimate.thickness_mm;
                if thickness_armed && v >= config.thickness_mm {
                    events.push(AlarmEvent {
                        timestamp: r.timestamp,
                        sensor_id: sensor.clone(),
                        kind: AlarmKind::ThicknessThreshold,
                        value: v,
                        threshold: config.thickness_mm,
                    });
                    thickness_armed = false;
                } else if v < config.thickness_mm * (1.0 - config.hysteresis) {
                    thickness_armed = true;
                }
            }
            // saturation episodes
            let now_saturated = r.estimate.status == EstimateStatus::Saturated;
            if now_saturated && !saturated {
                events.push(AlarmEvent {
                    timestamp: r.timestamp,
                    sensor_id: sensor.clone(),
                    kind: AlarmKind::SensorSaturated,
                    value: r.estimate.thickness_mm,
                    threshold: config.thickness_mm,
                });
            }
            saturated = now_saturated;
            // rate crossing, evaluated on the series as of this record
            upto.insert(r.clone());
            if let Some(rate) = rate_estimate(&upto, sensor, config.rate_window) {
                if rate_armed && rate >= config.rate_mm_per_hour {
                    events.push(AlarmEvent {
                        timestamp: r.timestamp,
                        sensor_id: sensor.clone(),
                        kind: AlarmKind::RateThreshold,
                        value: rate,
                        threshold: config.rate_mm_per_hour,
                    });
                    rate_armed = false;
                } else if rate < config.rate_mm_per_hour * (1.0 - config.hysteresis) {
                    rate_armed = true;
                }
            }
        }
    }
    events
}

/// Per-line acknowledgement sent back on the ingest connection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ack {
    pub ok: bool,
    pub thickness_mm: Option<f64>,
    pub status: String,
    pub reason: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub listen: String,
    pub sensors: SensorSet,
    pub journal_path: PathBuf,
    pub alarm_path: PathBuf,
    pub alarm: AlarmConfig,
}

struct ServerState {
    series: DepositionSeries,
    sensors: SensorSet,
    alarm: AlarmConfig,
    journal_path: PathBuf,
    alarm_path: PathBuf,
    alarms_emitted: usize,
    rejected: usize,
    fatal: Option<String>,
}

impl ServerState {
    fn handle_line(&mut self, line: &str) -> Ack {
        match ingest_record(line, &self.sensors) {
            Ok(record) => {
                let json = serde_json::to_string(&record).expect("record serializes");
                if let Err(e) = append_line(&self.journal_path, &json) {
                    self.fatal = Some(format!("journal write failed: {e}"));
                    return Ack {
                        ok: false,
                        thickness_mm: None,
                        status: "error".into(),
                        reason: Some("journal-write-failed".into()),
                    };
                }
                let thickness = record.estimate.thickness_mm;
                let status = record.estimate.status.to_string();
                self.series.insert(record);
                let events = evaluate_alarms(&self.series, &self.alarm);
                for ev in &events[self.alarms_emitted.min(events.len())..] {
                    let line = serde_json::to_string(ev).expect("event serializes");
                    if let Err(e) = append_line(&self.alarm_path, &line) {
                        self.fatal = Some(format!("alarm write failed: {e}"));
                        break;
                    }
                    eprintln!("alarm: {line}");
                }
                self.alarms_emitted = events.len();
                Ack {
                    ok: true,
                    thickness_mm: Some(thickness),
                    status,
                    reason: None,
                }
            }
            Err(rej) => {
                self.rejected += 1;
                Ack {
                    ok: false,
                    thickness_mm: None,
                    status: "rejected".into(),
                    reason: Some(rej.reason),
                }
            }
        }
    }
}

fn append_line(path: &Path, line: &str) -> std::io::Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    writeln!(f, "{line}")?;
    f.flush()
}

/// Rebuild a series from a JSON-lines journal. Replay is exact: the
/// restored series equals the one that produced the journal.
pub fn replay_journal(path: &Path) -> Result<DepositionSeries, MonitorError> {
    let mut series = DepositionSeries::new();
    if !path.exists() {
        return Ok(series);
    }
    let text = std::fs::read_to_string(path)?;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: DepositionRecord = serde_json::from_str(line)
            .map_err(|e| MonitorError::Journal(format!("line {}: {e}", i + 1)))?;
        series.insert(record);
    }
    Ok(series)
}

/// Bind and run the ingest loop until a journal failure. Each connection is
/// served on its own thread; series updates are serialized behind one lock
/// so journal writes have a total order and acks stay in per-connection
/// receive order.
pub fn serve(config: ServeConfig) -> Result<(), MonitorError> {
    let listener = TcpListener::bind(&config.listen)?;
    serve_on(listener, config)
}

pub fn serve_on(listener: TcpListener, config: ServeConfig) -> Result<(), MonitorError> {
    let series = replay_journal(&config.journal_path)?;
    // alarm emission resumes after the events implied by the replayed series
    let preexisting = evaluate_alarms(&series, &config.alarm).len();
    let state = Arc::new(Mutex::new(ServerState {
        series,
        sensors: config.sensors,
        alarm: config.alarm,
        journal_path: config.journal_path,
        alarm_path: config.alarm_path,
        alarms_emitted: preexisting,
        rejected: 0,
        fatal: None,
    }));
    listener.set_nonblocking(true)?;
    loop {
        if let Some(msg) = state.lock().unwrap().fatal.take() {
            return Err(MonitorError::Journal(msg));
        }
        match listener.accept() {
            Ok((stream, _)) => {
                let state = Arc::clone(&state);
                std::thread::spawn(move || handle_connection(stream, state));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(std::time::Duration::from_millis(20));
            }
            Err(e) => return Err(MonitorError::Io(e)),
        }
    }
}

fn handle_connection(stream: TcpStream, state: Arc<Mutex<ServerState>>) {
    let reader = BufReader::new(match stream.try_clone() {
        Ok(s) => s,
        Err(_) => return,
    });
    let mut writer = stream;
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let ack = state.lock().unwrap().handle_line(&line);
        let json = serde_json::to_string(&ack).expect("ack serializes");
        if writeln!(writer, "{json}").is_err() {
            break;
        }
    }
}
