//! Calibration curves and thickness inversion: monotone piecewise-linear
//! mappings between sulfur thickness and an observable (resonant frequency or
//! |S11| at a fixed frequency), plus deterministic fusion of multiple
//! staged sensors.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Default VNA frequency resolution, GHz; drives inversion uncertainty.
pub const DEFAULT_F_RESOLUTION_GHZ: f64 = 0.01;
/// Default magnitude resolution, dB.
pub const DEFAULT_DB_RESOLUTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum InversionError {
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("calibration curve kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: String, got: String },
    #[error("empty estimate list")]
    EmptyInput,
    #[error("calibration csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservableKind {
    FrequencyGhz,
    MagnitudeDbAtF0 { f0_ghz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSource {
    Published,
    Model,
    Measured,
}

impl std::fmt::Display for CurveSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurveSource::Published => write!(f, "published"),
            CurveSource::Model => write!(f, "model"),
            CurveSource::Measured => write!(f, "measured"),
        }
    }
}

/// Monotone piecewise-linear thickness → observable map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    kind: ObservableKind,
    /// (thickness mm, observable), strictly increasing in thickness.
    nodes: Vec<(f64, f64)>,
    valid_range_mm: (f64, f64),
    source: CurveSource,
}

impl CalibrationCurve {
    pub fn new(
        kind: ObservableKind,
        nodes: Vec<(f64, f64)>,
        source: CurveSource,
    ) -> Result<Self, InversionError> {
        if nodes.len() < 2 {
            return Err(InversionError::Calibration(format!(
                "need at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        for w in nodes.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(InversionError::Calibration(format!(
                    "thickness not strictly increasing between {} mm and {} mm",
                    w[0].0, w[1].0
                )));
            }
        }
        // The observable must be strictly monotone; frequency must decrease
        // with loading.
        let increasing = nodes[1].1 > nodes[0].1;
        if matches!(kind, ObservableKind::FrequencyGhz) && increasing {
            return Err(InversionError::Calibration(
                "frequency observable must decrease with thickness".into(),
            ));
        }
        for w in nodes.windows(2) {
            let ok = if increasing {
                w[1].1 > w[0].1
            } else {
                w[1].1 < w[0].1
            };
            if !ok {
                return Err(InversionError::Calibration(format!(
                    "observable not strictly monotone between nodes ({} mm, {}) and ({} mm, {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        let valid_range_mm = (nodes[0].0, nodes[nodes.len() - 1].0);
        Ok(Self {
            kind,
            nodes,
            valid_range_mm,
            source,
        })
    }

    pub fn kind(&self) -> ObservableKind {
        self.kind
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn valid_range_mm(&self) -> (f64, f64) {
        self.valid_range_mm
    }

    pub fn source(&self) -> CurveSource {
        self.source
    }

    fn observable_increasing(&self) -> bool {
        self.nodes[1].1 > self.nodes[0].1
    }

    /// Observable at thickness `t_mm` by piecewise-linear interpolation
    /// (clamped to the node span).
    pub fn interpolate(&self, t_mm: f64) -> f64 {
        let n = &self.nodes;
        if t_mm <= n[0].0 {
            return n[0].1;
        }
        if t_mm >= n[n.len() - 1].0 {
            return n[n.len() - 1].1;
        }
        let i = n.partition_point(|&(t, _)| t <= t_mm);
        let (t0, v0) = n[i - 1];
        let (t1, v1) = n[i];
        v0 + (t_mm - t0) / (t1 - t0) * (v1 - v0)
    }

    /// Exact piecewise-linear inverse plus range classification.
    fn invert_observable(&self, obs: f64, obs_resolution: f64) -> ThicknessEstimate {
        let n = &self.nodes;
        let inc = self.observable_increasing();
        // Fold to an "effective" increasing observable for the bound checks.
        let lo_obs = n[0].1;
        let hi_obs = n[n.len() - 1].1;
        let before_first = if inc { obs < lo_obs } else { obs > lo_obs };
        let after_last = if inc { obs > hi_obs } else { obs < hi_obs };
        if before_first {
            let slope = (n[1].1 - n[0].1) / (n[1].0 - n[0].0);
            return ThicknessEstimate {
                thickness_mm: n[0].0,
                uncertainty_mm: obs_resolution / slope.abs(),
                status: EstimateStatus::BelowRange,
                sensor_id: None,
            };
        }
        if after_last {
            let k = n.len() - 1;
            let slope = (n[k].1 - n[k - 1].1) / (n[k].0 - n[k - 1].0);
            return ThicknessEstimate {
                thickness_mm: n[k].0,
                uncertainty_mm: obs_resolution / slope.abs(),
                status: EstimateStatus::Saturated,
                sensor_id: None,
            };
        }
        // Find the containing segment; hits on a node return the node
        // thickness exactly.
        for (i, &(t, v)) in n.iter().enumerate() {
            if obs == v {
                let (a, b) = if i == 0 { (0, 1) } else { (i - 1, i) };
                let slope = (n[b].1 - n[a].1) / (n[b].0 - n[a].0);
                return ThicknessEstimate {
                    thickness_mm: t,
                    uncertainty_mm: obs_resolution / slope.abs(),
                    status: EstimateStatus::InRange,
                    sensor_id: None,
                };
            }
        }
        for w in n.windows(2) {
            let (t0, v0) = w[0];
            let (t1, v1) = w[1];
            let inside = if inc {
                obs > v0 && obs < v1
            } else {
                obs < v0 && obs > v1
            };
            if inside {
                let slope = (v1 - v0) / (t1 - t0);
                return ThicknessEstimate {
                    thickness_mm: t0 + (obs - v0) / slope,
                    uncertainty_mm: obs_resolution / slope.abs(),
                    status: EstimateStatus::InRange,
                    sensor_id: None,
                };
            }
        }
        unreachable!("observable {obs} escaped monotone segment search");
    }

    /// CSV with comment metadata lines and a header row naming the kind
    /// (and f0 for magnitude curves).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.kind {
            ObservableKind::FrequencyGhz => {
                out.push_str("# kind: frequency_ghz\n");
            }
            ObservableKind::MagnitudeDbAtF0 { f0_ghz } => {
                out.push_str("# kind: magnitude_db_at_f0\n");
                out.push_str(&format!("# f0_ghz: {f0_ghz}\n"));
            }
        }
        out.push_str(&format!("# source: {}\n", self.source));
        out.push_str(match self.kind {
            ObservableKind::FrequencyGhz => "thickness_mm,frequency_ghz\n",
            ObservableKind::MagnitudeDbAtF0 { .. } => "thickness_mm,mag_db\n",
        });
        for (t, v) in &self.nodes {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, InversionError> {
        let mut kind_str: Option<String> = None;
        let mut f0: Option<f64> = None;
        let mut source = CurveSource::Measured;
        let mut nodes = Vec::new();
        let mut seen_header = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some(v) = meta.strip_prefix("kind:") {
                    kind_str = Some(v.trim().to_string());
                } else if let Some(v) = meta.strip_prefix("f0_ghz:") {
                    f0 = Some(v.trim().parse().map_err(|e| InversionError::Csv {
                        line: line_no,
                        msg: format!("bad f0_ghz: {e}"),
                    })?);
                } else if let Some(v) = meta.strip_prefix("source:") {
                    source = match v.trim() {
                        "published" => CurveSource::Published,
                        "model" => CurveSource::Model,
                        "measured" => CurveSource::Measured,
                        other => {
                            return Err(InversionError::Csv {
                                line: line_no,
                                msg: format!("unknown source '{other}'"),
                            })
                        }
                    };
                }
                continue;
            }
            if !seen_header && line.starts_with("thickness_mm") {
                seen_header = true;
                continue;
            }
            let mut cols = line.split(',');
            let t: f64 = cols
                .next()
                .ok_or(InversionError::Csv {
                    line: line_no,
                    msg: "missing thickness column".into(),
                })?
                .trim()
                .parse()
                .map_err(|e| InversionError::Csv {
                    line: line_no,
                    msg: format!("bad thickness: {e}"),
                })?;
            let v: f64 = cols
                .next()
                .ok_or(InversionError::Csv {
                    line: line_no,
                    msg: "missing observable column".into(),
                })?
                .trim()
                .parse()
                .map_err(|e| InversionError::Csv {
                    line: line_no,
                    msg: format!("bad observable: {e}"),
                })?;
            nodes.push((t, v));
        }
        let kind = match kind_str.as_deref() {
            Some("frequency_ghz") | None => ObservableKind::FrequencyGhz,
            Some("magnitude_db_at_f0") => ObservableKind::MagnitudeDbAtF0 {
                f0_ghz: f0.ok_or(InversionError::Csv {
                    line: 1,
                    msg: "magnitude curve missing f0_ghz metadata".into(),
                })?,
            },
            Some(other) => {
                return Err(InversionError::Csv {
                    line: 1,
                    msg: format!("unknown kind '{other}'"),
                })
            }
        };
        Self::new(kind, nodes, source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateStatus {
    InRange,
    BelowRange,
    Saturated,
    Ambiguous,
}

impl std::fmt::Display for EstimateStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimateStatus::InRange => write!(f, "in-range"),
            EstimateStatus::BelowRange => write!(f, "below-range"),
            EstimateStatus::Saturated => write!(f, "saturated"),
            EstimateStatus::Ambiguous => write!(f, "ambiguous"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessEstimate {
    pub thickness_mm: f64,
    /// Half-width, mm.
    pub uncertainty_mm: f64,
    pub status: EstimateStatus,
    pub sensor_id: Option<String>,
}

/// Build a curve from raw points, validating strict monotonicity.
pub fn build_calibration(
    points: Vec<(f64, f64)>,
    kind: ObservableKind,
    source: CurveSource,
) -> Result<CalibrationCurve, InversionError> {
    CalibrationCurve::new(kind, points, source)
}

/// Invert a measured dip frequency through a frequency calibration curve.
///
/// Uncertainty is `f_resolution / |local slope|`; frequencies above the
/// onset map to below-range and below the thickest node to saturated.
pub fn invert_frequency(
    curve: &CalibrationCurve,
    f_meas_ghz: f64,
    f_resolution_ghz: f64,
) -> Result<ThicknessEstimate, InversionError> {
    match curve.kind {
        ObservableKind::FrequencyGhz => Ok(curve.invert_observable(f_meas_ghz, f_resolution_ghz)),
        ObservableKind::MagnitudeDbAtF0 { f0_ghz } => Err(InversionError::KindMismatch {
            expected: "frequency_ghz".into(),
            got: format!("magnitude_db_at_f0 (f0 = {f0_ghz} GHz)"),
        }),
    }
}

/// Invert a fixed-frequency |S11| reading through a magnitude curve.
pub fn invert_magnitude(
    curve: &CalibrationCurve,
    s11_db: f64,
) -> Result<ThicknessEstimate, InversionError> {
    invert_magnitude_with_resolution(curve, s11_db, DEFAULT_DB_RESOLUTION)
}

pub fn invert_magnitude_with_resolution(
    curve: &CalibrationCurve,
    s11_db: f64,
    db_resolution: f64,
) -> Result<ThicknessEstimate, InversionError> {
    match curve.kind {
        ObservableKind::MagnitudeDbAtF0 { .. } => {
            Ok(curve.invert_observable(s11_db, db_resolution))
        }
        ObservableKind::FrequencyGhz => Err(InversionError::KindMismatch {
            expected: "magnitude_db_at_f0".into(),
            got: "frequency_ghz".into(),
        }),
    }
}

/// Thickness span a sensor is trusted over, mm.
pub type SensorRanges = BTreeMap<String, (f64, f64)>;

/// AR1 covers thin deposits, AR2 thick ones.
pub fn default_sensor_ranges() -> SensorRanges {
    let mut m = BTreeMap::new();
    m.insert("AR1".to_string(), (0.0, 7.0));
    m.insert("AR2".to_string(), (7.0, 12.0));
    m
}

/// Deterministic, permutation-invariant fusion of per-sensor estimates.
///
/// Preference order: in-range estimates whose sensor range contains the
/// value (smallest uncertainty wins), then any in-range estimate, then the
/// saturated estimate from the sensor with the highest range, then whatever
/// remains. Equal scores break ties by sensor id.
pub fn fuse(
    estimates: &[ThicknessEstimate],
    sensor_ranges: &SensorRanges,
) -> Result<ThicknessEstimate, InversionError> {
    if estimates.is_empty() {
        return Err(InversionError::EmptyInput);
    }
    let range_of = |e: &ThicknessEstimate| -> Option<(f64, f64)> {
        e.sensor_id
            .as_ref()
            .and_then(|id| sensor_ranges.get(id))
            .copied()
    };
    let in_own_range = |e: &ThicknessEstimate| -> bool {
        match range_of(e) {
            Some((lo, hi)) => e.thickness_mm >= lo && e.thickness_mm <= hi,
            None => true,
        }
    };
    let sid = |e: &ThicknessEstimate| e.sensor_id.clone().unwrap_or_default();

    let mut preferred: Vec<&ThicknessEstimate> = estimates
        .iter()
        .filter(|e| e.status == EstimateStatus::InRange && in_own_range(e))
        .collect();
    if preferred.is_empty() {
        preferred = estimates
            .iter()
            .filter(|e| e.status == EstimateStatus::InRange)
            .collect();
    }
    if !preferred.is_empty() {
        preferred.sort_by(|a, b| {
            a.uncertainty_mm
                .partial_cmp(&b.uncertainty_mm)
                .unwrap()
                .then_with(|| sid(a).cmp(&sid(b)))
        });
        let best = preferred[0].clone();
        // Two trusted sensors disagreeing beyond their combined uncertainty
        // is reported, not averaged away.
        if preferred.len() > 1 {
            let other = preferred[1];
            if (best.thickness_mm - other.thickness_mm).abs()
                > best.uncertainty_mm + other.uncertainty_mm
            {
                return Ok(ThicknessEstimate {
                    status: EstimateStatus::Ambiguous,
                    ..best
                });
            }
        }
        return Ok(best);
    }
    let mut saturated: Vec<&ThicknessEstimate> = estimates
        .iter()
        .filter(|e| e.status == EstimateStatus::Saturated)
        .collect();
    if !saturated.is_empty() {
        saturated.sort_by(|a, b| {
            let ha = range_of(a).map(|r| r.1).unwrap_or(f64::NEG_INFINITY);
            let hb = range_of(b).map(|r| r.1).unwrap_or(f64::NEG_INFINITY);
            hb.partial_cmp(&ha).unwrap().then_with(|| sid(a).cmp(&sid(b)))
        });
        return Ok(saturated[0].clone());
    }
    let mut rest: Vec<&ThicknessEstimate> = estimates.iter().collect();
    rest.sort_by(|a, b| {
        let la = range_of(a).map(|r| r.0).unwrap_or(f64::INFINITY);
        let lb = range_of(b).map(|r| r.0).unwrap_or(f64::INFINITY);
        la.partial_cmp(&lb).unwrap().then_with(|| sid(a).cmp(&sid(b)))
    });
    Ok(rest[0].clone())
}

/// Built-in AR1 curve: 10.15 GHz onset, 0.5 GHz per 2 mm, 8.30 GHz at 7 mm.
pub fn ar1_default_curve() -> CalibrationCurve {
    CalibrationCurve::new(
        ObservableKind::FrequencyGhz,
        vec![
            (0.0, 10.15),
            (2.0, 9.65),
            (4.0, 9.15),
            (6.0, 8.65),
            (7.0, 8.30),
        ],
        CurveSource::Published,
    )
    .expect("ar1 default curve is monotone")
}

/// Built-in AR2 curve covering 8-12 mm.
pub fn ar2_default_curve() -> CalibrationCurve {
    CalibrationCurve::new(
        ObservableKind::FrequencyGhz,
        vec![(8.0, 9.7), (12.0, 8.7)],
        CurveSource::Published,
    )
    .expect("ar2 default curve is monotone")
}
