//! One-port S-parameter traces, Touchstone v1 I/O, and trace analysis:
//! resonance-dip extraction, matching bandwidth, phase unwrapping and
//! magnitude sampling.

use chrono::{DateTime, Utc};
use num_complex::Complex64;
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Magnitudes may exceed unity only by numerical noise.
const MAX_LINEAR_MAG: f64 = 1.05;
/// Floor for dB conversion so a perfect zero does not poison interpolation.
const DB_FLOOR: f64 = -200.0;

#[derive(Debug, Error)]
pub enum SparamError {
    #[error("touchstone parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("trace has {got} points, need at least {need}")]
    TooShort { need: usize, got: usize },
    #[error("resonance dip sits on the sweep boundary at {f_ghz} GHz; resonance lies outside the sweep")]
    EdgeDip { f_ghz: f64 },
    #[error("frequency {f_ghz} GHz outside trace span [{lo} GHz, {hi} GHz]")]
    OutOfSpan { f_ghz: f64, lo: f64, hi: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Storage format of a Touchstone data row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TouchstoneFormat {
    /// real, imaginary
    Ri,
    /// linear magnitude, angle in degrees
    Ma,
    /// 20·log10 magnitude in dB, angle in degrees
    Db,
}

impl fmt::Display for TouchstoneFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TouchstoneFormat::Ri => write!(f, "RI"),
            TouchstoneFormat::Ma => write!(f, "MA"),
            TouchstoneFormat::Db => write!(f, "DB"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMetadata {
    pub sensor_id: Option<String>,
    pub timestamp: Option<DateTime<Utc>>,
}

/// One-port complex reflection coefficient sampled over frequency.
///
/// Values are stored linear (not dB); frequencies in GHz, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTrace {
    frequencies_ghz: Vec<f64>,
    values: Vec<Complex64>,
    pub metadata: TraceMetadata,
}

impl FrequencyTrace {
    pub fn new(frequencies_ghz: Vec<f64>, values: Vec<Complex64>) -> Result<Self, SparamError> {
        if frequencies_ghz.len() != values.len() {
            return Err(SparamError::InvalidTrace(format!(
                "{} frequencies vs {} values",
                frequencies_ghz.len(),
                values.len()
            )));
        }
        if frequencies_ghz.len() < 2 {
            return Err(SparamError::TooShort {
                need: 2,
                got: frequencies_ghz.len(),
            });
        }
        for w in frequencies_ghz.windows(2) {
            if !(w[1] > w[0]) {
                return Err(SparamError::InvalidTrace(format!(
                    "frequencies not strictly increasing at {} GHz",
                    w[0]
                )));
            }
        }
        for (f, v) in frequencies_ghz.iter().zip(&values) {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(SparamError::InvalidTrace(format!(
                    "non-finite value at {f} GHz"
                )));
            }
            if v.norm() > MAX_LINEAR_MAG {
                return Err(SparamError::InvalidTrace(format!(
                    "|S11| = {:.4} at {f} GHz exceeds passivity bound {MAX_LINEAR_MAG}",
                    v.norm()
                )));
            }
        }
        Ok(Self {
            frequencies_ghz,
            values,
            metadata: TraceMetadata::default(),
        })
    }

    pub fn frequencies_ghz(&self) -> &[f64] {
        &self.frequencies_ghz
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.frequencies_ghz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_ghz.is_empty()
    }

    pub fn span_ghz(&self) -> (f64, f64) {
        (
            self.frequencies_ghz[0],
            *self.frequencies_ghz.last().unwrap(),
        )
    }

    /// |S11| in dB at sample `i`.
    pub fn mag_db(&self, i: usize) -> f64 {
        lin_to_db(self.values[i].norm())
    }

    /// CSV export with columns freq_ghz, re, im, mag_db, phase_deg.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_ghz,re,im,mag_db,phase_deg\n");
        for (f, v) in self.frequencies_ghz.iter().zip(&self.values) {
            out.push_str(&format!(
                "{:.9},{:.9e},{:.9e},{:.6},{:.6}\n",
                f,
                v.re,
                v.im,
                lin_to_db(v.norm()),
                v.arg().to_degrees()
            ));
        }
        out
    }
}

pub fn lin_to_db(mag: f64) -> f64 {
    if mag <= 0.0 {
        DB_FLOOR
    } else {
        (20.0 * mag.log10()).max(DB_FLOOR)
    }
}

/// Location and shape of the S11 resonance dip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipResult {
    pub f_res_ghz: f64,
    /// dB at the dip; never positive.
    pub depth_db: f64,
    /// Height of the lower of the two barriers flanking the dip, in dB.
    pub prominence_db: f64,
}

/// Parse a 1-port Touchstone v1 document.
///
/// Accepts the option line `# <unit> S <RI|MA|DB> R <r>`, `!` comments and
/// blank lines; frequencies are converted to GHz and values to linear complex
/// regardless of the stored format.
pub fn read_touchstone(text: &str) -> Result<FrequencyTrace, SparamError> {
    let mut unit_scale: Option<f64> = None;
    let mut format = TouchstoneFormat::Ri;
    let mut freqs = Vec::new();
    let mut vals = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('!') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if unit_scale.is_some() {
                return Err(SparamError::Parse {
                    line: line_no,
                    msg: "duplicate option line".into(),
                });
            }
            let toks: Vec<&str> = rest.split_whitespace().collect();
            // Touchstone defaults: GHz S MA R 50; tokens may appear in any
            // order but the common fixed layout is what we emit and expect.
            let mut scale = 1.0;
            let mut fmt_tok = TouchstoneFormat::Ma;
            let mut param_ok = true;
            let mut i = 0;
            while i < toks.len() {
                match toks[i].to_ascii_uppercase().as_str() {
                    "HZ" => scale = 1e-9,
                    "KHZ" => scale = 1e-6,
                    "MHZ" => scale = 1e-3,
                    "GHZ" => scale = 1.0,
                    "S" => {}
                    "Y" | "Z" | "G" | "H" => param_ok = false,
                    "RI" => fmt_tok = TouchstoneFormat::Ri,
                    "MA" => fmt_tok = TouchstoneFormat::Ma,
                    "DB" => fmt_tok = TouchstoneFormat::Db,
                    "R" => {
                        i += 1;
                        if i >= toks.len() || toks[i].parse::<f64>().is_err() {
                            return Err(SparamError::Parse {
                                line: line_no,
                                msg: "option line: R must be followed by a resistance".into(),
                            });
                        }
                    }
                    other => {
                        return Err(SparamError::Parse {
                            line: line_no,
                            msg: format!("option line: unrecognized token '{other}'"),
                        });
                    }
                }
                i += 1;
            }
            if !param_ok {
                return Err(SparamError::Parse {
                    line: line_no,
                    msg: "only S-parameter files are supported".into(),
                });
            }
            unit_scale = Some(scale);
            format = fmt_tok;
            continue;
        }
        let scale = unit_scale.ok_or(SparamError::Parse {
            line: line_no,
            msg: "data before option line".into(),
        })?;
        let nums: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let nums = nums.map_err(|e| SparamError::Parse {
            line: line_no,
            msg: format!("bad number: {e}"),
        })?;
        if nums.len() != 3 {
            return Err(SparamError::Parse {
                line: line_no,
                msg: format!(
                    "expected 3 columns (freq + one S11 pair), got {}{}",
                    nums.len(),
                    if nums.len() == 9 || nums.len() == 5 {
                        "; multi-port files are not supported"
                    } else {
                        ""
                    }
                ),
            });
        }
        let f = nums[0] * scale;
        if let Some(last) = freqs.last() {
            if f <= *last {
                return Err(SparamError::Parse {
                    line: line_no,
                    msg: format!("non-monotone frequency {f} GHz"),
                });
            }
        }
        let v = match format {
            TouchstoneFormat::Ri => Complex64::new(nums[1], nums[2]),
            TouchstoneFormat::Ma => Complex64::from_polar(nums[1], nums[2].to_radians()),
            TouchstoneFormat::Db => {
                Complex64::from_polar(10f64.powf(nums[1] / 20.0), nums[2].to_radians())
            }
        };
        freqs.push(f);
        vals.push(v);
    }
    if unit_scale.is_none() {
        return Err(SparamError::Parse {
            line: 1,
            msg: "missing option line".into(),
        });
    }
    if freqs.is_empty() {
        return Err(SparamError::Parse {
            line: text.lines().count().max(1),
            msg: "no data rows".into(),
        });
    }
    if freqs.len() == 1 {
        // A single point is representable but useless downstream; keep it by
        // relaxing the trace minimum for parser output.
        let mut t = FrequencyTrace {
            frequencies_ghz: freqs,
            values: vals,
            metadata: TraceMetadata::default(),
        };
        validate_mags(&mut t)?;
        return Ok(t);
    }
    FrequencyTrace::new(freqs, vals)
}

fn validate_mags(t: &mut FrequencyTrace) -> Result<(), SparamError> {
    for (f, v) in t.frequencies_ghz.iter().zip(&t.values) {
        if v.norm() > MAX_LINEAR_MAG {
            return Err(SparamError::InvalidTrace(format!(
                "|S11| = {:.4} at {f} GHz exceeds passivity bound {MAX_LINEAR_MAG}",
                v.norm()
            )));
        }
    }
    Ok(())
}

pub fn read_touchstone_file(path: &Path) -> Result<FrequencyTrace, SparamError> {
    let text = std::fs::read_to_string(path)?;
    read_touchstone(&text)
}

/// Serialize as 1-port Touchstone v1 with 9 significant digits.
pub fn write_touchstone(trace: &FrequencyTrace, format: TouchstoneFormat) -> String {
    let mut out = String::new();
    out.push_str(&format!("# GHz S {format} R 50\n"));
    for (f, v) in trace.frequencies_ghz.iter().zip(&trace.values) {
        let (a, b) = match format {
            TouchstoneFormat::Ri => (v.re, v.im),
            TouchstoneFormat::Ma => (v.norm(), v.arg().to_degrees()),
            TouchstoneFormat::Db => (lin_to_db(v.norm()), v.arg().to_degrees()),
        };
        out.push_str(&format!("{f:.9} {a:.9e} {b:.9e}\n"));
    }
    out
}

/// Locate the global |S11| minimum in dB and refine it by parabolic
/// interpolation through the three points around the discrete minimum.
pub fn find_dip(trace: &FrequencyTrace) -> Result<DipResult, SparamError> {
    if trace.len() < 5 {
        return Err(SparamError::TooShort {
            need: 5,
            got: trace.len(),
        });
    }
    let db: Vec<f64> = (0..trace.len()).map(|i| trace.mag_db(i)).collect();
    let (imin, _) = db
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if imin == 0 || imin == trace.len() - 1 {
        return Err(SparamError::EdgeDip {
            f_ghz: trace.frequencies_ghz[imin],
        });
    }
    let (f_res, depth) = parabolic_vertex(
        trace.frequencies_ghz[imin - 1],
        trace.frequencies_ghz[imin],
        trace.frequencies_ghz[imin + 1],
        db[imin - 1],
        db[imin],
        db[imin + 1],
    );
    let max_left = db[..imin].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max_right = db[imin + 1..]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DipResult {
        f_res_ghz: f_res,
        depth_db: depth.min(0.0),
        prominence_db: max_left.min(max_right) - depth,
    })
}

/// Vertex of the parabola through three points; falls back to the middle
/// point when they are collinear.
fn parabolic_vertex(x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64) -> (f64, f64) {
    let d1 = (y1 - y0) / (x1 - x0);
    let d2 = (y2 - y1) / (x2 - x1);
    let curv = (d2 - d1) / (x2 - x0);
    if curv.abs() < 1e-300 {
        return (x1, y1);
    }
    // Vertex of the Newton-form quadratic through the three samples.
    let xv = (x0 + x1) / 2.0 - d1 / (2.0 * curv);
    let yv = y0 + d1 * (xv - x0) + curv * (xv - x0) * (xv - x1);
    // Clamp inside the bracketing interval; the discrete minimum guarantees
    // the vertex should already be there.
    let xv = xv.clamp(x0, x2);
    (xv, yv)
}

/// Widest contiguous interval around the dip where |S11| in dB stays at or
/// below `threshold_db`, with linearly interpolated edges. `None` when the
/// dip never reaches the threshold.
pub fn bandwidth(trace: &FrequencyTrace, threshold_db: f64) -> Option<(f64, f64)> {
    let db: Vec<f64> = (0..trace.len()).map(|i| trace.mag_db(i)).collect();
    let (imin, &dmin) = db
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
    if dmin > threshold_db {
        return None;
    }
    let f = trace.frequencies_ghz();
    let mut lo = f[0];
    let mut i = imin;
    while i > 0 {
        if db[i - 1] > threshold_db {
            let frac = (threshold_db - db[i]) / (db[i - 1] - db[i]);
            lo = f[i] + frac * (f[i - 1] - f[i]);
            break;
        }
        i -= 1;
    }
    let mut hi = *f.last().unwrap();
    let mut i = imin;
    while i + 1 < db.len() {
        if db[i + 1] > threshold_db {
            let frac = (threshold_db - db[i]) / (db[i + 1] - db[i]);
            hi = f[i] + frac * (f[i + 1] - f[i]);
            break;
        }
        i += 1;
    }
    Some((lo, hi))
}

/// Unwrapped phase in radians: first point in (−π, π], successive
/// differences folded into (−π, π].
///
/// Hazard: a sweep too sparse for the true adjacent-point phase step to stay
/// under π unwraps silently wrong.
pub fn unwrap_phase(trace: &FrequencyTrace) -> Vec<f64> {
    let mut out = Vec::with_capacity(trace.len());
    let mut prev = 0.0;
    for (i, v) in trace.values().iter().enumerate() {
        let ph = v.arg();
        if i == 0 {
            out.push(ph);
            prev = ph;
        } else {
            let mut d = ph - wrap_to_pi(prev);
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d <= -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            prev += d;
            out.push(prev);
        }
    }
    out
}

fn wrap_to_pi(x: f64) -> f64 {
    let mut y = x % (2.0 * std::f64::consts::PI);
    if y > std::f64::consts::PI {
        y -= 2.0 * std::f64::consts::PI;
    } else if y <= -std::f64::consts::PI {
        y += 2.0 * std::f64::consts::PI;
    }
    y
}

/// |S11| in dB at frequency `f_ghz`, linearly interpolated in dB between the
/// bracketing samples.
pub fn magnitude_at(trace: &FrequencyTrace, f_ghz: f64) -> Result<f64, SparamError> {
    let f = trace.frequencies_ghz();
    let (lo, hi) = trace.span_ghz();
    if f_ghz < lo || f_ghz > hi {
        return Err(SparamError::OutOfSpan { f_ghz, lo, hi });
    }
    let idx = match f.binary_search_by(|x| x.partial_cmp(&f_ghz).unwrap()) {
        Ok(i) => return Ok(trace.mag_db(i)),
        Err(i) => i,
    };
    let (i0, i1) = (idx - 1, idx);
    let frac = (f_ghz - f[i0]) / (f[i1] - f[i0]);
    Ok(trace.mag_db(i0) + frac * (trace.mag_db(i1) - trace.mag_db(i0)))
}
