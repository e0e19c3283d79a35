//! Desk-scale 3-D full-wave solver: Yee scheme with CPML absorbing
//! boundaries and a lumped resistive-voltage-source port, computing the S11
//! trace of the coax-fed patch under uniform or wavy sulfur superstrates.

pub mod engine;
pub mod grid;

pub use engine::{Engine, EngineConfig, SoftSource};
pub use grid::{FieldComponent, GridBuilder, Port, YeeGrid};

use crate::scene::SceneConfig;
use crate::sparams::FrequencyTrace;
use crate::stackup::{LayerStack, PatchGeometry};
use crate::{C0, C0_MM_GHZ};
use num_complex::Complex64;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FdtdError {
    #[error("fdtd configuration: {0}")]
    Config(String),
    #[error("field divergence at step {step}: max |E| = {max_field:.3e} V/m")]
    Instability { step: usize, max_field: f64 },
    #[error("frequency {f_ghz} GHz outside the excited band [{lo} GHz, {hi} GHz]")]
    OutOfBand { f_ghz: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Trace(#[from] crate::sparams::SparamError),
}

/// Gaussian-modulated sinusoid excitation. The bandwidth is the full width
/// at which the pulse spectrum is 20 dB below its center value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulse {
    pub f0_ghz: f64,
    pub bandwidth_ghz: f64,
}

impl GaussianPulse {
    /// Envelope time constant, seconds.
    pub fn tau_s(&self) -> f64 {
        0.9659 / (self.bandwidth_ghz * 1e9)
    }

    /// Pulse delay, seconds.
    pub fn t0_s(&self) -> f64 {
        4.5 * self.tau_s()
    }

    pub fn band_ghz(&self) -> (f64, f64) {
        (
            self.f0_ghz - self.bandwidth_ghz / 2.0,
            self.f0_ghz + self.bandwidth_ghz / 2.0,
        )
    }

    pub fn sample(&self, t_s: f64) -> f64 {
        let u = (t_s - self.t0_s()) / self.tau_s();
        (2.0 * std::f64::consts::PI * self.f0_ghz * 1e9 * (t_s - self.t0_s())).cos()
            * (-u * u).exp()
    }
}

/// Superstrate height profile over the deposit footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SuperstrateProfile {
    Uniform {
        t_mm: f64,
    },
    /// Raised-cosine corrugation along the resonant axis:
    /// h(x) = t_max − amplitude·(1 + cos(2πx/period))/2.
    Wavy {
        t_max_mm: f64,
        amplitude_mm: f64,
        period_mm: f64,
    },
}

impl SuperstrateProfile {
    pub fn max_thickness_mm(&self) -> f64 {
        match *self {
            SuperstrateProfile::Uniform { t_mm } => t_mm,
            SuperstrateProfile::Wavy { t_max_mm, .. } => t_max_mm,
        }
    }

    /// Height at coordinate `x_mm` measured from the deposit edge.
    pub fn height_mm(&self, x_mm: f64) -> f64 {
        match *self {
            SuperstrateProfile::Uniform { t_mm } => t_mm,
            SuperstrateProfile::Wavy {
                t_max_mm,
                amplitude_mm,
                period_mm,
            } => {
                let c = (2.0 * std::f64::consts::PI * x_mm / period_mm).cos();
                t_max_mm - amplitude_mm * (1.0 + c) / 2.0
            }
        }
    }
}

/// Patch + stackup + deposit profile + finite ground, the input to the
/// full-wave solver.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchScene {
    pub geom: PatchGeometry,
    pub stack: LayerStack,
    pub profile: SuperstrateProfile,
    /// Finite ground rectangle (width dir, resonant dir), mm.
    pub ground_plane_mm: (f64, f64),
    /// Ambient margin around the structure, mm.
    pub margins_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub scene: PatchScene,
    pub cell_mm: f64,
    pub pml_layers: usize,
    pub time_steps: usize,
    pub excitation: GaussianPulse,
    pub port_resistance: f64,
}

impl SimulationSpec {
    /// Solver defaults from a scene config document.
    pub fn from_config(cfg: &SceneConfig) -> Self {
        cfg.simulation_spec()
    }

    fn validate(&self) -> Result<(), FdtdError> {
        if self.cell_mm <= 0.0 {
            return Err(FdtdError::Config("cell size must be positive".into()));
        }
        if self.pml_layers < 6 {
            return Err(FdtdError::Config(format!(
                "{} PML layers is below the 6-layer minimum",
                self.pml_layers
            )));
        }
        if self.port_resistance <= 0.0 {
            return Err(FdtdError::Config("port resistance must be positive".into()));
        }
        if let SuperstrateProfile::Wavy {
            t_max_mm,
            amplitude_mm,
            ..
        } = self.scene.profile
        {
            if amplitude_mm < 0.0 || amplitude_mm > t_max_mm {
                return Err(FdtdError::Config(format!(
                    "wavy amplitude {amplitude_mm} mm outside [0, t_max = {t_max_mm} mm]"
                )));
            }
        }
        Ok(())
    }
}

/// Port voltage/current record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub port_voltage: Vec<f64>,
    pub port_current: Vec<f64>,
    pub dt_s: f64,
    /// False when the run hit the step cap before port energy fell below
    /// 1e-5 of its peak.
    pub decayed: bool,
    pub excitation: GaussianPulse,
}

/// CFL-stable time step: dt = safety / (c·√(1/Δx² + 1/Δy² + 1/Δz²)).
pub fn courant_dt(dx_m: f64, dy_m: f64, dz_m: f64, safety: f64) -> f64 {
    let inv =
        (1.0 / (dx_m * dx_m) + 1.0 / (dy_m * dy_m) + 1.0 / (dz_m * dz_m)).sqrt();
    safety / (C0 * inv)
}

/// Voxelize a simulation spec into a Yee grid: PEC ground and patch sheets,
/// layered dielectrics, the staircased superstrate profile, a PEC feed wire
/// and the lumped port edge, with PML on all six faces.
pub fn build_scene(spec: &SimulationSpec) -> Result<YeeGrid, FdtdError> {
    spec.validate()?;
    let scene = &spec.scene;
    scene
        .geom
        .validate()
        .map_err(|e| FdtdError::Config(e.to_string()))?;
    let cell = spec.cell_mm;
    let h_mm = scene
        .stack
        .substrate_height_mm()
        .map_err(|e| FdtdError::Config(e.to_string()))?;

    // Resolution rules.
    let hc = (h_mm / cell).round() as usize;
    if hc < 2 || (h_mm / cell - (h_mm / cell).round()).abs() > 0.25 {
        if hc < 2 {
            return Err(FdtdError::Config(format!(
                "cell {cell} mm resolves the {h_mm} mm substrate with {hc} cells; need >= 2"
            )));
        }
    }
    let eps_max = scene
        .stack
        .substrate
        .relative_permittivity
        .max(
            scene
                .stack
                .superstrate
                .map(|s| s.relative_permittivity)
                .unwrap_or(1.0),
        )
        .max(scene.stack.ambient.relative_permittivity);
    let f_max = spec.excitation.band_ghz().1;
    let lambda_min_mm = C0_MM_GHZ / (f_max * eps_max.sqrt());
    if lambda_min_mm / cell < 20.0 {
        return Err(FdtdError::Config(format!(
            "cell {cell} mm gives {:.1} cells per shortest wavelength ({lambda_min_mm:.2} mm); need >= 20",
            lambda_min_mm / cell
        )));
    }
    let lambda_air_mm = C0_MM_GHZ / f_max;
    if scene.margins_mm + 1e-9 < lambda_air_mm / 4.0 {
        return Err(FdtdError::Config(format!(
            "margins {} mm below a quarter wavelength ({:.2} mm) at {f_max} GHz",
            scene.margins_mm,
            lambda_air_mm / 4.0
        )));
    }

    let cells = |len_mm: f64| (len_mm / cell).round() as usize;
    let px = cells(scene.geom.width_mm);
    let py = cells(scene.geom.resonant_length_mm);
    let gpx = cells(scene.ground_plane_mm.0).max(px);
    let gpy = cells(scene.ground_plane_mm.1).max(py);
    let margin = (scene.margins_mm / cell).ceil() as usize;
    let npml = spec.pml_layers;
    let below = 4;
    let t_max_c = (scene.profile.max_thickness_mm() / cell).ceil() as usize;

    let nx = gpx + 2 * (margin + npml);
    let ny = gpy + 2 * (margin + npml);
    let k_gnd = npml + below;
    let k_patch = k_gnd + hc;
    let nz = k_patch + t_max_c + margin + npml;

    let mut b = GridBuilder::new(nx, ny, nz, cell * 1e-3, npml);

    // Ground-rect footprint in cells / nodes, centered.
    let gx0 = (nx - gpx) / 2;
    let gy0 = (ny - gpy) / 2;
    let f0_hz = spec.excitation.f0_ghz * 1e9;
    let sub = scene.stack.substrate;
    b.fill_cells(
        gx0..gx0 + gpx,
        gy0..gy0 + gpy,
        k_gnd..k_patch,
        sub.relative_permittivity,
        loss_sigma(sub.relative_permittivity, sub.loss_tangent, f0_hz),
    );
    if scene.stack.ambient.relative_permittivity != 1.0 {
        // Ambient above the structure (everything not otherwise assigned
        // stays at the builder's default, which is vacuum).
        b.fill_default(scene.stack.ambient.relative_permittivity, 0.0);
    }

    // Superstrate columns, staircased along the resonant axis.
    if let Some(sup) = scene.stack.superstrate {
        if scene.profile.max_thickness_mm() > 0.0 && sup.relative_permittivity >= 1.0 {
            let sigma = loss_sigma(sup.relative_permittivity, sup.loss_tangent, f0_hz);
            for jy in gy0..gy0 + gpy {
                let x_mm = (jy - gy0) as f64 * cell + cell / 2.0;
                let hcol = (scene.profile.height_mm(x_mm) / cell).round() as usize;
                if hcol > 0 {
                    b.fill_cells(
                        gx0..gx0 + gpx,
                        jy..jy + 1,
                        k_patch..k_patch + hcol,
                        sup.relative_permittivity,
                        sigma,
                    );
                }
            }
        }
    }

    // PEC sheets: ground over the ground rect, patch over its footprint.
    b.pec_sheet_z(k_gnd, gx0..=gx0 + gpx, gy0..=gy0 + gpy);
    let ix0 = (nx - px) / 2;
    let jy0 = (ny - py) / 2;
    b.pec_sheet_z(k_patch, ix0..=ix0 + px, jy0..=jy0 + py);

    // Probe feed: port edge on the ground, PEC wire up to the patch.
    let i_f = nx / 2;
    let j_f = ((ny as f64) / 2.0 + scene.geom.feed_offset_mm / cell).round() as usize;
    if j_f <= jy0 || j_f >= jy0 + py {
        return Err(FdtdError::Config(format!(
            "feed offset {} mm falls outside the patch footprint",
            scene.geom.feed_offset_mm
        )));
    }
    for k in k_gnd + 1..k_patch {
        b.pec_edge(FieldComponent::Ez, i_f, j_f, k);
    }
    b.set_port(i_f, j_f, k_gnd, spec.port_resistance);
    b.set_layout(grid::SceneLayout {
        k_ground: k_gnd,
        k_patch,
        deposit_x0: gx0,
        deposit_nx: gpx,
        deposit_y0: gy0,
        deposit_ny: gpy,
        deposit_nz: t_max_c,
    });

    Ok(b.build())
}

fn loss_sigma(eps_r: f64, tan_d: f64, f_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_hz * crate::EPS0 * eps_r * tan_d
}

/// Run the full simulation for a spec: build, step, record the port.
pub fn run(spec: &SimulationSpec) -> Result<TimeSeries, FdtdError> {
    let grid = build_scene(spec)?;
    let mut engine = Engine::new(&grid, EngineConfig::default())?;
    engine.run_port(&spec.excitation, spec.time_steps)
}

/// Default S11 frequency grid for a pulse: 0.01 GHz spacing over the central
/// 90% of the excited band.
pub fn default_freq_grid(pulse: &GaussianPulse) -> Vec<f64> {
    let (lo, hi) = pulse.band_ghz();
    let lo = lo + 0.05 * pulse.bandwidth_ghz;
    let hi = hi - 0.05 * pulse.bandwidth_ghz;
    let n = ((hi - lo) / 0.01).round() as usize;
    (0..=n).map(|i| lo + 0.01 * i as f64).collect()
}

/// S11 from the recorded port waves: a(t), b(t) from V, I and the reference
/// resistance, transformed at the requested frequencies.
pub fn port_s11(
    series: &TimeSeries,
    reference_resistance: f64,
    freq_grid_ghz: &[f64],
) -> Result<FrequencyTrace, FdtdError> {
    let (lo, hi) = series.excitation.band_ghz();
    for &f in freq_grid_ghz {
        if f < lo || f > hi {
            return Err(FdtdError::OutOfBand { f_ghz: f, lo, hi });
        }
    }
    let sqrt_r = reference_resistance.sqrt();
    let n = series.port_voltage.len();
    let mut values = Vec::with_capacity(freq_grid_ghz.len());
    for &f in freq_grid_ghz {
        let w = -2.0 * std::f64::consts::PI * f * 1e9 * series.dt_s;
        let mut va = Complex64::new(0.0, 0.0);
        let mut ia = Complex64::new(0.0, 0.0);
        // Goertzel-style recurrence would be faster; the direct sum is
        // clearer and cheap at this scale.
        for i in 0..n {
            let ph = Complex64::from_polar(1.0, w * i as f64);
            va += series.port_voltage[i] * ph;
            ia += series.port_current[i] * ph;
        }
        let a = (va + reference_resistance * ia) / (2.0 * sqrt_r);
        let b = (va - reference_resistance * ia) / (2.0 * sqrt_r);
        values.push(b / a);
    }
    FrequencyTrace::new(freq_grid_ghz.to_vec(), values).map_err(FdtdError::from)
}

/// One independent simulation per thickness; results ordered by thickness
/// and bit-identical for any parallelism level.
pub fn sweep_thickness(
    spec_template: &SimulationSpec,
    thicknesses_mm: &[f64],
    parallelism: usize,
) -> Vec<(f64, Result<FrequencyTrace, FdtdError>)> {
    let jobs = parallelism.max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<(f64, Result<FrequencyTrace, FdtdError>)>>> =
        Mutex::new((0..thicknesses_mm.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(thicknesses_mm.len().max(1)) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= thicknesses_mm.len() {
                    break;
                }
                let t = thicknesses_mm[idx];
                let mut spec = spec_template.clone();
                spec.scene.profile = match spec.scene.profile {
                    SuperstrateProfile::Uniform { .. } => SuperstrateProfile::Uniform { t_mm: t },
                    SuperstrateProfile::Wavy {
                        amplitude_mm,
                        period_mm,
                        t_max_mm,
                    } => SuperstrateProfile::Wavy {
                        t_max_mm: t,
                        amplitude_mm: if t_max_mm > 0.0 {
                            amplitude_mm * t / t_max_mm
                        } else {
                            t / 2.0
                        },
                        period_mm,
                    },
                };
                spec.scene.stack = spec.scene.stack.with_superstrate(
                    spec.scene
                        .stack
                        .superstrate
                        .map(|s| s.relative_permittivity)
                        .unwrap_or(crate::stackup::SULFUR_EPS_R),
                    spec.scene
                        .stack
                        .superstrate
                        .map(|s| s.loss_tangent)
                        .unwrap_or(crate::stackup::SULFUR_TAN_D),
                    t,
                );
                let result = run(&spec)
                    .and_then(|ts| port_s11(&ts, spec.port_resistance, &default_freq_grid(&spec.excitation)));
                slots.lock().unwrap()[idx] = Some((t, result));
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("all sweep slots filled"))
        .collect()
}
