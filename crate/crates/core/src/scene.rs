//! Shared JSON scene/configuration schema used by the analytic model, the
//! FDTD solver and the command-line tools. Unknown keys are rejected so a
//! typo never silently falls back to a default.

use crate::fdtd::{GaussianPulse, PatchScene, SimulationSpec, SuperstrateProfile};
use crate::stackup::{DielectricLayer, LayerStack, PatchGeometry, Thickness};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneConfigError {
    #[error("scene config: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("scene config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default = "GeometryConfig::reference")]
    pub geometry: GeometryConfig,
    #[serde(default = "StackConfig::reference")]
    pub stack: StackConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::reference(),
            stack: StackConfig::reference(),
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub resonant_length_mm: f64,
    pub width_mm: f64,
    #[serde(default)]
    pub feed_offset_mm: f64,
}

impl GeometryConfig {
    /// The 10 GHz sensing patch: 9.7 mm resonant length, 11.69 mm width.
    pub fn reference() -> Self {
        Self {
            resonant_length_mm: 9.7,
            width_mm: 11.69,
            feed_offset_mm: 2.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    pub substrate: SubstrateConfig,
    #[serde(default)]
    pub superstrate: Option<SuperstrateConfig>,
    #[serde(default)]
    pub ambient: AmbientConfig,
}

impl StackConfig {
    /// Rogers 5880 substrate under methane ambient.
    pub fn reference() -> Self {
        Self {
            substrate: SubstrateConfig {
                eps_r: 2.2,
                tan_d: 0.0009,
                h_mm: 0.508,
            },
            superstrate: None,
            ambient: AmbientConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SubstrateConfig {
    pub eps_r: f64,
    #[serde(default)]
    pub tan_d: f64,
    pub h_mm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SuperstrateConfig {
    pub eps_r: f64,
    #[serde(default = "default_sulfur_tan_d")]
    pub tan_d: f64,
    pub profile: ProfileConfig,
}

fn default_sulfur_tan_d() -> f64 {
    crate::stackup::SULFUR_TAN_D
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ProfileConfig {
    Uniform {
        t_mm: f64,
    },
    Wavy {
        t_mm: f64,
        #[serde(default)]
        amplitude_mm: Option<f64>,
        #[serde(default)]
        period_mm: Option<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AmbientConfig {
    pub eps_r: f64,
}

impl Default for AmbientConfig {
    fn default() -> Self {
        Self { eps_r: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_cell_mm")]
    pub cell_mm: f64,
    #[serde(default = "default_pml")]
    pub pml: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub pulse: PulseConfig,
    #[serde(default = "default_port_ohms")]
    pub port_ohms: f64,
    /// Ambient margin around the structure; default is a quarter wavelength
    /// at the top of the excited band.
    #[serde(default)]
    pub margins_mm: Option<f64>,
    /// Ground-plane skirt beyond the patch footprint on each side.
    #[serde(default = "default_ground_margin")]
    pub ground_margin_mm: f64,
}

fn default_cell_mm() -> f64 {
    0.254
}
fn default_pml() -> usize {
    10
}
fn default_steps() -> usize {
    20_000
}
fn default_port_ohms() -> f64 {
    50.0
}
fn default_ground_margin() -> f64 {
    3.0
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cell_mm: default_cell_mm(),
            pml: default_pml(),
            steps: default_steps(),
            pulse: PulseConfig::default(),
            port_ohms: default_port_ohms(),
            margins_mm: None,
            ground_margin_mm: default_ground_margin(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub f0_ghz: f64,
    pub bw_ghz: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            f0_ghz: 9.0,
            bw_ghz: 6.0,
        }
    }
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self, SceneConfigError> {
        let cfg: SceneConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene config serializes")
    }

    pub fn validate(&self) -> Result<(), SceneConfigError> {
        self.patch_geometry()
            .validate()
            .map_err(|e| SceneConfigError::Invalid(format!("geometry: {e}")))?;
        if self.stack.substrate.eps_r < 1.0 || self.stack.substrate.h_mm <= 0.0 {
            return Err(SceneConfigError::Invalid(
                "stack.substrate: eps_r must be >= 1 and h_mm > 0".into(),
            ));
        }
        if self.stack.ambient.eps_r < 1.0 {
            return Err(SceneConfigError::Invalid(
                "stack.ambient.eps_r must be >= 1".into(),
            ));
        }
        if let Some(s) = &self.stack.superstrate {
            if s.eps_r < 1.0 {
                return Err(SceneConfigError::Invalid(
                    "stack.superstrate.eps_r must be >= 1".into(),
                ));
            }
            match s.profile {
                ProfileConfig::Uniform { t_mm } if t_mm < 0.0 => {
                    return Err(SceneConfigError::Invalid(
                        "stack.superstrate.profile.t_mm must be >= 0".into(),
                    ));
                }
                ProfileConfig::Wavy {
                    t_mm,
                    amplitude_mm,
                    ..
                } => {
                    let amp = amplitude_mm.unwrap_or(t_mm / 2.0);
                    if amp < 0.0 || amp > t_mm {
                        return Err(SceneConfigError::Invalid(format!(
                            "stack.superstrate.profile: wavy amplitude {amp} mm must lie in [0, t_mm = {t_mm} mm]"
                        )));
                    }
                }
                _ => {}
            }
        }
        if self.solver.cell_mm <= 0.0 {
            return Err(SceneConfigError::Invalid(
                "solver.cell_mm must be > 0".into(),
            ));
        }
        if self.solver.pml < 6 {
            return Err(SceneConfigError::Invalid(format!(
                "solver.pml = {} is below the 6-layer minimum",
                self.solver.pml
            )));
        }
        if self.solver.port_ohms <= 0.0 {
            return Err(SceneConfigError::Invalid(
                "solver.port_ohms must be > 0".into(),
            ));
        }
        if self.solver.pulse.f0_ghz <= 0.0 || self.solver.pulse.bw_ghz <= 0.0 {
            return Err(SceneConfigError::Invalid(
                "solver.pulse: f0_ghz and bw_ghz must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn patch_geometry(&self) -> PatchGeometry {
        PatchGeometry {
            resonant_length_mm: self.geometry.resonant_length_mm,
            width_mm: self.geometry.width_mm,
            substrate_height_mm: self.stack.substrate.h_mm,
            feed_offset_mm: self.geometry.feed_offset_mm,
        }
    }

    pub fn layer_stack(&self) -> LayerStack {
        let superstrate = self.stack.superstrate.as_ref().and_then(|s| {
            let t = match s.profile {
                ProfileConfig::Uniform { t_mm } => t_mm,
                ProfileConfig::Wavy { t_mm, .. } => t_mm,
            };
            if t > 0.0 {
                Some(DielectricLayer {
                    relative_permittivity: s.eps_r,
                    loss_tangent: s.tan_d,
                    thickness: Thickness::Mm(t),
                })
            } else {
                None
            }
        });
        LayerStack {
            substrate: DielectricLayer {
                relative_permittivity: self.stack.substrate.eps_r,
                loss_tangent: self.stack.substrate.tan_d,
                thickness: Thickness::Mm(self.stack.substrate.h_mm),
            },
            superstrate,
            ambient: DielectricLayer {
                relative_permittivity: self.stack.ambient.eps_r,
                loss_tangent: 0.0,
                thickness: Thickness::SemiInfinite,
            },
        }
    }

    pub fn superstrate_profile(&self) -> SuperstrateProfile {
        match &self.stack.superstrate {
            None => SuperstrateProfile::Uniform { t_mm: 0.0 },
            Some(s) => match s.profile {
                ProfileConfig::Uniform { t_mm } => SuperstrateProfile::Uniform { t_mm },
                ProfileConfig::Wavy {
                    t_mm,
                    amplitude_mm,
                    period_mm,
                } => SuperstrateProfile::Wavy {
                    t_max_mm: t_mm,
                    amplitude_mm: amplitude_mm.unwrap_or(t_mm / 2.0),
                    period_mm: period_mm.unwrap_or(self.geometry.resonant_length_mm),
                },
            },
        }
    }

    pub fn patch_scene(&self) -> PatchScene {
        let geom = self.patch_geometry();
        let fmax = self.solver.pulse.f0_ghz + self.solver.pulse.bw_ghz / 2.0;
        let lambda_min_mm = crate::C0_MM_GHZ / fmax;
        PatchScene {
            geom,
            stack: self.layer_stack(),
            profile: self.superstrate_profile(),
            ground_plane_mm: (
                geom.width_mm + 2.0 * self.solver.ground_margin_mm,
                geom.resonant_length_mm + 2.0 * self.solver.ground_margin_mm,
            ),
            margins_mm: self.solver.margins_mm.unwrap_or(lambda_min_mm / 4.0),
        }
    }

    pub fn simulation_spec(&self) -> SimulationSpec {
        SimulationSpec {
            scene: self.patch_scene(),
            cell_mm: self.solver.cell_mm,
            pml_layers: self.solver.pml,
            time_steps: self.solver.steps,
            excitation: GaussianPulse {
                f0_ghz: self.solver.pulse.f0_ghz,
                bandwidth_ghz: self.solver.pulse.bw_ghz,
            },
            port_resistance: self.solver.port_ohms,
        }
    }

    /// Same config with the superstrate thickness replaced (keeping profile
    /// kind and material, defaulting to uniform sulfur when absent).
    pub fn with_thickness(&self, t_mm: f64) -> Self {
        let mut cfg = self.clone();
        cfg.stack.superstrate = match cfg.stack.superstrate.take() {
            Some(mut s) => {
                s.profile = match s.profile {
                    ProfileConfig::Uniform { .. } => ProfileConfig::Uniform { t_mm },
                    ProfileConfig::Wavy {
                        amplitude_mm,
                        period_mm,
                        ..
                    } => ProfileConfig::Wavy {
                        t_mm,
                        amplitude_mm,
                        period_mm,
                    },
                };
                Some(s)
            }
            None => Some(SuperstrateConfig {
                eps_r: crate::stackup::SULFUR_EPS_R,
                tan_d: crate::stackup::SULFUR_TAN_D,
                profile: ProfileConfig::Uniform { t_mm },
            }),
        };
        cfg
    }
}
