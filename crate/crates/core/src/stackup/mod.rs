//! Analytic and quasi-static models of a rectangular microstrip patch under a
//! dielectric superstrate: effective permittivity (uncovered and covered),
//! transmission-line resonance, and the fractional-shift relation.

pub mod laplace;

use crate::inversion::{CalibrationCurve, CurveSource, ObservableKind};
use crate::C0_MM_GHZ;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use laplace::{CapacitanceMode, LaplaceConfig};

#[derive(Debug, Error)]
pub enum StackupError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("laplace solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("model produced a non-monotone curve between t = {t_lo} mm and t = {t_hi} mm")]
    NonMonotone { t_lo: f64, t_hi: f64 },
}

/// Layer thickness: finite in mm, or a semi-infinite halfspace (ambient).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Thickness {
    #[serde(rename = "mm")]
    Mm(f64),
    #[serde(rename = "semi_infinite")]
    SemiInfinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DielectricLayer {
    pub relative_permittivity: f64,
    pub loss_tangent: f64,
    pub thickness: Thickness,
}

impl DielectricLayer {
    pub fn new(eps_r: f64, tan_d: f64, thickness: Thickness) -> Result<Self, StackupError> {
        if eps_r < 1.0 {
            return Err(StackupError::Domain(format!(
                "relative permittivity {eps_r} < 1"
            )));
        }
        if tan_d < 0.0 {
            return Err(StackupError::Domain(format!("loss tangent {tan_d} < 0")));
        }
        if let Thickness::Mm(t) = thickness {
            if t <= 0.0 {
                return Err(StackupError::Domain(format!("layer thickness {t} mm <= 0")));
            }
        }
        Ok(Self {
            relative_permittivity: eps_r,
            loss_tangent: tan_d,
            thickness,
        })
    }
}

/// Substrate + optional superstrate + ambient halfspace, bottom to top.
///
/// A superstrate of zero thickness and an absent superstrate are the same
/// case by definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub substrate: DielectricLayer,
    pub superstrate: Option<DielectricLayer>,
    pub ambient: DielectricLayer,
}

impl LayerStack {
    pub fn substrate_height_mm(&self) -> Result<f64, StackupError> {
        match self.substrate.thickness {
            Thickness::Mm(h) => Ok(h),
            Thickness::SemiInfinite => Err(StackupError::Domain(
                "substrate must have finite thickness".into(),
            )),
        }
    }

    pub fn superstrate_thickness_mm(&self) -> Result<f64, StackupError> {
        match self.superstrate {
            None => Ok(0.0),
            Some(DielectricLayer {
                thickness: Thickness::Mm(t),
                ..
            }) => Ok(t),
            Some(_) => Err(StackupError::Domain(
                "superstrate must have finite thickness".into(),
            )),
        }
    }

    /// Same stack with the superstrate replaced by thickness `t_mm` of the
    /// given permittivity (dropping it entirely at t = 0).
    pub fn with_superstrate(&self, eps_r: f64, tan_d: f64, t_mm: f64) -> Self {
        let mut s = self.clone();
        s.superstrate = if t_mm > 0.0 {
            Some(DielectricLayer {
                relative_permittivity: eps_r,
                loss_tangent: tan_d,
                thickness: Thickness::Mm(t_mm),
            })
        } else {
            None
        };
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchGeometry {
    /// Dimension that sets the half-wave resonance, mm.
    pub resonant_length_mm: f64,
    /// Transverse dimension, mm.
    pub width_mm: f64,
    /// Substrate height h, mm (mirror of the stack's substrate thickness).
    pub substrate_height_mm: f64,
    /// Feed position measured from the patch center along the resonant
    /// length, mm.
    pub feed_offset_mm: f64,
}

impl PatchGeometry {
    pub fn validate(&self) -> Result<(), StackupError> {
        if self.resonant_length_mm <= 0.0 || self.width_mm <= 0.0 || self.substrate_height_mm <= 0.0
        {
            return Err(StackupError::Domain(format!(
                "non-positive patch dimension: L={} W={} h={}",
                self.resonant_length_mm, self.width_mm, self.substrate_height_mm
            )));
        }
        if self.feed_offset_mm.abs() >= self.resonant_length_mm / 2.0 {
            return Err(StackupError::Domain(format!(
                "feed offset {} mm outside the patch (resonant length {} mm)",
                self.feed_offset_mm, self.resonant_length_mm
            )));
        }
        Ok(())
    }
}

/// Uncovered and covered effective permittivity of the patch line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectivePermittivity {
    pub eps_e0: f64,
    pub eps_e: f64,
    pub delta_eps: f64,
}

/// Hammerstad closed form for the effective permittivity of an uncovered
/// microstrip line.
pub fn eff_eps_uncovered(geom: &PatchGeometry, substrate_eps: f64) -> Result<f64, StackupError> {
    if geom.width_mm <= 0.0 || geom.substrate_height_mm <= 0.0 {
        return Err(StackupError::Domain(
            "width and substrate height must be positive".into(),
        ));
    }
    if substrate_eps < 1.0 {
        return Err(StackupError::Domain(format!(
            "substrate permittivity {substrate_eps} < 1"
        )));
    }
    let w_over_h = geom.width_mm / geom.substrate_height_mm;
    Ok((substrate_eps + 1.0) / 2.0
        + (substrate_eps - 1.0) / 2.0 / (1.0 + 12.0 / w_over_h).sqrt())
}

/// Hammerstad fringing length extension ΔL, mm.
pub fn fringing_extension(geom: &PatchGeometry, eps_e: f64) -> f64 {
    let w_over_h = geom.width_mm / geom.substrate_height_mm;
    0.412
        * geom.substrate_height_mm
        * ((eps_e + 0.3) * (w_over_h + 0.264))
        / ((eps_e - 0.258) * (w_over_h + 0.8))
}

/// Quasi-static line capacitance of the microstrip cross-section, F/m, via a
/// 2-D finite-difference Laplace solve. See [`laplace`] for the solver.
pub fn cross_section_capacitance(
    stack: &LayerStack,
    strip_width_mm: f64,
    mode: CapacitanceMode,
) -> Result<f64, StackupError> {
    laplace::cross_section_capacitance(stack, strip_width_mm, mode, &LaplaceConfig::default())
}

/// Covered effective permittivity from the capacitance-ratio solver.
///
/// ε_e uses the superstrate as given; ε_e0 uses the same grid with the
/// superstrate permittivity set to 1, so the two share discretization error.
pub fn eff_eps_covered(
    geom: &PatchGeometry,
    stack: &LayerStack,
) -> Result<EffectivePermittivity, StackupError> {
    eff_eps_covered_with(geom, stack, &LaplaceConfig::default())
}

pub fn eff_eps_covered_with(
    geom: &PatchGeometry,
    stack: &LayerStack,
    cfg: &LaplaceConfig,
) -> Result<EffectivePermittivity, StackupError> {
    geom.validate()?;
    let c_air = laplace::cross_section_capacitance(
        stack,
        geom.width_mm,
        CapacitanceMode::AirFilled,
        cfg,
    )?;
    let t = stack.superstrate_thickness_mm()?;
    let sup_eps = stack
        .superstrate
        .map(|s| s.relative_permittivity)
        .unwrap_or(1.0);
    let bare = stack.with_superstrate(1.0, 0.0, t);
    let c_bare = laplace::cross_section_capacitance(
        &bare,
        geom.width_mm,
        CapacitanceMode::WithDielectrics,
        cfg,
    )?;
    let eps_e0 = c_bare / c_air;
    let eps_e = if t == 0.0 || sup_eps == 1.0 {
        eps_e0
    } else {
        let c_cov = laplace::cross_section_capacitance(
            stack,
            geom.width_mm,
            CapacitanceMode::WithDielectrics,
            cfg,
        )?;
        c_cov / c_air
    };
    Ok(EffectivePermittivity {
        eps_e0,
        eps_e,
        delta_eps: eps_e - eps_e0,
    })
}

/// The fractional resonance shift (½·Δε_e/ε_e0)/(1 + ½·Δε_e/ε_e0).
pub fn fractional_shift(eps: &EffectivePermittivity) -> Result<f64, StackupError> {
    if eps.eps_e0 < 1.0 {
        return Err(StackupError::Domain(format!("eps_e0 {} < 1", eps.eps_e0)));
    }
    if eps.delta_eps < 0.0 {
        return Err(StackupError::Domain(format!(
            "delta_eps {} < 0",
            eps.delta_eps
        )));
    }
    let half_x = 0.5 * eps.delta_eps / eps.eps_e0;
    Ok(half_x / (1.0 + half_x))
}

/// Half-wave transmission-line resonance of the patch, GHz.
///
/// The uncovered baseline is the Hammerstad ε_e0; the superstrate loading
/// enters through the solver's Δε_e so the closed form and the numeric model
/// share a common anchor. ΔL is evaluated at the loaded ε_e.
pub fn patch_resonance(geom: &PatchGeometry, stack: &LayerStack) -> Result<f64, StackupError> {
    patch_resonance_with(geom, stack, &LaplaceConfig::default())
}

pub fn patch_resonance_with(
    geom: &PatchGeometry,
    stack: &LayerStack,
    cfg: &LaplaceConfig,
) -> Result<f64, StackupError> {
    geom.validate()?;
    let h = stack.substrate_height_mm()?;
    if (h - geom.substrate_height_mm).abs() > 1e-9 * h.max(geom.substrate_height_mm) {
        return Err(StackupError::Domain(format!(
            "geometry substrate height {} mm disagrees with stack substrate thickness {} mm",
            geom.substrate_height_mm, h
        )));
    }
    let eps_e0_h = eff_eps_uncovered(geom, stack.substrate.relative_permittivity)?;
    let t = stack.superstrate_thickness_mm()?;
    let sup_eps = stack
        .superstrate
        .map(|s| s.relative_permittivity)
        .unwrap_or(1.0);
    let delta = if t > 0.0 && sup_eps != 1.0 {
        eff_eps_covered_with(geom, stack, cfg)?.delta_eps
    } else {
        0.0
    };
    let eps_e = eps_e0_h + delta;
    let dl = fringing_extension(geom, eps_e);
    Ok(C0_MM_GHZ / (2.0 * (geom.resonant_length_mm + 2.0 * dl) * eps_e.sqrt()))
}

/// Resonance as a function of superstrate thickness, packaged as a
/// frequency calibration curve.
pub fn forward_curve(
    geom: &PatchGeometry,
    stack_template: &LayerStack,
    superstrate_eps: f64,
    superstrate_tan_d: f64,
    thicknesses_mm: &[f64],
) -> Result<CalibrationCurve, StackupError> {
    forward_curve_with(
        geom,
        stack_template,
        superstrate_eps,
        superstrate_tan_d,
        thicknesses_mm,
        &LaplaceConfig::default(),
    )
}

pub fn forward_curve_with(
    geom: &PatchGeometry,
    stack_template: &LayerStack,
    superstrate_eps: f64,
    superstrate_tan_d: f64,
    thicknesses_mm: &[f64],
    cfg: &LaplaceConfig,
) -> Result<CalibrationCurve, StackupError> {
    if thicknesses_mm.len() < 2 {
        return Err(StackupError::Domain(format!(
            "need at least 2 thicknesses, got {}",
            thicknesses_mm.len()
        )));
    }
    for w in thicknesses_mm.windows(2) {
        if !(w[1] > w[0]) {
            return Err(StackupError::Domain(format!(
                "thicknesses not strictly increasing at {} mm",
                w[0]
            )));
        }
    }
    let mut nodes = Vec::with_capacity(thicknesses_mm.len());
    for &t in thicknesses_mm {
        if t < 0.0 {
            return Err(StackupError::Domain(format!("negative thickness {t} mm")));
        }
        let stack = stack_template.with_superstrate(superstrate_eps, superstrate_tan_d, t);
        let f = patch_resonance_with(geom, &stack, cfg)?;
        nodes.push((t, f));
    }
    if superstrate_eps > 1.0 {
        for w in nodes.windows(2) {
            if !(w[1].1 < w[0].1) {
                return Err(StackupError::NonMonotone {
                    t_lo: w[0].0,
                    t_hi: w[1].0,
                });
            }
        }
    }
    CalibrationCurve::new(ObservableKind::FrequencyGhz, nodes, CurveSource::Model)
        .map_err(|e| StackupError::Domain(e.to_string()))
}

/// The antenna and stackup dimensions used throughout the built-in scenes:
/// 10 GHz patch on 0.508 mm Rogers 5880.
pub fn reference_patch() -> (PatchGeometry, LayerStack) {
    let geom = PatchGeometry {
        resonant_length_mm: 9.7,
        width_mm: 11.69,
        substrate_height_mm: 0.508,
        feed_offset_mm: 2.9,
    };
    let stack = LayerStack {
        substrate: DielectricLayer {
            relative_permittivity: 2.2,
            loss_tangent: 0.0009,
            thickness: Thickness::Mm(0.508),
        },
        superstrate: None,
        ambient: DielectricLayer {
            relative_permittivity: 1.0,
            loss_tangent: 0.0,
            thickness: Thickness::SemiInfinite,
        },
    };
    (geom, stack)
}

/// Sulfur deposit dielectric constant used by the built-in scenes.
pub const SULFUR_EPS_R: f64 = 3.5;
/// Sulfur loss tangent default; affects dip depth only at this scale.
pub const SULFUR_TAN_D: f64 = 0.001;
