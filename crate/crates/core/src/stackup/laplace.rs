//! 2-D finite-difference Laplace solver for the quasi-static line capacitance
//! of a microstrip cross-section: a zero-thickness strip over a ground plane
//! with layered dielectrics, solved by successive over-relaxation.
//!
//! The effective permittivity is the ratio C(with dielectrics) / C(air
//! filled) computed on the identical grid, so discretization error largely
//! cancels in the ratio.

use super::{LayerStack, StackupError};
use crate::EPS0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacitanceMode {
    WithDielectrics,
    AirFilled,
}

#[derive(Debug, Clone, Copy)]
pub struct LaplaceConfig {
    /// Minimum cells across the strip width (coarse interior fill).
    pub cells_per_strip: usize,
    /// Cells across the substrate height; also sets the fine lateral cell
    /// near the strip edges, where the fringing field concentrates.
    pub cells_per_height: usize,
    /// Lateral window as a multiple of the strip width (total).
    pub window_width_factor: f64,
    /// Vertical window as a multiple of the substrate height.
    pub window_height_factor: f64,
    /// Stop when the largest per-sweep potential update falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LaplaceConfig {
    fn default() -> Self {
        Self {
            cells_per_strip: 12,
            cells_per_height: 3,
            window_width_factor: 20.0,
            window_height_factor: 40.0,
            tolerance: 1e-8,
            max_iterations: 200_000,
        }
    }
}

impl LaplaceConfig {
    /// Same physical window at twice the grid density.
    pub fn refined(&self) -> Self {
        Self {
            cells_per_strip: self.cells_per_strip * 2,
            cells_per_height: self.cells_per_height * 2,
            ..*self
        }
    }

    fn validate(&self) -> Result<(), StackupError> {
        if self.cells_per_strip < 2 || self.cells_per_height < 2 {
            return Err(StackupError::Domain(
                "laplace grid needs >= 2 cells across strip and substrate".into(),
            ));
        }
        if self.window_width_factor < 10.0 {
            return Err(StackupError::Domain(format!(
                "solver window {}x strip width is below the 10x minimum",
                self.window_width_factor
            )));
        }
        if self.window_height_factor < 20.0 {
            return Err(StackupError::Domain(format!(
                "solver window {}x substrate height is below the 20x minimum",
                self.window_height_factor
            )));
        }
        Ok(())
    }
}

pub fn cross_section_capacitance(
    stack: &LayerStack,
    strip_width_mm: f64,
    mode: CapacitanceMode,
    cfg: &LaplaceConfig,
) -> Result<f64, StackupError> {
    cfg.validate()?;
    if strip_width_mm <= 0.0 {
        return Err(StackupError::Domain(format!(
            "strip width {strip_width_mm} mm <= 0"
        )));
    }
    let h = stack.substrate_height_mm()?;
    let t = stack.superstrate_thickness_mm()?;

    // Grid is built from length ratios only, which makes the capacitance
    // ratio exactly invariant under uniform geometric scaling.
    //
    // The lateral mesh is graded: cells of dy within a 3h band around each
    // strip edge (where the fringing field that superstrates perturb is
    // concentrated), growing geometrically away from the band. A uniform
    // lateral cell sized to the strip width cannot resolve that band for
    // wide strips and grossly underestimates the superstrate loading.
    let dy = h / cfg.cells_per_height as f64;
    let w2 = strip_width_mm / 2.0;
    let half_window = cfg.window_width_factor * strip_width_mm / 2.0;
    let band = 3.0 * h;
    let cap_in = (strip_width_mm / cfg.cells_per_strip as f64).max(h);
    let cap_out = half_window / 20.0;
    let inward = graded_span(w2, dy, band.min(w2 / 2.0), cap_in);
    let outward = graded_span(half_window - w2, dy, band, cap_out);
    // half axis ordered from the strip center to the window wall
    let mut half: Vec<f64> = inward.iter().rev().copied().collect();
    half.extend_from_slice(&outward);
    // full axis mirrored about the strip center
    let mut dxs: Vec<f64> = half.iter().rev().copied().collect();
    dxs.extend_from_slice(&half);
    let nx = dxs.len();
    let center = half.len();
    let i0 = center - inward.len();
    let i1 = center + inward.len();

    let mut ny = (cfg.window_height_factor * cfg.cells_per_height as f64).round() as usize;
    // grow the window when a thick superstrate would touch the top wall
    let fit = (2.0 * (h + t) / dy).ceil() as usize;
    ny = ny.max(fit);

    // Per-cell relative permittivity; the superstrate boundary cell uses a
    // fill-fraction mix so capacitance varies smoothly (and monotonically)
    // with thickness.
    let amb = stack.ambient.relative_permittivity;
    let sup = stack
        .superstrate
        .map(|s| s.relative_permittivity)
        .unwrap_or(amb);
    let eps_row: Vec<f64> = (0..ny)
        .map(|j| match mode {
            CapacitanceMode::AirFilled => 1.0,
            CapacitanceMode::WithDielectrics => {
                let y0 = j as f64 * dy;
                let y1 = y0 + dy;
                if y1 <= h + 1e-12 * h {
                    stack.substrate.relative_permittivity
                } else {
                    let fill = ((h + t).min(y1) - y0.max(h)).max(0.0) / dy;
                    fill * sup + (1.0 - fill) * amb
                }
            }
        })
        .collect();

    let nxn = nx + 1; // node columns
    let nyn = ny + 1; // node rows
    let idx = |i: usize, j: usize| j * nxn + i;

    // Edge conductance factors (dimensionless, per unit length): an x-edge
    // across cell column i at node row j has g = ex_row[j] * ax[i]; a y-edge
    // at node column i in cell row j has g = eps_row[j] * bx[i]. Layering
    // varies only with j, spacing only with i.
    let ax: Vec<f64> = dxs.iter().map(|d| dy / d).collect();
    let bx: Vec<f64> = (0..nxn)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { dxs[i - 1] };
            let right = if i == nx { 0.0 } else { dxs[i] };
            0.5 * (left + right) / dy
        })
        .collect();
    let ex_row: Vec<f64> = (0..nyn)
        .map(|j| {
            let lo = eps_row[j.saturating_sub(1).min(ny - 1)];
            let hi = eps_row[j.min(ny - 1)];
            0.5 * (lo + hi)
        })
        .collect();

    // Dirichlet: ground (j = 0), outer boundary 0 V; strip nodes 1 V.
    let js = cfg.cells_per_height;
    let mut phi = vec![0.0f64; nxn * nyn];
    let mut fixed = vec![false; nxn * nyn];
    for j in 0..nyn {
        fixed[idx(0, j)] = true;
        fixed[idx(nx, j)] = true;
    }
    for i in 0..nxn {
        fixed[idx(i, 0)] = true;
        fixed[idx(i, ny)] = true;
    }
    for i in i0..=i1 {
        phi[idx(i, js)] = 1.0;
        fixed[idx(i, js)] = true;
    }

    let n = nx.max(ny) as f64;
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / n).sin());

    let mut residual = f64::INFINITY;
    let mut iters = 0;
    while iters < cfg.max_iterations {
        iters += 1;
        let mut max_change = 0.0f64;
        for j in 1..ny {
            let ex = ex_row[j];
            let es = eps_row[j - 1];
            let en = eps_row[j];
            let row = j * nxn;
            for i in 1..nx {
                let n = row + i;
                if fixed[n] {
                    continue;
                }
                let gxw = ex * ax[i - 1];
                let gxe = ex * ax[i];
                let gy = (es + en) * bx[i];
                let target = (gxw * phi[n - 1]
                    + gxe * phi[n + 1]
                    + es * bx[i] * phi[n - nxn]
                    + en * bx[i] * phi[n + nxn])
                    / (gxw + gxe + gy);
                let change = omega * (target - phi[n]);
                phi[n] += change;
                let a = change.abs();
                if a > max_change {
                    max_change = a;
                }
            }
        }
        residual = max_change;
        if max_change < cfg.tolerance {
            break;
        }
    }
    if residual >= cfg.tolerance {
        return Err(StackupError::NonConvergence {
            residual,
            iterations: iters,
        });
    }

    // Field energy route: C/eps0 = sum over edges of g * (dphi)^2 at V = 1.
    let mut c = 0.0;
    for j in 0..nyn {
        let ex = ex_row[j];
        for i in 0..nx {
            let d = phi[idx(i + 1, j)] - phi[idx(i, j)];
            c += ex * ax[i] * d * d;
        }
    }
    for j in 0..ny {
        let e = eps_row[j];
        for i in 0..nxn {
            let d = phi[idx(i, j + 1)] - phi[idx(i, j)];
            c += e * bx[i] * d * d;
        }
    }
    Ok(EPS0 * c)
}

/// Cell spacings covering `total`, starting at `fine` within `fine_band` of
/// the origin and growing geometrically (capped at `cap`) beyond it; the
/// result is rescaled so the spacings sum to `total` exactly.
fn graded_span(total: f64, fine: f64, fine_band: f64, cap: f64) -> Vec<f64> {
    let mut spacings = Vec::new();
    let mut sum = 0.0;
    let mut d = fine;
    while sum < total {
        if sum >= fine_band {
            d = (d * 1.3).min(cap.max(fine));
        }
        spacings.push(d);
        sum += d;
    }
    let scale = total / sum;
    for v in &mut spacings {
        *v *= scale;
    }
    spacings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stackup::{DielectricLayer, Thickness};

    fn stack(sub_eps: f64, h: f64, sup: Option<(f64, f64)>) -> LayerStack {
        LayerStack {
            substrate: DielectricLayer {
                relative_permittivity: sub_eps,
                loss_tangent: 0.0,
                thickness: Thickness::Mm(h),
            },
            superstrate: sup.map(|(e, t)| DielectricLayer {
                relative_permittivity: e,
                loss_tangent: 0.0,
                thickness: Thickness::Mm(t),
            }),
            ambient: DielectricLayer {
                relative_permittivity: 1.0,
                loss_tangent: 0.0,
                thickness: Thickness::SemiInfinite,
            },
        }
    }

    #[test]
    fn homogeneous_air_ratio_is_unity() {
        let s = stack(1.0, 0.508, None);
        let cfg = LaplaceConfig::default();
        let cd =
            cross_section_capacitance(&s, 11.69, CapacitanceMode::WithDielectrics, &cfg).unwrap();
        let ca = cross_section_capacitance(&s, 11.69, CapacitanceMode::AirFilled, &cfg).unwrap();
        assert!((cd / ca - 1.0).abs() < 1e-9, "{}", cd / ca);
    }

    #[test]
    fn parallel_plate_sanity() {
        // wide strip W/h = 100: fringing is a small correction. The lateral
        // cell must stay comparable to h near the strip edges, so this test
        // raises cells_per_strip well above the default.
        let h = 0.1;
        let w = 10.0;
        let s = stack(2.2, h, None);
        let cfg = LaplaceConfig {
            cells_per_strip: 100,
            cells_per_height: 4,
            ..LaplaceConfig::default()
        };
        let c = cross_section_capacitance(&s, w, CapacitanceMode::WithDielectrics, &cfg).unwrap();
        let plate = crate::EPS0 * 2.2 * (w / h);
        assert!(
            (c - plate).abs() / plate < 0.10,
            "c = {c:.4e}, plate = {plate:.4e}"
        );
    }

    #[test]
    fn uncovered_matches_hammerstad_within_5_percent() {
        let s = stack(2.2, 0.508, None);
        let cfg = LaplaceConfig::default();
        let cd =
            cross_section_capacitance(&s, 11.69, CapacitanceMode::WithDielectrics, &cfg).unwrap();
        let ca = cross_section_capacitance(&s, 11.69, CapacitanceMode::AirFilled, &cfg).unwrap();
        let eps_e = cd / ca;
        assert!((eps_e - 2.086).abs() / 2.086 < 0.05, "eps_e = {eps_e}");
    }

    #[test]
    fn grid_refinement_changes_eps_e_under_one_percent() {
        let s = stack(2.2, 0.508, Some((3.5, 2.0)));
        let cfg = LaplaceConfig::default();
        let eps = |c: &LaplaceConfig| {
            let cd =
                cross_section_capacitance(&s, 11.69, CapacitanceMode::WithDielectrics, c).unwrap();
            let ca = cross_section_capacitance(&s, 11.69, CapacitanceMode::AirFilled, c).unwrap();
            cd / ca
        };
        let e1 = eps(&cfg);
        let e2 = eps(&cfg.refined());
        assert!((e2 - e1).abs() / e1 < 0.01, "e1 = {e1}, e2 = {e2}");
    }

    #[test]
    fn window_minimums_enforced() {
        let s = stack(2.2, 0.508, None);
        let cfg = LaplaceConfig {
            window_width_factor: 8.0,
            ..Default::default()
        };
        assert!(
            cross_section_capacitance(&s, 11.69, CapacitanceMode::AirFilled, &cfg).is_err()
        );
        let cfg = LaplaceConfig {
            window_height_factor: 10.0,
            ..Default::default()
        };
        assert!(
            cross_section_capacitance(&s, 11.69, CapacitanceMode::AirFilled, &cfg).is_err()
        );
    }

    #[test]
    fn delta_eps_increases_then_saturates() {
        let s0 = stack(2.2, 0.508, None);
        let cfg = LaplaceConfig::default();
        let eps_of = |t: f64| {
            let s = if t > 0.0 {
                stack(2.2, 0.508, Some((3.5, t)))
            } else {
                s0.clone()
            };
            let cd =
                cross_section_capacitance(&s, 11.69, CapacitanceMode::WithDielectrics, &cfg)
                    .unwrap();
            let ca =
                cross_section_capacitance(&s, 11.69, CapacitanceMode::AirFilled, &cfg).unwrap();
            cd / ca
        };
        let e0 = eps_of(0.0);
        let e2 = eps_of(2.0);
        let e5 = eps_of(5.0);
        let e7 = eps_of(7.0);
        assert!(e2 > e0 && e5 > e2 && e7 > e5, "{e0} {e2} {e5} {e7}");
        // saturation: late increments smaller than early ones
        assert!((e7 - e5) < (e2 - e0), "{} vs {}", e7 - e5, e2 - e0);
    }
}
