//! Time-stepping core: leapfrog Yee updates with convolutional PML
//! absorbing layers and a lumped resistive-voltage-source port.
//!
//! Fields are stored in f32 (the update is strongly memory-bound); all
//! per-step scalar bookkeeping stays in f64.

use super::grid::{FieldComponent, YeeGrid};
use super::{courant_dt, FdtdError, GaussianPulse, TimeSeries};
use crate::{EPS0, MU0};

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Fraction of the Courant limit used for the time step.
    pub courant_safety: f64,
    /// Polynomial grading order of the PML conductivity profile.
    pub pml_order: f64,
    /// sigma_max as a multiple of the standard optimum (m+1)/(eta0*dx).
    pub pml_sigma_scale: f64,
    /// CFS alpha at the PML inner edge, S/m scale.
    pub pml_alpha_max: f64,
    /// Steps between instability checks.
    pub check_every: usize,
    /// Port-energy decay threshold relative to the running peak.
    pub decay_threshold: f64,
    /// Consecutive quiet steps required before early termination.
    pub quiet_window: usize,
    /// Field magnitude treated as divergence.
    pub instability_limit: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            courant_safety: 0.99,
            pml_order: 3.0,
            pml_sigma_scale: 0.8,
            pml_alpha_max: 0.2,
            check_every: 100,
            decay_threshold: 1e-5,
            quiet_window: 500,
            instability_limit: 1e12,
        }
    }
}

/// Additive ("soft") E-field excitation at a single edge.
#[derive(Debug, Clone, Copy)]
pub struct SoftSource {
    pub component: FieldComponent,
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

struct PortState {
    idx: usize,
    c_decay: f64,
    c_curl: f64,
    c_src: f64,
    shorted: bool,
}

pub struct Engine {
    nx: usize,
    ny: usize,
    nz: usize,
    si: usize,
    sj: usize,
    cell: f64,
    dt: f64,
    npml: usize,
    cfg: EngineConfig,
    ex: Vec<f32>,
    ey: Vec<f32>,
    ez: Vec<f32>,
    hx: Vec<f32>,
    hy: Vec<f32>,
    hz: Vec<f32>,
    ca_x: Vec<f32>,
    ca_y: Vec<f32>,
    ca_z: Vec<f32>,
    cb_x: Vec<f32>,
    cb_y: Vec<f32>,
    cb_z: Vec<f32>,
    eps_inv_x: Vec<f32>,
    eps_inv_y: Vec<f32>,
    eps_inv_z: Vec<f32>,
    // psi accumulators: component x transverse axis
    psi_exy: Vec<f32>,
    psi_exz: Vec<f32>,
    psi_eyx: Vec<f32>,
    psi_eyz: Vec<f32>,
    psi_ezx: Vec<f32>,
    psi_ezy: Vec<f32>,
    psi_hxy: Vec<f32>,
    psi_hxz: Vec<f32>,
    psi_hyx: Vec<f32>,
    psi_hyz: Vec<f32>,
    psi_hzx: Vec<f32>,
    psi_hzy: Vec<f32>,
    // CPML recursion tables, indexed by node coordinate along each axis;
    // *_e at integer positions, *_h at half positions.
    be: [Vec<f32>; 3],
    ce: [Vec<f32>; 3],
    bh: [Vec<f32>; 3],
    ch: [Vec<f32>; 3],
    db: f32,
    inv_d: f32,
    port: Option<PortState>,
    port_resistance: f64,
    soft_sources: Vec<(SoftSource, usize)>,
    probes: Vec<(FieldComponent, usize)>,
}

impl Engine {
    pub fn new(grid: &YeeGrid, cfg: EngineConfig) -> Result<Self, FdtdError> {
        let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
        if 2 * grid.npml + 4 >= nx.min(ny).min(nz) {
            return Err(FdtdError::Config(format!(
                "domain {}x{}x{} too small for {} absorbing layers",
                nx, ny, nz, grid.npml
            )));
        }
        let n = grid.node_count();
        let cell = grid.cell_m;
        let dt = courant_dt(cell, cell, cell, cfg.courant_safety);
        let mk_cacb = |eps_inv: &[f32], sigma: &[f32]| {
            let mut ca = vec![0.0f32; n];
            let mut cb = vec![0.0f32; n];
            for m in 0..n {
                if eps_inv[m] > 0.0 {
                    let eps = EPS0 / eps_inv[m] as f64;
                    let x = sigma[m] as f64 * dt / (2.0 * eps);
                    ca[m] = ((1.0 - x) / (1.0 + x)) as f32;
                    cb[m] = (dt / eps / (1.0 + x)) as f32;
                } else {
                    ca[m] = 1.0; // PEC: field pinned at zero, cb = 0
                }
            }
            (ca, cb)
        };
        let (ca_x, cb_x) = mk_cacb(&grid.eps_inv_x, &grid.sigma_x);
        let (ca_y, cb_y) = mk_cacb(&grid.eps_inv_y, &grid.sigma_y);
        let (ca_z, cb_z) = mk_cacb(&grid.eps_inv_z, &grid.sigma_z);

        let eta0 = (MU0 / EPS0).sqrt();
        let sigma_max = cfg.pml_sigma_scale * (cfg.pml_order + 1.0) / (eta0 * cell);
        let npml = grid.npml;
        let dims = [nx, ny, nz];
        let mut be: [Vec<f32>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut ce: [Vec<f32>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut bh: [Vec<f32>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut ch: [Vec<f32>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for ax in 0..3 {
            let nd = dims[ax];
            let table = |half: bool| {
                let mut b = vec![0.0f32; nd + 1];
                let mut c = vec![0.0f32; nd + 1];
                if npml == 0 {
                    return (b, c);
                }
                for p in 0..=nd {
                    let pos = p as f64 + if half { 0.5 } else { 0.0 };
                    // depth into the PML from the inner interface, in cells
                    let depth = if pos < npml as f64 {
                        npml as f64 - pos
                    } else if pos > (nd - npml) as f64 {
                        pos - (nd - npml) as f64
                    } else {
                        continue;
                    };
                    let u = (depth / npml as f64).min(1.0);
                    let sigma = sigma_max * u.powf(cfg.pml_order);
                    let alpha = cfg.pml_alpha_max * (1.0 - u);
                    let bb = (-(sigma + alpha) * dt / EPS0).exp();
                    b[p] = bb as f32;
                    c[p] = (sigma * (bb - 1.0) / (sigma + alpha)) as f32;
                }
                (b, c)
            };
            let (b, c) = table(false);
            be[ax] = b;
            ce[ax] = c;
            let (b, c) = table(true);
            bh[ax] = b;
            ch[ax] = c;
        }

        let port = grid.port.map(|p| {
            let idx = grid.idx(p.i, p.j, p.k);
            let shorted = grid.eps_inv_z[idx] == 0.0;
            let eps = if shorted { EPS0 } else { EPS0 / grid.eps_inv_z[idx] as f64 };
            let x = grid.sigma_z[idx] as f64 * dt / (2.0 * eps);
            // lumped series resistance contributes like an extra edge
            // conductivity dz / (R dx dy)
            let beta = dt * cell / (2.0 * p.resistance * eps * cell * cell);
            let denom = 1.0 + x + beta;
            PortState {
                idx,
                c_decay: (1.0 - x - beta) / denom,
                c_curl: dt / eps / denom,
                c_src: dt / (p.resistance * eps * cell * cell) / denom,
                shorted,
            }
        });

        Ok(Self {
            nx,
            ny,
            nz,
            si: (ny + 1) * (nz + 1),
            sj: nz + 1,
            cell,
            dt,
            npml,
            cfg,
            ex: vec![0.0; n],
            ey: vec![0.0; n],
            ez: vec![0.0; n],
            hx: vec![0.0; n],
            hy: vec![0.0; n],
            hz: vec![0.0; n],
            ca_x,
            ca_y,
            ca_z,
            cb_x,
            cb_y,
            cb_z,
            eps_inv_x: grid.eps_inv_x.clone(),
            eps_inv_y: grid.eps_inv_y.clone(),
            eps_inv_z: grid.eps_inv_z.clone(),
            psi_exy: vec![0.0; n],
            psi_exz: vec![0.0; n],
            psi_eyx: vec![0.0; n],
            psi_eyz: vec![0.0; n],
            psi_ezx: vec![0.0; n],
            psi_ezy: vec![0.0; n],
            psi_hxy: vec![0.0; n],
            psi_hxz: vec![0.0; n],
            psi_hyx: vec![0.0; n],
            psi_hyz: vec![0.0; n],
            psi_hzx: vec![0.0; n],
            psi_hzy: vec![0.0; n],
            be,
            ce,
            bh,
            ch,
            db: (dt / MU0) as f32,
            inv_d: (1.0 / cell) as f32,
            port,
            port_resistance: grid.port.map(|p| p.resistance).unwrap_or(50.0),
            soft_sources: Vec::new(),
            probes: Vec::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn add_soft_source(&mut self, s: SoftSource) {
        let idx = (s.i * (self.ny + 1) + s.j) * (self.nz + 1) + s.k;
        self.soft_sources.push((s, idx));
    }

    pub fn add_probe(&mut self, comp: FieldComponent, i: usize, j: usize, k: usize) {
        let idx = (i * (self.ny + 1) + j) * (self.nz + 1) + k;
        self.probes.push((comp, idx));
    }

    fn update_h(&mut self) {
        let (si, sj) = (self.si, self.sj);
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        let db = self.db;
        let inv_d = self.inv_d;
        // Hx(i, j+1/2, k+1/2) -= db * (dEz/dy - dEy/dz)
        for i in 0..=nx {
            for j in 0..ny {
                let row = i * si + j * sj;
                for k in 0..nz {
                    let m = row + k;
                    self.hx[m] -= db
                        * ((self.ez[m + sj] - self.ez[m]) - (self.ey[m + 1] - self.ey[m]))
                        * inv_d;
                }
            }
        }
        // Hy(i+1/2, j, k+1/2) -= db * (dEx/dz - dEz/dx)
        for i in 0..nx {
            for j in 0..=ny {
                let row = i * si + j * sj;
                for k in 0..nz {
                    let m = row + k;
                    self.hy[m] -= db
                        * ((self.ex[m + 1] - self.ex[m]) - (self.ez[m + si] - self.ez[m]))
                        * inv_d;
                }
            }
        }
        // Hz(i+1/2, j+1/2, k) -= db * (dEy/dx - dEx/dy)
        for i in 0..nx {
            for j in 0..ny {
                let row = i * si + j * sj;
                for k in 0..=nz {
                    let m = row + k;
                    self.hz[m] -= db
                        * ((self.ey[m + si] - self.ey[m]) - (self.ex[m + sj] - self.ex[m]))
                        * inv_d;
                }
            }
        }
        if self.npml > 0 {
            self.update_h_pml();
        }
    }

    fn pml_ranges_h(&self, nd: usize) -> [std::ops::Range<usize>; 2] {
        // half positions p+1/2 inside the PML
        [0..self.npml, (nd - self.npml)..nd]
    }

    fn pml_ranges_e(&self, nd: usize) -> [std::ops::Range<usize>; 2] {
        // integer positions strictly inside the boundary
        [1..self.npml + 1, (nd - self.npml)..nd]
    }

    fn update_h_pml(&mut self) {
        let (si, sj) = (self.si, self.sj);
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        let db = self.db;
        let inv_d = self.inv_d;
        // Hx, y-stretch: term -dEz/dy at j+1/2
        for jr in self.pml_ranges_h(ny) {
            for i in 0..=nx {
                for j in jr.clone() {
                    let (b, c) = (self.bh[1][j], self.ch[1][j]);
                    let row = i * si + j * sj;
                    for k in 0..nz {
                        let m = row + k;
                        let d = -(self.ez[m + sj] - self.ez[m]) * inv_d;
                        self.psi_hxy[m] = b * self.psi_hxy[m] + c * d;
                        self.hx[m] += db * self.psi_hxy[m];
                    }
                }
            }
        }
        // Hx, z-stretch: term +dEy/dz at k+1/2
        for kr in self.pml_ranges_h(nz) {
            for i in 0..=nx {
                for j in 0..ny {
                    let row = i * si + j * sj;
                    for k in kr.clone() {
                        let m = row + k;
                        let d = (self.ey[m + 1] - self.ey[m]) * inv_d;
                        self.psi_hxz[m] = self.bh[2][k] * self.psi_hxz[m] + self.ch[2][k] * d;
                        self.hx[m] += db * self.psi_hxz[m];
                    }
                }
            }
        }
        // Hy, z-stretch: term -dEx/dz at k+1/2
        for kr in self.pml_ranges_h(nz) {
            for i in 0..nx {
                for j in 0..=ny {
                    let row = i * si + j * sj;
                    for k in kr.clone() {
                        let m = row + k;
                        let d = -(self.ex[m + 1] - self.ex[m]) * inv_d;
                        self.psi_hyz[m] = self.bh[2][k] * self.psi_hyz[m] + self.ch[2][k] * d;
                        self.hy[m] += db * self.psi_hyz[m];
                    }
                }
            }
        }
        // Hy, x-stretch: term +dEz/dx at i+1/2
        for ir in self.pml_ranges_h(nx) {
            for i in ir {
                let (b, c) = (self.bh[0][i], self.ch[0][i]);
                for j in 0..=ny {
                    let row = i * si + j * sj;
                    for k in 0..nz {
                        let m = row + k;
                        let d = (self.ez[m + si] - self.ez[m]) * inv_d;
                        self.psi_hyx[m] = b * self.psi_hyx[m] + c * d;
                        self.hy[m] += db * self.psi_hyx[m];
                    }
                }
            }
        }
        // Hz, x-stretch: term -dEy/dx at i+1/2
        for ir in self.pml_ranges_h(nx) {
            for i in ir {
                let (b, c) = (self.bh[0][i], self.ch[0][i]);
                for j in 0..ny {
                    let row = i * si + j * sj;
                    for k in 0..=nz {
                        let m = row + k;
                        let d = -(self.ey[m + si] - self.ey[m]) * inv_d;
                        self.psi_hzx[m] = b * self.psi_hzx[m] + c * d;
                        self.hz[m] += db * self.psi_hzx[m];
                    }
                }
            }
        }
        // Hz, y-stretch: term +dEx/dy at j+1/2
        for jr in self.pml_ranges_h(ny) {
            for i in 0..nx {
                for j in jr.clone() {
                    let (b, c) = (self.bh[1][j], self.ch[1][j]);
                    let row = i * si + j * sj;
                    for k in 0..=nz {
                        let m = row + k;
                        let d = (self.ex[m + sj] - self.ex[m]) * inv_d;
                        self.psi_hzy[m] = b * self.psi_hzy[m] + c * d;
                        self.hz[m] += db * self.psi_hzy[m];
                    }
                }
            }
        }
    }

    fn update_e(&mut self) {
        let (si, sj) = (self.si, self.sj);
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        let inv_d = self.inv_d;
        // Ex(i+1/2, j, k) interior: j in 1..ny, k in 1..nz
        for i in 0..nx {
            for j in 1..ny {
                let row = i * si + j * sj;
                for k in 1..nz {
                    let m = row + k;
                    let curl =
                        ((self.hz[m] - self.hz[m - sj]) - (self.hy[m] - self.hy[m - 1])) * inv_d;
                    self.ex[m] = self.ca_x[m] * self.ex[m] + self.cb_x[m] * curl;
                }
            }
        }
        // Ey(i, j+1/2, k): i in 1..nx, k in 1..nz
        for i in 1..nx {
            for j in 0..ny {
                let row = i * si + j * sj;
                for k in 1..nz {
                    let m = row + k;
                    let curl =
                        ((self.hx[m] - self.hx[m - 1]) - (self.hz[m] - self.hz[m - si])) * inv_d;
                    self.ey[m] = self.ca_y[m] * self.ey[m] + self.cb_y[m] * curl;
                }
            }
        }
        // Ez(i, j, k+1/2): i in 1..nx, j in 1..ny
        for i in 1..nx {
            for j in 1..ny {
                let row = i * si + j * sj;
                for k in 0..nz {
                    let m = row + k;
                    let curl =
                        ((self.hy[m] - self.hy[m - si]) - (self.hx[m] - self.hx[m - sj])) * inv_d;
                    self.ez[m] = self.ca_z[m] * self.ez[m] + self.cb_z[m] * curl;
                }
            }
        }
        if self.npml > 0 {
            self.update_e_pml();
        }
    }

    fn update_e_pml(&mut self) {
        let (si, sj) = (self.si, self.sj);
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        let inv_d = self.inv_d;
        // Ex, y-stretch: term +dHz/dy at integer j
        for jr in self.pml_ranges_e(ny) {
            for i in 0..nx {
                for j in jr.clone() {
                    let (b, c) = (self.be[1][j], self.ce[1][j]);
                    let row = i * si + j * sj;
                    for k in 1..nz {
                        let m = row + k;
                        let d = (self.hz[m] - self.hz[m - sj]) * inv_d;
                        self.psi_exy[m] = b * self.psi_exy[m] + c * d;
                        self.ex[m] += self.cb_x[m] * self.psi_exy[m];
                    }
                }
            }
        }
        // Ex, z-stretch: term -dHy/dz at integer k
        for kr in self.pml_ranges_e(nz) {
            for i in 0..nx {
                for j in 1..ny {
                    let row = i * si + j * sj;
                    for k in kr.clone() {
                        let m = row + k;
                        let d = -(self.hy[m] - self.hy[m - 1]) * inv_d;
                        self.psi_exz[m] = self.be[2][k] * self.psi_exz[m] + self.ce[2][k] * d;
                        self.ex[m] += self.cb_x[m] * self.psi_exz[m];
                    }
                }
            }
        }
        // Ey, z-stretch: term +dHx/dz at integer k
        for kr in self.pml_ranges_e(nz) {
            for i in 1..nx {
                for j in 0..ny {
                    let row = i * si + j * sj;
                    for k in kr.clone() {
                        let m = row + k;
                        let d = (self.hx[m] - self.hx[m - 1]) * inv_d;
                        self.psi_eyz[m] = self.be[2][k] * self.psi_eyz[m] + self.ce[2][k] * d;
                        self.ey[m] += self.cb_y[m] * self.psi_eyz[m];
                    }
                }
            }
        }
        // Ey, x-stretch: term -dHz/dx at integer i
        for ir in self.pml_ranges_e(nx) {
            for i in ir {
                let (b, c) = (self.be[0][i], self.ce[0][i]);
                for j in 0..ny {
                    let row = i * si + j * sj;
                    for k in 1..nz {
                        let m = row + k;
                        let d = -(self.hz[m] - self.hz[m - si]) * inv_d;
                        self.psi_eyx[m] = b * self.psi_eyx[m] + c * d;
                        self.ey[m] += self.cb_y[m] * self.psi_eyx[m];
                    }
                }
            }
        }
        // Ez, x-stretch: term +dHy/dx at integer i
        for ir in self.pml_ranges_e(nx) {
            for i in ir {
                let (b, c) = (self.be[0][i], self.ce[0][i]);
                for j in 1..ny {
                    let row = i * si + j * sj;
                    for k in 0..nz {
                        let m = row + k;
                        let d = (self.hy[m] - self.hy[m - si]) * inv_d;
                        self.psi_ezx[m] = b * self.psi_ezx[m] + c * d;
                        self.ez[m] += self.cb_z[m] * self.psi_ezx[m];
                    }
                }
            }
        }
        // Ez, y-stretch: term -dHx/dy at integer j
        for jr in self.pml_ranges_e(ny) {
            for i in 1..nx {
                for j in jr.clone() {
                    let (b, c) = (self.be[1][j], self.ce[1][j]);
                    let row = i * si + j * sj;
                    for k in 0..nz {
                        let m = row + k;
                        let d = -(self.hx[m] - self.hx[m - sj]) * inv_d;
                        self.psi_ezy[m] = b * self.psi_ezy[m] + c * d;
                        self.ez[m] += self.cb_z[m] * self.psi_ezy[m];
                    }
                }
            }
        }
    }

    /// One leapfrog step. `vs` is the port source voltage sampled at the
    /// half step, `soft` the soft-source amplitude at the new E time.
    fn step(&mut self, vs: f64, soft: f64) {
        let (si, sj) = (self.si, self.sj);
        self.update_h();
        let port = self
            .port
            .as_ref()
            .map(|p| (p.idx, p.c_decay, p.c_curl, p.c_src, p.shorted));
        let ez_old = port.map(|(m, ..)| self.ez[m] as f64).unwrap_or(0.0);
        self.update_e();
        if let Some((m, c_decay, c_curl, c_src, shorted)) = port {
            if !shorted {
                let curl = ((self.hy[m] - self.hy[m - si]) as f64
                    - (self.hx[m] - self.hx[m - sj]) as f64)
                    / self.cell;
                self.ez[m] = (c_decay * ez_old + c_curl * curl - c_src * vs) as f32;
            }
        }
        if soft != 0.0 {
            for (s, idx) in &self.soft_sources {
                let f = soft as f32;
                match s.component {
                    FieldComponent::Ex => self.ex[*idx] += f,
                    FieldComponent::Ey => self.ey[*idx] += f,
                    FieldComponent::Ez => self.ez[*idx] += f,
                }
            }
        }
    }

    pub fn max_field(&self) -> f64 {
        // f32::max drops NaN operands, so poison the accumulator explicitly
        let m = |v: &[f32]| {
            v.iter().fold(0.0f32, |a, &x| {
                if a.is_finite() && x.is_finite() {
                    a.max(x.abs())
                } else {
                    f32::NAN
                }
            })
        };
        let mut worst = 0.0f64;
        for f in [&self.ex, &self.ey, &self.ez] {
            let v = m(f) as f64;
            if !v.is_finite() {
                return f64::NAN;
            }
            worst = worst.max(v);
        }
        worst
    }

    /// Total electromagnetic field energy in joules.
    pub fn total_energy(&self) -> f64 {
        let mut we = 0.0f64;
        let e_arrays = [
            (&self.ex, &self.eps_inv_x),
            (&self.ey, &self.eps_inv_y),
            (&self.ez, &self.eps_inv_z),
        ];
        for (f, ei) in e_arrays {
            for (v, inv) in f.iter().zip(ei.iter()) {
                if *inv > 0.0 {
                    we += (EPS0 / *inv as f64) * (*v as f64) * (*v as f64);
                }
            }
        }
        let mut wh = 0.0f64;
        for f in [&self.hx, &self.hy, &self.hz] {
            for v in f.iter() {
                wh += MU0 * (*v as f64) * (*v as f64);
            }
        }
        0.5 * (we + wh) * self.cell.powi(3)
    }

    /// Drive the lumped port with a Gaussian-modulated pulse and record the
    /// port voltage and current. Stops early once the port response has
    /// decayed below `decay_threshold` relative to its peak.
    pub fn run_port(
        &mut self,
        pulse: &GaussianPulse,
        max_steps: usize,
    ) -> Result<TimeSeries, FdtdError> {
        if self.port.is_none() {
            return Err(FdtdError::Config("no port defined on this grid".into()));
        }
        let dt = self.dt;
        let resistance = self.port_resistance;
        let t0 = pulse.t0_s();
        let mut voltage = Vec::with_capacity(max_steps);
        let mut current = Vec::with_capacity(max_steps);
        let mut peak = 0.0f64;
        let mut quiet = 0usize;
        let mut decayed = false;
        for n in 0..max_steps {
            let vs_half = pulse.sample((n as f64 + 0.5) * dt);
            self.step(vs_half, 0.0);
            let t_new = (n as f64 + 1.0) * dt;
            let p = self.port.as_ref().unwrap();
            let v = -(self.ez[p.idx] as f64) * self.cell;
            let vs_new = pulse.sample(t_new);
            let i = (vs_new - v) / resistance;
            voltage.push(v);
            current.push(i);
            let v2 = v * v;
            peak = peak.max(v2);
            if t_new > t0 + 6.0 * pulse.tau_s() {
                if v2 < self.cfg.decay_threshold * peak {
                    quiet += 1;
                    if quiet >= self.cfg.quiet_window {
                        decayed = true;
                        break;
                    }
                } else {
                    quiet = 0;
                }
            }
            if (n + 1) % self.cfg.check_every == 0 {
                let mf = self.max_field();
                if !mf.is_finite() || mf > self.cfg.instability_limit {
                    return Err(FdtdError::Instability {
                        step: n + 1,
                        max_field: mf,
                    });
                }
            }
        }
        Ok(TimeSeries {
            port_voltage: voltage,
            port_current: current,
            excitation: *pulse,
            dt_s: dt,
            decayed,
        })
    }

    /// Run with soft sources only, recording probe samples; used for cavity
    /// and decay experiments.
    pub fn run_probes(
        &mut self,
        waveform: impl Fn(f64) -> f64,
        steps: usize,
        energy_every: usize,
    ) -> Result<(Vec<Vec<f64>>, Vec<(usize, f64)>), FdtdError> {
        let mut probe_data = vec![Vec::with_capacity(steps); self.probes.len()];
        let mut energy_log = Vec::new();
        for n in 0..steps {
            let t_new = (n as f64 + 1.0) * self.dt;
            self.step(0.0, waveform(t_new));
            for (pi, (comp, idx)) in self.probes.iter().enumerate() {
                let v = match comp {
                    FieldComponent::Ex => self.ex[*idx],
                    FieldComponent::Ey => self.ey[*idx],
                    FieldComponent::Ez => self.ez[*idx],
                };
                probe_data[pi].push(v as f64);
            }
            if energy_every > 0 && (n + 1) % energy_every == 0 {
                energy_log.push((n + 1, self.total_energy()));
            }
            if (n + 1) % self.cfg.check_every == 0 {
                let mf = self.max_field();
                if !mf.is_finite() || mf > self.cfg.instability_limit {
                    return Err(FdtdError::Instability {
                        step: n + 1,
                        max_field: mf,
                    });
                }
            }
        }
        Ok((probe_data, energy_log))
    }
}
