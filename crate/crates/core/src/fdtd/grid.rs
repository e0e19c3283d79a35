//! Voxelized Yee grid: per-edge material arrays, PEC sheets and edges, the
//! lumped port location, and the cell-centered builder that produces them.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldComponent {
    Ex,
    Ey,
    Ez,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Port {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub resistance: f64,
}

/// Structural indices recorded by the scene voxelizer, used by layout
/// checks and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneLayout {
    pub k_ground: usize,
    pub k_patch: usize,
    pub deposit_x0: usize,
    pub deposit_nx: usize,
    pub deposit_y0: usize,
    pub deposit_ny: usize,
    pub deposit_nz: usize,
}

/// Uniform-cell Yee grid with per-E-edge inverse permittivity (zero marks
/// PEC) and conductivity. Arrays are node-sized for all components; index
/// order is (i, j, k) with k contiguous.
#[derive(Debug, Clone)]
pub struct YeeGrid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Uniform cell edge, meters.
    pub cell_m: f64,
    pub npml: usize,
    pub eps_inv_x: Vec<f32>,
    pub eps_inv_y: Vec<f32>,
    pub eps_inv_z: Vec<f32>,
    pub sigma_x: Vec<f32>,
    pub sigma_y: Vec<f32>,
    pub sigma_z: Vec<f32>,
    pub port: Option<Port>,
    pub layout: Option<SceneLayout>,
}

impl YeeGrid {
    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1) * (self.nz + 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * (self.ny + 1) + j) * (self.nz + 1) + k
    }

    pub fn substrate_cells(&self) -> Option<usize> {
        self.layout.map(|l| l.k_patch - l.k_ground)
    }

    pub fn same_materials(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.nz == other.nz
            && self.eps_inv_x == other.eps_inv_x
            && self.eps_inv_y == other.eps_inv_y
            && self.eps_inv_z == other.eps_inv_z
            && self.sigma_x == other.sigma_x
            && self.sigma_y == other.sigma_y
            && self.sigma_z == other.sigma_z
    }

    /// True when every deposit column above the patch plane carries an
    /// identical material profile (uniform-deposit check).
    pub fn superstrate_columns_uniform(&self) -> bool {
        let Some(l) = self.layout else { return false };
        if l.deposit_nz == 0 {
            return true;
        }
        // Compare Ez-edge permittivity columns inside the deposit interior
        // (Ez edges at cell k + 1/2 see a single layer).
        let i0 = l.deposit_x0 + 1;
        let j0 = l.deposit_y0 + 1;
        let ref_col: Vec<f32> = (l.k_patch..l.k_patch + l.deposit_nz)
            .map(|k| self.eps_inv_z[self.idx(i0, j0, k)])
            .collect();
        for i in i0..l.deposit_x0 + l.deposit_nx {
            for j in j0..l.deposit_y0 + l.deposit_ny {
                for (off, k) in (l.k_patch..l.k_patch + l.deposit_nz).enumerate() {
                    if self.eps_inv_z[self.idx(i, j, k)] != ref_col[off] {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Grid mirrored across the plane x = nx/2 (the feed plane for a
    /// centered feed), port index included.
    pub fn mirrored_x(&self) -> Self {
        let mut g = self.clone();
        let nx = self.nx;
        for i in 0..=nx {
            for j in 0..=self.ny {
                for k in 0..=self.nz {
                    let src = self.idx(i, j, k);
                    // Ex edges live at i + 1/2: the mirror of edge i is
                    // edge nx - 1 - i; integer-positioned components map
                    // i -> nx - i.
                    if i < nx {
                        let dst = self.idx(nx - 1 - i, j, k);
                        g.eps_inv_x[dst] = self.eps_inv_x[src];
                        g.sigma_x[dst] = self.sigma_x[src];
                    }
                    let dst = self.idx(nx - i, j, k);
                    g.eps_inv_y[dst] = self.eps_inv_y[src];
                    g.sigma_y[dst] = self.sigma_y[src];
                    g.eps_inv_z[dst] = self.eps_inv_z[src];
                    g.sigma_z[dst] = self.sigma_z[src];
                }
            }
        }
        if let Some(p) = &mut g.port {
            p.i = nx - p.i;
        }
        g
    }
}

/// Cell-centered material painter that finalizes into per-edge arrays by
/// averaging the four cells adjacent to each edge.
pub struct GridBuilder {
    nx: usize,
    ny: usize,
    nz: usize,
    cell_m: f64,
    npml: usize,
    eps: Vec<f64>,
    sigma: Vec<f64>,
    touched: Vec<bool>,
    pec_x: Vec<bool>,
    pec_y: Vec<bool>,
    pec_z: Vec<bool>,
    port: Option<Port>,
    layout: Option<SceneLayout>,
    extra_edge_sigma: Vec<(usize, f64)>,
}

impl GridBuilder {
    pub fn new(nx: usize, ny: usize, nz: usize, cell_m: f64, npml: usize) -> Self {
        let cells = nx * ny * nz;
        let nodes = (nx + 1) * (ny + 1) * (nz + 1);
        Self {
            nx,
            ny,
            nz,
            cell_m,
            npml,
            eps: vec![1.0; cells],
            sigma: vec![0.0; cells],
            touched: vec![false; cells],
            pec_x: vec![false; nodes],
            pec_y: vec![false; nodes],
            pec_z: vec![false; nodes],
            port: None,
            layout: None,
            extra_edge_sigma: Vec::new(),
        }
    }

    #[inline]
    fn cidx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ny + j) * self.nz + k
    }

    #[inline]
    fn nidx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * (self.ny + 1) + j) * (self.nz + 1) + k
    }

    pub fn fill_cells(
        &mut self,
        xr: std::ops::Range<usize>,
        yr: std::ops::Range<usize>,
        zr: std::ops::Range<usize>,
        eps_r: f64,
        sigma: f64,
    ) {
        for i in xr {
            for j in yr.clone() {
                for k in zr.clone() {
                    let c = self.cidx(i, j, k);
                    self.eps[c] = eps_r;
                    self.sigma[c] = sigma;
                    self.touched[c] = true;
                }
            }
        }
    }

    /// Assign material to every cell not explicitly painted yet.
    pub fn fill_default(&mut self, eps_r: f64, sigma: f64) {
        for c in 0..self.eps.len() {
            if !self.touched[c] {
                self.eps[c] = eps_r;
                self.sigma[c] = sigma;
            }
        }
    }

    /// PEC sheet in the plane z = k covering the node rectangle.
    pub fn pec_sheet_z(
        &mut self,
        k: usize,
        xr: std::ops::RangeInclusive<usize>,
        yr: std::ops::RangeInclusive<usize>,
    ) {
        let (x0, x1) = (*xr.start(), *xr.end());
        let (y0, y1) = (*yr.start(), *yr.end());
        for i in x0..x1 {
            for j in y0..=y1 {
                let n = self.nidx(i, j, k);
                self.pec_x[n] = true;
            }
        }
        for i in x0..=x1 {
            for j in y0..y1 {
                let n = self.nidx(i, j, k);
                self.pec_y[n] = true;
            }
        }
    }

    pub fn pec_edge(&mut self, comp: FieldComponent, i: usize, j: usize, k: usize) {
        let n = self.nidx(i, j, k);
        match comp {
            FieldComponent::Ex => self.pec_x[n] = true,
            FieldComponent::Ey => self.pec_y[n] = true,
            FieldComponent::Ez => self.pec_z[n] = true,
        }
    }

    /// Closed PEC box on the faces of the node-aligned cuboid.
    pub fn pec_box(
        &mut self,
        xr: std::ops::RangeInclusive<usize>,
        yr: std::ops::RangeInclusive<usize>,
        zr: std::ops::RangeInclusive<usize>,
    ) {
        let (x0, x1) = (*xr.start(), *xr.end());
        let (y0, y1) = (*yr.start(), *yr.end());
        let (z0, z1) = (*zr.start(), *zr.end());
        for k in [z0, z1] {
            self.pec_sheet_z(k, x0..=x1, y0..=y1);
        }
        // vertical faces: tangential Ez and the in-plane horizontal component
        for i in [x0, x1] {
            for j in y0..=y1 {
                for k in z0..z1 {
                    self.pec_edge(FieldComponent::Ez, i, j, k);
                }
            }
            for j in y0..y1 {
                for k in z0..=z1 {
                    self.pec_edge(FieldComponent::Ey, i, j, k);
                }
            }
        }
        for j in [y0, y1] {
            for i in x0..=x1 {
                for k in z0..z1 {
                    self.pec_edge(FieldComponent::Ez, i, j, k);
                }
            }
            for i in x0..x1 {
                for k in z0..=z1 {
                    self.pec_edge(FieldComponent::Ex, i, j, k);
                }
            }
        }
    }

    /// Lumped resistor across a z-directed edge, realized as edge
    /// conductivity with R = Δz / (σ·Δx·Δy).
    pub fn lumped_resistor_z(&mut self, i: usize, j: usize, k: usize, ohms: f64) {
        // painted onto the edge at finalize time
        self.extra_edge_sigma.push((self.nidx(i, j, k), self.cell_m / (ohms * self.cell_m * self.cell_m)));
    }

    pub fn set_port(&mut self, i: usize, j: usize, k: usize, resistance: f64) {
        self.port = Some(Port {
            i,
            j,
            k,
            resistance,
        });
    }

    pub fn set_layout(&mut self, layout: SceneLayout) {
        self.layout = Some(layout);
    }

    pub fn build(self) -> YeeGrid {
        let nodes = (self.nx + 1) * (self.ny + 1) * (self.nz + 1);
        let mut eps_inv_x = vec![0.0f32; nodes];
        let mut eps_inv_y = vec![0.0f32; nodes];
        let mut eps_inv_z = vec![0.0f32; nodes];
        let mut sigma_x = vec![0.0f32; nodes];
        let mut sigma_y = vec![0.0f32; nodes];
        let mut sigma_z = vec![0.0f32; nodes];
        let clamp = |v: usize, hi: usize| v.min(hi - 1);
        for i in 0..=self.nx {
            for j in 0..=self.ny {
                for k in 0..=self.nz {
                    let n = self.nidx(i, j, k);
                    // Ex edge (i+1/2, j, k): cells (i, j-1..j, k-1..k)
                    if i < self.nx && !self.pec_x[n] {
                        let (mut e, mut s) = (0.0, 0.0);
                        for jj in [j.saturating_sub(1), clamp(j, self.ny)] {
                            for kk in [k.saturating_sub(1), clamp(k, self.nz)] {
                                let c = self.cidx(i, jj.min(self.ny - 1), kk.min(self.nz - 1));
                                e += self.eps[c];
                                s += self.sigma[c];
                            }
                        }
                        eps_inv_x[n] = (4.0 / e) as f32;
                        sigma_x[n] = (s / 4.0) as f32;
                    }
                    // Ey edge (i, j+1/2, k): cells (i-1..i, j, k-1..k)
                    if j < self.ny && !self.pec_y[n] {
                        let (mut e, mut s) = (0.0, 0.0);
                        for ii in [i.saturating_sub(1), clamp(i, self.nx)] {
                            for kk in [k.saturating_sub(1), clamp(k, self.nz)] {
                                let c = self.cidx(ii.min(self.nx - 1), j, kk.min(self.nz - 1));
                                e += self.eps[c];
                                s += self.sigma[c];
                            }
                        }
                        eps_inv_y[n] = (4.0 / e) as f32;
                        sigma_y[n] = (s / 4.0) as f32;
                    }
                    // Ez edge (i, j, k+1/2): cells (i-1..i, j-1..j, k)
                    if k < self.nz && !self.pec_z[n] {
                        let (mut e, mut s) = (0.0, 0.0);
                        for ii in [i.saturating_sub(1), clamp(i, self.nx)] {
                            for jj in [j.saturating_sub(1), clamp(j, self.ny)] {
                                let c = self.cidx(ii.min(self.nx - 1), jj.min(self.ny - 1), k);
                                e += self.eps[c];
                                s += self.sigma[c];
                            }
                        }
                        eps_inv_z[n] = (4.0 / e) as f32;
                        sigma_z[n] = (s / 4.0) as f32;
                    }
                }
            }
        }
        for (n, s) in &self.extra_edge_sigma {
            sigma_z[*n] += *s as f32;
        }
        YeeGrid {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            cell_m: self.cell_m,
            npml: self.npml,
            eps_inv_x,
            eps_inv_y,
            eps_inv_z,
            sigma_x,
            sigma_y,
            sigma_z,
            port: self.port,
            layout: self.layout,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_permittivity_averages_adjacent_cells() {
        let mut b = GridBuilder::new(4, 4, 4, 1e-3, 0);
        b.fill_cells(0..4, 0..4, 0..2, 4.0, 0.0);
        let g = b.build();
        // Ez edge inside the slab
        let n = g.idx(2, 2, 0);
        assert!((g.eps_inv_z[n] - 0.25).abs() < 1e-6);
        // Ex edge on the interface plane z = 2 averages 4.0 and 1.0
        let n = g.idx(1, 2, 2);
        assert!((g.eps_inv_x[n] - 1.0 / 2.5).abs() < 1e-6);
    }

    #[test]
    fn pec_sheet_zeroes_tangential_edges() {
        let mut b = GridBuilder::new(4, 4, 4, 1e-3, 0);
        b.pec_sheet_z(2, 1..=3, 1..=3);
        let g = b.build();
        assert_eq!(g.eps_inv_x[g.idx(1, 2, 2)], 0.0);
        assert_eq!(g.eps_inv_y[g.idx(2, 1, 2)], 0.0);
        // normal component untouched
        assert!(g.eps_inv_z[g.idx(2, 2, 2)] > 0.0);
    }

    #[test]
    fn mirror_is_involutive() {
        let mut b = GridBuilder::new(6, 4, 4, 1e-3, 0);
        b.fill_cells(0..2, 1..3, 1..3, 3.0, 0.1);
        b.set_port(2, 2, 1, 50.0);
        let g = b.build();
        let gm = g.mirrored_x().mirrored_x();
        assert!(g.same_materials(&gm));
        assert_eq!(g.port, gm.port);
    }
}
