//! Solver-level oracles with analytically known answers: a closed PEC
//! cavity resonance, absorbing-boundary energy decay, and run determinism.

use sulfursense::fdtd::{
    Engine, EngineConfig, FieldComponent, GaussianPulse, GridBuilder, PatchScene, SimulationSpec,
    SoftSource, SuperstrateProfile,
};
use sulfursense::fdtd;
use sulfursense::stackup;

/// Direct DFT magnitude of a real sample sequence at one frequency.
fn dft_mag(samples: &[f64], dt_s: f64, f_ghz: f64) -> f64 {
    let w = -2.0 * std::f64::consts::PI * f_ghz * 1e9 * dt_s;
    let (mut re, mut im) = (0.0, 0.0);
    for (n, s) in samples.iter().enumerate() {
        // Hann window keeps truncation sidelobes from biasing the peak
        let win = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / samples.len() as f64).cos();
        let ph = w * n as f64;
        re += s * win * ph.cos();
        im += s * win * ph.sin();
    }
    (re * re + im * im).sqrt()
}

#[test]
fn pec_cube_cavity_resonates_at_te101() {
    // 15 mm PEC cube: lowest resonance sqrt(2) * c / (2a) = 14.13 GHz
    let n = 30;
    let mut b = GridBuilder::new(n, n, n, 0.5e-3, 0);
    b.pec_box(0..=n, 0..=n, 0..=n);
    let grid = b.build();
    let mut eng = Engine::new(&grid, EngineConfig::default()).unwrap();
    eng.add_soft_source(SoftSource {
        component: FieldComponent::Ez,
        i: n / 4,
        j: n / 3,
        k: n / 2,
    });
    eng.add_probe(FieldComponent::Ez, 2 * n / 3, 3 * n / 5, n / 2);
    let pulse = GaussianPulse {
        f0_ghz: 14.0,
        bandwidth_ghz: 8.0,
    };
    let dt = eng.dt();
    let (probes, _) = eng
        .run_probes(|t| pulse.sample(t), 8192, 0)
        .unwrap();
    let samples = &probes[0];
    // search the excited band for the spectral peak
    let mut best = (0.0, 0.0);
    let mut f = 12.0;
    while f <= 16.0 {
        let m = dft_mag(samples, dt, f);
        if m > best.1 {
            best = (f, m);
        }
        f += 0.02;
    }
    let expected = 2.0f64.sqrt() * 299.792_458 / (2.0 * 15.0);
    assert!(
        (best.0 - expected).abs() / expected < 0.02,
        "cavity peak at {:.3} GHz, expected {expected:.3} GHz",
        best.0
    );
}

#[test]
fn empty_domain_pml_absorbs_to_1e6() {
    let n = 50;
    let grid = GridBuilder::new(n, n, n, 0.5e-3, 10).build();
    let mut eng = Engine::new(&grid, EngineConfig::default()).unwrap();
    eng.add_soft_source(SoftSource {
        component: FieldComponent::Ez,
        i: n / 2,
        j: n / 2,
        k: n / 2,
    });
    let pulse = GaussianPulse {
        f0_ghz: 9.0,
        bandwidth_ghz: 6.0,
    };
    let (_, energy) = eng
        .run_probes(|t| pulse.sample(t), 3000, 50)
        .unwrap();
    let peak = energy.iter().map(|e| e.1).fold(0.0f64, f64::max);
    let late = energy.last().unwrap().1;
    assert!(peak > 0.0);
    assert!(
        late <= 1e-6 * peak,
        "late-time energy {late:.3e} vs peak {peak:.3e} (ratio {:.3e})",
        late / peak
    );
}

fn small_patch_spec() -> SimulationSpec {
    let (mut geom, stack) = stackup::reference_patch();
    geom.resonant_length_mm = 4.0;
    geom.width_mm = 5.0;
    geom.feed_offset_mm = 1.0;
    SimulationSpec {
        scene: PatchScene {
            geom,
            stack,
            profile: SuperstrateProfile::Uniform { t_mm: 0.0 },
            ground_plane_mm: (8.0, 7.0),
            margins_mm: 6.3,
        },
        cell_mm: 0.254,
        pml_layers: 10,
        time_steps: 1500,
        excitation: GaussianPulse {
            f0_ghz: 9.0,
            bandwidth_ghz: 6.0,
        },
        port_resistance: 50.0,
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let spec = small_patch_spec();
    let a = fdtd::run(&spec).unwrap();
    let b = fdtd::run(&spec).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sweep_output_independent_of_parallelism() {
    let mut spec = small_patch_spec();
    spec.scene.stack = spec.scene.stack.with_superstrate(3.5, 0.001, 0.0);
    let thicknesses = [0.0, 1.0, 2.0];
    let seq = fdtd::sweep_thickness(&spec, &thicknesses, 1);
    let par = fdtd::sweep_thickness(&spec, &thicknesses, 4);
    assert_eq!(seq.len(), par.len());
    for ((ta, ra), (tb, rb)) in seq.iter().zip(par.iter()) {
        assert_eq!(ta, tb);
        let (ra, rb) = (ra.as_ref().unwrap(), rb.as_ref().unwrap());
        assert_eq!(ra.frequencies_ghz(), rb.frequencies_ghz());
        assert_eq!(ra.values(), rb.values());
    }
}
