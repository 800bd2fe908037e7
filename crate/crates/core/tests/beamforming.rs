use num_complex::Complex64;
use rand::Rng;

use onebit_core::beamforming::{beam_strong, beam_wstrong, strong_energies, Scheme};
use onebit_core::estimation::{estimate_upa, AngleEstimate, EstimatorConfig};
use onebit_core::harness::{qpsk_pilots, realization_rng};
use onebit_core::likelihood::Mode;
use onebit_core::signal::{
    add_noise, complex_normal, convolve, quantize_1bit, realize_cdlc, repeat_column, ArrayGeometry,
    CdlCProfile, CdlConfig,
};

fn truth_estimate(azimuth: f64, elevation: f64) -> AngleEstimate {
    AngleEstimate {
        elevation,
        azimuth: Some(azimuth),
        gain: Complex64::new(0.0, 0.0),
        coarse_index: 0,
        bracket: (-1.0, 1.0),
    }
}

/// Index of the candidate `beam_strong` picked, recovered from its weights.
fn selected(
    b: &onebit_core::beamforming::Beamformer,
    geom: &ArrayGeometry,
    cands: &[AngleEstimate],
) -> usize {
    let mut best = (0, 0.0);
    for (i, c) in cands.iter().enumerate() {
        let g = b
            .combine(&geom.response(c.azimuth_or_zero(), c.elevation))
            .norm();
        if g > best.1 {
            best = (i, g);
        }
    }
    best.0
}

#[test]
fn strong_beam_picks_a_dominant_path() {
    let geom = ArrayGeometry::upa(8, 8).unwrap();
    let mut hits = 0;
    for seed in 0..100 {
        let mut rng = realization_rng(seed, 0);
        let angles: Vec<(f64, f64)> = vec![(-0.6, -0.5), (0.1, 0.0), (0.7, 0.6)];
        // path 1 is 20 dB above the other two
        let snr_db = [-20.0, 0.0, -20.0];
        let mut v = nalgebra::DVector::zeros(64);
        for ((az, el), db) in angles.iter().zip(snr_db) {
            let g = complex_normal(&mut rng);
            v += geom.response(*az, *el) * (g / g.norm() * 10f64.powf(db / 20.0));
        }
        let q = quantize_1bit(&add_noise(&repeat_column(&v, 40), &mut rng));
        let cands: Vec<AngleEstimate> = angles
            .iter()
            .map(|(az, el)| truth_estimate(*az, *el))
            .collect();
        let b = beam_strong(&cands, &q, &geom).unwrap();
        assert_eq!(b.scheme(), Scheme::Str);
        if selected(&b, &geom, &cands) == 1 {
            hits += 1;
        }
    }
    assert!(hits >= 99, "dominant path chosen in {hits}/100 trials");
}

#[test]
fn equal_paths_are_chosen_uniformly() {
    // orthogonal responses: sin(theta) differ by 2 / M
    let geom = ArrayGeometry::ula(16).unwrap();
    let cands = [
        truth_estimate(0.0, 0.0),
        truth_estimate(0.0, (0.25f64).asin()),
    ];
    let (a0, a1) = (
        geom.response(0.0, cands[0].elevation),
        geom.response(0.0, cands[1].elevation),
    );
    assert!(a0.dotc(&a1).norm() < 1e-9);
    let mut first = 0;
    let trials = 500;
    for seed in 0..trials {
        let mut rng = realization_rng(seed, 1);
        let amp = 10f64.powf(-10.0 / 20.0);
        let g0 = Complex64::from_polar(amp, rng.random_range(-3.2..3.2));
        let g1 = Complex64::from_polar(amp, rng.random_range(-3.2..3.2));
        let v = &a0 * g0 + &a1 * g1;
        let q = quantize_1bit(&add_noise(&repeat_column(&v, 20), &mut rng));
        let b = beam_strong(&cands, &q, &geom).unwrap();
        let e = strong_energies(&cands, &q, &geom);
        let pick = selected(&b, &geom, &cands);
        assert_eq!(pick, if e[1] > e[0] { 1 } else { 0 });
        if pick == 0 {
            first += 1;
        }
    }
    let rate = first as f64 / trials as f64;
    assert!(
        (rate - 0.5).abs() <= 0.1,
        "first path chosen at rate {rate}"
    );
}

const SINGLE_CLUSTER: &str = r#"
[profile]
name = "single"
source = "test fixture"
c_asd_deg = 0.0
c_asa_deg = 0.0
c_zsd_deg = 0.0
c_zsa_deg = 0.0
ray_offsets = [0.0447, -0.0447]

[[cluster]]
delay = 0.0
power_db = 0.0
aoa_az_deg = 20.0
aoa_zen_deg = 80.0
aod_az_deg = 0.0
aod_zen_deg = 90.0
"#;

#[test]
fn wideband_strong_beam_finds_a_single_cluster() {
    let profile = CdlCProfile::parse(SINGLE_CLUSTER).unwrap();
    let rx = ArrayGeometry::upa(8, 8).unwrap();
    let tx = ArrayGeometry::upa(1, 1).unwrap();
    let (az, el) = (20f64.to_radians(), 10f64.to_radians());
    let cfg = EstimatorConfig::default();
    for seed in 0..5 {
        let mut rng = realization_rng(seed, 0);
        let mut ch = realize_cdlc(&profile, &mut rng, &rx, &tx, &CdlConfig::default()).unwrap();
        let e = ch.energy();
        ch.scale((64.0 / e).sqrt());
        let x = convolve(&ch, &qpsk_pilots(1, 64, &mut rng)).unwrap()
            * Complex64::from(10f64.powf(-6.0 / 20.0));
        let q = quantize_1bit(&add_noise(&x, &mut rng));

        let est = estimate_upa(&q, &rx, 1, Mode::Noncoherent, &cfg).unwrap();
        assert!(
            (est[0].elevation - el).abs() < 0.05,
            "seed {seed}: elevation {}",
            est[0].elevation
        );
        assert!(
            (est[0].azimuth.unwrap() - az).abs() < 0.05,
            "seed {seed}: azimuth {:?}",
            est[0].azimuth
        );

        let b = beam_wstrong(&q, &rx, &cfg).unwrap();
        let expected = rx.response(est[0].azimuth.unwrap(), est[0].elevation);
        assert_eq!(b.weights(), &expected);
    }
}
