use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::beamforming::PathGain;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::signal::{complex_normal, ArrayGeometry, Path, PathSet};

/// Angular resolution constant of a half-wavelength ULA, `theta_res ~ 1.78 / (M - 1)`.
pub const RESOLUTION_CONSTANT: f64 = 1.78;

/// Attempts before separation sampling gives up.
pub const MAX_SEPARATION_ATTEMPTS: usize = 100_000;

/// Minimum pairwise `(elevation, azimuth)` separation `2 theta_res`,
/// `2 phi_res` for a receive array. Dimensions with a single element impose
/// no constraint.
pub fn min_separation(geometry: &ArrayGeometry) -> (f64, f64) {
    let res = |m: usize| {
        if m > 1 {
            2.0 * RESOLUTION_CONSTANT / (m - 1) as f64
        } else {
            0.0
        }
    };
    let az = if geometry.is_upa() {
        res(geometry.m_horizontal())
    } else {
        0.0
    };
    (res(geometry.m_vertical()), az)
}

/// True if every pair of paths is separated by at least the given amounts
/// in both elevation and azimuth.
pub fn well_separated(angles: &[(f64, f64)], sep: (f64, f64)) -> bool {
    for (i, a) in angles.iter().enumerate() {
        for b in &angles[i + 1..] {
            if (a.1 - b.1).abs() < sep.0 || (a.0 - b.0).abs() < sep.1 {
                return false;
            }
        }
    }
    true
}

/// One narrowband realization: paths, pilot and the noiseless received
/// vector `v = sum_l zeta_l a_r(phi_l, theta_l)`.
#[derive(Debug, Clone)]
pub struct NarrowbandScenario {
    pub paths: PathSet,
    /// Effective gains `zeta_l = alpha_l a_t^H s`.
    pub gains: Vec<Complex64>,
    pub pilot: DVector<Complex64>,
    pub signal: DVector<Complex64>,
}

impl NarrowbandScenario {
    /// True path parameters as seen by the receiver.
    pub fn path_gains(&self) -> Vec<PathGain> {
        self.paths
            .paths()
            .iter()
            .zip(&self.gains)
            .map(|(p, g)| PathGain {
                gain: *g,
                azimuth: p.aoa_azimuth,
                elevation: p.aoa_elevation,
            })
            .collect()
    }
}

/// Draws arrival and departure angles uniformly in `[-limit, limit]`,
/// rejecting draws whose arrival angles violate the separation constraint,
/// then scales each path so its SNR `|zeta_l|^2` matches the configuration.
pub fn generate_narrowband_scenario<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    rng: &mut R,
) -> Result<NarrowbandScenario> {
    let nb = config
        .narrowband
        .as_ref()
        .ok_or_else(|| Error::config("narrowband", "required for narrowband scenarios"))?;
    let rx = config.rx_geometry()?;
    let tx = config.tx_geometry()?;
    let limit = nb.angle_limit_deg.to_radians();
    let l = nb.paths;
    let sep = if nb.enforce_separation {
        min_separation(&rx)
    } else {
        (0.0, 0.0)
    };

    let draw = |planar: bool, rng: &mut R| {
        let az = if planar {
            rng.random_range(-limit..=limit)
        } else {
            0.0
        };
        (az, rng.random_range(-limit..=limit))
    };
    let mut attempts = 0;
    let (aoa, aod) = loop {
        if attempts == MAX_SEPARATION_ATTEMPTS {
            return Err(Error::SeparationInfeasible(attempts));
        }
        attempts += 1;
        let aoa: Vec<(f64, f64)> = (0..l).map(|_| draw(rx.is_upa(), rng)).collect();
        let aod: Vec<(f64, f64)> = (0..l).map(|_| draw(tx.is_upa(), rng)).collect();
        if l == 1 || well_separated(&aoa, sep) {
            break (aoa, aod);
        }
    };

    let alphas: Vec<Complex64> = (0..l).map(|_| complex_normal(rng)).collect();
    let pilot = DVector::from_fn(tx.len(), |_, _| complex_normal(rng));

    let mut paths = Vec::with_capacity(l);
    let mut gains = Vec::with_capacity(l);
    for i in 0..l {
        let proj = tx.response(aod[i].0, aod[i].1).dotc(&pilot);
        let raw = alphas[i] * proj;
        if raw.norm() == 0.0 {
            return Err(Error::InvalidArgument(
                "pilot is orthogonal to a transmit response".into(),
            ));
        }
        let target = 10f64.powf(nb.path_snr_db[i] / 20.0);
        let alpha = alphas[i] * (target / raw.norm());
        gains.push(alpha * proj);
        paths.push(Path::narrowband(alpha, aoa[i], aod[i]));
    }

    let mut signal = DVector::zeros(rx.len());
    for (p, g) in paths.iter().zip(&gains) {
        signal += rx.response(p.aoa_azimuth, p.aoa_elevation) * *g;
    }
    Ok(NarrowbandScenario {
        paths: PathSet::new(paths)?,
        gains,
        pilot,
        signal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::narrowband_channel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(snr: &[f64], rx: (usize, usize), tx: (usize, usize)) -> ExperimentConfig {
        let text = format!(
            "id = \"t\"\nkind = \"narrowband-upa\"\nrealizations = 1\n\
             rx = {{ horizontal = {}, vertical = {} }}\ntx = {{ horizontal = {}, vertical = {} }}\n\
             [narrowband]\npaths = {}\npath_snr_db = {:?}\nn_d = [4]\n",
            rx.0,
            rx.1,
            tx.0,
            tx.1,
            snr.len(),
            snr
        );
        ExperimentConfig::parse(&text).unwrap()
    }

    #[test]
    fn path_snr_matches_configuration() {
        let c = config(&[-18.0, -23.0, -28.0], (16, 16), (4, 4));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = generate_narrowband_scenario(&c, &mut rng).unwrap();
        for (g, db) in s.gains.iter().zip([-18.0, -23.0, -28.0]) {
            assert!((g.norm_sqr() - 10f64.powf(db / 10.0)).abs() < 1e-9 * 10f64.powf(db / 10.0));
        }
        // the received vector equals H s
        let rx = c.rx_geometry().unwrap();
        let tx = c.tx_geometry().unwrap();
        let h = narrowband_channel(&s.paths, &rx, &tx).unwrap();
        assert!((&h * &s.pilot - &s.signal).norm() < 1e-12);
        for p in s.paths.paths() {
            for a in [
                p.aoa_azimuth,
                p.aoa_elevation,
                p.aod_azimuth,
                p.aod_elevation,
            ] {
                assert!(a.abs() <= std::f64::consts::FRAC_PI_3 + 1e-15);
            }
        }
    }

    #[test]
    fn separation_holds() {
        let c = config(&[-18.0; 3], (16, 16), (4, 4));
        let rx = c.rx_geometry().unwrap();
        let sep = min_separation(&rx);
        assert!((sep.0 - 3.56 / 15.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let s = generate_narrowband_scenario(&c, &mut rng).unwrap();
            let angles: Vec<(f64, f64)> = s
                .paths
                .paths()
                .iter()
                .map(|p| (p.aoa_azimuth, p.aoa_elevation))
                .collect();
            assert!(well_separated(&angles, sep));
        }
    }

    #[test]
    fn infeasible_separation_is_reported() {
        // 2x2 receive array: 2 theta_res = 3.56 rad exceeds the angle range
        let c = config(&[-18.0; 2], (2, 2), (1, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            generate_narrowband_scenario(&c, &mut rng),
            Err(Error::SeparationInfeasible(MAX_SEPARATION_ATTEMPTS))
        ));
        let single = config(&[-18.0], (2, 2), (1, 1));
        assert!(generate_narrowband_scenario(&single, &mut rng).is_ok());
    }
}
