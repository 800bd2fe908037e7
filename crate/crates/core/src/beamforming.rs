//! Phase-shifter beamformers and post-beamforming SNR metrics.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{estimate_ula, estimate_upa, AngleEstimate, EstimatorConfig};
use crate::likelihood::Mode;
use crate::signal::{ArrayGeometry, QuantizedSnapshot};

/// Which construction produced a beamformer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scheme {
    Ideal,
    Est,
    Str,
    Wopt,
    Wunq,
    Wq,
    Wstr,
}

impl Scheme {
    pub const fn as_str(&self) -> &'static str {
        match self {
            Scheme::Ideal => "IDEAL",
            Scheme::Est => "EST",
            Scheme::Str => "STR",
            Scheme::Wopt => "WOPT",
            Scheme::Wunq => "WUNQ",
            Scheme::Wq => "WQ",
            Scheme::Wstr => "WSTR",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unit-modulus receive weights `b_m = exp(j xi_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    weights: DVector<Complex64>,
    scheme: Scheme,
}

/// `exp(j angle(z))` with `angle(0) = 0`.
#[inline]
fn unit_phase(z: Complex64) -> Complex64 {
    if z.re == 0.0 && z.im == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::from_polar(1.0, z.arg())
    }
}

impl Beamformer {
    /// Keeps only the element-wise phases of `v`.
    pub fn from_phases_of(v: &DVector<Complex64>, scheme: Scheme) -> Self {
        Self {
            weights: v.map(unit_phase),
            scheme,
        }
    }

    pub fn weights(&self) -> &DVector<Complex64> {
        &self.weights
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `b^H x`.
    pub fn combine(&self, x: &DVector<Complex64>) -> Complex64 {
        self.weights.dotc(x)
    }

    /// `|b^H x|^2`.
    pub fn power(&self, x: &DVector<Complex64>) -> f64 {
        self.combine(x).norm_sqr()
    }

    /// `b^H A b` (real for Hermitian `A`).
    pub fn quadratic_form(&self, a: &DMatrix<Complex64>) -> f64 {
        self.weights.dotc(&(a * &self.weights)).re
    }

    /// Same weights multiplied by a global phase.
    pub fn rotated(&self, phase: f64) -> Self {
        Self {
            weights: &self.weights * Complex64::from_polar(1.0, phase),
            scheme: self.scheme,
        }
    }
}

/// True narrowband path parameters for the ideal beamformer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGain {
    pub gain: Complex64,
    pub azimuth: f64,
    pub elevation: f64,
}

/// `sum_l zeta_l a(phi_l, theta_l)`.
pub fn composite_vector(terms: &[PathGain], geometry: &ArrayGeometry) -> DVector<Complex64> {
    let mut v = DVector::zeros(geometry.len());
    for t in terms {
        v += geometry.response(t.azimuth, t.elevation) * t.gain;
    }
    v
}

/// `b_IDEAL = exp(j angle(sum_l zeta_l a_l))`.
pub fn beam_ideal(paths: &[PathGain], geometry: &ArrayGeometry) -> Beamformer {
    Beamformer::from_phases_of(&composite_vector(paths, geometry), Scheme::Ideal)
}

/// `b_EST`: the ideal construction fed with estimated angles and gains.
pub fn beam_estimation(
    estimates: &[AngleEstimate],
    geometry: &ArrayGeometry,
) -> Result<Beamformer> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("no angle estimates".into()));
    }
    let terms: Vec<PathGain> = estimates
        .iter()
        .map(|e| PathGain {
            gain: e.gain,
            azimuth: e.azimuth_or_zero(),
            elevation: e.elevation,
        })
        .collect();
    Ok(Beamformer::from_phases_of(
        &composite_vector(&terms, geometry),
        Scheme::Est,
    ))
}

/// Mean `|a_l^H r[t]|^2` over slots for each candidate direction.
pub fn strong_energies(
    estimates: &[AngleEstimate],
    snapshot: &QuantizedSnapshot,
    geometry: &ArrayGeometry,
) -> Vec<f64> {
    let r = snapshot.matrix();
    let n = snapshot.n_slots().max(1) as f64;
    estimates
        .iter()
        .map(|e| {
            let b = geometry.response(e.azimuth_or_zero(), e.elevation);
            (0..snapshot.n_slots())
                .map(|t| b.dotc(&r.column(t)).norm_sqr())
                .sum::<f64>()
                / n
        })
        .collect()
}

/// `b_STR`: the single estimated direction collecting the most quantized
/// energy. Ties go to the lower path index.
pub fn beam_strong(
    estimates: &[AngleEstimate],
    snapshot: &QuantizedSnapshot,
    geometry: &ArrayGeometry,
) -> Result<Beamformer> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("no angle estimates".into()));
    }
    if snapshot.n_antennas() != geometry.len() {
        return Err(Error::Dimension("snapshot does not match geometry".into()));
    }
    let energies = strong_energies(estimates, snapshot, geometry);
    let mut best = 0;
    for (l, e) in energies.iter().enumerate() {
        if *e > energies[best] {
            best = l;
        }
    }
    let e = &estimates[best];
    Ok(Beamformer {
        weights: geometry.response(e.azimuth_or_zero(), e.elevation),
        scheme: Scheme::Str,
    })
}

/// Which observation a sample covariance was formed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovarianceSource {
    Noiseless,
    Unquantized,
    Quantized,
}

/// Hermitian sample covariance `(1/N) sum_t v[t] v[t]^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCovariance {
    matrix: DMatrix<Complex64>,
    source: CovarianceSource,
    n_slots: usize,
}

fn hermitian_part(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (a + a.adjoint()) * Complex64::from(0.5)
}

impl SampleCovariance {
    /// Wraps an externally formed matrix after checking it is Hermitian.
    pub fn from_matrix(
        matrix: DMatrix<Complex64>,
        source: CovarianceSource,
        n_slots: usize,
    ) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("covariance must be square".into()));
        }
        let scale = matrix.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
        let dev = (&matrix - matrix.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        if dev > 1e-9 * scale {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self {
            matrix: hermitian_part(&matrix),
            source,
            n_slots,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn source(&self) -> CovarianceSource {
        self.source
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn sample_covariance(
    signals: &DMatrix<Complex64>,
    source: CovarianceSource,
) -> Result<SampleCovariance> {
    let n = signals.ncols();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample covariance needs at least one slot".into(),
        ));
    }
    let raw = (signals * signals.adjoint()) / Complex64::from(n as f64);
    Ok(SampleCovariance {
        matrix: hermitian_part(&raw),
        source,
        n_slots: n,
    })
}

/// Stopping rules for [`maximize_unit_modulus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdOptions {
    pub power_iterations: usize,
    pub power_tolerance: f64,
    pub max_sweeps: usize,
    pub sweep_tolerance: f64,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            power_iterations: 500,
            power_tolerance: 1e-10,
            max_sweeps: 200,
            sweep_tolerance: 1e-9,
        }
    }
}

/// Leading eigenvector of a Hermitian PSD matrix by power iteration.
pub fn top_eigenvector(
    a: &DMatrix<Complex64>,
    iterations: usize,
    tolerance: f64,
) -> DVector<Complex64> {
    let n = a.nrows();
    // fixed start with spread phases so it is unlikely to be orthogonal to the
    // dominant eigenvector
    let mut x = DVector::from_fn(n, |m, _| {
        Complex64::from_polar(1.0, 2.399_963 * (m * m) as f64)
    });
    x /= Complex64::from(x.norm());
    let mut rayleigh = 0.0;
    for _ in 0..iterations {
        let y = a * &x;
        let norm = y.norm();
        if norm == 0.0 {
            break;
        }
        let next = y / Complex64::from(norm);
        let r = next.dotc(&(a * &next)).re;
        x = next;
        if (r - rayleigh).abs() <= tolerance * r.abs() {
            break;
        }
        rayleigh = r;
    }
    x
}

/// Result of the unit-modulus quadratic maximization with its objective trace.
#[derive(Debug, Clone)]
pub struct BcdTrace {
    pub beamformer: Beamformer,
    pub initial: f64,
    /// Objective after every coordinate update.
    pub per_update: Vec<f64>,
    /// Objective after every sweep.
    pub per_sweep: Vec<f64>,
}

/// Maximizes `b^H A b` over unit-modulus `b` by block coordinate ascent on
/// the phases, initialized from the phases of the leading eigenvector.
pub fn maximize_unit_modulus(cov: &SampleCovariance, scheme: Scheme) -> Beamformer {
    maximize_unit_modulus_traced(cov, scheme, &BcdOptions::default(), false).beamformer
}

pub fn maximize_unit_modulus_traced(
    cov: &SampleCovariance,
    scheme: Scheme,
    options: &BcdOptions,
    record_updates: bool,
) -> BcdTrace {
    let a = cov.matrix();
    let n = a.nrows();
    let v = top_eigenvector(a, options.power_iterations, options.power_tolerance);
    let mut b: Vec<Complex64> = v.iter().map(|z| unit_phase(*z)).collect();
    let bv = DVector::from_column_slice(&b);
    let mut objective = bv.dotc(&(a * &bv)).re;
    let initial = objective;
    let mut per_update = Vec::new();
    let mut per_sweep = Vec::new();

    for _ in 0..options.max_sweeps {
        let before = objective;
        for m in 0..n {
            let mut c = Complex64::new(0.0, 0.0);
            for (k, bk) in b.iter().enumerate() {
                if k != m {
                    c += a[(m, k)] * bk;
                }
            }
            if c.re != 0.0 || c.im != 0.0 {
                let new = Complex64::from_polar(1.0, c.arg());
                objective += 2.0 * ((new - b[m]).conj() * c).re;
                b[m] = new;
            }
            if record_updates {
                per_update.push(objective);
            }
        }
        per_sweep.push(objective);
        if objective - before < options.sweep_tolerance * before.abs() {
            break;
        }
    }
    BcdTrace {
        beamformer: Beamformer {
            weights: DVector::from_vec(b),
            scheme,
        },
        initial,
        per_update,
        per_sweep,
    }
}

/// `b_WOPT` from noiseless signals `x`.
pub fn beam_wopt(x: &DMatrix<Complex64>) -> Result<Beamformer> {
    Ok(maximize_unit_modulus(
        &sample_covariance(x, CovarianceSource::Noiseless)?,
        Scheme::Wopt,
    ))
}

/// `b_WUNQ` from unquantized noisy signals `z`.
pub fn beam_wunq(z: &DMatrix<Complex64>) -> Result<Beamformer> {
    Ok(maximize_unit_modulus(
        &sample_covariance(z, CovarianceSource::Unquantized)?,
        Scheme::Wunq,
    ))
}

/// `b_WQ` from the 1-bit observations.
pub fn beam_wq(snapshot: &QuantizedSnapshot) -> Result<Beamformer> {
    Ok(maximize_unit_modulus(
        &sample_covariance(&snapshot.matrix(), CovarianceSource::Quantized)?,
        Scheme::Wq,
    ))
}

/// `b_WSTR`: steer toward the single direction found by the noncoherent
/// estimator.
pub fn beam_wstrong(
    snapshot: &QuantizedSnapshot,
    geometry: &ArrayGeometry,
    config: &EstimatorConfig,
) -> Result<Beamformer> {
    let est = if geometry.is_upa() {
        estimate_upa(snapshot, geometry, 1, Mode::Noncoherent, config)?
    } else {
        estimate_ula(snapshot, 1, Mode::Noncoherent, config)?
    };
    let e = &est[0];
    Ok(Beamformer {
        weights: geometry.response(e.azimuth_or_zero(), e.elevation),
        scheme: Scheme::Wstr,
    })
}

/// Denominators below this are treated as degenerate realizations.
pub const DEGENERATE_POWER: f64 = 1e-30;

/// `|b^H x|^2 / |b_IDEAL^H x|^2`, or `None` for a degenerate realization.
pub fn power_ratio(b: &Beamformer, ideal: &Beamformer, x: &DVector<Complex64>) -> Option<f64> {
    let den = ideal.power(x);
    (den >= DEGENERATE_POWER).then(|| b.power(x) / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaReport {
    pub eta: f64,
    pub used: usize,
    pub dropped: usize,
}

/// Average SNR ratio over realizations `(b, b_IDEAL, x)`.
pub fn snr_ratio<'a, I>(realizations: I) -> Result<EtaReport>
where
    I: IntoIterator<Item = (&'a Beamformer, &'a Beamformer, &'a DVector<Complex64>)>,
{
    let (mut sum, mut used, mut dropped) = (0.0, 0usize, 0usize);
    for (b, ideal, x) in realizations {
        match power_ratio(b, ideal, x) {
            Some(r) => {
                sum += r;
                used += 1;
            }
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} degenerate realization(s) from the SNR ratio");
    }
    if used == 0 {
        return Err(Error::InvalidArgument(
            "no non-degenerate realizations".into(),
        ));
    }
    Ok(EtaReport {
        eta: sum / used as f64,
        used,
        dropped,
    })
}

/// Post-beamforming SNR in dB over a block of noiseless signals, with unit
/// noise power per antenna: `10 log10(mean_t |b^H x[t]|^2 / ||b||^2)`.
pub fn post_snr_db(b: &Beamformer, x: &DMatrix<Complex64>) -> f64 {
    let n = x.ncols().max(1) as f64;
    let signal: f64 = (0..x.ncols())
        .map(|t| b.weights.dotc(&x.column(t)).norm_sqr())
        .sum::<f64>()
        / n;
    10.0 * (signal / b.weights.norm_squared()).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{complex_normal, quantize_1bit, repeat_column};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn assert_unit_modulus(b: &Beamformer) {
        for w in b.weights().iter() {
            assert!((w.norm() - 1.0).abs() < 1e-12);
        }
    }

    fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> SampleCovariance {
        let g = DMatrix::from_fn(n, rank, |_, _| complex_normal(rng));
        sample_covariance(&g, CovarianceSource::Noiseless).unwrap()
    }

    #[test]
    fn single_path_ideal_is_phase_aligned() {
        let g = ArrayGeometry::upa(4, 4).unwrap();
        let p = PathGain {
            gain: Complex64::from_polar(0.3, 1.1),
            azimuth: 0.2,
            elevation: -0.5,
        };
        let b = beam_ideal(&[p], &g);
        assert_unit_modulus(&b);
        let a = g.response(p.azimuth, p.elevation);
        assert!((b.combine(&a).norm() - 16.0).abs() < 1e-9);

        let flat = beam_ideal(
            &[PathGain {
                gain: Complex64::from(2.0),
                azimuth: 0.0,
                elevation: 0.0,
            }],
            &g,
        );
        assert!(flat
            .weights()
            .iter()
            .all(|w| (*w - Complex64::from(1.0)).norm() < 1e-15));
    }

    #[test]
    fn ideal_beats_random_unit_modulus_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = ArrayGeometry::upa(4, 4).unwrap();
        let paths: Vec<PathGain> = (0..2)
            .map(|_| PathGain {
                gain: complex_normal(&mut rng),
                azimuth: rng.random_range(-1.0..1.0),
                elevation: rng.random_range(-1.0..1.0),
            })
            .collect();
        let v = composite_vector(&paths, &g);
        let b = beam_ideal(&paths, &g);
        let best = b.combine(&v).norm();
        for _ in 0..1000 {
            let u = DVector::from_fn(16, |_, _| {
                Complex64::from_polar(1.0, rng.random_range(-PI..PI))
            });
            assert!(u.dotc(&v).norm() <= best + 1e-12);
        }
    }

    #[test]
    fn zero_composite_element_gets_zero_phase() {
        let v = DVector::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, -2.0)]);
        let b = Beamformer::from_phases_of(&v, Scheme::Ideal);
        assert_eq!(b.weights()[0], Complex64::new(1.0, 0.0));
        assert!((b.weights()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn estimation_with_truth_is_bit_exact_ideal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = ArrayGeometry::upa(4, 4).unwrap();
        let paths: Vec<PathGain> = (0..3)
            .map(|_| PathGain {
                gain: complex_normal(&mut rng),
                azimuth: rng.random_range(-1.0..1.0),
                elevation: rng.random_range(-1.0..1.0),
            })
            .collect();
        let ests: Vec<AngleEstimate> = paths
            .iter()
            .map(|p| AngleEstimate {
                elevation: p.elevation,
                azimuth: Some(p.azimuth),
                gain: p.gain,
                coarse_index: 0,
                bracket: (-1.0, 1.0),
            })
            .collect();
        let ideal = beam_ideal(&paths, &g);
        let est = beam_estimation(&ests, &g).unwrap();
        assert_eq!(est.weights(), ideal.weights());
        assert_eq!(est.scheme(), Scheme::Est);
        assert!(beam_estimation(&[], &g).is_err());
    }

    #[test]
    fn single_estimate_is_steering_vector_up_to_phase() {
        let g = ArrayGeometry::upa(3, 5).unwrap();
        let e = AngleEstimate {
            elevation: 0.3,
            azimuth: Some(-0.7),
            gain: Complex64::from_polar(0.2, 2.2),
            coarse_index: 0,
            bracket: (0.0, 1.0),
        };
        let b = beam_estimation(&[e], &g).unwrap();
        let a = g.response(-0.7, 0.3);
        assert!((b.combine(&a).norm() - 15.0).abs() < 1e-9);
    }

    #[test]
    fn strong_beam_picks_the_dominant_path() {
        let g = ArrayGeometry::upa(8, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ests = [(0.4, -0.3), (-0.5, 0.5)].map(|(az, el)| AngleEstimate {
            elevation: el,
            azimuth: Some(az),
            gain: Complex64::new(0.0, 0.0),
            coarse_index: 0,
            bracket: (-1.0, 1.0),
        });
        let v = g.response(0.4, -0.3) * Complex64::from(0.05)
            + g.response(-0.5, 0.5) * Complex64::from(0.5);
        let z = crate::signal::add_noise(&repeat_column(&v, 20), &mut rng);
        let b = beam_strong(&ests, &quantize_1bit(&z), &g).unwrap();
        assert!((b.combine(&g.response(-0.5, 0.5)).norm() - 64.0).abs() < 1e-9);
        assert_eq!(b.scheme(), Scheme::Str);

        let single = beam_strong(&ests[..1], &quantize_1bit(&z), &g).unwrap();
        assert!((single.combine(&g.response(0.4, -0.3)).norm() - 64.0).abs() < 1e-9);
    }

    #[test]
    fn covariance_examples() {
        let u = DVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.3)]);
        let s = repeat_column(&u, 5);
        let c = sample_covariance(&s, CovarianceSource::Noiseless).unwrap();
        let expected = &u * u.adjoint();
        assert!((c.matrix() - expected).norm() < 1e-12);
        assert_eq!(c.n_slots(), 5);
        assert!(sample_covariance(&DMatrix::zeros(2, 0), CovarianceSource::Noiseless).is_err());
    }

    #[test]
    fn covariance_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = DMatrix::from_fn(4, 8, |_, _| complex_normal(&mut rng));
        let c = sample_covariance(&s, CovarianceSource::Unquantized).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..8 {
                    acc += s[(i, t)] * s[(j, t)].conj();
                }
                acc /= 8.0;
                assert!((c.matrix()[(i, j)] - acc).norm() < 1e-12);
            }
        }
        let m = c.matrix();
        assert!((m - m.adjoint()).norm() < 1e-12);
        let eig = nalgebra::DMatrix::from_fn(8, 8, |i, j| {
            // real embedding [[Re, -Im], [Im, Re]] shares the eigenvalues
            let (bi, bj) = (i / 4, j / 4);
            let v = m[(i % 4, j % 4)];
            match (bi, bj) {
                (0, 0) | (1, 1) => v.re,
                (0, 1) => -v.im,
                _ => v.im,
            }
        })
        .symmetric_eigenvalues();
        assert!(eig.iter().all(|e| *e >= -1e-9 * m.trace().re));
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut a = DMatrix::<Complex64>::identity(3, 3);
        a[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(matches!(
            SampleCovariance::from_matrix(a, CovarianceSource::Noiseless, 1),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn identity_keeps_initializer() {
        let cov =
            SampleCovariance::from_matrix(DMatrix::identity(5, 5), CovarianceSource::Noiseless, 1)
                .unwrap();
        let t = maximize_unit_modulus_traced(&cov, Scheme::Wopt, &BcdOptions::default(), true);
        let v = top_eigenvector(cov.matrix(), 500, 1e-10);
        let init = Beamformer::from_phases_of(&v, Scheme::Wopt);
        assert_eq!(t.beamformer.weights(), init.weights());
        assert!((t.per_sweep[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = DVector::from_fn(12, |_, _| {
            Complex64::from_polar(1.0, rng.random_range(-PI..PI))
        });
        let cov = SampleCovariance::from_matrix(&v * v.adjoint(), CovarianceSource::Noiseless, 1)
            .unwrap();
        let b = maximize_unit_modulus(&cov, Scheme::Wopt);
        assert_unit_modulus(&b);
        assert!((b.quadratic_form(cov.matrix()) - 144.0).abs() < 1e-9);
    }

    fn quadratic(a: &DMatrix<Complex64>, phases: [f64; 3]) -> f64 {
        let b = DVector::from_fn(3, |i, _| Complex64::from_polar(1.0, phases[i]));
        b.dotc(&(a * &b)).re
    }

    #[test]
    fn bcd_matches_exhaustive_phase_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for trial in 0..5 {
            let cov = random_psd(3, 1 + trial % 3, &mut rng);
            let a = cov.matrix();
            let bcd = maximize_unit_modulus(&cov, Scheme::Wopt).quadratic_form(a);

            // exhaustive 0.5 degree grid with the first phase fixed at 0
            let step = 0.5f64.to_radians();
            let n = 720;
            let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let (p1, p2) = (i as f64 * step, j as f64 * step);
                    let f = quadratic(a, [0.0, p1, p2]);
                    if f > best.0 {
                        best = (f, p1, p2);
                    }
                }
            }
            assert!(
                bcd >= best.0 * (1.0 - 1e-6),
                "trial {trial}: bcd {bcd} grid {}",
                best.0
            );

            // polish the grid optimum on a fine local grid
            let fine = 0.001f64.to_radians();
            let mut polished = best.0;
            for i in -500..=500 {
                for j in -500..=500 {
                    let f = quadratic(a, [0.0, best.1 + i as f64 * fine, best.2 + j as f64 * fine]);
                    polished = polished.max(f);
                }
            }
            assert!(
                (bcd - polished).abs() <= 1e-6 * polished,
                "trial {trial}: bcd {bcd} polished {polished}"
            );
        }
    }

    #[test]
    fn bcd_objective_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cov = random_psd(24, 6, &mut rng);
        let t = maximize_unit_modulus_traced(&cov, Scheme::Wopt, &BcdOptions::default(), true);
        let mut prev = t.initial;
        for f in &t.per_update {
            assert!(*f >= prev - 1e-9 * prev.abs());
            prev = *f;
        }
        let direct = t.beamformer.quadratic_form(cov.matrix());
        assert!((direct - t.per_sweep.last().unwrap()).abs() < 1e-8 * direct);
        assert!(t.per_sweep.len() <= 200);
        assert_unit_modulus(&t.beamformer);
    }

    #[test]
    fn global_phase_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cov = random_psd(6, 2, &mut rng);
        let b = maximize_unit_modulus(&cov, Scheme::Wopt);
        let r = b.rotated(1.234);
        let (f, g) = (
            b.quadratic_form(cov.matrix()),
            r.quadratic_form(cov.matrix()),
        );
        assert!((f - g).abs() < 1e-12 * f.abs());
        let x = DVector::from_fn(6, |_, _| complex_normal(&mut rng));
        let ideal = Beamformer::from_phases_of(&x, Scheme::Ideal);
        let e1 = power_ratio(&b, &ideal, &x).unwrap();
        let e2 = power_ratio(&r, &ideal.rotated(-0.5), &x).unwrap();
        assert!((e1 - e2).abs() < 1e-12);
    }

    #[test]
    fn wideband_beams_on_single_path() {
        let g = ArrayGeometry::upa(4, 4).unwrap();
        let a = g.response(0.3, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let s = DVector::from_fn(30, |_, _| complex_normal(&mut rng));
        let x = &a * s.transpose();
        let wopt = beam_wopt(&x).unwrap();
        assert!((wopt.combine(&a).norm() - 16.0).abs() < 1e-6);
        assert_eq!(wopt.scheme(), Scheme::Wopt);

        // vanishing noise: the unquantized beam approaches the optimal direction
        let z =
            &x * Complex64::from(1e6) + DMatrix::from_fn(16, 30, |_, _| complex_normal(&mut rng));
        let wunq = beam_wunq(&z).unwrap();
        assert!((wunq.combine(&a).norm() - 16.0).abs() < 1e-4);

        let wq = beam_wq(&quantize_1bit(&x)).unwrap();
        assert_unit_modulus(&wq);
        assert_eq!(wq.scheme(), Scheme::Wq);
    }

    #[test]
    fn wstrong_on_pure_noise_still_returns_unit_modulus_beam() {
        let g = ArrayGeometry::upa(4, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = crate::signal::add_noise(&DMatrix::zeros(16, 8), &mut rng);
        let b = beam_wstrong(&quantize_1bit(&z), &g, &EstimatorConfig::default()).unwrap();
        assert_unit_modulus(&b);
        assert_eq!(b.scheme(), Scheme::Wstr);
    }

    #[test]
    fn snr_ratio_examples() {
        let g = ArrayGeometry::upa(4, 4).unwrap();
        let x = g.response(0.2, 0.1) * Complex64::from_polar(0.3, 0.5);
        let ideal = Beamformer::from_phases_of(&x, Scheme::Ideal);
        let r = snr_ratio([(&ideal, &ideal, &x)]).unwrap();
        assert_eq!(r.eta, 1.0);

        // orthogonal: a(0, 0) against a path whose vertical phase cycles fully
        let ula = ArrayGeometry::ula(4).unwrap();
        let v = ula.response(0.0, (0.5f64).asin());
        let ortho = Beamformer::from_phases_of(&ula.response(0.0, 0.0), Scheme::Str);
        let ideal = Beamformer::from_phases_of(&v, Scheme::Ideal);
        let r = snr_ratio([(&ortho, &ideal, &v)]).unwrap();
        assert!(r.eta.abs() < 1e-24);

        let zero = DVector::zeros(4);
        let r = snr_ratio([(&ortho, &ideal, &v), (&ortho, &ideal, &zero)]).unwrap();
        assert_eq!(r.dropped, 1);
        assert_eq!(r.used, 1);
        assert!(snr_ratio([(&ortho, &ideal, &zero)]).is_err());
    }

    #[test]
    fn post_snr_uses_per_antenna_noise() {
        let g = ArrayGeometry::ula(8).unwrap();
        let a = g.response(0.0, 0.4);
        let x = repeat_column(&a, 3);
        let b = Beamformer::from_phases_of(&a, Scheme::Wopt);
        // |b^H a|^2 / ||b||^2 = 64 / 8
        assert!((post_snr_db(&b, &x) - 10.0 * 8f64.log10()).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn ideal_ratio_never_exceeds_one(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = ArrayGeometry::upa(3, 3).unwrap();
            let paths: Vec<PathGain> = (0..3).map(|_| PathGain {
                gain: complex_normal(&mut rng),
                azimuth: rng.random_range(-1.5..1.5),
                elevation: rng.random_range(-1.5..1.5),
            }).collect();
            let v = composite_vector(&paths, &g);
            let ideal = beam_ideal(&paths, &g);
            let probe = Beamformer::from_phases_of(&DVector::from_fn(9, |_, _| complex_normal(&mut rng)), Scheme::Est);
            if let Some(r) = power_ratio(&probe, &ideal, &v) {
                proptest::prop_assert!(r <= 1.0 + 1e-9);
            }
        }
    }
}
