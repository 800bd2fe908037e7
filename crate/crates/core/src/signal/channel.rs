//! Path sets, channel matrices, received-signal synthesis and noise.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::array::ArrayGeometry;
use crate::error::{Error, Result};

/// One propagation path: coefficient, delay and arrival/departure angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub alpha: Complex64,
    /// Seconds.
    pub delay: f64,
    pub aoa_azimuth: f64,
    pub aoa_elevation: f64,
    pub aod_azimuth: f64,
    pub aod_elevation: f64,
}

impl Path {
    /// Zero-delay path.
    pub fn narrowband(alpha: Complex64, aoa: (f64, f64), aod: (f64, f64)) -> Self {
        Self {
            alpha,
            delay: 0.0,
            aoa_azimuth: aoa.0,
            aoa_elevation: aoa.1,
            aod_azimuth: aod.0,
            aod_elevation: aod.1,
        }
    }
}

/// Ground-truth propagation paths of a channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    paths: Vec<Path>,
}

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidArgument(
                "a path set needs at least one path".into(),
            ));
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn paths_mut(&mut self) -> &mut [Path] {
        &mut self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// `H = sum_l alpha_l a_r(phi_l, theta_l) a_t(omega_l, psi_l)^H`.
pub fn narrowband_channel(
    paths: &PathSet,
    rx: &ArrayGeometry,
    tx: &ArrayGeometry,
) -> Result<DMatrix<Complex64>> {
    let mut h = DMatrix::zeros(rx.len(), tx.len());
    for (l, p) in paths.paths().iter().enumerate() {
        if p.delay != 0.0 {
            return Err(Error::NonzeroDelay {
                path: l,
                delay: p.delay,
            });
        }
        let ar = rx.response(p.aoa_azimuth, p.aoa_elevation);
        let at = tx.response(p.aod_azimuth, p.aod_elevation);
        h += (ar * at.adjoint()) * p.alpha;
    }
    Ok(h)
}

/// Raised-cosine pulse truncated to `span` chips and delayed by `span / 2`
/// chips so that every tap index is causal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaisedCosine {
    pub rolloff: f64,
    pub span: usize,
}

impl Default for RaisedCosine {
    fn default() -> Self {
        Self {
            rolloff: 0.22,
            span: 8,
        }
    }
}

impl RaisedCosine {
    /// Centered raised cosine at `t` chips.
    pub fn centered(&self, t: f64) -> f64 {
        let beta = self.rolloff;
        let sinc = |x: f64| {
            if x.abs() < 1e-12 {
                1.0
            } else {
                (PI * x).sin() / (PI * x)
            }
        };
        if beta > 0.0 && ((2.0 * beta * t).abs() - 1.0).abs() < 1e-9 {
            return PI / 4.0 * sinc(1.0 / (2.0 * beta));
        }
        sinc(t) * (PI * beta * t).cos() / (1.0 - (2.0 * beta * t).powi(2))
    }

    /// `p(t)` in chips, including the causal offset and truncation.
    pub fn eval(&self, t: f64) -> f64 {
        let half = self.span as f64 / 2.0;
        let c = t - half;
        if c.abs() > half {
            0.0
        } else {
            self.centered(c)
        }
    }
}

/// Tapped-delay-line MIMO channel `H[0], ..., H[D-1]`.
#[derive(Debug, Clone)]
pub struct WidebandChannel {
    taps: Vec<DMatrix<Complex64>>,
    chip_duration: f64,
    pulse: RaisedCosine,
}

impl WidebandChannel {
    pub fn new(
        taps: Vec<DMatrix<Complex64>>,
        chip_duration: f64,
        pulse: RaisedCosine,
    ) -> Result<Self> {
        let Some(first) = taps.first() else {
            return Err(Error::InvalidArgument(
                "a wideband channel needs at least one tap".into(),
            ));
        };
        let shape = first.shape();
        if taps.iter().any(|t| t.shape() != shape) {
            return Err(Error::Dimension("all taps must share one shape".into()));
        }
        Ok(Self {
            taps,
            chip_duration,
            pulse,
        })
    }

    /// Builds taps from delayed paths via `H[d] = sum_l alpha_l a_r a_t^H p(dT - delta_l)`.
    pub fn from_paths(
        paths: &PathSet,
        rx: &ArrayGeometry,
        tx: &ArrayGeometry,
        chip_duration: f64,
        pulse: RaisedCosine,
    ) -> Result<Self> {
        let max_delay = paths.paths().iter().map(|p| p.delay).fold(0.0, f64::max);
        let n_taps = (max_delay / chip_duration).ceil() as usize + pulse.span + 1;
        let mut taps = vec![DMatrix::zeros(rx.len(), tx.len()); n_taps];
        for p in paths.paths() {
            let outer = rx.response(p.aoa_azimuth, p.aoa_elevation)
                * tx.response(p.aod_azimuth, p.aod_elevation).adjoint()
                * p.alpha;
            let shift = p.delay / chip_duration;
            for (d, tap) in taps.iter_mut().enumerate() {
                let w = pulse.eval(d as f64 - shift);
                if w != 0.0 {
                    *tap += &outer * Complex64::from(w);
                }
            }
        }
        Self::new(taps, chip_duration, pulse)
    }

    pub fn taps(&self) -> &[DMatrix<Complex64>] {
        &self.taps
    }

    pub fn n_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn rx_len(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn tx_len(&self) -> usize {
        self.taps[0].ncols()
    }

    pub fn chip_duration(&self) -> f64 {
        self.chip_duration
    }

    pub fn pulse(&self) -> RaisedCosine {
        self.pulse
    }

    /// `sum_d ||H[d]||_F^2`.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_squared()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.taps {
            *t *= Complex64::from(factor);
        }
    }
}

/// Noiseless output `x[tau] = sum_d H[d] s[tau - d]`, zero pilot history
/// before the first slot.
pub fn convolve(
    channel: &WidebandChannel,
    pilots: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    if pilots.nrows() != channel.tx_len() {
        return Err(Error::Dimension(format!(
            "pilots have {} rows, channel expects {}",
            pilots.nrows(),
            channel.tx_len()
        )));
    }
    let n = pilots.ncols();
    let mut x = DMatrix::zeros(channel.rx_len(), n);
    for (d, tap) in channel.taps().iter().enumerate() {
        if tap.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
            continue;
        }
        for t in d..n {
            let s = pilots.column(t - d);
            x.column_mut(t)
                .gemv(Complex64::from(1.0), tap, &s, Complex64::from(1.0));
        }
    }
    Ok(x)
}

/// Noiseless and noisy observations of one pilot block.
#[derive(Debug, Clone)]
pub struct Received {
    pub x: DMatrix<Complex64>,
    pub z: DMatrix<Complex64>,
}

pub fn wideband_receive<R: Rng + ?Sized>(
    channel: &WidebandChannel,
    pilots: &DMatrix<Complex64>,
    rng: &mut R,
) -> Result<Received> {
    let x = convolve(channel, pilots)?;
    let z = add_noise(&x, rng);
    Ok(Received { x, z })
}

/// One draw from CN(0, 1): real and imaginary parts have variance 1/2 each.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// `x + w` with i.i.d. CN(0, 1) entries in `w`, drawn column by column.
pub fn add_noise<R: Rng + ?Sized>(x: &DMatrix<Complex64>, rng: &mut R) -> DMatrix<Complex64> {
    let mut z = x.clone();
    for v in z.iter_mut() {
        *v += complex_normal(rng);
    }
    z
}

/// Repeats a single column vector `n` times.
pub fn repeat_column(v: &DVector<Complex64>, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(v.len(), n, |i, _| v[i])
}
