//! Log-domain 1-bit likelihood objectives.
//!
//! Every objective marginalizes the unknown effective gain over a uniform
//! phase grid `Z = {gamma exp(j 2 pi k / N_zeta)}` with a log-mean-exp, so an
//! empty snapshot evaluates to exactly zero. A measurement of a real level
//! `v` in CN(0, 1) noise quantizes to `+1` with probability `Q(-sqrt(2) v)`;
//! in terms of the complementary error function this is `erfc(-v) / 2`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{ArrayGeometry, QuantizedSnapshot};

/// Lower clamp for log-probabilities. Keeps `0 * log p` finite when a count
/// is saturated at high SNR.
pub const LOG_PROB_FLOOR: f64 = -745.0;

const ASYMPTOTIC_FROM: f64 = 26.0;

/// `ln(erfc(x) / 2)`, i.e. `ln Q(sqrt(2) x)`, clamped at [`LOG_PROB_FLOOR`].
pub fn log_half_erfc(x: f64) -> f64 {
    let v = if x <= 0.0 {
        (-0.5 * libm::erfc(-x)).ln_1p()
    } else if x < ASYMPTOTIC_FROM {
        (0.5 * libm::erfc(x)).ln()
    } else {
        // erfc(x) ~ exp(-x^2) / (x sqrt(pi)) * (1 - 1/(2x^2) + 3/(4x^4) - 15/(8x^6))
        let t = 1.0 / (x * x);
        let series = 1.0 - 0.5 * t + 0.75 * t * t - 1.875 * t * t * t;
        -x * x - (x * PI.sqrt()).ln() + series.ln() - std::f64::consts::LN_2
    };
    v.max(LOG_PROB_FLOOR)
}

/// `ln P(bit = +1 | v)` for a real level `v` in variance-1/2 noise.
#[inline]
pub fn log_prob_one(v: f64) -> f64 {
    log_half_erfc(-v)
}

/// `ln f_N(upsilon, lambda) = lambda ln Q(-sqrt2 v) + (N - lambda) ln(1 - Q(-sqrt2 v))`.
pub fn log_fn(upsilon: f64, lambda: u32, n: u32) -> Result<f64> {
    if lambda > n {
        return Err(Error::CountOutOfRange { lambda, n });
    }
    Ok(lambda as f64 * log_half_erfc(-upsilon) + (n - lambda) as f64 * log_half_erfc(upsilon))
}

/// `ln((1/n) sum exp(v_i))`, shifted by the maximum.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NEG_INFINITY;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + (sum / values.len() as f64).ln()
}

/// Discrete gain prior `{gamma exp(j 2 pi k / N)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainGrid {
    amplitude: f64,
    n_phases: usize,
}

impl Default for GainGrid {
    /// `gamma = 0.1` (-20 dB path SNR) with 100 phases.
    fn default() -> Self {
        Self {
            amplitude: 0.1,
            n_phases: 100,
        }
    }
}

impl GainGrid {
    pub fn new(amplitude: f64, n_phases: usize) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gain amplitude must be positive, got {amplitude}"
            )));
        }
        if n_phases == 0 {
            return Err(Error::InvalidArgument(
                "gain grid needs at least one phase".into(),
            ));
        }
        Ok(Self {
            amplitude,
            n_phases,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn n_phases(&self) -> usize {
        self.n_phases
    }

    pub fn elements(&self) -> Vec<Complex64> {
        self.rotated_elements(0)
    }

    /// Grid elements starting from index `shift` (a relabeling of the same set).
    pub fn rotated_elements(&self, shift: usize) -> Vec<Complex64> {
        (0..self.n_phases)
            .map(|k| {
                let k = (k + shift) % self.n_phases;
                Complex64::from_polar(self.amplitude, 2.0 * PI * k as f64 / self.n_phases as f64)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Gain constant over slots; counts suffice.
    Coherent,
    /// Gain varies per slot; uses per-slot bits.
    Noncoherent,
}

/// Immutable evaluation context shared by all objectives.
#[derive(Debug, Clone)]
pub struct LogLikContext<'a> {
    snapshot: &'a QuantizedSnapshot,
    geometry: ArrayGeometry,
    grid: GainGrid,
    mode: Mode,
    gains: Vec<Complex64>,
}

impl<'a> LogLikContext<'a> {
    pub fn new(
        snapshot: &'a QuantizedSnapshot,
        geometry: ArrayGeometry,
        grid: GainGrid,
        mode: Mode,
    ) -> Result<Self> {
        if snapshot.n_antennas() != geometry.len() {
            return Err(Error::Dimension(format!(
                "snapshot has {} antennas, geometry has {}",
                snapshot.n_antennas(),
                geometry.len()
            )));
        }
        Ok(Self {
            snapshot,
            geometry,
            grid,
            mode,
            gains: grid.elements(),
        })
    }

    /// Same context with the gain grid enumerated from a different start index.
    pub fn with_rotated_grid(mut self, shift: usize) -> Self {
        self.gains = self.grid.rotated_elements(shift);
        self
    }

    pub fn snapshot(&self) -> &QuantizedSnapshot {
        self.snapshot
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &GainGrid {
        &self.grid
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn require(&self, mode: Mode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::Mode(format!(
                "objective needs a {mode:?} context, got {:?}",
                self.mode
            )));
        }
        Ok(())
    }

    /// Coherent elevation objective, sum over columns of `ln g_i(theta)`.
    /// A single-column geometry reduces to the ULA objective.
    pub(crate) fn coherent_elevation(&self, theta: f64) -> f64 {
        let table = BitLogProbs::new(
            &vertical_steering(theta, self.geometry.m_vertical()),
            &self.gains,
        );
        let n = self.snapshot.n_slots() as f64;
        let (mu, nu) = (self.snapshot.mu(), self.snapshot.nu());
        let mut per_gain = vec![0.0; self.gains.len()];
        let mut total = 0.0;
        let mut counts = Vec::with_capacity(self.geometry.m_vertical());
        for i in 0..self.geometry.m_horizontal() {
            counts.clear();
            counts.extend(
                self.geometry
                    .column(i)
                    .map(|m| (mu[m] as f64, nu[m] as f64)),
            );
            for (k, acc) in per_gain.iter_mut().enumerate() {
                *acc = table.coherent(k, &counts, n);
            }
            total += log_mean_exp(&per_gain);
        }
        total
    }

    pub(crate) fn coherent_azimuth(&self, phi: f64, theta_hat: f64) -> f64 {
        let table = BitLogProbs::new(
            self.geometry.response(phi, theta_hat).as_slice(),
            &self.gains,
        );
        let n = self.snapshot.n_slots() as f64;
        let counts: Vec<(f64, f64)> = self
            .snapshot
            .mu()
            .iter()
            .zip(self.snapshot.nu())
            .map(|(&a, &b)| (a as f64, b as f64))
            .collect();
        let per_gain: Vec<f64> = (0..self.gains.len())
            .map(|k| table.coherent(k, &counts, n))
            .collect();
        log_mean_exp(&per_gain)
    }

    pub(crate) fn noncoherent_elevation(&self, theta: f64) -> f64 {
        let table = BitLogProbs::new(
            &vertical_steering(theta, self.geometry.m_vertical()),
            &self.gains,
        );
        let mut per_gain = vec![0.0; self.gains.len()];
        let mut total = 0.0;
        let mut bits = Vec::with_capacity(self.geometry.m_vertical());
        for i in 0..self.geometry.m_horizontal() {
            let antennas: Vec<usize> = self.geometry.column(i).collect();
            for t in 0..self.snapshot.n_slots() {
                bits.clear();
                bits.extend(
                    antennas
                        .iter()
                        .map(|&m| (self.snapshot.re_bit(m, t), self.snapshot.im_bit(m, t))),
                );
                for (k, acc) in per_gain.iter_mut().enumerate() {
                    *acc = table.single_slot(k, &bits);
                }
                total += log_mean_exp(&per_gain);
            }
        }
        total
    }

    pub(crate) fn noncoherent_azimuth(&self, phi: f64, theta_hat: f64) -> f64 {
        let table = BitLogProbs::new(
            self.geometry.response(phi, theta_hat).as_slice(),
            &self.gains,
        );
        let mut per_gain = vec![0.0; self.gains.len()];
        let mut total = 0.0;
        let m_r = self.geometry.len();
        let mut bits = Vec::with_capacity(m_r);
        for t in 0..self.snapshot.n_slots() {
            bits.clear();
            bits.extend((0..m_r).map(|m| (self.snapshot.re_bit(m, t), self.snapshot.im_bit(m, t))));
            for (k, acc) in per_gain.iter_mut().enumerate() {
                *acc = table.single_slot(k, &bits);
            }
            total += log_mean_exp(&per_gain);
        }
        total
    }

    /// Elevation objective matching the context mode.
    pub fn elevation(&self, theta: f64) -> f64 {
        match self.mode {
            Mode::Coherent => self.coherent_elevation(theta),
            Mode::Noncoherent => self.noncoherent_elevation(theta),
        }
    }

    /// Azimuth objective given an elevation estimate, matching the context mode.
    pub fn azimuth(&self, phi: f64, theta_hat: f64) -> f64 {
        match self.mode {
            Mode::Coherent => self.coherent_azimuth(phi, theta_hat),
            Mode::Noncoherent => self.noncoherent_azimuth(phi, theta_hat),
        }
    }
}

fn vertical_steering(theta: f64, m: usize) -> Vec<Complex64> {
    let s = theta.sin();
    (0..m)
        .map(|i| Complex64::from_polar(1.0, PI * s * i as f64))
        .collect()
}

/// Log-probabilities of each bit outcome for every (gain, antenna) pair,
/// laid out gain-major.
struct BitLogProbs {
    n: usize,
    re_pos: Vec<f64>,
    re_neg: Vec<f64>,
    im_pos: Vec<f64>,
    im_neg: Vec<f64>,
}

impl BitLogProbs {
    fn new(steering: &[Complex64], gains: &[Complex64]) -> Self {
        let n = steering.len();
        let size = n * gains.len();
        let mut t = Self {
            n,
            re_pos: Vec::with_capacity(size),
            re_neg: Vec::with_capacity(size),
            im_pos: Vec::with_capacity(size),
            im_neg: Vec::with_capacity(size),
        };
        for g in gains {
            for a in steering {
                let s = g * a;
                t.re_pos.push(log_half_erfc(-s.re));
                t.re_neg.push(log_half_erfc(s.re));
                t.im_pos.push(log_half_erfc(-s.im));
                t.im_neg.push(log_half_erfc(s.im));
            }
        }
        t
    }

    /// `sum_m ln f_N(rho_m, mu_m) + ln f_N(kappa_m, nu_m)` for gain `k`.
    #[inline]
    fn coherent(&self, k: usize, counts: &[(f64, f64)], n_slots: f64) -> f64 {
        let o = k * self.n;
        let mut acc = 0.0;
        for (m, &(mu, nu)) in counts.iter().enumerate() {
            acc += mu * self.re_pos[o + m]
                + (n_slots - mu) * self.re_neg[o + m]
                + nu * self.im_pos[o + m]
                + (n_slots - nu) * self.im_neg[o + m];
        }
        acc
    }

    #[inline]
    fn single_slot(&self, k: usize, bits: &[(bool, bool)]) -> f64 {
        let o = k * self.n;
        let mut acc = 0.0;
        for (m, &(re, im)) in bits.iter().enumerate() {
            acc += if re {
                self.re_pos[o + m]
            } else {
                self.re_neg[o + m]
            };
            acc += if im {
                self.im_pos[o + m]
            } else {
                self.im_neg[o + m]
            };
        }
        acc
    }
}

/// Coherent ULA objective `ln g(theta)`.
pub fn loglik_ula_coherent(theta: f64, ctx: &LogLikContext<'_>) -> Result<f64> {
    ctx.require(Mode::Coherent)?;
    if ctx.geometry.m_horizontal() != 1 {
        return Err(Error::Geometry(
            "ULA objective needs a single-column geometry".into(),
        ));
    }
    Ok(ctx.coherent_elevation(theta))
}

/// Coherent UPA elevation objective `sum_i ln g_i(theta)`, one independent
/// gain per column.
pub fn loglik_upa_elevation(theta: f64, ctx: &LogLikContext<'_>) -> Result<f64> {
    ctx.require(Mode::Coherent)?;
    Ok(ctx.coherent_elevation(theta))
}

/// Coherent azimuth objective `ln g_bar(phi)` at a fixed elevation estimate.
pub fn loglik_upa_azimuth(phi: f64, theta_hat: f64, ctx: &LogLikContext<'_>) -> Result<f64> {
    ctx.require(Mode::Coherent)?;
    Ok(ctx.coherent_azimuth(phi, theta_hat))
}

/// Noncoherent elevation objective `ln h_tilde(theta)`; the gain is
/// marginalized separately in every slot of every column.
pub fn loglik_noncoherent_elevation(theta: f64, ctx: &LogLikContext<'_>) -> Result<f64> {
    ctx.require(Mode::Noncoherent)?;
    Ok(ctx.noncoherent_elevation(theta))
}

/// Noncoherent azimuth objective `ln h_bar(phi)`.
pub fn loglik_noncoherent_azimuth(
    phi: f64,
    theta_hat: f64,
    ctx: &LogLikContext<'_>,
) -> Result<f64> {
    ctx.require(Mode::Noncoherent)?;
    Ok(ctx.noncoherent_azimuth(phi, theta_hat))
}
