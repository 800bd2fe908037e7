//! Two-step angle estimation: an arcsine-spaced coarse scan picks the most
//! prominent peaks, then each is refined inside the bracket spanned by its grid
//! neighbours. Effective path gains are recovered afterwards by coordinate
//! ascent on the 1-bit likelihood of the superposition model.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::likelihood::{GainGrid, LogLikContext, Mode, LOG_PROB_FLOOR};
use crate::signal::{ArrayGeometry, QuantizedSnapshot};

/// Golden-section refinement settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub max_iterations: usize,
    /// Bracket width (radians) at which the search stops.
    pub tolerance: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            max_iterations: 80,
            tolerance: 1e-6,
        }
    }
}

/// Amplitude x phase search grid for effective-gain estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSearch {
    pub n_amplitudes: usize,
    pub min_db: f64,
    pub max_db: f64,
    pub n_phases: usize,
    pub max_sweeps: usize,
    /// Relative joint log-likelihood gain below which sweeps stop.
    pub tolerance: f64,
}

impl Default for GainSearch {
    fn default() -> Self {
        Self {
            n_amplitudes: 16,
            min_db: -35.0,
            max_db: 0.0,
            n_phases: 64,
            max_sweeps: 10,
            tolerance: 1e-9,
        }
    }
}

impl GainSearch {
    pub fn amplitudes(&self) -> Vec<f64> {
        let n = self.n_amplitudes.max(1);
        (0..n)
            .map(|i| {
                let db = if n == 1 {
                    self.max_db
                } else {
                    self.min_db + (self.max_db - self.min_db) * i as f64 / (n - 1) as f64
                };
                10f64.powf(db / 20.0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorConfig {
    pub grid: GainGrid,
    pub refine: RefineOptions,
    pub gains: GainSearch,
}

/// Angle of the `q`-th coarse sample (0-based), `arcsin(-1 + q / m)`, with the
/// sine clamped to [-1, 1] so neighbours of the end samples are defined.
pub fn coarse_angle(q: isize, m: usize) -> f64 {
    (-1.0 + q as f64 / m as f64).clamp(-1.0, 1.0).asin()
}

/// The `2m` coarse sample angles.
pub fn coarse_angles(m: usize) -> Vec<f64> {
    (0..2 * m as isize).map(|q| coarse_angle(q, m)).collect()
}

/// Objective sampled on the coarse arcsine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrid {
    m: usize,
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
}

impl CoarseGrid {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// `[theta_{q-1}, theta_{q+1}]` around sample `q`.
    pub fn bracket(&self, q: usize) -> (f64, f64) {
        let q = q as isize;
        (coarse_angle(q - 1, self.m), coarse_angle(q + 1, self.m))
    }
}

pub fn coarse_scan(objective: impl Fn(f64) -> f64, m: usize) -> Result<CoarseGrid> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "coarse grid needs M >= 2, got {m}"
        )));
    }
    let angles = coarse_angles(m);
    let values = angles.iter().map(|&a| objective(a)).collect();
    Ok(CoarseGrid { m, angles, values })
}

/// Golden-section ascent on `[lo, hi]` starting from `init`.
///
/// Returns the best point evaluated, so the result never scores below `init`
/// and always lies inside the bracket.
pub fn refine(
    objective: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    init: f64,
    options: &RefineOptions,
) -> Result<f64> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::BracketInverted { lo, hi });
    }
    let init = init.clamp(lo, hi);
    let mut best = (init, objective(init));
    let consider = |x: f64, f: f64, best: &mut (f64, f64)| {
        if f > best.1 {
            *best = (x, f);
        }
    };

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    if b - a <= options.tolerance {
        return Ok(best.0);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    for _ in 0..options.max_iterations {
        if b - a <= options.tolerance {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = objective(c);
            consider(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = objective(d);
            consider(d, fd, &mut best);
        }
    }
    Ok(best.0)
}

fn rank_order(values: &[f64], a: usize, b: usize) -> std::cmp::Ordering {
    values[b].total_cmp(&values[a]).then(a.cmp(&b))
}

/// Indices of the `count` most prominent coarse peaks, best first.
///
/// A peak is a sample strictly above both neighbours (end samples need only
/// beat their single neighbour). Ties rank the lower index first. When fewer
/// than `count` peaks exist the list is padded with the highest remaining
/// samples that are not adjacent to any already chosen one.
pub fn detect_peaks(grid: &CoarseGrid, count: usize) -> Result<Vec<usize>> {
    let n = grid.values.len();
    if count == 0 || count > n / 2 {
        return Err(Error::TooManyPeaks {
            requested: count,
            available: n,
        });
    }
    let v = &grid.values;
    let mut maxima: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || v[i] > v[i - 1]) && (i + 1 == n || v[i] > v[i + 1]))
        .collect();
    maxima.sort_by(|&a, &b| rank_order(v, a, b));
    let mut chosen: Vec<usize> = maxima.into_iter().take(count).collect();

    if chosen.len() < count {
        let mut rest: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
        rest.sort_by(|&a, &b| rank_order(v, a, b));
        for i in rest {
            if chosen.len() == count {
                break;
            }
            if chosen.iter().all(|&c| c.abs_diff(i) > 1) {
                chosen.push(i);
            }
        }
        if chosen.len() < count {
            return Err(Error::TooManyPeaks {
                requested: count,
                available: n,
            });
        }
    }
    Ok(chosen)
}

/// Brackets for several peaks, clipped at midpoints so they never overlap.
fn peak_brackets(grid: &CoarseGrid, peaks: &[usize]) -> Vec<(f64, f64)> {
    let mut brackets: Vec<(f64, f64)> = peaks.iter().map(|&q| grid.bracket(q)).collect();
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by_key(|&i| peaks[i]);
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        if brackets[i].1 > brackets[j].0 {
            let mid = 0.5 * (grid.angles[peaks[i]] + grid.angles[peaks[j]]);
            brackets[i].1 = brackets[i].1.min(mid);
            brackets[j].0 = brackets[j].0.max(mid);
        }
    }
    brackets
}

/// Angle estimate for one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleEstimate {
    pub elevation: f64,
    /// `None` when the array has a single column.
    pub azimuth: Option<f64>,
    pub gain: Complex64,
    /// Coarse elevation sample the estimate was refined from.
    pub coarse_index: usize,
    pub bracket: (f64, f64),
}

impl AngleEstimate {
    pub fn azimuth_or_zero(&self) -> f64 {
        self.azimuth.unwrap_or(0.0)
    }
}

/// Single-peak two-step search, used for the azimuth stage.
fn two_step(objective: impl Fn(f64) -> f64, m: usize, options: &RefineOptions) -> Result<f64> {
    let grid = coarse_scan(&objective, m)?;
    let q = detect_peaks(&grid, 1)?[0];
    let (lo, hi) = grid.bracket(q);
    refine(&objective, lo, hi, grid.angles[q], options)
}

fn estimate_elevations(
    ctx: &LogLikContext<'_>,
    paths: usize,
    config: &EstimatorConfig,
) -> Result<Vec<AngleEstimate>> {
    // A single-row array has no elevation aperture; the grid still needs two
    // samples per unit of sine.
    let m = ctx.geometry().m_vertical().max(2);
    let objective = |theta: f64| ctx.elevation(theta);
    let grid = coarse_scan(objective, m)?;
    let peaks = detect_peaks(&grid, paths)?;
    let brackets = peak_brackets(&grid, &peaks);
    peaks
        .iter()
        .zip(brackets)
        .map(|(&q, (lo, hi))| {
            let theta = refine(objective, lo, hi, grid.angles[q], &config.refine)?;
            Ok(AngleEstimate {
                elevation: theta,
                azimuth: None,
                gain: Complex64::new(0.0, 0.0),
                coarse_index: q,
                bracket: (lo, hi),
            })
        })
        .collect()
}

/// Estimates `paths` arrival angles for a ULA snapshot.
pub fn estimate_ula(
    snapshot: &QuantizedSnapshot,
    paths: usize,
    mode: Mode,
    config: &EstimatorConfig,
) -> Result<Vec<AngleEstimate>> {
    if snapshot.n_slots() == 0 || snapshot.n_antennas() == 0 {
        return Err(Error::EmptySnapshot);
    }
    let geometry = ArrayGeometry::ula(snapshot.n_antennas())?;
    let ctx = LogLikContext::new(snapshot, geometry, config.grid, mode)?;
    estimate_elevations(&ctx, paths, config)
}

/// Estimates `paths` (azimuth, elevation) pairs on a planar array: all
/// elevations first from the column-grouped objective, then one azimuth per
/// elevation estimate.
pub fn estimate_upa(
    snapshot: &QuantizedSnapshot,
    geometry: &ArrayGeometry,
    paths: usize,
    mode: Mode,
    config: &EstimatorConfig,
) -> Result<Vec<AngleEstimate>> {
    if !geometry.is_upa() {
        return Err(Error::Geometry("estimate_upa needs a UPA geometry".into()));
    }
    if snapshot.n_slots() == 0 || snapshot.n_antennas() == 0 {
        return Err(Error::EmptySnapshot);
    }
    let ctx = LogLikContext::new(snapshot, *geometry, config.grid, mode)?;
    let mut estimates = estimate_elevations(&ctx, paths, config)?;
    if geometry.m_horizontal() > 1 {
        for est in &mut estimates {
            let theta = est.elevation;
            let phi = two_step(
                |phi| ctx.azimuth(phi, theta),
                geometry.m_horizontal(),
                &config.refine,
            )?;
            est.azimuth = Some(phi);
        }
    }
    Ok(estimates)
}

/// Joint 1-bit log-likelihood of the counts under the noiseless mean
/// `base + c * a`.
fn superposition_loglik(
    snapshot: &QuantizedSnapshot,
    base: &[Complex64],
    a: &[Complex64],
    c: Complex64,
) -> f64 {
    let n = snapshot.n_slots() as f64;
    let mut acc = 0.0;
    for (m, (b, am)) in base.iter().zip(a).enumerate() {
        let v = b + c * am;
        let (re_pos, re_neg) = bit_log_probs(v.re);
        let (im_pos, im_neg) = bit_log_probs(v.im);
        let (mu, nu) = (snapshot.mu()[m] as f64, snapshot.nu()[m] as f64);
        acc += mu * re_pos + (n - mu) * re_neg + nu * im_pos + (n - nu) * im_neg;
    }
    acc
}

/// `(ln P(+1 | x), ln P(-1 | x))` with a single erfc evaluation.
#[inline]
fn bit_log_probs(x: f64) -> (f64, f64) {
    let a = x.abs();
    let tail = crate::likelihood::log_half_erfc(a);
    let body = (-0.5 * libm::erfc(a)).ln_1p().max(LOG_PROB_FLOOR);
    if x >= 0.0 {
        (body, tail)
    } else {
        (tail, body)
    }
}

/// Maximum-likelihood effective gains for fixed angle estimates, by cyclic
/// coordinate ascent over paths. Each coordinate is searched on the
/// amplitude x phase grid, then polished with golden-section passes in
/// log-amplitude and phase. The joint likelihood never decreases.
pub fn estimate_gains(
    snapshot: &QuantizedSnapshot,
    geometry: &ArrayGeometry,
    estimates: &[AngleEstimate],
    search: &GainSearch,
) -> Result<Vec<Complex64>> {
    Ok(estimate_gains_traced(snapshot, geometry, estimates, search)?.0)
}

/// [`estimate_gains`] plus the joint log-likelihood after the initial point and
/// after every sweep.
pub fn estimate_gains_traced(
    snapshot: &QuantizedSnapshot,
    geometry: &ArrayGeometry,
    estimates: &[AngleEstimate],
    search: &GainSearch,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    if snapshot.n_antennas() != geometry.len() {
        return Err(Error::Dimension(format!(
            "snapshot has {} antennas, geometry has {}",
            snapshot.n_antennas(),
            geometry.len()
        )));
    }
    let steering: Vec<Vec<Complex64>> = estimates
        .iter()
        .map(|e| {
            geometry
                .response(e.azimuth_or_zero(), e.elevation)
                .as_slice()
                .to_vec()
        })
        .collect();
    let amplitudes = search.amplitudes();
    let (amp_lo, amp_hi) = (amplitudes[0], amplitudes[amplitudes.len() - 1]);
    let n_phases = search.n_phases.max(1);
    let phase_step = 2.0 * std::f64::consts::PI / n_phases as f64;
    let m_r = geometry.len();

    let mut gains = vec![Complex64::new(amp_lo, 0.0); estimates.len()];
    let mean = |gains: &[Complex64]| -> Vec<Complex64> {
        let mut s = vec![Complex64::new(0.0, 0.0); m_r];
        for (g, a) in gains.iter().zip(&steering) {
            for (acc, v) in s.iter_mut().zip(a) {
                *acc += g * v;
            }
        }
        s
    };
    let zeros = vec![Complex64::new(0.0, 0.0); m_r];
    let mut current =
        superposition_loglik(snapshot, &mean(&gains), &zeros, Complex64::new(0.0, 0.0));
    let mut trace = vec![current];

    for _ in 0..search.max_sweeps {
        let before = current;
        for l in 0..gains.len() {
            let mut others = gains.clone();
            others[l] = Complex64::new(0.0, 0.0);
            let base = mean(&others);
            let a = &steering[l];
            let score = |c: Complex64| superposition_loglik(snapshot, &base, a, c);

            let mut best = (gains[l], current);
            for &amp in &amplitudes {
                for p in 0..n_phases {
                    let c = Complex64::from_polar(amp, p as f64 * phase_step);
                    let f = score(c);
                    if f > best.1 {
                        best = (c, f);
                    }
                }
            }

            // local polish: alternate log-amplitude and phase line searches
            let ln_step = (amp_hi / amp_lo).ln() / (amplitudes.len().max(2) - 1) as f64;
            let opts = RefineOptions {
                max_iterations: 60,
                tolerance: 1e-7,
            };
            for _ in 0..2 {
                let (r, th) = (best.0.norm().max(amp_lo), best.0.arg());
                let lr = r.ln();
                let lo = (lr - ln_step).max(amp_lo.ln());
                let hi = (lr + ln_step).min(amp_hi.ln());
                let lr_new = refine(
                    |x| score(Complex64::from_polar(x.exp(), th)),
                    lo,
                    hi,
                    lr,
                    &opts,
                )?;
                let c = Complex64::from_polar(lr_new.exp(), th);
                let f = score(c);
                if f > best.1 {
                    best = (c, f);
                }
                let r = best.0.norm();
                let th = best.0.arg();
                let th_new = refine(
                    |x| score(Complex64::from_polar(r, x)),
                    th - phase_step,
                    th + phase_step,
                    th,
                    &opts,
                )?;
                let c = Complex64::from_polar(r, th_new);
                let f = score(c);
                if f > best.1 {
                    best = (c, f);
                }
            }
            gains[l] = best.0;
            current = best.1;
        }
        trace.push(current);
        if (current - before).abs() <= search.tolerance * before.abs().max(1e-300) {
            break;
        }
    }
    Ok((gains, trace))
}
