use std::time::Instant;

use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::beamforming::{
    beam_estimation, beam_ideal, beam_strong, beam_wopt, beam_wq, beam_wstrong, beam_wunq,
    post_snr_db, power_ratio, Beamformer, Scheme,
};
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_gains, estimate_ula, estimate_upa, AngleEstimate, EstimatorConfig,
};
use crate::harness::config::{ExperimentConfig, ScenarioKind};
use crate::harness::output::ResultRow;
use crate::harness::scenario::{generate_narrowband_scenario, NarrowbandScenario};
use crate::likelihood::{GainGrid, LogLikContext, Mode};
use crate::signal::{
    add_noise, convolve, load_cdlc, quantize_1bit, realize_cdlc, repeat_column, ArrayGeometry,
    CdlCProfile, QuantizedSnapshot,
};

/// Independent generator for realization `k`: the master seed selects the
/// key and `k` the stream, so adding realizations never changes earlier ones.
pub fn realization_rng(seed: u64, k: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// Assigns estimates to true paths by the permutation with the smallest
/// total absolute angle error. Returns `(elevation, azimuth)` errors in the
/// order of the true paths.
pub fn match_errors(truth: &[(f64, f64)], estimates: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let n = truth.len().min(estimates.len());
    let cost = |t: &(f64, f64), e: &(f64, f64)| (t.0 - e.0).abs() + (t.1 - e.1).abs();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..estimates.len()).permutations(n) {
        let total: f64 = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| cost(&truth[i], &estimates[j]))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, perm));
        }
    }
    let perm = best.map(|b| b.1).unwrap_or_default();
    perm.iter()
        .enumerate()
        .map(|(i, &j)| {
            (
                (truth[i].0 - estimates[j].0).abs(),
                (truth[i].1 - estimates[j].1).abs(),
            )
        })
        .unzip()
}

fn estimate_paths(
    snapshot: &QuantizedSnapshot,
    geometry: &ArrayGeometry,
    paths: usize,
    mode: Mode,
    config: &EstimatorConfig,
) -> Result<Vec<AngleEstimate>> {
    if geometry.is_upa() {
        estimate_upa(snapshot, geometry, paths, mode, config)
    } else {
        estimate_ula(snapshot, paths, mode, config)
    }
}

/// Runs every realization and returns rows in realization, cell, scheme order.
/// `parallel` caps the worker threads; `None` uses the global pool.
pub fn run_experiment(
    config: &ExperimentConfig,
    parallel: Option<usize>,
) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let profile = match config.kind {
        ScenarioKind::CdlcWideband => Some(
            match config.wideband.as_ref().and_then(|w| w.profile.as_ref()) {
                Some(p) => load_cdlc(p)?,
                None => CdlCProfile::bundled(),
            },
        ),
        _ => None,
    };
    let job = |k: usize| -> Result<Vec<ResultRow>> {
        match &profile {
            Some(p) => run_wideband_realization(config, p, k),
            None => run_narrowband_realization(config, k),
        }
    };
    let work = || -> Result<Vec<ResultRow>> {
        let per: Vec<Result<Vec<ResultRow>>> =
            (0..config.realizations).into_par_iter().map(job).collect();
        let mut rows = Vec::new();
        for r in per {
            rows.extend(r?);
        }
        Ok(rows)
    };
    match parallel {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Quantized pilot block for a narrowband realization: noisy repetitions of
/// the received vector, long enough for the largest pilot length.
fn narrowband_snapshot<R: Rng + ?Sized>(
    scenario: &NarrowbandScenario,
    n_max: usize,
    rng: &mut R,
) -> QuantizedSnapshot {
    quantize_1bit(&add_noise(&repeat_column(&scenario.signal, n_max), rng))
}

pub fn run_narrowband_realization(config: &ExperimentConfig, k: usize) -> Result<Vec<ResultRow>> {
    let nb = config.narrowband.as_ref().expect("validated");
    let rx = config.rx_geometry()?;
    let est_cfg = config.estimator_config()?;
    let schemes = config.schemes();
    let mut rng = realization_rng(config.seed, k);

    let scenario = generate_narrowband_scenario(config, &mut rng)?;
    let n_max = *nb.n_d.iter().max().expect("validated");
    let full = narrowband_snapshot(&scenario, n_max, &mut rng);

    let truth = scenario.path_gains();
    let ideal = beam_ideal(&truth, &rx);
    let v = &scenario.signal;
    let pre_snr_db = 10.0 * (v.norm_squared() / rx.len() as f64).log10();
    let truth_angles: Vec<(f64, f64)> = truth.iter().map(|p| (p.elevation, p.azimuth)).collect();
    let needs_estimates = schemes
        .iter()
        .any(|s| matches!(s, Scheme::Est | Scheme::Str));

    let mut rows = Vec::new();
    for &n in &nb.n_d {
        let start = Instant::now();
        let snapshot = full.prefix(n);
        let mut estimates = Vec::new();
        let mut errors = (Vec::new(), Vec::new());
        if needs_estimates {
            estimates = estimate_paths(&snapshot, &rx, nb.paths, nb.mode, &est_cfg)?;
            let gains = estimate_gains(&snapshot, &rx, &estimates, &est_cfg.gains)?;
            for (e, g) in estimates.iter_mut().zip(gains) {
                e.gain = g;
            }
            let est_angles: Vec<(f64, f64)> = estimates
                .iter()
                .map(|e| (e.elevation, e.azimuth_or_zero()))
                .collect();
            errors = match_errors(&truth_angles, &est_angles);
            if !rx.is_upa() {
                errors.1.clear();
            }
        }
        let mut cell = Vec::with_capacity(schemes.len());
        for &scheme in &schemes {
            let b = match scheme {
                Scheme::Ideal => ideal.clone(),
                Scheme::Est => beam_estimation(&estimates, &rx)?,
                Scheme::Str => beam_strong(&estimates, &snapshot, &rx)?,
                other => unreachable!("{other} rejected by validation"),
            };
            let eta = if scheme == Scheme::Ideal {
                Some(1.0)
            } else {
                power_ratio(&b, &ideal, v)
            };
            let (el, az) = if scheme == Scheme::Ideal {
                (Vec::new(), Vec::new())
            } else {
                errors.clone()
            };
            cell.push(ResultRow {
                scenario: config.id.clone(),
                realization: k,
                seed: config.seed,
                scheme,
                n_d: n,
                pre_snr_db,
                elevation_errors: el,
                azimuth_errors: az,
                eta,
                post_snr_db: post_snr_db(&b, &DMatrix::from_column_slice(v.len(), 1, v.as_slice())),
                wall_time_s: None,
            });
        }
        if config.timing {
            let t = start.elapsed().as_secs_f64();
            cell.iter_mut().for_each(|r| r.wall_time_s = Some(t));
        }
        rows.extend(cell);
    }
    Ok(rows)
}

/// Unit-power QPSK pilots, one column per chip.
pub fn qpsk_pilots<R: Rng + ?Sized>(m_t: usize, n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(m_t, n, |_, _| {
        let re = if rng.random::<bool>() { h } else { -h };
        let im = if rng.random::<bool>() { h } else { -h };
        Complex64::new(re, im)
    })
}

/// Noiseless wideband signal for one realization, normalized so that
/// `sum_d ||H[d]||_F^2 = M_r M_t` (unit average SNR per antenna per chip).
pub fn wideband_signal<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    profile: &CdlCProfile,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    let rx = config.rx_geometry()?;
    let tx = config.tx_geometry()?;
    let cdl = config.cdl_config().expect("validated");
    let mut channel = realize_cdlc(profile, rng, &rx, &tx, &cdl)?;
    let energy = channel.energy();
    if energy > 0.0 {
        channel.scale(((rx.len() * tx.len()) as f64 / energy).sqrt());
    }
    let pilots = qpsk_pilots(tx.len(), n, rng);
    convolve(&channel, &pilots)
}

fn reference_length(config: &ExperimentConfig, n: usize) -> usize {
    n.max(
        config
            .wideband
            .as_ref()
            .expect("validated")
            .min_reference_slots,
    )
}

pub fn run_wideband_realization(
    config: &ExperimentConfig,
    profile: &CdlCProfile,
    k: usize,
) -> Result<Vec<ResultRow>> {
    let rx = config.rx_geometry()?;
    let est_cfg = config.estimator_config()?;
    let schemes = config.schemes();
    let schedule = config.wideband_schedule();
    let mut rng = realization_rng(config.seed, k);

    let block = schedule
        .iter()
        .map(|(_, n)| reference_length(config, *n))
        .max()
        .expect("validated");
    let x_unit = wideband_signal(config, profile, block, &mut rng)?;

    let mut rows = Vec::new();
    for &(pre_snr_db, n) in &schedule {
        let start = Instant::now();
        let amp = 10f64.powf(pre_snr_db / 20.0);
        let x = &x_unit * Complex64::from(amp);
        let n_ref = reference_length(config, n);
        let x_ref = x.columns(0, n_ref).into_owned();
        let z = add_noise(&x_ref, &mut rng);
        let snapshot = quantize_1bit(&z.columns(0, n).into_owned());

        let mut cell = Vec::with_capacity(schemes.len());
        for &scheme in &schemes {
            let (b, used): (Beamformer, usize) = match scheme {
                Scheme::Wopt => (beam_wopt(&x_ref)?, n_ref),
                Scheme::Wunq => (beam_wunq(&z)?, n_ref),
                Scheme::Wq => (beam_wq(&snapshot)?, n),
                Scheme::Wstr => (beam_wstrong(&snapshot, &rx, &est_cfg)?, n),
                other => unreachable!("{other} rejected by validation"),
            };
            cell.push(ResultRow {
                scenario: config.id.clone(),
                realization: k,
                seed: config.seed,
                scheme,
                n_d: used,
                pre_snr_db,
                elevation_errors: Vec::new(),
                azimuth_errors: Vec::new(),
                eta: None,
                post_snr_db: post_snr_db(&b, &x),
                wall_time_s: None,
            });
        }
        if config.timing {
            let t = start.elapsed().as_secs_f64();
            cell.iter_mut().for_each(|r| r.wall_time_s = Some(t));
        }
        rows.extend(cell);
    }
    Ok(rows)
}

/// Evenly spaced angles `lo, lo + step, ...` up to `hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl ThetaGrid {
    /// Parses `lo:hi:step`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else {
            return Err(Error::InvalidArgument(format!(
                "expected lo:hi:step, got `{text}`"
            )));
        };
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("`{s}` is not a number")))
        };
        let grid = Self {
            lo: num(lo)?,
            hi: num(hi)?,
            step: num(step)?,
        };
        let half_pi = std::f64::consts::FRAC_PI_2;
        if grid.step.is_nan() || grid.step <= 0.0 || grid.hi < grid.lo {
            return Err(Error::InvalidArgument(
                "theta grid needs lo <= hi and step > 0".into(),
            ));
        }
        if grid.lo < -half_pi || grid.hi > half_pi {
            return Err(Error::AngleDomain {
                value: if grid.lo < -half_pi { grid.lo } else { grid.hi },
                lo: -half_pi,
                hi: half_pi,
            });
        }
        Ok(grid)
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

/// One sample of the elevation objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub n_d: usize,
    pub pre_snr_db: f64,
    pub theta: f64,
    pub coherent: f64,
    pub noncoherent: f64,
}

pub const SCAN_HEADER: [&str; 5] = ["n_d", "pre_snr_db", "theta", "coherent", "noncoherent"];

/// Coherent and noncoherent elevation objectives over `grid` for the first
/// realization of the experiment, one curve per pilot length. For the
/// wideband scenario the quantized block of each pre-SNR cell is used.
pub fn scan_objective(config: &ExperimentConfig, grid: &ThetaGrid) -> Result<Vec<ScanRow>> {
    config.validate()?;
    let rx = config.rx_geometry()?;
    let gain_grid: GainGrid = config.estimator_config()?.grid;
    let mut rng = realization_rng(config.seed, 0);

    let snapshots: Vec<(usize, f64, QuantizedSnapshot)> = if config.kind.is_narrowband() {
        let nb = config.narrowband.as_ref().expect("validated");
        let scenario = generate_narrowband_scenario(config, &mut rng)?;
        let full = narrowband_snapshot(
            &scenario,
            *nb.n_d.iter().max().expect("validated"),
            &mut rng,
        );
        let pre = 10.0 * (scenario.signal.norm_squared() / rx.len() as f64).log10();
        nb.n_d.iter().map(|&n| (n, pre, full.prefix(n))).collect()
    } else {
        let profile = match config.wideband.as_ref().and_then(|w| w.profile.as_ref()) {
            Some(p) => load_cdlc(p)?,
            None => CdlCProfile::bundled(),
        };
        let schedule = config.wideband_schedule();
        let block = schedule.iter().map(|(_, n)| *n).max().expect("validated");
        let x = wideband_signal(config, &profile, block, &mut rng)?;
        schedule
            .iter()
            .map(|&(p, n)| {
                let xs = x.columns(0, n) * Complex64::from(10f64.powf(p / 20.0));
                (n, p, quantize_1bit(&add_noise(&xs.into_owned(), &mut rng)))
            })
            .collect()
    };

    let thetas = grid.points();
    let mut rows = Vec::new();
    for (n, pre, snap) in &snapshots {
        let coherent = LogLikContext::new(snap, rx, gain_grid, Mode::Coherent)?;
        let noncoherent = LogLikContext::new(snap, rx, gain_grid, Mode::Noncoherent)?;
        for &theta in &thetas {
            rows.push(ScanRow {
                n_d: *n,
                pre_snr_db: *pre,
                theta,
                coherent: coherent.elevation(theta),
                noncoherent: noncoherent.elevation(theta),
            });
        }
    }
    Ok(rows)
}
