use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beamforming::Scheme;
use crate::error::{Error, Result};
use crate::estimation::{EstimatorConfig, RefineOptions};
use crate::likelihood::{GainGrid, Mode};
use crate::signal::{ArrayGeometry, CdlConfig, RaisedCosine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    NarrowbandUla,
    NarrowbandUpa,
    CdlcWideband,
}

impl ScenarioKind {
    pub fn is_narrowband(&self) -> bool {
        !matches!(self, ScenarioKind::CdlcWideband)
    }
}

/// Planar array dimensions. A linear array has `horizontal = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    #[serde(default = "one")]
    pub horizontal: usize,
    #[serde(default = "one", alias = "elements")]
    pub vertical: usize,
}

impl Default for ArraySpec {
    fn default() -> Self {
        Self {
            horizontal: 1,
            vertical: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NarrowbandSpec {
    /// Number of paths `L`.
    pub paths: usize,
    /// Per-path SNR `|zeta_l|^2` in dB, one entry per path.
    pub path_snr_db: Vec<f64>,
    /// Pilot lengths to evaluate. Shorter lengths reuse a prefix of the
    /// longest pilot block.
    pub n_d: Vec<usize>,
    #[serde(default = "yes")]
    pub enforce_separation: bool,
    /// Angles are drawn uniformly on `[-limit, limit]`.
    #[serde(default = "default_angle_limit")]
    pub angle_limit_deg: f64,
    #[serde(default = "coherent")]
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidebandSpec {
    /// Pre-beamforming SNR per receive antenna per chip, in dB.
    pub pre_snr_db: Vec<f64>,
    /// Pilot lengths for the quantized schemes; defaults to the halving
    /// schedule.
    #[serde(default)]
    pub n_d: Option<Vec<usize>>,
    /// Minimum pilot length for the schemes that see unquantized signals.
    #[serde(default = "default_reference_slots")]
    pub min_reference_slots: usize,
    /// Channel profile file; the bundled CDL-C table when absent.
    #[serde(default)]
    pub profile: Option<PathBuf>,
    #[serde(default = "default_carrier")]
    pub carrier_hz: f64,
    #[serde(default = "default_subcarrier")]
    pub subcarrier_spacing_hz: f64,
    #[serde(default = "default_fft")]
    pub fft_size: usize,
    #[serde(default = "default_delay_spread")]
    pub delay_spread_ns: f64,
    #[serde(default = "default_rolloff")]
    pub rolloff: f64,
    #[serde(default = "default_span")]
    pub pulse_span: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    #[serde(default = "default_gamma")]
    pub gain_grid_amplitude: f64,
    #[serde(default = "default_phases")]
    pub gain_grid_phases: usize,
    #[serde(default = "default_iterations")]
    pub refine_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub refine_tolerance: f64,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            gain_grid_amplitude: default_gamma(),
            gain_grid_phases: default_phases(),
            refine_iterations: default_iterations(),
            refine_tolerance: default_tolerance(),
        }
    }
}

/// One Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario id written to every result row.
    pub id: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    /// Number of independent realizations `K`.
    pub realizations: usize,
    /// Beamformers to evaluate; all schemes of the scenario family by default.
    #[serde(default)]
    pub schemes: Option<Vec<Scheme>>,
    pub rx: ArraySpec,
    #[serde(default)]
    pub tx: ArraySpec,
    #[serde(default)]
    pub narrowband: Option<NarrowbandSpec>,
    #[serde(default)]
    pub wideband: Option<WidebandSpec>,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    /// Record per-cell wall time. Off by default so output is reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn coherent() -> Mode {
    Mode::Coherent
}
fn default_angle_limit() -> f64 {
    60.0
}
fn default_reference_slots() -> usize {
    512
}
fn default_carrier() -> f64 {
    28e9
}
fn default_subcarrier() -> f64 {
    240e3
}
fn default_fft() -> usize {
    2048
}
fn default_delay_spread() -> f64 {
    100.0
}
fn default_rolloff() -> f64 {
    0.22
}
fn default_span() -> usize {
    8
}
fn default_gamma() -> f64 {
    0.1
}
fn default_phases() -> usize {
    100
}
fn default_iterations() -> usize {
    80
}
fn default_tolerance() -> f64 {
    1e-6
}

/// Pilot length for the quantized wideband schemes at a given pre-SNR:
/// 12288, 4096, 1024, 512, 128 at -30..-18 dB, then halved for every 3 dB,
/// never below one slot. Only multiples of 3 dB are tabulated.
pub fn default_pilot_length(pre_snr_db: f64) -> Option<usize> {
    let step = pre_snr_db / 3.0;
    if (step - step.round()).abs() > 1e-9 {
        return None;
    }
    match step.round() as i64 {
        -10 => Some(12288),
        -9 => Some(4096),
        -8 => Some(1024),
        -7 => Some(512),
        s if s >= -6 => {
            let halvings = (s + 6) as u32;
            Some((128usize >> halvings.min(63)).max(1))
        }
        _ => None,
    }
}

impl ExperimentConfig {
    /// Parses TOML text. Schema violations name the offending field.
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::de::Deserializer::parse(text)
            .map_err(|e| Error::config("<document>", e.message()))?;
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().message())
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file. A relative profile path is resolved against the
    /// directory of the config file.
    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text)?;
        if let Some(wb) = config.wideband.as_mut() {
            if let (Some(p), Some(dir)) = (wb.profile.as_mut(), path.parent()) {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::config("realizations", "must be at least 1"));
        }
        for (name, spec) in [("rx", &self.rx), ("tx", &self.tx)] {
            if spec.horizontal == 0 || spec.vertical == 0 {
                return Err(Error::config(name, "array dimensions must be positive"));
            }
        }
        match self.kind {
            ScenarioKind::NarrowbandUla if self.rx.horizontal != 1 || self.tx.horizontal != 1 => {
                return Err(Error::config(
                    "rx.horizontal",
                    "a linear array needs horizontal = 1",
                ));
            }
            ScenarioKind::NarrowbandUpa if self.rx.vertical < 2 => {
                return Err(Error::config(
                    "rx.vertical",
                    "a planar receive array needs at least two rows",
                ));
            }
            _ => {}
        }

        if self.kind.is_narrowband() {
            let Some(nb) = &self.narrowband else {
                return Err(Error::config(
                    "narrowband",
                    "required for narrowband scenarios",
                ));
            };
            if self.wideband.is_some() {
                return Err(Error::config(
                    "wideband",
                    "not allowed in a narrowband scenario",
                ));
            }
            if nb.paths == 0 {
                return Err(Error::config("narrowband.paths", "must be at least 1"));
            }
            if nb.path_snr_db.len() != nb.paths {
                return Err(Error::config(
                    "narrowband.path_snr_db",
                    format!(
                        "expected {} entries, found {}",
                        nb.paths,
                        nb.path_snr_db.len()
                    ),
                ));
            }
            if let Some(i) = nb.path_snr_db.iter().position(|v| !v.is_finite()) {
                return Err(Error::config(
                    format!("narrowband.path_snr_db[{i}]"),
                    "must be finite",
                ));
            }
            check_lengths("narrowband.n_d", &nb.n_d)?;
            if !(nb.angle_limit_deg > 0.0 && nb.angle_limit_deg <= 90.0) {
                return Err(Error::config(
                    "narrowband.angle_limit_deg",
                    "must lie in (0, 90]",
                ));
            }
            if nb.paths > 8 {
                return Err(Error::config(
                    "narrowband.paths",
                    "at most 8 paths are supported",
                ));
            }
        } else {
            let Some(wb) = &self.wideband else {
                return Err(Error::config(
                    "wideband",
                    "required for the wideband scenario",
                ));
            };
            if self.narrowband.is_some() {
                return Err(Error::config(
                    "narrowband",
                    "not allowed in a wideband scenario",
                ));
            }
            if wb.pre_snr_db.is_empty() {
                return Err(Error::config("wideband.pre_snr_db", "must not be empty"));
            }
            if let Some(i) = wb.pre_snr_db.iter().position(|v| !v.is_finite()) {
                return Err(Error::config(
                    format!("wideband.pre_snr_db[{i}]"),
                    "must be finite",
                ));
            }
            match &wb.n_d {
                Some(n) => {
                    if n.len() != wb.pre_snr_db.len() {
                        return Err(Error::config(
                            "wideband.n_d",
                            "needs one entry per pre_snr_db value",
                        ));
                    }
                    check_lengths("wideband.n_d", n)?;
                }
                None => {
                    if let Some(i) = wb
                        .pre_snr_db
                        .iter()
                        .position(|p| default_pilot_length(*p).is_none())
                    {
                        return Err(Error::config(
                            format!("wideband.pre_snr_db[{i}]"),
                            "no default pilot length for this SNR; give wideband.n_d explicitly",
                        ));
                    }
                }
            }
            if wb.fft_size == 0
                || wb.subcarrier_spacing_hz.is_nan()
                || wb.subcarrier_spacing_hz <= 0.0
            {
                return Err(Error::config(
                    "wideband.fft_size",
                    "numerology must be positive",
                ));
            }
            if wb.delay_spread_ns.is_nan() || wb.delay_spread_ns < 0.0 {
                return Err(Error::config(
                    "wideband.delay_spread_ns",
                    "must be non-negative",
                ));
            }
            if !(0.0..=1.0).contains(&wb.rolloff) {
                return Err(Error::config("wideband.rolloff", "must lie in [0, 1]"));
            }
        }

        let est = &self.estimator;
        if est.gain_grid_amplitude.is_nan()
            || est.gain_grid_amplitude <= 0.0
            || est.gain_grid_phases == 0
        {
            return Err(Error::config(
                "estimator",
                "gain grid must have positive amplitude and phases",
            ));
        }
        if est.refine_iterations == 0 {
            return Err(Error::config(
                "estimator.refine_iterations",
                "must be positive",
            ));
        }

        for (i, s) in self.schemes().iter().enumerate() {
            let narrow = matches!(s, Scheme::Ideal | Scheme::Est | Scheme::Str);
            if narrow != self.kind.is_narrowband() {
                return Err(Error::config(
                    format!("schemes[{i}]"),
                    format!("{s} does not apply to this scenario"),
                ));
            }
        }
        Ok(())
    }

    pub fn schemes(&self) -> Vec<Scheme> {
        match &self.schemes {
            Some(s) => s.clone(),
            None if self.kind.is_narrowband() => vec![Scheme::Ideal, Scheme::Est, Scheme::Str],
            None => vec![Scheme::Wopt, Scheme::Wunq, Scheme::Wq, Scheme::Wstr],
        }
    }

    pub fn rx_geometry(&self) -> Result<ArrayGeometry> {
        geometry(self.kind, &self.rx)
    }

    pub fn tx_geometry(&self) -> Result<ArrayGeometry> {
        geometry(self.kind, &self.tx)
    }

    pub fn estimator_config(&self) -> Result<EstimatorConfig> {
        Ok(EstimatorConfig {
            grid: GainGrid::new(
                self.estimator.gain_grid_amplitude,
                self.estimator.gain_grid_phases,
            )?,
            refine: RefineOptions {
                max_iterations: self.estimator.refine_iterations,
                tolerance: self.estimator.refine_tolerance,
            },
            ..EstimatorConfig::default()
        })
    }

    /// `(pre-SNR dB, quantized pilot length)` per wideband cell.
    pub fn wideband_schedule(&self) -> Vec<(f64, usize)> {
        let Some(wb) = &self.wideband else {
            return Vec::new();
        };
        wb.pre_snr_db
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let n = match &wb.n_d {
                    Some(n) => n[i],
                    None => default_pilot_length(*p).expect("validated"),
                };
                (*p, n)
            })
            .collect()
    }

    pub fn cdl_config(&self) -> Option<CdlConfig> {
        self.wideband.as_ref().map(|wb| CdlConfig {
            carrier_hz: wb.carrier_hz,
            subcarrier_spacing_hz: wb.subcarrier_spacing_hz,
            fft_size: wb.fft_size,
            delay_spread: wb.delay_spread_ns * 1e-9,
            pulse: RaisedCosine {
                rolloff: wb.rolloff,
                span: wb.pulse_span,
            },
        })
    }
}

fn check_lengths(field: &str, n: &[usize]) -> Result<()> {
    if n.is_empty() {
        return Err(Error::config(field, "must not be empty"));
    }
    if let Some(i) = n.iter().position(|v| *v == 0) {
        return Err(Error::config(
            format!("{field}[{i}]"),
            "pilot lengths must be positive",
        ));
    }
    Ok(())
}

fn geometry(kind: ScenarioKind, spec: &ArraySpec) -> Result<ArrayGeometry> {
    match kind {
        ScenarioKind::NarrowbandUla => ArrayGeometry::ula(spec.vertical),
        _ => ArrayGeometry::upa(spec.horizontal, spec.vertical),
    }
}
