//! Clustered-delay-line profiles and their ray-level realization.
//!
//! Profiles are read from a TOML file with a `[profile]` header (source
//! citation, per-cluster RMS angular spreads and the ray offset basis) and one
//! `[[cluster]]` record per cluster. The CDL-C table is bundled from
//! `data/cdl_c.toml`.

use std::f64::consts::PI;
use std::path::Path as FsPath;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Deserialize;

use super::array::ArrayGeometry;
use super::channel::{Path, PathSet, RaisedCosine, WidebandChannel};
use crate::error::{Error, Result};

const BUNDLED_CDL_C: &str = include_str!("../../data/cdl_c.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    profile: Header,
    cluster: Vec<ClusterRecord>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    name: String,
    source: String,
    c_asd_deg: f64,
    c_asa_deg: f64,
    c_zsd_deg: f64,
    c_zsa_deg: f64,
    #[serde(default)]
    xpr_db: Option<f64>,
    ray_offsets: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterRecord {
    delay: f64,
    power_db: f64,
    aoa_az_deg: f64,
    aoa_zen_deg: f64,
    aod_az_deg: f64,
    aod_zen_deg: f64,
}

/// One cluster, angles in radians with zenith already converted to elevation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    /// Normalized delay (multiply by the RMS delay spread).
    pub delay: f64,
    /// Linear power, normalized so all clusters sum to one.
    pub power: f64,
    pub aoa_azimuth: f64,
    pub aoa_elevation: f64,
    pub aod_azimuth: f64,
    pub aod_elevation: f64,
}

/// Angular spreads (radians) used to expand clusters into rays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSpreads {
    pub asd: f64,
    pub asa: f64,
    pub zsd: f64,
    pub zsa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdlCProfile {
    pub name: String,
    pub source: String,
    pub clusters: Vec<Cluster>,
    pub spreads: ClusterSpreads,
    pub ray_offsets: Vec<f64>,
}

impl CdlCProfile {
    /// The CDL-C table shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CDL_C).expect("bundled CDL-C profile is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ProfileFile = toml::from_str(text).map_err(|e| Error::Profile(e.to_string()))?;
        let h = file.profile;
        if file.cluster.is_empty() {
            return Err(Error::Profile("no [[cluster]] records".into()));
        }
        if h.ray_offsets.is_empty() {
            return Err(Error::Profile("`profile.ray_offsets` is empty".into()));
        }
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Profile(format!("{what} is not finite")))
            }
        };
        let spreads = ClusterSpreads {
            asd: finite(h.c_asd_deg, "c_asd_deg")?.to_radians(),
            asa: finite(h.c_asa_deg, "c_asa_deg")?.to_radians(),
            zsd: finite(h.c_zsd_deg, "c_zsd_deg")?.to_radians(),
            zsa: finite(h.c_zsa_deg, "c_zsa_deg")?.to_radians(),
        };
        if let Some(x) = h.xpr_db {
            finite(x, "xpr_db")?;
        }
        for &o in &h.ray_offsets {
            finite(o, "ray offset")?;
        }

        let mut clusters = Vec::with_capacity(file.cluster.len());
        for (i, c) in file.cluster.iter().enumerate() {
            for (v, name) in [
                (c.delay, "delay"),
                (c.power_db, "power_db"),
                (c.aoa_az_deg, "aoa_az_deg"),
                (c.aoa_zen_deg, "aoa_zen_deg"),
                (c.aod_az_deg, "aod_az_deg"),
                (c.aod_zen_deg, "aod_zen_deg"),
            ] {
                finite(v, &format!("cluster {i} {name}"))?;
            }
            if c.delay < 0.0 {
                return Err(Error::Profile(format!("cluster {i} has a negative delay")));
            }
            clusters.push(Cluster {
                delay: c.delay,
                power: 10f64.powf(c.power_db / 10.0),
                aoa_azimuth: c.aoa_az_deg.to_radians(),
                aoa_elevation: (90.0 - c.aoa_zen_deg).to_radians(),
                aod_azimuth: c.aod_az_deg.to_radians(),
                aod_elevation: (90.0 - c.aod_zen_deg).to_radians(),
            });
        }
        let total: f64 = clusters.iter().map(|c| c.power).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Profile(format!("cluster powers sum to {total}")));
        }
        for c in &mut clusters {
            c.power /= total;
        }
        let check: f64 = clusters.iter().map(|c| c.power).sum();
        if (check - 1.0).abs() > 1e-9 {
            return Err(Error::Profile(format!("normalized powers sum to {check}")));
        }
        Ok(Self {
            name: h.name,
            source: h.source,
            clusters,
            spreads,
            ray_offsets: h.ray_offsets,
        })
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn rays_per_cluster(&self) -> usize {
        self.ray_offsets.len()
    }
}

pub fn load_cdlc(path: impl AsRef<FsPath>) -> Result<CdlCProfile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    CdlCProfile::parse(&text)
}

/// OFDM numerology and delay scaling for a CDL realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdlConfig {
    /// Informational; element spacing is fixed at half a wavelength.
    pub carrier_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub fft_size: usize,
    /// RMS delay spread in seconds.
    pub delay_spread: f64,
    pub pulse: RaisedCosine,
}

impl Default for CdlConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 28e9,
            subcarrier_spacing_hz: 240e3,
            fft_size: 2048,
            delay_spread: 100e-9,
            pulse: RaisedCosine::default(),
        }
    }
}

impl CdlConfig {
    /// `T = 1 / (N_fft * delta_f)`.
    pub fn chip_duration(&self) -> f64 {
        1.0 / (self.fft_size as f64 * self.subcarrier_spacing_hz)
    }
}

fn ray_angles<R: Rng + ?Sized>(center: f64, spread: f64, offsets: &[f64], rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = offsets.iter().map(|o| center + spread * o).collect();
    v.shuffle(rng);
    v
}

/// Expands every cluster into rays with tabulated offsets, random intra-cluster
/// angle coupling and uniform random phases. Ray delays equal the cluster delay
/// times `delay_spread`.
pub fn realize_cdlc_paths<R: Rng + ?Sized>(
    profile: &CdlCProfile,
    delay_spread: f64,
    rng: &mut R,
) -> PathSet {
    let n_rays = profile.rays_per_cluster();
    let sp = profile.spreads;
    let mut paths = Vec::with_capacity(profile.len() * n_rays);
    for c in &profile.clusters {
        let aoa_az = ray_angles(c.aoa_azimuth, sp.asa, &profile.ray_offsets, rng);
        let aoa_el = ray_angles(c.aoa_elevation, sp.zsa, &profile.ray_offsets, rng);
        let aod_az = ray_angles(c.aod_azimuth, sp.asd, &profile.ray_offsets, rng);
        let aod_el = ray_angles(c.aod_elevation, sp.zsd, &profile.ray_offsets, rng);
        let amp = (c.power / n_rays as f64).sqrt();
        for r in 0..n_rays {
            let phase = rng.random_range(-PI..PI);
            paths.push(Path {
                alpha: Complex64::from_polar(amp, phase),
                delay: c.delay * delay_spread,
                aoa_azimuth: aoa_az[r],
                aoa_elevation: aoa_el[r],
                aod_azimuth: aod_az[r],
                aod_elevation: aod_el[r],
            });
        }
    }
    PathSet::new(paths).expect("profile has at least one cluster")
}

pub fn realize_cdlc<R: Rng + ?Sized>(
    profile: &CdlCProfile,
    rng: &mut R,
    rx: &ArrayGeometry,
    tx: &ArrayGeometry,
    config: &CdlConfig,
) -> Result<WidebandChannel> {
    let paths = realize_cdlc_paths(profile, config.delay_spread, rng);
    WidebandChannel::from_paths(&paths, rx, tx, config.chip_duration(), config.pulse)
}
