//! Array geometries and half-wavelength steering vectors.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayKind {
    Ula,
    Upa,
}

/// Uniform linear or planar array with half-wavelength spacing.
///
/// Antennas are indexed `v * m_horizontal + h`, matching the Kronecker
/// ordering `a_V(theta) ⊗ e_H(phi, theta)`. Column `h` of the planar array is
/// therefore the strided set `{h, h + M_H, h + 2 M_H, ...}`. A ULA is stored
/// with `m_horizontal = 1` and all elements along the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    kind: ArrayKind,
    m_horizontal: usize,
    m_vertical: usize,
}

impl ArrayGeometry {
    pub fn ula(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Geometry("ULA needs at least one element".into()));
        }
        Ok(Self {
            kind: ArrayKind::Ula,
            m_horizontal: 1,
            m_vertical: m,
        })
    }

    pub fn upa(m_horizontal: usize, m_vertical: usize) -> Result<Self> {
        if m_horizontal == 0 || m_vertical == 0 {
            return Err(Error::Geometry(format!(
                "UPA dimensions must be positive, got {m_horizontal}x{m_vertical}"
            )));
        }
        Ok(Self {
            kind: ArrayKind::Upa,
            m_horizontal,
            m_vertical,
        })
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    pub fn m_horizontal(&self) -> usize {
        self.m_horizontal
    }

    pub fn m_vertical(&self) -> usize {
        self.m_vertical
    }

    pub fn len(&self) -> usize {
        self.m_horizontal * self.m_vertical
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_upa(&self) -> bool {
        self.kind == ArrayKind::Upa
    }

    /// Antenna indices of column `i` (fixed horizontal index), top to bottom.
    pub fn column(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.m_vertical).map(move |v| v * self.m_horizontal + i)
    }

    /// Steering vector for an arrival from (`azimuth`, `elevation`).
    ///
    /// For a ULA the azimuth is ignored. No domain check is applied; CDL
    /// azimuths outside [-pi/2, pi/2] alias onto their front/back mirror.
    pub fn response(&self, azimuth: f64, elevation: f64) -> DVector<Complex64> {
        let vertical = elevation.sin();
        let horizontal = elevation.cos() * azimuth.sin();
        let mh = self.m_horizontal;
        DVector::from_fn(self.len(), |m, _| {
            let (v, h) = (m / mh, m % mh);
            let h_phase = if mh == 1 { 0.0 } else { horizontal * h as f64 };
            Complex64::from_polar(1.0, PI * (vertical * v as f64 + h_phase))
        })
    }
}

fn check_angle(value: f64) -> Result<()> {
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&value) {
        return Err(Error::AngleDomain {
            value,
            lo: -FRAC_PI_2,
            hi: FRAC_PI_2,
        });
    }
    Ok(())
}

/// `a_M(theta)`: element `m` is `exp(j pi sin(theta) m)`, 0-based.
pub fn ula_response(theta: f64, m: usize) -> Result<DVector<Complex64>> {
    check_angle(theta)?;
    if m == 0 {
        return Err(Error::Geometry("ULA needs at least one element".into()));
    }
    let s = theta.sin();
    Ok(DVector::from_fn(m, |i, _| {
        Complex64::from_polar(1.0, PI * s * i as f64)
    }))
}

/// `a_{M_V}(theta) ⊗ e_{M_H}(phi, theta)` for a planar array.
pub fn upa_response(
    azimuth: f64,
    elevation: f64,
    geometry: &ArrayGeometry,
) -> Result<DVector<Complex64>> {
    if !geometry.is_upa() {
        return Err(Error::Geometry("upa_response needs a UPA geometry".into()));
    }
    check_angle(elevation)?;
    Ok(geometry.response(azimuth, elevation))
}
