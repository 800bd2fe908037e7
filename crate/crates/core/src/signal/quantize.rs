//! 1-bit complex quantizer and the per-antenna count statistics it feeds.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Sign quantizer with `sign(0) = +1`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `Q(z) = sign(Re z) + j sign(Im z)`.
#[inline]
pub fn quantize(z: Complex64) -> Complex64 {
    Complex64::new(sign(z.re), sign(z.im))
}

/// 1-bit observations `R = [r[1] ... r[N_d]]` of an `M`-antenna array.
///
/// Per-slot bits are always retained, so the same snapshot serves both the
/// count-based coherent objectives and the per-slot noncoherent ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedSnapshot {
    n_antennas: usize,
    n_slots: usize,
    // row-major: antenna m, slot t at m * n_slots + t; true means +1
    re_bits: Vec<bool>,
    im_bits: Vec<bool>,
    mu: Vec<u32>,
    nu: Vec<u32>,
}

impl QuantizedSnapshot {
    /// Builds a snapshot from raw bits laid out antenna-major.
    pub fn from_bits(
        n_antennas: usize,
        n_slots: usize,
        re_bits: Vec<bool>,
        im_bits: Vec<bool>,
    ) -> Self {
        assert_eq!(re_bits.len(), n_antennas * n_slots);
        assert_eq!(im_bits.len(), n_antennas * n_slots);
        let count = |bits: &[bool]| -> Vec<u32> {
            if n_slots == 0 {
                return vec![0; n_antennas];
            }
            bits.chunks(n_slots)
                .map(|row| row.iter().filter(|b| **b).count() as u32)
                .collect()
        };
        let mu = count(&re_bits);
        let nu = count(&im_bits);
        Self {
            n_antennas,
            n_slots,
            re_bits,
            im_bits,
            mu,
            nu,
        }
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    /// `mu_m = sum_t (Re r_m[t] + 1) / 2`.
    pub fn mu(&self) -> &[u32] {
        &self.mu
    }

    /// `nu_m = sum_t (Im r_m[t] + 1) / 2`.
    pub fn nu(&self) -> &[u32] {
        &self.nu
    }

    #[inline]
    pub fn re_bit(&self, m: usize, t: usize) -> bool {
        self.re_bits[m * self.n_slots + t]
    }

    #[inline]
    pub fn im_bit(&self, m: usize, t: usize) -> bool {
        self.im_bits[m * self.n_slots + t]
    }

    pub fn entry(&self, m: usize, t: usize) -> Complex64 {
        let s = |b: bool| if b { 1.0 } else { -1.0 };
        Complex64::new(s(self.re_bit(m, t)), s(self.im_bit(m, t)))
    }

    /// The quantized matrix with entries in `{±1 ± j}`.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n_antennas, self.n_slots, |m, t| self.entry(m, t))
    }

    /// Snapshot restricted to the first `n` slots.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.n_slots);
        let take = |bits: &[bool]| -> Vec<bool> {
            (0..self.n_antennas)
                .flat_map(|m| bits[m * self.n_slots..m * self.n_slots + n].iter().copied())
                .collect()
        };
        Self::from_bits(self.n_antennas, n, take(&self.re_bits), take(&self.im_bits))
    }
}

/// Element-wise 1-bit quantization of `z` (antennas × slots).
pub fn quantize_1bit(z: &DMatrix<Complex64>) -> QuantizedSnapshot {
    let (m, n) = z.shape();
    let mut re_bits = Vec::with_capacity(m * n);
    let mut im_bits = Vec::with_capacity(m * n);
    for i in 0..m {
        for t in 0..n {
            let q = quantize(z[(i, t)]);
            re_bits.push(q.re > 0.0);
            im_bits.push(q.im > 0.0);
        }
    }
    QuantizedSnapshot::from_bits(m, n, re_bits, im_bits)
}
