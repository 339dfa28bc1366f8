//! 8-bit fixed-point tensors and the requantization step applied after
//! accumulation.
//!
//! A value `q` with exponent `e` stands for `q * 2^e`. Convolving a tensor
//! with exponent `ei` by kernels with exponent `ew` and shifting the 32-bit
//! accumulator right by `s` gives an output exponent `ei + ew + s`.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QTensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub scale_exp: i32,
    pub data: Vec<i8>,
}

impl QTensor {
    pub fn new(channels: usize, height: usize, width: usize, scale_exp: i32, data: Vec<i8>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "{} values for a {channels}x{height}x{width} tensor",
                data.len()
            )));
        }
        Ok(QTensor {
            channels,
            height,
            width,
            scale_exp,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        QTensor {
            channels,
            height,
            width,
            scale_exp: 0,
            data: vec![0; channels * height * width],
        }
    }

    pub fn random<R: Rng + ?Sized>(channels: usize, height: usize, width: usize, rng: &mut R) -> Self {
        let data = (0..channels * height * width)
            .map(|_| rng.random_range(i8::MIN..=i8::MAX))
            .collect();
        QTensor {
            channels,
            height,
            width,
            scale_exp: 0,
            data,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> i8 {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: i8) {
        let i = self.index(c, y, x);
        self.data[i] = v;
    }
}

/// A bank of square kernels: `out_ch` kernels of `in_ch` planes each
/// (`in_ch` is 1 for depthwise layers).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QKernels {
    pub out_ch: usize,
    pub in_ch: usize,
    pub k: usize,
    pub scale_exp: i32,
    pub data: Vec<i8>,
}

impl QKernels {
    pub fn new(out_ch: usize, in_ch: usize, k: usize, scale_exp: i32, data: Vec<i8>) -> Result<Self> {
        if data.len() != out_ch * in_ch * k * k {
            return Err(Error::Shape(format!(
                "{} weights for {out_ch}x{in_ch}x{k}x{k} kernels",
                data.len()
            )));
        }
        Ok(QKernels {
            out_ch,
            in_ch,
            k,
            scale_exp,
            data,
        })
    }

    pub fn zeros(out_ch: usize, in_ch: usize, k: usize) -> Self {
        QKernels {
            out_ch,
            in_ch,
            k,
            scale_exp: 0,
            data: vec![0; out_ch * in_ch * k * k],
        }
    }

    pub fn random<R: Rng + ?Sized>(out_ch: usize, in_ch: usize, k: usize, rng: &mut R) -> Self {
        let data = (0..out_ch * in_ch * k * k)
            .map(|_| rng.random_range(i8::MIN..=i8::MAX))
            .collect();
        QKernels {
            out_ch,
            in_ch,
            k,
            scale_exp: 0,
            data,
        }
    }

    /// Kernels with a single 1 at the centre tap of plane `m` for output `m`.
    pub fn identity(ch: usize, in_ch: usize, k: usize) -> Self {
        let mut kern = QKernels::zeros(ch, in_ch, k);
        for m in 0..ch {
            let n = if in_ch == 1 { 0 } else { m };
            let i = kern.index(m, n, k / 2, k / 2);
            kern.data[i] = 1;
        }
        kern
    }

    #[inline]
    pub fn index(&self, m: usize, n: usize, ky: usize, kx: usize) -> usize {
        ((m * self.in_ch + n) * self.k + ky) * self.k + kx
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize, ky: usize, kx: usize) -> i8 {
        self.data[self.index(m, n, ky, kx)]
    }

    /// The `k*k` taps of one kernel plane, row-major.
    pub fn plane(&self, m: usize, n: usize) -> &[i8] {
        let start = self.index(m, n, 0, 0);
        &self.data[start..start + self.k * self.k]
    }

    pub fn count(&self) -> usize {
        self.out_ch * self.in_ch
    }
}

/// Where the 32-bit result is brought back to 8 bits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantMode {
    /// Accumulate full-precision products, then ReLU, shift and saturate once.
    #[default]
    PostAccumulation,
    /// Shift and saturate every product to 8 bits before it enters the sum;
    /// the final sum is ReLU'd and saturated without a further shift.
    PerProduct,
}

#[inline]
fn saturate(v: i32) -> i8 {
    v.clamp(i8::MIN as i32, i8::MAX as i32) as i8
}

/// Arithmetic right shift rounding ties away from zero.
#[inline]
pub fn round_shift(v: i32, shift: u32) -> i32 {
    if shift == 0 {
        return v;
    }
    let half = 1i64 << (shift - 1);
    let mag = ((v as i64).abs() + half) >> shift;
    (if v < 0 { -mag } else { mag }) as i32
}

#[inline]
pub fn requantize(acc: i32, shift: u32, relu: bool) -> i8 {
    let acc = if relu { acc.max(0) } else { acc };
    saturate(round_shift(acc, shift))
}

/// One product as seen by the adder tree in [`QuantMode::PerProduct`].
#[inline]
pub fn quantize_product(p: i32, shift: u32) -> i32 {
    saturate(round_shift(p, shift)) as i32
}

/// Final step for an accumulator produced under `mode`.
#[inline]
pub fn finish(acc: i32, shift: u32, relu: bool, mode: QuantMode) -> i8 {
    match mode {
        QuantMode::PostAccumulation => requantize(acc, shift, relu),
        QuantMode::PerProduct => requantize(acc, 0, relu),
    }
}
