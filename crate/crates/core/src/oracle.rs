//! Direct-loop reference implementations. Slow on purpose; every simulator
//! output is checked against these.

use crate::error::{Error, Result};
use crate::net::{LayerKind, LayerSpec, NetworkSpec};
use crate::quant::{QKernels, QTensor, QuantMode};

/// Requantization written with division so it shares no arithmetic with the
/// shift-based path used by the simulator.
pub fn requantize_ref(acc: i32, scale_exp: u32, relu: bool) -> i8 {
    let mut v = acc as i64;
    if relu && v < 0 {
        v = 0;
    }
    let div = 2i64.pow(scale_exp);
    let q = v.abs() / div;
    let r = v.abs() % div;
    let mag = if div > 1 && 2 * r >= div { q + 1 } else { q };
    let rounded = if v < 0 { -mag } else { mag };
    rounded.clamp(-128, 127) as i8
}

fn check_input(input: &QTensor, layer: &LayerSpec) -> Result<()> {
    if input.dims() != (layer.in_ch, layer.in_h, layer.in_w) {
        return Err(Error::Shape(format!(
            "layer `{}` expects {}x{}x{} input, got {:?}",
            layer.name, layer.in_ch, layer.in_h, layer.in_w,
            input.dims()
        )));
    }
    Ok(())
}

fn check_kernels(kernels: &QKernels, layer: &LayerSpec, planes: usize) -> Result<()> {
    if (kernels.out_ch, kernels.in_ch, kernels.k) != (layer.out_ch, planes, layer.kernel) {
        return Err(Error::Shape(format!(
            "layer `{}` expects {}x{}x{}x{} kernels",
            layer.name, layer.out_ch, planes, layer.kernel, layer.kernel
        )));
    }
    Ok(())
}

/// Standard or 1x1 convolution under the default quantization mode.
pub fn conv2d_ref(input: &QTensor, kernels: &QKernels, layer: &LayerSpec, scale_exp: u32) -> Result<QTensor> {
    conv2d_ref_mode(input, kernels, layer, scale_exp, QuantMode::PostAccumulation)
}

pub fn conv2d_ref_mode(
    input: &QTensor,
    kernels: &QKernels,
    layer: &LayerSpec,
    scale_exp: u32,
    mode: QuantMode,
) -> Result<QTensor> {
    check_input(input, layer)?;
    check_kernels(kernels, layer, layer.in_ch)?;
    let (oh, ow) = layer.output_dims();
    let mut out = QTensor::zeros(layer.out_ch, oh, ow);
    out.scale_exp = input.scale_exp + kernels.scale_exp + scale_exp as i32;
    for m in 0..layer.out_ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc: i32 = 0;
                for n in 0..layer.in_ch {
                    for ky in 0..layer.kernel {
                        for kx in 0..layer.kernel {
                            let y = (oy * layer.stride + ky) as isize - layer.pad as isize;
                            let x = (ox * layer.stride + kx) as isize - layer.pad as isize;
                            if y < 0 || x < 0 || y >= layer.in_h as isize || x >= layer.in_w as isize {
                                continue;
                            }
                            let p = input.get(n, y as usize, x as usize) as i32
                                * kernels.get(m, n, ky, kx) as i32;
                            acc += match mode {
                                QuantMode::PostAccumulation => p,
                                QuantMode::PerProduct => requantize_ref(p, scale_exp, false) as i32,
                            };
                        }
                    }
                }
                let v = match mode {
                    QuantMode::PostAccumulation => requantize_ref(acc, scale_exp, layer.relu),
                    QuantMode::PerProduct => requantize_ref(acc, 0, layer.relu),
                };
                out.set(m, oy, ox, v);
            }
        }
    }
    Ok(out)
}

/// Per-channel convolution, built from single-channel [`conv2d_ref`] calls.
pub fn depthwise_ref(input: &QTensor, kernels: &QKernels, layer: &LayerSpec, scale_exp: u32) -> Result<QTensor> {
    depthwise_ref_mode(input, kernels, layer, scale_exp, QuantMode::PostAccumulation)
}

pub fn depthwise_ref_mode(
    input: &QTensor,
    kernels: &QKernels,
    layer: &LayerSpec,
    scale_exp: u32,
    mode: QuantMode,
) -> Result<QTensor> {
    if layer.in_ch != layer.out_ch {
        return Err(Error::Shape("depthwise requires out_ch == in_ch".into()));
    }
    check_input(input, layer)?;
    check_kernels(kernels, layer, 1)?;
    let single = LayerSpec {
        kind: LayerKind::StandardConv,
        in_ch: 1,
        out_ch: 1,
        ..layer.clone()
    };
    let (oh, ow) = layer.output_dims();
    let plane_in = layer.in_h * layer.in_w;
    let plane_k = layer.kernel * layer.kernel;
    let mut data = Vec::with_capacity(layer.out_ch * oh * ow);
    for c in 0..layer.in_ch {
        let x = QTensor::new(1, layer.in_h, layer.in_w, input.scale_exp, input.data[c * plane_in..(c + 1) * plane_in].to_vec())?;
        let k = QKernels::new(1, 1, layer.kernel, kernels.scale_exp, kernels.data[c * plane_k..(c + 1) * plane_k].to_vec())?;
        data.extend(conv2d_ref_mode(&x, &k, &single, scale_exp, mode)?.data);
    }
    QTensor::new(layer.out_ch, oh, ow, input.scale_exp + kernels.scale_exp + scale_exp as i32, data)
}

/// 2x2, stride-2 max pooling per channel.
pub fn maxpool_ref(input: &QTensor) -> Result<QTensor> {
    let (c, h, w) = input.dims();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("cannot pool odd map {h}x{w}")));
    }
    let mut out = QTensor::zeros(c, h / 2, w / 2);
    out.scale_exp = input.scale_exp;
    for ch in 0..c {
        for y in 0..h / 2 {
            for x in 0..w / 2 {
                let quad = [
                    input.get(ch, 2 * y, 2 * x),
                    input.get(ch, 2 * y, 2 * x + 1),
                    input.get(ch, 2 * y + 1, 2 * x),
                    input.get(ch, 2 * y + 1, 2 * x + 1),
                ];
                out.set(ch, y, x, *quad.iter().max().unwrap());
            }
        }
    }
    Ok(out)
}

/// One layer including its trailing pool, dispatched on kind.
pub fn layer_ref(
    input: &QTensor,
    kernels: &QKernels,
    layer: &LayerSpec,
    scale_exp: u32,
    mode: QuantMode,
) -> Result<QTensor> {
    let out = match layer.kind {
        LayerKind::DepthwiseConv => depthwise_ref_mode(input, kernels, layer, scale_exp, mode)?,
        _ => conv2d_ref_mode(input, kernels, layer, scale_exp, mode)?,
    };
    if layer.pool_after {
        maxpool_ref(&out)
    } else {
        Ok(out)
    }
}

pub fn network_ref(
    net: &NetworkSpec,
    input: &QTensor,
    weights: &[QKernels],
    shifts: &[u32],
    mode: QuantMode,
) -> Result<QTensor> {
    if weights.len() != net.layers.len() || shifts.len() != net.layers.len() {
        return Err(Error::PlanMismatch {
            plan: weights.len().min(shifts.len()),
            network: net.layers.len(),
        });
    }
    let mut x = input.clone();
    for ((layer, k), &s) in net.layers.iter().zip(weights).zip(shifts) {
        x = layer_ref(&x, k, layer, s, mode)?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(size: usize) -> LayerSpec {
        LayerSpec {
            relu: false,
            ..LayerSpec::conv3x3("t", size, 1, 1, false)
        }
    }

    #[test]
    fn requantize_examples() {
        assert_eq!(requantize_ref(0, 7, true), 0);
        assert_eq!(requantize_ref(300, 0, true), 127);
        assert_eq!(requantize_ref(-3, 1, false), -2);
        assert_eq!(requantize_ref(3, 1, false), 2);
        assert_eq!(requantize_ref(-5, 2, false), -1);
    }

    #[test]
    fn ones_kernel_border_sums() {
        let x = QTensor::new(1, 4, 4, 0, vec![1; 16]).unwrap();
        let k = QKernels::new(1, 1, 3, 0, vec![1; 9]).unwrap();
        let y = conv2d_ref(&x, &k, &single(4), 0).unwrap();
        assert_eq!(y.get(0, 0, 0), 4);
        assert_eq!(y.get(0, 0, 1), 6);
        assert_eq!(y.get(0, 1, 1), 9);
        assert_eq!(y.get(0, 3, 3), 4);
    }

    #[test]
    fn identity_kernel_is_relu() {
        let x = QTensor::new(2, 2, 2, 0, vec![-5, 3, 7, -1, 0, -128, 127, 2]).unwrap();
        let layer = LayerSpec::conv3x3("id", 2, 2, 2, false);
        let y = conv2d_ref(&x, &QKernels::identity(2, 2, 3), &layer, 0).unwrap();
        let relu: Vec<i8> = x.data.iter().map(|v| (*v).max(0)).collect();
        assert_eq!(y.data, relu);
    }

    #[test]
    fn pooling_examples() {
        let x = QTensor::new(1, 2, 2, 0, vec![1, 2, 3, 4]).unwrap();
        assert_eq!(maxpool_ref(&x).unwrap().data, vec![4]);
        let c = QTensor::new(1, 4, 4, 0, vec![9; 16]).unwrap();
        assert_eq!(maxpool_ref(&c).unwrap().data, vec![9; 4]);
        assert!(maxpool_ref(&QTensor::zeros(1, 3, 4)).is_err());
    }

    #[test]
    fn depthwise_single_channel_matches_conv() {
        let x = QTensor::new(1, 3, 3, 0, (1..=9).collect()).unwrap();
        let k = QKernels::new(1, 1, 3, 0, vec![1, 0, -1, 2, 0, -2, 1, 0, -1]).unwrap();
        let layer = LayerSpec::depthwise("dw", 3, 1, 1);
        let a = depthwise_ref(&x, &k, &layer, 0).unwrap();
        let b = conv2d_ref(&x, &k, &LayerSpec::conv3x3("c", 3, 1, 1, false), 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let layer = LayerSpec::conv3x3("s", 4, 2, 1, false);
        let x = QTensor::zeros(1, 4, 4);
        assert!(conv2d_ref(&x, &QKernels::zeros(1, 2, 3), &layer, 0).is_err());
    }
}
