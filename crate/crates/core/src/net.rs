//! Network descriptions: layer shapes, validation, the JSON config format and
//! the built-in evaluation networks.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    StandardConv,
    DepthwiseConv,
    PointwiseConv,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::StandardConv => "standard_conv",
            LayerKind::DepthwiseConv => "depthwise_conv",
            LayerKind::PointwiseConv => "pointwise_conv",
        })
    }
}

/// One convolution layer. Field names match the network config file.
///
/// Pooling, when present, is always 2x2 max pooling with stride 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub in_h: usize,
    pub in_w: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub pool_after: bool,
    pub relu: bool,
}

impl LayerSpec {
    /// A 3x3, stride-1, same-padded standard convolution.
    pub fn conv3x3(name: &str, size: usize, in_ch: usize, out_ch: usize, pool_after: bool) -> Self {
        LayerSpec {
            name: name.to_owned(),
            kind: LayerKind::StandardConv,
            in_h: size,
            in_w: size,
            in_ch,
            out_ch,
            kernel: 3,
            stride: 1,
            pad: 1,
            pool_after,
            relu: true,
        }
    }

    pub fn depthwise(name: &str, size: usize, ch: usize, stride: usize) -> Self {
        LayerSpec {
            name: name.to_owned(),
            kind: LayerKind::DepthwiseConv,
            in_h: size,
            in_w: size,
            in_ch: ch,
            out_ch: ch,
            kernel: 3,
            stride,
            pad: 1,
            pool_after: false,
            relu: true,
        }
    }

    pub fn pointwise(name: &str, size: usize, in_ch: usize, out_ch: usize) -> Self {
        LayerSpec {
            name: name.to_owned(),
            kind: LayerKind::PointwiseConv,
            in_h: size,
            in_w: size,
            in_ch,
            out_ch,
            kernel: 1,
            stride: 1,
            pad: 0,
            pool_after: false,
            relu: true,
        }
    }

    /// Output spatial dims `(out_h, out_w)` before any pooling.
    pub fn output_dims(&self) -> (usize, usize) {
        (
            conv_out(self.in_h, self.kernel, self.stride, self.pad),
            conv_out(self.in_w, self.kernel, self.stride, self.pad),
        )
    }

    /// Spatial dims handed to the next layer (after the optional pool).
    pub fn next_dims(&self) -> (usize, usize) {
        let (h, w) = self.output_dims();
        if self.pool_after {
            (h / 2, w / 2)
        } else {
            (h, w)
        }
    }

    pub fn output_pixels(&self) -> u64 {
        let (h, w) = self.output_dims();
        (h * w) as u64
    }

    /// Multiply-accumulates needed to evaluate the layer once.
    pub fn macs(&self) -> u64 {
        let taps = (self.kernel * self.kernel) as u64;
        let per_out = match self.kind {
            LayerKind::DepthwiseConv => taps,
            _ => taps * self.in_ch as u64,
        };
        self.output_pixels() * self.out_ch as u64 * per_out
    }

    /// Number of kernel weights.
    pub fn parameters(&self) -> u64 {
        let taps = (self.kernel * self.kernel) as u64;
        match self.kind {
            LayerKind::DepthwiseConv => taps * self.in_ch as u64,
            _ => taps * self.in_ch as u64 * self.out_ch as u64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::validation(&self.name, reason));
        if self.in_ch == 0 || self.out_ch == 0 {
            return fail("channel counts must be >= 1".into());
        }
        if self.in_h == 0 || self.in_w == 0 {
            return fail("input dims must be >= 1".into());
        }
        if !matches!(self.kernel, 1 | 3) {
            return fail(format!("kernel {} not in {{1, 3}}", self.kernel));
        }
        if !matches!(self.stride, 1 | 2) {
            return fail(format!("stride {} not in {{1, 2}}", self.stride));
        }
        if self.pad >= self.kernel {
            return fail(format!("pad {} must be smaller than kernel {}", self.pad, self.kernel));
        }
        for (axis, extent) in [("in_h", self.in_h), ("in_w", self.in_w)] {
            let padded = extent + 2 * self.pad;
            if padded < self.kernel {
                return fail(format!("{axis}+2P smaller than kernel"));
            }
            // A remainder is tolerated only when it falls entirely in the
            // trailing padding, so no real input pixel is dropped.
            let rem = (padded - self.kernel) % self.stride;
            if rem > self.pad {
                return fail(format!("({axis}+2P-K) not divisible by S"));
            }
        }
        if self.pool_after {
            let (h, w) = self.output_dims();
            if h % 2 != 0 || w % 2 != 0 {
                return fail(format!("pooled layer has odd output dims {h}x{w}"));
            }
        }
        match self.kind {
            LayerKind::DepthwiseConv if self.in_ch != self.out_ch => {
                fail("depthwise_conv requires out_ch == in_ch".into())
            }
            LayerKind::PointwiseConv if self.kernel != 1 || self.pad != 0 => {
                fail("pointwise_conv requires kernel 1 and pad 0".into())
            }
            _ => Ok(()),
        }
    }
}

fn conv_out(extent: usize, k: usize, s: usize, p: usize) -> usize {
    (extent + 2 * p).saturating_sub(k) / s + 1
}

/// Free-function form of [`LayerSpec::output_dims`].
pub fn output_dims(layer: &LayerSpec) -> (usize, usize) {
    layer.output_dims()
}

/// An ordered chain of layers operating on 8-bit fixed-point data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(name: &str, layers: Vec<LayerSpec>) -> Result<Self> {
        let net = NetworkSpec {
            name: name.to_owned(),
            layers,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::validation(&self.name, "network has no layers"));
        }
        for layer in &self.layers {
            layer.validate()?;
        }
        for pair in self.layers.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            let (h, w) = prev.next_dims();
            if (next.in_h, next.in_w) != (h, w) {
                return Err(Error::validation(
                    &next.name,
                    format!(
                        "input {}x{} does not match previous output {}x{}",
                        next.in_h, next.in_w, h, w
                    ),
                ));
            }
            if next.in_ch != prev.out_ch {
                return Err(Error::validation(
                    &next.name,
                    format!("in_ch {} does not match previous out_ch {}", next.in_ch, prev.out_ch),
                ));
            }
        }
        Ok(())
    }

    pub fn total_macs(&self) -> u64 {
        self.layers.iter().map(LayerSpec::macs).sum()
    }

    /// Copy of the network with every spatial dim divided by `factor`.
    pub fn scaled_down(&self, factor: usize) -> Result<Self> {
        let layers = self
            .layers
            .iter()
            .map(|l| LayerSpec {
                in_h: l.in_h / factor,
                in_w: l.in_w / factor,
                ..l.clone()
            })
            .collect();
        NetworkSpec::new(&format!("{}-div{}", self.name, factor), layers)
    }
}

pub fn parse_network(text: &str) -> Result<NetworkSpec> {
    let net: NetworkSpec = serde_json::from_str(text)?;
    net.validate()?;
    Ok(net)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<NetworkSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_network(&text)
}

/// Parses `HxWxNxMkKsSpP` (e.g. `16x16x4x32k3s1p1`) with optional
/// suffixes `+pool`, `+dw` (depthwise) and `+linear` (no ReLU). A 1x1
/// kernel makes a pointwise layer.
pub fn parse_layer_shorthand(text: &str) -> Result<LayerSpec> {
    let bad = || Error::validation(text, "expected HxWxNxMkKsSpP[+pool][+dw][+linear]");
    let mut parts = text.split('+');
    let shape = parts.next().ok_or_else(bad)?;
    let (dims, rest) = shape.split_once('k').ok_or_else(bad)?;
    let (k, rest) = rest.split_once('s').ok_or_else(bad)?;
    let (s, p) = rest.split_once('p').ok_or_else(bad)?;
    let dims: Vec<usize> = dims
        .split('x')
        .map(|d| d.parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [h, w, n, m] = dims[..] else {
        return Err(bad());
    };
    let num = |v: &str| v.parse::<usize>().map_err(|_| bad());
    let (kernel, stride, pad) = (num(k)?, num(s)?, num(p)?);
    let mut layer = LayerSpec {
        name: text.to_owned(),
        kind: if kernel == 1 { LayerKind::PointwiseConv } else { LayerKind::StandardConv },
        in_h: h,
        in_w: w,
        in_ch: n,
        out_ch: m,
        kernel,
        stride,
        pad,
        pool_after: false,
        relu: true,
    };
    for flag in parts {
        match flag {
            "pool" => layer.pool_after = true,
            "dw" => layer.kind = LayerKind::DepthwiseConv,
            "linear" => layer.relu = false,
            _ => return Err(bad()),
        }
    }
    layer.validate()?;
    Ok(layer)
}

pub fn to_json(net: &NetworkSpec) -> String {
    serde_json::to_string_pretty(net).expect("network serializes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Ecnn,
    Vgg16,
    MobilenetV1,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [Builtin::Ecnn, Builtin::Vgg16, Builtin::MobilenetV1];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Ecnn => "ecnn",
            Builtin::Vgg16 => "vgg16",
            Builtin::MobilenetV1 => "mobilenet_v1",
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ecnn" => Ok(Builtin::Ecnn),
            "vgg16" => Ok(Builtin::Vgg16),
            "mobilenet_v1" | "mobilenet" => Ok(Builtin::MobilenetV1),
            other => Err(Error::UnknownNetwork(other.to_owned())),
        }
    }
}

pub fn builtin_network(which: Builtin) -> NetworkSpec {
    let layers = match which {
        Builtin::Ecnn => ecnn_layers(),
        Builtin::Vgg16 => vgg16_layers(),
        Builtin::MobilenetV1 => mobilenet_v1_layers(),
    };
    NetworkSpec::new(which.name(), layers).expect("built-in networks are valid")
}

/// Resolves a builtin name, the `ecnn-mini` alias (eCNN with spatial dims
/// divided by 8) or a path to a config file.
pub fn resolve_network(source: &str) -> Result<NetworkSpec> {
    if let Ok(b) = source.parse::<Builtin>() {
        return Ok(builtin_network(b));
    }
    if source == "ecnn-mini" {
        let mut net = builtin_network(Builtin::Ecnn).scaled_down(8)?;
        net.name = "ecnn-mini".into();
        return Ok(net);
    }
    if Path::new(source).exists() {
        return load_network(source);
    }
    Err(Error::UnknownNetwork(source.to_owned()))
}

fn ecnn_layers() -> Vec<LayerSpec> {
    let mut layers = vec![LayerSpec::conv3x3("L1", 256, 3, 32, true)];
    let shapes = [
        (128, 32, false),
        (128, 32, true),
        (64, 32, false),
        (64, 32, true),
        (32, 32, false),
        (32, 32, true),
        (16, 32, false),
        (16, 64, false),
    ];
    for (i, (size, out_ch, pool)) in shapes.into_iter().enumerate() {
        layers.push(LayerSpec::conv3x3(&format!("L{}", i + 2), size, 32, out_ch, pool));
    }
    if let Some(last) = layers.last_mut() {
        last.relu = false;
    }
    layers
}

fn vgg16_layers() -> Vec<LayerSpec> {
    // (size, in, out, pool) for the 13 convolution layers
    let cfg = [
        (224, 3, 64, false),
        (224, 64, 64, true),
        (112, 64, 128, false),
        (112, 128, 128, true),
        (56, 128, 256, false),
        (56, 256, 256, false),
        (56, 256, 256, true),
        (28, 256, 512, false),
        (28, 512, 512, false),
        (28, 512, 512, true),
        (14, 512, 512, false),
        (14, 512, 512, false),
        (14, 512, 512, true),
    ];
    let names = [
        "conv1_1", "conv1_2", "conv2_1", "conv2_2", "conv3_1", "conv3_2", "conv3_3", "conv4_1",
        "conv4_2", "conv4_3", "conv5_1", "conv5_2", "conv5_3",
    ];
    cfg.iter()
        .zip(names)
        .map(|(&(size, i, o, pool), name)| LayerSpec::conv3x3(name, size, i, o, pool))
        .collect()
}

fn mobilenet_v1_layers() -> Vec<LayerSpec> {
    let mut layers = vec![LayerSpec {
        stride: 2,
        ..LayerSpec::conv3x3("conv1", 224, 3, 32, false)
    }];
    // (pointwise out channels, depthwise stride)
    let blocks = [
        (64, 1),
        (128, 2),
        (128, 1),
        (256, 2),
        (256, 1),
        (512, 2),
        (512, 1),
        (512, 1),
        (512, 1),
        (512, 1),
        (512, 1),
        (1024, 2),
        (1024, 1),
    ];
    let (mut size, mut ch) = (112, 32);
    for (i, (out, stride)) in blocks.into_iter().enumerate() {
        let dw = LayerSpec::depthwise(&format!("dw{}", i + 2), size, ch, stride);
        size = dw.output_dims().0;
        layers.push(dw);
        layers.push(LayerSpec::pointwise(&format!("pw{}", i + 2), size, ch, out));
        ch = out;
    }
    layers
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_shorthand() {
        let l = parse_layer_shorthand("16x16x4x32k3s1p1").unwrap();
        assert_eq!(l, LayerSpec { name: l.name.clone(), ..LayerSpec::conv3x3("", 16, 4, 32, false) });
        let pw = parse_layer_shorthand("8x8x32x32k1s1p0").unwrap();
        assert_eq!(pw.kind, LayerKind::PointwiseConv);
        let dw = parse_layer_shorthand("8x8x32x32k3s2p1+dw").unwrap();
        assert_eq!((dw.kind, dw.output_dims()), (LayerKind::DepthwiseConv, (4, 4)));
        assert!(parse_layer_shorthand("16x16x4k3s1p1").is_err());
        assert!(parse_layer_shorthand("15x15x4x4k3s1p1+pool").is_err());
    }

    #[test]
    fn output_dims_cases() {
        let same = LayerSpec::conv3x3("a", 256, 3, 32, false);
        assert_eq!(output_dims(&same), (256, 256));
        let halving = LayerSpec {
            stride: 2,
            ..LayerSpec::conv3x3("b", 224, 3, 32, false)
        };
        assert_eq!(halving.output_dims(), (112, 112));
        assert_eq!(LayerSpec::pointwise("c", 16, 8, 8).output_dims(), (16, 16));
    }

    #[test]
    fn rejects_dropped_input_rows() {
        let bad = LayerSpec {
            in_h: 6,
            in_w: 6,
            stride: 2,
            pad: 0,
            ..LayerSpec::conv3x3("bad", 6, 1, 1, false)
        };
        let err = bad.validate().unwrap_err().to_string();
        assert!(err.contains("not divisible by S"), "{err}");
    }

    #[test]
    fn kind_constraints() {
        let mut dw = LayerSpec::depthwise("dw", 8, 4, 1);
        dw.out_ch = 8;
        assert!(dw.validate().is_err());
        let mut pw = LayerSpec::pointwise("pw", 8, 4, 4);
        pw.pad = 1;
        assert!(pw.validate().is_err());
        let mut k5 = LayerSpec::conv3x3("k5", 8, 1, 1, false);
        k5.kernel = 5;
        assert!(k5.validate().is_err());
    }

    #[test]
    fn odd_pooled_output_rejected() {
        let l = LayerSpec::conv3x3("p", 7, 1, 1, true);
        assert!(l.validate().unwrap_err().to_string().contains("odd"));
    }

    #[test]
    fn builtin_shapes() {
        let ecnn = builtin_network(Builtin::Ecnn);
        assert_eq!(ecnn.layers.len(), 9);
        let l2 = &ecnn.layers[1];
        assert_eq!((l2.in_h, l2.in_w, l2.in_ch, l2.out_ch), (128, 128, 32, 32));

        let vgg = builtin_network(Builtin::Vgg16);
        assert_eq!(vgg.layers.len(), 13);
        assert_eq!((vgg.layers[0].in_ch, vgg.layers[0].out_ch), (3, 64));
        assert_eq!(vgg.layers[12].output_dims(), (14, 14));

        let mb = builtin_network(Builtin::MobilenetV1);
        assert_eq!(mb.layers.len(), 27);
        assert_eq!(mb.layers.last().unwrap().output_dims(), (7, 7));
        assert_eq!(mb.layers.last().unwrap().out_ch, 1024);
    }

    #[test]
    fn builtins_are_chain_consistent_and_pure() {
        for b in Builtin::ALL {
            let net = builtin_network(b);
            for pair in net.layers.windows(2) {
                assert_eq!(pair[0].next_dims(), (pair[1].in_h, pair[1].in_w));
                assert_eq!(pair[0].out_ch, pair[1].in_ch);
            }
            assert_eq!(net, builtin_network(b));
        }
    }

    #[test]
    fn vgg_mac_count() {
        // 15.35 GMAC is the commonly quoted figure for the VGG-16 conv stack
        let macs = builtin_network(Builtin::Vgg16).total_macs();
        assert_eq!(macs, 15_346_630_656);
    }

    #[test]
    fn chain_mismatch_names_layer() {
        let layers = vec![
            LayerSpec::conv3x3("first", 16, 3, 8, true),
            LayerSpec::conv3x3("second", 16, 8, 8, false),
        ];
        let err = NetworkSpec::new("x", layers).unwrap_err().to_string();
        assert!(err.contains("second"), "{err}");
    }
}
