//! U-Net encoder–decoder assembled from the layer primitives.
//!
//! The contracting path stacks two same-padded 3×3 convolutions with an
//! activation each, dropout after the pair, then 2×2 max pooling; feature
//! channels double per stage. The expansive path mirrors it with 2×2
//! up-convolutions and skip concatenations, and a 1×1 head plus channelwise
//! softmax produces per-pixel class probabilities at the input resolution.

use rand_distr::{Distribution, Normal};

use crate::activation::{activation_backward, activation_forward, ActivationKind};
use crate::concat::{concat_channels, split_channels};
use crate::conv::{conv2d_backward, conv2d_forward, ConvKernel, Padding};
use crate::dropout::{dropout_apply, dropout_backward, DropoutMode};
use crate::error::{Error, Result};
use crate::mask::ClassMask;
use crate::pool::{maxpool2x2_backward, maxpool2x2_forward, PoolIndices};
use crate::scalar::Scalar;
use crate::seeds::{self, stream};
use crate::softmax::softmax_channelwise;
use crate::tensor::{Shape, Tensor};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct UNetConfig {
    /// Number of pooling stages.
    pub depth: usize,
    /// Channels emitted by the first encoder block.
    pub base_channels: usize,
    /// 2 (background, skyrmion) or 3 (+ defect).
    pub num_classes: usize,
    pub activation: ActivationKind,
    pub dropout_rate: f64,
    /// Training crop size (h, w); inference accepts any size divisible by
    /// 2^depth.
    pub input_size: (usize, usize),
}

impl Default for UNetConfig {
    fn default() -> Self {
        UNetConfig {
            depth: 3,
            base_channels: 16,
            num_classes: 3,
            activation: ActivationKind::Relu,
            dropout_rate: 0.05,
            input_size: (128, 128),
        }
    }
}

impl UNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.base_channels < 1 {
            return Err(Error::Config("base_channels must be at least 1".into()));
        }
        if !(self.num_classes == 2 || self.num_classes == 3) {
            return Err(Error::Config(format!(
                "num_classes must be 2 or 3, got {}",
                self.num_classes
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        let f = self.pool_factor();
        let (h, w) = self.input_size;
        if h % f != 0 || w % f != 0 {
            return Err(Error::Config(format!(
                "input size {h}x{w} not divisible by 2^depth = {f}"
            )));
        }
        Ok(())
    }

    pub fn pool_factor(&self) -> usize {
        1 << self.depth
    }

    /// Channels emitted by encoder block `level` (the bottleneck is level
    /// `depth`): 2^level · base_channels.
    pub fn channels_at(&self, level: usize) -> usize {
        self.base_channels << level
    }

    /// Number of activated conv layers, i.e. PReLU slope count.
    pub fn activated_layers(&self) -> usize {
        2 * (self.depth + 1) + 2 * self.depth
    }

    fn check_input_dims(&self, s: Shape) -> Result<()> {
        if s.c != 1 {
            return Err(Error::Shape(format!(
                "network expects 1 input channel, got {}",
                s.c
            )));
        }
        let f = self.pool_factor();
        if s.h % f != 0 || s.w % f != 0 || s.h < f || s.w < f {
            return Err(Error::Shape(format!(
                "input {}x{} not divisible by 2^depth = {f}",
                s.h, s.w
            )));
        }
        Ok(())
    }
}

/// The two convolutions of one encoder/decoder stage.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams<T> {
    pub conv1: ConvKernel<T>,
    pub conv2: ConvKernel<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderParams<T> {
    pub up: ConvKernel<T>,
    pub conv1: ConvKernel<T>,
    pub conv2: ConvKernel<T>,
}

/// Every learnable tensor of the network. The same structure doubles as the
/// gradient container returned by [`backward`].
#[derive(Clone, Debug, PartialEq)]
pub struct UNetParams<T> {
    /// Encoder blocks 0..depth plus the bottleneck at index `depth`.
    pub encoder: Vec<BlockParams<T>>,
    /// Decoder stages indexed by resolution level (0 = full resolution).
    pub decoder: Vec<DecoderParams<T>>,
    /// 1×1 output head mapping base channels to class logits.
    pub head: ConvKernel<T>,
    /// One learnable slope per activated conv layer; empty unless PReLU.
    pub prelu_slopes: Vec<T>,
}

impl<T: Scalar> UNetParams<T> {
    /// Canonically ordered (name, flat values) view used by the optimizer,
    /// the checkpoint writer and the finite-difference harness.
    pub fn flat_view(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::new();
        let last = self.encoder.len() - 1;
        for (i, b) in self.encoder.iter().enumerate() {
            let name = if i == last { "bottleneck".to_string() } else { format!("enc{i}") };
            out.push((format!("{name}.conv1.weight"), b.conv1.weights.data()));
            out.push((format!("{name}.conv1.bias"), b.conv1.bias.as_slice()));
            out.push((format!("{name}.conv2.weight"), b.conv2.weights.data()));
            out.push((format!("{name}.conv2.bias"), b.conv2.bias.as_slice()));
        }
        for (level, d) in self.decoder.iter().enumerate().rev() {
            out.push((format!("dec{level}.up.weight"), d.up.weights.data()));
            out.push((format!("dec{level}.up.bias"), d.up.bias.as_slice()));
            out.push((format!("dec{level}.conv1.weight"), d.conv1.weights.data()));
            out.push((format!("dec{level}.conv1.bias"), d.conv1.bias.as_slice()));
            out.push((format!("dec{level}.conv2.weight"), d.conv2.weights.data()));
            out.push((format!("dec{level}.conv2.bias"), d.conv2.bias.as_slice()));
        }
        out.push(("head.weight".to_string(), self.head.weights.data()));
        out.push(("head.bias".to_string(), self.head.bias.as_slice()));
        if !self.prelu_slopes.is_empty() {
            out.push(("prelu.slopes".to_string(), self.prelu_slopes.as_slice()));
        }
        out
    }

    /// Mutable counterpart of [`flat_view`], same order.
    pub fn flat_view_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out: Vec<(String, &mut [T])> = Vec::new();
        let last = self.encoder.len() - 1;
        for (i, b) in self.encoder.iter_mut().enumerate() {
            let name = if i == last { "bottleneck".to_string() } else { format!("enc{i}") };
            out.push((format!("{name}.conv1.weight"), b.conv1.weights.data_mut()));
            out.push((format!("{name}.conv1.bias"), b.conv1.bias.as_mut_slice()));
            out.push((format!("{name}.conv2.weight"), b.conv2.weights.data_mut()));
            out.push((format!("{name}.conv2.bias"), b.conv2.bias.as_mut_slice()));
        }
        for (level, d) in self.decoder.iter_mut().enumerate().rev() {
            out.push((format!("dec{level}.up.weight"), d.up.weights.data_mut()));
            out.push((format!("dec{level}.up.bias"), d.up.bias.as_mut_slice()));
            out.push((format!("dec{level}.conv1.weight"), d.conv1.weights.data_mut()));
            out.push((format!("dec{level}.conv1.bias"), d.conv1.bias.as_mut_slice()));
            out.push((format!("dec{level}.conv2.weight"), d.conv2.weights.data_mut()));
            out.push((format!("dec{level}.conv2.bias"), d.conv2.bias.as_mut_slice()));
        }
        out.push(("head.weight".to_string(), self.head.weights.data_mut()));
        out.push(("head.bias".to_string(), self.head.bias.as_mut_slice()));
        if !self.prelu_slopes.is_empty() {
            out.push(("prelu.slopes".to_string(), self.prelu_slopes.as_mut_slice()));
        }
        out
    }

    pub fn num_values(&self) -> usize {
        self.flat_view().iter().map(|(_, s)| s.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.flat_view()
            .iter()
            .all(|(_, s)| s.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> UNetParams<U> {
        UNetParams {
            encoder: self
                .encoder
                .iter()
                .map(|b| BlockParams {
                    conv1: b.conv1.cast(),
                    conv2: b.conv2.cast(),
                })
                .collect(),
            decoder: self
                .decoder
                .iter()
                .map(|d| DecoderParams {
                    up: d.up.cast(),
                    conv1: d.conv1.cast(),
                    conv2: d.conv2.cast(),
                })
                .collect(),
            head: self.head.cast(),
            prelu_slopes: self
                .prelu_slopes
                .iter()
                .map(|v| U::from_f64(v.as_f64()))
                .collect(),
        }
    }
}

/// He-normal initialization (std = √(2 / fan_in)), zero biases, PReLU slopes
/// at 0.25. Bit-identical for a given seed.
pub fn init_params<T: Scalar>(config: &UNetConfig, seed: u64) -> Result<UNetParams<T>> {
    config.validate()?;
    let mut rng = seeds::rng(seeds::mix(&[seed, stream::INIT]));
    let mut he_kernel = |out_c: usize, in_c: usize, kh: usize, kw: usize| -> Result<ConvKernel<T>> {
        let fan_in = in_c * kh * kw;
        let std = (2.0 / fan_in as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("std is positive");
        let len = out_c * in_c * kh * kw;
        let data: Vec<T> = (0..len)
            .map(|_| T::from_f64(normal.sample(&mut rng)))
            .collect();
        ConvKernel::new(
            Tensor::from_vec(Shape::new(out_c, in_c, kh, kw), data)?,
            vec![T::zero(); out_c],
        )
    };

    let mut encoder = Vec::with_capacity(config.depth + 1);
    for level in 0..=config.depth {
        let in_c = if level == 0 { 1 } else { config.channels_at(level - 1) };
        let out_c = config.channels_at(level);
        encoder.push(BlockParams {
            conv1: he_kernel(out_c, in_c, 3, 3)?,
            conv2: he_kernel(out_c, out_c, 3, 3)?,
        });
    }
    // Decoder kernels are drawn in processing order (deepest level first) so
    // the stream order matches the forward pass layout.
    let mut decoder_rev = Vec::with_capacity(config.depth);
    for level in (0..config.depth).rev() {
        let ch = config.channels_at(level);
        let deeper = config.channels_at(level + 1);
        decoder_rev.push((
            level,
            DecoderParams {
                up: he_kernel(ch, deeper, 2, 2)?,
                conv1: he_kernel(ch, 2 * ch, 3, 3)?,
                conv2: he_kernel(ch, ch, 3, 3)?,
            },
        ));
    }
    decoder_rev.sort_by_key(|(level, _)| *level);
    let decoder = decoder_rev.into_iter().map(|(_, d)| d).collect();

    let head = he_kernel(config.num_classes, config.base_channels, 1, 1)?;
    let prelu_slopes = if config.activation.has_slope() {
        vec![T::from_f64(ActivationKind::PRELU_INIT); config.activated_layers()]
    } else {
        Vec::new()
    };
    Ok(UNetParams {
        encoder,
        decoder,
        head,
        prelu_slopes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Train,
    Infer,
}

struct BlockTape<T> {
    input: Tensor<T>,
    pre1: Tensor<T>,
    mid: Tensor<T>,
    pre2: Tensor<T>,
    dropout_mask: Option<Tensor<T>>,
    slope_base: usize,
}

struct DecoderTape<T> {
    up_input: Tensor<T>,
    up_channels: usize,
    block: BlockTape<T>,
}

/// Intermediates recorded by [`forward`] for one backward pass.
pub struct Tape<T> {
    enc: Vec<BlockTape<T>>,
    pools: Vec<PoolIndices>,
    /// Processing order: deepest level first.
    dec: Vec<DecoderTape<T>>,
    head_input: Tensor<T>,
}

struct BlockCtx<'a, T> {
    act: ActivationKind,
    slopes: &'a [T],
    dropout_rate: f64,
    mode: DropoutMode,
}

impl<'a, T: Scalar> BlockCtx<'a, T> {
    fn slope(&self, idx: usize) -> T {
        self.slopes
            .get(idx)
            .copied()
            .unwrap_or_else(|| T::from_f64(ActivationKind::PRELU_INIT))
    }

    fn run(
        &self,
        x: Tensor<T>,
        conv1: &ConvKernel<T>,
        conv2: &ConvKernel<T>,
        slope_base: usize,
        drop_seed: u64,
    ) -> Result<(Tensor<T>, BlockTape<T>)> {
        let pre1 = conv2d_forward(&x, conv1, Padding::Same)?;
        let mid = activation_forward(&pre1, self.act, self.slope(slope_base));
        let pre2 = conv2d_forward(&mid, conv2, Padding::Same)?;
        let act2 = activation_forward(&pre2, self.act, self.slope(slope_base + 1));
        let (out, dropout_mask) = dropout_apply(&act2, self.dropout_rate, self.mode, drop_seed)?;
        Ok((
            out,
            BlockTape {
                input: x,
                pre1,
                mid,
                pre2,
                dropout_mask,
                slope_base,
            },
        ))
    }
}

/// Full forward pass. Returns per-pixel class probabilities with the same
/// spatial dims as the input, plus the tape for [`backward`]. Infer mode
/// disables dropout and is a pure function of (params, input).
pub fn forward<T: Scalar>(
    params: &UNetParams<T>,
    config: &UNetConfig,
    input: Tensor<T>,
    mode: RunMode,
    seed: u64,
) -> Result<(Tensor<T>, Tape<T>)> {
    config.check_input_dims(input.shape())?;
    let ctx = BlockCtx {
        act: config.activation,
        slopes: &params.prelu_slopes,
        dropout_rate: config.dropout_rate,
        mode: match mode {
            RunMode::Train => DropoutMode::Train,
            RunMode::Infer => DropoutMode::Infer,
        },
    };
    let mut drop_layer = 0u64;
    let mut drop_seed = move || {
        drop_layer += 1;
        seeds::mix(&[seed, stream::DROPOUT, drop_layer])
    };

    let mut enc_tapes = Vec::with_capacity(config.depth + 1);
    let mut pools = Vec::with_capacity(config.depth);
    let mut skips: Vec<Tensor<T>> = Vec::with_capacity(config.depth);
    let mut slope_base = 0;
    let mut x = input;
    for level in 0..=config.depth {
        let b = &params.encoder[level];
        let (out, tape) = ctx.run(x, &b.conv1, &b.conv2, slope_base, drop_seed())?;
        slope_base += 2;
        enc_tapes.push(tape);
        if level < config.depth {
            let (pooled, idx) = maxpool2x2_forward(&out)?;
            pools.push(idx);
            skips.push(out);
            x = pooled;
        } else {
            x = out;
        }
    }

    let mut dec_tapes = Vec::with_capacity(config.depth);
    for level in (0..config.depth).rev() {
        let d = &params.decoder[level];
        let up_out = crate::upconv::upconv2x2_forward(&x, &d.up)?;
        let up_channels = up_out.shape().c;
        let joined = concat_channels(&up_out, &skips[level])?;
        let up_input = x;
        let (out, block) = ctx.run(joined, &d.conv1, &d.conv2, slope_base, drop_seed())?;
        slope_base += 2;
        dec_tapes.push(DecoderTape {
            up_input,
            up_channels,
            block,
        });
        x = out;
    }

    let logits = conv2d_forward(&x, &params.head, Padding::Same)?;
    let probabilities = softmax_channelwise(&logits);
    Ok((
        probabilities,
        Tape {
            enc: enc_tapes,
            pools,
            dec: dec_tapes,
            head_input: x,
        },
    ))
}

fn block_backward<T: Scalar>(
    tape: &BlockTape<T>,
    conv1: &ConvKernel<T>,
    conv2: &ConvKernel<T>,
    act: ActivationKind,
    slopes: &[T],
    grad_out: &Tensor<T>,
    slope_grads: &mut [T],
) -> Result<(Tensor<T>, ConvKernel<T>, ConvKernel<T>)> {
    let fallback = T::from_f64(ActivationKind::PRELU_INIT);
    let s1 = slopes.get(tape.slope_base).copied().unwrap_or(fallback);
    let s2 = slopes.get(tape.slope_base + 1).copied().unwrap_or(fallback);

    let g = dropout_backward(grad_out, tape.dropout_mask.as_ref())?;
    let (g, slope_g2) = activation_backward(&tape.pre2, &g, act, s2);
    let (g, conv2_grad) = conv2d_backward(&tape.mid, conv2, &g, Padding::Same)?;
    let (g, slope_g1) = activation_backward(&tape.pre1, &g, act, s1);
    let (g, conv1_grad) = conv2d_backward(&tape.input, conv1, &g, Padding::Same)?;
    if let Some(sg) = slope_g2 {
        slope_grads[tape.slope_base + 1] += sg;
    }
    if let Some(sg) = slope_g1 {
        slope_grads[tape.slope_base] += sg;
    }
    Ok((g, conv1_grad, conv2_grad))
}

/// Gradients produced by [`backward`]: one value per learnable parameter in
/// the [`UNetParams`] layout, plus the gradient at the network input.
pub struct UNetGradients<T> {
    pub params: UNetParams<T>,
    pub input: Tensor<T>,
}

/// Backward pass through the taped forward. `grad_logits` is the loss
/// gradient with respect to the head's logits (the loss fuses softmax and
/// cross-entropy). Skip-connection gradients sum the pooled-path and
/// concat-path contributions.
pub fn backward<T: Scalar>(
    params: &UNetParams<T>,
    config: &UNetConfig,
    tape: &Tape<T>,
    grad_logits: &Tensor<T>,
) -> Result<UNetGradients<T>> {
    if tape.enc.len() != config.depth + 1 || tape.dec.len() != config.depth {
        return Err(Error::Internal(
            "tape does not match network depth".into(),
        ));
    }
    let act = config.activation;
    let n_slopes = params.prelu_slopes.len();
    let mut slope_grads = vec![T::zero(); n_slopes];

    let (mut g, head_grad) =
        conv2d_backward(&tape.head_input, &params.head, grad_logits, Padding::Same)?;

    // Decoder stages, reverse of processing order (level 0 upward).
    let mut decoder_grads: Vec<Option<DecoderParams<T>>> = (0..config.depth).map(|_| None).collect();
    let mut skip_grads: Vec<Option<Tensor<T>>> = (0..config.depth).map(|_| None).collect();
    for (rev_idx, dtape) in tape.dec.iter().enumerate().rev() {
        let level = config.depth - 1 - rev_idx;
        let d = &params.decoder[level];
        let (g_joined, conv1_grad, conv2_grad) = block_backward(
            &dtape.block,
            &d.conv1,
            &d.conv2,
            act,
            &params.prelu_slopes,
            &g,
            &mut slope_grads,
        )?;
        let (g_up, g_skip) = split_channels(&g_joined, dtape.up_channels)?;
        let (g_deeper, up_grad) = crate::upconv::upconv2x2_backward(&dtape.up_input, &d.up, &g_up)?;
        decoder_grads[level] = Some(DecoderParams {
            up: up_grad,
            conv1: conv1_grad,
            conv2: conv2_grad,
        });
        skip_grads[level] = Some(g_skip);
        g = g_deeper;
    }

    // Encoder stages from the bottleneck back to the input.
    let mut encoder_grads: Vec<Option<BlockParams<T>>> =
        (0..=config.depth).map(|_| None).collect();
    for level in (0..=config.depth).rev() {
        if level < config.depth {
            let mut pooled_grad = maxpool2x2_backward(&tape.pools[level], &g)?;
            let skip = skip_grads[level]
                .take()
                .ok_or_else(|| Error::Internal("missing skip gradient".into()))?;
            pooled_grad.add_assign(&skip)?;
            g = pooled_grad;
        }
        let b = &params.encoder[level];
        let (g_in, conv1_grad, conv2_grad) = block_backward(
            &tape.enc[level],
            &b.conv1,
            &b.conv2,
            act,
            &params.prelu_slopes,
            &g,
            &mut slope_grads,
        )?;
        encoder_grads[level] = Some(BlockParams {
            conv1: conv1_grad,
            conv2: conv2_grad,
        });
        g = g_in;
    }

    Ok(UNetGradients {
        params: UNetParams {
            encoder: encoder_grads.into_iter().map(|b| b.unwrap()).collect(),
            decoder: decoder_grads.into_iter().map(|d| d.unwrap()).collect(),
            head: head_grad,
            prelu_slopes: slope_grads,
        },
        input: g,
    })
}

/// Per-pixel argmax over class probabilities; ties break toward the lower
/// class index (background < skyrmion < defect).
pub fn predict_mask<T: Scalar>(probabilities: &Tensor<T>) -> Result<ClassMask> {
    let s = probabilities.shape();
    if s.n != 1 {
        return Err(Error::Shape(format!(
            "predict expects a single image, got batch of {}",
            s.n
        )));
    }
    let mut mask = ClassMask::zeros(s.h, s.w)?;
    let hw = s.h * s.w;
    for pix in 0..hw {
        let mut best_class = 0u8;
        let mut best = probabilities.plane(0, 0)[pix];
        for c in 1..s.c {
            let v = probabilities.plane(0, c)[pix];
            if v > best {
                best = v;
                best_class = c as u8;
            }
        }
        mask.data_mut()[pix] = best_class;
    }
    Ok(mask)
}

/// Inference entry point: forward in infer mode, then argmax.
pub fn predict<T: Scalar>(
    params: &UNetParams<T>,
    config: &UNetConfig,
    image: Tensor<T>,
) -> Result<ClassMask> {
    let (probs, _) = forward(params, config, image, RunMode::Infer, 0)?;
    predict_mask(&probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> UNetConfig {
        UNetConfig {
            depth: 2,
            base_channels: 8,
            num_classes: 3,
            activation: ActivationKind::Relu,
            dropout_rate: 0.05,
            input_size: (32, 32),
        }
    }

    fn random_image(h: usize, w: usize, seed: u64) -> Tensor<f32> {
        use rand::Rng;
        let mut rng = seeds::rng(seed);
        let data = (0..h * w).map(|_| rng.random_range(0.0f32..1.0)).collect();
        Tensor::from_vec(Shape::new(1, 1, h, w), data).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let config = tiny_config();
        let a: UNetParams<f32> = init_params(&config, 17).unwrap();
        let b: UNetParams<f32> = init_params(&config, 17).unwrap();
        assert_eq!(a, b);
        let c: UNetParams<f32> = init_params(&config, 18).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn head_shape_follows_classes() {
        let config = tiny_config();
        let p: UNetParams<f32> = init_params(&config, 1).unwrap();
        assert_eq!(p.head.weights.shape(), Shape::new(3, 8, 1, 1));
    }

    #[test]
    fn channel_doubling_law() {
        let config = UNetConfig {
            depth: 3,
            base_channels: 4,
            ..tiny_config()
        };
        let p: UNetParams<f32> = init_params(&config, 1).unwrap();
        for (i, b) in p.encoder.iter().enumerate() {
            assert_eq!(b.conv2.out_channels(), 4 << i);
        }
        for (level, d) in p.decoder.iter().enumerate() {
            assert_eq!(d.conv2.out_channels(), 4 << level);
            assert_eq!(d.up.in_channels(), 4 << (level + 1));
        }
    }

    #[test]
    fn he_init_variance() {
        // 3×3 kernel with 128 input channels: 10k+ weights, fan_in = 1152.
        let config = UNetConfig {
            depth: 1,
            base_channels: 128,
            input_size: (4, 4),
            ..tiny_config()
        };
        let p: UNetParams<f64> = init_params(&config, 5).unwrap();
        let w = p.encoder[0].conv2.weights.data();
        assert!(w.len() >= 10_000);
        let mean: f64 = w.iter().sum::<f64>() / w.len() as f64;
        let var: f64 = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w.len() as f64;
        let expected = 2.0 / (128.0 * 9.0);
        assert!(
            (var - expected).abs() < 0.1 * expected,
            "variance {var} vs expected {expected}"
        );
    }

    #[test]
    fn output_dims_match_input() {
        let config = tiny_config();
        let params: UNetParams<f32> = init_params(&config, 3).unwrap();
        for &(h, w) in &[(32usize, 32usize), (64, 96), (256, 256)] {
            let img = random_image(h, w, 7);
            let (probs, _) = forward(&params, &config, img, RunMode::Infer, 0).unwrap();
            assert_eq!(probs.shape(), Shape::new(1, 3, h, w));
        }
    }

    #[test]
    fn probabilities_normalized() {
        let config = tiny_config();
        let params: UNetParams<f32> = init_params(&config, 3).unwrap();
        let (probs, _) = forward(&params, &config, random_image(32, 32, 9), RunMode::Infer, 0)
            .unwrap();
        for pix in 0..32 * 32 {
            let sum: f32 = (0..3).map(|c| probs.plane(0, c)[pix]).sum();
            assert!((sum - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn infer_mode_deterministic() {
        let config = tiny_config();
        let params: UNetParams<f32> = init_params(&config, 3).unwrap();
        let img = random_image(32, 32, 11);
        let (a, _) = forward(&params, &config, img.clone(), RunMode::Infer, 1).unwrap();
        let (b, _) = forward(&params, &config, img, RunMode::Infer, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn indivisible_input_rejected() {
        let config = tiny_config();
        let params: UNetParams<f32> = init_params(&config, 3).unwrap();
        let img = random_image(30, 32, 13);
        assert!(matches!(
            forward(&params, &config, img, RunMode::Infer, 0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_loss_grad_gives_zero_param_grads() {
        let config = tiny_config();
        let params: UNetParams<f32> = init_params(&config, 3).unwrap();
        let (probs, tape) =
            forward(&params, &config, random_image(32, 32, 15), RunMode::Train, 4).unwrap();
        let zero_grad = Tensor::zeros(probs.shape()).unwrap();
        let grads = backward(&params, &config, &tape, &zero_grad).unwrap();
        assert!(grads
            .params
            .flat_view()
            .iter()
            .all(|(_, s)| s.iter().all(|&v| v == 0.0)));
        assert!(grads.input.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn predict_tie_breaks_to_lower_class() {
        let probs = Tensor::from_vec(
            Shape::new(1, 2, 1, 2),
            vec![0.5f32, 0.9, 0.5, 0.1],
        )
        .unwrap();
        let mask = predict_mask(&probs).unwrap();
        assert_eq!(mask.data(), &[0, 0]);
    }

    #[test]
    fn predict_matches_per_pixel_argmax_oracle() {
        use rand::Rng;
        let mut rng = seeds::rng(31);
        let shape = Shape::new(1, 3, 9, 7);
        let data: Vec<f32> = (0..shape.len()).map(|_| rng.random_range(0.0..1.0)).collect();
        let probs = Tensor::from_vec(shape, data).unwrap();
        let mask = predict_mask(&probs).unwrap();
        for y in 0..9 {
            for x in 0..7 {
                let mut best = 0usize;
                for c in 1..3 {
                    if probs.at(0, c, y, x) > probs.at(0, best, y, x) {
                        best = c;
                    }
                }
                assert_eq!(mask.at(y, x), best as u8);
            }
        }
    }
}
