//! The two assembled networks and everything they share.
//!
//! Data flow for one input frame (`window x channels`):
//!
//! ```text
//! per channel: conv1 .. conv4 (ReLU between)      -> steps x filters
//! concat channels per timestep                    -> steps vectors of d*f
//! dropout -> LSTM layer 1 -> dropout -> layer 2   -> hidden states h_1..h_T
//! baseline:  embedding = h_T
//! attention: embedding = weighted history + h_T
//! dropout -> linear classifier -> softmax         -> class probabilities
//! ```
//!
//! The two variants share every parameter shape up to the embedding, so their
//! conv/LSTM activations are identical given identical parameters.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

use crate::attention::{attend_backward, attend_forward, AttendCache, AttentionGrads, AttentionParams};
use crate::error::{Error, Result};
use crate::layers::{
    ConvCache, ConvGrads, ConvLayer, Dropout, DropoutMask, LinearCache, LinearGrads, LinearLayer,
    LstmGrads, LstmLayer, LstmLayerCache, Mode,
};
use crate::ndcore::{softmax_slice, Rng, Tensor};
use serde::{Deserialize, Serialize};

/// Which head sits on top of the shared conv/LSTM trunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    Attention,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "attention" => Ok(Variant::Attention),
            other => Err(Error::Config(format!(
                "invalid variant {other:?}; expected \"baseline\" or \"attention\""
            ))),
        }
    }
}

/// Structural hyperparameters; the defaults reproduce the reference
/// architecture (window 24, four 64-filter kernel-5 conv layers, two LSTM
/// layers of 128 units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub window: usize,
    pub channels: usize,
    pub classes: usize,
    pub filters: usize,
    pub kernel_len: usize,
    pub conv_layers: usize,
    pub hidden: usize,
    pub dropout_p: f64,
    pub variant: Variant,
    /// Optional intermediate width for the attention score path.
    pub attention_score_hidden: Option<usize>,
}

impl ArchConfig {
    pub fn new(channels: usize, classes: usize, variant: Variant) -> Self {
        ArchConfig {
            window: 24,
            channels,
            classes,
            filters: 64,
            kernel_len: 5,
            conv_layers: 4,
            hidden: 128,
            dropout_p: 0.5,
            variant,
            attention_score_hidden: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.filters == 0 || self.kernel_len == 0 || self.hidden == 0 {
            return Err(Error::Config(format!(
                "architecture dims must be positive: channels {}, filters {}, kernel_len {}, hidden {}",
                self.channels, self.filters, self.kernel_len, self.hidden
            )));
        }
        if self.conv_layers == 0 {
            return Err(Error::Config("need at least one conv layer".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p must be in [0,1), got {}",
                self.dropout_p
            )));
        }
        let steps = self.steps();
        if steps < 2 {
            return Err(Error::Config(format!(
                "window {} with {} kernel-{} conv layers leaves {} timesteps; need at least 2",
                self.window, self.conv_layers, self.kernel_len, steps
            )));
        }
        if self.attention_score_hidden == Some(0) {
            return Err(Error::Config("attention_score_hidden must be positive".into()));
        }
        Ok(())
    }

    /// Timesteps left after the conv stack (valid convolutions only).
    pub fn steps(&self) -> usize {
        self.window
            .saturating_sub(self.conv_layers * (self.kernel_len - 1))
    }

    /// Per-timestep LSTM input width: channels x filters.
    pub fn lstm_input(&self) -> usize {
        self.channels * self.filters
    }

    /// Closed-form parameter count for this configuration.
    pub fn param_count(&self) -> usize {
        let conv = self.conv_layers * (self.filters * self.kernel_len + self.filters);
        let lstm1 = 4 * self.hidden * (self.lstm_input() + self.hidden + 1);
        let lstm2 = 4 * self.hidden * (self.hidden + self.hidden + 1);
        let attention = match self.variant {
            Variant::Baseline => 0,
            Variant::Attention => {
                let transform = self.hidden * self.hidden + self.hidden;
                let score = match self.attention_score_hidden {
                    None => self.hidden + 1,
                    Some(m) => (m * self.hidden + m) + (m + 1),
                };
                transform + score
            }
        };
        let classifier = self.classes * self.hidden + self.classes;
        conv + lstm1 + lstm2 + attention + classifier
    }
}

/// Complete parameter set of one model instance.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub config: ArchConfig,
    pub conv: Vec<ConvLayer>,
    pub lstm: Vec<LstmLayer>,
    pub attention: Option<AttentionParams>,
    pub classifier: LinearLayer,
}

/// Output of one forward pass.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub probs: Tensor,
    pub logits: Tensor,
    pub class: usize,
    /// Attention weights over the historical hidden states (attention
    /// variant only).
    pub attention_weights: Option<Vec<f64>>,
}

impl ModelParams {
    /// Initializes all parameters from the seeded generator. Draw order is
    /// fixed: conv layers, LSTM layers, attention, classifier.
    pub fn init(config: &ArchConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut conv = Vec::with_capacity(config.conv_layers);
        for _ in 0..config.conv_layers {
            conv.push(ConvLayer::init(config.filters, config.kernel_len, rng)?);
        }
        let lstm = vec![
            LstmLayer::init(config.lstm_input(), config.hidden, rng)?,
            LstmLayer::init(config.hidden, config.hidden, rng)?,
        ];
        let attention = match config.variant {
            Variant::Baseline => None,
            Variant::Attention => Some(AttentionParams::init(
                config.hidden,
                config.attention_score_hidden,
                rng,
            )?),
        };
        let classifier = LinearLayer::init(config.hidden, config.classes, rng)?;
        Ok(ModelParams {
            config: config.clone(),
            conv,
            lstm,
            attention,
            classifier,
        })
    }

    pub fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.numel()).sum()
    }

    /// All parameter tensors with stable names, in optimizer order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        for (i, layer) in self.conv.iter().enumerate() {
            out.push((format!("conv{}.kernels", i + 1), &layer.kernels));
            out.push((format!("conv{}.bias", i + 1), &layer.bias));
        }
        for (i, layer) in self.lstm.iter().enumerate() {
            out.push((format!("lstm{}.w_ih", i + 1), &layer.w_ih));
            out.push((format!("lstm{}.w_hh", i + 1), &layer.w_hh));
            out.push((format!("lstm{}.bias", i + 1), &layer.bias));
        }
        if let Some(att) = &self.attention {
            out.push(("attention.w1".into(), &att.w1));
            out.push(("attention.b1".into(), &att.b1));
            if let Some((wm, bm)) = &att.mid {
                out.push(("attention.mid_w".into(), wm));
                out.push(("attention.mid_b".into(), bm));
            }
            out.push(("attention.w2".into(), &att.w2));
            out.push(("attention.b2".into(), &att.b2));
        }
        out.push(("classifier.weight".into(), &self.classifier.weight));
        out.push(("classifier.bias".into(), &self.classifier.bias));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        for (i, layer) in self.conv.iter_mut().enumerate() {
            out.push((format!("conv{}.kernels", i + 1), &mut layer.kernels));
            out.push((format!("conv{}.bias", i + 1), &mut layer.bias));
        }
        for (i, layer) in self.lstm.iter_mut().enumerate() {
            out.push((format!("lstm{}.w_ih", i + 1), &mut layer.w_ih));
            out.push((format!("lstm{}.w_hh", i + 1), &mut layer.w_hh));
            out.push((format!("lstm{}.bias", i + 1), &mut layer.bias));
        }
        if let Some(att) = &mut self.attention {
            out.push(("attention.w1".into(), &mut att.w1));
            out.push(("attention.b1".into(), &mut att.b1));
            if let Some((wm, bm)) = &mut att.mid {
                out.push(("attention.mid_w".into(), wm));
                out.push(("attention.mid_b".into(), bm));
            }
            out.push(("attention.w2".into(), &mut att.w2));
            out.push(("attention.b2".into(), &mut att.b2));
        }
        out.push(("classifier.weight".into(), &mut self.classifier.weight));
        out.push(("classifier.bias".into(), &mut self.classifier.bias));
        out
    }

    /// Forward pass over one frame. Train mode draws dropout masks from
    /// `rng`; eval mode never touches it.
    pub fn forward(
        &self,
        frame: &Tensor,
        mode: Mode,
        rng: Option<&mut Rng>,
    ) -> Result<(Prediction, ForwardCache)> {
        let cfg = &self.config;
        if frame.rank() != 2 || frame.shape() != [cfg.window, cfg.channels] {
            return Err(Error::ShapeMismatch {
                op: "model_forward",
                left: frame.shape().to_vec(),
                right: vec![cfg.window, cfg.channels],
            });
        }
        let mut rng = rng;
        if mode == Mode::Train && rng.is_none() && cfg.dropout_p > 0.0 {
            return Err(Error::Contract(
                "train-mode forward with dropout needs an rng".into(),
            ));
        }
        let dropout = Dropout::new(cfg.dropout_p)?;
        let steps = cfg.steps();
        let (filters, channels) = (cfg.filters, cfg.channels);

        // Conv trunk, one pass per sensor channel with shared weights.
        let mut channel_caches: Vec<Vec<(ConvCache, Vec<f64>)>> = Vec::with_capacity(channels);
        let mut channel_maps: Vec<Tensor> = Vec::with_capacity(channels);
        for c in 0..channels {
            let mut x = {
                let col: Vec<f64> = (0..cfg.window).map(|t| frame.at2(t, c)).collect();
                Tensor::new(&[cfg.window, 1], col)?
            };
            let mut caches = Vec::with_capacity(cfg.conv_layers);
            for layer in &self.conv {
                let (z, cache) = layer.forward(&x)?;
                let mut activated = z.clone();
                let mask: Vec<f64> = activated
                    .data_mut()
                    .iter_mut()
                    .map(|v| {
                        if *v > 0.0 {
                            1.0
                        } else {
                            *v = 0.0;
                            0.0
                        }
                    })
                    .collect();
                caches.push((cache, mask));
                x = activated;
            }
            channel_caches.push(caches);
            channel_maps.push(x);
        }

        // Per-timestep feature vectors: channel-major concatenation.
        let feat_dim = cfg.lstm_input();
        let mut features: Vec<Tensor> = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut v = vec![0.0; feat_dim];
            for (c, maps) in channel_maps.iter().enumerate() {
                for j in 0..filters {
                    v[c * filters + j] = maps.at2(t, j);
                }
            }
            features.push(Tensor::new(&[feat_dim], v)?);
        }

        // Dropout after the conv stack.
        let mut feat_masks: Vec<DropoutMask> = Vec::with_capacity(steps);
        for f in &mut features {
            let mask = match (&mode, rng.as_deref_mut()) {
                (Mode::Train, Some(r)) => dropout.forward(f.data_mut(), Mode::Train, r),
                _ => None,
            };
            feat_masks.push(mask);
        }

        // LSTM stack with dropout between the layers.
        let (h1_seq, lstm1_cache) = self.lstm[0].forward_seq(&features)?;
        let mut h1_dropped = h1_seq;
        let mut mid_masks: Vec<DropoutMask> = Vec::with_capacity(steps);
        for h in &mut h1_dropped {
            let mask = match (&mode, rng.as_deref_mut()) {
                (Mode::Train, Some(r)) => dropout.forward(h.data_mut(), Mode::Train, r),
                _ => None,
            };
            mid_masks.push(mask);
        }
        let (h_seq, lstm2_cache) = self.lstm[1].forward_seq(&h1_dropped)?;

        // Head: last hidden state, or attention-weighted history plus it.
        let (mut embedding, attention_weights, attn_cache) = match &self.attention {
            None => (h_seq.last().expect("steps >= 2").clone(), None, None),
            Some(att) => {
                let (emb, weights, cache) = attend_forward(att, &h_seq)?;
                (emb, Some(weights), Some(cache))
            }
        };

        // Dropout on the embedding, then classify.
        let head_mask = match (&mode, rng) {
            (Mode::Train, Some(r)) => dropout.forward(embedding.data_mut(), Mode::Train, r),
            _ => None,
        };
        let (logits, cls_cache) = self.classifier.forward(&embedding)?;
        let probs = Tensor::vector(&softmax_slice(logits.data())?)?;
        let class = argmax(probs.data());

        Ok((
            Prediction {
                probs,
                logits,
                class,
                attention_weights,
            },
            ForwardCache {
                mode,
                channel_caches,
                feat_masks,
                lstm1_cache,
                mid_masks,
                lstm2_cache,
                attn_cache,
                head_mask,
                cls_cache,
                steps,
            },
        ))
    }

    /// Exact end-to-end adjoint; `grad_logits` is the loss gradient w.r.t.
    /// the classifier logits (the cross-entropy grad seed).
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Tensor) -> Result<ModelGrads> {
        if cache.mode != Mode::Train {
            return Err(Error::Contract(
                "backward needs a cache from a train-mode forward".into(),
            ));
        }
        let cfg = &self.config;
        let steps = cache.steps;
        let (filters, channels) = (cfg.filters, cfg.channels);

        let (grad_embedding, cls_grads) = {
            let (mut gx, gp) = self.classifier.backward(&cache.cls_cache, grad_logits)?;
            Dropout::backward(&cache.head_mask, gx.data_mut());
            (gx, gp)
        };

        // Head adjoint: distribute the embedding gradient over hidden states.
        let (grad_h_seq, attention_grads) = match (&self.attention, &cache.attn_cache) {
            (None, None) => {
                let mut grads = vec![Tensor::zeros(&[cfg.hidden])?; steps];
                grads[steps - 1] = grad_embedding;
                (grads, None)
            }
            (Some(att), Some(attn_cache)) => {
                let (grads, ag) = attend_backward(att, attn_cache, &grad_embedding)?;
                (grads, Some(ag))
            }
            _ => return Err(Error::Contract("cache variant does not match model".into())),
        };

        // LSTM stack adjoint with the inter-layer dropout.
        let (grad_h1_dropped, lstm2_grads) = self.lstm[1].backward_seq(&cache.lstm2_cache, &grad_h_seq)?;
        let mut grad_h1 = grad_h1_dropped;
        for (g, mask) in grad_h1.iter_mut().zip(&cache.mid_masks) {
            Dropout::backward(mask, g.data_mut());
        }
        let (mut grad_features, lstm1_grads) = self.lstm[0].backward_seq(&cache.lstm1_cache, &grad_h1)?;
        for (g, mask) in grad_features.iter_mut().zip(&cache.feat_masks) {
            Dropout::backward(mask, g.data_mut());
        }

        // Split feature gradients back into per-channel map gradients and
        // run the conv stacks in reverse, summing shared-parameter grads
        // over channels in channel order.
        let mut conv_grads: Vec<ConvGrads> = (0..cfg.conv_layers)
            .map(|_| {
                Ok(ConvGrads {
                    kernels: Tensor::zeros(&[filters, cfg.kernel_len])?,
                    bias: Tensor::zeros(&[filters])?,
                })
            })
            .collect::<Result<_>>()?;
        for c in 0..channels {
            let mut grad_maps = Tensor::zeros(&[steps, filters])?;
            for t in 0..steps {
                for j in 0..filters {
                    grad_maps.data_mut()[t * filters + j] = grad_features[t].data()[c * filters + j];
                }
            }
            let mut upstream = grad_maps;
            for l in (0..cfg.conv_layers).rev() {
                let (conv_cache, relu_mask) = &cache.channel_caches[c][l];
                for (g, m) in upstream.data_mut().iter_mut().zip(relu_mask) {
                    *g *= m;
                }
                let (gx, gp) = self.conv[l].backward(conv_cache, &upstream)?;
                accumulate(&mut conv_grads[l].kernels, &gp.kernels);
                accumulate(&mut conv_grads[l].bias, &gp.bias);
                upstream = gx;
            }
        }

        Ok(ModelGrads {
            conv: conv_grads,
            lstm: vec![lstm1_grads, lstm2_grads],
            attention: attention_grads,
            classifier: cls_grads,
        })
    }
}

/// Cached intermediates of one forward pass, consumed by [`ModelParams::backward`].
#[derive(Debug)]
pub struct ForwardCache {
    mode: Mode,
    channel_caches: Vec<Vec<(ConvCache, Vec<f64>)>>,
    feat_masks: Vec<DropoutMask>,
    lstm1_cache: LstmLayerCache,
    mid_masks: Vec<DropoutMask>,
    lstm2_cache: LstmLayerCache,
    attn_cache: Option<AttendCache>,
    head_mask: DropoutMask,
    cls_cache: LinearCache,
    steps: usize,
}

/// Gradient set mirroring [`ModelParams`].
#[derive(Debug)]
pub struct ModelGrads {
    pub conv: Vec<ConvGrads>,
    pub lstm: Vec<LstmGrads>,
    pub attention: Option<AttentionGrads>,
    pub classifier: LinearGrads,
}

impl ModelGrads {
    /// Zero gradients shaped like the given parameters.
    pub fn zeros_like(params: &ModelParams) -> Result<Self> {
        let conv = params
            .conv
            .iter()
            .map(|l| {
                Ok(ConvGrads {
                    kernels: Tensor::zeros(l.kernels.shape())?,
                    bias: Tensor::zeros(l.bias.shape())?,
                })
            })
            .collect::<Result<_>>()?;
        let lstm = params
            .lstm
            .iter()
            .map(|l| {
                Ok(LstmGrads {
                    w_ih: Tensor::zeros(l.w_ih.shape())?,
                    w_hh: Tensor::zeros(l.w_hh.shape())?,
                    bias: Tensor::zeros(l.bias.shape())?,
                })
            })
            .collect::<Result<_>>()?;
        let attention = match &params.attention {
            None => None,
            Some(att) => Some(AttentionGrads {
                w1: Tensor::zeros(att.w1.shape())?,
                b1: Tensor::zeros(att.b1.shape())?,
                mid: match &att.mid {
                    None => None,
                    Some((wm, bm)) => Some((Tensor::zeros(wm.shape())?, Tensor::zeros(bm.shape())?)),
                },
                w2: Tensor::zeros(att.w2.shape())?,
                b2: Tensor::zeros(att.b2.shape())?,
            }),
        };
        Ok(ModelGrads {
            conv,
            lstm,
            attention,
            classifier: LinearGrads {
                weight: Tensor::zeros(params.classifier.weight.shape())?,
                bias: Tensor::zeros(params.classifier.bias.shape())?,
            },
        })
    }

    /// Tensors in the same order and naming as [`ModelParams::named_tensors`].
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        for (i, g) in self.conv.iter().enumerate() {
            out.push((format!("conv{}.kernels", i + 1), &g.kernels));
            out.push((format!("conv{}.bias", i + 1), &g.bias));
        }
        for (i, g) in self.lstm.iter().enumerate() {
            out.push((format!("lstm{}.w_ih", i + 1), &g.w_ih));
            out.push((format!("lstm{}.w_hh", i + 1), &g.w_hh));
            out.push((format!("lstm{}.bias", i + 1), &g.bias));
        }
        if let Some(att) = &self.attention {
            out.push(("attention.w1".into(), &att.w1));
            out.push(("attention.b1".into(), &att.b1));
            if let Some((wm, bm)) = &att.mid {
                out.push(("attention.mid_w".into(), wm));
                out.push(("attention.mid_b".into(), bm));
            }
            out.push(("attention.w2".into(), &att.w2));
            out.push(("attention.b2".into(), &att.b2));
        }
        out.push(("classifier.weight".into(), &self.classifier.weight));
        out.push(("classifier.bias".into(), &self.classifier.bias));
        out
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        for (i, g) in self.conv.iter_mut().enumerate() {
            out.push((format!("conv{}.kernels", i + 1), &mut g.kernels));
            out.push((format!("conv{}.bias", i + 1), &mut g.bias));
        }
        for (i, g) in self.lstm.iter_mut().enumerate() {
            out.push((format!("lstm{}.w_ih", i + 1), &mut g.w_ih));
            out.push((format!("lstm{}.w_hh", i + 1), &mut g.w_hh));
            out.push((format!("lstm{}.bias", i + 1), &mut g.bias));
        }
        if let Some(att) = &mut self.attention {
            out.push(("attention.w1".into(), &mut att.w1));
            out.push(("attention.b1".into(), &mut att.b1));
            if let Some((wm, bm)) = &mut att.mid {
                out.push(("attention.mid_w".into(), wm));
                out.push(("attention.mid_b".into(), bm));
            }
            out.push(("attention.w2".into(), &mut att.w2));
            out.push(("attention.b2".into(), &mut att.b2));
        }
        out.push(("classifier.weight".into(), &mut self.classifier.weight));
        out.push(("classifier.bias".into(), &mut self.classifier.bias));
        out
    }

    /// Adds `other`, elementwise. Shapes must match.
    pub fn accumulate(&mut self, other: &ModelGrads) -> Result<()> {
        let mut mine = self.named_tensors_mut();
        let theirs = other.named_tensors();
        if mine.len() != theirs.len() {
            return Err(Error::Contract("gradient sets have different structure".into()));
        }
        for ((_, dst), (_, src)) in mine.iter_mut().zip(theirs) {
            if dst.shape() != src.shape() {
                return Err(Error::Contract("gradient shapes diverged".into()));
            }
            for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d += s;
            }
        }
        Ok(())
    }

    /// Multiplies every gradient by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.named_tensors_mut() {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }
}

fn accumulate(dst: &mut Tensor, src: &Tensor) {
    debug_assert_eq!(dst.shape(), src.shape());
    for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += s;
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Cross-entropy of a prediction, computed in log space from the logits.
/// Returns the loss and the gradient seed w.r.t. the logits
/// (softmax - one_hot(label)).
pub fn cross_entropy_loss(pred: &Prediction, label: usize) -> Result<(f64, Tensor)> {
    let classes = pred.logits.numel();
    if label >= classes {
        return Err(Error::Data(format!(
            "label {label} out of range for {classes} classes"
        )));
    }
    let logits = pred.logits.data();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum_exp = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    let loss = log_sum_exp - logits[label];
    let mut seed = pred.probs.data().to_vec();
    seed[label] -= 1.0;
    Ok((loss, Tensor::new(&[classes], seed)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::attend_forward;
    use crate::layers::lstm_forward;

    fn tiny_config(variant: Variant) -> ArchConfig {
        ArchConfig {
            window: 24,
            channels: 2,
            classes: 3,
            filters: 3,
            kernel_len: 5,
            conv_layers: 4,
            hidden: 4,
            dropout_p: 0.0,
            variant,
            attention_score_hidden: None,
        }
    }

    fn random_frame(config: &ArchConfig, seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        let mut t = Tensor::zeros(&[config.window, config.channels]).unwrap();
        for v in t.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        t
    }

    #[test]
    fn probabilities_are_normalized() {
        let config = tiny_config(Variant::Attention);
        let params = ModelParams::init(&config, &mut Rng::new(1)).unwrap();
        let frame = random_frame(&config, 2);
        let (pred, _) = params.forward(&frame, Mode::Eval, None).unwrap();
        assert_eq!(pred.probs.numel(), 3);
        assert!((pred.probs.data().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let weights = pred.attention_weights.unwrap();
        assert_eq!(weights.len(), config.steps() - 1);
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zeroed_history_degenerates_attention_head_to_baseline_head() {
        // With h_1..h_{T-1} = 0 the weighted history sum vanishes no matter
        // what the weights are, so the attention embedding is exactly h_T and
        // the two heads coincide.
        let mut rng = Rng::new(3);
        let att = crate::attention::AttentionParams::init(4, None, &mut rng).unwrap();
        let classifier = LinearLayer::init(4, 3, &mut rng).unwrap();
        let h_last = Tensor::vector(&[0.3, -0.8, 0.5, 0.1]).unwrap();
        let mut states = vec![Tensor::zeros(&[4]).unwrap(); 7];
        states.push(h_last.clone());
        let (embedding, _, _) = attend_forward(&att, &states).unwrap();
        assert_eq!(embedding.data(), h_last.data());
        let (logits_attention, _) = classifier.forward(&embedding).unwrap();
        let (logits_baseline, _) = classifier.forward(&h_last).unwrap();
        assert_eq!(logits_attention.data(), logits_baseline.data());
    }

    #[test]
    fn forward_matches_hand_composed_layer_pipeline() {
        // Rebuild the whole eval-mode forward out of the public layer ops and
        // compare logits for both variants.
        for variant in [Variant::Baseline, Variant::Attention] {
            let config = tiny_config(variant);
            let params = ModelParams::init(&config, &mut Rng::new(11)).unwrap();
            let frame = random_frame(&config, 12);
            let (pred, _) = params.forward(&frame, Mode::Eval, None).unwrap();

            let steps = config.steps();
            let mut channel_maps = Vec::new();
            for c in 0..config.channels {
                let col: Vec<f64> = (0..config.window).map(|t| frame.at2(t, c)).collect();
                let mut x = Tensor::new(&[config.window, 1], col).unwrap();
                for layer in &params.conv {
                    let (z, _) = layer.forward(&x).unwrap();
                    x = z.relu().unwrap();
                }
                channel_maps.push(x);
            }
            let mut xs = Vec::new();
            for t in 0..steps {
                let mut v = Vec::new();
                for maps in &channel_maps {
                    for j in 0..config.filters {
                        v.push(maps.at2(t, j));
                    }
                }
                xs.push(Tensor::vector(&v).unwrap());
            }
            let (h_seq, _) = lstm_forward(&params.lstm, &xs).unwrap();
            let embedding = match &params.attention {
                None => h_seq.last().unwrap().clone(),
                Some(att) => attend_forward(att, &h_seq).unwrap().0,
            };
            let (logits, _) = params.classifier.forward(&embedding).unwrap();
            for (a, b) in pred.logits.data().iter().zip(logits.data()) {
                assert!((a - b).abs() < 1e-12, "variant {variant:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn loss_of_certain_prediction_is_zero() {
        let pred = Prediction {
            logits: Tensor::vector(&[100.0, 0.0]).unwrap(),
            probs: Tensor::vector(&[1.0, 0.0]).unwrap(),
            class: 0,
            attention_weights: None,
        };
        let (loss, _) = cross_entropy_loss(&pred, 0).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn loss_of_uniform_prediction_is_ln_of_class_count() {
        let pred = Prediction {
            logits: Tensor::vector(&[0.5, 0.5, 0.5, 0.5]).unwrap(),
            probs: Tensor::vector(&[0.25; 4]).unwrap(),
            class: 0,
            attention_weights: None,
        };
        let (loss, seed) = cross_entropy_loss(&pred, 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!(seed.data().iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn out_of_range_label_is_a_data_error() {
        let pred = Prediction {
            logits: Tensor::vector(&[0.0, 0.0]).unwrap(),
            probs: Tensor::vector(&[0.5, 0.5]).unwrap(),
            class: 0,
            attention_weights: None,
        };
        assert!(matches!(cross_entropy_loss(&pred, 2), Err(Error::Data(_))));
    }

    #[test]
    fn zero_grad_seed_gives_zero_gradients() {
        let config = tiny_config(Variant::Attention);
        let params = ModelParams::init(&config, &mut Rng::new(21)).unwrap();
        let frame = random_frame(&config, 22);
        let (_, cache) = params.forward(&frame, Mode::Train, None).unwrap();
        let grads = params.backward(&cache, &Tensor::zeros(&[3]).unwrap()).unwrap();
        for (name, t) in grads.named_tensors() {
            assert!(t.data().iter().all(|&v| v == 0.0), "{name} not zero");
        }
    }

    #[test]
    fn eval_cache_cannot_back_propagate() {
        let config = tiny_config(Variant::Baseline);
        let params = ModelParams::init(&config, &mut Rng::new(31)).unwrap();
        let frame = random_frame(&config, 32);
        let (_, cache) = params.forward(&frame, Mode::Eval, None).unwrap();
        assert!(matches!(
            params.backward(&cache, &Tensor::zeros(&[3]).unwrap()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn frame_shape_mismatch_is_reported() {
        let config = tiny_config(Variant::Baseline);
        let params = ModelParams::init(&config, &mut Rng::new(41)).unwrap();
        let bad = Tensor::zeros(&[24, 3]).unwrap();
        assert!(matches!(
            params.forward(&bad, Mode::Eval, None),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    fn model_loss(params: &ModelParams, frame: &Tensor, label: usize, dropout_seed: u64) -> f64 {
        // A fresh generator per evaluation pins the dropout masks, so finite
        // differences see a deterministic function of the parameters.
        let mut rng = Rng::new(dropout_seed);
        let (pred, _) = params.forward(frame, Mode::Train, Some(&mut rng)).unwrap();
        cross_entropy_loss(&pred, label).unwrap().0
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        for (variant, dropout_p) in [
            (Variant::Baseline, 0.0),
            (Variant::Attention, 0.0),
            (Variant::Attention, 0.25),
        ] {
            let mut config = ArchConfig {
                window: 24,
                channels: 2,
                classes: 2,
                filters: 3,
                kernel_len: 5,
                conv_layers: 4,
                hidden: 4,
                dropout_p,
                variant,
                attention_score_hidden: None,
            };
            config.dropout_p = dropout_p;
            let mut params = ModelParams::init(&config, &mut Rng::new(51)).unwrap();
            let frame = random_frame(&config, 52);
            let label = 1;
            let dropout_seed = 53;

            let mut rng = Rng::new(dropout_seed);
            let (pred, cache) = params.forward(&frame, Mode::Train, Some(&mut rng)).unwrap();
            let (_, seed) = cross_entropy_loss(&pred, label).unwrap();
            let grads = params.backward(&cache, &seed).unwrap();

            let h = 1e-5;
            let analytic: Vec<(String, Tensor)> = grads
                .named_tensors()
                .into_iter()
                .map(|(n, t)| (n, t.clone()))
                .collect();
            for (name, an_tensor) in &analytic {
                let mut worst = 0.0f64;
                let mut worst_pair = (0.0f64, 0.0f64);
                for idx in 0..an_tensor.numel() {
                    let orig = {
                        let mut slots = params.named_tensors_mut();
                        let slot = slots.iter_mut().find(|(n, _)| n == name).unwrap();
                        let orig = slot.1.data()[idx];
                        slot.1.data_mut()[idx] = orig + h;
                        orig
                    };
                    let up = model_loss(&params, &frame, label, dropout_seed);
                    {
                        let mut slots = params.named_tensors_mut();
                        let slot = slots.iter_mut().find(|(n, _)| n == name).unwrap();
                        slot.1.data_mut()[idx] = orig - h;
                    }
                    let down = model_loss(&params, &frame, label, dropout_seed);
                    {
                        let mut slots = params.named_tensors_mut();
                        let slot = slots.iter_mut().find(|(n, _)| n == name).unwrap();
                        slot.1.data_mut()[idx] = orig;
                    }
                    let fd = (up - down) / (2.0 * h);
                    let an = an_tensor.data()[idx];
                    // The guard keeps roundoff-dominated near-zero gradients
                    // (central differences resolve ~1e-11 at h=1e-5) from
                    // masquerading as relative error.
                    let rel = (fd - an).abs() / (fd.abs() + an.abs()).max(1e-6);
                    if rel > worst {
                        worst = rel;
                        worst_pair = (fd, an);
                    }
                }
                assert!(
                    worst < 1e-4,
                    "{variant:?} p={dropout_p} group {name}: max rel err {worst} (fd={} an={})",
                    worst_pair.0,
                    worst_pair.1
                );
            }
        }
    }

    #[test]
    fn score_bias_gradient_vanishes_by_shift_invariance() {
        let config = tiny_config(Variant::Attention);
        let params = ModelParams::init(&config, &mut Rng::new(61)).unwrap();
        let frame = random_frame(&config, 62);
        let (pred, cache) = params.forward(&frame, Mode::Train, None).unwrap();
        let (_, seed) = cross_entropy_loss(&pred, 0).unwrap();
        let grads = params.backward(&cache, &seed).unwrap();
        let b2 = grads.attention.as_ref().unwrap().b2.data()[0];
        assert!(b2.abs() <= 1e-12, "grad b2 = {b2}");
    }

    #[test]
    fn parameter_count_matches_closed_form() {
        for variant in [Variant::Baseline, Variant::Attention] {
            let config = tiny_config(variant);
            let params = ModelParams::init(&config, &mut Rng::new(71)).unwrap();
            assert_eq!(params.num_params(), config.param_count());
        }
        // Full-size architecture and the intermediate score stage.
        let mut full = ArchConfig::new(6, 4, Variant::Attention);
        let params = ModelParams::init(&full, &mut Rng::new(72)).unwrap();
        assert_eq!(params.num_params(), full.param_count());
        full.attention_score_hidden = Some(64);
        let params = ModelParams::init(&full, &mut Rng::new(73)).unwrap();
        assert_eq!(params.num_params(), full.param_count());
    }

    #[test]
    fn degenerate_configs_are_rejected() {
        let mut config = tiny_config(Variant::Baseline);
        config.classes = 1;
        assert!(matches!(
            ModelParams::init(&config, &mut Rng::new(1)),
            Err(Error::Config(_))
        ));
        let mut config = tiny_config(Variant::Baseline);
        config.filters = 0;
        assert!(matches!(
            ModelParams::init(&config, &mut Rng::new(1)),
            Err(Error::Config(_))
        ));
        let mut config = tiny_config(Variant::Baseline);
        config.window = 10; // 4 kernel-5 layers need at least 18 samples
        assert!(matches!(
            ModelParams::init(&config, &mut Rng::new(1)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join(format!("har_attn_ckpt_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.ckpt");
        let config = tiny_config(Variant::Attention);
        let params = ModelParams::init(&config, &mut Rng::new(81)).unwrap();
        let ckpt = Checkpoint {
            params,
            seed: 4242,
            epoch: 7,
        };
        save_checkpoint(&path, &ckpt).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.seed, 4242);
        assert_eq!(loaded.epoch, 7);
        assert_eq!(loaded.params.config, ckpt.params.config);
        for ((name_a, a), (_, b)) in ckpt
            .params
            .named_tensors()
            .iter()
            .zip(loaded.params.named_tensors())
        {
            assert_eq!(a.shape(), b.shape());
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(x.to_bits(), y.to_bits(), "{name_a} not bit-exact");
            }
        }
        // Saving the loaded checkpoint reproduces the same bytes.
        let path2 = dir.join("model2.ckpt");
        save_checkpoint(&path2, &loaded).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
        std::fs::remove_dir_all(&dir).ok();
    }
}
