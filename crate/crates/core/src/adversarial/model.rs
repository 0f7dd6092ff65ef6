//! Extractor E, predictor P, discriminator D and classifier C.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::{
    maxpool1d, maxpool1d_backward, relu, relu_backward, sigmoid, sigmoid_backward, softmax, Conv1d, Dense,
    ParamSet, Pooled,
};
use crate::profile::PROFILE_LEN;
use crate::rng::{self, Rng};

/// Layer sizes of the four players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub input_len: usize,
    pub channels: usize,
    pub conv_layers: usize,
    /// Layers `0..pooled_layers` are followed by max pooling.
    pub pooled_layers: usize,
    pub kernel: usize,
    pub hidden: usize,
    pub n_y: usize,
    pub n_z: usize,
    pub n_v: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            input_len: PROFILE_LEN,
            channels: 128,
            conv_layers: 8,
            pooled_layers: 5,
            kernel: 3,
            hidden: 64,
            n_y: 2,
            n_z: 5,
            n_v: 5,
        }
    }
}

impl Architecture {
    /// Sequence length after each conv layer (after pooling where applied).
    pub fn lengths(&self) -> Result<Vec<usize>> {
        if self.pooled_layers > self.conv_layers || self.channels == 0 || self.kernel == 0 {
            return Err(Error::InvalidParameter(format!("inconsistent architecture {self:?}")));
        }
        let mut len = self.input_len;
        let mut out = Vec::with_capacity(self.conv_layers);
        for l in 0..self.conv_layers {
            if len < self.kernel {
                return Err(Error::InvalidParameter(format!(
                    "sequence length {len} at conv layer {} is shorter than the kernel",
                    l + 1
                )));
            }
            len = len - self.kernel + 1;
            if l < self.pooled_layers {
                if len < 2 {
                    return Err(Error::InvalidParameter(format!("cannot pool length {len} at layer {}", l + 1)));
                }
                len /= 2;
            }
            out.push(len);
        }
        Ok(out)
    }

    pub fn representation_len(&self) -> Result<usize> {
        Ok(self.channels * self.lengths()?.last().copied().unwrap_or(self.input_len))
    }
}

/// A differentiable map from a sample to its representation `E(x)`.
pub trait Extractor: ParamSet + Clone {
    type Tape;

    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Self::Tape)>;
    /// Accumulates parameter gradients for one sample into `grads`.
    fn backward(&self, tape: Self::Tape, grad_out: &[f64], grads: &mut Self);
}

/// Stack of conv+ReLU layers, max-pooled after the first `pooled_layers`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvExtractor {
    pub input_len: usize,
    pub pooled_layers: usize,
    pub layers: Vec<Conv1d>,
}

/// Forward record of one sample through [`ConvExtractor`].
#[derive(Debug, Clone)]
pub struct ConvTape {
    inputs: Vec<Vec<f64>>,
    input_lens: Vec<usize>,
    pre: Vec<Vec<f64>>,
    pools: Vec<Option<Pooled>>,
}

impl ConvExtractor {
    pub fn new(arch: &Architecture, rng: &mut Rng) -> Result<Self> {
        arch.lengths()?;
        let layers = (0..arch.conv_layers)
            .map(|l| {
                let cin = if l == 0 { 1 } else { arch.channels };
                Conv1d::init(cin, arch.channels, arch.kernel, rng)
            })
            .collect();
        Ok(ConvExtractor {
            input_len: arch.input_len,
            pooled_layers: arch.pooled_layers,
            layers,
        })
    }

    fn final_len(&self) -> usize {
        let mut len = self.input_len;
        for (l, c) in self.layers.iter().enumerate() {
            len = len + 1 - c.kernel;
            if l < self.pooled_layers {
                len /= 2;
            }
        }
        len
    }
}

impl Extractor for ConvExtractor {
    type Tape = ConvTape;

    fn input_len(&self) -> usize {
        self.input_len
    }

    fn output_len(&self) -> usize {
        self.layers.last().map_or(self.input_len, |c| c.out_ch * self.final_len())
    }

    fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ConvTape)> {
        if x.len() != self.input_len {
            return Err(Error::LengthMismatch {
                expected: self.input_len,
                got: x.len(),
            });
        }
        let n = self.layers.len();
        let mut tape = ConvTape {
            inputs: Vec::with_capacity(n),
            input_lens: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            pools: Vec::with_capacity(n),
        };
        let mut a = x.to_vec();
        let mut len = self.input_len;
        for (l, conv) in self.layers.iter().enumerate() {
            let z = conv.forward(&a, len)?;
            let zlen = conv.out_len(len)?;
            let r = relu(&z);
            tape.inputs.push(std::mem::take(&mut a));
            tape.input_lens.push(len);
            tape.pre.push(z);
            if l < self.pooled_layers {
                let p = maxpool1d(&r, conv.out_ch, zlen)?;
                a = p.values.clone();
                len = zlen / 2;
                tape.pools.push(Some(p));
            } else {
                a = r;
                len = zlen;
                tape.pools.push(None);
            }
        }
        Ok((a, tape))
    }

    fn backward(&self, tape: ConvTape, grad_out: &[f64], grads: &mut Self) {
        let mut g = grad_out.to_vec();
        let ConvTape {
            inputs,
            input_lens,
            pre,
            pools,
        } = tape;
        let parts = inputs.into_iter().zip(input_lens).zip(pre).zip(pools).enumerate().rev();
        for (l, (((input, len), z), pool)) in parts {
            let conv = &self.layers[l];
            let zlen = len + 1 - conv.kernel;
            if let Some(p) = pool {
                g = maxpool1d_backward(&p, &g, conv.out_ch, zlen);
            }
            g = relu_backward(&z, &g);
            g = conv.backward(&input, len, &g, &mut grads.layers[l], l > 0);
        }
    }
}

impl ParamSet for ConvExtractor {
    fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        prefixed(self.layers.iter().enumerate().map(|(l, c)| (format!("conv{}", l + 1), c as &dyn ParamView)))
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|c| c.tensors_mut()).collect()
    }

    fn zeros_like(&self) -> Self {
        ConvExtractor {
            layers: self.layers.iter().map(|c| c.zeros_like()).collect(),
            ..self.clone_shape()
        }
    }
}

impl ConvExtractor {
    fn clone_shape(&self) -> Self {
        ConvExtractor {
            input_len: self.input_len,
            pooled_layers: self.pooled_layers,
            layers: Vec::new(),
        }
    }
}

/// A single affine layer; the tiny extractor used on one-hot tabular inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseExtractor {
    pub dense: Dense,
}

impl Extractor for DenseExtractor {
    type Tape = Vec<f64>;

    fn input_len(&self) -> usize {
        self.dense.inputs
    }

    fn output_len(&self) -> usize {
        self.dense.outputs
    }

    fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.dense.forward(x)?, x.to_vec()))
    }

    fn backward(&self, tape: Vec<f64>, grad_out: &[f64], grads: &mut Self) {
        self.dense.backward(&tape, grad_out, &mut grads.dense);
    }
}

impl ParamSet for DenseExtractor {
    fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        prefixed([("dense".to_string(), &self.dense as &dyn ParamView)])
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.dense.tensors_mut()
    }

    fn zeros_like(&self) -> Self {
        DenseExtractor {
            dense: self.dense.zeros_like(),
        }
    }
}

/// Classification head: optional dense+sigmoid hidden layer, then
/// dense+softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub hidden: Option<Dense>,
    pub out: Dense,
}

#[derive(Debug, Clone)]
pub struct HeadTape {
    input: Vec<f64>,
    hidden: Option<Vec<f64>>,
}

impl Head {
    pub fn new(inputs: usize, hidden: Option<usize>, outputs: usize, rng: &mut Rng) -> Self {
        match hidden {
            Some(h) => Head {
                hidden: Some(Dense::init(inputs, h, rng)),
                out: Dense::init(h, outputs, rng),
            },
            None => Head {
                hidden: None,
                out: Dense::init(inputs, outputs, rng),
            },
        }
    }

    pub fn inputs(&self) -> usize {
        self.hidden.as_ref().map_or(self.out.inputs, |h| h.inputs)
    }

    pub fn outputs(&self) -> usize {
        self.out.outputs
    }

    /// Class probabilities plus the tape for [`Head::backward`].
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, HeadTape)> {
        let hidden = match &self.hidden {
            Some(h) => Some(sigmoid(&h.forward(x)?)),
            None => None,
        };
        let logits = self.out.forward(hidden.as_deref().unwrap_or(x))?;
        Ok((
            softmax(&logits),
            HeadTape {
                input: x.to_vec(),
                hidden,
            },
        ))
    }

    pub fn probs(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0)
    }

    /// Backpropagates a gradient at the logits; accumulates parameter
    /// gradients into `grads` and returns the input gradient.
    pub fn backward(&self, tape: &HeadTape, grad_logits: &[f64], grads: &mut Head) -> Vec<f64> {
        match (&self.hidden, &tape.hidden, &mut grads.hidden) {
            (Some(h), Some(s), Some(gh)) => {
                let g_s = self.out.backward(s, grad_logits, &mut grads.out);
                let g_pre = sigmoid_backward(s, &g_s);
                h.backward(&tape.input, &g_pre, gh)
            }
            _ => self.out.backward(&tape.input, grad_logits, &mut grads.out),
        }
    }
}

impl ParamSet for Head {
    fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut parts: Vec<(String, &dyn ParamView)> = Vec::new();
        if let Some(h) = &self.hidden {
            parts.push(("hidden".into(), h));
        }
        parts.push(("out".into(), &self.out));
        prefixed(parts)
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        if let Some(h) = &mut self.hidden {
            v.extend(h.tensors_mut());
        }
        v.extend(self.out.tensors_mut());
        v
    }

    fn zeros_like(&self) -> Self {
        Head {
            hidden: self.hidden.as_ref().map(|h| h.zeros_like()),
            out: self.out.zeros_like(),
        }
    }
}

/// Object-safe read access to a parameter set, for name prefixing.
pub(crate) trait ParamView {
    fn view(&self) -> Vec<(String, Vec<usize>, &[f64])>;
}

impl<P: ParamSet> ParamView for P {
    fn view(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        self.tensors()
    }
}

pub(crate) fn prefixed<'a, I>(parts: I) -> Vec<(String, Vec<usize>, &'a [f64])>
where
    I: IntoIterator<Item = (String, &'a dyn ParamView)>,
{
    parts
        .into_iter()
        .flat_map(|(prefix, p)| {
            p.view()
                .into_iter()
                .map(move |(n, s, v)| (format!("{prefix}.{n}"), s, v))
        })
        .collect()
}

/// The four players. `E` is the extractor type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialModel<E> {
    pub extractor: E,
    pub predictor: Head,
    pub discriminator: Head,
    pub classifier: Head,
}

/// The convolutional model used on propagation profiles.
pub type ModelParams = AdversarialModel<ConvExtractor>;

/// All outputs of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutputs {
    pub e_x: Vec<f64>,
    pub p_y: Vec<f64>,
    pub d_z: Vec<f64>,
    pub c_v: Vec<f64>,
}

impl ModelParams {
    /// Initializes all players from `seed` and checks the layer arithmetic.
    pub fn new(arch: &Architecture, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, 0);
        let extractor = ConvExtractor::new(arch, &mut rng)?;
        let e = arch.representation_len()?;
        Ok(AdversarialModel {
            extractor,
            predictor: Head::new(e, Some(arch.hidden), arch.n_y, &mut rng),
            discriminator: Head::new(e + arch.n_y, Some(arch.hidden), arch.n_z, &mut rng),
            classifier: Head::new(e + arch.n_y, Some(arch.hidden), arch.n_v, &mut rng),
        })
    }

    pub fn architecture(&self) -> Architecture {
        let first = &self.extractor.layers[0];
        Architecture {
            input_len: self.extractor.input_len,
            channels: first.out_ch,
            conv_layers: self.extractor.layers.len(),
            pooled_layers: self.extractor.pooled_layers,
            kernel: first.kernel,
            hidden: self.predictor.hidden.as_ref().map_or(0, |h| h.outputs),
            n_y: self.predictor.outputs(),
            n_z: self.discriminator.outputs(),
            n_v: self.classifier.outputs(),
        }
    }
}

impl DenseExtractor {
    pub fn new(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        DenseExtractor {
            dense: Dense::init(inputs, outputs, rng),
        }
    }
}

/// `e ⊕ u`: the adversaries' input.
pub fn concat(e: &[f64], u: &[f64]) -> Vec<f64> {
    let mut o = Vec::with_capacity(e.len() + u.len());
    o.extend_from_slice(e);
    o.extend_from_slice(u);
    o
}

/// Label with the fail-safe tie rule: the first class wins ties, so an exact
/// on/off tie is denied.
pub fn argmax_label(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

impl<E: Extractor> AdversarialModel<E> {
    pub fn forward(&self, x: &[f64]) -> Result<ModelOutputs> {
        let (e_x, _) = self.extractor.forward(x)?;
        let p_y = self.predictor.probs(&e_x)?;
        let o = concat(&e_x, &p_y);
        Ok(ModelOutputs {
            d_z: self.discriminator.probs(&o)?,
            c_v: self.classifier.probs(&o)?,
            e_x,
            p_y,
        })
    }

    /// `P(on | x)`.
    pub fn score_on(&self, x: &[f64]) -> Result<f64> {
        let (e, _) = self.extractor.forward(x)?;
        Ok(self.predictor.probs(&e)?[1])
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let (e, _) = self.extractor.forward(x)?;
        Ok(argmax_label(&self.predictor.probs(&e)?))
    }
}

impl<E: Extractor> ParamSet for AdversarialModel<E> {
    fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        prefixed([
            ("extractor".to_string(), &self.extractor as &dyn ParamView),
            ("predictor".to_string(), &self.predictor),
            ("discriminator".to_string(), &self.discriminator),
            ("classifier".to_string(), &self.classifier),
        ])
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.extractor.tensors_mut();
        v.extend(self.predictor.tensors_mut());
        v.extend(self.discriminator.tensors_mut());
        v.extend(self.classifier.tensors_mut());
        v
    }

    fn zeros_like(&self) -> Self {
        AdversarialModel {
            extractor: self.extractor.zeros_like(),
            predictor: self.predictor.zeros_like(),
            discriminator: self.discriminator.zeros_like(),
            classifier: self.classifier.zeros_like(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::gradcheck::{check_input_gradient, check_param_gradient};
    use crate::rng::{rng_from_seed, uniform};

    #[test]
    fn default_architecture_lengths() {
        let a = Architecture::default();
        assert_eq!(a.lengths().unwrap(), vec![189, 93, 45, 21, 9, 7, 5, 3]);
        assert_eq!(a.representation_len().unwrap(), 384);
    }

    #[test]
    fn pooling_every_layer_is_impossible() {
        let a = Architecture {
            pooled_layers: 8,
            ..Architecture::default()
        };
        assert!(a.lengths().is_err());
        assert!(ModelParams::new(&a, 0).is_err());
    }

    #[test]
    fn full_size_forward_shapes() {
        let m = ModelParams::new(&Architecture::default(), 1).unwrap();
        let x: Vec<f64> = (0..380).map(|i| (i as f64 * 0.1).sin()).collect();
        let out = m.forward(&x).unwrap();
        assert_eq!(out.e_x.len(), 384);
        assert_eq!(m.discriminator.inputs(), 386);
        for p in [&out.p_y, &out.d_z, &out.c_v] {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(out.d_z.len(), 5);
        assert_eq!(m.forward(&x).unwrap(), out);
        assert_eq!(m.architecture(), Architecture::default());
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_representation() {
        let m = ModelParams::new(&Architecture::default(), 2).unwrap();
        let (e, _) = m.extractor.forward(&[0.0; 380]).unwrap();
        assert!(e.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tie_denies() {
        assert_eq!(argmax_label(&[0.6, 0.4]), 0);
        assert_eq!(argmax_label(&[0.5, 0.5]), 0);
        assert_eq!(argmax_label(&[0.4, 0.6]), 1);
    }

    #[test]
    fn extractor_gradients() {
        let arch = Architecture {
            input_len: 40,
            channels: 3,
            conv_layers: 4,
            pooled_layers: 2,
            ..Architecture::default()
        };
        let mut rng = rng_from_seed(3);
        let mut ex = ConvExtractor::new(&arch, &mut rng).unwrap();
        for c in &mut ex.layers {
            c.b.iter_mut().for_each(|b| *b = uniform(&mut rng, 0.0, 0.3));
        }
        let x: Vec<f64> = (0..40).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let (e, tape) = ex.forward(&x).unwrap();
        assert_eq!(e.len(), ex.output_len());
        let r: Vec<f64> = (0..e.len()).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let mut grads = ex.zeros_like();
        ex.backward(tape, &r, &mut grads);
        let loss = |p: &ConvExtractor| p.forward(&x).unwrap().0.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        let rep = check_param_gradient(&ex, loss, &grads, 100, 4);
        assert!(rep.max_rel_error < 1e-4, "{rep:?}");
    }

    #[test]
    fn head_gradients() {
        let mut rng = rng_from_seed(8);
        let h = Head::new(6, Some(4), 3, &mut rng);
        let x: Vec<f64> = (0..6).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let (p, tape) = h.forward(&x).unwrap();
        let (_, g) = crate::nnet::xent_loss(&p, 2);
        let mut grads = h.zeros_like();
        let gx = h.backward(&tape, &g, &mut grads);
        let loss = |h: &Head, x: &[f64]| crate::nnet::xent_loss(&h.probs(x).unwrap(), 2).0;
        let rx = check_input_gradient(|x| loss(&h, x), &x, &gx, 100, 1);
        let rp = check_param_gradient(&h, |h| loss(h, &x), &grads, 100, 2);
        assert!(rx.max_rel_error < 1e-4 && rp.max_rel_error < 1e-4, "{rx:?} {rp:?}");
    }

    #[test]
    fn tensor_names_are_prefixed() {
        let arch = Architecture {
            channels: 2,
            ..Architecture::default()
        };
        let mut m = ModelParams::new(&arch, 0).unwrap();
        let names: Vec<String> = m.tensors().into_iter().map(|t| t.0).collect();
        assert_eq!(names[0], "extractor.conv1.w");
        assert!(names.contains(&"discriminator.hidden.w".to_string()));
        assert_eq!(names.len(), 8 * 2 + 3 * 4);
        assert_eq!(m.tensors_mut().len(), names.len());
    }
}
