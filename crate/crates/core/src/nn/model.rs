use ndarray::{Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::layer::{BnLayer, ConvLayer, FcLayer, Layer, LayerCache};
use super::{LayerSpec, Phase};
use crate::error::{Error, Result};
use crate::util::seeded_rng;

/// An ordered stack of layers with a validated shape chain. Inputs and
/// outputs are row-per-sample matrices; single-channel tensors are used
/// internally between layers.
#[derive(Debug, Clone)]
pub struct Model {
    pub layers: Vec<Layer>,
}

/// One named parameter array exposed during traversal.
pub struct ParamView<'a> {
    pub name: String,
    pub data: &'a mut [f64],
    /// Accumulated gradient storage; absent for population statistics.
    pub grad: Option<&'a mut [f64]>,
    pub shape: Vec<usize>,
    pub trainable: bool,
    /// Whether the parameter enters the L2 penalty term of the loss.
    pub penalized: bool,
}

/// Trainable-parameter totals, with and without batch-norm statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamCount {
    pub per_layer: Vec<(String, usize)>,
    pub trainable: usize,
    pub with_statistics: usize,
}

impl Model {
    /// Builds a model from layer specs, validates that the shapes chain, and
    /// initializes all parameters deterministically from the seed.
    pub fn from_specs(specs: &[LayerSpec], seed: u64) -> Result<Model> {
        let mut height: Option<usize> = None;
        let mut channels = 1usize;
        let mut layers = Vec::with_capacity(specs.len());
        for (idx, spec) in specs.iter().enumerate() {
            match spec {
                LayerSpec::Fc {
                    n_in,
                    n_out,
                    activation,
                }
                | LayerSpec::Sc {
                    n_in,
                    n_out,
                    activation,
                } => {
                    if let Some(h) = height {
                        if h * channels != *n_in {
                            return Err(Error::ShapeMismatch(format!(
                                "layer {idx}: expects {n_in} inputs but receives {h}x{channels}"
                            )));
                        }
                    }
                    let mask = match spec {
                        LayerSpec::Sc { .. } => Some(Array2::ones((*n_out, *n_in))),
                        _ => None,
                    };
                    layers.push(Layer::Fc(FcLayer::new(*n_in, *n_out, mask, *activation)));
                    height = Some(*n_out);
                    channels = 1;
                }
                LayerSpec::Conv1d {
                    filter,
                    c_in,
                    c_out,
                    activation,
                } => {
                    if *filter == 0 {
                        return Err(Error::InvalidParam(format!(
                            "layer {idx}: filter size must be positive"
                        )));
                    }
                    if channels != *c_in {
                        return Err(Error::ShapeMismatch(format!(
                            "layer {idx}: expects {c_in} input channels but receives {channels}"
                        )));
                    }
                    layers.push(Layer::Conv(ConvLayer::new(*filter, *c_in, *c_out, *activation)));
                    channels = *c_out;
                }
                LayerSpec::Bn {
                    n_h,
                    param_mode,
                    epsilon,
                } => {
                    if *epsilon <= 0.0 {
                        return Err(Error::InvalidParam(format!(
                            "layer {idx}: batch-norm epsilon must be positive"
                        )));
                    }
                    if let Some(h) = height {
                        if h != *n_h {
                            return Err(Error::ShapeMismatch(format!(
                                "layer {idx}: batch-norm sized for height {n_h} but receives {h}"
                            )));
                        }
                    }
                    layers.push(Layer::Bn(BnLayer::new(*n_h, *param_mode, *epsilon)));
                    height = Some(*n_h);
                }
            }
        }
        let mut model = Model { layers };
        model.reinit(seed);
        Ok(model)
    }

    /// Reconstructs the spec list describing this model's architecture.
    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .map(|layer| match layer {
                Layer::Fc(l) => {
                    if l.mask.is_some() {
                        LayerSpec::Sc {
                            n_in: l.n_in(),
                            n_out: l.n_out(),
                            activation: l.activation,
                        }
                    } else {
                        LayerSpec::Fc {
                            n_in: l.n_in(),
                            n_out: l.n_out(),
                            activation: l.activation,
                        }
                    }
                }
                Layer::Conv(l) => LayerSpec::Conv1d {
                    filter: l.filter(),
                    c_in: l.c_in(),
                    c_out: l.c_out(),
                    activation: l.activation,
                },
                Layer::Bn(l) => LayerSpec::Bn {
                    n_h: l.n_h(),
                    param_mode: l.param_mode,
                    epsilon: l.epsilon,
                },
            })
            .collect()
    }

    /// Re-draws all weights from zero-mean Gaussians with variance 2/fan-in,
    /// resets biases, batch-norm scale/shift, and population statistics.
    /// Masked rows use only their unmasked connection count as fan-in.
    pub fn reinit(&mut self, seed: u64) {
        for (idx, layer) in self.layers.iter_mut().enumerate() {
            init_layer(layer, seed, idx);
        }
    }

    /// Attaches a 0/1 connectivity mask to the fully-connected layer at
    /// `layer_idx`, zeroing the masked weight entries.
    pub fn apply_mask(&mut self, layer_idx: usize, mask: Array2<f64>) -> Result<()> {
        match self.layers.get_mut(layer_idx) {
            Some(Layer::Fc(l)) => {
                if mask.dim() != l.w.dim() {
                    return Err(Error::ShapeMismatch(format!(
                        "mask shape {:?} does not match weights {:?}",
                        mask.dim(),
                        l.w.dim()
                    )));
                }
                l.w *= &mask;
                l.mask = Some(mask);
                Ok(())
            }
            Some(_) => Err(Error::InvalidParam(format!(
                "layer {layer_idx} is not fully-connected"
            ))),
            None => Err(Error::InvalidParam(format!("no layer {layer_idx}"))),
        }
    }

    pub fn forward(&mut self, x: &Array2<f64>, phase: Phase) -> Result<Array2<f64>> {
        let (y, _) = self.forward_cached(x, phase)?;
        Ok(y)
    }

    pub fn forward_cached(
        &mut self,
        x: &Array2<f64>,
        phase: Phase,
    ) -> Result<(Array2<f64>, Vec<LayerCache>)> {
        let (batch, n) = x.dim();
        let mut cur = x
            .to_shape((batch, n, 1))
            .expect("contiguous reshape")
            .to_owned();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let (next, cache) = layer.forward(&cur, phase)?;
            caches.push(cache);
            cur = next;
        }
        let (b_out, h, c) = cur.dim();
        Ok((
            cur.into_shape_with_order((b_out, h * c))
                .expect("contiguous reshape"),
            caches,
        ))
    }

    /// Accumulates parameter gradients from an upstream output gradient and
    /// returns the gradient with respect to the model input.
    pub fn backward(
        &mut self,
        caches: &[LayerCache],
        grad_out: &Array2<f64>,
    ) -> Result<Array2<f64>> {
        if caches.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(
                "cache list does not match layer count".into(),
            ));
        }
        // Invert the forward flatten: recover the last layer's (height,
        // channels) split, which is (n, 1) except for conv/BN tails.
        let (batch, n) = grad_out.dim();
        let (h, c) = match (self.layers.last(), caches.last()) {
            (Some(Layer::Conv(conv)), Some(LayerCache::Conv { x, .. })) => {
                (x.dim().1, conv.w.dim().2)
            }
            (Some(Layer::Bn(_)), Some(LayerCache::Bn { xhat, .. })) => (xhat.dim().1, xhat.dim().2),
            _ => (n, 1),
        };
        if h * c != n {
            return Err(Error::ShapeMismatch(format!(
                "output gradient width {n} does not match final layer output {h}x{c}"
            )));
        }
        let mut g: Array3<f64> = grad_out
            .to_shape((batch, h, c))
            .expect("contiguous reshape")
            .to_owned();
        for (layer, cache) in self.layers.iter_mut().zip(caches.iter()).rev() {
            g = layer.backward(cache, &g)?;
        }
        let (b_out, h, c) = g.dim();
        Ok(g
            .into_shape_with_order((b_out, h * c))
            .expect("contiguous reshape"))
    }

    pub fn zero_grads(&mut self) {
        for layer in &mut self.layers {
            layer.zero_grads();
        }
    }

    /// Visits every parameter array in a fixed order with stable names
    /// ("layer03.w", "layer03.b", ...). Population statistics are visited
    /// with `trainable = false` and no gradient storage.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamView)) {
        for (idx, layer) in self.layers.iter_mut().enumerate() {
            let prefix = format!("layer{idx:02}");
            match layer {
                Layer::Fc(l) => {
                    f(ParamView {
                        name: format!("{prefix}.w"),
                        shape: l.w.shape().to_vec(),
                        data: l.w.as_slice_mut().expect("standard layout"),
                        grad: Some(l.grad_w.as_slice_mut().expect("standard layout")),
                        trainable: true,
                        penalized: true,
                    });
                    f(ParamView {
                        name: format!("{prefix}.b"),
                        shape: l.b.shape().to_vec(),
                        data: l.b.as_slice_mut().expect("standard layout"),
                        grad: Some(l.grad_b.as_slice_mut().expect("standard layout")),
                        trainable: true,
                        penalized: true,
                    });
                    if let Some(m) = &mut l.mask {
                        f(ParamView {
                            name: format!("{prefix}.mask"),
                            shape: m.shape().to_vec(),
                            data: m.as_slice_mut().expect("standard layout"),
                            grad: None,
                            trainable: false,
                            penalized: false,
                        });
                    }
                }
                Layer::Conv(l) => {
                    f(ParamView {
                        name: format!("{prefix}.w"),
                        shape: l.w.shape().to_vec(),
                        data: l.w.as_slice_mut().expect("standard layout"),
                        grad: Some(l.grad_w.as_slice_mut().expect("standard layout")),
                        trainable: true,
                        penalized: true,
                    });
                    f(ParamView {
                        name: format!("{prefix}.b"),
                        shape: l.b.shape().to_vec(),
                        data: l.b.as_slice_mut().expect("standard layout"),
                        grad: Some(l.grad_b.as_slice_mut().expect("standard layout")),
                        trainable: true,
                        penalized: true,
                    });
                }
                Layer::Bn(l) => {
                    f(ParamView {
                        name: format!("{prefix}.gamma"),
                        shape: l.gamma.shape().to_vec(),
                        data: l.gamma.as_slice_mut().expect("standard layout"),
                        grad: Some(l.grad_gamma.as_slice_mut().expect("standard layout")),
                        trainable: true,
                        penalized: false,
                    });
                    f(ParamView {
                        name: format!("{prefix}.beta"),
                        shape: l.beta.shape().to_vec(),
                        data: l.beta.as_slice_mut().expect("standard layout"),
                        grad: Some(l.grad_beta.as_slice_mut().expect("standard layout")),
                        trainable: true,
                        penalized: false,
                    });
                    f(ParamView {
                        name: format!("{prefix}.mean"),
                        shape: l.mean.shape().to_vec(),
                        data: l.mean.as_slice_mut().expect("standard layout"),
                        grad: None,
                        trainable: false,
                        penalized: false,
                    });
                    f(ParamView {
                        name: format!("{prefix}.var"),
                        shape: l.var.shape().to_vec(),
                        data: l.var.as_slice_mut().expect("standard layout"),
                        grad: None,
                        trainable: false,
                        penalized: false,
                    });
                }
            }
        }
    }

    /// Per-layer and total trainable parameter counts. The with-statistics
    /// totals additionally count batch-norm population mean and variance.
    pub fn param_count(&self) -> ParamCount {
        let mut per_layer = Vec::with_capacity(self.layers.len());
        let mut trainable = 0usize;
        let mut with_statistics = 0usize;
        for layer in &self.layers {
            let (label, t, s) = match layer {
                Layer::Fc(l) => {
                    let weights = match &l.mask {
                        Some(m) => m.iter().filter(|&&v| v != 0.0).count(),
                        None => l.w.len(),
                    };
                    let label = if l.mask.is_some() { "sc" } else { "fc" };
                    (label, weights + l.b.len(), 0)
                }
                Layer::Conv(l) => ("conv", l.w.len() + l.b.len(), 0),
                Layer::Bn(l) => ("bn", l.gamma.len() + l.beta.len(), l.mean.len() + l.var.len()),
            };
            per_layer.push((label.to_string(), t));
            trainable += t;
            with_statistics += t + s;
        }
        ParamCount {
            per_layer,
            trainable,
            with_statistics,
        }
    }

    /// Computes batch-norm population statistics with one pass over the full
    /// training inputs, finalizing each layer in order so later layers see
    /// activations produced under evaluation-phase normalization.
    pub fn finalize_bn(&mut self, train_x: &Array2<f64>) -> Result<()> {
        let (batch, n) = train_x.dim();
        let mut cur = train_x
            .to_shape((batch, n, 1))
            .expect("contiguous reshape")
            .to_owned();
        for layer in &mut self.layers {
            if let Layer::Bn(bn) = layer {
                bn.ensure_groups(cur.dim().2)?;
                let (mean, var, _) = bn.batch_stats(&cur);
                bn.mean = mean;
                bn.var = var;
                bn.finalized = true;
            }
            let (next, _) = layer.forward(&cur, Phase::Eval)?;
            cur = next;
        }
        Ok(())
    }

    pub fn has_unfinalized_bn(&self) -> bool {
        self.layers.iter().any(|l| match l {
            Layer::Bn(bn) => !bn.finalized,
            _ => false,
        })
    }
}

/// Draws a single layer's initial parameters: Gaussian weights with variance
/// 2/fan-in, zero biases, unit batch-norm scale, and cleared statistics.
pub(crate) fn init_layer(layer: &mut Layer, seed: u64, idx: usize) {
    match layer {
        Layer::Fc(l) => {
            let mut rng = param_rng(seed, idx, "w");
            let n_in = l.n_in();
            for i in 0..l.n_out() {
                let fan_in = match &l.mask {
                    Some(m) => m.row(i).iter().filter(|&&v| v != 0.0).count().max(1),
                    None => n_in,
                };
                let sd = (2.0 / fan_in as f64).sqrt();
                for j in 0..n_in {
                    let draw = gauss(&mut rng) * sd;
                    l.w[[i, j]] = match &l.mask {
                        Some(m) if m[[i, j]] == 0.0 => 0.0,
                        _ => draw,
                    };
                }
            }
            l.b.fill(0.0);
            l.grad_w.fill(0.0);
            l.grad_b.fill(0.0);
        }
        Layer::Conv(l) => {
            let mut rng = param_rng(seed, idx, "w");
            let sd = (2.0 / (l.filter() * l.c_in()) as f64).sqrt();
            for v in l.w.iter_mut() {
                *v = gauss(&mut rng) * sd;
            }
            l.b.fill(0.0);
            l.grad_w.fill(0.0);
            l.grad_b.fill(0.0);
        }
        Layer::Bn(l) => {
            l.gamma.fill(1.0);
            l.beta.fill(0.0);
            l.grad_gamma.fill(0.0);
            l.grad_beta.fill(0.0);
            l.mean.fill(0.0);
            l.var.fill(1.0);
            l.finalized = false;
        }
    }
}

fn param_rng(seed: u64, layer_idx: usize, field: &str) -> ChaCha8Rng {
    let mut tag = 0xcbf2_9ce4_8422_2325u64;
    for byte in field.as_bytes() {
        tag = (tag ^ *byte as u64).wrapping_mul(0x1000_0000_01b3);
    }
    seeded_rng(seed, &[0x4e4e_0001, layer_idx as u64, tag])
}

/// Standard normal draw via Box-Muller.
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, BnParamMode};
    use ndarray::array;

    fn single_fc(n: usize, activation: Activation) -> Vec<LayerSpec> {
        vec![LayerSpec::Fc {
            n_in: n,
            n_out: n,
            activation,
        }]
    }

    #[test]
    fn empty_model_is_identity() {
        let mut m = Model::from_specs(&[], 1).unwrap();
        let x = array![[1.0, -2.0, 3.5]];
        let y = m.forward(&x, Phase::Eval).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn shape_chain_mismatch_rejected_at_build() {
        let specs = vec![
            LayerSpec::Fc {
                n_in: 4,
                n_out: 5,
                activation: Activation::Linear,
            },
            LayerSpec::Fc {
                n_in: 6,
                n_out: 2,
                activation: Activation::Linear,
            },
        ];
        assert!(Model::from_specs(&specs, 1).is_err());
    }

    #[test]
    fn single_fc_count_matches_closed_form() {
        let m = Model::from_specs(&single_fc(101, Activation::Linear), 1).unwrap();
        assert_eq!(m.param_count().trainable, 10302);
        let m = Model::from_specs(&single_fc(201, Activation::Linear), 1).unwrap();
        assert_eq!(m.param_count().trainable, 40602);
    }

    #[test]
    fn init_is_deterministic_and_biases_zero() {
        let mut a = Model::from_specs(&single_fc(7, Activation::Relu), 42).unwrap();
        let mut b = Model::from_specs(&single_fc(7, Activation::Relu), 42).unwrap();
        let mut va = Vec::new();
        a.visit_params(&mut |p| va.extend_from_slice(p.data));
        let mut vb = Vec::new();
        b.visit_params(&mut |p| vb.extend_from_slice(p.data));
        assert_eq!(va, vb);
        match &a.layers[0] {
            Layer::Fc(l) => assert!(l.b.iter().all(|&v| v == 0.0)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn init_variance_tracks_fan_in() {
        let specs = vec![LayerSpec::Fc {
            n_in: 50,
            n_out: 2000,
            activation: Activation::Linear,
        }];
        let m = Model::from_specs(&specs, 9).unwrap();
        let w = match &m.layers[0] {
            Layer::Fc(l) => &l.w,
            _ => unreachable!(),
        };
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(
            (var - 0.04).abs() < 0.002,
            "sample variance {var} far from 2/50"
        );
    }

    #[test]
    fn bn_init_is_ones_and_zeros() {
        let specs = vec![LayerSpec::Bn {
            n_h: 5,
            param_mode: BnParamMode::PerHeight,
            epsilon: 1e-8,
        }];
        let m = Model::from_specs(&specs, 3).unwrap();
        match &m.layers[0] {
            Layer::Bn(l) => {
                assert!(l.gamma.iter().all(|&v| v == 1.0));
                assert!(l.beta.iter().all(|&v| v == 0.0));
                assert!(!l.finalized);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn finalize_bn_enables_eval_phase() {
        let specs = vec![
            LayerSpec::Conv1d {
                filter: 2,
                c_in: 1,
                c_out: 3,
                activation: Activation::Relu,
            },
            LayerSpec::Bn {
                n_h: 4,
                param_mode: BnParamMode::PerHeight,
                epsilon: 1e-8,
            },
            LayerSpec::Conv1d {
                filter: 1,
                c_in: 3,
                c_out: 1,
                activation: Activation::Linear,
            },
        ];
        let mut m = Model::from_specs(&specs, 5).unwrap();
        let x = array![
            [0.1, -0.4, 0.9, 0.3],
            [1.0, 0.2, -0.7, 0.5],
            [-0.3, 0.8, 0.4, -0.1]
        ];
        assert!(m.forward(&x, Phase::Eval).is_err());
        m.finalize_bn(&x).unwrap();
        assert!(!m.has_unfinalized_bn());
        let y = m.forward(&x, Phase::Eval).unwrap();
        assert_eq!(y.dim(), (3, 4));
        assert!(y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn masked_reinit_uses_row_fan_in() {
        let specs = vec![LayerSpec::Sc {
            n_in: 600,
            n_out: 2,
            activation: Activation::Linear,
        }];
        let mut m = Model::from_specs(&specs, 11).unwrap();
        let mut mask = Array2::ones((2, 600));
        for j in 300..600 {
            mask[[1, j]] = 0.0;
        }
        m.apply_mask(0, mask).unwrap();
        m.reinit(11);
        let w = match &m.layers[0] {
            Layer::Fc(l) => &l.w,
            _ => unreachable!(),
        };
        let var_row = |i: usize, len: usize| {
            let row: Vec<f64> = (0..len).map(|j| w[[i, j]]).collect();
            let mean = row.iter().sum::<f64>() / len as f64;
            row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len as f64
        };
        let v0 = var_row(0, 600);
        let v1 = var_row(1, 300);
        assert!((v0 - 2.0 / 600.0).abs() < 0.25 * 2.0 / 600.0, "{v0}");
        assert!((v1 - 2.0 / 300.0).abs() < 0.25 * 2.0 / 300.0, "{v1}");
        for j in 300..600 {
            assert_eq!(w[[1, j]], 0.0);
        }
    }
}
