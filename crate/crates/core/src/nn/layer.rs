use ndarray::{Array1, Array2, Array3, Axis};

use super::{Activation, BnParamMode, Phase};
use crate::error::{Error, Result};

/// Fully-connected layer; with a mask it becomes sparsely connected and the
/// masked weight entries are frozen at exactly zero.
#[derive(Debug, Clone)]
pub struct FcLayer {
    /// Weights, shape (n_out, n_in).
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub grad_w: Array2<f64>,
    pub grad_b: Array1<f64>,
    /// 0/1 connectivity mask with the same shape as `w`.
    pub mask: Option<Array2<f64>>,
    pub activation: Activation,
}

/// 1-D convolution with stride 1 and same-height zero padding.
#[derive(Debug, Clone)]
pub struct ConvLayer {
    /// Filters, shape (filter, c_in, c_out).
    pub w: Array3<f64>,
    pub b: Array1<f64>,
    pub grad_w: Array3<f64>,
    pub grad_b: Array1<f64>,
    pub activation: Activation,
}

/// Batch normalization over (batch, channels) per height, or over the batch
/// per (height, channel) element. Scale/shift and statistics have shape
/// (n_h, groups) where groups is 1 in per-height mode.
#[derive(Debug, Clone)]
pub struct BnLayer {
    pub gamma: Array2<f64>,
    pub beta: Array2<f64>,
    pub grad_gamma: Array2<f64>,
    pub grad_beta: Array2<f64>,
    /// Population statistics, valid once `finalized` is set.
    pub mean: Array2<f64>,
    pub var: Array2<f64>,
    pub finalized: bool,
    pub param_mode: BnParamMode,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub enum Layer {
    Fc(FcLayer),
    Conv(ConvLayer),
    Bn(BnLayer),
}

/// Intermediate values saved by a forward pass for the matching backward pass.
#[derive(Debug)]
pub enum LayerCache {
    Fc {
        /// Input flattened to (batch, h*c).
        x: Array2<f64>,
        /// ReLU derivative per output entry, when the activation needs one.
        act: Option<Array2<f64>>,
        in_height: usize,
        in_channels: usize,
    },
    Conv {
        x: Array3<f64>,
        act: Option<Array3<f64>>,
    },
    Bn {
        xhat: Array3<f64>,
        inv_std: Array2<f64>,
        n_reduce: f64,
    },
}

impl FcLayer {
    pub fn new(n_in: usize, n_out: usize, mask: Option<Array2<f64>>, activation: Activation) -> Self {
        FcLayer {
            w: Array2::zeros((n_out, n_in)),
            b: Array1::zeros(n_out),
            grad_w: Array2::zeros((n_out, n_in)),
            grad_b: Array1::zeros(n_out),
            mask,
            activation,
        }
    }

    pub fn n_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.w.nrows()
    }

    /// Weights with the mask applied (identical to `w` for dense layers).
    pub fn effective_w(&self) -> Array2<f64> {
        match &self.mask {
            Some(m) => &self.w * m,
            None => self.w.clone(),
        }
    }

    fn forward(&self, x: &Array3<f64>) -> Result<(Array3<f64>, LayerCache)> {
        let (batch, h, c) = x.dim();
        if h * c != self.n_in() {
            return Err(Error::ShapeMismatch(format!(
                "fc layer expects {} inputs, got {}x{}",
                self.n_in(),
                h,
                c
            )));
        }
        let x2 = x
            .to_shape((batch, h * c))
            .expect("contiguous reshape")
            .to_owned();
        let mut z = x2.dot(&self.effective_w().t());
        z += &self.b;
        let act = apply_activation_2d(&mut z, self.activation);
        let n_out = self.n_out();
        let y = z
            .into_shape_with_order((batch, n_out, 1))
            .expect("contiguous reshape");
        Ok((
            y,
            LayerCache::Fc {
                x: x2,
                act,
                in_height: h,
                in_channels: c,
            },
        ))
    }

    fn backward(&mut self, cache: &LayerCache, grad_out: &Array3<f64>) -> Result<Array3<f64>> {
        let (x2, act, h, c) = match cache {
            LayerCache::Fc {
                x,
                act,
                in_height,
                in_channels,
            } => (x, act, *in_height, *in_channels),
            _ => return Err(Error::ShapeMismatch("cache/layer kind mismatch".into())),
        };
        let (batch, n_out, _) = grad_out.dim();
        let mut g = grad_out
            .to_shape((batch, n_out))
            .expect("contiguous reshape")
            .to_owned();
        if let Some(m) = act {
            g *= m;
        }
        let mut dw = g.t().dot(x2);
        if let Some(m) = &self.mask {
            dw *= m;
        }
        self.grad_w += &dw;
        self.grad_b += &g.sum_axis(Axis(0));
        let dx = g.dot(&self.effective_w());
        Ok(dx
            .into_shape_with_order((batch, h, c))
            .expect("contiguous reshape"))
    }
}

impl ConvLayer {
    pub fn new(filter: usize, c_in: usize, c_out: usize, activation: Activation) -> Self {
        ConvLayer {
            w: Array3::zeros((filter, c_in, c_out)),
            b: Array1::zeros(c_out),
            grad_w: Array3::zeros((filter, c_in, c_out)),
            grad_b: Array1::zeros(c_out),
            activation,
        }
    }

    pub fn filter(&self) -> usize {
        self.w.dim().0
    }

    pub fn c_in(&self) -> usize {
        self.w.dim().1
    }

    pub fn c_out(&self) -> usize {
        self.w.dim().2
    }

    /// Zeros inserted before the first height index; the remainder of the
    /// f-1 total padding goes after, so the output height equals the input's.
    fn pad_before(&self) -> usize {
        (self.filter() - 1) / 2
    }

    fn forward(&self, x: &Array3<f64>) -> Result<(Array3<f64>, LayerCache)> {
        let (batch, height, c_in) = x.dim();
        if c_in != self.c_in() {
            return Err(Error::ShapeMismatch(format!(
                "conv layer expects {} input channels, got {}",
                self.c_in(),
                c_in
            )));
        }
        let f = self.filter();
        let pb = self.pad_before() as isize;
        let mut z = Array3::zeros((batch, height, self.c_out()));
        for b in 0..batch {
            for h in 0..height {
                for co in 0..self.c_out() {
                    let mut acc = self.b[co];
                    for j in 0..f {
                        let src = h as isize + j as isize - pb;
                        if src < 0 || src >= height as isize {
                            continue;
                        }
                        for ci in 0..c_in {
                            acc += x[[b, src as usize, ci]] * self.w[[j, ci, co]];
                        }
                    }
                    z[[b, h, co]] = acc;
                }
            }
        }
        let act = apply_activation_3d(&mut z, self.activation);
        Ok((z, LayerCache::Conv { x: x.clone(), act }))
    }

    fn backward(&mut self, cache: &LayerCache, grad_out: &Array3<f64>) -> Result<Array3<f64>> {
        let (x, act) = match cache {
            LayerCache::Conv { x, act } => (x, act),
            _ => return Err(Error::ShapeMismatch("cache/layer kind mismatch".into())),
        };
        let (batch, height, c_in) = x.dim();
        let mut g = grad_out.clone();
        if let Some(m) = act {
            g *= m;
        }
        let f = self.filter();
        let pb = self.pad_before() as isize;
        let mut dx = Array3::zeros((batch, height, c_in));
        for b in 0..batch {
            for h in 0..height {
                for co in 0..self.c_out() {
                    let gv = g[[b, h, co]];
                    if gv == 0.0 {
                        continue;
                    }
                    self.grad_b[co] += gv;
                    for j in 0..f {
                        let src = h as isize + j as isize - pb;
                        if src < 0 || src >= height as isize {
                            continue;
                        }
                        for ci in 0..c_in {
                            self.grad_w[[j, ci, co]] += x[[b, src as usize, ci]] * gv;
                            dx[[b, src as usize, ci]] += self.w[[j, ci, co]] * gv;
                        }
                    }
                }
            }
        }
        Ok(dx)
    }
}

impl BnLayer {
    pub fn new(n_h: usize, param_mode: BnParamMode, epsilon: f64) -> Self {
        let groups = match param_mode {
            BnParamMode::PerHeight => 1,
            // Per-element layers size their arrays lazily on first use.
            BnParamMode::PerElement => 1,
        };
        BnLayer {
            gamma: Array2::ones((n_h, groups)),
            beta: Array2::zeros((n_h, groups)),
            grad_gamma: Array2::zeros((n_h, groups)),
            grad_beta: Array2::zeros((n_h, groups)),
            mean: Array2::zeros((n_h, groups)),
            var: Array2::ones((n_h, groups)),
            finalized: false,
            param_mode,
            epsilon,
        }
    }

    pub fn n_h(&self) -> usize {
        self.gamma.nrows()
    }

    pub(crate) fn ensure_groups(&mut self, channels: usize) -> Result<()> {
        let want = match self.param_mode {
            BnParamMode::PerHeight => 1,
            BnParamMode::PerElement => channels,
        };
        if self.gamma.ncols() == want {
            return Ok(());
        }
        if self.gamma.ncols() != 1 || self.finalized {
            return Err(Error::ShapeMismatch(format!(
                "batch-norm layer sized for {} channel groups, input has {}",
                self.gamma.ncols(),
                channels
            )));
        }
        let n_h = self.n_h();
        self.gamma = Array2::ones((n_h, want));
        self.beta = Array2::zeros((n_h, want));
        self.grad_gamma = Array2::zeros((n_h, want));
        self.grad_beta = Array2::zeros((n_h, want));
        self.mean = Array2::zeros((n_h, want));
        self.var = Array2::ones((n_h, want));
        Ok(())
    }

    fn group_of(&self, channel: usize) -> usize {
        match self.param_mode {
            BnParamMode::PerHeight => 0,
            BnParamMode::PerElement => channel,
        }
    }

    /// Per-group mean and biased variance of a batch, reduced over the sample
    /// axis and, in per-height mode, the channel axis.
    pub fn batch_stats(&self, x: &Array3<f64>) -> (Array2<f64>, Array2<f64>, f64) {
        let (batch, height, channels) = x.dim();
        let groups = match self.param_mode {
            BnParamMode::PerHeight => 1,
            BnParamMode::PerElement => channels,
        };
        let n_reduce = match self.param_mode {
            BnParamMode::PerHeight => (batch * channels) as f64,
            BnParamMode::PerElement => batch as f64,
        };
        let mut mean = Array2::zeros((height, groups));
        let mut var = Array2::zeros((height, groups));
        for b in 0..batch {
            for h in 0..height {
                for c in 0..channels {
                    mean[[h, self.group_of(c)]] += x[[b, h, c]];
                }
            }
        }
        mean /= n_reduce;
        for b in 0..batch {
            for h in 0..height {
                for c in 0..channels {
                    let d = x[[b, h, c]] - mean[[h, self.group_of(c)]];
                    var[[h, self.group_of(c)]] += d * d;
                }
            }
        }
        var /= n_reduce;
        (mean, var, n_reduce)
    }

    fn forward(&mut self, x: &Array3<f64>, phase: Phase) -> Result<(Array3<f64>, LayerCache)> {
        let (batch, height, channels) = x.dim();
        if height != self.n_h() {
            return Err(Error::ShapeMismatch(format!(
                "batch-norm layer sized for height {}, input has {}",
                self.n_h(),
                height
            )));
        }
        self.ensure_groups(channels)?;
        let (mean, var, n_reduce) = match phase {
            Phase::Train => {
                if batch < 2 {
                    return Err(Error::InvalidParam(
                        "batch normalization needs batch size >= 2 in the training phase".into(),
                    ));
                }
                self.batch_stats(x)
            }
            Phase::Eval => {
                if !self.finalized {
                    return Err(Error::BnNotFinalized);
                }
                (self.mean.clone(), self.var.clone(), 0.0)
            }
        };
        let inv_std = var.mapv(|v| 1.0 / (v + self.epsilon).sqrt());
        let mut xhat = Array3::zeros((batch, height, channels));
        let mut y = Array3::zeros((batch, height, channels));
        for b in 0..batch {
            for h in 0..height {
                for c in 0..channels {
                    let g = self.group_of(c);
                    let xh = (x[[b, h, c]] - mean[[h, g]]) * inv_std[[h, g]];
                    xhat[[b, h, c]] = xh;
                    y[[b, h, c]] = self.gamma[[h, g]] * xh + self.beta[[h, g]];
                }
            }
        }
        Ok((
            y,
            LayerCache::Bn {
                xhat,
                inv_std,
                n_reduce,
            },
        ))
    }

    fn backward(&mut self, cache: &LayerCache, grad_out: &Array3<f64>) -> Result<Array3<f64>> {
        let (xhat, inv_std, n_reduce) = match cache {
            LayerCache::Bn {
                xhat,
                inv_std,
                n_reduce,
            } => (xhat, inv_std, *n_reduce),
            _ => return Err(Error::ShapeMismatch("cache/layer kind mismatch".into())),
        };
        let (batch, height, channels) = xhat.dim();
        let groups = self.gamma.ncols();
        let mut sum_g = Array2::zeros((height, groups));
        let mut sum_gx = Array2::zeros((height, groups));
        for b in 0..batch {
            for h in 0..height {
                for c in 0..channels {
                    let g = self.group_of(c);
                    sum_g[[h, g]] += grad_out[[b, h, c]];
                    sum_gx[[h, g]] += grad_out[[b, h, c]] * xhat[[b, h, c]];
                }
            }
        }
        self.grad_gamma += &sum_gx;
        self.grad_beta += &sum_g;
        let mut dx = Array3::zeros((batch, height, channels));
        if n_reduce == 0.0 {
            // Eval phase: statistics are constants, the map is affine.
            for b in 0..batch {
                for h in 0..height {
                    for c in 0..channels {
                        let g = self.group_of(c);
                        dx[[b, h, c]] = grad_out[[b, h, c]] * self.gamma[[h, g]] * inv_std[[h, g]];
                    }
                }
            }
            return Ok(dx);
        }
        for b in 0..batch {
            for h in 0..height {
                for c in 0..channels {
                    let g = self.group_of(c);
                    let dxhat = grad_out[[b, h, c]];
                    dx[[b, h, c]] = self.gamma[[h, g]] * inv_std[[h, g]] / n_reduce
                        * (n_reduce * dxhat - sum_g[[h, g]] - xhat[[b, h, c]] * sum_gx[[h, g]]);
                }
            }
        }
        Ok(dx)
    }
}

impl Layer {
    pub fn forward(&mut self, x: &Array3<f64>, phase: Phase) -> Result<(Array3<f64>, LayerCache)> {
        match self {
            Layer::Fc(l) => l.forward(x),
            Layer::Conv(l) => l.forward(x),
            Layer::Bn(l) => l.forward(x, phase),
        }
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. input.
    pub fn backward(&mut self, cache: &LayerCache, grad_out: &Array3<f64>) -> Result<Array3<f64>> {
        match self {
            Layer::Fc(l) => l.backward(cache, grad_out),
            Layer::Conv(l) => l.backward(cache, grad_out),
            Layer::Bn(l) => l.backward(cache, grad_out),
        }
    }

    pub fn zero_grads(&mut self) {
        match self {
            Layer::Fc(l) => {
                l.grad_w.fill(0.0);
                l.grad_b.fill(0.0);
            }
            Layer::Conv(l) => {
                l.grad_w.fill(0.0);
                l.grad_b.fill(0.0);
            }
            Layer::Bn(l) => {
                l.grad_gamma.fill(0.0);
                l.grad_beta.fill(0.0);
            }
        }
    }
}

fn apply_activation_2d(z: &mut Array2<f64>, activation: Activation) -> Option<Array2<f64>> {
    match activation {
        Activation::Linear => None,
        Activation::Relu => {
            let mask = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            z.zip_mut_with(&mask, |v, m| *v *= m);
            Some(mask)
        }
    }
}

fn apply_activation_3d(z: &mut Array3<f64>, activation: Activation) -> Option<Array3<f64>> {
    match activation {
        Activation::Linear => None,
        Activation::Relu => {
            let mask = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            z.zip_mut_with(&mask, |v, m| *v *= m);
            Some(mask)
        }
    }
}
