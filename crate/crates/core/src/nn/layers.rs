//! Layer kernels: forward passes, cached reverse passes, and initialisation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A trainable tensor together with its most recent gradient.
#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// Declarative description of one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d { filters: usize, kernel: usize },
    Maxpool2x2,
    Batchnorm,
    Relu,
    Dropout { rate: f64 },
    Softmax,
    Flatten,
    Dense { units: usize },
}

impl LayerSpec {
    pub fn conv3x3(filters: usize) -> Self {
        LayerSpec::Conv2d { filters, kernel: 3 }
    }
}

/// He-style uniform initialisation, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
pub fn he_uniform<T: Scalar, R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor<T> {
    let limit = (6.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| T::lit(rng.gen_range(-limit..limit)))
}

struct Nhwc {
    n: usize,
    h: usize,
    w: usize,
    c: usize,
}

fn nhwc<T: Scalar>(op: &'static str, x: &Tensor<T>) -> Result<Nhwc> {
    match *x.shape() {
        [h, w, c] => Ok(Nhwc { n: 1, h, w, c }),
        [n, h, w, c] => Ok(Nhwc { n, h, w, c }),
        _ => Err(Error::shape(op, format!("expected H×W×C or N×H×W×C, got {:?}", x.shape()))),
    }
}

/// Unfolds `k×k` same-padded patches into rows of length `k*k*c`
/// ordered `(ky, kx, channel)`.
fn im2col<T: Scalar>(x: &[T], g: &Nhwc, k: usize) -> Vec<T> {
    let pad = k / 2;
    let row = k * k * g.c;
    let mut cols = vec![T::zero(); g.n * g.h * g.w * row];
    for b in 0..g.n {
        for y in 0..g.h {
            for xx in 0..g.w {
                let out_row = ((b * g.h + y) * g.w + xx) * row;
                for ky in 0..k {
                    let iy = y + ky;
                    if iy < pad || iy - pad >= g.h {
                        continue;
                    }
                    let iy = iy - pad;
                    for kx in 0..k {
                        let ix = xx + kx;
                        if ix < pad || ix - pad >= g.w {
                            continue;
                        }
                        let ix = ix - pad;
                        let src = ((b * g.h + iy) * g.w + ix) * g.c;
                        let dst = out_row + (ky * k + kx) * g.c;
                        cols[dst..dst + g.c].copy_from_slice(&x[src..src + g.c]);
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(cols: &[T], g: &Nhwc, k: usize) -> Vec<T> {
    let pad = k / 2;
    let row = k * k * g.c;
    let mut x = vec![T::zero(); g.n * g.h * g.w * g.c];
    for b in 0..g.n {
        for y in 0..g.h {
            for xx in 0..g.w {
                let in_row = ((b * g.h + y) * g.w + xx) * row;
                for ky in 0..k {
                    let iy = y + ky;
                    if iy < pad || iy - pad >= g.h {
                        continue;
                    }
                    let iy = iy - pad;
                    for kx in 0..k {
                        let ix = xx + kx;
                        if ix < pad || ix - pad >= g.w {
                            continue;
                        }
                        let ix = ix - pad;
                        let dst = ((b * g.h + iy) * g.w + ix) * g.c;
                        let src = in_row + (ky * k + kx) * g.c;
                        for ch in 0..g.c {
                            x[dst + ch] += cols[src + ch];
                        }
                    }
                }
            }
        }
    }
    x
}

fn check_conv_shapes<T: Scalar>(x: &Tensor<T>, kernels: &Tensor<T>, bias: &Tensor<T>) -> Result<(Nhwc, usize, usize)> {
    let g = nhwc("conv2d", x)?;
    let [kh, kw, cin, cout] = *kernels.shape() else {
        return Err(Error::shape("conv2d", format!("kernel must be k×k×Cin×Cout, got {:?}", kernels.shape())));
    };
    if kh != kw || kh % 2 == 0 {
        return Err(Error::shape("conv2d", format!("kernel must be square and odd, got {kh}×{kw}")));
    }
    if cin != g.c {
        return Err(Error::shape(
            "conv2d",
            format!("input has {} channels but kernel expects Cin = {cin}", g.c),
        ));
    }
    if bias.shape() != [cout] {
        return Err(Error::shape("conv2d", format!("bias shape {:?} != [{cout}]", bias.shape())));
    }
    if g.h < kh || g.w < kw {
        return Err(Error::shape(
            "conv2d",
            format!("spatial extent {}×{} smaller than kernel {kh}×{kw}", g.h, g.w),
        ));
    }
    Ok((g, kh, cout))
}

fn conv_from_cols<T: Scalar>(cols: &[T], g: &Nhwc, k: usize, cout: usize, kernels: &Tensor<T>, bias: &Tensor<T>) -> Vec<T> {
    let m = g.n * g.h * g.w;
    let kk = k * k * g.c;
    let mut out = Vec::with_capacity(m * cout);
    for _ in 0..m {
        out.extend_from_slice(bias.data());
    }
    T::gemm(m, kk, cout, T::one(), cols, (kk, 1), kernels.data(), (cout, 1), T::one(), &mut out, (cout, 1));
    out
}

fn out_shape(input: &Tensor<impl Scalar>, h: usize, w: usize, c: usize) -> Vec<usize> {
    if input.rank() == 3 {
        vec![h, w, c]
    } else {
        vec![input.batch(), h, w, c]
    }
}

/// Same-padded 2-D cross-correlation. Accepts `H×W×Cin` or `N×H×W×Cin`
/// input and `k×k×Cin×Cout` kernels.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, kernels: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (g, k, cout) = check_conv_shapes(input, kernels, bias)?;
    let cols = im2col(input.data(), &g, k);
    let out = conv_from_cols(&cols, &g, k, cout, kernels, bias);
    Tensor::new(out_shape(input, g.h, g.w, cout), out)
}

/// Disjoint 2×2 max pooling. Returns the pooled tensor and, for every
/// output cell, the flat input index of the selected element. Ties go to
/// the first element in row-major window order.
pub fn maxpool2x2<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let g = nhwc("maxpool2x2", input)?;
    if g.h < 2 || g.w < 2 {
        return Err(Error::shape("maxpool2x2", format!("spatial extent {}×{} below 2×2", g.h, g.w)));
    }
    let (oh, ow) = (g.h / 2, g.w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(g.n * oh * ow * g.c);
    let mut idx = Vec::with_capacity(out.capacity());
    for b in 0..g.n {
        for y in 0..oh {
            for xx in 0..ow {
                for ch in 0..g.c {
                    let mut best = ((b * g.h + 2 * y) * g.w + 2 * xx) * g.c + ch;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let j = ((b * g.h + 2 * y + dy) * g.w + 2 * xx + dx) * g.c + ch;
                        if x[j] > x[best] {
                            best = j;
                        }
                    }
                    out.push(x[best]);
                    idx.push(best);
                }
            }
        }
    }
    Ok((Tensor::new(out_shape(input, oh, ow, g.c), out)?, idx))
}

/// Numerically stable softmax of one logit vector.
pub fn softmax<T: Scalar>(logits: &[T]) -> Result<Vec<T>> {
    if logits.is_empty() {
        return Err(Error::InvalidArgument("softmax of empty vector".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax logits"));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = out.iter().copied().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    Ok(out)
}

/// Row-wise softmax over an `N×K` tensor.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, k] = *logits.shape() else {
        return Err(Error::shape("softmax", format!("expected N×K logits, got {:?}", logits.shape())));
    };
    let mut out = Vec::with_capacity(n * k);
    for row in logits.data().chunks(k) {
        out.extend(softmax(row)?);
    }
    Tensor::new(vec![n, k], out)
}

/// Reverse pass of row-wise softmax given its output probabilities.
pub fn softmax_backward<T: Scalar>(probs: &Tensor<T>, grad: &Tensor<T>) -> Result<Tensor<T>> {
    if !probs.same_shape(grad) || probs.rank() != 2 {
        return Err(Error::shape("softmax_backward", format!("{:?} vs {:?}", probs.shape(), grad.shape())));
    }
    let k = probs.shape()[1];
    let mut out = Vec::with_capacity(probs.len());
    for (p, g) in probs.data().chunks(k).zip(grad.data().chunks(k)) {
        let dot: T = p.iter().zip(g).map(|(&a, &b)| a * b).sum();
        out.extend(p.iter().zip(g).map(|(&a, &b)| a * (b - dot)));
    }
    Tensor::new(probs.shape().to_vec(), out)
}

pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    kernel: usize,
    cache: Option<(Vec<usize>, Vec<T>)>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, in_channels: usize, filters: usize, kernel: usize, rng: &mut R) -> Self {
        let fan_in = kernel * kernel * in_channels;
        Conv2d {
            weight: Param::new(
                format!("{name}.weight"),
                he_uniform(&[kernel, kernel, in_channels, filters], fan_in, rng),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[filters])),
            kernel,
            cache: None,
        }
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d_forward(x, &self.weight.value, &self.bias.value)
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (g, k, cout) = check_conv_shapes(x, &self.weight.value, &self.bias.value)?;
        let cols = im2col(x.data(), &g, k);
        let out = conv_from_cols(&cols, &g, k, cout, &self.weight.value, &self.bias.value);
        self.cache = Some((x.shape().to_vec(), cols));
        Tensor::new(out_shape(x, g.h, g.w, cout), out)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let (in_shape, cols) = self.cache.as_ref().ok_or(Error::NoForwardCache("conv2d"))?;
        let x_stub = Tensor::<T>::zeros(in_shape);
        let g = nhwc("conv2d_backward", &x_stub)?;
        let k = self.kernel;
        let cout = self.bias.value.len();
        let m = g.n * g.h * g.w;
        let kk = k * k * g.c;
        if grad.len() != m * cout {
            return Err(Error::shape("conv2d_backward", format!("gradient {:?} vs {m}×{cout}", grad.shape())));
        }
        let gd = grad.data();
        T::gemm(kk, m, cout, T::one(), cols, (1, kk), gd, (cout, 1), T::zero(), self.weight.grad.data_mut(), (cout, 1));
        let bg = self.bias.grad.data_mut();
        bg.fill(T::zero());
        for row in gd.chunks(cout) {
            for (b, &v) in bg.iter_mut().zip(row) {
                *b += v;
            }
        }
        let mut dcols = vec![T::zero(); m * kk];
        T::gemm(m, cout, kk, T::one(), gd, (cout, 1), self.weight.value.data(), (1, cout), T::zero(), &mut dcols, (kk, 1));
        Tensor::new(in_shape.clone(), col2im(&dcols, &g, k))
    }
}

#[derive(Default)]
pub struct MaxPool2x2 {
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2x2 {
    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (out, idx) = maxpool2x2(x)?;
        self.cache = Some((x.shape().to_vec(), idx));
        Ok(out)
    }

    pub fn backward<T: Scalar>(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let (in_shape, idx) = self.cache.as_ref().ok_or(Error::NoForwardCache("maxpool2x2"))?;
        if grad.len() != idx.len() {
            return Err(Error::shape("maxpool2x2_backward", format!("{} vs {}", grad.len(), idx.len())));
        }
        let mut dx = Tensor::zeros(in_shape);
        let d = dx.data_mut();
        for (&i, &g) in idx.iter().zip(grad.data()) {
            d[i] += g;
        }
        Ok(dx)
    }
}

struct BnCache<T> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

/// Batch normalisation over the trailing (feature/channel) axis.
pub struct BatchNorm<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: T,
    pub eps: T,
    cache: Option<BnCache<T>>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(name: &str, features: usize) -> Self {
        BatchNorm {
            gamma: Param::new(format!("{name}.gamma"), Tensor::full(&[features], T::one())),
            beta: Param::new(format!("{name}.beta"), Tensor::zeros(&[features])),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::full(&[features], T::one()),
            momentum: T::lit(BN_MOMENTUM),
            eps: T::lit(BN_EPS),
            cache: None,
        }
    }

    fn features(&self) -> usize {
        self.gamma.value.len()
    }

    fn check(&self, x: &Tensor<T>) -> Result<usize> {
        let f = self.features();
        if x.shape().last() != Some(&f) {
            return Err(Error::shape("batchnorm", format!("input {:?} has no trailing axis of {f}", x.shape())));
        }
        Ok(f)
    }

    fn normalize_with(&self, x: &Tensor<T>, mean: &[T], inv_std: &[T]) -> (Vec<T>, Vec<T>) {
        let f = self.features();
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        let mut xhat = Vec::with_capacity(x.len());
        let mut y = Vec::with_capacity(x.len());
        for row in x.data().chunks(f) {
            for j in 0..f {
                let h = (row[j] - mean[j]) * inv_std[j];
                xhat.push(h);
                y.push(gamma[j] * h + beta[j]);
            }
        }
        (xhat, y)
    }

    fn running_inv_std(&self) -> Vec<T> {
        self.running_var.data().iter().map(|&v| T::one() / (v + self.eps).sqrt()).collect()
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(x)?;
        let (_, y) = self.normalize_with(x, self.running_mean.data(), &self.running_inv_std());
        Tensor::new(x.shape().to_vec(), y)
    }

    /// Train mode normalises with batch statistics and updates the running
    /// statistics; infer mode uses the running statistics.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let f = self.check(x)?;
        if mode == Mode::Infer {
            let inv_std = self.running_inv_std();
            let (xhat, y) = self.normalize_with(x, self.running_mean.data(), &inv_std);
            self.cache = Some(BnCache { xhat, inv_std, mode });
            return Tensor::new(x.shape().to_vec(), y);
        }
        if x.batch() < 2 {
            return Err(Error::InvalidArgument(
                "batch norm in train mode needs a batch of at least 2".into(),
            ));
        }
        let m = x.len() / f;
        let mf = T::from_count(m);
        let mut mean = vec![T::zero(); f];
        for row in x.data().chunks(f) {
            for (acc, &v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= mf);
        let mut var = vec![T::zero(); f];
        for row in x.data().chunks(f) {
            for j in 0..f {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= mf);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + self.eps).sqrt()).collect();
        let (xhat, y) = self.normalize_with(x, &mean, &inv_std);

        let mom = self.momentum;
        for (r, &b) in self.running_mean.data_mut().iter_mut().zip(&mean) {
            *r = mom * *r + (T::one() - mom) * b;
        }
        for (r, &b) in self.running_var.data_mut().iter_mut().zip(&var) {
            *r = mom * *r + (T::one() - mom) * b;
        }
        self.cache = Some(BnCache { xhat, inv_std, mode });
        Tensor::new(x.shape().to_vec(), y)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let f = self.features();
        let cache = self.cache.as_ref().ok_or(Error::NoForwardCache("batchnorm"))?;
        if grad.len() != cache.xhat.len() {
            return Err(Error::shape("batchnorm_backward", format!("{} vs {}", grad.len(), cache.xhat.len())));
        }
        let m = grad.len() / f;
        let gamma = self.gamma.value.data();
        let mut dgamma = vec![T::zero(); f];
        let mut dbeta = vec![T::zero(); f];
        for (g, h) in grad.data().chunks(f).zip(cache.xhat.chunks(f)) {
            for j in 0..f {
                dgamma[j] += g[j] * h[j];
                dbeta[j] += g[j];
            }
        }
        let mut dx = Vec::with_capacity(grad.len());
        match cache.mode {
            Mode::Infer => {
                for g in grad.data().chunks(f) {
                    for j in 0..f {
                        dx.push(g[j] * gamma[j] * cache.inv_std[j]);
                    }
                }
            }
            Mode::Train => {
                // dxhat = g·γ; Σdxhat = γ·dβ; Σdxhat·xhat = γ·dγ.
                let mf = T::from_count(m);
                for (g, h) in grad.data().chunks(f).zip(cache.xhat.chunks(f)) {
                    for j in 0..f {
                        let dxhat = g[j] * gamma[j];
                        let v = (mf * dxhat - gamma[j] * dbeta[j] - h[j] * gamma[j] * dgamma[j]) * cache.inv_std[j] / mf;
                        dx.push(v);
                    }
                }
            }
        }
        self.gamma.grad.data_mut().copy_from_slice(&dgamma);
        self.beta.grad.data_mut().copy_from_slice(&dbeta);
        Tensor::new(grad.shape().to_vec(), dx)
    }
}

#[derive(Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let data = x.data().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
    Tensor::new(x.shape().to_vec(), data).expect("shape preserved")
}

impl Relu {
    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Tensor<T> {
        self.mask = Some(x.data().iter().map(|&v| v > T::zero()).collect());
        relu(x)
    }

    pub fn backward<T: Scalar>(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let mask = self.mask.as_ref().ok_or(Error::NoForwardCache("relu"))?;
        if mask.len() != grad.len() {
            return Err(Error::shape("relu_backward", format!("{} vs {}", grad.len(), mask.len())));
        }
        let data = grad.data().iter().zip(mask).map(|(&g, &m)| if m { g } else { T::zero() }).collect();
        Tensor::new(grad.shape().to_vec(), data)
    }
}

enum DropCache<T> {
    Identity,
    Mask(Vec<T>),
}

/// Inverted dropout: survivors are scaled by `1/(1-p)` in train mode.
pub struct Dropout<T> {
    rate: f64,
    cache: Option<DropCache<T>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Dropout { rate, cache: None })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Tensor<T> {
        if mode == Mode::Infer || self.rate == 0.0 {
            self.cache = Some(DropCache::Identity);
            return x.clone();
        }
        let scale = T::lit(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = (0..x.len())
            .map(|_| if rng.gen::<f64>() < self.rate { T::zero() } else { scale })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        self.cache = Some(DropCache::Mask(mask));
        Tensor::new(x.shape().to_vec(), data).expect("shape preserved")
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        match self.cache.as_ref().ok_or(Error::NoForwardCache("dropout"))? {
            DropCache::Identity => Ok(grad.clone()),
            DropCache::Mask(mask) => {
                if mask.len() != grad.len() {
                    return Err(Error::shape("dropout_backward", format!("{} vs {}", grad.len(), mask.len())));
                }
                let data = grad.data().iter().zip(mask).map(|(&g, &m)| g * m).collect();
                Tensor::new(grad.shape().to_vec(), data)
            }
        }
    }
}

#[derive(Default)]
pub struct Flatten {
    in_shape: Option<Vec<usize>>,
}

pub fn flatten<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let n = x.batch();
    x.clone().reshape(&[n, x.len() / n])
}

impl Flatten {
    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.in_shape = Some(x.shape().to_vec());
        flatten(x)
    }

    pub fn backward<T: Scalar>(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.in_shape.as_ref().ok_or(Error::NoForwardCache("flatten"))?;
        grad.clone().reshape(shape)
    }
}

/// Fully connected layer, weight stored `in × out`.
pub struct Dense<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    cache: Option<Tensor<T>>,
}

pub fn dense_forward<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, fin] = *x.shape() else {
        return Err(Error::shape("dense", format!("expected N×F input, got {:?}", x.shape())));
    };
    let [win, out] = *weight.shape() else {
        return Err(Error::shape("dense", format!("weight must be in×out, got {:?}", weight.shape())));
    };
    if win != fin || bias.shape() != [out] {
        return Err(Error::shape(
            "dense",
            format!("input {:?}, weight {:?}, bias {:?}", x.shape(), weight.shape(), bias.shape()),
        ));
    }
    let mut y = Vec::with_capacity(n * out);
    for _ in 0..n {
        y.extend_from_slice(bias.data());
    }
    T::gemm(n, fin, out, T::one(), x.data(), (fin, 1), weight.data(), (out, 1), T::one(), &mut y, (out, 1));
    Tensor::new(vec![n, out], y)
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: usize, units: usize, rng: &mut R) -> Self {
        Dense {
            weight: Param::new(format!("{name}.weight"), he_uniform(&[inputs, units], inputs, rng)),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[units])),
            cache: None,
        }
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        dense_forward(x, &self.weight.value, &self.bias.value)
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.as_ref().ok_or(Error::NoForwardCache("dense"))?;
        let (n, fin) = (x.shape()[0], x.shape()[1]);
        let out = self.bias.value.len();
        if grad.shape() != [n, out] {
            return Err(Error::shape("dense_backward", format!("gradient {:?} vs [{n}, {out}]", grad.shape())));
        }
        let g = grad.data();
        T::gemm(fin, n, out, T::one(), x.data(), (1, fin), g, (out, 1), T::zero(), self.weight.grad.data_mut(), (out, 1));
        let bg = self.bias.grad.data_mut();
        bg.fill(T::zero());
        for row in g.chunks(out) {
            for (b, &v) in bg.iter_mut().zip(row) {
                *b += v;
            }
        }
        let mut dx = vec![T::zero(); n * fin];
        T::gemm(n, out, fin, T::one(), g, (out, 1), self.weight.value.data(), (1, out), T::zero(), &mut dx, (fin, 1));
        Tensor::new(vec![n, fin], dx)
    }
}
