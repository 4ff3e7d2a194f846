use rand::Rng;

use super::layers::{BatchNorm, Conv2d, Dense, Dropout, Flatten, LayerSpec, MaxPool2x2, Mode, Param, Relu};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub enum Layer<T> {
    Conv2d(Conv2d<T>),
    MaxPool(MaxPool2x2),
    BatchNorm(BatchNorm<T>),
    Relu(Relu),
    Dropout(Dropout<T>),
    Flatten(Flatten),
    Dense(Dense<T>),
}

/// Per-sample activation shape tracked while stacking layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureShape {
    Spatial { h: usize, w: usize, c: usize },
    Flat(usize),
}

impl FeatureShape {
    pub fn numel(&self) -> usize {
        match *self {
            FeatureShape::Spatial { h, w, c } => h * w * c,
            FeatureShape::Flat(f) => f,
        }
    }

    fn batched(&self, n: usize) -> Vec<usize> {
        match *self {
            FeatureShape::Spatial { h, w, c } => vec![n, h, w, c],
            FeatureShape::Flat(f) => vec![n, f],
        }
    }
}

impl<T: Scalar> Layer<T> {
    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>> {
        match self {
            Layer::Conv2d(l) => l.forward(x),
            Layer::MaxPool(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Relu(l) => Ok(l.forward(x)),
            Layer::Dropout(l) => Ok(l.forward(x, mode, rng)),
            Layer::Flatten(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x),
        }
    }

    /// Inference-mode forward pass that touches no cached state.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv2d(l) => l.infer(x),
            Layer::MaxPool(_) => super::layers::maxpool2x2(x).map(|(y, _)| y),
            Layer::BatchNorm(l) => l.infer(x),
            Layer::Relu(_) => Ok(super::layers::relu(x)),
            Layer::Dropout(_) => Ok(x.clone()),
            Layer::Flatten(_) => super::layers::flatten(x),
            Layer::Dense(l) => l.infer(x),
        }
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv2d(l) => l.backward(grad),
            Layer::MaxPool(l) => l.backward(grad),
            Layer::BatchNorm(l) => l.backward(grad),
            Layer::Relu(l) => l.backward(grad),
            Layer::Dropout(l) => l.backward(grad),
            Layer::Flatten(l) => l.backward(grad),
            Layer::Dense(l) => l.backward(grad),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Layer::Conv2d(l) => vec![&mut l.weight, &mut l.bias],
            Layer::BatchNorm(l) => vec![&mut l.gamma, &mut l.beta],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        match self {
            Layer::Conv2d(l) => vec![&l.weight, &l.bias],
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta],
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            _ => Vec::new(),
        }
    }

    /// Every persisted tensor (parameters and running statistics) by name.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out: Vec<(String, &Tensor<T>)> = self.params().into_iter().map(|p| (p.name.clone(), &p.value)).collect();
        if let Layer::BatchNorm(l) = self {
            let base = l.gamma.name.trim_end_matches(".gamma");
            out.push((format!("{base}.running_mean"), &l.running_mean));
            out.push((format!("{base}.running_var"), &l.running_var));
        }
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        match self {
            Layer::Conv2d(l) => vec![
                (l.weight.name.clone(), &mut l.weight.value),
                (l.bias.name.clone(), &mut l.bias.value),
            ],
            Layer::Dense(l) => vec![
                (l.weight.name.clone(), &mut l.weight.value),
                (l.bias.name.clone(), &mut l.bias.value),
            ],
            Layer::BatchNorm(l) => {
                let base = l.gamma.name.trim_end_matches(".gamma").to_string();
                vec![
                    (l.gamma.name.clone(), &mut l.gamma.value),
                    (l.beta.name.clone(), &mut l.beta.value),
                    (format!("{base}.running_mean"), &mut l.running_mean),
                    (format!("{base}.running_var"), &mut l.running_var),
                ]
            }
            _ => Vec::new(),
        }
    }
}

/// A linear stack of layers with a fixed per-sample input shape.
pub struct Sequential<T> {
    layers: Vec<Layer<T>>,
    input: FeatureShape,
    output: FeatureShape,
}

impl<T: Scalar> Sequential<T> {
    /// Instantiates `specs` on top of `input`, naming parameters
    /// `{prefix}.{kind}{index}.{tensor}`.
    pub fn build<R: Rng + ?Sized>(prefix: &str, input: FeatureShape, specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        let mut shape = input;
        for (i, spec) in specs.iter().enumerate() {
            let layer = match (spec, shape) {
                (&LayerSpec::Conv2d { filters, kernel }, FeatureShape::Spatial { h, w, c }) => {
                    if filters == 0 || kernel % 2 == 0 || h < kernel || w < kernel {
                        return Err(Error::InvalidArgument(format!(
                            "{prefix}: conv{i} ({filters} filters, {kernel}×{kernel}) on {h}×{w} input"
                        )));
                    }
                    shape = FeatureShape::Spatial { h, w, c: filters };
                    Layer::Conv2d(Conv2d::new(&format!("{prefix}.conv{i}"), c, filters, kernel, rng))
                }
                (LayerSpec::Maxpool2x2, FeatureShape::Spatial { h, w, c }) => {
                    if h < 2 || w < 2 {
                        return Err(Error::InvalidArgument(format!(
                            "{prefix}: pool{i} would reduce {h}×{w} to an empty extent"
                        )));
                    }
                    shape = FeatureShape::Spatial { h: h / 2, w: w / 2, c };
                    Layer::MaxPool(MaxPool2x2::default())
                }
                (LayerSpec::Batchnorm, s) => {
                    let f = match s {
                        FeatureShape::Spatial { c, .. } => c,
                        FeatureShape::Flat(f) => f,
                    };
                    Layer::BatchNorm(BatchNorm::new(&format!("{prefix}.bn{i}"), f))
                }
                (LayerSpec::Relu, _) => Layer::Relu(Relu::default()),
                (&LayerSpec::Dropout { rate }, _) => Layer::Dropout(Dropout::new(rate)?),
                (LayerSpec::Flatten, s) => {
                    shape = FeatureShape::Flat(s.numel());
                    Layer::Flatten(Flatten::default())
                }
                (&LayerSpec::Dense { units }, FeatureShape::Flat(f)) => {
                    if units == 0 {
                        return Err(Error::InvalidArgument(format!("{prefix}: dense{i} with zero units")));
                    }
                    shape = FeatureShape::Flat(units);
                    Layer::Dense(Dense::new(&format!("{prefix}.dense{i}"), f, units, rng))
                }
                (spec, s) => {
                    return Err(Error::InvalidArgument(format!(
                        "{prefix}: layer {i} {spec:?} cannot follow activation shape {s:?}"
                    )))
                }
            };
            layers.push(layer);
        }
        Ok(Sequential {
            layers,
            input,
            output: shape,
        })
    }

    pub fn input_shape(&self) -> FeatureShape {
        self.input
    }

    pub fn output_shape(&self) -> FeatureShape {
        self.output
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let want = self.input.batched(x.shape().first().copied().unwrap_or(0));
        if x.shape() != want.as_slice() {
            return Err(Error::shape("sequential", format!("input {:?}, expected {want:?}", x.shape())));
        }
        Ok(())
    }

    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h, mode, rng)?;
        }
        Ok(h)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        self.layers.iter().flat_map(|l| l.named_tensors()).collect()
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        self.layers.iter_mut().flat_map(|l| l.named_tensors_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}
