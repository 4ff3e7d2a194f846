//! Hard-parameter-sharing two-head classifier: a shared convolutional
//! trunk feeding a modulation branch and a signal-class branch.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{IMAGE_SIDE, VECTOR_LEN};
use crate::error::{Error, Result};
use crate::nn::{
    softmax_cross_entropy_grad, softmax_rows, Checkpoint, FeatureShape, Layer, LayerSpec, Mode, Param, Sequential, Tensor,
};
use crate::scalar::Scalar;
use crate::signal::{Modulation, SignalClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "base")]
    Base,
    /// Two conv + pool blocks in the shared trunk.
    #[serde(rename = "C2-sh")]
    C2Sh,
    /// `C2Sh` plus a second conv block in each branch.
    #[serde(rename = "C2-sh-tasks")]
    C2ShTasks,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::C2Sh => "C2-sh",
            Variant::C2ShTasks => "C2-sh-tasks",
        }
    }

    fn shared_blocks(self) -> usize {
        match self {
            Variant::Base => 1,
            Variant::C2Sh | Variant::C2ShTasks => 2,
        }
    }

    fn branch_blocks(self) -> usize {
        match self {
            Variant::Base | Variant::C2Sh => 1,
            Variant::C2ShTasks => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn d_c_sh() -> usize {
    8
}
fn d_c_b() -> usize {
    4
}
fn d_f_b() -> usize {
    256
}
fn d_variant() -> Variant {
    Variant::Base
}
fn d_n_mod() -> usize {
    Modulation::COUNT
}
fn d_n_sig() -> usize {
    SignalClass::COUNT
}
fn d_conv_dropout() -> f64 {
    0.25
}
fn d_fc_dropout() -> f64 {
    0.5
}
fn d_kernel() -> usize {
    3
}

/// Architecture descriptor `(c_sh, c_m, f_m, c_s, f_s)` plus variant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "d_c_sh")]
    pub c_sh: usize,
    #[serde(default = "d_c_b")]
    pub c_m: usize,
    #[serde(default = "d_f_b")]
    pub f_m: usize,
    #[serde(default = "d_c_b")]
    pub c_s: usize,
    #[serde(default = "d_f_b")]
    pub f_s: usize,
    #[serde(default = "d_variant")]
    pub variant: Variant,
    #[serde(default = "d_n_mod")]
    pub n_mod_classes: usize,
    #[serde(default = "d_n_sig")]
    pub n_sig_classes: usize,
    #[serde(default = "d_conv_dropout")]
    pub conv_dropout: f64,
    #[serde(default = "d_fc_dropout")]
    pub fc_dropout: f64,
    #[serde(default = "d_kernel")]
    pub kernel: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::dense(8, 4, 256, 4, 256)
    }
}

impl ModelConfig {
    pub fn dense(c_sh: usize, c_m: usize, f_m: usize, c_s: usize, f_s: usize) -> Self {
        ModelConfig {
            c_sh,
            c_m,
            f_m,
            c_s,
            f_s,
            variant: Variant::Base,
            n_mod_classes: Modulation::COUNT,
            n_sig_classes: SignalClass::COUNT,
            conv_dropout: d_conv_dropout(),
            fc_dropout: d_fc_dropout(),
            kernel: d_kernel(),
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// Short label such as `(8,4,256,4,256)` or `C2-sh(8,4,256,4,256)`.
    pub fn label(&self) -> String {
        let t = format!("({},{},{},{},{})", self.c_sh, self.c_m, self.f_m, self.c_s, self.f_s);
        match self.variant {
            Variant::Base => t,
            v => format!("{v}{t}"),
        }
    }

    pub fn shared_specs(&self) -> Vec<LayerSpec> {
        let mut v = Vec::new();
        for _ in 0..self.variant.shared_blocks() {
            v.extend([
                LayerSpec::Conv2d {
                    filters: self.c_sh,
                    kernel: self.kernel,
                },
                LayerSpec::Batchnorm,
                LayerSpec::Relu,
                LayerSpec::Dropout { rate: self.conv_dropout },
                LayerSpec::Maxpool2x2,
            ]);
        }
        v
    }

    pub fn branch_specs(&self, filters: usize, units: usize, classes: usize) -> Vec<LayerSpec> {
        let mut v = Vec::new();
        for _ in 0..self.variant.branch_blocks() {
            v.extend([
                LayerSpec::Conv2d {
                    filters,
                    kernel: self.kernel,
                },
                LayerSpec::Batchnorm,
                LayerSpec::Relu,
                LayerSpec::Dropout { rate: self.conv_dropout },
            ]);
        }
        v.extend([
            LayerSpec::Flatten,
            LayerSpec::Dense { units },
            LayerSpec::Batchnorm,
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: self.fc_dropout },
            LayerSpec::Dense { units: classes },
        ]);
        v
    }

    pub fn validate(&self) -> Result<()> {
        if [self.c_sh, self.c_m, self.f_m, self.c_s, self.f_s, self.n_mod_classes, self.n_sig_classes]
            .contains(&0)
        {
            return Err(Error::Config(format!("model {}: widths and class counts must be positive", self.label())));
        }
        for r in [self.conv_dropout, self.fc_dropout] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("dropout rate {r} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Loss weights `(w_m, w_s)` with `w_m + w_s = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct TaskWeights {
    w_m: f64,
    w_s: f64,
}

#[derive(Deserialize)]
struct RawWeights {
    w_m: f64,
    w_s: f64,
}

impl TryFrom<RawWeights> for TaskWeights {
    type Error = Error;

    fn try_from(r: RawWeights) -> Result<Self> {
        TaskWeights::new(r.w_m, r.w_s)
    }
}

impl Default for TaskWeights {
    fn default() -> Self {
        TaskWeights { w_m: 0.2, w_s: 0.8 }
    }
}

impl TaskWeights {
    pub fn new(w_m: f64, w_s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w_m) || !(0.0..=1.0).contains(&w_s) || (w_m + w_s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "task weights must lie in [0, 1] and sum to 1, got w_m = {w_m}, w_s = {w_s}"
            )));
        }
        Ok(TaskWeights { w_m, w_s })
    }

    /// Weights with the given signal-task share.
    pub fn from_signal_weight(w_s: f64) -> Result<Self> {
        Self::new(1.0 - w_s, w_s)
    }

    pub fn w_m(&self) -> f64 {
        self.w_m
    }

    pub fn w_s(&self) -> f64 {
        self.w_s
    }
}

/// Batch-mean losses of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MtlLoss {
    pub total: f64,
    pub l_m: f64,
    pub l_s: f64,
}

/// `total = w_m·L_m + w_s·L_s`, plus the gradients of `total` with respect
/// to each head's logits.
pub fn mtl_loss<T: Scalar>(
    mod_probs: &Tensor<T>,
    sig_probs: &Tensor<T>,
    mod_labels: &[usize],
    sig_labels: &[usize],
    w: TaskWeights,
) -> Result<(MtlLoss, Tensor<T>, Tensor<T>)> {
    let (l_m, g_m) = softmax_cross_entropy_grad(mod_probs, mod_labels, T::lit(w.w_m))?;
    let (l_s, g_s) = softmax_cross_entropy_grad(sig_probs, sig_labels, T::lit(w.w_s))?;
    let (l_m, l_s) = (l_m.as_f64(), l_s.as_f64());
    Ok((
        MtlLoss {
            total: w.w_m * l_m + w.w_s * l_s,
            l_m,
            l_s,
        },
        g_m,
        g_s,
    ))
}

/// Which parameter block a tensor belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Shared,
    Modulation,
    Signal,
}

impl ParamGroup {
    pub fn prefix(self) -> &'static str {
        match self {
            ParamGroup::Shared => "shared",
            ParamGroup::Modulation => "mod",
            ParamGroup::Signal => "sig",
        }
    }

    pub fn of(name: &str) -> Option<ParamGroup> {
        [ParamGroup::Shared, ParamGroup::Modulation, ParamGroup::Signal]
            .into_iter()
            .find(|g| name.strip_prefix(g.prefix()).is_some_and(|rest| rest.starts_with('.')))
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    model: ModelConfig,
}

pub struct MtlModel<T> {
    config: ModelConfig,
    shared: Sequential<T>,
    mod_branch: Sequential<T>,
    sig_branch: Sequential<T>,
}

pub fn input_shape() -> FeatureShape {
    FeatureShape::Spatial {
        h: IMAGE_SIDE,
        w: IMAGE_SIDE,
        c: 1,
    }
}

/// Packs `n` vectorized frames (row-major 256 values each) into an
/// `n×16×16×1` batch.
pub fn image_batch<T: Scalar>(values: &[f32]) -> Result<Tensor<T>> {
    if values.is_empty() || values.len() % VECTOR_LEN != 0 {
        return Err(Error::shape("image_batch", format!("{} values is not a whole number of frames", values.len())));
    }
    let n = values.len() / VECTOR_LEN;
    Tensor::new(
        vec![n, IMAGE_SIDE, IMAGE_SIDE, 1],
        values.iter().map(|&v| T::lit(v as f64)).collect(),
    )
}

impl<T: Scalar> MtlModel<T> {
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shared = Sequential::build("shared", input_shape(), &config.shared_specs(), &mut rng)?;
        let trunk = shared.output_shape();
        let mod_branch = Sequential::build(
            "mod",
            trunk,
            &config.branch_specs(config.c_m, config.f_m, config.n_mod_classes),
            &mut rng,
        )?;
        let sig_branch = Sequential::build(
            "sig",
            trunk,
            &config.branch_specs(config.c_s, config.f_s, config.n_sig_classes),
            &mut rng,
        )?;
        Ok(MtlModel {
            config,
            shared,
            mod_branch,
            sig_branch,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn shared_output_shape(&self) -> FeatureShape {
        self.shared.output_shape()
    }

    /// Width of each branch's flattened feature vector.
    pub fn flatten_sizes(&self) -> (usize, usize) {
        let flat = |s: &Sequential<T>| {
            s.layers()
                .iter()
                .find_map(|l| match l {
                    Layer::Dense(d) => Some(d.weight.value.shape()[0]),
                    _ => None,
                })
                .unwrap_or(0)
        };
        (flat(&self.mod_branch), flat(&self.sig_branch))
    }

    /// Training-mode forward pass returning both heads' probabilities.
    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<(Tensor<T>, Tensor<T>)> {
        let h = self.shared.forward(x, mode, rng)?;
        let m = self.mod_branch.forward(&h, mode, rng)?;
        let s = self.sig_branch.forward(&h, mode, rng)?;
        Ok((softmax_rows(&m)?, softmax_rows(&s)?))
    }

    /// Inference-mode forward pass; a pure function of parameters and input.
    pub fn infer(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let h = self.shared.infer(x)?;
        let m = self.mod_branch.infer(&h)?;
        let s = self.sig_branch.infer(&h)?;
        Ok((softmax_rows(&m)?, softmax_rows(&s)?))
    }

    /// Back-propagates logit gradients of both heads into every parameter
    /// gradient; the trunk receives the sum of both branch gradients.
    pub fn backward(&mut self, d_mod_logits: &Tensor<T>, d_sig_logits: &Tensor<T>) -> Result<()> {
        let gm = self.mod_branch.backward(d_mod_logits)?;
        let gs = self.sig_branch.backward(d_sig_logits)?;
        let mut g = gm;
        if !g.same_shape(&gs) {
            return Err(Error::shape("mtl_backward", format!("{:?} vs {:?}", g.shape(), gs.shape())));
        }
        for (a, b) in g.data_mut().iter_mut().zip(gs.data()) {
            *a += *b;
        }
        self.shared.backward(&g)?;
        Ok(())
    }

    /// Trainable parameters in a fixed order: trunk, modulation, signal.
    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = self.shared.params_mut();
        v.extend(self.mod_branch.params_mut());
        v.extend(self.sig_branch.params_mut());
        v
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        let mut v = self.shared.params();
        v.extend(self.mod_branch.params());
        v.extend(self.sig_branch.params());
        v
    }

    pub fn group_params(&self, group: ParamGroup) -> Vec<&Param<T>> {
        match group {
            ParamGroup::Shared => self.shared.params(),
            ParamGroup::Modulation => self.mod_branch.params(),
            ParamGroup::Signal => self.sig_branch.params(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.shared.param_count() + self.mod_branch.param_count() + self.sig_branch.param_count()
    }

    /// Every tensor that defines the model's behaviour, including batch-norm
    /// running statistics.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = self.shared.named_tensors();
        v.extend(self.mod_branch.named_tensors());
        v.extend(self.sig_branch.named_tensors());
        v
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut v = self.shared.named_tensors_mut();
        v.extend(self.mod_branch.named_tensors_mut());
        v.extend(self.sig_branch.named_tensors_mut());
        v
    }

    /// Owned copy of every named tensor.
    pub fn snapshot(&self) -> Vec<Tensor<T>> {
        self.named_tensors().into_iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor<T>]) -> Result<()> {
        let mut slots = self.named_tensors_mut();
        if slots.len() != snapshot.len() {
            return Err(Error::ArchitectureMismatch(format!(
                "snapshot has {} tensors, model has {}",
                snapshot.len(),
                slots.len()
            )));
        }
        for ((name, dst), src) in slots.iter_mut().zip(snapshot) {
            if !dst.same_shape(src) {
                return Err(Error::ArchitectureMismatch(format!("{name}: {:?} vs {:?}", dst.shape(), src.shape())));
            }
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let meta = serde_json::to_string(&CheckpointMeta { model: self.config })?;
        let mut ck = Checkpoint::new(meta);
        for (name, t) in self.named_tensors() {
            ck.push(name, t);
        }
        Ok(ck)
    }

    /// Copies checkpoint values into this model after checking that the
    /// architecture matches exactly.
    pub fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        let meta: CheckpointMeta = serde_json::from_str(&ck.metadata)
            .map_err(|e| Error::Format(format!("checkpoint metadata: {e}")))?;
        if meta.model != self.config {
            return Err(Error::ArchitectureMismatch(format!(
                "checkpoint holds {} ({:?}), model is {} ({:?})",
                meta.model.label(),
                meta.model,
                self.config.label(),
                self.config
            )));
        }
        let mut slots = self.named_tensors_mut();
        if slots.len() != ck.tensors.len() {
            return Err(Error::ArchitectureMismatch(format!(
                "checkpoint has {} tensors, model has {}",
                ck.tensors.len(),
                slots.len()
            )));
        }
        for ((name, dst), src) in slots.iter_mut().zip(&ck.tensors) {
            if *name != src.name || dst.shape() != src.shape.as_slice() {
                return Err(Error::ArchitectureMismatch(format!(
                    "expected {name} {:?}, checkpoint has {} {:?}",
                    dst.shape(),
                    src.name,
                    src.shape
                )));
            }
            for (d, s) in dst.data_mut().iter_mut().zip(&src.data) {
                *d = T::lit(*s as f64);
            }
        }
        Ok(())
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta: CheckpointMeta = serde_json::from_str(&ck.metadata)
            .map_err(|e| Error::Format(format!("checkpoint metadata: {e}")))?;
        let mut m = Self::build(meta.model, 0)?;
        m.load_checkpoint(ck)?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}
