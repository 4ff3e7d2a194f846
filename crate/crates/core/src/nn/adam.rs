use super::layers::Param;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Bias-corrected Adam with one pair of moment accumulators per parameter.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    moments: Vec<(Tensor<T>, Tensor<T>)>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(lr: f64, shapes: impl IntoIterator<Item = Vec<usize>>) -> Self {
        let moments = shapes
            .into_iter()
            .map(|s| (Tensor::zeros(&s), Tensor::zeros(&s)))
            .collect();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            moments,
        }
    }

    pub fn for_params(lr: f64, params: &[&mut Param<T>]) -> Self {
        Self::new(lr, params.iter().map(|p| p.value.shape().to_vec()))
    }

    /// Applies one update to every parameter using its stored gradient.
    pub fn step(&mut self, params: &mut [&mut Param<T>]) -> Result<()> {
        if params.len() != self.moments.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{} parameters but {} moment slots", params.len(), self.moments.len()),
            ));
        }
        for (p, (m, _)) in params.iter().zip(&self.moments) {
            if !p.value.same_shape(&p.grad) || !p.value.same_shape(m) {
                return Err(Error::shape(
                    "adam_step",
                    format!("{}: value {:?}, grad {:?}, moment {:?}", p.name, p.value.shape(), p.grad.shape(), m.shape()),
                ));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::lit(1.0 - self.beta1.powi(t));
        let c2 = T::lit(1.0 - self.beta2.powi(t));
        let lr = T::lit(self.lr);
        let eps = T::lit(self.eps);
        let one = T::one();
        for (p, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
            let grads = p.grad.data();
            for (((w, &g), mi), vi) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(grads)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + (one - b1) * g;
                *vi = b2 * *vi + (one - b2) * g * g;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64, g: f64) -> Param<f64> {
        let mut p = Param::new("w", Tensor::full(&[1], v));
        p.grad.data_mut()[0] = g;
        p
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut p = scalar_param(0.7, 0.0);
        let mut adam = AdamState::new(1e-3, [vec![1]]);
        adam.step(&mut [&mut p]).unwrap();
        assert_eq!(p.value.data()[0], 0.7);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar_param(1.0, 1.0);
        let mut adam = AdamState::new(1e-3, [vec![1]]);
        adam.step(&mut [&mut p]).unwrap();
        assert!((p.value.data()[0] - 0.999).abs() < 1e-8);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut p = scalar_param(1.0, 0.0);
        let mut adam = AdamState::new(1e-3, [vec![1]]);
        let mut prev = 1.0f64;
        for _ in 0..10 {
            let w = p.value.data()[0];
            p.grad.data_mut()[0] = 2.0 * w;
            adam.step(&mut [&mut p]).unwrap();
            let now = p.value.data()[0].abs();
            assert!(now < prev);
            prev = now;
        }
        assert_eq!(adam.t, 10);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = scalar_param(1.0, 1.0);
        let mut adam = AdamState::<f64>::new(1e-3, [vec![2]]);
        assert!(adam.step(&mut [&mut p]).is_err());
        assert_eq!(adam.t, 0);
    }
}
