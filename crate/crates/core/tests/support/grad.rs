use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use radcom::model::{image_batch, mtl_loss, ModelConfig, MtlModel, TaskWeights};
use radcom::nn::{
    conv2d_forward, dense_forward, maxpool2x2, softmax_backward, softmax_cross_entropy_grad, softmax_rows, BatchNorm,
    Conv2d, Dense, Dropout, Flatten, MaxPool2x2, Mode, Relu, Tensor,
};

pub const H: f64 = 1e-4;
pub const TOL: f64 = 1e-3;
const INSTANCES: usize = 50;
const MODEL_H: f64 = 1e-6;

#[derive(Default)]
pub struct Tally {
    pub coords: usize,
    pub bad: usize,
    pub worst: f64,
}

impl Tally {
    fn compare(&mut self, analytic: &[f64], numeric: &[f64]) {
        assert_eq!(analytic.len(), numeric.len());
        for (a, n) in analytic.iter().zip(numeric) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
            self.coords += 1;
            self.worst = self.worst.max(rel);
            if rel >= TOL {
                self.bad += 1;
            }
        }
    }

    pub fn clean(&self) -> bool {
        self.bad == 0
    }

    pub fn summary(&self) -> String {
        format!("{} coordinates, {} over {TOL}, worst {:.2e}", self.coords, self.bad, self.worst)
    }
}

fn numeric(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut v = x.to_vec();
    (0..x.len())
        .map(|i| {
            let o = v[i];
            v[i] = o + H;
            let up = f(&v);
            v[i] = o - H;
            let down = f(&v);
            v[i] = o;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
    Tensor::new(shape.to_vec(), v.to_vec()).unwrap()
}

pub fn conv2d() -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut tally = Tally::default();
    for _ in 0..INSTANCES {
        let (n, h, w) = (rng.gen_range(1..4), rng.gen_range(3..7), rng.gen_range(3..7));
        let (cin, f) = (rng.gen_range(1..4), rng.gen_range(1..5));
        let mut conv = Conv2d::<f64>::new("c", cin, f, 3, &mut rng);
        conv.bias.value = rand_tensor(&[f], &mut rng);
        let x = rand_tensor(&[n, h, w, cin], &mut rng);
        let r = rand_tensor(&[n, h, w, f], &mut rng);
        conv.forward(&x).unwrap();
        let dx = conv.backward(&r).unwrap();
        let (wv, bv) = (conv.weight.value.clone(), conv.bias.value.clone());
        tally.compare(dx.data(), &numeric(x.data(), |v| dot(&conv2d_forward(&t(x.shape(), v), &wv, &bv).unwrap(), &r)));
        tally.compare(
            conv.weight.grad.data(),
            &numeric(wv.data(), |v| dot(&conv2d_forward(&x, &t(wv.shape(), v), &bv).unwrap(), &r)),
        );
        tally.compare(
            conv.bias.grad.data(),
            &numeric(bv.data(), |v| dot(&conv2d_forward(&x, &wv, &t(bv.shape(), v)).unwrap(), &r)),
        );
    }
    tally
}

pub fn dense() -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut tally = Tally::default();
    for _ in 0..INSTANCES {
        let (n, fin, fout) = (rng.gen_range(1..5), rng.gen_range(1..9), rng.gen_range(1..7));
        let mut d = Dense::<f64>::new("d", fin, fout, &mut rng);
        d.bias.value = rand_tensor(&[fout], &mut rng);
        let x = rand_tensor(&[n, fin], &mut rng);
        let r = rand_tensor(&[n, fout], &mut rng);
        d.forward(&x).unwrap();
        let dx = d.backward(&r).unwrap();
        let (wv, bv) = (d.weight.value.clone(), d.bias.value.clone());
        tally.compare(dx.data(), &numeric(x.data(), |v| dot(&dense_forward(&t(x.shape(), v), &wv, &bv).unwrap(), &r)));
        tally.compare(
            d.weight.grad.data(),
            &numeric(wv.data(), |v| dot(&dense_forward(&x, &t(wv.shape(), v), &bv).unwrap(), &r)),
        );
        tally.compare(
            d.bias.grad.data(),
            &numeric(bv.data(), |v| dot(&dense_forward(&x, &wv, &t(bv.shape(), v)).unwrap(), &r)),
        );
    }
    tally
}

pub fn batchnorm_train_mode() -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tally = Tally::default();
    for i in 0..INSTANCES {
        let c = rng.gen_range(1..5);
        let shape = if i % 2 == 0 {
            vec![rng.gen_range(2..6), c]
        } else {
            vec![rng.gen_range(2..4), rng.gen_range(1..4), rng.gen_range(1..4), c]
        };
        let gamma = Tensor::from_fn(&[c], |_| rng.gen_range(0.5..1.5));
        let beta = rand_tensor(&[c], &mut rng);
        let x = rand_tensor(&shape, &mut rng);
        let r = rand_tensor(&shape, &mut rng);
        let run = |x: &Tensor<f64>, g: &Tensor<f64>, b: &Tensor<f64>| {
            let mut bn = BatchNorm::<f64>::new("bn", c);
            bn.gamma.value = g.clone();
            bn.beta.value = b.clone();
            let y = bn.forward(x, Mode::Train).unwrap();
            (bn, y)
        };
        let (mut bn, _) = run(&x, &gamma, &beta);
        let dx = bn.backward(&r).unwrap();
        tally.compare(dx.data(), &numeric(x.data(), |v| dot(&run(&t(&shape, v), &gamma, &beta).1, &r)));
        tally.compare(bn.gamma.grad.data(), &numeric(gamma.data(), |v| dot(&run(&x, &t(&[c], v), &beta).1, &r)));
        tally.compare(bn.beta.grad.data(), &numeric(beta.data(), |v| dot(&run(&x, &gamma, &t(&[c], v)).1, &r)));
    }
    tally
}

pub fn relu() -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tally = Tally::default();
    for _ in 0..INSTANCES {
        let shape = [rng.gen_range(1..4), rng.gen_range(1..9)];
        let x = Tensor::from_fn(&shape, |_| {
            let m: f64 = rng.gen_range(0.01..1.0);
            if rng.gen() {
                m
            } else {
                -m
            }
        });
        let r = rand_tensor(&shape, &mut rng);
        let mut relu = Relu::default();
        relu.forward(&x);
        let dx = relu.backward(&r).unwrap();
        tally.compare(dx.data(), &numeric(x.data(), |v| dot(&radcom::nn::relu(&t(&shape, v)), &r)));
    }
    tally
}

pub fn maxpool() -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tally = Tally::default();
    for _ in 0..INSTANCES {
        let shape = [rng.gen_range(1..3), 2 * rng.gen_range(1..4), 2 * rng.gen_range(1..4), rng.gen_range(1..3)];
        // A shuffled ramp keeps every pair of values at least 0.01 apart.
        let len: usize = shape.iter().product();
        let mut vals: Vec<f64> = (0..len).map(|i| i as f64 * 0.01).collect();
        for i in (1..len).rev() {
            vals.swap(i, rng.gen_range(0..=i));
        }
        let x = t(&shape, &vals);
        let out = [shape[0], shape[1] / 2, shape[2] / 2, shape[3]];
        let r = rand_tensor(&out, &mut rng);
        let mut pool = MaxPool2x2::default();
        pool.forward(&x).unwrap();
        let dx = pool.backward(&r).unwrap();
        tally.compare(dx.data(), &numeric(x.data(), |v| dot(&maxpool2x2(&t(&shape, v)).unwrap().0, &r)));
    }
    tally
}

pub fn dropout_fixed_mask() -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tally = Tally::default();
    for i in 0..INSTANCES {
        let shape = [rng.gen_range(1..4), rng.gen_range(1..17)];
        let rate = rng.gen_range(0.1..0.6);
        let x = rand_tensor(&shape, &mut rng);
        let r = rand_tensor(&shape, &mut rng);
        let mask_seed = 100 + i as u64;
        let run = |x: &Tensor<f64>| {
            let mut d = Dropout::<f64>::new(rate).unwrap();
            let y = d.forward(x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(mask_seed));
            (d, y)
        };
        let (mut d, _) = run(&x);
        let dx = d.backward(&r).unwrap();
        tally.compare(dx.data(), &numeric(x.data(), |v| dot(&run(&t(&shape, v)).1, &r)));
    }
    tally
}

pub fn flatten() -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tally = Tally::default();
    for _ in 0..INSTANCES {
        let shape = [rng.gen_range(1..3), rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..3)];
        let x = rand_tensor(&shape, &mut rng);
        let r = rand_tensor(&[shape[0], shape[1] * shape[2] * shape[3]], &mut rng);
        let mut fl = Flatten::default();
        fl.forward(&x).unwrap();
        let dx = fl.backward(&r).unwrap();
        let f = |v: &[f64]| v.iter().zip(r.data()).map(|(a, b)| a * b).sum::<f64>();
        tally.compare(dx.data(), &numeric(x.data(), f));
    }
    tally
}

/// Returns the softmax Jacobian tally and the fused cross-entropy tally.
pub fn softmax_and_cross_entropy() -> (Tally, Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut sm = Tally::default();
    let mut ce = Tally::default();
    for _ in 0..INSTANCES {
        let (n, k) = (rng.gen_range(1..5), rng.gen_range(2..12));
        let z = Tensor::from_fn(&[n, k], |_| rng.gen_range(-3.0..3.0));
        let r = rand_tensor(&[n, k], &mut rng);
        let probs = softmax_rows(&z).unwrap();
        let dz = softmax_backward(&probs, &r).unwrap();
        sm.compare(dz.data(), &numeric(z.data(), |v| dot(&softmax_rows(&t(&[n, k], v)).unwrap(), &r)));

        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let w = rng.gen_range(0.1..1.0);
        let (_, g) = softmax_cross_entropy_grad(&probs, &labels, w).unwrap();
        let loss = |v: &[f64]| {
            let p = softmax_rows(&t(&[n, k], v)).unwrap();
            w * softmax_cross_entropy_grad(&p, &labels, w).unwrap().0
        };
        ce.compare(g.data(), &numeric(z.data(), loss));
    }
    (sm, ce)
}

/// End to end through both heads and the shared trunk. With h = 1e-4 a
/// perturbation of a batch-norm shift moves hundreds of activations and
/// regularly crosses a ReLU or max-pool kink, so this check steps by 1e-6.
pub fn whole_model() -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = ModelConfig::dense(2, 2, 8, 2, 8);
    let mut model = MtlModel::<f64>::build(cfg, 4).unwrap();
    let values: Vec<f32> = (0..4 * 256).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let x = image_batch::<f64>(&values).unwrap();
    let lm = [0usize, 3, 5, 8];
    let ls = [1usize, 2, 7, 10];
    let w = TaskWeights::new(0.3, 0.7).unwrap();
    let loss = |m: &mut MtlModel<f64>| {
        let (pm, ps) = m.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        mtl_loss(&pm, &ps, &lm, &ls, w).unwrap()
    };
    let (_, gm, gs) = loss(&mut model);
    model.backward(&gm, &gs).unwrap();
    let grads: Vec<Tensor<f64>> = model.params().iter().map(|p| p.grad.clone()).collect();

    let mut tally = Tally::default();
    for _ in 0..200 {
        let pi = rng.gen_range(0..grads.len());
        let ci = rng.gen_range(0..grads[pi].len());
        let mut eval = |delta: f64| {
            let orig = {
                let mut ps = model.params_mut();
                let v = &mut ps[pi].value.data_mut()[ci];
                let o = *v;
                *v = o + delta;
                o
            };
            let l = loss(&mut model).0.total;
            model.params_mut()[pi].value.data_mut()[ci] = orig;
            l
        };
        let n = (eval(MODEL_H) - eval(-MODEL_H)) / (2.0 * MODEL_H);
        tally.compare(&[grads[pi].data()[ci]], &[n]);
    }
    tally
}

/// Every layer kind with its tally.
pub fn all_layers() -> Vec<(&'static str, Tally)> {
    let (sm, ce) = softmax_and_cross_entropy();
    vec![
        ("conv2d", conv2d()),
        ("dense", dense()),
        ("batchnorm", batchnorm_train_mode()),
        ("relu", relu()),
        ("maxpool", maxpool()),
        ("dropout", dropout_fixed_mask()),
        ("flatten", flatten()),
        ("softmax", sm),
        ("softmax cross-entropy", ce),
    ]
}
