use proptest::prelude::*;
use proptest::test_runner::{Config, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use radcom::channel::{draw_dynamic, DynamicConfig, SnrLevel};
use radcom::config::SignalConfig;
use radcom::dataset::{generate_dataset, generate_record, make_splits, DatasetKind, DatasetSpec, WaveformKey};
use radcom::eval::EvalReport;
use radcom::nn::{softmax_rows, Tensor};
use radcom::signal::{ModSigPair, Modulation, SignalClass};

pub type Outcome = Result<String, String>;

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn snr() -> impl Strategy<Value = i32> {
    (-10i32..=9).prop_map(|i| 2 * i)
}

fn kind() -> impl Strategy<Value = DatasetKind> {
    prop_oneof![Just(DatasetKind::Awgn), Just(DatasetKind::Dynamic)]
}

/// Every stored record has unit energy.
pub fn unit_energy() -> Outcome {
    let signals = SignalConfig::default();
    let cases = 96;
    runner(cases)
        .run(&(0..ModSigPair::ALL.len(), snr(), 0u32..1000, any::<u64>(), kind()), |(p, s, i, seed, k)| {
            let spec = DatasetSpec::new(k, 10, seed);
            let key = WaveformKey::new(ModSigPair::ALL[p], SnrLevel::new(s).unwrap(), i);
            let e = generate_record(&spec, &signals, &key).unwrap().energy();
            prop_assert!((e - 1.0).abs() < 1e-5, "{key}: energy {e}");
            Ok(())
        })
        .map(|_| format!("{cases} random records"))
        .map_err(|e| e.to_string())
}

/// Softmax rows are probability vectors even for extreme logits.
pub fn softmax_normalization() -> Outcome {
    let cases = 256;
    runner(cases)
        .run(&(1usize..6, 2usize..12, any::<u64>(), 0.1f64..500.0), |(n, k, seed, scale)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = Tensor::<f64>::from_fn(&[n, k], |_| rng.gen_range(-scale..scale));
            let p = softmax_rows(&z).unwrap();
            for row in p.data().chunks(k) {
                let s: f64 = row.iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12, "row sums to {s}");
                prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            }
            Ok(())
        })
        .map(|_| format!("{cases} random logit batches"))
        .map_err(|e| e.to_string())
}

/// Splits are disjoint, cover the container and are stratified 70/20/10.
pub fn split_disjointness() -> Outcome {
    let signals = SignalConfig::default();
    let cases = 12;
    runner(cases)
        .run(&(10usize..24, prop::collection::btree_set(snr(), 1..3), any::<u64>()), |(frames, snrs, seed)| {
            let mut spec = DatasetSpec::new(DatasetKind::Awgn, frames, seed);
            spec.snrs = snrs.into_iter().collect();
            let data = generate_dataset(&spec, &signals).unwrap();
            let sp = make_splits(&data, Default::default(), seed ^ 0x55).unwrap();
            let mut all: Vec<WaveformKey> = sp.train.iter().chain(&sp.val).chain(&sp.test).copied().collect();
            prop_assert_eq!(all.len(), data.len());
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), data.len(), "a key appears in two splits");
            let n_val = (0.2 * frames as f64).round() as usize;
            let n_test = (0.1 * frames as f64).round() as usize;
            for (stratum, _) in data.strata() {
                let count = |v: &[WaveformKey]| v.iter().filter(|k| (k.pair, k.snr) == stratum).count();
                prop_assert_eq!(count(&sp.val), n_val);
                prop_assert_eq!(count(&sp.test), n_test);
                prop_assert_eq!(count(&sp.train), frames - n_val - n_test);
            }
            Ok(())
        })
        .map(|_| format!("{cases} random containers"))
        .map_err(|e| e.to_string())
}

/// Confusion rows sum to per-class counts; the trace matches the accuracy.
pub fn confusion_row_sums() -> Outcome {
    let cases = 128;
    runner(cases)
        .run(&(1usize..200, any::<u64>(), 0.0f64..1.0), |(n, seed, p_right)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let keys: Vec<WaveformKey> = (0..n)
                .map(|i| {
                    let p = ModSigPair::ALL[rng.gen_range(0..ModSigPair::ALL.len())];
                    WaveformKey::new(p, SnrLevel::new(2 * rng.gen_range(-10..=9)).unwrap(), i as u32)
                })
                .collect();
            let preds: Vec<(usize, usize)> = keys
                .iter()
                .map(|k| {
                    let m = if rng.gen_bool(p_right) { k.modulation().index() } else { rng.gen_range(0..Modulation::COUNT) };
                    let s = if rng.gen_bool(p_right) { k.signal().index() } else { rng.gen_range(0..SignalClass::COUNT) };
                    (m, s)
                })
                .collect();
            let r = EvalReport::from_predictions(&keys, &preds, None).unwrap();
            for (i, row) in r.mod_confusion.iter().enumerate() {
                let truth = keys.iter().filter(|k| k.modulation().index() == i).count() as u64;
                prop_assert_eq!(row.iter().sum::<u64>(), truth);
            }
            for (i, row) in r.sig_confusion.iter().enumerate() {
                let truth = keys.iter().filter(|k| k.signal().index() == i).count() as u64;
                prop_assert_eq!(row.iter().sum::<u64>(), truth);
            }
            let o = r.overall();
            let trace_m: u64 = (0..Modulation::COUNT).map(|i| r.mod_confusion[i][i]).sum();
            let trace_s: u64 = (0..SignalClass::COUNT).map(|i| r.sig_confusion[i][i]).sum();
            prop_assert_eq!(trace_m as f64 / n as f64, o.mod_acc());
            prop_assert_eq!(trace_s as f64 / n as f64, o.sig_acc());
            prop_assert!((0.0..=1.0).contains(&o.both_acc()));
            Ok(())
        })
        .map(|_| format!("{cases} random prediction sets"))
        .map_err(|e| e.to_string())
}

/// Carrier and sample-rate offsets never leave their clamps.
pub fn cfo_sro_clamps() -> Outcome {
    let cases = 128;
    runner(cases)
        .run(
            &(0.0f64..200.0, 0.1f64..300.0, 0.0f64..200.0, 0.1f64..100.0, 16usize..4096, any::<u64>()),
            |(cfo_step, cfo_max, sro_step, sro_max, len, seed)| {
                let cfg = DynamicConfig {
                    cfo_stddev_per_sample: cfo_step,
                    cfo_max,
                    sro_stddev_per_sample: sro_step,
                    sro_max,
                    ..DynamicConfig::default()
                };
                let d = draw_dynamic(&cfg, seed, len);
                prop_assert!(d.cfo_hz.iter().all(|v| v.abs() <= cfo_max));
                prop_assert!(d.sro_hz.iter().all(|v| v.abs() <= sro_max));
                prop_assert_eq!(d.cfo_hz.len(), len);
                Ok(())
            },
        )
        .map(|_| format!("{cases} random walks"))
        .map_err(|e| e.to_string())
}

/// K measured as LOS power over diffuse power across independent draws.
pub fn estimate_rician_k(k: f64, draws: u64) -> f64 {
    let cfg = DynamicConfig {
        rician_k: k,
        ..DynamicConfig::default()
    };
    let samples: Vec<num_complex::Complex64> = (0..draws).map(|s| draw_dynamic(&cfg, s, 1).fading[0]).collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<num_complex::Complex64>() / n;
    let diffuse = samples.iter().map(|h| (h - mean).norm_sqr()).sum::<f64>() / n;
    mean.norm_sqr() / diffuse
}

pub fn rician_k_within_ten_percent() -> Outcome {
    let mut details = Vec::new();
    for k in [1.0, 3.0, 10.0] {
        let est = estimate_rician_k(k, 20_000);
        details.push(format!("K={k}: {est:.3}"));
        if (est - k).abs() > 0.1 * k {
            return Err(format!("K = {k} estimated as {est:.3}"));
        }
    }
    Ok(details.join(", "))
}

pub fn all() -> Vec<(&'static str, Outcome)> {
    vec![
        ("unit energy", unit_energy()),
        ("softmax normalization", softmax_normalization()),
        ("split disjointness", split_disjointness()),
        ("confusion row sums", confusion_row_sums()),
        ("CFO/SRO clamps", cfo_sro_clamps()),
        ("Rician K", rician_k_within_ten_percent()),
    ]
}
