//! Small CNN detector over the six-band co-occurrence tensor: four
//! convolutional layers with two max-pool/dropout stages, two 256-unit
//! dense layers and a sigmoid head, trained with SGD + momentum on binary
//! cross-entropy.
//!
//! Layers are generic over the float type: training runs in `f32`, while
//! gradient verification runs the same code paths in `f64` against central
//! finite differences.

mod gradcheck;
mod layer;
mod model;
mod train;

pub use gradcheck::{grad_check, GradCheckReport};
pub use model::{
    load_model, save_model, ArchSpec, Cache, CnnModel, DropoutMasks, Gradients, LayerSpec,
    Network, NnFloat,
};
pub use train::{
    read_history_csv, train, write_history_csv, EpochStats, TrainConfig,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comat::{build_tensor, rebin_tensor, CoMatTensor};
    use crate::corpus::{gen_real_frame, gen_virtual_frame, ClassCounts, CorpusConfig};
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(seed: u64, c: usize, b: usize) -> Array3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_fn((c, b, b), |_| rng.random_range(0.0..2.0))
    }

    /// Nested-loop re-implementation of the reduced network (no dropout),
    /// reconstructed from the flat parameter slices.
    fn naive_forward(arch: &ArchSpec, params: &[&[f64]], input: &Array3<f64>) -> f64 {
        enum A {
            S(Vec<Vec<Vec<f64>>>),
            F(Vec<f64>),
        }
        let (c0, h0, w0) = (arch.input_channels, arch.input_bins, arch.input_bins);
        let mut act = A::S(
            (0..c0)
                .map(|c| {
                    (0..h0)
                        .map(|y| (0..w0).map(|x| input[[c, y, x]]).collect())
                        .collect()
                })
                .collect(),
        );
        let mut pi = 0;
        for spec in &arch.layers {
            act = match (*spec, act) {
                (LayerSpec::Conv { filters, kernel, relu }, A::S(x)) => {
                    let (c, h, w) = (x.len(), x[0].len(), x[0][0].len());
                    let (wts, bias) = (params[pi], params[pi + 1]);
                    pi += 2;
                    let p = kernel as i64 / 2;
                    let mut out = vec![vec![vec![0.0; w]; h]; filters];
                    for oc in 0..filters {
                        for y in 0..h {
                            for xx in 0..w {
                                let mut acc = bias[oc];
                                for ci in 0..c {
                                    for ky in 0..kernel {
                                        for kx in 0..kernel {
                                            let sy = y as i64 + ky as i64 - p;
                                            let sx = xx as i64 + kx as i64 - p;
                                            if sy < 0 || sx < 0 || sy >= h as i64 || sx >= w as i64
                                            {
                                                continue;
                                            }
                                            let row = (ci * kernel + ky) * kernel + kx;
                                            acc += x[ci][sy as usize][sx as usize]
                                                * wts[row * filters + oc];
                                        }
                                    }
                                }
                                out[oc][y][xx] = if relu { acc.max(0.0) } else { acc };
                            }
                        }
                    }
                    A::S(out)
                }
                (LayerSpec::MaxPool { size, stride }, A::S(x)) => {
                    let (c, h, w) = (x.len(), x[0].len(), x[0][0].len());
                    let (oh, ow) = ((h - size) / stride + 1, (w - size) / stride + 1);
                    let mut out = vec![vec![vec![f64::MIN; ow]; oh]; c];
                    for ci in 0..c {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                for ky in 0..size {
                                    for kx in 0..size {
                                        let v = x[ci][oy * stride + ky][ox * stride + kx];
                                        if v > out[ci][oy][ox] {
                                            out[ci][oy][ox] = v;
                                        }
                                    }
                                }
                            }
                        }
                    }
                    A::S(out)
                }
                (LayerSpec::Dropout { .. }, a) => a,
                (LayerSpec::Dense { units, relu }, a) => {
                    let x: Vec<f64> = match a {
                        A::F(v) => v,
                        A::S(s) => s
                            .iter()
                            .flat_map(|pl| pl.iter().flat_map(|row| row.iter().copied()))
                            .collect(),
                    };
                    let (wts, bias) = (params[pi], params[pi + 1]);
                    pi += 2;
                    let mut out = vec![0.0; units];
                    for (j, o) in out.iter_mut().enumerate() {
                        let mut acc = bias[j];
                        for (i, &v) in x.iter().enumerate() {
                            acc += v * wts[i * units + j];
                        }
                        *o = if relu { acc.max(0.0) } else { acc };
                    }
                    A::F(out)
                }
                _ => panic!("shape mismatch in oracle"),
            };
        }
        match act {
            A::F(v) => v[0],
            _ => panic!("oracle did not end flat"),
        }
    }

    fn tiny_tensor(seed: u64, virtual_bg: bool, bins: usize) -> CoMatTensor {
        let cfg = CorpusConfig {
            width: 64,
            height: 64,
            real: ClassCounts::new(1, 0, 0),
            ..CorpusConfig::default()
        };
        let frame = if virtual_bg {
            gen_virtual_frame(&cfg, seed).unwrap()
        } else {
            gen_real_frame(&cfg, seed)
        };
        rebin_tensor(&build_tensor(&frame, true).unwrap(), bins).unwrap()
    }

    fn tiny_dataset(n_per_class: usize, bins: usize) -> Vec<(CoMatTensor, bool)> {
        let mut set = Vec::new();
        for i in 0..n_per_class {
            set.push((tiny_tensor(100 + i as u64, false, bins), false));
            set.push((tiny_tensor(200 + i as u64, true, bins), true));
        }
        set
    }

    fn reduced_model(seed: u64) -> CnnModel {
        CnnModel::init(ArchSpec::reduced().without_dropout(), seed).unwrap()
    }

    #[test]
    fn zero_input_fresh_model_predicts_half() {
        let net: Network<f64> = Network::init(&ArchSpec::reduced().without_dropout(), 3).unwrap();
        let logit = net.forward_eval(&Array3::zeros((6, 8, 8))).unwrap();
        assert_eq!(logit, 0.0);
        let model = reduced_model(3);
        let p = model.predict_input(&Array3::zeros((6, 8, 8))).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn eval_is_deterministic() {
        let net: Network<f64> = Network::init(&ArchSpec::reduced().without_dropout(), 7).unwrap();
        let x = random_input(1, 6, 8);
        assert_eq!(net.forward_eval(&x).unwrap(), net.forward_eval(&x).unwrap());
    }

    #[test]
    fn forward_matches_direct_convolution_oracle() {
        let arch = ArchSpec::reduced().without_dropout();
        let net: Network<f64> = Network::init(&arch, 11).unwrap();
        for seed in 0..3 {
            let x = random_input(seed, 6, 8);
            let got = net.forward_eval(&x).unwrap();
            let want = naive_forward(&arch, &net.param_slices(), &x);
            assert!(
                (got - want).abs() < 1e-10,
                "seed {seed}: {got} vs oracle {want}"
            );
        }
    }

    #[test]
    fn perfect_prediction_gives_zero_gradients() {
        let net: Network<f64> = Network::init(&ArchSpec::reduced().without_dropout(), 5).unwrap();
        let x = random_input(9, 6, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cache = net.forward_train(&x, &mut rng).unwrap();
        let p = 1.0 / (1.0 + (-cache.logit).exp());
        let grads = net.backward(&cache, p).unwrap();
        for slice in Network::grad_slices(&grads) {
            assert!(slice.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn duplicate_sample_batch_average_is_exact() {
        let net: Network<f32> = Network::init(&ArchSpec::reduced().without_dropout(), 7).unwrap();
        let x = random_input(4, 6, 8).mapv(|v| v as f32);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cache = net.forward_train(&x, &mut rng).unwrap();
        let single = net.backward(&cache, 1.0).unwrap();

        let mut doubled = net.zero_gradients();
        doubled.add_assign(&net.backward(&cache, 1.0).unwrap());
        doubled.add_assign(&net.backward(&cache, 1.0).unwrap());
        doubled.scale(0.5);

        for (a, b) in Network::grad_slices(&single)
            .iter()
            .zip(Network::grad_slices(&doubled).iter())
        {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let small: Network<f64> =
            Network::init(&ArchSpec::reduced().without_dropout(), 1).unwrap();
        let mut other_arch = ArchSpec::reduced().without_dropout();
        other_arch.input_bins = 16;
        let big: Network<f64> = Network::init(&other_arch, 1).unwrap();
        let x = random_input(2, 6, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cache = big.forward_train(&x, &mut rng).unwrap();
        assert!(small.backward(&cache, 1.0).is_err());
    }

    #[test]
    fn gradient_check_reduced_network() {
        let report = grad_check(1e-4, 42, false).unwrap();
        assert!(
            report.passed,
            "max rel error {} over {} params",
            report.max_rel_error, report.params_checked
        );
        assert!(report.params_checked > 2000);
    }

    #[test]
    fn gradient_check_with_frozen_dropout() {
        let report = grad_check(1e-4, 43, true).unwrap();
        assert!(report.passed, "max rel error {}", report.max_rel_error);
    }

    #[test]
    fn gradient_check_fails_at_float_noise_precision() {
        let report = grad_check(1e-12, 42, false).unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn zero_learning_rate_leaves_weights_unchanged() {
        let mut model = reduced_model(21);
        let before: Vec<Vec<f32>> =
            model.net.param_slices().iter().map(|s| s.to_vec()).collect();
        let set = tiny_dataset(2, 8);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            batch_size: 2,
            stop_at_val_acc: None,
            ..TrainConfig::default()
        };
        train(&mut model, &set, &set, &cfg).unwrap();
        let after: Vec<Vec<f32>> =
            model.net.param_slices().iter().map(|s| s.to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let set = tiny_dataset(3, 8);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            seed: 9,
            stop_at_val_acc: None,
            ..TrainConfig::default()
        };
        let mut run = |_: ()| {
            let mut model = CnnModel::init(ArchSpec::reduced(), 5).unwrap();
            train(&mut model, &set, &set, &cfg).unwrap();
            model
                .net
                .param_slices()
                .iter()
                .map(|s| s.to_vec())
                .collect::<Vec<Vec<f32>>>()
        };
        assert_eq!(run(()), run(()));
    }

    #[test]
    fn rejects_single_class_dataset() {
        let mut model = reduced_model(1);
        let set: Vec<(CoMatTensor, bool)> =
            (0..4).map(|i| (tiny_tensor(i, false, 8), false)).collect();
        assert!(train(&mut model, &set, &[], &TrainConfig::default()).is_err());
        assert!(train(&mut model, &[], &[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn zero_epochs_is_identity_fine_tune() {
        let mut model = reduced_model(2);
        let before: Vec<Vec<f32>> =
            model.net.param_slices().iter().map(|s| s.to_vec()).collect();
        let set = tiny_dataset(2, 8);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let history = train(&mut model, &set, &set, &cfg).unwrap();
        assert!(history.is_empty());
        let after: Vec<Vec<f32>> =
            model.net.param_slices().iter().map(|s| s.to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn loss_trend_is_mostly_non_increasing_at_small_lr() {
        let mut model = CnnModel::init(
            ArchSpec {
                input_bins: 32,
                input_channels: 6,
                input_scale: 32.0,
                layers: ArchSpec::reduced().without_dropout().layers,
            },
            13,
        )
        .unwrap();
        let set = tiny_dataset(6, 32);
        let cfg = TrainConfig {
            learning_rate: 1e-4,
            epochs: 21,
            batch_size: 4,
            seed: 3,
            stop_at_val_acc: None,
            ..TrainConfig::default()
        };
        let history = train(&mut model, &set, &set, &cfg).unwrap();
        let mut increases = 0;
        for w in history.windows(2) {
            if w[1].train_loss > w[0].train_loss {
                increases += 1;
            }
        }
        let frac = increases as f64 / (history.len() - 1) as f64;
        assert!(frac <= 0.05, "{increases} increases over {} epochs", history.len());
    }

    #[test]
    fn model_file_roundtrip_preserves_weights_and_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.vbgm");
        let mut model = CnnModel::init(ArchSpec::reduced(), 77).unwrap();
        let set = tiny_dataset(2, 8);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 4,
            stop_at_val_acc: None,
            ..TrainConfig::default()
        };
        train(&mut model, &set, &set, &cfg).unwrap();
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.arch, model.arch);
        for (a, b) in model
            .net
            .param_slices()
            .iter()
            .zip(back.net.param_slices().iter())
        {
            assert_eq!(a, b);
        }
        let t = tiny_tensor(5, true, 8);
        assert_eq!(model.predict(&t).unwrap(), back.predict(&t).unwrap());
    }

    #[test]
    fn history_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        let history = vec![
            EpochStats {
                epoch: 1,
                train_loss: 0.693,
                train_acc: 0.5,
                val_loss: 0.7,
                val_acc: 0.45,
            },
            EpochStats {
                epoch: 2,
                train_loss: 0.512,
                train_acc: 0.8,
                val_loss: 0.55,
                val_acc: 0.75,
            },
        ];
        write_history_csv(&path, &history).unwrap();
        assert_eq!(read_history_csv(&path).unwrap(), history);
    }
}
