use candle_core::{DType, Device, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn qformer(hidden: usize, n_query: usize, feature_dim: usize, dtype: DType, seed: u64) -> (QFormer, ParamStore) {
    let cfg = QFormerConfig { n_query, hidden, heads: 2, blocks: 2, ffn_dim: hidden * 2, feature_dim };
    let qf = QFormer::new("qf", cfg);
    let mut store = ParamStore::new(dtype);
    qf.init(&mut store, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    (qf, store)
}

fn random_rows(n: usize, dim: usize, seed: u64, scale: f32) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-scale..scale)).collect()).collect()
}

fn forward(qf: &QFormer, store: &ParamStore, f: &FeatureSequence) -> Tensor {
    qf.forward(store, &f.to_tensor(store.dtype(), store.device()).unwrap(), &f.mask()).unwrap()
}

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    (a - b).unwrap().abs().unwrap().flatten_all().unwrap().max(0).unwrap().to_dtype(DType::F64).unwrap().to_scalar::<f64>().unwrap()
}

#[test]
fn output_shape_is_independent_of_input_length() {
    let (qf, store) = qformer(16, 32, 6, DType::F32, 1);
    for valid in [8, 30, 1, 50] {
        let f = FeatureSequence::from_rows(random_rows(valid, 6, 2, 1.0), 6, VIDEO_PAD).unwrap();
        assert_eq!(forward(&qf, &store, &f).dims(), &[32, 16]);
    }
}

#[test]
fn padding_amount_does_not_change_output() {
    let (qf, store) = qformer(16, 32, 6, DType::F32, 3);
    let rows = random_rows(12, 6, 4, 2.0);
    let a = forward(&qf, &store, &FeatureSequence::from_rows(rows.clone(), 6, 50).unwrap());
    let b = forward(&qf, &store, &FeatureSequence::from_rows(rows, 6, 40).unwrap());
    assert!(max_abs_diff(&a, &b) <= 1e-5);
}

#[test]
fn zero_cross_attention_output_ignores_features() {
    let (qf, store) = qformer(16, 4, 6, DType::F32, 5);
    for b in 0..2 {
        for p in ["weight", "bias"] {
            let name = format!("qf.blocks.{b}.cross.o.{p}");
            let zeros = store.get(&name).unwrap().zeros_like().unwrap();
            store.set(&name, &zeros).unwrap();
        }
    }
    let a = forward(&qf, &store, &FeatureSequence::from_rows(random_rows(5, 6, 6, 3.0), 6, 10).unwrap());
    let b = forward(&qf, &store, &FeatureSequence::from_rows(random_rows(9, 6, 7, 3.0), 6, 10).unwrap());
    assert_eq!(max_abs_diff(&a, &b), 0.0);
    let v: Vec<f32> = a.flatten_all().unwrap().to_vec1().unwrap();
    assert!(v.iter().all(|x| x.is_finite()));
}

#[test]
fn fully_masked_input_is_rejected() {
    let (qf, store) = qformer(8, 2, 4, DType::F32, 0);
    let x = Tensor::zeros((5, 4), DType::F32, &Device::Cpu).unwrap();
    assert!(qf.forward(&store, &x, &[false; 5]).is_err());
    let wrong = Tensor::zeros((5, 3), DType::F32, &Device::Cpu).unwrap();
    assert!(qf.forward(&store, &wrong, &[true; 5]).is_err());
}

#[test]
fn identity_and_zero_projections() {
    let dev = Device::Cpu;
    let x = Tensor::new(&[[1f64, -2.0, 3.0], [0.5, 0.25, -1.0]], &dev).unwrap();
    let eye = Tensor::eye(3, DType::F64, &dev).unwrap();
    let zero_b = Tensor::zeros(3, DType::F64, &dev).unwrap();
    assert_eq!(max_abs_diff(&project_to_lm(&x, &eye, &zero_b).unwrap(), &x), 0.0);
    let zw = Tensor::zeros((5, 3), DType::F64, &dev).unwrap();
    let zb = Tensor::zeros(5, DType::F64, &dev).unwrap();
    let z = project_to_lm(&x, &zw, &zb).unwrap();
    assert_eq!(z.dims(), &[2, 5]);
    assert_eq!(z.abs().unwrap().sum_all().unwrap().to_scalar::<f64>().unwrap(), 0.0);
    let bad = Tensor::zeros((5, 4), DType::F64, &dev).unwrap();
    assert!(project_to_lm(&x, &bad, &zb).is_err());
}

#[test]
fn projection_matches_naive_matmul() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n, h, d) = (7, 5, 4);
    let xs: Vec<f64> = (0..n * h).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ws: Vec<f64> = (0..d * h).map(|_| rng.random_range(-1.0..1.0)).collect();
    let bs: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dev = Device::Cpu;
    let out = project_to_lm(
        &Tensor::from_vec(xs.clone(), (n, h), &dev).unwrap(),
        &Tensor::from_vec(ws.clone(), (d, h), &dev).unwrap(),
        &Tensor::from_vec(bs.clone(), d, &dev).unwrap(),
    )
    .unwrap()
    .to_vec2::<f64>()
    .unwrap();
    for i in 0..n {
        for j in 0..d {
            let mut acc = bs[j];
            for k in 0..h {
                acc += xs[i * h + k] * ws[j * h + k];
            }
            assert!((out[i][j] - acc).abs() < 1e-6);
        }
    }
}

#[test]
fn fusion_orders_segments() {
    let dev = Device::Cpu;
    let v = Tensor::zeros((32, 8), DType::F32, &dev).unwrap();
    let a = Tensor::ones((32, 8), DType::F32, &dev).unwrap();
    let t = Tensor::ones((12, 8), DType::F32, &dev).unwrap();
    let r = fuse_utterance(Some(&v), Some(&a), Some(&t)).unwrap();
    assert_eq!(r.len(), 76);
    assert_eq!(r.embeddings.dims(), &[76, 8]);
    assert_eq!(r.boundaries(), vec![0, 32, 64]);

    let text_only = fuse_utterance(None, None, Some(&t)).unwrap();
    assert_eq!(max_abs_diff(&text_only.embeddings, &t), 0.0);
    assert_eq!(text_only.segments[0].modality, Modality::Text);

    let no_video = fuse_utterance(None, Some(&a), Some(&t)).unwrap();
    let kinds: Vec<Modality> = no_video.segments.iter().map(|s| s.modality).collect();
    assert_eq!(kinds, vec![Modality::Audio, Modality::Text]);
    assert_eq!(no_video.boundaries(), vec![0, 32]);

    assert!(fuse_utterance(None, None, None).is_err());
}

#[test]
fn fusion_model_encodes_both_modalities() {
    let cfg = FusionConfig { n_query: 4, hidden: 8, heads: 2, blocks: 1, ffn_dim: 16, video_feature_dim: 6, audio_feature_dim: 5, lm_dim: 12 };
    let model = FusionModel::new(cfg);
    let mut store = ParamStore::new(DType::F32);
    model.init(&mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let v = FeatureSequence::from_rows(random_rows(3, 6, 1, 1.0), 6, VIDEO_PAD).unwrap();
    let a = FeatureSequence::from_rows(random_rows(20, 5, 2, 1.0), 5, AUDIO_PAD).unwrap();
    assert_eq!(model.encode(&store, Modality::Video, &v).unwrap().dims(), &[4, 12]);
    assert_eq!(model.encode(&store, Modality::Audio, &a).unwrap().dims(), &[4, 12]);
    assert!(model.encode(&store, Modality::Audio, &v).is_err());
}

/// Finite differences against backprop through Q-Former and projection.
#[test]
fn analytic_gradients_match_finite_differences() {
    let (qf, mut store) = qformer(8, 2, 4, DType::F64, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    store.linear("proj", 8, 3, 0.5, &mut rng).unwrap();
    let dev = Device::Cpu;
    let feats = FeatureSequence::from_rows(random_rows(4, 4, 13, 1.0), 4, 6).unwrap();
    let x = feats.to_tensor(DType::F64, &dev).unwrap();
    let mask = feats.mask();
    let probe_vals: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let probe = Tensor::from_vec(probe_vals, (2, 3), &dev).unwrap();
    let loss = |store: &ParamStore| -> Tensor {
        let t = qf.forward(store, &x, &mask).unwrap();
        let p = project_to_lm(&t, &store.get("proj.weight").unwrap(), &store.get("proj.bias").unwrap()).unwrap();
        (p * &probe).unwrap().sum_all().unwrap()
    };
    let grads = loss(&store).backward().unwrap();
    let names = ["qf.query", "qf.blocks.0.cross.k.weight", "qf.blocks.1.self.v.weight", "qf.blocks.0.ffn.up.weight", "proj.weight"];
    for name in names {
        let var = store.var(name).unwrap().clone();
        let analytic: Vec<f64> = grads.get(&var).unwrap().flatten_all().unwrap().to_vec1().unwrap();
        let base: Vec<f64> = var.as_tensor().flatten_all().unwrap().to_vec1().unwrap();
        let shape = var.as_tensor().shape().clone();
        for idx in [0, base.len() / 2, base.len() - 1] {
            let eps = 1e-6;
            let mut plus = base.clone();
            plus[idx] += eps;
            var.set(&Tensor::from_vec(plus, shape.clone(), &dev).unwrap()).unwrap();
            let lp = loss(&store).to_scalar::<f64>().unwrap();
            let mut minus = base.clone();
            minus[idx] -= eps;
            var.set(&Tensor::from_vec(minus, shape.clone(), &dev).unwrap()).unwrap();
            let lm = loss(&store).to_scalar::<f64>().unwrap();
            var.set(&Tensor::from_vec(base.clone(), shape.clone(), &dev).unwrap()).unwrap();
            let numeric = (lp - lm) / (2.0 * eps);
            let denom = numeric.abs().max(analytic[idx].abs()).max(1e-6);
            assert!(
                (numeric - analytic[idx]).abs() / denom < 1e-3,
                "{name}[{idx}]: numeric {numeric} analytic {}",
                analytic[idx]
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn outputs_are_finite_for_bounded_inputs(seed in 0u64..1000, valid in 1usize..20) {
        let (qf, store) = qformer(8, 4, 5, DType::F32, seed);
        let f = FeatureSequence::from_rows(random_rows(valid, 5, seed + 1, 10.0), 5, 20).unwrap();
        let out: Vec<f32> = forward(&qf, &store, &f).flatten_all().unwrap().to_vec1().unwrap();
        prop_assert!(out.iter().all(|v| v.is_finite()));
    }
}
