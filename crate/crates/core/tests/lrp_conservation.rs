use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salience_core::lrp::{lrp, Rule};
use salience_core::nn::{forward, Conv2d, Dense, Layer, MaxPool2d, ModelSpec, Padding};
use salience_core::{Shape, Tensor3};

/// Random bias-free CNN with at most five layers and input up to 16x16x3.
fn random_cnn(rng: &mut ChaCha8Rng) -> ModelSpec {
    loop {
        let (h, w, c) = (rng.gen_range(4..=16), rng.gen_range(4..=16), rng.gen_range(1..=3));
        let out_c = rng.gen_range(1..=4);
        let kernel = rng.gen_range(1..=3);
        let padding = if rng.gen_bool(0.5) { Padding::Same } else { Padding::Valid };
        let mut layers = vec![
            Layer::Conv2d(Conv2d::zeros(kernel, kernel, c, out_c, rng.gen_range(1..=2), padding)),
            Layer::Relu,
        ];
        if rng.gen_bool(0.5) {
            layers.push(Layer::MaxPool2d(MaxPool2d { size_h: 2, size_w: 2, stride: 2 }));
        }
        let pooled = rng.gen_bool(0.5);
        layers.push(if pooled { Layer::GlobalAveragePool } else { Layer::Flatten });
        let Ok(probe) = ModelSpec::new("probe", Shape::spatial(h, w, c), None, layers.clone()) else {
            continue;
        };
        let features = probe.output_len();
        layers.push(Layer::Dense(Dense::zeros(features, rng.gen_range(1..=3))));
        let model = ModelSpec::new("toy", Shape::spatial(h, w, c), None, layers).unwrap();
        return model.with_random_weights(rng.gen()).without_bias();
    }
}

fn random_input(model: &ModelSpec, rng: &mut ChaCha8Rng) -> Tensor3 {
    let Shape::Spatial { height, width, channels } = model.input_shape() else {
        unreachable!()
    };
    let values = (0..height * width * channels).map(|_| rng.gen_range(0.0..1.0)).collect();
    Tensor3::new(height, width, channels, values).unwrap()
}

#[test]
fn z_rule_conserves_relevance_at_every_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut checked = 0;
    while checked < 100 {
        let model = random_cnn(&mut rng);
        let input = random_input(&model, &mut rng);
        let mask = vec![1.0; model.output_len()];
        let r = lrp(&model, &input, &mask, Rule::Z).unwrap();
        let seed = r.seed().sum();
        if seed.abs() < 1e-6 {
            continue;
        }
        for (k, layer) in r.per_layer.iter().enumerate() {
            let rel = (layer.sum() - seed).abs() / seed.abs();
            assert!(rel < 1e-6, "model {checked} layer {k}: {} vs {seed}", layer.sum());
        }
        checked += 1;
    }
}

#[test]
fn relevance_shapes_mirror_activations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let model = random_cnn(&mut rng);
        let input = random_input(&model, &mut rng);
        let acts = forward(&model, &input).unwrap();
        let r = lrp(&model, &input, &vec![1.0; model.output_len()], Rule::default()).unwrap();
        assert_eq!(acts.len(), r.per_layer.len());
        for (a, rel) in acts.iter().zip(&r.per_layer) {
            assert_eq!(a.shape(), rel.shape());
        }
        assert_eq!(r.input_heatmap.dims(), (input.width(), input.height()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn heatmap_is_normalized_and_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_cnn(&mut rng);
        let input = random_input(&model, &mut rng);
        let mask = vec![1.0; model.output_len()];
        let a = lrp(&model, &input, &mask, Rule::default()).unwrap();
        let b = lrp(&model, &input, &mask, Rule::default()).unwrap();
        prop_assert_eq!(&a, &b);
        let hm = &a.input_heatmap;
        prop_assert!(hm.min() >= 0.0);
        prop_assert!(hm.max() == 255.0 || hm.max() == 0.0);
    }
}
