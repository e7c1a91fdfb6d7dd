use lutnet::data::{gen_parabola, Dataset, DatasetTargets};
use lutnet::infer::forward_int;
use lutnet::train::{evaluate, train_loop};
use lutnet::{
    compile_model, conformance, Activation, ActivationKind, ActivationSpec, ClusterConfig,
    ClusterMethod, CompileOptions, DenseNet, Head, InputQuantizer, LrSchedule, LutOutput,
    TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n * 4);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..3usize);
        for d in 0..4 {
            let centre = if d % 3 == c { 0.8 } else { 0.2 };
            inputs.push((centre + rng.random_range(-0.15..0.15f64)).clamp(0.0, 1.0));
        }
        labels.push(c);
    }
    Dataset {
        dim: 4,
        inputs,
        targets: DatasetTargets::Labels { classes: 3, labels },
    }
}

fn config(method: ClusterMethod, size: usize, steps: usize) -> TrainConfig {
    TrainConfig {
        lr: LrSchedule::constant(0.01),
        steps,
        clustering: Some(ClusterConfig {
            every: 200,
            ..ClusterConfig::new(method, size)
        }),
        terminal_snap: true,
        eval_every: 100,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn input_quantizer(lo: f64, hi: f64, levels: usize) -> InputQuantizer {
    InputQuantizer::new(lo, hi, ActivationSpec::new(ActivationKind::TanhD, levels).unwrap()).unwrap()
}

#[test]
fn classifier_matches_reference() {
    let train = blobs(600, 1);
    let test = blobs(200, 2);
    let hidden = Activation::Quantized(ActivationSpec::new(ActivationKind::TanhD, 6).unwrap());
    let net = DenseNet::new(&[4, 8, 8, 3], hidden, Head::SoftmaxCrossEntropy, 5)
        .unwrap()
        .with_input_quantizer(input_quantizer(0.0, 1.0, 8));
    let out = train_loop(net, &train, Some(&test), &config(ClusterMethod::KMeans, 15, 1000)).unwrap();
    let codebook = out.codebook.unwrap();
    let model = compile_model(&out.net, &codebook, &CompileOptions::default()).unwrap();
    model.validate().unwrap();

    let report = conformance(&model, &test.inputs).unwrap();
    assert_eq!(report.samples, 200);
    assert!(report.max_deviation <= 1, "{report:?}");
    assert_eq!(report.out_of_band, 0, "{report:?}");
    assert!(report.unit_agreement() >= 0.99, "{report:?}");
    assert!(report.argmax_agreement() >= 0.99, "{report:?}");

    let acc = evaluate(&model.reference_net().unwrap(), &test).unwrap().value();
    assert!(acc > 0.9, "reference accuracy {acc}");
    let rows = model.quantize_input(test.input(0)).unwrap();
    assert!(matches!(forward_int(&model, &rows).unwrap(), LutOutput::Class { class, .. } if class < 3));
}

#[test]
fn regression_matches_reference() {
    let train = gen_parabola(1000, 7);
    let test = gen_parabola(200, 8);
    let hidden = Activation::Quantized(ActivationSpec::new(ActivationKind::Relu6D, 32).unwrap());
    let net = DenseNet::new(&[1, 8, 1], hidden, Head::L2Regression, 9)
        .unwrap()
        .with_input_quantizer(input_quantizer(-1.0, 1.0, 64));
    let out =
        train_loop(net, &train, Some(&test), &config(ClusterMethod::LaplacianL1, 15, 1000)).unwrap();
    let model = compile_model(&out.net, out.codebook.as_ref().unwrap(), &CompileOptions::default())
        .unwrap();
    let report = conformance(&model, &test.inputs).unwrap();
    assert!(report.max_deviation <= 1, "{report:?}");
    assert_eq!(report.out_of_band, 0, "{report:?}");
    // Only table rounding and float summation separate the paths.
    let bound = (model.fan_in_max() as f64 + 1.0) * model.output_unit() + 1e-12;
    if report.unit_agreements == report.units {
        assert!(report.max_output_error <= bound, "{report:?}");
    }
}

#[test]
fn unsnapped_network_is_rejected() {
    let hidden = Activation::Quantized(ActivationSpec::new(ActivationKind::TanhD, 4).unwrap());
    let net = DenseNet::new(&[2, 3, 2], hidden, Head::SoftmaxCrossEntropy, 0)
        .unwrap()
        .with_input_quantizer(input_quantizer(0.0, 1.0, 4));
    let codebook = lutnet::clustering::kmeans_1d(&net.parameters(), 3, 50).unwrap();
    let err = compile_model(&net, &codebook, &CompileOptions::default()).unwrap_err();
    assert!(matches!(err, lutnet::Error::Unsnapped { .. }), "{err}");
}

#[test]
fn thirty_two_bit_accumulator_compiles_small_nets() {
    let hidden = Activation::Quantized(ActivationSpec::new(ActivationKind::TanhD, 4).unwrap());
    let mut net = DenseNet::new(&[3, 4, 2], hidden, Head::SoftmaxCrossEntropy, 1)
        .unwrap()
        .with_input_quantizer(input_quantizer(0.0, 1.0, 4));
    let codebook = lutnet::clustering::kmeans_1d(&net.parameters(), 5, 50).unwrap();
    net.snap_to(&codebook);
    let opts = CompileOptions {
        acc_bits: 32,
        ..CompileOptions::default()
    };
    let model = compile_model(&net, &codebook, &opts).unwrap();
    assert!(model.s <= 31);
    let report = conformance(&model, &[0.1, 0.5, 0.9, 0.0, 1.0, 0.3]).unwrap();
    assert!(report.max_deviation <= 1);
}
