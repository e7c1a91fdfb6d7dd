//! Acceptance suite: prints one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test --test acceptance -- 1 5 8`. MNIST is read
//! from `$MNIST_DIR`, `data/mnist` or `/root/data/mnist`. The process exits
//! non-zero on failure only when `ACCEPTANCE_STRICT=1`.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use lutnet::clustering::fit_laplacian_codebook;
use lutnet::data::{gen_parabola, gen_patches, load_mnist_dir, parabola_at, Dataset, ImageSet};
use lutnet::format::{compiled_to_bytes, from_bytes};
use lutnet::gradcheck::gradient_check;
use lutnet::huffman::{entropy_encode_indices, fixed_width};
use lutnet::lut::{InputMap, LutLayer, LutModel};
use lutnet::net::Targets;
use lutnet::train::{evaluate, train_loop, TrainOutput};
use lutnet::{
    compile_model, conformance, estimate_storage, Activation, ActivationKind, ActivationSpec,
    ClusterConfig, ClusterMethod, CompileOptions, DenseNet, Head, IndexEncoding, LrSchedule,
    LutHead, ModelFile, Task, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

const MNIST_STEPS: usize = 20_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mnist_dir() -> Option<PathBuf> {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .into_iter()
        .chain([manifest.join("../../data/mnist"), PathBuf::from("/root/data/mnist")])
        .find(|d| d.join("train-images-idx3-ubyte").is_file())
}

fn mnist() -> Option<&'static (Dataset, Dataset)> {
    static DATA: OnceLock<Option<(Dataset, Dataset)>> = OnceLock::new();
    DATA.get_or_init(|| mnist_dir().and_then(|d| load_mnist_dir(d).ok()))
        .as_ref()
}

fn config(steps: usize, clustering: Option<ClusterConfig>, lr: LrSchedule, seed: u64) -> TrainConfig {
    TrainConfig {
        lr,
        steps,
        clustering,
        terminal_snap: true,
        eval_every: steps,
        seed,
        ..TrainConfig::default()
    }
}

fn kmeans(size: usize) -> ClusterConfig {
    ClusterConfig {
        every: 1000,
        ..ClusterConfig::new(ClusterMethod::KMeans, size)
    }
}

/// Trains an MNIST network and returns it with its test accuracy.
fn mnist_run(hidden: &[usize], levels: Option<usize>, weights: Option<usize>) -> (TrainOutput, f64) {
    let (train, test) = mnist().expect("checked by caller");
    let net = Task::Mnist
        .network(hidden, ActivationKind::TanhD, levels, 32, 1)
        .expect("valid network");
    let out = train_loop(net, train, None, &config(MNIST_STEPS, weights.map(kmeans), Task::Mnist.default_schedule(), 7))
        .expect("training succeeds");
    let acc = evaluate(&out.net, test).expect("evaluation").value();
    (out, acc)
}

struct MnistResults {
    baseline: f64,
    tanhd32: f64,
    clustered: (TrainOutput, f64),
}

fn mnist_results() -> &'static MnistResults {
    static RESULTS: OnceLock<MnistResults> = OnceLock::new();
    RESULTS.get_or_init(|| MnistResults {
        baseline: mnist_run(&[100, 100], None, None).1,
        tanhd32: mnist_run(&[100, 100], Some(32), None).1,
        clustered: mnist_run(&[100, 100], Some(32), Some(1000)),
    })
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let train = gen_parabola(10_000, 1);
    let test = gen_parabola(2_000, 2);
    let run = |levels: Option<usize>| -> DenseNet {
        let net = Task::Parabola
            .network(&[2], ActivationKind::TanhD, levels, 1024, 3)
            .expect("valid network");
        train_loop(net, &train, None, &config(20_000, None, Task::Parabola.default_schedule(), 4))
            .expect("training succeeds")
            .net
    };
    let binary = run(Some(2));
    let grid: Vec<f64> = (0..=1000).map(|i| -1.0 + 2.0 * i as f64 / 1000.0).collect();
    let mut outputs = binary.predict(&parabola_at(&grid).inputs).expect("predict");
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();
    let distinct = outputs.len();

    let mse = |net: &DenseNet| evaluate(net, &test).expect("evaluation").value();
    let fine = mse(&run(Some(256)));
    let smooth = mse(&run(None));
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        distinct <= 4 && fine <= 2.0 * smooth && elapsed < 60.0,
        format!(
            "TanhD(2) distinct outputs {distinct} (<= 4); MSE TanhD(256) {fine:.3e} vs tanh {smooth:.3e}, \
             ratio {:.2} (<= 2); {elapsed:.1}s (< 60s)",
            fine / smooth
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let r = mnist_results();
    let gap = 100.0 * (r.baseline - r.tanhd32);
    outcome(
        r.baseline >= 0.95 && gap <= 1.0,
        format!(
            "tanh baseline {:.2}% (>= 95%), TanhD(32) {:.2}%, gap {gap:.2} points (<= 1.0); {:.0}s",
            100.0 * r.baseline,
            100.0 * r.tanhd32,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let r = mnist_results();
    let (out, acc) = &r.clustered;
    let distinct = out.net.distinct_parameters();
    let gap = 100.0 * (r.baseline - acc);
    let small_1000 = mnist_run(&[25, 25], Some(32), Some(1000)).1;
    let small_100 = mnist_run(&[25, 25], Some(32), Some(100)).1;
    let drop = 100.0 * (small_1000 - small_100);
    outcome(
        gap <= 1.0 && distinct <= 1000 && drop >= 0.5,
        format!(
            "|W|=1000 TanhD(32) {:.2}% ({distinct} distinct), gap to baseline {gap:.2} (<= 1.0); \
             25-unit |W|=1000 {:.2}% vs |W|=100 {:.2}%, drop {drop:.2} (>= 0.5); {:.0}s",
            100.0 * acc,
            100.0 * small_1000,
            100.0 * small_100,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let Some((train, _)) = mnist() else {
        return outcome(false, "MNIST not found; set MNIST_DIR");
    };
    let images = ImageSet::from_dataset(&train.head(5_000), 28).expect("28x28 images");
    let patches_train = gen_patches(&images, 8, 20_000, 1).expect("patches");
    let patches_test = gen_patches(&images, 8, 2_000, 2).expect("patches");
    let run = |weights: Option<usize>| -> f64 {
        let net = Task::Autoenc
            .network(&[32, 16, 32], ActivationKind::TanhD, Some(32), 256, 5)
            .expect("valid network");
        let out = train_loop(net, &patches_train, None, &config(20_000, weights.map(kmeans), Task::Autoenc.default_schedule(), 6))
            .expect("training succeeds");
        evaluate(&out.net, &patches_test).expect("evaluation").value()
    };
    let baseline = run(None);
    let w1000 = run(Some(1000));
    let w100 = run(Some(100));
    let excess = w100 / w1000 - 1.0;
    let drift = w1000 / baseline - 1.0;
    outcome(
        excess >= 0.10 && drift <= 0.15,
        format!(
            "L2 unclustered {baseline:.4}, |W|=1000 {w1000:.4}, |W|=100 {w100:.4}; \
             |W|=100 excess {:.1}% (>= 10%), |W|=1000 vs unclustered {:+.1}% (<= 15%); {:.0}s",
            100.0 * excess,
            100.0 * drift,
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Least-squares R² of `y` against `x`.
fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy * sxy / (sxx * syy)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    // Laplacian with scale 1 has standard deviation sqrt(2).
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let exp = Exp::new(1.0).expect("rate 1");
    let values: Vec<f64> = (0..100_000)
        .map(|_| {
            let m: f64 = exp.sample(&mut rng);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect();
    let n = 1001;
    let cb = fit_laplacian_codebook(&values, n).expect("codebook");
    let upper = &cb.centers()[n / 2..];
    let deltas: Vec<f64> = upper.windows(2).map(|w| w[1] - w[0]).collect();
    let increasing = deltas.windows(2).all(|w| w[1] > w[0]);

    let mut occupancy = vec![0.0; n];
    for &k in &cb.assign(&values) {
        occupancy[k as usize] += 1.0;
    }
    let occupied: Vec<usize> = (0..n).filter(|&i| occupancy[i] > 0.0).collect();
    let trim = occupied.len() / 10;
    let central = &occupied[trim..occupied.len() - trim];
    let mid = n / 2;
    let offset = |i: usize| i.abs_diff(mid);
    let x: Vec<f64> = central.iter().map(|&i| offset(i) as f64).collect();
    let y: Vec<f64> = central.iter().map(|&i| occupancy[i]).collect();
    let pooled = r_squared(&x, &y);
    // The distribution is symmetric: average each pair of mirror bins.
    let mut offsets: Vec<usize> = central.iter().map(|&i| offset(i)).collect();
    offsets.sort_unstable();
    offsets.dedup();
    let xm: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
    let ym: Vec<f64> = offsets
        .iter()
        .map(|&o| 0.5 * (occupancy[mid + o] + occupancy[mid - o]))
        .collect();
    let r2 = r_squared(&xm, &ym);
    outcome(
        increasing && r2 >= 0.9,
        format!(
            "deltas strictly increasing: {increasing}; mirror-averaged occupancy vs |index| over {} central bins \
             R² {r2:.3} (>= 0.9), unaveraged R² {pooled:.3}; codebook scale {:.3}; {:.2}s",
            central.len(),
            cb.scale,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn compiled_criterion_3() -> Option<&'static LutModel> {
    static MODEL: OnceLock<Option<LutModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            mnist()?;
            let (out, _) = &mnist_results().clustered;
            let options = CompileOptions {
                guard_bits: 8,
                ..CompileOptions::default()
            };
            compile_model(&out.net, out.codebook.as_ref()?, &options).ok()
        })
        .as_ref()
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let source = include_str!("../src/infer.rs");
    let gate = source
        .lines()
        .map(|l| l.split("//").next().unwrap_or(""))
        .all(|l| !l.contains('*') && !l.contains("f32") && !l.contains("f64"));
    let Some(model) = compiled_criterion_3() else {
        return outcome(false, "criterion-3 model unavailable (MNIST missing or compile failed)");
    };
    let (_, test) = mnist().expect("loaded");
    let inputs = &test.head(1000).inputs;
    let report = match conformance(model, inputs) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("conformance failed: {e}")),
    };
    outcome(
        gate && report.unit_agreement() >= 0.9999
            && report.max_deviation <= 1
            && report.argmax_agreement() >= 0.999,
        format!(
            "A={} |W|={} s={}; unit agreement {:.5}% (>= 99.99%), max deviation {} (<= 1), \
             argmax agreement {:.2}% (>= 99.9%) over {} inputs; no-multiply/no-float gate {}; {:.1}s",
            model.levels_count(),
            model.codebook_len(),
            model.s,
            100.0 * report.unit_agreement(),
            report.max_deviation,
            100.0 * report.argmax_agreement(),
            report.samples,
            if gate { "clean" } else { "VIOLATED" },
            start.elapsed().as_secs_f64()
        ),
    )
}

/// A one-layer model with `in_dim · out_dim + out_dim ≈ 10^6` parameters.
fn synthetic_model(levels: usize, k: usize) -> LutModel {
    let (in_dim, out_dim) = (999, 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut draw = |n: usize| -> Vec<u16> { (0..n).map(|_| rng.random_range(0..k) as u16).collect() };
    let spec = ActivationSpec::new(ActivationKind::TanhD, levels).expect("levels");
    let row_levels = spec.level_values().to_vec();
    let mut mult_table: Vec<Vec<i64>> = row_levels
        .iter()
        .map(|l| (0..k).map(|j| (l * (j as f64 - k as f64 / 2.0) * 1e12).round() as i64).collect())
        .collect();
    mult_table.push((0..k).map(|j| ((j as f64 - k as f64 / 2.0) * 1e12) as i64).collect());
    LutModel {
        mult_table,
        row_levels,
        s: 40,
        acc_bits: 64,
        guard_bits: 8,
        dx: 0.2,
        codebook_method: ClusterMethod::KMeans,
        input: InputMap {
            lo: 0.0,
            hi: 1.0,
            kind: ActivationKind::TanhD,
            levels,
            rows: (0..levels as u16).collect(),
        },
        layers: vec![LutLayer {
            in_dim,
            out_dim,
            weight_index: draw(in_dim * out_dim),
            bias_index: draw(out_dim),
            activation: None,
        }],
        head: LutHead::FixedPointRegression,
    }
}

fn criterion_7() -> Outcome {
    let Some(model) = compiled_criterion_3() else {
        return outcome(false, "criterion-3 model unavailable (MNIST missing or compile failed)");
    };
    let raw = estimate_storage(model, IndexEncoding::Raw).expect("raw report");
    let huff = estimate_storage(model, IndexEncoding::Huffman).expect("huffman report");
    let synthetic = synthetic_model(32, 1000);
    let big = estimate_storage(&synthetic, IndexEncoding::Raw).expect("synthetic report");
    let amortized = (big.index_bytes + big.table_bytes) as f64 / (4.0 * big.parameter_count as f64);

    let indices = model.weight_indices();
    let enc = entropy_encode_indices(&indices, model.codebook_len()).expect("encode");
    let lossless = enc.decode().expect("decode") == indices
        && from_bytes(&compiled_to_bytes(model, IndexEncoding::Huffman).expect("bytes")).expect("load")
            == ModelFile::Compiled(model.clone());
    let width = f64::from(fixed_width(1000));
    let entropy_ok = huff.bits_per_index <= width && huff.bits_per_index <= huff.entropy_bits + 1.2;
    let raw_ok = raw.index_ratio_vs_float32 <= 0.33;
    let amortized_ok = amortized <= 0.33;
    outcome(
        raw_ok && amortized_ok && entropy_ok && lossless,
        format!(
            "raw index payload ratio {:.4} (<= 0.33); synthetic {} params index+table ratio {amortized:.4} \
             (<= 0.33, table {} bytes); Huffman {:.3} bits/index (<= {width}), entropy {:.3} \
             (bits <= H + 1.2), whole file ratio {:.4}; lossless {lossless}",
            raw.index_ratio_vs_float32,
            big.parameter_count,
            big.table_bytes,
            huff.bits_per_index,
            huff.entropy_bits,
            huff.ratio_vs_float32,
        ),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let spec = ActivationSpec::new(ActivationKind::TanhD, 1024).expect("levels");
    let mut net = DenseNet::new(&[4, 12, 12, 2], Activation::Quantized(spec), Head::L2Regression, 1)
        .expect("network");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for p in net.parameters_mut() {
        *p = rng.random_range(-0.8..0.8);
    }
    let x: Vec<f64> = (0..256 * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t: Vec<f64> = (0..256 * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let check = gradient_check(&net, &x, Targets::Values(&t), 100, 0.1, 8).expect("gradient check");
    outcome(
        check.max_relative_error <= 1e-3,
        format!(
            "max relative error {:.2e} over {} perturbations (<= 1e-3); {:.1}s",
            check.max_relative_error,
            check.relative_errors.len(),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, fn() -> Outcome, bool); 8] = [
        (1, criterion_1, false),
        (2, criterion_2, true),
        (3, criterion_3, true),
        (4, criterion_4, true),
        (5, criterion_5, false),
        (6, criterion_6, true),
        (7, criterion_7, true),
        (8, criterion_8, false),
    ];
    let mut failed = 0;
    for (n, run, needs_mnist) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let result = if needs_mnist && mnist().is_none() {
            outcome(false, "MNIST not found; set MNIST_DIR or run scripts/fetch_mnist.sh")
        } else {
            run()
        };
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} criterion {n}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
