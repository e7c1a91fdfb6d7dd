use lutnet::format::{checkpoint_to_bytes, from_bytes, Checkpoint, IndexEncoding, ModelFile};
use lutnet::huffman::{empirical_entropy, entropy_encode_indices, fixed_width, pack_fixed, unpack_fixed};
use lutnet::{
    compile_model, estimate_storage, load_model, save_model, Activation, ActivationKind,
    ActivationSpec, CompileOptions, DenseNet, Head, InputQuantizer,
};
use proptest::prelude::*;

fn indices() -> impl Strategy<Value = (usize, Vec<u32>)> {
    (1usize..1500).prop_flat_map(|alphabet| {
        // Mix of uniform and skewed draws.
        let skewed = prop::collection::vec((0u32..alphabet as u32).prop_map(move |v| v % 7), 0..400);
        let uniform = prop::collection::vec(0u32..alphabet as u32, 0..400);
        (Just(alphabet), prop_oneof![uniform, skewed])
    })
}

proptest! {
    #[test]
    fn huffman_round_trip_and_bounds((alphabet, idx) in indices()) {
        let enc = entropy_encode_indices(&idx, alphabet).unwrap();
        prop_assert_eq!(enc.decode().unwrap(), idx.clone());
        if !idx.is_empty() {
            let h = empirical_entropy(&idx, alphabet);
            let bits = enc.bits_per_index();
            prop_assert!(bits + 1e-9 >= h);
            prop_assert!(bits <= h + 1.0 + 1e-9);
            prop_assert!(bits <= f64::from(fixed_width(alphabet).max(1)) + 1e-9);
        }
    }

    #[test]
    fn raw_packing_round_trip((alphabet, idx) in indices()) {
        let bytes = pack_fixed(&idx, alphabet).unwrap();
        prop_assert_eq!(bytes.len(), (idx.len() * fixed_width(alphabet) as usize).div_ceil(8));
        prop_assert_eq!(unpack_fixed(&bytes, idx.len(), alphabet).unwrap(), idx);
    }

    #[test]
    fn checkpoint_round_trip(
        hidden in 1usize..8,
        levels in 2usize..12,
        k in 2usize..20,
        seed in any::<u64>(),
        snapped in any::<bool>(),
        huffman in any::<bool>(),
    ) {
        let spec = ActivationSpec::new(ActivationKind::TanhD, levels).unwrap();
        let q = InputQuantizer::new(-1.0, 1.0, spec.clone()).unwrap();
        let mut net = DenseNet::new(&[3, hidden, 2], Activation::Quantized(spec), Head::L2Regression, seed)
            .unwrap()
            .with_input_quantizer(q);
        let params = net.parameters();
        let mut distinct = params.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let codebook = if distinct.len() >= k {
            let cb = lutnet::clustering::kmeans_1d(&params, k, 30).unwrap();
            if snapped {
                net.snap_to(&cb);
            }
            Some(cb)
        } else {
            None
        };
        let enc = if huffman { IndexEncoding::Huffman } else { IndexEncoding::Raw };
        let ckpt = Checkpoint { net, codebook };
        let bytes = checkpoint_to_bytes(&ckpt, enc).unwrap();
        prop_assert_eq!(from_bytes(&bytes).unwrap(), ModelFile::Checkpoint(ckpt));
    }

    #[test]
    fn any_flipped_byte_is_detected(pos in any::<prop::sample::Index>(), bit in 0u8..8) {
        let spec = ActivationSpec::new(ActivationKind::Relu6D, 5).unwrap();
        let net = DenseNet::new(&[2, 3, 1], Activation::Quantized(spec), Head::L2Regression, 1).unwrap();
        let mut bytes = checkpoint_to_bytes(&Checkpoint { net, codebook: None }, IndexEncoding::Raw).unwrap();
        let i = pos.index(bytes.len());
        bytes[i] ^= 1 << bit;
        prop_assert!(from_bytes(&bytes).is_err());
    }
}

#[test]
fn compiled_model_file_round_trip_on_disk() {
    let spec = ActivationSpec::new(ActivationKind::TanhD, 8).unwrap();
    let q = InputQuantizer::new(0.0, 1.0, ActivationSpec::new(ActivationKind::TanhD, 16).unwrap()).unwrap();
    let mut net = DenseNet::new(&[10, 6, 4], Activation::Quantized(spec), Head::SoftmaxCrossEntropy, 3)
        .unwrap()
        .with_input_quantizer(q);
    let cb = lutnet::clustering::kmeans_1d(&net.parameters(), 12, 40).unwrap();
    net.snap_to(&cb);
    let model = compile_model(&net, &cb, &CompileOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let raw_path = dir.path().join("raw.qfge");
    let huff_path = dir.path().join("huff.qfge");
    let file = ModelFile::Compiled(model.clone());
    save_model(&file, &raw_path, IndexEncoding::Raw).unwrap();
    save_model(&file, &huff_path, IndexEncoding::Huffman).unwrap();
    assert_eq!(load_model(&raw_path).unwrap(), file);
    assert_eq!(load_model(&huff_path).unwrap(), file);
    for (enc, path) in [(IndexEncoding::Raw, &raw_path), (IndexEncoding::Huffman, &huff_path)] {
        let report = estimate_storage(&model, enc).unwrap();
        assert_eq!(report.total_bytes as u64, std::fs::metadata(path).unwrap().len());
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_model("/nonexistent/model.qfge").unwrap_err();
    assert!(matches!(err, lutnet::Error::Io(_)));
}
