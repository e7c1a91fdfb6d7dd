"""Smoke test for the lutnet_py extension.

Build and install it first:
    pip install --no-build-isolation ./crates/python
then run:
    python python/smoke.py
"""

import math
import os
import tempfile

import lutnet_py as ln


def main():
    spec = ln.ActivationSpec("tanhd", 8)
    assert len(spec.levels) == 8
    idx, value = spec.quantize(0.3)
    assert spec.levels[idx] == value

    top = ln.laplacian_levels(101)[-1]
    assert abs(top - math.log(101)) < 1e-9

    centers = ln.kmeans([0.0, 0.1, 5.0, 5.1], 2)
    assert abs(centers[0] - 0.05) < 1e-12 and abs(centers[1] - 5.05) < 1e-12

    xs, ys = ln.parabola(2000, seed=1)
    net = ln.Network.for_task("parabola", hidden=[8], levels=64, seed=3)
    history = net.train(xs, ys, steps=800, lr=0.05, weights=15,
                        cluster_method="laplacian", cluster_every=200, seed=4)
    assert history[-1]["distinct_weights"] <= 15
    assert len(net.codebook) == 15

    model = net.compile()
    out = model.infer([0.5])
    float_out = net.predict([0.5])[0]
    assert abs(out["outputs"][0] - float_out) < 1e-6, (out, float_out)

    report = model.conformance(xs[:500])
    assert report["out_of_band"] == 0, report
    storage = model.storage("huffman")
    assert storage["total_bytes"] == (storage["index_bytes"] + storage["table_bytes"]
                                      + storage["header_bytes"])

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "m.qfge")
        model.save(path)
        again = ln.load(path)
        assert again.infer([0.5]) == out
        net.save(os.path.join(d, "c.qfge"))
        assert ln.load(os.path.join(d, "c.qfge")).codebook == net.codebook

    print("smoke ok: A=%d |W|=%d s=%d, f(0.5)=%.4f" %
          (model.levels, model.codebook_len, model.scale_shift, out["outputs"][0]))


if __name__ == "__main__":
    main()
