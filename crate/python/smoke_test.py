#!/usr/bin/env python3
"""Smoke test of the hhf_py extension module.

Build the module first:

    cargo build -p hhf-python --release

The script locates the compiled cdylib under target/, imports it, and
drives the main surfaces end to end: zeta values, packing and retrieval,
loss evaluation, a small training run with and without the hinge clamp,
and checkpoint round-tripping.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_module():
    candidates = [
        REPO / "target" / "release" / "libhhf_py.so",
        REPO / "target" / "debug" / "libhhf_py.so",
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("libhhf_py.so not found; run `cargo build -p hhf-python --release` first")
    stage = Path(tempfile.mkdtemp(prefix="hhf_py_"))
    shutil.copy2(built[0], stage / "hhf_py.so")
    sys.path.insert(0, str(stage))
    import hhf_py

    return hhf_py


def check(name, condition, detail=""):
    status = "ok" if condition else "FAIL"
    print(f"  {name:<42} {status} {detail}")
    if not condition:
        sys.exit(f"smoke test failed at: {name}")


def main():
    hhf = import_module()
    print(f"loaded hhf_py from {hhf.__file__}")

    # --- code bounds ---------------------------------------------------
    check("dimension_for_classes(10) == 4", hhf.dimension_for_classes(10) == 4)
    check("zeta(4, 2) == -1", hhf.zeta(4, 2) == -1.0)
    check(
        "zeta(7, 16) == 1 - 6/7",
        abs(hhf.zeta(7, 16) - (1.0 - 6.0 / 7.0)) < 1e-12,
        f"({hhf.zeta(7, 16):.6f})",
    )
    table = hhf.zeta_table(16, 16)
    check("zeta_table consistent with zeta()", table[(16, 8)] == hhf.zeta(16, 8))
    check("zeta_table K=12,C=2 entry", table[(12, 2)] == -1.0)
    try:
        hhf.zeta(2, 100)
        check("zeta(2, 100) raises", False)
    except ValueError:
        check("zeta(2, 100) raises", True)

    # --- hamming -------------------------------------------------------
    a = [1, -1, 1, -1, 1, 1, 1, 1]
    b = [1, -1, -1, -1, 1, 1, -1, 1]
    check("hamming_distance hand value", hhf.hamming_distance(a, b) == 2)
    db = hhf.CodeDb(8)
    db.add(a, [0])
    db.add(b, [1])
    db.add([-s for s in a], [0])
    check("CodeDb length", len(db) == 3)
    hits = db.top_n(a, 3)
    check("self query at distance 0", hits[0] == (0, 0))
    check("full ranking", [h[0] for h in hits] == [0, 1, 2], f"{hits}")
    check("batch_distances", db.batch_distances(a) == [0, 2, 8])
    check("labels round trip", db.labels(1) == [1])

    # --- metrics anchors -------------------------------------------------
    ap = hhf.average_precision([True, False, True], 3)
    check("AP([r,n,r],3) == 5/6", abs(ap - 5.0 / 6.0) < 1e-15)
    check("hpe of binary codes is 0", hhf.hpe([[1.0, -1.0], [-1.0, 1.0]]) == 0.0)
    check("hpe hand value", abs(hhf.hpe([[0.5, -0.5]]) - 0.5) < 1e-15)
    eg = hhf.eta_global(
        [[0.0, 1.0], [0.0, -1.0], [2.0, 1.0], [2.0, -1.0]],
        [[0], [0], [1], [1]],
    )
    check("eta_global hand value 0.25", abs(eg - 0.25) < 1e-15)

    # --- losses ------------------------------------------------------------
    value, grad_h = hhf.quantization_loss([[0.5, -0.5]], [[0]], norm=2)
    check("quantization value 0.5", abs(value - 0.5) < 1e-15)
    check("quantization gradient", grad_h == [[-1.0, 1.0]])

    # Batch whose positives sit above 1 - delta and whose negatives sit at
    # cos = 0.1, below zeta + delta = 0.2: the hinge clamps everything
    # (zero loss, zero gradients) while the baseline still pushes hard.
    s = math.sqrt(1.0 - 0.01)
    proxies = [[1.0, 0.0], [0.1, s]]
    h = [[2.0, 0.0], [0.3 * 0.1, 0.3 * s]]
    value, grad_h, grad_p = hhf.hhf_proxy_anchor_loss(
        h, [[0], [1]], proxies, zeta=0.0, delta=0.2, alpha=32.0
    )
    check("clamped hinge loss is 0", value == 0.0)
    check(
        "clamped hinge gradients are 0",
        all(g == 0.0 for row in grad_h for g in row)
        and all(g == 0.0 for row in grad_p for g in row),
    )
    value, _, _ = hhf.proxy_anchor_loss(h, [[0], [1]], proxies, alpha=32.0)
    check("baseline loss stays large there", value > 1.0, f"({value:.4f})")

    # --- training: hinge clamp lowers HPE without hurting mAP -----------
    classes, per_class, dim, bits = 8, 100, 32, 16
    features, labels = hhf.synth_gaussian(
        classes, per_class + 20, dim, separation=10.0, noise_sigma=2.0, seed=5
    )
    train_x, train_y, query_x, query_y = [], [], [], []
    for c in range(classes):
        rows = range(c * (per_class + 20), (c + 1) * (per_class + 20))
        for i, r in enumerate(rows):
            if i < per_class:
                train_x.append(features[r])
                train_y.append(labels[r])
            else:
                query_x.append(features[r])
                query_y.append(labels[r])

    z = hhf.zeta(bits, classes)
    reports = {}
    for hinge in (False, True):
        enc = hhf.Encoder(dim, [64], bits, classes, activation="tanh", seed=11)
        history = enc.train(
            train_x,
            train_y,
            epochs=30,
            batch_size=32,
            beta=0.01,
            loss="proxy_anchor",
            hhf=hinge,
            alpha=64.0,
        )
        check(f"history length (hhf={hinge})", len(history) == 30)
        db_latents, db_codes = enc.encode(train_x)
        _, q_codes = enc.encode(query_x)
        reports[hinge] = hhf.evaluate_retrieval(
            db_codes, train_y, q_codes, query_y, db_latents, map_n=100
        )
        if hinge:
            saved = Path(tempfile.mkdtemp(prefix="hhf_ck_")) / "enc.hhfk"
            enc.save(str(saved))
            clone = hhf.Encoder.load(str(saved))
            latents2, codes2 = clone.encode(train_x)
            check("checkpoint round trip encodes identically",
                  latents2 == db_latents and codes2 == db_codes)

    base, hinge = reports[False], reports[True]
    print(f"  baseline: {base!r}")
    print(f"  hinged:   {hinge!r}")
    check("mAP respectable for both", base.map_at_n > 0.9 and hinge.map_at_n > 0.9)
    check("hinge clamp lowers HPE", hinge.hpe < base.hpe,
          f"({base.hpe:.4f} -> {hinge.hpe:.4f})")
    check("mAP within 0.01 of baseline", hinge.map_at_n >= base.map_at_n - 0.01)
    check(
        "recall reaches 1 at the last cutoff",
        abs(base.precision_at[-1][1] - 1.0) < 1e-12,
    )

    # --- CodeDb file round trip -----------------------------------------
    path = Path(tempfile.mkdtemp(prefix="hhf_db_")) / "codes.hhfc"
    db.save(str(path))
    back = hhf.CodeDb.load(str(path))
    check("CodeDb file round trip", len(back) == len(db) and back.bits == db.bits
          and back.batch_distances(a) == db.batch_distances(a))

    # --- multi-label pipeline sanity ------------------------------------
    mfeat, mlab = hhf.synth_multilabel(6, 120, 16, labels_per_sample=2, seed=9)
    check("multi-label cardinality", all(len(s) == 2 for s in mlab))
    enc = hhf.Encoder(16, [32], 12, 6, seed=3)
    enc.train(mfeat, mlab, epochs=5, batch_size=24, beta=0.01, loss="proxy_anchor", hhf=True)
    lat, codes = enc.encode(mfeat)
    rep = hhf.evaluate_retrieval(codes, mlab, codes[:20], mlab[:20], lat,
                                 map_n=20, multi_label=True)
    check("multi-label evaluation runs", 0.0 <= rep.map_at_n <= 1.0, f"{rep!r}")

    sane = math.isfinite(rep.hpe) and math.isfinite(rep.eta_local)
    check("report values finite", sane)

    print("smoke test passed")


if __name__ == "__main__":
    main()
