"""Acceptance suite: one test per release criterion, stated tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line
per criterion. Every test is seeded and deterministic.
"""

import struct
import subprocess
import sys
import time

import numpy as np

from claq.allocation import ColumnPlan, plan_fusion, uniform_plan
from claq.hessian import compute_hessian, synthetic_calibration
from claq.kmeans import assign, exact_cluster_1d, lloyd_cluster
from claq.outliers import outlier_ratio, threshold_for_fraction
from claq.packed import (
    OUTLIER_BITS,
    PackedTensor,
    dequantize_tensor,
    load_packed,
    measure_size,
    pack_container,
    save_packed,
)
from claq.quantize import ClusterConfig, matrix_seed, quantize_matrix, quantize_matrix_plain, quantize_model
from claq.search import MatrixStat, SearchConfig, heuristic_search
from claq.synthetic import synthetic_model
from claq.weights import WeightMatrix, save_model

from conftest import random_packed_tensor
from test_search import brute_force as search_brute_force


def report(criterion: str) -> None:
    print(f"[ACCEPTANCE] {criterion}: PASS")


def test_criterion_1_clustering_oracle_equivalence():
    start = time.monotonic()
    rng = np.random.default_rng(20240601)
    ordering_violations = 0
    separated_within = 0
    separated_total = 0
    for i in range(500):
        n = int(rng.integers(8, 513))
        bits = int(rng.choice([2, 3, 4]))
        k = 1 << bits
        if i % 2 == 0:
            # well separated: one tight blob per centroid
            centers = np.arange(k) * 10.0 + rng.normal(0, 0.5, size=k)
            v = rng.choice(centers, size=n) + rng.normal(0, 0.05, size=n)
            separated = True
        else:
            sampler = rng.choice(["normal", "t", "uniform"])
            if sampler == "normal":
                v = rng.normal(0, rng.uniform(0.1, 5), size=n)
            elif sampler == "t":
                v = rng.standard_t(df=3, size=n)
            else:
                v = rng.uniform(-4, 4, size=n)
            separated = False
        exact = exact_cluster_1d(v, bits)
        lloyd = lloyd_cluster(v, bits, seed=int(rng.integers(2**63)))
        # guard for summation-order noise when both find the same partition:
        # a real optimality gap on continuous data is many orders larger
        if exact.wcss > lloyd.wcss + 1e-9 * max(1.0, lloyd.wcss):
            ordering_violations += 1
        if separated:
            separated_total += 1
            if lloyd.wcss <= exact.wcss * 1.05 + 1e-12:
                separated_within += 1
    elapsed = time.monotonic() - start
    assert ordering_violations == 0
    assert separated_within / separated_total >= 0.90
    assert elapsed < 30.0
    report(
        f"criterion 1 clustering oracle ({separated_within}/{separated_total} "
        f"well-separated within 5%, {elapsed:.1f}s)"
    )


def test_criterion_2_nearest_centroid_tie_rules():
    rng = np.random.default_rng(77)
    violations = 0
    for _ in range(10_000):
        k = int(rng.choice([4, 8, 16]))
        cents = np.sort(rng.normal(0, rng.uniform(0.5, 10), size=k))
        if rng.random() < 0.2 and k >= 2:
            q = int(rng.integers(0, k - 1))
            value = (cents[q] + cents[q + 1]) / 2  # engineered exact tie
        else:
            value = float(rng.normal(0, 10))
        got = int(assign(np.array([value]), cents)[0])
        want = min(range(k), key=lambda q: (abs(cents[q] - value), q))
        violations += got != want
    assert violations == 0
    report("criterion 2 nearest-centroid argmin with lower-index ties (10k pairs)")


def test_criterion_3_outlier_metric():
    rng = np.random.default_rng(99)
    for trial in range(100):
        rows = int(rng.integers(4, 40))
        cols = int(rng.integers(2, 30))
        data = rng.standard_t(df=3, size=(rows, cols)) * rng.uniform(0.05, 4)
        w = WeightMatrix("m", data)
        s1, s2 = sorted(rng.uniform(0.5, 15, size=2))
        p1 = outlier_ratio(w, s1)
        # brute-force recount
        mean_abs = sum(abs(x) for x in data.ravel().tolist()) / data.size
        for j in range(cols):
            count = sum(1 for i in range(rows) if abs(data[i, j]) > s1 * mean_abs)
            assert p1.ratios[j] == count / rows
        # monotonicity in the scale
        p2 = outlier_ratio(w, s2)
        assert (p1.ratios >= p2.ratios).all()
        # positive-scale invariance of ratios, order, and selections
        factor = float(rng.choice([0.25, 0.5, 2.0, 4.0, 1024.0, rng.uniform(0.1, 9)]))
        scaled = outlier_ratio(WeightMatrix("m", data * factor), s1)
        assert (scaled.ratios == p1.ratios).all()
        assert (scaled.order == p1.order).all()
        f = float(rng.uniform(0.05, 1.0))
        assert (
            threshold_for_fraction(scaled, f)[1] == threshold_for_fraction(p1, f)[1]
        ).all()
    report("criterion 3 outlier metric recount, S-monotonicity, scale invariance")


def test_criterion_4_bit_accounting(tmp_path):
    # 10% of columns at 4-bit reports exactly 2.2 index-only
    bits = np.array([4] * 100 + [2] * 900)
    t = PackedTensor(
        name="t", rows=128, cols=1000, precision_map=bits,
        codebooks=[np.zeros(1 << b, dtype=np.float16) for b in bits],
        indices=np.zeros((128, 1000), dtype=np.uint8),
    )
    assert measure_size([t]).equivalent_bits_index_only == 2.2

    # fusion presets decompose to their labels within 0.01
    model = synthetic_model(n_matrices=4, rows=256, cols=512, seed=11)
    for preset, label in (("2.12", 2.12), ("2.24", 2.24)):
        alloc = plan_fusion(model, preset=preset)
        params = sum(p.rows * p.cols for p in alloc.plans.values())
        or_overhead = sum(p.total_reserved for p in alloc.plans.values()) * OUTLIER_BITS / params
        attributed = alloc.achieved_bits_index_only + or_overhead
        assert abs(attributed - label) <= 0.01, (preset, attributed)

    # serialized file size equals the bit totals plus header/manifest/padding
    rng = np.random.default_rng(12)
    tensors = [random_packed_tensor(rng, name=f"t{i}") for i in range(6)]
    path = tmp_path / "acc4.claq"
    save_packed(tensors, path)
    raw = path.read_bytes()
    manifest_len = struct.unpack("<I", raw[8:12])[0]
    pad8 = lambda n: (n + 7) & ~7
    expected = pad8(12 + manifest_len)
    for t in tensors:
        r = measure_size([t])
        expected += pad8(r.codebook_bits // 8) + pad8((r.index_bits + 7) // 8) + pad8(r.outlier_bits // 8)
    assert len(raw) == expected
    report("criterion 4 bit accounting (2.2 exact, presets within 0.01, file-size identity)")


def test_criterion_5_container_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    path = tmp_path / "acc5.claq"
    for i in range(1000):
        t = random_packed_tensor(rng, name=f"t{i}")
        save_packed([t], path)
        first = path.read_bytes()
        assert pack_container(load_packed(path)) == first
    golden = PackedTensor(
        name="g", rows=4, cols=1, precision_map=np.array([2]),
        codebooks=[np.array([0, 1, 2, 3], dtype=np.float16)],
        indices=np.array([[0], [1], [2], [3]]),
    )
    assert golden.index_bytes() == bytes([0b11100100])
    report("criterion 5 container round trip (1000 fixtures) and golden byte")


def test_criterion_6_compensation_sanity():
    start = time.monotonic()
    # diagonal-Hessian equivalence on 50 fixtures
    for trial in range(50):
        rng = np.random.default_rng(3000 + trial)
        dim = int(rng.integers(4, 16))
        rows = int(rng.integers(8, 32))
        calib = np.eye(dim) * rng.uniform(0.5, 2.0, size=(dim, 1))
        h = compute_hessian(calib, dim=dim)
        w = WeightMatrix("m", rng.normal(size=(rows, dim)))
        counts = np.zeros(dim, dtype=int)
        counts[:: max(1, dim // 3)] = 2
        plan = ColumnPlan(rows=rows, bits=np.full(dim, 2), outlier_counts=counts)
        cfg = ClusterConfig(seed=trial)
        comp = dequantize_tensor(quantize_matrix(w, plan, h, cfg)[0]).data
        plain = dequantize_tensor(quantize_matrix_plain(w, plan, cfg)[0]).data
        assert np.max(np.abs(comp - plain)) <= 1e-9

    # dense-Hessian proxy improvement on 100 fixtures
    wins, comp_losses, plain_losses = 0, [], []
    for trial in range(100):
        rng = np.random.default_rng(4000 + trial)
        w = WeightMatrix("m", rng.normal(size=(16, 16)))
        h = compute_hessian(rng.normal(size=(8, 16)), dim=16)
        plan = uniform_plan(16, 16, 2)
        cfg = ClusterConfig(seed=trial)
        comp, _ = quantize_matrix(w, plan, h, cfg)
        plain, _ = quantize_matrix_plain(w, plan, cfg)
        dc = w.data - dequantize_tensor(comp).data
        dp = w.data - dequantize_tensor(plain).data
        lc = float(np.sum((dc @ h.matrix) * dc))
        lp = float(np.sum((dp @ h.matrix) * dp))
        comp_losses.append(lc)
        plain_losses.append(lp)
        wins += lc <= lp
    elapsed = time.monotonic() - start
    assert wins >= 95, wins
    assert np.mean(comp_losses) < np.mean(plain_losses)
    assert elapsed < 60.0
    report(
        f"criterion 6 compensation sanity ({wins}/100 proxy wins, "
        f"mean {np.mean(comp_losses):.1f} vs {np.mean(plain_losses):.1f}, {elapsed:.1f}s)"
    )


def test_criterion_7_monotonicity_exact_solver():
    rng = np.random.default_rng(14)
    # upgrading 2-bit columns to 4-bit never increases per-column WCSS
    for trial in range(25):
        n = int(rng.integers(20, 200))
        v = rng.standard_t(df=3, size=n) * rng.uniform(0.1, 3)
        w2 = exact_cluster_1d(v, 2).wcss
        w4 = exact_cluster_1d(v, 4).wcss
        assert w4 <= w2
    # growing a column's reservation never increases plain-path error
    for trial in range(15):
        rows = int(rng.integers(24, 64))
        w = WeightMatrix("m", rng.standard_t(df=3, size=(rows, 2)))
        cfg = ClusterConfig(seed=trial, use_exact_solver=True)
        prev = None
        for reserved in (0, 2, 4, 6, 10):
            plan = ColumnPlan(
                rows=rows, bits=np.array([2, 2]), outlier_counts=np.array([reserved, 0])
            )
            _, rep = quantize_matrix_plain(w, plan, cfg)
            if prev is not None:
                assert rep.frobenius_error <= prev + 1e-12
            prev = rep.frobenius_error
    report("criterion 7 monotonicity in bits and reservation (exact solver)")


def test_criterion_8_heuristic_search_equals_brute_force():
    rng = np.random.default_rng(15)
    for trial in range(20):
        n = int(rng.integers(1, 13))
        stats = [
            MatrixStat(
                name=f"m{i}", rows=int(rng.integers(8, 64)), cols=int(rng.integers(8, 64)),
                outlier_ratio=float(rng.uniform(0, 0.25)),
            )
            for i in range(n)
        ]
        grid = tuple(
            sorted(set(round(float(x), 3) for x in rng.uniform(0.05, 0.6, size=int(rng.integers(2, 10)))))
        )
        config = SearchConfig(
            target_bits=float(rng.uniform(2.0, 3.4)), p3_grid=grid, p4_grid=grid
        )
        expected = search_brute_force(stats, config)
        got = heuristic_search(stats, config)
        assert (got.m4, got.m3, got.p4, got.p3, got.ps_total) == expected
    report("criterion 8 heuristic search equals brute force (20 configs)")


def test_criterion_9_end_to_end_ablation_direction():
    start = time.monotonic()
    model = synthetic_model(n_matrices=8, rows=512, cols=512, seed=42)
    hessians = {
        w.name: compute_hessian(
            synthetic_calibration(w.cols, 128, seed=matrix_seed(7, w.name)), dim=w.cols
        )
        for w in model
    }
    cfg = ClusterConfig(seed=3)

    def total_error(alloc):
        _, reports = quantize_model(model, alloc, cfg, hessians, threads=4)
        return sum(r.frobenius_error**2 for r in reports) ** 0.5

    chain = [
        ("plain 2-bit", plan_fusion(model, custom=(2, 0.0, 0.0))),
        ("+AP 2.2", plan_fusion(model, custom=(2, 0.2, 0.0))),
        ("+OR setting 2", plan_fusion(model, custom=(2, 0.0, 0.28))),
        ("AP+OR fusion", plan_fusion(model, custom=(2, 0.2, 0.28))),
    ]
    errors = [(name, total_error(alloc)) for name, alloc in chain]
    for (_, worse), (_, better) in zip(errors, errors[1:]):
        assert better < worse, errors
    elapsed = time.monotonic() - start
    assert elapsed < 300.0
    chain_str = " > ".join(f"{name}={err:.2f}" for name, err in errors)
    report(f"criterion 9 ablation direction ({chain_str}, {elapsed:.0f}s)")


def test_criterion_10_cli_determinism(tmp_path):
    import os

    model = synthetic_model(n_matrices=2, rows=64, cols=48, seed=21)
    manifest = tmp_path / "model.json"
    save_model(model, manifest)
    out = tmp_path / "d.claq"

    def run(threads):
        env = dict(os.environ)
        env["CLAQ_THREADS"] = threads
        proc = subprocess.run(
            [sys.executable, "-m", "claq.cli", "quantize", str(manifest),
             "--preset", "2.12", "--calib", "synthetic:5", "--out", str(out)],
            capture_output=True, text=True, env=env,
        )
        assert proc.returncode == 0, proc.stderr
        return out.read_bytes(), (tmp_path / "d.claq.report.json").read_text()

    first = run("1")
    second = run("1")
    third = run("3")
    assert first == second == third
    report("criterion 10 determinism across reruns and CLAQ_THREADS")
