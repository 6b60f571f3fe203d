"""End to end: plan, compensate, quantize, pack, report, reconstruct.

The ablation ladder mirrors how the pieces compose: plain 2-bit
codebooks, then adaptive precision, then outlier reservation, then both
at once (the fusion configuration). Compensation is on throughout: after
each column is quantized, its error is pushed onto the not-yet-quantized
columns through the inverse calibration Hessian.
"""

import tempfile
from pathlib import Path

import numpy as np

from claq import (
    ClusterConfig,
    compute_hessian,
    dequantize_tensor,
    load_packed,
    measure_size,
    plan_fusion,
    quantize_model,
    save_packed,
    synthetic_calibration,
    synthetic_model,
)
from claq.quantize import matrix_seed

model = synthetic_model(n_matrices=4, rows=256, cols=256, seed=42)
params = sum(w.data.size for w in model)
print(f"model: {len(model)} matrices, {params:,} parameters")

# === CALIBRATION HESSIANS (SEEDED SYNTHETIC ACTIVATIONS) ===
hessians = {
    w.name: compute_hessian(
        synthetic_calibration(w.cols, count=128, seed=matrix_seed(7, w.name)),
        dim=w.cols,
    )
    for w in model
}
cfg = ClusterConfig(seed=3)

# === THE ABLATION LADDER ===
ladder = [
    ("plain 2-bit", dict(custom=(2, 0.0, 0.0))),
    ("+ adaptive precision (2.2)", dict(custom=(2, 0.2, 0.0))),
    ("+ outlier reservation (0.28)", dict(custom=(2, 0.0, 0.28))),
    ("fusion: AP + OR", dict(custom=(2, 0.2, 0.28))),
    ("preset 2.12", dict(preset="2.12")),
    ("preset 2.24", dict(preset="2.24")),
]
final_packed = None
for label, kwargs in ladder:
    alloc = plan_fusion(model, **kwargs)
    packed, reports = quantize_model(model, alloc, cfg, hessians, threads=4)
    err = sum(r.frobenius_error**2 for r in reports) ** 0.5
    size = measure_size(packed)
    print(
        f"{label:30s} index-only {size.equivalent_bits_index_only:5.3f} "
        f"(total {size.equivalent_bits_total:5.3f}) bits/param   error {err:8.3f}"
    )
    final_packed = packed

# === PACK, RELOAD, RECONSTRUCT (LAST CONFIG: PRESET 2.24) ===
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.claq"
    save_packed(final_packed, path)
    print(f"\ncontainer: {path.stat().st_size:,} bytes on disk")
    reloaded = load_packed(path)
    assert len(reloaded) == len(final_packed)
    w0 = model.matrices[0]
    recon = dequantize_tensor(reloaded[0])
    rel = np.linalg.norm(w0.data - recon.data) / np.linalg.norm(w0.data)
    print(f"first matrix relative reconstruction error: {rel:.4f}")
    fp16_native = params * 16
    packed_bits = (
        measure_size(reloaded).equivalent_bits_total * params
    )
    print(f"compression vs float16: {fp16_native / packed_bits:.1f}x")
