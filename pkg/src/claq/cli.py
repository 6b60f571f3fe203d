"""Command-line surface: quantize, dequantize, report, stats, search.

Every artifact written by a subcommand embeds the full run configuration
and a SHA-256 of the input file, so any output can be traced back to the
exact invocation that produced it. JSON artifacts carry those fields
inline; CSV artifacts carry them as a leading ``#`` comment line above
the documented header row.

Exit codes: 0 success, 2 validation error, 3 numerical abort,
4 infeasible budget. The worker pool size comes from ``--threads`` or the
``CLAQ_THREADS`` environment variable; it never affects the output bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import click

from .allocation import (
    DEFAULT_SPLIT,
    DEFAULT_TOP_FRACTION,
    FUSION_PRESETS,
    ModelAllocation,
    plan_fusion,
    save_allocation,
)
from .errors import ClaqError, ValidationError
from .hessian import compute_hessian, synthetic_calibration
from .kmeans import DEFAULT_MAX_ITER, DEFAULT_TOL
from .outliers import DEFAULT_SCALE, model_outlier_stats, outlier_ratio
from .packed import dequantize_tensor, load_packed, measure_size, save_packed
from .quantize import ClusterConfig, quantize_model
from .search import SearchConfig, heuristic_search, matrix_stats_from_model
from .synthetic import synthetic_model
from .weights import ModelWeights, load_model, save_model

STATS_MATRIX_HEADER = ["matrix_name", "cols", "total_outlier_fraction", "top_decile_share", "max_Rj"]
STATS_COLUMN_HEADER = ["matrix_name", "rank", "column_index", "outlier_ratio"]
STATS_LAYER_HEADER = ["layer", "total_outlier_fraction"]
REPORT_CSV_HEADER = [
    "matrix_name", "rows", "cols", "outlier_count", "index_bits", "codebook_bits",
    "outlier_bits", "precision_map_bits", "equivalent_bits_index_only",
    "equivalent_bits_total",
]


@dataclass
class RunConfig:
    """Everything that determines the output of one invocation."""

    subcommand: str
    input_path: str
    output_path: str | None = None
    preset: str | None = None
    base_bits: int | None = None
    ap_increment: float | None = None
    ap_bit_pair: tuple[int, int] | None = None
    or_budget: float | None = None
    or_split: tuple[float, float] = DEFAULT_SPLIT
    top_fraction: float = DEFAULT_TOP_FRACTION
    outlier_scale: float = DEFAULT_SCALE
    cluster_seed: int = 0
    cluster_max_iter: int = DEFAULT_MAX_ITER
    cluster_tol: float = DEFAULT_TOL
    calibration: str = "synthetic:0"
    calibration_count: int = 128
    damp_ratio: float = 0.01
    compensate: bool = True
    exact_solver: bool = False
    refit_on_original: bool = False
    act_order: bool = False
    target_bits: float | None = None

    def echo(self) -> dict:
        return asdict(self)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _thread_count(option: int | None) -> int | None:
    if option is not None:
        return option
    env = os.environ.get("CLAQ_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"CLAQ_THREADS must be an integer, got {env!r}")
    return None


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows: list[list], meta: dict) -> None:
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def _parse_pair(text: str, what: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValidationError(f"{what} must be two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def _load_input_model(path: str) -> tuple[ModelWeights, str]:
    p = Path(path)
    model = load_model(p)
    return model, _sha256(p)


def _build_allocation(model: ModelWeights, cfg: RunConfig) -> ModelAllocation:
    if cfg.preset is not None:
        return plan_fusion(
            model, preset=cfg.preset, scale=cfg.outlier_scale,
            split=cfg.or_split, top_fraction=cfg.top_fraction,
        )
    return plan_fusion(
        model,
        custom=(cfg.base_bits, cfg.ap_increment, cfg.or_budget),
        bit_pair=cfg.ap_bit_pair,
        scale=cfg.outlier_scale,
        split=cfg.or_split,
        top_fraction=cfg.top_fraction,
    )


def _calibration_for(model: ModelWeights, cfg: RunConfig, manifest_dir: Path) -> dict:
    """Per-matrix Hessians from a calibration source spec.

    ``synthetic:<seed>`` draws seeded Gaussian vectors per matrix;
    anything else is a manifest path whose tensors (named like the target
    matrices) hold activation row-vectors.
    """
    from .quantize import matrix_seed

    hessians = {}
    if cfg.calibration.startswith("synthetic:"):
        try:
            seed = int(cfg.calibration.split(":", 1)[1])
        except ValueError:
            raise ValidationError(f"bad synthetic calibration spec {cfg.calibration!r}")
        for w in model:
            x = synthetic_calibration(
                w.cols, count=cfg.calibration_count, seed=matrix_seed(seed, w.name)
            )
            hessians[w.name] = compute_hessian(x, dim=w.cols, damp_ratio=cfg.damp_ratio)
    else:
        calib_path = Path(cfg.calibration)
        if not calib_path.is_absolute():
            candidate = manifest_dir / calib_path
            calib_path = candidate if candidate.exists() else calib_path
        calib = load_model(calib_path)
        for w in model:
            try:
                x = calib.get(w.name).data
            except KeyError:
                raise ValidationError(f"calibration manifest lacks tensor {w.name!r}")
            hessians[w.name] = compute_hessian(x, dim=w.cols, damp_ratio=cfg.damp_ratio)
    return hessians


@click.group()
def cli() -> None:
    """Column-level adaptive weight quantization toolkit."""


@cli.command("quantize")
@click.argument("manifest", type=click.Path())
@click.option("--out", "-o", required=True, help="Output packed container path.")
@click.option("--preset", type=click.Choice(sorted(FUSION_PRESETS)), default=None,
              help="Fusion preset; mutually exclusive with the custom budget flags.")
@click.option("--base-bits", type=int, default=None, help="Uniform base bit width (custom mode).")
@click.option("--ap-increment", type=float, default=None,
              help="Adaptive-precision increment in bits per parameter (custom mode).")
@click.option("--ap-pair", default=None,
              help="High,low bit pair for adaptive precision, e.g. '4,2' or '3,2'.")
@click.option("--or-budget", type=float, default=None,
              help="Outlier-reservation budget in bits per parameter (custom mode).")
@click.option("--or-split", default=None,
              help="Reservation split 'top,rest', default '0.28,0.72'.")
@click.option("--top-fraction", type=float, default=DEFAULT_TOP_FRACTION, show_default=True)
@click.option("--scale", "-s", type=float, default=DEFAULT_SCALE, show_default=True,
              help="Outlier scale S.")
@click.option("--seed", type=int, default=0, show_default=True, help="Clustering seed.")
@click.option("--max-iter", type=int, default=DEFAULT_MAX_ITER, show_default=True)
@click.option("--tol", type=float, default=DEFAULT_TOL, show_default=True)
@click.option("--calib", default="synthetic:0", show_default=True,
              help="Calibration source: 'synthetic:<seed>' or a manifest path.")
@click.option("--calib-count", type=int, default=128, show_default=True,
              help="Vectors per matrix for synthetic calibration.")
@click.option("--damp-ratio", type=float, default=0.01, show_default=True)
@click.option("--no-compensate", is_flag=True, help="Skip Hessian error compensation.")
@click.option("--exact-solver", is_flag=True, help="Use the DP oracle for clustering.")
@click.option("--refit-original", is_flag=True,
              help="Fit codebooks on pre-compensation values.")
@click.option("--act-order", is_flag=True,
              help="Process columns by descending Hessian diagonal.")
@click.option("--threads", "-j", type=int, default=None,
              help="Worker pool size; CLAQ_THREADS is the fallback.")
@click.option("--plan-out", default=None, help="Plan JSON path (default: <out>.plan.json).")
@click.option("--report-out", default=None, help="Report JSON path (default: <out>.report.json).")
def cmd_quantize(manifest, out, preset, base_bits, ap_increment, ap_pair, or_budget,
                 or_split, top_fraction, scale, seed, max_iter, tol, calib, calib_count,
                 damp_ratio, no_compensate, exact_solver, refit_original, act_order,
                 threads, plan_out, report_out):
    """Quantize a manifest+blob model into a packed container."""
    custom_given = any(v is not None for v in (base_bits, ap_increment, or_budget))
    if preset is not None and custom_given:
        raise ValidationError("--preset conflicts with the custom budget flags")
    if preset is None:
        base_bits = base_bits if base_bits is not None else 2
        ap_increment = ap_increment if ap_increment is not None else 0.0
        or_budget = or_budget if or_budget is not None else 0.0

    cfg = RunConfig(
        subcommand="quantize",
        input_path=str(manifest),
        output_path=str(out),
        preset=preset,
        base_bits=base_bits,
        ap_increment=ap_increment,
        ap_bit_pair=_parse_int_pair(ap_pair) if ap_pair else None,
        or_budget=or_budget,
        or_split=_parse_pair(or_split, "--or-split") if or_split else DEFAULT_SPLIT,
        top_fraction=top_fraction,
        outlier_scale=scale,
        cluster_seed=seed,
        cluster_max_iter=max_iter,
        cluster_tol=tol,
        calibration=calib,
        calibration_count=calib_count,
        damp_ratio=damp_ratio,
        compensate=not no_compensate,
        exact_solver=exact_solver,
        refit_on_original=refit_original,
        act_order=act_order,
    )

    model, input_hash = _load_input_model(manifest)
    allocation = _build_allocation(model, cfg)
    hessians = None
    if cfg.compensate:
        hessians = _calibration_for(model, cfg, Path(manifest).parent)

    cluster_cfg = ClusterConfig(
        seed=cfg.cluster_seed,
        max_iter=cfg.cluster_max_iter,
        tol=cfg.cluster_tol,
        use_exact_solver=cfg.exact_solver,
        refit_on_original=cfg.refit_on_original,
        act_order=cfg.act_order,
    )
    packed, reports = quantize_model(
        model, allocation, cluster_cfg, hessians, threads=_thread_count(threads)
    )

    out_path = Path(out)
    save_packed(packed, out_path)
    meta = {"config": cfg.echo(), "input_sha256": input_hash}
    save_allocation(allocation, Path(plan_out or f"{out}.plan.json"), extra=meta)
    _write_json(
        Path(report_out or f"{out}.report.json"),
        _report_payload(packed, reports, meta, base_bits=allocation.config.get("base_bits")),
    )
    size = measure_size(packed)
    click.echo(
        f"packed {len(packed)} tensors -> {out_path} "
        f"({size.equivalent_bits_index_only:.4f} bits/param index-only, "
        f"{size.equivalent_bits_total:.4f} total)"
    )


def _parse_int_pair(text: str) -> tuple[int, int]:
    a, b = _parse_pair(text, "--ap-pair")
    return int(a), int(b)


def _report_payload(packed, reports, meta: dict, base_bits: int | None = None) -> dict:
    size = measure_size(packed)
    total_sq = sum(r.frobenius_error**2 for r in reports)
    proxies = [r.proxy_loss for r in reports if r.proxy_loss is not None]
    or_overhead = size.outlier_bits / size.param_count
    attributed = {
        "index_only": size.equivalent_bits_index_only,
        "outlier_reservation": or_overhead,
        "total_attributed": size.equivalent_bits_index_only + or_overhead,
    }
    if base_bits is not None:
        attributed["base"] = base_bits
        attributed["adaptive_precision"] = size.equivalent_bits_index_only - base_bits
    model_block = {
        "size": size.as_dict(),
        "frobenius_error": total_sq**0.5,
        "proxy_loss_total": sum(proxies) if proxies else None,
        "outlier_count": sum(r.outlier_count for r in reports),
        "attributed_bits": attributed,
    }
    return {
        **meta,
        "model": model_block,
        "matrices": [r.as_dict() for r in reports],
    }


@cli.command("dequantize")
@click.argument("packed_path", type=click.Path())
@click.option("--out", "-o", required=True, help="Output manifest path.")
@click.option("--dtype", type=click.Choice(["f32", "f16"]), default="f32", show_default=True)
def cmd_dequantize(packed_path, out, dtype):
    """Expand a packed container back into a manifest+blob model."""
    tensors = load_packed(packed_path)
    model = ModelWeights(matrices=[dequantize_tensor(t) for t in tensors])
    save_model(model, Path(out), dtype=dtype)
    click.echo(f"dequantized {len(tensors)} tensors -> {out}")


@cli.command("report")
@click.argument("packed_path", type=click.Path())
@click.option("--json-out", default=None, help="Write the size report as JSON.")
@click.option("--csv-out", default=None, help="Write the per-matrix table as CSV.")
def cmd_report(packed_path, json_out, csv_out):
    """Size accounting of an existing packed container."""
    cfg = RunConfig(subcommand="report", input_path=str(packed_path))
    input_hash = _sha256(Path(packed_path))
    tensors = load_packed(packed_path)
    meta = {"config": cfg.echo(), "input_sha256": input_hash}

    size = measure_size(tensors)
    per_matrix = []
    for t in tensors:
        s = measure_size(t)
        per_matrix.append({
            "name": t.name, "rows": t.rows, "cols": t.cols,
            "outlier_count": t.outlier_count,
            **s.as_dict(),
        })
    payload = {**meta, "model": size.as_dict(), "matrices": per_matrix}
    if json_out:
        _write_json(Path(json_out), payload)
    if csv_out:
        rows = [
            [m["name"], m["rows"], m["cols"], m["outlier_count"], m["index_bits"],
             m["codebook_bits"], m["outlier_bits"], m["precision_map_bits"],
             m["equivalent_bits_index_only"], m["equivalent_bits_total"]]
            for m in per_matrix
        ]
        _write_csv(Path(csv_out), REPORT_CSV_HEADER, rows, meta)
    click.echo(json.dumps(payload["model"], indent=2, sort_keys=True))


@cli.command("stats")
@click.argument("manifest", type=click.Path())
@click.option("--scale", "-s", type=float, default=DEFAULT_SCALE, show_default=True)
@click.option("--out-prefix", required=True,
              help="Writes <prefix>_matrices.csv, <prefix>_columns.csv, <prefix>_layers.csv.")
def cmd_stats(manifest, scale, out_prefix):
    """Outlier-distribution statistics of a model, as CSV files."""
    cfg = RunConfig(subcommand="stats", input_path=str(manifest), outlier_scale=scale)
    model, input_hash = _load_input_model(manifest)
    meta = {"config": cfg.echo(), "input_sha256": input_hash}

    per_matrix, layers = model_outlier_stats(model, scale)
    matrix_rows = [
        [m.name, m.cols, m.total_outlier_fraction, m.top_decile_share, m.max_ratio]
        for m in per_matrix
    ]
    _write_csv(Path(f"{out_prefix}_matrices.csv"), STATS_MATRIX_HEADER, matrix_rows, meta)

    column_rows = []
    for w in model:
        profile = outlier_ratio(w, scale)
        for rank, col in enumerate(profile.order.tolist()):
            column_rows.append([w.name, rank, col, float(profile.ratios[col])])
    _write_csv(Path(f"{out_prefix}_columns.csv"), STATS_COLUMN_HEADER, column_rows, meta)

    layer_rows = [[k, v] for k, v in layers.items()]
    _write_csv(Path(f"{out_prefix}_layers.csv"), STATS_LAYER_HEADER, layer_rows, meta)
    click.echo(f"wrote {out_prefix}_matrices.csv, _columns.csv, _layers.csv")


@cli.command("search")
@click.argument("manifest", type=click.Path())
@click.option("--target-bits", type=float, required=True,
              help="Size budget in equivalent bits per parameter (index-only).")
@click.option("--scale", "-s", type=float, default=DEFAULT_SCALE, show_default=True)
@click.option("--p-grid", default=None,
              help="Comma-separated column fractions, default 0.05..0.60 step 0.05.")
@click.option("--verify-exhaustive", is_flag=True,
              help="Re-derive the result with an independent enumerator and compare.")
@click.option("--out", "-o", default=None, help="Write the result JSON here.")
def cmd_search(manifest, target_bits, scale, p_grid, verify_exhaustive, out):
    """Pick the best per-matrix precision mixture under a size budget."""
    cfg = RunConfig(
        subcommand="search", input_path=str(manifest),
        outlier_scale=scale, target_bits=target_bits,
    )
    model, input_hash = _load_input_model(manifest)
    stats = matrix_stats_from_model(model, scale)

    grid_kwargs = {}
    if p_grid:
        values = tuple(float(v) for v in p_grid.split(","))
        grid_kwargs = {"p3_grid": values, "p4_grid": values}
    search_cfg = SearchConfig(target_bits=target_bits, **grid_kwargs)
    result = heuristic_search(stats, search_cfg)

    verified = None
    if verify_exhaustive:
        from itertools import product

        order = sorted(range(len(stats)), key=lambda i: (-stats[i].outlier_ratio, i))
        ranked = [stats[i] for i in order]
        params_total = sum(s.rows * s.cols for s in stats)
        from .outliers import top_count as _tc

        best_key, best_combo = None, None
        n = len(stats)
        for m4, m3 in product(range(n + 1), repeat=2):
            if m4 + m3 > n:
                continue
            or4 = sum(s.outlier_ratio for s in ranked[:m4]) / m4 if m4 else 0.0
            or3 = sum(s.outlier_ratio for s in ranked[m4:m4 + m3]) / m3 if m3 else 0.0
            for p4, p3 in product(search_cfg.p4_grid, search_cfg.p3_grid):
                bits = sum(2 * s.rows * s.cols for s in stats)
                bits += sum(2 * s.rows * _tc(s.cols, p4) for s in ranked[:m4])
                bits += sum(1 * s.rows * _tc(s.cols, p3) for s in ranked[m4:m4 + m3])
                if bits > target_bits * params_total:
                    continue
                ps = or4 * search_cfg.ps4 * p4 * m4 + or3 * search_cfg.ps3 * p3 * m3
                key = (ps, m4, p4, -m3, p3)
                if best_key is None or key > best_key:
                    best_key, best_combo = key, (m4, m3, p4, p3)
        verified = best_combo == (result.m4, result.m3, result.p4, result.p3)
        if not verified:
            raise ValidationError(
                f"exhaustive verification disagrees: {best_combo} vs "
                f"{(result.m4, result.m3, result.p4, result.p3)}"
            )

    payload = {
        "config": cfg.echo(),
        "input_sha256": input_hash,
        "chosen": {"m3": result.m3, "m4": result.m4, "p3": result.p3, "p4": result.p4},
        "ps_total": result.ps_total,
        "achieved_bits_index_only": result.achieved_bits,
        "categories": result.categories,
        "verified_exhaustive": verified,
    }
    if out:
        _write_json(Path(out), payload)
    click.echo(json.dumps(payload["chosen"], sort_keys=True))


@cli.command("synthesize")
@click.option("--out", "-o", required=True, help="Output manifest path.")
@click.option("--matrices", type=int, default=8, show_default=True)
@click.option("--rows", type=int, default=512, show_default=True)
@click.option("--cols", type=int, default=512, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_synthesize(out, matrices, rows, cols, seed):
    """Generate the seeded heavy-tailed fixture model (for demos and tests)."""
    model = synthetic_model(n_matrices=matrices, rows=rows, cols=cols, seed=seed)
    save_model(model, Path(out))
    click.echo(f"wrote {matrices} matrices of {rows}x{cols} -> {out}")


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except ClaqError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
