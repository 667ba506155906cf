"""PSNR per prediction horizon, pooled over windows, with a persistence baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .autodiff import ShapeError, no_grad
from .data import iter_batches
from .generative import GenerativeModel

PERFECT = "perfect"


def psnr(x, y, peak: float) -> float:
    """``10 log10(peak^2 / mean((x - y)^2))`` in dB; ``inf`` when the two agree exactly."""
    x = np.asarray(getattr(x, "data", x), dtype=np.float64)
    y = np.asarray(getattr(y, "data", y), dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"psnr: {x.shape} vs {y.shape}")
    if not peak > 0:
        raise ValueError(f"peak must be positive, got {peak}")
    return psnr_from_mse(float(np.mean((x - y) ** 2)), peak)


def psnr_from_mse(mse: float, peak: float) -> float:
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def format_psnr(value: float) -> str:
    return PERFECT if math.isinf(value) else f"{value:.6f}"


@dataclass
class EvalReport:
    horizon_psnr: list          # index h - 1 holds horizon h
    aggregate: float
    per_sequence: list
    peak: float
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["horizon,psnr"]
        lines += [f"{h},{format_psnr(v)}" for h, v in enumerate(self.horizon_psnr, start=1)]
        lines.append(f"aggregate,{format_psnr(self.aggregate)}")
        return "\n".join(lines) + "\n"

    def sequences_csv(self) -> str:
        lines = ["sequence,psnr"] + [f"{i},{format_psnr(v)}" for i, v in enumerate(self.per_sequence)]
        return "\n".join(lines) + "\n"


def score(predictions: np.ndarray, truth: np.ndarray, peak: float, config: Optional[dict] = None) -> EvalReport:
    """Pool squared errors of [N, C, n, H, W] predictions per horizon and overall.

    Sums run in a fixed order (window, then horizon) in float64.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predictions.shape != truth.shape or predictions.ndim != 5:
        raise ShapeError(f"predictions {predictions.shape} vs truth {truth.shape}")
    if len(truth) == 0:
        raise ValueError("nothing to evaluate")
    sq = (predictions - truth) ** 2
    per_horizon = sq.mean(axis=(0, 1, 3, 4))
    per_sequence = sq.mean(axis=(1, 2, 3, 4))
    return EvalReport(
        [psnr_from_mse(float(m), peak) for m in per_horizon],
        psnr_from_mse(float(sq.mean()), peak),
        [psnr_from_mse(float(m), peak) for m in per_sequence],
        peak,
        dict(config or {}),
    )


def persistence(windows: np.ndarray, t: int) -> np.ndarray:
    """Repeat the last observed frame for every future step."""
    n = windows.shape[2] - t
    return np.repeat(windows[:, :, t - 1:t], n, axis=2)


def predict_windows(model: GenerativeModel, windows: np.ndarray, t: int, batch_size: int = 8) -> np.ndarray:
    """Model predictions for every window -> [N, C, n, H, W] (no graph is recorded)."""
    spec = model.spec
    if windows.shape[1] != spec.in_channels or windows.shape[3:] != (spec.height, spec.width):
        raise ShapeError(f"windows {windows.shape[1:]} do not match model "
                         f"[{spec.in_channels}, *, {spec.height}, {spec.width}]")
    n = windows.shape[2] - t
    out = []
    with no_grad():
        for batch in iter_batches(windows, batch_size, t):
            result = model(batch.past, n=n)
            out.append(np.stack([f.data for f in result.predictions], axis=2))
    return np.concatenate(out, axis=0)


def evaluate(model: GenerativeModel, windows: np.ndarray, t: int = 16, peak: Optional[float] = None,
             batch_size: int = 8) -> tuple[EvalReport, EvalReport]:
    """Model report and persistence-baseline report on the same windows.

    ``peak`` defaults to the largest absolute ground-truth value in ``windows``.
    """
    if len(windows) == 0:
        raise ValueError("no test windows")
    if peak is None:
        peak = float(np.abs(windows).max())
    truth = windows[:, :, t:]
    config = {"model": model.spec.kind, "windows": len(windows), "t": t, "n": truth.shape[2], "peak": peak}
    model_report = score(predict_windows(model, windows, t, batch_size), truth, peak, config)
    baseline = score(persistence(windows, t), truth, peak, {**config, "model": "persistence"})
    return model_report, baseline


def baseline_path(report_path) -> Path:
    path = Path(report_path)
    return path.with_name(f"{path.stem}_persistence{path.suffix or '.csv'}")


def write_reports(report_path, model_report: EvalReport, baseline: EvalReport) -> list:
    """Write the model CSV, its persistence sibling, and a per-sequence table; returns the paths."""
    path = Path(report_path)
    paths = [path, baseline_path(path), path.with_name(f"{path.stem}_sequences{path.suffix or '.csv'}")]
    paths[0].write_text(model_report.to_csv())
    paths[1].write_text(baseline.to_csv())
    paths[2].write_text(model_report.sequences_csv())
    return paths
