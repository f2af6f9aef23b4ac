import csv
import io

import numpy as np

from app.core.errors import ShapeError
from app.core.utils import format_float


def _csv_text(header, rows):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return out.getvalue()


def emit_projection(latents, labels, dims=2):
    """Plot-ready CSV text: the first ``dims`` latent coordinates plus the label."""
    latents = np.asarray(latents, dtype=np.float64)
    labels = np.asarray(labels).reshape(-1)
    if latents.ndim != 2 or latents.shape[1] < dims:
        raise ShapeError(f"projection needs at least {dims} latent columns, got shape {latents.shape}")
    if labels.shape[0] != latents.shape[0]:
        raise ShapeError(f"{labels.shape[0]} labels for {latents.shape[0]} rows")
    axes = ["x", "y", "z"][:dims] if dims <= 3 else [f"c{j}" for j in range(dims)]
    rows = ([format_float(v) for v in row] + [int(label)] for row, label in zip(latents[:, :dims], labels))
    return _csv_text(axes + ["label"], rows)


def emit_trace_csv(trace):
    """One row per SPSA iteration: proposed loss, acceptance and the accepted-point loss."""
    rows = (
        [step.iteration, format_float(step.loss), int(step.accepted), format_float(step.current_loss)]
        for step in trace
    )
    return _csv_text(["iteration", "loss", "accepted", "current_loss"], rows)
