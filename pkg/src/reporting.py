"""
Report writing: atomic file output, JSON envelopes, CSV tables and plots.
"""

import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from pydantic import BaseModel  # noqa: E402

logger = logging.getLogger(__name__)

plt.style.use("seaborn-v0_8")

TOOL_NAME = "spreadlab"
TOOL_VERSION = "0.1.0"

PathLike = Union[str, Path]


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """
    Write data to path through a temporary file and a rename.

    Readers see either the old file or the complete new one.

    Args:
        path: Destination file
        data: Payload

    Returns:
        The destination path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def to_json_bytes(payload: Any) -> bytes:
    """Deterministic JSON: sorted keys, shortest round-trip floats, no NaN."""
    return (json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n").encode(
        "utf-8"
    )


def validated_dump(report: BaseModel) -> Dict[str, Any]:
    """Re-parse a report through its own model, then dump it for JSON."""
    checked = type(report).model_validate(report.model_dump())
    return checked.model_dump(mode="json", by_alias=True)


def build_envelope(
    subcommand: str,
    config: Dict[str, Any],
    seed: Optional[int],
    report: Union[BaseModel, Dict[str, Any]],
) -> Dict[str, Any]:
    """
    Wrap a report with everything needed to replay it.

    Args:
        subcommand: Front-door subcommand name
        config: Full parameter map of the run
        seed: Run seed
        report: Report model (validated) or an already plain mapping

    Returns:
        {tool, version, subcommand, config, seed, report}
    """
    body = validated_dump(report) if isinstance(report, BaseModel) else report
    return {
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "report": body,
    }


def write_json_report(path: PathLike, envelope: Dict[str, Any]) -> Path:
    written = atomic_write_bytes(path, to_json_bytes(envelope))
    logger.info("Report written to %s", written)
    return written


def write_csv(path: PathLike, df: pd.DataFrame) -> Path:
    """Write a table atomically with pandas' CSV encoder."""
    written = atomic_write_text(path, df.to_csv(index=False, lineterminator="\n"))
    logger.info("Table written to %s (%d rows)", written, len(df))
    return written


def records_frame(records: List[BaseModel]) -> pd.DataFrame:
    """One row per model, flattened to its JSON fields."""
    return pd.DataFrame([r.model_dump(mode="json", by_alias=True) for r in records])


def lowdeg_frame(report) -> pd.DataFrame:
    """Per-degree table of a low-degree norm report."""
    return records_frame(report.per_degree)


def regression_frame(report) -> pd.DataFrame:
    """Per-seed table of a regression sweep."""
    return records_frame(report.runs)


def figure_to_png(fig) -> bytes:
    """Render a figure into PNG bytes and close it."""
    buffer = io.BytesIO()
    fig.savefig(buffer, format="png", dpi=150, bbox_inches="tight")
    plt.close(fig)
    buffer.seek(0)
    return buffer.getvalue()


def plot_lowdeg_contributions(df: pd.DataFrame, title: str = "Low-degree norm by degree") -> bytes:
    """
    Log-scale per-degree contributions, with the closed-form bound when present.

    Args:
        df: Table with columns k, log_contribution and optionally closed_form_bound
        title: Plot title

    Returns:
        PNG bytes
    """
    fig, ax = plt.subplots(figsize=(10, 6))
    ax.plot(df["k"], df["log_contribution"], marker="o", label="log contribution")
    if "closed_form_bound" in df.columns:
        bound = df["closed_form_bound"].astype(float)
        positive = bound > 0
        ax.plot(
            df.loc[positive, "k"],
            np.log(bound[positive]),
            linestyle="--",
            label="log closed-form bound",
        )
    ax.set_xlabel("degree k")
    ax.set_ylabel("natural log")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return figure_to_png(fig)


def plot_regression_errors(df: pd.DataFrame, title: str = "Parameter error by seed") -> bytes:
    """Histogram of per-seed squared parameter errors."""
    fig, ax = plt.subplots(figsize=(10, 6))
    ax.hist(df["param_error"], bins=20, alpha=0.7)
    ax.set_xlabel("‖β̂ - β*‖²")
    ax.set_ylabel("seeds")
    ax.set_title(title)
    fig.tight_layout()
    return figure_to_png(fig)


def write_plot(path: PathLike, png: bytes) -> Path:
    written = atomic_write_bytes(path, png)
    logger.info("Plot written to %s", written)
    return written
