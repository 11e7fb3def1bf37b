"""Report figures rendered to files (no interactive backend)."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

METHOD_TITLES = {
    "THEO": "theoretical",
    "OF": "moving, OF windows",
    "OV": "moving, OV windows",
    "DV": "moving, DV windows",
    "PW": "point-wise",
    "ST": "stationarity assumption",
}

_RC = {
    "font.size": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "movscore",
}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    # no metadata so reruns are byte-identical
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def score_panels(
    series: Mapping[str, Mapping[str, np.ndarray]],
    methods: Sequence[str],
    path: Path,
    *,
    x=None,
    ylabel: str = "score",
    title: str | None = None,
    shared_y: bool = True,
) -> Path:
    """One panel per method, one line per model.

    ``series[method][model]`` is a 1-D array over the time axis ``x``.
    """
    n = len(methods)
    ncols = 2 if n > 1 else 1
    nrows = (n + ncols - 1) // ncols
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(
            nrows, ncols, figsize=(4.2 * ncols, 2.4 * nrows), sharex=True,
            sharey=shared_y, squeeze=False,
        )
        for ax, method in zip(axes.flat, methods):
            for model, vals in series[method].items():
                xs = np.arange(1, len(vals) + 1) if x is None else x
                ax.plot(xs, vals, lw=0.9, label=model)
            ax.set_title(METHOD_TITLES.get(method, method))
            ax.set_ylabel(ylabel)
        for ax in list(axes.flat)[n:]:
            ax.set_visible(False)
        if any(str(m) for m in series[methods[0]]):
            axes.flat[0].legend(loc="best", frameon=False, ncol=2)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, path)


def bar_averages(averages: Mapping[str, Mapping[str, float]], path: Path, *, ylabel: str) -> Path:
    """Grouped bars: ``averages[method][model]``."""
    methods = list(averages)
    models = list(next(iter(averages.values())))
    width = 0.8 / max(len(models), 1)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(methods), 2.8))
        base = np.arange(len(methods))
        for i, model in enumerate(models):
            ax.bar(base + i * width, [averages[m][model] for m in methods], width, label=model)
        ax.set_xticks(base + width * (len(models) - 1) / 2, methods)
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, path)
