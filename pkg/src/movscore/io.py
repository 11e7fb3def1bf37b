"""CSV ingestion and report emission.

Input tables are UTF-8 CSV with a header row. A table has a time column
(integer step or ISO date), one observation column, one or more model
columns and optionally a location column for multi-site data.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import pandas as pd

from movscore.windows import WindowPlan


class InputError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass
class SeriesTable:
    frame: pd.DataFrame
    time_col: str
    obs_col: str | None
    model_cols: list[str]
    location_col: str | None = None
    dated: bool = False
    source: str = "<table>"

    @property
    def value_cols(self) -> list[str]:
        return ([self.obs_col] if self.obs_col else []) + self.model_cols

    def locations(self) -> list[str]:
        if self.location_col is None:
            return [""]
        return list(pd.unique(self.frame[self.location_col]))

    def groups(self) -> Iterator[tuple[str, pd.DataFrame]]:
        """``(location, rows)`` in order of first appearance, rows time-sorted."""
        if self.location_col is None:
            yield "", self.frame
            return
        for loc, part in self.frame.groupby(self.location_col, sort=False):
            yield str(loc), part


def _line_numbers(mask) -> list[int]:
    # header is line 1
    return [int(i) + 2 for i in np.flatnonzero(np.asarray(mask))]


def read_series_table(
    path: str | Path,
    *,
    time_col: str = "time",
    obs_col: str | None = "obs",
    model_cols: Sequence[str] | None = None,
    location_col: str | None = "location",
    missing: str = "NA",
    require_models: bool = True,
) -> SeriesTable:
    """Read and validate a series table.

    ``location_col`` is optional: it is used only if present in the header.
    ``model_cols=None`` takes every remaining column as a model.
    """
    path = Path(path)
    try:
        raw = pd.read_csv(
            path, dtype=str, keep_default_na=False, na_values=[missing] if missing else [],
            skipinitialspace=True, encoding="utf-8",
        )
    except pd.errors.ParserError as exc:
        raise InputError(f"{path}: {exc}") from None
    except (UnicodeDecodeError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"{path}: cannot parse CSV ({exc})") from None
    cols = list(raw.columns)
    if time_col not in cols:
        raise InputError(f"{path}: missing time column {time_col!r} (header: {cols})")
    loc = location_col if location_col and location_col in cols else None
    if obs_col is not None and obs_col not in cols:
        raise InputError(f"{path}: missing observation column {obs_col!r} (header: {cols})")
    if model_cols is None:
        model_cols = [c for c in cols if c not in (time_col, obs_col, loc)]
    else:
        absent = [c for c in model_cols if c not in cols]
        if absent:
            raise InputError(f"{path}: missing model column(s) {absent}")
    model_cols = list(model_cols)
    if require_models and not model_cols:
        raise InputError(f"{path}: no model columns")
    if raw.empty:
        raise InputError(f"{path}: no data rows")

    frame = pd.DataFrame(index=raw.index)
    if loc:
        if raw[loc].isna().any():
            raise InputError(f"{path}: missing location at line(s) {_line_numbers(raw[loc].isna())[:10]}")
        frame[loc] = raw[loc].astype(str)
    tcol = raw[time_col]
    if tcol.isna().any():
        raise InputError(f"{path}: missing time value at line(s) {_line_numbers(tcol.isna())[:10]}")
    as_int = pd.to_numeric(tcol, errors="coerce")
    dated = False
    if as_int.notna().all() and (as_int % 1 == 0).all():
        frame[time_col] = as_int.astype(np.int64)
    else:
        dates = pd.to_datetime(tcol, errors="coerce", format="ISO8601")
        if dates.isna().any():
            raise InputError(
                f"{path}: unparsable time value at line(s) {_line_numbers(dates.isna())[:10]}"
            )
        frame[time_col] = dates
        dated = True

    for c in ([obs_col] if obs_col else []) + model_cols:
        col = raw[c]
        if col.isna().any():
            raise InputError(f"{path}: missing value in column {c!r} at line(s) {_line_numbers(col.isna())[:10]}")
        num = pd.to_numeric(col, errors="coerce")
        bad = num.isna() | ~np.isfinite(num.to_numpy(dtype=float, na_value=np.nan))
        if bad.any():
            raise InputError(f"{path}: non-numeric value in column {c!r} at line(s) {_line_numbers(bad)[:10]}")
        frame[c] = num.astype(float)

    keys = [loc, time_col] if loc else [time_col]
    dup = frame.duplicated(keys)
    if dup.any():
        raise InputError(f"{path}: duplicate time stamp at line(s) {_line_numbers(dup)[:10]}")
    if loc:
        order = {k: i for i, k in enumerate(pd.unique(frame[loc]))}
        frame = frame.assign(_o=frame[loc].map(order)).sort_values(["_o", time_col], kind="stable")
        frame = frame.drop(columns="_o")
        sizes = frame.groupby(loc, sort=False).size()
        if sizes.nunique() != 1:
            raise InputError(f"{path}: locations have unequal series lengths ({sizes.min()}..{sizes.max()})")
    else:
        frame = frame.sort_values(time_col, kind="stable")
    frame = frame.reset_index(drop=True)
    return SeriesTable(frame, time_col, obs_col, model_cols, loc, dated, str(path))


def format_time(values) -> list[str]:
    s = pd.Series(values)
    if pd.api.types.is_datetime64_any_dtype(s):
        return s.dt.strftime("%Y-%m-%d").tolist()
    return [str(v) for v in s]


# -- window plans --------------------------------------------------------------


def plan_frame(plans: dict[str, dict[str, WindowPlan]]) -> pd.DataFrame:
    """Long table ``location, kind, t, lo, hi, width`` for ``{loc: {kind: plan}}``."""
    parts = []
    for loc, by_kind in plans.items():
        for kind, plan in by_kind.items():
            parts.append(pd.DataFrame({
                "location": loc, "kind": kind, "t": np.arange(1, plan.n + 1),
                "lo": plan.lo, "hi": plan.hi, "width": plan.widths,
            }))
    return pd.concat(parts, ignore_index=True)


def read_plan_csv(path: str | Path) -> dict[str, dict[str, WindowPlan]]:
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype={"location": str, "kind": str}, keep_default_na=False)
    except pd.errors.ParserError as exc:
        raise InputError(f"{path}: {exc}") from None
    need = {"kind", "t", "lo", "hi"}
    if not need <= set(df.columns):
        raise InputError(f"{path}: window plan needs columns {sorted(need)}")
    if "location" not in df.columns:
        df["location"] = ""
    plans: dict[str, dict[str, WindowPlan]] = {}
    for (loc, kind), part in df.groupby(["location", "kind"], sort=False):
        part = part.sort_values("t")
        n = len(part)
        if not np.array_equal(part["t"].to_numpy(), np.arange(1, n + 1)):
            raise InputError(f"{path}: plan for {loc!r}/{kind} must list t = 1..n")
        try:
            plan = WindowPlan(n, str(kind), part["lo"].to_numpy(), part["hi"].to_numpy())
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None
        plans.setdefault(str(loc), {})[str(kind)] = plan
    return plans


# -- emission ------------------------------------------------------------------


def write_csv(df: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n")
    return path


def write_json(obj, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def format_table(rows: dict[str, dict[str, float]], columns: Sequence[str], digits: int = 3) -> str:
    """Fixed-width text table, values rounded to ``digits`` decimals."""
    head = ["model"] + list(columns)
    body = []
    for label, row in rows.items():
        cells = [label]
        for c in columns:
            v = row.get(c)
            if v is None:
                cells.append("-")
            elif isinstance(v, (int, np.integer)):
                cells.append(str(v))
            else:
                cells.append(f"{v:.{digits}f}")
        body.append(cells)
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    lines = ["  ".join(h.rjust(w) for h, w in zip(head, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in body]
    return "\n".join(lines)
