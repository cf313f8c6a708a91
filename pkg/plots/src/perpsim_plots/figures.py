"""Render perpsim CSV reports into static figures.

This layer reads only the CSV files emitted by the simulation harness; every
reference value (closed-form CDF evaluations, KS thresholds, LIL targets) is
taken from a CSV column, never recomputed here, so the plot layer cannot mask
a disagreement between samples and the laws they are tested against.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("ecdf_overlay", "qq", "ks_trend", "lil_trace")

EXPECTED_HEADERS = {
    "ecdf_overlay": "a,u,source,x,ecdf,ref_cdf",
    "qq": "a,u,source,x,ecdf,ref_cdf",
    "ks_trend": "a,u,source,statistic,threshold,pass",
    "lil_trace": "scale,statistic,running_max,target",
}

_STRING_COLUMNS = {"source", "pass"}


class FigureError(ValueError):
    """Bad figure request: unknown kind, wrong header, or empty data."""


@dataclass(frozen=True)
class FigureSpec:
    input_csv: Path
    kind: str
    output: Path

    def __post_init__(self):
        object.__setattr__(self, "input_csv", Path(self.input_csv))
        object.__setattr__(self, "output", Path(self.output))


def normalize_kind(kind: str) -> str:
    flat = kind.replace("_", "").replace("-", "").lower()
    for k in KINDS:
        if k.replace("_", "") == flat:
            return k
    raise FigureError(f"unknown figure kind {kind!r}; expected one of {KINDS}")


def read_table(path: Path, kind: str) -> dict:
    expected = EXPECTED_HEADERS[kind]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureError(f"{path}: empty file; expected header {expected!r}") from None
        if ",".join(header) != expected:
            raise FigureError(
                f"{path}: header mismatch; expected {expected!r}, got {','.join(header)!r}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise FigureError(f"{path}: no data rows under header {expected!r}")
    cols = {name: [] for name in header}
    for row in rows:
        if len(row) != len(header):
            raise FigureError(f"{path}: malformed row {row}")
        for name, val in zip(header, row):
            cols[name].append(val)
    out = {}
    for name, vals in cols.items():
        if name in _STRING_COLUMNS:
            out[name] = np.array(vals)
        else:
            out[name] = np.array([float(v) for v in vals])
    return out


def _quantile_xlim(ax, values: np.ndarray) -> None:
    lo, hi = np.quantile(values, [0.001, 0.999])
    if hi <= lo:
        hi = lo + 1.0
    pad = 0.02 * (hi - lo)
    ax.set_xlim(lo - pad, hi + pad)


def _group_keys(table: dict) -> list:
    keys = sorted({(a, u, s) for a, u, s in zip(table["a"], table["u"], table["source"])})
    return keys


def _build_ecdf_overlay(table: dict):
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for a, u, src in _group_keys(table):
        sel = (table["a"] == a) & (table["u"] == u) & (table["source"] == src)
        x = table["x"][sel]
        order = np.argsort(x)
        x = x[order]
        ax.step(x, table["ecdf"][sel][order], where="post", lw=1.2,
                label=f"ecdf a={a:g} u={u:g} {src}")
        ax.plot(x, table["ref_cdf"][sel][order], "--", lw=1.0,
                label=f"limit a={a:g} u={u:g} {src}")
    _quantile_xlim(ax, table["x"])
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("x")
    ax.set_ylabel("CDF")
    ax.legend(fontsize=7, loc="lower right")
    ax.set_title("empirical CDF vs limit law")
    return fig


def _build_qq(table: dict):
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    all_q = []
    for a, u, src in _group_keys(table):
        sel = (table["a"] == a) & (table["u"] == u) & (table["source"] == src)
        x = table["x"][sel]
        ref = table["ref_cdf"][sel]
        emp = table["ecdf"][sel]
        order = np.argsort(x)
        x, ref, emp = x[order], ref[order], emp[order]
        # invert the reference CDF column at the empirical probabilities
        ref_mono = np.maximum.accumulate(ref)
        inside = (emp >= ref_mono[0]) & (emp <= ref_mono[-1])
        q_ref = np.interp(emp[inside], ref_mono, x)
        ax.plot(q_ref, x[inside], "o", ms=2.5, label=f"a={a:g} u={u:g} {src}")
        all_q.append(q_ref)
        all_q.append(x[inside])
    flat = np.concatenate(all_q) if all_q else np.array([0.0, 1.0])
    lo, hi = flat.min(), flat.max()
    ax.plot([lo, hi], [lo, hi], "k-", lw=0.8)
    _quantile_xlim(ax, flat)
    ax.set_xlabel("limit-law quantile")
    ax.set_ylabel("sample quantile")
    ax.legend(fontsize=7, loc="upper left")
    ax.set_title("QQ against the limit law")
    return fig


def _build_ks_trend(table: dict):
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    keys = sorted({(u, s) for u, s in zip(table["u"], table["source"])})
    for u, src in keys:
        sel = (table["u"] == u) & (table["source"] == src)
        a = table["a"][sel]
        order = np.argsort(-a)
        ax.plot(a[order], table["statistic"][sel][order], "o-", lw=1.2,
                label=f"u={u:g} {src}")
        ax.plot(a[order], table["threshold"][sel][order], ":", lw=0.9, color="gray")
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("discount rate a (decreasing)")
    ax.set_ylabel("KS statistic")
    ax.legend(fontsize=7)
    ax.set_title("KS statistic vs a (dotted: thresholds)")
    return fig


def _build_lil_trace(table: dict):
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    scale = table["scale"]
    ax.plot(scale, table["statistic"], "o-", lw=1.0, label="statistic")
    ax.plot(scale, table["running_max"], "-", lw=1.4, label="running max")
    target = float(table["target"][0])
    ax.axhline(target, color="red", ls="--", lw=1.0, label=f"target {target:g}")
    ax.set_xscale("log")
    if scale[0] > scale[-1]:
        ax.invert_xaxis()
    ax.set_xlabel("scale")
    ax.set_ylabel("normalized statistic")
    ax.legend(fontsize=8)
    ax.set_title("iterated-logarithm trace")
    return fig


_BUILDERS = {
    "ecdf_overlay": _build_ecdf_overlay,
    "qq": _build_qq,
    "ks_trend": _build_ks_trend,
    "lil_trace": _build_lil_trace,
}


def render(spec: FigureSpec) -> Path:
    """Validate the CSV against the kind's schema and write the figure.

    Nothing is written when validation fails.  Output bytes are deterministic
    for a given CSV (fixed size/dpi, stripped volatile metadata).
    """
    kind = normalize_kind(spec.kind)
    table = read_table(spec.input_csv, kind)
    fig = _BUILDERS[kind](table)
    try:
        suffix = spec.output.suffix.lower()
        if suffix == ".svg":
            metadata = {"Date": None}
        elif suffix == ".png":
            metadata = {"Software": None}
        else:
            metadata = None
        fig.savefig(spec.output, dpi=120, metadata=metadata)
    finally:
        plt.close(fig)
    return spec.output
