"""Estimator output containers and their text/CSV forms.

CSV files use '.' decimals, 17 significant digits and '#'-prefixed header
lines carrying provenance (config hash, seed, version), so reruns can be
compared byte for byte.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field

import numpy as np


def fmt(x) -> str:
    return f"{float(x):.17g}"


@dataclass
class TimeSeries:
    """Estimator values with statistical errors on a time grid."""

    t: np.ndarray
    value: np.ndarray
    stderr: np.ndarray
    n_effective: np.ndarray
    meta: dict = field(default_factory=dict)
    per_order: dict = field(default_factory=dict)  # order -> value array

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        self.n_effective = np.asarray(self.n_effective, dtype=float)


@dataclass
class SpectrumSeries:
    """One-sided damped Fourier transform k(omega, E) and its modulus squared."""

    omega: np.ndarray
    k: np.ndarray          # complex
    k2: np.ndarray         # |k|^2
    stderr: np.ndarray
    eps: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.k = np.asarray(self.k, dtype=complex)
        self.k2 = np.asarray(self.k2, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)


def atomic_write_text(path: str, text: str):
    """Write via a temp file in the same directory plus rename."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header_lines(meta: dict):
    return [f"# {k}: {v}" for k, v in sorted(meta.items())]


def timeseries_to_csv(series: TimeSeries, path: str):
    lines = _header_lines(series.meta)
    lines.append("t,value,stderr,n_effective")
    for i in range(len(series.t)):
        lines.append(",".join([fmt(series.t[i]), fmt(series.value[i]),
                               fmt(series.stderr[i]), fmt(series.n_effective[i])]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def per_order_to_csv(series: TimeSeries, path: str):
    orders = sorted(series.per_order)
    lines = _header_lines(series.meta)
    lines.append("t," + ",".join(f"order{j}" for j in orders))
    for i in range(len(series.t)):
        row = [fmt(series.t[i])] + [fmt(series.per_order[j][i]) for j in orders]
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def spectrum_to_csv(spec: SpectrumSeries, path: str):
    meta = dict(spec.meta)
    meta["eps"] = fmt(spec.eps)
    lines = _header_lines(meta)
    lines.append("omega,re_k,im_k,k2,stderr")
    for i in range(len(spec.omega)):
        lines.append(",".join([fmt(spec.omega[i]), fmt(spec.k[i].real),
                               fmt(spec.k[i].imag), fmt(spec.k2[i]),
                               fmt(spec.stderr[i])]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def timeseries_from_csv(path: str) -> TimeSeries:
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
            elif line[0].isdigit() or line[0] in "+-.":
                rows.append([float(x) for x in line.split(",")])
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        arr = np.zeros((0, 4))
    return TimeSeries(t=arr[:, 0], value=arr[:, 1], stderr=arr[:, 2],
                      n_effective=arr[:, 3], meta=meta)
