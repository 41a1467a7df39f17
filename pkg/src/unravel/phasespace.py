"""Wigner functions of Fock-basis density matrices.

Natural units: ``x`` in units of ``x0 = sqrt(hbar/(m omega))``, ``p`` in units
of ``hbar/x0``, ``a = (x + i p)/sqrt(2)`` and ``hbar = 1``.  Vacuum peaks at
``1/pi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K

DEFAULT_EXTENT = 5.0
DEFAULT_POINTS = 201


@dataclass(frozen=True, eq=False)
class WignerGrid:
    x: np.ndarray
    p: np.ndarray
    values: np.ndarray  # shape (len(x), len(p))
    meta: dict = field(default_factory=dict)

    @property
    def cell_area(self) -> float:
        return float((self.x[1] - self.x[0]) * (self.p[1] - self.p[0]))

    @property
    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    def peak(self) -> tuple[float, float]:
        i, k = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.x[i]), float(self.p[k])

    def x_marginal(self) -> np.ndarray:
        return self.values.sum(axis=1) * (self.p[1] - self.p[0])


def grid(extent: float = DEFAULT_EXTENT, points: int = DEFAULT_POINTS) -> np.ndarray:
    return np.linspace(-extent, extent, points)


def wigner(rho: np.ndarray, x: np.ndarray | None = None,
           p: np.ndarray | None = None) -> WignerGrid:
    """Wigner function of ``rho`` on the ``x`` by ``p`` grid (default [-5, 5]^2, 201^2)."""
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    x = grid() if x is None else np.ascontiguousarray(x, dtype=float)
    p = grid() if p is None else np.ascontiguousarray(p, dtype=float)
    values = K.wigner_fock(rho, x, p)
    meta = {"trace": float(np.trace(rho).real), "max": float(values.max())}
    cell = (x[1] - x[0]) * (p[1] - p[0]) if len(x) > 1 and len(p) > 1 else 0.0
    # a cell wider than the vacuum width (~0.7) cannot resolve any Fock structure
    if cell > 0.5:
        meta["warning"] = f"coarse grid: cell area {cell:.3g}"
    return WignerGrid(x, p, values, meta)


def write_grid(w: WignerGrid, path: str | Path, header: dict | None = None) -> None:
    """Plain-text matrix: ``#`` metadata lines, then one row per x value (17 digits)."""
    lines = []
    meta = dict(header or {})
    meta.update({
        "x_min": float(w.x[0]), "x_max": float(w.x[-1]), "nx": len(w.x),
        "p_min": float(w.p[0]), "p_max": float(w.p[-1]), "np": len(w.p),
        "rows": "x", "cols": "p",
    })
    meta.update(w.meta)
    for key, val in meta.items():
        lines.append(f"# {key}: {_fmt(val)}")
    for row in w.values:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_grid(path: str | Path) -> WignerGrid:
    meta: dict = {}
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        elif line.strip():
            rows.append([float(t) for t in line.split()])
    x = np.linspace(float(meta["x_min"]), float(meta["x_max"]), int(meta["nx"]))
    p = np.linspace(float(meta["p_min"]), float(meta["p_max"]), int(meta["np"]))
    return WignerGrid(x, p, np.array(rows), meta)


def _fmt(val) -> str:
    if isinstance(val, float):
        return f"{val:.17g}"
    return str(val)
