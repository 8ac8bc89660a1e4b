"""Variance-based global sensitivity analysis (first-order and total-effect indices).

The design follows the usual pick-freeze layout: two independent prior
sample matrices ``A`` and ``B`` plus, for each parameter ``i``, ``AB[i]``
(``A`` with column ``i`` taken from ``B``) and ``BA[i]`` (the reverse).
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import Concatenated, PriorSpec
from .errors import InvalidArgumentError
from .forward import QoiMap, evaluate_qoi

FIRST_ORDER_METHODS = ("sobol1990", "saltelli2010", "jansen1999")
TOTAL_EFFECT_METHODS = ("homma1996", "sobol2007", "jansen1999")


@dataclass
class SensitivityDesign:
    A: np.ndarray
    B: np.ndarray
    AB: list
    BA: list
    fA: np.ndarray
    fB: np.ndarray
    fAB: list
    fBA: list
    names: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def N(self) -> int:
        return self.A.shape[0]

    def head(self, n_rows: int) -> "SensitivityDesign":
        """The design restricted to its first ``n_rows`` rows."""
        s = slice(0, n_rows)
        return SensitivityDesign(
            self.A[s], self.B[s], [m[s] for m in self.AB], [m[s] for m in self.BA],
            self.fA[s], self.fB[s], [f[s] for f in self.fAB], [f[s] for f in self.fBA], list(self.names),
        )


def swap_column(base: np.ndarray, donor: np.ndarray, i: int) -> np.ndarray:
    out = base.copy()
    out[:, i] = donor[:, i]
    return out


def design_from_matrices(A, B, qoi: QoiMap, names=None, n_workers: int = 1) -> SensitivityDesign:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2:
        raise InvalidArgumentError(f"A and B must be equal-shape matrices, got {A.shape} and {B.shape}")
    if A.shape[0] < 2:
        raise InvalidArgumentError("a sensitivity design needs N >= 2")
    if qoi.output_dim != 1:
        raise InvalidArgumentError("sensitivity indices need a scalar QoI")
    n = A.shape[1]
    names = list(names) if names is not None else [f"theta{i + 1}" for i in range(n)]
    if len(names) != n:
        raise InvalidArgumentError(f"{len(names)} names for {n} parameters")
    AB = [swap_column(A, B, i) for i in range(n)]
    BA = [swap_column(B, A, i) for i in range(n)]

    def f(x):
        return evaluate_qoi(qoi, x, n_workers)[:, 0]

    return SensitivityDesign(A, B, AB, BA, f(A), f(B), [f(m) for m in AB], [f(m) for m in BA], names)


def build_design(priors, N: int, qoi: QoiMap, rng: np.random.Generator, names=None,
                 n_workers: int = 1) -> SensitivityDesign:
    """Draw ``A`` then ``B`` from the joint prior and evaluate all ``2n+2`` sets."""
    prior = priors if isinstance(priors, PriorSpec) else Concatenated(tuple(priors))
    if N < 2:
        raise InvalidArgumentError("N must be at least 2")
    A = prior.sample(rng, N)
    B = prior.sample(rng, N)
    return design_from_matrices(A, B, qoi, names, n_workers)


def estimate_f0_and_V(design: SensitivityDesign) -> tuple[float, float]:
    fA = design.fA
    if fA.shape[0] < 2:
        raise InvalidArgumentError("need at least 2 evaluations")
    return float(fA.mean()), float(fA.var(ddof=1))


def _vectors(design, i, center):
    if not 0 <= i < design.n:
        raise InvalidArgumentError(f"parameter index {i} out of range")
    f0, V = estimate_f0_and_V(design)
    shift = f0 if center else 0.0
    fA = design.fA - shift
    fB = design.fB - shift
    fAB = design.fAB[i] - shift
    fBA = design.fBA[i] - shift
    return (f0 - shift), V, fA, fB, fAB, fBA


def first_order_numerator(method: str, design: SensitivityDesign, i: int, center: bool = False) -> float:
    f0, V, fA, fB, fAB, fBA = _vectors(design, i, center)
    if method == "sobol1990":
        return float(np.mean(fA * fBA) - f0 * f0)
    if method == "saltelli2010":
        return float(np.mean(fB * (fAB - fA)))
    if method == "jansen1999":
        return float(V - 0.5 * np.mean((fB - fAB) ** 2))
    raise InvalidArgumentError(f"unknown first-order estimator {method!r}; choose from {FIRST_ORDER_METHODS}")


def total_effect_numerator(method: str, design: SensitivityDesign, i: int, center: bool = False) -> float:
    f0, V, fA, fB, fAB, fBA = _vectors(design, i, center)
    if method == "homma1996":
        return float(V - np.mean(fA * fAB) + f0 * f0)
    if method == "sobol2007":
        return float(np.mean(fA * (fA - fAB)))
    if method == "jansen1999":
        return float(0.5 * np.mean((fA - fAB) ** 2))
    raise InvalidArgumentError(f"unknown total-effect estimator {method!r}; choose from {TOTAL_EFFECT_METHODS}")


def first_order(method: str, design: SensitivityDesign, i: int, center: bool = False) -> float:
    """First-order index of parameter ``i``; 0 when the output variance is 0.

    ``center`` subtracts ``f0`` from every QoI vector before applying the
    estimator, which leaves the estimand unchanged but lowers the variance of
    the product-type formulas when the output mean is large.
    """
    num = first_order_numerator(method, design, i, center)
    V = estimate_f0_and_V(design)[1]
    return 0.0 if V == 0.0 else num / V


def total_effect(method: str, design: SensitivityDesign, i: int, center: bool = False) -> float:
    num = total_effect_numerator(method, design, i, center)
    V = estimate_f0_and_V(design)[1]
    return 0.0 if V == 0.0 else num / V


@dataclass
class IndexEstimate:
    parameter: str
    kind: str  # "first" or "total"
    method: str
    value: float
    degenerate: bool = False

    @property
    def clamped(self) -> float:
        return min(1.0, max(0.0, self.value))


@dataclass
class SensitivityResult:
    N: int
    f0: float
    V: float
    estimates: list

    @property
    def degenerate(self) -> bool:
        return self.V == 0.0

    def get(self, parameter: str, kind: str, method: str) -> IndexEstimate:
        for e in self.estimates:
            if (e.parameter, e.kind, e.method) == (parameter, kind, method):
                return e
        raise KeyError((parameter, kind, method))

    def value(self, parameter: str, kind: str, method: str) -> float:
        return self.get(parameter, kind, method).value


def analyze(design: SensitivityDesign, first_methods=FIRST_ORDER_METHODS,
            total_methods=TOTAL_EFFECT_METHODS, center: bool = False) -> SensitivityResult:
    f0, V = estimate_f0_and_V(design)
    degenerate = V == 0.0
    out = []
    for i, name in enumerate(design.names):
        for m in first_methods:
            out.append(IndexEstimate(name, "first", m, first_order(m, design, i, center), degenerate))
        for m in total_methods:
            out.append(IndexEstimate(name, "total", m, total_effect(m, design, i, center), degenerate))
    return SensitivityResult(design.N, f0, V, out)


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------


def gsa_file_names(names) -> list[str]:
    files = ["qoi_samplesA.txt", "qoi_samplesB.txt"]
    for name in names:
        files += [f"{name}_qoi_samplesAi.txt", f"{name}_qoi_samplesBi.txt"]
    return files


def _write_table(path: Path, x: np.ndarray, f: np.ndarray):
    np.savetxt(path, np.column_stack([x, f]), fmt="%.17g", delimiter=" ")


def write_gsa_files(design: SensitivityDesign, directory) -> list[Path]:
    """Write the ``2n+2`` sample/QoI tables; returns the paths in a fixed order."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    names = gsa_file_names(design.names)
    tables = [(design.A, design.fA), (design.B, design.fB)]
    for i in range(design.n):
        tables += [(design.AB[i], design.fAB[i]), (design.BA[i], design.fBA[i])]
    paths = []
    for fname, (x, f) in zip(names, tables):
        p = d / fname
        _write_table(p, x, f)
        paths.append(p)
    return paths


def read_gsa_file(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (parameter matrix, QoI vector) from one GSA table."""
    data = np.loadtxt(path, ndmin=2)
    return data[:, :-1], data[:, -1]


def read_gsa_files(directory, names) -> SensitivityDesign:
    d = Path(directory)
    A, fA = read_gsa_file(d / "qoi_samplesA.txt")
    B, fB = read_gsa_file(d / "qoi_samplesB.txt")
    AB, fAB, BA, fBA = [], [], [], []
    for name in names:
        x, f = read_gsa_file(d / f"{name}_qoi_samplesAi.txt")
        AB.append(x)
        fAB.append(f)
        x, f = read_gsa_file(d / f"{name}_qoi_samplesBi.txt")
        BA.append(x)
        fBA.append(f)
    return SensitivityDesign(A, B, AB, BA, fA, fB, fAB, fBA, list(names))


def convergence_sweep(design: SensitivityDesign, sizes, first_methods=FIRST_ORDER_METHODS,
                      total_methods=TOTAL_EFFECT_METHODS) -> list[dict]:
    """Indices recomputed on leading sub-designs of each size in ``sizes``."""
    rows = []
    for n in sizes:
        if not 2 <= n <= design.N:
            raise InvalidArgumentError(f"sweep size {n} outside [2, {design.N}]")
        res = analyze(design.head(int(n)), first_methods, total_methods)
        for e in res.estimates:
            rows.append({"N": int(n), "parameter": e.parameter, "kind": e.kind, "method": e.method, "value": e.value})
    return rows


def write_sweep_csv(rows, path) -> Path:
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["N", "parameter", "kind", "method", "value"])
        w.writeheader()
        for r in rows:
            w.writerow({**r, "value": repr(float(r["value"]))})
    return path
