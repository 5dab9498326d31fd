"""Shared domain types, validation, and ensemble serialization.

Everything here is an immutable value object; the only stateful object in the
library is the random stream owned by :mod:`greylift.sampling`.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "GreyError",
    "ParameterError",
    "AccuracyError",
    "NumericalRankError",
    "EmbeddingError",
    "QueryError",
    "DegenerateLawError",
    "GreyParams",
    "TimeGrid",
    "PathEnsemble",
    "RngStream",
    "validate_params",
    "save_ensemble",
    "load_ensemble",
]

PATH_METHODS = ("cholesky", "circulant", "mvn", "lift_rough", "lift_smooth")


class GreyError(Exception):
    """Base class for all library errors."""


class ParameterError(GreyError, ValueError):
    """A parameter lies outside its mathematical domain."""


class AccuracyError(GreyError, ArithmeticError):
    """A numerical routine cannot certify the requested tolerance.

    Carries the best available residual estimate in ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalRankError(GreyError):
    """A covariance factorization failed (matrix numerically not PD)."""


class EmbeddingError(GreyError):
    """Circulant embedding produced an inadmissible negative eigenvalue."""


class QueryError(GreyError, ValueError):
    """A probe asked for data the ensemble does not contain."""


class DegenerateLawError(GreyError):
    """The requested law is degenerate (e.g. a point mass at t=0)."""


@dataclass(frozen=True)
class GreyParams:
    """The parameter pair (beta, alpha) with derived Hurst index alpha/2.

    beta in (0,1) controls the non-Gaussian mixing; alpha in (0,2) the
    self-similarity. beta=1 or alpha in {0,2} are Gaussian/degenerate limits
    admitted only through :meth:`degenerate`, used by test helpers.
    """

    beta: float
    alpha: float

    @property
    def hurst(self) -> float:
        return 0.5 * self.alpha

    @classmethod
    def degenerate(cls, beta: float, alpha: float) -> "GreyParams":
        """Construct without range validation (Gaussian-limit check helper)."""
        return cls(float(beta), float(alpha))


def validate_params(beta: float, alpha: float) -> GreyParams:
    """Validate (beta, alpha) and return the parameter object.

    Raises
    ------
    ParameterError
        If beta is outside (0,1) or alpha outside (0,2), naming the field.
    """
    beta = float(beta)
    alpha = float(alpha)
    if not (0.0 < beta < 1.0):
        raise ParameterError(f"beta must lie strictly in (0, 1), got beta={beta}")
    if not (0.0 < alpha < 2.0):
        raise ParameterError(f"alpha must lie strictly in (0, 2), got alpha={alpha}")
    return GreyParams(beta, alpha)


_UNIFORM_RTOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing, nonnegative sampling times."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ParameterError("grid must be a nonempty 1-d array of times")
        if t[0] < 0.0:
            raise ParameterError(f"grid times must be nonnegative, got t[0]={t[0]}")
        if t.size > 1 and not np.all(np.diff(t) > 0.0):
            raise ParameterError("grid times must be strictly increasing")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @classmethod
    def regular(cls, t_max: float, n_steps: int) -> "TimeGrid":
        """Uniform grid 0, dt, ..., t_max with n_steps steps."""
        if t_max <= 0 or n_steps < 1:
            raise ParameterError("regular grid needs t_max > 0 and n_steps >= 1")
        return cls(np.linspace(0.0, float(t_max), int(n_steps) + 1))

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def step(self) -> float:
        if self.n < 2:
            return 0.0
        return float((self.times[-1] - self.times[0]) / (self.n - 1))

    @property
    def uniform(self) -> bool:
        if self.n < 3:
            return True
        d = np.diff(self.times)
        return bool(np.max(np.abs(d - self.step)) < _UNIFORM_RTOL * self.step)

    def index_of(self, t: float) -> int:
        """Index of grid time t (exact up to 1e-12 relative)."""
        i = int(np.argmin(np.abs(self.times - t)))
        scale = max(abs(t), self.times[-1], 1e-300)
        if abs(self.times[i] - t) > 1e-12 * scale:
            raise QueryError(f"time {t} is not on the grid")
        return i


@dataclass(frozen=True)
class RngStream:
    """Seeded, splittable deterministic random stream.

    (seed, stream_id) fully determines the sequence; distinct stream ids give
    statistically independent streams. Single-owner: never share a stream
    between concurrent workers.
    """

    seed: int
    stream_id: int
    generator: np.random.Generator = field(compare=False, repr=False)


@dataclass
class PathEnsemble:
    """Simulated paths with provenance.

    values has shape (n_paths, n_times, d). y_values holds the one
    subordination draw per path for grey ensembles and is None for plain
    Gaussian ones.
    """

    values: np.ndarray
    grid: TimeGrid
    d: int
    method: str
    seed: int
    y_values: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3:
            raise ParameterError("values must have shape (n_paths, n_times, d)")
        if v.shape[1] != self.grid.n or v.shape[2] != self.d:
            raise ParameterError(
                f"values shape {v.shape} inconsistent with grid n={self.grid.n}, d={self.d}"
            )
        if self.method not in PATH_METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if self.grid.times[0] == 0.0 and v.shape[0] and np.any(v[:, 0, :] != 0.0):
            raise ParameterError("paths must start at exactly 0 when the grid starts at 0")
        if self.y_values is not None:
            y = np.asarray(self.y_values, dtype=float)
            if y.shape != (v.shape[0],):
                raise ParameterError("y_values must hold one draw per path")
            if np.any(y <= 0.0):
                raise ParameterError("y_values must be strictly positive")
            self.y_values = y
        self.values = v

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]


def _atomic_write(path: str, data: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _meta_path(csv_path: str) -> str:
    base, _ = os.path.splitext(csv_path)
    return base + ".meta.json"


def save_ensemble(ens: PathEnsemble, csv_path: str, beta=None, alpha=None) -> str:
    """Write the ensemble as CSV plus a JSON metadata sidecar.

    CSV schema: ``path_id,t,coord,value`` with 17-significant-digit floats so
    a round trip reproduces every value bit-exactly. Returns the sidecar path.
    """
    lines = ["path_id,t,coord,value"]
    times = ens.grid.times
    for p in range(ens.n_paths):
        for j, t in enumerate(times):
            for c in range(ens.d):
                lines.append(f"{p},{t:.17g},{c},{ens.values[p, j, c]:.17g}")
    _atomic_write(csv_path, "\n".join(lines) + "\n")

    meta = {
        "method": ens.method,
        "seed": int(ens.seed),
        "beta": None if beta is None else float(beta),
        "alpha": None if alpha is None else float(alpha),
        "d": int(ens.d),
        "n_paths": int(ens.n_paths),
    }
    mp = _meta_path(csv_path)
    _atomic_write(mp, json.dumps(meta, sort_keys=True) + "\n")
    return mp


def load_ensemble(csv_path: str) -> PathEnsemble:
    """Read an ensemble written by :func:`save_ensemble` (bit-exact values)."""
    with open(_meta_path(csv_path)) as fh:
        meta = json.load(fh)
    raw = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    n_paths, d = meta["n_paths"], meta["d"]
    times = np.unique(raw[:, 1])
    n_times = times.size
    values = np.empty((n_paths, n_times, d))
    pid = raw[:, 0].astype(int)
    tidx = np.searchsorted(times, raw[:, 1])
    cid = raw[:, 2].astype(int)
    values[pid, tidx, cid] = raw[:, 3]
    return PathEnsemble(values=values, grid=TimeGrid(times), d=d,
                        method=meta["method"], seed=meta["seed"])
