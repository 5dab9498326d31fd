"""The grey layer: ggBm path synthesis, its characteristic function and
finite-dimensional densities, and the grey Ornstein-Uhlenbeck processes with
their closed-form laws.

Laws follow from the subordination representation B = sqrt(Y) * B^H with a
single time-independent Y per path (density M_beta): conditioning on Y turns
every Gaussian expectation into a Mittag-Leffler one,

    E exp(i sum_k (theta_k, B(t_k))) = E_beta( -1/2 sum_{k,j} (theta_k,theta_j)
                                               gamma(t_k,t_j) ),

and every finite-dimensional density into a scalar mixture of Gaussians over
the M-Wright weight. These are the forms implemented; they reproduce the
single-time formulas exactly and integrate to one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.integrate import quad

from . import markov_lift
from .fbm_exact import fbm_kernel, fbm_cholesky
from .markov_lift import phi1, phi3, _i1_i2
from .model import (AccuracyError, DegenerateLawError, GreyParams,
                    NumericalRankError, ParameterError, PathEnsemble,
                    RngStream, TimeGrid)
from .sampling import sample_y_beta
from .specfun import DEFAULT_POLICY, SeriesPolicy, m_wright, mittag_leffler
from .specfun import _mw_support_cut

__all__ = [
    "GgbmLawQuery",
    "GreyOUQuery",
    "f_norm_sq",
    "g_norm_sq",
    "ggbm_char",
    "ggbm_density",
    "ggbm_paths",
    "grey_ou_char",
    "grey_ou_density",
    "grey_ou_paths",
]


def f_norm_sq(x: float, t: float) -> float:
    """Squared L2 norm of f_x(t,.) = 1_{[0,t)} e^{-x(t-.)}:

    (1 - e^{-2xt})/(2x), continuously extended to t at x=0."""
    x = float(x)
    t = float(t)
    if x < 0.0 or t < 0.0:
        raise ParameterError("f_norm_sq requires x >= 0 and t >= 0")
    return t * float(phi1(2.0 * x * t))


def g_norm_sq(x: float, t: float) -> float:
    """Squared L2 norm of g_x(t,.) = 1_{[0,t)} (t-.) e^{-x(t-.)}:

    (1 - e^{-2xt}(1 + 2xt + 2x^2 t^2))/(4x^3), extended to t^3/3 at x=0."""
    x = float(x)
    t = float(t)
    if x < 0.0 or t < 0.0:
        raise ParameterError("g_norm_sq requires x >= 0 and t >= 0")
    return t ** 3 * float(phi3(2.0 * x * t))


@dataclass(frozen=True)
class GgbmLawQuery:
    """Finite-dimensional law query: times with one theta (char) or one point
    (density) per time, each of dimension d."""

    params: GreyParams
    times: np.ndarray
    d: int = 1
    thetas: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        if np.any(t <= 0.0) or (t.size > 1 and np.any(np.diff(t) <= 0.0)):
            raise ParameterError("query times must be strictly increasing and positive")
        object.__setattr__(self, "times", t)
        for name in ("thetas", "points"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v, dtype=float).reshape(t.size, self.d)
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class GreyOUQuery:
    """Single-time grey OU law query; regime picks Z (rough) or W (smooth)."""

    beta: float
    x: float
    t: float
    d: int = 1
    regime: str = "rough_Z"

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise ParameterError(f"beta must lie in (0,1], got {self.beta}")
        if self.x < 0.0:
            raise ParameterError(f"mean-reversion rate must be >= 0, got {self.x}")
        if self.t <= 0.0:
            raise ParameterError(f"query time must be positive, got {self.t}")
        if self.regime not in ("rough_Z", "smooth_W"):
            raise ParameterError(f"regime must be 'rough_Z' or 'smooth_W', got {self.regime!r}")

    @property
    def norm_sq(self) -> float:
        return f_norm_sq(self.x, self.t) if self.regime == "rough_Z" else g_norm_sq(self.x, self.t)


def ggbm_char(query: GgbmLawQuery, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Joint characteristic value E exp(i sum_k (theta_k, B(t_k))).

    Cross-term form E_beta(-1/2 sum_{k,j} (theta_k . theta_j) gamma(t_k,t_j)),
    which reduces to E_beta(-|k|^2 t^alpha / 2) at a single time.
    """
    if query.thetas is None:
        raise ParameterError("ggbm_char needs query.thetas")
    h = query.params.hurst
    t = query.times
    gam = fbm_kernel(h, t[:, None], t[None, :])
    quad_form = float(np.einsum("kd,jd,kj->", query.thetas, query.thetas, gam))
    return mittag_leffler(query.params.beta, -0.5 * quad_form, policy)


def _gaussian_mixture_density(beta: float, q: float, logdet: float, nd: int,
                              policy: SeriesPolicy) -> tuple[float, float]:
    """int (2 pi tau)^{-nd/2} e^{-logdet/2} exp(-q/(2 tau)) M_beta(tau) dtau.

    Returns (value, quadrature residual)."""
    if q == 0.0 and nd >= 2:
        raise DegenerateLawError("joint density diverges at the origin for n*d >= 2")
    c = math.exp(-0.5 * logdet)
    half = 0.5 * nd

    def integrand(tau):
        return (c * (2.0 * math.pi * tau) ** (-half)
                * math.exp(-q / (2.0 * tau) if tau > 0 else -math.inf)
                * m_wright(beta, tau, policy))

    upper = _mw_support_cut(beta, 1.0)
    pts = [p for p in (q / max(nd, 1), 1.0) if 0.0 < p < upper]
    val, err = quad(integrand, 0.0, upper, points=pts or None, epsabs=1e-11,
                    epsrel=1e-9, limit=300)
    if err > 1e-6 * max(1.0, abs(val)):
        raise AccuracyError(f"density quadrature residual {err:.2e}", residual=err)
    return val, err


def ggbm_density(query: GgbmLawQuery, policy: SeriesPolicy = DEFAULT_POLICY,
                 return_residual: bool = False):
    """Joint density of (B(t_1),...,B(t_n)) at query.points.

    The Y-mixture of the n*d-dimensional Gaussian with covariance
    Gamma kron I_d: integrate the Gaussian density against M_beta(tau) dtau.
    """
    if query.points is None:
        raise ParameterError("ggbm_density needs query.points")
    h = query.params.hurst
    t = query.times
    n = t.size
    gam = fbm_kernel(h, t[:, None], t[None, :]).reshape(n, n)
    try:
        low = scipy.linalg.cholesky(gam, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalRankError(f"singular time covariance: {exc}") from exc
    sol = scipy.linalg.solve_triangular(low, query.points, lower=True)
    q = float(np.sum(sol * sol))
    logdet = 2.0 * query.d * float(np.sum(np.log(np.diag(low))))
    val, err = _gaussian_mixture_density(query.params.beta, q, logdet,
                                         n * query.d, policy)
    return (val, err) if return_residual else val


def _draw_y(beta: float, n_paths: int, stream: RngStream,
            y_override=None) -> np.ndarray:
    if y_override is not None:
        y = np.broadcast_to(np.asarray(y_override, dtype=float), (n_paths,)).copy()
    elif beta == 1.0:
        y = np.ones(n_paths)
    else:
        y = np.asarray(sample_y_beta(beta, stream, n=n_paths))
    if np.any(y <= 0.0):
        raise ParameterError("subordination draws must be positive")
    return y


def ggbm_paths(params: GreyParams, grid: TimeGrid, n_paths: int, d: int,
               method: str, stream: RngStream,
               nodes: Optional[markov_lift.LiftNodes] = None,
               y_override=None) -> PathEnsemble:
    """ggBm paths: one Y draw per path (shared across coordinates and times)
    multiplying an exact or lifted fBm path.

    method "exact" uses the Cholesky generator (any grid, any alpha in (0,2));
    "lift" uses the OU superposition (uniform grid, alpha != 1). y_override
    injects a fixed subordination value (test hook; y_override=1 reduces to
    plain fBm).
    """
    if method not in ("exact", "lift"):
        raise ParameterError(f"method must be 'exact' or 'lift', got {method!r}")
    h = params.hurst
    y = _draw_y(params.beta, n_paths, stream, y_override)
    if method == "exact":
        ens = fbm_cholesky(h, grid, n_paths, d, stream)
    else:
        if abs(params.alpha - 1.0) < 1e-12:
            raise ParameterError("the lift requires alpha != 1 (alpha = 1 is plain Bm)")
        if nodes is None:
            m, x_min, x_max = markov_lift.default_node_config(
                h, horizon=float(grid.times[-1]))
            nodes = markov_lift.build_nodes(
                h, "rough" if h < 0.5 else "smooth", m, x_min, x_max)
        _, ens = markov_lift.simulate_bank(nodes, grid, n_paths, d, stream)
    values = ens.values * np.sqrt(y)[:, None, None]
    return PathEnsemble(values=values, grid=grid, d=d, method=ens.method,
                        seed=stream.seed, y_values=y)


def grey_ou_char(query: GreyOUQuery, k, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Characteristic value E exp(i (k, P(t))) = E_beta(-|k|^2 N / 2) where
    N is the squared kernel norm of the queried grey OU process."""
    kv = np.atleast_1d(np.asarray(k, dtype=float))
    if kv.size != query.d:
        raise ParameterError(f"k must have d={query.d} components")
    return mittag_leffler(query.beta, -0.5 * float(kv @ kv) * query.norm_sq, policy)


def grey_ou_density(query: GreyOUQuery, y, policy: SeriesPolicy = DEFAULT_POLICY,
                    return_residual: bool = False):
    """Density of the grey OU process at time t, evaluated at y in R^d.

    The scalar-mixture form int (2 pi tau N)^{-d/2} e^{-|y|^2/(2 tau N)}
    M_beta(tau) dtau with N the squared kernel norm; equivalently
    2^{d/2-1} Md_{beta/2}(sqrt(2) y, N^{1/beta}) in the d-dimensional
    M-Wright notation.
    """
    n = query.norm_sq
    if n <= 0.0:
        raise DegenerateLawError("degenerate law at t = 0 (zero kernel norm)")
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    if yv.size != query.d:
        raise ParameterError(f"y must have d={query.d} components")
    q = float(yv @ yv) / n
    logdet = query.d * math.log(n)
    val, err = _gaussian_mixture_density(query.beta, q, logdet, query.d, policy)
    return (val, err) if return_residual else val


def grey_ou_paths(beta: float, x: float, grid: TimeGrid, n_paths: int, d: int,
                  regime: str, stream: RngStream,
                  y_override=None) -> PathEnsemble:
    """Paths of the grey OU processes: sqrt(Y) X_x (rough_Z) or sqrt(Y) Q_x
    (smooth_W), with (X, Q) stepped by their exact zero-initialized
    transitions on a uniform grid; one Y per path."""
    if regime not in ("rough_Z", "smooth_W"):
        raise ParameterError(f"regime must be 'rough_Z' or 'smooth_W', got {regime!r}")
    if not (0.0 < beta <= 1.0):
        raise ParameterError(f"beta must lie in (0,1], got {beta}")
    if x < 0.0:
        raise ParameterError(f"mean-reversion rate must be >= 0, got {x}")
    if not grid.uniform or grid.n < 2 or grid.times[0] != 0.0:
        raise ParameterError("grey OU stepping requires a uniform grid starting at 0")
    if n_paths < 1 or d < 1:
        raise ParameterError("n_paths and d must be >= 1")
    dt = grid.step
    g = stream.generator
    batch = n_paths * d
    decay = math.exp(-x * dt)
    y = _draw_y(beta, n_paths, stream, y_override)

    i0 = dt * float(phi1(2.0 * x * dt))
    vals = np.zeros((grid.n, batch))
    if regime == "rough_Z":
        s0 = math.sqrt(i0)
        state = np.zeros(batch)
        for k in range(1, grid.n):
            state = decay * state + s0 * g.standard_normal(batch)
            vals[k] = state
    else:
        i1, i2 = (float(v) for v in _i1_i2(np.asarray(2.0 * x), dt))
        l11 = math.sqrt(i0)
        l21 = i1 / l11
        l22 = math.sqrt(max(i2 - l21 * l21, 0.0))
        xs = np.zeros(batch)
        qs = np.zeros(batch)
        for k in range(1, grid.n):
            z1 = g.standard_normal(batch)
            z2 = g.standard_normal(batch)
            qs = decay * (qs + dt * xs) + l21 * z1 + l22 * z2
            xs = decay * xs + l11 * z1
            vals[k] = qs
    values = vals.reshape(grid.n, n_paths, d).transpose(1, 0, 2)
    values = values * np.sqrt(y)[:, None, None]
    return PathEnsemble(values=np.ascontiguousarray(values), grid=grid, d=d,
                        method="lift_rough" if regime == "rough_Z" else "lift_smooth",
                        seed=stream.seed, y_values=y)
