"""Model fitting by iterative scaling (with Steffensen acceleration) or
quasi-Newton ascent.

Iterative scaling multiplies each worth and tie parameter by the ratio of
its observed to expected sufficient statistic; convergence is declared
when the two agree in relative terms.  Once the iterates are close, a
componentwise Steffensen extrapolation is applied to pairs of scaling
sweeps, with a log-likelihood guard so ascent is never lost.  The
quasi-Newton routes maximize the same log-likelihood in an unconstrained
parameterization (one log-worth pinned at zero) using the exact gradient
observed - expected.

Fitting at ``npseudo = 0`` is maximum likelihood and requires a strongly
connected win/loss network.  With ``npseudo > 0`` (default 0.5), ghost
pseudo-rankings are appended, every parameter is estimable, and estimates
shrink toward equal worth; reported log-likelihoods always exclude the
pseudo-rankings.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .errors import DataError, ModelError
from .likelihood import (
    EventSet,
    Parameters,
    SufficientStats,
    expected_sufficient_stats,
)
from .network import adjacency, augment_with_pseudo_rankings, connectivity
from .rankings import RankingsTable

__all__ = [
    "FitConfig",
    "ModelFit",
    "fit",
    "quasi_newton_fit",
    "iterative_scaling_step",
    "steffensen_accelerate",
    "convergence_check",
]

_METHODS = ("iterative_scaling", "quasi_newton", "limited_memory_quasi_newton")

# floor for log tie parameters whose observed count is zero (worth ~ 1e-217)
_LOG_FLOOR = -500.0

NOT_CONNECTED_MESSAGE = ("Network is not fully connected - cannot estimate "
                         "all item parameters with npseudo = 0")


@dataclass(frozen=True)
class FitConfig:
    """Fitting options.

    Attributes:
        npseudo: weight of each ghost pseudo-ranking (0 disables them and
            requests plain maximum likelihood).
        method: one of "iterative_scaling" (default), "quasi_newton",
            "limited_memory_quasi_newton".
        maxit: maximum number of iterative-scaling sweeps / optimizer
            iterations; reaching it warns and returns the current iterate.
        tol: relative tolerance on observed vs expected sufficient stats.
        steffensen_threshold: acceleration starts once the convergence
            measure falls below this value.
        tie_start: starting value for every tie prevalence parameter.
        allow_high_tie_orders: permit ties above order 4 (enumeration cost
            grows combinatorially; off by default).
    """

    npseudo: float = 0.5
    method: str = "iterative_scaling"
    maxit: int = 500
    tol: float = 1e-6
    steffensen_threshold: float = 0.1
    tie_start: float = 0.1
    allow_high_tie_orders: bool = False

    def __post_init__(self):
        if self.npseudo < 0:
            raise DataError("npseudo must be non-negative")
        if self.method not in _METHODS:
            raise DataError(f"method must be one of {_METHODS}")
        if self.maxit < 1:
            raise DataError("maxit must be at least 1")
        if self.tol <= 0:
            raise DataError("tol must be positive")


@dataclass
class ModelFit:
    """A fitted model.

    ``params`` is on the internal scale: one log-worth per column of the
    (possibly ghost-augmented) table, normalized so the worths sum to one,
    plus log tie parameters.  ``log_likelihood`` is evaluated on the data
    rows only.  The covariance matrix is computed lazily by the inference
    module via the retained event structure.
    """

    params: Parameters
    items: tuple[str, ...]
    has_ghost: bool
    converged: bool
    iterations: int
    log_likelihood: float
    npseudo: float
    method: str
    config: FitConfig
    df_outcomes: float
    events: EventSet = field(repr=False)

    @property
    def n_real_items(self) -> int:
        return len(self.items)

    @property
    def max_tie_order(self) -> int:
        return self.params.max_tie_order

    @property
    def n_free_params(self) -> int:
        """Free parameters: item contrasts plus tie prevalences."""
        n_cols = self.params.n_items
        return (n_cols - 1) + (self.max_tie_order - 1)

    def real_log_worth(self) -> np.ndarray:
        return self.params.log_worth[: self.n_real_items]

    def worth(self) -> np.ndarray:
        """Worths of the real items on the probability scale (sum to 1)."""
        lw = self.real_log_worth()
        w = np.exp(lw - lw.max())
        return w / w.sum()

    def _ref_weights(self, ref) -> np.ndarray:
        j = self.n_real_items
        u = np.zeros(j)
        if ref is None:
            u[:] = 1.0 / j
        elif isinstance(ref, (list, tuple, set, frozenset)):
            idx = [self.items.index(r) if isinstance(r, str) else int(r) for r in ref]
            if not idx:
                raise DataError("ref set must be nonempty")
            u[idx] = 1.0 / len(idx)
        elif isinstance(ref, str):
            if ref not in self.items:
                raise DataError(f"unknown ref item {ref!r}")
            u[self.items.index(ref)] = 1.0
        else:
            i = int(ref)
            if not 0 <= i < j:
                raise DataError(f"ref index {i} out of range")
            u[i] = 1.0
        return u

    def coef(self, ref=0, log: bool = True) -> tuple[list[str], np.ndarray]:
        """Parameter estimates for reporting.

        On the log scale, item estimates are contrasts against ``ref``
        (an index, a name, a set to average, or None for the mean of all
        items) and tie parameters are log prevalences.  With ``log=False``
        item worths are returned on the probability scale (summing to one)
        together with the tie prevalences.
        """
        names = list(self.items) + [f"tie{n}" for n in range(2, self.max_tie_order + 1)]
        if log:
            lw = self.real_log_worth()
            contrasts = lw - self._ref_weights(ref) @ lw
            return names, np.concatenate([contrasts, self.params.log_tie])
        return names, np.concatenate([self.worth(), np.exp(self.params.log_tie)])


def _normalize_worth(theta: np.ndarray, n_items: int) -> np.ndarray:
    lw = theta[:n_items]
    m = lw.max()
    total = m + np.log(np.exp(lw - m).sum())
    out = theta.copy()
    out[:n_items] = lw - total
    return out


def convergence_check(obs, exp, tol: float) -> bool:
    """True iff max_i |obs_i - exp_i| / max(1, |obs_i|) <= tol across all
    item and tie statistics."""
    o = obs.vector() if isinstance(obs, SufficientStats) else np.asarray(obs)
    e = exp.vector() if isinstance(exp, SufficientStats) else np.asarray(exp)
    return bool(_discrepancy(o, e) <= tol)


def _discrepancy(obs: np.ndarray, exp: np.ndarray) -> float:
    denom = np.maximum(1.0, np.abs(obs))
    return float(np.max(np.abs(obs - exp) / denom)) if obs.size else 0.0


def steffensen_accelerate(x_t: np.ndarray, x_t1: np.ndarray, x_t2: np.ndarray) -> np.ndarray:
    """Componentwise Steffensen extrapolation from three consecutive
    iterates; components with negligible second difference keep the plain
    update."""
    d1 = x_t1 - x_t
    d2 = x_t2 - 2.0 * x_t1 + x_t
    out = x_t2.copy()
    safe = np.abs(d2) > 1e-14 * np.maximum(1.0, np.abs(x_t2))
    out[safe] = x_t[safe] - d1[safe] ** 2 / d2[safe]
    return out


def iterative_scaling_step(params: Parameters, obs: SufficientStats,
                           table: RankingsTable) -> Parameters:
    """One multiplicative update alpha_i *= obs_i/exp_i, delta_n *= obs_n/exp_n
    (expectations at the current parameters), then worth renormalization.

    Raises:
        ModelError: an expected statistic is zero where the observed one is
            positive (structural non-identifiability).
    """
    exp = expected_sufficient_stats(table, params)
    return _scaling_update(params, obs.vector(), exp.vector())


def _scaling_update(params: Parameters, obs: np.ndarray, exp: np.ndarray) -> Parameters:
    j = params.n_items
    if np.any((exp <= 0) & (obs > 0)):
        raise ModelError("zero expected count for a positive observed count; "
                         "the win/loss structure does not identify all parameters")
    with np.errstate(divide="ignore"):
        ratio = np.where(obs > 0, np.log(obs) - np.log(exp), -np.inf)
    theta = params.theta()
    new = theta + ratio
    new[j:] = np.maximum(new[j:], _LOG_FLOOR)
    # items with zero observed wins would diverge; connectivity rules it out
    if not np.all(np.isfinite(new[:j])):
        raise ModelError("an item has no wins or tie credit; "
                         "fit requires a strongly connected network or npseudo > 0")
    new = _normalize_worth(new, j)
    return Parameters.from_theta(new, j)


def _start_theta(events: EventSet, config: FitConfig) -> np.ndarray:
    p = Parameters.uniform(events.n_items, events.max_tie_order, config.tie_start)
    return p.theta()


def _scaling_solve(events: EventSet, w: np.ndarray, obs: np.ndarray,
                   config: FitConfig,
                   theta0: np.ndarray | None = None) -> tuple[np.ndarray, bool, int]:
    """Iterative scaling of an event structure under arbitrary event
    weights and observed statistics.

    Sweeps run in cycles of three per iteration; once the convergence
    measure is inside the activation threshold, each cycle ends with a
    log-likelihood-guarded Steffensen extrapolation of its three sweeps.
    """
    j = events.n_items

    def sweep(theta: np.ndarray) -> np.ndarray:
        exp = events.expected(theta, w)
        params = Parameters.from_theta(theta, j)
        return _scaling_update(params, obs, exp).theta()

    if theta0 is None:
        theta = _normalize_worth(_start_theta(events, config), j)
    else:
        theta = _normalize_worth(np.array(theta0, dtype=float), j)
    disc = _discrepancy(obs, events.expected(theta, w))
    iterations = 0
    converged = disc <= config.tol
    while not converged and iterations < config.maxit:
        iterations += 1
        accelerate = disc < config.steffensen_threshold
        t1 = sweep(theta)
        t2 = sweep(t1)
        t3 = sweep(t2)
        if accelerate:
            prop = _normalize_worth(steffensen_accelerate(t1, t2, t3), j)
            prop[j:] = np.maximum(prop[j:], _LOG_FLOOR)
            if events.loglik(prop, w, obs) >= events.loglik(t3, w, obs):
                theta = prop
            else:
                theta = t3
        else:
            theta = t3
        disc = _discrepancy(obs, events.expected(theta, w))
        converged = disc <= config.tol
    return theta, converged, iterations


def _iterative_scaling(events: EventSet, config: FitConfig) -> tuple[np.ndarray, bool, int]:
    return _scaling_solve(events, events.w_total, events.obs_total, config)


def _quasi_newton(events: EventSet, config: FitConfig) -> tuple[np.ndarray, bool, int]:
    obs = events.obs_total
    w = events.w_total
    j = events.n_items
    if np.any(obs[j:] <= 0):
        raise ModelError("a tie order in the model has no observed ties; "
                         "quasi-Newton fitting cannot profile it")
    free = np.ones(events.n_params, dtype=bool)
    free[0] = False     # pin the first log-worth at zero

    def unpack(x: np.ndarray) -> np.ndarray:
        theta = np.zeros(events.n_params)
        theta[free] = x
        return theta

    def negloglik(x):
        return -events.loglik(unpack(x), w, obs)

    def neggrad(x):
        return -(obs - events.expected(unpack(x), w))[free]

    x0 = _start_theta(events, config)
    x0 = (x0 - x0[0] * np.concatenate([np.ones(j), np.zeros(events.n_params - j)]))[free]
    scipy_method = "BFGS" if config.method == "quasi_newton" else "L-BFGS-B"
    opts = {"maxiter": config.maxit}
    if scipy_method == "BFGS":
        opts["gtol"] = config.tol * 1e-2
    else:
        opts.update({"ftol": 1e-14, "gtol": config.tol * 1e-2, "maxcor": 25})
    res = scipy.optimize.minimize(negloglik, x0, jac=neggrad,
                                  method=scipy_method, options=opts)
    if not res.success and "precision loss" not in str(res.message).lower():
        status = str(res.message)
        if res.nit >= config.maxit:
            pass    # treated as non-convergence below
        else:
            raise ModelError(f"quasi-Newton optimization failed: {status}")
    theta = _normalize_worth(unpack(res.x), j)
    exp = events.expected(theta, w)
    converged = _discrepancy(obs, exp) <= config.tol
    return theta, converged, int(res.nit)


def fit(table: RankingsTable, config: FitConfig | None = None,
        weights=None, **overrides) -> ModelFit:
    """Fit the ranking model to a table.

    With ``npseudo = 0`` this is maximum likelihood and the win/loss
    network must be strongly connected.  With ``npseudo > 0`` ghost
    pseudo-rankings are appended before fitting.  Keyword overrides update
    individual :class:`FitConfig` fields.

    Raises:
        DataError: no usable rankings.
        ModelError: disconnected network at ``npseudo = 0``.
    """
    if config is None:
        config = FitConfig()
    if overrides:
        config = replace(config, **overrides)
    if weights is not None:
        table = table.with_weights(weights)

    usable = (~table.na_mask) & (table.weights > 0)
    if not usable.any():
        raise DataError("no usable rankings: all rows are NA or zero-weight")

    max_tie = table.max_tie_order()

    if config.npseudo == 0:
        report = connectivity(adjacency(table))
        if not report.strongly_connected:
            raise ModelError(NOT_CONNECTED_MESSAGE)
        augmented = table
        has_ghost = False
        pseudo_mask = None
    else:
        augmented = augment_with_pseudo_rankings(table, config.npseudo)
        has_ghost = True
        pseudo_mask = np.zeros(augmented.n_rows, dtype=bool)
        pseudo_mask[table.n_rows:] = True

    events = EventSet(augmented, max_tie, pseudo_mask=pseudo_mask,
                      allow_high_tie_orders=config.allow_high_tie_orders)

    if config.method == "iterative_scaling":
        theta, converged, iterations = _iterative_scaling(events, config)
    else:
        theta, converged, iterations = _quasi_newton(events, config)

    if not converged:
        warnings.warn("Iterations have not converged")

    params = Parameters.from_theta(theta, events.n_items)
    ll_data = events.loglik(theta, events.w_data, events.obs_data)
    return ModelFit(
        params=params,
        items=table.items,
        has_ghost=has_ghost,
        converged=converged,
        iterations=iterations,
        log_likelihood=ll_data,
        npseudo=config.npseudo,
        method=config.method,
        config=config,
        df_outcomes=events.df_outcomes(),
        events=events,
    )


def quasi_newton_fit(table: RankingsTable, config: FitConfig | None = None,
                     **overrides) -> ModelFit:
    """Fit by BFGS ascent of the log-likelihood (see :func:`fit`)."""
    if config is None:
        config = FitConfig(method="quasi_newton")
    elif config.method == "iterative_scaling":
        config = replace(config, method="quasi_newton")
    return fit(table, config, **overrides)
