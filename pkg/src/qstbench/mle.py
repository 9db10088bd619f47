"""Gaussian maximum-likelihood reconstruction over the tau parameterisation.

The objective treats each tomography value as Gaussian around its expected
value with variance equal to that expected value:

    nll(tau) = sum_i (Tr(rho(tau) P_i) - m_i)**2 / (2 max(Tr(rho(tau) P_i), floor))

and is minimised with BFGS from a few random starting points.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from qstbench.errors import DegenerateParameterError, DimensionError, LineSearchStalled, OptimizationError
from qstbench.measurement import MeasurementRecord, ProjectorSet
from qstbench.optimize import bfgs_minimize
from qstbench.qstate import density_from_tau, factor_from_tau


@dataclass(frozen=True)
class MleConfig:
    grad_tolerance: float = 1e-8
    max_iterations: int = 500
    denom_floor: float = 1e-9
    init_scale: float | None = None  # None: sqrt(6 / (2 * 4**d))
    restarts: int = 3

    def __post_init__(self):
        if not self.grad_tolerance > 0:
            raise ValueError("grad_tolerance must be positive")
        if not self.denom_floor > 0:
            raise ValueError("denom_floor must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")

    def scale_for(self, d: int) -> float:
        if self.init_scale is not None:
            return float(self.init_scale)
        return float(np.sqrt(6.0 / (2 * 4**d)))


@dataclass(frozen=True)
class MleResult:
    rho: np.ndarray
    tau: np.ndarray
    nll: float
    iterations: int
    converged: bool
    wall_time: float


def _check(tau, record: MeasurementRecord, proj: ProjectorSet, floor: float) -> np.ndarray:
    if record.d != proj.d:
        raise DimensionError(f"record has d={record.d} but projectors have d={proj.d}")
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (4**proj.d,):
        raise DimensionError(f"tau must have length {4**proj.d}, got shape {tau.shape}")
    if not floor > 0:
        raise ValueError("floor must be positive")
    return tau


def _objective(tau, values, projectors, floor, with_grad=True):
    factor = factor_from_tau(tau)
    gram = factor.conj().T @ factor
    trace = np.trace(gram).real
    if not trace > 0.0:
        raise DegenerateParameterError("tau vector is all zeros")
    expected = np.einsum("ab,kba->k", gram, projectors).real / trace
    resid = expected - values
    denom = np.maximum(expected, floor)
    value = float(np.sum(resid * resid / (2.0 * denom)))
    if not with_grad:
        return value, None

    floored = expected <= floor
    # d(term)/d(expected): (e^2 - m^2) / (2 e^2) above the floor, (e - m) / floor below
    weights = np.where(
        floored,
        resid / floor,
        (expected * expected - values * values) / (2.0 * denom * denom),
    )
    # gradient w.r.t. rho is G = sum_i w_i P_i; chain through rho = T^+T / Tr(T^+T)
    g_rho = np.einsum("k,kab->ab", weights, projectors)
    c = np.einsum("ab,ba->", gram, g_rho).real
    grad_factor = (2.0 / trace) * (factor @ g_rho - (c / trace) * factor)

    n = factor.shape[0]
    rows, cols = np.tril_indices(n, k=-1)
    lower = grad_factor[rows, cols]
    grad = np.empty(n * n)
    grad[:n] = np.diagonal(grad_factor).real
    grad[n::2] = lower.real
    grad[n + 1 :: 2] = lower.imag
    return value, grad


def nll(tau, record: MeasurementRecord, proj: ProjectorSet, floor: float = 1e-9) -> float:
    """Gaussian negative log-likelihood of ``record`` under ``rho(tau)``."""
    tau = _check(tau, record, proj, floor)
    return _objective(tau, record.values, proj.projectors, floor, with_grad=False)[0]


def nll_gradient(tau, record: MeasurementRecord, proj: ProjectorSet, floor: float = 1e-9) -> np.ndarray:
    """Analytic gradient of :func:`nll` with respect to every tau component."""
    tau = _check(tau, record, proj, floor)
    return _objective(tau, record.values, proj.projectors, floor)[1]


def reconstruct_mle(
    record: MeasurementRecord,
    proj: ProjectorSet,
    config: MleConfig | None = None,
    rng=None,
) -> MleResult:
    """Estimate the density matrix behind ``record``.

    Runs BFGS from ``config.restarts`` uniform random starts in
    ``[-init_scale, init_scale]`` and keeps the run with the lowest objective.
    A restart whose line search stalls still competes with its last iterate
    but counts as not converged.

    Raises:
        OptimizationError: no restart produced a finite objective.
    """
    config = config or MleConfig()
    if record.d != proj.d:
        raise DimensionError(f"record has d={record.d} but projectors have d={proj.d}")
    rng = np.random.default_rng(rng)
    values = record.values
    projectors = proj.projectors
    floor = config.denom_floor
    scale = config.scale_for(proj.d)

    def fun(x):
        return _objective(x, values, projectors, floor)

    start = time.perf_counter()
    best = None
    for _ in range(config.restarts):
        x0 = rng.uniform(-scale, scale, size=4**proj.d)
        try:
            x, f_value, iterations, converged = bfgs_minimize(
                fun, x0, tolerance=config.grad_tolerance, max_iter=config.max_iterations
            )
        except LineSearchStalled as exc:
            x, f_value, iterations, converged = exc.x, exc.f_value, exc.iterations, False
        except (ValueError, FloatingPointError):
            continue
        if x is None or not np.isfinite(f_value):
            continue
        if best is None or f_value < best[1]:
            best = (x, f_value, iterations, converged)
    elapsed = time.perf_counter() - start

    if best is None:
        raise OptimizationError("every MLE restart produced a non-finite objective")
    x, f_value, iterations, converged = best
    return MleResult(
        rho=density_from_tau(x),
        tau=x,
        nll=float(f_value),
        iterations=int(iterations),
        converged=bool(converged),
        wall_time=elapsed,
    )
