"""Iterative Bregman projections baseline for entropic barycenters.

The classical scaling scheme: build the kernel K = exp(-C/reg) once, then
alternate per-measure column rescalings against a geometric-mean barycenter
update of the row marginals.  The naive mode works on the kernel entries in
plain double precision, which is exactly what breaks for small `reg`: K
underflows to zero away from the diagonal, scaling vectors blow up to
compensate, and the iteration degenerates into 0/0.  The run then stops with
status ``underflow-degenerate`` instead of silently emitting garbage.  The
stabilized mode performs the same iteration on log-domain potentials with
log-sum-exp reductions and always returns a finite simplex vector.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

from .core import (
    ConfigError,
    DualPoint,
    PrimalPoint,
    certificate_values,
)
from .report import RunReport


@dataclass(frozen=True)
class IBPConfig:
    """Entropic regularization weight, sweep budget, and mode switch."""

    reg: float
    iters: int = 10000
    stabilized: bool = False
    # Stop once the worst per-measure l1 violation of the fixed marginals
    # drops below this (masses are 1, so absolute equals relative).
    tol: float = 1e-6

    def __post_init__(self):
        if self.reg <= 0:
            raise ConfigError("regularization must be positive")
        if self.iters < 1:
            raise ConfigError("need at least one sweep")


def _certificate(plans, bary, prob):
    """Exact duality gap of the normalized iterate paired with zero duals."""
    sums = plans.sum(axis=1, keepdims=True)
    total = bary.sum()
    x = PrimalPoint(plans=plans / sums, bary=bary / total)
    y = DualPoint(duals=np.zeros((prob.m, 2 * prob.n)))
    primal_value, dual_value = certificate_values(x, y, prob)
    return primal_value - dual_value, x, y


def _scaling_merit(mass_total, log_v_paired, reg, m):
    """Merit function the scaling sweeps minimize block-exactly.

    Equals the total mass of the scaled plans minus the pairing of the
    measures with their log scalings, times reg/m: the regularized dual
    objective (up to an additive constant).  Both half-updates are exact
    block minimizations of it, so it is non-increasing sweep over sweep.
    """
    return (reg / m) * (mass_total - log_v_paired)


def ibp_barycenter(prob, cfg, log_stride=None, oracle=None, timer=None):
    """Entropic barycenter via iterative Bregman projections.

    Returns ``(bary, report)``.  On an underflow-degenerate naive run the
    barycenter is None and ``report.status`` says so; hitting the sweep cap
    returns the last iterate with ``report.status == "iteration-cap"``.
    The report logs, per recorded sweep, the exact saddle certificate of the
    current (normalized) plans paired with zero duals, and the scaling merit
    function (see :func:`_scaling_merit`) as the objective column.
    """
    clock = timer if timer is not None else time.perf_counter
    t0 = clock()
    stride = int(log_stride) if log_stride else max(1, cfg.iters // 200)
    report = RunReport(
        algorithm="ibp",
        config={
            "reg": cfg.reg,
            "iters": cfg.iters,
            "stabilized": cfg.stabilized,
            "tol": cfg.tol,
            "log_stride": stride,
        },
    )
    runner = _ibp_stabilized if cfg.stabilized else _ibp_naive
    return runner(prob, cfg, report, stride, oracle, clock, t0)


def _finish(report, bary, iteration, converged):
    report.iterations_run = iteration
    report.converged = converged
    if not converged:
        report.status = "iteration-cap"
    report.final_bary = bary
    if report.records:
        report.final_gap = report.records[-1].duality_gap
    return bary, report


def _record(report, prob, plans, bary, iteration, oracle, clock, t0, objective):
    gap, x, y = _certificate(plans, bary, prob)
    report.add(
        iteration,
        clock() - t0,
        gap,
        objective,
        None if oracle is None else oracle(x.bary),
    )
    report.final_x, report.final_y = x, y


def _ibp_naive(prob, cfg, report, stride, oracle, clock, t0):
    n, m = prob.n, prob.m
    C, Q = prob.cost.C, prob.measures
    K = np.exp(-C / cfg.reg)
    if np.any(K.sum(axis=1) == 0.0):
        report.status = "underflow-degenerate"
        report.iterations_run = 0
        return None, report

    u = np.full((m, n), 1.0 / n)
    p = np.full(n, 1.0 / n)
    for it in range(1, cfg.iters + 1):
        v = Q / (u @ K)
        UKv = u * (v @ K.T)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.exp(np.log(UKv).mean(axis=0))
            u = u * p[None, :] / UKv
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v)) and np.all(np.isfinite(p))):
            report.status = "underflow-degenerate"
            report.iterations_run = it
            return None, report
        violation = np.abs(v * (u @ K) - Q).sum(axis=1).max()
        if it % stride == 0 or violation <= cfg.tol or it == cfg.iters:
            plans = u[:, :, None] * K[None, :, :] * v[:, None, :]
            if not np.all(np.isfinite(plans)) or np.any(plans.sum(axis=(1, 2)) == 0.0):
                report.status = "underflow-degenerate"
                report.iterations_run = it
                return None, report
            merit = _scaling_merit(
                float((u * (v @ K.T)).sum()), float(xlogy(Q, v).sum()), cfg.reg, m
            )
            _record(report, prob, plans.reshape(m, n * n), p, it, oracle, clock, t0, merit)
        if violation <= cfg.tol:
            return _finish(report, p / p.sum(), it, True)
    return _finish(report, p / p.sum(), cfg.iters, False)


def _ibp_stabilized(prob, cfg, report, stride, oracle, clock, t0):
    n, m = prob.n, prob.m
    C, Q = prob.cost.C, prob.measures
    logK = -C / cfg.reg
    with np.errstate(divide="ignore"):
        logQ = np.log(Q)

    phi = np.full((m, n), -math.log(n))
    log_p = np.full(n, -math.log(n))
    for it in range(1, cfg.iters + 1):
        psi = logQ - logsumexp(logK[None, :, :] + phi[:, :, None], axis=1)
        log_row = logsumexp(logK[None, :, :] + psi[:, None, :], axis=2)
        log_p = (phi + log_row).mean(axis=0)
        phi = log_p[None, :] - log_row
        col = np.exp(psi + logsumexp(logK[None, :, :] + phi[:, :, None], axis=1))
        violation = np.abs(col - Q).sum(axis=1).max()
        if it % stride == 0 or violation <= cfg.tol or it == cfg.iters:
            plans = np.exp(phi[:, :, None] + logK[None, :, :] + psi[:, None, :])
            merit = _scaling_merit(
                float(np.exp(phi + log_row).sum()),
                float(np.where(Q > 0, Q * psi, 0.0).sum()),
                cfg.reg,
                m,
            )
            _record(report, prob, plans.reshape(m, n * n), np.exp(log_p), it, oracle, clock, t0, merit)
        if violation <= cfg.tol:
            break
    p = np.exp(log_p - logsumexp(log_p))
    return _finish(report, p, it, bool(violation <= cfg.tol))
