"""Entropy-smoothed equilibrium system and its damped least-squares solver.

Adding an entropy term (weight lam) to every player's objective replaces the
piecewise-linear equilibrium conditions with a smooth square system

    F(x, v) = [x - exp((E^T v - b - C x) / lam - 1);  s - E x] = 0,

which has a unique solution for lam > 0 on connected graphs with monotone
interaction costs.  The solver below drives ||F|| to tolerance with a
Levenberg-Marquardt iteration and a lam-continuation wrapper for small lam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import numerics
from .errors import ExponentOverflowError, NotConvergedError
from .game import AtomicRoutingGame

# Exponent handling: entries are clamped at EXP_CLAMP to keep trial residuals
# finite, and anything past EXP_LIMIT is treated as a hard failure.
EXP_CLAMP = 50.0
EXP_LIMIT = 200.0

# Returned flows are floored at this value so they stay elementwise positive
# even when the exact smoothed flow underflows to zero.
_POSITIVE_FLOOR = 1e-300

_DAMPING_MIN = 1e-15
_DAMPING_MAX = 1e15


@dataclass(frozen=True)
class SmoothEqSettings:
    """Solver settings for one smoothed solve at entropy weight lam."""

    lam: float
    residual_tol: float = 1e-10
    max_iters: int = 200
    lm_damping_init: float = 1e-3
    interior_eps: float = 0.1

    def __post_init__(self) -> None:
        if self.lam <= 0.0:
            raise ValueError("lam must be positive")
        if self.residual_tol <= 0.0:
            raise ValueError("residual_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.lm_damping_init <= 0.0:
            raise ValueError("lm_damping_init must be positive")
        if self.interior_eps <= 0.0:
            raise ValueError("interior_eps must be positive")


@dataclass(frozen=True)
class HomotopySchedule:
    """Geometric continuation schedule in the entropy weight."""

    lambda_start: float = 1.0
    decay: float = 0.5
    lambda_min: float = 1e-3

    def __post_init__(self) -> None:
        if self.lambda_start <= 0.0 or self.lambda_min <= 0.0:
            raise ValueError("entropy weights must be positive")
        if self.lambda_min > self.lambda_start:
            raise ValueError("lambda_min cannot exceed lambda_start")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must lie in (0, 1)")

    def stages(self) -> list[float]:
        """Entropy weights visited, ending exactly at lambda_min."""
        out = [self.lambda_start]
        lam = self.lambda_start
        while lam > self.lambda_min:
            lam = max(lam * self.decay, self.lambda_min)
            out.append(lam)
        return out


@dataclass(frozen=True)
class EquilibriumSolution:
    """Converged (or best-effort) solution of the smoothed system."""

    x: np.ndarray
    v: np.ndarray
    residual_norm: float
    lam: float
    iterations: int
    converged: bool


def _exponent(game: AtomicRoutingGame, x: np.ndarray, v: np.ndarray, lam: float) -> np.ndarray:
    return (game.e_blk.T @ v - game.costs.b - game.costs.C @ x) / lam - 1.0


def _check_exponent(g: np.ndarray, lam: float) -> None:
    top = float(np.max(g))
    if top > EXP_LIMIT:
        raise ExponentOverflowError(
            f"smoothed-map exponent {top:.1f} exceeds {EXP_LIMIT:.0f} at lam={lam:g}"
        )


def residual_F(game: AtomicRoutingGame, x: np.ndarray, v: np.ndarray, lam: float) -> np.ndarray:
    """Stacked residual of the smoothed equilibrium system.

    First p*m entries: x minus the exponential fixed-point map; remaining
    p*(n-1) entries: conservation s - E x.

    Raises:
        ExponentOverflowError: some exponent entry exceeds the safe range.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if x.shape != (game.pm,) or v.shape != (game.dim_v,):
        raise ValueError("bad flow or multiplier length")
    g = _exponent(game, x, v, lam)
    _check_exponent(g, lam)
    ex = np.exp(np.minimum(g, EXP_CLAMP))
    return np.concatenate([x - ex, game.s - game.e_blk @ x])


def jacobian_F(game: AtomicRoutingGame, x: np.ndarray, v: np.ndarray, lam: float) -> np.ndarray:
    """Jacobian of residual_F with respect to (x, v).

    Blocks: [[I + D C / lam, -D E^T / lam], [-E, 0]] with D the diagonal of
    exponential-map values.  Entries past the exponent clamp contribute zero
    derivative, matching the clamped residual exactly.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if x.shape != (game.pm,) or v.shape != (game.dim_v,):
        raise ValueError("bad flow or multiplier length")
    g = _exponent(game, x, v, lam)
    _check_exponent(g, lam)
    d = np.where(g <= EXP_CLAMP, np.exp(np.minimum(g, EXP_CLAMP)), 0.0)
    pm, dim_v = game.pm, game.dim_v
    jac = np.zeros((pm + dim_v, pm + dim_v))
    jac[:pm, :pm] = np.eye(pm) + (d[:, None] * game.costs.C) / lam
    jac[:pm, pm:] = -(d[:, None] * game.e_blk.T) / lam
    jac[pm:, :pm] = -game.e_blk
    return jac


def solve_nls(
    game: AtomicRoutingGame,
    settings: SmoothEqSettings,
    warm_start: tuple[np.ndarray, np.ndarray] | None = None,
    trace: list[float] | None = None,
) -> EquilibriumSolution:
    """Solve the smoothed system by damped least squares.

    Starts from a strictly positive interior flow (or the given warm start)
    and iterates Levenberg-Marquardt steps: damping is divided by 10 on an
    accepted step and multiplied by 10 on a rejected one.  Trial points whose
    exponent overflows are rejected like any other failed step.  Returns the
    incumbent with converged=False when the iteration budget runs out.

    Raises:
        ExponentOverflowError: the starting point itself overflows.
    """
    if warm_start is None:
        x = game.interior_point(settings.interior_eps)
        v = np.zeros(game.dim_v)
    else:
        x = np.array(warm_start[0], dtype=float)
        v = np.array(warm_start[1], dtype=float)
    x = np.maximum(x, _POSITIVE_FLOOR)

    pm = game.pm
    resid = residual_F(game, x, v, settings.lam)
    norm = float(np.linalg.norm(resid))
    damping = settings.lm_damping_init
    iterations = 0
    if trace is not None:
        trace.append(norm)

    while norm > settings.residual_tol and iterations < settings.max_iters:
        iterations += 1
        jac = jacobian_F(game, x, v, settings.lam)
        step = numerics.lstsq(jac, -resid, damping=damping)
        cand_x = np.maximum(x + step[:pm], _POSITIVE_FLOOR)
        cand_v = v + step[pm:]
        try:
            cand_resid = residual_F(game, cand_x, cand_v, settings.lam)
            cand_norm = float(np.linalg.norm(cand_resid))
        except ExponentOverflowError:
            cand_norm = math.inf
        if cand_norm < norm:
            x, v, resid, norm = cand_x, cand_v, cand_resid, cand_norm
            damping = max(damping / 10.0, _DAMPING_MIN)
        else:
            damping *= 10.0
            if damping > _DAMPING_MAX:
                break
        if trace is not None:
            trace.append(norm)

    return EquilibriumSolution(
        x=x,
        v=v,
        residual_norm=norm,
        lam=settings.lam,
        iterations=iterations,
        converged=norm <= settings.residual_tol,
    )


def homotopy_solve(
    game: AtomicRoutingGame,
    schedule: HomotopySchedule | None = None,
    settings: SmoothEqSettings | None = None,
    warm_start: tuple[np.ndarray, np.ndarray] | None = None,
    return_stages: bool = False,
) -> EquilibriumSolution | list[EquilibriumSolution]:
    """Continuation in the entropy weight, warm-starting every re-solve.

    Solves at lambda_start, then repeatedly multiplies the weight by decay
    (clamping the final stage to exactly lambda_min) and re-solves from the
    previous stage's solution.  With return_stages=True the full stage list is
    returned, final solution last.

    Raises:
        NotConvergedError: some stage failed; the message names its weight.
    """
    if schedule is None:
        schedule = HomotopySchedule()
    if settings is None:
        settings = SmoothEqSettings(lam=schedule.lambda_start)
    stages: list[EquilibriumSolution] = []
    carry = warm_start
    for lam in schedule.stages():
        stage_settings = replace(settings, lam=lam)
        sol = solve_nls(game, stage_settings, warm_start=carry)
        if not sol.converged:
            raise NotConvergedError(
                f"continuation stage at lam={lam:g} stalled with residual {sol.residual_norm:.3e}"
            )
        stages.append(sol)
        carry = (sol.x, sol.v)
    return stages if return_stages else stages[-1]
