"""Fixed-step explicit integrators over flat state vectors."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

Deriv = Callable[[np.ndarray], np.ndarray]


class IntegrationError(FloatingPointError):
    pass


def _checked(f: Deriv, s: np.ndarray, describe: Optional[Callable[[int], str]]) -> np.ndarray:
    d = f(s)
    if not np.all(np.isfinite(d)):
        bad = int(np.flatnonzero(~np.isfinite(d))[0])
        where = describe(bad) if describe else f"component {bad}"
        raise IntegrationError(f"non-finite derivative at {where}")
    return d


def euler_step(f: Deriv, s: np.ndarray, dt: float, describe=None) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    return s + dt * _checked(f, s, describe)


def rk4_step(f: Deriv, s: np.ndarray, dt: float, describe=None) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    k1 = _checked(f, s, describe)
    k2 = _checked(f, s + 0.5 * dt * k1, describe)
    k3 = _checked(f, s + 0.5 * dt * k2, describe)
    k4 = _checked(f, s + dt * k3, describe)
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


STEPPERS = {"euler": euler_step, "rk4": rk4_step}


def integrate(f: Deriv, s: np.ndarray, dt: float, steps: int, method: str = "rk4") -> np.ndarray:
    step = STEPPERS[method]
    for _ in range(steps):
        s = step(f, s, dt)
    return s


def convergence_order(errors, dts) -> float:
    """Least-squares slope of log(error) against log(dt)."""
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
