"""Barotropic pressure law p = rho**gamma and the associated entropy functions.

The scheme keeps densities as deviations ``drho = rho - 1`` from the reference
state, so most functions here also come in a ``*_dev`` flavour that stays
accurate when ``|drho|`` is close to machine precision.
"""
from __future__ import annotations

import numpy as np


class DensityError(ValueError):
    pass


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not gamma >= 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    return gamma


def _check_positive(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise DensityError("density must be strictly positive")
    return rho


def pressure(rho, gamma: float) -> np.ndarray:
    """``rho**gamma`` evaluated as ``exp(gamma * log rho)``."""
    gamma = _check_gamma(gamma)
    rho = _check_positive(rho)
    if gamma == 1.0:
        return rho.copy()
    if gamma == 2.0:
        return rho * rho
    return np.exp(gamma * np.log(rho))


def pressure_excess(drho, gamma: float) -> np.ndarray:
    """``(1 + drho)**gamma - 1`` without cancellation."""
    gamma = _check_gamma(gamma)
    drho = np.asarray(drho, dtype=float)
    _check_positive(1.0 + drho)
    if gamma == 1.0:
        return drho.copy()
    if gamma == 2.0:
        return drho * (2.0 + drho)
    return np.expm1(gamma * np.log1p(drho))


def dpressure_dev(drho, gamma: float) -> np.ndarray:
    """Derivative of the pressure law, ``gamma * rho**(gamma - 1)``."""
    gamma = _check_gamma(gamma)
    drho = np.asarray(drho, dtype=float)
    if gamma == 1.0:
        return np.ones_like(drho)
    return gamma * np.exp((gamma - 1.0) * np.log1p(drho))


def b(rho, gamma: float) -> np.ndarray:
    """Renormalization function: ``rho log rho`` for gamma = 1, ``rho**gamma / (gamma - 1)`` otherwise."""
    gamma = _check_gamma(gamma)
    rho = _check_positive(rho)
    if gamma == 1.0:
        return rho * np.log(rho)
    return pressure(rho, gamma) / (gamma - 1.0)


def db(rho, gamma: float) -> np.ndarray:
    gamma = _check_gamma(gamma)
    rho = _check_positive(rho)
    if gamma == 1.0:
        return np.log(rho) + 1.0
    return gamma / (gamma - 1.0) * np.exp((gamma - 1.0) * np.log(rho))


def db_excess_dev(drho, gamma: float) -> np.ndarray:
    """``b'(1 + drho) - b'(1)`` without cancellation."""
    gamma = _check_gamma(gamma)
    drho = np.asarray(drho, dtype=float)
    if gamma == 1.0:
        return np.log1p(drho)
    return gamma / (gamma - 1.0) * np.expm1((gamma - 1.0) * np.log1p(drho))


def pi_gamma(rho, gamma: float) -> np.ndarray:
    """Relative entropy ``b(rho) - b(1) - b'(1) (rho - 1)``, literal formula."""
    rho = _check_positive(rho)
    return b(rho, gamma) - b(1.0, gamma) - db(1.0, gamma) * (rho - 1.0)


def pi_gamma_dev(drho, gamma: float) -> np.ndarray:
    """``Pi_gamma(1 + drho)`` evaluated stably for small ``drho``.

    Uses ``Pi = sum_{k>=2} c_k drho**k`` (a short series) where ``|drho|`` is
    small and the closed form elsewhere.
    """
    gamma = _check_gamma(gamma)
    x = np.asarray(drho, dtype=float)
    _check_positive(1.0 + x)
    if gamma == 2.0:
        return x * x
    out = np.empty_like(x)
    small = np.abs(x) < 1e-2
    xs = x[small]
    # b^{(k)}(1) = gamma * prod_{j=2}^{k-1} (gamma - j) for every gamma >= 1
    series = np.zeros_like(xs)
    coef = gamma
    fact = 2.0
    for k in range(2, 16):
        if k > 2:
            coef *= gamma - (k - 1)
            fact *= k
        series += coef / fact * xs**k
    out[small] = series
    xl = x[~small]
    if gamma == 1.0:
        out[~small] = (1.0 + xl) * np.log1p(xl) - xl
    else:
        out[~small] = (np.expm1(gamma * np.log1p(xl)) - gamma * xl) / (gamma - 1.0)
    return out


def dpi_gamma(rho, gamma: float) -> np.ndarray:
    """``Pi_gamma'(rho) = b'(rho) - b'(1)``."""
    return db(rho, gamma) - db(1.0, gamma)
