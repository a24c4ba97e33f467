"""Scalar functions of one positive variable carrying first and second derivatives.

Every evaluator is vectorized over numpy arrays.  Points outside the real
domain of the function come back as NaN when ``strict=False`` and raise
:class:`~isoconvex.errors.DomainError` otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

Triple = tuple[np.ndarray, np.ndarray, np.ndarray]


def _check(x, triple: Triple, strict: bool, label: str) -> Triple:
    if not strict:
        return triple
    bad = ~(np.isfinite(triple[0]) & np.isfinite(triple[1]) & np.isfinite(triple[2]))
    if np.any(bad):
        where = np.broadcast_to(np.asarray(x, float), bad.shape)[bad]
        raise DomainError(f"{label} undefined at x = {where.flat[0]!r}")
    return triple


@dataclass(frozen=True)
class ScalarFunction:
    """A real function with value, first and second derivative evaluators.

    Parameters
    ----------
    jet_fn : callable
        Maps an array ``x`` to the triple ``(f(x), f'(x), f''(x))``.  May
        return NaN/inf where the function is not defined.
    source : str
        How derivatives are obtained: ``"analytic"``, ``"ad"`` or ``"fd"``.
    text : str
        Human-readable formula used in report headers.
    """

    jet_fn: Callable[[np.ndarray], Triple] = field(repr=False)
    source: str = "analytic"
    text: str = ""

    def jet(self, x, strict: bool = True) -> Triple:
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            v, d1, d2 = self.jet_fn(x)
        v = np.broadcast_to(np.asarray(v, float), x.shape)
        d1 = np.broadcast_to(np.asarray(d1, float), x.shape)
        d2 = np.broadcast_to(np.asarray(d2, float), x.shape)
        return _check(x, (v, d1, d2), strict, self.text or "function")

    def __call__(self, x, strict: bool = True):
        return self.jet(x, strict)[0]

    def d1(self, x, strict: bool = True):
        return self.jet(x, strict)[1]

    def d2(self, x, strict: bool = True):
        return self.jet(x, strict)[2]

    @classmethod
    def analytic(cls, value, d1, d2, text: str = "") -> "ScalarFunction":
        return cls(lambda x: (value(x), d1(x), d2(x)), "analytic", text)

    @classmethod
    def from_callable(cls, fn, text: str = "", rel_step: float = 1e-4) -> "ScalarFunction":
        """Wrap a bare value function; derivatives by central differences.

        The step is relative to ``|x|`` so that the fallback stays usable on
        log-spaced grids spanning many decades.
        """

        def jet(x):
            hstep = rel_step * np.maximum(np.abs(x), 1e-8)
            f0 = fn(x)
            fp = fn(x + hstep)
            fm = fn(x - hstep)
            return f0, (fp - fm) / (2 * hstep), (fp - 2 * f0 + fm) / hstep**2

        return cls(jet, "fd", text)

    @classmethod
    def constant(cls, c: float, text: str | None = None) -> "ScalarFunction":
        return cls(lambda x: (np.full_like(x, c), np.zeros_like(x), np.zeros_like(x)),
                   "analytic", repr(c) if text is None else text)

    def scaled(self, c: float, text: str | None = None) -> "ScalarFunction":
        def jet(x):
            v, a, b = self.jet_fn(x)
            return c * v, c * a, c * b

        return ScalarFunction(jet, self.source, text or f"{c!r}*({self.text})")


def log_fn(scale: float = 1.0, text: str | None = None) -> ScalarFunction:
    """``scale * log(x)`` with exact derivatives."""
    return ScalarFunction.analytic(
        lambda x: scale * np.where(x > 0, np.log(np.where(x > 0, x, np.nan)), np.nan),
        lambda x: np.where(x > 0, scale / x, np.nan),
        lambda x: np.where(x > 0, -scale / x**2, np.nan),
        text=text or ("log(z)" if scale == 1 else f"{scale!r}*log(z)"),
    )
