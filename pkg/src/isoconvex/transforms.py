"""Shield transformation, the complex (z, w) picture of 2x2 matrices, and Burkholder functionals.

A real 2x2 matrix F corresponds to the pair ``(z, w)`` of complex numbers::

    z = (f11 + f22)/2 + i (f21 - f12)/2
    w = (f11 - f22)/2 + i (f21 + f12)/2

so that ``det F = |z|^2 - |w|^2``, ``|F|^2/2 = |z|^2 + |w|^2`` and the singular
values are ``|z| + |w|`` and ``||z| - |w||``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .energy_core import (Energy, GeneralIsotropicEnergy, W_magic_plus, as_matrices, det2, frob2, inv2,
                          lam_max_sq, singular_values)
from .errors import NonPositiveDeterminant, ZeroMatrix


# ---------------------------------------------------------------- complex isomorphism


@dataclass(frozen=True)
class ComplexPair:
    """The pair ``(z, w)``; components are Python/numpy complex values."""

    z: complex
    w: complex


def to_complex(F) -> ComplexPair:
    a = as_matrices(F)
    f11, f12, f21, f22 = a[..., 0, 0], a[..., 0, 1], a[..., 1, 0], a[..., 1, 1]
    z = 0.5 * (f11 + f22) + 0.5j * (f21 - f12)
    w = 0.5 * (f11 - f22) + 0.5j * (f21 + f12)
    if np.ndim(z) == 0:
        return ComplexPair(complex(z), complex(w))
    return ComplexPair(z, w)


def from_complex(zw: ComplexPair) -> np.ndarray:
    z = np.asarray(zw.z, complex)
    w = np.asarray(zw.w, complex)
    out = np.empty(z.shape + (2, 2))
    out[..., 0, 0] = z.real + w.real
    out[..., 0, 1] = w.imag - z.imag
    out[..., 1, 0] = z.imag + w.imag
    out[..., 1, 1] = z.real - w.real
    return out


@dataclass
class IdentityReport:
    """Absolute defects of the appendix identities at one or many matrices."""

    margins: dict

    @property
    def max_defect(self) -> float:
        return max(float(np.max(np.abs(v))) for v in self.margins.values())


def identity_suite(F) -> IdentityReport:
    """Check the algebraic identities linking F with ``(z, w)``.

    For ``det F > 0`` the ratio identities for the two distortion measures are
    included; ``K = lam_max/lam_min = (|z|+|w|)/(|z|-|w|)`` and
    ``|F|^2/(2 det F) = (|z|^2+|w|^2)/(|z|^2-|w|^2)``.
    """
    a = as_matrices(F)
    zw = to_complex(a)
    az, aw = np.abs(zw.z), np.abs(zw.w)
    d = det2(a)
    lmax2 = lam_max_sq(a)
    m = {
        "det": (az**2 - aw**2) - d,
        "half_norm": (az**2 + aw**2) - 0.5 * frob2(a),
        "lam_max_sq": (az + aw) ** 2 - lmax2,
    }
    if np.all(d > 0):
        sv = singular_values(a)
        m["lam_min"] = (az - aw) - sv.lam_min
        m["K"] = ((az + aw) / (az - aw) - sv.t) / sv.t
        m["K_outer"] = ((az**2 + aw**2) / (az**2 - aw**2) - frob2(a) / (2 * d)) / (frob2(a) / (2 * d))
    elif np.any(d > 0):
        raise NonPositiveDeterminant("ratio identities need det F > 0 at every sample")
    else:
        m["rank_one_gap"] = az - aw if np.allclose(d, 0) else np.zeros_like(d)
    return IdentityReport(m)


# ---------------------------------------------------------------- Burkholder functionals


@dataclass(frozen=True)
class BurkholderParams:
    """Exponent p with ``p_star = max(p, p/(p-1))`` and ``alpha_p = p (1 - 1/p_star)^(p-1)``."""

    p: float = 2.0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("Burkholder exponent must satisfy p > 1")

    @property
    def p_star(self) -> float:
        return max(self.p, self.p / (self.p - 1))

    @property
    def alpha_p(self) -> float:
        return self.p * (1 - 1 / self.p_star) ** (self.p - 1)


def _params(p) -> BurkholderParams:
    return p if isinstance(p, BurkholderParams) else BurkholderParams(float(p))


def burkholder_bp(F, params=2.0):
    """``B_p(F) = -(p/2 det F + (1 - p/2) lam_max^2) lam_max^(p-2)`` on all 2x2 matrices, p >= 2."""
    prm = _params(params)
    p = prm.p
    if p < 2:
        raise ValueError("B_p is considered for p >= 2 only")
    a = as_matrices(F)
    L = lam_max_sq(a)
    d = det2(a)
    if p == 2:
        out = -d
    else:
        out = -(p / 2 * d + (1 - p / 2) * L) * L ** ((p - 2) / 2)
    return float(out) if np.ndim(out) == 0 else out


def burkholder_lp(zw: ComplexPair, params=2.0):
    """``L_p(z, w) = (|z| - (p-1)|w|) (|z| + |w|)^(p-1)``."""
    p = _params(params).p
    az, aw = np.abs(zw.z), np.abs(zw.w)
    out = (az - (p - 1) * aw) * (az + aw) ** (p - 1)
    return float(out) if np.ndim(out) == 0 else out


def burkholder_bstar(F):
    """p-derivative of B_p at p = 2: ``-(1 + log lam_max^2) det F / 2 + lam_max^2 / 2``."""
    a = as_matrices(F)
    L = lam_max_sq(a)
    if np.any(L == 0):
        raise ZeroMatrix("B_star is undefined at F = 0")
    out = -0.5 * (1 + np.log(L)) * det2(a) + 0.5 * L
    return float(out) if np.ndim(out) == 0 else out


def burkholder_inequality(zw: ComplexPair, params=2.0):
    """Margin ``alpha_p (|z| - (p*-1)|w|)(|z|+|w|)^(p-1) - (|z|^p - (p*-1)^p |w|^p)``."""
    prm = _params(params)
    p, ps = prm.p, prm.p_star
    az, aw = np.abs(zw.z), np.abs(zw.w)
    lhs = az**p - (ps - 1) ** p * aw**p
    rhs = prm.alpha_p * (az - (ps - 1) * aw) * (az + aw) ** (p - 1)
    out = rhs - lhs
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class BurkholderEnergy(Energy):
    """B_p as an energy; evaluation on matrices is valid for any determinant."""

    p: float = 2.0
    name: str = "burkholder"

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("B_p is considered for p >= 2 only")

    def ghat(self, lmax, lmin, strict: bool = True):
        p = self.p
        x = np.asarray(lmax, float)
        y = np.asarray(lmin, float)
        return -(p / 2 * x * y + (1 - p / 2) * x**2) * x ** (p - 2)

    def __call__(self, F, strict: bool = True):
        return burkholder_bp(F, self.p)

    def describe(self) -> dict:
        return {"name": f"B_{self.p!r}", "h": None, "f": None}


@dataclass(frozen=True, eq=False)
class BurkholderStar(Energy):
    """``B_star`` restricted to GL+(2)."""

    name: str = "B_star"

    def ghat(self, lmax, lmin, strict: bool = True):
        x = np.asarray(lmax, float)
        y = np.asarray(lmin, float)
        return -0.5 * (1 + 2 * np.log(x)) * x * y + 0.5 * x**2

    def describe(self) -> dict:
        return {"name": self.name, "h": None, "f": None}


# ---------------------------------------------------------------- Shield transformation


@dataclass(frozen=True, eq=False)
class ShieldEnergy(Energy):
    """``W#(F) = det F * W(F^-1)``.

    On ordered singular values ``g#(x, y) = x y g(1/y, 1/x)``.  Partial
    derivatives follow from those of the base energy by the chain rule.
    """

    base: Energy

    @property
    def name(self) -> str:
        return f"shield({self.base.describe().get('name')})"

    def ghat(self, lmax, lmin, strict: bool = True):
        x = np.asarray(lmax, float)
        y = np.asarray(lmin, float)
        return x * y * self.base.ghat(1 / y, 1 / x, strict)

    def g(self, x, y, strict: bool = True):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return x * y * self.base.g(1 / x, 1 / y, strict)

    def __call__(self, F, strict: bool = True):
        a = as_matrices(F)
        d = det2(a)
        if np.any(~(d > 0)):
            raise NonPositiveDeterminant(f"det F = {np.min(d)!r} <= 0")
        return d * self.base(inv2(a), strict)

    def partials(self, x, y, strict: bool = True) -> dict:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        q = self.base.partials(1 / x, 1 / y, strict)
        G, Gu, Gv = q["g"], q["g_x"], q["g_y"]
        return {
            "g": x * y * G,
            "g_x": y * G - (y / x) * Gu,
            "g_y": x * G - (x / y) * Gv,
            "g_xx": (y / x**3) * q["g_xx"],
            "g_yy": (x / y**3) * q["g_yy"],
            "g_xy": G - Gv / y - Gu / x + q["g_xy"] / (x * y),
        }

    def describe(self) -> dict:
        return {"name": self.name, "h": None, "f": None}


def shield(W: Energy) -> ShieldEnergy:
    """Shield transform of an energy on GL+(2); applying it twice gives W back."""
    return ShieldEnergy(W)


def constant_energy(c: float = 1.0) -> GeneralIsotropicEnergy:
    def partials(x, y):
        z = np.zeros_like(x * y)
        return {"g": z + c, "g_x": z, "g_y": z, "g_xx": z, "g_yy": z, "g_xy": z}

    return GeneralIsotropicEnergy(f"constant({c!r})", lambda x, y: np.zeros_like(x * y) + c, partials, repr(c))


def half_magic_minus_one() -> GeneralIsotropicEnergy:
    """``(W_magic_plus - 1)/2``, the Shield dual of ``B_star``."""
    W = W_magic_plus()
    return GeneralIsotropicEnergy("(W_magic_plus-1)/2", lambda x, y: 0.5 * (W.g(x, y, False) - 1))


def named_energies() -> dict[str, Callable[..., Energy]]:
    """Energies from this module addressable by name in the CLI."""
    return {
        "burkholder": lambda p=2.0: BurkholderEnergy(float(p)),
        "B_star": BurkholderStar,
        "B_star_shield": lambda: shield(BurkholderStar()),
    }
