"""2x2 matrix calculus, singular values, split energies and the built-in catalog.

Energies are functions of the deformation gradient through its singular
values only.  Two representations are supported:

* :class:`SplitEnergy` -- ``W(F) = h(lam_max/lam_min) + f(det F)``, with h given
  on ``t >= 1`` and extended to ``(0, inf)`` by ``h(t) = h(1/t)``.
* :class:`GeneralIsotropicEnergy` -- ``W(F) = g(lam_1, lam_2)`` with g symmetric.

All evaluators accept scalars or numpy arrays (matrices as ``(..., 2, 2)``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateMatrix, DomainError, NonPositiveDeterminant
from .scalar import ScalarFunction, log_fn

CONFORMAL_CLAMP = 1e-12


# ---------------------------------------------------------------- matrices


@dataclass(frozen=True)
class Matrix2:
    """A real 2x2 matrix ``[[f11, f12], [f21, f22]]``."""

    f11: float
    f12: float
    f21: float
    f22: float

    def __post_init__(self):
        if not all(np.isfinite([self.f11, self.f12, self.f21, self.f22])):
            raise ValueError("Matrix2 entries must be finite")

    @classmethod
    def from_array(cls, a) -> "Matrix2":
        a = np.asarray(a, dtype=float).reshape(2, 2)
        return cls(float(a[0, 0]), float(a[0, 1]), float(a[1, 0]), float(a[1, 1]))

    @classmethod
    def identity(cls) -> "Matrix2":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def diag(cls, a, b) -> "Matrix2":
        return cls(float(a), 0.0, 0.0, float(b))

    def to_array(self) -> np.ndarray:
        return np.array([[self.f11, self.f12], [self.f21, self.f22]])

    __array__ = lambda self, dtype=None, copy=None: self.to_array().astype(dtype or float)

    @property
    def det(self) -> float:
        return self.f11 * self.f22 - self.f12 * self.f21

    @property
    def norm2(self) -> float:
        return self.f11**2 + self.f12**2 + self.f21**2 + self.f22**2


def as_matrices(F) -> np.ndarray:
    """Coerce a Matrix2, nested list or array into a float array of shape (..., 2, 2)."""
    if isinstance(F, Matrix2):
        return F.to_array()
    a = np.asarray(F, dtype=float)
    if a.shape[-2:] != (2, 2):
        raise ValueError(f"expected trailing shape (2, 2), got {a.shape}")
    return a


def det2(F) -> np.ndarray:
    a = as_matrices(F)
    return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]


def frob2(F) -> np.ndarray:
    a = as_matrices(F)
    return np.sum(a**2, axis=(-2, -1))


def inv2(F) -> np.ndarray:
    a = as_matrices(F)
    d = det2(a)
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1]
    out[..., 1, 1] = a[..., 0, 0]
    out[..., 0, 1] = -a[..., 0, 1]
    out[..., 1, 0] = -a[..., 1, 0]
    return out / d[..., None, None]


def lam_max_sq(F) -> np.ndarray:
    """Largest eigenvalue of F^T F, valid for any real 2x2 matrix.

    Uses ``(|F|^2 + sqrt(|F|^4 - 4 det^2)) / 2``.  Slightly negative radicands
    (down to ``-1e-12``, relative to ``|F|^4``) come from rounding near conformal
    matrices and are clamped to zero.
    """
    n2 = frob2(F)
    d = det2(F)
    rad = n2**2 - 4 * d**2
    scale = np.maximum(n2**2, np.finfo(float).tiny)
    if np.any(rad < -CONFORMAL_CLAMP * scale):
        raise DegenerateMatrix("negative radicand in closed-form singular values")
    return 0.5 * (n2 + np.sqrt(np.maximum(rad, 0.0)))


@dataclass(frozen=True)
class SingularValues:
    """Ordered singular values ``lam_max >= lam_min > 0`` (scalars or arrays)."""

    lam_max: np.ndarray
    lam_min: np.ndarray

    @property
    def t(self):
        return self.lam_max / self.lam_min

    @property
    def z(self):
        return self.lam_max * self.lam_min

    def as_tuple(self):
        return (self.lam_max, self.lam_min)


def _require_glplus(F):
    d = det2(F)
    if np.any(~(d > 0)):
        raise NonPositiveDeterminant(f"det F = {np.min(d)!r} <= 0")
    return d


def singular_values(F) -> SingularValues:
    """Ordered singular values of ``F`` in GL+(2).

    Examples
    --------
    >>> sv = singular_values([[1.0, 1.0], [0.0, 1.0]])
    >>> round(float(sv.lam_max), 10), round(float(sv.lam_min), 10)
    (1.6180339887, 0.6180339887)
    """
    d = _require_glplus(F)
    lmax = np.sqrt(lam_max_sq(F))
    # near conformal matrices d / lmax can exceed lmax by an ulp
    lmin = np.minimum(d / lmax, lmax)
    if np.ndim(lmax) == 0:
        return SingularValues(float(lmax), float(lmin))
    return SingularValues(lmax, lmin)


def distortion_K(F):
    """Linear distortion ``lam_max / lam_min``."""
    return singular_values(F).t


def distortion_nonlinear(F):
    """Outer distortion ``|F|^2 / (2 det F)``, equal to ``(K + 1/K)/2``."""
    d = _require_glplus(F)
    out = frob2(F) / (2 * d)
    return float(out) if np.ndim(out) == 0 else out


def random_glplus(rng: np.random.Generator, n: int, scale: float = 1.0, log_spread: float = 1.0) -> np.ndarray:
    """Random GL+(2) matrices: rotation * diag(exp(s1), exp(s2)) * rotation."""
    a1, a2 = rng.uniform(0, 2 * np.pi, (2, n))
    s = rng.uniform(-log_spread, log_spread, (2, n))
    r1 = np.stack([np.cos(a1), -np.sin(a1), np.sin(a1), np.cos(a1)], -1).reshape(n, 2, 2)
    r2 = np.stack([np.cos(a2), -np.sin(a2), np.sin(a2), np.cos(a2)], -1).reshape(n, 2, 2)
    d = np.zeros((n, 2, 2))
    d[:, 0, 0] = np.exp(s[0])
    d[:, 1, 1] = np.exp(s[1])
    return scale * r1 @ d @ r2


# ---------------------------------------------------------------- energies


class Energy:
    """Isotropic energy on GL+(2) through its singular values.

    Subclasses implement :meth:`ghat` on ordered pairs (``x >= y > 0``).
    ``__call__`` evaluates on matrices; :meth:`g` on unordered pairs.
    """


    def ghat(self, lmax, lmin, strict: bool = True):
        raise NotImplementedError

    def g(self, x, y, strict: bool = True):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return self.ghat(np.maximum(x, y), np.minimum(x, y), strict)

    def __call__(self, F, strict: bool = True):
        sv = singular_values(F)
        return self.ghat(sv.lam_max, sv.lam_min, strict)

    def partials(self, x, y, strict: bool = True) -> dict:
        """First and second partial derivatives of g at unordered (x, y).

        The base implementation uses central differences with a relative step.
        """
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        hx = 1e-4 * x
        hy = 1e-4 * y
        g = lambda a, b: self.g(a, b, strict=strict)
        g0 = g(x, y)
        gxp, gxm = g(x + hx, y), g(x - hx, y)
        gyp, gym = g(x, y + hy), g(x, y - hy)
        gpp, gpm = g(x + hx, y + hy), g(x + hx, y - hy)
        gmp, gmm = g(x - hx, y + hy), g(x - hx, y - hy)
        return {
            "g": g0,
            "g_x": (gxp - gxm) / (2 * hx),
            "g_y": (gyp - gym) / (2 * hy),
            "g_xx": (gxp - 2 * g0 + gxm) / hx**2,
            "g_yy": (gyp - 2 * g0 + gym) / hy**2,
            "g_xy": (gpp - gpm - gmp + gmm) / (4 * hx * hy),
        }

    def at_scaled_identity(self, lam=1.0):
        return self.ghat(np.asarray(lam, float), np.asarray(lam, float))

    def describe(self) -> dict:
        return {"name": self.name, "h": None, "f": None}


def _finite_or_raise(val, strict, what):
    if strict:
        arr = np.asarray(val)
        if np.any(~np.isfinite(arr)):
            raise DomainError(f"{what} is undefined at the requested point")
    return val


@dataclass(frozen=True, eq=False)
class SplitEnergy(Energy):
    """``W(F) = h(lam_max/lam_min) + f(lam_max*lam_min)``.

    Parameters
    ----------
    name : str
    h : ScalarFunction
        Isochoric part; its formula is only consulted for ``t >= 1``.
    f : ScalarFunction
        Volumetric part on ``z > 0``.
    """

    name: str
    h: ScalarFunction
    f: ScalarFunction
    params: dict = field(default_factory=dict)

    def h_jet(self, t, strict: bool = True):
        """h, h', h'' on all of (0, inf) via the reflection identities."""
        t = np.asarray(t, float)
        small = t < 1
        s = np.where(small, 1.0 / np.where(t > 0, t, np.nan), t)
        v, d1, d2 = self.h.jet(s, strict=False)
        r1 = np.where(small, -d1 * s**2, d1)  # h'(t) = -h'(1/t)/t^2, with s = 1/t
        r2 = np.where(small, 2 * d1 * s**3 + d2 * s**4, d2)
        out = (v, r1, r2)
        if strict:
            bad = ~(np.isfinite(v) & np.isfinite(r1) & np.isfinite(r2))
            if np.any(bad):
                raise DomainError(f"h undefined at t = {np.broadcast_to(t, bad.shape)[bad].flat[0]!r}")
        if np.ndim(t) == 0:
            return tuple(float(a) for a in out)
        return out

    def f_jet(self, z, strict: bool = True):
        out = self.f.jet(z, strict)
        if np.ndim(z) == 0:
            return tuple(float(a) for a in out)
        return out

    def ghat(self, lmax, lmin, strict: bool = True):
        lmax = np.asarray(lmax, float)
        lmin = np.asarray(lmin, float)
        val = self.h_jet(lmax / lmin, strict)[0] + self.f_jet(lmax * lmin, strict)[0]
        return _finite_or_raise(val, strict, self.name)

    def g(self, x, y, strict: bool = True):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return self.h_jet(x / y, strict)[0] + self.f_jet(x * y, strict)[0]

    def __call__(self, F, strict: bool = True):
        # z straight from the determinant and t = lam_max^2 / det, which avoids
        # the rounding of lam_max * lam_min
        d = _require_glplus(F)
        val = self.h_jet(lam_max_sq(F) / d, strict)[0] + self.f_jet(d, strict)[0]
        val = _finite_or_raise(val, strict, self.name)
        return float(val) if np.ndim(val) == 0 else val

    def partials(self, x, y, strict: bool = True) -> dict:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        h0, h1, h2 = self.h_jet(x / y, strict)
        f0, f1, f2 = self.f_jet(x * y, strict)
        return {
            "g": h0 + f0,
            "g_x": h1 / y + f1 * y,
            "g_y": -h1 * x / y**2 + f1 * x,
            "g_xx": h2 / y**2 + f2 * y**2,
            "g_yy": h2 * x**2 / y**4 + 2 * h1 * x / y**3 + f2 * x**2,
            "g_xy": -h2 * x / y**3 - h1 / y**2 + f2 * x * y + f1,
        }

    def with_f(self, f: ScalarFunction, name: Optional[str] = None) -> "SplitEnergy":
        return SplitEnergy(name or self.name, self.h, f, dict(self.params))

    def describe(self) -> dict:
        return {"name": self.name, "h": self.h.text, "f": self.f.text}


@dataclass(frozen=True, eq=False)
class GeneralIsotropicEnergy(Energy):
    """``W(F) = g(lam_1, lam_2)`` with g symmetric in its arguments.

    Parameters
    ----------
    name : str
    g_fn : callable
        Vectorized ``g(x, y)``.
    partials_fn : callable, optional
        Returns a dict with keys ``g, g_x, g_y, g_xx, g_yy, g_xy``; when absent
        central differences are used.
    """

    name: str
    g_fn: Callable = field(repr=False)
    partials_fn: Optional[Callable] = field(default=None, repr=False)
    text: str = ""
    params: dict = field(default_factory=dict)

    def g(self, x, y, strict: bool = True):
        with np.errstate(all="ignore"):
            val = self.g_fn(np.asarray(x, float), np.asarray(y, float))
        return _finite_or_raise(val, strict, self.name)

    def ghat(self, lmax, lmin, strict: bool = True):
        return self.g(lmax, lmin, strict)

    def partials(self, x, y, strict: bool = True) -> dict:
        if self.partials_fn is None:
            return super().partials(x, y, strict)
        with np.errstate(all="ignore"):
            return self.partials_fn(np.asarray(x, float), np.asarray(y, float))

    def symmetry_defect(self, x, y) -> float:
        return float(np.max(np.abs(self.g(x, y, False) - self.g(y, x, False))))

    def describe(self) -> dict:
        return {"name": self.name, "h": None, "f": None, "g": self.text}


def log_variable_energy(name, phi, dphi, text="", params=None) -> GeneralIsotropicEnergy:
    """Energy ``Phi(log x, log y)`` with analytic partials.

    ``dphi(a, b)`` returns ``(Phi, Phi_a, Phi_b, Phi_aa, Phi_bb, Phi_ab)``.
    Chain rule: ``g_x = Phi_a/x``, ``g_xx = (Phi_aa - Phi_a)/x^2``,
    ``g_xy = Phi_ab/(x y)``.
    """

    def g_fn(x, y):
        return phi(np.log(x), np.log(y))

    def partials_fn(x, y):
        p, pa, pb, paa, pbb, pab = dphi(np.log(x), np.log(y))
        return {
            "g": p,
            "g_x": pa / x,
            "g_y": pb / y,
            "g_xx": (paa - pa) / x**2,
            "g_yy": (pbb - pb) / y**2,
            "g_xy": pab / (x * y),
        }

    return GeneralIsotropicEnergy(name, g_fn, partials_fn, text, dict(params or {}))


# ---------------------------------------------------------------- catalog


def _pos(x):
    return np.where(x > 0, x, np.nan)


def _log(x):
    return np.log(_pos(x))


def neg_log_fn() -> ScalarFunction:
    return log_fn(-1.0, "-log(z)")


def W_magic_plus() -> SplitEnergy:
    """h(t) = t - log t, f(z) = log z."""
    h = ScalarFunction.analytic(
        lambda t: t - _log(t), lambda t: (t - 1) / t, lambda t: 1 / t**2, "t - log(t)"
    )
    return SplitEnergy("W_magic_plus", h, log_fn())


def W_magic_minus() -> SplitEnergy:
    """h(t) = t + log t, f(z) = -log z."""
    h = ScalarFunction.analytic(
        lambda t: t + _log(t), lambda t: 1 + 1 / t, lambda t: -1 / t**2, "t + log(t)"
    )
    return SplitEnergy("W_magic_minus", h, neg_log_fn())


def W_smooth() -> SplitEnergy:
    """h(t) = t/3 + 4/(3t) + log t, f(z) = -log z."""
    h = ScalarFunction.analytic(
        lambda t: t / 3 + 4 / (3 * t) + _log(t),
        lambda t: 1 / 3 - 4 / (3 * t**2) + 1 / t,
        lambda t: 8 / (3 * t**3) - 1 / t**2,
        "t/3 + 4/(3*t) + log(t)",
    )
    return SplitEnergy("W_smooth", h, neg_log_fn())


def W_3b(c: float = 1.0) -> SplitEnergy:
    """Energy whose isochoric part solves condition 3b with equality (f0 = 1).

    ``c > 0`` is the integration constant of the one-parameter solution family;
    ``c = 1`` is the canonical member.  With ``S = sqrt((t+1)^2 + 4ct)``::

        h'(t) = (t-1)(t+1+S) / (2c t^2)
        h(t)  = (t + 1/t + (1 + 1/t) S) / (2c)
                + log((S + t + 1 + 2c)(1 + (1+2c) t + S) / (4t))

    and ``f(z) = -log z``.
    """
    if not c > 0:
        raise ValueError("W_3b requires c > 0")

    def S(t):
        return np.sqrt((t + 1) ** 2 + 4 * c * t)

    def h(t):
        s = S(t)
        return (t + 1 / t + (1 + 1 / t) * s) / (2 * c) + _log(
            (s + t + 1 + 2 * c) * (1 + (1 + 2 * c) * t + s) / (4 * t)
        )

    def h1(t):
        return (t - 1) * (t + 1 + S(t)) / (2 * c * t**2)

    def h2(t):
        # rearranged so that no large terms cancel as t -> inf
        return 1 / (c * t**3) + (-2 * c * t**2 + (2 + 6 * c) * t + 2) / (2 * c * t**3 * S(t))

    text = (f"(t + 1/t + (1 + 1/t)*S)/{2 * c!r} + log((S + t + {1 + 2 * c!r})*(1 + {1 + 2 * c!r}*t + S)/(4*t))"
            f", S = sqrt((t + 1)^2 + {4 * c!r}*t)")
    name = "W_3b" if c == 1 else f"W_3b(c={c!r})"
    return SplitEnergy(name, ScalarFunction.analytic(h, h1, h2, text), neg_log_fn(), {"c": c})


def K_distortion() -> SplitEnergy:
    """Outer distortion |F|^2/(2 det F) = (t + 1/t)/2 as a purely isochoric energy."""
    h = ScalarFunction.analytic(
        lambda t: 0.5 * (t + 1 / t), lambda t: 0.5 * (1 - 1 / t**2), lambda t: 1 / t**3, "(t + 1/t)/2"
    )
    return SplitEnergy("K_distortion", h, ScalarFunction.constant(0.0, "0"))


def det_energy() -> SplitEnergy:
    """det F, the planar Null-Lagrangian."""
    f = ScalarFunction.analytic(lambda z: z, lambda z: np.ones_like(z), lambda z: np.zeros_like(z), "z")
    return SplitEnergy("det", ScalarFunction.constant(0.0, "0"), f)


def frobenius_sq() -> GeneralIsotropicEnergy:
    """|F|^2 = x^2 + y^2."""

    def partials(x, y):
        one = np.ones_like(x * y)
        return {"g": x**2 + y**2, "g_x": 2 * x, "g_y": 2 * y, "g_xx": 2 * one, "g_yy": 2 * one, "g_xy": 0 * one}

    return GeneralIsotropicEnergy("frobenius_sq", lambda x, y: x**2 + y**2, partials, "x^2 + y^2")


def hadamard(alpha: float = 2.0, f: Optional[ScalarFunction] = None) -> GeneralIsotropicEnergy:
    """``|F|^alpha + f(det F)`` with ``1 <= alpha < 4`` (default f = -log z)."""
    if not 1 <= alpha < 4:
        raise ValueError("Hadamard exponent must satisfy 1 <= alpha < 4")
    f = f or neg_log_fn()

    def g_fn(x, y):
        return (x**2 + y**2) ** (alpha / 2) + f(x * y, strict=False)

    def partials(x, y):
        q = x**2 + y**2
        a = alpha
        f0, f1, f2 = f.jet(x * y, strict=False)
        base1 = a * q ** (a / 2 - 1)
        base2 = a * (a - 2) * q ** (a / 2 - 2)
        return {
            "g": q ** (a / 2) + f0,
            "g_x": base1 * x + f1 * y,
            "g_y": base1 * y + f1 * x,
            "g_xx": base1 + base2 * x**2 + f2 * y**2,
            "g_yy": base1 + base2 * y**2 + f2 * x**2,
            "g_xy": base2 * x * y + f2 * x * y + f1,
        }

    return GeneralIsotropicEnergy(f"hadamard(alpha={alpha!r})", g_fn, partials,
                                  f"(x^2 + y^2)^({alpha!r}/2) + {f.text}", {"alpha": alpha})


def hencky(mu: float = 1.0, kappa: float = 1.0) -> GeneralIsotropicEnergy:
    """Planar quadratic Hencky energy ``mu/2 (log t)^2 + kappa/2 (log z)^2``."""
    if mu < 0 or kappa < 0:
        raise ValueError("Hencky moduli must be nonnegative")

    # a = log x, b = log y; log t = a - b, log z = a + b
    def phi(a, b):
        return mu / 2 * (a - b) ** 2 + kappa / 2 * (a + b) ** 2

    def dphi(a, b):
        u, v = a - b, a + b
        return (phi(a, b), mu * u + kappa * v, -mu * u + kappa * v,
                (mu + kappa) * np.ones_like(u), (mu + kappa) * np.ones_like(u), (kappa - mu) * np.ones_like(u))

    return log_variable_energy("hencky", phi, dphi, f"{mu!r}/2*log(t)^2 + {kappa!r}/2*log(z)^2",
                               {"mu": mu, "kappa": kappa})


def exp_hencky(mu: float = 1.0, kappa: float = 1.0, k: float = 1.0, k_hat: float = 1.0) -> GeneralIsotropicEnergy:
    """Planar exponentiated Hencky energy.

    ``mu/k exp(k/2 (log t)^2) + kappa/(2 k_hat) exp(k_hat (log z)^2)``.  For a
    zero exponent the corresponding term is replaced by its limit with the
    constant removed, i.e. the quadratic Hencky term.
    """
    if min(mu, kappa, k, k_hat) < 0:
        raise ValueError("exponentiated Hencky parameters must be nonnegative")

    def iso(u):  # value, d/du, d2/du2 as a function of u = log t
        if k == 0:
            return mu / 2 * u**2, mu * u, mu * np.ones_like(u)
        e = np.exp(k / 2 * u**2)
        return mu / k * e, mu * u * e, mu * (1 + k * u**2) * e

    def vol(v):  # v = log z
        if k_hat == 0:
            return kappa / 2 * v**2, kappa * v, kappa * np.ones_like(v)
        e = np.exp(k_hat * v**2)
        return kappa / (2 * k_hat) * e, kappa * v * e, kappa * (1 + 2 * k_hat * v**2) * e

    def phi(a, b):
        return iso(a - b)[0] + vol(a + b)[0]

    def dphi(a, b):
        i0, i1, i2 = iso(a - b)
        v0, v1, v2 = vol(a + b)
        return i0 + v0, i1 + v1, -i1 + v1, i2 + v2, i2 + v2, v2 - i2

    params = {"mu": mu, "kappa": kappa, "k": k, "k_hat": k_hat}
    text = f"{mu!r}/{k!r}*exp({k!r}/2*log(t)^2) + {kappa!r}/(2*{k_hat!r})*exp({k_hat!r}*log(z)^2)"
    return log_variable_energy("exp_hencky", phi, dphi, text, params)


_CATALOG = {
    "W_magic_plus": W_magic_plus,
    "W_magic_minus": W_magic_minus,
    "W_smooth": W_smooth,
    "W_3b": W_3b,
    "K_distortion": K_distortion,
    "det": det_energy,
    "frobenius_sq": frobenius_sq,
    "hadamard": hadamard,
    "hencky": hencky,
    "exp_hencky": exp_hencky,
}


def catalog() -> list[Energy]:
    """All built-in energies with default parameters."""
    return [make() for make in _CATALOG.values()]


def catalog_names() -> list[str]:
    return list(_CATALOG)


def get_energy(name: str, **params) -> Energy:
    if name in _CATALOG:
        return _CATALOG[name](**params)
    # transforms register their own names lazily to avoid an import cycle
    from . import transforms

    extra = transforms.named_energies()
    if name in extra:
        return extra[name](**params)
    raise KeyError(f"unknown energy {name!r}; known: {', '.join(list(_CATALOG) + list(extra))}")


def evaluate(W: Energy, F):
    """W(F) for F in GL+(2); raises NonPositiveDeterminant otherwise."""
    val = W(F)
    return float(val) if np.ndim(val) == 0 else val
