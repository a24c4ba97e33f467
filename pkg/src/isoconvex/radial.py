"""Radial deformations ``x -> v(|x|) x/|x|`` of a disc, their energies, and nested packings of them.

The gradient of a radial map has singular values ``v'(r)`` and ``v(r)/r``, so
its energy over a disc of radius R reduces to the one-dimensional integral
``2 pi int_0^R r g(v'(r), v(r)/r) dr``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .energy_core import Energy
from .errors import (NestingError, NotMonotone, OutOfDomain, OverlapError, ProfileRescaledWarning,
                     QuadratureDivergence)

CUTOFF = 1e-10


class ProfileClass(str, Enum):
    EXPANDING = "Expanding"
    CONTRACTING = "Contracting"
    NEITHER = "Neither"
    IDENTITY = "Identity"


@dataclass(frozen=True)
class RadialProfile:
    """A radial profile ``v`` on ``[0, R]`` with ``v(0) = 0`` and ``v(R) = R``.

    Parameters
    ----------
    v, dv : callable
        Vectorized profile and its derivative.
    R : float
        Outer radius.
    source : str
        Formula or description, echoed in reports and witnesses.
    kinks : tuple
        Radii where ``v'`` may jump; passed to the quadrature as breakpoints.
    """

    v: Callable = field(repr=False)
    dv: Callable = field(repr=False)
    R: float = 1.0
    source: str = ""
    kinks: tuple = ()

    def __call__(self, r):
        return self.v(np.asarray(r, float))

    def derivative(self, r):
        return self.dv(np.asarray(r, float))

    # constructors -------------------------------------------------------

    @classmethod
    def identity(cls, R: float = 1.0) -> "RadialProfile":
        return cls(lambda r: np.asarray(r, float) * 1.0, lambda r: np.ones_like(np.asarray(r, float)), R, "r")

    @classmethod
    def power(cls, k: float, R: float = 1.0) -> "RadialProfile":
        """``v(r) = R (r/R)^k``."""
        if k <= 0:
            raise ValueError("power profile needs k > 0")
        return cls(lambda r: R * (r / R) ** k, lambda r: k * (r / R) ** (k - 1), R, f"r^{k!r}")

    @classmethod
    def blend(cls, exponents, weights, R: float = 1.0) -> "RadialProfile":
        """Normalized combination ``sum w_i r^k_i / sum w_i`` of power profiles (w_i >= 0)."""
        k = np.asarray(exponents, float)
        w = np.asarray(weights, float)
        if np.any(k <= 0) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("blend needs positive exponents and nonnegative weights")
        w = w / w.sum()

        def v(r):
            r = np.asarray(r, float)
            return R * np.sum(w[:, None] * (r.reshape(1, -1) / R) ** k[:, None], axis=0).reshape(r.shape)

        def dv(r):
            r = np.asarray(r, float)
            return np.sum((w * k)[:, None] * (r.reshape(1, -1) / R) ** (k[:, None] - 1), axis=0).reshape(r.shape)

        text = " + ".join(f"{float(a)!r}*r^{float(b)!r}" for a, b in zip(w, k))
        return cls(v, dv, R, text)

    @classmethod
    def from_expression(cls, src: str, R: float = 1.0, core_radius: Optional[float] = None) -> "RadialProfile":
        """Profile from a formula in ``r`` describing the shape on the unit interval.

        The formula ``u`` is used as ``v(r) = R u(r/R)``.  If ``u(1) != 1`` it is
        divided by ``u(1)`` with a :class:`ProfileRescaledWarning`.  With
        ``core_radius`` the shape is applied on ``[0, core_radius]`` and the
        profile is the identity on ``[core_radius, R]``.
        """
        from .expression import eval_jet, parse

        expr = parse(src, "r")
        one = eval_jet(expr, 1.0)
        u1 = float(one.value)
        if not np.isfinite(u1) or u1 <= 0:
            raise ValueError(f"profile {src!r} must be positive at r = 1")
        if abs(u1 - 1) > 1e-10:
            warnings.warn(f"profile {src!r} has u(1) = {u1!r}; rescaled to end at R", ProfileRescaledWarning,
                          stacklevel=2)

        def u(rho):
            rho = np.asarray(rho, float)
            j = eval_jet(expr, np.where(rho > 0, rho, 1.0), strict=False)
            val = np.where(rho > 0, j.value, 0.0) / u1
            der = j.d1 / u1
            return val, der

        Rc = R if core_radius is None else float(core_radius)
        if not 0 < Rc <= R:
            raise ValueError("core_radius must lie in (0, R]")

        # without a core the shape covers [0, R] including the endpoint
        cut = np.inf if core_radius is None else Rc

        def v(r):
            r = np.asarray(r, float)
            inner = Rc * u(np.minimum(r, Rc) / Rc)[0]
            return np.where(r < cut, inner, r)

        def dv(r):
            r = np.asarray(r, float)
            inner = u(np.minimum(r, Rc) / Rc)[1]
            return np.where(r < cut, inner, 1.0)

        text = src if core_radius is None else f"{src} [core {Rc!r}]"
        return cls(v, dv, R, text, () if core_radius is None else (Rc,))

    def identity_region(self, n: int = 2001, tol: float = 1e-12) -> np.ndarray:
        """Boolean mask over ``linspace(0, R, n)`` where ``v(r) = r`` and ``v'(r) = 1``."""
        r = np.linspace(0, self.R, n)
        return (np.abs(self(r) - r) <= tol * self.R) & (np.abs(self.derivative(r) - 1) <= 1e-9)


def radial_gradient_singular_values(v: RadialProfile, r):
    """``(v'(r), v(r)/r)`` for ``0 < r <= R``."""
    r = np.asarray(r, float)
    if np.any(r <= 0) or np.any(r > v.R * (1 + 1e-12)):
        raise OutOfDomain(f"radius outside (0, {v.R!r}]")
    lam1 = v.derivative(r)
    lam2 = v(r) / r
    if np.ndim(r) == 0:
        return float(lam1), float(lam2)
    return lam1, lam2


def classify_profile(v: RadialProfile, n_samples: int = 2000, tol: float = 1e-9) -> ProfileClass:
    """Expanding: ``v/r >= v' >= 0``; contracting: ``v' >= v/r >= 0``; both means identity."""
    r = np.unique(np.concatenate([np.geomspace(1e-6 * v.R, v.R, n_samples // 2),
                                  np.linspace(v.R / n_samples, v.R, n_samples // 2)]))
    a = v(r) / r
    b = v.derivative(r)
    slack = tol * (1 + np.abs(a) + np.abs(b))
    expanding = bool(np.all(a >= b - slack) and np.all(b >= -slack))
    contracting = bool(np.all(b >= a - slack) and np.all(a >= -slack))
    if expanding and contracting:
        return ProfileClass.IDENTITY
    if expanding:
        return ProfileClass.EXPANDING
    if contracting:
        return ProfileClass.CONTRACTING
    return ProfileClass.NEITHER


def _bisect_inverse(v: Callable, y: np.ndarray, R: float) -> np.ndarray:
    lo = np.zeros_like(y)
    hi = np.full_like(y, R)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        below = v(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def invert_profile(v: RadialProfile, n_check: int = 4001) -> RadialProfile:
    """Inverse profile by bisection; ``(v^-1)'(s) = 1 / v'(v^-1(s))``.

    Raises
    ------
    NotMonotone
        If ``v`` is not strictly increasing on a sample grid.
    """
    r = np.linspace(0, v.R, n_check)
    if np.any(np.diff(v(r)) <= 0):
        raise NotMonotone(f"profile {v.source!r} is not strictly increasing")

    def vinv(s):
        s = np.asarray(s, float)
        flat = np.atleast_1d(s).astype(float).ravel()
        out = _bisect_inverse(v, flat, v.R)
        out = np.where(flat <= 0, 0.0, np.where(flat >= v.R, v.R, out))
        return out.reshape(np.shape(s))

    def dvinv(s):
        with np.errstate(divide="ignore"):
            return 1.0 / v.derivative(vinv(s))

    kinks = tuple(float(v(np.asarray(k))) for k in v.kinks)
    return RadialProfile(vinv, dvinv, v.R, f"inverse({v.source})", kinks)


# ---------------------------------------------------------------- energies


def _power_tail(q: Callable, eps: float) -> float:
    """Integral of ``q`` over ``(0, eps)`` from a power-law fit ``q ~ C r^alpha``."""
    q1, q0 = float(q(eps)), float(q(eps / 10))
    if q1 == 0 or q0 == 0 or np.sign(q1) != np.sign(q0):
        return q1 * eps
    alpha = np.log(q1 / q0) / np.log(10.0)
    if alpha <= -1 + 1e-6:
        raise QuadratureDivergence(f"integrand behaves like r^{alpha:.3g} at the origin")
    return q1 * eps / (alpha + 1)


def radial_energy(W: Energy, v: RadialProfile, scale: float = 1.0, cutoff: float = CUTOFF,
                  epsrel: float = 1e-12) -> float:
    """``2 pi int_0^R r g(s v', s v/r) dr`` for the boundary factor ``s = scale``.

    The integral is taken in ``log r`` on ``[log(cutoff R), log R]`` by adaptive
    Gauss-Kronrod quadrature; the piece below the cutoff is added from a
    power-law fit of the integrand.
    """
    R = v.R

    def q(r):  # r * g(...)
        r = np.asarray(r, float)
        lam1 = scale * v.derivative(r)
        lam2 = scale * v(r) / r
        return r * W.g(lam1, lam2, strict=True)

    def integrand(s):
        r = np.exp(s)
        return float(r * q(r))

    eps = cutoff * R
    pts = [np.log(k) for k in v.kinks if eps < k < R] or None
    with warnings.catch_warnings():
        # a vanishing integrand triggers scipy's divergence heuristics; the error check below decides
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(integrand, np.log(eps), np.log(R), points=pts, limit=500,
                                  epsabs=0.0, epsrel=epsrel)
    tail = _power_tail(q, eps)
    total = 2 * np.pi * (val + tail)
    if not np.isfinite(total) or err > 1e-8 * (1 + abs(val)):
        raise QuadratureDivergence(f"quadrature error estimate {err:.3g} for value {val:.6g}")
    return float(total)


def _composite(fn, a: float, b: float, breaks, n_panels: int, order: int = 8) -> float:
    g, w = np.polynomial.legendre.leggauss(order)
    edges = np.unique(np.concatenate([np.linspace(a, b, n_panels + 1), [x for x in breaks if a < x < b]]))
    h = np.diff(edges)
    s = (edges[:-1, None] + h[:, None] * (g[None, :] + 1) / 2).ravel()
    wt = (h[:, None] * w[None, :] / 2).ravel()
    return float(np.sum(wt * fn(s)))


def radial_energy_estimate(W: Energy, v: RadialProfile, scale: float = 1.0, cutoff: float = CUTOFF,
                           tol: float = 1e-12, max_panels: int = 8192) -> tuple[float, float]:
    """Radial energy and an error estimate from composite Gauss-Legendre in ``log r``.

    Panels are doubled until two successive values agree to ``tol`` relative;
    the returned error is their difference.  Much faster than
    :func:`radial_energy` for repeated evaluation.
    """
    R = v.R

    def q(r):
        r = np.asarray(r, float)
        return r * W.g(scale * v.derivative(r), scale * v(r) / r, strict=True)

    def fn(s):
        r = np.exp(s)
        return r * q(r)

    eps = cutoff * R
    a, b = np.log(eps), np.log(R)
    breaks = [np.log(k) for k in v.kinks]
    tail = _power_tail(q, eps)
    n = 32
    prev = _composite(fn, a, b, breaks, n)
    while True:
        n *= 2
        cur = _composite(fn, a, b, breaks, n)
        err = abs(cur - prev)
        if err <= tol * (1 + abs(cur)) or n >= max_panels:
            break
        prev = cur
    total = 2 * np.pi * (cur + tail)
    if not np.isfinite(total) or err > 1e-8 * (1 + abs(cur)):
        raise QuadratureDivergence(f"composite quadrature did not settle (difference {err:.3g})")
    return float(total), float(2 * np.pi * err)


@dataclass
class ConstancyReport:
    reference: float
    margins: list
    profiles: list

    @property
    def max_abs(self) -> float:
        return max(abs(m) for m in self.margins)

    def to_dict(self) -> dict:
        return {"reference": self.reference,
                "rows": [{"profile": p, "margin": m} for p, m in zip(self.profiles, self.margins)]}


def constancy_check(W: Energy, family, scale: float = 1.0) -> ConstancyReport:
    """Margins ``radial_energy(W, v) - pi R^2 g(scale, scale)`` over a family of profiles."""
    margins, names = [], []
    ref = float(W.g(np.asarray(scale), np.asarray(scale)))
    for v in family:
        margins.append(radial_energy(W, v, scale) - np.pi * v.R**2 * ref)
        names.append(v.source)
    return ConstancyReport(ref, margins, names)


# ---------------------------------------------------------------- packings


def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass
class Ball:
    """A disc carrying a radial profile; children sit where the profile is the identity."""

    center: np.ndarray
    radius: float
    profile: RadialProfile
    children: list = field(default_factory=list)
    spec: dict = field(default_factory=dict)

    def contains(self, x) -> np.ndarray:
        return np.linalg.norm(np.asarray(x) - self.center, axis=-1) < self.radius


@dataclass
class PiecewiseRadialMap:
    """Nested discs with radial profiles on a root disc with affine boundary map ``lambda Q x``."""

    root: Ball
    lam: float = 1.0
    angle: float = 0.0

    @property
    def A(self) -> np.ndarray:
        return self.lam * _rotation(self.angle)

    def _deepest(self, x: np.ndarray):
        """Ball index per point (list of balls, assignment array)."""
        balls = []
        owner = np.full(x.shape[0], -1)

        def walk(b):
            idx = len(balls)
            balls.append(b)
            inside = b.contains(x)
            owner[inside] = idx
            for ch in b.children:
                walk(ch)

        walk(self.root)
        return balls, owner

    def phi(self, x) -> np.ndarray:
        """Deformation at points ``x`` (shape (..., 2)) inside the root disc."""
        x = np.asarray(x, float)
        pts = x.reshape(-1, 2)
        balls, owner = self._deepest(pts)
        out = pts.copy()
        for k, b in enumerate(balls):
            sel = owner == k
            if not np.any(sel):
                continue
            d = pts[sel] - b.center
            rho = np.linalg.norm(d, axis=-1)
            safe = np.where(rho > 0, rho, 1.0)
            out[sel] = b.center + (b.profile(rho) / safe)[:, None] * d
        outside = owner < 0
        if np.any(outside):
            raise OutOfDomain("points outside the root disc")
        return (out @ self.A.T).reshape(x.shape)

    def grad(self, x) -> np.ndarray:
        """Deformation gradient at points ``x``; shape (..., 2, 2)."""
        x = np.asarray(x, float)
        pts = x.reshape(-1, 2)
        balls, owner = self._deepest(pts)
        out = np.tile(np.eye(2), (pts.shape[0], 1, 1))
        for k, b in enumerate(balls):
            sel = owner == k
            if not np.any(sel):
                continue
            d = pts[sel] - b.center
            rho = np.linalg.norm(d, axis=-1)
            safe = np.where(rho > 0, rho, 1.0)
            e = d / safe[:, None]
            ee = e[:, :, None] * e[:, None, :]
            a = b.profile.derivative(rho)
            c = np.where(rho > 0, b.profile(rho) / safe, a)
            out[sel] = a[:, None, None] * ee + c[:, None, None] * (np.eye(2) - ee)
        return (self.A @ out).reshape(x.shape[:-1] + (2, 2))

    def total_energy(self, W: Energy, method: str = "adaptive") -> float:
        """Energy over the root disc: ball energies plus the affine remainder.

        ``method`` is ``"adaptive"`` (:func:`radial_energy`) or ``"composite"``
        (:func:`radial_energy_estimate`, faster for repeated use).
        """
        WA = float(W.g(np.asarray(self.lam), np.asarray(self.lam)))
        if method == "adaptive":
            one = lambda v: radial_energy(W, v, self.lam)
        elif method == "composite":
            one = lambda v: radial_energy_estimate(W, v, self.lam)[0]
        else:
            raise ValueError(f"unknown method {method!r}")

        def node_energy(b: Ball) -> float:
            e = one(b.profile)
            for ch in b.children:
                e += node_energy(ch) - np.pi * ch.radius**2 * WA
            return e

        return node_energy(self.root)


def _validate(b: Ball):
    for i, ch in enumerate(b.children):
        dist = float(np.linalg.norm(ch.center - b.center))
        if dist + ch.radius >= b.radius:
            raise NestingError(f"ball at {ch.center.tolist()} is not strictly inside its parent")
        # the parent's profile must be the identity on the annulus covered by the child
        rr = np.linspace(max(dist - ch.radius, 0.0), dist + ch.radius, 257)
        if not (np.all(np.abs(b.profile(rr) - rr) <= 1e-12 * b.radius)
                and np.all(np.abs(b.profile.derivative(rr) - 1) <= 1e-9)):
            raise NestingError(f"ball at {ch.center.tolist()} overlaps the non-affine part of its parent")
        for other in b.children[i + 1:]:
            if np.linalg.norm(ch.center - other.center) < ch.radius + other.radius:
                raise OverlapError(f"balls at {ch.center.tolist()} and {other.center.tolist()} overlap")
        _validate(ch)


def _ball_from_spec(d: dict, lam: float, angle: float) -> Ball:
    if "lambda" in d and not np.isclose(float(d["lambda"]), lam, rtol=0, atol=1e-14):
        raise NestingError("a nested ball must carry the boundary factor of its enclosing affine region")
    if "rotation_angle" in d and not np.isclose(float(d["rotation_angle"]), angle, rtol=0, atol=1e-14):
        raise NestingError("a nested ball must carry the rotation of its enclosing affine region")
    R = float(d["radius"])
    src = d.get("profile", "r")
    prof = RadialProfile.from_expression(src, R, d.get("core_radius"))
    children = [_ball_from_spec(c, lam, angle) for c in d.get("children", [])]
    return Ball(np.asarray(d.get("center", [0.0, 0.0]), float), R, prof, children, dict(d))


def build_packing(spec) -> PiecewiseRadialMap:
    """Build and validate a piecewise radial map from a dict or JSON text.

    The top-level object is the root disc with keys ``center``, ``radius``,
    ``lambda``, ``rotation_angle``, optional ``profile`` (formula in r, default
    the identity) and ``children``; each child has ``center``, ``radius``,
    ``profile``, optional ``core_radius`` and its own ``children``.
    """
    if isinstance(spec, str):
        spec = json.loads(spec)
    lam = float(spec.get("lambda", 1.0))
    angle = float(spec.get("rotation_angle", 0.0))
    if lam <= 0:
        raise ValueError("lambda must be positive")
    root_spec = {k: v for k, v in spec.items() if k not in ("lambda", "rotation_angle")}
    root_spec.setdefault("radius", 1.0)
    root = _ball_from_spec(root_spec, lam, angle)
    _validate(root)
    return PiecewiseRadialMap(root, lam, angle)
