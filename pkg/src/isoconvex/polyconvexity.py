"""Polyconvexity probes.

* :func:`check_silhavy` -- grid search over the sufficient-and-necessary
  inequality for polyconvexity of functions of ordered singular values;
* :func:`growth_obstruction` -- polyconvex energies are bounded below along
  ``lambda * id`` as ``lambda -> 0``;
* :func:`classify_volumetric` / :func:`classify_isochoric` -- closed
  characterizations for purely volumetric and purely isochoric energies.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .energy_core import Energy, SplitEnergy
from .rank_one import tail_limit
from .report import ConditionRecord, ConvexityReport, Verdict
from .scalar import ScalarFunction

GOLDEN = (np.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class SilhavyGrids:
    """Base points ``(gamma1 >= gamma2)`` and probe points ``(nu1 >= nu2)``."""

    base_min: float = 1e-2
    base_max: float = 1e2
    n_base: int = 40
    probe_min: float = 1e-4
    probe_max: float = 1e4
    n_probe: int = 80
    diagonal_ratio: float = 1 + 1e-4
    n_scan: int = 64
    violation_tol: float = 1e-9

    def bases(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        g = np.geomspace(self.base_min, self.base_max, self.n_base)
        i, j = np.triu_indices(self.n_base)  # i <= j
        g1, g2 = g[j], g[i]
        diag = i == j
        g1 = np.where(diag, g1 * self.diagonal_ratio, g1)
        return g1, g2, diag

    def probes(self) -> tuple[np.ndarray, np.ndarray]:
        v = np.geomspace(self.probe_min, self.probe_max, self.n_probe)
        i, j = np.triu_indices(self.n_probe)
        return v[j], v[i]


@dataclass
class SilhavyProbe:
    gamma1: float
    gamma2: float
    f1: float
    f2: float
    c_interval: tuple
    chosen_c: float
    worst_margin: float
    worst_nu: tuple
    endpoint_margins: tuple = (float("nan"), float("nan"))


def _silhavy_base(ghat_nu, nu1, nu2, g0, g1, g2, f1, f2, n_scan, tol):
    d1 = nu1 - g1
    d2 = nu2 - g2
    R = ghat_nu - g0 - f1 * d1 - f2 * d2
    P = d1 * d2
    base_scale = 1 + np.abs(ghat_nu) + abs(g0) + np.abs(f1 * d1) + np.abs(f2 * d2)
    absP = np.abs(P)

    def worst(c):
        m = (R - c * P) / (base_scale + abs(c) * absP)
        k = int(np.argmin(m))
        return float(m[k]), k

    c_lo = -(f1 - f2) / (g1 - g2)
    c_hi = (f1 + f2) / (g1 + g2)
    ends = (worst(c_lo)[0], worst(c_hi)[0])
    if c_lo > c_hi:
        gap = (c_lo - c_hi) / (abs(c_lo) + abs(c_hi))
        c = 0.5 * (c_lo + c_hi)
        if gap > 1e-8:
            # genuinely empty interval: report the midpoint as witness
            m, k = worst(c)
            return c, min(m, -gap), k, (c_lo, c_hi), ends
        # rounding in f1 - f2 near the diagonal
        c_lo = c_hi = c
    cs = np.linspace(c_lo, c_hi, n_scan + 2)
    vals = [worst(c)[0] for c in cs]
    b = int(np.argmax(vals))
    best_c, best_m = cs[b], vals[b]
    # worst(c) is concave in c (minimum of functions monotone in c), so a
    # golden-section search on the neighbouring bracket refines the scan
    lo, hi = cs[max(b - 1, 0)], cs[min(b + 1, len(cs) - 1)]
    if hi > lo:
        a, bnd = lo, hi
        x1 = bnd - GOLDEN * (bnd - a)
        x2 = a + GOLDEN * (bnd - a)
        w1, w2 = worst(x1)[0], worst(x2)[0]
        for _ in range(40):
            if w1 < w2:
                a, x1, w1 = x1, x2, w2
                x2 = a + GOLDEN * (bnd - a)
                w2 = worst(x2)[0]
            else:
                bnd, x2, w2 = x2, x1, w1
                x1 = bnd - GOLDEN * (bnd - a)
                w1 = worst(x1)[0]
        for c in (x1, x2):
            m = worst(c)[0]
            if m > best_m:
                best_c, best_m = c, m
    m, k = worst(best_c)
    return best_c, m, k, (c_lo, c_hi), ends


def check_silhavy(W: Energy, grids: SilhavyGrids = SilhavyGrids()) -> ConvexityReport:
    """Search, for every base point, a coupling constant c making the inequality hold.

    Margins are normalized by ``1 + |g(nu)| + |g(gamma)| + |f1 d1| + |f2 d2| +
    |c d1 d2|``.  Diagonal bases are replaced by bases at ratio
    ``diagonal_ratio``.  The report's ``extra`` holds the worst margins at the
    two interval endpoints over all bases.
    """
    g1, g2, diag = grids.bases()
    nu1, nu2 = grids.probes()
    with np.errstate(all="ignore"):
        ghat_nu = W.ghat(nu1, nu2, strict=False)
        p = W.partials(g1, g2, strict=False)
        g0 = W.ghat(g1, g2, strict=False)
    f1s, f2s = np.asarray(p["g_x"], float), np.asarray(p["g_y"], float)
    probe_ok = np.isfinite(ghat_nu)
    nu1, nu2, ghat_nu = nu1[probe_ok], nu2[probe_ok], ghat_nu[probe_ok]
    tol = grids.violation_tol

    probes = []
    failed = None
    undefined = int((~probe_ok).sum())
    for k in range(g1.size):
        if not (np.isfinite(f1s[k]) and np.isfinite(f2s[k]) and np.isfinite(g0[k])):
            undefined += 1
            continue
        c, m, idx, interval, ends = _silhavy_base(ghat_nu, nu1, nu2, g0[k], g1[k], g2[k], f1s[k], f2s[k],
                                                   grids.n_scan, tol)
        pr = SilhavyProbe(float(g1[k]), float(g2[k]), float(f1s[k]), float(f2s[k]),
                          (float(interval[0]), float(interval[1])), float(c), float(m),
                          (float(nu1[idx]), float(nu2[idx])), (float(ends[0]), float(ends[1])))
        probes.append(pr)
        if m < -tol and (failed is None or m < failed.worst_margin):
            failed = pr

    worst = min(probes, key=lambda q: q.worst_margin)
    lo_end = min(q.endpoint_margins[0] for q in probes)
    hi_end = min(q.endpoint_margins[1] for q in probes)
    ok = failed is None
    rec = ConditionRecord("Silhavy", worst.worst_margin, [worst.gamma1, worst.gamma2],
                          [[q.gamma1, q.gamma2] for q in probes if abs(q.worst_margin) <= 1e-7][:50],
                          satisfied=ok)
    records = [rec,
               ConditionRecord("Silhavy-c_lo", lo_end, None, [], satisfied=lo_end >= -tol, required=False,
                               note="worst margin with c at the lower interval end"),
               ConditionRecord("Silhavy-c_hi", hi_end, None, [], satisfied=hi_end >= -tol, required=False,
                               note="worst margin with c at the upper interval end")]
    witness = None
    if failed is not None:
        verdict = Verdict.VIOLATED
        witness = {"gamma": [failed.gamma1, failed.gamma2], "nu": list(failed.worst_nu),
                   "c_interval": list(failed.c_interval), "chosen_c": failed.chosen_c,
                   "margin": failed.worst_margin}
    elif undefined:
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.CONSISTENT
    notes = ["diagonal bases replaced by ratio %r" % grids.diagonal_ratio]
    if undefined:
        notes.append(f"{undefined} points with undefined values or derivatives")
    return ConvexityReport(verdict, records, W.describe(), "polyconvex", witness,
                           {k: getattr(grids, k) for k in grids.__dataclass_fields__}, notes,
                           extra={"worst_at_c_lo": lo_end, "worst_at_c_hi": hi_end, "n_bases": len(probes)},
                           points={"probes": probes})


# ---------------------------------------------------------------- growth along lambda * id


class GrowthVerdict(str, Enum):
    NOT_POLYCONVEX = "NotPolyconvex"
    NO_OBSTRUCTION = "NoObstruction"


@dataclass
class GrowthResult:
    verdict: GrowthVerdict
    lambdas: list
    values: list
    note: str = ""

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.value, "lambdas": self.lambdas, "values": self.values, "note": self.note}


def growth_obstruction(W: Energy, k_max: int = 12) -> GrowthResult:
    """Test whether ``W(lambda id)`` is unbounded below as ``lambda -> 0``.

    A polyconvex energy dominates an affine function of ``(F, det F)``, which
    along ``lambda id`` reads ``a + 2 b lambda + c lambda^2`` and stays bounded
    as ``lambda -> 0``.  Values decreasing by non-shrinking steps per decade are
    taken as divergence to ``-inf``.
    """
    lam = 10.0 ** -np.arange(0, k_max + 1)
    with np.errstate(all="ignore"):
        vals = np.asarray(W.ghat(lam, lam, strict=False), float)
    if np.any(np.isnan(vals)):
        from .errors import DomainError

        raise DomainError(f"{W.name} undefined along lambda * id")
    if np.isposinf(vals[-1]):
        return GrowthResult(GrowthVerdict.NO_OBSTRUCTION, lam.tolist(), vals.tolist(), "W(lambda id) -> +inf")
    lim, decreasing, reliable = tail_limit(vals[-6:])
    steps = np.diff(vals[-6:])
    diverging = decreasing and not reliable and np.all(steps < 0)
    verdict = GrowthVerdict.NOT_POLYCONVEX if diverging else GrowthVerdict.NO_OBSTRUCTION
    note = "values decrease by %.6g per decade" % float(steps[-1]) if diverging else ""
    return GrowthResult(verdict, lam.tolist(), vals.tolist(), note)


# ---------------------------------------------------------------- one-part classifiers


@dataclass
class PartClassification:
    verdict: str
    implication: str
    witness: Optional[float] = None
    min_margin: float = 0.0
    details: dict = field(default_factory=dict)


def _as_fn(obj, attr) -> ScalarFunction:
    if isinstance(obj, SplitEnergy):
        return getattr(obj, attr)
    if isinstance(obj, str):
        from .expression import parse, to_scalar_function

        return to_scalar_function(parse(obj, "z" if attr == "f" else "t"))
    return obj


def classify_volumetric(f, z_min: float = 1e-6, z_max: float = 1e6, n: int = 2000,
                        tol: float = 1e-9) -> PartClassification:
    """Convexity of f on the z grid; for ``W = f(det F)`` convex means polyconvex."""
    f = _as_fn(f, "f")
    z = np.geomspace(z_min, z_max, n)
    m = z**2 * f.d2(z)
    m = m / (1 + np.abs(m))
    i = int(np.argmin(m))
    if m[i] >= -tol:
        return PartClassification("Convex", "polyconvex", None, float(m[i]))
    return PartClassification("NotConvex", "not rank-one convex", float(z[i]), float(m[i]))


def classify_isochoric(h, t_max: float = 1e6, n: int = 2000, tol: float = 1e-9) -> PartClassification:
    """Convex and non-decreasing on ``[1, inf)``; equivalent to polyconvexity of ``h(t)``."""
    h = _as_fn(h, "h")
    t = np.concatenate([[1.0], np.geomspace(1 + 1e-6, t_max, n)])
    _, d1, d2 = h.jet(t)
    m2 = t**2 * d2
    m2 = m2 / (1 + np.abs(m2))
    m1 = t * d1 / (1 + np.abs(t * d1))
    i2, i1 = int(np.argmin(m2)), int(np.argmin(m1))
    margin = float(min(m1[i1], m2[i2]))
    if margin >= -tol:
        return PartClassification("Polyconvex", "polyconvex", None, margin)
    bad = t[i2] if m2[i2] < m1[i1] else t[i1]
    why = "h'' < 0" if m2[i2] < m1[i1] else "h' < 0"
    return PartClassification("NotPolyconvex", "not rank-one convex", float(bad), margin, {"reason": why})
