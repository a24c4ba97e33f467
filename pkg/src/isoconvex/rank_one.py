"""Rank-one convexity of planar isotropic energies.

Three independent routes:

* :func:`check_split` -- the one-dimensional inequalities in ``h`` and the
  scalar ``f0`` that characterize rank-one convexity of split energies;
* :func:`check_knowles_sternberg` -- the five conditions on ``g(x, y)``;
* :func:`legendre_hadamard` -- a pointwise finite-difference probe.

Grids cannot certify statements over unbounded sets.  Infima are estimated
from a grid minimum plus tail probes and an extrapolated limit; verdicts are
always phrased as ``ConsistentOnGrid``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .energy_core import Energy, SplitEnergy, as_matrices, det2
from .errors import InfimumUnreliable, NonPositiveDeterminant
from .report import ConditionRecord, ConvexityReport, Verdict
from .scalar import ScalarFunction, log_fn

TAIL_DECADES = 6


@dataclass(frozen=True)
class GridSpec:
    """Log-spaced sample grids standing in for ``t > 1`` and ``z > 0``."""

    t_min: float = 1.0 + 1e-6
    t_max: float = 1e6
    n_t: int = 2000
    z_min: float = 1e-6
    z_max: float = 1e6
    n_z: int = 2000
    include_limits: bool = True
    eq_tol: float = 1e-7
    violation_tol: float = 1e-9

    def __post_init__(self):
        if not self.t_min > 1:
            raise ValueError("t_min must exceed 1")
        if not self.z_min > 0:
            raise ValueError("z_min must be positive")
        if self.n_t < 2 or self.n_z < 2:
            raise ValueError("grids need at least two points")
        if not (self.t_max > self.t_min and self.z_max > self.z_min):
            raise ValueError("grid bounds are inverted")

    def t_grid(self) -> np.ndarray:
        return np.geomspace(self.t_min, self.t_max, self.n_t)

    def z_grid(self) -> np.ndarray:
        return np.geomspace(self.z_min, self.z_max, self.n_z)

    def t_tail(self) -> np.ndarray:
        return self.t_max * 10.0 ** np.arange(1, TAIL_DECADES + 1)

    def z_tails(self) -> tuple[np.ndarray, np.ndarray]:
        k = 10.0 ** np.arange(1, TAIL_DECADES + 1)
        return self.z_min / k, self.z_max * k

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class InfimumResult:
    """Grid estimate of ``inf x^2 phi''(x)``.

    ``value`` is the best estimate (grid minimum or extrapolated tail limit,
    whichever is lower).  ``attained_in_limit`` flags infima approached only at
    an end of the range; ``reliable`` is False when tail probes keep
    decreasing without settling.
    """

    value: float
    argmin: float
    grid_min: float
    tail_limits: dict = field(default_factory=dict)
    attained_in_limit: bool = False
    reliable: bool = True

    def require_reliable(self) -> float:
        if not self.reliable:
            raise InfimumUnreliable(f"tail probes keep decreasing (grid minimum {self.grid_min!r})")
        return self.value


def tail_limit(values) -> tuple[float, bool, bool]:
    """Extrapolate a sequence of probe values toward an end of the range.

    Returns ``(limit, decreasing, reliable)``.  Differences that shrink
    geometrically are summed in closed form; a sequence that keeps decreasing
    without such decay is flagged unreliable.
    """
    q = np.asarray(values, float)
    if not np.all(np.isfinite(q)):
        finite = q[np.isfinite(q)]
        return (float(finite.min()) if finite.size else float("nan")), True, False
    d = np.diff(q)
    scale = 1.0 + np.abs(q).max()
    if np.all(np.abs(d) <= 1e-13 * scale):
        return float(q[-1]), False, True
    last, prev = d[-1], d[-2]
    decreasing = bool(last < 0)
    if prev != 0 and abs(last / prev) < 0.9 and np.sign(last) == np.sign(prev):
        r = last / prev
        return float(q[-1] + last * r / (1 - r)), decreasing, True
    if abs(last) <= 1e-13 * scale:
        return float(q[-1]), decreasing, True
    if decreasing:
        return float(q[-1]), True, False
    return float(q[-1]), False, True


def _infimum(fn: ScalarFunction, grid: np.ndarray, tails: dict) -> InfimumResult:
    with np.errstate(all="ignore"):
        q = grid**2 * fn.d2(grid)
    if not np.all(np.isfinite(q)):
        from .errors import DomainError

        bad = grid[~np.isfinite(q)]
        raise DomainError(f"second derivative undefined at {bad[0]!r}")
    i = int(np.argmin(q))
    best, arg = float(q[i]), float(grid[i])
    limits = {}
    reliable = True
    in_limit = False
    for name, pts in tails.items():
        with np.errstate(all="ignore"):
            qt = pts**2 * fn.d2(pts, strict=False)
        lim, decreasing, ok = tail_limit(qt)
        limits[name] = lim
        if decreasing and not ok:
            reliable = False
        if ok and lim < best:
            best = lim
            arg = float("inf") if name == "high" else 0.0
            in_limit = True
        finite = qt[np.isfinite(qt)]
        if finite.size and finite.min() < best:
            best = float(finite.min())
            arg = float(pts[np.isfinite(qt)][np.argmin(finite)])
    return InfimumResult(best, arg, float(q[i]), limits, in_limit, reliable)


def infimum_h0(W: SplitEnergy, grid: GridSpec = GridSpec()) -> InfimumResult:
    """Estimate ``inf_{t > 1} t^2 h''(t)``."""
    tails = {"high": grid.t_tail()} if grid.include_limits else {}
    return _infimum(W.h, grid.t_grid(), tails)


def infimum_f0(W, grid: GridSpec = GridSpec()) -> InfimumResult:
    """Estimate ``inf_{z > 0} z^2 f''(z)``; ``W`` may be a SplitEnergy or a ScalarFunction."""
    f = W.f if isinstance(W, SplitEnergy) else W
    lo, hi = grid.z_tails()
    tails = {"low": lo, "high": hi} if grid.include_limits else {}
    return _infimum(f, grid.z_grid(), tails)


# ---------------------------------------------------------------- split criterion


def split_margins(h1, h2, t, f0) -> dict:
    """Raw margins of the six inequalities and a magnitude scale for each.

    Returns ``{id: (margin, scale)}`` where ``scale = 1 + sum of |summands|``.
    """
    t = np.asarray(t, float)
    th2 = t**2 * h2
    a = t**2 * (t**2 - 1) * h1 * h2 - 2 * t * h1**2
    b = (t**2 + 3) * h1 + 2 * t * (t**2 + 1) * h2
    c = 4 * t * (h1 + t * h2)
    a_terms = np.abs(t**2 * (t**2 - 1) * h1 * h2) + np.abs(2 * t * h1**2)
    b_terms = np.abs((t**2 + 3) * h1) + np.abs(2 * t * (t**2 + 1) * h2)
    c_terms = np.abs(4 * t * h1) + np.abs(4 * t**2 * h2)
    with np.errstate(divide="ignore", invalid="ignore"):
        q3 = 2 * t / (t - 1) * h1
    q4 = 2 * t / (t + 1) * h1
    af = abs(f0)
    return {
        "C1": (th2 + f0, 1 + np.abs(th2) + af),
        "C2": (h1, 1 + np.abs(h1)),
        "C3a": (q3 - th2 + f0, 1 + np.abs(q3) + np.abs(th2) + af),
        "C3b": (a + (b - c) * f0, 1 + a_terms + (b_terms + c_terms) * af),
        "C4a": (q4 + th2 - f0, 1 + np.abs(q4) + np.abs(th2) + af),
        "C4b": (a + (b + c) * f0, 1 + a_terms + (b_terms + c_terms) * af),
    }


NORMALIZED = ("C3b", "C4b")
REQUIRED_ALONE = ("C1", "C2")


def aggregate_verdict(norm: dict, tol: float) -> tuple[bool, dict]:
    """Combine normalized margin arrays into satisfaction flags.

    ``norm`` maps condition id to an array over the same points.  Conditions
    C1 and C2 must hold everywhere; at each point one of C3a/C3b and one of
    C4a/C4b must hold.  Returns ``(all_ok, {requirement: pointwise_ok})``.
    """
    ok = {cid: norm[cid] >= -tol for cid in REQUIRED_ALONE}
    # C3a is undefined at t = 1 (NaN); treat NaN as "not satisfied" so the other branch decides
    ok["C3"] = np.nan_to_num(norm["C3a"], nan=-np.inf) >= -tol
    ok["C3"] |= np.nan_to_num(norm["C3b"], nan=-np.inf) >= -tol
    ok["C4"] = (np.nan_to_num(norm["C4a"], nan=-np.inf) >= -tol) | (np.nan_to_num(norm["C4b"], nan=-np.inf) >= -tol)
    return all(bool(np.all(v)) for v in ok.values()), ok


def _equality_points(x, m, tol):
    return [float(v) for v in x[np.abs(m) <= tol]]


def check_split(W: SplitEnergy, grid: GridSpec = GridSpec(), f0: Optional[float] = None) -> ConvexityReport:
    """Rank-one convexity of ``h(t) + f(z)`` via the scalar inequalities.

    Conditions are evaluated at every grid ``t``, at the boundary point
    ``t = 1`` (C3a excluded, it is singular there) and at tail probes beyond
    ``t_max``.  Margins of C3b and C4b are normalized by the size of their
    summands; the other margins are raw.  An extrapolated ``t -> inf`` value is
    recorded for equality patterns only.
    """
    notes = []
    f_inf = infimum_f0(W, grid)
    if f0 is None:
        f0 = f_inf.value
    h_inf = infimum_h0(W, grid)

    t_grid = grid.t_grid()
    t_tail = grid.t_tail() if grid.include_limits else np.empty(0)
    t_all = np.concatenate([[1.0], t_grid, t_tail])
    n_tail = t_tail.size
    _, h1, h2 = W.h_jet(t_all, strict=False)
    bad = ~(np.isfinite(h1) & np.isfinite(h2))
    domain_errors = [float(v) for v in t_all[bad]]

    with np.errstate(all="ignore"):
        raw = split_margins(h1, h2, t_all, f0)
        # C3a at t = 1 is its one-sided limit: +inf if h'(1) > 0, h''(1) + f0 if h'(1) = 0
        m0 = np.inf if h1[0] > 0 else (h2[0] + f0 if h1[0] == 0 else -np.inf)
        raw["C3a"][0][0] = m0
        raw["C3a"][1][0] = 1 + abs(h2[0]) + abs(f0) if np.isfinite(m0) else 1.0
        norm = {k: m / s for k, (m, s) in raw.items()}
    # C1 is a statement about the infimum h0 + f0; the pointwise values are
    # t^2 h''(t) + f0 and the tail limit is folded in through h0
    c1_floor = h_inf.value + f0
    reported = {k: (norm[k] if k in NORMALIZED else raw[k][0]) for k in raw}

    checked = {k: np.where(bad, 0.0, v) for k, v in norm.items()}
    all_ok, ok = aggregate_verdict(checked, grid.violation_tol)
    c1_scale = 1 + abs(h_inf.value) + abs(f0)
    c1_ok = c1_floor >= -grid.violation_tol * c1_scale

    # extrapolated t -> inf values, for equality patterns
    limits = {}
    if n_tail >= 3:
        for k, arr in reported.items():
            lim, _, reliable = tail_limit(arr[-n_tail:])
            limits[k] = lim if reliable else float("nan")

    records = []
    interior = slice(1, 1 + t_grid.size)
    for cid in ("C1", "C2", "C3a", "C3b", "C4a", "C4b"):
        arr = reported[cid]
        vals = np.where(bad, np.nan, arr)
        finite = np.isfinite(vals)
        i = int(np.nanargmin(np.where(finite, vals, np.nan))) if finite.any() else 0
        eq = _equality_points(t_all[finite], vals[finite], grid.eq_tol)
        lim = limits.get(cid)
        if lim is not None and np.isfinite(lim) and abs(lim) <= grid.eq_tol:
            eq.append(float("inf"))
        if cid == "C1":
            sat = bool(c1_ok)
        elif cid == "C2":
            sat = bool(np.all(ok["C2"]))
        elif cid in ("C3a", "C3b"):
            sat = bool(np.all(ok["C3"]))
        else:
            sat = bool(np.all(ok["C4"]))
        rec = ConditionRecord(cid, float(vals[i]), float(t_all[i]), eq, satisfied=sat,
                              required=cid in REQUIRED_ALONE)
        if cid in ("C3a", "C3b", "C4a", "C4b"):
            rec.note = "disjunction " + ("C3a|C3b" if cid.startswith("C3") else "C4a|C4b")
        records.append(rec)

    violated = not (all_ok and c1_ok)
    witness = None
    if violated:
        witness = _split_witness(t_all, checked, ok, c1_ok, c1_floor, h_inf, f0)
        verdict = Verdict.VIOLATED
    elif domain_errors:
        verdict = Verdict.INCONCLUSIVE
        notes.append(f"h', h'' undefined at {len(domain_errors)} grid points")
    elif not (h_inf.reliable and f_inf.reliable):
        verdict = Verdict.INCONCLUSIVE
        notes.append("infimum tail probes keep decreasing; h0 or f0 not reliably estimated")
    else:
        verdict = Verdict.CONSISTENT
    if f_inf.attained_in_limit:
        notes.append("f0 approached only at an end of the z range")
    if h_inf.attained_in_limit:
        notes.append("h0 approached only as t -> inf")

    return ConvexityReport(
        verdict=verdict,
        conditions=records,
        energy=W.describe(),
        check="rank-one",
        witness=witness,
        grid=grid.to_dict(),
        notes=notes,
        domain_errors=domain_errors,
        margins={k: v[interior] for k, v in reported.items()},
        points={"t": t_grid, "t_all": t_all},
        extra={"h0": h_inf.value, "f0": f0, "h0_reliable": h_inf.reliable, "f0_reliable": f_inf.reliable,
               "f0_attained_in_limit": f_inf.attained_in_limit,
               "limits": {k: v for k, v in limits.items()},
               "boundary_t1": {k: float(reported[k][0]) for k in reported}},
    )


def _split_witness(t_all, checked, ok, c1_ok, c1_floor, h_inf, f0):
    if not c1_ok:
        return {"condition": "C1", "h0": h_inf.value, "f0": f0, "h0_plus_f0": c1_floor, "t": h_inf.argmin}
    for req in ("C2", "C3", "C4"):
        fail = ~ok[req]
        if np.any(fail):
            i = int(np.argmax(fail))
            members = {"C2": ["C2"], "C3": ["C3a", "C3b"], "C4": ["C4a", "C4b"]}[req]
            return {"condition": req, "t": float(t_all[i]),
                    "margins": {m: float(checked[m][i]) for m in members}}
    return None


def reduce_to_log_volumetric(W: SplitEnergy, grid: GridSpec = GridSpec()) -> SplitEnergy:
    """Replace ``f`` by ``c log z`` with ``c = -f0``; h is kept.

    The reduced energy has the same ``h`` and the same ``f0`` and hence the
    same margins in :func:`check_split`.
    """
    f0 = infimum_f0(W, grid).require_reliable()
    c = -f0
    if c == 0:
        f = ScalarFunction.constant(0.0, "0")
    else:
        f = log_fn(c, "log(z)" if c == 1 else f"{c!r}*log(z)")
    return W.with_f(f, f"{W.name}|log-volumetric")


# ---------------------------------------------------------------- Knowles-Sternberg


KS_IDS = ("SepConv", "BakerEricksen", "KS-iii", "KS-iv", "KS-v")


def ks_margins(p: dict, x, y, tol: float = 1e-9) -> dict:
    """Scaled margins of the five conditions at unordered points (x, y).

    Each condition is multiplied by a power of the stretches so that it has the
    units of ``g`` and then divided by ``1 + x|g_x| + y|g_y| + x^2|g_xx| +
    y^2|g_yy| + xy|g_xy|``.  Signs are unchanged.
    """
    gx, gy, gxx, gyy, gxy = p["g_x"], p["g_y"], p["g_xx"], p["g_yy"], p["g_xy"]
    scale = 1 + np.abs(x * gx) + np.abs(y * gy) + np.abs(x**2 * gxx) + np.abs(y**2 * gyy) + np.abs(x * y * gxy)
    # second derivatives within tolerance of zero (condition i) holds) are
    # clamped so that rounding cannot produce a spurious negative radicand
    gxx_c = np.where(x**2 * gxx >= -tol * scale, np.maximum(gxx, 0.0), gxx)
    gyy_c = np.where(y**2 * gyy >= -tol * scale, np.maximum(gyy, 0.0), gyy)
    prod = gxx_c * gyy_c
    root = np.sqrt(np.where(prod >= 0, prod, np.nan))
    with np.errstate(divide="ignore", invalid="ignore"):
        be = (x * gx - y * gy) / (x - y)
        iv = root + gxy + (gx - gy) / (x - y)
    v = root - gxy + (gx + gy) / (x + y)
    sep = np.minimum(x**2 * gxx, y**2 * gyy)
    iii = np.minimum(gxx - gxy + gx / x, gyy - gxy + gy / y)
    return {
        "SepConv": sep / scale,
        "BakerEricksen": be * np.sqrt(x * y) / scale,
        "KS-iii": iii * x * y / scale,
        "KS-iv": iv * x * y / scale,
        "KS-v": v * x * y / scale,
        "negative_radicand": prod < 0,
    }


def _ks_grid(grid: GridSpec, n: int = 200):
    t = np.geomspace(grid.t_min, grid.t_max, n)
    z = np.geomspace(grid.z_min, grid.z_max, n)
    T, Z = np.meshgrid(t, z, indexing="ij")
    return np.sqrt(Z * T), np.sqrt(Z / T), T, Z


def check_knowles_sternberg(W: Energy, grid: GridSpec = GridSpec(), n: int = 200,
                            band: float = 1e-8) -> ConvexityReport:
    """Rank-one convexity via the five conditions on ``g(x, y)``.

    By symmetry of g only ``x > y`` is sampled, on an ``n x n`` grid in the
    ``(t, z)`` coordinates.  Conditions ii) and iv) are skipped within
    ``|x - y| < band``; iii) is evaluated on the diagonal ``x = y`` over the z
    grid.
    """
    X, Y, T, Z = _ks_grid(grid, n)
    x, y = X.ravel(), Y.ravel()
    with np.errstate(all="ignore"):
        p = W.partials(x, y, strict=False)
        m = ks_margins(p, x, y, grid.violation_tol)
        zd = np.geomspace(grid.z_min, grid.z_max, n)
        d = np.sqrt(zd)
        pd = W.partials(d, d, strict=False)
        md = ks_margins(pd, d, d, grid.violation_tol)
    off = np.abs(x - y) >= band
    tol = grid.violation_tol
    records = []
    violated = False
    witness = None
    undefined = 0
    for cid in KS_IDS:
        if cid == "KS-iii":
            vals, px, py = md[cid], d, d
        elif cid in ("BakerEricksen", "KS-iv"):
            vals, px, py = m[cid][off], x[off], y[off]
        elif cid == "KS-v":
            vals = np.concatenate([m[cid], md[cid]])
            px, py = np.concatenate([x, d]), np.concatenate([y, d])
        else:
            vals = np.concatenate([m[cid], md[cid]])
            px, py = np.concatenate([x, d]), np.concatenate([y, d])
        nan = ~np.isfinite(vals)
        if cid in ("KS-iv", "KS-v"):
            rad = np.concatenate([m["negative_radicand"], md["negative_radicand"]]) if cid == "KS-v" \
                else m["negative_radicand"][off]
            # a negative radicand means i) already fails there
            nan &= ~rad
            vals = np.where(rad, -np.inf, vals)
        undefined += int(nan.sum())
        use = np.where(nan, np.inf, vals)
        i = int(np.argmin(use))
        eqmask = np.abs(vals) <= grid.eq_tol
        eq = [[float(a), float(b)] for a, b in zip(px[eqmask][:50], py[eqmask][:50])]
        sat = bool(np.all(use >= -tol))
        rec = ConditionRecord(cid, float(use[i]), [float(px[i]), float(py[i])], eq, satisfied=sat)
        if eqmask.sum() > 50:
            rec.note = f"{int(eqmask.sum())} equality points, first 50 listed"
        records.append(rec)
        if not sat and witness is None:
            violated = True
            witness = {"condition": cid, "x": float(px[i]), "y": float(py[i]), "margin": float(use[i])}
    if violated:
        verdict = Verdict.VIOLATED
    elif undefined:
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.CONSISTENT
    notes = [f"{undefined} points with undefined partials"] if undefined else []
    return ConvexityReport(verdict, records, W.describe(), "ks", witness,
                           {**grid.to_dict(), "ks_points": n}, notes)


# ---------------------------------------------------------------- pointwise probes


def legendre_hadamard(W, F, xi, eta, step: float = 1e-4) -> float:
    """Second central difference of ``s -> W(F + s xi eta^T)`` at 0, per ``|xi|^2 |eta|^2``."""
    F = as_matrices(F)
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    D = np.multiply.outer(xi, eta) if xi.ndim == 1 else xi[..., :, None] * eta[..., None, :]
    probes = np.stack([F - step * D, F, F + step * D])
    if np.any(det2(probes) <= 0):
        raise NonPositiveDeterminant("rank-one probe line leaves GL+(2)")
    wm, w0, wp = W(probes[0]), W(probes[1]), W(probes[2])
    norm = np.sum(xi**2, axis=-1) * np.sum(eta**2, axis=-1)
    out = (wp - 2 * w0 + wm) / step**2 / norm
    return float(out) if np.ndim(out) == 0 else out


def rank_one_midpoint_defect(W, F, xi, eta, s: float) -> float:
    """``(W(F + s D) + W(F - s D))/2 - W(F)`` for ``D = xi eta^T``; nonnegative if convex along the line."""
    F = as_matrices(F)
    D = np.multiply.outer(np.asarray(xi, float), np.asarray(eta, float))
    return float(0.5 * (W(F + s * D) + W(F - s * D)) - W(F))
