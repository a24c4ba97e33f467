"""Command-line front end.

Exit codes: 0 consistent / no violation / neutral, 1 violated / candidate or not
rank-one convex, 2 usage or configuration error, 3 numerical failure or an
inconclusive check.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .energy_core import Energy, SplitEnergy, catalog_names, get_energy, random_glplus
from .errors import (DegenerateMatrix, DomainError, InfimumUnreliable, LeftGLplus, NestingError,
                     NonPositiveDeterminant, NotMonotone, OutOfDomain, OverlapError, ParseError,
                     QuadratureDivergence)
from .report import Verdict, dumps, jsonable, to_csv

EXIT_OK, EXIT_VIOLATED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    energy: Optional[str] = None
    params: dict = field(default_factory=dict)
    h: Optional[str] = None
    f: Optional[str] = None
    grid_t: Optional[tuple] = None
    grid_z: Optional[tuple] = None
    fmt: str = "json"
    seed: int = 0
    out: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        custom = self.h is not None or self.f is not None
        if custom and (self.h is None or self.f is None):
            raise ConfigError("custom energies need both --h and --f")
        if custom and self.energy:
            raise ConfigError("give either an energy name or --h/--f, not both")


def _range(text: str) -> tuple:
    try:
        lo, hi, n = text.split(":")
        return float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN:MAX:N, got {text!r}") from None


def _param(text: str) -> tuple:
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key, float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key!r} needs a number") from None


def build_energy(cfg: RunConfig, notes: list) -> Energy:
    if cfg.h is not None:
        from .expression import make_split_energy

        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            W = make_split_energy(cfg.h, cfg.f, "custom")
        notes.extend(str(w.message) for w in caught)
        return W
    if not cfg.energy:
        raise ConfigError("no energy given; use a name or --h/--f")
    try:
        return get_energy(cfg.energy, **cfg.params)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {cfg.energy}: {exc}") from None


def _grid(cfg: RunConfig):
    from .rank_one import GridSpec

    kw = {}
    if cfg.grid_t:
        kw.update(t_min=cfg.grid_t[0], t_max=cfg.grid_t[1], n_t=cfg.grid_t[2])
    if cfg.grid_z:
        kw.update(z_min=cfg.grid_z[0], z_max=cfg.grid_z[1], n_z=cfg.grid_z[2])
    try:
        return GridSpec(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _verdict_code(verdict: str) -> int:
    return {Verdict.CONSISTENT.value: EXIT_OK, Verdict.VIOLATED.value: EXIT_VIOLATED,
            Verdict.INCONCLUSIVE.value: EXIT_NUMERIC}.get(verdict, EXIT_OK)


# ---------------------------------------------------------------- commands


def cmd_catalog(cfg: RunConfig):
    rows = []
    for name in catalog_names():
        d = get_energy(name).describe()
        rows.append({"id": name, "min_margin": None, "argmin": None, "equality_points": [],
                     "h": d.get("h"), "f": d.get("f")})
    doc = {"tool_version": __version__, "command": "catalog", "energy": {}, "verdict": "",
           "conditions": rows, "witnesses": []}
    return doc, EXIT_OK


def cmd_classify(cfg: RunConfig):
    from .polyconvexity import classify_isochoric, classify_volumetric
    from .rank_one import reduce_to_log_volumetric

    notes: list = []
    W = build_energy(cfg, notes)
    if not isinstance(W, SplitEnergy):
        raise ConfigError(f"classify needs a split energy h(t) + f(z); {cfg.energy} is not one")
    vol = classify_volumetric(W.f)
    iso = classify_isochoric(W.h)
    f_convex = vol.verdict == "Convex"
    h_convex = iso.verdict == "Polyconvex"
    if f_convex and h_convex:
        subclass, meaning, code = "BothConvex", "polyconvex (sum of polyconvex parts)", EXIT_OK
    elif h_convex:
        subclass, meaning, code = "M_plus", "h convex, f not convex", EXIT_OK
    elif f_convex:
        subclass, meaning, code = "M_minus", "f convex, h not convex", EXIT_OK
    else:
        subclass, meaning, code = "NotRankOneConvex", "neither part convex: not rank-one convex", EXIT_VIOLATED
    try:
        reduced = reduce_to_log_volumetric(W, _grid(cfg)).describe()
    except InfimumUnreliable as exc:
        # z^2 f'' unbounded below: there is no log-volumetric representative
        reduced = None
        notes.append(f"no log-volumetric reduction: {exc}")
    conditions = [
        {"id": "volumetric_convex", "min_margin": vol.min_margin, "argmin": vol.witness, "equality_points": []},
        {"id": "isochoric_polyconvex", "min_margin": iso.min_margin, "argmin": iso.witness,
         "equality_points": []},
    ]
    doc = {"tool_version": __version__, "command": "classify", "energy": W.describe(), "verdict": subclass,
           "conditions": conditions, "witnesses": [],
           "extra": {"meaning": meaning, "reduced_energy": reduced}}
    if notes:
        doc["notes"] = notes
    return doc, code


def cmd_check(cfg: RunConfig):
    from .polyconvexity import GrowthVerdict, check_silhavy, growth_obstruction
    from .rank_one import check_knowles_sternberg, check_split

    notes: list = []
    W = build_energy(cfg, notes)
    kind = cfg.extra["kind"]
    if kind == "rank-one":
        rep = check_split(W, _grid(cfg)) if isinstance(W, SplitEnergy) else check_knowles_sternberg(W, _grid(cfg))
    elif kind == "ks":
        rep = check_knowles_sternberg(W, _grid(cfg))
    else:
        rep = check_silhavy(W)
        growth = growth_obstruction(W)
        rep.extra["growth"] = growth.to_dict()
        if growth.verdict == GrowthVerdict.NOT_POLYCONVEX:
            rep.verdict = Verdict.VIOLATED
            rep.witness = {"kind": "growth", **growth.to_dict(), "silhavy": rep.witness}
    rep.notes = notes + list(rep.notes)
    doc = rep.to_dict(f"check {kind}")
    return doc, _verdict_code(doc["verdict"])


def cmd_shield(cfg: RunConfig):
    from .transforms import shield

    notes: list = []
    W = build_energy(cfg, notes)
    Ws = shield(W)
    Wss = shield(Ws)
    rng = np.random.default_rng(cfg.seed)
    F = random_glplus(rng, 500, 1.0, 1.0)
    a, b = np.asarray(W(F), float), np.asarray(Wss(F), float)
    defect = np.abs(b - a) / (1 + np.abs(a))
    i = int(np.argmax(defect))
    xs = [0.5, 1.0, 2.0]
    table = [[x, y, float(Ws.g(np.asarray(x), np.asarray(y)))] for x in xs for y in xs if x >= y]
    ok = float(defect[i]) <= 1e-11
    doc = {"tool_version": __version__, "command": "shield", "energy": W.describe(),
           "verdict": Verdict.CONSISTENT.value if ok else Verdict.VIOLATED.value,
           "conditions": [{"id": "involution", "min_margin": -float(defect[i]), "argmin": F[i].tolist(),
                           "equality_points": []}],
           "witnesses": [],
           "extra": {"shield_name": Ws.name, "samples": 500, "shield_values": table}}
    if notes:
        doc["notes"] = notes
    return doc, EXIT_OK if ok else EXIT_VIOLATED


def cmd_radial(cfg: RunConfig):
    from .radial import RadialProfile, build_packing, classify_profile, radial_energy

    notes: list = []
    W = build_energy(cfg, notes)
    lam = cfg.extra.get("lam", 1.0)
    R = cfg.extra.get("radius", 1.0)
    ref_density = float(W.g(np.asarray(lam), np.asarray(lam)))
    witness = {}
    if cfg.extra.get("packing"):
        with open(cfg.extra["packing"]) as fh:
            spec = json.load(fh)
        pk = build_packing(spec)
        energy = pk.total_energy(W)
        ref = np.pi * pk.root.radius**2 * float(W.g(np.asarray(pk.lam), np.asarray(pk.lam)))
        witness = {"packing": spec}
        cls = "Packing"
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            v = RadialProfile.from_expression(cfg.extra["profile"], R)
        notes.extend(str(w.message) for w in caught)
        energy = radial_energy(W, v, lam)
        ref = np.pi * R**2 * ref_density
        cls = classify_profile(v).value
        witness = {"profile": cfg.extra["profile"], "radius": R, "lambda": lam}
    margin = energy - ref
    doc = {"tool_version": __version__, "command": "radial", "energy": W.describe(), "verdict": "",
           "conditions": [{"id": "energy_minus_affine", "min_margin": margin, "argmin": None,
                           "equality_points": []}],
           "witnesses": [witness], "extra": {"energy": energy, "affine_energy": ref, "profile_class": cls}}
    doc["verdict"] = "EnergyNeutral" if abs(margin) <= 1e-6 * (1 + abs(ref)) else (
        "EnergyIncrease" if margin > 0 else "EnergyDecrease")
    if notes:
        doc["notes"] = notes
    return doc, EXIT_OK


def cmd_qc(cfg: RunConfig):
    from .harness import QCVerdict, make_family, search_violation

    notes: list = []
    W = build_energy(cfg, notes)
    try:
        family = make_family(cfg.extra["family"])
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    F0 = np.asarray(cfg.extra.get("F0") or [1.0, 0.0, 0.0, 1.0], float).reshape(2, 2)
    res = search_violation(W, F0, family, cfg.extra.get("budget", 2000), cfg.seed)
    res.notes = notes + res.notes
    doc = res.to_dict("qc")
    return doc, EXIT_VIOLATED if res.verdict == QCVerdict.CANDIDATE else EXIT_OK


COMMANDS = {"catalog": cmd_catalog, "classify": cmd_classify, "check": cmd_check, "shield": cmd_shield,
            "radial": cmd_radial, "qc": cmd_qc}


# ---------------------------------------------------------------- argument parsing


def _add_common(p: argparse.ArgumentParser, energy: bool = True):
    if energy:
        p.add_argument("name", nargs="?", help="built-in energy name")
        p.add_argument("--energy", help="built-in energy name")
        p.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE",
                       help="energy parameter, e.g. p=3 for burkholder")
        p.add_argument("--h", help="isochoric part h(t) for t >= 1")
        p.add_argument("--f", help="volumetric part f(z)")
        p.add_argument("--grid-t", type=_range, metavar="MIN:MAX:N")
        p.add_argument("--grid-z", type=_range, metavar="MIN:MAX:N")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report here instead of stdout")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isoconvex", description="Convexity checks for planar isotropic energies.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("catalog", help="list built-in energies"), energy=False)
    _add_common(sub.add_parser("classify", help="place a split energy in the convexity classes"))
    pc = sub.add_parser("check", help="rank-one, Knowles-Sternberg or polyconvexity check")
    pc.add_argument("kind", choices=("rank-one", "polyconvex", "ks"))
    _add_common(pc)
    _add_common(sub.add_parser("shield", help="Shield transform and involution check"))
    pr = sub.add_parser("radial", help="energy of a radial deformation or packing")
    _add_common(pr)
    pr.add_argument("--profile", help="profile shape u(r) on [0, 1]")
    pr.add_argument("--packing", help="JSON file describing nested discs")
    pr.add_argument("--lambda", dest="lam", type=float, default=1.0, help="boundary scaling")
    pr.add_argument("--radius", type=float, default=1.0)
    pq = sub.add_parser("qc", help="search for a quasiconvexity violation")
    _add_common(pq)
    pq.add_argument("--family", default="TrigBubble",
                    choices=("TrigBubble", "ContractingRadial", "MollifiedLaminate", "Packing"))
    pq.add_argument("--budget", type=int, default=2000)
    pq.add_argument("--F0", type=lambda s: [float(a) for a in s.split(",")], metavar="F11,F12,F21,F22")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    energy = getattr(ns, "energy", None)
    name = getattr(ns, "name", None)
    if energy and name and energy != name:
        raise ConfigError("energy given twice")
    extra = {}
    for key in ("kind", "profile", "packing", "lam", "radius", "family", "budget", "F0"):
        if getattr(ns, key, None) is not None:
            extra[key] = getattr(ns, key)
    if ns.command == "radial" and not (extra.get("profile") or extra.get("packing")):
        raise ConfigError("radial needs --profile or --packing")
    if extra.get("F0") is not None and len(extra["F0"]) != 4:
        raise ConfigError("--F0 needs four comma-separated entries")
    if extra.get("budget") is not None and extra["budget"] < 1:
        raise ConfigError("--budget must be positive")
    return RunConfig(ns.command, energy or name, dict(getattr(ns, "param", [])), getattr(ns, "h", None),
                     getattr(ns, "f", None), getattr(ns, "grid_t", None), getattr(ns, "grid_z", None),
                     ns.format, ns.seed, ns.out, extra)


def render(doc: dict, fmt: str) -> str:
    return dumps(doc) if fmt == "json" else to_csv(jsonable(doc))


def run(cfg: RunConfig) -> tuple[str, int]:
    """Execute a configuration; returns the rendered report and the exit code."""
    doc, code = COMMANDS[cfg.command](cfg)
    return render(doc, cfg.fmt), code


# numeric failures are checked first: several of them are also ValueErrors
NUMERIC_ERRORS = (DomainError, InfimumUnreliable, QuadratureDivergence, LeftGLplus, OutOfDomain,
                  NonPositiveDeterminant, DegenerateMatrix, ArithmeticError)
USAGE_ERRORS = (ConfigError, ParseError, OSError, json.JSONDecodeError, OverlapError, NestingError, NotMonotone,
                ValueError, KeyError)


def _error_doc(cfg: Optional[RunConfig], kind: str, msg: str) -> dict:
    return {"tool_version": __version__, "command": cfg.command if cfg else "", "energy": {},
            "verdict": kind, "conditions": [], "witnesses": [], "notes": [msg]}


def main(argv=None) -> int:
    parser = make_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    cfg = None
    try:
        cfg = config_from_args(ns)
        text, code = run(cfg)
    except NUMERIC_ERRORS as exc:
        text, code = render(_error_doc(cfg, "NumericFailure", str(exc)), ns.format), EXIT_NUMERIC
    except USAGE_ERRORS as exc:
        print(f"isoconvex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg and cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
