"""Acceptance criteria 1-10, one or more tests per criterion.

The terminal summary (see conftest.py) prints one PASS/FAIL line per
criterion; a criterion passes when all of its tests pass.
"""
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from isoconvex import cli
from isoconvex.energy_core import (SplitEnergy, W_3b, W_magic_minus, W_magic_plus, W_smooth, K_distortion,
                                   catalog, random_glplus)
from isoconvex.errors import SymmetryWarning
from isoconvex.expression import eval_jet, make_split_energy, parse
from isoconvex.harness import (ContractingRadial, MollifiedLaminate, QCVerdict, TrigBubble, search_violation)
from isoconvex.polyconvexity import GrowthVerdict, SilhavyGrids, check_silhavy, growth_obstruction
from isoconvex.radial import RadialProfile, build_packing, radial_energy
from isoconvex.rank_one import GridSpec, check_knowles_sternberg, check_split, legendre_hadamard
from isoconvex.transforms import (BurkholderStar, ComplexPair, burkholder_bp, burkholder_bstar,
                                  burkholder_inequality, burkholder_lp, from_complex, half_magic_minus_one,
                                  identity_suite, shield, to_complex)
from isoconvex.energy_core import det2, lam_max_sq, singular_values

ID = np.eye(2)


# ---------------------------------------------------------------- 1


def test_criterion_1_magic_plus_equality_pattern():
    start = time.perf_counter()
    rep = check_split(W_magic_plus())
    t = rep.points["t"]
    m = rep.margins
    assert np.max(np.abs(m["C1"])) <= 1e-9
    assert np.max(np.abs(m["C3a"])) <= 1e-9
    assert t[0] == pytest.approx(1 + 1e-6, rel=0, abs=1e-15)
    assert m["C2"][0] <= 1e-5
    assert np.max(np.abs(m["C4a"] - 4 * t / (t + 1))) <= 1e-9
    assert rep.consistent
    assert time.perf_counter() - start < 5


# ---------------------------------------------------------------- 2


@pytest.fixture(scope="module")
def table_reports():
    return {"minus": check_split(W_magic_minus()), "smooth": check_split(W_smooth()), "w3b": check_split(W_3b(1.0))}


def test_criterion_2_magic_minus_identities(table_reports):
    m = table_reports["minus"].margins
    for cid in ("C1", "C4a", "C4b"):
        assert np.max(np.abs(m[cid])) <= 1e-8, cid


def test_criterion_2_magic_minus_c2_limit(table_reports):
    # h'(t) = 1 + 1/t for this energy, so the C2 margin tends to 1; the
    # stated limit of 0 cannot be reproduced (see the decisions ledger)
    lim = table_reports["minus"].extra["limits"]["C2"]
    assert abs(lim) <= 1e-8, f"C2 margin tends to {lim!r} as t -> inf, not 0"


def test_criterion_2_smooth(table_reports):
    rep = table_reports["smooth"]
    assert abs(rep.extra["limits"]["C1"]) <= 1e-8
    assert abs(rep.extra["boundary_t1"]["C2"]) <= 1e-8


def test_criterion_2_w3b(table_reports):
    rep = table_reports["w3b"]
    assert np.max(np.abs(rep.margins["C3b"])) <= 1e-7
    assert abs(rep.extra["boundary_t1"]["C2"]) <= 1e-8


# ---------------------------------------------------------------- 3


def _magic_minus_endpoint_margins(grids: SilhavyGrids):
    """Independent evaluation with c = -1/gamma2^2 from the closed form x/y - 2 log y."""
    g1, g2, _ = grids.bases()
    nu1, nu2 = grids.probes()
    G1, G2 = g1[:, None], g2[:, None]
    N1, N2 = nu1[None, :], nu2[None, :]
    ghat = lambda x, y: x / y - 2 * np.log(y)
    f1 = 1 / G2
    f2 = -G1 / G2**2 - 2 / G2
    c = -1 / G2**2
    d1, d2 = N1 - G1, N2 - G2
    terms = [ghat(N1, N2), -ghat(G1, G2), -f1 * d1, -f2 * d2, -c * d1 * d2]
    margin = sum(terms)
    scale = 1 + sum(np.abs(x) for x in terms)
    return margin / scale


def test_criterion_3_silhavy_magic_minus():
    start = time.perf_counter()
    grids = SilhavyGrids(n_base=40, n_probe=80)
    rep = check_silhavy(W_magic_minus(), grids)
    assert rep.extra["worst_at_c_hi"] >= -1e-10
    assert rep.consistent
    # the upper end of the feasible interval is the closed-form value -1/gamma2^2
    for pr in rep.points["probes"]:
        assert pr.c_interval[1] == pytest.approx(-1 / pr.gamma2**2, rel=1e-6)
    assert np.min(_magic_minus_endpoint_margins(grids)) >= -1e-10
    assert time.perf_counter() - start < 60


def test_criterion_3_growth_magic_plus():
    res = growth_obstruction(W_magic_plus())
    assert res.verdict == GrowthVerdict.NOT_POLYCONVEX
    val = W_magic_plus()(1e-6 * ID)
    assert val == pytest.approx(1 + 2 * np.log(1e-6), abs=1e-12)
    assert val < -26


# ---------------------------------------------------------------- 4


def test_criterion_4_shield_involution(rng):
    F = random_glplus(rng, 500)
    for W in catalog():
        a = W(F)
        b = shield(shield(W))(F)
        assert np.max(np.abs(b - a) / (1 + np.abs(a))) <= 1e-11, W.name


def test_criterion_4_shield_bstar(rng):
    F = random_glplus(rng, 500)
    lhs = shield(BurkholderStar())(F)
    rhs = 0.5 * (W_magic_plus()(F) - 1)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_criterion_4_b2_is_minus_det(rng):
    F = rng.normal(size=(500, 2, 2))
    assert np.max(np.abs(burkholder_bp(F, 2.0) + det2(F))) <= 1e-14


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
def test_criterion_4_bp_equals_minus_lp(rng, p):
    z = rng.normal(size=1000) + 1j * rng.normal(size=1000)
    w = rng.normal(size=1000) + 1j * rng.normal(size=1000)
    F = from_complex(ComplexPair(z, w))
    assert np.max(np.abs(burkholder_bp(F, p) + burkholder_lp(ComplexPair(z, w), p))) <= 1e-10


def test_criterion_4_bstar_difference_quotient(rng):
    F = rng.normal(size=(200, 2, 2))
    dq = (burkholder_bp(F, 2 + 1e-6) - burkholder_bp(F, 2.0)) / 1e-6
    assert np.max(np.abs(dq - burkholder_bstar(F))) <= 1e-4


def test_criterion_4_runtime(rng):
    start = time.perf_counter()
    F = random_glplus(rng, 500)
    for W in catalog():
        shield(shield(W))(F)
    shield(BurkholderStar())(F)
    assert time.perf_counter() - start < 5


# ---------------------------------------------------------------- 5


def test_criterion_5_identity_suite(rng):
    F = random_glplus(rng, 1000, log_spread=1.5)
    rep = identity_suite(F)
    for key in ("det", "half_norm", "lam_max_sq", "lam_min"):
        assert np.max(np.abs(rep.margins[key])) <= 1e-10, key
    # independent oracle: singular values from LAPACK
    zw = to_complex(F)
    s = np.linalg.svd(F, compute_uv=False)
    assert np.max(np.abs(np.abs(zw.z) + np.abs(zw.w) - s[:, 0])) <= 1e-10
    assert np.max(np.abs(np.abs(zw.z) - np.abs(zw.w) - s[:, 1])) <= 1e-10


def test_criterion_5_burkholder_inequality(rng):
    start = time.perf_counter()
    n = 100_000
    rad = rng.uniform(0, 10, (2, n))
    ang = rng.uniform(0, 2 * np.pi, (2, n))
    z = rad[0] * np.exp(1j * ang[0])
    w = rad[1] * np.exp(1j * ang[1])
    p = rng.uniform(2, 8, 100)
    # one exponent per block of 1000 samples
    worst = min(float(np.min(burkholder_inequality(ComplexPair(z[k::100], w[k::100]), p[k]))) for k in range(100))
    assert worst >= -1e-9
    assert time.perf_counter() - start < 5


# ---------------------------------------------------------------- 6


def test_criterion_6_magic_plus_contracting():
    W = W_magic_plus()
    profiles = [RadialProfile.power(2), RadialProfile.power(3), RadialProfile.power(4),
                RadialProfile.blend([1, 3], [0.5, 0.5])]
    for v in profiles:
        assert abs(radial_energy(W, v) - np.pi) <= 1e-6, v.source


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
@pytest.mark.parametrize("k", [0.5, 0.7])
def test_criterion_6_burkholder_expanding(p, k):
    from isoconvex.transforms import BurkholderEnergy

    # for p = 4, k = 1/2 the integrand vanishes identically and the energy is
    # 0; this case is kept as stated and fails (see the decisions ledger)
    e = radial_energy(BurkholderEnergy(p), RadialProfile.power(k))
    assert abs(e + np.pi) <= 1e-6, f"B_{p} on r^{k}: energy {e!r}"


def test_criterion_6_two_ball_packing():
    spec = {"center": [0, 0], "radius": 1.0, "lambda": 1.0, "rotation_angle": 0.0, "profile": "r",
            "children": [{"center": [-0.45, 0], "radius": 0.4, "profile": "r^2"},
                         {"center": [0.45, 0.1], "radius": 0.35, "profile": "r^3"}]}
    m = build_packing(spec)
    W = W_magic_plus()
    assert abs(m.total_energy(W) - np.pi * W(ID)) <= 2e-6


# ---------------------------------------------------------------- 7


def _rank_one_consistent(W) -> bool:
    if isinstance(W, SplitEnergy):
        return check_split(W).consistent
    return check_knowles_sternberg(W).consistent


def test_criterion_7_hierarchy(rng):
    start = time.perf_counter()
    grid = GridSpec()
    seen_rank_one = 0
    for W in catalog():
        poly = check_silhavy(W).consistent
        r1 = _rank_one_consistent(W)
        if poly:
            assert r1, f"{W.name}: polyconvex-consistent but not rank-one-consistent"
        if not r1:
            continue
        seen_rank_one += 1
        if isinstance(W, SplitEnergy):
            h2 = W.h_jet(grid.t_grid())[2]
            f2 = W.f_jet(grid.z_grid())[2]
            assert np.min(h2) >= -1e-9 or np.min(f2) >= -1e-9, W.name
        F = random_glplus(rng, 200)
        ang = rng.uniform(0, 2 * np.pi, (2, 200))
        xi = np.stack([np.cos(ang[0]), np.sin(ang[0])], -1)
        eta = np.stack([np.cos(ang[1]), np.sin(ang[1])], -1)
        lh = legendre_hadamard(W, F, xi, eta)
        assert np.min(lh) >= -1e-6, W.name
    assert seen_rank_one >= 5
    assert time.perf_counter() - start < 120


# ---------------------------------------------------------------- 8


def test_criterion_8_magic_plus_radial_neutral():
    res = search_violation(W_magic_plus(), ID, ContractingRadial(), budget=2000, seed=0)
    assert res.verdict == QCVerdict.NEUTRAL


def test_criterion_8_distortion_no_violation():
    res = search_violation(K_distortion(), ID, TrigBubble(), budget=2000, seed=0)
    assert res.verdict == QCVerdict.NO_VIOLATION


def test_criterion_8_synthetic_candidate():
    W = make_split_energy("-(t+1/t)", "-(z^2)", name="synthetic")
    assert not check_split(W).consistent
    res = search_violation(W, ID, MollifiedLaminate(), budget=2000, seed=0)
    assert res.verdict == QCVerdict.CANDIDATE
    assert res.refined is not None
    assert res.refined["excess"] < 0
    assert res.refined["error"] < 1e-6


# ---------------------------------------------------------------- 9

_ATOMS = ["t", "t^2", "t^3", "1/t", "sqrt(t)", "log(t)", "exp(t/4)", "t^1.5", "sin(t)", "cos(t)", "(t+1)^-2"]


def _random_expression(rng, depth=0) -> str:
    if depth >= 2 or rng.random() < 0.3:
        atom = _ATOMS[rng.integers(len(_ATOMS))]
        c = round(float(rng.uniform(0.5, 2.0)), 3)
        return f"{c}*{atom}"
    op = ["+", "-", "*", "/"][rng.integers(4)]
    a = _random_expression(rng, depth + 1)
    b = _random_expression(rng, depth + 1)
    if op == "/":
        b = f"(2 + {b}^2)"
    return f"({a}) {op} ({b})"


def test_criterion_9_random_expressions_vs_finite_differences():
    rng = np.random.default_rng(9)
    x = np.linspace(0.6, 3.0, 25)
    h = 1e-5
    for _ in range(50):
        src = _random_expression(rng)
        e = parse(src, "t")
        j = eval_jet(e, x)
        vp, vm = eval_jet(e, x + h).value, eval_jet(e, x - h).value
        d1p, d1m = eval_jet(e, x + h).d1, eval_jet(e, x - h).d1
        fd1 = (vp - vm) / (2 * h)
        fd2 = (d1p - d1m) / (2 * h)
        scale1 = np.abs(j.d1) + np.abs(j.value) * 1e-3 + 1e-8
        scale2 = np.abs(j.d2) + np.abs(j.d1) * 1e-3 + 1e-8
        assert np.max(np.abs(fd1 - j.d1) / scale1) <= 1e-5, src
        assert np.max(np.abs(fd2 - j.d2) / scale2) <= 1e-5, src


def test_criterion_9_custom_reproduces_magic_plus(rng):
    with pytest.warns(SymmetryWarning):
        W = make_split_energy("t - log(t)", "log(z)", name="custom")
    F = random_glplus(rng, 100, log_spread=2.0)
    ref = W_magic_plus()(F)
    assert np.max(np.abs(W(F) - ref)) <= 1e-12


# ---------------------------------------------------------------- 10

_CLI_RUNS = [
    ["catalog"],
    ["catalog", "--format", "csv"],
    ["classify", "W_magic_plus"],
    ["classify", "--h", "t^2", "--f", "z^2"],
    ["check", "rank-one", "W_magic_minus"],
    ["check", "rank-one", "W_3b", "--format", "csv"],
    ["check", "ks", "hencky"],
    ["check", "polyconvex", "W_magic_plus", "--seed", "3"],
    ["shield", "W_magic_minus", "--seed", "5"],
    ["radial", "W_magic_plus", "--profile", "r^2"],
    ["qc", "W_magic_plus", "--family", "ContractingRadial", "--budget", "200", "--seed", "7"],
    ["qc", "K_distortion", "--family", "TrigBubble", "--budget", "100", "--seed", "7"],
]


def _run_cli(args, tmp_path, tag):
    out = tmp_path / f"{tag}.txt"
    code = cli.main(list(args) + ["--out", str(out)])
    return out.read_bytes(), code


@pytest.mark.parametrize("args", _CLI_RUNS, ids=lambda a: "-".join(a[:2]))
def test_criterion_10_cli_determinism(args, tmp_path):
    a, ca = _run_cli(args, tmp_path, "a")
    b, cb = _run_cli(args, tmp_path, "b")
    assert ca == cb
    assert ca in (cli.EXIT_OK, cli.EXIT_VIOLATED)
    assert a == b
    assert len(a) > 0


def test_criterion_10_cli_determinism_across_processes():
    args = ["qc", "W_magic_plus", "--family", "TrigBubble", "--budget", "120", "--seed", "11"]
    outs = [subprocess.run([sys.executable, "-m", "isoconvex", *args], capture_output=True, check=False).stdout
            for _ in range(2)]
    assert outs[0] == outs[1]
    json.loads(outs[0])
