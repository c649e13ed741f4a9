"""Acceptance suite: one recorded verdict per criterion, printed in the terminal summary."""
import json
import time
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from cancellative_lab import cli
from cancellative_lab.algebra_suite import run_suite
from cancellative_lab.exact import check_duality, check_H_duality, truncated_hatY_analysis
from cancellative_lab.gf2core import Z, Config, Lattice
from cancellative_lab.models import (FlipRateModel, diagram_closure, flip_rate, interface_table,
                                     rebellious_table, reflect_table, same_up_to_reflection,
                                     voter_table)
from cancellative_lab.montecarlo import (alpha_scan, annihilating_walk_density, clustering_curve,
                                         estimate_h, HFunction, interface_tightness_report,
                                         martingale_test, simulate_hatY)
from cancellative_lab.opalgebra import apply, translate


def _combined(a, b):
    return float(np.hypot(a, b))


def test_c1_algebra_suite(criterion):
    t0 = time.perf_counter()
    rep = run_suite(iterations=1000, configs=100, seed=0)
    dt = time.perf_counter() - t0
    ok = rep["passed"] and not rep["vacuous"] and dt < 10
    fails = sum(c["failed"] for c in rep["checks"].values())
    criterion(1, "algebra suite", ok, f"{fails} failures in 1000 operators, {dt:.1f} s (< 10 s)")
    assert ok, rep["first_failure"]


@pytest.mark.parametrize("name,rt,n", [("voter a=1", voter_table(), 8),
                                       ("rebellious a=0.7", rebellious_table(0.7), 12)])
def test_c2_duality(criterion, name, rt, n):
    t0 = time.perf_counter()
    d = check_duality(rt, n, 1.0, trials=50, eps=1e-10, seed=0)
    h = check_H_duality(rt, n, 1.0, trials=50, eps=1e-10, seed=1)
    dt = time.perf_counter() - t0
    worst = max(d.max_deviation, h.max_deviation)
    ok = worst <= 1e-8 and dt < 60
    criterion(2, f"duality {name} n={n}", ok,
              f"max deviation dual {d.max_deviation:.2e}, H-dual {h.max_deviation:.2e} "
              f"(<= 1e-8), {dt:.1f} s (< 60 s)")
    assert ok


def _induced_rate(rt, x, i=0):
    total = 0
    target = Config.from_sites([i])
    for shape, r in rt.entries:
        rows = sorted({a // 2 for a, _ in shape.entries})
        for k in {i - row for row in rows}:
            if apply(translate(shape, k), x) == target:
                total += r
    return total


def test_c3_rebellious_cancellative_form(criterion):
    t0 = time.perf_counter()
    bad = 0
    for k in range(11):
        alpha = Fraction(k, 10)
        rt = rebellious_table(alpha)
        model = FlipRateModel("rebellious", alpha)
        for bits in product((0, 1), repeat=5):
            x = Config.from_bits(bits, -4, Z)
            bad += _induced_rate(rt, x) != flip_rate(model, x, 0)
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 1
    criterion(3, "rebellious cancellative form", ok,
              f"{bad} mismatches over 11 x 32 windows, {dt:.2f} s (< 1 s)")
    assert ok


def test_c4_self_duality(criterion):
    t0 = time.perf_counter()
    res = {}
    for a in (Fraction(3, 10), Fraction(7, 10)):
        D = diagram_closure(rebellious_table(a))
        res[a] = same_up_to_reflection(D.Xp, D.X)
    dt = time.perf_counter() - t0
    ok = all(res.values()) and dt < 1
    criterion(4, "self-duality", ok,
              f"X' equals X up to reflection at 0.3: {res[Fraction(3, 10)]}, "
              f"0.7: {res[Fraction(7, 10)]}, {dt:.3f} s (< 1 s)")
    assert ok


def _two_adjacent(rt):
    lat = Lattice(rt.parity)
    c = 0.5 if rt.parity else 0
    return Config.from_sites([c, c + 1], lat)


def test_c5_voter_degenerate_case(criterion):
    t0 = time.perf_counter()
    rt = voter_table()
    run = simulate_hatY(interface_table(rt), 1e4, 0.0, 1.0, seed=0)
    only_d0 = not run.aborted and run.samples and all(s.support == (0,) for s in run.samples)
    rng = np.random.default_rng(5)
    exact_h = True
    for _ in range(20):
        k = int(rng.integers(1, 12))
        xs = sorted(int(v) for v in rng.choice(np.arange(-20, 20), size=k, replace=False))
        exact_h &= estimate_h(run.samples, xs).estimate == len(xs)
    Xp = diagram_closure(rt).Xp
    times = [1, 2, 5, 10, 20]
    mt = martingale_test(Xp, run.samples, _two_adjacent(Xp), times, replicates=2000, seed=0)
    zs = [p["z"] for p in mt["points"]]
    dt = time.perf_counter() - t0
    ok = only_d0 and exact_h and all(abs(z) <= 3 for z in zs) and dt < 300
    criterion(5, "voter degenerate case", ok,
              f"only delta_0: {bool(only_d0)}, h(x)=|x| on 20 x: {bool(exact_h)}, "
              f"max |z| {max(abs(z) for z in zs):.2f} (<= 3), {dt:.0f} s (< 300 s)")
    assert ok


@pytest.fixture(scope="module")
def alpha09():
    t0 = time.perf_counter()
    rt = rebellious_table(0.9)
    Y = interface_table(rt)
    run = simulate_hatY(Y, 1e5, 1e3, 1.0, seed=0)
    exact = truncated_hatY_analysis(Y, K=20)
    return {"rt": rt, "run": run, "exact": exact, "t0": t0}


def test_c6_truncation_leakage(criterion, alpha09):
    leak = alpha09["exact"].leakage
    ok = leak < 1e-6
    criterion(6, "truncated chain leakage at K=20", ok, f"leakage {leak:.2e} (< 1e-6)")
    assert ok


def test_c6_tightness_agreement(criterion, alpha09):
    run, ex = alpha09["run"], alpha09["exact"]
    assert not run.aborted
    rep = interface_tightness_report(run.samples)
    zp = (rep["p_delta0"]["estimate"] - ex.p_delta0) / rep["p_delta0"]["stderr"]
    zm = (rep["mean_size"]["estimate"] - ex.mean_size) / rep["mean_size"]["stderr"]
    ok = abs(zp) <= 3 and abs(zm) <= 3
    criterion(6, "Monte Carlo vs truncated chain", ok,
              f"P[delta_0] {rep['p_delta0']['estimate']:.5f}+-{rep['p_delta0']['stderr']:.5f} "
              f"vs {ex.p_delta0:.5f} (z={zp:.2f}); E|Y| {rep['mean_size']['estimate']:.5f}"
              f"+-{rep['mean_size']['stderr']:.5f} vs {ex.mean_size:.5f} (z={zm:.2f}); "
              f"|z| <= 3")
    assert ok


def test_c6_martingale(criterion, alpha09):
    rt, run = alpha09["rt"], alpha09["run"]
    Xp = diagram_closure(rt).Xp
    reflected = same_up_to_reflection(Xp, rt)
    times = [1, 2, 5, 10, 20]
    mt = martingale_test(Xp, run.samples, _two_adjacent(Xp), times, replicates=2000, seed=1)
    zs = [p["z"] for p in mt["points"]]
    dt = time.perf_counter() - alpha09["t0"]
    ok = reflected and all(abs(z) <= 3 for z in zs) and dt < 1200
    criterion(6, "martingale on X'", ok,
              f"X' is the reflected table: {reflected}, z = "
              f"{', '.join(f'{z:.2f}' for z in zs)} (|z| <= 3), {dt:.0f} s total (< 1200 s)")
    assert ok


def test_c7_clustering(criterion):
    t0 = time.perf_counter()
    times = [0, 1, 10, 100, 1000]
    curve = clustering_curve(voter_table(), 256, 0.5, times, replicates=200, seed=0)
    oracle = annihilating_walk_density(256, 0.5, times, replicates=200, seed=1)
    dt = time.perf_counter() - t0
    start = abs(curve[0]["estimate"] - 0.5) <= 0.02
    mono = all(b["estimate"] <= a["estimate"] + _combined(a["stderr"], b["stderr"])
               for a, b in zip(curve, curve[1:]))
    zs = [(c["estimate"] - o["estimate"]) / _combined(c["stderr"], o["stderr"])
          for c, o in zip(curve[1:], oracle[1:])]
    match = all(abs(z) <= 3 for z in zs)
    ok = start and mono and match and dt < 600
    criterion(7, "clustering", ok,
              f"t=0 density {curve[0]['estimate']:.4f} (0.5 +- 0.02), monotone: {mono}, "
              f"oracle z at 1/10/100/1000 = {', '.join(f'{z:.2f}' for z in zs)} (|z| <= 3), "
              f"{dt:.0f} s (< 600 s)")
    assert ok


def test_c8_alpha_scan(criterion):
    t0 = time.perf_counter()
    res = alpha_scan("rebellious", (0.2, 0.35, 0.5, 0.65, 0.8, 1.0), events=100_000,
                     replicas=20, seed=0)
    dt = time.perf_counter() - t0
    verdict = {p["alpha"]: p["verdict"] for p in res["points"]}
    growth = all(verdict[a] == "growth" for a in (0.2, 0.35))
    tight = all(verdict[a] == "tight" for a in (0.65, 0.8, 1.0))
    br = res["bracket"]
    inside = br is not None and 0.35 <= br[0] <= br[1] <= 0.65
    ok = growth and tight and inside and dt < 3600
    criterion(8, "alpha scan", ok,
              f"verdicts {verdict}, bracket {br} inside [0.35, 0.65]: {inside}, "
              f"{dt:.0f} s (< 3600 s)")
    assert ok


@pytest.mark.parametrize("argv", [
    ["verify-algebra", "--iterations", "50"],
    ["clustering", "--model", "rebellious", "--alpha", "0.6", "--n", "64",
     "--times", "0,1,5", "--replicates", "6"],
    ["interface-tightness", "--model", "rebellious", "--alpha", "0.9", "--horizon", "500",
     "--burn-in", "20"],
])
def test_c9_reproducibility(criterion, tmp_path, argv):
    assert cli.main(argv + ["--seed", "11", "--out", str(tmp_path / "a")]) == 0
    manifest = tmp_path / "a" / "manifest.json"
    assert cli.main(["run", "--spec", str(manifest), "--out", str(tmp_path / "b")]) == 0
    same = []
    for f in sorted(p.name for p in (tmp_path / "a").iterdir()):
        if f == "timing.json":
            continue
        same.append((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes())
    ok = all(same) and json.loads(manifest.read_text())["spec"]["seed"] == 11
    criterion(9, f"reproducibility {argv[0]}", ok,
              f"{sum(same)}/{len(same)} output files byte-identical on manifest re-run")
    assert ok
