"""
Monte Carlo estimators built on the simulators: the harmonic function, the
martingale check, clustering curves, survival, the overlap probability ``p``
and the alpha scan of interface tightness.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..gf2core import Config, Lattice
from ..models import FlipRateModel, RateTable, interface_table, rebellious_table
from .engine import CancellativeSim, RandomStream, make_sim, product_config
from .hat import DEFAULT_CAP, HatYSample, batch_means


@dataclass
class EstimatorReport:
    estimate: float
    stderr: float
    n_effective: float
    seed: Optional[int] = None
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError("stderr must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def map_replicas(fn: Callable, args: Sequence, jobs: int = 1) -> list:
    """``[fn(a) for a in args]``, optionally over a process pool; order is kept."""
    if jobs is None or jobs <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args, chunksize=max(1, len(args) // (4 * jobs))))


def _mean_se(values) -> tuple:
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return float(v.mean()) if len(v) else 0.0, 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


# -- harmonic function ---------------------------------------------------------

class HFunction:
    """``h(x) = sum_i E ||(hat Y + i) x||`` under the weighted empirical law of ``samples``.

    Distinct states are evaluated once. For one state ``S`` the count of
    shifts with odd overlap is found from the multiset ``{j - s : j in x, s in S}``:
    shift ``i`` contributes iff it occurs an odd number of times.
    """

    def __init__(self, samples: Sequence[HatYSample]):
        if not samples:
            raise ValueError("no samples")
        index = {}
        weights = []
        self.sample_state = np.empty(len(samples), dtype=np.int64)
        for j, s in enumerate(samples):
            k = index.get(s.support)
            if k is None:
                k = index[s.support] = len(weights)
                weights.append(0.0)
            weights[k] += s.weight
            self.sample_state[j] = k
        self.states = list(index)
        w = np.asarray(weights)
        self.prob = w / w.sum()
        self.samples = samples
        self.state_ids = np.concatenate([np.full(len(s), k) for k, s in enumerate(self.states)])
        self.offsets = np.concatenate([np.asarray(s, dtype=np.int64) for s in self.states])
        self.sizes = np.array([len(s) for s in self.states], dtype=float)

    @property
    def p_delta0(self) -> float:
        return float(self.prob[self.sizes == 1].sum())

    @property
    def mean_size(self) -> float:
        return float(self.prob @ self.sizes)

    def per_state(self, x_sites) -> np.ndarray:
        """Number of odd-overlap shifts for every distinct state."""
        xs = np.asarray(sorted(x_sites), dtype=np.int64)
        if len(xs) == 0:
            return np.zeros(len(self.states))
        diff = xs[:, None] - self.offsets[None, :]
        span = int(diff.max() - diff.min()) + 1
        key = (self.state_ids[None, :] * span + (diff - diff.min())).ravel()
        uniq, counts = np.unique(key, return_counts=True)
        odd = uniq[counts % 2 == 1] // span
        return np.bincount(odd, minlength=len(self.states)).astype(float)

    def __call__(self, x_sites) -> float:
        return float(self.prob @ self.per_state(x_sites))


def _sites(x) -> list:
    if isinstance(x, Config):
        if not x.is_finite:
            raise ValueError("h is defined on finite configurations")
        return [x.lattice.site_index(d) for d in x.support()]
    return list(x)


def estimate_h(samples: Sequence[HatYSample], x, batch: Optional[int] = None,
               hfun: Optional[HFunction] = None) -> EstimatorReport:
    """Estimate ``h(x)`` with a batch-means error; ``x`` is a finite Config or site list.

    The empirical law always satisfies ``P[delta_0] |x| <= h <= E|hat Y| |x|``;
    this is asserted.
    """
    hf = hfun or HFunction(samples)
    xs = _sites(x)
    if not xs:
        return EstimatorReport(0.0, 0.0, float(len(samples)), parameters={"x": []})
    g = hf.per_state(xs)
    w = np.array([s.weight for s in samples], dtype=float)
    est, se, n_eff = batch_means(g[hf.sample_state], w, samples, batch)
    n = len(xs)
    tol = 1e-9 * max(1.0, est)
    if not hf.p_delta0 * n - tol <= est <= hf.mean_size * n + tol:
        raise AssertionError(f"h estimate {est} outside [{hf.p_delta0 * n}, {hf.mean_size * n}]")
    return EstimatorReport(est, se, n_eff, parameters={"x": xs, "c": hf.p_delta0,
                                                        "C": hf.mean_size})


def _martingale_replica(args):
    table, x0, times, seed, stream, hf = args
    sim = CancellativeSim(table, x0, seed, stream)
    out = []
    for t in times:
        sim.advance(t)
        out.append(hf(sim.support()))
    return out


def martingale_test(rt_xp: RateTable, hat_samples: Sequence[HatYSample], x0: Config,
                    times: Sequence[float], replicates: int = 2000, seed: int = 0,
                    jobs: int = 1) -> dict:
    """z-scores of ``mean h(X'_t) - h(x0)`` at each time over independent replicates."""
    if not x0.is_finite:
        raise ValueError("x0 must be finite")
    hf = HFunction(hat_samples)
    h0 = hf(_sites(x0))
    times = sorted(float(t) for t in times)
    rows = map_replicas(_martingale_replica,
                        [(rt_xp, x0, times, seed, r, hf) for r in range(replicates)], jobs)
    vals = np.asarray(rows, dtype=float).reshape(replicates, len(times))
    out = []
    for j, t in enumerate(times):
        m, se = _mean_se(vals[:, j])
        if se > 0:
            z = (m - h0) / se
        else:
            z = 0.0 if abs(m - h0) <= 1e-12 * max(1.0, abs(h0)) else math.copysign(math.inf, m - h0)
        out.append({"time": t, "mean": m, "stderr": se, "z": z})
    return {"h0": h0, "replicates": replicates, "seed": seed, "points": out}


# -- clustering ------------------------------------------------------------------

def _clustering_replica(args):
    model, n, p, times, seed, stream = args
    rng = RandomStream(seed, stream)
    parity = model.parity if isinstance(model, RateTable) else 0
    x = product_config(n, p, rng, parity)
    sim = make_sim(model, x, rng=rng)
    out = []
    for t in times:
        sim.advance(t)
        out.append(sim.disagreement_density())
    return out


def clustering_curve(model, n: int, p: float, times: Sequence[float], replicates: int = 100,
                     seed: int = 0, jobs: int = 1) -> list:
    """Edge-disagreement density ``P[X_t(i) != X_t(i+1)]`` on a ring from product(p).

    The ring should be large compared with the diffusive scale ``sqrt(max time)``
    so that wrap-around does not matter.
    """
    times = sorted(float(t) for t in times)
    rows = map_replicas(_clustering_replica,
                        [(model, n, p, times, seed, r) for r in range(replicates)], jobs)
    vals = np.asarray(rows, dtype=float).reshape(replicates, len(times))
    out = []
    for j, t in enumerate(times):
        m, se = _mean_se(vals[:, j])
        out.append({"time": t, "estimate": m, "stderr": se, "replicates": replicates})
    return out


def _walk_replica(args):
    n, p, times, seed, stream, hop_rate = args
    rng = RandomStream(seed, stream)
    bits = rng.bits(n, p)
    occ = bytearray(n)
    walkers = []
    where = {}
    for k in range(n):
        if bits[k] != bits[(k + 1) % n]:
            occ[k] = 1
            where[k] = len(walkers)
            walkers.append(k)

    def remove(k):
        i = where.pop(k)
        last = walkers.pop()
        if i < len(walkers):
            walkers[i] = last
            where[last] = i
        occ[k] = 0

    t = 0.0
    out = []
    for t_rec in times:
        while walkers:
            total = 2.0 * hop_rate * len(walkers)
            dt = -math.log(1.0 - rng.random()) / total
            if t + dt > t_rec:
                break
            t += dt
            u = rng.random() * 2 * len(walkers)
            k = walkers[min(int(u) // 2, len(walkers) - 1)]
            target = (k + (1 if int(u) % 2 else -1)) % n
            remove(k)
            if occ[target]:
                remove(target)
            else:
                occ[target] = 1
                where[target] = len(walkers)
                walkers.append(target)
        t = t_rec
        out.append(len(walkers) / n)
    return out


def annihilating_walk_density(n: int, p: float, times: Sequence[float], replicates: int = 100,
                              seed: int = 0, hop_rate: float = 0.5, jobs: int = 1) -> list:
    """Density of annihilating random walkers on a ring of ``n`` edges.

    Walkers start on the disagreeing edges of a product(p) configuration and
    jump to each neighbouring edge at ``hop_rate``; two walkers meeting both
    vanish. This is an independent simulator for the interfaces of the
    nearest-neighbour voter model.
    """
    times = sorted(float(t) for t in times)
    rows = map_replicas(_walk_replica,
                        [(n, p, times, seed, r, hop_rate) for r in range(replicates)], jobs)
    vals = np.asarray(rows, dtype=float).reshape(replicates, len(times))
    out = []
    for j, t in enumerate(times):
        m, se = _mean_se(vals[:, j])
        out.append({"time": t, "estimate": m, "stderr": se, "replicates": replicates})
    return out


# -- survival and overlap ----------------------------------------------------------

def _survival_replica(args):
    table, x0, horizon, seed, stream = args
    sim = make_sim(table, x0, seed, stream)
    sim.advance(horizon)
    return 1 if any(sim.sites.buf) or sim.sites.left or sim.sites.right else 0


def survival_probability(rt, x0: Config, horizon: float, replicates: int = 1000,
                         seed: int = 0, jobs: int = 1) -> EstimatorReport:
    """Fraction of replicates with ``X_t != 0`` at ``horizon``.

    The all-zeros state is absorbing for every cancellative table, so a
    replicate that reaches it is detected exactly by an empty support.
    """
    if not x0.is_finite:
        raise ValueError("x0 must be finite")
    alive = map_replicas(_survival_replica,
                         [(rt, x0, horizon, seed, r) for r in range(replicates)], jobs)
    m, se = _mean_se(alive)
    return EstimatorReport(m, se, float(replicates), seed,
                           {"horizon": horizon, "replicates": replicates})


def product_sampler(p: float) -> Callable:
    """``x0`` sampler for the Bernoulli(p) product law."""
    def sample(rng: RandomStream, length: int) -> list:
        return rng.bits(length, p)
    return sample


def estimate_p(x0_sampler: Callable, dual_hat_samples: Sequence[HatYSample], draws: int = 10000,
               seed: int = 0) -> EstimatorReport:
    """Monte Carlo value of ``E ||X_0 hat Y'||`` for a translation-invariant ``X_0`` law.

    ``x0_sampler(rng, length)`` returns the bits of ``X_0`` on ``length``
    consecutive sites; a state of ``hat Y'`` is drawn with probability
    proportional to its weight and placed on those sites.
    """
    rng = RandomStream(seed, 0)
    w = np.array([s.weight for s in dual_hat_samples], dtype=float)
    cum = np.cumsum(w / w.sum())
    vals = np.empty(draws)
    for d in range(draws):
        j = min(int(np.searchsorted(cum, rng.random(), side="right")), len(cum) - 1)
        sup = dual_hat_samples[j].support
        bits = x0_sampler(rng, sup[-1] + 1)
        vals[d] = sum(bits[k] for k in sup) & 1
    m, se = _mean_se(vals)
    return EstimatorReport(m, se, float(draws), seed, {"draws": draws})


# -- alpha scan ----------------------------------------------------------------------

def _scan_replica(args):
    table, events, cap, seed, stream = args
    lat = Lattice(table.parity)
    sim = CancellativeSim(table, Config.from_doubled([lat.parity], lat), seed, stream)
    rng = sim.rng
    quarter = max(1, events // 4)
    area = [0.0] * 4
    span_t = [0.0] * 4
    t0 = 0.0
    n = 0
    size = 1
    while n < events:
        total = sim.total_rate
        dt = -math.log(1.0 - rng.random()) / total
        q = min(n // quarter, 3)
        area[q] += size * dt
        span_t[q] += dt
        if size == 1:
            t0 += dt
        sim.clock += dt
        g, a = sim._pick(total)
        sim._fire(g, a)
        n += 1
        size = sim.n_ones
        lo = sim.leftmost()
        hi = sim.rightmost()
        if hi - lo + 1 > cap:
            return {"aborted": True, "events": n, "time": sim.clock, "drift": None,
                    "p_delta0": t0 / sim.clock}
        if n % 256 == 0 or lo - sim.sites.lo < 8 or sim.sites.lo + len(sim.sites.buf) - hi < 8:
            sim.recenter()
    avg = [a / s if s > 0 else 0.0 for a, s in zip(area, span_t)]
    return {"aborted": False, "events": n, "time": sim.clock, "drift": avg[3] - avg[2],
            "p_delta0": t0 / sim.clock}


def alpha_scan(kind: str = "rebellious", alphas: Sequence = (0.2, 0.35, 0.5, 0.65, 0.8, 1.0),
               events: int = 100_000, replicas: int = 20, cap: int = DEFAULT_CAP,
               seed: int = 0, jobs: int = 1) -> dict:
    """Growth or tightness of the interface from a single particle across ``alpha``.

    Each replica runs ``events`` events from ``delta_0``. The drift indicator
    is the time-averaged ``|hat Y|`` over the last quarter of events minus
    that over the third quarter. A point is ``growth`` if at least half the
    replicas hit the span cap or the drift z-score exceeds 3, ``tight`` if
    no replica hit the cap and the z-score is below 2, and ``inconclusive``
    otherwise. The bracket is the
    pair of neighbouring verdicts where growth turns into tightness.
    """
    if kind != "rebellious":
        raise ValueError(f"alpha scan supports the rebellious model, not {kind!r}")
    points = []
    for i, alpha in enumerate(alphas):
        table = interface_table(rebellious_table(alpha))
        reps = map_replicas(_scan_replica, [(table, events, cap, seed, 1000 * i + r)
                                            for r in range(replicas)], jobs)
        aborted = sum(r["aborted"] for r in reps)
        drifts = [r["drift"] for r in reps if not r["aborted"]]
        d, se = _mean_se(drifts) if drifts else (math.nan, 0.0)
        if len(drifts) < 2:
            z = math.nan
        elif se > 0:
            z = d / se
        else:
            z = 0.0 if d == 0 else math.copysign(math.inf, d)
        if 2 * aborted >= replicas or z > 3:
            verdict = "growth"
        elif z < 2 and aborted == 0:
            verdict = "tight"
        else:
            verdict = "inconclusive"
        p0, p0_se = _mean_se([r["p_delta0"] for r in reps])
        points.append({"alpha": float(alpha), "verdict": verdict, "aborted": aborted,
                       "drift": d, "drift_stderr": se, "z": z, "p_delta0": p0,
                       "p_delta0_stderr": p0_se})
    return {"kind": kind, "events": events, "replicas": replicas, "cap": cap, "seed": seed,
            "points": points, "bracket": _bracket(points)}


def _bracket(points: list) -> Optional[list]:
    """Largest growth alpha and smallest tight alpha above it, if they are ordered."""
    pts = sorted(points, key=lambda p: p["alpha"])
    growth = [p["alpha"] for p in pts if p["verdict"] == "growth"]
    tight = [p["alpha"] for p in pts if p["verdict"] == "tight"]
    if not growth or not tight:
        return None
    lo = max(growth)
    above = [a for a in tight if a > lo]
    if not above or any(a < lo for a in tight):
        return None
    return [lo, min(above)]
