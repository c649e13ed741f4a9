"""
The interface process viewed from its leftmost particle.

``simulate_hatY`` runs a parity-preserving table from a single particle and
records occupation times of the re-centred states; ``interface_tightness_report``
turns those into estimates of the invariant law with batch-means errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..gf2core import Config, Lattice
from ..models import RateTable
from .engine import CancellativeSim, RandomStream

DEFAULT_CAP = 512


@dataclass(frozen=True)
class HatYSample:
    """A state of the re-centred interface and the time spent in it.

    ``support`` holds site offsets from the leftmost particle, so it starts
    with 0 and has odd length. ``interval`` numbers the thinning interval the
    occupation time belongs to (``None`` for hand-made samples).
    """

    support: tuple
    weight: float
    interval: Optional[int] = None

    def __post_init__(self):
        sup = tuple(int(v) for v in self.support)
        if not sup or sup[0] != 0 or len(sup) % 2 == 0:
            raise ValueError(f"not a re-centred odd state: {sup}")
        if any(b <= a for a, b in zip(sup, sup[1:])):
            raise ValueError("support offsets must be strictly increasing")
        if self.weight < 0:
            raise ValueError("weight must be non-negative")
        object.__setattr__(self, "support", sup)

    @property
    def size(self) -> int:
        return len(self.support)

    @property
    def span(self) -> int:
        return self.support[-1] + 1


@dataclass
class HatYRun:
    samples: list
    aborted: bool
    abort_time: Optional[float]
    events: int
    seed: int
    stream: int
    params: dict = field(default_factory=dict)


def simulate_hatY(rt_interface: RateTable, horizon: float, burn_in: float = 0.0,
                  thin: float = 1.0, cap: int = DEFAULT_CAP, seed: int = 0, stream: int = 0,
                  buffer: int = 64) -> HatYRun:
    """Occupation-time samples of the interface seen from its leftmost particle.

    Starts from a single particle at time 0 and runs until ``horizon``. After
    ``burn_in`` the time spent in each re-centred state is accumulated per
    thinning interval of length ``thin``. If the span of the interface exceeds
    ``cap`` sites the run stops with ``aborted=True``, which signals that no
    tight regime was observed at these parameters.
    """
    if not rt_interface.is_pp:
        raise ValueError("the interface table must be parity-preserving")
    if thin <= 0 or horizon < burn_in:
        raise ValueError("need thin > 0 and horizon >= burn_in")
    lat = Lattice(rt_interface.parity)
    sim = CancellativeSim(rt_interface, Config.from_doubled([lat.parity], lat), seed, stream)
    params = {"horizon": horizon, "burn_in": burn_in, "thin": thin, "cap": cap}
    samples = []
    acc = {}
    interval = 0
    boundary = burn_in + thin
    rng = sim.rng
    t = 0.0

    def state():
        sup = sim.support()
        lo = sup[0]
        return tuple(k - lo for k in sup)

    def credit(key, a, b):
        # occupation of ``key`` on [a, b), split across thinning intervals
        nonlocal interval, boundary, acc
        a = max(a, burn_in)
        while a < b:
            end = min(b, boundary)
            if end > a:
                acc[key] = acc.get(key, 0.0) + (end - a)
            a = end
            if a >= boundary:
                _flush()
                interval += 1
                boundary = burn_in + (interval + 1) * thin

    def _flush():
        nonlocal acc
        for key, w in acc.items():
            samples.append(HatYSample(key, w, interval))
        acc = {}

    key = state()
    since_recentre = 0
    while True:
        total = sim.total_rate
        dt = -math.log(1.0 - rng.random()) / total if total > 0 else math.inf
        t_next = t + dt
        if t_next >= horizon:
            if horizon > burn_in:
                credit(key or state(), t, horizon)
                if acc:
                    _flush()
            sim.clock = horizon
            return HatYRun(samples, False, None, sim.events, seed, stream, params)
        if t_next > burn_in:
            credit(key or state(), t, t_next)
        t = t_next
        sim.clock = t
        g, a = sim._pick(total)
        sim._fire(g, a)
        sim.events += 1
        lo = sim.leftmost()
        hi = sim.rightmost()
        if hi - lo + 1 > cap:
            if acc:
                _flush()
            return HatYRun(samples, True, t, sim.events, seed, stream, params)
        since_recentre += 1
        if since_recentre >= 256 or lo - sim.sites.lo < 8 or \
                sim.sites.lo + len(sim.sites.buf) - hi < 8:
            sim.recenter(pad=buffer)
            since_recentre = 0
        key = None


def _group_intervals(samples: Sequence[HatYSample]) -> list:
    """Indices of samples grouped by thinning interval, in time order."""
    groups = {}
    order = []
    for j, s in enumerate(samples):
        iv = ("solo", j) if s.interval is None else s.interval
        if iv not in groups:
            groups[iv] = []
            order.append(iv)
        groups[iv].append(j)
    return [groups[iv] for iv in order]


MIN_BATCH = 50


def batch_means(values: np.ndarray, weights: np.ndarray, samples: Sequence[HatYSample],
                batch: Optional[int] = None) -> tuple:
    """Weighted mean, batch-means standard error and effective sample size.

    Batches are runs of ``batch`` consecutive thinning intervals, by default
    ``max(50, sqrt(N))`` for ``N`` intervals; a trailing partial batch joins
    the previous one. With fewer than two batches the intervals themselves
    are used as batches.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    wsum = weights.sum()
    if wsum <= 0:
        raise ValueError("total sample weight is zero")
    est = float(weights @ values / wsum)
    groups = _group_intervals(samples)
    n_raw = len(groups)
    if batch is None:
        batch = max(MIN_BATCH, int(math.isqrt(n_raw)))
    nb = n_raw // batch
    if nb < 2:
        batch, nb = 1, n_raw
    if nb < 2:
        return est, 0.0, float(n_raw)
    means = np.empty(nb)
    bw = np.empty(nb)
    for b in range(nb):
        stop = (b + 1) * batch if b < nb - 1 else n_raw
        idx = [j for g in groups[b * batch:stop] for j in g]
        w = weights[idx]
        bw[b] = w.sum()
        means[b] = w @ values[idx] / bw[b] if bw[b] > 0 else est
    # ratio-estimator batch means: weights per batch are nearly equal on a grid
    scale = bw / bw.mean()
    dev = scale * (means - est)
    stderr = float(math.sqrt(np.sum(dev ** 2) / (nb - 1) / nb))
    var = float(weights @ (values - est) ** 2 / wsum)
    if stderr > 0:
        n_eff = min(float(n_raw), var / stderr ** 2)
    else:
        n_eff = float(n_raw)
    return est, stderr, n_eff


def interface_tightness_report(samples: Sequence[HatYSample], n_max: int = 10,
                               batch: Optional[int] = None) -> dict:
    """P[delta_0], E|hat Y|, and P[|hat Y| = 2n+1] for n <= n_max, each with a stderr.

    ``tail_slope`` is the least-squares slope of ``log P[|hat Y| = 2n+1]``
    against ``n`` over the nonzero entries; it is descriptive only.
    """
    if not samples:
        raise ValueError("no samples")
    w = np.array([s.weight for s in samples], dtype=float)
    size = np.array([s.size for s in samples], dtype=float)
    p0, p0_se, n_eff = batch_means(size == 1, w, samples, batch)
    m, m_se, m_eff = batch_means(size, w, samples, batch)
    tail = []
    for n in range(n_max + 1):
        est, se, _ = batch_means(size == 2 * n + 1, w, samples, batch)
        tail.append({"n": n, "estimate": est, "stderr": se})
    pts = [(t["n"], math.log(t["estimate"])) for t in tail if t["estimate"] > 0]
    slope = float(np.polyfit(*zip(*pts), 1)[0]) if len(pts) >= 2 else None
    return {
        "p_delta0": {"estimate": p0, "stderr": p0_se},
        "mean_size": {"estimate": m, "stderr": m_se},
        "tail": tail,
        "tail_slope": slope,
        "n_samples": len(samples),
        "n_intervals": len(_group_intervals(samples)),
        "n_effective": min(n_eff, m_eff),
        "total_weight": float(w.sum()),
    }
