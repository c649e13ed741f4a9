"""
Exact continuous-time Markov chain computations on small rings.

States of a ring with ``n`` sites are the integers ``0 .. 2**n - 1``; bit
``k`` is the value at ring site ``k`` (doubled index ``2k + parity``).
Transient laws are computed by uniformization with a Poisson tail bound.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import bicgstab, spsolve
from scipy.stats import poisson

from .models import RateTable, dual_table, interface_table
from .opalgebra import translate

logger = logging.getLogger(__name__)

MAX_RING_SITES = 14


@dataclass
class RingModel:
    """A rate table expanded over all ``n`` translates on a ring.

    ``ops`` holds one ``(rows, rate)`` pair per translate, where ``rows`` is a
    tuple of ``(row_site, col_mask)`` with indices reduced mod ``n`` and
    repeated entries cancelled.
    """

    n: int
    parity: int
    ops: list = field(default_factory=list)

    @classmethod
    def from_table(cls, rt: RateTable, n: int) -> "RingModel":
        widest = max((s.extent for s in rt.shapes), default=0)
        if rt.entries and n <= 2 * widest:
            raise ValueError(f"ring of {n} sites is too small for shapes of extent {widest}")
        ops = []
        p = rt.parity
        for shape, rate in rt.entries:
            for k in range(n):
                rows = {}
                for r, c in translate(shape, k).entries:
                    rs = ((r - p) // 2) % n
                    cs = ((c - p) // 2) % n
                    rows[rs] = rows.get(rs, 0) ^ (1 << cs)
                rows = tuple((r, m) for r, m in sorted(rows.items()) if m)
                if rows:
                    ops.append((rows, float(rate)))
        return cls(n, p, ops)

    @property
    def n_states(self) -> int:
        return 1 << self.n

    def image(self, rows, states: np.ndarray) -> np.ndarray:
        """``A x`` for every state in ``states``."""
        out = np.zeros_like(states)
        for r, m in rows:
            out |= (np.bitwise_count(states & m) & 1).astype(states.dtype) << r
        return out


def build_generator(rm: RingModel) -> sparse.csr_matrix:
    """Rate matrix with off-diagonal ``Q[x, x ^ Ax] += r(A)`` over all translates."""
    if rm.n > MAX_RING_SITES:
        raise ValueError(f"state space cap exceeded: n = {rm.n} > {MAX_RING_SITES}")
    N = rm.n_states
    states = np.arange(N, dtype=np.int64)
    src, dst, val = [], [], []
    for rows, rate in rm.ops:
        img = rm.image(rows, states)
        moving = img != 0
        src.append(states[moving])
        dst.append(states[moving] ^ img[moving])
        val.append(np.full(int(moving.sum()), rate))
    if src:
        src = np.concatenate(src)
        dst = np.concatenate(dst)
        val = np.concatenate(val)
    else:
        src = dst = np.zeros(0, dtype=np.int64)
        val = np.zeros(0)
    Q = sparse.coo_matrix((val, (src, dst)), shape=(N, N)).tocsr()
    Q.sum_duplicates()
    out_rate = np.asarray(Q.sum(axis=1)).ravel()
    return (Q - sparse.diags(out_rate)).tocsr()


def point_mass(n_states: int, state: int) -> np.ndarray:
    p = np.zeros(n_states)
    p[state] = 1.0
    return p


def transient(Q, p0: np.ndarray, t: float, eps: float = 1e-10) -> np.ndarray:
    """Law at time ``t`` of the chain with generator ``Q`` started from ``p0``.

    Uniformization: ``p(t) = sum_k Pois(k; L t) p0 P^k`` with
    ``P = I + Q / L``; the series stops once the neglected Poisson mass is
    below ``eps``, so the total-variation error is at most ``eps``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if eps <= 0:
        raise ValueError("eps must be positive")
    p0 = np.asarray(p0, dtype=float)
    if t == 0:
        return p0.copy()
    L = float(np.max(-Q.diagonal())) if Q.shape[0] else 0.0
    if L == 0.0:
        return p0.copy()
    mu = L * t
    K = int(poisson.isf(eps, mu)) + 1
    weights = poisson.pmf(np.arange(K + 1), mu)
    QT = Q.T.tocsr()
    v = p0.copy()
    out = weights[0] * v
    for k in range(1, K + 1):
        v = v + (QT @ v) / L
        out += weights[k] * v
    np.clip(out, 0.0, None, out=out)
    s = out.sum()
    return out / s if s > 0 else out


@dataclass
class DualityReport:
    identity: str
    n: int
    t: float
    eps: float
    trials: int
    max_deviation: float
    runtime_ms: float = 0.0

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("runtime_ms")
        return d


def _parity(v: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(v) & 1).astype(float)


def _check_ring_size(rt: RateTable, n: int):
    if n < 4 * rt.R + 2:
        raise ValueError(f"duality checks need n >= 4R + 2 = {4 * rt.R + 2}")


def check_duality(rt: RateTable, n: int, t: float, trials: int = 50, eps: float = 1e-10,
                  seed: int = 0) -> DualityReport:
    """Max over random ``(x, y')`` of ``|E||x Y'_t|| - E||X_t y'|||`` on a ring."""
    t0 = time.perf_counter()
    _check_ring_size(rt, n)
    QX = build_generator(RingModel.from_table(rt, n))
    QY = build_generator(RingModel.from_table(dual_table(rt), n))
    N = 1 << n
    states = np.arange(N, dtype=np.int64)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x, y = (int(v) for v in rng.integers(0, N, size=2))
        pX = transient(QX, point_mass(N, x), t, eps)
        pY = transient(QY, point_mass(N, y), t, eps)
        lhs = float(pY @ _parity(states & x))
        rhs = float(pX @ _parity(states & y))
        worst = max(worst, abs(lhs - rhs))
    return DualityReport("dual", n, t, eps, trials, worst,
                         (time.perf_counter() - t0) * 1e3)


def ring_grad(states: np.ndarray, n: int, parity: int) -> np.ndarray:
    """Vectorised interface operator on ring states of the given parity."""
    mask = (1 << n) - 1
    if parity == 0:
        rot = (states >> 1) | ((states & 1) << (n - 1))
    else:
        rot = ((states << 1) & mask) | (states >> (n - 1))
    return states ^ rot


def check_H_duality(rt: RateTable, n: int, t: float, trials: int = 50, eps: float = 1e-10,
                    seed: int = 0) -> DualityReport:
    """Same as :func:`check_duality` for ``H(x, x') = ||(grad x) x'||``.

    X runs on ring sites of parity 0, X' (the dual of the interface model) on
    the interleaved parity-1 sites.
    """
    t0 = time.perf_counter()
    _check_ring_size(rt, n)
    if rt.parity != 0:
        raise ValueError("place X on Z; X' then lives on Z+1/2")
    Xp = dual_table(interface_table(rt))
    QX = build_generator(RingModel.from_table(rt, n))
    QXp = build_generator(RingModel.from_table(Xp, n))
    N = 1 << n
    states = np.arange(N, dtype=np.int64)
    gX = ring_grad(states, n, 0)
    gXp = ring_grad(states, n, 1)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x, xp = (int(v) for v in rng.integers(0, N, size=2))
        pX = transient(QX, point_mass(N, x), t, eps)
        pXp = transient(QXp, point_mass(N, xp), t, eps)
        lhs = float(pX @ _parity(gX & xp))
        # ||x (grad x')||: pair x with the gradient of X'_t
        rhs = float(pXp @ _parity(gXp & x))
        worst = max(worst, abs(lhs - rhs))
    return DualityReport("H-dual", n, t, eps, trials, worst,
                         (time.perf_counter() - t0) * 1e3)


# -- interface viewed from its leftmost particle -------------------------------

@dataclass
class HatYAnalysis:
    """Stationary law of the truncated chain of interfaces seen from the leftmost particle.

    ``states[i]`` is a bit mask of offsets (bit 0 is the leftmost particle).
    """

    K: int
    states: np.ndarray
    pi: np.ndarray
    leakage: float

    @property
    def p_delta0(self) -> float:
        return float(self.pi[self.states == 1].sum())

    @property
    def mean_size(self) -> float:
        return float(self.pi @ np.bitwise_count(self.states))

    def size_distribution(self, n_max: int = 10) -> np.ndarray:
        """``P[|Y| = 2m + 1]`` for ``m = 0 .. n_max``."""
        sizes = np.bitwise_count(self.states)
        return np.array([self.pi[sizes == 2 * m + 1].sum() for m in range(n_max + 1)])

    def offsets(self, i: int) -> tuple:
        s = int(self.states[i])
        return tuple(k for k in range(s.bit_length()) if (s >> k) & 1)


def _hat_moves(rt: RateTable):
    """Shape translates relative to a particle, as (rows, col_offsets, rate) in sites."""
    p = rt.parity
    moves = []
    for shape, rate in rt.entries:
        rows = {}
        for r, c in shape.entries:
            rows.setdefault((r - p) // 2, []).append((c - p) // 2)
        moves.append((rows, float(rate)))
    return moves


def _successors(codes: np.ndarray, moves, K: int, B: int):
    """Transitions out of ``codes`` (bit ``B + j`` = offset ``j``).

    Returns source positions, recentred target codes, rates and a leak flag.
    """
    srcs, dsts, rates, leaks = [], [], [], []
    span_max = K + 1
    for rows, rate in moves:
        cols_all = [c for cs in rows.values() for c in cs]
        # translates whose columns can touch an occupied offset in [0, K]
        for k in range(-max(cols_all), K - min(cols_all) + 1):
            img = np.zeros_like(codes)
            for r, cs in rows.items():
                v = np.zeros_like(codes)
                for c in cs:
                    v ^= (codes >> (B + c + k)) & 1
                img |= v << (B + r + k)
            moving = img != 0
            if not moving.any():
                continue
            idx = np.nonzero(moving)[0]
            new = codes[idx] ^ img[idx]
            low = _lowest_bit(new)
            high = _highest_bit(new)
            leak = (high - low) >= span_max
            shifted = new >> low.astype(np.int64)
            srcs.append(idx)
            dsts.append(shifted << B)
            rates.append(np.full(len(idx), rate))
            leaks.append(leak)
    if not srcs:
        z = np.zeros(0, dtype=np.int64)
        return z, z, np.zeros(0), np.zeros(0, dtype=bool)
    return (np.concatenate(srcs), np.concatenate(dsts), np.concatenate(rates),
            np.concatenate(leaks))


def _lowest_bit(v: np.ndarray) -> np.ndarray:
    return np.bitwise_count((v & -v) - 1).astype(np.int64)


def _highest_bit(v: np.ndarray) -> np.ndarray:
    out = np.zeros(v.shape, dtype=np.int64)
    w = v.copy()
    for s in (32, 16, 8, 4, 2, 1):
        big = (w >> s) != 0
        out[big] += s
        w[big] >>= s
    return out


def _solve(A, b):
    if A.shape[0] <= 2000:
        return spsolve(A, b)
    # direct factorisation fills in badly on these lattices of gaps
    x, info = bicgstab(A, b, rtol=1e-13, atol=0.0, maxiter=20000)
    if info != 0:
        raise RuntimeError(f"stationary solve did not converge (info={info})")
    return x


def truncated_hatY_analysis(rt_interface: RateTable, K: int = 20,
                            max_states: Optional[int] = None) -> HatYAnalysis:
    """Exact stationary law of the interface seen from its leftmost particle, truncated at span ``K``.

    The state space is every configuration with a particle at offset 0,
    support in ``[0, K]`` and an odd number of particles that is reachable
    from a single particle. Transitions that would leave it are redirected
    to the single-particle state; ``leakage`` is the stationary probability
    flow through them.
    """
    if not rt_interface.is_pp:
        raise ValueError("needs a parity-preserving interface table")
    moves = _hat_moves(rt_interface)
    reach = max((abs(c) + abs(r) for rows, _ in moves for r, cs in rows.items() for c in cs),
                default=0)
    B = reach + 2
    if B + K + reach + 2 > 62:
        raise ValueError("K too large for 64-bit state codes")
    start = np.array([1 << B], dtype=np.int64)
    _, d0, _, l0 = _successors(start, moves, K, B)
    if l0.any():
        raise ValueError(f"K = {K} is too small: the single-particle state already leaks")

    index = {int(start[0]): 0}
    order = [int(start[0])]
    frontier = start
    while len(frontier):
        _, dst, _, leak = _successors(frontier, moves, K, B)
        fresh = []
        for d in np.unique(dst[~leak]).tolist():
            if d not in index:
                index[d] = len(order)
                order.append(d)
                fresh.append(d)
        if max_states is not None and len(order) > max_states:
            raise ValueError("state cap exceeded")
        frontier = np.array(fresh, dtype=np.int64)
    codes = np.array(order, dtype=np.int64)
    M = len(codes)
    src, dst, rate, leak = _successors(codes, moves, K, B)
    keys = np.array(sorted(index), dtype=np.int64)
    pos = np.array([index[k] for k in keys.tolist()], dtype=np.int64)
    tgt = np.zeros(len(dst), dtype=np.int64)
    ok = ~leak
    tgt[ok] = pos[np.searchsorted(keys, dst[ok])]
    tgt[leak] = 0
    keep = tgt != src
    Q = sparse.coo_matrix((rate[keep], (src[keep], tgt[keep])), shape=(M, M)).tocsr()
    out = np.asarray(Q.sum(axis=1)).ravel()
    Q = (Q - sparse.diags(out)).tocsr()
    leak_rate = np.bincount(src[leak], weights=rate[leak], minlength=M)

    if M == 1:
        pi = np.ones(1)
    else:
        # pi Q = 0 with pi[0] fixed to 1
        QT = Q.T.tocsc()
        A = QT[1:, 1:]
        b = -QT[1:, 0].toarray().ravel()
        rest = _solve(A.tocsc(), b)
        pi = np.concatenate([[1.0], np.atleast_1d(rest)])
        pi = np.clip(pi, 0.0, None)
        pi /= pi.sum()
    states = codes >> B
    logger.debug("hat-Y truncation K=%d: %d states", K, M)
    return HatYAnalysis(K, states, pi, float(pi @ leak_rate))
