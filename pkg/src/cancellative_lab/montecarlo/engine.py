"""
Event-driven simulation of cancellative systems and flip-rate models.

Both simulators keep, for every distinct rate value, the set of currently
active transitions (an anchor site for a table shape, or a site for a flip
model). The next event is drawn from the aggregate rate, a group is chosen
proportionally to ``rate * size`` and a member uniformly inside it; after the
event only transitions within range of the flipped sites are re-examined.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..gf2core import Config, Lattice
from ..models import FlipRateModel, RateTable


class RandomStream:
    """Uniforms from a Philox (counter-based) generator keyed by ``(seed, stream)``.

    Draws are buffered in blocks, so a trajectory depends only on the key and
    on the order of calls.
    """

    def __init__(self, seed: int = 0, stream: int = 0, block: int = 4096):
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
        self.generator = np.random.Generator(np.random.Philox(ss))
        self.seed = int(seed)
        self.stream = int(stream)
        self._block = block
        self._buf = []
        self._i = 0

    def random(self) -> float:
        if self._i >= len(self._buf):
            self._buf = self.generator.random(self._block).tolist()
            self._i = 0
        v = self._buf[self._i]
        self._i += 1
        return v

    def bits(self, n: int, p: float = 0.5) -> list:
        return [1 if self.random() < p else 0 for _ in range(n)]


class _Sites:
    """Mutable bit storage over a growable window of site indices.

    Site index ``k`` is the lattice site with doubled index ``2k + parity``;
    on a ring indices are taken mod ``n``.
    """

    def __init__(self, config: Config, pad: int):
        lat = config.lattice
        self.lattice = lat
        self.parity = lat.parity
        self.ring = lat.ring
        if lat.is_ring:
            self.buf = bytearray((config.bits >> k) & 1 for k in range(lat.ring))
            self.lo = 0
            self.left = self.right = 0
        else:
            first = (config.start - lat.parity) // 2
            self.lo = first - pad
            width = config.width + 2 * pad
            self.buf = bytearray(config.value(lat.doubled(self.lo + m)) for m in range(width))
            self.left = config.left
            self.right = config.right

    def get(self, k: int) -> int:
        if self.ring is not None:
            return self.buf[k % self.ring]
        j = k - self.lo
        if 0 <= j < len(self.buf):
            return self.buf[j]
        return self.left if j < 0 else self.right

    def flip(self, k: int) -> int:
        """Flip site ``k`` and return its new value."""
        if self.ring is not None:
            j = k % self.ring
        else:
            j = k - self.lo
            if j < 0 or j >= len(self.buf):
                self._grow(k)
                j = k - self.lo
        v = self.buf[j] ^ 1
        self.buf[j] = v
        return v

    def _grow(self, k: int):
        n = len(self.buf)
        extra = max(n, 16)
        new_lo = min(self.lo, k) - extra
        new_hi = max(self.lo + n, k + 1) + extra
        buf = bytearray([self.left]) * (self.lo - new_lo)
        buf += self.buf
        buf += bytearray([self.right]) * (new_hi - self.lo - n)
        self.buf = buf
        self.lo = new_lo

    def reframe(self, lo: int, hi: int):
        """Keep only sites ``lo .. hi - 1``; the rest must equal the boundary bits."""
        if self.ring is not None:
            return
        a = lo - self.lo
        b = hi - self.lo
        head = bytearray([self.left]) * max(0, -a)
        tail = bytearray([self.right]) * max(0, b - len(self.buf))
        self.buf = head + self.buf[max(a, 0):max(min(b, len(self.buf)), 0)] + tail
        self.lo = lo

    def config(self) -> Config:
        lat = self.lattice
        if lat.is_ring:
            return Config.from_bits(self.buf, lattice=lat)
        return Config.from_bits(self.buf, lat.doubled(self.lo), lat, self.left, self.right)

    def window_bitstring(self) -> str:
        return "".join("1" if b else "0" for b in self.buf)


class _GroupedEvents:
    """Active transitions grouped by rate; subclasses define activity and effects."""

    def __init__(self, rates, rng: RandomStream):
        self.group_rate = list(rates)
        self.active = [[] for _ in self.group_rate]
        self.where = [{} for _ in self.group_rate]
        self.rng = rng
        self.clock = 0.0
        self.events = 0

    def _set(self, g: int, key, on: bool):
        where = self.where[g]
        if on:
            if key not in where:
                where[key] = len(self.active[g])
                self.active[g].append(key)
        elif key in where:
            lst = self.active[g]
            i = where.pop(key)
            last = lst.pop()
            if i < len(lst):
                lst[i] = last
                where[last] = i

    @property
    def total_rate(self) -> float:
        return sum(r * len(a) for r, a in zip(self.group_rate, self.active))

    def _fire(self, g: int, key) -> list:
        raise NotImplementedError

    def _pick(self, total: float):
        u = self.rng.random() * total
        for g, (r, lst) in enumerate(zip(self.group_rate, self.active)):
            w = r * len(lst)
            if u < w:
                return g, lst[min(int(u / r), len(lst) - 1)]
            u -= w
        g = max(i for i, lst in enumerate(self.active) if lst)
        return g, self.active[g][-1]

    def step(self) -> float:
        """Perform one event; returns the waiting time (``inf`` if nothing can happen)."""
        total = self.total_rate
        if total <= 0.0:
            return math.inf
        dt = -math.log(1.0 - self.rng.random()) / total
        self.clock += dt
        g, key = self._pick(total)
        self._fire(g, key)
        self.events += 1
        return dt

    def advance(self, t_end: float, max_events: Optional[int] = None) -> bool:
        """Run until time ``t_end``; returns False if stopped early by ``max_events``.

        The event that would overshoot ``t_end`` is discarded, which is exact
        for exponential waiting times.
        """
        rng = self.rng
        n = 0
        while True:
            total = self.total_rate
            if total <= 0.0:
                self.clock = max(self.clock, t_end)
                return True
            dt = -math.log(1.0 - rng.random()) / total
            if self.clock + dt > t_end:
                self.clock = t_end
                return True
            self.clock += dt
            g, key = self._pick(total)
            self._fire(g, key)
            self.events += 1
            n += 1
            if max_events is not None and n >= max_events:
                return False


class CancellativeSim(_GroupedEvents):
    """Continuous-time cancellative system ``x -> x xor T_k(A) x`` at rate ``r(A)``.

    Works on a ring or on Z / Z+1/2 with constant tails. Nonzero tails need a
    type-symmetric table, otherwise infinitely many transitions are active.
    With ``debug=True`` every event re-checks the aggregate rate and, for
    parity-preserving tables, the parity of the number of ones.
    """

    def __init__(self, table: RateTable, config: Config, seed: int = 0, stream: int = 0,
                 debug: bool = False, rng: Optional[RandomStream] = None):
        lat = config.lattice
        if table.entries and lat.parity != table.parity:
            raise ValueError(f"table lives on parity {table.parity}, configuration on {lat}")
        if (config.left or config.right) and not table.is_ts:
            raise ValueError("nonzero boundary bits need a type-symmetric table")
        super().__init__([float(r) for _, r in table.entries], rng or RandomStream(seed, stream))
        self.table = table
        self.debug = debug
        self.shapes = []
        for shape, _ in table.entries:
            rows = {}
            for r, c in shape.entries:
                rows.setdefault((r - table.parity) // 2, []).append((c - table.parity) // 2)
            rows = tuple((ro, tuple(cs)) for ro, cs in sorted(rows.items()))
            cols = tuple(sorted({c for _, cs in rows for c in cs}))
            self.shapes.append((rows, cols))
        reach = max((abs(v) for rows, cols in self.shapes for v in cols + tuple(r for r, _ in rows)),
                    default=0)
        self.sites = _Sites(config, pad=2 * reach + 2)
        if lat.is_ring and table.entries:
            widest = max(s.extent for s in table.shapes)
            if lat.ring <= 2 * widest:
                raise ValueError("ring too small for the table's shapes")
        self.finite = config.is_finite
        self.n_ones = len(config) if self.finite else None
        self.parity_pp = table.is_pp
        self._lo_hint = None
        self._hi_hint = None
        if self.finite and self.n_ones and not lat.is_ring:
            sup = config.support()
            self._lo_hint = lat.site_index(sup[0])
            self._hi_hint = lat.site_index(sup[-1])
        self._initial_parity = (self.n_ones or 0) & 1
        self._init_active()

    def _is_active(self, g: int, a: int) -> bool:
        get = self.sites.get
        for ro, cs in self.shapes[g][0]:
            v = 0
            for c in cs:
                v ^= get(a + c)
            if v:
                return True
        return False

    def _init_active(self):
        s = self.sites
        if s.ring is not None:
            anchors = range(s.ring)
        else:
            anchors = None
        for g, (rows, cols) in enumerate(self.shapes):
            rng_a = anchors if anchors is not None else range(s.lo - cols[-1] - 1,
                                                               s.lo + len(s.buf) - cols[0] + 1)
            for a in rng_a:
                if self._is_active(g, a):
                    self._set(g, a, True)

    def _fire(self, g: int, a: int):
        sites = self.sites
        get = sites.get
        rows, _ = self.shapes[g]
        flipped = []
        for ro, cs in rows:
            v = 0
            for c in cs:
                v ^= get(a + c)
            if v:
                flipped.append(a + ro)
        ring = sites.ring
        for k in flipped:
            nv = sites.flip(k)
            if self.n_ones is not None:
                self.n_ones += 1 if nv else -1
                if ring is None:
                    if nv:
                        if self._lo_hint is None or k < self._lo_hint:
                            self._lo_hint = k
                        if self._hi_hint is None or k > self._hi_hint:
                            self._hi_hint = k
        # re-examine every transition that reads a flipped site
        seen = set()
        for k in flipped:
            for gg, (_, cols) in enumerate(self.shapes):
                for c in cols:
                    aa = k - c
                    if ring is not None:
                        aa %= ring
                    key = (gg, aa)
                    if key in seen:
                        continue
                    seen.add(key)
                    self._set(gg, aa, self._is_active(gg, aa))
        if self.debug:
            self._check()
        return flipped

    def _check(self):
        s = self.sites
        expected = 0.0
        for g, (rows, cols) in enumerate(self.shapes):
            if s.ring is not None:
                anchors = range(s.ring)
            else:
                anchors = range(s.lo - cols[-1] - 1, s.lo + len(s.buf) - cols[0] + 1)
            expected += self.group_rate[g] * sum(1 for a in anchors if self._is_active(g, a))
        if abs(expected - self.total_rate) > 1e-9 * max(1.0, expected):
            raise AssertionError(f"total rate {self.total_rate} != recomputed {expected}")
        if self.parity_pp and self.n_ones is not None:
            if (self.n_ones & 1) != self._initial_parity:
                raise AssertionError("parity of the number of ones changed under a pp table")

    # -- observation -----------------------------------------------------

    def config(self) -> Config:
        return self.sites.config()

    def leftmost(self) -> Optional[int]:
        """Site index of the leftmost one (finite line configurations)."""
        if not self.n_ones:
            return None
        k = self._lo_hint
        get = self.sites.get
        while not get(k):
            k += 1
        self._lo_hint = k
        return k

    def rightmost(self) -> Optional[int]:
        if not self.n_ones:
            return None
        k = self._hi_hint
        get = self.sites.get
        while not get(k):
            k -= 1
        self._hi_hint = k
        return k

    def support(self) -> list:
        """Site indices of the ones of a finite configuration."""
        s = self.sites
        if s.ring is not None:
            return [k for k, b in enumerate(s.buf) if b]
        if not self.n_ones:
            return []
        lo = self.leftmost() - s.lo
        hi = self.rightmost() - s.lo
        buf = s.buf
        return [s.lo + j for j in range(lo, hi + 1) if buf[j]]

    def recenter(self, pad: int = 64):
        """Shrink the stored window around the current support."""
        if self.sites.ring is not None or not self.n_ones:
            return
        self.sites.reframe(self.leftmost() - pad, self.rightmost() + pad + 1)

    def disagreement_density(self) -> float:
        """Fraction of ring edges ``(k, k+1)`` whose endpoints differ."""
        s = self.sites
        if s.ring is None:
            raise ValueError("edge density is defined on rings")
        a = np.frombuffer(bytes(s.buf), dtype=np.uint8)
        return float(np.count_nonzero(a != np.roll(a, -1))) / s.ring

    def snapshot_row(self) -> tuple:
        """``(time, window_offset, bitstring)`` for trajectory dumps."""
        s = self.sites
        return (self.clock, s.lo, s.window_bitstring())


class FlipSim(_GroupedEvents):
    """Single-site flip dynamics of a :class:`FlipRateModel` on Z or a ring of Z."""

    def __init__(self, model: FlipRateModel, config: Config, seed: int = 0, stream: int = 0,
                 rng: Optional[RandomStream] = None):
        if config.lattice.parity != 0:
            raise ValueError("flip-rate models live on Z")
        R = model.R
        size = 2 * R + 1
        rates = [model.rate_from_window([(p >> j) & 1 for j in range(size)])
                 for p in range(1 << size)]
        values = sorted({float(r) for r in rates if r > 0})
        index = {v: g for g, v in enumerate(values)}
        self.pattern_group = [index[float(r)] if r > 0 else -1 for r in rates]
        for const, pat in ((config.left, 0), (config.right, 0)):
            if const and self.pattern_group[(1 << size) - 1] >= 0:
                raise ValueError("the all-ones neighbourhood must have rate 0")
        if self.pattern_group[0] >= 0 and not config.lattice.is_ring:
            raise ValueError("the all-zeros neighbourhood must have rate 0")
        super().__init__(values, rng or RandomStream(seed, stream))
        self.model = model
        self.R = R
        self.sites = _Sites(config, pad=2 * R + 2)
        self.site_group = {}
        s = self.sites
        rng_k = range(s.ring) if s.ring is not None else range(s.lo - R, s.lo + len(s.buf) + R)
        for k in rng_k:
            self._refresh(k)

    def _pattern(self, k: int) -> int:
        get = self.sites.get
        p = 0
        for j in range(2 * self.R + 1):
            p |= get(k - self.R + j) << j
        return p

    def _refresh(self, k: int):
        if self.sites.ring is not None:
            k %= self.sites.ring
        g = self.pattern_group[self._pattern(k)]
        old = self.site_group.get(k, -1)
        if g == old:
            return
        if old >= 0:
            self._set(old, k, False)
        if g >= 0:
            self._set(g, k, True)
            self.site_group[k] = g
        else:
            self.site_group.pop(k, None)

    def _fire(self, g: int, k: int):
        self.sites.flip(k)
        for j in range(k - self.R, k + self.R + 1):
            self._refresh(j)
        return [k]

    def config(self) -> Config:
        return self.sites.config()

    def disagreement_density(self) -> float:
        return CancellativeSim.disagreement_density(self)

    def snapshot_row(self) -> tuple:
        s = self.sites
        return (self.clock, s.lo, s.window_bitstring())


def make_sim(model, config: Config, seed: int = 0, stream: int = 0, **kw):
    """Simulator for either a :class:`RateTable` or a :class:`FlipRateModel`."""
    if isinstance(model, RateTable):
        return CancellativeSim(model, config, seed, stream, **kw)
    if isinstance(model, FlipRateModel):
        return FlipSim(model, config, seed, stream, rng=kw.get("rng"))
    raise TypeError(f"cannot simulate {type(model).__name__}")


def product_config(n: int, p: float, rng: RandomStream, parity: int = 0) -> Config:
    """Bernoulli(p) product configuration on a ring of ``n`` sites."""
    return Config.from_bits(rng.bits(n, p), lattice=Lattice(parity, n))
