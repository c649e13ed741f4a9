"""
Configurations over GF(2) on the lattices Z, Z+1/2 and finite rings.

Every site is addressed by a *doubled index*: site ``i`` is stored as the
integer ``2*i``, so integer sites have even doubled indices and half-integer
sites odd ones. A :class:`Config` is a finite window of explicit bits plus two
boundary constants that hold everywhere to the left and to the right of the
window. This covers finite configurations, Heaviside states and the constant
configurations with one type.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Iterator, Optional


def to_doubled(site) -> int:
    """Convert a site (int, Fraction, numeric string or float) to its doubled index."""
    if isinstance(site, str):
        site = Fraction(site)
    elif isinstance(site, float):
        site = Fraction(site)
    d = 2 * site
    if isinstance(d, Rational) and d.denominator == 1:
        return int(d)
    raise ValueError(f"{site!r} is neither an integer nor a half-integer")


def to_site(d: int) -> Fraction:
    return Fraction(d, 2)


def _popcount(v: int) -> int:
    return bin(v).count("1")


try:
    (0).bit_count()
    _popcount = int.bit_count  # noqa: F811
except AttributeError:  # pragma: no cover - python < 3.10
    pass


@dataclass(frozen=True)
class Lattice:
    """Z (parity 0), Z+1/2 (parity 1), or a ring of ``n`` sites of that parity.

    Ring site ``k`` has doubled index ``2k + parity`` taken modulo ``2n``.
    """

    parity: int = 0
    ring: Optional[int] = None

    def __post_init__(self):
        if self.parity not in (0, 1):
            raise ValueError("lattice parity must be 0 (Z) or 1 (Z+1/2)")
        if self.ring is not None and self.ring < 1:
            raise ValueError("ring size must be positive")

    @property
    def dual(self) -> "Lattice":
        return Lattice(1 - self.parity, self.ring)

    @property
    def is_ring(self) -> bool:
        return self.ring is not None

    def site_index(self, d: int) -> int:
        if (d - self.parity) % 2:
            raise ValueError(f"doubled index {d} does not lie on {self}")
        k = (d - self.parity) // 2
        return k % self.ring if self.ring is not None else k

    def doubled(self, k: int) -> int:
        return 2 * k + self.parity

    def __str__(self):
        name = "Z" if self.parity == 0 else "Z+1/2"
        return name if self.ring is None else f"ring({self.ring}, {name})"


Z = Lattice(0)
HALF = Lattice(1)


def ring(n: int, parity: int = 0) -> Lattice:
    return Lattice(parity, n)


def _mask(width: int) -> int:
    return (1 << width) - 1


@dataclass(frozen=True)
class Config:
    """An element of {0,1}^I with constant tails.

    ``bits`` holds the window: bit ``m`` is the value at doubled index
    ``start + 2m``. Sites left of the window carry ``left``, sites right of it
    carry ``right``. Instances are normalised on construction (the window is
    trimmed of bits equal to the adjacent boundary) so that ``==`` compares
    configurations, not representations.

    Ring configurations have ``start == parity``, ``width == n`` and zero
    boundary bits.
    """

    lattice: Lattice
    start: int
    width: int
    bits: int
    left: int = 0
    right: int = 0

    def __post_init__(self):
        lat = self.lattice
        if self.left not in (0, 1) or self.right not in (0, 1):
            raise ValueError("boundary bits must be 0 or 1")
        if self.width < 0:
            raise ValueError("negative window width")
        if self.bits < 0 or self.bits >> self.width:
            raise ValueError("bits exceed the window")
        if lat.is_ring:
            if self.width != lat.ring or self.start != lat.parity or self.left or self.right:
                raise ValueError("ring configurations span the whole ring and have no boundary")
            return
        if (self.start - lat.parity) % 2:
            raise ValueError(f"window start {self.start} does not lie on {lat}")
        start, width, bits = self.start, self.width, self.bits
        while width and (bits & 1) == self.left:
            bits >>= 1
            width -= 1
            start += 2
        while width and (bits >> (width - 1)) & 1 == self.right:
            width -= 1
            bits &= _mask(width)
        if width == 0 and self.left == self.right:
            start = lat.parity
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "bits", bits)

    # -- constructors -------------------------------------------------

    @classmethod
    def from_doubled(cls, indices: Iterable[int], lattice: Lattice = Z) -> "Config":
        """Finite configuration (or ring configuration) with ones at ``indices``."""
        idx = list(indices)
        if lattice.is_ring:
            bits = 0
            for d in idx:
                bits ^= 1 << lattice.site_index(d)
            return cls(lattice, lattice.parity, lattice.ring, bits)
        if not idx:
            return cls(lattice, lattice.parity, 0, 0)
        lo = min(idx)
        bits = 0
        for d in idx:
            lattice.site_index(d)
            bits |= 1 << ((d - lo) // 2)
        return cls(lattice, lo, bits.bit_length(), bits)

    @classmethod
    def from_sites(cls, sites: Iterable, lattice: Optional[Lattice] = None) -> "Config":
        ds = [to_doubled(s) for s in sites]
        if lattice is None:
            parities = {d % 2 for d in ds}
            if len(parities) > 1:
                raise ValueError("sites mix Z and Z+1/2")
            lattice = Lattice(parities.pop() if parities else 0)
        return cls.from_doubled(ds, lattice)

    @classmethod
    def zeros(cls, lattice: Lattice = Z) -> "Config":
        if lattice.is_ring:
            return cls(lattice, lattice.parity, lattice.ring, 0)
        return cls(lattice, lattice.parity, 0, 0)

    @classmethod
    def ones(cls, lattice: Lattice = Z) -> "Config":
        if lattice.is_ring:
            return cls(lattice, lattice.parity, lattice.ring, _mask(lattice.ring))
        return cls(lattice, lattice.parity, 0, 0, 1, 1)

    @classmethod
    def heaviside(cls, at, lattice: Optional[Lattice] = None, reverse: bool = False) -> "Config":
        """``1_{i >= at}`` (or ``1_{i <= at}`` when ``reverse``)."""
        d = to_doubled(at)
        if lattice is None:
            lattice = Lattice(d % 2)
        lattice.site_index(d)
        if lattice.is_ring:
            raise ValueError("Heaviside configurations do not exist on a ring")
        if reverse:
            return cls(lattice, d + 2, 0, 0, 1, 0)
        return cls(lattice, d, 0, 0, 0, 1)

    @classmethod
    def from_bits(cls, bits: Iterable[int], start: int = 0, lattice: Lattice = Z,
                  left: int = 0, right: int = 0) -> "Config":
        """Build from a bit sequence whose first entry sits at doubled index ``start``."""
        seq = [int(b) for b in bits]
        if lattice.is_ring:
            if len(seq) != lattice.ring:
                raise ValueError("ring bit sequence must have length n")
            start = lattice.parity
        v = 0
        for m, b in enumerate(seq):
            if b not in (0, 1):
                raise ValueError("bits must be 0 or 1")
            v |= b << m
        return cls(lattice, start, len(seq), v, left, right)

    @classmethod
    def from_literal(cls, lit: dict) -> "Config":
        """Parse the JSON literal ``{lattice, offset, bits, left, right}``.

        ``offset`` is the site (not doubled) of the first character of
        ``bits``; it may be a half-integer such as ``"-1/2"`` on Z+1/2.
        Rings use ``{"lattice": "ring", "n": 8, "parity": 0, "bits": "..."}``.
        """
        kind = lit.get("lattice", "Z")
        bits = str(lit.get("bits", ""))
        if kind == "ring":
            lat = ring(int(lit["n"]), int(lit.get("parity", 0)))
            return cls.from_bits(bits, lattice=lat)
        lat = {"Z": Z, "Z+1/2": HALF, "half": HALF}.get(kind)
        if lat is None:
            raise ValueError(f"unknown lattice {kind!r}")
        start = to_doubled(lit.get("offset", Fraction(lat.parity, 2)))
        return cls.from_bits(bits, start, lat, int(lit.get("left", 0)), int(lit.get("right", 0)))

    def to_literal(self) -> dict:
        if self.lattice.is_ring:
            return {"lattice": "ring", "n": self.lattice.ring, "parity": self.lattice.parity,
                    "bits": self.bitstring()}
        off = to_site(self.start)
        return {"lattice": "Z" if self.lattice.parity == 0 else "Z+1/2",
                "offset": int(off) if off.denominator == 1 else str(off),
                "bits": self.bitstring(), "left": self.left, "right": self.right}

    # -- access --------------------------------------------------------

    @property
    def end(self) -> int:
        """Doubled index one step past the window."""
        return self.start + 2 * self.width

    def value(self, d: int) -> int:
        lat = self.lattice
        if lat.is_ring:
            return (self.bits >> lat.site_index(d)) & 1
        if (d - lat.parity) % 2:
            raise ValueError(f"doubled index {d} does not lie on {lat}")
        if d < self.start:
            return self.left
        if d >= self.end:
            return self.right
        return (self.bits >> ((d - self.start) // 2)) & 1

    __getitem__ = value

    def bitstring(self) -> str:
        return "".join(str((self.bits >> m) & 1) for m in range(self.width))

    @property
    def is_finite(self) -> bool:
        """Member of S_fin (or a ring configuration)."""
        return self.lattice.is_ring or (self.left == 0 and self.right == 0)

    def in_s_minus(self) -> bool:
        return self.lattice.is_ring or self.left == 0

    def in_s_plus(self) -> bool:
        return self.lattice.is_ring or self.right == 0

    def support(self) -> list:
        """Doubled indices of the ones; only defined for finite configurations."""
        if not self.is_finite:
            raise ValueError("configuration has infinite support")
        return [self.start + 2 * m for m in range(self.width) if (self.bits >> m) & 1]

    def __iter__(self) -> Iterator[int]:
        return iter(self.support())

    def __len__(self) -> int:
        if not self.is_finite:
            raise ValueError("configuration has infinite support")
        return _popcount(self.bits)

    def bits_on(self, start: int, width: int) -> int:
        """Values on the window of ``width`` sites beginning at doubled ``start``."""
        if self.lattice.is_ring:
            v = 0
            for m in range(width):
                v |= self.value(start + 2 * m) << m
            return v
        shift = (self.start - start) // 2
        out = 0
        lo = max(0, shift)
        hi = min(width, shift + self.width)
        if hi > lo:
            out |= ((self.bits >> (lo - shift)) & _mask(hi - lo)) << lo
        if self.left and shift > 0:
            out |= _mask(min(shift, width))
        tail = shift + self.width
        if self.right and tail < width:
            t = max(tail, 0)
            out |= _mask(width - t) << t
        return out

    def _common_window(self, other: "Config"):
        lo = min(self.start, other.start)
        hi = max(self.end, other.end)
        return lo, (hi - lo) // 2

    def xor(self, other: "Config") -> "Config":
        _check_same(self, other)
        if self.lattice.is_ring:
            return Config(self.lattice, self.start, self.width, self.bits ^ other.bits)
        lo, w = self._common_window(other)
        return Config(self.lattice, lo, w, self.bits_on(lo, w) ^ other.bits_on(lo, w),
                      self.left ^ other.left, self.right ^ other.right)

    __xor__ = xor

    def complement(self) -> "Config":
        if self.lattice.is_ring:
            return Config(self.lattice, self.start, self.width, self.bits ^ _mask(self.width))
        return Config(self.lattice, self.start, self.width, self.bits ^ _mask(self.width),
                      1 - self.left, 1 - self.right)

    def shift(self, k: int) -> "Config":
        """Translate by ``k`` sites (``k`` integer)."""
        if self.lattice.is_ring:
            n = self.lattice.ring
            k %= n
            b = ((self.bits << k) | (self.bits >> (n - k))) & _mask(n)
            return Config(self.lattice, self.start, n, b)
        return Config(self.lattice, self.start + 2 * k, self.width, self.bits, self.left, self.right)

    def __repr__(self):
        if self.lattice.is_ring:
            return f"Config({self.lattice}, {self.bitstring()})"
        return (f"Config({self.lattice}, ...{self.left}[{self.bitstring()}]{self.right}... "
                f"@ {to_site(self.start)})")


def _check_same(x: Config, y: Config):
    if x.lattice != y.lattice:
        raise ValueError(f"lattice mismatch: {x.lattice} vs {y.lattice}")


def parity_norm(x: Config) -> int:
    """``||x|| = |x| mod 2`` for finite or ring configurations."""
    if not x.is_finite:
        raise ValueError("parity norm needs a finite configuration")
    return _popcount(x.bits) & 1


def pointwise_product(x: Config, y: Config) -> Config:
    _check_same(x, y)
    if x.lattice.is_ring:
        return Config(x.lattice, x.start, x.width, x.bits & y.bits)
    lo, w = x._common_window(y)
    return Config(x.lattice, lo, w, x.bits_on(lo, w) & y.bits_on(lo, w),
                  x.left & y.left, x.right & y.right)


def grad(x: Config) -> Config:
    """Interface operator: ``(grad x)(i) = x(i - 1/2) xor x(i + 1/2)``."""
    lat = x.lattice
    out_lat = lat.dual
    if lat.is_ring:
        n = lat.ring
        b = x.bits
        rot = ((b >> 1) | ((b & 1) << (n - 1))) if lat.parity == 0 else \
            (((b << 1) & _mask(n)) | (b >> (n - 1)))
        return Config(out_lat, out_lat.parity, n, b ^ rot)
    w = x.width
    ext = x.left | (x.bits << 1) | (x.right << (w + 1))
    g = (ext ^ (ext >> 1)) & _mask(w + 1)
    return Config(out_lat, x.start - 1, w + 1, g)


def grad_inv(y: Config, side: str = "-") -> Config:
    """One-sided inverse of :func:`grad` realised as a prefix/suffix parity scan.

    ``side='-'``: ``x(i) = xor of y(j) for j < i``; ``side='+'``: over ``j > i``.
    A configuration with infinitely many ones on the scanned side has an
    alternating preimage, which has no constant tail; such inputs are rejected
    along with inputs outside S_- / S_+.
    """
    if side not in ("-", "+"):
        raise ValueError("side must be '-' or '+'")
    lat = y.lattice
    out_lat = lat.dual
    if lat.is_ring:
        if parity_norm(y):
            raise ValueError("odd ring configurations are not gradients")
        n = lat.ring
        # prefix parity from the first ring site; both sides agree on even inputs
        bits = 0
        acc = 0
        for k in range(n):
            if lat.parity == 1:
                bits |= acc << k
                acc ^= (y.bits >> k) & 1
            else:
                acc ^= (y.bits >> k) & 1
                bits |= acc << k
        return Config(out_lat, out_lat.parity, n, bits)
    if side == "-" and y.left:
        raise ValueError("grad_inv(-) requires y in S_-")
    if side == "+" and y.right:
        raise ValueError("grad_inv(+) requires y in S_+")
    if y.left or y.right:
        raise ValueError("preimage of a configuration with infinitely many ones has no constant tail")
    w = y.width
    # x on doubled start+1 .. start+2w-1, w-1 interior sites
    acc = 0
    bits = 0
    for m in range(w):
        acc ^= (y.bits >> m) & 1
        bits |= acc << m
    total = acc
    if side == "-":
        return Config(out_lat, y.start + 1, max(w - 1, 0), bits & _mask(max(w - 1, 0)), 0, total)
    suffix = (bits ^ (_mask(w) if total else 0)) & _mask(max(w - 1, 0))
    return Config(out_lat, y.start + 1, max(w - 1, 0), suffix, total, 0)


def pairing_admissible(x: Config, y: Config) -> bool:
    """Whether ``||xy||`` is defined: one of the four pairing conditions holds."""
    if x.lattice.is_ring or y.lattice.is_ring:
        return x.lattice.ring == y.lattice.ring and x.lattice.is_ring
    return ((x.left == 0 and y.right == 0) or (x.right == 0 and y.left == 0)
            or x.is_finite or y.is_finite)


def pairing(x: Config, y: Config) -> int:
    """``||xy||`` for an admissible pair on lattices of the same parity."""
    if not pairing_admissible(x, y):
        raise ValueError("pair is not admissible: product has infinite support")
    return parity_norm(pointwise_product(x, y))
