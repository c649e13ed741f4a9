"""
Local GF(2) operators, their adjoints and translates, and the bijection
between type-symmetric operators and parity-preserving operators on the
shifted lattice.

An operator is a finite set of ``(row, col)`` pairs in doubled coordinates;
``A x (i) = xor_j A(i, j) x(j)``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .gf2core import (Config, Lattice, grad, pairing_admissible, parity_norm,
                      pointwise_product, to_doubled)


@dataclass(frozen=True)
class LocalOp:
    """Finite operator, stored as a sorted tuple of doubled ``(row, col)`` pairs.

    Row and column parities are inferred from the entries; for the empty
    operator they default to 0 unless given.
    """

    entries: tuple = ()
    row_parity: Optional[int] = field(default=None, compare=True)
    col_parity: Optional[int] = field(default=None, compare=True)

    def __post_init__(self):
        ents = tuple(sorted({(int(r), int(c)) for r, c in self.entries}))
        rp = {r % 2 for r, _ in ents}
        cp = {c % 2 for _, c in ents}
        if len(rp) > 1 or len(cp) > 1:
            raise ValueError("rows (or columns) mix the two lattices")
        row_parity = rp.pop() if rp else (self.row_parity or 0)
        col_parity = cp.pop() if cp else (self.col_parity if self.col_parity is not None
                                          else row_parity)
        if self.row_parity is not None and self.row_parity != row_parity:
            raise ValueError("declared row parity disagrees with entries")
        if self.col_parity is not None and self.col_parity != col_parity:
            raise ValueError("declared column parity disagrees with entries")
        object.__setattr__(self, "entries", ents)
        object.__setattr__(self, "row_parity", row_parity)
        object.__setattr__(self, "col_parity", col_parity)
        rows = defaultdict(list)
        for r, c in ents:
            rows[r].append(c)
        object.__setattr__(self, "_rows", tuple((r, tuple(cs)) for r, cs in rows.items()))

    @classmethod
    def from_sites(cls, pairs: Iterable, row_parity=None, col_parity=None) -> "LocalOp":
        return cls(tuple((to_doubled(i), to_doubled(j)) for i, j in pairs), row_parity, col_parity)

    @classmethod
    def from_literal(cls, pairs) -> "LocalOp":
        """``[[row, col], ...]`` in doubled coordinates."""
        return cls(tuple((int(r), int(c)) for r, c in pairs))

    def to_literal(self) -> list:
        return [[r, c] for r, c in self.entries]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __bool__(self):
        return bool(self.entries)

    def rows(self) -> dict:
        return {r: list(cs) for r, cs in self._rows}

    def cols(self) -> dict:
        out = defaultdict(list)
        for r, c in self.entries:
            out[c].append(r)
        return dict(out)

    @property
    def span(self) -> int:
        """Largest ``|i - j|`` over entries, in sites (rounded up)."""
        return max(((abs(r - c) + 1) // 2 for r, c in self.entries), default=0)

    @property
    def extent(self) -> int:
        """Distance in sites between the smallest and largest index used."""
        idx = [v for e in self.entries for v in e]
        return (max(idx) - min(idx) + 1) // 2 if idx else 0

    def __repr__(self):
        def s(d):
            return str(d // 2) if d % 2 == 0 else f"{d}/2"
        body = ", ".join(f"({s(r)},{s(c)})" for r, c in self.entries)
        return f"LocalOp{{{body}}}"


def apply(A: LocalOp, x: Config) -> Config:
    """``(A x)(i) = xor_j A(i,j) x(j)``; on a ring indices are reduced mod ``n``."""
    lat = x.lattice
    if A.entries and A.col_parity != lat.parity:
        raise ValueError(f"operator columns live on parity {A.col_parity}, config on {lat}")
    out_lat = Lattice(A.row_parity, lat.ring)
    if lat.is_ring and A.entries and lat.ring <= 2 * A.extent:
        raise ValueError("ring too small for this operator: it would wrap onto itself")
    ones = []
    if lat.is_ring:
        value = x.value
    else:
        start, end, bits, left, right = x.start, x.end, x.bits, x.left, x.right

        def value(d):
            if d < start:
                return left
            if d >= end:
                return right
            return (bits >> ((d - start) >> 1)) & 1
    for r, cs in A._rows:
        v = 0
        for c in cs:
            v ^= value(c)
        if v:
            ones.append(r)
    return Config.from_doubled(ones, out_lat)


def adjoint(A: LocalOp) -> LocalOp:
    return LocalOp(tuple((c, r) for r, c in A.entries), A.col_parity, A.row_parity)


def translate(A: LocalOp, k: int) -> LocalOp:
    """``T_k(A)``: shift rows and columns by ``k`` sites."""
    d = 2 * k
    return LocalOp(tuple((r + d, c + d) for r, c in A.entries), A.row_parity, A.col_parity)


def shift_doubled(A: LocalOp, d: int) -> LocalOp:
    """Shift by ``d`` in doubled units; odd ``d`` moves the operator to the other lattice."""
    return LocalOp(tuple((r + d, c + d) for r, c in A.entries),
                   (A.row_parity + d) % 2, (A.col_parity + d) % 2)


def reflect(A: LocalOp) -> LocalOp:
    """Spatial reflection ``(i, j) -> (-i, -j)``."""
    return LocalOp(tuple((-r, -c) for r, c in A.entries), A.row_parity, A.col_parity)


def anchor(A: LocalOp) -> LocalOp:
    """Canonical translate: the smallest row sits at site 0 (doubled 0 or 1)."""
    if not A.entries:
        return A
    lo = A.entries[0][0]
    return translate(A, -((lo - A.row_parity) // 2))


def is_type_symmetric(A: LocalOp) -> bool:
    return all(len(cs) % 2 == 0 for cs in A.rows().values())


def is_parity_preserving(A: LocalOp) -> bool:
    return all(len(rs) % 2 == 0 for rs in A.cols().values())


def _between_odd_pairs(sorted_idx):
    """Doubled indices l of opposite parity with an odd number of entries above l."""
    out = []
    for a, b in zip(sorted_idx[0::2], sorted_idx[1::2]):
        out.extend(range(a + 1, b, 2))
    return out


def psi(A: LocalOp) -> LocalOp:
    """Interface image of a type-symmetric operator, ``grad A grad_inv``.

    Row ``r`` of ``grad A`` is the symmetric difference of rows ``r -/+ 1/2``
    of ``A``; it has even size, and ``Psi(A)(r, l) = 1`` iff an odd number of
    its columns lie above ``l``.
    """
    if not is_type_symmetric(A):
        raise ValueError("psi needs a type-symmetric operator")
    if A.row_parity != A.col_parity:
        raise ValueError("psi needs an operator from a lattice to itself")
    rows = A.rows()
    grad_rows = defaultdict(set)
    for r, cs in rows.items():
        for rr in (r - 1, r + 1):
            grad_rows[rr] ^= set(cs)
    out = []
    for rr, cs in grad_rows.items():
        for l in _between_odd_pairs(sorted(cs)):
            out.append((rr, l))
    p = 1 - A.row_parity
    return LocalOp(tuple(out), p, p)


def psi_inv(A: LocalOp) -> LocalOp:
    """Inverse of :func:`psi` on parity-preserving operators, ``grad_inv A grad``.

    Column ``c`` of ``A grad`` is the symmetric difference of columns
    ``c -/+ 1/2`` of ``A``; ``Psi^{-1}(A)(l, c) = 1`` iff an odd number of its
    rows lie below ``l``.
    """
    if not is_parity_preserving(A):
        raise ValueError("psi_inv needs a parity-preserving operator")
    if A.row_parity != A.col_parity:
        raise ValueError("psi_inv needs an operator from a lattice to itself")
    cols = A.cols()
    grad_cols = defaultdict(set)
    for c, rs in cols.items():
        for cc in (c - 1, c + 1):
            grad_cols[cc] ^= set(rs)
    out = []
    for cc, rs in grad_cols.items():
        for l in _between_odd_pairs(sorted(rs)):
            out.append((l, cc))
    p = 1 - A.row_parity
    return LocalOp(tuple(out), p, p)


def duality_H(x: Config, xp: Config) -> int:
    """``H(x, x') = ||(grad x) x'|| = ||x (grad x')||`` for an admissible pair.

    Both expressions are evaluated; disagreement raises ``AssertionError``.
    """
    if x.lattice.dual != xp.lattice:
        raise ValueError("x and x' must live on lattices of opposite parity")
    if not pairing_admissible(x, xp):
        raise ValueError("(x, x') is not an admissible pair")
    gx = grad(x)
    gxp = grad(xp)
    a = parity_norm(pointwise_product(gx, xp))
    b = parity_norm(pointwise_product(x, gxp))
    if a != b:
        raise AssertionError(f"duality function formulas disagree on {x!r}, {xp!r}")
    return a

