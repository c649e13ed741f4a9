"""
Rate tables for cancellative systems and flip-rate models.

A :class:`RateTable` lists anchored operator shapes with their rates; the
full dynamics is the translation-invariant family ``x -> x xor T_k(A) x`` at
rate ``r(A)`` for every shift ``k``. Dual and interface tables are derived
mechanically from a type-symmetric table.

The Neuhauser-Pacala and affine voter models are only available as
:class:`FlipRateModel`; the rebellious voter model has both forms.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Iterable, NamedTuple, Optional

from .gf2core import Config, HALF, Lattice, Z
from .opalgebra import (LocalOp, adjoint, anchor, is_parity_preserving, is_type_symmetric,
                        psi, psi_inv, reflect, shift_doubled)


@dataclass(frozen=True)
class RateTable:
    """Anchored shapes with strictly positive rates on Z (parity 0) or Z+1/2 (parity 1).

    Build instances with :meth:`build`, which anchors shapes, drops zero
    rates, checks the finite-range condition and sorts the entries.
    """

    entries: tuple
    R: int
    parity: int = 0

    @classmethod
    def build(cls, entries: Iterable, R: Optional[int] = None, parity: Optional[int] = None,
              ) -> "RateTable":
        seen = {}
        par = parity
        for shape, rate in entries:
            if not isinstance(shape, LocalOp):
                shape = LocalOp.from_literal(shape)
            if rate < 0:
                raise ValueError(f"negative rate {rate} for {shape}")
            if rate == 0 or not shape:
                continue
            if shape.row_parity != shape.col_parity:
                raise ValueError(f"{shape} does not map a lattice to itself")
            if par is None:
                par = shape.row_parity
            elif shape.row_parity != par:
                raise ValueError(f"{shape} does not live on the table's lattice")
            key = anchor(shape)
            if key in seen:
                raise ValueError(f"shape {key} listed twice")
            seen[key] = rate
        par = 0 if par is None else par
        span = max((s.span for s in seen), default=0)
        if R is None:
            R = span
        elif span > R:
            raise ValueError(f"a shape has range {span} > R = {R}")
        ents = tuple(sorted(seen.items(), key=lambda kv: kv[0].entries))
        return cls(ents, int(R), par)

    @property
    def lattice(self) -> Lattice:
        return Lattice(self.parity)

    @property
    def shapes(self) -> list:
        return [s for s, _ in self.entries]

    @property
    def is_ts(self) -> bool:
        return all(is_type_symmetric(s) for s, _ in self.entries)

    @property
    def is_pp(self) -> bool:
        return all(is_parity_preserving(s) for s, _ in self.entries)

    def rate(self, shape: LocalOp):
        key = anchor(shape)
        for s, r in self.entries:
            if s == key:
                return r
        return 0

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_spec(self) -> dict:
        return {"kind": "table", "lattice": "Z" if self.parity == 0 else "Z+1/2", "R": self.R,
                "entries": [{"shape": s.to_literal(), "rate": _jsonable(r)}
                            for s, r in self.entries]}


def _jsonable(r):
    return float(r) if isinstance(r, Fraction) else r


def _check_alpha(alpha):
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")


def _half(v):
    return v / 2 if not isinstance(v, int) else Fraction(v, 2)


def rebellious_table(alpha) -> RateTable:
    """Cancellative form of the rebellious voter model on Z.

    Each shape flips site 0 exactly when one disagreement indicator in the
    flip rate is 1: ``{(0,-1),(0,0)}`` reads ``x(-1) xor x(0)`` and so on.
    """
    _check_alpha(alpha)
    a2 = _half(alpha)
    b2 = _half(1 - alpha)
    return RateTable.build([
        (LocalOp.from_sites([(0, -1), (0, 0)]), a2),
        (LocalOp.from_sites([(0, 0), (0, 1)]), a2),
        (LocalOp.from_sites([(0, -2), (0, -1)]), b2),
        (LocalOp.from_sites([(0, 1), (0, 2)]), b2),
    ], R=2, parity=0)


def voter_table(rate=Fraction(1, 2)) -> RateTable:
    """Nearest-neighbour voter model: copy each neighbour at ``rate``."""
    return RateTable.build([
        (LocalOp.from_sites([(0, -1), (0, 0)]), rate),
        (LocalOp.from_sites([(0, 0), (0, 1)]), rate),
    ], R=1, parity=0)


def disagreement_table(rate=1) -> RateTable:
    """Pure disagreement dynamics: site 0 flips when ``x(-1) != x(1)``."""
    return RateTable.build([(LocalOp.from_sites([(0, -1), (0, 1)]), rate)], R=1, parity=0)


def dual_table(rt: RateTable) -> RateTable:
    """``r_{Y'}(A) = r_X(A^dagger)``: every shape replaced by its adjoint."""
    return RateTable.build([(adjoint(s), r) for s, r in rt.entries], R=rt.R, parity=rt.parity)


def interface_table(rt: RateTable) -> RateTable:
    """``r_Y(A) = r_X(Psi^{-1}(A))``: the interface model on the shifted lattice."""
    if not rt.is_ts:
        raise ValueError("interface table needs a type-symmetric table")
    return RateTable.build([(psi(s), r) for s, r in rt.entries], R=rt.R, parity=1 - rt.parity)


def type_symmetric_from_interface(rt: RateTable) -> RateTable:
    """Inverse of :func:`interface_table` for a parity-preserving table."""
    if not rt.is_pp:
        raise ValueError("needs a parity-preserving table")
    return RateTable.build([(psi_inv(s), r) for s, r in rt.entries], R=rt.R,
                           parity=1 - rt.parity)


def reflect_table(rt: RateTable) -> RateTable:
    return RateTable.build([(reflect(s), r) for s, r in rt.entries], R=rt.R, parity=rt.parity)


def half_shift_table(rt: RateTable) -> RateTable:
    """Move a table to the other lattice by translating every shape by +1/2."""
    return RateTable.build([(shift_doubled(s, 1), r) for s, r in rt.entries], R=rt.R,
                           parity=1 - rt.parity)


def same_up_to_reflection(a: RateTable, b: RateTable) -> bool:
    """Whether ``b`` equals the spatial reflection of ``a`` (after aligning lattices)."""
    ra = reflect_table(a)
    if ra.parity != b.parity:
        ra = half_shift_table(ra)
    return ra.entries == b.entries


class Diagram(NamedTuple):
    X: RateTable
    Y: RateTable
    Xp: RateTable
    Yp: RateTable


def diagram_closure(rt: RateTable) -> Diagram:
    """Complete the square X -> Y (interface), X <-> Y' (dual), Y <-> X' (dual).

    Raises ``AssertionError`` if the interface table of X' is not Y'.
    """
    if not rt.is_ts:
        raise ValueError("diagram closure needs a type-symmetric table")
    Y = interface_table(rt)
    Yp = dual_table(rt)
    Xp = dual_table(Y)
    closed = interface_table(Xp)
    if closed.entries != Yp.entries:
        raise AssertionError("interface of the dual of the interface differs from the dual")
    return Diagram(rt, Y, Xp, Yp)


_LEFT_VOTER = LocalOp.from_sites([(0, -1), (0, 0)])
_RIGHT_VOTER = LocalOp.from_sites([(0, 0), (0, 1)])


def has_nn_voter_component(rt: RateTable) -> bool:
    """Positive rate on the left- or right-voter shape (up to translation)."""
    shapes = set(rt.shapes)
    if rt.parity == 1:
        shapes = {anchor(shift_doubled(s, -1)) for s in shapes}
    return _LEFT_VOTER in shapes or _RIGHT_VOTER in shapes


# -- flip-rate models --------------------------------------------------------

KINDS = ("np", "affine", "rebellious")


@dataclass(frozen=True)
class FlipRateModel:
    """Neutral Neuhauser-Pacala, affine voter or rebellious voter flip rates on Z."""

    kind: str
    alpha: Real
    R: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        _check_alpha(self.alpha)
        if self.kind == "rebellious":
            object.__setattr__(self, "R", 2)
        elif self.R < 1:
            raise ValueError("R must be positive")

    @property
    def radius(self) -> int:
        return self.R

    def rate_from_window(self, w) -> Real:
        """Flip rate of the centre of ``w = (x(i-R), ..., x(i+R))``."""
        R = self.R
        c = w[R]
        a = self.alpha
        if self.kind == "rebellious":
            half = Fraction(1, 2) if isinstance(a, (int, Fraction)) else 0.5
            return (half * a * ((w[1] != w[2]) + (w[2] != w[3]))
                    + half * (1 - a) * ((w[0] != w[1]) + (w[3] != w[4])))
        # count of the opposite type among the 2R neighbours
        k = sum(1 for j, v in enumerate(w) if j != R and v != c)
        f_other = Fraction(k, 2 * R)
        f_same = 1 - f_other
        if self.kind == "np":
            return f_other * (f_same + a * f_other)
        return a * f_other + (1 - a) * (1 if k > 0 else 0)


def local_frequency(x: Config, i: int, tau: int, R: int) -> Fraction:
    """``f_tau(x, i)``: fraction of the 2R neighbours of integer site ``i`` of type ``tau``."""
    if x.lattice.parity != 0:
        raise ValueError("flip-rate models live on Z")
    k = sum(1 for j in range(i - R, i + R + 1) if j != i and x.value(2 * j) == tau)
    return Fraction(k, 2 * R)


def flip_rate(model: FlipRateModel, x: Config, i: int) -> Real:
    """Rate at which integer site ``i`` changes type in configuration ``x``."""
    if x.lattice.parity != 0:
        raise ValueError("flip-rate models live on Z")
    R = model.R
    return model.rate_from_window(tuple(x.value(2 * j) for j in range(i - R, i + R + 1)))


# -- JSON model specs ---------------------------------------------------------

def _lattice_parity(name) -> int:
    return {"Z": 0, "Z+1/2": 1, "half": 1}[name]


def _num(v):
    if isinstance(v, str):
        return Fraction(v)
    return v


def model_from_spec(spec: dict):
    """Build a :class:`RateTable` or :class:`FlipRateModel` from its JSON form.

    ``{"kind": "rebellious", "alpha": 0.6}`` gives the cancellative table;
    add ``"form": "flip"`` for the flip-rate version. ``np``/``affine`` take
    ``alpha`` and ``R``. ``{"kind": "table", ...}`` is a user table.
    """
    kind = spec.get("kind")
    if kind == "rebellious":
        if "alpha" not in spec:
            raise ValueError("rebellious model needs alpha")
        alpha = _num(spec["alpha"])
        if spec.get("form", "table") == "flip":
            return FlipRateModel("rebellious", alpha)
        return rebellious_table(alpha)
    if kind == "voter":
        return voter_table()
    if kind == "disagreement":
        return disagreement_table()
    if kind in ("np", "affine"):
        if "alpha" not in spec:
            raise ValueError(f"{kind} model needs alpha")
        return FlipRateModel(kind, _num(spec["alpha"]), int(spec.get("R", 2)))
    if kind == "table":
        par = _lattice_parity(spec.get("lattice", "Z"))
        ents = [(LocalOp.from_literal(e["shape"]), _num(e["rate"])) for e in spec["entries"]]
        R = spec.get("R")
        return RateTable.build(ents, R=None if R is None else int(R), parity=par)
    raise ValueError(f"unknown model kind {kind!r}")


__all__ = [
    "RateTable", "FlipRateModel", "Diagram", "rebellious_table", "voter_table",
    "disagreement_table", "dual_table", "interface_table", "type_symmetric_from_interface",
    "reflect_table", "half_shift_table", "same_up_to_reflection", "diagram_closure",
    "has_nn_voter_component", "local_frequency", "flip_rate", "model_from_spec",
    "Z", "HALF",
]
