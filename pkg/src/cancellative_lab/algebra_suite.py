"""Randomised exact checks of the operator identities."""
from __future__ import annotations

import warnings
from typing import Callable, Optional

import numpy as np

from .gf2core import Config, Lattice, grad, grad_inv, parity_norm, pointwise_product
from .opalgebra import (LocalOp, adjoint, apply, is_parity_preserving, psi, psi_inv)


def random_ts_op(rng: np.random.Generator, parity: int, max_range: int = 5,
                 max_size: int = 12) -> LocalOp:
    """Random type-symmetric operator: every row has an even number of columns.

    Rows sit in ``[0, max_range]`` and columns in ``[0, max_range]`` (sites),
    so every entry has ``|i - j| <= max_range``.
    """
    width = max_range + 1
    while True:
        n_rows = int(rng.integers(1, min(width, max_size // 2) + 1))
        rows = rng.choice(width, size=n_rows, replace=False)
        ents = []
        budget = max_size
        for r in rows:
            top = min(budget, width) // 2
            if top < 1:
                break
            k = 2 * int(rng.integers(1, top + 1))
            cols = rng.choice(width, size=k, replace=False)
            ents.extend((2 * int(r) + parity, 2 * int(c) + parity) for c in cols)
            budget -= k
        if ents:
            return LocalOp(tuple(ents), parity, parity)


def random_op(rng: np.random.Generator, parity: int, max_range: int = 5,
              max_size: int = 12) -> LocalOp:
    k = int(rng.integers(1, max_size + 1))
    ents = {(2 * int(rng.integers(0, max_range + 1)) + parity,
             2 * int(rng.integers(0, max_range + 1)) + parity) for _ in range(k)}
    return LocalOp(tuple(ents), parity, parity)


def random_config(rng: np.random.Generator, lat: Lattice, lo: int = -4, hi: int = 10,
                  tails: bool = False) -> Config:
    bits = int(rng.integers(0, 1 << (hi - lo)))
    left = right = 0
    if tails:
        left, right = (int(v) for v in rng.integers(0, 2, size=2))
    return Config(lat, lat.doubled(lo), hi - lo, bits, left, right)


def corrupted_psi(A: LocalOp) -> LocalOp:
    """Negative control: the correct image with its first entry removed."""
    B = psi(A)
    return LocalOp(B.entries[1:], B.row_parity, B.col_parity)


def run_suite(iterations: int = 1000, configs: int = 100, seed: int = 0, max_range: int = 5,
              max_size: int = 12, psi_fn: Optional[Callable] = None) -> dict:
    """Bijection, adjoint exchange and conjugation checks on random ts operators.

    Each operator lives on Z or Z+1/2 at random; the conjugation identity
    ``grad(A x) = Psi(A) grad(x)`` is tested on ``configs`` random finite
    configurations, and the bilinear identity ``||x (B y)|| = ||(B^dagger x) y||``
    on a random general operator ``B``.
    """
    psi_fn = psi_fn or psi
    rng = np.random.default_rng(seed)
    counts = {k: {"passed": 0, "failed": 0}
              for k in ("bijection", "adjoint_exchange", "conjugation", "bilinear")}
    first_failure = None

    def record(name, ok, A):
        nonlocal first_failure
        counts[name]["passed" if ok else "failed"] += 1
        if not ok and first_failure is None:
            first_failure = {"check": name, "operator": A.to_literal()}

    for _ in range(iterations):
        parity = int(rng.integers(0, 2))
        lat = Lattice(parity)
        A = random_ts_op(rng, parity, max_range, max_size)
        P = psi_fn(A)
        record("bijection", is_parity_preserving(P) and psi_inv(P) == A, A)
        record("adjoint_exchange", adjoint(P) == psi_inv(adjoint(A)), A)
        ok = True
        for _ in range(configs):
            x = random_config(rng, lat)
            if grad(apply(A, x)) != apply(P, grad(x)):
                ok = False
                break
        record("conjugation", ok, A)
        B = random_op(rng, parity, max_range, max_size)
        Bd = adjoint(B)
        x = random_config(rng, lat)
        y = random_config(rng, lat)
        record("bilinear", parity_norm(pointwise_product(x, apply(B, y)))
               == parity_norm(pointwise_product(apply(Bd, x), y)), B)

    if iterations == 0:
        warnings.warn("algebra suite ran zero iterations: vacuous pass", stacklevel=2)
    failed = sum(c["failed"] for c in counts.values())
    return {"iterations": iterations, "configs": configs, "seed": seed,
            "checks": counts, "passed": failed == 0, "vacuous": iterations == 0,
            "first_failure": first_failure}


def grad_inv_roundtrip(y: Config) -> bool:
    """``grad(grad_inv(y)) == y`` for a finite even configuration."""
    return grad(grad_inv(y, "-")) == y
