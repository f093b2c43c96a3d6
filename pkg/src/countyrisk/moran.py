"""Global Moran's I with a seeded permutation test."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InputError
from .graph import WeightMatrix
from .rng import MORAN, stream

# permutations are drawn in fixed-size blocks, one random stream per block,
# so the result does not depend on how blocks are spread over workers
PERM_BLOCK = 128


@dataclass(frozen=True, eq=False)
class MoranResult:
    i_statistic: float
    expected_i: float
    lagged_values: np.ndarray
    p_value: float | None = None
    n_permutations: int = 0
    permuted: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {"I": self.i_statistic, "expected": self.expected_i, "p": self.p_value, "n_perm": self.n_permutations}


def _check(values, w: WeightMatrix) -> np.ndarray:
    y = np.asarray(values, dtype=float)
    if y.ndim != 1:
        raise InputError("values must be one-dimensional")
    n = y.size
    if n < 3:
        raise InputError("Moran's I needs at least 3 units")
    if w.values.shape != (n, n):
        raise InputError(f"weight matrix is {w.values.shape}, values have length {n}")
    if not np.all(np.isfinite(y)):
        raise InputError("values must be finite")
    if np.ptp(y) == 0:
        raise DegenerateInputError("pattern is undefined for constant field")
    return y


def morans_i(values, w: WeightMatrix) -> MoranResult:
    y = _check(values, w)
    n = y.size
    W = w.sparse()
    z = y - y.mean()
    stat = n / w.s0 * float(z @ (W @ z)) / float(z @ z)
    return MoranResult(stat, -1.0 / (n - 1), np.asarray(W @ y))


def _perm_block(W, z, zz, n, s0, seed, block, count):
    rng = stream(seed, MORAN, block)
    Z = np.stack([rng.permutation(z) for _ in range(count)], axis=1)
    num = np.einsum("ij,ij->j", Z, W @ Z)
    return n / s0 * num / zz


def moran_mc(values, w: WeightMatrix, n_permutations: int = 999, seed: int = 0, workers: int = 1) -> MoranResult:
    """Moran's I with a one-sided (greater) permutation p-value."""
    if n_permutations < 99:
        raise InputError("n_permutations must be >= 99")
    base = morans_i(values, w)
    y = np.asarray(values, dtype=float)
    n = y.size
    z = y - y.mean()
    zz = float(z @ z)
    W = w.sparse()
    blocks = [(b, min(PERM_BLOCK, n_permutations - b * PERM_BLOCK))
              for b in range(-(-n_permutations // PERM_BLOCK))]
    job = lambda bc: _perm_block(W, z, zz, n, w.s0, seed, bc[0], bc[1])  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(job, blocks))
    else:
        parts = [job(bc) for bc in blocks]
    perm = np.concatenate(parts)
    # ties with the observed value count as hits despite rounding differences
    hits = int(np.sum(perm >= base.i_statistic - 1e-12 * max(1.0, abs(base.i_statistic))))
    p = (1 + hits) / (n_permutations + 1)
    return MoranResult(base.i_statistic, base.expected_i, base.lagged_values, p, n_permutations, perm)

