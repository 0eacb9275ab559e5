"""Seeded simulation of urn paths.

The hot loop is compiled with numba; one call simulates a block of
replicates, each driven by its own counter-based stream (see
:mod:`polyaurn.rng`). Blocks are independent, so a batch can be split over
worker threads without changing a single bit of the output.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .rng import StreamKey, nb_uniform, replicate_keys
from .urn_core import SpecError, UrnSpec, check_balanced, intensity_matrix, validate_spec

__all__ = [
    "TenabilityError",
    "Trajectory",
    "Batch",
    "checkpoint_grid",
    "step",
    "run_path",
    "run_batch",
    "martingale_residual",
    "conditional_mean_check",
]

NEG_TOL = 1e-9

# failure codes in the compiled kernel
_OK, _NEGATIVE, _ZERO_ACTIVITY = 0, 1, 2
_FAIL_MSG = {_NEGATIVE: "negative count", _ZERO_ACTIVITY: "zero total activity"}


class TenabilityError(RuntimeError):
    """The urn reached a state with a negative count or no activity."""


def checkpoint_grid(n_max: int, ratio: float = 2.0, start: int = 1) -> np.ndarray:
    """Geometric grid ``start, start*ratio, ...`` (rounded, deduplicated) plus ``n_max``."""
    if ratio <= 1:
        raise ValueError("checkpoint ratio must exceed 1")
    pts = set()
    x = float(start)
    while x <= n_max:
        pts.add(int(round(x)))
        x *= ratio
    if n_max >= 1:
        pts.add(int(n_max))
    return np.array(sorted(p for p in pts if 1 <= p <= n_max), dtype=np.int64)


def _atom_tables(spec: UrnSpec):
    q = spec.q
    m = max(len(d.atoms) for d in spec.replacements)
    vec = np.zeros((q, m, q))
    cum = np.ones((q, m))
    n_atoms = np.zeros(q, dtype=np.int64)
    for i, dist in enumerate(spec.replacements):
        k = len(dist.atoms)
        n_atoms[i] = k
        vec[i, :k] = dist.vectors
        cum[i, :k] = np.cumsum(dist.probabilities)
    return vec, cum, n_atoms


@numba.njit(cache=True, nogil=True)
def _simulate_block(x0, a, atom_vec, atom_cum, n_atoms, keys, n_max, ckpts,
                    store_path, store_drawn, neg_tol):
    R = keys.shape[0]
    q = x0.shape[0]
    K = ckpts.shape[0]
    states = np.full((R, K, q), np.nan)
    status = np.zeros(R, dtype=np.int64)
    failed_at = np.full(R, -1, dtype=np.int64)
    paths = np.full((R if store_path else 0, n_max + 1, q), np.nan)
    drawn = np.full((R if store_drawn else 0, n_max), -1, dtype=np.int64)
    x = np.empty(q)
    for r in range(R):
        key = keys[r]
        for i in range(q):
            x[i] = x0[i]
        if store_path:
            for i in range(q):
                paths[r, 0, i] = x[i]
        kc = 0
        for n in range(n_max):
            w = 0.0
            for i in range(q):
                w += a[i] * x[i]
            if not w > 0.0:
                status[r] = 2
                failed_at[r] = n
                break
            u = nb_uniform(key, n, 0) * w
            c = -1
            cum = 0.0
            for i in range(q):
                wi = a[i] * x[i]
                if wi > 0.0:
                    cum += wi
                    c = i
                    if u < cum:
                        break
            u2 = nb_uniform(key, n, 1)
            k = 0
            while k < n_atoms[c] - 1 and u2 >= atom_cum[c, k]:
                k += 1
            bad = False
            for i in range(q):
                x[i] += atom_vec[c, k, i]
                if x[i] < 0.0:
                    if x[i] < -neg_tol:
                        bad = True
                    else:
                        x[i] = 0.0
            if store_drawn:
                drawn[r, n] = c
            if bad:
                status[r] = 1
                failed_at[r] = n + 1
                break
            if store_path:
                for i in range(q):
                    paths[r, n + 1, i] = x[i]
            while kc < K and ckpts[kc] == n + 1:
                for i in range(q):
                    states[r, kc, i] = x[i]
                kc += 1
    return states, status, failed_at, paths, drawn


@dataclass
class Trajectory:
    """One simulated path.

    ``path`` holds every state ``X_0..X_n`` and is only kept when
    increments were requested; ``increments[l-1]`` is ``Y_l``.
    """

    checkpoints: list
    drawn: np.ndarray | None = None
    increments: np.ndarray | None = None
    path: np.ndarray | None = None
    tenability_ok: bool = True
    failed_at: int | None = None
    failure: str | None = None
    key: StreamKey | None = None

    @property
    def n_max(self) -> int:
        return self.checkpoints[-1][0] if self.checkpoints else 0

    @property
    def final(self) -> np.ndarray:
        return self.checkpoints[-1][1]


@dataclass
class Batch:
    """Checkpointed states of ``R`` replicates, indexed by replicate number."""

    spec: UrnSpec
    master_seed: int
    n_max: int
    grid: np.ndarray
    states: np.ndarray  # (R, K, q), NaN after a tenability failure
    status: np.ndarray
    failed_at: np.ndarray
    paths: np.ndarray | None = None
    drawn: np.ndarray | None = None
    indices: np.ndarray = field(default=None)

    def __len__(self):
        return self.states.shape[0]

    @property
    def ok(self) -> np.ndarray:
        return self.status == _OK

    def increments(self) -> np.ndarray:
        if self.paths is None:
            raise ValueError("increments were not recorded")
        return _increments(self.spec, self.paths)

    def trajectory(self, r: int) -> Trajectory:
        cps = [(int(n), self.states[r, k].copy()) for k, n in enumerate(self.grid)]
        fa = int(self.failed_at[r])
        if fa >= 0:
            cps = [(n, x) for n, x in cps if n < fa]
        drawn = None if self.drawn is None else self.drawn[r].copy()
        path = inc = None
        if self.paths is not None:
            path = self.paths[r]
            if fa < 0:
                inc = _increments(self.spec, path[None])[0]
        return Trajectory(
            checkpoints=cps,
            drawn=drawn,
            increments=inc,
            path=path,
            tenability_ok=fa < 0,
            failed_at=fa if fa >= 0 else None,
            failure=_FAIL_MSG.get(int(self.status[r])),
            key=StreamKey(self.master_seed, int(self.indices[r])),
        )

    def __iter__(self):
        return (self.trajectory(r) for r in range(len(self)))


def _increments(spec: UrnSpec, paths: np.ndarray) -> np.ndarray:
    """``Y_n = dX_{n-1} - A X_{n-1} / w_{n-1}`` for every path, shape (R, n, q)."""
    A = intensity_matrix(spec)
    cert = check_balanced(spec)
    prev = paths[:, :-1, :]
    if cert.balanced:
        w = spec.w0 + cert.b * np.arange(paths.shape[1] - 1)
        w = w[None, :]
    else:
        w = prev @ spec.a
    drift = np.zeros_like(prev)
    # explicit column loop keeps results independent of the batch shape
    for j in range(spec.q):
        drift += prev[:, :, j, None] * A[:, j]
    return np.diff(paths, axis=1) - drift / w[:, :, None]


def _check_runnable(spec: UrnSpec, allow_unbalanced: bool):
    validate_spec(spec)
    if not allow_unbalanced and not check_balanced(spec).balanced:
        raise SpecError("urn is not balanced; pass allow_unbalanced=True to simulate it anyway")


def step(x, spec: UrnSpec, rng):
    """Perform one draw from state ``x``.

    ``rng`` needs a ``random()`` method (a numpy ``Generator`` or a
    :class:`~polyaurn.rng.CounterStream`). The first uniform selects the
    colour, the second the replacement atom, exactly as in the compiled
    simulator.

    Returns
    -------
    new_state, colour, replacement
    """
    x = np.asarray(x, dtype=float)
    a = spec.a
    weights = a * x
    w = 0.0
    for v in weights:
        w += v
    if not w > 0:
        raise TenabilityError("zero total activity: no ball can be drawn")
    u = rng.random() * w
    cum = 0.0
    colour = -1
    for i, wi in enumerate(weights):
        if wi > 0:
            cum += wi
            colour = i
            if u < cum:
                break
    dist = spec.replacements[colour]
    u2 = rng.random()
    cum_p = np.cumsum(dist.probabilities)
    k = 0
    while k < len(dist.atoms) - 1 and u2 >= cum_p[k]:
        k += 1
    xi = np.array(dist.atoms[k][1])
    return x + xi, colour, xi


def _run_block(spec, n_max, keys, grid, store_path, store_drawn):
    vec, cum, n_atoms = _atom_tables(spec)
    return _simulate_block(spec.x0, spec.a, vec, cum, n_atoms, keys, int(n_max), grid,
                           bool(store_path), bool(store_drawn), NEG_TOL)


def run_batch(spec: UrnSpec, n_max: int, replicates: int, master_seed: int, *,
              record_increments: bool = False, record_drawn: bool = False,
              checkpoint_ratio: float = 2.0, grid=None, workers: int = 1,
              allow_unbalanced: bool = False, first_index: int = 0) -> Batch:
    """Simulate ``replicates`` independent paths of length ``n_max``.

    Replicate ``r`` uses ``StreamKey(master_seed, first_index + r)``. The
    output does not depend on ``workers``.
    """
    if replicates < 1:
        raise ValueError("need at least one replicate")
    _check_runnable(spec, allow_unbalanced)
    grid = checkpoint_grid(n_max, checkpoint_ratio) if grid is None else np.asarray(grid, dtype=np.int64)
    indices = np.arange(first_index, first_index + replicates)
    keys = replicate_keys(master_seed, indices)
    record_path = bool(record_increments)
    workers = max(1, min(int(workers), replicates))
    if workers == 1:
        parts = [_run_block(spec, n_max, keys, grid, record_path, record_drawn)]
    else:
        chunks = np.array_split(keys, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda k: _run_block(spec, n_max, k, grid, record_path, record_drawn), chunks))
    states, status, failed_at, paths, drawn = (np.concatenate(p) for p in zip(*parts))
    return Batch(
        spec=spec,
        master_seed=master_seed,
        n_max=int(n_max),
        grid=grid,
        states=states,
        status=status,
        failed_at=failed_at,
        paths=paths if record_path else None,
        drawn=drawn if record_drawn else None,
        indices=indices,
    )


def run_path(spec: UrnSpec, n_max: int, key: StreamKey, *, record_increments: bool = False,
             record_drawn: bool = False, checkpoint_ratio: float = 2.0,
             allow_unbalanced: bool = False) -> Trajectory:
    """Simulate a single path; identical to replicate ``key.replicate_index`` of a batch."""
    batch = run_batch(spec, n_max, 1, key.master_seed, record_increments=record_increments,
                      record_drawn=record_drawn, checkpoint_ratio=checkpoint_ratio,
                      allow_unbalanced=allow_unbalanced, first_index=key.replicate_index)
    return batch.trajectory(0)


def martingale_residual(trajectory: Trajectory, chain) -> float:
    """Relative residual of ``X_n = F_{0,n} X_0 + sum_l F_{l,n} Y_l``.

    The identity is algebraic, so the result measures rounding only.
    """
    if trajectory.increments is None or trajectory.path is None:
        raise ValueError("trajectory was run without record_increments")
    Y = trajectory.increments
    X = trajectory.path
    n = Y.shape[0]
    q = X.shape[1]
    G = np.eye(q)  # F_{l,n}, built backwards
    acc = np.zeros(q)
    for ell in range(n, 0, -1):
        acc += G @ Y[ell - 1]
        G = G @ chain.factor(ell - 1)
    resid = X[n] - G @ X[0] - acc
    return float(np.linalg.norm(resid) / (1.0 + np.linalg.norm(X[n])))


def conditional_mean_check(spec: UrnSpec, x, sample_size: int = 10_000, rng=None,
                           exact: bool = False) -> np.ndarray:
    """Empirical one-step drift from state ``x`` minus ``A x / (a.x)``.

    With ``exact=True`` the drift is computed by enumerating colours and
    atoms instead of sampling.
    """
    x = np.asarray(x, dtype=float)
    A = intensity_matrix(spec)
    w = float(spec.a @ x)
    target = A @ x / w
    probs = spec.a * x / w
    if exact:
        mean = sum(probs[j] * spec.replacements[j].mean() for j in range(spec.q) if probs[j] > 0)
        return mean - target
    if sample_size < 1000:
        raise ValueError("sample size must be at least 1000")
    rng = np.random.default_rng() if rng is None else rng
    colours = rng.choice(spec.q, size=sample_size, p=probs)
    total = np.zeros(spec.q)
    for j in range(spec.q):
        m = int(np.sum(colours == j))
        if m == 0:
            continue
        dist = spec.replacements[j]
        picks = rng.choice(len(dist.atoms), size=m, p=dist.probabilities)
        total += dist.vectors[picks].sum(axis=0)
    return total / sample_size - target
