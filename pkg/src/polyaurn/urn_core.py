"""Urn specifications, balance and tenability checks, intensity matrix.

An urn with ``q`` colours is described by activities ``a``, an initial
composition ``X0`` and, for every colour ``i``, a finite-support law of the
replacement vector added when a ball of colour ``i`` is drawn.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "SpecError",
    "ReplacementDistribution",
    "UrnSpec",
    "BalanceCertificate",
    "validate_spec",
    "check_balanced",
    "static_tenability_check",
    "intensity_matrix",
    "total_weight",
    "spec_from_dict",
    "spec_to_dict",
    "load_spec",
    "dumps_spec",
    "spec_digest",
]

PROB_TOL = 1e-12
BALANCE_RTOL = 1e-12


class SpecError(ValueError):
    """Raised when an urn specification is malformed or unsuitable."""


@dataclass(frozen=True)
class ReplacementDistribution:
    """Finite-support law of one replacement vector.

    ``atoms`` is a tuple of ``(probability, vector)`` pairs.
    """

    atoms: tuple[tuple[float, tuple[float, ...]], ...]

    @classmethod
    def deterministic(cls, vector: Sequence[float]) -> "ReplacementDistribution":
        return cls(((1.0, tuple(float(v) for v in vector)),))

    @classmethod
    def from_atoms(cls, atoms) -> "ReplacementDistribution":
        return cls(tuple((float(p), tuple(float(v) for v in vec)) for p, vec in atoms))

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for p, _ in self.atoms], dtype=float)

    @property
    def vectors(self) -> np.ndarray:
        return np.array([v for _, v in self.atoms], dtype=float)

    @property
    def is_deterministic(self) -> bool:
        return len(self.atoms) == 1 and self.atoms[0][0] == 1.0

    def mean(self) -> np.ndarray:
        return self.probabilities @ self.vectors


@dataclass(frozen=True)
class UrnSpec:
    """A generalized Pólya urn with nonrandom initial state."""

    activities: tuple[float, ...]
    replacements: tuple[ReplacementDistribution, ...]
    initial: tuple[float, ...]
    colors: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "activities", tuple(float(x) for x in self.activities))
        object.__setattr__(self, "initial", tuple(float(x) for x in self.initial))
        object.__setattr__(self, "replacements", tuple(self.replacements))
        if not self.colors:
            names = tuple(str(i + 1) for i in range(len(self.activities)))
            object.__setattr__(self, "colors", names)
        else:
            object.__setattr__(self, "colors", tuple(self.colors))

    @property
    def q(self) -> int:
        return len(self.activities)

    @property
    def a(self) -> np.ndarray:
        return np.array(self.activities, dtype=float)

    @property
    def x0(self) -> np.ndarray:
        return np.array(self.initial, dtype=float)

    @property
    def w0(self) -> float:
        return float(self.a @ self.x0)

    def is_integer_valued(self) -> bool:
        """True when X0 and every atom vector are integers."""
        vals = list(self.initial)
        for dist in self.replacements:
            for _, vec in dist.atoms:
                vals.extend(vec)
        return all(float(v).is_integer() for v in vals)

    @classmethod
    def deterministic(cls, activities, vectors, initial, colors=()) -> "UrnSpec":
        """Shorthand for urns whose replacements are all nonrandom.

        ``vectors[i]`` is the vector added after drawing colour ``i``.
        """
        reps = tuple(ReplacementDistribution.deterministic(v) for v in vectors)
        return cls(tuple(activities), reps, tuple(initial), tuple(colors))


@dataclass(frozen=True)
class BalanceCertificate:
    balanced: bool
    b: float | None
    worst_deviation: float

    def __str__(self):
        if self.balanced:
            return f"balanced, b={_fmt(self.b)}"
        return f"not balanced (worst deviation {self.worst_deviation:.6g})"


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def validate_spec(spec: UrnSpec) -> UrnSpec:
    """Check the well-formedness of ``spec`` and return it unchanged.

    Raises
    ------
    SpecError
        On dimension mismatch, negative activities or counts, zero total
        initial activity, or replacement probabilities not summing to one.
    """
    q = len(spec.activities)
    if q < 2:
        raise SpecError(f"need at least 2 colours, got {q}")
    if len(spec.initial) != q:
        raise SpecError(f"dimension mismatch: {q} activities but {len(spec.initial)} initial counts")
    if len(spec.replacements) != q:
        raise SpecError(f"dimension mismatch: {q} activities but {len(spec.replacements)} replacement laws")
    if len(spec.colors) != q:
        raise SpecError(f"dimension mismatch: {len(spec.colors)} colour names for {q} colours")
    a = spec.a
    x0 = spec.x0
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(x0))):
        raise SpecError("non-finite activity or initial count")
    if np.any(a < 0):
        raise SpecError(f"negative activity: {spec.activities}")
    if np.any(x0 < 0):
        raise SpecError(f"negative initial count: {spec.initial}")
    if not a @ x0 > 0:
        raise SpecError("zero total activity in the initial state")
    for i, dist in enumerate(spec.replacements):
        if not dist.atoms:
            raise SpecError(f"colour {spec.colors[i]}: empty atom list")
        for p, vec in dist.atoms:
            if len(vec) != q:
                raise SpecError(f"colour {spec.colors[i]}: atom of length {len(vec)}, expected {q}")
            if not (0.0 < p <= 1.0):
                raise SpecError(f"colour {spec.colors[i]}: atom probability {p} outside (0, 1]")
            if not all(math.isfinite(v) for v in vec):
                raise SpecError(f"colour {spec.colors[i]}: non-finite atom entry")
        mass = math.fsum(p for p, _ in dist.atoms)
        if abs(mass - 1.0) > PROB_TOL:
            raise SpecError(f"colour {spec.colors[i]}: probability mass {mass:.12g}")
    return spec


def check_balanced(spec: UrnSpec) -> BalanceCertificate:
    """Decide whether every atom adds the same activity ``b > 0``.

    The candidate ``b`` is the midpoint of the smallest and largest added
    activity, so ``worst_deviation`` is half their spread.
    """
    a = spec.a
    added = np.array([a @ np.asarray(vec) for dist in spec.replacements for _, vec in dist.atoms])
    lo, hi = float(added.min()), float(added.max())
    b = lo if lo == hi else 0.5 * (lo + hi)
    worst = float(np.max(np.abs(added - b)))
    ok = worst <= BALANCE_RTOL * max(1.0, abs(b)) and b > 0
    return BalanceCertificate(ok, b if ok else None, worst)


def require_balanced(spec: UrnSpec) -> float:
    """Return ``b`` or raise :class:`SpecError` for unbalanced urns."""
    cert = check_balanced(spec)
    if not cert.balanced:
        raise SpecError(f"urn is not balanced (worst deviation {cert.worst_deviation:.6g})")
    return float(cert.b)


def static_tenability_check(spec: UrnSpec) -> str:
    """Sufficient condition for tenability.

    Returns ``"provably_tenable"`` when all data are integers, off-diagonal
    replacements are nonnegative, and for each colour ``i`` the removals of
    colour ``i`` (only possible when ``i`` itself is drawn) are bounded by
    some ``d_i`` that divides both ``X0[i]`` and every ``xi_{ji}`` entry.
    Otherwise ``"unknown"``: no general decision procedure is attempted.
    """
    if not spec.is_integer_valued():
        return "unknown"
    q = spec.q
    a = spec.a
    for i in range(q):
        col = [int(vec[i]) for dist in spec.replacements for _, vec in dist.atoms]
        offdiag = [int(vec[i]) for j, dist in enumerate(spec.replacements) if j != i for _, vec in dist.atoms]
        if any(v < 0 for v in offdiag):
            return "unknown"
        removal = max(0, -min(int(vec[i]) for _, vec in spec.replacements[i].atoms))
        if removal == 0:
            continue
        # colour i can only be removed by drawing colour i, which needs a_i > 0
        if a[i] == 0:
            return "unknown"
        d = math.gcd(int(spec.initial[i]), *col)
        if d == 0 or removal > d:
            return "unknown"
    # total activity must stay positive: some positive-activity colour never shrinks to zero
    return "provably_tenable" if _activity_stays_positive(spec) else "unknown"


def _activity_stays_positive(spec: UrnSpec) -> bool:
    cert = check_balanced(spec)
    if cert.balanced:
        return True
    # unbalanced: fine if every atom adds nonnegative activity
    a = spec.a
    return all(a @ np.asarray(vec) >= 0 for dist in spec.replacements for _, vec in dist.atoms)


def intensity_matrix(spec: UrnSpec) -> np.ndarray:
    """``A[i, j] = a_j * E[xi_j][i]`` (column ``j`` is the drift of colour ``j``)."""
    means = np.array([dist.mean() for dist in spec.replacements])  # row j = E xi_j
    return means.T * spec.a[None, :]


def total_weight(spec: UrnSpec, n) -> float:
    """Deterministic total activity ``w_n = a.X0 + n b`` of a balanced urn."""
    b = require_balanced(spec)
    return spec.w0 + n * b


# -- JSON file format ---------------------------------------------------------

def _num(x: float):
    return int(x) if float(x).is_integer() and abs(x) < 2**53 else float(x)


def spec_from_dict(d: dict) -> UrnSpec:
    try:
        activities = [float(x) for x in d["activities"]]
        initial = [float(x) for x in d["initial"]]
        raw = d["replacements"]
    except (KeyError, TypeError) as exc:
        raise SpecError(f"missing or malformed field: {exc}") from None
    colors = tuple(str(c) for c in d.get("colors", ()))
    reps = []
    for entry in raw:
        if "deterministic" in entry:
            reps.append(ReplacementDistribution.deterministic(entry["deterministic"]))
        elif "atoms" in entry:
            reps.append(ReplacementDistribution.from_atoms((at["p"], at["v"]) for at in entry["atoms"]))
        else:
            raise SpecError(f"replacement entry needs 'deterministic' or 'atoms': {entry!r}")
    return validate_spec(UrnSpec(tuple(activities), tuple(reps), tuple(initial), colors))


def spec_to_dict(spec: UrnSpec) -> dict:
    reps = []
    for dist in spec.replacements:
        if dist.is_deterministic:
            reps.append({"deterministic": [_num(v) for v in dist.atoms[0][1]]})
        else:
            reps.append({"atoms": [{"p": float(p), "v": [_num(v) for v in vec]} for p, vec in dist.atoms]})
    return {
        "colors": list(spec.colors),
        "activities": [_num(x) for x in spec.activities],
        "initial": [_num(x) for x in spec.initial],
        "replacements": reps,
    }


def dumps_spec(spec: UrnSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2) + "\n"


def load_spec(path) -> UrnSpec:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from None
    return spec_from_dict(d)


def spec_digest(spec: UrnSpec) -> str:
    import hashlib

    canon = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def rational_data(spec: UrnSpec):
    """Activities, initial state and atoms as exact fractions.

    Probabilities that are binary approximations of simple fractions
    (such as 1/3) are snapped to the nearest fraction with denominator at
    most 10**6.
    """
    def snap(x):
        f = Fraction(x)
        g = f.limit_denominator(10**6)
        return g if abs(float(g) - x) <= 1e-15 * max(1.0, abs(x)) else f

    a = [snap(x) for x in spec.activities]
    x0 = [int(x) for x in spec.initial]
    atoms = [[(snap(p), tuple(int(v) for v in vec)) for p, vec in dist.atoms] for dist in spec.replacements]
    for i, col in enumerate(atoms):
        mass = sum(p for p, _ in col)
        if mass != 1:
            # absorb rounding so that exact mode conserves probability
            p0, v0 = col[-1]
            col[-1] = (p0 + (1 - mass), v0)
    return a, x0, atoms
