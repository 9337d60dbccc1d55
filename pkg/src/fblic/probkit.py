"""Finite-alphabet probability primitives.

Pmf / JointPmf / Dmc are immutable wrappers around numpy arrays with
validation, JSON round-tripping, and the information measures used by the
rest of the package. Everything is computed in nats with the 0*log(0) = 0
convention; unit conversion happens only at the CLI boundary.

Typicality is the robust (relative-frequency) kind: a sequence is typical
when every symbol frequency is within a relative tolerance of its
probability and zero-probability symbols never occur. The typical set
supports exact counting and lexicographic rank/unrank with arbitrary
precision integers, which is what the inner source code is built on.

JSON schema (all probabilities row-major):
    Pmf      {"probs": [p0, p1, ...]}
    JointPmf {"probs": [[...], [...]]}
    Dmc      {"rows": [[...], [...]]}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MASS_TOL = 1e-12


def _as_prob_array(values, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if np.any(arr < 0.0):
        raise ValueError(f"{name} entries must be non-negative")
    return arr


def _xlogx(arr: np.ndarray) -> np.ndarray:
    """x*log(x) elementwise with 0*log(0) = 0."""
    out = np.zeros_like(arr, dtype=float)
    mask = arr > 0.0
    out[mask] = arr[mask] * np.log(arr[mask])
    return out


class Pmf:
    """Probability mass function over symbols 0..n-1."""

    __slots__ = ("probs",)

    def __init__(self, probs):
        arr = _as_prob_array(probs, "pmf", 1)
        total = float(arr.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"pmf mass {total!r} differs from 1 by more than {MASS_TOL}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Pmf is immutable")

    @property
    def alphabet_size(self) -> int:
        return int(self.probs.shape[0])

    @classmethod
    def uniform(cls, n: int) -> "Pmf":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def degenerate(cls, n: int, symbol: int) -> "Pmf":
        probs = np.zeros(n)
        probs[symbol] = 1.0
        return cls(probs)

    def __len__(self) -> int:
        return self.alphabet_size

    def __getitem__(self, i: int) -> float:
        return float(self.probs[i])

    def __eq__(self, other) -> bool:
        return isinstance(other, Pmf) and np.array_equal(self.probs, other.probs)

    def __repr__(self) -> str:
        return f"Pmf({self.probs.tolist()})"

    def to_json(self) -> str:
        return json.dumps({"probs": self.probs.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Pmf":
        return cls(json.loads(text)["probs"])


class JointPmf:
    """Joint pmf over pairs (row symbol, column symbol)."""

    __slots__ = ("probs",)

    def __init__(self, probs):
        arr = _as_prob_array(probs, "joint pmf", 2)
        total = float(arr.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"joint mass {total!r} differs from 1 by more than {MASS_TOL}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("JointPmf is immutable")

    @property
    def row_size(self) -> int:
        return int(self.probs.shape[0])

    @property
    def col_size(self) -> int:
        return int(self.probs.shape[1])

    def row_marginal(self) -> Pmf:
        m = self.probs.sum(axis=1)
        return Pmf(m / m.sum())

    def col_marginal(self) -> Pmf:
        m = self.probs.sum(axis=0)
        return Pmf(m / m.sum())

    @classmethod
    def from_input_and_channel(cls, p: "Pmf", w: "Dmc") -> "JointPmf":
        if len(p) != w.num_inputs:
            raise ValueError("input pmf size does not match channel input alphabet")
        return cls(p.probs[:, None] * w.rows)

    def __eq__(self, other) -> bool:
        return isinstance(other, JointPmf) and np.array_equal(self.probs, other.probs)

    def __repr__(self) -> str:
        return f"JointPmf(shape={self.probs.shape})"

    def to_json(self) -> str:
        return json.dumps({"probs": self.probs.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "JointPmf":
        return cls(json.loads(text)["probs"])


class Dmc:
    """Discrete memoryless channel: one conditional pmf per input symbol.

    Paired inputs (or outputs) are represented row-major: the pair (i, j)
    over alphabets of sizes (n1, n2) maps to index i*n2 + j.
    """

    __slots__ = ("rows",)

    def __init__(self, rows):
        arr = _as_prob_array(rows, "channel matrix", 2)
        sums = arr.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > MASS_TOL)
        if bad.size:
            raise ValueError(f"channel row {int(bad[0])} has mass {sums[bad[0]]!r}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "rows", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Dmc is immutable")

    @property
    def num_inputs(self) -> int:
        return int(self.rows.shape[0])

    @property
    def num_outputs(self) -> int:
        return int(self.rows.shape[1])

    def row(self, i: int) -> Pmf:
        return Pmf(self.rows[i] / self.rows[i].sum())

    @classmethod
    def identity(cls, n: int) -> "Dmc":
        return cls(np.eye(n))

    @classmethod
    def binary_symmetric(cls, crossover: float) -> "Dmc":
        e = float(crossover)
        if not 0.0 <= e <= 1.0:
            raise ValueError("crossover must be in [0, 1]")
        return cls([[1.0 - e, e], [e, 1.0 - e]])

    def __eq__(self, other) -> bool:
        return isinstance(other, Dmc) and np.array_equal(self.rows, other.rows)

    def __repr__(self) -> str:
        return f"Dmc(inputs={self.num_inputs}, outputs={self.num_outputs})"

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Dmc":
        return cls(json.loads(text)["rows"])


@dataclass(frozen=True)
class TypicalityParams:
    """Block length and relative tolerance of the typical set."""

    l: int
    delta: float

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 1:
            raise ValueError("block length l must be a positive integer")
        if not self.delta > 0.0:
            raise ValueError("delta must be positive")
        object.__setattr__(self, "l", int(self.l))


# ---------------------------------------------------------------------------
# information measures
# ---------------------------------------------------------------------------

def entropy(p: Pmf) -> float:
    """Shannon entropy in nats."""
    return float(-_xlogx(p.probs).sum())


def binary_entropy(x: float) -> float:
    """Entropy of a Bernoulli(x) in nats; endpoints give 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy argument {x!r} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return float(-x * math.log(x) - (1.0 - x) * math.log1p(-x))


def conditional_entropy(j: JointPmf) -> float:
    """H(column | row) = H(joint) - H(row marginal), in nats."""
    h_joint = float(-_xlogx(j.probs).sum())
    h_row = float(-_xlogx(j.probs.sum(axis=1)).sum())
    return h_joint - h_row


def mutual_information(p: Pmf, w: Dmc) -> float:
    """I(input; output) for input pmf p through channel w, in nats."""
    if len(p) != w.num_inputs:
        raise ValueError("input pmf size does not match channel input alphabet")
    out = p.probs @ w.rows
    h_out = float(-_xlogx(out).sum())
    h_out_given_in = float(-(p.probs * _xlogx(w.rows).sum(axis=1)).sum())
    return h_out - h_out_given_in


def conditional_kl(v: Dmc, w: Dmc, p: Pmf) -> float:
    """sum_u p(u) D(v(.|u) || w(.|u)) in nats; +inf on a support violation.

    A row of v placing mass where the matching row of w has none (and
    p(u) > 0) makes the divergence infinite rather than raising.
    """
    if v.rows.shape != w.rows.shape:
        raise ValueError("channel shapes disagree")
    if len(p) != v.num_inputs:
        raise ValueError("input pmf size does not match channel input alphabet")
    total = 0.0
    for u in range(v.num_inputs):
        pu = float(p.probs[u])
        if pu == 0.0:
            continue
        vr, wr = v.rows[u], w.rows[u]
        if np.any((vr > 0.0) & (wr == 0.0)):
            return math.inf
        mask = vr > 0.0
        total += pu * float((vr[mask] * (np.log(vr[mask]) - np.log(wr[mask]))).sum())
    return max(0.0, total)


def least_positive_prob(p: Pmf) -> tuple[int, float]:
    """Symbol with the least positive probability; ties go to the lowest index."""
    best = -1
    best_p = math.inf
    for i, q in enumerate(p.probs):
        if q > 0.0 and q < best_p:
            best, best_p = i, float(q)
    if best < 0:
        raise ValueError("pmf has no positive entry")
    return best, best_p


# ---------------------------------------------------------------------------
# robust typicality, exact counting, enumerative rank/unrank
# ---------------------------------------------------------------------------

def _symbol_count_ok(count: int, l: int, prob: float, delta: float) -> bool:
    """Canonical per-symbol test: |count/l - p| <= delta*p (closed inequality)."""
    if prob == 0.0:
        return count == 0
    return abs(count / l - prob) <= delta * prob


def _count_bounds(probs: np.ndarray, l: int, delta: float) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Inclusive per-symbol count ranges admitted by the typicality test."""
    lo, hi = [], []
    for prob in probs:
        if prob == 0.0:
            lo.append(0)
            hi.append(0)
            continue
        approx_lo = max(0, math.floor(l * prob * (1.0 - delta)) - 2)
        approx_hi = min(l, math.ceil(l * prob * (1.0 + delta)) + 2)
        ok = [c for c in range(approx_lo, approx_hi + 1) if _symbol_count_ok(c, l, prob, delta)]
        if not ok:
            lo.append(1)
            hi.append(0)  # empty range: no admissible count
        else:
            lo.append(ok[0])
            hi.append(ok[-1])
    return tuple(lo), tuple(hi)


class TypicalSet:
    """Exact enumeration context for T_delta^l of a pmf.

    Counting walks prefix count vectors with memoization, in exact integer
    arithmetic (sizes overflow 64 bits already at moderate block lengths).
    Rank is the lexicographic position within the set; unrank inverts it.
    """

    def __init__(self, p: Pmf, params: TypicalityParams):
        self.p = p
        self.l = params.l
        self.delta = params.delta
        self.lo, self.hi = _count_bounds(p.probs, self.l, self.delta)
        self._memo: dict[tuple[int, ...], int] = {}

    def _completions(self, counts: tuple[int, ...]) -> int:
        """Number of typical sequences extending a prefix with these counts."""
        cached = self._memo.get(counts)
        if cached is not None:
            return cached
        used = sum(counts)
        remaining = self.l - used
        need = 0
        for c, lo_c, hi_c in zip(counts, self.lo, self.hi):
            if c > hi_c:
                self._memo[counts] = 0
                return 0
            if c < lo_c:
                need += lo_c - c
        if need > remaining:
            self._memo[counts] = 0
            return 0
        if remaining == 0:
            self._memo[counts] = 1
            return 1
        total = 0
        lst = list(counts)
        for s in range(len(counts)):
            if lst[s] < self.hi[s]:
                lst[s] += 1
                total += self._completions(tuple(lst))
                lst[s] -= 1
        self._memo[counts] = total
        return total

    @property
    def size(self) -> int:
        return self._completions((0,) * len(self.p))

    def log_size(self) -> float:
        n = self.size
        return math.log(n) if n > 0 else -math.inf

    def contains(self, x) -> bool:
        seq = np.asarray(x, dtype=int)
        if seq.ndim != 1 or seq.shape[0] != self.l:
            raise ValueError(f"sequence length must be {self.l}")
        if seq.size and (seq.min() < 0 or seq.max() >= len(self.p)):
            return False
        counts = np.bincount(seq, minlength=len(self.p))
        return all(
            _symbol_count_ok(int(c), self.l, float(prob), self.delta)
            for c, prob in zip(counts, self.p.probs)
        )

    def rank(self, x) -> int:
        seq = np.asarray(x, dtype=int)
        if not self.contains(seq):
            raise ValueError("sequence is not typical")
        counts = [0] * len(self.p)
        r = 0
        for sym in seq:
            for s in range(int(sym)):
                counts[s] += 1
                r += self._completions(tuple(counts))
                counts[s] -= 1
            counts[int(sym)] += 1
        return r

    def unrank(self, r: int) -> np.ndarray:
        if r < 0 or r >= self.size:
            raise ValueError(f"rank {r} outside [0, {self.size})")
        counts = [0] * len(self.p)
        out = np.empty(self.l, dtype=int)
        for i in range(self.l):
            for s in range(len(self.p)):
                counts[s] += 1
                n = self._completions(tuple(counts))
                if r < n:
                    out[i] = s
                    break
                r -= n
                counts[s] -= 1
            else:
                raise RuntimeError("unrank walked off the enumeration")
        return out


@lru_cache(maxsize=128)
def _typical_set_cached(probs: tuple[float, ...], l: int, delta: float) -> TypicalSet:
    return TypicalSet(Pmf(np.array(probs)), TypicalityParams(l, delta))


def typical_set(p: Pmf, t: TypicalityParams) -> TypicalSet:
    return _typical_set_cached(tuple(p.probs.tolist()), t.l, t.delta)


def is_typical(x, p: Pmf, t: TypicalityParams) -> bool:
    """Robust typicality test for an l-length sequence."""
    seq = np.asarray(x, dtype=int)
    if seq.ndim != 1 or seq.shape[0] != t.l:
        raise ValueError(f"sequence length must be {t.l}")
    if seq.size and (seq.min() < 0 or seq.max() >= len(p)):
        return False
    counts = np.bincount(seq, minlength=len(p))
    return all(
        _symbol_count_ok(int(c), t.l, float(prob), t.delta)
        for c, prob in zip(counts, p.probs)
    )


def typical_log_size(p: Pmf, t: TypicalityParams) -> float:
    """Exact log |T_delta^l(p)| in nats; -inf when the set is empty.

    The count is done in exact integer arithmetic and checked against the
    l*(1+delta)*H(p) exponential bound before returning.
    """
    ts = typical_set(p, t)
    log_n = ts.log_size()
    if log_n > -math.inf:
        bound = t.l * (1.0 + t.delta) * entropy(p)
        if log_n > bound + 1e-9:
            raise AssertionError(
                f"typical set log-size {log_n} exceeds l(1+delta)H = {bound}"
            )
    return log_n


def rank_typical(x, p: Pmf, t: TypicalityParams) -> int:
    """Lexicographic rank of a typical sequence within T_delta^l."""
    return typical_set(p, t).rank(x)


def unrank_typical(r: int, p: Pmf, t: TypicalityParams) -> np.ndarray:
    """Inverse of rank_typical."""
    return typical_set(p, t).unrank(r)


# ---------------------------------------------------------------------------
# pushforward helpers (finite maps of joint pmfs)
# ---------------------------------------------------------------------------

def push_joint(j: JointPmf, f_row, f_col, row_size: int | None = None,
               col_size: int | None = None) -> JointPmf:
    """Joint law of (f_row(R), f_col(C)) for (R, C) ~ j.

    f_row / f_col are index arrays; None leaves that coordinate unmapped.
    """
    fr = np.arange(j.row_size) if f_row is None else np.asarray(f_row, dtype=int)
    fc = np.arange(j.col_size) if f_col is None else np.asarray(f_col, dtype=int)
    if fr.shape[0] != j.row_size or fc.shape[0] != j.col_size:
        raise ValueError("map length does not match joint pmf shape")
    nr = int(fr.max()) + 1 if row_size is None else row_size
    nc = int(fc.max()) + 1 if col_size is None else col_size
    out = np.zeros((nr, nc))
    np.add.at(out, (fr[:, None], fc[None, :]), j.probs)
    return JointPmf(out)
