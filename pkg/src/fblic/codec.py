"""The layered code: inner fixed-length code, interleaving, outer binning.

The inner code maps a typical source sub-block to its lexicographic rank;
the top lA bits of the rank address a channel codeword, the remaining lB
bits are the residual carried on the private link. Atypical sub-blocks
fall back to codeword 0 with a zero residual (the error events absorb
them). Two encoders fed the same typical sub-block emit bit-identical
outputs, which is the agreement property the whole construction rides on.

The outer stage realizes binning operationally at desk scale: the encoder
sends a seeded universal hash of the whole m x l source matrix, and the
decoder searches error patterns touching at most E_max rows, re-completing
flagged rows from a caller-supplied candidate rule, accepting the unique
digest match. The hash is a polynomial over row limbs modulo a prime
sized to the bit budget; two distinct matrices collide with probability
at most (#limbs)/P over the seed draw, and the linearity in the limbs is
what lets the pattern search run as an exact meet-in-the-middle instead
of a cartesian sweep.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass

import numpy as np

from .probkit import Dmc, Pmf, TypicalityParams, typical_set

_MAGIC = b"FB"
_NEG_INF_LLH = -1e30


# ---------------------------------------------------------------------------
# block matrices
# ---------------------------------------------------------------------------

class BlockMatrix:
    """m x l matrix of symbols from a named finite alphabet."""

    def __init__(self, entries, alphabet_size: int):
        arr = np.asarray(entries, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("entries must be a non-empty 2-D array")
        if arr.min() < 0 or arr.max() >= alphabet_size:
            raise ValueError("entries outside the alphabet range")
        self.entries = arr
        self.alphabet_size = int(alphabet_size)

    @property
    def m(self) -> int:
        return int(self.entries.shape[0])

    @property
    def l(self) -> int:
        return int(self.entries.shape[1])

    def __eq__(self, other) -> bool:
        return (isinstance(other, BlockMatrix)
                and self.alphabet_size == other.alphabet_size
                and np.array_equal(self.entries, other.entries))

    def to_bytes(self) -> bytes:
        if self.m > 0xFFFF or self.l > 0xFFFF or self.alphabet_size > 0xFFFF:
            raise ValueError("binary format caps dimensions at 65535")
        header = _MAGIC + struct.pack("<HHH", self.m, self.l, self.alphabet_size)
        dtype = "<u1" if self.alphabet_size <= 256 else "<u2"
        return header + self.entries.astype(dtype).tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "BlockMatrix":
        if blob[:2] != _MAGIC:
            raise ValueError("bad magic")
        m, l, alph = struct.unpack("<HHH", blob[2:8])
        dtype = "<u1" if alph <= 256 else "<u2"
        arr = np.frombuffer(blob[8:], dtype=dtype).reshape(m, l)
        return cls(arr, alph)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["m", "l", "alphabet_size"])
        writer.writerow([self.m, self.l, self.alphabet_size])
        for row in self.entries:
            writer.writerow(row.tolist())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "BlockMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        m, l, alph = (int(v) for v in rows[1])
        data = [[int(v) for v in row] for row in rows[2:2 + m]]
        return cls(np.array(data), alph)


def _as_entries(mat) -> np.ndarray:
    return mat.entries if isinstance(mat, BlockMatrix) else np.asarray(mat, dtype=np.int64)


# ---------------------------------------------------------------------------
# codebooks
# ---------------------------------------------------------------------------

class FullCubeCode:
    """Every l-length word over the alphabet, addressed by base-a value."""

    def __init__(self, alphabet_size: int, l: int):
        if alphabet_size < 2 or l < 1:
            raise ValueError("need alphabet >= 2 and l >= 1")
        self.alphabet_size = int(alphabet_size)
        self.l = int(l)

    def __len__(self) -> int:
        return self.alphabet_size ** self.l

    def codeword(self, idx: int) -> np.ndarray:
        if not 0 <= idx < len(self):
            raise IndexError("codeword index out of range")
        out = np.zeros(self.l, dtype=np.int64)
        v = int(idx)
        for i in range(self.l - 1, -1, -1):
            v, out[i] = divmod(v, self.alphabet_size)
        return out

    def index_of(self, word) -> int:
        w = np.asarray(word, dtype=np.int64)
        if w.shape != (self.l,) or w.min() < 0 or w.max() >= self.alphabet_size:
            raise ValueError("word outside the cube")
        v = 0
        for s in w:
            v = v * self.alphabet_size + int(s)
        return v


@dataclass(frozen=True)
class ConstantCompositionCode:
    """Codewords all sharing one empirical type over the shared alphabet."""

    composition: tuple
    codewords: np.ndarray
    rate: float
    seed: int

    def __post_init__(self):
        counts = np.array(self.composition, dtype=np.int64)
        words = self.codewords
        per_word = np.stack(
            [(words == s).sum(axis=1) for s in range(len(self.composition))], axis=1)
        if not np.all(per_word == counts[None, :]):
            raise ValueError("a codeword deviates from the composition")

    @property
    def l(self) -> int:
        return int(self.codewords.shape[1])

    @property
    def alphabet_size(self) -> int:
        return len(self.composition)

    def __len__(self) -> int:
        return int(self.codewords.shape[0])

    def codeword(self, idx: int) -> np.ndarray:
        return self.codewords[idx]


def type_class_size(composition) -> int:
    total = math.factorial(int(sum(composition)))
    for c in composition:
        total //= math.factorial(int(c))
    return total


def sample_constant_composition(composition, rate_a: float, l: int, seed: int,
                                n_codewords: int | None = None) -> ConstantCompositionCode:
    """Draw codewords iid uniform on the type class (repeats allowed).

    Each codeword is an independent uniform permutation of the composition
    multiset; the draw is a fixed function of the seed.
    """
    comp = tuple(int(c) for c in composition)
    if sum(comp) != l:
        raise ValueError("composition must sum to the block length")
    n = n_codewords if n_codewords is not None else max(1, int(math.floor(math.exp(l * rate_a))))
    if n > type_class_size(comp):
        raise ValueError("more codewords requested than the type class holds")
    base = np.repeat(np.arange(len(comp), dtype=np.int64), comp)
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xC0DE)))
    chunks = []
    remaining = n
    while remaining > 0:
        take = min(remaining, 65536)
        keys = rng.random((take, l))
        order = np.argsort(keys, axis=1, kind="stable")
        chunks.append(base[order])
        remaining -= take
    words = np.vstack(chunks)
    return ConstantCompositionCode(composition=comp, codewords=words,
                                   rate=float(rate_a), seed=int(seed))


# ---------------------------------------------------------------------------
# the inner fixed-length code
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InnerEncodeResult:
    index: int
    codeword: np.ndarray
    residual: int
    atypical: bool


@dataclass(frozen=True)
class InnerDecodeResult:
    index: int
    fallback: bool


class InnerCode:
    """Typical-set source code split into a codeword address and a residual."""

    def __init__(self, p_k1: Pmf, l: int, delta: float, codebook, cu_size: int | None = None):
        self.p_k1 = p_k1
        self.l = int(l)
        self.delta = float(delta)
        self.typical = typical_set(p_k1, TypicalityParams(l, delta))
        size = self.typical.size
        if size < 1:
            raise ValueError("the typical set is empty")
        self.codebook = codebook
        self.total_bits = (size - 1).bit_length()
        cap = len(codebook) if cu_size is None else min(int(cu_size), len(codebook))
        self.la_bits = min(cap.bit_length() - 1, self.total_bits) if cap >= 1 else 0
        self.lb_bits = self.total_bits - self.la_bits

    def encode(self, block) -> InnerEncodeResult:
        blk = np.asarray(block, dtype=np.int64)
        if self.typical.contains(blk):
            r = self.typical.rank(blk)
            idx = r >> self.lb_bits
            res = r & ((1 << self.lb_bits) - 1)
            return InnerEncodeResult(index=idx, codeword=self.codebook.codeword(idx),
                                     residual=res, atypical=False)
        return InnerEncodeResult(index=0, codeword=self.codebook.codeword(0),
                                 residual=0, atypical=True)

    def decode_exact(self, y_word) -> InnerDecodeResult:
        """Invert a deterministic shared channel; out-of-range means fallback."""
        if not isinstance(self.codebook, FullCubeCode):
            raise TypeError("exact inversion needs the full-cube codebook")
        idx = self.codebook.index_of(y_word)
        if idx >> self.la_bits:
            return InnerDecodeResult(index=0, fallback=True)
        return InnerDecodeResult(index=idx, fallback=False)

    def decode_ml(self, y_word, induced: Dmc) -> InnerDecodeResult:
        """Maximum-likelihood codeword decision; ties go to the lowest index."""
        words = self._materialized_words()
        y = np.asarray(y_word, dtype=np.int64)
        with np.errstate(divide="ignore"):
            logw = np.where(induced.rows > 0.0, np.log(np.maximum(induced.rows, 1e-320)),
                            _NEG_INF_LLH)
        scores = logw[words, np.broadcast_to(y, words.shape)].sum(axis=1)
        return InnerDecodeResult(index=int(np.argmax(scores)), fallback=False)

    def _materialized_words(self) -> np.ndarray:
        if isinstance(self.codebook, ConstantCompositionCode):
            return self.codebook.codewords[: 1 << self.la_bits]
        n = 1 << self.la_bits
        if n > 1 << 20:
            raise ValueError("refusing to materialize more than 2^20 codewords")
        return np.stack([self.codebook.codeword(i) for i in range(n)])

    def reconstruct(self, index: int, residual: int) -> np.ndarray | None:
        """Unrank (index || residual); None when the rank is out of range."""
        r = (int(index) << self.lb_bits) | int(residual)
        if r >= self.typical.size:
            return None
        return self.typical.unrank(r)


def build_inner_code(p_k1: Pmf, l: int, delta: float, cu_size: int | None = None,
                     codebook=None) -> InnerCode:
    """Inner code over the given codebook; default is the full cube on K."""
    if codebook is None:
        codebook = FullCubeCode(p_k1.alphabet_size, l)
    return InnerCode(p_k1, l, delta, codebook, cu_size=cu_size)


def encode_inner(block, code: InnerCode) -> InnerEncodeResult:
    return code.encode(block)


def decode_inner(y_block, code: InnerCode, induced: Dmc | None = None,
                 exact: bool = False) -> InnerDecodeResult:
    if exact:
        return code.decode_exact(y_block)
    if induced is None:
        raise ValueError("ML decoding needs the induced channel")
    return code.decode_ml(y_block, induced)


# ---------------------------------------------------------------------------
# interleaving
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PermutationSet:
    """One permutation of [l] per row, each drawn from its own seeded stream."""

    rows: np.ndarray
    seed: int

    def __post_init__(self):
        m, l = self.rows.shape
        ref = np.arange(l)
        for t in range(m):
            if not np.array_equal(np.sort(self.rows[t]), ref):
                raise ValueError(f"row {t} is not a permutation")

    @property
    def m(self) -> int:
        return int(self.rows.shape[0])

    @property
    def l(self) -> int:
        return int(self.rows.shape[1])

    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.rows)
        np.put_along_axis(inv, self.rows, np.broadcast_to(np.arange(self.l), self.rows.shape), axis=1)
        return inv


def draw_permutations(m: int, l: int, seed: int) -> PermutationSet:
    rows = np.empty((m, l), dtype=np.int64)
    for t in range(m):
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), t)))
        rows[t] = rng.permutation(l)
    return PermutationSet(rows=rows, seed=int(seed))


def interleave(mat, perm: PermutationSet):
    """B(t, i) = A(t, pi_t(i))."""
    arr = _as_entries(mat)
    if arr.shape != perm.rows.shape:
        raise ValueError("matrix and permutation shapes disagree")
    out = np.take_along_axis(arr, perm.rows, axis=1)
    return BlockMatrix(out, mat.alphabet_size) if isinstance(mat, BlockMatrix) else out


def deinterleave(mat, perm: PermutationSet):
    """Exact inverse of interleave."""
    arr = _as_entries(mat)
    if arr.shape != perm.rows.shape:
        raise ValueError("matrix and permutation shapes disagree")
    out = np.empty_like(arr)
    np.put_along_axis(out, perm.rows, arr, axis=1)
    return BlockMatrix(out, mat.alphabet_size) if isinstance(mat, BlockMatrix) else out


# ---------------------------------------------------------------------------
# seeded universal hashing over matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Digest:
    bits: int
    value: int


def _is_probable_prime(n: int) -> bool:
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for p in small:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _prime_below(n: int) -> int:
    """Largest prime <= n (deterministic bases; fixed-base SPRP above 3e24)."""
    if n < 2:
        raise ValueError("no prime at or below 1")
    c = n if n % 2 == 1 else n - 1
    while c > 2 and not _is_probable_prime(c):
        c -= 2
    return c if c > 2 else 2


class MatrixHasher:
    """Seeded polynomial hash of an m x l symbol matrix.

    Rows pack to base-alphabet integers, split into limbs strictly below
    the modulus; the digest is sum(limb * beta^position) mod P with beta
    drawn from the seed. Distinct matrices collide with probability at
    most (total limbs)/P over the beta draw. The map is linear in the
    limbs, so single-row substitutions shift the digest by a precomputable
    delta; the binning decoder exploits this.
    """

    def __init__(self, bits: int, seed: int, alphabet_size: int, l: int, m: int):
        self.bits = int(bits)
        self.seed = int(seed)
        self.alphabet_size = int(alphabet_size)
        self.l = int(l)
        self.m = int(m)
        if self.bits <= 0:
            self.modulus = 1
            self.beta = 0
            self.limbs_per_row = 1
            self._powers = [0]
            return
        self.modulus = _prime_below(2 ** self.bits) if self.bits >= 2 else 2
        limb_bits = max(1, min(96, self.bits - 7)) if self.bits >= 8 else 1
        row_bits = self.l * max(1, (self.alphabet_size - 1).bit_length())
        self.limbs_per_row = max(1, -(-row_bits // limb_bits))
        self._limb_mask = (1 << limb_bits) - 1
        self._limb_bits = limb_bits
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, 0x4855)))
        raw = int.from_bytes(rng.bytes(32), "big")
        self.beta = 2 + raw % max(1, self.modulus - 2)
        total = self.m * self.limbs_per_row
        powers = [1] * total
        for i in range(1, total):
            powers[i] = powers[i - 1] * self.beta % self.modulus
        self._powers = powers

    def encode_row(self, row) -> int:
        v = 0
        a = self.alphabet_size
        for s in np.asarray(row, dtype=np.int64):
            v = v * a + int(s)
        return v

    def row_contribution(self, t: int, row) -> int:
        if self.bits <= 0:
            return 0
        v = self.encode_row(row)
        acc = 0
        base = t * self.limbs_per_row
        for s in range(self.limbs_per_row):
            limb = v & self._limb_mask
            v >>= self._limb_bits
            acc = (acc + limb * self._powers[base + s]) % self.modulus
        return acc

    def digest(self, matrix) -> Digest:
        if self.bits <= 0:
            return Digest(bits=0, value=0)
        arr = _as_entries(matrix)
        if arr.shape != (self.m, self.l):
            raise ValueError("matrix shape disagrees with the hasher")
        acc = 0
        for t in range(self.m):
            acc = (acc + self.row_contribution(t, arr[t])) % self.modulus
        return Digest(bits=self.bits, value=acc)


# ---------------------------------------------------------------------------
# outer binning code
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OuterEncodeResult:
    residuals: tuple
    residual_bits: int
    atypical: tuple
    digest: Digest


def outer_encode(s_matrix, code: InnerCode, hash_rate: float, seed: int,
                 hasher: MatrixHasher | None = None,
                 hash_bits: int | None = None) -> OuterEncodeResult:
    """Per-row residual bits plus a seeded hash of the whole source matrix.

    The digest length is ceil(hash_rate * m / log 2) bits unless an
    explicit bit count is forced.
    """
    arr = _as_entries(s_matrix)
    m = arr.shape[0]
    if hash_rate < 0.0:
        raise ValueError("hash_rate must be non-negative")
    bits = hash_bits if hash_bits is not None else math.ceil(hash_rate * m / math.log(2.0) - 1e-12)
    if hasher is None:
        alph = s_matrix.alphabet_size if isinstance(s_matrix, BlockMatrix) else int(arr.max()) + 1
        hasher = MatrixHasher(bits, seed, alph, arr.shape[1], m)
    residuals = []
    atypical = []
    for t in range(m):
        enc = code.encode(arr[t])
        residuals.append(enc.residual)
        atypical.append(enc.atypical)
    return OuterEncodeResult(residuals=tuple(residuals), residual_bits=code.lb_bits,
                             atypical=tuple(atypical), digest=hasher.digest(arr))


@dataclass(frozen=True)
class OuterDecodeResult:
    status: str  # ok | ambiguous | failed
    matrix: np.ndarray | None
    matches: int
    searched: int


def outer_decode(khat, residuals, digest: Digest, code: InnerCode, side,
                 e_max: int, hasher: MatrixHasher) -> OuterDecodeResult:
    """Digest-verified bounded-error-pattern search.

    khat is the decoder's per-row baseline (already refined by residual
    bits). side(t, row, residual) yields candidate replacement rows for
    row t. All patterns touching at most e_max rows are examined; the
    unique digest match wins, two distinct matches report ambiguity, none
    reports a search failure. Enumeration order is lexicographic in
    (rows touched, candidate indices), so outcomes are reproducible.
    """
    if e_max < 0:
        raise ValueError("e_max must be non-negative")
    base = _as_entries(khat).copy()
    m = base.shape[0]
    if digest.bits != hasher.bits:
        raise ValueError("digest width disagrees with the hasher")

    if hasher.bits <= 0:
        # a zero-width digest verifies nothing: every pattern matches
        status = "ok" if e_max == 0 else "ambiguous"
        return OuterDecodeResult(status=status, matrix=base if e_max == 0 else None,
                                 matches=1 if e_max == 0 else 2, searched=1)

    p = hasher.modulus
    base_contrib = [hasher.row_contribution(t, base[t]) for t in range(m)]
    base_val = sum(base_contrib) % p
    need = (digest.value - base_val) % p

    candidates: list[list[np.ndarray]] = []
    deltas: list[list[int]] = []
    searched = 1
    for t in range(m):
        seen = set()
        rows_t, deltas_t = [], []
        for cand in side(t, base[t], residuals[t]) if e_max >= 1 else []:
            cr = np.asarray(cand, dtype=np.int64)
            key = cr.tobytes()
            if key in seen or np.array_equal(cr, base[t]):
                continue
            seen.add(key)
            rows_t.append(cr)
            deltas_t.append((hasher.row_contribution(t, cr) - base_contrib[t]) % p)
        candidates.append(rows_t)
        deltas.append(deltas_t)
        searched += len(rows_t)

    matches: list[tuple] = []
    if need == 0:
        matches.append(())

    if e_max >= 1:
        for t in range(m):
            for ci, d in enumerate(deltas[t]):
                if d == need:
                    matches.append(((t, ci),))

    if e_max >= 2:
        by_delta: dict[int, list[tuple[int, int]]] = {}
        for t in range(m):
            for ci, d in enumerate(deltas[t]):
                by_delta.setdefault(d, []).append((t, ci))
        pair_count = 0
        for t1 in range(m):
            for c1, d1 in enumerate(deltas[t1]):
                target = (need - d1) % p
                for (t2, c2) in by_delta.get(target, ()):
                    if t2 > t1:
                        matches.append(((t1, c1), (t2, c2)))
                        pair_count += 1
        searched += pair_count

    if e_max >= 3:
        # exact recursion for deeper patterns; combinatorial, desk scale only
        def recurse(start_t: int, chosen: list, acc: int):
            if len(chosen) >= 3 and acc == need:
                matches.append(tuple(chosen))
            if len(chosen) >= e_max:
                return
            for t in range(start_t, m):
                for ci, d in enumerate(deltas[t]):
                    chosen.append((t, ci))
                    recurse(t + 1, chosen, (acc + d) % p)
                    chosen.pop()
        recurse(0, [], 0)

    matches = sorted(set(matches))
    if not matches:
        return OuterDecodeResult(status="failed", matrix=None, matches=0, searched=searched)
    if len(matches) > 1:
        return OuterDecodeResult(status="ambiguous", matrix=None,
                                 matches=len(matches), searched=searched)
    out = base
    for (t, ci) in matches[0]:
        out[t] = candidates[t][ci]
    return OuterDecodeResult(status="ok", matrix=out, matches=1, searched=searched)


# ---------------------------------------------------------------------------
# candidate rules for flagged-row completion
# ---------------------------------------------------------------------------

def hamming_ball_rule(alphabet_size: int, radius: int = 1):
    """All rows within the given Hamming distance, nearest first."""
    if radius not in (1, 2):
        raise ValueError("supported radii are 1 and 2")

    def rule(t, row, residual):
        del t, residual
        out = []
        l = row.shape[0]
        for i in range(l):
            for s in range(alphabet_size):
                if s == row[i]:
                    continue
                alt = row.copy()
                alt[i] = s
                out.append(alt)
        if radius == 2:
            for i in range(l):
                for j in range(i + 1, l):
                    for si in range(alphabet_size):
                        if si == row[i]:
                            continue
                        for sj in range(alphabet_size):
                            if sj == row[j]:
                                continue
                            alt = row.copy()
                            alt[i] = si
                            alt[j] = sj
                            out.append(alt)
        return out

    return rule


def prefix_flip_rule(code: InnerCode, alphabet_size: int):
    """Flips restricted to the symbol positions carried by the codeword address.

    Valid when the typical set is the full cube over a power-of-two
    alphabet: ranks are then base-n values of the rows, the address bits
    are exactly the leading symbols, and only those can be corrupted by a
    shared-channel disagreement (the residual pins the rest).
    """
    n = alphabet_size
    sym_bits = (n - 1).bit_length()
    if 2 ** sym_bits != n:
        raise ValueError("prefix rule needs a power-of-two alphabet")
    if code.typical.size != n ** code.l:
        raise ValueError("prefix rule needs the full-cube typical set")
    prefix_syms = -(-code.la_bits // sym_bits)

    def rule(t, row, residual):
        del t, residual
        out = []
        for i in range(min(prefix_syms, row.shape[0])):
            for s in range(n):
                if s == row[i]:
                    continue
                alt = row.copy()
                alt[i] = s
                out.append(alt)
        return out

    return rule


# ---------------------------------------------------------------------------
# input multiplexing
# ---------------------------------------------------------------------------

def multiplex_inputs(u_mat, v_mat, p_x_given_uv, seed: int):
    """Sample X(t, i) ~ p(x | u(t,i), v(t,i)) entrywise, fixed by the seed."""
    u = _as_entries(u_mat)
    v = _as_entries(v_mat)
    if u.shape != v.shape:
        raise ValueError("matrix shapes disagree")
    p = np.asarray(p_x_given_uv, dtype=float)
    if p.ndim != 3:
        raise ValueError("p_x_given_uv must have shape (|U|, |V|, |X|)")
    nu, nv, nx = p.shape
    cum = np.cumsum(p.reshape(nu * nv, nx), axis=1)
    groups = (u * nv + v).ravel()
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x58)))
    r = rng.random(groups.shape[0])
    x = (cum[groups] > r[:, None]).argmax(axis=1)
    return x.reshape(u.shape)
