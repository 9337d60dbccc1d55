import itertools
import math

import numpy as np
import pytest

from fblic import codec as cd
from fblic import probkit as pk

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# inner code
# ---------------------------------------------------------------------------

def test_build_inner_code_degenerate_source():
    p = pk.Pmf([1.0, 0.0])
    code = cd.build_inner_code(p, 5, 0.5)
    assert code.typical.size == 1
    assert code.total_bits == 0 and code.lb_bits == 0
    enc = code.encode([0, 0, 0, 0, 0])
    assert enc.index == 0 and not enc.atypical


def test_build_inner_code_split_consistent_with_enumeration():
    p = pk.Pmf.uniform(2)
    code = cd.build_inner_code(p, 8, 0.25)
    n = code.typical.size
    assert code.total_bits == (n - 1).bit_length()
    assert code.la_bits + code.lb_bits >= math.ceil(math.log2(n))


def test_full_cube_convention():
    # the worked example uses every word over the channel alphabet, with
    # floor(log2 a^l) bits addressing them
    p = pk.Pmf([0.5, 0.25, 0.25])
    code = cd.build_inner_code(p, 4, 2.0, codebook=cd.FullCubeCode(3, 4))
    assert code.la_bits == min(math.floor(4 * math.log2(3)), code.total_bits)
    assert len(code.codebook) == 81


def test_encode_roundtrip_and_atypical_fallback():
    p = pk.Pmf.uniform(2)
    code = cd.build_inner_code(p, 8, 0.25)
    blk = np.array([0, 1, 1, 0, 1, 0, 0, 1])
    enc = code.encode(blk)
    assert not enc.atypical
    rec = code.reconstruct(enc.index, enc.residual)
    assert np.array_equal(rec, blk)
    bad = np.zeros(8, dtype=int)
    enc2 = code.encode(bad)
    assert enc2.atypical and enc2.index == 0 and enc2.residual == 0
    assert np.array_equal(enc2.codeword, code.codebook.codeword(0))


def test_conditional_coding_agreement_exhaustive():
    # two independently built encoders agree bit for bit on every typical block
    p = pk.Pmf.uniform(2)
    enc1 = cd.build_inner_code(p, 6, 0.4)
    enc2 = cd.build_inner_code(p, 6, 0.4)
    for bits in itertools.product((0, 1), repeat=6):
        blk = np.array(bits)
        if not enc1.typical.contains(blk):
            continue
        r1, r2 = enc1.encode(blk), enc2.encode(blk)
        assert r1.index == r2.index
        assert r1.residual == r2.residual
        assert np.array_equal(r1.codeword, r2.codeword)


def test_decode_exact_agreement_and_disagreement():
    from fblic import dueck as dk
    p = pk.Pmf.uniform(2)
    code = cd.build_inner_code(p, 8, 1.0, cu_size=1 << 4,
                               codebook=cd.FullCubeCode(2, 8))
    blk1 = np.array([1, 0, 1, 0, 1, 0, 0, 1])
    blk2 = np.array([1, 0, 1, 0, 1, 0, 1, 1])  # differs in a residual position
    e1, e2 = code.encode(blk1), code.encode(blk2)
    # agreement: exact inversion recovers the index
    y = np.where(e1.codeword == e2.codeword, e1.codeword, 0)
    dec = code.decode_exact(y)
    assert dec.index == e1.index and not dec.fallback
    # disagreement on a codeword digit zeroes that output position
    blk3 = np.array([0, 0, 1, 0, 1, 0, 0, 1])  # differs in an address position
    e3 = code.encode(blk3)
    y2 = np.where(e1.codeword == e3.codeword, e1.codeword, 0)
    assert (y2 != e1.codeword).any()
    dec2 = code.decode_exact(y2)
    assert dec2.index == cd.FullCubeCode(2, 8).index_of(y2)
    # the example's channel law produces exactly this masking
    w = dk.shared_channel(2)
    lawful = np.array([int(np.argmax(w.rows[u1 * 2 + u2]))
                       for u1, u2 in zip(e1.codeword, e3.codeword)])
    assert np.array_equal(lawful, y2)


def test_decode_exact_out_of_range_falls_back():
    p = pk.Pmf.uniform(2)
    code = cd.build_inner_code(p, 4, 1.0, cu_size=1 << 2,
                               codebook=cd.FullCubeCode(2, 4))
    # a word whose cube index exceeds the addressable range
    dec = code.decode_exact(np.array([1, 1, 1, 1]))
    assert dec.fallback and dec.index == 0


def test_decode_ml_matches_brute_force():
    rng = np.random.default_rng(3)
    p_u = pk.Pmf.uniform(2)
    comp = (3, 3)
    book = cd.sample_constant_composition(comp, 0.4, 6, seed=1, n_codewords=12)
    code = cd.InnerCode(p_u, 6, 1.0, book)
    chan = pk.Dmc([[0.8, 0.2], [0.3, 0.7]])
    for _ in range(40):
        y = rng.integers(0, 2, size=6)
        scores = []
        for i in range(1 << code.la_bits):
            w = book.codeword(i)
            scores.append(math.prod(chan.rows[int(w[t]), int(y[t])] for t in range(6)))
        got = code.decode_ml(y, chan)
        # exact ties are not bit-stable across float paths; the decision
        # must achieve the brute-force maximum likelihood
        assert scores[got.index] == pytest.approx(max(scores), rel=1e-9)


def test_decode_ml_tie_breaks_to_lowest_index():
    p_u = pk.Pmf.uniform(2)
    words = np.array([[0, 1], [1, 0]])
    book = cd.ConstantCompositionCode(composition=(1, 1), codewords=words,
                                      rate=0.3, seed=0)
    code = cd.InnerCode(p_u, 2, 1.0, book)
    # symmetric channel and a symmetric observation tie both codewords
    chan = pk.Dmc([[0.5, 0.5], [0.5, 0.5]])
    assert code.decode_ml(np.array([0, 0]), chan).index == 0


# ---------------------------------------------------------------------------
# constant composition sampling
# ---------------------------------------------------------------------------

def test_constant_composition_degenerate():
    book = cd.sample_constant_composition((4, 0), 0.1, 4, seed=0, n_codewords=1)
    assert np.array_equal(book.codewords, np.zeros((1, 4), dtype=int))


def test_constant_composition_types_exact():
    book = cd.sample_constant_composition((2, 3, 1), 0.5, 6, seed=7, n_codewords=50)
    for word in book.codewords:
        assert tuple(np.bincount(word, minlength=3)) == (2, 3, 1)


def test_constant_composition_deterministic_and_bounded():
    b1 = cd.sample_constant_composition((4, 4), 0.5, 8, seed=3)
    b2 = cd.sample_constant_composition((4, 4), 0.5, 8, seed=3)
    assert np.array_equal(b1.codewords, b2.codewords)
    with pytest.raises(ValueError):
        cd.sample_constant_composition((2, 2), 0.5, 4, seed=0, n_codewords=100)


def test_constant_composition_position_frequencies():
    # across many sampled codewords each position follows composition/l
    book = cd.sample_constant_composition((12, 4), 0.9, 16, seed=5, n_codewords=1500)
    freq1 = (book.codewords == 1).mean(axis=0)
    sigma = math.sqrt(0.25 * 0.75 / 1500)
    assert np.all(np.abs(freq1 - 0.25) <= 4 * sigma)


# ---------------------------------------------------------------------------
# permutations and interleaving
# ---------------------------------------------------------------------------

def test_permutations_basics():
    perm = cd.draw_permutations(5, 1, seed=0)
    assert np.array_equal(perm.rows, np.zeros((5, 1), dtype=int))
    perm2 = cd.draw_permutations(50, 7, seed=1)
    for row in perm2.rows:
        assert sorted(row.tolist()) == list(range(7))
    assert np.array_equal(cd.draw_permutations(50, 7, seed=1).rows, perm2.rows)


def test_permutation_uniformity_chi_square():
    from scipy import stats as sstats
    n = 100_000
    perm = cd.draw_permutations(n, 3, seed=9)
    codes = perm.rows[:, 0] * 9 + perm.rows[:, 1] * 3 + perm.rows[:, 2]
    _, counts = np.unique(codes, return_counts=True)
    assert counts.shape[0] == 6
    stat = float(((counts - n / 6) ** 2 / (n / 6)).sum())
    p_value = float(sstats.chi2.sf(stat, 5))
    assert p_value > 0.01


def test_interleave_identity_and_roundtrip():
    ident = cd.PermutationSet(rows=np.tile(np.arange(6), (4, 1)), seed=0)
    a = np.arange(24).reshape(4, 6)
    assert np.array_equal(cd.interleave(a, ident), a)
    rng = np.random.default_rng(2)
    perm = cd.draw_permutations(4, 6, seed=3)
    for _ in range(20):
        mat = rng.integers(0, 5, size=(4, 6))
        assert np.array_equal(cd.deinterleave(cd.interleave(mat, perm), perm), mat)


def test_interleave_block_matrix_wrapper():
    perm = cd.draw_permutations(3, 4, seed=1)
    bm = cd.BlockMatrix(np.arange(12).reshape(3, 4) % 3, 3)
    out = cd.interleave(bm, perm)
    assert isinstance(out, cd.BlockMatrix)
    assert cd.deinterleave(out, perm) == bm


# ---------------------------------------------------------------------------
# block matrix serialization
# ---------------------------------------------------------------------------

def test_block_matrix_bytes_roundtrip():
    bm = cd.BlockMatrix([[0, 1, 2], [2, 1, 0]], 3)
    blob = bm.to_bytes()
    assert blob[:2] == b"FB" and len(blob) == 8 + 6
    assert cd.BlockMatrix.from_bytes(blob) == bm
    wide = cd.BlockMatrix([[0, 300], [511, 5]], 512)
    assert cd.BlockMatrix.from_bytes(wide.to_bytes()) == wide


def test_block_matrix_csv_roundtrip():
    bm = cd.BlockMatrix([[0, 1], [1, 0], [1, 1]], 2)
    assert cd.BlockMatrix.from_csv(bm.to_csv()) == bm


def test_block_matrix_validation():
    with pytest.raises(ValueError):
        cd.BlockMatrix([[0, 3]], 3)
    with pytest.raises(ValueError):
        cd.BlockMatrix(np.zeros((0, 4)), 2)


# ---------------------------------------------------------------------------
# hashing and the outer code
# ---------------------------------------------------------------------------

def test_digest_length_matches_rate():
    p = pk.Pmf.uniform(2)
    code = cd.build_inner_code(p, 4, 1.0)
    mat = np.zeros((8, 4), dtype=int)
    for rate_nats in (0.0, 0.5, 1.37, 9.01):
        out = cd.outer_encode(mat, code, rate_nats, seed=1)
        assert out.digest.bits == math.ceil(rate_nats * 8 / LN2 - 1e-12)
    out0 = cd.outer_encode(mat, code, 0.0, seed=1)
    assert out0.digest.bits == 0 and out0.digest.value == 0


def test_equal_matrices_equal_digests():
    h = cd.MatrixHasher(96, seed=4, alphabet_size=3, l=5, m=6)
    rng = np.random.default_rng(0)
    mat = rng.integers(0, 3, size=(6, 5))
    assert h.digest(mat) == h.digest(mat.copy())
    other = mat.copy()
    other[0, 0] = (other[0, 0] + 1) % 3
    assert h.digest(other) != h.digest(mat)
    # a different seed gives a different map
    h2 = cd.MatrixHasher(96, seed=5, alphabet_size=3, l=5, m=6)
    assert h2.digest(mat) != h.digest(mat)


def test_prime_below():
    assert cd._prime_below(2 ** 8) == 251
    assert cd._prime_below(100) == 97
    assert cd._is_probable_prime(2 ** 127 - 1)


def test_outer_decode_clean_matrix():
    p = pk.Pmf.uniform(2)
    code = cd.build_inner_code(p, 6, 1.0, cu_size=1 << 3)
    rng = np.random.default_rng(1)
    truth = rng.integers(0, 2, size=(5, 6))
    h = cd.MatrixHasher(80, seed=2, alphabet_size=2, l=6, m=5)
    side = cd.hamming_ball_rule(2, radius=1)
    res = cd.outer_decode(truth.copy(), [0] * 5, h.digest(truth), code, side, 2, h)
    assert res.status == "ok"
    assert np.array_equal(res.matrix, truth)


def brute_force_outer(khat, digest, side, e_max, hasher, residuals):
    """Enumerate every candidate matrix within e_max row changes."""
    m = khat.shape[0]
    cands = [list(side(t, khat[t], residuals[t])) for t in range(m)]
    matches = []
    rows_sets = []
    for r in range(e_max + 1):
        for rows in itertools.combinations(range(m), r):
            rows_sets.append(rows)
    for rows in rows_sets:
        pools = [range(len(cands[t])) for t in rows]
        for choice in itertools.product(*pools):
            mat = khat.copy()
            for t, ci in zip(rows, choice):
                mat[t] = cands[t][ci]
            if np.array_equal(mat, khat) and rows:
                continue
            if hasher.digest(mat) == digest:
                matches.append(mat.copy())
    uniq = []
    for mat in matches:
        if not any(np.array_equal(mat, u) for u in uniq):
            uniq.append(mat)
    return uniq


def test_outer_decode_matches_brute_force_enumeration():
    p = pk.Pmf.uniform(2)
    code = cd.build_inner_code(p, 5, 1.0, cu_size=1 << 3)
    side = cd.hamming_ball_rule(2, radius=1)
    rng = np.random.default_rng(8)
    h = cd.MatrixHasher(64, seed=3, alphabet_size=2, l=5, m=4)
    for trial in range(25):
        truth = rng.integers(0, 2, size=(4, 5))
        khat = truth.copy()
        n_bad = int(rng.integers(0, 3))
        for t in rng.choice(4, size=n_bad, replace=False):
            pos = int(rng.integers(0, 5))
            khat[t, pos] ^= 1
        digest = h.digest(truth)
        res = cd.outer_decode(khat.copy(), [0] * 4, digest, code, side, 2, h)
        brute = brute_force_outer(khat, digest, side, 2, h, [0] * 4)
        if len(brute) == 1:
            assert res.status == "ok"
            assert np.array_equal(res.matrix, brute[0])
            assert np.array_equal(res.matrix, truth)
        elif len(brute) == 0:
            assert res.status == "failed"
        else:
            assert res.status == "ambiguous"


def test_outer_decode_failure_when_pattern_exceeds_e_max():
    p = pk.Pmf.uniform(2)
    code = cd.build_inner_code(p, 5, 1.0, cu_size=1 << 3)
    side = cd.hamming_ball_rule(2, radius=1)
    rng = np.random.default_rng(9)
    truth = rng.integers(0, 2, size=(6, 5))
    khat = truth.copy()
    for t in (0, 2, 4):
        khat[t, 1] ^= 1
    h = cd.MatrixHasher(80, seed=1, alphabet_size=2, l=5, m=6)
    res = cd.outer_decode(khat, [0] * 6, h.digest(truth), code, side, 2, h)
    assert res.status == "failed"
    res3 = cd.outer_decode(khat, [0] * 6, h.digest(truth), code, side, 3, h)
    assert res3.status == "ok" and np.array_equal(res3.matrix, truth)


def test_outer_decode_zero_width_digest():
    p = pk.Pmf.uniform(2)
    code = cd.build_inner_code(p, 4, 1.0)
    h = cd.MatrixHasher(0, seed=0, alphabet_size=2, l=4, m=3)
    mat = np.zeros((3, 4), dtype=int)
    side = cd.hamming_ball_rule(2, radius=1)
    assert cd.outer_decode(mat, [0] * 3, cd.Digest(0, 0), code, side, 0, h).status == "ok"
    assert cd.outer_decode(mat, [0] * 3, cd.Digest(0, 0), code, side, 1, h).status == "ambiguous"


def test_outer_decode_no_wrong_accepts_fuzz():
    # ten thousand corruption rounds, wide digest: never accept a wrong matrix
    p = pk.Pmf.uniform(2)
    code = cd.build_inner_code(p, 4, 1.0, cu_size=1 << 2)
    side = cd.hamming_ball_rule(2, radius=1)
    h = cd.MatrixHasher(96, seed=11, alphabet_size=2, l=4, m=4)
    rng = np.random.default_rng(12)
    wrong = 0
    for _ in range(10_000):
        truth = rng.integers(0, 2, size=(4, 4))
        khat = truth.copy()
        for t in rng.choice(4, size=int(rng.integers(0, 3)), replace=False):
            khat[t] = rng.integers(0, 2, size=4)
        res = cd.outer_decode(khat, [0] * 4, h.digest(truth), code, side, 2, h)
        if res.status == "ok" and not np.array_equal(res.matrix, truth):
            wrong += 1
    assert wrong == 0


# ---------------------------------------------------------------------------
# candidate rules and multiplexing
# ---------------------------------------------------------------------------

def test_prefix_flip_rule_positions():
    p = pk.Pmf.uniform(2)
    code = cd.build_inner_code(p, 8, 1.0, cu_size=1 << 3,
                               codebook=cd.FullCubeCode(2, 8))
    rule = cd.prefix_flip_rule(code, 2)
    row = np.zeros(8, dtype=int)
    cands = rule(0, row, 0)
    assert len(cands) == 3  # one flip per address position
    for cand in cands:
        diff = np.flatnonzero(cand != row)
        assert diff.shape == (1,) and diff[0] < 3
    with pytest.raises(ValueError):
        cd.prefix_flip_rule(cd.build_inner_code(p, 8, 0.25), 2)


def test_hamming_ball_rule_radius_two():
    rule = cd.hamming_ball_rule(2, radius=2)
    row = np.zeros(3, dtype=int)
    cands = rule(0, row, 0)
    assert len(cands) == 3 + 3  # three singles, three pairs


def test_multiplex_inputs():
    u = np.array([[0, 1], [1, 0]])
    v = np.array([[1, 1], [0, 0]])
    # deterministic x = u
    p_xu = np.zeros((2, 2, 2))
    for uu in range(2):
        p_xu[uu, :, uu] = 1.0
    assert np.array_equal(cd.multiplex_inputs(u, v, p_xu, seed=0), u)
    # degenerate v alphabet reduces to p(x|u)
    p2 = np.zeros((2, 1, 2))
    p2[0, 0] = [0.5, 0.5]
    p2[1, 0] = [0.0, 1.0]
    out = cd.multiplex_inputs(u, np.zeros_like(u), p2, seed=1)
    assert np.all(out[u == 1] == 1)


def test_multiplex_conditional_frequencies():
    rng = np.random.default_rng(4)
    m, l = 100, 100
    u = rng.integers(0, 2, size=(m, l))
    v = rng.integers(0, 2, size=(m, l))
    p = np.zeros((2, 2, 2))
    p[:, :, 1] = [[0.1, 0.4], [0.6, 0.9]]
    p[:, :, 0] = 1.0 - p[:, :, 1]
    x = cd.multiplex_inputs(u, v, p, seed=5)
    for uu in range(2):
        for vv in range(2):
            mask = (u == uu) & (v == vv)
            n = int(mask.sum())
            freq = float(x[mask].mean())
            target = p[uu, vv, 1]
            sigma = math.sqrt(target * (1 - target) / n)
            assert abs(freq - target) <= 4 * sigma
