"""Monte Carlo harness: end-to-end chains and statistical validation runs.

Reproducibility contract: every trial derives its own generator from
(master seed, trial index), aggregation is a sum of per-trial counters,
and thread pools only change scheduling, never results. Statistical pass
thresholds are three sigmas (or significance 0.01 for chi-square tests)
and are recorded in every report.

The private links are ideal rate-counted pipes: residual bits always
arrive (a capacity shortfall is flagged, not simulated as loss), while
the digest is truncated to whatever bit budget remains below the
configured capacity. Shrinking the budget therefore degrades the outer
decoder gracefully, which is what the capacity-slack regression checks.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from . import bounds as _bounds
from . import codec as _codec
from . import dueck as _dueck
from . import exponent as _exponent
from .probkit import Dmc, JointPmf, Pmf, conditional_entropy, entropy

_LN2 = math.log(2.0)


@dataclass
class TrialStats:
    """Aggregated outcome of a simulation run (rates are frequencies)."""

    trials: int
    m: int
    l: int
    seed: int
    inner_error_rate: tuple
    block_error_rate: tuple
    matrix_failure_rate: tuple
    wrong_accepts: tuple
    rate_demand: tuple
    satellite_capacity: tuple
    rate_exceeded: tuple
    phi_bound: float
    phi_empirical: tuple
    s1_neq_s2_rate: float
    xi_block_expected: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "trials", "m", "l", "seed", "phi_bound", "s1_neq_s2_rate",
            "xi_block_expected")}
        for k in ("inner_error_rate", "block_error_rate", "matrix_failure_rate",
                  "wrong_accepts", "rate_demand", "satellite_capacity",
                  "rate_exceeded", "phi_empirical"):
            out[k] = list(getattr(self, k))
        out["extras"] = self.extras
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=float)


def _child_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)[0])


def _run_trials(trial_fn, trials: int, threads: int) -> list:
    if threads <= 1:
        return [trial_fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(trial_fn, range(trials)))


def _sample_pairs(rng, joint: JointPmf, m: int, l: int) -> tuple[np.ndarray, np.ndarray]:
    flat = joint.probs.ravel()
    idx = rng.choice(flat.shape[0], size=m * l, p=flat)
    s1 = (idx // joint.col_size).reshape(m, l)
    s2 = (idx % joint.col_size).reshape(m, l)
    return s1, s2


# ---------------------------------------------------------------------------
# end-to-end chain on the worked example (or a materialized fixture)
# ---------------------------------------------------------------------------

def simulate_dueck(
    source,
    sp: _bounds.SchemeParams,
    trials: int,
    seed: int,
    e_max: int = 2,
    hash_bits: int = 128,
    capacity_slack: float = 0.2,
    satellite_capacity: float | None = None,
    shared_alphabet: int | None = None,
    threads: int = 1,
) -> TrialStats:
    """Full chain: sample sub-block pairs, conditional-code them onto the
    shared deterministic channel, carry residuals and a digest on the
    private pipes, bin-decode, tally.

    source is the example's parameter triple, its exact class-mass form,
    or any materialized joint pmf fixture (a^k <= 4096 for dense work).
    """
    if isinstance(source, _dueck.DueckParams):
        joint = _dueck.build_source(source).materialize()
        a_sh = source.a if shared_alphabet is None else shared_alphabet
    elif isinstance(source, _dueck.DueckSource):
        joint = source.materialize()
        a_sh = source.params.a if shared_alphabet is None else shared_alphabet
    elif isinstance(source, JointPmf):
        joint = source
        a_sh = joint.row_size if shared_alphabet is None else shared_alphabet
    else:
        raise TypeError("source must be example parameters or a joint pmf")

    p_s1 = joint.row_marginal()
    la_target = int(math.floor(sp.l * sp.A / _LN2 + 1e-9))
    code = _codec.build_inner_code(
        p_s1, sp.l, sp.delta,
        cu_size=1 << la_target,
        codebook=_codec.FullCubeCode(a_sh, sp.l),
    )

    # satellite budget: residuals first, the digest gets the remainder
    demand_full = (code.lb_bits * sp.m + hash_bits) * _LN2 / (sp.m * sp.l)
    if satellite_capacity is None:
        satellite_capacity = demand_full * (1.0 + capacity_slack)
    budget_bits = int(math.floor(satellite_capacity * sp.m * sp.l / _LN2 + 1e-9))
    digest_bits = max(0, min(hash_bits, budget_bits - code.lb_bits * sp.m))
    rate_exceeded = code.lb_bits * sp.m > budget_bits
    demand = (code.lb_bits * sp.m + digest_bits) * _LN2 / (sp.m * sp.l)

    try:
        side = _codec.prefix_flip_rule(code, p_s1.alphabet_size)
    except ValueError:
        side = _codec.hamming_ball_rule(p_s1.alphabet_size, radius=1)

    jk = joint.probs
    xi = max(0.0, 1.0 - float(np.trace(jk)))
    xi_block = _bounds.xi_l(xi, sp.l)
    phi_bound = min(1.0, xi_block + _bounds.tau_l_delta(p_s1, sp.l, sp.delta))

    hashers = [
        _codec.MatrixHasher(digest_bits, _child_seed(seed, 0xD1, j), joint.row_size, sp.l, sp.m)
        for j in (1, 2)
    ]

    def one_trial(t: int) -> dict:
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), int(t))))
        s1, s2 = _sample_pairs(rng, joint, sp.m, sp.l)
        mats = (s1, s2)
        counters = {
            "rows_mismatch": int((s1 != s2).any(axis=1).sum()),
            "inner": [0, 0], "rows_wrong": [0, 0], "matrix_fail": [0, 0],
            "wrong_accept": [0, 0],
        }
        enc = [[code.encode(mats[j][t_]) for t_ in range(sp.m)] for j in (0, 1)]
        u = [np.stack([e.codeword for e in enc[j]]) for j in (0, 1)]
        y = np.where(u[0] == u[1], u[0], 0)

        for j in (0, 1):
            khat = np.empty_like(s1)
            for t_ in range(sp.m):
                dec = code.decode_exact(y[t_])
                row = code.reconstruct(dec.index, enc[j][t_].residual)
                khat[t_] = 0 if row is None else row
            bad = (khat != s1).any(axis=1)
            counters["inner"][j] = int(bad.sum())
            envelope = (s1 != s2).any(axis=1) | np.array(
                [e.atypical for e in enc[0]], dtype=bool)
            if not bool(np.all(~bad | envelope)):
                raise AssertionError(
                    "an inner error escaped the mismatch/atypicality envelope")

            digest = hashers[j].digest(mats[j])
            residuals = [e.residual for e in enc[j]]
            result = _codec.outer_decode(khat, residuals, digest, code, side,
                                         e_max, hashers[j])
            final = result.matrix if result.status == "ok" else khat
            wrong_rows = int((final != mats[j]).any(axis=1).sum())
            counters["rows_wrong"][j] = wrong_rows
            counters["matrix_fail"][j] = int(wrong_rows > 0)
            if result.status == "ok" and not np.array_equal(result.matrix, mats[j]):
                counters["wrong_accept"][j] = 1
        return counters

    results = _run_trials(one_trial, trials, threads)
    total_rows = trials * sp.m
    inner = tuple(sum(r["inner"][j] for r in results) / total_rows for j in (0, 1))
    rows_wrong = tuple(sum(r["rows_wrong"][j] for r in results) / total_rows for j in (0, 1))
    mat_fail = tuple(sum(r["matrix_fail"][j] for r in results) / trials for j in (0, 1))
    wrong_acc = tuple(sum(r["wrong_accept"][j] for r in results) for j in (0, 1))
    mismatch = sum(r["rows_mismatch"] for r in results) / total_rows

    return TrialStats(
        trials=trials, m=sp.m, l=sp.l, seed=seed,
        inner_error_rate=inner,
        block_error_rate=rows_wrong,
        matrix_failure_rate=mat_fail,
        wrong_accepts=wrong_acc,
        rate_demand=(demand, demand),
        satellite_capacity=(satellite_capacity, satellite_capacity),
        rate_exceeded=(rate_exceeded, rate_exceeded),
        phi_bound=phi_bound,
        phi_empirical=inner,
        s1_neq_s2_rate=mismatch,
        xi_block_expected=xi_block,
        extras={
            "e_max": e_max, "digest_bits": digest_bits, "hash_bits": hash_bits,
            "la_bits": code.la_bits, "lb_bits": code.lb_bits,
            "xi_symbol": xi,
        },
    )


# ---------------------------------------------------------------------------
# generic layered pipeline with interleaved outer codebooks
# ---------------------------------------------------------------------------

def simulate_generic(
    inst: _bounds.ProblemInstance,
    sp: _bounds.SchemeParams,
    trials: int,
    seed: int,
    e_max: int = 1,
    hash_bits: int = 96,
    threads: int = 1,
    probe_column: int = 0,
    solver_opts: dict | None = None,
) -> TrialStats:
    """Layered pipeline on an arbitrary instance at desk scale.

    The cloud-center codebook is constant composition with ML decoding
    over the induced channel; the outer layer is transmitted but
    validated at the channel level: the interleaved (V, Y) column law is
    compared against its ideal single-letter law in total variation and
    estimated mutual information, per the rate-loss bound it must obey.
    """
    comp = np.round(inst.p_u.probs * sp.l).astype(int)
    if comp.sum() != sp.l or not _bounds.is_type_of(inst.p_u, sp.l):
        raise ValueError("p_U must be a type of denominator l")
    end_to_end = (
        inst.k_size == inst.source.row_size == inst.source.col_size
        and np.array_equal(inst.f1, np.arange(inst.source.row_size))
        and np.array_equal(inst.f2, np.arange(inst.source.col_size))
    )
    p_k1 = inst.p_k1()
    n_words = max(1, int(math.floor(math.exp(sp.l * sp.A))))
    cc = _codec.sample_constant_composition(
        tuple(int(c) for c in comp), sp.A, sp.l, _child_seed(seed, 0xCC),
        n_codewords=min(n_words, _codec.type_class_size(comp)))
    code = _codec.build_inner_code(p_k1, sp.l, sp.delta, codebook=cc)

    induced = (inst.induced_to_user(1), inst.induced_to_user(2))
    side = _codec.hamming_ball_rule(p_k1.alphabet_size, radius=1)
    phi_bound = _bounds.phi_total(inst, sp, solver_opts=solver_opts)

    nx1, nx2 = inst.nx
    ny1, ny2 = inst.ny
    wflat = inst.ic.reshape(nx1 * nx2, ny1 * ny2)
    wcum = np.cumsum(wflat, axis=1)
    sizes = (inst.source.row_size, inst.source.col_size)
    hashers = [
        _codec.MatrixHasher(hash_bits, _child_seed(seed, 0xD1, j), sizes[j - 1], sp.l, sp.m)
        for j in (1, 2)
    ]
    f_maps = (inst.f1, inst.f2)
    p_vs = (inst.p_v1, inst.p_v2)
    px_uv = (inst.p_x1_given_uv1, inst.p_x2_given_uv2)
    nv = (len(inst.p_v1), len(inst.p_v2))

    vy_counts = [np.zeros((nv[0], ny1), dtype=np.int64),
                 np.zeros((nv[1], ny2), dtype=np.int64)]

    def one_trial(t: int) -> dict:
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), int(t))))
        s1, s2 = _sample_pairs(rng, inst.source, sp.m, sp.l)
        mats = (s1, s2)
        kmats = (f_maps[0][s1], f_maps[1][s2])
        counters = {
            "rows_mismatch": int((kmats[0] != kmats[1]).any(axis=1).sum()),
            "inner": [0, 0], "rows_wrong": [0, 0], "matrix_fail": [0, 0],
            "wrong_accept": [0, 0],
            "vy": [np.zeros((nv[0], ny1), dtype=np.int64),
                   np.zeros((nv[1], ny2), dtype=np.int64)],
        }
        perms = _codec.draw_permutations(sp.m, sp.l, _child_seed(seed, t, 0x9E))

        enc, u_m, v_m, x_m = [], [], [], []
        for j in (0, 1):
            enc_j = [code.encode(kmats[j][t_]) for t_ in range(sp.m)]
            u_j = np.stack([e.codeword for e in enc_j])
            vpi = rng.choice(nv[j], size=(sp.m, sp.l), p=p_vs[j].probs)
            v_j = _codec.deinterleave(vpi, perms)
            x_j = _codec.multiplex_inputs(u_j, v_j, px_uv[j], _child_seed(seed, t, 0x58, j))
            enc.append(enc_j)
            u_m.append(u_j)
            v_m.append(v_j)
            x_m.append(x_j)

        pair = (x_m[0] * nx2 + x_m[1]).ravel()
        r = rng.random(pair.shape[0])
        y_pair = (wcum[pair] > r[:, None]).argmax(axis=1).reshape(sp.m, sp.l)
        y = (y_pair // ny2, y_pair % ny2)

        for j in (0, 1):
            khat = np.empty_like(kmats[0])
            for t_ in range(sp.m):
                dec = code.decode_ml(y[j][t_], induced[j])
                row = code.reconstruct(dec.index, enc[j][t_].residual)
                khat[t_] = 0 if row is None else row
            counters["inner"][j] = int((khat != kmats[0]).any(axis=1).sum())

            if end_to_end:
                # binning recovery only lines up when K is the source itself
                digest = hashers[j].digest(mats[j])
                residuals = [e.residual for e in enc[j]]
                result = _codec.outer_decode(khat, residuals, digest, code, side,
                                             e_max, hashers[j])
                final = result.matrix if result.status == "ok" else khat
                wrong_rows = int((final != mats[j]).any(axis=1).sum())
                counters["rows_wrong"][j] = wrong_rows
                counters["matrix_fail"][j] = int(wrong_rows > 0)
                if result.status == "ok" and not np.array_equal(result.matrix, mats[j]):
                    counters["wrong_accept"][j] = 1

            vpi_j = _codec.interleave(v_m[j], perms)
            ypi_j = _codec.interleave(y[j], perms)
            np.add.at(counters["vy"][j], (vpi_j[:, probe_column], ypi_j[:, probe_column]), 1)
        return counters

    results = _run_trials(one_trial, trials, threads)
    total_rows = trials * sp.m
    for r in results:
        vy_counts[0] += r["vy"][0]
        vy_counts[1] += r["vy"][1]

    quality = {}
    for j in (1, 2):
        counts = vy_counts[j - 1]
        n = int(counts.sum())
        emp = counts / n
        ideal = inst.ideal_joint_vy(j).probs
        tv = 0.5 * float(np.abs(emp - ideal).sum())
        sigma_tv = 0.5 * float(np.sqrt(ideal * (1.0 - ideal) / n).sum())
        i_ideal = entropy(JointPmf(ideal / ideal.sum()).col_marginal()) - \
            conditional_entropy(JointPmf(ideal / ideal.sum()))
        emp_j = JointPmf(emp / emp.sum())
        i_plug = entropy(emp_j.col_marginal()) - conditional_entropy(emp_j)
        # Miller-Madow style first-order bias removal for the plug-in MI
        bias = (counts.shape[0] - 1) * (counts.shape[1] - 1) / (2.0 * n)
        i_emp = max(0.0, i_plug - bias)
        with np.errstate(divide="ignore", invalid="ignore"):
            pv = ideal.sum(axis=1, keepdims=True)
            py = ideal.sum(axis=0, keepdims=True)
            ratio = np.where(ideal > 0.0, ideal / (pv * py), 1.0)
            terms = np.where(ideal > 0.0, np.log(ratio), 0.0)
        var_mi = float((ideal * terms * terms).sum() - i_ideal ** 2)
        sigma_mi = math.sqrt(max(0.0, var_mi) / n) + bias
        lc = _bounds.loss_channel("thm1", min(phi_bound, 0.499999),
                                  u=len(inst.p_u), y=(ny1 if j == 1 else ny2))
        quality[f"user{j}"] = {
            "tv": tv, "tv_threshold": phi_bound + 3.0 * sigma_tv,
            "mi_ideal": i_ideal, "mi_empirical": i_emp,
            "mi_gap": i_ideal - i_emp,
            "mi_gap_threshold": lc + 3.0 * sigma_mi,
            "samples": n,
        }

    inner = tuple(sum(r["inner"][j] for r in results) / total_rows for j in (0, 1))
    rows_wrong = tuple(sum(r["rows_wrong"][j] for r in results) / total_rows for j in (0, 1))
    mat_fail = tuple(sum(r["matrix_fail"][j] for r in results) / trials for j in (0, 1))
    wrong_acc = tuple(sum(r["wrong_accept"][j] for r in results) for j in (0, 1))
    mismatch = sum(r["rows_mismatch"] for r in results) / total_rows
    demand = (code.lb_bits * sp.m + hash_bits) * _LN2 / (sp.m * sp.l)
    xi_block = _bounds.xi_l(inst.xi_k(), sp.l)

    return TrialStats(
        trials=trials, m=sp.m, l=sp.l, seed=seed,
        inner_error_rate=inner,
        block_error_rate=rows_wrong,
        matrix_failure_rate=mat_fail,
        wrong_accepts=wrong_acc,
        rate_demand=(demand, demand),
        satellite_capacity=(math.inf, math.inf),
        rate_exceeded=(False, False),
        phi_bound=phi_bound,
        phi_empirical=inner,
        s1_neq_s2_rate=mismatch,
        xi_block_expected=xi_block,
        extras={
            "e_max": e_max, "digest_bits": hash_bits,
            "la_bits": code.la_bits, "lb_bits": code.lb_bits,
            "channel_quality": quality,
        },
    )


# ---------------------------------------------------------------------------
# statistical validation runs
# ---------------------------------------------------------------------------

@dataclass
class InterleaveReport:
    pooled_stat: float
    pooled_df: int
    pooled_p: float
    column_p: list
    independence_p: float
    significance: float
    interleaved: bool

    @property
    def passed(self) -> bool:
        return self.pooled_p > self.significance and self.independence_p > self.significance

    def to_dict(self) -> dict:
        return {
            "pooled_stat": self.pooled_stat, "pooled_df": self.pooled_df,
            "pooled_p": self.pooled_p, "column_p": self.column_p,
            "independence_p": self.independence_p,
            "significance": self.significance, "interleaved": self.interleaved,
            "passed": self.passed,
        }


def interleave_iid_test(position_pmfs, m: int, seed: int,
                        significance: float = 0.01,
                        interleaved: bool = True) -> InterleaveReport:
    """Chi-square columns of a (de)interleaved iid-row matrix against the
    position mixture, plus a disjoint-pair independence table.

    position_pmfs is the per-position product law of one row. With
    interleaved=False the raw columns are tested instead, which is the
    adversarial control: it must fail whenever the law is position
    dependent.
    """
    pmfs = list(position_pmfs)
    l = len(pmfs)
    k = len(pmfs[0])
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x17)))
    cols = [rng.choice(k, size=m, p=pm.probs) for pm in pmfs]
    mat = np.stack(cols, axis=1)
    if interleaved:
        perms = _codec.draw_permutations(m, l, _child_seed(seed, 0x9E))
        mat = _codec.interleave(mat, perms)
    mixture = np.mean([pm.probs for pm in pmfs], axis=0)

    support = mixture > 0.0
    expected = mixture[support] * m
    df = int(support.sum()) - 1
    pooled_stat = 0.0
    pooled_df = 0
    column_p = []
    for i in range(l):
        observed = np.bincount(mat[:, i], minlength=k)[support]
        if df == 0:
            # single-symbol mixture: the match is exact by construction
            column_p.append(1.0)
            continue
        stat = float(((observed - expected) ** 2 / expected).sum())
        pooled_stat += stat
        pooled_df += df
        column_p.append(float(sstats.chi2.sf(stat, df)))
    pooled_p = float(sstats.chi2.sf(pooled_stat, pooled_df)) if pooled_df > 0 else 1.0

    # independence across rows: disjoint consecutive pairs within column 0
    a = mat[0:(m // 2) * 2:2, 0]
    b = mat[1:(m // 2) * 2:2, 0]
    table = np.zeros((k, k), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    keep_r = table.sum(axis=1) > 0
    keep_c = table.sum(axis=0) > 0
    sub = table[np.ix_(keep_r, keep_c)]
    if sub.shape[0] > 1 and sub.shape[1] > 1:
        independence_p = float(sstats.chi2_contingency(sub).pvalue)
    else:
        independence_p = 1.0

    return InterleaveReport(
        pooled_stat=pooled_stat, pooled_df=pooled_df, pooled_p=pooled_p,
        column_p=column_p, independence_p=independence_p,
        significance=significance, interleaved=interleaved,
    )


@dataclass
class CcExponentReport:
    rate: float
    exponent: float
    bound: float
    empirical: float
    errors: int
    decoded: int
    codebooks: int

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound

    def to_dict(self) -> dict:
        return {
            "rate": self.rate, "exponent": self.exponent, "bound": self.bound,
            "empirical": self.empirical, "errors": self.errors,
            "decoded": self.decoded, "codebooks": self.codebooks,
            "passed": self.passed,
        }


def cc_exponent_test(channel: Dmc, composition, rate: float, l: int,
                     codebooks: int, trials_per_book: int, seed: int,
                     solver_opts: dict | None = None,
                     max_codewords: int = 1 << 20) -> CcExponentReport:
    """Ensemble-average ML error of constant-composition codes against
    2 exp(-l E_r(R)); a rate at or above capacity makes the bound vacuous
    and the test auto-passes. Codebooks are capped at max_codewords (a
    subsampled ensemble keeps the empirical mean honest; exp(lR) words at
    high rates would dwarf memory)."""
    comp = tuple(int(c) for c in composition)
    if sum(comp) != l:
        raise ValueError("composition must sum to the block length")
    p_u = Pmf(np.array(comp, dtype=float) / l)
    opts = solver_opts or {}
    er = _exponent.random_coding_exponent(_exponent.ExponentQuery(
        rate=rate, input_pmf=p_u, channel=channel, **opts))
    bound = 2.0 * math.exp(-l * er)

    n_words = max(2, int(math.floor(math.exp(l * rate))))
    n_words = min(n_words, _codec.type_class_size(comp), int(max_codewords))
    wcum = np.cumsum(channel.rows, axis=1)
    with np.errstate(divide="ignore"):
        logw = np.where(channel.rows > 0.0,
                        np.log(np.maximum(channel.rows, 1e-320)), -1e30)

    errors = 0
    decoded = 0
    for b in range(codebooks):
        book = _codec.sample_constant_composition(
            comp, rate, l, _child_seed(seed, 0xB0, b), n_codewords=n_words)
        words = book.codewords
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x7A, b)))
        sent = rng.integers(0, n_words, size=trials_per_book)
        tx = words[sent]
        r = rng.random(tx.shape)
        y = (wcum[tx.ravel()] > r.ravel()[:, None]).argmax(axis=1).reshape(tx.shape)
        chunk = max(1, int(2_000_000 // max(1, n_words)))
        for s in range(0, trials_per_book, chunk):
            ys = y[s:s + chunk]
            scores = logw[words[:, None, :], ys[None, :, :]].sum(axis=2)
            dec = scores.argmax(axis=0)
            errors += int((dec != sent[s:s + chunk]).sum())
            decoded += ys.shape[0]

    empirical = errors / decoded if decoded else 0.0
    return CcExponentReport(rate=float(rate), exponent=float(er), bound=float(bound),
                            empirical=float(empirical), errors=errors,
                            decoded=decoded, codebooks=codebooks)
