"""Random coding exponent for constant-composition codes.

The exponent is the minimum over test channels V of

    D(V || W | p) + |I(p; V) - R|+

which is convex in V. The kink is handled by splitting into two smooth
convex subproblems and combining their values:

  * minimize D(V||W|p) + I(p;V) - R unconstrained; this value is the true
    objective whenever its minimizer satisfies I(p;V) >= R, and is used
    only then (below R it undershoots the objective and must be dropped);
  * minimize D(V||W|p) subject to I(p;V) <= R, solved by bisecting the
    penalty weight lam in D + lam*I until the constraint is active.

Both subproblems reduce to minimizing D + lam*I, solved by alternating
closed-form updates: hold the output pmf q fixed and set each row of V to
the normalized geometric mixture W^(1/(1+lam)) * q^(lam/(1+lam)), then
refresh q as the output marginal of V. Each step is the exact minimizer
of the coordinate, so this is exponentiated-gradient descent with the
step length solved in closed form; the objective is convex so restarts
only serve as cheap insurance.

The module also provides the channel a user code sees when both encoders
transmit the same cloud-center word, and the two-user miss bound built
from the exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .probkit import Dmc, Pmf, conditional_kl, mutual_information

_ACTIVE_TOL = 1e-9


class ExponentError(RuntimeError):
    """Raised when the solver hits its iteration cap; carries the best value."""

    def __init__(self, message: str, best: float):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class ExponentQuery:
    """Arguments of one exponent evaluation."""

    rate: float
    input_pmf: Pmf
    channel: Dmc
    tolerance: float = 1e-6
    max_iters: int = 100_000
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.rate < 0.0:
            raise ValueError("rate must be non-negative")
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")
        if len(self.input_pmf) != self.channel.num_inputs:
            raise ValueError("input pmf size does not match channel input alphabet")


def _objective(v_rows: np.ndarray, w: Dmc, p: Pmf, lam: float) -> float:
    v = Dmc(v_rows / v_rows.sum(axis=1, keepdims=True))
    return conditional_kl(v, w, p) + lam * mutual_information(p, v)


def _minimize_d_plus_lambda_i(
    p: np.ndarray,
    w: np.ndarray,
    lam: float,
    tol: float,
    max_iters: int,
    v0: np.ndarray | None = None,
) -> tuple[np.ndarray, float, float, int]:
    """Minimize D(V||W|p) + lam*I(p;V) by alternating closed-form steps.

    Returns (V, D, I, iterations). Rows with p(u) = 0 are pinned to W.
    """
    active = p > 0.0
    v = w.copy() if v0 is None else v0.copy()
    v[~active] = w[~active]
    a = 1.0 / (1.0 + lam)
    prev = math.inf
    iters = 0
    for iters in range(1, max_iters + 1):
        q = p @ v
        # geometric-mixture row update; support stays inside support(W)
        with np.errstate(divide="ignore"):
            logw = np.where(w > 0.0, np.log(np.maximum(w, 1e-320)), -np.inf)
            logq = np.where(q > 0.0, np.log(np.maximum(q, 1e-320)), -np.inf)
        logv = a * logw + (1.0 - a) * logq[None, :]
        logv[~np.isfinite(logv)] = -np.inf
        shift = logv.max(axis=1, keepdims=True)
        vn = np.exp(logv - shift)
        vn /= vn.sum(axis=1, keepdims=True)
        v = np.where(active[:, None], vn, w)

        d_val, i_val = _d_and_i(p, v, w)
        cur = d_val + lam * i_val
        if abs(prev - cur) <= tol * max(1.0, abs(cur)):
            return v, d_val, i_val, iters
        prev = cur
    d_val, i_val = _d_and_i(p, v, w)
    return v, d_val, i_val, iters


def _d_and_i(p: np.ndarray, v: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    mask = v > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        d_terms = np.where(mask, v * (np.log(np.maximum(v, 1e-320)) - np.log(np.maximum(w, 1e-320))), 0.0)
    d_val = float((p[:, None] * d_terms).sum())
    q = p @ v
    with np.errstate(divide="ignore", invalid="ignore"):
        i_terms = np.where(mask & (q[None, :] > 0.0),
                           v * (np.log(np.maximum(v, 1e-320)) - np.log(np.maximum(q, 1e-320))[None, :]),
                           0.0)
    i_val = float((p[:, None] * i_terms).sum())
    return max(0.0, d_val), max(0.0, i_val)


def random_coding_exponent(q: ExponentQuery) -> float:
    """E_r(R, p, W) >= 0, within the query tolerance."""
    p = q.input_pmf.probs.copy()
    w = q.channel.rows.copy()
    rate = float(q.rate)
    i_w = mutual_information(q.input_pmf, q.channel)
    if rate >= i_w - _ACTIVE_TOL:
        return 0.0

    tol_inner = min(q.tolerance * 1e-3, 1e-10)
    budget = q.max_iters
    spent = 0
    candidates: list[float] = []
    rng = np.random.default_rng(q.seed)

    # unconstrained branch: min D + I - R, valid when its minimizer has I >= R
    best_unc = None
    inits: list[np.ndarray | None] = [None]
    for _ in range(max(0, q.restarts - 1)):
        rnd = rng.random(w.shape) * (w > 0.0)
        rnd /= np.maximum(rnd.sum(axis=1, keepdims=True), 1e-300)
        inits.append(rnd)
    for v0 in inits:
        v, d_val, i_val, used = _minimize_d_plus_lambda_i(p, w, 1.0, tol_inner, budget - spent, v0)
        spent += used
        val = d_val + i_val
        if best_unc is None or val < best_unc[0]:
            best_unc = (val, i_val)
        if spent >= budget:
            raise ExponentError("iteration cap reached in unconstrained branch",
                                best=max(0.0, (best_unc[0] - rate) if best_unc else math.inf))
    assert best_unc is not None
    if best_unc[1] >= rate - _ACTIVE_TOL:
        candidates.append(best_unc[0] - rate)

    # constrained branch: min D subject to I <= R, penalty weight bisection
    lo, hi = 0.0, 1.0
    v_warm = w.copy()
    i_hi = i_w
    found_hi = False
    for _ in range(80):
        v_warm, d_hi, i_hi, used = _minimize_d_plus_lambda_i(p, w, hi, tol_inner, budget - spent, v_warm)
        spent += used
        if spent >= budget:
            raise ExponentError("iteration cap reached while bracketing",
                                best=max(0.0, min(candidates) if candidates else d_hi))
        if i_hi <= rate:
            found_hi = True
            break
        lo = hi
        hi *= 2.0
    if found_hi:
        d_at = d_hi
        for _ in range(200):
            if abs(i_hi - rate) <= max(1e-12, _ACTIVE_TOL * max(1.0, rate)):
                break
            mid = 0.5 * (lo + hi)
            v_warm, d_mid, i_mid, used = _minimize_d_plus_lambda_i(p, w, mid, tol_inner, budget - spent, v_warm)
            spent += used
            if spent >= budget:
                raise ExponentError("iteration cap reached in bisection",
                                    best=max(0.0, min(candidates + [d_mid])))
            if i_mid > rate:
                lo = mid
            else:
                hi = mid
                d_at, i_hi = d_mid, i_mid
        candidates.append(d_at)
    # else: no absolutely-continuous V reaches I <= R (e.g. noiseless rows);
    # the unconstrained branch is then valid because I stays above R.

    if not candidates:
        raise ExponentError("no valid branch produced a value", best=math.inf)
    return max(0.0, min(candidates))


def is_deterministic_injective(w: Dmc) -> bool:
    """True when every input maps to its own sure output symbol."""
    rows = w.rows
    tops = rows.argmax(axis=1)
    if not np.all(rows[np.arange(rows.shape[0]), tops] >= 1.0 - 1e-12):
        return False
    return len(set(tops.tolist())) == rows.shape[0]


def induced_channel(
    p_v1: Pmf,
    p_v2: Pmf,
    p_x1_given_uv1,
    p_x2_given_uv2,
    ic: Dmc,
    j: int,
    ic_output_sizes: tuple[int, int] | None = None,
) -> Dmc:
    """Channel from the shared word u to decoder j's output, both users sending u.

    p_xj_given_uvj has shape (|U|, |Vj|, |Xj|) with stochastic last axis.
    ic has paired inputs (x1, x2) row-major. When ic_output_sizes=(n1, n2)
    is given its outputs are paired row-major and the marginal to user j
    is taken; otherwise the outputs are already decoder j's observation.
    """
    if j not in (1, 2):
        raise ValueError("user index must be 1 or 2")
    px1 = np.asarray(p_x1_given_uv1, dtype=float)
    px2 = np.asarray(p_x2_given_uv2, dtype=float)
    if px1.ndim != 3 or px2.ndim != 3:
        raise ValueError("p_x_given_uv must have shape (|U|, |V|, |X|)")
    nu = px1.shape[0]
    if px2.shape[0] != nu:
        raise ValueError("the two input maps disagree on |U|")
    if px1.shape[1] != len(p_v1) or px2.shape[1] != len(p_v2):
        raise ValueError("p_x_given_uv shape does not match its V pmf")
    nx1, nx2 = px1.shape[2], px2.shape[2]
    if ic.num_inputs != nx1 * nx2:
        raise ValueError("channel input alphabet does not match |X1|*|X2|")
    w = ic.rows
    if ic_output_sizes is not None:
        ny1, ny2 = ic_output_sizes
        if ny1 * ny2 != ic.num_outputs:
            raise ValueError("output sizes do not match the channel output alphabet")
        w = ic.rows.reshape(nx1 * nx2, ny1, ny2).sum(axis=2 if j == 1 else 1)

    mix1 = np.einsum("v,uvx->ux", p_v1.probs, px1)
    mix2 = np.einsum("v,uvx->ux", p_v2.probs, px2)
    rows = np.empty((nu, w.shape[1]))
    for u in range(nu):
        pair = np.outer(mix1[u], mix2[u]).reshape(-1)
        rows[u] = pair @ w
    rows /= rows.sum(axis=1, keepdims=True)
    return Dmc(rows)


def g_rho_l(
    l,
    a_rate: float,
    rho: float,
    p_u: Pmf,
    induced: tuple[Dmc, Dmc],
    tolerance: float = 1e-6,
    max_iters: int = 100_000,
    restarts: int = 8,
    exact_zero_when_noiseless: bool = True,
) -> float:
    """Two-user bound sum_j exp{-l (E_r(A+rho, p, p_Yj|U) - rho)}, clamped to [0, 1].

    A deterministic injective induced channel is decoded without error, so
    its term is taken as exactly zero unless exact_zero_when_noiseless is
    cleared (useful when studying the exponent formula itself).
    """
    if not 0.0 < rho < a_rate:
        raise ValueError("rho must lie strictly inside (0, A)")
    if l < 1:
        raise ValueError("block length must be positive")
    lf = float(l) if l < 10**15 else math.inf
    total = 0.0
    for w in induced:
        if exact_zero_when_noiseless and is_deterministic_injective(w):
            continue
        er = random_coding_exponent(ExponentQuery(
            rate=a_rate + rho, input_pmf=p_u, channel=w,
            tolerance=tolerance, max_iters=max_iters, restarts=restarts,
        ))
        gap = er - rho
        if gap <= 0.0:
            return 1.0
        term_log = -lf * gap
        total += math.exp(term_log) if term_log > -745.0 else 0.0
        if total >= 1.0:
            return 1.0
    return min(1.0, total)
