"""Sufficient-condition formulas and checkers for the layered scheme.

Every checker returns a ConditionReport: a list of named inequalities with
left/right values, slacks, and satisfied flags, plus the miss-probability
bound phi that feeds the rate-loss terms. Comparisons use a configurable
guard band so boundary cases do not flap between runs; strict "<"
inequalities must clear the guard, ">=" ones may sit on it.

Quantities that can be astronomically small (the tau and xi terms of the
worked example at its natural scale) are carried as natural logs end to
end, so no comparison ever happens between raw underflowed floats. An
instance participates in the theorem checks through a small quantity
protocol (`thm1_quantities`), which the generic dense instance implements
with plain floats and the closed-form example implements in log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exponent as _exponent
from .probkit import (
    Dmc,
    JointPmf,
    Pmf,
    binary_entropy,
    conditional_entropy,
    entropy,
    least_positive_prob,
    push_joint,
)

DEFAULT_GUARD = 1e-12


# ---------------------------------------------------------------------------
# elementary bound formulas
# ---------------------------------------------------------------------------

def xi_l(xi: float, l) -> float:
    """Block mismatch probability 1-(1-xi)^l for an iid pair stream."""
    if not 0.0 <= xi <= 1.0:
        raise ValueError("xi must be a probability")
    if l < 1:
        raise ValueError("l must be a positive integer")
    if xi == 0.0:
        return 0.0
    if l > 10**15 or float(l) * xi > 700.0:
        val = 1.0
    else:
        val = -math.expm1(float(l) * math.log1p(-xi))
    if val > min(1.0, float(l) * xi if l < 10**15 else 1.0) + 1e-12:
        raise AssertionError("xi_l exceeded its l*xi bound")
    return val


def log_xi_l(log_xi: float, log_l: float) -> float:
    """log(1-(1-xi)^l) from log(xi) and log(l), safe at any scale.

    Works through t = l*log1p(-xi) < 0 without ever exponentiating log(l)
    alone, so astronomically long blocks are fine.
    """
    if log_xi == -math.inf:
        return -math.inf
    if log_xi >= 0.0:
        return 0.0  # xi = 1 makes the mismatch certain
    if log_xi > -700.0:
        log_neg = math.log(-math.log1p(-math.exp(log_xi)))
    else:
        log_neg = log_xi  # -log1p(-xi) = xi to double precision
    log_abs_t = log_l + log_neg
    if log_abs_t < -30.0:
        return log_abs_t  # 1 - e^t = -t here
    if log_abs_t > 3.7:
        t = -math.exp(min(log_abs_t, 709.0))
        return math.log1p(-math.exp(max(t, -745.0)))
    t = -math.exp(log_abs_t)
    return math.log(-math.expm1(t))


def tau_l_delta(p_k: Pmf, l, delta: float) -> float:
    """Atypicality bound 2|K| exp{-2 delta^2 p(a*)^2 l}, clamped to [0, 1]."""
    return min(1.0, math.exp(min(0.0, log_tau_l_delta(p_k, l, delta))))


def log_tau_l_delta(p_k: Pmf, l, delta: float) -> float:
    """Natural log of the unclamped atypicality bound."""
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    if l < 1:
        raise ValueError("l must be a positive integer")
    _, p_star = least_positive_prob(p_k)
    return log_tau_from_parts(math.log(2 * len(p_k)), math.log(p_star), math.log(l), delta)


def log_tau_from_parts(log_2k: float, log_p_star: float, log_l: float, delta: float) -> float:
    """log tau from log(2|K|), log p(a*), log l; robust at extreme scales."""
    exp_arg = math.log(2.0) + 2.0 * math.log(delta) + 2.0 * log_p_star + log_l
    decay = math.exp(exp_arg) if exp_arg < 709.0 else math.inf
    return (log_2k - decay) if decay < math.inf else -math.inf


def loss_source(phi: float, l, alphabet_size) -> float:
    """Extra source-coding rate (1/l) h_b(phi) + phi log|K|, nats per symbol."""
    return loss_source_from_log_size(phi, l, math.log(alphabet_size))


def loss_source_from_log_size(phi: float, l, log_size: float) -> float:
    if not 0.0 <= phi < 0.5:
        raise ValueError("loss_source requires phi in [0, 0.5)")
    inv_l = math.exp(-math.log(l)) if l > 10**15 else 1.0 / float(l)
    return inv_l * binary_entropy(phi) + phi * log_size


def loss_channel(
    variant: str,
    phi: float,
    *,
    u: int | None = None,
    y: int | None = None,
    x_own: int | None = None,
    x_other: int | None = None,
    uvw: int | None = None,
) -> float:
    """Outer-code rate loss from erroneous conditional coding.

    Variants (all use phi*log(1/phi) -> 0 at phi = 0):
      thm1: h_b(phi) + phi log|U| + |Y||U| phi log(1/phi)
      thm2: h_b(phi) + 5 phi log|UVW| + |UVW|^3 phi log(1/phi)
      thm3: h_b(phi) + phi log|U| + |Xj||Y||U|(1+|Xo|) phi log(1/phi)
    """
    if not 0.0 <= phi < 0.5:
        raise ValueError("loss_channel requires phi in [0, 0.5)")
    plp = 0.0 if phi == 0.0 else phi * math.log(1.0 / phi)
    hb = binary_entropy(phi)
    if variant == "thm1":
        if u is None or y is None:
            raise ValueError("thm1 variant needs sizes u and y")
        return hb + phi * math.log(u) + y * u * plp
    if variant == "thm2":
        if uvw is None:
            raise ValueError("thm2 variant needs the aggregate size uvw")
        return hb + 5.0 * phi * math.log(uvw) + float(uvw) ** 3 * plp
    if variant == "thm3":
        if u is None or y is None or x_own is None or x_other is None:
            raise ValueError("thm3 variant needs sizes u, y, x_own, x_other")
        return hb + phi * math.log(u) + x_own * y * u * (1 + x_other) * plp
    raise ValueError(f"unknown loss variant {variant!r}")


def _logaddexp(*vals: float) -> float:
    finite = [v for v in vals if v > -math.inf]
    if not finite:
        return -math.inf
    m = max(finite)
    return m + math.log(sum(math.exp(v - m) for v in finite))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Inequality:
    """One checked inequality; slack > 0 means satisfied with margin."""

    name: str
    left: float
    right: float
    kind: str = "lt"  # "lt" strict; "le"/"ge" allow equality within the guard
    scale: str = "linear"  # "log" when left/right are natural logs
    guard: float = DEFAULT_GUARD

    @property
    def slack(self) -> float:
        return self.left - self.right if self.kind == "ge" else self.right - self.left

    @property
    def satisfied(self) -> bool:
        if self.kind == "lt":
            return self.slack > self.guard
        if self.kind in ("le", "ge"):
            return self.slack >= -self.guard
        raise ValueError(f"unknown inequality kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "left": self.left,
            "right": self.right,
            "kind": self.kind,
            "scale": self.scale,
            "slack": self.slack,
            "satisfied": self.satisfied,
        }


@dataclass
class ConditionReport:
    """Outcome of one sufficient-condition check."""

    inequalities: tuple[Inequality, ...]
    phi: float
    log_phi: float
    status: str  # feasible | infeasible | infeasible-by-phi | indeterminate
    extras: dict = field(default_factory=dict)

    @property
    def overall(self) -> bool | None:
        if self.status == "indeterminate":
            return None
        verdict = all(iq.satisfied for iq in self.inequalities) and self.phi < 0.5
        if "hk_member" in self.extras:
            verdict = verdict and bool(self.extras["hk_member"])
        return verdict

    @property
    def min_slack(self) -> float:
        return min((iq.slack for iq in self.inequalities), default=-math.inf)

    def inequality(self, name: str) -> Inequality:
        for iq in self.inequalities:
            if iq.name == name:
                return iq
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "overall": self.overall,
            "phi": self.phi,
            "log_phi": self.log_phi,
            "min_slack": self.min_slack,
            "inequalities": [iq.to_dict() for iq in self.inequalities],
            "extras": self.extras,
        }


# ---------------------------------------------------------------------------
# scheme parameters and problem instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SchemeParams:
    """Fixed-block parameters of the layered code (rates in nats/symbol)."""

    l: int
    delta: float
    A: float
    B: float
    rho: float
    m: int = 1

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("l must be >= 1")
        if not self.delta > 0.0:
            raise ValueError("delta must be positive")
        if self.A < 0.0 or self.B < 0.0:
            raise ValueError("A and B must be non-negative")
        if not 0.0 < self.rho < self.A:
            raise ValueError("rho must lie strictly inside (0, A)")
        if self.m < 1:
            raise ValueError("m must be >= 1")


def is_type_of(p: Pmf, l: int, tol: float = 1e-9) -> bool:
    """True when every entry of p is an integer multiple of 1/l."""
    scaled = p.probs * l
    return bool(np.all(np.abs(scaled - np.round(scaled)) <= tol * l))


class ProblemInstance:
    """A dense generic source-channel instance.

    Fields follow the layered construction: a joint source, the per-user
    common-part maps f_j into a shared alphabet K, the interference
    channel as a 4-D array W[x1, x2, y1, y2], the shared-word pmf p_U (a
    type of denominator l), the per-user outer pmfs p_{Vj}, and the input
    synthesis kernels p_{Xj|U,Vj} with shape (|U|, |Vj|, |Xj|). Optional
    p_{Wj} marginals extend the instance for the rate-point check.
    """

    def __init__(
        self,
        source: JointPmf,
        f1,
        f2,
        ic,
        p_u: Pmf,
        p_v1: Pmf,
        p_v2: Pmf,
        p_x1_given_uv1,
        p_x2_given_uv2,
        k_size: int | None = None,
        p_w1: Pmf | None = None,
        p_w2: Pmf | None = None,
    ):
        self.source = source
        self.f1 = np.asarray(f1, dtype=int)
        self.f2 = np.asarray(f2, dtype=int)
        if self.f1.shape[0] != source.row_size or self.f2.shape[0] != source.col_size:
            raise ValueError("common-part maps must cover the source alphabets")
        inferred = int(max(self.f1.max(), self.f2.max())) + 1
        self.k_size = inferred if k_size is None else int(k_size)
        if self.k_size < inferred:
            raise ValueError("k_size smaller than the range of the maps")

        w = np.asarray(ic, dtype=float)
        if w.ndim != 4:
            raise ValueError("interference channel must be W[x1, x2, y1, y2]")
        sums = w.sum(axis=(2, 3))
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("interference channel rows must be stochastic")
        self.ic = w
        self.p_u = p_u
        self.p_v1 = p_v1
        self.p_v2 = p_v2
        self.p_w1 = p_w1
        self.p_w2 = p_w2
        self.p_x1_given_uv1 = np.asarray(p_x1_given_uv1, dtype=float)
        self.p_x2_given_uv2 = np.asarray(p_x2_given_uv2, dtype=float)
        for name, px, pv in (("user 1", self.p_x1_given_uv1, p_v1),
                             ("user 2", self.p_x2_given_uv2, p_v2)):
            if px.ndim != 3 or px.shape[0] != len(p_u) or px.shape[1] != len(pv):
                raise ValueError(f"{name} input kernel has a bad shape")
            if np.any(np.abs(px.sum(axis=2) - 1.0) > 1e-9):
                raise ValueError(f"{name} input kernel rows must be stochastic")
        if self.p_x1_given_uv1.shape[2] != w.shape[0] or self.p_x2_given_uv2.shape[2] != w.shape[1]:
            raise ValueError("input kernels do not match the channel input alphabets")
        self._cache: dict = {}

    # sizes -----------------------------------------------------------------
    @property
    def nx(self) -> tuple[int, int]:
        return int(self.ic.shape[0]), int(self.ic.shape[1])

    @property
    def ny(self) -> tuple[int, int]:
        return int(self.ic.shape[2]), int(self.ic.shape[3])

    @classmethod
    def from_paired_dmc(cls, source, f1, f2, ic_dmc: Dmc, output_sizes: tuple[int, int], **kw):
        ny1, ny2 = output_sizes
        nx_total = ic_dmc.num_inputs
        nx1 = kw.pop("nx1", None)
        if nx1 is None:
            raise ValueError("from_paired_dmc needs nx1 to unflatten the input pairing")
        nx2 = nx_total // nx1
        w = ic_dmc.rows.reshape(nx1, nx2, ny1, ny2)
        return cls(source, f1, f2, w, **kw)

    # derived quantities ----------------------------------------------------
    def joint_k(self) -> JointPmf:
        if "joint_k" not in self._cache:
            self._cache["joint_k"] = push_joint(
                self.source, self.f1, self.f2, self.k_size, self.k_size)
        return self._cache["joint_k"]

    def p_k1(self) -> Pmf:
        return self.joint_k().row_marginal()

    def xi_k(self) -> float:
        jk = self.joint_k().probs
        return max(0.0, 1.0 - float(np.trace(jk)))

    def marginal_ic(self, j: int) -> np.ndarray:
        """W_j[x1, x2, y_j], decoder j's view of the channel."""
        return self.ic.sum(axis=3 if j == 1 else 2)

    def induced_to_user(self, j: int) -> Dmc:
        """p(y_j | u) when both encoders transmit the same shared word."""
        key = ("induced", j)
        if key not in self._cache:
            nx1, nx2 = self.nx
            wj = Dmc(self.marginal_ic(j).reshape(nx1 * nx2, -1))
            self._cache[key] = _exponent.induced_channel(
                self.p_v1, self.p_v2, self.p_x1_given_uv1, self.p_x2_given_uv2, wj, j)
        return self._cache[key]

    def p_x_given_u(self, j: int) -> np.ndarray:
        if j == 1:
            return np.einsum("v,uvx->ux", self.p_v1.probs, self.p_x1_given_uv1)
        return np.einsum("v,uvx->ux", self.p_v2.probs, self.p_x2_given_uv2)

    def ideal_joint_vy(self, j: int) -> JointPmf:
        """Single-letter law of (V_j, Y_j) with both encoders on a common U."""
        wj = self.marginal_ic(j)  # (nx1, nx2, nyj)
        if j == 1:
            mix_other = self.p_x_given_u(2)  # (nu, nx2)
            chan = np.einsum("ub,aby->uay", mix_other, wj)  # (nu, nx1, nyj)
            cond = np.einsum("uva,uay->uvy", self.p_x1_given_uv1, chan)
            joint = np.einsum("u,v,uvy->vy", self.p_u.probs, self.p_v1.probs, cond)
        else:
            mix_other = self.p_x_given_u(1)  # (nu, nx1)
            chan = np.einsum("ua,aby->uby", mix_other, wj)  # (nu, nx2, nyj)
            cond = np.einsum("uvb,uby->uvy", self.p_x2_given_uv2, chan)
            joint = np.einsum("u,v,uvy->vy", self.p_u.probs, self.p_v2.probs, cond)
        total = joint.sum()
        return JointPmf(joint / total)

    def mutual_information_vy(self, j: int) -> float:
        jp = self.ideal_joint_vy(j)
        return entropy(jp.col_marginal()) - conditional_entropy(jp)

    def cond_mi_x_y_given_u(self, j: int) -> float:
        """I(X_j; Y_j | U) under p_U p_{X1|U} p_{X2|U} W."""
        wj = self.marginal_ic(j)
        own = self.p_x_given_u(j)
        other = self.p_x_given_u(2 if j == 1 else 1)
        total = 0.0
        for u in range(len(self.p_u)):
            pu = float(self.p_u.probs[u])
            if pu == 0.0:
                continue
            if j == 1:
                chan = np.einsum("b,aby->ay", other[u], wj)
            else:
                chan = np.einsum("a,aby->by", other[u], wj)
            joint = own[u][:, None] * chan
            jp = JointPmf(joint / joint.sum())
            total += pu * (entropy(jp.col_marginal()) - conditional_entropy(jp))
        return total

    def h_s_given_k1(self, j: int) -> float:
        """H(S_j | K_1) from the source pushforward."""
        if j == 1:
            # joint of (K1, S1): both coordinates are functions of S1
            p_s1 = self.source.row_marginal()
            joint = np.zeros((self.k_size, self.source.row_size))
            np.add.at(joint, (self.f1, np.arange(self.source.row_size)), p_s1.probs)
            return conditional_entropy(JointPmf(joint))
        # joint of (K1, S2): map the source rows through f1, keep columns
        return conditional_entropy(
            push_joint(self.source, self.f1, None, self.k_size, None))

    # quantity protocol -----------------------------------------------------
    def thm1_quantities(self, sp: SchemeParams, *, solver_opts: dict | None = None) -> dict:
        if not is_type_of(self.p_u, sp.l):
            raise ValueError("p_U must be a type of denominator l")
        opts = solver_opts or {}
        g = _exponent.g_rho_l(
            sp.l, sp.A, sp.rho, self.p_u,
            (self.induced_to_user(1), self.induced_to_user(2)), **opts)
        xi_block = xi_l(self.xi_k(), sp.l)
        return {
            "H_K1": entropy(self.p_k1()),
            "H_S_given_K1": (self.h_s_given_k1(1), self.h_s_given_k1(2)),
            "log_S_sizes": (math.log(self.source.row_size), math.log(self.source.col_size)),
            "u_size": len(self.p_u),
            "y_sizes": self.ny,
            "I_vy": (self.mutual_information_vy(1), self.mutual_information_vy(2)),
            "log_tau": log_tau_l_delta(self.p_k1(), sp.l, sp.delta),
            "log_xi_l": math.log(xi_block) if xi_block > 0.0 else -math.inf,
            "log_g": math.log(g) if g > 0.0 else -math.inf,
        }


def phi_total(inst: ProblemInstance, sp: SchemeParams, *, solver_opts: dict | None = None) -> float:
    """g + xi^[l](K pair) + tau_{l,delta}(K_1), clamped to [0, 1]."""
    opts = solver_opts or {}
    g = _exponent.g_rho_l(sp.l, sp.A, sp.rho, inst.p_u,
                          (inst.induced_to_user(1), inst.induced_to_user(2)), **opts)
    return min(1.0, g + xi_l(inst.xi_k(), sp.l) + tau_l_delta(inst.p_k1(), sp.l, sp.delta))


# ---------------------------------------------------------------------------
# theorem checkers
# ---------------------------------------------------------------------------

def _phi_from_logs(q: dict) -> tuple[float, float]:
    log_phi = min(0.0, _logaddexp(q["log_tau"], q["log_xi_l"], q["log_g"]))
    phi = math.exp(log_phi) if log_phi > -745.0 else 0.0
    return phi, log_phi


def check_thm1(inst, sp: SchemeParams, guard: float = DEFAULT_GUARD,
               phi_override: float | None = None, **quantity_opts) -> ConditionReport:
    """Separation-based sufficient conditions with per-user private streams.

    Accepts the dense ProblemInstance or any object implementing
    thm1_quantities(sp). phi_override substitutes the miss bound (analysis
    aid); everything else is computed from the instance.
    """
    q = inst.thm1_quantities(sp, **quantity_opts)
    phi, log_phi = _phi_from_logs(q)
    if phi_override is not None:
        phi = phi_override
        log_phi = math.log(phi) if phi > 0.0 else -math.inf
    ineqs = [Inequality("A+B >= (1+delta)*H(K1)", sp.A + sp.B,
                        (1.0 + sp.delta) * q["H_K1"], kind="ge", guard=guard)]
    phi_iq = Inequality("phi < 1/2", phi, 0.5, kind="lt", guard=guard)
    if phi >= 0.5:
        return ConditionReport(
            inequalities=tuple(ineqs + [phi_iq]), phi=phi, log_phi=log_phi,
            status="infeasible-by-phi",
            extras={"quantities": _q_summary(q)})
    for j in (1, 2):
        ls = loss_source_from_log_size(phi, sp.l, q["log_S_sizes"][j - 1])
        lc = loss_channel("thm1", phi, u=q["u_size"], y=q["y_sizes"][j - 1])
        left = sp.B + q["H_S_given_K1"][j - 1] + ls
        right = q["I_vy"][j - 1] - lc
        ineqs.append(Inequality(
            f"user{j}: B + H(S{j}|K1) + L^S < I(V{j};Y{j}) - L^C", left, right,
            kind="lt", guard=guard))
    ineqs.append(phi_iq)
    report = ConditionReport(
        inequalities=tuple(ineqs), phi=phi, log_phi=log_phi, status="",
        extras={"quantities": _q_summary(q)})
    report.status = "feasible" if report.overall else "infeasible"
    return report


def check_thm3(inst: ProblemInstance, sp: SchemeParams, guard: float = DEFAULT_GUARD,
               phi_override: float | None = None,
               solver_opts: dict | None = None) -> ConditionReport:
    """Conditional-decoding conditions: the decoded shared word is side info.

    Note the source-loss term here takes the common alphabet |K|, not
    |S_j|, and the mutual informations condition on U.
    """
    q = inst.thm1_quantities(sp, solver_opts=solver_opts)
    phi, log_phi = _phi_from_logs(q)
    if phi_override is not None:
        phi = phi_override
        log_phi = math.log(phi) if phi > 0.0 else -math.inf
    ineqs = [Inequality("A+B >= (1+delta)*H(K1)", sp.A + sp.B,
                        (1.0 + sp.delta) * q["H_K1"], kind="ge", guard=guard)]
    phi_iq = Inequality("phi < 1/2", phi, 0.5, kind="lt", guard=guard)
    if phi >= 0.5:
        return ConditionReport(
            inequalities=tuple(ineqs + [phi_iq]), phi=phi, log_phi=log_phi,
            status="infeasible-by-phi", extras={"quantities": _q_summary(q)})
    nx1, nx2 = inst.nx
    for j in (1, 2):
        ls = loss_source(phi, sp.l, inst.k_size)
        lc = loss_channel("thm3", phi, u=q["u_size"], y=q["y_sizes"][j - 1],
                          x_own=nx1 if j == 1 else nx2,
                          x_other=nx2 if j == 1 else nx1)
        left = sp.B + q["H_S_given_K1"][j - 1] + ls
        right = inst.cond_mi_x_y_given_u(j) - lc
        ineqs.append(Inequality(
            f"user{j}: B + H(S{j}|K1) + L^S < I(X{j};Y{j}|U) - L^C", left, right,
            kind="lt", guard=guard))
    ineqs.append(phi_iq)
    report = ConditionReport(
        inequalities=tuple(ineqs), phi=phi, log_phi=log_phi, status="",
        extras={"quantities": _q_summary(q)})
    report.status = "feasible" if report.overall else "infeasible"
    return report


def check_thm2_rate_point(inst: ProblemInstance, sp: SchemeParams,
                          hk_oracle=None, guard: float = DEFAULT_GUARD,
                          solver_opts: dict | None = None) -> ConditionReport:
    """Rate point for the message-splitting step, membership delegated.

    The region itself is defined in an external reference, so membership
    is a pluggable predicate hk_oracle(rate_point, inst) -> bool. With no
    predicate the report is marked indeterminate.
    """
    q = inst.thm1_quantities(sp, solver_opts=solver_opts)
    phi, log_phi = _phi_from_logs(q)
    ineqs = [Inequality("A+B >= (1+delta)*H(K1)", sp.A + sp.B,
                        (1.0 + sp.delta) * q["H_K1"], kind="ge", guard=guard)]
    phi_iq = Inequality("phi < 1/2", phi, 0.5, kind="lt", guard=guard)
    ineqs.append(phi_iq)
    if phi >= 0.5:
        return ConditionReport(
            inequalities=tuple(ineqs), phi=phi, log_phi=log_phi,
            status="infeasible-by-phi", extras={"quantities": _q_summary(q)})
    nw1 = len(inst.p_w1) if inst.p_w1 is not None else 1
    nw2 = len(inst.p_w2) if inst.p_w2 is not None else 1
    uvw = len(inst.p_u) * len(inst.p_v1) * len(inst.p_v2) * nw1 * nw2
    lc = loss_channel("thm2", phi, uvw=uvw)
    rate_point = tuple(
        (sp.B + lc,
         q["H_S_given_K1"][j - 1] + loss_source_from_log_size(phi, sp.l, q["log_S_sizes"][j - 1]))
        for j in (1, 2)
    )
    extras = {"rate_point": rate_point, "uvw_size": uvw, "quantities": _q_summary(q)}
    if hk_oracle is None:
        return ConditionReport(inequalities=tuple(ineqs), phi=phi, log_phi=log_phi,
                               status="indeterminate", extras=extras)
    member = bool(hk_oracle(rate_point, inst))
    extras["hk_member"] = member
    ok = member and all(iq.satisfied for iq in ineqs)
    return ConditionReport(inequalities=tuple(ineqs), phi=phi, log_phi=log_phi,
                           status="feasible" if ok else "infeasible", extras=extras)


def _q_summary(q: dict) -> dict:
    return {k: (v if not isinstance(v, tuple) else list(v)) for k, v in q.items()}


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------

@dataclass
class SearchResult:
    """Feasible grid points sorted by decreasing minimum slack."""

    feasible: list
    best_attempt: tuple | None  # (params, report) with the largest min slack

    def __iter__(self):
        return iter(self.feasible)

    def __len__(self):
        return len(self.feasible)


def search_feasible(make_case, grid, checker=check_thm1) -> SearchResult:
    """Run a checker over a parameter grid.

    make_case(params) must return (instance, scheme_params). The feasible
    list holds (params, report) pairs sorted by min slack, largest first;
    ties break on grid order, so the result is deterministic for a fixed
    grid. best_attempt diagnoses an all-infeasible grid.
    """
    feasible = []
    best = None
    for idx, params in enumerate(grid):
        inst, sp = make_case(params)
        report = checker(inst, sp)
        if report.overall:
            feasible.append((idx, params, report))
        if best is None or report.min_slack > best[0]:
            best = (report.min_slack, params, report)
    feasible.sort(key=lambda t: (-t[2].min_slack, t[0]))
    return SearchResult(
        feasible=[(p, r) for _, p, r in feasible],
        best_attempt=(best[1], best[2]) if best is not None else None,
    )
