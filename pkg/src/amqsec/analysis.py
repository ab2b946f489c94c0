"""Closed-form false-positive bounds, adversarial/privacy bounds, planner.

All probability arithmetic uses expm1/log1p-stable forms so that tags of
32 bits and PRF advantages near 2^-256 keep full double precision.  The
planner reproduces the storage-versus-guarantee trade-off: for a desired
false-positive target and query budget it sizes each family twice, once
against honest insertions only and once against the adversarial
worst-case bound, and reports the storage ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .amq import AmqDescriptor, QueryBudget

DEFAULT_EPS_PRF = 2.0 ** -256

_BLOOM_SHAPE_GRID = tuple(range(4, 65, 4))
_CUCKOO_SHAPE_GRID = (1, 2, 4, 8)

# Empirically supported fill fraction for sizing Cuckoo capacity.
CUCKOO_MAX_LOAD = 0.95


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


# ---------------------------------------------------------------------------
# NAI false-positive probabilities


@dataclass(frozen=True)
class BloomFp:
    bound: float     # valid upper bound on the NAI FP probability
    estimate: float  # classical asymptotic estimate, not a bound

    def __iter__(self):
        return iter((self.bound, self.estimate))


def bloom_nai_fp_bound(m: int, k: int, n: int) -> BloomFp:
    """Upper bound and asymptotic estimate of the Bloom FP probability
    after n honest insertions.

    bound    = (1 - exp(-(n+0.5)*k/(m-1)))^k
    estimate = (1 - exp(-n*k/m))^k
    """
    if m < 2 or k < 1 or n < 0:
        raise ValueError("need m >= 2, k >= 1, n >= 0")
    bound = (-math.expm1(-(n + 0.5) * k / (m - 1))) ** k
    estimate = (-math.expm1(-n * k / m)) ** k
    return BloomFp(_clamp01(bound), _clamp01(estimate))


def cuckoo_nai_fp_bound(s: int, lam_t: int, wrapped_range_bits: int | None = None) -> float:
    """Upper bound on the Cuckoo FP probability: 1 - (1 - 2^-lam_t)^(2s+1).

    With ``wrapped_range_bits`` set, adds the wrapper's collision term
    (2s+2)^2 / 2^(bits+1) for a filter that first maps elements through a
    random function with that output width.
    """
    if s < 1 or lam_t < 1:
        raise ValueError("need s >= 1, lam_t >= 1")
    fp = -math.expm1((2 * s + 1) * math.log1p(-(2.0 ** -lam_t)))
    if wrapped_range_bits is not None:
        if wrapped_range_bits < 1:
            raise ValueError("wrapped_range_bits must be >= 1")
        fp += math.ldexp((2 * s + 2) ** 2, -(wrapped_range_bits + 1))
    return _clamp01(fp)


# ---------------------------------------------------------------------------
# Adversarial correctness and privacy reports


@dataclass(frozen=True)
class BoundReport:
    nai_fp: float
    eps_prf: float
    adversarial_bound: float
    storage_bits: int
    pp: object
    budget: QueryBudget
    immutable: bool
    unit_cost_family: bool  # alpha == beta == 1 applies (Bloom / wrapped Cuckoo)


def adversarial_correctness_bound(eps_prf: float, budget: QueryBudget, nai_fp: float,
                                  descriptor: AmqDescriptor | None = None,
                                  immutable: bool = False) -> BoundReport:
    """Worst-case FP bound against an adaptive adversary.

    eps' = eps_prf + 2 * q_t * nai_fp, where nai_fp is the NAI bound at
    n + q_u insertions; an immutable deployment (no Up oracle) tightens
    this to eps' = eps_prf.
    """
    if not 0 <= eps_prf <= 1 or not 0 <= nai_fp <= 1:
        raise ValueError("probabilities must lie in [0, 1]")
    if immutable and budget.q_u != 0:
        raise ValueError("immutable bound requires q_u == 0")
    if immutable:
        eps_prime = eps_prf
    else:
        eps_prime = eps_prf + 2.0 * budget.q_t * nai_fp
    return BoundReport(
        nai_fp=nai_fp,
        eps_prf=eps_prf,
        adversarial_bound=_clamp01(eps_prime),
        storage_bits=storage_bits(descriptor) if descriptor else 0,
        pp=descriptor.pp if descriptor else None,
        budget=budget,
        immutable=immutable,
        unit_cost_family=bool(descriptor and descriptor.alpha == descriptor.beta == 1),
    )


@dataclass(frozen=True)
class PrivacyReport:
    eps_prf: float
    guess_bound: float
    rep_privacy_bound: float
    min_entropy: float


def privacy_guessing_bound(q_u: int, q_t: int, min_entropy_bits: float,
                           eps_prf: float = DEFAULT_EPS_PRF) -> PrivacyReport:
    """Simulation-based privacy bound for a stored set V of the given
    min-entropy: the adversary's chance of touching V with q_u + q_t
    element queries is at most (q_u + q_t) * 2^-H, and the full bound
    adds the PRF advantage (the permutation-invariance term is zero for
    the decomposable filters here).
    """
    if q_u < 0 or q_t < 0:
        raise ValueError("query counts must be non-negative")
    if min_entropy_bits < 0:
        raise ValueError("min-entropy must be non-negative")
    guess = _clamp01((q_u + q_t) * 2.0 ** (-min_entropy_bits))
    return PrivacyReport(
        eps_prf=eps_prf,
        guess_bound=guess,
        rep_privacy_bound=_clamp01(eps_prf + guess),
        min_entropy=min_entropy_bits,
    )


# ---------------------------------------------------------------------------
# Storage accounting


def bloom_storage_bits(m: int) -> int:
    return m


def cuckoo_storage_bits(s: int, lam_i: int, lam_t: int) -> int:
    """s * 2^lam_i * lam_t; tolerates the lam_i = 0 single-bucket edge."""
    return s * (1 << lam_i) * lam_t


def storage_bits(descriptor: AmqDescriptor) -> int:
    if descriptor.family == "bloom":
        return bloom_storage_bits(descriptor.pp.m)
    if descriptor.family in ("cuckoo", "prf_wrapped_cuckoo"):
        pp = descriptor.pp
        return cuckoo_storage_bits(pp.s, pp.lam_i, pp.lam_t)
    raise ValueError(f"unknown family: {descriptor.family!r}")


# ---------------------------------------------------------------------------
# Worst-case adversarial bound over query-budget splits


def _argmax_unimodal(f: Callable[[int], float], lo: int, hi: int) -> int:
    """Largest-value integer in [lo, hi] for a unimodal f (ternary search)."""
    while hi - lo > 3:
        m1 = lo + (hi - lo) // 3
        m2 = hi - (hi - lo) // 3
        if f(m1) < f(m2):
            lo = m1 + 1
        else:
            hi = m2
    return max(range(lo, hi + 1), key=f)


def bloom_worst_eps_prime(m: int, k: int, n: int, q: int,
                          eps_prf: float = DEFAULT_EPS_PRF) -> tuple[float, int]:
    """Max over q_t = t, q_u = q - t of the adversarial bound; (value, t*).

    The objective t -> 2 t * fp(n + q - t) is strictly unimodal in t (its
    log-derivative 1/t - k-scaled fill term is strictly decreasing), so an
    integer ternary search finds the exact maximizer.
    """
    if q < 0:
        raise ValueError("q must be non-negative")
    if q == 0:
        return _clamp01(eps_prf), 0

    def f(t: int) -> float:
        return 2.0 * t * bloom_nai_fp_bound(m, k, n + q - t).bound

    t_star = _argmax_unimodal(f, 0, q)
    return _clamp01(eps_prf + f(t_star)), t_star


def cuckoo_worst_eps_prime(s: int, lam_t: int, q: int,
                           eps_prf: float = DEFAULT_EPS_PRF,
                           wrapped_range_bits: int | None = None) -> tuple[float, int]:
    """Cuckoo counterpart; the FP bound ignores load, so t* = q."""
    if q < 0:
        raise ValueError("q must be non-negative")
    fp = cuckoo_nai_fp_bound(s, lam_t, wrapped_range_bits)
    return _clamp01(eps_prf + 2.0 * q * fp), q


# ---------------------------------------------------------------------------
# The parameter sweep (curve) and target-matching planner


@dataclass(frozen=True)
class PlanPoint:
    family: str
    pp: dict
    storage_bits: int
    eps_prime: float
    honest_fp: float
    t_star: int
    meets_target: bool


def parameter_sweep(family: str, target_fp: float, q: int, n: int,
                    grid: Sequence[dict], eps_prf: float = DEFAULT_EPS_PRF) -> list[PlanPoint]:
    """Evaluate a candidate pp grid into a storage-vs-guarantee curve.

    Each grid entry is a dict of pp fields ({"m","k"} for Bloom,
    {"s","lam_i","lam_t"} for the Cuckoo families).  For every pp the
    adversarial value is the worst case over splitting the q-query budget
    between insertions and queries, and the honest baseline is the NAI
    bound after n + q insertions.  Cuckoo pps whose capacity at 95% load
    cannot hold n + q elements are infeasible and omitted.  Output is
    sorted by storage cost.
    """
    if not grid:
        raise ValueError("empty parameter grid")
    points = []
    for pp in grid:
        if family == "bloom":
            m, k = pp["m"], pp["k"]
            eps_prime, t_star = bloom_worst_eps_prime(m, k, n, q, eps_prf)
            honest = bloom_nai_fp_bound(m, k, n + q).bound
            storage = bloom_storage_bits(m)
        elif family in ("cuckoo", "prf_wrapped_cuckoo"):
            s, lam_i, lam_t = pp["s"], pp["lam_i"], pp["lam_t"]
            if n + q > CUCKOO_MAX_LOAD * s * (1 << lam_i):
                continue
            wrapped = 256 if family == "prf_wrapped_cuckoo" else None
            eps_prime, t_star = cuckoo_worst_eps_prime(s, lam_t, q, eps_prf, wrapped)
            honest = cuckoo_nai_fp_bound(s, lam_t, wrapped)
            storage = cuckoo_storage_bits(s, lam_i, lam_t)
        else:
            raise ValueError(f"unknown family: {family!r}")
        points.append(PlanPoint(family, dict(pp), storage, eps_prime, honest,
                                t_star, eps_prime <= target_fp))
    points.sort(key=lambda p: p.storage_bits)
    return points


def _min_feasible(pred: Callable[[int], bool], lo: int, cap: int) -> int | None:
    """Smallest integer >= lo satisfying a monotone predicate, or None."""
    hi = lo
    while not pred(hi):
        hi *= 2
        if hi > cap:
            return None
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass(frozen=True)
class ShapeSizing:
    shape: int               # k for Bloom, s for Cuckoo
    honest_pp: dict
    adversarial_pp: dict
    honest_storage_bits: int
    adversarial_storage_bits: int

    @property
    def ratio(self) -> float:
        return self.adversarial_storage_bits / self.honest_storage_bits


@dataclass(frozen=True)
class RatioReport:
    family: str
    target_fp: float
    n: int
    q: int
    eps_prf: float
    per_shape: list[ShapeSizing]
    best: ShapeSizing          # shape minimizing adversarial storage

    @property
    def ratio(self) -> float:
        return self.best.ratio


def plan_bloom(n: int, q: int, target_fp: float, eps_prf: float = DEFAULT_EPS_PRF,
               ks: Iterable[int] = _BLOOM_SHAPE_GRID) -> RatioReport:
    """Size m per k against the honest and adversarial targets.

    The headline ratio pairs the honest and adversarial sizings of the
    same k, reported at the k whose adversarial filter is smallest.
    """
    rows = []
    for k in ks:
        m_hon = _min_feasible(
            lambda m: bloom_nai_fp_bound(m, k, n + q).bound <= target_fp, 2, 1 << 62)
        m_adv = _min_feasible(
            lambda m: bloom_worst_eps_prime(m, k, n, q, eps_prf)[0] <= target_fp,
            2, 1 << 62)
        if m_hon is None or m_adv is None:
            continue
        rows.append(ShapeSizing(k, {"m": m_hon, "k": k}, {"m": m_adv, "k": k},
                                m_hon, m_adv))
    if not rows:
        raise ValueError("no feasible Bloom shape for this target")
    best = min(rows, key=lambda r: (r.adversarial_storage_bits, r.shape))
    return RatioReport("bloom", target_fp, n, q, eps_prf, rows, best)


def plan_cuckoo(n: int, q: int, target_fp: float, eps_prf: float = DEFAULT_EPS_PRF,
                ss: Iterable[int] = _CUCKOO_SHAPE_GRID,
                wrapped_range_bits: int | None = None) -> RatioReport:
    """Size (lam_i, lam_t) per s against honest and adversarial targets.

    lam_i is forced by capacity (n + q elements at 95% load), so only
    lam_t differs between the honest and adversarial sizings.  The
    planner's lam_t search is pure arithmetic and may exceed the
    instantiable filter cap of 32 bits.
    """
    rows = []
    for s in ss:
        lam_i = _min_feasible(
            lambda li: n + q <= CUCKOO_MAX_LOAD * s * (1 << li), 1, 1 << 10)
        lam_t_hon = _min_feasible(
            lambda lt: cuckoo_nai_fp_bound(s, lt, wrapped_range_bits) <= target_fp,
            1, 1 << 20)
        lam_t_adv = _min_feasible(
            lambda lt: cuckoo_worst_eps_prime(s, lt, q, eps_prf, wrapped_range_bits)[0]
            <= target_fp, 1, 1 << 20)
        if lam_i is None or lam_t_hon is None or lam_t_adv is None:
            continue
        rows.append(ShapeSizing(
            s,
            {"s": s, "lam_i": lam_i, "lam_t": lam_t_hon},
            {"s": s, "lam_i": lam_i, "lam_t": lam_t_adv},
            cuckoo_storage_bits(s, lam_i, lam_t_hon),
            cuckoo_storage_bits(s, lam_i, lam_t_adv)))
    if not rows:
        raise ValueError("no feasible Cuckoo shape for this target")
    best = min(rows, key=lambda r: (r.adversarial_storage_bits, r.shape))
    return RatioReport("cuckoo", target_fp, n, q, eps_prf, rows, best)


def storage_ratio_at_target(family: str, n: int, q: int, target_fp: float,
                            eps_prf: float = DEFAULT_EPS_PRF) -> RatioReport:
    if family == "bloom":
        return plan_bloom(n, q, target_fp, eps_prf)
    if family == "cuckoo":
        return plan_cuckoo(n, q, target_fp, eps_prf)
    if family == "prf_wrapped_cuckoo":
        return plan_cuckoo(n, q, target_fp, eps_prf, wrapped_range_bits=256)
    raise ValueError(f"unknown family: {family!r}")


def default_grid(family: str, n: int, q: int, target_fp: float,
                 eps_prf: float = DEFAULT_EPS_PRF) -> list[dict]:
    """A plotting grid bracketing the honest and adversarial sizings."""
    report = storage_ratio_at_target(family, n, q, target_fp, eps_prf)
    grid = []
    if family == "bloom":
        for row in report.per_shape:
            lo = max(2, row.honest_pp["m"].bit_length() - 2)
            hi = row.adversarial_pp["m"].bit_length() + 1
            for j in range(lo, hi + 1):
                grid.append({"m": 1 << j, "k": row.shape})
    else:
        for row in report.per_shape:
            lo = max(1, row.honest_pp["lam_t"] - 2)
            hi = row.adversarial_pp["lam_t"] + 2
            for lam_t in range(lo, hi + 1):
                grid.append({"s": row.shape, "lam_i": row.honest_pp["lam_i"],
                             "lam_t": lam_t})
    return grid
