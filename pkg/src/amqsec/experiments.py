"""Empirical measurements: false positive rates, fill capacity, and the
real-versus-ideal state distribution check.

These drive the batch kernels, so inserting a million probes into a
Bloom filter or packing a cuckoo table to its failure point stays well
under interactive time budgets.  Every experiment takes an explicit
seed and is a pure function of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .amq import AmqDescriptor, QueryBudget, make_instance, statistical_distance
from .games import AdversaryStrategy, run_real_or_ideal
from .kernels import (
    bloom_index_matrix,
    bloom_insert,
    bloom_probe,
    cuckoo_element_arrays,
    cuckoo_fill,
    cuckoo_probe,
    index_table,
    new_cuckoo_arrays,
)
from .oracle import CoinSource, FunctionOracle


@dataclass
class FpExperiment:
    empirical_fp: float
    inserted: int
    probes: int
    load_fraction: float = 0.0


def _fresh_elements(coins: CoinSource, count: int,
                    exclude: set[bytes] | None = None) -> list[bytes]:
    out: list[bytes] = []
    if exclude is None:
        exclude = set()
    while len(out) < count:
        x = coins.element()
        if x not in exclude:
            out.append(x)
            exclude.add(x)
    return out


def bloom_fp_experiment(m: int, k: int, n: int, probes: int,
                        seed: int) -> FpExperiment:
    """Insert n random elements, then measure ⊤ answers on fresh probes."""
    coins = CoinSource(seed)
    oracle = FunctionOracle(mode="keyed", key=coins.bytes(32))
    flt = make_instance(AmqDescriptor.bloom(m, k), oracle)
    inserted = _fresh_elements(coins, n)
    bloom_insert(flt.state, bloom_index_matrix(oracle, inserted, m, k))
    probe_elems = _fresh_elements(coins, probes, exclude=set(inserted))
    answers = bloom_probe(flt.state, bloom_index_matrix(oracle, probe_elems,
                                                        m, k))
    return FpExperiment(empirical_fp=float(np.mean(answers)), inserted=n,
                        probes=probes)


def cuckoo_fp_experiment(s: int, lam_i: int, lam_t: int, num: int,
                         probes: int, seed: int,
                         target_load: float = 0.9,
                         batch: int = 1024) -> FpExperiment:
    """Fill a plain cuckoo filter honestly to the target load, then probe."""
    coins = CoinSource(seed)
    oracle = FunctionOracle(mode="keyed", key=coins.bytes(32))
    flt = make_instance(AmqDescriptor.cuckoo(s, lam_i, lam_t, num), oracle)
    arrays = new_cuckoo_arrays(flt.state.params)
    htab = index_table(oracle, lam_i, lam_t)
    capacity = s << lam_i
    wanted = int(np.ceil(target_load * capacity))
    inserted: set[bytes] = set()
    coin_state = coins.next_u64()
    while arrays.load() < wanted:
        room = wanted - arrays.load()
        chunk = _fresh_elements(coins, min(batch, room), exclude=inserted)
        tags, i1s = cuckoo_element_arrays(flt, chunk)
        result = cuckoo_fill(arrays, tags, i1s, htab, coin_state,
                             stop_on_failure=True)
        coin_state = result.coin_state
        if not result.ok.all():
            raise RuntimeError(
                f"insertion failed at load {arrays.load_fraction():.3f}, "
                f"below the requested target {target_load}")
    probe_elems = _fresh_elements(coins, probes, exclude=inserted)
    tags, i1s = cuckoo_element_arrays(flt, probe_elems)
    answers = cuckoo_probe(arrays, tags, i1s, htab)
    return FpExperiment(empirical_fp=float(np.mean(answers)),
                        inserted=arrays.load(), probes=probes,
                        load_fraction=arrays.load_fraction())


@dataclass
class LoadFactorReport:
    mean_fraction: float
    fractions: list[float]


def load_factor_experiment(s: int, lam_i: int, lam_t: int, num: int,
                           trials: int, seed: int, wrapped: bool = True,
                           batch: int = 4096) -> LoadFactorReport:
    """Occupied-slot fraction at the first refused insertion, per trial.

    Each trial keys a fresh filter and feeds it distinct random elements
    until an up answers ⊥, which happens on the first insertion after
    the stash is taken.
    """
    coins = CoinSource(seed)
    if wrapped:
        descriptor = AmqDescriptor.prf_wrapped_cuckoo(s, lam_i, lam_t, num)
    else:
        descriptor = AmqDescriptor.cuckoo(s, lam_i, lam_t, num)
    capacity = s << lam_i
    fractions: list[float] = []
    for _ in range(trials):
        oracle = FunctionOracle(mode="keyed", key=coins.bytes(32))
        flt = make_instance(descriptor, oracle)
        arrays = new_cuckoo_arrays(flt.state.params)
        htab = index_table(oracle, lam_i, lam_t)
        coin_state = coins.next_u64()
        inserted: set[bytes] = set()
        while True:
            chunk = _fresh_elements(coins, batch, exclude=inserted)
            tags, i1s = cuckoo_element_arrays(flt, chunk)
            result = cuckoo_fill(arrays, tags, i1s, htab, coin_state,
                                 stop_on_failure=True)
            coin_state = result.coin_state
            if not result.ok.all():
                fractions.append(arrays.load_fraction())
                break
    return LoadFactorReport(mean_fraction=float(np.mean(fractions)),
                            fractions=fractions)


@dataclass
class NaiCheckReport:
    distance: float
    trials: int
    support: int


def nai_check(m: int, k: int, n: int, trials: int, seed: int) -> NaiCheckReport:
    """Statistical distance between real and ideal revealed states.

    The scripted adversary represents n random elements and reveals.
    With no membership queries the two worlds should agree up to PRF
    quality, so the measured distance is sampling noise.
    """

    def script(oracles, coins):
        oracles.rep([coins.element() for _ in range(n)])
        return oracles.reveal()

    adv = AdversaryStrategy(budget=QueryBudget(n=n, q_u=0, q_t=0, q_v=1),
                            run=script)
    descriptor = AmqDescriptor.bloom(m, k)
    seeds = CoinSource(seed)
    counts = {"real": {}, "ideal": {}}
    for world in ("real", "ideal"):
        for _ in range(trials):
            out = run_real_or_ideal(adv, descriptor, world,
                                    seeds.next_u64()).out
            counts[world][out] = counts[world].get(out, 0) + 1
    support = set(counts["real"]) | set(counts["ideal"])
    dist_real = {st: counts["real"].get(st, 0) / trials for st in support}
    dist_ideal = {st: counts["ideal"].get(st, 0) / trials for st in support}
    return NaiCheckReport(distance=statistical_distance(dist_real, dist_ideal),
                          trials=trials, support=len(support))
