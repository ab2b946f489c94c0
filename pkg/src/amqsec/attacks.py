"""Scripted attacks: filter pollution, target-set coverage, and the
eviction-leak distinguisher against the plain cuckoo filter.

The pollution and coverage attacks model the classic setting where the
index map is public.  ``WeakHashBloom`` is the foil: a Bloom filter
whose indices come from an unkeyed mixing function anyone can evaluate.
Both attacks run the same strategy against a keyed filter, where their
public model is simply wrong about the target; comparing the two runs
is the point.

The cuckoo distinguisher plays the permutation-invariance game.  It
watches state snapshots for tags that migrate between buckets, learns
the index offset of each migrated tag value from the XOR of the two
bucket numbers, and then inserts the tag's canonical encoding: on the
unpermuted filter that element must land at (or evict into) the bucket
equal to the learned offset, while under a hidden input permutation it
lands somewhere unrelated.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .amq import AmqDescriptor, QueryBudget
from .analysis import bloom_nai_fp_bound
from .bloom import (BloomParams, bloom_qry_indices, bloom_setup,
                    bloom_up_indices, serialize_bloom_state)
from .cuckoo import parse_cuckoo_state, tag_to_element
from .games import AdversaryStrategy
from .oracle import CoinSource, splitmix64_next

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def _fnv64(x: bytes) -> int:
    h = _FNV_OFFSET
    for byte in x:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def toy_index_vector(x: bytes, m: int, k: int) -> tuple[int, ...]:
    """Unkeyed index map: anyone can compute where an element will land."""
    if m == 1:
        return (1,) * k
    width = (m - 1).bit_length()
    mask = (1 << width) - 1
    state = _fnv64(x)
    out: list[int] = []
    buf = 0
    have = 0
    while len(out) < k:
        if have < width:
            state, word = splitmix64_next(state)
            buf = (buf << 64) | word
            have += 64
        chunk = (buf >> (have - width)) & mask
        have -= width
        buf &= (1 << have) - 1
        if chunk < m:
            out.append(chunk + 1)
    return tuple(out)


class WeakHashBloom:
    """Bloom filter over the public index map; the pollution-attack foil."""

    def __init__(self, m: int, k: int):
        self.params = BloomParams(m=m, k=k)
        self.state = bloom_setup(self.params)

    @property
    def descriptor(self) -> AmqDescriptor:
        return AmqDescriptor.bloom(self.params.m, self.params.k)

    def index_vector(self, x: bytes) -> tuple[int, ...]:
        return toy_index_vector(x, self.params.m, self.params.k)

    def up(self, x: bytes, coins: CoinSource | None = None) -> bool:
        ok, self.state = bloom_up_indices(self.index_vector(x), self.state)
        return ok

    def qry(self, x: bytes) -> bool:
        return bloom_qry_indices(self.index_vector(x), self.state)

    def serialize(self) -> bytes:
        return serialize_bloom_state(self.state)


@dataclass
class PollutionReport:
    inserted: int
    probes: int
    achieved_fp: float
    honest_bound: float
    envelope: float
    sigma: float


def attack_pollution_bloom(target, budget: QueryBudget, seed: int,
                           eps_prf: float = 2.0 ** -256,
                           pool_factor: int = 4,
                           candidate_cap: int = 2_000_000) -> PollutionReport:
    """Greedy pollution: pack the filter, then probe where the model says ⊤.

    The attack believes the public index map.  It inserts, within the
    update budget, elements chosen to set as many new bits as possible
    under that model, then measures the false positive rate on fresh
    elements whose model indices all fall in the claimed-covered set.
    Probes never repeat an inserted element, so every ⊤ it counts is a
    false positive of the target.  Reported alongside: the honest rate
    bound for the same total insertion count, and the adversarial
    envelope eps_prf + 2 q_t P̄ capped at one.
    """
    m = target.descriptor.pp.m
    k = target.descriptor.pp.k
    coins = CoinSource(seed)

    pool = [coins.element() for _ in range(max(pool_factor * budget.q_u, 64))]
    models = [frozenset(toy_index_vector(x, m, k)) for x in pool]
    covered: set[int] = set()
    inserted: set[bytes] = set()
    alive = list(range(len(pool)))
    for _ in range(budget.q_u):
        best, best_gain = -1, 0
        for j in alive:
            gain = len(models[j] - covered)
            if gain > best_gain:
                best, best_gain = j, gain
        if best < 0:
            break
        alive.remove(best)
        covered |= models[best]
        inserted.add(pool[best])
        target.up(pool[best], coins)

    hits = 0
    probes = 0
    drawn = 0
    while probes < budget.q_t and drawn < candidate_cap:
        x = coins.element()
        drawn += 1
        if x in inserted:
            continue
        if not covered.issuperset(toy_index_vector(x, m, k)):
            continue
        probes += 1
        if target.qry(x):
            hits += 1

    rate = hits / probes if probes else 0.0
    honest = bloom_nai_fp_bound(m, k, budget.n + len(inserted)).bound
    envelope = min(1.0, eps_prf + 2.0 * probes * honest)
    sigma = (rate * (1.0 - rate) / probes) ** 0.5 if probes else 0.0
    return PollutionReport(inserted=len(inserted), probes=probes,
                           achieved_fp=rate, honest_bound=honest,
                           envelope=envelope, sigma=sigma)


@dataclass
class CoverageReport:
    success: bool
    inserted: int
    needed_bits: int
    covered_needed: int


def attack_target_set_coverage(targets: list[bytes], target_filter,
                               budget: QueryBudget, seed: int,
                               candidate_cap: int = 200_000) -> CoverageReport:
    """Make a chosen disjoint set read as present without inserting it.

    Streams random candidates and inserts any that cover still-missing
    model bits of the target set, until either the model says every
    target is covered or the update budget runs out.  Elements of the
    target set itself are never inserted.  Success means every target
    answers ⊤ on the actual filter.
    """
    m = target_filter.descriptor.pp.m
    k = target_filter.descriptor.pp.k
    if len(targets) > budget.q_t:
        raise ValueError("query budget too small to check every target")
    coins = CoinSource(seed)
    forbidden = set(targets)
    needed: set[int] = set()
    for t in targets:
        needed |= set(toy_index_vector(t, m, k))
    missing = set(needed)
    inserted = 0
    drawn = 0
    while missing and inserted < budget.q_u and drawn < candidate_cap:
        x = coins.element()
        drawn += 1
        if x in forbidden:
            continue
        gain = missing & set(toy_index_vector(x, m, k))
        if not gain:
            continue
        target_filter.up(x, coins)
        inserted += 1
        missing -= gain
    success = all(target_filter.qry(t) for t in targets)
    return CoverageReport(success=success, inserted=inserted,
                          needed_bits=len(needed),
                          covered_needed=len(needed) - len(missing))


def _bucket_counts(parsed) -> list[Counter]:
    return [Counter(bucket) for bucket in parsed.buckets]


def _collect_votes(prev_counts, cur_counts, votes, poisoned):
    """Record bucket offsets of tag values that moved exactly once."""
    removals: dict[int, list[int]] = {}
    additions: dict[int, list[int]] = {}
    for idx, (before, after) in enumerate(zip(prev_counts, cur_counts)):
        for tag, mult in (before - after).items():
            removals.setdefault(tag, []).extend([idx] * mult)
        for tag, mult in (after - before).items():
            additions.setdefault(tag, []).extend([idx] * mult)
    for tag, rem in removals.items():
        add = additions.get(tag, [])
        if len(rem) == 1 and len(add) == 1 and rem[0] != add[0]:
            vote = rem[0] ^ add[0]
            if votes.setdefault(tag, vote) != vote:
                poisoned.add(tag)


def _bucket_gained(prev_counts, cur_counts, bucket: int) -> bool:
    after = cur_counts[bucket]
    before = prev_counts[bucket]
    return any(after[tag] > before[tag] for tag in after)


def attack_cuckoo_pi(budget: QueryBudget, probes: int = 8) -> AdversaryStrategy:
    """Distinguisher for the permutation-invariance game on cuckoo filters.

    Stage one inserts random fillers, revealing after each update and
    diffing consecutive snapshots: a tag value seen leaving one bucket
    and arriving in another was evicted, and the XOR of the two bucket
    numbers is that tag's index offset.  Stage two inserts the canonical
    encodings of learned tags and checks whether each shows up at its
    offset bucket.  On the unpermuted filter it does (or evicts into it
    half the time when both buckets are full); under a permutation the
    encoding is mapped away and lands uniformly.  Guess 0 when at least
    two probes hit; a single hit can be a stray cascade arrival, so it
    is not treated as evidence.

    With no update or reveal allowance the strategy concedes and always
    guesses 0.
    """

    def run(oracles, coins: CoinSource):
        if budget.q_u == 0 or budget.q_v == 0 or budget.n == 0:
            return 0
        oracles.rep([coins.element()])
        sigma = oracles.reveal()
        if sigma is None:
            return 0
        prev = _bucket_counts(parse_cuckoo_state(sigma))
        lam_t = parse_cuckoo_state(sigma).params.lam_t
        votes: dict[int, int] = {}
        poisoned: set[int] = set()
        ups_left = budget.q_u
        revs_left = budget.q_v - 1
        reserve = probes

        while ups_left > reserve and revs_left > reserve:
            b = oracles.up(coins.element())
            ups_left -= 1
            sigma = oracles.reveal()
            revs_left -= 1
            if sigma is None:
                break
            cur = _bucket_counts(parse_cuckoo_state(sigma))
            if b is False:
                # the stash just filled; the state is frozen from here on
                prev = cur
                break
            _collect_votes(prev, cur, votes, poisoned)
            prev = cur

        usable = [t for t in votes if t not in poisoned]
        hits = 0
        tried = 0
        for tag in usable:
            if tried >= probes or ups_left <= 0 or revs_left <= 0:
                break
            b = oracles.up(tag_to_element(tag, lam_t))
            ups_left -= 1
            sigma = oracles.reveal()
            revs_left -= 1
            if sigma is None or b is None or b is False:
                break
            cur = _bucket_counts(parse_cuckoo_state(sigma))
            tried += 1
            if _bucket_gained(prev, cur, votes[tag]):
                hits += 1
            prev = cur
        return 0 if hits >= 2 else 1

    return AdversaryStrategy(budget=budget, run=run, name="cuckoo-pi")
