"""Shared AMQ filter interface: descriptors, traces, consistency checks.

An AMQ filter here is anything with ``setup`` / ``up`` (insert) / ``qry``
(membership query) semantics where ``qry`` never mutates state.  This
module holds the family descriptors, the canonical state serialization
header, operation traces and their consistency checker, the
non-adversarially-influenced (NAI) state generator, and statistical
distance.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol

from .oracle import CoinSource, FunctionOracle

# Canonical serialization: magic, format version, family byte, then a
# family-specific little-endian payload.  The games' Reveal oracle returns
# exactly these bytes, so real filter and simulator stay byte-comparable.
STATE_MAGIC = b"AMQ1"
FAMILY_BLOOM = 1
FAMILY_CUCKOO = 2
FAMILY_WRAPPED_CUCKOO = 3

FAMILY_NAMES = {
    FAMILY_BLOOM: "bloom",
    FAMILY_CUCKOO: "cuckoo",
    FAMILY_WRAPPED_CUCKOO: "prf_wrapped_cuckoo",
}


@dataclass(frozen=True)
class QueryBudget:
    """Oracle-call limits for one game run: n initial insertions through
    Rep, then at most q_u/q_t/q_v calls to Up/Qry/Reveal."""

    n: int
    q_u: int
    q_t: int
    q_v: int

    def __post_init__(self):
        for name in ("n", "q_u", "q_t", "q_v"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class AmqDescriptor:
    """Which filter family and public parameters an instance runs.

    ``alpha`` and ``beta`` record how many oracle calls one up / one qry
    costs; the adversarial-correctness accounting relies on both being 1
    for the Bloom filter and for the PRF-wrapped Cuckoo filter (where the
    counted function is the outer wrapper).
    """

    family: str
    pp: object
    alpha: int
    beta: int

    def __post_init__(self):
        if self.alpha < 1 or self.beta < 1:
            raise ValueError("alpha and beta must be >= 1")
        if self.family in ("bloom", "prf_wrapped_cuckoo") and not (self.alpha == self.beta == 1):
            raise ValueError(f"{self.family} must have alpha == beta == 1")

    @staticmethod
    def bloom(m: int, k: int) -> "AmqDescriptor":
        from .bloom import BloomParams
        return AmqDescriptor("bloom", BloomParams(m, k), alpha=1, beta=1)

    @staticmethod
    def cuckoo(s: int, lam_i: int, lam_t: int, num: int = 500) -> "AmqDescriptor":
        from .cuckoo import CuckooParams
        # Worst case one up spends a tag evaluation, an index evaluation,
        # the partner-index evaluation, and one relocation lookup per kick.
        pp = CuckooParams(s, lam_i, lam_t, num)
        return AmqDescriptor("cuckoo", pp, alpha=3 + num, beta=3)

    @staticmethod
    def prf_wrapped_cuckoo(s: int, lam_i: int, lam_t: int, num: int = 500) -> "AmqDescriptor":
        from .cuckoo import CuckooParams
        return AmqDescriptor("prf_wrapped_cuckoo", CuckooParams(s, lam_i, lam_t, num),
                             alpha=1, beta=1)


class FilterInstance(Protocol):
    """What the games and trace tooling need from a filter object."""

    descriptor: AmqDescriptor
    oracle: FunctionOracle

    def up(self, x: bytes, coins: CoinSource | None = None) -> bool: ...
    def qry(self, x: bytes) -> bool: ...
    def serialize(self) -> bytes: ...


def make_instance(descriptor: AmqDescriptor, oracle: FunctionOracle) -> FilterInstance:
    """Build a fresh (empty) filter instance for a descriptor."""
    if descriptor.family == "bloom":
        from .bloom import BloomFilter
        return BloomFilter(descriptor.pp, oracle)
    if descriptor.family == "cuckoo":
        from .cuckoo import CuckooFilter
        return CuckooFilter(descriptor.pp, oracle)
    if descriptor.family == "prf_wrapped_cuckoo":
        from .cuckoo import CuckooFilter, prf_wrap
        return prf_wrap(CuckooFilter(descriptor.pp, oracle), oracle)
    raise ValueError(f"unknown family: {descriptor.family!r}")


# ---------------------------------------------------------------------------
# Operation traces


@dataclass(frozen=True)
class TraceRecord:
    op: str                      # "up" or "qry"
    input: bytes
    coins: bytes | None          # logged coin draws, None for qry
    returned: bool
    state_before: bytes
    state_after: bytes


@dataclass
class OperationTrace:
    records: list[TraceRecord] = field(default_factory=list)


class LoggedCoins:
    """Tee around a CoinSource recording every draw for trace records.

    The log encodes a bucket-choice bit as one byte and a slot choice as
    two little-endian bytes, in draw order.
    """

    def __init__(self, inner: CoinSource):
        self._inner = inner
        self._log = bytearray()

    def bit(self) -> int:
        v = self._inner.bit()
        self._log.append(v)
        return v

    def index(self, n: int) -> int:
        v = self._inner.index(n)
        self._log += int(v).to_bytes(2, "little")
        return v

    def bytes(self, n: int) -> bytes:
        v = self._inner.bytes(n)
        self._log += v
        return v

    def element(self, nbytes: int = 16) -> bytes:
        return self.bytes(nbytes)

    def next_u64(self) -> int:
        # Not logged compactly; traces never draw raw words.
        return self._inner.next_u64()

    def take_log(self) -> bytes:
        out = bytes(self._log)
        self._log.clear()
        return out


def run_and_trace(instance: FilterInstance, ops: Iterable[tuple[str, bytes]],
                  coins: CoinSource) -> OperationTrace:
    """Execute (op, element) pairs against an instance, recording a trace."""
    logged = LoggedCoins(coins)
    trace = OperationTrace()
    for op, x in ops:
        before = instance.serialize()
        if op == "up":
            returned = instance.up(x, logged)
            drawn = logged.take_log()
        elif op == "qry":
            returned = instance.qry(x)
            drawn = None
        else:
            raise ValueError(f"unknown trace op: {op!r}")
        trace.records.append(TraceRecord(op, x, drawn, returned,
                                         before, instance.serialize()))
    return trace


# ---------------------------------------------------------------------------
# Consistency rules


@dataclass(frozen=True)
class Violation:
    rule: str
    index: int
    message: str


@dataclass
class ConsistencyReport:
    violations: list[Violation] = field(default_factory=list)
    structural_errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.structural_errors


def _stored_content(state: bytes):
    """Parse a serialized state into its comparable content.

    Bloom states parse to the set of set bit positions; Cuckoo states to
    the multiset of stored tags (buckets plus stash).
    """
    if state[:4] != STATE_MAGIC or len(state) < 6:
        raise ValueError("not a canonical filter state")
    family = state[5]
    if family == FAMILY_BLOOM:
        from .bloom import parse_bloom_state
        m, k, bits = parse_bloom_state(state)
        return "bloom", {i for i in range(m) if bits[i >> 3] >> (i & 7) & 1}
    if family in (FAMILY_CUCKOO, FAMILY_WRAPPED_CUCKOO):
        from .cuckoo import parse_cuckoo_state
        parsed = parse_cuckoo_state(state)
        tags = Counter()
        for bucket in parsed.buckets:
            tags.update(bucket)
        if parsed.stash is not None:
            tags[parsed.stash] += 1
        return "cuckoo", tags
    raise ValueError(f"unknown family byte {family}")


def check_consistency(trace: OperationTrace) -> ConsistencyReport:
    """Check a trace against the filter consistency rules.

    Flags: (a) element permanence, a positive qry for some element
    followed by a negative one; (b) permanent disabling, any successful
    or state-changing up after an up returned false; (c) reinsertion
    invariance, an up that changes state although its element was already
    answering positively; (d) structural monotonicity, Bloom set bits or
    the Cuckoo stored-tag multiset shrinking.  A mismatch between one
    record's state_after and the next record's state_before (or a qry
    that mutates) is reported as a structural error.
    """
    report = ConsistencyReport()
    seen_positive: set[bytes] = set()
    disabled_at: int | None = None

    prev_after: bytes | None = None
    for idx, rec in enumerate(trace.records):
        if prev_after is not None and rec.state_before != prev_after:
            report.structural_errors.append(
                f"record {idx}: state_before does not chain from previous state_after")
        prev_after = rec.state_after

        if rec.op == "qry":
            if rec.state_before != rec.state_after:
                report.structural_errors.append(f"record {idx}: qry mutated state")
            if not rec.returned and rec.input in seen_positive:
                report.violations.append(Violation(
                    "element-permanence", idx,
                    "qry answered false for an element previously answered true"))
        elif rec.op == "up":
            changed = rec.state_before != rec.state_after
            if disabled_at is not None and (rec.returned or changed):
                report.violations.append(Violation(
                    "permanent-disabling", idx,
                    f"up after the failed up at record {disabled_at} "
                    f"{'returned true' if rec.returned else 'changed state'}"))
            if rec.input in seen_positive and changed:
                report.violations.append(Violation(
                    "reinsertion-invariance", idx,
                    "up changed state for an element already answering true"))
            if not rec.returned and disabled_at is None:
                disabled_at = idx

        if rec.returned:
            seen_positive.add(rec.input)

        try:
            kind_b, before = _stored_content(rec.state_before)
            kind_a, after = _stored_content(rec.state_after)
        except ValueError as exc:
            report.structural_errors.append(f"record {idx}: {exc}")
            continue
        if kind_b != kind_a:
            report.structural_errors.append(f"record {idx}: family changed mid-trace")
        elif kind_b == "bloom":
            if not before <= after:
                report.violations.append(Violation(
                    "monotonicity", idx, "a set Bloom bit was cleared"))
        else:
            if (Counter(before) - Counter(after)):
                report.violations.append(Violation(
                    "monotonicity", idx, "the stored-tag multiset shrank"))
    return report


# ---------------------------------------------------------------------------
# NAI generation and statistical distance


@dataclass
class NaiSample:
    """State produced by inserting n distinct uniform elements, with the
    sampled elements retained for false-positive estimation."""

    instance: FilterInstance
    elements: list[bytes]
    collision_retries: int


def nai_gen(descriptor: AmqDescriptor, n: int, oracle: FunctionOracle,
            coin_source: CoinSource) -> NaiSample:
    """Generate a non-adversarially-influenced state of n insertions.

    Elements are fresh uniform 16-byte strings, re-drawn on the (cosmically
    unlikely) collision so that exactly n distinct elements are inserted.
    Failed Cuckoo insertions are ignored; the state is returned as-is.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    instance = make_instance(descriptor, oracle)
    elements: list[bytes] = []
    seen: set[bytes] = set()
    retries = 0
    while len(elements) < n:
        x = coin_source.element()
        if x in seen:
            retries += 1
            continue
        seen.add(x)
        elements.append(x)
        instance.up(x, coin_source)
    return NaiSample(instance, elements, retries)


def statistical_distance(p: Mapping, q: Mapping) -> float:
    """Total variation distance between two finite distributions.

    Both mappings must be over the same support (align and zero-fill
    before calling); each must sum to 1 within 1e-9.
    """
    if set(p.keys()) != set(q.keys()):
        raise ValueError("distributions must share a support")
    for name, dist in (("p", p), ("q", q)):
        total = 0.0
        for value in dist.values():
            if value < 0:
                raise ValueError(f"{name} has a negative mass")
            total += value
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"{name} sums to {total}, not 1")
    return 0.5 * sum(abs(p[z] - q[z]) for z in p)
