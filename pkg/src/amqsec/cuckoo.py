"""Insertion-only Cuckoo filter and its PRF-wrapped variant.

An element is reduced to a short tag H_T(x) stored in one of two candidate
buckets, i1 = H_I(x) and i2 = i1 XOR H_I(tag); the XOR form lets a stored
tag be relocated to its partner bucket without knowing the element
(partial-key relocation).  When both buckets are full, a bounded random
eviction walk displaces tags; a tag still homeless after ``num`` kicks is
parked in a one-slot stash, which permanently disables further insertions.

The PRF-wrapped variant first maps x through an oracle-derived 256-bit
value re-encoded as a domain element, then runs the plain filter on that;
this makes the whole structure behave as a function of F(x) alone.
"""

from __future__ import annotations

from dataclasses import dataclass

from .amq import AmqDescriptor, FAMILY_CUCKOO, FAMILY_WRAPPED_CUCKOO, STATE_MAGIC
from .oracle import CoinSource, FunctionOracle, derive_bits

_STATE_VERSION = 1

# Domain-separation tags carving independent functions out of one oracle.
TAG_FN_DOMAIN = 0x01     # H_T, tag derivation
INDEX_FN_DOMAIN = 0x02   # H_I, bucket-index derivation
WRAP_FN_DOMAIN = 0x03    # the PRF wrapper's F

# Prefix distinguishing an encoded tag from the raw elements a caller
# inserts; H_I is evaluated on both.
TAG_ELEMENT_PREFIX = 0x54


@dataclass(frozen=True)
class CuckooParams:
    s: int        # slots per bucket
    lam_i: int    # index bits; 2**lam_i buckets
    lam_t: int    # tag bits
    num: int = 500  # eviction budget per insertion

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if not 1 <= self.lam_i <= 32:
            raise ValueError("lam_i must be in [1, 32]")
        if not 1 <= self.lam_t <= 32:
            raise ValueError("lam_t must be in [1, 32]")
        if self.num < 1:
            raise ValueError("num must be >= 1")

    @property
    def buckets(self) -> int:
        return 1 << self.lam_i


class CuckooState:
    """Buckets of tags (occupied slots form a prefix) plus the stash."""

    __slots__ = ("params", "buckets", "stash")

    def __init__(self, params: CuckooParams):
        self.params = params
        self.buckets: list[list[int]] = [[] for _ in range(params.buckets)]
        self.stash: int | None = None

    @property
    def disabled(self) -> bool:
        return self.stash is not None

    def load(self) -> int:
        return sum(len(b) for b in self.buckets)


def tag_to_element(tag: int, lam_t: int) -> bytes:
    """Encode a tag value as a domain element for index derivation.

    Fixed-width big-endian with a reserved prefix byte; injective, and
    public, so anyone can evaluate H_I on a tag they know.
    """
    return bytes([TAG_ELEMENT_PREFIX]) + tag.to_bytes((lam_t + 7) // 8, "big")


def cuckoo_setup(pp: CuckooParams) -> CuckooState:
    return CuckooState(pp)


def cuckoo_up(x: bytes, state: CuckooState, h_t, h_i, coins: CoinSource) -> tuple[bool, CuckooState]:
    """Insert x.  Returns (False, state) only once the stash is occupied.

    ``h_t`` and ``h_i`` map byte strings to lam_t- and lam_i-bit integers.
    Coins supply at most one bucket choice and ``num`` slot choices.
    Mutates and returns the state.
    """
    pp = state.params
    if state.stash is not None:
        return False, state
    tag = h_t(x)
    i1 = h_i(x)
    i2 = i1 ^ h_i(tag_to_element(tag, pp.lam_t))
    buckets = state.buckets
    if tag in buckets[i1] or tag in buckets[i2]:
        return True, state
    if len(buckets[i1]) < pp.s:
        buckets[i1].append(tag)
        return True, state
    if len(buckets[i2]) < pp.s:
        buckets[i2].append(tag)
        return True, state
    i = i2 if coins.bit() else i1
    for _ in range(pp.num):
        slot = coins.index(pp.s)
        tag, buckets[i][slot] = buckets[i][slot], tag
        i ^= h_i(tag_to_element(tag, pp.lam_t))
        if len(buckets[i]) < pp.s:
            buckets[i].append(tag)
            return True, state
    # The walk ran out of kicks; park the homeless tag.  This call still
    # reports success -- only insertions after the stash fills fail.
    state.stash = tag
    return True, state


def cuckoo_qry(x: bytes, state: CuckooState, h_t, h_i) -> bool:
    pp = state.params
    tag = h_t(x)
    i1 = h_i(x)
    i2 = i1 ^ h_i(tag_to_element(tag, pp.lam_t))
    return tag in state.buckets[i1] or tag in state.buckets[i2] or tag == state.stash


def serialize_cuckoo_state(state: CuckooState, family: int = FAMILY_CUCKOO) -> bytes:
    pp = state.params
    out = bytearray(STATE_MAGIC)
    out += bytes([_STATE_VERSION, family])
    out += pp.s.to_bytes(2, "little")
    out += bytes([pp.lam_i, pp.lam_t])
    out += pp.num.to_bytes(4, "little")
    out += bytes([1 if state.stash is not None else 0])
    out += (state.stash or 0).to_bytes(4, "little")
    for bucket in state.buckets:
        out += bytes([len(bucket)])
        for tag in bucket:
            out += tag.to_bytes(4, "little")
    return bytes(out)


@dataclass
class ParsedCuckooState:
    family: int
    params: CuckooParams
    buckets: list[list[int]]
    stash: int | None


def parse_cuckoo_state(data: bytes) -> ParsedCuckooState:
    if data[:4] != STATE_MAGIC or data[4] != _STATE_VERSION:
        raise ValueError("not a serialized filter state")
    family = data[5]
    if family not in (FAMILY_CUCKOO, FAMILY_WRAPPED_CUCKOO):
        raise ValueError("not a Cuckoo-family state")
    s = int.from_bytes(data[6:8], "little")
    lam_i, lam_t = data[8], data[9]
    num = int.from_bytes(data[10:14], "little")
    has_stash = data[14]
    stash = int.from_bytes(data[15:19], "little") if has_stash else None
    params = CuckooParams(s, lam_i, lam_t, num)
    buckets = []
    pos = 19
    for _ in range(params.buckets):
        load = data[pos]
        pos += 1
        bucket = [int.from_bytes(data[pos + 4 * j:pos + 4 * j + 4], "little")
                  for j in range(load)]
        pos += 4 * load
        buckets.append(bucket)
    if pos != len(data):
        raise ValueError("trailing bytes after bucket payload")
    return ParsedCuckooState(family, params, buckets, stash)


class CuckooFilter:
    """Object wrapper deriving H_T and H_I from one oracle."""

    def __init__(self, params: CuckooParams, oracle: FunctionOracle):
        self.params = params
        self.oracle = oracle
        self.state = cuckoo_setup(params)
        self.descriptor = AmqDescriptor("cuckoo", params,
                                        alpha=3 + params.num, beta=3)

    def h_t(self, x: bytes) -> int:
        return derive_bits(self.oracle, x, self.params.lam_t, TAG_FN_DOMAIN)

    def h_i(self, x: bytes) -> int:
        return derive_bits(self.oracle, x, self.params.lam_i, INDEX_FN_DOMAIN)

    def up(self, x: bytes, coins: CoinSource | None = None) -> bool:
        if coins is None:
            raise ValueError("Cuckoo insertion draws coins; pass a CoinSource")
        ok, self.state = cuckoo_up(x, self.state, self.h_t, self.h_i, coins)
        return ok

    def qry(self, x: bytes) -> bool:
        return cuckoo_qry(x, self.state, self.h_t, self.h_i)

    def serialize(self) -> bytes:
        return serialize_cuckoo_state(self.state, FAMILY_CUCKOO)


def wrap_element(oracle: FunctionOracle, x: bytes) -> bytes:
    """The wrapper's preprocessing: F(x) encoded back into the domain."""
    return derive_bits(oracle, x, 256, WRAP_FN_DOMAIN).to_bytes(32, "big")


class PrfWrappedCuckooFilter:
    """Cuckoo filter operating on F(x) instead of x.

    One oracle call per operation from the wrapper's point of view, which
    is what the adversarial-correctness accounting charges.
    """

    def __init__(self, inner: CuckooFilter, oracle: FunctionOracle):
        self.inner = inner
        self.params = inner.params
        self.oracle = oracle
        self.descriptor = AmqDescriptor("prf_wrapped_cuckoo", inner.params,
                                        alpha=1, beta=1)

    @property
    def state(self) -> CuckooState:
        return self.inner.state

    def up(self, x: bytes, coins: CoinSource | None = None) -> bool:
        return self.inner.up(wrap_element(self.oracle, x), coins)

    def qry(self, x: bytes) -> bool:
        return self.inner.qry(wrap_element(self.oracle, x))

    def serialize(self) -> bytes:
        return serialize_cuckoo_state(self.inner.state, FAMILY_WRAPPED_CUCKOO)


def prf_wrap(inner: CuckooFilter, oracle: FunctionOracle) -> PrfWrappedCuckooFilter:
    """Wrap a Cuckoo instance so up/qry first map x through the oracle."""
    return PrfWrappedCuckooFilter(inner, oracle)
