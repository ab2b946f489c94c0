"""The (m, k)-Bloom filter over a function oracle.

State is an m-bit vector; an element maps through the oracle to k indices
in [1, m]; insertion ORs the corresponding bitmap into the state and a
query answers positively iff all k bits are set.  Bit i-1 of the state
stores index i, LSB-first within serialized bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .amq import AmqDescriptor, FAMILY_BLOOM, STATE_MAGIC
from .oracle import CoinSource, FunctionOracle, derive_index_vector

_STATE_VERSION = 1


@dataclass(frozen=True)
class BloomParams:
    m: int
    k: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not 1 <= self.k <= 64:
            raise ValueError("k must be in [1, 64]")


class BloomState:
    """An m-bit vector plus the parameters needed to interpret it."""

    __slots__ = ("m", "k", "bits")

    def __init__(self, m: int, k: int, bits: bytearray):
        self.m = m
        self.k = k
        self.bits = bits

    def copy(self) -> "BloomState":
        return BloomState(self.m, self.k, bytearray(self.bits))


def bitmap(m: int, k: int, v) -> bytes:
    """m-bit vector with exactly the bits named by the index vector set."""
    v = tuple(v)
    if len(v) != k:
        raise ValueError(f"index vector has length {len(v)}, expected {k}")
    out = bytearray((m + 7) // 8)
    for i in v:
        if not 1 <= i <= m:
            raise ValueError(f"index {i} outside [1, {m}]")
        j = i - 1
        out[j >> 3] |= 1 << (j & 7)
    return bytes(out)


def bloom_setup(pp: BloomParams) -> BloomState:
    return BloomState(pp.m, pp.k, bytearray((pp.m + 7) // 8))


def bloom_up_indices(v, state: BloomState) -> tuple[bool, BloomState]:
    """Identity-oracle insert: OR in a precomputed index vector."""
    for i in v:
        j = i - 1
        state.bits[j >> 3] |= 1 << (j & 7)
    return True, state


def bloom_qry_indices(v, state: BloomState) -> bool:
    """Identity-oracle query against a precomputed index vector."""
    for i in v:
        j = i - 1
        if not state.bits[j >> 3] >> (j & 7) & 1:
            return False
    return True


def bloom_up(x: bytes, state: BloomState, oracle: FunctionOracle) -> tuple[bool, BloomState]:
    """Insert x; always succeeds.  Mutates and returns the state."""
    return bloom_up_indices(derive_index_vector(oracle, x, state.m, state.k), state)


def bloom_qry(x: bytes, state: BloomState, oracle: FunctionOracle) -> bool:
    return bloom_qry_indices(derive_index_vector(oracle, x, state.m, state.k), state)


def serialize_bloom_state(state: BloomState) -> bytes:
    header = STATE_MAGIC + bytes([_STATE_VERSION, FAMILY_BLOOM])
    header += state.m.to_bytes(8, "little") + state.k.to_bytes(2, "little")
    return header + bytes(state.bits)


def parse_bloom_state(data: bytes) -> tuple[int, int, bytes]:
    """Inverse of serialize_bloom_state; returns (m, k, bit bytes)."""
    if data[:4] != STATE_MAGIC or data[4] != _STATE_VERSION or data[5] != FAMILY_BLOOM:
        raise ValueError("not a serialized Bloom state")
    m = int.from_bytes(data[6:14], "little")
    k = int.from_bytes(data[14:16], "little")
    bits = data[16:]
    if len(bits) != (m + 7) // 8:
        raise ValueError("bit vector length does not match m")
    return m, k, bits


class BloomFilter:
    """Object wrapper tying params, oracle, and mutable state together."""

    def __init__(self, params: BloomParams, oracle: FunctionOracle):
        self.params = params
        self.oracle = oracle
        self.state = bloom_setup(params)
        self.descriptor = AmqDescriptor("bloom", params, alpha=1, beta=1)

    def up(self, x: bytes, coins: CoinSource | None = None) -> bool:
        # Bloom insertion is deterministic; coins are accepted for
        # interface uniformity and never drawn from.
        ok, self.state = bloom_up(x, self.state, self.oracle)
        return ok

    def qry(self, x: bytes) -> bool:
        return bloom_qry(x, self.state, self.oracle)

    def index_vector(self, x: bytes) -> tuple[int, ...]:
        return derive_index_vector(self.oracle, x, self.params.m, self.params.k)

    def serialize(self) -> bytes:
        return serialize_bloom_state(self.state)
