"""Array kernels for bulk filter work, with a JIT and a numpy backend.

The object API in :mod:`amqsec.bloom` and :mod:`amqsec.cuckoo` is the
reference implementation: one Python object per filter, one call per
operation.  Monte-Carlo experiments need millions of operations, so this
module provides batch kernels over numpy arrays.  Two backends exist:

* a numba ``@njit`` backend (default when numba imports cleanly), and
* a pure-numpy/Python fallback, selected by setting ``AMQSEC_NO_NUMBA=1``
  in the environment before the package is imported.

Both backends are exact replicas of the object API, not approximations.
In particular the cuckoo fill kernel runs splitmix64 internally with the
same draw discipline as :class:`amqsec.oracle.CoinSource` (top bit for
the bucket choice, 32-bit multiply-shift for slot choices), so a kernel
fill from seed ``r`` produces byte-for-byte the state an object-API fill
with ``CoinSource(r)`` produces.  The equivalence tests pin this down.

PRF evaluations stay outside the kernels: callers precompute index
matrices (Bloom) or tag/bucket arrays plus a full tag-to-bucket-offset
table (cuckoo) through the real oracle, then hand those to the kernels.
The table costs ``2**lam_t`` oracle calls, which caps the supported tag
width at 20 bits here; the object API has no such limit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .bloom import BloomState
from .cuckoo import (
    CuckooFilter,
    CuckooParams,
    CuckooState,
    INDEX_FN_DOMAIN,
    PrfWrappedCuckooFilter,
    tag_to_element,
    wrap_element,
)
from .oracle import (
    FunctionOracle,
    SPLITMIX_GAMMA,
    derive_bits,
    derive_index_vector,
    splitmix64_next,
)

MAX_TABLE_LAM_T = 20


def _numba_enabled() -> bool:
    if os.environ.get("AMQSEC_NO_NUMBA", "") == "1":
        return False
    try:
        import numba  # noqa: F401
    except Exception:
        return False
    return True


USING_NUMBA = _numba_enabled()


def backend() -> str:
    return "numba" if USING_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Bloom kernels.
#
# Index matrices are 0-based (object API indices minus one), one row per
# element.  The bit layout matches the serialized Bloom state: bit p lives
# in byte p >> 3 at weight 1 << (p & 7).


def bloom_index_matrix(oracle: FunctionOracle, elements, m: int, k: int) -> np.ndarray:
    out = np.empty((len(elements), k), dtype=np.int64)
    for row, x in enumerate(elements):
        vec = derive_index_vector(oracle, x, m, k)
        for col in range(k):
            out[row, col] = vec[col] - 1
    return out


def _as_bit_array(bits) -> np.ndarray:
    if isinstance(bits, np.ndarray):
        return bits
    if isinstance(bits, BloomState):
        return np.frombuffer(bits.bits, dtype=np.uint8)
    return np.frombuffer(bits, dtype=np.uint8)


def _bloom_insert_numpy(bits: np.ndarray, idx: np.ndarray) -> None:
    flat = idx.ravel()
    np.bitwise_or.at(bits, flat >> 3,
                     np.left_shift(np.uint8(1), (flat & 7).astype(np.uint8)))


def _bloom_probe_numpy(bits: np.ndarray, idx: np.ndarray) -> np.ndarray:
    got = bits[idx >> 3] >> (idx & 7).astype(np.uint8)
    return ((got & 1) != 0).all(axis=1)


def _bloom_insert_loop(bits, idx):  # pragma: no cover - jitted
    n, k = idx.shape
    for i in range(n):
        for j in range(k):
            p = idx[i, j]
            bits[p >> 3] |= np.uint8(1 << (p & 7))


def _bloom_probe_loop(bits, idx):  # pragma: no cover - jitted
    n, k = idx.shape
    out = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        hit = True
        for j in range(k):
            p = idx[i, j]
            if (bits[p >> 3] >> (p & 7)) & 1 == 0:
                hit = False
                break
        out[i] = hit
    return out


# ---------------------------------------------------------------------------
# Cuckoo kernels.


@dataclass
class CuckooArrays:
    """Flat cuckoo table: one int64 row of ``s`` slots per bucket, -1 empty."""

    params: CuckooParams
    bucket_tags: np.ndarray
    bucket_len: np.ndarray
    stash: int = -1

    def load(self) -> int:
        return int(self.bucket_len.sum())

    def load_fraction(self) -> float:
        return self.load() / (self.params.s * self.params.buckets)

    def to_state(self) -> CuckooState:
        state = CuckooState(self.params)
        for b in range(self.params.buckets):
            row = self.bucket_tags[b]
            state.buckets[b] = [int(row[j]) for j in range(self.bucket_len[b])]
        state.stash = None if self.stash < 0 else self.stash
        return state


def new_cuckoo_arrays(params: CuckooParams) -> CuckooArrays:
    return CuckooArrays(
        params=params,
        bucket_tags=np.full((params.buckets, params.s), -1, dtype=np.int64),
        bucket_len=np.zeros(params.buckets, dtype=np.int64),
    )


def index_table(oracle: FunctionOracle, lam_i: int, lam_t: int) -> np.ndarray:
    """h_i applied to every encoded tag value, as a 2**lam_t lookup table."""
    if lam_t > MAX_TABLE_LAM_T:
        raise ValueError(f"index_table supports lam_t <= {MAX_TABLE_LAM_T}")
    out = np.empty(1 << lam_t, dtype=np.int64)
    for tag in range(1 << lam_t):
        out[tag] = derive_bits(oracle, tag_to_element(tag, lam_t), lam_i, INDEX_FN_DOMAIN)
    return out


def cuckoo_element_arrays(flt, elements) -> tuple[np.ndarray, np.ndarray]:
    """Tags and first bucket indices for a batch of elements.

    Accepts a :class:`CuckooFilter` or a :class:`PrfWrappedCuckooFilter`;
    the wrapped variant hashes the PRF image of each element, exactly as
    its ``up``/``qry`` do.
    """
    if isinstance(flt, PrfWrappedCuckooFilter):
        inner = flt.inner
        elements = [wrap_element(flt.oracle, x) for x in elements]
    elif isinstance(flt, CuckooFilter):
        inner = flt
    else:
        raise TypeError("expected a cuckoo or wrapped-cuckoo filter")
    tags = np.empty(len(elements), dtype=np.int64)
    i1s = np.empty(len(elements), dtype=np.int64)
    for row, x in enumerate(elements):
        tags[row] = inner.h_t(x)
        i1s[row] = inner.h_i(x)
    return tags, i1s


def _cuckoo_fill_py(bucket_tags, bucket_len, stash, tags, i1s, htab, num,
                    state, stop_on_failure):
    n = len(tags)
    s = bucket_tags.shape[1]
    ok = np.zeros(n, dtype=np.uint8)
    done = 0
    for i in range(n):
        done = i + 1
        if stash >= 0:
            if stop_on_failure:
                break
            continue
        tag = int(tags[i])
        b1 = int(i1s[i])
        b2 = b1 ^ int(htab[tag])
        ok[i] = 1
        row1, row2 = bucket_tags[b1], bucket_tags[b2]
        n1, n2 = int(bucket_len[b1]), int(bucket_len[b2])
        if tag in row1[:n1] or tag in row2[:n2]:
            continue
        if n1 < s:
            row1[n1] = tag
            bucket_len[b1] = n1 + 1
            continue
        if n2 < s:
            row2[n2] = tag
            bucket_len[b2] = n2 + 1
            continue
        state, r = splitmix64_next(state)
        b = b2 if r >> 63 else b1
        placed = False
        for _ in range(num):
            state, r = splitmix64_next(state)
            slot = ((r >> 32) * s) >> 32
            tag, bucket_tags[b, slot] = int(bucket_tags[b, slot]), tag
            b ^= int(htab[tag])
            if bucket_len[b] < s:
                bucket_tags[b, bucket_len[b]] = tag
                bucket_len[b] += 1
                placed = True
                break
        if not placed:
            stash = tag
    return ok, stash, state, done


def _cuckoo_probe_numpy(bucket_tags, bucket_len, stash, tags, i1s, htab):
    i2s = i1s ^ htab[tags]
    hit1 = (bucket_tags[i1s] == tags[:, None]).any(axis=1)
    hit2 = (bucket_tags[i2s] == tags[:, None]).any(axis=1)
    return hit1 | hit2 | (tags == stash)


# Numba sources.  Coin arithmetic sticks to np.uint64 throughout: int64
# would sign-extend on the right shifts.

_U_GAMMA = np.uint64(SPLITMIX_GAMMA)
_U_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_U_MIX2 = np.uint64(0x94D049BB133111EB)
_U27 = np.uint64(27)
_U30 = np.uint64(30)
_U31 = np.uint64(31)
_U32 = np.uint64(32)
_U63 = np.uint64(63)


def _sm_next_u64(state):  # pragma: no cover - jitted
    state = state + _U_GAMMA
    z = state
    z = (z ^ (z >> _U30)) * _U_MIX1
    z = (z ^ (z >> _U27)) * _U_MIX2
    return state, z ^ (z >> _U31)


def _cuckoo_fill_loop(bucket_tags, bucket_len, stash, tags, i1s, htab, num,
                      state, stop_on_failure):  # pragma: no cover - jitted
    n = len(tags)
    s = bucket_tags.shape[1]
    s_u = np.uint64(s)
    ok = np.zeros(n, dtype=np.uint8)
    done = 0
    for i in range(n):
        done = i + 1
        if stash >= 0:
            if stop_on_failure:
                break
            continue
        tag = tags[i]
        b1 = i1s[i]
        b2 = b1 ^ htab[tag]
        ok[i] = 1
        dup = False
        for j in range(bucket_len[b1]):
            if bucket_tags[b1, j] == tag:
                dup = True
        for j in range(bucket_len[b2]):
            if bucket_tags[b2, j] == tag:
                dup = True
        if dup:
            continue
        if bucket_len[b1] < s:
            bucket_tags[b1, bucket_len[b1]] = tag
            bucket_len[b1] += 1
            continue
        if bucket_len[b2] < s:
            bucket_tags[b2, bucket_len[b2]] = tag
            bucket_len[b2] += 1
            continue
        state, r = _sm_next_u64(state)
        b = b2 if r >> _U63 else b1
        placed = False
        for _ in range(num):
            state, r = _sm_next_u64(state)
            slot = np.int64(((r >> _U32) * s_u) >> _U32)
            evicted = bucket_tags[b, slot]
            bucket_tags[b, slot] = tag
            tag = evicted
            b ^= htab[tag]
            if bucket_len[b] < s:
                bucket_tags[b, bucket_len[b]] = tag
                bucket_len[b] += 1
                placed = True
                break
        if not placed:
            stash = tag
    return ok, stash, state, done


def _cuckoo_probe_loop(bucket_tags, bucket_len, stash, tags, i1s,
                       htab):  # pragma: no cover - jitted
    n = len(tags)
    out = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        tag = tags[i]
        b1 = i1s[i]
        b2 = b1 ^ htab[tag]
        hit = tag == stash
        for j in range(bucket_len[b1]):
            if bucket_tags[b1, j] == tag:
                hit = True
        for j in range(bucket_len[b2]):
            if bucket_tags[b2, j] == tag:
                hit = True
        out[i] = hit
    return out


if USING_NUMBA:
    from numba import njit

    _sm_next_u64 = njit(cache=True)(_sm_next_u64)
    _bloom_insert_impl = njit(cache=True)(_bloom_insert_loop)
    _bloom_probe_impl = njit(cache=True)(_bloom_probe_loop)
    _cuckoo_fill_impl = njit(cache=True)(_cuckoo_fill_loop)
    _cuckoo_probe_impl = njit(cache=True)(_cuckoo_probe_loop)
else:
    _bloom_insert_impl = _bloom_insert_numpy
    _bloom_probe_impl = _bloom_probe_numpy
    _cuckoo_fill_impl = _cuckoo_fill_py
    _cuckoo_probe_impl = _cuckoo_probe_numpy


def bloom_insert(bits, idx: np.ndarray) -> None:
    """Set the bits named by a 0-based (n, k) index matrix, in place."""
    _bloom_insert_impl(_as_bit_array(bits), idx)


def bloom_probe(bits, idx: np.ndarray) -> np.ndarray:
    """Membership answers for a 0-based (n, k) index matrix."""
    return _bloom_probe_impl(_as_bit_array(bits), idx)


@dataclass
class FillResult:
    ok: np.ndarray
    coin_state: int
    attempted: int


def cuckoo_fill(arrays: CuckooArrays, tags: np.ndarray, i1s: np.ndarray,
                htab: np.ndarray, coin_state: int,
                stop_on_failure: bool = False) -> FillResult:
    """Run the insertion algorithm over a batch of precomputed elements.

    Mutates ``arrays`` and returns the advanced coin state, so successive
    calls continue one coin stream the way a shared ``CoinSource`` would.
    With ``stop_on_failure`` the batch stops at the first rejected
    insertion (stash already occupied).
    """
    if USING_NUMBA:
        ok, stash, state, done = _cuckoo_fill_impl(
            arrays.bucket_tags, arrays.bucket_len, np.int64(arrays.stash),
            tags, i1s, htab, arrays.params.num,
            np.uint64(coin_state), stop_on_failure)
    else:
        ok, stash, state, done = _cuckoo_fill_impl(
            arrays.bucket_tags, arrays.bucket_len, arrays.stash,
            tags, i1s, htab, arrays.params.num, coin_state, stop_on_failure)
    arrays.stash = int(stash)
    return FillResult(ok=ok.astype(bool), coin_state=int(state), attempted=int(done))


def cuckoo_probe(arrays: CuckooArrays, tags: np.ndarray, i1s: np.ndarray,
                 htab: np.ndarray) -> np.ndarray:
    return _cuckoo_probe_impl(arrays.bucket_tags, arrays.bucket_len,
                              np.int64(arrays.stash), tags, i1s, htab)
