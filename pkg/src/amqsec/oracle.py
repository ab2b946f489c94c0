"""Keyed function family and lazily-sampled random-function oracle.

Every filter in this package consumes randomness through a
:class:`FunctionOracle`, which is either

* ``keyed``: a pseudorandom function built from keyed BLAKE2b, evaluated
  in counter mode so arbitrarily many output bytes can be derived per
  input, or
* ``random``: a lazily sampled truly random function, memoized per input
  and fed by a seeded deterministic generator so runs are replayable.

Both modes expose the same byte-oriented stream per input.  Range-specific
derivation (index vectors for Bloom filters, fixed-width bit strings for
Cuckoo tags and bucket indices) is layered on top via
:func:`derive_index_vector` and :func:`derive_bits`, which use rejection
sampling and domain-separation prefixes so that several independent
functions can be served by a single oracle.

Domain elements are variable-length byte strings of at most ``2**16``
bytes.  Two elements are equal iff their bytes are equal.
"""

from __future__ import annotations

MAX_ELEMENT_LEN = 1 << 16

_MASK64 = (1 << 64) - 1

# splitmix64 constants, shared with the array kernels so that coin
# sequences are reproducible across the object API and the JIT path.
SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_SPLITMIX_MIX1 = 0xBF58476D1CE4E5B9
_SPLITMIX_MIX2 = 0x94D049BB133111EB


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns ``(new_state, output)``."""
    state = (state + SPLITMIX_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _SPLITMIX_MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _SPLITMIX_MIX2) & _MASK64
    z = z ^ (z >> 31)
    return state, z


class CoinSource:
    """Seedable stream of coin tosses for the randomized algorithms.

    All filter-level random choices (eviction bucket picks, slot picks,
    sampled domain elements) are drawn from an explicit CoinSource so a
    run is reproducible from its seed.  Backed by splitmix64.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    @property
    def state(self) -> int:
        """Current generator state, for checkpointing.

        ``CoinSource(cs.state)`` continues the stream exactly where ``cs``
        stands, which is how the array kernels hand coin streams back and
        forth with this class.
        """
        return self._state

    def next_u64(self) -> int:
        self._state, out = splitmix64_next(self._state)
        return out

    def bit(self) -> int:
        """One uniform bit (the top bit of the next word)."""
        return self.next_u64() >> 63

    def index(self, n: int) -> int:
        """Uniform value in ``[0, n)`` via 32-bit multiply-shift.

        The multiply-shift map has bias below ``n / 2**32``, which is
        negligible for the slot counts used here and, unlike rejection,
        consumes exactly one word, so the JIT kernels can replicate the
        exact sequence.
        """
        if n <= 0:
            raise ValueError("index() needs a positive range")
        return ((self.next_u64() >> 32) * n) >> 32

    def bytes(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            out += self.next_u64().to_bytes(8, "little")
        return bytes(out[:n])

    def element(self, nbytes: int = 16) -> bytes:
        """A fresh uniformly random domain element."""
        return self.bytes(nbytes)


class FunctionOracle:
    """A keyed PRF or a lazily-sampled random function over byte strings.

    Parameters
    ----------
    mode:
        ``"keyed"`` or ``"random"``.
    key:
        Keyed mode only.  32 or 64 hex characters (128/256-bit key), or
        the equivalent raw 16/32 bytes.
    seed:
        Random mode only.  64-bit integer seeding the lazy sampler.
    output_len:
        Bytes returned by :func:`evaluate`.  Derivation helpers may pull
        more bytes from the same per-input stream; in keyed mode the
        stream is extended in counter mode, in random mode the memoized
        entry grows, so earlier outputs are always a prefix of later ones.

    ``call_count`` tallies every top-level use (evaluate or one of the
    derive helpers), repeated inputs included; the security bounds count
    PRF invocations in exactly this unit.
    """

    _BLOCK = 64  # blake2b digest size, bytes per counter block

    def __init__(self, mode: str = "keyed", *, key: str | bytes | None = None,
                 seed: int | None = None, output_len: int = 32):
        if output_len < 1:
            raise ValueError("output_len must be >= 1")
        self.mode = mode
        self.output_len = output_len
        self.call_count = 0
        if mode == "keyed":
            if key is None:
                raise ValueError("keyed mode requires a key")
            self._key = self._parse_key(key)
            self._memo = None
            self._rng = None
        elif mode == "random":
            if seed is None:
                raise ValueError("random mode requires a seed")
            self._key = None
            self._memo: dict[bytes, bytearray] = {}
            self._rng = CoinSource(seed)
        else:
            raise ValueError(f"unknown oracle mode: {mode!r}")

    @staticmethod
    def _parse_key(key: str | bytes) -> bytes:
        if isinstance(key, str):
            raw = bytes.fromhex(key)
        else:
            raw = bytes(key)
        if len(raw) not in (16, 32):
            raise ValueError("key must be 128 or 256 bits (32 or 64 hex chars)")
        return raw

    # -- the per-input byte stream ------------------------------------

    def _stream(self, inp: bytes, nbytes: int) -> bytes:
        """First ``nbytes`` of the output stream for a prefixed input."""
        if len(inp) - 1 > MAX_ELEMENT_LEN:
            raise ValueError("domain element exceeds the 2**16-byte cap")
        if self.mode == "keyed":
            return self._keyed_stream(inp, nbytes)
        return self._random_stream(inp, nbytes)

    def _keyed_stream(self, inp: bytes, nbytes: int) -> bytes:
        import hashlib
        out = bytearray()
        block = 0
        while len(out) < nbytes:
            h = hashlib.blake2b(inp, key=self._key, digest_size=self._BLOCK,
                                salt=block.to_bytes(8, "little"))
            out += h.digest()
            block += 1
        return bytes(out[:nbytes])

    def _random_stream(self, inp: bytes, nbytes: int) -> bytes:
        buf = self._memo.get(inp)
        if buf is None:
            buf = bytearray()
            self._memo[inp] = buf
        while len(buf) < nbytes:
            buf += self._rng.next_u64().to_bytes(8, "little")
        return bytes(buf[:nbytes])


# Input prefix used by evaluate/derive_index_vector.  derive_bits prefixes
# the caller's domain_tag instead, yielding independent functions.
_RAW_PREFIX = b"\x00"


def evaluate(oracle: FunctionOracle, x: bytes) -> bytes:
    """The oracle's raw output on ``x``: ``output_len`` bytes."""
    oracle.call_count += 1
    return oracle._stream(_RAW_PREFIX + x, oracle.output_len)


def derive_index_vector(oracle: FunctionOracle, x: bytes, m: int, k: int) -> tuple[int, ...]:
    """``k`` indices in ``[1, m]`` derived from the oracle's stream on ``x``.

    Indices are parsed big-endian from ``ceil(log2 m)``-bit chunks with
    rejection sampling, so each position is marginally uniform; when m is
    a power of two no chunk is ever rejected and exactly
    ``ceil(k*log2(m)/8)`` stream bytes are consumed.  Shares the stream of
    :func:`evaluate`, of which it is a structured parse.
    """
    if m < 1 or k < 1:
        raise ValueError("m and k must be positive")
    if m == 1:
        oracle.call_count += 1
        return (1,) * k
    oracle.call_count += 1
    inp = _RAW_PREFIX + x
    bits_per = (m - 1).bit_length()
    indices = []
    bitpos = 0
    buf = oracle._stream(inp, (k * bits_per + 7) // 8)
    while len(indices) < k:
        end_byte = (bitpos + bits_per + 7) // 8
        if end_byte > len(buf):
            buf = oracle._stream(inp, max(end_byte, len(buf) + 64))
        acc = int.from_bytes(buf[bitpos // 8:end_byte], "big")
        shift = end_byte * 8 - (bitpos + bits_per)
        value = (acc >> shift) & ((1 << bits_per) - 1)
        bitpos += bits_per
        if value < m:
            indices.append(value + 1)
    return tuple(indices)


def derive_bits(oracle: FunctionOracle, x: bytes, nbits: int, domain_tag: int) -> int:
    """``nbits``-bit integer from the oracle, domain-separated by tag.

    Distinct tags give independent functions of one oracle, which is how
    the Cuckoo filter's tag and bucket-index functions share a single F.
    """
    if not 1 <= nbits <= 256:
        raise ValueError("nbits must be in [1, 256]")
    if not 0 <= domain_tag <= 255:
        raise ValueError("domain_tag must fit one byte")
    oracle.call_count += 1
    nbytes = (nbits + 7) // 8
    raw = oracle._stream(bytes([domain_tag]) + x, nbytes)
    return int.from_bytes(raw, "big") >> (nbytes * 8 - nbits)
