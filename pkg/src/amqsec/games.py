"""Executable security games: real-or-ideal correctness, permutation
invariance, and the two privacy notions.

Each game is a deterministic function of its seed.  An adversary is a
callback that receives oracle handles plus its own coin source and
returns an output byte string (or a guess bit for the PI game).  The
runner enforces the declared query budget by answering ``None`` (the
game's ⊥) once an oracle's allowance is used up, and applies the init
gating: Up and Qry answer ⊥ until Rep has been called, a second Rep
answers ⊥, and Reveal always answers with the current serialized state.

The ideal world of the correctness game replaces the filter's keyed
oracle with a lazily sampled random function and routes every oracle
call through bookkeeping that makes the answers consistent over time:
once an element has been inserted or answered ⊤, it answers ⊤ forever;
a ⊥ answer is cached and replayed until a new distinct insertion lands.
Fresh membership answers are sampled by querying the structure on a
uniform range point, which is exactly the non-adversarial false positive
event for the current state.  This simulation is only meaningful for
filters whose query algorithm factors through a single function image,
so the plain cuckoo family is rejected in the ideal world; wrap it
first.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable

from .amq import AmqDescriptor, QueryBudget, make_instance
from .bloom import bloom_qry_indices
from .oracle import CoinSource, FunctionOracle

REVEAL_OP = "reveal"


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def _normalize_world(world) -> str:
    if world in ("real", 0, False):
        return "real"
    if world in ("ideal", 1, True):
        return "ideal"
    raise ValueError(f"unknown world: {world!r}")


@dataclass
class AdversaryStrategy:
    """A scripted player: a callback over oracle handles plus a budget."""

    budget: QueryBudget
    run: Callable[["GameOracles", CoinSource], object]
    name: str = "adversary"


@dataclass
class GameRun:
    out: object
    transcript: list[dict] | None = None


class GameOracles:
    """Budget- and gate-enforcing oracle handles given to an adversary.

    Subclasses decide what actually happens on each call; this base class
    owns the bookkeeping that is identical in every world.
    """

    def __init__(self, budget: QueryBudget, world: str,
                 transcript: list[dict] | None = None):
        self.budget = budget
        self.world = world
        self.transcript = transcript
        self.init = False
        self.up_calls = 0
        self.qry_calls = 0
        self.reveal_calls = 0

    # Hooks implemented per world.
    def _do_up(self, x: bytes) -> bool:
        raise NotImplementedError

    def _do_qry(self, x: bytes) -> bool:
        raise NotImplementedError

    def _do_reveal(self) -> bytes:
        raise NotImplementedError

    def _record(self, op: str, payload: bytes, answer) -> None:
        if self.transcript is None:
            return
        if isinstance(answer, bytes):
            shown = _digest(answer)
        else:
            shown = answer
        self.transcript.append({
            "world": self.world,
            "op": op,
            "input-hash": _digest(payload),
            "answer": shown,
            "state-digest": _digest(self._do_reveal()),
        })

    def rep(self, elements: Iterable[bytes]):
        elements = list(elements)
        if self.init or len(elements) > self.budget.n:
            self._record("rep", b"".join(elements), None)
            return None
        self.init = True
        for x in elements:
            self._do_up(x)
        self._record("rep", b"".join(elements), True)
        return True

    def up(self, x: bytes):
        if not self.init or self.up_calls >= self.budget.q_u:
            self._record("up", x, None)
            return None
        self.up_calls += 1
        b = self._do_up(x)
        self._record("up", x, b)
        return b

    def qry(self, x: bytes):
        if not self.init or self.qry_calls >= self.budget.q_t:
            self._record("qry", x, None)
            return None
        self.qry_calls += 1
        a = self._do_qry(x)
        self._record("qry", x, a)
        return a

    def reveal(self):
        if self.reveal_calls >= self.budget.q_v:
            self._record(REVEAL_OP, b"", None)
            return None
        self.reveal_calls += 1
        sigma = self._do_reveal()
        self._record(REVEAL_OP, b"", sigma)
        return sigma


class _RealOracles(GameOracles):
    def __init__(self, instance, coins: CoinSource, budget, world="real",
                 transcript=None, mapper=None):
        super().__init__(budget, world, transcript)
        self.instance = instance
        self.coins = coins
        self.mapper = mapper

    def _map(self, x: bytes) -> bytes:
        return x if self.mapper is None else self.mapper(x)

    def _do_up(self, x: bytes) -> bool:
        return self.instance.up(self._map(x), self.coins)

    def _do_qry(self, x: bytes) -> bool:
        return self.instance.qry(self._map(x))

    def _do_reveal(self) -> bytes:
        return self.instance.serialize()


def _uniform_index_vector(coins: CoinSource, m: int, k: int) -> tuple[int, ...]:
    """Exactly uniform vector over [1..m]^k, by rejection on bit chunks."""
    if m == 1:
        return (1,) * k
    width = (m - 1).bit_length()
    mask = (1 << width) - 1
    out: list[int] = []
    buf = 0
    have = 0
    while len(out) < k:
        if have < width:
            buf = (buf << 64) | coins.next_u64()
            have += 64
        chunk = (buf >> (have - width)) & mask
        have -= width
        buf &= (1 << have) - 1
        if chunk < m:
            out.append(chunk + 1)
    return tuple(out)


class _SimulatorOracles(GameOracles):
    """The bookkeeping simulator over an internal random-function filter."""

    def __init__(self, descriptor: AmqDescriptor, instance, coins: CoinSource,
                 budget, transcript=None):
        super().__init__(budget, "ideal", transcript)
        self.descriptor = descriptor
        self.instance = instance
        self.coins = coins
        self.up_is_enabled = True
        self.inserted: set[bytes] = set()
        self.fplist: set[bytes] = set()
        self.calq: dict[bytes, int] = {}
        self.qry_counter = 0
        self.distinct_insertions = 0

    def _do_up(self, x: bytes) -> bool:
        if x not in self.inserted:
            b = self.instance.up(x, self.coins)
            self.up_is_enabled = b
            if b:
                self.inserted.add(x)
                self.distinct_insertions += 1
            return b
        return self.up_is_enabled

    def _fresh_range_answer(self) -> bool:
        if self.descriptor.family == "bloom":
            vec = _uniform_index_vector(self.coins, self.descriptor.pp.m,
                                        self.descriptor.pp.k)
            return bloom_qry_indices(vec, self.instance.state)
        # PRF-wrapped cuckoo: the wrap range is 256-bit strings, and the
        # identity-variant query is the inner filter's query on the point.
        return self.instance.inner.qry(self.coins.bytes(32))

    def _do_qry(self, x: bytes) -> bool:
        self.qry_counter += 1
        if x in self.inserted or x in self.fplist:
            return True
        if self.calq.get(x) == self.distinct_insertions:
            return False
        self.calq[x] = self.distinct_insertions
        a = self._fresh_range_answer()
        if a:
            self.fplist.add(x)
        return a

    def _do_reveal(self) -> bytes:
        return self.instance.serialize()


def _simulatable(descriptor: AmqDescriptor) -> bool:
    return descriptor.family in ("bloom", "prf_wrapped_cuckoo")


def run_real_or_ideal(adv: AdversaryStrategy, descriptor: AmqDescriptor,
                      world, seed: int,
                      record_transcript: bool = False) -> GameRun:
    """One run of the correctness game in the named world."""
    world = _normalize_world(world)
    coins = CoinSource(seed)
    transcript: list[dict] | None = [] if record_transcript else None
    if world == "real":
        oracle = FunctionOracle(mode="keyed", key=coins.bytes(32))
        instance = make_instance(descriptor, oracle)
        handles = _RealOracles(instance, CoinSource(coins.next_u64()),
                               adv.budget, "real", transcript)
    else:
        if not _simulatable(descriptor):
            raise ValueError(
                "the ideal-world simulator needs a filter whose query "
                "factors through one function image; use bloom or "
                "prf_wrapped_cuckoo")
        oracle = FunctionOracle(mode="random", seed=coins.next_u64())
        instance = make_instance(descriptor, oracle)
        handles = _SimulatorOracles(descriptor, instance,
                                    CoinSource(coins.next_u64()),
                                    adv.budget, transcript)
    adv_coins = CoinSource(coins.next_u64())
    out = adv.run(handles, adv_coins)
    return GameRun(out=out, transcript=transcript)


# ---------------------------------------------------------------------------
# Permutation invariance.


class LazyInjection:
    """Injective map into fresh 16-byte elements, sampled on demand.

    Used as the lazy permutation of the PI game and as the element
    translator of the privacy simulators.  Uniform sampling over the
    whole element domain is replaced by sampling fresh 16-byte strings
    and retrying on collision, which is injective by construction.
    """

    def __init__(self, coins: CoinSource):
        self.coins = coins
        self.forward: dict[bytes, bytes] = {}
        self.used: set[bytes] = set()

    def fresh_avoiding(self, avoid: set[bytes]) -> bytes:
        while True:
            y = self.coins.element()
            if y not in self.used and y not in avoid:
                return y

    def assign(self, x: bytes, y: bytes) -> bytes:
        self.forward[x] = y
        self.used.add(y)
        return y

    def image(self, x: bytes) -> bytes:
        got = self.forward.get(x)
        if got is None:
            got = self.assign(x, self.fresh_avoiding(set()))
        return got


def run_pi_game(adv: AdversaryStrategy, descriptor: AmqDescriptor, c: int,
                seed: int, transcript: list[dict] | None = None) -> int:
    """One run of the permutation-invariance experiment; returns the guess.

    The filter runs on a random function (not a keyed PRF); with c=1
    every adversary-supplied element is replaced by its image under a
    lazily sampled permutation before reaching the filter.  Pass a list
    as ``transcript`` to collect the oracle records of the run.
    """
    if c not in (0, 1):
        raise ValueError("c must be 0 or 1")
    coins = CoinSource(seed)
    oracle = FunctionOracle(mode="random", seed=coins.next_u64())
    instance = make_instance(descriptor, oracle)
    mapper = None
    if c == 1:
        injection = LazyInjection(CoinSource(coins.next_u64()))
        mapper = injection.image
    handles = _RealOracles(instance, CoinSource(coins.next_u64()), adv.budget,
                           f"pi-c{c}", transcript, mapper=mapper)
    out = adv.run(handles, CoinSource(coins.next_u64()))
    if isinstance(out, bytes):
        return out[0] & 1 if out else 0
    return int(out) & 1


# ---------------------------------------------------------------------------
# Privacy games.


@dataclass
class ElemRepResult:
    out: object
    stored_set: frozenset[bytes]
    queried_stored_element: bool
    transcript: list[dict] | None = None


class RepLeakOnce:
    """Cardinality leak that may be consulted at most once."""

    def __init__(self, n: int):
        self.n = n
        self.consulted = False

    def __call__(self) -> int:
        assert not self.consulted, "RepLeak may be consulted only once"
        self.consulted = True
        return self.n


class _PrivacySimulatorOracles(GameOracles):
    """Elem-Rep (and Rep) privacy simulator.

    Knows only what the leakage oracles provide: the cardinality of the
    stored set (once), and, in the elem_rep variant, whether a queried
    element is stored.  Adversary elements are translated through an
    injection whose images land inside the dummy set exactly when the
    leakage says the element is stored.
    """

    def __init__(self, instance, coins: CoinSource, budget,
                 rep_leak: Callable[[], int],
                 elem_leak: Callable[[bytes], bool] | None,
                 transcript=None):
        super().__init__(budget, "ideal", transcript)
        self.instance = instance
        self.coins = coins
        self.elem_leak = elem_leak
        self.injection = LazyInjection(coins)
        self.dummies: list[bytes] = []
        n = rep_leak()
        for _ in range(n):
            y = self.injection.fresh_avoiding(set())
            self.injection.used.add(y)
            self.dummies.append(y)
            self.instance.up(y, self.coins)
        self.init = True

    def _translate(self, x: bytes) -> bytes:
        got = self.injection.forward.get(x)
        if got is not None:
            return got
        if self.elem_leak is not None and self.elem_leak(x):
            free = [y for y in self.dummies
                    if y not in self.injection.forward.values()]
            # every dummy starts unused as an image, and at most |V|
            # distinct stored elements can reach this branch
            y = free[self.coins.index(len(free))]
        else:
            y = self.injection.fresh_avoiding(set(self.dummies))
        return self.injection.assign(x, y)

    def _do_up(self, x: bytes) -> bool:
        return self.instance.up(self._translate(x), self.coins)

    def _do_qry(self, x: bytes) -> bool:
        return self.instance.qry(self._translate(x))

    def _do_reveal(self) -> bytes:
        return self.instance.serialize()


def run_elem_rep_privacy(adv2: AdversaryStrategy, descriptor: AmqDescriptor,
                         stored: Iterable[bytes], world, seed: int,
                         variant: str = "elem_rep",
                         record_transcript: bool = False) -> ElemRepResult:
    """One run of the privacy game for a stored set sampled by the caller.

    ``variant`` selects the leakage profile: "elem_rep" gives the
    simulator the per-element membership leak; "rep" replaces it with a
    constant ⊥, the reduction used to relate the two notions.  The result
    flags whether the adversary ever passed a stored element to Up or
    Qry, the event that separates the two variants.
    """
    if variant not in ("elem_rep", "rep"):
        raise ValueError("variant must be 'elem_rep' or 'rep'")
    world = _normalize_world(world)
    stored_set = frozenset(stored)
    coins = CoinSource(seed)
    transcript: list[dict] | None = [] if record_transcript else None

    rep_leak = RepLeakOnce(len(stored_set))

    if world == "real":
        oracle = FunctionOracle(mode="keyed", key=coins.bytes(32))
        instance = make_instance(descriptor, oracle)
        handles = _RealOracles(instance, CoinSource(coins.next_u64()),
                               adv2.budget, "real", transcript)
        handles.init = True
        for x in sorted(stored_set):
            handles._do_up(x)
    else:
        oracle = FunctionOracle(mode="random", seed=coins.next_u64())
        instance = make_instance(descriptor, oracle)
        elem_leak = (lambda x: x in stored_set) if variant == "elem_rep" else None
        handles = _PrivacySimulatorOracles(instance,
                                           CoinSource(coins.next_u64()),
                                           adv2.budget, rep_leak, elem_leak,
                                           transcript)

    touched: set[bytes] = set()
    real_up, real_qry = handles.up, handles.qry

    def up(x: bytes):
        touched.add(x)
        return real_up(x)

    def qry(x: bytes):
        touched.add(x)
        return real_qry(x)

    handles.up, handles.qry = up, qry
    out = adv2.run(handles, CoinSource(coins.next_u64()))
    return ElemRepResult(out=out, stored_set=stored_set,
                         queried_stored_element=bool(touched & stored_set),
                         transcript=transcript)


# ---------------------------------------------------------------------------
# Advantage estimation.


def estimate_advantage(game_runner: Callable[[AdversaryStrategy, int, int], int],
                       adv: AdversaryStrategy, trials: int,
                       seed: int) -> tuple[float, float]:
    """Monte-Carlo advantage |p̂₁ − p̂₀| with a 95% normal half-width.

    ``game_runner(adv, world_bit, trial_seed)`` must return the
    distinguisher's bit for one run.  Each world is played ``trials``
    times on seeds derived from ``seed``.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials per world")
    coins = CoinSource(seed)
    ones = [0, 0]
    for _ in range(trials):
        s0 = coins.next_u64()
        s1 = coins.next_u64()
        ones[0] += game_runner(adv, 0, s0) & 1
        ones[1] += game_runner(adv, 1, s1) & 1
    p0 = ones[0] / trials
    p1 = ones[1] / trials
    half_width = 1.96 * math.sqrt(p0 * (1 - p0) / trials + p1 * (1 - p1) / trials)
    return abs(p1 - p0), half_width


def roi_game_runner(descriptor: AmqDescriptor,
                    distinguisher: Callable[[object], int]):
    """Adapter: correctness game as a (adv, world, seed) -> bit runner."""

    def runner(adv, world_bit, trial_seed):
        run = run_real_or_ideal(adv, descriptor, world_bit, trial_seed)
        return distinguisher(run.out) & 1

    return runner


def pi_game_runner(descriptor: AmqDescriptor):
    """Adapter: the PI experiment as a (adv, c, seed) -> guess runner."""

    def runner(adv, c, trial_seed):
        return run_pi_game(adv, descriptor, c, trial_seed)

    return runner


def elem_rep_game_runner(descriptor: AmqDescriptor,
                         sample_stored: Callable[[CoinSource], Iterable[bytes]],
                         distinguisher: Callable[[object, frozenset], int],
                         variant: str = "elem_rep"):
    """Adapter: privacy game with a per-trial stored set from ``sample_stored``."""

    def runner(adv2, world_bit, trial_seed):
        coins = CoinSource(trial_seed)
        stored = sample_stored(CoinSource(coins.next_u64()))
        res = run_elem_rep_privacy(adv2, descriptor, stored, world_bit,
                                   coins.next_u64(), variant=variant)
        return distinguisher(res.out, res.stored_set) & 1

    return runner


def transcript_json_lines(trial: int, records: list[dict]) -> list[str]:
    """Render transcript records as the JSON-lines dump format."""
    return [json.dumps({"trial": trial, **rec}, sort_keys=True)
            for rec in records]
