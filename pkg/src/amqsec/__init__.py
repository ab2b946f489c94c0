"""Keyed approximate-membership filters with adversarial-correctness tooling.

The package has three layers:

* filters -- Bloom and insertion-only Cuckoo filters driven by a keyed
  function oracle (``amqsec.bloom``, ``amqsec.cuckoo``), plus the shared
  AMQ interface, trace checkers and NAI state generator (``amqsec.amq``);
* analysis -- closed-form false-positive bounds, adversarial-correctness
  and privacy bounds, and the storage/FP parameter planner
  (``amqsec.analysis``);
* games -- executable real-or-ideal, permutation-invariance and
  representation-privacy games with concrete attacks (``amqsec.games``,
  ``amqsec.attacks``).

``amqsec.cli`` exposes all of it as the ``amqsec`` command.
"""

from .oracle import CoinSource, FunctionOracle, derive_bits, derive_index_vector, evaluate
from .amq import (
    AmqDescriptor,
    ConsistencyReport,
    OperationTrace,
    QueryBudget,
    check_consistency,
    nai_gen,
    statistical_distance,
)

__version__ = "0.1.0"

__all__ = [
    "AmqDescriptor",
    "CoinSource",
    "ConsistencyReport",
    "FunctionOracle",
    "OperationTrace",
    "QueryBudget",
    "check_consistency",
    "derive_bits",
    "derive_index_vector",
    "evaluate",
    "nai_gen",
    "statistical_distance",
    "__version__",
]
