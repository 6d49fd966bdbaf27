"""A deterministic superstep simulator with per-machine word budgets.

A program is driver code that calls :meth:`Cluster.step` repeatedly.  Each
step runs a compute function on every active machine, sees only that
machine's own store, and returns outgoing messages.  Messages are delivered
between steps in (sender id, emission order) order and appended to
``store[key]`` lists at the destination.

Word accounting: a scalar (element, index, weight, flag, tag) is one word,
containers cost the sum of their items, dict keys count too.  Store keys
themselves are free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..perm import InvalidInputError
from ..reconstruct import BlockLayout, block_layout

MachineId = Hashable
Message = Tuple[MachineId, str, Any]
Store = Dict[str, Any]


def words(x: Any) -> int:
    if x is None:
        return 0
    if isinstance(x, (bool, int, float, str, np.integer, np.floating)):
        return 1
    if isinstance(x, np.ndarray):
        return int(x.size)
    if isinstance(x, dict):
        return sum(words(k) + words(v) for k, v in x.items())
    return sum(words(v) for v in x)


def store_words(store: Store) -> int:
    return sum(words(v) for v in store.values())


@dataclass(frozen=True)
class MpcConfig:
    n: int
    epsilon: float = 0.5
    c: float = 4.0
    kappa: int = 1
    machine_budget: int = 10 ** 7
    relaxed: bool = False

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidInputError("n must be >= 1")
        if not 0 < self.epsilon < 1:
            raise InvalidInputError("epsilon must lie in (0, 1)")
        if self.c <= 0 or self.kappa < 0:
            raise InvalidInputError("c must be positive and kappa non-negative")
        if self.word_cap < self.layout.size:
            raise InvalidInputError(f"word cap {self.word_cap} is below the block size {self.layout.size}")

    @property
    def layout(self) -> BlockLayout:
        return block_layout(self.n, self.epsilon)

    @property
    def word_cap(self) -> int:
        lg = math.ceil(math.log2(max(self.n, 2)))
        return math.floor(self.c * self.n ** (1 - self.epsilon) * lg ** self.kappa)


class CapViolation(RuntimeError):
    def __init__(self, machine: MachineId, round_: int, used: int, cap: int) -> None:
        super().__init__(f"machine {machine} holds {used} words in round {round_}, cap {cap}")
        self.machine = machine
        self.round = round_
        self.used = used
        self.cap = cap


class MachineBudgetExceeded(RuntimeError):
    pass


@dataclass
class MpcTrace:
    rounds: int = 0
    machines_used: int = 0
    peak_words: int = 0
    total_words: int = 0
    total_messages: int = 0
    oracle_calls: List[dict] = field(default_factory=list)
    failed: Optional[dict] = None
    exempt_words: Dict[str, int] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "rounds": self.rounds,
            "machinesUsed": self.machines_used,
            "peakWordsPerMachine": self.peak_words,
            "totalWords": self.total_words,
            "totalMessages": self.total_messages,
            "oracleCalls": [dict(c) for c in self.oracle_calls],
        }
        if self.failed is not None:
            out["failed"] = dict(self.failed)
        if self.exempt_words:
            out["exemptWords"] = dict(self.exempt_words)
        if self.details:
            out["details"] = dict(self.details)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "MpcTrace":
        return cls(
            rounds=data["rounds"],
            machines_used=data["machinesUsed"],
            peak_words=data["peakWordsPerMachine"],
            total_words=data["totalWords"],
            total_messages=data["totalMessages"],
            oracle_calls=[dict(c) for c in data.get("oracleCalls", [])],
            failed=dict(data["failed"]) if data.get("failed") else None,
            exempt_words=dict(data.get("exemptWords", {})),
            details=dict(data.get("details", {})),
        )

    @staticmethod
    def parallel(traces: Sequence["MpcTrace"]) -> "MpcTrace":
        """Independent programs run side by side on disjoint machines."""
        out = MpcTrace()
        for t in traces:
            out.rounds = max(out.rounds, t.rounds)
            out.machines_used += t.machines_used
            out._absorb(t)
        return out

    def then(self, other: "MpcTrace") -> "MpcTrace":
        """This program followed by ``other``, reusing machines."""
        out = MpcTrace(rounds=self.rounds + other.rounds,
                       machines_used=max(self.machines_used, other.machines_used))
        out._absorb(self)
        out._absorb(other)
        return out

    def _absorb(self, t: "MpcTrace") -> None:
        self.peak_words = max(self.peak_words, t.peak_words)
        self.total_words += t.total_words
        self.total_messages += t.total_messages
        self.oracle_calls.extend(dict(c) for c in t.oracle_calls)
        if self.failed is None and t.failed is not None:
            self.failed = dict(t.failed)
        for k, v in t.exempt_words.items():
            self.exempt_words[k] = max(self.exempt_words.get(k, 0), v)


def _id_str(mid: MachineId) -> str:
    return "/".join(str(p) for p in mid) if isinstance(mid, tuple) else str(mid)


class Cluster:
    """Machines with private stores, advanced one superstep at a time."""

    def __init__(self, cfg: MpcConfig, exempt: Iterable[MachineId] = ()) -> None:
        self.cfg = cfg
        self.cap = cfg.word_cap
        self.exempt = frozenset(exempt)
        if self.exempt and not cfg.relaxed:
            raise InvalidInputError("exempt machines need the relaxed flag")
        self._stores: Dict[MachineId, Store] = {}
        self.trace = MpcTrace()

    # bookkeeping -----------------------------------------------------------

    def _touch(self, mid: MachineId) -> Store:
        store = self._stores.get(mid)
        if store is None:
            if len(self._stores) >= self.cfg.machine_budget:
                raise MachineBudgetExceeded(f"more than {self.cfg.machine_budget} machines")
            store = self._stores[mid] = {}
            self.trace.machines_used = len(self._stores)
        return store

    def _check(self, mid: MachineId, used: int, stored: bool = True) -> None:
        if mid in self.exempt:
            key = _id_str(mid)
            self.trace.exempt_words[key] = max(self.trace.exempt_words.get(key, 0), used)
            return
        if used > self.cap:
            self.trace.failed = {"machine": _id_str(mid), "round": self.trace.rounds}
            raise CapViolation(mid, self.trace.rounds, used, self.cap)
        if stored:
            self.trace.peak_words = max(self.trace.peak_words, used)

    # driver interface --------------------------------------------------------

    def place(self, mid: MachineId, key: str, value: Any) -> None:
        """Initial input placement before the program starts."""
        store = self._touch(mid)
        store[key] = value
        self._check(mid, store_words(store))

    def machines(self, prefix: Optional[str] = None) -> List[MachineId]:
        ids = [m for m, s in self._stores.items() if s]
        if prefix is not None:
            ids = [m for m in ids if isinstance(m, tuple) and m and m[0] == prefix]
        return sorted(ids)

    def read(self, mid: MachineId) -> Store:
        """Driver-side read of a store for output extraction; never fed back into compute."""
        return dict(self._stores.get(mid, {}))

    def oracle(self, kind: str, word_charge: int) -> None:
        self.trace.oracle_calls.append({"kind": kind, "wordCharge": int(word_charge)})

    def step(self, fn: Callable[[MachineId, Store], Optional[Iterable[Message]]],
             machines: Optional[Iterable[MachineId]] = None) -> None:
        """One superstep: local compute on each machine, then message delivery."""
        self.trace.rounds += 1
        active = sorted(self.machines() if machines is None else set(machines))
        outgoing: List[Message] = []
        for mid in active:
            store = self._touch(mid)
            out = list(fn(mid, store) or ())
            sent = sum(words(p) for _, _, p in out)
            self._check(mid, store_words(store))
            self._check(mid, sent, stored=False)
            outgoing.extend(out)
        touched = []
        for dest, key, payload in outgoing:
            store = self._touch(dest)
            store.setdefault(key, []).append(payload)
            self.trace.total_words += words(payload)
            self.trace.total_messages += 1
            touched.append(dest)
        for mid in sorted(set(touched)):
            self._check(mid, store_words(self._stores[mid]))


def run_program(program: Callable[[Cluster], Any], cfg: MpcConfig,
                exempt: Iterable[MachineId] = ()) -> Tuple[Any, MpcTrace]:
    """Run ``program`` on a fresh cluster; a cap violation yields ``(None, failed trace)``."""
    cluster = Cluster(cfg, exempt)
    try:
        result = program(cluster)
    except CapViolation:
        return None, cluster.trace
    return result, cluster.trace
