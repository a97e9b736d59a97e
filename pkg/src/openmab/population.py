"""Open agent populations.

Each round realizes departures first and then arrivals.  In count-driven
modes (Poisson, schedule) the net size obeys ``M_t = max(0, M_{t-1} + A_t - D_t)``:
departures in excess of the agents on hand cancel that many of the round's
arrivals, which are then never instantiated.  Agents whose lifetime runs out
leave in addition to the counted departures.

Ids are assigned sequentially from 0 (the initial population takes
``0..M_0-1``) and are never reused.  Within a snapshot the active ids keep
the order in which agents entered, so the round's arrivals always form the
tail of ``active``.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import InternalInvariantError, InvalidParameterError, MalformedTraceError
from .streams import Streams, make_streams

MAX_TRACE_ID = 10**7
COUNT_CHUNK = 256
_NO_IDS = np.empty(0, dtype=np.int64)
_NO_IDS.flags.writeable = False


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _float_vector(x, name) -> np.ndarray:
    v = np.array(x, dtype=float).reshape(-1)
    if v.size == 0 or not np.isfinite(v.sum()):
        raise InvalidParameterError(f"{name} must be a non-empty finite vector")
    return _frozen(v)


def member_mask(ids: np.ndarray, targets) -> np.ndarray:
    """``np.isin(ids, targets)``, with a fast path for the usual handful of targets."""
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if targets.size > 8:
        return np.isin(ids, targets)
    mask = np.zeros(ids.shape, dtype=bool)
    for x in targets.tolist():
        mask |= ids == x
    return mask


@dataclass(frozen=True, eq=False)
class AgentProfile:
    id: int
    arrival_time: int
    mean_vector: np.ndarray
    lifetime: Optional[int] = None
    features: Optional[np.ndarray] = None
    cluster: Optional[int] = None
    entry_estimates: Optional[np.ndarray] = None
    certificate: float = 1.0
    label: Optional[str] = None

    def __post_init__(self):
        if int(self.id) != self.id or self.id < 0:
            raise InvalidParameterError(f"agent id must be a nonnegative integer, got {self.id!r}")
        if int(self.arrival_time) != self.arrival_time or self.arrival_time < 0:
            raise InvalidParameterError(f"arrival_time must be a nonnegative integer, got {self.arrival_time!r}")
        mu = _float_vector(self.mean_vector, "mean_vector")
        if not (mu.min() >= 0.0 and mu.max() <= 1.0):
            raise InvalidParameterError(f"agent {self.id}: means must lie in [0,1], got {mu.tolist()}")
        object.__setattr__(self, "mean_vector", mu)
        if self.lifetime is not None and (int(self.lifetime) != self.lifetime or self.lifetime < 1):
            raise InvalidParameterError(f"agent {self.id}: lifetime must be a positive integer")
        if self.features is not None:
            x = _float_vector(self.features, "features")
            if np.linalg.norm(x) > 1.0 + 1e-12:
                raise InvalidParameterError(f"agent {self.id}: feature norm exceeds 1")
            object.__setattr__(self, "features", x)
        if self.cluster is not None and (int(self.cluster) != self.cluster or self.cluster < 0):
            raise InvalidParameterError(f"agent {self.id}: cluster label must be a nonnegative integer")
        if self.entry_estimates is not None:
            e = _float_vector(self.entry_estimates, "entry_estimates")
            if e.size != mu.size:
                raise InvalidParameterError(f"agent {self.id}: entry_estimates length {e.size} != K={mu.size}")
            object.__setattr__(self, "entry_estimates", e)
        if not np.isfinite(self.certificate) or self.certificate < 0:
            raise InvalidParameterError(f"agent {self.id}: certificate must be finite and >= 0")

    @property
    def K(self) -> int:
        return self.mean_vector.size

    def certificate_holds(self, tol: float = 1e-12) -> bool:
        if self.entry_estimates is None:
            return True
        return float(np.max(np.abs(self.entry_estimates - self.mean_vector))) <= self.certificate + tol


@dataclass(frozen=True)
class LifetimeLaw:
    kind: str
    q: Optional[float] = None
    length: Optional[int] = None

    def __post_init__(self):
        if self.kind == "geometric":
            if self.q is None or not 0.0 < self.q < 1.0:
                raise InvalidParameterError(f"geometric lifetime needs q in (0,1), got {self.q!r}")
        elif self.kind == "fixed":
            if self.length is None or int(self.length) != self.length or self.length < 1:
                raise InvalidParameterError(f"fixed lifetime needs a positive length, got {self.length!r}")
        else:
            raise InvalidParameterError(f"unknown lifetime law {self.kind!r}")

    @classmethod
    def geometric(cls, q: float) -> "LifetimeLaw":
        return cls("geometric", q=float(q))

    @classmethod
    def fixed(cls, length: int) -> "LifetimeLaw":
        return cls("fixed", length=int(length))

    def sample(self, rng: np.random.Generator) -> int:
        # geometric support is {1, 2, ...}: P(L = k) = (1-q)^(k-1) q
        if self.kind == "geometric":
            return int(rng.geometric(self.q))
        return self.length

    def to_dict(self) -> dict:
        if self.kind == "geometric":
            return {"law": "geometric", "q": self.q}
        return {"law": "fixed", "length": self.length}

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> Optional["LifetimeLaw"]:
        if d is None:
            return None
        if d.get("law") == "geometric":
            return cls.geometric(d["q"])
        if d.get("law") == "fixed":
            return cls.fixed(d["length"])
        raise InvalidParameterError(f"unknown lifetime law {d!r}")


@dataclass(frozen=True)
class ArrivalClass:
    rate: float
    label: Optional[str] = None
    lifetime: Optional[LifetimeLaw] = None

    def __post_init__(self):
        if not np.isfinite(self.rate) or self.rate < 0:
            raise InvalidParameterError(f"arrival rate must be finite and >= 0, got {self.rate!r}")


@dataclass(frozen=True)
class AgentPattern:
    """How the population evolves.

    ``poisson``: one or more arrival classes with Poisson counts, plus
    Poisson departures at ``departure_rate``.  ``schedule``: explicit
    per-round counts (round ``t`` reads index ``t-1``; rounds past the end
    are empty).  ``trace``: explicit ``(t, "arrive"|"depart", id)`` events.
    """

    kind: str
    classes: tuple = ()
    departure_rate: float = 0.0
    arrivals: tuple = ()
    departures: tuple = ()
    events: tuple = ()
    lifetime: Optional[LifetimeLaw] = None

    def __post_init__(self):
        if self.kind == "poisson":
            if not self.classes:
                raise InvalidParameterError("poisson pattern needs at least one arrival class")
            if not np.isfinite(self.departure_rate) or self.departure_rate < 0:
                raise InvalidParameterError(f"departure rate must be finite and >= 0, got {self.departure_rate!r}")
        elif self.kind == "schedule":
            for name in ("arrivals", "departures"):
                counts = getattr(self, name)
                if any(int(c) != c or c < 0 for c in counts):
                    raise InvalidParameterError(f"schedule {name} counts must be nonnegative integers")
        elif self.kind == "trace":
            last = 0
            for t, ev, aid in self.events:
                if t < 1 or t < last:
                    raise MalformedTraceError(f"trace rounds must be >= 1 and nondecreasing (at t={t})")
                if ev not in ("arrive", "depart"):
                    raise MalformedTraceError(f"unknown trace event {ev!r}")
                if aid < 0 or aid > MAX_TRACE_ID:
                    raise MalformedTraceError(f"trace agent id out of range: {aid}")
                last = t
        else:
            raise InvalidParameterError(f"unknown pattern kind {self.kind!r}")

    @classmethod
    def poisson(cls, arrival_rate: float, departure_rate: float = 0.0,
                lifetime: Optional[LifetimeLaw] = None) -> "AgentPattern":
        return cls("poisson", classes=(ArrivalClass(float(arrival_rate), None, lifetime),),
                   departure_rate=float(departure_rate))

    @classmethod
    def poisson_classes(cls, classes: Sequence[ArrivalClass], departure_rate: float = 0.0) -> "AgentPattern":
        return cls("poisson", classes=tuple(classes), departure_rate=float(departure_rate))

    @classmethod
    def schedule(cls, arrivals: Sequence[int], departures: Sequence[int] = (),
                 lifetime: Optional[LifetimeLaw] = None) -> "AgentPattern":
        return cls("schedule", arrivals=tuple(int(a) for a in arrivals),
                   departures=tuple(int(d) for d in departures), lifetime=lifetime)

    @classmethod
    def trace(cls, events: Sequence[tuple]) -> "AgentPattern":
        return cls("trace", events=tuple((int(t), str(e), int(a)) for t, e, a in events))

    @property
    def arrival_rate(self) -> float:
        return float(sum(c.rate for c in self.classes))

    @property
    def has_lifetimes(self) -> bool:
        return self.lifetime is not None or any(c.lifetime is not None for c in self.classes)

    def to_dict(self) -> dict:
        if self.kind == "poisson":
            return {
                "kind": "poisson",
                "classes": [
                    {"rate": c.rate, "label": c.label,
                     "lifetime": c.lifetime.to_dict() if c.lifetime else None}
                    for c in self.classes
                ],
                "departure_rate": self.departure_rate,
            }
        if self.kind == "schedule":
            return {
                "kind": "schedule",
                "arrivals": list(self.arrivals),
                "departures": list(self.departures),
                "lifetime": self.lifetime.to_dict() if self.lifetime else None,
            }
        return {"kind": "trace", "events": [list(e) for e in self.events]}

    @classmethod
    def from_dict(cls, d: dict) -> "AgentPattern":
        kind = d.get("kind")
        if kind == "poisson":
            classes = [ArrivalClass(float(c["rate"]), c.get("label"), LifetimeLaw.from_dict(c.get("lifetime")))
                       for c in d["classes"]]
            return cls.poisson_classes(classes, d.get("departure_rate", 0.0))
        if kind == "schedule":
            return cls.schedule(d["arrivals"], d.get("departures", ()), LifetimeLaw.from_dict(d.get("lifetime")))
        if kind == "trace":
            return cls.trace(d["events"])
        raise InvalidParameterError(f"unknown pattern kind {kind!r}")


def _trace_index(events) -> dict:
    by_round = {}
    for t, ev, aid in events:
        by_round.setdefault(t, ([], []))[0 if ev == "depart" else 1].append(aid)
    return by_round


@dataclass(frozen=True, eq=False)
class PopulationSnapshot:
    round: int
    active: np.ndarray
    n_arrivals: int
    departures: np.ndarray

    @property
    def size(self) -> int:
        return self.active.shape[0]

    @property
    def arrivals(self) -> np.ndarray:
        return self.active[self.size - self.n_arrivals:]

    @property
    def continuing(self) -> np.ndarray:
        return self.active[: self.size - self.n_arrivals]

    def __eq__(self, other):
        if not isinstance(other, PopulationSnapshot):
            return NotImplemented
        return (self.round == other.round and self.n_arrivals == other.n_arrivals
                and np.array_equal(self.active, other.active)
                and np.array_equal(self.departures, other.departures))

    __hash__ = None

    def check(self, prev: Optional["PopulationSnapshot"] = None) -> None:
        """Raise InternalInvariantError unless the partition invariants hold."""
        arr, cont = self.arrivals, self.continuing
        if np.unique(self.active).size != self.size:
            raise InternalInvariantError(f"round {self.round}: duplicate active ids")
        if not 0 <= self.n_arrivals <= self.size:
            raise InternalInvariantError(f"round {self.round}: bad arrival count")
        if np.intersect1d(self.departures, self.active).size:
            raise InternalInvariantError(f"round {self.round}: departed agent still active")
        if np.intersect1d(arr, cont).size:
            raise InternalInvariantError(f"round {self.round}: arrivals overlap continuing")
        if prev is not None:
            if self.round != prev.round + 1:
                raise InternalInvariantError(f"round {self.round}: not the successor of {prev.round}")
            if np.setdiff1d(self.departures, prev.active).size:
                raise InternalInvariantError(f"round {self.round}: departure of an inactive agent")
            expected = prev.active[~np.isin(prev.active, self.departures)]
            if not np.array_equal(expected, cont):
                raise InternalInvariantError(f"round {self.round}: continuing != previous minus departures")
            if np.intersect1d(arr, prev.active).size:
                raise InternalInvariantError(f"round {self.round}: arrival was already active")


class AgentTable:
    """Append-only store of every profile created in a run, with columnar views."""

    def __init__(self):
        self._profiles = []
        self._row_of = np.full(16, -1, dtype=np.int64)
        self._means = None
        self._cluster = np.empty(16, dtype=np.int64)
        self._cert = np.empty(16)

    def __len__(self) -> int:
        return len(self._profiles)

    def __contains__(self, agent_id) -> bool:
        return 0 <= agent_id < self._row_of.size and self._row_of[agent_id] >= 0

    def __getitem__(self, agent_id) -> AgentProfile:
        if agent_id not in self:
            raise KeyError(agent_id)
        return self._profiles[self._row_of[agent_id]]

    def __iter__(self):
        return iter(self._profiles)

    @property
    def K(self) -> Optional[int]:
        return None if self._means is None else self._means.shape[1]

    def add(self, profile: AgentProfile) -> None:
        if profile.id in self:
            raise InternalInvariantError(f"agent id {profile.id} registered twice")
        row = len(self._profiles)
        if self._means is None:
            self._means = np.empty((16, profile.K))
        elif profile.K != self._means.shape[1]:
            raise InvalidParameterError(f"agent {profile.id} has K={profile.K}, table has K={self._means.shape[1]}")
        if row >= self._means.shape[0]:
            cap = 2 * self._means.shape[0]
            self._means = np.resize(self._means, (cap, self._means.shape[1]))
            self._cluster = np.resize(self._cluster, cap)
            self._cert = np.resize(self._cert, cap)
        if profile.id >= self._row_of.size:
            grown = np.full(max(2 * self._row_of.size, profile.id + 1), -1, dtype=np.int64)
            grown[: self._row_of.size] = self._row_of
            self._row_of = grown
        self._row_of[profile.id] = row
        self._means[row] = profile.mean_vector
        self._cluster[row] = -1 if profile.cluster is None else profile.cluster
        self._cert[row] = profile.certificate
        self._profiles.append(profile)

    def rows(self, ids) -> np.ndarray:
        r = self._row_of[np.asarray(ids, dtype=np.int64)]
        if r.size and r.min() < 0:
            raise KeyError("unknown agent id")
        return r

    def means_of(self, ids) -> np.ndarray:
        return self._means[self.rows(ids)]

    def mean_column(self, ids, arm: int) -> np.ndarray:
        return self._means[self.rows(ids), arm]

    def clusters_of(self, ids) -> np.ndarray:
        return self._cluster[self.rows(ids)]

    def certificates_of(self, ids) -> np.ndarray:
        return self._cert[self.rows(ids)]


class Roster:
    """Mutable bookkeeping behind a population: ids, expiries, and the active buffer.

    Snapshots hold read-only views into an append-only id buffer.  Arrivals
    are written past the end of every existing view; a departure triggers a
    compacted copy, so earlier snapshots never observe later changes.
    """

    def __init__(self):
        self.table = AgentTable()
        self.next_id = 0
        self.round = 0
        self.expiry = {}
        self.alive = set()
        self.seen = set()
        self.trace_index = None
        self._buf = np.empty(16, dtype=np.int64)
        self._n = 0
        self._counts = None
        self._counts_from = 1

    def draw_counts(self, pattern: "AgentPattern", t: int, streams: Streams) -> tuple:
        """Per-class arrival counts and the departure count for round t.

        Poisson counts are drawn in chunks; the arrivals and departures
        streams serve nothing else, so chunking yields the same values as
        drawing round by round.
        """
        if pattern.kind != "poisson":
            a = pattern.arrivals[t - 1] if t <= len(pattern.arrivals) else 0
            d = pattern.departures[t - 1] if t <= len(pattern.departures) else 0
            return [int(a)], int(d)
        if self._counts is None or t - self._counts_from >= len(self._counts[0]):
            rates = np.array([c.rate for c in pattern.classes])
            A = streams.arrivals.poisson(rates, size=(COUNT_CHUNK, rates.size)).tolist()
            if pattern.departure_rate > 0:
                D = streams.departures.poisson(pattern.departure_rate, size=COUNT_CHUNK).tolist()
            else:
                D = [0] * COUNT_CHUNK
            self._counts, self._counts_from = (A, D), t
        i = t - self._counts_from
        return list(self._counts[0][i]), self._counts[1][i]

    def _view(self) -> np.ndarray:
        return _frozen(self._buf[: self._n])

    def _drop(self, keep: np.ndarray) -> None:
        kept = self._buf[: self._n][keep]
        buf = np.empty(max(16, 2 * kept.size), dtype=np.int64)
        buf[: kept.size] = kept
        self._buf, self._n = buf, kept.size

    def _append(self, ids: Sequence[int]) -> None:
        n = len(ids)
        if self._n + n > self._buf.size:
            buf = np.empty(max(2 * self._buf.size, self._n + n), dtype=np.int64)
            buf[: self._n] = self._buf[: self._n]
            self._buf = buf
        self._buf[self._n: self._n + n] = ids
        self._n += n

    def _admit(self, aid: int, t: int, label, life, agent_factory, streams: Streams) -> None:
        if agent_factory is not None:
            profile = agent_factory(aid, t, label, streams.latent)
            if profile.id != aid or profile.arrival_time != t:
                raise InternalInvariantError(f"factory returned id/time {profile.id}/{profile.arrival_time} for {aid}/{t}")
            if life is not None:
                if int(life) != life or life < 1:
                    raise InternalInvariantError(f"agent {aid}: sampled lifetime {life!r}")
                # the profile is fresh and unshared, so setting the sampled lifetime avoids revalidation
                object.__setattr__(profile, "lifetime", int(life))
            self.table.add(profile)
        if life is not None:
            self.expiry.setdefault(t + life, []).append(aid)
        self.alive.add(aid)
        self.seen.add(aid)

    def initial(self, M_0: int, agent_factory, streams: Streams, labels=None) -> PopulationSnapshot:
        if int(M_0) != M_0 or M_0 < 0:
            raise InvalidParameterError(f"M_0 must be a nonnegative integer, got {M_0!r}")
        if labels is not None and len(labels) != M_0:
            raise InvalidParameterError("initial labels must have length M_0")
        ids = list(range(M_0))
        for aid in ids:
            self._admit(aid, 0, None if labels is None else labels[aid], None, agent_factory, streams)
        self.next_id = M_0
        self._append(ids)
        return PopulationSnapshot(0, self._view(), 0, _frozen(np.empty(0, dtype=np.int64)))


def poisson_sample(rate: float, rng: np.random.Generator) -> int:
    if not np.isfinite(rate) or rate < 0:
        raise InvalidParameterError(f"Poisson rate must be finite and >= 0, got {rate!r}")
    if rate == 0:
        return 0
    return int(rng.poisson(rate))


def step_population(prev: PopulationSnapshot, pattern: AgentPattern,
                    agent_factory: Optional[Callable], streams: Streams,
                    roster: Roster) -> PopulationSnapshot:
    """Advance ``prev`` by one round.

    ``agent_factory(agent_id, round, label, rng) -> AgentProfile`` builds the
    profile of each arrival (``None`` tracks ids only).  ``roster`` must be
    the bookkeeping that produced ``prev``.
    """
    if roster.round != prev.round or roster._n != prev.size:
        raise InternalInvariantError("roster is out of sync with the previous snapshot")
    t = prev.round + 1
    M_prev = prev.size
    drop = np.zeros(M_prev, dtype=bool)

    if pattern.kind == "trace":
        if roster.trace_index is None:
            roster.trace_index = _trace_index(pattern.events)
        gone, new = roster.trace_index.get(t, ([], []))
        for aid in gone:
            if aid not in roster.alive:
                raise MalformedTraceError(f"round {t}: departure of unknown or inactive agent {aid}")
        for aid in new:
            if aid in roster.seen:
                raise MalformedTraceError(f"round {t}: agent {aid} arrives twice")
        if len(set(new)) != len(new) or len(set(gone)) != len(gone):
            raise MalformedTraceError(f"round {t}: duplicate ids in one round")
        if gone:
            drop |= member_mask(prev.active, gone)
        plan = [(aid, None, None) for aid in new]
    else:
        counts, D = roster.draw_counts(pattern, t, streams)
        expired = [a for a in roster.expiry.pop(t, ()) if a in roster.alive]
        if expired:
            drop |= member_mask(prev.active, expired)
        avail = M_prev - len(expired)
        A = sum(counts)
        D_eff = min(D, avail + A)
        k = min(D_eff, avail)
        if k:
            candidates = np.flatnonzero(~drop) if expired else M_prev
            drop[streams.targets.choice(candidates, k, replace=False)] = True
        # departures beyond the available agents cancel arrivals, last class first
        absorbed = D_eff - k
        for c in range(len(counts) - 1, -1, -1):
            cut = min(absorbed, counts[c])
            counts[c] -= cut
            absorbed -= cut
        classes = pattern.classes if pattern.kind == "poisson" else (ArrivalClass(0.0, None, pattern.lifetime),)
        plan = []
        for cls, n in zip(classes, counts):
            for _ in range(n):
                life = cls.lifetime.sample(streams.lifetimes) if cls.lifetime is not None else None
                plan.append((None, cls.label, life))

    departures = prev.active[drop] if (pattern.kind == "trace" or k or expired) else _NO_IDS
    if departures.size:
        roster._drop(~drop)
        roster.alive.difference_update(departures.tolist())
    ids = []
    for aid, label, life in plan:
        if aid is None:
            aid = roster.next_id
            roster.next_id += 1
        else:
            roster.next_id = max(roster.next_id, aid + 1)
        roster._admit(aid, t, label, life, agent_factory, streams)
        ids.append(aid)
    if ids:
        roster._append(ids)
    roster.round = t
    return PopulationSnapshot(t, roster._view(), len(ids), _frozen(departures.copy()) if departures.size else _NO_IDS)


class PopulationProcess:
    """A seeded population: the initial cohort plus a stepping interface."""

    def __init__(self, pattern: AgentPattern, M_0: int, agent_factory: Optional[Callable] = None,
                 seed=None, initial_labels=None):
        self.pattern = pattern
        self.agent_factory = agent_factory
        self.streams = make_streams(seed)
        self.roster = Roster()
        self.snapshot = self.roster.initial(M_0, agent_factory, self.streams, initial_labels)

    @property
    def agents(self) -> AgentTable:
        return self.roster.table

    def step(self) -> PopulationSnapshot:
        self.snapshot = step_population(self.snapshot, self.pattern, self.agent_factory,
                                        self.streams, self.roster)
        return self.snapshot


def population_trajectory(pattern: AgentPattern, M_0: int, T: int, seed=None,
                          agent_factory: Optional[Callable] = None,
                          initial_labels=None) -> list:
    """Snapshots for rounds 1..T."""
    if int(T) != T or T < 1:
        raise InvalidParameterError(f"T must be a positive integer, got {T!r}")
    proc = PopulationProcess(pattern, M_0, agent_factory, seed, initial_labels)
    return [proc.step() for _ in range(T)]


def population_sizes(pattern: AgentPattern, M_0: int, T: int, seed=None) -> np.ndarray:
    """Sizes M_1..M_T, drawn in bulk.

    Only for count-driven patterns without lifetimes; the result equals the
    sizes of ``population_trajectory`` under the same seed.
    """
    if pattern.kind == "trace" or pattern.has_lifetimes:
        raise InvalidParameterError("bulk sizes need a count-driven pattern without lifetimes")
    streams = make_streams(seed)
    if pattern.kind == "poisson":
        A = streams.arrivals.poisson(np.array([c.rate for c in pattern.classes]), size=(T, len(pattern.classes))).sum(1)
        D = streams.departures.poisson(pattern.departure_rate, size=T) if pattern.departure_rate > 0 else np.zeros(T, int)
    else:
        A = np.zeros(T, dtype=np.int64)
        D = np.zeros(T, dtype=np.int64)
        n = min(T, len(pattern.arrivals))
        A[:n] = pattern.arrivals[:n]
        n = min(T, len(pattern.departures))
        D[:n] = pattern.departures[:n]
    if not D.any():
        return M_0 + np.cumsum(A)
    sizes = np.empty(T, dtype=np.int64)
    m = M_0
    for t in range(T):
        m = max(0, m + int(A[t]) - int(D[t]))
        sizes[t] = m
    return sizes


def _lines(path):
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, [f.strip() for f in line.split(",")]


def load_trace(path) -> AgentPattern:
    """Read ``t,event,agent_id`` lines (event is ``arrive`` or ``depart``)."""
    events = []
    for lineno, f in _lines(path):
        if f == ["t", "event", "agent_id"]:
            continue
        if len(f) != 3:
            raise MalformedTraceError(f"{path}:{lineno}: expected t,event,agent_id")
        try:
            events.append((int(f[0]), f[1], int(f[2])))
        except ValueError:
            raise MalformedTraceError(f"{path}:{lineno}: non-integer field") from None
    return AgentPattern.trace(events)


def load_schedule(path, lifetime: Optional[LifetimeLaw] = None) -> AgentPattern:
    """Read ``t,arrivals,departures`` lines; unlisted rounds have zero counts."""
    rows = {}
    for lineno, f in _lines(path):
        if f == ["t", "arrivals", "departures"]:
            continue
        try:
            t, a, d = (int(x) for x in f)
        except ValueError:
            raise InvalidParameterError(f"{path}:{lineno}: expected three integers") from None
        if t < 1 or t in rows:
            raise InvalidParameterError(f"{path}:{lineno}: round {t} is invalid or repeated")
        rows[t] = (a, d)
    T = max(rows, default=0)
    arrivals = [rows.get(t, (0, 0))[0] for t in range(1, T + 1)]
    departures = [rows.get(t, (0, 0))[1] for t in range(1, T + 1)]
    return AgentPattern.schedule(arrivals, departures, lifetime)
