"""Stopwatch Petri net structure: places, transitions, arcs, stopwatches.

The net is immutable after construction and safe to share between analysis
workers.  Structural checks live in :func:`validate_net`, which returns
diagnostics instead of raising so callers can report every problem at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional


class PlaceKind:
    NORMAL = "normal"
    SUSPENSION = "suspension"
    FEARED = "feared"

    ALL = (NORMAL, SUSPENSION, FEARED)


class TransitionKind:
    NORMAL = "normal"
    STOP = "stop"
    RESUME = "resume"
    FEARED = "feared"
    CALL = "call"

    ALL = (NORMAL, STOP, RESUME, FEARED, CALL)


@dataclass(frozen=True)
class TimeInterval:
    """Static firing interval [min, max]; ``max=None`` means unbounded."""

    min: Fraction
    max: Optional[Fraction]

    @staticmethod
    def of(lo, hi) -> "TimeInterval":
        return TimeInterval(Fraction(lo), None if hi is None else Fraction(hi))

    def __str__(self) -> str:
        hi = "inf" if self.max is None else str(self.max)
        return f"[{self.min},{hi}]"


@dataclass(frozen=True)
class Place:
    id: str
    kind: str = PlaceKind.NORMAL
    initial_marking: int = 0


@dataclass(frozen=True)
class Transition:
    id: str
    interval: TimeInterval
    kind: str = TransitionKind.NORMAL
    stopwatch: Optional[str] = None  # required iff kind is stop/resume
    calls: Optional[str] = None  # block name, call transitions only


@dataclass(frozen=True)
class StopwatchSpec:
    """One per stopwatch id; ``alpha_max=None`` means no suspension bound."""

    id: str
    alpha_max: Optional[Fraction]


@dataclass(frozen=True)
class PlaceInvariant:
    """Token-count conservation: sum of markings over ``places`` stays ``constant``."""

    places: frozenset[str]
    constant: int


@dataclass(frozen=True)
class SwpnNet:
    places: tuple[Place, ...]
    transitions: tuple[Transition, ...]
    pre: Mapping[str, frozenset[str]]  # transition id -> input place ids
    post: Mapping[str, frozenset[str]]  # transition id -> output place ids
    stopwatches: tuple[StopwatchSpec, ...] = ()
    invariants: tuple[PlaceInvariant, ...] = ()
    normal_places: frozenset[str] = frozenset()
    name: str = "net"

    def place(self, pid: str) -> Place:
        return self._place_index[pid]

    def transition(self, tid: str) -> Transition:
        return self._transition_index[tid]

    def stopwatch(self, wid: str) -> StopwatchSpec:
        return self._watch_index[wid]

    @property
    def _place_index(self) -> dict[str, Place]:
        idx = self.__dict__.get("_pidx")
        if idx is None:
            idx = {p.id: p for p in self.places}
            self.__dict__["_pidx"] = idx
        return idx

    @property
    def _transition_index(self) -> dict[str, Transition]:
        idx = self.__dict__.get("_tidx")
        if idx is None:
            idx = {t.id: t for t in self.transitions}
            self.__dict__["_tidx"] = idx
        return idx

    @property
    def _watch_index(self) -> dict[str, StopwatchSpec]:
        idx = self.__dict__.get("_widx")
        if idx is None:
            idx = {w.id: w for w in self.stopwatches}
            self.__dict__["_widx"] = idx
        return idx

    def initial_places(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.places if p.initial_marking)

    def feared_places(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.places if p.kind == PlaceKind.FEARED)

    def stop_transition(self, wid: str) -> Optional[Transition]:
        for t in self.transitions:
            if t.kind == TransitionKind.STOP and t.stopwatch == wid:
                return t
        return None

    def resume_transition(self, wid: str) -> Optional[Transition]:
        for t in self.transitions:
            if t.kind == TransitionKind.RESUME and t.stopwatch == wid:
                return t
        return None

    def watches_behind_place(self, pid: str) -> frozenset[str]:
        """Stopwatches whose stop transition can mark ``pid``.

        A feared transition consuming such a place drifts only once one of
        these suspensions has exceeded its bound.
        """
        out = set()
        for t in self.transitions:
            if t.kind == TransitionKind.STOP and t.stopwatch is not None:
                if pid in self.post.get(t.id, frozenset()):
                    out.add(t.stopwatch)
        return frozenset(out)

    def watches_behind_transition(self, tid: str) -> frozenset[str]:
        out: set[str] = set()
        for pid in self.pre.get(tid, frozenset()):
            out |= self.watches_behind_place(pid)
        return frozenset(out)


def make_net(
    places: Iterable[Place],
    transitions: Iterable[Transition],
    arcs: Iterable[tuple[str, str]],
    stopwatches: Iterable[StopwatchSpec] = (),
    invariants: Iterable[PlaceInvariant] = (),
    normal_places: Iterable[str] = (),
    name: str = "net",
) -> SwpnNet:
    """Build a net from (source, target) arcs; duplicates are collapsed."""
    places = tuple(places)
    transitions = tuple(transitions)
    pids = {p.id for p in places}
    pre: dict[str, set[str]] = {t.id: set() for t in transitions}
    post: dict[str, set[str]] = {t.id: set() for t in transitions}
    for src, dst in arcs:
        if src in pids:
            pre.setdefault(dst, set()).add(src)
        else:
            post.setdefault(src, set()).add(dst)
    return SwpnNet(
        places=places,
        transitions=transitions,
        pre={k: frozenset(v) for k, v in pre.items()},
        post={k: frozenset(v) for k, v in post.items()},
        stopwatches=tuple(stopwatches),
        invariants=tuple(invariants),
        normal_places=frozenset(normal_places),
        name=name,
    )


def validate_net(net: SwpnNet) -> list[str]:
    """Structural validation; returns one diagnostic per violation."""
    diags: list[str] = []
    seen: set[str] = set()
    for p in net.places:
        if p.id in seen:
            diags.append(f"duplicate place id '{p.id}'")
        seen.add(p.id)
        if p.kind not in PlaceKind.ALL:
            diags.append(f"place '{p.id}' has unknown kind '{p.kind}'")
        if p.initial_marking not in (0, 1):
            diags.append(f"place '{p.id}' initial marking must be 0 or 1")
        if p.kind == PlaceKind.FEARED and p.initial_marking != 0:
            diags.append(f"feared place '{p.id}' must start unmarked")

    place_ids = {p.id for p in net.places}
    tseen: set[str] = set()
    watch_refs: dict[str, list[Transition]] = {}
    for t in net.transitions:
        if t.id in tseen:
            diags.append(f"duplicate transition id '{t.id}'")
        tseen.add(t.id)
        if t.id in place_ids:
            diags.append(f"transition id '{t.id}' collides with a place id")
        if t.kind not in TransitionKind.ALL:
            diags.append(f"transition '{t.id}' has unknown kind '{t.kind}'")
        if t.interval.max is not None and t.interval.min > t.interval.max:
            diags.append(
                f"transition '{t.id}' interval {t.interval} has min > max"
            )
        if t.interval.min < 0:
            diags.append(f"transition '{t.id}' interval {t.interval} is negative")
        needs_watch = t.kind in (TransitionKind.STOP, TransitionKind.RESUME)
        if needs_watch and t.stopwatch is None:
            diags.append(f"{t.kind} transition '{t.id}' lacks a stopwatch id")
        if not needs_watch and t.stopwatch is not None:
            diags.append(f"transition '{t.id}' of kind {t.kind} must not name a stopwatch")
        if t.stopwatch is not None:
            watch_refs.setdefault(t.stopwatch, []).append(t)

    declared = {w.id for w in net.stopwatches}
    if len(declared) != len(net.stopwatches):
        diags.append("duplicate stopwatch spec")
    for w in net.stopwatches:
        if w.alpha_max is not None and w.alpha_max < 0:
            diags.append(f"stopwatch '{w.id}' has negative alpha_max")
    for wid, refs in sorted(watch_refs.items()):
        if wid not in declared:
            diags.append(f"stopwatch '{wid}' referenced but not declared")
        stops = [t for t in refs if t.kind == TransitionKind.STOP]
        resumes = [t for t in refs if t.kind == TransitionKind.RESUME]
        if len(stops) != 1 or len(resumes) != 1:
            diags.append(
                f"stopwatch '{wid}' needs exactly one stop and one resume "
                f"transition (got {len(stops)} stop, {len(resumes)} resume)"
            )

    for tid in sorted(set(net.pre) | set(net.post)):
        if tid not in tseen:
            diags.append(f"arc references unknown transition '{tid}'")
            continue
        for pid in sorted(net.pre.get(tid, frozenset()) | net.post.get(tid, frozenset())):
            if pid not in place_ids:
                diags.append(f"arc on '{tid}' references unknown place '{pid}'")

    marking = {p.id: p.initial_marking for p in net.places}
    for inv in net.invariants:
        missing = sorted(inv.places - place_ids)
        if missing:
            diags.append(f"invariant references unknown places {missing}")
            continue
        total = sum(marking[p] for p in inv.places)
        if total != inv.constant:
            names = "+".join(sorted(inv.places))
            diags.append(
                f"invariant {names}={inv.constant} does not hold initially (sum {total})"
            )

    for pid in sorted(net.normal_places):
        if pid not in place_ids:
            diags.append(f"normal set references unknown place '{pid}'")
        elif net.place(pid).kind != PlaceKind.NORMAL:
            diags.append(f"normal set entry '{pid}' is not a normal-kind place")

    return diags


def invert_net(net: SwpnNet) -> SwpnNet:
    """Exchange every arc's direction; everything else is preserved.

    Backward reasoning runs on the inverted net untimed, so intervals,
    kinds, stopwatch specs, invariants and the normal set carry over as-is.
    """
    return replace(net, pre=dict(net.post), post=dict(net.pre))


def strip_suspension_modeling(net: SwpnNet, name: Optional[str] = None) -> SwpnNet:
    """Remove suspension places and stop/resume transitions.

    This degrades a model to one without task interruption, the shape of
    older reliability models for the same systems.
    """
    drop_places = {p.id for p in net.places if p.kind == PlaceKind.SUSPENSION}
    drop_trans = {
        t.id
        for t in net.transitions
        if t.kind in (TransitionKind.STOP, TransitionKind.RESUME)
    }
    places = tuple(p for p in net.places if p.id not in drop_places)
    transitions = tuple(
        replace(t) for t in net.transitions if t.id not in drop_trans
    )
    pre = {
        tid: frozenset(ps - drop_places)
        for tid, ps in net.pre.items()
        if tid not in drop_trans
    }
    post = {
        tid: frozenset(ps - drop_places)
        for tid, ps in net.post.items()
        if tid not in drop_trans
    }
    kept_ids = {t.id for t in transitions}
    referenced = {t.stopwatch for t in transitions if t.stopwatch}
    return SwpnNet(
        places=places,
        transitions=transitions,
        pre={k: v for k, v in pre.items() if k in kept_ids},
        post={k: v for k, v in post.items() if k in kept_ids},
        stopwatches=tuple(w for w in net.stopwatches if w.id in referenced),
        invariants=tuple(
            inv for inv in net.invariants if not (inv.places & drop_places)
        ),
        normal_places=frozenset(net.normal_places - drop_places),
        name=name or (net.name + "-old"),
    )


def normalize_name(qualified: str) -> str:
    """Strip the block prefix from an elaborated id (``common.t11`` -> ``t11``)."""
    return qualified.rsplit(".", 1)[-1]
