"""Events, tokens, analysis states and the untimed firing rule.

Tokens remember the event that produced them, so firing a transition
simultaneously extends the event set and the precedence relation that the
scenario extractor later reports as a partial order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Optional

from .model import PlaceKind, SwpnNet, TransitionKind, normalize_name


# --------------------------------------------------------------------------
# Event identities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Initial:
    """The distinguished start event, rendered ``i``."""

    def render(self) -> str:
        return "i"


@dataclass(frozen=True)
class Firing:
    transition: str
    occurrence: int = 1

    def render(self) -> str:
        base = normalize_name(self.transition)
        return base if self.occurrence == 1 else f"{base}#{self.occurrence}"


@dataclass(frozen=True)
class Enrichment:
    ordinal: int

    def render(self) -> str:
        return f"e{self.ordinal}"


@dataclass(frozen=True)
class Sink:
    ordinal: int

    def render(self) -> str:
        return f"f{self.ordinal}"


EventId = Initial | Firing | Enrichment | Sink

INITIAL = Initial()


@dataclass(frozen=True)
class Token:
    producer: EventId
    place: str


# --------------------------------------------------------------------------
# Stopwatch bookkeeping
# --------------------------------------------------------------------------

class WatchState:
    INACTIVE = "inactive"
    RUNNING = "running"
    BRANCHED_OVER = "branched-over"


class CheckResult:
    WITHIN_BOUND = "within-bound"
    EXCEEDED = "exceeded"
    BOTH = "both"


class StopwatchInactive(Exception):
    pass


def check_transition(
    status: str,
    alpha_max: Optional[Fraction],
    duration_min: Fraction = Fraction(0),
    duration_max: Optional[Fraction] = None,
) -> str:
    """Compare a symbolic suspension duration against the stop-time bound.

    ``duration_min``/``duration_max`` bound what is known about the
    suspension; with an unconstrained duration the answer is BOTH and the
    caller explores the resumption and the drift branch.
    """
    if status != WatchState.RUNNING:
        raise StopwatchInactive("stopwatch is not running")
    if alpha_max is None:
        return CheckResult.WITHIN_BOUND
    if duration_min > alpha_max:
        return CheckResult.EXCEEDED
    if duration_max is not None and duration_max <= alpha_max:
        return CheckResult.WITHIN_BOUND
    return CheckResult.BOTH


# --------------------------------------------------------------------------
# Analysis state
# --------------------------------------------------------------------------

class NotEnabled(Exception):
    pass


class Prohibited(Exception):
    pass


class UnsafeMarking(Exception):
    pass


@dataclass(frozen=True)
class AnalysisState:
    """One exploration branch: current tokens plus the event history."""

    tokens: frozenset[Token]
    prohibited: frozenset[str] = frozenset()  # L_int
    events: tuple[EventId, ...] = (INITIAL,)
    arcs: tuple[tuple[EventId, EventId], ...] = ()
    enriched: tuple[Token, ...] = ()  # L_e
    watch_status: tuple[tuple[str, str], ...] = ()
    visited_normal: tuple[str, ...] = ()  # L_nni
    initial_places: frozenset[str] = frozenset()
    occurrences: tuple[tuple[str, int], ...] = ()
    branch_condition: Optional[str] = None
    bifurcation: Optional["object"] = None
    fired_count: int = 0

    def marked_places(self) -> frozenset[str]:
        return frozenset(tok.place for tok in self.tokens)

    def watch(self, wid: str) -> str:
        for key, value in self.watch_status:
            if key == wid:
                return value
        return WatchState.INACTIVE

    def with_watch(self, wid: str, value: str) -> "AnalysisState":
        status = tuple((k, v) for k, v in self.watch_status if k != wid)
        return replace(self, watch_status=status + ((wid, value),))

    def occurrence_of(self, tid: str) -> int:
        for key, value in self.occurrences:
            if key == tid:
                return value
        return 0


def initial_state(net: SwpnNet, places: Iterable[str]) -> AnalysisState:
    pl = frozenset(places)
    return AnalysisState(
        tokens=frozenset(Token(INITIAL, p) for p in sorted(pl)),
        initial_places=pl,
    )


# --------------------------------------------------------------------------
# Enablement queries
# --------------------------------------------------------------------------

def fireable(net: SwpnNet, tokens: frozenset[Token]) -> frozenset[str]:
    """Transitions whose every input place holds a token."""
    marked = frozenset(t.place for t in tokens)
    return frozenset(
        t.id for t in net.transitions if net.pre.get(t.id, frozenset()) <= marked
    )


def partially_fireable(net: SwpnNet, tokens: frozenset[Token]) -> frozenset[str]:
    """Transitions with some, but not all, input places marked."""
    marked = frozenset(t.place for t in tokens)
    out = set()
    for t in net.transitions:
        pre = net.pre.get(t.id, frozenset())
        have = pre & marked
        if have and have != pre:
            out.add(t.id)
    return frozenset(out)


def in_conflict(net: SwpnNet, tokens: frozenset[Token], a: str, b: str) -> bool:
    """Effective structural conflict: a shared input place that is marked."""
    marked = frozenset(t.place for t in tokens)
    shared = net.pre.get(a, frozenset()) & net.pre.get(b, frozenset())
    return bool(shared & marked)


def sort_transitions(net: SwpnNet, candidates: Iterable[str]) -> list[str]:
    """Order candidates by urgency under strong time semantics.

    Ascending static minimum, then ascending maximum (earlier forced
    deadline first), then id so that reports are reproducible.
    """
    def key(tid: str):
        iv = net.transition(tid).interval
        unbounded = iv.max is None
        return (iv.min, unbounded, iv.max if iv.max is not None else Fraction(0), tid)

    return sorted(candidates, key=key)


# --------------------------------------------------------------------------
# Firing
# --------------------------------------------------------------------------

def fire_transition(state: AnalysisState, net: SwpnNet, tid: str) -> AnalysisState:
    """Fire ``tid``: move tokens, extend events/arcs, update stopwatches."""
    if tid in state.prohibited:
        raise Prohibited(f"transition '{tid}' is prohibited in this branch")
    if tid not in fireable(net, state.tokens):
        raise NotEnabled(f"transition '{tid}' is not enabled")

    trans = net.transition(tid)
    occ = state.occurrence_of(tid) + 1
    event = Firing(tid, occ)

    consumed = [tok for tok in state.tokens if tok.place in net.pre.get(tid, frozenset())]
    remaining = set(state.tokens) - set(consumed)

    new_arcs = list(state.arcs)
    for tok in sorted(consumed, key=lambda t: t.place):
        # Enrichment producers stay out of the reported precedence relation;
        # the injected tokens are listed separately.
        if isinstance(tok.producer, Enrichment):
            continue
        arc = (tok.producer, event)
        if arc not in new_arcs:
            new_arcs.append(arc)

    produced = []
    visited = list(state.visited_normal)
    for pid in sorted(net.post.get(tid, frozenset())):
        if any(tok.place == pid for tok in remaining):
            raise UnsafeMarking(f"firing '{tid}' would put a second token in '{pid}'")
        produced.append(Token(event, pid))
        place = net.place(pid)
        if place.kind == PlaceKind.NORMAL and pid not in state.initial_places:
            visited.append(pid)

    new_state = replace(
        state,
        tokens=frozenset(remaining) | frozenset(produced),
        events=state.events + (event,),
        arcs=tuple(new_arcs),
        visited_normal=tuple(visited),
        occurrences=tuple((k, v) for k, v in state.occurrences if k != tid)
        + ((tid, occ),),
        fired_count=state.fired_count + 1,
    )
    if trans.kind == TransitionKind.STOP and trans.stopwatch:
        new_state = new_state.with_watch(trans.stopwatch, WatchState.RUNNING)
    elif trans.kind == TransitionKind.RESUME and trans.stopwatch:
        # Post-initialization: resuming resets the stopwatch to zero.
        new_state = new_state.with_watch(trans.stopwatch, WatchState.INACTIVE)
    return new_state
