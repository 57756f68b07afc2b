"""Textual model format: parser with positioned diagnostics and serializer.

One declaration per line, ``#`` starts a comment.  A document holds one or
more ``net`` blocks plus an optional ``analysis`` section; cross-block
composition happens through call transitions (``kind=call calls=<block>``).
Parsing never raises: every problem becomes a positioned diagnostic and the
parser keeps going so several mistakes surface in a single pass.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .model import (
    Place,
    PlaceInvariant,
    PlaceKind,
    StopwatchSpec,
    SwpnNet,
    TimeInterval,
    Transition,
    TransitionKind,
    make_net,
)

ID_RE = re.compile(r"[A-Za-z][A-Za-z0-9_-]*$")

_PLACE_KINDS = {"normal", "suspension", "feared"}
_TRANS_KINDS = {"normal", "stop", "resume", "feared", "call"}


class CompositionError(Exception):
    pass


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    message: str
    severity: str = "error"  # "error" | "warning"

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


@dataclass(frozen=True)
class NetBlock:
    name: str
    places: tuple[Place, ...] = ()
    transitions: tuple[Transition, ...] = ()
    arcs: tuple[tuple[str, str], ...] = ()
    stopwatches: tuple[StopwatchSpec, ...] = ()
    invariants: tuple[PlaceInvariant, ...] = ()
    normal_places: frozenset[str] = frozenset()


@dataclass(frozen=True)
class AnalysisSection:
    target: Optional[str] = None
    extra_targets: tuple[str, ...] = ()
    alpha_max: Optional[str] = None  # rational text or "inf"
    depth_limit: Optional[int] = None


@dataclass(frozen=True)
class ModelDocument:
    blocks: tuple[NetBlock, ...] = ()
    analysis: Optional[AnalysisSection] = None


@dataclass
class ParseResult:
    document: Optional[ModelDocument]
    diagnostics: list[ParseDiagnostic] = field(default_factory=list)

    @property
    def errors(self) -> list[ParseDiagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]

    @property
    def ok(self) -> bool:
        return self.document is not None and not self.errors


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

def _parse_rational(text: str) -> Optional[Fraction]:
    if text == "inf":
        return None
    return Fraction(text)


def _attrs(rest: str, line_no: int, offset: int, diags: list[ParseDiagnostic]):
    """Split ``key=value`` attributes, reporting position of bad ones."""
    out: dict[str, tuple[str, int]] = {}
    for m in re.finditer(r"(\S+)", rest):
        token = m.group(1)
        col = offset + m.start() + 1
        if "=" not in token:
            diags.append(ParseDiagnostic(line_no, col, f"expected key=value, got '{token}'"))
            continue
        key, value = token.split("=", 1)
        out[key] = (value, col)
    return out


class _Parser:
    def __init__(self, source: str):
        self.lines = source.splitlines()
        self.diags: list[ParseDiagnostic] = []
        self.blocks: list[NetBlock] = []
        self.analysis: Optional[AnalysisSection] = None

    def error(self, line: int, col: int, msg: str) -> None:
        self.diags.append(ParseDiagnostic(line, col, msg))

    def warning(self, line: int, col: int, msg: str) -> None:
        self.diags.append(ParseDiagnostic(line, col, msg, severity="warning"))

    def parse(self) -> ParseResult:
        i = 0
        saw_anything = False
        while i < len(self.lines):
            raw = self.lines[i]
            text = raw.split("#", 1)[0].rstrip()
            if not text.strip():
                i += 1
                continue
            saw_anything = True
            stripped = text.strip()
            indent = len(text) - len(text.lstrip()) + 1
            m = re.match(r"net\s+(\S+)\s*\{\s*$", stripped)
            if m:
                i = self._parse_block(m.group(1), i)
                continue
            m = re.match(r"analysis\s*\{(.*)$", stripped)
            if m:
                i = self._parse_analysis(m.group(1), i)
                continue
            self.error(i + 1, indent, f"expected 'net <name> {{' or 'analysis {{', got '{stripped.split()[0]}'")
            i += 1
        if not saw_anything:
            self.warning(1, 1, "empty model source")
        doc = ModelDocument(blocks=tuple(self.blocks), analysis=self.analysis)
        return ParseResult(document=doc, diagnostics=self.diags)

    # -- net blocks -------------------------------------------------------

    def _parse_block(self, name: str, start: int) -> int:
        line_no = start + 1
        if not ID_RE.match(name):
            self.error(line_no, 5, f"invalid net name '{name}'")
        places: list[Place] = []
        transitions: list[Transition] = []
        arcs: list[tuple[str, str]] = []
        watches: list[StopwatchSpec] = []
        invariants: list[PlaceInvariant] = []
        normal: set[str] = set()
        ids: set[str] = set()

        i = start + 1
        closed = False
        while i < len(self.lines):
            raw = self.lines[i].split("#", 1)[0].rstrip()
            stripped = raw.strip()
            col = len(raw) - len(raw.lstrip()) + 1
            ln = i + 1
            if not stripped:
                i += 1
                continue
            if stripped == "}":
                closed = True
                i += 1
                break
            head = stripped.split()[0]
            rest = stripped[len(head):].strip()
            rest_off = raw.index(head) + len(head) + (len(stripped[len(head):]) - len(rest))
            if head == "place":
                self._parse_place(ln, col, rest, rest_off, places, ids)
            elif head == "trans":
                self._parse_trans(ln, col, rest, rest_off, transitions, ids)
            elif head == "stopwatch":
                self._parse_watch(ln, col, rest, rest_off, watches)
            elif head == "arc":
                self._parse_arc(ln, col, rest, arcs)
            elif head == "invariant":
                self._parse_invariant(ln, col, rest, invariants)
            elif head == "normal":
                self._parse_normal(ln, col, rest, normal)
            else:
                self.error(ln, col, f"unknown keyword '{head}'")
            i += 1
        if not closed:
            self.error(len(self.lines), 1, f"net '{name}' is missing its closing '}}'")

        # Dangling references are caught here so the message carries the
        # block name even though the exact line is gone by now.
        known = {p.id for p in places} | {t.id for t in transitions}
        for src, dst in arcs:
            for end in (src, dst):
                if end not in known:
                    self.error(start + 1, 1, f"net '{name}': arc endpoint '{end}' is not declared")
        declared_watches = {w.id for w in watches}
        for t in transitions:
            if t.stopwatch and t.stopwatch not in declared_watches:
                self.error(start + 1, 1, f"net '{name}': transition '{t.id}' references undeclared stopwatch '{t.stopwatch}'")
        for p in sorted(normal):
            if p not in {pl.id for pl in places}:
                self.error(start + 1, 1, f"net '{name}': normal set entry '{p}' is not a place")

        self.blocks.append(
            NetBlock(
                name=name,
                places=tuple(sorted(places, key=lambda p: p.id)),
                transitions=tuple(sorted(transitions, key=lambda t: t.id)),
                arcs=tuple(sorted(set(arcs))),
                stopwatches=tuple(sorted(watches, key=lambda w: w.id)),
                invariants=tuple(sorted(invariants, key=lambda v: (sorted(v.places), v.constant))),
                normal_places=frozenset(normal),
            )
        )
        return i

    def _declare(self, ln: int, col: int, ident: str, ids: set[str]) -> bool:
        if not ID_RE.match(ident):
            self.error(ln, col, f"invalid identifier '{ident}'")
            return False
        if ident in ids:
            self.error(ln, col, f"duplicate id '{ident}'")
            return False
        ids.add(ident)
        return True

    def _parse_place(self, ln, col, rest, rest_off, places, ids) -> None:
        parts = rest.split(None, 1)
        if not parts:
            self.error(ln, col, "place needs an id")
            return
        pid = parts[0]
        if not self._declare(ln, col + 6, pid, ids):
            return
        attrs = _attrs(parts[1] if len(parts) > 1 else "", ln, rest_off, self.diags)
        kind = PlaceKind.NORMAL
        init = 0
        for key, (value, acol) in attrs.items():
            if key == "kind":
                if value not in _PLACE_KINDS:
                    self.error(ln, acol, f"unknown place kind '{value}'")
                else:
                    kind = value
            elif key == "init":
                if value not in ("0", "1"):
                    self.error(ln, acol, f"init must be 0 or 1, got '{value}'")
                else:
                    init = int(value)
            else:
                self.error(ln, acol, f"unknown place attribute '{key}'")
        places.append(Place(pid, kind=kind, initial_marking=init))

    def _parse_trans(self, ln, col, rest, rest_off, transitions, ids) -> None:
        parts = rest.split(None, 1)
        if not parts:
            self.error(ln, col, "trans needs an id")
            return
        tid = parts[0]
        if not self._declare(ln, col + 6, tid, ids):
            return
        attrs = _attrs(parts[1] if len(parts) > 1 else "", ln, rest_off, self.diags)
        interval = None
        kind = TransitionKind.NORMAL
        watch = None
        calls = None
        for key, (value, acol) in attrs.items():
            if key == "interval":
                m = re.match(r"\[([^,\]]+),([^\]]+)\]$", value)
                if not m:
                    self.error(ln, acol, f"malformed interval '{value}'")
                    continue
                try:
                    lo = _parse_rational(m.group(1))
                    hi = _parse_rational(m.group(2))
                except (ValueError, ZeroDivisionError):
                    self.error(ln, acol, f"malformed interval '{value}'")
                    continue
                if lo is None:
                    self.error(ln, acol, "interval min cannot be inf")
                    continue
                if lo < 0:
                    self.error(ln, acol, "interval min must be non-negative")
                    continue
                if hi is not None and lo > hi:
                    self.error(ln, acol, "interval min exceeds max")
                    continue
                interval = TimeInterval(lo, hi)
            elif key == "kind":
                if value not in _TRANS_KINDS:
                    self.error(ln, acol, f"unknown transition kind '{value}'")
                else:
                    kind = value
            elif key == "watch":
                watch = value
            elif key == "calls":
                calls = value
            else:
                self.error(ln, acol, f"unknown transition attribute '{key}'")
        if interval is None:
            self.error(ln, col, f"transition '{tid}' needs interval=[min,max]")
            return
        if kind in (TransitionKind.STOP, TransitionKind.RESUME) and watch is None:
            self.error(ln, col, f"{kind} transition '{tid}' needs watch=<stopwatch-id>")
            return
        if kind == TransitionKind.CALL and calls is None:
            self.error(ln, col, f"call transition '{tid}' needs calls=<net-name>")
            return
        transitions.append(Transition(tid, interval=interval, kind=kind, stopwatch=watch, calls=calls))

    def _parse_watch(self, ln, col, rest, rest_off, watches) -> None:
        parts = rest.split(None, 1)
        if not parts:
            self.error(ln, col, "stopwatch needs an id")
            return
        attrs = _attrs(parts[1] if len(parts) > 1 else "", ln, rest_off, self.diags)
        alpha = None
        seen = False
        for key, (value, acol) in attrs.items():
            if key == "alpha_max":
                try:
                    alpha = _parse_rational(value)
                    seen = True
                except (ValueError, ZeroDivisionError):
                    self.error(ln, acol, f"malformed alpha_max '{value}'")
            else:
                self.error(ln, acol, f"unknown stopwatch attribute '{key}'")
        if not seen:
            self.error(ln, col, f"stopwatch '{parts[0]}' needs alpha_max=<rational|inf>")
            return
        watches.append(StopwatchSpec(parts[0], alpha_max=alpha))

    def _parse_arc(self, ln, col, rest, arcs) -> None:
        m = re.match(r"(\S+)\s*->\s*(\S+)$", rest)
        if not m:
            self.error(ln, col, f"expected 'arc <src> -> <dst>', got '{rest}'")
            return
        arcs.append((m.group(1), m.group(2)))

    def _parse_invariant(self, ln, col, rest, invariants) -> None:
        m = re.match(r"(.+)=\s*(\d+)$", rest)
        if not m:
            self.error(ln, col, f"expected 'invariant p (+ p)* = <int>', got '{rest}'")
            return
        names = [p.strip() for p in m.group(1).split("+")]
        if not all(ID_RE.match(n) for n in names):
            self.error(ln, col, f"invalid place list in invariant '{rest}'")
            return
        invariants.append(PlaceInvariant(frozenset(names), int(m.group(2))))

    def _parse_normal(self, ln, col, rest, normal) -> None:
        m = re.match(r"\{(.*)\}$", rest)
        if not m:
            self.error(ln, col, "expected 'normal { p, q, ... }'")
            return
        for name in m.group(1).split(","):
            name = name.strip()
            if not name:
                continue
            if not ID_RE.match(name):
                self.error(ln, col, f"invalid place id '{name}' in normal set")
                continue
            normal.add(name)

    # -- analysis section --------------------------------------------------

    def _parse_analysis(self, inline: str, start: int) -> int:
        ln = start + 1
        body_lines: list[tuple[int, str]] = []
        if "}" in inline:
            body_lines.append((ln, inline.split("}", 1)[0]))
            end = start + 1
        else:
            if inline.strip():
                body_lines.append((ln, inline))
            i = start + 1
            closed = False
            while i < len(self.lines):
                raw = self.lines[i].split("#", 1)[0].rstrip()
                if raw.strip() == "}":
                    closed = True
                    i += 1
                    break
                if raw.strip():
                    body_lines.append((i + 1, raw))
                i += 1
            if not closed:
                self.error(len(self.lines), 1, "analysis section is missing its closing '}'")
            end = i
        if self.analysis is not None:
            self.error(ln, 1, "duplicate analysis section")
        target = None
        extra: tuple[str, ...] = ()
        alpha: Optional[str] = None
        depth: Optional[int] = None
        for line_no, body in body_lines:
            for key, (value, acol) in _attrs(body, line_no, 0, self.diags).items():
                if key == "target":
                    target = value
                elif key == "extra_targets":
                    extra = tuple(v for v in value.split(",") if v)
                elif key == "alpha_max":
                    try:
                        _parse_rational(value)
                    except (ValueError, ZeroDivisionError):
                        self.error(line_no, acol, f"malformed alpha_max '{value}'")
                        continue
                    alpha = value
                elif key == "depth_limit":
                    if not value.isdigit():
                        self.error(line_no, acol, f"depth_limit must be an integer, got '{value}'")
                    else:
                        depth = int(value)
                else:
                    self.error(line_no, acol, f"unknown analysis key '{key}'")
        self.analysis = AnalysisSection(target=target, extra_targets=extra, alpha_max=alpha, depth_limit=depth)
        return end


def parse_model(source: str) -> ParseResult:
    try:
        return _Parser(source).parse()
    except RecursionError:  # total parsing: pathological inputs become a diagnostic
        return ParseResult(None, [ParseDiagnostic(1, 1, "input too deeply nested")])


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def _rat(value: Optional[Fraction]) -> str:
    return "inf" if value is None else str(value)


def serialize_model(doc: ModelDocument) -> str:
    """Canonical text form; ``parse_model(serialize_model(d))`` equals ``d``."""
    out: list[str] = []
    for block in doc.blocks:
        out.append(f"net {block.name} {{")
        for p in sorted(block.places, key=lambda p: p.id):
            line = f"  place {p.id} kind={p.kind}"
            if p.initial_marking:
                line += " init=1"
            out.append(line)
        for w in sorted(block.stopwatches, key=lambda w: w.id):
            out.append(f"  stopwatch {w.id} alpha_max={_rat(w.alpha_max)}")
        for t in sorted(block.transitions, key=lambda t: t.id):
            line = (
                f"  trans {t.id} interval=[{t.interval.min},{_rat(t.interval.max)}]"
                f" kind={t.kind}"
            )
            if t.stopwatch:
                line += f" watch={t.stopwatch}"
            if t.calls:
                line += f" calls={t.calls}"
            out.append(line)
        for src, dst in sorted(block.arcs):
            out.append(f"  arc {src} -> {dst}")
        for inv in sorted(block.invariants, key=lambda v: (sorted(v.places), v.constant)):
            out.append(f"  invariant {' + '.join(sorted(inv.places))} = {inv.constant}")
        if block.normal_places:
            out.append(f"  normal {{ {', '.join(sorted(block.normal_places))} }}")
        out.append("}")
    if doc.analysis is not None:
        a = doc.analysis
        parts = []
        if a.target:
            parts.append(f"target={a.target}")
        if a.extra_targets:
            parts.append(f"extra_targets={','.join(a.extra_targets)}")
        if a.alpha_max is not None:
            parts.append(f"alpha_max={a.alpha_max}")
        if a.depth_limit is not None:
            parts.append(f"depth_limit={a.depth_limit}")
        out.append(f"analysis {{ {' '.join(parts)} }}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# Elaboration
# --------------------------------------------------------------------------

def elaborate(doc: ModelDocument, name: Optional[str] = None) -> SwpnNet:
    """Flatten a document into a single net.

    With several blocks every id is qualified by its block name and call
    transitions are wired to the called block's initially marked places,
    which then start empty in the composed net (the call produces them).
    A single block elaborates unprefixed, identical to the block itself.
    """
    if not doc.blocks:
        raise CompositionError("document declares no net blocks")
    multi = len(doc.blocks) > 1
    by_name = {b.name: b for b in doc.blocks}

    def qual(block: NetBlock, ident: str) -> str:
        return f"{block.name}.{ident}" if multi else ident

    called: set[str] = set()
    for block in doc.blocks:
        for t in block.transitions:
            if t.kind == TransitionKind.CALL:
                if t.calls not in by_name:
                    raise CompositionError(
                        f"call transition '{t.id}' references missing block '{t.calls}'"
                    )
                called.add(t.calls)

    places: list[Place] = []
    transitions: list[Transition] = []
    arcs: list[tuple[str, str]] = []
    watches: list[StopwatchSpec] = []
    invariants: list[PlaceInvariant] = []
    normal: set[str] = set()

    for block in doc.blocks:
        zero_initial = block.name in called
        for p in block.places:
            init = 0 if zero_initial else p.initial_marking
            places.append(Place(qual(block, p.id), kind=p.kind, initial_marking=init))
        for w in block.stopwatches:
            watches.append(StopwatchSpec(qual(block, w.id), w.alpha_max))
        for t in block.transitions:
            transitions.append(
                Transition(
                    qual(block, t.id),
                    interval=t.interval,
                    kind=t.kind,
                    stopwatch=qual(block, t.stopwatch) if t.stopwatch else None,
                    calls=t.calls,
                )
            )
        for src, dst in block.arcs:
            arcs.append((qual(block, src), qual(block, dst)))
        for inv in block.invariants:
            invariants.append(
                PlaceInvariant(frozenset(qual(block, p) for p in inv.places), inv.constant)
            )
        normal |= {qual(block, p) for p in block.normal_places}

    for block in doc.blocks:
        for t in block.transitions:
            if t.kind == TransitionKind.CALL:
                callee = by_name[t.calls]
                for p in callee.places:
                    if p.initial_marking:
                        arcs.append((qual(block, t.id), qual(callee, p.id)))

    net_name = name or "+".join(b.name for b in doc.blocks)
    return make_net(
        places, transitions, arcs,
        stopwatches=watches, invariants=invariants,
        normal_places=normal, name=net_name,
    )


def net_to_document(net: SwpnNet, block_name: str = "net") -> ModelDocument:
    """Express a net as a single-block document (used by the invert command).

    Call metadata is dropped: the composed arcs are already explicit.
    """
    arcs: list[tuple[str, str]] = []
    for tid in sorted(net.pre):
        for pid in sorted(net.pre[tid]):
            arcs.append((pid, tid))
    for tid in sorted(net.post):
        for pid in sorted(net.post[tid]):
            arcs.append((tid, pid))
    safe = block_name if ID_RE.match(block_name) else "net"
    block = NetBlock(
        name=safe,
        places=tuple(sorted((Place(p.id.replace(".", "_"), p.kind, p.initial_marking) for p in net.places), key=lambda p: p.id)),
        transitions=tuple(
            sorted(
                (
                    Transition(
                        t.id.replace(".", "_"),
                        interval=t.interval,
                        kind=t.kind,
                        stopwatch=t.stopwatch.replace(".", "_") if t.stopwatch else None,
                    )
                    for t in net.transitions
                ),
                key=lambda t: t.id,
            )
        ),
        arcs=tuple(sorted((s.replace(".", "_"), d.replace(".", "_")) for s, d in arcs)),
        stopwatches=tuple(sorted((StopwatchSpec(w.id.replace(".", "_"), w.alpha_max) for w in net.stopwatches), key=lambda w: w.id)),
        invariants=tuple(
            sorted(
                (PlaceInvariant(frozenset(p.replace(".", "_") for p in inv.places), inv.constant) for inv in net.invariants),
                key=lambda v: (sorted(v.places), v.constant),
            )
        ),
        normal_places=frozenset(p.replace(".", "_") for p in net.normal_places),
    )
    return ModelDocument(blocks=(block,))
