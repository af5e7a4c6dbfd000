"""Path sequences with slot timing, their validation and standard builders.

A schedule pairs an ordered list of source-to-sink paths with a timing
matrix: ``timing[i][j-1]`` is the (1-based) slot in which hop ``j`` of path
``i`` is received, i.e. node ``p_i(j)`` listens to ``p_i(j-1)``.

Validation numbers its checks:

(1) every slot is at least 1;
(2) paths start in strictly increasing slots;
(3) hops of one path occupy strictly increasing slots;
(4) no later path transmits, in the same slot, from a node adjacent to a
    node receiving an earlier path.
"""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .topology import (
    NetworkTopology,
    Path,
    TopologyError,
    edge_key,
    max_flow_path_decomposition,
    max_path_length,
    simple_paths,
    two_hop_topology,
)

__all__ = [
    "ScheduleError",
    "Schedule",
    "Violation",
    "ValidationReport",
    "validate_schedule",
    "is_non_interfering",
    "interference_pattern",
    "beta_counts",
    "build_two_hop_schedule",
    "build_sequential_maxflow_schedule",
    "build_pipelined_schedule",
    "parse_schedule",
    "serialize_schedule",
    "MAX_PATHS",
]

MAX_PATHS = 64
CAUSAL_AFTER_REVERSAL = "causal-after-reversal"


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    paths: tuple[Path, ...]
    timing: tuple[tuple[int, ...], ...]
    label: str = ""
    tags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        paths = tuple(p if isinstance(p, Path) else Path(tuple(p)) for p in self.paths)
        timing = tuple(tuple(int(s) for s in row) for row in self.timing)
        if len(paths) != len(timing):
            raise ScheduleError(f"{len(paths)} paths but {len(timing)} timing rows")
        for i, (p, row) in enumerate(zip(paths, timing), start=1):
            if len(row) != p.length:
                raise ScheduleError(f"path {i} has {p.length} hops but {len(row)} slots")
        object.__setattr__(self, "paths", paths)
        object.__setattr__(self, "timing", timing)
        object.__setattr__(self, "tags", frozenset(self.tags))

    @property
    def L(self) -> int:
        return len(self.paths)

    @property
    def slot_count(self) -> int:
        return max(max(row) for row in self.timing) if self.timing else 0

    S = slot_count

    @property
    def spectral_efficiency(self) -> float:
        """Ratio ``L / S`` of delivered portions to occupied slots."""
        return self.L / self.slot_count

    def hops(self):
        """Yield ``(i, j, slot, tx, rx)`` with 0-based path index, 1-based hop."""
        for i, (p, row) in enumerate(zip(self.paths, self.timing)):
            for j, s in enumerate(row, start=1):
                yield i, j, s, p[j - 1], p[j]


@dataclass(frozen=True)
class Violation:
    prop: str
    path: int
    hop: int
    detail: str

    def __str__(self):
        return f"property {self.prop}: path {self.path}, hop {self.hop}: {self.detail}"


@dataclass
class ValidationReport:
    violations: list[Violation]
    half_duplex_conflicts: list[str] = field(default_factory=list)
    reversal_ok: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.ok:
            lines = ["ok"]
        else:
            lines = [str(v) for v in self.violations]
        lines += [f"note: half-duplex conflict: {c}" for c in self.half_duplex_conflicts]
        return "\n".join(lines)


def _transmitters(g, path, j):
    # all sources transmit together on a first hop (multiple-access mode)
    if j == 1:
        return g.sources
    return (path[j - 1],)


def _slot_hops(sch):
    by_slot = defaultdict(list)
    for i, j, s, tx, rx in sch.hops():
        by_slot[s].append((i, j))
    return by_slot


def _interferes(g, sch, i, j, i2, j2):
    """Whether the transmitter of hop (i2, j2) reaches the receiver of (i, j)."""
    rx = sch.paths[i][j]
    return any(g.has_edge(rx, t) for t in _transmitters(g, sch.paths[i2], j2))


def validate_schedule(g: NetworkTopology, sch: Schedule) -> ValidationReport:
    """Check timing properties (1)-(4) of a schedule on graph ``g``.

    Property (4) forbids a later path's transmitter from reaching an earlier
    path's receiver in the same slot. A schedule failing only (4) is also
    checked with the path order reversed; ``reversal_ok`` records whether all
    interference then flows from later to earlier paths only.
    """
    out = []
    for i, p in enumerate(sch.paths, start=1):
        try:
            p.check(g)
        except TopologyError as exc:
            out.append(Violation("path", i, 0, str(exc)))
    S = sch.slot_count
    for i, row in enumerate(sch.timing, start=1):
        for j, s in enumerate(row, start=1):
            if not 1 <= s:
                out.append(Violation("1", i, j, f"slot {s} outside 1..{S}"))
        for j in range(1, len(row)):
            if not row[j - 1] < row[j]:
                out.append(Violation("3", i, j + 1,
                                     f"slot {row[j]} not after hop {j} slot {row[j - 1]}"))
    for i in range(1, sch.L):
        if not sch.timing[i - 1][0] < sch.timing[i][0]:
            out.append(Violation("2", i + 1, 1, f"starts in slot {sch.timing[i][0]}, "
                                               f"not after path {i} (slot {sch.timing[i - 1][0]})"))
    if any(v.prop == "path" for v in out):
        return ValidationReport(out)

    by_slot = _slot_hops(sch)
    causal_bad, acausal = [], []
    for s, hops in sorted(by_slot.items()):
        for i, j in hops:
            for i2, j2 in hops:
                if i2 > i and _interferes(g, sch, i, j, i2, j2):
                    causal_bad.append(Violation(
                        "4", i + 1, j,
                        f"slot {s}: path {i2 + 1} hop {j2} transmitter "
                        f"{sch.paths[i2][j2 - 1]} reaches receiver {sch.paths[i][j]}"))
                if i2 < i and _interferes(g, sch, i, j, i2, j2):
                    acausal.append((i, j))
    out.extend(causal_bad)
    reversal_ok = bool(causal_bad) and not acausal and not [v for v in out if v.prop != "4"]

    conflicts = []
    if not g.full_duplex:
        for s, hops in sorted(by_slot.items()):
            rx = defaultdict(list)
            tx = defaultdict(list)
            for i, j in hops:
                rx[sch.paths[i][j]].append((i, j))
                for t in _transmitters(g, sch.paths[i], j):
                    tx[t].append((i, j))
            for v in sorted(set(rx) & set(tx)):
                conflicts.append(f"slot {s}: node {v} transmits and receives")
    return ValidationReport(out, conflicts, reversal_ok)


def is_non_interfering(g: NetworkTopology, sch: Schedule) -> bool:
    """True iff no simultaneously active transmitter reaches another hop's receiver."""
    for s, hops in _slot_hops(sch).items():
        for i, j in hops:
            for i2, j2 in hops:
                if (i, j) != (i2, j2) and _interferes(g, sch, i, j, i2, j2):
                    return False
    return True


def interference_pattern(g: NetworkTopology, sch: Schedule) -> dict[tuple[int, int], set]:
    """Map each hop ``(i, j)`` (1-based) to the hops that interfere with it.

    Only hops with a transmitter adjacent to the receiver are listed; for a
    valid schedule every entry comes from an earlier path.
    """
    pattern = {}
    for s, hops in _slot_hops(sch).items():
        for i, j in hops:
            pattern[i + 1, j] = {(i2 + 1, j2) for i2, j2 in hops
                                 if (i2, j2) != (i, j) and _interferes(g, sch, i, j, i2, j2)}
    return pattern


def beta_counts(sch: Schedule) -> Counter:
    """Number of path traversals through every edge."""
    beta = Counter()
    for p in sch.paths:
        beta.update(p.hop_edges())
    return beta


# -- builders ----------------------------------------------------------------

def build_two_hop_schedule(K: int, B: int, order=None, M: int = 1) -> Schedule:
    """Round-robin two-hop schedule: ``L = BK`` paths, ``s_ij = i + j - 1``.

    ``order`` permutes the relays (e.g. along a Hamiltonian cycle of the
    complement relay graph). With ``M`` sources the relays are ``M..M+K-1``.
    """
    if K < 1 or B < 1:
        raise ScheduleError("K and B must be positive")
    if K * B > MAX_PATHS:
        raise ScheduleError(f"at most {MAX_PATHS} paths supported")
    relays = list(order) if order is not None else list(range(M, M + K))
    if sorted(relays) != list(range(M, M + K)):
        raise ScheduleError(f"relay order must permute {M}..{M + K - 1}")
    sink = M + K
    paths = [Path((0, k, sink)) for _ in range(B) for k in relays]
    timing = [(i, i + 1) for i in range(1, K * B + 1)]
    return Schedule(tuple(paths), tuple(timing), label=f"two_hop K={K} B={B}")


def build_sequential_maxflow_schedule(g: NetworkTopology, L0: int = 1) -> Schedule:
    """Max-flow paths, each repeated ``L0`` times, fully serialised in time."""
    if L0 < 1:
        raise ScheduleError("L0 must be positive")
    base = max_flow_path_decomposition(g)
    if len(base) * L0 > MAX_PATHS:
        raise ScheduleError(f"at most {MAX_PATHS} paths supported")
    paths = [p for p in base for _ in range(L0)]
    timing = []
    t = 0
    for p in paths:
        timing.append(tuple(t + j for j in range(1, p.length + 1)))
        t += p.length
    return Schedule(tuple(paths), tuple(timing), label=f"maxflow_serial L0={L0}")


def _is_layered(g):
    lengths = {p.length for p in simple_paths(g)}
    return len(lengths) == 1


def build_pipelined_schedule(g: NetworkTopology, L0: int = 1, variant: str = "auto") -> Schedule:
    """Full-duplex pipelined schedule over the max-flow paths.

    ``layered``: every source-sink path has the same length ``l_G`` and
    ``s_ij = i + j - 1`` (``S = L + l_G - 1``). ``dag``: blocks of ``L0``
    copies of each path are offset by the lengths of the earlier blocks.
    ``auto`` picks ``layered`` when the graph allows it.
    """
    if not g.full_duplex:
        raise ScheduleError("pipelined schedules need a full-duplex topology")
    if L0 < 1:
        raise ScheduleError("L0 must be positive")
    base = max_flow_path_decomposition(g)
    if len(base) * L0 > MAX_PATHS:
        raise ScheduleError(f"at most {MAX_PATHS} paths supported")
    layered = _is_layered(g)
    if variant == "auto":
        variant = "layered" if layered else "dag"
    if variant == "layered" and not layered:
        raise ScheduleError("graph is not layered: source-sink paths differ in length")
    paths = [p for p in base for _ in range(L0)]
    timing = []
    for i, p in enumerate(paths, start=1):
        offset = 0
        if variant == "dag":
            offset = sum(q.length for q in base[:math.ceil(i / L0) - 1])
        elif variant != "layered":
            raise ScheduleError(f"unknown pipelined variant {variant!r}")
        timing.append(tuple(i + j - 1 + offset for j in range(1, p.length + 1)))
    sch = Schedule(tuple(paths), tuple(timing), label=f"pipelined {variant} L0={L0}")
    rep = validate_schedule(g, sch)
    if rep.ok:
        return sch
    if rep.reversal_ok:
        return Schedule(sch.paths, sch.timing, sch.label, frozenset({CAUSAL_AFTER_REVERSAL}))
    raise ScheduleError("max-flow paths do not admit a pipelined ordering: "
                        + "; ".join(map(str, rep.violations[:3])))


# -- text format -------------------------------------------------------------

_PATH_RE = re.compile(r"\(([^()]*)\)")


def parse_schedule(text: str, g: NetworkTopology | None = None) -> Schedule:
    """Parse ``paths:``/``timing:`` lines or a single ``builder:`` line.

    Builders that need a graph (``maxflow_serial``, ``pipelined``) use ``g``.
    """
    fields = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ScheduleError(f"line {line_no}: expected 'key: value'")
        key, value = line.split(":", 1)
        key = key.strip().lower()
        if key not in ("paths", "timing", "builder", "label"):
            raise ScheduleError(f"line {line_no}: unknown key {key!r}")
        if key in fields:
            raise ScheduleError(f"line {line_no}: {key!r} repeated")
        fields[key] = (line_no, value.strip())
    label = fields.get("label", (0, ""))[1]
    if "builder" in fields:
        line_no, spec = fields["builder"]
        sch = _run_builder(spec, g, line_no)
        return Schedule(sch.paths, sch.timing, label or sch.label, sch.tags)
    if "paths" not in fields or "timing" not in fields:
        raise ScheduleError("schedule needs 'paths' and 'timing', or 'builder'")
    line_no, body = fields["paths"]
    paths = []
    for m in _PATH_RE.finditer(body):
        try:
            paths.append(Path(tuple(int(x) for x in m.group(1).split(","))))
        except (ValueError, TopologyError) as exc:
            raise ScheduleError(f"line {line_no}: bad path {m.group(0)}: {exc}") from None
    if not paths:
        raise ScheduleError(f"line {line_no}: no paths found")
    line_no, body = fields["timing"]
    try:
        rows = [tuple(int(x) for x in row.split(",")) for row in body.split(";") if row.strip()]
    except ValueError:
        raise ScheduleError(f"line {line_no}: timing entries must be integers") from None
    return Schedule(tuple(paths), tuple(rows), label)


def _run_builder(spec, g, line_no):
    parts = spec.split()
    if not parts:
        raise ScheduleError(f"line {line_no}: empty builder")
    name, args = parts[0], {}
    for tok in parts[1:]:
        if "=" not in tok:
            raise ScheduleError(f"line {line_no}: builder argument {tok!r} is not key=value")
        k, v = tok.split("=", 1)
        try:
            args[k] = int(v)
        except ValueError:
            args[k] = v
    try:
        if name == "two_hop":
            return build_two_hop_schedule(args["K"], args.get("B", 1))
        if g is None:
            raise ScheduleError(f"builder {name!r} needs a topology")
        if name == "maxflow_serial":
            return build_sequential_maxflow_schedule(g, args.get("L0", 1))
        if name == "pipelined":
            return build_pipelined_schedule(g, args.get("L0", 1), args.get("variant", "auto"))
    except KeyError as exc:
        raise ScheduleError(f"line {line_no}: builder {name!r} missing argument {exc}") from None
    except TopologyError as exc:
        raise ScheduleError(f"line {line_no}: {exc}") from None
    raise ScheduleError(f"line {line_no}: unknown builder {name!r}")


def serialize_schedule(sch: Schedule) -> str:
    lines = []
    if sch.label:
        lines.append(f"label: {sch.label}")
    lines.append("paths: " + ";".join(str(p) for p in sch.paths))
    lines.append("timing: " + "; ".join(",".join(map(str, row)) for row in sch.timing))
    return "\n".join(lines) + "\n"


def default_topology_for(sch: Schedule) -> NetworkTopology:
    """Two-hop star matching a ``two_hop`` schedule (used when no file is given)."""
    sink = max(p[-1] for p in sch.paths)
    return two_hop_topology(sink - 1)
