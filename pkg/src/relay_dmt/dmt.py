"""Closed-form diversity-multiplexing curves and the exact non-interfering optimum.

Every formula clamps with ``(.)^+`` after full-precision evaluation and
returns a plain ``float``. Curves are sampled on a caller-supplied ``r`` grid.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .scheduling import Schedule, beta_counts
from .topology import NetworkTopology, Path, max_path_length, min_cut

__all__ = [
    "dmt_rs_ni_exact",
    "dmt_rs_ni_exact_curve",
    "dmt_rs_ni_upper",
    "dmt_rs_ni_lower",
    "dmt_two_hop",
    "dmt_rs_general_lower",
    "dmt_mac_lower",
    "dmt_mac_optimal",
    "dmt_af_mac",
    "dmt_ddf_mac",
    "miso_upper",
    "max_diversity",
    "verify_dual_flow",
    "DualCertificate",
    "DmtCurve",
    "r_grid",
    "curves_to_csv",
    "figure_bundle",
    "gnuplot_script",
    "MAX_ASSIGNMENTS",
]

MAX_EXACT_PATHS = 12
MAX_ASSIGNMENTS = 10 ** 6


def _pos(x: float) -> float:
    return float(x) if x > 0 else 0.0


def _ramp(height, slope, x, zero):
    """``(height - slope x)^+`` forced to exactly 0 from ``x >= zero`` on."""
    if x >= zero:
        return 0.0
    return _pos(height - slope * x)


def r_grid(step: float = 0.01, stop: float = 1.05) -> np.ndarray:
    n = int(round(stop / step))
    return np.round(np.arange(n + 1) * step, 12)


# -- exact non-interfering optimum ---------------------------------------------

def _greedy_cover(mult, demand):
    """``min sum(mu)`` with ``sum(c_e mu_e) >= demand`` and ``0 <= mu <= 1``.

    ``mult`` holds the multiplicities ``c_e`` sorted in descending order.
    Returns ``inf`` if even ``mu = 1`` cannot meet the demand.
    """
    if demand <= 0:
        return 0.0
    used = 0.0
    for c in mult:
        if demand <= c:
            return used + demand / c
        demand -= c
        used += 1.0
    return math.inf


def _assignment_profiles(paths):
    """Distinct sorted multiplicity vectors over all hop assignments."""
    options = [sorted(set(p.hop_edges())) for p in paths]
    size = math.prod(len(o) for o in options)
    if size > MAX_ASSIGNMENTS:
        raise ValueError(f"{size} hop assignments exceed the {MAX_ASSIGNMENTS} limit")
    profiles = set()
    for t in itertools.product(*options):
        profiles.add(tuple(sorted(Counter(t).values(), reverse=True)))
    return profiles


def _check_exact_args(paths, L):
    paths = [p if isinstance(p, Path) else Path(tuple(p)) for p in paths]
    if L is not None and L != len(paths):
        raise ValueError(f"L={L} but {len(paths)} paths given")
    if len(paths) > MAX_EXACT_PATHS:
        raise ValueError(f"at most {MAX_EXACT_PATHS} paths for exact evaluation")
    return paths


def dmt_rs_ni_exact_curve(g: NetworkTopology | None, paths, S: int, rs, L: int | None = None):
    """Exact optimum on a grid of ``r``; hop assignments are enumerated once."""
    paths = _check_exact_args(paths, L)
    if g is not None:
        for p in paths:
            p.check(g)
    L = len(paths)
    profiles = _assignment_profiles(paths)
    out = []
    for r in np.atleast_1d(rs):
        if r < 0:
            raise ValueError("r must be nonnegative")
        demand = L - S * float(r)
        out.append(_pos(min(_greedy_cover(m, demand) for m in profiles)))
    return out


def dmt_rs_ni_exact(g: NetworkTopology | None, paths, L: int, S: int, r: float) -> float:
    """Exact diversity of a non-interfering RS schedule at multiplexing gain ``r``.

    Minimises ``sum(mu)`` over ``0 <= mu <= 1`` subject to
    ``sum_i max_j mu(edge(i, j)) >= L - S r`` by fixing which hop ``t_i``
    attains each maximum; for fixed ``t`` the problem is a fractional cover
    solved greedily by descending edge multiplicity.

    The program describes single-antenna networks; on multi-antenna graphs
    it is only the value of the program, not the schedule's diversity.
    """
    return dmt_rs_ni_exact_curve(g, paths, S, [r], L)[0]


def dmt_rs_ni_upper(g: NetworkTopology, r: float) -> float:
    return _ramp(1.0, 1.0, r, 1.0) * min_cut(g)[0]


def dmt_rs_ni_lower(g: NetworkTopology, r: float) -> float:
    lg = max_path_length(g)
    return _ramp(1.0, lg, r, 1.0 / lg) * min_cut(g)[0]


def dmt_two_hop(K: int, B, r: float) -> float:
    """``max(0, K(1 - r) - r/B)``; ``B = inf`` gives the ``K(1 - r)^+`` limit."""
    if K < 1 or B < 1:
        raise ValueError("K and B must be at least 1")
    if r < 0:
        raise ValueError("r must be nonnegative")
    zero = 1.0 if B == math.inf else B * K / (B * K + 1)
    return _ramp(K, K + 1.0 / B, r, zero)


def dmt_rs_general_lower(sch: Schedule, r: float) -> float:
    """``(L / max_e beta_e) (1 - (S/L) r)^+`` for any valid schedule."""
    beta = max(beta_counts(sch).values())
    L, S = sch.L, sch.slot_count
    return L / beta * _ramp(1.0, S / L, r, L / S)


def _rate_sum(rates):
    rates = tuple(np.atleast_1d(rates).astype(float))
    if any(x < 0 for x in rates):
        raise ValueError("rates must be nonnegative")
    return sum(rates)


def dmt_mac_lower(K: int, B, rates) -> float:
    """``[K(1 - sum r) - (sum r)/B]^+`` for the multiple-access relay scheme."""
    if K < 1 or B < 1:
        raise ValueError("K and B must be at least 1")
    s = _rate_sum(rates)
    zero = 1.0 if B == math.inf else B * K / (B * K + 1)
    return _ramp(K, K + 1.0 / B, s, zero)


def dmt_mac_optimal(K: int, rates) -> float:
    return K * _ramp(1.0, 1.0, _rate_sum(rates), 1.0)


def dmt_af_mac(rates) -> float:
    """Amplify-and-forward through a single relay: ``(1 - 2 sum r)^+``."""
    return _ramp(1.0, 2.0, _rate_sum(rates), 0.5)


def dmt_ddf_mac(rates) -> float:
    """Dynamic decode-and-forward through a single relay: ``(1 - s/(1 - s))^+``."""
    s = _rate_sum(rates)
    if s >= 0.5:
        return 0.0
    return _pos(1.0 - s / (1.0 - s))


def miso_upper(K: int, r: float) -> float:
    """Cut-set bound ``(K + 1)(1 - r)^+`` with ``K`` relays."""
    return (K + 1) * _ramp(1.0, 1.0, r, 1.0)


def max_diversity(g: NetworkTopology) -> int:
    """Maximum diversity: the antenna-weighted min cut."""
    d, _ = min_cut(g)
    if d == 0:
        raise ValueError("sink is not reachable from the sources")
    return int(d)


@dataclass(frozen=True)
class DualCertificate:
    ok: bool
    slack: dict
    violations: tuple = ()

    def __bool__(self):
        return self.ok


def verify_dual_flow(g: NetworkTopology, paths) -> DualCertificate:
    """Check that unit flow on every path respects the edge weights ``N_a N_b``."""
    use = Counter()
    for p in paths:
        p = p if isinstance(p, Path) else Path(tuple(p))
        p.check(g)
        use.update(p.hop_edges())
    slack = {e: g.weight(*e) - use.get(e, 0) for e in sorted(g.edges)}
    bad = tuple(e for e, s in slack.items() if s < 0)
    return DualCertificate(not bad, slack, bad)


# -- curves and bundles --------------------------------------------------------

@dataclass
class DmtCurve:
    label: str
    points: list = field(default_factory=list)

    @classmethod
    def sample(cls, label, fn, rs):
        return cls(label, [(float(r), float(fn(r))) for r in rs])

    @property
    def r(self):
        return np.array([p[0] for p in self.points])

    @property
    def d(self):
        return np.array([p[1] for p in self.points])


def _fmt(x):
    return format(float(x), ".12g")


def curves_to_csv(curves) -> str:
    lines = ["r,d,label"]
    for c in curves:
        if "," in c.label:
            raise ValueError("curve labels may not contain commas")
        lines.extend(f"{_fmt(r)},{_fmt(d)},{c.label}" for r, d in c.points)
    return "\n".join(lines) + "\n"


def figure_bundle(step: float = 0.01) -> dict:
    """Curve families for the two standard figures.

    ``dm_wi``: two-hop scheme for ``K`` in {2, 3} and ``B`` in {1, 2, inf}.
    ``dm_mac``: AF and DDF through one relay, two users at equal rate ``r``.
    """
    rs = r_grid(step, 1.05)
    wi = []
    for K in (2, 3):
        for B in (1, 2, math.inf):
            tag = "inf" if B == math.inf else B
            wi.append(DmtCurve.sample(f"K={K} B={tag}", lambda r, K=K, B=B: dmt_two_hop(K, B, r), rs))
    rs_mac = r_grid(step, 0.5)
    mac = [
        DmtCurve.sample("AF", lambda r: dmt_af_mac((r, r)), rs_mac),
        DmtCurve.sample("DDF", lambda r: dmt_ddf_mac((r, r)), rs_mac),
    ]
    return {"dm_wi": wi, "dm_mac": mac}


def gnuplot_script(figures: dict, png=True) -> str:
    """Script plotting each ``<name>.csv`` of ``figures`` by label."""
    out = ["set datafile separator ','", "set key top right", "set xlabel 'r'",
           "set ylabel 'd(r)'", "set grid"]
    for name, curves in figures.items():
        if png:
            out += ["set terminal pngcairo size 800,600", f"set output '{name}_gnuplot.png'"]
        parts = [f"'{name}.csv' every ::1 using 1:(strcol(3) eq '{c.label}' ? $2 : 1/0) "
                 f"with lines title '{c.label}'" for c in curves]
        out.append("plot " + ", \\\n     ".join(parts))
    return "\n".join(out) + "\n"
