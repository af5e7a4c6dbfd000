"""Fading realizations and the equivalent end-to-end channel of a schedule.

The production builder propagates unit impulses through the schedule slot
by slot: every source input coordinate and every noise coordinate gets a
column, and each reception is the superposition of all adjacent active
transmitters plus the receiver's own noise. Arrays may carry one leading
batch axis so that many realizations are pushed through at once.

:func:`two_hop_equivalent_channel` rebuilds the parallel-relay case from its
closed form ``G Omega F (H x + n) + z`` and serves as an independent check.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .scheduling import Schedule, build_two_hop_schedule
from .topology import NetworkTopology, edge_key

__all__ = [
    "ChannelRealization",
    "EquivalentChannel",
    "sample_realization",
    "sample_haar_unitary",
    "sample_unitaries",
    "amp_coefficient",
    "compile_plan",
    "build_equivalent_channel",
    "two_hop_equivalent_channel",
    "dump_realization",
    "load_realization",
]


@dataclass(frozen=True)
class ChannelRealization:
    """Gain matrices per edge.

    Reciprocal realizations store ``H[a, b]`` for ``a < b`` with shape
    ``(..., N_a, N_b)`` (receiver ``a``, transmitter ``b``); the reverse
    direction is the transpose. Non-reciprocal ones store both ``(rx, tx)``
    keys.
    """

    gains: dict
    reciprocal: bool = True
    block_id: int = 0

    def gain(self, rx: int, tx: int) -> np.ndarray:
        if not self.reciprocal:
            return self.gains[rx, tx]
        if rx < tx:
            return self.gains[rx, tx]
        return np.swapaxes(self.gains[tx, rx], -1, -2)

    @property
    def batch_shape(self) -> tuple:
        first = next(iter(self.gains.values()))
        return first.shape[:-2]

    def scaled(self, factors: dict) -> "ChannelRealization":
        """Copy with selected edge gains multiplied by a scalar (e.g. zeroed)."""
        gains = dict(self.gains)
        for e, f in factors.items():
            keys = [edge_key(*e)] if self.reciprocal else [e, e[::-1]]
            for k in keys:
                gains[k] = gains[k] * f
        return ChannelRealization(gains, self.reciprocal, self.block_id)


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def sample_realization(g: NetworkTopology, rng: np.random.Generator, batch=None,
                       reciprocal=True, block_id=0) -> ChannelRealization:
    """Independent CN(0, 1) entries for every edge gain matrix."""
    lead = () if batch is None else (batch,)
    gains = {}
    for a, b in sorted(g.edges):
        gains[a, b] = _cn(rng, lead + (g.antennas[a], g.antennas[b]))
        if not reciprocal:
            gains[b, a] = _cn(rng, lead + (g.antennas[b], g.antennas[a]))
    return ChannelRealization(gains, reciprocal, block_id)


def sample_haar_unitary(n: int, rng: np.random.Generator, batch=None) -> np.ndarray:
    """Haar-distributed ``n x n`` unitary from a phase-corrected QR."""
    if n < 1:
        raise ValueError("dimension must be positive")
    lead = () if batch is None else (batch,)
    z = _cn(rng, lead + (n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[..., None, :]


def sample_unitaries(g: NetworkTopology, sch: Schedule, rng, batch=None, phases=False) -> dict:
    """Haar unitaries ``U[(i, j)]`` for every relay hop (1-based indices).

    Single-antenna relays get no entry (identity) unless ``phases`` is set;
    a random phase leaves circularly-symmetric statistics unchanged.
    """
    u = {}
    for i, p in enumerate(sch.paths, start=1):
        for j in range(1, p.length):
            n = g.antennas[p[j]]
            if n > 1 or phases:
                u[i, j] = sample_haar_unitary(n, rng, batch)
    return u


def amp_coefficient(input_power_coeff, P, clip=True):
    """Relay gain ``min(1, sqrt(P / (P * c_in + 1)))``.

    ``c_in`` sums the squared gains (spectral norms) of every signal heard in
    the slot. ``clip=False`` drops the ``<= 1`` cap, as allowed for
    non-interfering relays.
    """
    c = np.asarray(input_power_coeff, dtype=float)
    if np.any(c < 0):
        raise ValueError("input power coefficient must be nonnegative")
    if P <= 0:
        raise ValueError("power must be positive")
    a = np.sqrt(P / (P * c + 1.0))
    if clip:
        a = np.minimum(a, 1.0)
    return a if a.ndim else float(a)


@dataclass
class EquivalentChannel:
    """``y = H_T x + Q n`` for one schedule and realization (batched or not)."""

    H_T: np.ndarray
    Q: np.ndarray
    P_n: np.ndarray
    alphas: dict
    source_cols: list = field(default_factory=list)
    row_dim: int = 1
    col_dims: tuple = ()

    def source_block(self, m: int = 0) -> np.ndarray:
        return self.H_T[..., self.source_cols[m]]

    def block(self, i: int, i2: int, m: int = 0) -> np.ndarray:
        """Sub-matrix from path ``i2``'s input to path ``i``'s output (1-based)."""
        r = self.row_dim
        c = self.col_dims[m]
        start = self.source_cols[m].start
        return self.H_T[..., (i - 1) * r:i * r, start + (i2 - 1) * c:start + i2 * c]


@dataclass(frozen=True)
class _Plan:
    """Schedule compiled to slot-ordered transmissions and receptions."""

    slots: tuple  # (slot, transmissions, receptions)
    input_cols: dict  # (source, path) -> slice
    noise_cols: dict  # (path, hop) -> slice
    ncols: int
    source_cols: list
    final: tuple  # (path, hop) of the sink reception of each path
    row_dim: int
    col_dims: tuple


def compile_plan(g: NetworkTopology, sch: Schedule) -> _Plan:
    L = sch.L
    col = 0
    input_cols = {}
    source_cols = []
    for m in g.sources:
        n = g.antennas[m]
        start = col
        for i in range(L):
            input_cols[m, i] = slice(col, col + n)
            col += n
        source_cols.append(slice(start, col))
    noise_cols = {}
    for i, j, s, tx, rx in sch.hops():
        n = g.antennas[rx]
        noise_cols[i, j] = slice(col, col + n)
        col += n
    by_slot = defaultdict(lambda: ([], []))
    for i, j, s, tx, rx in sch.hops():
        txs = g.sources if j == 1 else (tx,)
        for t in txs:
            by_slot[s][0].append((t, i, j))
        by_slot[s][1].append((i, j, rx))
    slots = []
    for s in sorted(by_slot):
        transmissions, receptions = by_slot[s]
        heard = []
        for i, j, rx in receptions:
            nodes = sorted({t for t, _, _ in transmissions if g.has_edge(rx, t)})
            heard.append((i, j, rx, tuple(nodes)))
        slots.append((s, tuple(transmissions), tuple(heard)))
    final = tuple((i, p.length) for i, p in enumerate(sch.paths))
    return _Plan(tuple(slots), input_cols, noise_cols, col, source_cols, final,
                 g.antennas[g.sink], tuple(g.antennas[m] for m in g.sources))


def _spec_norm_sq(h):
    r, c = h.shape[-2:]
    if r == 1 or c == 1:
        return np.sum(h.real ** 2 + h.imag ** 2, axis=(-2, -1))
    return np.linalg.svd(h, compute_uv=False)[..., 0] ** 2


def build_equivalent_channel(g: NetworkTopology, sch: Schedule, real: ChannelRealization,
                             u: dict | None = None, P: float = 1.0, clip: bool = True,
                             plan: _Plan | None = None) -> EquivalentChannel:
    """Equivalent channel of ``sch`` on ``real`` by impulse propagation.

    ``u`` maps 1-based ``(path, hop)`` to the unitary applied by that relay;
    missing entries mean identity. Relay gains are fixed per reception from
    the realization: ``c_in`` is the sum of squared spectral norms of the
    channels from every transmitter active in that slot.
    """
    if plan is None:
        plan = compile_plan(g, sch)
    u = u or {}
    batch = real.batch_shape
    if len(batch) > 1:
        raise ValueError("at most one batch axis supported")
    lead = batch
    ncols = plan.ncols
    recv = {}
    alphas = {}
    for s, transmissions, heard in plan.slots:
        sig = {}
        for t, i, j in transmissions:
            if j == 1:
                n = g.antennas[t]
                x = np.zeros((1,) * len(lead) + (n, ncols), dtype=complex)
                cols = plan.input_cols[t, i]
                x[..., np.arange(n), np.arange(cols.start, cols.stop)] = 1.0
            else:
                r = recv[i, j - 1]
                if (i + 1, j - 1) in u:
                    r = u[i + 1, j - 1] @ r
                a = alphas[i + 1, j - 1]
                x = (a[..., None, None] if np.ndim(a) else a) * r
            sig[t] = sig[t] + x if t in sig else x
        for i, j, rx, nodes in heard:
            n = g.antennas[rx]
            y = np.zeros(lead + (n, ncols), dtype=complex)
            cols = plan.noise_cols[i, j]
            y[..., np.arange(n), np.arange(cols.start, cols.stop)] = 1.0
            c_in = 0.0
            for t in nodes:
                h = real.gain(rx, t)
                y = y + h @ sig[t]
                c_in = c_in + _spec_norm_sq(h)
            recv[i, j] = y
            if rx != g.sink:
                alphas[i + 1, j] = amp_coefficient(c_in, P, clip)
    for i, p in enumerate(sch.paths, start=1):
        alphas[i, p.length] = np.ones(lead) if lead else 1.0
    rows = np.concatenate([recv[f] for f in plan.final], axis=-2)
    in_idx = np.concatenate([np.arange(sl.start, sl.stop) for sl in plan.source_cols])
    H_T = rows[..., in_idx]
    Q = rows[..., plan.source_cols[-1].stop:]
    P_n = Q @ np.conj(np.swapaxes(Q, -1, -2))
    return EquivalentChannel(H_T, Q, P_n, alphas, list(plan.source_cols),
                             plan.row_dim, plan.col_dims)


# -- two-hop closed form -------------------------------------------------------

def two_hop_equivalent_channel(K: int, B: int, real: ChannelRealization, P: float,
                               clip: bool = True) -> EquivalentChannel:
    """Closed-form ``H_T = G Omega F H`` for the round-robin parallel-relay schedule.

    Relays are ``1..K``, the sink ``K+1``, source ``0``, single antennas, no
    batch axis. The relay transmitting just before relay ``k`` is
    ``(k) = ((k-2) mod K) + 1``; its output reaches relay ``k`` through the
    inter-relay gain when that edge exists. ``F`` follows the recursion
    ``p[0,k,k] = 1``, ``p[b,k,k1] = i_(k) alpha_(k) p[(b),(k),k1]`` with
    ``(b) = b - floor((k)/K)``. Gains are indexed by absolute slot so that the
    first relay, which hears no interferer in slot 1, gets its own ``alpha``.
    """
    if real.batch_shape:
        raise ValueError("closed form takes a single realization")
    sink = K + 1
    L = B * K

    def scal(rx, tx):
        key = (min(rx, tx), max(rx, tx)) if real.reciprocal else (rx, tx)
        if key not in real.gains:
            return 0.0
        return complex(real.gain(rx, tx)[0, 0])

    h = [scal(k, 0) for k in range(1, K + 1)]
    gk = [scal(sink, k) for k in range(1, K + 1)]

    def prev(k):
        return ((k - 2) % K) + 1

    def inter(k):
        return scal(k, prev(k)) if K > 1 else 0.0

    def pos(b, k):  # 1-based path index of relay k in sub-block b
        return (b - 1) * K + k

    alpha = np.empty(L)
    for b in range(1, B + 1):
        for k in range(1, K + 1):
            c = abs(h[k - 1]) ** 2
            if pos(b, k) > 1:
                c += abs(inter(k)) ** 2
            alpha[pos(b, k) - 1] = amp_coefficient(c, P, clip)

    memo = {}

    def p(b, k, b1, k1):
        """Coefficient of relay ``k1``'s input (sub-block ``b1``) at relay ``k`` (sub-block ``b``)."""
        if (b, k) == (b1, k1):
            return 1.0
        if pos(b, k) < pos(b1, k1):
            return 0.0
        key = (b, k, b1, k1)
        if key not in memo:
            kp = prev(k)
            bp = b - (kp // K)
            memo[key] = inter(k) * alpha[pos(bp, kp) - 1] * p(bp, kp, b1, k1)
        return memo[key]

    F = np.zeros((L, L), dtype=complex)
    for b in range(1, B + 1):
        for k in range(1, K + 1):
            for b1 in range(1, B + 1):
                for k1 in range(1, K + 1):
                    F[pos(b, k) - 1, pos(b1, k1) - 1] = p(b, k, b1, k1)
    G = np.kron(np.eye(B), np.diag(gk))
    H = np.kron(np.eye(B), np.diag(h))
    Omega = np.diag(alpha).astype(complex)
    GOF = G @ Omega @ F
    H_T = GOF @ H
    # noise columns interleaved per path: relay noise, then receiver noise
    Q = np.zeros((L, 2 * L), dtype=complex)
    Q[:, 0::2] = GOF
    Q[:, 1::2] = np.eye(L)
    P_n = np.eye(L) + GOF @ GOF.conj().T
    alphas = {}
    for i in range(1, L + 1):
        alphas[i, 1] = float(alpha[i - 1])
        alphas[i, 2] = 1.0
    out = EquivalentChannel(H_T, Q, P_n, alphas, [slice(0, L)], 1, (1,))
    out.F = F
    out.G = G
    out.Omega = Omega
    out.H = H
    return out


def two_hop_schedule_and_topology(K, B, relay_edges=()):
    from .topology import two_hop_topology
    return two_hop_topology(K, relay_edges), build_two_hop_schedule(K, B)


# -- text dump -----------------------------------------------------------------

_LINE = re.compile(r"^\s*(\d+)\s*(-|<-)\s*(\d+)\s*:(.*)$")


def dump_realization(g: NetworkTopology, real: ChannelRealization) -> str:
    """One line per gain matrix, entries row-major written as ``re+imj``."""
    if real.batch_shape:
        raise ValueError("dump takes a single realization")
    lines = []
    for key in sorted(real.gains):
        sep = "-" if real.reciprocal else "<-"
        vals = " ".join(f"{z.real!r}{z.imag:+}j" for z in map(complex, real.gains[key].ravel()))
        lines.append(f"{key[0]}{sep}{key[1]}: {vals}")
    return "\n".join(lines) + "\n"


def load_realization(g: NetworkTopology, text: str) -> ChannelRealization:
    gains = {}
    kinds = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.strip().startswith("#"):
            continue
        m = _LINE.match(raw)
        if not m:
            raise ValueError(f"line {line_no}: expected 'a-b: values'")
        a, sep, b = int(m.group(1)), m.group(2), int(m.group(3))
        kinds.add(sep)
        if not g.has_edge(a, b):
            raise ValueError(f"line {line_no}: {a}-{b} is not an edge")
        try:
            vals = np.array([complex(t) for t in m.group(4).split()])
        except ValueError:
            raise ValueError(f"line {line_no}: bad complex value") from None
        shape = (g.antennas[a], g.antennas[b])
        if vals.size != shape[0] * shape[1]:
            raise ValueError(f"line {line_no}: expected {shape[0] * shape[1]} values")
        if sep == "-" and a > b:
            raise ValueError(f"line {line_no}: reciprocal entries are written low-high")
        gains[a, b] = vals.reshape(shape)
    if len(kinds) > 1:
        raise ValueError("mixed reciprocal and directed entries")
    reciprocal = kinds != {"<-"}
    need = {e for e in g.edges} if reciprocal else {k for e in g.edges for k in (e, e[::-1])}
    missing = need - set(gains)
    if missing:
        raise ValueError(f"missing gains for {sorted(missing)}")
    return ChannelRealization(gains, reciprocal)
