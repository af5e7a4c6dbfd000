"""Monte Carlo outage estimation and diversity fits.

Trials are grouped into chunks. Chunk ``k`` has a size fixed by ``k`` alone
and draws from its own counter-based stream, so the outcome of a sweep is a
pure function of the configuration and the seed. With common random numbers
every SNR point consumes the same chunks; each point stops on its own once
the ordered chunk prefix holds enough outage events.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import rng as rngmod
from .channel import (
    ChannelRealization,
    amp_coefficient,
    build_equivalent_channel,
    compile_plan,
    sample_realization,
    sample_unitaries,
)
from .linalg import logdet_hpd
from .scheduling import Schedule, is_non_interfering
from .topology import NetworkTopology, two_hop_topology

__all__ = [
    "MODES",
    "TrialPolicy",
    "ExperimentConfig",
    "OutageRecord",
    "DiversityEstimate",
    "InsufficientData",
    "mutual_information",
    "subset_mutual_information",
    "rate_ni",
    "path_mutual_information",
    "wilson_interval",
    "estimate_outage",
    "estimate_outage_mac",
    "simulate_af_mac_single_relay",
    "simulate_ddf_mac_single_relay",
    "run_sweep",
    "estimate_diversity",
    "records_to_csv",
    "CSV_HEADER",
]

MODES = ("p2p", "mac_rs", "mac_af_single_relay", "mac_ddf_single_relay")
MAX_MAC_USERS = 8
CSV_HEADER = "snr_db,P,threshold_bits,trials,outage_count,p_hat,ci_lo,ci_hi,censored"

_PURPOSE_TRIALS = 1
_FIRST_CHUNK = 1024
_MAX_CHUNK = 1 << 16


class InsufficientData(ValueError):
    pass


# -- mutual information --------------------------------------------------------

def _check_hermitian(a):
    if not np.allclose(a, np.conj(np.swapaxes(a, -1, -2)), rtol=1e-10, atol=1e-10):
        raise ValueError("noise covariance is not Hermitian")


def mutual_information(eq, P: float, check=True):
    """``log2 det(P_n + P H_T H_T^H) - log2 det(P_n)`` in bits per block.

    Accepts an :class:`EquivalentChannel` (possibly batched) or a pair
    ``(H_T, P_n)``.
    """
    H, Pn = (eq.H_T, eq.P_n) if hasattr(eq, "H_T") else eq
    return _mi(H, Pn, P, check)


def _mi(H, Pn, P, check=True):
    if check:
        _check_hermitian(Pn)
    gram = H @ np.conj(np.swapaxes(H, -1, -2))
    mi = logdet_hpd(Pn + P * gram) - logdet_hpd(Pn)
    return np.maximum(mi, 0.0)


def subset_mutual_information(eq, P: float, subset, check=True):
    """MI of the sources in ``subset`` with the others treated as known."""
    H = np.concatenate([eq.source_block(m) for m in sorted(subset)], axis=-1)
    return _mi(H, eq.P_n, P, check)


def path_mutual_information(g: NetworkTopology, path, real: ChannelRealization, P: float,
                            u: dict | None = None, clip: bool = False, index: int = 1):
    """MI of one path used as an isolated product channel (bits per block).

    Signal ``A`` and noise covariance ``N`` are pushed hop by hop; every
    relay scales by the gain set from its own incoming channel only.
    ``index`` is the 1-based path position used to look up unitaries.
    """
    u = u or {}
    A = real.gain(path[1], path[0])
    lead = A.shape[:-2]
    N = np.broadcast_to(np.eye(A.shape[-2]), lead + (A.shape[-2],) * 2)
    for j in range(1, path.length):
        h_in = real.gain(path[j], path[j - 1])
        a = amp_coefficient(_sq_norm(h_in), P, clip)
        a = a[..., None, None] if np.ndim(a) else a
        T = a * u[index, j] if (index, j) in u else a * np.eye(A.shape[-2])
        T = real.gain(path[j + 1], path[j]) @ T
        A = T @ A
        N = T @ N @ np.conj(np.swapaxes(T, -1, -2)) + np.eye(T.shape[-2])
    return _mi(A, N, P, check=False)


def rate_ni(g: NetworkTopology, sch: Schedule, real: ChannelRealization, P: float,
            u: dict | None = None, clip: bool = False):
    """Per-symbol rate of a non-interfering schedule as a sum of per-path rates.

    The default leaves the relay gain unclipped, as is allowed without
    interference.
    """
    if not is_non_interfering(g, sch):
        raise ValueError("schedule is interfering; rate_ni does not apply")
    total = 0.0
    for i, p in enumerate(sch.paths, start=1):
        total = total + path_mutual_information(g, p, real, P, u, clip, i)
    return total / sch.slot_count


def _sq_norm(h):
    if 1 in h.shape[-2:]:
        return np.sum(np.abs(h) ** 2, axis=(-2, -1))
    return np.linalg.svd(h, compute_uv=False)[..., 0] ** 2


# -- configuration and records -------------------------------------------------

@dataclass(frozen=True)
class TrialPolicy:
    min_trials: int = 1000
    max_trials: int = 10_000_000
    target_events: int = 200

    def __post_init__(self):
        if self.target_events < 100:
            raise ValueError("target_outage_events must be at least 100")
        if self.min_trials < 1 or self.max_trials < self.min_trials:
            raise ValueError("need 1 <= min_trials <= max_trials")


@dataclass(frozen=True)
class ExperimentConfig:
    """One outage sweep.

    Exactly one of ``rates`` (multiplexing gains, rate ``r log2 P`` per user)
    and ``fixed_rates`` (bits per symbol per user) is set. ``gain_scale``
    multiplies chosen edge gains, e.g. ``{(0, 1): 0.0}`` to cut a link.
    """

    mode: str = "p2p"
    topology: NetworkTopology | None = None
    schedule: Schedule | None = None
    rates: tuple | None = None
    fixed_rates: tuple | None = None
    snr_grid_db: tuple = (20.0, 25.0, 30.0, 35.0, 40.0)
    policy: TrialPolicy = field(default_factory=TrialPolicy)
    seed: int = rngmod.DEFAULT_SEED
    crn: bool = True
    clip: bool = True
    gain_scale: tuple = ()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if (self.rates is None) == (self.fixed_rates is None):
            raise ValueError("give exactly one of multiplexing rates or fixed rates")
        vec = self.rate_vector
        if any(v < 0 for v in vec):
            raise ValueError("rates must be nonnegative")
        grid = list(self.snr_grid_db)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("SNR grid must be non-empty and strictly increasing")
        if self.mode in ("p2p", "mac_rs"):
            if self.topology is None or self.schedule is None:
                raise ValueError(f"mode {self.mode} needs a topology and a schedule")
            M = len(self.topology.sources)
            if self.mode == "p2p" and M != 1:
                raise ValueError("p2p mode needs a single source")
            if len(vec) != M:
                raise ValueError(f"expected {M} rate values, got {len(vec)}")
        elif len(vec) < 1:
            raise ValueError("need at least one user")
        if self.users > MAX_MAC_USERS:
            raise ValueError(f"at most {MAX_MAC_USERS} users (subset enumeration)")

    @property
    def rate_vector(self) -> tuple:
        return tuple(self.rates if self.rates is not None else self.fixed_rates)

    @property
    def multiplexing(self) -> bool:
        return self.rates is not None

    @property
    def users(self) -> int:
        return len(self.rate_vector)

    @property
    def slots(self) -> int:
        if self.mode in ("p2p", "mac_rs"):
            return self.schedule.slot_count
        return 2

    def subset_threshold(self, subset, P) -> float:
        """Outage threshold in bits per block for a set of users."""
        total = sum(self.rate_vector[m] for m in subset)
        per_slot = total * math.log2(P) if self.multiplexing else total
        if self.mode == "mac_ddf_single_relay":
            return per_slot
        return self.slots * per_slot

    def threshold(self, P) -> float:
        return self.subset_threshold(range(self.users), P)


@dataclass(frozen=True)
class OutageRecord:
    snr_db: float
    P: float
    threshold_bits: float
    trials: int
    outage_count: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    censored: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p_hat <= 1.0:
            raise ValueError("p_hat outside [0, 1]")
        if not self.ci_lo - 1e-15 <= self.p_hat <= self.ci_hi + 1e-15:
            raise ValueError("interval does not contain p_hat")

    @classmethod
    def from_counts(cls, snr_db, threshold_bits, trials, outage_count):
        lo, hi = wilson_interval(outage_count, trials)
        p = outage_count / trials
        return cls(float(snr_db), 10.0 ** (snr_db / 10.0), float(threshold_bits),
                   int(trials), int(outage_count), p, min(lo, p), max(hi, p),
                   outage_count == 0)

    def csv_row(self) -> str:
        return ",".join([
            _fmt(self.snr_db), _fmt(self.P), _fmt(self.threshold_bits),
            str(self.trials), str(self.outage_count), _fmt(self.p_hat),
            _fmt(self.ci_lo), _fmt(self.ci_hi), "1" if self.censored else "0",
        ])


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def wilson_interval(k: int, n: int, level: float = 0.95):
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class DiversityEstimate:
    slope: float
    stderr: float
    intercept: float
    snr_window: tuple
    n_points: int

    def csv_comment(self) -> str:
        window = " ".join(_fmt(s) for s in self.snr_window)
        return (f"# diversity_slope={_fmt(self.slope)}\n"
                f"# stderr={_fmt(self.stderr)}\n"
                f"# fit_snr_db={window}\n")


def estimate_diversity(records, min_events: int = 1) -> DiversityEstimate:
    """Least-squares slope of ``-log10 p_hat`` against ``log10 P``.

    Censored points and points with fewer than ``min_events`` events are
    dropped before fitting.
    """
    used = [r for r in records if not r.censored and r.outage_count >= min_events and r.p_hat > 0]
    if len(used) < 3:
        raise InsufficientData(f"need at least 3 uncensored points, have {len(used)}")
    P = [r.P for r in used]
    if any(b <= a for a, b in zip(P, P[1:])):
        raise ValueError("records must have strictly increasing P")
    x = np.log10(P)
    y = -np.log10([r.p_hat for r in used])
    fit = stats.linregress(x, y)
    return DiversityEstimate(float(fit.slope), float(fit.stderr), float(fit.intercept),
                             tuple(r.snr_db for r in used), len(used))


def records_to_csv(records, fit: DiversityEstimate | None = None, note: str | None = None) -> str:
    lines = [CSV_HEADER] + [r.csv_row() for r in records]
    text = "\n".join(lines) + "\n"
    if fit is not None:
        text += fit.csv_comment()
    if note:
        text += "".join(f"# {ln}\n" for ln in note.splitlines())
    return text


# -- per-chunk trial kernels ---------------------------------------------------

def _scaled(real: ChannelRealization, cfg: ExperimentConfig) -> ChannelRealization:
    return real.scaled(dict(cfg.gain_scale)) if cfg.gain_scale else real


def _subsets(M):
    for k in range(1, M + 1):
        yield from itertools.combinations(range(M), k)


def _rs_outages(cfg, rng, n, powers):
    g, sch = cfg.topology, cfg.schedule
    plan = compile_plan(g, sch)
    real = _scaled(sample_realization(g, rng, batch=n), cfg)
    u = sample_unitaries(g, sch, rng, batch=n)
    out = []
    if cfg.mode == "p2p" and is_non_interfering(g, sch):
        # paths decouple: block MI is the sum of per-path MIs
        for P in powers:
            mi = sum(path_mutual_information(g, p, real, P, u, cfg.clip, i)
                     for i, p in enumerate(sch.paths, start=1))
            out.append(int(np.count_nonzero(mi < cfg.threshold(P))))
        return out
    subsets = list(_subsets(cfg.users)) if cfg.mode == "mac_rs" else [(0,)]
    for P in powers:
        eq = build_equivalent_channel(g, sch, real, u, P, cfg.clip, plan)
        bad = np.zeros(n, dtype=bool)
        for S in subsets:
            mi = subset_mutual_information(eq, P, S, check=False)
            bad |= mi < cfg.subset_threshold(S, P)
        out.append(int(bad.sum()))
    return out


def _star_gains(cfg, rng, n):
    """User-to-relay gains ``h`` (n, M) and relay-to-sink gain ``g`` (n,)."""
    M = cfg.users
    g_top = two_hop_topology(1, sources=M)
    real = _scaled(sample_realization(g_top, rng, batch=n), cfg)
    relay, sink = M, M + 1
    h = np.stack([real.gain(relay, m)[:, 0, 0] for m in range(M)], axis=-1)
    gg = real.gain(sink, relay)[:, 0, 0]
    return np.abs(h) ** 2, np.abs(gg) ** 2


def _af_outages(cfg, rng, n, powers):
    h2, g2 = _star_gains(cfg, rng, n)
    out = []
    for P in powers:
        a2 = P / (P * h2.sum(axis=-1) + 1.0)
        eff = g2 * a2 / (1.0 + g2 * a2)
        bad = np.zeros(n, dtype=bool)
        for S in _subsets(cfg.users):
            mi = np.log2(1.0 + P * h2[:, list(S)].sum(axis=-1) * eff)
            bad |= mi < cfg.subset_threshold(S, P)
        out.append(int(bad.sum()))
    return out


def ddf_listen_fraction(h2, rate_vector, P, multiplexing=True):
    """Exact fraction of the block the relay listens before decoding, in ``[0, 1]``."""
    h2 = np.atleast_2d(h2)
    need = np.zeros(h2.shape[0])
    for S in _subsets(h2.shape[1]):
        total = sum(rate_vector[m] for m in S)
        bits = total * math.log2(P) if multiplexing else total
        if bits <= 0:
            continue
        cap = np.log2(1.0 + h2[:, list(S)].sum(axis=-1) * P)
        with np.errstate(divide="ignore"):
            frac = np.where(cap > 0, bits / np.where(cap > 0, cap, 1.0), np.inf)
        need = np.maximum(need, frac)
    return np.minimum(need, 1.0)


def _ddf_outages(cfg, rng, n, powers):
    h2, g2 = _star_gains(cfg, rng, n)
    out = []
    for P in powers:
        l = ddf_listen_fraction(h2, cfg.rate_vector, P, cfg.multiplexing)
        bad = (1.0 - l) * np.log2(1.0 + g2 * P) < cfg.threshold(P)
        out.append(int(bad.sum()))
    return out


_KERNELS = {
    "p2p": _rs_outages,
    "mac_rs": _rs_outages,
    "mac_af_single_relay": _af_outages,
    "mac_ddf_single_relay": _ddf_outages,
}


def _chunk_size(k: int) -> int:
    return min(_FIRST_CHUNK << min(k, 16), _MAX_CHUNK)


def _chunk_task(cfg, purpose, k, n, powers):
    rng = rngmod.stream(cfg.seed, k, purpose)
    return _KERNELS[cfg.mode](cfg, rng, n, powers)


# -- sweep driver --------------------------------------------------------------

def run_sweep(cfg: ExperimentConfig, workers: int = 1) -> list:
    """All SNR points of ``cfg`` in grid order; deterministic for any ``workers``."""
    snrs = list(cfg.snr_grid_db)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        if cfg.crn:
            groups = [(_PURPOSE_TRIALS, list(range(len(snrs))))]
        else:
            groups = [(_PURPOSE_TRIALS + 1 + i, [i]) for i in range(len(snrs))]
        counts = [0] * len(snrs)
        trials = [0] * len(snrs)
        for purpose, idxs in groups:
            c, t = _run_group_ordered(cfg, purpose, [snrs[i] for i in idxs], pool, workers)
            for j, i in enumerate(idxs):
                counts[i], trials[i] = c[j], t[j]
    finally:
        if pool is not None:
            pool.shutdown()
    return [OutageRecord.from_counts(s, cfg.threshold(10.0 ** (s / 10.0)), t, c)
            for s, t, c in zip(snrs, trials, counts)]


def _run_group_ordered(cfg, purpose, snrs, pool, workers):
    """Consume chunks strictly in order; every point sees the same chunk prefix."""
    pol = cfg.policy
    powers = [10.0 ** (s / 10.0) for s in snrs]
    counts = [0] * len(snrs)
    trials = [0] * len(snrs)
    active = list(range(len(snrs)))
    k = 0
    done = 0
    while active and done < pol.max_trials:
        wave = []
        planned = done
        while len(wave) < max(1, workers) and planned < pol.max_trials:
            kk = k + len(wave)
            n = min(_chunk_size(kk), pol.max_trials - planned)
            wave.append((kk, n))
            planned += n
        sub = tuple(powers[i] for i in active)
        if pool is None:
            results = [_chunk_task(cfg, purpose, kk, n, sub) for kk, n in wave]
        else:
            futs = [pool.submit(_chunk_task, cfg, purpose, kk, n, sub) for kk, n in wave]
            results = [f.result() for f in futs]
        snapshot = list(active)
        for (kk, n), res in zip(wave, results):
            by_idx = dict(zip(snapshot, res))
            done += n
            still = []
            for idx in active:
                counts[idx] += by_idx[idx]
                trials[idx] += n
                if counts[idx] < pol.target_events or trials[idx] < pol.min_trials:
                    still.append(idx)
            active = still
            if not active:
                break
        k += len(wave)
    return counts, trials


def estimate_outage(cfg: ExperimentConfig, snr_db: float, workers: int = 1) -> OutageRecord:
    """Single-point estimate in p2p (or any) mode."""
    return run_sweep(replace(cfg, snr_grid_db=(float(snr_db),)), workers)[0]


def estimate_outage_mac(cfg: ExperimentConfig, snr_db: float, workers: int = 1) -> OutageRecord:
    """Multiple-access estimate: outage if any user subset falls short."""
    if cfg.mode not in ("mac_rs", "p2p"):
        raise ValueError("estimate_outage_mac expects an RS configuration")
    if cfg.users > MAX_MAC_USERS:
        raise ValueError(f"at most {MAX_MAC_USERS} users")
    return estimate_outage(replace(cfg, mode="mac_rs"), snr_db, workers)


def _star_config(mode, M, rates, snr_db, policy, multiplexing, seed, gain_scale):
    rates = tuple(float(r) for r in (rates if np.ndim(rates) else [rates] * M))
    if len(rates) != M:
        raise ValueError("rate vector length must equal M")
    kw = {"rates": rates} if multiplexing else {"fixed_rates": rates}
    return ExperimentConfig(mode=mode, snr_grid_db=(float(snr_db),), policy=policy or TrialPolicy(),
                            seed=rngmod.resolve_seed(seed), gain_scale=tuple(gain_scale), **kw)


def simulate_af_mac_single_relay(M, rates, snr_db, policy=None, multiplexing=True, seed=None,
                                 gain_scale=(), workers=1) -> OutageRecord:
    """Amplify-and-forward multiple-access channel through one relay, no direct link.

    Users are nodes ``0..M-1``, the relay ``M`` and the sink ``M+1``.
    """
    cfg = _star_config("mac_af_single_relay", M, rates, snr_db, policy, multiplexing, seed, gain_scale)
    return run_sweep(cfg, workers)[0]


def simulate_ddf_mac_single_relay(M, rates, snr_db, policy=None, multiplexing=True, seed=None,
                                  gain_scale=(), workers=1) -> OutageRecord:
    """Dynamic decode-and-forward counterpart of :func:`simulate_af_mac_single_relay`."""
    cfg = _star_config("mac_ddf_single_relay", M, rates, snr_db, policy, multiplexing, seed, gain_scale)
    return run_sweep(cfg, workers)[0]
