"""Independent reference implementations shared by the tests."""

import itertools
import math


def _inner_by_vertices(coef, demand):
    """min sum(mu) s.t. coef.mu >= demand, 0 <= mu <= 1 by scanning LP vertices.

    A vertex has every coordinate at a bound except at most one, which then
    makes the covering constraint tight.
    """
    if demand <= 0:
        return 0.0
    edges = list(coef)
    best = math.inf
    for mask in itertools.product((0, 1), repeat=len(edges)):
        full = sum(coef[e] for e, b in zip(edges, mask) if b)
        ones = sum(mask)
        if full >= demand - 1e-12:
            best = min(best, ones)
        for e, b in zip(edges, mask):
            if not b:
                frac = (demand - full) / coef[e]
                if 0 <= frac <= 1:
                    best = min(best, ones + frac)
    return best


def brute_exact(paths, S, r):
    demand = len(paths) - S * r
    best = math.inf
    for t in itertools.product(*[p.hop_edges() for p in paths]):
        coef = {}
        for e in t:
            coef[e] = coef.get(e, 0) + 1
        best = min(best, _inner_by_vertices(coef, demand))
    return max(best, 0.0)


