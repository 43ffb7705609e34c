"""Shared oracle helpers: brute-force path scoring against networkx, and
deterministic pseudo-random qualifications keyed by path."""

from __future__ import annotations

import hashlib
import random

import networkx as nx
import numpy as np

from manetsim.routing import (CustomerRequest, DiscoveryLimits,
                              PathQualification, ScoringWeights,
                              discover_paths, mscore, qualify, select_best)
from manetsim.social import generate_ts_matrix, path_mean_ts


def stable_rng(*key) -> random.Random:
    digest = hashlib.sha256(repr(key).encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def pseudo_qualification(path: tuple[int, ...], salt: int,
                         request: CustomerRequest) -> PathQualification:
    """Random but deterministic raw metrics for a path; both the candidate
    pipeline and the brute-force oracle must use this same mapping."""
    rng = stable_rng("qual", salt, path)
    return qualify(
        path=path, iteration=0,
        bw_bps=rng.uniform(50_000, 400_000),
        loss=rng.uniform(0.0, 0.6),
        delay_s=rng.uniform(0.0, 3.0),
        jitter_s=rng.uniform(0.0, 1.5),
        rm_margin_db=rng.uniform(0.0, 25.0),
        mm_speed_mps=rng.uniform(0.0, 5.0),
        request=request, max_speed_mps=2.0)


def random_connected_graph(rng: random.Random,
                           max_nodes: int = 8) -> tuple[dict, int, int]:
    while True:
        n = rng.randint(4, max_nodes)
        p = rng.uniform(0.35, 0.7)
        g = nx.gnp_random_graph(n, p, seed=rng.randrange(2**31))
        if nx.is_connected(g) and n >= 2:
            adj = {node: sorted(g.neighbors(node)) for node in g.nodes}
            return adj, 0, n - 1


def brute_force_best(adj: dict, src: int, dst: int, salt: int,
                     ts_matrix: np.ndarray, weights: ScoringWeights,
                     request: CustomerRequest):
    """Score every simple path via networkx enumeration and return the
    argmax under the same tie-break (fewer hops, then lexicographic)."""
    g = nx.Graph()
    g.add_nodes_from(adj)
    for a, nbrs in adj.items():
        for b in nbrs:
            g.add_edge(a, b)
    best = None
    best_key = None
    all_paths = []
    for path in nx.all_simple_paths(g, src, dst):
        path = tuple(path)
        all_paths.append(path)
        qual = pseudo_qualification(path, salt, request)
        ts = path_mean_ts(path, ts_matrix).mean_ts
        score = mscore(qual, ts, weights)
        key = (-score, len(path) - 1, path)
        if best_key is None or key < best_key:
            best_key = key
            best = path
    return best, set(all_paths)


def pipeline_best(adj: dict, src: int, dst: int, salt: int,
                  ts_matrix: np.ndarray, weights: ScoringWeights,
                  request: CustomerRequest):
    limits = DiscoveryLimits(ttl=len(adj), max_paths=10**6)
    paths = discover_paths(adj, src, dst, limits)
    candidates = [(pseudo_qualification(p, salt, request),
                   path_mean_ts(p, ts_matrix).mean_ts) for p in paths]
    choice = select_best(candidates, weights)
    return (choice[0].path if choice else None), set(paths)


def run_oracle_trial(seed: int) -> bool:
    """One random graph: discovery completeness plus argmax equality."""
    rng = stable_rng("trial", seed)
    adj, src, dst = random_connected_graph(rng)
    ts = generate_ts_matrix(len(adj), rng.uniform(0.5, 3.5), 1.0, rng)
    weights = ScoringWeights(w_ts=rng.choice([0.0, 0.125, 0.4, 0.8, 1.0]))
    request = CustomerRequest()
    expect, expect_paths = brute_force_best(adj, src, dst, seed, ts, weights,
                                            request)
    got, got_paths = pipeline_best(adj, src, dst, seed, ts, weights, request)
    return expect == got and expect_paths == got_paths
