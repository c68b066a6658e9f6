"""Shared fixtures: the five-node example, Renault data, random generators."""

from __future__ import annotations

import numpy as np
import pytest

import cbv

# Five-node network: P = {A, B, C}, O = {X, Y}.  Internal cross-holdings,
# four outgoing and four incoming boundary edges.
P_IDS = ("A", "B", "C")
O_IDS = ("X", "Y")
B_P = (25.0, 35.0, 30.0)
V_O = (60.0, 80.0)
V_P_OBSERVED = (52.0, 48.0, 30.0)
O_PO = ((0.05, 0.02), (0.03, 0.00), (0.00, 0.04))
O_PP = ((0.00, 0.10, 0.00), (0.05, 0.00, 0.10), (0.00, 0.05, 0.00))
O_OP = ((0.10, 0.05, 0.00), (0.00, 0.08, 0.12))

# Frozen reference values for the example above.
EXAMPLE_BASE = 90.0
EXAMPLE_T_OUT = 9.6
EXAMPLE_T_IN_A = 15.04
EXAMPLE_W_A = 84.56
EXAMPLE_V_P_B = (33.8020, 42.0202, 35.3010)
EXAMPLE_W_B = 86.5211

# Renault / Nissan snapshot (EUR).
V_RENAULT = 9.06e9
V_NISSAN = 7.044303429e9
SHARE_R_IN_N = 0.357
SHARE_N_IN_R = 0.15


def example_stats(with_v_p: bool = True, with_o_pp: bool = True) -> cbv.CutStatistics:
    return cbv.CutStatistics(
        p_ids=P_IDS,
        o_ids=O_IDS,
        b_p=B_P,
        v_o=V_O,
        v_p=V_P_OBSERVED if with_v_p else None,
        o_po=O_PO,
        o_op=O_OP,
        o_pp=O_PP if with_o_pp else None,
    )


def example_network() -> cbv.OwnershipNetwork:
    full = np.zeros((5, 5))
    ids = P_IDS + O_IDS
    full[:3, :3] = np.array(O_PP)
    full[:3, 3:] = np.array(O_PO)
    full[3:, :3] = np.array(O_OP)
    return cbv.OwnershipNetwork(ids, full)


def renault_stats() -> cbv.CutStatistics:
    b_r = V_RENAULT - SHARE_R_IN_N * V_NISSAN
    return cbv.CutStatistics(
        p_ids=("RENAULT",),
        o_ids=("NISSAN",),
        b_p=[b_r],
        v_o=[V_NISSAN],
        v_p=[V_RENAULT],
        o_po=[[SHARE_R_IN_N]],
        o_op=[[SHARE_N_IN_R]],
        o_pp=[[0.0]],
    )


@pytest.fixture
def stats_a() -> cbv.CutStatistics:
    return example_stats()


@pytest.fixture
def stats_b() -> cbv.CutStatistics:
    return example_stats(with_v_p=False)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20250808)


def random_share_matrix(rng, n: int, density: float = 0.5, col_cap: float = 0.9):
    """Nonnegative share matrix with zero diagonal and column sums <= col_cap."""
    mat = rng.uniform(0.0, 1.0, size=(n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(mat, 0.0)
    sums = mat.sum(axis=0)
    over = sums > 0
    caps = rng.uniform(0.3, col_cap, size=n)
    mat[:, over] = mat[:, over] * (caps[over] / sums[over])
    return mat


def random_regime_stats(rng, n_p: int, n_o: int, observed: bool = False):
    """Random feasible boundary statistics (column sums over all owners <= 0.9)."""
    n = n_p + n_o
    full = random_share_matrix(rng, n)
    ids = tuple(f"p{k:02d}" for k in range(n_p)) + tuple(f"o{k:02d}" for k in range(n_o))
    b_p = rng.uniform(5.0, 50.0, size=n_p)
    v_o = rng.uniform(10.0, 100.0, size=n_o)
    stats = cbv.CutStatistics(
        p_ids=ids[:n_p],
        o_ids=ids[n_p:],
        b_p=b_p,
        v_o=v_o,
        o_po=full[:n_p, n_p:],
        o_op=full[n_p:, :n_p],
        o_pp=full[:n_p, :n_p],
    )
    if observed:
        v_p, _ = cbv.estimate_internal_values(stats)
        stats = stats.with_v_p(v_p)
    return stats


def gauge_rewiring_family(rng, n_draws: int = 10):
    """A Regime-B instance plus rewired internal blocks with identical
    boundary operators.

    Structure: node p1 owns nothing (row of O_PP and O_PO zero) and node p2 is
    owned by nobody (column of O_PP and O_OP zero), so the (p2, p1) internal
    entry is free: changing it moves v_P but leaves T_PO, U_OP and therefore
    the consolidated value untouched.
    """
    o_pp = np.array([
        [0.00, 0.20, 0.0],
        [0.00, 0.00, 0.0],
        [0.15, 0.10, 0.0],
    ])
    o_po = np.array([
        [0.05, 0.02],
        [0.00, 0.00],
        [0.03, 0.06],
    ])
    o_op = np.array([
        [0.10, 0.05, 0.0],
        [0.04, 0.08, 0.0],
    ])
    base = cbv.CutStatistics(
        p_ids=("p0", "p1", "p2"),
        o_ids=("o0", "o1"),
        b_p=rng.uniform(10.0, 40.0, size=3),
        v_o=rng.uniform(20.0, 90.0, size=2),
        o_po=o_po,
        o_op=o_op,
        o_pp=o_pp,
    )
    rewired = []
    for eps in rng.uniform(0.01, 0.6, size=n_draws):
        variant = o_pp.copy()
        variant[2, 1] += eps
        rewired.append(cbv.CutStatistics(
            p_ids=base.p_ids,
            o_ids=base.o_ids,
            b_p=base.b_p,
            v_o=base.v_o,
            o_po=o_po,
            o_op=o_op,
            o_pp=variant,
        ))
    return base, rewired
