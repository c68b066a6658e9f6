"""Ownership networks, perimeters and block partitioning.

The share matrix O is dense, with O[i, j] = fraction of node j's equity owned
by node i (dimensionless, in [0, 1]).  Column sums may stay below 1: the
residual belongs to dispersed holders that are not modelled as nodes.  Node
ordering is canonical (lexicographic by id) so that block matrices and any
serialized artifact derived from them are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, MembershipError
from .validation import ValidationReport

# Column sums above 1 + COLUMN_SUM_SLACK are violations; anything below is a
# legal dispersed-holder residual.
COLUMN_SUM_SLACK = 1e-9

NodeId = str


class OwnershipNetwork:
    """Immutable node set plus share matrix, canonically ordered."""

    def __init__(self, nodes, shares):
        ids = [str(n) for n in nodes]
        if any(not n for n in ids):
            raise MembershipError("node ids must be non-empty strings")
        if len(set(ids)) != len(ids):
            raise MembershipError("node ids must be unique")
        shares = np.asarray(shares, dtype=float)
        n = len(ids)
        if shares.shape != (n, n):
            raise DimensionError(
                f"share matrix shape {shares.shape} does not match {n} nodes"
            )
        order = np.argsort(np.asarray(ids, dtype=object))
        self.nodes: tuple[NodeId, ...] = tuple(ids[k] for k in order)
        self.shares: np.ndarray = shares[np.ix_(order, order)].copy()
        self.shares.setflags(write=False)

    @classmethod
    def from_edges(cls, nodes, edges) -> "OwnershipNetwork":
        """Build from (owner, owned, share) triples; absent edges are zero."""
        ids = sorted(str(n) for n in nodes)
        index = {n: k for k, n in enumerate(ids)}
        shares = np.zeros((len(ids), len(ids)))
        for owner, owned, share in edges:
            try:
                shares[index[str(owner)], index[str(owned)]] = float(share)
            except KeyError as exc:
                raise MembershipError(f"unknown node id {exc.args[0]!r}") from exc
        return cls(ids, shares)

    def index_of(self, node: NodeId) -> int:
        try:
            return self.nodes.index(node)
        except ValueError:
            raise MembershipError(f"unknown node id {node!r}") from None

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"OwnershipNetwork({len(self.nodes)} nodes)"


@dataclass(frozen=True)
class Perimeter:
    """Subset of nodes being consolidated; the complement is derived."""

    members: frozenset[NodeId]

    def __init__(self, members):
        object.__setattr__(self, "members", frozenset(str(m) for m in members))

    def complement(self, network: OwnershipNetwork) -> frozenset[NodeId]:
        unknown = self.members - set(network.nodes)
        if unknown:
            raise MembershipError(f"perimeter ids not in network: {sorted(unknown)}")
        return frozenset(network.nodes) - self.members

    def __contains__(self, node: NodeId) -> bool:
        return node in self.members


@dataclass(frozen=True)
class BlockPartition:
    """The four share blocks induced by a perimeter, with their id maps."""

    p_ids: tuple[NodeId, ...]
    o_ids: tuple[NodeId, ...]
    o_pp: np.ndarray
    o_po: np.ndarray
    o_op: np.ndarray
    o_oo: np.ndarray

    def assemble(self) -> tuple[tuple[NodeId, ...], np.ndarray]:
        """Reassemble the original matrix (in canonical node order)."""
        ids = self.p_ids + self.o_ids
        order = np.argsort(np.asarray(ids, dtype=object))
        full = np.block([[self.o_pp, self.o_po], [self.o_op, self.o_oo]])
        return tuple(ids[k] for k in order), full[np.ix_(order, order)]


def partition(network: OwnershipNetwork, perimeter: Perimeter) -> BlockPartition:
    """Split the share matrix into the P/O blocks for a perimeter."""
    o_members = perimeter.complement(network)
    p_ids = tuple(sorted(perimeter.members))
    o_ids = tuple(sorted(o_members))
    p_idx = [network.index_of(n) for n in p_ids]
    o_idx = [network.index_of(n) for n in o_ids]
    shares = network.shares
    return BlockPartition(
        p_ids=p_ids,
        o_ids=o_ids,
        o_pp=shares[np.ix_(p_idx, p_idx)].copy(),
        o_po=shares[np.ix_(p_idx, o_idx)].copy(),
        o_op=shares[np.ix_(o_idx, p_idx)].copy(),
        o_oo=shares[np.ix_(o_idx, o_idx)].copy(),
    )


def validate_network(network: OwnershipNetwork) -> ValidationReport:
    """Report share entries outside [0, 1] and column sums above 1."""
    report = ValidationReport()
    shares = network.shares
    bad = np.argwhere((shares < 0.0) | (shares > 1.0))
    for i, j in bad:
        report.add(
            "entry-range",
            "error",
            f"share {shares[i, j]!r} outside [0, 1]",
            location=f"{network.nodes[i]}->{network.nodes[j]}",
        )
    col_sums = shares.sum(axis=0)
    for j in np.nonzero(col_sums > 1.0 + COLUMN_SUM_SLACK)[0]:
        report.add(
            "column-sum",
            "error",
            f"ownership of {network.nodes[j]!r} sums to {col_sums[j]!r} > 1",
            location=network.nodes[j],
        )
    return report


@dataclass(frozen=True)
class NodePrimitives:
    """Base values b and equity values v, keyed by node id.

    v may be partial: estimated regimes leave perimeter entries absent.
    """

    b: dict[NodeId, float]
    v: dict[NodeId, float]

    def check_coverage(self, perimeter_ids, complement_ids):
        missing_b = [n for n in perimeter_ids if n not in self.b]
        if missing_b:
            raise MembershipError(f"bases missing for perimeter nodes: {missing_b}")
        missing_v = [n for n in complement_ids if n not in self.v]
        if missing_v:
            raise MembershipError(f"values missing for complement nodes: {missing_v}")


@dataclass(frozen=True)
class HaircutSpec:
    """Multiplicative liquidity and currency haircuts, both in [0, 1]."""

    h_liq: float = 1.0
    h_fx: float = 1.0

    def __post_init__(self):
        for name, value in (("h_liq", self.h_liq), ("h_fx", self.h_fx)):
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name}={value!r} outside [0, 1]")

    @property
    def combined(self) -> float:
        return self.h_liq * self.h_fx


def apply_haircut(spec: HaircutSpec, value: float) -> float:
    """Effective value after liquidity and currency haircuts."""
    value = float(value)
    if not np.isfinite(value):
        raise DomainError(f"value {value!r} is not finite")
    return spec.combined * value
