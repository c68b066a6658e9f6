"""Seniority-class clearing fixed point and post-clearing boundary flows.

Liabilities are grouped into ordered classes (class 1 is the most senior).
For node i, class l and a candidate payment matrix p, the payment map is

    T_i(l) = a_i + sum_k sum_j L^k[j, i] * theta^k_j
                 - sum_{k <= l} gamma^k_i * (pbar^k_i - p^k_i)
    p'_i(l) = clip(T_i(l) - sum_{k < l} pbar^k_i, 0, pbar^l_i)

so a class is paid from resources plus inflows, net of the full dues of the
classes senior to it and of the default costs charged by every class at or
above it in priority.  The map is monotone on the complete lattice of payment
profiles, so iterating from full payment descends to the greatest fixed point
and iterating from zero ascends to the least.  Within a class all nodes update
synchronously; a node short of a class pays its creditors pro rata to the
liability row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionError, DomainError
from .network import NodeId, Perimeter

DEFAULT_EPS = 1e-12
DEFAULT_MAX_SWEEPS = 100000


@dataclass(frozen=True)
class ClearingProblem:
    """Per-class liability matrices, resources, and default-cost fractions."""

    node_ids: tuple[NodeId, ...]
    liabilities: tuple[np.ndarray, ...]
    resources: np.ndarray
    default_costs: np.ndarray

    def __post_init__(self):
        n = len(self.node_ids)
        if not self.liabilities:
            raise DomainError("at least one liability class is required")
        mats = []
        for k, mat in enumerate(self.liabilities):
            mat = np.asarray(mat, dtype=float)
            if mat.shape != (n, n):
                raise DimensionError(f"class {k + 1} liabilities must be {n}x{n}")
            if (mat < 0).any():
                raise DomainError("liabilities must be nonnegative")
            mats.append(mat)
        object.__setattr__(self, "liabilities", tuple(mats))
        resources = np.asarray(self.resources, dtype=float).reshape(-1)
        if resources.shape != (n,):
            raise DimensionError("resources must have one entry per node")
        if (resources < 0).any():
            raise DomainError("resources must be nonnegative")
        object.__setattr__(self, "resources", resources)
        costs = np.asarray(self.default_costs, dtype=float)
        if costs.ndim == 1:
            costs = np.tile(costs.reshape(-1, 1), (1, n)) if costs.shape == (
                len(mats),
            ) else np.tile(costs.reshape(1, -1), (len(mats), 1))
        if costs.shape != (len(mats), n):
            raise DimensionError("default_costs must broadcast to (classes, nodes)")
        if ((costs < 0) | (costs > 1)).any():
            raise DomainError("default costs must lie in [0, 1]")
        object.__setattr__(self, "default_costs", costs)

    @classmethod
    def single_class(cls, node_ids, liabilities, resources, gamma=0.0):
        n = len(tuple(node_ids))
        return cls(
            node_ids=tuple(node_ids),
            liabilities=(np.asarray(liabilities, dtype=float),),
            resources=resources,
            default_costs=np.full((1, n), float(gamma)),
        )

    @property
    def n_classes(self) -> int:
        return len(self.liabilities)

    def gross_dues(self) -> np.ndarray:
        """(classes, nodes) array of total obligations per node and class."""
        return np.stack([mat.sum(axis=1) for mat in self.liabilities])


@dataclass(frozen=True)
class ClearingOutcome:
    """Payments and payout ratios at the fixed point."""

    node_ids: tuple[NodeId, ...]
    payments: np.ndarray
    payout_ratios: np.ndarray
    iterations: int
    residual: float
    selection: str


def _payout_ratios(payments: np.ndarray, dues: np.ndarray) -> np.ndarray:
    ratios = np.ones_like(payments)
    positive = dues > 0.0
    ratios[positive] = payments[positive] / dues[positive]
    return ratios


def _payment_map(problem: ClearingProblem, payments: np.ndarray, dues: np.ndarray) -> np.ndarray:
    theta = _payout_ratios(payments, dues)
    inflows = problem.resources.copy()
    for k, mat in enumerate(problem.liabilities):
        # payments are pro rata: node j sends theta_j * L[j, i] to creditor i
        inflows += theta[k] @ mat
    shortfall_costs = problem.default_costs * (dues - payments)
    cumulative_costs = np.cumsum(shortfall_costs, axis=0)
    senior_dues = np.cumsum(dues, axis=0) - dues
    capacity = inflows[np.newaxis, :] - cumulative_costs - senior_dues
    return np.clip(capacity, 0.0, dues)


def clear(
    problem: ClearingProblem,
    selection: str = "greatest",
    eps: float = DEFAULT_EPS,
    max_iters: int = DEFAULT_MAX_SWEEPS,
) -> ClearingOutcome:
    """Iterate the payment map to the selected fixed point.

    `greatest` starts from full payment and descends; `least` starts from zero
    and ascends.  Convergence is declared when successive payment profiles
    differ by less than eps in the max norm.
    """
    if selection not in ("greatest", "least"):
        raise DomainError(f"selection must be greatest or least, got {selection!r}")
    if eps <= 0 or max_iters < 1:
        raise DomainError("eps must be > 0 and max_iters >= 1")
    dues = problem.gross_dues()
    payments = dues.copy() if selection == "greatest" else np.zeros_like(dues)
    residual = float("inf")
    for sweep in range(1, max_iters + 1):
        updated = _payment_map(problem, payments, dues)
        residual = float(np.abs(updated - payments).max()) if dues.size else 0.0
        payments = updated
        if residual < eps:
            return ClearingOutcome(
                node_ids=problem.node_ids,
                payments=payments,
                payout_ratios=_payout_ratios(payments, dues),
                iterations=sweep,
                residual=residual,
                selection=selection,
            )
    raise ConvergenceError(
        f"clearing did not converge within {max_iters} sweeps "
        f"(last residual {residual!r})",
        last_iterate=payments,
        residual=residual,
    )


def iterate_once(problem: ClearingProblem, payments: np.ndarray) -> np.ndarray:
    """One synchronous sweep of the payment map (exposed for diagnostics)."""
    return _payment_map(problem, np.asarray(payments, dtype=float), problem.gross_dues())


@dataclass(frozen=True)
class NetBoundaryFlows:
    """Post-clearing net flows across a perimeter, as priced edge matrices."""

    p_ids: tuple[NodeId, ...]
    o_ids: tuple[NodeId, ...]
    x_po: np.ndarray
    x_op: np.ndarray


def net_boundary_flows(
    problem: ClearingProblem, outcome: ClearingOutcome, perimeter: Perimeter
) -> NetBoundaryFlows:
    """Scale boundary liabilities by the payer's payout ratios and split.

    The result is suitable as amount-form cut input downstream; internal
    rewirings that preserve these nets cannot move the consolidated value.
    """
    if outcome.node_ids != problem.node_ids:
        raise DimensionError("outcome and problem refer to different node sets")
    members = {str(m) for m in perimeter.members}
    unknown = members - set(problem.node_ids)
    if unknown:
        raise DimensionError(f"perimeter ids not cleared here: {sorted(unknown)}")
    p_ids = tuple(sorted(members))
    o_ids = tuple(sorted(set(problem.node_ids) - members))
    p_idx = [problem.node_ids.index(n) for n in p_ids]
    o_idx = [problem.node_ids.index(n) for n in o_ids]
    x_po = np.zeros((len(p_ids), len(o_ids)))
    x_op = np.zeros((len(o_ids), len(p_ids)))
    for k, mat in enumerate(problem.liabilities):
        paid = outcome.payout_ratios[k][:, np.newaxis] * mat
        x_po += paid[np.ix_(p_idx, o_idx)]
        x_op += paid[np.ix_(o_idx, p_idx)]
    return NetBoundaryFlows(p_ids=p_ids, o_ids=o_ids, x_po=x_po, x_op=x_op)
