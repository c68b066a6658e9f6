"""Consolidated value of a perimeter from its boundary statistics.

The consolidated value of a perimeter P with complement O is

    W(P) = sum_{j in P} b_j
         + sum_{i in P, k in O} O_ik * v_k      (holdings across the cut)
         - sum_{i in O, j in P} O_ij * v_j      (external minorities)

and depends only on the internal bases and the edges crossing the cut.  Two
informational regimes are supported:

* Regime A: internal values v_P are observed, the internal block O_PP is
  never read and evaluation is linear in the number of boundary edges.
* Regime B: v_P is estimated first by solving (I - O_PP) v_P = b_P + O_PO v_O,
  which is well posed when rho(O_PP) < 1, then the same cut formula applies.

Boundary statistics may also be given directly as priced flow matrices (one
amount per edge) instead of share blocks times values; post-clearing net flows
and the macro case studies use that form.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    DomainError,
    RegimeError,
    StabilityError,
)
from .network import NodeId, NodePrimitives, OwnershipNetwork, Perimeter, partition
from .observer import Observer

DIRECT_SOLVER_MAX_SIZE = 2048
POWER_ITERATIONS = 100


def _vector(x, size, name) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.shape != (size,):
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {size}")
    arr.setflags(write=False)
    return arr


def _matrix(x, shape, name) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.shape != shape:
        raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CutStatistics:
    """Boundary data for one perimeter under one observer.

    Share form prices each cut edge as share * counterparty value; amount form
    (`x_po`, `x_op`) carries already-priced flows.  Either form may be used on
    each side of the cut.  `clearing_tag` marks post-clearing flows so that
    pre- and post-clearing data are never mixed downstream.
    """

    p_ids: tuple[NodeId, ...]
    o_ids: tuple[NodeId, ...]
    b_p: np.ndarray
    v_o: np.ndarray | None = None
    v_p: np.ndarray | None = None
    o_po: np.ndarray | None = None
    o_op: np.ndarray | None = None
    o_pp: np.ndarray | None = None
    x_po: np.ndarray | None = None
    x_op: np.ndarray | None = None
    clearing_tag: str | None = None

    def __post_init__(self):
        n_p, n_o = len(self.p_ids), len(self.o_ids)
        object.__setattr__(self, "b_p", _vector(self.b_p, n_p, "b_P"))
        for name, value, shape in (
            ("v_o", self.v_o, (n_o,)),
            ("v_p", self.v_p, (n_p,)),
            ("o_po", self.o_po, (n_p, n_o)),
            ("o_op", self.o_op, (n_o, n_p)),
            ("o_pp", self.o_pp, (n_p, n_p)),
            ("x_po", self.x_po, (n_p, n_o)),
            ("x_op", self.x_op, (n_o, n_p)),
        ):
            if value is None:
                continue
            if len(shape) == 1:
                object.__setattr__(self, name, _vector(value, shape[0], name))
            else:
                object.__setattr__(self, name, _matrix(value, shape, name))
        if self.x_po is None and self.o_po is None and n_o:
            raise DimensionError("outgoing side needs o_po/v_o or x_po")
        if self.x_op is None and self.o_op is None and n_o:
            raise DimensionError("incoming side needs o_op or x_op")
        if self.o_po is not None and self.v_o is None:
            raise DimensionError("o_po given without v_o")

    @classmethod
    def from_network(
        cls,
        network: OwnershipNetwork,
        perimeter: Perimeter,
        b,
        v=None,
        include_o_pp: bool = True,
    ) -> "CutStatistics":
        """Assemble share-form statistics from a full network and value maps.

        `b` must cover every perimeter member; `v` must cover the complement
        and may cover perimeter members (then v_P is observed).  A
        NodePrimitives instance can be passed in place of the two mappings.
        """
        if isinstance(b, NodePrimitives):
            primitives = b
        else:
            primitives = NodePrimitives(dict(b), dict(v or {}))
        blocks = partition(network, perimeter)
        primitives.check_coverage(blocks.p_ids, blocks.o_ids)
        b, v = primitives.b, primitives.v
        b_p = np.array([float(b[n]) for n in blocks.p_ids])
        v_o = np.array([float(v[n]) for n in blocks.o_ids])
        v_p = None
        if all(n in v for n in blocks.p_ids):
            v_p = np.array([float(v[n]) for n in blocks.p_ids])
        return cls(
            p_ids=blocks.p_ids,
            o_ids=blocks.o_ids,
            b_p=b_p,
            v_o=v_o,
            v_p=v_p,
            o_po=blocks.o_po,
            o_op=blocks.o_op,
            o_pp=blocks.o_pp if include_o_pp else None,
        )

    @classmethod
    def from_amounts(
        cls, p_ids, o_ids, b_p, x_po, x_op, clearing_tag=None
    ) -> "CutStatistics":
        """Amount-form statistics: edges carry already-priced flows."""
        return cls(
            p_ids=tuple(p_ids),
            o_ids=tuple(o_ids),
            b_p=b_p,
            x_po=x_po,
            x_op=x_op,
            clearing_tag=clearing_tag,
        )

    def with_v_p(self, v_p) -> "CutStatistics":
        return replace(self, v_p=_vector(v_p, len(self.p_ids), "v_P"))

    def restrict(self, p_keep, o_keep) -> "CutStatistics":
        """Sub-statistics over a subset of node ids (canonical order kept)."""
        p_keep, o_keep = set(p_keep), set(o_keep)
        pi = [k for k, n in enumerate(self.p_ids) if n in p_keep]
        oi = [k for k, n in enumerate(self.o_ids) if n in o_keep]

        def cut(value, rows, cols=None):
            if value is None:
                return None
            if cols is None:
                return value[rows]
            return value[np.ix_(rows, cols)]

        return CutStatistics(
            p_ids=tuple(self.p_ids[k] for k in pi),
            o_ids=tuple(self.o_ids[k] for k in oi),
            b_p=self.b_p[pi],
            v_o=cut(self.v_o, oi),
            v_p=cut(self.v_p, pi),
            o_po=cut(self.o_po, pi, oi),
            o_op=cut(self.o_op, oi, pi),
            o_pp=cut(self.o_pp, pi, pi),
            x_po=cut(self.x_po, pi, oi),
            x_op=cut(self.x_op, oi, pi),
            clearing_tag=self.clearing_tag,
        )


def scale_units(kappa: float, stats: CutStatistics) -> CutStatistics:
    """Multiply every monetary quantity by kappa; shares are untouched."""
    if not kappa > 0:
        raise DomainError(f"kappa={kappa!r} must be > 0")

    def scaled(value):
        return None if value is None else kappa * value

    return replace(
        stats,
        b_p=kappa * stats.b_p,
        v_o=scaled(stats.v_o),
        v_p=scaled(stats.v_p),
        x_po=scaled(stats.x_po),
        x_op=scaled(stats.x_op),
    )


@dataclass(frozen=True)
class SpectralBound:
    """Cheap upper bounds on rho(O_PP) plus a power-iteration estimate."""

    rho_upper: float
    norm_1: float
    norm_inf: float
    gershgorin_ok: bool
    power_iteration_estimate: float


def spectral_radius_bound(o_pp, power_iters: int = POWER_ITERATIONS) -> SpectralBound:
    """Norm and Gershgorin bounds, and a fixed-iteration power estimate on |O_PP|."""
    m = np.asarray(o_pp, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("o_pp must be square")
    if m.size == 0:
        return SpectralBound(0.0, 0.0, 0.0, True, 0.0)
    a = np.abs(m)
    norm_1 = float(a.sum(axis=0).max())
    norm_inf = float(a.sum(axis=1).max())
    # each disk is centered at a_ii with radius sum_{j != i} |a_ij|, so the
    # bound on |lambda| from row i is the full absolute row sum
    gershgorin_ok = bool(a.sum(axis=1).max() < 1.0)
    vec = np.ones(m.shape[0]) / m.shape[0]
    estimate = 0.0
    for _ in range(power_iters):
        nxt = a @ vec
        total = nxt.sum()
        if total == 0.0:
            estimate = 0.0
            break
        new_estimate = float(total / vec.sum())
        vec = nxt / total
        if abs(new_estimate - estimate) < 1e-14:
            estimate = new_estimate
            break
        estimate = new_estimate
    return SpectralBound(
        rho_upper=min(norm_1, norm_inf),
        norm_1=norm_1,
        norm_inf=norm_inf,
        gershgorin_ok=gershgorin_ok,
        power_iteration_estimate=estimate,
    )


@dataclass(frozen=True)
class SolverConfig:
    """How internal values are estimated in Regime B."""

    method: str = "auto"
    eps: float = 1e-10
    max_iters: int = 10000
    damping: float | None = None
    regularization: float | None = None

    def __post_init__(self):
        if self.method not in ("auto", "direct", "neumann", "iterative_krylov"):
            raise DomainError(f"unknown solver method {self.method!r}")
        if self.eps <= 0:
            raise DomainError("eps must be > 0")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if self.damping is not None and not 0.0 < self.damping < 1.0:
            raise DomainError("damping must be in (0, 1)")
        if self.regularization is not None and self.regularization < 0:
            raise DomainError("regularization must be >= 0")


@dataclass
class SolverLog:
    """What the estimation actually did, for disclosure."""

    method: str
    iterations: int = 0
    residual: float = 0.0
    rho_bound: SpectralBound | None = None
    damping: float | None = None
    regularization: float | None = None
    warnings: list[str] = field(default_factory=list)
    dropped_edges: int = 0


@dataclass(frozen=True)
class ValuationResult:
    """W plus the three boundary terms it decomposes into."""

    w: float
    base_total: float
    t_out: float
    t_in: float
    v_p_used: np.ndarray | None
    solver_log: SolverLog


def _priced_edges(share_block, values, amounts, tau):
    """Edge totals with sub-threshold amounts dropped, in canonical order."""
    if amounts is None:
        if share_block is None:
            return 0.0, 0
        amounts = share_block * values[np.newaxis, :]
        active = share_block != 0.0
    else:
        active = amounts != 0.0
    if tau > 0.0:
        keep = active & (np.abs(amounts) >= tau)
    else:
        keep = active
    dropped = int(active.sum() - keep.sum())
    return float(amounts[keep].sum()), dropped


def evaluate_regime_a(
    stats: CutStatistics, rounding_threshold: float = 0.0
) -> ValuationResult:
    """Direct cut evaluation with observed internal values.

    Cost is linear in the number of boundary edges; the internal block is
    never read.  Edge amounts below the rounding threshold are dropped and
    counted in the log.
    """
    if stats.x_op is None and stats.o_op is not None and stats.v_p is None:
        raise RegimeError("regime A needs observed v_P to price external minorities")
    t_out, dropped_out = _priced_edges(
        stats.o_po, stats.v_o, stats.x_po, rounding_threshold
    )
    t_in, dropped_in = _priced_edges(
        stats.o_op, stats.v_p, stats.x_op, rounding_threshold
    )
    base_total = float(stats.b_p.sum())
    log = SolverLog(method="direct-cut", dropped_edges=dropped_out + dropped_in)
    return ValuationResult(
        w=base_total + t_out - t_in,
        base_total=base_total,
        t_out=t_out,
        t_in=t_in,
        v_p_used=stats.v_p,
        solver_log=log,
    )


def _stability_gate(bound: SpectralBound, cfg: SolverConfig, log: SolverLog):
    if bound.rho_upper < 1.0:
        return
    if bound.power_iteration_estimate < 1.0:
        log.warnings.append(
            f"norm bounds >= 1 (min {bound.rho_upper!r}); proceeding on power "
            f"estimate {bound.power_iteration_estimate!r}"
        )
        return
    if cfg.damping is None and cfg.regularization is None:
        raise StabilityError(
            f"rho(O_PP) >= 1 by every available bound "
            f"(norms {bound.rho_upper!r}, power {bound.power_iteration_estimate!r}); "
            "configure damping or regularization explicitly"
        )
    log.warnings.append("stability bounds >= 1; relying on configured adjustment")


def estimate_internal_values(
    stats: CutStatistics, cfg: SolverConfig | None = None
) -> tuple[np.ndarray, SolverLog]:
    """Solve (I - O_PP) v_P = b_P + O_PO v_O for the internal values.

    The stability gate requires some verifiable bound on rho(O_PP) to sit
    below 1 unless damping or regularization is configured; damping rescales
    the internal block and both adjustments are recorded in the log.
    """
    cfg = cfg or SolverConfig()
    if stats.o_pp is None:
        raise RegimeError("regime B needs the internal block O_PP")
    if stats.o_po is None or stats.v_o is None:
        if len(stats.o_ids):
            raise RegimeError("regime B needs share-form o_po and v_o")
        rhs = stats.b_p.copy()
    else:
        rhs = stats.b_p + stats.o_po @ stats.v_o

    m = stats.o_pp
    log = SolverLog(
        method=cfg.method, damping=cfg.damping, regularization=cfg.regularization
    )
    if cfg.damping is not None:
        m = cfg.damping * m
    bound = spectral_radius_bound(m)
    log.rho_bound = bound
    _stability_gate(bound, cfg, log)

    n = m.shape[0]
    if cfg.regularization:
        m = m - cfg.regularization * np.eye(n)

    method = cfg.method
    if method == "auto":
        method = "direct" if n <= DIRECT_SOLVER_MAX_SIZE else "neumann"
        log.method = method

    system = np.eye(n) - m
    if method == "direct":
        v_p = np.linalg.solve(system, rhs)
        log.iterations = 0
    elif method == "neumann":
        v_p = rhs.copy()
        for iteration in range(1, cfg.max_iters + 1):
            v_p = rhs + m @ v_p
            residual = float(np.abs(system @ v_p - rhs).max()) if n else 0.0
            log.iterations = iteration
            if residual < cfg.eps:
                break
        else:
            raise ConvergenceError(
                f"Neumann iteration did not reach eps={cfg.eps!r} within "
                f"{cfg.max_iters} iterations (residual {residual!r})",
                last_iterate=v_p,
                residual=residual,
            )
    else:
        from scipy.sparse.linalg import gmres

        counter = {"n": 0}

        def count(_):
            counter["n"] += 1

        v_p, info = gmres(
            system, rhs, rtol=0.0, atol=cfg.eps, maxiter=cfg.max_iters,
            callback=count, callback_type="pr_norm",
        )
        log.iterations = counter["n"]
        if info != 0:
            residual = float(np.abs(system @ v_p - rhs).max())
            raise ConvergenceError(
                f"GMRES stopped with info={info} (residual {residual!r})",
                last_iterate=v_p,
                residual=residual,
            )
    log.residual = float(np.abs(system @ v_p - rhs).max()) if n else 0.0
    return v_p, log


def evaluate_regime_b(
    stats: CutStatistics,
    cfg: SolverConfig | None = None,
    rounding_threshold: float = 0.0,
) -> ValuationResult:
    """Estimate v_P, then evaluate the cut exactly as in Regime A."""
    v_p, log = estimate_internal_values(stats, cfg)
    result = evaluate_regime_a(stats.with_v_p(v_p), rounding_threshold)
    log.dropped_edges = result.solver_log.dropped_edges
    return replace(result, solver_log=log)


def evaluate_for_observer(
    stats: CutStatistics, observer: Observer, cfg: SolverConfig | None = None
) -> ValuationResult:
    """Re-price boundary statistics under an observer and evaluate its regime.

    Disclosure packages carry no v_P file; under regime A with share-form
    minorities and no observed v_P, the internal values are recovered from
    the structural identity v = b + O v (with an empty internal block when
    none is given), which reproduces the observed-value calculation whenever
    the bases were implied from observed values in the first place.
    """
    scale = observer.pricing_scale
    priced = scale_units(scale, stats) if scale != 1.0 else stats
    tau = observer.tolerances.rounding_threshold
    cfg = cfg or SolverConfig(
        eps=observer.tolerances.solver_eps, max_iters=observer.tolerances.max_iters
    )
    if observer.regime == "A":
        if priced.v_p is None and priced.x_op is None and priced.o_op is not None:
            if priced.o_pp is None:
                priced = replace(priced, o_pp=np.zeros((len(priced.p_ids),) * 2))
            return evaluate_regime_b(priced, cfg, tau)
        return evaluate_regime_a(priced, tau)
    return evaluate_regime_b(priced, cfg, tau)


@dataclass(frozen=True)
class SchurOperators:
    """Effective boundary operators after eliminating the internal block."""

    s_oo: np.ndarray
    t_po: np.ndarray
    u_op: np.ndarray


def schur_operators(blocks) -> SchurOperators:
    """S_OO, T_PO and U_OP for a block partition.

    T_PO = (I - O_PP)^-1 O_PO and U_OP = O_OP (I - O_PP)^-1 summarize how the
    perimeter looks from the frontier; purely internal rewirings that keep
    them fixed cannot move the consolidated value.
    """
    m = np.eye(blocks.o_pp.shape[0]) - blocks.o_pp
    gate = spectral_radius_bound(blocks.o_pp)
    if min(gate.rho_upper, gate.power_iteration_estimate) >= 1.0:
        raise StabilityError("I - O_PP is not safely invertible")
    try:
        t_po = np.linalg.solve(m, blocks.o_po)
        u_op = np.linalg.solve(m.T, blocks.o_op.T).T
    except np.linalg.LinAlgError as exc:
        raise StabilityError(f"I - O_PP is singular: {exc}") from exc
    s_oo = np.eye(blocks.o_oo.shape[0]) - blocks.o_oo - blocks.o_op @ t_po
    return SchurOperators(s_oo=s_oo, t_po=t_po, u_op=u_op)


@dataclass(frozen=True)
class EffectiveExternalShare:
    """Total value leaking to outside owners, and the meta-node share."""

    e_ext: float
    omega_eff: float
    v_p: np.ndarray


def effective_external_share(
    stats: CutStatistics, cfg: SolverConfig | None = None
) -> EffectiveExternalShare:
    """Compress the perimeter into a meta-node with one external share.

    delta_j is the direct outside ownership of each internal node; the leakage
    E_ext = delta' (I - O_PP)^-1 (b_P + O_PO v_O) equals the minorities term,
    so W(P) = 1'b_P + 1'O_PO v_O - E_ext reproduces the Regime-B value.
    """
    if stats.o_op is None:
        raise RegimeError("effective external share needs the o_op block")
    v_p, _ = estimate_internal_values(stats, cfg)
    delta = stats.o_op.sum(axis=0)
    e_ext = float(delta @ v_p)
    total = float(v_p.sum())
    omega_eff = e_ext / total if total != 0.0 else 0.0
    return EffectiveExternalShare(e_ext=e_ext, omega_eff=omega_eff, v_p=v_p)


def hedge_vector(stats: CutStatistics) -> dict[NodeId, float]:
    """Aggregate exposure of the perimeter to each outside node."""
    if stats.o_po is None:
        return {node: 0.0 for node in stats.o_ids}
    sums = stats.o_po.sum(axis=0)
    return {node: float(sums[k]) for k, node in enumerate(stats.o_ids)}


def cut_gap(gross: float, w: float) -> float:
    """(gross - W) / W, the double-counting diagnostic."""
    if w == 0.0:
        raise DomainError("cut gap undefined for W = 0")
    return (gross - w) / w


def implied_bases(network: OwnershipNetwork, v) -> dict[NodeId, float]:
    """Back out b = v - O v from observed values on a full network."""
    values = np.array([float(v[n]) for n in network.nodes])
    bases = values - network.shares @ values
    return {node: float(bases[k]) for k, node in enumerate(network.nodes)}
