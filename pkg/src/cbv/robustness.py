"""Error propagation bounds, conditioning diagnostics and uncertainty bands.

If the base vector moves by at most eta and the external values by at most
eps (both in p-norm), the consolidated value moves by at most

    |dW| <= ||1_P||_q * eta + ||1_P' O_PO||_q * eps        (q dual to p)

when internal values are held fixed; in Regime B the response of the
estimated v_P adds a term proportional to ||(I - O_PP)^-1||.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import (
    CutStatistics,
    SolverConfig,
    estimate_internal_values,
    evaluate_regime_b,
    spectral_radius_bound,
)
from .errors import DomainError, StabilityError

DENSE_CONDITION_LIMIT = 64

_P_NORMS = (1.0, 2.0, float("inf"))


def _canonical_p(p) -> float:
    value = float("inf") if p in ("inf", "infinity") else float(p)
    if value not in _P_NORMS:
        raise DomainError(f"norm selector {p!r} not in {{1, 2, inf}}")
    return value


def _dual(p: float) -> float:
    if p == 1.0:
        return float("inf")
    if p == float("inf"):
        return 1.0
    return 2.0


def vector_norm(x, p: float) -> float:
    return float(np.linalg.norm(np.asarray(x, dtype=float).reshape(-1), ord=p))


def ones_norm(n: int, q: float) -> float:
    if q == 1.0:
        return float(n)
    if q == 2.0:
        return float(np.sqrt(n))
    return 1.0 if n else 0.0


def induced_norm(a, p: float) -> float:
    """Operator p -> p norm: exact for p in {1, inf}, spectral for p = 2."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    if p == 1.0:
        return float(np.abs(a).sum(axis=0).max())
    if p == float("inf"):
        return float(np.abs(a).sum(axis=1).max())
    return float(np.linalg.norm(a, 2))


def mixed_norm(a, q: float, p: float) -> float:
    """||A||_{q<-p} for the dual pairings used by the bounds.

    (inf, 1): max absolute entry.  (1, inf): total absolute mass, which is the
    exact value for nonnegative matrices and an upper bound otherwise.
    (2, 2): spectral norm.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    if (q, p) == (float("inf"), 1.0):
        return float(np.abs(a).max())
    if (q, p) == (1.0, float("inf")):
        return float(np.abs(a).sum())
    if (q, p) == (2.0, 2.0):
        return float(np.linalg.norm(a, 2))
    raise DomainError(f"unsupported norm pairing ({q!r} <- {p!r})")


@dataclass(frozen=True)
class PerturbationSpec:
    """Norm selector plus bounds on ||db_P||_p and ||dv_O||_p."""

    p: float
    eta: float = 0.0
    eps: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p", _canonical_p(self.p))
        if self.eta < 0 or self.eps < 0:
            raise DomainError("eta and eps must be >= 0")

    @property
    def q(self) -> float:
        return _dual(self.p)


@dataclass(frozen=True)
class BoundReport:
    """A certified bound and the terms it decomposes into."""

    bound: float
    eta_term: float
    eps_term: float
    extension_term: float = 0.0
    loose_bound: float | None = None


def boundary_bound(spec: PerturbationSpec, o_po, n_p: int) -> BoundReport:
    """Regime-A bound: internal values fixed, only b_P and v_O move.

    For p = 2 the looser sqrt(|P|) (eta + ||O_PO||_2 eps) form is reported
    alongside the tight one.
    """
    o_po = np.asarray(o_po, dtype=float)
    q = spec.q
    eta_term = ones_norm(n_p, q) * spec.eta
    col_weights = o_po.sum(axis=0) if o_po.size else np.zeros(0)
    eps_term = vector_norm(col_weights, q) * spec.eps if col_weights.size else 0.0
    loose = None
    if spec.p == 2.0:
        loose = float(np.sqrt(n_p)) * (spec.eta + induced_norm(o_po, 2.0) * spec.eps)
    return BoundReport(
        bound=eta_term + eps_term,
        eta_term=eta_term,
        eps_term=eps_term,
        loose_bound=loose,
    )


def inverse_norm(o_pp, p: float) -> float:
    """||(I - O_PP)^-1||_{p->p}, exact when small, geometric bound otherwise."""
    o_pp = np.asarray(o_pp, dtype=float)
    n = o_pp.shape[0]
    if n == 0:
        return 0.0
    if n <= DENSE_CONDITION_LIMIT:
        try:
            inv = np.linalg.inv(np.eye(n) - o_pp)
        except np.linalg.LinAlgError as exc:
            raise StabilityError(f"I - O_PP is singular: {exc}") from exc
        return induced_norm(inv, p)
    norm = induced_norm(o_pp, p)
    if norm >= 1.0:
        raise StabilityError(
            f"no inverse-norm bound available: ||O_PP||_{p} = {norm!r} >= 1"
        )
    return 1.0 / (1.0 - norm)


def regime_b_bound(spec: PerturbationSpec, stats: CutStatistics) -> BoundReport:
    """Regime-B bound: adds the response of the estimated internal values.

    delta = O_OP' 1_O is the direct minority exposure; the extension term is
    ||delta||_q ||(I - O_PP)^-1||_{p->p} (eta + ||O_PO||_{q<-p} eps).
    """
    if stats.o_pp is None or stats.o_po is None or stats.o_op is None:
        raise DomainError("regime_b_bound needs share-form blocks")
    base = boundary_bound(spec, stats.o_po, len(stats.p_ids))
    q = spec.q
    delta = stats.o_op.sum(axis=0)
    inv = inverse_norm(stats.o_pp, spec.p)
    extension = vector_norm(delta, q) * inv * (
        spec.eta + mixed_norm(stats.o_po, q, spec.p) * spec.eps
    )
    return BoundReport(
        bound=base.bound + extension,
        eta_term=base.eta_term,
        eps_term=base.eps_term,
        extension_term=extension,
        loose_bound=base.loose_bound,
    )


@dataclass(frozen=True)
class ConditioningReport:
    """Spectral-radius estimate and condition number of I - O_PP."""

    rho_estimate: float
    kappa2: float
    regularization_used: float | None = None
    band: tuple[float, float] | None = None


def condition_diagnostics(o_pp, regularization: float | None = None) -> ConditioningReport:
    """kappa_2(I - O_PP), exact via SVD for small blocks."""
    o_pp = np.asarray(o_pp, dtype=float)
    n = o_pp.shape[0] if o_pp.ndim == 2 else 0
    gate = spectral_radius_bound(o_pp) if n else None
    if n == 0:
        return ConditioningReport(0.0, 1.0, regularization_used=regularization)
    m = np.eye(n) - o_pp
    if regularization:
        m = m + regularization * np.eye(n)
    if n <= DENSE_CONDITION_LIMIT:
        singular = np.linalg.svd(m, compute_uv=False)
        kappa2 = float(singular.max() / singular.min()) if singular.min() > 0 else float("inf")
    else:
        norm = induced_norm(o_pp, 2.0)
        if norm >= 1.0:
            kappa2 = float("inf")
        else:
            kappa2 = induced_norm(m, 2.0) / (1.0 - norm)
    return ConditioningReport(
        rho_estimate=gate.power_iteration_estimate,
        kappa2=kappa2,
        regularization_used=regularization,
    )


@dataclass(frozen=True)
class MonteCarloBand:
    """Min/max envelope over the perturbed recomputations."""

    low: float
    high: float
    evaluated: int
    excluded: int


def monte_carlo_band(
    stats: CutStatistics,
    cfg: SolverConfig | None = None,
    noise: float = 0.0,
    draws: int = 0,
    seed: int = 0,
    entries: list[tuple[int, int]] | None = None,
    metric: str = "consolidated",
) -> MonteCarloBand:
    """Envelope of a Regime-B quantity under uniform noise on O_PP entries.

    The probe set always contains the nominal instance and the two
    deterministic corners (every designated entry shifted by +noise and by
    -noise together); `draws` additional instances perturb each entry
    independently and uniformly.  Probes that lose stability are excluded and
    counted, never silently dropped.  `metric` selects the consolidated value
    or the total of the estimated internal values.
    """
    if stats.o_pp is None:
        raise DomainError("monte_carlo_band needs the internal block O_PP")
    if draws < 0:
        raise DomainError("draws must be >= 0")
    if noise < 0:
        raise DomainError("noise must be >= 0")
    if metric not in ("consolidated", "internal_total"):
        raise DomainError(f"unknown metric {metric!r}")
    cfg = cfg or SolverConfig()
    if entries is None:
        rows, cols = np.nonzero(stats.o_pp)
        entries = list(zip(rows.tolist(), cols.tolist()))

    def measure(o_pp: np.ndarray) -> float:
        perturbed = CutStatistics(
            p_ids=stats.p_ids,
            o_ids=stats.o_ids,
            b_p=stats.b_p,
            v_o=stats.v_o,
            o_po=stats.o_po,
            o_op=stats.o_op,
            o_pp=o_pp,
            clearing_tag=stats.clearing_tag,
        )
        if metric == "internal_total":
            v_p, _ = estimate_internal_values(perturbed, cfg)
            return float(v_p.sum())
        return evaluate_regime_b(perturbed, cfg).w

    def shifted(offsets) -> np.ndarray:
        o_pp = stats.o_pp.copy()
        for (i, j), off in zip(entries, offsets):
            o_pp[i, j] += off
        return o_pp

    probes = [shifted([0.0] * len(entries))]
    if noise > 0.0 and entries:
        probes.append(shifted([noise] * len(entries)))
        probes.append(shifted([-noise] * len(entries)))
    rng = np.random.default_rng(seed)
    for _ in range(draws):
        probes.append(shifted(rng.uniform(-noise, noise, size=len(entries))))

    values = []
    excluded = 0
    for o_pp in probes:
        try:
            values.append(measure(o_pp))
        except StabilityError:
            excluded += 1
    if not values:
        raise StabilityError("every Monte Carlo probe lost stability")
    return MonteCarloBand(
        low=min(values), high=max(values), evaluated=len(values), excluded=excluded
    )


def sample_perturbations(rng, size: int, p: float, radius: float, count: int) -> np.ndarray:
    """Matrix of `count` vectors with p-norm at most `radius` (rows)."""
    raw = rng.uniform(-1.0, 1.0, size=(count, size))
    norms = np.linalg.norm(raw, ord=p, axis=1)
    norms[norms == 0.0] = 1.0
    radii = radius * rng.uniform(0.0, 1.0, size=count) ** (1.0 / max(size, 1))
    # half the draws sit exactly on the constraint surface
    radii[: count // 2] = radius
    return raw * (radii / norms)[:, np.newaxis]


def observed_regime_a_deltas(stats: CutStatistics, db: np.ndarray, dv: np.ndarray) -> np.ndarray:
    """Exact dW for perturbation batches with internal values held fixed."""
    ones_o_po = stats.o_po.sum(axis=0)
    return db.sum(axis=1) + dv @ ones_o_po


def observed_regime_b_deltas(stats: CutStatistics, db: np.ndarray, dv: np.ndarray) -> np.ndarray:
    """Exact dW when the estimated internal values respond to the shock."""
    n = stats.o_pp.shape[0]
    inv = np.linalg.inv(np.eye(n) - stats.o_pp)
    delta = stats.o_op.sum(axis=0)
    direct = observed_regime_a_deltas(stats, db, dv)
    dv_p = (db + dv @ stats.o_po.T) @ inv.T
    return direct - dv_p @ delta
