"""Control matrices from share matrices, and perimeter selection.

Three rule families are supported:

* Option A: threshold/majority indicator, optionally closed over ownership
  chains up to a reachability depth.
* Option B: Herfindahl look-through (and the squared variant B'), which
  dilutes control when ownership of a node is dispersed.
* Option C: attenuated paths, crediting indirect chains with geometric decay
  through S(I - alpha*S)^-1.

Share matrices follow the network convention: S[i, j] is the share of j owned
by i.  Control weights are dimensionless and column j describes who controls
node j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, StabilityError
from .network import NodeId, Perimeter

OPTION_ALIASES = {
    "A": "A",
    "A_threshold": "A",
    "B": "B",
    "B_herfindahl": "B",
    "B_prime": "B_prime",
    "B'": "B_prime",
    "C": "C",
    "C_attenuated": "C",
}

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class ControlRuleSpec:
    """Declared control rule: option plus its disclosed parameters."""

    option: str = "A"
    tau: float = 0.5
    alpha: float = 0.6
    normalize: bool = False
    reachability_depth: int | None = None
    label: str | None = None

    def __post_init__(self):
        try:
            canonical = OPTION_ALIASES[self.option]
        except KeyError:
            raise DomainError(f"unknown control option {self.option!r}") from None
        object.__setattr__(self, "option", canonical)
        if not 0.0 < self.tau <= 1.0:
            raise DomainError(f"tau={self.tau!r} outside (0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha={self.alpha!r} outside (0, 1)")
        if self.reachability_depth is not None and self.reachability_depth < 1:
            raise DomainError("reachability_depth must be >= 1")

    def params(self) -> dict:
        out: dict = {"tau": self.tau, "alpha": self.alpha, "normalize": self.normalize}
        if self.reachability_depth is not None:
            out["reachability_depth"] = self.reachability_depth
        return out


@dataclass(frozen=True)
class ControlMatrix:
    """Control weights with the node ids the axes refer to."""

    ids: tuple[NodeId, ...]
    omega: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        n = len(self.ids)
        if omega.shape != (n, n):
            raise DimensionError(f"omega shape {omega.shape} does not match {n} ids")
        if (omega < 0).any():
            raise DomainError("control weights must be nonnegative")
        if self.normalized:
            sums = omega.sum(axis=0)
            off = np.abs(sums[sums > 0] - 1.0)
            if off.size and off.max() > NORMALIZATION_TOL:
                raise DomainError("normalized columns must sum to 1")
        object.__setattr__(self, "omega", omega)

    def column(self, node: NodeId) -> np.ndarray:
        return self.omega[:, self.ids.index(node)]


def _normalize_columns(omega: np.ndarray) -> np.ndarray:
    sums = omega.sum(axis=0)
    out = omega.copy()
    nz = sums > 0
    out[:, nz] = out[:, nz] / sums[nz]
    return out


def _as_matrix(shares) -> np.ndarray:
    shares = np.asarray(shares, dtype=float)
    if shares.ndim != 2 or shares.shape[0] != shares.shape[1]:
        raise DimensionError("share matrix must be square")
    return shares


def threshold_control(
    shares,
    tau: float,
    ids: tuple[NodeId, ...] | None = None,
    depth: int | None = None,
    normalize: bool = False,
) -> ControlMatrix:
    """Option A: indicator of shares at or above tau, with optional chain closure.

    Ties at the threshold count as control.  With depth > 1, boolean
    reachability over majority edges marks ultimate control along chains.
    """
    shares = _as_matrix(shares)
    if not 0.0 < tau <= 1.0:
        raise DomainError(f"tau={tau!r} outside (0, 1]")
    direct = shares >= tau
    reach = direct.copy()
    power = direct.copy()
    for _ in range(2, (depth or 1) + 1):
        power = (power.astype(int) @ direct.astype(int)) > 0
        reach |= power
    np.fill_diagonal(reach, False)
    omega = reach.astype(float)
    if normalize:
        omega = _normalize_columns(omega)
    ids = ids or tuple(f"n{k}" for k in range(shares.shape[0]))
    return ControlMatrix(tuple(ids), omega, normalized=normalize)


def herfindahl_control(
    shares,
    variant: str = "B",
    ids: tuple[NodeId, ...] | None = None,
) -> ControlMatrix:
    """Option B / B': Herfindahl look-through weights.

    Each column is completed with a synthetic dispersed holder carrying the
    sub-unit residual before computing H_j; the pseudo-holder never appears in
    the output.
    """
    shares = _as_matrix(shares)
    variant = OPTION_ALIASES.get(variant, variant)
    if variant not in ("B", "B_prime"):
        raise DomainError(f"unknown Herfindahl variant {variant!r}")
    n = shares.shape[0]
    omega = np.zeros_like(shares)
    for j in range(n):
        col = shares[:, j]
        residual = max(0.0, 1.0 - col.sum())
        h_j = float(col @ col + residual * residual)
        if h_j == 0.0:
            continue
        if variant == "B":
            omega[:, j] = col * h_j
        else:
            omega[:, j] = col * col / h_j
    if variant == "B_prime":
        omega = _normalize_columns(omega)
    ids = ids or tuple(f"n{k}" for k in range(n))
    return ControlMatrix(tuple(ids), omega, normalized=(variant == "B_prime"))


def herfindahl_index(column) -> float:
    """H_j for one ownership column, residual completed as a pseudo-holder."""
    col = np.asarray(column, dtype=float)
    residual = max(0.0, 1.0 - col.sum())
    return float(col @ col + residual * residual)


def attenuated_control(
    shares,
    alpha: float,
    ids: tuple[NodeId, ...] | None = None,
    normalize: bool = False,
) -> ControlMatrix:
    """Option C: attenuated-path weights S(I - alpha*S)^-1."""
    shares = _as_matrix(shares)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha={alpha!r} outside (0, 1)")
    from .engine import spectral_radius_bound  # local import avoids a cycle

    gate = spectral_radius_bound(alpha * shares)
    if min(gate.rho_upper, gate.power_iteration_estimate) >= 1.0:
        raise StabilityError(
            f"rho(alpha*S) >= 1 by every available bound (power estimate "
            f"{gate.power_iteration_estimate!r})"
        )
    n = shares.shape[0]
    omega = shares @ np.linalg.inv(np.eye(n) - alpha * shares)
    if normalize:
        omega = _normalize_columns(omega)
    ids = ids or tuple(f"n{k}" for k in range(n))
    return ControlMatrix(tuple(ids), np.maximum(omega, 0.0), normalized=normalize)


def truncated_attenuated_series(shares, alpha: float, terms: int) -> np.ndarray:
    """Partial sum sum_{k<=terms} alpha^(k-1) S^k, the oracle for Option C."""
    shares = _as_matrix(shares)
    total = np.zeros_like(shares)
    power = np.eye(shares.shape[0])
    for k in range(1, terms + 1):
        power = power @ shares
        total += alpha ** (k - 1) * power
    return total


def build_control(shares, spec: ControlRuleSpec, ids=None) -> ControlMatrix:
    """Dispatch on the declared rule."""
    if spec.option == "A":
        return threshold_control(
            shares, spec.tau, ids=ids, depth=spec.reachability_depth,
            normalize=spec.normalize,
        )
    if spec.option in ("B", "B_prime"):
        return herfindahl_control(shares, spec.option, ids=ids)
    return attenuated_control(shares, spec.alpha, ids=ids, normalize=spec.normalize)


def select_perimeter(control: ControlMatrix, seed, tau_p: float) -> Perimeter:
    """Grow a perimeter to the fixed point of the in-perimeter control test.

    A node joins once the control weight held by current members reaches
    tau_p; candidates are processed in canonical id order until stable, so the
    result does not depend on evaluation order.
    """
    if not 0.0 < tau_p <= 1.0:
        raise DomainError(f"tau_p={tau_p!r} outside (0, 1]")
    members = {str(s) for s in seed}
    unknown = members - set(control.ids)
    if unknown:
        raise DomainError(f"seed ids not in control matrix: {sorted(unknown)}")
    index = {n: k for k, n in enumerate(control.ids)}
    changed = True
    while changed:
        changed = False
        inside = [index[n] for n in members]
        for node in control.ids:
            if node in members:
                continue
            weight = control.omega[inside, index[node]].sum() if inside else 0.0
            if weight >= tau_p:
                members.add(node)
                changed = True
    return Perimeter(members)
