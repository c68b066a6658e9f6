"""Cut-report data packages: serialization, hashing and validation.

A package directory holds `manifest.yaml` plus CSV data files (node lists,
base and value vectors, share blocks), optionally `O_PP.csv`,
`clearing.json` and `proof_stability.txt`.  The manifest names every data
file and pins its SHA-256, so a package is tamper-evident byte by byte.

Two JSON documents accompany a valuation: the perimeter-of-validity (the full
observer configuration) and the cut summary (edge lists, totals and the
consolidated value).  Serialization is deterministic: fixed key order, UTF-8,
shortest round-trip decimal rendering for numbers.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .control import ControlRuleSpec
from .engine import (
    CutStatistics,
    ValuationResult,
    hedge_vector,
    spectral_radius_bound,
)
from .errors import EmissionError, IntegrityError, PackageError
from .network import COLUMN_SUM_SLACK
from .observer import FxPppSpec, Observer, SdfSpec, Tolerances
from .validation import ValidationReport

MANIFEST_VERSION = "cbv-cut-report@1.0"
MANIFEST_NAME = "manifest.yaml"
STABILITY_NAME = "proof_stability.txt"
EDGE_TYPES = ("equity", "debt", "derivative", "cashflow")

_KNOWN_MANIFEST_KEYS = (
    "version", "observer", "perimeter", "regime", "clearing",
    "data_files", "hashes", "notes",
)
_ALWAYS_REQUIRED_FILES = ("nodes_P", "nodes_O", "b_P", "v_O", "O_PO", "O_OP")


def sha256_of_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return f"sha256:{digest.hexdigest()}"


def _json_bytes(payload: dict) -> bytes:
    return (json.dumps(payload, indent=2) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# CSV helpers (leading id column, deterministic float rendering)
# ---------------------------------------------------------------------------

def _render(value: float) -> str:
    return repr(float(value))


def write_vector_csv(path: Path, ids, values, column: str):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["id", column])
        for node, value in zip(ids, values):
            writer.writerow([node, _render(value)])


def read_vector_csv(path: Path) -> dict[str, float]:
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows or len(rows[0]) != 2:
        raise PackageError(f"{path.name}: expected a two-column id/value file")
    out: dict[str, float] = {}
    for row in rows[1:]:
        if len(row) != 2:
            raise PackageError(f"{path.name}: malformed row {row!r}")
        out[row[0]] = float(row[1])
    return out


def write_matrix_csv(path: Path, row_ids, col_ids, matrix, id_header: str):
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([id_header, *col_ids])
        for k, node in enumerate(row_ids):
            writer.writerow([node, *(_render(v) for v in matrix[k])])


def read_matrix_csv(path: Path) -> tuple[list[str], list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise PackageError(f"{path.name}: empty matrix file")
    col_ids = rows[0][1:]
    row_ids = [row[0] for row in rows[1:]]
    data = np.zeros((len(row_ids), len(col_ids)))
    for i, row in enumerate(rows[1:]):
        if len(row) != len(col_ids) + 1:
            raise PackageError(f"{path.name}: row {row[0]!r} has wrong width")
        data[i] = [float(v) for v in row[1:]]
    return row_ids, col_ids, data


def write_nodes_csv(path: Path, ids, types=None, labels=None):
    types, labels = types or {}, labels or {}
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["id", "type", "label"])
        for node in ids:
            writer.writerow([node, types.get(node, "entity"), labels.get(node, "")])


def read_nodes_csv(path: Path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    return [row[0] for row in rows[1:] if row]


def _reorder_matrix(row_ids, col_ids, data, want_rows, want_cols, name):
    if set(row_ids) != set(want_rows) or set(col_ids) != set(want_cols):
        raise PackageError(f"{name}: id headers do not match the node lists")
    ri = [row_ids.index(r) for r in want_rows]
    ci = [col_ids.index(c) for c in want_cols]
    return data[np.ix_(ri, ci)]


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass
class Manifest:
    """Typed view over the manifest mapping; unknown keys are preserved."""

    data: dict

    @property
    def version(self) -> str | None:
        return self.data.get("version")

    @property
    def regime(self) -> str:
        return str(self.data.get("regime", "A"))

    @property
    def observer_block(self) -> dict:
        return dict(self.data.get("observer") or {})

    @property
    def perimeter_block(self) -> dict:
        return dict(self.data.get("perimeter") or {})

    @property
    def clearing_block(self) -> dict:
        return dict(self.data.get("clearing") or {})

    @property
    def data_files(self) -> dict:
        return {k: v for k, v in (self.data.get("data_files") or {}).items() if v}

    @property
    def hashes(self) -> dict:
        return dict(self.data.get("hashes") or {})

    @property
    def notes(self) -> list:
        return list(self.data.get("notes") or [])

    @property
    def extra_keys(self) -> list[str]:
        return [k for k in self.data if k not in _KNOWN_MANIFEST_KEYS]

    def to_yaml_bytes(self) -> bytes:
        return yaml.safe_dump(self.data, sort_keys=False).encode("utf-8")

    @classmethod
    def from_yaml_bytes(cls, blob: bytes) -> "Manifest":
        data = yaml.safe_load(blob)
        if not isinstance(data, dict):
            raise PackageError("manifest must be a mapping")
        return cls(data)


# ---------------------------------------------------------------------------
# Package write / load
# ---------------------------------------------------------------------------

@dataclass
class CutReportPackage:
    directory: Path
    manifest: Manifest
    p_ids: tuple[str, ...]
    o_ids: tuple[str, ...]
    b_p: np.ndarray
    v_o: np.ndarray
    o_po: np.ndarray
    o_op: np.ndarray
    o_pp: np.ndarray | None
    observer: Observer
    v_p: np.ndarray | None = None
    clearing_spec: dict | None = None
    pov: dict | None = None
    stability_evidence: str | None = None

    def cut_statistics(self) -> CutStatistics:
        """Boundary statistics for valuation.

        When the manifest declares clearing, the matrix files carry net
        post-clearing flows and are treated as priced amounts.
        """
        clearing = self.manifest.clearing_block
        if clearing.get("used"):
            return CutStatistics(
                p_ids=self.p_ids,
                o_ids=self.o_ids,
                b_p=self.b_p,
                v_o=self.v_o,
                x_po=self.o_po,
                x_op=self.o_op,
                clearing_tag=str(clearing.get("engine") or "clearing"),
            )
        return CutStatistics(
            p_ids=self.p_ids,
            o_ids=self.o_ids,
            b_p=self.b_p,
            v_o=self.v_o,
            v_p=self.v_p,
            o_po=self.o_po,
            o_op=self.o_op,
            o_pp=self.o_pp,
        )


def _observer_to_manifest_block(observer: Observer) -> dict:
    fx = observer.fx_ppp
    sdf = observer.sdf
    block = {
        "currency": observer.units,
        "fx": {
            "provider": fx.fx_source if fx else None,
            "date": observer.date,
            "scale": fx.scale if fx else 1.0,
            "method": "close",
        },
        "ppp": {
            "used": bool(fx and fx.ppp_source),
            "source": fx.ppp_source if fx else None,
            "deflator": fx.deflator if fx else None,
        },
        "sdf": {
            "used": sdf is not None,
            "measure": sdf.measure if sdf else None,
            "spec": sdf.curve_source if sdf else None,
        },
    }
    return block


def write_package(
    directory,
    stats: CutStatistics,
    observer: Observer,
    clearing_spec: dict | None = None,
    notes=(),
    node_types: dict | None = None,
    o_ref: str | None = None,
) -> Manifest:
    """Write a complete package for share-form statistics, hashing every file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if stats.o_po is None or stats.o_op is None or stats.v_o is None:
        raise PackageError("write_package needs share-form statistics")

    files: dict[str, str] = {
        "nodes_P": "nodes_P.csv",
        "nodes_O": "nodes_O.csv",
        "b_P": "b_P.csv",
        "v_O": "v_O.csv",
        "O_PO": "O_PO.csv",
        "O_OP": "O_OP.csv",
    }
    write_nodes_csv(directory / files["nodes_P"], stats.p_ids, node_types)
    write_nodes_csv(directory / files["nodes_O"], stats.o_ids, node_types)
    write_vector_csv(directory / files["b_P"], stats.p_ids, stats.b_p, "b")
    write_vector_csv(directory / files["v_O"], stats.o_ids, stats.v_o, "v")
    if stats.v_p is not None:
        files["v_P"] = "v_P.csv"
        write_vector_csv(directory / files["v_P"], stats.p_ids, stats.v_p, "v")
    write_matrix_csv(directory / files["O_PO"], stats.p_ids, stats.o_ids, stats.o_po, "id_P")
    write_matrix_csv(directory / files["O_OP"], stats.o_ids, stats.p_ids, stats.o_op, "id_O")
    if stats.o_pp is not None:
        files["O_PP"] = "O_PP.csv"
        write_matrix_csv(directory / files["O_PP"], stats.p_ids, stats.p_ids, stats.o_pp, "id_P")
        bound = spectral_radius_bound(stats.o_pp)
        evidence = (
            "stability evidence for I - O_PP\n"
            f"norm_1 bound: {bound.norm_1!r}\n"
            f"norm_inf bound: {bound.norm_inf!r}\n"
            f"rho upper bound: {bound.rho_upper!r}\n"
            f"power iteration estimate: {bound.power_iteration_estimate!r}\n"
        )
        (directory / STABILITY_NAME).write_text(evidence, encoding="utf-8")
    if clearing_spec is not None:
        files["clearing_spec"] = "clearing.json"
        (directory / "clearing.json").write_bytes(_json_bytes(clearing_spec))

    rule = observer.control_rule
    clearing_block = {
        "used": bool(stats.clearing_tag or (clearing_spec or {}).get("used")),
        "engine": stats.clearing_tag or (clearing_spec or {}).get("engine"),
        "params": (clearing_spec or {}).get("params", {}),
    }
    manifest_data = {
        "version": MANIFEST_VERSION,
        "observer": _observer_to_manifest_block(observer),
        "perimeter": {
            "P_ref": observer.perimeter_ref,
            "O_ref": o_ref or f"complement-of-{observer.perimeter_ref}",
            "control_rule": (rule.label if rule and rule.label else
                             (f"option-{rule.option}@{rule.tau}" if rule else None)),
            "lookthrough": bool(rule.reachability_depth) if rule else False,
        },
        "regime": observer.regime,
        "clearing": clearing_block,
        "data_files": dict(files),
        "hashes": {key: sha256_of_file(directory / name) for key, name in files.items()},
        "notes": list(notes),
    }
    manifest = Manifest(manifest_data)
    (directory / MANIFEST_NAME).write_bytes(manifest.to_yaml_bytes())
    return manifest


def _build_observer(manifest: Manifest, pov: dict | None) -> Observer:
    obs_block = manifest.observer_block
    per_block = manifest.perimeter_block
    fx_block = obs_block.get("fx") or {}
    ppp_block = obs_block.get("ppp") or {}
    sdf_block = obs_block.get("sdf") or {}

    units = str(obs_block.get("currency") or "EUR")
    date = str(fx_block.get("date") or "1970-01-01")
    regime = manifest.regime
    basis = "fair_value"
    tolerances = Tolerances()
    control_rule: ControlRuleSpec | str | None = per_block.get("control_rule")
    perimeter_ref = str(per_block.get("P_ref") or "P")

    if pov:
        pov_obs = pov.get("observer") or {}
        basis = str(pov_obs.get("basis") or basis)
        units = str(pov_obs.get("units") or units)
        date = str(pov_obs.get("date") or date)
        regime = str(pov_obs.get("information_regime") or regime)
        rule_block = pov_obs.get("control_rule") or {}
        if rule_block:
            params = rule_block.get("params") or {}
            control_rule = ControlRuleSpec(
                option=str(rule_block.get("option", "A")),
                tau=float(params.get("tau", 0.5)),
                alpha=float(params.get("alpha", 0.6)),
                normalize=bool(params.get("normalize", False)),
                reachability_depth=params.get("reachability_depth"),
            )
        tol_block = pov.get("tolerances") or {}
        tolerances = Tolerances(
            rounding_threshold=float(tol_block.get("rounding_threshold", 1e-8)),
            solver_eps=float(tol_block.get("solver_eps", 1e-10)),
            max_iters=int(tol_block.get("max_iters", 10000)),
        )

    fx_ppp = None
    if fx_block or ppp_block.get("used"):
        fx_ppp = FxPppSpec(
            scale=float(fx_block.get("scale", 1.0) or 1.0),
            fx_source=fx_block.get("provider"),
            ppp_source=ppp_block.get("source") if ppp_block.get("used") else None,
            deflator=ppp_block.get("deflator"),
        )
    sdf = None
    if sdf_block.get("used"):
        sdf = SdfSpec(
            measure=str(sdf_block.get("measure") or "risk_neutral"),
            curve_source=sdf_block.get("spec"),
        )
    return Observer(
        perimeter_ref=perimeter_ref,
        basis=basis,
        units=units,
        date=date,
        regime=regime,
        control_rule=control_rule,
        tolerances=tolerances,
        fx_ppp=fx_ppp,
        sdf=sdf,
    )


def load_package(directory) -> CutReportPackage:
    """Load and hash-verify a package directory.

    Every listed data file must exist, carry a manifest hash, and match it
    byte for byte; `O_PP.csv` is required when the declared regime is B.
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.exists():
        raise PackageError(f"{MANIFEST_NAME} not found in {directory}")
    manifest = Manifest.from_yaml_bytes(manifest_path.read_bytes())

    files = manifest.data_files
    missing = [key for key in _ALWAYS_REQUIRED_FILES if key not in files]
    if manifest.regime == "B" and "O_PP" not in files:
        missing.append("O_PP")
    if missing:
        raise PackageError(
            f"package lacks required data files for regime {manifest.regime}: {missing}"
        )
    hashes = manifest.hashes
    for key, name in files.items():
        path = directory / str(name)
        if not path.exists():
            raise PackageError(f"listed data file missing on disk: {name}")
        recorded = hashes.get(key)
        if not recorded:
            raise PackageError(f"no hash entry for data file {key} ({name})")
        actual = sha256_of_file(path)
        if actual != str(recorded):
            raise IntegrityError(
                f"hash mismatch for {name}: manifest {recorded}, actual {actual}",
                filename=str(name),
            )

    p_ids = sorted(read_nodes_csv(directory / files["nodes_P"]))
    o_ids = sorted(read_nodes_csv(directory / files["nodes_O"]))
    b_map = read_vector_csv(directory / files["b_P"])
    v_map = read_vector_csv(directory / files["v_O"])
    if set(b_map) != set(p_ids):
        raise PackageError("b_P.csv ids do not match nodes_P.csv")
    if set(v_map) != set(o_ids):
        raise PackageError("v_O.csv ids do not match nodes_O.csv")
    rows, cols, data = read_matrix_csv(directory / files["O_PO"])
    o_po = _reorder_matrix(rows, cols, data, p_ids, o_ids, "O_PO.csv")
    rows, cols, data = read_matrix_csv(directory / files["O_OP"])
    o_op = _reorder_matrix(rows, cols, data, o_ids, p_ids, "O_OP.csv")
    o_pp = None
    if "O_PP" in files:
        rows, cols, data = read_matrix_csv(directory / files["O_PP"])
        o_pp = _reorder_matrix(rows, cols, data, p_ids, p_ids, "O_PP.csv")
    v_p = None
    if "v_P" in files:
        v_p_map = read_vector_csv(directory / str(files["v_P"]))
        if set(v_p_map) != set(p_ids):
            raise PackageError("v_P.csv ids do not match nodes_P.csv")
        v_p = np.array([v_p_map[n] for n in p_ids])

    clearing_spec = None
    if "clearing_spec" in files:
        clearing_spec = json.loads((directory / str(files["clearing_spec"])).read_text("utf-8"))
    pov = None
    pov_path = directory / "pov.json"
    if pov_path.exists():
        pov = json.loads(pov_path.read_text("utf-8"))
    stability = None
    stab_path = directory / STABILITY_NAME
    if stab_path.exists():
        stability = stab_path.read_text("utf-8")

    observer = _build_observer(manifest, pov)
    return CutReportPackage(
        directory=directory,
        manifest=manifest,
        p_ids=tuple(p_ids),
        o_ids=tuple(o_ids),
        b_p=np.array([b_map[n] for n in p_ids]),
        v_o=np.array([v_map[n] for n in o_ids]),
        o_po=o_po,
        o_op=o_op,
        o_pp=o_pp,
        observer=observer,
        v_p=v_p,
        clearing_spec=clearing_spec,
        pov=pov,
        stability_evidence=stability,
    )


# ---------------------------------------------------------------------------
# Package validation (rules D.1 - D.5 plus schema/hash findings)
# ---------------------------------------------------------------------------

def validate_package(pkg: CutReportPackage) -> ValidationReport:
    """Run the automatic validation rules over a loaded package."""
    report = ValidationReport()
    n_p, n_o = len(pkg.p_ids), len(pkg.o_ids)

    if pkg.manifest.version != MANIFEST_VERSION:
        report.add(
            "schema", "error",
            f"manifest version {pkg.manifest.version!r}, expected {MANIFEST_VERSION!r}",
            location=MANIFEST_NAME,
        )
    for key in pkg.manifest.extra_keys:
        report.add("schema", "note", f"unknown manifest field {key!r} preserved",
                   location=MANIFEST_NAME)

    # D1: dimensional consistency of every loaded object
    shapes = (
        ("b_P", pkg.b_p.shape, (n_p,)),
        ("v_O", pkg.v_o.shape, (n_o,)),
        ("O_PO", pkg.o_po.shape, (n_p, n_o)),
        ("O_OP", pkg.o_op.shape, (n_o, n_p)),
    )
    for name, got, want in shapes:
        if got != want:
            report.add("D1", "error", f"{name} has shape {got}, expected {want}")
    if pkg.o_pp is not None and pkg.o_pp.shape != (n_p, n_p):
        report.add("D1", "error", f"O_PP has shape {pkg.o_pp.shape}, expected {(n_p, n_p)}")
    if pkg.v_p is not None and pkg.v_p.shape != (n_p,):
        report.add("D1", "error", f"v_P has shape {pkg.v_p.shape}, expected {(n_p,)}")

    # D2: nonnegativity of the share blocks; negative bases need a note
    for name, block in (("O_PO", pkg.o_po), ("O_OP", pkg.o_op)):
        if (block < 0).any():
            report.add("D2", "error", f"{name} has negative entries")
    if pkg.o_pp is not None and (pkg.o_pp < 0).any():
        report.add("D2", "error", "O_PP has negative entries")
    if (pkg.b_p < 0).any() and not pkg.manifest.notes:
        report.add("D2", "warning", "negative bases present without a justifying note")
    col_sums = pkg.o_pp.sum(axis=0) + pkg.o_op.sum(axis=0) if pkg.o_pp is not None \
        else pkg.o_op.sum(axis=0)
    for j in np.nonzero(col_sums > 1.0 + COLUMN_SUM_SLACK)[0]:
        report.add("D2", "error",
                   f"ownership of {pkg.p_ids[j]!r} sums to {col_sums[j]!r} > 1")

    # D3: a single observer per period; PoV must agree with the manifest
    if pkg.pov:
        pov_obs = pkg.pov.get("observer") or {}
        pairs = (
            ("units", pov_obs.get("units"), pkg.manifest.observer_block.get("currency")),
            ("regime", pov_obs.get("information_regime"), pkg.manifest.regime),
        )
        for name, pov_value, man_value in pairs:
            if pov_value is not None and man_value is not None and pov_value != man_value:
                report.add("D3", "error",
                           f"pov {name} {pov_value!r} disagrees with manifest {man_value!r}")

    # D4: regime B needs stability evidence alongside the internal block
    if pkg.o_pp is not None:
        if not pkg.stability_evidence:
            report.add("D4", "error",
                       "O_PP provided without stability evidence "
                       f"({STABILITY_NAME} missing)")
    elif pkg.manifest.regime == "B":
        report.add("D4", "error", "regime B without O_PP or an explanation")

    # D5: clearing declaration must match the files and flows
    clearing = pkg.manifest.clearing_block
    if clearing.get("used") and not clearing.get("engine"):
        report.add("D5", "error", "clearing used but no engine declared")
    if not clearing.get("used") and pkg.clearing_spec is not None:
        report.add("D5", "warning",
                   "clearing.json present but manifest declares pre-clearing flows")
    if clearing.get("used") and pkg.clearing_spec is None and "clearing_spec" not in pkg.manifest.data_files:
        report.add("D5", "warning", "clearing used but no engine specification file")
    return report


def validate_directory(directory) -> ValidationReport:
    """Load-and-validate; load failures become hash/schema findings."""
    try:
        pkg = load_package(directory)
    except IntegrityError as exc:
        report = ValidationReport()
        report.add("hash", "error", str(exc), location=exc.filename)
        return report
    except PackageError as exc:
        report = ValidationReport()
        report.add("schema", "error", str(exc))
        return report
    return validate_package(pkg)


# ---------------------------------------------------------------------------
# Cut summary document
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Edge:
    from_id: str
    to_id: str
    type: str
    amount: float

    def __post_init__(self):
        if self.type not in EDGE_TYPES:
            raise EmissionError(f"edge type {self.type!r} not in {EDGE_TYPES}")


@dataclass
class CutSummaryDoc:
    """Boundary edges, totals and the consolidated value, ready to serialize."""

    perimeter: str
    date: str
    currency: str
    edges_po: list[Edge]
    edges_op: list[Edge]
    v_p: dict[str, float]
    v_o: dict[str, float]
    t_out: float
    t_in: float
    consolidated_value: float
    hedge_vector_o: dict[str, float] | None = None
    missing_data: list[dict] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json_bytes(self) -> bytes:
        payload = {
            "perimeter": self.perimeter,
            "date": self.date,
            "currency": self.currency,
            "edges_PO": [
                {"from": e.from_id, "to": e.to_id, "type": e.type, "amount": e.amount}
                for e in self.edges_po
            ],
            "edges_OP": [
                {"from": e.from_id, "to": e.to_id, "type": e.type, "amount": e.amount}
                for e in self.edges_op
            ],
            "node_primitives": {"v_P": self.v_p, "v_O": self.v_o},
            "totals": {"T_out": self.t_out, "T_in": self.t_in},
            "consolidated_value": self.consolidated_value,
        }
        if self.hedge_vector_o is not None:
            payload["hedge_vector_O"] = self.hedge_vector_o
        payload["missing_data"] = self.missing_data
        payload.update(self.extra)
        return _json_bytes(payload)

    @classmethod
    def from_json_bytes(cls, blob: bytes) -> "CutSummaryDoc":
        data = json.loads(blob.decode("utf-8"))
        known = {
            "perimeter", "date", "currency", "edges_PO", "edges_OP",
            "node_primitives", "totals", "consolidated_value",
            "hedge_vector_O", "missing_data",
        }
        primitives = data.get("node_primitives") or {}
        return cls(
            perimeter=data["perimeter"],
            date=data["date"],
            currency=data["currency"],
            edges_po=[Edge(e["from"], e["to"], e["type"], float(e["amount"]))
                      for e in data.get("edges_PO", [])],
            edges_op=[Edge(e["from"], e["to"], e["type"], float(e["amount"]))
                      for e in data.get("edges_OP", [])],
            v_p={k: float(v) for k, v in (primitives.get("v_P") or {}).items()},
            v_o={k: float(v) for k, v in (primitives.get("v_O") or {}).items()},
            t_out=float(data["totals"]["T_out"]),
            t_in=float(data["totals"]["T_in"]),
            consolidated_value=float(data["consolidated_value"]),
            hedge_vector_o=({k: float(v) for k, v in data["hedge_vector_O"].items()}
                            if "hedge_vector_O" in data else None),
            missing_data=list(data.get("missing_data", [])),
            extra={k: v for k, v in data.items() if k not in known},
        )

    def recomputed_totals(self) -> tuple[float, float]:
        return (
            sum(e.amount for e in self.edges_po),
            sum(e.amount for e in self.edges_op),
        )


def _share_edges(share_block, values, from_ids, to_ids, tau, edge_type):
    edges = []
    if share_block is None:
        return edges
    for i, from_id in enumerate(from_ids):
        for j, to_id in enumerate(to_ids):
            if share_block[i, j] == 0.0:
                continue
            amount = float(share_block[i, j] * values[j])
            if tau > 0.0 and abs(amount) < tau:
                continue
            edges.append(Edge(from_id, to_id, edge_type, amount))
    return edges


def _amount_edges(amounts, from_ids, to_ids, tau, edge_type):
    edges = []
    if amounts is None:
        return edges
    for i, from_id in enumerate(from_ids):
        for j, to_id in enumerate(to_ids):
            amount = float(amounts[i, j])
            if amount == 0.0 or (tau > 0.0 and abs(amount) < tau):
                continue
            edges.append(Edge(from_id, to_id, edge_type, amount))
    return edges


def build_cut_summary(
    result: ValuationResult,
    stats: CutStatistics,
    observer: Observer,
    missing_data=(),
) -> CutSummaryDoc:
    """Assemble the cut summary for a completed valuation."""
    tau = observer.tolerances.rounding_threshold
    flow_type = "debt" if stats.clearing_tag else "cashflow"
    if stats.x_po is not None:
        edges_po = _amount_edges(stats.x_po, stats.p_ids, stats.o_ids, tau, flow_type)
    else:
        edges_po = _share_edges(stats.o_po, stats.v_o, stats.p_ids, stats.o_ids, tau, "equity")
    v_p_used = result.v_p_used
    if stats.x_op is not None:
        edges_op = _amount_edges(stats.x_op, stats.o_ids, stats.p_ids, tau, flow_type)
    else:
        edges_op = _share_edges(stats.o_op, v_p_used, stats.o_ids, stats.p_ids, tau, "equity")
    v_p = ({n: float(v_p_used[k]) for k, n in enumerate(stats.p_ids)}
           if v_p_used is not None else {})
    v_o = ({n: float(stats.v_o[k]) for k, n in enumerate(stats.o_ids)}
           if stats.v_o is not None else {})
    return CutSummaryDoc(
        perimeter=observer.perimeter_ref,
        date=observer.date,
        currency=observer.units,
        edges_po=edges_po,
        edges_op=edges_op,
        v_p=v_p,
        v_o=v_o,
        t_out=result.t_out,
        t_in=result.t_in,
        consolidated_value=result.w,
        hedge_vector_o=hedge_vector(stats) if stats.o_po is not None else None,
        missing_data=list(missing_data),
    )


def emit_cut_summary(
    result: ValuationResult,
    stats: CutStatistics,
    observer: Observer,
    missing_data=(),
) -> bytes:
    return build_cut_summary(result, stats, observer, missing_data).to_json_bytes()


# ---------------------------------------------------------------------------
# Perimeter of validity
# ---------------------------------------------------------------------------

def build_pov(
    observer: Observer,
    notes: str | None = None,
    data_sources=None,
    assumptions=None,
    versioning=None,
) -> dict:
    """Observer configuration as the PoV mapping, checking required fields."""
    missing = [name for name, value in (
        ("perimeter_ref", observer.perimeter_ref),
        ("basis", observer.basis),
        ("units", observer.units),
        ("date", observer.date),
        ("information_regime", observer.regime),
        ("control_rule", observer.control_rule),
    ) if not value]
    if missing:
        raise EmissionError(
            f"perimeter-of-validity lacks required fields: {missing}", fields=missing
        )
    rule = observer.control_rule
    obs_block: dict = {
        "P": list(observer.perimeter_nodes or [observer.perimeter_ref]),
        "P_ref": observer.perimeter_ref,
        "basis": observer.basis,
        "units": observer.units,
        "date": observer.date,
    }
    if observer.fx_ppp is not None:
        obs_block["fx_ppp"] = {
            "scale": observer.fx_ppp.scale,
            "fx_source": observer.fx_ppp.fx_source,
            "ppp_source": observer.fx_ppp.ppp_source,
            "deflator": observer.fx_ppp.deflator,
        }
    if observer.sdf is not None:
        obs_block["sdf"] = {
            "curve_source": observer.sdf.curve_source,
            "measure": observer.sdf.measure,
            "horizon": observer.sdf.horizon,
        }
        if observer.sdf.discount_weights is not None:
            obs_block["sdf"]["discount_weights"] = dict(observer.sdf.discount_weights)
        if observer.sdf.change_of_measure is not None:
            obs_block["sdf"]["change_of_measure"] = dict(observer.sdf.change_of_measure)
    obs_block["information_regime"] = observer.regime
    obs_block["control_rule"] = {"option": rule.option, "params": rule.params()}
    if rule.label:
        obs_block["control_rule"]["label"] = rule.label
    payload: dict = {
        "observer": obs_block,
        "tolerances": {
            "rounding_threshold": observer.tolerances.rounding_threshold,
            "solver_eps": observer.tolerances.solver_eps,
            "max_iters": observer.tolerances.max_iters,
        },
    }
    if data_sources is not None:
        payload["data_sources"] = data_sources
    if assumptions is not None:
        payload["assumptions"] = assumptions
    if versioning is not None:
        payload["versioning"] = versioning
    payload["notes"] = notes or ""
    return payload


def emit_pov(observer: Observer, **kwargs) -> bytes:
    return _json_bytes(build_pov(observer, **kwargs))


def parse_pov(blob: bytes) -> tuple[Observer, dict]:
    """Rebuild an Observer from a PoV document; returns (observer, raw dict)."""
    data = json.loads(blob.decode("utf-8"))
    obs = data.get("observer") or {}
    rule_block = obs.get("control_rule") or {}
    params = rule_block.get("params") or {}
    rule = ControlRuleSpec(
        option=str(rule_block.get("option", "A")),
        tau=float(params.get("tau", 0.5)),
        alpha=float(params.get("alpha", 0.6)),
        normalize=bool(params.get("normalize", False)),
        reachability_depth=params.get("reachability_depth"),
        label=rule_block.get("label"),
    )
    tol = data.get("tolerances") or {}
    fx_block = obs.get("fx_ppp")
    sdf_block = obs.get("sdf")
    nodes = [str(n) for n in (obs.get("P") or [])]
    ref = str(obs.get("P_ref") or (nodes[0] if len(nodes) == 1 else "P"))
    if nodes == [ref]:
        nodes = []
    observer = Observer(
        perimeter_ref=ref,
        basis=str(obs.get("basis", "fair_value")),
        units=str(obs.get("units", "EUR")),
        date=str(obs.get("date", "1970-01-01")),
        regime=str(obs.get("information_regime", "A")),
        control_rule=rule,
        tolerances=Tolerances(
            rounding_threshold=float(tol.get("rounding_threshold", 1e-8)),
            solver_eps=float(tol.get("solver_eps", 1e-10)),
            max_iters=int(tol.get("max_iters", 10000)),
        ),
        fx_ppp=(FxPppSpec(
            scale=float(fx_block.get("scale", 1.0)),
            fx_source=fx_block.get("fx_source"),
            ppp_source=fx_block.get("ppp_source"),
            deflator=fx_block.get("deflator"),
        ) if fx_block else None),
        sdf=(SdfSpec(
            measure=str(sdf_block.get("measure", "risk_neutral")),
            discount_weights=sdf_block.get("discount_weights"),
            change_of_measure=sdf_block.get("change_of_measure"),
            curve_source=sdf_block.get("curve_source"),
            horizon=sdf_block.get("horizon"),
        ) if sdf_block else None),
        perimeter_nodes=tuple(nodes) or None,
    )
    return observer, data


# ---------------------------------------------------------------------------
# Disclosure sheet
# ---------------------------------------------------------------------------

def _format_amount(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return f"{int(value):,}"
    return f"{value:,.4f}"


def render_disclosure_sheet(
    pkg: CutReportPackage,
    result: ValuationResult | None = None,
    fisher=None,
) -> str:
    """Fixed-order disclosure rows for a package and its computed outputs."""
    manifest = pkg.manifest
    observer = pkg.observer
    rule = observer.control_rule
    clearing = manifest.clearing_block

    def row(label: str, value: str) -> str:
        return f"{label:<22}| {value}"

    border = (
        f"b_P total {_format_amount(float(pkg.b_p.sum()))}; "
        f"v_O total {_format_amount(float(pkg.v_o.sum()))}; "
        f"edges P->O: {int(np.count_nonzero(pkg.o_po))}; "
        f"edges O->P: {int(np.count_nonzero(pkg.o_op))}"
    )
    if clearing.get("used"):
        clearing_text = (
            f"Applied: {clearing.get('engine')} (post-clearing flows)"
        )
    else:
        clearing_text = "Not applied (pre-clearing flows)"
    if result is not None:
        output = (
            f"W(P) = {_format_amount(result.w)} {observer.units}; "
            f"T_out {_format_amount(result.t_out)}; T_in {_format_amount(result.t_in)}"
        )
    else:
        output = "not computed"
    if fisher is not None and getattr(fisher, "g_f", None) is not None:
        indices = (
            f"IV_F {fisher.iv_f:.6f}; IP_F {fisher.ip_f:.6f}; G_F {fisher.g_f:.6f}"
        )
    else:
        indices = "n/a"
    rule_text = "undeclared"
    if rule is not None:
        rule_text = rule.label or f"option {rule.option}, params {rule.params()}"
    lines = [
        "Cut-Report (v1.0) - Disclosure sheet",
        "-" * 72,
        row("Perimeter", f"{manifest.perimeter_block.get('P_ref')} "
                         f"({', '.join(pkg.p_ids)})"),
        row("Complement", f"{manifest.perimeter_block.get('O_ref')} "
                          f"({', '.join(pkg.o_ids)})"),
        row("Control rule", rule_text),
        row("Regime", observer.regime),
        row("Observer", f"currency {observer.units}; date {observer.date}; "
                        f"basis {observer.basis}; scale {observer.pricing_scale!r}"),
        row("Border statistics", border),
        row("Clearing", clearing_text),
        row("Output", output),
        row("Fisher indices", indices),
        row("Sources & versions", f"manifest {manifest.version}; "
                                  f"{len(manifest.hashes)} hashed files; "
                                  f"{len(manifest.notes)} notes"),
    ]
    return "\n".join(lines) + "\n"
