import json

import numpy as np
import pytest
import yaml

import cbv
from cbv.errors import EmissionError, IntegrityError, PackageError
from cbv.report import MANIFEST_VERSION, STABILITY_NAME, Edge, Manifest, sha256_of_file

from conftest import example_stats, renault_stats


def demo_observer(regime="B", **kwargs) -> cbv.Observer:
    return cbv.Observer(
        perimeter_ref="P-DEMO",
        basis="fair_value",
        units="EUR",
        date="2025-06-30",
        regime=regime,
        control_rule=cbv.ControlRuleSpec(option="A", tau=0.5),
        **kwargs,
    )


@pytest.fixture
def package_dir(tmp_path):
    stats = example_stats(with_v_p=False)
    cbv.write_package(tmp_path / "pkg", stats, demo_observer(), notes=["demo data"])
    return tmp_path / "pkg"


class TestPackageRoundTrip:
    def test_emit_then_load(self, package_dir):
        pkg = cbv.load_package(package_dir)
        stats = example_stats(with_v_p=False)
        assert pkg.p_ids == stats.p_ids
        assert pkg.o_ids == stats.o_ids
        np.testing.assert_array_equal(pkg.b_p, stats.b_p)
        np.testing.assert_array_equal(pkg.v_o, stats.v_o)
        np.testing.assert_array_equal(pkg.o_po, stats.o_po)
        np.testing.assert_array_equal(pkg.o_op, stats.o_op)
        np.testing.assert_array_equal(pkg.o_pp, stats.o_pp)
        assert pkg.manifest.version == MANIFEST_VERSION
        assert pkg.observer.units == "EUR"
        assert pkg.observer.regime == "B"

    def test_written_files_are_deterministic(self, tmp_path):
        stats = example_stats(with_v_p=False)
        one, two = tmp_path / "one", tmp_path / "two"
        cbv.write_package(one, stats, demo_observer())
        cbv.write_package(two, stats, demo_observer())
        for name in sorted(p.name for p in one.iterdir()):
            assert (one / name).read_bytes() == (two / name).read_bytes()

    def test_single_byte_corruption_detected(self, package_dir):
        target = package_dir / "O_PO.csv"
        blob = bytearray(target.read_bytes())
        blob[len(blob) // 2] ^= 0x01
        target.write_bytes(bytes(blob))
        with pytest.raises(IntegrityError) as err:
            cbv.load_package(package_dir)
        assert err.value.filename == "O_PO.csv"

    def test_regime_b_requires_internal_block(self, package_dir):
        manifest = Manifest.from_yaml_bytes(
            (package_dir / "manifest.yaml").read_bytes()
        )
        del manifest.data["data_files"]["O_PP"]
        del manifest.data["hashes"]["O_PP"]
        (package_dir / "manifest.yaml").write_bytes(manifest.to_yaml_bytes())
        with pytest.raises(PackageError) as err:
            cbv.load_package(package_dir)
        assert "O_PP" in str(err.value)

    def test_regime_a_loads_without_internal_block(self, tmp_path):
        cbv.write_package(tmp_path / "rno", renault_stats(), demo_observer(
            regime="A"
        ))
        manifest = Manifest.from_yaml_bytes(
            (tmp_path / "rno" / "manifest.yaml").read_bytes()
        )
        # single-node perimeter: drop the trivial internal block entirely
        del manifest.data["data_files"]["O_PP"]
        del manifest.data["hashes"]["O_PP"]
        (tmp_path / "rno" / "manifest.yaml").write_bytes(manifest.to_yaml_bytes())
        pkg = cbv.load_package(tmp_path / "rno")
        assert pkg.o_pp is None
        result = cbv.evaluate_for_observer(pkg.cut_statistics(), pkg.observer)
        assert result.w == pytest.approx(7.701e9, abs=1e-4)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(PackageError):
            cbv.load_package(tmp_path)

    def test_missing_hash_entry(self, package_dir):
        manifest = Manifest.from_yaml_bytes(
            (package_dir / "manifest.yaml").read_bytes()
        )
        del manifest.data["hashes"]["b_P"]
        (package_dir / "manifest.yaml").write_bytes(manifest.to_yaml_bytes())
        with pytest.raises(PackageError):
            cbv.load_package(package_dir)


class TestValidatePackage:
    def test_clean_package(self, package_dir):
        assert cbv.validate_package(cbv.load_package(package_dir)).ok

    def test_negative_share_flagged(self, package_dir):
        pkg = cbv.load_package(package_dir)
        pkg.o_op[0, 0] = -0.1
        report = cbv.validate_package(pkg)
        assert any(f.rule == "D2" and f.severity == "error" for f in report.findings)

    def test_negative_base_needs_note(self, tmp_path):
        stats = example_stats(with_v_p=False)
        shifted = cbv.CutStatistics(
            p_ids=stats.p_ids, o_ids=stats.o_ids,
            b_p=np.array([-5.0, 35.0, 30.0]), v_o=stats.v_o,
            o_po=stats.o_po, o_op=stats.o_op, o_pp=stats.o_pp,
        )
        bare = tmp_path / "bare"
        cbv.write_package(bare, shifted, demo_observer())
        report = cbv.validate_package(cbv.load_package(bare))
        assert any(f.rule == "D2" and f.severity == "warning" for f in report.findings)
        noted = tmp_path / "noted"
        cbv.write_package(noted, shifted, demo_observer(),
                          notes=["negative base: pension deficit"])
        assert cbv.validate_package(cbv.load_package(noted)).ok

    def test_missing_stability_evidence_is_d4(self, package_dir):
        (package_dir / STABILITY_NAME).unlink()
        report = cbv.validate_directory(package_dir)
        assert any(f.rule == "D4" for f in report.findings)

    def test_pov_disagreement_is_d3(self, package_dir):
        pov = cbv.build_pov(demo_observer())
        pov["observer"]["units"] = "USD"
        (package_dir / "pov.json").write_text(json.dumps(pov))
        report = cbv.validate_directory(package_dir)
        assert any(f.rule == "D3" for f in report.findings)

    def test_unexpected_clearing_file_is_d5(self, package_dir):
        (package_dir / "clearing.json").write_text("{}")
        manifest = Manifest.from_yaml_bytes(
            (package_dir / "manifest.yaml").read_bytes()
        )
        manifest.data["data_files"]["clearing_spec"] = "clearing.json"
        manifest.data["hashes"]["clearing_spec"] = sha256_of_file(
            package_dir / "clearing.json"
        )
        (package_dir / "manifest.yaml").write_bytes(manifest.to_yaml_bytes())
        report = cbv.validate_directory(package_dir)
        assert any(f.rule == "D5" for f in report.findings)

    def test_unknown_manifest_key_noted(self, package_dir):
        manifest = Manifest.from_yaml_bytes(
            (package_dir / "manifest.yaml").read_bytes()
        )
        manifest.data["x_custom"] = {"anything": 1}
        (package_dir / "manifest.yaml").write_bytes(manifest.to_yaml_bytes())
        report = cbv.validate_directory(package_dir)
        notes = [f for f in report.findings if f.severity == "note"]
        assert any("x_custom" in f.message for f in notes)
        # unknown keys survive a reload round-trip
        pkg = cbv.load_package(package_dir)
        assert pkg.manifest.data["x_custom"] == {"anything": 1}

    def test_corruption_reported_as_hash_finding(self, package_dir):
        target = package_dir / "b_P.csv"
        blob = bytearray(target.read_bytes())
        blob[-2] ^= 0x01
        target.write_bytes(bytes(blob))
        report = cbv.validate_directory(package_dir)
        assert report.has_errors
        assert report.findings[0].rule == "hash"
        assert report.findings[0].location == "b_P.csv"


class TestCutSummary:
    def test_worked_example_totals(self, stats_a):
        result = cbv.evaluate_regime_a(stats_a)
        doc = cbv.CutSummaryDoc.from_json_bytes(
            cbv.emit_cut_summary(result, stats_a, demo_observer(regime="A"))
        )
        assert doc.t_out == pytest.approx(9.6, abs=1e-12)
        assert doc.t_in == pytest.approx(15.04, abs=1e-12)
        assert doc.consolidated_value == pytest.approx(84.56, abs=1e-12)
        t_out, t_in = doc.recomputed_totals()
        assert t_out == pytest.approx(doc.t_out, abs=1e-9)
        assert t_in == pytest.approx(doc.t_in, abs=1e-9)
        assert doc.hedge_vector_o == {"X": pytest.approx(0.08), "Y": pytest.approx(0.06)}

    def test_schema_fixture_bytes_roundtrip(self):
        doc = cbv.CutSummaryDoc(
            perimeter="P_name_or_id",
            date="2025-06-30",
            currency="EUR",
            edges_po=[Edge("a", "o1", "equity", 123.45)],
            edges_op=[Edge("o1", "b", "debt", 67.89)],
            v_p={"a": 100.0, "b": 50.0},
            v_o={"o1": 0.0},
            t_out=123.45,
            t_in=67.89,
            consolidated_value=55.56,
            hedge_vector_o={"o1": -67.89},
            missing_data=[{"field": "edges_PO[1].amount",
                           "imputation": "median_industry"}],
        )
        blob = doc.to_json_bytes()
        payload = json.loads(blob)
        assert payload["totals"] == {"T_out": 123.45, "T_in": 67.89}
        assert payload["consolidated_value"] == 55.56
        assert list(payload)[:3] == ["perimeter", "date", "currency"]
        again = cbv.CutSummaryDoc.from_json_bytes(blob)
        assert again.to_json_bytes() == blob

    def test_amount_form_summary_types(self):
        stats = cbv.CutStatistics.from_amounts(
            ("p",), ("o",), b_p=[0.0], x_po=[[123.45]], x_op=[[67.89]],
            clearing_tag="seniority",
        )
        result = cbv.evaluate_regime_a(stats)
        assert result.w == pytest.approx(55.56, abs=1e-9)
        doc = cbv.CutSummaryDoc.from_json_bytes(
            cbv.emit_cut_summary(result, stats, demo_observer(regime="A"))
        )
        assert doc.edges_po[0].type == "debt"
        assert doc.consolidated_value == pytest.approx(55.56, abs=1e-9)

    def test_empty_cut(self):
        stats = cbv.CutStatistics(p_ids=("a", "b"), o_ids=(), b_p=[3.0, 4.0])
        result = cbv.evaluate_regime_a(stats)
        doc = cbv.CutSummaryDoc.from_json_bytes(
            cbv.emit_cut_summary(result, stats, demo_observer(regime="A"))
        )
        assert doc.t_out == 0.0
        assert doc.t_in == 0.0
        assert doc.consolidated_value == 7.0
        assert doc.edges_po == [] and doc.edges_op == []

    def test_extra_fields_preserved(self):
        blob = cbv.CutSummaryDoc(
            perimeter="P", date="2025-01-01", currency="EUR",
            edges_po=[], edges_op=[], v_p={}, v_o={},
            t_out=0.0, t_in=0.0, consolidated_value=0.0,
            extra={"x_vendor": "custom"},
        ).to_json_bytes()
        doc = cbv.CutSummaryDoc.from_json_bytes(blob)
        assert doc.extra == {"x_vendor": "custom"}
        assert doc.to_json_bytes() == blob


class TestPov:
    def test_minimal_observer_gets_template_defaults(self):
        blob = cbv.emit_pov(demo_observer())
        payload = json.loads(blob)
        assert payload["tolerances"] == {
            "rounding_threshold": 1e-8, "solver_eps": 1e-10, "max_iters": 10000,
        }
        assert payload["observer"]["information_regime"] == "B"

    def test_missing_control_rule_is_emission_error(self):
        observer = cbv.Observer(perimeter_ref="P", regime="A", date="2025-01-01")
        with pytest.raises(EmissionError) as err:
            cbv.emit_pov(observer)
        assert "control_rule" in err.value.fields

    def test_option_c_params_serialized(self):
        observer = cbv.Observer(
            perimeter_ref="P-PYR", basis="fair_value", units="EUR",
            date="2025-06-30", regime="B",
            control_rule=cbv.ControlRuleSpec(option="C", alpha=0.6),
        )
        payload = json.loads(cbv.emit_pov(observer))
        rule = payload["observer"]["control_rule"]
        assert rule["option"] == "C"
        assert rule["params"]["alpha"] == 0.6

    def test_roundtrip(self):
        observer = demo_observer(
            fx_ppp=cbv.FxPppSpec(scale=1.1, fx_source="ECB"),
            sdf=cbv.SdfSpec(measure="physical",
                            discount_weights={"base": 0.95},
                            change_of_measure={"base": 1.02}),
        )
        rebuilt, raw = cbv.parse_pov(cbv.emit_pov(observer))
        assert rebuilt == observer
        assert raw["observer"]["units"] == "EUR"

    def test_deterministic_bytes(self):
        assert cbv.emit_pov(demo_observer()) == cbv.emit_pov(demo_observer())


class TestDisclosureSheet:
    def test_renault_sheet(self, tmp_path):
        observer = cbv.Observer(
            perimeter_ref="P-REN-2025Q3", basis="fair_value", units="EUR",
            date="2025-08-20", regime="A",
            control_rule=cbv.ControlRuleSpec(label="IFRS10-control@50"),
        )
        cbv.write_package(tmp_path / "rno", renault_stats(), observer,
                          o_ref="O-NSN-2025Q3")
        pkg = cbv.load_package(tmp_path / "rno")
        result = cbv.evaluate_for_observer(pkg.cut_statistics(), pkg.observer)
        sheet = cbv.render_disclosure_sheet(pkg, result)
        assert "7,701,000,000" in sheet
        assert "Not applied (pre-clearing flows)" in sheet
        assert sheet.index("Perimeter") < sheet.index("Complement") \
            < sheet.index("Control rule") < sheet.index("Regime") \
            < sheet.index("Observer") < sheet.index("Border statistics") \
            < sheet.index("Clearing") < sheet.index("Output") \
            < sheet.index("Sources & versions")

    def test_fisher_row_populated(self, package_dir):
        pkg = cbv.load_package(package_dir)
        result = cbv.evaluate_for_observer(pkg.cut_statistics(), pkg.observer)
        indices = cbv.fisher_combine(cbv.FisherIndices(1.1, 1.0, 1.1, 1.0))
        sheet = cbv.render_disclosure_sheet(pkg, result, fisher=indices)
        assert "G_F" in sheet

    def test_manifest_yaml_structure(self, package_dir):
        data = yaml.safe_load((package_dir / "manifest.yaml").read_text())
        assert data["version"] == MANIFEST_VERSION
        assert set(data["data_files"]) >= {"nodes_P", "nodes_O", "b_P", "v_O",
                                           "O_PO", "O_OP", "O_PP"}
        assert all(str(h).startswith("sha256:") for h in data["hashes"].values())
