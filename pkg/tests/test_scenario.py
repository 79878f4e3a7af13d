import copy
import json
import math

import numpy as np
import pytest

from conftest import make_scenario
from jetoptics import report as rp
from jetoptics.errors import SchemaError, ValidationError
from jetoptics.scenario import (admissible, catalog_names, load_catalog, load_config, load_scenario,
                                resolve, sample_points, scenario_from_document)

BASE = {"p": 1, "n": 2, "h": [["1"]], "phi": [["1", "0"], ["0", "1"]], "A": ["0", "0"]}

EXPECTED_FLAGS = {
    "flat-2-2": (2, 2, True, True),
    "sphere-1-2": (1, 2, True, True),
    "synge-dynamic": (1, 2, False, False),
    "anisotropic-synge": (2, 3, False, False),
    "generic-3-3": (3, 3, False, False),
    "isotropic-medium": (1, 2, True, False),
}


def doc(**changes):
    d = copy.deepcopy(BASE)
    d.update(changes)
    return d


class TestCatalog:
    def test_names(self):
        assert catalog_names() == sorted(EXPECTED_FLAGS)

    @pytest.mark.parametrize("name", sorted(EXPECTED_FLAGS))
    def test_dimensions_and_flags(self, name):
        s = load_catalog(name).scenario
        assert (s.p, s.n, s.isotropic, s.static) == EXPECTED_FLAGS[name]

    def test_sphere_contents(self):
        cfg = load_catalog("sphere-1-2")
        s = cfg.scenario
        assert s.h.components[0][0].text in ("1", "1.0")
        assert all(a.text in ("0", "0.0") for a in s.A)
        lo, hi = cfg.ranges["x1"]
        assert lo > 0 and hi < math.pi

    def test_resolve_by_path_and_name(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps(doc(name="file")))
        assert resolve(str(path)).scenario.name == "file"
        assert resolve("flat-2-2").scenario.name == "flat-2-2"
        assert load_scenario(path).n == 2

    def test_unknown_catalog_name(self):
        with pytest.raises(SchemaError):
            resolve("no-such-scenario")


class TestValidation:
    def test_missing_key(self):
        d = doc()
        del d["phi"]
        with pytest.raises(SchemaError, match="phi"):
            scenario_from_document(d)

    def test_both_medium_forms_rejected(self):
        with pytest.raises(SchemaError):
            scenario_from_document(doc(synge="1.5"))

    def test_unknown_key(self):
        with pytest.raises(SchemaError):
            scenario_from_document(doc(colour="blue"))

    def test_wrong_matrix_size(self):
        with pytest.raises(SchemaError):
            scenario_from_document(doc(phi=[["1"]]))

    def test_wrong_A_length(self):
        with pytest.raises(SchemaError):
            scenario_from_document(doc(A=["0"]))

    def test_bad_range(self):
        with pytest.raises(SchemaError):
            scenario_from_document(doc(ranges={"x1": [1.0, 0.0]}))
        with pytest.raises(SchemaError):
            scenario_from_document(doc(ranges={"x7": [0.0, 1.0]}))

    def test_synge_index_below_one(self):
        d = doc()
        del d["A"]
        d["synge"] = "0.5 + 0.1*x1"
        with pytest.raises(ValidationError):
            scenario_from_document(d)

    def test_declared_flag_contradicted(self):
        with pytest.raises(ValidationError):
            scenario_from_document(doc(A=["0.1*v11", "0"], isotropic=True))

    def test_asymmetric_matrix_symmetrized_with_warning(self):
        with pytest.warns(UserWarning, match="mean"):
            cfg = scenario_from_document(doc(phi=[["2", "0.2"], ["0.4", "2"]]))
        vals, _ = cfg.scenario.phi.values(np.zeros((1, cfg.scenario.nvars)))
        assert vals[0, 0, 1] == pytest.approx(0.3) and vals[0, 1, 0] == pytest.approx(0.3)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(SchemaError):
            load_config(path)
        with pytest.raises(SchemaError):
            load_config(tmp_path / "missing.json")


class TestSynge:
    def test_builds_rank_one_medium(self):
        d = doc()
        del d["A"]
        d["synge"] = "sqrt(2)"
        s = scenario_from_document(d).scenario
        u = np.array([[0.0, 0.1, 0.2, 1.0, 0.0]])
        assert s.A[0].evaluate_many(u)[0][0] == pytest.approx(math.sqrt(0.5))
        assert s.refractive_index is not None and s.isotropic is False


class TestSampling:
    def test_ranges_and_admissibility(self):
        cfg = load_catalog("sphere-1-2")
        u = sample_points(cfg, 200, 4)
        lo, hi = cfg.ranges["x1"]
        assert u.shape == (200, cfg.scenario.nvars)
        assert (u[:, 1] >= lo).all() and (u[:, 1] <= hi).all()
        others = np.delete(u, 1, axis=1)
        assert (np.abs(others) <= 1).all()
        assert admissible(cfg.scenario, u).all()

    def test_rejects_degenerate_medium(self):
        s = make_scenario([["1"]], [["-1", "0"], ["0", "1"]], ["1", "0"])
        assert not admissible(s, np.zeros((1, 5))).any()
        with pytest.raises(ValidationError, match="admissible"):
            scenario_from_document(doc(phi=[["-1", "0"], ["0", "1"]], A=["1", "0"]))

    def test_seeded(self):
        cfg = load_catalog("anisotropic-synge")
        np.testing.assert_array_equal(sample_points(cfg, 10, 3), sample_points(cfg, 10, 3))
        assert not np.array_equal(sample_points(cfg, 10, 3), sample_points(cfg, 10, 4))

    def test_digest_tracks_document(self):
        a = scenario_from_document(doc(seed=1))
        b = scenario_from_document(doc(seed=2))
        assert a.digest != b.digest and a.digest == scenario_from_document(doc(seed=1)).digest


class TestReport:
    def test_verify_is_deterministic(self):
        cfg = load_catalog("synge-dynamic")
        a = rp.run_verify(cfg, 6, 5, workers=1).to_json()
        b = rp.run_verify(cfg, 6, 5, workers=1).to_json()
        assert a == b

    def test_flat_all_zero(self):
        rep = rp.run_verify(load_catalog("flat-2-2"), 10, workers=1)
        assert rep.exit_code == 0
        for name, r in rep.document["residuals"].items():
            assert r["max"] in (0.0, None), name

    def test_every_residual_has_an_anchor(self):
        rep = rp.run_verify(load_catalog("sphere-1-2"), 4, workers=1)
        for name, r in rep.document["residuals"].items():
            assert r["anchor"], name
        assert set(rp.CHECKS) <= set(rep.document["residuals"])

    def test_tolerance_override_can_fail(self):
        rep = rp.run_verify(load_catalog("synge-dynamic"), 4, tol_overrides={"maxwell": 1e-30}, workers=1)
        assert rep.exit_code == 1 and not rep.document["passed"]

    def test_unknown_tolerance(self):
        with pytest.raises(KeyError):
            rp.tolerances({"nope": 1.0})

    def test_parse_point(self):
        u = rp.parse_point("t=0.1,0.2; x=1,2,3; v=1,2,3,4,5,6", 2, 3)
        np.testing.assert_array_equal(u, [0.1, 0.2, 1, 2, 3, 1, 2, 3, 4, 5, 6])
        np.testing.assert_array_equal(rp.parse_point("t=0;x=1,2", 1, 2), [0, 1, 2, 0, 0])
        with pytest.raises(ValueError):
            rp.parse_point("t=0;x=1", 1, 2)
        with pytest.raises(ValueError):
            rp.parse_point("t=0;x=1,2;w=3", 1, 2)

    def test_single_point_report_has_blocks(self):
        cfg = load_catalog("anisotropic-synge")
        u = sample_points(cfg, 1, 0)[0]
        rep = rp.run_report(cfg, u)
        tensors = rep.document["tensors"]
        for group in ("metric", "nonlinear_connection", "cartan", "torsion", "curvature", "ricci",
                      "scalar", "stress_energy", "deflection", "electromagnetic"):
            assert group in tensors
        assert rep.exit_code == 0
        json.loads(rep.to_json())
