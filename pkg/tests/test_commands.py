import json

import numpy as np
import pytest

from jetoptics.commands import run_classical, run_compare_connections
from jetoptics.errors import NotClassical, NotIsotropic
from jetoptics.report import parse_point
from jetoptics.scenario import load_catalog, scenario_from_document

CURVED = [["1 + 0.1*x1^2", "0.1*x2"], ["0.1*x2", "1 + 0.2*sin(x1)"]]


def synge_doc(index, phi=CURVED):
    return {"p": 1, "n": 2, "h": [["1"]], "phi": phi, "synge": index, "seed": 3}


class TestCompareConnections:
    def test_no_medium_has_no_difference(self):
        cfg = load_catalog("sphere-1-2")
        out = run_compare_connections(cfg, parse_point("t=0.2;x=1.0,0.3;v=0.5,-0.4", 1, 2))
        assert out["max_abs_difference"] < 1e-15
        assert np.abs(np.array(out["L^i_jk difference"])).max() < 1e-15

    def test_time_dependent_medium(self):
        cfg = load_catalog("isotropic-medium")
        out = run_compare_connections(cfg, parse_point("t=0.4;x=0.3,-0.2;v=0.7,0.1", 1, 2))
        diff = np.array(out["Nbar - N"])
        assert np.abs(diff).max() > 1e-3
        # the time-derivative term is one part of the difference and is nonzero here
        assert np.abs(np.array(out["time_derivative_term"])).max() > 1e-3
        json.dumps(out)

    def test_static_medium_has_no_time_term(self):
        cfg = scenario_from_document({"p": 1, "n": 2, "h": [["1"]], "phi": CURVED, "A": ["0.3*x1", "0.2"]})
        out = run_compare_connections(cfg, parse_point("t=0.4;x=0.3,-0.2;v=0.7,0.1", 1, 2))
        assert np.abs(np.array(out["time_derivative_term"])).max() == 0
        assert out["max_abs_difference"] > 1e-3

    def test_dispersive_medium_rejected(self):
        cfg = load_catalog("synge-dynamic")
        with pytest.raises(NotIsotropic):
            run_compare_connections(cfg, parse_point("t=0;x=0,0;v=0.5,0.5", 1, 2))


class TestClassical:
    def test_catalog_synge(self):
        out = run_classical(load_catalog("synge-dynamic"))
        assert out["passed"]
        assert out["fundamental_tensor_max_error"] < 1e-12
        assert out["nonlinear_connection_max_error"] < 1e-12

    def test_curved_space(self):
        out = run_classical(scenario_from_document(synge_doc("1.2 + 0.1*x1^2 + 0.05*v11^2")), count=10)
        assert out["passed"]

    def test_large_index_limit(self):
        cfg = scenario_from_document(synge_doc("1e9", [["1", "0"], ["0", "1"]]))
        u = np.array([[0.0, 0.1, 0.2, 0.6, -0.8]])
        from jetoptics.jet_geometry import JetGeometry
        g = JetGeometry(cfg.scenario, u, 0).g.value[0]
        np.testing.assert_allclose(g, np.eye(2) + np.outer([0.6, -0.8], [0.6, -0.8]), atol=1e-12)

    def test_zero_section_restricts_to_phi(self):
        out = run_classical(scenario_from_document(synge_doc("1.5")), ["0", "0"], count=5)
        sec = out["sections"]
        assert sec["max_error_vs_formula"] < 1e-12
        x = np.array(sec["x"])
        for g, (x1, x2) in zip(np.array(sec["g_ij"]), x):
            ref = [[1 + 0.1 * x1**2, 0.1 * x2], [0.1 * x2, 1 + 0.2 * np.sin(x1)]]
            np.testing.assert_allclose(g, ref, atol=1e-14)

    def test_nonzero_section(self):
        out = run_classical(scenario_from_document(synge_doc("1.5")), ["x2", "sin(x1)"], count=5)
        assert out["sections"]["max_error_vs_formula"] < 1e-12

    def test_preconditions(self):
        with pytest.raises(NotClassical):
            run_classical(load_catalog("anisotropic-synge"))
        with pytest.raises(NotClassical):
            run_classical(load_catalog("isotropic-medium"))
        with pytest.raises(NotClassical):
            run_classical(scenario_from_document(synge_doc("1.5")), ["0"])
