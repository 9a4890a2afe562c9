import math

import pytest

from gft.report import ReportConfig, report_worked_examples


@pytest.fixture(scope="module")
def report():
    return report_worked_examples()


def test_cells(report):
    assert report["cells"] == {
        "Box3-Cartesian": "I-C",
        "Ball3-spherical": "I-SD",
        "Torus2-axis": "I-D",
        "Torus2-rotated-rational": "I-D",
        "Torus2-rotated-irrational": "I-D",
    }
    assert report["topology_differs_box_vs_ball"]


def test_rotated_multiset(report):
    assert report["rotated_spectrum_multiset_equal"]
    assert report["rotated_spectrum_max_defect"] <= 1e-9
    for key in ("Torus2-rotated-rational", "Torus2-rotated-irrational"):
        ex = report["examples"][key]
        assert ex["fiber_unitarity_max"] <= 1e-10
        assert ex["label_norm_defect"] <= 1e-9


def test_flows(report):
    rat, irr = report["flows"]["3/4"], report["flows"]["irrational"]
    assert rat["closed"] and rat["winding"] == [3, 4]
    assert not irr["closed"] and irr["wraps"] == 4000 and irr["winding"] is None


def test_parseval_and_commutators(report):
    for name, ex in report["examples"].items():
        assert ex["parseval_residual"] <= 1e-12, name
        assert ex["masa"]["commutator_max"] <= 1e-6, name


def test_clusters_are_clean(report):
    box = report["examples"]["Box3-Cartesian"]["clusters"]
    assert box[:4] == [[0.0, 1], [1.0, 6], [2.0, 12], [3.0, 8]]
    assert math.copysign(1.0, box[0][0]) == 1.0


def test_config_is_respected():
    r = report_worked_examples(ReportConfig(rational_tan=(1, 2), flow_wraps=50))
    assert r["flows"]["1/2"]["winding"] == [1, 2]
    assert r["flows"]["irrational"]["wraps"] == 50
