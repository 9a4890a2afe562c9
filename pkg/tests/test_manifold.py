import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gft.errors import ManifestError, NonPositiveDefinite, OutOfChart
from gft.expr import parse_expr
from gft.killing import interior_samples
from gft.manifold import (
    CATALOG_IDS,
    catalog,
    evaluate_metric,
    from_manifest,
    load_manifest,
    volume_element,
)

FLAT = ("Interval", "Circle", "Torus2", "Box3")


# -- expressions -----------------------------------------------------------

def test_expr_grammar():
    e = parse_expr("r^2*sin(th)^2", ("r", "th"))
    assert e(2.0, math.pi / 2) == pytest.approx(4.0)
    assert parse_expr("exp(log(3)) - 1", ("x",))(0.0) == pytest.approx(2.0)
    assert parse_expr("-x + pi", ("x",))(np.array([0.0, 1.0])).tolist() == pytest.approx([math.pi, math.pi - 1])


@pytest.mark.parametrize("bad", ["", "x +", "__import__('os')", "y", "x.real", "open(x)", "[x]", "x if x else 1"])
def test_expr_rejects(bad):
    with pytest.raises(ManifestError):
        parse_expr(bad, ("x",))


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_expr_matches_python(a, b):
    e = parse_expr("(a - b)^2 + cosh(a) * 3", ("a", "b"))
    assert e(a, b) == pytest.approx((a - b) ** 2 + math.cosh(a) * 3, rel=1e-12)


# -- metric evaluation -----------------------------------------------------

def test_examples():
    m = evaluate_metric(catalog("Torus2"), (1.0, 2.0))
    assert np.array_equal(m.q, np.eye(2)) and m.sqrt_det == 1.0
    assert np.all(m.christoffel == 0)

    m = evaluate_metric(catalog("Sphere2"), (math.pi / 2, 0.0))
    assert np.allclose(m.q, np.eye(2), atol=1e-15) and m.sqrt_det == pytest.approx(1.0)

    assert volume_element(catalog("Ball3"), (2.0, math.pi / 2, 0.0)) == pytest.approx(4.0, rel=1e-14)
    assert volume_element(catalog("Box3"), (0.3, -1.0, 2.0)) == 1.0
    assert volume_element(catalog("Sphere2"), (math.pi / 6, 1.0)) == pytest.approx(0.5, rel=1e-14)
    assert volume_element(catalog("Circle"), (0.7,)) == 1.0


@pytest.mark.parametrize("cid", CATALOG_IDS)
def test_pointwise_invariants(cid, rng):
    spec = catalog(cid)
    for p in interior_samples(spec, 100, rng):
        m = evaluate_metric(spec, p)
        np.linalg.cholesky(m.q)
        assert np.allclose(m.q @ m.q_inv, np.eye(spec.dim), rtol=0, atol=1e-12)
        assert m.sqrt_det**2 == pytest.approx(np.linalg.det(m.q), rel=1e-12)
        assert np.allclose(m.christoffel, np.transpose(m.christoffel, (0, 2, 1)), atol=0)
        if cid in FLAT:
            assert np.max(np.abs(m.christoffel)) <= 1e-9


def test_sphere_christoffel_closed_form():
    th = 0.7
    g = evaluate_metric(catalog("Sphere2"), (th, 0.3)).christoffel
    assert g[0, 1, 1] == pytest.approx(-math.sin(th) * math.cos(th), rel=1e-12)
    assert g[1, 0, 1] == pytest.approx(1 / math.tan(th), rel=1e-12)


@given(st.floats(0.05, math.pi - 0.05), st.floats(0, 2 * math.pi), st.integers(-3, 3))
def test_sphere_periodicity(th, ph, k):
    s = catalog("Sphere2")
    a = evaluate_metric(s, (th, ph))
    b = evaluate_metric(s, (th, ph + 2 * math.pi * k))
    assert np.allclose(a.q, b.q, rtol=1e-12, atol=1e-14) and np.allclose(a.christoffel, b.christoffel, atol=1e-12)


def test_user_metric_fd_christoffel_matches_catalog():
    user = from_manifest({
        "name": "sphere-user", "dim": 2,
        "coords": [{"name": "th", "min": 0, "max": math.pi, "bc": "neumann"},
                   {"name": "phi", "min": 0, "max": 2 * math.pi, "bc": "periodic"}],
        "metric": {"kind": "diagonal", "components": ["1", "sin(th)^2"]},
    })
    p = (1.1, 0.4)
    assert np.allclose(evaluate_metric(user, p).christoffel, evaluate_metric(catalog("Sphere2"), p).christoffel, atol=1e-8)


def test_errors():
    with pytest.raises(OutOfChart):
        evaluate_metric(catalog("Sphere2"), (0.0, 0.0))
    with pytest.raises(OutOfChart):
        evaluate_metric(catalog("Sphere2"), (1e-13, 0.0))
    with pytest.raises(OutOfChart):
        evaluate_metric(catalog("Ball3"), (4.0, 1.0, 1.0))
    with pytest.raises(OutOfChart):
        evaluate_metric(catalog("Torus2"), (1.0,))
    bumpy = from_manifest({
        "name": "neg", "dim": 1, "coords": [{"name": "x", "min": -1, "max": 1, "bc": "dirichlet"}],
        "metric": {"kind": "diagonal", "components": ["x"]},
    })
    with pytest.raises(NonPositiveDefinite):
        evaluate_metric(bumpy, (-0.5,))


@pytest.mark.parametrize("data", [
    {},
    {"name": "a", "dim": 2, "coords": [{"name": "x", "min": 0, "max": 1, "bc": "dirichlet"}],
     "metric": {"kind": "diagonal", "components": ["1"]}},
    {"name": "a", "dim": 1, "coords": [{"name": "x", "min": 1, "max": 0, "bc": "dirichlet"}],
     "metric": {"kind": "diagonal", "components": ["1"]}},
    {"name": "a", "dim": 1, "coords": [{"name": "x", "min": 0, "max": 1, "bc": "robin"}],
     "metric": {"kind": "diagonal", "components": ["1"]}},
    {"name": "a", "dim": 1, "coords": [{"name": "x", "min": 0, "max": 1, "bc": "dirichlet"}],
     "metric": {"kind": "catalog", "id": "Klein"}},
])
def test_malformed_manifests(data):
    with pytest.raises(ManifestError):
        from_manifest(data)


@pytest.mark.parametrize("cid", CATALOG_IDS)
def test_manifest_roundtrip(cid, tmp_path):
    spec = catalog(cid)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(spec.to_manifest()))
    back = load_manifest(path)
    assert back.names == spec.names and back.compact == spec.compact and back.catalog_id == cid


def test_compactness_flags():
    assert [catalog(c).compact for c in CATALOG_IDS] == [True, True, True, True, False, False]
