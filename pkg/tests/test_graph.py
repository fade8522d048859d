"""Metric graph construction and validation."""
import numpy as np
import pytest

from qgc import BoundaryCondition, GraphError, build_graph
from qgc.graph import chain_graph, star_graph, tadpole_graph

LENGTH_RTOL = 1e-18


def test_tadpole_shape():
    g = tadpole_graph()
    assert g.edge_ids == ("e1", "e2")
    assert g.edge("e1").is_loop and g.edge("e1").finite
    assert not g.edge("e2").finite
    assert g.degree("v") == 3
    assert g.boundary["v"] is BoundaryCondition.NEUMANN_KIRCHHOFF


def test_exact_length_expression():
    g = build_graph({"edges": {"a": {"length": "cbrt(2)", "from": "p", "to": "q"}},
                     "boundary": {"p": "dirichlet", "q": "neumann"}})
    L = g.edge("a").length
    assert abs(L ** 3 - 2) <= 4 * LENGTH_RTOL * 2
    assert g.boundary["q"] is BoundaryCondition.NEUMANN


def test_interval_defaults_internal_to_kirchhoff():
    g = build_graph({"edges": {"a": {"length": 1, "from": "p", "to": "m"},
                               "b": {"length": 2, "from": "m", "to": "q"}},
                     "boundary": {"p": "dirichlet", "q": "dirichlet"}})
    assert g.boundary["m"] is BoundaryCondition.NEUMANN_KIRCHHOFF
    assert set(g.external_vertices) == {"p", "q"}


@pytest.mark.parametrize("spec, match", [
    ({"edges": {}}, "no edges"),
    ({"edges": {"a": {"length": 0, "from": "p", "to": "q"}}}, "nonpositive"),
    ({"edges": {"a": {"length": -1, "from": "p", "to": "q"}}}, "nonpositive"),
    ({"edges": {"a": {"length": 1, "from": "p"}}}, "needs a 'to'"),
    ({"edges": {"a": {"length": "inf", "from": "p", "to": "q"}}}, "half-line"),
    ({"edges": {"a": {"length": 1, "from": "p", "to": "q"}}}, "external vertex"),
    ({"edges": {"a": {"length": 1, "from": "p", "to": "q"}},
      "boundary": {"p": "dirichlet", "q": "neumann_kirchhoff"}}, "external vertex"),
    ({"edges": {"a": {"length": 1, "from": "p", "to": "q"}},
      "boundary": {"p": "dirichlet", "q": "dirichlet", "z": "neumann"}}, "unknown vertex"),
    ({"vertices": ["p", "q"], "edges": {"a": {"length": 1, "from": "p", "to": "r"}}},
     "unknown vertex"),
    ({"edges": {"a": {"length": 1}}}, "needs 'length' and 'from'"),
])
def test_invalid_graphs(spec, match):
    with pytest.raises(GraphError, match=match):
        build_graph(spec)


def test_internal_vertex_must_be_kirchhoff():
    with pytest.raises(GraphError, match="internal vertex"):
        build_graph({"edges": {"a": {"length": 1, "from": "v", "to": "v"}},
                     "boundary": {"v": "dirichlet"}})


def test_unknown_boundary_name():
    with pytest.raises((GraphError, ValueError)):
        build_graph({"edges": {"a": {"length": 1, "from": "p", "to": "q"}},
                     "boundary": {"p": "robin", "q": "dirichlet"}})


def test_star_and_chain_builders():
    s = star_graph(["cbrt(2)", "cbrt(5)"])
    assert len(s.edge_ids) == 4 and s.degree("c") == 4
    assert all(s.boundary[f"o{j}"] is BoundaryCondition.DIRICHLET for j in range(1, 5))
    loop = chain_graph(4, 1, "loop")
    assert all(loop.degree(v) == 2 for v in loop.vertices)
    with pytest.raises(GraphError):
        chain_graph(0, 1, "neumann")
