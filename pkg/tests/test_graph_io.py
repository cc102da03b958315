from pathlib import Path

import pytest

from kmsgraph.errors import GraphInputError
from kmsgraph.services.graph_io import load_graph, parse_graph, serialize_graph


def test_load_fixture(data_dir: Path) -> None:
    g = load_graph(data_dir / "chains.edges")
    assert len(g) == 10
    assert g.edge_count == 24
    assert g.adjacency[g.index("w1"), g.index("w1")] == 2


def test_parse_defaults_and_comments() -> None:
    g = parse_graph("# header\n\na b\n  b a 3\na b\n")
    assert g.vertices == ("a", "b")
    assert g.adjacency.tolist() == [[0, 2], [3, 0]]


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ("a b\nlonely\n", "line 2"),
        ("a b 0\n", "multiplicity must be >= 1"),
        ("a b -2\n", "multiplicity must be >= 1"),
        ("a b x\n", "not an integer"),
        ("a b 1 extra\n", "line 1"),
        ("# nothing here\n", "empty graph"),
        ("", "empty graph"),
    ],
)
def test_parse_rejects_malformed_input(text: str, message: str) -> None:
    with pytest.raises(GraphInputError, match=message):
        parse_graph(text)


def test_serialize_is_idempotent(data_dir: Path) -> None:
    g = load_graph(data_dir / "subcritical.edges")
    text = serialize_graph(g)
    assert parse_graph(text) == g
    assert serialize_graph(parse_graph(text)) == text


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(GraphInputError, match="cannot read"):
        load_graph(tmp_path / "absent.edges")
