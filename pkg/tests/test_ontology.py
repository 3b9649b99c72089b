import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gahmm.events import ParseError
from gahmm.ontology import (
    CatalogError,
    build_pair_weights,
    correlation_wt,
    parse_catalog,
    render_catalog,
)
from oracles import correlation_wt_recursive


def test_parse_table1_row():
    cat = parse_catalog("Object_picked - Object_Carrying - Object_placed_trunk -> Loading-1\n")
    (entry,) = cat.entries
    assert entry.pattern == ("Object_picked", "Object_Carrying", "Object_placed_trunk")
    assert entry.label == "Loading-1"
    assert cat.window == 3
    assert "Loading-1" in cat.vocab


def test_parse_ontology_x1(data_dir):
    cat = parse_catalog((data_dir / "ontology_x1.onto").read_text())
    (entry,) = cat.entries
    assert entry.pattern == ("Towards_cabinet", "opens_cabinet", "object_picked")
    assert entry.label == "Object_taken_cabinet"
    assert entry.context_tags == {"indoor"}


def test_duplicate_pattern_rejected():
    with pytest.raises(CatalogError, match="duplicate"):
        parse_catalog("a - b - c -> X\na - b - c -> Y\n")


def test_duplicate_after_synonym_folding_rejected():
    with pytest.raises(CatalogError, match="duplicate"):
        parse_catalog("@synonym a aa\na - b - c -> X\naa - b - c -> Y\n")


def test_ragged_patterns_name_the_rule():
    with pytest.raises(CatalogError, match="d - e -> Y"):
        parse_catalog("a - b - c -> X\nd - e -> Y\n")
    with pytest.raises(CatalogError):
        parse_catalog("@window 3\na - b -> X\n")


def test_syntax_error_line_number():
    with pytest.raises(ParseError) as err:
        parse_catalog("# c\na - b - c -> X\nnot a rule\n")
    assert err.value.line == 3
    with pytest.raises(ParseError):
        parse_catalog("@frobnicate 2\n")


def test_empty_catalog():
    with pytest.raises(CatalogError, match="empty catalog"):
        parse_catalog("# nothing here\n")


def test_labels_registered_and_hyphens_kept(table1_catalog):
    cat = table1_catalog
    assert cat.labels == ["Placing Object on floor", "Loading-1", "Object_Dropped",
                          "Unloading-1", "Object_exchange-1", "Social_interaction"]
    assert "Placing_Object_on_floor" in cat.vocab
    exchange = cat.entries[4]
    assert exchange.pattern[0] == "Entity-1_carrying_object"
    # generic matching strips the role prefixes
    assert [cat.canonical(s) for s in exchange.pattern] == ["carrying_object", "standing", "carrying_object"]
    assert cat.entries[1].context_tags == {"HVI"}


def test_render_round_trip(scenario_catalog, table1_catalog, cabinet_catalog):
    for cat in (scenario_catalog, table1_catalog, cabinet_catalog):
        text = render_catalog(cat)
        again = parse_catalog(text)
        assert again == cat
        assert render_catalog(again) == text


def test_canonical_text_is_fixed_point():
    text = ("@window 2\n@match generic\n@synonym Standing standing\n"
            "a - b -> X @indoor\n@layer 1\nX - c -> Y\n")
    assert render_catalog(parse_catalog(text)) == text


def test_merge_checks_window_and_mode():
    a = parse_catalog("a - b -> X\n")
    with pytest.raises(CatalogError):
        a.merge(parse_catalog("a - b - c -> Y\n"))
    with pytest.raises(CatalogError):
        a.merge(parse_catalog("@match generic\nc - d -> Y\n"))


@pytest.mark.parametrize("x, y, expected", [
    (0.5, 1, 0.5),
    (0.5, 2, 0.75),
    (0.5, 3, 0.875),
    (0.5, 4, 0.9375),
])
def test_correlation_wt_values(x, y, expected):
    assert correlation_wt_recursive(x, y) == expected
    assert correlation_wt(x, y) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("x, y", [(0.0, 1), (1.5, 1), (0.5, 0), (0.5, -2)])
def test_correlation_wt_domain(x, y):
    with pytest.raises(ValueError):
        correlation_wt(x, y)


@given(st.floats(0.01, 1.0), st.integers(1, 40))
def test_closed_form_matches_recursion(x, y):
    assert abs(correlation_wt(x, y) - correlation_wt_recursive(x, y)) <= 1e-12


def test_correlation_wt_monotone_to_one():
    for x in (0.1, 0.3, 0.5, 0.9):
        values = [correlation_wt(x, y) for y in range(1, 65)]
        # strict while the remaining gap is above float resolution near 1
        assert all(b > a for a, b in zip(values[:50], values[1:50]))
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert all(v <= 1.0 for v in values)
        assert values[-1] == pytest.approx(1.0, abs=1e-12)


def test_pair_weights_single_entry():
    cat = parse_catalog("e1 - e3 - e5 -> Ontology-1\n")
    table = build_pair_weights(cat)
    e1, e3, e5 = (cat.vocab.lookup(n) for n in ("e1", "e3", "e5"))
    assert table.base_weight == 0.5
    assert table.weight(e1, e3) == 0.5
    assert table.weight(e3, e5) == 0.5
    assert table.weight(e1, e5) == 0.0
    assert (e1, e5) not in table.cumulative


def test_pair_weights_repeated_pair():
    cat = parse_catalog("a - b - c -> X\na - b - d -> Y\n")
    table = build_pair_weights(cat)
    a, b = cat.vocab.lookup("a"), cat.vocab.lookup("b")
    assert table.counts[(a, b)] == 2
    assert table.weight(a, b) == correlation_wt_recursive(0.5, 2) == 0.75


def test_pair_weights_base_weights_sum_to_one():
    for L in range(2, 7):
        cat = parse_catalog(" - ".join(f"s{i}" for i in range(L)) + " -> X\n")
        table = build_pair_weights(cat)
        assert math.fsum([table.base_weight] * (L - 1)) == pytest.approx(1.0, abs=1e-12)


def test_pair_weights_need_pairs():
    with pytest.raises(CatalogError):
        build_pair_weights(parse_catalog("a -> X\n"))
