from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disturbsim.scene import (
    AgentPose,
    Appliance,
    ApplianceKind,
    EdgeWall,
    Heading,
    Material,
    ObjectInstance,
    Scene,
    SceneSemanticError,
    SceneSyntaxError,
    canonical_edge,
    edge_between,
    heading_between,
    parse_scene,
    serialize_scene,
    tokenize,
    validate_scene,
)

from conftest import bundled_scene


def names(violations):
    return sorted(v.invariant for v in violations)


def test_headings_turn_and_angles():
    assert Heading.NORTH.right() is Heading.EAST
    assert Heading.NORTH.left() is Heading.WEST
    assert [h.angle for h in (Heading.EAST, Heading.SOUTH, Heading.WEST, Heading.NORTH)] == [0, 90, 180, 270]
    assert Heading.parse("s") is Heading.SOUTH
    assert heading_between((2, 2), (2, 1)) is Heading.NORTH
    with pytest.raises(ValueError):
        Heading.parse("up")


def test_canonical_edge_is_order_free():
    assert canonical_edge((3, 4), (3, 5)) == canonical_edge((3, 5), (3, 4)) == ((3, 4), (3, 5))
    with pytest.raises(ValueError):
        canonical_edge((0, 0), (1, 1))


def test_boundary_is_opaque_unless_listed():
    s = Scene(3, 3, walls=(EdgeWall(((2, 1), (3, 1)), Material.MIRROR),))
    assert s.material_between((0, 0), (-1, 0)) is Material.OPAQUE
    assert s.material_between((2, 1), (3, 1)) is Material.MIRROR
    assert s.material_between((0, 0), (1, 0)) is None
    assert edge_between((0, 0), Heading.NORTH, s).material is Material.OPAQUE
    assert edge_between((0, 0), (1, 0), s) is None


def test_parse_kitchen_and_canonical_round_trip():
    s = bundled_scene()
    assert (s.width, s.height) == (10, 10)
    assert s.material_between((5, 1), (6, 1)) is Material.OPAQUE
    text = serialize_scene(s)
    assert serialize_scene(parse_scene(text)) == text
    assert parse_scene(text) == s


def test_canonical_order_is_independent_of_input_order():
    a = parse_scene("size 3 3\nobject b Apple 1 1\nobject a Apple 0 0\nwall 1 1 1 2 glass\nwall 0 0 1 0 opaque\n")
    b = parse_scene("size 3 3\nwall 0 0 1 0 opaque\nwall 1 2 1 1 glass\nobject a Apple 0 0\nobject b Apple 1 1\n")
    assert serialize_scene(a) == serialize_scene(b)


def test_held_and_inside_states_round_trip():
    text = (
        "size 4 4\nappliance m Microwave 1 1 closed on\n"
        "object p Plate held heated\nobject q Potato 1 1 in=m cooled\n"
    )
    s = parse_scene(text)
    assert s.held_object().id == "p"
    assert s.object("q").inside == "m"
    assert parse_scene(serialize_scene(s)) == s


def test_syntax_error_reports_line_and_column():
    with pytest.raises(SceneSyntaxError) as err:
        parse_scene("size 4 4\nwall 0 0 1 zero opaque\n")
    assert (err.value.line, err.value.column) == (2, 12)
    with pytest.raises(SceneSyntaxError) as err:
        parse_scene("size 4 4\nwindow 1 1\n")
    assert err.value.line == 2 and err.value.column == 1
    with pytest.raises(SceneSyntaxError):
        parse_scene("light 0.5\n")


def test_tokenizer_strips_comments():
    toks = list(tokenize("# header\nsize 2 2  # trailing\n\n"))
    assert [t.words for t in toks] == [["size", "2", "2"]]


@pytest.mark.parametrize(
    "text, expected",
    [
        ("size 3 3\nwall 0 0 2 0 glass\n", ["WallAdjacency"]),
        ("size 3 3\nwall 0 0 1 0 glass\nwall 1 0 0 0 opaque\n", ["DuplicateEdge"]),
        ("size 3 3\nlight 1.5\n", ["LightOutOfRange"]),
        ("size 3 3\nobject a Apple 0 0\nobject a Apple 1 1\n", ["DuplicateId"]),
        ("size 3 3\nobject a Apple 5 0\n", ["ObjectOutOfBounds"]),
        ("size 3 3\nobject a Apple held\nobject b Apple held\n", ["MultipleHeld"]),
        ("size 3 3\nobject a Apple 0 0 in=nowhere\n", ["UnknownReceptacle"]),
        ("size 3 3\nappliance s Sink 1 1\nobject a Apple 0 0 in=s\n", ["ReceptacleCell"]),
        ("size 3 3\nappliance l Lamp 1 1 open\n", ["ApplianceState"]),
        ("size 3 3\nappliance l Lamp 7 1\n", ["ApplianceOutOfBounds"]),
        (
            "size 3 3\nobject a Apple 1 1\nwall 1 1 1 0 opaque\nwall 1 1 2 1 opaque\n"
            "wall 1 1 1 2 opaque\nwall 1 1 0 1 opaque\n",
            ["ObjectEnclosed"],
        ),
        ("size 0 3\n", ["SizeInvalid"]),
    ],
)
def test_semantic_errors_name_the_invariant(text, expected):
    with pytest.raises(SceneSemanticError) as err:
        parse_scene(text)
    assert names(err.value.violations) == expected


def test_enclosed_object_inside_closed_receptacle_is_allowed():
    text = (
        "size 3 3\nappliance f Fridge 1 1 closed\nobject a Apple 1 1 in=f\n"
        "wall 1 1 1 0 opaque\nwall 1 1 2 1 opaque\nwall 1 1 1 2 opaque\nwall 1 1 0 1 opaque\n"
    )
    assert validate_scene(parse_scene(text, validate=False)) == []


def test_violation_strings_carry_entity_names():
    with pytest.raises(SceneSemanticError) as err:
        parse_scene("size 3 3\nobject apple7 Apple 9 9\n")
    assert "apple7" in str(err.value)


def test_state_changes_yield_new_scenes(kitchen):
    plate = kitchen.object("plate1")
    moved = kitchen.replace_object(ObjectInstance(plate.id, plate.cls, (0, 1)))
    assert kitchen.object("plate1").cell == (2, 7)
    assert moved.object("plate1").cell == (0, 1)
    assert moved.digest() != kitchen.digest()
    assert moved.geometry_key == kitchen.geometry_key


# -- random scenes ----------------------------------------------------------------------


@st.composite
def scenes(draw):
    w = draw(st.integers(2, 7))
    h = draw(st.integers(2, 7))
    cells = [(x, y) for y in range(h) for x in range(w)]
    edges = [((x, y), (x + 1, y)) for x, y in cells if x + 1 < w]
    edges += [((x, y), (x, y + 1)) for x, y in cells if y + 1 < h]
    chosen = draw(st.lists(st.sampled_from(edges), unique=True, max_size=6))
    walls = tuple(EdgeWall(e, draw(st.sampled_from(list(Material)))) for e in chosen)
    kinds = draw(st.lists(st.sampled_from(list(ApplianceKind)), max_size=3))
    apps = []
    for i, kind in enumerate(kinds):
        cell = draw(st.sampled_from(cells))
        apps.append(Appliance(
            f"a{i}", kind, cell,
            draw(st.booleans()) if kind.openable else None,
            draw(st.booleans()) if kind.toggleable else None,
        ))
    objs = []
    for i in range(draw(st.integers(0, 3))):
        cls = draw(st.sampled_from(["Apple", "Plate", "Book"]))
        flags = frozenset(draw(st.lists(st.sampled_from(["Heated", "Cooled"]), unique=True)))
        objs.append(ObjectInstance(f"o{i}", cls, draw(st.sampled_from(cells)), flags))
    light = draw(st.sampled_from([0.0, 0.1, 0.25, 0.5, 1.0, 1 / 3]))
    return Scene(w, h, walls, tuple(objs), tuple(apps), light)


@settings(max_examples=150, deadline=None)
@given(scenes())
def test_serialize_parse_round_trip(scene):
    text = serialize_scene(scene)
    again = parse_scene(text, validate=False)
    assert again == scene
    assert serialize_scene(again) == text
