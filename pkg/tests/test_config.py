import pytest

from compound_render import presets
from compound_render.config import (
    ConfigError,
    derive_destination_channels,
    parse_config,
    print_config,
    validate,
)
from compound_render.config.model import COLOR, DEPTH, EqualizerKind, TaskKind
from compound_render.geometry import PixelKernel, PixelViewport, Range, Viewport

RES = presets.resources(["draw", "dest", "c2"])

LEAF = RES + """
compound { channel "dest"
  compound {
    channel "draw"
    buffer [ COLOR DEPTH ]
    range [ 0 0.5 ]
    viewport [ 0 0 0.5 1 ]
    outputframe { name "left_half" }
  }
  inputframe { name "left_half" }
}
"""

INNER = RES + """
compound { channel "dest"
  compound { channel "draw" range [ 0 0.5 ] outputframe { name "part_a" } }
  compound { channel "c2" range [ 0.5 1 ] outputframe { name "part_b" } }
  compound {
    channel "dest"
    task [ ASSEMBLE READBACK ]
    inputframe { name "part_a" }
    inputframe { name "part_b" }
    outputframe { name "final" buffer [ COLOR ] }
  }
}
"""


def test_leaf_compound_fields():
    cfg = parse_config(LEAF)
    leaf = cfg.compounds[0].children[0]
    assert leaf.channel == "draw"
    assert leaf.buffers == frozenset({COLOR, DEPTH})
    assert leaf.range == Range(0, 0.5)
    assert leaf.viewport == Viewport(0, 0, 0.5, 1)
    assert [f.name for f in leaf.output_frames] == ["left_half"]
    assert leaf.is_leaf and leaf.line > 0


def test_inner_compound_with_two_inputs():
    cfg = parse_config(INNER, strict=False)
    comp = cfg.compounds[0].children[2]
    assert comp.input_frames == ["part_a", "part_b"]
    assert comp.effective_tasks() == frozenset({TaskKind.ASSEMBLE, TaskKind.READBACK})
    assert comp.output_frames[0].buffers == frozenset({COLOR})


@pytest.mark.parametrize(
    "text",
    [
        presets.single(),
        presets.sort_first(4),
        presets.sort_last(3, volume=True),
        presets.direct_send(4),
        presets.stream(3),
        presets.pixel(2, 2),
        presets.subpixel(4),
        presets.dplex(3),
        presets.stereo_anaglyph(),
        presets.tiles(3, 64),
        presets.chunks(2, 0.25),
        presets.load_balanced(4, kind="tree_equalizer", mode="2D"),
        presets.cslb_wall(view_equalizer=True),
        presets.dfr(),
        LEAF,
    ],
)
def test_print_parse_round_trip(text):
    printed = print_config(parse_config(text))
    again = parse_config(printed)
    assert print_config(again) == printed
    assert validate(again) == [] or all(d.severity == "warning" for d in validate(again))


def test_equalizer_parameters_parse():
    cfg = parse_config(presets.load_balanced(4, mode="HORIZONTAL", damping=0.25))
    (eq,) = cfg.compounds[0].equalizers
    assert eq.kind is EqualizerKind.LOAD and eq.mode == "HORIZONTAL" and eq.damping == 0.25


def test_pixel_kernel_parse():
    cfg = parse_config(presets.pixel(3, 1))
    kernels = [c.pixel for c in cfg.compounds[0].children]
    assert kernels == [PixelKernel(3, 1, i, 0) for i in range(3)]


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("latency 1\nnode {\n  name \"a\"\n  bogus 3\n}\n", 4, "bogus"),
        ("node { name \"a\" }\ncompound {\n  range [ 0.5 0.2 ]\n}\n", 3, ""),
        ("latency 1\nlatency\n", 2, ""),
        ("compound { viewport [ 0 0 1 ] }", 1, ""),
        ('node { name "a" } @', 1, ""),
        ("compound {\n  pixel [ 2 1 2 0 ]\n}", 2, ""),
    ],
)
def test_syntax_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)
    assert fragment in str(exc.value)


def test_unconnected_frame():
    text = RES + 'compound { channel "dest"\n  inputframe { name "ghost" }\n}\n'
    with pytest.raises(ConfigError, match="unconnected frame"):
        parse_config(text)


def test_unresolved_channel():
    with pytest.raises(ConfigError, match="unresolved channel"):
        parse_config(RES + 'compound { channel "nope" }')


def test_duplicate_output_frame():
    text = RES + """compound { channel "dest"
  compound { channel "draw" outputframe { name "f" } }
  compound { channel "c2" outputframe { name "f" } }
  inputframe { name "f" }
}"""
    msgs = [d.message for d in validate(parse_config(text, strict=False))]
    assert any("duplicate output frame name 'f'" in m for m in msgs)


def test_dplex_coverage_diagnostics():
    text = RES + """compound { channel "dest"
  compound { channel "draw" period 2 phase 0 outputframe { name "a" } }
  compound { channel "c2" period 2 phase 0 outputframe { name "b" } }
  inputframe { name "a" }
  inputframe { name "b" }
}"""
    msgs = [d.message for d in validate(parse_config(text, strict=False))]
    assert "DPlex frame(s) 1 uncovered" in msgs
    assert "DPlex frame(s) 0 double-covered" in msgs


def test_phase_must_be_below_period():
    with pytest.raises(ConfigError, match="phase"):
        parse_config(RES + 'compound { channel "dest" period 2 phase 2 }')


def test_queue_input_cannot_set_viewport():
    text = RES + """compound { channel "dest"
  outputqueue { name "q" tilesize [ 16 16 ] }
  compound { channel "draw" inputqueue { name "q" } viewport [ 0 0 0.5 1 ] outputframe { name "t" } }
  inputframe { name "t" }
}"""
    with pytest.raises(ConfigError, match="input queue"):
        parse_config(text)


def test_unused_channel_is_a_warning():
    diags = validate(parse_config(RES + 'compound { channel "dest" }'))
    assert {d.severity for d in diags} == {"warning"}
    assert any("'c2'" in d.message for d in diags)


def test_valid_config_has_no_diagnostics():
    assert validate(parse_config(presets.sort_first(3))) == []


# -- display model -------------------------------------------------------------------


def _wall_config(views: str) -> str:
    names = [f"s{i}" for i in range(6)]
    segs = "\n".join(
        f'  segment {{ name "{n}" channel "{n}" viewport [ {i % 3}/3 {i // 3 * 0.5} 1/3 0.5 ] }}'.replace(
            f"{i % 3}/3", repr((i % 3) / 3)
        ).replace("1/3", repr(1 / 3))
        for i, n in enumerate(names)
    )
    return (
        presets.resources(names, 300, 200)
        + 'layout { name "L" '
        + views
        + " }\n"
        + 'canvas { name "wall"\n  layout "L"\n'
        + "  wall { bottom_left [ -3 -1 -2 ] bottom_right [ 3 -1 -2 ] top_left [ -3 1 -2 ] }\n"
        + segs
        + "\n}\n"
    )


def test_six_segments_two_views_give_eight_destinations():
    cfg = parse_config(_wall_config('view { name "a" viewport [ 0 0 0.5 1 ] } view { name "b" viewport [ 0.5 0 0.5 1 ] }'))
    dests = derive_destination_channels(cfg)
    assert len(dests) == 8
    # the middle column is shared by both views, split at its centre
    mid = [d for d in dests if d.segment == "s1"]
    assert [d.pvp for d in mid] == [PixelViewport(0, 0, 150, 200), PixelViewport(150, 0, 150, 200)]


def test_view_inside_one_segment():
    cfg = parse_config(_wall_config('view { name "v" viewport [ 0.05 0.1 0.2 0.3 ] }'))
    (dest,) = derive_destination_channels(cfg)
    assert dest.segment == "s0"
    # relative to the segment: x 0.15..0.75 of 300, y 0.2..0.8 of 200
    assert dest.pvp == PixelViewport(45, 40, 180, 120)


def test_destinations_tile_each_view():
    cfg = parse_config(_wall_config('view { name "a" viewport [ 0.1 0.2 0.7 0.6 ] }'))
    dests = derive_destination_channels(cfg)
    area = sum(d.area.w * d.area.h for d in dests)
    assert area == pytest.approx(0.7 * 0.6)
    for i, a in enumerate(dests):
        for b in dests[i + 1 :]:
            assert a.area.intersect(b.area) is None or a.area.intersect(b.area).w * a.area.intersect(b.area).h < 1e-12


def test_destination_wall_is_sub_wall():
    cfg = parse_config(_wall_config('view { name "v" }'))
    dests = {d.segment: d for d in derive_destination_channels(cfg)}
    # canvas wall spans x in [-3, 3]; the top-left segment covers the first third, upper half
    w = dests["s0"].wall
    assert w.bottom_left == pytest.approx((-3, 0, -2))
    assert w.bottom_right == pytest.approx((-1, 0, -2))
    assert w.top_left == pytest.approx((-3, 1, -2))


def test_layout_off_has_no_destinations():
    text = _wall_config('view { name "v" }').replace('layout "L"\n', 'layout "L"\n  active_layout OFF\n')
    assert derive_destination_channels(parse_config(text)) == []
