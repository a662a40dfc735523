"""Tests for trajectory rendering.

The renderer promises byte-stable output for identical traces, so the main
check is a golden-file comparison against a committed trace and image.
"""

import json
from pathlib import Path

from corrsearch.render import render_trace_file, render_trajectory

DATA = Path(__file__).parent / "data"


def load_golden_trace():
    return json.loads((DATA / "golden_trace.json").read_text())


def test_rendering_twice_is_byte_identical(tmp_path):
    trace = load_golden_trace()
    a = render_trajectory(trace, tmp_path / "a.svg")
    b = render_trajectory(trace, tmp_path / "b.svg")
    assert a.read_bytes() == b.read_bytes()


def test_render_matches_the_committed_golden_image(tmp_path):
    out = render_trace_file(DATA / "golden_trace.json", tmp_path / "fresh.svg")
    assert out.read_bytes() == (DATA / "golden_trace.svg").read_bytes()


def test_render_from_file_equals_render_from_dict(tmp_path):
    via_file = render_trace_file(DATA / "golden_trace.json", tmp_path / "f.svg")
    via_dict = render_trajectory(load_golden_trace(), tmp_path / "d.svg")
    assert via_file.read_bytes() == via_dict.read_bytes()


def test_empty_trace_renders_the_map_alone(tmp_path):
    trace = load_golden_trace()
    trace["steps"] = []
    out = render_trajectory(trace, tmp_path / "empty.svg")
    data = out.read_bytes()
    assert data.startswith(b"<?xml")
    assert b"<svg" in data
    assert len(data) > 1000


def test_all_headings_draw_a_tick(tmp_path):
    trace = load_golden_trace()
    cells = [(1, 1), (2, 1), (3, 1), (4, 1), (4, 3), (2, 3), (1, 3), (1, 2)]
    trace["steps"] = [
        {"pose": [c, r, heading]}
        for (c, r), heading in zip(cells, range(0, 360, 45))
    ]
    out = render_trajectory(trace, tmp_path / "ticks.svg")
    assert out.read_bytes().startswith(b"<?xml")


def test_png_output_is_supported(tmp_path):
    out = render_trajectory(load_golden_trace(), tmp_path / "shot.png")
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_svg_carries_a_glyph_per_step():
    trace = load_golden_trace()
    svg = (DATA / "golden_trace.svg").read_text()
    # one viewpoint circle per pose (initial pose plus one per step)
    assert svg.count("<use") >= len(trace["steps"]) + 1
