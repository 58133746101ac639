import pytest

from closed_geodesics import boundary_geodesic
from svg_render import PADDING, ChartFrame, render_torus, write_svg


def test_chart_frame_corners(rect_torus):
    frame = ChartFrame(rect_torus.polygon, size=500)
    umin, umax, vmin, vmax = rect_torus.polygon.bounding_box()
    assert frame(umin, vmax) == pytest.approx((PADDING, PADDING))
    x, y = frame(umax, vmin)
    assert PADDING < x <= 500 - PADDING + 1e-9
    assert PADDING < y <= 500 - PADDING + 1e-9


def test_render_writes_svg(tmp_path, rect_torus):
    drawing = render_torus(rect_torus, leaves="both", leaf_count=5, geodesic=boundary_geodesic(rect_torus))
    path = write_svg(drawing, tmp_path / "figures" / "rect.svg")
    assert path.exists()
    text = path.read_text()
    assert text.lstrip().startswith("<?xml") or "<svg" in text[:200]
    assert "rectangle torus" in text
    for pairing in rect_torus.pairings:
        assert f">{pairing.name}<" in text
        assert f">{pairing.name}'<" in text


def test_render_without_overlays(tmp_path, l_torus):
    bare = write_svg(render_torus(l_torus), tmp_path / "bare.svg").read_text()
    leafy = write_svg(render_torus(l_torus, leaves="alpha", leaf_count=8), tmp_path / "leafy.svg").read_text()
    assert "L torus" in bare
    assert len(leafy) > len(bare)


def test_render_is_deterministic(tmp_path, rect_torus):
    first = write_svg(render_torus(rect_torus, leaves="beta", leaf_count=6), tmp_path / "one.svg")
    second = write_svg(render_torus(rect_torus, leaves="beta", leaf_count=6), tmp_path / "two.svg")
    assert first.read_bytes() == second.read_bytes()
