"""Deterministic top-down vector rendering of scenes and trajectories.

Output is hand-assembled SVG with fixed element order and 2-decimal
precision, so identical inputs yield byte-identical documents. World +y
points up on screen (the image y axis is flipped); an axes legend states
the left/right/up/down convention. Trajectories are drawn as a polyline
with one gradient-colored marker per pose, early poses at the start color
and the final pose at the end color. A small raster variant exists for
backends that require bitmaps.
"""

from __future__ import annotations

import io
import math

from PIL import Image, ImageDraw

from . import config
from .navigation import Trajectory
from .scene import SceneGraph

MARGIN = 40.0

_CATEGORY_FILL = {
    "bed": "#AECBFA",
    "sofa": "#B7E1C0",
    "chair": "#F9CFA0",
    "fridge": "#D9B8F0",
    "table": "#F5E6A8",
}
_DEFAULT_FILL = "#D0D0D0"


def _hex_to_rgb(color: str) -> tuple[int, int, int]:
    c = color.lstrip("#")
    return int(c[0:2], 16), int(c[2:4], 16), int(c[4:6], 16)


def _lerp_color(a: str, b: str, t: float) -> str:
    ra, ga, ba = _hex_to_rgb(a)
    rb, gb, bb = _hex_to_rgb(b)
    return "#{:02X}{:02X}{:02X}".format(
        round(ra + (rb - ra) * t),
        round(ga + (gb - ga) * t),
        round(ba + (bb - ba) * t),
    )


def _f(x: float) -> str:
    return f"{x:.2f}"


class _Canvas:
    def __init__(self, scene: SceneGraph, scale: float):
        self.scale = scale
        self.min = scene.bounds.min
        self.max = scene.bounds.max
        self.w = scene.bounds.width * scale + 2 * MARGIN
        self.h = scene.bounds.height * scale + 2 * MARGIN

    def x(self, wx: float) -> float:
        return MARGIN + (wx - self.min[0]) * self.scale

    def y(self, wy: float) -> float:
        # world +y is screen-up
        return MARGIN + (self.max[1] - wy) * self.scale


def render_scene(scene: SceneGraph, traj: Trajectory | None = None,
                 target: str | None = None, scale: float | None = None,
                 gradient: tuple[str, str] | None = None) -> bytes:
    """Render a scene (optionally with a trajectory and target cross) to SVG."""
    if scale is None:
        scale = config.DEFAULTS["render.scale"]
    if gradient is None:
        gradient = (config.DEFAULTS["render.gradient_start"],
                    config.DEFAULTS["render.gradient_end"])
    c = _Canvas(scene, scale)
    parts: list[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(c.w)}" height="{_f(c.h)}" '
        f'viewBox="0 0 {_f(c.w)} {_f(c.h)}">'
    )
    parts.append(f'<rect x="0" y="0" width="{_f(c.w)}" height="{_f(c.h)}" fill="#FFFFFF"/>')
    parts.append(
        f'<rect class="bounds" x="{_f(c.x(c.min[0]))}" y="{_f(c.y(c.max[1]))}" '
        f'width="{_f(scene.bounds.width * scale)}" height="{_f(scene.bounds.height * scale)}" '
        f'fill="#FAFAF5" stroke="#222222" stroke-width="3"/>'
    )

    for d in sorted(scene.doorways, key=lambda d: d.id):
        (x1, y1), (x2, y2) = d.segment
        parts.append(
            f'<line class="doorway" id="door-{d.id}" x1="{_f(c.x(x1))}" y1="{_f(c.y(y1))}" '
            f'x2="{_f(c.x(x2))}" y2="{_f(c.y(y2))}" stroke="#8B5A2B" stroke-width="6"/>'
        )

    for o in sorted(scene.objects, key=lambda o: o.id):
        hw, hd = o.extents
        cx, cy = c.x(o.position[0]), c.y(o.position[1])
        fill = _CATEGORY_FILL.get(o.category, _DEFAULT_FILL)
        # SVG rotation is clockwise in screen space; world CCW maps to negative
        parts.append(
            f'<g class="object" id="obj-{o.id}" '
            f'transform="translate({_f(cx)} {_f(cy)}) rotate({_f(-o.rotation)})">'
            f'<rect x="{_f(-hw * scale)}" y="{_f(-hd * scale)}" '
            f'width="{_f(2 * hw * scale)}" height="{_f(2 * hd * scale)}" '
            f'fill="{fill}" stroke="#333333" stroke-width="1.5"/>'
            f'</g>'
        )
        parts.append(
            f'<text class="label" x="{_f(cx)}" y="{_f(cy)}" font-size="11" '
            f'font-family="monospace" text-anchor="middle">{o.id}</text>'
        )

    target_id = target or (traj.task.target_object_id if traj else None)
    if target_id and scene.get(target_id) is not None:
        tx, ty = scene.get(target_id).position
        px, py = c.x(tx), c.y(ty)
        r = 9.0
        parts.append(
            f'<g class="target" id="target-{target_id}" stroke="{gradient[1]}" stroke-width="3">'
            f'<line x1="{_f(px - r)}" y1="{_f(py - r)}" x2="{_f(px + r)}" y2="{_f(py + r)}"/>'
            f'<line x1="{_f(px - r)}" y1="{_f(py + r)}" x2="{_f(px + r)}" y2="{_f(py - r)}"/>'
            f'</g>'
        )

    if traj is not None and traj.poses:
        pts = " ".join(
            f"{_f(c.x(p[0]))},{_f(c.y(p[1]))}" for _, p, _ in traj.poses
        )
        parts.append(
            f'<polyline class="trajectory" points="{pts}" fill="none" '
            f'stroke="{gradient[0]}" stroke-width="2" stroke-opacity="0.6"/>'
        )
        n = len(traj.poses)
        for i, (_, p, _) in enumerate(traj.poses):
            t = i / (n - 1) if n > 1 else 0.0
            parts.append(
                f'<circle class="pose" cx="{_f(c.x(p[0]))}" cy="{_f(c.y(p[1]))}" r="2.2" '
                f'fill="{_lerp_color(gradient[0], gradient[1], t)}"/>'
            )

    # axes legend: the left/right/up/down convention used by edit instructions
    lx, ly = 14.0, c.h - 14.0
    parts.append(
        f'<g class="legend" font-size="10" font-family="monospace" stroke="#222222">'
        f'<line x1="{_f(lx)}" y1="{_f(ly)}" x2="{_f(lx + 24)}" y2="{_f(ly)}"/>'
        f'<line x1="{_f(lx)}" y1="{_f(ly)}" x2="{_f(lx)}" y2="{_f(ly - 24)}"/>'
        f'<text x="{_f(lx + 27)}" y="{_f(ly + 3)}" stroke="none">right = +x</text>'
        f'<text x="{_f(lx - 4)}" y="{_f(ly - 28)}" stroke="none">up = +y</text>'
        f'</g>'
    )
    parts.append(
        f'<text class="title" x="{_f(MARGIN)}" y="{_f(MARGIN - 10)}" font-size="12" '
        f'font-family="monospace">{scene.scene_id} (grid 100x100)</text>'
    )
    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode("utf-8")


def render_scene_png(scene: SceneGraph, traj: Trajectory | None = None,
                     target: str | None = None, scale: float | None = None,
                     gradient: tuple[str, str] | None = None) -> bytes:
    """Raster variant for backends that cannot consume vector documents."""
    if scale is None:
        scale = config.DEFAULTS["render.scale"]
    if gradient is None:
        gradient = (config.DEFAULTS["render.gradient_start"],
                    config.DEFAULTS["render.gradient_end"])
    c = _Canvas(scene, scale)
    img = Image.new("RGB", (math.ceil(c.w), math.ceil(c.h)), "#FFFFFF")
    draw = ImageDraw.Draw(img)
    draw.rectangle(
        [c.x(c.min[0]), c.y(c.max[1]), c.x(c.max[0]), c.y(c.min[1])],
        fill="#FAFAF5", outline="#222222", width=3,
    )
    for d in sorted(scene.doorways, key=lambda d: d.id):
        (x1, y1), (x2, y2) = d.segment
        draw.line([c.x(x1), c.y(y1), c.x(x2), c.y(y2)], fill="#8B5A2B", width=6)
    for o in sorted(scene.objects, key=lambda o: o.id):
        corners = [(c.x(px), c.y(py)) for px, py in o.footprint.corners]
        draw.polygon(corners, fill=_CATEGORY_FILL.get(o.category, _DEFAULT_FILL),
                     outline="#333333")
        draw.text((c.x(o.position[0]), c.y(o.position[1])), o.id,
                  fill="#000000", anchor="mm")
    target_id = target or (traj.task.target_object_id if traj else None)
    if target_id and scene.get(target_id) is not None:
        tx, ty = scene.get(target_id).position
        px, py, r = c.x(tx), c.y(ty), 9
        draw.line([px - r, py - r, px + r, py + r], fill=gradient[1], width=3)
        draw.line([px - r, py + r, px + r, py - r], fill=gradient[1], width=3)
    if traj is not None and traj.poses:
        n = len(traj.poses)
        for i in range(n - 1):
            a = traj.poses[i][1]
            b = traj.poses[i + 1][1]
            color = _lerp_color(gradient[0], gradient[1], i / max(n - 1, 1))
            draw.line([c.x(a[0]), c.y(a[1]), c.x(b[0]), c.y(b[1])], fill=color, width=2)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
