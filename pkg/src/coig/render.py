"""Deterministic raster rendering of scene documents for the monitor UI:
colored, labeled boxes at the five canonical positions."""

from __future__ import annotations

import io

from PIL import Image, ImageColor, ImageDraw

from .scene import SceneDocument

CANVAS = (512, 512)

_BOXES = {
    "left": (16, 192, 160, 320),
    "right": (352, 192, 496, 320),
    "top": (184, 16, 328, 144),
    "bottom": (184, 368, 328, 496),
    "center": (184, 192, 328, 320),
}

_BACKGROUND_TINT = (235, 235, 228)


def _fill(color: str | None) -> tuple[int, int, int]:
    if not color:
        return (200, 200, 200)
    try:
        return ImageColor.getrgb(color.split()[0])
    except ValueError:
        return (160, 160, 160)


def render_scene_png(scene: SceneDocument) -> bytes:
    img = Image.new("RGB", CANVAS, _BACKGROUND_TINT if scene.background else (255, 255, 255))
    draw = ImageDraw.Draw(img)
    if scene.background:
        draw.text((8, CANVAS[1] - 18), f"bg: {scene.background}", fill=(90, 90, 90))
    for entity in scene.entities:
        box = _BOXES.get(entity.position, _BOXES["center"])
        outline = (120, 120, 120) if entity.placeholder else (20, 20, 20)
        draw.rectangle(box, fill=_fill(entity.color), outline=outline, width=3)
        label = entity.cls if not entity.placeholder else f"[{entity.cls}]"
        draw.text((box[0] + 6, box[1] + 6), label, fill=(0, 0, 0))
        details = ", ".join(v for v in (entity.shape, entity.texture) if v)
        if details:
            draw.text((box[0] + 6, box[1] + 22), details, fill=(0, 0, 0))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
