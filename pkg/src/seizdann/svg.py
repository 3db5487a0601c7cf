"""Minimal hand-rolled SVG line plots (no plotting dependency).

Two views: a per-window probability trace with the decision threshold
drawn across it, and unit-square curve overlays for ROC/PR point files.
CSV remains the primary artifact; these are convenience renderings.
"""

from __future__ import annotations

import numpy as np

__all__ = ["probability_trace_svg", "curve_svg"]

_W, _H = 720, 320
_MARGIN = 48
_COLORS = ("#1f6fb2", "#c23b22", "#2e8b57", "#8456a8", "#b8860b", "#444444")


def _esc(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">'
        f"{_esc(title)}</text>",
    ]


def _frame(x_label: str, y_label: str) -> list[str]:
    x0, y0 = _MARGIN, _H - _MARGIN
    x1, y1 = _W - _MARGIN, _MARGIN
    parts = [
        f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
        'fill="none" stroke="#333"/>',
        f'<text x="{(x0 + x1) / 2}" y="{_H - 10}" text-anchor="middle">'
        f"{_esc(x_label)}</text>",
        f'<text x="14" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {(y0 + y1) / 2})">{_esc(y_label)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        y = y0 - frac * (y0 - y1)
        parts.append(
            f'<text x="{x0 - 6}" y="{y + 4}" text-anchor="end">{frac:g}</text>'
        )
    return parts


def _scale(xs: np.ndarray, ys: np.ndarray) -> str:
    x0, y0 = _MARGIN, _H - _MARGIN
    x1, y1 = _W - _MARGIN, _MARGIN
    px = x0 + xs * (x1 - x0)
    py = y0 - ys * (y0 - y1)
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))


def probability_trace_svg(
    probs: np.ndarray,
    tau: float,
    labels: np.ndarray | None = None,
    title: str = "per-window seizure probability",
) -> str:
    probs = np.asarray(probs, dtype=np.float64)
    n = probs.size
    parts = _header(title) + _frame("window", "probability")
    x0, y0 = _MARGIN, _H - _MARGIN
    x1, y1 = _W - _MARGIN, _MARGIN
    xs = np.arange(n) / max(n - 1, 1)
    if labels is not None:
        labels = np.asarray(labels)
        # Shade the true seizure extent behind the trace.
        on = np.flatnonzero(labels == 1)
        if on.size:
            splits = np.flatnonzero(np.diff(on) > 1) + 1
            for run in np.split(on, splits):
                lo = x0 + (run[0] / max(n - 1, 1)) * (x1 - x0)
                hi = x0 + (run[-1] / max(n - 1, 1)) * (x1 - x0)
                parts.append(
                    f'<rect x="{lo:.2f}" y="{y1}" width="{max(hi - lo, 1):.2f}" '
                    f'height="{y0 - y1}" fill="#f4c7c3" opacity="0.6"/>'
                )
    ty = y0 - tau * (y0 - y1)
    parts.append(
        f'<line x1="{x0}" y1="{ty:.2f}" x2="{x1}" y2="{ty:.2f}" '
        'stroke="#888" stroke-dasharray="6,4"/>'
    )
    parts.append(
        f'<text x="{x1 - 4}" y="{ty - 5:.2f}" text-anchor="end" fill="#666">'
        f"threshold {tau:.3f}</text>"
    )
    parts.append(
        f'<polyline points="{_scale(xs, np.clip(probs, 0, 1))}" fill="none" '
        f'stroke="{_COLORS[0]}" stroke-width="1.5"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def curve_svg(
    curves: list[tuple[str, np.ndarray, np.ndarray]],
    x_label: str,
    y_label: str,
    title: str,
    diagonal: bool = False,
) -> str:
    """Overlay (name, x, y) unit-square curves, e.g. ROC or PR points."""
    parts = _header(title) + _frame(x_label, y_label)
    x0, y0 = _MARGIN, _H - _MARGIN
    x1, y1 = _W - _MARGIN, _MARGIN
    if diagonal:
        parts.append(
            f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="#bbb" '
            'stroke-dasharray="4,4"/>'
        )
    for i, (name, xs, ys) in enumerate(curves):
        color = _COLORS[i % len(_COLORS)]
        pts = _scale(
            np.clip(np.asarray(xs, dtype=np.float64), 0, 1),
            np.clip(np.asarray(ys, dtype=np.float64), 0, 1),
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            'stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{x1 - 8}" y="{y1 + 16 + 14 * i}" text-anchor="end" '
            f'fill="{color}">{_esc(name)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
