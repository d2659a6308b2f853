"""
This file contains the SVG bar plots of feature importance: one chart per ranking or tally, and a grid of
charts for scheme x seed comparisons. Output is plain text built line by line, identical input gives
identical bytes.
"""
from __future__ import annotations

from typing import Mapping, Sequence, Union

BAR_COLOR = "#1f77b4"
WIDTH = 640
LABEL_WIDTH = 170
SCORE_WIDTH = 80
BAR_HEIGHT = 22
BAR_GAP = 6
TITLE_HEIGHT = 40
PANEL_COLUMNS = 3

Scores = Union[Mapping[str, float], Sequence[tuple[str, float]]]


def _escape(text: str) -> str:
    return (
        str(text).replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
        .replace("'", "&#39;")
    )


def _ordered(scores: Scores) -> list[tuple[str, float]]:
    items = list(scores.items()) if isinstance(scores, Mapping) else [tuple(item) for item in scores]
    if not items:
        raise ValueError("a bar chart needs at least one feature")
    # negative importances draw as empty bars but keep their printed value
    return sorted(((str(name), float(score)) for name, score in items), key=lambda item: (-item[1], item[0]))


def _bars(items: list[tuple[str, float]], left: float, top: float, width: float) -> list[str]:
    bar_space = width - LABEL_WIDTH - SCORE_WIDTH
    peak = max(max(score for _, score in items), 0.0)
    lines = []
    for position, (name, score) in enumerate(items):
        y = top + position * (BAR_HEIGHT + BAR_GAP)
        length = bar_space * max(score, 0.0) / peak if peak > 0 else 0.0
        lines.append(f'<text x="{left + LABEL_WIDTH - 8:.1f}" y="{y + BAR_HEIGHT * 0.7:.1f}" text-anchor="end" '
                     f'font-size="12" font-family="Arial">{_escape(name)}</text>')
        lines.append(f'<rect x="{left + LABEL_WIDTH:.1f}" y="{y:.1f}" width="{length:.1f}" height="{BAR_HEIGHT}" '
                     f'fill="{BAR_COLOR}"/>')
        lines.append(f'<text x="{left + LABEL_WIDTH + length + 6:.1f}" y="{y + BAR_HEIGHT * 0.7:.1f}" '
                     f'font-size="12" font-family="Arial">{score:.4g}</text>')
    return lines


def _panel_height(n_bars: int) -> int:
    return TITLE_HEIGHT + n_bars * (BAR_HEIGHT + BAR_GAP) + BAR_GAP


def render_svg_bars(scores: Scores, title: str) -> str:
    """
    Input: feature name -> score (a ranking's importances or a tally's borda points)
    Returns an SVG document with one horizontal bar per feature, longest first
    """
    items = _ordered(scores)
    height = _panel_height(len(items))
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
             f'viewBox="0 0 {WIDTH} {height}">',
             '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
             f'<text x="{WIDTH / 2:.1f}" y="26" text-anchor="middle" font-size="18" '
             f'font-family="Arial">{_escape(title)}</text>']
    lines.extend(_bars(items, 0, TITLE_HEIGHT, WIDTH))
    lines.append('</svg>')
    return "\n".join(lines) + "\n"


def render_svg_grid(panels: Sequence[tuple[str, Scores]], title: str) -> str:
    """Bar charts laid out PANEL_COLUMNS per row, in the given panel order."""
    if not panels:
        raise ValueError("a grid needs at least one panel")
    ordered = [(panel_title, _ordered(scores)) for panel_title, scores in panels]
    columns = min(PANEL_COLUMNS, len(ordered))
    rows = [ordered[start:start + columns] for start in range(0, len(ordered), columns)]
    row_heights = [max(_panel_height(len(items)) for _, items in row) for row in rows]
    width = columns * WIDTH
    height = TITLE_HEIGHT + sum(row_heights)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
             f'<text x="{width / 2:.1f}" y="28" text-anchor="middle" font-size="22" '
             f'font-family="Arial">{_escape(title)}</text>']
    top = TITLE_HEIGHT
    for row, row_height in zip(rows, row_heights):
        for column, (panel_title, items) in enumerate(row):
            left = column * WIDTH
            lines.append(f'<text x="{left + WIDTH / 2:.1f}" y="{top + 24:.1f}" text-anchor="middle" '
                         f'font-size="15" font-family="Arial">{_escape(panel_title)}</text>')
            lines.extend(_bars(items, left, top + TITLE_HEIGHT, WIDTH))
        top += row_height
    lines.append('</svg>')
    return "\n".join(lines) + "\n"
