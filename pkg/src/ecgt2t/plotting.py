"""Twelve-panel SVG overlays of reference and generated records."""

from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

from .errors import RateMismatch, WindowTooLong
from .signal_core import ALL_LEADS, EcgRecord

COLORS = {"ref": "black", "t2t": "blue", "s2e": "red"}
PANEL_W, PANEL_H = 360, 120
COLS, ROWS = 3, 4
MARGIN = 20


def _fmt(v):
    return f"{v:.2f}"


def plot_overlay(ref: EcgRecord, t2t: EcgRecord | None = None, s2e: EcgRecord | None = None,
                 window_s: float = 2.0, ref_offset_s: float = 0.0) -> str:
    """SVG text with one panel per lead, reference in black, T2T blue, S2E red.

    Every series plots ``window_s`` seconds from its start; the reference
    starts ``ref_offset_s`` seconds in so it lines up with a generated window.
    """
    fs = ref.sampling_rate
    series = {"ref": ref, "t2t": t2t, "s2e": s2e}
    series = {k: v for k, v in series.items() if v is not None}
    for name, rec in series.items():
        if rec.sampling_rate != fs:
            raise RateMismatch(f"{name} is sampled at {rec.sampling_rate} Hz, reference at {fs} Hz")
    n = int(round(window_s * fs))
    offset = int(round(ref_offset_s * fs))
    for name, rec in series.items():
        start = offset if name == "ref" else 0
        if n < 2 or start + n > rec.n_samples:
            raise WindowTooLong(f"{window_s} s window does not fit the {name} record")

    width = COLS * PANEL_W + 2 * MARGIN
    height = ROWS * PANEL_H + 2 * MARGIN
    svg = ET.Element("svg", {"xmlns": "http://www.w3.org/2000/svg", "width": str(width),
                             "height": str(height), "viewBox": f"0 0 {width} {height}"})
    ET.SubElement(svg, "rect", {"x": "0", "y": "0", "width": str(width), "height": str(height),
                                "fill": "white"})
    for k, lead in enumerate(ALL_LEADS):
        col, row = k % COLS, k // COLS
        x0 = MARGIN + col * PANEL_W
        y0 = MARGIN + row * PANEL_H
        g = ET.SubElement(svg, "g", {"class": "panel", "id": f"panel-{lead.name}"})
        ET.SubElement(g, "rect", {"x": str(x0), "y": str(y0), "width": str(PANEL_W),
                                  "height": str(PANEL_H), "fill": "none", "stroke": "#cccccc"})
        label = ET.SubElement(g, "text", {"x": str(x0 + 6), "y": str(y0 + 16),
                                          "font-family": "sans-serif", "font-size": "12"})
        label.text = lead.name
        traces = {}
        for name, rec in series.items():
            if lead in rec.leads:
                start = offset if name == "ref" else 0
                traces[name] = rec.leads[lead][start:start + n]
        if not traces:
            continue
        lo = min(float(t.min()) for t in traces.values())
        hi = max(float(t.max()) for t in traces.values())
        span = hi - lo if hi > lo else 1.0
        xs = x0 + np.arange(n) * (PANEL_W / (n - 1))
        for name, trace in traces.items():
            ys = y0 + PANEL_H - 8 - (trace - lo) / span * (PANEL_H - 28)
            points = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(xs, ys))
            ET.SubElement(g, "polyline", {"class": name, "points": points, "fill": "none",
                                          "stroke": COLORS[name], "stroke-width": "1"})
    ET.indent(svg)
    return ET.tostring(svg, encoding="unicode") + "\n"
