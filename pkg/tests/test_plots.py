from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

from psun.diagnostics import summarize
from psun.plots import acf_svg, trace_svg


def test_trace_and_acf_are_valid_svg(rng):
    draws = rng.standard_normal((500, 3))
    chain = np.repeat([0, 1], 250)
    names = ["(Intercept)", "a<b", "c"]
    for svg in (trace_svg(draws, chain, names),
                acf_svg([c.acf for c in summarize(draws, chain, names).coefficients], names)):
        root = ET.fromstring(svg)
        assert root.tag.endswith("svg")
    assert "a&lt;b" in trace_svg(draws, chain, names)


def test_constant_trace_renders():
    svg = trace_svg(np.ones((10, 1)), np.zeros(10, dtype=int), ["x"])
    ET.fromstring(svg)
