"""
Plain-text SVG figures: regret curves, violation counts and a 1-D
diagnostic of the GP bounds against the Lipschitz envelope.

Coordinates are printed with fixed precision, so output bytes depend only on
the data.
"""

from __future__ import annotations

import logging
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..bounds import LipschitzSafetyModel, lipschitz_lower_envelope
from ..gp import Dataset, fit_posterior, predict

logger = logging.getLogger(__name__)

__all__ = ["Svg", "render_plots", "regret_svg", "violations_svg", "diagnostic_svg"]

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _f(v: float) -> str:
    return f"{v:.2f}"


class Svg:
    """Minimal SVG builder with data-to-pixel panels."""

    def __init__(self, width: int, height: int):
        self.width, self.height = width, height
        self.items: list[str] = []

    def panel(self, x0, y0, w, h, xlim, ylim):
        return _Panel(self, x0, y0, w, h, xlim, ylim)

    def text(self, x, y, s, size=12, anchor="middle", rotate=0):
        turn = f' transform="rotate({rotate} {_f(x)} {_f(y)})"' if rotate else ""
        self.items.append(f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" '
                          f'text-anchor="{anchor}" font-family="sans-serif"{turn}>{escape(s)}</text>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        bg = f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>'
        return "\n".join([head, bg, *self.items, "</svg>"]) + "\n"


class _Panel:
    def __init__(self, svg, x0, y0, w, h, xlim, ylim):
        self.svg, self.x0, self.y0, self.w, self.h = svg, x0, y0, w, h
        lo, hi = ylim
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.xlim, self.ylim = xlim, (lo, hi)

    def px(self, x):
        lo, hi = self.xlim
        return self.x0 + (np.asarray(x, dtype=float) - lo) / ((hi - lo) or 1.0) * self.w

    def py(self, y):
        lo, hi = self.ylim
        return self.y0 + self.h - (np.asarray(y, dtype=float) - lo) / (hi - lo) * self.h

    def _pts(self, x, y):
        return " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(self.px(x), self.py(y)))

    def line(self, x, y, color, width=1.0, opacity=1.0, dash=None):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.svg.items.append(f'<polyline points="{self._pts(x, y)}" fill="none" stroke="{color}" '
                              f'stroke-width="{width}" stroke-opacity="{opacity}"{extra}/>')

    def band(self, x, lo, hi, color, opacity=0.2):
        x = np.asarray(x, dtype=float)
        pts = self._pts(np.concatenate([x, x[::-1]]), np.concatenate([hi, np.asarray(lo)[::-1]]))
        self.svg.items.append(f'<polygon points="{pts}" fill="{color}" fill-opacity="{opacity}" stroke="none"/>')

    def dots(self, x, y, color, r=3.0):
        for a, b in zip(self.px(x), self.py(y)):
            self.svg.items.append(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="{r}" fill="{color}"/>')

    def rect(self, x0, y0, x1, y1, color, opacity=1.0):
        px0, px1 = sorted((float(self.px(x0)), float(self.px(x1))))
        py0, py1 = sorted((float(self.py(y0)), float(self.py(y1))))
        self.svg.items.append(f'<rect x="{_f(px0)}" y="{_f(py0)}" width="{_f(px1 - px0)}" '
                              f'height="{_f(py1 - py0)}" fill="{color}" fill-opacity="{opacity}"/>')

    def frame(self, title="", xlabel="", ylabel="", ticks=5, xticks=True):
        s = self.svg
        s.items.append(f'<rect x="{_f(self.x0)}" y="{_f(self.y0)}" width="{_f(self.w)}" height="{_f(self.h)}" '
                       f'fill="none" stroke="black" stroke-width="1"/>')
        for v in np.linspace(*self.xlim, ticks) if xticks else ():
            s.text(float(self.px(v)), self.y0 + self.h + 15, f"{v:.3g}", size=10)
        for v in np.linspace(*self.ylim, ticks):
            s.text(self.x0 - 5, float(self.py(v)) + 3, f"{v:.3g}", size=10, anchor="end")
        if title:
            s.text(self.x0 + self.w / 2, self.y0 - 8, title, size=13)
        if xlabel:
            s.text(self.x0 + self.w / 2, self.y0 + self.h + 32, xlabel, size=11)
        if ylabel:
            s.text(self.x0 - 50, self.y0 + self.h / 2, ylabel, size=11, rotate=-90)


def regret_svg(summary) -> str:
    """One panel per algorithm: thin per-function means, thick overall mean, +-1 std band."""
    algorithms = list(dict.fromkeys(r.algorithm for r in summary.aggregates))
    curves = {}
    lo, hi = np.inf, -np.inf
    for alg in algorithms:
        rows = [r for r in summary.aggregates if r.algorithm == alg]
        by_fn = {}
        for r in rows:
            by_fn.setdefault(r.function_id, []).append(r)
        overall = by_fn.pop("ALL")
        t = np.array([r.t for r in overall])
        mean = np.array([r.mean_simple_regret for r in overall])
        std = np.array([r.std_simple_regret for r in overall])
        thin = [np.array([r.mean_simple_regret for r in v]) for v in by_fn.values()]
        curves[alg] = (t, mean, std, thin)
        lo = min(lo, float((mean - std).min()), *(float(c.min()) for c in thin))
        hi = max(hi, float((mean + std).max()), *(float(c.max()) for c in thin))
    pw, ph = 320, 240
    svg = Svg(80 + len(algorithms) * (pw + 70), ph + 100)
    for i, alg in enumerate(algorithms):
        t, mean, std, thin = curves[alg]
        color = PALETTE[i % len(PALETTE)]
        p = svg.panel(80 + i * (pw + 70), 40, pw, ph, (float(t[0]), float(t[-1])), (lo, hi))
        p.band(t, mean - std, mean + std, color)
        for c in thin:
            p.line(t, c, color, width=0.6, opacity=0.5)
        p.line(t, mean, color, width=2.5)
        p.frame(alg, "iteration t", "simple regret" if i == 0 else "")
    return svg.render()


def violations_svg(summary) -> str:
    algorithms = list(dict.fromkeys(r.algorithm for r in summary.aggregates))
    totals = {a: sum(m.violation_count for m in summary.runs if m.algorithm == a) for a in algorithms}
    pw, ph = max(200, 90 * len(algorithms)), 220
    svg = Svg(pw + 120, ph + 100)
    top = max(1, max(totals.values()))
    p = svg.panel(80, 40, pw, ph, (0.0, float(len(algorithms))), (0.0, float(top)))
    for i, alg in enumerate(algorithms):
        p.rect(i + 0.2, 0.0, i + 0.8, float(totals[alg]), PALETTE[i % len(PALETTE)])
        svg.text(float(p.px(i + 0.5)), 40 + ph + 32, alg, size=10)
        svg.text(float(p.px(i + 0.5)), float(p.py(totals[alg])) - 4, str(totals[alg]), size=10)
    p.frame("safety violations (queries with f < h)", "", "count", ticks=min(top + 1, 5), xticks=False)
    return svg.render()


def diagnostic_svg(problem, trace, config) -> str:
    """f*, GP mean and band, Lipschitz envelope and certified safe set of one 1-D run."""
    from .runner import _schedule

    params = config.algorithms[trace.algorithm]
    grid = problem.grid
    x = grid.points[:, 0]
    xs = np.array([r.x for r in trace.records]).reshape(-1, 1)
    ys = np.array([r.y for r in trace.records])
    data = Dataset(grid.lower, grid.upper, xs, ys)
    lam = config.lam if params.lam < 0 else params.lam
    post = fit_posterior(config.function.kernel_spec(), data, lam)
    beta = _schedule(params.schedule(), config)(post)
    mean, std = predict(post, grid.points)
    noise_bound = config.noise.bound if params.noise_bound < 0 else params.noise_bound
    lipschitz = problem.lipschitz if params.lipschitz == "oracle" else float(params.lipschitz)
    env = lipschitz_lower_envelope(data, LipschitzSafetyModel(lipschitz, noise_bound), grid.points)
    truth = problem.function(grid.points)
    h = problem.threshold
    lo = float(min(truth.min(), (mean - beta * std).min()))
    hi = float(max(truth.max(), (mean + beta * std).max()))
    svg = Svg(560, 340)
    p = svg.panel(80, 40, 440, 240, (float(x[0]), float(x[-1])), (lo, hi))
    p.band(x, mean - beta * std, mean + beta * std, PALETTE[0])
    p.line(x, mean, PALETTE[0], width=1.5)
    p.line(x, truth, "black", width=2.0)
    shown = env >= lo
    if shown.any():
        p.line(x[shown], env[shown], "#ff7f0e", width=1.5)
    p.line(x[[0, -1]], [h, h], "gray", width=1.0, dash="4,3")
    safe = env >= h
    safe[problem.seed_index] = True
    dx = (x[-1] - x[0]) / max(1, x.size - 1)
    band_lo, band_hi = lo, lo + 0.03 * (hi - lo)
    for xi in x[safe]:
        p.rect(xi - dx / 2, band_lo, xi + dx / 2, band_hi, "#7f7f7f", opacity=0.6)
    p.dots(xs[:, 0], ys, "black", r=2.5)
    p.frame(f"{trace.algorithm}: function {problem.function_id}, seed {trace.seed}", "x", "f")
    return svg.render()


def render_plots(summary, traces, out, problems=(), config=None) -> list[Path]:
    """Write ``regret.svg``, ``violations.svg`` and, for 1-D grid runs, ``diagnostic_1d.svg``."""
    out = Path(out)
    traces = list(traces)
    if not traces:
        logger.warning("no traces; skipping plots")
        return []
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "regret.svg", out / "violations.svg"]
    paths[0].write_text(regret_svg(summary))
    paths[1].write_text(violations_svg(summary))
    problems = list(problems)
    if config is not None and problems and problems[0].grid.dim == 1:
        first = traces[0]
        problem = next(p for p in problems if p.function_id == first.function_id)
        path = out / "diagnostic_1d.svg"
        path.write_text(diagnostic_svg(problem, first, config))
        paths.append(path)
    return paths
