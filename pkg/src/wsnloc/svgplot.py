"""Static SVG renderings of localization artifacts.

The writer is deliberately hand-rolled: output bytes are a pure function
of the input data (fixed decimal formatting, no timestamps, no ids), so
re-running an experiment reproduces identical files.
"""

from __future__ import annotations

__all__ = ["emit_svg"]

_SIZE = 640.0
_MARGIN = 60.0
_STYLE = (
    "text { font: 12px sans-serif; fill: #333; }"
    " .axis { stroke: #666; stroke-width: 1; }"
    " .true-node { fill: #1f77b4; }"
    " .est-node { fill: none; stroke: #d62728; stroke-width: 1.2; }"
    " .anchor { fill: #2ca02c; }"
    " .err { stroke: #999; stroke-width: 0.7; }"
    " .pt { fill: #d62728; }"
    " .curve { fill: none; stroke: #1f77b4; stroke-width: 1.5; }"
)


def _fmt(x: float) -> str:
    return f"{x:.3f}"


class _Canvas:
    def __init__(self, xmin, xmax, ymin, ymax):
        self.xmin, self.xmax = xmin, xmax
        self.ymin, self.ymax = ymin, ymax
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(_SIZE)}" '
            f'height="{int(_SIZE)}" viewBox="0 0 {int(_SIZE)} {int(_SIZE)}">',
            f"<style>{_STYLE}</style>",
        ]

    def x(self, v):
        span = self.xmax - self.xmin or 1.0
        return _MARGIN + (v - self.xmin) / span * (_SIZE - 2 * _MARGIN)

    def y(self, v):
        span = self.ymax - self.ymin or 1.0
        return _SIZE - _MARGIN - (v - self.ymin) / span * (_SIZE - 2 * _MARGIN)

    def axes(self, xlabel, ylabel):
        x0, y0 = _MARGIN, _SIZE - _MARGIN
        x1, y1 = _SIZE - _MARGIN, _MARGIN
        self.parts.append(f'<line class="axis" x1="{_fmt(x0)}" y1="{_fmt(y0)}" '
                          f'x2="{_fmt(x1)}" y2="{_fmt(y0)}"/>')
        self.parts.append(f'<line class="axis" x1="{_fmt(x0)}" y1="{_fmt(y0)}" '
                          f'x2="{_fmt(x0)}" y2="{_fmt(y1)}"/>')
        self.parts.append(f'<text x="{_fmt((x0 + x1) / 2)}" y="{_fmt(_SIZE - 18)}" '
                          f'text-anchor="middle">{xlabel}</text>')
        self.parts.append(f'<text x="18" y="{_fmt((y0 + y1) / 2)}" text-anchor="middle" '
                          f'transform="rotate(-90 18 {_fmt((y0 + y1) / 2)})">{ylabel}</text>')
        for v, label in ((self.xmin, _fmt(self.xmin)), (self.xmax, _fmt(self.xmax))):
            self.parts.append(f'<text x="{_fmt(self.x(v))}" y="{_fmt(y0 + 16)}" '
                              f'text-anchor="middle">{label}</text>')
        for v, label in ((self.ymin, _fmt(self.ymin)), (self.ymax, _fmt(self.ymax))):
            self.parts.append(f'<text x="{_fmt(x0 - 6)}" y="{_fmt(self.y(v) + 4)}" '
                              f'text-anchor="end">{label}</text>')

    def save(self, path):
        self.parts.append("</svg>")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.parts) + "\n")


def _field_svg(data, path):
    width, height = float(data["width"]), float(data["height"])
    canvas = _Canvas(0.0, width, 0.0, height)
    canvas.axes("x_m", "y_m")
    estimates = data.get("estimates") or {}
    for node_id, (tx, ty) in sorted(data["true_positions"].items()):
        est = estimates.get(node_id)
        if est is not None:
            canvas.parts.append(
                f'<line class="err" x1="{_fmt(canvas.x(tx))}" y1="{_fmt(canvas.y(ty))}" '
                f'x2="{_fmt(canvas.x(est[0]))}" y2="{_fmt(canvas.y(est[1]))}"/>')
    anchor_ids = set(data.get("anchor_ids", ()))
    for node_id, (tx, ty) in sorted(data["true_positions"].items()):
        cls = "anchor" if node_id in anchor_ids else "true-node"
        canvas.parts.append(f'<circle class="{cls}" cx="{_fmt(canvas.x(tx))}" '
                            f'cy="{_fmt(canvas.y(ty))}" r="3"/>')
    for node_id, est in sorted(estimates.items()):
        canvas.parts.append(f'<circle class="est-node" cx="{_fmt(canvas.x(est[0]))}" '
                            f'cy="{_fmt(canvas.y(est[1]))}" r="4"/>')
    canvas.save(path)


def _pareto_svg(data, path):
    points = sorted((int(n), float(e)) for n, e in data["points"])
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    canvas = _Canvas(min(xs), max(xs) or 1, 0.0, max(ys) or 1.0)
    canvas.axes("anchors", "error_m")
    for n, err in points:
        canvas.parts.append(f'<circle class="pt" cx="{_fmt(canvas.x(n))}" '
                            f'cy="{_fmt(canvas.y(err))}" r="4"/>')
    canvas.save(path)


def _convergence_svg(data, path):
    errors = [float(e) for e in data["mean_error_history"]]
    canvas = _Canvas(1.0, float(max(len(errors), 2)), 0.0, max(errors) or 1.0)
    canvas.axes("iteration", "mean_error_m")
    pts = " ".join(f"{_fmt(canvas.x(i + 1))},{_fmt(canvas.y(e))}"
                   for i, e in enumerate(errors))
    canvas.parts.append(f'<polyline class="curve" points="{pts}"/>')
    canvas.save(path)


def emit_svg(kind: str, data: dict, path) -> None:
    """Write a self-contained static plot: field, pareto, or convergence."""
    if kind == "field":
        if not data.get("true_positions"):
            raise ValueError("field plot needs at least one node")
        _field_svg(data, path)
    elif kind == "pareto":
        if not data.get("points"):
            raise ValueError("pareto plot needs at least one point")
        _pareto_svg(data, path)
    elif kind == "convergence":
        if not data.get("mean_error_history"):
            raise ValueError("convergence plot needs at least one iteration")
        _convergence_svg(data, path)
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
