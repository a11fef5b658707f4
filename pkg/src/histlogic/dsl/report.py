"""Text and JSON rendering of query reports.

Floats are printed with 12 significant digits; magnitudes below ``1e-14``
print as ``0`` so that roundoff noise does not leak into reports.
"""

from __future__ import annotations

import json

import numpy as np

from .evaluate import Report

SCHEMA_VERSION = 1
CHOP = 1e-14


def fmt_float(x: float) -> str:
    x = float(x)
    if abs(x) < CHOP:
        return "0"
    return format(x, ".12g")


def fmt_complex(z: complex) -> str:
    z = complex(z)
    re_, im = (0.0 if abs(z.real) < CHOP else z.real), (0.0 if abs(z.imag) < CHOP else z.imag)
    if im == 0:
        return fmt_float(re_)
    sign = "-" if im < 0 else "+"
    return f"{fmt_float(re_)}{sign}{fmt_float(abs(im))}i"


def _round(x: float) -> float:
    return 0.0 if abs(x) < CHOP else float(format(float(x), ".12g"))


def _text_value(value) -> list[str]:
    if isinstance(value, np.ndarray):
        return ["  ".join(fmt_complex(z) for z in row) for row in value]
    if isinstance(value, (float, np.floating)):
        return [fmt_float(value)]
    if isinstance(value, (tuple, list)):
        return ["[" + ", ".join(fmt_float(v) if isinstance(v, (float, np.floating)) else str(v) for v in value) + "]"]
    return [str(value)]


def render_text(report: Report) -> str:
    lines = [f"# eps={fmt_float(report.eps)} eps_consistency={fmt_float(report.eps_consistency)}"]
    for r in report.results:
        lines.append(f"[{r.index}] {r.text}")
        for key, value in r.fields:
            rendered = _text_value(value)
            if len(rendered) == 1 and not isinstance(value, np.ndarray):
                lines.append(f"    {key}: {rendered[0]}")
            else:
                lines.append(f"    {key}:")
                lines.extend(f"      {row}" for row in rendered)
        lines.append(f"    status: {'FAIL' if r.failed else 'ok'}")
    return "\n".join(lines) + "\n"


def _json_value(value):
    if isinstance(value, np.ndarray):
        return [[[_round(z.real), _round(z.imag)] for z in row] for row in value]
    if isinstance(value, (float, np.floating)):
        return _round(value)
    if isinstance(value, (tuple, list)):
        return [_json_value(v) for v in value]
    if isinstance(value, (int, np.integer)):
        return int(value)
    return str(value)


def render_json(report: Report) -> str:
    doc = {
        "schema": SCHEMA_VERSION,
        "eps": report.eps,
        "eps_consistency": report.eps_consistency,
        "exit_code": report.exit_code,
        "results": [
            {"index": r.index, "query": r.text, "kind": r.kind, "status": "fail" if r.failed else "ok",
             **{k: _json_value(v) for k, v in r.fields}}
            for r in report.results
        ],
    }
    return json.dumps(doc, indent=2) + "\n"
