"""The ``.hl`` model language: parser, evaluator and reports."""

from .ast import ModelSpec, format_model
from .errors import DslError
from .evaluate import (
    Environment,
    QueryResult,
    Report,
    build_environment,
    environment_from_model,
    evaluate,
    parse_model,
    run_query,
)
from .parser import parse_expression, parse_program, parse_query
from .report import render_json, render_text

__all__ = [
    "DslError", "Environment", "ModelSpec", "QueryResult", "Report", "build_environment",
    "environment_from_model", "evaluate", "format_model", "parse_expression", "parse_model",
    "parse_program", "parse_query", "render_json", "render_text", "run_query",
]
