"""Located diagnostics for the model language."""

from __future__ import annotations


class DslError(Exception):
    """An error tied to a position in a model file.

    ``kind`` is one of ``SyntaxError``, ``UndeclaredName``, ``DuplicateName``,
    ``DimensionMismatch`` or ``ModelError``.
    """

    def __init__(self, kind: str, message: str, line: int = 0, col: int = 0):
        super().__init__(message)
        self.kind, self.message, self.line, self.col = kind, message, line, col

    def __str__(self):
        where = f"{self.line}:{self.col}: " if self.line else ""
        return f"{where}{self.kind}: {self.message}"


def syntax_error(message: str, line: int = 0, col: int = 0) -> DslError:
    return DslError("SyntaxError", message, line, col)
