"""Plain-text formats for matrices, vectors, models, observations and decode output.

Matrix::

    m n
    <n entries>      (m lines; decimal literals or "-inf")

Vector::

    n
    <n entries>

Model::

    n k
    <k symbol names>
    <n initial probabilities>
    <n lines of n transition probabilities, row = from-state>
    <n lines of k emission probabilities>

Observations: whitespace separated symbol names. Decode output: 1-based
state indices on one line, then ``logprob <value>`` (or ``logprob -inf``).
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    def __init__(self, path, line: int, column: int, message: str):
        self.path, self.line, self.column = str(path), line, column
        super().__init__(f"{path}:{line}:{column}: {message}")


def _lines(text: str):
    """Non-blank lines as (1-based line number, raw line)."""
    return [(i, ln) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip()]


def _tokens(line: str):
    """Tokens with their 1-based column."""
    col, out = 0, []
    for tok in line.split():
        col = line.index(tok, col)
        out.append((col + 1, tok))
        col += len(tok)
    return out


def _number(tok: str, where, lineno: int, col: int, allow_neg_inf: bool = True) -> float:
    if allow_neg_inf and tok.lower() == "-inf":
        return -math.inf
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(where, lineno, col, f"expected a number, got {tok!r}") from None
    if math.isnan(v) or math.isinf(v):
        raise ParseError(where, lineno, col, f"value {tok!r} is not allowed")
    return v


def _int(tok: str, where, lineno: int, col: int) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise ParseError(where, lineno, col, f"expected an integer, got {tok!r}") from None
    if v < 1:
        raise ParseError(where, lineno, col, f"dimension must be positive, got {v}")
    return v


def _row(lines, idx, count, where, allow_neg_inf=True):
    if idx >= len(lines):
        ln = lines[-1][0] + 1 if lines else 1
        raise ParseError(where, ln, 1, f"unexpected end of input, expected {count} values")
    lineno, raw = lines[idx]
    toks = _tokens(raw)
    if len(toks) != count:
        raise ParseError(where, lineno, 1, f"expected {count} values, found {len(toks)}")
    return [_number(t, where, lineno, c, allow_neg_inf) for c, t in toks]


def _header(lines, count, where):
    if not lines:
        raise ParseError(where, 1, 1, "empty input")
    lineno, raw = lines[0]
    toks = _tokens(raw)
    if len(toks) != count:
        raise ParseError(where, lineno, 1, f"header needs {count} integers, found {len(toks)}")
    return [_int(t, where, lineno, c) for c, t in toks]


def _extra(lines, used, where):
    if len(lines) > used:
        raise ParseError(where, lines[used][0], 1, "unexpected trailing content")


def format_value(x: float) -> str:
    return "-inf" if x == -math.inf else repr(float(x))


def parse_matrix(text: str, where="<matrix>") -> np.ndarray:
    lines = _lines(text)
    m, n = _header(lines, 2, where)
    rows = [_row(lines, 1 + i, n, where) for i in range(m)]
    _extra(lines, 1 + m, where)
    return np.array(rows, dtype=np.float64)


def format_matrix(A) -> str:
    A = np.asarray(A)
    out = [f"{A.shape[0]} {A.shape[1]}"]
    out += [" ".join(format_value(x) for x in row) for row in A]
    return "\n".join(out) + "\n"


def parse_vector(text: str, where="<vector>") -> np.ndarray:
    lines = _lines(text)
    (n,) = _header(lines, 1, where)
    row = _row(lines, 1, n, where)
    _extra(lines, 2, where)
    return np.array(row, dtype=np.float64)


def format_vector(b) -> str:
    b = np.asarray(b)
    return f"{b.shape[0]}\n" + " ".join(format_value(x) for x in b) + "\n"


def parse_model(text: str, where="<model>", renormalize: bool = False):
    from .hmm import HiddenMarkovModel

    lines = _lines(text)
    n, k = _header(lines, 2, where)
    if len(lines) < 2:
        raise ParseError(where, lines[0][0] + 1, 1, "missing alphabet line")
    lineno, raw = lines[1]
    symbols = raw.split()
    if len(symbols) != k:
        raise ParseError(where, lineno, 1, f"expected {k} symbol names, found {len(symbols)}")
    if len(set(symbols)) != k:
        raise ParseError(where, lineno, 1, "symbol names must be distinct")
    initial = _row(lines, 2, n, where, allow_neg_inf=False)
    transition = [_row(lines, 3 + i, n, where, allow_neg_inf=False) for i in range(n)]
    emission = [_row(lines, 3 + n + i, k, where, allow_neg_inf=False) for i in range(n)]
    _extra(lines, 3 + 2 * n, where)
    return HiddenMarkovModel.create(symbols, initial, transition, emission, renormalize=renormalize)


def format_model(model) -> str:
    out = [f"{model.n} {len(model.alphabet)}", " ".join(model.alphabet)]
    out.append(" ".join(repr(float(x)) for x in model.initial))
    out += [" ".join(repr(float(x)) for x in row) for row in model.transition]
    out += [" ".join(repr(float(x)) for x in row) for row in model.emission]
    return "\n".join(out) + "\n"


def parse_observations(text: str, model, where="<observations>") -> np.ndarray:
    index = {s: i for i, s in enumerate(model.alphabet)}
    out = []
    for lineno, raw in _lines(text):
        for col, tok in _tokens(raw):
            if tok not in index:
                raise ParseError(where, lineno, col, f"unknown symbol {tok!r}")
            out.append(index[tok])
    if not out:
        raise ParseError(where, 1, 1, "observation sequence is empty")
    return np.array(out, dtype=np.int64)


def format_decode(result) -> str:
    states = " ".join(str(int(s) + 1) for s in result.path)
    lp = result.log_prob
    return f"{states}\nlogprob {format_value(lp)}\n"


def read_text(path) -> str:
    return Path(path).read_text()
