"""Input expression parser and output code emitters.

The input grammar covers integer constants, declared symbols, ``+ - * / ^``
with integer exponents and parentheses; division only by integer constants.
Emitters render a program one assignment per instruction in a plain,
C-like, or Fortran-like dialect.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .core import Polynomial, Program, normalize


class ParseError(ValueError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        line = text.count("\n", 0, position) + 1 if text else 1
        col = position - (text.rfind("\n", 0, position) + 1) if text else position
        super().__init__(f"{message} (line {line}, column {col + 1})")


@dataclass(frozen=True)
class SourceExpression:
    name: str
    text: str


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


class _Parser:
    def __init__(self, text: str, symbols: Sequence[str]):
        self.text = text
        self.pos = 0
        self.index = {name: i for i, name in enumerate(symbols)}
        self.nvars = len(symbols)

    def error(self, message):
        raise ParseError(message, self.pos, self.text)

    def next_token(self):
        m = _TOKEN.match(self.text, self.pos)
        if not m:
            return None
        self.pos = m.end()
        if m.group(1):
            return ("int", int(m.group(1)))
        if m.group(2):
            return ("name", m.group(2))
        return ("op", m.group(3))

    def lookahead(self):
        save = self.pos
        tok = self.next_token()
        self.pos = save
        return tok

    def parse(self) -> Polynomial:
        p = self.expression()
        if self.lookahead() is not None:
            self.error("trailing input after expression")
        return p

    def expression(self) -> Polynomial:
        sign = 1
        tok = self.lookahead()
        while tok and tok[0] == "op" and tok[1] in "+-":
            self.next_token()
            if tok[1] == "-":
                sign = -sign
            tok = self.lookahead()
        acc = self.term()
        if sign < 0:
            acc = -acc
        while True:
            tok = self.lookahead()
            if not (tok and tok[0] == "op" and tok[1] in "+-"):
                return acc
            self.next_token()
            rhs = self.term()
            acc = acc + rhs if tok[1] == "+" else acc - rhs

    def term(self) -> Polynomial:
        acc = self.factor()
        while True:
            tok = self.lookahead()
            if not (tok and tok[0] == "op" and tok[1] in "*/"):
                return acc
            self.next_token()
            at = self.pos
            rhs = self.factor()
            if tok[1] == "*":
                acc = acc * rhs
            else:
                if len(rhs.terms) != 1 or any(rhs.terms[0][0]):
                    self.pos = at
                    self.error("division only by integer constants")
                acc = acc.scaled(rhs.denom, rhs.terms[0][1])

    def factor(self) -> Polynomial:
        tok = self.lookahead()
        if tok and tok[0] == "op" and tok[1] in "+-":
            self.next_token()
            f = self.factor()
            return -f if tok[1] == "-" else f
        base = self.atom()
        tok = self.lookahead()
        if tok and tok[0] == "op" and tok[1] == "^":
            self.next_token()
            at = self.pos
            e = self.next_token()
            if not e or e[0] != "int":
                self.pos = at
                self.error("exponent must be a non-negative integer")
            return base ** e[1]
        return base

    def atom(self) -> Polynomial:
        at = self.pos
        tok = self.next_token()
        if tok is None:
            self.pos = at
            self.error("unexpected end of expression")
        if tok[0] == "int":
            return Polynomial.constant(self.nvars, tok[1])
        if tok[0] == "name":
            vid = self.index.get(tok[1])
            if vid is None:
                self.pos = at
                self.error(f"undeclared symbol '{tok[1]}'")
            return Polynomial.variable(self.nvars, vid)
        if tok[1] == "(":
            p = self.expression()
            closing = self.next_token()
            if not closing or closing[1] != ")":
                self.error("expected ')'")
            return p
        self.pos = at
        self.error(f"unexpected '{tok[1]}'")


def parse(source: SourceExpression, symbols: Sequence[str]) -> Polynomial:
    """Parse to a fully expanded, normalized polynomial over ``symbols``."""
    return _Parser(source.text, symbols).parse()


def read_input_file(text: str):
    """Input file format: a ``symbols:`` header (declaration order matters,
    it is the downstream tie-break order), then one ``name = expression;``
    per line.  '#' starts a comment.  Returns (symbols, [SourceExpression]).
    """
    symbols: List[str] = []
    exprs: List[SourceExpression] = []
    pending = ""

    def flush(statement, lineno):
        statement = statement.strip()
        if not statement:
            return
        if "=" not in statement:
            raise ValueError(f"line {lineno}: expected 'name = expression;'")
        name, _, body = statement.partition("=")
        name = name.strip()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name):
            raise ValueError(f"line {lineno}: bad output name '{name}'")
        exprs.append(SourceExpression(name, body.strip()))

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if not symbols and not pending:
            header = line.strip()
            if not header.lower().startswith("symbols"):
                raise ValueError("input must start with a 'symbols:' line")
            _, _, rest = header.partition(":")
            symbols = [s for s in re.split(r"[,\s]+", rest.strip()) if s]
            if len(set(symbols)) != len(symbols):
                raise ValueError("duplicate symbol declaration")
            continue
        pending += " " + line
        while ";" in pending:
            statement, _, pending = pending.partition(";")
            flush(statement, lineno)
    if pending.strip():
        raise ValueError("unterminated statement (missing ';')")
    if not symbols:
        raise ValueError("input must start with a 'symbols:' line")
    return symbols, exprs


# ---------------------------------------------------------------------------
# emitters
# ---------------------------------------------------------------------------


@dataclass
class EmitSettings:
    dialect: str = "plain"            # plain | c | fortran
    temp_style: str = "scalar"        # scalar (Z1_) | array (tmp(1))
    temp_name: str = ""               # scalar prefix or array name
    indent: Optional[int] = None      # None: dialect default
    line_width: int = 80
    double_precision: bool = False    # fortran: 2 -> 2D0
    power_inline_max: int = 3         # c: emit x*x*x up to this exponent
    power_function: str = "pow"

    def __post_init__(self):
        if self.dialect not in ("plain", "c", "fortran"):
            raise ValueError(f"unknown dialect {self.dialect!r}")
        if self.line_width < 40:
            raise ValueError("lineWidth must be >= 40")
        if not self.temp_name:
            self.temp_name = "Z" if self.temp_style == "scalar" else "tmp"

    @property
    def effective_indent(self) -> int:
        if self.indent is not None:
            return self.indent
        return 6 if self.dialect == "fortran" else 0


def _temp_text(settings: EmitSettings, slot: int) -> str:
    if settings.temp_style == "scalar":
        return f"{settings.temp_name}{slot}_"
    if settings.dialect == "c":
        return f"{settings.temp_name}[{slot}]"
    return f"{settings.temp_name}({slot})"


def _int_text(settings: EmitSettings, value: int) -> str:
    if settings.dialect == "fortran" and settings.double_precision:
        return f"{value}D0"
    return str(value)


def _ref_text(settings: EmitSettings, names, nvars, ref) -> str:
    if ref < nvars:
        return names[ref]
    return _temp_text(settings, ref - nvars + 1)


def _power_text(settings: EmitSettings, base: str, e: int) -> str:
    if e == 1:
        return base
    if settings.dialect == "plain":
        return f"{base}^{e}"
    if settings.dialect == "fortran":
        return f"{base}**{e}"
    if e <= settings.power_inline_max:
        return "*".join([base] * e)
    return f"{settings.power_function}({base},{e})"


def _term_text(settings, names, nvars, coeff, factors):
    parts = [_power_text(settings, _ref_text(settings, names, nvars, r), e)
             for r, e in factors]
    body = "*".join(parts)
    if coeff == 1:
        return "+", body
    if coeff == -1:
        return "-", body
    sign = "+" if coeff > 0 else "-"
    return sign, f"{_int_text(settings, abs(coeff))}*{body}"


def _rhs_text(settings, names, nvars, terms, const, denom=1):
    pieces: List[Tuple[str, str]] = []
    if const:
        pieces.append(("+" if const > 0 else "-",
                       _int_text(settings, abs(const))))
    for c, f in terms:
        pieces.append(_term_text(settings, names, nvars, c, f))
    if not pieces:
        pieces = [("+", _int_text(settings, 0))]
    sign0, text0 = pieces[0]
    out = ("-" if sign0 == "-" else "") + text0
    for sign, text in pieces[1:]:
        out += f" {sign} {text}"
    if denom != 1:
        if len(pieces) > 1:
            out = f"({out})"
        out += f"/{_int_text(settings, denom)}"
    return out


def _wrap(settings: EmitSettings, line: str) -> List[str]:
    width = settings.line_width
    if len(line) <= width:
        return [line]
    if settings.dialect == "fortran":
        cont = "     &"
    else:
        cont = " " * (settings.effective_indent + 4)
    out = []
    current = line
    while len(current) > width:
        cut = -1
        for i in range(width - 1, 0, -1):
            ch = current[i]
            if ch in "+-*" and current[i - 1] == " " or ch == " ":
                if current[: i].rstrip():
                    cut = i
                    break
        if cut <= 0:
            cut = width
        out.append(current[:cut].rstrip())
        current = cont + current[cut:].lstrip()
    out.append(current)
    return out


def emit(program: Program, names: Sequence[str],
         settings: Optional[EmitSettings] = None) -> str:
    """Render one assignment per instruction, outputs last."""
    settings = settings or EmitSettings()
    nvars = program.nvars
    pad = " " * settings.effective_indent
    semi = ";" if settings.dialect == "c" else ""
    lines: List[str] = []

    def put(lhs, terms, const, denom=1):
        rhs = _rhs_text(settings, names, nvars, terms, const, denom)
        lines.extend(_wrap(settings, f"{pad}{lhs} = {rhs}{semi}"))

    for ins in program.instructions:
        put(_ref_text(settings, names, nvars, ins.target), ins.terms,
            ins.const)
    for out in program.outputs:
        put(out.name, out.terms, out.const, out.denom)
    return "\n".join(lines) + ("\n" if lines else "")


def emit_debug_substitutions(program: Program, names: Sequence[str],
                             settings: Optional[EmitSettings] = None) -> str:
    """The instruction list reversed and prefixed with ``id``: applying the
    lines as textual substitutions, top to bottom, undoes the optimization.
    """
    settings = settings or EmitSettings()
    nvars = program.nvars
    lines = []
    for ins in reversed(program.instructions):
        lhs = _ref_text(settings, names, nvars, ins.target)
        rhs = _rhs_text(settings, names, nvars, ins.terms, ins.const)
        lines.append(f"id {lhs} = {rhs}")
    return "\n".join(lines) + ("\n" if lines else "")
