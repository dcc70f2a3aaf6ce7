"""Minimal SMT-LIB 2.6 reader for the QF_NRA fragment we emit.

Tokenises and parses S-expressions per the SMT-LIB 2.6 lexicon, checks the
command structure and sorts (everything is ``Real`` or ``Bool``), and
evaluates terms exactly over rationals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

SIMPLE_SYMBOL = re.compile(r"[A-Za-z~!@$%^&*_\-+=<>.?/][A-Za-z0-9~!@$%^&*_\-+=<>.?/]*")
NUMERAL = re.compile(r"0|[1-9][0-9]*")
DECIMAL = re.compile(r"(?:0|[1-9][0-9]*)\.[0-9]+")

ARITH = {"+", "-", "*", "/"}
COMPARE = {"=", "<=", ">=", "<", ">"}
LOGIC = {"and", "or", "not", "=>"}
COMMANDS = {"set-logic", "set-option", "set-info", "declare-fun", "declare-const", "define-fun", "assert",
            "check-sat", "get-model", "get-value", "push", "pop", "exit"}


class SMTSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Num:
    value: Fraction
    text: str


@dataclass(frozen=True)
class Keyword:
    name: str


@dataclass(frozen=True)
class Str:
    value: str


def tokenize(text: str) -> list:
    out = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            out.append(c)
            i += 1
        elif c == "|":
            j = text.find("|", i + 1)
            if j < 0 or "\\" in text[i + 1:j]:
                raise SMTSyntaxError(f"unterminated quoted symbol at offset {i}")
            out.append(Sym(text[i + 1:j]))
            i = j + 1
        elif c == '"':
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise SMTSyntaxError(f"unterminated string at offset {i}")
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        buf.append('"')
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            out.append(Str("".join(buf)))
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in ' \t\r\n();|"':
                j += 1
            tok = text[i:j]
            if tok.startswith(":"):
                if not SIMPLE_SYMBOL.fullmatch(tok[1:]):
                    raise SMTSyntaxError(f"bad keyword {tok!r}")
                out.append(Keyword(tok[1:]))
            elif tok[0].isdigit():
                if NUMERAL.fullmatch(tok) or DECIMAL.fullmatch(tok):
                    out.append(Num(Fraction(tok), tok))
                else:
                    raise SMTSyntaxError(f"bad numeric literal {tok!r}")
            elif SIMPLE_SYMBOL.fullmatch(tok):
                out.append(Sym(tok))
            else:
                raise SMTSyntaxError(f"bad token {tok!r}")
            i = j
    return out


def parse_sexprs(text: str) -> list:
    toks = tokenize(text)
    stack: list[list] = [[]]
    for t in toks:
        if t == "(":
            stack.append([])
        elif t == ")":
            if len(stack) == 1:
                raise SMTSyntaxError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(t)
    if len(stack) != 1:
        raise SMTSyntaxError("unbalanced '('")
    return stack[0]


@dataclass
class Script:
    logic: str | None = None
    consts: dict[str, str] = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    commands: list[str] = field(default_factory=list)


def _sort(term, consts: dict[str, str]) -> str:
    if isinstance(term, Num):
        return "Real"
    if isinstance(term, Sym):
        if term.name in ("true", "false"):
            return "Bool"
        if term.name not in consts:
            raise SMTSyntaxError(f"undeclared symbol {term.name!r}")
        return consts[term.name]
    if not isinstance(term, list) or not term or not isinstance(term[0], Sym):
        raise SMTSyntaxError(f"malformed term {term!r}")
    op, args = term[0].name, term[1:]
    sorts = [_sort(a, consts) for a in args]
    if op in ARITH:
        if not args or (op != "-" and len(args) < 2) or any(s != "Real" for s in sorts):
            raise SMTSyntaxError(f"ill-sorted application of {op!r}")
        return "Real"
    if op in COMPARE:
        if len(args) < 2 or any(s != sorts[0] for s in sorts) or (op != "=" and sorts[0] != "Real"):
            raise SMTSyntaxError(f"ill-sorted application of {op!r}")
        return "Bool"
    if op in LOGIC:
        if any(s != "Bool" for s in sorts) or (op == "not" and len(args) != 1):
            raise SMTSyntaxError(f"ill-sorted application of {op!r}")
        return "Bool"
    raise SMTSyntaxError(f"unsupported function symbol {op!r}")


def parse_script(text: str) -> Script:
    """Parse and validate a script; raises :class:`SMTSyntaxError` on any problem."""
    script = Script()
    for cmd in parse_sexprs(text):
        if not isinstance(cmd, list) or not cmd or not isinstance(cmd[0], Sym):
            raise SMTSyntaxError(f"top-level item is not a command: {cmd!r}")
        head = cmd[0].name
        if head not in COMMANDS:
            raise SMTSyntaxError(f"unknown command {head!r}")
        script.commands.append(head)
        if head == "set-logic":
            if len(cmd) != 2 or not isinstance(cmd[1], Sym):
                raise SMTSyntaxError("set-logic expects one symbol")
            script.logic = cmd[1].name
        elif head == "declare-fun":
            if len(cmd) != 4 or not isinstance(cmd[1], Sym) or cmd[2] != [] or cmd[3] not in (Sym("Real"), Sym("Bool")):
                raise SMTSyntaxError("declare-fun must declare a nullary Real or Bool constant")
            script.consts[cmd[1].name] = cmd[3].name
        elif head == "declare-const":
            if len(cmd) != 3 or not isinstance(cmd[1], Sym) or cmd[2] not in (Sym("Real"), Sym("Bool")):
                raise SMTSyntaxError("declare-const must declare a Real or Bool constant")
            script.consts[cmd[1].name] = cmd[2].name
        elif head == "assert":
            if len(cmd) != 2 or _sort(cmd[1], script.consts) != "Bool":
                raise SMTSyntaxError("assert expects one Boolean term")
            script.assertions.append(cmd[1])
        elif head in ("check-sat", "get-model", "exit") and len(cmd) != 1:
            raise SMTSyntaxError(f"{head} takes no arguments")
    return script


def evaluate(term, env: dict[str, Fraction]):
    """Exact value of a term (``Fraction`` or ``bool``) under ``env``."""
    if isinstance(term, Num):
        return term.value
    if isinstance(term, Sym):
        if term.name == "true":
            return True
        if term.name == "false":
            return False
        return env[term.name]
    op = term[0].name
    vals = [evaluate(a, env) for a in term[1:]]
    if op == "+":
        return sum(vals, Fraction(0))
    if op == "-":
        return -vals[0] if len(vals) == 1 else vals[0] - sum(vals[1:], Fraction(0))
    if op == "*":
        out = Fraction(1)
        for v in vals:
            out *= v
        return out
    if op == "/":
        out = vals[0]
        for v in vals[1:]:
            out /= v
        return out
    if op in COMPARE:
        rel = {"=": lambda a, b: a == b, "<=": lambda a, b: a <= b, ">=": lambda a, b: a >= b,
               "<": lambda a, b: a < b, ">": lambda a, b: a > b}[op]
        return all(rel(a, b) for a, b in zip(vals, vals[1:]))
    if op == "and":
        return all(vals)
    if op == "or":
        return any(vals)
    if op == "not":
        return not vals[0]
    if op == "=>":
        out = vals[-1]
        for v in reversed(vals[:-1]):
            out = (not v) or out
        return out
    raise SMTSyntaxError(f"unsupported function symbol {op!r}")
