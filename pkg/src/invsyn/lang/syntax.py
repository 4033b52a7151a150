"""Tokenizer and recursive-descent parser for the protocol language.

The parser produces a *raw* tree: identifiers are unresolved and every node
carries its source position. ``check.py`` resolves and type-checks it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import SpecSyntaxError

KEYWORDS = {
    "PROTOCOL", "SORT", "CONST", "VAR", "INIT", "ACTION", "SAFETY", "REQUIRE",
    "UNCHANGED", "TRUE", "FALSE", "SET", "BOOL", "BOOLEAN", "EXCEPT",
}

_BACKSLASH_WORDS = {
    "A": "\\A", "E": "\\E", "in": "\\in", "notin": "\\notin",
    "subseteq": "\\subseteq", "cup": "\\cup", "union": "\\cup", "cap": "\\cap",
    "intersect": "\\cap", "land": "/\\", "lor": "\\/", "lnot": "~", "neg": "~",
    "equiv": "<=>", "forall": "\\A", "exists": "\\E", "setminus": "\\",
}

_UNICODE = {
    "∧": "/\\", "∨": "\\/", "¬": "~", "⇒": "=>", "⇔": "<=>", "∀": "\\A",
    "∃": "\\E", "∈": "\\in", "∉": "\\notin", "⊆": "\\subseteq", "∪": "\\cup",
    "∩": "\\cap", "≠": "#", "→": "->",
}

# longest first
_SYMBOLS = ["<=>", "/\\", "\\/", "=>", "/=", "->", "=", "#", "~", "'", "(", ")",
            "{", "}", "[", "]", ",", ":", ";", "!"]


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, KW, OP, EOF
    text: str
    line: int
    col: int

    @property
    def pos(self):
        return (self.line, self.col)


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def adv(k):
        nonlocal i, line, col
        for _ in range(k):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c in " \t\r\n\f\v":
            adv(1)
            continue
        if text.startswith("\\*", i):
            while i < n and text[i] != "\n":
                adv(1)
            continue
        if text.startswith("(*", i):
            start = (line, col)
            depth = 0
            while i < n:
                if text.startswith("(*", i):
                    depth += 1
                    adv(2)
                elif text.startswith("*)", i):
                    depth -= 1
                    adv(2)
                    if depth == 0:
                        break
                else:
                    adv(1)
            if depth:
                raise SpecSyntaxError.at("unterminated comment", start)
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_") and text[j].isascii():
                j += 1
            if j == i:  # non-ascii letter
                raise SpecSyntaxError.at(f"unexpected character {c!r}", (line, col))
            word = text[i:j]
            toks.append(Token("KW" if word in KEYWORDS else "IDENT", word, line, col))
            adv(j - i)
            continue
        if c in _UNICODE:
            toks.append(Token("OP", _UNICODE[c], line, col))
            adv(1)
            continue
        if c == "\\":
            if text.startswith("\\/", i):
                toks.append(Token("OP", "\\/", line, col))
                adv(2)
                continue
            j = i + 1
            while j < n and text[j].isascii() and text[j].isalpha():
                j += 1
            word = text[i + 1:j]
            if word in _BACKSLASH_WORDS:
                toks.append(Token("OP", _BACKSLASH_WORDS[word], line, col))
                adv(j - i)
            else:
                toks.append(Token("OP", "\\", line, col))
                adv(1)
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                op = "#" if sym == "/=" else sym
                toks.append(Token("OP", op, line, col))
                adv(len(sym))
                break
        else:
            raise SpecSyntaxError.at(f"unexpected character {c!r}", (line, col))
    toks.append(Token("EOF", "", line, col))
    return toks


@dataclass(frozen=True)
class Raw:
    """Unresolved syntax node. ``op`` names the construct; ``value`` holds names or literals."""

    op: str
    args: tuple = ()
    pos: tuple = (0, 0)
    value: object = None


@dataclass
class RawType:
    kind: str  # bool | elem | set | map
    sort: str | None = None
    codomain: "RawType | None" = None
    pos: tuple = (0, 0)


@dataclass
class RawAction:
    name: str
    params: list  # (name, sort, pos)
    requires: list  # Raw
    updates: list  # (var, Raw | None, pos); None marks UNCHANGED
    pos: tuple = (0, 0)


@dataclass
class RawSpec:
    name: str = "spec"
    sorts: list = field(default_factory=list)  # (name, pos)
    constants: list = field(default_factory=list)  # (name, RawType, pos)
    variables: list = field(default_factory=list)
    init: list = field(default_factory=list)  # Raw
    actions: list = field(default_factory=list)
    safety: list = field(default_factory=list)


_DECL_START = {"PROTOCOL", "SORT", "CONST", "VAR", "INIT", "ACTION", "SAFETY"}
_REL_OPS = {"=", "#", "\\in", "\\notin", "\\subseteq"}


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        # columns of open junction-list bullets; a token at or left of the
        # innermost one ends the current item
        self.fences: list[int] = []

    # token helpers -------------------------------------------------------
    @property
    def tok(self) -> Token:
        t = self.toks[self.i]
        if self.fences and t.kind != "EOF" and t.col <= self.fences[-1]:
            return Token("END", "", t.line, t.col)
        return t

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, kind=None) -> bool:
        t = self.tok
        return t.text == text and (kind is None or t.kind == kind) and t.kind != "IDENT"

    def next(self) -> Token:
        t = self.tok
        if t.kind not in ("EOF", "END"):
            self.i += 1
        return t

    def fail(self, expected):
        t = self.tok
        if t.kind == "END":
            t = self.toks[self.i]
            got = f"{t.text!r} (outside the enclosing junction list)"
        else:
            got = "end of input" if t.kind == "EOF" else repr(t.text)
        exp = ", ".join(expected)
        raise SpecSyntaxError.at(f"expected {exp}; got {got}", t.pos)

    def expect(self, text) -> Token:
        if not self.at(text):
            self.fail([repr(text)])
        return self.next()

    def ident(self) -> Token:
        if self.tok.kind != "IDENT":
            self.fail(["identifier"])
        return self.next()

    def accept(self, text) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    # spec ----------------------------------------------------------------
    def parse_spec(self) -> RawSpec:
        spec = RawSpec()
        if self.at("PROTOCOL", "KW"):
            self.next()
            spec.name = self.ident().text
        while self.tok.kind != "EOF":
            t = self.tok
            if t.kind != "KW" or t.text not in _DECL_START - {"PROTOCOL"}:
                self.fail(["SORT", "CONST", "VAR", "INIT", "ACTION", "SAFETY"])
            kw = self.next().text
            if kw == "SORT":
                spec.sorts.append((self.ident().text, self.toks[self.i - 1].pos))
                while self.accept(","):
                    spec.sorts.append((self.ident().text, self.toks[self.i - 1].pos))
            elif kw in ("CONST", "VAR"):
                names = [self.ident()]
                while self.accept(","):
                    names.append(self.ident())
                self.expect(":")
                ty = self.parse_type()
                target = spec.constants if kw == "CONST" else spec.variables
                target.extend((n.text, ty, n.pos) for n in names)
            elif kw == "INIT":
                spec.init.append(self.parse_expr())
            elif kw == "SAFETY":
                spec.safety.append(self.parse_expr())
            else:
                spec.actions.append(self.parse_action(t.pos))
            self.accept(";")
        if not spec.init:
            self.fail(["INIT declaration"])
        if not spec.safety:
            self.fail(["SAFETY declaration"])
        return spec

    def parse_type(self) -> RawType:
        t = self.tok
        if self.at("BOOL", "KW") or self.at("BOOLEAN", "KW"):
            self.next()
            return RawType("bool", pos=t.pos)
        if self.at("SET", "KW"):
            self.next()
            return RawType("set", self.ident().text, pos=t.pos)
        if self.at("["):
            self.next()
            key = self.ident().text
            self.expect("->")
            cod = self.parse_type()
            self.expect("]")
            return RawType("map", key, cod, pos=t.pos)
        if t.kind == "IDENT":
            self.next()
            return RawType("elem", t.text, pos=t.pos)
        self.fail(["BOOL", "SET <sort>", "<sort>", "[<sort> -> <type>]"])

    def parse_action(self, pos) -> RawAction:
        name = self.ident().text
        params = []
        if self.accept("("):
            if not self.at(")"):
                while True:
                    pnames = [self.ident()]
                    while self.accept(","):
                        pnames.append(self.ident())
                    self.expect(":")
                    sort = self.ident().text
                    params.extend((p.text, sort, p.pos) for p in pnames)
                    if not self.accept(","):
                        break
            self.expect(")")
        self.expect("{")
        requires, updates = [], []
        while not self.at("}"):
            t = self.tok
            if self.at("REQUIRE", "KW"):
                self.next()
                requires.append(self.parse_expr())
            elif self.at("UNCHANGED", "KW"):
                self.next()
                updates.append((self.ident().text, None, self.toks[self.i - 1].pos))
                while self.accept(","):
                    updates.append((self.ident().text, None, self.toks[self.i - 1].pos))
            elif t.kind == "IDENT":
                self.next()
                self.expect("'")
                self.expect("=")
                updates.append((t.text, self.parse_expr(), t.pos))
            else:
                self.fail(["REQUIRE", "UNCHANGED", "<var>' = <expr>", "'}'"])
            if not self.at("}"):
                self.expect(";")
        self.expect("}")
        return RawAction(name, params, requires, updates, pos)

    # expressions ---------------------------------------------------------
    def parse_expr(self) -> Raw:
        if self.at("/\\") or self.at("\\/"):
            return self.parse_junction_list()
        return self.parse_iff()

    def parse_junction_list(self) -> Raw:
        """TLA+-style bulleted list: each bullet's item ends at the next token in or left of its column."""
        bullet = self.tok
        op, col = bullet.text, bullet.col
        items = []
        while True:
            self.next()
            self.fences.append(col)
            try:
                items.append(self.parse_expr())
            finally:
                self.fences.pop()
            t = self.tok
            if not (t.kind == "OP" and t.text == op and t.col == col):
                break
        e = items[0]
        for it in items[1:]:
            e = Raw(op, (e, it), bullet.pos)
        return e

    def parse_iff(self) -> Raw:
        lhs = self.parse_implies()
        while self.at("<=>"):
            t = self.next()
            lhs = Raw("<=>", (lhs, self.parse_implies()), t.pos)
        return lhs

    def parse_implies(self) -> Raw:
        lhs = self.parse_or()
        if self.at("=>"):
            t = self.next()
            return Raw("=>", (lhs, self.parse_implies()), t.pos)
        return lhs

    def parse_or(self) -> Raw:
        lhs = self.parse_and()
        while self.at("\\/"):
            t = self.next()
            lhs = Raw("\\/", (lhs, self.parse_and()), t.pos)
        return lhs

    def parse_and(self) -> Raw:
        lhs = self.parse_not()
        while self.at("/\\"):
            t = self.next()
            lhs = Raw("/\\", (lhs, self.parse_not()), t.pos)
        return lhs

    def parse_not(self) -> Raw:
        if self.at("~"):
            t = self.next()
            return Raw("~", (self.parse_not(),), t.pos)
        return self.parse_rel()

    def parse_rel(self) -> Raw:
        lhs = self.parse_union()
        if self.tok.kind == "OP" and self.tok.text in _REL_OPS:
            t = self.next()
            rhs = self.parse_union()
            if self.tok.kind == "OP" and self.tok.text in _REL_OPS:
                self.fail(["parentheses around chained comparison"])
            return Raw(t.text, (lhs, rhs), t.pos)
        return lhs

    def parse_union(self) -> Raw:
        lhs = self.parse_inter()
        while self.at("\\cup") or self.at("\\"):
            t = self.next()
            lhs = Raw(t.text, (lhs, self.parse_inter()), t.pos)
        return lhs

    def parse_inter(self) -> Raw:
        lhs = self.parse_postfix()
        while self.at("\\cap"):
            t = self.next()
            lhs = Raw("\\cap", (lhs, self.parse_postfix()), t.pos)
        return lhs

    def parse_postfix(self) -> Raw:
        e = self.parse_primary()
        while True:
            if self.at("["):
                t = self.next()
                arg = self.parse_expr()
                self.expect("]")
                e = Raw("apply", (e, arg), t.pos)
            elif self.at("'"):
                t = self.next()
                e = Raw("prime", (e,), t.pos)
            else:
                return e

    def parse_primary(self) -> Raw:
        t = self.tok
        if t.kind == "IDENT":
            self.next()
            return Raw("name", (), t.pos, t.text)
        if self.at("TRUE", "KW") or self.at("FALSE", "KW"):
            self.next()
            return Raw("bool", (), t.pos, t.text == "TRUE")
        if self.at("("):
            self.next()
            e = self.parse_expr()
            self.expect(")")
            return e
        if self.at("{"):
            self.next()
            elems = []
            if not self.at("}"):
                elems.append(self.parse_expr())
                while self.accept(","):
                    elems.append(self.parse_expr())
            self.expect("}")
            return Raw("setlit", tuple(elems), t.pos)
        if self.at("["):
            self.next()
            fn = self.parse_expr()
            self.expect("EXCEPT")
            self.expect("!")
            self.expect("[")
            arg = self.parse_expr()
            self.expect("]")
            self.expect("=")
            val = self.parse_expr()
            self.expect("]")
            return Raw("except", (fn, arg, val), t.pos)
        if self.at("\\A") or self.at("\\E"):
            self.next()
            binders = []
            while True:
                names = [self.ident()]
                while self.accept(","):
                    names.append(self.ident())
                self.expect("\\in")
                dom = self.parse_union()
                binders.append((names, dom))
                if not self.accept(","):
                    break
            self.expect(":")
            body = self.parse_expr()
            # innermost binder first when folding
            for names, dom in reversed(binders):
                for nm in reversed(names):
                    body = Raw("forall" if t.text == "\\A" else "exists", (dom, body), nm.pos, nm.text)
            return body
        self.fail(["expression"])


def parse_raw_spec(text: str) -> RawSpec:
    return Parser(text).parse_spec()


def parse_raw_expr(text: str) -> Raw:
    p = Parser(text)
    e = p.parse_expr()
    if p.tok.kind != "EOF":
        p.fail(["end of expression"])
    return e
