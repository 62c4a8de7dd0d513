"""Tokenizer for .wf source text."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import LexError


@dataclass(frozen=True, slots=True)
class SourceUnit:
    path: str
    body: str

    def normalized(self) -> str:
        return self.body.replace("\r\n", "\n").replace("\r", "\n")


@dataclass(frozen=True, slots=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NOWHERE = Span(0, 0)


@dataclass(frozen=True, slots=True)
class Token:
    kind: str
    text: str
    span: Span
    value: object = None

    def __repr__(self) -> str:
        if self.kind in ("ident", "int", "float"):
            return f"{self.kind} {self.text}"
        return self.kind


KEYWORDS = {
    "atomic", "wait_for", "if", "else", "for", "do", "while", "return", "static",
    "inline", "async", "batched", "const", "auto", "void", "template", "typename",
    "using", "decltype", "struct", "true", "false",
}

# longest match first
PUNCT = [
    ("<<=", "shl_eq"), (">>=", "shr_eq"),
    ("->", "arrow"), ("++", "incr"), ("--", "decr"), ("&&", "and_and"), ("||", "or_or"),
    ("<<", "shl"), (">>", "shr"), ("<=", "le"), (">=", "ge"), ("==", "eq_eq"), ("!=", "ne"),
    ("+=", "plus_eq"), ("-=", "minus_eq"), ("*=", "star_eq"), ("/=", "slash_eq"),
    ("%=", "percent_eq"), ("&=", "amp_eq"), ("|=", "pipe_eq"), ("^=", "caret_eq"),
    ("+", "plus"), ("-", "minus"), ("*", "star"), ("/", "slash"), ("%", "percent"),
    ("<", "lt"), (">", "gt"), ("=", "eq"), ("!", "bang"), ("~", "tilde"), ("&", "amp"),
    ("|", "pipe"), ("^", "caret"), ("?", "question"), (":", "colon"), (";", "semi"),
    (",", "comma"), (".", "dot"), ("(", "lparen"), (")", "rparen"), ("{", "lbrace"),
    ("}", "rbrace"), ("[", "lbracket"), ("]", "rbracket"),
]


def tokenize(src: SourceUnit | str) -> list[Token]:
    """Split source into tokens; comments are dropped and an ``eof`` token is appended."""
    text = src.normalized() if isinstance(src, SourceUnit) else SourceUnit("<string>", src).normalized()
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    attr_depth = 0
    n = len(text)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for ch in text[i:i + k]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += k

    while i < n:
        ch = text[i]
        if ch in " \t\n":
            advance(1)
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            advance((n if j < 0 else j) - i)
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise LexError((line, col), "/*")
            advance(j + 2 - i)
            continue
        span = Span(line, col)
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "kw_" + word if word in KEYWORDS else "ident"
            toks.append(Token(kind, word, span))
            advance(j - i)
            continue
        if ch.isdigit():
            j = i
            if text.startswith(("0x", "0X"), i):
                j = i + 2
                while j < n and (text[j] in "0123456789abcdefABCDEF_"):
                    j += 1
                word = text[i:j]
                toks.append(Token("int", word, span, int(word.replace("_", ""), 16)))
                advance(j - i)
                continue
            while j < n and (text[j].isdigit() or text[j] == "_"):
                j += 1
            is_float = False
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE" and (j + 1 < n and (text[j + 1].isdigit() or text[j + 1] in "+-")):
                is_float = True
                j += 2
                while j < n and text[j].isdigit():
                    j += 1
            word = text[i:j]
            if is_float:
                toks.append(Token("float", word, span, float(word)))
            else:
                toks.append(Token("int", word, span, int(word.replace("_", ""))))
            advance(j - i)
            continue
        if text.startswith("[[", i):
            attr_depth += 1
            toks.append(Token("attr_open", "[[", span))
            advance(2)
            continue
        if attr_depth and text.startswith("]]", i):
            attr_depth -= 1
            toks.append(Token("attr_close", "]]", span))
            advance(2)
            continue
        for p, kind in PUNCT:
            if text.startswith(p, i):
                toks.append(Token(kind, p, span))
                advance(len(p))
                break
        else:
            raise LexError((line, col), ch)
    toks.append(Token("eof", "", Span(line, col)))
    return toks
