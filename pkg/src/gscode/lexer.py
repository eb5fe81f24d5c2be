"""Tokenizer for the accepted source subset (.src files, Java-like syntax).

Comments and whitespace are consumed and never emitted.  Every other character
must belong to a token; anything else is a ParseError with its location.
"""

from __future__ import annotations

from dataclasses import dataclass

KW_IDENTIFIER = "identifier"
KW_KEYWORD = "keyword"
KW_LITERAL = "literal"
KW_OPERATOR = "operator"
KW_PUNCTUATION = "punctuation"

KEYWORDS = {
    "class", "if", "else", "while", "for", "return", "new", "this",
    "void", "int", "long", "double", "boolean", "char",
    "public", "private", "protected", "static", "final",
}

# true/false/null read like keywords but are value literals
WORD_LITERALS = {"true", "false", "null"}

PRIMITIVE_TYPES = {"void", "int", "long", "double", "boolean", "char"}

MODIFIERS = {"public", "private", "protected", "static", "final"}

TWO_CHAR_OPERATORS = ("==", "!=", "<=", ">=", "&&", "||")
ONE_CHAR_OPERATORS = "=<>+-*/%!"
PUNCTUATION = "(){};,."


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at {line}:{column}")
        self.message = message
        self.line = line
        self.column = column


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def advance(k: int):
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
        if c in " \t\r\n":
            advance(1)
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                advance(1)
            continue
        if text.startswith("/*", i):
            start_line, start_col = line, col
            advance(2)
            while i < n and not text.startswith("*/", i):
                advance(1)
            if i >= n:
                raise ParseError("unterminated block comment", start_line, start_col)
            advance(2)
            continue
        start_line, start_col = line, col
        if c == '"':
            advance(1)
            buf = ['"']
            while i < n and text[i] != '"':
                if text[i] == "\n":
                    raise ParseError("unterminated string literal", start_line, start_col)
                if text[i] == "\\" and i + 1 < n:
                    buf.append(text[i])
                    advance(1)
                buf.append(text[i])
                advance(1)
            if i >= n:
                raise ParseError("unterminated string literal", start_line, start_col)
            buf.append('"')
            advance(1)
            tokens.append(Token(KW_LITERAL, "".join(buf), start_line, start_col))
            continue
        if c == "'":
            advance(1)
            buf = ["'"]
            while i < n and text[i] != "'":
                if text[i] == "\n":
                    raise ParseError("unterminated char literal", start_line, start_col)
                if text[i] == "\\" and i + 1 < n:
                    buf.append(text[i])
                    advance(1)
                buf.append(text[i])
                advance(1)
            if i >= n:
                raise ParseError("unterminated char literal", start_line, start_col)
            buf.append("'")
            advance(1)
            tokens.append(Token(KW_LITERAL, "".join(buf), start_line, start_col))
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tok = text[i:j]
            advance(j - i)
            tokens.append(Token(KW_LITERAL, tok, start_line, start_col))
            continue
        if c.isalpha() or c == "_" or c == "$":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_$"):
                j += 1
            word = text[i:j]
            advance(j - i)
            if word in WORD_LITERALS:
                kind = KW_LITERAL
            elif word in KEYWORDS:
                kind = KW_KEYWORD
            else:
                kind = KW_IDENTIFIER
            tokens.append(Token(kind, word, start_line, start_col))
            continue
        two = text[i : i + 2]
        if two in TWO_CHAR_OPERATORS:
            advance(2)
            tokens.append(Token(KW_OPERATOR, two, start_line, start_col))
            continue
        if c in ONE_CHAR_OPERATORS:
            advance(1)
            tokens.append(Token(KW_OPERATOR, c, start_line, start_col))
            continue
        if c in PUNCTUATION:
            advance(1)
            tokens.append(Token(KW_PUNCTUATION, c, start_line, start_col))
            continue
        raise ParseError(f"unexpected character {c!r}", start_line, start_col)
    return tokens
