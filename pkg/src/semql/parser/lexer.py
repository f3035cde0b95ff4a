from __future__ import annotations

from dataclasses import dataclass

from semql.errors import SQLSyntaxError

KEYWORDS = frozenset(
    {
        "SELECT", "FROM", "WHERE", "JOIN", "INNER", "ON", "AND", "OR", "NOT", "AS", "GROUP", "BY",
        "BETWEEN", "IN", "IS", "NULL", "TRUE", "FALSE",
    }
)

PUNCT = ("<=", ">=", "<>", "!=", "(", ")", ",", ".", "*", "=", "<", ">", "[", "]", "{", "}", ":", ";", "-")


@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD, IDENT, STRING, NUMBER, PUNCT, EOF
    value: str
    line: int
    column: int


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(sql)

    def advance(count: int) -> None:
        nonlocal i, line, col
        for ch in sql[i : i + count]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += count

    while i < n:
        ch = sql[i]
        if ch.isspace():
            advance(1)
            continue
        if sql.startswith("--", i):
            end = sql.find("\n", i)
            advance((end if end >= 0 else n) - i)
            continue
        start_line, start_col = line, col
        if ch == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise SQLSyntaxError("unterminated string literal", start_line, start_col)
                if sql[j] == "'":
                    if j + 1 < n and sql[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(sql[j])
                j += 1
            tokens.append(Token("STRING", "".join(buf), start_line, start_col))
            advance(j + 1 - i)
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and sql[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (sql[j].isdigit() or (sql[j] == "." and not seen_dot)):
                if sql[j] == ".":
                    if j + 1 >= n or not sql[j + 1].isdigit():
                        break
                    seen_dot = True
                j += 1
            tokens.append(Token("NUMBER", sql[i:j], start_line, start_col))
            advance(j - i)
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (sql[j].isalnum() or sql[j] == "_"):
                j += 1
            word = sql[i:j]
            if word.upper() in KEYWORDS:
                tokens.append(Token("KEYWORD", word.upper(), start_line, start_col))
            else:
                tokens.append(Token("IDENT", word, start_line, start_col))
            advance(j - i)
            continue
        if ch == '"':
            j = sql.find('"', i + 1)
            if j < 0:
                raise SQLSyntaxError("unterminated quoted identifier", start_line, start_col)
            tokens.append(Token("IDENT", sql[i + 1 : j], start_line, start_col))
            advance(j + 1 - i)
            continue
        for p in PUNCT:
            if sql.startswith(p, i):
                tokens.append(Token("PUNCT", "<>" if p == "!=" else p, start_line, start_col))
                advance(len(p))
                break
        else:
            raise SQLSyntaxError(f"unexpected character {ch!r}", start_line, start_col)
    tokens.append(Token("EOF", "", line, col))
    return tokens
