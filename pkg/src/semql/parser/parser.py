"""Recursive-descent parser for the semantic SQL subset.

Covered: ``SELECT`` lists with aliases, ``FROM`` with one optional inner
``JOIN ... ON``, ``WHERE`` conjunctions, ``GROUP BY``, ``BETWEEN``, ``IN``
lists, the AI functions, ``PROMPT(...)``, ``FL_IS_IMAGE`` and ``COUNT``.
"""

from __future__ import annotations

from semql.core.prompt import PromptTemplate
from semql.core.values import ColumnRef
from semql.errors import ArityMismatch, SQLSyntaxError
from semql.parser.ast import (
    AGGREGATE_KINDS,
    AiCall,
    AiKind,
    ArrayLit,
    Between,
    Compare,
    Expr,
    FuncCall,
    InList,
    IsNull,
    JoinClause,
    Literal,
    Select,
    SelectItem,
    Star,
    TableRef,
)
from semql.parser.lexer import Token, tokenize

_AI_NAMES = {k.value: k for k in AiKind}
_CMP_OPS = ("=", "<>", "<", "<=", ">", ">=")


class _Options(tuple):
    """Marker type for a parsed ``{'k': 'v'}`` options literal."""


def parse(sql: str) -> Select:
    return _Parser(tokenize(sql)).statement()


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    # -- token helpers -------------------------------------------------
    @property
    def cur(self) -> Token:
        return self.toks[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.toks[min(self.pos + offset, len(self.toks) - 1)]

    def error(self, message: str, expected=(), tok: Token | None = None) -> SQLSyntaxError:
        tok = tok or self.cur
        return SQLSyntaxError(message, tok.line, tok.column, frozenset(expected))

    def at_kw(self, *words: str) -> bool:
        return self.cur.kind == "KEYWORD" and self.cur.value in words

    def at_punct(self, *ps: str) -> bool:
        return self.cur.kind == "PUNCT" and self.cur.value in ps

    def accept_kw(self, word: str) -> bool:
        if self.at_kw(word):
            self.pos += 1
            return True
        return False

    def accept_punct(self, p: str) -> bool:
        if self.at_punct(p):
            self.pos += 1
            return True
        return False

    def expect_kw(self, word: str) -> Token:
        if not self.at_kw(word):
            raise self.error(f"unexpected {self._describe()}", {word})
        tok = self.cur
        self.pos += 1
        return tok

    def expect_punct(self, p: str) -> Token:
        if not self.at_punct(p):
            raise self.error(f"unexpected {self._describe()}", {p})
        tok = self.cur
        self.pos += 1
        return tok

    def expect_ident(self) -> str:
        if self.cur.kind != "IDENT":
            raise self.error(f"unexpected {self._describe()}", {"identifier"})
        value = self.cur.value
        self.pos += 1
        return value

    def expect_string(self) -> str:
        if self.cur.kind != "STRING":
            raise self.error(f"unexpected {self._describe()}", {"string literal"})
        value = self.cur.value
        self.pos += 1
        return value

    def _describe(self) -> str:
        tok = self.cur
        if tok.kind == "EOF":
            return "end of input"
        if tok.kind == "STRING":
            return f"string '{tok.value}'"
        return f"{tok.kind.lower()} {tok.value!r}"

    # -- statement -----------------------------------------------------
    def statement(self) -> Select:
        self.expect_kw("SELECT")
        items = [self.select_item()]
        while self.accept_punct(","):
            items.append(self.select_item())
        from_ = join = None
        where: list[Expr] = []
        group_by: list[Expr] = []
        if self.accept_kw("FROM"):
            from_ = self.table_ref()
            if self.at_kw("JOIN", "INNER"):
                self.accept_kw("INNER")
                self.expect_kw("JOIN")
                right = self.table_ref()
                self.expect_kw("ON")
                join = JoinClause(right, tuple(self.conjunction("on")))
            elif self.at_punct(","):
                raise self.error("comma joins are not supported; use JOIN ... ON", {"JOIN", "WHERE", "GROUP"})
        if self.accept_kw("WHERE"):
            where = self.conjunction("where")
        if self.accept_kw("GROUP"):
            self.expect_kw("BY")
            group_by.append(self.expr("group"))
            while self.accept_punct(","):
                group_by.append(self.expr("group"))
        self.accept_punct(";")
        if self.cur.kind != "EOF":
            expected = {"WHERE", "GROUP", ";", "end of input"}
            if from_ is None:
                expected.add("FROM")
            raise self.error(f"unexpected {self._describe()}", expected)
        return Select(tuple(items), from_, join, tuple(where), tuple(group_by))

    def select_item(self) -> SelectItem:
        if self.accept_punct("*"):
            return SelectItem(Star())
        if self.cur.kind == "IDENT" and self.peek().value == "." and self.peek(2).value == "*":
            table = self.cur.value
            self.pos += 3
            return SelectItem(Star(table))
        expr = self.expr("select")
        alias = None
        if self.accept_kw("AS"):
            alias = self.expect_ident()
        elif self.cur.kind == "IDENT":
            alias = self.expect_ident()
        return SelectItem(expr, alias)

    def table_ref(self) -> TableRef:
        name = self.expect_ident()
        alias = None
        if self.accept_kw("AS"):
            alias = self.expect_ident()
        elif self.cur.kind == "IDENT":
            alias = self.expect_ident()
        return TableRef(name, alias)

    def conjunction(self, ctx: str) -> list[Expr]:
        preds = [self.predicate(ctx)]
        while True:
            if self.accept_kw("AND"):
                preds.append(self.predicate(ctx))
            elif self.at_kw("OR"):
                raise self.error("OR is not supported; only AND-conjunctions are allowed", {"AND"})
            else:
                return preds

    def predicate(self, ctx: str) -> Expr:
        if self.accept_punct("("):
            inner = self.predicate(ctx)
            if self.at_kw("OR"):
                raise self.error("OR is not supported; only AND-conjunctions are allowed", {")"})
            self.expect_punct(")")
            return inner
        left = self.expr(ctx)
        negated = False
        if self.at_kw("NOT") and self.peek().value in ("BETWEEN", "IN"):
            self.pos += 1
            negated = True
        if self.accept_kw("BETWEEN"):
            low = self.expr(ctx)
            self.expect_kw("AND")
            high = self.expr(ctx)
            return Between(left, low, high, negated)
        if self.accept_kw("IN"):
            self.expect_punct("(")
            items = [self.expr(ctx)]
            while self.accept_punct(","):
                items.append(self.expr(ctx))
            self.expect_punct(")")
            return InList(left, tuple(items), negated)
        if self.accept_kw("IS"):
            neg = self.accept_kw("NOT")
            self.expect_kw("NULL")
            return IsNull(left, neg)
        if self.at_punct(*_CMP_OPS):
            op = self.cur.value
            self.pos += 1
            right = self.expr(ctx)
            return Compare(op, left, right)
        return left

    # -- expressions ---------------------------------------------------
    def expr(self, ctx: str) -> Expr:
        tok = self.cur
        sign = 1
        if tok.kind == "PUNCT" and tok.value == "-" and self.peek().kind == "NUMBER":
            sign = -1
            self.pos += 1
            tok = self.cur
        if tok.kind == "NUMBER":
            self.pos += 1
            return Literal(sign * (float(tok.value) if "." in tok.value else int(tok.value)))
        if tok.kind == "STRING":
            self.pos += 1
            return Literal(tok.value)
        if tok.kind == "KEYWORD" and tok.value in ("TRUE", "FALSE", "NULL"):
            self.pos += 1
            return Literal({"TRUE": True, "FALSE": False, "NULL": None}[tok.value])
        if self.at_punct("["):
            return self.array(ctx)
        if tok.kind == "IDENT":
            if self.peek().value == "(" and self.peek().kind == "PUNCT":
                return self.function(ctx)
            return self.column_ref()
        raise self.error(
            f"unexpected {self._describe()}",
            {"identifier", "number", "string literal", "function call", "["},
        )

    def column_ref(self) -> ColumnRef:
        first = self.expect_ident()
        if self.accept_punct("."):
            return ColumnRef(first, self.expect_ident())
        return ColumnRef(None, first)

    def array(self, ctx: str) -> ArrayLit:
        self.expect_punct("[")
        items: list[Expr] = []
        if not self.at_punct("]"):
            items.append(self.expr(ctx))
            while self.accept_punct(","):
                items.append(self.expr(ctx))
        self.expect_punct("]")
        return ArrayLit(tuple(items))

    def options(self) -> _Options:
        self.expect_punct("{")
        pairs: list[tuple[str, str]] = []
        if not self.at_punct("}"):
            while True:
                key = self.expect_string()
                self.expect_punct(":")
                if self.cur.kind in ("STRING", "NUMBER"):
                    pairs.append((key, self.cur.value))
                    self.pos += 1
                elif self.at_kw("TRUE", "FALSE"):
                    pairs.append((key, self.cur.value.lower()))
                    self.pos += 1
                else:
                    raise self.error(f"unexpected {self._describe()}", {"string literal", "number"})
                if not self.accept_punct(","):
                    break
        self.expect_punct("}")
        return _Options(pairs)

    def prompt_call(self) -> PromptTemplate:
        tok = self.cur
        self.pos += 1  # PROMPT
        self.expect_punct("(")
        template = self.expect_string()
        bindings: list[ColumnRef] = []
        while self.accept_punct(","):
            if self.cur.kind != "IDENT":
                raise self.error(f"unexpected {self._describe()}", {"column reference"})
            bindings.append(self.column_ref())
        self.expect_punct(")")
        try:
            return PromptTemplate(template, tuple(bindings))
        except ArityMismatch as exc:
            raise SQLSyntaxError(str(exc), tok.line, tok.column) from None

    def ai_arg(self, ctx: str):
        if self.at_punct("{"):
            return self.options()
        if self.cur.kind == "IDENT" and self.cur.value.upper() == "PROMPT" and self.peek().value == "(":
            return self.prompt_call()
        return self.expr(ctx)

    def function(self, ctx: str) -> Expr:
        name_tok = self.cur
        name = name_tok.value.upper()
        if name in _AI_NAMES or name == "AI_JOIN":
            return self.ai_function(name, name_tok, ctx)
        if name == "PROMPT":
            raise self.error("PROMPT(...) is only valid as an AI function argument", tok=name_tok)
        self.pos += 1
        self.expect_punct("(")
        if name == "COUNT":
            if ctx != "select":
                raise self.error("aggregate COUNT is only allowed in the select list", tok=name_tok)
            if self.accept_punct("*"):
                args: tuple = (Star(),)
            else:
                args = (self.column_ref(),)
            self.expect_punct(")")
            return FuncCall("COUNT", args)
        if name == "FL_IS_IMAGE":
            arg = self.column_ref()
            self.expect_punct(")")
            return FuncCall("FL_IS_IMAGE", (arg,))
        raise SQLSyntaxError(
            f"unknown function {name_tok.value}",
            name_tok.line,
            name_tok.column,
            frozenset({*_AI_NAMES, "COUNT", "FL_IS_IMAGE"}),
        )

    def ai_function(self, name: str, name_tok: Token, ctx: str) -> AiCall:
        if name == "AI_JOIN":
            if ctx != "on":
                raise self.error("AI_JOIN is only allowed in a JOIN ... ON clause", tok=name_tok)
            kind = AiKind.FILTER
        else:
            kind = _AI_NAMES[name]
        if kind in AGGREGATE_KINDS and ctx != "select":
            raise self.error(f"aggregate {name} is only allowed in the select list", tok=name_tok)
        if kind is AiKind.FILTER and ctx not in ("where", "on"):
            raise self.error(f"{name} is only allowed in WHERE or ON", tok=name_tok)
        self.pos += 1
        self.expect_punct("(")
        args = []
        if not self.at_punct(")"):
            args.append(self.ai_arg(ctx))
            while self.accept_punct(","):
                args.append(self.ai_arg(ctx))
        close = self.expect_punct(")")
        options: tuple = ()
        if args and isinstance(args[-1], _Options):
            options = tuple(args.pop())
        if any(isinstance(a, _Options) for a in args):
            raise self.error("options object must be the last argument", tok=close)

        def bad(msg: str) -> SQLSyntaxError:
            return SQLSyntaxError(f"{name}: {msg}", name_tok.line, name_tok.column)

        def as_prompt(arg) -> tuple[PromptTemplate, bool]:
            if isinstance(arg, PromptTemplate):
                return arg, False
            if isinstance(arg, Literal) and isinstance(arg.value, str):
                return PromptTemplate(arg.value, ()), True
            if isinstance(arg, ColumnRef):
                return PromptTemplate("{0}", (arg,)), False
            raise bad("expected PROMPT(...), a string or a column")

        if kind is AiKind.FILTER:
            if len(args) != 1:
                raise bad("expected exactly one prompt argument")
            prompt, bare = as_prompt(args[0])
            return AiCall(kind, prompt, options=options, bare_string=bare)
        if kind is AiKind.COMPLETE:
            model = instruction = None
            if len(args) == 1:
                prompt, bare = as_prompt(args[0])
            elif len(args) == 2 and _is_str(args[0]):
                model = args[0].value
                prompt, bare = as_prompt(args[1])
            elif len(args) == 3 and _is_str(args[0]) and _is_str(args[1]):
                model, instruction = args[0].value, args[1].value
                if not isinstance(args[2], ColumnRef):
                    raise bad("third argument must be a column")
                prompt, bare = as_prompt(args[2])
            else:
                raise bad("expected (prompt), (model, prompt) or (model, instruction, column)")
            return AiCall(kind, prompt, options=options, model=model, instruction=instruction, bare_string=bare)
        if kind is AiKind.CLASSIFY:
            if len(args) not in (2, 3):
                raise bad("expected (input, labels[, instruction])")
            prompt, bare = as_prompt(args[0])
            labels = args[1]
            if not isinstance(labels, (ArrayLit, ColumnRef)):
                raise bad("labels must be an array literal or a column")
            instruction = None
            if len(args) == 3:
                if not _is_str(args[2]):
                    raise bad("instruction must be a string literal")
                instruction = args[2].value
            return AiCall(kind, prompt, labels=labels, instruction=instruction, options=options, bare_string=bare)
        if kind is AiKind.AGG:
            if len(args) != 2 or not isinstance(args[0], ColumnRef) or not _is_str(args[1]):
                raise bad("expected (column, 'instruction')")
            return AiCall(kind, PromptTemplate("{0}", (args[0],)), instruction=args[1].value, options=options)
        # SUMMARIZE_AGG
        if len(args) != 1 or not isinstance(args[0], ColumnRef):
            raise bad("expected a single column argument")
        return AiCall(kind, PromptTemplate("{0}", (args[0],)), options=options)


def _is_str(arg) -> bool:
    return isinstance(arg, Literal) and isinstance(arg.value, str)
