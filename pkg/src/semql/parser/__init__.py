from semql.parser.ast import AiCall, AiKind, Select
from semql.parser.lower import lower
from semql.parser.parser import parse
from semql.parser.printer import expr_sql, to_sql

__all__ = ["AiCall", "AiKind", "Select", "expr_sql", "lower", "parse", "to_sql"]
