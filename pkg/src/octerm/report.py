"""JSON helpers shared by the report types and the CLI."""
from __future__ import annotations

import json
from decimal import ROUND_CEILING, ROUND_FLOOR, Context, Decimal
from fractions import Fraction

from .model import format_rational

SCHEMA_VERSION = "1.0"


def rational(value: Fraction) -> str:
    return format_rational(value)


def decimal(value: Fraction, direction: str = "down", digits: int = 40) -> str:
    """Decimal string rounded towards -inf ("down") or +inf ("up")."""
    ctx = Context(prec=digits, rounding=ROUND_FLOOR if direction == "down" else ROUND_CEILING)
    return str(ctx.divide(Decimal(int(value.numerator)), Decimal(int(value.denominator))))


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, ensure_ascii=False) + "\n"
