"""Extended-real arithmetic and the undefined-value marker.

Metrics and cost bounds can be undefined (0/0) or infinite (x/0). Undefined
values are carried as NaN markers, never raised as exceptions; exceptions are
reserved for structural errors. All corner-case rules are written out here so
they can be tested in one place.
"""

from __future__ import annotations

import math

UNDEFINED = math.nan
INF = math.inf


def is_undefined(x: float) -> bool:
    return math.isnan(x)


def is_defined(x: float) -> bool:
    return not math.isnan(x)


def safe_div(num: float, den: float) -> float:
    """Division on the extended reals: 0/0 -> undefined, x/0 -> signed infinity."""
    if den == 0:
        if num == 0:
            return UNDEFINED
        return INF if num > 0 else -INF
    return num / den


def ext_sub(a: float, b: float) -> float:
    """a - b with explicit rules for undefined and infinite operands.

    undefined propagates; inf - inf and (-inf) - (-inf) are undefined;
    inf - finite = finite - (-inf) = +inf; -inf - finite = finite - inf = -inf.
    """
    if math.isnan(a) or math.isnan(b):
        return UNDEFINED
    if math.isinf(a) and math.isinf(b):
        if a == b:
            return UNDEFINED
        return a  # inf - (-inf) = inf, -inf - inf = -inf
    if math.isinf(a):
        return a
    if math.isinf(b):
        return -b
    return a - b


def json_number(x: float):
    """Undefined -> None for JSON; integral floats stay numeric."""
    if math.isnan(x):
        return None
    return x


def json_extended(x: float):
    """Extended real for JSON with sentinel strings for non-finite values."""
    if math.isnan(x):
        return "nan"
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return x


def parse_extended(v) -> float:
    """Inverse of json_extended; also accepts plain numbers."""
    if v is None:
        return UNDEFINED
    if isinstance(v, str):
        return float(v)
    return float(v)


def fmt_float(x) -> str:
    """Shortest round-trip text form; 'nan'/'inf'/'-inf' for non-finite."""
    xf = float(x)
    if math.isfinite(xf) and xf.is_integer() and abs(xf) < 1e15:
        return str(int(xf))
    return repr(xf)
