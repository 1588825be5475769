"""Format registry and value-level codec API.

Thirteen machine-number formats: IEEE binary16/32/64, bfloat16, float8 E4M3,
posit{8,16,32,64} (es=2, 2022 standard) and the linear takum variant at the
same widths. Codes are unsigned ints; values cross this API as XReal.

The bit-level work happens in the kernel backend (compiled when available);
this module owns naming, constants, and the conformance-dump surface.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction

from . import kernels as K
from .xreal import XReal

_PK = K  # operations are backend-selected in kernels

FAMILIES = ("ieee", "bfloat16", "float8_e4m3", "posit", "takum_linear")

_FAMILY_CODE = {
    "ieee": K.FAM_IEEE,
    "bfloat16": K.FAM_BF16,
    "float8_e4m3": K.FAM_E4M3,
    "posit": K.FAM_POSIT,
    "takum_linear": K.FAM_TAKUM,
}


@dataclass(frozen=True)
class FormatId:
    family: str
    width: int
    name: str

    @property
    def fmt(self) -> int:
        return (_FAMILY_CODE[self.family] << 8) | self.width

    @property
    def is_tapered(self) -> bool:
        return self.family in ("posit", "takum_linear")

    def __str__(self) -> str:
        return self.name


def _mk(family, width, name):
    return FormatId(family, width, name)


FLOAT16 = _mk("ieee", 16, "float16")
FLOAT32 = _mk("ieee", 32, "float32")
FLOAT64 = _mk("ieee", 64, "float64")
BFLOAT16 = _mk("bfloat16", 16, "bfloat16")
FLOAT8_E4M3 = _mk("float8_e4m3", 8, "float8_e4m3")
POSIT8 = _mk("posit", 8, "posit8")
POSIT16 = _mk("posit", 16, "posit16")
POSIT32 = _mk("posit", 32, "posit32")
POSIT64 = _mk("posit", 64, "posit64")
TAKUM8 = _mk("takum_linear", 8, "takum_linear8")
TAKUM16 = _mk("takum_linear", 16, "takum_linear16")
TAKUM32 = _mk("takum_linear", 32, "takum_linear32")
TAKUM64 = _mk("takum_linear", 64, "takum_linear64")

ALL_FORMATS = (
    FLOAT16, FLOAT32, FLOAT64, BFLOAT16, FLOAT8_E4M3,
    POSIT8, POSIT16, POSIT32, POSIT64,
    TAKUM8, TAKUM16, TAKUM32, TAKUM64,
)

_BY_NAME = {f.name: f for f in ALL_FORMATS}
_ALIASES = {
    "float8": "float8_e4m3",
    "takum8": "takum_linear8",
    "takum16": "takum_linear16",
    "takum32": "takum_linear32",
    "takum64": "takum_linear64",
}


def parse_format(name: str) -> FormatId:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    try:
        return _BY_NAME[key]
    except KeyError:
        raise ValueError(f"unknown format name: {name!r}") from None


def by_family_width(family: str, width: int) -> FormatId:
    for f in ALL_FORMATS:
        if f.family == family and f.width == width:
            return f
    raise ValueError(f"no format {family!r} at width {width}")


# ---------------------------------------------------------------------------
# value-level operations
# ---------------------------------------------------------------------------

_OPS = {"+": K.OP_ADD, "-": K.OP_SUB, "*": K.OP_MUL, "/": K.OP_DIV,
        "sqrt": K.OP_SQRT, "neg": K.OP_NEG, "abs": K.OP_ABS}


def decode(f: FormatId, code: int) -> XReal:
    """Exact value of the code. NaR and NaN come back as XReal nan,
    IEEE infinities as signed XReal inf; use classify() to tell them apart."""
    cls, sign, sig, exp = K.decode(f.fmt, code)
    if cls == K.CLS_REAL:
        return XReal.from_parts(sign, sig, exp)
    if cls == K.CLS_ZERO:
        return XReal("-0") if sign else XReal(0)
    if cls == K.CLS_INF:
        return -XReal.inf if sign else XReal.inf
    return XReal.nan


def encode(f: FormatId, value) -> int:
    """Round-to-nearest, ties-to-even in the format's value set; posit/takum
    saturate, IEEE overflows to inf, E4M3 overflows to NaN."""
    x = value if isinstance(value, XReal) else XReal(value)
    if x.is_nan():
        return K.encode_parts(f.fmt, K.CLS_NAR, 0, 0, 0, 0)
    if x.is_inf():
        return K.encode_parts(f.fmt, K.CLS_INF, x.sign_bit(), 0, 0, 0)
    if x.is_zero():
        return K.encode_parts(f.fmt, K.CLS_ZERO, x.sign_bit(), 0, 0, 0)
    sign, sig, exp = x.to_parts()
    return K.encode_parts(f.fmt, K.CLS_REAL, sign, sig, exp, 0)


def arith(f: FormatId, op: str, a: int, b: int = 0) -> int:
    return K.arith(f.fmt, _OPS[op], a, b)


def convert(src: FormatId, dst: FormatId, code: int) -> int:
    return K.convert(src.fmt, dst.fmt, code)


def total_order_compare(f: FormatId, a: int, b: int) -> str:
    """'<' | '=' | '>' | 'unordered' in decoded-value order; NaR/NaN are
    unordered against everything including themselves."""
    r = K.compare(f.fmt, a, b)
    return {-1: "<", 0: "=", 1: ">", 2: "unordered"}[r]


def classify(f: FormatId, code: int) -> str:
    """One of real | zero | nar | nan | inf."""
    cls, _ = K.classify(f.fmt, code)
    if cls == K.CLS_REAL:
        return "real"
    if cls == K.CLS_ZERO:
        return "zero"
    if cls == K.CLS_INF:
        return "inf"
    return "nar" if f.is_tapered else "nan"


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FormatConstants:
    max_finite: XReal
    min_positive: XReal  # smallest positive normal for IEEE-style families
    machine_eps: XReal   # eps = 2**(1-p), p = significand precision at 1.0
    nar_or_nan_code: int
    zero_code: int


def _max_finite_code(f: FormatId) -> int:
    w = f.width
    if f.is_tapered:
        return (1 << (w - 1)) - 1
    if f is FLOAT8_E4M3 or f.name == "float8_e4m3":
        return 0x7E
    eb = {FLOAT16.name: 5, FLOAT32.name: 8, FLOAT64.name: 11, BFLOAT16.name: 8}[f.name]
    fbits = w - 1 - eb
    return ((((1 << eb) - 2) << fbits) | ((1 << fbits) - 1))


def _min_positive_code(f: FormatId) -> int:
    if f.is_tapered:
        return 1
    if f.name == "float8_e4m3":
        return 0x08  # exponent field 1, fraction 0: smallest normal 2**-6
    eb = {FLOAT16.name: 5, FLOAT32.name: 8, FLOAT64.name: 11, BFLOAT16.name: 8}[f.name]
    fbits = f.width - 1 - eb
    return 1 << fbits  # exponent field 1


def constants(f: FormatId) -> FormatConstants:
    one = encode(f, 1)
    eps = decode(f, one + 1) - 1
    return FormatConstants(
        max_finite=decode(f, _max_finite_code(f)),
        min_positive=decode(f, _min_positive_code(f)),
        machine_eps=eps,
        nar_or_nan_code=K.encode_parts(f.fmt, K.CLS_NAR, 0, 0, 0, 0),
        zero_code=0,
    )


def machine_eps_by_width(width: int) -> Fraction:
    """eps = 2**(1-p) of the reference IEEE float at this width (float8
    E4M3 stands in at width 8). Used by iteration tolerances."""
    p = {8: 4, 16: 11, 32: 24, 64: 53}[width]
    return Fraction(2) ** (1 - p)


# ---------------------------------------------------------------------------
# conformance dump
# ---------------------------------------------------------------------------

def _decimal36(sign: int, sig: int, exp: int) -> str:
    """Exact dyadic rendered with 36 significant digits, one half-even
    rounding. Decimal exponents are unpadded (448 -> ...e+2)."""
    if sig == 0:
        # Decimal zero picks up a spurious e+35 under the ".35e" format
        return "0.00000000000000000000000000000000000e+0"
    with localcontext() as ctx:
        ctx.prec = 900  # every finite format value terminates within this
        d = Decimal(sig)
        if exp >= 0:
            d = d * (Decimal(2) ** exp)
        else:
            d = d / (Decimal(2) ** (-exp))
        if sign:
            d = -d
        return format(d, ".35e")


def dump_row(f: FormatId, code: int) -> str:
    """One `code_hex,value_decimal,class` row. Non-real classes carry a
    token (nar/nan/inf/-inf) in the value column; zeros render as 0."""
    cls, sign = K.classify(f.fmt, code)
    hexw = (f.width + 3) // 4
    chex = format(code, f"0{hexw}x")
    label = classify(f, code)
    if cls == K.CLS_REAL:
        _, s, sig, exp = K.decode(f.fmt, code)
        return f"{chex},{_decimal36(s, sig, exp)},{label}"
    if cls == K.CLS_ZERO:
        return f"{chex},{_decimal36(sign, 0, 0)},{label}"
    if cls == K.CLS_INF:
        return f"{chex},{'-inf' if sign else 'inf'},{label}"
    return f"{chex},{label},{label}"


def dump_codes(f: FormatId, codes) -> str:
    """CSV text for the given codes, header included."""
    lines = ["code_hex,value_decimal,class"]
    lines.extend(dump_row(f, c) for c in codes)
    return "\n".join(lines) + "\n"
