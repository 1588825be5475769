# cython: language_level=3, boundscheck=False, wraparound=False
# cython: cdivision=True, initializedcheck=False
"""Compiled codec engine: bit-exact twin of _pykernels.

Same contract, C integer core. Significands ride in unsigned 128-bit
registers; addition aligns operands inside a 120-bit window and folds
anything below it into the sticky bit, division takes a 66-bit-plus
quotient, square root scales the radicand to 126 bits. Every truncated
intermediate keeps >= 63 significant bits, which pins round-to-nearest
-even decisions exactly (format grids and midpoints never exceed 61
bits), so results match the arbitrary-precision backend code for code.
Exhaustive parity tests enforce that.
"""

from libc.stdint cimport int32_t, int64_t, uint8_t, uint64_t

cdef extern from *:
    ctypedef unsigned long long u128 "unsigned __int128"
    int __builtin_clzll(unsigned long long) nogil

from libc.math cimport sqrt as fsqrt


cdef enum:
    FAM_IEEE = 0
    FAM_BF16 = 1
    FAM_E4M3 = 2
    FAM_POSIT = 3
    FAM_TAKUM = 4

    CLS_REAL = 0
    CLS_ZERO = 1
    CLS_NAR = 2
    CLS_INF = 3

    OP_ADD = 0
    OP_SUB = 1
    OP_MUL = 2
    OP_DIV = 3
    OP_SQRT = 4
    OP_NEG = 5
    OP_ABS = 6

    F_FLOAT16 = (FAM_IEEE << 8) | 16
    F_FLOAT32 = (FAM_IEEE << 8) | 32
    F_FLOAT64 = (FAM_IEEE << 8) | 64
    F_BFLOAT16 = (FAM_BF16 << 8) | 16
    F_E4M3 = (FAM_E4M3 << 8) | 8

    E4M3_NAN = 0x7F


cdef inline int _bl64(uint64_t x) noexcept nogil:
    if x == 0:
        return 0
    return 64 - __builtin_clzll(x)


cdef inline int _bl128(u128 x) noexcept nogil:
    cdef uint64_t hi = <uint64_t> (x >> 64)
    if hi != 0:
        return 128 - __builtin_clzll(hi)
    return _bl64(<uint64_t> x)


cdef inline uint64_t _maskw(int w) noexcept nogil:
    if w >= 64:
        return <uint64_t> 0xFFFFFFFFFFFFFFFFULL
    return ((<uint64_t> 1) << w) - 1


cdef inline bint _ieee_params(int fmt, int* w, int* eb, int* p, int* bias) noexcept nogil:
    if fmt == F_FLOAT16:
        w[0] = 16; eb[0] = 5; p[0] = 11; bias[0] = 15
    elif fmt == F_FLOAT32:
        w[0] = 32; eb[0] = 8; p[0] = 24; bias[0] = 127
    elif fmt == F_FLOAT64:
        w[0] = 64; eb[0] = 11; p[0] = 53; bias[0] = 1023
    elif fmt == F_BFLOAT16:
        w[0] = 16; eb[0] = 8; p[0] = 8; bias[0] = 127
    elif fmt == F_E4M3:
        w[0] = 8; eb[0] = 4; p[0] = 4; bias[0] = 7
    else:
        return False
    return True


cdef inline uint64_t _ieee_nan_code(int fmt) noexcept nogil:
    cdef int w, eb, p, bias
    if fmt == F_E4M3:
        return E4M3_NAN
    _ieee_params(fmt, &w, &eb, &p, &bias)
    return (((<uint64_t> 1 << eb) - 1) << (p - 1)) | (<uint64_t> 1 << (p - 2))


cdef inline uint64_t _ieee_inf_code(int fmt, int sign) noexcept nogil:
    cdef int w, eb, p, bias
    _ieee_params(fmt, &w, &eb, &p, &bias)
    return ((<uint64_t> sign) << (w - 1)) | (((<uint64_t> 1 << eb) - 1) << (p - 1))


cdef struct Dec:
    int cls
    int sign
    u128 sig
    long exp


# ---------------------------------------------------------------------------
# decode
# ---------------------------------------------------------------------------

cdef void _decode_ieee(int fmt, uint64_t code, Dec* d) noexcept nogil:
    cdef int w, eb, p, bias, fbits
    cdef uint64_t e, f, emax_field
    _ieee_params(fmt, &w, &eb, &p, &bias)
    fbits = p - 1
    d.cls = CLS_REAL
    d.sign = <int> ((code >> (w - 1)) & 1)
    e = (code >> fbits) & ((<uint64_t> 1 << eb) - 1)
    f = code & ((<uint64_t> 1 << fbits) - 1)
    emax_field = (<uint64_t> 1 << eb) - 1
    if fmt == F_E4M3:
        if e == emax_field and f == (<uint64_t> 1 << fbits) - 1:
            d.cls = CLS_NAR; d.sign = 0; d.sig = 0; d.exp = 0
            return
        # all other codes are finite; exponent field 1111 extends the range
    elif e == emax_field:
        if f == 0:
            d.cls = CLS_INF; d.sig = 0; d.exp = 0
        else:
            d.cls = CLS_NAR; d.sign = 0; d.sig = 0; d.exp = 0
        return
    if e == 0:
        if f == 0:
            d.cls = CLS_ZERO; d.sig = 0; d.exp = 0
        else:
            d.sig = f; d.exp = 1 - bias - fbits
        return
    d.sig = (<uint64_t> 1 << fbits) | f
    d.exp = <long> e - bias - fbits


cdef void _decode_posit(int w, uint64_t code, Dec* d) noexcept nogil:
    cdef int bw, run, k, consumed, rem_bits, e, fb
    cdef uint64_t body, rem, f
    if code == 0:
        d.cls = CLS_ZERO; d.sign = 0; d.sig = 0; d.exp = 0
        return
    if code == (<uint64_t> 1) << (w - 1):
        d.cls = CLS_NAR; d.sign = 0; d.sig = 0; d.exp = 0
        return
    d.cls = CLS_REAL
    d.sign = <int> ((code >> (w - 1)) & 1)
    if d.sign:
        code = (0 - code) & _maskw(w)
    body = code  # sign bit is now 0; body occupies w-1 bits
    bw = w - 1
    if (body >> (bw - 1)) & 1:
        run = bw - _bl64(body ^ (((<uint64_t> 1) << bw) - 1))  # leading ones
        k = run - 1
        consumed = run + 1 if run < bw else bw
    else:
        run = bw - _bl64(body)  # leading zeros; body != 0
        k = -run
        consumed = run + 1
    rem_bits = bw - consumed
    rem = body & (((<uint64_t> 1) << rem_bits) - 1) if rem_bits > 0 else 0
    if rem_bits >= 2:
        e = <int> (rem >> (rem_bits - 2))
        fb = rem_bits - 2
        f = rem & (((<uint64_t> 1) << fb) - 1)
    else:
        e = <int> (rem << (2 - rem_bits))
        fb = 0
        f = 0
    d.sig = ((<uint64_t> 1) << fb) | f
    d.exp = 4 * <long> k + e - fb


cdef void _decode_takum(int w, uint64_t code, Dec* d) noexcept nogil:
    cdef int dbit, regime, r, rem_bits, cb, mb
    cdef long c
    cdef uint64_t rem, c_raw, c_field, f
    if code == 0:
        d.cls = CLS_ZERO; d.sign = 0; d.sig = 0; d.exp = 0
        return
    if code == (<uint64_t> 1) << (w - 1):
        d.cls = CLS_NAR; d.sign = 0; d.sig = 0; d.exp = 0
        return
    d.cls = CLS_REAL
    d.sign = <int> ((code >> (w - 1)) & 1)
    if d.sign:
        code = (0 - code) & _maskw(w)
    dbit = <int> ((code >> (w - 2)) & 1)
    regime = <int> ((code >> (w - 5)) & 7)
    r = regime if dbit else 7 - regime
    rem_bits = w - 5
    rem = code & (((<uint64_t> 1) << rem_bits) - 1)
    cb = r if r < rem_bits else rem_bits
    c_raw = rem >> (rem_bits - cb) if cb > 0 else 0
    c_field = c_raw << (r - cb)  # short widths zero-extend the bit string
    if dbit:
        c = ((<long> 1) << r) - 1 + <long> c_field
    else:
        c = -((<long> 1) << (r + 1)) + 1 + <long> c_field
    mb = rem_bits - cb
    f = rem & (((<uint64_t> 1) << mb) - 1)
    d.sig = ((<uint64_t> 1) << mb) | f
    d.exp = c - mb


cdef void _c_decode(int fmt, uint64_t code, Dec* d) noexcept nogil:
    cdef int fam = fmt >> 8
    if fam == FAM_POSIT:
        _decode_posit(fmt & 0xFF, code, d)
    elif fam == FAM_TAKUM:
        _decode_takum(fmt & 0xFF, code, d)
    else:
        _decode_ieee(fmt, code, d)


# ---------------------------------------------------------------------------
# encode
# ---------------------------------------------------------------------------

cdef u128 _round_to_quantum(u128 sig, long exp, int sticky, long qexp) noexcept nogil:
    cdef long shift = qexp - exp
    cdef u128 dropped, m
    cdef int guard
    cdef bint rest
    if shift <= 0:
        # exact alignment; producer contract keeps sticky below this quantum
        return sig << (-shift)
    if shift >= 128:
        return 0  # sig has < 128 bits, so even the guard bit is clear
    dropped = sig & (((<u128> 1) << shift) - 1)
    m = sig >> shift
    guard = <int> ((dropped >> (shift - 1)) & 1)
    rest = (dropped ^ ((<u128> guard) << (shift - 1))) != 0 or sticky != 0
    if guard and (rest or (m & 1)):
        m += 1
    return m


cdef uint64_t _encode_ieee(int fmt, int cls, int sign, u128 sig, long exp,
                           int sticky) noexcept nogil:
    cdef int w, eb, p, bias, fbits, bl
    cdef long s, emin, qexp, e_field
    cdef u128 m
    cdef uint64_t f
    _ieee_params(fmt, &w, &eb, &p, &bias)
    fbits = p - 1
    if cls == CLS_NAR:
        return _ieee_nan_code(fmt)
    if cls == CLS_INF:
        if fmt == F_E4M3:
            return E4M3_NAN  # no infinities in E4M3
        return _ieee_inf_code(fmt, sign)
    if cls == CLS_ZERO or sig == 0:
        return (<uint64_t> sign) << (w - 1)
    s = exp + _bl128(sig) - 1
    emin = 1 - bias
    qexp = s - fbits
    if qexp < emin - fbits:
        qexp = emin - fbits
    m = _round_to_quantum(sig, exp, sticky, qexp)
    if m == 0:
        return (<uint64_t> sign) << (w - 1)  # underflow to (signed) zero
    bl = _bl128(m)
    if bl > p:  # carry into the next binade
        m >>= 1
        qexp += 1
        bl -= 1
    if bl == p:
        e_field = qexp + fbits + bias
        f = <uint64_t> (m - ((<u128> 1) << fbits))
        if fmt == F_E4M3:
            if e_field > 15 or (e_field == 15 and f == (<uint64_t> 1 << fbits) - 1):
                return E4M3_NAN  # |v| > 448 after rounding
        elif e_field >= (1 << eb) - 1:
            return _ieee_inf_code(fmt, sign)
        return ((<uint64_t> sign) << (w - 1)) | ((<uint64_t> e_field) << fbits) | f
    # subnormal: qexp is pinned at emin - fbits
    return ((<uint64_t> sign) << (w - 1)) | <uint64_t> m


cdef uint64_t _cut_round(u128 headint, int headlen, u128 sig, int sticky,
                         int bw) noexcept nogil:
    """Round the code expansion [header bits | fraction bits of sig] to bw
    bits, nearest-even on the retained code. sig's leading bit is implicit."""
    cdef int fbits = _bl128(sig) - 1
    cdef u128 fsig = sig - ((<u128> 1) << fbits)
    cdef int tb = bw + 1 - headlen  # fraction bits wanted, guard included
    cdef int drop, guard
    cdef u128 ft, bg, body
    cdef bint rest
    if tb <= 0:
        drop = headlen - bw
        body = headint >> drop
        guard = <int> ((headint >> (drop - 1)) & 1)
        rest = (headint & (((<u128> 1) << (drop - 1)) - 1)) != 0 \
            or fsig != 0 or sticky != 0
    else:
        if fbits >= tb:
            ft = fsig >> (fbits - tb)
            rest = (fsig & (((<u128> 1) << (fbits - tb)) - 1)) != 0 or sticky != 0
        else:
            ft = fsig << (tb - fbits)
            rest = sticky != 0
        bg = (headint << tb) | ft
        guard = <int> (bg & 1)
        body = bg >> 1
    if guard and (rest or (body & 1)):
        body += 1
    return <uint64_t> body


cdef bint _value_gt(u128 sig1, long exp1, int sticky1, u128 sig2,
                    long exp2) noexcept nogil:
    """sig1*2**exp1 (+sticky1) > sig2*2**exp2, exact."""
    cdef long t1 = exp1 + _bl128(sig1)
    cdef long t2 = exp2 + _bl128(sig2)
    cdef long e
    cdef u128 a, b
    if t1 != t2:
        return t1 > t2
    e = exp1 if exp1 < exp2 else exp2
    a = sig1 << (exp1 - e)
    b = sig2 << (exp2 - e)
    if a != b:
        return a > b
    return sticky1 != 0


cdef bint _value_lt(u128 sig1, long exp1, u128 sig2, long exp2) noexcept nogil:
    cdef long t1 = exp1 + _bl128(sig1)
    cdef long t2 = exp2 + _bl128(sig2)
    cdef long e
    if t1 != t2:
        return t1 < t2
    e = exp1 if exp1 < exp2 else exp2
    return (sig1 << (exp1 - e)) < (sig2 << (exp2 - e))


cdef uint64_t _encode_posit(int w, int cls, int sign, u128 sig, long exp,
                            int sticky) noexcept nogil:
    cdef long smax, s, k
    cdef int e, rb
    cdef uint64_t regime, body
    cdef u128 headint
    if cls == CLS_NAR or cls == CLS_INF:
        return (<uint64_t> 1) << (w - 1)
    if cls == CLS_ZERO or sig == 0:
        return 0
    smax = 4 * (<long> w - 2)
    s = exp + _bl128(sig) - 1
    if s >= smax:
        body = ((<uint64_t> 1) << (w - 1)) - 1  # saturate at maxpos
    elif s < -smax:
        body = 1  # saturate at minpos
    else:
        k = s >> 2
        e = <int> (s - 4 * k)
        if k >= 0:
            regime = (((<uint64_t> 1) << (k + 1)) - 1) << 1  # k+1 ones, then 0
            rb = <int> k + 2
        else:
            regime = 1  # -k zeros then a one
            rb = <int> (-k) + 1
        headint = ((<u128> regime) << 2) | <u128> e
        body = _cut_round(headint, rb + 2, sig, sticky, w - 1)
    if sign:
        return (0 - body) & _maskw(w)
    return body


# max-finite and min-positive decompositions, filled at module init
cdef u128 _tk_sig_lo[4]
cdef long _tk_exp_lo[4]
cdef u128 _tk_sig_hi[4]
cdef long _tk_exp_hi[4]


cdef inline int _tk_idx(int w) noexcept nogil:
    if w == 8:
        return 0
    if w == 16:
        return 1
    if w == 32:
        return 2
    return 3


cdef uint64_t _encode_takum(int w, int cls, int sign, u128 sig, long exp,
                            int sticky) noexcept nogil:
    cdef int i, r, regime, d
    cdef long c, c_field
    cdef uint64_t body
    cdef u128 headint
    if cls == CLS_NAR or cls == CLS_INF:
        return (<uint64_t> 1) << (w - 1)
    if cls == CLS_ZERO or sig == 0:
        return 0
    i = _tk_idx(w)
    if _value_gt(sig, exp, sticky, _tk_sig_hi[i], _tk_exp_hi[i]):
        body = ((<uint64_t> 1) << (w - 1)) - 1  # saturate at the max code
    elif _value_lt(sig, exp, _tk_sig_lo[i], _tk_exp_lo[i]):
        body = 1  # saturate at the min-positive code
    else:
        c = exp + _bl128(sig) - 1  # in [-255, 254] after the clamps
        if c >= 0:
            r = _bl64(<uint64_t> (c + 1)) - 1
            c_field = c - (((<long> 1) << r) - 1)
            regime = r
            d = 1
        else:
            r = _bl64(<uint64_t> (-c)) - 1
            c_field = c + (((<long> 1) << (r + 1)) - 1)
            regime = 7 - r
            d = 0
        headint = ((<u128> d) << (3 + r)) | ((<u128> regime) << r) | <u128> c_field
        body = _cut_round(headint, 4 + r, sig, sticky, w - 1)
    if sign:
        return (0 - body) & _maskw(w)
    return body


cdef uint64_t _c_encode(int fmt, int cls, int sign, u128 sig, long exp,
                        int sticky) noexcept nogil:
    cdef int fam = fmt >> 8
    if fam == FAM_POSIT:
        return _encode_posit(fmt & 0xFF, cls, sign, sig, exp, sticky)
    if fam == FAM_TAKUM:
        return _encode_takum(fmt & 0xFF, cls, sign, sig, exp, sticky)
    return _encode_ieee(fmt, cls, sign, sig, exp, sticky)


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------

cdef inline bint _is_tapered(int fmt) noexcept nogil:
    cdef int fam = fmt >> 8
    return fam == FAM_POSIT or fam == FAM_TAKUM


cdef uint64_t _negate_code(int fmt, uint64_t code) noexcept nogil:
    cdef int w = fmt & 0xFF
    cdef Dec d
    if _is_tapered(fmt):
        if code == 0 or code == (<uint64_t> 1) << (w - 1):
            return code
        return (0 - code) & _maskw(w)
    _c_decode(fmt, code, &d)
    if d.cls == CLS_NAR:
        return _ieee_nan_code(fmt)
    return code ^ ((<uint64_t> 1) << (w - 1))


cdef uint64_t _abs_code(int fmt, uint64_t code) noexcept nogil:
    cdef Dec d
    _c_decode(fmt, code, &d)
    if d.cls == CLS_NAR:
        return _c_encode(fmt, CLS_NAR, 0, 0, 0, 0)
    if d.sign == 0:
        return code
    return _negate_code(fmt, code)


cdef u128 _isqrt128(u128 s) noexcept nogil:
    cdef u128 x, y
    if s < 4:
        return 0 if s == 0 else 1
    x = <u128> fsqrt(<double> s)
    if x < 2:
        x = 2
    x = (x + s / x) >> 1
    x = (x + s / x) >> 1
    while x * x > s:
        x -= 1
    while (x + 1) * (x + 1) <= s:
        x += 1
    return x


cdef void _sqrt_parts(u128 sig, long exp, u128* rsig, long* rexp,
                      int* rst) noexcept nogil:
    """Exact-with-sticky square root; radicand scaled to >= 126 bits so the
    root keeps >= 63."""
    cdef int add
    cdef u128 scaled, root
    if exp & 1:
        sig <<= 1
        exp -= 1
    add = 126 - _bl128(sig)
    if add < 0:
        add = 0
    add += add & 1  # keep the exponent even
    scaled = sig << add
    root = _isqrt128(scaled)
    rst[0] = 0 if root * root == scaled else 1
    rsig[0] = root
    rexp[0] = (exp - add) >> 1


cdef uint64_t _c_arith(int fmt, int op, uint64_t a, uint64_t b) noexcept nogil:
    cdef Dec da, db, dt
    cdef bint tapered
    cdef int rsign, stb, rst
    cdef long ta, tb, er, shb, shift, rexp
    cdef u128 va, vb, total, num, q, rsig

    if op == OP_NEG:
        return _negate_code(fmt, a)
    if op == OP_ABS:
        return _abs_code(fmt, a)

    _c_decode(fmt, a, &da)
    tapered = _is_tapered(fmt)

    if op == OP_SQRT:
        if da.cls == CLS_NAR:
            return _c_encode(fmt, CLS_NAR, 0, 0, 0, 0)
        if da.cls == CLS_ZERO:
            return _c_encode(fmt, CLS_ZERO, da.sign, 0, 0, 0)  # sqrt(-0) is -0
        if da.cls == CLS_INF:
            if da.sign:
                return _c_encode(fmt, CLS_NAR, 0, 0, 0, 0)
            return _c_encode(fmt, CLS_INF, 0, 0, 0, 0)
        if da.sign:
            return _c_encode(fmt, CLS_NAR, 0, 0, 0, 0)
        _sqrt_parts(da.sig, da.exp, &rsig, &rexp, &rst)
        return _c_encode(fmt, CLS_REAL, 0, rsig, rexp, rst)

    _c_decode(fmt, b, &db)
    if op == OP_SUB:
        db.sign ^= 1  # a - b == a + (-b); exact sign flip
        op = OP_ADD

    if da.cls == CLS_NAR or db.cls == CLS_NAR:
        return _c_encode(fmt, CLS_NAR, 0, 0, 0, 0)

    if op == OP_ADD:
        if da.cls == CLS_INF or db.cls == CLS_INF:
            if da.cls == CLS_INF and db.cls == CLS_INF:
                if da.sign != db.sign:
                    return _c_encode(fmt, CLS_NAR, 0, 0, 0, 0)
                return _c_encode(fmt, CLS_INF, da.sign, 0, 0, 0)
            rsign = da.sign if da.cls == CLS_INF else db.sign
            return _c_encode(fmt, CLS_INF, rsign, 0, 0, 0)
        if da.cls == CLS_ZERO and db.cls == CLS_ZERO:
            # +0 unless both are -0 (round-to-nearest rule)
            return _c_encode(fmt, CLS_ZERO, da.sign & db.sign, 0, 0, 0)
        if da.cls == CLS_ZERO:
            return _c_encode(fmt, CLS_REAL, db.sign, db.sig, db.exp, 0)
        if db.cls == CLS_ZERO:
            return _c_encode(fmt, CLS_REAL, da.sign, da.sig, da.exp, 0)
        ta = da.exp + _bl128(da.sig)
        tb = db.exp + _bl128(db.sig)
        if tb > ta:
            dt = da; da = db; db = dt
            ta = tb
        # align at 120 bits below the top; whatever falls off is sticky
        er = ta - 120
        va = da.sig << (da.exp - er)
        shb = db.exp - er
        stb = 0
        if shb >= 0:
            vb = db.sig << shb
        elif shb <= -128:
            vb = 0
            stb = 1
        else:
            vb = db.sig >> (-shb)
            stb = 0 if (db.sig & (((<u128> 1) << (-shb)) - 1)) == 0 else 1
        if da.sign == db.sign:
            return _c_encode(fmt, CLS_REAL, da.sign, va + vb, er, stb)
        # opposite signs; truncation (stb) implies vb is tiny next to va,
        # so the difference keeps >= 118 bits and the floor just drops one
        if va > vb:
            return _c_encode(fmt, CLS_REAL, da.sign, va - vb - <u128> stb, er, stb)
        if vb > va:
            return _c_encode(fmt, CLS_REAL, db.sign, vb - va, er, 0)
        # exact cancellation of nonzero operands gives +0
        return _c_encode(fmt, CLS_ZERO, 0, 0, 0, 0)

    rsign = da.sign ^ db.sign
    if op == OP_MUL:
        if da.cls == CLS_INF or db.cls == CLS_INF:
            if da.cls == CLS_ZERO or db.cls == CLS_ZERO:
                return _c_encode(fmt, CLS_NAR, 0, 0, 0, 0)
            return _c_encode(fmt, CLS_INF, rsign, 0, 0, 0)
        if da.cls == CLS_ZERO or db.cls == CLS_ZERO:
            return _c_encode(fmt, CLS_ZERO, rsign, 0, 0, 0)
        return _c_encode(fmt, CLS_REAL, rsign, da.sig * db.sig,
                         da.exp + db.exp, 0)

    # OP_DIV
    if da.cls == CLS_INF:
        if db.cls == CLS_INF:
            return _c_encode(fmt, CLS_NAR, 0, 0, 0, 0)
        return _c_encode(fmt, CLS_INF, rsign, 0, 0, 0)
    if db.cls == CLS_INF:
        return _c_encode(fmt, CLS_ZERO, rsign, 0, 0, 0)
    if db.cls == CLS_ZERO:
        if da.cls == CLS_ZERO or tapered:
            return _c_encode(fmt, CLS_NAR, 0, 0, 0, 0)
        return _c_encode(fmt, CLS_INF, rsign, 0, 0, 0)
    if da.cls == CLS_ZERO:
        return _c_encode(fmt, CLS_ZERO, rsign, 0, 0, 0)
    shift = 66 + _bl128(db.sig) - _bl128(da.sig)
    if shift < 0:
        shift = 0
    num = da.sig << shift
    q = num / db.sig
    return _c_encode(fmt, CLS_REAL, rsign, q, da.exp - db.exp - shift,
                     0 if q * db.sig == num else 1)


cdef uint64_t _c_convert(int src, int dst, uint64_t code) noexcept nogil:
    cdef Dec d
    _c_decode(src, code, &d)
    if src == dst:
        # canonicalize NaN payloads even on the identity path
        if d.cls == CLS_NAR:
            return _c_encode(dst, CLS_NAR, 0, 0, 0, 0)
        return code
    return _c_encode(dst, d.cls, d.sign, d.sig, d.exp, 0)


cdef int _c_compare(int fmt, uint64_t a, uint64_t b) noexcept nogil:
    cdef Dec da, db
    cdef int flip
    cdef long ta, tb, e
    cdef u128 va, vb
    _c_decode(fmt, a, &da)
    _c_decode(fmt, b, &db)
    if da.cls == CLS_NAR or db.cls == CLS_NAR:
        return 2
    # signed zeros compare equal
    if da.cls == CLS_ZERO and db.cls == CLS_ZERO:
        return 0
    if da.cls == CLS_ZERO:
        return 1 if db.sign else -1
    if db.cls == CLS_ZERO:
        return -1 if da.sign else 1
    if da.sign != db.sign:
        return -1 if da.sign else 1
    flip = -1 if da.sign else 1
    if da.cls == CLS_INF or db.cls == CLS_INF:
        if da.cls == CLS_INF and db.cls == CLS_INF:
            return 0
        return flip if da.cls == CLS_INF else -flip
    ta = da.exp + _bl128(da.sig)
    tb = db.exp + _bl128(db.sig)
    if ta != tb:
        return flip if ta > tb else -flip
    e = da.exp if da.exp < db.exp else db.exp
    va = da.sig << (da.exp - e)
    vb = db.sig << (db.exp - e)
    if va == vb:
        return 0
    return flip if va > vb else -flip


cdef uint64_t _c_max_code(int fmt) noexcept nogil:
    cdef int fam = fmt >> 8
    cdef int w, eb, p, bias, fbits
    if fam == FAM_POSIT or fam == FAM_TAKUM:
        return ((<uint64_t> 1) << ((fmt & 0xFF) - 1)) - 1
    if fam == FAM_E4M3:
        return 0x7E
    _ieee_params(fmt, &w, &eb, &p, &bias)
    fbits = p - 1
    return ((((<uint64_t> 1) << eb) - 2) << fbits) | (((<uint64_t> 1) << fbits) - 1)


# ---------------------------------------------------------------------------
# Python-facing scalar API
# ---------------------------------------------------------------------------

cdef int _check_fmt(int fmt) except -1:
    cdef int fam = fmt >> 8
    cdef int w = fmt & 0xFF
    if fam == FAM_POSIT or fam == FAM_TAKUM:
        if w == 8 or w == 16 or w == 32 or w == 64:
            return 0
    elif fmt == F_FLOAT16 or fmt == F_FLOAT32 or fmt == F_FLOAT64 \
            or fmt == F_BFLOAT16 or fmt == F_E4M3:
        return 0
    raise ValueError(f"unknown format id {fmt}")


def decode(int fmt, code):
    """Code -> (cls, sign, sig, exp). Total over all 2**width codes."""
    cdef Dec d
    _check_fmt(fmt)
    _c_decode(fmt, <uint64_t> code, &d)
    return (d.cls, d.sign, <uint64_t> d.sig, d.exp)


def encode_parts(int fmt, int cls, int sign, sig, long exp, int sticky):
    cdef int excess = sig.bit_length() - 128
    if excess > 0:
        # fold shifted-out bits into sticky; value sig*2^exp is preserved
        if (sig >> excess) << excess != sig:
            sticky = 1
        sig >>= excess
        exp += excess
    cdef uint64_t lo = <uint64_t> (sig & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t hi = <uint64_t> (sig >> 64)
    _check_fmt(fmt)
    return _c_encode(fmt, cls, sign, ((<u128> hi) << 64) | <u128> lo, exp, sticky)


def arith(int fmt, int op, a, b):
    """Correctly rounded op: equals encode(exact_op(decode(a), decode(b)))."""
    _check_fmt(fmt)
    if op < OP_ADD or op > OP_ABS:
        raise ValueError(f"unknown op {op}")
    return _c_arith(fmt, op, <uint64_t> a, <uint64_t> b)


def convert(int src, int dst, code):
    _check_fmt(src)
    _check_fmt(dst)
    return _c_convert(src, dst, <uint64_t> code)


def compare(int fmt, a, b):
    """-1, 0, 1 in decoded-value order; 2 when unordered (NaR/NaN)."""
    _check_fmt(fmt)
    return _c_compare(fmt, <uint64_t> a, <uint64_t> b)


def classify(int fmt, code):
    """(cls, sign) of the code."""
    cdef Dec d
    _check_fmt(fmt)
    _c_decode(fmt, <uint64_t> code, &d)
    return (d.cls, d.sign)


# ---------------------------------------------------------------------------
# vector kernels
# ---------------------------------------------------------------------------

def v_convert(int src_fmt, int dst_fmt, uint64_t[::1] src, uint64_t[::1] out):
    cdef Py_ssize_t i, n = src.shape[0]
    _check_fmt(src_fmt)
    _check_fmt(dst_fmt)
    with nogil:
        for i in range(n):
            out[i] = _c_convert(src_fmt, dst_fmt, src[i])


def v_classify(int fmt, uint64_t[::1] a, uint8_t[::1] out):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef Dec d
    _check_fmt(fmt)
    with nogil:
        for i in range(n):
            _c_decode(fmt, a[i], &d)
            out[i] = <uint8_t> d.cls


def v_ew(int fmt, int op, uint64_t[::1] a, uint64_t[::1] b, uint64_t[::1] out):
    cdef Py_ssize_t i, n = a.shape[0]
    _check_fmt(fmt)
    with nogil:
        for i in range(n):
            out[i] = _c_arith(fmt, op, a[i], b[i])


def v_scalar(int fmt, int op, uint64_t[::1] a, code_b, uint64_t[::1] out):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef uint64_t cb = <uint64_t> code_b
    _check_fmt(fmt)
    with nogil:
        for i in range(n):
            out[i] = _c_arith(fmt, op, a[i], cb)


def v_axpy(int fmt, alpha, uint64_t[::1] x, uint64_t[::1] y):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef uint64_t al = <uint64_t> alpha, t
    _check_fmt(fmt)
    with nogil:
        for i in range(n):
            t = _c_arith(fmt, OP_MUL, al, x[i])
            y[i] = _c_arith(fmt, OP_ADD, y[i], t)


def v_scatter_axpy(int fmt, alpha, uint64_t[::1] vals, int32_t[::1] idx,
                   uint64_t[::1] y):
    cdef Py_ssize_t t, nnz = idx.shape[0]
    cdef uint64_t al = <uint64_t> alpha, u
    cdef int32_t r
    _check_fmt(fmt)
    with nogil:
        for t in range(nnz):
            r = idx[t]
            u = _c_arith(fmt, OP_MUL, al, vals[t])
            y[r] = _c_arith(fmt, OP_ADD, y[r], u)


def v_scatter_axpy_masked(int fmt, alpha, uint64_t[::1] vals, int32_t[::1] idx,
                          uint64_t[::1] y, uint8_t[::1] mask):
    cdef Py_ssize_t t, nnz = idx.shape[0]
    cdef uint64_t al = <uint64_t> alpha, u
    cdef int32_t r
    _check_fmt(fmt)
    with nogil:
        for t in range(nnz):
            r = idx[t]
            if mask[r]:
                u = _c_arith(fmt, OP_MUL, al, vals[t])
                y[r] = _c_arith(fmt, OP_ADD, y[r], u)


def v_dot(int fmt, uint64_t[::1] a, uint64_t[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef uint64_t acc = 0, t
    _check_fmt(fmt)
    with nogil:
        for i in range(n):
            t = _c_arith(fmt, OP_MUL, a[i], b[i])
            acc = _c_arith(fmt, OP_ADD, acc, t)
    return acc


def v_sum_sq(int fmt, uint64_t[::1] a):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef uint64_t acc = 0, t
    _check_fmt(fmt)
    with nogil:
        for i in range(n):
            t = _c_arith(fmt, OP_MUL, a[i], a[i])
            acc = _c_arith(fmt, OP_ADD, acc, t)
    return acc


def v_sum_abs(int fmt, uint64_t[::1] a):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef uint64_t acc = 0, t
    _check_fmt(fmt)
    with nogil:
        for i in range(n):
            t = _c_arith(fmt, OP_ABS, a[i], 0)
            acc = _c_arith(fmt, OP_ADD, acc, t)
    return acc


def v_csc_matvec(int fmt, Py_ssize_t n_cols, int64_t[::1] col_ptr,
                 int32_t[::1] row_idx, uint64_t[::1] vals, uint64_t[::1] x,
                 uint64_t[::1] y):
    cdef Py_ssize_t i, j
    cdef int64_t t
    cdef uint64_t xj, u
    cdef int32_t r
    _check_fmt(fmt)
    with nogil:
        for i in range(y.shape[0]):
            y[i] = 0
        for j in range(n_cols):
            xj = x[j]
            if xj == 0:
                continue
            for t in range(col_ptr[j], col_ptr[j + 1]):
                r = row_idx[t]
                u = _c_arith(fmt, OP_MUL, vals[t], xj)
                y[r] = _c_arith(fmt, OP_ADD, y[r], u)


def v_lower_solve_unit(int fmt, Py_ssize_t n, int64_t[::1] col_ptr,
                       int32_t[::1] row_idx, uint64_t[::1] vals,
                       uint64_t[::1] b):
    """In-place solve L x = b for unit lower-triangular CSC L with the
    diagonal not stored."""
    cdef Py_ssize_t j
    cdef int64_t t
    cdef uint64_t xj, nxj, u
    cdef int32_t r
    _check_fmt(fmt)
    with nogil:
        for j in range(n):
            xj = b[j]
            if xj == 0:
                continue
            nxj = _c_arith(fmt, OP_NEG, xj, 0)
            for t in range(col_ptr[j], col_ptr[j + 1]):
                r = row_idx[t]
                u = _c_arith(fmt, OP_MUL, nxj, vals[t])
                b[r] = _c_arith(fmt, OP_ADD, b[r], u)


def v_upper_solve(int fmt, Py_ssize_t n, int64_t[::1] col_ptr,
                  int32_t[::1] row_idx, uint64_t[::1] vals, uint64_t[::1] b):
    """In-place solve U x = b for upper-triangular CSC U whose diagonal
    entry is the last one stored in each column."""
    cdef Py_ssize_t j
    cdef int64_t t, t_hi
    cdef uint64_t xj, nxj, u
    cdef int32_t r
    _check_fmt(fmt)
    with nogil:
        for j in range(n - 1, -1, -1):
            t_hi = col_ptr[j + 1] - 1
            xj = _c_arith(fmt, OP_DIV, b[j], vals[t_hi])
            b[j] = xj
            if xj == 0:
                continue
            nxj = _c_arith(fmt, OP_NEG, xj, 0)
            for t in range(col_ptr[j], t_hi):
                r = row_idx[t]
                u = _c_arith(fmt, OP_MUL, nxj, vals[t])
                b[r] = _c_arith(fmt, OP_ADD, b[r], u)


def v_count_nonreal(int fmt, uint64_t[::1] a):
    """Number of NaR/NaN/Inf entries."""
    cdef Py_ssize_t i, n = a.shape[0]
    cdef Py_ssize_t bad = 0
    cdef Dec d
    _check_fmt(fmt)
    with nogil:
        for i in range(n):
            _c_decode(fmt, a[i], &d)
            if d.cls == CLS_NAR or d.cls == CLS_INF:
                bad += 1
    return bad


def v_range_flags(int dst_fmt, uint64_t[::1] src_f64_codes, uint8_t[::1] out):
    """Conversion range check against binary64 inputs.

    out[i] = 0 ok, 1 overflow (|v| strictly above dst max-finite),
    2 underflow (nonzero v encodes to the zero code), 3 non-finite input.
    """
    cdef Py_ssize_t i, n = src_f64_codes.shape[0]
    cdef Dec dm, d
    _check_fmt(dst_fmt)
    _c_decode(dst_fmt, _c_max_code(dst_fmt), &dm)
    with nogil:
        for i in range(n):
            _c_decode(F_FLOAT64, src_f64_codes[i], &d)
            if d.cls == CLS_NAR or d.cls == CLS_INF:
                out[i] = 3
            elif d.cls == CLS_ZERO:
                out[i] = 0
            elif _value_gt(d.sig, d.exp, 0, dm.sig, dm.exp):
                out[i] = 1
            elif _c_encode(dst_fmt, d.cls, d.sign, d.sig, d.exp, 0) == 0:
                out[i] = 2
            else:
                out[i] = 0


# fill the takum saturation bounds
cdef void _init_takum_extremes() noexcept nogil:
    cdef int w, i
    cdef Dec d
    for i in range(4):
        w = 8 << i
        _decode_takum(w, 1, &d)
        _tk_sig_lo[i] = d.sig
        _tk_exp_lo[i] = d.exp
        _decode_takum(w, ((<uint64_t> 1) << (w - 1)) - 1, &d)
        _tk_sig_hi[i] = d.sig
        _tk_exp_hi[i] = d.exp


_init_takum_extremes()
