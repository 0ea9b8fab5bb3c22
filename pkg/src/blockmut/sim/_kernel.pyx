# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled execution kernel.

Operation-for-operation mirror of _kernel_py.run; C doubles and the
identical evaluation order keep the two bit-compatible.  Any change
here must be made in _kernel_py.py as well.
"""

from libc.math cimport isfinite, trunc

import numpy as np

cdef enum:
    OP_INPORT = 0
    OP_STATE = 1
    OP_CONST = 2
    OP_GAIN = 3
    OP_SUM = 4
    OP_PRODUCT = 5
    OP_RELOP = 6
    OP_LOGOP = 7
    OP_SWITCH = 8
    OP_SAT = 9
    CAST_SINGLE = 1
    CAST_INT32 = 2
    STATE_UNIT_DELAY = 1

cdef double INT32_MAX = 2147483647.0
cdef double INT32_MIN = -2147483648.0


def run(
    const int[::1] opcode, const int[::1] out_slot,
    const int[::1] in0, const int[::1] in1, const int[::1] in2,
    const double[::1] f0, const double[::1] f1,
    const int[::1] iarg, const int[::1] vlen,
    const int[::1] cast, const int[::1] satflag,
    const int[::1] vec_src, const double[::1] vec_coef,
    const int[::1] st_kind, const int[::1] st_src, const double[::1] st_ts,
    double[::1] st_state,
    const double[:, ::1] inputs, const int[::1] record_slots, double[:, ::1] out,
    int n_slots,
):
    cdef Py_ssize_t steps = inputs.shape[0]
    cdef Py_ssize_t n_ops = opcode.shape[0]
    cdef Py_ssize_t n_rec = record_slots.shape[0]
    cdef Py_ssize_t n_st = st_kind.shape[0]
    cdef Py_ssize_t t, i, j, r, s
    cdef int code, k, c, off
    cdef double v, a, b, lo, hi, u
    cdef float narrowed
    cdef bint ta, tb, res

    slots_arr = np.zeros(max(n_slots, 1), dtype=np.float64)
    cdef double[::1] slots = slots_arr

    for t in range(steps):
        for i in range(n_ops):
            code = opcode[i]
            if code == OP_INPORT:
                v = inputs[t, iarg[i]]
            elif code == OP_STATE:
                v = st_state[iarg[i]]
            elif code == OP_CONST:
                v = f0[i]
            elif code == OP_GAIN:
                v = f0[i] * slots[in0[i]]
            elif code == OP_SUM:
                v = 0.0
                off = iarg[i]
                for j in range(vlen[i]):
                    v = v + vec_coef[off + j] * slots[vec_src[off + j]]
            elif code == OP_PRODUCT:
                v = slots[in0[i]] * slots[in1[i]]
            elif code == OP_RELOP:
                a = slots[in0[i]]
                b = slots[in1[i]]
                k = iarg[i]
                if k == 0:
                    v = 1.0 if a == b else 0.0
                elif k == 1:
                    v = 1.0 if a != b else 0.0
                elif k == 2:
                    v = 1.0 if a < b else 0.0
                elif k == 3:
                    v = 1.0 if a <= b else 0.0
                elif k == 4:
                    v = 1.0 if a > b else 0.0
                else:
                    v = 1.0 if a >= b else 0.0
            elif code == OP_LOGOP:
                ta = slots[in0[i]] != 0.0
                tb = slots[in1[i]] != 0.0 if in1[i] >= 0 else False
                k = iarg[i]
                if k == 0:
                    res = ta and tb
                elif k == 1:
                    res = ta or tb
                elif k == 2:
                    res = ta != tb
                elif k == 3:
                    res = not (ta and tb)
                elif k == 4:
                    res = not (ta or tb)
                else:
                    res = not ta
                v = 1.0 if res else 0.0
            elif code == OP_SWITCH:
                v = slots[in0[i]] if slots[in1[i]] >= f0[i] else slots[in2[i]]
            else:
                v = slots[in0[i]]
                lo = f0[i]
                hi = f1[i]
                if v < lo:
                    v = lo
                if v > hi:
                    v = hi
            c = cast[i]
            if c == CAST_SINGLE:
                narrowed = <float> v
                v = <double> narrowed
            elif c == CAST_INT32:
                if isfinite(v):
                    v = trunc(v)
                if satflag[i]:
                    if v > INT32_MAX:
                        v = INT32_MAX
                    elif v < INT32_MIN:
                        v = INT32_MIN
            slots[out_slot[i]] = v
            if not isfinite(v):
                return (t, i)
        for r in range(n_rec):
            out[t, r] = slots[record_slots[r]]
        for s in range(n_st):
            u = slots[st_src[s]]
            if st_kind[s] == STATE_UNIT_DELAY:
                st_state[s] = u
            else:
                st_state[s] = st_state[s] + st_ts[s] * u
    return (steps, -1)
