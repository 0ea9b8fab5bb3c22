"""Pure-Python execution kernel.

Mirrors the compiled kernel operation for operation; Python floats
are IEEE doubles, so the two produce bit-identical traces.  Keep the
arithmetic in this file and in _kernel.pyx in exact lockstep.
"""

from __future__ import annotations

import math

from .program import (
    CAST_INT32,
    CAST_SINGLE,
    OP_CONST,
    OP_GAIN,
    OP_INPORT,
    OP_LOGOP,
    OP_PRODUCT,
    OP_RELOP,
    OP_SAT,
    OP_STATE,
    OP_SUM,
    OP_SWITCH,
    STATE_UNIT_DELAY,
    single_round_trip,
)

_INT32_MAX = 2147483647.0
_INT32_MIN = -2147483648.0


def run(
    opcode, out_slot, in0, in1, in2, f0, f1, iarg, vlen, cast, satflag,
    vec_src, vec_coef, st_kind, st_src, st_ts, st_state,
    inputs, record_slots, out, n_slots,
):
    steps = inputs.shape[0]
    n_ops = len(opcode)
    n_rec = len(record_slots)
    n_st = len(st_kind)
    slots = [0.0] * n_slots
    for t in range(steps):
        for i in range(n_ops):
            code = opcode[i]
            if code == OP_INPORT:
                v = float(inputs[t, iarg[i]])
            elif code == OP_STATE:
                v = float(st_state[iarg[i]])
            elif code == OP_CONST:
                v = float(f0[i])
            elif code == OP_GAIN:
                v = float(f0[i]) * slots[in0[i]]
            elif code == OP_SUM:
                v = 0.0
                off = iarg[i]
                for j in range(vlen[i]):
                    v = v + float(vec_coef[off + j]) * slots[vec_src[off + j]]
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
                    r = ta and tb
                elif k == 1:
                    r = ta or tb
                elif k == 2:
                    r = ta != tb
                elif k == 3:
                    r = not (ta and tb)
                elif k == 4:
                    r = not (ta or tb)
                else:
                    r = not ta
                v = 1.0 if r else 0.0
            elif code == OP_SWITCH:
                v = slots[in0[i]] if slots[in1[i]] >= float(f0[i]) else slots[in2[i]]
            else:
                v = slots[in0[i]]
                lo = float(f0[i])
                hi = float(f1[i])
                if v < lo:
                    v = lo
                if v > hi:
                    v = hi
            c = cast[i]
            if c == CAST_SINGLE:
                v = single_round_trip(v)
            elif c == CAST_INT32:
                if math.isfinite(v):
                    v = float(math.trunc(v))
                if satflag[i]:
                    if v > _INT32_MAX:
                        v = _INT32_MAX
                    elif v < _INT32_MIN:
                        v = _INT32_MIN
            slots[out_slot[i]] = v
            if not math.isfinite(v):
                return (t, i)
        for r in range(n_rec):
            out[t, r] = slots[record_slots[r]]
        for s in range(n_st):
            u = slots[st_src[s]]
            if st_kind[s] == STATE_UNIT_DELAY:
                st_state[s] = u
            else:
                st_state[s] = float(st_state[s]) + float(st_ts[s]) * u
    return (steps, -1)
