"""Plain-text dump of an instance for debugging.

Format (one token group per line)::

    \\ <comment>
    Minimize
     obj: +1.5 x0 -2.0 x3 + <offset>
    Subject To
     r0: +1.0 x0 +1.0 x1 <= 4.0
    Bounds
     0.0 <= x0 <= 10.0
     x1 free
    Binaries
     x0
    End

Names come from ``row_names``/``col_names`` when present, else ``r<i>``/``x<j>``.
Numbers use ``repr`` so the dump is exact.
"""

from __future__ import annotations

import numpy as np

from .model import EQ, GE, LE, LpInstance, MilpInstance

_SENSE_TXT = {LE: "<=", GE: ">=", EQ: "="}


def _terms(coefs, names):
    return " ".join(f"{'+' if v >= 0 else '-'}{abs(float(v))!r} {names[j]}" for j, v in coefs)


def dump_lp(inst, path, comment: str = "") -> None:
    milp = isinstance(inst, MilpInstance)
    lp: LpInstance = inst.lp if milp else inst
    cols = lp.col_names or [f"x{j}" for j in range(lp.n)]
    rows = lp.row_names or [f"r{i}" for i in range(lp.m)]
    cols = [str(c).replace(" ", "_") for c in cols]
    rows = [str(r).replace(" ", "_") for r in rows]
    A = lp.A.tocsr()
    out = []
    if comment:
        out.append(f"\\ {comment}")
    out.append("Minimize")
    obj = _terms([(j, v) for j, v in enumerate(lp.c) if v != 0.0], cols)
    out.append(f" obj: {obj} + {float(lp.offset)!r}".rstrip())
    out.append("Subject To")
    for i in range(lp.m):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        terms = _terms(zip(A.indices[lo:hi], A.data[lo:hi]), cols) or "0 x0"
        out.append(f" {rows[i]}: {terms} {_SENSE_TXT[lp.senses[i]]} {float(lp.b[i])!r}")
    out.append("Bounds")
    for j in range(lp.n):
        l, u = lp.lb[j], lp.ub[j]
        if np.isinf(l) and np.isinf(u):
            out.append(f" {cols[j]} free")
        else:
            ls = "-inf" if np.isinf(l) else repr(float(l))
            us = "+inf" if np.isinf(u) else repr(float(u))
            out.append(f" {ls} <= {cols[j]} <= {us}")
    if milp and inst.binaries.size:
        out.append("Binaries")
        out.extend(f" {cols[j]}" for j in inst.binaries)
    out.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
