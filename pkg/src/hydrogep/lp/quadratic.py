"""Separable quadratic penalties expressed with linear programming pieces."""

from __future__ import annotations

from typing import Union

import numpy as np
import scipy.sparse as sp

from .model import GE, LpInstance, MilpInstance

Instance = Union[LpInstance, MilpInstance]


def chord_lines(center: float, weight: float, segments: int, half_width: float):
    """Slopes and intercepts of the chords of ``weight/2 * (x - center)**2``.

    The window ``[center - half_width, center + half_width]`` is cut into
    ``segments`` equal pieces; the max over the returned lines is the
    piecewise-linear interpolant of the parabola on that window.
    """
    pts = np.linspace(center - half_width, center + half_width, segments + 1)
    f = 0.5 * weight * (pts - center) ** 2
    slope = np.diff(f) / np.diff(pts)
    intercept = f[:-1] - slope * pts[:-1]
    return slope, intercept


def apply_separable_quadratic(
    inst: Instance,
    center,
    weights,
    segments: int,
    half_width,
) -> Instance:
    """Add ``sum_i weights_i/2 * (x_i - center_i)**2`` to the objective.

    Binary columns use the exact identity ``(x - c)**2 = (1 - 2c) x + c**2``.
    Continuous columns get one epigraph column bounded below by ``segments``
    chord lines.  Returns a new instance of the same kind; added columns are
    appended after the original ones.
    """
    milp = isinstance(inst, MilpInstance)
    lp = inst.lp if milp else inst
    n = lp.n
    center = np.broadcast_to(np.asarray(center, dtype=float), (n,))
    weights = np.broadcast_to(np.asarray(weights, dtype=float), (n,))
    half_width = np.broadcast_to(np.asarray(half_width, dtype=float), (n,))
    if (weights < 0).any():
        raise ValueError("quadratic weights must be nonnegative")
    if segments < 2:
        raise ValueError("need at least two segments")
    active = np.flatnonzero(weights > 0)
    is_bin = inst.is_binary if milp else np.zeros(n, dtype=bool)
    if (half_width[active[~is_bin[active]]] <= 0).any():
        raise ValueError("half_width must be positive")
    if active.size == 0:
        return inst

    c = lp.c.copy()
    offset = lp.offset
    cont = []
    for i in active:
        w, ci = weights[i], center[i]
        if is_bin[i]:
            c[i] += 0.5 * w * (1.0 - 2.0 * ci)
            offset += 0.5 * w * ci * ci
        else:
            if not (np.isfinite(lp.lb[i]) and np.isfinite(lp.ub[i])):
                raise ValueError(f"column {i} is neither binary nor bounded")
            cont.append(i)

    if not cont:
        new_lp = LpInstance(c=c, A=lp.A, senses=lp.senses, b=lp.b, lb=lp.lb, ub=lp.ub,
                            offset=offset, row_names=lp.row_names, col_names=lp.col_names)
        return MilpInstance(new_lp, inst.binaries) if milp else new_lp

    k = len(cont)
    rows, cols, vals, rhs = [], [], [], []
    r = 0
    for a, i in enumerate(cont):
        slope, icpt = chord_lines(center[i], weights[i], segments, half_width[i])
        for s_, b_ in zip(slope, icpt):
            # t_a - slope * x_i >= intercept
            rows += [r, r]
            cols += [n + a, i]
            vals += [1.0, -s_]
            rhs.append(b_)
            r += 1
    extra = sp.csc_matrix((vals, (rows, cols)), shape=(r, n + k))
    A = sp.vstack([sp.hstack([lp.A, sp.csc_matrix((lp.m, k))]), extra], format="csc")
    row_names = None
    if lp.row_names is not None:
        row_names = list(lp.row_names) + [f"pen_{i}_{s}" for i in cont for s in range(segments)]
    col_names = None
    if lp.col_names is not None:
        col_names = list(lp.col_names) + [f"pen_{i}" for i in cont]
    new_lp = LpInstance(
        c=np.concatenate([c, np.ones(k)]),
        A=A,
        senses=np.concatenate([lp.senses, np.full(r, GE)]),
        b=np.concatenate([lp.b, rhs]),
        lb=np.concatenate([lp.lb, np.zeros(k)]),
        ub=np.concatenate([lp.ub, np.full(k, np.inf)]),
        offset=offset,
        row_names=row_names,
        col_names=col_names,
    )
    return MilpInstance(new_lp, inst.binaries) if milp else new_lp
