"""Forward-mode derivative propagation for batched 3-vector/3x3-matrix pipelines.

A "jet" is a (value, dot) pair.  The value carries a leading batch axis B,
the dot carries an extra direction axis m right after the batch axis:

    scalar jet:  val (B,),     dot (B, m)
    vector jet:  val (B, 3),   dot (B, m, 3)
    matrix jet:  val (B, 3, 3) dot (B, m, 3, 3)

dot may be None, meaning the quantity is constant with respect to all
seeded directions.  Every helper is None-aware so the same recursion code
serves both a plain value pass (all dots None) and a derivative pass.
"""

from __future__ import annotations

import numpy as np


def madd(a, b):
    """None-aware add of two dot arrays."""
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def jadd(a, b):
    return a[0] + b[0], madd(a[1], b[1])


def jsub(a, b):
    d = None
    if a[1] is not None and b[1] is not None:
        d = a[1] - b[1]
    elif a[1] is not None:
        d = a[1]
    elif b[1] is not None:
        d = -b[1]
    return a[0] - b[0], d


def jneg(a):
    return -a[0], None if a[1] is None else -a[1]


def jscale(a, k: float):
    """Multiply a jet by a plain float constant."""
    return k * a[0], None if a[1] is None else k * a[1]


def jsin(a):
    v, d = a
    return np.sin(v), None if d is None else np.cos(v)[:, None] * d


def jcos(a):
    v, d = a
    return np.cos(v), None if d is None else -np.sin(v)[:, None] * d


def jmul(a, b):
    """Scalar jet * scalar jet."""
    va, da = a
    vb, db = b
    d = madd(None if da is None else da * vb[:, None],
             None if db is None else va[:, None] * db)
    return va * vb, d


def jsv(s, x):
    """Scalar jet * vector jet."""
    vs, ds = s
    vx, dx = x
    d = madd(None if dx is None else vs[:, None, None] * dx,
             None if ds is None else ds[..., None] * vx[:, None, :])
    return vs[:, None] * vx, d


def jmm(a, b):
    """Matrix jet @ matrix jet, both batched (B, 3, 3)."""
    va, da = a
    vb, db = b
    v = va @ vb
    d = madd(None if da is None else da @ vb[:, None],
             None if db is None else va[:, None] @ db)
    return v, d


def jmm_const_left(c: np.ndarray, b):
    """Constant (3, 3) matrix @ matrix jet."""
    vb, db = b
    return c @ vb, None if db is None else c @ db


def jmm_const_right(a, c: np.ndarray):
    """Matrix jet @ constant (3, 3) matrix."""
    va, da = a
    return va @ c, None if da is None else da @ c


def jmv(a, x):
    """Matrix jet @ vector jet."""
    va, da = a
    vx, dx = x
    v = (va @ vx[..., None])[..., 0]
    d = madd(
        None if da is None else (da @ vx[:, None, :, None])[..., 0],
        None if dx is None else (va[:, None] @ dx[..., None])[..., 0],
    )
    return v, d


def jcross(a, b):
    """Vector jet x vector jet."""
    va, da = a
    vb, db = b
    v = np.cross(va, vb)
    d = madd(None if da is None else np.cross(da, vb[:, None, :]),
             None if db is None else np.cross(va[:, None, :], db))
    return v, d


def jdotv(a, b):
    """Inner product of two vector jets -> scalar jet."""
    va, da = a
    vb, db = b
    v = np.einsum("bi,bi->b", va, vb)
    d = madd(
        None if da is None else np.einsum("bmi,bi->bm", da, vb),
        None if db is None else np.einsum("bi,bmi->bm", va, db),
    )
    return v, d


def jvec3(x, y, z):
    """Assemble a vector jet from three scalar jets."""
    v = np.stack([x[0], y[0], z[0]], axis=-1)
    parts = [x[1], y[1], z[1]]
    if all(p is None for p in parts):
        return v, None
    B = v.shape[0]
    m = next(p.shape[1] for p in parts if p is not None)
    cols = [np.zeros((B, m)) if p is None else p for p in parts]
    return v, np.stack(cols, axis=-1)


def jrotz(theta):
    """Rotation about z as a matrix jet, from a scalar angle jet."""
    c, dc = jcos(theta)
    s, ds = jsin(theta)
    B = c.shape[0]
    v = np.zeros((B, 3, 3))
    v[:, 0, 0] = c
    v[:, 0, 1] = -s
    v[:, 1, 0] = s
    v[:, 1, 1] = c
    v[:, 2, 2] = 1.0
    if dc is None:
        return v, None
    m = dc.shape[1]
    d = np.zeros((B, m, 3, 3))
    d[:, :, 0, 0] = dc
    d[:, :, 0, 1] = -ds
    d[:, :, 1, 0] = ds
    d[:, :, 1, 1] = dc
    return v, d


def seed_scalar(values: np.ndarray, direction: int | None, m: int | None):
    """Scalar jet for an input variable, seeded with a unit direction."""
    if m is None or direction is None:
        return values, None
    d = np.zeros((values.shape[0], m))
    d[:, direction] = 1.0
    return values, d


def const_vec(v: np.ndarray, B: int):
    return np.broadcast_to(v, (B, 3)), None


def const_mat(M: np.ndarray, B: int):
    return np.broadcast_to(M, (B, 3, 3)), None


def zero_vec(B: int):
    return np.zeros((B, 3)), None


def zero_scalar(B: int):
    return np.zeros(B), None
