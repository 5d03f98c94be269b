"""Pure numpy implementation of the model evaluation kernel.

Mirrors ``_kernels_c.pyx`` exactly; used when the compiled extension is not
available or when ``TENDONKIN_PURE_PYTHON`` is set.
"""

import numpy as np

DEGENERATE_SEGMENT = 1e-12


def chain(q, link_lengths):
    n = link_lengths.shape[0]
    rots = np.empty((n + 1, 3, 3))
    orgs = np.zeros((n + 1, 3))
    axes = np.empty((n, 2, 3))
    rots[0] = np.eye(3)
    ca, sa = np.cos(q[0::2]), np.sin(q[0::2])
    cb, sb = np.cos(q[1::2]), np.sin(q[1::2])
    for j in range(n):
        r = rots[j]
        ra1 = ca[j] * r[:, 1] + sa[j] * r[:, 2]
        ra2 = -sa[j] * r[:, 1] + ca[j] * r[:, 2]
        nxt = rots[j + 1]
        nxt[:, 0] = cb[j] * r[:, 0] - sb[j] * ra2
        nxt[:, 1] = ra1
        nxt[:, 2] = sb[j] * r[:, 0] + cb[j] * ra2
        axes[j, 0] = r[:, 0]
        axes[j, 1] = ra1
        orgs[j + 1] = orgs[j] + nxt[:, 2] * link_lengths[j]
    return rots, orgs, axes


def evaluate_model(q, link_lengths, waypoints, anchored, base_tensions,
                   friction_exponents, cumulative=True):
    """Joint moments ``(2n,)`` and tendon lengths ``(T,)`` at state ``q``.

    Tendons with zero base tension are slack: their lengths are computed but
    they exert nothing. ``friction_exponents[t]`` is gamma * mu.
    """
    q = np.asarray(q, dtype=float)
    n = link_lengths.shape[0]
    rots, orgs, axes = chain(q, link_lengths)
    link_of = np.concatenate([[0], np.repeat(np.arange(1, n + 1), 2)])

    # world way points for all tendons at once: (T, 2n+1, 3)
    world = np.einsum("kab,tkb->tka", rots[link_of], waypoints)
    world[:, 1:] += orgs[link_of[1:] - 1]
    world[:, 0] = waypoints[:, 0]

    seg = np.diff(world, axis=1)
    seg_len = np.linalg.norm(seg, axis=2)
    lengths = seg_len.sum(axis=1)

    moments = np.zeros(2 * n)
    active = np.flatnonzero(np.asarray(base_tensions) > 0.0)
    if active.size == 0:
        return moments, lengths
    if np.any(seg_len[active] <= DEGENERATE_SEGMENT):
        raise ValueError("degenerate tendon segment (coincident way points)")

    u = seg[active] / seg_len[active, :, None]
    cross = np.cross(u[:, :-1], u[:, 1:])
    dot = np.einsum("tka,tka->tk", u[:, :-1], u[:, 1:])
    wrap = np.arctan2(np.linalg.norm(cross, axis=2), dot)
    gm = np.asarray(friction_exponents, dtype=float)[active]
    tension = np.empty((active.size, 2 * n))
    tension[:, 0] = np.asarray(base_tensions, dtype=float)[active]
    tension[:, 1:] = tension[:, :1] * np.exp(np.cumsum(gm[:, None] * wrap, axis=1))

    force = np.zeros((active.size, 2 * n + 1, 3))
    force[:, 1:-1] = tension[:, 1:, None] * u[:, 1:] - tension[:, :-1, None] * u[:, :-1]
    anch = np.asarray(anchored, dtype=bool)[active]
    force[anch, -1] = -tension[anch, -1, None] * u[anch, -1]

    f_sum = force[:, 1:].sum(axis=0).reshape(n, 2, 3).sum(axis=1)
    wxf = np.cross(world[active, 1:], force[:, 1:]).sum(axis=0).reshape(n, 2, 3).sum(axis=1)
    if cumulative:
        f_sum = np.cumsum(f_sum[::-1], axis=0)[::-1]
        wxf = np.cumsum(wxf[::-1], axis=0)[::-1]
    # moment about joint j centre (origin of pose j-1)
    m_vec = wxf - np.cross(orgs[:-1], f_sum)
    moments[0::2] = np.einsum("ja,ja->j", m_vec, axes[:, 0])
    moments[1::2] = np.einsum("ja,ja->j", m_vec, axes[:, 1])
    return moments, lengths
