"""Cone-algebra kernels for the interior-point solver.

The solver spends its per-iteration time in a handful of operations over the
product cone R_+^l x Q_{d_1} x ... x Q_{d_K} (flat storage: the l linear
entries first, then each second-order cone segment):

  * Nesterov-Todd scaling point and scaled variable,
  * applying the scaling matrix W and its inverse,
  * Jordan-algebra product and inverse product,
  * maximum step to the cone boundary.

Two interchangeable backends implement them: vectorized numpy, and
numba-compiled loops. Select with the FRANOPT_KERNELS environment variable
("numba" or "numpy"); the default is numba when importable, else numpy.
Both produce identical results to floating-point roundoff.
"""

import os
from types import SimpleNamespace

import numpy as np

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:
    _HAVE_NUMBA = False

_BIG_STEP = 1e20


# ----------------------------------------------------------------------
# numpy backend (vectorized with segment reductions)
# ----------------------------------------------------------------------

def _seg_sum(x, rel_starts):
    if x.size == 0:
        return np.zeros(0)
    return np.add.reduceat(x, rel_starts)


def _np_nt_scaling(s, z, l, starts, sizes):
    w_lin = np.sqrt(s[:l] / z[:l])
    lam = np.empty_like(s)
    lam[:l] = np.sqrt(s[:l] * z[:l])
    K = sizes.size
    eta = np.ones(K)
    vhat = np.zeros(s.size - l)
    if K:
        rel = starts - l
        ss, zs = s[l:], z[l:]
        h_s, h_z = ss[rel], zs[rel]
        js = 2.0 * h_s * h_s - _seg_sum(ss * ss, rel)
        jz = 2.0 * h_z * h_z - _seg_sum(zs * zs, rel)
        sqjs, sqjz = np.sqrt(js), np.sqrt(jz)
        sb = ss / np.repeat(sqjs, sizes)
        zb = zs / np.repeat(sqjz, sizes)
        gamma = np.sqrt((1.0 + _seg_sum(sb * zb, rel)) / 2.0)
        Jzb = -zb
        Jzb[rel] = zb[rel]
        wbar = (sb + Jzb) / np.repeat(2.0 * gamma, sizes)
        vhat = wbar.copy()
        vhat[rel] += 1.0
        vhat /= np.repeat(np.sqrt(2.0 * (1.0 + wbar[rel])), sizes)
        eta = (js / jz) ** 0.25
        vz = _seg_sum(vhat * zs, rel)
        Jz = -zs
        Jz[rel] = zs[rel]
        lam[l:] = np.repeat(eta, sizes) * (2.0 * vhat * np.repeat(vz, sizes) - Jz)
    return w_lin, eta, vhat, lam


def _np_apply_w(u, w_lin, eta, vhat, l, starts, sizes, inverse):
    out = np.empty_like(u)
    out[:l] = u[:l] / w_lin if inverse else u[:l] * w_lin
    if sizes.size:
        rel = starts - l
        us = u[l:]
        Ju = -us
        Ju[rel] = us[rel]
        if inverse:
            # W^{-1} u = (1/eta) (2 Jv (v'Ju) - Ju);  v'Ju = (Jv)'u
            vju = _seg_sum(vhat * Ju, rel)
            Jv = -vhat
            Jv[rel] = vhat[rel]
            out[l:] = (2.0 * Jv * np.repeat(vju, sizes) - Ju) / np.repeat(eta, sizes)
        else:
            vu = _seg_sum(vhat * us, rel)
            out[l:] = np.repeat(eta, sizes) * (2.0 * vhat * np.repeat(vu, sizes) - Ju)
    return out


def _np_cone_mul(a, b, l, starts, sizes):
    out = np.empty_like(a)
    out[:l] = a[:l] * b[:l]
    if sizes.size:
        rel = starts - l
        aa, bb = a[l:], b[l:]
        dot = _seg_sum(aa * bb, rel)
        out[l:] = np.repeat(aa[rel], sizes) * bb + np.repeat(bb[rel], sizes) * aa
        out[l:][rel] = dot
    return out


def _np_cone_div(lam, d, l, starts, sizes):
    out = np.empty_like(d)
    out[:l] = d[:l] / lam[:l]
    if sizes.size:
        rel = starts - l
        ls, ds = lam[l:], d[l:]
        l0, d0 = ls[rel], ds[rel]
        det = 2.0 * l0 * l0 - _seg_sum(ls * ls, rel)
        dot = _seg_sum(ls * ds, rel)
        u0 = (2.0 * l0 * d0 - dot) / det
        u = (ds - np.repeat(u0, sizes) * ls) / np.repeat(l0, sizes)
        u[rel] = u0
        out[l:] = u
    return out


def _pos_root(A, B, C):
    """Smallest positive root of A t^2 + B t + C with C > 0; inf if none."""
    scale = max(abs(A), abs(B), abs(C), 1.0)
    if abs(A) < 1e-14 * scale:
        return -C / B if B < 0 else _BIG_STEP
    disc = B * B - 4.0 * A * C
    if A > 0.0:
        if disc <= 0.0 or B >= 0.0:
            return _BIG_STEP
        qq = -(B - np.sqrt(disc)) / 2.0
        return min(qq / A, C / qq)
    disc = max(disc, 0.0)
    qq = -(B + np.sqrt(disc)) / 2.0 if B >= 0 else -(B - np.sqrt(disc)) / 2.0
    r1, r2 = qq / A, C / qq
    return r1 if r1 > 0.0 else r2


def _np_max_step(q, dq, l, starts, sizes):
    step = _BIG_STEP
    neg = dq[:l] < 0.0
    if neg.any():
        step = float(np.min(q[:l][neg] / -dq[:l][neg]))
    if sizes.size:
        rel = starts - l
        qs, ds = q[l:], dq[l:]
        q0, d0 = qs[rel], ds[rel]
        A = 2.0 * d0 * d0 - _seg_sum(ds * ds, rel)
        B = 2.0 * (2.0 * q0 * d0 - _seg_sum(qs * ds, rel))
        C = 2.0 * q0 * q0 - _seg_sum(qs * qs, rel)
        for j in range(sizes.size):
            step = min(step, _pos_root(float(A[j]), float(B[j]), float(max(C[j], 0.0))))
    return step


NUMPY_BACKEND = SimpleNamespace(
    name="numpy",
    nt_scaling=_np_nt_scaling,
    apply_w=_np_apply_w,
    cone_mul=_np_cone_mul,
    cone_div=_np_cone_div,
    max_step=_np_max_step,
)


# ----------------------------------------------------------------------
# numba backend (compiled loops over the same flat layout)
# ----------------------------------------------------------------------

def _build_numba_backend():
    opts = dict(cache=True, nogil=True)

    @njit(**opts)
    def nt_scaling(s, z, l, starts, sizes):
        M = s.size
        w_lin = np.empty(l)
        lam = np.empty(M)
        for j in range(l):
            w_lin[j] = np.sqrt(s[j] / z[j])
            lam[j] = np.sqrt(s[j] * z[j])
        K = sizes.size
        eta = np.ones(K)
        vhat = np.zeros(M - l)
        for k in range(K):
            a, d = starts[k], sizes[k]
            js = 2.0 * s[a] * s[a]
            jz = 2.0 * z[a] * z[a]
            for t in range(a, a + d):
                js -= s[t] * s[t]
                jz -= z[t] * z[t]
            sqjs, sqjz = np.sqrt(js), np.sqrt(jz)
            dot = 0.0
            for t in range(a, a + d):
                dot += (s[t] / sqjs) * (z[t] / sqjz)
            gamma = np.sqrt((1.0 + dot) / 2.0)
            # wbar entries, then vhat = (wbar + e) / sqrt(2 (1 + wbar0))
            w0 = (s[a] / sqjs + z[a] / sqjz) / (2.0 * gamma)
            nrm = np.sqrt(2.0 * (1.0 + w0))
            off = a - l
            vhat[off] = (w0 + 1.0) / nrm
            for t in range(a + 1, a + d):
                vhat[off + t - a] = ((s[t] / sqjs - z[t] / sqjz)
                                     / (2.0 * gamma)) / nrm
            eta[k] = (js / jz) ** 0.25
            vz = 0.0
            for t in range(a, a + d):
                vz += vhat[off + t - a] * z[t]
            lam[a] = eta[k] * (2.0 * vhat[off] * vz - z[a])
            for t in range(a + 1, a + d):
                lam[t] = eta[k] * (2.0 * vhat[off + t - a] * vz + z[t])
        return w_lin, eta, vhat, lam

    @njit(**opts)
    def apply_w(u, w_lin, eta, vhat, l, starts, sizes, inverse):
        out = np.empty_like(u)
        if inverse:
            for j in range(l):
                out[j] = u[j] / w_lin[j]
        else:
            for j in range(l):
                out[j] = u[j] * w_lin[j]
        for k in range(sizes.size):
            a, d = starts[k], sizes[k]
            off = a - l
            if inverse:
                # v'Ju with Ju = (u0, -u_tail)
                vju = vhat[off] * u[a]
                for t in range(a + 1, a + d):
                    vju -= vhat[off + t - a] * u[t]
                out[a] = (2.0 * vhat[off] * vju - u[a]) / eta[k]
                for t in range(a + 1, a + d):
                    out[t] = (-2.0 * vhat[off + t - a] * vju + u[t]) / eta[k]
            else:
                vu = vhat[off] * u[a]
                for t in range(a + 1, a + d):
                    vu += vhat[off + t - a] * u[t]
                out[a] = eta[k] * (2.0 * vhat[off] * vu - u[a])
                for t in range(a + 1, a + d):
                    out[t] = eta[k] * (2.0 * vhat[off + t - a] * vu + u[t])
        return out

    @njit(**opts)
    def cone_mul(a_, b_, l, starts, sizes):
        out = np.empty_like(a_)
        for j in range(l):
            out[j] = a_[j] * b_[j]
        for k in range(sizes.size):
            a, d = starts[k], sizes[k]
            dot = 0.0
            for t in range(a, a + d):
                dot += a_[t] * b_[t]
            a0, b0 = a_[a], b_[a]
            for t in range(a + 1, a + d):
                out[t] = a0 * b_[t] + b0 * a_[t]
            out[a] = dot
        return out

    @njit(**opts)
    def cone_div(lam, d_, l, starts, sizes):
        out = np.empty_like(d_)
        for j in range(l):
            out[j] = d_[j] / lam[j]
        for k in range(sizes.size):
            a, d = starts[k], sizes[k]
            det = 2.0 * lam[a] * lam[a]
            dot = 0.0
            for t in range(a, a + d):
                det -= lam[t] * lam[t]
                dot += lam[t] * d_[t]
            u0 = (2.0 * lam[a] * d_[a] - dot) / det
            for t in range(a + 1, a + d):
                out[t] = (d_[t] - u0 * lam[t]) / lam[a]
            out[a] = u0
        return out

    @njit(**opts)
    def max_step(q, dq, l, starts, sizes):
        step = _BIG_STEP
        for j in range(l):
            if dq[j] < 0.0:
                step = min(step, q[j] / -dq[j])
        for k in range(sizes.size):
            a, d = starts[k], sizes[k]
            A = 2.0 * dq[a] * dq[a]
            B2 = 2.0 * q[a] * dq[a]
            C = 2.0 * q[a] * q[a]
            for t in range(a, a + d):
                A -= dq[t] * dq[t]
                B2 -= q[t] * dq[t]
                C -= q[t] * q[t]
            B = 2.0 * B2
            if C < 0.0:
                C = 0.0
            scale = max(abs(A), abs(B), abs(C), 1.0)
            if abs(A) < 1e-14 * scale:
                if B < 0.0:
                    step = min(step, -C / B)
                continue
            disc = B * B - 4.0 * A * C
            if A > 0.0:
                if disc <= 0.0 or B >= 0.0:
                    continue
                qq = -(B - np.sqrt(disc)) / 2.0
                step = min(step, min(qq / A, C / qq))
            else:
                if disc < 0.0:
                    disc = 0.0
                if B >= 0.0:
                    qq = -(B + np.sqrt(disc)) / 2.0
                else:
                    qq = -(B - np.sqrt(disc)) / 2.0
                r1, r2 = qq / A, C / qq
                step = min(step, r1 if r1 > 0.0 else r2)
        return step

    return SimpleNamespace(name="numba", nt_scaling=nt_scaling, apply_w=apply_w,
                           cone_mul=cone_mul, cone_div=cone_div, max_step=max_step)


_NUMBA_BACKEND = None


def available_backends():
    return ("numba", "numpy") if _HAVE_NUMBA else ("numpy",)


def get_backend(name=None):
    """Resolve a kernel backend by name, env var, or availability."""
    global _NUMBA_BACKEND
    if name is None:
        name = os.environ.get("FRANOPT_KERNELS", "").strip().lower() or None
    if name is None:
        name = "numba" if _HAVE_NUMBA else "numpy"
    if name == "numpy":
        return NUMPY_BACKEND
    if name == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        if _NUMBA_BACKEND is None:
            _NUMBA_BACKEND = _build_numba_backend()
        return _NUMBA_BACKEND
    raise ValueError(f"unknown kernel backend {name!r}")
