"""Second-order-cone solver for the per-iteration epigraph programs.

Every subproblem produced by the path-following optimizers has the shape

    maximize  gamma
    s.t.      sum_r ||M_r z + m_r||^2 <= affine(w)   (factored quadratics)
              linear(w) >= 0

with w = [z, aux, gamma]. Each quadratic row becomes one second-order cone
(||((1-t)/2, Mz+m)|| <= (1+t)/2 with t the affine right side), and the conic
program

    min c'w   s.t.  G w + s = h,  s in K = R_+^l x Q_{d_1} x ... x Q_{d_K}

is solved by a homogeneous self-dual primal-dual interior-point method with
Nesterov-Todd scaling and a Mehrotra predictor-corrector, so infeasibility
comes out as a certificate rather than a crash. The normal-equations matrix
G' W^{-2} G is formed sparsely plus per-cone rank-two corrections and
factored densely (dimensions here are a few hundred at most).

A second solve backend can be registered for cross-validation (tests register
a cvxpy-based oracle); selection via argument or the FRANOPT_SOLVER env var.
"""

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .kernels import get_backend

STEP_FRACTION = 0.99
STATIC_REG = 1e-12
INIT_REG = 1e-8
MIN_BLOCK_SCALE = 1e-12
MARGIN_TOL = 1e-7
FEAS_TOL = 1e-6
STALL_WINDOW = 10
REFINE_TOL = 1e-9


# ----------------------------------------------------------------------
# conic data container and conversion
# ----------------------------------------------------------------------

@dataclass
class ConicProgram:
    """min c'w s.t. G w + s = h, s in R_+^l x SOC(sizes)."""

    c: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    l: int
    sizes: np.ndarray             # SOC dims, in row order after the lin block
    row_scale: np.ndarray         # original row = row_scale * equilibrated row
    lin_names: list = field(default_factory=list)
    cone_names: list = field(default_factory=list)
    col_scale: np.ndarray = None  # original var = col_scale * equilibrated var

    @property
    def starts(self):
        if not self.sizes.size:
            return np.zeros(0, dtype=np.int64)
        off = np.concatenate(([0], np.cumsum(self.sizes[:-1])))
        return (self.l + off).astype(np.int64)


def conic_from_subproblem(spr):
    """Rewrite a ConvexSubproblem as an equilibrated conic program."""
    n = spr.n_vars
    rows_i, cols_j, vals, hvals = [], [], [], []
    lin_names, cone_names = [], []
    r = 0

    def put(i, cols, v):
        rows_i.append(np.full(len(cols), i, dtype=np.int64))
        cols_j.append(np.asarray(cols, dtype=np.int64))
        vals.append(np.asarray(v, dtype=np.float64))

    # linear block: layout nonnegativity then explicit linear rows
    for j in np.nonzero(spr.layout.nonneg)[0]:
        put(r, [int(j)], [-1.0])
        hvals.append(0.0)
        lin_names.append(f"nonneg[{j}]")
        r += 1
    for row in spr.lins:
        put(r, row.cols, -row.vals)
        hvals.append(row.const)
        lin_names.append(row.name)
        r += 1
    l = r

    sizes = []
    for row in spr.cones:
        # head: (1 + t)/2 with t = rhs_const + rhs_vals' w
        put(r, row.rhs_cols, -row.rhs_vals / 2.0)
        hvals.append((1.0 + row.rhs_const) / 2.0)
        r += 1
        nq = 0
        for cols, M, m0 in row.chunks:
            for q in range(M.shape[0]):
                put(r, cols, -M[q])
                hvals.append(m0[q])
                r += 1
            nq += M.shape[0]
        put(r, row.rhs_cols, row.rhs_vals / 2.0)
        hvals.append((1.0 - row.rhs_const) / 2.0)
        r += 1
        sizes.append(nq + 2)
        cone_names.append(row.name)

    G = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows_i), np.concatenate(cols_j))),
        shape=(r, n))
    h = np.asarray(hvals)
    sizes = np.asarray(sizes, dtype=np.int64)

    # Ruiz equilibration: columns are free (variable units), lin rows scale
    # individually, but a cone must keep a single scale per block or its
    # geometry changes. The cost row joins the column norms so gamma keeps
    # its natural unit. sqrt passes first, then an exact row normalization.
    c = np.zeros(n)
    c[spr.gamma_index] = -1.0
    col_scale = np.ones(n)
    row_scale = np.ones(r)

    def block_norms(A, habs):
        rn = np.maximum(np.abs(A).max(axis=1).toarray().ravel(), habs)
        out = rn.copy()
        pos = l
        for d in sizes:
            out[pos:pos + d] = rn[pos:pos + d].max()
            pos += d
        return out

    for _ in range(3):
        cmax = np.maximum(np.abs(G).max(axis=0).toarray().ravel(), np.abs(c))
        floor = max(cmax.max(), 1.0) * 1e-12
        d = 1.0 / np.sqrt(np.maximum(cmax, floor))
        d[cmax == 0.0] = 1.0
        G = G.multiply(d[None, :]).tocsr()
        c *= d
        col_scale *= d
        rn = block_norms(G, np.abs(h))
        rs = np.sqrt(np.maximum(rn, MIN_BLOCK_SCALE))
        G = G.multiply((1.0 / rs)[:, None]).tocsr()
        h = h / rs
        row_scale *= rs
    rn = np.maximum(block_norms(G, np.abs(h)), MIN_BLOCK_SCALE)
    G = G.multiply((1.0 / rn)[:, None]).tocsr()
    h = h / rn
    row_scale *= rn

    # a positive scalar on the objective moves no argmax; keep c at O(1)
    c /= np.abs(c).max()
    return ConicProgram(c, G, h, l, sizes,
                        row_scale, lin_names, cone_names, col_scale)


# ----------------------------------------------------------------------
# solution container
# ----------------------------------------------------------------------

@dataclass
class SubproblemSolution:
    status: str                   # Optimal | Infeasible | NumericalFailure
    w: np.ndarray
    gamma: float
    kkt_residual: float
    iterations: int
    certificate: str = ""

    @property
    def z(self):
        return self.w


# ----------------------------------------------------------------------
# interior-point core
# ----------------------------------------------------------------------

def _bring_interior(x, l, starts, sizes):
    """Shift a candidate point strictly inside the cone."""
    out = x.copy()
    if l and out[:l].min() <= 0:
        out[:l] += 1.0 - out[:l].min()
    for a, d in zip(starts, sizes):
        margin = out[a] - np.linalg.norm(out[a + 1:a + d])
        if margin <= 0:
            out[a] += 1.0 - margin
    return out


def _cone_e(l, starts, M):
    e = np.zeros(M)
    e[:l] = 1.0
    e[starts] = 1.0
    return e


def _w_inv_cols(U, w_lin, eta, vhat, l, starts, sizes):
    """Apply the inverse NT scaling to every column of a dense matrix."""
    out = np.empty_like(U)
    out[:l] = U[:l] / w_lin[:, None]
    for k in range(sizes.size):
        a, d = starts[k], sizes[k]
        v = vhat[a - l:a - l + d]
        vju = v[0] * U[a] - v[1:] @ U[a + 1:a + d]
        out[a] = (2.0 * v[0] * vju - U[a]) / eta[k]
        out[a + 1:a + d] = (U[a + 1:a + d]
                            - 2.0 * np.outer(v[1:], vju)) / eta[k]
    return out


def _boundary_step(be, lam, ds, dz, tau, kappa, dtau, dkappa,
                   w_lin, eta, vhat, l, starts, sizes):
    """Largest step keeping (s, z, tau, kappa) in the interior."""
    wids = be.apply_w(ds, w_lin, eta, vhat, l, starts, sizes, True)
    wdz = be.apply_w(dz, w_lin, eta, vhat, l, starts, sizes, False)
    a = min(be.max_step(lam, wids, l, starts, sizes),
            be.max_step(lam, wdz, l, starts, sizes))
    if dtau < 0:
        a = min(a, tau / -dtau)
    if dkappa < 0:
        a = min(a, kappa / -dkappa)
    return a


def solve_conic(prog, tol=1e-8, max_iter=100, kernels=None):
    """Homogeneous self-dual interior-point solve.

    Returns (status, w, info) where w is the primal point scaled back by tau
    (best iterate so far when not Optimal) and info carries residuals, the
    iteration count, and the dual vector for certificates.
    """
    be = get_backend() if kernels is None else kernels
    G, c, h = prog.G, prog.c, prog.h
    l, sizes = prog.l, prog.sizes
    starts = prog.starts
    n = c.size
    M = h.size
    K = sizes.size
    Gcsc = G.tocsc()
    e_cone = _cone_e(l, starts, M)

    # static sparsity pattern for the per-cone rank-2 Schur correction
    if K:
        soc_rows = np.concatenate([np.arange(a, a + d) for a, d in zip(starts, sizes)])
        soc_cols = np.repeat(np.arange(K), sizes)
        rel = (starts - l).astype(np.int64)

    # start near the least-squares point, pushed into the interior
    H0 = (Gcsc.T @ Gcsc).toarray()
    H0[np.diag_indices(n)] += INIT_REG * (1.0 + np.trace(H0) / n)
    ch0 = cho_factor(H0, lower=True)
    x = cho_solve(ch0, G.T @ h)
    s = _bring_interior(h - G @ x, l, starts, sizes)
    z = _bring_interior(-(G @ cho_solve(ch0, c)), l, starts, sizes)
    tau, kappa = 1.0, 1.0

    hnorm = max(1.0, np.linalg.norm(h))
    cnorm = max(1.0, np.linalg.norm(c))
    best = None
    status, why = "NumericalFailure", "iteration cap reached"
    it = 0
    for it in range(1, max_iter + 1):
        res_x = Gcsc.T @ z + c * tau
        res_z = G @ x + s - h * tau
        res_t = float(c @ x + h @ z + kappa)

        pres = np.linalg.norm(res_z) / tau / hnorm
        dres = np.linalg.norm(res_x) / tau / cnorm
        pcost = float(c @ x) / tau
        dcost = -float(h @ z) / tau
        gap = float(s @ z) / tau / tau
        relgap = gap / max(1.0, abs(pcost), abs(dcost))
        kkt = max(pres, dres, relgap)
        if best is None or kkt < best[1]:
            best = (it, kkt, x / tau, z / tau, pres, dres, relgap, pcost)
        if kkt <= tol:
            break
        if it - best[0] >= STALL_WINDOW:
            why = "progress stalled"
            break

        # infeasibility certificates (scale-invariant ratio tests)
        hz = float(h @ z)
        cx = float(c @ x)
        if hz < 0 and np.linalg.norm(Gcsc.T @ z) * hnorm / (-hz) <= tol:
            status, why = "Infeasible", "primal infeasibility certificate"
            z = z / (-hz)
            break
        if cx < 0 and np.linalg.norm(G @ x + s) * cnorm / (-cx) <= tol:
            status, why = "NumericalFailure", "objective unbounded (dual infeasible)"
            break

        try:
            with np.errstate(all="ignore"):
                w_lin, eta, vhat, lam = be.nt_scaling(s, z, l, starts, sizes)
        except ZeroDivisionError:
            why = "iterate reached the cone boundary"
            break
        if not (np.isfinite(eta).all() and np.isfinite(lam).all()):
            why = "iterate reached the cone boundary"
            break
        mu = (float(s @ z) + tau * kappa) / (l + K + 1)

        # Schur complement H = G' W^{-2} G: diagonal part sparsely, then the
        # rank-2 cone corrections 4|v|^2 bb' - 2ab' - 2ba' with a = G'v, b = G'Jv
        D = np.empty(M)
        D[:l] = z[:l] / s[:l]
        if K:
            D[l:] = np.repeat(1.0 / eta ** 2, sizes)
        H = ((G.multiply(D[:, None])).T @ G).toarray()
        if K:
            Jv = -vhat
            Jv[rel] = vhat[rel]
            V = sp.csc_matrix(
                (np.concatenate([vhat, Jv]),
                 (np.concatenate([soc_rows, soc_rows]),
                  np.concatenate([2 * soc_cols, 2 * soc_cols + 1]))),
                shape=(M, 2 * K))
            U = np.asarray((Gcsc.T @ V).todense())
            A, B = U[:, 0::2], U[:, 1::2]
            w2 = 1.0 / eta ** 2
            vv = np.add.reduceat(vhat * vhat, rel)
            AB = (A * (2.0 * w2)) @ B.T
            H += (B * (4.0 * vv * w2)) @ B.T - AB - AB.T
        if not np.isfinite(H).all():
            why = "scaling matrix overflowed"
            break
        # factor a Jacobi-scaled copy with a relative shift; refinement
        # below targets the true H, so the shift does not bias directions
        hd = np.abs(np.diag(H))
        dj = 1.0 / np.sqrt(np.maximum(hd, 1e-14 * hd.max() + 1e-300))
        Hs = H * dj[:, None] * dj[None, :]
        Hs[np.diag_indices(n)] += STATIC_REG
        try:
            chol = cho_factor(Hs, lower=True)
        except np.linalg.LinAlgError:
            Hs[np.diag_indices(n)] += 1e-8
            try:
                chol = cho_factor(Hs, lower=True)
            except np.linalg.LinAlgError:
                status, why = "NumericalFailure", "Schur factorization failed"
                break

        def w_inv(u):
            return be.apply_w(u, w_lin, eta, vhat, l, starts, sizes, True)

        def wsq_inv(u):
            return w_inv(w_inv(u))

        def wsq(u):
            v = be.apply_w(u, w_lin, eta, vhat, l, starts, sizes, False)
            return be.apply_w(v, w_lin, eta, vhat, l, starts, sizes, False)

        def kkt_once(bx, bz):
            dx = dj * cho_solve(chol, dj * (bx + Gcsc.T @ wsq_inv(bz)))
            dz = wsq_inv(G @ dx - bz)
            return dx, dz

        # fallback for when H is too ill-conditioned even after scaling:
        # QR of W^{-1}G squares nothing, so its triangular factor solves
        # the same system with sqrt of the condition number
        qr_cache = {}

        def kkt_qr(bx, bz):
            if "R" not in qr_cache:
                Gd = G.toarray()
                qr_cache["Gd"] = Gd
                qr_cache["Ghat"] = _w_inv_cols(Gd, w_lin, eta, vhat,
                                               l, starts, sizes)
                qr_cache["R"] = np.linalg.qr(qr_cache["Ghat"], mode="r")
            Ghat, R = qr_cache["Ghat"], qr_cache["R"]
            bhat = w_inv(bz)
            rhs = bx + Ghat.T @ bhat
            try:
                with np.errstate(all="ignore"):
                    dx = solve_triangular(R, solve_triangular(R, rhs, trans=1))
            except (np.linalg.LinAlgError, ValueError):
                return None
            if not np.isfinite(dx).all():
                return None
            return dx, w_inv(Ghat @ dx - bhat)

        def refine(dxdz, bx, bz, solver, passes):
            dx, dz = dxdz
            bscale = np.linalg.norm(bx) + np.linalg.norm(bz) + 1e-300
            prev = np.inf
            for _ in range(passes):
                r1 = bx - Gcsc.T @ dz
                r2 = bz - (G @ dx - wsq(dz))
                rn = (np.linalg.norm(r1) + np.linalg.norm(r2)) / bscale
                if rn <= 1e-14 or rn >= 0.5 * prev:
                    break
                prev = rn
                step = solver(r1, r2)
                if step is None:
                    break
                dx = dx + step[0]
                dz = dz + step[1]
            r1 = bx - Gcsc.T @ dz
            r2 = bz - (G @ dx - wsq(dz))
            rn = (np.linalg.norm(r1) + np.linalg.norm(r2)) / bscale
            return dx, dz, rn

        def kkt_solve(bx, bz):
            # solve [0 G'; G -W^2][dx; dz] = [bx; bz], then refine on the
            # full system so neither the regularization shift nor the
            # squared conditioning of H limits the direction accuracy;
            # escalate to the QR path when refinement cannot converge
            dx, dz, rn = refine(kkt_once(bx, bz), bx, bz, kkt_once, 12)
            if rn > REFINE_TOL:
                cand = kkt_qr(bx, bz)
                if cand is not None:
                    qx, qz, qn = refine(cand, bx, bz, kkt_qr, 3)
                    if qn < rn:
                        return qx, qz
            return dx, dz

        dx2, dz2 = kkt_solve(-c, h)
        den = float(c @ dx2 + h @ dz2) - kappa / tau
        if not np.isfinite(den) or abs(den) < 1e-300:
            status, why = "NumericalFailure", "degenerate step system"
            break

        def direction(dcomb, dk):
            ds_t = be.cone_div(lam, dcomb, l, starts, sizes)
            bz = -res_z - be.apply_w(ds_t, w_lin, eta, vhat, l, starts, sizes, False)
            dx1, dz1 = kkt_solve(-res_x, bz)
            dtau = (-res_t - float(c @ dx1 + h @ dz1) - dk / tau) / den
            dx = dx1 + dtau * dx2
            dz = dz1 + dtau * dz2
            wdz = be.apply_w(dz, w_lin, eta, vhat, l, starts, sizes, False)
            ds = be.apply_w(ds_t - wdz, w_lin, eta, vhat, l, starts, sizes, False)
            dkap = (dk - kappa * dtau) / tau
            return dx, dz, ds, dtau, dkap, wdz

        # predictor
        lam2 = be.cone_mul(lam, lam, l, starts, sizes)
        dxa, dza, dsa, dta, dka, wdz_a = direction(-lam2, -tau * kappa)
        step_a = _boundary_step(be, lam, dsa, dza, tau, kappa, dta, dka,
                                w_lin, eta, vhat, l, starts, sizes)
        sigma = (1.0 - min(1.0, step_a)) ** 3

        # corrector
        wids_a = be.apply_w(dsa, w_lin, eta, vhat, l, starts, sizes, True)
        dcomb = sigma * mu * e_cone - lam2 \
            - be.cone_mul(wids_a, wdz_a, l, starts, sizes)
        dk = sigma * mu - tau * kappa - dta * dka
        dx, dz, ds, dtau, dkap, _ = direction(dcomb, dk)
        alpha = min(1.0, STEP_FRACTION * _boundary_step(
            be, lam, ds, dz, tau, kappa, dtau, dkap,
            w_lin, eta, vhat, l, starts, sizes))
        if alpha <= 1e-13 or not np.isfinite(alpha):
            status, why = "NumericalFailure", "step length collapsed"
            break
        x += alpha * dx
        z += alpha * dz
        s += alpha * ds
        tau += alpha * dtau
        kappa += alpha * dkap

    if status == "Infeasible":
        return status, best[2], dict(iterations=it, kkt_residual=best[1],
                                     why=why, zdual=z)
    if best is not None and best[1] <= max(tol, MARGIN_TOL):
        # contract accuracy reached even if the requested tol was not
        _, kkt_b, xb, zb, pres_b, dres_b, relgap_b, pcost_b = best
        info = dict(iterations=it, kkt_residual=kkt_b, pres=pres_b,
                    dres=dres_b, relgap=relgap_b, pcost=pcost_b,
                    zdual=zb, why="")
        return "Optimal", xb, info
    info = dict(iterations=it,
                kkt_residual=best[1] if best else np.inf,
                why=why, zdual=None)
    return status, (best[2] if best else np.zeros(n)), info


# ----------------------------------------------------------------------
# public entry: verification and the backend seam
# ----------------------------------------------------------------------

def _interior_point_backend(spr, prog, tol, max_iter, kernels):
    status, w, info = solve_conic(prog, tol=tol, max_iter=max_iter,
                                  kernels=kernels)
    # map the equilibrated solution back to original variable units
    return status, w * prog.col_scale, info


_BACKENDS = {"interior_point": _interior_point_backend}


def register_backend(name, fn):
    """Register an alternative solve backend (used for cross-validation).

    fn(subproblem, conic_program, tol, max_iter, kernels) -> (status, w, info)
    """
    _BACKENDS[name] = fn


def solve_subproblem(spr, tol=1e-8, max_iter=100, backend=None, kernels=None):
    """Maximize gamma over the subproblem's cone and linear rows.

    The returned status is verified, not trusted: Optimal requires every
    constraint margin >= -1e-6 and kkt_residual <= 1e-7, else the status is
    downgraded to NumericalFailure.
    """
    name = backend or os.environ.get("FRANOPT_SOLVER", "interior_point")
    if name not in _BACKENDS:
        raise ValueError(f"unknown solver backend {name!r}")
    prog = conic_from_subproblem(spr)
    status, w, info = _BACKENDS[name](spr, prog, tol, max_iter, kernels)
    gamma = float(w[spr.gamma_index])
    kkt = float(info.get("kkt_residual", np.inf))
    cert = info.get("why", "")
    if status == "Optimal":
        worst = min(spr.margins(w).values())
        if worst < -FEAS_TOL or kkt > MARGIN_TOL:
            status = "NumericalFailure"
            cert = f"verification failed: margin {worst:.2e}, kkt {kkt:.2e}"
    elif status == "Infeasible":
        zdual = info.get("zdual")
        if zdual is not None:
            cert = _infeasibility_summary(prog, zdual)
    return SubproblemSolution(status, w, gamma, kkt,
                              int(info.get("iterations", 0)), cert)


def _infeasibility_summary(prog, zdual):
    """Name the constraint blocks carrying the Farkas certificate weight."""
    zorig = zdual / prog.row_scale
    weights = [(abs(zorig[i]), name) for i, name in enumerate(prog.lin_names)]
    pos = prog.l
    for name, d in zip(prog.cone_names, prog.sizes):
        weights.append((float(np.abs(zorig[pos:pos + d]).sum()), name))
        pos += d
    weights.sort(key=lambda t: -t[0])
    top = ", ".join(f"{n} ({w:.2e})" for w, n in weights[:4] if w > 0)
    return f"primal infeasible; dominant dual weight on: {top}"
