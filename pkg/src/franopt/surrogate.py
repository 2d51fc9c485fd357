"""Quadratic-form algebra and the log-det surrogate bounds.

This module is the mathematical engine of the path-following optimizers.
It provides

  * ``QuadraticForm`` — a real quadratic kept in factored form
    q(z) = const + lin'z + sum_r ||M_r z + m_r||^2 - sum_r ||...||^2,
    so convexity/concavity is visible by construction and every factor row
    can be handed to the SOC solver unchanged;
  * ``ComplexAffine`` — a matrix-valued complex affine map of a real vector,
    the building block for gain/beam expressions;
  * the three bounds used to build surrogates:
      - ``sinr_lower_bound``:   ln(1+|v|^2/y)            >= lower model
      - ``logdet_lower_bound``: ln|I + V V^H Y^{-1}|      >= lower model
      - ``logdet_upper_bound``: ln|I + X X^H (Y Y^H+I)^{-1}| <= upper model
    each tight at its expansion point, together with composers that push an
    affine substitution through a frozen bound and emit a definite
    ``QuadraticForm``.

All decision vectors are real; complex quantities enter through interleaved
(Re, Im) lifts produced by ``ComplexAffine.real_rows``.
"""

from dataclasses import dataclass, field

import numpy as np


# ----------------------------------------------------------------------
# Decision layout
# ----------------------------------------------------------------------

@dataclass
class DecisionLayout:
    """Maps named power/quantization scales to positions of a flat real vector.

    p slots are keyed (rrh, file_idx, user_idx, subfile); width is 1 for
    proper signaling and 4 (two complex scales) for improper signaling.
    x slots are keyed (rrh, antenna) and carry a nonnegativity flag.
    """

    dim: int
    reals_per_p: int
    p_slots: dict          # (i, nu, k, ell) -> start index (width = reals_per_p)
    x_slots: dict          # (i, antenna) -> index
    nonneg: np.ndarray     # bool mask over the dim entries

    def validate(self):
        seen = np.zeros(self.dim, dtype=bool)
        for start in self.p_slots.values():
            sl = slice(start, start + self.reals_per_p)
            if seen[sl].any():
                raise ValueError("overlapping p slots")
            seen[sl] = True
        for idx in self.x_slots.values():
            if seen[idx]:
                raise ValueError("overlapping x slot")
            seen[idx] = True
        if not seen.all():
            raise ValueError("layout does not cover the decision vector")
        return True


# ----------------------------------------------------------------------
# Factored quadratic forms
# ----------------------------------------------------------------------

def _as_chunk(cols, M, m0):
    cols = np.asarray(cols, dtype=np.int64)
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    m0 = np.zeros(M.shape[0]) if m0 is None else np.asarray(m0, dtype=np.float64).ravel()
    if M.shape[1] != cols.size or m0.size != M.shape[0]:
        raise ValueError("chunk shape mismatch")
    return (cols, M, m0)


@dataclass
class QuadraticForm:
    """q(z) = constant + lin'z + sum ||M z[cols]+m0||^2 (plus) - sum (minus)."""

    dim: int
    constant: float = 0.0
    lin: np.ndarray = None
    plus: list = field(default_factory=list)
    minus: list = field(default_factory=list)

    def __post_init__(self):
        if self.lin is None:
            self.lin = np.zeros(self.dim)
        else:
            self.lin = np.asarray(self.lin, dtype=np.float64)

    # -- construction helpers -------------------------------------------------
    def add_plus(self, cols, M, m0=None):
        self.plus.append(_as_chunk(cols, M, m0))
        return self

    def add_minus(self, cols, M, m0=None):
        self.minus.append(_as_chunk(cols, M, m0))
        return self

    def add_lin(self, cols, vals):
        self.lin[np.asarray(cols, dtype=np.int64)] += np.asarray(vals, dtype=np.float64)
        return self

    # -- algebra ---------------------------------------------------------------
    def scaled(self, c):
        """Positive scaling; factor rows absorb sqrt(c)."""
        if c < 0:
            raise ValueError("use negated() for sign flips")
        rc = np.sqrt(c)
        q = QuadraticForm(self.dim, c * self.constant, c * self.lin)
        q.plus = [(cols, rc * M, rc * m0) for cols, M, m0 in self.plus]
        q.minus = [(cols, rc * M, rc * m0) for cols, M, m0 in self.minus]
        return q

    def negated(self):
        q = QuadraticForm(self.dim, -self.constant, -self.lin)
        q.plus = list(self.minus)
        q.minus = list(self.plus)
        return q

    def add_form(self, other):
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        self.constant += other.constant
        self.lin = self.lin + other.lin
        self.plus.extend(other.plus)
        self.minus.extend(other.minus)
        return self

    def convexity(self):
        if self.plus and self.minus:
            return "indefinite"
        if self.minus:
            return "concave"
        if self.plus:
            return "convex"
        return "affine"

    # -- evaluation -------------------------------------------------------------
    def value(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.dim:
            raise ValueError("dimension mismatch")
        out = self.constant + z @ self.lin
        for cols, M, m0 in self.plus:
            r = z[..., cols] @ M.T + m0
            out = out + np.sum(r * r, axis=-1)
        for cols, M, m0 in self.minus:
            r = z[..., cols] @ M.T + m0
            out = out - np.sum(r * r, axis=-1)
        return out

    def gradient(self, z):
        z = np.asarray(z, dtype=np.float64)
        g = self.lin.copy()
        for sign, chunks in ((1.0, self.plus), (-1.0, self.minus)):
            for cols, M, m0 in chunks:
                r = M @ z[cols] + m0
                np.add.at(g, cols, sign * 2.0 * (M.T @ r))
        return g


def quadform_eval(q, z):
    """Exact factored evaluation of a QuadraticForm at z."""
    return float(q.value(z))


# ----------------------------------------------------------------------
# Complex affine maps of a real decision vector
# ----------------------------------------------------------------------

@dataclass
class ComplexAffine:
    """U(z) = off + sum_m coef[:, :, m] * z[cols[m]], a (r x c) complex matrix."""

    cols: np.ndarray       # (m,) int
    coef: np.ndarray       # (r, c, m) complex
    off: np.ndarray        # (r, c) complex

    def __post_init__(self):
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.coef = np.asarray(self.coef, dtype=np.complex128)
        self.off = np.asarray(self.off, dtype=np.complex128)
        if self.coef.ndim != 3 or self.coef.shape[:2] != self.off.shape \
                or self.coef.shape[2] != self.cols.size:
            raise ValueError("ComplexAffine shape mismatch")

    @property
    def shape(self):
        return self.off.shape

    @staticmethod
    def from_row(cols, vals, off=0.0):
        """Scalar (1x1) affine form sum vals[m] z[cols[m]] + off."""
        vals = np.asarray(vals, dtype=np.complex128)
        return ComplexAffine(np.asarray(cols, dtype=np.int64),
                             vals.reshape(1, 1, -1),
                             np.array([[off]], dtype=np.complex128))

    def value(self, z):
        z = np.asarray(z, dtype=np.float64)
        return self.off + self.coef @ z[self.cols]

    def lmul(self, M):
        """Constant matrix on the left: M @ U(z)."""
        M = np.asarray(M, dtype=np.complex128)
        return ComplexAffine(self.cols,
                             np.einsum("ik,kjm->ijm", M, self.coef),
                             M @ self.off)

    def scaled(self, s):
        return ComplexAffine(self.cols, s * self.coef, s * self.off)

    def conj(self):
        return ComplexAffine(self.cols, np.conj(self.coef), np.conj(self.off))

    def real_rows(self):
        """Flatten entries to real factor rows: (cols, M (2rc x m), m0 (2rc,))."""
        r, c = self.shape
        flat = self.coef.reshape(r * c, -1)
        offf = self.off.reshape(r * c)
        M = np.empty((2 * r * c, self.cols.size))
        m0 = np.empty(2 * r * c)
        M[0::2] = flat.real
        M[1::2] = flat.imag
        m0[0::2] = offf.real
        m0[1::2] = offf.imag
        return (self.cols, M, m0)


def hstack_affine(maps):
    """Concatenate column blocks that share a column index set."""
    cols = maps[0].cols
    for m in maps[1:]:
        if m.cols.size != cols.size or not np.array_equal(m.cols, cols):
            raise ValueError("hstack requires identical col sets")
    coef = np.concatenate([m.coef for m in maps], axis=1)
    off = np.concatenate([m.off for m in maps], axis=1)
    return ComplexAffine(cols, coef, off)


# ----------------------------------------------------------------------
# Symmetric eigen helpers
# ----------------------------------------------------------------------

EIG_FLOOR = 1e-14


def psd_sqrt(A, floor=0.0):
    """Hermitian square root with eigenvalue clipping (guards roundoff PSD loss)."""
    w, U = np.linalg.eigh(np.asarray(A))
    w = np.maximum(w, floor)
    return (U * np.sqrt(w)) @ U.conj().T


def psd_inv_sqrt(A, floor=EIG_FLOOR):
    w, U = np.linalg.eigh(np.asarray(A))
    w = np.maximum(w, floor)
    return (U / np.sqrt(w)) @ U.conj().T


def _logdet_psd(A):
    """ln det A for Hermitian positive definite A (Cholesky-based)."""
    L = np.linalg.cholesky(np.asarray(A))
    return 2.0 * float(np.sum(np.log(np.abs(np.diag(L)))))


def logdet_ratio(V, Y):
    """ln|I + V V^H Y^{-1}| for PD Y, computed as lndet(Y + VV^H) - lndet(Y)."""
    V = np.atleast_2d(np.asarray(V, dtype=np.complex128))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.complex128))
    return _logdet_psd(Y + V @ V.conj().T) - _logdet_psd(Y)


# ----------------------------------------------------------------------
# The three bounds (scalar evaluators, used directly in selftests)
# ----------------------------------------------------------------------

def sinr_lower_bound(v, y, vbar, ybar):
    """Lower bound of ln(1+|v|^2/y) frozen at (vbar, ybar); tight there.

    value = ln(1+|vb|^2/yb) - |vb|^2/yb + 2Re{conj(vb) v}/yb
            - [|vb|^2 / (yb (|vb|^2+yb))] (|v|^2 + y)
    """
    if y <= 0 or ybar <= 0:
        raise ValueError("denominators must be positive")
    a0, b, c = sinr_bound_coeffs(vbar, ybar)
    return a0 + 2.0 * np.real(b * v) - c * (abs(v) ** 2 + y)


def sinr_bound_coeffs(vbar, ybar):
    """(a0, b, c): bound(v, y) = a0 + 2Re{b v} - c (|v|^2 + y), c > 0 iff vbar != 0."""
    snr = abs(vbar) ** 2 / ybar
    a0 = np.log1p(snr) - snr
    b = np.conj(vbar) / ybar
    c = abs(vbar) ** 2 / (ybar * (abs(vbar) ** 2 + ybar))
    return a0, b, c


def logdet_lower_bound(V, Y, Vbar, Ybar):
    """Matrix counterpart: lower bound of ln|I + V V^H Y^{-1}|, tight at (Vbar, Ybar)."""
    V = np.atleast_2d(np.asarray(V, dtype=np.complex128))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.complex128))
    a0, B, C = logdet_bound_coeffs(Vbar, Ybar, clip=False)
    t_lin = 2.0 * np.real(np.trace(B @ V))
    t_quad = np.real(np.trace(C @ (V @ V.conj().T + Y)))
    return a0 + t_lin - t_quad


def logdet_bound_coeffs(Vbar, Ybar, clip=True):
    """(a0, B, C) with bound = a0 + 2Re tr(B V) - <C, VV^H + Y>; C is PSD.

    C can lose PSD-ness to roundoff; with clip=True negative eigenvalues are
    clipped at 0 so its square root is well defined.
    """
    Vbar = np.atleast_2d(np.asarray(Vbar, dtype=np.complex128))
    Ybar = np.atleast_2d(np.asarray(Ybar, dtype=np.complex128))
    Yinv = np.linalg.inv(Ybar)
    Gram = Vbar @ Vbar.conj().T
    a0 = logdet_ratio(Vbar, Ybar) - np.real(np.trace(Gram @ Yinv))
    B = Vbar.conj().T @ Yinv
    C = Yinv - np.linalg.inv(Gram + Ybar)
    C = 0.5 * (C + C.conj().T)
    if clip:
        w, U = np.linalg.eigh(C)
        C = (U * np.maximum(w, 0.0)) @ U.conj().T
    return float(np.real(a0)), B, C


def logdet_upper_bound(X, Y, Xbar, Ybar):
    """Upper bound of f(X,Y) = ln|I + X X^H (Y Y^H + I)^{-1}|, tight at (Xbar, Ybar)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.complex128))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.complex128))
    const, Sinv, W, Ybar = _upper_bound_pieces(Xbar, Ybar)
    t_quad = np.real(np.trace(Sinv @ (X @ X.conj().T + Y @ Y.conj().T)))
    t_lin = -2.0 * np.real(np.trace(Ybar.conj().T @ Y))
    t_w = np.real(np.trace(W @ (Y @ Y.conj().T)))
    return const + t_quad + t_lin + t_w


def _upper_bound_pieces(Xbar, Ybar):
    """Frozen pieces of the upper bound: (const, S^{-1}, W, Ybar)."""
    Xbar = np.atleast_2d(np.asarray(Xbar, dtype=np.complex128))
    Ybar = np.atleast_2d(np.asarray(Ybar, dtype=np.complex128))
    m = Xbar.shape[0]
    I = np.eye(m)
    YY = Ybar @ Ybar.conj().T
    S = I + Xbar @ Xbar.conj().T + YY
    Sinv = np.linalg.inv(S)
    Dinv = np.linalg.inv(YY + I)
    W = I - Dinv
    fbar = _logdet_psd(S) - _logdet_psd(YY + I)
    const = fbar + np.real(np.trace(Sinv)) + np.real(np.trace(YY)) \
        - np.real(np.trace(Dinv))
    return float(const), Sinv, 0.5 * (W + W.conj().T), Ybar


def logdet_upper_truth(X, Y):
    """f(X,Y) = ln|I + X X^H (Y Y^H + I)^{-1}| (oracle side of the upper bound)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.complex128))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.complex128))
    m = X.shape[0]
    D = Y @ Y.conj().T + np.eye(m)
    return _logdet_psd(D + X @ X.conj().T) - _logdet_psd(D)


# ----------------------------------------------------------------------
# Composition: substitute affine maps into a frozen bound
# ----------------------------------------------------------------------

def compose_sinr_bound(dim, vbar, ybar, vmap, y_form):
    """Concave QuadraticForm for a0 + 2Re{b v(z)} - c (|v(z)|^2 + y(z)).

    vmap: 1x1 ComplexAffine; y_form: convex QuadraticForm (the interference
    power), whose factors flip sign under the -c scaling.
    """
    a0, b, c = sinr_bound_coeffs(vbar, ybar)
    if c <= 0.0:
        raise ValueError("degenerate expansion: zero signal gain at the expansion point")
    q = QuadraticForm(dim)
    q.constant = a0 + 2.0 * np.real(b * vmap.off[0, 0])
    q.add_lin(vmap.cols, 2.0 * np.real(b * vmap.coef[0, 0, :]))
    # -c |v(z)|^2
    cols, M, m0 = vmap.scaled(np.sqrt(c)).real_rows()
    q.add_minus(cols, M, m0)
    # -c y(z)
    if y_form.minus or y_form.convexity() == "indefinite":
        raise ValueError("interference form must be convex")
    ys = y_form.scaled(c)
    q.constant -= ys.constant
    q.lin -= ys.lin
    for cols, M, m0 in ys.plus:
        q.add_minus(cols, M, m0)
    return q


def compose_logdet_lower(dim, Vbar, Ybar, vmap, y_blocks, y_iso=None, y_const=None):
    """Concave QuadraticForm for the matrix lower bound under affine substitution.

    vmap:     ComplexAffine for V(z) (n x w).
    y_blocks: list of ComplexAffine B_j(z) with Y(z) = sum B_j B_j^H + ...
    y_iso:    optional convex QuadraticForm q(z) contributing q(z)·I to Y(z).
    y_const:  optional constant Hermitian part of Y(z).
    """
    n = np.atleast_2d(Vbar).shape[0]
    a0, B, C = logdet_bound_coeffs(Vbar, Ybar)
    Ch = psd_sqrt(C)
    q = QuadraticForm(dim)
    q.constant = a0 + 2.0 * np.real(np.trace(B @ vmap.off))
    # 2 Re tr(B V(z)): tr(B V) = sum_{i,j} B[i,j] V[j,i]
    lin_c = np.einsum("ij,jim->m", B, vmap.coef)
    q.add_lin(vmap.cols, 2.0 * np.real(lin_c))
    for blk in [vmap] + list(y_blocks):
        cols, M, m0 = blk.lmul(Ch).real_rows()
        q.add_minus(cols, M, m0)
    if y_iso is not None:
        if y_iso.minus:
            raise ValueError("isotropic interference form must be convex")
        ys = y_iso.scaled(np.real(np.trace(C)))
        q.constant -= ys.constant
        q.lin -= ys.lin
        for cols, M, m0 in ys.plus:
            q.add_minus(cols, M, m0)
    if y_const is not None:
        q.constant -= float(np.real(np.trace(C @ y_const)))
    return q


def compose_logdet_upper(dim, Xbar, Ybar, xmap, ymap, scale=1.0):
    """Convex QuadraticForm for the upper bound under affine substitution.

    xmap, ymap: ComplexAffine maps for X(z) and Y(z); scale multiplies the
    whole bound (1/2 for the augmented fronthaul expression).
    """
    const, Sinv, W, Ybar = _upper_bound_pieces(Xbar, Ybar)
    Sh = psd_sqrt(Sinv) * np.sqrt(scale)
    Wh = psd_sqrt(W) * np.sqrt(scale)
    q = QuadraticForm(dim)
    q.constant = scale * const
    for blk, weight in ((xmap, Sh), (ymap, Sh), (ymap, Wh)):
        cols, M, m0 = blk.lmul(weight).real_rows()
        q.add_plus(cols, M, m0)
    # -2 scale Re tr(Ybar^H Y(z))
    lin_c = np.einsum("ij,ijm->m", np.conj(Ybar), ymap.coef)
    q.add_lin(ymap.cols, -2.0 * scale * np.real(lin_c))
    q.constant += -2.0 * scale * np.real(np.trace(Ybar.conj().T @ ymap.off))
    return q


# ----------------------------------------------------------------------
# Epigraph subproblem container
# ----------------------------------------------------------------------

@dataclass
class ConeRow:
    """sum ||M z[cols] + m0||^2 <= rhs_const + rhs_vals' w[rhs_cols].

    z is the decision part; w = [z, aux, gamma] is the full subproblem vector.
    """

    name: str
    chunks: list
    rhs_cols: np.ndarray
    rhs_vals: np.ndarray
    rhs_const: float


@dataclass
class LinRow:
    """vals' w[cols] + const >= 0."""

    name: str
    cols: np.ndarray
    vals: np.ndarray
    const: float


@dataclass
class ConvexSubproblem:
    """Epigraph program: maximize gamma = w[-1] subject to cone and linear rows."""

    layout: DecisionLayout
    n_aux: int
    cones: list = field(default_factory=list)
    lins: list = field(default_factory=list)

    @property
    def n_vars(self):
        return self.layout.dim + self.n_aux + 1

    @property
    def gamma_index(self):
        return self.layout.dim + self.n_aux

    def add_cone(self, name, quad_chunks, rhs_cols, rhs_vals, rhs_const):
        self.cones.append(ConeRow(
            name,
            list(quad_chunks),
            np.asarray(rhs_cols, dtype=np.int64),
            np.asarray(rhs_vals, dtype=np.float64),
            float(rhs_const),
        ))

    def add_lin(self, name, cols, vals, const=0.0):
        self.lins.append(LinRow(
            name,
            np.asarray(cols, dtype=np.int64),
            np.asarray(vals, dtype=np.float64),
            float(const),
        ))

    def cone_from_le(self, name, q, rhs_cols=(), rhs_vals=(), rhs_const=0.0):
        """Convex q(z) <= affine(w): move constant/linear parts to the rhs."""
        if q.minus:
            raise ValueError(f"{name}: <= constraint needs a convex form")
        cols = list(np.nonzero(q.lin)[0]) + list(rhs_cols)
        vals = list(-q.lin[np.nonzero(q.lin)[0]]) + list(rhs_vals)
        self.add_cone(name, q.plus, cols, vals, rhs_const - q.constant)

    def cone_from_ge(self, name, q, rhs_cols=(), rhs_vals=(), rhs_const=0.0):
        """Concave q(z) >= affine(w): quadratic factors move to the left side."""
        if q.plus:
            raise ValueError(f"{name}: >= constraint needs a concave form")
        cols = list(np.nonzero(q.lin)[0]) + [int(c) for c in rhs_cols]
        vals = list(q.lin[np.nonzero(q.lin)[0]]) + [-v for v in rhs_vals]
        self.add_cone(name, q.minus, cols, vals, q.constant - rhs_const)

    # -- feasibility utilities -------------------------------------------------
    def cone_margin(self, row, w):
        z = w[:self.layout.dim]
        quad = 0.0
        for cols, M, m0 in row.chunks:
            r = M @ z[cols] + m0
            quad += float(r @ r)
        rhs = row.rhs_const + float(row.rhs_vals @ w[row.rhs_cols])
        return rhs - quad

    def margins(self, w):
        out = {}
        for row in self.cones:
            out[row.name] = self.cone_margin(row, w)
        for row in self.lins:
            out[row.name] = float(row.vals @ w[row.cols]) + row.const
        return out

    def self_gamma(self, w):
        """Largest gamma keeping w (with w[-1] replaced) feasible; inf if gamma is free."""
        gi = self.gamma_index
        best = np.inf
        for row in self.cones:
            mask = row.rhs_cols == gi
            if not mask.any():
                continue
            cg = float(row.rhs_vals[mask].sum())
            w0 = w.copy()
            w0[gi] = 0.0
            margin0 = self.cone_margin(row, w0)
            if cg >= 0:
                raise ValueError("gamma must tighten every constraint it enters")
            best = min(best, margin0 / (-cg))
        return best

    def restricted(self, lift, keep_nonneg_col=None):
        """Compose every row with z = lift @ w_red (aux and gamma pass through).

        Used by the equal-power baseline: lift has shape (dim, k).
        """
        lift = np.asarray(lift, dtype=np.float64)
        k = lift.shape[1]
        red_layout = DecisionLayout(
            dim=k, reals_per_p=1, p_slots={}, x_slots={},
            nonneg=np.zeros(k, dtype=bool))
        sub = ConvexSubproblem(red_layout, self.n_aux)
        allcols = np.arange(k, dtype=np.int64)
        shift = self.layout.dim - k

        def map_rhs(cols, vals):
            out_c, out_v = [], []
            dense = np.zeros(k)
            for c, v in zip(cols, vals):
                if c < self.layout.dim:
                    dense += v * lift[c]
                else:
                    out_c.append(c - shift)
                    out_v.append(v)
            nz = np.nonzero(dense)[0]
            return np.concatenate([nz, np.array(out_c, dtype=np.int64)]), \
                np.concatenate([dense[nz], np.array(out_v)])

        for row in self.cones:
            chunks = [(allcols, M @ lift[cols], m0) for cols, M, m0 in row.chunks]
            cols, vals = map_rhs(row.rhs_cols, row.rhs_vals)
            sub.add_cone(row.name, chunks, cols, vals, row.rhs_const)
        for row in self.lins:
            cols, vals = map_rhs(row.cols, row.vals)
            if cols.size:
                sub.add_lin(row.name, cols, vals, row.const)
        if keep_nonneg_col is not None:
            sub.layout.nonneg[keep_nonneg_col] = True
        return sub

    def dump(self):
        """Self-describing text rendering for offline debugging."""
        lines = [f"subproblem: n_vars={self.n_vars} dim={self.layout.dim} "
                 f"aux={self.n_aux} cones={len(self.cones)} lin={len(self.lins)}",
                 "objective: maximize w[%d]" % self.gamma_index]
        for row in self.cones:
            nrows = sum(M.shape[0] for _, M, _ in row.chunks)
            rhs = " + ".join([f"{v:+.6g}*w[{c}]" for c, v in zip(row.rhs_cols, row.rhs_vals)])
            lines.append(f"cone {row.name}: ||{nrows} rows||^2 <= {row.rhs_const:.6g} {rhs}")
        for row in self.lins:
            terms = " + ".join([f"{v:+.6g}*w[{c}]" for c, v in zip(row.cols, row.vals)])
            lines.append(f"lin {row.name}: {terms} + {row.const:.6g} >= 0")
        return "\n".join(lines)
