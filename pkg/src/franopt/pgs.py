"""Power-scale optimization for proper Gaussian signaling.

The decision vector stacks one real scale per (RRH, file, user, subfile)
beam actually served, followed by one nonnegative quantization scale per
antenna of every RRH that receives fronthaul transfers. On top of a frozen
beamformer bank this module evaluates the exact user rates, per-link
fronthaul mutual information, and power draws, replaces them at each
iterate by tight concave/convex quadratic surrogates, and drives a
two-phase path-following loop: feasibility rounds first, then either
energy-efficiency ascent or max-min rate ascent. The driver is generic
over the model object so the improper-signaling variant reuses it.
"""

from dataclasses import dataclass, field, replace
import time

import numpy as np

from .solver import solve_subproblem
from .surrogate import (ComplexAffine, ConvexSubproblem, DecisionLayout,
                        QuadraticForm, compose_logdet_upper,
                        compose_sinr_bound, logdet_upper_truth)
from .units import NATS_TO_BITS, bits_to_nats

PHASE1_CAP = 30      # feasibility rounds before declaring infeasible
PHASE2_CAP = 200     # ascent rounds before giving up on convergence
REL_TOL = 1e-3       # relative objective change treated as converged
PERTURB_SCALE = 1e-6  # lift applied to scales feeding a dead expansion gain


class InfeasibleError(RuntimeError):
    """No point satisfying the rate and fronthaul floors was found."""


class SolverFailure(RuntimeError):
    """The inner conic solve did not return a verified optimum."""


class DegenerateExpansion(ValueError):
    """A signal gain vanished at the expansion point; perturb and retry."""

    def __init__(self, msg, cols):
        super().__init__(msg)
        self.cols = cols


# ----------------------------------------------------------------------
# Points and traces
# ----------------------------------------------------------------------

@dataclass
class PgsPoint:
    """One candidate: the flat decision vector tied to its model.

    z[:n_p] are the beam power scales p, z[n_p:] the quantization scales x
    (nonnegative by construction).
    """

    model: object
    z: np.ndarray

    @property
    def p(self):
        return self.z[:self.model.n_p]

    @property
    def x(self):
        return self.z[self.model.n_p:]


@dataclass
class IterationTrace:
    """Per-iteration log of one optimization run.

    phase1 records feasibility rounds (margin, subproblem gamma), phase2
    the ascent rounds (objective in nats and bits, gamma, constraint
    residuals, solver status, wall time). n_v/n_c and the flop-order
    estimate describe the per-iteration subproblem size.
    """

    n_v: int = 0
    n_c: int = 0
    complexity: float = 0.0
    phase1: list = field(default_factory=list)
    phase2: list = field(default_factory=list)
    status: str = ""

    @property
    def iterations(self):
        return len(self.phase1), len(self.phase2)

    def objectives(self, unit="nats"):
        key = "objective_nats" if unit == "nats" else "objective_bits"
        return np.array([rec[key] for rec in self.phase2])


def _chunks_value(chunks, z):
    tot = 0.0
    for cols, M, m0 in chunks:
        r = M @ z[cols] + m0
        tot += float(r @ r)
    return tot


def _slot_keys(serves, group_sizes):
    """Canonical p-slot order: RRH-major, then file, subfile, group member."""
    keys = []
    N_R, n_req, L = serves.shape
    for i in range(N_R):
        for nu in range(n_req):
            for ell in range(L):
                if serves[i, nu, ell]:
                    keys.extend((i, nu, k, ell) for k in range(group_sizes[nu]))
    return keys


# ----------------------------------------------------------------------
# Model: frozen per-trial data
# ----------------------------------------------------------------------

class PgsModel:
    """Slot layout, gain tables, and power chunks of one delivery problem.

    Everything that does not depend on the iterate is precomputed here:
    per-content gain coefficients at every UE, the exact interference
    forms, per-(RRH, file) beam power chunks, fronthaul signal maps, and
    the per-RRH budget forms. Iteration-dependent surrogates are assembled
    on demand.
    """

    def __init__(self, instance, requests, plan, bank, cfg, normalize=True):
        ch = instance.channels
        self.N_u, self.N_R, self.n_t = ch.shape
        self.n_req = len(requests.requested_files)
        self.L = plan.serves.shape[2]
        self.groups = requests.groups
        self.plan = plan
        self.cfg = cfg
        self.eps = cfg.epsilon
        self.x_support = tuple(plan.x_support)
        # receive-side unit change h -> h/sqrt(sigma), sigma -> 1: SINRs,
        # rates, powers and the fronthaul mi are all invariant, but the
        # subproblem coefficients stop spanning 13 orders of magnitude
        self.noise_scale = float(cfg.sigma_W) ** -0.5 if normalize else 1.0

        group_sizes = [len(g) for g in self.groups]
        p_keys = _slot_keys(plan.serves, group_sizes)
        p_slots = {key: m for m, key in enumerate(p_keys)}
        self.n_p = len(p_keys)
        x_slots = {}
        idx = self.n_p
        for i in self.x_support:
            for j in range(self.n_t):
                x_slots[(i, j)] = idx
                idx += 1
        self.dim = idx
        nonneg = np.zeros(self.dim, dtype=bool)
        nonneg[self.n_p:] = True
        self.layout = DecisionLayout(self.dim, 1, p_slots, x_slots, nonneg)
        self.layout.validate()
        self.x_cols = {i: np.array([x_slots[(i, j)] for j in range(self.n_t)])
                       for i in self.x_support}

        # content gain tables: per (file, subfile), the received gain at
        # every UE as a linear map of the p scales
        self.contents = [(nu, ell) for nu in range(self.n_req)
                         for ell in range(self.L)]
        self.cidx = {c: m for m, c in enumerate(self.contents)}
        self.content_maps = []
        for nu, ell in self.contents:
            cols, vals = [], []
            for i in range(self.N_R):
                if not plan.serves[i, nu, ell]:
                    continue
                for k in range(group_sizes[nu]):
                    cols.append(p_slots[(i, nu, k, ell)])
                    vals.append(bank.cross[(i, nu, k)] * self.noise_scale)
            if not cols:
                raise ValueError(f"subfile ({nu},{ell}) has no serving RRH")
            self.content_maps.append((np.array(cols, dtype=np.int64),
                                      np.array(vals).T))

        # exact interference-plus-noise forms, one per (file, subfile, user):
        # residual same-file subfiles, every other file, quantization leakage
        # at the transferring RRHs, thermal noise
        self.psi_forms = {}
        sigma = cfg.sigma_W * self.noise_scale ** 2
        for nu in range(self.n_req):
            for k, u in enumerate(self.groups[nu]):
                leak_chunks, leak_const = [], 0.0
                for i in self.x_support:
                    w = np.sqrt(self.eps) * np.abs(ch[u, i, :]) * self.noise_scale
                    leak_chunks.append((self.x_cols[i], np.diag(w),
                                        np.zeros(self.n_t)))
                    leak_const += float(w @ w)  # eps * ||h||^2
                for ell in range(self.L):
                    q = QuadraticForm(self.dim)
                    q.constant = sigma + leak_const
                    for nu2, ell2 in self.contents:
                        if nu2 == nu and ell2 <= ell:
                            continue
                        cols2, vals2 = self.content_maps[self.cidx[(nu2, ell2)]]
                        amap = ComplexAffine.from_row(cols2, vals2[u])
                        q.add_plus(*amap.real_rows())
                    for chunk in leak_chunks:
                        q.add_plus(*chunk)
                    self.psi_forms[(nu, ell, k)] = q

        # beam power chunks per (RRH, file), one entry per served subfile
        self.beam_chunks = {}
        self.beam_sum_norm = {}
        self.served_pairs = {i: sorted(plan.N_i(i)) for i in range(self.N_R)}
        for i in range(self.N_R):
            for nu, ell in self.served_pairs[i]:
                cols = np.array([p_slots[(i, nu, k, ell)]
                                 for k in range(group_sizes[nu])])
                G = np.stack([bank.G[(i, nu, k)]
                              for k in range(group_sizes[nu])], axis=1)
                bm = ComplexAffine(cols, G[:, None, :],
                                   np.zeros((self.n_t, 1)))
                self.beam_chunks.setdefault((i, nu), []).append(bm.real_rows())
                self.beam_sum_norm[(i, nu)] = float(
                    np.linalg.norm(G.sum(axis=1)))

        # quantization power gate: RRH i is charged for file nu when it
        # lacks part of the file and actually transfers something
        self.quant_gate = np.zeros((self.N_R, self.n_req), dtype=bool)
        for nu in range(self.n_req):
            for i in plan.iota[nu]:
                if i in self.x_support:
                    self.quant_gate[i, nu] = True
        self.quant_mult = self.quant_gate.sum(axis=1)

        # per-RRH budget forms (every file's draw summed) and per-file
        # dissipation forms (every RRH plus the static circuit power)
        self.P_non = self.N_R * self.n_t * cfg.P_a_W
        self.budget_forms = []
        for i in range(self.N_R):
            q = QuadraticForm(self.dim)
            for nu in range(self.n_req):
                for chunk in self.beam_chunks.get((i, nu), []):
                    q.add_plus(*chunk)
            mlt = int(self.quant_mult[i])
            if mlt:
                q.add_plus(self.x_cols[i],
                           np.sqrt(self.eps * mlt) * np.eye(self.n_t))
                q.constant += self.eps * self.n_t * mlt
            self.budget_forms.append(q)
        self.pi_forms = []
        for nu in range(self.n_req):
            q = QuadraticForm(self.dim)
            q.constant = self.P_non
            for i in range(self.N_R):
                for chunk in self.beam_chunks.get((i, nu), []):
                    q.add_plus(*chunk)
                if self.quant_gate[i, nu]:
                    q.add_plus(self.x_cols[i],
                               np.sqrt(self.eps) * np.eye(self.n_t))
                    q.constant += self.eps * self.n_t
            self.pi_forms.append(q)

        # fronthaul signal maps: scaled transferred-beam columns and the
        # diagonal quantization map, one pair per transferring RRH
        self.fr_maps = {}
        root_eps = np.sqrt(self.eps)
        for i in self.x_support:
            xi = sorted(plan.Xi_i(i))
            cols = [p_slots[(i, nu, k, ell)] for nu, ell in xi
                    for k in range(group_sizes[nu])]
            coef = np.zeros((self.n_t, len(xi), len(cols)), dtype=complex)
            m = 0
            for c, (nu, ell) in enumerate(xi):
                for k in range(group_sizes[nu]):
                    coef[:, c, m] = bank.G[(i, nu, k)] / root_eps
                    m += 1
            xmap = ComplexAffine(np.array(cols, dtype=np.int64), coef,
                                 np.zeros((self.n_t, len(xi))))
            ycoef = np.zeros((self.n_t, self.n_t, self.n_t), dtype=complex)
            for j in range(self.n_t):
                ycoef[j, j, j] = 1.0
            ymap = ComplexAffine(self.x_cols[i], ycoef,
                                 np.zeros((self.n_t, self.n_t)))
            self.fr_maps[i] = (xmap, ymap)

        total_served = max(int(plan.serves.sum()), 1)
        self.perturb_delta = PERTURB_SCALE * np.sqrt(
            cfg.P_budget_W / total_served)

    # -- points ------------------------------------------------------------
    def make_point(self, z):
        z = np.asarray(z, dtype=np.float64).copy()
        if z.size != self.dim:
            raise ValueError("decision vector size mismatch")
        z[self.n_p:] = np.maximum(z[self.n_p:], 0.0)
        return PgsPoint(self, z)

    def start_point(self, cfg):
        """Equal per-beam power split saturating each budget; x = 1."""
        z = np.zeros(self.dim)
        P = cfg.P_budget_W
        for i in range(self.N_R):
            mlt = int(self.quant_mult[i])
            head = self.eps * self.n_t * mlt
            x0 = 0.0
            if i in self.x_cols:
                if head > P:
                    raise InfeasibleError(
                        f"RRH {i}: quantization floor {head:.3g} W exceeds "
                        f"the {P:.3g} W budget")
                x0 = 1.0 if 2.0 * head <= P else np.sqrt(P / (2.0 * head) - 1.0)
                z[self.x_cols[i]] = x0
            quant = head * (x0 ** 2 + 1.0)
            pairs = self.served_pairs[i]
            if not pairs:
                continue
            share = max(P - quant, 0.0) / len(pairs)
            for nu, ell in pairs:
                c = np.sqrt(share) / max(self.beam_sum_norm[(i, nu)], 1e-12)
                for k in range(len(self.groups[nu])):
                    z[self.layout.p_slots[(i, nu, k, ell)]] = c
        return self.make_point(z)

    def perturbed(self, point, cols, mult=1):
        z = point.z.copy()
        z[cols] += mult * self.perturb_delta
        return self.make_point(z)

    # -- exact evaluation ----------------------------------------------------
    def content_gains(self, z):
        return [vals @ z[cols] for cols, vals in self.content_maps]

    def user_rate(self, z, nu, k, ell):
        cols, vals = self.content_maps[self.cidx[(nu, ell)]]
        a = vals[self.groups[nu][k]] @ z[cols]
        psi = float(self.psi_forms[(nu, ell, k)].value(z))
        return float(np.log1p(abs(a) ** 2 / psi))

    def subfile_rates(self, z):
        gains = self.content_gains(z)
        out = np.empty((self.n_req, self.L))
        for (nu, ell), c in self.cidx.items():
            worst = np.inf
            for k, u in enumerate(self.groups[nu]):
                a = gains[c][u]
                psi = float(self.psi_forms[(nu, ell, k)].value(z))
                worst = min(worst, float(np.log1p(abs(a) ** 2 / psi)))
            out[nu, ell] = worst
        return out

    def fronthaul_mi(self, z, i):
        if i not in self.fr_maps:
            return 0.0
        xmap, ymap = self.fr_maps[i]
        return float(logdet_upper_truth(xmap.value(z), ymap.value(z)))

    def power_per_rrh(self, z, nu):
        per = np.zeros(self.N_R)
        for i in range(self.N_R):
            per[i] = _chunks_value(self.beam_chunks.get((i, nu), []), z)
            if self.quant_gate[i, nu]:
                xi = z[self.x_cols[i]]
                per[i] += self.eps * (float(xi @ xi) + self.n_t)
        return per

    def objective(self, z, mode):
        rates = self.subfile_rates(z)
        if mode == "maxmin":
            return float(rates.min())
        totals = rates.sum(axis=1)
        pis = np.array([q.value(z) for q in self.pi_forms])
        return float((totals / pis).min())

    def feas_margin(self, z, cfg):
        """Worst normalized slack of the rate floor and fronthaul cap."""
        parts = []
        floor = bits_to_nats(cfg.r_min)
        if floor > 0:
            parts.append(float(self.subfile_rates(z).min()) / floor - 1.0)
        cap = NATS_TO_BITS * cfg.C_fronthaul
        if np.isfinite(cap) and self.fr_maps:
            parts.append(min(1.0 - self.fronthaul_mi(z, i) / cap
                             for i in self.fr_maps))
        return float(min(parts)) if parts else np.inf

    def residual_summary(self, z, cfg):
        """Signed margins of the original constraints (negative = violated)."""
        out = {"power": float(cfg.P_budget_W
                              - max(q.value(z) for q in self.budget_forms))}
        floor = bits_to_nats(cfg.r_min)
        out["rate"] = (float(self.subfile_rates(z).min() - floor)
                       if floor > 0 else np.inf)
        cap = NATS_TO_BITS * cfg.C_fronthaul
        if np.isfinite(cap) and self.fr_maps:
            out["fronthaul"] = float(min(cap - self.fronthaul_mi(z, i)
                                         for i in self.fr_maps))
        else:
            out["fronthaul"] = np.inf
        return out

    def paper_dims(self):
        n_v = int(self.plan.serves.sum()) + self.N_R * self.n_t + 1
        n_c = 2 * self.N_R + self.n_req * (self.L + 1)
        return n_v, n_c

    # -- surrogates and subproblems -------------------------------------------
    def surrogates(self, z):
        gains = self.content_gains(z)
        rate = {}
        for (nu, ell), c in self.cidx.items():
            cols, vals = self.content_maps[c]
            for k, u in enumerate(self.groups[nu]):
                a = complex(gains[c][u])
                if a == 0:
                    raise DegenerateExpansion(
                        f"zero gain for subfile ({nu},{ell}) at UE {u}", cols)
                psi = self.psi_forms[(nu, ell, k)]
                vmap = ComplexAffine.from_row(cols, vals[u])
                rate[(nu, ell, k)] = compose_sinr_bound(
                    self.dim, a, float(psi.value(z)), vmap, psi)
        fr = {}
        for i, (xmap, ymap) in self.fr_maps.items():
            fr[i] = compose_logdet_upper(
                self.dim, xmap.value(z), ymap.value(z), xmap, ymap)
        return {"rate": rate, "fronthaul": fr}

    def assemble(self, point, mode, cfg):
        z = point.z
        sur = self.surrogates(z)
        floor = bits_to_nats(cfg.r_min)
        cap = NATS_TO_BITS * cfg.C_fronthaul
        n_aux = len(self.contents) if mode == "ee" else 0
        sp = ConvexSubproblem(self.layout, n_aux)
        gi = sp.gamma_index

        if mode == "ee":
            theta = self.objective(z, "ee")
            for c, (nu, ell) in enumerate(self.contents):
                t = self.dim + c
                for k in range(len(self.groups[nu])):
                    sp.cone_from_ge(f"rate[{nu},{ell},{k}]",
                                    sur["rate"][(nu, ell, k)],
                                    rhs_cols=[t], rhs_vals=[1.0])
                if floor > 0:
                    sp.add_lin(f"rate_floor[{nu},{ell}]", [t], [1.0], -floor)
            for nu in range(self.n_req):
                tcols = [self.dim + self.cidx[(nu, ell)]
                         for ell in range(self.L)]
                sp.cone_from_le(f"ee[{nu}]", self.pi_forms[nu].scaled(theta),
                                rhs_cols=tcols + [gi],
                                rhs_vals=[1.0] * self.L + [-1.0])
        elif mode == "maxmin":
            for key, q in sur["rate"].items():
                nu, ell, k = key
                sp.cone_from_ge(f"rate[{nu},{ell},{k}]", q,
                                rhs_cols=[gi], rhs_vals=[1.0])
        elif mode == "feasibility":
            if floor > 0:
                for key, q in sur["rate"].items():
                    nu, ell, k = key
                    sp.cone_from_ge(f"rate[{nu},{ell},{k}]", q,
                                    rhs_cols=[gi], rhs_vals=[floor],
                                    rhs_const=floor)
        else:
            raise ValueError(f"unknown mode {mode!r}")

        if np.isfinite(cap):
            for i, q in sur["fronthaul"].items():
                if mode == "feasibility":
                    sp.cone_from_le(f"fronthaul[{i}]", q, rhs_cols=[gi],
                                    rhs_vals=[-cap], rhs_const=cap)
                else:
                    sp.cone_from_le(f"fronthaul[{i}]", q, rhs_const=cap)
        for i in range(self.N_R):
            if self.budget_forms[i].plus:
                sp.cone_from_le(f"power[{i}]", self.budget_forms[i],
                                rhs_const=cfg.P_budget_W)
        return sp


def build_model_pgs(instance, requests, plan, bank, cfg, normalize=True):
    return PgsModel(instance, requests, plan, bank, cfg, normalize)


# ----------------------------------------------------------------------
# Contract operations
# ----------------------------------------------------------------------

def effective_gains_pgs(bank, plan, p, requests=None):
    """Received gain of every content at every UE, linear in p.

    p is either a dict keyed (i, nu, k, ell) or a flat vector in canonical
    slot order. Returns {"content": {(nu, ell): per-UE gains}}; with
    requests given, also the in-group gains "a" keyed (nu, k, ell) and the
    cross-content gains "b" keyed (nu, k, ell, other).
    """
    group_sizes = {}
    for i, nu, k in bank.cross:
        group_sizes[nu] = max(group_sizes.get(nu, 0), k + 1)
    n_req, L = plan.serves.shape[1:]
    sizes = [group_sizes.get(nu, 1) for nu in range(n_req)]
    keys = _slot_keys(plan.serves, sizes)
    if isinstance(p, dict):
        pvec = np.array([p.get(key, 0.0) for key in keys], dtype=np.float64)
    else:
        pvec = np.asarray(p, dtype=np.float64)
        if pvec.size != len(keys):
            raise ValueError("p does not match the slot layout")
    N_u = next(iter(bank.cross.values())).size
    content = {}
    for nu in range(n_req):
        for ell in range(L):
            content[(nu, ell)] = np.zeros(N_u, dtype=complex)
    for key, scale in zip(keys, pvec):
        i, nu, k, ell = key
        content[(nu, ell)] += scale * bank.cross[(i, nu, k)]
    table = {"content": content}
    if requests is not None:
        a, b = {}, {}
        for nu, group in enumerate(requests.groups):
            for k, u in enumerate(group):
                for ell in range(L):
                    a[(nu, k, ell)] = content[(nu, ell)][u]
                    for nu2 in range(n_req):
                        if nu2 != nu:
                            b[(nu, k, ell, nu2)] = content[(nu2, ell)][u]
        table["a"] = a
        table["b"] = b
    return table


def rate_pgs(point, k_nu, ell):
    """Decoded-symbol rate in nats for user k_nu = (nu, k_local)."""
    nu, k = k_nu
    return point.model.user_rate(point.z, nu, k, ell)


def fronthaul_mi_pgs(point, i):
    """Fronthaul mutual information of RRH i in nats (0 when nothing moves)."""
    return point.model.fronthaul_mi(point.z, i)


def power_pgs(point, nu):
    """Per-RRH transmit power for file nu and the total including circuits."""
    per = point.model.power_per_rrh(point.z, nu)
    return per, float(per.sum() + point.model.P_non)


def surrogates_pgs(point):
    """Tight concave rate and convex fronthaul quadratic bounds at point."""
    return point.model.surrogates(point.z)


def assemble_subproblem_pgs(point, mode, cfg):
    """Epigraph subproblem around point for mode ee/maxmin/feasibility."""
    return point.model.assemble(point, mode, cfg)


# ----------------------------------------------------------------------
# Two-phase path-following driver (shared with the improper variant)
# ----------------------------------------------------------------------

def _assemble_guarded(model, point, mode, cfg):
    for attempt in range(4):
        try:
            return model.assemble(point, mode, cfg), point
        except DegenerateExpansion as err:
            point = model.perturbed(point, err.cols, attempt + 1)
    raise SolverFailure("expansion point still degenerate after perturbation")


def run_path_following(model, mode, cfg, init=None, solver_tol=1e-8):
    """Feasibility rounds, then monotone ascent of the mode objective."""
    if mode not in ("ee", "maxmin"):
        raise ValueError(f"unknown optimization mode {mode!r}")
    n_v, n_c = model.paper_dims()
    trace = IterationTrace(n_v=n_v, n_c=n_c,
                           complexity=float(n_c ** 2.5 * (n_v ** 2 + n_c)))
    point = model.start_point(cfg) if init is None else model.make_point(init)
    # the max-min objective subsumes the rate floor, so feasibility only
    # tracks the fronthaul cap there
    feas_cfg = replace(cfg, r_min=0.0) if mode == "maxmin" else cfg

    margin = model.feas_margin(point.z, feas_cfg)
    while margin < 0.0:
        if len(trace.phase1) >= PHASE1_CAP:
            raise InfeasibleError(
                f"margin {margin:.3e} after {PHASE1_CAP} feasibility rounds")
        t0 = time.perf_counter()
        sp, point = _assemble_guarded(model, point, "feasibility", feas_cfg)
        sol = solve_subproblem(sp, tol=solver_tol)
        if sol.status == "Infeasible":
            raise InfeasibleError(
                f"convex restriction infeasible: {sol.certificate}")
        if sol.status != "Optimal":
            raise SolverFailure(
                f"feasibility subproblem {sol.status}: {sol.certificate}")
        point = model.make_point(sol.w[:model.dim])
        margin = model.feas_margin(point.z, feas_cfg)
        trace.phase1.append(dict(
            margin=float(margin), gamma=float(sol.gamma),
            objective_nats=model.objective(point.z, mode),
            solver_status=sol.status, wall_s=time.perf_counter() - t0))

    obj = model.objective(point.z, mode)
    trace.status = "iteration-cap"
    for _ in range(PHASE2_CAP):
        t0 = time.perf_counter()
        sp, point = _assemble_guarded(model, point, mode, cfg)
        sol = solve_subproblem(sp, tol=solver_tol)
        if sol.status != "Optimal":
            trace.status = f"solver:{sol.status}"
            break
        cand = model.make_point(sol.w[:model.dim])
        cobj = model.objective(cand.z, mode)
        if not cobj > obj:  # fixed point of the surrogate map
            trace.status = "converged"
            break
        gain = (cobj - obj) / max(abs(obj), 1e-12)
        point, obj = cand, cobj
        trace.phase2.append(dict(
            objective_nats=obj, objective_bits=obj * NATS_TO_BITS,
            gamma=float(sol.gamma),
            residuals=model.residual_summary(point.z, feas_cfg),
            solver_status=sol.status, wall_s=time.perf_counter() - t0))
        if gain < REL_TOL:
            trace.status = "converged"
            break
    return point, trace


def optimize_pgs(instance, requests, plan, bank, mode, cfg, init=None,
                 solver_tol=1e-8, normalize=True):
    """Full run: build the model, find a feasible point, ascend the objective.

    Returns the final point and its trace. Raises InfeasibleError when no
    feasible point emerges within the phase-1 cap and SolverFailure when a
    subproblem cannot be solved to verified optimality.
    """
    model = PgsModel(instance, requests, plan, bank, cfg, normalize)
    return run_path_following(model, mode, cfg, init=init,
                              solver_tol=solver_tol)
