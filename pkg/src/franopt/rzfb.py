"""Regularized zero-forcing beamformer directions.

For every (RRH, user) pair the direction is the regularized least-squares
answer to "point at my user, null every user of every other requested file":

    G = (PhiTilde^H PhiTilde + alpha I)^{-1} h

where PhiTilde stacks the intended row h^H on top of all inter-content
interferer rows. With enough antennas the stack has full row rank, alpha = 0
and the nulling is exact; otherwise alpha = N_R * sigma / P trades leakage
against noise amplification. Directions do not depend on the subfile index,
so the bank stores one vector per (RRH, user) and the per-subfile power
scales are the only remaining decision variables.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

RANK_REL_THRESHOLD = 1e-10


@dataclass(frozen=True)
class InterferenceStack:
    """Channel rows relevant to one (user, RRH) direction choice."""

    Phi: np.ndarray        # (n_nu, n_t) interferer rows h^H
    PhiTilde: np.ndarray   # (n_nu+1, n_t): intended row stacked on Phi

    @property
    def n_nu(self):
        return self.Phi.shape[0]

    @property
    def intended(self):
        """Intended channel h as a column (conjugate of the first row)."""
        return self.PhiTilde[0].conj()


def interference_channels(instance, requests, k_nu, i):
    """Stack the rows of all users of all other requested files.

    Canonical row order: file index ascending, user index ascending within
    each group. k_nu is a global UE index; its own group is excluded.
    """
    own = None
    for nu, group in enumerate(requests.groups):
        if k_nu in group:
            own = nu
            break
    if own is None:
        raise ValueError(f"UE {k_nu} requests nothing")
    rows = [instance.channels[k, i].conj()
            for nu, group in enumerate(requests.groups) if nu != own
            for k in group]
    n_t = instance.channels.shape[2]
    Phi = np.array(rows).reshape(len(rows), n_t)
    PhiTilde = np.vstack([instance.channels[k_nu, i].conj()[None, :], Phi])
    return InterferenceStack(Phi, PhiTilde)


def regularization_alpha(stack, P, sigma, N_R):
    """0 when exact nulling is possible (full row rank), else N_R*sigma/P."""
    sv = np.linalg.svd(stack.PhiTilde, compute_uv=False)
    rank = int(np.sum(sv > RANK_REL_THRESHOLD * sv[0]))
    return 0.0 if rank == stack.n_nu + 1 else N_R * sigma / P


def beamformer(stack, alpha):
    """Solve for the direction; exact-ZF dual form when alpha = 0.

    alpha = 0 presumes full row rank: the minimum-norm interpolator
    G = PhiTilde^H (PhiTilde PhiTilde^H)^{-1} e_1 then gives Phi G = 0 and
    h^H G = 1 exactly. For alpha > 0 the n_t x n_t normal equations are
    positive definite and solved directly.
    """
    Pt = stack.PhiTilde
    h = stack.intended
    if alpha == 0.0:
        B = Pt @ Pt.conj().T
        e1 = np.zeros(Pt.shape[0], dtype=complex)
        e1[0] = 1.0
        try:
            y = cho_solve(cho_factor(B), e1)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                "rank-deficient stack needs alpha > 0") from exc
        return Pt.conj().T @ y
    A = Pt.conj().T @ Pt + alpha * np.eye(Pt.shape[1])
    return cho_solve(cho_factor(A), h)


@dataclass
class BeamformerBank:
    """All directions of one trial, keyed (i, nu, k_local).

    Directions are shared across subfiles. cross[(i, nu, k)] holds the
    received gain h_{k',i}^H G at every UE k' (one complex per UE), the
    only channel information the power-scale optimizers need.
    """

    G: dict = field(default_factory=dict)
    alpha_used: dict = field(default_factory=dict)
    cross: dict = field(default_factory=dict)
    norm: dict = field(default_factory=dict)

    def dump(self):
        lines = []
        for key in sorted(self.G):
            g = self.G[key]
            lines.append(
                f"(i={key[0]}, nu={key[1]}, k={key[2]}): alpha={self.alpha_used[key]:.3e} "
                f"norm={self.norm[key]:.4e} gain={self.cross[key][key[2]]:.4e}")
        return "\n".join(lines)


def build_bank(instance, requests, plan, P, sigma):
    """One direction per (RRH, requested file, group member) actually served.

    Entries exist for (i, nu) with at least one subfile of nu served by RRH i;
    within the group every member gets its own direction. P and sigma feed
    the regularization weight.
    """
    N_R = instance.channels.shape[1]
    bank = BeamformerBank()
    for i in range(N_R):
        served_files = np.nonzero(plan.serves[i].any(axis=1))[0]
        for nu in served_files:
            for k_local, k in enumerate(requests.groups[nu]):
                stack = interference_channels(instance, requests, k, i)
                alpha = regularization_alpha(stack, P, sigma, N_R)
                G = beamformer(stack, alpha)
                key = (i, int(nu), k_local)
                bank.G[key] = G
                bank.alpha_used[key] = alpha
                bank.norm[key] = float(np.linalg.norm(G))
                bank.cross[key] = instance.channels[:, i, :].conj() @ G
    return bank
