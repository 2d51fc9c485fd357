"""Topology, channel, request, cache, and delivery-plan generation.

The simulated network is a single circular cell where a set of multi-antenna
RRHs serves single-antenna UEs. Each file of the library is split into L
subfiles; an RRH either has a subfile cached or receives it over a capacity-
limited fronthaul link (soft transfer). This module draws all random
ingredients of one experiment trial and derives the delivery bookkeeping the
optimizers consume: who caches what, who gets what pushed over the fronthaul,
and which RRHs carry quantization-noise variables.

Everything here is deterministic given (config, seed) and immutable after
construction.
"""

import io
from dataclasses import dataclass, field, asdict, replace

import numpy as np

# placement retry bound before declaring the geometry infeasible
_MAX_PLACEMENT_TRIES = 10000

INSTANCE_DUMP_VERSION = 1


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    """Cell, library, and radio parameters (reference defaults)."""

    N_R: int = 5                  # RRH count
    N_u: int = 10                 # UE count
    n_t: int = 4                  # antennas per RRH
    F: int = 100                  # library size
    L: int = 4                    # subfiles per file
    mu: float = 0.5               # fractional cache capacity
    gamma_z: float = 1.0          # Zipf exponent
    N_F: int = 2                  # fronthaul fan-out per subfile
    cell_radius_m: float = 300.0
    P_budget_W: float = 1.0       # 30 dBm per RRH
    P_a_W: float = 5.6e-3         # circuit power per antenna
    sigma_W: float = 10.0 ** (-13.4)   # -174 dBm/Hz over 10 MHz
    C_fronthaul: float = 10.0     # bits/s/Hz per fronthaul link (inf = uncapped)
    r_min: float = 0.0            # per-subfile rate floor, bits/s/Hz (0 = off)
    epsilon: float = 1e-2         # quantization floor
    shadowing_db: float = 8.0     # lognormal shadowing std-dev (0 disables)
    seed: int = 0
    min_dist_m: float = 10.0      # UE-RRH guard distance
    gain_score: str = "max"       # fronthaul targeting score: "max" or "sum"

    def validate(self):
        if min(self.N_R, self.N_u, self.n_t, self.F, self.L) < 1:
            raise ValueError("counts must be >= 1")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if self.gamma_z < 0:
            raise ValueError("gamma_z must be >= 0")
        if not 1 <= self.N_F <= self.N_R:
            raise ValueError("N_F must lie in [1, N_R]")
        if self.epsilon <= 0 or self.sigma_W <= 0:
            raise ValueError("epsilon and sigma_W must be positive")
        if self.P_budget_W <= 0 or self.cell_radius_m <= 0:
            raise ValueError("powers and radius must be positive")
        if self.r_min < 0 or self.C_fronthaul <= 0:
            raise ValueError("r_min >= 0 and C_fronthaul > 0 required")
        if self.gain_score not in ("max", "sum"):
            raise ValueError("gain_score must be 'max' or 'sum'")
        return self


# flat key=value config support ------------------------------------------------

_CONFIG_TYPES = {f.name: f.type for f in ScenarioConfig.__dataclass_fields__.values()}


def parse_flat_config(text):
    """Parse `key = value` lines (# comments, blank lines allowed) into a dict."""
    out = {}
    for lineno, raw in enumerate(io.StringIO(text), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or key in out:
            raise ValueError(f"line {lineno}: bad or duplicate key {key!r}")
        out[key] = val
    return out


def _coerce(name, raw, kind):
    if kind is int or kind == "int":
        return int(raw)
    if kind is float or kind == "float":
        return float("inf") if raw.lower() in ("inf", "infinity") else float(raw)
    return raw


def scenario_from_mapping(mapping):
    """Build a ScenarioConfig from string key/value pairs, ignoring foreign keys."""
    kwargs = {}
    for key, raw in mapping.items():
        if key in _CONFIG_TYPES:
            kwargs[key] = _coerce(key, raw, _CONFIG_TYPES[key]) \
                if isinstance(raw, str) else raw
    return ScenarioConfig(**kwargs).validate()


def scenario_to_mapping(cfg):
    return {k: v for k, v in asdict(cfg).items()}


# ----------------------------------------------------------------------
# instance containers
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkInstance:
    """One realization of geometry and channels.

    channels[k, i] is the length-n_t vector from RRH i to UE k, pathloss and
    shadowing included.
    """

    rrh_positions: np.ndarray     # (N_R, 2) meters
    ue_positions: np.ndarray      # (N_u, 2) meters
    channels: np.ndarray          # (N_u, N_R, n_t) complex

    def __post_init__(self):
        if not np.all(np.isfinite(self.channels.view(np.float64))):
            raise ValueError("non-finite channel entries")
        if np.any(np.all(self.channels == 0, axis=2)):
            raise ValueError("zero channel vector")


@dataclass(frozen=True)
class RequestProfile:
    requested_files: tuple        # distinct file ids, ascending
    groups: tuple                 # tuple of tuples of UE indices, aligned with requested_files

    @property
    def n_req(self):
        return len(self.requested_files)

    def validate(self, N_u):
        all_ues = sorted(k for g in self.groups for k in g)
        if all_ues != list(range(N_u)):
            raise ValueError("groups must partition the UEs")
        if len(set(self.requested_files)) != len(self.requested_files):
            raise ValueError("requested files must be distinct")
        if any(len(g) == 0 for g in self.groups):
            raise ValueError("empty request group")
        return self


@dataclass(frozen=True)
class CacheState:
    c: np.ndarray                 # (N_R, F, L) bool

    def capacity_used(self, L):
        return self.c.sum(axis=(1, 2)) / L

    def validate(self, cfg):
        if self.c.shape != (cfg.N_R, cfg.F, cfg.L):
            raise ValueError("cache tensor shape mismatch")
        used = self.capacity_used(cfg.L)
        if np.any(used > cfg.mu * cfg.F + 1e-9):
            raise ValueError("cache capacity exceeded")
        return self


@dataclass(frozen=True)
class DeliveryPlan:
    """Fronthaul bookkeeping for the requested files only.

    Indices nu run over requests.requested_files; subfile indices are 0-based.
    """

    d: np.ndarray                 # (N_R, N_req, L) bool, fronthaul transfers
    serves: np.ndarray            # (N_R, N_req, L) bool, cached-or-transferred
    iota: tuple                   # per nu: tuple of RRHs lacking the full file
    x_support: tuple              # RRHs with at least one transfer

    def N_i(self, i):
        return {(nu, ell) for nu, ell in zip(*np.nonzero(self.serves[i]))}

    def Xi_i(self, i):
        return {(nu, ell) for nu, ell in zip(*np.nonzero(self.d[i]))}


# ----------------------------------------------------------------------
# generation
# ----------------------------------------------------------------------

def _uniform_disc(rng, n, radius):
    r = radius * np.sqrt(rng.uniform(size=n))
    th = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def generate_topology(cfg, rng=None):
    """Draw UE/RRH positions and all channel vectors for one trial."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    ue = _uniform_disc(rng, cfg.N_u, cfg.cell_radius_m)
    rrh = np.empty((cfg.N_R, 2))
    for i in range(cfg.N_R):
        for attempt in range(_MAX_PLACEMENT_TRIES):
            cand = _uniform_disc(rng, 1, cfg.cell_radius_m)[0]
            if np.min(np.hypot(*(ue - cand).T)) >= cfg.min_dist_m:
                rrh[i] = cand
                break
        else:
            raise ValueError("could not satisfy the minimum UE-RRH distance")
    d_km = np.hypot(ue[:, None, 0] - rrh[None, :, 0],
                    ue[:, None, 1] - rrh[None, :, 1]) / 1000.0
    rho_db = 148.1 + 37.6 * np.log10(d_km)
    if cfg.shadowing_db > 0:
        rho_db = rho_db + rng.normal(0.0, cfg.shadowing_db, size=rho_db.shape)
    amp = np.sqrt(10.0 ** (-rho_db / 10.0))
    small = (rng.standard_normal((cfg.N_u, cfg.N_R, cfg.n_t))
             + 1j * rng.standard_normal((cfg.N_u, cfg.N_R, cfg.n_t))) / np.sqrt(2.0)
    return NetworkInstance(rrh, ue, amp[:, :, None] * small)


def zipf_popularity(F, gamma_z):
    """P(f) proportional to f^(-gamma_z), f = 1..F."""
    if F < 1 or gamma_z < 0:
        raise ValueError("need F >= 1 and gamma_z >= 0")
    w = np.arange(1, F + 1, dtype=float) ** (-gamma_z)
    return w / w.sum()


def draw_requests(pop, N_u, rng):
    """Each UE draws one file; UEs sharing a file form one group."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    picks = rng.choice(len(pop), size=N_u, p=np.asarray(pop))
    files = sorted(set(int(f) for f in picks))
    groups = tuple(tuple(int(k) for k in np.nonzero(picks == f)[0]) for f in files)
    return RequestProfile(tuple(files), groups).validate(N_u)


def build_cache(strategy, cfg, rng=None):
    """CMP, CFD, or RanC placement; all satisfy the capacity inequality."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed) if not isinstance(rng, np.random.Generator) else rng
    c = np.zeros((cfg.N_R, cfg.F, cfg.L), dtype=bool)
    if strategy == "CMP":
        c[:, :int(cfg.mu * cfg.F), :] = True
    elif strategy == "CFD":
        n_frag = cfg.L // 2 if cfg.mu >= 0.5 else int(cfg.mu * cfg.L)
        for i in range(cfg.N_R):
            for f in range(cfg.F):
                c[i, f, rng.choice(cfg.L, size=n_frag, replace=False)] = True
    elif strategy == "RanC":
        n_files = int(cfg.mu * cfg.F)
        for i in range(cfg.N_R):
            c[i, rng.choice(cfg.F, size=n_files, replace=False), :] = True
    else:
        raise ValueError(f"unknown caching strategy {strategy!r}")
    return CacheState(c).validate(cfg)


def build_delivery_plan(instance, requests, cache, cfg):
    """Route each requested subfile over the fronthaul to its best helpers.

    RRHs not caching subfile (nu, ell) are ranked by channel-gain score to the
    requesting group and the best N_F receive it (all of them if fewer lack it).
    """
    N_R = instance.rrh_positions.shape[0]
    n_req, L = requests.n_req, cfg.L
    gains = np.sum(np.abs(instance.channels) ** 2, axis=2)   # (N_u, N_R)
    d = np.zeros((N_R, n_req, L), dtype=bool)
    serves = np.zeros((N_R, n_req, L), dtype=bool)
    iota = []
    for nu, f in enumerate(requests.requested_files):
        group = list(requests.groups[nu])
        score = gains[group].max(axis=0) if cfg.gain_score == "max" \
            else gains[group].sum(axis=0)
        for ell in range(L):
            cached = cache.c[:, f, ell]
            serves[cached, nu, ell] = True
            eligible = np.nonzero(~cached)[0]
            if eligible.size == 0:
                continue
            order = eligible[np.argsort(-score[eligible], kind="stable")]
            chosen = order[:min(cfg.N_F, eligible.size)]
            d[chosen, nu, ell] = True
            serves[chosen, nu, ell] = True
        iota.append(tuple(int(i) for i in range(N_R)
                          if not cache.c[i, f, :].all()))
    x_support = tuple(int(i) for i in range(N_R) if d[i].any())
    return DeliveryPlan(d, serves, tuple(iota), x_support)


# ----------------------------------------------------------------------
# instance serialization (replay support)
# ----------------------------------------------------------------------

def save_instance(path, instance, requests=None):
    data = {
        "version": np.array(INSTANCE_DUMP_VERSION),
        "rrh_positions": instance.rrh_positions,
        "ue_positions": instance.ue_positions,
        "channels": instance.channels,
    }
    if requests is not None:
        data["requested_files"] = np.asarray(requests.requested_files)
        data["group_sizes"] = np.asarray([len(g) for g in requests.groups])
        data["group_members"] = np.asarray([k for g in requests.groups for k in g])
    np.savez_compressed(path, **data)


def load_instance(path):
    with np.load(path) as data:
        version = int(data["version"])
        if version != INSTANCE_DUMP_VERSION:
            raise ValueError(f"unsupported instance dump version {version}")
        inst = NetworkInstance(data["rrh_positions"], data["ue_positions"],
                               data["channels"])
        requests = None
        if "requested_files" in data:
            sizes = data["group_sizes"]
            members = data["group_members"]
            groups, pos = [], 0
            for s in sizes:
                groups.append(tuple(int(k) for k in members[pos:pos + s]))
                pos += s
            requests = RequestProfile(
                tuple(int(f) for f in data["requested_files"]), tuple(groups))
    return inst, requests
