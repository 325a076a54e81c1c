"""Deterministic integration of the collision kinetics on an energy grid.

Densities live at cell centers x_k = (k + 1/2) h of a uniform grid on
[0, x_max].  The pair-energy distribution is a discrete convolution
C_m = h * sum_{j+j'=m} rho_j rho_{j'}, an exact midpoint rule for the
convolution integral at s_m = (m + 1) h, and gain terms are tail sums over
the s grid, whose cells exactly tile [x_k, inf).  With this pairing the
discrete generator conserves energy exactly and mass up to the convolution
tail that leaks past x_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .core import SolverBlowupError, TypeTable, ValidationError
from .reactions import ReactionNetwork

__all__ = [
    "DensityGrid",
    "SolverConfig",
    "gain_one_type",
    "rhs_one_type",
    "rhs_multitype",
    "integrate",
    "mass",
    "mean_energy",
    "suggest_dt",
]


@dataclass
class DensityGrid:
    """Per-type cell-centered densities on a uniform energy grid."""

    x_max: float
    values: np.ndarray  # shape (V, n_cells)

    def __post_init__(self):
        if not (self.x_max > 0):
            raise ValidationError(f"x_max must be positive, got {self.x_max}")
        vals = np.atleast_2d(np.asarray(self.values, dtype=float)).copy()
        if vals.ndim != 2 or vals.shape[1] < 2:
            raise ValidationError("grid values must be (V, n_cells) with n_cells >= 2")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("grid values must be finite")
        if np.any(vals < -1e-12):
            raise ValidationError("grid values must be nonnegative")
        np.maximum(vals, 0.0, out=vals)
        self.values = vals

    @property
    def n_types(self) -> int:
        return self.values.shape[0]

    @property
    def n_cells(self) -> int:
        return self.values.shape[1]

    @property
    def h(self) -> float:
        return self.x_max / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.h

    def copy(self) -> "DensityGrid":
        return DensityGrid(self.x_max, self.values.copy())

    @classmethod
    def from_families(
        cls,
        families,
        x_max: float,
        n_cells: int,
        weights=None,
    ) -> "DensityGrid":
        """Project densities onto the grid by exact cell averaging of the CDF."""
        families = list(families)
        if weights is None:
            weights = np.ones(len(families)) / len(families) if len(families) > 1 else [1.0]
        weights = np.asarray(weights, dtype=float)
        if weights.size != len(families):
            raise ValidationError("need one weight per type density")
        edges = np.linspace(0.0, x_max, n_cells + 1)
        h = edges[1] - edges[0]
        vals = np.empty((len(families), n_cells))
        for k, (fam, w) in enumerate(zip(families, weights)):
            cdf = fam.cdf(edges)
            vals[k] = w * np.diff(cdf) / h
        return cls(x_max, vals)


def mass(grid: DensityGrid) -> float:
    """Total mass summed over types: sum_v integral of rho_v."""
    return float(grid.values.sum() * grid.h)


def mean_energy(grid: DensityGrid, types: TypeTable) -> float:
    """Mass-weighted mean of internal plus kinetic energy."""
    if types.count != grid.n_types:
        raise ValidationError(
            f"grid has {grid.n_types} types but the table has {types.count}"
        )
    x = grid.centers
    total = 0.0
    for v in range(grid.n_types):
        total += float(np.sum((types.internal_energies[v] + x) * grid.values[v]) * grid.h)
    return total


# ---------------------------------------------------------------------------
# one-type operator (uniform scattering, constant rate)
# ---------------------------------------------------------------------------


def _pair_convolution(a: np.ndarray, b: np.ndarray, h: float) -> np.ndarray:
    """C_m = h * sum_{j+j'=m} a_j b_{j'}, the pair density at s_m = (m+1) h."""
    n = a.size
    if n <= 256:
        conv = np.convolve(a, b)
    else:
        conv = fftconvolve(a, b)
    np.maximum(conv, 0.0, out=conv)  # FFT round-off can dip below zero
    return conv * h


def _gain_1d(vals: np.ndarray, h: float, leak_to_last: bool = False) -> np.ndarray:
    """Gain of the one-type equation: tail sum of C(s)/s from each cell outward."""
    n = vals.size
    conv = _pair_convolution(vals, vals, h)  # length 2n-1, s_m = (m+1) h
    weights = conv / np.arange(1.0, conv.size + 1.0)  # = h * C_m / s_m
    tail = np.cumsum(weights[::-1])[::-1]
    gain = tail[:n].copy()
    if leak_to_last:
        m = np.arange(n, conv.size)
        leak = float(np.sum(conv[n:] * (m + 1 - n) / (m + 1)) * h)
        gain[-1] += leak / h
    return gain


def gain_one_type(grid: DensityGrid) -> np.ndarray:
    """Collision gain at each cell for a single-type grid."""
    if grid.n_types != 1:
        raise ValidationError("gain_one_type needs a single-type grid")
    return _gain_1d(grid.values[0], grid.h)


def rhs_one_type(grid: DensityGrid, alpha: float) -> np.ndarray:
    """Time derivative of a normalized one-type density: alpha * (gain - rho)."""
    if alpha < 0:
        raise ValidationError(f"rate must be >= 0, got {alpha}")
    return alpha * (gain_one_type(grid) - grid.values[0])


# ---------------------------------------------------------------------------
# multitype operator
# ---------------------------------------------------------------------------


def _sum_rate_values(rate, sigma: np.ndarray) -> np.ndarray:
    if hasattr(rate, "of_sum"):
        return np.asarray(rate.of_sum(sigma), dtype=float)
    raise ValidationError("rate does not expose a sum-only form")


def _effective_weights(kernel, delta_i: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Per-s renormalized output weights; column o is w_o(s), zero when infeasible."""
    raw = np.array([o.weight for o in kernel.outputs])
    feas = sigma[:, None] + delta_i[None, :] >= 0.0
    w = feas * raw[None, :]
    norm = w.sum(axis=1)
    safe = np.where(norm > 0, norm, 1.0)
    return w / safe[:, None]


def _fast_path_ok(network: ReactionNetwork) -> bool:
    for ch in network.binary:
        if not getattr(ch.rate, "depends_on_sum_only", False):
            return False
        if ch.kernel.kind == "uniform":
            continue
        if ch.kernel.kind == "canonical":
            shapes = {}
            for tid, fam in ch.kernel.densities.items():
                g = fam.gamma_shape()
                if g is None:
                    return False
                shapes[tid] = g
            betas = {g[1] for g in shapes.values()}
            if len(betas) > 1:
                return False
            continue
        return False
    return True


def _ordered_recipients(ch):
    """Yield (recipient, partner) output roles for every ordered source expansion."""
    v, w = ch.pair
    for o in ch.kernel.outputs:
        yield o, o.first, o.second
        if v != w:
            yield o, o.second, o.first


def _rhs_multitype_fast(grid: DensityGrid, network: ReactionNetwork, leak_to_last: bool):
    vals = grid.values
    n = grid.n_cells
    h = grid.h
    x = grid.centers
    ie = network.types.internal_energies
    sigma = np.arange(1.0, 2.0 * n) * h  # pair-sum grid, s_m = (m+1) h
    out = np.zeros_like(vals)

    for ch in network.binary:
        v, w = ch.pair
        rho_v = vals[v - 1]
        rho_w = vals[w - 1]
        conv = _pair_convolution(rho_v, rho_w, h)
        alpha_s = _sum_rate_values(ch.rate, sigma)
        delta_i = np.array(
            [
                ie[v - 1] + ie[w - 1] - ie[o.first - 1] - ie[o.second - 1]
                for o in ch.kernel.outputs
            ]
        )
        w_eff = _effective_weights(ch.kernel, delta_i, sigma)
        flux = alpha_s * conv * h  # collision mass rate per s cell

        # loss: collisions remove the pair wherever at least one output is feasible
        feasible_any = w_eff.sum(axis=1) > 0.0
        gated = alpha_s * feasible_any
        for a, b in ((v, w), (w, v)) if v != w else ((v, w),):
            corr = np.convolve(gated, vals[b - 1][::-1])[n - 1 : 2 * n - 1]
            out[a - 1] -= vals[a - 1] * corr * h
        # gain per ordered recipient
        for col, (o, rcp, other) in _indexed_recipients(ch):
            q = flux * w_eff[:, col]
            e = sigma + delta_i[col]
            live = q > 0.0  # positive weight implies e >= 0
            if not np.any(live):
                continue
            q_live = q[live]
            e_live = e[live]
            if ch.kernel.kind == "uniform":
                # the flat split puts mass q * (cell overlap with [0, e]) / e in
                # each cell; handling the partially covered boundary cell keeps
                # the on-grid deposit mass-exact even at threshold energies
                dens = np.where(e_live > 0.0, q_live / np.where(e_live > 0, e_live, 1.0), 0.0)
                kfull = np.floor(e_live / h).astype(int)
                diff = np.zeros(n + 1)
                inside = np.minimum(kfull, n)
                diff[0] += dens.sum()
                np.add.at(diff, inside, -dens)
                deposits = np.cumsum(diff)[:n]
                bnd = np.zeros(n)
                partial = kfull < n
                frac = np.clip(e_live - kfull * h, 0.0, h)
                np.add.at(bnd, np.minimum(kfull, n - 1)[partial], (dens * frac)[partial] / h)
                # zero available energy: the whole outgoing mass sits at x = 0
                point = e_live == 0.0
                if np.any(point):
                    bnd[0] += q_live[point].sum() / h
                deposits = deposits + bnd
                if leak_to_last:
                    # share of each s cell's output interval falling past the grid
                    lk = q_live * np.clip(e_live - n * h, 0.0, None) / np.maximum(e_live, 1e-300)
                    deposits[-1] += lk.sum() / h
                out[rcp - 1] += deposits
            else:  # canonical, gamma-family case
                # splits narrower than half a cell cannot be resolved as a
                # density; lump their whole mass into the first cell
                tiny = e_live < 0.5 * h
                if np.any(tiny):
                    out[rcp - 1, 0] += q_live[tiny].sum() / h
                q2 = q_live[~tiny]
                e2 = e_live[~tiny]
                if q2.size == 0:
                    continue
                fam_r = ch.kernel.densities[rcp]
                fam_o = ch.kernel.densities[other]
                pr = fam_r.pdf(x)
                block = max(1, (1 << 21) // n)
                acc = np.zeros(n)
                for s0 in range(0, e2.size, block):
                    sl = slice(s0, s0 + block)
                    diff = e2[sl][None, :] - x[:, None]
                    contrib = np.where(diff >= 0, fam_o.pdf(np.maximum(diff, 0.0)), 0.0)
                    # normalizing with the same quadrature that deposits the
                    # split keeps each s cell's outgoing mass exact on-grid
                    denom = h * (pr @ contrib)
                    scale = np.where(denom > 0, q2[sl] / np.where(denom > 0, denom, 1.0), 0.0)
                    acc += contrib @ scale
                out[rcp - 1] += pr * acc
    return out


def _indexed_recipients(ch):
    """(stored output index, (output, recipient, partner)) for ordered expansions."""
    index = {id(o): k for k, o in enumerate(ch.kernel.outputs)}
    return [(index[id(o)], (o, rcp, other)) for o, rcp, other in _ordered_recipients(ch)]


def _rhs_multitype_generic(
    grid: DensityGrid, network: ReactionNetwork, assume_normalized: bool
):
    """Direct quadrature of the gain/loss integrals; O(V^2 n^3), small grids only."""
    vals = grid.values
    n = grid.n_cells
    h = grid.h
    x = grid.centers
    ie = network.types.internal_energies
    out = np.zeros_like(vals)
    types = network.types
    for ch in network.binary:
        v, w = ch.pair
        rho_v = vals[v - 1]
        rho_w = vals[w - 1]
        delta_i = {
            (o.first, o.second): ie[v - 1] + ie[w - 1] - ie[o.first - 1] - ie[o.second - 1]
            for o in ch.kernel.outputs
        }
        raw_w = {(o.first, o.second): o.weight for o in ch.kernel.outputs}
        for iy in range(n):
            ty = x[iy]
            rates = np.asarray(ch.rate(ty, x), dtype=float)  # alpha(ty, z) over z cells
            for iz in range(n):
                tz = x[iz]
                weight_yz = rho_v[iy] * rho_w[iz] * h * h
                if weight_yz == 0.0 or rates[iz] == 0.0:
                    continue
                s = ty + tz
                feas = {k: s + d >= 0 for k, d in delta_i.items()}
                norm = sum(raw_w[k] for k, f in feas.items() if f)
                if assume_normalized:
                    mass_out = 1.0 if norm > 0 else 0.0
                else:
                    mass_out = ch.kernel.outcome_mass(v, ty, w, tz, types)
                # one ordered loss term per source slot; the ordered (y, z)
                # double loop already covers both roles when v == w
                out[v - 1, iy] -= rates[iz] * mass_out * rho_v[iy] * rho_w[iz] * h
                if v != w:
                    out[w - 1, iz] -= rates[iz] * mass_out * rho_v[iy] * rho_w[iz] * h
                if norm <= 0:
                    continue
                for o, rcp, other in _ordered_recipients(ch):
                    key = (o.first, o.second)
                    if not feas[key]:
                        continue
                    e = s + delta_i[key]
                    # any sub-normalization lives inside the kernel's split law
                    scale = rates[iz] * weight_yz * (raw_w[key] / norm)
                    if rcp == o.first:
                        pdf = ch.kernel.split_pdf(o, e, x)
                    else:  # complement coordinate of the same split
                        pdf = np.where(
                            (x >= 0) & (x <= e),
                            ch.kernel.split_pdf(o, e, np.clip(e - x, 0.0, None)),
                            0.0,
                        )
                    out[rcp - 1] += scale * pdf
    return out


def rhs_multitype(
    grid: DensityGrid,
    network: ReactionNetwork,
    *,
    assume_normalized_kernels: bool = True,
    leak_to_last: bool = False,
) -> np.ndarray:
    """Collision gain minus loss for every (type, cell).

    Networks whose rates depend only on the energy sum and whose kernels
    are uniform or gamma-family canonical use an O(V^2 n log n + V^2 n^2)
    path built on pair convolutions; anything else falls back on direct
    O(V^2 n^3) quadrature, intended for small grids.  Unary channels have
    no counterpart in this equation and are rejected.
    """
    if network.types.count != grid.n_types:
        raise ValidationError(
            f"grid has {grid.n_types} types, network has {network.types.count}"
        )
    if network.has_unary:
        raise ValidationError("the collision equation covers binary channels only")
    if _fast_path_ok(network):
        return _rhs_multitype_fast(grid, network, leak_to_last)
    return _rhs_multitype_generic(grid, network, assume_normalized_kernels)


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


@dataclass
class SolverConfig:
    dt: float
    t_end: float
    scheme: str = "rk4"
    alpha: float | None = None
    network: ReactionNetwork | None = None
    snapshot_times: tuple | None = None
    renormalize_mass: bool = False
    assume_normalized_kernels: bool = True
    clip_budget: float = 1e-6

    def validate(self) -> None:
        if not (self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ValidationError(f"t_end must be >= 0, got {self.t_end}")
        if self.scheme not in ("euler", "rk4"):
            raise ValidationError(f"scheme must be 'euler' or 'rk4', got {self.scheme!r}")
        if (self.alpha is None) == (self.network is None):
            raise ValidationError("provide exactly one of alpha (one-type) or network")
        if self.alpha is not None and self.alpha < 0:
            raise ValidationError("alpha must be >= 0")


def suggest_dt(grid: DensityGrid, config: SolverConfig) -> float:
    """Heuristic stability estimate for the explicit schemes (not enforced).

    The loss term relaxes each cell at rate about alpha * mass, so a step
    well below its inverse keeps the explicit update contractive.
    """
    if config.alpha is not None:
        rate = config.alpha
    else:
        rate = max(
            (getattr(ch.rate, "value", 1.0) for ch in config.network.binary),
            default=1.0,
        )
    m = max(mass(grid), 1e-12)
    return 0.2 / (rate * m)


def integrate(grid0: DensityGrid, config: SolverConfig):
    """Fixed-step explicit integration; returns [(time, DensityGrid)] snapshots."""
    config.validate()
    if config.alpha is not None and grid0.n_types != 1:
        raise ValidationError("scalar-rate configuration needs a one-type grid")

    leak = config.renormalize_mass

    def rhs(v: np.ndarray) -> np.ndarray:
        g = DensityGrid(grid0.x_max, v)
        if config.alpha is not None:
            gain = _gain_1d(g.values[0], g.h, leak_to_last=leak)
            return (config.alpha * (gain - g.values[0]))[None, :]
        return rhs_multitype(
            g,
            config.network,
            assume_normalized_kernels=config.assume_normalized_kernels,
            leak_to_last=leak,
        )

    h = grid0.h
    vals = grid0.values.copy()
    mass0 = float(vals.sum() * h)
    snap_times = (
        tuple(sorted(float(s) for s in config.snapshot_times))
        if config.snapshot_times is not None
        else (config.t_end,)
    )
    for s in snap_times:
        if s < 0 or s > config.t_end + 1e-12:
            raise ValidationError(f"snapshot time {s} outside [0, {config.t_end}]")
    n_steps = int(math.ceil(config.t_end / config.dt - 1e-9)) if config.t_end > 0 else 0
    out = []
    pending = list(snap_times)
    clipped = 0.0
    t = 0.0

    def flush(t_now: float):
        while pending and pending[0] <= t_now + 1e-9:
            pending.pop(0)
            out.append((t_now, DensityGrid(grid0.x_max, vals.copy())))

    flush(0.0)
    if config.t_end == 0:
        return out
    for step in range(1, n_steps + 1):
        if config.scheme == "euler":
            vals = vals + config.dt * rhs(vals)
        else:
            k1 = rhs(vals)
            k2 = rhs(vals + 0.5 * config.dt * k1)
            k3 = rhs(vals + 0.5 * config.dt * k2)
            k4 = rhs(vals + config.dt * k3)
            vals = vals + (config.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = step * config.dt
        if not np.all(np.isfinite(vals)):
            raise SolverBlowupError("non-finite density", step=step, time=t)
        neg = vals < 0.0
        if np.any(neg):
            clipped += float(-vals[neg].sum() * h)
            vals[neg] = 0.0
            if clipped > config.clip_budget:
                raise SolverBlowupError(
                    f"clipped negative mass {clipped:.3e} exceeds budget", step=step, time=t
                )
        if config.renormalize_mass:
            m_now = float(vals.sum() * h)
            if m_now > 0:
                vals *= mass0 / m_now
        flush(min(t, config.t_end))
    return out
