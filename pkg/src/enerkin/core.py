"""Domain types and energy bookkeeping for the reaction system.

A molecule type carries a fixed internal energy; a particle carries a
nonnegative kinetic energy on top of it.  Binary collisions and unary type
changes redistribute kinetic energy so that the total (internal + kinetic)
energy of the system is conserved exactly, up to floating point.

Type ids are 1-based throughout the public surface.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "KineticsError",
    "ValidationError",
    "UnknownTypeError",
    "InfeasibleReactionError",
    "KernelSupportError",
    "SimulationError",
    "SolverBlowupError",
    "TypeTable",
    "Particle",
    "ParticleSystem",
    "total_energy",
    "collision_feasible",
    "available_kinetic_energy",
    "apply_collision",
    "apply_unary",
    "renormalize_total_energy",
]


class KineticsError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(KineticsError):
    """A configuration object or input failed validation."""


class UnknownTypeError(KineticsError):
    """A particle references a type id outside 1..V."""


class InfeasibleReactionError(KineticsError):
    """A reaction outcome violates the energy feasibility constraint."""


class KernelSupportError(KineticsError):
    """A kernel was conditioned on a total energy carrying no mass."""


class SimulationError(KineticsError):
    """A fault raised inside the event loop, annotated with event context."""

    def __init__(self, message: str, *, time: float = None, indices=None):
        context = []
        if time is not None:
            context.append(f"t={time:.6g}")
        if indices is not None:
            context.append(f"particles={indices}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.time = time
        self.indices = indices


class SolverBlowupError(KineticsError):
    """The time stepper produced NaN/negative blow-up; reduce dt."""

    def __init__(self, message: str, *, step: int, time: float):
        super().__init__(f"{message} at step {step}, t={time:.6g}; try a smaller dt")
        self.step = step
        self.time = time


@dataclass(frozen=True)
class TypeTable:
    """The V molecule types with their internal energies (ids 1..V)."""

    internal_energies: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.internal_energies, dtype=float)).copy()
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("a type table needs at least one type")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError("internal energies must be finite and >= 0")
        arr.setflags(write=False)
        object.__setattr__(self, "internal_energies", arr)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != arr.size:
                raise ValidationError(
                    f"{len(labels)} labels for {arr.size} types"
                )
            object.__setattr__(self, "labels", labels)

    @property
    def count(self) -> int:
        return int(self.internal_energies.size)

    def internal_energy(self, type_id):
        """Internal energy of a 1-based type id (scalar or array)."""
        ids = np.asarray(type_id)
        self.check_ids(ids)
        return self.internal_energies[ids - 1]

    def check_ids(self, type_ids) -> None:
        ids = np.atleast_1d(np.asarray(type_ids))
        bad = (ids < 1) | (ids > self.count)
        if np.any(bad):
            where = int(np.argmax(bad))
            raise UnknownTypeError(
                f"type id {ids[where]} at index {where} outside 1..{self.count}"
            )


@dataclass(frozen=True)
class Particle:
    """A (type, kinetic energy) pair."""

    type_id: int
    kinetic_energy: float

    def __post_init__(self):
        if self.type_id < 1:
            raise ValidationError(f"type id must be >= 1, got {self.type_id}")
        if not (self.kinetic_energy >= 0):
            raise ValidationError(
                f"kinetic energy must be >= 0, got {self.kinetic_energy}"
            )


@dataclass
class ParticleSystem:
    """State of the M-particle chain: parallel type/energy arrays and a clock.

    Particles form an unordered multiset; indices exist for bookkeeping only
    and no observable output may depend on their order.
    """

    type_ids: np.ndarray
    kinetic_energies: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        tids = np.atleast_1d(np.asarray(self.type_ids, dtype=np.int64)).copy()
        kin = np.atleast_1d(np.asarray(self.kinetic_energies, dtype=float)).copy()
        if tids.shape != kin.shape or tids.ndim != 1:
            raise ValidationError("type ids and energies must be matching 1-d arrays")
        if np.any(tids < 1):
            raise ValidationError("type ids are 1-based")
        if np.any(kin < 0) or not np.all(np.isfinite(kin)):
            raise ValidationError("kinetic energies must be finite and >= 0")
        self.type_ids = tids
        self.kinetic_energies = kin

    @classmethod
    def from_particles(cls, particles: Iterable[Particle | tuple], time: float = 0.0):
        pts = [p if isinstance(p, Particle) else Particle(*p) for p in particles]
        return cls(
            type_ids=np.array([p.type_id for p in pts], dtype=np.int64),
            kinetic_energies=np.array([p.kinetic_energy for p in pts], dtype=float),
            time=time,
        )

    @property
    def size(self) -> int:
        return int(self.type_ids.size)

    def particles(self) -> list[Particle]:
        return [
            Particle(int(v), float(t))
            for v, t in zip(self.type_ids, self.kinetic_energies)
        ]

    def type_counts(self, n_types: int) -> np.ndarray:
        """Occupation numbers per type, indexed 0..V-1 for types 1..V."""
        return np.bincount(self.type_ids, minlength=n_types + 1)[1:]

    def copy(self) -> "ParticleSystem":
        return ParticleSystem(
            self.type_ids.copy(), self.kinetic_energies.copy(), self.time
        )

    def multiset_equal(self, other: "ParticleSystem", tol: float = 0.0) -> bool:
        """Equality as unordered multisets of (type, energy) pairs."""
        if self.size != other.size:
            return False
        a = np.lexsort((self.kinetic_energies, self.type_ids))
        b = np.lexsort((other.kinetic_energies, other.type_ids))
        if not np.array_equal(self.type_ids[a], other.type_ids[b]):
            return False
        return np.allclose(
            self.kinetic_energies[a], other.kinetic_energies[b], rtol=0.0, atol=tol
        )


def total_energy(system: ParticleSystem, types: TypeTable) -> float:
    """Sum of internal plus kinetic energy over all particles."""
    types.check_ids(system.type_ids)
    internal = types.internal_energies[system.type_ids - 1]
    return float(np.sum(internal) + np.sum(system.kinetic_energies))


def collision_feasible(v, t, v_other, t_other, v_out, v_out_other, types: TypeTable) -> bool:
    """Whether the incoming pair carries enough energy for the outgoing types."""
    e = available_kinetic_energy(v, t, v_other, t_other, v_out, v_out_other, types)
    return bool(e >= 0.0)


def available_kinetic_energy(
    v, t, v_other, t_other, v_out, v_out_other, types: TypeTable
) -> float:
    """Kinetic energy left for the outgoing pair; negative means infeasible."""
    ie = types.internal_energies
    types.check_ids(np.array([v, v_other, v_out, v_out_other]))
    return float(ie[v - 1] + t + ie[v_other - 1] + t_other - ie[v_out - 1] - ie[v_out_other - 1])


def apply_collision(
    system: ParticleSystem,
    i: int,
    j: int,
    outcome: tuple[int, float, int],
    types: TypeTable,
) -> ParticleSystem:
    """Replace particles i, j by the outgoing pair, conserving total energy.

    ``outcome`` is (type of the particle replacing i, its kinetic energy,
    type of the particle replacing j); the second outgoing energy is fixed
    by conservation.
    """
    if i == j:
        raise ValidationError(f"collision needs two distinct particles, got i=j={i}")
    m = system.size
    if not (0 <= i < m and 0 <= j < m):
        raise ValidationError(f"particle indices ({i}, {j}) outside 0..{m - 1}")
    v_out, u, v_out_other = outcome
    vi = int(system.type_ids[i])
    vj = int(system.type_ids[j])
    ti = float(system.kinetic_energies[i])
    tj = float(system.kinetic_energies[j])
    e_avail = available_kinetic_energy(vi, ti, vj, tj, v_out, v_out_other, types)
    if e_avail < 0.0:
        raise InfeasibleReactionError(
            f"outcome types ({v_out}, {v_out_other}) need more energy than "
            f"available from ({vi}, {ti}) + ({vj}, {tj})"
        )
    if not (0.0 <= u <= e_avail):
        raise InfeasibleReactionError(
            f"outgoing kinetic energy {u} outside [0, {e_avail}]"
        )
    out = system.copy()
    out.type_ids[i] = v_out
    out.type_ids[j] = v_out_other
    out.kinetic_energies[i] = u
    out.kinetic_energies[j] = e_avail - u
    return out


def apply_unary(system: ParticleSystem, i: int, target: int, types: TypeTable) -> ParticleSystem:
    """Change the type of particle i, moving the internal-energy gap into kinetic energy."""
    m = system.size
    if not (0 <= i < m):
        raise ValidationError(f"particle index {i} outside 0..{m - 1}")
    source = int(system.type_ids[i])
    types.check_ids(np.array([source, target]))
    t = float(system.kinetic_energies[i])
    gap = float(types.internal_energies[source - 1] - types.internal_energies[target - 1])
    t_new = t + gap
    if t_new < 0.0:
        raise InfeasibleReactionError(
            f"type change {source}->{target} needs kinetic energy >= {-gap}, particle has {t}"
        )
    out = system.copy()
    out.type_ids[i] = target
    out.kinetic_energies[i] = t_new
    return out


def renormalize_total_energy(
    system: ParticleSystem, types: TypeTable, target_total: float
) -> ParticleSystem:
    """Rescale kinetic energies so the system total matches a reference value.

    Optional drift-repair pass for very long runs; the event rules already
    conserve energy up to float rounding, so this is off by default everywhere.
    """
    internal = float(np.sum(types.internal_energies[system.type_ids - 1]))
    kinetic = float(np.sum(system.kinetic_energies))
    if target_total < internal:
        raise ValidationError(
            f"target total {target_total} below internal energy floor {internal}"
        )
    if kinetic == 0.0:
        if target_total != internal:
            raise ValidationError("cannot rescale a zero-kinetic-energy state")
        return system.copy()
    out = system.copy()
    out.kinetic_energies *= (target_total - internal) / kinetic
    return out
