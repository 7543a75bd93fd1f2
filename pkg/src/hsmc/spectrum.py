"""Subsystem spectra, the composite index space, and total-energy shells.

A :class:`Spectrum` lists one subsystem's energy levels with explicit
degeneracies.  Composing a gas spectrum with a container spectrum enumerates
the joint degeneracy subspaces (A, B) in lexicographic order; that order fixes
the flattened amplitude layout used by every other module: the amplitudes of
subspace (A, B) occupy one contiguous block of length N_AB = N_A * N_B,
ordered row-major in the local indices (a, b).  Subspaces whose total energies
E_A + E_B agree within an absolute tolerance are grouped into shells.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DEFAULT_SHELL_TOLERANCE",
    "Spectrum",
    "Subspace",
    "Shell",
    "CompositeSpectrum",
    "build_spectrum",
    "compose",
]

DEFAULT_SHELL_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Spectrum:
    """Energy levels of one subsystem: strictly increasing energies, degeneracies >= 1."""

    energies: tuple[float, ...]
    degeneracies: tuple[int, ...]
    label: str = ""

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    @property
    def dim(self) -> int:
        return int(sum(self.degeneracies))

    def level_offsets(self) -> np.ndarray:
        """Start index of each level in the flat (A, a) ordering, plus the total dim."""
        return np.concatenate(([0], np.cumsum(self.degeneracies)))


def build_spectrum(levels, label: str = "") -> Spectrum:
    """Validate and sort a list of (energy, degeneracy) pairs into a Spectrum.

    Parameters
    ----------
    levels : sequence of (float, int)
        Energy levels with their degeneracies, in any order.
    label : str
        Free-form tag, e.g. ``"gas"`` or ``"container"``.

    Raises
    ------
    ValueError
        On an empty list, a duplicate energy, or a degeneracy < 1.
    """
    levels = list(levels)
    if not levels:
        raise ValueError("spectrum needs at least one level")
    energies = []
    degens = []
    for entry in levels:
        try:
            energy, degeneracy = entry
        except (TypeError, ValueError):
            raise ValueError(f"level {entry!r} is not an (energy, degeneracy) pair") from None
        energy = float(energy)
        if not np.isfinite(energy):
            raise ValueError(f"level energy {energy!r} is not finite")
        if isinstance(degeneracy, float) and degeneracy != int(degeneracy):
            raise ValueError(f"degeneracy {degeneracy!r} is not an integer")
        degeneracy = int(degeneracy)
        if degeneracy < 1:
            raise ValueError(f"degeneracy {degeneracy} must be >= 1")
        energies.append(energy)
        degens.append(degeneracy)
    order = np.argsort(energies, kind="stable")
    energies = [energies[i] for i in order]
    degens = [degens[i] for i in order]
    for e_prev, e_next in zip(energies, energies[1:]):
        if e_prev == e_next:
            raise ValueError(f"duplicate level energy {e_prev}; merge the degeneracies instead")
    return Spectrum(energies=tuple(energies), degeneracies=tuple(degens), label=label)


@dataclass(frozen=True)
class Subspace:
    """Joint degeneracy subspace (A, B) with N_AB = N_A * N_B states at E_A + E_B."""

    A: int
    B: int
    n_states: int
    energy: float
    offset: int


@dataclass(frozen=True)
class Shell:
    """Group of subspaces sharing (within tolerance) one total energy."""

    energy: float
    members: tuple[tuple[int, int], ...]
    member_indices: tuple[int, ...]
    n_states: int


@dataclass(frozen=True, eq=False)
class CompositeSpectrum:
    """Joint index space of a gas and a container spectrum.

    Immutable after construction; safe to share across workers.  Instances are
    built by :func:`compose`, which also precomputes the index maps between the
    flat block layout and the (gas row, container column) matrix layout.
    """

    gas: Spectrum
    container: Spectrum
    shell_tolerance: float
    subspaces: tuple[Subspace, ...]
    shells: tuple[Shell, ...]
    dim_gas: int
    dim_container: int
    dim: int
    _subspace_index: dict = field(repr=False)
    _shell_of_subspace: np.ndarray = field(repr=False)
    _block_offsets: np.ndarray = field(repr=False)
    _rows: np.ndarray = field(repr=False)
    _cols: np.ndarray = field(repr=False)
    _gas_offsets: np.ndarray = field(repr=False)
    _container_offsets: np.ndarray = field(repr=False)
    _shell_indices: tuple = field(repr=False)

    @property
    def n_subspaces(self) -> int:
        return len(self.subspaces)

    @property
    def n_shells(self) -> int:
        return len(self.shells)

    def subspace_index(self, A: int, B: int) -> int:
        """Position of subspace (A, B) in the lexicographic enumeration."""
        try:
            return self._subspace_index[(A, B)]
        except KeyError:
            raise KeyError(f"no subspace ({A}, {B}) in this composite") from None

    def block_slice(self, index: int) -> slice:
        """Flat-layout slice holding the amplitudes of subspace ``index``."""
        return slice(int(self._block_offsets[index]), int(self._block_offsets[index + 1]))

    def shell_flat_indices(self, shell_index: int) -> np.ndarray:
        """Flat amplitude indices of all states in shell ``shell_index`` (read-only)."""
        return self._shell_indices[shell_index]

    def shell_index_at(self, energy: float) -> int:
        """Shell whose representative energy matches ``energy`` within tolerance."""
        energies = np.array([s.energy for s in self.shells])
        i = int(np.argmin(np.abs(energies - energy)))
        atol = max(self.shell_tolerance, 1e-12) * (1.0 + abs(energy))
        if abs(energies[i] - energy) > atol:
            raise KeyError(f"no shell at energy {energy!r} (nearest is {energies[i]!r})")
        return i

    def shell_energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.shells])

    def subspace_dims(self) -> np.ndarray:
        return np.array([s.n_states for s in self.subspaces])

    def shell_dims(self) -> np.ndarray:
        return np.array([s.n_states for s in self.shells])


def compose(gas: Spectrum, container: Spectrum,
            shell_tolerance: float = DEFAULT_SHELL_TOLERANCE) -> CompositeSpectrum:
    """Enumerate joint subspaces of two spectra and group them into energy shells.

    Subspaces are ordered lexicographically in (A, B).  Shells are formed by
    sorting the total energies E_A + E_B and starting a new shell whenever the
    gap to the previous member exceeds ``shell_tolerance``; each shell's
    representative energy is the mean over its members.

    Raises
    ------
    ValueError
        If ``shell_tolerance`` is negative.
    """
    if shell_tolerance < 0:
        raise ValueError("shell_tolerance must be >= 0")

    gas_offsets = gas.level_offsets()
    container_offsets = container.level_offsets()

    subspaces = []
    offset = 0
    for A, (e_a, n_a) in enumerate(zip(gas.energies, gas.degeneracies)):
        for B, (e_b, n_b) in enumerate(zip(container.energies, container.degeneracies)):
            n_ab = n_a * n_b
            subspaces.append(Subspace(A=A, B=B, n_states=n_ab, energy=e_a + e_b, offset=offset))
            offset += n_ab
    dim = offset

    # Shells: single-linkage grouping of sorted total energies.
    order = sorted(range(len(subspaces)), key=lambda i: (subspaces[i].energy, i))
    groups: list[list[int]] = []
    last_energy = None
    for i in order:
        e = subspaces[i].energy
        if last_energy is None or e - last_energy > shell_tolerance:
            groups.append([i])
        else:
            groups[-1].append(i)
        last_energy = e

    shells = []
    shell_of_subspace = np.empty(len(subspaces), dtype=np.intp)
    for shell_idx, group in enumerate(groups):
        group = sorted(group, key=lambda i: (subspaces[i].A, subspaces[i].B))
        members = tuple((subspaces[i].A, subspaces[i].B) for i in group)
        energy = float(np.mean([subspaces[i].energy for i in group]))
        n_states = int(sum(subspaces[i].n_states for i in group))
        shells.append(Shell(energy=energy, members=members,
                            member_indices=tuple(group), n_states=n_states))
        for i in group:
            shell_of_subspace[i] = shell_idx

    # Flat block layout -> (row, col) of the dim_gas x dim_container matrix.
    rows = np.empty(dim, dtype=np.intp)
    cols = np.empty(dim, dtype=np.intp)
    for sub in subspaces:
        n_a = gas.degeneracies[sub.A]
        n_b = container.degeneracies[sub.B]
        block = slice(sub.offset, sub.offset + sub.n_states)
        rows[block] = np.repeat(np.arange(n_a) + gas_offsets[sub.A], n_b)
        cols[block] = np.tile(np.arange(n_b) + container_offsets[sub.B], n_a)

    block_offsets = np.concatenate(([0], np.cumsum([s.n_states for s in subspaces])))

    shell_indices = []
    for shell in shells:
        idx = np.concatenate([
            np.arange(subspaces[i].offset, subspaces[i].offset + subspaces[i].n_states)
            for i in shell.member_indices
        ])
        idx.flags.writeable = False
        shell_indices.append(idx)

    for arr in (rows, cols, block_offsets, shell_of_subspace, gas_offsets, container_offsets):
        arr.flags.writeable = False

    return CompositeSpectrum(
        gas=gas,
        container=container,
        shell_tolerance=float(shell_tolerance),
        subspaces=tuple(subspaces),
        shells=tuple(shells),
        dim_gas=gas.dim,
        dim_container=container.dim,
        dim=dim,
        _subspace_index={(s.A, s.B): i for i, s in enumerate(subspaces)},
        _shell_of_subspace=shell_of_subspace,
        _block_offsets=block_offsets,
        _rows=rows,
        _cols=cols,
        _gas_offsets=gas_offsets,
        _container_offsets=container_offsets,
        _shell_indices=tuple(shell_indices),
    )
