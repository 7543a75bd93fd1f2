"""Constraint-respecting Hamiltonians and exact Schrodinger propagation.

The total Hamiltonian is H = H_g + H_c + I with diagonal local parts.  A
microcanonical interaction is block-diagonal inside every degeneracy subspace
(A, B), so it commutes with both local Hamiltonians and conserves every
subspace weight.  A canonical interaction couples all subspaces within a
total-energy shell, conserving only the shell weights while letting energy
flow between gas and container.

Propagation uses the full eigendecomposition of H (hbar = 1), so unitarity is
exact up to roundoff and there is no step-error accumulation.  Trajectories
carry named measure series; time averages integrate over t, path averages
weight by the chord lengths the state vector travels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectrum import CompositeSpectrum
from .state import PureState

__all__ = [
    "NumericalValidationError",
    "Hamiltonian",
    "Trajectory",
    "build_microcanonical_hamiltonian",
    "build_canonical_hamiltonian",
    "evolve",
    "effective_velocity",
    "time_average",
    "path_average",
    "max_drift",
]

NORM_DRIFT_TOLERANCE = 1e-9


class NumericalValidationError(RuntimeError):
    """A quantity that must be conserved or normalized drifted out of tolerance."""


@dataclass(frozen=True)
class Hamiltonian:
    """Total Hamiltonian H = H_g + H_c + I over the composite basis.

    ``gas_diagonal`` and ``container_diagonal`` hold the (diagonal) local
    parts as vectors over the flat basis; ``interaction`` is the full coupling
    matrix and ``matrix`` the assembled sum.  ``kind`` records which
    constraint the interaction respects.
    """

    composite: CompositeSpectrum
    kind: str
    coupling: float
    gas_diagonal: np.ndarray = field(repr=False)
    container_diagonal: np.ndarray = field(repr=False)
    interaction: np.ndarray = field(repr=False)
    matrix: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.composite.dim

    def commutator_norms(self) -> dict[str, float]:
        """Frobenius norms of [H_g, I], [H_c, I] and [H_g + H_c, I].

        For a diagonal D, [D, M] has entries (d_j - d_k) M_jk, so the norms
        are computed without forming matrix products.
        """
        out = {}
        for name, diag in (
            ("gas", self.gas_diagonal),
            ("container", self.container_diagonal),
            ("total", self.gas_diagonal + self.container_diagonal),
        ):
            gaps = diag[:, None] - diag[None, :]
            out[name] = float(np.linalg.norm(gaps * self.interaction))
        return out

    def weak_coupling_ratio(self, state: PureState) -> float:
        """|<I>| / min(|<H_g>|, |<H_c>|) for ``state``; inf if a local part averages to 0.

        Diagnostic only: the weak-coupling picture needs this to be small, but
        nothing is enforced.
        """
        psi = state.amplitudes
        mass = np.abs(psi) ** 2
        e_gas = abs(float(np.dot(mass, self.gas_diagonal)))
        e_container = abs(float(np.dot(mass, self.container_diagonal)))
        e_int = abs(float(np.vdot(psi, self.interaction @ psi).real))
        denom = min(e_gas, e_container)
        if denom == 0.0:
            return float("inf")
        return e_int / denom


def _gue_block(rng: np.random.Generator, n: int) -> np.ndarray:
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (x + x.conj().T) / 2.0


def _local_diagonals(composite: CompositeSpectrum) -> tuple[np.ndarray, np.ndarray]:
    gas_diag = np.empty(composite.dim)
    container_diag = np.empty(composite.dim)
    for i, sub in enumerate(composite.subspaces):
        block = composite.block_slice(i)
        gas_diag[block] = composite.gas.energies[sub.A]
        container_diag[block] = composite.container.energies[sub.B]
    return gas_diag, container_diag


def _assemble(composite: CompositeSpectrum, kind: str, coupling: float,
              blocks: list[tuple[np.ndarray, np.ndarray]]) -> Hamiltonian:
    """Scale the drawn blocks so the largest spectral radius equals ``coupling``."""
    gas_diag, container_diag = _local_diagonals(composite)
    interaction = np.zeros((composite.dim, composite.dim), dtype=complex)
    if coupling > 0 and blocks:
        radius = max(
            float(np.max(np.abs(np.linalg.eigvalsh(b)))) for _, b in blocks
        )
        if radius > 0:
            scale = coupling / radius
            for idx, block in blocks:
                interaction[np.ix_(idx, idx)] = scale * block
    matrix = np.diag((gas_diag + container_diag).astype(complex)) + interaction
    for arr in (gas_diag, container_diag, interaction, matrix):
        arr.flags.writeable = False
    return Hamiltonian(
        composite=composite,
        kind=kind,
        coupling=float(coupling),
        gas_diagonal=gas_diag,
        container_diagonal=container_diag,
        interaction=interaction,
        matrix=matrix,
    )


def build_microcanonical_hamiltonian(composite: CompositeSpectrum, coupling: float,
                                     rng: np.random.Generator) -> Hamiltonian:
    """H with an independent random Hermitian block inside every subspace (A, B).

    The blocks are Gaussian-unitary-ensemble draws, jointly rescaled so the
    largest block spectral radius equals ``coupling``.  Because each block
    lives inside one degeneracy subspace, [H_g, I] = [H_c, I] = 0 to machine
    precision and every subspace weight is a constant of motion.
    """
    if coupling < 0:
        raise ValueError("coupling must be >= 0")
    blocks = []
    if coupling > 0:
        for sub in composite.subspaces:
            idx = np.arange(sub.offset, sub.offset + sub.n_states)
            blocks.append((idx, _gue_block(rng, sub.n_states)))
    return _assemble(composite, "microcanonical", coupling, blocks)


def build_canonical_hamiltonian(composite: CompositeSpectrum, coupling: float,
                                rng: np.random.Generator) -> Hamiltonian:
    """H with one random Hermitian block per total-energy shell.

    Each block couples all subspaces inside its shell, so [H_g + H_c, I] = 0
    (shell weights conserved) while [H_g, I] != 0 in general: energy flows
    between gas and container.  For spectra where every shell has a single
    subspace this coincides with the microcanonical builder.
    """
    if coupling < 0:
        raise ValueError("coupling must be >= 0")
    blocks = []
    if coupling > 0:
        for j, shell in enumerate(composite.shells):
            idx = composite.shell_flat_indices(j)
            blocks.append((idx, _gue_block(rng, shell.n_states)))
    return _assemble(composite, "canonical", coupling, blocks)


@dataclass(frozen=True)
class Trajectory:
    """Time series of states under one Hamiltonian, with derived measures.

    ``measures`` maps names to arrays with time along the first axis:
    1-D series norm, energy, v_eff, purity, entropy; 2-D series
    subspace_weights, shell_weights, gas_level_weights.
    ``path_length`` is the total chord length the unit state vector travels.
    """

    times: np.ndarray
    states: tuple[PureState, ...]
    measures: dict[str, np.ndarray]
    path_length: float
    hamiltonian: Hamiltonian


def effective_velocity(state: PureState, hamiltonian: Hamiltonian) -> float:
    """Speed of the state vector in Hilbert space: sqrt(<psi|H^2|psi>), hbar = 1.

    Constant along any trajectory of H.  A constant energy offset shifts this
    value but no measure series.
    """
    return float(np.linalg.norm(hamiltonian.matrix @ state.amplitudes))


def evolve(initial: PureState, hamiltonian: Hamiltonian, times) -> Trajectory:
    """Propagate |psi(t)> = exp(-iHt)|psi(0)> on a strictly increasing time grid.

    Diagonalizes H once and rotates the initial state through the eigenbasis;
    t = 0 entries reproduce the initial amplitudes bit for bit.  Raises
    NumericalValidationError if any snapshot norm drifts beyond 1e-9.
    """
    if initial.composite is not hamiltonian.composite:
        raise ValueError("state and Hamiltonian live on different composites")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a nonempty 1-D grid")
    if not np.all(np.isfinite(times)):
        raise ValueError("times must be finite")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")

    energies, vectors = np.linalg.eigh(hamiltonian.matrix)
    coeffs = vectors.conj().T @ initial.amplitudes
    phases = np.exp(-1j * np.outer(times, energies))
    amplitudes = (phases * coeffs) @ vectors.T
    exact_zero = times == 0.0
    if np.any(exact_zero):
        amplitudes[exact_zero] = initial.amplitudes

    states = tuple(
        PureState(initial.composite, amplitudes[k], check=False)
        for k in range(len(times))
    )
    norms = np.linalg.norm(amplitudes, axis=1)
    worst = float(np.max(np.abs(norms - 1.0)))
    if worst > NORM_DRIFT_TOLERANCE:
        raise NumericalValidationError(
            f"propagation lost normalization by {worst:.3e}"
        )

    h_psi = amplitudes @ hamiltonian.matrix.T
    energy_series = np.einsum("ki,ki->k", amplitudes.conj(), h_psi).real
    v_eff_series = np.linalg.norm(h_psi, axis=1)

    purities = np.empty(len(times))
    entropies = np.empty(len(times))
    for k, state in enumerate(states):
        rho = state.reduce_gas()
        purities[k] = rho.purity()
        entropies[k] = rho.entropy()

    measures = {
        "norm": norms,
        "energy": energy_series,
        "v_eff": v_eff_series,
        "purity": purities,
        "entropy": entropies,
        "subspace_weights": np.array([s.subspace_weights() for s in states]),
        "shell_weights": np.array([s.shell_weights() for s in states]),
        "gas_level_weights": np.array([s.gas_level_weights() for s in states]),
    }
    chords = np.linalg.norm(np.diff(amplitudes, axis=0), axis=1)
    return Trajectory(
        times=times,
        states=states,
        measures=measures,
        path_length=float(chords.sum()),
        hamiltonian=hamiltonian,
    )


def _series(traj: Trajectory, measure_name: str) -> np.ndarray:
    try:
        return traj.measures[measure_name]
    except KeyError:
        raise KeyError(
            f"unknown measure {measure_name!r}; available: "
            f"{sorted(traj.measures)}"
        ) from None


def time_average(traj: Trajectory, measure_name: str):
    """Trapezoidal (1/T) integral of a measure over the trajectory window.

    Returns a scalar for 1-D series and a per-column vector for 2-D ones.
    """
    series = _series(traj, measure_name)
    if len(traj.times) < 2:
        raise ValueError("time_average needs at least 2 samples")
    window = traj.times[-1] - traj.times[0]
    value = np.trapezoid(series, traj.times, axis=0) / window
    return float(value) if np.ndim(value) == 0 else value


def path_average(traj: Trajectory, measure_name: str):
    """Chord-length-weighted average of a measure along the trajectory.

    Since the state moves at constant speed, this agrees with time_average up
    to discretization error.  A degenerate path (length ~ 0) returns the
    first sample's value.
    """
    series = _series(traj, measure_name)
    if len(traj.times) < 2:
        raise ValueError("path_average needs at least 2 samples")
    amps = np.array([s.amplitudes for s in traj.states])
    chords = np.linalg.norm(np.diff(amps, axis=0), axis=1)
    total = float(chords.sum())
    if total < 1e-13:
        value = series[0]
        return float(value) if np.ndim(value) == 0 else value
    segment_means = 0.5 * (series[:-1] + series[1:])
    weights = chords.reshape((-1,) + (1,) * (series.ndim - 1))
    value = np.sum(weights * segment_means, axis=0) / total
    return float(value) if np.ndim(value) == 0 else value


def max_drift(traj: Trajectory, measure_name: str) -> float:
    """Largest absolute deviation of a measure series from its initial value."""
    series = _series(traj, measure_name)
    return float(np.max(np.abs(series - series[0])))
