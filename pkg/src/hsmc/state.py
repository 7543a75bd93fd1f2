"""Pure states on the composite space, reduced density matrices, weight profiles.

Amplitudes live in the flat block layout fixed by :class:`~hsmc.spectrum.CompositeSpectrum`.
Reduction to the gas always goes through the dim_gas x dim_container amplitude
matrix: rho_g = Psi Psi^dagger, so Tr rho_g = |psi|^2 = 1 for a normalized state.

Conventions: k_B = 1 and entropies use the natural logarithm, with 0 ln 0 = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectrum import CompositeSpectrum, Spectrum

__all__ = [
    "NORMALIZATION_TOLERANCE",
    "PROFILE_SUM_TOLERANCE",
    "WeightProfile",
    "uniform_profile",
    "subspace_weights",
    "shell_weights",
    "PureState",
    "DensityMatrix",
    "purity_from_amplitudes",
    "product_state",
    "write_amplitudes_csv",
    "read_amplitudes_csv",
]

NORMALIZATION_TOLERANCE = 1e-10
PROFILE_SUM_TOLERANCE = 1e-12

# Hermiticity / unit-trace checks on density matrices.
DENSITY_TOLERANCE = 1e-10
# Eigenvalues are clipped to zero if slightly negative; below this they are an error.
EIGENVALUE_FLOOR = -1e-8


@dataclass(frozen=True)
class WeightProfile:
    """Probability weight per level of one spectrum (the constraint data W_A).

    Weights must be nonnegative and sum to 1 within ``PROFILE_SUM_TOLERANCE``.
    """

    spectrum: Spectrum
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.weights) != self.spectrum.n_levels:
            raise ValueError(
                f"profile has {len(self.weights)} weights for "
                f"{self.spectrum.n_levels} levels"
            )
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("profile weights must be nonnegative")
        total = float(w.sum())
        if abs(total - 1.0) > PROFILE_SUM_TOLERANCE:
            raise ValueError(f"profile weights sum to {total!r}, expected 1")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)


def uniform_profile(spectrum: Spectrum) -> WeightProfile:
    """Equal weight 1/n_levels on every level of ``spectrum``."""
    n = spectrum.n_levels
    return WeightProfile(spectrum=spectrum, weights=tuple(1.0 / n for _ in range(n)))


def subspace_weights(composite: CompositeSpectrum, gas_profile: WeightProfile,
                     container_profile: WeightProfile) -> np.ndarray:
    """Product-state constraint weights W_AB = W_A * W_B, in subspace order."""
    if gas_profile.spectrum is not composite.gas and gas_profile.spectrum != composite.gas:
        raise ValueError("gas profile does not match the composite's gas spectrum")
    if (container_profile.spectrum is not composite.container
            and container_profile.spectrum != composite.container):
        raise ValueError("container profile does not match the composite's container spectrum")
    w_a = gas_profile.as_array()
    w_b = container_profile.as_array()
    return np.array([w_a[s.A] * w_b[s.B] for s in composite.subspaces])


def shell_weights(composite: CompositeSpectrum, gas_profile: WeightProfile,
                  container_profile: WeightProfile) -> np.ndarray:
    """Total weight per energy shell implied by a product profile."""
    w_sub = subspace_weights(composite, gas_profile, container_profile)
    out = np.zeros(composite.n_shells)
    np.add.at(out, composite._shell_of_subspace, w_sub)
    return out


class PureState:
    """Normalized pure state in the flat block layout of a composite spectrum."""

    def __init__(self, composite: CompositeSpectrum, amplitudes: np.ndarray,
                 check: bool = True):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.shape != (composite.dim,):
            raise ValueError(
                f"amplitude vector has shape {amplitudes.shape}, expected ({composite.dim},)"
            )
        if check:
            norm_sq = float(np.vdot(amplitudes, amplitudes).real)
            if abs(norm_sq - 1.0) > NORMALIZATION_TOLERANCE:
                raise ValueError(f"state norm^2 = {norm_sq!r} deviates from 1")
        self.composite = composite
        self.amplitudes = amplitudes

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def to_matrix(self) -> np.ndarray:
        """Amplitudes as the dim_gas x dim_container matrix Psi with rho_g = Psi Psi^dagger."""
        c = self.composite
        psi = np.zeros((c.dim_gas, c.dim_container), dtype=complex)
        psi[c._rows, c._cols] = self.amplitudes
        return psi

    @classmethod
    def from_matrix(cls, composite: CompositeSpectrum, psi: np.ndarray,
                    check: bool = True) -> "PureState":
        psi = np.asarray(psi, dtype=complex)
        expected = (composite.dim_gas, composite.dim_container)
        if psi.shape != expected:
            raise ValueError(f"matrix has shape {psi.shape}, expected {expected}")
        return cls(composite, psi[composite._rows, composite._cols], check=check)

    def subspace_weights(self) -> np.ndarray:
        """Probability mass |psi|^2 in each (A, B) subspace, in subspace order."""
        mass = np.abs(self.amplitudes) ** 2
        out = np.empty(self.composite.n_subspaces)
        offsets = self.composite._block_offsets
        for i in range(self.composite.n_subspaces):
            out[i] = mass[offsets[i]:offsets[i + 1]].sum()
        return out

    def shell_weights(self) -> np.ndarray:
        """Probability mass in each total-energy shell."""
        w_sub = self.subspace_weights()
        out = np.zeros(self.composite.n_shells)
        np.add.at(out, self.composite._shell_of_subspace, w_sub)
        return out

    def gas_level_weights(self) -> np.ndarray:
        """Probability mass in each gas level A (marginal over the container)."""
        w_sub = self.subspace_weights()
        out = np.zeros(self.composite.gas.n_levels)
        for w, sub in zip(w_sub, self.composite.subspaces):
            out[sub.A] += w
        return out

    def reduce_gas(self) -> "DensityMatrix":
        """Partial trace over the container: rho_g = Psi Psi^dagger."""
        psi = self.to_matrix()
        return DensityMatrix(psi @ psi.conj().T)

    def reduce_container(self) -> "DensityMatrix":
        """Partial trace over the gas: rho_c = Psi^T Psi^*."""
        psi = self.to_matrix()
        return DensityMatrix(psi.T @ psi.conj())

    def purity(self) -> float:
        """Local purity of the gas, Tr (rho_g)^2."""
        psi = self.to_matrix()
        rho = psi @ psi.conj().T
        return float(np.einsum("ij,ji->", rho, rho).real)

    def entropy(self) -> float:
        """Local von Neumann entropy of the gas (natural log)."""
        return self.reduce_gas().entropy()


class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix with spectral helpers."""

    def __init__(self, matrix: np.ndarray, check: bool = True):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {matrix.shape}")
        if check:
            herm_defect = float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
            if herm_defect > DENSITY_TOLERANCE:
                raise ValueError(f"matrix is not Hermitian (max defect {herm_defect!r})")
            trace = float(np.trace(matrix).real)
            if abs(trace - 1.0) > DENSITY_TOLERANCE:
                raise ValueError(f"trace = {trace!r} deviates from 1")
        self.matrix = matrix
        self._eigenvalues: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Ascending real eigenvalues; tiny negatives (>= -1e-8) are clipped to 0."""
        if self._eigenvalues is None:
            w = np.linalg.eigvalsh(self.matrix)
            if w.size and float(w[0]) < EIGENVALUE_FLOOR:
                raise ValueError(f"eigenvalue {float(w[0])!r} is too negative for a state")
            self._eigenvalues = np.clip(w, 0.0, None)
        return self._eigenvalues

    def purity(self) -> float:
        """Tr rho^2, computed directly from the matrix (no diagonalization)."""
        return float(np.einsum("ij,ji->", self.matrix, self.matrix).real)

    def entropy(self) -> float:
        """Von Neumann entropy -sum w ln w in natural units, with 0 ln 0 = 0."""
        w = self.eigenvalues()
        w = w[w > 0.0]
        return float(-np.sum(w * np.log(w)))


def product_state(composite: CompositeSpectrum, gas_profile: WeightProfile,
                  container_profile: WeightProfile) -> PureState:
    """Real product state |u> x |v> whose level weights match the two profiles.

    Each level's amplitude mass is spread evenly over its degenerate states:
    u_{A,a} = sqrt(W_A / N_A) and likewise for the container, so the subspace
    weights come out exactly W_A * W_B.
    """
    u = np.repeat(
        np.sqrt(gas_profile.as_array() / np.asarray(composite.gas.degeneracies)),
        composite.gas.degeneracies,
    )
    v = np.repeat(
        np.sqrt(container_profile.as_array() / np.asarray(composite.container.degeneracies)),
        composite.container.degeneracies,
    )
    return PureState.from_matrix(composite, np.outer(u, v))


def write_amplitudes_csv(state: PureState, path) -> None:
    """Dump a state's amplitudes as CSV with the composite layout in the header.

    Rows are (flat index, real part, imaginary part) in the block layout;
    header comment lines record both level lists so a reader can verify it is
    loading the state onto the right composite.
    """
    c = state.composite
    gas_levels = list(zip(c.gas.energies, c.gas.degeneracies))
    container_levels = list(zip(c.container.energies, c.container.degeneracies))
    lines = [
        "# hsmc state v1",
        f"# gas_levels={gas_levels!r}",
        f"# container_levels={container_levels!r}",
        f"# shell_tolerance={c.shell_tolerance!r}",
        "index,re,im",
    ]
    for i, a in enumerate(state.amplitudes):
        lines.append(f"{i},{float(a.real)!r},{float(a.imag)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_amplitudes_csv(path, composite: CompositeSpectrum) -> PureState:
    """Load a state written by :func:`write_amplitudes_csv` onto ``composite``.

    Refuses to load if the recorded layout does not match the composite.
    """
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    header = {}
    data_lines = []
    for line in lines:
        if line.startswith("# ") and "=" in line:
            key, _, value = line[2:].partition("=")
            header[key] = value
        elif line and not line.startswith("#") and not line.startswith("index"):
            data_lines.append(line)
    expected_gas = repr(list(zip(composite.gas.energies, composite.gas.degeneracies)))
    expected_container = repr(
        list(zip(composite.container.energies, composite.container.degeneracies)))
    if header.get("gas_levels") != expected_gas:
        raise ValueError("state file was written for a different gas spectrum")
    if header.get("container_levels") != expected_container:
        raise ValueError("state file was written for a different container spectrum")
    amplitudes = np.zeros(composite.dim, dtype=complex)
    for line in data_lines:
        idx, re, im = line.split(",")
        amplitudes[int(idx)] = float(re) + 1j * float(im)
    return PureState(composite, amplitudes)


def purity_from_amplitudes(psi: np.ndarray) -> float:
    """Tr (rho_g)^2 straight from the amplitude matrix, without forming rho_g.

    Deliberately a one-line contraction of the defining sum
    sum_{a b c d} psi_ab psi*_cb psi_cd psi*_ad, kept independent of
    :meth:`DensityMatrix.purity` so the two can cross-check each other.
    """
    psi = np.asarray(psi, dtype=complex)
    value = np.einsum("ab,cb,cd,ad->", psi, psi.conj(), psi, psi.conj(), optimize=False)
    return float(value.real)
