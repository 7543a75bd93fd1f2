"""Closed-form predictions for constrained bipartite pure states.

Covers the minimum local purity and maximum local entropy compatible with
fixed level weights, the exact Hilbert-space average of the gas purity for
product constraints, the weight distribution that dominates a canonically
constrained region together with its size geometry, a Boltzmann temperature
fit for the gas marginal, and the moments of single cartesian coordinates
over uniform hyperspheres that underpin all of the above.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .sampling import McEstimate, substream
from .spectrum import CompositeSpectrum, Spectrum
from .state import DensityMatrix, PROFILE_SUM_TOLERANCE

__all__ = [
    "MomentQuery",
    "DominantDistribution",
    "min_purity_state",
    "max_entropy_micro",
    "expected_purity_exact",
    "expected_purity_approx",
    "lubkin_average",
    "hypersphere_moment",
    "hypersphere_moment_mc",
    "region_log_size",
    "dominant_distribution",
    "region_size_ratio",
    "marginal_gas_distribution",
    "fit_temperature",
]


def _checked_weights(weights, n: int, what: str) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"{what}: expected {n} weights, got shape {w.shape}")
    if np.any(w < 0):
        raise ValueError(f"{what}: weights must be nonnegative")
    total = float(w.sum())
    if abs(total - 1.0) > PROFILE_SUM_TOLERANCE:
        raise ValueError(f"{what}: weights sum to {total!r}, expected 1")
    return w


def min_purity_state(gas: Spectrum, gas_weights) -> tuple[DensityMatrix, float]:
    """Lowest-purity gas state compatible with fixed level weights {W_A}.

    The minimizer spreads each level's weight evenly over its degenerate
    states: rho = diag(W_A / N_A), with purity sum_A W_A^2 / N_A.
    """
    w = _checked_weights(gas_weights, gas.n_levels, "gas weights")
    n = np.asarray(gas.degeneracies, dtype=float)
    diag = np.repeat(w / n, gas.degeneracies)
    rho = DensityMatrix(np.diag(diag.astype(complex)))
    return rho, float(np.sum(w * w / n))


def max_entropy_micro(weights, degeneracies) -> float:
    """Largest gas entropy compatible with fixed level weights.

    Equals -sum_A W_A ln(W_A / N_A), the entropy of the minimum-purity state;
    zero-weight levels contribute nothing.
    """
    w = np.asarray(weights, dtype=float)
    n = np.asarray(degeneracies, dtype=float)
    if w.shape != n.shape:
        raise ValueError("weights and degeneracies must have matching lengths")
    mask = w > 0
    return float(-np.sum(w[mask] * np.log(w[mask] / n[mask])))


def expected_purity_exact(composite: CompositeSpectrum, gas_weights,
                          container_weights) -> float:
    """Exact average gas purity over the product-constrained accessible region.

    The average of Tr rho_g^2 over states with every subspace weight fixed to
    W_AB = W_A * W_B, uniform on the product of amplitude spheres:

        sum_A W_A^2/N_A (1 - sum_B W_B^2)
      + sum_B W_B^2/N_B (1 - sum_A W_A^2)
      + sum_AB W_A^2 W_B^2 (N_A + N_B) / (N_A N_B + 1)
    """
    w_a = _checked_weights(gas_weights, composite.gas.n_levels, "gas weights")
    w_b = _checked_weights(container_weights, composite.container.n_levels,
                           "container weights")
    n_a = np.asarray(composite.gas.degeneracies, dtype=float)
    n_b = np.asarray(composite.container.degeneracies, dtype=float)

    term_gas = np.sum(w_a ** 2 / n_a) * (1.0 - np.sum(w_b ** 2))
    term_container = np.sum(w_b ** 2 / n_b) * (1.0 - np.sum(w_a ** 2))
    cross = np.sum(
        np.outer(w_a ** 2, w_b ** 2) * (n_a[:, None] + n_b[None, :])
        / (np.outer(n_a, n_b) + 1.0)
    )
    return float(term_gas + term_container + cross)


def expected_purity_approx(gas_weights, gas_degeneracies, container_weights,
                           container_degeneracies) -> float:
    """Large-degeneracy limit of the average gas purity.

    sum_A W_A^2/N_A + sum_B W_B^2/N_B; valid when every N_A*N_B >> 1.  The
    first term is the minimum purity, so a small second term means almost the
    whole region sits near minimum purity.
    """
    w_a = np.asarray(gas_weights, dtype=float)
    n_a = np.asarray(gas_degeneracies, dtype=float)
    w_b = np.asarray(container_weights, dtype=float)
    n_b = np.asarray(container_degeneracies, dtype=float)
    return float(np.sum(w_a ** 2 / n_a) + np.sum(w_b ** 2 / n_b))


def lubkin_average(n_gas: int, n_container: int) -> float:
    """Average gas purity over fully unconstrained states: (Ng+Nc)/(Ng*Nc+1)."""
    if n_gas < 1 or n_container < 1:
        raise ValueError("dimensions must be >= 1")
    return (n_gas + n_container) / (n_gas * n_container + 1)


@dataclass(frozen=True)
class MomentQuery:
    """Mixed moment of two cartesian coordinates over a uniform hypersphere.

    R is the sphere radius and d the number of real cartesian coordinates (a
    complex block of N amplitudes lives on a sphere with d = 2N).  u_l and u_m
    are the exponents of two distinct coordinates; the moment is the surface
    average of x_1^{u_l} x_2^{u_m}.
    """

    R: float
    d: int
    u_l: int
    u_m: int

    def __post_init__(self):
        if not self.R >= 0:
            raise ValueError(f"radius {self.R!r} must be >= 0")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension {self.d!r} must be a positive integer")
        for u in (self.u_l, self.u_m):
            if int(u) != u or u < 0:
                raise ValueError(f"exponent {u!r} must be a nonnegative integer")


_IMPLEMENTED_PAIRS = {(0, 0), (0, 1), (1, 1), (0, 2), (2, 2), (0, 4)}


def hypersphere_moment(query: MomentQuery) -> float:
    """Closed form of the sphere-surface moment for the implemented exponent pairs.

    Symmetric under exchange of u_l and u_m.  Odd exponents average to zero;
    (0,2) gives R^2/d; (2,2) gives R^4 G(d/2) / (4 G(d/2+2)) and (0,4) three
    times that, where G is the gamma function.
    """
    pair = tuple(sorted((int(query.u_l), int(query.u_m))))
    if pair not in _IMPLEMENTED_PAIRS:
        raise ValueError(
            f"unsupported exponent pair {pair}; implemented: "
            f"{sorted(_IMPLEMENTED_PAIRS)}"
        )
    if pair[0] > 0 and query.d < 2:
        raise ValueError("moments of two distinct coordinates need d >= 2")
    if pair == (0, 0):
        return 1.0
    if pair in ((0, 1), (1, 1)):
        return 0.0
    if pair == (0, 2):
        return float(query.R ** 2 / query.d)
    # G(x)/G(x+2) = 1/(x(x+1)) exactly, so the quartic moments reduce to
    # R^4 / (d(d+2)) without evaluating gamma functions at large d.
    base = float(query.R ** 4 / (query.d * (query.d + 2)))
    if pair == (2, 2):
        return base
    return 3.0 * base  # (0, 4)


def hypersphere_moment_mc(query: MomentQuery, n: int, seed: int,
                          chunk: int = 1 << 17) -> McEstimate:
    """Monte Carlo check of a sphere moment from uniform surface draws.

    Uses normalized standard normals (exactly uniform on the sphere) in chunks
    from a single keyed stream; the result is deterministic for a given seed
    and independent of the chunk size.
    """
    if n < 2:
        raise ValueError("need n >= 2 draws")
    hypersphere_moment(query)  # validate the pair up front
    rng = substream(seed, 0)
    count = 0
    mean = 0.0
    m2 = 0.0
    remaining = n
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        x = rng.standard_normal((m, query.d))
        norms = np.linalg.norm(x, axis=1)
        bad = norms == 0.0
        while np.any(bad):
            x[bad] = rng.standard_normal((int(bad.sum()), query.d))
            norms[bad] = np.linalg.norm(x[bad], axis=1)
            bad = norms == 0.0
        x *= query.R / norms[:, None]
        values = np.ones(m)
        if query.u_l > 0 and query.u_m > 0:
            values = x[:, 0] ** query.u_l * x[:, 1] ** query.u_m
        elif query.u_l > 0:
            values = x[:, 0] ** query.u_l
        elif query.u_m > 0:
            values = x[:, 0] ** query.u_m
        chunk_mean = float(values.mean())
        chunk_m2 = float(np.sum((values - chunk_mean) ** 2))
        delta = chunk_mean - mean
        total = count + m
        mean += delta * m / total
        m2 += chunk_m2 + delta * delta * count * m / total
        count = total
    std_error = math.sqrt(m2 / (count - 1) / count)
    return McEstimate(mean=mean, std_error=std_error, n_samples=count, seed=seed)


def region_log_size(composite: CompositeSpectrum, subspace_weights,
                    exact_exponent: bool = False) -> float:
    """Log size (up to weight-independent constants) of the region with fixed {W_AB}.

    The region is a product of spheres with surface measure proportional to
    W_AB^(N_AB - 1/2); dropping constants leaves sum_AB N_AB ln W_AB under the
    default large-degeneracy simplification N_AB - 1/2 -> N_AB.  Pass
    ``exact_exponent=True`` to keep the -1/2.  Returns -inf if any weight
    vanishes.
    """
    w = np.asarray(subspace_weights, dtype=float)
    if w.shape != (composite.n_subspaces,):
        raise ValueError(f"expected {composite.n_subspaces} subspace weights")
    if np.any(w < 0):
        raise ValueError("subspace weights must be nonnegative")
    total = float(w.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"subspace weights sum to {total!r}, expected 1")
    exponents = composite.subspace_dims().astype(float)
    if exact_exponent:
        exponents = exponents - 0.5
    if np.any(w == 0.0):
        return float("-inf")
    return float(np.sum(exponents * np.log(w)))


@dataclass(frozen=True)
class DominantDistribution:
    """Subspace weights maximizing region size at fixed shell weights.

    ``w_d`` maps (A, B) to the dominant weight N_AB * W_E / N_E; ``lambdas``
    maps each positive-weight shell energy to its multiplier N_E / W_E.
    Within a shell, w_d is proportional to the subspace dimension.
    """

    composite: CompositeSpectrum
    w_d: dict
    lambdas: dict

    def as_array(self) -> np.ndarray:
        """Dominant weights as a dense vector in subspace order."""
        return np.array([self.w_d[(s.A, s.B)] for s in self.composite.subspaces])


def _checked_shell_weights(composite: CompositeSpectrum, shell_weights) -> np.ndarray:
    w = np.asarray(shell_weights, dtype=float)
    if w.shape != (composite.n_shells,):
        raise ValueError(f"expected {composite.n_shells} shell weights, "
                         f"got shape {w.shape}")
    if np.any(w < 0):
        raise ValueError("shell weights must be nonnegative")
    total = float(w.sum())
    if abs(total - 1.0) > PROFILE_SUM_TOLERANCE:
        raise ValueError(f"shell weights sum to {total!r}, expected 1")
    return w


def dominant_distribution(composite: CompositeSpectrum,
                          shell_weights) -> DominantDistribution:
    """Weight assignment {W^d_AB} maximizing region size at fixed shell weights.

    Within each shell the region size is maximized by splitting the shell
    weight in proportion to subspace dimension: W^d_AB = N_AB * W_E / N_E.
    Shells with zero weight get zero subspace weights and no multiplier.
    """
    w_e = _checked_shell_weights(composite, shell_weights)
    w_d = {}
    lambdas = {}
    for shell, w in zip(composite.shells, w_e):
        if w > 0:
            lambdas[shell.energy] = float(shell.n_states / w)
        for i in shell.member_indices:
            sub = composite.subspaces[i]
            w_d[(sub.A, sub.B)] = float(sub.n_states * w / shell.n_states)
    return DominantDistribution(composite=composite, w_d=w_d, lambdas=lambdas)


def region_size_ratio(composite: CompositeSpectrum, shell_weights,
                      epsilon) -> tuple[float, float]:
    """Size of a perturbed region relative to the dominant one, two ways.

    ``epsilon`` perturbs the dominant weights subspace by subspace and must
    sum to zero within every shell (so the shell weights stay fixed) and keep
    all weights nonnegative.  Returns (gaussian, exact): the second-order
    Gaussian approximation prod exp(-N_E^2 eps^2 / (2 N_AB W_E^2)) and the
    exact ratio from the log-size difference.  They agree to third order in
    epsilon.
    """
    w_e = _checked_shell_weights(composite, shell_weights)
    eps = np.asarray(epsilon, dtype=float)
    if eps.shape != (composite.n_subspaces,):
        raise ValueError(f"expected {composite.n_subspaces} perturbation entries")

    dd = dominant_distribution(composite, w_e)
    w_d = dd.as_array()
    perturbed = w_d + eps
    if np.any(perturbed < 0):
        raise ValueError("perturbation drives a subspace weight negative")

    log_gaussian = 0.0
    log_exact = 0.0
    for shell, w in zip(composite.shells, w_e):
        members = list(shell.member_indices)
        shell_sum = float(eps[members].sum())
        scale = max(1.0, float(np.abs(eps[members]).sum()))
        if abs(shell_sum) > 1e-12 * scale:
            raise ValueError(
                f"perturbation sums to {shell_sum!r} in the shell at "
                f"E={shell.energy}; shell weights must stay fixed"
            )
        if w == 0.0:
            if np.any(eps[members] != 0.0):
                raise ValueError("cannot perturb a zero-weight shell")
            continue
        n_e = float(shell.n_states)
        for i in members:
            n_ab = float(composite.subspaces[i].n_states)
            log_gaussian -= n_e ** 2 * eps[i] ** 2 / (2.0 * n_ab * w ** 2)
            if perturbed[i] == 0.0:
                log_exact = float("-inf")
            elif log_exact != float("-inf"):
                log_exact += n_ab * (math.log(perturbed[i]) - math.log(w_d[i]))
    return math.exp(log_gaussian), math.exp(log_exact)


def marginal_gas_distribution(dd: DominantDistribution) -> np.ndarray:
    """Gas-level weights of the dominant distribution: W^d_A = sum_B W^d_AB."""
    out = np.zeros(dd.composite.gas.n_levels)
    for (A, _B), w in dd.w_d.items():
        out[A] += w
    return out


def fit_temperature(gas: Spectrum, marginal) -> tuple[float, float]:
    """Boltzmann temperature of a gas-level weight distribution.

    Least-squares fit of ln(W_A / N_A) = -E_A/kT + const over the levels with
    nonzero weight.  Returns (kT, residual norm); |kT| diverges as the
    per-state distribution flattens and comes out negative for an inverted
    one.  The residual tells how exponential the input actually is.
    """
    w = np.asarray(marginal, dtype=float)
    if w.shape != (gas.n_levels,):
        raise ValueError(f"expected {gas.n_levels} marginal weights")
    if np.any(w < 0):
        raise ValueError("marginal weights must be nonnegative")
    usable = np.flatnonzero(w > 0)
    if len(usable) < 2:
        raise ValueError("need at least 2 levels with nonzero weight to fit kT")
    energies = np.asarray(gas.energies, dtype=float)[usable]
    degens = np.asarray(gas.degeneracies, dtype=float)[usable]
    y = np.log(w[usable] / degens)
    design = np.column_stack([-energies, np.ones_like(energies)])
    beta, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    inverse_kt = float(beta[0])
    kt = math.inf if inverse_kt == 0.0 else 1.0 / inverse_kt
    residual = float(np.linalg.norm(y - design @ beta))
    return kt, residual
