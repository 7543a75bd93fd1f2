import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsmc import build_spectrum, compose


def test_minimal_spectrum():
    sp = build_spectrum([(0, 1)])
    assert sp.dim == 1
    assert sp.n_levels == 1


def test_two_level_spectrum():
    sp = build_spectrum([(0, 2), (1, 2)], label="gas")
    assert sp.dim == 4
    assert sp.n_levels == 2
    assert sp.label == "gas"


def test_levels_sorted_by_energy():
    sp = build_spectrum([(3, 1), (0, 2), (1.5, 4)])
    assert sp.energies == (0.0, 1.5, 3.0)
    assert sp.degeneracies == (2, 4, 1)


def test_duplicate_energy_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        build_spectrum([(0, 1), (0, 3)])


def test_bad_degeneracy_rejected():
    with pytest.raises(ValueError):
        build_spectrum([(0, 0)])
    with pytest.raises(ValueError):
        build_spectrum([(0, -2)])
    with pytest.raises(ValueError):
        build_spectrum([(0, 1.5)])


def test_empty_spectrum_rejected():
    with pytest.raises(ValueError):
        build_spectrum([])


def test_nonfinite_energy_rejected():
    with pytest.raises(ValueError):
        build_spectrum([(float("nan"), 1)])


def test_compose_symmetric_two_level():
    gas = build_spectrum([(0, 2), (1, 2)])
    container = build_spectrum([(0, 4), (1, 4)])
    comp = compose(gas, container)
    assert [(s.A, s.B) for s in comp.subspaces] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert [s.n_states for s in comp.subspaces] == [8, 8, 8, 8]
    shells = {sh.energy: sh.n_states for sh in comp.shells}
    assert shells == {0.0: 8, 1.0: 16, 2.0: 8}


def test_compose_trivial():
    comp = compose(build_spectrum([(0, 1)]), build_spectrum([(0, 1)]))
    assert comp.dim == 1
    assert comp.n_subspaces == 1
    assert comp.n_shells == 1
    assert comp.shells[0].n_states == 1


def test_compose_three_shells():
    gas = build_spectrum([(0, 1), (1, 3)])
    container = build_spectrum([(0, 2), (1, 2)])
    comp = compose(gas, container)
    shells = {sh.energy: (sh.members, sh.n_states) for sh in comp.shells}
    assert shells[0.0] == (((0, 0),), 2)
    assert shells[1.0] == (((0, 1), (1, 0)), 8)
    assert shells[2.0] == (((1, 1),), 6)


def test_subspace_ordering_is_lexicographic():
    gas = build_spectrum([(0, 1), (2, 2), (5, 1)])
    container = build_spectrum([(0, 3), (1, 1)])
    comp = compose(gas, container)
    pairs = [(s.A, s.B) for s in comp.subspaces]
    assert pairs == sorted(pairs)
    # offsets are contiguous in that order
    expected_offset = 0
    for s in comp.subspaces:
        assert s.offset == expected_offset
        expected_offset += s.n_states
    assert comp.dim == expected_offset == gas.dim * container.dim


def test_block_slices_and_index_lookup():
    gas = build_spectrum([(0, 2), (1, 2)])
    container = build_spectrum([(0, 4), (1, 4)])
    comp = compose(gas, container)
    i = comp.subspace_index(1, 0)
    assert comp.subspaces[i].A == 1 and comp.subspaces[i].B == 0
    sl = comp.block_slice(i)
    assert sl.stop - sl.start == comp.subspaces[i].n_states
    with pytest.raises(KeyError):
        comp.subspace_index(5, 0)


def test_flat_to_matrix_maps_are_consistent():
    gas = build_spectrum([(0, 1), (1, 3)])
    container = build_spectrum([(0, 2), (2, 2)])
    comp = compose(gas, container)
    # every flat index maps to a unique (row, col) cell
    cells = set(zip(comp._rows.tolist(), comp._cols.tolist()))
    assert len(cells) == comp.dim == comp.dim_gas * comp.dim_container
    # block rows stay inside the gas level, columns inside the container level
    for i, sub in enumerate(comp.subspaces):
        sl = comp.block_slice(i)
        rows = comp._rows[sl]
        cols = comp._cols[sl]
        assert rows.min() >= comp._gas_offsets[sub.A]
        assert rows.max() < comp._gas_offsets[sub.A + 1]
        assert cols.min() >= comp._container_offsets[sub.B]
        assert cols.max() < comp._container_offsets[sub.B + 1]


def test_shell_flat_indices_partition_the_dim():
    gas = build_spectrum([(0, 2), (1, 1), (3, 2)])
    container = build_spectrum([(0, 1), (1, 2), (2, 1)])
    comp = compose(gas, container)
    seen = np.concatenate([comp.shell_flat_indices(j) for j in range(comp.n_shells)])
    assert sorted(seen.tolist()) == list(range(comp.dim))


def test_shell_lookup_by_energy():
    gas = build_spectrum([(0, 1), (1, 3)])
    container = build_spectrum([(0, 2), (1, 2)])
    comp = compose(gas, container)
    assert comp.shell_index_at(1.0) == 1
    with pytest.raises(KeyError):
        comp.shell_index_at(7.5)


def test_shell_tolerance_groups_close_energies():
    gas = build_spectrum([(0.0, 1), (1.0, 1)])
    container = build_spectrum([(0.0, 1), (1.0 + 5e-10, 1)])
    comp = compose(gas, container, shell_tolerance=1e-9)
    # E=1.0 and E=1.0000000005 land in one shell
    assert comp.n_shells == 3
    tight = compose(gas, container, shell_tolerance=1e-12)
    assert tight.n_shells == 4


def test_negative_shell_tolerance_rejected():
    gas = build_spectrum([(0, 1)])
    with pytest.raises(ValueError):
        compose(gas, gas, shell_tolerance=-1e-9)


@st.composite
def spectra(draw):
    n = draw(st.integers(min_value=1, max_value=4))
    energies = draw(st.lists(st.integers(min_value=0, max_value=12),
                             min_size=n, max_size=n, unique=True))
    degens = draw(st.lists(st.integers(min_value=1, max_value=4),
                           min_size=n, max_size=n))
    return build_spectrum(list(zip(energies, degens)))


@given(spectra(), spectra())
@settings(max_examples=60, deadline=None)
def test_shells_partition_subspaces(gas, container):
    comp = compose(gas, container)
    member_union = [i for sh in comp.shells for i in sh.member_indices]
    assert sorted(member_union) == list(range(comp.n_subspaces))
    assert sum(sh.n_states for sh in comp.shells) == gas.dim * container.dim
    assert sum(s.n_states for s in comp.subspaces) == gas.dim * container.dim
    # membership agrees with the subspace -> shell map
    for j, sh in enumerate(comp.shells):
        for i in sh.member_indices:
            assert comp._shell_of_subspace[i] == j
