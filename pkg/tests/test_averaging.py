import numpy as np
import pytest

from simsat.averaging import (NonHermitianError, StructuralMismatch, build_cycle_matrix,
                              build_even_projector, build_odd_projector, build_symmetrized_average,
                              check_class_sizes, check_cycle_spectrum, check_projector_identity,
                              check_psd, check_similarity, check_spectral_gap, check_weaving_product,
                              _mismatches)
from simsat.perm import TupleSpace


def test_trivial_group():
    assert build_even_projector(1, 2).to_dense().tolist() == [[1.0]]
    assert build_symmetrized_average(1, 4).tolist() == [[2.0]]
    assert build_cycle_matrix(1, 1).to_dense().tolist() == [[1.0]]


def test_projector_examples_n2_m2():
    for build in (build_even_projector, build_odd_projector):
        P = build(2, 2)
        assert P.scale == 0.5
        assert np.all(np.bincount(P.rows, minlength=4) == 2)
        dense = P.to_dense()
        assert np.max(np.abs(dense @ dense - dense)) == 0
        assert np.allclose(P.row_sums(), 1)


def test_odd_m_rejected():
    with pytest.raises(ValueError):
        build_even_projector(2, 3)
    with pytest.raises(ValueError):
        build_symmetrized_average(2, 1)


def test_cycle_matrix():
    C = build_cycle_matrix(2, 2).to_dense()
    assert np.array_equal(C @ C, np.eye(4))
    for n, m in [(2, 3), (3, 2), (2, 4)]:
        C = build_cycle_matrix(n, m).to_dense()
        Cm = np.linalg.matrix_power(C, m)
        assert np.array_equal(Cm, np.eye(C.shape[0]))
    space = TupleSpace(3, 2)
    C = build_cycle_matrix(3, 2).to_dense()
    # C V_s = V_{c^-1 s}: column s has its entry at the row r with shift[r] = s
    for s in range(space.D):
        r = int(np.flatnonzero(C[:, s])[0])
        assert space.shift[r] == s


def test_symmetrized_average_n2_m2():
    A = build_symmetrized_average(2, 2)
    assert np.allclose(A @ np.ones(4), 2 * np.ones(4))
    W = TupleSpace(2, 2).weave_matrix()
    # both orientations coincide for M = 2, each contributing D^{-1/2}
    assert np.array_equal(A, 2 * 0.5 * (W & W.T))


@pytest.mark.parametrize("n,m", [(1, 2), (2, 2), (3, 2), (2, 4)])
def test_structural_checks(n, m):
    assert check_similarity(n, m).passed
    assert check_weaving_product(n, m).passed
    assert check_class_sizes(n, m).passed
    assert check_projector_identity(n, m).passed


def test_weaving_product_counts():
    rep = check_weaving_product(2, 2)
    assert rep.details["nonzero_per_product"] == 8
    assert rep.details["entry"] == 0.5


def test_mismatch_reports_entries():
    import scipy.sparse as sp
    a = sp.csr_matrix(np.array([[1, 0], [0, 1]]))
    b = sp.csr_matrix(np.array([[1, 2], [0, 1]]))
    bad = _mismatches(a, b)
    assert bad == [(0, 1, 0.0, 2.0)]
    err = StructuralMismatch("x", bad)
    assert err.entries == bad


def test_check_psd():
    assert check_psd(np.zeros((3, 3))).lambda_min == 0
    assert check_psd(build_symmetrized_average(2, 2)).is_psd
    with pytest.raises(NonHermitianError):
        check_psd(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert not check_psd(np.diag([1.0, -1.0])).is_psd


@pytest.mark.parametrize("n,m", [(2, 2), (3, 2), (2, 4)])
def test_spectra(n, m):
    assert check_spectral_gap(n, m).passed
    assert check_cycle_spectrum(n, m).passed
    ev = np.linalg.eigvalsh(build_even_projector(n, m).to_dense() + build_odd_projector(n, m).to_dense())
    assert np.all((ev <= 1e-9) | (ev >= 1 - 1e-9))


def test_nonabelian_m4_spectrum_documented():
    """S_3 with M = 4: the two projectors do not commute and A has a negative eigenvalue."""
    E = build_even_projector(3, 4).to_dense()
    O = build_odd_projector(3, 4).to_dense()
    assert not np.allclose(E @ O, O @ E)
    ev = np.linalg.eigvalsh(E + O)
    assert np.isclose(ev, 0.5).any()
    assert np.isclose(check_psd(E @ O + O @ E).lambda_min, -0.25)


def test_triplet_dump(tmp_path):
    P = build_even_projector(2, 2)
    path = tmp_path / "ev.txt"
    P.dump_triplets(path)
    lines = path.read_text().splitlines()
    assert len(lines) == P.nnz
    r, c, v = lines[0].split()
    assert (int(r), int(c), float(v)) == (0, 0, 0.5)
