import numpy as np
import pytest

from cusplab import spectrum
from cusplab.model import CuspModel


def square_model(a=1.0):
    return CuspModel(2, np.eye(2), np.array([[a]]))


def test_dual_lattice_self_dual_and_scaling():
    m = square_model()
    assert np.allclose(spectrum.dual_lattice(m), np.eye(2))
    m2 = CuspModel(2, 2.0 * np.eye(2), np.array([[1.0]]))
    assert np.allclose(spectrum.dual_lattice(m2), 0.5 * np.eye(2))


def test_dual_lattice_sheared_basis():
    B = np.array([[1.0, 0.0], [0.5, 1.0]]).T  # columns (1,0.5), (0,1)
    m = CuspModel(2, B, np.array([[1.0]]))
    dual = spectrum.dual_lattice(m)
    assert np.allclose(B.T @ dual, np.eye(2))


def test_square_torus_spectrum():
    m = square_model()
    entries = spectrum.eigenvalues_up_to(m, 6)
    lams = [e.lam for e in entries]
    assert lams[0] == 0.0
    assert entries[0].k == (0, 0)
    # multiplicity four at pi^2 from the four unit dual vectors
    assert np.allclose(lams[1:5], np.pi**2)
    assert lams[5] == pytest.approx(2 * np.pi**2)
    assert spectrum.first_eigenvalue(m) == pytest.approx(np.pi**2)


def test_doubling_a_halves_eigenvalues():
    lam_a = [e.lam for e in spectrum.eigenvalues_up_to(square_model(1.0), 8)]
    lam_b = [e.lam for e in spectrum.eigenvalues_up_to(square_model(2.0), 8)]
    assert np.allclose(lam_b, np.array(lam_a) / 2.0)


def test_rectangular_torus_first_eigenvalue():
    m = CuspModel(2, np.diag([1.0, 2.0]), np.array([[1.0]]))
    assert spectrum.first_eigenvalue(m) == pytest.approx(np.pi**2 / 4.0)


def test_basis_relabeling_invariance():
    B1 = np.array([[1.0, 0.3], [0.0, 1.2]])
    B2 = B1[:, ::-1]  # swap the basis vectors
    m1 = CuspModel(2, B1, np.array([[0.8]]))
    m2 = CuspModel(2, B2, np.array([[0.8]]))
    l1 = [e.lam for e in spectrum.eigenvalues_up_to(m1, 10)]
    l2 = [e.lam for e in spectrum.eigenvalues_up_to(m2, 10)]
    assert np.allclose(l1, l2)


def test_modes_below_matches_enumeration():
    m = square_model()
    lam_max = 10 * np.pi**2
    below = spectrum.modes_below(m, lam_max)
    assert all(0 < e.lam <= lam_max for e in below)
    # count k with 0 < |k|^2 <= 10: |k|^2 in {1,2,4,5,8,9,10}
    counts = {1: 4, 2: 4, 4: 4, 5: 8, 8: 4, 9: 4, 10: 8}
    assert len(below) == sum(counts.values())


def test_characters_discretely_orthonormal():
    m = 16
    t = np.arange(m) / m
    tt = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1)
    k1, k2 = (1, 0), (2, -1)
    chi1 = np.exp(2j * np.pi * (tt @ np.array(k1)))
    chi2 = np.exp(2j * np.pi * (tt @ np.array(k2)))
    inner = np.vdot(chi1, chi2) / m**2
    norm = np.vdot(chi1, chi1) / m**2
    assert abs(inner) < 1e-14
    assert norm == pytest.approx(1.0, rel=1e-14)


def test_fd_oracle_agrees_with_character_formula():
    m = square_model()
    lam1 = spectrum.first_eigenvalue(m)
    fd = spectrum.fd_first_eigenvalue(m, 64)
    assert abs(fd - lam1) / lam1 < 2e-3


def test_fd_oracle_rejects_higher_dimension():
    m = CuspModel(3, np.eye(4), np.eye(2))
    with pytest.raises(Exception):
        spectrum.fd_eigenvalues(m, 16)
