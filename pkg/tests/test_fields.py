import numpy as np
import pytest

from cusplab.errors import ConfigError
from cusplab.fields import Field, torus_points
from cusplab.grid import RadialGrid


def _grid():
    return RadialGrid.make(0.1, 5.0, 32)


def test_roundtrip_modes_values_modes():
    grid = _grid()
    rng = np.random.default_rng(11)
    prof = rng.normal(size=32) + 1j * rng.normal(size=32)
    modes = {(0, 0): rng.normal(size=32).astype(complex), (1, 2): prof, (-1, -2): prof.conj()}
    f = Field(grid, modes, 8)
    vals = f.values()
    g = Field.from_values(grid, vals)
    for k, p in modes.items():
        assert np.allclose(g.modes[k], p, atol=1e-13)


def test_values_rejects_nonreal_field():
    grid = _grid()
    f = Field(grid, {(1, 0): np.ones(32, dtype=complex)}, 8)
    with pytest.raises(ConfigError):
        f.values()


def test_conjugate_symmetry_defect():
    grid = _grid()
    p = np.ones(32, dtype=complex)
    sym = Field(grid, {(1, 0): p, (-1, 0): p.conj()}, 8)
    assert sym.conjugate_symmetry_defect() < 1e-15
    broken = Field(grid, {(1, 0): p, (-1, 0): 2 * p}, 8)
    assert broken.conjugate_symmetry_defect() == pytest.approx(1.0)


def test_aliasing_guards():
    grid = _grid()
    with pytest.raises(ConfigError):
        Field(grid, {(4, 0): np.ones(32, dtype=complex)}, 8)  # Nyquist mode
    vals = np.zeros((4, 4, 32))
    vals[...] = np.cos(2 * np.pi * np.arange(4) * 2 / 4)[:, None, None]  # Nyquist content
    with pytest.raises(ConfigError):
        Field.from_values(grid, vals)


def test_algebra_and_norms():
    grid = _grid()
    a = Field.from_radial(grid, grid.x, 2, 8)
    b = Field.from_radial(grid, grid.x**2, 2, 8)
    c = a + 2.0 * b - b
    assert np.allclose(c.radial_mean(), grid.x + grid.x**2)
    assert c.sup_norm() == pytest.approx(np.max(grid.x + grid.x**2))
    assert c.sup_norm(grid.interior(2)) <= c.sup_norm()


def test_torus_points_shape_and_values():
    lattice = np.array([[1.0, 0.0], [0.0, 2.0]])
    pts = torus_points(lattice, 4)
    assert pts.shape == (4, 4, 1)
    assert pts[0, 0, 0] == 0
    assert pts[1, 0, 0] == pytest.approx(0.25)
    assert pts[0, 1, 0] == pytest.approx(0.5j)
