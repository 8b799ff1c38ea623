"""Shared fixtures; the eigensolves are session-scoped because they dominate
the suite's wall time."""

import pytest

from nsstab.constants import ConstantPack
from nsstab.dynamics import build_trilinear_tensor
from nsstab.grid import DomainSpec, build_grid
from nsstab.spectral import assemble_gram, assemble_operators, solve_eigenbasis

OMEGA = (0.6, 0.9, 0.1, 0.4)


def make_setup(nx, ny, m, omega=OMEGA, lx=1.0, ly=1.0):
    grid = build_grid(DomainSpec(lx, ly, nx, ny, omega))
    k1, k2 = assemble_operators(grid)
    basis = solve_eigenbasis(k1, k2, m, grid)
    return grid, k1, k2, basis


@pytest.fixture(scope="session")
def square32():
    grid, k1, k2, basis = make_setup(32, 32, 24)
    return {
        "grid": grid,
        "k1": k1,
        "k2": k2,
        "basis": basis,
        "gram": assemble_gram(basis, grid),
        "tensor": build_trilinear_tensor(basis, grid),
    }


@pytest.fixture(scope="session")
def square16():
    grid, k1, k2, basis = make_setup(16, 16, 24)
    return {
        "grid": grid,
        "k1": k1,
        "k2": k2,
        "basis": basis,
        "gram": assemble_gram(basis, grid),
        "tensor": build_trilinear_tensor(basis, grid),
    }


@pytest.fixture(scope="session")
def square48():
    grid, k1, k2, basis = make_setup(48, 48, 24)
    return {"grid": grid, "basis": basis, "gram": assemble_gram(basis, grid)}


@pytest.fixture(scope="session")
def tiny8():
    grid, k1, k2, basis = make_setup(8, 8, 10)
    return {"grid": grid, "k1": k1, "k2": k2, "basis": basis}


@pytest.fixture(scope="session")
def pack_rapid():
    """Practical constants for the stationary-feedback experiments."""
    return ConstantPack.practical(spectral_constant=0.6, trilinear_constant=1.0)


@pytest.fixture(scope="session")
def pack_schedule():
    """Practical constants for the dyadic-schedule experiments."""
    return ConstantPack.practical(
        spectral_constant=0.02, trilinear_constant=1.0, schedule_constant=4.0
    )
