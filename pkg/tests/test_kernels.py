import os
import subprocess
import sys

import numpy as np
import pytest

from mixbgk import _kernels
from mixbgk._kernels import _fallback
from mixbgk.grid import VelocityGrid
from mixbgk.mixture import maxwellian, maxwellian_params

try:
    from mixbgk._kernels import _core
except ImportError:  # pragma: no cover - build without the extension
    _core = None

BACKENDS = [pytest.param(_fallback, id="python")]
BACKENDS.append(pytest.param(_core, id="cython", marks=pytest.mark.skipif(_core is None, reason="extension not built")))


@pytest.fixture
def grid():
    return VelocityGrid(6.0, 12)


def _targets(grid, cells, rng, m=1.0):
    n = rng.uniform(0.5, 2.0, cells)
    U = rng.normal(0, 0.4, (cells, 3))
    T = rng.uniform(0.6, 1.5, cells)
    F = maxwellian(n, U, T, m, grid)
    raw = _fallback.velocity_moments(F, grid.nodes, grid.weights)
    return F, raw, maxwellian_params(n, U, T, m)


def test_compiled_backend_is_selected_when_built():
    if _core is not None and os.environ.get("MIXBGK_BACKEND", "").lower() != "python":
        assert _kernels.BACKEND == "cython"


def test_environment_forces_fallback():
    code = "from mixbgk import _kernels; print(_kernels.BACKEND)"
    env = dict(os.environ, MIXBGK_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("impl", BACKENDS)
def test_velocity_moments_against_direct_sums(impl, grid, rng):
    F = rng.random((3, grid.size))
    got = impl.velocity_moments(F, grid.nodes, grid.weights)
    w = grid.weights
    want = np.column_stack([F @ w, (F * w) @ grid.nodes, (F * grid.speed2) @ w])
    # summation order differs, so compare against the size of the sums
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-13 * np.abs(want).max())


@pytest.mark.parametrize("impl", BACKENDS)
def test_velocity_moments_single_cell(impl, grid, rng):
    F = rng.random(grid.size)
    got = impl.velocity_moments(F, grid.nodes, grid.weights)
    assert got.shape == (5,)


@pytest.mark.parametrize("impl", BACKENDS)
def test_expquad_recovers_sampled_maxwellian(impl, grid, rng):
    F, raw, p0 = _targets(grid, 4, rng)
    start = p0 + rng.normal(0, 1e-2, p0.shape)
    params, values, iters, ok = impl.expquad_solve(raw, start, grid.nodes, grid.weights, 1e-13, 50)
    assert np.all(ok)
    np.testing.assert_allclose(values, F, rtol=1e-8, atol=1e-14)
    moments = _fallback.velocity_moments(values, grid.nodes, grid.weights)
    np.testing.assert_allclose(moments, raw, rtol=1e-12, atol=1e-14)


@pytest.mark.skipif(_core is None, reason="extension not built")
def test_backends_agree(grid, rng):
    F, raw, p0 = _targets(grid, 5, rng, m=2.0)
    np.testing.assert_allclose(_core.velocity_moments(F, grid.nodes, grid.weights),
                               _fallback.velocity_moments(F, grid.nodes, grid.weights), rtol=1e-13, atol=1e-16)
    a = _core.expquad_solve(raw, p0, grid.nodes, grid.weights, 1e-13, 50)
    b = _fallback.expquad_solve(raw, p0, grid.nodes, grid.weights, 1e-13, 50)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-16)


@pytest.mark.parametrize("impl", BACKENDS)
def test_expquad_flags_unreachable_targets(impl, grid):
    # a negative internal energy cannot be matched by any exponential
    raw = np.array([[1.0, 0.0, 0.0, 0.0, -1.0]])
    p0 = maxwellian_params(1.0, np.zeros(3), 1.0, 1.0)
    _, _, _, ok = impl.expquad_solve(raw, p0, grid.nodes, grid.weights, 1e-12, 20)
    assert not ok[0]
