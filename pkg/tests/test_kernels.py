import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tendonkin import _kernels_py, kernels

from conftest import LIMIT, make_robot

_kernels_c = pytest.importorskip("tendonkin._kernels_c")


def _args(geom, q, base, mu, cumulative):
    exps = np.where(base > 0, -mu, 0.0)
    return (q, geom.link_lengths, geom.waypoint_array, geom.anchored_array, base, exps, cumulative)


class TestBackendEquivalence:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 31), st.floats(0, 0.4), st.booleans())
    def test_same_moments_and_lengths(self, seed, mu, cumulative):
        geom = make_robot(n=6, phases=(0.0, 2.1, 4.2), turns=0.5)
        rng = np.random.default_rng(seed)
        q = rng.uniform(-LIMIT, LIMIT, geom.dof)
        base = rng.uniform(0, 2, 3) * (rng.random(3) < 0.7)
        m_c, l_c = _kernels_c.evaluate_model(*_args(geom, q, base, mu, cumulative))
        m_p, l_p = _kernels_py.evaluate_model(*_args(geom, q, base, mu, cumulative))
        np.testing.assert_allclose(m_c, m_p, rtol=1e-12, atol=1e-17)
        np.testing.assert_allclose(l_c, l_p, rtol=1e-14)

    def test_degenerate_path_rejected_by_both(self):
        geom = make_robot(n=2)
        wp = np.zeros_like(geom.waypoint_array)  # every way point coincides at q = 0
        args = (np.zeros(4), geom.link_lengths, wp, geom.anchored_array, np.ones(1), np.array([-0.1]), True)
        for mod in (_kernels_c, _kernels_py):
            with pytest.raises(ValueError):
                mod.evaluate_model(*args)


class TestBackendSelection:
    def _backend(self, env):
        code = "import tendonkin; print(tendonkin.BACKEND)"
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        return out.stdout.strip()

    def test_compiled_by_default(self):
        env = {k: v for k, v in os.environ.items() if k != "TENDONKIN_PURE_PYTHON"}
        assert self._backend(env) == "cython"

    def test_env_forces_python(self):
        assert self._backend({**os.environ, "TENDONKIN_PURE_PYTHON": "1"}) == "python"

    def test_module_exports(self):
        assert kernels.BACKEND in ("cython", "python")
        assert callable(kernels.evaluate_model)
