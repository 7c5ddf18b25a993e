import json
import os
import subprocess
import sys

import numpy as np
import pytest

from selfsim_khintchine import _accel
from selfsim_khintchine.lattice import an_star_batch, shortest_lengths
from selfsim_khintchine.transform import ApproxFunction

SCRIPT = """
import json, numpy as np
from selfsim_khintchine import _accel
from selfsim_khintchine.lattice import an_star_batch, shortest_lengths
from selfsim_khintchine.transform import ApproxFunction
rng = np.random.default_rng(0)
b = rng.normal(size=(50, 3, 3))
xs = rng.random(40)
hit, wp, wq = an_star_batch(xs, ApproxFunction.log(1.0), range(1, 11))
print(json.dumps({"numba": _accel.USE_NUMBA, "lens": shortest_lengths(b).tolist(),
                  "hit": hit.tolist(), "wq": wq.tolist()}))
"""


def _run(disable: bool):
    env = dict(os.environ)
    env.pop(_accel.DISABLE_ENV, None)
    if disable:
        env[_accel.DISABLE_ENV] = "1"
    res = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


@pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba not installed")
def test_pure_python_fallback_matches_jit():
    fast, slow = _run(False), _run(True)
    assert fast["numba"] and not slow["numba"]
    assert np.allclose(fast["lens"], slow["lens"], rtol=1e-12)
    assert fast["hit"] == slow["hit"] and fast["wq"] == slow["wq"]


def test_python_impl_unwraps_kernels():
    f = _accel.python_impl(shortest_lengths)
    b = np.eye(2)[None] * np.array([[[2.0]]])
    assert f(b, False)[0] == shortest_lengths(b)[0] == 2.0
    assert _accel.python_impl(len) is len
