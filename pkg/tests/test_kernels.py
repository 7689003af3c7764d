"""Compiled and pure-Python kernels must agree exactly."""
import random

import pytest

from erpamark import _pykernels, kernels
from erpamark.codec import PaintingScheme

ck = kernels.compiled()
needs_ext = pytest.mark.skipif(ck is None, reason="compiled kernels not built")


@needs_ext
@pytest.mark.parametrize("n,size", [(1, 1), (3, 2), (13, 4), (31, 6), (40, 6), (64, 8)])
def test_dcss_enumerate_agrees(n, size):
    assert ck.dcss_enumerate(n, size, None, None) == _pykernels.dcss_enumerate(n, size, None, None)


@needs_ext
def test_dcss_limit_agrees():
    a = ck.dcss_enumerate(64, 7, 25, None)
    b = _pykernels.dcss_enumerate(64, 7, 25, None)
    assert a == b and a[1] == kernels.LIMIT


@needs_ext
@pytest.mark.parametrize("scheme", [PaintingScheme.dcss(7), PaintingScheme.dcss(3), PaintingScheme.nearby(7)])
def test_oracle_agrees(scheme):
    rng = random.Random(7)
    for _ in range(60):
        obs = rng.getrandbits(64) & rng.getrandbits(64) & rng.getrandbits(64)
        k = rng.randint(1, 3)
        assert ck.oracle_search(obs, scheme.masks, k) == _pykernels.oracle_search(obs, scheme.masks, k)


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
