import numpy as np
import pytest
from hypothesis import given, strategies as st

from relay_dmt.linalg import SMALL_N, NotPositiveDefinite, cholesky_hpd, logdet_hpd
from relay_dmt.rng import DEFAULT_SEED, SEED_ENV, resolve_seed, stream


def _hpd(rng, n, batch=()):
    a = rng.standard_normal(batch + (n, n)) + 1j * rng.standard_normal(batch + (n, n))
    return a @ np.swapaxes(a, -1, -2).conj() + np.eye(n)


@pytest.mark.parametrize("n", [1, 2, 3, 5, SMALL_N, SMALL_N + 2])
def test_cholesky_matches_numpy(n):
    a = _hpd(np.random.default_rng(n), n, (50,))
    np.testing.assert_allclose(cholesky_hpd(a), np.linalg.cholesky(a), atol=1e-10)


def test_cholesky_single_and_real():
    a = np.array([[4.0, 2.0], [2.0, 3.0]])
    c = cholesky_hpd(a)
    np.testing.assert_allclose(c @ c.conj().T, a)
    assert c[0, 1] == 0


@given(st.integers(1, 6), st.integers(0, 10 ** 6))
def test_logdet_against_slogdet(n, seed):
    a = _hpd(np.random.default_rng(seed), n, (4,))
    sign, ld = np.linalg.slogdet(a)
    np.testing.assert_allclose(sign, 1)
    np.testing.assert_allclose(logdet_hpd(a), ld / np.log(2), rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(logdet_hpd(a, base=np.e), ld, rtol=1e-10, atol=1e-10)


def test_logdet_identity_and_scaled():
    assert logdet_hpd(np.eye(3)) == pytest.approx(0.0)
    assert logdet_hpd(4 * np.eye(3)) == pytest.approx(6.0)


def test_not_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        cholesky_hpd(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NotPositiveDefinite):
        cholesky_hpd(-np.eye(SMALL_N + 1))
    with pytest.raises(ValueError):
        cholesky_hpd(np.zeros((2, 3)))


def test_stream_deterministic():
    a = stream(7, 3, 1).standard_normal(10)
    b = stream(7, 3, 1).standard_normal(10)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("other", [(8, 3, 1), (7, 4, 1), (7, 3, 2)])
def test_streams_differ(other):
    a = stream(7, 3, 1).standard_normal(1000)
    b = stream(*other).standard_normal(1000)
    assert not np.allclose(a, b)
    # crude independence check: sample correlation near zero
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.15


def test_adjacent_chunks_do_not_overlap():
    # a chunk drawing many values must not run into the next chunk's stream
    a = stream(1, 0).integers(0, 2 ** 63, 100_000)
    b = stream(1, 1).integers(0, 2 ** 63, 1000)
    assert not set(b.tolist()) & set(a.tolist())


def test_resolve_seed(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    assert resolve_seed() == DEFAULT_SEED
    assert resolve_seed(5) == 5
    monkeypatch.setenv(SEED_ENV, "0x10")
    assert resolve_seed() == 16
    assert resolve_seed(3) == 3
