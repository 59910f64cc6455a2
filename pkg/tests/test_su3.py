import numpy as np
import pytest

from dslashsuite import su3
from dslashsuite.fields import random_su3


@pytest.fixture(scope='module')
def haar():
    return random_su3(10000, seed=2024)


def test_random_links_are_special_unitary(haar):
    assert np.all(su3.is_special_unitary(haar, tol=1e-12))


def test_round_trip_10k_links(haar):
    params, raw, flags = su3.compress_links(haar)
    assert params.shape[1] == su3.COMPRESSED_LINK_WORDS
    assert np.count_nonzero(flags) <= len(haar) // 1000
    back = su3.decompress_links(params, raw, flags)
    assert np.max(np.abs(back - haar)) <= 1e-12


def test_compress_reconstruct_single_link(haar):
    u = haar[17]
    c = su3.compress(u)
    assert c.shape == (10,) and c.dtype == np.float64
    # first row and two entries of the second row, real/imag interleaved
    np.testing.assert_array_equal(c[:6:2], u[0].real)
    np.testing.assert_array_equal(c[1:6:2], u[0].imag)
    np.testing.assert_array_equal(c[6:], [u[1, 0].real, u[1, 0].imag, u[1, 1].real, u[1, 1].imag])
    v = su3.reconstruct(c)
    np.testing.assert_allclose(v, u, rtol=0, atol=1e-13)
    assert su3.unitarity_error(v) < 1e-13
    assert su3.det_error(v) < 1e-13


def test_reconstruction_is_a_projection(haar):
    c = su3.compress(haar[:50])
    np.testing.assert_array_equal(su3.compress(su3.reconstruct(c), check=False), c)


def test_single_precision_reconstruct(haar):
    c = su3.compress(haar[:100]).astype(np.float32)
    v = su3.reconstruct(c)
    assert v.dtype == np.complex64
    assert np.max(np.abs(v - haar[:100])) < 1e-5


def test_identity_needs_raw_storage():
    eye = np.broadcast_to(np.eye(3, dtype=complex), (5, 3, 3))
    with pytest.raises(su3.PivotTooSmall):
        su3.compress(eye)
    params, raw, flags = su3.compress_links(eye)
    assert params.shape == (0, 10)
    np.testing.assert_array_equal(flags, 1)
    np.testing.assert_array_equal(su3.decompress_links(params, raw, flags), eye)


def test_mixed_raw_and_compressed(haar):
    links = haar[:6].copy()
    links[[1, 4]] = np.eye(3)
    params, raw, flags = su3.compress_links(links)
    np.testing.assert_array_equal(flags, [0, 1, 0, 0, 1, 0])
    assert len(params) == 4 and len(raw) == 2
    np.testing.assert_allclose(su3.decompress_links(params, raw, flags), links, atol=1e-13)
    assert su3.stream_words(flags) == 4 * 10 + 2 * 18


def test_not_special_unitary():
    with pytest.raises(su3.NotSpecialUnitary):
        su3.compress(2 * np.eye(3, dtype=complex))
    u = np.diag(np.exp(1j * np.array([0.1, 0.2, 0.3])))
    assert not su3.is_special_unitary(u)  # unitary, det != 1
    with pytest.raises(su3.NotSpecialUnitary, match="gauge link"):
        su3.check_special_unitary(u[None], what="gauge link")


def test_reconstruction_flops():
    assert su3.reconstruction_flops() == 67
