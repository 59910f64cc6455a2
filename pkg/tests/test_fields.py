from multiprocessing import Pool

import numpy as np
import pytest

from conftest import SerialPool
from dslashsuite import su3
from dslashsuite.algebra import Precision, GeometryMismatch
from dslashsuite.fields import (GaugeField, CompressedGaugeField, SpinorField, zeros, cold_start, hot_start,
                                point_source, random_spinor, random_su3)


def test_cold_start(geom2):
    g = cold_start(geom2)
    assert g.links.shape == (16, 4, 3, 3)
    np.testing.assert_array_equal(g.links, np.broadcast_to(np.eye(3), g.links.shape))
    assert g.precision is Precision.HIGH
    assert cold_start(geom2, 'single').links.dtype == np.complex64


def test_hot_start_is_su3(hot42):
    assert np.all(su3.is_special_unitary(hot42.links, tol=1e-12))


def test_hot_start_deterministic(geom42, hot42):
    again = hot_start(geom42, seed=11)
    np.testing.assert_array_equal(again.links, hot42.links)
    other = hot_start(geom42, seed=12)
    assert not np.array_equal(other.links, hot42.links)


@pytest.mark.parametrize('workers', [1, 2, 3, 7])
def test_hot_start_independent_of_chunking(geom42, hot42, workers):
    g = hot_start(geom42, seed=11, pool=SerialPool(workers))
    np.testing.assert_array_equal(g.links, hot42.links)


def test_hot_start_with_process_pool(geom42, hot42):
    with Pool(2) as pool:
        g = hot_start(geom42, seed=11, pool=pool)
        s = random_spinor(geom42, seed=4, pool=pool)
    np.testing.assert_array_equal(g.links, hot42.links)
    np.testing.assert_array_equal(s.data, random_spinor(geom42, seed=4).data)


def test_sites_do_not_depend_on_volume():
    # site 0 draws from its own stream, so a bigger lattice starts with the same link
    small = hot_start((2, 2, 2, 2), seed=5)
    big = hot_start((4, 2, 2, 2), seed=5)
    np.testing.assert_array_equal(small.links[0], big.links[0])


def test_bad_seed(geom2):
    with pytest.raises(ValueError):
        hot_start(geom2, seed=-1)


def test_fields_are_read_only(hot2, spinor):
    with pytest.raises(ValueError):
        hot2.links[0, 0, 0, 0] = 0
    with pytest.raises(ValueError):
        spinor.data[0, 0, 0] = 0


def test_gauge_rejects_non_su3(geom2):
    links = np.array(cold_start(geom2).links)
    links[3, 1] *= 2
    with pytest.raises(su3.NotSpecialUnitary):
        GaugeField(geom2, links)
    with pytest.raises(GeometryMismatch):
        GaugeField(geom2, links[:8])


def test_single_precision_tolerance(hot2):
    low = hot2.convert('single')
    assert low.precision is Precision.LOW
    assert low.convert('single') is low
    np.testing.assert_allclose(low.links, hot2.links, atol=1e-6)


def test_widen_single_precision(geom42):
    low = hot_start(geom42, 1, precision='single')
    high = low.convert('double')
    assert isinstance(high, GaugeField) and high.precision is Precision.HIGH
    np.testing.assert_array_equal(high.links, low.links.astype(np.complex128))
    assert not high.links.flags.writeable
    packed = low.compress().convert('double')
    assert packed.precision is Precision.HIGH
    assert packed.decompress().links.dtype == np.complex128
    # narrowing still checks at the single-precision tolerance
    assert high.convert('single').precision is Precision.LOW


def test_philox_keys(monkeypatch, geom2):
    keys = []
    philox = np.random.Philox

    def recording(key):
        keys.append(key)
        return philox(key=key)

    monkeypatch.setattr(np.random, 'Philox', recording)
    hot_start(geom2, seed=5)
    assert keys == [5 | ((site * 8 + mu) << 2) << 64 for site in range(16) for mu in range(4)]
    del keys[:]
    random_spinor(geom2, seed=9)
    assert keys == [9 | ((site * 8 << 2) | 1) << 64 for site in range(16)]


def test_compress_roundtrip(hot2):
    c = hot2.compress()
    assert isinstance(c, CompressedGaugeField) and c.compressed and not hot2.compressed
    assert c.params.shape == (64, 10)
    assert c.raw.shape[0] == 0
    np.testing.assert_allclose(c.links, hot2.links, atol=1e-13)
    np.testing.assert_allclose(c.decompress().links, hot2.links, atol=1e-13)
    low = c.convert('single')
    assert low.precision is Precision.LOW and low.links.dtype == np.complex64


def test_compress_cold_start_stores_raw(cold2):
    c = cold2.compress()
    assert c.params.shape[0] == 0
    assert c.raw.shape[0] == 64
    np.testing.assert_array_equal(c.links, cold2.links)


def test_compressed_counts_checked(geom2, hot2):
    c = hot2.compress()
    with pytest.raises(GeometryMismatch):
        CompressedGaugeField(geom2, c.params[:10], c.raw, c.flags)


def test_point_source(geom4):
    e = point_source(geom4, (1, 2, 3, 0), spin=2, color=1)
    n = geom4.index_of((1, 2, 3, 0))
    assert e.data[n, 2, 1] == 1
    assert np.count_nonzero(e.data) == 1
    with pytest.raises(ValueError):
        point_source(geom4, 0, spin=4, color=0)
    with pytest.raises(ValueError):
        point_source(geom4, geom4.volume, spin=0, color=0)


def test_random_spinor(geom2):
    s = random_spinor(geom2, seed=1)
    assert s.data.shape == (16, 4, 3) and s.precision is Precision.HIGH
    np.testing.assert_array_equal(s.data, random_spinor(geom2, seed=1).data)
    assert random_spinor(geom2, seed=1, precision='single').data.dtype == np.complex64
    # unit variance per real component
    big = random_spinor((4, 4, 4, 4), seed=2).data
    assert abs(np.mean(np.abs(big) ** 2) - 2) < 0.3


def test_spinor_arithmetic(geom2, spinor):
    z = zeros(geom2)
    np.testing.assert_array_equal((spinor + z).data, spinor.data)
    np.testing.assert_array_equal((spinor - spinor).data, 0)
    with pytest.raises(GeometryMismatch):
        SpinorField(geom2, np.zeros((8, 4, 3), complex))


def test_random_su3():
    u = random_su3(20, seed=0)
    assert u.shape == (20, 3, 3)
    assert np.all(su3.is_special_unitary(u, tol=1e-12))
    np.testing.assert_array_equal(u, random_su3(20, seed=0))
    assert random_su3(0, seed=0).shape == (0, 3, 3)
