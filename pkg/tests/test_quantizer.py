import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from csiquant.errors import ConfigError, CorruptFileError, DataError, DimensionError
from csiquant.quantizer import (Bitstream, Codebook, CodebookBank, QuantizedLatent, dequantize,
                                estimate_quant_loss, kmeans_1d, kmeans_train, load_bank, pack_bitstream,
                                pack_indices, quantize_scalar, quantize_vector, save_bank,
                                unpack_bitstream, unpack_indices)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def scan(z, w):
    """Exhaustive nearest-codeword search; argmin keeps the first (lowest) index on ties."""
    d = [(wj - z) ** 2 for wj in w]
    j = int(np.argmin(d))
    return j, float(w[j])


@st.composite
def codebooks(draw, max_bits=5):
    b = draw(st.integers(1, max_bits))
    vals = draw(st.lists(finite, min_size=1 << b, max_size=1 << b, unique=True))
    return Codebook(sorted(vals))


# -- codebook -------------------------------------------------------------------


def test_codebook_validation():
    assert Codebook([0.0, 1.0]).bits == 1
    assert Codebook([3.0]).bits == 0
    for bad in ([0.0, 1.0, 2.0], [1.0, 0.0], [0.0, 0.0], [0.0, np.inf], []):
        with pytest.raises(ConfigError):
            Codebook(bad)


def test_codebook_is_read_only():
    cb = Codebook([0.0, 1.0])
    with pytest.raises(ValueError):
        cb.codewords[0] = 5.0


def test_from_values_sorts_and_separates_ties():
    cb = Codebook.from_values([2.0, 1.0, 1.0, 0.0])
    assert np.all(np.diff(cb.codewords) > 0)
    assert cb.codewords[0] == 0.0 and cb.codewords[1] == 1.0
    assert abs(cb.codewords[2] - 1.0) < 1e-8


# -- quantize_scalar --------------------------------------------------------------


@pytest.mark.parametrize("z, words, expected", [
    (0.4, (-1, 0, 1, 2), (1, 0.0)),
    (0.5, (0, 1), (0, 0.0)),
    (-50, (-1, 0, 1, 2), (0, -1.0)),
    (1e9, (-1, 0, 1, 2), (3, 2.0)),
    (1.5, (-1, 0, 1, 2), (2, 1.0)),
])
def test_quantize_scalar_examples(z, words, expected):
    assert quantize_scalar(z, Codebook(words)) == expected


@given(finite, codebooks())
def test_quantize_scalar_matches_scan(z, cb):
    assert quantize_scalar(z, cb) == scan(z, cb.codewords)


@given(st.lists(st.integers(-1000, 1000), min_size=4, max_size=4, unique=True), st.integers(0, 2))
def test_midpoints_go_to_lower_index(words, j):
    # integer codewords make every midpoint tie exact and unique
    cb = Codebook(sorted(words))
    mid = (cb.codewords[j] + cb.codewords[j + 1]) / 2
    assert quantize_scalar(mid, cb)[0] == j == scan(mid, cb.codewords)[0]


@given(arrays(np.float64, 20, elements=finite), codebooks())
def test_scalar_and_vector_paths_agree(z, cb):
    bank = CodebookBank([cb])
    q = quantize_vector(z[:, None], bank)
    assert [quantize_scalar(v, cb) for v in z] == list(zip(q.indices[:, 0].tolist(), q.values[:, 0].tolist()))


def test_one_codeword_codebook():
    assert quantize_scalar(-7.0, Codebook([2.0])) == (0, 2.0)


# -- quantize_vector --------------------------------------------------------------


def test_quantize_vector_elementwise(rng):
    bank = CodebookBank([Codebook([-1, 0, 1, 2]), Codebook([0, 1]), Codebook([-1, 0, 1, 2])])
    q = quantize_vector([0.4, 0.5, -50], bank)
    np.testing.assert_array_equal(q.indices, [1, 0, 0])
    np.testing.assert_array_equal(q.values, [0, 0, -1])
    z = rng.normal(size=(50, 3)) * 3
    q = quantize_vector(z, bank)
    for i in range(50):
        for m in range(3):
            assert (q.indices[i, m], q.values[i, m]) == scan(z[i, m], bank[m].codewords)
    np.testing.assert_array_equal(dequantize(q.indices, bank), q.values)


def test_quantize_vector_dimension_mismatch():
    with pytest.raises(DimensionError):
        quantize_vector(np.zeros(4), CodebookBank.uniform(3, 2))


# -- K-means ------------------------------------------------------------------------


def test_kmeans_exact_clusters():
    r = kmeans_1d([0, 0, 1, 1], 2)
    np.testing.assert_array_equal(r.centers, [0, 1])
    assert r.sse == 0


def test_kmeans_single_center_is_mean():
    np.testing.assert_allclose(kmeans_1d([0.0, 1.0], 1).centers, [0.5])
    assert kmeans_train([0.0, 1.0], 1) == Codebook([0.5])


def test_kmeans_errors():
    with pytest.raises(DataError):
        kmeans_1d([], 2)
    with pytest.raises(ConfigError):
        kmeans_1d([1.0, 2.0], 0)
    with pytest.raises(ConfigError):
        kmeans_1d([1.0, 2.0, 3.0], 2, init=[1.0])


def test_kmeans_pads_when_too_few_distinct_values():
    r = kmeans_1d([1.0, 1.0, 2.0], 4)
    assert r.centers.size == 4
    assert np.all(np.diff(r.centers) > 0)
    np.testing.assert_array_equal(r.centers[:2], [1.0, 2.0])
    assert np.all(r.centers[2:] - 2.0 < 1e-8)
    # quantization is unaffected by the padding
    assert estimate_quant_loss([1.0, 1.0, 2.0], r.centers) == 0.0


@given(arrays(np.float64, st.integers(2, 300), elements=st.floats(-100, 100)), st.integers(1, 16))
def test_kmeans_sse_non_increasing_and_sorted(x, k):
    r = kmeans_1d(x, k, max_iters=50)
    h = np.array(r.sse_history)
    assert np.all(np.diff(h) <= 1e-9 * (1 + h[:-1]))
    assert np.all(np.diff(r.centers) > 0)
    assert r.iterations <= 50


def test_kmeans_sse_matches_direct_computation(rng):
    x = rng.normal(size=500)
    r = kmeans_1d(x, 8, max_iters=1)
    # the recorded SSE belongs to the quantile seeds; one more step cannot be worse
    assert estimate_quant_loss(x, r.centers) * x.size <= r.sse_history[0] + 1e-9


def test_kmeans_reseeds_empty_cluster():
    # the middle seed captures nothing, so it must move to the worst-served sample
    x = np.array([0.0, 0.1, 10.0, 10.1, 50.0])
    r = kmeans_1d(x, 4, init=[0.05, 5.0, 5.1, 10.05])
    assert len(np.unique(r.centers)) == 4
    assert r.sse < 1.0


def _lloyd_max_oracle(x, init, iters=500):
    # textbook Lloyd-Max iteration with a full distance matrix
    c = np.array(init, dtype=float)
    for _ in range(iters):
        j = np.argmin((x[:, None] - c[None, :]) ** 2, axis=1)
        new = np.array([x[j == i].mean() for i in range(c.size)])
        if np.allclose(new, c, atol=1e-12, rtol=0):
            break
        c = new
    return c


def test_kmeans_reaches_lloyd_max_on_gaussian():
    x = np.random.default_rng(0).standard_normal(100_000)
    oracle = _lloyd_max_oracle(x, [-1.5, -0.45, 0.45, 1.5])
    mse_oracle = estimate_quant_loss(x, oracle)
    mse = estimate_quant_loss(x, kmeans_train(x, 4, max_iters=1000, batch=None))
    assert abs(mse - mse_oracle) <= 0.05 * mse_oracle
    # the Gaussian 2-bit Lloyd-Max distortion is about 0.1175
    assert abs(mse_oracle - 0.1175) < 0.005


def test_kmeans_train_subsamples_deterministically(rng):
    x = rng.normal(size=10_000)
    a = kmeans_train(x, 4, seed=3)
    assert a == kmeans_train(x, 4, seed=3)
    assert a != kmeans_train(x, 4, seed=4)


def test_kmeans_beats_uniform_grid(rng):
    x = rng.standard_normal(5000) ** 3
    cb = kmeans_train(x, 8, batch=None)
    grid = np.linspace(x.min(), x.max(), 8)
    assert estimate_quant_loss(x, cb) <= estimate_quant_loss(x, grid)


# -- quantization loss --------------------------------------------------------------


def test_quant_loss_examples():
    assert estimate_quant_loss([0.4, -0.4], Codebook([-1.0, 0.0, 1.0, 2.0])) == pytest.approx(0.16)
    assert estimate_quant_loss([0.4, -0.4], np.array([-1.0, 0.0, 1.0])) == pytest.approx(0.16)
    assert estimate_quant_loss([-1.0, 0.0, 2.0], Codebook([-1.0, 0.0, 1.0, 2.0])) == 0.0
    with pytest.raises(DataError):
        estimate_quant_loss([], Codebook([0.0, 1.0]))


def test_quant_loss_one_bit_gaussian_monte_carlo():
    x = np.random.default_rng(7).standard_normal(1_000_000)
    assert abs(estimate_quant_loss(x, Codebook([-0.7979, 0.7979])) - (1 - 2 / np.pi)) < 0.002


@given(arrays(np.float64, st.integers(1, 50), elements=finite), codebooks(max_bits=3))
def test_quant_loss_is_mean_of_scalar_residuals(x, cb):
    expected = np.mean([(quantize_scalar(v, cb)[1] - v) ** 2 for v in x])
    assert estimate_quant_loss(x, cb) == expected


# -- bitstream ------------------------------------------------------------------------


def test_pack_examples():
    assert pack_indices([3, 1], [2, 1]).bits.tolist() == [1, 1, 1]
    assert pack_indices([2, 0, 5], [2, 1, 3]).bits.tolist() == [1, 0, 0, 1, 0, 1]
    s = pack_indices(np.zeros(6, dtype=int), [2] * 6)
    assert len(s) == 12 and not s.bits.any()


@st.composite
def fields(draw):
    widths = draw(st.lists(st.integers(1, 8), min_size=1, max_size=40))
    idx = [draw(st.integers(0, (1 << b) - 1)) for b in widths]
    return widths, idx


@given(fields())
def test_pack_round_trip(f):
    widths, idx = f
    s = pack_indices(idx, widths)
    assert len(s) == sum(widths)
    np.testing.assert_array_equal(unpack_indices(s, widths), idx)
    back = Bitstream.from_bytes(s.to_bytes(), widths)
    assert back == s


@given(fields(), st.data())
def test_one_flipped_bit_changes_one_field(f, data):
    widths, idx = f
    s = pack_indices(idx, widths)
    pos = data.draw(st.integers(0, len(s) - 1))
    bits = s.bits.copy()
    bits[pos] ^= 1
    out = unpack_indices(Bitstream(bits, s.widths), widths)
    owner = int(np.searchsorted(np.cumsum(widths), pos, side="right"))
    changed = np.flatnonzero(out != np.asarray(idx))
    assert changed.tolist() == [owner]


def test_pack_rejects_bad_input():
    with pytest.raises(DataError):
        pack_indices([4], [2])
    with pytest.raises(DataError):
        pack_indices([-1], [2])
    with pytest.raises(DimensionError):
        pack_indices([1, 1], [2])
    s = pack_indices([1, 1], [2, 2])
    with pytest.raises(DataError):
        unpack_indices(s, [2, 3])


def test_bitstream_bytes_framing():
    s = pack_indices([3, 1], [2, 1])
    raw = s.to_bytes()
    assert raw == b"\x03\x00" + bytes([0b11100000])
    with pytest.raises(DataError):
        Bitstream.from_bytes(raw, [2, 2])
    with pytest.raises(CorruptFileError):
        Bitstream.from_bytes(raw[:2], [2, 1])
    with pytest.raises(CorruptFileError):
        Bitstream.from_bytes(raw[:1], [2, 1])


def test_pack_bitstream_with_bank(rng):
    bank = CodebookBank([Codebook(np.arange(1 << b, dtype=float)) for b in (1, 3, 2)])
    q = quantize_vector(rng.uniform(-1, 8, 3), bank)
    s = pack_bitstream(q, bank.bits)
    back = unpack_bitstream(s, bank.bits, bank)
    np.testing.assert_array_equal(back.indices, q.indices)
    np.testing.assert_array_equal(back.values, q.values)
    with pytest.raises(DataError):
        unpack_bitstream(s, (1, 3, 2), CodebookBank.uniform(3, 2))


# -- bank file --------------------------------------------------------------------------


def test_bank_file_round_trip(tmp_path, rng):
    bank = CodebookBank([Codebook(np.sort(rng.normal(size=1 << b))) for b in (1, 4, 2, 8)])
    save_bank(bank, tmp_path / "b.bin")
    assert load_bank(tmp_path / "b.bin") == bank
    raw = (tmp_path / "b.bin").read_bytes()
    assert raw[:4] == b"CSCB" and raw[12] == 1
    for cut in (5, 20, len(raw) - 3):
        (tmp_path / "t.bin").write_bytes(raw[:cut])
        with pytest.raises(CorruptFileError):
            load_bank(tmp_path / "t.bin")
    (tmp_path / "x.bin").write_bytes(raw + b"\0")
    with pytest.raises(CorruptFileError):
        load_bank(tmp_path / "x.bin")
