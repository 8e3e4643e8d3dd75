"""
Unit tests for network geometry, channel draws and per-realization mutual information.
"""
import math
import sys
from pathlib import Path

# Add src to path for direct imports
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

import numpy as np
import pytest

from channel_model import (
    ChannelSet, NetworkDims, PowerProfile, draw_channels, effective_channel,
    mi_from_covariances, mi_optimum, mi_projection, snr_per_stream
)
from exceptions import DimensionError, DomainError
from ia_solver import IASolution, random_solution
from utils import complex_gaussian, hermitian, substream, to_unit


def random_unitary(rng, n):
    Q, _ = np.linalg.qr(complex_gaussian(rng, (n, n)))
    return Q


@pytest.fixture
def dims3():
    return NetworkDims.symmetric(3, 2, 2, 1, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ------------------------------------------------------------------ #
# Network dimensions
# ------------------------------------------------------------------ #

class TestNetworkDims:

    def test_symmetric_constructor(self):
        dims = NetworkDims.symmetric(7, 7, 5, 1, 2)
        assert dims.K == 7
        assert dims.M == (7,) * 7
        assert dims.dprime == (2,) * 7
        assert dims.is_symmetric
        assert dims.describe() == "K=7, 5x7, d=1, d'=2"

    def test_single_user_rejected(self):
        with pytest.raises(DimensionError):
            NetworkDims.symmetric(1, 2, 2, 1, 1)

    def test_streams_above_antennas_rejected(self):
        with pytest.raises(DimensionError):
            NetworkDims.symmetric(3, 2, 2, 3, 1)
        with pytest.raises(DimensionError):
            NetworkDims.symmetric(3, 2, 2, 1, 3)

    def test_list_length_must_match_k(self):
        with pytest.raises(DimensionError):
            NetworkDims(3, (2, 2), (2, 2, 2), (1, 1, 1), (1, 1, 1))

    def test_zero_entries_rejected(self):
        with pytest.raises(DimensionError):
            NetworkDims(2, (2, 0), (2, 2), (1, 1), (1, 1))

    def test_asymmetric_describe(self):
        dims = NetworkDims(2, (3, 2), (2, 2), (1, 1), (1, 2))
        assert not dims.is_symmetric
        assert "M=(3, 2)" in dims.describe()


# ------------------------------------------------------------------ #
# Channel draws
# ------------------------------------------------------------------ #

class TestDrawChannels:

    def test_same_seed_same_channels(self):
        dims = NetworkDims.symmetric(2, 1, 1, 1, 1)
        a = draw_channels(dims, 7)
        b = draw_channels(dims, 7)
        for i in range(2):
            for j in range(2):
                np.testing.assert_array_equal(a.H[i][j], b.H[i][j])

    def test_trial_substreams_differ(self, dims3):
        a = draw_channels(dims3, 7, trial=0)
        b = draw_channels(dims3, 7, trial=1)
        assert not np.allclose(a.H[0][0], b.H[0][0])
        np.testing.assert_array_equal(a.H[0][1], draw_channels(dims3, 7, trial=0).H[0][1])

    def test_seven_user_network_shapes(self):
        dims = NetworkDims.symmetric(7, 7, 5, 1, 2)
        channels = draw_channels(dims, 0)
        shapes = [channels.H[i][j].shape for i in range(7) for j in range(7)]
        assert len(shapes) == 49
        assert all(s == (5, 7) for s in shapes)

    def test_unit_variance(self):
        dims = NetworkDims.symmetric(2, 50, 50, 1, 1)
        entries = np.concatenate([h.ravel() for seed in range(10)
                                  for row in draw_channels(dims, seed).H for h in row])
        assert entries.size == 10 ** 5
        assert np.mean(np.abs(entries) ** 2) == pytest.approx(1.0, abs=0.02)
        assert np.var(entries.real) == pytest.approx(0.5, abs=0.01)
        assert np.var(entries.imag) == pytest.approx(0.5, abs=0.01)

    def test_channels_are_read_only(self, dims3):
        channels = draw_channels(dims3, 0)
        with pytest.raises(ValueError):
            channels.H[0][1][0, 0] = 0.0

    def test_shape_mismatch_rejected(self, dims3):
        H = [[np.zeros((2, 2)) for _ in range(3)] for _ in range(3)]
        H[1][2] = np.zeros((3, 2))
        with pytest.raises(DimensionError):
            ChannelSet(dims3, H)


# ------------------------------------------------------------------ #
# Powers
# ------------------------------------------------------------------ #

class TestPowerProfile:

    def test_nonpositive_power_rejected(self):
        with pytest.raises(DomainError):
            PowerProfile((1.0, 0.0))
        with pytest.raises(DomainError):
            PowerProfile((1.0, 1.0), sigma2=0.0)

    def test_equal_profile_from_db(self):
        powers = PowerProfile.equal(3, 10.0)
        assert powers.P == pytest.approx((10.0, 10.0, 10.0))
        assert powers.sigma2 == 1.0

    def test_snr_per_stream(self):
        dims = NetworkDims.symmetric(2, 4, 4, 2, 2)
        powers = PowerProfile((8.0, 8.0), sigma2=2.0)
        assert snr_per_stream(powers, dims, 0) == pytest.approx(2.0)


# ------------------------------------------------------------------ #
# Mutual information
# ------------------------------------------------------------------ #

class TestMutualInformation:

    def test_vanishing_power_gives_zero(self, dims3):
        channels = draw_channels(dims3, 3)
        solution = random_solution(dims3, substream(3, 9))
        powers = PowerProfile((1e-14,) * 3)
        assert mi_optimum(channels, solution, powers, 0) == pytest.approx(0.0, abs=1e-9)
        assert mi_projection(channels, solution, powers, 0) == pytest.approx(0.0, abs=1e-9)

    def test_interference_free_reduction(self, rng):
        dims = NetworkDims.symmetric(2, 2, 2, 2, 2)
        H = [[complex_gaussian(rng, (2, 2)), np.zeros((2, 2))],
             [np.zeros((2, 2)), complex_gaussian(rng, (2, 2))]]
        channels = ChannelSet(dims, H)
        solution = random_solution(dims, rng)
        powers = PowerProfile((5.0, 5.0))
        HV = H[0][0] @ solution.V[0]
        expected = np.linalg.slogdet(np.eye(2) + 2.5 * HV @ hermitian(HV))[1]
        assert mi_optimum(channels, solution, powers, 0) == pytest.approx(to_unit(expected), rel=1e-12)

    def test_matches_direct_determinant_ratio(self, dims3):
        channels = draw_channels(dims3, 11)
        solution = random_solution(dims3, substream(11, 5))
        powers = PowerProfile((3.0, 2.0, 4.0), sigma2=0.5)
        for k in range(3):
            interference = sum(powers.P[i] * channels.H[k][i] @ solution.V[i] @ hermitian(channels.H[k][i] @ solution.V[i])
                               for i in range(3) if i != k)
            HV = channels.H[k][k] @ solution.V[k]
            num = np.linalg.det(powers.sigma2 * np.eye(2) + powers.P[k] * HV @ hermitian(HV) + interference)
            den = np.linalg.det(powers.sigma2 * np.eye(2) + interference)
            expected = math.log2(abs(num) / abs(den))
            assert mi_optimum(channels, solution, powers, k) == pytest.approx(expected, rel=1e-10)

    def test_optimum_invariant_under_receive_rotation(self, dims3, rng):
        channels = draw_channels(dims3, 5)
        solution = random_solution(dims3, rng)
        powers = PowerProfile.equal(3, 10.0)
        Q = random_unitary(rng, 2)
        rotated = [list(row) for row in channels.H]
        rotated[0] = [Q @ h for h in channels.H[0]]
        rotated_set = ChannelSet(dims3, rotated)
        assert mi_optimum(rotated_set, solution, powers, 0) == \
            pytest.approx(mi_optimum(channels, solution, powers, 0), rel=1e-10)

    def test_projection_scalar_reduction(self, dims3):
        channels = draw_channels(dims3, 2)
        solution = random_solution(dims3, substream(2, 1))
        powers = PowerProfile.equal(3, 10.0)
        gain = abs((hermitian(solution.U[1]) @ channels.H[1][1] @ solution.V[1])[0, 0]) ** 2
        assert mi_projection(channels, solution, powers, 1) == pytest.approx(math.log2(1 + 10.0 * gain), rel=1e-12)

    def test_projection_invariant_under_precoder_rotation(self, rng):
        dims = NetworkDims.symmetric(2, 4, 4, 2, 3)
        channels = draw_channels(dims, 8)
        solution = random_solution(dims, rng)
        powers = PowerProfile.equal(2, 15.0)
        R = random_unitary(rng, 2)
        rotated = IASolution(V=[v @ R for v in solution.V], U=solution.U)
        assert mi_projection(channels, rotated, powers, 0) == \
            pytest.approx(mi_projection(channels, solution, powers, 0), rel=1e-10)

    def test_effective_channel_shape(self):
        dims = NetworkDims.symmetric(2, 4, 4, 1, 3)
        channels = draw_channels(dims, 0)
        solution = random_solution(dims, substream(0, 1))
        assert effective_channel(channels, solution, 0).shape == (3, 1)

    def test_shape_mismatch_is_dimension_error(self, dims3):
        channels = draw_channels(dims3, 0)
        solution = random_solution(dims3, substream(0, 1))
        bad = IASolution(V=solution.V[:2], U=solution.U)
        with pytest.raises(DimensionError):
            mi_optimum(channels, bad, PowerProfile.equal(3, 0.0), 0)
        with pytest.raises(DimensionError):
            mi_from_covariances(channels, [np.eye(2)] * 2, 1.0, 0)

    def test_nats_unit(self, dims3):
        channels = draw_channels(dims3, 4)
        solution = random_solution(dims3, substream(4, 1))
        powers = PowerProfile.equal(3, 10.0)
        bits = mi_projection(channels, solution, powers, 0)
        nats = mi_projection(channels, solution, powers, 0, unit="nats")
        assert nats == pytest.approx(bits * math.log(2.0), rel=1e-12)
