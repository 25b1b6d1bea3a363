import numpy as np
import pytest
from hypothesis import given, strategies as st

from silforge.errors import (
    ChannelOutOfRange,
    NegativeCount,
    NonPositivePixelSize,
    NonRectangular,
    SpecInvalid,
)
from silforge.models import (
    EmitterFit,
    G2Histogram,
    HbtSpec,
    PhotonStream,
    PLMap,
    RayleighFit,
    SaturationFitParams,
    SceneSpec,
    SilFit,
    YieldEstimate,
    ZplCatalog,
    ZplLine,
    validate_map,
)


class TestValidateMap:
    def test_builds_from_nested_lists(self):
        m = validate_map([[1, 2, 3], [4, 5, 6]], 0.13, origin_label="T30")
        assert (m.rows, m.cols) == (2, 3)
        assert m.pixel_size == 0.13
        assert m.origin_label == "T30"
        assert m.counts[1, 2] == 6.0

    def test_ragged_rows_rejected(self):
        with pytest.raises(NonRectangular):
            validate_map([[1, 2], [3]], 0.13)

    def test_empty_grid_rejected(self):
        with pytest.raises(NonRectangular):
            validate_map([], 0.13)

    def test_negative_count_rejected(self):
        with pytest.raises(NegativeCount):
            validate_map([[1, -2]], 0.13)

    def test_nan_rejected(self):
        with pytest.raises(NegativeCount):
            validate_map([[1, float("nan")]], 0.13)

    def test_nonpositive_pixel_size_rejected(self):
        with pytest.raises(NonPositivePixelSize):
            validate_map([[1, 2]], 0.0)
        with pytest.raises(NonPositivePixelSize):
            validate_map([[1, 2]], -0.1)

    def test_counts_are_immutable(self):
        m = validate_map([[1, 2]], 0.13)
        with pytest.raises(ValueError):
            m.counts[0, 0] = 9

    def test_coordinates_are_index_times_pitch(self):
        m = validate_map(np.zeros((3, 4)), 0.5)
        assert np.array_equal(m.x_coords(), [0.0, 0.5, 1.0, 1.5])
        assert np.array_equal(m.y_coords(), [0.0, 0.5, 1.0])

    def test_equality_is_by_value(self):
        a = validate_map([[1, 2]], 0.13, origin_label="x")
        b = validate_map([[1, 2]], 0.13, origin_label="x")
        c = validate_map([[1, 3]], 0.13, origin_label="x")
        assert a == b
        assert a != c


class TestPhotonStream:
    def test_basic_construction(self):
        s = PhotonStream(
            channels=np.array([0, 1, 0]),
            times_ps=np.array([10, 20, 30]),
            duration_ps=100,
        )
        assert len(s) == 3
        assert list(s.events()) == [(0, 10), (1, 20), (0, 30)]

    def test_bad_channel_rejected(self):
        with pytest.raises(ChannelOutOfRange):
            PhotonStream(np.array([0, 2]), np.array([1, 2]), 10)

    def test_unsorted_rejected(self):
        with pytest.raises(SpecInvalid):
            PhotonStream(np.array([0, 1]), np.array([5, 2]), 10)

    def test_negative_time_rejected(self):
        with pytest.raises(SpecInvalid):
            PhotonStream(np.array([0]), np.array([-1]), 10)

    def test_time_beyond_duration_rejected(self):
        with pytest.raises(SpecInvalid):
            PhotonStream(np.array([0]), np.array([11]), 10)

    def test_fractional_times_rejected(self):
        with pytest.raises(SpecInvalid):
            PhotonStream(np.array([0]), np.array([1.5]), 10)

    def test_empty_stream_is_constructible(self):
        s = PhotonStream(np.array([], dtype=np.int8), np.array([], dtype=np.int64), 10)
        assert len(s) == 0


class TestFitParamTypes:
    def test_saturation_params_require_positive_core(self):
        with pytest.raises(SpecInvalid):
            SaturationFitParams(amplitude=0.0, exponent=5.0, saturation_param=0.01)
        with pytest.raises(SpecInvalid):
            SaturationFitParams(amplitude=1.0, exponent=-2.0, saturation_param=0.01)

    def test_saturation_param_zero_allowed(self):
        # pure power law has no saturation knee
        p = SaturationFitParams(amplitude=1.0, exponent=5.0, saturation_param=0.0)
        assert p.saturation_param == 0.0

    def test_sil_fit_method_whitelist(self):
        with pytest.raises(SpecInvalid):
            SilFit(center=(0, 0), radius=1.0, method="hough", residual=0.0)

    def test_sil_fit_radius_positive(self):
        with pytest.raises(SpecInvalid):
            SilFit(center=(0, 0), radius=0.0, method="circle", residual=0.0)

    def test_emitter_fit_widths_positive(self):
        with pytest.raises(SpecInvalid):
            EmitterFit(center=(0, 0), widths=(0.1, 0.0), amplitude=1.0, background=0.0)

    def test_yield_estimate_ordering(self):
        with pytest.raises(SpecInvalid):
            YieldEstimate(lam=0.3, ci_low=0.4, ci_high=0.6, n_sites=30, n_empty=21)

    def test_rayleigh_fit_sigma_positive(self):
        with pytest.raises(SpecInvalid):
            RayleighFit(sigma=0.0, n_samples=5, log_likelihood=0.0)


class TestG2Histogram:
    @staticmethod
    def _hist(raw, norm=10.0):
        raw = np.asarray(raw)
        k = raw.size // 2
        delays = np.arange(-k, k + 1) * 100.0
        return G2Histogram(
            bin_width_ps=100.0,
            delays_ps=delays,
            normalized=raw / norm,
            raw_coincidences=raw,
            normalization_constant=norm,
        )

    def test_zero_bin_properties(self):
        h = self._hist([10, 4, 10])
        assert h.zero_index == 1
        assert h.g2_zero == pytest.approx(0.4)
        assert h.g2_zero_err == pytest.approx(2.0 / 10.0)

    def test_asymmetric_grid_rejected(self):
        with pytest.raises(SpecInvalid):
            G2Histogram(
                bin_width_ps=100.0,
                delays_ps=np.array([-100.0, 0.0, 150.0]),
                normalized=np.zeros(3),
                raw_coincidences=np.zeros(3),
                normalization_constant=1.0,
            )

    def test_inconsistent_normalization_rejected(self):
        with pytest.raises(SpecInvalid):
            G2Histogram(
                bin_width_ps=100.0,
                delays_ps=np.array([-100.0, 0.0, 100.0]),
                normalized=np.array([1.0, 1.0, 1.0]),
                raw_coincidences=np.array([10, 10, 11]),
                normalization_constant=10.0,
            )


class TestCatalog:
    def test_duplicate_labels_rejected(self):
        with pytest.raises(SpecInvalid):
            ZplCatalog(entries=(
                ZplLine("V1", 861.0, 2.0),
                ZplLine("V1", 916.0, 2.0),
            ))

    def test_iterates_in_order(self):
        cat = ZplCatalog(entries=(ZplLine("a", 1.0, 0.1), ZplLine("b", 2.0, 0.1)))
        assert [e.label for e in cat] == ["a", "b"]
        assert len(cat) == 2


class TestSimSpecs:
    def test_scene_requires_positive_geometry(self):
        with pytest.raises(SpecInvalid):
            SceneSpec(
                sil_center=(0, 0), sil_radius=-1.0, ring_amplitude=1.0,
                ring_width=0.2, interface_background=0.0, inner_background=0.0,
                emitters=(), pixel_size=0.1, seed=0, rows=4, cols=4,
            )

    def test_scene_plane_whitelist(self):
        with pytest.raises(SpecInvalid):
            SceneSpec(
                sil_center=(0, 0), sil_radius=1.0, ring_amplitude=1.0,
                ring_width=0.2, interface_background=0.0, inner_background=0.0,
                emitters=(), pixel_size=0.1, seed=0, rows=4, cols=4, plane="yz",
            )

    def test_hbt_rejects_saturating_dead_time(self):
        with pytest.raises(SpecInvalid):
            # 1e9 counts/s with 30 ns dead time cannot exist
            HbtSpec(n_emitters=1, rate_per_emitter=1e9, background_rate=0,
                    antibunching_ns=30, duration_s=1, seed=0)

    def test_hbt_rejects_fully_empty_spec(self):
        with pytest.raises(SpecInvalid):
            HbtSpec(n_emitters=0, rate_per_emitter=0, background_rate=0,
                    antibunching_ns=30, duration_s=1, seed=0)


@given(
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=1, max_value=6),
    st.floats(min_value=0.01, max_value=10.0),
)
def test_map_round_trips_through_validate(rows, cols, pitch):
    grid = np.arange(rows * cols, dtype=float).reshape(rows, cols)
    m = validate_map(grid, pitch)
    assert m == PLMap(rows=rows, cols=cols, pixel_size=pitch, counts=grid)
