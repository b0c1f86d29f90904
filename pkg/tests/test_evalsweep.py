import numpy as np
import pytest

from battdmd import (
    RankPolicy,
    rss,
    sweep_input_embedding,
    sweep_output_embedding,
    windowed_rss,
)
from conftest import poles_to_coeffs, recurrence_series, series_of


class TestRss:
    def test_identical_sequences(self):
        rep = rss([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert rep.rss == 0.0
        assert rep.horizon == 3

    def test_arithmetic(self):
        rep = rss([1.0, 2.0, 3.0], [1.0, 1.0, 1.0])
        assert rep.rss == 5.0

    def test_constant_measured_flags_nrss(self):
        rep = rss([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
        assert rep.nrss is None
        assert rep.rss == 2.0

    def test_nrss_definition(self):
        y = np.array([1.0, 2.0, 4.0])
        yh = np.array([1.5, 2.0, 3.0])
        rep = rss(y, yh)
        assert rep.nrss == rep.rss / float(np.sum((y - y.mean()) ** 2))

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            rss([1.0], [1.0, 2.0])

    def test_positive_iff_different(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal(10)
        assert rss(y, y).rss == 0.0
        assert rss(y, y + 1e-9).rss > 0.0


class TestWindowedRss:
    def test_windows(self):
        t = np.arange(100.0)
        y = np.ones(100)
        yh = y.copy()
        yh[10:20] += 1.0
        segs = windowed_rss(t, y, yh, [(0.0, 9.0), (10.0, 19.0), (200.0, 300.0)])
        assert len(segs) == 2  # empty window dropped
        assert segs[0].rss == 0.0
        assert segs[1].rss == 10.0
        assert segs[1].samples == 10

    def test_elapsed_time_origin(self):
        t = 500.0 + np.arange(10.0)
        segs = windowed_rss(t, np.ones(10), np.zeros(10), [(0.0, 4.0)])
        assert segs[0].samples == 5


@pytest.fixture(scope="module")
def lti_series():
    # second-order noiseless positive decay: poles {0.9, 0.5}
    coeffs = poles_to_coeffs([0.9, 0.5])
    sig = recurrence_series(coeffs, [3.0, 2.8], 50)
    return series_of(sig)


class TestOutputSweep:
    def test_lti_sharp_drop_at_order(self, lti_series):
        result = sweep_output_embedding(lti_series, [1, 2, 3, 4], ell=1, kind="dmd")
        by_m = {p.param: p.rss for p in result.points}
        assert set(by_m) == {1, 2, 3, 4}
        assert by_m[1] > 1e6 * max(by_m[2], 1e-300)
        assert all(by_m[m] < 1e-12 for m in (2, 3, 4))
        assert result.best != 1
        assert result.model_kind == "dmd"

    def test_singleton_grid(self, lti_series):
        result = sweep_output_embedding(lti_series, [2], ell=1, kind="dmd")
        assert result.best == 2
        assert len(result.points) == 1

    def test_deterministic_across_runs(self, lti_series):
        a = sweep_output_embedding(lti_series, [1, 2, 3, 4], ell=1, kind="dmd")
        b = sweep_output_embedding(lti_series, [1, 2, 3, 4], ell=1, kind="dmd")
        assert a == b

    def test_oversized_point_skipped_not_fatal(self, lti_series):
        with pytest.warns(UserWarning, match="skipped"):
            result = sweep_output_embedding(lti_series, [2, 40], ell=1, kind="dmd")
        assert [p.param for p in result.points] == [2]
        assert result.skipped[0][0] == 40
        assert result.best == 2

    def test_empty_grid(self, lti_series):
        with pytest.raises(ValueError, match="empty"):
            sweep_output_embedding(lti_series, [], ell=1, kind="dmd")

    def test_best_attains_minimum(self, hppc_record_small):
        result = sweep_output_embedding(hppc_record_small, [4, 8, 12], ell=2, kind="dmdc",
                                        policy=RankPolicy.relative(1e-5))
        by_m = {p.param: p.rss for p in result.points}
        assert result.best in by_m
        assert by_m[result.best] == min(by_m.values())


class TestInputSweep:
    def test_input_memory_detected(self):
        # output depends on the input one step back: y_{k+1} = 0.5 y_k + u_{k-1};
        # with the newest-sample alignment, ell=2 is the smallest window that sees u_{k-1}
        rng = np.random.default_rng(1)
        u = rng.standard_normal(400)
        y = np.zeros(401)
        for k in range(1, 400):
            y[k + 1] = 0.5 * y[k] + u[k - 1]
        ts = series_of(y, i=np.append(u, 0.0))
        result = sweep_input_embedding(ts, m=2, ell_grid=[1, 2])
        by_ell = {p.param: p.rss for p in result.points}
        assert by_ell[1] > 1e6 * max(by_ell[2], 1e-300)
        assert result.best == 2

    def test_singleton(self, hppc_record_small):
        result = sweep_input_embedding(hppc_record_small, m=8, ell_grid=[1],
                                       policy=RankPolicy.relative(1e-5))
        assert len(result.points) == 1
        assert result.best == 1

    def test_ell_above_m_skipped(self, lti_series):
        with pytest.warns(UserWarning, match="exceeds"):
            result = sweep_input_embedding(lti_series, m=2, ell_grid=[1, 2, 5])
        assert [p.param for p in result.points] == [1, 2]
        assert ("5" in result.skipped[0][1]) or result.skipped[0][0] == 5
