import numpy as np
import pytest

from freqvsr import dct, selftest
from freqvsr.errors import ParameterError


class TestRunAll:
    def test_every_check_passes_on_a_clean_build(self):
        results = selftest.run_all()
        assert [r.name for r in results] == [name for name, _ in selftest.CHECKS]
        failed = [r for r in results if not r.passed]
        assert failed == [], failed

    def test_name_filter_selects_subset_in_order(self):
        results = selftest.run_all(names=["metric-sanity", "tokenization"])
        assert [r.name for r in results] == ["tokenization", "metric-sanity"]

    def test_unknown_name_rejected(self):
        with pytest.raises(ParameterError):
            selftest.run_all(names=["tokenizzzation"])

    def test_results_carry_timing_and_detail(self):
        result = selftest.run_all(names=["metric-sanity"])[0]
        assert result.passed
        assert result.seconds >= 0.0
        assert result.detail


class TestFaultInjection:
    def test_scaled_dct_trips_orthonormality(self):
        result = selftest.run_all(names=["dct-fidelity"], dct_fault=1.002)[0]
        assert not result.passed
        assert "dct-orthonormality" in result.detail

    def test_fault_scope_is_temporary(self):
        selftest.run_all(names=["dct-fidelity"], dct_fault=0.5)
        m = dct.transform_matrix(8)
        assert float(np.max(np.abs(m @ m.T - np.eye(8)))) < 1e-12


class TestGradcheckModes:
    def test_f64_mode_is_the_tight_one(self):
        assert selftest.GRAD_MODES["f64"] == 1e-5
        assert selftest.GRAD_MODES["f32"] > selftest.GRAD_MODES["f64"]

    def test_both_modes_pass(self):
        for mode in ("f64", "f32"):
            result = selftest.run_all(precision=mode, names=["gradchecks"])[0]
            assert result.passed, result.detail

    def test_unknown_precision_is_a_named_failure(self):
        result = selftest.run_all(precision="f16", names=["gradchecks"])[0]
        assert not result.passed
        assert "gradcheck-precision" in result.detail
