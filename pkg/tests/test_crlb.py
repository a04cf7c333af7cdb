import math

import numpy as np
import pytest

from pdoa import (
    ChannelParams,
    ProtocolConfig,
    crlb_closed_form,
    default_clock,
    default_synthesizer,
    derivative_self_check,
    fisher_numeric,
)

DT = 80e-6
DF1 = 0.5e6

# frozen evaluations of the closed form at 10 dB, P = N = 10
VAR_ETA_10DB = 9.594809057039562e-10
SIGMA_ETA_10DB = 3.097548878878195e-05
VAR_D_10DB_C_EXACT = 0.13797414926408366
VAR_D_10DB_C_3E8 = 0.1381652504213697


class TestClosedForm:
    def test_desk_values_exact_c(self):
        r = crlb_closed_form(10.0, DF1, DT, 10, 10)
        assert r.var_eta == pytest.approx(VAR_ETA_10DB, rel=1e-12)
        assert r.var_d == pytest.approx(VAR_D_10DB_C_EXACT, rel=1e-12)
        assert r.sigma_eta == pytest.approx(SIGMA_ETA_10DB, rel=1e-12)
        # rounded three-figure values
        assert r.sigma_eta == pytest.approx(3.098e-5, rel=1e-3)
        assert r.sigma_eta * 1e6 == pytest.approx(31.0, rel=2e-3)

    def test_desk_values_rounded_c(self):
        r = crlb_closed_form(10.0, DF1, DT, 10, 10, c=3e8)
        assert r.var_d == pytest.approx(VAR_D_10DB_C_3E8, rel=1e-12)
        assert r.sigma_d == pytest.approx(0.372, rel=1e-3)

    def test_ten_db_step_scales_by_ten(self):
        lo = crlb_closed_form(10.0, DF1, DT, 10, 10)
        hi = crlb_closed_form(20.0, DF1, DT, 10, 10)
        assert lo.var_eta / hi.var_eta == pytest.approx(10.0, rel=1e-12)
        assert lo.var_d / hi.var_d == pytest.approx(10.0, rel=1e-12)

    def test_scaling_laws(self):
        base = crlb_closed_form(10.0, DF1, DT, 10, 10)
        p_doubled = crlb_closed_form(10.0, DF1, DT, 20, 10)
        n_doubled = crlb_closed_form(10.0, DF1, DT, 10, 20)
        assert p_doubled.var_eta / base.var_eta == pytest.approx(
            (10 * 99) / (20 * 399), rel=1e-12
        )
        assert n_doubled.var_d / base.var_d == pytest.approx(
            (10 * 99) / (20 * 399), rel=1e-12
        )
        # var_eta does not depend on N beyond the PN factor
        assert n_doubled.var_eta / base.var_eta == pytest.approx(0.5, rel=1e-12)

    def test_rejects_small_grids_and_bad_snr(self):
        with pytest.raises(ValueError):
            crlb_closed_form(10.0, DF1, DT, 1, 10)
        with pytest.raises(ValueError):
            crlb_closed_form(10.0, DF1, DT, 10, 1)
        with pytest.raises(ValueError):
            crlb_closed_form(math.inf, DF1, DT, 10, 10)


class TestFisherNumeric:
    def fisher(self, p=10, n=10, snr_db=10.0, include_common_phase=True, d01=140.0):
        return fisher_numeric(
            default_clock(),
            default_synthesizer(),
            ChannelParams(d01),
            ProtocolConfig(n_freq=n, p_time=p, dt=DT),
            snr_db,
            include_common_phase=include_common_phase,
        )

    @pytest.mark.parametrize("p,n", [(10, 10), (2, 2), (4, 8), (8, 4)])
    def test_matches_closed_form_within_five_percent(self, p, n):
        fr = self.fisher(p=p, n=n)
        cf = crlb_closed_form(10.0, DF1, DT, p, n)
        assert fr.var_eta == pytest.approx(cf.var_eta, rel=0.05)
        assert fr.var_d == pytest.approx(cf.var_d, rel=0.05)

    def test_common_phase_nuisance_is_required_for_agreement(self):
        # with the absolute carrier phase treated as known, the skew bound
        # collapses well below the closed form
        fr = self.fisher(include_common_phase=False)
        cf = crlb_closed_form(10.0, DF1, DT, 10, 10)
        assert fr.var_eta < 0.7 * cf.var_eta

    def test_matrix_symmetric_positive_definite(self):
        fim = self.fisher().matrix
        np.testing.assert_allclose(fim, fim.T, rtol=1e-12)
        assert np.linalg.eigvalsh(fim).min() > 0

    def test_doubling_epochs_shrinks_skew_variance(self):
        ratio = self.fisher(p=20).var_eta / self.fisher(p=10).var_eta
        assert ratio == pytest.approx((10 * 99) / (20 * 399), rel=1e-2)

    def test_snr_scaling(self):
        assert self.fisher(snr_db=10.0).var_eta / self.fisher(
            snr_db=20.0
        ).var_eta == pytest.approx(10.0, rel=1e-12)

    def test_rejects_degenerate_grid(self):
        with pytest.raises(ValueError):
            self.fisher(p=1)

    def test_analytic_derivatives_match_finite_differences(self):
        dev = derivative_self_check(
            default_clock(),
            default_synthesizer(),
            ChannelParams(140.0),
            ProtocolConfig(n_freq=10, p_time=10, dt=DT),
        )
        assert dev < 1e-5
