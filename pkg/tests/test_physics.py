import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from creepuq.data import apply_log10_target, generate_synthetic_creep
from creepuq.physics import (LARSON_MILLER, MANSON_HAFERD, ORR_SHERBY_DORN, Composition, PhysicsError,
                             PhysicsSpec, TtpModel, augment_features, composite_pi_loss, default_upper_bound,
                             estimate_creep_life, fit_physics_features, fit_stress_polynomial, fit_ttp,
                             invert_ttp, pi_loss_terms, stacking_fault_energy, ttp_parameter)

LM = TtpModel(LARSON_MILLER, {"c_lm": 20.0})
MH = TtpModel(MANSON_HAFERD, {"log10_t_in": 10.0, "t_in": 500.0})
OSD = TtpModel(ORR_SHERBY_DORN, {"q_over_2_3r": 0.0})


class TestTtp:
    def test_larson_miller_value(self):
        assert ttp_parameter(LM, 3.0, 1000.0) == 23000.0

    def test_manson_haferd_value(self):
        assert ttp_parameter(MH, 3.0, 900.0) == pytest.approx(-0.0175, abs=1e-15)

    def test_orr_sherby_dorn_zero_activation(self):
        assert ttp_parameter(OSD, 2.5, 800.0) == 2.5

    def test_inverse_examples(self):
        assert invert_ttp(MH, -0.0175, 900.0) == pytest.approx(3.0, abs=1e-12)
        assert invert_ttp(LM, 23000.0, 1000.0) == pytest.approx(3.0, abs=1e-12)

    def test_manson_haferd_singularity(self):
        with pytest.raises(PhysicsError):
            ttp_parameter(MH, 3.0, 500.0)

    def test_kelvin_must_be_positive(self):
        with pytest.raises(PhysicsError):
            ttp_parameter(LM, 3.0, 0.0)

    @pytest.mark.parametrize("model", [LM, MH, TtpModel(ORR_SHERBY_DORN, {"q_over_2_3r": 18000.0})])
    @given(log_tf=st.floats(-1, 8), T=st.floats(600, 1200))
    def test_round_trip(self, model, log_tf, T):
        assert abs(invert_ttp(model, ttp_parameter(model, log_tf, T), T) - log_tf) < 1e-12

    def test_stress_poly_length(self):
        with pytest.raises(PhysicsError):
            TtpModel(LARSON_MILLER, {"c_lm": 20.0}, (1.0, 2.0))


class TestStressPolynomial:
    def test_exact_linear_recovery(self):
        s = np.array([10.0, 30.0, 100.0, 200.0, 350.0])
        P = 1 + 2 * np.log10(s)
        np.testing.assert_allclose(fit_stress_polynomial(P, s), [1, 2, 0, 0], atol=1e-10)

    def test_four_points_interpolate(self, rng):
        s = np.array([50.0, 80.0, 150.0, 260.0])
        P = rng.normal(size=4)
        model = TtpModel(OSD.kind, {"q_over_2_3r": 0.0}, fit_stress_polynomial(P, s))
        np.testing.assert_allclose(model.stress_function(s), P, atol=1e-9)

    def test_rank_deficient(self):
        with pytest.raises(PhysicsError, match="rank"):
            fit_stress_polynomial(np.arange(6.0), np.full(6, 100.0))

    def test_non_positive_stress(self):
        with pytest.raises(PhysicsError):
            fit_stress_polynomial(np.arange(4.0), np.array([1.0, 2.0, 0.0, 3.0]))

    @given(st.lists(st.floats(-100, 100), min_size=4, max_size=4), st.integers(0, 2**32 - 1))
    def test_noise_free_cubic(self, coef, seed):
        s = np.random.default_rng(seed).uniform(40, 300, 50)
        L = np.log10(s)
        P = sum(c * L ** i for i, c in enumerate(coef))
        got = fit_stress_polynomial(P, s)
        np.testing.assert_allclose(got, coef, rtol=1e-8, atol=1e-8 * (1 + max(map(abs, coef))))

    def test_creep_life_estimate_examples(self):
        mh = TtpModel(MANSON_HAFERD, {"log10_t_in": 10.0, "t_in": 500.0}, (-0.0175, 0, 0, 0))
        assert estimate_creep_life(mh, 100.0, 900.0) == pytest.approx(3.0, abs=1e-12)
        lm = TtpModel(LARSON_MILLER, {"c_lm": 20.0}, (23000.0, 0, 0, 0))
        assert estimate_creep_life(lm, 100.0, 1000.0) == pytest.approx(3.0, abs=1e-12)

    def test_manson_haferd_constant_search_recovers_model(self):
        rng = np.random.default_rng(3)
        T, s = rng.uniform(873, 1073, 200), rng.uniform(40, 300, 200)
        truth = TtpModel(MANSON_HAFERD, {"log10_t_in": 15.0, "t_in": 700.0}, (-0.02, -0.01, -0.002, -0.001))
        log_tf = estimate_creep_life(truth, s, T)
        fitted = fit_ttp(MANSON_HAFERD, log_tf, T, s, "fit")
        resid = estimate_creep_life(fitted, s, T) - log_tf
        assert np.sqrt(np.mean(resid ** 2)) < 0.05


def _sfe_oracle(Ni=0, Mn=0, Cr=0, Mo=0, Si=0, C=0, N=0):
    return (39 + 1.59 * Ni - 1.34 * Mn + 0.06 * Mn * Mn - 1.75 * Cr + 0.01 * Cr * Cr + 15.21 * Mo - 5.59 * Si
            - 60.69 * (C + 1.2 * N) ** 0.5 + 26.27 * (C + 1.2 * N) * (C + 1.2 * Cr + Mn + Mo) ** 0.5
            + 0.6 * (Ni * (Cr + Mn)) ** 0.5)


class TestSfe:
    def test_base_case(self):
        assert stacking_fault_energy(Composition()) == 39.0

    def test_nickel_only(self):
        assert stacking_fault_energy(Composition(Ni=10)) == pytest.approx(54.9, abs=1e-12)

    def test_carbon_nitrogen(self):
        assert stacking_fault_energy(Composition(C=0.04, N=0.05)) == pytest.approx(20.334, abs=1e-3)

    def test_typical_316(self):
        comp = dict(Ni=12.1, Mn=1.6, Cr=17.2, Mo=2.4, Si=0.5, C=0.05, N=0.03)
        assert stacking_fault_energy(Composition(**comp)) == pytest.approx(_sfe_oracle(**comp), abs=1e-12)

    def test_negative_percent_rejected(self):
        with pytest.raises(PhysicsError):
            Composition(Ni=-1)

    @given(st.floats(0, 40), st.floats(0, 40))
    def test_monotone_in_nickel(self, a, b):
        lo, hi = sorted((a, b))
        assert stacking_fault_energy(Composition(Ni=lo)) <= stacking_fault_energy(Composition(Ni=hi))


class TestPiLoss:
    def test_feasible(self):
        assert pi_loss_terms(np.array([0.0, 3.0, 6.0]), 6.0) == (0.0, 0.0)

    def test_lower_violation(self):
        assert pi_loss_terms(np.array([-2.0, 0.0]), 6.0) == (1.0, 0.0)

    def test_upper_violation(self):
        assert pi_loss_terms(np.array([7.0]), 6.0) == (0.0, 1.0)

    def test_composite(self):
        assert composite_pi_loss(1.0, 2.0, 3.0, 0.1, 0.2) == pytest.approx(1.8)
        assert composite_pi_loss(1.5, 2.0, 3.0, 0.0, 0.0) == 1.5

    def test_negative_weight(self):
        with pytest.raises(PhysicsError):
            composite_pi_loss(1.0, 0.0, 0.0, -0.1, 0.0)

    def test_default_upper_bound(self):
        assert default_upper_bound([1.0, 4.5, 3.0]) == 5.5


class TestAugment:
    def test_ttp_feature_equals_noise_free_target(self):
        ds = apply_log10_target(generate_synthetic_creep(100, 0.0, 7))
        g = ds.metadata["generator"]
        ttp = TtpModel(LARSON_MILLER, {"c_lm": g["c_lm"]}, tuple(g["stress_poly"]))
        out = augment_features(ds, ttp, include_sfe=False)
        assert out.n_features == ds.n_features + 1
        np.testing.assert_allclose(out.features[:, -1], ds.target, atol=1e-12)

    def test_sfe_column_with_zero_composition(self):
        ds = apply_log10_target(generate_synthetic_creep(5, 0.1, 0))
        spec = PhysicsSpec(include_sfe=True, composition_columns={})
        out = augment_features(ds, None, include_sfe=True, spec=spec)
        np.testing.assert_array_equal(out.column("sfe"), 39.0)

    def test_sfe_uses_named_columns(self):
        ds = apply_log10_target(generate_synthetic_creep(5, 0.1, 0))
        spec = PhysicsSpec(include_sfe=True, composition_columns={"Ni": "Ni", "Cr": "Cr", "Mo": "Mo", "Mn": "Mn"})
        out = augment_features(ds, None, include_sfe=True, spec=spec)
        want = [_sfe_oracle(Ni=r[2], Cr=r[3], Mo=r[4], Mn=r[5]) for r in ds.features]
        np.testing.assert_allclose(out.column("sfe"), want, atol=1e-12)

    def test_missing_columns(self):
        ds = apply_log10_target(generate_synthetic_creep(5, 0.1, 0))
        with pytest.raises(PhysicsError):
            augment_features(ds, None, include_sfe=True)

    def test_unit_mismatch_rejected(self):
        ds = apply_log10_target(generate_synthetic_creep(20, 0.1, 0))
        ttp = fit_physics_features(ds, PhysicsSpec(ttp_kind=LARSON_MILLER))
        from dataclasses import replace
        with pytest.raises(PhysicsError, match="unit"):
            augment_features(replace(ds, metadata={**ds.metadata, "temperature_unit": "C"}), ttp)

    def test_fit_needs_log_target(self):
        with pytest.raises(PhysicsError):
            fit_physics_features(generate_synthetic_creep(20, 0.1, 0), PhysicsSpec(ttp_kind=LARSON_MILLER))

    def test_fitted_lm_recovers_generator(self):
        ds = apply_log10_target(generate_synthetic_creep(300, 0.0, 1))
        ttp = fit_physics_features(ds, PhysicsSpec(ttp_kind=LARSON_MILLER, ttp_constants={"c_lm": 20.0}))
        np.testing.assert_allclose(ttp.stress_poly, ds.metadata["generator"]["stress_poly"], rtol=1e-8)
        assert math.isclose(ttp.constants["c_lm"], 20.0)
