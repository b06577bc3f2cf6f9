import numpy as np
import pytest
from numpy.testing import assert_allclose

from gexnet.data import GammaRecord
from gexnet.descriptors import build_feature_table
from gexnet.errors import DataValidationError, DomainError, UnitMismatchError
from gexnet.thermo import (
    DEFAULT_MAX_PRESSURE,
    AntoineParams,
    Pressure,
    ReferenceGeModel,
    _pair_latents,
    antoine_pressure,
    assign_reference_model,
    bubble_point_isothermal,
    gamma_from_vle,
    gamma_record_from_vle_point,
    load_antoine_table,
    reference_gammas,
    synthesize_dataset,
)

ANTOINE_SIMPLE = AntoineParams(A=5.0, B=1000.0, C=-50.0, T_min=250.0, T_max=400.0)
KPA_CUTOFF = Pressure(1000.0, "kPa")


def test_gamma_from_vle_frozen_value():
    # gamma = y * p / (x * pS) = (0.6 * 100) / (0.4 * 120) = 1.25
    assert_allclose(gamma_from_vle(100.0, 0.6, 0.4, 120.0), 1.25, rtol=0, atol=1e-15)


def test_gamma_from_vle_validation():
    with pytest.raises(DomainError):
        gamma_from_vle(100.0, 0.6, 0.0, 120.0)
    with pytest.raises(DomainError):
        gamma_from_vle(100.0, 0.6, 1.5, 120.0)
    with pytest.raises(DomainError):
        gamma_from_vle(100.0, -0.1, 0.4, 120.0)
    with pytest.raises(DomainError):
        gamma_from_vle(-1.0, 0.6, 0.4, 120.0)
    with pytest.raises(DomainError):
        gamma_from_vle(100.0, 0.6, 0.4, 0.0)


def test_antoine_frozen_value():
    # log10(p) = 5 - 1000 / (-50 + 300) = 1, so p = 10 kPa
    p = antoine_pressure(ANTOINE_SIMPLE, 300.0)
    assert isinstance(p, Pressure)
    assert p.unit == "kPa"
    assert_allclose(p.value, 10.0, rtol=0, atol=1e-12)


def test_antoine_b_zero_constant():
    params = AntoineParams(A=2.0, B=0.0, C=0.0, T_min=100.0, T_max=500.0, unit="bar")
    p = antoine_pressure(params, 123.0)
    assert p.unit == "bar"
    assert_allclose(p.value, 100.0, rtol=0, atol=1e-10)


def test_antoine_singular_temperature():
    params = AntoineParams(A=5.0, B=1000.0, C=-300.0, T_min=250.0, T_max=400.0)
    with pytest.raises(DomainError):
        antoine_pressure(params, 300.0)


def test_antoine_out_of_range_warns():
    with pytest.warns(UserWarning):
        antoine_pressure(ANTOINE_SIMPLE, 200.0)
    with pytest.warns(UserWarning):
        antoine_pressure(ANTOINE_SIMPLE, 450.0)


def test_antoine_params_validation():
    with pytest.raises(DomainError):
        AntoineParams(A=np.nan, B=1.0, C=0.0, T_min=100.0, T_max=500.0)
    with pytest.raises(DomainError):
        AntoineParams(A=5.0, B=1.0, C=0.0, T_min=500.0, T_max=100.0)


def test_pressure_unit_mismatch():
    with pytest.raises(UnitMismatchError):
        gamma_from_vle(Pressure(100.0, "kPa"), 0.6, 0.4, Pressure(1.2, "bar"))
    with pytest.raises(UnitMismatchError):
        gamma_from_vle(Pressure(100.0, "kPa"), 0.6, 0.4, 120.0)
    with pytest.raises(UnitMismatchError):
        gamma_from_vle(100.0, 0.6, 0.4, Pressure(120.0, "kPa"))
    # Matching tagged units work and give the same answer as untagged floats.
    val = gamma_from_vle(Pressure(100.0, "kPa"), 0.6, 0.4, Pressure(120.0, "kPa"))
    assert_allclose(val, 1.25, rtol=0, atol=1e-15)


def test_bubble_point_ideal_mixture():
    p, y1 = bubble_point_isothermal(0.5, 1.0, 1.0, 100.0, 50.0)
    assert_allclose(p, 75.0, rtol=0, atol=1e-12)
    assert_allclose(y1, 2.0 / 3.0, rtol=0, atol=1e-15)


def test_bubble_point_pure_ends():
    p, y1 = bubble_point_isothermal(1.0, 1.0, 1.3, 100.0, 50.0)
    assert_allclose(p, 100.0, rtol=0, atol=1e-12)
    assert_allclose(y1, 1.0, rtol=0, atol=1e-15)
    p, y1 = bubble_point_isothermal(0.0, 1.3, 1.0, 100.0, 50.0)
    assert_allclose(p, 50.0, rtol=0, atol=1e-12)
    assert_allclose(y1, 0.0, rtol=0, atol=1e-15)


def test_bubble_point_tagged_pressures():
    p, y1 = bubble_point_isothermal(
        0.5, 1.0, 1.0, Pressure(100.0, "kPa"), Pressure(50.0, "kPa")
    )
    assert isinstance(p, Pressure)
    assert p.unit == "kPa"
    assert_allclose(p.value, 75.0, rtol=0, atol=1e-12)
    with pytest.raises(UnitMismatchError):
        bubble_point_isothermal(0.5, 1.0, 1.0, Pressure(100.0, "kPa"), 50.0)


def test_bubble_point_closure_and_roundtrip():
    rng = np.random.default_rng(7)
    for _ in range(200):
        x1 = float(rng.uniform(0.02, 0.98))
        g1 = float(np.exp(rng.uniform(-0.5, 0.5)))
        g2 = float(np.exp(rng.uniform(-0.5, 0.5)))
        p1s = float(rng.uniform(10.0, 200.0))
        p2s = float(rng.uniform(10.0, 200.0))
        p, y1 = bubble_point_isothermal(x1, g1, g2, p1s, p2s)
        # Mole fractions in the vapor close to one.
        y2 = (1.0 - x1) * g2 * p2s / p
        assert abs((y1 + y2) - 1.0) < 1e-12
        # Inverting through the modified Raoult relation recovers the gammas.
        assert abs(gamma_from_vle(p, y1, x1, p1s) - g1) < 1e-12 * max(1.0, g1)
        assert abs(gamma_from_vle(p, y2, 1.0 - x1, p2s) - g2) < 1e-12 * max(1.0, g2)


def test_antoine_table_roundtrip(tmp_path):
    path = tmp_path / "antoine.csv"
    path.write_text(
        "smiles,A,B,C,Tmin_K,Tmax_K,unit\n"
        "CCO,5.0,1000.0,-50.0,250.0,400.0,kPa\n"
        "C,4.2,700.0,-10.0,90.0,190.0,bar\n"
    )
    table = load_antoine_table(path)
    assert set(table) == {"CCO", "C"}
    assert table["CCO"] == ANTOINE_SIMPLE
    assert table["C"].unit == "bar"


def test_gamma_record_from_vle_point_basic():
    rec = gamma_record_from_vle_point(
        "CCO", "C", 300.0, Pressure(10.0, "kPa"), 0.4, 0.6,
        ANTOINE_SIMPLE, ANTOINE_SIMPLE, max_pressure=KPA_CUTOFF,
    )
    assert isinstance(rec, GammaRecord)
    # Both saturation pressures equal 10 kPa at 300 K, so
    # gamma1 = 0.6*10/(0.4*10) = 1.5 and gamma2 = 0.4*10/(0.6*10) = 2/3.
    assert_allclose(rec.ln_gamma1, np.log(1.5), rtol=0, atol=1e-14)
    assert_allclose(rec.ln_gamma2, np.log(2.0 / 3.0), rtol=0, atol=1e-14)
    assert rec.system_id == "C|CCO"
    assert rec.source_tag == "vle"


def test_gamma_record_pressure_cutoff():
    assert DEFAULT_MAX_PRESSURE == Pressure(10.0, "bar")
    rec = gamma_record_from_vle_point(
        "CCO", "C", 300.0, Pressure(15.0, "bar"), 0.4, 0.6,
        ANTOINE_SIMPLE, ANTOINE_SIMPLE,
    )
    assert rec is None
    rec = gamma_record_from_vle_point(
        "CCO", "C", 300.0, Pressure(1500.0, "kPa"), 0.4, 0.6,
        ANTOINE_SIMPLE, ANTOINE_SIMPLE, max_pressure=KPA_CUTOFF,
    )
    assert rec is None


def test_gamma_record_requires_tagged_pressure():
    with pytest.raises(UnitMismatchError):
        gamma_record_from_vle_point(
            "CCO", "C", 300.0, 10.0, 0.4, 0.6, ANTOINE_SIMPLE, ANTOINE_SIMPLE
        )


def test_gamma_record_one_sided_at_pure_limit():
    rec = gamma_record_from_vle_point(
        "CCO", "C", 300.0, Pressure(10.0, "kPa"), 0.0, 0.0,
        ANTOINE_SIMPLE, ANTOINE_SIMPLE, max_pressure=KPA_CUTOFF,
    )
    assert rec.ln_gamma1 is None
    assert rec.ln_gamma2 is not None
    rec = gamma_record_from_vle_point(
        "CCO", "C", 300.0, Pressure(10.0, "kPa"), 1.0, 1.0,
        ANTOINE_SIMPLE, ANTOINE_SIMPLE, max_pressure=KPA_CUTOFF,
    )
    assert rec.ln_gamma1 is not None
    assert rec.ln_gamma2 is None


MARGULES_ONE = ReferenceGeModel(kind="margules", params={"A12": 1.0})


def test_margules_frozen_values():
    ln1, ln2 = reference_gammas(MARGULES_ONE, 0.3)
    # ln gamma1 = A12 * x2^2 = 0.49 and ln gamma2 = A12 * x1^2 = 0.09.
    assert_allclose(ln1, 0.49, rtol=0, atol=1e-15)
    assert_allclose(ln2, 0.09, rtol=0, atol=1e-15)


def test_margules_array_input():
    x = np.array([0.0, 0.3, 1.0])
    ln1, ln2 = reference_gammas(MARGULES_ONE, x)
    assert_allclose(ln1, [1.0, 0.49, 0.0], rtol=0, atol=1e-15)
    assert_allclose(ln2, [0.0, 0.09, 1.0], rtol=0, atol=1e-15)


def test_nrtl_zero_tau_is_ideal():
    model = ReferenceGeModel(
        kind="nrtl", params={"tau12": 0.0, "tau21": 0.0, "alpha": 0.3}
    )
    ln1, ln2 = reference_gammas(model, 0.37)
    assert ln1 == 0.0
    assert ln2 == 0.0


def test_nrtl_frozen_value():
    model = ReferenceGeModel(
        kind="nrtl", params={"tau12": 0.5, "tau21": -0.2, "alpha": 0.3}
    )
    ln1, ln2 = reference_gammas(model, 0.4)
    g12 = np.exp(-0.3 * 0.5)
    g21 = np.exp(-0.3 * -0.2)
    x1, x2 = 0.4, 0.6
    expect1 = x2 ** 2 * (
        -0.2 * (g21 / (x1 + x2 * g21)) ** 2 + 0.5 * g12 / (x2 + x1 * g12) ** 2
    )
    expect2 = x1 ** 2 * (
        0.5 * (g12 / (x2 + x1 * g12)) ** 2 + -0.2 * g21 / (x1 + x2 * g21) ** 2
    )
    assert_allclose(ln1, expect1, rtol=0, atol=1e-15)
    assert_allclose(ln2, expect2, rtol=0, atol=1e-15)


def test_reference_model_validation():
    with pytest.raises(DomainError):
        ReferenceGeModel(kind="nrtl", params={"tau12": 0.1, "tau21": 0.1, "alpha": 0.0})
    with pytest.raises(DomainError):
        ReferenceGeModel(kind="nrtl", params={"tau12": 0.1, "tau21": 0.1, "alpha": 1.5})
    with pytest.raises(DomainError):
        ReferenceGeModel(kind="wilson", params={})
    with pytest.raises(DomainError):
        ReferenceGeModel(kind="margules", params={})
    with pytest.raises(DomainError):
        ReferenceGeModel(kind="nrtl", params={"tau12": 0.1})
    with pytest.raises(DomainError):
        reference_gammas(MARGULES_ONE, 1.2)


def test_reference_models_satisfy_gibbs_duhem():
    """Finite-difference Gibbs-Duhem check on 1000 random reference models."""
    rng = np.random.default_rng(99)
    h = 1e-5
    worst = 0.0
    for _ in range(1000):
        if rng.uniform() < 0.5:
            model = ReferenceGeModel(
                kind="margules", params={"A12": float(rng.uniform(-2.0, 2.0))}
            )
        else:
            model = ReferenceGeModel(
                kind="nrtl",
                params={
                    "tau12": float(rng.uniform(-1.5, 1.5)),
                    "tau21": float(rng.uniform(-1.5, 1.5)),
                    "alpha": float(rng.uniform(0.2, 0.47)),
                },
            )
        x1 = float(rng.uniform(0.05, 0.95))
        lp1, lp2 = reference_gammas(model, x1 + h)
        lm1, lm2 = reference_gammas(model, x1 - h)
        d1 = (lp1 - lm1) / (2.0 * h)
        d2 = (lp2 - lm2) / (2.0 * h)
        resid = abs(x1 * d1 + (1.0 - x1) * d2)
        worst = max(worst, resid)
    assert worst < 1e-8, f"worst Gibbs-Duhem residual {worst:g}"


def test_assign_reference_model_swap_symmetry(small_table):
    """Swapping the pair mirrors tau12/tau21 and preserves A12 and alpha."""
    smiles = sorted(small_table.smiles)
    proj = _pair_latents(10, small_table.dim)
    v1, v2 = small_table[smiles[0]], small_table[smiles[1]]
    fwd = assign_reference_model("nrtl", v1, v2, proj, 320.0)
    rev = assign_reference_model("nrtl", v2, v1, proj, 320.0)
    assert fwd.params["tau12"] == rev.params["tau21"]
    assert fwd.params["tau21"] == rev.params["tau12"]
    assert fwd.params["alpha"] == rev.params["alpha"]
    fwd_m = assign_reference_model("margules", v1, v2, proj, 320.0)
    rev_m = assign_reference_model("margules", v2, v1, proj, 320.0)
    assert fwd_m.params["A12"] == rev_m.params["A12"]


def test_assign_reference_model_seed_sensitivity(small_table):
    smiles = sorted(small_table.smiles)
    v1, v2 = small_table[smiles[0]], small_table[smiles[1]]
    m1 = assign_reference_model("mixed", v1, v2, _pair_latents(10, small_table.dim), 300.0)
    m2 = assign_reference_model("mixed", v1, v2, _pair_latents(10, small_table.dim), 300.0)
    assert m1.kind == m2.kind and m1.params == m2.params
    m3 = assign_reference_model("mixed", v1, v2, _pair_latents(11, small_table.dim), 300.0)
    assert (m3.kind != m1.kind) or (m3.params != m1.params)


def test_synthesize_dataset_counts_and_determinism():
    table = build_feature_table(
        ["C", "CC", "CCC", "CCO", "CCN", "CCCl", "c1ccccc1", "CCOC", "CO", "CN"],
        dim=32,
    )
    t_grid = [298.15, 323.15]
    x_grid = np.linspace(0.1, 0.9, 5)
    recs_a = synthesize_dataset(table, "mixed", t_grid, x_grid, 0.01, seed=3)
    recs_b = synthesize_dataset(table, "mixed", t_grid, x_grid, 0.01, seed=3)
    # 10 components give 45 unordered pairs.
    assert len({r.system_id for r in recs_a}) == 45
    assert len(recs_a) == 45 * len(t_grid) * len(x_grid)
    assert recs_a == recs_b
    recs_c = synthesize_dataset(table, "mixed", t_grid, x_grid, 0.01, seed=4)
    assert any(ra != rc for ra, rc in zip(recs_a, recs_c))
    assert all(r.source_tag == "synth-mixed" for r in recs_a)


def test_synthesize_noise_free_matches_reference(small_table):
    recs = synthesize_dataset(
        small_table, "nrtl", [310.0], np.array([0.25, 0.5, 0.75]), 0.0, seed=5
    )
    proj = _pair_latents(5, small_table.dim)
    for rec in recs:
        model = assign_reference_model(
            "nrtl", small_table[rec.smiles_1], small_table[rec.smiles_2], proj, rec.T
        )
        ln1, ln2 = reference_gammas(model, rec.x1)
        assert_allclose(rec.ln_gamma1, ln1, rtol=0, atol=1e-12)
        assert_allclose(rec.ln_gamma2, ln2, rtol=0, atol=1e-12)


def test_synthesize_requires_two_components():
    table = build_feature_table(["CCO"], dim=32)
    with pytest.raises(DataValidationError):
        synthesize_dataset(table, "mixed", [300.0], np.array([0.5]), 0.0, seed=1)


def test_synthesize_validates_grids(small_table):
    with pytest.raises(DomainError):
        synthesize_dataset(small_table, "mixed", [], np.array([0.5]), 0.0, seed=1)
    with pytest.raises(DomainError):
        synthesize_dataset(small_table, "mixed", [300.0], np.array([]), 0.0, seed=1)
    with pytest.raises(DomainError):
        synthesize_dataset(small_table, "mixed", [300.0], np.array([0.5]), -0.1, seed=1)
