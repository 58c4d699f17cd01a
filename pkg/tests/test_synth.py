import numpy as np
import pytest

from dcdetector.errors import ParameterError, SpecError
from dcdetector.synth import (AnomalyInjection, SynthSpec, base_signal, generate, inject_group,
                              inject_seasonal, inject_trend)


def spec(injections=(), **kw):
    base = dict(length=400, channels=2, base_freqs=[1.5, 4.0], noise_sigma=0.1, seed=3)
    base.update(kw)
    return SynthSpec(injections=list(injections), **base)


def test_no_injections_all_normal():
    ds = generate(spec())
    assert ds.labels.sum() == 0
    assert ds.values.shape == (400, 2)


def test_no_injections_reproduces_base_exactly():
    s = spec()
    np.testing.assert_array_equal(generate(s).values, base_signal(s)[0])


def test_untouched_region_matches_base():
    s = spec([AnomalyInjection("trend", 100, 30, 3.0)])
    ds, base = generate(s), base_signal(s)[0]
    mask = np.ones(400, bool)
    mask[100:130] = False
    np.testing.assert_array_equal(ds.values[mask], base[mask])
    np.testing.assert_array_equal(ds.values[:, 1], base[:, 1])  # only channel 0 by default


def test_global_point_margin():
    ds = generate(spec([AnomalyInjection("global_point", 50, 1, 8.0)], noise_sigma=0.0))
    x = ds.values[:, 0]
    clean = base_signal(spec(noise_sigma=0.0))[0][:, 0]
    local = np.r_[clean[40:50], clean[51:61]].mean()
    assert abs(x[50] - local) > 5 * clean.std()
    assert ds.labels[50] == 1 and ds.labels.sum() == 1


def test_determinism():
    s = spec([AnomalyInjection("seasonal", 10, 40, 3.0), AnomalyInjection("global_point", 200)])
    a, b = generate(s), generate(s)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_trend_zero_magnitude_is_identity_but_labelled():
    s = spec([AnomalyInjection("trend", 20, 10, 0.0)])
    ds = generate(s)
    np.testing.assert_array_equal(ds.values, base_signal(s)[0])
    assert ds.labels[20:30].all() and ds.labels.sum() == 10


def test_seasonal_unit_multiplier_is_identity():
    s = spec([AnomalyInjection("seasonal", 20, 50, 1.0)])
    np.testing.assert_array_equal(generate(s).values, base_signal(s)[0])


def test_group_is_flat():
    s = spec([AnomalyInjection("group", 100, 20, 0.0)])
    x, base = generate(s).values[:, 0], base_signal(s)[0][:, 0]
    assert x[100:120].var() < 0.1 * base[100:120].var()


def test_label_count_is_sum_of_lengths():
    inj = [AnomalyInjection("global_point", 5), AnomalyInjection("contextual_point", 30, 1, 4.0),
           AnomalyInjection("seasonal", 50, 40, 2.0), AnomalyInjection("group", 120, 25),
           AnomalyInjection("trend", 200, 60, 3.0, channels=[0, 1])]
    ds = generate(spec(inj))
    assert ds.labels.sum() == 1 + 1 + 40 + 25 + 60
    assert ds.anomaly_ratio == pytest.approx(127 / 400)


def test_overlap_rejected():
    with pytest.raises(SpecError, match=r"injections\[0\].*injections\[1\]"):
        generate(spec([AnomalyInjection("group", 10, 20), AnomalyInjection("trend", 25, 10, 1.0)]))


@pytest.mark.parametrize("inj, field", [
    (AnomalyInjection("global_point", 10, 3), "injections[0].length"),
    (AnomalyInjection("trend", 10, 1, 1.0), "injections[0].length"),
    (AnomalyInjection("spike", 10), "injections[0].kind"),
    (AnomalyInjection("group", 390, 20), "injections[0].start"),
    (AnomalyInjection("group", 10, 20, channels=[5]), "injections[0].channels"),
])
def test_invalid_injections(inj, field):
    with pytest.raises(SpecError) as err:
        generate(spec([inj]))
    assert err.value.field == field


def test_from_dict_field_paths():
    with pytest.raises(SpecError) as err:
        SynthSpec.from_dict({"length": 100, "injections": [{"kind": "group"}]})
    assert err.value.field == "injections[0].start"
    with pytest.raises(SpecError) as err:
        SynthSpec.from_dict({"length": "long"})
    assert err.value.field == "length"


def test_mutators_reject_out_of_bounds():
    x = np.zeros(10)
    with pytest.raises(ParameterError):
        inject_group(x, 8, 5)
    with pytest.raises(ParameterError):
        inject_trend(x, -1, 3, 1.0)
    with pytest.raises(ParameterError):
        inject_seasonal(x, 5, 6, 2.0, [1.0], [0.0])
