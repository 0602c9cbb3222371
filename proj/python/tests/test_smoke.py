# Copyright 2026 The dpsc Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math
import pathlib

import numpy as np
import pytest

import dpsc

DATA = pathlib.Path(__file__).resolve().parents[2] / "tests" / "data"


def test_synth_case_round_trips_through_json():
    case = dpsc.synth_case(3)
    assert case.horizon == 24
    assert case.elec_loads_mwh.shape == (len(case.elec_zones), 24)
    assert dpsc.parse_case(case.to_json()) == case


def test_load_case_and_errors():
    case = dpsc.load_case(str(DATA / "two_zone_case.json"))
    assert case.elec_zones
    with pytest.raises(dpsc.ParseError):
        dpsc.parse_case("{not json")
    with pytest.raises(dpsc.Error):
        dpsc.load_case(str(DATA / "missing.json"))


def test_solve_lp():
    r = dpsc.solve_lp(
        c=np.array([-1.0, -2.0, 0.0]),
        a=np.array([[1.0, 1.0, 1.0]]),
        b=np.array([4.0]),
        lo=np.zeros(3),
        hi=np.array([3.0, 2.0, math.inf]),
    )
    assert r["status"] == "optimal"
    assert r["obj"] == pytest.approx(-6.0)
    np.testing.assert_allclose(r["x"], [2.0, 2.0, 0.0], atol=1e-12)


def test_privacy_params():
    p = dpsc.PrivacyParams(alpha_mwh=10.0)
    assert p.scale_mwh == pytest.approx(240.0)
    p.epsilon = 2.0
    assert p.scale_mwh == pytest.approx(120.0)
    assert p.leader == "enumeration"
    with pytest.raises(dpsc.ValidationError):
        dpsc.PrivacyParams(epsilon=-1.0)
    with pytest.raises(dpsc.ValidationError):
        dpsc.PrivacyParams(leader="simplex")


def test_laplace_from_uniform():
    assert dpsc.laplace_from_uniform(2.0, 0.5) == pytest.approx(0.0)
    assert dpsc.laplace_from_uniform(1.0, 0.75) == pytest.approx(math.log(2.0))


def test_obfuscation_is_deterministic_in_the_seed():
    loads = dpsc.synth_case(0).elec_loads_mwh
    p = dpsc.PrivacyParams(alpha_mwh=10.0, seed=5)
    a = dpsc.obfuscate(loads, p)
    np.testing.assert_array_equal(a, dpsc.obfuscate(loads, p))
    p.seed = 6
    assert not np.array_equal(a, dpsc.obfuscate(loads, p))


def test_clear_and_zero_noise_ppsm():
    case = dpsc.synth_case(1)
    out = dpsc.clear(case)
    assert out["price_eur_per_mwh"].shape == (len(case.elec_zones), case.horizon)
    assert math.isfinite(out["leader_cost_eur"])
    r = dpsc.run_ppsm(case, dpsc.PrivacyParams(), zero_noise=True)
    np.testing.assert_allclose(r["d_hat_mwh"], case.elec_loads_mwh, atol=1e-6)
    assert r["price_residual_eur_per_mwh"] <= 1e-6
    m = dpsc.cost_of_privacy(case, r["d_hat_mwh"])
    assert not m["failed"]
    assert m["delta_d_mwh"] == pytest.approx(0.0, abs=1e-5)


def test_ppsm_beats_laplace_on_a_small_table():
    rows = dpsc.table1(alphas_mwh=[10.0], seeds=2)
    by_mech = {r["mechanism"]: r for r in rows}
    assert set(by_mech) == {"laplace", "ppsm"}
    assert by_mech["ppsm"]["mean_delta_d"] < by_mech["laplace"]["mean_delta_d"]


def test_stressed_case_scales_loads():
    case = dpsc.synth_case(2)
    s = case.stressed(1.3, 1.1)
    np.testing.assert_allclose(s.elec_loads_mwh, 1.1 * case.elec_loads_mwh)
    np.testing.assert_allclose(s.heat_loads_mwh, 1.3 * case.heat_loads_mwh)
