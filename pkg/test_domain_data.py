"""
Тесты постановки задачи: согласование данных, нормы и условие pq ≤ 1/4
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from broadwell.domain_data import (
    ProblemData,
    c1_norm,
    check_compatibility,
    compute_p,
    compute_p_prime,
    compute_q,
    gate_report,
    max_admissible_scale,
    radius_admissible,
)
from broadwell.fields import DataField
from broadwell.models import ModelParams, SpaceTimeBox
from conftest import EPS_GATE, smooth_problem, unit_box, unit_params

UNIT = (0.0, 1.0)


class TestBox:

    def test_invalid_extents(self):
        with pytest.raises(ValidationError):
            SpaceTimeBox(a1=1.0, b1=0.0, a2=0.0, b2=1.0, T=1.0)
        with pytest.raises(ValidationError):
            SpaceTimeBox(a1=0.0, b1=1.0, a2=0.0, b2=0.0, T=1.0)
        with pytest.raises(ValidationError):
            SpaceTimeBox(a1=0.0, b1=1.0, a2=0.0, b2=1.0, T=0.0)

    def test_field_domains_must_match(self, box, params):
        data = ProblemData.uniform(box, params, 0.1)
        wrong = DataField.constant(0.1, (0.0, 2.0), UNIT)
        with pytest.raises(ValidationError):
            ProblemData(box=box, params=params, init=(wrong,) + data.init[1:], inflow=data.inflow)

    def test_theta_must_be_zero(self, box):
        with pytest.raises(ValidationError):
            ProblemData.uniform(box, ModelParams(c=1.0, S=1.0, theta=0.1), 0.0)


class TestCompatibility:
    """Согласование начальных и граничных данных"""

    def test_zero_and_constant_data(self, zero_data, eps_data):
        assert check_compatibility(zero_data) == []
        assert check_compatibility(eps_data) == []

    def test_smooth_data_is_compatible(self, smooth_data):
        assert check_compatibility(smooth_data) == []

    def test_mismatch_on_species_one_edge(self, box, params):
        data = ProblemData.uniform(box, params, 1.0)
        inflow1 = DataField.constant(2.0, (0.0, box.T), (box.a2, box.b2), name="inflow1")
        broken = ProblemData(box=box, params=params, init=data.init, inflow=(inflow1,) + data.inflow[1:])
        violations = check_compatibility(broken)
        assert violations
        assert {v.species for v in violations} == {1}
        assert all(v.edge == "x=a1" for v in violations)
        assert all(v.magnitude == pytest.approx(1.0) for v in violations)

    def test_invariant_under_common_offset(self, box, params):
        base = smooth_problem(box, params)
        shifted = ProblemData(
            box=box, params=params,
            init=tuple(DataField.from_function(lambda a, b, f=f: f.evaluate(a, b) + 0.5,
                                               f.alpha_range, f.beta_range) for f in base.init),
            inflow=tuple(DataField.from_function(lambda a, b, f=f: f.evaluate(a, b) + 0.5,
                                                 f.alpha_range, f.beta_range) for f in base.inflow),
        )
        assert check_compatibility(shifted) == check_compatibility(base) == []


class TestNorms:
    """‖·‖₁, p, p′ и q"""

    def test_c1_norm_examples(self):
        assert c1_norm(DataField.constant(0.0, UNIT, UNIT)) == 0.0
        assert c1_norm(DataField.constant(5.0, UNIT, UNIT)) == 5.0
        product = DataField.from_function(lambda a, b: a * b, UNIT, UNIT,
                                          d_alpha=lambda a, b: b, d_beta=lambda a, b: a)
        assert c1_norm(product) == pytest.approx(1.0)

    def test_compute_p(self):
        assert compute_p(unit_box(), unit_params()) == pytest.approx(36.0)
        box = SpaceTimeBox(a1=0.0, b1=2.0, a2=0.0, b2=4.0, T=0.5)
        assert compute_p(box, ModelParams(c=2.0, S=0.25)) == pytest.approx(10.0)
        assert compute_p(unit_box(), unit_params(S=0.0)) == 0.0

    def test_compute_p_prime(self):
        assert compute_p_prime(unit_box(), unit_params()) == pytest.approx(4.0)

    def test_p_is_monotone_in_extents(self):
        params = unit_params()
        base = compute_p(unit_box(), params)
        for bigger in (SpaceTimeBox(a1=0, b1=1, a2=0, b2=1, T=2),
                       SpaceTimeBox(a1=0, b1=3, a2=0, b2=1, T=1),
                       SpaceTimeBox(a1=0, b1=1, a2=-2, b2=1, T=1)):
            assert compute_p(bigger, params) >= base

    def test_q_for_constant_data(self, eps_data):
        assert compute_q(eps_data) == pytest.approx(3 * EPS_GATE)

    def test_q_is_homogeneous(self, smooth_data):
        assert compute_q(smooth_data.scaled(2.5)) == pytest.approx(2.5 * compute_q(smooth_data))


class TestGate:
    """Условие существования и априорные оценки"""

    def test_boundary_instance(self, eps_data):
        gate = gate_report(eps_data)
        assert gate.p == pytest.approx(36.0)
        assert gate.q == pytest.approx(1.0 / 144.0)
        assert abs(gate.pq - 0.25) <= 1e-12
        assert gate.gate_ok
        assert abs(gate.bound_B - 1.0 / 72.0) <= 1e-12
        assert gate.r_lo == pytest.approx(gate.r_hi)
        assert gate.bound_full == pytest.approx(2.0 / 72.0)
        assert max_admissible_scale(gate) == pytest.approx(1.0)

    def test_doubled_data_violates_gate(self, eps_data):
        gate = gate_report(eps_data.scaled(2.0))
        assert gate.pq == pytest.approx(0.5)
        assert not gate.gate_ok
        assert math.isnan(gate.bound_B)
        assert max_admissible_scale(gate) == pytest.approx(0.5)

    def test_zero_data(self, zero_data):
        gate = gate_report(zero_data)
        assert gate.q == 0.0 and gate.pq == 0.0
        assert gate.r_lo == 0.0
        assert gate.r_hi == pytest.approx(1.0 / 36.0)
        assert gate.bound_B == pytest.approx(1.0 / 36.0)
        assert max_admissible_scale(gate) == math.inf

    def test_free_streaming_special_case(self, box):
        gate = gate_report(ProblemData.uniform(box, unit_params(S=0.0), 0.2))
        assert gate.free_streaming and gate.gate_ok
        assert gate.r_hi == math.inf
        assert gate.bound_B == pytest.approx(gate.q)

    @pytest.mark.parametrize("scale", [0.05, 0.3, 0.7, 0.99])
    def test_root_identities(self, eps_data, scale):
        gate = gate_report(eps_data.scaled(scale))
        p, q = gate.p, gate.q
        assert gate.r_lo <= gate.r_hi
        assert gate.r_lo * gate.r_hi == pytest.approx(q / p, rel=1e-10)
        assert gate.r_lo + gate.r_hi == pytest.approx(1.0 / p, rel=1e-10)
        for root in (gate.r_lo, gate.r_hi):
            assert abs(p * root ** 2 - root + q) <= 1e-10 * max(1.0, q)

    def test_radius_admissible(self, smooth_data):
        gate = gate_report(smooth_data)
        middle = 0.5 * (gate.r_lo + gate.r_hi)
        assert radius_admissible(gate, middle)
        assert not radius_admissible(gate, 0.5 * gate.r_lo)
        assert not radius_admissible(gate, 2.0 * gate.r_hi)

    def test_smooth_instance_is_inside(self, smooth_data):
        gate = gate_report(smooth_data)
        assert gate.gate_ok
        assert 0.1 < gate.pq < 0.25
        assert np.isfinite(gate.bound_B)
