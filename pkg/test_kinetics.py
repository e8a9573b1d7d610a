"""
Тесты модели B_θ: скорости, столкновительный член, моменты, максвелловские плотности
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from broadwell.kinetics import (
    DegenerateStateError,
    SpeciesIndexError,
    btheta_advection,
    collision_sources,
    collision_term,
    maxwellian,
    maxwellian_arrays,
    moment_arrays,
    moments,
    velocity_set,
)
from broadwell.models import Densities, ModelParams, Moments


class TestAdvection:
    """Скорости четырёх видов"""

    def test_theta_zero_directions(self):
        params = ModelParams(c=2.0, S=1.0)
        assert btheta_advection(1, params) == pytest.approx((2.0, 0.0))
        assert btheta_advection(2, params) == pytest.approx((0.0, 2.0))
        assert btheta_advection(3, params) == pytest.approx((0.0, -2.0))
        assert btheta_advection(4, params) == pytest.approx((-2.0, 0.0))

    def test_rotated_set_is_orthogonal_and_symmetric(self):
        params = ModelParams(c=1.5, S=1.0, theta=math.pi / 6)
        u = velocity_set(params)
        assert u[0] == pytest.approx((1.5 * math.cos(math.pi / 6), 1.5 * math.sin(math.pi / 6)))
        assert u[3] == pytest.approx(-u[0])
        assert u[2] == pytest.approx(-u[1])
        assert float(u[0] @ u[1]) == pytest.approx(0.0, abs=1e-14)
        assert np.linalg.norm(u, axis=1) == pytest.approx([1.5] * 4)

    @pytest.mark.parametrize("species", [0, 5, -1])
    def test_bad_species(self, species):
        with pytest.raises(SpeciesIndexError):
            btheta_advection(species, ModelParams(c=1.0, S=1.0))

    def test_theta_range_is_validated(self):
        with pytest.raises(ValidationError):
            ModelParams(c=1.0, S=1.0, theta=math.pi / 2)
        with pytest.raises(ValidationError):
            ModelParams(c=0.0, S=1.0)


class TestCollision:
    """Столкновительный член и знаки источников"""

    def test_collision_term_value(self):
        params = ModelParams(c=1.0, S=1.0)
        assert collision_term(Densities(n1=1, n2=2, n3=3, n4=4), params) == pytest.approx(4.0)

    def test_zero_state(self):
        params = ModelParams(c=3.0, S=2.0)
        assert collision_term(Densities(n1=0, n2=0, n3=0, n4=0), params) == 0.0

    def test_vectorized_matches_scalar(self, rng):
        params = ModelParams(c=1.3, S=0.7)
        states = rng.uniform(0.0, 2.0, size=(50, 4))
        vector = collision_term(states, params)
        scalar = [collision_term(Densities.from_array(s), params) for s in states]
        assert vector == pytest.approx(scalar, rel=1e-14)

    def test_sources_cancel_in_mass_and_momentum(self, rng):
        params = ModelParams(c=1.0, S=2.0)
        sources = collision_sources(rng.uniform(0.0, 1.0, size=(100, 4)), params)
        assert np.abs(sources.sum(axis=-1)).max() < 1e-14
        assert np.abs(sources[:, 0] - sources[:, 3]).max() < 1e-14
        assert np.abs(sources[:, 1] - sources[:, 2]).max() < 1e-14

    def test_signs(self):
        params = ModelParams(c=1.0, S=1.0)
        sources = collision_sources(np.array([1.0, 2.0, 3.0, 4.0]), params)
        assert sources == pytest.approx([4.0, -4.0, -4.0, 4.0])


class TestMoments:
    """Моменты и максвелловские плотности"""

    def test_maxwellian_reference_state(self):
        params = ModelParams(c=1.0, S=1.0)
        n = maxwellian(Moments(rho=4.0, u=0.1, v=0.0), params)
        assert n.as_array() == pytest.approx([1.21, 0.99, 0.99, 0.81], rel=1e-14)

    def test_moments_of_maxwellian(self):
        params = ModelParams(c=1.0, S=1.0)
        m = moments(Densities(n1=1.21, n2=0.99, n3=0.99, n4=0.81), params)
        assert m.rho == pytest.approx(4.0)
        assert m.u == pytest.approx(0.1)
        assert m.v == pytest.approx(0.0, abs=1e-15)

    def test_maxwellian_has_no_collisions(self, rng):
        params = ModelParams(c=1.0, S=1.0, theta=0.3)
        rho = rng.uniform(0.1, 5.0, size=10_000)
        speed = rng.uniform(0.0, 0.3, size=10_000)
        angle = rng.uniform(0.0, 2 * math.pi, size=10_000)
        n = maxwellian_arrays(rho, speed * np.cos(angle), speed * np.sin(angle), params)
        assert n.min() > 0
        assert np.all(np.abs(collision_term(n, params)) <= 1e-12 * rho ** 2)

    def test_round_trip_moments(self, rng):
        params = ModelParams(c=1.0, S=1.0, theta=0.7)
        rho = rng.uniform(0.5, 2.0, size=200)
        u = rng.uniform(-0.2, 0.2, size=200)
        v = rng.uniform(-0.2, 0.2, size=200)
        r, uu, vv = moment_arrays(maxwellian_arrays(rho, u, v, params), params)
        assert r == pytest.approx(rho, rel=1e-13)
        assert uu == pytest.approx(u, abs=1e-13)
        assert vv == pytest.approx(v, abs=1e-13)

    def test_zero_density_is_degenerate(self):
        params = ModelParams(c=1.0, S=1.0)
        with pytest.raises(DegenerateStateError):
            moments(Densities(n1=0, n2=0, n3=0, n4=0), params)
        rho, u, v = moment_arrays(np.zeros((3, 4)), params, strict=False)
        assert np.all(rho == 0) and np.all(u == 0) and np.all(v == 0)

    def test_negative_density_rejected(self):
        with pytest.raises(ValueError):
            maxwellian(Moments(rho=-1.0), ModelParams(c=1.0, S=1.0))
