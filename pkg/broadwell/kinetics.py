"""
Модель B_θ: скорости, столкновительный член, макроскопические моменты и максвелловские плотности
"""

import math
from typing import Tuple, Union

import numpy as np

from broadwell.models import Densities, ModelParams, Moments

SPECIES = (1, 2, 3, 4)

# Знак столкновительного члена в уравнении каждого вида
COLLISION_SIGNS = np.array([1.0, -1.0, -1.0, 1.0])

DensityLike = Union[Densities, np.ndarray]


class DegenerateStateError(Exception):
    """Нулевая плотность при вычислении скорости"""
    pass


class SpeciesIndexError(ValueError):
    """Номер вида вне диапазона 1..4"""
    pass


def check_species(i: int) -> int:
    if i not in SPECIES:
        raise SpeciesIndexError(f"Недопустимый номер вида: {i}")
    return i


def _as_array(n: DensityLike) -> np.ndarray:
    if isinstance(n, Densities):
        return n.as_array()
    arr = np.asarray(n, dtype=float)
    if arr.shape[-1:] != (4,):
        raise ValueError(f"Ожидалась последняя ось длины 4, получена форма {arr.shape}")
    return arr


def collision_term(n: DensityLike, params: ModelParams):
    """Q = 2cS(n2·n3 − n1·n4); для массива считается по последней оси"""
    arr = _as_array(n)
    q = 2.0 * params.c * params.S * (arr[..., 1] * arr[..., 2] - arr[..., 0] * arr[..., 3])
    if isinstance(n, Densities):
        return float(q)
    return q


def collision_sources(n: DensityLike, params: ModelParams) -> np.ndarray:
    """Правые части уравнений видов: (Q, −Q, −Q, Q)"""
    q = np.asarray(collision_term(_as_array(n), params))
    return q[..., None] * COLLISION_SIGNS


def moment_arrays(n, params: ModelParams, strict: bool = True) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Векторные моменты (ρ, U, V); при strict=False скорость в точках с ρ = 0 равна нулю"""
    arr = _as_array(n)
    rho = arr.sum(axis=-1)
    d14 = arr[..., 0] - arr[..., 3]
    d23 = arr[..., 1] - arr[..., 2]
    cos_t, sin_t = math.cos(params.theta), math.sin(params.theta)
    rho_u = cos_t * d14 - sin_t * d23
    rho_v = sin_t * d14 + cos_t * d23

    degenerate = rho == 0
    if strict and np.any(degenerate):
        raise DegenerateStateError("Плотность равна нулю, скорость не определена")
    safe_rho = np.where(degenerate, 1.0, rho)
    u = np.where(degenerate, 0.0, rho_u / safe_rho)
    v = np.where(degenerate, 0.0, rho_v / safe_rho)
    return rho, u, v


def moments(n: Densities, params: ModelParams) -> Moments:
    rho, u, v = moment_arrays(n.as_array(), params)
    return Moments(rho=float(rho), u=float(u), v=float(v))


def maxwellian_arrays(rho, u, v, params: ModelParams) -> np.ndarray:
    """Максвелловские плотности; результат с последней осью видов"""
    rho, u, v = np.broadcast_arrays(np.asarray(rho, float), np.asarray(u, float), np.asarray(v, float))
    cos_t, sin_t = math.cos(params.theta), math.sin(params.theta)
    quad = math.cos(2 * params.theta) * (u * u - v * v) + 2.0 * u * v * math.sin(2 * params.theta)
    lin_14 = 2.0 * u * cos_t + 2.0 * v * sin_t
    lin_23 = 2.0 * v * cos_t - 2.0 * u * sin_t
    quarter = rho / 4.0
    return np.stack([
        quarter * (1.0 + quad + lin_14),
        quarter * (1.0 - quad + lin_23),
        quarter * (1.0 - quad - lin_23),
        quarter * (1.0 + quad - lin_14),
    ], axis=-1)


def maxwellian(m: Moments, params: ModelParams) -> Densities:
    if m.rho < 0:
        raise ValueError(f"Отрицательная плотность: {m.rho}")
    return Densities.from_array(maxwellian_arrays(m.rho, m.u, m.v, params))


def btheta_advection(i: int, params: ModelParams) -> Tuple[float, float]:
    """Коэффициенты переноса вида i"""
    check_species(i)
    c = params.c
    cos_t, sin_t = math.cos(params.theta), math.sin(params.theta)
    table = {
        1: (c * cos_t, c * sin_t),
        2: (-c * sin_t, c * cos_t),
        3: (c * sin_t, -c * cos_t),
        4: (-c * cos_t, -c * sin_t),
    }
    return table[i]


def velocity_set(params: ModelParams) -> np.ndarray:
    return np.array([btheta_advection(i, params) for i in SPECIES])
