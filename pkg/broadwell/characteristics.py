"""
Замена переменных (t, x, y) → (η1, η2, η3), классификация оснований характеристик,
параметризация путей и данные на основаниях
"""

import logging
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel

from broadwell.domain_data import ProblemData
from broadwell.fields import FieldDomainError
from broadwell.kinetics import btheta_advection, check_species
from broadwell.models import CharCoords, FootKind, FootPoint, ModelParams, SpaceTimeBox

logger = logging.getLogger(__name__)

# Относительный допуск для принадлежности и для точек на разделяющих плоскостях
GEOMETRY_TOL = 1e-12


class GeometryError(Exception):
    """Точка вне 𝓟′ или основание вне области данных"""
    pass


def to_eta_array(t, x, y, params: ModelParams) -> np.ndarray:
    c = params.c
    t, x, y = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float), np.asarray(y, float))
    return np.stack([x / c, t / 2 - x / (2 * c) + y / (2 * c), t / 2 - x / (2 * c) - y / (2 * c)], axis=-1)


def from_eta_array(eta, params: ModelParams) -> np.ndarray:
    """Обратное преобразование; последняя ось результата: (t, x, y)"""
    eta = np.asarray(eta, dtype=float)
    e1, e2, e3 = eta[..., 0], eta[..., 1], eta[..., 2]
    c = params.c
    return np.stack([e1 + e2 + e3, c * e1, c * (e2 - e3)], axis=-1)


def to_eta(t: float, x: float, y: float, params: ModelParams) -> CharCoords:
    return CharCoords.from_array(to_eta_array(t, x, y, params))


def from_eta(eta: CharCoords, params: ModelParams) -> Tuple[float, float, float]:
    t, x, y = from_eta_array(eta.as_array(), params)
    return float(t), float(x), float(y)


def jacobian_determinant(params: ModelParams) -> float:
    """D(η1, η2, η3)/D(t, x, y)"""
    return float(np.linalg.det(to_eta_array(*np.eye(3), params).T))


def eta_bounds(box: SpaceTimeBox, params: ModelParams) -> np.ndarray:
    """Покоординатные границы 𝓟′, массив (3, 2)"""
    c = params.c
    return np.array([
        [box.a1 / c, box.b1 / c],
        [(box.a2 - box.b1) / (2 * c), box.T / 2 + (box.b2 - box.a1) / (2 * c)],
        [-(box.b1 + box.b2) / (2 * c), box.T / 2 - (box.a1 + box.a2) / (2 * c)],
    ])


def _tol(box: SpaceTimeBox, params: ModelParams) -> float:
    return GEOMETRY_TOL * max(box.scale, params.c * box.T)


def in_parallelepiped(eta, box: SpaceTimeBox, params: ModelParams) -> np.ndarray:
    """Принадлежность 𝓟′: образ точки лежит в 𝓟"""
    txy = from_eta_array(eta, params)
    tol = _tol(box, params)
    t, x, y = txy[..., 0], txy[..., 1], txy[..., 2]
    return ((t >= -tol) & (t <= box.T + tol)
            & (x >= box.a1 - tol) & (x <= box.b1 + tol)
            & (y >= box.a2 - tol) & (y <= box.b2 + tol))


def clamp_to_parallelepiped(eta, box: SpaceTimeBox, params: ModelParams) -> np.ndarray:
    """Ближайшая по каждой физической координате точка 𝓟′"""
    txy = from_eta_array(eta, params)
    t = np.clip(txy[..., 0], 0.0, box.T)
    x = np.clip(txy[..., 1], box.a1, box.b1)
    y = np.clip(txy[..., 2], box.a2, box.b2)
    return to_eta_array(t, x, y, params)


def reflect_into_parallelepiped(eta, box: SpaceTimeBox, params: ModelParams) -> np.ndarray:
    """Зеркальный образ точки относительно её проекции на 𝓟′, снова спроецированный в 𝓟′.

    Для точки P = clamp(η) и R = clamp(2P − η) значение 2f(P) − f(R) продолжает
    гладкую f за границу 𝓟′ без излома и точно для линейных f.
    """
    foot = clamp_to_parallelepiped(eta, box, params)
    return clamp_to_parallelepiped(2.0 * foot - np.asarray(eta, dtype=float), box, params)


def exceptional_planes(box: SpaceTimeBox, params: ModelParams) -> List[Tuple[np.ndarray, float]]:
    """Плоскости смены ветви w·η = d для видов 1..4"""
    c = params.c
    return [
        (np.array([0.0, -c, -c]), box.a1),
        (np.array([-c, 0.0, -2 * c]), box.a2),
        (np.array([c, 2 * c, 0.0]), box.b2),
        (np.array([2 * c, c, c]), box.b1),
    ]


def foot_arrays(species: int, eta: np.ndarray, box: SpaceTimeBox,
                params: ModelParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Для массива точек: признак начального основания и пределы параметра пути (s0, s1)"""
    check_species(species)
    c = params.c
    tol = _tol(box, params)
    e1, e2, e3 = eta[..., 0], eta[..., 1], eta[..., 2]

    if species == 1:
        initial = -c * e2 - c * e3 >= box.a1 - tol
        s0 = np.where(initial, -e2 - e3, box.a1 / c)
        s1 = e1
    elif species == 2:
        initial = -c * e1 - 2 * c * e3 >= box.a2 - tol
        s0 = np.where(initial, -e1 - e3, e3 + box.a2 / c)
        s1 = e2
    elif species == 3:
        initial = c * e1 + 2 * c * e2 <= box.b2 + tol
        s0 = np.where(initial, -e1 - e2, e2 - box.b2 / c)
        s1 = e3
    else:
        initial = 2 * c * e1 + c * e2 + c * e3 <= box.b1 + tol
        s0 = np.zeros_like(e1)
        s1 = np.where(initial, e1 + e2 + e3, -e1 + box.b1 / c)
    return initial, s0, np.maximum(s1, s0)


def path_points(species: int, eta: np.ndarray, initial: np.ndarray, s: np.ndarray,
                box: SpaceTimeBox, params: ModelParams) -> np.ndarray:
    """Точки путей: eta (P, 3), s (P, K) → (P, K, 3)"""
    e1, e2, e3 = (eta[:, k, None] for k in range(3))
    if species == 1:
        parts = (s, e2, e3)
    elif species == 2:
        parts = (e1, s, e3)
    elif species == 3:
        parts = (e1, e2, s)
    else:
        shift = box.b1 / params.c
        ini = initial[:, None]
        parts = (
            np.where(ini, -s + 2 * e1 + e2 + e3, -s + shift),
            np.where(ini, s - e1 - e3, s + e1 + e2 - shift),
            np.where(ini, s - e1 - e2, s + e1 + e3 - shift),
        )
    return np.stack(np.broadcast_arrays(*parts), axis=-1)


def barred_data_array(species: int, initial: np.ndarray, data: ProblemData, eta: np.ndarray) -> np.ndarray:
    """Данные в основаниях характеристик для массива точек"""
    check_species(species)
    box, c = data.box, data.params.c
    e1, e2, e3 = eta[..., 0], eta[..., 1], eta[..., 2]
    n0, inflow = data.init[species - 1], data.inflow[species - 1]

    if species == 1:
        init_args = (-c * e2 - c * e3, c * e2 - c * e3)
        inflow_args = (box.a1 / c + e2 + e3, c * e2 - c * e3)
    elif species == 2:
        init_args = (c * e1, -c * e1 - 2 * c * e3)
        inflow_args = (e1 + 2 * e3 + box.a2 / c, c * e1)
    elif species == 3:
        init_args = (c * e1, c * e1 + 2 * c * e2)
        inflow_args = (e1 + 2 * e2 - box.b2 / c, c * e1)
    else:
        init_args = (2 * c * e1 + c * e2 + c * e3, c * e2 - c * e3)
        inflow_args = (2 * e1 + e2 + e3 - box.b1 / c, c * e2 - c * e3)

    out = np.empty(e1.shape)
    try:
        out[initial] = n0.evaluate(init_args[0][initial], init_args[1][initial])
        out[~initial] = inflow.evaluate(inflow_args[0][~initial], inflow_args[1][~initial])
    except FieldDomainError as e:
        raise GeometryError(f"Основание характеристики вида {species} вне области данных: {e}") from e
    return out


def barred_data(species: int, kind: FootKind, data: ProblemData, eta: CharCoords) -> float:
    initial = np.array([kind == FootKind.INITIAL])
    return float(barred_data_array(species, initial, data, eta.as_array()[None, :])[0])


class CharacteristicPath(BaseModel):
    """Путь от основания до точки: s ∈ [s0, s1]"""
    species: int
    kind: FootKind
    s0: float
    s1: float
    origin: CharCoords
    box: SpaceTimeBox
    params: ModelParams

    def point(self, s: float) -> CharCoords:
        pts = self.points(np.array([s]))
        return CharCoords.from_array(pts[0])

    def points(self, s: np.ndarray) -> np.ndarray:
        initial = np.array([self.kind == FootKind.INITIAL])
        return path_points(self.species, self.origin.as_array()[None, :], initial,
                           np.asarray(s, dtype=float)[None, :], self.box, self.params)[0]

    def uniform(self, intervals: int) -> np.ndarray:
        """Равномерные узлы пути"""
        return self.points(np.linspace(self.s0, self.s1, intervals + 1))


def classify_foot(species: int, eta: CharCoords, box: SpaceTimeBox, params: ModelParams) -> FootPoint:
    point = eta.as_array()[None, :]
    if not in_parallelepiped(point, box, params)[0]:
        raise GeometryError(f"Точка {tuple(point[0])} вне 𝓟′")
    initial, s0, s1 = foot_arrays(species, point, box, params)
    foot_eta = path_points(species, point, initial, s0[:, None], box, params)[0, 0]
    t, x, y = from_eta_array(foot_eta, params)
    return FootPoint(
        species=species,
        kind=FootKind.INITIAL if initial[0] else FootKind.INFLOW,
        location=(float(t), float(x), float(y)),
        path_length=float(s1[0] - s0[0]),
    )


def characteristic_path(species: int, eta: CharCoords, foot: FootPoint,
                        box: SpaceTimeBox, params: ModelParams) -> CharacteristicPath:
    initial, s0, s1 = foot_arrays(species, eta.as_array()[None, :], box, params)
    kind = FootKind.INITIAL if initial[0] else FootKind.INFLOW
    if kind != foot.kind:
        raise GeometryError(f"Основание {foot.kind.value} не соответствует точке {eta}")
    return CharacteristicPath(species=species, kind=kind, s0=float(s0[0]), s1=float(s1[0]),
                              origin=eta, box=box, params=params)


def physical_foot_arrays(species: int, t, x, y, box: SpaceTimeBox, params: ModelParams):
    """Прямой обратный ход в (t, x, y): признак начального основания, (tf, xf, yf) и время пути"""
    check_species(species)
    c = params.c
    tol = _tol(box, params)
    t, x, y = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float), np.asarray(y, float))
    vx, vy = btheta_advection(species, params)

    if species == 1:
        initial = x - c * t >= box.a1 - tol
        to_face = (x - box.a1) / c
    elif species == 2:
        initial = y - c * t >= box.a2 - tol
        to_face = (y - box.a2) / c
    elif species == 3:
        initial = y + c * t <= box.b2 + tol
        to_face = (box.b2 - y) / c
    else:
        initial = x + c * t <= box.b1 + tol
        to_face = (box.b1 - x) / c

    tau = np.where(initial, t, np.maximum(to_face, 0.0))
    return initial, t - tau, x - vx * tau, y - vy * tau, tau


def physical_foot(species: int, t: float, x: float, y: float,
                  box: SpaceTimeBox, params: ModelParams) -> FootPoint:
    initial, tf, xf, yf, tau = physical_foot_arrays(species, t, x, y, box, params)
    return FootPoint(
        species=species,
        kind=FootKind.INITIAL if initial else FootKind.INFLOW,
        location=(float(tf), float(xf), float(yf)),
        path_length=float(tau),
    )
