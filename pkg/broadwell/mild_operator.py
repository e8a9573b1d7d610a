"""
Оператор неподвижной точки 𝒯 и сдвинутый оператор 𝒯^σ на сетке по η
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid, simpson, trapezoid
from scipy.interpolate import RegularGridInterpolator

from broadwell.characteristics import (
    barred_data_array,
    clamp_to_parallelepiped,
    eta_bounds,
    foot_arrays,
    in_parallelepiped,
    path_points,
    reflect_into_parallelepiped,
)
from broadwell.domain_data import ProblemData, compute_p_prime
from broadwell.kinetics import COLLISION_SIGNS, SPECIES, collision_term
from broadwell.models import GridResolution, ModelParams, QuadratureConfig, QuadratureRule, SpaceTimeBox

logger = logging.getLogger(__name__)


class OperatorError(Exception):
    """Ошибка вычисления оператора"""
    pass


class EtaGrid:
    """Равномерная сетка на ограничивающем параллелепипеде 𝓟′.

    Узлы внутри 𝓟′ помечены маской mask. Остальные вершины ячеек, задевающих
    𝓟′ (ghost), получают отражённое продолжение 2f(P) − f(R), где P - проекция
    узла на 𝓟′, R - проекция его зеркального образа; продолжение гладкое через
    границу, и мультилинейная интерполяция в ячейках у края 𝓟′ сохраняет
    второй порядок. Дальние узлы хранят f(P); интерполяция в точках 𝓟′ их
    не затрагивает.
    """

    def __init__(self, box: SpaceTimeBox, params: ModelParams, resolution: GridResolution):
        self.box = box
        self.params = params
        self.resolution = resolution
        self.bounds = eta_bounds(box, params)
        self.axes = tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, resolution.as_tuple()))
        self.spacing = np.array([axis[1] - axis[0] for axis in self.axes])
        self.shape = resolution.as_tuple()

        self.nodes = np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)
        self.mask = in_parallelepiped(self.nodes, box, params)
        clamped = clamp_to_parallelepiped(self.nodes, box, params)
        self.eval_points = np.where(self.mask[..., None], self.nodes, clamped)

        self.support = self.mask | self._touched_corners()
        self.ghost = self.support & ~self.mask
        self.mirror_points = reflect_into_parallelepiped(self.nodes[self.ghost], box, params)

        logger.debug(
            f"Сетка η {self.shape}: внутри 𝓟′ {int(self.mask.sum())} из {self.mask.size} узлов, "
            f"отражённых {int(self.ghost.sum())}"
        )

    def _touched_corners(self) -> np.ndarray:
        """Вершины ячеек, у которых диапазоны t, x, y пересекаются с 𝓟 (с запасом)"""
        c, box = self.params.c, self.box
        slack = 1e-9 * max(box.scale, c * box.T)
        lo = self.nodes[:-1, :-1, :-1]
        hi = self.nodes[1:, 1:, 1:]
        t_lo, t_hi = lo.sum(axis=-1), hi.sum(axis=-1)
        x_lo, x_hi = c * lo[..., 0], c * hi[..., 0]
        y_lo, y_hi = c * (lo[..., 1] - hi[..., 2]), c * (hi[..., 1] - lo[..., 2])
        touched = ((t_hi >= -slack) & (t_lo <= box.T + slack)
                   & (x_hi >= box.a1 - slack) & (x_lo <= box.b1 + slack)
                   & (y_hi >= box.a2 - slack) & (y_lo <= box.b2 + slack))

        corners = np.zeros(self.shape, dtype=bool)
        for i, j, k in product((0, 1), repeat=3):
            corners[i:i + touched.shape[0], j:j + touched.shape[1], k:k + touched.shape[2]] |= touched
        return corners

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def sample_points(self) -> np.ndarray:
        """Точки вычисления поля: все узлы (спроецированные на 𝓟′), затем зеркальные точки полосы"""
        return np.concatenate([self.eval_points.reshape(-1, 3), self.mirror_points], axis=0)

    def assemble(self, raw: np.ndarray) -> np.ndarray:
        """Значения (4, P) в точках sample_points() → значения в узлах (4,) + shape"""
        raw = np.asarray(raw, dtype=float)
        if raw.shape != (4, self.size + self.mirror_points.shape[0]):
            raise OperatorError(f"Форма {raw.shape} не соответствует точкам сетки")
        values = raw[:, :self.size].reshape((4,) + self.shape).copy()
        values[:, self.ghost] = 2.0 * values[:, self.ghost] - raw[:, self.size:]
        return values

    @property
    def max_path_length(self) -> float:
        """Наибольшая длина характеристики по параметру"""
        c = self.params.c
        return max(self.box.T, self.box.lx / c, self.box.ly / c)

    def quadrature_intervals(self, quad: QuadratureConfig) -> int:
        """Общее число подынтервалов на каждом пути; шаг на пути не превышает max_step"""
        step = quad.max_step if quad.max_step is not None else float(self.spacing.min())
        if not step > 0:
            raise OperatorError(f"Шаг квадратуры должен быть положительным: {step}")
        intervals = max(1, math.ceil(self.max_path_length / step - 1e-9))
        if quad.rule == QuadratureRule.SIMPSON and intervals % 2:
            intervals += 1
        return intervals

    def same_as(self, other: "EtaGrid") -> bool:
        return (self is other or (
            self.shape == other.shape
            and self.box == other.box
            and self.params == other.params
        ))


class EtaField:
    """Четыре плотности в узлах сетки по η; значения неизменяемы"""

    def __init__(self, grid: EtaGrid, values: np.ndarray):
        values = np.array(values, dtype=float)
        if values.shape != (4,) + grid.shape:
            raise OperatorError(f"Форма значений {values.shape} не совпадает с (4,) + {grid.shape}")
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self._interp = RegularGridInterpolator(
            grid.axes, np.moveaxis(values, 0, -1), method="linear", bounds_error=False, fill_value=None
        )

    @classmethod
    def zeros(cls, grid: EtaGrid) -> "EtaField":
        return cls(grid, np.zeros((4,) + grid.shape))

    @classmethod
    def constant(cls, grid: EtaGrid, value) -> "EtaField":
        per_species = np.broadcast_to(np.asarray(value, dtype=float), (4,))
        return cls(grid, per_species[:, None, None, None] * np.ones((4,) + grid.shape))

    @classmethod
    def from_function(cls, grid: EtaGrid, func: Callable[[np.ndarray], np.ndarray],
                      extend: bool = True) -> "EtaField":
        """func: точки η (..., 3) → плотности (..., 4).

        При extend=True func вычисляется только в 𝓟′, а узлы вне его получают
        продолжение сетки; иначе func вычисляется прямо в узлах.
        """
        if not extend:
            return cls(grid, np.moveaxis(np.asarray(func(grid.nodes), dtype=float), -1, 0))
        raw = np.asarray(func(grid.sample_points()), dtype=float)
        return cls(grid, grid.assemble(raw.T))

    def interpolate(self, eta: np.ndarray) -> np.ndarray:
        """Плотности в произвольных точках η (..., 3) → (..., 4)"""
        eta = np.asarray(eta, dtype=float)
        lo, hi = self.grid.bounds[:, 0], self.grid.bounds[:, 1]
        flat = np.clip(eta.reshape(-1, 3), lo, hi)
        return self._interp(flat).reshape(eta.shape[:-1] + (4,))

    def inside(self) -> np.ndarray:
        """Значения в узлах 𝓟′, массив (4, K)"""
        return self.values[:, self.grid.mask]

    def sup_norm(self) -> float:
        """max |M| по видам и узлам внутри 𝓟′"""
        return float(np.abs(self.inside()).max())

    def support_norm(self) -> float:
        """max |M| по узлам, от которых зависит интерполяция в 𝓟′"""
        return float(np.abs(self.values[:, self.grid.support]).max())

    def min_value(self) -> float:
        return float(self.inside().min())


def integrate_uniform(values: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    if rule == QuadratureRule.SIMPSON:
        return simpson(values, dx=1.0, axis=-1)
    return trapezoid(values, dx=1.0, axis=-1)


def _cumulative(values: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    if rule == QuadratureRule.SIMPSON:
        return cumulative_simpson(values, dx=1.0, axis=-1, initial=0.0)
    return cumulative_trapezoid(values, dx=1.0, axis=-1, initial=0.0)


def _species_block(species: int, eta: np.ndarray, M: EtaField, data: ProblemData,
                   intervals: int, rule: QuadratureRule, sigma: Optional[float]) -> np.ndarray:
    """Значения оператора для вида species в блоке точек eta (P, 3)"""
    box, params = data.box, data.params
    initial, s0, s1 = foot_arrays(species, eta, box, params)
    base = barred_data_array(species, initial, data, eta)
    sign = COLLISION_SIGNS[species - 1]

    if sigma is None and params.S == 0.0:
        return base

    length = s1 - s0
    s = s0[:, None] + length[:, None] * np.linspace(0.0, 1.0, intervals + 1)
    along = M.interpolate(path_points(species, eta, initial, s, box, params))
    h = length / intervals

    if sigma is None:
        return base + sign * h * integrate_uniform(collision_term(along, params), rule)

    magnitude = np.abs(along)
    rho = magnitude.sum(axis=-1)
    source = sigma * rho * magnitude[..., species - 1] + sign * collision_term(magnitude, params)
    # ∫ρ от основания до каждого узла пути
    prefix = h[:, None] * _cumulative(rho, rule)
    total = prefix[:, -1]
    weighted = np.exp(-sigma * (total[:, None] - prefix)) * source
    return h * integrate_uniform(weighted, rule) + base * np.exp(-sigma * total)


def _apply(M: EtaField, data: ProblemData, quad: QuadratureConfig, sigma: Optional[float]) -> EtaField:
    grid = M.grid
    if grid.box != data.box or grid.params != data.params:
        raise OperatorError("Сетка построена для другой задачи")

    intervals = grid.quadrature_intervals(quad)
    points = grid.sample_points()
    out = np.empty((4, points.shape[0]))

    def run(species: int) -> None:
        for start in range(0, points.shape[0], quad.chunk_size):
            block = points[start:start + quad.chunk_size]
            out[species - 1, start:start + block.shape[0]] = _species_block(
                species, block, M, data, intervals, quad.rule, sigma
            )

    if quad.workers > 1:
        with ThreadPoolExecutor(max_workers=min(quad.workers, len(SPECIES))) as pool:
            list(pool.map(run, SPECIES))
    else:
        for species in SPECIES:
            run(species)

    return EtaField(grid, grid.assemble(out))


def apply_T(M: EtaField, data: ProblemData, quad: QuadratureConfig) -> EtaField:
    """𝒯(M): данные в основании плюс интеграл ±Q(M) вдоль характеристики"""
    return _apply(M, data, quad, sigma=None)


def apply_T_sigma(M: EtaField, sigma: float, data: ProblemData, quad: QuadratureConfig) -> EtaField:
    """𝒯^σ(M) с |M| вместо M; неотрицателен при σ ≥ 2cS и неотрицательных данных"""
    threshold = 2.0 * data.params.c * data.params.S
    if sigma < threshold * (1.0 - 1e-12):
        raise OperatorError(f"σ = {sigma} меньше 2cS = {threshold}")
    return _apply(M, data, quad, sigma=float(sigma))


def sup_distance(A: EtaField, B: EtaField, on_support: bool = False) -> float:
    """max по видам и узлам 𝓟′ (или всей опоре интерполяции) |A − B|"""
    if not A.grid.same_as(B.grid):
        raise OperatorError("Поля заданы на разных сетках")
    nodes = A.grid.support if on_support else A.grid.mask
    return float(np.abs(A.values[:, nodes] - B.values[:, nodes]).max())


def lipschitz_bound(A: EtaField, B: EtaField, box: SpaceTimeBox, params: ModelParams) -> float:
    """p′·(‖A‖ + ‖B‖) с нормами по опоре интерполяции.

    Множитель при sup_distance(A, B, on_support=True) для расстояния образов в 𝓟′.
    """
    return compute_p_prime(box, params) * (A.support_norm() + B.support_norm())


def eta_partials(field: EtaField) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Центральные разности по η1, η2, η3 во всех узлах"""
    return tuple(np.gradient(field.values, *field.grid.spacing, axis=(1, 2, 3)))


def n_norm(field: EtaField) -> float:
    """Норма типа C¹: максимум sup-нормы поля и его производных по η в узлах 𝓟′"""
    mask = field.grid.mask
    return max(field.sup_norm(), *(float(np.abs(d[:, mask]).max()) for d in eta_partials(field)))
