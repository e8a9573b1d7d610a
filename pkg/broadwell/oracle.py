"""
Независимые решения для проверки: явная противопотоковая схема с расщеплением
и точный свободный перенос данных вдоль характеристик
"""

import logging
import math
from typing import Callable, Optional

import numpy as np

from broadwell.characteristics import physical_foot_arrays, to_eta_array
from broadwell.domain_data import ProblemData
from broadwell.kinetics import COLLISION_SIGNS, SPECIES, check_species, collision_sources, collision_term, velocity_set
from broadwell.mild_operator import EtaField, integrate_uniform
from broadwell.models import ConservationReport, FDGrid, ModelParams, QuadratureConfig, SpaceTimeBox
from broadwell.solver import lattice_balance

logger = logging.getLogger(__name__)


class CFLViolationError(Exception):
    """Шаг по времени нарушает условие устойчивости или положительности"""
    pass


def fd_grid_for(box: SpaceTimeBox, params: ModelParams, nx: int, ny: int, nt: int) -> FDGrid:
    """Сетка оракула по числу узлов; CFL ≤ 1 обязательно"""
    grid = FDGrid(
        nx=nx, ny=ny, nt=nt,
        dx=box.lx / (nx - 1), dy=box.ly / (ny - 1), dt=box.T / (nt - 1),
        c=params.c,
    )
    if grid.cfl > 1.0 + 1e-12:
        raise CFLViolationError(
            f"CFL = {grid.cfl:.4f} > 1 при nx={nx}, ny={ny}, nt={nt}; увеличьте nt"
        )
    return grid


class PhysicalFields:
    """Плотности на решётке (t, x, y): values (nt, nx, ny, 4)"""

    def __init__(self, ts: np.ndarray, xs: np.ndarray, ys: np.ndarray, values: np.ndarray, c: float):
        self.ts = ts
        self.xs = xs
        self.ys = ys
        self.values = values
        self.c = c

    def mesh(self):
        return np.meshgrid(self.ts, self.xs, self.ys, indexing="ij")

    def sample_at_nodes(self, sampler: Callable) -> np.ndarray:
        """Значения sampler(t, x, y) → (..., 4) в узлах решётки"""
        T_, X, Y = self.mesh()
        return np.asarray(sampler(T_, X, Y), dtype=float)

    def relative_error(self, reference: np.ndarray) -> float:
        """sup|values − reference| / sup|reference|"""
        scale = float(np.abs(reference).max())
        error = float(np.abs(self.values - reference).max())
        if scale == 0.0:
            return error
        return error / scale

    def mass_balance(self) -> ConservationReport:
        return lattice_balance(self.ts, self.xs, self.ys, self.values, self.c)


def _inflow(data: ProblemData, species: int, t: float, along: np.ndarray) -> np.ndarray:
    return data.inflow[species - 1].evaluate(np.full_like(along, t), along)


def upwind_solve(data: ProblemData, grid: FDGrid) -> PhysicalFields:
    """Противопотоковый перенос, затем явный шаг столкновений (расщепление Ли)"""
    if grid.cfl > 1.0 + 1e-12:
        raise CFLViolationError(f"CFL = {grid.cfl:.4f} > 1")
    box, params = data.box, data.params
    c, S = params.c, params.S
    ts = np.linspace(0.0, box.T, grid.nt)
    xs = np.linspace(box.a1, box.b1, grid.nx)
    ys = np.linspace(box.a2, box.b2, grid.ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")

    lam_x = c * grid.dt / grid.dx
    lam_y = c * grid.dt / grid.dy
    logger.info(f"Оракул: сетка {grid.nx}×{grid.ny}×{grid.nt}, CFL = {grid.cfl:.3f}")

    N = np.stack([data.init[i].evaluate(X, Y) for i in range(4)], axis=-1)
    out = np.empty((grid.nt,) + N.shape)
    out[0] = N

    for n in range(1, grid.nt):
        t = ts[n]
        new = N.copy()
        new[1:, :, 0] -= lam_x * (N[1:, :, 0] - N[:-1, :, 0])
        new[:, 1:, 1] -= lam_y * (N[:, 1:, 1] - N[:, :-1, 1])
        new[:, :-1, 2] -= lam_y * (N[:, :-1, 2] - N[:, 1:, 2])
        new[:-1, :, 3] -= lam_x * (N[:-1, :, 3] - N[1:, :, 3])

        rho_max = float(new.sum(axis=-1).max())
        if grid.dt * 2.0 * c * S * rho_max > 1.0:
            raise CFLViolationError(
                f"Шаг столкновений теряет положительность: dt·2cS·ρmax = {grid.dt * 2 * c * S * rho_max:.4f} > 1 "
                f"при t = {t:.4g}"
            )
        new += grid.dt * collision_sources(new, params)

        new[0, :, 0] = _inflow(data, 1, t, ys)
        new[:, 0, 1] = _inflow(data, 2, t, xs)
        new[:, -1, 2] = _inflow(data, 3, t, xs)
        new[-1, :, 3] = _inflow(data, 4, t, ys)

        out[n] = N = new

    return PhysicalFields(ts, xs, ys, out, c)


def free_streaming_field(data: ProblemData, t, x, y) -> np.ndarray:
    """Данные, перенесённые вдоль характеристик без столкновений: (..., 4)"""
    box, params = data.box, data.params
    out = []
    for species in SPECIES:
        initial, tf, xf, yf, _ = physical_foot_arrays(species, t, x, y, box, params)
        along = yf if species in (1, 4) else xf
        values = np.empty(initial.shape)
        values[initial] = data.init[species - 1].evaluate(xf[initial], yf[initial])
        values[~initial] = data.inflow[species - 1].evaluate(tf[~initial], along[~initial])
        out.append(values)
    return np.stack(out, axis=-1)


def free_streaming_exact(data: ProblemData, t: float, x: float, y: float, species: int) -> float:
    check_species(species)
    if data.params.S != 0.0:
        logger.debug("Свободный перенос при S ≠ 0 используется только как сравнение")
    point = [np.atleast_1d(np.asarray(v, dtype=float)) for v in (t, x, y)]
    return float(free_streaming_field(data, *point)[0, species - 1])


def physical_operator(M: EtaField, data: ProblemData, points: np.ndarray,
                      quad: Optional[QuadratureConfig] = None) -> np.ndarray:
    """𝒯(M) прямым обратным ходом в (t, x, y); points (P, 3) → (P, 4)"""
    quad = quad or QuadratureConfig()
    box, params = data.box, data.params
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    t, x, y = points[:, 0], points[:, 1], points[:, 2]
    base = free_streaming_field(data, t, x, y)
    if params.S == 0.0:
        return base

    intervals = M.grid.quadrature_intervals(quad)
    velocities = velocity_set(params)
    out = np.empty_like(base)
    for species in SPECIES:
        *_, tau = physical_foot_arrays(species, t, x, y, box, params)
        back = tau[:, None] * np.linspace(1.0, 0.0, intervals + 1)
        vx, vy = velocities[species - 1]
        along = M.interpolate(to_eta_array(t[:, None] - back, x[:, None] - vx * back,
                                           y[:, None] - vy * back, params))
        integral = tau / intervals * integrate_uniform(collision_term(along, params), quad.rule)
        out[:, species - 1] = base[:, species - 1] + COLLISION_SIGNS[species - 1] * integral
    return out


def oracle_distance(fields: PhysicalFields, sampler: Callable) -> float:
    """Относительное sup-отклонение оракула от sampler на его решётке"""
    reference = fields.sample_at_nodes(sampler)
    if not np.all(np.isfinite(reference)):
        return math.inf
    return fields.relative_error(reference)
