"""
Запись результатов: срезы полей и моментов в CSV и текстовая сводка запуска
"""

import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, List, Tuple

import numpy as np

from broadwell.solver import Solution

logger = logging.getLogger(__name__)

FIELDS_HEADER = "t,x,y,n1,n2,n3,n4"
MOMENTS_HEADER = "t,x,y,rho,u,v"


class ReportError(Exception):
    """Ошибка записи результатов"""
    pass


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def time_token(t: float) -> str:
    """Метка времени для имени файла"""
    return f"{t:.6g}"


class ReportWriter:
    """Пишет артефакты одного запуска в папку результатов"""

    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)
        self.written: List[Path] = []

    def _write_table(self, path: Path, header: str, table: np.ndarray) -> Path:
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            np.savetxt(path, table, fmt="%.17g", delimiter=",", header=header, comments="")
        except OSError as e:
            logger.error(f"Ошибка записи {path}: {e}")
            raise ReportError(f"Не удалось записать {path}: {e}")
        self.written.append(path)
        logger.info(f"Записан файл {path}")
        return path

    def write_slice(self, sol: Solution, t: float, nx: int, ny: int) -> Path:
        """Плотности в момент t: строка на каждый узел решётки nx × ny"""
        X, Y, N = sol.slice(t, nx, ny)
        table = np.column_stack([np.full(X.size, t), X.ravel(), Y.ravel(), N.reshape(-1, 4)])
        return self._write_table(self.output_dir / f"fields_t{time_token(t)}.csv", FIELDS_HEADER, table)

    def write_moments(self, sol: Solution, t: float, nx: int, ny: int) -> Path:
        X, Y, _ = sol.slice(t, nx, ny)
        rho, u, v = sol.moments(np.full_like(X, t), X, Y)
        table = np.column_stack([np.full(X.size, t), X.ravel(), Y.ravel(), rho.ravel(), u.ravel(), v.ravel()])
        return self._write_table(self.output_dir / f"moments_t{time_token(t)}.csv", MOMENTS_HEADER, table)

    def write_summary(self, entries: Iterable[Tuple[str, Any]], name: str = "summary.txt") -> Path:
        """Сводка в виде строк 'key: value'"""
        path = self.output_dir / name
        lines = [f"created_at: {datetime.now().isoformat()}"]
        lines += [f"{key}: {format_value(value)}" for key, value in entries]
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
            tmp.replace(path)
        except OSError as e:
            logger.error(f"Ошибка записи сводки: {e}")
            raise ReportError(f"Не удалось записать сводку {path}: {e}")
        self.written.append(path)
        logger.info(f"Сводка записана: {path}")
        return path


def read_summary(path: Path) -> dict:
    """Разобрать сводку обратно в словарь строк"""
    result = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, sep, value = line.partition(": ")
        if sep:
            result[key] = value
    return result
