"""
Модуль конфигурации: настройки приложения из config.json и переменных окружения,
разбор файла запуска в формате key = value
"""

import json
import logging
import math
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from broadwell.domain_data import INFLOW_NAMES, INIT_NAMES, ProblemData
from broadwell.fields import FieldError, build_field
from broadwell.models import FieldSpec, ModelParams, SolverConfig, SpaceTimeBox

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Настройки приложения"""

    # Логирование
    log_level: str = Field(default="INFO", description="Уровень логирования")
    log_file_name: str = Field(default="broadwell.log", description="Имя файла логов в папке результатов")

    # Результаты
    output_dir: str = Field(default="output", description="Папка результатов, если не задана в файле запуска")

    # Вычисления
    max_workers: int = Field(default=4, ge=1, description="Потоки для вычисления оператора по видам")
    chunk_size: int = Field(default=8192, ge=1, description="Узлов в одном векторизованном блоке")
    compat_tol: float = Field(default=1e-9, gt=0, description="Допуск условий согласования данных")

    model_config = SettingsConfigDict(
        env_prefix="BROADWELL_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    @classmethod
    def settings_customise_sources(cls, settings_cls, init_settings, env_settings,
                                   dotenv_settings, file_secret_settings):
        # Переменные окружения важнее config.json
        return env_settings, dotenv_settings, init_settings, file_secret_settings

    def log_file_path(self, output_dir: Optional[Path] = None) -> Path:
        """Путь к файлу логов"""
        return Path(output_dir or self.output_dir) / self.log_file_name


class ConfigManager:
    """Менеджер конфигурации"""

    def __init__(self, config_file: str = "config.json"):
        self.config_file = config_file
        self._settings: Optional[Settings] = None

    def load_settings(self) -> Settings:
        """Загрузить настройки из файла и переменных окружения"""
        if self._settings is not None:
            return self._settings

        config_data = {}
        if os.path.exists(self.config_file):
            try:
                with open(self.config_file, 'r', encoding='utf-8') as f:
                    config_data = json.load(f)
            except (json.JSONDecodeError, IOError) as e:
                logger.warning(f"Не удалось загрузить {self.config_file}: {e}")

        self._settings = Settings(**config_data)
        return self._settings

    def reset(self) -> None:
        """Сбросить кэш настроек"""
        self._settings = None

    def validate_paths(self, output_dir: Path) -> List[str]:
        """Проверить, что папку результатов можно создать и в неё можно писать"""
        errors = []
        if output_dir.exists() and not output_dir.is_dir():
            errors.append(f"Путь не является папкой: {output_dir}")
            return errors
        try:
            output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            errors.append(f"Не удалось создать папку результатов: {e}")
            return errors
        if not os.access(output_dir, os.W_OK):
            errors.append(f"Нет прав на запись в папку результатов: {output_dir}")
        return errors


# Глобальный экземпляр менеджера конфигурации
config_manager = ConfigManager()


def get_settings() -> Settings:
    """Получить настройки приложения"""
    return config_manager.load_settings()


class ConfigError(Exception):
    """Ошибка файла запуска с номером строки"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.message = message
        self.line = line
        super().__init__(f"строка {line}: {message}" if line is not None else message)


class OracleConfig(BaseModel):
    """Решётка конечно-разностного оракула"""
    model_config = ConfigDict(extra="forbid")

    nx: int = Field(33, ge=2)
    ny: int = Field(33, ge=2)
    nt: Optional[int] = Field(None, ge=2, description="По умолчанию наименьшее с CFL ≤ 1/2")

    def time_nodes(self, box: SpaceTimeBox, params: ModelParams) -> int:
        if self.nt is not None:
            return self.nt
        h = min(box.lx / (self.nx - 1), box.ly / (self.ny - 1))
        return math.ceil(2.0 * params.c * box.T / h) + 1


class OutputConfig(BaseModel):
    """Что и куда записывать"""
    model_config = ConfigDict(extra="forbid")

    dir: Optional[str] = None
    slices: Optional[List[float]] = Field(None, description="Моменты времени срезов; по умолчанию T")
    moments: bool = False

    @field_validator("slices", mode="before")
    @classmethod
    def _split(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value


class VerifyConfig(BaseModel):
    """Пороги проверок"""
    model_config = ConfigDict(extra="forbid")

    bound_slack: float = Field(1.05, ge=1.0)
    derivative_slack: float = Field(1.1, ge=1.0)
    mass_tol: float = Field(1e-3, gt=0)
    oracle_tol: float = Field(0.05, gt=0)


class RunConfig(BaseModel):
    """Разобранный файл запуска"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    box: SpaceTimeBox
    params: ModelParams
    fields: Dict[str, FieldSpec] = Field(default_factory=dict)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)
    base_dir: Path = Field(default_factory=Path.cwd)
    lines: Dict[str, int] = Field(default_factory=dict, description="Строка каждого ключа")

    def slices(self) -> List[float]:
        return self.output.slices if self.output.slices else [self.box.T]

    def output_dir(self, settings: Settings) -> Path:
        return Path(self.output.dir or settings.output_dir)

    def effective_solver(self, settings: Settings, override_gate: bool = False) -> SolverConfig:
        """Настройки решателя с недостающими значениями из Settings"""
        quad_update = {}
        if "workers" not in self.solver.quad.model_fields_set:
            quad_update["workers"] = settings.max_workers
        if "chunk_size" not in self.solver.quad.model_fields_set:
            quad_update["chunk_size"] = settings.chunk_size
        update: Dict[str, Any] = {"quad": self.solver.quad.model_copy(update=quad_update)}
        if "compat_tol" not in self.solver.model_fields_set:
            update["compat_tol"] = settings.compat_tol
        if override_gate:
            update["override_gate"] = True
        return self.solver.model_copy(update=update)


SECTIONS = ("problem", "solver", "oracle", "output", "verify")
BOX_KEYS = ("a1", "b1", "a2", "b2", "T")
PARAM_KEYS = ("c", "S")
# Ключи файла, которые называются в моделях иначе
RENAMES = {
    "solver.sigma.enabled": "solver.use_sigma",
    "solver.sigma.value": "solver.sigma",
}
KEY_PATTERN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z0-9_]+)*")

Entries = Dict[str, Tuple[str, int]]


def parse_flat(text: str) -> Entries:
    """Строки key = value → {key: (value, номер строки)}"""
    entries: Entries = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Ожидается 'key = value': {raw.strip()!r}", number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not KEY_PATTERN.fullmatch(key):
            raise ConfigError(f"Некорректный ключ {key!r}", number)
        if key in entries:
            raise ConfigError(f"Повторный ключ {key} (впервые в строке {entries[key][1]})", number)
        entries[key] = (value, number)
    return entries


def _nest(entries: Entries) -> Tuple[Dict[str, Any], Dict[str, str]]:
    """Разложить ключи по разделам; второе значение: внутренний путь → ключ файла"""
    tree: Dict[str, Any] = {}
    origin: Dict[str, str] = {}
    for key, (value, line) in entries.items():
        internal = RENAMES.get(key, key)
        parts = internal.split(".")
        if parts[0] not in SECTIONS:
            raise ConfigError(f"Неизвестный раздел {parts[0]!r} (допустимы {', '.join(SECTIONS)})", line)
        if len(parts) < 2:
            raise ConfigError(f"Ключ {key} без имени параметра", line)
        node = tree
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Ключ {key} конфликтует с ранее заданным значением", line)
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigError(f"Ключ {key} конфликтует с вложенными ключами", line)
        node[parts[-1]] = value
        origin[internal] = key
    return tree, origin


def _line_for(path: str, entries: Entries, origin: Dict[str, str]) -> Optional[int]:
    key = origin.get(path, path)
    if key in entries:
        return entries[key][1]
    related = [line for k, (_, line) in entries.items() if k.startswith(path + ".")]
    return min(related) if related else None


def _validate(model: Type[BaseModel], values: Dict[str, Any], prefix: str,
              entries: Entries, origin: Dict[str, str]) -> BaseModel:
    try:
        return model.model_validate(values)
    except ValidationError as e:
        error = e.errors()[0]
        path = ".".join([prefix] + [str(part) for part in error["loc"]])
        key = origin.get(path, path)
        raise ConfigError(f"{key}: {error['msg']}", _line_for(path, entries, origin)) from e


def run_config_from_text(text: str, base_dir: Optional[Path] = None) -> RunConfig:
    """Разобрать текст файла запуска"""
    entries = parse_flat(text)
    tree, origin = _nest(entries)

    problem = tree.get("problem", {})
    box_values, param_values, fields = {}, {}, {}
    for name, value in problem.items():
        if name in BOX_KEYS:
            box_values[name] = value
        elif name in PARAM_KEYS:
            param_values[name] = value
        elif name in INIT_NAMES + INFLOW_NAMES and isinstance(value, dict):
            fields[name] = _validate(FieldSpec, value, f"problem.{name}", entries, origin)
        else:
            key = f"problem.{name}"
            raise ConfigError(f"Неизвестный ключ {key}", _line_for(key, entries, origin))

    box = _validate(SpaceTimeBox, box_values, "problem", entries, origin)
    params = _validate(ModelParams, param_values, "problem", entries, origin)
    output = _validate(OutputConfig, tree.get("output", {}), "output", entries, origin)
    for t in output.slices or []:
        if not 0.0 <= t <= box.T:
            raise ConfigError(f"output.slices: момент {t} вне [0, {box.T}]",
                              _line_for("output.slices", entries, origin))

    return RunConfig(
        box=box,
        params=params,
        fields=fields,
        solver=_validate(SolverConfig, tree.get("solver", {}), "solver", entries, origin),
        oracle=_validate(OracleConfig, tree.get("oracle", {}), "oracle", entries, origin),
        output=output,
        verify=_validate(VerifyConfig, tree.get("verify", {}), "verify", entries, origin),
        base_dir=base_dir or Path.cwd(),
        lines={key: line for key, (_, line) in entries.items()},
    )


def load_run_config(path) -> RunConfig:
    """Прочитать файл запуска; относительные пути CSV отсчитываются от его папки"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Не удалось прочитать {path}: {e}") from e
    return run_config_from_text(text, base_dir=path.resolve().parent)


def build_problem(run: RunConfig) -> ProblemData:
    """Собрать ProblemData; незаданные поля равны нулю"""
    domains = ProblemData.field_domains_for(run.box)
    built = []
    for name, (alpha_range, beta_range) in zip(INIT_NAMES + INFLOW_NAMES, domains):
        spec = run.fields.get(name, FieldSpec())
        try:
            built.append(build_field(spec, alpha_range, beta_range, name=name, base_dir=run.base_dir))
        except (FieldError, OSError, ValueError) as e:
            line = run.lines.get(f"problem.{name}.kind") or run.lines.get(f"problem.{name}.path")
            raise ConfigError(f"problem.{name}: {e}", line) from e
    try:
        return ProblemData(box=run.box, params=run.params, init=tuple(built[:4]), inflow=tuple(built[4:]))
    except ValidationError as e:
        raise ConfigError(f"Данные задачи: {e.errors()[0]['msg']}") from e
