"""
运行配置
纯文本 key = value，键带点分节 (grid.nx、eos.gamma ...)，用 python-dotenv 的解析器逐行读取
"""

import hashlib
import io
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv
from dotenv.parser import parse_stream

from app.numerics import Grid
from app.thermo import PolytropicEos

PROJECT_ROOT = Path(__file__).resolve().parents[2]

load_dotenv(dotenv_path=PROJECT_ROOT / ".env")

THREADS_ENV = "MHD_INVARIANTS_THREADS"
OUTPUT_ENV = "MHD_INVARIANTS_OUT"


class ConfigError(ValueError):
    """配置文件无法解析或取值非法，line 为出错的行号 (从 1 开始)"""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"第 {line} 行: {message}"
        super().__init__(message)
        self.line = line


@dataclass
class GridConfig:
    nx: int = 64
    ny: int = 64
    nz: int = 1
    Lx: float = 2 * math.pi
    Ly: float = 2 * math.pi
    Lz: float = 2 * math.pi
    order: int = 4

    def to_grid(self) -> Grid:
        return Grid(self.nx, self.ny, self.nz, self.Lx, self.Ly, self.Lz, self.order)


@dataclass
class EosConfig:
    gamma: float = 5.0 / 3.0
    cv: float = 1.0
    S_ref: float = 0.0
    mu0: float = 1.0

    def to_eos(self) -> PolytropicEos:
        return PolytropicEos(self.gamma, self.cv, self.S_ref, self.mu0)


@dataclass
class ScenarioConfig:
    name: str = "orszag-tang-25d"
    # 为空时使用预设的默认标签
    labels: List[str] = field(default_factory=list)
    # auto 表示沿用预设; cartesian | curved | none | labels (只由携带的 ψ, χ 构造生成元)
    foliation: str = "auto"
    foliation_amplitude: float = 0.1
    entropy_closure: str = "chi"
    entropy_amplitude: float = 0.1
    velocity_amplitude: float = 0.5
    magnetic: bool = True
    ertel: bool = False
    vector_potential: bool = False


@dataclass
class RunSection:
    t_end: float = 0.2
    cfl: float = 0.3
    # 相邻两次报告之间的步数，0 表示只在 t_end 报告
    cadence: int = 0
    mode: str = "semi-discrete"
    interp_order: int = 3
    tracer_samples: int = 100


@dataclass
class ReportsConfig:
    # auto 表示场景适用的全部恒等式
    list: List[str] = field(default_factory=lambda: ["auto"])
    psi: str = ""
    curl_term: bool = False
    generator_perturbation: float = 0.0


@dataclass
class OutputConfig:
    dir: str = "outputs/run"
    dumps: bool = False


@dataclass
class ConvergenceConfig:
    levels: int = 3
    norm: str = "Linf"
    noise_floor: float = 1e-10
    floor: Dict[str, float] = field(default_factory=dict)


@dataclass
class VerifyConfig:
    base_n: int = 64


@dataclass
class DebugConfig:
    lorentz_sign: float = 1.0


SECTIONS = {
    "grid": GridConfig,
    "eos": EosConfig,
    "scenario": ScenarioConfig,
    "run": RunSection,
    "reports": ReportsConfig,
    "output": OutputConfig,
    "convergence": ConvergenceConfig,
    "verify": VerifyConfig,
    "debug": DebugConfig,
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(raw: str, kind: Any) -> Any:
    text = raw.strip()
    if kind is bool:
        if text.lower() in _TRUE:
            return True
        if text.lower() in _FALSE:
            return False
        raise ValueError(f"无法解析为布尔值: {raw!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind == List[str]:
        return [item.strip() for item in text.split(",") if item.strip()]
    return text


def _binding_line(binding: Any) -> int:
    """键所在的行号 (解析器把前导空行计入上一个标记位置)"""
    text = binding.original.string
    leading = text[: len(text) - len(text.lstrip())]
    return binding.original.line + leading.count("\n")


@dataclass
class RunConfig:
    """
    一次运行的完整配置

    使用示例:
        config = RunConfig.from_file("configs/orszag_tang.cfg")
        config.validate()
        grid = config.grid.to_grid()
    """

    grid: GridConfig = field(default_factory=GridConfig)
    eos: EosConfig = field(default_factory=EosConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    run: RunSection = field(default_factory=RunSection)
    reports: ReportsConfig = field(default_factory=ReportsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    debug: DebugConfig = field(default_factory=DebugConfig)
    source: str = ""
    text: str = ""

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"配置文件不存在: {path}")
        return cls.from_text(path.read_text(encoding="utf-8"), source=str(path))

    @classmethod
    def from_text(cls, text: str, source: str = "<string>") -> "RunConfig":
        """逐行解析，无法解析或未知的键抛出带行号的 ConfigError"""
        config = cls(source=source, text=text)
        for binding in parse_stream(io.StringIO(text)):
            line = _binding_line(binding)
            if binding.error:
                raise ConfigError(f"无法解析: {binding.original.string.strip()!r}", line)
            if binding.key is None:
                continue
            if binding.value is None:
                raise ConfigError(f"键 {binding.key} 缺少取值", line)
            config.set(binding.key, binding.value, line)
        config.validate()
        return config

    def set(self, key: str, raw: str, line: Optional[int] = None) -> None:
        parts = key.split(".")
        if len(parts) < 2 or parts[0] not in SECTIONS:
            raise ConfigError(f"未知配置键: {key}", line)
        section = getattr(self, parts[0])
        if parts[0] == "convergence" and parts[1] == "floor":
            if len(parts) < 3:
                raise ConfigError(f"convergence.floor 需要指定恒等式标签: {key}", line)
            try:
                section.floor[".".join(parts[2:])] = float(raw)
            except ValueError as e:
                raise ConfigError(str(e), line) from e
            return
        if len(parts) != 2:
            raise ConfigError(f"未知配置键: {key}", line)
        kinds = {f.name: f.type for f in fields(section)}
        if parts[1] not in kinds:
            raise ConfigError(f"未知配置键: {key}", line)
        try:
            setattr(section, parts[1], _convert(raw, kinds[parts[1]]))
        except ValueError as e:
            raise ConfigError(f"{key}: {e}", line) from e

    def validate(self) -> bool:
        """验证取值范围，不合法时抛出 ConfigError"""
        if self.run.t_end <= 0:
            raise ConfigError(f"run.t_end 必须为正: {self.run.t_end}")
        if not 0 < self.run.cfl <= 1:
            raise ConfigError(f"run.cfl 必须在 (0, 1] 内: {self.run.cfl}")
        if self.run.mode not in ("semi-discrete", "snapshot"):
            raise ConfigError(f"run.mode 只能是 semi-discrete 或 snapshot: {self.run.mode}")
        if self.run.cadence < 0:
            raise ConfigError(f"run.cadence 不能为负: {self.run.cadence}")
        if self.run.interp_order not in (1, 3, 5):
            raise ConfigError(f"run.interp_order 仅支持 1/3/5: {self.run.interp_order}")
        if self.convergence.levels < 2:
            raise ConfigError(f"convergence.levels 至少为 2: {self.convergence.levels}")
        if self.convergence.norm not in ("L2", "Linf"):
            raise ConfigError(f"convergence.norm 只能是 L2 或 Linf: {self.convergence.norm}")
        if self.debug.lorentz_sign not in (1.0, -1.0):
            raise ConfigError(f"debug.lorentz_sign 只能是 1 或 -1: {self.debug.lorentz_sign}")
        try:
            self.grid.to_grid()
            self.eos.to_eos()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return True

    def refined(self, factor: int) -> "RunConfig":
        """活动维度按 factor 加密的副本 (哈希改按解析后的取值计算)"""
        grid = self.grid
        if factor == 1:
            return self
        return replace(
            self,
            text="",
            grid=replace(
                grid,
                nx=grid.nx * factor if grid.nx > 1 else 1,
                ny=grid.ny * factor if grid.ny > 1 else 1,
                nz=grid.nz * factor if grid.nz > 1 else 1,
            ),
        )

    def with_output(self, directory: Union[str, Path]) -> "RunConfig":
        return replace(self, output=replace(self.output, dir=str(directory)))

    @property
    def sha256(self) -> str:
        """原始配置文本的哈希；没有文本时对解析后的取值求哈希"""
        payload = self.text if self.text else repr(self.to_dict())
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, Any]:
        return {name: asdict(getattr(self, name)) for name in SECTIONS}


def output_dir(config: RunConfig, override: Optional[Union[str, Path]] = None) -> Path:
    """命令行参数 > 环境变量 MHD_INVARIANTS_OUT > output.dir"""
    if override is not None:
        return Path(override)
    env = os.getenv(OUTPUT_ENV)
    return Path(env) if env else Path(config.output.dir)


def thread_limit(default: int = 1) -> int:
    """环境变量 MHD_INVARIANTS_THREADS，非法或缺省时取 default"""
    raw = os.getenv(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return default


# 默认配置实例
_default_config: Optional[RunConfig] = None


def get_config() -> RunConfig:
    """获取全局配置"""
    global _default_config
    if _default_config is None:
        _default_config = RunConfig()
    return _default_config


def set_config(config: RunConfig):
    """设置全局配置"""
    global _default_config
    _default_config = config
