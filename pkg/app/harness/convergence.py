"""
收敛阶研究
同一场景在 n, 2n, 4n ... 上运行，逐对给出观测阶 log2(‖r_h‖/‖r_{h/2}‖)
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pytools.convergence import EOCRecorder

from app.noether import field_norms

from .config import RunConfig, thread_limit
from .runner import Runner

logger = logging.getLogger(__name__)

# 各恒等式的默认阶下限 (可被 convergence.floor.<tag> 覆盖)
DEFAULT_FLOORS: Dict[str, float] = {
    "eq1.2": 3.5,
    "eq1.3": 3.5,
    "nfa19": 3.5,
    "eq1.5": 3.5,
    "eq2.7": 3.0,
    "eq2.9": 3.0,
    "eq2.19": 2.0,
    "nfa15": 2.0,
    "nfa17": 2.0,
}


@dataclass
class LevelResult:
    """某一分辨率的精简结果 (跨进程传递)"""

    n: int
    norms: Dict[str, Dict[str, float]] = field(default_factory=dict)
    scales: Dict[str, float] = field(default_factory=dict)
    # t0 报告的范数
    initial: Dict[str, Dict[str, float]] = field(default_factory=dict)
    density_l2: Dict[str, float] = field(default_factory=dict)
    premises: Dict[str, Dict[str, float]] = field(default_factory=dict)
    extra: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    energy_drift: float = 0.0
    max_divergence: float = 0.0
    divB_relative: float = 0.0
    failures: List[Dict[str, Any]] = field(default_factory=list)


def run_level(config: RunConfig, out_dir: Optional[str]) -> LevelResult:
    """运行单个分辨率，只返回末时刻的范数"""
    record = Runner(config).run(out_dir, write=out_dir is not None)
    final = record.final()
    return LevelResult(
        n=config.grid.nx if config.grid.nx > 1 else config.grid.ny,
        norms={key: dict(r.norms) for key, r in final.items()},
        scales={key: float(r.scale) for key, r in final.items()},
        initial={key: dict(r.norms) for key, r in record.at_step(0).items()},
        density_l2={
            key: field_norms(r.density, r.weight)["L2"]
            for key, r in final.items()
            if r.density is not None
        },
        premises={key: dict(r.premise_norms) for key, r in final.items() if r.premise_norms},
        extra={key: dict(r.extra) for key, r in final.items() if r.extra},
        energy_drift=record.energy_drift,
        max_divergence=record.max_divergence,
        divB_relative=record.divB_relative,
        failures=record.failures,
    )


def pairwise_orders(errors: List[float]) -> List[float]:
    """相邻两级的观测阶；残差不单调下降时记为 NaN"""
    orders = []
    for coarse, fine in zip(errors[:-1], errors[1:]):
        if coarse > 0 and fine > 0 and fine < coarse:
            orders.append(math.log2(coarse / fine))
        else:
            orders.append(float("nan"))
    return orders


def floor_for(key: str, config: RunConfig) -> Optional[float]:
    """按完整键、再按方程标签查找阶下限"""
    floors = {**DEFAULT_FLOORS, **config.convergence.floor}
    if key in floors:
        return floors[key]
    return floors.get(key.split(":")[0])


@dataclass
class ConvergenceResult:
    table: pd.DataFrame
    levels: List[LevelResult]

    @property
    def passed(self) -> bool:
        return bool((self.table["verdict"] != "fail").all()) if not self.table.empty else True

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def order_table(levels: List[LevelResult], config: RunConfig) -> pd.DataFrame:
    """
    每个报告键一行: 各级范数、逐对阶、拟合阶与判定

    判定: noise (最细两级的相对残差都低于噪声底)、pass、fail、n/a (没有阶下限)
    """
    norm = config.convergence.norm
    noise = config.convergence.noise_floor
    keys = sorted(set.intersection(*(set(level.norms) for level in levels))) if levels else []
    rows = []
    for key in keys:
        errors = [level.norms[key][norm] for level in levels]
        relatives = [
            level.norms[key]["Linf"] / level.scales[key] if level.scales[key] > 0 else level.norms[key]["Linf"]
            for level in levels
        ]
        orders = pairwise_orders(errors)

        recorder = EOCRecorder()
        for level, error in zip(levels, errors):
            recorder.add_data_point(1.0 / level.n, error)
        fitted = float("nan")
        if all(e > 0 for e in errors):
            fitted = float(recorder.order_estimate())

        floor = floor_for(key, config)
        below_noise = max(relatives[-2:]) <= noise
        if below_noise:
            verdict = "noise"
        elif floor is None:
            verdict = "n/a"
        elif orders and np.isfinite(orders[-1]) and orders[-1] >= floor:
            verdict = "pass"
        else:
            verdict = "fail"
        if any(not np.isfinite(o) for o in orders) and not below_noise:
            logger.warning("%s: residuals not monotone under refinement %s", key, errors)

        row = {"key": key, "floor": floor}
        row.update({f"{norm}_n{level.n}": e for level, e in zip(levels, errors)})
        row.update({f"order_{a.n}_{b.n}": o for a, b, o in zip(levels[:-1], levels[1:], orders)})
        row["order_fit"] = fitted
        row["verdict"] = verdict
        rows.append(row)
    return pd.DataFrame(rows)


def convergence(
    config: Union[RunConfig, str, Path],
    levels: Optional[int] = None,
    out_dir: Optional[Union[str, Path]] = None,
) -> ConvergenceResult:
    """
    在逐级加密的网格上运行同一配置

    Args:
        config: 配置对象或配置文件路径
        levels: 分辨率级数 (≥ 2)，缺省取 convergence.levels
        out_dir: 输出根目录，各级写入 <out_dir>/level_<n>

    Returns:
        ConvergenceResult，exit_code 非零表示有阶低于下限
    """
    if not isinstance(config, RunConfig):
        config = RunConfig.from_file(config)
    count = levels or config.convergence.levels
    if count < 2:
        raise ValueError(f"收敛研究至少需要 2 级: {count}")

    configs = [config.refined(2**k) for k in range(count)]
    dirs: List[Optional[str]] = [None] * count
    if out_dir is not None:
        root = Path(out_dir)
        dirs = [str(root / f"level_{c.grid.nx}x{c.grid.ny}x{c.grid.nz}") for c in configs]

    workers = min(count, thread_limit())
    logger.info("convergence: %d levels, %d workers", count, workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_level, configs, dirs))
    else:
        results = [run_level(c, d) for c, d in zip(configs, dirs)]

    table = order_table(results, config)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        table.to_csv(Path(out_dir) / "convergence.csv", index=False, float_format="%.17g")
    return ConvergenceResult(table=table, levels=results)
