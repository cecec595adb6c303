"""
二进制场转储与 JSON 输出
转储格式: 一行 ASCII 头 "name nx ny nz Lx Ly Lz t"，随后为小端 float64 原始数据
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from app.numerics import Grid

_DTYPE = np.dtype("<f8")


def _header(name: str, grid: Grid, t: float) -> bytes:
    if not name or any(c.isspace() for c in name):
        raise ValueError(f"转储名称不能为空或含空白: {name!r}")
    return (
        f"{name} {grid.nx} {grid.ny} {grid.nz} "
        f"{grid.Lx!r} {grid.Ly!r} {grid.Lz!r} {float(t)!r}\n"
    ).encode("ascii")


def write_raster(
    path: Union[str, Path], name: str, grid: Grid, values: np.ndarray, t: float
) -> Path:
    """
    写出一个场 (或任意前导分量的数组)

    Args:
        path: 输出文件
        name: 场名 (写入头部)
        grid: 网格
        values: 数组，最后三轴为网格轴
        t: 时间
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_header(name, grid, t))
        f.write(np.ascontiguousarray(values, dtype=_DTYPE).tobytes())
    return path


def read_raster(path: Union[str, Path]) -> Tuple[Dict[str, Any], np.ndarray]:
    """读取转储，返回 (头部字典, 数组)；前导分量数由数据长度推断"""
    with open(path, "rb") as f:
        line = f.readline().decode("ascii").split()
        payload = f.read()
    name, nx, ny, nz, lx, ly, lz, t = line
    header = {
        "name": name,
        "nx": int(nx),
        "ny": int(ny),
        "nz": int(nz),
        "Lx": float(lx),
        "Ly": float(ly),
        "Lz": float(lz),
        "t": float(t),
    }
    data = np.frombuffer(payload, dtype=_DTYPE)
    cells = header["nx"] * header["ny"] * header["nz"]
    lead = data.size // cells
    shape = (header["nx"], header["ny"], header["nz"])
    if lead > 1:
        shape = (lead,) + shape
    return header, data.reshape(shape).copy()


def sanitize(value: Any) -> Any:
    """NaN/Inf -> None，numpy 标量 -> Python 标量"""
    if isinstance(value, dict):
        return {str(k): sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(path: Union[str, Path], payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(sanitize(payload), f, ensure_ascii=False, indent=2, allow_nan=False)
        f.write("\n")
    return path
