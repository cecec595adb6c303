#!/usr/bin/env python3
"""
MHD 离散守恒律验证工具 - 主入口
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd
from tabulate import tabulate

from app.harness import ConfigError, RunConfig, convergence, output_dir, set_config, verify
from app.harness.runner import Runner
from app.lagrange import MapFoldingError
from app.solver import SolverAbort

# 汇总表最多展示的报告键数
SUMMARY_ROWS = 40


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def load_config(path: Optional[Path]) -> Optional[RunConfig]:
    """读取配置文件；出错时打印行号并退出"""
    if path is None:
        return None
    try:
        config = RunConfig.from_file(path)
    except ConfigError as e:
        print(f"[FAIL] 配置错误 ({path}): {e}")
        sys.exit(2)
    set_config(config)
    return config


def print_table(table: pd.DataFrame, floatfmt: str = ".3e") -> None:
    if table.empty:
        print("   (空)")
        return
    print(tabulate(table, headers="keys", tablefmt="github", showindex=False, floatfmt=floatfmt))


def run_command(config_path: Path, out: Optional[Path] = None) -> int:
    """
    执行一次运行并写出报告

    Args:
        config_path: 配置文件路径
        out: 输出目录，优先于环境变量与 output.dir

    Returns:
        退出码
    """
    config = load_config(config_path)
    target = output_dir(config, out)
    print(f"[INPUT] {config_path}")
    print(f"[OUTPUT] {target}")
    print("-" * 60)
    print(f"[STEP] 场景 {config.scenario.name}, 网格 {config.grid.nx}x{config.grid.ny}x{config.grid.nz}")

    try:
        record = Runner(config).run(target)
    except ConfigError as e:
        print(f"[FAIL] 配置错误: {e}")
        return 2
    except (SolverAbort, MapFoldingError) as e:
        print(f"[FAIL] 运行中止: {e}")
        return 3

    worst = record.worst("relative")
    table = pd.DataFrame({"key": worst.index, "relative": worst.to_numpy()})
    print_table(table.head(SUMMARY_ROWS))
    if len(table) > SUMMARY_ROWS:
        print(f"   ... 另有 {len(table) - SUMMARY_ROWS} 条，见 summary.csv")

    for failure in record.failures:
        print(f"   [WARN] {failure['identity']} (t={failure['t']:.4g}): {failure['error']}")
    for warning in record.dt_warnings:
        print(f"   [WARN] t={warning['t']:.4g}: dt={warning['dt']:.4g} 超过 stable_dt={warning['stable_dt']:.4g}")

    print("-" * 60)
    print(
        f"[DONE] 报告 {len(record.reports)}, 失败 {len(record.failures)}, "
        f"能量漂移 {record.energy_drift:.3e}, ∇·B 相对值 {record.divB_relative:.3e}"
    )
    print(f"[SUMMARY] {target / 'summary.csv'}")
    return 0


def convergence_command(config_path: Path, levels: Optional[int] = None, out: Optional[Path] = None) -> int:
    """在 n, 2n, 4n ... 上运行并打印观测阶"""
    config = load_config(config_path)
    target = output_dir(config, out)
    count = levels or config.convergence.levels
    print(f"[INPUT] {config_path}")
    print(f"[OUTPUT] {target}")
    print("-" * 60)
    print(f"[STEP] {count} 级网格，从 {config.grid.nx}x{config.grid.ny}x{config.grid.nz} 开始")

    try:
        result = convergence(config, count, target)
    except (ConfigError, ValueError) as e:
        print(f"[FAIL] 配置错误: {e}")
        return 2
    except (SolverAbort, MapFoldingError) as e:
        print(f"[FAIL] 运行中止: {e}")
        return 3

    print_table(result.table)
    failed = int((result.table["verdict"] == "fail").sum()) if not result.table.empty else 0
    print("-" * 60)
    status = "[OK]" if result.passed else "[FAIL]"
    print(f"{status} 共 {len(result.table)} 个报告键，低于阶下限 {failed}")
    print(f"[SUMMARY] {target / 'convergence.csv'}")
    return result.exit_code


def verify_command(
    config_path: Optional[Path] = None,
    out: Optional[Path] = None,
    only: Optional[List[str]] = None,
) -> int:
    """逐条运行验收标准"""
    config = load_config(config_path)
    print(f"[INPUT] {config_path or '默认配置'}")
    if out is not None:
        print(f"[OUTPUT] {out}")
    print("-" * 60)

    def progress(name: str) -> None:
        print(f"[STEP] {name}")

    try:
        result = verify(config, out, only, progress)
    except ConfigError as e:
        print(f"[FAIL] 配置错误: {e}")
        return 2
    table = result.table()
    print("-" * 60)
    print_table(table)
    for error in result.errors:
        print(f"   [FAIL] {error['criterion']}: {error['error']}")

    passed = sum(v.passed for v in result.verdicts)
    print("-" * 60)
    print(f"[DONE] 通过 {passed}, 失败 {len(result.verdicts) - passed}, 异常 {len(result.errors)}")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        table.to_csv(out / "verify.csv", index=False, float_format="%.17g")
        print(f"[SUMMARY] {out / 'verify.csv'}")
    return result.exit_code


def main():
    """主入口函数"""
    parser = argparse.ArgumentParser(
        description="理想 MHD 离散守恒律与重标记对称性验证工具",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  # 单次运行: 推进求解器与拉格朗日映射，按节奏写出各恒等式的残差报告
  python main.py run --config configs/orszag_tang.cfg
  python main.py run --config configs/orszag_tang.cfg --out outputs/ot

  # 收敛研究: 在 n, 2n, 4n 上运行并给出观测阶
  python main.py convergence --config configs/orszag_tang.cfg --levels 3

  # 验收套件: 逐条检查验收标准，全部通过时退出码为 0
  python main.py verify
  python main.py verify --only pv_law,cheviakov

环境变量:
  MHD_INVARIANTS_THREADS   收敛研究的并行进程数上限
  MHD_INVARIANTS_OUT       默认输出目录 (低于 --out，高于 output.dir)
        """,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="输出调试日志")

    subparsers = parser.add_subparsers(dest="command", help="可用命令")

    # run 子命令
    run_parser = subparsers.add_parser("run", help="按配置执行一次运行")
    run_parser.add_argument("--config", type=Path, required=True, help="配置文件路径")
    run_parser.add_argument("--out", type=Path, default=None, help="输出目录")

    # convergence 子命令
    convergence_parser = subparsers.add_parser("convergence", help="网格加密收敛阶研究")
    convergence_parser.add_argument("--config", type=Path, required=True, help="配置文件路径")
    convergence_parser.add_argument("--levels", type=int, default=None, help="分辨率级数 (默认取配置)")
    convergence_parser.add_argument("--out", type=Path, default=None, help="输出根目录")

    # verify 子命令
    verify_parser = subparsers.add_parser("verify", help="运行验收套件")
    verify_parser.add_argument("--config", type=Path, default=None, help="基准配置 (默认使用内置默认值)")
    verify_parser.add_argument("--out", type=Path, default=None, help="保留各项研究输出的目录")
    verify_parser.add_argument("--only", default=None, help="只运行指定标准，逗号分隔")

    args = parser.parse_args()
    setup_logging(args.verbose)

    if args.command == "run":
        sys.exit(run_command(args.config, args.out))
    elif args.command == "convergence":
        sys.exit(convergence_command(args.config, args.levels, args.out))
    elif args.command == "verify":
        only = [name.strip() for name in args.only.split(",") if name.strip()] if args.only else None
        sys.exit(verify_command(args.config, args.out, only))
    else:
        parser.print_help()
        sys.exit(1)


if __name__ == "__main__":
    main()
