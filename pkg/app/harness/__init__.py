"""
运行编排模块
配置、初值预设、恒等式注册表、时间循环、收敛研究与验收套件
"""

from .config import (
    ConfigError,
    RunConfig,
    get_config,
    output_dir,
    set_config,
    thread_limit,
)
from .convergence import ConvergenceResult, LevelResult, convergence, order_table, pairwise_orders
from .identities import IDENTITIES, BaseIdentity, IdentityContext, IdentitySuite
from .runner import RunRecord, Runner, run, write_outputs
from .scenarios import SCENARIOS, BaseScenario, ScenarioSetup, build_scenario, get_scenario
from .verify import AcceptanceSuite, Verdict, VerifyResult, verify

__all__ = [
    # 配置
    "RunConfig",
    "ConfigError",
    "get_config",
    "set_config",
    "output_dir",
    "thread_limit",
    # 场景与恒等式
    "BaseScenario",
    "ScenarioSetup",
    "SCENARIOS",
    "get_scenario",
    "build_scenario",
    "BaseIdentity",
    "IdentityContext",
    "IdentitySuite",
    "IDENTITIES",
    # 运行
    "Runner",
    "RunRecord",
    "run",
    "write_outputs",
    "convergence",
    "ConvergenceResult",
    "LevelResult",
    "order_table",
    "pairwise_orders",
    "verify",
    "AcceptanceSuite",
    "VerifyResult",
    "Verdict",
]
