"""
状态方程
内能闭合 ε(ρ, S) 与热力学第一定律给出的 p、T、h
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict

import numpy as np


class EosDomainError(ValueError):
    """密度不在状态方程定义域内"""


@dataclass
class ThermoState:
    """一次状态方程求值的全部输出"""

    eps: np.ndarray
    p: np.ndarray
    T: np.ndarray
    h: np.ndarray

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {"eps": self.eps, "p": self.p, "T": self.T, "h": self.h}


class EquationOfState(ABC):
    """状态方程基类，子类只需给出 ε 及其偏导"""

    mu0: float = 1.0

    @abstractmethod
    def internal_energy(self, rho, S) -> np.ndarray:
        """单位体积内能 ε(ρ, S)"""

    @abstractmethod
    def eps_rho(self, rho, S) -> np.ndarray:
        """∂ε/∂ρ"""

    @abstractmethod
    def eps_S(self, rho, S) -> np.ndarray:
        """∂ε/∂S"""

    @abstractmethod
    def sound_speed_squared(self, rho, S) -> np.ndarray:
        """等熵声速平方 ∂p/∂ρ"""

    def _check(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if np.any(~(rho > 0)):
            bad = np.argwhere(~(rho > 0))
            where = tuple(int(i) for i in bad[0]) if bad.size else ()
            raise EosDomainError(f"密度必须为正，位置 {where} 处 ρ={rho[where]}")
        return rho

    def evaluate(self, rho, S) -> ThermoState:
        rho = self._check(rho)
        S = np.asarray(S, dtype=float)
        eps = self.internal_energy(rho, S)
        p = rho * self.eps_rho(rho, S) - eps
        T = self.eps_S(rho, S) / rho
        h = (eps + p) / rho
        return ThermoState(eps=eps, p=p, T=T, h=h)

    def pressure(self, rho, S) -> np.ndarray:
        return self.evaluate(rho, S).p


@dataclass
class PolytropicEos(EquationOfState):
    """
    带熵的多方闭合

    ε = ρ^γ exp((S - S_ref)/c_v) / (γ - 1)，于是 p = (γ-1)ε，T = ε/(ρ c_v)
    """

    gamma: float = 5.0 / 3.0
    cv: float = 1.0
    S_ref: float = 0.0
    mu0: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> bool:
        if not self.gamma > 1:
            raise ValueError(f"绝热指数必须大于 1: gamma={self.gamma}")
        if not self.cv > 0:
            raise ValueError(f"定容比热必须为正: cv={self.cv}")
        if not self.mu0 > 0:
            raise ValueError(f"磁导率必须为正: mu0={self.mu0}")
        return True

    def _entropy_factor(self, S) -> np.ndarray:
        return np.exp((np.asarray(S, dtype=float) - self.S_ref) / self.cv)

    def internal_energy(self, rho, S) -> np.ndarray:
        return rho**self.gamma * self._entropy_factor(S) / (self.gamma - 1.0)

    def eps_rho(self, rho, S) -> np.ndarray:
        return self.gamma * rho ** (self.gamma - 1.0) * self._entropy_factor(S) / (
            self.gamma - 1.0
        )

    def eps_S(self, rho, S) -> np.ndarray:
        return self.internal_energy(rho, S) / self.cv

    def evaluate(self, rho, S) -> ThermoState:
        rho = self._check(rho)
        eps = self.internal_energy(rho, S)
        p = (self.gamma - 1.0) * eps
        return ThermoState(eps=eps, p=p, T=eps / (rho * self.cv), h=(eps + p) / rho)

    def sound_speed_squared(self, rho, S) -> np.ndarray:
        rho = self._check(rho)
        return self.gamma * self.evaluate(rho, S).p / rho

    def entropy_for(self, rho, p) -> np.ndarray:
        """给定 ρ、p 反求 S"""
        rho = self._check(rho)
        return self.S_ref + self.cv * np.log(np.asarray(p, dtype=float) / rho**self.gamma)


def eos_eval(eos: EquationOfState, rho, S) -> Dict[str, np.ndarray]:
    """
    状态方程求值

    Args:
        eos: 状态方程
        rho: 密度 (>0)
        S: 比熵

    Returns:
        {"eps", "p", "T", "h"}
    """
    return eos.evaluate(rho, S).as_dict()
