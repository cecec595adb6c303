"""
逐点代数
约定: 标量 (...), 矢量 (3, ...), 张量 (3, 3, ...)，T[i, j] 为第 i 行第 j 列
"""

from typing import Optional

import numpy as np

LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_i, _j, _k] = 1.0
    LEVI_CIVITA[_i, _k, _j] = -1.0


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("i...,i...->...", a, b)


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def norm2(a: np.ndarray) -> np.ndarray:
    return dot(a, a)


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(M v)_i = M_ij v_j"""
    return np.einsum("ij...,j...->i...", m, v)


def vecmat(v: np.ndarray, m: np.ndarray) -> np.ndarray:
    """(v M)_j = v_i M_ij，即 Mᵀ v"""
    return np.einsum("i...,ij...->j...", v, m)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ik...,kj...->ij...", a, b)


def transpose(m: np.ndarray) -> np.ndarray:
    return np.swapaxes(m, 0, 1)


def identity(shape) -> np.ndarray:
    """形状为 (3, 3, *shape) 的逐点单位张量"""
    eye = np.zeros((3, 3) + tuple(shape))
    for i in range(3):
        eye[i, i] = 1.0
    return eye


def determinant(m: np.ndarray) -> np.ndarray:
    """3×3 逐点行列式"""
    return dot(m[:, 0], cross(m[:, 1], m[:, 2]))


def cofactor(m: np.ndarray) -> np.ndarray:
    """
    3×3 逐点余子式矩阵 A = cof(M)

    满足 A·Mᵀ = det(M)·I，第 j 列由 M 另外两列的叉积给出
    """
    c0 = cross(m[:, 1], m[:, 2])
    c1 = cross(m[:, 2], m[:, 0])
    c2 = cross(m[:, 0], m[:, 1])
    # 行列式对 M_kj 的偏导
    return np.stack([c0, c1, c2], axis=1)


def inverse(m: np.ndarray, det: Optional[np.ndarray] = None) -> np.ndarray:
    det = determinant(m) if det is None else det
    return transpose(cofactor(m)) / det


def axial(m: np.ndarray) -> np.ndarray:
    """c_i = ε_ijk M_jk"""
    return np.einsum("ijk,jk...->i...", LEVI_CIVITA, m)


def outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("i...,j...->ij...", a, b)


def magnitude(a: np.ndarray) -> np.ndarray:
    return np.sqrt(norm2(a))
