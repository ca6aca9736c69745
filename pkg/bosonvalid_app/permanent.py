"""
Перманенты матриц: формула Райзера с обходом подмножеств в коде Грея
(O(2^n n)) и формула Глинна для перекрёстной проверки.
"""
import numpy as np

from .exceptions import DimensionError

RYSER = 'ryser'
GLYNN = 'glynn'

# Ограничение памяти на один блок пакетного вычисления
DEFAULT_CHUNK = 32768


def _check_stack(stack):
    stack = np.asarray(stack)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise DimensionError(f"Ожидается стопка квадратных матриц, получена форма {stack.shape}")
    if stack.shape[1] < 1:
        raise DimensionError("Размер матрицы должен быть не меньше 1")
    return stack


def _ryser_chunk(stack):
    n = stack.shape[1]
    dtype = np.result_type(stack.dtype, float)
    rowsums = np.zeros((stack.shape[0], n), dtype=dtype)
    total = np.zeros(stack.shape[0], dtype=dtype)
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        column = (k & -k).bit_length() - 1
        if (gray >> column) & 1:
            rowsums += stack[:, :, column]
        else:
            rowsums -= stack[:, :, column]
        if bin(gray).count('1') % 2:
            total -= rowsums.prod(axis=1)
        else:
            total += rowsums.prod(axis=1)
    return total if n % 2 == 0 else -total


def batch_permanent(stack, chunk_size=DEFAULT_CHUNK):
    """Перманенты стопки матриц формы (B, n, n) по формуле Райзера."""
    stack = _check_stack(stack)
    if stack.shape[1] == 1:
        return stack[:, 0, 0].astype(np.result_type(stack.dtype, float))
    parts = [
        _ryser_chunk(stack[start:start + chunk_size])
        for start in range(0, stack.shape[0], chunk_size)
    ]
    if not parts:
        return np.zeros(0, dtype=np.result_type(stack.dtype, float))
    return np.concatenate(parts)


def permanent_ryser(matrix):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise DimensionError(f"Ожидается матрица, получена форма {matrix.shape}")
    return batch_permanent(matrix[None, :, :])[0]


def permanent_glynn(matrix):
    """Формула Глинна: знаки дельта перебираются в коде Грея, delta_1 = +1."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise DimensionError(f"Ожидается матрица, получена форма {matrix.shape}")
    matrix = _check_stack(matrix[None, :, :])[0]
    n = matrix.shape[0]
    dtype = np.result_type(matrix.dtype, float)
    colsums = matrix.sum(axis=0).astype(dtype)
    delta = np.ones(n, dtype=int)
    sign = 1
    total = colsums.prod()
    for k in range(1, 1 << (n - 1)):
        row = (k & -k).bit_length()
        if delta[row] > 0:
            colsums -= 2 * matrix[row]
        else:
            colsums += 2 * matrix[row]
        delta[row] = -delta[row]
        sign = -sign
        total += sign * colsums.prod()
    return total / (1 << (n - 1))


def permanent(matrix, method=RYSER):
    """Перманент квадратной матрицы."""
    if method == RYSER:
        return permanent_ryser(matrix)
    if method == GLYNN:
        return permanent_glynn(matrix)
    raise DimensionError(f"Неизвестный метод вычисления перманента: {method!r}")
