"""
Состояния Фока и бесколлизионное подпространство.

Бесколлизионные состояния N бозонов в m модах нумеруются в
лексикографическом порядке кортежей занятых мод (0-based внутри кода,
1-based в текстовом представлении "6,7,8").
"""
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from itertools import chain, combinations

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import DimensionError, UnsupportedStateError


class Metric(str, Enum):
    """Метрики на векторах чисел заполнения"""
    L1 = 'L1'
    L2 = 'L2'

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise DimensionError(f"Неизвестная метрика: {value!r}") from None

    @property
    def scipy_name(self):
        return 'cityblock' if self is Metric.L1 else 'euclidean'


@dataclass(frozen=True)
class ModeOccupation:
    """Список чисел заполнения мод S = (s_1, ..., s_m)"""
    occupations: tuple

    def __post_init__(self):
        values = tuple(int(v) for v in self.occupations)
        if not values:
            raise DimensionError("Состояние должно содержать хотя бы одну моду")
        if any(v < 0 for v in values):
            raise DimensionError(f"Отрицательные числа заполнения: {values}")
        object.__setattr__(self, 'occupations', values)

    @classmethod
    def from_modes(cls, modes, n_modes):
        """Состояние по списку занятых мод (0-based, с повторами для коллизий)."""
        occupations = [0] * n_modes
        for mode in modes:
            mode = int(mode)
            if not 0 <= mode < n_modes:
                raise DimensionError(f"Мода {mode} вне диапазона [0, {n_modes})")
            occupations[mode] += 1
        return cls(tuple(occupations))

    @classmethod
    def parse(cls, text, n_modes):
        """Разбор текстовой формы "6,7,8" (1-based, по возрастанию)."""
        try:
            modes = [int(part) - 1 for part in str(text).split(',') if part.strip()]
        except ValueError:
            raise DimensionError(f"Некорректная запись состояния: {text!r}") from None
        if not modes:
            raise DimensionError(f"Пустая запись состояния: {text!r}")
        return cls.from_modes(modes, n_modes)

    @property
    def n_photons(self):
        return sum(self.occupations)

    @property
    def n_modes(self):
        return len(self.occupations)

    @property
    def is_collision_free(self):
        return all(v in (0, 1) for v in self.occupations)

    @property
    def occupied_modes(self):
        """Занятые моды (0-based), мода повторяется s_i раз."""
        return tuple(i for i, v in enumerate(self.occupations) for _ in range(v))

    def as_array(self):
        return np.asarray(self.occupations, dtype=float)

    def to_text(self):
        return ','.join(str(mode + 1) for mode in self.occupied_modes)

    def __str__(self):
        return f"({self.to_text()})"


@dataclass(frozen=True)
class HilbertIndex:
    """Позиция состояния в лексикографическом перечислении подпространства"""
    index: int
    n_photons: int
    n_modes: int

    def __post_init__(self):
        dim = hilbert_dimension(self.n_photons, self.n_modes)
        if not 0 <= self.index < dim:
            raise DimensionError(f"Индекс {self.index} вне диапазона [0, {dim})")


def hilbert_dimension(n_photons, n_modes):
    """Размерность бесколлизионного подпространства C(m, N)."""
    if n_photons < 1 or n_modes < 1 or n_photons > n_modes:
        raise DimensionError(f"Требуется 1 <= N <= m, получено N={n_photons}, m={n_modes}")
    return math.comb(n_modes, n_photons)


def collision_free_modes(n_photons, n_modes):
    """Таблица занятых мод всех бесколлизионных состояний, форма (C(m,N), N)."""
    dim = hilbert_dimension(n_photons, n_modes)
    flat = np.fromiter(
        chain.from_iterable(combinations(range(n_modes), n_photons)),
        dtype=np.int64,
        count=dim * n_photons,
    )
    return flat.reshape(dim, n_photons)


def enumerate_collision_free(n_photons, n_modes):
    """Все бесколлизионные состояния в лексикографическом порядке."""
    hilbert_dimension(n_photons, n_modes)
    return [
        ModeOccupation.from_modes(modes, n_modes)
        for modes in combinations(range(n_modes), n_photons)
    ]


@lru_cache(maxsize=64)
def _binomial_table(n_modes, n_photons):
    table = np.zeros((n_modes + 1, n_photons + 2), dtype=np.int64)
    for d in range(n_modes + 1):
        for k in range(n_photons + 2):
            table[d, k] = math.comb(d, k)
    return table


def _check_collision_free(state):
    if not state.is_collision_free:
        raise UnsupportedStateError(f"Состояние {state} содержит коллизии")


def rank(state):
    """Номер бесколлизионного состояния в лексикографическом перечислении."""
    _check_collision_free(state)
    n, m = state.n_photons, state.n_modes
    dim = hilbert_dimension(n, m)
    offset = sum(math.comb(m - 1 - c, n - i) for i, c in enumerate(state.occupied_modes))
    return HilbertIndex(dim - 1 - offset, n, m)


def unrank(index):
    """Обратное к rank: состояние по его номеру."""
    n, m = index.n_photons, index.n_modes
    remainder = hilbert_dimension(n, m) - 1 - index.index
    modes = []
    upper = m - 1
    for i in range(n):
        k = n - i
        # наибольшее d с C(d, k) <= remainder
        d = upper
        while math.comb(d, k) > remainder:
            d -= 1
        remainder -= math.comb(d, k)
        modes.append(m - 1 - d)
        upper = d - 1
    return ModeOccupation.from_modes(modes, m)


def rank_modes(modes, n_modes):
    """Векторизованный rank для массива занятых мод формы (n, N)."""
    modes = np.asarray(modes, dtype=np.int64)
    if modes.ndim != 2:
        raise DimensionError("Ожидается массив формы (n_events, N)")
    n_photons = modes.shape[1]
    dim = hilbert_dimension(n_photons, n_modes)
    table = _binomial_table(n_modes, n_photons)
    ks = n_photons - np.arange(n_photons)
    offsets = table[n_modes - 1 - modes, ks].sum(axis=1)
    return dim - 1 - offsets


def occupation_matrix(modes, n_modes):
    """Матрица чисел заполнения (n, m) по массиву занятых мод (n, N)."""
    modes = np.asarray(modes, dtype=np.int64)
    matrix = np.zeros((modes.shape[0], n_modes), dtype=float)
    rows = np.repeat(np.arange(modes.shape[0]), modes.shape[1])
    np.add.at(matrix, (rows, modes.ravel()), 1.0)
    return matrix


def distance(a, b, metric):
    """Расстояние L1 или L2 между двумя состояниями Фока."""
    metric = Metric.parse(metric)
    if a.n_modes != b.n_modes:
        raise DimensionError(f"Разное число мод: {a.n_modes} и {b.n_modes}")
    diff = a.as_array() - b.as_array()
    if metric is Metric.L1:
        return float(np.abs(diff).sum())
    return float(np.sqrt((diff ** 2).sum()))


def pairwise_distances(x, y, metric):
    """Матрица расстояний между строками x и y."""
    metric = Metric.parse(metric)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[1] != y.shape[1]:
        raise DimensionError(f"Разное число мод: {x.shape[1]} и {y.shape[1]}")
    return cdist(x, y, metric=metric.scipy_name)
