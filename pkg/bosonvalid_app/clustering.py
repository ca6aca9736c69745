"""
Кластерные структуры на выходных событиях: пузырьковая кластеризация,
иерархическая агломерация центроидов и K-средних с тремя способами
инициализации.

Все алгоритмы работают с различными наблюдёнными состояниями, взвешенными
кратностью, поэтому повторное событие учитывается столько раз, сколько
оно встретилось в выборке.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .exceptions import (
    CoverageError,
    DimensionError,
    HaltingFailureError,
    InfeasibleClusterCountError,
    InsufficientDataError,
    InvalidParameterError,
)
from .fock import Metric, occupation_matrix, pairwise_distances
from .seeding import make_rng

logger = logging.getLogger(__name__)

BUBBLE = 'bubble'
HIERARCHICAL = 'hierarchical'
KMEANS = 'kmeans'
ALGORITHMS = (BUBBLE, HIERARCHICAL, KMEANS)

INIT_UNIFORM = 'uniform'
INIT_KMEANS_PP = 'kmeans++'
INIT_HIERARCHICAL = 'hierarchical'
INIT_STRATEGIES = (INIT_UNIFORM, INIT_KMEANS_PP, INIT_HIERARCHICAL)

DEFAULT_K = 25
DEFAULT_MIN_CLUSTER_SIZE = 5
DEFAULT_OUTLIER_FRACTION = 0.01
DEFAULT_MAX_ITER = 100
DEFAULT_VOTING_TRIALS = 11
DEFAULT_BUBBLE_RADIUS = {Metric.L1: 4.0, Metric.L2: 2.0}

# Минимальное число кластеров: критерию нужно nu = k - 1 >= 2
MIN_CLUSTERS = 3


@dataclass
class ClusteringConfig:
    """Параметры обучения кластерной структуры"""
    algorithm: str = KMEANS
    k: int = DEFAULT_K
    radius: Optional[float] = None
    outlier_fraction: float = DEFAULT_OUTLIER_FRACTION
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE
    max_iter: int = DEFAULT_MAX_ITER
    metric: Metric = Metric.L2
    init: str = INIT_KMEANS_PP
    voting_trials: int = 1

    def __post_init__(self):
        self.metric = Metric.parse(self.metric)
        self.algorithm = str(self.algorithm).lower()
        self.init = str(self.init).lower()
        if self.algorithm not in ALGORITHMS:
            raise InvalidParameterError(f"Неизвестный алгоритм кластеризации: {self.algorithm!r}")
        if self.init not in INIT_STRATEGIES:
            raise InvalidParameterError(f"Неизвестная инициализация K-средних: {self.init!r}")
        if self.k < MIN_CLUSTERS:
            raise InvalidParameterError(f"Число кластеров должно быть не меньше {MIN_CLUSTERS}, получено {self.k}")
        if self.min_cluster_size < DEFAULT_MIN_CLUSTER_SIZE:
            raise InvalidParameterError(
                f"Минимальный размер кластера должен быть не меньше {DEFAULT_MIN_CLUSTER_SIZE}, "
                f"получено {self.min_cluster_size}"
            )
        if not 0 <= self.outlier_fraction < 1:
            raise InvalidParameterError(f"Доля выбросов должна лежать в [0, 1), получено {self.outlier_fraction}")
        if self.max_iter < 1:
            raise InvalidParameterError(f"max_iter должно быть положительным, получено {self.max_iter}")
        if self.voting_trials < 1 or self.voting_trials % 2 == 0:
            raise InvalidParameterError(f"Число голосований должно быть нечётным, получено {self.voting_trials}")
        if self.radius is None:
            self.radius = DEFAULT_BUBBLE_RADIUS[self.metric]
        if self.radius <= 0:
            raise InvalidParameterError(f"Радиус пузыря должен быть положительным, получено {self.radius}")

    def to_dict(self):
        data = asdict(self)
        data['metric'] = self.metric.value
        return data

    @classmethod
    def from_dict(cls, data):
        known = {name: data[name] for name in cls.__dataclass_fields__ if name in data}
        return cls(**known)


@dataclass
class ClusterStructure:
    """
    Кластерная структура, обученная на выборке.

    assignments относится к обучающей выборке: номер кластера каждого
    события, -1 для выбросов. counts - число событий в кластерах.
    """
    centroids: np.ndarray
    metric: Metric
    assignments: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    counts: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    outliers: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    provenance: dict = field(default_factory=dict)
    centroid_history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.centroids = np.atleast_2d(np.asarray(self.centroids, dtype=float))
        self.metric = Metric.parse(self.metric)
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.outliers = np.asarray(self.outliers, dtype=np.int64)
        if self.centroids.shape[0] < 1:
            raise DimensionError("Структура должна содержать хотя бы один центроид")

    @property
    def n_clusters(self):
        return self.centroids.shape[0]

    @property
    def n_modes(self):
        return self.centroids.shape[1]

    def to_dict(self):
        return {
            'metric': self.metric.value,
            'centroids': self.centroids.tolist(),
            'counts': self.counts.tolist(),
            'assignments': self.assignments.tolist(),
            'outliers': self.outliers.tolist(),
            'provenance': self.provenance,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            np.asarray(data['centroids'], dtype=float),
            data['metric'],
            data.get('assignments', []),
            data.get('counts', []),
            data.get('outliers', []),
            dict(data.get('provenance', {})),
        )


@dataclass
class _DistinctStates:
    """Различные состояния выборки в лексикографическом порядке"""
    points: np.ndarray
    weights: np.ndarray
    inverse: np.ndarray

    @property
    def size(self):
        return self.points.shape[0]


def _distinct_states(sample):
    if sample.n_events == 0:
        raise InsufficientDataError("Кластеризация пустой выборки невозможна")
    _, first, inverse, counts = np.unique(
        sample.ranks(), return_index=True, return_inverse=True, return_counts=True
    )
    points = occupation_matrix(sample.modes[first], sample.n_modes)
    return _DistinctStates(points, counts.astype(float), inverse.ravel())


def _nearest(points, centroids, metric):
    """Номер ближайшего центроида (при равенстве наименьший) и расстояние до него."""
    distances = pairwise_distances(points, centroids, metric)
    labels = np.argmin(distances, axis=1)
    return labels, distances[np.arange(len(labels)), labels]


def _finalize(states, centroids, metric, provenance, outlier_mask=None):
    """Окончательное отнесение к ближайшим центроидам и подсчёт событий."""
    labels, _ = _nearest(states.points, centroids, metric)
    if outlier_mask is not None:
        labels = np.where(outlier_mask, -1, labels)
    assignments = labels[states.inverse]
    counts = np.bincount(assignments[assignments >= 0], minlength=centroids.shape[0])
    outliers = np.flatnonzero(assignments < 0)
    return ClusterStructure(centroids, metric, assignments, counts, outliers, provenance)


def bubble_cluster(sample, radius, metric):
    """
    Пузырьковая кластеризация.

    Центром очередного пузыря становится самое частое ещё не отнесённое
    состояние (при равной частоте - лексикографически меньшее), в пузырь
    попадают все не отнесённые состояния на расстоянии меньше radius.
    """
    metric = Metric.parse(metric)
    if radius <= 0:
        raise InvalidParameterError(f"Радиус пузыря должен быть положительным, получено {radius}")
    states = _distinct_states(sample)
    order = np.lexsort((np.arange(states.size), -states.weights))
    unassigned = np.ones(states.size, dtype=bool)
    centers = []
    for candidate in order:
        if not unassigned[candidate]:
            continue
        centers.append(candidate)
        distances = pairwise_distances(states.points[candidate], states.points, metric)[0]
        unassigned &= ~(distances < radius)
    logger.debug(f"Пузырьковая кластеризация: {len(centers)} кластеров при радиусе {radius}")
    provenance = {'algorithm': BUBBLE, 'parameters': {'radius': radius, 'metric': metric.value}, 'seed': None}
    return _finalize(states, states.points[centers], metric, provenance)


class _CentroidLinkage:
    """Агломерация центроидов с кэшем ближайшего соседа для каждой строки"""

    def __init__(self, points, weights, metric):
        self.metric = metric
        self.centroids = points.copy()
        self.weights = weights.copy()
        self.members = [[i] for i in range(len(points))]
        self.active = np.ones(len(points), dtype=bool)
        self.distances = pairwise_distances(points, points, metric)
        np.fill_diagonal(self.distances, np.inf)
        self.nearest = np.argmin(self.distances, axis=1)
        self.nearest_distance = self.distances[np.arange(len(points)), self.nearest]

    @property
    def n_active(self):
        return int(self.active.sum())

    def small_fraction(self, min_size):
        small = self.active & (self.weights < min_size)
        return self.weights[small].sum() / self.weights[self.active].sum()

    def _refresh_row(self, row):
        self.nearest[row] = np.argmin(self.distances[row])
        self.nearest_distance[row] = self.distances[row, self.nearest[row]]

    def merge_closest(self):
        first = int(np.argmin(self.nearest_distance))
        second = int(self.nearest[first])
        keep, drop = min(first, second), max(first, second)
        total = self.weights[keep] + self.weights[drop]
        self.centroids[keep] = (
            self.weights[keep] * self.centroids[keep] + self.weights[drop] * self.centroids[drop]
        ) / total
        self.weights[keep] = total
        self.members[keep].extend(self.members[drop])
        self.members[drop] = []
        self.active[drop] = False

        self.distances[drop, :] = np.inf
        self.distances[:, drop] = np.inf
        self.nearest_distance[drop] = np.inf
        updated = pairwise_distances(self.centroids[keep], self.centroids, self.metric)[0]
        updated[~self.active] = np.inf
        updated[keep] = np.inf
        self.distances[keep, :] = updated
        self.distances[:, keep] = updated
        self._refresh_row(keep)

        stale = self.active & ((self.nearest == keep) | (self.nearest == drop))
        stale[keep] = False
        for row in np.flatnonzero(stale):
            self._refresh_row(row)
        closer = self.active & (updated < self.nearest_distance)
        self.nearest[closer] = keep
        self.nearest_distance[closer] = updated[closer]


def hierarchical_cluster(sample, outlier_fraction=DEFAULT_OUTLIER_FRACTION,
                         min_size=DEFAULT_MIN_CLUSTER_SIZE, metric=Metric.L2):
    """
    Восходящая кластеризация с центроидным связыванием.

    Остановка, как только доля событий в кластерах размера меньше min_size
    не превышает outlier_fraction; эти кластеры становятся выбросами.
    """
    metric = Metric.parse(metric)
    if not 0 <= outlier_fraction < 1:
        raise InvalidParameterError(f"Доля выбросов должна лежать в [0, 1), получено {outlier_fraction}")
    states = _distinct_states(sample)
    linkage = _CentroidLinkage(states.points, states.weights, metric)
    while linkage.small_fraction(min_size) > outlier_fraction:
        if linkage.n_active <= MIN_CLUSTERS:
            raise HaltingFailureError(
                f"Условие остановки не выполнено: осталось {linkage.n_active} кластера, "
                f"доля малых кластеров {linkage.small_fraction(min_size):.4f} > {outlier_fraction}"
            )
        linkage.merge_closest()

    retained = [
        i for i in np.flatnonzero(linkage.active)
        if linkage.weights[i] >= min_size
    ]
    retained.sort(key=lambda i: min(linkage.members[i]))
    outlier_mask = np.ones(states.size, dtype=bool)
    for i in retained:
        outlier_mask[linkage.members[i]] = False
    logger.debug(
        f"Иерархическая кластеризация: {len(retained)} кластеров, "
        f"{int(states.weights[outlier_mask].sum())} событий в выбросах"
    )
    provenance = {
        'algorithm': HIERARCHICAL,
        'parameters': {'outlier_fraction': outlier_fraction, 'min_size': min_size, 'metric': metric.value},
        'seed': None,
    }
    return _finalize(states, linkage.centroids[retained], metric, provenance, outlier_mask)


def _farthest_point_padding(points, centroids, k, metric, weights):
    centroids = list(centroids)
    if not centroids:
        centroids.append(points[int(np.argmax(weights))])
    while len(centroids) < k:
        _, gaps = _nearest(points, np.asarray(centroids), metric)
        centroids.append(points[int(np.argmax(gaps))])
    return np.asarray(centroids)


def _init_from_states(states, k, strategy, metric, seed, outlier_fraction, min_size):
    if k < 1:
        raise InvalidParameterError(f"Число кластеров должно быть положительным, получено {k}")
    if k > states.size:
        raise InfeasibleClusterCountError(
            f"Запрошено {k} кластеров, а различных наблюдённых состояний только {states.size}"
        )
    rng = make_rng(seed)
    if strategy == INIT_UNIFORM:
        return states.points[np.sort(rng.choice(states.size, size=k, replace=False))]
    if strategy == INIT_KMEANS_PP:
        chosen = [int(rng.choice(states.size, p=states.weights / states.weights.sum()))]
        gaps = pairwise_distances(states.points[chosen[0]], states.points, metric)[0] ** 2
        for _ in range(1, k):
            scores = states.weights * gaps
            pick = int(rng.choice(states.size, p=scores / scores.sum()))
            chosen.append(pick)
            gaps = np.minimum(gaps, pairwise_distances(states.points[pick], states.points, metric)[0] ** 2)
        return states.points[chosen]
    if strategy == INIT_HIERARCHICAL:
        agglomerated = _hierarchical_from_states(states, outlier_fraction, min_size, metric)
        order = np.argsort(-agglomerated['weights'], kind='stable')[:k]
        return _farthest_point_padding(states.points, agglomerated['centroids'][order], k, metric, states.weights)
    raise InvalidParameterError(f"Неизвестная инициализация K-средних: {strategy!r}")


def _hierarchical_from_states(states, outlier_fraction, min_size, metric):
    linkage = _CentroidLinkage(states.points, states.weights, metric)
    while linkage.small_fraction(min_size) > outlier_fraction and linkage.n_active > MIN_CLUSTERS:
        linkage.merge_closest()
    retained = np.flatnonzero(linkage.active & (linkage.weights >= min_size))
    return {'centroids': linkage.centroids[retained], 'weights': linkage.weights[retained]}


def kmeans_init(sample, k, strategy=INIT_KMEANS_PP, metric=Metric.L2, seed=0,
                outlier_fraction=DEFAULT_OUTLIER_FRACTION, min_size=DEFAULT_MIN_CLUSTER_SIZE):
    """
    Начальные центроиды K-средних.

    uniform - k различных наблюдённых состояний без возвращения;
    kmeans++ - первый центр равновероятно среди событий, следующие с
    вероятностью, пропорциональной квадрату расстояния до ближайшего центра;
    hierarchical - центроиды иерархической агломерации, усечённые до k
    крупнейших или дополненные по правилу самой дальней точки.
    """
    return _init_from_states(
        _distinct_states(sample), k, str(strategy).lower(), Metric.parse(metric), seed,
        outlier_fraction, min_size,
    )


def _cost(gaps, weights, metric):
    """Средний квадрат расстояния для L2 и среднее расстояние для L1."""
    values = gaps ** 2 if metric is Metric.L2 else gaps
    return float((weights * values).sum() / weights.sum())


def _update_centroids(states, labels, centroids, gaps):
    k = centroids.shape[0]
    sums = np.zeros_like(centroids)
    np.add.at(sums, labels, states.weights[:, None] * states.points)
    totals = np.bincount(labels, weights=states.weights, minlength=k)
    updated = centroids.copy()
    filled = totals > 0
    updated[filled] = sums[filled] / totals[filled, None]
    gaps = gaps.copy()
    for cluster in np.flatnonzero(~filled):
        farthest = int(np.argmax(gaps))
        if gaps[farthest] <= 0:
            break
        logger.debug(f"K-средних: пустой кластер {cluster} перезапущен в состоянии {farthest}")
        updated[cluster] = states.points[farthest]
        gaps[farthest] = 0.0
    return updated


def kmeans(sample, k, init=INIT_KMEANS_PP, metric=Metric.L2, max_iter=DEFAULT_MAX_ITER, seed=0,
           keep_history=False, outlier_fraction=DEFAULT_OUTLIER_FRACTION, min_size=DEFAULT_MIN_CLUSTER_SIZE):
    """
    Алгоритм Ллойда с весами кратности.

    init - название стратегии или готовый массив центроидов формы (k, m).
    В provenance['inertia_history'] записывается целевая функция после
    каждого шага отнесения; для L2 это средний квадрат расстояния, он не
    возрастает от итерации к итерации.
    """
    metric = Metric.parse(metric)
    if max_iter < 1:
        raise InvalidParameterError(f"max_iter должно быть положительным, получено {max_iter}")
    states = _distinct_states(sample)
    if isinstance(init, str):
        strategy = init.lower()
        centroids = _init_from_states(states, k, strategy, metric, seed, outlier_fraction, min_size)
    else:
        strategy = 'explicit'
        centroids = np.atleast_2d(np.asarray(init, dtype=float))
        if centroids.shape != (k, sample.n_modes):
            raise DimensionError(f"Ожидаются центроиды формы ({k}, {sample.n_modes}), получено {centroids.shape}")

    history = [centroids.copy()] if keep_history else []
    inertia = []
    labels = None
    iterations = 0
    for _ in range(max_iter):
        new_labels, gaps = _nearest(states.points, centroids, metric)
        inertia.append(_cost(gaps, states.weights, metric))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centroids = _update_centroids(states, labels, centroids, gaps)
        iterations += 1
        if keep_history:
            history.append(centroids.copy())

    logger.debug(f"K-средних: k={k}, {iterations} итераций, целевая функция {inertia[-1]:.6f}")
    provenance = {
        'algorithm': KMEANS,
        'parameters': {'k': k, 'init': strategy, 'metric': metric.value, 'max_iter': max_iter},
        'seed': seed,
        'iterations': iterations,
        'inertia_history': inertia,
    }
    structure = _finalize(states, centroids, metric, provenance)
    structure.centroid_history = history
    return structure


def _event_labels(structure, sample):
    if sample.n_modes != structure.n_modes:
        raise DimensionError(f"Выборка на {sample.n_modes} модах, структура на {structure.n_modes}")
    if sample.n_events == 0:
        return np.empty(0, dtype=np.int64)
    states = _distinct_states(sample)
    labels, _ = _nearest(states.points, structure.centroids, structure.metric)
    return labels[states.inverse]


def assign(structure, sample):
    """Число событий второй выборки в каждом кластере; выбросы структуры не учитываются."""
    return np.bincount(_event_labels(structure, sample), minlength=structure.n_clusters)


def objective(structure, sample):
    """Среднее расстояние событий до центроидов своих кластеров."""
    labels = structure.assignments
    if labels.shape[0] != sample.n_events or (labels < 0).any() or (labels >= structure.n_clusters).any():
        raise CoverageError("Не все события выборки отнесены к кластерам структуры")
    if sample.n_events == 0:
        raise InsufficientDataError("Целевая функция пустой выборки не определена")
    points = sample.occupations()
    diffs = points - structure.centroids[labels]
    if structure.metric is Metric.L1:
        gaps = np.abs(diffs).sum(axis=1)
    else:
        gaps = np.sqrt((diffs ** 2).sum(axis=1))
    return float(gaps.mean())


def learn_structure(sample, config, seed=0, keep_history=False):
    """Обучает структуру алгоритмом, указанным в конфигурации."""
    if config.algorithm == BUBBLE:
        return bubble_cluster(sample, config.radius, config.metric)
    if config.algorithm == HIERARCHICAL:
        return hierarchical_cluster(sample, config.outlier_fraction, config.min_cluster_size, config.metric)
    return kmeans(
        sample, config.k, config.init, config.metric, config.max_iter, seed,
        keep_history=keep_history,
        outlier_fraction=config.outlier_fraction,
        min_size=config.min_cluster_size,
    )
