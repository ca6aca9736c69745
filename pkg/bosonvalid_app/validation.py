"""
Критерий совместимости двух выборок по кластерной структуре.

Структура обучается на эталонной выборке, обе выборки раскладываются по
её кластерам, и по таблице 2 x k считается статистика хи-квадрат с
nu = k - 1 степенями свободы. Ячейки с ожидаемым числом событий меньше 5
сливаются с ближайшим оставшимся кластером.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import gammaincc

from .clustering import (
    BUBBLE,
    KMEANS,
    MIN_CLUSTERS,
    ClusterStructure,
    assign,
    learn_structure,
)
from .exceptions import (
    DegenerateStructureError,
    DimensionError,
    InsufficientDataError,
    InvalidParameterError,
)
from .fock import pairwise_distances
from .seeding import make_rng, split_seed

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.05
MIN_EXPECTED_COUNT = 5.0


class Verdict(str, Enum):
    COMPATIBLE = 'compatible'
    INCOMPATIBLE = 'incompatible'


def chi_square_pvalue(statistic, dof):
    """P(X > statistic) для распределения хи-квадрат с dof степенями свободы."""
    if dof < 1:
        raise InvalidParameterError(f"Число степеней свободы должно быть не меньше 1, получено {dof}")
    if statistic < 0:
        raise InvalidParameterError(f"Статистика должна быть неотрицательной, получено {statistic}")
    return float(gammaincc(dof / 2.0, statistic / 2.0))


@dataclass
class ChiSquareResult:
    """Итог критерия хи-квадрат"""
    statistic: float
    dof: int
    p_value: float
    alpha: float
    merged_cells: list = field(default_factory=list)
    table: Optional[np.ndarray] = None
    label: Optional[str] = None
    components: list = field(default_factory=list)

    @property
    def verdict(self):
        return Verdict.COMPATIBLE if self.p_value > self.alpha else Verdict.INCOMPATIBLE

    @property
    def compatible(self):
        return self.verdict is Verdict.COMPATIBLE

    @property
    def retained_clusters(self):
        return self.dof + 1

    def to_dict(self):
        data = {
            'statistic': self.statistic,
            'dof': self.dof,
            'p_value': self.p_value,
            'alpha': self.alpha,
            'verdict': self.verdict.value,
            'merged_cells': self.merged_cells,
        }
        if self.table is not None:
            data['table'] = np.asarray(self.table).tolist()
        if self.label is not None:
            data['label'] = self.label
        if self.components:
            data['components'] = [component.to_dict() for component in self.components]
        return data


def _expected(table):
    return np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()


def _merge_sparse_cells(table, centroids, metric):
    """
    Сливает столбцы с ожидаемым числом меньше MIN_EXPECTED_COUNT.

    Каждый раз выбирается столбец с наименьшим ожидаемым числом; он
    добавляется к оставшемуся столбцу с ближайшим центроидом.
    Возвращает итоговую таблицу и журнал слияний.
    """
    columns = [table[:, j].astype(float) for j in range(table.shape[1])]
    anchors = list(range(table.shape[1]))
    log = []
    while len(columns) > 1:
        current = np.column_stack(columns)
        floor = _expected(current).min(axis=0)
        sparse = int(np.argmin(floor))
        if floor[sparse] >= MIN_EXPECTED_COUNT:
            break
        others = [j for j in range(len(columns)) if j != sparse]
        gaps = pairwise_distances(
            centroids[anchors[sparse]], centroids[[anchors[j] for j in others]], metric
        )[0]
        target = others[int(np.argmin(gaps))]
        log.append({
            'cluster': anchors[sparse],
            'into': anchors[target],
            'expected': float(floor[sparse]),
        })
        columns[target] = columns[target] + columns[sparse]
        del columns[sparse]
        del anchors[sparse]
    return np.column_stack(columns), log


def _check_pair(reference, candidate):
    if reference.n_modes != candidate.n_modes or reference.n_photons != candidate.n_photons:
        raise DimensionError(
            f"Выборки из разных пространств: (N={reference.n_photons}, m={reference.n_modes}) "
            f"и (N={candidate.n_photons}, m={candidate.n_modes})"
        )
    if reference.n_events == 0 or candidate.n_events == 0:
        raise InsufficientDataError("Обе выборки должны быть непустыми")


def chi_square_for_structure(structure, reference, candidate, alpha=DEFAULT_ALPHA, label=None):
    """Критерий хи-квадрат для готовой структуры."""
    _check_pair(reference, candidate)
    table = np.vstack([assign(structure, reference), assign(structure, candidate)])
    merged, log = _merge_sparse_cells(table, structure.centroids, structure.metric)
    if log:
        logger.warning(
            f"{'[' + label + '] ' if label else ''}Слито {len(log)} ячеек с ожидаемым числом "
            f"событий меньше {MIN_EXPECTED_COUNT:g}"
        )
    if merged.shape[1] < MIN_CLUSTERS:
        raise DegenerateStructureError(
            f"После слияния ячеек осталось {merged.shape[1]} кластеров, нужно не меньше {MIN_CLUSTERS}",
            label=label,
        )
    expected = _expected(merged)
    statistic = float(((merged - expected) ** 2 / expected).sum())
    dof = merged.shape[1] - 1
    return ChiSquareResult(
        statistic, dof, chi_square_pvalue(statistic, dof), alpha, log, merged, label,
    )


def compatibility_test(reference, candidate, config, alpha=DEFAULT_ALPHA, seed=0, label=None):
    """
    Критерий совместимости: структура обучается на reference, обе
    выборки раскладываются по её кластерам.
    """
    _check_pair(reference, candidate)
    structure = learn_structure(reference, config, seed)
    result = chi_square_for_structure(structure, reference, candidate, alpha, label)
    logger.debug(
        f"Критерий: chi2={result.statistic:.3f}, nu={result.dof}, p={result.p_value:.4f}, "
        f"{result.verdict.value}"
    )
    return result


def voting_seeds(seed, trials):
    return [split_seed(seed, 'vote', t) for t in range(trials)]


@dataclass
class VoteResult:
    """Итог голосования большинством"""
    trials: list

    @property
    def n_compatible(self):
        return sum(1 for trial in self.trials if trial.compatible)

    @property
    def verdict(self):
        if 2 * self.n_compatible > len(self.trials):
            return Verdict.COMPATIBLE
        return Verdict.INCOMPATIBLE

    @property
    def compatible(self):
        return self.verdict is Verdict.COMPATIBLE

    def to_dict(self):
        return {
            'verdict': self.verdict.value,
            'votes_compatible': self.n_compatible,
            'trials': [trial.to_dict() for trial in self.trials],
        }


def _check_trials(trials):
    if trials < 1 or trials % 2 == 0:
        raise InvalidParameterError(f"Число испытаний должно быть нечётным, получено {trials}")


def majority_vote_test(reference, candidate, config, alpha=DEFAULT_ALPHA, trials=11, seed=0):
    """Нечётное число независимых критериев и решение большинством."""
    _check_trials(trials)
    results = [
        compatibility_test(reference, candidate, config, alpha, trial_seed)
        for trial_seed in voting_seeds(seed, trials)
    ]
    return VoteResult(results)


def scattershot_test(pairs, config, alpha=DEFAULT_ALPHA, seed=0):
    """
    Обобщение на сцаттершот: статистики по входным состояниям и их
    степени свободы суммируются, решение одно на весь набор.

    pairs - список (метка, эталон, кандидат) или (эталон, кандидат).
    """
    if not pairs:
        raise InsufficientDataError("Нужна хотя бы одна пара выборок")
    components = []
    for index, pair in enumerate(pairs):
        if len(pair) == 3:
            label, reference, candidate = pair
        else:
            reference, candidate = pair
            label = reference.input_state.to_text() if reference.input_state else str(index)
        if (reference.input_state and candidate.input_state
                and reference.input_state != candidate.input_state):
            raise DimensionError(f"[{label}] Выборки пары получены для разных входных состояний")
        components.append(
            compatibility_test(reference, candidate, config, alpha, split_seed(seed, 'input', index), label)
        )
    statistic = float(sum(component.statistic for component in components))
    dof = int(sum(component.dof for component in components))
    return ChiSquareResult(
        statistic, dof, chi_square_pvalue(statistic, dof), alpha,
        merged_cells=[cell for component in components for cell in component.merged_cells],
        label='scattershot',
        components=components,
    )


def scattershot_vote(pairs, config, alpha=DEFAULT_ALPHA, trials=11, seed=0):
    """Голосование большинством поверх сцаттершот-критерия."""
    _check_trials(trials)
    return VoteResult([scattershot_test(pairs, config, alpha, trial_seed) for trial_seed in voting_seeds(seed, trials)])


def reshuffle(pool, n, seed):
    """n событий из pool без возвращения."""
    if n >= pool.n_events:
        raise InsufficientDataError(f"Запрошено {n} событий из пула размера {pool.n_events}")
    if n < 1:
        raise InvalidParameterError(f"Размер выборки должен быть положительным, получено {n}")
    indices = make_rng(seed).choice(pool.n_events, size=n, replace=False)
    return pool.subset(indices, seed)


@dataclass
class ConfusionMatrix:
    """
    Матрица ошибок: строки - истинный класс (совместимая пара, несовместимая
    пара), столбцы - решение критерия (совместимы, несовместимы).
    """
    reference_model: str
    alternative_model: str
    counts: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), dtype=np.int64))
    degenerate: int = 0

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64).reshape(2, 2)

    def record(self, truly_compatible, verdict):
        row = 0 if truly_compatible else 1
        column = 0 if Verdict(verdict) is Verdict.COMPATIBLE else 1
        self.counts[row, column] += 1

    def merge(self, other):
        return ConfusionMatrix(
            self.reference_model, self.alternative_model,
            self.counts + other.counts, self.degenerate + other.degenerate,
        )

    def trials(self, row):
        return int(self.counts[row].sum())

    def success_rate(self, row):
        total = self.trials(row)
        return self.counts[row, row] / total if total else math.nan

    def standard_error(self, row):
        total = self.trials(row)
        if not total:
            return math.nan
        rate = self.success_rate(row)
        return math.sqrt(rate * (1 - rate) / total)

    @property
    def labels(self):
        return (self.reference_model, self.alternative_model)

    def to_dict(self):
        rows = {}
        for row, label in enumerate(('compatible', 'incompatible')):
            rows[label] = {
                'true_class': self.labels[row],
                'predicted_compatible': int(self.counts[row, 0]),
                'predicted_incompatible': int(self.counts[row, 1]),
                'trials': self.trials(row),
                'success_percent': 100 * self.success_rate(row),
                'standard_error_percent': 100 * self.standard_error(row),
            }
        return {
            'reference_model': self.reference_model,
            'alternative_model': self.alternative_model,
            'rows': rows,
            'degenerate': self.degenerate,
        }

    @classmethod
    def from_dict(cls, data):
        counts = [
            [data['rows'][label]['predicted_compatible'], data['rows'][label]['predicted_incompatible']]
            for label in ('compatible', 'incompatible')
        ]
        return cls(data['reference_model'], data['alternative_model'], counts, data.get('degenerate', 0))


def iteration_pvalues(reference, candidate, config, alpha=DEFAULT_ALPHA, n_inits=10, seed=0):
    """
    p-значение критерия после каждой итерации K-средних, усреднённое по
    n_inits инициализациям, и p-значение пузырьковой кластеризации.

    Кривые короче max_iter продолжаются последним значением; итерации, на
    которых структура вырождается, не учитываются в среднем.
    """
    _check_pair(reference, candidate)
    config = replace(config, algorithm=KMEANS)
    length = config.max_iter + 1
    traces = np.full((n_inits, length), np.nan)
    for run, run_seed in enumerate(split_seed(seed, 'init', i) for i in range(n_inits)):
        structure = learn_structure(reference, config, run_seed, keep_history=True)
        values = []
        for centroids in structure.centroid_history:
            snapshot = ClusterStructure(centroids, structure.metric)
            try:
                values.append(chi_square_for_structure(snapshot, reference, candidate, alpha).p_value)
            except DegenerateStructureError:
                values.append(np.nan)
        values += [values[-1]] * (length - len(values))
        traces[run] = values[:length]

    bubble_config = replace(config, algorithm=BUBBLE)
    try:
        bubble = compatibility_test(reference, candidate, bubble_config, alpha).p_value
    except DegenerateStructureError:
        bubble = math.nan
    counts = np.sum(~np.isnan(traces), axis=0)
    sums = np.nansum(traces, axis=0)
    means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return {
        'iterations': list(range(length)),
        'mean_pvalue': means.tolist(),
        'traces': traces.tolist(),
        'bubble_pvalue': bubble,
        'init': config.init,
    }
