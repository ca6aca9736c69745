"""
Структура распределений неразличимых и различимых частиц: совместная
сортировка, корреляции Пирсона и Спирмена, кумулятивные доли, отношения
вероятностей в L1-шарах и двухмодовые корреляторы.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import pearsonr, spearmanr

from .exceptions import DimensionError, InsufficientDataError, InvalidParameterError
from .fock import ModeOccupation, collision_free_modes, hilbert_dimension
from .sampler import DEFAULT_MAX_DENSE_DIM, SamplerModel, exact_distribution, haar_random_unitary
from .seeding import split_seed

logger = logging.getLogger(__name__)

# Малый допуск при сравнении накопленной массы с порогом
MASS_TOLERANCE = 1e-12
# Допуск сравнения отношений масс с единицей
RATIO_TOLERANCE = 1e-12


@dataclass
class SortedPair:
    p_sorted: np.ndarray
    q_sorted: np.ndarray
    pearson: float
    spearman: float


def _values(distribution):
    return np.asarray(getattr(distribution, 'probabilities', distribution), dtype=float)


def _paired(dist_p, dist_q):
    p, q = _values(dist_p), _values(dist_q)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionError(f"Разные пространства индексов: {p.shape} и {q.shape}")
    return p, q


def sorted_pair(dist_p, dist_q):
    """p по убыванию, q в том же порядке, корреляции Пирсона и Спирмена."""
    p, q = _paired(dist_p, dist_q)
    order = np.argsort(-p, kind='stable')
    pearson = pearsonr(p, q)[0]
    spearman = spearmanr(p, q)[0]
    return SortedPair(p[order], q[order], float(pearson), float(spearman))


def _prefix_length(cumulative, mass):
    index = int(np.searchsorted(cumulative, mass * cumulative[-1] - MASS_TOLERANCE, side='left'))
    return min(index + 1, len(cumulative))


def cumulative_fraction(dist_p, dist_q, mass):
    """
    Доли пространства, набирающие массу mass для p и для q при
    упорядочении по убыванию p.
    """
    if not 0 < mass < 1:
        raise InvalidParameterError(f"Масса должна лежать в (0, 1), получено {mass}")
    pair = sorted_pair(dist_p, dist_q)
    dim = len(pair.p_sorted)
    return (
        _prefix_length(np.cumsum(pair.p_sorted), mass) / dim,
        _prefix_length(np.cumsum(pair.q_sorted), mass) / dim,
    )


def _check_ball_radius(k, n_photons):
    if k % 2 or not 2 <= k <= 2 * n_photons:
        raise InvalidParameterError(f"Радиус шара должен быть чётным в [2, {2 * n_photons}], получено {k}")


def ball_fraction(n_photons, n_modes, k):
    """Доля бесколлизионного пространства внутри L1-шара радиуса k."""
    _check_ball_radius(k, n_photons)
    inside = sum(
        math.comb(n_photons, s) * math.comb(n_modes - n_photons, s)
        for s in range(k // 2 + 1)
    )
    return inside / hilbert_dimension(n_photons, n_modes)


def _ball_masses(table, n_modes, centers, weights, k):
    """Масса каждого вектора weights в L1-шаре радиуса k вокруг каждого центра."""
    n_photons = table.shape[1]
    masses = np.empty((len(centers), len(weights)))
    for row, center in enumerate(centers):
        member = np.zeros(n_modes, dtype=bool)
        member[table[center]] = True
        # L1-расстояние между бесколлизионными состояниями равно 2 (N - общие моды)
        inside = member[table].sum(axis=1) >= n_photons - k // 2
        for column, values in enumerate(weights):
            masses[row, column] = values[inside].sum()
    return masses


@dataclass
class BallRatioReport:
    """Отношения вероятностей в L1-шарах вокруг самых вероятных исходов"""
    k: int
    n_photons: int
    n_modes: int
    ratios_p: np.ndarray
    ratios_q: np.ndarray
    unitary_seeds: list = field(default_factory=list)

    @property
    def mean_rp(self):
        return float(self.ratios_p.mean())

    @property
    def mean_rq(self):
        return float(self.ratios_q.mean())

    @property
    def fraction_rp_above_one(self):
        return float((self.ratios_p > 1 + RATIO_TOLERANCE).mean())

    @property
    def fraction_rq_above_one(self):
        return float((self.ratios_q > 1 + RATIO_TOLERANCE).mean())

    @property
    def ball_fraction(self):
        return ball_fraction(self.n_photons, self.n_modes, self.k)

    def summary(self):
        return {
            'k': self.k,
            'N': self.n_photons,
            'm': self.n_modes,
            'unitaries': int(self.ratios_p.shape[0]),
            'outcomes': int(self.ratios_p.shape[1]),
            'mean_rp': self.mean_rp,
            'mean_rq': self.mean_rq,
            'fraction_rp_above_one': self.fraction_rp_above_one,
            'fraction_rq_above_one': self.fraction_rq_above_one,
            'ball_fraction': self.ball_fraction,
        }

    def csv_rows(self):
        for unitary, seed in enumerate(self.unitary_seeds):
            for outcome in range(self.ratios_p.shape[1]):
                yield {
                    'unitary': unitary,
                    'unitary_seed': seed,
                    'outcome': outcome,
                    'k': self.k,
                    'r_p': float(self.ratios_p[unitary, outcome]),
                    'r_q': float(self.ratios_q[unitary, outcome]),
                }


def _ensemble(n_unitaries, n_photons, n_modes, seed, max_dim):
    """Пары точных распределений (неразличимые, различимые) по ансамблю Хаара."""
    source = ModeOccupation.from_modes(range(n_photons), n_modes)
    for index in range(n_unitaries):
        unitary_seed = split_seed(seed, 'unitary', index)
        unitary = haar_random_unitary(n_modes, unitary_seed)
        yield (
            unitary_seed,
            exact_distribution(unitary, source, SamplerModel.INDISTINGUISHABLE, max_dim),
            exact_distribution(unitary, source, SamplerModel.DISTINGUISHABLE, max_dim),
        )


def ball_ratio_report(n_unitaries, top_outcomes, n_photons, n_modes, k, seed=0,
                      max_dim=DEFAULT_MAX_DENSE_DIM):
    """
    R_p(k) = P(k) / Q(k) для top_outcomes самых вероятных исходов P и
    R_q(k) = Q(k) / P(k) для самых вероятных исходов Q.
    """
    _check_ball_radius(k, n_photons)
    dim = hilbert_dimension(n_photons, n_modes)
    top_outcomes = min(top_outcomes, dim)
    table = collision_free_modes(n_photons, n_modes)
    ratios_p = np.empty((n_unitaries, top_outcomes))
    ratios_q = np.empty((n_unitaries, top_outcomes))
    seeds = []
    for index, (unitary_seed, indist, dist) in enumerate(_ensemble(n_unitaries, n_photons, n_modes, seed, max_dim)):
        seeds.append(unitary_seed)
        if k == 2 * n_photons:
            # шар радиуса 2N покрывает всё пространство
            ratios_p[index] = ratios_q[index] = 1.0
            continue
        p, q = indist.probabilities, dist.probabilities
        top_p = np.argsort(-p, kind='stable')[:top_outcomes]
        masses = _ball_masses(table, n_modes, top_p, (p, q), k)
        ratios_p[index] = masses[:, 0] / masses[:, 1]
        top_q = np.argsort(-q, kind='stable')[:top_outcomes]
        masses = _ball_masses(table, n_modes, top_q, (q, p), k)
        ratios_q[index] = masses[:, 0] / masses[:, 1]
        logger.debug(f"Шары k={k}: унитарная матрица {index + 1}/{n_unitaries} обработана")
    report = BallRatioReport(k, n_photons, n_modes, ratios_p, ratios_q, seeds)
    logger.info(f"Шары k={k} (N={n_photons}, m={n_modes}): <R_p> = {report.mean_rp:.3f}")
    return report


def mode_correlators(sample):
    """C_ij = <n_i n_j> - <n_i><n_j> по событиям выборки."""
    if sample.n_events == 0:
        raise InsufficientDataError("Корреляторы пустой выборки не определены")
    occupations = sample.occupations()
    if sample.n_events == 1:
        return np.zeros((sample.n_modes, sample.n_modes))
    return np.atleast_2d(np.cov(occupations, rowvar=False, bias=True))


def correlation_ensemble(n_unitaries, n_photons, n_modes, seed=0, max_dim=DEFAULT_MAX_DENSE_DIM):
    """Среднее и стандартное отклонение коэффициентов Пирсона и Спирмена по ансамблю."""
    pearson, spearman = [], []
    for _, indist, dist in _ensemble(n_unitaries, n_photons, n_modes, seed, max_dim):
        pair = sorted_pair(indist, dist)
        pearson.append(pair.pearson)
        spearman.append(pair.spearman)
    return {
        'N': n_photons,
        'm': n_modes,
        'unitaries': n_unitaries,
        'pearson_mean': float(np.mean(pearson)),
        'pearson_std': float(np.std(pearson)),
        'spearman_mean': float(np.mean(spearman)),
        'spearman_std': float(np.std(spearman)),
    }
