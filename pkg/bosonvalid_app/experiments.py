"""
Серии численных экспериментов: матрицы ошибок критерия совместимости,
зависимость от числа кластеров и размера выборки, p-значения по
итерациям K-средних и сходимость MCMC.

Каждое испытание получает своё зерно через split_seed и не зависит от
других, поэтому результат не зависит от числа параллельных процессов.
"""
import json
import logging
import math
import multiprocessing
import os
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from .clustering import ClusteringConfig
from .exceptions import CapacityError, DegenerateStructureError, InvalidParameterError
from .fock import ModeOccupation, hilbert_dimension
from .sampler import (
    DEFAULT_BURN_IN,
    DEFAULT_MAX_DENSE_DIM,
    DEFAULT_THIN,
    EXACT,
    MCMC,
    SamplerModel,
    brute_force_sample,
    draw_sample,
    empirical_distribution,
    exact_distribution,
    haar_random_unitary,
    mcmc_sample,
    scattershot_inputs,
    total_variation_distance,
)
from .seeding import split_seed
from .validation import (
    DEFAULT_ALPHA,
    ConfusionMatrix,
    compatibility_test,
    iteration_pvalues,
    majority_vote_test,
    reshuffle,
    scattershot_test,
    scattershot_vote,
)

logger = logging.getLogger(__name__)

CONFUSION = 'confusion'
K_SWEEP = 'k-sweep'
SIZE_SWEEP = 'size-sweep'
ITERATION_TRACE = 'iteration-trace'
MCMC_TVD = 'mcmc-tvd'
EXPERIMENT_KINDS = (CONFUSION, K_SWEEP, SIZE_SWEEP, ITERATION_TRACE, MCMC_TVD)


@dataclass
class ExperimentSpec:
    """Описание серии испытаний"""
    kind: str = CONFUSION
    reference_model: str = SamplerModel.INDISTINGUISHABLE.value
    alternative_model: str = SamplerModel.DISTINGUISHABLE.value
    n_photons: int = 3
    n_modes: int = 13
    input_state: Optional[str] = None
    sample_size: int = 500
    trials: int = 100
    unitaries: int = 1
    method: str = EXACT
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    alpha: float = DEFAULT_ALPHA
    master_seed: int = 0
    k_values: tuple = ()
    sizes: tuple = ()
    reshuffle: bool = False
    pool_size: int = 0
    scattershot: bool = False
    swap: bool = False
    n_inits: int = 10
    burn_in: int = DEFAULT_BURN_IN
    thin: int = DEFAULT_THIN
    mcmc_events: Optional[int] = None
    max_dense_dim: int = DEFAULT_MAX_DENSE_DIM

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise InvalidParameterError(f"Неизвестный вид эксперимента: {self.kind!r}")
        self.reference_model = SamplerModel.parse(self.reference_model).value
        self.alternative_model = SamplerModel.parse(self.alternative_model).value
        if self.method not in (EXACT, MCMC):
            raise InvalidParameterError(f"Неизвестный метод сэмплинга: {self.method!r}")
        hilbert_dimension(self.n_photons, self.n_modes)
        if self.input_state is None:
            self.input_state = ModeOccupation.from_modes(range(self.n_photons), self.n_modes).to_text()
        if self.source.n_photons != self.n_photons:
            raise InvalidParameterError(f"Входное состояние {self.input_state} содержит не {self.n_photons} фотонов")
        if self.sample_size < 1 or self.trials < 1 or self.unitaries < 1:
            raise InvalidParameterError("sample_size, trials и unitaries должны быть положительными")
        if self.kind == K_SWEEP and not self.k_values:
            raise InvalidParameterError("Для k-sweep нужен список k_values")
        if self.kind == SIZE_SWEEP and not self.sizes:
            raise InvalidParameterError("Для size-sweep нужен список sizes")
        if self.reshuffle and self.pool_size <= max((self.sample_size, *self.sizes)):
            raise InvalidParameterError("pool_size должен превышать размер каждой выборки")
        self.k_values = tuple(int(k) for k in self.k_values)
        self.sizes = tuple(int(size) for size in self.sizes)

    @property
    def source(self):
        return ModeOccupation.parse(self.input_state, self.n_modes)

    def to_dict(self):
        return {
            'kind': self.kind,
            'models': [self.reference_model, self.alternative_model],
            'N': self.n_photons,
            'm': self.n_modes,
            'input': self.input_state,
            'sample_size': self.sample_size,
            'trials': self.trials,
            'unitaries': self.unitaries,
            'method': self.method,
            'algorithm': self.clustering.algorithm,
            'k': self.clustering.k,
            'radius': self.clustering.radius,
            'metric': self.clustering.metric.value,
            'init': self.clustering.init,
            'voting_trials': self.clustering.voting_trials,
            'outlier_fraction': self.clustering.outlier_fraction,
            'min_cluster_size': self.clustering.min_cluster_size,
            'max_iter': self.clustering.max_iter,
            'alpha': self.alpha,
            'master_seed': self.master_seed,
            'k_values': list(self.k_values),
            'sizes': list(self.sizes),
            'reshuffle': self.reshuffle,
            'pool_size': self.pool_size,
            'scattershot': self.scattershot,
            'swap': self.swap,
            'n_inits': self.n_inits,
            'burn_in': self.burn_in,
            'thin': self.thin,
            'mcmc_events': self.mcmc_events,
        }

    @classmethod
    def from_dict(cls, data, max_dense_dim=DEFAULT_MAX_DENSE_DIM):
        """Строит описание из проверенного содержимого файла эксперимента."""
        clustering = ClusteringConfig.from_dict(data)
        models = data.get('models', [SamplerModel.INDISTINGUISHABLE.value, SamplerModel.DISTINGUISHABLE.value])
        options = {
            key: data[key]
            for key in ('kind', 'sample_size', 'trials', 'unitaries', 'method', 'alpha', 'master_seed',
                        'k_values', 'sizes', 'reshuffle', 'pool_size', 'scattershot', 'swap', 'n_inits',
                        'burn_in', 'thin', 'mcmc_events')
            if data.get(key) is not None
        }
        return cls(
            reference_model=models[0],
            alternative_model=models[1],
            n_photons=data['N'],
            n_modes=data['m'],
            input_state=data.get('input'),
            clustering=clustering,
            max_dense_dim=max_dense_dim,
            **options,
        )


def resolve_jobs(requested=None, override=0):
    """Число процессов: override из окружения, затем --jobs, затем все ядра."""
    for value in (override, requested):
        if value:
            return max(int(value), 1)
    return os.cpu_count() or 1


@lru_cache(maxsize=16)
def _cached_distribution(n_modes, unitary_seed, input_text, model, max_dim):
    unitary = haar_random_unitary(n_modes, unitary_seed)
    return exact_distribution(unitary, ModeOccupation.parse(input_text, n_modes), model, max_dim)


def _draw(spec, unitary, unitary_seed, source, model, n_events, seed):
    model = SamplerModel.parse(model)
    dense = model in (SamplerModel.INDISTINGUISHABLE, SamplerModel.DISTINGUISHABLE)
    if dense and spec.method == EXACT:
        distribution = _cached_distribution(
            spec.n_modes, unitary_seed, source.to_text(), model.value, spec.max_dense_dim
        )
        return brute_force_sample(distribution, n_events, seed)
    return draw_sample(
        unitary, source, model, n_events, seed, spec.method,
        burn_in=spec.burn_in, thin=spec.thin, max_dim=spec.max_dense_dim,
    )


def _unitary_seed(spec, unitary_index):
    return split_seed(spec.master_seed, 'unitary', unitary_index)


def _sources(spec):
    return scattershot_inputs(spec.n_modes) if spec.scattershot else [spec.source]


_POOLS = {}


def _pools(spec, unitary_index):
    """Большие выборки для перемешивания, по одной на модель и вход."""
    key = (json.dumps(spec.to_dict(), sort_keys=True), unitary_index)
    if key in _POOLS:
        return _POOLS[key]
    if len(_POOLS) >= 16:
        _POOLS.clear()
    unitary_seed = _unitary_seed(spec, unitary_index)
    unitary = haar_random_unitary(spec.n_modes, unitary_seed)
    pools = {}
    for position, source in enumerate(_sources(spec)):
        for model in (spec.reference_model, spec.alternative_model):
            seed = split_seed(spec.master_seed, 'pool', unitary_index, position, model)
            pools[(position, model)] = _draw(spec, unitary, unitary_seed, source, model, spec.pool_size, seed)
    _POOLS[key] = pools
    return pools


def _trial_samples(spec, unitary_index, trial, size):
    """Две эталонные выборки и одна альтернативная для каждого входа."""
    unitary_seed = _unitary_seed(spec, unitary_index)
    unitary = haar_random_unitary(spec.n_modes, unitary_seed)
    per_input = size // len(_sources(spec)) if spec.scattershot else size
    triples = []
    for position, source in enumerate(_sources(spec)):
        draws = []
        for role, model in (('ref1', spec.reference_model), ('ref2', spec.reference_model),
                            ('alt', spec.alternative_model)):
            seed = split_seed(spec.master_seed, unitary_index, trial, size, position, role)
            if spec.reshuffle:
                draws.append(reshuffle(_pools(spec, unitary_index)[(position, model)], per_input, seed))
            else:
                draws.append(_draw(spec, unitary, unitary_seed, source, model, per_input, seed))
        triples.append((source.to_text(), *draws))
    return triples


def _verdict(spec, config, pairs, seed):
    if spec.scattershot:
        if config.voting_trials > 1:
            return scattershot_vote(pairs, config, spec.alpha, config.voting_trials, seed).compatible
        return scattershot_test(pairs, config, spec.alpha, seed).compatible
    _, reference, candidate = pairs[0]
    if config.voting_trials > 1:
        return majority_vote_test(reference, candidate, config, spec.alpha, config.voting_trials, seed).compatible
    return compatibility_test(reference, candidate, config, spec.alpha, seed).compatible


def _run_trial(task):
    """Одно испытание: совместимая и несовместимая пары."""
    spec, config, unitary_index, trial, size = task
    triples = _trial_samples(spec, unitary_index, trial, size)
    outcome = {'unitary': unitary_index, 'trial': trial}
    tests = (
        ('compatible', [(label, ref1, ref2) for label, ref1, ref2, _ in triples]),
        ('incompatible', [(label, ref1, alt) for label, ref1, _, alt in triples]),
    )
    for name, pairs in tests:
        seed = split_seed(spec.master_seed, 'test', unitary_index, trial, size, name)
        try:
            outcome[name] = _verdict(spec, config, pairs, seed)
        except DegenerateStructureError as exc:
            logger.debug(f"Испытание {unitary_index}/{trial}: {exc}")
            outcome[name] = None
    if spec.swap:
        # та же совместимая пара с обменом ролей эталона и кандидата
        swapped = [(label, ref2, ref1) for label, ref1, ref2, _ in triples]
        seed = split_seed(spec.master_seed, 'test', unitary_index, trial, size, 'compatible')
        try:
            outcome['swapped'] = _verdict(spec, config, swapped, seed)
        except DegenerateStructureError as exc:
            logger.debug(f"Испытание {unitary_index}/{trial} с обменом ролей: {exc}")
            outcome['swapped'] = None
    return outcome


def run_trials(tasks, jobs=1):
    """Выполняет испытания в пуле процессов; порядок результатов совпадает с порядком задач."""
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_trial(task) for task in tasks]
    with multiprocessing.Pool(min(jobs, len(tasks))) as pool:
        return pool.map(_run_trial, tasks, chunksize=max(len(tasks) // (4 * jobs), 1))


def _check_capacity(spec):
    dim = hilbert_dimension(spec.n_photons, spec.n_modes)
    dense_models = {SamplerModel.INDISTINGUISHABLE.value, SamplerModel.DISTINGUISHABLE.value}
    needs_dense = spec.method == EXACT and {spec.reference_model, spec.alternative_model} & dense_models
    if (needs_dense or spec.kind == MCMC_TVD) and dim > spec.max_dense_dim:
        raise CapacityError(
            f"C({spec.n_modes},{spec.n_photons}) = {dim} превышает предел {spec.max_dense_dim}; "
            f"используйте метод mcmc"
        )


def _tally(spec, outcomes):
    matrix = ConfusionMatrix(spec.reference_model, spec.alternative_model)
    for outcome in outcomes:
        for truly_compatible, name in ((True, 'compatible'), (False, 'incompatible')):
            verdict = outcome[name]
            if verdict is None:
                matrix.degenerate += 1
            else:
                matrix.record(truly_compatible, 'compatible' if verdict else 'incompatible')
    return matrix


def _per_unitary(spec, outcomes):
    rows = []
    for unitary_index in range(spec.unitaries):
        matrix = _tally(spec, [o for o in outcomes if o['unitary'] == unitary_index])
        rows.append({
            'unitary': unitary_index,
            'unitary_seed': _unitary_seed(spec, unitary_index),
            'compatible_percent': 100 * matrix.success_rate(0),
            'incompatible_percent': 100 * matrix.success_rate(1),
        })
    summary = {}
    for key in ('compatible_percent', 'incompatible_percent'):
        values = np.array([row[key] for row in rows], dtype=float)
        values = values[~np.isnan(values)]
        summary[key] = {
            'mean': float(values.mean()) if values.size else math.nan,
            'std': float(values.std()) if values.size else math.nan,
        }
    return rows, summary


def _confusion(spec, config, size, jobs):
    tasks = [
        (spec, config, unitary_index, trial, size)
        for unitary_index in range(spec.unitaries)
        for trial in range(spec.trials)
    ]
    outcomes = run_trials(tasks, jobs)
    matrix = _tally(spec, outcomes)
    rows, summary = _per_unitary(spec, outcomes)
    return matrix, rows, summary, outcomes


def swap_summary(outcomes):
    """Доля совместимых пар, для которых обмен ролей выборок меняет решение."""
    paired = [o for o in outcomes if o.get('compatible') is not None and o.get('swapped') is not None]
    flips = sum(1 for o in paired if o['compatible'] != o['swapped'])
    return {
        'trials': len(paired),
        'flips': flips,
        'flip_percent': 100 * flips / len(paired) if paired else math.nan,
    }


def run_confusion_experiment(spec, jobs=1):
    """Матрица ошибок по всем унитарным матрицам и испытаниям."""
    _check_capacity(spec)
    matrix, rows, summary, outcomes = _confusion(spec, spec.clustering, spec.sample_size, jobs)
    logger.info(
        f"Эксперимент {spec.reference_model}/{spec.alternative_model} (N={spec.n_photons}, m={spec.n_modes}): "
        f"успех {100 * matrix.success_rate(0):.1f}% / {100 * matrix.success_rate(1):.1f}%"
    )
    result = {
        'kind': CONFUSION,
        'spec': spec.to_dict(),
        'matrix': matrix.to_dict(),
        'per_unitary': rows,
        'per_unitary_summary': summary,
    }
    if spec.swap:
        result['swap'] = swap_summary(outcomes)
        logger.info(f"Обмен ролей изменил решение в {result['swap']['flips']} из {result['swap']['trials']} пар")
    return result


def _sweep_row(matrix, **keys):
    return {
        **keys,
        'compatible_percent': 100 * matrix.success_rate(0),
        'compatible_error': 100 * matrix.standard_error(0),
        'incompatible_percent': 100 * matrix.success_rate(1),
        'incompatible_error': 100 * matrix.standard_error(1),
        'degenerate': matrix.degenerate,
    }


def run_k_sweep(spec, jobs=1):
    """Доля правильных решений в зависимости от числа кластеров."""
    _check_capacity(spec)
    rows = []
    for k in spec.k_values:
        matrix, _, _, _ = _confusion(spec, replace(spec.clustering, k=k), spec.sample_size, jobs)
        rows.append(_sweep_row(matrix, k=k))
        logger.info(f"k-sweep: k={k} обработано")
    return {'kind': K_SWEEP, 'spec': spec.to_dict(), 'rows': rows}


def run_size_sweep(spec, jobs=1):
    """Доля правильных решений в зависимости от размера выборки."""
    _check_capacity(spec)
    rows = []
    for size in spec.sizes:
        matrix, _, _, _ = _confusion(spec, spec.clustering, size, jobs)
        rows.append(_sweep_row(matrix, sample_size=size))
        logger.info(f"size-sweep: {size} событий обработано")
    return {'kind': SIZE_SWEEP, 'spec': spec.to_dict(), 'reshuffle': spec.reshuffle, 'rows': rows}


def run_iteration_trace(spec, jobs=1):
    """p-значения по итерациям K-средних для совместимой и несовместимой пар."""
    _check_capacity(spec)
    (_, ref1, ref2, alt), = _trial_samples(replace(spec, scattershot=False), 0, 0, spec.sample_size)
    seed = split_seed(spec.master_seed, 'trace')
    return {
        'kind': ITERATION_TRACE,
        'spec': spec.to_dict(),
        'compatible': iteration_pvalues(ref1, ref2, spec.clustering, spec.alpha, spec.n_inits, seed),
        'incompatible': iteration_pvalues(ref1, alt, spec.clustering, spec.alpha, spec.n_inits, seed),
    }


def run_mcmc_tvd(spec, jobs=1):
    """Расстояние полной вариации между MCMC-выборкой и точным распределением."""
    _check_capacity(spec)
    unitary_seed = _unitary_seed(spec, 0)
    unitary = haar_random_unitary(spec.n_modes, unitary_seed)
    source = spec.source
    exact = exact_distribution(unitary, source, SamplerModel.INDISTINGUISHABLE, spec.max_dense_dim)
    n_events = spec.mcmc_events or 100 * exact.dimension
    sample = mcmc_sample(
        unitary, source, n_events, spec.burn_in, spec.thin, split_seed(spec.master_seed, 'mcmc'),
    )
    checkpoints = []
    for fraction in (0.01, 0.1, 0.25, 0.5, 1.0):
        count = max(int(n_events * fraction), 1)
        partial = empirical_distribution(sample.subset(np.arange(count)))
        checkpoints.append({'events': count, 'tvd': total_variation_distance(partial, exact)})
    tvd = checkpoints[-1]['tvd']
    logger.info(f"MCMC: TVD = {tvd:.4f} после {n_events} событий")
    return {
        'kind': MCMC_TVD,
        'spec': spec.to_dict(),
        'events': n_events,
        'acceptance_rate': sample.metadata['acceptance_rate'],
        'tvd': tvd,
        'checkpoints': checkpoints,
    }


RUNNERS = {
    CONFUSION: run_confusion_experiment,
    K_SWEEP: run_k_sweep,
    SIZE_SWEEP: run_size_sweep,
    ITERATION_TRACE: run_iteration_trace,
    MCMC_TVD: run_mcmc_tvd,
}


def run_experiment(spec, jobs=1):
    return RUNNERS[spec.kind](spec, jobs)


def _percent(value, error=None):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return '   -  '
    if error is None:
        return f"{value:6.1f}"
    return f"{value:6.1f} ± {error:4.1f}"


def render_text(result):
    """Выровненная текстовая таблица результата эксперимента."""
    kind = result['kind']
    lines = [f"Эксперимент: {kind}"]
    if kind == CONFUSION:
        matrix = result['matrix']
        reference, alternative = matrix['reference_model'], matrix['alternative_model']
        lines.append(f"{'истина':<14}{reference + ' (решение)':>18}{alternative + ' (решение)':>18}{'успех, %':>18}")
        for name, label in (('compatible', reference), ('incompatible', alternative)):
            row = matrix['rows'][name]
            lines.append(
                f"{label:<14}{row['predicted_compatible']:>18}{row['predicted_incompatible']:>18}"
                f"{_percent(row['success_percent'], row['standard_error_percent']):>18}"
            )
        if matrix['degenerate']:
            lines.append(f"вырожденных испытаний: {matrix['degenerate']}")
        if 'swap' in result:
            swap = result['swap']
            lines.append(f"обмен ролей изменил решение: {swap['flips']} из {swap['trials']}")
        if len(result['per_unitary']) > 1:
            summary = result['per_unitary_summary']
            lines.append(
                f"по унитарным матрицам: {_percent(summary['compatible_percent']['mean'], summary['compatible_percent']['std'])}"
                f" / {_percent(summary['incompatible_percent']['mean'], summary['incompatible_percent']['std'])}"
            )
    elif kind in (K_SWEEP, SIZE_SWEEP):
        key = 'k' if kind == K_SWEEP else 'sample_size'
        lines.append(f"{key:>12}{'совместимые, %':>20}{'несовместимые, %':>20}")
        for row in result['rows']:
            lines.append(
                f"{row[key]:>12}"
                f"{_percent(row['compatible_percent'], row['compatible_error']):>20}"
                f"{_percent(row['incompatible_percent'], row['incompatible_error']):>20}"
            )
    elif kind == ITERATION_TRACE:
        lines.append(f"{'итерация':>10}{'совместимые':>14}{'несовместимые':>16}")
        compatible, incompatible = result['compatible'], result['incompatible']
        for i, (p_c, p_i) in enumerate(zip(compatible['mean_pvalue'], incompatible['mean_pvalue'])):
            lines.append(f"{i:>10}{p_c:>14.4f}{p_i:>16.4f}")
        lines.append(
            f"{'пузыри':>10}{compatible['bubble_pvalue']:>14.4f}{incompatible['bubble_pvalue']:>16.4f}"
        )
    elif kind == MCMC_TVD:
        lines.append(f"{'событий':>12}{'TVD':>10}")
        for point in result['checkpoints']:
            lines.append(f"{point['events']:>12}{point['tvd']:>10.4f}")
        lines.append(f"доля принятий: {result['acceptance_rate']:.3f}")
    return '\n'.join(lines)
