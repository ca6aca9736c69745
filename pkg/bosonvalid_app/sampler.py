"""
Генерация унитарных матриц, вероятности переходов и сэмплеры выходных
событий: неразличимые частицы (точно и через MCMC), различимые частицы,
среднее поле и равномерное распределение.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.linalg import qr

from .exceptions import (
    CapacityError,
    DimensionError,
    InvalidParameterError,
    SamplingError,
    UnsupportedStateError,
)
from .fock import (
    ModeOccupation,
    collision_free_modes,
    hilbert_dimension,
    occupation_matrix,
    rank_modes,
)
from .permanent import batch_permanent, permanent
from .seeding import make_rng

logger = logging.getLogger(__name__)

DEFAULT_MAX_DENSE_DIM = 10_000_000
DEFAULT_BURN_IN = 100
DEFAULT_THIN = 100
UNITARY_TOLERANCE = 1e-10
# Сколько раз цепочка перезапускается из предложения при нулевой вероятности
MAX_CHAIN_RESTARTS = 100
WEIGHT_CHUNK = 65536

EXACT = 'exact'
MCMC = 'mcmc'

# Входы сцаттершот-эксперимента на 13 модах: (6, j, 8)
SCATTERSHOT_VARIABLE_MODES = (1, 2, 3, 7, 9, 11, 12, 13)


class SamplerModel(str, Enum):
    """Модели частиц и имитаторов"""
    INDISTINGUISHABLE = 'ind'
    DISTINGUISHABLE = 'dis'
    MEAN_FIELD = 'mf'
    UNIFORM = 'unif'

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {
            'indistinguishable': cls.INDISTINGUISHABLE,
            'distinguishable': cls.DISTINGUISHABLE,
            'mean-field': cls.MEAN_FIELD,
            'mean-field-marginal': cls.MEAN_FIELD,
            'uniform': cls.UNIFORM,
        }
        text = str(value).lower()
        if text in aliases:
            return aliases[text]
        try:
            return cls(text)
        except ValueError:
            raise InvalidParameterError(f"Неизвестная модель: {value!r}") from None


def scattershot_inputs(n_modes=13):
    """Восемь входных состояний (6, j, 8) сцаттершот-эксперимента."""
    return [
        ModeOccupation.from_modes(sorted({5, 7, j - 1}), n_modes)
        for j in SCATTERSHOT_VARIABLE_MODES
    ]


@dataclass
class UnitaryMatrix:
    """Унитарная матрица интерферометра m x m"""
    entries: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise DimensionError(f"Матрица должна быть квадратной, получена форма {self.entries.shape}")
        if self.entries.shape[0] < 1:
            raise DimensionError("Число мод должно быть не меньше 1")

    @property
    def m(self):
        return self.entries.shape[0]

    def unitarity_error(self):
        gram = self.entries.conj().T @ self.entries
        return float(np.abs(gram - np.eye(self.m)).max())

    def is_unitary(self, tolerance=UNITARY_TOLERANCE):
        return self.unitarity_error() < tolerance

    def to_dict(self):
        return {
            'm': self.m,
            're': self.entries.real.tolist(),
            'im': self.entries.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        entries = np.asarray(data['re'], dtype=float) + 1j * np.asarray(data['im'], dtype=float)
        if entries.shape != (data['m'], data['m']):
            raise DimensionError(f"Поле m={data['m']} не совпадает с формой матрицы {entries.shape}")
        return cls(entries)


def haar_random_unitary(m, seed):
    """Унитарная матрица по мере Хаара: QR матрицы Гинибра с поправкой фаз диагонали R."""
    if m < 1:
        raise DimensionError(f"Число мод должно быть не меньше 1, получено {m}")
    rng = make_rng(seed)
    ginibre = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    q, r = qr(ginibre)
    diagonal = np.diag(r)
    phases = diagonal / np.abs(diagonal)
    return UnitaryMatrix(q * phases, seed=seed)


@dataclass
class Distribution:
    """Распределение вероятностей на бесколлизионном подпространстве"""
    probabilities: np.ndarray
    n_photons: int
    n_modes: int
    model: SamplerModel
    input_state: Optional[ModeOccupation] = None
    # масса до перенормировки на бесколлизионное подпространство
    raw_mass: float = 1.0

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        dim = hilbert_dimension(self.n_photons, self.n_modes)
        if self.probabilities.shape != (dim,):
            raise DimensionError(
                f"Длина вектора {self.probabilities.shape} не равна C({self.n_modes},{self.n_photons})={dim}"
            )
        if (self.probabilities < 0).any():
            raise InvalidParameterError("Вероятности должны быть неотрицательными")

    @property
    def dimension(self):
        return self.probabilities.shape[0]


@dataclass
class EventSample:
    """Упорядоченная выборка бесколлизионных выходных событий"""
    modes: np.ndarray
    n_modes: int
    input_state: Optional[ModeOccupation] = None
    model: str = 'unknown'
    seed: Optional[int] = None
    source: Optional[str] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=np.int64)
        if self.modes.ndim == 1 and self.modes.size == 0:
            n_photons = self.input_state.n_photons if self.input_state else 1
            self.modes = self.modes.reshape(0, n_photons)
        if self.modes.ndim != 2:
            raise DimensionError(f"Ожидается массив формы (n_events, N), получено {self.modes.shape}")
        if self.modes.size:
            if self.modes.min() < 0 or self.modes.max() >= self.n_modes:
                raise DimensionError(f"Номера мод вне диапазона [0, {self.n_modes})")
            if (np.diff(self.modes, axis=1) <= 0).any():
                raise UnsupportedStateError("События должны быть бесколлизионными с возрастающими модами")
        if self.input_state is not None:
            if self.input_state.n_modes != self.n_modes:
                raise DimensionError("Входное состояние и события имеют разное число мод")
            if self.input_state.n_photons != self.modes.shape[1]:
                raise DimensionError("Входное состояние и события имеют разное число фотонов")
        if isinstance(self.model, SamplerModel):
            self.model = self.model.value

    @classmethod
    def from_events(cls, events, input_state=None, model='unknown', seed=None, source=None):
        events = list(events)
        if not events:
            raise InvalidParameterError("Для построения выборки нужен хотя бы один элемент")
        n_modes = events[0].n_modes
        for event in events:
            if not event.is_collision_free:
                raise UnsupportedStateError(f"Событие {event} содержит коллизии")
            if event.n_modes != n_modes:
                raise DimensionError("События выборки имеют разное число мод")
        modes = np.array([event.occupied_modes for event in events], dtype=np.int64)
        return cls(modes, n_modes, input_state, model, seed, source)

    def __len__(self):
        return self.modes.shape[0]

    @property
    def n_events(self):
        return self.modes.shape[0]

    @property
    def n_photons(self):
        return self.modes.shape[1]

    @property
    def events(self):
        return [ModeOccupation.from_modes(row, self.n_modes) for row in self.modes]

    def occupations(self):
        return occupation_matrix(self.modes, self.n_modes)

    def ranks(self):
        return rank_modes(self.modes, self.n_modes)

    def subset(self, indices, seed=None):
        return EventSample(
            self.modes[np.asarray(indices, dtype=np.int64)],
            self.n_modes,
            self.input_state,
            self.model,
            self.seed if seed is None else seed,
            self.source,
            dict(self.metadata),
        )


def _input_modes(unitary, state):
    if state.n_modes != unitary.m:
        raise DimensionError(f"Состояние на {state.n_modes} модах, матрица на {unitary.m}")
    if not state.is_collision_free:
        raise UnsupportedStateError(f"Входное состояние {state} содержит коллизии")
    return np.asarray(state.occupied_modes, dtype=np.int64)


def fock_transition_probability(unitary, source, target):
    """|per(U_{S,T})|^2 / (s_1!...s_m! t_1!...t_m!) для произвольных состояний Фока."""
    if source.n_modes != unitary.m or target.n_modes != unitary.m:
        raise DimensionError("Состояния и матрица имеют разное число мод")
    if source.n_photons != target.n_photons:
        return 0.0
    rows = np.asarray(target.occupied_modes, dtype=np.int64)
    cols = np.asarray(source.occupied_modes, dtype=np.int64)
    submatrix = unitary.entries[np.ix_(rows, cols)]
    norm = math.prod(math.factorial(v) for v in source.occupations + target.occupations)
    return float(abs(permanent(submatrix)) ** 2 / norm)


def transition_probability(unitary, source, target, model=SamplerModel.INDISTINGUISHABLE):
    """Вероятность перехода S -> T для бесколлизионных состояний."""
    model = SamplerModel.parse(model)
    cols = _input_modes(unitary, source)
    rows = _input_modes(unitary, target)
    if rows.shape != cols.shape:
        raise DimensionError("Разное число фотонов во входном и выходном состояниях")
    submatrix = unitary.entries[np.ix_(rows, cols)]
    if model is SamplerModel.INDISTINGUISHABLE:
        return float(abs(permanent(submatrix)) ** 2)
    if model is SamplerModel.DISTINGUISHABLE:
        return float(permanent(np.abs(submatrix) ** 2).real)
    raise InvalidParameterError(f"Модель {model.value} не задаёт вероятность перехода через перманент")


def _model_weights(unitary, input_modes, output_modes, model):
    """Ненормированные вероятности для стопки выходов формы (B, N)."""
    weights = np.empty(output_modes.shape[0], dtype=float)
    for start in range(0, output_modes.shape[0], WEIGHT_CHUNK):
        block = output_modes[start:start + WEIGHT_CHUNK]
        submatrices = unitary.entries[block[:, :, None], input_modes[None, None, :]]
        if model is SamplerModel.INDISTINGUISHABLE:
            weights[start:start + len(block)] = np.abs(batch_permanent(submatrices)) ** 2
        else:
            weights[start:start + len(block)] = batch_permanent(np.abs(submatrices) ** 2).real
    return weights


def exact_distribution(unitary, source, model=SamplerModel.INDISTINGUISHABLE,
                       max_dim=DEFAULT_MAX_DENSE_DIM):
    """Плотный вектор вероятностей, перенормированный на бесколлизионное подпространство."""
    model = SamplerModel.parse(model)
    input_modes = _input_modes(unitary, source)
    n_photons, n_modes = len(input_modes), unitary.m
    dim = hilbert_dimension(n_photons, n_modes)
    if dim > max_dim:
        raise CapacityError(
            f"C({n_modes},{n_photons}) = {dim} превышает предел {max_dim} для плотного распределения; "
            f"используйте метод mcmc"
        )
    if model is SamplerModel.UNIFORM:
        return Distribution(np.full(dim, 1.0 / dim), n_photons, n_modes, model, source)
    if model is SamplerModel.MEAN_FIELD:
        raise InvalidParameterError("Для среднего поля используйте mean_field_distribution")
    weights = _model_weights(unitary, input_modes, collision_free_modes(n_photons, n_modes), model)
    raw_mass = float(weights.sum())
    logger.info(
        f"Распределение {model.value} для (N={n_photons}, m={n_modes}) построено, "
        f"бесколлизионная масса {raw_mass:.6f}"
    )
    return Distribution(weights / raw_mass, n_photons, n_modes, model, source, raw_mass)


def _mean_field_laws(unitary, input_modes, phases):
    """Одночастичные законы p(i) = |sum_k e^{i theta_k} U_{i,j_k}|^2 / N, форма (B, m)."""
    amplitudes = np.exp(1j * phases) @ unitary.entries[:, input_modes].T
    return np.abs(amplitudes) ** 2 / len(input_modes)


def mean_field_distribution(unitary, source, n_phases=2000, seed=0, max_dim=DEFAULT_MAX_DENSE_DIM):
    """Усреднённое по случайным фазам распределение среднего поля на подпространстве."""
    input_modes = _input_modes(unitary, source)
    n_photons, n_modes = len(input_modes), unitary.m
    dim = hilbert_dimension(n_photons, n_modes)
    if dim > max_dim:
        raise CapacityError(f"C({n_modes},{n_photons}) = {dim} превышает предел {max_dim}")
    rng = make_rng(seed)
    table = collision_free_modes(n_photons, n_modes)
    accumulated = np.zeros(dim)
    for start in range(0, n_phases, 256):
        phases = rng.uniform(-np.pi, np.pi, size=(min(256, n_phases - start), n_photons))
        laws = _mean_field_laws(unitary, input_modes, phases)
        for law in laws:
            accumulated += law[table].prod(axis=1)
    accumulated *= math.factorial(n_photons) / n_phases
    raw_mass = float(accumulated.sum())
    return Distribution(accumulated / raw_mass, n_photons, n_modes, SamplerModel.MEAN_FIELD, source, raw_mass)


def brute_force_sample(distribution, n_events, seed):
    """Независимые выборки обращением функции распределения плотного вектора."""
    rng = make_rng(seed)
    table = collision_free_modes(distribution.n_photons, distribution.n_modes)
    cdf = np.cumsum(distribution.probabilities)
    draws = rng.random(n_events) * cdf[-1]
    indices = np.minimum(np.searchsorted(cdf, draws, side='right'), len(cdf) - 1)
    return EventSample(
        table[indices],
        distribution.n_modes,
        distribution.input_state,
        distribution.model,
        seed,
        metadata={'method': EXACT},
    )


def empirical_distribution(sample):
    """Частоты событий выборки как распределение на подпространстве."""
    dim = hilbert_dimension(sample.n_photons, sample.n_modes)
    counts = np.bincount(sample.ranks(), minlength=dim).astype(float)
    total = counts.sum()
    if total == 0:
        raise InvalidParameterError("Эмпирическое распределение пустой выборки не определено")
    model = SamplerModel(sample.model) if sample.model in {m.value for m in SamplerModel} else None
    return Distribution(counts / total, sample.n_photons, sample.n_modes, model, sample.input_state)


def total_variation_distance(p, q):
    """TVD = 1/2 sum |p_i - q_i|."""
    p_values = p.probabilities if isinstance(p, Distribution) else np.asarray(p, dtype=float)
    q_values = q.probabilities if isinstance(q, Distribution) else np.asarray(q, dtype=float)
    if p_values.shape != q_values.shape:
        raise DimensionError(f"Разные пространства индексов: {p_values.shape} и {q_values.shape}")
    return float(0.5 * np.abs(p_values - q_values).sum())


def _collision_free_rows(particles):
    """Сортирует моды в каждой строке и отбрасывает строки с коллизиями."""
    particles = np.sort(particles, axis=1)
    keep = (np.diff(particles, axis=1) > 0).all(axis=1)
    return particles[keep]


def _batch_size(remaining, n_photons, n_modes):
    # не больше ~16 млн элементов во вспомогательных массивах
    cap = max(16_000_000 // (n_photons * n_modes), 256)
    return min(max(2 * remaining, 1024), cap)


def _distinguishable_batch(unitary, input_modes, size, rng):
    """Предложения из закона различимых частиц, пост-селекция без коллизий."""
    laws = np.abs(unitary.entries[:, input_modes]) ** 2
    laws = laws / laws.sum(axis=0)
    collected, total = [], 0
    while total < size:
        batch = _batch_size(size - total, len(input_modes), unitary.m)
        particles = np.column_stack([
            rng.choice(unitary.m, size=batch, p=laws[:, k]) for k in range(len(input_modes))
        ])
        rows = _collision_free_rows(particles)
        collected.append(rows)
        total += len(rows)
    return np.concatenate(collected)[:size]


def distinguishable_sample(unitary, source, n_events, seed):
    """Прямой сэмплер различимых частиц: каждая частица независимо, затем пост-селекция."""
    input_modes = _input_modes(unitary, source)
    rng = make_rng(seed)
    modes = _distinguishable_batch(unitary, input_modes, n_events, rng) if n_events else np.empty((0, len(input_modes)))
    return EventSample(modes, unitary.m, source, SamplerModel.DISTINGUISHABLE, seed, metadata={'method': 'direct'})


def uniform_sample(unitary, source, n_events, seed):
    """Равномерные N-подмножества мод."""
    input_modes = _input_modes(unitary, source)
    rng = make_rng(seed)
    keys = rng.random((n_events, unitary.m))
    modes = np.sort(np.argsort(keys, axis=1)[:, :len(input_modes)], axis=1)
    return EventSample(modes, unitary.m, source, SamplerModel.UNIFORM, seed, metadata={'method': 'direct'})


def mean_field_sample(unitary, source, n_events, seed):
    """Сэмплер среднего поля со случайными фазами и пост-селекцией без коллизий."""
    input_modes = _input_modes(unitary, source)
    n_photons = len(input_modes)
    rng = make_rng(seed)
    collected, total = [], 0
    while total < n_events:
        batch = _batch_size(n_events - total, n_photons, unitary.m)
        phases = rng.uniform(-np.pi, np.pi, size=(batch, n_photons))
        cdf = np.cumsum(_mean_field_laws(unitary, input_modes, phases), axis=1)
        uniforms = rng.random((batch, n_photons)) * cdf[:, -1:]
        particles = (cdf[:, None, :] < uniforms[:, :, None]).sum(axis=2)
        rows = _collision_free_rows(np.minimum(particles, unitary.m - 1))
        collected.append(rows)
        total += len(rows)
    modes = np.concatenate(collected)[:n_events] if collected else np.empty((0, n_photons))
    return EventSample(modes, unitary.m, source, SamplerModel.MEAN_FIELD, seed, metadata={'method': 'direct'})


def _run_independence_chain(p_start, q_start, p_proposals, q_proposals, uniforms):
    """
    Ядро независимого сэмплера Метрополиса.

    Возвращает для каждого шага номер последнего принятого предложения
    (-1, пока цепочка в начальном состоянии) и число принятий.
    """
    states = np.empty(len(p_proposals), dtype=np.int64)
    current, p_x, q_x, accepted = -1, p_start, q_start, 0
    for t in range(len(p_proposals)):
        numerator = p_proposals[t] * q_x
        denominator = p_x * q_proposals[t]
        if numerator >= denominator or uniforms[t] * denominator < numerator:
            current, p_x, q_x = t, p_proposals[t], q_proposals[t]
            accepted += 1
        states[t] = current
    return states, accepted


def metropolised_independence_chain(target, proposal, n_steps, seed, initial=None):
    """Цепочка на конечном множестве состояний: целевые и предлагающие веса заданы массивами."""
    target = np.asarray(target, dtype=float)
    proposal = np.asarray(proposal, dtype=float)
    if target.shape != proposal.shape:
        raise DimensionError("Веса цели и предложения должны иметь одинаковую длину")
    rng = make_rng(seed)
    q_law = proposal / proposal.sum()
    start = int(initial) if initial is not None else int(rng.choice(len(q_law), p=q_law))
    if target[start] <= 0:
        raise SamplingError(f"Начальное состояние {start} имеет нулевую целевую вероятность")
    draws = rng.choice(len(q_law), size=n_steps, p=q_law)
    uniforms = rng.random(n_steps)
    steps, accepted = _run_independence_chain(target[start], proposal[start], target[draws], proposal[draws], uniforms)
    states = np.where(steps >= 0, draws[np.maximum(steps, 0)], start)
    return states, accepted / n_steps if n_steps else 0.0


def mcmc_sample(unitary, source, n_events, burn_in=DEFAULT_BURN_IN, thin=DEFAULT_THIN, seed=0,
                target=SamplerModel.INDISTINGUISHABLE):
    """
    Независимый сэмплер Метрополиса для бозонного сэмплинга.

    Цель - распределение неразличимых частиц, предложение - распределение
    различимых частиц. Отношение принятия min(1, P(y)Q(x) / (P(x)Q(y)))
    строится по ненормированным бесколлизионным вероятностям. Первые
    burn_in состояний отбрасываются, затем сохраняется каждое thin-е.
    """
    if burn_in < 0 or thin < 1:
        raise InvalidParameterError(f"Требуется burn_in >= 0 и thin >= 1, получено {burn_in}, {thin}")
    target = SamplerModel.parse(target)
    if target not in (SamplerModel.INDISTINGUISHABLE, SamplerModel.DISTINGUISHABLE):
        raise InvalidParameterError(f"Цель цепочки должна задаваться перманентом, получено {target.value}")
    input_modes = _input_modes(unitary, source)
    if n_events == 0:
        return EventSample(np.empty((0, len(input_modes))), unitary.m, source, target, seed)
    rng = make_rng(seed)

    start_modes, p_start, q_start = None, 0.0, 0.0
    for attempt in range(MAX_CHAIN_RESTARTS):
        candidate = _distinguishable_batch(unitary, input_modes, 1, rng)
        p_start = _model_weights(unitary, input_modes, candidate, target)[0]
        if p_start > 0:
            start_modes = candidate[0]
            q_start = _model_weights(unitary, input_modes, candidate, SamplerModel.DISTINGUISHABLE)[0]
            break
        logger.warning(f"MCMC: начальное состояние с нулевой вероятностью, попытка {attempt + 1}")
    if start_modes is None:
        raise SamplingError(f"Не найдено начальное состояние за {MAX_CHAIN_RESTARTS} попыток")

    n_steps = burn_in + n_events * thin
    proposals = _distinguishable_batch(unitary, input_modes, n_steps, rng)
    q_proposals = _model_weights(unitary, input_modes, proposals, SamplerModel.DISTINGUISHABLE)
    if target is SamplerModel.DISTINGUISHABLE:
        p_proposals = q_proposals
    else:
        p_proposals = _model_weights(unitary, input_modes, proposals, target)
    uniforms = rng.random(n_steps)
    steps, accepted = _run_independence_chain(p_start, q_start, p_proposals, q_proposals, uniforms)

    kept = burn_in + np.arange(1, n_events + 1) * thin - 1
    chosen = steps[kept]
    modes = np.where(chosen[:, None] >= 0, proposals[np.maximum(chosen, 0)], start_modes[None, :])
    acceptance = accepted / n_steps if n_steps else 0.0
    logger.info(f"MCMC: {n_events} событий, {n_steps} шагов, доля принятий {acceptance:.3f}")
    return EventSample(
        modes, unitary.m, source, target, seed,
        metadata={'method': MCMC, 'burn_in': burn_in, 'thin': thin, 'acceptance_rate': acceptance},
    )


def draw_sample(unitary, source, model, n_events, seed, method=EXACT, distribution=None,
                burn_in=DEFAULT_BURN_IN, thin=DEFAULT_THIN, max_dim=DEFAULT_MAX_DENSE_DIM):
    """Выборка заданной модели; distribution позволяет переиспользовать плотный вектор."""
    model = SamplerModel.parse(model)
    if method not in (EXACT, MCMC):
        raise InvalidParameterError(f"Неизвестный метод сэмплинга: {method!r}")
    if model is SamplerModel.MEAN_FIELD:
        return mean_field_sample(unitary, source, n_events, seed)
    if model is SamplerModel.UNIFORM:
        return uniform_sample(unitary, source, n_events, seed)
    if model is SamplerModel.DISTINGUISHABLE and method == MCMC:
        return distinguishable_sample(unitary, source, n_events, seed)
    if model is SamplerModel.INDISTINGUISHABLE and method == MCMC:
        return mcmc_sample(unitary, source, n_events, burn_in, thin, seed)
    if distribution is None:
        distribution = exact_distribution(unitary, source, model, max_dim)
    return brute_force_sample(distribution, n_events, seed)
