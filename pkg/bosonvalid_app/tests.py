"""
Тесты bosonvalid
"""
import json
import math
import os
import shutil
import tempfile
from io import StringIO
from itertools import combinations_with_replacement, permutations
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings, tag
from scipy.stats import kstest

from .analysis import (
    _ball_masses,
    ball_fraction,
    ball_ratio_report,
    correlation_ensemble,
    cumulative_fraction,
    mode_correlators,
    sorted_pair,
)
from .clustering import (
    BUBBLE,
    HIERARCHICAL,
    KMEANS,
    ClusteringConfig,
    ClusterStructure,
    assign,
    bubble_cluster,
    hierarchical_cluster,
    kmeans,
    kmeans_init,
    learn_structure,
    objective,
)
from .exceptions import (
    CapacityError,
    CoverageError,
    DegenerateStructureError,
    DimensionError,
    HaltingFailureError,
    InfeasibleClusterCountError,
    InsufficientDataError,
    InvalidParameterError,
    UnsupportedStateError,
)
from .experiments import (
    CONFUSION,
    ITERATION_TRACE,
    K_SWEEP,
    MCMC_TVD,
    ExperimentSpec,
    render_text,
    resolve_jobs,
    run_confusion_experiment,
    run_experiment,
    swap_summary,
)
from .files import read_json, read_sample, read_structure, read_unitary, write_json, write_sample
from .fock import (
    HilbertIndex,
    Metric,
    ModeOccupation,
    collision_free_modes,
    distance,
    enumerate_collision_free,
    hilbert_dimension,
    rank,
    rank_modes,
    unrank,
)
from .models import RunRecord
from .permanent import GLYNN, batch_permanent, permanent
from .run_logger import RunActivityLogger
from .sampler import (
    EventSample,
    SamplerModel,
    UnitaryMatrix,
    _mean_field_laws,
    brute_force_sample,
    distinguishable_sample,
    draw_sample,
    empirical_distribution,
    exact_distribution,
    fock_transition_probability,
    haar_random_unitary,
    mcmc_sample,
    mean_field_distribution,
    mean_field_sample,
    metropolised_independence_chain,
    scattershot_inputs,
    total_variation_distance,
    transition_probability,
    uniform_sample,
)
from .seeding import make_rng, split_seed
from .validation import (
    ConfusionMatrix,
    Verdict,
    chi_square_for_structure,
    chi_square_pvalue,
    compatibility_test,
    majority_vote_test,
    reshuffle,
    scattershot_test,
    voting_seeds,
)


def _sample(rows, n_modes, counts=None):
    """Выборка из списка кортежей занятых мод (0-based) с кратностями."""
    rows = np.asarray(rows, dtype=np.int64)
    if counts is not None:
        rows = np.repeat(rows, counts, axis=0)
    return EventSample(rows, n_modes)


def _naive_permanent(matrix):
    n = matrix.shape[0]
    return sum(np.prod([matrix[i, sigma[i]] for i in range(n)]) for sigma in permutations(range(n)))


# Четыре удалённые друг от друга группы по два состояния на 12 модах
GROUPS = [(0, 1), (0, 2), (3, 4), (3, 5), (6, 7), (6, 8), (9, 10), (9, 11)]


class FockTest(SimpleTestCase):
    """Тесты состояний Фока и перечисления подпространства"""

    def test_enumeration_size(self):
        """Тест размера бесколлизионного подпространства"""
        states = enumerate_collision_free(3, 13)
        self.assertEqual(len(states), 286)
        self.assertTrue(all(state.is_collision_free for state in states))
        self.assertEqual(states[0].occupied_modes, (0, 1, 2))
        self.assertEqual(hilbert_dimension(5, 50), 2_118_760)

    def test_single_photon(self):
        """Тест одной частицы: состояния - единичные векторы"""
        states = enumerate_collision_free(1, 4)
        self.assertEqual([state.occupations for state in states], [
            (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1),
        ])

    def test_dimension_bounds(self):
        """Тест N > m"""
        with self.assertRaises(DimensionError):
            enumerate_collision_free(5, 4)

    def test_rank_roundtrip(self):
        """Тест нумерации всех состояний (3, 13)"""
        states = enumerate_collision_free(3, 13)
        self.assertEqual(rank(states[0]).index, 0)
        self.assertEqual(rank(states[-1]).index, 285)
        for position, state in enumerate(states):
            index = rank(state)
            self.assertEqual(index.index, position)
            self.assertEqual(unrank(index), state)
        modes = np.array([state.occupied_modes for state in states])
        np.testing.assert_array_equal(rank_modes(modes, 13), np.arange(286))

    def test_rank_rejects_collisions(self):
        """Тест состояния с коллизией"""
        with self.assertRaises(UnsupportedStateError):
            rank(ModeOccupation((2, 1, 0)))
        with self.assertRaises(DimensionError):
            HilbertIndex(286, 3, 13)

    def test_text_form(self):
        """Тест текстовой записи "6,7,8" """
        state = ModeOccupation.parse('6,7,8', 13)
        self.assertEqual(state.occupied_modes, (5, 6, 7))
        self.assertEqual(state.to_text(), '6,7,8')
        self.assertEqual(state.n_photons, 3)

    def test_distances(self):
        """Тест метрик L1 и L2"""
        a = ModeOccupation((1, 1, 0, 0))
        b = ModeOccupation((1, 0, 1, 0))
        self.assertEqual(distance(a, b, Metric.L1), 2.0)
        self.assertAlmostEqual(distance(a, b, Metric.L2), math.sqrt(2))
        self.assertEqual(distance(a, a, 'l2'), 0.0)
        c = ModeOccupation.from_modes((0, 1, 2, 3), 8)
        d = ModeOccupation.from_modes((4, 5, 6, 7), 8)
        self.assertEqual(distance(c, d, Metric.L1), 8.0)
        with self.assertRaises(DimensionError):
            distance(a, c, Metric.L1)

    def test_metric_properties(self):
        """Тест чётности L1 и неравенства треугольника"""
        states = enumerate_collision_free(4, 9)
        rng = make_rng(1)
        for _ in range(200):
            x, y, z = (states[i] for i in rng.choice(len(states), size=3))
            self.assertEqual(distance(x, y, Metric.L1) % 2, 0)
            for metric in Metric:
                self.assertEqual(distance(x, y, metric), distance(y, x, metric))
                self.assertLessEqual(
                    distance(x, z, metric), distance(x, y, metric) + distance(y, z, metric) + 1e-12,
                )


class PermanentTest(SimpleTestCase):
    """Тесты вычисления перманентов"""

    def test_simple_matrices(self):
        """Тест единичной матрицы и матрицы из единиц"""
        self.assertAlmostEqual(permanent(np.eye(3)).real, 1.0)
        self.assertAlmostEqual(permanent(np.ones((5, 5))).real, 120.0)
        self.assertAlmostEqual(permanent(np.ones((5, 5)), method=GLYNN).real, 120.0)

    def test_matches_definition(self):
        """Тест совпадения с суммой по перестановкам"""
        rng = make_rng(7)
        for i in range(200):
            n = 1 + i % 7
            matrix = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            expected = _naive_permanent(matrix)
            self.assertLess(abs(permanent(matrix) - expected), 1e-10 * max(abs(expected), 1.0))
            self.assertLess(abs(permanent(matrix, method=GLYNN) - expected), 1e-10 * max(abs(expected), 1.0))

    def test_batch(self):
        """Тест пакетного вычисления"""
        rng = make_rng(3)
        stack = rng.standard_normal((20, 4, 4))
        values = batch_permanent(stack, chunk_size=7)
        np.testing.assert_allclose(values, [_naive_permanent(matrix) for matrix in stack], atol=1e-10)

    def test_non_square(self):
        """Тест неквадратной матрицы"""
        with self.assertRaises(DimensionError):
            permanent(np.ones((2, 3)))


class SamplerTest(SimpleTestCase):
    """Тесты унитарных матриц и сэмплеров"""

    def setUp(self):
        self.unitary = haar_random_unitary(5, 11)
        self.source = ModeOccupation.from_modes((0, 1), 5)

    def test_haar_unitarity(self):
        """Тест унитарности и воспроизводимости"""
        single = haar_random_unitary(1, 0)
        self.assertAlmostEqual(abs(single.entries[0, 0]), 1.0)
        unitary = haar_random_unitary(13, 5)
        self.assertLess(unitary.unitarity_error(), 1e-10)
        np.testing.assert_array_equal(unitary.entries, haar_random_unitary(13, 5).entries)
        with self.assertRaises(DimensionError):
            haar_random_unitary(0, 0)

    @tag('slow')
    def test_haar_eigenphases(self):
        """Тест равномерности фаз собственных значений"""
        phases = np.concatenate([
            np.angle(np.linalg.eigvals(haar_random_unitary(8, split_seed(0, 'haar', i)).entries))
            for i in range(2000)
        ])
        self.assertGreater(kstest(phases, 'uniform', args=(-np.pi, 2 * np.pi)).pvalue, 0.01)

    def test_hong_ou_mandel(self):
        """Тест эффекта Хонга-Оу-Манделя на светоделителе 50:50"""
        beam_splitter = UnitaryMatrix(np.array([[1, 1], [1, -1]]) / np.sqrt(2))
        state = ModeOccupation((1, 1))
        self.assertAlmostEqual(transition_probability(beam_splitter, state, state, 'ind'), 0.0)
        self.assertAlmostEqual(transition_probability(beam_splitter, state, state, 'dis'), 0.5)
        bunched = ModeOccupation((2, 0))
        self.assertAlmostEqual(fock_transition_probability(beam_splitter, state, bunched), 0.5)

    def test_fock_normalization(self):
        """Тест нормировки по полному пространству Фока"""
        for n_photons, n_modes in ((2, 4), (3, 6), (3, 8)):
            unitary = haar_random_unitary(n_modes, n_modes)
            source = ModeOccupation.from_modes(range(n_photons), n_modes)
            total = sum(
                fock_transition_probability(unitary, source, ModeOccupation.from_modes(modes, n_modes))
                for modes in combinations_with_replacement(range(n_modes), n_photons)
            )
            self.assertLess(abs(total - 1.0), 1e-8)

    def test_collision_input(self):
        """Тест входа с коллизией"""
        with self.assertRaises(UnsupportedStateError):
            transition_probability(self.unitary, ModeOccupation((2, 0, 0, 0, 0)), self.source)

    def test_exact_distribution(self):
        """Тест плотного распределения"""
        for model in (SamplerModel.INDISTINGUISHABLE, SamplerModel.DISTINGUISHABLE, SamplerModel.UNIFORM):
            distribution = exact_distribution(self.unitary, self.source, model)
            self.assertEqual(distribution.dimension, 10)
            self.assertAlmostEqual(distribution.probabilities.sum(), 1.0, places=9)
            self.assertLessEqual(distribution.raw_mass, 1.0 + 1e-12)
        mean_field = mean_field_distribution(self.unitary, self.source, n_phases=200, seed=1)
        self.assertAlmostEqual(mean_field.probabilities.sum(), 1.0, places=9)
        with self.assertRaises(CapacityError):
            exact_distribution(self.unitary, self.source, 'ind', max_dim=5)

    def test_brute_force_sampling(self):
        """Тест сходимости эмпирического распределения"""
        distribution = exact_distribution(self.unitary, self.source, 'ind')
        sample = brute_force_sample(distribution, 20000, seed=4)
        self.assertLess(total_variation_distance(empirical_distribution(sample), distribution), 0.05)

    def test_direct_samplers(self):
        """Тест прямых сэмплеров различимых частиц и равномерного"""
        exact = exact_distribution(self.unitary, self.source, 'dis')
        sample = distinguishable_sample(self.unitary, self.source, 20000, seed=5)
        self.assertLess(total_variation_distance(empirical_distribution(sample), exact), 0.05)
        uniform = uniform_sample(self.unitary, self.source, 500, seed=6)
        self.assertEqual(uniform.modes.shape, (500, 2))
        self.assertTrue((np.diff(uniform.modes, axis=1) > 0).all())

    def test_mcmc_sampler(self):
        """Тест цепочки Метрополиса для неразличимых частиц"""
        exact = exact_distribution(self.unitary, self.source, 'ind')
        sample = mcmc_sample(self.unitary, self.source, 4000, burn_in=100, thin=5, seed=8)
        self.assertEqual(sample.n_events, 4000)
        self.assertGreater(sample.metadata['acceptance_rate'], 0.0)
        self.assertLess(total_variation_distance(empirical_distribution(sample), exact), 0.1)
        with self.assertRaises(InvalidParameterError):
            mcmc_sample(self.unitary, self.source, 10, burn_in=0, thin=0)

    def test_mcmc_proposal_equals_target(self):
        """Тест цепочки с целью, совпадающей с предложением: принимается всё"""
        sample = mcmc_sample(self.unitary, self.source, 200, burn_in=10, thin=2, seed=3, target='dis')
        self.assertEqual(sample.metadata['acceptance_rate'], 1.0)
        self.assertEqual(sample.model, SamplerModel.DISTINGUISHABLE.value)

    def test_mean_field_single_photon(self):
        """Тест среднего поля для одной частицы: закон |U_ij|^2"""
        source = ModeOccupation.from_modes((2,), 5)
        expected = np.abs(self.unitary.entries[:, 2]) ** 2
        sample = mean_field_sample(self.unitary, source, 20000, seed=6)
        self.assertLess(total_variation_distance(empirical_distribution(sample), expected), 0.03)
        distribution = mean_field_distribution(self.unitary, source, n_phases=50, seed=2)
        np.testing.assert_allclose(distribution.probabilities, expected, atol=1e-12)

    def test_mean_field_laws_normalized(self):
        """Тест нормировки одночастичных законов при любых фазах"""
        unitary = haar_random_unitary(13, 3)
        phases = make_rng(1).uniform(-np.pi, np.pi, size=(20, 3))
        laws = _mean_field_laws(unitary, [0, 5, 7], phases)
        self.assertEqual(laws.shape, (20, 13))
        np.testing.assert_allclose(laws.sum(axis=1), 1.0, atol=1e-12)

    def test_independence_chain_transition_balance(self):
        """Тест детального баланса по числу переходов на трёх состояниях"""
        target = np.array([0.2, 0.3, 0.5])
        proposal = np.array([0.5, 0.3, 0.2])
        states, _ = metropolised_independence_chain(target, proposal, 200000, seed=13)
        transitions = np.zeros((3, 3), dtype=np.int64)
        np.add.at(transitions, (states[:-1], states[1:]), 1)
        for i, j in ((0, 1), (0, 2), (1, 2)):
            forward, backward = transitions[i, j], transitions[j, i]
            self.assertGreater(forward + backward, 1000)
            self.assertLess(abs(forward - backward), 4 * math.sqrt(forward + backward))

    def test_independence_chain_balance(self):
        """Тест стационарного распределения цепочки"""
        target = np.array([0.1, 0.2, 0.3, 0.4])
        states, acceptance = metropolised_independence_chain(target, np.ones(4), 50000, seed=9)
        frequencies = np.bincount(states, minlength=4) / len(states)
        np.testing.assert_allclose(frequencies, target, atol=0.02)
        self.assertGreater(acceptance, 0.0)

    def test_draw_sample_is_deterministic(self):
        """Тест воспроизводимости выборки по зерну"""
        for model in SamplerModel:
            first = draw_sample(self.unitary, self.source, model, 50, seed=12)
            second = draw_sample(self.unitary, self.source, model, 50, seed=12)
            np.testing.assert_array_equal(first.modes, second.modes)
            self.assertEqual(first.model, model.value)

    def test_models_and_inputs(self):
        """Тест имён моделей и входов сцаттершота"""
        self.assertIs(SamplerModel.parse('indistinguishable'), SamplerModel.INDISTINGUISHABLE)
        self.assertIs(SamplerModel.parse('unif'), SamplerModel.UNIFORM)
        with self.assertRaises(InvalidParameterError):
            SamplerModel.parse('classical')
        inputs = scattershot_inputs()
        self.assertEqual(len(inputs), 8)
        self.assertEqual(inputs[0].to_text(), '1,6,8')
        self.assertTrue(all({5, 7} <= set(state.occupied_modes) for state in inputs))

    def test_event_sample_checks(self):
        """Тест проверок выборки"""
        with self.assertRaises(UnsupportedStateError):
            EventSample(np.array([[1, 1]]), 4)
        with self.assertRaises(DimensionError):
            EventSample(np.array([[0, 5]]), 4)


class ClusteringTest(SimpleTestCase):
    """Тесты кластеризации"""

    def setUp(self):
        self.groups = _sample(GROUPS, 12, [30] * len(GROUPS))
        distribution = exact_distribution(haar_random_unitary(13, 1), ModeOccupation.parse('1,2,3', 13), 'unif')
        self.uniform = brute_force_sample(distribution, 500, seed=2)

    def test_config_validation(self):
        """Тест проверки параметров"""
        with self.assertRaises(InvalidParameterError):
            ClusteringConfig(k=2)
        with self.assertRaises(InvalidParameterError):
            ClusteringConfig(voting_trials=4)
        with self.assertRaises(InvalidParameterError):
            ClusteringConfig(min_cluster_size=3)
        config = ClusteringConfig(metric='l1')
        self.assertEqual(config.radius, 4.0)
        self.assertEqual(ClusteringConfig.from_dict(config.to_dict()), config)

    def test_kmeans_objective_monotone(self):
        """Тест невозрастания целевой функции K-средних"""
        for seed in range(50):
            structure = kmeans(self.uniform, 10, seed=seed)
            history = np.array(structure.provenance['inertia_history'])
            self.assertTrue((np.diff(history) <= 1e-12).all(), f"seed={seed}")
            self.assertEqual(structure.counts.sum(), self.uniform.n_events)
            self.assertGreaterEqual(objective(structure, self.uniform), 0.0)

    def test_kmeans_plus_plus_separated_blobs(self):
        """Тест kmeans++: центры попадают в разные удалённые группы"""
        mains = [tuple(range(6)), tuple(range(6, 12)), tuple(range(12, 18))]
        neighbours = [(0, 1, 2, 3, 4, 6), (6, 7, 8, 9, 10, 12), (0, 12, 13, 14, 15, 16)]
        sample = _sample(mains + neighbours, 18, [100, 100, 100, 1, 1, 1])
        separated = 0
        for seed in range(100):
            centroids = kmeans_init(sample, 3, 'kmeans++', seed=seed)
            blobs = {int(np.argmax(centroid.reshape(3, 6).sum(axis=1))) for centroid in centroids}
            separated += len(blobs) == 3
        self.assertGreaterEqual(separated, 97)

    def test_kmeans_idempotent(self):
        """Тест повторного запуска из сошедшихся центроидов"""
        structure = kmeans(self.groups, 4, seed=0)
        again = kmeans(self.groups, 4, init=structure.centroids, seed=0)
        np.testing.assert_allclose(again.centroids, structure.centroids)
        self.assertEqual(again.provenance['iterations'], 1)
        np.testing.assert_array_equal(again.assignments, structure.assignments)

    def test_kmeans_history(self):
        """Тест истории центроидов"""
        structure = kmeans(self.uniform, 5, seed=1, keep_history=True)
        self.assertEqual(len(structure.centroid_history), structure.provenance['iterations'] + 1)

    def test_init_strategies(self):
        """Тест различных начальных центроидов"""
        for strategy in ('uniform', 'kmeans++', 'hierarchical'):
            centroids = kmeans_init(self.uniform, 25, strategy, seed=4)
            self.assertEqual(centroids.shape, (25, 13))
        plus = kmeans_init(self.uniform, 25, 'kmeans++', seed=4)
        self.assertEqual(len(np.unique(plus, axis=0)), 25)

    def test_infeasible_cluster_count(self):
        """Тест k больше числа различных состояний"""
        sample = _sample([(0, 1), (2, 3), (4, 5)], 6, [10, 10, 10])
        with self.assertRaises(InfeasibleClusterCountError):
            kmeans(sample, 5)

    def test_bubble(self):
        """Тест пузырьковой кластеризации"""
        sample = _sample([(0, 1), (0, 2), (3, 4)], 6, [10, 5, 8])
        structure = bubble_cluster(sample, 4.0, Metric.L1)
        self.assertEqual(structure.n_clusters, 2)
        np.testing.assert_array_equal(structure.centroids[0], [1, 1, 0, 0, 0, 0])
        np.testing.assert_array_equal(structure.counts, [15, 8])
        single = bubble_cluster(_sample([(0, 1)], 6, [7]), 2.0, Metric.L2)
        self.assertEqual(single.n_clusters, 1)
        with self.assertRaises(InsufficientDataError):
            bubble_cluster(EventSample(np.empty((0, 2)), 6), 2.0, Metric.L2)

    def test_hierarchical_outliers(self):
        """Тест иерархической кластеризации с выбросом"""
        sample = _sample(GROUPS + [(2, 11)], 12, [30] * len(GROUPS) + [1])
        structure = hierarchical_cluster(sample, 0.01, 5, Metric.L2)
        self.assertEqual(structure.n_clusters, 8)
        np.testing.assert_array_equal(structure.outliers, [240])
        self.assertEqual(structure.assignments[240], -1)
        self.assertEqual(structure.counts.sum(), 240)
        np.testing.assert_array_equal(structure.centroids[0], ModeOccupation.from_modes((0, 1), 12).as_array())
        self.assertEqual(assign(structure, sample).sum(), sample.n_events)
        with self.assertRaises(CoverageError):
            objective(structure, sample)

    def test_hierarchical_halting_failure(self):
        """Тест недостижимого условия остановки"""
        sample = _sample([(0, 1), (2, 3), (4, 5), (6, 7)], 8)
        with self.assertRaises(HaltingFailureError):
            hierarchical_cluster(sample, 0.01, 5, Metric.L2)

    def test_learn_structure_dispatch(self):
        """Тест выбора алгоритма по конфигурации"""
        for algorithm in (BUBBLE, HIERARCHICAL, KMEANS):
            structure = learn_structure(self.groups, ClusteringConfig(algorithm=algorithm, k=4), seed=0)
            self.assertEqual(structure.provenance['algorithm'], algorithm)
        restored = ClusterStructure.from_dict(structure.to_dict())
        np.testing.assert_array_equal(restored.centroids, structure.centroids)


class ValidationTest(SimpleTestCase):
    """Тесты критерия хи-квадрат"""

    def setUp(self):
        self.config = ClusteringConfig(k=4, voting_trials=1)
        self.reference = _sample(GROUPS, 12, [30] * len(GROUPS))
        self.candidate = _sample(GROUPS, 12, [25, 35] * 4)

    def test_pvalue(self):
        """Тест p-значений в критических точках"""
        self.assertAlmostEqual(chi_square_pvalue(3.841, 1), 0.05, places=3)
        self.assertAlmostEqual(chi_square_pvalue(36.42, 24), 0.05, places=3)
        self.assertEqual(chi_square_pvalue(0.0, 5), 1.0)

    def test_pvalue_monotone(self):
        """Тест монотонности p-значения по статистике и по числу степеней свободы"""
        statistics = np.linspace(0.0, 60.0, 61)
        for dof in (1, 5, 24):
            values = [chi_square_pvalue(statistic, dof) for statistic in statistics]
            self.assertTrue((np.diff(values) <= 0).all())
        by_dof = [chi_square_pvalue(10.0, dof) for dof in range(1, 30)]
        self.assertTrue((np.diff(by_dof) >= 0).all())

    def test_relabeling_invariance(self):
        """Тест независимости статистики от нумерации кластеров"""
        structure = learn_structure(self.reference, self.config, seed=0)
        relabeled = ClusterStructure(structure.centroids[::-1], structure.metric)
        candidate = _sample(GROUPS, 12, [40, 40, 20, 20, 30, 30, 30, 30])
        original = chi_square_for_structure(structure, self.reference, candidate)
        permuted = chi_square_for_structure(relabeled, self.reference, candidate)
        self.assertAlmostEqual(original.statistic, permuted.statistic)
        self.assertEqual(original.dof, permuted.dof)
        self.assertAlmostEqual(original.p_value, permuted.p_value)
        self.assertGreater(original.statistic, 0.0)

    def test_identical_samples(self):
        """Тест одинаковых выборок: статистика 0, p = 1"""
        result = compatibility_test(self.reference, self.reference, self.config, seed=0)
        self.assertAlmostEqual(result.statistic, 0.0)
        self.assertAlmostEqual(result.p_value, 1.0)
        self.assertIs(result.verdict, Verdict.COMPATIBLE)
        self.assertEqual(result.dof, 3)

    def test_sparse_cells_merged(self):
        """Тест слияния ячеек с ожидаемым числом меньше 5"""
        centroids = [ModeOccupation.from_modes(modes, 6).as_array() for modes in ((0, 1), (2, 3), (4, 5), (0, 5))]
        structure = ClusterStructure(np.array(centroids), Metric.L2)
        sample = _sample([(0, 1), (2, 3), (4, 5), (0, 5)], 6, [50, 50, 50, 2])
        result = chi_square_for_structure(structure, sample, sample)
        self.assertEqual(result.dof, 2)
        self.assertEqual(len(result.merged_cells), 1)
        self.assertEqual(result.merged_cells[0]['cluster'], 3)
        self.assertEqual(result.merged_cells[0]['into'], 0)

    def test_degenerate_structure(self):
        """Тест вырожденной структуры после слияния"""
        centroids = [ModeOccupation.from_modes(modes, 6).as_array() for modes in ((0, 1), (2, 3), (4, 5))]
        structure = ClusterStructure(np.array(centroids), Metric.L2)
        sample = _sample([(0, 1), (2, 3), (4, 5)], 6, [50, 50, 1])
        with self.assertRaises(DegenerateStructureError):
            chi_square_for_structure(structure, sample, sample, label='6,7,8')

    def test_scattershot_additivity(self):
        """Тест суммирования статистик и степеней свободы"""
        pairs = [('a', self.reference, self.candidate), ('b', self.candidate, self.reference)]
        result = scattershot_test(pairs, self.config, seed=2)
        self.assertEqual(len(result.components), 2)
        self.assertAlmostEqual(result.statistic, sum(c.statistic for c in result.components))
        self.assertEqual(result.dof, sum(c.dof for c in result.components))
        self.assertAlmostEqual(result.p_value, chi_square_pvalue(result.statistic, result.dof))

    def test_majority_vote(self):
        """Тест голосования большинством"""
        vote = majority_vote_test(self.reference, self.reference, self.config, trials=5, seed=1)
        self.assertEqual(len(vote.trials), 5)
        self.assertEqual(vote.n_compatible, 5)
        self.assertTrue(vote.compatible)
        with self.assertRaises(InvalidParameterError):
            majority_vote_test(self.reference, self.reference, self.config, trials=4)

    def test_discrimination(self):
        """Тест различения неразличимых частиц и равномерного распределения"""
        unitary = haar_random_unitary(8, 21)
        source = ModeOccupation.from_modes((0, 1, 2), 8)
        distribution = exact_distribution(unitary, source, 'ind')
        config = ClusteringConfig(k=10, voting_trials=1)
        reference = brute_force_sample(distribution, 2000, seed=1)
        twin = brute_force_sample(distribution, 2000, seed=2)
        uniform = uniform_sample(unitary, source, 2000, seed=3)
        self.assertTrue(compatibility_test(reference, twin, config, alpha=0.001, seed=0).compatible)
        self.assertFalse(compatibility_test(reference, uniform, config, alpha=0.01, seed=0).compatible)

    def test_reshuffle(self):
        """Тест выбора без возвращения из пула"""
        subset = reshuffle(self.reference, 50, seed=3)
        self.assertEqual(subset.n_events, 50)
        np.testing.assert_array_equal(subset.modes, reshuffle(self.reference, 50, seed=3).modes)
        with self.assertRaises(InsufficientDataError):
            reshuffle(self.reference, self.reference.n_events, seed=3)

    def test_confusion_matrix(self):
        """Тест матрицы ошибок"""
        matrix = ConfusionMatrix('ind', 'dis')
        for verdict in ('compatible', 'compatible', 'compatible', 'incompatible'):
            matrix.record(True, verdict)
        matrix.record(False, 'incompatible')
        self.assertAlmostEqual(matrix.success_rate(0), 0.75)
        self.assertAlmostEqual(matrix.standard_error(0), math.sqrt(0.75 * 0.25 / 4))
        self.assertAlmostEqual(matrix.success_rate(1), 1.0)
        merged = matrix.merge(matrix)
        self.assertEqual(merged.trials(0), 8)
        self.assertEqual(ConfusionMatrix.from_dict(matrix.to_dict()).counts.tolist(), matrix.counts.tolist())


class ExperimentTest(SimpleTestCase):
    """Тесты серий испытаний"""

    def _spec(self, **overrides):
        options = {
            'kind': CONFUSION,
            'reference_model': 'ind',
            'alternative_model': 'unif',
            'n_photons': 2,
            'n_modes': 6,
            'sample_size': 200,
            'trials': 2,
            'clustering': ClusteringConfig(k=3, voting_trials=1),
            'master_seed': 7,
        }
        options.update(overrides)
        return ExperimentSpec(**options)

    def test_spec_defaults(self):
        """Тест описания эксперимента"""
        spec = self._spec()
        self.assertEqual(spec.input_state, '1,2')
        restored = ExperimentSpec.from_dict(spec.to_dict())
        self.assertEqual(restored.to_dict(), spec.to_dict())
        with self.assertRaises(InvalidParameterError):
            self._spec(kind='unknown')
        with self.assertRaises(InvalidParameterError):
            self._spec(kind=K_SWEEP)

    def test_resolve_jobs(self):
        """Тест числа процессов"""
        self.assertEqual(resolve_jobs(4, 2), 2)
        self.assertEqual(resolve_jobs(3, 0), 3)
        self.assertEqual(resolve_jobs(0, 0), os.cpu_count() or 1)

    def test_confusion_experiment(self):
        """Тест матрицы ошибок и воспроизводимости"""
        spec = self._spec()
        result = run_confusion_experiment(spec)
        rows = result['matrix']['rows']
        total = rows['compatible']['trials'] + rows['incompatible']['trials'] + result['matrix']['degenerate']
        self.assertEqual(total, 4)
        again = run_confusion_experiment(spec)
        self.assertEqual(json.dumps(result, sort_keys=True), json.dumps(again, sort_keys=True))
        self.assertIn('Эксперимент: confusion', render_text(result))

    def test_swapped_roles(self):
        """Тест обмена ролей эталона и кандидата в совместимых парах"""
        spec = self._spec(swap=True, trials=3)
        result = run_confusion_experiment(spec)
        swap = result['swap']
        self.assertLessEqual(swap['trials'], 3)
        self.assertLessEqual(swap['flips'], swap['trials'])
        self.assertIn('обмен ролей изменил решение', render_text(result))
        self.assertTrue(ExperimentSpec.from_dict(spec.to_dict()).swap)
        self.assertNotIn('swap', run_confusion_experiment(self._spec(trials=1)))

    def test_swap_summary(self):
        """Тест подсчёта смен решения"""
        outcomes = [
            {'compatible': True, 'swapped': True},
            {'compatible': True, 'swapped': False},
            {'compatible': None, 'swapped': True},
            {'compatible': False, 'swapped': False},
        ]
        self.assertEqual(swap_summary(outcomes), {'trials': 3, 'flips': 1, 'flip_percent': 100 / 3})
        self.assertTrue(math.isnan(swap_summary([])['flip_percent']))

    @tag('slow')
    def test_parallel_matches_serial(self):
        """Тест независимости результата от числа процессов"""
        spec = self._spec(trials=4)
        serial = run_confusion_experiment(spec, jobs=1)
        parallel = run_confusion_experiment(spec, jobs=2)
        self.assertEqual(json.dumps(serial, sort_keys=True), json.dumps(parallel, sort_keys=True))

    def test_capacity_guard(self):
        """Тест ограничения размера плотного распределения"""
        spec = self._spec(n_photons=3, n_modes=13, max_dense_dim=10)
        with self.assertRaises(CapacityError):
            run_experiment(spec)

    def test_iteration_trace(self):
        """Тест p-значений по итерациям"""
        spec = self._spec(kind=ITERATION_TRACE, n_inits=2, clustering=ClusteringConfig(k=3, max_iter=5))
        result = run_experiment(spec)
        self.assertEqual(len(result['compatible']['mean_pvalue']), 6)
        self.assertEqual(len(result['incompatible']['traces']), 2)
        self.assertIn('bubble_pvalue', result['compatible'])

    def test_mcmc_tvd(self):
        """Тест сходимости MCMC по расстоянию полной вариации"""
        spec = self._spec(kind=MCMC_TVD, n_modes=5, mcmc_events=3000, burn_in=50, thin=3)
        result = run_experiment(spec)
        self.assertEqual(len(result['checkpoints']), 5)
        self.assertLess(result['tvd'], 0.1)


class AnalysisTest(SimpleTestCase):
    """Тесты структуры распределений"""

    def test_ball_fraction(self):
        """Тест доли пространства в шаре"""
        self.assertAlmostEqual(ball_fraction(3, 10, 6), 1.0)
        self.assertAlmostEqual(ball_fraction(4, 40, 2), 145 / 91390)
        with self.assertRaises(InvalidParameterError):
            ball_fraction(3, 10, 3)

    def test_ball_covering_space(self):
        """Тест шара радиуса 2N: отношение равно 1"""
        report = ball_ratio_report(5, 50, 3, 10, 6, seed=3)
        self.assertEqual(report.mean_rp, 1.0)
        self.assertEqual(report.mean_rq, 1.0)
        self.assertEqual(report.fraction_rp_above_one, 0.0)
        self.assertEqual(report.fraction_rq_above_one, 0.0)
        self.assertEqual(len(list(report.csv_rows())), 250)

    def test_ball_mass_monotone(self):
        """Тест неубывания массы шара с ростом радиуса"""
        distribution = exact_distribution(haar_random_unitary(8, 4), ModeOccupation.from_modes((0, 1, 2), 8), 'ind')
        table = collision_free_modes(3, 8)
        centers = np.argsort(-distribution.probabilities)[:10]
        masses = [_ball_masses(table, 8, centers, (distribution.probabilities,), k)[:, 0] for k in (2, 4, 6)]
        for smaller, larger in zip(masses, masses[1:]):
            self.assertTrue((smaller <= larger + 1e-15).all())
        np.testing.assert_allclose(masses[-1], 1.0)
        fractions = [ball_fraction(3, 8, k) for k in (2, 4, 6)]
        self.assertEqual(fractions, sorted(fractions))

    def test_sorted_pair(self):
        """Тест корреляций совпадающих распределений"""
        p = np.array([0.4, 0.1, 0.3, 0.2])
        pair = sorted_pair(p, p)
        self.assertAlmostEqual(pair.pearson, 1.0)
        self.assertAlmostEqual(pair.spearman, 1.0)
        np.testing.assert_array_equal(pair.p_sorted, [0.4, 0.3, 0.2, 0.1])
        with self.assertRaises(DimensionError):
            sorted_pair(p, p[:3])

    def test_sorted_pair_reversed(self):
        """Тест обратного порядка: коэффициент Спирмена -1"""
        pair = sorted_pair(np.array([0.4, 0.3, 0.2, 0.1]), np.array([0.1, 0.2, 0.3, 0.4]))
        self.assertAlmostEqual(pair.spearman, -1.0)
        np.testing.assert_array_equal(pair.q_sorted, [0.1, 0.2, 0.3, 0.4])

    def test_cumulative_fraction(self):
        """Тест кумулятивной доли равномерного распределения"""
        uniform = np.full(10, 0.1)
        self.assertEqual(cumulative_fraction(uniform, uniform, 0.5), (0.5, 0.5))
        with self.assertRaises(InvalidParameterError):
            cumulative_fraction(uniform, uniform, 1.5)

    def test_mode_correlators(self):
        """Тест двухмодовых корреляторов"""
        sample = _sample([(0, 1), (2, 3)], 4)
        matrix = mode_correlators(sample)
        self.assertAlmostEqual(matrix[0, 0], 0.25)
        self.assertAlmostEqual(matrix[0, 2], -0.25)
        np.testing.assert_allclose(matrix, matrix.T)
        np.testing.assert_array_equal(mode_correlators(_sample([(0, 1)], 4)), np.zeros((4, 4)))

    def test_correlation_ensemble(self):
        """Тест корреляций по ансамблю"""
        summary = correlation_ensemble(3, 2, 5, seed=2)
        self.assertEqual(summary['unitaries'], 3)
        self.assertLessEqual(abs(summary['pearson_mean']), 1.0)


class CommandTest(TestCase):
    """Тесты команд управления"""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.tmp)

    def path(self, name):
        return os.path.join(self.tmp, name)

    def run_command(self, name, **options):
        out = StringIO()
        call_command(name, stdout=out, stderr=StringIO(), **options)
        return out.getvalue()

    def make_samples(self):
        unitary = self.path('u.json')
        self.run_command('gen_unitary', modes=6, out=unitary, seed=3)
        sample = self.path('s.jsonl')
        self.run_command('sample', unitary=unitary, photons=2, events=300, out=sample, seed=1)
        return unitary, sample

    def test_gen_unitary(self):
        """Тест генерации матрицы и манифеста"""
        first, second = self.path('a.json'), self.path('b.json')
        self.run_command('gen_unitary', modes=5, out=first, seed=3)
        self.run_command('gen_unitary', modes=5, out=second, seed=3)
        self.assertTrue(read_unitary(first).is_unitary())
        self.assertEqual(Path(first).read_bytes(), Path(second).read_bytes())
        manifest = read_json(first + '.manifest.json')
        self.assertEqual(manifest['command'], 'gen_unitary')
        self.assertEqual(manifest['master_seed'], 3)
        self.assertEqual(RunRecord.objects.filter(command='gen_unitary', success=True).count(), 2)

    def test_sample_is_reproducible(self):
        """Тест побайтного совпадения выборок"""
        unitary, sample = self.make_samples()
        again = self.path('again.jsonl')
        self.run_command('sample', unitary=unitary, photons=2, events=300, out=again, seed=1)
        self.assertEqual(Path(sample).read_bytes(), Path(again).read_bytes())
        loaded = read_sample(sample)
        self.assertEqual(loaded.n_events, 300)
        self.assertEqual(loaded.input_state.to_text(), '1,2')

    def test_sample_usage_error(self):
        """Тест ошибки использования: нет --input и --photons"""
        unitary, _ = self.make_samples()
        with self.assertRaises(CommandError) as context:
            self.run_command('sample', unitary=unitary, events=10, out=self.path('x.jsonl'))
        self.assertEqual(context.exception.returncode, 2)
        record = RunRecord.objects.get(command='sample', success=False)
        self.assertEqual(record.exit_code, 2)

    def test_sample_capacity_error(self):
        """Тест превышения размера плотного распределения"""
        unitary, _ = self.make_samples()
        with override_settings(BOSONVALID={**settings.BOSONVALID, 'MAX_DENSE_DIM': 5}):
            with self.assertRaises(CommandError) as context:
                self.run_command('sample', unitary=unitary, photons=2, events=10, out=self.path('x.jsonl'))
        self.assertEqual(context.exception.returncode, 3)

    def test_invalid_file(self):
        """Тест некорректного файла матрицы"""
        broken = self.path('broken.json')
        Path(broken).write_text('{"m": 2, "re": [[1]]', encoding='utf-8')
        with self.assertRaises(CommandError) as context:
            self.run_command('sample', unitary=broken, photons=1, events=1, out=self.path('x.jsonl'))
        self.assertEqual(context.exception.returncode, 2)

    def test_validate_compatible(self):
        """Тест совместимых выборок"""
        _, sample = self.make_samples()
        report = self.path('report.json')
        output = self.run_command('validate', reference=[sample], candidate=[sample], k=3, voting=1, out=report)
        self.assertIn('compatible', output)
        self.assertAlmostEqual(read_json(report)['result']['p_value'], 1.0)

    def test_validate_incompatible(self):
        """Тест несовместимых выборок: код завершения 1"""
        unitary = self.path('u8.json')
        self.run_command('gen_unitary', modes=8, out=unitary, seed=21)
        reference, candidate = self.path('ind.jsonl'), self.path('unif.jsonl')
        self.run_command('sample', unitary=unitary, photons=3, events=2000, out=reference, seed=1)
        self.run_command('sample', unitary=unitary, photons=3, model='unif', events=2000, out=candidate, seed=2)
        with self.assertRaises(CommandError) as context:
            self.run_command(
                'validate', reference=[reference], candidate=[candidate], k=10, voting=1, alpha=0.01,
                out=self.path('incompatible.json'),
            )
        self.assertEqual(context.exception.returncode, 1)

    def test_validate_grouped(self):
        """Тест сцаттершот-критерия по файлам с разными входами"""
        unitary, _ = self.make_samples()
        files = []
        for position, state in enumerate(('1,2', '3,4')):
            path = self.path(f'in{position}.jsonl')
            self.run_command('sample', unitary=unitary, input=state, events=300, out=path, seed=position)
            files.append(path)
        output = self.run_command(
            'validate', reference=files, candidate=list(reversed(files)), grouped=True, k=3, voting=1,
            out=self.path('grouped.json'),
        )
        self.assertIn('compatible', output)

    def test_validate_requires_out(self):
        """Тест обязательного файла отчёта: без него нет манифеста"""
        _, sample = self.make_samples()
        with self.assertRaises(CommandError):
            self.run_command('validate', reference=[sample], candidate=[sample], k=3, voting=1)
        report = self.path('report.json')
        self.run_command('validate', reference=[sample], candidate=[sample], k=3, voting=1, out=report)
        manifest = read_json(report + '.manifest.json')
        self.assertEqual(manifest['command'], 'validate')
        self.assertIn(report, manifest['artifacts'])

    def test_validate_voting_output(self):
        """Тест вывода голосования: p-значения всех испытаний"""
        _, sample = self.make_samples()
        report = self.path('vote.json')
        output = self.run_command('validate', reference=[sample], candidate=[sample], k=3, out=report)
        self.assertIn('голосов за совместимость 11 из 11', output)
        self.assertEqual(output.count('1.0000'), 11)
        trials = read_json(report)['result']['trials']
        self.assertEqual([trial['p_value'] for trial in trials], [1.0] * 11)

    def test_validate_is_reproducible(self):
        """Тест побайтного совпадения отчётов критерия"""
        unitary, reference = self.make_samples()
        candidate = self.path('candidate.jsonl')
        self.run_command('sample', unitary=unitary, photons=2, events=300, out=candidate, seed=2)
        first, second = self.path('first.json'), self.path('second.json')
        for out in (first, second):
            self.run_command('validate', reference=[reference], candidate=[candidate], k=3, voting=3, out=out, seed=4)
        self.assertEqual(Path(first).read_bytes(), Path(second).read_bytes())

    def test_saved_structure_reused(self):
        """Тест сохранения структуры и повторного критерия по ней"""
        unitary, reference = self.make_samples()
        candidate = self.path('candidate.jsonl')
        self.run_command('sample', unitary=unitary, photons=2, events=300, out=candidate, seed=2)
        structure_path, voted = self.path('structure.json'), self.path('voted.json')
        self.run_command(
            'validate', reference=[reference], candidate=[candidate], k=3, voting=3, seed=5,
            out=voted, save_structure=structure_path,
        )
        structure = read_structure(structure_path)
        config = ClusteringConfig(k=3, voting_trials=3)
        expected = learn_structure(read_sample(reference), config, voting_seeds(5, 3)[0])
        np.testing.assert_allclose(structure.centroids, expected.centroids)

        reused = self.path('reused.json')
        output = self.run_command(
            'validate', reference=[reference], candidate=[candidate], structure=structure_path, out=reused,
        )
        self.assertIn('p=', output)
        first_vote = read_json(voted)['result']['trials'][0]
        result = read_json(reused)['result']
        self.assertAlmostEqual(result['p_value'], first_vote['p_value'])
        self.assertEqual(result['dof'], first_vote['dof'])
        self.assertEqual(read_json(reused)['structure'], structure_path)

    def test_experiment(self):
        """Тест команды эксперимента"""
        spec = self.path('spec.json')
        write_json({'kind': 'confusion', 'models': ['ind', 'unif'], 'N': 2, 'm': 6,
                    'sample_size': 150, 'trials': 1, 'k': 3, 'voting_trials': 1}, spec)
        first, second = self.path('first.json'), self.path('second.json')
        self.run_command('experiment', spec=spec, out=first, jobs=1, seed=11)
        self.run_command('experiment', spec=spec, out=second, jobs=1, seed=11)
        self.assertEqual(Path(first).read_bytes(), Path(second).read_bytes())
        self.assertEqual(read_json(first)['kind'], 'confusion')
        self.assertTrue(Path(first).with_suffix('.txt').exists())

    def test_analyze_reports(self):
        """Тест отчётов анализа"""
        ball = self.path('ball.csv')
        self.run_command('analyze', report='ball', dims='2,5', k=[4], unitary_ensemble=2, top=3, out=ball)
        summary = read_json(Path(ball).with_suffix('.summary.json'))
        self.assertAlmostEqual(summary['balls'][0]['mean_rp'], 1.0)

        ranked = self.path('sorted.csv')
        self.run_command('analyze', report='sorted', dims='2,5', unitary_ensemble=1, out=ranked)
        self.assertEqual(len(Path(ranked).read_text(encoding='utf-8').splitlines()), 11)
        self.assertEqual(len(read_json(Path(ranked).with_suffix('.summary.json'))['fractions']), 2)

        _, sample = self.make_samples()
        correlators = self.path('corr.csv')
        self.run_command('analyze', report='corr', sample=sample, out=correlators)
        self.assertEqual(len(Path(correlators).read_text(encoding='utf-8').splitlines()), 6)

    def test_analyze_is_reproducible(self):
        """Тест побайтного совпадения отчётов анализа"""
        first, second = self.path('first.csv'), self.path('second.csv')
        for out in (first, second):
            self.run_command('analyze', report='ball', dims='2,6', k=[2, 4], unitary_ensemble=2, top=4, out=out, seed=8)
        self.assertEqual(Path(first).read_bytes(), Path(second).read_bytes())
        self.assertEqual(
            Path(first).with_suffix('.summary.json').read_bytes(),
            Path(second).with_suffix('.summary.json').read_bytes(),
        )

    def test_analyze_ball_requires_dims(self):
        """Тест отчёта ball без размерностей: ошибка использования"""
        unitary = self.path('u.json')
        self.run_command('gen_unitary', modes=5, out=unitary, seed=3)
        with self.assertRaises(CommandError) as context:
            self.run_command('analyze', report='ball', unitary=unitary, out=self.path('ball.csv'))
        self.assertEqual(context.exception.returncode, 2)
        with self.assertRaises(CommandError) as context:
            self.run_command('analyze', report='sorted', unitary=unitary, out=self.path('sorted.csv'))
        self.assertEqual(context.exception.returncode, 2)

    def test_replay_run(self):
        """Тест повтора запуска по манифесту"""
        unitary = self.path('u.json')
        self.run_command('gen_unitary', modes=4, out=unitary, seed=9)
        output = self.run_command('replay_run', manifest=unitary + '.manifest.json', check=True)
        self.assertIn('Все артефакты совпали', output)
        self.assertTrue(RunRecord.objects.filter(command='replay_run').exists())


class RunLoggerTest(TestCase):
    """Тесты журнала запусков"""

    def test_run_record_created(self):
        """Тест записи запуска в базу данных"""
        RunActivityLogger.log_run(
            'validate', {'k': 3}, 5, ['report.json'], success=False, exit_code=2, error_message='ошибка',
        )
        record = RunRecord.objects.get(command='validate')
        self.assertFalse(record.success)
        self.assertEqual(record.exit_code, 2)
        self.assertEqual(record.parameters, {'k': 3})
        self.assertEqual(record.master_seed, 5)


class FilesTest(SimpleTestCase):
    """Тесты файловых форматов"""

    def test_sample_file_roundtrip(self):
        """Тест записи и чтения выборки"""
        sample = _sample([(0, 2), (1, 3)], 4)
        sample.input_state = ModeOccupation.from_modes((0, 1), 4)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_sample(sample, os.path.join(tmp, 's.jsonl'))
            loaded = read_sample(path)
        np.testing.assert_array_equal(loaded.modes, sample.modes)
        self.assertEqual(loaded.input_state, sample.input_state)

    def test_nan_written_as_null(self):
        """Тест записи NaN как null"""
        with tempfile.TemporaryDirectory() as tmp:
            path = write_json({'rate': math.nan, 'rows': [np.float64('nan'), 1.5], 'nested': {'std': math.inf}},
                              os.path.join(tmp, 'result.json'))
            text = Path(path).read_text(encoding='utf-8')
            data = read_json(path)
        self.assertNotIn('NaN', text)
        self.assertNotIn('Infinity', text)
        self.assertEqual(data, {'rate': None, 'rows': [None, 1.5], 'nested': {'std': None}})


@tag('slow')
class StatisticalReproductionTest(SimpleTestCase):
    """Длительные статистические проверки (исключаются через --exclude-tag slow)"""

    def _spec(self, **overrides):
        options = {
            'reference_model': 'ind',
            'alternative_model': 'ind',
            'n_photons': 3,
            'n_modes': 13,
            'sample_size': 500,
            'trials': 400,
            'clustering': ClusteringConfig(k=25, voting_trials=1),
            'master_seed': 2024,
        }
        options.update(overrides)
        return ExperimentSpec(**options)

    def test_null_calibration(self):
        """Тест доли ложных отклонений при alpha = 5%"""
        result = run_confusion_experiment(self._spec(), jobs=resolve_jobs(0))
        row = result['matrix']['rows']['compatible']
        rate = row['predicted_incompatible'] / row['trials']
        sigma = math.sqrt(0.05 * 0.95 / row['trials'])
        self.assertLess(abs(rate - 0.05), 3 * sigma)

    def test_simulators_rejected(self):
        """Тест отличения среднего поля и равномерного распределения от неразличимых частиц"""
        for reference, alternative in (('ind', 'mf'), ('mf', 'ind'), ('ind', 'unif'), ('unif', 'ind')):
            spec = self._spec(reference_model=reference, alternative_model=alternative,
                              sample_size=6000, trials=10, alpha=0.01)
            matrix = ConfusionMatrix.from_dict(run_confusion_experiment(spec, jobs=resolve_jobs(0))['matrix'])
            self.assertEqual(matrix.counts[1, 1], 10, f"{reference} / {alternative}")

    def test_mcmc_convergence(self):
        """Тест TVD цепочки Метрополиса для (4, 12)"""
        spec = self._spec(kind=MCMC_TVD, n_photons=4, n_modes=12, trials=1,
                          mcmc_events=1000 * hilbert_dimension(4, 12), burn_in=100, thin=5)
        self.assertLess(run_experiment(spec)['tvd'], 0.02)

    def test_distribution_structure(self):
        """Тест статистик структуры распределений для (4, 40)"""
        report = ball_ratio_report(20, 20, 4, 40, 2, seed=0)
        self.assertGreaterEqual(report.mean_rp, 1.2)
        self.assertLessEqual(report.mean_rp, 1.7)
        self.assertGreaterEqual(report.fraction_rp_above_one, 0.85)
        self.assertAlmostEqual(report.ball_fraction, 145 / 91390)
        summary = correlation_ensemble(20, 4, 40, seed=0)
        self.assertGreaterEqual(summary['pearson_mean'], 0.56)
        self.assertLessEqual(summary['pearson_mean'], 0.68)

    def test_swapped_roles_rarely_flip(self):
        """Тест обмена ролей: решение голосования для совместимых пар меняется редко"""
        spec = self._spec(trials=20, swap=True, clustering=ClusteringConfig(k=25, voting_trials=11))
        swap = run_confusion_experiment(spec, jobs=resolve_jobs(0))['swap']
        self.assertGreaterEqual(swap['trials'], 18)
        self.assertLessEqual(swap['flip_percent'], 10.0)

    def _matrix(self, **overrides):
        spec = self._spec(alternative_model='dis', trials=20, **overrides)
        return ConfusionMatrix.from_dict(run_confusion_experiment(spec, jobs=resolve_jobs(0))['matrix'])

    def test_confusion_kmeans_voting(self):
        """Тест матрицы ошибок (3, 13), 500 событий: K-средних++ с голосованием"""
        matrix = self._matrix(clustering=ClusteringConfig(k=25, voting_trials=11))
        self.assertEqual(matrix.trials(0) + matrix.trials(1) + matrix.degenerate, 40)
        self.assertGreaterEqual(matrix.success_rate(0), 0.9)
        self.assertGreater(matrix.success_rate(1), 1 - matrix.success_rate(0))

    def test_confusion_bubble(self):
        """Тест матрицы ошибок (3, 13), 500 событий: пузырьковая кластеризация"""
        matrix = self._matrix(clustering=ClusteringConfig(algorithm=BUBBLE))
        self.assertGreaterEqual(matrix.success_rate(0), 0.8)

    def test_confusion_hierarchical(self):
        """Тест матрицы ошибок (3, 13), 500 событий: иерархическая кластеризация"""
        matrix = self._matrix(clustering=ClusteringConfig(algorithm=HIERARCHICAL))
        self.assertEqual(matrix.trials(0) + matrix.trials(1) + matrix.degenerate, 40)
        if matrix.trials(0):
            self.assertGreaterEqual(matrix.success_rate(0), 0.75)

    def test_haar_ensemble(self):
        """Тест средней доли правильных решений по ансамблю унитарных матриц, 1000 событий"""
        spec = self._spec(alternative_model='dis', sample_size=1000, trials=4, unitaries=5,
                          clustering=ClusteringConfig(k=25, voting_trials=11))
        result = run_confusion_experiment(spec, jobs=resolve_jobs(0))
        self.assertEqual(len(result['per_unitary']), 5)
        summary = result['per_unitary_summary']
        self.assertGreaterEqual(summary['compatible_percent']['mean'], 80.0)
        self.assertGreater(summary['incompatible_percent']['mean'], 100 - summary['compatible_percent']['mean'])

    def test_larger_dimensions(self):
        """Тест пробного прогона (4, 20), 6000 событий"""
        spec = self._spec(alternative_model='dis', n_photons=4, n_modes=20, sample_size=6000, trials=2,
                          clustering=ClusteringConfig(k=25, voting_trials=11))
        matrix = ConfusionMatrix.from_dict(run_confusion_experiment(spec, jobs=resolve_jobs(0))['matrix'])
        self.assertEqual(matrix.trials(0) + matrix.trials(1) + matrix.degenerate, 4)
        self.assertGreaterEqual(matrix.counts[0, 0], 1)
