from django.conf import settings

from ...clustering import ALGORITHMS, INIT_STRATEGIES, KMEANS, ClusteringConfig, learn_structure
from ...exceptions import EXIT_INCOMPATIBLE, EXIT_OK, InvalidParameterError
from ...files import read_sample, read_structure, write_json, write_structure
from ...fock import Metric
from ...validation import (
    VoteResult,
    chi_square_for_structure,
    compatibility_test,
    majority_vote_test,
    scattershot_test,
    scattershot_vote,
    voting_seeds,
)
from ..base import RunCommand


def _pair_by_input(references, candidates):
    """Пары (метка, эталон, кандидат), сопоставленные по входному состоянию."""
    def label(sample):
        if sample.input_state is None:
            raise InvalidParameterError(f"В файле {sample.source} не указано входное состояние")
        return sample.input_state.to_text()

    by_label = {label(sample): sample for sample in candidates}
    if len(by_label) != len(candidates):
        raise InvalidParameterError("Несколько файлов-кандидатов с одинаковым входным состоянием")
    pairs = []
    for reference in references:
        key = label(reference)
        if key not in by_label:
            raise InvalidParameterError(f"Нет выборки-кандидата для входа ({key})")
        pairs.append((key, reference, by_label.pop(key)))
    if by_label:
        raise InvalidParameterError(f"Нет эталонных выборок для входов: {', '.join(sorted(by_label))}")
    return pairs


class Command(RunCommand):
    """Критерий совместимости двух выборок"""
    help = 'Проверяет совместимость выборки-кандидата с эталонной выборкой по кластерному критерию хи-квадрат'
    command_name = 'validate'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        defaults = settings.BOSONVALID
        parser.add_argument('--reference', type=str, nargs='+', required=True, help='Эталонная выборка (выборки)')
        parser.add_argument('--candidate', type=str, nargs='+', required=True, help='Проверяемая выборка (выборки)')
        parser.add_argument('--grouped', action='store_true',
                            help='Сцаттершот: пары выборок по входным состояниям, один общий критерий')
        parser.add_argument('--algorithm', choices=ALGORITHMS, default=KMEANS)
        parser.add_argument('--k', type=int, default=defaults['CLUSTERS'], help='Число кластеров')
        parser.add_argument('--radius', type=float, help='Радиус пузырьковой кластеризации')
        parser.add_argument('--metric', choices=[metric.value for metric in Metric], default=Metric.L2.value)
        parser.add_argument('--init', choices=INIT_STRATEGIES, default='kmeans++')
        parser.add_argument('--voting', type=int, default=defaults['VOTING_TRIALS'],
                            help='Нечётное число испытаний для голосования большинством (1 - без голосования)')
        parser.add_argument('--outlier-fraction', type=float, default=defaults['OUTLIER_FRACTION'])
        parser.add_argument('--min-cluster-size', type=int, default=defaults['MIN_CLUSTER_SIZE'])
        parser.add_argument('--max-iter', type=int, default=defaults['MAX_ITERATIONS'])
        parser.add_argument('--alpha', type=float, default=defaults['ALPHA'], help='Уровень значимости')
        parser.add_argument('--out', type=str, required=True, help='Файл отчёта JSON')
        parser.add_argument('--save-structure', type=str,
                            help='Сохранить кластерную структуру эталона (при голосовании - структуру первого испытания)')
        parser.add_argument('--structure', type=str,
                            help='Готовая кластерная структура: критерий без обучения и без голосования')

    def run(self, options):
        radius = options['radius']
        if radius is None:
            radius = settings.BOSONVALID['BUBBLE_RADIUS'][options['metric'].upper()]
        config = ClusteringConfig(
            algorithm=options['algorithm'],
            k=options['k'],
            radius=radius,
            outlier_fraction=options['outlier_fraction'],
            min_cluster_size=options['min_cluster_size'],
            max_iter=options['max_iter'],
            metric=options['metric'],
            init=options['init'],
            voting_trials=options['voting'],
        )
        references = [read_sample(path) for path in options['reference']]
        candidates = [read_sample(path) for path in options['candidate']]
        alpha, seed, trials = options['alpha'], options['seed'], options['voting']

        if options['structure']:
            if options['grouped'] or len(references) != 1 or len(candidates) != 1:
                raise InvalidParameterError("С --structure нужно ровно по одному файлу --reference и --candidate")
            structure = read_structure(options['structure'])
            result = chi_square_for_structure(structure, references[0], candidates[0], alpha)
        elif options['grouped']:
            pairs = _pair_by_input(references, candidates)
            if trials > 1:
                result = scattershot_vote(pairs, config, alpha, trials, seed)
            else:
                result = scattershot_test(pairs, config, alpha, seed)
        else:
            if len(references) != 1 or len(candidates) != 1:
                raise InvalidParameterError("Без --grouped нужно ровно по одному файлу --reference и --candidate")
            reference, candidate = references[0], candidates[0]
            if trials > 1:
                result = majority_vote_test(reference, candidate, config, alpha, trials, seed)
            else:
                result = compatibility_test(reference, candidate, config, alpha, seed)
            if options['save_structure']:
                structure_seed = voting_seeds(seed, trials)[0] if trials > 1 else seed
                structure = learn_structure(reference, config, structure_seed)
                self.add_artifact(write_structure(structure, options['save_structure']))

        report = {'config': config.to_dict(), 'alpha': alpha, 'seed': seed, 'result': result.to_dict()}
        if options['structure']:
            report['structure'] = options['structure']
        self.add_artifact(write_json(report, options['out']))

        summary = self._summary(result)
        if result.compatible:
            self.stdout.write(self.style.SUCCESS(f"compatible {summary}"))
            return EXIT_OK
        self.stdout.write(self.style.ERROR(f"incompatible {summary}"))
        return EXIT_INCOMPATIBLE

    @staticmethod
    def _summary(result):
        if isinstance(result, VoteResult):
            p_values = ' '.join(f"{trial.p_value:.4f}" for trial in result.trials)
            return f"голосов за совместимость {result.n_compatible} из {len(result.trials)}, p=[{p_values}]"
        return f"chi2={result.statistic:.4f} nu={result.dof} p={result.p_value:.4f}"
