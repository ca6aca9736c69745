from pathlib import Path

import numpy as np
from django.conf import settings

from ...analysis import (
    ball_ratio_report,
    correlation_ensemble,
    cumulative_fraction,
    mode_correlators,
    sorted_pair,
)
from ...exceptions import InvalidParameterError
from ...files import read_sample, read_unitary, write_csv, write_json, write_matrix_csv
from ...fock import ModeOccupation
from ...sampler import SamplerModel, exact_distribution, haar_random_unitary
from ...seeding import split_seed
from ..base import RunCommand

REPORTS = ('sorted', 'cumulative', 'ball', 'corr')


def _parse_dims(text):
    if not text:
        raise InvalidParameterError("Укажите --dims в виде \"N,m\"")
    try:
        n_photons, n_modes = (int(part) for part in text.split(','))
    except ValueError:
        raise InvalidParameterError(f"--dims ожидает \"N,m\", получено {text!r}") from None
    return n_photons, n_modes


class Command(RunCommand):
    """Анализ структуры распределений"""
    help = 'Строит отчёты о структуре распределений: sorted, cumulative, ball, corr'
    command_name = 'analyze'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--report', choices=REPORTS, required=True, help='Вид отчёта')
        parser.add_argument('--dims', type=str, help='Размерности "N,m"')
        parser.add_argument('--unitary-ensemble', type=int, default=20, help='Число унитарных матриц Хаара')
        parser.add_argument('--unitary', type=str, help='Файл унитарной матрицы для sorted/cumulative')
        parser.add_argument('--sample', type=str, help='Файл выборки для corr')
        parser.add_argument('--k', type=int, nargs='+', default=[2], help='Радиусы L1-шаров (чётные)')
        parser.add_argument('--top', type=int, default=20, help='Число самых вероятных исходов')
        parser.add_argument('--mass', type=float, nargs='+', default=[0.5, 0.8], help='Уровни накопленной массы')
        parser.add_argument('--out', type=str, required=True, help='Файл отчёта CSV')

    def run(self, options):
        report = options['report']
        if report == 'corr':
            summary = self._correlators(options)
        elif report == 'ball':
            # шары строятся по ансамблю Хаара, файл матрицы здесь не используется
            if not options['dims']:
                raise InvalidParameterError("Для отчёта ball укажите --dims")
            summary = self._balls(options)
        else:
            if not options['dims'] and not options['unitary']:
                raise InvalidParameterError("Укажите --dims или --unitary")
            summary = self._distributions(options, report)
        summary_path = Path(options['out']).with_suffix('.summary.json')
        self.add_artifact(write_json(summary, summary_path))
        self.stdout.write(self.style.SUCCESS(f"Отчёт {report} сохранён в {options['out']}"))

    def _max_dim(self):
        return settings.BOSONVALID['MAX_DENSE_DIM']

    def _pair(self, options):
        """Распределения (неразличимые, различимые) для заданной или первой матрицы ансамбля."""
        if options['unitary']:
            unitary = read_unitary(options['unitary'])
            if not options['dims']:
                raise InvalidParameterError("Для --unitary укажите --dims с числом фотонов")
            n_photons = _parse_dims(options['dims'])[0]
        else:
            n_photons, n_modes = _parse_dims(options['dims'])
            unitary = haar_random_unitary(n_modes, split_seed(options['seed'], 'unitary', 0))
        source = ModeOccupation.from_modes(range(n_photons), unitary.m)
        return (
            exact_distribution(unitary, source, SamplerModel.INDISTINGUISHABLE, self._max_dim()),
            exact_distribution(unitary, source, SamplerModel.DISTINGUISHABLE, self._max_dim()),
        )

    def _distributions(self, options, report):
        indist, dist = self._pair(options)
        pair = sorted_pair(indist, dist)
        if report == 'sorted':
            rows = (
                {'rank': i, 'p': float(p), 'q': float(q)}
                for i, (p, q) in enumerate(zip(pair.p_sorted, pair.q_sorted))
            )
        else:
            rows = (
                {'rank': i, 'cumulative_p': float(p), 'cumulative_q': float(q)}
                for i, (p, q) in enumerate(zip(np.cumsum(pair.p_sorted), np.cumsum(pair.q_sorted)))
            )
        self.add_artifact(write_csv(rows, options['out']))
        summary = {
            'report': report,
            'N': indist.n_photons,
            'm': indist.n_modes,
            'pearson': pair.pearson,
            'spearman': pair.spearman,
            'fractions': [
                dict(zip(('mass', 'fraction_p', 'fraction_q'), (mass, *cumulative_fraction(indist, dist, mass))))
                for mass in options['mass']
            ],
        }
        if report == 'sorted' and options['dims'] and not options['unitary'] and options['unitary_ensemble'] > 1:
            n_photons, n_modes = _parse_dims(options['dims'])
            summary['ensemble'] = correlation_ensemble(
                options['unitary_ensemble'], n_photons, n_modes, options['seed'], self._max_dim(),
            )
        return summary

    def _balls(self, options):
        n_photons, n_modes = _parse_dims(options['dims'])
        reports = [
            ball_ratio_report(
                options['unitary_ensemble'], options['top'], n_photons, n_modes, k, options['seed'], self._max_dim(),
            )
            for k in options['k']
        ]
        rows = [row for report in reports for row in report.csv_rows()]
        self.add_artifact(write_csv(rows, options['out'], ['unitary', 'unitary_seed', 'outcome', 'k', 'r_p', 'r_q']))
        for report in reports:
            self.stdout.write(
                f"k={report.k}: <R_p>={report.mean_rp:.3f}, P(R_p>1)={report.fraction_rp_above_one:.3f}, "
                f"<R_q>={report.mean_rq:.3f}, доля шара {100 * report.ball_fraction:.2f}%"
            )
        return {'report': 'ball', 'N': n_photons, 'm': n_modes, 'balls': [report.summary() for report in reports]}

    def _correlators(self, options):
        if not options['sample']:
            raise InvalidParameterError("Для отчёта corr укажите --sample")
        sample = read_sample(options['sample'])
        matrix = mode_correlators(sample)
        self.add_artifact(write_matrix_csv(matrix, options['out']))
        return {
            'report': 'corr',
            'N': sample.n_photons,
            'm': sample.n_modes,
            'events': sample.n_events,
            'trace': float(np.trace(matrix)),
            'max_asymmetry': float(np.abs(matrix - matrix.T).max()),
        }
