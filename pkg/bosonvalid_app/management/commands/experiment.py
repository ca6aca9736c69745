from pathlib import Path

from django.conf import settings

from ...experiments import ExperimentSpec, render_text, resolve_jobs, run_experiment
from ...files import read_json, validated, write_json
from ...serializers import ExperimentSpecSerializer
from ..base import RunCommand


class Command(RunCommand):
    """Серия испытаний по описанию эксперимента"""
    help = 'Запускает эксперимент (матрица ошибок, k-sweep, size-sweep, iteration-trace, mcmc-tvd)'
    command_name = 'experiment'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--spec', type=str, required=True, help='Файл описания эксперимента JSON')
        parser.add_argument('--out', type=str, required=True, help='Файл результата JSON')
        parser.add_argument('--jobs', type=int, default=0,
                            help='Число процессов (0 - все ядра; BOSONVALID_JOBS имеет приоритет)')

    def run(self, options):
        data = dict(validated(ExperimentSpecSerializer, read_json(options['spec']), options['spec']))
        # --seed задаёт главное зерно, если оно не указано в описании
        data.setdefault('master_seed', options['seed'])
        spec = ExperimentSpec.from_dict(data, max_dense_dim=settings.BOSONVALID['MAX_DENSE_DIM'])
        jobs = resolve_jobs(options['jobs'], settings.BOSONVALID_JOBS)

        result = run_experiment(spec, jobs)
        self.add_artifact(write_json(result, options['out']))
        text = render_text(result)
        text_path = Path(options['out']).with_suffix('.txt')
        text_path.write_text(text + '\n', encoding='utf-8')
        self.add_artifact(text_path)
        self.stdout.write(text)
        self.stdout.write(self.style.SUCCESS(f"Результат сохранён в {options['out']}"))
