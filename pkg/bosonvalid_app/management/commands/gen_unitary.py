from ...files import write_unitary
from ...sampler import haar_random_unitary
from ..base import RunCommand


class Command(RunCommand):
    """Генерация унитарной матрицы по мере Хаара"""
    help = 'Генерирует случайную унитарную матрицу m x m и сохраняет её в JSON'
    command_name = 'gen_unitary'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--modes', type=int, required=True, help='Число мод m')
        parser.add_argument('--out', type=str, required=True, help='Путь к файлу матрицы')

    def run(self, options):
        unitary = haar_random_unitary(options['modes'], options['seed'])
        self.add_artifact(write_unitary(unitary, options['out']))
        self.stdout.write(
            self.style.SUCCESS(
                f"Матрица {unitary.m} x {unitary.m} сохранена в {options['out']} "
                f"(отклонение от унитарности {unitary.unitarity_error():.2e})"
            )
        )
