from django.conf import settings

from ...exceptions import InvalidParameterError
from ...files import read_unitary, write_sample
from ...fock import ModeOccupation
from ...sampler import EXACT, MCMC, SamplerModel, draw_sample
from ..base import RunCommand


class Command(RunCommand):
    """Выборка выходных событий интерферометра"""
    help = 'Сэмплирует события заданной модели и сохраняет выборку в формате JSON-lines'
    command_name = 'sample'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--unitary', type=str, required=True, help='Файл унитарной матрицы')
        parser.add_argument('--input', type=str, help='Входное состояние, например "6,7,8" (по умолчанию 1..N)')
        parser.add_argument('--photons', type=int, help='Число фотонов N, если --input не задан')
        parser.add_argument(
            '--model',
            choices=[model.value for model in SamplerModel],
            default=SamplerModel.INDISTINGUISHABLE.value,
            help='Модель: ind, dis, mf или unif',
        )
        parser.add_argument('--method', choices=[EXACT, MCMC], default=EXACT, help='Точный сэмплинг или MCMC')
        parser.add_argument('--events', type=int, required=True, help='Число событий')
        parser.add_argument('--burn-in', type=int, default=settings.BOSONVALID['MCMC_BURN_IN'])
        parser.add_argument('--thin', type=int, default=settings.BOSONVALID['MCMC_THIN'])
        parser.add_argument('--out', type=str, required=True, help='Путь к файлу выборки')

    def run(self, options):
        unitary = read_unitary(options['unitary'])
        if options['input']:
            source = ModeOccupation.parse(options['input'], unitary.m)
        elif options['photons']:
            source = ModeOccupation.from_modes(range(options['photons']), unitary.m)
        else:
            raise InvalidParameterError("Укажите --input или --photons")
        if options['events'] < 0:
            raise InvalidParameterError(f"Число событий должно быть неотрицательным, получено {options['events']}")

        sample = draw_sample(
            unitary, source, options['model'], options['events'], options['seed'], options['method'],
            burn_in=options['burn_in'], thin=options['thin'],
            max_dim=settings.BOSONVALID['MAX_DENSE_DIM'],
        )
        self.add_artifact(write_sample(sample, options['out']))
        self.stdout.write(
            self.style.SUCCESS(f"{sample.n_events} событий ({sample.model}) сохранено в {options['out']}")
        )
