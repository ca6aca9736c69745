import hashlib
import logging
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError

from ...exceptions import EXIT_INCOMPATIBLE, InvalidParameterError
from ...files import read_manifest
from ..base import RunCommand

logger = logging.getLogger('bosonvalid_app')

REPLAYABLE = ('gen_unitary', 'sample', 'validate', 'experiment', 'analyze')


def _digest(path):
    path = Path(path)
    if not path.exists():
        return None
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Command(RunCommand):
    """Повтор запуска по манифесту"""
    help = 'Повторяет запуск команды с параметрами и зерном из манифеста'
    command_name = 'replay_run'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--manifest', type=str, required=True, help='Файл манифеста запуска')
        parser.add_argument('--check', action='store_true',
                            help='Сравнить новые артефакты с существующими побайтно')

    def run(self, options):
        manifest = read_manifest(options['manifest'])
        if manifest.command not in REPLAYABLE:
            raise InvalidParameterError(f"Команду {manifest.command!r} нельзя повторить")

        before = {path: _digest(path) for path in manifest.artifacts} if options['check'] else {}
        self.stdout.write(f"Повтор {manifest.command} (зерно {manifest.master_seed})")
        exit_code = 0
        try:
            call_command(manifest.command, stdout=self.stdout._out, stderr=self.stderr._out, **manifest.parameters)
        except CommandError as exc:
            if exc.returncode != EXIT_INCOMPATIBLE:
                raise
            exit_code = EXIT_INCOMPATIBLE
        for path in manifest.artifacts:
            self.add_artifact(path)

        if options['check']:
            mismatched = [path for path, digest in before.items() if digest is None or digest != _digest(path)]
            for path in mismatched:
                logger.warning(f"Артефакт {path} отличается от результата исходного запуска")
                self.stdout.write(self.style.ERROR(f"differs {path}"))
            if not mismatched:
                self.stdout.write(self.style.SUCCESS(f"Все артефакты совпали ({len(before)})"))
        return exit_code
