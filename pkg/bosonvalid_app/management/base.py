"""
Общая часть команд управления: перевод исключений в коды завершения,
манифест запуска и запись в журнал.
"""
import logging

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from ..exceptions import EXIT_INCOMPATIBLE, EXIT_OK, EXIT_USAGE, BosonValidError
from ..files import RunManifest, write_manifest
from ..run_logger import RunActivityLogger

logger = logging.getLogger('bosonvalid_app')

# Служебные параметры Django, не влияющие на результат
SERVICE_OPTIONS = {
    'verbosity', 'settings', 'pythonpath', 'traceback', 'no_color', 'force_color', 'skip_checks', 'stdout', 'stderr',
}


class RunCommand(BaseCommand):
    """Команда с манифестом запуска и кодами завершения 0/1/2/3"""
    command_name = None

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=0, help='Главное зерно запуска')

    def run(self, options):
        """Выполняет команду; возвращает код завершения (0 или 1)."""
        raise NotImplementedError

    def add_artifact(self, path):
        self.artifacts.append(str(path))
        return path

    def handle(self, *args, **options):
        parameters = {key: value for key, value in options.items() if key not in SERVICE_OPTIONS}
        master_seed = options.get('seed')
        self.artifacts = []
        try:
            exit_code = self.run(options) or EXIT_OK
        except BosonValidError as exc:
            self._fail(parameters, master_seed, exc.exit_code, str(exc))
        except serializers.ValidationError as exc:
            self._fail(parameters, master_seed, EXIT_USAGE, f"Некорректный файл: {exc.detail}")
        except OSError as exc:
            self._fail(parameters, master_seed, EXIT_USAGE, f"Ошибка файловой системы: {exc}")

        if options.get('out'):
            manifest = RunManifest(
                self.command_name, parameters, master_seed, list(self.artifacts), settings.TOOL_VERSION,
            )
            write_manifest(manifest, options['out'])
        RunActivityLogger.log_run(
            self.command_name, parameters, master_seed, self.artifacts, success=True, exit_code=exit_code,
        )
        if exit_code == EXIT_INCOMPATIBLE:
            raise CommandError("Выборки несовместимы", returncode=EXIT_INCOMPATIBLE)

    def _fail(self, parameters, master_seed, exit_code, message):
        logger.error(f"Команда {self.command_name} завершилась с ошибкой: {message}")
        RunActivityLogger.log_run(
            self.command_name, parameters, master_seed, self.artifacts,
            success=False, exit_code=exit_code, error_message=message,
        )
        raise CommandError(message, returncode=exit_code)
