"""
Журнал запусков команд: строка JSON в activity.log и запись RunRecord
в базе данных.
"""
import json
import logging
import traceback

from django.conf import settings
from django.utils import timezone

from .files import dumps

activity_logger = logging.getLogger('bosonvalid_app.activity')
error_logger = logging.getLogger('bosonvalid_app.errors')
logger = logging.getLogger('bosonvalid_app')


class RunActivityLogger:
    """Логгер запусков команд управления"""

    @classmethod
    def log_run(cls, command, parameters, master_seed=None, artifacts=None,
                success=True, exit_code=0, error_message=None):
        """
        Логирование запуска команды

        Args:
            command: Имя команды (sample, validate, experiment и т.д.)
            parameters: Разобранные параметры командной строки
            master_seed: Главное зерно запуска
            artifacts: Пути записанных файлов
            success: Успешность запуска
            exit_code: Код завершения
            error_message: Сообщение об ошибке (если есть)
        """
        try:
            log_data = {
                'command': command,
                'parameters': json.loads(dumps(parameters)),
                'master_seed': master_seed,
                'artifacts': [str(path) for path in artifacts or []],
                'tool_version': settings.TOOL_VERSION,
                'success': success,
                'exit_code': exit_code,
                'timestamp': timezone.now().isoformat(),
            }
            if error_message:
                log_data['error_message'] = error_message

            activity_logger.info(json.dumps(log_data, ensure_ascii=False))

            if not success:
                error_logger.error(f"ОШИБКА: команда '{command}' завершилась с кодом {exit_code}: {error_message}")

            cls._log_to_database(log_data)
        except Exception as e:
            logger.error(f"Ошибка при логировании запуска: {str(e)}\n{traceback.format_exc()}")

    @staticmethod
    def _log_to_database(log_data):
        """Сохранение запуска в базу данных"""
        from .models import RunRecord

        try:
            RunRecord.objects.create(
                command=log_data['command'],
                parameters=log_data['parameters'],
                master_seed=log_data['master_seed'],
                artifacts=log_data['artifacts'],
                tool_version=log_data['tool_version'],
                success=log_data['success'],
                exit_code=log_data['exit_code'],
                error_message=log_data.get('error_message', ''),
            )
        except Exception as e:
            # Если таблица не создана, просто пропускаем
            logger.debug(f"Не удалось сохранить запуск в БД (возможно, миграции не применены): {str(e)}")
