from django.db import models
from django.utils import timezone


class RunRecord(models.Model):
    """Запуск команды: параметры, зерно и записанные артефакты"""
    COMMANDS = [
        ('gen_unitary', 'Генерация унитарной матрицы'),
        ('sample', 'Сэмплинг'),
        ('validate', 'Валидация'),
        ('experiment', 'Эксперимент'),
        ('analyze', 'Анализ распределений'),
        ('replay_run', 'Повтор запуска'),
    ]

    command = models.CharField(max_length=32, choices=COMMANDS, verbose_name="Команда")
    parameters = models.JSONField(default=dict, verbose_name="Параметры")
    master_seed = models.BigIntegerField(null=True, blank=True, verbose_name="Главное зерно")
    artifacts = models.JSONField(default=list, verbose_name="Артефакты")
    tool_version = models.CharField(max_length=20, verbose_name="Версия")
    success = models.BooleanField(default=True, verbose_name="Успешно")
    exit_code = models.IntegerField(default=0, verbose_name="Код завершения")
    error_message = models.TextField(blank=True, verbose_name="Сообщение об ошибке")
    created_at = models.DateTimeField(default=timezone.now, verbose_name="Дата запуска")

    class Meta:
        verbose_name = "Запуск"
        verbose_name_plural = "Запуски"
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['command', 'created_at'], name='run_command_created_idx'),
        ]

    def __str__(self):
        status = 'ok' if self.success else f'exit {self.exit_code}'
        return f"{self.command} ({status}) at {self.created_at}"
