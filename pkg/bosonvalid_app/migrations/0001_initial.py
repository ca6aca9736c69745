# Generated by Django 4.2.7 on 2026-10-18 10:00

from django.db import migrations, models
import django.utils.timezone


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('gen_unitary', 'Генерация унитарной матрицы'), ('sample', 'Сэмплинг'), ('validate', 'Валидация'), ('experiment', 'Эксперимент'), ('analyze', 'Анализ распределений'), ('replay_run', 'Повтор запуска')], max_length=32, verbose_name='Команда')),
                ('parameters', models.JSONField(default=dict, verbose_name='Параметры')),
                ('master_seed', models.BigIntegerField(blank=True, null=True, verbose_name='Главное зерно')),
                ('artifacts', models.JSONField(default=list, verbose_name='Артефакты')),
                ('tool_version', models.CharField(max_length=20, verbose_name='Версия')),
                ('success', models.BooleanField(default=True, verbose_name='Успешно')),
                ('exit_code', models.IntegerField(default=0, verbose_name='Код завершения')),
                ('error_message', models.TextField(blank=True, verbose_name='Сообщение об ошибке')),
                ('created_at', models.DateTimeField(default=django.utils.timezone.now, verbose_name='Дата запуска')),
            ],
            options={
                'verbose_name': 'Запуск',
                'verbose_name_plural': 'Запуски',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['command', 'created_at'], name='run_command_created_idx')],
            },
        ),
    ]
