"""
Django settings for bosonvalid_project project.
"""

from pathlib import Path

from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Ключ нужен Django даже без веб-интерфейса
SECRET_KEY = config('BOSONVALID_SECRET_KEY', default='bosonvalid-local-key-change-for-shared-deployments')

DEBUG = config('BOSONVALID_DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'rest_framework',
    'bosonvalid_app',
]

# Database (журнал запусков)
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': config('BOSONVALID_DB_PATH', default=str(BASE_DIR / 'db.sqlite3')),
    }
}

# Internationalization
LANGUAGE_CODE = 'ru-ru'
TIME_ZONE = 'Europe/Moscow'
USE_I18N = True
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

TOOL_VERSION = '1.0.0'

# Параллелизм экспериментов: 0 = все доступные ядра.
# Переменная окружения BOSONVALID_JOBS имеет приоритет над флагом --jobs.
BOSONVALID_JOBS = config('BOSONVALID_JOBS', default=0, cast=int)

# Параметры предметной области по умолчанию
BOSONVALID = {
    'ALPHA': config('BOSONVALID_ALPHA', default=0.05, cast=float),
    'CLUSTERS': 25,
    'MIN_CLUSTER_SIZE': 5,
    'OUTLIER_FRACTION': 0.01,
    'VOTING_TRIALS': 11,
    'MAX_ITERATIONS': 100,
    'MCMC_BURN_IN': 100,
    'MCMC_THIN': 100,
    # Радиусы пузырьковой кластеризации, подобранные на (3,13)
    'BUBBLE_RADIUS': {'L1': 4.0, 'L2': 2.0},
    'MAX_DENSE_DIM': config('BOSONVALID_MAX_DENSE_DIM', default=10_000_000, cast=int),
}

LOGS_DIR = Path(config('BOSONVALID_LOGS_DIR', default=str(BASE_DIR / 'logs')))
LOG_LEVEL = config('BOSONVALID_LOG_LEVEL', default='INFO')

# Логирование
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {message}',
            'style': '{',
        },
        'detailed': {
            'format': '{levelname} {asctime} {module} {name} {funcName} {lineno} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
        'json': {
            'format': '{asctime} | {levelname} | {module} | {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': 'WARNING',
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
        'file': {
            'level': LOG_LEVEL,
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': LOGS_DIR / 'bosonvalid.log',
            'maxBytes': 1024 * 1024 * 10,  # 10 MB
            'backupCount': 5,
            'formatter': 'detailed',
        },
        'activity_file': {
            'level': 'INFO',
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': LOGS_DIR / 'activity.log',
            'maxBytes': 1024 * 1024 * 10,  # 10 MB
            'backupCount': 10,
            'formatter': 'json',
        },
        'error_file': {
            'level': 'ERROR',
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': LOGS_DIR / 'errors.log',
            'maxBytes': 1024 * 1024 * 10,  # 10 MB
            'backupCount': 10,
            'formatter': 'detailed',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console', 'file'],
            'level': 'INFO',
            'propagate': False,
        },
        'bosonvalid_app': {
            'handlers': ['console', 'file'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'bosonvalid_app.activity': {
            'handlers': ['activity_file'],
            'level': 'INFO',
            'propagate': False,
        },
        'bosonvalid_app.errors': {
            'handlers': ['error_file', 'console'],
            'level': 'ERROR',
            'propagate': False,
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
}

# Создание директории для логов
LOGS_DIR.mkdir(parents=True, exist_ok=True)
