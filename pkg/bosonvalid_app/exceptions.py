"""
Исключения предметной области.

Каждое исключение несёт код завершения, который команды управления
передают в CommandError: 2 - ошибка использования, 3 - нехватка
ресурсов или вырожденная кластерная структура.
"""

EXIT_OK = 0
EXIT_INCOMPATIBLE = 1
EXIT_USAGE = 2
EXIT_CAPACITY = 3


class BosonValidError(Exception):
    """Базовое исключение bosonvalid"""
    exit_code = EXIT_USAGE


class DimensionError(BosonValidError, ValueError):
    """Несогласованные размерности (N, m) или формы матриц"""


class UnsupportedStateError(BosonValidError, ValueError):
    """Состояние с коллизиями там, где допустимы только бесколлизионные"""


class InvalidParameterError(BosonValidError, ValueError):
    """Недопустимое значение параметра"""


class InsufficientDataError(BosonValidError):
    """Недостаточно событий для запрошенной операции"""


class InfeasibleClusterCountError(BosonValidError):
    """Число кластеров больше числа различных наблюдённых состояний"""


class CapacityError(BosonValidError):
    """Плотное представление распределения превышает допустимый размер"""
    exit_code = EXIT_CAPACITY


class DegenerateStructureError(BosonValidError):
    """После слияния ячеек осталось меньше трёх кластеров"""
    exit_code = EXIT_CAPACITY

    def __init__(self, message, label=None):
        self.label = label
        if label is not None:
            message = f"[{label}] {message}"
        super().__init__(message)


class HaltingFailureError(DegenerateStructureError):
    """Иерархическая кластеризация не достигла условия остановки"""


class SamplingError(BosonValidError):
    """Цепочка Монте-Карло не смогла стартовать из состояния с ненулевой вероятностью"""
    exit_code = EXIT_CAPACITY


class CoverageError(BosonValidError):
    """Событие выборки не отнесено ни к одному кластеру"""
