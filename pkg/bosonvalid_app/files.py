"""
Чтение и запись файлов: унитарные матрицы, выборки в формате
JSON-lines, отчёты JSON и CSV, манифесты запусков.

JSON пишется с сортировкой ключей и фиксированным форматированием, чтобы
повторный запуск с тем же зерном давал побайтно совпадающий файл.
"""
import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from django.utils import timezone
from rest_framework import serializers

from .clustering import ClusterStructure
from .fock import ModeOccupation
from .sampler import EventSample, UnitaryMatrix
from .serializers import (
    ClusterStructureSerializer,
    RunManifestSerializer,
    SampleHeaderSerializer,
    SampleLineSerializer,
    UnitarySerializer,
)

MANIFEST_SUFFIX = '.manifest.json'


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Тип {type(value).__name__} не сериализуется в JSON")


def _nan_to_none(value):
    """NaN и бесконечности пишутся как null: в JSON их нет."""
    if isinstance(value, dict):
        return {key: _nan_to_none(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_nan_to_none(item) for item in value]
    if isinstance(value, np.ndarray):
        return _nan_to_none(value.tolist())
    if isinstance(value, (float, np.floating)) and not math.isfinite(value):
        return None
    return value


def dumps(data):
    return json.dumps(_nan_to_none(data), sort_keys=True, ensure_ascii=False, default=_json_default,
                      allow_nan=False)


def write_json(data, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_nan_to_none(data), sort_keys=True, indent=2, ensure_ascii=False, default=_json_default,
                      allow_nan=False)
    path.write_text(text + '\n', encoding='utf-8')
    return path


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding='utf-8'))
    except json.JSONDecodeError as exc:
        raise serializers.ValidationError(f"{path}: некорректный JSON ({exc})")


def validated(serializer_class, data, path, **kwargs):
    serializer = serializer_class(data=data, **kwargs)
    if not serializer.is_valid():
        raise serializers.ValidationError({str(path): serializer.errors})
    return serializer.validated_data


def write_unitary(unitary, path):
    data = unitary.to_dict()
    data['seed'] = unitary.seed
    return write_json(data, path)


def read_unitary(path):
    data = validated(UnitarySerializer, read_json(path), path)
    unitary = UnitaryMatrix.from_dict(data)
    unitary.seed = data.get('seed')
    return unitary


def sample_header(sample):
    return {
        'N': sample.n_photons,
        'm': sample.n_modes,
        'input': sample.input_state.to_text() if sample.input_state else None,
        'model': sample.model,
        'seed': sample.seed,
        'source': sample.source,
        'metadata': sample.metadata,
    }


def write_sample(sample, path):
    """Заголовок и по одной строке {"modes": [...]} на событие, моды 1-based."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8') as handle:
        handle.write(dumps(sample_header(sample)) + '\n')
        for row in sample.modes:
            handle.write(dumps({'modes': (row + 1).tolist()}) + '\n')
    return path


def read_sample(path):
    lines = [line for line in Path(path).read_text(encoding='utf-8').splitlines() if line.strip()]
    if not lines:
        raise serializers.ValidationError(f"{path}: пустой файл выборки")
    try:
        records = [json.loads(line) for line in lines]
    except json.JSONDecodeError as exc:
        raise serializers.ValidationError(f"{path}: некорректная строка JSON ({exc})")
    header = validated(SampleHeaderSerializer, records[0], path)
    modes = []
    for number, record in enumerate(records[1:], start=2):
        line = validated(SampleLineSerializer, record, f"{path}:{number}", context={'header': header})
        modes.append([mode - 1 for mode in line['modes']])
    input_state = ModeOccupation.parse(header['input'], header['m']) if header.get('input') else None
    array = np.asarray(modes, dtype=np.int64).reshape(len(modes), header['N'])
    return EventSample(
        array, header['m'], input_state, header['model'], header.get('seed'),
        str(path), dict(header.get('metadata') or {}),
    )


def write_structure(structure, path):
    return write_json(structure.to_dict(), path)


def read_structure(path):
    return ClusterStructure.from_dict(validated(ClusterStructureSerializer, read_json(path), path))


def write_csv(rows, path, fieldnames=None):
    rows = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = fieldnames or (list(rows[0]) if rows else [])
    with path.open('w', encoding='utf-8', newline='') as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)
    return path


def write_matrix_csv(matrix, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        for row in np.asarray(matrix):
            writer.writerow([repr(float(value)) for value in row])
    return path


@dataclass
class RunManifest:
    """Всё, что нужно для точного повтора запуска"""
    command: str
    parameters: dict
    master_seed: Optional[int] = None
    artifacts: list = field(default_factory=list)
    tool_version: str = ''
    timestamp: str = field(default_factory=lambda: timezone.now().isoformat())

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(
            data['command'], dict(data['parameters']), data.get('master_seed'),
            list(data['artifacts']), data['tool_version'], data['timestamp'].isoformat(),
        )


def manifest_path(out_path):
    out_path = Path(out_path)
    return out_path.with_name(out_path.name + MANIFEST_SUFFIX)


def write_manifest(manifest, out_path):
    return write_json(manifest.to_dict(), manifest_path(out_path))


def read_manifest(path):
    return RunManifest.from_dict(validated(RunManifestSerializer, read_json(path), path))
