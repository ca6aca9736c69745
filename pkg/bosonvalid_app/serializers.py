"""
Проверка файловых форматов: унитарная матрица, выборка (заголовок и
строки JSON-lines), описание эксперимента, кластерная структура и
манифест запуска.
"""
from rest_framework import serializers

from .clustering import ALGORITHMS, INIT_STRATEGIES
from .experiments import EXPERIMENT_KINDS
from .fock import Metric, ModeOccupation
from .sampler import EXACT, MCMC, SamplerModel

MODEL_CHOICES = [model.value for model in SamplerModel] + [
    'indistinguishable', 'distinguishable', 'mean-field', 'mean-field-marginal', 'uniform',
]
METRIC_CHOICES = [metric.value for metric in Metric]


class UnitarySerializer(serializers.Serializer):
    m = serializers.IntegerField(min_value=1)
    re = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
    im = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
    seed = serializers.IntegerField(required=False, allow_null=True)

    def validate(self, data):
        m = data['m']
        for part in ('re', 'im'):
            rows = data[part]
            if len(rows) != m or any(len(row) != m for row in rows):
                raise serializers.ValidationError({part: f"Ожидается матрица {m} x {m}"})
        return data


class SampleHeaderSerializer(serializers.Serializer):
    N = serializers.IntegerField(min_value=1)
    m = serializers.IntegerField(min_value=1)
    input = serializers.CharField(required=False, allow_null=True)
    model = serializers.CharField()
    seed = serializers.IntegerField(required=False, allow_null=True)
    source = serializers.CharField(required=False, allow_null=True)
    metadata = serializers.DictField(required=False, default=dict)

    def validate(self, data):
        if data['N'] > data['m']:
            raise serializers.ValidationError("Требуется N <= m")
        if data.get('input'):
            try:
                state = ModeOccupation.parse(data['input'], data['m'])
            except ValueError as exc:
                raise serializers.ValidationError({'input': str(exc)})
            if state.n_photons != data['N'] or not state.is_collision_free:
                raise serializers.ValidationError({'input': "Входное состояние не согласовано с N"})
        return data


class SampleLineSerializer(serializers.Serializer):
    modes = serializers.ListField(child=serializers.IntegerField(min_value=1))

    def validate_modes(self, value):
        header = self.context.get('header')
        if header:
            if len(value) != header['N']:
                raise serializers.ValidationError(f"Ожидается {header['N']} мод, получено {len(value)}")
            if max(value) > header['m']:
                raise serializers.ValidationError(f"Мода вне диапазона 1..{header['m']}")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise serializers.ValidationError("Моды события должны строго возрастать")
        return value


class ExperimentSpecSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=EXPERIMENT_KINDS, default=EXPERIMENT_KINDS[0])
    models = serializers.ListField(
        child=serializers.ChoiceField(choices=MODEL_CHOICES), min_length=2, max_length=2, required=False,
    )
    N = serializers.IntegerField(min_value=1)
    m = serializers.IntegerField(min_value=1)
    input = serializers.CharField(required=False, allow_null=True)
    sample_size = serializers.IntegerField(min_value=1, required=False)
    trials = serializers.IntegerField(min_value=1, required=False)
    unitaries = serializers.IntegerField(min_value=1, required=False)
    method = serializers.ChoiceField(choices=[EXACT, MCMC], required=False)
    algorithm = serializers.ChoiceField(choices=ALGORITHMS, required=False)
    k = serializers.IntegerField(min_value=3, required=False)
    radius = serializers.FloatField(min_value=0, required=False, allow_null=True)
    metric = serializers.ChoiceField(choices=METRIC_CHOICES, required=False)
    init = serializers.ChoiceField(choices=INIT_STRATEGIES, required=False)
    voting_trials = serializers.IntegerField(min_value=1, required=False)
    outlier_fraction = serializers.FloatField(min_value=0, max_value=1, required=False)
    min_cluster_size = serializers.IntegerField(min_value=5, required=False)
    max_iter = serializers.IntegerField(min_value=1, required=False)
    alpha = serializers.FloatField(min_value=0, max_value=1, required=False)
    master_seed = serializers.IntegerField(min_value=0, required=False)
    k_values = serializers.ListField(child=serializers.IntegerField(min_value=3), required=False)
    sizes = serializers.ListField(child=serializers.IntegerField(min_value=1), required=False)
    reshuffle = serializers.BooleanField(required=False)
    pool_size = serializers.IntegerField(min_value=0, required=False)
    scattershot = serializers.BooleanField(required=False)
    swap = serializers.BooleanField(required=False)
    n_inits = serializers.IntegerField(min_value=1, required=False)
    burn_in = serializers.IntegerField(min_value=0, required=False)
    thin = serializers.IntegerField(min_value=1, required=False)
    mcmc_events = serializers.IntegerField(min_value=1, required=False, allow_null=True)

    def validate(self, data):
        if data['N'] > data['m']:
            raise serializers.ValidationError("Требуется N <= m")
        if data.get('voting_trials', 1) % 2 == 0:
            raise serializers.ValidationError({'voting_trials': "Число голосований должно быть нечётным"})
        if data.get('scattershot') and data['m'] < 13:
            raise serializers.ValidationError({'scattershot': "Сцаттершот-входы определены для m >= 13"})
        return data


class ClusterStructureSerializer(serializers.Serializer):
    metric = serializers.ChoiceField(choices=METRIC_CHOICES)
    centroids = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=1), min_length=1,
    )
    counts = serializers.ListField(child=serializers.IntegerField(min_value=0), required=False)
    assignments = serializers.ListField(child=serializers.IntegerField(min_value=-1), required=False)
    outliers = serializers.ListField(child=serializers.IntegerField(min_value=0), required=False)
    provenance = serializers.DictField(required=False)

    def validate_centroids(self, value):
        if len({len(row) for row in value}) != 1:
            raise serializers.ValidationError("Все центроиды должны иметь одинаковую длину")
        return value


class RunManifestSerializer(serializers.Serializer):
    command = serializers.CharField()
    parameters = serializers.DictField()
    master_seed = serializers.IntegerField(required=False, allow_null=True)
    artifacts = serializers.ListField(child=serializers.CharField())
    tool_version = serializers.CharField()
    timestamp = serializers.DateTimeField()
