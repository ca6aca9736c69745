"""
Разделение главного зерна на зёрна испытаний.

seed_trial = hash(master, key_1, ..., key_n): первые 8 байт SHA-256
от строки "master:key_1:...:key_n", усечённые до 63 бит. Правило не
зависит от процесса и от числа параллельных задач.
"""
import hashlib

import numpy as np

SEED_MASK = (1 << 63) - 1


def split_seed(master, *keys):
    payload = ':'.join(str(part) for part in (master, *keys)).encode('utf-8')
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], 'big') & SEED_MASK


def make_rng(seed):
    return np.random.default_rng(int(seed) & SEED_MASK)
