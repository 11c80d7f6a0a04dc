import os
import hashlib
import numpy as np
from .errors import ArgumentError


def md5(data: str) -> str:
    return hashlib.md5(data.encode()).hexdigest()


def sub_seed(seed, name):
    ''' derive a named sub-stream seed sequence from the master seed '''
    if isinstance(seed, np.random.SeedSequence):
        entropy = seed.entropy
        key = tuple(seed.spawn_key)
    else:
        entropy = int(seed)
        key = ()
    return np.random.SeedSequence(entropy, spawn_key=key + (int(md5(name)[:8], 16), ))


def derive_seed(seed, name):
    ''' 32-bit integer seed of a named sub-stream, for APIs that take an int '''
    return int(sub_seed(seed, name).generate_state(1)[0])


def make_rng(seed, name=None):
    ''' numpy Generator from an int seed, a SeedSequence or an existing Generator '''
    if isinstance(seed, np.random.Generator):
        return seed
    if name is not None:
        return np.random.default_rng(sub_seed(seed, name))
    return np.random.default_rng(seed)


def iter_chunks(total, size):
    ''' fixed-size slices over range(total), in order '''
    if size < 1:
        raise ArgumentError(f'chunk size must be positive, got {size}')
    for start in range(0, total, size):
        yield slice(start, min(start + size, total))


def as_matrix(points, name='points'):
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ArgumentError(f'{name} must be a non-empty (m, d) array, got shape {arr.shape}')
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f'{name} contains non-finite values')
    return arr


def frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def ensure_directory(path):
    os.makedirs(path, exist_ok=True)
    return path
