import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(state: int) -> int:
    z = (state + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """
    mixes `seed` with every key in order, the same inputs always give the same child seed
    """
    state = _splitmix64(int(seed) & _MASK)
    for key in keys:
        state = _splitmix64(state ^ (int(key) & _MASK))
    return state


def child_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
