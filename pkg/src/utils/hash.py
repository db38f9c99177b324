import hashlib
from typing import Literal


def calculate_hash(data: bytes, algo: Literal["sha1", "md5"] = "sha1") -> str:
    hash_func = getattr(hashlib, algo)()
    hash_func.update(data)
    return hash_func.hexdigest()


def stable_key(text: str) -> int:
    """64-bit integer key of a string, independent of PYTHONHASHSEED"""
    return int(calculate_hash(text.encode("utf-8"), "sha1")[:16], 16)
