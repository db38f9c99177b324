import logging
import os

logger = logging.getLogger("radargait")


def progress_enabled() -> bool:
    """tqdm bars are shown unless LOG_LEVEL asks for less than INFO"""
    level = getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO)
    return level <= logging.INFO
