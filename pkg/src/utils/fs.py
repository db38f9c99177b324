import json
from pathlib import Path
from typing import Any, Callable, Dict, Optional, TypeVar

import aiofiles

from models import Error, Ok, Result
from utils import logger

# for json writing callbacks
J = TypeVar("J")


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n"


async def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    logger.debug(f"writing {len(text):,} chars to {path}")
    async with aiofiles.open(path, "w", encoding="utf-8", newline="\n") as f:
        await f.write(text)


async def write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    async with aiofiles.open(path, "wb") as f:
        await f.write(data)


async def write_json(path: Path, data: Any) -> None:
    await write_text(path, canonical_json(data))


async def read_json(path: Path) -> Dict[str, Any]:
    try:
        async with aiofiles.open(path, "r", encoding="utf-8") as f:
            return json.loads((await f.read()) or "{}")
    except (FileNotFoundError, json.JSONDecodeError):
        return {}


async def put_json(path: Path, key: str, callback: Callable[[Optional[J]], J]) -> Result[None, str]:
    """Read & update a JSON document using a callback."""
    logger.debug(f"updating {path}")
    try:
        try:
            async with aiofiles.open(path, "r", encoding="utf-8") as f:
                text = await f.read()
                document = json.loads(text) if text.strip() else {}
        except FileNotFoundError:
            document = {}

        document[key] = callback(document.get(key))
        await write_json(path, document)
        return Ok(None)

    except json.JSONDecodeError as e:
        return Error(f"Invalid JSON in {path}: {e}")
    except OSError as e:
        return Error(f"Unable to update {path}: {e}")
