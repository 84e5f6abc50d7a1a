import asyncio
import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Coroutine, Generator, TypeVar

T = TypeVar("T")


def chunks(size: int, chunk_size: int) -> Generator[slice, None, None]:
    """Yield successive slices of at most chunk_size covering range(size)."""
    for start in range(0, size, chunk_size):
        yield slice(start, min(start + chunk_size, size))


def run_coroutine(coroutine: Coroutine[Any, Any, T]) -> T:
    """
    Run a coroutine to completion from synchronous code.

    Inside a running event loop (a notebook, an async application) the coroutine gets its own loop on a helper
    thread, and the caller blocks until it is done.
    """
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        return asyncio.run(coroutine)

    with ThreadPoolExecutor(max_workers=1) as pool:
        return pool.submit(asyncio.run, coroutine).result()


def derive_seed(root: int, *path: str | int) -> int:
    """Derive a child seed from a root seed and a path of labels.

    The seed ladder is ``root -> ("component", j)``, ``root -> ("batch", j)`` and
    ``experiment seed -> (row, repeat)``. Derivation only depends on its arguments, so a
    partial rerun draws exactly what the same step of a full run drew.

    Args:
        root: The root seed.
        *path: Labels identifying the consumer of the derived seed.

    Returns:
        A 63 bit non-negative integer seed.
    """
    text = "/".join(str(part) for part in (root, *path))
    hash_object = hashlib.sha256(text.encode())

    return int.from_bytes(hash_object.digest()[:8], "big") >> 1
