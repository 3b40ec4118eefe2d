import hashlib
from pathlib import Path
from typing import Union

SEED_BITS = 63


def derive_seed(master: int, *keys: object) -> int:
    """
    Derives a stage seed from the master seed and a key path.

    The key path is joined with '/' and hashed together with the master seed
    (SHA-256); the first 63 bits of the digest are the stage seed. The same
    master seed and keys always give the same stage seed.

    :param master: The single user-facing seed.
    :param keys: Stage identifiers, e.g. ("split", 50, 3, "apple_rot").
    """
    path = "/".join(str(k) for k in keys)
    digest = hashlib.sha256(f"{int(master)}:{path}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> (64 - SEED_BITS)


def format_float(value: float) -> str:
    """Shortest decimal text that parses back to the identical double."""
    return repr(float(value))


def ensure_parent(path: Union[str, Path]) -> Path:
    """Creates the parent directory of path if needed and returns it as a Path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path
