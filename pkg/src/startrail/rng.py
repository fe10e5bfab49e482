import hashlib
import random


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from any printable parts (independent of PYTHONHASHSEED)."""
    text = "/".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def stream(*parts) -> random.Random:
    return random.Random(derive_seed(*parts))
