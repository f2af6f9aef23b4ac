import hashlib
import logging
import re

import numpy as np

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"


def setup_logging(level="INFO"):
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO), format=LOG_FORMAT)


def slugify(text):
    text = text.lower()
    text = re.sub(r'[^a-z0-9]+', '-', text)
    return text.strip('-')


def fingerprint(*arrays):
    """Short sha256 over the dtype, shape and raw bytes of each array."""
    digest = hashlib.sha256()
    for arr in arrays:
        if arr is None:
            digest.update(b"none")
            continue
        arr = np.ascontiguousarray(arr)
        digest.update(str(arr.dtype).encode())
        digest.update(str(arr.shape).encode())
        digest.update(arr.tobytes())
    return digest.hexdigest()[:16]


def format_float(value):
    # 17 significant digits round-trips every float64
    return f"{value:.16e}"
