"""Versioned ``.npz`` bundle for fitted models.

Layout (format_version 1): ``slr/<field>`` arrays, ``aalr/z_min``, ``aalr/z_max``,
``aalr/params`` = [a, b, epsilon], optional ``qka/theta`` and, per QSVC class
pair ``a_b``, ``qsvc/a_b/{support_indices,dual_coefs,rows,bias}``. Arrays are
stored raw, so a round trip is bit-exact.
"""
import logging
from pathlib import Path

import numpy as np

from app.core.errors import DataError
from app.learning.ksvm import BinarySvmModel, KernelKind, MulticlassSvmModel
from app.numerics.aalr import AalrScaler
from app.numerics.slr import SlrModel

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_SLR_FIELDS = ("mu_train", "w_pca", "explained_variance", "mu_lda", "w_lda", "lda_ratios")


def save_bundle(path, slr, scaler=None, theta=None, qsvc=None):
    arrays = {"format_version": np.array([FORMAT_VERSION])}
    for name in _SLR_FIELDS:
        value = getattr(slr, name)
        if value is not None:
            arrays[f"slr/{name}"] = value
    if scaler is not None:
        arrays["aalr/z_min"] = scaler.z_min
        arrays["aalr/z_max"] = scaler.z_max
        arrays["aalr/params"] = np.array([scaler.a, scaler.b, scaler.epsilon])
    if theta is not None:
        arrays["qka/theta"] = np.asarray(theta, dtype=np.float64)
    if qsvc is not None:
        arrays["qsvc/n_classes"] = np.array([qsvc.n_classes])
        for (a, b), (model, rows) in qsvc.pairs.items():
            key = f"qsvc/{a}_{b}"
            arrays[f"{key}/support_indices"] = model.support_indices
            arrays[f"{key}/dual_coefs"] = model.dual_coefs
            arrays[f"{key}/rows"] = rows
            arrays[f"{key}/bias"] = np.array([model.bias])
    path = Path(path)
    with path.open("wb") as fh:
        np.savez(fh, **arrays)
    logger.info(f"Saved model bundle ({len(arrays)} arrays) to {path}")
    return path


def load_bundle(path):
    """Return ``(slr, scaler, theta, qsvc)``; missing parts come back as ``None``."""
    with np.load(Path(path)) as data:
        arrays = {name: data[name] for name in data.files}
    version = int(arrays.get("format_version", [0])[0])
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model bundle version {version}")
    slr = SlrModel(**{name: arrays.get(f"slr/{name}") for name in _SLR_FIELDS})
    scaler = None
    if "aalr/z_min" in arrays:
        a, b, epsilon = arrays["aalr/params"].tolist()
        scaler = AalrScaler(arrays["aalr/z_min"], arrays["aalr/z_max"], a, b, epsilon)
    theta = arrays.get("qka/theta")
    qsvc = None
    if "qsvc/n_classes" in arrays:
        pairs = {}
        for name in arrays:
            if name.startswith("qsvc/") and name.endswith("/bias"):
                key = name[len("qsvc/"):-len("/bias")]
                a, b = (int(v) for v in key.split("_"))
                model = BinarySvmModel(
                    support_indices=arrays[f"qsvc/{key}/support_indices"],
                    dual_coefs=arrays[f"qsvc/{key}/dual_coefs"],
                    bias=float(arrays[name][0]),
                    kernel_kind=KernelKind.PRECOMPUTED,
                    converged=True,
                    dual_objective=float("nan"),
                    n_iter=0,
                )
                pairs[(a, b)] = (model, arrays[f"qsvc/{key}/rows"])
        qsvc = MulticlassSvmModel(int(arrays["qsvc/n_classes"][0]), KernelKind.PRECOMPUTED, dict(sorted(pairs.items())))
    return slr, scaler, theta, qsvc
