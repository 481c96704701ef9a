"""Versioned ``.npz`` containers for index files."""

from __future__ import annotations

import numpy as np

FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def save_arrays(path, kind: str, **arrays) -> None:
    # Write through a file handle so numpy does not append ".npz" to the name.
    with open(path, "wb") as fh:
        np.savez(fh, __kind__=np.array(kind), __version__=np.array(FORMAT_VERSION), **arrays)


def load_arrays(path, kind: str) -> dict:
    with np.load(path, allow_pickle=False) as z:
        if "__kind__" not in z.files or str(z["__kind__"]) != kind:
            raise FormatError(f"{path}: not a {kind} file")
        version = int(z["__version__"])
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported {kind} version {version}")
        return {k: z[k] for k in z.files if not k.startswith("__")}


def check_dataset(arrays: dict, dataset) -> None:
    n, d = (int(v) for v in arrays["dataset_shape"])
    if (n, d) != (dataset.n, dataset.dim):
        raise FormatError(
            f"index was built for a dataset of shape ({n}, {d}), got ({dataset.n}, {dataset.dim})"
        )
