"""Locate the public benchmark datasets used by the acceptance suite.

Set ``XREG_DATA_DIR`` to a directory holding one sub-directory per dataset::

    $XREG_DATA_DIR/bibtex/train.txt   $XREG_DATA_DIR/bibtex/test.txt
    $XREG_DATA_DIR/eurlex/train.txt   $XREG_DATA_DIR/eurlex/test.txt

Files use the extreme-classification repository text layout (header
``N D L``). ``<name>_train.txt``/``<name>_test.txt`` are accepted as well, as
is the repository's single-file BibTeX release (``Bibtex_data.txt`` with
``bibtex_trSplit.txt``/``bibtex_tstSplit.txt``; the first split is used).
"""
import os
from pathlib import Path

import numpy as np

from xreg.io import RelevanceDataset, read_dataset


class DatasetMissing(RuntimeError):
    pass


def data_root():
    root = os.environ.get("XREG_DATA_DIR")
    if not root:
        raise DatasetMissing("XREG_DATA_DIR is not set")
    return Path(root)


def _split(path):
    # repository split files are 1-based point indices, one column per split
    col = np.loadtxt(path, dtype=np.int64, ndmin=2)[:, 0]
    return col - 1


def load(name):
    """``(train, test)`` for ``name`` in {"bibtex", "eurlex"}."""
    d = data_root() / name
    for tr, te in (("train.txt", "test.txt"), (f"{name}_train.txt", f"{name}_test.txt")):
        if (d / tr).exists() and (d / te).exists():
            return read_dataset(d / tr), read_dataset(d / te)
    whole = next(iter(d.glob("*_data.txt")), None) if d.exists() else None
    trs, tss = d / f"{name}_trSplit.txt", d / f"{name}_tstSplit.txt"
    if whole is not None and trs.exists() and tss.exists():
        ds = read_dataset(whole)
        return (RelevanceDataset(ds.X[_split(trs)], ds.Y[_split(trs)]),
                RelevanceDataset(ds.X[_split(tss)], ds.Y[_split(tss)]))
    raise DatasetMissing(f"no {name} train/test files under {d}")
