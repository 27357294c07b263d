"""Sparse multi-label dataset parsing, deterministic splits and permutations.

File format, one example per line:

    lbl,lbl,...,lbl idx:val idx:val ...

The label field is comma-separated integers and may be empty (an example
with no relevant labels starts with a feature token). ``#`` begins a
comment line; blank lines are ignored. An optional ``<path>.meta`` sidecar
carries ``labels=L``, ``features=d``, ``one_based=true|false`` (feature
index base) and ``one_based_labels=true|false`` as key=value lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .core import Example, LabelSet, SparseVector


class DatasetFormatError(ValueError):
    """Malformed dataset input; carries the offending line number."""

    def __init__(self, message: str, line_no: Optional[int] = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


@dataclass(frozen=True)
class Dataset:
    examples: tuple
    L: int
    d: int
    name: str = ""
    label_vocab: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        if self.L < 1 or self.d < 1:
            raise ValueError("L and d must be >= 1")
        for ex in self.examples:
            if ex.x.dim != self.d:
                raise ValueError(f"example dim {ex.x.dim} != dataset d {self.d}")
            if ex.y.total_labels != self.L:
                raise ValueError(f"example L {ex.y.total_labels} != dataset L {self.L}")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def __getitem__(self, i: int) -> Example:
        return self.examples[i]

    def subset(self, indices, name: str = "") -> "Dataset":
        exs = tuple(self.examples[int(i)] for i in indices)
        return Dataset(exs, self.L, self.d, name or self.name, self.label_vocab)

    def max_feature_norm(self) -> float:
        return max((ex.x.norm() for ex in self.examples), default=0.0)


def _iter_lines(source) -> Iterable[str]:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        return source.splitlines()
    return (ln.decode("utf-8") if isinstance(ln, bytes) else ln for ln in source)


def parse_multilabel_sparse(
    source,
    *,
    one_based_features: bool = False,
    one_based_labels: bool = False,
    declared_L: Optional[int] = None,
    declared_d: Optional[int] = None,
    name: str = "",
) -> Dataset:
    """Parse the sparse text format into a Dataset.

    With ``declared_L`` the file's label ids (after the optional 1-based
    shift) are used as-is and must fall in [0, L). Without it, the distinct
    ids found are remapped to contiguous [0, L) through a dataset-level
    vocabulary, kept on the Dataset for reference.

    Feature indices are shifted down by one when ``one_based_features``;
    ``declared_d`` fixes the dimensionality, otherwise max index + 1 is used.
    """
    raw_rows = []  # (line_no, label_ids, feat_idx, feat_val)
    max_feat = -1
    seen_labels = set()

    for line_no, line in enumerate(_iter_lines(source), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if ":" in tokens[0]:
            label_tokens, feat_tokens = "", tokens
        else:
            label_tokens, feat_tokens = tokens[0], tokens[1:]

        labels = []
        if label_tokens:
            for tok in label_tokens.split(","):
                try:
                    lbl = int(tok)
                except ValueError:
                    raise DatasetFormatError(f"bad label token {tok!r}", line_no) from None
                if one_based_labels:
                    lbl -= 1
                if lbl < 0:
                    raise DatasetFormatError(f"negative label id {lbl}", line_no)
                labels.append(lbl)

        feats = {}
        for tok in feat_tokens:
            idx_s, _, val_s = tok.partition(":")
            if not _:
                raise DatasetFormatError(f"bad feature token {tok!r}", line_no)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise DatasetFormatError(f"bad feature token {tok!r}", line_no) from None
            if one_based_features:
                idx -= 1
            if idx < 0:
                raise DatasetFormatError(f"negative feature index {idx}", line_no)
            if declared_d is not None and idx >= declared_d:
                raise DatasetFormatError(
                    f"feature index {idx} >= declared dimension {declared_d}", line_no
                )
            if idx in feats:
                raise DatasetFormatError(f"duplicate feature index {idx}", line_no)
            feats[idx] = val
            max_feat = max(max_feat, idx)

        seen_labels.update(labels)
        raw_rows.append((line_no, labels, feats))

    if declared_L is not None:
        L = declared_L
        vocab = None
        remap = None
    else:
        if not seen_labels and not raw_rows:
            raise DatasetFormatError("empty input and no declared label count")
        if not seen_labels:
            raise DatasetFormatError("no labels seen and no declared label count")
        vocab = tuple(sorted(seen_labels))
        remap = {lbl: i for i, lbl in enumerate(vocab)}
        L = len(vocab)

    if declared_d is not None:
        d = declared_d
    elif max_feat >= 0:
        d = max_feat + 1
    else:
        raise DatasetFormatError("no features seen and no declared feature count")

    examples = []
    for line_no, labels, feats in raw_rows:
        if remap is not None:
            labels = [remap[lbl] for lbl in labels]
        else:
            bad = [lbl for lbl in labels if lbl >= L]
            if bad:
                raise DatasetFormatError(
                    f"label id {bad[0]} >= declared label count {L}", line_no
                )
        x = SparseVector.from_dict(feats, d)
        examples.append(Example(x, LabelSet.of(labels, L)))

    return Dataset(tuple(examples), L, d, name, vocab)


def serialize_multilabel_sparse(ds: Dataset) -> str:
    """Render a Dataset back to the text format (0-based, mapped ids)."""
    lines = []
    for ex in ds:
        labels = ",".join(str(i) for i in ex.y.sorted())
        feats = " ".join(f"{i}:{v!r}" for i, v in zip(ex.x.indices, ex.x.values))
        lines.append(f"{labels} {feats}".strip())
    return "\n".join(lines) + ("\n" if lines else "")


def _parse_sidecar(path: Path) -> dict:
    meta = {}
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    return meta


def load_dataset(path, *, scale_factors: Optional[np.ndarray] = None, **overrides) -> Dataset:
    """Load a dataset file, honouring a ``<path>.meta`` sidecar if present.

    Keyword overrides (``one_based_features`` etc.) win over sidecar values.
    """
    path = Path(path)
    options: dict = {"name": path.stem}
    sidecar = path.with_name(path.name + ".meta")
    if sidecar.exists():
        meta = _parse_sidecar(sidecar)
        if "labels" in meta:
            options["declared_L"] = int(meta["labels"])
        if "features" in meta:
            options["declared_d"] = int(meta["features"])
        if "one_based" in meta:
            options["one_based_features"] = meta["one_based"].lower() == "true"
        if "one_based_labels" in meta:
            options["one_based_labels"] = meta["one_based_labels"].lower() == "true"
    options.update(overrides)
    ds = parse_multilabel_sparse(path.read_text(), **options)
    if scale_factors is not None:
        ds = apply_maxabs(ds, scale_factors)
    return ds


def kfold_split(ds: Dataset, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded k-fold partition; fold sizes differ by at most one.

    Returns (train indices, validation indices) pairs whose validation
    folds tile [0, len(ds)) exactly once.
    """
    n = len(ds)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"k={k} exceeds dataset size {n}")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        val = np.sort(perm[start : start + size])
        train = np.sort(np.concatenate([perm[:start], perm[start + size :]]))
        folds.append((train, val))
        start += size
    return folds


def permute(ds: Dataset, seed: int) -> Dataset:
    """Deterministic shuffle of example order under the seed."""
    perm = np.random.default_rng(seed).permutation(len(ds))
    return ds.subset(perm)


def maxabs_factors(ds: Dataset) -> np.ndarray:
    """Per-feature max-abs over the dataset (0 where a feature never occurs)."""
    factors = np.zeros(ds.d)
    for ex in ds:
        np.maximum.at(factors, ex.x.indices, np.abs(ex.x.values))
    return factors


def apply_maxabs(ds: Dataset, factors: np.ndarray) -> Dataset:
    """Scale every feature value by 1/factor; unseen features pass through."""
    factors = np.asarray(factors, dtype=np.float64)
    if factors.shape != (ds.d,):
        raise ValueError(f"expected {ds.d} factors, got {factors.shape}")
    safe = np.where(factors > 0.0, factors, 1.0)
    examples = []
    for ex in ds:
        vals = ex.x.values / safe[ex.x.indices]
        keep = vals != 0.0
        x = SparseVector(ex.x.indices[keep], vals[keep], ds.d)
        examples.append(Example(x, ex.y))
    return Dataset(tuple(examples), ds.L, ds.d, ds.name, ds.label_vocab)
