"""Plain-text formats and synthetic data.

Every table is comma separated with the object id in the first column:

* dataset: ``id,f1,f2,...``; an optional header row is detected when none of
  its feature cells parse as numbers.
* partitions: ``id,C1,C2,...``; one partition per column, ``?`` for an
  unknown label. A first row starting with ``id`` is a header.
* seeds: ``object_id,class_label``.
* constraints: ``object_id,object_id,ML`` or ``...,CL``.
* weights: ``partition_index,alpha,beta``; unlisted partitions get 1.0, 1.0.

Writes go to a temporary file that is renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .clusterers import ALGORITHMS, ClustererConfig, EnsembleEntry, EnsembleSpec
from .consensus import ReferencePolicy, TiePolicy
from .core import (
    MISSING_TOKEN,
    Dataset,
    Partition,
    PartitionWeights,
    Provenance,
    SupervisionBundle,
    validate_supervision,
)
from .errors import (
    DuplicateId,
    EmptyColumn,
    NonNumericFeature,
    ParseError,
    RaggedRows,
)


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, payload) -> None:
    write_atomic(path, json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=False) + "\n")


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _read_rows(path) -> list[tuple[int, list[str]]]:
    """Non-blank, non-comment rows with their 1-based line numbers."""
    with open(path, newline="", encoding="utf-8") as fh:
        out = []
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if not any(cells) or cells[0].startswith("#"):
                continue
            out.append((lineno, cells))
    return out


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_dataset(path) -> Dataset:
    rows = _read_rows(path)
    if not rows:
        raise ParseError("empty dataset file", path=path)
    names = None
    first = rows[0][1]
    if len(first) > 1 and not any(_is_number(c) for c in first[1:]):
        names = first[1:]
        rows = rows[1:]
        if not rows:
            raise ParseError("dataset has a header but no rows", path=path)
    width = len(names) + 1 if names else len(rows[0][1])
    if width < 2:
        raise ParseError("need an id column and at least one feature", path=path, row=rows[0][0])
    ids, feats, seen = [], [], {}
    for lineno, cells in rows:
        if len(cells) != width:
            raise ParseError(f"expected {width} cells, found {len(cells)}", path=path, row=lineno)
        oid = cells[0]
        if oid in seen:
            raise DuplicateId(f"duplicate object id {oid!r} (first seen on row {seen[oid]})",
                              path=path, row=lineno, column=1)
        seen[oid] = lineno
        vals = []
        for col, cell in enumerate(cells[1:], start=2):
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericFeature(f"non-numeric feature {cell!r}",
                                        path=path, row=lineno, column=col) from None
            if not np.isfinite(v):
                raise NonNumericFeature(f"non-finite feature {cell!r}",
                                        path=path, row=lineno, column=col)
            vals.append(v)
        ids.append(oid)
        feats.append(vals)
    return Dataset(np.array(feats, dtype=np.float64), tuple(ids),
                   tuple(names) if names else None)


def save_dataset(path, data: Dataset) -> None:
    header = ["id", *(data.feature_names or [f"f{j + 1}" for j in range(data.d)])]
    rows = [header] + [[oid, *map(repr, row)] for oid, row in
                       zip(data.object_ids, data.features.tolist())]
    write_atomic(path, _csv_text(rows))


@dataclass(frozen=True)
class PartitionTable:
    object_ids: tuple[str, ...]
    names: tuple[str, ...]
    partitions: tuple[Partition, ...]

    def __len__(self) -> int:
        return len(self.partitions)


def read_partition_table(path) -> PartitionTable:
    rows = _read_rows(path)
    if not rows:
        raise ParseError("empty partitions file", path=path)
    names = None
    if rows[0][1][0].lower() == "id":
        names = rows[0][1][1:]
        rows = rows[1:]
        if not rows:
            raise ParseError("partitions file has a header but no rows", path=path)
    width = len(names) + 1 if names is not None else len(rows[0][1])
    if width < 2:
        raise ParseError("need an id column and at least one partition column", path=path)
    ids, seen = [], set()
    for lineno, cells in rows:
        if len(cells) != width:
            raise RaggedRows(f"expected {width} cells, found {len(cells)}", path=path, row=lineno)
        if cells[0] in seen:
            raise DuplicateId(f"duplicate object id {cells[0]!r}", path=path, row=lineno, column=1)
        seen.add(cells[0])
        ids.append(cells[0])
    if names is None:
        names = [f"C{j}" for j in range(1, width)]
    parts = []
    for j in range(1, width):
        column = [cells[j] for _, cells in rows]
        if all(t == MISSING_TOKEN for t in column):
            raise EmptyColumn(f"partition column {names[j - 1]!r} has no known label",
                              path=path, column=j + 1)
        if any(t == "" for t in column):
            line = next(ln for ln, cells in rows if cells[j] == "")
            raise ParseError("empty label cell; use '?' for unknown", path=path, row=line, column=j + 1)
        parts.append(Partition.from_tokens(column, provenance=Provenance(names[j - 1], str(j - 1))))
    return PartitionTable(tuple(ids), tuple(names), tuple(parts))


def load_partitions(path) -> list[Partition]:
    return list(read_partition_table(path).partitions)


def save_partitions(path, object_ids: Sequence[str], partitions: Sequence[Partition],
                    names: Sequence[str] | None = None) -> None:
    if names is None:
        names = [f"C{j + 1}" for j in range(len(partitions))]
    columns = [p.as_tokens() for p in partitions]
    rows = [["id", *names]]
    rows += [[oid, *(col[i] for col in columns)] for i, oid in enumerate(object_ids)]
    write_atomic(path, _csv_text(rows))


def save_labels(path, object_ids: Sequence[str], tokens: Sequence[str], name: str) -> None:
    write_atomic(path, _csv_text([["id", name], *zip(object_ids, tokens)]))


def load_weights(path, m: int) -> list[PartitionWeights]:
    weights = [PartitionWeights() for _ in range(m)]
    if path is None:
        return weights
    for lineno, cells in _read_rows(path):
        if lineno == 1 and not cells[0].lstrip("-").isdigit():
            continue  # header
        if len(cells) != 3:
            raise ParseError("expected partition_index,alpha,beta", path=path, row=lineno)
        try:
            j, alpha, beta = int(cells[0]), float(cells[1]), float(cells[2])
        except ValueError as exc:
            raise ParseError(str(exc), path=path, row=lineno) from None
        if not 0 <= j < m:
            raise ParseError(f"partition index {j} outside [0, {m})", path=path, row=lineno, column=1)
        try:
            weights[j] = PartitionWeights(alpha, beta)
        except ValueError as exc:
            raise ParseError(str(exc), path=path, row=lineno) from None
    return weights


def save_weights(path, weights: Sequence[PartitionWeights]) -> None:
    rows = [["partition_index", "alpha", "beta"]]
    rows += [[j, repr(w.alpha), repr(w.beta)] for j, w in enumerate(weights)]
    write_atomic(path, _csv_text(rows))


def load_supervision(seeds_path=None, constraints_path=None,
                     data: Dataset | None = None) -> SupervisionBundle:
    """Read seed and constraint files; validated against ``data`` when given."""
    seeds: dict[str, int] = {}
    if seeds_path is not None:
        for lineno, cells in _read_rows(seeds_path):
            if len(cells) != 2:
                raise ParseError("expected object_id,class_label", path=seeds_path, row=lineno)
            try:
                cls = int(cells[1])
            except ValueError:
                if not seeds and lineno == 1:
                    continue  # header
                raise ParseError(f"class label {cells[1]!r} is not an integer",
                                 path=seeds_path, row=lineno, column=2) from None
            if cls < 0:
                raise ParseError("class labels must be non-negative", path=seeds_path,
                                 row=lineno, column=2)
            if cells[0] in seeds and seeds[cells[0]] != cls:
                raise ParseError(f"object {cells[0]!r} seeded twice with different classes",
                                 path=seeds_path, row=lineno)
            seeds[cells[0]] = cls
    ml, cl = set(), set()
    if constraints_path is not None:
        for lineno, cells in _read_rows(constraints_path):
            if len(cells) != 3 or cells[2].upper() not in ("ML", "CL"):
                raise ParseError("expected object_id,object_id,ML|CL",
                                 path=constraints_path, row=lineno)
            (ml if cells[2].upper() == "ML" else cl).add((cells[0], cells[1]))
    bundle = SupervisionBundle(seeds, frozenset(ml), frozenset(cl))
    if data is not None:
        bundle = validate_supervision(bundle, data)
    return bundle


def save_supervision(seeds_path, constraints_path, bundle: SupervisionBundle) -> None:
    if seeds_path is not None:
        write_atomic(seeds_path, _csv_text(sorted(bundle.seeds.items())))
    if constraints_path is not None:
        rows = [[a, b, "ML"] for a, b in sorted(bundle.must_link)]
        rows += [[a, b, "CL"] for a, b in sorted(bundle.cannot_link)]
        write_atomic(constraints_path, _csv_text(rows))


def make_gaussians(n_per_cluster: int, centers, sigma: float,
                   rng_seed: int = 0) -> tuple[Dataset, Partition]:
    """Isotropic Gaussian blobs, one per center, with the generating labels."""
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if centers.shape[0] < 1:
        raise ValueError("need at least one center")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if n_per_cluster < 1:
        raise ValueError("n_per_cluster must be >= 1")
    rng = np.random.default_rng(rng_seed)
    k, d = centers.shape
    truth = np.repeat(np.arange(k), n_per_cluster)
    X = centers[truth] + sigma * rng.standard_normal((truth.size, d))
    width = len(str(truth.size))
    ids = tuple(f"g{i:0{width}d}" for i in range(truth.size))
    return Dataset(X, ids), Partition(truth, k, Provenance("truth", "", rng_seed))


@dataclass
class RunConfig:
    """A pipeline run described in JSON. Relative paths resolve against the file's folder."""

    dataset: Path
    entries: list[dict]
    seeds: Path | None = None
    constraints: Path | None = None
    truth: Path | None = None
    reference: str = "0"
    tie_policy: str = "unresolved"
    normalize: bool = False
    output_dir: Path = Path("scev-out")
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path=path, row=exc.lineno, column=exc.colno) from None
        return cls.from_dict(raw, base=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base=Path(".")) -> "RunConfig":
        base = Path(base)
        resolve = lambda p: None if p is None else (base / p)
        unknown = set(raw) - {"dataset", "entries", "seeds", "constraints", "truth",
                              "reference", "tie_policy", "normalize", "output_dir"}
        if unknown:
            raise ParseError(f"unknown run-config keys {sorted(unknown)}")
        if "dataset" not in raw or not raw.get("entries"):
            raise ParseError("run config needs 'dataset' and a non-empty 'entries' list")
        return cls(
            dataset=resolve(raw["dataset"]),
            entries=list(raw["entries"]),
            seeds=resolve(raw.get("seeds")),
            constraints=resolve(raw.get("constraints")),
            truth=resolve(raw.get("truth")),
            reference=str(raw.get("reference", "0")),
            tie_policy=str(raw.get("tie_policy", "unresolved")),
            normalize=bool(raw.get("normalize", False)),
            output_dir=resolve(raw.get("output_dir", "scev-out")),
            raw=raw,
        )

    def ensemble_spec(self) -> EnsembleSpec:
        entries = []
        for j, e in enumerate(self.entries):
            extra = set(e) - {"algorithm", "k", "max_iters", "tol", "rng_seed",
                              "alpha", "beta", "empty_cluster_policy"}
            if extra:
                raise ParseError(f"entry {j}: unknown keys {sorted(extra)}")
            if e.get("algorithm") not in ALGORITHMS:
                raise ParseError(f"entry {j}: algorithm must be one of {ALGORITHMS}")
            cfg = ClustererConfig(
                k=int(e["k"]),
                max_iters=int(e.get("max_iters", 100)),
                tol=float(e.get("tol", 1e-6)),
                rng_seed=int(e.get("rng_seed", 0)),
                empty_cluster_policy=e.get("empty_cluster_policy", "reseed-farthest"),
            )
            entries.append(EnsembleEntry(e["algorithm"], cfg, float(e.get("alpha", 1.0)),
                                         float(e.get("beta", 1.0))))
        return EnsembleSpec(tuple(entries), ReferencePolicy.parse(self.reference))

    @property
    def tie(self) -> TiePolicy:
        return TiePolicy(self.tie_policy)
