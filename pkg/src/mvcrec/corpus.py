"""Interaction logs, k-core filtering and leave-one-out splits."""

from __future__ import annotations

import csv
import gzip
import io
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Interaction:
    user_id: str
    item_id: str
    timestamp: int


InteractionLog = list[Interaction]


@dataclass
class Vocab:
    """Item id <-> index map. 0 is padding, ``num_items + 1`` is the mask token."""

    items: list[str]
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {item: i + 1 for i, item in enumerate(self.items)}
        if len(self.index) != len(self.items):
            raise CorpusError("duplicate item id in vocab")

    @property
    def num_items(self) -> int:
        return len(self.items)

    @property
    def pad_index(self) -> int:
        return 0

    @property
    def mask_index(self) -> int:
        return self.num_items + 1

    def item_of(self, idx: int) -> str:
        if not 1 <= idx <= self.num_items:
            raise KeyError(idx)
        return self.items[idx - 1]


@dataclass(frozen=True)
class UserSequence:
    user_index: int
    items: tuple[int, ...]


@dataclass
class DatasetSplit:
    """Per-user leave-one-out split; users are stored in index order."""

    users: list[str]
    train: list[list[int]]
    valid: list[tuple[list[int], int]]
    test: list[tuple[list[int], int]]

    def __len__(self):
        return len(self.users)

    def train_sequences(self) -> list[UserSequence]:
        return [UserSequence(u, tuple(seq)) for u, seq in enumerate(self.train)]

    def part(self, name: str) -> list[tuple[list[int], int]]:
        if name == "valid":
            return self.valid
        if name == "test":
            return self.test
        raise ValueError(f"unknown split part {name!r}")


def _open_text(path: Path):
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def load_interactions(
    path, fmt: str | None = None, header: bool = False, columns: tuple[int, int, int] = (0, 1, 2)
) -> InteractionLog:
    """Read ``user, item, timestamp`` rows from a TSV/CSV file (optionally gzipped).

    ``columns`` gives the positions of the three fields within a row. The
    result is ordered by user, then timestamp, then file order.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if fmt is None:
        stem = path.name[:-3] if path.suffix == ".gz" else path.name
        fmt = "csv" if stem.endswith(".csv") else "tsv"
    if fmt not in ("tsv", "csv"):
        raise CorpusError(f"unsupported format {fmt!r}")
    delimiter = "\t" if fmt == "tsv" else ","

    rows = []
    with _open_text(path) as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) <= max(columns):
                raise CorpusError(f"line {lineno}: expected {max(columns) + 1} columns, got {len(row)}")
            user, item, ts = (row[c].strip() for c in columns)
            if not user or not item:
                raise CorpusError(f"line {lineno}: empty user or item id")
            try:
                t = int(float(ts)) if "." in ts or "e" in ts.lower() else int(ts)
            except ValueError:
                raise CorpusError(f"line {lineno}: bad timestamp {ts!r}") from None
            if t < 0:
                raise CorpusError(f"line {lineno}: negative timestamp")
            rows.append(Interaction(user, item, t))
    if not rows:
        raise CorpusError(f"{path}: no interactions")
    # sorted() is stable, so equal (user, timestamp) keep file order
    return sorted(rows, key=lambda r: (r.user_id, r.timestamp))


def apply_k_core(log: InteractionLog, k: int = 5) -> InteractionLog:
    """Drop users and items with fewer than ``k`` interactions until nothing changes."""
    if k < 1:
        raise ValueError("k must be >= 1")
    current = list(log)
    while True:
        users = Counter(r.user_id for r in current)
        items = Counter(r.item_id for r in current)
        kept = [r for r in current if users[r.user_id] >= k and items[r.item_id] >= k]
        if len(kept) == len(current):
            break
        current = kept
    if not current:
        raise CorpusError("dataset eliminated by k-core")
    return current


def build_split(log: InteractionLog, max_len: int = 50) -> tuple[Vocab, DatasetSplit]:
    """Leave-one-out split over per-user chronological sequences.

    Each sequence is cut to its ``max_len + 1`` most recent items first, so the
    test input is the ``max_len`` items right before the test target.
    """
    if max_len < 2:
        raise ValueError("max_len must be >= 2")
    by_user: dict[str, list[Interaction]] = defaultdict(list)
    for r in log:
        by_user[r.user_id].append(r)

    short = [u for u, rows in by_user.items() if len(rows) < 3]
    if short:
        logger.warning("excluded %d users with fewer than 3 interactions", len(short))
    kept_users = sorted(u for u, rows in by_user.items() if len(rows) >= 3)
    if not kept_users:
        raise CorpusError("no user has 3 or more interactions")

    vocab = Vocab(sorted({r.item_id for u in kept_users for r in by_user[u]}))
    split = DatasetSplit(users=kept_users, train=[], valid=[], test=[])
    for u in kept_users:
        rows = sorted(by_user[u], key=lambda r: r.timestamp)
        seq = [vocab.index[r.item_id] for r in rows][-(max_len + 1):]
        train = seq[:-2]
        split.train.append(train)
        split.valid.append((list(train), seq[-2]))
        split.test.append((seq[:-1], seq[-1]))
    return vocab, split


def save_vocab(vocab: Vocab, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, item in enumerate(vocab.items, start=1):
            fh.write(f"{item}\t{i}\n")


def load_vocab(path) -> Vocab:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                item, idx = line.split("\t")
                pairs.append((int(idx), item))
            except ValueError:
                raise CorpusError(f"{path} line {lineno}: malformed vocab row") from None
    pairs.sort()
    if [i for i, _ in pairs] != list(range(1, len(pairs) + 1)):
        raise CorpusError(f"{path}: indices are not contiguous from 1")
    return Vocab([item for _, item in pairs])


def save_split(split: DatasetSplit, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, user in enumerate(split.users):
            record = {
                "user": user,
                "train": split.train[u],
                "valid": {"input": split.valid[u][0], "target": split.valid[u][1]},
                "test": {"input": split.test[u][0], "target": split.test[u][1]},
            }
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def load_split(path) -> DatasetSplit:
    split = DatasetSplit(users=[], train=[], valid=[], test=[])
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                split.users.append(rec["user"])
                split.train.append(list(rec["train"]))
                split.valid.append((list(rec["valid"]["input"]), int(rec["valid"]["target"])))
                split.test.append((list(rec["test"]["input"]), int(rec["test"]["target"])))
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise CorpusError(f"{path} line {lineno}: {exc}") from None
    if not split.users:
        raise CorpusError(f"{path}: empty split")
    return split
