"""Step recording, dataset persistence, and training-sample construction.

The on-disk format is newline-delimited JSON ("land-dataset.v1"): a header
line followed by one record per line, observations stored as 576-character
class-digit strings and floats printed with 17 significant digits so the
round trip is lossless.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sim import Observation

DATASET_FORMAT = "land-dataset.v1"
_INF = np.iinfo(np.int64).max


class InsufficientClassError(RuntimeError):
    """A requested sample class (disengagement / engaged) has no valid starts."""


class DatasetFormatError(ValueError):
    """Malformed or wrong-version dataset file."""


@dataclass(frozen=True)
class StepRecord:
    episode_id: int
    step_index: int
    observation: Observation
    action: float
    disengaged: bool
    progress_m: float
    policy_tag: str


@dataclass(frozen=True)
class SequenceSample:
    """One H-step training sample with the absorbing-disengagement extension applied."""

    observation: Observation
    actions: np.ndarray     # (H,)
    labels: np.ndarray      # (H,) bool, monotone after the first True
    padded_from: int        # how many trailing entries were synthesized


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


class Dataset:
    """Append-only store of step records with class-balanced sequence sampling."""

    def __init__(self):
        self.records: list[StepRecord] = []
        self._last_step: dict[int, int] = {}
        self._open_episode: int | None = None
        self._index_dirty = True
        self._dist_to_d1: np.ndarray | None = None   # steps to the segment-closing d=1
        self._seg_left: np.ndarray | None = None     # records remaining in the segment
        self._actions: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.records)

    def record_step(self, record: StepRecord) -> None:
        """Append one record.  Episodes must be appended contiguously, with
        strictly increasing step_index inside each."""
        last = self._last_step.get(record.episode_id)
        if last is not None and record.step_index <= last:
            raise ValueError(
                f"step_index {record.step_index} out of order for episode "
                f"{record.episode_id} (last was {last})"
            )
        if (
            last is not None
            and self._open_episode is not None
            and record.episode_id != self._open_episode
        ):
            raise ValueError(f"episode {record.episode_id} was already closed")
        self.records.append(record)
        self._last_step[record.episode_id] = record.step_index
        self._open_episode = record.episode_id
        self._index_dirty = True

    def extend(self, records) -> None:
        for r in records:
            self.record_step(r)

    def copy(self) -> "Dataset":
        out = Dataset()
        out.records = list(self.records)
        out._last_step = dict(self._last_step)
        out._open_episode = self._open_episode
        return out

    def next_episode_id(self) -> int:
        return max(self._last_step, default=-1) + 1

    def disengagement_count(self) -> int:
        return sum(r.disengaged for r in self.records)

    # -- index over engaged segments -------------------------------------

    def _ensure_index(self) -> None:
        if not self._index_dirty:
            return
        n = len(self.records)
        dist = np.full(n, _INF, dtype=np.int64)
        seg_left = np.zeros(n, dtype=np.int64)
        start = 0
        for i, rec in enumerate(self.records):
            boundary = (
                i + 1 == n
                or rec.disengaged
                or self.records[i + 1].episode_id != rec.episode_id
            )
            if boundary:
                idx = np.arange(start, i + 1)
                seg_left[idx] = i - idx
                if rec.disengaged:
                    dist[idx] = i - idx
                start = i + 1
        self._dist_to_d1 = dist
        self._seg_left = seg_left
        self._actions = np.array([r.action for r in self.records], dtype=np.float64)
        self._index_dirty = False

    def positive_starts(self, horizon: int) -> np.ndarray:
        """Indices whose H-window overlaps a recorded disengagement."""
        self._ensure_index()
        return np.flatnonzero(self._dist_to_d1 <= horizon - 1)

    def negative_starts(self, horizon: int) -> np.ndarray:
        """Indices with a full H-window of engaged records ahead."""
        self._ensure_index()
        return np.flatnonzero(
            (self._seg_left >= horizon - 1) & (self._dist_to_d1 >= horizon)
        )

    def action_pool(self) -> np.ndarray:
        self._ensure_index()
        return self._actions

    # -- sampling ---------------------------------------------------------

    def sample_sequence(self, start_index: int, horizon: int, rng: np.random.Generator) -> SequenceSample:
        """Build the H-step sample starting at a record.

        Recorded actions and labels are used verbatim up to (not including) a
        disengagement; from the disengagement on, labels are True and actions
        are drawn uniformly from the dataset's action pool.
        """
        self._ensure_index()
        n = len(self.records)
        if not (0 <= start_index < n):
            raise IndexError(f"start_index {start_index} out of range for {n} records")
        k = self._dist_to_d1[start_index]
        if k > horizon - 1 and self._seg_left[start_index] < horizon - 1:
            raise IndexError(
                f"start_index {start_index} has neither {horizon} engaged successors "
                "nor a disengagement within reach"
            )
        actions = np.empty(horizon, dtype=np.float64)
        labels = np.zeros(horizon, dtype=bool)
        verbatim = min(int(k), horizon)
        for j in range(verbatim):
            actions[j] = self.records[start_index + j].action
        if verbatim < horizon:
            labels[verbatim:] = True
            pool = self.action_pool()
            picks = rng.integers(0, len(pool), size=horizon - verbatim)
            actions[verbatim:] = pool[picks]
        return SequenceSample(
            observation=self.records[start_index].observation,
            actions=actions,
            labels=labels,
            padded_from=horizon - verbatim,
        )

    def sample_minibatch(self, batch_size: int, horizon: int, rng: np.random.Generator) -> list[SequenceSample]:
        """Exactly half disengagement-overlapping and half disengagement-free samples."""
        if batch_size % 2 != 0:
            raise ValueError("batch_size must be even")
        pos = self.positive_starts(horizon)
        neg = self.negative_starts(horizon)
        if len(pos) == 0:
            raise InsufficientClassError("no sequence starts overlap a disengagement")
        if len(neg) == 0:
            raise InsufficientClassError("no fully-engaged sequence starts available")
        half = batch_size // 2
        starts = np.concatenate([
            pos[rng.integers(0, len(pos), size=half)],
            neg[rng.integers(0, len(neg), size=half)],
        ])
        return [self.sample_sequence(int(s), horizon, rng) for s in starts]

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        lines = [json.dumps({"format": DATASET_FORMAT}, separators=(",", ":"))]
        for r in self.records:
            lines.append(
                '{"e":%d,"i":%d,"o":"%s","a":%s,"d":%d,"p":%s,"t":%s}'
                % (
                    r.episode_id,
                    r.step_index,
                    r.observation.digits(),
                    _fmt(r.action),
                    1 if r.disengaged else 0,
                    _fmt(r.progress_m),
                    json.dumps(r.policy_tag),
                )
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")

    @classmethod
    def load(cls, path) -> "Dataset":
        text = Path(path).read_text(encoding="ascii")
        lines = text.splitlines()
        if not lines:
            raise DatasetFormatError(f"{path}: empty file")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as e:
            raise DatasetFormatError(f"{path}: line 1: bad header ({e})") from None
        if header.get("format") != DATASET_FORMAT:
            raise DatasetFormatError(
                f"{path}: line 1: expected format {DATASET_FORMAT!r}, got {header.get('format')!r}"
            )
        ds = cls()
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                rec = StepRecord(
                    episode_id=int(d["e"]),
                    step_index=int(d["i"]),
                    observation=Observation.from_digits(d["o"]),
                    action=float(d["a"]),
                    disengaged=bool(d["d"]),
                    progress_m=float(d["p"]),
                    policy_tag=str(d["t"]),
                )
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as e:
                raise DatasetFormatError(f"{path}: line {lineno}: {e}") from None
            ds.record_step(rec)
        return ds
