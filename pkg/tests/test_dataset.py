import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disnav.dataset import Dataset, DatasetFormatError, InsufficientClassError, StepRecord
from disnav.sim import GRID_SIDE, Observation


def obs_const(v: int) -> Observation:
    return Observation(classes=np.full((GRID_SIDE, GRID_SIDE), v, dtype=np.uint8))


def make_record(episode, index, action=0.0, disengaged=False, progress=None):
    return StepRecord(
        episode_id=episode,
        step_index=index,
        observation=obs_const(index % 5),
        action=action,
        disengaged=disengaged,
        progress_m=progress if progress is not None else index * 0.5,
        policy_tag="test",
    )


def build_dataset(segments_per_episode):
    """segments_per_episode: list of lists of segment lengths; each segment of
    length L has L-1 engaged records and one disengagement record, except a
    final negative segment marked by a negative length (all engaged)."""
    ds = Dataset()
    for epi, segments in enumerate(segments_per_episode):
        idx = 0
        for seg in segments:
            n, ends_d1 = (seg, True) if seg > 0 else (-seg, False)
            for k in range(n):
                d1 = ends_d1 and k == n - 1
                ds.record_step(make_record(epi, idx, action=0.01 * idx + epi, disengaged=d1))
                idx += 1
    return ds


class TestRecordStep:
    def test_append_preserves_order(self):
        ds = Dataset()
        for i in range(3):
            ds.record_step(make_record(0, i))
        assert len(ds) == 3
        assert [r.step_index for r in ds.records] == [0, 1, 2]

    def test_duplicate_index_rejected(self):
        ds = Dataset()
        ds.record_step(make_record(0, 0))
        with pytest.raises(ValueError, match="out of order"):
            ds.record_step(make_record(0, 0))

    def test_backwards_index_rejected(self):
        ds = Dataset()
        ds.record_step(make_record(0, 5))
        with pytest.raises(ValueError, match="out of order"):
            ds.record_step(make_record(0, 3))

    def test_reopened_episode_rejected(self):
        ds = Dataset()
        ds.record_step(make_record(0, 0))
        ds.record_step(make_record(1, 0))
        with pytest.raises(ValueError, match="closed"):
            ds.record_step(make_record(0, 1))


class TestSampleSequence:
    def test_fully_engaged_window(self):
        ds = build_dataset([[-12]])
        rng = np.random.default_rng(0)
        s = ds.sample_sequence(0, 8, rng)
        assert not s.labels.any()
        assert s.padded_from == 0
        assert np.allclose(s.actions, [0.01 * i for i in range(8)])

    def test_disengagement_at_offset_two(self):
        # window starts 2 records before the segment-closing disengagement
        ds = build_dataset([[11]])
        rng = np.random.default_rng(0)
        start = 8  # records 8, 9, 10 remain; record 10 is the disengagement
        s = ds.sample_sequence(start, 8, rng)
        assert s.labels.tolist() == [False, False, True, True, True, True, True, True]
        assert s.padded_from == 6
        assert np.allclose(s.actions[:2], [0.08, 0.09])

    def test_start_at_disengagement_record(self):
        ds = build_dataset([[11]])
        s = ds.sample_sequence(10, 8, np.random.default_rng(0))
        assert s.labels.all()
        assert s.padded_from == 8

    def test_padded_actions_from_pool_reproducible(self):
        ds = build_dataset([[11]])
        pool = {r.action for r in ds.records}
        a = ds.sample_sequence(8, 8, np.random.default_rng(5))
        b = ds.sample_sequence(8, 8, np.random.default_rng(5))
        assert np.array_equal(a.actions, b.actions)
        for v in a.actions[2:]:
            assert float(v) in pool

    def test_invalid_starts_raise(self):
        ds = build_dataset([[-10]])
        with pytest.raises(IndexError):
            ds.sample_sequence(50, 8, np.random.default_rng(0))
        with pytest.raises(IndexError):
            ds.sample_sequence(5, 8, np.random.default_rng(0))  # only 4 successors, no d=1

    def test_never_reads_past_reset_boundary(self):
        # two engaged segments in one episode: [5 records + d1][8 engaged]
        ds = build_dataset([[6, -8]])
        s = ds.sample_sequence(3, 8, np.random.default_rng(1))
        # offsets 0..1 verbatim engaged, offset 2 is the disengagement
        assert s.labels.tolist() == [False, False, True, True, True, True, True, True]
        assert s.padded_from == 6
        # verbatim actions must come from before the reset only
        assert np.allclose(s.actions[:2], [0.03, 0.04])


class TestMinibatch:
    @pytest.mark.parametrize("batch", [2, 8, 64])
    def test_exact_balance(self, batch):
        ds = build_dataset([[12, -20], [15]])
        rng = np.random.default_rng(2)
        samples = ds.sample_minibatch(batch, 8, rng)
        n_pos = sum(bool(s.labels.any()) for s in samples)
        assert n_pos == batch // 2
        assert len(samples) == batch

    def test_no_disengagements_raises(self):
        ds = build_dataset([[-30]])
        with pytest.raises(InsufficientClassError):
            ds.sample_minibatch(8, 8, np.random.default_rng(0))

    def test_no_negatives_raises(self):
        ds = build_dataset([[4]])  # too short for any full engaged window
        with pytest.raises(InsufficientClassError):
            ds.sample_minibatch(8, 8, np.random.default_rng(0))

    def test_odd_batch_rejected(self):
        ds = build_dataset([[12, -20]])
        with pytest.raises(ValueError, match="even"):
            ds.sample_minibatch(7, 8, np.random.default_rng(0))

    def test_fixed_seed_reproducible(self):
        ds = build_dataset([[12, -20], [15]])
        a = ds.sample_minibatch(8, 8, np.random.default_rng(42))
        b = ds.sample_minibatch(8, 8, np.random.default_rng(42))
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.actions, sb.actions)
            assert np.array_equal(sa.labels, sb.labels)

    def test_start_classes_match_window_property(self):
        """Positive starts lie within H of a disengagement; negative starts
        have H engaged successors (checkable without building samples)."""
        ds = build_dataset([[12, -20], [15], [-9]])
        H = 8
        pos = ds.positive_starts(H)
        neg = ds.negative_starts(H)
        assert len(set(pos) & set(neg)) == 0
        for p in pos:
            dist = ds._dist_to_d1[p]
            assert dist <= H - 1
        for q in neg:
            window = ds.records[q : q + H]
            assert len(window) == H
            assert not any(r.disengaged for r in window)
            assert len({r.episode_id for r in window}) == 1


@settings(max_examples=25, deadline=None)
@given(
    seg1=st.integers(min_value=2, max_value=12),
    tail=st.integers(min_value=9, max_value=20),
    start_offset=st.integers(min_value=0, max_value=11),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_labels_absorbing_property(seg1, tail, start_offset, seed):
    """Once a label is true, every later label in the sample is true."""
    ds = build_dataset([[seg1, -tail]])
    start = min(start_offset, seg1 - 1)
    s = ds.sample_sequence(start, 8, np.random.default_rng(seed))
    lab = s.labels.astype(int)
    assert (np.diff(lab) >= 0).all()
    assert s.padded_from == int(lab.sum())


class TestPersistence:
    def test_round_trip_bit_identical(self, tmp_path):
        ds = build_dataset([[12, -20], [15]])
        p1 = tmp_path / "a.ndjson"
        p2 = tmp_path / "b.ndjson"
        ds.save(p1)
        ds2 = Dataset.load(p1)
        ds2.save(p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert len(ds2) == len(ds)
        for a, b in zip(ds.records, ds2.records):
            assert a.episode_id == b.episode_id
            assert a.step_index == b.step_index
            assert np.array_equal(a.observation.classes, b.observation.classes)
            assert a.action == b.action
            assert a.disengaged == b.disengaged
            assert a.progress_m == b.progress_m
            assert a.policy_tag == b.policy_tag

    def test_full_precision_floats(self, tmp_path):
        ds = Dataset()
        ds.record_step(make_record(0, 0, action=0.1 + 0.2, progress=1.0 / 3.0))
        p = tmp_path / "f.ndjson"
        ds.save(p)
        r = Dataset.load(p).records[0]
        assert r.action == 0.1 + 0.2
        assert r.progress_m == 1.0 / 3.0

    def test_empty_dataset_header_only(self, tmp_path):
        p = tmp_path / "empty.ndjson"
        Dataset().save(p)
        assert p.read_text().strip() == '{"format":"land-dataset.v1"}'
        assert len(Dataset.load(p)) == 0

    def test_corrupted_line_reports_number(self, tmp_path):
        ds = build_dataset([[6]])
        p = tmp_path / "bad.ndjson"
        ds.save(p)
        lines = p.read_text().splitlines()
        lines[3] = lines[3][:-5] + "oops"
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError, match="line 4"):
            Dataset.load(p)

    def test_version_mismatch(self, tmp_path):
        p = tmp_path / "v0.ndjson"
        p.write_text('{"format":"land-dataset.v0"}\n')
        with pytest.raises(DatasetFormatError, match="format"):
            Dataset.load(p)
