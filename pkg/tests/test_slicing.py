"""Slice labeling semantics: membership vectors, stats, config serialization."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sliceroute.errors import ConfigError
from sliceroute.slicing import BASE_SLICE, SliceConfig, assign_slices, slice_index, slice_stats

from conftest import make_sample

BOOKSTORE = SliceConfig(["Buy Item", "Select Music", "Buy Book"])


def intent_sample(intent: str, sample_id: str = "q0"):
    return make_sample(sample_id=sample_id, intents=(intent, "intent_03"), g=0)


class TestSliceConfig:
    def test_k_counts_base_slice(self):
        assert BOOKSTORE.k == 4
        assert SliceConfig([]).k == 1

    def test_slice_names_start_with_base(self):
        assert BOOKSTORE.slice_names() == ["base", "Buy Item", "Select Music", "Buy Book"]

    def test_duplicate_intents_rejected(self):
        with pytest.raises(ConfigError):
            SliceConfig(["Buy Book", "Buy Book"])

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "slices.txt"
        BOOKSTORE.write(path)
        assert SliceConfig.read(path) == BOOKSTORE

    def test_read_skips_blank_lines(self, tmp_path):
        path = tmp_path / "slices.txt"
        path.write_text("Buy Item\n\n  \nBuy Book\n", encoding="utf-8")
        assert SliceConfig.read(path).monitored_intents == ("Buy Item", "Buy Book")

    def test_order_defines_slice_ids(self):
        flipped = SliceConfig(["Buy Book", "Buy Item", "Select Music"])
        assert slice_index(intent_sample("Buy Book"), flipped) == 1
        assert slice_index(intent_sample("Buy Book"), BOOKSTORE) == 3


class TestAssignSlices:
    def test_monitored_intent_sets_single_tail_entry(self):
        gamma = assign_slices(intent_sample("Buy Book"), BOOKSTORE)
        assert gamma.tolist() == [0.0, 0.0, 0.0, 1.0]

    def test_unmonitored_intent_falls_into_base(self):
        gamma = assign_slices(intent_sample("Play Music"), BOOKSTORE)
        assert gamma.tolist() == [1.0, 0.0, 0.0, 0.0]

    def test_no_monitored_intents_gives_base_only(self):
        gamma = assign_slices(intent_sample("anything"), SliceConfig([]))
        assert gamma.tolist() == [1.0]

    def test_match_is_case_sensitive(self):
        gamma = assign_slices(intent_sample("buy book"), BOOKSTORE)
        assert gamma[BASE_SLICE] == 1.0 and gamma.sum() == 1.0

    def test_covering_base_marks_every_sample(self):
        covering = SliceConfig(BOOKSTORE.monitored_intents, covering_base=True)
        gamma = assign_slices(intent_sample("Buy Book"), covering)
        assert gamma.tolist() == [1.0, 0.0, 0.0, 1.0]

    def test_pure_function(self):
        s = intent_sample("Select Music")
        a, b = assign_slices(s, BOOKSTORE), assign_slices(s, BOOKSTORE)
        assert np.array_equal(a, b)

    def test_labels_match_slice_index(self):
        for intent in ("Buy Item", "Select Music", "Buy Book", "other"):
            s = intent_sample(intent)
            gamma = assign_slices(s, BOOKSTORE)
            assert gamma[slice_index(s, BOOKSTORE)] == 1.0

    @given(st.lists(st.integers(min_value=0, max_value=9), min_size=1, max_size=30))
    def test_exactly_one_hot(self, intent_ids):
        config = SliceConfig([f"i{j}" for j in range(4)])
        for n, idx in enumerate(intent_ids):
            gamma = assign_slices(intent_sample(f"i{idx}", sample_id=f"q{n}"), config)
            assert gamma.sum() == 1.0
            assert set(np.unique(gamma)) <= {0.0, 1.0}


class TestSliceStats:
    def test_all_base(self):
        dataset = [intent_sample("other", f"q{i}") for i in range(10)]
        stats = slice_stats(dataset, BOOKSTORE)
        assert stats.counts == [10, 0, 0, 0]
        assert stats.total == 10 and not stats.empty_dataset

    def test_hand_counted(self):
        dataset = [intent_sample(i, f"q{n}") for n, i in enumerate(["A", "A", "B", "C"])]
        stats = slice_stats(dataset, SliceConfig(["B"]))
        assert stats.counts == [3, 1]
        assert stats.fractions == [0.75, 0.25]

    def test_empty_dataset_flagged(self):
        stats = slice_stats([], BOOKSTORE)
        assert stats.empty_dataset
        assert stats.counts == [0, 0, 0, 0] and stats.total == 0

    @given(st.lists(st.sampled_from(["A", "B", "C", "D", "E"]), max_size=40))
    def test_counts_partition_dataset(self, intents):
        dataset = [intent_sample(i, f"q{n}") for n, i in enumerate(intents)]
        config = SliceConfig(["B", "D"])
        stats = slice_stats(dataset, config)
        assert sum(stats.counts) == len(dataset)
        if dataset:
            assert abs(sum(stats.fractions) - 1.0) < 1e-12
        gamma_sum = sum(assign_slices(s, config) for s in dataset)
        if dataset:
            assert np.array_equal(gamma_sum, np.array(stats.counts, dtype=float))
