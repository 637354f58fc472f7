"""Proxy labeling, balancing, and leakage-safe splitting."""

import numpy as np
import pytest

from forumcohort.cohort import (
    CohortLabel,
    Excluded,
    HeldOutExamples,
    LabeledExample,
    SplitSpec,
    SplitUnit,
    balance,
    label_timeline,
    read_examples,
    split,
    write_examples,
    write_manifest,
)
from forumcohort.errors import EmptyClass, UsageError
from forumcohort.records import Post, UserTimeline, build_timelines

DAY = 86400
WINDOW = 183 * DAY


def post(pid, author, day, forum="anxiety", text="some text"):
    return Post(id=pid, author=author, forum=forum, created_at=day * DAY + 1, text=text)


def timeline(author, posts):
    return build_timelines(posts)[author]


def label(t, window=WINDOW):
    return label_timeline(t, "anxiety", "adhd", window)


class TestLabelTimeline:
    def test_anxiety_only_user(self):
        t = timeline("u", [post("a", "u", 0), post("b", "u", 50)])
        outcome = label(t)
        assert [ex.label for ex in outcome] == [CohortLabel.ANXIETY_ONLY] * 2

    def test_window_pass_both_posts_kept(self):
        # cutoff = day 400 - 183 = day 217; posts at days 0 and 100 survive
        t = timeline(
            "u",
            [post("a", "u", 0), post("b", "u", 100), post("c", "u", 400, forum="adhd")],
        )
        outcome = label(t)
        assert [ex.post.id for ex in outcome] == ["a", "b"]
        assert all(ex.label == CohortLabel.ANXIETY_THEN_ADHD for ex in outcome)

    def test_window_fail_excluded(self):
        # cutoff = day 217 < day 300, so nothing survives
        t = timeline("u", [post("a", "u", 300), post("c", "u", 400, forum="adhd")])
        assert label(t) == Excluded("window")

    def test_adhd_first_excluded(self):
        t = timeline("u", [post("a", "u", 20), post("c", "u", 10, forum="adhd")])
        assert label(t) == Excluded("adhd-first")

    def test_tie_timestamp_counts_as_adhd_first(self):
        anx = Post(id="a", author="u", forum="anxiety", created_at=999, text="x")
        adhd = Post(id="b", author="u", forum="adhd", created_at=999, text="y")
        assert label(timeline("u", [anx, adhd])) == Excluded("adhd-first")

    def test_out_of_scope_user(self):
        t = timeline("u", [post("a", "u", 0, forum="gardening")])
        assert label(t) == Excluded("out-of-scope")

    def test_adhd_only_user_excluded(self):
        t = timeline("u", [post("a", "u", 0, forum="adhd")])
        assert label(t) == Excluded("adhd-first")

    def test_later_anxiety_posts_discarded(self):
        t = timeline(
            "u",
            [post("a", "u", 0), post("b", "u", 250), post("c", "u", 400, forum="adhd")],
        )
        assert [ex.post.id for ex in label(t)] == ["a"]

    def test_forum_comparison_case_insensitive(self):
        t = timeline("u", [post("a", "u", 0)])
        outcome = label_timeline(t, " Anxiety ", "ADHD", WINDOW)
        assert [ex.label for ex in outcome] == [CohortLabel.ANXIETY_ONLY]

    def test_negative_window_rejected(self):
        t = timeline("u", [post("a", "u", 0)])
        with pytest.raises(UsageError):
            label_timeline(t, "anxiety", "adhd", -1)

    def test_never_reads_adhd_text(self):
        """Structural leakage guard: labeling must not touch ADHD post text."""

        class _Poison:
            def __str__(self):
                raise AssertionError("ADHD post text was read")

            def __getattr__(self, name):
                raise AssertionError("ADHD post text was read")

        adhd = Post(id="b", author="u", forum="adhd", created_at=400 * DAY, text=_Poison())
        anx = post("a", "u", 0)
        t = UserTimeline(author="u", posts=(anx, adhd))
        outcome = label(t)
        assert [ex.post.id for ex in outcome] == ["a"]

    def test_positive_examples_respect_window_property(self):
        rng = np.random.default_rng(3)
        for trial in range(200):
            n = int(rng.integers(1, 8))
            posts = []
            for i in range(n):
                forum = ["anxiety", "adhd", "other"][int(rng.integers(0, 3))]
                posts.append(post(f"p{trial}-{i}", "u", int(rng.integers(0, 1000)), forum=forum))
            t = timeline("u", posts)
            outcome = label(t, window=100 * DAY)
            if isinstance(outcome, Excluded):
                continue
            adhd_times = [p.created_at for p in t.posts if p.forum == "adhd"]
            for ex in outcome:
                assert ex.post.forum == "anxiety"
                if ex.label == CohortLabel.ANXIETY_THEN_ADHD:
                    assert ex.post.created_at + 100 * DAY <= min(adhd_times)
                else:
                    assert not adhd_times


def make_examples(n_pos, n_neg):
    out = []
    for i in range(n_pos):
        out.append(
            LabeledExample(
                post=post(f"pos{i}", f"authp{i}", i), label=CohortLabel.ANXIETY_THEN_ADHD,
                author=f"authp{i}",
            )
        )
    for i in range(n_neg):
        out.append(
            LabeledExample(
                post=post(f"neg{i}", f"authn{i}", i), label=CohortLabel.ANXIETY_ONLY,
                author=f"authn{i}",
            )
        )
    return out


class TestBalance:
    def test_downsamples_majority(self):
        balanced = balance(make_examples(100, 40), seed=0)
        pos = sum(1 for ex in balanced if ex.label == CohortLabel.ANXIETY_THEN_ADHD)
        assert pos == 40 and len(balanced) == 80

    def test_identity_on_balanced_input(self):
        examples = make_examples(40, 40)
        assert balance(examples, seed=0) == examples

    def test_deterministic_for_fixed_seed(self):
        examples = make_examples(150, 60)
        assert balance(examples, seed=9) == balance(examples, seed=9)

    def test_minority_untouched(self):
        examples = make_examples(10, 200)
        balanced = balance(examples, seed=1)
        kept_pos = [ex for ex in balanced if ex.label == CohortLabel.ANXIETY_THEN_ADHD]
        assert kept_pos == examples[:10]

    def test_empty_class_raises(self):
        with pytest.raises(EmptyClass):
            balance(make_examples(5, 0), seed=0)


class TestSplit:
    def test_by_user_authors_disjoint(self):
        examples = make_examples(30, 30)
        result = split(examples, SplitSpec(test_fraction=0.33, seed=1))
        train_authors = {ex.author for ex in result.train}
        test_authors = {ex.author for ex in result.test.examples}
        assert not (train_authors & test_authors)

    def test_by_user_keeps_user_posts_together(self):
        examples = [
            LabeledExample(post=post(f"p{i}", "same", i), label=CohortLabel.ANXIETY_ONLY, author="same")
            for i in range(20)
        ]
        result = split(examples, SplitSpec(test_fraction=0.5, seed=0))
        assert len(result.train) in (0, 20)

    def test_by_post_binomial_bound(self):
        """10,000 posts at test_fraction 0.33: |test - 3300| <= 3 sd."""
        examples = make_examples(5000, 5000)
        spec = SplitSpec(test_fraction=0.33, seed=5, unit=SplitUnit.BY_POST)
        result = split(examples, spec)
        sd = (10_000 * 0.33 * 0.67) ** 0.5
        assert abs(len(result.test) - 3300) <= 3 * sd

    def test_same_seed_same_split(self):
        examples = make_examples(50, 50)
        spec = SplitSpec(test_fraction=0.33, seed=7)
        first = split(examples, spec)
        second = split(examples, spec)
        assert first.train == second.train
        assert first.test.examples == second.test.examples

    def test_partition_preserves_everything(self):
        examples = make_examples(40, 25)
        result = split(examples, SplitSpec(test_fraction=0.4, seed=2))
        assert sorted(
            ex.post.id for ex in list(result.train) + list(result.test.examples)
        ) == sorted(ex.post.id for ex in examples)

    def test_bad_fraction_rejected(self):
        with pytest.raises(UsageError):
            SplitSpec(test_fraction=1.0, seed=0)

    def test_held_out_is_not_iterable(self):
        held = HeldOutExamples(make_examples(1, 1))
        with pytest.raises(TypeError):
            iter(held)


class TestStores:
    def test_labeled_round_trip_bit_exact(self, tmp_path):
        examples = make_examples(5, 5)
        first, second = tmp_path / "a.ndjson", tmp_path / "b.ndjson"
        write_examples(examples, first)
        write_examples(read_examples(first), second)
        assert first.read_bytes() == second.read_bytes()
        assert read_examples(first) == examples

    def test_manifest_hash_matches_file(self, tmp_path):
        import hashlib

        examples = make_examples(6, 6)
        result = split(examples, SplitSpec(test_fraction=0.33, seed=3))
        path = tmp_path / "manifest.json"
        digest = write_manifest(result, path, balanced=False)
        assert digest == hashlib.sha256(path.read_bytes()).hexdigest()
        assert f'"seed": 3' in path.read_text()
