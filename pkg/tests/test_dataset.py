import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biasaudit.dataset import (LABELS, EmotionLabel, GroupSelector, GroupTag, ManifestEntry,
                               filter_group, load_manifest, round_half_up, split_by_subject,
                               write_manifest)
from biasaudit.errors import (EmptyResult, MalformedLine, MissingFile, TooFewSubjects,
                              UnknownGroup, UnknownLabel)


def make_entries(n_subjects, per_subject=1, group=GroupTag.FEMALE):
    return [ManifestEntry(f"s{s}_{i}.pgm", LABELS[i % 6], group, f"s{s}")
            for s in range(n_subjects) for i in range(per_subject)]


def test_label_order_matches_matrices():
    assert [l.display for l in LABELS] == ["Angry", "Disgust", "Fear", "Happy", "Sad", "Surprise"]
    assert [int(l) for l in LABELS] == list(range(6))


def test_load_manifest_three_rows(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("# comment\n"
                 "a.pgm,Angry,female,s1\n"
                 "b.pgm,happy,Male,s2,10,20,30,21\n"
                 "\n"
                 "c.pgm,SURPRISE,female,s3\n")
    entries = load_manifest(p)
    assert len(entries) == 3
    assert entries[1].label is EmotionLabel.HAPPY
    assert entries[1].group is GroupTag.MALE
    assert entries[1].eye_landmarks == ((10.0, 20.0), (30.0, 21.0))
    assert entries[0].path == str(tmp_path / "a.pgm")


def test_load_manifest_empty(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("")
    assert load_manifest(p) == []


@pytest.mark.parametrize("line, exc", [
    ("a.pgm,Bored,female,s1", UnknownLabel),
    ("a.pgm,Angry,robot,s1", UnknownGroup),
    ("a.pgm,Angry,female", MalformedLine),
    ("a.pgm,Angry,female,,", MalformedLine),
    ("a.pgm,Angry,female,s1,30,10,10,10", MalformedLine),   # left eye right of right eye
])
def test_load_manifest_errors_name_the_line(tmp_path, line, exc):
    p = tmp_path / "m.csv"
    p.write_text("ok.pgm,Fear,male,s0\n" + line + "\n")
    with pytest.raises(exc) as info:
        load_manifest(p)
    assert info.value.line_no == 2


def test_missing_manifest(tmp_path):
    with pytest.raises(MissingFile):
        load_manifest(tmp_path / "nope.csv")


def test_manifest_round_trip(tmp_path):
    entries = make_entries(3, 2)
    entries.append(ManifestEntry("x.pgm", EmotionLabel.SAD, GroupTag.MALE, "m9", ((1.5, 2.0), (7.25, 2.5))))
    write_manifest(entries, tmp_path / "m.csv")
    assert load_manifest(tmp_path / "m.csv", resolve=False) == entries


def test_round_half_up():
    assert round_half_up(2.5) == 3
    assert round_half_up(0.8 * 101) == 81
    assert round_half_up(0.5 * 5) == 3


def test_split_ten_subjects():
    split = split_by_subject(make_entries(10), 0.8, seed=3)
    assert len(split.train_subjects) == 8
    assert len(split.test_subjects) == 2
    assert not split.train_subjects & split.test_subjects


def test_split_deterministic():
    entries = make_entries(20, 3)
    assert split_by_subject(entries, 0.8, 11) == split_by_subject(entries, 0.8, 11)


def test_split_101_subjects():
    # oracle: enumerate the round-half-up of 0.8*101 by exact integer arithmetic
    expected_train = (8 * 101 * 2 + 10) // 20
    assert expected_train == 81
    split = split_by_subject(make_entries(101), 0.8, 0)
    assert len(split.train_subjects) == 81
    assert len(split.test_subjects) == 20


def test_split_needs_two_subjects():
    with pytest.raises(TooFewSubjects):
        split_by_subject(make_entries(1, 5), 0.8, 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 15), st.integers(0, 5)), min_size=2, max_size=80),
       st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
def test_split_partition_property(rows, fraction, seed):
    entries = [ManifestEntry(f"{i}.pgm", LABELS[l], GroupTag.MALE, f"s{s}") for i, (s, l) in enumerate(rows)]
    if len({e.subject_id for e in entries}) < 2:
        return
    split = split_by_subject(entries, fraction, seed)
    assert not split.train_subjects & split.test_subjects
    assert sorted(split.train + split.test, key=lambda e: e.path) == sorted(entries, key=lambda e: e.path)
    assert split.train and split.test


def test_filter_group_counts_subjects():
    # 58 female and 43 male subjects, one image per emotion each
    entries = [ManifestEntry(f"f{s}_{l.name}.pgm", l, GroupTag.FEMALE, f"f{s}") for s in range(58) for l in LABELS]
    entries += [ManifestEntry(f"m{s}_{l.name}.pgm", l, GroupTag.MALE, f"m{s}") for s in range(43) for l in LABELS]
    females = filter_group(entries, GroupSelector.FEMALE_ONLY)
    assert len({e.subject_id for e in females}) == 58
    assert all(e.group is GroupTag.FEMALE for e in females)
    assert len({e.subject_id for e in filter_group(entries, GroupSelector.MALE_ONLY)}) == 43


def test_filter_both_is_identity():
    entries = make_entries(6, 6) + make_entries(2, 6, GroupTag.MALE)
    assert filter_group(entries, GroupSelector.BOTH) == entries


def test_filter_empty_signals():
    entries = make_entries(3, 6, GroupTag.MALE)
    with pytest.warns(EmptyResult):
        assert filter_group(entries, GroupSelector.FEMALE_ONLY) == []


@given(st.lists(st.tuples(st.sampled_from(list(GroupTag)), st.integers(0, 5)), max_size=40),
       st.sampled_from(list(GroupSelector)))
def test_filter_idempotent(rows, selector):
    entries = [ManifestEntry(f"{i}.pgm", LABELS[l], g, f"s{i}") for i, (g, l) in enumerate(rows)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyResult)
        once = filter_group(entries, selector)
        assert filter_group(once, selector) == once
        assert [e for e in entries if e in once] == once


def test_selector_parse():
    assert GroupSelector.parse("MaleOnly") is GroupSelector.MALE_ONLY
    assert GroupSelector.parse("f") is GroupSelector.FEMALE_ONLY
    with pytest.raises(ValueError):
        GroupSelector.parse("x")


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.integers(0, 1000))
def test_stratified_split_keeps_both_groups(n_female, n_male, seed):
    entries = make_entries(n_female, 2) + [
        ManifestEntry(f"m{s}.pgm", LABELS[0], GroupTag.MALE, f"m{s}") for s in range(n_male)]
    split = split_by_subject(entries, 0.8, seed, stratify=True)
    assert {e.group for e in split.test} == {GroupTag.FEMALE, GroupTag.MALE}
    assert not split.train_subjects & split.test_subjects
    female_train = {s for s in split.train_subjects if not s.startswith("m")}
    assert len(female_train) == min(max(round_half_up(0.8 * n_female), 1), n_female - 1)
