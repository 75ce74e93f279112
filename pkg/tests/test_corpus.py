"""Corpus ingestion, statistics, filtering, splits, and the synthetic fixtures."""

import pytest

from charcrnn.converters import (
    BROWN_CATEGORIES,
    GNEWS_CLASSES,
    GNEWS_SIZE,
    QC_LABELS,
    QC_SIZE,
    brown_records,
    motif_corpus,
    newsgroups_records,
    synthetic_brown_tree,
    synthetic_gnews_records,
    synthetic_qc_lines,
    synthetic_qc_tsv,
    trec_records,
    write_tsv,
)
from charcrnn.corpus import (
    CorpusError,
    LabeledCorpus,
    SplitPlan,
    filter_corpus,
    load_corpus,
    split,
    stats,
    stats_csv,
)


class TestLabeledCorpus:
    def test_ids_follow_first_appearance(self):
        c = LabeledCorpus.from_records([("b", "x"), ("a", "y"), ("b", "z")])
        assert c.label_index == {"b": 0, "a": 1}
        assert c.class_ids() == [0, 1, 0]
        assert c.class_count == 2
        assert len(c) == 3

    def test_subset_shares_label_index(self):
        c = LabeledCorpus.from_records([("b", "x"), ("a", "y"), ("b", "z")])
        s = c.subset([2, 0], "picked")
        assert s.records == [("b", "z"), ("b", "x")]
        assert s.label_index is c.label_index
        assert s.name == "picked"
        # a one-class subset still maps to the parent's id space
        assert s.class_ids() == [0, 0]

    def test_sparse_ids_rejected(self):
        with pytest.raises(CorpusError, match="dense"):
            LabeledCorpus(records=[("a", "x")], label_index={"a": 1})

    def test_unindexed_label_rejected(self):
        with pytest.raises(CorpusError, match="missing"):
            LabeledCorpus(records=[("a", "x"), ("b", "y")], label_index={"a": 0})

    def test_empty_label_rejected(self):
        with pytest.raises(CorpusError, match="empty label"):
            LabeledCorpus.from_records([("", "x")])


class TestLoadCorpus:
    def test_basic_tsv(self, tmp_path):
        p = tmp_path / "tiny.tsv"
        p.write_text("spam\tbuy now\n\nham\thello there\nspam\tact fast\n")
        c = load_corpus(p)
        assert c.name == "tiny"
        assert c.records == [("spam", "buy now"), ("ham", "hello there"), ("spam", "act fast")]
        assert c.label_index == {"spam": 0, "ham": 1}

    def test_crlf_tolerated(self, tmp_path):
        p = tmp_path / "dos.tsv"
        p.write_bytes(b"a\tone\r\nb\ttwo\r\n")
        assert load_corpus(p).records == [("a", "one"), ("b", "two")]

    def test_extra_tabs_stay_in_text(self, tmp_path):
        p = tmp_path / "t.tsv"
        p.write_text("a\tleft\tright\n")
        assert load_corpus(p).records == [("a", "left\tright")]

    def test_missing_tab_reports_line(self, tmp_path):
        p = tmp_path / "bad.tsv"
        p.write_text("a\tok\nno tab here\n")
        with pytest.raises(CorpusError, match=r"bad\.tsv:2: expected label<TAB>text"):
            load_corpus(p)

    def test_empty_label_reports_line(self, tmp_path):
        p = tmp_path / "bad.tsv"
        p.write_text("\ttext without label\n")
        with pytest.raises(CorpusError, match=r"bad\.tsv:1: empty label"):
            load_corpus(p)

    def test_no_records_rejected(self, tmp_path):
        p = tmp_path / "empty.tsv"
        p.write_text("\n  \n")
        with pytest.raises(CorpusError, match="no records"):
            load_corpus(p)


class TestStats:
    def test_hand_counts(self):
        c = LabeledCorpus.from_records([("a", "The cat"), ("b", "cat sat")])
        s = stats(c)
        assert s.size == 2
        assert s.vocabulary == 3  # lowercased: the, cat, sat
        assert s.total_words == 4
        assert s.mst == pytest.approx(2.0)
        assert s.classes == 2
        assert s.name == "corpus"

    def test_empty_rejected(self):
        c = LabeledCorpus(records=[], label_index={}, name="void")
        with pytest.raises(CorpusError, match="empty"):
            stats(c)

    def test_csv_line(self):
        c = LabeledCorpus.from_records([("a", "one two three")], name="demo")
        text = stats_csv([stats(c)])
        lines = text.split("\n")
        assert lines[0] == "name,size,vocabulary,total_words,mst,classes"
        assert lines[1] == "demo,1,3,3,3.0000,1"


class TestFilterCorpus:
    def test_rare_tokens_dropped(self):
        c = LabeledCorpus.from_records(
            [("a", "cat cat dog"), ("a", "Cat bird")], name="f"
        )
        out = filter_corpus(c, min_freq=3, max_len=None)
        # cat appears 3 times case-folded; dog and bird once each
        assert out.records == [("a", "cat cat"), ("a", "Cat")]
        assert out.label_index is c.label_index

    def test_truncates_before_counting(self):
        c = LabeledCorpus.from_records([("a", "x y z w"), ("a", "x q")])
        out = filter_corpus(c, min_freq=2, max_len=1)
        # truncation to 1 token leaves x twice, so only x survives
        assert out.records == [("a", "x"), ("a", "x")]

    def test_idempotent(self):
        c = LabeledCorpus.from_records(
            [("a", "aa bb aa cc"), ("b", "bb aa dd ee ff")], name="f"
        )
        once = filter_corpus(c, min_freq=2, max_len=4)
        twice = filter_corpus(once, min_freq=2, max_len=4)
        assert twice.records == once.records

    def test_identity_short_circuit(self):
        c = LabeledCorpus.from_records([("a", "anything")])
        assert filter_corpus(c, min_freq=1, max_len=None) is c

    def test_max_len_only(self):
        c = LabeledCorpus.from_records([("a", "one two three four")])
        out = filter_corpus(c, min_freq=1, max_len=2)
        assert out.records == [("a", "one two")]


class TestSplit:
    def test_counts_names_and_index(self):
        c = motif_corpus()
        train, test = split(c, SplitPlan(train_count=12, test_count=6, batch_size=4))
        assert len(train) == 12 and len(test) == 6
        assert train.name == "motif-synthetic-train"
        assert test.name == "motif-synthetic-test"
        assert train.label_index is c.label_index
        assert test.label_index is c.label_index

    def test_disjoint_and_deterministic(self):
        c = motif_corpus()
        plan = SplitPlan(train_count=10, test_count=10, batch_size=5, seed=4)
        tr1, te1 = split(c, plan)
        tr2, te2 = split(c, plan)
        assert tr1.records == tr2.records and te1.records == te2.records
        combined = sorted(tr1.records + te1.records)
        assert combined == sorted(c.records)

    def test_seed_changes_order(self):
        c = motif_corpus()
        tr0, _ = split(c, SplitPlan(train_count=10, test_count=10, batch_size=5, seed=0))
        tr1, _ = split(c, SplitPlan(train_count=10, test_count=10, batch_size=5, seed=1))
        assert tr0.records != tr1.records

    def test_plan_validation(self):
        with pytest.raises(CorpusError, match="positive"):
            SplitPlan(train_count=0, test_count=5, batch_size=1).validate()
        with pytest.raises(CorpusError, match="batch_size"):
            SplitPlan(train_count=5, test_count=5, batch_size=0).validate()
        with pytest.raises(CorpusError, match="corpus has 8"):
            SplitPlan(train_count=5, test_count=5, batch_size=1).validate(corpus_size=8)

    def test_overflow_rejected_by_split(self):
        c = motif_corpus()  # 20 records
        with pytest.raises(CorpusError):
            split(c, SplitPlan(train_count=15, test_count=10, batch_size=5))


class TestTrecReader:
    def test_parses_label_and_text(self):
        records = trec_records(["LOC:city where is it ?", "", "HUM:ind who did that ?"])
        assert records == [("LOC:city", "where is it ?"), ("HUM:ind", "who did that ?")]

    def test_label_without_colon_rejected(self):
        with pytest.raises(CorpusError, match="line 2"):
            trec_records(["LOC:city fine", "broken line"])


class TestNewsgroupsReader:
    def test_reads_group_tree(self, tmp_path):
        (tmp_path / "sci.space").mkdir()
        (tmp_path / "rec.autos").mkdir()
        (tmp_path / "sci.space" / "001").write_text("orbital mechanics")
        (tmp_path / "sci.space" / "002").write_text("launch window")
        (tmp_path / "rec.autos" / "001").write_text("engine swap")
        records = newsgroups_records(tmp_path)
        assert records == [
            ("rec.autos", "engine swap"),
            ("sci.space", "orbital mechanics"),
            ("sci.space", "launch window"),
        ]

    def test_empty_tree_rejected(self, tmp_path):
        with pytest.raises(CorpusError, match="no group"):
            newsgroups_records(tmp_path)


class TestWriteTsv:
    def test_control_characters_flattened(self, tmp_path):
        p = write_tsv([("lab", "has\ttab and\nnewline")], tmp_path / "out.tsv")
        c = load_corpus(p)
        assert c.records == [("lab", "has tab and newline")]


class TestSyntheticQuestionCorpus:
    def test_size_and_classes(self):
        lines = synthetic_qc_lines()
        assert len(lines) == QC_SIZE == 5952
        assert len(QC_LABELS) == 50
        c = LabeledCorpus.from_records(trec_records(lines), name="qc")
        assert c.class_count == 50

    def test_mean_sentence_length_near_target(self):
        c = LabeledCorpus.from_records(trec_records(synthetic_qc_lines()), name="qc")
        assert abs(stats(c).mst - 5.4) < 0.5

    def test_lines_end_with_question_mark(self):
        for line in synthetic_qc_lines()[:200]:
            assert line.endswith("?")

    def test_deterministic_per_seed(self):
        assert synthetic_qc_lines(seed=3)[:20] == synthetic_qc_lines(seed=3)[:20]
        assert synthetic_qc_lines(seed=3)[:20] != synthetic_qc_lines(seed=4)[:20]

    def test_tsv_writer_round_trip(self, tmp_path):
        path = synthetic_qc_tsv(tmp_path / "qc.tsv")
        c = load_corpus(path)
        assert len(c) == 5952
        assert c.class_count == 50


class TestSyntheticBrownTree:
    def test_fifteen_categories(self, tmp_path):
        synthetic_brown_tree(tmp_path, sentences_per_file=5, files_per_category=1)
        records = brown_records(tmp_path)
        labels = {label for label, _ in records}
        assert labels == set(BROWN_CATEGORIES.values())
        assert len(labels) == 15
        assert len(records) == 15 * 5

    def test_tags_stripped_from_text(self, tmp_path):
        synthetic_brown_tree(tmp_path, sentences_per_file=3, files_per_category=1)
        for _, text in brown_records(tmp_path):
            for token in text.split():
                assert "/" not in token


class TestSyntheticNewsCorpus:
    def test_size_classes_and_length(self):
        records = synthetic_gnews_records()
        assert len(records) == GNEWS_SIZE == 2066
        c = LabeledCorpus.from_records(records, name="gnews")
        assert c.class_count == GNEWS_CLASSES == 55
        assert abs(stats(c).mst - 24.0) < 0.5


class TestMotifCorpus:
    def test_shape_and_separability(self):
        c = motif_corpus()
        assert len(c) == 20
        assert c.class_count == 2
        for label, text in c.records:
            assert len(text) == 36
            motif = "vzqvk" if label == "motif-0" else "xjwxm"
            other = "xjwxm" if label == "motif-0" else "vzqvk"
            assert text.count(motif) == 2
            assert other not in text

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValueError):
            motif_corpus(samples=1)
