import json
from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from memetic.errors import DomainError, IngestError, UndefinedScoreError
from memetic.memes import (MemeStats, TweetRecord, build_corpus, extract_ngrams, ingest, ingest_text,
                           meme_score, normalize_counts, parse_timestamp, score_report, serialize,
                           tokenize)

FIXTURE = Path(__file__).resolve().parents[1] / "scenarios" / "data" / "fixture_corpus.csv"
HEADER = "tweet_id,timestamp,account_id,country,retweet_of,text\n"


def rows(*lines):
    return HEADER + "".join(line + "\n" for line in lines)


def test_tokenize():
    assert tokenize("Ebola: stay safe, wash-hands!") == ["ebola", "stay", "safe", "wash", "hands"]
    assert tokenize("ÉBOLA über_alles 2014") == ["ébola", "über", "alles", "2014"]
    assert tokenize("") == []


def test_parse_timestamp_requires_offset():
    assert parse_timestamp("2014-08-01T08:00:00Z") == parse_timestamp("2014-08-01T10:00:00+02:00")
    with pytest.raises(ValueError):
        parse_timestamp("2014-08-01T08:00:00")


def test_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    corpus = ingest(path)
    assert len(corpus) == 0 and corpus.dangling_count == 0
    assert extract_ngrams(corpus, "ebola", 2) == []


def test_dangling_retweet_is_counted():
    corpus = ingest_text(rows("a,2014-08-01T00:00:00Z,u1,,,ebola one",
                              "b,2014-08-01T01:00:00Z,u2,,a,ebola one",
                              "c,2014-08-01T02:00:00Z,u3,,zzz,ebola two"))
    assert len(corpus) == 3
    assert corpus.dangling_count == 1 and corpus.dangling == ["c"]


def test_sorted_by_timestamp():
    corpus = ingest_text(rows("b,2014-08-02T00:00:00Z,u1,,,x", "a,2014-08-01T00:00:00Z,u2,,,y"))
    assert [r.tweet_id for r in corpus.records] == ["a", "b"]


def test_fixture_hand_tally():
    corpus = ingest(FIXTURE)
    assert len(corpus) == 10 and corpus.dangling_count == 0 and corpus.row_errors == []
    assert sum(r.is_retweet for r in corpus.records) == 3
    assert len({r.account_id for r in corpus.records}) == 6
    assert corpus.countries() == {"LR": 4, "SL": 2, "GN": 2, "unknown": 2}
    assert len(corpus.filter_country("unknown")) == 2

    stats = extract_ngrams(corpus, "ebola", 2)
    top = stats[0]
    assert top.meme == ("ebola", "help")
    assert (top.n_m, top.n_corpus, top.n_rtw, top.n_tw, top.s_nrtw, top.s_tnrtw) == (4, 10, 2, 4, 2, 4)
    assert [(s.meme, s.n_m) for s in stats] == [
        (("ebola", "help"), 4), (("ebola", "cases"), 2), (("send", "ebola"), 2),
        (("ebola", "stay"), 1), (("ebola", "update"), 1), (("ebola", "vaccine"), 1)]
    cases = next(s for s in stats if s.meme == ("ebola", "cases"))
    assert (cases.n_m, cases.n_rtw, cases.s_nrtw, cases.s_tnrtw) == (2, 1, 1, 2)

    glob = extract_ngrams(corpus, "ebola", 2, baseline="global")[0]
    assert (glob.s_nrtw, glob.s_tnrtw) == (3, 6)


def test_fixture_meme_score():
    sc = meme_score(extract_ngrams(ingest(FIXTURE), "ebola", 2)[0])
    assert (sc.f_m, sc.p_m, sc.m_m) == (0.4, 1.0, 0.4)
    assert sc.display == 4000.0


def test_root_absent():
    assert extract_ngrams(ingest(FIXTURE), "cholera", 2) == []


def test_single_tweet_enumeration():
    corpus = ingest_text(rows("a,2014-08-01T00:00:00Z,u1,,,Ebola help now"))
    assert [s.meme for s in extract_ngrams(corpus, "ebola", 2)] == [("ebola", "help")]
    assert [s.meme for s in extract_ngrams(corpus, "help", 2)] == [("ebola", "help"), ("help", "now")]
    assert [s.meme for s in extract_ngrams(corpus, "ebola", 3)] == [("ebola", "help", "now")]


def test_unigram_is_root_count():
    stats = extract_ngrams(ingest(FIXTURE), "ebola", 1)
    assert len(stats) == 1
    assert stats[0].meme == ("ebola",) and stats[0].n_m == 9


def test_ngram_argument_checks():
    corpus = ingest(FIXTURE)
    for bad in [dict(root="", n=2), dict(root="two words", n=2), dict(root="ebola", n=5),
                dict(root="ebola", n=0)]:
        with pytest.raises(DomainError):
            extract_ngrams(corpus, **bad)
    with pytest.raises(DomainError):
        extract_ngrams(corpus, "ebola", 2, baseline="local")


def test_meme_score_example():
    sc = meme_score(MemeStats(("ebola", "help"), n_m=4, n_corpus=10, n_rtw=2, n_tw=4, s_nrtw=3, s_tnrtw=6))
    assert (sc.f_m, sc.p_m, sc.m_m) == (0.4, 1.0, 0.4)


def test_never_retweeted_scores_zero():
    sc = meme_score(MemeStats(("x",), n_m=3, n_corpus=10, n_rtw=0, n_tw=3, s_nrtw=3, s_tnrtw=3))
    assert sc.m_m == 0.0 and sc.p_m == 0.0


def test_undefined_score():
    st_ = MemeStats(("x",), n_m=2, n_corpus=10, n_rtw=2, n_tw=2, s_nrtw=0, s_tnrtw=2)
    with pytest.raises(UndefinedScoreError):
        meme_score(st_)
    corpus = ingest_text(rows("a,2014-08-01T00:00:00Z,u1,,,ebola now",
                              "b,2014-08-01T01:00:00Z,u2,,a,ebola now",
                              "c,2014-08-01T02:00:00Z,u1,,b,ebola now"))
    entry = score_report(corpus, "ebola", 2)["memes"][0]
    assert entry["M_m"] is None and entry["status"].startswith("undefined")


@settings(max_examples=200, deadline=None)
@given(n_corpus=st.integers(1, 500), frac=st.floats(0, 1), rtw=st.integers(0, 50),
       nrtw=st.integers(1, 50), extra=st.integers(0, 50), k=st.integers(2, 1000))
def test_score_invariant_under_duplication(n_corpus, frac, rtw, nrtw, extra, k):
    n_m = max(1, int(frac * n_corpus))
    base = MemeStats(("m",), n_m, n_corpus, rtw, n_m, nrtw, rtw + nrtw + extra)
    scaled = MemeStats(("m",), k * n_m, k * n_corpus, k * rtw, k * n_m, k * nrtw, k * (rtw + nrtw + extra))
    assert meme_score(base) == meme_score(scaled)


def _copy_corpus(corpus, tag):
    return [replace(r, tweet_id=r.tweet_id + tag, account_id=r.account_id + tag,
                    retweet_of=None if r.retweet_of is None else r.retweet_of + tag)
            for r in corpus.records]


@pytest.mark.parametrize("k", [2, 3, 7])
def test_corpus_duplication_invariance(k):
    corpus = ingest(FIXTURE)
    dup = build_corpus([r for j in range(k) for r in _copy_corpus(corpus, f"#{j}")])
    for base in ("meme", "global"):
        one = extract_ngrams(corpus, "ebola", 2, base)
        many = extract_ngrams(dup, "ebola", 2, base)
        assert [s.meme for s in one] == [s.meme for s in many]
        for a, b in zip(one, many):
            assert (b.n_m, b.n_corpus, b.n_rtw, b.s_nrtw, b.s_tnrtw) == \
                   (k * a.n_m, k * a.n_corpus, k * a.n_rtw, k * a.s_nrtw, k * a.s_tnrtw)
            if a.s_nrtw:
                assert meme_score(a) == meme_score(b)


def test_round_trip_csv_and_jsonl():
    text = FIXTURE.read_text()
    corpus = ingest_text(text)
    assert serialize(corpus, "csv") == text
    again = ingest_text(serialize(corpus, "jsonl"), "jsonl")
    assert again.records == corpus.records
    assert serialize(again, "jsonl") == serialize(corpus, "jsonl")


def test_jsonl_file(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(serialize(ingest(FIXTURE), "jsonl"))
    assert ingest(path).records == ingest(FIXTURE).records
    assert json.loads(path.read_text().splitlines()[0])["tweet_id"] == "t01"


def test_header_must_match():
    with pytest.raises(IngestError):
        ingest_text("id,timestamp,account,country,retweet_of,text\n")


def test_duplicate_ids_rejected():
    with pytest.raises(IngestError):
        ingest_text(rows("a,2014-08-01T00:00:00Z,u1,,,x", "a,2014-08-01T01:00:00Z,u2,,,y"))


def test_malformed_rows_recorded_with_line_numbers():
    good = [f"g{i},2014-08-01T00:00:{i:02d}Z,u{i},,,ebola {i}" for i in range(20)]
    bad = ["b1,not-a-time,u1,,,x", "b2,2014-08-01T00:00:00Z,,,,missing account"]
    corpus = ingest_text(rows(*(good[:10] + bad + good[10:])))
    assert len(corpus) == 20
    assert [e.line for e in corpus.row_errors] == [12, 13]


def test_too_many_malformed_rows_abort():
    good = [f"g{i},2014-08-01T00:00:{i:02d}Z,u{i},,,ebola" for i in range(9)]
    with pytest.raises(IngestError):
        ingest_text(rows(*good, "b,bad,u,,,x", "c,bad,u,,,x"))
    with pytest.raises(IngestError):
        ingest_text('{"tweet_id": "a"}\nnot json\n', "jsonl")


def test_unknown_format(tmp_path):
    with pytest.raises(IngestError):
        ingest(FIXTURE, format="xml")
    with pytest.raises(IngestError):
        serialize(ingest(FIXTURE), "xml")


def test_score_report_shape():
    rep = score_report(ingest(FIXTURE), "Ebola", 2, top=1)
    assert rep["root"] == "ebola" and rep["n"] == 2 and rep["baseline"] == "meme"
    (entry,) = rep["memes"]
    assert entry == {"tokens": ["ebola", "help"], "n_m": 4, "f_m": 0.4, "P_m": 1.0, "M_m": 0.4,
                     "display_score_1e4": 4000.0, "status": "ok"}


def test_normalization_matches_printed_fractions():
    counts = {"All": 6_582_123, "Liberia": 407_809, "Sierra Leone": 152_867, "Guinea": 61_371}
    frac = normalize_counts(counts, "All")
    assert frac["All"] == 1.0
    assert round(frac["Liberia"], 3) == 0.062
    assert round(frac["Sierra Leone"], 3) == 0.023
    assert round(frac["Guinea"], 4) == 0.0093


def test_normalization_errors():
    with pytest.raises(DomainError):
        normalize_counts({"a": 1}, "b")
    with pytest.raises(DomainError):
        normalize_counts({"a": 0, "b": 1}, "a")


def test_record_helpers():
    r = TweetRecord("x", parse_timestamp("2014-08-01T00:00:00Z"), "u", "hi")
    assert not r.is_retweet
    assert r.to_row()["timestamp"] == "2014-08-01T00:00:00Z"
