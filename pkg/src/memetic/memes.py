"""
Tweet corpora, root-anchored n-gram memes and the meme score.

The score of a meme is its frequency times its propagation weight::

    M = (N_m / N) * ((n_rtw / n_tw) / (s_nrtw / s_tnrtw))

Account statistics follow one fixed counting contract. An account
*received* a meme if any record it authored contains it, or if it
retweeted a tweet that contains it. ``n_rtw`` is the number of accounts
with at least one retweet containing the meme, ``s_tnrtw`` the number of
accounts that received it and ``s_nrtw = s_tnrtw - n_rtw``. With
``baseline="global"`` the last two are taken over the whole corpus
instead: all accounts, and accounts that never retweet anything.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Optional, Sequence

from .errors import DomainError, IngestError, UndefinedScoreError

log = logging.getLogger(__name__)

CSV_FIELDS = ("tweet_id", "timestamp", "account_id", "country", "retweet_of", "text")
UNKNOWN_COUNTRY = "unknown"
DISPLAY_SCALE = 1e4
MAX_MALFORMED_FRACTION = 0.10

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lower-cased runs of Unicode letters and digits."""
    return _TOKEN.findall(text.lower())


def parse_timestamp(value: str) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime."""
    value = value.strip()
    if value.endswith(("Z", "z")):
        value = value[:-1] + "+00:00"
    ts = datetime.fromisoformat(value)
    if ts.tzinfo is None:
        raise ValueError("timestamp has no UTC offset")
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    text = ts.astimezone(timezone.utc).isoformat()
    return text.replace("+00:00", "Z")


@dataclass(frozen=True)
class TweetRecord:
    tweet_id: str
    timestamp: datetime
    account_id: str
    text: str
    retweet_of: Optional[str] = None
    country: Optional[str] = None

    @property
    def is_retweet(self) -> bool:
        return self.retweet_of is not None

    def to_row(self) -> dict[str, str]:
        return {
            "tweet_id": self.tweet_id,
            "timestamp": format_timestamp(self.timestamp),
            "account_id": self.account_id,
            "country": self.country or "",
            "retweet_of": self.retweet_of or "",
            "text": self.text,
        }


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass
class Corpus:
    records: list[TweetRecord] = field(default_factory=list)
    dangling: list[str] = field(default_factory=list)
    row_errors: list[RowError] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def dangling_count(self) -> int:
        return len(self.dangling)

    def by_id(self) -> dict[str, TweetRecord]:
        return {r.tweet_id: r for r in self.records}

    def countries(self) -> Counter:
        return Counter(r.country or UNKNOWN_COUNTRY for r in self.records)

    def filter_country(self, country: str) -> "Corpus":
        """Records whose country matches; ``"unknown"`` selects untagged rows."""
        keep = [r for r in self.records if (r.country or UNKNOWN_COUNTRY) == country]
        return build_corpus(keep)


def build_corpus(records: Iterable[TweetRecord], row_errors: Sequence[RowError] = ()) -> Corpus:
    """Sort by timestamp (then id), check id uniqueness, flag dangling retweets."""
    records = sorted(records, key=lambda r: (r.timestamp, r.tweet_id))
    ids = set()
    for r in records:
        if r.tweet_id in ids:
            raise IngestError(f"duplicate tweet_id {r.tweet_id!r}")
        ids.add(r.tweet_id)
    dangling = [r.tweet_id for r in records if r.retweet_of is not None and r.retweet_of not in ids]
    if dangling:
        log.info("%d retweet(s) refer to tweets outside the corpus", len(dangling))
    return Corpus(records, dangling, list(row_errors))


def _record_from_fields(row: Mapping[str, object]) -> TweetRecord:
    missing = [k for k in ("tweet_id", "timestamp", "account_id", "text") if row.get(k) in (None, "")]
    if missing:
        raise ValueError(f"missing required field(s): {', '.join(missing)}")
    for k in CSV_FIELDS:
        v = row.get(k)
        if v is not None and not isinstance(v, str):
            raise ValueError(f"field {k!r} must be a string")
    return TweetRecord(
        tweet_id=str(row["tweet_id"]),
        timestamp=parse_timestamp(str(row["timestamp"])),
        account_id=str(row["account_id"]),
        text=str(row["text"]),
        retweet_of=str(row["retweet_of"]) if row.get("retweet_of") else None,
        country=str(row["country"]) if row.get("country") else None,
    )


def ingest(path, format: Optional[str] = None) -> Corpus:
    """Read a CSV or JSONL tweet file.

    Malformed rows are skipped and recorded with their line number; more
    than 10% malformed rows aborts with IngestError.
    """
    if format is None:
        ext = os.path.splitext(str(path))[1].lower()
        format = "jsonl" if ext in (".jsonl", ".ndjson") else "csv"
    if format not in ("csv", "jsonl"):
        raise IngestError(f"unsupported corpus format {format!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        return ingest_text(fh.read(), format)


def ingest_text(text: str, format: str = "csv") -> Corpus:
    records: list[TweetRecord] = []
    errors: list[RowError] = []
    if format == "csv":
        rows = _csv_rows(text)
    else:
        rows = _jsonl_rows(text)
    n_rows = 0
    for line, row in rows:
        n_rows += 1
        try:
            if isinstance(row, Exception):
                raise row
            records.append(_record_from_fields(row))
        except (ValueError, TypeError, KeyError) as exc:
            errors.append(RowError(line, str(exc)))
            log.warning("line %d: %s", line, exc)
    if n_rows and len(errors) > MAX_MALFORMED_FRACTION * n_rows:
        raise IngestError(f"{len(errors)} of {n_rows} rows malformed; first at line "
                          f"{errors[0].line}: {errors[0].message}")
    return build_corpus(records, errors)


def _csv_rows(text: str):
    if not text.strip():
        return
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_FIELDS:
        raise IngestError(f"CSV header must be {','.join(CSV_FIELDS)}, got {','.join(header)}")
    for fields in reader:
        line = reader.line_num
        if not fields:
            continue
        if len(fields) != len(CSV_FIELDS):
            yield line, ValueError(f"expected {len(CSV_FIELDS)} fields, got {len(fields)}")
        else:
            yield line, dict(zip(CSV_FIELDS, fields))


def _jsonl_rows(text: str):
    for line, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            yield line, ValueError(f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(obj, dict):
            yield line, ValueError("JSONL row is not an object")
        else:
            yield line, obj


def serialize(corpus: Corpus, format: str = "csv") -> str:
    if format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in corpus.records:
            writer.writerow(r.to_row())
        return buf.getvalue()
    if format == "jsonl":
        return "".join(json.dumps(r.to_row(), ensure_ascii=False) + "\n" for r in corpus.records)
    raise IngestError(f"unsupported corpus format {format!r}")


# ---------------------------------------------------------------------------
# n-gram memes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MemeStats:
    meme: tuple[str, ...]
    n_m: int
    n_corpus: int
    n_rtw: int
    n_tw: int
    s_nrtw: int
    s_tnrtw: int

    def __post_init__(self):
        if not 0 <= self.n_m <= self.n_corpus:
            raise DomainError("need 0 <= n_m <= n_corpus")
        if self.n_rtw > self.s_tnrtw or self.s_nrtw > self.s_tnrtw:
            raise DomainError("account counts exceed the receiving population")
        if min(self.n_rtw, self.n_tw, self.s_nrtw, self.s_tnrtw) < 0:
            raise DomainError("counts must be non-negative")


@dataclass(frozen=True)
class MemeScore:
    f_m: float
    p_m: float
    m_m: float

    @property
    def display(self) -> float:
        """Score scaled by 1e4 for reporting."""
        return self.m_m * DISPLAY_SCALE


def _ngrams(tokens: Sequence[str], n: int) -> set[tuple[str, ...]]:
    return {tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)}


def _record_memes(corpus: Corpus, root: str, n: int) -> list[set[tuple[str, ...]]]:
    """Root-containing n-grams of each record (a retweet also sees its original)."""
    own = [{g for g in _ngrams(tokenize(r.text), n) if root in g} for r in corpus.records]
    pos = {r.tweet_id: k for k, r in enumerate(corpus.records)}
    merged = []
    for k, r in enumerate(corpus.records):
        grams = own[k]
        if r.retweet_of is not None and r.retweet_of in pos:
            grams = grams | own[pos[r.retweet_of]]
        merged.append(grams)
    return merged


def extract_ngrams(corpus: Corpus, root: str, n: int, baseline: str = "meme") -> list[MemeStats]:
    """Every contiguous n-gram containing ``root``, ranked by tweet count.

    Ties are broken by the token tuple so the order is deterministic.
    """
    if not root or tokenize(root) != [root.lower()]:
        raise DomainError(f"root must be a single alphanumeric token, got {root!r}")
    if not 1 <= n <= 4:
        raise DomainError(f"n must lie in 1..4, got {n}")
    if baseline not in ("meme", "global"):
        raise DomainError("baseline must be 'meme' or 'global'")
    root = root.lower()
    per_record = _record_memes(corpus, root, n)
    tweets: Counter = Counter()
    receivers: dict[tuple, set] = defaultdict(set)
    retweeters: dict[tuple, set] = defaultdict(set)
    for r, grams in zip(corpus.records, per_record):
        for g in grams:
            tweets[g] += 1
            receivers[g].add(r.account_id)
            if r.is_retweet:
                retweeters[g].add(r.account_id)

    all_accounts = {r.account_id for r in corpus.records}
    ever_retweet = {r.account_id for r in corpus.records if r.is_retweet}
    total = len(corpus.records)
    out = []
    for g in sorted(tweets, key=lambda g: (-tweets[g], g)):
        n_rtw = len(retweeters[g])
        if baseline == "meme":
            s_tnrtw = len(receivers[g])
            s_nrtw = s_tnrtw - n_rtw
        else:
            s_tnrtw = len(all_accounts)
            s_nrtw = len(all_accounts - ever_retweet)
        out.append(MemeStats(g, tweets[g], total, n_rtw, tweets[g], s_nrtw, s_tnrtw))
    return out


def meme_score(stats: MemeStats) -> MemeScore:
    """Frequency, propagation weight and their product.

    Raises UndefinedScoreError when no receiving account stays un-retweeted
    (the propagation weight would be infinite).
    """
    if stats.n_corpus <= 0 or stats.n_tw <= 0 or stats.s_tnrtw <= 0:
        raise DomainError("meme score needs n_corpus, n_tw and s_tnrtw > 0")
    if stats.s_nrtw == 0:
        raise UndefinedScoreError(f"propagation weight of {stats.meme} is infinite (s_nrtw = 0)")
    f_m = stats.n_m / stats.n_corpus
    p_m = (stats.n_rtw / stats.n_tw) / (stats.s_nrtw / stats.s_tnrtw)
    return MemeScore(f_m, p_m, f_m * p_m)


def score_report(corpus: Corpus, root: str, n: int, baseline: str = "meme",
                 top: Optional[int] = None) -> dict:
    """JSON-ready meme-score report; undefined scores carry ``null`` values."""
    memes = []
    stats_list = extract_ngrams(corpus, root, n, baseline)
    for st in stats_list[:top] if top else stats_list:
        entry = {"tokens": list(st.meme), "n_m": st.n_m}
        try:
            sc = meme_score(st)
        except UndefinedScoreError:
            entry.update(f_m=st.n_m / st.n_corpus, P_m=None, M_m=None,
                         display_score_1e4=None, status="undefined: infinite propagation weight")
        else:
            entry.update(f_m=sc.f_m, P_m=sc.p_m, M_m=sc.m_m,
                         display_score_1e4=sc.display, status="ok")
        memes.append(entry)
    return {"root": root.lower(), "n": n, "baseline": baseline, "memes": memes}


# ---------------------------------------------------------------------------
# Count normalisation
# ---------------------------------------------------------------------------

def normalize_counts(rows: Mapping[str, float], base: str) -> dict[str, float]:
    """Divide every count by the count of row ``base`` (which maps to 1)."""
    if base not in rows:
        raise DomainError(f"base row {base!r} not present")
    denom = rows[base]
    if not denom > 0:
        raise DomainError(f"base count must be positive, got {denom}")
    return {label: count / denom for label, count in rows.items()}
