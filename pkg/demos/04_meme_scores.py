"""
Scoring root-anchored memes
===========================

Read the ten-tweet fixture, list the two-word memes containing "ebola",
and score each by frequency times propagation weight.
"""
from pathlib import Path

from memetic.errors import UndefinedScoreError
from memetic.memes import extract_ngrams, ingest, meme_score, normalize_counts

corpus = ingest(Path(__file__).resolve().parents[1] / "scenarios" / "data" / "fixture_corpus.csv")
print(f"{len(corpus)} tweets, {corpus.dangling_count} dangling retweets")

###############################################################################
# Scores are shown scaled by 1e4.
for stats in extract_ngrams(corpus, "ebola", 2):
    try:
        score = meme_score(stats)
    except UndefinedScoreError:
        print(f"{' '.join(stats.meme):16s} n_m={stats.n_m}  undefined (every receiver retweeted)")
        continue
    print(f"{' '.join(stats.meme):16s} n_m={stats.n_m}  f={score.f_m:.2f}  P={score.p_m:.2f}  "
          f"M x 1e4 = {score.display:.0f}")

###############################################################################
# Country counts as fractions of the whole collection.
counts = {"All": 6_582_123, "Liberia": 407_809, "Sierra Leone": 152_867, "Guinea": 61_371}
for label, frac in normalize_counts(counts, "All").items():
    print(f"{label:13s} {frac:.4f}")
