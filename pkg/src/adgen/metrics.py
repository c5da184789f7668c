"""Caption metrics and character-recognition scoring.

ROUGE-L and CIDEr-D are implemented from scratch. CIDEr follows the "D"
variant reported by captioning benchmarks: clipped TF-IDF n-gram cosine
similarity for n = 1..4, a Gaussian length penalty (sigma = 6), averaged
over n and references, scaled by 10. The IDF corpus is the evaluation set's
references. Character recall/precision uses a deterministic token-matching
substitute for named-entity recognition against the cast list.
"""

from __future__ import annotations

import csv
import json
import math
import string
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from adgen.ingest import CastMember, GroundTruthAD
from adgen.promptgen import ADOutput

ROUGE_BETA = 1.2
CIDER_MAX_N = 4
CIDER_SIGMA = 6.0

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


def tokenize(text: str) -> list[str]:
    """Lowercase, replace ASCII punctuation with spaces, split on whitespace."""
    return text.lower().translate(_PUNCT_TABLE).split()


def lcs_len(a: list[str], b: list[str]) -> int:
    """Longest common subsequence length (dynamic programming)."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, 1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(candidate: list[str], reference: list[str], beta: float = ROUGE_BETA) -> float:
    """LCS-based F-measure; 0 when either side is empty."""
    if not candidate or not reference:
        return 0.0
    lcs = lcs_len(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return (1 + beta**2) * p * r / (r + beta**2 * p)


def ngrams(tokens: list[str], n: int) -> Counter:
    """Multiset of n-grams as tuples; empty when n exceeds the token count."""
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def idf(reference_corpus: list[list[list[str]]], n: int) -> dict[tuple, float]:
    """idf(g) = ln(|corpus| / df(g)), df counting clips whose reference set
    contains the n-gram g."""
    if not reference_corpus:
        raise ValueError("reference corpus must be non-empty")
    df: Counter = Counter()
    for clip_refs in reference_corpus:
        seen = set()
        for ref in clip_refs:
            seen.update(ngrams(ref, n))
        df.update(seen)
    total = len(reference_corpus)
    return {g: math.log(total / c) for g, c in df.items()}


@dataclass
class CorpusIdf:
    """IDF tables for n = 1..max_n over one evaluation reference corpus.
    N-grams unseen in the corpus fall back to df = 1."""

    num_clips: int
    tables: dict[int, dict[tuple, float]]

    def lookup(self, gram: tuple) -> float:
        table = self.tables[len(gram)]
        return table.get(gram, math.log(self.num_clips))


def build_corpus_idf(
    reference_corpus: list[list[list[str]]], max_n: int = CIDER_MAX_N
) -> CorpusIdf:
    return CorpusIdf(
        num_clips=len(reference_corpus),
        tables={n: idf(reference_corpus, n) for n in range(1, max_n + 1)},
    )


def _tfidf_vector(tokens: list[str], n: int, corpus_idf: CorpusIdf) -> tuple[dict, float]:
    vec = {}
    for gram, count in ngrams(tokens, n).items():
        vec[gram] = count * corpus_idf.lookup(gram)
    norm = math.sqrt(sum(w * w for w in vec.values()))
    return vec, norm


def cider_d(
    candidate: list[str],
    references: list[list[str]],
    corpus_idf: CorpusIdf,
    sigma: float = CIDER_SIGMA,
) -> float:
    """Consensus score in [0, 10] for one candidate against its references.

    Per n: cosine similarity of TF-IDF vectors with candidate counts clipped
    at the reference counts, times exp(-(len_c - len_r)^2 / (2 sigma^2));
    zero-norm vectors contribute 0. Averaged over references and n, x10.
    """
    if not references:
        raise ValueError("cider_d needs at least one reference")
    total = 0.0
    for n in range(1, CIDER_MAX_N + 1):
        cand_vec, cand_norm = _tfidf_vector(candidate, n, corpus_idf)
        sim_sum = 0.0
        for ref in references:
            ref_vec, ref_norm = _tfidf_vector(ref, n, corpus_idf)
            if cand_norm == 0.0 or ref_norm == 0.0:
                continue
            dot = sum(
                min(w, ref_vec[g]) * ref_vec[g] for g, w in cand_vec.items() if g in ref_vec
            )
            delta = len(candidate) - len(ref)
            sim_sum += (dot / (cand_norm * ref_norm)) * math.exp(
                -(delta**2) / (2 * sigma**2)
            )
        total += sim_sum / len(references)
    return total / CIDER_MAX_N * 10.0


def _subseq_find(haystack: list[str], needle: tuple[str, ...]) -> bool:
    if not needle or len(needle) > len(haystack):
        return False
    return any(
        tuple(haystack[i : i + len(needle)]) == needle
        for i in range(len(haystack) - len(needle) + 1)
    )


def ner_match(ad_text: str, cast: list[CastMember]) -> set[str]:
    """Cast members whose character name (full, or any whitespace-separated
    part of length >= 3) occurs as a whole-token sequence in the AD."""
    tokens = tokenize(ad_text)
    found = set()
    for member in cast:
        name = member.character_name
        candidates = [name] + [p for p in name.split() if len(p) >= 3]
        for cand in candidates:
            cand_tokens = tuple(tokenize(cand))
            if cand_tokens and _subseq_find(tokens, cand_tokens):
                found.add(member.cast_id)
                break
    return found


def char_pr(
    predictions: dict[str, set[str]], annotations: dict[str, set[str]]
) -> tuple[float, float]:
    """Recall and precision of per-clip character sets, counts summed over
    clips; denominators of zero yield 0."""
    if set(predictions) != set(annotations):
        raise ValueError("predictions and annotations must cover the same clips")
    tp = fp = fn = 0
    for clip_id, pred in predictions.items():
        truth = annotations[clip_id]
        tp += len(pred & truth)
        fp += len(pred - truth)
        fn += len(truth - pred)
    recall = tp / (tp + fn) if tp + fn else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    return recall, precision


@dataclass
class ClipScore:
    clip_id: str
    rouge_l: float
    cider_d: float
    predicted_names: list[str]
    annotated_names: list[str]


@dataclass
class EvalReport:
    rouge_l: float
    cider_d: float
    char_recall: float
    char_precision: float
    per_clip: list[ClipScore] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rouge_l": self.rouge_l,
            "cider_d": self.cider_d,
            "char_recall": self.char_recall,
            "char_precision": self.char_precision,
            "per_clip": [
                {
                    "clip_id": c.clip_id,
                    "rouge_l": c.rouge_l,
                    "cider_d": c.cider_d,
                    "predicted_names": c.predicted_names,
                    "annotated_names": c.annotated_names,
                }
                for c in self.per_clip
            ],
        }

    def save_json(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    def save_csv(self, path: Path | str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["clip_id", "rouge_l", "cider_d", "predicted", "annotated"])
            for c in self.per_clip:
                writer.writerow(
                    [
                        c.clip_id,
                        f"{c.rouge_l:.6f}",
                        f"{c.cider_d:.6f}",
                        "|".join(c.predicted_names),
                        "|".join(c.annotated_names),
                    ]
                )


def evaluate_run(
    ad_outputs: list[ADOutput],
    ground_truth: list[GroundTruthAD],
    cast: list[CastMember],
) -> EvalReport:
    """Score a run: corpus ROUGE-L and CIDEr-D are the means of per-clip
    scores; character P/R compares ner_match on outputs vs ground truth."""
    if not ad_outputs:
        raise ValueError("empty run: no AD outputs to evaluate")
    gt_by_clip = {g.clip_id: g for g in ground_truth}
    missing = [o.clip_id for o in ad_outputs if o.clip_id not in gt_by_clip]
    if missing:
        raise ValueError(f"no ground truth for clips: {', '.join(sorted(missing))}")

    references = {o.clip_id: [tokenize(gt_by_clip[o.clip_id].text)] for o in ad_outputs}
    corpus_idf = build_corpus_idf(list(references.values()))

    per_clip = []
    predictions: dict[str, set[str]] = {}
    annotations: dict[str, set[str]] = {}
    for out in ad_outputs:
        cand = tokenize(out.text)
        refs = references[out.clip_id]
        pred_ids = ner_match(out.text, cast)
        true_ids = ner_match(gt_by_clip[out.clip_id].text, cast)
        predictions[out.clip_id] = pred_ids
        annotations[out.clip_id] = true_ids
        per_clip.append(
            ClipScore(
                clip_id=out.clip_id,
                rouge_l=rouge_l(cand, refs[0]),
                cider_d=cider_d(cand, refs, corpus_idf),
                predicted_names=sorted(pred_ids),
                annotated_names=sorted(true_ids),
            )
        )
    recall, precision = char_pr(predictions, annotations)
    n = len(per_clip)
    return EvalReport(
        rouge_l=sum(c.rouge_l for c in per_clip) / n,
        cider_d=sum(c.cider_d for c in per_clip) / n,
        char_recall=recall,
        char_precision=precision,
        per_clip=per_clip,
    )
