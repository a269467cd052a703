"""Prints the reference corpus BLEU for data/golden/bleu/pairs.json.

Uses NLTK corpus_bleu (uniform 4-gram weights, smoothing method2) over
lowercased whitespace tokens, scaled to 0-100.
"""
import json
import sys
from pathlib import Path

from nltk.translate.bleu_score import SmoothingFunction, corpus_bleu

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[2]
pairs = json.loads((root / "data/golden/bleu/pairs.json").read_text())
hyps = [c.lower().split() for c, _ in pairs]
refs = [[r.lower().split()] for _, r in pairs]
score = corpus_bleu(refs, hyps, smoothing_function=SmoothingFunction().method2)
print(f"{100 * score:.10f}")
