#!/usr/bin/env python3
"""Reference sentence-BLEU values from NLTK, frozen into test_metrics.cpp.

NLTK returns 0 when no unigram matches; the pairs below all share at least
one unigram, where its method1 smoothing (epsilon 0.1 over max(1, count))
is the definition the library implements.
"""
from nltk.translate.bleu_score import SmoothingFunction, sentence_bleu

PAIRS = [
    ("the cat sat on the mat", "the cat is on the mat"),
    ("i am so sorry to hear that", "i am sorry to hear about your loss"),
    ("that sounds great", "that sounds like a great time for you"),
    ("wow , that is amazing news !", "that is amazing , congratulations !"),
    ("i hope it gets better soon", "i hope you feel better"),
    ("good luck", "good luck with everything"),
]

smooth = SmoothingFunction(epsilon=0.1).method1
for hyp, ref in PAIRS:
    h, r = hyp.split(), ref.split()
    b2 = sentence_bleu([r], h, weights=(0.5, 0.5), smoothing_function=smooth)
    b4 = sentence_bleu([r], h, weights=(0.25, 0.25, 0.25, 0.25), smoothing_function=smooth)
    print(f'{{"{hyp}", "{ref}", {b2!r}, {b4!r}}},')
