"""Regenerate corpus100.jsonl: 100 synthetic, pre-tokenized QG records.

Run from this directory: ``python make_corpus100.py``. The output is
committed; tests never call this script.
"""

import json
import random

SUBJECTS = [["the", "museum"], ["the", "council"], ["marie", "curie"], ["the", "river", "authority"],
            ["beyonce"], ["the", "university"], ["napoleon"], ["the", "orchestra"],
            ["the", "railway", "company"], ["tesla"]]
VERBS = [("opened", "open"), ("founded", "found"), ("acquired", "acquire"),
         ("discovered", "discover"), ("released", "release"), ("built", "build")]
OBJECTS = [["a", "new", "gallery"], ["the", "northern", "bridge"], ["polonium"],
           ["a", "digital", "album"], ["the", "eastern", "campus"], ["a", "steam", "engine"],
           ["the", "concert", "hall"], ["a", "research", "station"]]
PLACES = ["paris", "warsaw", "houston", "vienna", "kyoto", "lagos", "lima", "oslo"]
FILLER = ["which", "had", "been", "criticised", "by", "several", "local", "newspapers",
          "for", "its", "slow", "progress", "over", "many", "years"]
SOURCES = [["the", "times"], ["local", "historians"], ["the", "annual", "report"]]


def span(tokens, sub):
    for i in range(len(tokens) - len(sub) + 1):
        if tokens[i:i + len(sub)] == sub:
            return i, i + len(sub) - 1
    raise ValueError(sub)


def record(k, rng):
    subj = rng.choice(SUBJECTS)
    past, base = rng.choice(VERBS)
    obj = rng.choice(OBJECTS)
    year = str(rng.randint(1800, 2019))
    place = rng.choice(PLACES)
    src = rng.choice(SOURCES)
    kind = k % 5
    relations = []
    if kind == 0:
        # answer = year, near the verb
        sent = subj + [past] + obj + ["in", year, ",", "according", "to"] + src + ["."]
        ans = [year]
        q = ["when", "did"] + subj + [base] + obj + ["?"]
        relations = [
            {"args": [" ".join(subj), past, " ".join(obj), "in " + year], "confidence": 0.81},
            {"args": [" ".join(subj), past, " ".join(obj)], "confidence": 0.93},
        ]
    elif kind == 1:
        # answer = object, subject far away behind a long clause
        clause = FILLER[:rng.randint(10, 15)]
        sent = subj + [","] + clause + [","] + [past] + obj + ["in", place, "."]
        ans = obj
        q = ["what", "did"] + subj + [base] + ["in", place, "?"]
        relations = [
            {"args": [" ".join(subj), past, " ".join(obj), "in " + place], "confidence": 0.72},
            {"args": [" ".join(subj), "had been criticised", "by several local newspapers"],
             "confidence": 0.9},
        ]
    elif kind == 2:
        # answer = place, no relations extracted
        sent = ["in", year, ","] + subj + [past] + obj + ["in", place, "."]
        ans = [place]
        q = ["where", "did"] + subj + [base] + obj + ["?"]
    elif kind == 3:
        # answer = subject; three relations, confidence tie-break matters
        sent = subj + [past] + obj + ["near", place, "in", year, "."]
        ans = subj
        q = ["who", past] + obj + ["near", place, "?"]
        relations = [
            {"args": [" ".join(obj), "near", place], "confidence": 0.95},
            {"args": [" ".join(subj), past, " ".join(obj)], "confidence": 0.88},
            {"args": [" ".join(subj), past, " ".join(obj), "near " + place, "in " + year],
             "confidence": 0.88},
        ]
    else:
        # questions made only of stopwords are filtered out on every 4th of these
        sent = subj + [past] + obj + ["for", "the", "people", "of", place, "."]
        ans = ["the", "people", "of", place]
        if k % 20 == 4:
            q = ["for", "whom", "was", "it", "?"]
        else:
            q = ["for", "whom", "did"] + subj + [base] + obj + ["?"]
        relations = [{"args": [" ".join(subj), past, " ".join(obj), "for the people of " + place],
                      "confidence": 0.77}]
    a0, a1 = span(sent, ans)
    rec = {"id": f"c{k:03d}", "sentence_tokens": sent, "answer_start": a0, "answer_end": a1,
           "question_tokens": q}
    if k % 3:
        rec["pos"] = ["NN" if t.isalpha() else ("CD" if t.isdigit() else ".") for t in sent]
        rec["ner"] = ["DATE" if t.isdigit() else ("LOC" if t in PLACES else "O") for t in sent]
    if relations:
        rec["relations"] = relations
    return rec


def main():
    rng = random.Random(20191103)
    with open("corpus100.jsonl", "w", encoding="utf-8") as fh:
        for k in range(100):
            fh.write(json.dumps(record(k, rng)) + "\n")


if __name__ == "__main__":
    main()
