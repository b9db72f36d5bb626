"""Brute-force CIDEr-D used to freeze expected values for the C++ metric tests.

Written against the consensus definition directly: per-image document
frequencies over reference sets, tf-idf vectors per n-gram order, clipped
cosine, gaussian length penalty on the bigram count, scaled by 10.
"""
import math
from collections import Counter


def ngrams(words, n):
    return Counter(tuple(words[i:i + n]) for i in range(len(words) - n + 1))


def cider_d(hyps, refs, sigma=6.0):
    ids = sorted(hyps)
    n_docs = len(ids)
    df = Counter()
    for i in ids:
        seen = set()
        for r in refs[i]:
            for n in range(1, 5):
                seen.update(ngrams(r.split(), n))
        df.update(seen)

    def vec(words):
        out, norms = [], []
        for n in range(1, 5):
            v = {g: tf * (math.log(n_docs) - math.log(max(1.0, df[g]))) for g, tf in ngrams(words, n).items()}
            out.append(v)
            norms.append(math.sqrt(sum(x * x for x in v.values())))
        length = max(0, len(words) - 1)
        return out, norms, length

    scores = []
    for i in ids:
        hv, hn, hl = vec(hyps[i].split())
        total = 0.0
        for r in refs[i]:
            rv, rn, rl = vec(r.split())
            per_n = []
            for n in range(4):
                val = sum(min(hv[n][g], rv[n].get(g, 0.0)) * rv[n].get(g, 0.0) for g in hv[n])
                if hn[n] != 0 and rn[n] != 0:
                    val /= hn[n] * rn[n]
                val *= math.exp(-((hl - rl) ** 2) / (2 * sigma * sigma))
                per_n.append(val)
            total += sum(per_n) / 4
        scores.append(10.0 * total / len(refs[i]))
    return scores


if __name__ == "__main__":
    identical = {"a": "the man sits down", "b": "a woman runs home", "c": "dogs bark loudly now"}
    print("identical", cider_d(identical, {k: [v] for k, v in identical.items()}))

    hyps = {"1": "the man eats soup", "2": "a dog runs fast", "3": "birds sing songs daily"}
    refs = {"1": ["a man eats bread"], "2": ["the cat sleeps now"], "3": ["fish swim deep water"]}
    s = cider_d(hyps, refs)
    print("one shared bigram", ["%.12f" % x for x in s], "mean %.12f" % (sum(s) / len(s)))

    hyps = {"1": "the man eats soup", "2": "a dog runs fast", "3": "birds sing songs"}
    refs = {
        "1": ["a man eats bread", "the man drinks tea"],
        "2": ["the cat sleeps", "a cat runs away"],
        "3": ["fish swim deep"],
    }
    s = cider_d(hyps, refs)
    print("two refs", ["%.12f" % x for x in s], "mean %.12f" % (sum(s) / len(s)))
