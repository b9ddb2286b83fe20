"""Independent brute-force reference for dialogue extraction.

Deliberately written against a different formulation than the library:
a dialogue boundary sits before turn i exactly when turn i starts at
least the gap threshold after the maximum end among ALL earlier turns
(the global prefix maximum coincides with the within-dialogue maximum
because dialogues are gap-separated). Dominance and filtering are
recomputed from raw turns with collections.Counter.
"""

from collections import Counter


def naive_split(turns, gap_threshold):
    """turns: list of (speaker, start, end), sorted by (start, end, speaker)."""
    if not turns:
        return []
    boundaries = [0]
    for i in range(1, len(turns)):
        prefix_max_end = max(t[2] for t in turns[:i])
        if turns[i][1] - prefix_max_end >= gap_threshold:
            boundaries.append(i)
    boundaries.append(len(turns))
    return [turns[a:b] for a, b in zip(boundaries, boundaries[1:])]


def naive_dominance(group):
    times = Counter()
    for speaker, start, end in group:
        times[speaker] += end - start
    total = sum(times.values())
    best = sorted(times.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    return best[0], best[1] / total


def naive_extract(turns, gap_threshold, dominance_threshold, min_speakers):
    """Returns (retained groups, rejected (group, reason) pairs)."""
    retained, rejected = [], []
    for group in naive_split(turns, gap_threshold):
        _, ratio = naive_dominance(group)
        n_speakers = len({t[0] for t in group})
        if ratio > dominance_threshold:
            rejected.append((group, "dominance"))
        elif n_speakers < min_speakers:
            rejected.append((group, "too_few_speakers"))
        else:
            retained.append(group)
    return retained, rejected
