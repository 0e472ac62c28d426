"""Shared test utilities: brute-force matching oracle and random SED instances."""

import numpy as np

from fbsed.events import Event
from fbsed.metrics import event_feasible


def max_matching_size(refs, hyps) -> int:
    """Maximum bipartite matching via augmenting paths (small instances)."""
    feasible = [[event_feasible(r, h) for h in hyps] for r in refs]
    match_of_hyp = [-1] * len(hyps)

    def augment(ri, seen):
        for hj in range(len(hyps)):
            if feasible[ri][hj] and not seen[hj]:
                seen[hj] = True
                if match_of_hyp[hj] == -1 or augment(match_of_hyp[hj], seen):
                    match_of_hyp[hj] = ri
                    return True
        return False

    size = 0
    for ri in range(len(refs)):
        if augment(ri, [False] * len(hyps)):
            size += 1
    return size


def random_sed_instance(rng, label="ev", max_events=6, clip_len=10.0):
    """One clip's reference/hypothesis lists for a single class.

    Mirrors synthesized-corpus statistics: same-class references keep at
    least 0.5 s separation; hypotheses are collar-scale perturbations of a
    subset of the references plus a few spurious events.
    """
    n_ref = int(rng.integers(0, max_events + 1))
    refs = []
    cursor = rng.uniform(0.0, 1.0)
    for _ in range(n_ref):
        dur = rng.uniform(0.3, 2.0)
        if cursor + dur > clip_len:
            break
        refs.append(Event(label, cursor, cursor + dur))
        cursor += dur + 0.5 + rng.uniform(0.0, 1.5)
    hyps = []
    for r in refs:
        if rng.random() < 0.8:
            onset = r.onset + rng.normal(0.0, 0.15)
            dur = r.duration * rng.uniform(0.6, 1.4)
            if dur > 0.05:
                hyps.append(Event(label, onset, onset + dur))
    for _ in range(int(rng.integers(0, 3))):
        onset = rng.uniform(0.0, clip_len - 0.2)
        hyps.append(Event(label, onset, onset + rng.uniform(0.1, 1.5)))
    order = rng.permutation(len(hyps))
    return refs, [hyps[i] for i in order]
