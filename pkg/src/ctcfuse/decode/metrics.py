"""Levenshtein-aligned error counting for unit and word sequences."""

from dataclasses import dataclass

from ..errors import EmptyReference


@dataclass(frozen=True)
class EditMetrics:
    substitutions: int
    deletions: int
    insertions: int
    length: int  # reference token count N

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def error_rate(self) -> float:
        return self.errors / self.length

    @property
    def accuracy(self) -> float:
        """100 * (N - S - D - I) / N; negative when insertions dominate."""
        return 100.0 * (self.length - self.errors) / self.length


def edit_distance_metrics(ref, hyp) -> EditMetrics:
    """Minimum-edit alignment with unit costs.

    Ties are resolved preferring diagonal moves, then deletions, then
    insertions, which makes the individual S/D/I counts deterministic.
    """
    ref = list(ref)
    hyp = list(hyp)
    if not ref:
        raise EmptyReference("reference must be non-empty")
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = dist[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1])
            dele = dist[i - 1][j] + 1
            ins = dist[i][j - 1] + 1
            dist[i][j] = min(sub, dele, ins)

    subs = dels = inss = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            inss += 1
            j -= 1
    return EditMetrics(substitutions=subs, deletions=dels, insertions=inss, length=n)


def pooled_metrics(pairs) -> EditMetrics:
    """Corpus-level counts: sum S/D/I/N over (ref, hyp) pairs, then rate."""
    s = d = i = n = 0
    for ref, hyp in pairs:
        m = edit_distance_metrics(ref, hyp)
        s, d, i, n = s + m.substitutions, d + m.deletions, i + m.insertions, n + m.length
    return EditMetrics(s, d, i, n)
