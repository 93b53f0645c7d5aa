"""
Edit-distance metrics between original and adversarial strings
"""

from typing import List, Sequence, Tuple

from ..errors import CodecInputError


def levenshtein(a: str, b: str) -> int:
    """Unit-cost insert/delete/substitute distance (two-row dynamic programme)"""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def rld(original: str, adversarial: str) -> float:
    """Relative Levenshtein distance: edits per character of the original"""
    if not original:
        raise CodecInputError("Relative Levenshtein distance needs a non-empty original")
    return levenshtein(original, adversarial) / len(original)


def bag_rld(original_paths: Sequence[str], adversarial_paths: Sequence[str]) -> Tuple[float, int]:
    """Mean RLD over instances paired by position, and the number of empty decodes.

    A missing or empty adversarial instance scores as a full deletion (1.0).
    """
    if not original_paths:
        raise CodecInputError("Bag RLD needs at least one original instance")
    scores = []
    empty = 0
    for i, original in enumerate(original_paths):
        adversarial = adversarial_paths[i] if i < len(adversarial_paths) else ""
        if not adversarial:
            empty += 1
        scores.append(rld(original, adversarial))
    return sum(scores) / len(scores), empty


def _lcs_table(a: str, b: str) -> List[List[int]]:
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) - 1, -1, -1):
        for j in range(len(b) - 1, -1, -1):
            table[i][j] = table[i + 1][j + 1] + 1 if a[i] == b[j] else max(table[i + 1][j], table[i][j + 1])
    return table


def _bracket(text: str, changed: List[bool]) -> str:
    out = []
    inside = False
    for ch, flag in zip(text, changed):
        if flag and not inside:
            out.append("[")
        elif not flag and inside:
            out.append("]")
        inside = flag
        out.append(ch)
    if inside:
        out.append("]")
    return "".join(out)


def render_diff(original: str, adversarial: str) -> Tuple[str, str]:
    """Bracket the spans outside a longest common subsequence.

    The original shows deleted or replaced characters, the adversarial string
    shows inserted or substituted ones.
    """
    table = _lcs_table(original, adversarial)
    kept_a = [False] * len(original)
    kept_b = [False] * len(adversarial)
    i = j = 0
    while i < len(original) and j < len(adversarial):
        if original[i] == adversarial[j]:
            kept_a[i] = kept_b[j] = True
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            i += 1
        else:
            j += 1
    return (_bracket(original, [not k for k in kept_a]),
            _bracket(adversarial, [not k for k in kept_b]))
