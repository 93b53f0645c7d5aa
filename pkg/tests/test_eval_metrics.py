#!/usr/bin/env python3
"""
Edit distance, Pareto front, eCDF and report table tests
"""

import itertools
import os
from functools import lru_cache

import numpy as np
import pandas as pd
import pytest

from src.attacks.config import AttackOutcome, AttackResult, AttackSummary
from src.errors import CodecInputError
from src.metrics.frontier import MethodPoint, dominates, ecdf, pareto_front
from src.metrics.reports import (aggregate_frames, attack_table_text, format_mean_std, render_examples,
                                 summary_frame, write_ecdf, write_table)
from src.metrics.strings import bag_rld, levenshtein, render_diff, rld


def recursive_distance(a: str, b: str) -> int:
    """Textbook recursion, memoised per pair"""

    @lru_cache(maxsize=None)
    def go(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(go(i - 1, j) + 1, go(i, j - 1) + 1, go(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return go(len(a), len(b))


def binary_strings(max_length: int):
    for n in range(max_length + 1):
        for chars in itertools.product("ab", repeat=n):
            yield "".join(chars)


def point(name, rate, distance):
    return MethodPoint(method=name, success_rate=rate, mean_rld=distance)


@pytest.mark.unit
class TestLevenshtein:
    def test_examples(self):
        print("[TEST] levenshtein examples")
        assert levenshtein("", "abc") == 3
        assert levenshtein("abc", "") == 3
        assert levenshtein("kitten", "sitting") == 3
        assert levenshtein("C:\\Temp\\a.exe", "C:\\Temp\\a.exe") == 0
        print("[OK] examples match")

    def test_matches_recursive_oracle_up_to_length_5(self):
        strings = list(binary_strings(5))
        for a in strings:
            for b in strings:
                assert levenshtein(a, b) == recursive_distance(a, b), (a, b)

    @pytest.mark.slow
    @pytest.mark.skipif(os.getenv("ADVSTR_RUN_SLOW") != "1", reason="set ADVSTR_RUN_SLOW=1")
    def test_matches_recursive_oracle_up_to_length_8(self):
        strings = list(binary_strings(8))
        for a in strings:
            for b in strings:
                assert levenshtein(a, b) == recursive_distance(a, b), (a, b)

    def test_metric_properties(self, rng):
        alphabet = np.array(list("ab\\:."))

        def draw():
            return "".join(rng.choice(alphabet, size=int(rng.integers(0, 10))))

        for _ in range(300):
            a, b, c = draw(), draw(), draw()
            assert levenshtein(a, b) == levenshtein(b, a)
            assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)
            assert (levenshtein(a, b) == 0) == (a == b)


@pytest.mark.unit
class TestRelativeDistance:
    def test_examples(self):
        assert rld("abcdef", "abcxyz") == 0.5
        assert rld("abc", "abc") == 0.0
        assert rld("abc", "xyz") == 1.0

    def test_empty_original_raises(self):
        with pytest.raises(CodecInputError):
            rld("", "abc")

    def test_bag_pairs_by_position_and_counts_empty_decodes(self):
        score, empty = bag_rld(["abcd", "wxyz"], ["abcd", ""])
        assert score == pytest.approx(0.5)
        assert empty == 1

    def test_bag_missing_instance_is_full_deletion(self):
        score, empty = bag_rld(["ab", "cd"], ["ab"])
        assert score == pytest.approx(0.5)
        assert empty == 1


@pytest.mark.unit
class TestParetoFront:
    def test_single_point(self):
        p = point("only", 0.5, 0.2)
        assert pareto_front([p]) == [p]

    def test_dominated_point_is_removed(self):
        a, b, c = point("a", 0.9, 0.3), point("b", 0.8, 0.1), point("c", 0.85, 0.4)
        assert pareto_front([a, b, c]) == [a, b]
        assert dominates(a, c) and not dominates(a, b)

    def test_identical_points_all_kept(self):
        points = [point(str(i), 0.5, 0.5) for i in range(4)]
        assert pareto_front(points) == points

    def test_matches_brute_force(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 21))
            # coarse grid to produce ties
            rates = rng.integers(0, 6, size=n) / 5
            rlds = rng.integers(0, 6, size=n) / 5
            points = [point(str(i), float(r), float(d)) for i, (r, d) in enumerate(zip(rates, rlds))]
            expected = [p for p in points
                        if not any(q.success_rate >= p.success_rate and q.mean_rld <= p.mean_rld
                                   and (q.success_rate, q.mean_rld) != (p.success_rate, p.mean_rld)
                                   for q in points)]
            assert pareto_front(points) == expected

    def test_non_finite_point_rejected(self):
        with pytest.raises(ValueError):
            point("bad", float("nan"), 0.1)


@pytest.mark.unit
class TestEcdf:
    def test_examples(self):
        assert ecdf([2]) == [(2.0, 1.0)]
        steps = ecdf([1, 1, 3])
        assert steps[0][0] == 1.0 and steps[0][1] == pytest.approx(2 / 3)
        assert steps[1] == (3.0, 1.0)

    def test_random_values_monotone(self, rng):
        steps = ecdf(rng.random(1000))
        xs = [x for x, _ in steps]
        fs = [f for _, f in steps]
        assert xs == sorted(xs)
        assert all(b >= a for a, b in zip(fs, fs[1:]))
        assert fs[-1] == 1.0

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            ecdf([])


@pytest.mark.unit
class TestRenderDiff:
    def test_substitution(self):
        assert render_diff("abcd", "abXd") == ("ab[c]d", "ab[X]d")

    def test_deletion_and_insertion(self):
        assert render_diff("abcd", "abd") == ("ab[c]d", "abd")
        assert render_diff("abd", "abXd") == ("abd", "ab[X]d")

    def test_identical_strings_unmarked(self):
        path = "C:\\Windows\\Temp\\GUM896.tmp"
        assert render_diff(path, path) == (path, path)


def make_summary(method, rate, distance, successes=3, failures=1):
    return AttackSummary(method=method, total=successes + failures, successes=successes, failures=failures,
                         already_misclassified=0, success_rate=rate, mean_rld=distance)


@pytest.mark.unit
class TestReports:
    def test_pareto_column_matches_front(self):
        summaries = [make_summary("a", 0.9, 0.3), make_summary("b", 0.8, 0.1), make_summary("c", 0.85, 0.4),
                     make_summary("d", None, None, successes=0, failures=0)]
        frame = summary_frame(summaries)
        assert frame["pareto"].tolist() == [True, True, False, False]
        text = attack_table_text(frame)
        assert "n/a" in text and "90.00%" in text

    def test_format_mean_std(self):
        assert format_mean_std(None) == "n/a"
        assert format_mean_std(0.952, 0.0142, percent=True) == "95.20% ± 1.42%"
        assert format_mean_std(0.371) == "0.371"

    def test_aggregate_frames_mean_and_std(self):
        frames = [pd.DataFrame({"method": ["x", "y"], "success_rate": [0.5, 0.2]}),
                  pd.DataFrame({"method": ["x", "y"], "success_rate": [0.7, 0.2]})]
        out = aggregate_frames(frames, "method", ["success_rate"]).set_index("method")
        assert out.loc["x", "success_rate"] == pytest.approx(0.6)
        assert out.loc["x", "success_rate_std"] == pytest.approx(np.std([0.5, 0.7], ddof=1))
        assert out.loc["y", "runs"] == 2

    def test_single_run_has_no_std(self):
        frame = pd.DataFrame({"method": ["x"], "success_rate": [0.5]})
        out = aggregate_frames([frame], "method", ["success_rate"])
        assert out["success_rate_std"].isna().all()

    def test_write_table_and_ecdf(self, tmp_path):
        frame = summary_frame([make_summary("a", 0.5, 0.25)])
        csv_path = write_table(frame, tmp_path, "attack_summary")
        assert csv_path.read_text(encoding="utf-8").splitlines()[1].startswith("a,0.500000,0.250000")
        assert (tmp_path / "attack_summary.txt").exists()
        assert write_ecdf(tmp_path / "ecdf" / "a.csv", []) is None
        written = write_ecdf(tmp_path / "ecdf" / "a.csv", [0.1, 0.3])
        assert written.read_text(encoding="utf-8").splitlines() == ["rld,F", "0.100000,0.500000",
                                                                    "0.300000,1.000000"]

    def test_render_examples_marks_changes(self):
        result = AttackResult(outcome=AttackOutcome.SUCCESS, true_label=1, original_paths=["abcd", "wxyz"],
                              adversarial_paths=["abXd", ""], iterations_used=2, epsilon_used=10.0)
        failed = AttackResult(outcome=AttackOutcome.FAILURE, true_label=1, original_paths=["abcd"])
        text = render_examples([failed, result])
        assert "ab[X]d" in text and "(empty decode)" in text
        assert text.count("label=") == 1
