#!/usr/bin/env python3
"""
Attack engine tests: projections, the PGD and FGSM loops, verification,
summaries and trace logging
"""

import numpy as np
import pytest

from src.attacks import engine
from src.attacks.config import (AttackConfig, AttackMethod, AttackOutcome, AttackResult, Projection,
                                table_grid)
from src.attacks.engine import (batch_attack, fgsm_attack, latent_perturbation, pgd_attack, summarize,
                                verify)
from src.attacks.projections import project, project_l2, project_linf, radius
from src.attacks.trace_logger import AttackTraceLogger
from src.data.dataset import Bag
from src.errors import ConfigError, DatasetError, TraceError
from src.metrics.strings import bag_rld
from src.models.autoencoder import StringAutoencoder
from src.models.classifier import build_classifier
from tests.conftest import SAMPLE_PATHS, tiny_classifier_config, tiny_codec_config

PGD = AttackConfig(alpha=2.0, epsilon=3.0, iterations=5, projection=Projection.LINF)
FGSM = AttackConfig(method=AttackMethod.FGSM, epsilon_step=0.05, epsilon_max=1.0)


def correctly_labelled(classifier, codec, paths):
    """Bag whose label is the classifier's own prediction"""
    _, label = classifier.classify(codec.encode_many(paths))
    return Bag(label=label, paths=paths)


@pytest.mark.unit
class TestProjections:
    def test_linf_clamps(self):
        np.testing.assert_array_equal(project_linf(np.array([1.5, -0.3]), 1.0), [1.0, -0.3])

    def test_linf_idempotent(self, rng):
        delta = rng.normal(size=(3, 4)) * 3
        once = project_linf(delta, 1.0)
        np.testing.assert_array_equal(project_linf(once, 1.0), once)
        inside = rng.uniform(-0.5, 0.5, size=(3, 4))
        np.testing.assert_array_equal(project_linf(inside, 1.0), inside)

    def test_l2_scales_rows(self):
        out = project_l2(np.array([[0.0, 2.0], [0.3, 0.4], [0.0, 0.0]]), 1.0)
        np.testing.assert_allclose(out, [[0.0, 1.0], [0.3, 0.4], [0.0, 0.0]])

    def test_l2_idempotent(self, rng):
        once = project_l2(rng.normal(size=(4, 5)) * 4, 2.0)
        np.testing.assert_allclose(project_l2(once, 2.0), once)
        assert radius(once, Projection.L2) <= 2.0 + 1e-12

    def test_none_is_identity(self, rng):
        delta = rng.normal(size=(2, 3)) * 100
        np.testing.assert_array_equal(project(delta, 1.0, Projection.NONE), delta)


@pytest.mark.unit
class TestAttackConfig:
    def test_table_grid_labels(self):
        grid = table_grid()
        assert len(grid) == 19
        assert grid[0].label == "FGSM(delta: 0.01, max_eps: 1.00)"
        assert "PGD(alpha: 2.00, eps: 10.00, projection: linf)" in {c.label for c in grid}

    def test_fgsm_sweep_has_at_most_100_rounds(self):
        epsilons = AttackConfig(method=AttackMethod.FGSM, epsilon_step=0.01, epsilon_max=1.0).fgsm_epsilons()
        assert len(epsilons) == 100
        assert epsilons[-1] == pytest.approx(1.0)

    def test_parse(self):
        config = AttackConfig.parse("pgd:alpha=0.5,eps=5,proj=l2,t=7")
        assert (config.alpha, config.epsilon, config.projection, config.iterations) == (0.5, 5.0,
                                                                                        Projection.L2, 7)
        assert AttackConfig.parse("fgsm:delta=0.1,max_eps=2").fgsm_epsilons()[-1] == pytest.approx(2.0)

    @pytest.mark.parametrize("text", ["bim:alpha=1", "pgd:alpha", "pgd:alpha=-1", "fgsm:delta=2,max_eps=1"])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigError):
            AttackConfig.parse(text)


@pytest.mark.unit
class TestLoops:
    def test_already_misclassified_returns_paths(self, classifier, codec):
        print("[TEST] already misclassified bag")
        _, label = classifier.classify(codec.encode_many(SAMPLE_PATHS[:3]))
        bag = Bag(label=1 - label, paths=SAMPLE_PATHS[:3])
        for config in (PGD, FGSM):
            result = engine.run_attack(classifier, codec, bag, config)
            assert result.outcome == AttackOutcome.ALREADY_MISCLASSIFIED
            assert result.adversarial_paths == bag.paths
        print("[OK] unchanged")

    def test_method_mismatch(self, classifier, codec):
        bag = correctly_labelled(classifier, codec, SAMPLE_PATHS[:2])
        with pytest.raises(ConfigError):
            pgd_attack(classifier, codec, bag, FGSM)
        with pytest.raises(ConfigError):
            fgsm_attack(classifier, codec, bag, PGD)

    def test_pgd_stops_at_first_verified_iterate(self, classifier, codec, mocker):
        bag = correctly_labelled(classifier, codec, SAMPLE_PATHS[:3])
        mocker.patch.object(engine, "verify", side_effect=[(False, ["a"]), (False, ["a"]), (True, ["a", "b"]),
                                                           (True, ["a"])])
        result = pgd_attack(classifier, codec, bag, PGD)
        assert result.outcome == AttackOutcome.SUCCESS
        assert result.iterations_used == 3
        assert len(result.losses) == len(result.iterate_radii) == 3
        assert all(r <= PGD.epsilon + 1e-9 for r in result.iterate_radii)
        assert np.max(np.abs(result.perturbation)) <= PGD.epsilon + 1e-9
        assert len(result.adversarial_paths) == bag.size

    def test_pgd_failure_runs_all_iterations(self, classifier, codec, mocker):
        bag = correctly_labelled(classifier, codec, SAMPLE_PATHS[:2])
        mocker.patch.object(engine, "verify", return_value=(False, ["a"]))
        result = pgd_attack(classifier, codec, bag, PGD)
        assert result.outcome == AttackOutcome.FAILURE
        assert len(result.iterate_radii) == PGD.iterations
        assert result.adversarial_paths == []

    def test_fgsm_sign_step(self, mocker):
        codec = StringAutoencoder(tiny_codec_config(hidden_size=2))
        classifier = build_classifier(tiny_classifier_config(), 2)
        bag = Bag(label=1, paths=["C:\\a.exe"])
        mocker.patch.object(classifier, "classify", return_value=(np.zeros(2), 1))
        mocker.patch.object(classifier, "input_gradient", return_value=(0.7, np.array([[0.3, -0.2]])))
        mocker.patch.object(engine, "verify", return_value=(True, ["C:\\b.exe"]))
        config = AttackConfig(method=AttackMethod.FGSM, epsilon_step=0.5, epsilon_max=1.0)
        result = fgsm_attack(classifier, codec, bag, config)
        assert result.success and result.epsilon_used == 0.5
        np.testing.assert_array_equal(result.perturbation, [[0.5, -0.5]])

    def test_fgsm_computes_the_gradient_once(self, classifier, codec, mocker):
        bag = correctly_labelled(classifier, codec, SAMPLE_PATHS[1:4])
        gradient_spy = mocker.spy(classifier, "input_gradient")
        decode_spy = mocker.spy(codec, "decode_many")
        config = AttackConfig(method=AttackMethod.FGSM, epsilon_step=0.01, epsilon_max=1.0)
        result = fgsm_attack(classifier, codec, bag, config)
        assert gradient_spy.call_count == 1
        assert decode_spy.call_count <= 100
        assert decode_spy.call_count == result.iterations_used

    def test_verify_drops_empty_decodes(self, classifier, codec):
        assert verify(classifier, codec, ["", ""], 0) == (False, [])
        fooled, realized = verify(classifier, codec, ["", SAMPLE_PATHS[0]], 0)
        assert realized == [SAMPLE_PATHS[0]]

    def test_latent_perturbation_stays_in_ball(self, classifier, rng):
        latents = rng.normal(size=(3, classifier.latent_size))
        delta = latent_perturbation(classifier, latents, 0, PGD)
        assert np.max(np.abs(delta)) <= PGD.epsilon + 1e-9
        fgsm_delta = latent_perturbation(classifier, latents, 0, FGSM)
        assert set(np.unique(np.abs(fgsm_delta))) <= {0.0, FGSM.epsilon_max}

    def test_larger_epsilon_never_lowers_successes(self, mocker):
        print("[TEST] success count is monotone in epsilon at fixed alpha")
        codec = StringAutoencoder(tiny_codec_config(hidden_size=4))
        classifier = build_classifier(tiny_classifier_config(), 4)
        bags = [correctly_labelled(classifier, codec, [path]) for path in SAMPLE_PATHS]
        mocker.patch.object(classifier, "input_gradient", return_value=(0.0, np.array([[1.0, -1.0, 1.0, -1.0]])))
        tight = AttackConfig(alpha=2.0, epsilon=2.0, iterations=4, projection=Projection.LINF)
        loose = tight.model_copy(update={"epsilon": 10.0})
        tight_results, tight_summary = batch_attack(classifier, codec, bags, tight)
        loose_results, loose_summary = batch_attack(classifier, codec, bags, loose)
        for small, large in zip(tight_results, loose_results):
            if small.success:
                assert large.success and large.iterations_used <= 2
            else:
                assert max(small.iterate_radii) <= 2.0 + 1e-9
        assert loose_summary.successes >= tight_summary.successes
        print(f"[OK] {tight_summary.successes} -> {loose_summary.successes} successes")


@pytest.mark.integration
class TestBatchAttack:
    def test_successes_are_verified_end_to_end(self, classifier, codec, small_corpus):
        print("[TEST] end-to-end validity of successful attacks")
        for config in (PGD, AttackConfig(alpha=1.0, epsilon=2.0, iterations=5, projection=Projection.L2), FGSM):
            results, summary = batch_attack(classifier, codec, small_corpus, config)
            assert len(results) == len(small_corpus)
            for bag, result in zip(small_corpus, results):
                assert result.original_paths == bag.paths
                if result.success:
                    _, label = classifier.classify(codec.encode_many(result.realized_paths))
                    assert label != bag.label
                    assert len(result.adversarial_paths) == bag.size
                if config.method == AttackMethod.PGD:
                    assert all(r <= config.epsilon + 1e-9 for r in result.iterate_radii)
            assert summary.total == len(small_corpus)
        print("[OK] every success re-classifies as wrong")

    def test_threads_do_not_change_results(self, classifier, codec, small_corpus):
        serial, _ = batch_attack(classifier, codec, small_corpus[:8], PGD, threads=1)
        parallel, _ = batch_attack(classifier, codec, small_corpus[:8], PGD, threads=4)
        assert [r.outcome for r in serial] == [r.outcome for r in parallel]
        assert [r.adversarial_paths for r in serial] == [r.adversarial_paths for r in parallel]
        assert [r.losses for r in serial] == [r.losses for r in parallel]

    def test_empty_bag_list(self, classifier, codec):
        with pytest.raises(DatasetError):
            batch_attack(classifier, codec, [], PGD)

    def test_trace_file_per_method(self, classifier, codec, small_corpus, tmp_path):
        trace = AttackTraceLogger(str(tmp_path / "traces"))
        results, _ = batch_attack(classifier, codec, small_corpus[:5], PGD, trace=trace)
        records = trace.read_traces(PGD)
        assert [r["index"] for r in records] == list(range(5))
        assert trace.get_stats(PGD)["total"] == 5
        assert records[0]["outcome"] == results[0].outcome.value
        batch_attack(classifier, codec, small_corpus[:2], PGD, trace=trace)
        assert trace.get_stats(PGD)["total"] == 2

    def test_unwritable_trace_raises(self, classifier, codec, small_corpus, tmp_path):
        print("[TEST] lost trace records")
        trace = AttackTraceLogger(str(tmp_path / "traces"))
        trace.trace_file(PGD).mkdir()
        with pytest.raises(TraceError):
            trace.log_result(0, result_of(AttackOutcome.FAILURE), PGD)
        with pytest.raises(TraceError):
            batch_attack(classifier, codec, small_corpus[:2], PGD, trace=trace)
        print("[OK] write failures surface as TraceError")

    def test_incomplete_trace_detected(self, tmp_path):
        trace = AttackTraceLogger(str(tmp_path / "traces"))
        trace.start(PGD)
        trace.log_result(0, result_of(AttackOutcome.FAILURE), PGD)
        assert trace.check_complete(PGD, 1)["outcomes"] == {"failure": 1}
        with pytest.raises(TraceError):
            trace.check_complete(PGD, 2)


def result_of(outcome, original=("abcd",), adversarial=()):
    return AttackResult(outcome=outcome, true_label=1, original_paths=list(original),
                        adversarial_paths=list(adversarial))


@pytest.mark.unit
class TestSummaries:
    def test_all_already_misclassified_is_undefined(self):
        summary = summarize([result_of(AttackOutcome.ALREADY_MISCLASSIFIED)] * 3, PGD)
        assert summary.success_rate is None
        assert summary.success_rate_display == "n/a"
        assert summary.mean_rld is None

    def test_all_failures_is_zero(self):
        summary = summarize([result_of(AttackOutcome.FAILURE)] * 4, PGD)
        assert summary.success_rate == 0.0

    def test_rate_excludes_already_misclassified(self):
        results = [result_of(AttackOutcome.SUCCESS, ("abcd", "wxyz"), ("abce", "")),
                   result_of(AttackOutcome.FAILURE),
                   result_of(AttackOutcome.ALREADY_MISCLASSIFIED)]
        summary = summarize(results, PGD)
        assert summary.success_rate == pytest.approx(0.5)
        expected, empty = bag_rld(["abcd", "wxyz"], ["abce", ""])
        assert summary.mean_rld == pytest.approx(expected)
        assert summary.empty_decodes == empty == 1
        assert summary.method == PGD.label
