import numpy as np
import pytest

from roadseg_toy import eval_toy, five_scores, format_report, fscore, threshold_sweep


def random_map(rng, shape=(64, 64)):
    gt = rng.random(shape) > 0.55
    prob = np.where(gt, rng.uniform(0.55, 1.0, shape), rng.uniform(0.0, 0.5, shape))
    return prob, gt


class TestThresholdSweep:
    def test_perfect_oracle_max_f_is_one(self):
        rng = np.random.default_rng(4)
        gt = rng.random((32, 32)) > 0.5
        prob = gt.astype(np.float64)
        max_f, max_t, _ = threshold_sweep(prob, gt)
        assert max_f == 1.0
        assert 0 < max_t < 1

    def test_inverted_oracle_peaks_at_complementary_threshold(self):
        # inverting a separable probability map swaps the class labels:
        # sweeping (1 - p) against the inverted gt reaches the same MaxF,
        # and the mirror of the original argmax also attains it. (The
        # F-score is not class-symmetric, so this only holds exactly for
        # separable maps; non-separable counterexamples are easy.)
        rng = np.random.default_rng(9)
        prob, gt = random_map(rng)  # separable by construction
        max_f, max_t, _ = threshold_sweep(prob, gt, step=0.01)
        inv_f, _, inv_curve = threshold_sweep(1.0 - prob, ~gt, step=0.01)
        assert max_f == 1.0
        assert inv_f == pytest.approx(max_f, abs=1e-12)
        mirrored = {round(t, 2): f for t, f in inv_curve}
        assert mirrored[round(1.0 - max_t, 2)] == pytest.approx(max_f, abs=1e-12)

    def test_sweep_never_beats_oracle(self):
        rng = np.random.default_rng(12)
        prob, gt = random_map(rng)
        max_f, _, curve = threshold_sweep(prob, gt)
        assert max_f <= 1.0
        assert all(f is None or f <= max_f for _, f in curve)


class TestScores:
    def test_fscore_reference_values(self):
        assert five_scores(3, 5, 1, 1)["fscore"] == 0.75
        assert five_scores(0, 1, 2, 3)["fscore"] is None

    def test_fscore_helper(self):
        pred = np.array([[True, True, False]])
        gt = np.array([[True, False, False]])
        assert fscore(pred, gt) == pytest.approx(2 / 3, abs=1e-12)

    def test_report_format(self):
        text = format_report({"fscore": 0.75, "max_f": None, "n_images": 4})
        assert "fscore=0.75\n" in text
        assert "max_f=undefined\n" in text
        assert "n_images=4\n" in text


class TestHeldOut:
    def test_trained_dcsc_generalizes(self, trained_dcsc, toy_test_dir):
        model, _ = trained_dcsc
        report = eval_toy(model, toy_test_dir)
        assert report["n_images"] == 4
        assert report["fscore"] is not None and report["fscore"] >= 0.8
        assert report["max_f"] >= report["fscore"] - 1e-12

    def test_report_is_serializable(self, trained_dcsc, toy_test_dir, tmp_path):
        from roadseg_toy import write_report

        model, _ = trained_dcsc
        report = eval_toy(model, toy_test_dir)
        write_report(report, tmp_path / "report.txt")
        text = (tmp_path / "report.txt").read_text()
        assert any(line.startswith("max_f=") for line in text.splitlines())
