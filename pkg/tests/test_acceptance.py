"""End-to-end acceptance checks.

Each test prints a single PASS/FAIL line so a full run reads as a
checklist.  Tolerances are pinned in the assertions; the trend checks
(criteria 6 and 7) share the session-scoped synthetic corpus fixture.
"""

import time

import numpy as np
import pytest

from conftest import OPERATING_COVERAGE, SWEEP_FRACTIONS
from oracles import brute_force_alignment_cost, brute_force_best_der, random_timeline
from scriptdiar.align import AsrWord, DialogueLine, align
from scriptdiar.cli import main
from scriptdiar.cluster import (
    ClusterParams,
    constrained_kmeans,
    diarize_unsupervised,
    estimate_k,
    kmeans,
    refine,
    spectral_embed,
)
from scriptdiar.core import PseudoLabeling, TimeInterval
from scriptdiar.metrics import corpus_significance, der
from scriptdiar.synth import SynthConfig, generate_episode


def report(name: str, ok: bool, detail: str = ""):
    line = f"{'PASS' if ok else 'FAIL'}  {name}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


def random_pseudo(rng, n, k_prime):
    labels = np.zeros(n, dtype=np.int64)
    if k_prime:
        n_labeled = int(rng.integers(k_prime, max(k_prime, n // 2) + 1))
        idx = rng.choice(n, size=n_labeled, replace=False)
        labels[idx] = rng.integers(1, k_prime + 1, size=n_labeled)
        labels[idx[:k_prime]] = np.arange(1, k_prime + 1)
    names = {j: f"N{j}" for j in range(1, k_prime + 1)}
    return PseudoLabeling(labels=labels, names=names)


def test_01_constraint_preservation():
    rng = np.random.default_rng(101)
    start = time.monotonic()
    violations = 0
    for _ in range(1000):
        n = int(rng.integers(5, 501))
        k = int(rng.integers(1, 21))
        k_prime = int(rng.integers(0, min(k, n) + 1))
        k_tilde = int(rng.integers(1, min(k, n) + 1))
        if max(k_tilde, k_prime) > n:
            k_tilde = min(k_tilde, n)
        d = int(rng.integers(2, 9))
        E = rng.normal(size=(n, d))
        pseudo = random_pseudo(rng, n, k_prime)
        result = constrained_kmeans(E, pseudo, k_tilde, seed=int(rng.integers(10000)))
        mask = pseudo.labels > 0
        if not np.array_equal(result.labels[mask], pseudo.labels[mask]):
            violations += 1
    elapsed = time.monotonic() - start
    report(
        "criterion 1: constraint preservation (1000 runs)",
        violations == 0 and elapsed < 60.0,
        f"{violations} violations, {elapsed:.1f}s",
    )


def test_02_degradation_oracle():
    rng = np.random.default_rng(102)
    start = time.monotonic()
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(5, 200))
        k = int(rng.integers(1, min(n, 15) + 1))
        E = rng.normal(size=(n, int(rng.integers(2, 8))))
        seed = int(rng.integers(10000))
        empty = PseudoLabeling(labels=np.zeros(n, dtype=np.int64), names={})
        a = constrained_kmeans(E, empty, k_tilde=k, seed=seed)
        b = kmeans(E, k, seed=seed)
        if not np.array_equal(a.labels, b.labels):
            mismatches += 1
    elapsed = time.monotonic() - start
    report(
        "criterion 2: k'=0 degrades bitwise to kmeans (100 runs)",
        mismatches == 0 and elapsed < 10.0,
        f"{mismatches} mismatches, {elapsed:.1f}s",
    )


def test_03_alignment_optimality():
    rng = np.random.default_rng(103)
    start = time.monotonic()
    vocab = ["aa", "bb", "cc", "dd", "ee"]
    worst = 0.0
    for _ in range(200):
        n_l = int(rng.integers(0, 7))
        n_w = int(rng.integers(0, 13))
        lines = [
            DialogueLine(
                index=i,
                speaker_name="S",
                text=" ".join(rng.choice(vocab, size=int(rng.integers(1, 4)))),
            )
            for i in range(n_l)
        ]
        words = [
            AsrWord(token=str(rng.choice(vocab)), interval=TimeInterval(float(j), j + 1.0))
            for j in range(n_w)
        ]
        result = align(lines, words, max_span=4)
        oracle = brute_force_alignment_cost(
            lines, words, max_span=4, delta=result.deletion_penalty
        )
        worst = max(worst, abs(result.total_cost - oracle))
    elapsed = time.monotonic() - start
    report(
        "criterion 3: alignment DP matches brute force (200 instances)",
        worst < 1e-9 and elapsed < 60.0,
        f"max |cost diff| {worst:.2e}, {elapsed:.1f}s",
    )


def test_04_der_hungarian_oracle():
    rng = np.random.default_rng(104)
    start = time.monotonic()
    worst = 0.0
    for _ in range(100):
        ref = random_timeline(
            rng, n_speakers=int(rng.integers(1, 7)), n_turns=int(rng.integers(1, 21))
        )
        hyp = random_timeline(
            rng, n_speakers=int(rng.integers(1, 7)), n_turns=int(rng.integers(1, 21))
        )
        got = der(ref, hyp, collar=0.0).der
        best = brute_force_best_der(ref, hyp)
        denom = max(abs(best), 1e-12)
        worst = max(worst, abs(got - best) / denom)
    elapsed = time.monotonic() - start
    report(
        "criterion 4: DER with Hungarian matches best mapping (100 timelines)",
        worst < 1e-9 and elapsed < 30.0,
        f"max rel diff {worst:.2e}, {elapsed:.1f}s",
    )


def test_05_eigen_gap_recovery():
    rng = np.random.default_rng(105)
    hits = 0
    trials = 0
    for k_true in range(2, 11):
        for _ in range(12):
            if trials == 100:
                break
            sizes = [int(rng.integers(20, 36)) for _ in range(k_true)]
            n = sum(sizes)
            A = np.zeros((n, n))
            at = 0
            for s in sizes:
                A[at : at + s, at : at + s] = 1.0
                at += s
            eigenvalues = spectral_embed(refine(A), 1).eigenvalues
            if estimate_k(eigenvalues, k_max=15) == k_true:
                hits += 1
            trials += 1
    report(
        "criterion 5: eigen-gap recovers k on clean blocks",
        hits == trials == 100,
        f"{hits}/{trials}",
    )


def test_06_speaker_count_property(corpus_runs):
    start = time.monotonic()
    unsup_err = np.mean([abs(r.unsup_k - r.k_true) for r in corpus_runs])
    semi_err = np.mean(
        [abs(r.semi[OPERATING_COVERAGE]["k"] - r.k_true) for r in corpus_runs]
    )
    signed = np.mean([r.unsup_k - r.k_true for r in corpus_runs])
    elapsed = time.monotonic() - start
    report(
        "criterion 6: semi-supervised k closer to truth, unsupervised underestimates",
        semi_err < unsup_err and signed < 0.0,
        f"|k err| semi {semi_err:.1f} vs unsup {unsup_err:.1f}, "
        f"unsup bias {signed:+.1f}",
    )


def test_07a_improvement_significance(corpus_runs):
    semi_der = [r.semi[OPERATING_COVERAGE]["der"] for r in corpus_runs]
    unsup_der = [r.unsup_der for r in corpus_runs]
    semi_scd = [r.semi[OPERATING_COVERAGE]["scd"] for r in corpus_runs]
    unsup_scd = [r.unsup_scd for r in corpus_runs]
    p_der = corpus_significance(semi_der, unsup_der)
    p_scd = corpus_significance(semi_scd, unsup_scd)
    ok = (
        np.mean(semi_der) < np.mean(unsup_der)
        and np.mean(semi_scd) > np.mean(unsup_scd)
        and p_der < 0.01
        and p_scd < 0.01
    )
    report(
        "criterion 7a: semi-supervised beats unsupervised at p<0.01",
        ok,
        f"DER {np.mean(semi_der):.3f}<{np.mean(unsup_der):.3f} p={p_der:.1e}; "
        f"SCD {np.mean(semi_scd):.3f}>{np.mean(unsup_scd):.3f} p={p_scd:.1e}",
    )


def test_07b_fraction_trend(corpus_runs):
    mean_der = {
        f: np.mean([r.semi[f]["der"] for r in corpus_runs]) for f in SWEEP_FRACTIONS
    }
    mean_scd_001 = np.mean([r.semi[0.01]["scd"] for r in corpus_runs])
    unsup_scd = np.mean([r.unsup_scd for r in corpus_runs])
    monotone = all(
        mean_der[hi] <= mean_der[lo] + 0.01
        for lo, hi in zip(SWEEP_FRACTIONS, SWEEP_FRACTIONS[1:])
    )
    ok = monotone and mean_scd_001 > unsup_scd
    chain = " -> ".join(f"{mean_der[f]:.3f}" for f in SWEEP_FRACTIONS)
    report(
        "criterion 7b: DER improves with coverage; tiny coverage helps SCD",
        ok,
        f"DER {chain}; SCD@0.01 {mean_scd_001:.3f} vs unsup {unsup_scd:.3f}",
    )


def test_08_k_override_contract():
    rng = np.random.default_rng(108)
    ok = True
    cfg = SynthConfig(n_speakers=5, runtime=150.0, embedding_dim=16, seed=42)
    episode = generate_episode(cfg)
    for k_prime in (1, 3, 7, 12):
        _, result = diarize_unsupervised(
            episode.embeddings, ClusterParams(), k_override=k_prime, seed=0
        )
        ok = ok and result.k == k_prime
    report("criterion 8: k_override pins the final cluster count", ok)


def test_09_cli_determinism(tmp_path):
    ep = tmp_path / "ep"
    assert (
        main(
            [
                "synth", "--out", str(ep),
                "--n-speakers", "4", "--runtime", "150",
                "--embedding-dim", "16", "--noise", "0.2", "--seed", "5",
            ]
        )
        == 0
    )
    assert main(["extract", "--episode", str(ep)]) == 0
    outputs = []
    for trial in range(10):
        out = tmp_path / f"run{trial}"
        assert main(["diarize", "--episode", str(ep), "--method", "semi", "--out", str(out)]) == 0
        outputs.append(
            (out / "hypothesis_semi.rttm").read_bytes()
            + (out / "cluster_result_semi.json").read_bytes()
        )
    identical = sum(o == outputs[0] for o in outputs)
    report(
        "criterion 9: CLI re-runs byte-identical (10 trials)",
        identical == 10,
        f"{identical}/10",
    )


def test_10_scale_one_hour():
    # runtime is padded so that after gaps the speech itself is about an hour
    cfg = SynthConfig(n_speakers=40, runtime=4150.0, seed=77)
    episode = generate_episode(cfg)
    n = episode.embeddings.n
    start = time.monotonic()
    diarize_unsupervised(episode.embeddings, ClusterParams(), seed=0)
    elapsed = time.monotonic() - start
    report(
        "criterion 10: one-hour episode diarizes in under 60 s",
        n >= 3500 and elapsed < 60.0,
        f"{n} sub-segments, {elapsed:.1f}s",
    )
