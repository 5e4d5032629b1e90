"""End-to-end acceptance checks for the prompt-construction toolkit.

Each test covers one acceptance criterion, prints exactly one
``[PASS]``/``[FAIL]`` verdict line with the measured numbers (visible under
``pytest -s``), and fails with the collected reasons if any check missed.
Tolerances are pinned in the asserts, not derived at runtime.
"""

import json
import math
import random
import time

from koti import (
    DEFAULT_HP,
    Note,
    SamplingPlan,
    ToyScorer,
    build_prompt,
    chunk_runs,
    confusion_matrix,
    evaluate,
    generate_synthetic,
    macro_f1,
    per_class_prf,
    split_at_first_flagged,
    stable_softmax,
    write_dataset,
)
from koti.cli import main as cli_main

from oracles import oracle_macro_f1, oracle_prf


def verdict(name: str, detail: str, failures: list[str]) -> None:
    status = "FAIL" if failures else "PASS"
    print(f"[{status}] {name}: {detail}")
    assert not failures, f"{name}: " + "; ".join(failures)


def make_check(failures: list[str]):
    def check(cond: bool, message: str) -> None:
        if not cond:
            failures.append(message)

    return check


def strip_template(prompt, before_len: int, after_len: int) -> tuple:
    """Remove the inserted template span (before + mask + after) from a prompt."""
    t0 = prompt.mask_index - before_len
    t1 = prompt.mask_index + 1 + after_len
    return prompt.tokens[:t0] + prompt.tokens[t1:]


def test_criterion_1_position_only_equivalence(synthetic_task):
    """KOTI and STI-k keep identical tokens; only the template position moves."""
    failures: list[str] = []
    check = make_check(failures)
    t_start = time.monotonic()

    corpora = [
        (generate_synthetic(synthetic_task, {"Yes": 260, "No": 260},
                            note_tokens=300, salient_depth=150, seed=21), 128),
        (generate_synthetic(synthetic_task, {"Yes": 260, "No": 260},
                            note_tokens=80, salient_depth=40, seed=22), 64),
    ]
    compared = 0
    mismatches = 0
    for notes, max_input in corpora:
        scorer = ToyScorer(synthetic_task, max_input_tokens=max_input)
        before_len = len(scorer.tokenize(synthetic_task.template.text_before_mask))
        after_len = len(scorer.tokenize(synthetic_task.template.text_after_mask))
        for note in notes:
            koti = build_prompt("koti", note, synthetic_task, scorer)
            stik = build_prompt("sti-k", note, synthetic_task, scorer)
            check(not koti.fallback_used, f"{note.id}: unexpected fallback (no keyword?)")
            if strip_template(koti, before_len, after_len) != strip_template(
                stik, before_len, after_len
            ):
                mismatches += 1
            compared += 1

    elapsed = time.monotonic() - t_start
    check(compared >= 1000, f"only {compared} notes compared, need >= 1000")
    check(mismatches == 0, f"{mismatches} of {compared} note token sequences differ")
    check(elapsed < 10.0, f"took {elapsed:.1f}s, limit 10s")
    verdict(
        "C1 position-only equivalence",
        f"{compared} notes, {mismatches} mismatches ({elapsed:.1f}s)",
        failures,
    )


def test_criterion_2_budget_safety_and_proportionality(synthetic_task):
    """Every prompt fits its budget; head/tail shares follow the exact split."""
    failures: list[str] = []
    check = make_check(failures)
    t_start = time.monotonic()

    def make_note(length: int, with_keyword: bool) -> Note:
        words = [f"w{i}" for i in range(length)]
        for i in range(6, length, 7):
            words[i] += "."
        if with_keyword and length >= 3:
            d = min(length - 3, max(0, length // 3))
            words[d:d + 3] = ["patient", "reports", "cramps."]
        return Note(id=f"len{length}", text=" ".join(words))

    rng = random.Random(0)
    cases = [(0, 16), (1, 16), (2, 19), (4096, 16), (4096, 512), (511, 512),
             (512, 512), (513, 512)]
    cases += [(rng.randint(0, 4096), rng.randint(16, 512)) for _ in range(400)]

    checked_prompts = 0
    checked_splits = 0
    for case_index, (length, budget) in enumerate(cases):
        with_keyword = case_index % 5 != 4
        note = make_note(length, with_keyword)
        # Capacity that leaves exactly `budget` tokens for the note.
        scorer = ToyScorer(synthetic_task, max_input_tokens=budget + 4)
        for method in ("koti", "sti-k", "sti-s"):
            p = build_prompt(method, note, synthetic_task, scorer)
            limit = scorer.max_input_tokens - scorer.special_overhead
            check(len(p.tokens) <= limit,
                  f"{method} len={length} budget={budget}: {len(p.tokens)} > {limit}")
            check(len(p.tokens) == min(length, budget) + 2,
                  f"{method} len={length} budget={budget}: kept wrong token count")
            check(p.tokens.count(scorer.mask_token) == 1,
                  f"{method} len={length}: mask count != 1")
            check(p.tokens[p.mask_index] == scorer.mask_token,
                  f"{method} len={length}: mask_index misses the mask")
            check(p.truncation.budget == budget,
                  f"{method} len={length}: recorded budget {p.truncation.budget}")
            overflow = max(0, length - budget)
            rec = p.truncation
            check(rec.removed_head_a + rec.removed_tail_b == overflow,
                  f"{method} len={length} budget={budget}: removed "
                  f"{rec.removed_head_a}+{rec.removed_tail_b} != {overflow}")
            checked_prompts += 1

            if method == "koti" and not p.fallback_used and overflow > 0:
                parts = split_at_first_flagged(note.text, synthetic_task.keywords)
                len_a = len(scorer.tokenize(parts[0]))
                len_b = len(scorer.tokenize(parts[1]))
                total = len_a + len_b
                raw = (2 * overflow * len_a + total) // (2 * total)
                if max(0, overflow - len_b) <= raw <= min(overflow, len_a):
                    ideal = overflow * len_a / total
                    check(abs(rec.removed_head_a - ideal) <= 1.0,
                          f"len={length} budget={budget}: share {rec.removed_head_a} "
                          f"vs ideal {ideal:.2f}")
                    checked_splits += 1

    elapsed = time.monotonic() - t_start
    check(checked_splits >= 50, f"only {checked_splits} proportional splits exercised")
    check(elapsed < 10.0, f"took {elapsed:.1f}s, limit 10s")
    verdict(
        "C2 budget safety & proportionality",
        f"{checked_prompts} prompts, {checked_splits} proportional splits ({elapsed:.1f}s)",
        failures,
    )


def test_criterion_3_zero_shot_ordering(synthetic_task, ordering_corpus):
    """Deep evidence: keyword-anchored insertion beats both baselines."""
    failures: list[str] = []
    check = make_check(failures)
    t_start = time.monotonic()

    plan = SamplingPlan(mode="balanced", size=0, runs=10, seed=0)
    means = {}
    for method in ("koti", "sti-k", "sti-s"):
        scorer = ToyScorer(synthetic_task, max_input_tokens=504)  # note budget 500
        report = evaluate(synthetic_task, ordering_corpus, method, scorer, plan)
        check(not report.partial, f"{method}: runs did not all complete")
        means[method] = report.mean_primary

    elapsed = time.monotonic() - t_start
    check(means["koti"] >= 0.90, f"koti macro-F1 {means['koti']:.4f} < 0.90")
    check(means["sti-k"] >= means["koti"] - 0.25,
          f"sti-k {means['sti-k']:.4f} more than 0.25 below koti")
    check(means["sti-k"] <= means["koti"] - 0.02,
          f"sti-k {means['sti-k']:.4f} less than 0.02 below koti")
    check(means["sti-s"] <= 0.50, f"sti-s {means['sti-s']:.4f} > 0.50")
    check(means["koti"] > means["sti-k"] > means["sti-s"],
          f"ordering violated: {means}")
    check(elapsed < 60.0, f"took {elapsed:.1f}s, limit 60s")
    verdict(
        "C3 zero-shot ordering",
        f"koti={means['koti']:.4f} sti-k={means['sti-k']:.4f} "
        f"sti-s={means['sti-s']:.4f} ({elapsed:.1f}s)",
        failures,
    )


def test_criterion_4_balanced_vs_random_few_shot(minority_task, minority_corpus):
    """Balanced sampling lifts minority-class F1 at matched train budgets."""
    failures: list[str] = []
    check = make_check(failures)
    t_start = time.monotonic()

    minority = minority_task.classes[-1]  # "Unknown", 10% of the corpus

    def minority_f1(plan: SamplingPlan) -> float:
        scorer = ToyScorer(minority_task)
        report = evaluate(minority_task, minority_corpus, "koti", scorer, plan, DEFAULT_HP)
        ok = [r for r in report.runs if r.status == "ok"]
        check(len(ok) == plan.runs, f"{plan.mode}:{plan.size}: only {len(ok)} runs ok")
        return sum(r.per_class[minority]["f1"] for r in ok) / len(ok)

    gaps = {}
    for k in (1, 4):
        balanced = minority_f1(SamplingPlan(mode="balanced", size=k, runs=10, seed=0))
        matched = minority_f1(SamplingPlan(mode="random", size=3 * k, runs=10, seed=0))
        gaps[k] = balanced - matched
        check(gaps[k] >= 0.05,
              f"k={k}: balanced {balanced:.4f} vs random {matched:.4f}, gap < 0.05")

    elapsed = time.monotonic() - t_start
    check(elapsed < 120.0, f"took {elapsed:.1f}s, limit 120s")
    verdict(
        "C4 balanced-vs-random few-shot",
        f"minority-F1 gap k=1: {gaps[1]:.4f}, k=4: {gaps[4]:.4f} ({elapsed:.1f}s)",
        failures,
    )


def test_criterion_5_metric_oracle():
    """Metrics equal a brute-force reimplementation, exactly."""
    failures: list[str] = []
    check = make_check(failures)

    m = confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], 2)
    worked = macro_f1(m)
    check(abs(worked - 0.7333333333) <= 1e-9,
          f"worked example macro-F1 {worked!r} not 0.7333333333 +/- 1e-9")

    rng = random.Random(99)
    mismatches = 0
    for _ in range(1000):
        n_classes = rng.randint(2, 6)
        n = rng.randint(1, 40)
        gold = [rng.randrange(n_classes) for _ in range(n)]
        pred = [rng.randrange(n_classes) for _ in range(n)]
        matrix = confusion_matrix(gold, pred, n_classes)
        ours = per_class_prf(matrix)
        ref = oracle_prf(gold, pred, n_classes)
        exact = all(
            (ours[c]["precision"], ours[c]["recall"], ours[c]["f1"]) == ref[c]
            for c in range(n_classes)
        ) and macro_f1(matrix) == oracle_macro_f1(gold, pred, n_classes)
        mismatches += 0 if exact else 1
    check(mismatches == 0, f"{mismatches} of 1000 random matrices disagree")
    verdict(
        "C5 metric oracle",
        f"worked macro-F1 {worked:.10f}, 1000 random matrices exact",
        failures,
    )


def test_criterion_6_softmax_verbalizer():
    failures: list[str] = []
    check = make_check(failures)

    probs = stable_softmax([2.0, 1.0])
    check(abs(probs[0] - 0.7311) <= 1e-4 and abs(probs[1] - 0.2689) <= 1e-4,
          f"softmax([2,1]) = {list(probs)}")

    rng = random.Random(5)
    worst_shift = 0.0
    for _ in range(200):
        logits = [rng.uniform(-30, 30) for _ in range(rng.randint(2, 6))]
        shift = rng.uniform(-100, 100)
        base = stable_softmax(logits)
        moved = stable_softmax([x + shift for x in logits])
        worst_shift = max(worst_shift, max(abs(a - b) for a, b in zip(base, moved)))
    check(worst_shift <= 1e-9, f"shift invariance error {worst_shift:.2e} > 1e-9")

    wide = stable_softmax([0.0, 100.0])
    check(all(math.isfinite(p) for p in wide), f"softmax([0,100]) = {list(wide)}")

    verdict(
        "C6 softmax verbalizer",
        f"[2,1] -> [{probs[0]:.4f}, {probs[1]:.4f}], "
        f"worst shift error {worst_shift:.2e}, [0,100] finite",
        failures,
    )


def test_criterion_7_gradient_check(synthetic_task):
    """Analytic training gradients match central finite differences."""
    failures: list[str] = []
    check = make_check(failures)

    rng = random.Random(0)
    h = 1e-6
    vocab = ["cramps", "filler", "denies", "stable", "visit", "no"]
    words = ("unknown", "yes", "no")
    checked = 0
    worst = 0.0
    for _ in range(100):
        sc = ToyScorer(synthetic_task, max_input_tokens=64)
        prepared = []
        for _ in range(rng.randint(1, 4)):
            length = rng.randint(3, 12)
            tokens = [rng.choice(vocab) for _ in range(length)]
            mask_at = rng.randrange(length + 1)
            tokens.insert(mask_at, sc.mask_token)
            prepared.append((sc._features(tuple(tokens), mask_at), rng.randrange(3)))
        for word in words:
            sc._bias[word] = rng.uniform(-0.5, 0.5)
        _, grad_b, grad_w = sc._loss_and_grads(prepared)

        def loss_now():
            return sc._loss_and_grads(prepared, grads=False)[0]

        def probe(container, key, grad):
            nonlocal checked, worst
            saved = container.get(key, 0.0)
            container[key] = saved + h
            upper = loss_now()
            container[key] = saved - h
            lower = loss_now()
            container[key] = saved
            numeric = (upper - lower) / (2 * h)
            rel = abs(numeric - grad) / max(1.0, abs(grad))
            worst = max(worst, rel)
            checked += 1

        for word, g in grad_b.items():
            probe(sc._bias, word, g)
        for (eff, word), g in grad_w.items():
            probe(sc._delta.setdefault(eff, {}), word, g)

    check(checked >= 500, f"only {checked} parameters probed")
    check(worst <= 1e-4, f"worst relative error {worst:.3e} > 1e-4")
    verdict(
        "C7 gradient check",
        f"{checked} parameters on 100 instances, worst relative error {worst:.3e}",
        failures,
    )


def test_criterion_8_chunk_run_estimator():
    failures: list[str] = []
    check = make_check(failures)
    got = (chunk_runs(1568, 512), chunk_runs(512, 512), chunk_runs(513, 512))
    check(got == (4, 1, 2), f"chunk runs {got} != (4, 1, 2)")
    verdict("C8 chunk-run estimator", f"(1568, 512, 513) @512 -> {got}", failures)


def test_criterion_9_deterministic_reports(tmp_path, synthetic_task, capsys):
    """The eval command writes byte-identical reports for identical flags."""
    failures: list[str] = []
    check = make_check(failures)

    corpus = generate_synthetic(
        synthetic_task, {"Yes": 6, "No": 6, "Unknown": 6},
        note_tokens=40, salient_depth=15, seed=19,
    )
    data = tmp_path / "corpus.jsonl"
    write_dataset(corpus, data)

    outputs = []
    for name in ("first.json", "second.json"):
        out = tmp_path / name
        code = cli_main([
            "eval", "--task", "synthetic", "--data", str(data),
            "--method", "koti", "--plan", "balanced:2", "--runs", "3",
            "--out", str(out),
        ])
        capsys.readouterr()
        check(code == 0, f"eval run {name} exited {code}")
        outputs.append(out.read_bytes())

    identical = outputs[0] == outputs[1]
    check(identical, "reports differ between identical invocations")
    report = json.loads(outputs[0])
    check(report["aggregate"]["runs_total"] == 3, "unexpected run count in report")
    verdict(
        "C9 deterministic reports",
        f"{len(outputs[0])} bytes, identical={identical}",
        failures,
    )
