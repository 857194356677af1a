#!/usr/bin/env python3
"""Desk-scale acceptance runs for ftseg.

These runs train real models on the synthetic benchmark and take from
minutes (overfit) to about an hour (ordering) on a CPU. They are kept out of
the pytest suite; set FTSEG_JOBS to run ordering seeds in parallel.

Usage:
    python acceptance_runs.py [overfit] [ordering] [gradients]
"""

import sys
import time
import traceback
from functools import partial

import anyio
import anyio.to_thread
import numpy as np
from dotenv import load_dotenv

from ftseg import (
    FTSegSettings,
    GradcheckScope,
    LossKind,
    ModelConfig,
    SyntheticConfig,
    TrainConfig,
    Variant,
    build_model,
    evaluate,
    generate_synthetic,
    presets,
    run_scope,
    train,
)

load_dotenv()

ORDERING_SEEDS = (0, 1, 2)
ORDERING_ROWS = {
    "unet+dl": (Variant.UNET, False, LossKind.DL),
    "unet+ftl": (Variant.UNET, False, LossKind.FTL),
    "attn_multi+ftl": (Variant.ATTN_UNET_MULTI_INPUT, True, LossKind.FTL),
}


def run_overfit() -> bool:
    """Four 64×64 images, 500 SGD steps, final-head Dice ≥ 0.95."""
    print("🔁 Overfit sanity...")
    data = generate_synthetic(
        SyntheticConfig(
            count=4, height=64, width=64, lesion_area_range=(0.15, 0.3), contrast=0.4, seed=0
        )
    )
    model = build_model(ModelConfig(depth=4, base_channels=8))
    cfg = TrainConfig(learning_rate=0.01, momentum=0.9, decay=0.0, epochs=500, batch_size=4)

    train(model, data, cfg)
    dice = evaluate(model, data).dice.mean
    print(f"  dice {dice:.4f}")
    if dice < 0.95:
        print("  ❌ overfit did not reach 0.95")
        return False
    print("  ✓ overfit")
    return True


def run_gradients() -> bool:
    """Every gradient suite within its tolerance."""
    print("∇ Gradient suites...")
    ok = True
    for scope in GradcheckScope:
        for report in run_scope(scope):
            mark = "✓" if report.passed else "❌"
            print(
                f"  {mark} {report.label}: {report.max_rel_err:.3e} (tol {report.tol:g}, "
                f"{report.checked} checked, {report.skipped} skipped)"
            )
            ok &= report.passed
    return ok


def _ordering_seed(seed: int) -> dict[str, tuple[float, float]]:
    cfg = presets.get_config("bus-like", count=250, seed=seed)
    data = generate_synthetic(cfg)
    train_part, test_part = data[:200], data[200:]
    scores = {}
    for label, (variant, deep_supervision, kind) in ORDERING_ROWS.items():
        model = build_model(
            ModelConfig(variant=variant, deep_supervision=deep_supervision, seed=seed)
        )
        train(model, train_part, TrainConfig(epochs=20, loss_kind=kind, seed=seed))
        metrics = evaluate(model, test_part)
        scores[label] = (metrics.dice.mean, metrics.recall.mean)
        print(f"  seed {seed} {label}: dice {scores[label][0]:.4f} recall {scores[label][1]:.4f}")
    return scores


async def run_ordering(jobs: int) -> bool:
    """Recall(U-Net+FTL) ≥ recall(U-Net+DL); dice(Attn+Multi+FTL) ≥ dice(U-Net+DL) + 0.03."""
    print("📊 Ordering on the BUS-like preset (200 train / 50 test, 20 epochs)...")
    limiter = anyio.CapacityLimiter(jobs)
    results: dict[int, dict[str, tuple[float, float]]] = {}

    async def one(seed: int) -> None:
        results[seed] = await anyio.to_thread.run_sync(
            partial(_ordering_seed, seed), limiter=limiter
        )

    async with anyio.create_task_group() as tg:
        for seed in ORDERING_SEEDS:
            tg.start_soon(one, seed)

    def mean(label: str, index: int) -> float:
        return float(np.mean([results[s][label][index] for s in ORDERING_SEEDS]))

    recall_ok = mean("unet+ftl", 1) >= mean("unet+dl", 1)
    gap = mean("attn_multi+ftl", 0) - mean("unet+dl", 0)
    print(f"  recall unet+ftl {mean('unet+ftl', 1):.4f} vs unet+dl {mean('unet+dl', 1):.4f}")
    print(f"  dice gap attn_multi+ftl − unet+dl {gap:+.4f}")
    return recall_ok and gap >= 0.03


async def main(selected: list[str]) -> bool:
    """Main acceptance runner."""
    print("🧪 ftseg - Desk-scale Acceptance Runs")
    print("=" * 60)
    settings = FTSegSettings()

    suites = {
        "gradients": lambda: anyio.to_thread.run_sync(run_gradients),
        "overfit": lambda: anyio.to_thread.run_sync(run_overfit),
        "ordering": lambda: run_ordering(settings.jobs),
    }
    names = selected or list(suites)
    unknown = [n for n in names if n not in suites]
    if unknown:
        print(f"❌ Unknown suites: {', '.join(unknown)}")
        return False

    test_results = []
    for name in names:
        started = time.perf_counter()
        try:
            result = await suites[name]()
        except Exception as e:
            print(f"❌ Suite {name} crashed: {e}")
            traceback.print_exc()
            result = False
        print(f"  ({time.perf_counter() - started:.0f}s)")
        test_results.append(result)

    passed = sum(test_results)
    total = len(test_results)

    print("\n📊 Summary:")
    print("=" * 40)
    print(f"Passed: {passed}/{total}")

    if passed == total:
        print("🎉 All runs passed!")
        return True
    print("⚠️  Some runs failed")
    return False


if __name__ == "__main__":
    success = anyio.run(main, sys.argv[1:])
    sys.exit(0 if success else 1)
