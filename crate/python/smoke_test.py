#!/usr/bin/env python3
"""Smoke test for the gridbench_py extension module.

Build the module first (either profile works):

    cargo build -p gridbench-py            # or --release

then run:

    python3 python/smoke_test.py
"""

import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_module():
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libgridbench_py.so", "gridbench_py.so", "libgridbench_py.dylib")
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("gridbench_py is not built; run `cargo build -p gridbench-py` first")
    newest = max(built, key=lambda p: p.stat().st_mtime)
    stage = Path(tempfile.mkdtemp(prefix="gridbench-py-"))
    shutil.copy2(newest, stage / "gridbench_py.so")
    sys.path.insert(0, str(stage))
    import gridbench_py

    return gridbench_py


def main():
    gb = import_module()
    checks = 0

    def ok(name):
        nonlocal checks
        checks += 1
        print(f"smoke {checks:02d} {name}: PASS")

    # Volume: one household-month is exactly 31 * 96 readings.
    data = gb.generate_month_milli(seed=42, households=1)
    assert len(data) == 1 and len(data[0]) == 2976, "expected 1 x 2976 readings"
    assert all(v >= 0 for v in data[0]), "negative consumption"
    ok("volume-2976-readings")

    # Determinism: same seed, same bytes; different seed, different data.
    again = gb.generate_month_milli(seed=42, households=1)
    assert data == again, "generation is not deterministic"
    assert gb.generate_month_milli(seed=43, households=1) != data
    ok("deterministic-generation")

    # The default tariff partitions the whole month.
    tou = gb.default_bucket_set()
    assert len(tou) == 8
    mask, bounds = gb.build_mask(tou)
    assert sorted(mask) == list(range(2976)), "mask is not a permutation"
    assert sum(length for _, length in bounds) == 2976
    assert all(0 <= tou.classify(s) < 8 for s in range(0, 2976, 7))
    ok("bucket-set-and-mask")

    # Kernel equals the brute-force oracle, exactly, in integer units.
    households = gb.generate_month_milli(seed=7, households=5)
    fast = gb.bill(households, tou, workers=2)
    slow = gb.brute_force_bill(households, tou)
    assert len(fast) == len(slow) == 5
    for f, s in zip(fast, slow):
        assert f.per_bucket_kwh_milli == s.per_bucket_kwh_milli, "kWh mismatch"
        assert f.total_nano == s.total_nano, "amount mismatch"
    ok("kernel-matches-oracle")

    # Worker count changes nothing.
    one = gb.bill(households, tou, workers=1)
    four = gb.bill(households, tou, workers=4)
    assert gb.bill_checksum(one) == gb.bill_checksum(four)
    ok("worker-count-invariance")

    # Energy conservation: billed kWh equals generated kWh.
    total_generated = sum(sum(h) for h in households)
    total_billed = sum(sum(b.per_bucket_kwh_milli) for b in one)
    assert total_generated == total_billed
    ok("energy-conservation")

    # CPP repartition still covers everything and prices differ.
    cpp = gb.default_bucket_set(scheme="cpp")
    assert len(cpp) == 9
    cpp_bills = gb.bill(households, cpp, workers=2)
    assert gb.bill_checksum(cpp_bills) != gb.bill_checksum(one)
    ok("cpp-variant")

    # Full stack: all four storage architectures agree on the bill.
    with tempfile.TemporaryDirectory(prefix="gridbench-out-") as out:
        config = f"""
[run]
architecture = "A1"
cn_count = 1
households_per_cn = 2
repetitions = 1
mcb_workers = [1]
output_dir = "{out}"

[month]
year = 2009
month = 1
days = 28

[datagen]
seed = 5
"""
        checksums = gb.verify_config(config)
        assert [arch for arch, _ in checksums] == ["A1", "A2", "A3", "A4"]
        assert len({s for _, s in checksums}) == 1, f"architectures disagree: {checksums}"
    ok("four-architectures-agree")

    print(f"smoke test: all {checks} checks passed")


if __name__ == "__main__":
    main()
