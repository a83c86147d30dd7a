#!/usr/bin/env python3
"""Regenerate the quadrature oracle fixtures consumed by the test suite.

Writes CSV tables under tests/fixtures/ with a content digest line.  The
values come from the adaptive-quadrature oracle only; nothing here touches
the assembled operator, so the fixtures stay an independent reference.

Usage: python3 scripts/make_oracle_fixtures.py [--fixtures-dir DIR]
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from lowregret.oracles import (
    benchmark_profile,
    quadrature_apply,
    save_oracle_table,
)

S_VALUES = (0.25, 0.5, 0.75)
POINTS = (-0.8, -0.5, -0.2, 0.0, 0.2, 0.5, 0.8)
SUPPORT = (-1.0, 1.0)


def biquadratic_bump(x):
    return float(np.clip(1.0 - x * x, 0.0, None) ** 2)


def build_table(profile):
    xs, ss, values, errors = [], [], [], []
    for s in S_VALUES:
        for x in POINTS:
            result = quadrature_apply(lambda y: profile(y, s), x, s, SUPPORT)
            xs.append(x)
            ss.append(s)
            values.append(result.value)
            errors.append(result.error)
    return {"x": xs, "s": ss, "value": values, "error": errors}


def main() -> int:
    default_dir = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--fixtures-dir", default=default_dir)
    args = parser.parse_args()
    os.makedirs(args.fixtures_dir, exist_ok=True)

    path = os.path.join(args.fixtures_dir, "quadrature_bump.csv")
    save_oracle_table(
        path,
        {
            "profile": "biquadratic_bump (1-x^2)_+^2",
            "support": "-1,1",
            "generator": "scripts/make_oracle_fixtures.py",
        },
        build_table(lambda y, s: biquadratic_bump(y)),
    )
    print(f"wrote {path}")

    path = os.path.join(args.fixtures_dir, "quadrature_benchmark.csv")
    save_oracle_table(
        path,
        {
            "profile": "benchmark (1-x^2)_+^s",
            "support": "-1,1",
            "generator": "scripts/make_oracle_fixtures.py",
        },
        build_table(lambda y, s: float(benchmark_profile(y, s))),
    )
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
