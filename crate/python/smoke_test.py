#!/usr/bin/env python3
"""Smoke test for the mppp_py extension module.

Loads the cdylib straight from the cargo target directory (no install step),
runs a small end-to-end pipeline, and spot-checks the closed-form references.
Exits nonzero on the first failure.

Usage: python3 python/smoke_test.py [path/to/libmppp_py.so]
"""

import importlib.util
import math
import sys
from pathlib import Path


def load_module():
    root = Path(__file__).resolve().parent.parent
    candidates = [Path(a) for a in sys.argv[1:]] or [
        root / "target" / "debug" / "libmppp_py.so",
        root / "target" / "release" / "libmppp_py.so",
    ]
    for path in candidates:
        if path.exists():
            spec = importlib.util.spec_from_file_location("mppp_py", path)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            print(f"loaded {path}")
            return module
    sys.exit(f"error: no extension module found; tried {[str(c) for c in candidates]}\n"
             "build it first: cargo build -p mppp-py")


def check(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else ""))
    if not ok:
        sys.exit(1)


def main():
    m = load_module()

    # Expression round trip and evaluation.
    e = m.Expr("-x^2 + sin(t)")
    got = e.eval([3.0], 0.5)
    check("expr eval", abs(got - (-9.0 + math.sin(0.5))) < 1e-15, f"value {got}")
    try:
        m.Expr("2x")
        check("expr rejects juxtaposition", False)
    except ValueError as err:
        check("expr rejects juxtaposition", "offset" in str(err) or str(err) != "", str(err))

    # Small end-to-end run: mean-reverting drift toward growth, unit noise.
    sys_ = m.SdeSystem(1, ["x"], ["1"], [1.0], "ou")
    grid = m.SimGrid(1.0, 64, 4096, m.DEFAULT_MASTER_SEED)
    ens = m.simulate(sys_, grid)
    check("ensemble shape",
          ens.n_paths == 4096 and ens.n_steps == 64 and ens.dim == 1
          and len(ens.times) == 65 and ens.diverged_count == 0)
    check("initial slice is the start state",
          ens.slice_component(0, 0) == [1.0] * 4096)

    kcfg = m.KdeConfig()
    curve = m.compute_mppp(ens, kcfg)
    check("curve shape", curve.n_slices == 65 and curve.dim == 1)
    check("slice zero mode is exact", curve.mode_at(0) == [1.0])

    report = m.score_against_ou(curve, 1.0, 1.0, 1.0)
    rel = report.endpoint_rel_error
    check("endpoint tracks e^t at law accuracy", rel is not None and rel < 0.25,
          f"relative error {rel:.4f}")
    check("oracle curve exposed", len(report.oracle_curve) == 65)

    # Streaming extraction is bit-identical to the stored-ensemble curve.
    streamed = m.compute_mppp_streaming(sys_, grid, kcfg)
    check("streaming curve matches stored", streamed.modes_flat() == curve.modes_flat())

    # Same seed, same curve; different seed, different curve.
    again = m.compute_mppp(m.simulate(sys_, grid), kcfg)
    check("rerun is deterministic", again.modes_flat() == curve.modes_flat())
    other = m.compute_mppp(m.simulate(sys_, m.SimGrid(1.0, 64, 4096, 42)), kcfg)
    check("different seed differs", other.modes_flat() != curve.modes_flat())

    # KDE of the final slice: unit mass and a mode near the oracle maximizer.
    est = m.kde(ens.slice_component(64, 0), kcfg)
    mass = sum(0.5 * (est.values[k] + est.values[k - 1]) * (est.grid[k] - est.grid[k - 1])
               for k in range(1, len(est.grid)))
    check("kde mass is one", 0.97 <= mass <= 1.005, f"mass {mass:.4f}")
    gap = abs(est.mode() - m.ou_maximizer(1.0, 1.0, 1.0, 1.0))
    check("kde mode near maximizer", gap < 0.5, f"gap {gap:.4f}")

    # Closed forms: known values and the density peaking at its maximizer.
    check("ou mean", abs(m.ou_mean(1.0, 1.0, 1.0, 1.0) - math.e) < 1e-15)
    want_var = (math.e ** 2 - 1.0) / 2.0
    check("ou variance", abs(m.ou_variance(1.0, 1.0, 1.0, 1.0) - want_var) < 1e-12)
    peak = m.ou_maximizer(1.0, 1.0, 1.0, 1.0)
    check("ou density peaks at maximizer",
          m.ou_density(1.0, 1.0, 1.0, peak, 1.0)
          > max(m.ou_density(1.0, 1.0, 1.0, peak - 0.5, 1.0),
                m.ou_density(1.0, 1.0, 1.0, peak + 0.5, 1.0)))
    gpeak = m.gbm_maximizer(1.0, 1.0, 1.0, 1.0)
    check("gbm maximizer value", abs(gpeak - math.exp(-0.5)) < 1e-15)
    check("gbm density peaks at maximizer",
          m.gbm_solution_density(1.0, 1.0, 1.0, gpeak, 1.0)
          > max(m.gbm_solution_density(1.0, 1.0, 1.0, gpeak * 0.7, 1.0),
                m.gbm_solution_density(1.0, 1.0, 1.0, gpeak * 1.3, 1.0)))
    x, y = m.rotation2d_most_probable(1.0, 0.0, math.pi / 2.0)
    check("rotation quarter turn", abs(x) < 1e-15 and abs(y - 1.0) < 1e-15)

    # Error surfaces: out-of-range indices and invalid systems raise.
    try:
        curve.mode_at(65)
        check("mode_at range check", False)
    except IndexError:
        check("mode_at range check", True)
    try:
        m.SdeSystem(1, ["y"], ["1"], [1.0], "bad")
        check("dimension check", False)
    except ValueError as err:
        check("dimension check", True, str(err))

    print("all smoke tests passed")


if __name__ == "__main__":
    main()
