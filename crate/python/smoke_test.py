"""Smoke test for the pareto_nas extension module.

Build first:
    cargo build --release -p pareto-nas-python --features extension-module
then run from the repository root:
    python3 python/smoke_test.py
"""

import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_module():
    lib = os.path.join(ROOT, "target", "release", "libpareto_nas.so")
    if not os.path.exists(lib):
        sys.exit(f"missing {lib}; build the extension first")
    tmp = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(tmp, "pareto_nas.so"))
    sys.path.insert(0, tmp)
    import pareto_nas

    return pareto_nas


def main():
    nas = load_module()

    opt = nas.ArchConfig("opt", 1024, [16] * 24, [4096] * 24)
    assert nas.count_decoder(opt).decoder_total == 304_408_576

    exact, rows, max_delta, passed = nas.verify_tables()
    assert passed and exact == rows, (exact, rows, max_delta)

    space = nas.SearchSpace.preset("gpt2")
    c = nas.sample(space, 7)
    assert space.validate(c) == []
    assert nas.ArchConfig.from_json(c.to_json()).key() == c.key()

    assert nas.spearman([1, 2, 3], [3, 1, 2]) == -0.5
    assert nas.common_ratio([("a", 1.0), ("b", 2.0)], [("a", 5.0), ("b", 1.0)], 50) == 1.0

    pts = [(1.0, 1.0, 1.0), (0.5, 2.0, 2.0), (2.0, 2.0, 1.0)]
    assert sorted(nas.non_dominated(pts)) == [0, 2]
    assert nas.hypervolume([(1.0, 0.0, 0.0)], (0.0, 1.0, 1.0)) == 1.0

    frontier, hv = nas.run_search(space, seed=7, n_iter=5, population=40)
    assert len(hv) == 5 and all(a <= b for a, b in zip(hv, hv[1:]))
    assert frontier and all(isinstance(f[0], nas.ArchConfig) for f in frontier)

    try:
        nas.ArchConfig("gpt2", 512, [3], [2048])
    except ValueError:
        pass
    else:
        raise AssertionError("divisibility violation accepted")

    print(f"ok: {len(frontier)} frontier points, final hypervolume {hv[-1]:.3e}")


if __name__ == "__main__":
    main()
