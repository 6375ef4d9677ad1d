"""Smoke test for the revrand extension module.

Build and install first, e.g. `maturin build --release -m crates/py/Cargo.toml`
followed by `pip install target/wheels/revrand-*.whl`.
"""

import json
from fractions import Fraction

import revrand


def frac(s):
    return Fraction(s)


def main():
    half = revrand.PrefixSet(["0"])
    assert half.measure() == "1/2"
    assert revrand.PrefixSet([]).measure() == "0"
    b = revrand.PrefixSet(["00", "11", "0"])
    assert b.minimize().items() == ["0", "11"]
    assert len(b.cylinder_members(3)) == 6
    assert frac(b.measure()) == Fraction(len(b.cylinder_members(5)), 32)
    assert revrand.incl_excl_bound("1/2", "1/4", "5/8") == "1/8"
    assert revrand.interleave("00", "11") == "0101"

    code = revrand.OpenCode([revrand.PrefixSet(["00"]), revrand.PrefixSet(["00", "1"])])
    assert code.stage_measures() == ["1/4", "3/4"]
    again = revrand.OpenCode.from_json(code.to_json())
    assert again.stage_measures() == code.stage_measures()

    try:
        revrand.OpenCode([revrand.PrefixSet(["0"]), revrand.PrefixSet(["1"])])
    except revrand.InvariantError as e:
        assert "monotone-stages" in str(e)
    else:
        raise AssertionError("non-nested stages accepted")

    test = {"rows": [{"stages": [["0"]], "frozen": True}, {"stages": [["00"]], "frozen": True}]}
    assert revrand.ml_escape_row(json.dumps(test), "00") is None
    assert revrand.ml_escape_row(json.dumps(test), "10") == 0

    family = {"rows": [{"stages": [[]], "frozen": True}]}
    v, spine = revrand.cover(json.dumps(family))
    assert spine and json.loads(v)["trees"]

    table = revrand.c_table(6, 10_000)
    for k in range(7):
        assert sum(1 for _, value, _ in table if value < k) <= 2**k - 1

    lines = revrand.compress(1)
    assert lines and all(bound < target for _, bound, target, _ in lines)

    m = revrand.Martingale.random(3, 8)
    assert m.is_fair() and m.at("") == "1"
    for k, mu in enumerate(m.test_measures()):
        assert frac(mu) <= Fraction(1, 2**k)

    pipe = json.loads(revrand.sr2cr(8, seed=5))
    assert len(pipe["path"]) == 8 and pipe["certificates"]

    for suite, cases, failures, _ in revrand.run_verify(42, "all", 6, 3):
        assert failures == 0, suite

    print("smoke test passed")


if __name__ == "__main__":
    main()
