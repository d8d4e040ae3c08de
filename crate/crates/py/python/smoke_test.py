"""Smoke test for the rotor_mle extension module.

Build and install first, e.g. `maturin build -m crates/py/Cargo.toml` and
`pip install` the wheel, then run `python crates/py/python/smoke_test.py`.
"""

import math
import pathlib
import sys

import rotor_mle

FIXTURES = pathlib.Path(__file__).resolve().parents[3] / "fixtures"


def check(cond, msg):
    if not cond:
        print(f"FAIL {msg}")
        sys.exit(1)
    print(f"ok   {msg}")


def main():
    case = rotor_mle.Case.load(str(FIXTURES / "three_machine.toml"))
    check(case.generator_ids == [1, 2, 3], "case loads")

    stable = case.simulate()
    check(stable.oracle() == "STABLE", "default fault is stable")
    report = stable.assess()
    check(report["system"]["status"] == "STABLE", "assessment agrees on the stable case")

    unstable = case.simulate(clear_time=0.5)
    report = unstable.assess()
    check(report["system"]["status"] == "UNSTABLE", "assessment flags the long fault")

    traces = rotor_mle.parse_traces(stable.to_csv())
    check(len(traces) == 3 and len(traces[0]) == len(stable.traces[0]), "csv round trip")
    again = rotor_mle.assess(traces, stable.fault_time, stable.clear_time)
    check(again == stable.assess(), "assess from parsed traces")

    data = rotor_mle.align(traces, stable.fault_time, stable.clear_time)
    check(data["t0"] >= stable.clear_time, "aligned grid starts at clearing")
    speeds = [(g, s[0]) for g, s in zip(data["gen_ids"], data["speeds"])]
    pairs, ratio = rotor_mle.identify_sdgp(speeds)
    check(len(pairs) >= 1 and 0.0 <= ratio <= 1.0, "pair selection")

    dt = 1.0 / 120.0
    v = [math.cos(2 * math.pi * k * dt) for k in range(240)]
    check(rotor_mle.classify(v)[:2] == ("III", 60), "cosine speed is pattern III with w = 60")

    angle = [0.1 * math.exp(1.5 * k * dt) for k in range(240)]
    times, lambdas = rotor_mle.estimate(angle, 6, 6, "I")
    check(abs(lambdas[-1] - 1.5) < 1e-6, "known exponent recovered")

    rls = rotor_mle.RlsState(0.0, 1.0, 0.0, 1.0)
    rls.update(2.0, 2.0)
    check(abs(rls.lambda_hat - 1.0) < 1e-12 and rls.k == 2, "rls update")

    assessor = rotor_mle.PairAssessor()
    verdict = None
    for i in range(30):
        verdict = assessor.push(0.5 + 0.05 * i, (i + 1) * dt)
    check(verdict["status"] == "UNSTABLE_FIRST_SWING", "rising MLE is first-swing unstable")

    try:
        rotor_mle.identify_sdgp([(1, 0.0), (2, 0.0)])
    except ValueError:
        check(True, "errors surface as ValueError")
    else:
        check(False, "errors surface as ValueError")


if __name__ == "__main__":
    main()
