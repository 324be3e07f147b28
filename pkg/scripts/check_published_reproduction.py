"""Check the bundled field-test data against the published headline figures."""

import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from config.constants import PUBLISHED_RESULTS
from core.analysis import analyze
from core.keyrate import plob_bounds
from core.optics import expected_tally
from core.optimizer import objective
from core.params import derive_window_probs, load_channel_file, load_params_file
from core.tally import load_counts_file
from models.run import DEFAULT_CHANNEL, DEFAULT_COUNTS, DEFAULT_PARAMS


def within(value, target, rel):
    return abs(value / target - 1) <= rel


def report(name, value, target, rel):
    ok = within(value, target, rel)
    mark = '✅' if ok else '❌'
    print(f"   {mark} {name}: {value:.4g} (published {target:.4g}, ±{rel:.0%})")
    return ok


def check_replay(params, channel, tally):
    """Published counts through the finite-key chain."""
    print("\n📊 Replaying the published sent/gain table")
    result = analyze(tally, params, channel)
    est, chain, key = result.estimates, result.chain, result.report
    if chain is None:
        print(f"   ❌ analysis gave no AOPP chain: {key.reason}")
        return False
    checks = [
        report("n_t", result.sifted.n_t, PUBLISHED_RESULTS['n_t'], 0.0),
        report("E", result.sifted.E, PUBLISHED_RESULTS['E'], 0.01),
        report("n1", est.n1_low, PUBLISHED_RESULTS['n1'], 0.05),
        report("e1ph", est.e1ph_up, PUBLISHED_RESULTS['e1ph'], 0.05),
        report("n1'", chain.n1_prime, PUBLISHED_RESULTS['n1_prime'], 0.05),
        report("e1ph'", chain.e1ph_prime, PUBLISHED_RESULTS['e1ph_prime'], 0.05),
        report("R", key.rate_per_pulse, PUBLISHED_RESULTS['rate'], 0.10),
    ]
    return all(checks)


def check_plob(channel):
    print("\n📉 Repeaterless bounds at 428 km")
    absolute, relative = plob_bounds(channel)
    return all([
        report("absolute PLOB", absolute, PUBLISHED_RESULTS['plob_absolute'], 0.02),
        report("relative PLOB", relative, PUBLISHED_RESULTS['plob_relative'], 0.02),
    ])


def check_simulation(params, channel, tally):
    """Closed-form gains against the table, ±10% (±15% for vacuum-vacuum cells)."""
    print("\n🔬 Closed-form link model against the published gains")
    model = expected_tally(params, channel)
    ok = True
    for code in range(16):
        measured = tally.heralded[code] / tally.sent[code]
        predicted = model.heralded[code] / model.sent[code]
        tolerance = 0.15 if code in (0, 1, 4, 5) else 0.10
        if not within(predicted, measured, tolerance):
            print(f"   ❌ cell {code}: model {predicted:.4g} vs table {measured:.4g}")
            ok = False
    if ok:
        print("   ✅ all 16 cells within tolerance")
    ok = report("objective R", objective(params, channel), PUBLISHED_RESULTS['rate'], 0.10) and ok
    return ok


def check_window_probs(params, tally):
    print("\n🎲 Window probabilities recovered from the sent counts")
    fit = derive_window_probs(tally)
    return all([report(name, getattr(fit, name), getattr(params, name), 0.01)
                for name in ('p_a1', 'p_b1', 'p_a2', 'p_b2', 'eps_a', 'eps_b')])


def main():
    """Run all reproduction checks."""
    print("=" * 60)
    print("FIELD-TEST REPRODUCTION CHECK")
    print("=" * 60)

    params = load_params_file(DEFAULT_PARAMS)
    channel = load_channel_file(DEFAULT_CHANNEL)
    tally = load_counts_file(DEFAULT_COUNTS)

    replay_ok = check_replay(params, channel, tally)
    plob_ok = check_plob(channel)
    sim_ok = check_simulation(params, channel, tally)
    fit_ok = check_window_probs(params, tally)

    # Summary
    print("\n" + "=" * 60)
    print("CHECK SUMMARY")
    print("=" * 60)
    print(f"Replay: {'✅ PASS' if replay_ok else '❌ FAIL'}")
    print(f"PLOB bounds: {'✅ PASS' if plob_ok else '❌ FAIL'}")
    print(f"Link model: {'✅ PASS' if sim_ok else '❌ FAIL'}")
    print(f"Window probabilities: {'✅ PASS' if fit_ok else '❌ FAIL'}")
    print("=" * 60)

    if replay_ok and plob_ok and sim_ok and fit_ok:
        print("\n🎉 All checks passed!")
        return True
    print("\n⚠️  Some checks failed. See the figures above.")
    return False


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
