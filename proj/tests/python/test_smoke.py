import math

import pytest

import pseudochain as pc


def test_hash_vectors():
    assert pc.sha256_hex(b"abc") == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    )
    assert pc.hmac_sha256_hex(b"Jefe", b"what do ya want for nothing?") == (
        "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"
    )


def test_dope_closed_form_and_area():
    assert pc.time_average_dope(2.0) == pytest.approx(2.6653043127, abs=1e-9)
    p, X = 0.05, 1.3
    # trapezoid on a fine grid against the closed interval area
    n = 20000
    h = X / n
    total = sum(pc.instantaneous_dope(i * h, 0.0, p) for i in range(n + 1)) * h
    total -= 0.5 * h * (pc.instantaneous_dope(0.0, 0.0, p) + pc.instantaneous_dope(X, 0.0, p))
    assert pc.interval_area(X, p) == pytest.approx(total, rel=1e-6)


def test_config_defaults_and_rejection():
    cfg = pc.default_config()
    assert cfg["economics"]["vmu_counts"] == [80, 70, 60]
    assert cfg["train"]["steps"] == 120
    assert len(pc.config_digest()) == 64
    assert pc.config_digest({"seed": 1}) != pc.config_digest()
    with pytest.raises(pc.PseudochainError):
        pc.config_digest({"no_such_key": 1})


def test_newsvendor_optimum():
    assert pc.critical_ratio() == pytest.approx(0.852439, abs=1e-6)
    assert pc.optimal_generation() == [89, 100, 110]
    rec = pc.newsvendor_benchmark({"newsvendor": {"samples": 20000, "g_lo": 80, "g_hi": 120}})
    analytic = [y for _, _, y in pc.series(rec, "analytic_g_star")]
    brute = [y for _, _, y in pc.series(rec, "brute_force_g_star")]
    assert all(abs(a - b) <= 2 for a, b in zip(analytic, brute))


def test_chain_delay_table():
    records = pc.chain_benchmark()
    delay = next(r for r in records if r["experiment"] == "request_delay")
    totals = {label: y for label, _, y in pc.series(delay, "total_ms")}
    assert totals == {"single_chain": 107.0, "cross_chain_local": 78.0, "cross_district": 863.0}


def test_small_protocol_run_passes_audit():
    rec = pc.protocol_simulation(
        {"economics": {"vmu_counts": [6, 5, 4]}, "protocol": {"slots": 3, "traceability_samples": 10}}
    )
    audit = {label: y for label, _, y in pc.series(rec, "audit")}
    assert audit["passed"] == 1.0
    assert audit["anonymity_leaks"] == 0.0


def test_env_cap_zeroes_reward():
    env = pc.GenerationEnv()
    obs = env.reset(7)
    assert len(obs) == env.agents == 3
    assert len(obs[0]) == 9
    step = env.step([env.g_max] * 3)
    assert sum(step["G"]) > env.slot_cap
    assert step["cap_exceeded"] and step["reward"] == 0.0
    step = env.step([80, 90, 100])
    assert step["reward"] == pytest.approx(sum(step["welfare"]))
    with pytest.raises(pc.PseudochainError):
        env.step([1, 2])


def test_tiny_training_is_deterministic():
    over = {
        "train": {"episodes": 2, "steps": 16, "epochs": 1, "hidden": 8},
        "train_seeds": [0],
        "genetic": {"population": 4, "generations": 2},
        "eval": {"final_window": 1},
    }
    a = pc.training_eval(over)
    b = pc.training_eval(over)
    assert a == b
    assert all(math.isfinite(y) for _, _, y in pc.series(a, "final_mean_mappo"))
