import json
import math

import pytest

from pflab.errors import ContractViolation
from pflab.identities import (STATUS_HYP, STATUS_PASS, GridSpec, IdentityId, check,
                              default_tolerance, epsilon_composition_residual, run_suite,
                              sigma_row, sigma_sign)
from pflab.profiles import bessel, sech, shifted_sech

@pytest.mark.parametrize("ident", [i.value for i in IdentityId])
def test_every_identity_passes_at_defaults(ident):
    rep = check(ident)
    assert rep.status == STATUS_PASS, rep.to_dict()
    assert rep.residual < rep.tolerance
    assert rep.converged
    json.dumps(rep.to_dict())

def test_c11_reference_instance():
    rep = check("C11", sech(0.1, 3.0), {"t": 0.0}, GridSpec(n=64, tail=12))
    assert rep.rel_residual < 1e-8

def test_c11_zero_profile_is_trivial():
    rep = check("C11", sech(0.0, 3.0), {"t": 1.0})
    assert rep.lhs == 1.0 and rep.rhs == 1.0
    assert rep.abs_residual == 0.0
    assert rep.status == STATUS_PASS

def test_c16_truncations_converge():
    rep = check("C16", params={"t": 1.0})
    errs = rep.details["rel_errors"]
    assert errs[-1] < 1e-6
    assert rep.details["a2"] == [9.0, 13.0, 17.0]

def test_z26_and_z47_sit_on_the_zero_branch():
    for ident, p in (("Z26", sech()), ("Z47", bessel(1.5))):
        rep = check(ident, p)
        assert rep.details["zero_branch"]
        assert abs(rep.lhs) < 1e-7

def test_multi_interval_with_shifted_profile():
    rep = check("C7", shifted_sech(0.03, 3.0, 0.5))
    assert rep.status == STATUS_PASS

def test_hypothesis_violation_is_reported_not_asserted():
    rep = check("C11", sech(0.6, 3.0))
    assert rep.status == STATUS_HYP
    assert not rep.hypothesis_checks["dominance_ratio"]["ok"]
    assert math.isnan(rep.abs_residual)

def test_sherman_morrison_degenerate_instance_flagged():
    rep = check("E17", params={"degenerate": True})
    assert rep.status == STATUS_HYP
    assert not rep.hypothesis_checks["rank_one_denominator"]["ok"]
    ok = check("E17", params={"seed": 3})
    assert ok.status == STATUS_PASS and ok.rel_residual < 1e-11

def test_contract_errors():
    with pytest.raises(ContractViolation):
        check("C99")
    with pytest.raises(ContractViolation):
        check("C23", sech())
    with pytest.raises(ContractViolation):
        check("C11", tol=0.0)
    assert IdentityId.parse(" c17aux ") is IdentityId.C17AUX
    assert default_tolerance("E17") == 1e-11

def test_forced_failure():
    rep = check("C11", tol=1e-30)
    assert rep.status == "FAIL"

# ------------------------------------------------------------------ sign table

def test_sigma_rows():
    assert sigma_row(1, 1) == [-1, 1]
    assert sigma_row(2, 1) == [-1, 1]
    assert [sigma_row(k, 2) for k in range(1, 5)] == [
        [-1, 1, -1, 1], [-1, 1, 1, -1], [1, -1, -1, 1], [-1, 1, -1, 1]]
    with pytest.raises(ContractViolation):
        sigma_sign(5, 1, 2)

def test_sigma_rows_have_one_transposition():
    # every row differs from the alternating pattern (-1)^j by flipping a prefix or suffix
    for m in (1, 2, 3):
        for k in range(1, 2 * m + 1):
            row = sigma_row(k, m)
            alt = [(-1) ** j for j in range(1, 2 * m + 1)]
            flips = [a != b for a, b in zip(row, alt)]
            changes = sum(x != y for x, y in zip(flips[:-1], flips[1:]))
            assert changes <= 1

@pytest.mark.parametrize("m", [1, 2, 3])
def test_sign_table_brute_force(m):
    ends = [0.0, 1.0, 1.5, 2.5, 3.0, 3.7][:2 * m]
    res, per = epsilon_composition_residual(sech(), ends)
    assert res < 1e-12, per

def test_brute_force_detects_a_wrong_table(monkeypatch):
    import pflab.identities as ids
    ends = [0.0, 1.0, 1.5, 2.5]
    monkeypatch.setattr(ids, "sigma_sign", lambda j, k, m: (-1) ** j)
    res, _ = ids.epsilon_composition_residual(sech(), ends)
    assert res > 1e-2

# ------------------------------------------------------------------ suite

def test_run_suite_order_is_deterministic():
    tasks = [("E17", None, {"seed": s}) for s in range(4)] + [("C11", None, {"t": 1.0})]
    a = run_suite(tasks, workers=3)
    b = run_suite(list(reversed(tasks)), workers=2)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
    assert a[0].identity == IdentityId.C11
    ordered = run_suite(tasks, workers=3, sort=False)
    assert [r.params.get("seed") for r in ordered[:4]] == [0, 1, 2, 3]

def test_pthreads_env(monkeypatch):
    from pflab.identities import max_workers
    monkeypatch.setenv("PFLAB_THREADS", "2")
    assert max_workers() == 2
    monkeypatch.setenv("PFLAB_THREADS", "many")
    with pytest.raises(ContractViolation):
        max_workers()
