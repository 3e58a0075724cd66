import numpy as np

from daecure import cure
from daecure import h2analysis as h2
from daecure import spark as sp
from daecure.interp import DeflatedSystem

from conftest import make_ode, make_random_stable_ode


def run_cure(sys, max_steps=4, tol=1e-12, gtol=1e-9):
    cfg = cure.CureConfig(max_steps=max_steps, tol_rel=tol,
                          spark_cfg=sp.TrustRegionConfig(gtol=gtol))
    return cure.cured_spark(sys, cfg=cfg)


def spread_pole_system(n=40, seed=0):
    """Poles over four decades: cumulative reduction needs many healthy
    steps before stagnating, which exercises deep assemblies."""
    rng = np.random.default_rng(seed)
    return make_ode(-np.logspace(-1, 3, n), np.ones(n),
                    rng.standard_normal(n))


def test_total_assembly_equals_cascade():
    # evaluating the assembled total model must match the telescoping sum
    # G_r,tot = sum_k G_r(k-th step applied to the depleted input)
    total, report, ledger = run_cure(spread_pole_system(), max_steps=6,
                                     tol=1e-30)
    rng = np.random.default_rng(0)
    for _ in range(10):
        s = complex(rng.uniform(0.1, 5), rng.uniform(-10, 10))
        direct = total.eval(s)
        cascade = sum(rec.rom.eval(s) for rec in ledger.records)
        # the cascade couplings add the all-pass depletion of earlier steps
        acc = np.zeros_like(direct)
        prefactor = np.eye(total.m)
        for rec in ledger.records:
            acc = acc + rec.rom.eval(s) @ prefactor
            gtil = cure.allpass_factor(rec)
            prefactor = gtil.eval(s) @ prefactor
        assert np.linalg.norm(direct - acc) <= 1e-10 * max(
            np.linalg.norm(direct), 1.0)


def test_error_factorization():
    # G - G_r,tot(k) = G_perp(k) * prod_j allpass_j
    sysw = spread_pole_system()
    total, report, ledger = run_cure(sysw, max_steps=5, tol=1e-30)
    ds0 = DeflatedSystem.from_dae(sysw)
    rng = np.random.default_rng(1)
    for _ in range(5):
        s = complex(rng.uniform(0.2, 3), rng.uniform(-5, 5))
        err = ds0.eval(s) - total.eval(s)
        rhs = ledger.ds.eval(s)  # G_perp after all steps
        for rec in ledger.records:
            rhs = rhs @ cure.allpass_factor(rec).eval(s)
        assert np.linalg.norm(err - rhs) <= 1e-8 * max(np.linalg.norm(err), 1e-8)


def test_allpass_magnitude_constant(index1_small):
    total, report, ledger = run_cure(index1_small, max_steps=2)
    gtil = cure.allpass_factor(ledger.records[0])
    mags = [abs(gtil.eval(1j * w)[0, 0])
            for w in np.logspace(-3, 3, 50)]
    assert max(mags) - min(mags) <= 1e-8 * max(mags)


def test_norm_history_monotone_and_stable(index1_small):
    total, report, ledger = run_cure(index1_small, max_steps=5, tol=1e-6)
    hist = report["norm_history"]
    assert all(h2_ >= h1 - 1e-12 * max(h2_, 1.0)
               for h1, h2_ in zip(hist, hist[1:]))
    poles = total.poles()
    assert np.all(poles.real < 0)
    # per-step error norms nonincreasing
    errs = []
    ds0 = DeflatedSystem.from_dae(index1_small)
    for k in range(1, ledger.k + 1):
        part = cure.assemble_total(ledger.records[:k])
        errs.append(h2.h2_error_norm(ds0, part))
    assert all(e2 <= e1 + 1e-10 for e1, e2 in zip(errs, errs[1:]))


def test_stagnation_stop(index1_small):
    cfg = cure.CureConfig(max_steps=20, tol_rel=1e-6)
    total, report, ledger = cure.cured_spark(index1_small, cfg=cfg)
    assert report["stop_reason"] in ("tolerance", "degenerate")
    assert report["k"] < 20


def test_exact_recovery_order2():
    sys = make_ode([-1.0, -2.0], [1.0, 1.0], [0.25, -0.175])
    cfg = cure.CureConfig(max_steps=1, tol_rel=1e-14,
                          spark_cfg=sp.TrustRegionConfig(gtol=1e-11))
    total, report, ledger = cure.cured_spark(sys, cfg=cfg)
    ds0 = DeflatedSystem.from_dae(sys)
    assert h2.h2_error_norm(ds0, total) <= 1e-8


def test_degenerate_input_flagged():
    # zero input residual: the very first step is degenerate
    sys = make_ode([-1.0, -2.0], [0.0, 0.0], [1.0, 1.0])
    cfg = cure.CureConfig(max_steps=5, tol_rel=1e-12)
    total, report, ledger = cure.cured_spark(sys, cfg=cfg)
    assert report["flagged"]
    assert report["stop_reason"] == "degenerate"


def test_report_contents(index1_small):
    total, report, ledger = run_cure(index1_small, max_steps=3, tol=1e-6)
    assert report["order"] == 2 * report["k"]
    for step in report["steps"]:
        assert step["a"] > 0 and step["b"] > 0
        assert len(step["shifts"]) == 2
        assert all(complex(s).real > 0 for s in step["shifts"])
    assert len(report["norm_history"]) == report["k"]
    assert report["runtime_s"] >= 0
