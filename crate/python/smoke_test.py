#!/usr/bin/env python3
"""Smoke test for the crmlab_py extension module.

Builds the cdylib if needed, loads it, and exercises the main entry
points: presets, simulation, certificates, artifact runs, and sweeps.

Run from the repository root:  python3 python/smoke_test.py
"""

import json
import math
import os
import shutil
import subprocess
import sys
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_module():
    """Build crm-py if needed and import crmlab_py from the target dir."""
    profile = os.environ.get("CRMLAB_PY_PROFILE", "dev")
    out = "debug" if profile == "dev" else profile
    built = os.path.join(REPO, "target", out, "libcrmlab_py.so")
    if not os.path.exists(built):
        subprocess.run(
            ["cargo", "build", "-p", "crm-py", "--profile", profile],
            cwd=REPO,
            check=True,
        )
    # CPython needs the platform-standard module filename to import it.
    stage = os.path.join(REPO, "target", out, "pymod")
    os.makedirs(stage, exist_ok=True)
    module = os.path.join(stage, "crmlab_py.so")
    if not os.path.exists(module) or os.path.getmtime(module) < os.path.getmtime(built):
        shutil.copy2(built, module)
    sys.path.insert(0, stage)
    import crmlab_py

    return crmlab_py


def main():
    lab = load_module()

    # Preset catalog is present and loadable.
    names = lab.preset_names()
    assert "fig5" in names and "mimo-demo" in names, names
    cfg = lab.ScenarioConfig.preset("fig5")
    assert cfg.family == "crm-scalar", cfg.family
    assert cfg.horizon == 15.0

    # Config round-trips through TOML.
    cfg2 = lab.ScenarioConfig.from_toml(cfg.to_toml())
    assert cfg2.name == cfg.name

    # Invalid configs are rejected with a Python exception.
    try:
        lab.ScenarioConfig.from_toml(cfg.to_toml().replace("ell = -100.0", "ell = 7.0"))
    except ValueError as e:
        assert "ell" in str(e)
    else:
        raise AssertionError("positive ell accepted")

    # Simulation: reference-model tracking error decays to near zero.
    traj = lab.simulate(cfg)
    assert len(traj) == 15001
    assert "e" in traj.channel_names()
    e = traj.channel("e")
    t = traj.times()
    assert math.isclose(t[-1], 15.0)
    assert abs(e[-1]) < 1e-2, e[-1]
    assert traj.to_csv().splitlines()[0].startswith("t,")

    # Certificates: every bound holds for the preset.
    traj, certs = lab.evaluate(cfg)
    assert any(c.name == "e-l2" for c in certs)
    for c in certs:
        assert c.passed, repr(c)
        if c.bound is not None:
            assert c.measured <= c.bound + 1e-6 * abs(c.bound) + 1e-9, repr(c)

    # Oscillation metrics are exposed on trajectories.
    crossings, deriv_l2, peak_f, peak_a = traj.oscillation("theta")
    assert deriv_l2 > 0.0 and peak_a >= 0.0 and peak_f >= 0.0

    with tempfile.TemporaryDirectory() as tmp:
        # Artifact run writes CSV + certificate JSON + SVG plots.
        all_pass, certs, paths = lab.run(cfg, tmp)
        assert all_pass
        assert any(p.endswith(".csv") for p in paths)
        assert any(p.endswith(".svg") for p in paths)
        cert_path = next(p for p in paths if p.endswith(".certificates.json"))
        with open(cert_path) as f:
            doc = json.load(f)
        assert doc["all_pass"] is True
        assert doc["scenario"] == "fig5"

        # Sweep over ell produces a manifest; two points fit no exponent.
        all_pass, exponent, manifest = lab.sweep(
            cfg, "ell", [-10.0, -100.0], couple_gamma=False, out_dir=tmp
        )
        assert all_pass
        assert exponent is None
        assert os.path.exists(manifest)

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
