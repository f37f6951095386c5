"""Exact pathwise identities checked on a small simulated corpus.

Each check returns ``(name, ok, detail)``. None of them is statistical, so
they must all pass on every seed.
"""

from __future__ import annotations

import io
import math

import numpy as np

from . import rng
from .horizon import cycle_times, finite_horizon_numeraire, zeta_values
from .market import gbm_preset, dds_preset, pseudo_inverse_drift_solve, simulate_batch
from .paths import (
    INFINITY, SampledPath, TimeGrid, first_hit_level, read_path_csv, relative_drawdown,
    write_path_csv,
)
from .relative import phi_process, rr_at, rr_inequality_check
from .transform import az_forward, az_inverse, kelly_fraction, verify_drawdown


def _rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def corpus(seed: int = 7, n_paths: int = 200, n_steps: int = 500):
    return simulate_batch(gbm_preset(), TimeGrid(0.01, n_steps), n_paths, seed).numeraire.wealth


def run_selftest(seed: int = 7) -> list:
    x = corpus(seed)
    out = []

    def check(name, ok, detail=""):
        out.append((name, bool(ok), detail))

    for a in (0.1, 0.5, 0.9):
        err = np.max(np.abs(relative_drawdown(az_forward(x, a)) - (a + (1 - a) * relative_drawdown(x))))
        check(f"drawdown identity alpha={a}", err < 1e-12, f"max abs err {err:.3e}")
        rt = _rel_err(az_inverse(az_forward(x, a), a), x)
        check(f"inverse round trip alpha={a}", rt < 1e-10, f"max rel err {rt:.3e}")
        m = np.maximum.accumulate(x, axis=1)
        at_max = x == m
        ax = az_forward(x, a)
        same = np.array_equal(at_max, ax == np.maximum.accumulate(ax, axis=1))
        check(f"times of maximum coincide alpha={a}", same)
        pw = _rel_err(ax[at_max], x[at_max] ** (1 - a))
        check(f"value at a maximum is x**(1-alpha) alpha={a}", pw < 1e-13, f"{pw:.3e}")
        check(f"constraint holds exactly alpha={a}",
              all(verify_drawdown(row, a).ok for row in ax))
    a, b = 0.3, 0.6
    g = 1 - (1 - a) * (1 - b)
    comp = _rel_err(az_forward(az_forward(x, a), b), az_forward(x, g))
    check("composition law", comp < 1e-10, f"{comp:.3e}")
    check("alpha=0 is the identity", np.array_equal(az_forward(x, 0.0), x))

    check("kelly fraction at full relative drawdown is 1-alpha", kelly_fraction(1.0, 0.4) == 0.6)
    check("kelly fraction vanishes at zero wealth", kelly_fraction(0.0, 0.4) == 0.0)

    check("rr of a path against itself is 0", rr_at(x[0], x[0], INFINITY) == 0.0)
    check("rr with 0/0 is 0", rr_at(np.array([1.0, 0.0]), np.array([1.0, 0.0]), 1) == 0.0)
    check("rr reverse identity",
          all(rr_inequality_check(x[i], x[i + 1], 300).ok for i in range(0, 20, 2)))
    check("phi is 1 when x equals the numeraire", np.all(phi_process(x[0], x[0], 0.5) == 1.0))

    rho = pseudo_inverse_drift_solve([[1.0, 1.0], [1.0, 1.0]], [1.0, 1.0])
    check("pseudo-inverse minimum-norm solution", np.allclose(rho, [0.5, 0.5], atol=1e-12))

    check("seed_for_path is deterministic", rng.seed_for_path(42, 3) == rng.seed_for_path(42, 3))
    check("seed_for_path separates paths",
          len({rng.seed_for_path(42, i) for i in range(1000)}) == 1000)

    level = 0.2
    hits = [first_hit_level(row, math.exp(level)) for row in x]
    ahits = [first_hit_level(row, math.exp((1 - 0.5) * level) * (1 - 1e-14))
             for row in az_forward(x, 0.5)]
    check("constrained numeraire reaches exp((1-alpha) l) when the numeraire reaches exp(l)",
          all(h == ah for h, ah in zip(hits, ahits)))

    cyc = cycle_times(np.array([1, 2, 1, 2, 3, 1.5]), 0.5)
    check("cycle times of the worked example", (cyc.hit(1), cyc.half(2), cyc.hit(2)) == (2, 3, 5))
    hp = finite_horizon_numeraire(np.array([1.0, 2.0, 1.0]), 0.5, 1)
    check("finite-horizon portfolio of the worked example", np.array_equal(hp.wealth, [1.0, 2.0, 1.0]))

    # every drawdown hit of this path lands exactly on the floor
    exact = np.array([1.0, 2.0, 1.0, 1.5, 2.5, 3.0, 1.5, 2.0, 3.2, 1.6])
    ax = az_forward(exact, 0.5)
    zetas = dict(zeta_values(exact, 0.5))
    ok = len(zetas) == 3
    for n, z in zetas.items():
        hp = finite_horizon_numeraire(exact, 0.5, n)
        ok &= abs(hp.wealth[hp.stop_index] / ax[hp.stop_index] - z) <= 1e-10 * z
    check("cycle-end ratio matches its closed form at exact hits", ok)

    d = simulate_batch(dds_preset(), TimeGrid(0.01, 3000), 20, seed).numeraire.wealth
    bitwise, floor_ok, ratio_ok = True, True, True
    for row in d:
        cyc = cycle_times(row, 0.5, max_cycles=3)
        ax = az_forward(row, 0.5)
        zetas = dict(zeta_values(row, 0.5, 3))
        for n in (1, 2, 3):
            hp = finite_horizon_numeraire(row, 0.5, n, cycles=cyc)
            h = cyc.half(n)
            if h != INFINITY:
                bitwise &= np.array_equal(hp.wealth[: h + 1], ax[: h + 1])
            floor_ok &= verify_drawdown(hp.wealth, 0.5, tol=1e-12).ok
            if hp.complete:
                direct = hp.wealth[hp.stop_index] / ax[hp.stop_index]
                # overshooting the floor can only raise the realised ratio
                ratio_ok &= direct >= zetas[n] * (1 - 1e-12)
    check("finite-horizon portfolio equals the constrained numeraire up to the switch", bitwise)
    check("finite-horizon portfolio satisfies the constraint", floor_ok)
    check("cycle-end ratio on a grid is at least its closed form", ratio_ok)

    p = SampledPath(TimeGrid(0.01, 500), x[0])
    buf = io.StringIO()
    write_path_csv(p, buf)
    back = read_path_csv(buf.getvalue())
    check("path CSV round trip is lossless", np.array_equal(back.values, p.values))
    return out
