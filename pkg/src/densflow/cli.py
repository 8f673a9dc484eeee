"""Command-line scenario runner and tooling surface.

Subcommands
-----------
``run <config.json>``
    Integrate a configured scenario, writing ``diagnostics.csv`` and
    numbered field snapshots into the output directory.
``transform <in> <out> --to {psi|rho-theta} --hbar H``
    Convert snapshot sets between density/phase and wave-function
    representations (``<in>``/``<out>`` are snapshot prefixes).
``diagnose role=path [role=path ...]``
    Evaluate every applicable Casimir functional on the given snapshot
    files and emit a one-row CSV.
``test-invariants <suite>``
    Run a property battery (madelung | fisher_rao | casimirs |
    commutation | limits) and emit a machine-readable JSON report.

Configs are JSON with an explicit ``schema`` version; unknown keys are
hard errors, since a silently ignored typo in a tolerance-sensitive
numerics run is worse than a crash.  Exit codes: 0 clean, 2 config
error, 3 positivity loss, 4 spectral blowup.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dynamics_fr as dfr
from . import dynamics_wo as dwo
from . import potentials as pots
from . import quantum as qu
from . import transforms as tr
from .grid import Grid, SpectralBlowupError, load_field, save_field
from .spaces import Density, PositivityError, ThetaWO, WaveFunction

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_POSITIVITY = 3
EXIT_BLOWUP = 4

SYSTEMS = (
    "newton_wo", "eulerian", "full_compressible", "relativistic", "euler2d",
    "newton_fr", "neumann", "schrodinger", "ise", "heat", "hj_viscous",
)


class ConfigError(ValueError):
    pass


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


# ----------------------------------------------------------------------
# config parsing


_TOP_KEYS = {
    "schema", "grid", "system", "potential", "initial", "dt", "t_end",
    "output_every", "diagnostics", "outdir", "hbar", "gamma", "c", "mass",
    "nonlinearity", "state", "potential_field", "seed",
}


def _check_keys(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def parse_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "config")
    if raw.get("schema") != 1:
        raise ConfigError(f"unsupported or missing schema version: {raw.get('schema')!r}")
    for key in ("grid", "system", "dt", "t_end"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    g = raw["grid"]
    _check_keys(g, {"n", "lengths"}, "grid")
    if "n" not in g or not g["n"]:
        raise ConfigError("grid.n must be a non-empty list of axis sizes")
    if raw["system"] not in SYSTEMS:
        raise ConfigError(f"unknown system {raw['system']!r}; choose from {SYSTEMS}")
    if not (isinstance(raw["dt"], (int, float)) and raw["dt"] > 0):
        raise ConfigError("dt must be positive")
    if not (isinstance(raw["t_end"], (int, float)) and raw["t_end"] >= 0):
        raise ConfigError("t_end must be nonnegative")
    if "output_every" in raw and (int(raw["output_every"]) < 1):
        raise ConfigError("output_every must be a positive integer")
    return raw


def build_grid(cfg: dict) -> Grid:
    g = cfg["grid"]
    try:
        return Grid(tuple(int(n) for n in g["n"]),
                    tuple(float(x) for x in g["lengths"]) if "lengths" in g else None)
    except ValueError as e:
        raise ConfigError(str(e))


def build_potential(cfg: dict, grid: Grid):
    spec = cfg.get("potential", {"kind": "zero"})
    _check_keys(spec, {"kind", "G", "scale", "state", "field", "kappa"}, "potential")
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return pots.Zero()
    if kind == "quadratic":
        return pots.Quadratic()
    if kind == "entropy":
        return pots.Entropy()
    if kind == "gravity":
        return pots.Gravity(float(spec.get("G", 1.0)))
    if kind == "fisher":
        return pots.FisherInformation(float(spec.get("scale", 1.0)))
    if kind == "linear":
        return pots.Linear(_profile_field(spec.get("field", {"name": "cosine"}), grid))
    if kind == "barotropic":
        st = spec.get("state", {"kind": "shallow"})
        _check_keys(st, {"kind", "a", "c"}, "potential.state")
        return pots.Barotropic(pots.make_state_function(st["kind"], **{k: v for k, v in st.items() if k != "kind"}))
    raise ConfigError(f"unknown potential kind {kind!r}")


def _profile_field(spec: dict, grid: Grid) -> np.ndarray:
    _check_keys(spec, {"name", "amp", "k"}, "field profile")
    name = spec.get("name", "cosine")
    amp = float(spec.get("amp", 1.0))
    k = int(spec.get("k", 1))
    if name == "none":
        return np.zeros(grid.shape)
    if name == "cosine":
        return amp * np.cos(k * grid.coords()[0])
    raise ConfigError(f"unknown field profile {name!r}")


# ----------------------------------------------------------------------
# initial-condition catalog (named analytic profiles, no expression parsing)


def _ic_params(init: dict) -> dict:
    _check_keys(init, {"name", "eps", "k", "A", "B", "C", "sigma_coef"}, "initial")
    return init


def build_initial(cfg: dict, grid: Grid):
    system = cfg["system"]
    init = _ic_params(cfg.get("initial", {"name": "uniform"}))
    name = init.get("name", "uniform")
    eps = float(init.get("eps", 0.0))
    k = int(init.get("k", 1))
    hbar = float(cfg.get("hbar", 2.0))
    gamma = float(cfg.get("gamma", 1.0))
    coords = grid.coords()
    x = coords[0]

    def bump():
        return eps * sum(np.cos(k * c) for c in coords)

    if system in ("newton_wo", "newton_fr"):
        if name == "uniform":
            rho, theta = Density.uniform(grid), np.zeros(grid.shape)
        elif name in ("cosine-bump", "wkb"):
            rho, theta = Density.uniform(grid), bump()
        elif name == "log-bump":
            rho = Density.uniform(grid)
            theta = -2.0 * gamma * np.log(1.0 + eps * np.cos(k * x))
        else:
            raise ConfigError(f"initial profile {name!r} not available for {system}")
        if system == "newton_wo":
            return dwo.WOState(rho, ThetaWO(grid, theta))
        return dfr.FRState.make(rho, theta)

    if system == "eulerian":
        if name == "uniform":
            return dwo.EulerianState(np.zeros((grid.dim,) + grid.shape), Density.uniform(grid))
        if name in ("cosine-bump", "wkb"):
            return dwo.EulerianState(grid.gradient(bump()), Density.uniform(grid))
        raise ConfigError(f"initial profile {name!r} not available for eulerian")

    if system == "full_compressible":
        coef = float(init.get("sigma_coef", 1.0))
        if name == "uniform":
            rho = Density.uniform(grid)
            return dwo.FullState(np.zeros(grid.shape), rho, coef * rho.values)
        if name == "cosine-bump":
            rho = Density.normalized(grid, 1.0 + eps * np.cos(k * x))
            return dwo.FullState(np.zeros(grid.shape), rho, coef * rho.values)
        raise ConfigError(f"initial profile {name!r} not available for full_compressible")

    if system == "relativistic":
        if name == "uniform":
            return dwo.RelState(np.zeros(grid.shape), Density.uniform(grid))
        if name == "cosine-bump":
            rho = Density.normalized(grid, 1.0 + eps * np.cos(k * x))
            return dwo.RelState(eps * np.sin(k * x) * rho.values, rho)
        raise ConfigError(f"initial profile {name!r} not available for relativistic")

    if system == "euler2d":
        if grid.dim != 2:
            raise ConfigError("euler2d needs a 2D grid")
        X, Y = coords
        if name == "taylor-green":
            return dwo.Vorticity2D(grid, np.cos(X) * np.cos(Y))
        if name == "cosine-bump":
            return dwo.Vorticity2D(grid, eps * (np.cos(k * X) + np.cos(k * Y) + 0.8 * np.cos(k * (X + Y))))
        raise ConfigError(f"initial profile {name!r} not available for euler2d")

    if system == "neumann":
        if name == "uniform":
            return dfr.NeumannState.projected(grid, np.ones(grid.shape), np.zeros(grid.shape))
        if name == "cosine-bump":
            return dfr.NeumannState.projected(grid, np.sqrt(2.0) * np.cos(k * x),
                                              eps * np.sqrt(2.0) * np.sin(k * x))
        raise ConfigError(f"initial profile {name!r} not available for neumann")

    if system == "schrodinger":
        if name == "uniform":
            return WaveFunction(grid, np.ones(grid.shape, dtype=complex))
        if name in ("wkb", "cosine-bump"):
            return tr.madelung(Density.uniform(grid), bump(), hbar)
        raise ConfigError(f"initial profile {name!r} not available for schrodinger")

    if system == "ise":
        if grid.dim not in (2, 3):
            raise ConfigError("ise needs a 2D or 3D grid")
        if name == "uniform":
            return qu.TwoComponentWave(grid, np.ones(grid.shape, complex), np.zeros(grid.shape, complex))
        if name == "smoke-blob":
            X, Y = coords[0], coords[1]
            a = np.pi / 4 + eps * np.cos(k * X) * np.cos(k * Y)
            b = np.sin(k * X) + np.cos(k * Y)
            return qu.TwoComponentWave(grid, np.cos(a) * np.exp(1j * 0.3 * np.sin(k * (X + Y))),
                                       np.sin(a) * np.exp(1j * b))
        raise ConfigError(f"initial profile {name!r} not available for ise")

    if system == "heat":
        if name == "uniform":
            return np.ones(grid.shape)
        if name == "cosine-bump":
            return 1.0 + eps * np.cos(k * x)
        raise ConfigError(f"initial profile {name!r} not available for heat")

    if system == "hj_viscous":
        if name == "uniform":
            return ThetaWO(grid, np.zeros(grid.shape))
        if name == "cosine-bump":
            return ThetaWO(grid, bump())
        if name == "log-bump":
            return ThetaWO(grid, -2.0 * gamma * np.log(1.0 + eps * np.cos(k * x)))
        raise ConfigError(f"initial profile {name!r} not available for hj_viscous")

    raise ConfigError(f"unhandled system {system!r}")


# ----------------------------------------------------------------------
# per-system steppers, diagnostics and snapshot writers


def _casimir_s(grid, omega, rho, power):
    from .casimirs import enstrophy_family

    return enstrophy_family(grid, omega, rho, f"s{power}")


def make_scenario(cfg: dict, grid: Grid):
    """Return (state0, step, diagnostics_fn, snapshot_fn) for the config."""
    system = cfg["system"]
    hbar = float(cfg.get("hbar", 2.0))
    gamma = float(cfg.get("gamma", 1.0))
    c = float(cfg.get("c", 10.0))
    mass = float(cfg.get("mass", 1.0))
    state0 = build_initial(cfg, grid)

    if system == "newton_wo":
        U = build_potential(cfg, grid)

        def step(s, dt):
            return dwo.step_newton_wo(s, U, dt)

        def diags(s):
            return {
                "mass": grid.integrate(s.rho.values),
                "hamiltonian": dwo.hamiltonian_wo(s, U),
                "min_rho": float(np.min(s.rho.values)),
                "tail_fraction": grid.spectral_tail_fraction(s.rho.values - 1.0),
            }

        def snap(s, base):
            save_field(grid, s.rho.values, "rho", f"{base}.rho")
            save_field(grid, s.theta.values, "theta", f"{base}.theta")

        return state0, step, diags, snap

    if system == "eulerian":
        U = build_potential(cfg, grid)

        def step(s, dt):
            return dwo.step_eulerian(s, U, dt)

        def diags(s):
            out = {
                "mass": grid.integrate(s.rho.values),
                "hamiltonian": dwo.energy_eulerian(s, U),
                "min_rho": float(np.min(s.rho.values)),
                "tail_fraction": grid.spectral_tail_fraction(s.rho.values - 1.0),
            }
            if grid.dim == 2:
                w = grid.vorticity2d(s.v)
                out["curl_norm"] = grid.l2_norm(w)
                out["casimir_s2"] = _casimir_s(grid, w, s.rho.values, 2)
            return out

        def snap(s, base):
            for i in range(grid.dim):
                save_field(grid, s.v[i], f"v{'xyz'[i]}", f"{base}.v{'xyz'[i]}")
            save_field(grid, s.rho.values, "rho", f"{base}.rho")

        return state0, step, diags, snap

    if system == "full_compressible":
        st = cfg.get("state", {"kind": "ideal"})
        _check_keys(st, {"kind", "a"}, "state")
        e2 = pots.make_two_arg_state(st["kind"], **{k: v for k, v in st.items() if k != "kind"})

        def step(s, dt):
            return dwo.step_full_compressible(s, e2, dt)

        def diags(s):
            return {
                "mass": grid.integrate(s.rho.values),
                "hamiltonian": dwo.energy_full_compressible(s, e2),
                "min_rho": float(np.min(s.rho.values)),
                "tail_fraction": grid.spectral_tail_fraction(s.rho.values - 1.0),
            }

        def snap(s, base):
            save_field(grid, s.v, "v", f"{base}.v")
            save_field(grid, s.rho.values, "rho", f"{base}.rho")
            save_field(grid, s.sigma, "sigma", f"{base}.sigma")

        return state0, step, diags, snap

    if system == "relativistic":

        def step(s, dt):
            return dwo.step_relativistic(s, c, dt)

        def diags(s):
            return {
                "mass": grid.integrate(s.rho.values),
                "hamiltonian": dwo.hamiltonian_relativistic(s, c),
                "min_rho": float(np.min(s.rho.values)),
                "tail_fraction": grid.spectral_tail_fraction(s.rho.values - 1.0),
            }

        def snap(s, base):
            save_field(grid, s.m, "m", f"{base}.m")
            save_field(grid, s.rho.values, "rho", f"{base}.rho")

        return state0, step, diags, snap

    if system == "euler2d":

        def step(s, dt):
            return dwo.step_euler2d(s, dt)

        def diags(s):
            return {
                "hamiltonian": dwo.energy_euler2d(s),
                "casimir_s2": _casimir_s(grid, s.omega, None, 2),
                "casimir_s3": _casimir_s(grid, s.omega, None, 3),
                "tail_fraction": grid.spectral_tail_fraction(s.omega),
            }

        def snap(s, base):
            save_field(grid, s.omega, "omega", f"{base}.omega")

        return state0, step, diags, snap

    if system == "newton_fr":
        U = build_potential(cfg, grid)

        def step(s, dt):
            return dfr.step_newton_fr(s, U, dt)

        def diags(s):
            return {
                "mass": grid.integrate(s.rho.values),
                "hamiltonian": dfr.hamiltonian_fr(s, U),
                "gauge": grid.integrate(s.theta.values * s.rho.values),
                "lambda": dfr.fr_multiplier(grid, s.rho.values, s.theta.values, U),
                "min_rho": float(np.min(s.rho.values)),
            }

        def snap(s, base):
            save_field(grid, s.rho.values, "rho", f"{base}.rho")
            save_field(grid, s.theta.values, "theta", f"{base}.theta")

        return state0, step, diags, snap

    if system == "neumann":

        def step(s, dt):
            return dfr.step_neumann(s, dt)

        def diags(s):
            return {
                "norm": grid.integrate(s.f ** 2),
                "hamiltonian": dfr.neumann_energy(s),
                "lambda": dfr.neumann_multiplier(s),
            }

        def snap(s, base):
            save_field(grid, s.f, "f", f"{base}.f")
            save_field(grid, s.fdot, "fdot", f"{base}.fdot")

        return state0, step, diags, snap

    if system == "schrodinger":
        V = _profile_field(cfg.get("potential_field", {"name": "none"}), grid)
        nl_spec = cfg.get("nonlinearity", {"kind": "none"})
        _check_keys(nl_spec, {"kind", "kappa"}, "nonlinearity")
        nl = pots.make_nonlinearity(nl_spec.get("kind", "none"), nl_spec.get("kappa", 1.0))

        def step(psi, dt):
            return qu.step_schrodinger(psi, V, nl, hbar, mass, dt, grid=grid)

        def diags(psi):
            vals = np.asarray(getattr(psi, "values", psi))
            return {
                "norm": grid.integrate(np.abs(vals) ** 2).real,
                "hamiltonian": qu.schrodinger_hamiltonian(vals, V, nl, hbar, mass, grid=grid),
                "tail_fraction": grid.spectral_tail_fraction(vals),
            }

        def snap(psi, base):
            vals = np.asarray(getattr(psi, "values", psi))
            save_field(grid, vals, "psi", f"{base}.psi")

        return state0.values, step, diags, snap

    if system == "ise":

        def step(Psi, dt):
            return qu.step_ise(Psi, hbar, dt)

        def diags(Psi):
            v = qu.velocity_from_psi(Psi, hbar)
            return {
                "norm": grid.integrate(Psi.pointwise_norm2()).real,
                "unit_defect": Psi.max_unit_defect(),
                "div_v": grid.l2_norm(grid.divergence(v)),
            }

        def snap(Psi, base):
            save_field(grid, Psi.psi1, "psi1", f"{base}.psi1")
            save_field(grid, Psi.psi2, "psi2", f"{base}.psi2")

        return state0, step, diags, snap

    if system == "heat":

        def step(eta, dt):
            return qu.step_heat(eta, gamma, dt, grid=grid)

        def diags(eta):
            return {
                "mass": grid.integrate(eta),
                "min_rho": float(np.min(eta)),
                "tail_fraction": grid.spectral_tail_fraction(eta),
            }

        def snap(eta, base):
            save_field(grid, eta, "eta", f"{base}.eta")

        return state0, step, diags, snap

    if system == "hj_viscous":

        def step(th, dt):
            return dwo.step_hj_viscous(th, gamma, dt, grid=grid)

        def diags(th):
            return {
                "hamiltonian": 0.5 * grid.integrate(np.sum(grid.gradient(th.values) ** 2, axis=0)),
                "tail_fraction": grid.spectral_tail_fraction(th.values),
            }

        def snap(th, base):
            save_field(grid, th.values, "theta", f"{base}.theta")

        return state0, step, diags, snap

    raise ConfigError(f"unhandled system {system!r}")


_DEFAULT_DIAGNOSTICS = {
    "newton_wo": ["mass", "hamiltonian", "min_rho", "tail_fraction"],
    "eulerian": ["mass", "hamiltonian", "min_rho", "tail_fraction"],
    "full_compressible": ["mass", "hamiltonian", "min_rho", "tail_fraction"],
    "relativistic": ["mass", "hamiltonian", "min_rho", "tail_fraction"],
    "euler2d": ["hamiltonian", "casimir_s2", "casimir_s3", "tail_fraction"],
    "newton_fr": ["mass", "hamiltonian", "gauge", "lambda", "min_rho"],
    "neumann": ["norm", "hamiltonian", "lambda"],
    "schrodinger": ["norm", "hamiltonian", "tail_fraction"],
    "ise": ["norm", "unit_defect", "div_v"],
    "heat": ["mass", "min_rho", "tail_fraction"],
    "hj_viscous": ["hamiltonian", "tail_fraction"],
}


def run_scenario(cfg: dict) -> Path:
    grid = build_grid(cfg)
    state, step, diags, snap = make_scenario(cfg, grid)
    dt = float(cfg["dt"])
    t_end = float(cfg["t_end"])
    n_steps = int(round(t_end / dt))
    every = int(cfg.get("output_every", max(1, n_steps)))
    names = list(cfg.get("diagnostics", _DEFAULT_DIAGNOSTICS[cfg["system"]]))
    outdir = Path(cfg.get("outdir", "out"))
    outdir.mkdir(parents=True, exist_ok=True)

    available = diags(state)
    for n in names:
        if n not in available:
            raise ConfigError(f"diagnostic {n!r} not available for system {cfg['system']!r} "
                              f"(have {sorted(available)})")

    rows = []

    def record(i, s):
        d = diags(s)
        rows.append([i * dt] + [d[n] for n in names])
        snap(s, outdir / f"snap_{i:06d}")

    record(0, state)
    for i in range(1, n_steps + 1):
        state = step(state, dt)
        if i % every == 0 or i == n_steps:
            record(i, state)

    csv_path = outdir / "diagnostics.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["t"] + names) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return csv_path


# ----------------------------------------------------------------------
# transform subcommand


def cmd_transform(args) -> int:
    hbar = float(args.hbar)
    if args.to == "psi":
        grid, _, rho = load_field(f"{args.infile}.rho")
        _, _, theta = load_field(f"{args.infile}.theta")
        psi = tr.madelung(Density(grid, rho), theta, hbar)
        save_field(grid, psi.values, "psi", f"{args.outfile}.psi")
    else:
        grid, _, psi = load_field(f"{args.infile}.psi")
        rho, theta = tr.madelung_inverse(WaveFunction.normalized(grid, psi), hbar)
        save_field(grid, rho.values, "rho", f"{args.outfile}.rho")
        save_field(grid, theta.values, "theta", f"{args.outfile}.theta")
    return EXIT_OK


# ----------------------------------------------------------------------
# diagnose subcommand


def _load_vector(prefix: str):
    comps, grid = [], None
    for suffix in ("x", "y", "z"):
        try:
            g, _, vals = load_field(f"{prefix}.{suffix}")
        except FileNotFoundError:
            break
        comps.append(vals)
        grid = g
    if grid is None:
        raise ConfigError(f"no vector components found at {prefix}.x/.y/.z")
    return grid, np.stack(comps)


def cmd_diagnose(args) -> int:
    from . import casimirs as ca

    roles = {}
    for item in args.snapshots:
        if "=" not in item:
            raise ConfigError(f"diagnose arguments look like role=path, got {item!r}")
        role, path = item.split("=", 1)
        if role not in ("omega", "rho", "v", "alpha", "B"):
            raise ConfigError(f"unknown snapshot role {role!r}")
        roles[role] = path

    values: dict[str, float] = {}
    rho_vals = None
    if "rho" in roles:
        _, _, rho_vals = load_field(roles["rho"])
    if "omega" in roles:
        g, _, om = load_field(roles["omega"])
        for h in sorted(ca.ENSTROPHY_CATALOG):
            values[f"enstrophy_{h}"] = ca.enstrophy_family(g, om, rho_vals, h)
    if "v" in roles:
        g, v = _load_vector(roles["v"])
        values["helicity"] = ca.helicity(g, v)
    if "B" in roles:
        g, B = _load_vector(roles["B"])
        values["magnetic_helicity"] = ca.magnetic_helicity(g, B)
        if "alpha" in roles:
            _, alpha = _load_vector(roles["alpha"])
            values["cross_helicity"] = ca.cross_helicity(g, alpha, B)
            if rho_vals is not None:
                values["gen_cross_helicity"] = ca.gen_cross_helicity(g, alpha, rho_vals, B)
    if not values:
        raise ConfigError("no applicable functionals for the given roles")

    names = sorted(values)
    out = ",".join(names) + "\n" + ",".join(_fmt(values[n]) for n in names) + "\n"
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    sys.stdout.write(out)
    return EXIT_OK


# ----------------------------------------------------------------------
# invariant suites


def _suite_madelung(rng):
    from .spaces import TangentDensity, fubini_study_metric, sasaki_fr_metric

    g = Grid(64)
    x = g.axis_coordinate(0)

    def rand_field(amp=0.3):
        f = np.zeros(g.shape)
        for k in range(1, 5):
            f += rng.normal(0, amp / k) * np.cos(k * x) + rng.normal(0, amp / k) * np.sin(k * x)
        return f

    worst_symp = 0.0
    for hbar in (0.5, 1.0, 2.0):
        for _ in range(40):
            rho = Density.normalized(g, 1 + 0.3 * rand_field())
            th = ThetaWO(g, rand_field())
            t1 = (TangentDensity.projected(g, rand_field()).values, rand_field())
            t2 = (TangentDensity.projected(g, rand_field()).values, rand_field())
            d1 = tr.madelung_pushforward(rho, th, t1[0], t1[1], hbar)
            d2 = tr.madelung_pushforward(rho, th, t2[0], t2[1], hbar)
            can = tr.canonical_symplectic(t1, t2, g)
            proj = tr.projective_symplectic(d1, d2, hbar, g)
            worst_symp = max(worst_symp, abs(can - proj) / max(abs(can), 1e-30))

    worst_iso = 0.0
    for _ in range(100):
        rho = Density.normalized(g, 1 + 0.3 * rand_field())
        from .spaces import ThetaFR

        th = ThetaFR(g, rand_field(), rho)
        pairs = []
        for _ in range(2):
            dr = TangentDensity.projected(g, rand_field()).values
            dth = rand_field()
            dth -= g.integrate(dth * rho.values)
            pairs.append((dr, dth))
        psi = tr.madelung(rho, th, 2.0)
        d1 = tr.madelung_pushforward(rho, th, *pairs[0], 2.0)
        d2 = tr.madelung_pushforward(rho, th, *pairs[1], 2.0)
        sas = sasaki_fr_metric(rho, th, pairs[0], pairs[1])
        fs = fubini_study_metric(psi, d1, d2)
        worst_iso = max(worst_iso, abs(sas - 4.0 * fs) / max(abs(sas), 1e-30))

    return [
        {"name": "symplectomorphism_pullback", "measured": worst_symp, "tolerance": 1e-10},
        {"name": "sasaki_equals_4x_fubini_study", "measured": worst_iso, "tolerance": 1e-9},
    ]


def _suite_fisher_rao(rng):
    from .spaces import TangentDensity, fr_distance, fr_geodesic, fr_metric

    g = Grid(64)
    x = g.axis_coordinate(0)

    def rand_density():
        f = np.zeros(g.shape)
        for k in range(1, 4):
            f += rng.normal(0, 0.2 / k) * np.cos(k * x) + rng.normal(0, 0.2 / k) * np.sin(k * x)
        return Density.normalized(g, 1 + np.clip(f, -0.6, 0.6))

    worst_factor = 0.0
    for _ in range(100):
        rho = rand_density()
        a = TangentDensity.projected(g, np.cos(x) * rng.normal() + np.sin(2 * x) * rng.normal())
        b = TangentDensity.projected(g, np.cos(2 * x) * rng.normal() + np.sin(x) * rng.normal())
        fr = fr_metric(rho, a, b)
        fa = a.values / (2 * np.sqrt(rho.values))
        fb = b.values / (2 * np.sqrt(rho.values))
        sphere = g.integrate(fa * fb)
        worst_factor = max(worst_factor, abs(fr - 4 * sphere) / max(abs(fr), 1e-30))

    worst_tri = 0.0
    for _ in range(30):
        r1, r2, r3 = rand_density(), rand_density(), rand_density()
        d12, d23, d13 = fr_distance(r1, r2), fr_distance(r2, r3), fr_distance(r1, r3)
        worst_tri = max(worst_tri, d13 - (d12 + d23))

    worst_end = 0.0
    for _ in range(10):
        r0, r1 = rand_density(), rand_density()
        worst_end = max(worst_end, float(np.max(np.abs(fr_geodesic(r0, r1, 1.0).values - r1.values))))

    return [
        {"name": "fr_equals_4x_sphere", "measured": worst_factor, "tolerance": 1e-9},
        {"name": "triangle_inequality_slack", "measured": worst_tri, "tolerance": 1e-9},
        {"name": "geodesic_endpoint", "measured": worst_end, "tolerance": 1e-12},
    ]


def _suite_casimirs(rng):
    from . import casimirs as ca

    g = Grid((32, 32, 32))
    coords = g.coords()

    def bls(kmax=2, amp=0.3):
        f = np.zeros(g.shape)
        for _ in range(6):
            kv = rng.integers(-kmax, kmax + 1, size=3)
            if not np.any(kv):
                continue
            f += rng.normal(0, amp) * np.cos(sum(k * c for k, c in zip(kv, coords)) + rng.uniform(0, 2 * np.pi))
        return f

    def divfree():
        return g.curl(np.stack([bls() for _ in range(3)]))

    worst = 0.0
    for _ in range(5):
        B = divfree()
        alpha = np.stack([bls() for _ in range(3)])
        rho = Density.normalized(g, 1 + 0.15 * bls(amp=1.0))
        snap = ca.MHDSnapshot(g, alpha, rho, B)
        h0 = ca.magnetic_helicity(g, B)
        c0 = ca.cross_helicity(g, alpha, B)
        j0 = ca.gen_cross_helicity(g, alpha, rho, B)
        scale = max(g.l2_norm(np.sum(alpha * B, axis=0)), abs(h0), 1e-6)
        pert = ca.coadjoint_perturb(snap, divfree(), f=bls(), dt=0.05,
                                    P=np.stack([bls(amp=0.2) for _ in range(3)]), substeps=8)
        worst = max(worst, abs(ca.magnetic_helicity(g, pert.B) - h0) / scale)
        worst = max(worst, abs(ca.cross_helicity(g, pert.alpha, pert.B) - c0) / scale)
        worst = max(worst, abs(ca.gen_cross_helicity(g, pert.alpha, pert.rho, pert.B) - j0) / scale)
    return [{"name": "coadjoint_invariance", "measured": worst, "tolerance": 1e-6}]


def _suite_commutation(rng):
    g = Grid(256)
    x = g.axis_coordinate(0)
    hbar, m = 2.0, 1.0
    V = np.cos(x)
    U = (hbar ** 2 / 4.0) * pots.FisherInformation() + pots.Linear(V)
    rho0 = Density.uniform(g)
    th0 = ThetaWO(g, 0.05 * np.cos(x))
    t_end = 0.1
    errs = []
    for dt in (1e-3, 5e-4):
        n = round(t_end / dt)
        psi = tr.madelung(rho0, th0, hbar).values
        s = dwo.WOState(rho0, th0)
        for _ in range(n):
            psi = qu.step_schrodinger(psi, V, None, hbar, m, dt, grid=g)
            s = dwo.step_newton_wo(s, U, dt)
        errs.append(g.l2_norm(np.abs(psi) ** 2 - s.rho.values))
    ratio = errs[0] / max(errs[1], 1e-300)
    return [
        {"name": "commutation_discrepancy_dt1e-3", "measured": errs[0], "tolerance": 1e-5},
        {"name": "commutation_order_ratio", "measured": ratio, "tolerance_min": 3.5},
    ]


def _suite_limits(rng):
    # relativistic c-sweep
    g = Grid(64)
    x = g.axis_coordinate(0)
    rho0 = Density.normalized(g, 1 + 0.1 * np.cos(x))
    m0 = rho0.values * 0.1 * np.sin(x)
    dt, n = 2e-5, 2500
    ecl = dwo.EulerianState((m0 / rho0.values)[None, ...], rho0)
    for _ in range(n):
        ecl = dwo.step_eulerian(ecl, pots.Zero(), dt)
    errs = {}
    for c in (10.0, 100.0, 1000.0):
        rs = dwo.RelState(m0, rho0)
        for _ in range(n):
            rs = dwo.step_relativistic(rs, c, dt)
        errs[c] = g.l2_norm(dwo.relativistic_velocity(rs, c) - ecl.v[0])
    slope = math.log(errs[10.0] / errs[1000.0]) / math.log(100.0)
    return [{"name": "relativistic_limit_order", "measured": slope,
             "tolerance_min": 1.6, "tolerance_max": 2.4}]


SUITES = {
    "madelung": _suite_madelung,
    "fisher_rao": _suite_fisher_rao,
    "casimirs": _suite_casimirs,
    "commutation": _suite_commutation,
    "limits": _suite_limits,
}


def cmd_test_invariants(args) -> int:
    rng = np.random.default_rng(int(args.seed))
    checks = SUITES[args.suite](rng)
    for c in checks:
        if "tolerance" in c:
            c["passed"] = bool(c["measured"] < c["tolerance"])
        else:
            ok = True
            if "tolerance_min" in c:
                ok = ok and c["measured"] >= c["tolerance_min"]
            if "tolerance_max" in c:
                ok = ok and c["measured"] <= c["tolerance_max"]
            c["passed"] = bool(ok)
    report = {"suite": args.suite, "passed": all(c["passed"] for c in checks), "checks": checks}
    text = json.dumps(report, indent=1)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK


# ----------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="densflow", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a configured scenario")
    p_run.add_argument("config")

    p_tr = sub.add_parser("transform", help="convert between (rho, theta) and psi snapshots")
    p_tr.add_argument("infile", help="input snapshot prefix")
    p_tr.add_argument("outfile", help="output snapshot prefix")
    p_tr.add_argument("--to", choices=("psi", "rho-theta"), required=True)
    p_tr.add_argument("--hbar", type=float, default=2.0)

    p_di = sub.add_parser("diagnose", help="evaluate Casimirs on snapshots")
    p_di.add_argument("snapshots", nargs="+", help="role=path pairs (roles: omega, rho, v, alpha, B)")
    p_di.add_argument("--out", default=None)

    p_ti = sub.add_parser("test-invariants", help="run a property battery")
    p_ti.add_argument("suite", choices=sorted(SUITES))
    p_ti.add_argument("--seed", default=0)
    p_ti.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = parse_config(args.config)
            csv_path = run_scenario(cfg)
            print(f"wrote {csv_path}")
            return EXIT_OK
        if args.command == "transform":
            return cmd_transform(args)
        if args.command == "diagnose":
            return cmd_diagnose(args)
        if args.command == "test-invariants":
            return cmd_test_invariants(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except PositivityError as e:
        print(f"positivity loss: {e}", file=sys.stderr)
        return EXIT_POSITIVITY
    except SpectralBlowupError as e:
        print(f"spectral blowup: {e}", file=sys.stderr)
        return EXIT_BLOWUP
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
