"""Command-line entry points.

Every subcommand reads a YAML configuration (a path or a shipped preset
name), validates it completely, and only then imports the numerical
modules and starts computing.  Thread count comes from ``--threads``, then
the ``AH_THREADS`` environment variable, then the ``threads`` config key; it
is exported to the OpenMP, BLAS and numba pool variables before numpy loads.

Exit codes: 0 on success, 2 for configuration errors, 1 for solver failures.
All CSV output is a deterministic function of the configuration.
"""

from __future__ import annotations

import argparse
import csv
import math
import numbers
import os
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, RunConfig, load

DEFAULT_CONFIG = {
    "run-forward": "rmi_default",
    "run-adjoint": "coarse",
    "verify-gradient": "coarse",
    "bench-checkpoint": "coarse",
    "optimize": "rmi_opt",
    "particles": "particles",
    "taylor-test": "coarse",
}

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMBA_NUM_THREADS")


def resolve_threads(flag, cfg: RunConfig):
    if flag is not None:
        return flag
    env = os.environ.get("AH_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"AH_THREADS must be a positive integer, got {env!r}") from None
        if n <= 0:
            raise ConfigError(f"AH_THREADS must be a positive integer, got {env!r}")
        return n
    return cfg["threads"]


def apply_threads(n):
    """Size the BLAS/OpenMP pools; only effective before numpy is first imported."""
    if n is None:
        return
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


# -- small output helpers -------------------------------------------------------

def _fmt(v):
    if isinstance(v, numbers.Integral):
        return str(int(v))
    if isinstance(v, numbers.Real):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _outdir(args, cfg, sub):
    base = Path(args.out) if args.out else Path(cfg["output"]["dir"])
    d = base / sub
    d.mkdir(parents=True, exist_ok=True)
    return d


# -- config -> model ------------------------------------------------------------------

def rmi_setup(cfg: RunConfig, T=None):
    from .adjoint_hydro import RmiObjectiveParams
    from .hydro import EosParams, ViscosityParams
    from .rmi import RmiSetup

    m, mats, itf, drv = cfg["mesh"], cfg["materials"], cfg["interface"], cfg["drive"]
    integ, vis, obj = cfg["integration"], cfg["viscosity"], cfg["objective"]
    return RmiSetup(
        nx=m["nx"], ny=m["ny"], Lx=float(m["Lx"]), Ly=float(m["Ly"]), order=m["order"],
        interface_x=float(itf["x"]), amplitude=float(itf["amplitude"]),
        drive_x=float(drv["x"]), drive_energy=float(drv["energy"]),
        background_energy=float(drv["background"]),
        left=EosParams(**{k: float(v) for k, v in mats["left"].items()}),
        right=EosParams(**{k: float(v) for k, v in mats["right"].items()}),
        visc=ViscosityParams(float(vis["gamma1"]), float(vis["gamma2"]), float(vis["h_scale"])),
        T=float(integ["T"] if T is None else T), cfl=float(integ["cfl"]),
        integrator=integ["integrator"],
        objective=RmiObjectiveParams(float(obj["lambda1"]), float(obj["lambda2"]),
                                     float(obj["delta"])),
    )


def build_case(cfg: RunConfig, T=None):
    """Build the RMI case; a ``drive.field_file`` replaces the initial energy field."""
    import numpy as np

    from . import rmi

    case = rmi.build(rmi_setup(cfg, T))
    ff = cfg["drive"]["field_file"]
    if ff is not None:
        p = Path(ff)
        if not p.is_absolute() and cfg.source and not cfg.source.startswith("preset:"):
            p = Path(cfg.source).parent / p
        try:
            e0 = np.loadtxt(p, delimiter=",", ndmin=1)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read drive.field_file: {exc}", None, cfg.source) from None
        if e0.shape != (case.problem.nt,):
            raise ConfigError(f"drive.field_file has {e0.size} values, expected {case.problem.nt}",
                              None, cfg.source)
        if np.any(e0 < 0):
            raise ConfigError("drive.field_file contains negative energies", None, cfg.source)
        case.y0 = case.with_energy(e0)
    return case


def _dt_kwargs(cfg):
    integ = cfg["integration"]
    return dict(cfl=float(integ["cfl"]), integrator=integ["integrator"]), integ["dt"]


# -- subcommands --------------------------------------------------------------------------

def run_forward(cfg: RunConfig, out: Path):
    import numpy as np

    from . import fem
    from .adjoint_hydro import average_velocity, jet_length
    from .errors import AdjHydroError, SolverDiverged
    from .hydro import simulate

    case = build_case(cfg)
    pr, prm = case.problem, case.setup.objective
    kw, dt = _dt_kwargs(cfg)
    every = cfg["output"]["snapshot_every"]
    E0 = pr.total_energy(case.y0)["total"]
    m0 = pr.element_mass(case.y0)
    tr_rows, en_rows = [], []
    snaps = []

    def snapshot(k, y):
        x, v, e = pr.unpack(y)
        name = f"snapshot_{k:06d}"
        fem.write_vtk(out / f"{name}.vtk", pr.spaces, x, point_data={"velocity": v},
                      cell_data={"density": pr.density(y).mean(axis=1),
                                 "energy": e.reshape(pr.spaces.n_elements, -1).mean(axis=1)})
        write_csv(out / f"{name}_nodes.csv", ["node", "x", "y", "vx", "vy"],
                  [(i, *x[i], *v[i]) for i in range(len(x))])
        write_csv(out / f"{name}_energy.csv", ["dof", "e"], enumerate(e))
        snaps.append(name)

    def cb(k, t, y):
        xt, vt, _ = case.tracers.eval(y)
        tr_rows.append((k, t, *xt.ravel(), *vt.ravel(), jet_length(xt, prm), average_velocity(vt, prm)))
        en = pr.total_energy(y)
        en_rows.append((k, t, en["kinetic"], en["internal"], en["total"],
                        (en["total"] - E0) / E0 if E0 else en["total"] - E0))
        if every and k % every == 0:
            snapshot(k, y)

    try:
        fwd = simulate(pr, case.y0, case.setup.T, dt=dt, callback=cb, **kw)
    except AdjHydroError as exc:
        k, t = tr_rows[-1][:2]
        raise SolverDiverged(f"forward run failed after step {k} (t = {t:.6g}): "
                             f"{type(exc).__name__}: {exc}") from exc
    k_last = len(fwd.schedule)
    if not snaps or snaps[-1] != f"snapshot_{k_last:06d}":
        snapshot(k_last, fwd.final)
    nt = len(case.tracers)
    head = ["step", "t"] + [f"x{i + 1}_{c}" for i in range(nt) for c in "xy"]
    head += [f"v{i + 1}_{c}" for i in range(nt) for c in "xy"] + ["jet_length", "v_ave"]
    write_csv(out / "tracers.csv", head, tr_rows)
    # rel_change is absolute when the initial energy is zero
    write_csv(out / "energy.csv", ["step", "t", "kinetic", "internal", "total", "rel_change"], en_rows)
    mass_err = float(np.max(np.abs(pr.element_mass(fwd.final) - m0) / m0))
    write_csv(out / "summary.csv", ["key", "value"], [
        ("steps", k_last), ("t_final", sum(fwd.schedule)),
        ("energy_rel_change", en_rows[-1][-1]), ("mass_rel_change", mass_err),
        ("jet_length", tr_rows[-1][-2]), ("v_ave", tr_rows[-1][-1])])
    return {"steps": k_last, "energy_rel_change": en_rows[-1][-1], "mass_rel_change": mass_err,
            "jet_length": tr_rows[-1][-2], "v_ave": tr_rows[-1][-1]}


def _capacity(cfg, n_states, pct):
    if pct is None:
        pct = cfg["checkpoint"]["capacity_pct"]
    if pct is None:
        return None
    return max(1, math.ceil(pct / 100.0 * n_states))


def run_adjoint(cfg: RunConfig, out: Path, capacity_pct=None):
    import numpy as np

    from . import fem
    from .adjoint_hydro import filter_gradient, objective_and_gradient
    from .hydro import simulate

    case = build_case(cfg)
    pr, s = case.problem, case.setup
    kw, dt = _dt_kwargs(cfg)
    # realize the schedule first so the capacity can be expressed against N_t
    sched = simulate(pr, case.y0, s.T, dt=dt, **kw).schedule
    cap = _capacity(cfg, len(sched) + 1, capacity_pct)
    every = cfg["output"]["snapshot_every"]

    def on_adjoint(k, t, lam):
        if every and k % every == 0:
            _, lv, le = pr.unpack(lam)
            x = pr.unpack(case.y0)[0]
            fem.write_vtk(out / f"adjoint_{k:06d}.vtk", pr.spaces, x,
                          point_data={"adjoint_velocity": lv},
                          cell_data={"adjoint_energy":
                                     le.reshape(pr.spaces.n_elements, -1).mean(axis=1)})

    res = objective_and_gradient(pr, case.y0, s.T, case.tracers, s.objective, schedule=sched,
                                 integrator=kw["integrator"], capacity=cap, on_adjoint=on_adjoint)
    g = res.energy_block(pr)
    gf = filter_gradient(g, case.unit_mass)
    coords = pr.spaces.th_coords
    control = np.zeros(pr.nt, dtype=int)
    control[case.control_dofs] = 1
    write_csv(out / "gradient.csv", ["dof", "X", "Y", "control", "dO_de", "filtered"],
              [(i, *coords[i], control[i], g[i], gf[i]) for i in range(pr.nt)])
    gx, gv, _ = pr.unpack(res.gradient)
    write_csv(out / "gradient_kinematic.csv", ["node", "dO_dx", "dO_dy", "dO_dvx", "dO_dvy"],
              [(i, *gx[i], *gv[i]) for i in range(len(gx))])
    fem.write_vtk(out / "gradient.vtk", pr.spaces, pr.unpack(case.y0)[0],
                  point_data={"dO_dv0": gv},
                  cell_data={"dO_de0": gf.reshape(pr.spaces.n_elements, -1).mean(axis=1)})
    rep = res.store_report
    write_csv(out / "summary.csv", ["key", "value"], [
        ("objective", res.objective), ("steps", len(sched)),
        ("capacity", rep["capacity"]), ("recompute_steps", rep["recompute_steps"]),
        ("recompute_ratio", rep["recompute_ratio"])])
    return res


def verify_gradient(cfg: RunConfig, out: Path):
    """Taylor test along random Omega_1 directions plus a central-difference check."""
    import numpy as np

    from .adjoint_hydro import mask_control, objective_and_gradient, objective_only
    from .ode_core import taylor_test

    T = float(cfg["verify"]["T"])
    case = build_case(cfg, T=T)
    pr, s = case.problem, case.setup
    kw, _ = _dt_kwargs(cfg)
    base = objective_and_gradient(pr, case.y0, T, case.tracers, s.objective, **kw)
    sched = base.forward.schedule
    g = base.energy_block(pr)

    def f(e):
        return objective_only(pr, case.with_energy(e), T, case.tracers, s.objective,
                              schedule=sched, integrator=kw["integrator"])[0]

    rng = np.random.default_rng(cfg["seed"])
    rows, slopes = [], []
    for d in range(cfg["verify"]["directions"]):
        de = mask_control(rng.standard_normal(pr.nt), case.control_dofs)
        rep = taylor_test(f, lambda e: g, case.e0, de)
        slopes.append(rep.slope)
        rows += [(d, h, r, ge) for h, r, ge in rep.rows()]
    write_csv(out / "taylor.csv", ["direction", "h", "remainder", "gradient_error"], rows)
    n_fd = min(cfg["verify"]["fd_dofs"], len(case.control_dofs))
    dofs = np.sort(rng.choice(case.control_dofs, n_fd, replace=False))
    fd_rows = []
    e0 = case.e0
    for i in dofs:
        h = 1e-4 * max(abs(e0[i]), 1e-2)
        ep, em = e0.copy(), e0.copy()
        ep[i] += h
        em[i] -= h
        fd = (f(ep) - f(em)) / (2 * h)
        fd_rows.append((int(i), g[i], fd, abs(g[i] - fd) / max(abs(fd), 1e-300)))
    write_csv(out / "fd_check.csv", ["dof", "adjoint", "central_difference", "rel_error"], fd_rows)
    write_csv(out / "summary.csv", ["key", "value"],
              [("objective", base.objective)] + [(f"slope_{d}", sl) for d, sl in enumerate(slopes)]
              + [("max_fd_rel_error", max(r[-1] for r in fd_rows))])
    return {"slopes": slopes, "fd": fd_rows}


def taylor_spring(cfg: RunConfig, out: Path):
    """Spring reference problem: exact discrete adjoint against the continuous baseline."""
    import numpy as np

    from .ode_core import accumulate_gradient, continuous_adjoint_baseline, integrate, taylor_test
    from .problems import SPRING_Y0, spring_objective, spring_system

    sys_ = spring_system()
    obj = spring_objective()
    sched = [1e-2] * 1000

    def f(y0):
        return obj.terminal(integrate(sys_, y0, sched).states[-1])

    def grad(kind):
        def df(y0):
            traj = integrate(sys_, y0, sched)
            if kind == "discrete":
                return accumulate_gradient(sys_, traj, obj)
            return continuous_adjoint_baseline(sys_, traj, obj)
        return df

    rng = np.random.default_rng(cfg["seed"])
    dx = rng.standard_normal(2)
    rows, slopes = [], {}
    for kind in ("discrete", "continuous"):
        rep = taylor_test(f, grad(kind), SPRING_Y0, dx)
        slopes[kind] = rep.slope
        rows += [(kind, h, r, ge) for h, r, ge in rep.rows()]
    write_csv(out / "taylor.csv", ["gradient", "h", "remainder", "gradient_error"], rows)
    write_csv(out / "summary.csv", ["key", "value"], [(f"slope_{k}", v) for k, v in slopes.items()])
    return slopes


def bench_checkpoint(cfg: RunConfig, out: Path, capacity_pct=None):
    """Recompute overhead of the dynamic store on a cheap nonlinear map."""
    import numpy as np

    from .checkpoint import CheckpointStore, offline_min_recompute, reverse_sweep

    def stepper(k, y):
        return np.sin(y) + 0.01 * (k + 1)

    caps = [capacity_pct] if capacity_pct is not None else list(cfg["checkpoint"]["capacities"])
    rows = []
    for n_steps in cfg["checkpoint"]["steps"]:
        n_states = int(n_steps) + 1
        shadow = [np.array([0.3, -0.1])]
        for k in range(n_states - 1):
            shadow.append(stepper(k, shadow[-1]))
        for pct in caps + [100.0]:
            cap = max(1, math.ceil(pct / 100.0 * n_states))
            store = CheckpointStore(cap, stepper)
            for k, y in enumerate(shadow):
                store.offer(k, y)
            exact = True

            def visit(k, y):
                nonlocal exact
                exact &= bool(np.array_equal(y, shadow[k]))

            reverse_sweep(store, n_states, visit=visit)
            rep = store.overhead_report()
            # the exact offline bound is O(n^2 capacity); skip it where that is too slow
            if n_states ** 2 * cap <= 2e8:
                bound = offline_min_recompute(n_states, cap) / (n_states - 1)
            else:
                bound = float("nan")
            rows.append((int(n_steps), float(pct), cap, rep["recompute_steps"],
                         rep["recompute_ratio"], bound, int(exact)))
    write_csv(out / "overhead.csv", ["n_steps", "capacity_pct", "capacity", "recompute_steps",
                                     "recompute_ratio", "offline_bound", "bit_identical"], rows)
    return rows


def _write_history(out, rows):
    write_csv(out / "history.csv", ["iter", "objective", "grad_norm", "constraint_error", "alpha",
                                    "accepted", "constrain_iterations", "jet_length", "v_ave",
                                    "min_e0"], rows)


def optimize(cfg: RunConfig, out: Path, constrained=None, callback=None, capacity_pct=None):
    """Filtered, masked gradient descent on the initial energy inside Omega_1."""
    import numpy as np

    from . import design_opt as do
    from .errors import AdjHydroError
    from .adjoint_hydro import (average_velocity, filter_gradient, jet_length, mask_control,
                                objective_and_gradient, objective_only)
    from .hydro import simulate

    case = build_case(cfg)
    pr, s = case.problem, case.setup
    kw, dt = _dt_kwargs(cfg)
    o = cfg["optimizer"]
    if constrained is None:
        constrained = o["constrained"]
    w = case.unit_mass.apply(np.ones(pr.nt))           # basis integrals
    sched = simulate(pr, case.y0, s.T, dt=dt, **kw).schedule
    cap = _capacity(cfg, len(sched) + 1, capacity_pct)
    metrics = {}

    def vg(e):
        # each design gets its own CFL schedule; the adjoint replays it
        y0 = case.with_energy(e)
        res = objective_and_gradient(pr, y0, s.T, case.tracers, s.objective, capacity=cap, **kw)
        xt, vt = res.final_tracers[:2]
        metrics[e.tobytes()] = (jet_length(xt, s.objective), average_velocity(vt, s.objective))
        return res.objective, res.energy_block(pr)

    def value(e):
        # a trial design the solver cannot march (tangled mesh, EOS out of range) is rejected
        try:
            return objective_only(pr, case.with_energy(e), s.T, case.tracers, s.objective, **kw)[0]
        except AdjHydroError:
            return float("inf")

    def transform(g):
        g = mask_control(g, case.control_dofs)
        return filter_gradient(g, case.unit_mass) if o["filter"] else g

    design = do.DesignVector(case.e0, case.control_dofs, w)
    opts = do.DescentOptions(alpha=float(o["alpha"]), max_iters=o["iterations"],
                             armijo=float(o["armijo"]), max_halvings=o["max_halvings"],
                             growth=float(o["growth"]), line_search=o["line_search"],
                             constrained=constrained, constrain_tol=float(o["constrain_tol"]),
                             constrain_max_iters=o["constrain_max_iters"])
    rows = []
    coords = pr.spaces.th_coords

    def cb(rec, e):
        jl, va = metrics[e.tobytes()]
        rows.append((rec.iteration, rec.objective, rec.grad_norm, rec.constraint_error, rec.alpha,
                     int(rec.accepted), rec.constrain_iterations, jl, va, float(e.min())))
        write_csv(out / f"design_{rec.iteration:04d}.csv", ["dof", "X", "Y", "e0"],
                  [(i, *coords[i], e[i]) for i in case.control_dofs])
        _write_history(out, rows)
        if callback is not None:
            callback(rec, e, jl, va)

    res = do.descend(design, vg, value=value, options=opts, transform=transform, callback=cb)
    for rec in res.history:
        if not rec.accepted:
            rows.append((rec.iteration, rec.objective, rec.grad_norm, rec.constraint_error,
                         rec.alpha, 0, rec.constrain_iterations, rows[-1][7], rows[-1][8],
                         rows[-1][9]))
    _write_history(out, rows)
    write_csv(out / "final_design.csv", ["dof", "X", "Y", "e0"],
              [(i, *coords[i], res.design.e[i]) for i in range(pr.nt)])
    return res, rows


def particles_demo(cfg: RunConfig, out: Path):
    import numpy as np

    from . import particles as P
    from .ode_core import integrate

    c = cfg["particles"]
    s0 = P.random_start(c["n"], seed=c["seed"], min_dist=float(c["min_dist"]), q=float(c["q"]),
                        g=float(c["g"]), box=tuple(float(b) for b in c["box"]), R=float(c["R"]))
    s, hist = P.optimize_initial_velocities(s0, R=float(c["R"]), T=float(c["T"]),
                                            dt=float(c["dt"]), iters=c["iterations"])
    write_csv(out / "history.csv", ["iter", "objective", "grad_norm"],
              [(h.iteration, h.objective, h.grad_norm) for h in hist])
    prob = P.ParticleProblem(s.n, float(c["T"]), float(c["dt"]), float(c["R"]), s.g)
    traj = integrate(prob.system, s.pack(), prob.schedule)
    rows = []
    for k, (t, y) in enumerate(zip(traj.times, traj.states)):
        st = P.ParticleState.unpack(y, s.g)
        rows += [(k, t, i, *st.x[i], *st.v[i]) for i in range(st.n)]
    write_csv(out / "trajectory.csv", ["step", "t", "particle", "x", "y", "vx", "vy"], rows)
    write_csv(out / "initial_velocities.csv", ["particle", "vx", "vy"],
              [(i, *s.v[i]) for i in range(s.n)])
    return s, hist


# -- driver ---------------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="adjhydro", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("run-forward", "forward RMI run: tracer, energy and field output"),
        ("run-adjoint", "forward + adjoint run: initial-state gradient fields"),
        ("verify-gradient", "Taylor remainder and central-difference checks on the RMI gradient"),
        ("taylor-test", "Taylor test on the spring reference problem"),
        ("bench-checkpoint", "recompute overhead of the checkpoint store versus capacity"),
        ("optimize", "gradient descent on the initial energy in the drive region"),
        ("particles", "charged-particle initial-velocity optimization"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", default=None,
                       help=f"YAML file or preset name ({', '.join(PRESETS)}); "
                            f"default {DEFAULT_CONFIG[name]}")
        p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
        p.add_argument("--threads", type=int, default=None, help="worker threads (or AH_THREADS)")
        if name in ("run-adjoint", "bench-checkpoint", "optimize"):
            p.add_argument("--capacity-pct", type=float, default=None,
                           help="checkpoint capacity as a percentage of the stored states")
        if name == "optimize":
            p.add_argument("--constrained", action="store_true",
                           help="keep the energy budget and e >= 0")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config or DEFAULT_CONFIG[args.command])
        if args.threads is not None and args.threads <= 0:
            raise ConfigError("--threads must be positive")
        pct = getattr(args, "capacity_pct", None)
        if pct is not None and not 0 < pct <= 100:
            raise ConfigError("--capacity-pct must lie in (0, 100]")
        apply_threads(resolve_threads(args.threads, cfg))
        out = _outdir(args, cfg, args.command)
        if args.command in ("run-forward", "run-adjoint", "verify-gradient", "optimize"):
            rmi_setup(cfg).validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    from .errors import AdjHydroError

    try:
        if args.command == "run-forward":
            r = run_forward(cfg, out)
            print(f"{r['steps']} steps, energy change {r['energy_rel_change']:.3e}, "
                  f"jet length {r['jet_length']:.4f}")
        elif args.command == "run-adjoint":
            r = run_adjoint(cfg, out, args.capacity_pct)
            print(f"objective {r.objective:.10g}, recompute ratio "
                  f"{r.store_report['recompute_ratio']:.3f}")
        elif args.command == "verify-gradient":
            r = verify_gradient(cfg, out)
            print("taylor slopes " + " ".join(f"{s:.4f}" for s in r["slopes"]))
            print(f"max central-difference rel. error {max(x[-1] for x in r['fd']):.3e}")
        elif args.command == "taylor-test":
            r = taylor_spring(cfg, out)
            print(" ".join(f"{k} slope {v:.4f}" for k, v in r.items()))
        elif args.command == "bench-checkpoint":
            for row in bench_checkpoint(cfg, out, args.capacity_pct):
                print(f"N={row[0]:>6} cap={row[1]:>5}% ({row[2]:>5}) ratio={row[4]:.3f} "
                      f"bound={row[5]:.3f}")
        elif args.command == "optimize":
            res, rows = optimize(cfg, out, constrained=args.constrained or None,
                                 capacity_pct=args.capacity_pct)
            acc = [r for r in rows if r[5]]
            print(f"{len(acc) - 1} accepted iterations, objective {acc[0][1]:.6g} -> "
                  f"{acc[-1][1]:.6g}, jet length {acc[0][7]:.4f} -> {acc[-1][7]:.4f}")
        elif args.command == "particles":
            _, hist = particles_demo(cfg, out)
            print(f"objective {hist[0].objective:.3e} -> {hist[-1].objective:.3e} "
                  f"in {len(hist) - 1} iterations")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (AdjHydroError, FloatingPointError, ArithmeticError) as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
