"""Command line harness: ``kinlayer <experiment> --config run.yaml``.

Each experiment writes comma-separated tables plus ``manifest.json`` into
the output directory.  Exit codes: 0 pass, 1 configuration error, 2 solver
failure, 3 acceptance threshold failure (only with ``--check``).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import EXPERIMENTS, ConfigError, RunConfig, load_config

OUTPUT_ENV = "KINLAYER_OUTPUT_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3


@dataclass
class Check:
    name: str
    value: float
    threshold: str
    passed: bool


@dataclass
class Table:
    header: tuple
    rows: list


@dataclass
class RunManifest:
    experiment: str
    config_hash: str
    version: str
    timings: dict
    files: dict
    checks: list
    config: dict = field(repr=False, default_factory=dict)

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)


class _Timer:
    def __init__(self):
        self.timings = {}

    @contextmanager
    def __call__(self, name):
        t = time.perf_counter()
        yield
        self.timings[name] = round(time.perf_counter() - t, 4)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def write_table(path, table: Table):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([_fmt(v) for v in row])


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# config -> solver objects
# ---------------------------------------------------------------------------
def velocity_spec(cfg: RunConfig):
    from .velocity_space import GridSpec

    v = cfg["velocity"]
    spec = GridSpec(scheme=v["scheme"], points_per_axis=v["points_per_axis"],
                    cutoff=v["cutoff"], v3_rule=v["v3_rule"], perp_points=v["perp_points"])
    spec.validate()
    return spec


def model_options(cfg: RunConfig):
    m = cfg["model"]
    if m["kind"] == "hard-sphere" and m["degree"] is not None:
        return {"degree": m["degree"]}
    return {}


def expansion_config(cfg: RunConfig):
    from .expansion import ExpansionConfig

    s = cfg["scenario"]
    return ExpansionConfig(
        K=cfg["K"], alpha=cfg["alpha"], model=cfg["model"]["kind"], nu0=cfg["model"]["nu0"],
        T=s["T"], theta0=s["theta0"], tau0=s["tau0"], pulse=s["pulse"],
        pulse_center=s["pulse_center"], pulse_width=s["pulse_width"], length=s["length"],
        interior_cells=s["interior_cells"], zeta_max=s["zeta_max"], layer_cells=s["layer_cells"],
        xi_max=cfg["knudsen"]["xi_max"], xi_cells=cfg["knudsen"]["xi_cells"],
        velocity=velocity_spec(cfg))


def _build_expansion(cfg, timer):
    from .expansion import Expansion

    if cfg["model"]["kind"] != "bgk":
        raise NotImplementedError("the composite scenario is built with the BGK model only")
    with timer("expansion"):
        return Expansion(expansion_config(cfg).validate())


# ---------------------------------------------------------------------------
# experiments: each returns ({file stem: Table}, [Check])
# ---------------------------------------------------------------------------
def exp_burnett(cfg, timer):
    from .burnett import burnett_functions, hat_functions, transport_coefficients
    from .collision import make_model
    from .velocity_space import GridSpec, build_full_grid

    spec = velocity_spec(cfg)
    kind, nu0 = cfg["model"]["kind"], cfg["model"]["nu0"]
    with timer("model"):
        grid = build_full_grid(spec)
        model = make_model(kind, grid, nu0=nu0, **model_options(cfg))
    funcs = burnett_functions(grid)
    rows, checks = [], []

    def add(name, value, ref, tol):
        err = abs(value - ref)
        rows.append((name, value, ref, err))
        checks.append(Check(name, err, f"<= {tol:g}", bool(err <= tol)))

    add("A12_A12", grid.inner(funcs["A12"], funcs["A12"]), 1.0, 1e-8)
    add("A11_A11", grid.inner(funcs["A11"], funcs["A11"]), 4.0 / 3.0, 1e-8)
    add("A11_A22", grid.inner(funcs["A11"], funcs["A22"]), -2.0 / 3.0, 1e-8)
    with timer("transport"):
        k1, k2 = transport_coefficients(model)
    rng = np.random.default_rng(cfg["seed"])
    G = rng.standard_normal((100, grid.size))
    LQ = np.stack([model.apply_L(q) for q in model.P.Q.T])
    null = float(np.max(np.abs(G @ (grid.weights[:, None] * LQ.T))))
    coer = model.coercivity_constant()
    if kind == "bgk":
        add("kappa1", k1, 1.0 / nu0, 1e-8)
        add("kappa2", k2, 2.5 / nu0, 1e-8)
        hats = hat_functions(model)
        err = max(float(np.max(np.abs(hats[k] - funcs[k] / nu0))) for k in hats if k.startswith("A"))
        rows.append(("A_hat_vs_A_over_nu0", err, 0.0, err))
        checks.append(Check("A_hat_vs_A_over_nu0", err, "<= 1e-10", err <= 1e-10))
        null_tol = 1e-12
    else:
        with timer("refined_model"):
            fine = GridSpec(**{**asdict(spec), "points_per_axis": spec.points_per_axis + 4})
            fmodel = make_model(kind, build_full_grid(fine), **model_options(cfg))
            f1, f2 = transport_coefficients(fmodel)
        for name, a, b in (("kappa1", k1, f1), ("kappa2", k2, f2)):
            rel = abs(a - b) / abs(b)
            rows.append((name, a, b, rel))
            checks.append(Check(f"{name}_refinement", rel, "< 1e-3", rel < 1e-3))
        fcoer = fmodel.coercivity_constant()
        rows.append(("coercivity_refined", fcoer, coer, abs(fcoer - coer) / coer))
        checks.append(Check("coercivity_stability", abs(fcoer - coer) / coer, "<= 0.1",
                            abs(fcoer - coer) <= 0.1 * coer))
        lo, hi = model.nu_bounds
        rows.append(("nu_lower_bound", lo, 0.0, 0.0))
        rows.append(("nu_upper_bound", hi, 0.0, 0.0))
        null_tol = 1e-8
    rows.append(("null_space_orthogonality", null, 0.0, null))
    checks.append(Check("null_space_orthogonality", null, f"<= {null_tol:g}", null <= null_tol))
    rows.append(("coercivity", coer, 0.0, 0.0))
    checks.append(Check("coercivity_positive", coer, "> 0", coer > 0))
    return {"burnett": Table(("quantity", "value", "reference", "error"), rows)}, checks


def exp_slip(cfg, timer):
    from .knudsen import KnudsenSetup, XiGrid, oracle_slip, slip_coefficients
    from .velocity_space import build_axisym_grid

    kind, nu0 = cfg["model"]["kind"], cfg["model"]["nu0"]
    kn = cfg["knudsen"]
    alpha = cfg["alpha"]
    grid = build_axisym_grid(velocity_spec(cfg), 0)
    with timer("slip"):
        setup = KnudsenSetup.build(alpha, grid, kind, nu0,
                                   XiGrid.graded(kn["xi_max"], kn["xi_cells"]), **model_options(cfg))
        table = slip_coefficients(setup, order=1)
    with timer("slip_refined"):
        fine = KnudsenSetup.build(alpha, grid, kind, nu0,
                                  XiGrid.graded(kn["xi_max"], 2 * kn["xi_cells"]),
                                  **model_options(cfg))
        ftable = slip_coefficients(fine, order=1)
    with timer("oracle"):
        ob = oracle_slip(setup, alpha, "b1")[0]
        oc = oracle_slip(setup, alpha, "c1")[0]
    b1, c1 = table.b[1], table.c[1]
    selfconv = max(abs(b1 - ftable.b[1]), abs(c1 - ftable.c[1]))
    odiff = max(abs(b1 - ob), abs(c1 - oc))
    sols = table.solutions.values()
    flux = max(float(np.max(np.abs(s.flux_profile))) for s in sols)
    rate = min(s.decay_rate for s in sols)
    resid = max(s.decay_residual for s in sols)
    header = ("alpha", "model", "b1", "c1", "self_convergence", "oracle_b1", "oracle_c1",
              "oracle_difference", "max_flux", "min_decay_rate", "max_tail_residual")
    row = (alpha, table.model, b1, c1, selfconv, ob, oc, odiff, flux, rate, resid)
    checks = [Check("finite_coefficients", float(abs(b1) + abs(c1)), "finite",
                    bool(np.isfinite(b1) and np.isfinite(c1))),
              Check("self_convergence", selfconv, "< 1e-3", selfconv < 1e-3),
              Check("oracle_agreement", odiff, "< 1e-2", odiff < 1e-2),
              Check("flux_zero", flux, "<= 1e-8", flux <= 1e-8),
              Check("decay_rate_positive", rate, "> 0", rate > 0),
              Check("tail_fit_residual", resid, "< 0.05", resid < 0.05)]
    return {"slip": Table(header, [row])}, checks


def exp_layers(cfg, timer):
    from .expansion import layer_norm_scaling
    from .viscous import erfc_benchmark

    with timer("erfc"):
        erows, orders = erfc_benchmark()
    exp = _build_expansion(cfg, timer)
    st = exp.layers[0]
    cons = float(max(np.max(np.abs(st.u3)), np.max(np.abs(st.rho + st.theta))))
    eps_list = cfg["eps_list"]
    with timer("layer_norms"):
        norms, slope = layer_norm_scaling(exp, eps_list)
    tables = {
        "erfc": Table(("cells", "steps", "max_error", "observed_order"),
                      [r + (o,) for r, o in zip(erows, [float("nan")] + orders)]),
        "layer_norms": Table(("epsilon", "norm", "fitted_slope"),
                             [(e, n, slope) for e, n in norms]),
    }
    checks = [Check("erfc_order", min(orders), ">= 1.9", min(orders) >= 1.9),
              Check("order1_constraints", cons, "<= 1e-12", cons <= 1e-12)]
    if len(eps_list) > 1:
        checks.append(Check("layer_norm_slope", slope, "0.25 +- 0.02", abs(slope - 0.25) <= 0.02))
    return tables, checks


def exp_compose(cfg, timer):
    from . import hydro

    exp = _build_expansion(cfg, timer)
    K = cfg["K"]
    g = exp.vgrid
    T = exp.times[-1]
    rows, checks = [], []
    L = exp.config.length
    with timer("compose"):
        for eps in cfg["eps_list"]:
            comp = exp.compose(eps, T, exp.residual_grid(eps), K=K)
            err = 0.0
            if K >= 1:
                x = np.linspace(0.5 * L, L, 64)
                far = exp.compose(eps, T, x, K=K).perturbation(g) / np.sqrt(eps)
                q1 = exp.interior[1].values_at(exp.times.size - 1, x)
                err = float(np.max(np.abs(hydro.moments(far, g) - q1)))
            rows.append((eps, K, comp.min_value, err))
            if eps <= 0.1:
                checks.append(Check(f"positivity_eps_{eps:g}", comp.min_value, ">= 0",
                                    comp.min_value >= 0))
            checks.append(Check(f"interior_moments_eps_{eps:g}", err, "<= sqrt(eps)",
                                err <= np.sqrt(eps)))
    return {"compose": Table(("epsilon", "K", "min_value", "interior_moment_error"), rows)}, checks


def exp_residual(cfg, timer):
    from .expansion import residual_table

    exp = _build_expansion(cfg, timer)
    K = cfg["K"]
    with timer("residual"):
        rows, slope = residual_table(exp, cfg["eps_list"], K=K)
    header = ("epsilon", "K", "interior_residual", "boundary_residual", "fitted_slope")
    checks = []
    if len(rows) > 1 and K >= 1:
        target = (K - 1) / 2.0
        checks.append(Check("residual_slope", slope, f"{target:g} +- 0.15",
                            abs(slope - target) <= 0.15))
    return {"residual": Table(header, [r + (slope,) for r in rows])}, checks


def exp_converge(cfg, timer):
    from .reference import ConvergenceRow, convergence_study

    exp = _build_expansion(cfg, timer)
    ref = cfg["reference"]
    with timer("convergence"):
        rows, order = convergence_study(cfg["eps_list"], exp, cells_per_eps=ref["cells_per_eps"],
                                        audit=ref["audit"], K=cfg["K"], limiter=ref["limiter"],
                                        cfl=ref["cfl"])
    # wall-clock seconds stay in the manifest so the table is reproducible
    header = tuple(h for h in ConvergenceRow.HEADER if h != "seconds") + ("fitted_order",)
    table = Table(header, [r.row()[:-1] + (order,) for r in rows])
    for r in rows:
        timer.timings[f"solve_eps_{r.epsilon:g}"] = round(r.seconds, 4)
    flux = max(r.wall_flux for r in rows)
    checks = [Check("wall_mass_flux", flux, "<= 1e-12", flux <= 1e-12)]
    if len(rows) > 1:
        checks.append(Check("fitted_order", order, "0.25 +- 0.1", abs(order - 0.25) <= 0.1))
    if ref["audit"]:
        change = max(r.audit_change for r in rows)
        checks.append(Check("resolution_audit", change, "< 0.05", change < 0.05))
    return {"convergence": table}, checks


EXPERIMENT_FUNCS = {"burnett": exp_burnett, "slip": exp_slip, "layers": exp_layers,
                    "compose": exp_compose, "residual": exp_residual, "converge": exp_converge}
assert set(EXPERIMENT_FUNCS) == set(EXPERIMENTS)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------
def resolve_output(cfg: RunConfig, out=None):
    base = Path(out or cfg["output"] or f"kinlayer-{cfg.experiment}")
    if base.is_absolute():
        return base
    root = os.environ.get(OUTPUT_ENV)
    return Path(root) / base if root else base


def run_experiment(cfg: RunConfig, out_dir, threads=None):
    """Run one experiment, write its tables and manifest, return the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    timer = _Timer()
    with threadpool_limits(limits=threads):
        with timer("total"):
            tables, checks = EXPERIMENT_FUNCS[cfg.experiment](cfg, timer)
    files = {}
    for stem in sorted(tables):
        path = out_dir / f"{stem}.csv"
        write_table(path, tables[stem])
        files[path.name] = sha256_file(path)
    manifest = RunManifest(cfg.experiment, cfg.digest(), __version__, timer.timings, files,
                           [asdict(c) for c in checks], cfg.data)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return manifest


def build_parser():
    p = argparse.ArgumentParser(prog="kinlayer", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="YAML run configuration")
        s.add_argument("--out", help="output directory (relative paths go under "
                                     f"${OUTPUT_ENV} when set)")
        s.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
        s.add_argument("--check", action="store_true",
                       help="apply acceptance thresholds and set the exit code")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.experiment)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is not None and args.threads < 1:
        print("invalid configuration:\n  --threads: must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = resolve_output(cfg, args.out)
    try:
        manifest = run_experiment(cfg, out_dir, args.threads)
    except Exception as exc:  # solver failures are reported, not raised
        print(f"{args.experiment} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for c in manifest.checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['name']}: {c['value']:.6g} ({c['threshold']})")
    print(f"wrote {len(manifest.files)} table(s) and manifest.json to {out_dir}")
    if args.check and not manifest.passed:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
