"""Experiment drivers and the command-line entry point.

Verbs: `compare` (reference vs semiclassical field on a window), `sweep`
(eps-convergence table), `caustic-map` (branch counts and Jacobians over a
(t, x) rectangle), `maslov-audit` (eigenvalue-count vs crossing-count) and
`wigner` (momentum concentration masses). Every verb writes CSV tables plus
rendered figures into the output directory and is deterministic for a fixed
scenario file.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CausticInWindow,
    CausticProximity,
    ScenarioError,
    SemiclassicError,
)
from .maslov import maslov_free
from .ray_map import CAUSTIC_THRESHOLD, caustic_times_many, find_branches_many
from .reference import evolve_split_step, save_wavefield_csv, wkb_initial_field
from .reports import (
    caustic_map_figure,
    compare_figure,
    maslov_audit_figure,
    save_figure,
    sweep_figure,
    wigner_figure,
    write_csv,
)
from .scenario import Scenario, load_scenario
from .wigner import branch_momenta, concentration_weights, wigner_transform
from .wkb import wkb_grid

AUDIT_SEED = 74251
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


@dataclass(frozen=True)
class CompareReport:
    """Per-point comparison of the reference and semiclassical fields."""

    t: float
    eps: float
    xs: np.ndarray
    reference: np.ndarray
    semiclassical: np.ndarray
    sup_error: float
    nodes: int
    dt: float
    csv_path: Path | None = None
    fig_path: Path | None = None


def _base_meta(scenario: Scenario, **extra) -> dict:
    meta = {"scenario": scenario.name, "scenario_hash": scenario.hash()}
    meta.update({k: repr(v) if isinstance(v, float) else v
                 for k, v in extra.items()})
    return meta


def _require_1d(scenario: Scenario, verb: str) -> None:
    if scenario.dimension != 1:
        raise ScenarioError(f"the {verb} driver supports one-dimensional "
                            "scenarios only")


def run_compare(scenario: Scenario, t: float, eps: float,
                out_dir=None, dump_fields: bool = False) -> CompareReport:
    """Evolve the reference solver and compare against the ray sum on K.

    The window K is the scenario's compare_window; every grid node inside
    it is compared. Raises CausticInWindow when a window point sits on the
    caustic within resolution.
    """
    _require_1d(scenario, "compare")
    if scenario.compare_window is None:
        raise ScenarioError("scenario has no compare_window")
    grid = scenario.grid_for(eps)
    dt = scenario.solver_dt(eps)
    field0 = wkb_initial_field(grid, eps, scenario.initial_amplitude,
                               scenario.initial_phase)
    evolved = evolve_split_step(scenario.potential, field0, t, dt)

    ax = grid.axes()[0]
    lo, hi = scenario.compare_window[0]
    mask = (ax >= lo) & (ax <= hi)
    xs = ax[mask]
    if xs.size == 0:
        raise ScenarioError("compare_window contains no grid nodes")
    try:
        vals, _ = wkb_grid(scenario, t, xs[:, None], [eps])
    except CausticProximity as exc:
        raise CausticInWindow(f"comparison window touches the caustic: {exc}") \
            from exc
    wkb_vals = vals[0]
    ref_vals = evolved.values[mask]
    diff = np.abs(ref_vals - wkb_vals)
    sup = float(np.max(diff))

    csv_path = fig_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        tag = f"t{t:g}_eps{eps:.8g}"
        meta = _base_meta(scenario, t=float(t), eps=float(eps),
                          nodes=grid.nodes[0], dt=float(dt), sup_error=sup,
                          window=f"[{lo!r},{hi!r}]",
                          sampling_ok=grid.sampling_ok(eps, scenario.momentum_bound()),
                          caustic_threshold=repr(CAUSTIC_THRESHOLD))
        rows = [
            [x, v.real, v.imag, w.real, w.imag, d]
            for x, v, w, d in zip(xs, ref_vals, wkb_vals, diff)
        ]
        csv_path = write_csv(out_dir / f"compare_{tag}.csv",
                             ["x", "re_ref", "im_ref", "re_wkb", "im_wkb",
                              "abs_diff"], rows, meta)
        fig = compare_figure(xs, np.abs(ref_vals), np.abs(wkb_vals), diff,
                             f"{scenario.name}: t={t:g}, eps={eps:g}, "
                             f"sup={sup:.3e}")
        fig_path = save_figure(fig, out_dir / f"compare_{tag}.png")
        if dump_fields:
            save_wavefield_csv(out_dir / f"field_{tag}.csv", evolved,
                               meta=_base_meta(scenario))
    return CompareReport(t=float(t), eps=float(eps), xs=xs,
                         reference=ref_vals, semiclassical=wkb_vals,
                         sup_error=sup, nodes=grid.nodes[0], dt=dt,
                         csv_path=csv_path, fig_path=fig_path)


def run_sweep(scenario: Scenario, t: float, eps_list=None, out_dir=None,
              threads: int = 1):
    """Compare across an eps ladder and tabulate successive error ratios."""
    eps_values = sorted(eps_list or scenario.eps_list, reverse=True)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        reports = list(pool.map(
            lambda e: run_compare(scenario, t, e, out_dir=out_dir), eps_values))
    sups = [r.sup_error for r in reports]
    ratios = [None] + [sups[i - 1] / sups[i] for i in range(1, len(sups))]
    if out_dir is not None:
        rows = [
            [r.eps, r.nodes, r.dt, r.sup_error,
             "" if ratio is None else ratio]
            for r, ratio in zip(reports, ratios)
        ]
        meta = _base_meta(scenario, t=float(t))
        write_csv(Path(out_dir) / f"sweep_t{t:g}.csv",
                  ["eps", "nodes", "dt", "sup_error", "ratio_to_previous"],
                  rows, meta)
        fig = sweep_figure([r.eps for r in reports], sups,
                           f"{scenario.name}: sup error vs eps at t={t:g}")
        save_figure(fig, Path(out_dir) / f"sweep_t{t:g}.png")
    return reports, ratios


def run_caustic_map(scenario: Scenario, t_range, x_range, resolution: int,
                    out_dir=None):
    """Branch count, minimum Jacobian and Maslov indices over a (t, x) grid.

    Cells are data, not failures: a cell is flagged when a root's Jacobian
    falls below the caustic threshold, the branch count is even or zero, or
    the count changes from the neighboring x-cell (a fold crosses between
    them). Maslov entries are left blank where the crossing count is
    unreliable.
    """
    _require_1d(scenario, "caustic-map")
    if resolution < 16:
        raise ScenarioError("caustic-map resolution must be at least 16")
    ts = np.linspace(t_range[0], t_range[1], resolution)
    xs = np.linspace(x_range[0], x_range[1], resolution)

    counts = np.zeros((resolution, resolution), dtype=int)
    min_j = np.full((resolution, resolution), np.nan)
    rows = []
    max_branches = 0
    for i, t in enumerate(ts):
        blists = find_branches_many(scenario.potential, scenario.initial_phase,
                                    float(t), xs[:, None], scenario.search_box,
                                    grid_density=scenario.grid_density,
                                    dt=scenario.flow_dt)
        flat = [(k, b) for k, bl in enumerate(blists) for b in bl]
        m_by_cell = {}
        if flat:
            ys = np.array([b.y for _, b in flat])
            crossings, end_dets = caustic_times_many(
                scenario.potential, scenario.initial_phase, ys,
                np.full(len(flat), float(t)), dt=scenario.flow_dt)
            for (k, b), found, dend in zip(flat, crossings, end_dets):
                ok = abs(dend) > CAUSTIC_THRESHOLD and all(tr for _, tr in found)
                m_by_cell.setdefault(k, []).append(
                    len(found) if ok else None)
        row_counts = np.array([len(bl) for bl in blists])
        # a caustic fold between two x-cells shows up as a count change;
        # flag both sides of every transition along the row
        transition = np.zeros(resolution, dtype=bool)
        change = row_counts[1:] != row_counts[:-1]
        transition[1:] |= change
        transition[:-1] |= change
        for k, x in enumerate(xs):
            bl = blists[k]
            n = len(bl)
            jmin = min((b.J for b in bl), default=np.nan)
            flagged = (n == 0 or n % 2 == 0 or bool(transition[k])
                       or any(b.caustic_proximal for b in bl))
            ms = m_by_cell.get(k, [])
            counts[i, k] = n
            min_j[i, k] = jmin
            rows.append([t, x, n, jmin if bl else "", flagged,
                         ";".join("" if m is None else str(m) for m in ms)])
            max_branches = max(max_branches, n)

    csv_path = fig_path = None
    if out_dir is not None:
        meta = _base_meta(scenario, t_min=float(ts[0]), t_max=float(ts[-1]),
                          x_min=float(xs[0]), x_max=float(xs[-1]),
                          resolution=resolution,
                          caustic_threshold=repr(CAUSTIC_THRESHOLD))
        csv_path = write_csv(Path(out_dir) / "caustic_map.csv",
                             ["t", "x", "n_branches", "min_j", "caustic_flag",
                              "maslov_indices"], rows, meta)
        fig = caustic_map_figure(ts, xs, counts, min_j,
                                 f"{scenario.name}: caustic map")
        fig_path = save_figure(fig, Path(out_dir) / "caustic_map.png")
    return rows, counts, min_j, csv_path, fig_path


def run_maslov_audit(scenario: Scenario, n_samples: int = 200,
                     t_range=None, x_range=None, out_dir=None,
                     seed: int = AUDIT_SEED):
    """Cross-validate the free-case eigenvalue count against crossings.

    Zero-potential scenarios only. Samples (t, x) uniformly, rejecting
    points whose branches come too close to the caustic, and records both
    index computations per branch.
    """
    _require_1d(scenario, "maslov-audit")
    if not scenario.potential.is_zero:
        raise ScenarioError("maslov-audit needs the free-case eigenvalue "
                            "formula, so the potential must be zero")
    rng = np.random.default_rng(seed)
    if t_range is None:
        t_range = (0.1, max(scenario.time_list))
    if x_range is None:
        if scenario.compare_window is not None:
            x_range = tuple(scenario.compare_window[0])
        else:
            lo, hi = scenario.search_box[0]
            quarter = 0.25 * (hi - lo)
            x_range = (lo + quarter, hi - quarter)

    accepted = []
    attempts = 0
    while len(accepted) < n_samples and attempts < 40 * n_samples:
        attempts += 1
        chunk = min(n_samples - len(accepted), 64)
        ts = rng.uniform(t_range[0], t_range[1], size=chunk)
        xs = rng.uniform(x_range[0], x_range[1], size=(chunk, 1))
        blists = find_branches_many(scenario.potential, scenario.initial_phase,
                                    ts, xs, scenario.search_box,
                                    grid_density=scenario.grid_density,
                                    dt=scenario.flow_dt)
        for t, x, bl in zip(ts, xs, blists):
            if bl and all(b.J > 1e-3 for b in bl):
                accepted.append((float(t), float(x[0]), bl))
    if len(accepted) < n_samples:
        raise ScenarioError("could not find enough off-caustic samples; "
                            "shrink the sampling window")

    flat = [(i, t, x, b) for i, (t, x, bl) in enumerate(accepted) for b in bl]
    ys = np.array([b.y for _, _, _, b in flat])
    tts = np.array([t for _, t, _, _ in flat])
    crossings, end_dets = caustic_times_many(
        scenario.potential, scenario.initial_phase, ys, tts,
        dt=scenario.flow_dt)

    rows = []
    mismatches = 0
    sample_match = np.ones(len(accepted), dtype=bool)
    for (i, t, x, b), found, dend in zip(flat, crossings, end_dets):
        m_cross = len(found)
        hess = scenario.initial_phase.hessian(b.y[None, :])[0]
        m_free = maslov_free(hess, t)
        match = (m_free == m_cross and abs(dend) > CAUSTIC_THRESHOLD
                 and all(tr for _, tr in found))
        if not match:
            mismatches += 1
            sample_match[i] = False
        rows.append([t, x, b.index, float(b.y[0]), b.J, m_free, m_cross, match])

    csv_path = fig_path = None
    if out_dir is not None:
        meta = _base_meta(scenario, samples=len(accepted), seed=seed,
                          mismatches=mismatches,
                          t_min=float(t_range[0]), t_max=float(t_range[1]),
                          x_min=float(x_range[0]), x_max=float(x_range[1]))
        csv_path = write_csv(Path(out_dir) / "maslov_audit.csv",
                             ["t", "x", "branch", "y", "jacobian",
                              "m_free", "m_crossings", "match"], rows, meta)
        fig = maslov_audit_figure(np.array([a[0] for a in accepted]),
                                  np.array([a[1] for a in accepted]),
                                  sample_match,
                                  f"{scenario.name}: Maslov audit "
                                  f"({mismatches} mismatches)")
        fig_path = save_figure(fig, Path(out_dir) / "maslov_audit.png")
    return rows, mismatches, csv_path, fig_path


def run_wigner(scenario: Scenario, t: float, eps_list=None, out_dir=None):
    """Momentum concentration masses against classical weights per eps."""
    _require_1d(scenario, "wigner")
    if scenario.wigner_x is None:
        raise ScenarioError("scenario has no wigner evaluation point")
    x = scenario.wigner_x
    width = scenario.wigner_window_width
    branches, momenta = branch_momenta(scenario, t, x)
    predicted = [float(scenario.initial_amplitude.value(b.y[None, :])[0] ** 2
                       / b.J) for b in branches]

    eps_values = sorted(eps_list or scenario.eps_list, reverse=True)
    rows = []
    slices = []
    masses_by_eps = {}
    for eps in eps_values:
        grid = scenario.grid_for(eps)
        field0 = wkb_initial_field(grid, eps, scenario.initial_amplitude,
                                   scenario.initial_phase)
        field = evolve_split_step(scenario.potential, field0, t,
                                  scenario.solver_dt(eps))
        masses = concentration_weights(field, scenario, t, x,
                                       window_width=width)
        masses_by_eps[eps] = masses
        for b, (center, mass), pred in zip(branches, masses, predicted):
            rel = abs(mass - pred) / pred if pred > 0 else ""
            rows.append([eps, b.index, float(b.y[0]), center, mass, pred, rel])
        span = float(np.max(np.abs(momenta))) + 3.0 * width
        xi_axis = np.linspace(-span, span, 601)
        w = wigner_transform(field, x, xi_axis,
                             y_max=min(200.0, 8.0 / np.sqrt(eps)))
        slices.append((eps, xi_axis, w.values))

    csv_path = fig_path = None
    if out_dir is not None:
        meta = _base_meta(scenario, t=float(t), window_width=float(width),
                          x=float(x[0]))
        csv_path = write_csv(Path(out_dir) / f"wigner_t{t:g}.csv",
                             ["eps", "branch", "y", "xi_center", "mass",
                              "predicted", "rel_error"], rows, meta)
        fig = wigner_figure(slices,
                            [(float(m), width) for m in momenta[:, 0]],
                            f"{scenario.name}: Wigner concentration at t={t:g}")
        fig_path = save_figure(fig, Path(out_dir) / f"wigner_t{t:g}.png")
    return masses_by_eps, predicted, csv_path, fig_path


def _add_common(parser):
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--out", default=None, help="output directory "
                        "(default: scenario output_dir)")
    parser.add_argument("--eps", type=float, action="append", default=None,
                        help="epsilon value (repeatable; default: scenario list)")
    parser.add_argument("--t", type=float, default=None,
                        help="evolution time (default: scenario time_list)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent jobs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semiclassic",
        description="Semiclassical Schrodinger toolkit drivers")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("compare", help="reference vs semiclassical field")
    _add_common(p)
    p.add_argument("--dump-fields", action="store_true",
                   help="also write the evolved reference field as CSV")

    p = sub.add_parser("sweep", help="eps-convergence table")
    _add_common(p)

    p = sub.add_parser("caustic-map", help="branch counts over a (t,x) grid")
    _add_common(p)
    p.add_argument("--t-min", type=float, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--x-min", type=float, default=None)
    p.add_argument("--x-max", type=float, default=None)
    p.add_argument("--resolution", type=int, default=None)

    p = sub.add_parser("maslov-audit", help="eigenvalue vs crossing count")
    _add_common(p)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=AUDIT_SEED)

    p = sub.add_parser("wigner", help="momentum concentration masses")
    _add_common(p)
    return parser


def _times(scenario, args):
    return [args.t] if args.t is not None else list(scenario.time_list)


def _run(args) -> int:
    scenario = load_scenario(args.scenario)
    out_dir = Path(args.out) if args.out else Path(scenario.output_dir)
    eps_list = args.eps or list(scenario.eps_list)
    if any(e <= 0 for e in eps_list):
        raise ScenarioError("eps values must be positive")

    if args.verb == "compare":
        for t in _times(scenario, args):
            for eps in eps_list:
                rep = run_compare(scenario, t, eps, out_dir=out_dir,
                                  dump_fields=args.dump_fields)
                print(f"compare t={t:g} eps={eps:g}: sup error "
                      f"{rep.sup_error:.6e} -> {rep.csv_path}")
    elif args.verb == "sweep":
        for t in _times(scenario, args):
            reports, ratios = run_sweep(scenario, t, eps_list,
                                        out_dir=out_dir, threads=args.threads)
            for rep, ratio in zip(reports, ratios):
                extra = "" if ratio is None else f" ratio {ratio:.3f}"
                print(f"sweep t={t:g} eps={rep.eps:g}: sup "
                      f"{rep.sup_error:.6e}{extra}")
    elif args.verb == "caustic-map":
        cfg = scenario.caustic_map or {}
        t_lo = args.t_min if args.t_min is not None else \
            cfg.get("t_range", [0.05, max(scenario.time_list)])[0]
        t_hi = args.t_max if args.t_max is not None else \
            cfg.get("t_range", [0.05, max(scenario.time_list)])[1]
        xr = cfg.get("x_range")
        if xr is None:
            xr = scenario.compare_window[0] if scenario.compare_window is not None \
                else scenario.search_box[0]
        x_lo = args.x_min if args.x_min is not None else xr[0]
        x_hi = args.x_max if args.x_max is not None else xr[1]
        res = args.resolution if args.resolution is not None else \
            int(cfg.get("resolution", 32))
        rows, _, _, csv_path, _ = run_caustic_map(
            scenario, (t_lo, t_hi), (x_lo, x_hi), res, out_dir=out_dir)
        flagged = sum(1 for r in rows if r[4])
        print(f"caustic-map {res}x{res}: {flagged} flagged cells -> {csv_path}")
    elif args.verb == "maslov-audit":
        _, mismatches, csv_path, _ = run_maslov_audit(
            scenario, n_samples=args.samples, out_dir=out_dir, seed=args.seed)
        print(f"maslov-audit: {mismatches} mismatches over {args.samples} "
              f"samples -> {csv_path}")
    elif args.verb == "wigner":
        for t in _times(scenario, args):
            masses_by_eps, predicted, csv_path, _ = run_wigner(
                scenario, t, eps_list, out_dir=out_dir)
            finest = min(masses_by_eps)
            rels = [abs(m - p) / p for (_, m), p in
                    zip(masses_by_eps[finest], predicted)]
            print(f"wigner t={t:g}: worst rel error at eps={finest:g} is "
                  f"{max(rels):.3e} -> {csv_path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ScenarioError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SemiclassicError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
