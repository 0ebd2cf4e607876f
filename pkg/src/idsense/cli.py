"""Command-line surface: capacity, tradeoff, estimate, simulate, bounds.

Every command is deterministic given (config, seed) and emits byte-identical
artifacts on re-runs.  Exit codes: 0 success, 2 config or validation error,
3 infeasible budget or zero-capacity channel, 4 oracle guard breach when an
exact cross-check was demanded.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .capacity import (
    BoundParams,
    det_capacity_distortion,
    det_feedback_capacity,
    image_size_bound,
    rand_capacity_distortion,
    rand_feedback_capacity,
    rate_of_code,
    shannon_capacity_avg,
    tradeoff_curve,
)
from .channel import StateDMC, load_channel
from .coding import build_id_code
from .errors import (
    AlphabetTooLarge,
    IdsenseError,
    InfeasibleDistortion,
    TooLargeToEnumerate,
    ZeroCapacityChannel,
)
from .estimation import (
    DistortionMatrix,
    distortion_profile,
    feasible_inputs,
    hamming_distortion,
    optimal_estimator,
)
from .fixtures import fixture_path
from .sim import (
    ENUMERATION_GUARD,
    brute_force_estimator_distortion,
    exact_error_probabilities,
    monte_carlo,
)
from .typicality import typical_size_bounds

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_GUARD = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _resolve_channel(name: str) -> tuple[StateDMC, "np.ndarray | None"]:
    path = Path(name)
    if not path.exists():
        try:
            path = Path(fixture_path(name))
        except (FileNotFoundError, ModuleNotFoundError):
            _fail(EXIT_CONFIG, f"channel file {name!r} not found")
        if not path.exists():
            _fail(EXIT_CONFIG, f"channel file {name!r} not found")
    try:
        return load_channel(path)
    except (IdsenseError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(EXIT_CONFIG, f"invalid channel file {name!r}: {exc}")


def _resolve_distortion(spec: str | None, ch: StateDMC,
                        inline: "np.ndarray | None") -> DistortionMatrix:
    if spec is None or spec == "hamming":
        if spec is None and inline is not None:
            return DistortionMatrix(d=inline)
        return hamming_distortion(ch.state_size)
    path = Path(spec)
    if not path.exists():
        _fail(EXIT_CONFIG, f"distortion file {spec!r} not found")
    try:
        raw = json.loads(path.read_text())
        matrix = raw["distortion"] if isinstance(raw, dict) else raw
        return DistortionMatrix(d=np.asarray(matrix, dtype=float))
    except (IdsenseError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(EXIT_CONFIG, f"invalid distortion file {spec!r}: {exc}")


def _parse_grid(grid: str) -> list[float]:
    try:
        if ":" in grid:
            a, b, step = (float(v) for v in grid.split(":"))
            if step <= 0 or b < a:
                raise ValueError("grid must be ascending with positive step")
            values = []
            v = a
            while v <= b + 1e-12:
                values.append(round(v, 12))
                v += step
            return values
        values = [float(v) for v in grid.split(",") if v.strip() != ""]
        if not values or any(x > y for x, y in zip(values, values[1:])):
            raise ValueError("grid must be nonempty and ascending")
        return values
    except ValueError as exc:
        _fail(EXIT_CONFIG, f"bad grid {grid!r}: {exc}")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _emit_json(data, out: str | None):
    _emit(json.dumps(data, sort_keys=True, indent=2) + "\n", out)


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _emit_csv(rows: list[list], out: str | None):
    text = "\n".join(",".join(_csv_cell(v) for v in row) for row in rows) + "\n"
    _emit(text, out)


def _load_config(config: str | None) -> dict:
    if config is None:
        return {}
    path = Path(config)
    if not path.exists():
        _fail(EXIT_CONFIG, f"config file {config!r} not found")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        _fail(EXIT_CONFIG, f"config file {config!r} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        _fail(EXIT_CONFIG, "config file must hold a JSON object")
    return data


def _merged(config: dict, **flags) -> dict:
    """Config file values, overridden by any flag the user actually set."""
    merged = dict(config)
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


def _require(merged: dict, key: str):
    if merged.get(key) is None:
        _fail(EXIT_CONFIG, f"missing required parameter {key!r}")
    return merged[key]


@click.group()
def main():
    """Identification capacities and codes for state-dependent channels."""


_common = [
    click.option("--channel", default=None, help="channel JSON file or fixture name"),
    click.option("--config", default=None, help="JSON config pinning an experiment"),
    click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default=None),
    click.option("--out", default=None, help="output path (default stdout)"),
]


def _with_common(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@main.command()
@_with_common
def capacity(channel, config, fmt, out):
    """Shannon and feedback ID capacities of the averaged channel."""
    merged = _merged(_load_config(config), channel=channel, format=fmt, out=out)
    ch, _ = _resolve_channel(_require(merged, "channel"))
    try:
        shannon = shannon_capacity_avg(ch)
        det = det_feedback_capacity(ch)
        rand = rand_feedback_capacity(ch)
    except ZeroCapacityChannel as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    report = {
        "shannon": shannon.value,
        "shannon_maximizer": shannon.maximizer.p.tolist(),
        "det_f": det.value,
        "det_f_maximizer": int(det.maximizer),
        "rand_f": rand.value,
        "rand_f_maximizer": rand.maximizer.p.tolist(),
        "rand_f_gap": rand.optimality_gap,
    }
    if merged.get("format") == "csv":
        rows = [["quantity", "value"],
                ["shannon", shannon.value],
                ["det_f", det.value],
                ["rand_f", rand.value]]
        _emit_csv(rows, merged.get("out"))
    else:
        _emit_json(report, merged.get("out"))


@main.command()
@_with_common
@click.option("--distortion", default=None, help="distortion JSON file or 'hamming'")
@click.option("--grid", default=None, help="budgets as 'a:b:step' or 'a,b,c'")
@click.option("--mode", type=click.Choice(["det", "rand", "both"]), default=None)
def tradeoff(channel, config, fmt, out, distortion, grid, mode):
    """Capacity-distortion curve over a budget grid."""
    merged = _merged(_load_config(config), channel=channel, format=fmt, out=out,
                     distortion=distortion, grid=grid, mode=mode)
    ch, inline = _resolve_channel(_require(merged, "channel"))
    dist = _resolve_distortion(merged.get("distortion"), ch, inline)
    budgets = _parse_grid(str(_require(merged, "grid")))
    mode = merged.get("mode") or "det"
    modes = ["det", "rand"] if mode == "both" else [mode]
    try:
        curves = {m: tradeoff_curve(ch, dist, budgets, m) for m in modes}
    except ZeroCapacityChannel as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    if merged.get("format") == "csv":
        rows = [["mode", "D", "feasible", "value"]]
        for m in modes:
            for point in curves[m]:
                rows.append([m, point["D"], point["feasible"],
                             point["value"] if point["value"] is not None else ""])
        _emit_csv(rows, merged.get("out"))
    else:
        _emit_json({"grid": budgets, "curves": curves}, merged.get("out"))


@main.command()
@_with_common
@click.option("--distortion", default=None, help="distortion JSON file or 'hamming'")
@click.option("-D", "--budget", "budget", type=float, default=None)
def estimate(channel, config, fmt, out, distortion, budget):
    """Optimal estimator table, distortion profile, and feasible input set."""
    merged = _merged(_load_config(config), channel=channel, format=fmt, out=out,
                     distortion=distortion, budget=budget)
    ch, inline = _resolve_channel(_require(merged, "channel"))
    dist = _resolve_distortion(merged.get("distortion"), ch, inline)
    table = optimal_estimator(ch, dist)
    profile = distortion_profile(ch, dist).per_input
    report = {
        "estimator": table.h.tolist(),
        "profile": profile.tolist(),
    }
    if merged.get("budget") is not None:
        report["budget"] = float(merged["budget"])
        report["feasible_inputs"] = sorted(
            feasible_inputs(ch, dist, float(merged["budget"])))
    n_tables = ch.state_size ** (ch.input_size * ch.output_size)
    if n_tables <= ENUMERATION_GUARD:
        oracle_profile, oracle_table = brute_force_estimator_distortion(ch, dist)
        report["oracle_profile"] = oracle_profile.tolist()
        diff = float(np.abs(oracle_profile - profile).max())
        report["oracle_max_diff"] = diff
        if diff > 1e-9:
            _emit_json(report, merged.get("out"))
            _fail(1, f"estimator disagrees with the exhaustive oracle by {diff:.3e}")
    if merged.get("format") == "csv":
        rows = [["x", "d_star"]] + [[x, float(v)] for x, v in enumerate(profile)]
        _emit_csv(rows, merged.get("out"))
    else:
        _emit_json(report, merged.get("out"))


@main.command()
@_with_common
@click.option("--distortion", default=None, help="distortion JSON file or 'hamming'")
@click.option("-D", "--budget", "budget", type=float, default=None)
@click.option("--mode", type=click.Choice(["det", "rand"]), default=None)
@click.option("--n", "n", type=int, default=None, help="pilot block length")
@click.option("--identities", type=int, default=None)
@click.option("--colors", type=int, default=None)
@click.option("--eps", type=float, default=None)
@click.option("--trials", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--exact", is_flag=True, default=False,
              help="demand the exact error oracle alongside Monte Carlo")
def simulate(channel, config, fmt, out, distortion, budget, mode, n, identities,
             colors, eps, trials, seed, exact):
    """Build a feedback ID code, simulate it, and report errors + distortion."""
    merged = _merged(_load_config(config), channel=channel, format=fmt, out=out,
                     distortion=distortion, budget=budget, mode=mode, n=n,
                     identities=identities, colors=colors, eps=eps,
                     trials=trials, seed=seed)
    if exact:
        merged["exact"] = True
    ch, inline = _resolve_channel(_require(merged, "channel"))
    dist = _resolve_distortion(merged.get("distortion"), ch, inline)
    n = int(_require(merged, "n"))
    identities = int(_require(merged, "identities"))
    colors = int(_require(merged, "colors"))
    eps = float(merged.get("eps", 0.1))
    trials = int(merged.get("trials", 10_000))
    seed = int(merged.get("seed", 0))
    mode = merged.get("mode") or "det"
    budget = float(merged["budget"]) if merged.get("budget") is not None else \
        float(distortion_profile(ch, dist).per_input.max())
    try:
        code = build_id_code(ch, dist, budget, n, identities, colors, eps,
                             mode, seed)
    except InfeasibleDistortion as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    except ZeroCapacityChannel as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    except IdsenseError as exc:
        _fail(EXIT_CONFIG, str(exc))

    report = monte_carlo(code, ch, dist, trials, seed=seed)
    data = report.to_dict()
    data["code"] = code.to_dict()
    data["rate"] = rate_of_code(identities, code.m)
    params = BoundParams.for_channel(ch, n=code.m, mu=0.5)
    data["image_size_log2_K1"] = image_size_bound(params, ch)
    data["image_size_log2_K3"] = image_size_bound(params, ch, dist, budget,
                                                  variant="K3")
    if merged.get("exact"):
        try:
            oracle = exact_error_probabilities(code, ch, report.pairs)
        except TooLargeToEnumerate as exc:
            _fail(EXIT_GUARD, str(exc))
        data["exact_lambda1"] = {str(k): v for k, v in
                                 sorted(oracle["lambda1"].items())}
        data["exact_lambda2"] = {f"{a}->{b}": v for (a, b), v in
                                 sorted(oracle["lambda2"].items())}
    if merged.get("format") == "csv":
        rows = [["i", "iprime", "trials", "accept_rate", "stderr"]]
        for i in report.identities:
            p = 1.0 - report.lambda1_per_identity[i]
            rows.append([i, i, trials, p, _stderr(p, trials)])
        for (a, b) in report.pairs:
            p = report.lambda2_per_pair[(a, b)]
            rows.append([a, b, trials, p, _stderr(p, trials)])
        rows.append([])
        rows.append(["t", "d_t_hat", "stderr"])
        for t in range(code.m):
            rows.append([t + 1, float(report.d_t_hat[t]),
                         float(report.d_t_stderr[t])])
        _emit_csv(rows, merged.get("out"))
    else:
        _emit_json(data, merged.get("out"))


def _stderr(p: float, trials: int) -> float:
    return float(np.sqrt(max(p * (1.0 - p), 0.0) / trials))


@main.command()
@_with_common
@click.option("--distortion", default=None, help="distortion JSON file or 'hamming'")
@click.option("-D", "--budget", "budget", type=float, default=None)
@click.option("--n", "n", type=int, default=None, help="blocklength")
@click.option("--eps", type=float, default=None)
@click.option("--mu", type=float, default=None, help="converse slack in (0,1)")
def bounds(channel, config, fmt, out, distortion, budget, n, eps, mu):
    """Typical-set size sandwich and image-size caps at a given blocklength."""
    merged = _merged(_load_config(config), channel=channel, format=fmt, out=out,
                     distortion=distortion, budget=budget, n=n, eps=eps, mu=mu)
    ch, inline = _resolve_channel(_require(merged, "channel"))
    n = int(_require(merged, "n"))
    eps = float(merged.get("eps", 0.1))
    mu = float(merged.get("mu", 0.5))
    try:
        det = det_feedback_capacity(ch)
        params = BoundParams.for_channel(ch, n=n, mu=mu)
    except ZeroCapacityChannel as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    except ValueError as exc:
        _fail(EXIT_CONFIG, str(exc))
    lo, hi = typical_size_bounds(ch, int(det.maximizer), n, eps)
    report = {
        "n": n, "eps": eps, "mu": mu,
        "pilot": int(det.maximizer),
        "typical_log2_size_lower": lo,
        "typical_log2_size_upper": hi,
        "image_size_log2_K1": image_size_bound(params, ch),
        "image_size_log2_K2": image_size_bound(params, ch, variant="K2"),
    }
    if merged.get("budget") is not None:
        dist = _resolve_distortion(merged.get("distortion"), ch, inline)
        budget = float(merged["budget"])
        try:
            report["image_size_log2_K3"] = image_size_bound(
                params, ch, dist, budget, variant="K3")
            report["image_size_log2_K4"] = image_size_bound(
                params, ch, dist, budget, variant="K4")
        except InfeasibleDistortion as exc:
            _fail(EXIT_INFEASIBLE, str(exc))
    _emit_json(report, merged.get("out"))


if __name__ == "__main__":
    main()
