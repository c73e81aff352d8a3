"""Command-line interface.

Exit codes: 0 success, 1 usage or I/O error, 2 degenerate eigenvalue gap,
3 non-convergence (results are still written), 4 oracle failure.
"""

from __future__ import annotations

import dataclasses
import functools
import sys
import time

import click
import numpy as np

from . import criteria
from .builtin import BUILTIN_NAMES, figure_data
from .core import delta_derivative, residual_check, vector_norm
from .errors import DegenerateGap, IndexOutOfRange, OracleFailure
from .modelspec import ModelSpec, SpecError, dumps, format_number, load_spec, write_atomic
from .oracle import DenseModel, convergence_study, truncate_model
from .svg import line_chart

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DEGENERATE = 2
EXIT_NONCONVERGENCE = 3
EXIT_ORACLE = 4

DISPLAY_CAP = 20
RESIDUAL_TOLERANCE = 1e-8


def _model_options(func):
    @click.option("--model", "model_path", type=click.Path(dir_okay=False), help="JSON model file.")
    @click.option("--builtin", type=click.Choice(sorted(BUILTIN_NAMES)), help="Built-in model.")
    @click.option("--index", "index", type=int, default=1, show_default=True)
    @click.option("--max-terms", type=int, envvar="EIGENDERIV_MAX_TERMS",
                  help="Series truncation cap [env: EIGENDERIV_MAX_TERMS].")
    @click.option("--rel-tol", type=float, help="Relative block tolerance.")
    @click.option("--nested-max-terms", type=int, help="Cap for each level of a double series.")
    @click.option("--gap-min", type=float, help="Relative eigenvalue gap threshold.")
    @click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Write results here.")
    @click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
    @functools.wraps(func)
    def wrapper(model_path, builtin, max_terms, rel_tol, nested_max_terms, gap_min, **kwargs):
        spec = _resolve_spec(model_path, builtin, gap_min)
        policy = spec.truncation_policy(
            max_terms=max_terms, rel_tol=rel_tol, nested_max_terms=nested_max_terms
        )
        if "initial_terms" not in (spec.policy or {}) and policy.initial_terms > policy.max_terms:
            policy = policy.exhaustive(policy.max_terms)
        return func(spec=spec, policy=policy, **kwargs)

    return wrapper


def _resolve_spec(model_path, builtin, gap_min) -> ModelSpec:
    if (model_path is None) == (builtin is None):
        raise click.UsageError("give exactly one of --model PATH or --builtin NAME")
    if builtin is not None:
        spec = ModelSpec.builtin(builtin)
    else:
        spec = load_spec(model_path)
    if gap_min is not None:
        spec = dataclasses.replace(spec, gap_min=gap_min)
    return spec


def _result(command, spec, outputs, started, **extra) -> dict:
    out = {"command": command, "model_fingerprint": spec.fingerprint()}
    out.update(extra)
    out["outputs"] = outputs
    out["wall_time_s"] = round(time.perf_counter() - started, 6)
    return out


def _emit(result: dict, out_path, csv_text: str | None = None, fmt: str = "json", full: dict | None = None):
    """Print the (possibly capped) result and write the full one to ``out_path``.

    Files omit ``wall_time_s`` so they are byte-identical across runs.
    """
    click.echo(dumps(result), nl=False)
    if out_path is not None:
        if fmt == "csv" and csv_text is not None:
            write_atomic(out_path, csv_text)
        else:
            data = dict(full if full is not None else result)
            data.pop("wall_time_s", None)
            write_atomic(out_path, dumps(data))


def _coefficient_rows(values: np.ndarray):
    return [[int(k) + 1, values[k].item()] for k in range(values.size)]


def _csv(header: str, rows) -> str:
    lines = [header]
    for row in rows:
        cells = []
        for x in row:
            if x is None:
                cells.append("")
            elif isinstance(x, str):
                cells.append(x)
            elif isinstance(x, (int, np.integer)):
                cells.append(str(int(x)))
            elif isinstance(x, complex):
                cells.extend([format_number(x.real), format_number(x.imag)])
            else:
                cells.append(format_number(x))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


@click.group()
def cli():
    """Eigenvalue and eigenvector perturbations for operators in eigenbasis coordinates."""


@cli.command()
@_model_options
def compute(spec, policy, index, out_path, fmt):
    """Lambda_i, Delta_i and ||Delta_i|| for one index."""
    started = time.perf_counter()
    model = spec.to_model()
    res = delta_derivative(model, index, policy)
    values = res.delta.values
    outputs = {
        "index": res.index,
        "lambda_derivative": res.lambda_derivative,
        "delta_norm": vector_norm(res.delta),
        "delta_terms": int(values.size),
        "delta": _coefficient_rows(values[:DISPLAY_CAP]),
        "tail": res.delta.tail.to_dict(),
    }
    result = _result("compute", spec, outputs, started)
    full = _result("compute", spec, {**outputs, "delta": _coefficient_rows(values)}, started)
    is_complex = np.iscomplexobj(values)
    header = "j,re,im" if is_complex else "j,coefficient"
    csv_text = _csv(header, [(k + 1, v.item()) for k, v in enumerate(values)])
    _emit(result, out_path, csv_text, fmt, full)
    return EXIT_OK if res.converged else EXIT_NONCONVERGENCE


@cli.command()
@_model_options
@click.option("--norm-bound", type=float, help="Asserted upper bound on ||J||.")
def check(spec, policy, index, out_path, fmt, norm_bound):
    """Definition, Proposition 1 and Proposition 2 certificates."""
    started = time.perf_counter()
    model = spec.to_model()
    certs = [
        criteria.definition_check(model, index, policy),
        criteria.prop1_certificate(model, index, norm_bound, policy),
        criteria.prop2_certificate(model, index, norm_bound, policy),
    ]
    outputs = {"index": index, "certificates": {c.kind.value: c.to_dict() for c in certs}}
    result = _result("check", spec, outputs, started)
    csv_text = _csv(
        "kind,status,gap_sum,coeff_sup,second_order_bound",
        [(c.kind.value, c.status.value, c.gap_sum, c.coeff_sup, c.second_order_bound) for c in certs],
    )
    _emit(result, out_path, csv_text, fmt)
    return EXIT_OK


def _parse_scalar(text: str):
    try:
        value = complex(text.replace(" ", ""))
    except ValueError:
        raise click.BadParameter(f"not a number: {text!r}") from None
    return value.real if value.imag == 0 else value


@cli.command()
@_model_options
@click.option("--h", "h_text", default="0.1", show_default=True, help="Step h (complex like 0.1j allowed).")
def residual(spec, policy, index, out_path, fmt, h_text):
    """Defect of the first-order eigen-relation at step h."""
    started = time.perf_counter()
    h = _parse_scalar(h_text)
    model = spec.to_model()
    rep = residual_check(model, index, h, policy)
    outputs = {
        "index": rep.index,
        "h": rep.h,
        "defect": rep.defect,
        "second_order_norm": rep.second_order_norm,
        "exactness_scale": rep.exactness_scale,
        "relative_defect": rep.relative_defect,
        "converged": rep.converged,
    }
    result = _result("residual", spec, outputs, started)
    h_cols = "h_re,h_im" if isinstance(rep.h, complex) else "h"
    csv_text = _csv(f"index,{h_cols},defect,second_order_norm,exactness_scale",
                    [(rep.index, rep.h, rep.defect, rep.second_order_norm, rep.exactness_scale)])
    _emit(result, out_path, csv_text, fmt)
    failed = rep.relative_defect > RESIDUAL_TOLERANCE if model.is_finite else not rep.converged
    return EXIT_NONCONVERGENCE if failed else EXIT_OK


@cli.command()
@_model_options
@click.option("--h-list", default="1e-2,5e-3,2.5e-3", show_default=True,
              help="Comma-separated, strictly decreasing step sizes.")
@click.option("--truncate", "truncate", type=int, help="Finite section size for infinite models.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Also write the table as CSV.")
def oracle(spec, policy, index, out_path, fmt, h_list, truncate, csv_path):
    """Finite-difference convergence study against a dense eigenpair oracle."""
    started = time.perf_counter()
    try:
        hs = [float(x) for x in h_list.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"bad --h-list {h_list!r}") from None
    model = spec.to_model()
    if model.is_finite:
        dense = truncate_model(model, truncate) if truncate else DenseModel(*model.dense, gap_min=model.gap_min)
    elif truncate is None:
        raise click.UsageError("infinite models need --truncate M")
    else:
        dense = truncate_model(model, truncate)
    if index > dense.M:
        raise IndexOutOfRange(index, dense.M)
    try:
        report = convergence_study(dense, index, hs)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None
    outputs = {"index": index, "M": dense.M, **report.to_dict()}
    result = _result("oracle", spec, outputs, started)
    csv_text = _csv("h,lambda_error,delta_error", report.rows)
    _emit(result, out_path, csv_text, fmt)
    if csv_path is not None:
        write_atomic(csv_path, csv_text)
    return EXIT_OK


def _parse_range(text: str) -> tuple[int, int]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return int(lo), int(hi)
        return int(text), int(text)
    except ValueError:
        raise click.BadParameter(f"range must look like LO..HI, got {text!r}") from None


@cli.command()
@click.argument("i_range", metavar="LO..HI")
@click.option("--builtin", required=True, type=click.Choice(sorted(BUILTIN_NAMES)))
@click.option("--max-terms", type=int, envvar="EIGENDERIV_MAX_TERMS")
@click.option("--rel-tol", type=float)
@click.option("--out", "out_csv", type=click.Path(dir_okay=False), help="CSV output (stdout if omitted).")
@click.option("--svg", "out_svg", type=click.Path(dir_okay=False), help="SVG line chart output.")
def figure(i_range, builtin, max_terms, rel_tol, out_csv, out_svg):
    """Table of ||Delta_i|| and ||Delta_i|| / i for a built-in model."""
    lo, hi = _parse_range(i_range)
    if lo < 1 or lo > hi:
        raise click.BadParameter("need 1 <= LO <= HI")
    spec = ModelSpec.builtin(builtin)
    policy = spec.truncation_policy(max_terms=max_terms, rel_tol=rel_tol)
    if policy.initial_terms > policy.max_terms:
        policy = policy.exhaustive(policy.max_terms)
    rows = figure_data(BUILTIN_NAMES[builtin], (lo, hi), policy)
    csv_text = _csv("i,delta_norm,ratio", rows)
    if out_csv is None:
        click.echo(csv_text, nl=False)
    else:
        write_atomic(out_csv, csv_text)
    if out_svg is not None:
        svg = line_chart([r[0] for r in rows], [r[1] for r in rows], "i", "‖Δ_i‖",
                         title=builtin)
        write_atomic(out_svg, svg)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        code = cli.main(args=argv, prog_name="eigenderiv", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except DegenerateGap as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DEGENERATE
    except OracleFailure as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_ORACLE
    except (SpecError, IndexOutOfRange, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    return code if isinstance(code, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
