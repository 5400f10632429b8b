"""Command-line front end.

Subcommands::

    hopfmean locate  MODEL --alpha-lo A --alpha-hi B      bifurcation point (JSON)
    hopfmean coeffs  MODEL --alpha A                      normal-form report (JSON)
    hopfmean sweep   MODEL --alpha-min A --alpha-max B --steps N --out rows.csv [--numeric]
    hopfmean verify  MODEL --mu-list 0.0025,0.005,0.01    tangency check (JSON)

``MODEL`` is a registry name; ``--field-file model.json`` loads a custom
field instead. ``--param k=v`` overrides model parameters.

Exit codes: 0 success, 1 solver failure or degenerate normal form,
2 when ``mu`` does not change sign over the bracket.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .equilibria import alpha_for_mu, continue_equilibria, locate_bifurcation, solve_equilibrium
from .errors import BracketError, DegenerateLyapunovError, HopfMeanError
from .field import VectorFieldModel, model_from_file
from .models import REGISTRY, get_model
from .normalform import compute_K, normal_form, oigm_gain_jump, predict_mean
from .simulate import IntegratorConfig, measure_deviation, observe_cycle

log = logging.getLogger("hopfmean")

# default search brackets for built-ins without a closed-form alpha*
DEFAULT_BRACKETS = {"wilson-cowan": (0.0, 0.3)}


# -- model plumbing ------------------------------------------------------------


def _parse_params(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise argparse.ArgumentTypeError(f"--param expects k=v, got {item!r}")
        out[key.strip()] = float(value)
    return out


def build_model(name: Optional[str], field_file: Optional[str], params: dict) -> VectorFieldModel:
    if field_file:
        model = model_from_file(field_file)
        return model.with_params(**params) if params else model
    if not name:
        raise HopfMeanError("give a model name or --field-file")
    model = get_model(name)
    return model.with_params(**params) if params else model


def _guess(model: VectorFieldModel, alpha: float, text: Optional[str]) -> np.ndarray:
    if text:
        x = np.array([float(v) for v in text.split(",")])
        if x.shape != (model.dimension,):
            raise HopfMeanError(f"--guess needs {model.dimension} comma-separated values")
        return x
    eq = model.oracles.get("equilibrium")
    if eq is not None:
        return np.asarray(eq(model.params, alpha), float)
    return np.zeros(model.dimension) + 0.1 * model.scale


def _bracket(model, args):
    lo, hi = args.alpha_lo, args.alpha_hi
    if lo is not None and hi is not None:
        return lo, hi
    if model.name in DEFAULT_BRACKETS:
        return DEFAULT_BRACKETS[model.name]
    star = model.oracles.get("alpha_star")
    if star is None:
        raise HopfMeanError("--alpha-lo and --alpha-hi are required for this model")
    a = star(model.params)
    w = 0.25 * max(1.0, abs(a))
    return a - w, a + w


# -- JSON helpers ----------------------------------------------------------------


def _c(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _cv(v) -> list:
    return [_c(z) for z in np.asarray(v, complex)]


def _rv(v) -> list:
    return [float(x) for x in np.asarray(v, float)]


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, allow_nan=True)
    sys.stdout.write("\n")


# -- sweep records -------------------------------------------------------------------


@dataclass
class SweepRecord:
    alpha: float
    mu: Optional[float]
    omega: Optional[float]
    x0: tuple
    predicted_mean: tuple
    numeric_mean: tuple
    K: tuple
    r_w: Optional[float]
    omega_w: Optional[float]
    re_c1: Optional[float]
    period_numeric: Optional[float]
    converged: bool


_VECTOR_FIELDS = ("x0", "predicted_mean", "numeric_mean", "K")


def sweep_header(n: int) -> list:
    cols = []
    for f in fields(SweepRecord):
        if f.name in _VECTOR_FIELDS:
            cols.extend(f"{f.name}_{i + 1}" for i in range(n))
        else:
            cols.append(f.name)
    return cols


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return f"{float(v):.17g}"


def record_row(rec: SweepRecord, n: int) -> list:
    row = []
    for f in fields(SweepRecord):
        v = getattr(rec, f.name)
        if f.name in _VECTOR_FIELDS:
            row.extend(_fmt(x) for x in (v if v else (None,) * n))
        else:
            row.append(_fmt(v))
    return row


def write_sweep_csv(path, records, n: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(sweep_header(n))
        for rec in records:
            w.writerow(record_row(rec, n))


def _parse(cell: str):
    return None if cell == "" else float(cell)


def read_sweep_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = sum(1 for h in header if h.startswith("x0_"))
    out = []
    for row in body:
        it = iter(row)
        values = {}
        for f in fields(SweepRecord):
            if f.name in _VECTOR_FIELDS:
                cells = [next(it) for _ in range(n)]
                values[f.name] = () if all(c == "" for c in cells) else tuple(float(c) for c in cells)
            elif f.name == "converged":
                values[f.name] = next(it) == "true"
            else:
                values[f.name] = _parse(next(it))
        out.append(SweepRecord(**values))
    return out


# -- analysis per row -------------------------------------------------------------------


def _analytic_row(model, eq):
    x0 = tuple(float(v) for v in eq.x0)
    if eq.hopf is None:
        return SweepRecord(eq.alpha, None, None, x0, x0, (), (), None, None, None, None, False), None
    nf = normal_form(model, eq)
    try:
        pred = predict_mean(eq, nf)
    except DegenerateLyapunovError:
        rec = SweepRecord(eq.alpha, eq.hopf.mu, eq.hopf.omega, x0, (), (), (), None, None, nf.ell1, None, False)
        return rec, None
    rec = SweepRecord(
        alpha=eq.alpha, mu=eq.hopf.mu, omega=eq.hopf.omega, x0=x0,
        predicted_mean=tuple(float(v) for v in pred.predicted_mean), numeric_mean=(),
        K=tuple(float(v) for v in pred.K), r_w=pred.r_w, omega_w=pred.omega_w, re_c1=nf.ell1,
        period_numeric=None, converged=True,
    )
    return rec, pred


def _numeric_job(job):
    model, eq, cfg = job
    try:
        obs = observe_cycle(model, eq.alpha, eq, cfg)
    except HopfMeanError as exc:
        return None, None, False, str(exc)
    if not obs.converged:
        return tuple(float(v) for v in obs.mean), None, eq.hopf is None or eq.hopf.mu <= 0, obs.message
    return tuple(float(v) for v in obs.mean), obs.period, True, ""


def run_sweep(model, alphas, x_guess, numeric=False, workers=1, config=None):
    """Continuation plus analytic rows, then optional numeric cycle observations."""
    eqs = continue_equilibria(model, alphas, x_guess)
    rows, preds = zip(*(_analytic_row(model, eq) for eq in eqs))
    rows = list(rows)
    if numeric:
        cfg = config or IntegratorConfig()
        jobs = [(model, eq, cfg) for eq in eqs]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_numeric_job, jobs))
        else:
            results = [_numeric_job(j) for j in jobs]
        for rec, (mean, period, ok, msg) in zip(rows, results):
            rec.numeric_mean = mean or ()
            rec.period_numeric = period
            rec.converged = rec.converged and ok
            if msg and not ok:
                log.warning("alpha=%.17g: %s", rec.alpha, msg)
    return rows, list(preds), eqs


def _sweep_summary(rows, eqs):
    star = None
    for a, b in zip(eqs[:-1], eqs[1:]):
        if a.hopf and b.hopf and a.hopf.mu * b.hopf.mu <= 0 and a.hopf.mu != b.hopf.mu:
            # linear interpolation of mu between grid points
            star = a.alpha - a.hopf.mu * (b.alpha - a.alpha) / (b.hopf.mu - a.hopf.mu)
            break
    max_dev, tangency, best_mu = None, None, math.inf
    for rec in rows:
        if rec.numeric_mean and rec.K and rec.mu is not None and rec.mu > 0 and rec.period_numeric:
            d_num = np.array(rec.numeric_mean) - np.array(rec.x0)
            res = float(np.linalg.norm(d_num - np.array(rec.K) * rec.mu))
            max_dev = res if max_dev is None else max(max_dev, res)
            if rec.mu < best_mu and np.linalg.norm(d_num) > 0:
                best_mu, tangency = rec.mu, res / float(np.linalg.norm(d_num))
    failed = sum(1 for r in rows if not r.converged)
    return {"alpha_star": star, "rows": len(rows), "failed_rows": failed,
            "max_abs_d_num_minus_K_mu": max_dev, "tangency_ratio": tangency}


# -- commands -----------------------------------------------------------------------------


def cmd_locate(model, args) -> int:
    lo, hi = _bracket(model, args)
    bp = locate_bifurcation(model, lo, hi, _guess(model, lo, args.guess))
    K = jump = None
    if bp.criticality != "degenerate":
        K = _rv(compute_K(bp.normal_form))
        jump = _rv(oigm_gain_jump(bp))
    _emit({
        "model": model.name,
        "alpha_star": bp.alpha_star,
        "omega0": bp.omega0,
        "mu_prime": bp.mu_prime,
        "re_c1": bp.lyapunov_re_c1,
        "criticality": bp.criticality,
        "x0_star": _rv(bp.x0_star),
        "K_at_star": K,
        "oigm_gain_jump": jump,
    })
    return 0


def cmd_coeffs(model, args) -> int:
    alpha = args.alpha if args.alpha is not None else model.alpha
    if alpha is None or math.isnan(alpha):
        raise HopfMeanError("--alpha is required")
    eq = solve_equilibrium(model, alpha, _guess(model, alpha, args.guess))
    if eq.hopf is None:
        raise HopfMeanError(f"no complex eigenvalue pair at alpha={alpha}")
    nf = normal_form(model, eq)
    hp = nf.hopf
    report = {
        "model": model.name,
        "alpha": alpha,
        "x0": _rv(eq.x0),
        "lambda": _c(hp.lam),
        "q": _cv(hp.q),
        "p": _cv(hp.p),
        "g20": _c(nf.g20),
        "g11": _c(nf.g11),
        "g02": _c(nf.g02),
        "g21": _c(nf.g21),
        "g21_tilde": _c(nf.g21_tilde),
        "eta11": _rv(nf.eta11.real),
        "c1": _c(nf.c1),
        "re_c1": nf.ell1,
        "K": None,
        "r_w": None,
        "omega_w": None,
        "residuals": {
            "pq_minus_1": abs(hp.pq - 1),
            "p_qbar": abs(hp.pqbar),
            "im_B11": nf.residues["B11"],
            "im_H11": nf.residues["H11"],
            "p_eta20": nf.residues["p_eta20"],
            "p_eta11": nf.residues["p_eta11"],
            "p_eta02": nf.residues["p_eta02"],
        },
    }
    if nf.degenerate:
        report["error"] = f"degenerate normal form: |Re c1| = {abs(nf.ell1):.3g}"
        _emit(report)
        print(report["error"], file=sys.stderr)
        return 1
    pred = predict_mean(eq, nf)
    report["K"] = _rv(pred.K)
    report["r_w"] = pred.r_w
    report["omega_w"] = pred.omega_w
    _emit(report)
    return 0


def cmd_sweep(model, args) -> int:
    if args.steps < 1:
        raise HopfMeanError("--steps must be at least 1")
    alphas = np.linspace(args.alpha_min, args.alpha_max, args.steps) if args.steps > 1 else np.array([args.alpha_min])
    cfg = IntegratorConfig(rtol=args.rtol, atol=args.atol)
    rows, _, eqs = run_sweep(model, alphas, _guess(model, alphas[0], args.guess), args.numeric, args.workers, cfg)
    write_sweep_csv(args.out, rows, model.dimension)
    summary = _sweep_summary(rows, eqs)
    summary["out"] = args.out
    _emit(summary)
    return 1 if summary["failed_rows"] * 2 > len(rows) else 0


def _fit_slope(xs, ys):
    xs, ys = np.log(np.asarray(xs)), np.log(np.asarray(ys))
    return float(np.polyfit(xs, ys, 1)[0])


def cmd_verify(model, args) -> int:
    mus = sorted(float(v) for v in args.mu_list.split(","))
    if not mus or min(mus) <= 0:
        raise HopfMeanError("--mu-list needs positive values")
    lo, hi = _bracket(model, args)
    bp = locate_bifurcation(model, lo, hi, _guess(model, lo, args.guess))
    cfg = IntegratorConfig(rtol=args.rtol, atol=args.atol)
    points, failed = [], False
    for mu in mus:
        alpha, eq = alpha_for_mu(model, bp, mu)
        nf = normal_form(model, eq)
        pred = predict_mean(eq, nf)
        entry = {"mu": mu, "alpha": alpha}
        try:
            rec = measure_deviation(model, alpha, eq, pred, cfg)
        except HopfMeanError as exc:
            entry["error"] = str(exc)
            points.append(entry)
            failed = True
            continue
        obs = rec.observation
        failed |= not obs.converged
        k = obs.section_coordinate
        nd, npred = np.linalg.norm(rec.d_num), np.linalg.norm(rec.d_pred)
        cosine = float(np.dot(rec.d_num, rec.d_pred) / (nd * npred)) if nd > 0 and npred > 0 else None
        d_trunc = compute_K(nf, include_eta=False) * pred.mu
        entry.update({
            "d_num": _rv(rec.d_num),
            "d_pred": _rv(rec.d_pred),
            "residual": rec.error,
            "relative_error": rec.relative_error,
            "cosine": cosine,
            "magnitude_ratio": float(nd / npred) if npred > 0 else None,
            "residual_without_eta11": float(np.linalg.norm(rec.d_num - d_trunc)),
            "period_numeric": obs.period,
            "period_predicted": pred.period,
            "period_rel_error": abs(obs.period - pred.period) / obs.period,
            "amplitude": _rv(obs.amplitude),
            "amplitude_predicted": _rv(2 * pred.r_w * np.abs(eq.hopf.q)),
            "section_coordinate": k,
        })
        points.append(entry)
    ok = [p for p in points if "residual" in p]
    orders = []
    for a, b in zip(ok[:-1], ok[1:]):
        if a["residual"] > 0 and b["residual"] > 0:
            orders.append(math.log(b["residual"] / a["residual"]) / math.log(b["mu"] / a["mu"]))
    amp_exp = None
    if len(ok) >= 2:
        k = ok[0]["section_coordinate"]
        amp_exp = _fit_slope([p["mu"] for p in ok], [p["amplitude"][k] for p in ok])
    _emit({
        "model": model.name,
        "alpha_star": bp.alpha_star,
        "re_c1": bp.lyapunov_re_c1,
        "points": points,
        "residual_orders": orders,
        "amplitude_exponent": amp_exp,
    })
    return 1 if failed else 0


# -- entry point -------------------------------------------------------------------------


def _common(p):
    p.add_argument("model", nargs="?", choices=sorted(REGISTRY), help="built-in model name")
    p.add_argument("--field-file", help="JSON model file (alternative to a built-in)")
    p.add_argument("--param", action="append", default=[], metavar="K=V", help="parameter override")
    p.add_argument("--guess", help="comma-separated initial equilibrium guess")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hopfmean", description="Hopf cycle-mean prediction and verification")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("locate", help="locate the Hopf point in a parameter bracket")
    _common(p)
    p.add_argument("--alpha-lo", type=float)
    p.add_argument("--alpha-hi", type=float)

    p = sub.add_parser("coeffs", help="normal-form coefficients at one parameter value")
    _common(p)
    p.add_argument("--alpha", type=float)

    p = sub.add_parser("sweep", help="parameter sweep written as CSV")
    _common(p)
    p.add_argument("--alpha-min", type=float, required=True)
    p.add_argument("--alpha-max", type=float, required=True)
    p.add_argument("--steps", type=int, default=21)
    p.add_argument("--numeric", action="store_true", help="also integrate to measure cycle means")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--rtol", type=float, default=1e-9)
    p.add_argument("--atol", type=float, default=1e-11)

    p = sub.add_parser("verify", help="compare measured and predicted mean shifts")
    _common(p)
    p.add_argument("--mu-list", default="0.0025,0.005,0.01")
    p.add_argument("--alpha-lo", type=float)
    p.add_argument("--alpha-hi", type=float)
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--atol", type=float, default=1e-12)
    return parser


COMMANDS = {"locate": cmd_locate, "coeffs": cmd_coeffs, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        model = build_model(args.model, args.field_file, _parse_params(args.param))
        return COMMANDS[args.command](model, args)
    except BracketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (HopfMeanError, KeyError, ValueError, TypeError, OSError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
