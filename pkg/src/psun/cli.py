"""Command-line interface.

Subcommands: ``fit``, ``prior-sample``, ``coverage-study``, ``marginal`` and
``diagnose``. Every run writes its artifacts into ``--out`` and exits 0; on
failure a JSON error record is printed (and written to ``error.json`` when the
output directory is usable) and the exit status is non-zero.

Settings are resolved as command-line flags, then the ``--config`` JSON file,
then the built-in prior recipes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .core import ChainConfig, DrawMatrix
from .diagnostics import summarize
from .plots import acf_svg, coverage_svg, trace_svg
from .regression import (
    FAMILIES,
    LINKS,
    BinaryDesign,
    PriorSpec,
    fit_gibbs,
    log_marginal_likelihood,
    prior_from_recipe,
    standardize,
)
from .simstudy import DEFAULT_COMBOS, StudyConfig, run_study

NA_TOKENS = {"", "na", "nan", "null", "none", "?"}

EXIT_USAGE = 2
EXIT_FAILURE = 1


class CliError(Exception):
    """User-facing error with a short machine-readable kind."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


# ---------------------------------------------------------------------------
# data ingestion


@dataclass
class IngestReport:
    n_rows_read: int
    n_rows_dropped: int
    dropped_columns: list
    covariates: list

    def as_dict(self) -> dict:
        return {"rows_read": self.n_rows_read, "rows_dropped_na": self.n_rows_dropped,
                "dropped_columns": self.dropped_columns, "covariates": self.covariates}


def _parse_cell(text: str) -> float:
    t = text.strip()
    if t.lower() in NA_TOKENS:
        return math.nan
    return float(t)


def read_table(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise CliError("missing_file", f"data file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CliError("empty_file", f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise CliError("bad_csv", f"row {i + 2} has {len(r)} fields, header has {len(header)}")
    return header, body


def ingest_csv(path, link: str = "probit", response: str = "y", positive: str | None = None,
               drop_columns=(), standardize_x: bool = True, intercept: bool = True
               ) -> tuple[BinaryDesign, IngestReport, object]:
    """Read a CSV into a ``BinaryDesign``.

    Rows with any missing covariate or response are dropped and counted. The
    response must be 0/1 unless ``positive`` names the label coded as 1.
    Unnamed index columns (empty header) are ignored.
    """
    header, body = read_table(path)
    if response not in header:
        raise CliError("bad_response", f"response column {response!r} not in header {header}")
    drop = {c for c in drop_columns if c}
    missing = drop - set(header)
    if missing:
        raise CliError("bad_column", f"columns to drop not found: {sorted(missing)}")
    cov_idx = [j for j, h in enumerate(header) if h != response and h not in drop and h != ""]
    yi = header.index(response)
    ys, xs = [], []
    for r in body:
        cell = r[yi].strip()
        if cell.lower() in NA_TOKENS:
            yv = math.nan
        elif positive is not None:
            yv = 1.0 if cell == positive else 0.0
        else:
            try:
                yv = float(cell)
            except ValueError as exc:
                raise CliError("bad_response", f"non-numeric response {cell!r}") from exc
        ys.append(yv)
        try:
            xs.append([_parse_cell(r[j]) for j in cov_idx])
        except ValueError as exc:
            raise CliError("bad_covariate", f"non-numeric covariate value: {exc}") from exc
    y = np.array(ys, dtype=float)
    x = np.array(xs, dtype=float).reshape(len(ys), len(cov_idx))
    keep = np.isfinite(y) & np.all(np.isfinite(x), axis=1)
    report = IngestReport(n_rows_read=len(ys), n_rows_dropped=int((~keep).sum()),
                          dropped_columns=sorted(drop), covariates=[header[j] for j in cov_idx])
    y, x = y[keep], x[keep]
    if y.size == 0:
        raise CliError("empty_data", "no rows left after dropping missing values")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise CliError("bad_response", "response must be binary 0/1 (use --positive for labels)")
    if x.shape[0] > 1:
        const = np.ptp(x, axis=0) == 0
        if np.any(const):
            bad = [report.covariates[j] for j in np.flatnonzero(const)]
            raise CliError("constant_covariate", f"constant covariate column(s): {bad}")
    names = list(report.covariates)
    record = None
    if standardize_x:
        x, record = standardize(x, add_intercept=intercept)
    elif intercept:
        x = np.column_stack([np.ones(x.shape[0]), x])
    if intercept:
        names = ["(Intercept)"] + names
    design = BinaryDesign(x, y.astype(int), link, names=tuple(names), intercept=intercept)
    return design, report, record


# ---------------------------------------------------------------------------
# configuration

FIT_DEFAULTS = dict(link="probit", prior="gaussian", iters=10_000, burnin=1_000, thin=1,
                    chains=1, response="y", positive=None, drop_columns=[], standardize=True,
                    intercept=True, omega_intercept=None, omega_slope=None, plot=False,
                    n_mc=4000, n_draws=1000, p=None, exact_max_dim=200)


def load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise CliError("missing_file", f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CliError("bad_config", f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError("bad_config", "config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Flags override the config file, which overrides defaults."""
    cfg = dict(defaults)
    cfg.update(load_config(getattr(args, "config", None)))
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "func"):
            cfg[k] = v
    return cfg


def build_prior(cfg: dict, p: int, intercept: bool) -> PriorSpec:
    family = str(cfg["prior"]).lower()
    link = str(cfg["link"]).lower()
    oi, os_ = cfg.get("omega_intercept"), cfg.get("omega_slope")
    if family == "cauchy" and (oi is None or os_ is None):
        raise CliError("missing_hyperparameter",
                       "the Cauchy prior needs --omega-intercept and --omega-slope")
    if family in ("gaussian-sage", "dirichlet-laplace") or (oi is None and os_ is None):
        if family in ("gaussian-sage", "dirichlet-laplace") and (oi is not None or os_ is not None):
            raise CliError("bad_hyperparameter", f"{family} prior has fixed scales")
        return prior_from_recipe(link, family, p, intercept=intercept)
    base = np.diag(prior_from_recipe(link, family, p, intercept=intercept).omega) \
        if family != "cauchy" else np.ones(p)
    omega = base.copy()
    if os_ is not None:
        omega[1 if intercept else 0:] = float(os_)
    if oi is not None and intercept:
        omega[0] = float(oi)
    return PriorSpec(family=family, omega=omega)


def _git_revision() -> str | None:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], cwd=Path(__file__).resolve().parent,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None if out.returncode == 0 else None


def _config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(cfg: dict) -> dict:
    return {k: (v if isinstance(v, (str, int, float, bool, type(None), list, dict)) else str(v))
            for k, v in cfg.items()}


# ---------------------------------------------------------------------------
# output


def write_draws(path: Path, dm: DrawMatrix, names: list[str]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["chain"] + names)
        for c, row in zip(dm.chain, dm.draws):
            w.writerow([int(c)] + [repr(float(v)) for v in row])


def read_draws(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    header, body = read_table(path)
    if not header or header[0] != "chain":
        raise CliError("bad_draws", "draws file must start with a 'chain' column")
    arr = np.array([[float(c) for c in r] for r in body], dtype=float)
    if arr.size == 0:
        raise CliError("bad_draws", "draws file has no rows")
    return arr[:, 1:], arr[:, 0].astype(int), header[1:]


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=False) + "\n")


def _summary_outputs(out: Path, draws, chain, names, plot: bool) -> dict:
    summ = summarize(draws, chain=chain, names=names)
    _write_json(out / "summary.json", summ.as_dict())
    if plot:
        (out / "trace.svg").write_text(trace_svg(draws, chain, names))
        (out / "acf.svg").write_text(acf_svg([c.acf for c in summ.coefficients], names))
    return summ.as_dict()


def _metadata(cfg: dict, command: str, extra: dict | None = None) -> dict:
    meta = {"command": command, "seed": cfg.get("seed"), "config": _jsonable(cfg),
            "config_hash": _config_hash(_jsonable(cfg)), "git_revision": _git_revision(),
            "version": __version__}
    if extra:
        meta.update(extra)
    return meta


def _outdir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_fit(cfg: dict) -> dict:
    design, report, record = ingest_csv(cfg["data"], link=cfg["link"], response=cfg["response"],
                                        positive=cfg.get("positive"),
                                        drop_columns=cfg.get("drop_columns") or [],
                                        standardize_x=cfg["standardize"],
                                        intercept=cfg["intercept"])
    prior = build_prior(cfg, design.p, cfg["intercept"])
    chain_cfg = ChainConfig(iters=int(cfg["iters"]), burnin=int(cfg["burnin"]),
                            thin=int(cfg["thin"]), seed=int(cfg["seed"]),
                            chains=int(cfg["chains"]), exact_max_dim=int(cfg["exact_max_dim"]))
    out = _outdir(cfg)
    dm = fit_gibbs(design, prior, chain_cfg)
    names = list(design.names)
    write_draws(out / "draws.csv", dm, names)
    _summary_outputs(out, dm.draws, dm.chain, names, cfg["plot"])
    meta = _metadata(cfg, "fit", {"ingest": report.as_dict(),
                                  "standardization": record.as_dict() if record else None,
                                  "n": design.n, "p": design.p,
                                  "omega_diag": np.diag(prior.omega).tolist()})
    _write_json(out / "metadata.json", meta)
    return {"status": "ok", "out": str(out), "n": design.n, "p": design.p,
            "draws": dm.n_draws, "rows_dropped_na": report.n_rows_dropped}


def cmd_prior_sample(cfg: dict) -> dict:
    if cfg.get("p") is None:
        raise CliError("missing_argument", "--p is required")
    p = int(cfg["p"])
    prior = build_prior(cfg, p, cfg["intercept"])
    rng = np.random.default_rng(int(cfg["seed"]))
    n = int(cfg["n_draws"])
    draws = prior.sample(rng, size=n)
    out = _outdir(cfg)
    names = (["(Intercept)"] if cfg["intercept"] else []) + \
        [f"x{j}" for j in range(1, p + (0 if cfg["intercept"] else 1))]
    dm = DrawMatrix(draws=np.atleast_2d(draws), chain=np.zeros(n, dtype=int), seed=int(cfg["seed"]))
    write_draws(out / "draws.csv", dm, names)
    _summary_outputs(out, dm.draws, dm.chain, names, cfg["plot"])
    _write_json(out / "metadata.json", _metadata(cfg, "prior-sample"))
    return {"status": "ok", "out": str(out), "draws": n}


def _parse_combos(spec) -> tuple:
    if spec is None:
        return DEFAULT_COMBOS
    if isinstance(spec, list):
        items = spec
    else:
        items = [s for s in str(spec).split(",") if s.strip()]
    combos = []
    for item in items:
        if isinstance(item, (list, tuple)):
            link, fam = item
        else:
            link, _, fam = item.partition(":")
        link, fam = link.strip().lower(), fam.strip().lower()
        if link not in LINKS or fam not in FAMILIES:
            raise CliError("bad_combo", f"unknown combination {item!r}")
        combos.append((link, fam))
    return tuple(combos)


def _parse_overrides(spec) -> dict:
    if not spec:
        return {}
    if isinstance(spec, dict):
        return {k: tuple(v) for k, v in spec.items()}
    out = {}
    for item in str(spec).split(";"):
        if not item.strip():
            continue
        key, _, vals = item.partition("=")
        a, _, b = vals.partition(",")
        out[key.strip().replace(":", "-")] = (float(a), float(b))
    return out


def cmd_coverage_study(cfg: dict) -> dict:
    combos = _parse_combos(cfg.get("combos"))
    study = StudyConfig(g_reps=int(cfg["reps"]), n=int(cfg["n"]), p=int(cfg["p"] or 10),
                        combos=combos, gibbs_iters=int(cfg["iters"]), burnin=int(cfg["burnin"]),
                        seed=int(cfg["seed"]), omega_overrides=_parse_overrides(cfg.get("omega_override")),
                        workers=int(cfg.get("workers") or 1))
    for link, fam in study.combos:
        if fam == "cauchy":
            try:
                study.target_variances(link, fam)
            except ValueError as exc:
                raise CliError("missing_hyperparameter",
                               "Cauchy combinations need --omega-override link:cauchy=a,b") from exc
    out = _outdir(cfg)
    table = run_study(study)
    (out / "coverage.csv").write_text(table.to_csv())
    _write_json(out / "coverage.json", table.as_dict())
    if cfg["plot"]:
        rows = [(f"{l} / {f}", table.intercept[(l, f)], table.others[(l, f)])
                for l, f in study.combos]
        (out / "coverage.svg").write_text(coverage_svg(study.quantile_levels, rows))
    _write_json(out / "metadata.json", _metadata(cfg, "coverage-study"))
    if not table.ok:
        raise CliError("too_many_failures",
                       f"replicate failure rate above 1%: { {str(c): len(v) for c, v in table.failures.items()} }")
    return {"status": "ok", "out": str(out), "seconds": table.seconds}


def cmd_marginal(cfg: dict) -> dict:
    design, report, _ = ingest_csv(cfg["data"], link=cfg["link"], response=cfg["response"],
                                   positive=cfg.get("positive"),
                                   drop_columns=cfg.get("drop_columns") or [],
                                   standardize_x=cfg["standardize"], intercept=cfg["intercept"])
    prior = build_prior(cfg, design.p, cfg["intercept"])
    ml = log_marginal_likelihood(design, prior, n_mc=int(cfg["n_mc"]),
                                 rng=np.random.default_rng(int(cfg["seed"])))
    out = _outdir(cfg)
    res = dict(ml.as_dict(), n=design.n, p=design.p, n_mc=int(cfg["n_mc"]))
    _write_json(out / "marginal.json", res)
    _write_json(out / "metadata.json", _metadata(cfg, "marginal", {"ingest": report.as_dict()}))
    return dict(res, status="ok", out=str(out))


def cmd_diagnose(cfg: dict) -> dict:
    draws, chain, names = read_draws(cfg["draws"])
    out = _outdir(cfg)
    _summary_outputs(out, draws, chain, names, cfg["plot"])
    return {"status": "ok", "out": str(out), "draws": int(draws.shape[0])}


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, seed: bool = True) -> None:
    p.add_argument("--config", help="JSON file with default settings (flags take precedence)")
    p.add_argument("--out", required=True, help="output directory")
    if seed:
        p.add_argument("--seed", type=int, required=True, help="random seed (required)")
    p.add_argument("--plot", action="store_true", default=None, help="write SVG plots")


def _model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--link", choices=LINKS)
    p.add_argument("--prior", choices=FAMILIES + ("gaussian-sage",))
    p.add_argument("--omega-intercept", type=float, help="prior variance of the intercept")
    p.add_argument("--omega-slope", type=float, help="prior variance of the slopes")
    p.add_argument("--no-intercept", dest="intercept", action="store_false", default=None)


def _data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV with header and a binary response column")
    p.add_argument("--response", help="response column name (default y)")
    p.add_argument("--positive", help="response label coded as 1 when it is not 0/1")
    p.add_argument("--drop-columns", type=lambda s: [c.strip() for c in s.split(",")],
                   help="comma-separated columns to ignore")
    p.add_argument("--no-standardize", dest="standardize", action="store_false", default=None,
                   help="keep covariates on their original scale")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psun", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="posterior draws by Gibbs sampling")
    _data(p)
    _model(p)
    _common(p)
    p.add_argument("--iters", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--exact-max-dim", type=int,
                   help="largest latent dimension drawn exactly (coordinate Gibbs above)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("prior-sample", help="draws from a prior recipe")
    _model(p)
    _common(p)
    p.add_argument("--p", type=int, help="number of coefficients including the intercept")
    p.add_argument("--n-draws", type=int)
    p.set_defaults(func=cmd_prior_sample)

    p = sub.add_parser("coverage-study", help="frequentist coverage simulation")
    _common(p)
    p.add_argument("--reps", type=int, help="number of replicates (default 500)")
    p.add_argument("--n", type=int, help="sample size (default 25)")
    p.add_argument("--p", type=int, help="coefficients including intercept (default 10)")
    p.add_argument("--combos", help="comma-separated link:family pairs")
    p.add_argument("--omega-override", help="e.g. 'logit:cauchy=6.25,2.5' (';' separated)")
    p.add_argument("--iters", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p.set_defaults(func=cmd_coverage_study)

    p = sub.add_parser("marginal", help="marginal likelihood P(Y = y)")
    _data(p)
    _model(p)
    _common(p)
    p.add_argument("--n-mc", type=int)
    p.set_defaults(func=cmd_marginal)

    p = sub.add_parser("diagnose", help="summaries from an existing draws.csv")
    p.add_argument("--draws", required=True)
    _common(p, seed=False)
    p.set_defaults(func=cmd_diagnose)
    return parser


STUDY_DEFAULTS = dict(reps=500, n=25, p=10, iters=10_000, burnin=1_000, plot=False,
                      combos=None, omega_override=None, workers=1)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    command = args.command
    out_dir = getattr(args, "out", None)
    try:
        defaults = STUDY_DEFAULTS if command == "coverage-study" else FIT_DEFAULTS
        if command == "diagnose":
            defaults = {"plot": False}
        cfg = resolve(args, defaults)
        cfg.pop("command", None)
        result = args.func(cfg)
    except Exception as exc:  # every failure becomes a JSON error record
        kind = exc.kind if isinstance(exc, CliError) else type(exc).__name__
        err = {"status": "error", "command": command, "error": kind, "message": str(exc)}
        text = json.dumps(err)
        print(text, file=sys.stdout)
        if out_dir:
            try:
                Path(out_dir).mkdir(parents=True, exist_ok=True)
                (Path(out_dir) / "error.json").write_text(text + "\n")
            except OSError:
                pass
        return EXIT_USAGE if isinstance(exc, CliError) else EXIT_FAILURE
    print(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
