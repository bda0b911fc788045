"""Command-line front end.

Subcommands::

    twrnest mse    --config C --out DIR [--seed S] [--workers W]
    twrnest ser    --config C --out DIR [--seed S] [--workers W]
    twrnest theory KIND --out DIR --param key=value ...
    twrnest replay --config C --out DIR --estimator E --N n --snr-db s [--cell-csv mse.csv]

Configs are flat TOML files; see ``CONFIG_SCHEMA``.  Exit codes: 0 ok,
1 replay mismatch, 2 configuration error, 3 I/O error.
``TWRNEST_WORKERS`` sets the worker count when ``--workers`` is absent.
"""

import argparse
import csv
from dataclasses import replace
from datetime import datetime, timezone
import hashlib
import io
import json
import logging
import os
from pathlib import Path
import sys
import tempfile

import numpy as np
import tomli

from . import __version__
from .bounds import envelope_variance_theory, gml_mse_theory, mcrb, p_degenerate_closed_form, p_degenerate_exact, p_unique
from .harness import GridConfig, MseCell, SweepConfig, replay_cell, run_mse_sweep, run_ser_sweep
from .model import SystemParams

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
WORKERS_ENV = "TWRNEST_WORKERS"

# key -> (python type, is_list); grid_* keys fill GridConfig
CONFIG_SCHEMA = {
    "estimators": (str, True),
    "M": (int, False),
    "N_values": (int, True),
    "snr_db_values": (float, True),
    "n_channel_realizations": (int, False),
    "n_noise_trials_per_channel": (int, False),
    "rho": (float, False),
    "alpha": (float, False),
    "beta": (float, False),
    "P2": (float, False),
    "J_dml_ambiguity": (int, False),
    "J_mcml": (int, False),
    "J_ls": (int, False),
    "master_seed": (int, False),
    "ser_target_errors": (int, False),
    "ser_min_blocks": (int, False),
    "ser_max_blocks": (int, False),
    "ser_batch_blocks": (int, False),
    "grid_final_step": (float, False),
    "grid_refinement_factor": (int, False),
    "grid_divisions": (int, False),
    "grid_scale": (float, False),
    "grid_n_starts": (int, False),
}
REQUIRED = ("estimators", "M", "N_values", "snr_db_values")

MSE_COLUMNS = ("estimator", "M", "N", "snr_db", "mse_a", "mse_b_mag", "crb_a_avg", "n_trials", "seed_base")
SER_COLUMNS = ("estimator", "M", "N_block", "J_pilots", "snr_db", "ser", "n_symbols", "n_errors", "seed_base")
TRIAL_COLUMNS = ("channel_index", "trial_index", "a_re", "a_im", "b_re", "b_im",
                 "a_hat_re", "a_hat_im", "b_mag_hat", "sq_err_a", "sq_err_b_mag")


class ConfigError(Exception):
    """Bad configuration or parameters (exit code 2)."""


def _line_of(text, key):
    for i, line in enumerate(text.splitlines(), 1):
        if line.split("=", 1)[0].strip() == key:
            return i
    return None


def _where(text, key):
    line = _line_of(text, key)
    return f"line {line}, field {key!r}" if line else f"field {key!r}"


def _coerce(key, value, typ, text):
    if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if typ is str and isinstance(value, str):
        return value
    raise ConfigError(f"{_where(text, key)}: expected {typ.__name__}, got {value!r}")


def parse_config(text):
    """Parse flat TOML text into a validated-shape :class:`SweepConfig`."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    values, grid = {}, {}
    for key, value in raw.items():
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"{_where(text, key)}: unknown field")
        typ, is_list = CONFIG_SCHEMA[key]
        if is_list:
            if not isinstance(value, list):
                raise ConfigError(f"{_where(text, key)}: expected a list")
            value = tuple(_coerce(key, v, typ, text) for v in value)
        else:
            value = _coerce(key, value, typ, text)
        if key.startswith("grid_"):
            grid[key[len("grid_"):]] = value
        else:
            values[key] = value
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"field {key!r}: missing")
    return SweepConfig(grid=GridConfig(**grid), **values)


def load_config(path, kind, seed=None):
    """Read, override the seed, and validate; field errors carry the line number."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    config = parse_config(text)
    if seed is not None:
        config = replace(config, master_seed=seed)
    try:
        config.validate(kind)
    except ValueError as exc:
        key = str(exc).split(":", 1)[0]
        line = _line_of(text, key)
        raise ConfigError(f"line {line}: {exc}" if line else str(exc)) from exc
    return config


def config_hash(config):
    """SHA-256 of the canonical (sorted-key) JSON form of the config."""
    canon = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def csv_text(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_atomic(path, text):
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(out_dir, config, outputs, extra=None):
    manifest = {
        "config_hash": config_hash(config) if config is not None else None,
        "artifact_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "output_paths": [str(p) for p in outputs],
        "config": config.to_dict() if config is not None else None,
    }
    if extra:
        manifest.update(extra)
    path = Path(out_dir) / "manifest.json"
    write_atomic(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def mse_rows(result):
    for c in result.cells:
        crb_avg = "SINGULAR" if c.crb_a_avg is None else c.crb_a_avg
        yield (c.estimator, c.M, c.N, float(c.snr_db), c.mse_a, c.mse_b_mag, crb_avg, c.n_trials, c.seed_base)


def ser_rows(result):
    for c in result.cells:
        yield (c.estimator, c.M, c.N_block, c.J_pilots, float(c.snr_db), c.ser, c.n_symbols, c.n_errors, c.seed_base)


def resolve_workers(arg):
    if arg is not None:
        return arg
    env = os.environ.get(WORKERS_ENV)
    if env is None or env == "":
        return 1
    try:
        workers = int(env)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV}: expected an integer, got {env!r}") from exc
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV}: must be >= 1")
    return workers


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_sweep(args, kind):
    config = load_config(args.config, kind, args.seed)
    workers = resolve_workers(args.workers)
    out = _out_dir(args.out)
    if kind == "mse":
        result = run_mse_sweep(config, workers=workers)
        path, text = out / "mse.csv", csv_text(MSE_COLUMNS, mse_rows(result))
    else:
        result = run_ser_sweep(config, workers=workers)
        path, text = out / "ser.csv", csv_text(SER_COLUMNS, ser_rows(result))
    write_atomic(path, text)
    write_manifest(out, config, [path])
    print(path)
    return EXIT_OK


# kind -> required parameter names
THEORY_PARAMS = {
    "envelope_variance": ("b", "A", "P1", "P2", "sigma_o2", "M", "v_max", "v_points"),
    "gml_mse": ("b", "h2", "N", "snr_db_min", "snr_db_max", "snr_db_step"),
    "p_unique": ("M", "N_min", "N_max"),
    "mcrb": ("h2", "N", "snr_db_min", "snr_db_max", "snr_db_step"),
}
THEORY_DEFAULTS = {"alpha": "1", "beta": "1", "P2": "1"}


def _theory_params(kind, pairs):
    params = dict(THEORY_DEFAULTS)
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"--param {pair!r}: expected key=value")
        key, value = pair.split("=", 1)
        params[key.strip()] = value.strip()
    missing = [k for k in THEORY_PARAMS[kind] if k not in params]
    if missing:
        raise ConfigError(f"{kind}: missing parameter(s) {', '.join(missing)}")

    def get(key, typ=float):
        try:
            return typ(params[key])
        except ValueError as exc:
            raise ConfigError(f"parameter {key!r}: cannot parse {params[key]!r} as {typ.__name__}") from exc

    return get


def _snr_grid(get):
    lo, hi, step = get("snr_db_min"), get("snr_db_max"), get("snr_db_step")
    if not step > 0 or hi < lo:
        raise ConfigError("snr_db_step must be positive and snr_db_max >= snr_db_min")
    return np.arange(int(round((hi - lo) / step)) + 1) * step + lo


def theory_table(kind, get):
    """``(columns, rows)`` for one closed-form tabulation."""
    if kind == "envelope_variance":
        v_max, n = get("v_max"), get("v_points", int)
        if n < 1:
            raise ConfigError("v_points must be >= 1")
        axis = np.linspace(-v_max, v_max, n)
        vr, vi = np.meshgrid(axis, axis, indexing="ij")
        v = (vr + 1j * vi).ravel()
        var = envelope_variance_theory(v, get("b", complex), get("A"), get("P1"), get("P2"),
                                       get("sigma_o2"), get("M", int))
        return ("v_re", "v_im", "variance"), zip(v.real, v.imag, var)
    if kind == "gml_mse":
        b, h2, N = get("b", complex), get("h2", complex), get("N", int)
        alpha, beta, P2 = get("alpha"), get("beta"), get("P2")
        rows = []
        for snr in _snr_grid(get):
            p = SystemParams.from_snr(float(snr), P2=P2, alpha=alpha, beta=beta)
            rows.append((float(snr), gml_mse_theory(b, h2, p.A, N, alpha, P2, p.sigma_t2),
                         abs(b) ** 2 / (N * alpha)))
        return ("snr_db", "mse", "floor"), rows
    if kind == "p_unique":
        M, lo, hi = get("M", int), get("N_min", int), get("N_max", int)
        if M < 2 or lo < 1 or hi < lo:
            raise ConfigError("p_unique needs M >= 2 and 1 <= N_min <= N_max")
        rows = [(N, p_unique(M, N), p_degenerate_closed_form(M, N), p_degenerate_exact(M, N))
                for N in range(lo, hi + 1)]
        return ("N", "p_unique", "p_degenerate", "p_degenerate_exact"), rows
    if kind == "mcrb":
        h2, N = get("h2", complex), get("N", int)
        alpha, beta, P2 = get("alpha"), get("beta"), get("P2")
        rows = []
        for snr in _snr_grid(get):
            p = SystemParams.from_snr(float(snr), P2=P2, alpha=alpha, beta=beta)
            sigma_o2 = p.A ** 2 * abs(h2) ** 2 * p.sigma_r2 + p.sigma_t2
            m = mcrb(p.A, N, p.P1, p.P2, sigma_o2)
            rows.append((float(snr), m.mcrb_a, m.mcrb_b_mag))
        return ("snr_db", "mcrb_a", "mcrb_b_mag"), rows
    raise ConfigError(f"unknown theory kind {kind!r}")


def cmd_theory(args):
    get = _theory_params(args.kind, args.param)
    try:
        columns, rows = theory_table(args.kind, get)
        text = csv_text(columns, rows)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(args.out)
    path = out / f"{args.kind}.csv"
    write_atomic(path, text)
    write_manifest(out, None, [path], {"theory": {"kind": args.kind, "params": sorted(args.param or [])}})
    print(path)
    return EXIT_OK


def _recorded_cell(path, estimator, N, snr_db):
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["estimator"] == estimator and int(row["N"]) == N and float(row["snr_db"]) == snr_db:
                return row
    raise ConfigError(f"{path}: no cell ({estimator}, N={N}, snr_db={snr_db})")


def cmd_replay(args):
    config = load_config(args.config, "mse", args.seed)
    from . import streams

    recorded = _recorded_cell(args.cell_csv, args.estimator, args.N, args.snr_db) if args.cell_csv else None
    seed_base = int(recorded["seed_base"]) if recorded else streams.seed_base(config.master_seed, config.M, args.N)
    cell = MseCell(estimator=args.estimator, M=config.M, N=args.N, snr_db=args.snr_db, mse_a=float("nan"),
                   mse_b_mag=None, crb_a_avg=None, n_trials=0, seed_base=seed_base)
    try:
        records = replay_cell(cell, config)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = [(r.channel_index, r.trial_index, r.a.real, r.a.imag, r.b.real, r.b.imag,
             r.a_hat.real, r.a_hat.imag, r.b_mag_hat, r.sq_err_a, r.sq_err_b_mag) for r in records]
    out = _out_dir(args.out)
    path = out / "trials.csv"
    write_atomic(path, csv_text(TRIAL_COLUMNS, rows))
    mse_a = float(np.mean([r.sq_err_a for r in records]))
    write_manifest(out, config, [path], {"replay": {"estimator": args.estimator, "N": args.N,
                                                    "snr_db": args.snr_db, "mse_a": _fmt(mse_a)}})
    print(path)
    if recorded is not None and _fmt(mse_a) != recorded["mse_a"]:
        print(f"replay mismatch: recorded mse_a {recorded['mse_a']}, replayed {_fmt(mse_a)}", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="twrnest", description=__doc__.split("\n", 1)[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="flat TOML sweep configuration")
            p.add_argument("--seed", type=int, help="override master_seed")
            p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
        p.add_argument("--out", required=True, help="output directory")

    common(sub.add_parser("mse", help="MSE-vs-SNR/N sweep to mse.csv"))
    common(sub.add_parser("ser", help="SER-vs-SNR sweep to ser.csv"))
    theory = sub.add_parser("theory", help="tabulate a closed form")
    theory.add_argument("kind", choices=sorted(THEORY_PARAMS))
    theory.add_argument("--param", action="append", metavar="KEY=VALUE")
    common(theory, config=False)
    replay = sub.add_parser("replay", help="regenerate the trials of one MSE cell")
    common(replay)
    replay.add_argument("--estimator", required=True)
    replay.add_argument("--N", type=int, required=True)
    replay.add_argument("--snr-db", type=float, required=True)
    replay.add_argument("--cell-csv", help="mse.csv holding the recorded cell to verify")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command in ("mse", "ser"):
            return cmd_sweep(args, args.command)
        if args.command == "theory":
            return cmd_theory(args)
        return cmd_replay(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
