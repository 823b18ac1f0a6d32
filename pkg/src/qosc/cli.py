"""Command-line front end.

Usage::

    qosc --mode fig2 --output out/
    qosc --config run.toml --output out/ --format json --seed 7

The config is TOML with one table per module (``[gain]``, ``[loop]``,
``[superradiant]``, ``[linewidth]``, ``[oracle]``, ``[grid]``, ``[fig2]``,
``[sweep]``) and an optional top-level ``mode``/``seed``. Every run writes
``<mode>.<format>`` and ``<mode>.manifest.json`` into the output directory;
nothing is written unless parameter validation and the computation succeed.

Exit codes: 0 ok, 2 config parse error, 3 invalid parameters, 4 numerical
failure, 5 I/O error.
"""

import argparse
import copy
import itertools
import json
import logging
import math
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, _kernels, causal_gain, feedback_loop, linewidth, oracle, superradiant
from .errors import NotLasingError, NumericalError, ParameterError

log = logging.getLogger("qosc")

MODES = ("kk-phase", "loop-spectrum", "sr-spectrum", "linewidth", "sweep", "oracle-check", "fig2")
EXIT_OK, EXIT_PARSE, EXIT_PARAM, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4, 5

DEFAULTS = {
    "gain": {
        "model": "lorentzian",
        "eta": 0.99,
        "gamma_h": 1.0,
        "a": 0.0,
        "half_width": 100.0,
        "n_points": 4001,
        "path": "",
        "tail": "loglinear",
    },
    "loop": {
        "eta": 0.99,
        "kappa_F": 1.0,
        "kappa_G": 1.0,
        "tau_F": 0.0,
        "tau_G": 0.0,
        "flux": 1.0,
        "nbar_0": 0.0,
        "nbar_G": 0.0,
        "r_0": 0.0,
        "r_G": 0.0,
    },
    "superradiant": {
        "N": 1e6,
        "C": 2.5,
        "kappa_F": 1.0,
        "kappa_G": 1.0,
        "s": 0.0,
        "nbar_a": 0.0,
        "nbar_b": 0.0,
        "r_a": 0.0,
        "r_b": 0.0,
        "method": "approx",
    },
    "linewidth": {
        "method": "closed-form",
        "form": "printed",
        "cutoff": "unsqueezed",
        "flux": 0.0,
        "omega": 1e-3,
    },
    "grid": {"omega_min": 1e-4, "omega_max": 1e-1, "points": 61, "spacing": "log"},
    "oracle": {
        "dt": 0.045,
        "duration": 0.0,
        "segments": 64,
        "window": "hann",
        "overlap": 0.0,
        "band_lo": 3e-3,
        "band_hi": 3e-2,
        "dump": "",
    },
    "fig2": {"kappa": 1.0, "N": 1e6, "C": 1.5, "s": 0.004, "omega_min": 1e-4, "omega_max": 1e-1, "points": 61},
    "sweep": {"target": "linewidth", "params": {}},
}


class ConfigParseError(Exception):
    pass


# ---------------------------------------------------------------- config


def load_config(path):
    """Read a TOML file; parse failures raise :class:`ConfigParseError`."""
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(f"{path}: {exc}") from None


def resolve(raw, mode=None, seed=None):
    """Merge ``raw`` into the defaults; unknown tables or keys are parse errors."""
    raw = dict(raw)
    cfg = copy.deepcopy(DEFAULTS)
    cfg_mode = raw.pop("mode", None)
    cfg_seed = raw.pop("seed", 0)
    for table, values in raw.items():
        if table not in cfg or not isinstance(values, dict):
            raise ConfigParseError(f"unknown config entry {table!r}")
        for key, value in values.items():
            if key not in cfg[table]:
                raise ConfigParseError(f"unknown key {key!r} in [{table}]")
            expected = type(cfg[table][key])
            if expected is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            if expected is not dict and not isinstance(value, expected):
                raise ConfigParseError(f"[{table}] {key} should be {expected.__name__}, got {value!r}")
            cfg[table][key] = value
    mode = mode or cfg_mode
    if mode is None:
        raise ConfigParseError("no mode given (use --mode or a top-level 'mode' key)")
    if mode not in MODES:
        raise ConfigParseError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
    seed = cfg_seed if seed is None else seed
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigParseError("seed must be an unsigned 64-bit integer")
    return {"mode": mode, "seed": seed, **cfg}


def omega_grid(spec):
    lo, hi, n = spec["omega_min"], spec["omega_max"], int(spec["points"])
    if not 0 < lo < hi or n < 2:
        raise ParameterError("grid needs 0 < omega_min < omega_max and at least 2 points")
    if spec["spacing"] == "log":
        return np.geomspace(lo, hi, n)
    if spec["spacing"] == "lin":
        return np.linspace(lo, hi, n)
    raise ParameterError(f"grid spacing must be 'lin' or 'log', got {spec['spacing']!r}")


def loop_params(sec):
    noise = {k: sec[k] for k in ("nbar_0", "nbar_G", "r_0", "r_G")}
    if sec["tau_F"] > 0:
        return feedback_loop.LoopParams(sec["eta"], sec["tau_F"], sec["tau_G"], sec["flux"], **noise)
    return feedback_loop.LoopParams.from_linewidths(sec["kappa_F"], sec["kappa_G"], sec["flux"], eta=sec["eta"], **noise)


def sr_params(sec):
    kw = {k: sec[k] for k in ("s", "nbar_a", "nbar_b", "r_a", "r_b")}
    return superradiant.SuperradiantParams.from_cooperativity(sec["C"], sec["N"], sec["kappa_F"], sec["kappa_G"], **kw)


# ---------------------------------------------------------------- modes
# Each mode returns (columns, summary): an ordered dict of equal-length
# columns and a dict of scalars for the manifest / JSON output.


def run_kk_phase(cfg):
    sec = cfg["gain"]
    if sec["model"] == "lorentzian":
        prof = causal_gain.lorentzian_gain_model(sec["eta"], sec["gamma_h"], sec["half_width"], sec["n_points"])
    elif sec["model"] == "quadratic":
        prof = causal_gain.quadratic_gain_model(sec["eta"], sec["a"], sec["half_width"], sec["n_points"])
    elif sec["model"] == "file":
        prof = causal_gain.GainMagnitudeProfile.from_csv(sec["path"], eta=sec["eta"])
    else:
        raise ParameterError(f"unknown gain model {sec['model']!r}")
    ph = causal_gain.minimum_phase_kk(prof, tail=sec["tail"])
    columns = {"omega": prof.grid, "log_mag": prof.log_mag, "phase": ph.phase}
    summary = {
        "tau_G": ph.tau_G,
        "peaked": ph.peaked,
        "truncation_warning": ph.truncation_warning,
        "asymmetry_warning": ph.asymmetry_warning,
        "tail_slope": ph.tail_slope,
    }
    return columns, summary


def run_loop_spectrum(cfg):
    p = loop_params(cfg["loop"])
    w = omega_grid(cfg["grid"])
    spectra = [feedback_loop.output_spectra(p, x) for x in w]
    sql = [feedback_loop.sql_product(p, x).exact for x in w]
    columns = {
        "omega": w,
        "Sqq": np.array([s.Sqq for s in spectra]),
        "Spp": np.array([s.Spp for s in spectra]),
        "sql_bound": np.array(sql),
    }
    return columns, {"gamma_gst": feedback_loop.gst_linewidth(p), "kappa_F": p.kappa_F, "kappa_G": p.kappa_G}


def run_sr_spectrum(cfg):
    sec = cfg["superradiant"]
    p = sr_params(sec)
    mf = superradiant.ss_steady_state(p)
    if not mf.above_threshold:
        raise ParameterError(f"C = {p.C:g} is below threshold {p.threshold:g}: no output spectrum")
    w = omega_grid(cfg["grid"])
    spectra = [superradiant.ss_output_spectra(p, x, method=sec["method"]) for x in w]
    columns = {"omega": w, "Sqq": np.array([s.Sqq for s in spectra]), "Spp": np.array([s.Spp for s in spectra])}
    return columns, mf.to_record()


def linewidth_record(sr_sec, lw_sec):
    p = sr_params(sr_sec)
    flux = lw_sec["flux"] if lw_sec["flux"] > 0 else None
    method = lw_sec["method"]
    if method == "closed-form":
        res = linewidth.ss_closed_form_linewidth(p, flux, form=lw_sec["form"])
    elif method == "beta-line":
        res = linewidth.ss_beta_line_linewidth(p, flux, method=sr_sec["method"], cutoff=lw_sec["cutoff"])
    elif method == "flat":
        mf = superradiant.ss_steady_state(p)
        if not mf.above_threshold:
            raise NotLasingError("laser is below threshold")
        res = linewidth.flat_linewidth(
            superradiant.ss_phase_spectrum(p, method=sr_sec["method"]), lw_sec["omega"], flux or mf.flux_out
        )
    else:
        raise ParameterError(f"unknown linewidth method {method!r}")
    gst, used_flux = linewidth._lasing_gst(p, flux)
    rec = {"C": p.C, "s": p.s, "flux": used_flux, "gamma_gst": gst}
    rec.update(res.to_record())
    return rec


def run_linewidth(cfg):
    rec = linewidth_record(cfg["superradiant"], cfg["linewidth"])
    columns = {k: np.array([v]) if not isinstance(v, str) else [v] for k, v in rec.items()}
    return columns, rec


def _sweep_axis(name, spec):
    if not (isinstance(spec, list) and len(spec) == 4 and spec[3] in ("lin", "log")):
        raise ConfigParseError(f"sweep {name} must be [start, stop, count, \"lin\"|\"log\"]")
    start, stop, count = float(spec[0]), float(spec[1]), spec[2]
    if not isinstance(count, int) or count < 1:
        raise ParameterError(f"sweep {name}: count must be a positive integer")
    if spec[3] == "log":
        if not (start > 0 and stop > 0):
            raise ParameterError(f"sweep {name}: log spacing needs positive bounds")
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def _threads():
    env = os.environ.get("QOSC_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ParameterError(f"QOSC_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ParameterError("QOSC_THREADS must be at least 1")
        return n
    return os.cpu_count() or 1


def run_sweep(cfg):
    sec = cfg["sweep"]
    target = sec["target"]
    tables = {"linewidth": ("superradiant", "linewidth"), "loop": ("loop",)}
    if target not in tables:
        raise ParameterError(f"sweep target must be one of {sorted(tables)}")
    axes = {}
    for name, spec in sec["params"].items():
        if not any(name in cfg[t] for t in tables[target]):
            raise ConfigParseError(f"sweep parameter {name!r} is not a key of {tables[target]}")
        axes[name] = _sweep_axis(name, spec)
    if not axes:
        raise ParameterError("sweep needs at least one entry under [sweep.params]")
    names = list(axes)
    points = list(itertools.product(*(axes[n] for n in names)))

    def evaluate(values):
        local = {t: dict(cfg[t]) for t in tables[target]}
        for n, v in zip(names, values):
            for t in local:
                if n in local[t]:
                    local[t][n] = type(DEFAULTS[t][n])(v)
        if target == "linewidth":
            rec = linewidth_record(local["superradiant"], local["linewidth"])
        else:
            p = loop_params(local["loop"])
            rec = {"gamma_gst": feedback_loop.gst_linewidth(p), "kappa_F": p.kappa_F, "kappa_G": p.kappa_G}
        return {**dict(zip(names, values)), **rec}

    workers = min(_threads(), len(points))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(evaluate, points))  # ordered collection, single writer
    keys = list(rows[0])
    columns = {k: [r[k] for r in rows] for k in keys}
    columns = {k: (np.array(v, dtype=float) if not isinstance(v[0], str) else v) for k, v in columns.items()}
    return columns, {"points": len(points), "workers": workers, "axes": names}


def run_oracle_check(cfg):
    sec, srs = cfg["oracle"], cfg["superradiant"]
    p = sr_params(srs)
    lo, hi = sec["band_lo"], sec["band_hi"]
    duration = sec["duration"]
    if duration <= 0:
        # eight bins below the band edge per segment
        duration = sec["segments"] * 2 * math.pi * 8 / lo
    sim = oracle.SimConfig(
        dt=sec["dt"],
        duration=duration,
        seed=cfg["seed"],
        segments=sec["segments"],
        window=sec["window"],
        overlap=sec["overlap"],
        omega_min=lo,
        omega_max=10 * hi,
    )
    series = oracle.simulate(p, sim)
    est = oracle.estimate_spectrum(series, sim)
    columns = {
        "omega": est.grid,
        "Sqq_hat": est.Sqq_hat,
        "Spp_hat": est.Spp_hat,
        "stderr_qq": est.stderr_qq,
        "stderr_pp": est.stderr_pp,
    }
    summary = {"segments": est.segments, "samples": len(series), "self_calibration": oracle.self_calibration()}
    if superradiant.ss_steady_state(p).above_threshold:
        model = np.full(est.grid.shape, np.nan)
        nz = est.grid > 0
        model[nz] = [superradiant.ss_output_spectra(p, w, method="solve").Spp for w in est.grid[nz]]
        columns["Spp_model"] = model
        rep = oracle.compare(lambda w: superradiant.ss_output_spectra(p, w, method="solve").Spp, est, (lo, hi))
        summary.update(
            band_rel_dev=rep.band_rel_dev,
            band_stderr=rep.band_stderr,
            max_rel_dev=rep.max_rel_dev,
            chi2_per_bin=rep.chi2_per_bin,
            n_bins=rep.n_bins,
        )
    return columns, summary, series


def fig2_columns(sec):
    """ST spectrum, its half (squeezed modes) and the spin-squeezed spectrum."""
    k = sec["kappa"]
    p = superradiant.SuperradiantParams.from_cooperativity(sec["C"], sec["N"], k, k, s=sec["s"])
    if not superradiant.ss_steady_state(p).above_threshold:
        raise ParameterError("fig2 parameters are below threshold")
    w = np.geomspace(sec["omega_min"] * k, sec["omega_max"] * k, int(sec["points"]))
    st = feedback_loop.gst_phase_spectrum(k, k, w)
    ss = np.array([superradiant.ss_output_spectra(p, x).Spp for x in w])
    columns = {"omega": w, "S_ST": st, "S_squeezed_modes": 0.5 * st, "S_spin_squeezed": ss}
    return columns, {"s_abs_C_minus_2": p.s * abs(p.C - 2), "corner": superradiant.corner_frequency(p)}


def run_fig2(cfg):
    return fig2_columns(cfg["fig2"])


RUNNERS = {
    "kk-phase": run_kk_phase,
    "loop-spectrum": run_loop_spectrum,
    "sr-spectrum": run_sr_spectrum,
    "linewidth": run_linewidth,
    "sweep": run_sweep,
    "fig2": run_fig2,
}


# ---------------------------------------------------------------- output


def _fmt(v):
    if isinstance(v, str):
        return v
    return "%.12e" % v


def write_csv(path, columns):
    names = list(columns)
    n = len(columns[names[0]])
    lines = [",".join(names)]
    for i in range(n):
        lines.append(",".join(_fmt(columns[c][i]) for c in names))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def versions():
    out = {"qosc": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}
    try:
        import numba

        out["numba"] = numba.__version__
    except ImportError:
        out["numba"] = None
    return out


def manifest(cfg, fmt, outputs, summary):
    used = {"mode": cfg["mode"], "seed": cfg["seed"]}
    used.update({k: v for k, v in cfg.items() if k not in ("mode", "seed")})
    return {
        "config": used,
        "seed": cfg["seed"],
        "format": fmt,
        "outputs": outputs,
        "versions": versions(),
        "backend": _kernels.get_backend(),
        "calibration": {"beta_line": linewidth.CALIBRATION},
        "summary": summary,
    }


# ---------------------------------------------------------------- entry


def build_parser():
    ap = argparse.ArgumentParser(prog="qosc", description="Quantum noise spectra and linewidths of feedback oscillators.")
    ap.add_argument("--config", type=Path, help="TOML config file")
    ap.add_argument("--output", type=Path, default=Path("."), help="output directory (default: .)")
    ap.add_argument("--mode", choices=MODES, help="overrides the config's mode")
    ap.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def execute(cfg):
    """Run a resolved config; returns (columns, summary, series or None)."""
    if cfg["mode"] == "oracle-check":
        return run_oracle_check(cfg)
    columns, summary = RUNNERS[cfg["mode"]](cfg)
    return columns, summary, None


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_PARSE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    try:
        raw = load_config(args.config) if args.config else {}
        cfg = resolve(raw, args.mode, args.seed)
    except ConfigParseError as exc:
        print(f"qosc: config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"qosc: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        columns, summary, series = execute(cfg)
    except ConfigParseError as exc:
        print(f"qosc: config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ParameterError as exc:
        print(f"qosc: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (NumericalError, ArithmeticError) as exc:
        print(f"qosc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"qosc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    mode, fmt = cfg["mode"], args.format
    try:
        args.output.mkdir(parents=True, exist_ok=True)
        data_name = f"{mode}.{fmt}"
        outputs = [data_name]
        if fmt == "csv":
            write_csv(args.output / data_name, columns)
        else:
            write_json(args.output / data_name, {"columns": columns, "summary": summary})
        dump = cfg["oracle"]["dump"] if series is not None else ""
        if dump:
            series.to_binary(args.output / dump)
            outputs.append(dump)
        write_json(args.output / f"{mode}.manifest.json", manifest(cfg, fmt, outputs, summary))
    except OSError as exc:
        print(f"qosc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
