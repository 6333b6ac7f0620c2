"""Command line front end.

Exit codes: 0 ok, 2 bad configuration or input, 3 hypothesis violation,
4 numeric failure.  Every run writes a ``manifest.json`` with the resolved
configuration, library versions and a SHA-256 of each output file.
"""
from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import os
import platform
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import _svg
from . import embedding as embedding_mod
from . import experiments as ex
from . import mmspace
from . import persistence
from . import spectral
from . import transforms
from .errors import HypothesisViolation, MetricError, NumericFailure

__all__ = ["main", "ConfigError", "ExperimentConfig", "load_config", "parse_space", "parse_k"]

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NUMERIC = 0, 2, 3, 4

COMMANDS = ("sample", "spectrum", "embed", "hausdorff", "bounds", "transform", "compare")
CONFIG_KEYS = {
    "spaces", "k", "seed", "n", "metric", "rips_scale", "intrinsic_scale", "dirs",
    "count", "maxdim", "eig", "bins", "out",
}
SPACE_KEYS = {"kind", "n", "seed", "metric", "name", "dim", "R", "r", "p", "q", "path"}


class ConfigError(ValueError):
    """Bad flags or configuration file; ``where`` names the field or line."""

    def __init__(self, message, where=""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


@dataclass
class ExperimentConfig:
    spaces: list = field(default_factory=list)
    k: list = field(default_factory=list)
    seed: int = 0
    n: int = 500
    metric: str = "geodesic"
    rips_scale: float | None = None
    intrinsic_scale: float | None = None
    dirs: int = transforms.DEFAULT_DIRECTIONS
    count: int = 8
    maxdim: int = 1
    eig: list = field(default_factory=lambda: [10, 20])
    bins: int = 30
    out: str = "dke-out"

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["spaces"] = [s.to_json() for s in self.spaces]
        return d


# --------------------------------------------------------------------------
# parsing


def parse_k(text) -> list[int]:
    """``"5"``, ``"2,5,10"`` or ``"1-20"`` (inclusive), or a list/int from JSON."""
    if isinstance(text, bool):
        raise ConfigError("k must be an integer or list", "k")
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in text):
            raise ConfigError("k list must hold integers", "k")
        return list(text)
    out = []
    try:
        for part in str(text).split(","):
            part = part.strip()
            if "-" in part:
                a, b = part.split("-", 1)
                out.extend(range(int(a), int(b) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise ConfigError(f"cannot parse {text!r}", "k") from None
    if not out:
        raise ConfigError("empty k list", "k")
    return out


def _num(v):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def _space_from_dict(d: dict, defaults: ExperimentConfig, where: str) -> ex.SpaceSpec:
    if not isinstance(d, dict):
        raise ConfigError("space entry must be an object", where)
    unknown = set(d) - SPACE_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", where)
    kind = d.get("kind")
    if kind not in ex.SPACE_KINDS:
        raise ConfigError(f"kind must be one of {list(ex.SPACE_KINDS)}, got {kind!r}", f"{where}.kind")
    if kind == "lens" and not {"p", "q"} <= set(d):
        raise ConfigError("lens spaces need p and q", where)
    if kind == "file" and "path" not in d:
        raise ConfigError("file spaces need path", where)
    for key in ("n", "seed", "p", "q", "dim"):
        if key in d and (not isinstance(d[key], int) or isinstance(d[key], bool)):
            raise ConfigError("must be an integer", f"{where}.{key}")
    metric = d.get("metric", defaults.metric)
    if metric not in ("geodesic", "chordal"):
        raise ConfigError(f"metric must be geodesic or chordal, got {metric!r}", f"{where}.metric")
    params = {key: d[key] for key in ("dim", "R", "r", "p", "q", "path") if key in d}
    return ex.SpaceSpec(kind, int(d.get("n", defaults.n)), int(d.get("seed", defaults.seed)), metric,
                        params, str(d.get("name", "")))


def parse_space(text: str, defaults: ExperimentConfig, where: str = "--space") -> ex.SpaceSpec:
    """``kind[:key=value,...]``, e.g. ``lens:p=7,q=1,seed=3`` or ``sphere:dim=3``."""
    kind, _, rest = text.partition(":")
    d = {"kind": kind.strip()}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"expected key=value, got {item!r}", where)
        d[key.strip()] = val.strip() if key.strip() in ("path", "name", "metric") else _num(val.strip())
    return _space_from_dict(d, defaults, where)


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(exc), str(path)) from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{exc.msg} (line {exc.lineno}, column {exc.colno})", str(path)) from None
    if not isinstance(obj, dict):
        raise ConfigError("top level must be an object", str(path))
    unknown = set(obj) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown fields {sorted(unknown)}", str(path))
    return obj


def _typed(obj, key, typ, name=None):
    v = obj[key]
    ok = isinstance(v, typ) and not isinstance(v, bool)
    if not ok:
        raise ConfigError(f"expected {name or typ.__name__}, got {v!r}", key)
    return v


def resolve(args, default_k) -> ExperimentConfig:
    cfg = ExperimentConfig()
    raw = load_config(args.config) if getattr(args, "config", None) else {}
    for key, typ in (("seed", int), ("n", int), ("dirs", int), ("count", int), ("maxdim", int), ("bins", int)):
        if key in raw:
            setattr(cfg, key, _typed(raw, key, typ))
    for key in ("rips_scale", "intrinsic_scale"):
        if key in raw:
            setattr(cfg, key, float(_typed(raw, key, (int, float), "number")))
    if "metric" in raw:
        cfg.metric = _typed(raw, "metric", str)
    if "out" in raw:
        cfg.out = _typed(raw, "out", str)
    if "eig" in raw:
        cfg.eig = parse_k(raw["eig"])
    # flags override the file
    for key in ("seed", "n", "dirs", "count", "maxdim", "bins", "rips_scale", "intrinsic_scale", "metric", "out"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "eig", None):
        cfg.eig = parse_k(args.eig)
    if cfg.metric not in ("geodesic", "chordal"):
        raise ConfigError(f"metric must be geodesic or chordal, got {cfg.metric!r}", "metric")
    k = args.k if getattr(args, "k", None) is not None else raw.get("k", default_k)
    cfg.k = parse_k(k)
    if any(v < 1 for v in cfg.k):
        raise ConfigError("k values must be >= 1", "k")
    if getattr(args, "space", None):
        cfg.spaces = [parse_space(s, cfg, f"--space[{i}]") for i, s in enumerate(args.space)]
    elif "spaces" in raw:
        if not isinstance(raw["spaces"], list):
            raise ConfigError("must be a list", "spaces")
        cfg.spaces = [_space_from_dict(d, cfg, f"spaces[{i}]") for i, d in enumerate(raw["spaces"])]
    return cfg


# --------------------------------------------------------------------------
# output


class Output:
    """Atomic file writer that records a digest of everything it writes."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = {}

    @contextlib.contextmanager
    def path(self, name):
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix="-" + name)
        os.close(fd)
        try:
            yield tmp
            data = Path(tmp).read_bytes()
            os.replace(tmp, self.root / name)
            self.files[name] = hashlib.sha256(data).hexdigest()
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)

    def text(self, name, text):
        with self.path(name) as tmp:
            Path(tmp).write_text(text)

    def json(self, name, obj):
        self.text(name, json.dumps(obj, indent=1, allow_nan=True) + "\n")

    def csv(self, name, header, rows):
        lines = [",".join(header)] + [",".join(_cell(v) for v in row) for row in rows]
        self.text(name, "\n".join(lines) + "\n")

    def manifest(self, command, cfg: ExperimentConfig):
        self.json("manifest.json", {
            "command": command,
            "config": cfg.to_json(),
            "versions": {
                "dke": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "files": dict(sorted(self.files.items())),
        })


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def _build_spaces(cfg: ExperimentConfig, need: int | None = None):
    if not cfg.spaces:
        raise ConfigError("no space given (use --space or a config file)", "spaces")
    if need is not None and len(cfg.spaces) != need:
        raise ConfigError(f"this command needs exactly {need} space(s), got {len(cfg.spaces)}", "spaces")
    out = {}
    for spec in cfg.spaces:
        label = spec.label
        while label in out:
            label += "'"
        out[label] = ex.make_space(spec)
    return out


# --------------------------------------------------------------------------
# commands


def cmd_sample(cfg, out: Output):
    for name, m in _build_spaces(cfg).items():
        with out.path(_safe(name) + ".json") as p:
            mmspace.write_json(m, p)
        with out.path(_safe(name) + ".csv") as p:
            mmspace.write_csv(m, p)


def cmd_spectrum(cfg, out: Output):
    spaces = _build_spaces(cfg)
    rows = ex.spectrum_rows(spaces, cfg.count)
    names = list(rows)
    table = [[i + 1] + [rows[nm][i] if i < len(rows[nm]) else None for nm in names] for i in range(cfg.count)]
    out.csv("spectrum.csv", ["index"] + names, table)
    out.json("spectrum.json", rows)
    series = {nm: (list(range(1, len(v) + 1)), v) for nm, v in rows.items()}
    out.text("spectrum.svg", _svg.line_plot(series, "normalized eigenvalues", "index", "eigenvalue"))


def cmd_embed(cfg, out: Output):
    (name, m), = _build_spaces(cfg, 1).items()
    k = cfg.k[0]
    spec = spectral.eigendecompose(m)
    e = embedding_mod.embed(spec, k, m)
    with out.path("embedding.csv") as p:
        embedding_mod.write_embedding_csv(e, p)
    with out.path("embedding.json") as p:
        embedding_mod.write_json(e, p)
    with out.path("eigenvalues.csv") as p:
        spectral.write_eigenvalues_csv(spec, p, k)
    hists = ex.histograms(m, k, cfg.eig, cfg.bins, spectrum=spec)
    out.json("histograms.json", hists)
    for key, h in hists.items():
        rows = [[a, b, c] for a, b, c in zip(h["edges"][:-1], h["edges"][1:], h["counts"])]
        out.csv(f"hist_{key}.csv", ["lo", "hi", "count"], rows)
        title = f"{name} {key} (min {h['min']:.4g}, max {h['max']:.4g})"
        out.text(f"hist_{key}.svg", _svg.histogram(h["counts"], h["edges"], title, "|value|"))


def cmd_hausdorff(cfg, out: Output):
    spaces = _build_spaces(cfg)
    if len(spaces) < 2:
        raise ConfigError("need at least two spaces", "spaces")
    rows = ex.hausdorff_table(spaces, cfg.k)
    out.csv("hausdorff.csv", ["space_a", "space_b", "k", "hausdorff"],
            [[r["pair"][0], r["pair"][1], r["k"], r["hausdorff"]] for r in rows])
    out.json("hausdorff.json", rows)
    series = {}
    for r in rows:
        xs, ys = series.setdefault(" vs ".join(r["pair"]), ([], []))
        xs.append(r["k"])
        ys.append(r["hausdorff"])
    out.text("hausdorff.svg", _svg.line_plot(series, "Hausdorff distance between embeddings", "k", "distance"))


def cmd_bounds(cfg, out: Output):
    (name, m), = _build_spaces(cfg, 1).items()
    res = ex.bounds_table(m, cfg.k)
    res["space"] = name
    cols = ["k", "A", "B", "A_bound", "B_bound", "trunc_bound_max", "norm_bound_via_row_norm", "norm_bound_as_printed"]
    out.csv("bounds.csv", cols, [[r[c] for c in cols] for r in res["rows"]])
    out.json("bounds.json", res)
    ks = [r["k"] for r in res["rows"]]
    series = {c: (ks, [r[c] for r in res["rows"]]) for c in ("A", "B", "A_bound", "B_bound")}
    out.text("bounds.svg", _svg.line_plot(series, f"{name}: measured constants and bounds", "k", "value"))


def _need_scale(cfg):
    if cfg.rips_scale is None:
        raise ConfigError("a Rips scale is required (--rips-scale)", "rips_scale")


def cmd_transform(cfg, out: Output):
    _need_scale(cfg)
    (name, m), = _build_spaces(cfg, 1).items()
    k = cfg.k[0]
    res = ex.transform_run(m, k, cfg.dirs, cfg.seed, cfg.rips_scale, cfg.intrinsic_scale, cfg.maxdim)
    for kind, r in res.items():
        with out.path(f"{kind}.json") as p:
            transforms.write_json(r, p)
    pk = transforms.per_direction_distances(res["i-PKT"], res["e-PKT"], "bottleneck")
    ek = transforms.per_direction_distances(res["i-EKT"], res["e-EKT"], "euler_lp", 1.0)
    out.csv("transform_summary.csv", ["direction", "bottleneck_i_vs_e", "euler_l1_i_vs_e"],
            [[i, a, b] for i, (a, b) in enumerate(zip(pk, ek))])
    e = embedding_mod.embed(spectral.eigendecompose(m), k, m)
    scale_x = cfg.rips_scale if cfg.intrinsic_scale is None else cfg.intrinsic_scale
    cx = persistence.build_rips(m, scale_x, cfg.maxdim + 1)
    out.json("transform_summary.json", {
        "space": name,
        "k": k,
        "directions": cfg.dirs,
        "complexes_match": transforms.complexes_match(cx, e, cfg.rips_scale),
        "max_bottleneck_i_vs_e": max(pk, default=0.0),
        "max_euler_l1_i_vs_e": max(ek, default=0.0),
        "lipschitz_constant": transforms.lipschitz_constant(e),
        "params": {kind: r.params for kind, r in res.items()},
    })


def cmd_compare(cfg, out: Output):
    spaces = _build_spaces(cfg, 2)
    (nx, X), (ny, Y) = spaces.items()
    reports = []
    for k in cfg.k:
        rep = ex.compare_report(X, Y, k, cfg.dirs, cfg.seed, cfg.rips_scale, cfg.maxdim)
        rep["spaces"] = [nx, ny]
        reports.append(rep)
    out.json("compare.json", reports)
    cols = ["k", "hausdorff", "gh_bound_general", "gh_bound_finite", "stability_bound", "transform_distance"]
    out.csv("compare.csv", cols, [[r.get(c) for c in cols] for r in reports])


HANDLERS = {
    "sample": (cmd_sample, "1"),
    "spectrum": (cmd_spectrum, "1"),
    "embed": (cmd_embed, "10"),
    "hausdorff": (cmd_hausdorff, "1-20"),
    "bounds": (cmd_bounds, "2,5,10,50,200"),
    "transform": (cmd_transform, "5"),
    "compare": (cmd_compare, "4"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dke", description="Distance kernel embeddings of finite metric measure spaces.")
    ap.add_argument("--version", action="version", version=f"dke {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "sample": "draw model-space samples and write their distance matrices",
        "spectrum": "normalized leading eigenvalues of one or more spaces",
        "embed": "embedding coordinates and histograms of norms and eigenfunctions",
        "hausdorff": "Hausdorff distance between embeddings for every pair of spaces, per k",
        "bounds": "measured sup error and embedding norm against analytic bounds, per k",
        "transform": "the four persistence/Euler transforms on one space",
        "compare": "Hausdorff, Gromov-Hausdorff bounds, stability bound and transform distance for two spaces",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="JSON configuration file (flags override it)")
        p.add_argument("--space", action="append", help="kind[:key=value,...]; repeatable")
        p.add_argument("--seed", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--k", help="integer, comma list or range a-b")
        p.add_argument("--metric", choices=("geodesic", "chordal"))
        p.add_argument("--rips-scale", dest="rips_scale", type=float)
        p.add_argument("--intrinsic-scale", dest="intrinsic_scale", type=float)
        p.add_argument("--dirs", type=int)
        p.add_argument("--maxdim", type=int)
        p.add_argument("--count", type=int)
        p.add_argument("--eig", help="1-based eigenfunction indices for histograms")
        p.add_argument("--bins", type=int)
        p.add_argument("--out")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler, default_k = HANDLERS[args.command]
    try:
        cfg = resolve(args, default_k)
        out = Output(cfg.out)
        handler(cfg, out)
        out.manifest(args.command, cfg)
    except ConfigError as exc:
        print(f"dke: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisViolation as exc:
        print(f"dke: hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (NumericFailure, ArithmeticError) as exc:
        print(f"dke: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MetricError, ValueError, KeyError, OverflowError, OSError) as exc:
        print(f"dke: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
