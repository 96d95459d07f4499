"""Batch experiment runner binding the simulation and verification modules.

Each experiment kind reads a config (JSON or TOML), runs a seeded ensemble,
and writes CSV artifacts plus a manifest JSON naming every emitted file with
the config hash.  Outputs are deterministic given (config, seed); the worker
pool draws one child seed per sample so thread count never changes results.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import subprocess
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import sample_seeds
from .conformal import slit_rect_map
from .domains import derive_tree_graph, dimer_graph, load_domain
from .errors import ConfigError, DimertreeError
from .exact_count import kasteleyn_count, prob_event_estar, tree_count
from .harmonic import arc_field
from .height import winding_field
from .sle import (
    SleConfig,
    hsle8_martingale_path,
    simulate_conditioned_decomposition,
    simulate_ensemble,
)
from .stats import ks_two_sample, make_report, write_reports
from .temperley import tree_to_dimers, verify_bijection
from .wilson import extract_interface, extract_peano, sample_conditioned

EXPERIMENT_KINDS = (
    "bijection-verify",
    "sample-dimer",
    "height-stats",
    "interface-law",
    "peano-law",
    "hsle-martingale",
    "decomposition-test",
    "slit-map-check",
    "exact-oracles",
)

_ACCEPTANCE_SUITES = tuple(f"A{i}" for i in range(1, 12))


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run: what to do, on which domain, with which budget."""

    kind: str
    domain: str = ""
    samples: int = 100
    seed: int = 0
    threads: int = 1
    out: str = "."
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


def load_config(path, **overrides):
    """Read a JSON or TOML config file into an ExperimentConfig.

    Keyword overrides (seed, samples, threads, out) replace file values;
    unrecognized file keys land in ``options``.
    """
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} not found")
    if p.suffix == ".toml":
        with open(p, "rb") as f:
            data = tomllib.load(f)
    else:
        data = json.loads(p.read_text())
    if not isinstance(data, dict):
        raise ConfigError("config must be a key-value table")
    return make_config(data, **overrides)


def make_config(data, **overrides):
    """Build an ExperimentConfig from a plain dict plus CLI overrides."""
    data = dict(data)
    for k, v in overrides.items():
        if v is not None:
            data[k] = v
    known = {}
    for k in ("kind", "domain", "out"):
        if k in data:
            known[k] = str(data.pop(k))
    for k in ("samples", "seed", "threads"):
        if k in data:
            known[k] = int(data.pop(k))
    options = data.pop("options", {})
    options.update(data)  # stray top-level keys are kind-specific options
    if "kind" not in known:
        raise ConfigError("config needs an experiment 'kind'")
    return ExperimentConfig(options=options, **known)


def config_hash(cfg: ExperimentConfig) -> str:
    """Short hash identifying the experiment content.

    Seed appears in file names and threads must not affect results, so
    neither participates; the domain file's content does, so renaming the
    file does not change the hash but editing it does.
    """
    payload = {
        "kind": cfg.kind,
        "samples": cfg.samples,
        "options": {k: cfg.options[k] for k in sorted(cfg.options)},
    }
    if cfg.domain:
        payload["domain"] = Path(cfg.domain).read_text()
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# artifact plumbing


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(cfg, h, outdir, files, passed):
    manifest = {
        "experiment": cfg.kind,
        "config_hash": h,
        "seed": cfg.seed,
        "samples": cfg.samples,
        "domain": cfg.domain or None,
        "options": cfg.options,
        "pass": passed,
        "files": [
            {"path": Path(p).name, "sha256": _sha256(p)} for p in files
        ],
    }
    mpath = outdir / f"{cfg.kind}-{h}-{cfg.seed}.manifest.json"
    with open(mpath, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return mpath


def _parallel_samples(fn, cfg):
    """Map fn(index, child_seed) over the sample budget, order-stable."""
    seeds = sample_seeds(cfg.seed, cfg.samples)
    if cfg.threads == 1:
        return [fn(i, int(seeds[i])) for i in range(cfg.samples)]
    with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
        return list(ex.map(fn, range(cfg.samples), [int(s) for s in seeds]))


def _need_domain(cfg):
    if not cfg.domain:
        raise ConfigError(f"experiment {cfg.kind!r} needs a domain file")
    return load_domain(cfg.domain)


# ---------------------------------------------------------------------------
# experiment bodies: each returns (header, rows, reports, passed)


def _run_bijection_verify(cfg):
    d = _need_domain(cfg)
    res = verify_bijection(d, budget=int(cfg.options.get("budget", 10_000)))
    rows = [[k, str(v)] for k, v in res.items()]
    ok = (
        res["covers"] == res["trees"]
        and res["injective"]
        and res["surjective"]
        and res["roundtrip"]
        and res["measure_preserving"]
    )
    return ["quantity", "value"], rows, None, ok


def _run_exact_oracles(cfg):
    d = _need_domain(cfg)
    g = derive_tree_graph(d)
    dg = dimer_graph(d)
    kc = kasteleyn_count(dg)
    st = tree_count(g, mode="ST")
    sf2 = tree_count(g, mode="SF2") if g.n_arcs == 2 else None
    pe = prob_event_estar(d)
    rows = [
        ["kasteleyn_count", str(kc)],
        ["tree_count_ST", str(st)],
        ["prob_event_estar", str(pe)],
    ]
    if sf2 is not None:
        rows.append(["tree_count_SF2", str(sf2)])
        rows.append(["modulus_ratio_SF2_over_ST", repr(float(sf2) / float(st))])
    return ["quantity", "value"], rows, None, True


def _run_sample_dimer(cfg):
    d = _need_domain(cfg)

    def one(i, s):
        t = sample_conditioned(d, s)
        m = tree_to_dimers(t, d)
        bc, wc = m.graph.black_coords, m.graph.white_coords
        return [
            [i, s, bc[b][0], bc[b][1], wc[w][0], wc[w][1]]
            for b, w in m.edge_list()
        ]

    rows = [r for chunk in _parallel_samples(one, cfg) for r in chunk]
    return ["sample", "seed", "bx", "by", "wx", "wy"], rows, None, True


def _run_height_stats(cfg):
    d = _need_domain(cfg)

    def one(i, s):
        t = sample_conditioned(d, s)
        return winding_field(t, d).values

    fields = _parallel_samples(one, cfg)
    sites = sorted(fields[0].keys())
    vals = np.array([[f[p] for p in sites] for f in fields])
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(len(fields)) if len(fields) > 1 \
        else np.zeros(len(sites))
    rows = [
        [p[0], p[1], repr(float(mean[k])), repr(float(se[k])), len(fields)]
        for k, p in enumerate(sites)
    ]
    return ["x", "y", "mean", "se", "n"], rows, None, True


def _run_interface_law(cfg):
    d = _need_domain(cfg)

    def one(i, s):
        t = sample_conditioned(d, s)
        p = extract_interface(t)
        return [
            i, s,
            repr(float(p.coords[-1][0])), repr(float(p.coords[-1][1])),
            len(p), repr(float(p.winding[-1])),
        ]

    rows = _parallel_samples(one, cfg)
    return ["sample", "seed", "end_x", "end_y", "length", "winding"], rows, \
        None, True


def _run_peano_law(cfg):
    d = _need_domain(cfg)

    def one(i, s):
        t = sample_conditioned(d, s)
        out = []
        for side in ("L", "R"):
            c = extract_peano(t, side, d)
            out.append([
                i, s, side, c.start_vertex, c.end_vertex, len(c.points),
                repr(float(c.points[-1][0])), repr(float(c.points[-1][1])),
            ])
        return out

    rows = [r for chunk in _parallel_samples(one, cfg) for r in chunk]
    header = ["sample", "seed", "side", "start_vertex", "end_vertex",
              "n_points", "end_x", "end_y"]
    return header, rows, None, True


def _run_hsle_martingale(cfg):
    o = cfg.options
    d_pos = float(o.get("d", 1.0))
    a_pos = float(o.get("a", 2.0))
    sle = SleConfig(
        kappa=8.0,
        force_points=((d_pos, 2.0), (a_pos, 2.0)),
        drift_kind="hypergeometric",
        T=float(o.get("T", 0.04)),
        dt=float(o.get("dt", 1e-4)),
        record_every=int(o.get("record_every", 20)),
    )
    recs = simulate_ensemble(sle, cfg.seed, cfg.samples)
    m = np.array([hsle8_martingale_path(r) for r in recs])
    ratio = m / m[:, :1]
    mean = ratio.mean(axis=0)
    se = ratio.std(axis=0, ddof=1) / np.sqrt(len(recs))
    times = recs[0].times
    rows = [
        [repr(float(times[k])), repr(float(mean[k])), repr(float(se[k]))]
        for k in range(len(times))
    ]
    dev = np.abs(mean[1:] - 1.0)
    ok = bool(np.all(dev <= 3.0 * np.maximum(se[1:], 1e-15)))
    reports = [make_report("hsle-martingale-flat", float(dev.max()),
                           1.0 if ok else 0.0)]
    return ["t", "mean_ratio", "se"], rows, reports, ok


def _run_decomposition_test(cfg):
    o = cfg.options
    quad = tuple(o.get("quad", (1.0, 1.5)))
    window = tuple(o.get("window", (2.0, 2.5)))
    ens = simulate_conditioned_decomposition(
        quad, window, seed=cfg.seed, n_paths=cfg.samples,
        dt=float(o.get("dt", 5e-3)), T=float(o.get("T", 30.0)),
        gap_floor=float(o.get("gap_floor", 1e-6)),
    )
    rows = []
    for tau, mid in zip(ens.tau_conditioned, ens.midpoint_conditioned):
        rows.append(["conditioned", repr(float(tau)), repr(float(mid))])
    for tau, mid in zip(ens.tau_decomposed, ens.midpoint_decomposed):
        rows.append(["decomposed", repr(float(tau)), repr(float(mid))])
    st_t, p_t = ks_two_sample(ens.tau_conditioned, ens.tau_decomposed)
    st_m, p_m = ks_two_sample(ens.midpoint_conditioned,
                              ens.midpoint_decomposed)
    reports = [
        make_report("ks-hitting-capacity", st_t, p_t),
        make_report("ks-midpoint", st_m, p_m),
    ]
    ok = all(r["pass"] for r in reports)
    return ["ensemble", "tau", "midpoint"], rows, reports, ok


def _lattice_disk(radius, thetas):
    """Wired lattice disk with arcs between consecutive boundary angles."""
    import math

    from .domains import make_wired_graph

    pts = [
        (i, j)
        for i in range(-radius, radius + 1)
        for j in range(-radius, radius + 1)
        if i * i + j * j <= radius * radius
    ]
    index = {p: k for k, p in enumerate(pts)}
    edges = []
    for (i, j) in pts:
        for di, dj in ((1, 0), (0, 1)):
            q = (i + di, j + dj)
            if q in index:
                edges.append((index[(i, j)], index[q]))
    hull = [
        p for p in pts
        if any((p[0] + di, p[1] + dj) not in index
               for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)))
    ]
    wired = []
    for k in range(len(thetas) // 2):
        lo = thetas[(2 * k + 1) % len(thetas)]
        hi = thetas[(2 * k + 2) % len(thetas)]
        arc = [
            index[p] for p in hull
            if (lo < math.atan2(p[1], p[0]) < hi if lo <= hi
                else math.atan2(p[1], p[0]) > lo or math.atan2(p[1], p[0]) < hi)
        ]
        wired.append(arc)
    g = make_wired_graph(np.array(pts, dtype=float), edges, wired)
    return g, index


def _run_slit_map_check(cfg):
    import math

    o = cfg.options
    radius = int(o.get("radius", 64))
    thetas = list(o.get("thetas", (-2.4, -1.2, -0.4, 0.6, 1.5, 2.3)))
    tol = float(o.get("tol", 0.02))
    y = np.array([math.tan(t / 2.0) for t in thetas])
    g, index = _lattice_disk(radius, thetas)
    rng = np.random.default_rng(cfg.seed)
    probes = []
    while len(probes) < max(10, cfg.samples):
        p = tuple(rng.integers(-radius // 2, radius // 2 + 1, size=2))
        if p in index and p not in probes:
            probes.append(p)
    rows = []
    worst = 0.0
    max_resid = 0.0
    n_arcs = len(thetas) // 2
    for j in range(1, n_arcs + 1):
        sm = slit_rect_map(y, j)
        if sm.residuals is not None:
            max_resid = max(max_resid, float(np.max(np.abs(sm.residuals))))
        h = arc_field(g, j - 1)
        for p in probes:
            w = complex(p[0], p[1]) / radius
            z = 1j * (1.0 - w) / (1.0 + w)
            cont = 1.0 - sm.im_phi(z)
            disc = h[g.index[index[p]]]
            err = abs(cont - disc)
            worst = max(worst, err)
            rows.append([j, p[0], p[1], repr(float(cont)), repr(float(disc)),
                         repr(float(err))])
    ok = worst <= tol and max_resid < 1e-10
    reports = [
        make_report("slit-map-sup-error", worst, 1.0 if worst <= tol else 0.0),
        make_report("newton-residuals", max_resid,
                    1.0 if max_resid < 1e-10 else 0.0),
    ]
    return ["arc", "px", "py", "continuum", "discrete", "abs_err"], rows, \
        reports, ok


_RUNNERS = {
    "bijection-verify": _run_bijection_verify,
    "exact-oracles": _run_exact_oracles,
    "sample-dimer": _run_sample_dimer,
    "height-stats": _run_height_stats,
    "interface-law": _run_interface_law,
    "peano-law": _run_peano_law,
    "hsle-martingale": _run_hsle_martingale,
    "decomposition-test": _run_decomposition_test,
    "slit-map-check": _run_slit_map_check,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute one experiment; write CSV + manifest; 0 exit iff it passed."""
    h = config_hash(cfg)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    header, rows, reports, passed = _RUNNERS[cfg.kind](cfg)
    stem = f"{cfg.kind}-{h}-{cfg.seed}"
    files = []
    csv_path = outdir / f"{stem}.csv"
    _write_csv(csv_path, header, rows)
    files.append(csv_path)
    if reports is not None:
        rpath = outdir / f"{stem}.reports.json"
        write_reports(reports, rpath)
        files.append(rpath)
    _write_manifest(cfg, h, outdir, files, passed)
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# acceptance suite runner


def acceptance(selectors, out=".", extra_args=()):
    """Run the selected acceptance suites via pytest; aggregate JSON report.

    selectors are suite names A1..A11 (at least one required).
    """
    if not selectors:
        raise ConfigError("empty acceptance selector")
    for s in selectors:
        if s not in _ACCEPTANCE_SUITES:
            raise ConfigError(f"unknown acceptance suite {s!r}")
    repo = Path(__file__).resolve().parents[2]
    test_file = repo / "tests" / "test_acceptance.py"
    if not test_file.exists():
        raise ConfigError(f"acceptance tests not found at {test_file}")
    expr = " or ".join(f"{s.lower()}_" for s in selectors)
    cmd = [sys.executable, "-m", "pytest", str(test_file), "-v",
           "--tb=line", "-k", expr, *extra_args]
    proc = subprocess.run(cmd, capture_output=True, text=True, cwd=repo)
    results = []
    for line in proc.stdout.splitlines():
        if "::" not in line:
            continue
        for status in ("PASSED", "FAILED", "ERROR"):
            if f" {status}" in line:
                name = line.split("::")[1].split()[0]
                results.append({"name": name, "pass": status == "PASSED"})
    report = {
        "selectors": list(selectors),
        "exit_code": proc.returncode,
        "pass": proc.returncode == 0,
        "results": results,
    }
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "acceptance-report.json", "w") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    sys.stdout.write(proc.stdout)
    return report


# ---------------------------------------------------------------------------
# argument parsing

_SUBCOMMAND_KIND = {
    "verify-bijection": "bijection-verify",
    "sample": "sample-dimer",
    "heights": "height-stats",
    "interface": "interface-law",
    "peano": "peano-law",
    "sle-sim": "hsle-martingale",
    "exact": "exact-oracles",
}


def _add_common(p):
    p.add_argument("--config", help="JSON or TOML experiment config")
    p.add_argument("--domain", help="domain spec JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--kind", help="override the experiment kind")


def _build_parser():
    ap = argparse.ArgumentParser(prog="dimertree")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMAND_KIND:
        _add_common(sub.add_parser(name))
    bd = sub.add_parser("build-domain")
    bd.add_argument("domain", help="domain spec JSON file")
    acc = sub.add_parser("acceptance")
    acc.add_argument("suites", nargs="*", help="suite names A1..A11")
    acc.add_argument("--all", action="store_true", dest="all_suites")
    acc.add_argument("--out", default=".")
    return ap


def _cmd_build_domain(args):
    d = load_domain(args.domain)
    if hasattr(d, "arcs"):
        summary = {
            "type": "square_lattice",
            "n": d.n,
            "arcs": [len(a) for a in d.arcs],
            "z_marks": len(d.z_marks),
            "squares": len(d.squares),
        }
    else:
        summary = {"type": "superposition",
                   "n_black": d.n_black, "n_white": d.n_white}
    json.dump(summary, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "build-domain":
            return _cmd_build_domain(args)
        if args.command == "acceptance":
            suites = list(_ACCEPTANCE_SUITES) if args.all_suites \
                else list(args.suites)
            report = acceptance(suites, out=args.out)
            return 0 if report["pass"] else 1
        base = {"kind": _SUBCOMMAND_KIND[args.command]}
        if args.config:
            cfg = load_config(
                args.config, kind=args.kind, domain=args.domain,
                seed=args.seed, samples=args.samples, threads=args.threads,
                out=args.out,
            )
        else:
            cfg = make_config(
                base, kind=args.kind, domain=args.domain, seed=args.seed,
                samples=args.samples, threads=args.threads, out=args.out,
            )
        return run(cfg)
    except DimertreeError as e:
        sys.stderr.write(f"error: {type(e).__name__}: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
