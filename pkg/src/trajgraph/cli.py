"""``trajgraph`` command line: ingest -> build -> query -> eval / sweep.

Exit codes: 0 success, 1 usage, 2 data error, 3 internal invariant breach.

Settings come from ``--config FILE`` (flat ``key = value`` lines, ``#``
comments) and are overridden by flags. Keys are the :class:`Config` fields
plus the path keys in ``PATH_KEYS``; anything else is rejected.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import fields
from typing import Dict, List, Optional

from .errors import (ConfigError, DataError, GuardError, IndexFormatError, StateError,
                     StoreMismatchError, TrajGraphError)
from .evaluation import DEFAULT_GROUND_TRUTH_CAP, run_benchmark, synth_corpus
from .index import build_cndi, build_index, load_index, save_index
from .model import Config, TrajectoryStore, load_store, read_csv, save_store, write_csv
from .search import query_topk
from .spatial import RTree

logger = logging.getLogger("trajgraph")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

PATH_KEYS = ("data", "store", "index", "queries", "report_dir", "out")
ABLATIONS = ("no-gari", "no-random", "no-record")
BUILD_KEYS = ("alpha", "grid_m", "xi", "delta", "gari_neighbor_counts", "candidate_counts",
              "distance")

# data and query length bounds used by ingest and by query loading
DATA_LEN = (90, 300)
QUERY_LEN = (30, 90)


class UsageError(TrajGraphError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- config file ----------------------------------------------------------

_CONFIG_FIELDS = {f.name: f for f in fields(Config)}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", "null", ""):
        return None
    if key in PATH_KEYS:
        return raw
    default = _CONFIG_FIELDS[key].default
    if isinstance(default, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, tuple):
        return tuple(float(x) if key == "erp_gap" else int(x) for x in raw.split(","))
    if key in ("alpha", "delta", "edr_eps"):
        return float(raw)
    if isinstance(default, int) or key == "min_candidates":
        return int(raw)
    return raw


def parse_config_text(text: str) -> Dict[str, object]:
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_FIELDS and key not in PATH_KEYS:
            raise ConfigError(f"config line {n}: unknown key {key!r}")
        try:
            out[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"config line {n}: bad value for {key}: {exc}") from None
    return out


def load_config_file(path) -> Dict[str, object]:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


# --- shared options -------------------------------------------------------

def _add_config_flags(p, build: bool = True):
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="flat key = value settings file")
    if build:
        g.add_argument("--alpha", type=float, help="point match threshold (distance units)")
        g.add_argument("--grid-m", type=int, help="grid cells per side for the upper layer")
        g.add_argument("--xi", type=int, help="neighbours per node in the lower layer")
        g.add_argument("--delta", type=float, help="share of similarity-chosen neighbours")
    g.add_argument("--k", type=int, help="results per query")
    g.add_argument("--metric", choices=("dtw", "edr", "erp"))
    g.add_argument("--scorer", help="representative-similarity scorer name")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int, help="cap on worker threads")
    g.add_argument("--ablate", action="append", default=[],
                   help="no-gari, no-random or no-record (repeatable or comma-separated)")
    return g


def _ablations(args) -> List[str]:
    out = []
    for item in args.ablate:
        for a in item.split(","):
            a = a.strip()
            if a not in ABLATIONS:
                raise UsageError(f"--ablate: unknown ablation {a!r}; choose from {', '.join(ABLATIONS)}")
            if a not in out:
                out.append(a)
    return out


def _settings(args) -> Dict[str, object]:
    """File values overridden by any flag given on the command line."""
    s = load_config_file(args.config) if getattr(args, "config", None) else {}
    for key in ("alpha", "grid_m", "xi", "delta", "k", "metric", "scorer", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            s[key] = v
    for a in _ablations(args):
        if a == "no-gari":
            s["use_gari"] = False
        elif a == "no-record":
            s["record_tracking"] = False
        else:
            s["delta"] = 1.0
    return s


def _config_from(settings: Dict[str, object], base: Optional[Config] = None) -> Config:
    cfg = {k: v for k, v in settings.items() if k in _CONFIG_FIELDS}
    if base is not None:
        return base.replace(**cfg)
    if "alpha" not in cfg:
        raise UsageError("--alpha is required (no value is safe across datasets)")
    return Config(**cfg)


def _path(args, settings, name, required=True):
    v = getattr(args, name, None) or settings.get(name)
    if v is None and required:
        raise UsageError(f"missing path: pass --{name.replace('_', '-')} or set {name} in --config")
    return v


def _set_threads(n):
    if n is None:
        return
    if n < 1:
        raise UsageError("--threads must be >= 1")
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _load_queries(path, lo, hi):
    trajs, stats = read_csv(path, lo, hi)
    dropped = stats.read - stats.kept
    if dropped:
        logger.warning("%d queries outside length bounds [%d, %d] or invalid were dropped", dropped, lo, hi)
    return trajs


def _open_pair(args, settings):
    index = load_index(_path(args, settings, "index"))
    store = load_store(_path(args, settings, "store"))
    if store.digest() != index.store_digest:
        raise StoreMismatchError("the index was built over a different trajectory store")
    return index, store


def _out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


# --- commands -------------------------------------------------------------

def cmd_ingest(args) -> int:
    settings = load_config_file(args.config) if args.config else {}
    src = _path(args, settings, "data")
    dest = _path(args, settings, "out")
    trajs, stats = read_csv(src, args.min_len, args.max_len)
    store = TrajectoryStore(trajs)
    save_store(store, dest)
    print(f"N={len(store)} read={stats.read} too_short={stats.too_short} too_long={stats.too_long} "
          f"erroneous={stats.erroneous} duplicate_points={stats.duplicate_points}")
    for lo, hi, c in stats.histogram():
        print(f"len {lo}-{hi}: {c}")
    return EXIT_OK


def cmd_build(args) -> int:
    settings = _settings(args)
    _set_threads(args.threads)
    config = _config_from(settings)
    store = load_store(_path(args, settings, "store"))
    if len(store) < 2:
        raise DataError("the store holds fewer than 2 trajectories")
    bundle = build_index(store, config)
    save_index(bundle, _path(args, settings, "out"))
    t = bundle.timings
    print(f"N={len(store)} gari_nodes={len(bundle.gari.nodes)}")
    print(f"build grid={t['grid_s']:.3f}s gari={t['gari_s']:.3f}s cndi={t['cndi_s']:.3f}s", file=sys.stderr)
    return EXIT_OK


def _query_config(args, settings, index) -> Config:
    given = [k for k in BUILD_KEYS if getattr(args, k, None) is not None]
    if given:
        raise UsageError(f"build-time option(s) {', '.join(given)} cannot change at query time; rebuild the index")
    settings = {k: v for k, v in settings.items() if k not in BUILD_KEYS or k == "delta"}
    delta = settings.pop("delta", None)
    config = _config_from(settings, index.config)
    if delta is not None and delta != index.config.delta:
        config = config.replace(delta=delta)
    return config


def cmd_query(args) -> int:
    settings = _settings(args)
    _set_threads(args.threads)
    index, store = _open_pair(args, settings)
    config = _query_config(args, settings, index)
    if config.delta != index.config.delta:
        logger.info("rebuilding the lower layer with delta=%s", config.delta)
        index.cndi = build_cndi(store, RTree.from_store(store), config)
    queries = _load_queries(_path(args, settings, "queries"), args.query_min_len, args.query_max_len)
    fh, close = _out(args.out or settings.get("out"))
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query_id", "rank", "traj_id", "start", "end", "score", "visited", "hops", "ms"])
        for q in queries:
            res = query_topk(q, index, store, config)
            rec = res.record
            hops = rec.hops_gari + rec.hops_cndi
            ms = "" if args.no_timings else f"{rec.wall_times['total_s'] * 1e3:.3f}"
            for rank, ref in enumerate(res.topk, start=1):
                w.writerow([q.id, rank, ref.traj_id, ref.start, ref.end, repr(float(ref.score)),
                            len(rec.visited), hops, ms])
    finally:
        if close:
            fh.close()
    return EXIT_OK


def _bench(args, sweeps: bool) -> int:
    settings = _settings(args)
    _set_threads(args.threads)
    index = None
    if _path(args, settings, "index", required=not sweeps):
        index, store = _open_pair(args, settings)
        config = _query_config(args, settings, index)
        if config.delta != index.config.delta:
            index = None
    else:
        store = load_store(_path(args, settings, "store"))
        config = _config_from(settings)
    queries = _load_queries(_path(args, settings, "queries"), args.query_min_len, args.query_max_len)
    out_dir = _path(args, settings, "report_dir")
    reports = run_benchmark(
        store, queries, config, out_dir,
        xi_values=tuple(args.xi_values) if sweeps else (),
        k_values=tuple(args.k_values) if sweeps else (config.k,),
        n_values=tuple(args.n_values) if sweeps else (),
        cap=args.cap, force=args.force, timings=not args.no_timings,
        ablations=not sweeps, index=index)
    for name, rep in reports.items():
        hrs = " ".join(f"hr{k}={v:.4f}" for k, v in sorted(rep.hr.items()))
        print(f"{name}: {hrs} r10_50={rep.r10_at_50:.4f} rr={rep.rr:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    return _bench(args, sweeps=False)


def cmd_sweep(args) -> int:
    return _bench(args, sweeps=True)


def cmd_synth(args) -> int:
    store, queries, hints = synth_corpus(args.n, tuple(args.len_range), tuple(args.query_len_range),
                                         args.queries, args.embed_rate, args.noise, args.seed)
    write_csv(store, args.data_out)
    write_csv(queries, args.queries_out)
    if args.hints_out:
        with open(args.hints_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["query_id", "traj_id", "start", "end"])
            for h in hints:
                w.writerow([h.query_id, h.traj_id or "", h.start or "", h.end or ""])
    print(f"N={len(store)} queries={len(queries)}")
    return EXIT_OK


# --- parser ---------------------------------------------------------------

def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="trajgraph", description="Graph-indexed top-k similar subtrajectory search.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("ingest", help="validate a trajectory CSV into a store file")
    s.add_argument("data", nargs="?", help="input CSV (traj_id,seq,lon,lat[,t])")
    s.add_argument("-o", "--out", help="store file to write")
    s.add_argument("--min-len", type=int, default=DATA_LEN[0])
    s.add_argument("--max-len", type=int, default=DATA_LEN[1])
    s.add_argument("--config")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("build", help="build the graph index over a store")
    s.add_argument("store", nargs="?")
    s.add_argument("-o", "--out", help="index file to write")
    _add_config_flags(s)
    s.set_defaults(func=cmd_build)

    def query_inputs(s):
        s.add_argument("--index", help="index file")
        s.add_argument("--store", help="store file")
        s.add_argument("--queries", help="query CSV")
        s.add_argument("--query-min-len", type=int, default=QUERY_LEN[0])
        s.add_argument("--query-max-len", type=int, default=QUERY_LEN[1])
        s.add_argument("--no-timings", action="store_true",
                       help="leave wall-time columns empty so reruns are byte-identical")

    s = sub.add_parser("query", help="top-k search for each query trajectory")
    query_inputs(s)
    s.add_argument("-o", "--out", help="result CSV (default stdout)")
    _add_config_flags(s)
    s.set_defaults(func=cmd_query)

    for name, func, helptext in (("eval", cmd_eval, "score the search against exhaustive ground truth"),
                                 ("sweep", cmd_sweep, "neighbour-count, k and size sweeps")):
        s = sub.add_parser(name, help=helptext)
        query_inputs(s)
        s.add_argument("--report-dir", help="directory for metrics.csv, sweep_*.csv and fig*.dat")
        s.add_argument("--cap", type=int, default=DEFAULT_GROUND_TRUTH_CAP,
                       help="largest N for which exhaustive ground truth is computed")
        s.add_argument("--force", action="store_true", help="allow N above --cap")
        if name == "sweep":
            s.add_argument("--xi-values", type=_int_list, default=[2, 5, 10, 20])
            s.add_argument("--k-values", type=_int_list, default=[10, 20, 50])
            s.add_argument("--n-values", type=_int_list, default=[])
        _add_config_flags(s)
        s.set_defaults(func=func)

    s = sub.add_parser("synth", help="write a synthetic corpus and queries")
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--queries", type=int, default=100)
    s.add_argument("--len-range", type=int, nargs=2, default=list(DATA_LEN))
    s.add_argument("--query-len-range", type=int, nargs=2, default=list(QUERY_LEN))
    s.add_argument("--embed-rate", type=float, default=0.8)
    s.add_argument("--noise", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--data-out", required=True)
    s.add_argument("--queries-out", required=True)
    s.add_argument("--hints-out")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error already reported
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, GuardError) as exc:
        print(f"trajgraph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, IndexFormatError, StoreMismatchError, OSError) as exc:
        print(f"trajgraph: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"trajgraph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001  (StateError, AssertionError, ...)
        print(f"trajgraph: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
