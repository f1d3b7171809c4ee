"""Top-k representative similar subtrajectory search over a two-layer
proximity graph."""

from .dtsm import DtsmResult, MatchMatrix, build_match_matrix, dtsm, dtsm_oracle, dtsm_score
from .errors import (ConfigError, DataError, GuardError, IndexChecksumError, IndexFormatError,
                     IndexTruncatedError, IndexVersionError, StateError, StoreMismatchError,
                     TrajGraphError)
from .evaluation import hr_k, r10_at_50, rr, run_benchmark, synth_corpus
from .index import (CndiGraph, GariGraph, IndexBundle, build_cndi, build_gari, build_index,
                    load_index, save_index)
from .model import (Config, Point, SubtrajRef, Trajectory, TrajectoryStore, distance,
                    load_store, read_csv, save_store, write_csv)
from .search import QueryResult, SearchRecord, climb, exhaustive_topk, query_topk
from .similarity import (Metric, RepScore, dtw, edr, erp, exact_s, register_scorer,
                         rep_similarity)

__version__ = "0.1.0"

__all__ = [
    "CndiGraph", "Config", "ConfigError", "DataError", "DtsmResult", "GariGraph", "GuardError",
    "IndexBundle", "IndexChecksumError", "IndexFormatError", "IndexTruncatedError",
    "IndexVersionError", "MatchMatrix", "Metric", "Point", "QueryResult", "RepScore",
    "SearchRecord", "StateError", "StoreMismatchError", "SubtrajRef", "Trajectory",
    "TrajectoryStore", "TrajGraphError", "build_cndi", "build_gari", "build_index",
    "build_match_matrix", "climb", "distance", "dtsm", "dtsm_oracle", "dtsm_score", "dtw", "edr",
    "erp", "exact_s", "exhaustive_topk", "hr_k", "load_index", "load_store", "query_topk",
    "r10_at_50", "read_csv", "register_scorer", "rep_similarity", "rr", "run_benchmark",
    "save_index", "save_store", "synth_corpus", "write_csv",
]
