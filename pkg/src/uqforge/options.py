"""Option files, seeds, display sinks and the matrix-text chain format.

Option files are plain ``key = value`` lines.  Keys carry a family prefix
(``env_``, ``ip_``, ``ip_mh_``, ``ip_ml_``, ``ip_ml_<n>_``, ``ip_ml_last_``,
``ip_ml_default_``, ``fp_``, ``fp_mc_``) followed by an option name.  Option
names are matched case-insensitively with underscores ignored, so
``ip_mh_rawChain_size`` and ``ip_mh_rawChainSize`` are the same key.
"""

from __future__ import annotations

import io
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InvalidArgumentError, OptionParseError, UnsupportedOptionError

log = logging.getLogger(__name__)

INT, REAL, STR, REALS, INTSET = "int", "real", "str", "real-list", "int-set"

# (name, type, default) per table.
ENV_TABLE = [
    ("numSubEnvironments", INT, 1),
    ("subDisplayFileName", STR, "."),
    ("subDisplayAllowAll", INT, 0),
    ("subDisplayAllowedSet", INTSET, frozenset()),
    ("displayVerbosity", INT, 0),
    ("syncVerbosity", INT, 0),
    ("seed", INT, 0),
]

SIP_TABLE = [
    ("computeSolution", INT, 1),
    ("dataOutputFileName", STR, "."),
    ("dataOutputAllowedSet", INTSET, frozenset()),
]

MH_TABLE = [
    ("dataOutputFileName", STR, "."),
    ("dataOutputAllowAll", INT, 0),
    ("initialPositionDataInputFileName", STR, "."),
    ("initialPositionDataInputFileType", STR, "m"),
    ("initialProposalCovMatrixDataInputFileName", STR, "."),
    ("initialProposalCovMatrixDataInputFileType", STR, "m"),
    ("rawChainDataInputFileName", STR, "."),
    ("rawChainDataInputFileType", STR, "m"),
    ("rawChainSize", INT, 100),
    ("rawChainGenerateExtra", INT, 0),
    ("rawChainDisplayPeriod", INT, 500),
    ("rawChainMeasureRunTimes", INT, 1),
    ("rawChainDataOutputPeriod", INT, 0),
    ("rawChainDataOutputFileName", STR, "."),
    ("rawChainDataOutputFileType", STR, "m"),
    ("rawChainDataOutputAllowAll", INT, 0),
    ("filteredChainGenerate", INT, 0),
    ("filteredChainDiscardedPortion", REAL, 0.0),
    ("filteredChainLag", INT, 1),
    ("filteredChainDataOutputFileName", STR, "."),
    ("filteredChainDataOutputFileType", STR, "m"),
    ("filteredChainDataOutputAllowAll", INT, 0),
    ("displayCandidates", INT, 0),
    ("putOutOfBoundsInChain", INT, 1),
    ("tkUseLocalHessian", INT, 0),
    ("tkUseNewtonComponent", INT, 1),
    ("drMaxNumExtraStages", INT, 0),
    ("drScalesForExtraStages", REALS, ()),
    ("drDuringAmNonAdaptiveInt", INT, 1),
    ("amKeepInitialMatrix", INT, 0),
    ("amInitialNonAdaptInterval", INT, 0),
    ("amAdaptInterval", INT, 0),
    ("amAdaptedMatricesDataOutputPeriod", INT, 0),
    ("amAdaptedMatricesDataOutputFileName", STR, "."),
    ("amAdaptedMatricesDataOutputFileType", STR, "m"),
    ("amAdaptedMatricesDataOutputAllowAll", INT, 0),
    ("amEta", REAL, 1.0),
    ("amEpsilon", REAL, 1e-5),
    ("enableBrooksGelmanConvMonitor", INT, 0),
    ("BrooksGelmanLag", INT, 100),
]

ML_TABLE = [
    ("restartOutput_levelPeriod", INT, 0),
    ("restartOutput_baseNameForFiles", STR, "."),
    ("restartOutput_fileType", STR, "m"),
    ("restartInput_baseNameForFiles", STR, "."),
    ("restartInput_fileType", STR, "m"),
    ("stopAtEnd", INT, 0),
    ("dataOutputFileName", STR, "."),
    ("dataOutputAllowAll", INT, 0),
    ("loadBalanceAlgorithmId", INT, 2),
    ("loadBalanceTreshold", REAL, 1.0),
    ("minEffectiveSizeRatio", REAL, 0.85),
    ("maxEffectiveSizeRatio", REAL, 0.91),
    ("scaleCovMatrix", INT, 1),
    ("minRejectionRate", REAL, 0.50),
    ("maxRejectionRate", REAL, 0.75),
    ("covRejectionRate", REAL, 0.25),
    ("minAcceptableEta", REAL, 0.0),
    ("totallyMute", INT, 1),
    ("initialPositionDataInputFileName", STR, "."),
    ("initialPositionDataInputFileType", STR, "m"),
    ("initialProposalCovMatrixDataInputFileName", STR, "."),
    ("initialProposalCovMatrixDataInputFileType", STR, "m"),
    ("rawChainDataInputFileName", STR, "."),
    ("rawChainDataInputFileType", STR, "m"),
    ("rawChainSize", INT, 100),
    ("rawChainGenerateExtra", INT, 0),
    ("rawChainDisplayPeriod", INT, 500),
    ("rawChainMeasureRunTimes", INT, 1),
    ("rawChainDataOutputPeriod", INT, 0),
    ("rawChainDataOutputFileName", STR, "."),
    ("rawChainDataOutputFileType", STR, "m"),
    ("rawChainDataOutputAllowAll", INT, 0),
    ("filteredChainGenerate", INT, 0),
    ("filteredChainDiscardedPortion", REAL, 0.0),
    ("filteredChainLag", INT, 1),
    ("filteredChainDataOutputFileName", STR, "."),
    ("filteredChainDataOutputFileType", STR, "m"),
    ("filteredChainDataOutputAllowAll", INT, 0),
    ("displayCandidates", INT, 0),
    ("putOutOfBoundsInChain", INT, 1),
    ("tkUseLocalHessian", INT, 0),
    ("tkUseNewtonComponent", INT, 1),
    ("drMaxNumExtraStages", INT, 0),
    ("drScalesForExtraStages", REALS, ()),
    ("drDuringAmNonAdaptiveInt", INT, 1),
    ("amKeepInitialMatrix", INT, 0),
    ("amInitialNonAdaptInterval", INT, 0),
    ("amAdaptInterval", INT, 0),
    ("amAdaptedMatricesDataOutputPeriod", INT, 0),
    ("amAdaptedMatricesDataOutputFileName", STR, "."),
    ("amAdaptedMatricesDataOutputFileType", STR, "m"),
    ("amAdaptedMatricesDataOutputAllowAll", INT, 0),
    ("amEta", REAL, 1.0),
    ("amEpsilon", REAL, 1e-5),
]

SFP_TABLE = [
    ("computeSolution", INT, 1),
    ("computeCovariances", INT, 1),
    ("computeCorrelations", INT, 1),
    ("dataOutputFileName", STR, "."),
    ("dataOutputAllowedSet", INTSET, frozenset()),
]

MC_TABLE = [
    ("dataOutputFileName", STR, "."),
    ("dataOutputAllowedSet", INTSET, frozenset()),
    ("pseq_dataOutputFileName", STR, "."),
    ("pseq_dataOutputAllowedSet", INTSET, frozenset()),
    ("qseq_dataInputFileName", STR, "."),
    ("qseq_size", INT, 100),
    ("qseq_displayPeriod", INT, 500),
    ("qseq_measureRunTimes", INT, 0),
    ("qseq_dataOutputFileName", STR, "."),
    ("qseq_dataOutputAllowedSet", INTSET, frozenset()),
]

# Families with fixed defaults, longest prefix first for matching.
FAMILIES = {
    "ip_mh": MH_TABLE,
    "ip_ml": ML_TABLE,
    "fp_mc": MC_TABLE,
    "env": ENV_TABLE,
    "ip": SIP_TABLE,
    "fp": SFP_TABLE,
}

# Alternative spellings seen in example input files.
ALIASES = {"drlistofscalesforextrastages": "drscalesforextrastages"}

ML_LEVEL_RE = re.compile(r"^ip_ml_(\d+|last|default)_(.+)$")

REJECTION_RATE_KEYS = ("minRejectionRate", "maxRejectionRate", "covRejectionRate")


def normalize_name(name: str) -> str:
    n = name.replace("_", "").lower()
    return ALIASES.get(n, n)


_TABLE_INDEX = {fam: {normalize_name(n): (n, t, d) for n, t, d in table} for fam, table in FAMILIES.items()}


def split_key(key: str) -> tuple[str, str] | None:
    """Split ``key`` into (family, canonical option name), or ``None`` if unknown."""
    m = ML_LEVEL_RE.match(key)
    if m:
        spec = _TABLE_INDEX["ip_ml"].get(normalize_name(m.group(2)))
        return (f"ip_ml_{m.group(1)}", spec[0]) if spec else None
    for fam in ("ip_mh", "ip_ml", "fp_mc", "env", "ip", "fp"):
        if key.startswith(fam + "_"):
            spec = _TABLE_INDEX[fam].get(normalize_name(key[len(fam) + 1:]))
            if spec:
                return fam, spec[0]
    return None


def _table_spec(family: str, name: str):
    base = "ip_ml" if family.startswith("ip_ml") else family
    return _TABLE_INDEX[base][normalize_name(name)]


def canonical_key(key: str) -> str:
    parts = split_key(key)
    if parts is None:
        raise KeyError(key)
    return f"{parts[0]}_{parts[1]}"


def _parse_value(raw: str, typ: str, key: str, line: int | None):
    text = raw.strip()
    try:
        if typ == INT:
            return int(text)
        if typ == REAL:
            v = float(text)
            if not math.isfinite(v):
                raise ValueError(text)
            return v
        if typ == STR:
            if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
                return text[1:-1]
            return text
        if typ == REALS:
            return tuple(float(t) for t in text.split())
        if typ == INTSET:
            return frozenset(int(t) for t in text.split())
    except ValueError:
        raise OptionParseError(f"{key}: cannot read {text!r} as {typ}", line) from None
    raise AssertionError(typ)


def format_value(value, typ: str) -> str:
    if typ == REAL:
        return repr(float(value))
    if typ == REALS:
        return " ".join(repr(float(v)) for v in value)
    if typ == INTSET:
        return " ".join(str(v) for v in sorted(value))
    return str(value)


@dataclass
class OptionEntry:
    key: str
    type: str
    value: object
    provenance: str  # default | file | override
    line: int | None = None


class OptionSet:
    """Typed option values with per-key provenance.

    Every key of the fixed tables is present from construction on; per-level
    multilevel keys (``ip_ml_3_...``) exist only once set.
    """

    def __init__(self):
        self.entries: dict[str, OptionEntry] = {}
        self.unknown: dict[str, str] = {}
        self.warnings: list[str] = []
        for fam, table in FAMILIES.items():
            for name, typ, default in table:
                key = f"{fam}_{name}"
                self.entries[key] = OptionEntry(key, typ, default, "default")

    # -- access ---------------------------------------------------------
    def _resolve(self, key: str) -> tuple[str, str]:
        parts = split_key(key)
        if parts is None:
            raise KeyError(f"unknown option {key!r}")
        fam, name = parts
        return f"{fam}_{name}", _table_spec(fam, name)[1]

    def __contains__(self, key):
        try:
            return self._resolve(key)[0] in self.entries
        except KeyError:
            return False

    def get(self, key: str):
        ckey, _ = self._resolve(key)
        if ckey not in self.entries:
            raise KeyError(f"option {key!r} is not set")
        return self.entries[ckey].value

    def provenance(self, key: str) -> str:
        ckey, _ = self._resolve(key)
        entry = self.entries.get(ckey)
        return "unset" if entry is None else entry.provenance

    def set(self, key: str, value, provenance: str = "override", line: int | None = None):
        ckey, typ = self._resolve(key)
        if isinstance(value, str) and typ != STR:
            value = _parse_value(value, typ, key, line)
        elif typ == INT:
            if isinstance(value, bool) or int(value) != value:
                raise OptionParseError(f"{key}: expected an integer, got {value!r}", line)
            value = int(value)
        elif typ == REAL:
            value = float(value)
        elif typ == REALS:
            value = tuple(float(v) for v in np.atleast_1d(value))
        elif typ == INTSET:
            value = frozenset(int(v) for v in value)
        self.entries[ckey] = OptionEntry(ckey, typ, value, provenance, line)

    def from_file(self, key: str) -> bool:
        return self.provenance(key) == "file"

    def level_entry(self, level: int | None, name: str, is_last: bool = False) -> OptionEntry:
        """Multilevel option ``name`` as seen by ``level`` (``None`` for the generic value).

        Lookup order: ``ip_ml_<level>_``, then ``ip_ml_last_`` on the last
        level, then ``ip_ml_default_``, then ``ip_ml_``.
        """
        candidates = [] if level is None else [f"ip_ml_{level}_{name}"]
        if is_last:
            candidates.append(f"ip_ml_last_{name}")
        candidates += [f"ip_ml_default_{name}", f"ip_ml_{name}"]
        for key in candidates:
            ckey, _ = self._resolve(key)
            if ckey in self.entries:
                return self.entries[ckey]
        raise KeyError(name)

    def level_value(self, level: int | None, name: str, is_last: bool = False):
        return self.level_entry(level, name, is_last).value

    def level_keys_set(self) -> set:
        """Levels (ints) and the labels 'last'/'default' that have explicit options."""
        out = set()
        for key in self.entries:
            m = ML_LEVEL_RE.match(key)
            if m:
                out.add(int(m.group(1)) if m.group(1).isdigit() else m.group(1))
        return out

    def items(self):
        return sorted(self.entries.items())

    def emit(self, only_non_default: bool = False) -> str:
        lines = []
        for key, e in self.items():
            if only_non_default and e.provenance == "default":
                continue
            lines.append(f"{key} = {format_value(e.value, e.type)}")
        return "\n".join(lines) + "\n"

    def values(self) -> dict:
        return {k: e.value for k, e in self.entries.items()}


def parse_options(text: str, overrides: dict | None = None) -> OptionSet:
    opts = OptionSet()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise OptionParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not re.fullmatch(r"[A-Za-z0-9_]+", key):
            raise OptionParseError(f"malformed option name {key!r}", lineno)
        if split_key(key) is None:
            opts.unknown[key] = value
            msg = f"line {lineno}: unknown option {key!r} ignored"
            opts.warnings.append(msg)
            log.warning(msg)
            continue
        opts.set(key, value, "file", lineno)
    for key, value in (overrides or {}).items():
        opts.set(key, value, "override")
    _warn_ignored(opts)
    return opts


def read_options(path, overrides: dict | None = None) -> OptionSet:
    return parse_options(Path(path).read_text(), overrides)


def _warn_ignored(opts: OptionSet):
    for key, e in opts.entries.items():
        if e.provenance != "file":
            continue
        fam, name = split_key(key)
        if fam.startswith("ip_ml") and name in REJECTION_RATE_KEYS:
            msg = f"{key} is accepted but has no effect on the multilevel sampler"
            opts.warnings.append(msg)
            log.warning(msg)
        if name == "enableBrooksGelmanConvMonitor" and e.value:
            msg = f"{key}: the Brooks-Gelman monitor is not available and is ignored"
            opts.warnings.append(msg)
            log.warning(msg)


def check_supported(opts: OptionSet, family: str):
    """Raise :class:`UnsupportedOptionError` for options a run in ``family`` cannot honor."""
    keys = [k for k in opts.entries if k.startswith(family + "_")]
    for key in keys:
        fam, name = split_key(key)
        v = opts.entries[key].value
        if name == "tkUseLocalHessian" and v:
            raise UnsupportedOptionError(f"{key} = 1: local-Hessian transition kernels are not supported")
        if name.startswith("restartInput") and name.endswith("baseNameForFiles") and v != ".":
            raise UnsupportedOptionError(f"{key}: restart input files are not supported")
        if name.startswith("restartOutput") and name.endswith("baseNameForFiles") and v != ".":
            raise UnsupportedOptionError(f"{key}: restart output files are not supported")
        if name == "putOutOfBoundsInChain" and not v:
            raise UnsupportedOptionError(f"{key} = 0 is not supported")
        if name == "drDuringAmNonAdaptiveInt" and not v:
            raise UnsupportedOptionError(f"{key} = 0 is not supported")
        if name.endswith("FileType") and v != "m":
            stem = name[: -len("Type")] + "Name"
            if opts.entries.get(f"{fam}_{stem}") is not None and opts.entries[f"{fam}_{stem}"].value != ".":
                raise UnsupportedOptionError(f"{key} = {v!r}: only the 'm' matrix-text format is supported")
        if name == "rawChainDataInputFileName" and v != ".":
            raise UnsupportedOptionError(f"{key}: reading a raw chain instead of sampling is not supported")


# ---------------------------------------------------------------------------
# Environment, seeds and sinks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvSpec:
    num_sub_environments: int = 1
    seed: int = 0
    display_file_base: str = "."
    display_allow_all: bool = False
    display_allowed_set: frozenset = frozenset()

    def __post_init__(self):
        if self.num_sub_environments < 1:
            raise InvalidArgumentError("need at least one sub-environment")

    @classmethod
    def from_options(cls, opts: OptionSet) -> "EnvSpec":
        return cls(
            opts.get("env_numSubEnvironments"),
            opts.get("env_seed"),
            opts.get("env_subDisplayFileName"),
            bool(opts.get("env_subDisplayAllowAll")),
            frozenset(opts.get("env_subDisplayAllowedSet")),
        )

    def check_workers(self, total_workers: int):
        if total_workers % self.num_sub_environments:
            raise InvalidArgumentError(
                f"{total_workers} workers is not a multiple of {self.num_sub_environments} sub-environments"
            )


def seed_for_worker(env_seed: int, rank: int, num_sub_environments: int = 1) -> int:
    """Negative seeds ``-z`` give ``rank + z``; others are shared by all ranks."""
    if rank < 0:
        raise InvalidArgumentError("rank must be non-negative")
    if env_seed < 0:
        return rank + abs(env_seed)
    if num_sub_environments > 1:
        log.warning("env_seed = %d is shared by all %d sub-environments; their chains will be identical",
                    env_seed, num_sub_environments)
    return env_seed


def sub_file_name(base: str, sub_id: int, suffix: str) -> str:
    sep = "" if base.endswith("_") else "_"
    return f"{base}{sep}sub{sub_id}{suffix}"


def unified_file_name(base: str, suffix: str = ".m") -> str:
    sep = "" if base.endswith("_") else "_"
    return f"{base}{sep}unified{suffix}"


def resolve_path(name: str, out_dir=None) -> Path:
    p = Path(name)
    return p if (out_dir is None or p.is_absolute()) else Path(out_dir) / p


def display_path(env: EnvSpec, sub_id: int, out_dir=None) -> Path | None:
    if env.display_file_base == ".":
        return None
    if not (env.display_allow_all or sub_id in env.display_allowed_set):
        return None
    return resolve_path(sub_file_name(env.display_file_base, sub_id, ".txt"), out_dir)


def open_display_file(env: EnvSpec, sub_id: int, out_dir=None):
    """Open ``<base>_sub<id>.txt`` for writing, or return ``None`` when disabled."""
    path = display_path(env, sub_id, out_dir)
    if path is None:
        return None
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="ascii")


# ---------------------------------------------------------------------------
# Matrix text format
# ---------------------------------------------------------------------------


def format_row(row) -> str:
    return " ".join("%.17g" % v for v in row)


def write_matrix_text(name: str, data, sink) -> None:
    """Write ``name = [`` / rows / ``];`` with 17 significant digits."""
    a = np.asarray(data, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InvalidArgumentError("matrix data must be 1-D or 2-D")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError("matrix data must be finite")
    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
        raise InvalidArgumentError(f"invalid variable name {name!r}")
    buf = io.StringIO()
    buf.write(f"{name} = [\n")
    for row in a:
        buf.write(format_row(row))
        buf.write("\n")
    buf.write("];\n")
    if isinstance(sink, (str, Path)):
        Path(sink).parent.mkdir(parents=True, exist_ok=True)
        Path(sink).write_text(buf.getvalue(), encoding="ascii")
    else:
        sink.write(buf.getvalue())


def read_matrix_text(text: str) -> dict:
    """Parse every ``name = [ ... ];`` block in ``text``."""
    out = {}
    for m in re.finditer(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*\[(.*?)\];", text, re.S):
        rows = [list(map(float, ln.replace(";", " ").split())) for ln in m.group(2).strip().splitlines() if ln.strip()]
        out[m.group(1)] = np.array(rows, dtype=float).reshape(len(rows), -1) if rows else np.empty((0, 0))
    return out


def read_matrix_file(path) -> np.ndarray:
    blocks = read_matrix_text(Path(path).read_text())
    if len(blocks) != 1:
        raise InvalidArgumentError(f"{path}: expected exactly one matrix, found {len(blocks)}")
    return next(iter(blocks.values()))


def write_chain_files(base: str, var_prefix: str, chains: Iterable, out_dir=None) -> list[Path]:
    """Per-worker ``<base>_sub<id>.m`` files plus ``<base>_unified.m``.

    ``chains`` holds ``(worker_id, array)`` pairs; the unified block
    concatenates them in worker order.
    """
    chains = sorted(chains, key=lambda t: t[0])
    paths = []
    for wid, arr in chains:
        p = resolve_path(sub_file_name(base, wid, ".m"), out_dir)
        write_matrix_text(f"{var_prefix}_sub{wid}", arr, p)
        paths.append(p)
    unified = np.vstack([np.atleast_2d(np.asarray(a, dtype=float).reshape(len(a), -1)) for _, a in chains])
    p = resolve_path(unified_file_name(base), out_dir)
    write_matrix_text(f"{var_prefix}_unified", unified, p)
    paths.append(p)
    return paths


def write_csv(path, header: list[str], columns) -> Path:
    """Comma-separated table with a header row, values at full precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise InvalidArgumentError("CSV columns differ in length")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(_csv_cell(c[i]) for c in cols) + "\n")
    return path


def _csv_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)
