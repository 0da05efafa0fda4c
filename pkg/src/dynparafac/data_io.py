"""Survey data ingestion and serialization of posterior output.

Input data is delimited text with a header row, one ``time`` column and
one column per variable holding integer raw codes. Empty cells and the
``NA`` token mean "missing". Rows must be grouped by wave with wave labels
increasing. A codebook maps raw codes to levels ``1..d_j`` (or to missing).

Internally levels are 0-based and missing entries hold ``-1`` with the
mask bit set.
"""

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .model import CategoricalSchema

MISSING_TOKENS = ("", "NA")
DRAWS_FORMAT = "dynparafac-draws"
DRAWS_VERSION = 1
NUM_FMT = "%.17g"


class DataValidationError(ValueError):
    pass


@dataclass
class ObservationBlock:
    """Responses from one wave: ``x`` (n_t, p) 0-based levels, ``mask`` True = missing."""

    x: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.int64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.x.ndim != 2 or self.mask.shape != self.x.shape:
            raise DataValidationError("block needs matching (n_t, p) level and mask arrays")

    @property
    def n(self):
        return self.x.shape[0]


@dataclass
class Dataset:
    schema: CategoricalSchema
    blocks: list
    times: list = field(default=None)

    def __post_init__(self):
        if self.times is None:
            self.times = list(range(1, len(self.blocks) + 1))
        if len(self.times) != len(self.blocks):
            raise DataValidationError("one time label per block required")
        for b in self.blocks:
            if b.x.shape[1] != self.schema.p:
                raise DataValidationError("block width does not match the schema")
            obs = ~b.mask
            for j, d in enumerate(self.schema.levels):
                col = b.x[obs[:, j], j]
                if col.size and (col.min() < 0 or col.max() >= d):
                    raise DataValidationError(f"variable {j} has levels outside 0..{d - 1}")

    @property
    def T(self):
        return len(self.blocks)

    @property
    def n_t(self):
        return np.array([b.n for b in self.blocks], dtype=int)

    def stacked(self):
        """All waves stacked: ``(x, mask, time_index)``."""
        p = self.schema.p
        if sum(b.n for b in self.blocks) == 0:
            return np.zeros((0, p), np.int64), np.zeros((0, p), bool), np.zeros(0, np.int64)
        x = np.concatenate([b.x for b in self.blocks])
        mask = np.concatenate([b.mask for b in self.blocks])
        tid = np.concatenate([np.full(b.n, t) for t, b in enumerate(self.blocks)])
        return x, mask, tid

    def subset(self, times):
        idx = list(times)
        return Dataset(self.schema, [self.blocks[i] for i in idx], [self.times[i] for i in idx])


@dataclass
class VariableCode:
    name: str
    levels: int
    labels: list = None
    recode: dict = None  # raw code (str) -> level 1..d or None (missing)

    def __post_init__(self):
        if self.levels < 2:
            raise DataValidationError(f"variable {self.name!r} needs >= 2 levels")
        if self.recode is None:
            self.recode = {str(i): i for i in range(1, self.levels + 1)}
        self.recode = {str(k): (None if v is None else int(v)) for k, v in self.recode.items()}
        used = sorted({v for v in self.recode.values() if v is not None})
        if any(v < 1 or v > self.levels for v in used):
            raise DataValidationError(f"recode map of {self.name!r} targets levels outside 1..{self.levels}")


@dataclass
class CodebookSpec:
    variables: list
    missing_tokens: tuple = MISSING_TOKENS

    @property
    def schema(self):
        return CategoricalSchema([v.levels for v in self.variables])

    @property
    def names(self):
        return [v.name for v in self.variables]

    @classmethod
    def identity(cls, schema, names=None):
        names = names or [f"V{j + 1}" for j in range(schema.p)]
        return cls([VariableCode(n, d) for n, d in zip(names, schema.levels)])

    @classmethod
    def from_dict(cls, d):
        variables = [VariableCode(v["name"], int(v["levels"]), v.get("labels"), v.get("recode"))
                     for v in d["variables"]]
        return cls(variables, tuple(d.get("missing_tokens", MISSING_TOKENS)))

    def to_dict(self):
        return {
            "missing_tokens": list(self.missing_tokens),
            "variables": [{"name": v.name, "levels": v.levels, "labels": v.labels,
                           "recode": v.recode} for v in self.variables],
        }


def load_codebook(path):
    with open(path) as fh:
        return CodebookSpec.from_dict(json.load(fh))


def save_codebook(codebook, path):
    with open(path, "w") as fh:
        json.dump(codebook.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _time_key(label):
    try:
        return float(label)
    except ValueError:
        return label


def load_dataset(path, codebook):
    """Read a wave-grouped CSV into a :class:`Dataset`.

    Variables named in the codebook but absent from the header are
    treated as unmeasured in every wave; a column that is empty for a
    whole wave becomes an all-masked column for that wave.
    """
    schema = codebook.schema
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if "time" not in header:
            raise DataValidationError(f"{path}: missing required 'time' column")
        tcol = header.index("time")
        cols = [header.index(v.name) if v.name in header else None for v in codebook.variables]
        waves = []  # list of (label, rows)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataValidationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            label = row[tcol].strip()
            if not waves or waves[-1][0] != label:
                if any(w[0] == label for w in waves):
                    raise DataValidationError(f"{path}:{lineno}: time label {label!r} repeats out of order")
                if waves and not _time_key(label) > _time_key(waves[-1][0]):
                    raise DataValidationError(f"{path}:{lineno}: time labels must increase ({label!r} after {waves[-1][0]!r})")
                waves.append((label, []))
            levels = []
            for var, c in zip(codebook.variables, cols):
                raw = "" if c is None else row[c].strip()
                if raw in codebook.missing_tokens:
                    levels.append(-1)
                    continue
                key = raw
                if key not in var.recode:
                    try:
                        key = str(int(float(raw)))
                    except ValueError:
                        pass
                if key not in var.recode:
                    raise DataValidationError(
                        f"{path}:{lineno}: unknown code {raw!r} in column {var.name!r}")
                lev = var.recode[key]
                levels.append(-1 if lev is None else lev - 1)
            waves[-1][1].append(levels)
    blocks = []
    for _, rows in waves:
        x = np.array(rows, dtype=np.int64).reshape(len(rows), schema.p)
        blocks.append(ObservationBlock(x, x < 0))
    times = [w[0] for w in waves]
    return Dataset(schema, blocks, times)


def write_dataset(dataset, path, codebook=None):
    """Write a dataset with raw codes ``level + 1`` (identity codebook)."""
    codebook = codebook or CodebookSpec.identity(dataset.schema)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time"] + codebook.names)
        for label, b in zip(dataset.times, dataset.blocks):
            for xi, mi in zip(b.x, b.mask):
                w.writerow([label] + ["NA" if m else str(int(v) + 1) for v, m in zip(xi, mi)])


# --- posterior draws ------------------------------------------------------

def _fmt(v):
    return NUM_FMT % v


def write_draws(draws, path):
    """Serialize :class:`PosteriorDraws` as a long-format table.

    Line 1 is a schema header; the final line is an end marker carrying
    the row count so truncated files are detected on read.
    """
    meta = {"format": DRAWS_FORMAT, "version": DRAWS_VERSION, "kind": draws.kind,
            "levels": list(draws.schema.levels), "T": draws.T, "link": draws.link,
            "dirichlet": [list(map(float, a)) for a in draws.dirichlet]}
    lines = ["# " + json.dumps(meta, sort_keys=True), "chain,draw,field,t,h,j,l,value"]
    for i in range(draws.n_draws):
        c = int(draws.chain[i])
        pre = f"{c},{i},"
        if draws.kind == "dynamic":
            for name in ("mu", "phi", "sigma2_eps", "sigma2_eta"):
                lines.append(f"{pre}{name},,,,,{_fmt(getattr(draws, name)[i])}")
        w = draws.weights[i]
        for t in range(w.shape[0]):
            lines.append(f"{pre}remainder,{t},,,,{_fmt(draws.remainder[i][t])}")
            for h in range(w.shape[1]):
                lines.append(f"{pre}weight,{t},{h},,,{_fmt(w[t, h])}")
        if draws.alpha is not None:
            a = draws.alpha[i]
            for t in range(a.shape[0]):
                for h in range(a.shape[1]):
                    lines.append(f"{pre}alpha,{t},{h},,,{_fmt(a[t, h])}")
        for j, at in enumerate(draws.atoms[i]):
            for h in range(at.shape[0]):
                for l in range(at.shape[1]):
                    lines.append(f"{pre}atom,,{h},{j},{l},{_fmt(at[h, l])}")
    lines.append(f"# end rows={len(lines) - 2}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_draws(path):
    from .draws import PosteriorDraws

    with open(path) as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 3 or not lines[0].startswith("# "):
        raise DataValidationError(f"{path}: not a draws file")
    try:
        meta = json.loads(lines[0][2:])
    except json.JSONDecodeError:
        raise DataValidationError(f"{path}: corrupt header") from None
    if meta.get("format") != DRAWS_FORMAT:
        raise DataValidationError(f"{path}: not a draws file")
    if meta.get("version") != DRAWS_VERSION:
        raise DataValidationError(f"{path}: draws format version {meta.get('version')} != {DRAWS_VERSION}")
    end = lines[-1]
    if not end.startswith("# end rows="):
        raise DataValidationError(f"{path}: truncated draws file (no end marker)")
    rows = lines[2:-1]
    if int(end.split("=", 1)[1]) != len(rows):
        raise DataValidationError(f"{path}: truncated draws file (row count mismatch)")

    schema = CategoricalSchema(meta["levels"])
    T = int(meta["T"])
    recs = {}
    for r in rows:
        chain, draw, name, t, h, j, l, value = r.split(",")
        d = recs.setdefault(int(draw), {"chain": int(chain), "scalars": {}, "rem": {},
                                        "w": [], "a": [], "atom": []})
        v = float(value)
        if name == "weight":
            d["w"].append((int(t), int(h), v))
        elif name == "remainder":
            d["rem"][int(t)] = v
        elif name == "alpha":
            d["a"].append((int(t), int(h), v))
        elif name == "atom":
            d["atom"].append((int(h), int(j), int(l), v))
        else:
            d["scalars"][name] = v
    order = sorted(recs)
    if order != list(range(len(order))):
        raise DataValidationError(f"{path}: draw indices are not contiguous")
    weights, remainder, alpha, atoms, chain = [], [], [], [], []
    scal = {k: [] for k in ("mu", "phi", "sigma2_eps", "sigma2_eta")}
    dynamic = meta["kind"] == "dynamic"
    for i in order:
        d = recs[i]
        k = 1 + max((h for _, h, _ in d["w"]), default=-1)
        w = np.zeros((T, k))
        for t, h, v in d["w"]:
            w[t, h] = v
        weights.append(w)
        remainder.append(np.array([d["rem"][t] for t in range(T)]))
        if d["a"]:
            a = np.zeros((T, k))
            for t, h, v in d["a"]:
                a[t, h] = v
            alpha.append(a)
        at = [np.zeros((k, dj)) for dj in schema.levels]
        for h, j, l, v in d["atom"]:
            at[j][h, l] = v
        atoms.append(at)
        chain.append(d["chain"])
        if dynamic:
            for name in scal:
                scal[name].append(d["scalars"][name])
    kwargs = {name: np.array(vals) for name, vals in scal.items()} if dynamic else {}
    return PosteriorDraws(
        schema=schema, kind=meta["kind"], weights=weights, remainder=remainder,
        atoms=atoms, alpha=alpha if alpha else None, chain=np.array(chain, dtype=int),
        link=meta.get("link", "probit"), dirichlet=[np.array(a) for a in meta["dirichlet"]],
        **kwargs)


def write_rho_summary(draws, path, pairs=None, time_labels=None):
    """Posterior mean and 95% interval of the dependence measure per (t, j, j').

    Pairs are written once with ``j < j'``; indices in the file are 1-based.
    Returns the summary rows.
    """
    pairs = draws.schema.pairs() if pairs is None else sorted({tuple(sorted(p)) for p in pairs})
    rho = draws.rho(pairs)  # (n_draws, T, n_pairs)
    mean = rho.mean(axis=0)
    lo, hi = np.quantile(rho, [0.025, 0.975], axis=0, method="linear")
    labels = time_labels or list(range(1, draws.T + 1))
    rows = []
    for t in range(draws.T):
        for col, (j, j2) in enumerate(pairs):
            rows.append((labels[t], j + 1, j2 + 1, mean[t, col], lo[t, col], hi[t, col]))
    with open(path, "w") as fh:
        fh.write("t,j,j2,mean,q025,q975\n")
        for r in rows:
            fh.write(f"{r[0]},{r[1]},{r[2]},{_fmt(r[3])},{_fmt(r[4])},{_fmt(r[5])}\n")
    return rows


def read_rho_table(path):
    """Read a rho table (summary or truth) into ``{(t, j, j2): value}`` using its mean/rho column."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        col = "mean" if "mean" in reader.fieldnames else "rho"
        for r in reader:
            out[(r["t"], int(r["j"]), int(r["j2"]))] = float(r[col])
    return out


def write_rho_truth(rho, pairs, path, time_labels=None):
    labels = time_labels or list(range(1, rho.shape[0] + 1))
    with open(path, "w") as fh:
        fh.write("t,j,j2,rho\n")
        for t in range(rho.shape[0]):
            for col, (j, j2) in enumerate(pairs):
                fh.write(f"{labels[t]},{j + 1},{j2 + 1},{_fmt(rho[t, col])}\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
