"""JSON documents for systems, trajectories and run reports."""
import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .exceptions import DocumentError
from .system import Dlcs, InhomogeneousDlcs, Lcs

SYSTEM_SCHEMA = "copostab.system/1"
REPORT_SCHEMA = "copostab.report/1"
TRAJECTORY_SCHEMA = "copostab.trajectory/1"

_KEYS = {
    "lcs": ("A_tilde", "C_tilde", "D_tilde", "F_tilde"),
    "dlcs": ("A", "C", "D", "F"),
    "inhomogeneous_dlcs": ("A", "C", "D", "F"),
}


def _rows(m):
    return [[float(v) for v in row] for row in np.asarray(m, dtype=float)]


def dumps(obj):
    """Canonical JSON text: sorted keys, two-space indent, trailing newline.

    Floats use the shortest repr that parses back to the same double.
    """
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def content_hash(obj):
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class SystemDocument:
    name: str
    kind: str
    n_x: int
    n_c: int
    matrices: dict
    g: list = None
    h: list = None

    @classmethod
    def from_system(cls, sys, name=None):
        if isinstance(sys, Lcs):
            kind, mats = "lcs", (sys.a_tilde, sys.c_tilde, sys.d_tilde, sys.f_tilde)
            g = h = None
        elif isinstance(sys, InhomogeneousDlcs):
            b = sys.base
            kind, mats = "inhomogeneous_dlcs", (b.a, b.c, b.d, b.f)
            g, h = [float(v) for v in sys.g], [float(v) for v in sys.h]
            sys = b
        elif isinstance(sys, Dlcs):
            kind, mats = "dlcs", (sys.a, sys.c, sys.d, sys.f)
            g = h = None
        else:
            raise DocumentError(f"cannot serialize {type(sys).__name__}")
        return cls(
            name if name is not None else sys.name,
            kind,
            sys.n_x,
            sys.n_c,
            {k: _rows(m) for k, m in zip(_KEYS[kind], mats)},
            g,
            h,
        )

    def to_dict(self):
        out = {
            "schema": SYSTEM_SCHEMA,
            "name": self.name,
            "kind": self.kind,
            "n_x": self.n_x,
            "n_c": self.n_c,
            "matrices": self.matrices,
        }
        if self.kind == "inhomogeneous_dlcs":
            out["g"], out["h"] = self.g, self.h
        return out

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise DocumentError("system document must be a JSON object")
        if d.get("schema", SYSTEM_SCHEMA) != SYSTEM_SCHEMA:
            raise DocumentError(f"unsupported schema {d.get('schema')!r}")
        kind = d.get("kind")
        if kind not in _KEYS:
            raise DocumentError(f"kind must be one of {sorted(_KEYS)}, got {kind!r}")
        try:
            n_x, n_c = int(d["n_x"]), int(d["n_c"])
            mats = d["matrices"]
            missing = [k for k in _KEYS[kind] if k not in mats]
        except (KeyError, TypeError, ValueError) as exc:
            raise DocumentError(f"malformed system document: {exc}") from exc
        if missing:
            raise DocumentError(f"missing matrices {missing}")
        doc = cls(d.get("name", ""), kind, n_x, n_c, {k: mats[k] for k in _KEYS[kind]},
                  d.get("g"), d.get("h"))
        doc.to_system()
        return doc

    def _array(self, key, shape):
        try:
            arr = np.array(self.matrices[key], dtype=float)
        except (TypeError, ValueError) as exc:
            raise DocumentError(f"{key} is not a numeric array") from exc
        if arr.size == 0:
            arr = arr.reshape(shape)
        if arr.shape != shape:
            raise DocumentError(f"{key} has shape {arr.shape}, declared {shape}")
        if not np.all(np.isfinite(arr)):
            raise DocumentError(f"{key} has non-finite entries")
        return arr

    def to_system(self):
        nx, nc = self.n_x, self.n_c
        a, c, d, f = (
            self._array(k, s)
            for k, s in zip(_KEYS[self.kind], [(nx, nx), (nx, nc), (nc, nx), (nc, nc)])
        )
        if self.kind == "lcs":
            return Lcs(a, c, d, f, name=self.name)
        base = Dlcs(a, c, d, f, name=self.name)
        if self.kind == "dlcs":
            return base
        if self.g is None or self.h is None:
            raise DocumentError("inhomogeneous_dlcs needs g and h")
        g, h = np.array(self.g, dtype=float), np.array(self.h, dtype=float)
        if g.shape != (nx,) or h.shape != (nc,) or not np.all(np.isfinite(np.r_[g, h])):
            raise DocumentError("g/h do not match the declared dimensions")
        return InhomogeneousDlcs(base, g, h)


def load_system(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from exc
    return SystemDocument.from_dict(data)


def write_json(obj, path):
    text = dumps(obj)
    if path in (None, "-"):
        return text
    with open(path, "w") as fh:
        fh.write(text)
    return text


@dataclass
class RunReport:
    """Everything a ``check`` run produced, in plain JSON types."""

    input: dict
    input_hash: str
    mode: str
    scheme: dict
    status: str
    mu: float
    margin: float
    iterations: int
    certificate: list
    trace: list
    witnesses: dict
    validation: dict
    timings: dict
    seed: int
    events: list = field(default_factory=list)
    version: str = __version__

    def to_dict(self):
        out = asdict(self)
        out["schema"] = REPORT_SCHEMA
        return out

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != REPORT_SCHEMA:
            raise DocumentError(f"unsupported report schema {d.get('schema')!r}")
        d = {k: v for k, v in d.items() if k != "schema"}
        try:
            return cls(**d)
        except TypeError as exc:
            raise DocumentError(f"malformed report: {exc}") from exc

    def dumps(self):
        return dumps(self.to_dict())

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def _num(v):
    return None if v is None else float(v)


def report_from_verdict(doc, verdict, scheme=None, validation=None, seed=0, timings=None):
    inp = doc.to_dict()
    trace = [
        {
            "iteration": r.iteration,
            "mu": _num(r.mu),
            "nu1": _num(r.nu1),
            "nu2": _num(r.nu2),
            "added_u": r.added_u,
            "added_v": r.added_v,
        }
        for r in verdict.trace
    ]
    cert = None if verdict.certificate is None else _rows(verdict.certificate)
    return RunReport(
        input=inp,
        input_hash=content_hash(inp),
        mode=verdict.mode.value,
        scheme=scheme,
        status=verdict.status.value,
        mu=_num(verdict.mu),
        margin=_num(verdict.margin),
        iterations=verdict.iterations,
        certificate=cert,
        trace=trace,
        witnesses={
            "u": [[float(x) for x in u] for u in verdict.cuts.u_cuts],
            "v": [[float(x) for x in v] for v in verdict.cuts.v_cuts],
        },
        validation=validation,
        timings=timings or {"cutting_plane_s": verdict.elapsed},
        seed=seed,
        events=list(verdict.events),
    )


def trajectory_document(name, trajectories, dlcs, truncated=False):
    return {
        "schema": TRAJECTORY_SCHEMA,
        "system": name,
        "truncated": truncated,
        "trajectories": [
            {
                "states": [[float(v) for v in x] for x in t.states],
                "multipliers": [[float(v) for v in lam] for lam in t.multipliers],
                "patterns": [list(p) for p in t.branch_log],
                "complementarity_residual": float(t.complementarity_residual(dlcs)),
            }
            for t in trajectories
        ],
    }
