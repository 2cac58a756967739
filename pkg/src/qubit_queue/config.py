"""Experiment configuration: a strict TOML schema mapped onto dataclasses.

Unknown keys are errors.  Every field has a documented default except the
master seed, which must always be given.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass
from dataclasses import field as _field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .distributions import BATCH_FAMILIES, POSITIVE_FAMILIES, BatchLaw, Law
from .engine import ClassParams
from .errors import ParseError, QubitQueueError, ValidationError
from .fields import LimitPoint, RateField, SpherePoint

MODES = ("fixed-n", "varying-n", "algebra-check", "skorohod-check")
PATH_LAYOUTS = ("combined", "per-rep")


@dataclass
class ClassConfig:
    inter_arrival: str = "exponential"
    inter_arrival_scv: float | None = None
    batch: str = "deterministic"
    batch_mean: float = 1.0
    mu: float = 1.0
    packet: str = "exponential"
    packet_scv: float | None = None

    def build(self, j: int) -> ClassParams:
        # arrival and service rates are filled in per ladder entry
        return ClassParams(
            j=j,
            arrival_rate=0.0,
            inter_arrival=Law(self.inter_arrival, self.inter_arrival_scv),
            batch=BatchLaw(self.batch, self.batch_mean),
            mu=self.mu,
            packet=Law(self.packet, self.packet_scv),
        )


@dataclass
class FieldConfig:
    family: str = "constant"
    lam: list = _field(default_factory=lambda: [1.0])
    coef: list = _field(default_factory=list)


@dataclass
class RegimeConfig:
    theta: float = -1.0
    theta_k: list | None = None
    r_ladder: list = _field(default_factory=lambda: [16, 64, 256])
    n: int = 1
    K: int = 3
    rho0: float = 0.2
    center: list | None = None
    n_ladder: list = _field(default_factory=lambda: [1, 2, 3, 4])
    limit_prefix: list = _field(default_factory=lambda: [0.7, 0.9])
    limit_tail: float = math.pi / 4


@dataclass
class ExperimentConfig:
    mode: str
    seed: int
    reps: int = 2000
    oracle_reps: int | None = None
    t_star: float = 1.0
    output_dir: str = "results"
    paths: bool = False
    paths_layout: str = "combined"
    paths_max_reps: int = 1
    regime: RegimeConfig = _field(default_factory=RegimeConfig)
    field: FieldConfig = _field(default_factory=FieldConfig)
    classes: list = _field(default_factory=lambda: [ClassConfig()])

    def class_params(self) -> list[ClassParams]:
        return [c.build(j + 1) for j, c in enumerate(self.classes)]

    def rate_field(self) -> RateField:
        alpha2 = [Law(c.inter_arrival, c.inter_arrival_scv).scv for c in self.classes]
        return RateField(self.field.family, tuple(self.field.lam), tuple(alpha2), tuple(map(tuple, self.field.coef)))

    def center(self) -> SpherePoint:
        if self.regime.center is None:
            return SpherePoint.uniform_center(self.regime.n)
        return SpherePoint(self.regime.n, self.regime.center)

    def limit_point(self) -> LimitPoint:
        return LimitPoint(tuple(self.regime.limit_prefix), self.regime.limit_tail)

    def to_dict(self) -> dict:
        return asdict(self)


# schema: key -> value kind
_TOP = {
    "mode": "str", "seed": "int", "reps": "int", "oracle_reps": "int", "t_star": "float",
    "output_dir": "str", "paths": "bool", "paths_layout": "str", "paths_max_reps": "int",
    "regime": "table", "field": "table", "classes": "tables",
}
_REGIME = {
    "theta": "float", "theta_k": "floats", "r_ladder": "floats", "n": "int", "K": "int",
    "rho0": "float", "center": "floats", "n_ladder": "ints", "limit_prefix": "floats",
    "limit_tail": "float",
}
_FIELD = {"family": "str", "lam": "floats", "coef": "matrix"}
_CLASS = {
    "inter_arrival": "str", "inter_arrival_scv": "float", "batch": "str", "batch_mean": "float",
    "mu": "float", "packet": "str", "packet_scv": "float",
}


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(key: str, kind: str, value):
    if kind == "str":
        if not isinstance(value, str):
            raise ValidationError(key, "expected a string")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ValidationError(key, "expected true or false")
        return value
    if kind == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValidationError(key, "expected an integer")
        return value
    if kind == "float":
        if not _is_num(value) or not math.isfinite(value):
            raise ValidationError(key, "expected a finite number")
        return float(value)
    if kind in ("floats", "ints"):
        if not isinstance(value, list):
            raise ValidationError(key, "expected a list")
        want_int = kind == "ints"
        for v in value:
            ok = isinstance(v, int) and not isinstance(v, bool) if want_int else _is_num(v) and math.isfinite(v)
            if not ok:
                raise ValidationError(key, "expected a list of " + ("integers" if want_int else "numbers"))
        return [int(v) if want_int else float(v) for v in value]
    if kind == "matrix":
        if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
            raise ValidationError(key, "expected a list of lists")
        return [_coerce(key, "floats", row) for row in value]
    raise AssertionError(kind)


def _take(table: dict, schema: dict, prefix: str) -> dict:
    out = {}
    for key, value in table.items():
        name = f"{prefix}{key}"
        if key not in schema:
            raise ValidationError(name, "unknown key")
        kind = schema[key]
        if kind in ("table", "tables"):
            continue
        out[key] = _coerce(name, kind, value)
    return out


def _line_of(err: Exception) -> int | None:
    line = getattr(err, "lineno", None)
    if line is None:
        match = re.search(r"line (\d+)", str(err))
        line = int(match.group(1)) if match else None
    return line


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        msg = getattr(err, "msg", None) or str(err).split(" (at")[0]
        raise ParseError(f"invalid TOML: {msg}", line=_line_of(err)) from None

    top = _take(raw, _TOP, "")
    for req in ("mode", "seed"):
        if req not in top:
            raise ValidationError(req, "required key is missing")

    regime_raw = raw.get("regime", {})
    field_raw = raw.get("field", {})
    classes_raw = raw.get("classes", [{}])
    if not isinstance(regime_raw, dict):
        raise ValidationError("regime", "expected a table")
    if not isinstance(field_raw, dict):
        raise ValidationError("field", "expected a table")
    if not isinstance(classes_raw, list) or not all(isinstance(c, dict) for c in classes_raw):
        raise ValidationError("classes", "expected an array of tables")

    cfg = ExperimentConfig(
        **top,
        regime=RegimeConfig(**_take(regime_raw, _REGIME, "regime.")),
        field=FieldConfig(**_take(field_raw, _FIELD, "field.")),
        classes=[ClassConfig(**_take(c, _CLASS, f"classes[{i}].")) for i, c in enumerate(classes_raw)],
    )
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ParseError(f"cannot read {path}: {err.strerror}") from None
    return parse_config(text)


def _increasing(key, values, minimum=None):
    if len(values) < 1:
        raise ValidationError(key, "must not be empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValidationError(key, "must be strictly increasing")
    if minimum is not None and values[0] < minimum:
        raise ValidationError(key, f"entries must be >= {minimum}")


def validate(cfg: ExperimentConfig) -> None:
    """Bounds and cross-field checks; raises :class:`ValidationError` naming the key."""
    if cfg.mode not in MODES:
        raise ValidationError("mode", f"expected one of {MODES}")
    if not 0 <= cfg.seed < 2**64:
        raise ValidationError("seed", "must lie in [0, 2**64)")
    if cfg.reps < 1:
        raise ValidationError("reps", "must be >= 1")
    if cfg.oracle_reps is not None and cfg.oracle_reps < 1:
        raise ValidationError("oracle_reps", "must be >= 1")
    if not cfg.t_star > 0:
        raise ValidationError("t_star", "must be > 0")
    if cfg.paths_layout not in PATH_LAYOUTS:
        raise ValidationError("paths_layout", f"expected one of {PATH_LAYOUTS}")
    if cfg.paths_max_reps < 1:
        raise ValidationError("paths_max_reps", "must be >= 1")
    if cfg.mode in ("algebra-check", "skorohod-check"):
        return

    reg = cfg.regime
    _increasing("regime.r_ladder", reg.r_ladder, minimum=1)
    if reg.theta_k is not None:
        count = reg.K if cfg.mode == "fixed-n" else len(reg.n_ladder)
        if len(reg.theta_k) != count:
            raise ValidationError("regime.theta_k", f"expected {count} values")
    if not 0 < reg.rho0 <= math.pi / 4:
        raise ValidationError("regime.rho0", "must lie in (0, pi/4]")
    if cfg.mode == "fixed-n":
        if not 1 <= reg.n <= 10:
            raise ValidationError("regime.n", "must lie in [1, 10]")
        if reg.K < 1:
            raise ValidationError("regime.K", "must be >= 1")
        if reg.center is not None and len(reg.center) != 2**reg.n:
            raise ValidationError("regime.center", f"expected {2**reg.n} angles")
    else:
        _increasing("regime.n_ladder", reg.n_ladder, minimum=1)
        if reg.n_ladder[-1] > 10:
            raise ValidationError("regime.n_ladder", "levels above 10 are not supported")
        if not all(0 < a < math.pi / 2 for a in reg.limit_prefix + [reg.limit_tail]):
            raise ValidationError("regime.limit_prefix", "limit angles must lie in (0, pi/2)")

    if len(cfg.classes) < 1:
        raise ValidationError("classes", "need at least one class")
    for i, c in enumerate(cfg.classes):
        key = f"classes[{i}]"
        if c.inter_arrival not in POSITIVE_FAMILIES:
            raise ValidationError(f"{key}.inter_arrival", f"expected one of {POSITIVE_FAMILIES}")
        if c.packet not in POSITIVE_FAMILIES:
            raise ValidationError(f"{key}.packet", f"expected one of {POSITIVE_FAMILIES}")
        if c.batch not in BATCH_FAMILIES:
            raise ValidationError(f"{key}.batch", f"expected one of {BATCH_FAMILIES}")
        if not c.mu > 0:
            raise ValidationError(f"{key}.mu", "must be > 0")
        for name, build in (
            ("inter_arrival_scv", lambda: Law(c.inter_arrival, c.inter_arrival_scv)),
            ("packet_scv", lambda: Law(c.packet, c.packet_scv)),
            ("batch_mean", lambda: BatchLaw(c.batch, c.batch_mean)),
        ):
            try:
                build()
            except QubitQueueError as err:
                raise ValidationError(f"{key}.{name}", str(err)) from None

    fld = cfg.field
    if fld.family not in ("constant", "affine-in-angles"):
        raise ValidationError("field.family", "expected 'constant' or 'affine-in-angles'")
    if len(fld.lam) != len(cfg.classes):
        raise ValidationError("field.lam", f"expected one rate per class ({len(cfg.classes)})")
    if any(v < 0 for v in fld.lam):
        raise ValidationError("field.lam", "rates must be >= 0")
    if fld.family == "affine-in-angles":
        if len(fld.coef) != len(cfg.classes):
            raise ValidationError("field.coef", "expected one coefficient row per class")
        levels = [reg.n] if cfg.mode == "fixed-n" else reg.n_ladder
        if any(len(row) > 2 ** min(levels) for row in fld.coef):
            raise ValidationError("field.coef", "field reads more angles than the smallest level has")
    elif fld.coef:
        raise ValidationError("field.coef", "only used by the affine-in-angles family")


def demo_config(mode: str, seed: int = 20240611) -> ExperimentConfig:
    """The acceptance-scale demos: single class, geometric batches (m=2), theta=-1."""
    cls = [ClassConfig(inter_arrival="exponential", batch="geometric", batch_mean=2.0,
                       mu=1.0, packet="exponential")]
    if mode == "fixed-n":
        cfg = ExperimentConfig(
            mode="fixed-n", seed=seed, output_dir="results/fixed-n",
            regime=RegimeConfig(theta=-1.0, r_ladder=[16, 64, 256], n=1, K=3, rho0=0.2),
            field=FieldConfig(family="constant", lam=[1.0]),
            classes=cls,
        )
    elif mode == "varying-n":
        cfg = ExperimentConfig(
            mode="varying-n", seed=seed, output_dir="results/varying-n",
            regime=RegimeConfig(theta=-1.0, r_ladder=[16, 64, 256], n_ladder=[1, 2, 3, 4],
                                rho0=math.pi / 8, limit_prefix=[0.7, 0.9], limit_tail=math.pi / 4),
            field=FieldConfig(family="affine-in-angles", lam=[0.5], coef=[[0.25, 0.25]]),
            classes=cls,
        )
    else:
        raise ValueError(f"no demo for mode {mode!r}")
    validate(cfg)
    return cfg
