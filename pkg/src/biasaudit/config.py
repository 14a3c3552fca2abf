"""Line-based ``section.key = value`` configuration.

``#`` starts a comment. Unknown keys are errors, missing keys take the
defaults below. Lists are comma separated. Relative paths are resolved
against the directory of the config file.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Optional

from .dataset import GroupSelector
from .errors import ConfigTypeError, ParseError, UnknownKey, ValidationError
from .imgproc import AugmentConfig
from .lime import LimeParams
from .nn import ConvSpec, NetConfig, TrainConfig

DEFAULT_PLAN = ("B-B", "B-F", "B-M", "F-F", "F-M", "M-M", "M-F")


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    seed: int = 0
    stratify: bool = True     # split each group separately so both reach the test side


@dataclass(frozen=True)
class SynthConfig:
    subjects_per_group: int = 12
    images_per_emotion: int = 4
    size: int = 48
    seed: int = 0
    noise_std: float = 5.0
    max_roll_deg: float = 6.0


@dataclass(frozen=True)
class AuditConfig:
    manifest: Optional[str] = None
    output_dir: Optional[str] = None
    split: SplitConfig = field(default_factory=SplitConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    net: NetConfig = field(default_factory=NetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    lime: LimeParams = field(default_factory=LimeParams)
    synth: SynthConfig = field(default_factory=SynthConfig)
    plan: tuple[str, ...] = DEFAULT_PLAN
    explain_misclassified: bool = True
    max_explanations_per_cell: int = 2

    def validate(self, need_paths=("manifest", "output_dir")) -> None:
        for name in need_paths:
            if getattr(self, name) is None:
                raise ValidationError(f"audit.{name} is required (config or command line)")
        if "manifest" in need_paths and not os.path.isfile(self.manifest):
            raise ValidationError(f"manifest not found: {self.manifest}")
        self.net.validate()


# -- value parsers ---------------------------------------------------------

def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _bool(v):
    low = v.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v):
    return tuple(float(x) for x in v.split(",") if x.strip())


def _ints(v):
    return tuple(int(x) for x in v.split(",") if x.strip())


def _strs(v):
    return tuple(x.strip() for x in v.split(",") if x.strip())


def _path(v):
    return v


def _fudge(v):
    return "mean" if v.strip().lower() == "mean" else int(v)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _positive(name):
    def check(v):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    return check


def _non_negative(name):
    def check(v):
        if v < 0:
            raise ValueError(f"{name} must be non-negative")
    return check


def _fraction(v):
    if not 0 < v < 1:
        raise ValueError("train_fraction must be in (0, 1)")


def _all_positive(name):
    def check(vs):
        if not vs or any(not x > 0 for x in vs):
            raise ValueError(f"{name} must be a non-empty list of positive numbers")
    return check


@dataclass(frozen=True)
class Key:
    parse: Callable
    check: Optional[Callable] = None


SCHEMA: dict[str, Key] = {
    "audit.manifest": Key(_path),
    "audit.output_dir": Key(_path),
    "audit.explain_misclassified": Key(_bool),
    "audit.max_explanations_per_cell": Key(_int, _non_negative("max_explanations_per_cell")),
    "audit.plan": Key(_strs),
    "split.train_fraction": Key(_float, _fraction),
    "split.seed": Key(_int, _non_negative("split.seed")),
    "split.stratify": Key(_bool),
    "augment.gamma_values": Key(_floats, _all_positive("gamma_values")),
    "augment.translate_px": Key(_int, _non_negative("translate_px")),
    "augment.include_translation": Key(_bool),
    "augment.include_flip": Key(_bool),
    "net.input_size": Key(_int, _positive("input_size")),
    "net.conv_channels": Key(_ints, _all_positive("conv_channels")),
    "net.kernel_sizes": Key(_ints, _all_positive("kernel_sizes")),
    "net.strides": Key(_ints, _all_positive("strides")),
    "net.pool_after": Key(_ints),
    "net.fc1_units": Key(_int, _positive("fc1_units")),
    "net.dropout_rate": Key(_float),
    "train.learning_rate": Key(_float, _positive("learning_rate")),
    "train.epochs": Key(_int, _positive("epochs")),
    "train.batch_size": Key(_int, _positive("batch_size")),
    "train.seed": Key(_int, _non_negative("train.seed")),
    "train.shuffle": Key(_bool),
    "lime.num_samples": Key(_int, _positive("num_samples")),
    "lime.kernel_width": Key(_float, _positive("kernel_width")),
    "lime.ridge_lambda": Key(_float, _non_negative("ridge_lambda")),
    "lime.top_k": Key(_int, _positive("top_k")),
    "lime.seed": Key(_int, _non_negative("lime.seed")),
    "lime.num_segments": Key(_int, _positive("num_segments")),
    "lime.compactness": Key(_float, _positive("compactness")),
    "lime.iterations": Key(_int, _positive("iterations")),
    "lime.fudge": Key(_fudge),
    "synth.subjects_per_group": Key(_int, _positive("subjects_per_group")),
    "synth.images_per_emotion": Key(_int, _positive("images_per_emotion")),
    "synth.size": Key(_int, _positive("size")),
    "synth.seed": Key(_int, _non_negative("synth.seed")),
    "synth.noise_std": Key(_float, _non_negative("noise_std")),
    "synth.max_roll_deg": Key(_float, _non_negative("max_roll_deg")),
}


def parse_config_text(text: str, base_dir: str = ".") -> AuditConfig:
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(line_no, f"expected 'section.key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if "." not in key:
            raise ParseError(line_no, f"key {key!r} lacks a section")
        if key not in SCHEMA:
            raise UnknownKey(f"line {line_no}: unknown key {key!r}")
        spec = SCHEMA[key]
        try:
            parsed = spec.parse(value)
            if spec.check:
                spec.check(parsed)
        except ValueError as exc:
            raise ConfigTypeError(f"line {line_no}: {key}: {exc}") from None
        values[key] = parsed
    return build_config(values, base_dir)


def _resolve(path, base_dir):
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def build_config(values: dict, base_dir: str = ".") -> AuditConfig:
    """Assemble an AuditConfig from flat ``section.key`` values over the defaults."""
    def section(prefix):
        return {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith(prefix + ".")}

    d = AuditConfig()
    try:
        net_vals = section("net")
        net = d.net
        if {"conv_channels", "kernel_sizes", "strides"} & net_vals.keys():
            chans = net_vals.get("conv_channels", tuple(c.out_channels for c in net.conv_specs))
            n = len(chans)
            kernels = net_vals.get("kernel_sizes", (3,) * n)
            strides = net_vals.get("strides", (1,) * n)
            if len(kernels) == 1:
                kernels = kernels * n
            if len(strides) == 1:
                strides = strides * n
            if not len(chans) == len(kernels) == len(strides):
                raise ValueError("conv_channels, kernel_sizes and strides differ in length")
            net = replace(net, conv_specs=tuple(ConvSpec(*t) for t in zip(chans, kernels, strides)))
        if "pool_after" in net_vals:
            net = replace(net, pool_after=tuple(i - 1 for i in net_vals["pool_after"]))
        for k in ("input_size", "fc1_units", "dropout_rate"):
            if k in net_vals:
                net = replace(net, **{k: net_vals[k]})
        net.validate()

        audit = section("audit")
        plan = audit.get("plan", d.plan)
        for cell in plan:
            parse_cell(cell)
        return AuditConfig(
            manifest=_resolve(audit.get("manifest"), base_dir),
            output_dir=_resolve(audit.get("output_dir"), base_dir),
            split=replace(d.split, **section("split")),
            augment=replace(d.augment, **section("augment")),
            net=net,
            train=replace(d.train, **section("train")),
            lime=replace(d.lime, **section("lime")),
            synth=replace(d.synth, **section("synth")),
            plan=tuple(plan),
            explain_misclassified=audit.get("explain_misclassified", d.explain_misclassified),
            max_explanations_per_cell=audit.get("max_explanations_per_cell", d.max_explanations_per_cell),
        )
    except ValidationError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigTypeError(str(exc)) from None


def load_config(path) -> AuditConfig:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ValidationError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config_text(text, os.path.dirname(os.path.abspath(path)))


def flatten(cfg: AuditConfig, include_paths: bool = True) -> dict[str, object]:
    """Every schema key with its resolved value."""
    net = cfg.net
    out = {
        "audit.explain_misclassified": cfg.explain_misclassified,
        "audit.max_explanations_per_cell": cfg.max_explanations_per_cell,
        "audit.plan": cfg.plan,
        "net.input_size": net.input_size,
        "net.conv_channels": tuple(c.out_channels for c in net.conv_specs),
        "net.kernel_sizes": tuple(c.kernel for c in net.conv_specs),
        "net.strides": tuple(c.stride for c in net.conv_specs),
        "net.pool_after": tuple(i + 1 for i in net.pool_after),
        "net.fc1_units": net.fc1_units,
        "net.dropout_rate": net.dropout_rate,
    }
    if include_paths:
        out["audit.manifest"] = cfg.manifest
        out["audit.output_dir"] = cfg.output_dir
    for name in ("split", "augment", "train", "lime", "synth"):
        obj = getattr(cfg, name)
        for f in fields(obj):
            key = f"{name}.{f.name}"
            if key in SCHEMA:
                out[key] = getattr(obj, f.name)
    return dict(sorted(out.items()))


def dump_config(cfg: AuditConfig, include_paths: bool = True) -> str:
    lines = ["# resolved configuration (defaults included)"]
    for key, value in flatten(cfg, include_paths).items():
        if value is None:
            lines.append(f"# {key} = (unset)")
        else:
            lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def parse_cell(cell: str) -> tuple[GroupSelector, GroupSelector]:
    try:
        train, test = cell.split("-")
        return GroupSelector.parse(train), GroupSelector.parse(test)
    except ValueError:
        raise ValidationError(f"bad plan cell {cell!r}; expected e.g. 'B-F'") from None
