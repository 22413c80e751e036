import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config import settings
from prune.schedule import PruneSchedule, PruneTarget


class ConfigError(ValueError):
    """Invalid experiment configuration; `problems` lists '<dotted.location>: <message>' entries"""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


class Method(str, Enum):
    DENSE = "dense"
    SNIP = "snip"
    SNIP_IT = "snip-it"
    SNAP_IT = "snap-it"
    CNIP_IT = "cnip-it"
    RANDOM = "random"
    IMP_GLOBAL = "imp-global"


METHOD_TARGETS = {
    Method.SNIP: PruneTarget.WEIGHTS,
    Method.SNIP_IT: PruneTarget.WEIGHTS,
    Method.SNAP_IT: PruneTarget.NODES,
    Method.CNIP_IT: PruneTarget.UNION,
    Method.IMP_GLOBAL: PruneTarget.WEIGHTS,
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ==================== Config sections ====================

class ModelSection(_Section):
    """Architecture to build"""
    architecture: str = Field(default="MLP5", description="MLP5, LeNet5 or Conv6")
    width_scale: float = Field(default=1.0, gt=0.0, le=1.0)

    @field_validator("architecture")
    @classmethod
    def validate_architecture(cls, value: str) -> str:
        from nn_core.architectures import ARCHITECTURES
        if value not in ARCHITECTURES:
            raise ValueError(f"unknown architecture '{value}', choose from {sorted(ARCHITECTURES)}")
        return value


class DataSection(_Section):
    """Dataset source: an MNIST-style IDX directory or synthetic blobs"""
    source: str = Field(default="mnist", description="mnist or synthetic")
    directory: Path = Field(default=Path("data/mnist"))
    num_classes: int = Field(default=10, ge=2)
    validation_fraction: float = Field(default=0.0, ge=0.0, lt=1.0)
    flip_probability: float = Field(default=0.0, ge=0.0, le=1.0)
    synthetic_per_class: int = Field(default=200, ge=2)
    synthetic_dims: List[int] = Field(default_factory=lambda: [1, 28, 28], min_length=1)
    synthetic_separation: float = Field(default=10.0, gt=0.0)
    synthetic_test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    synthetic_seed: int = Field(default=0, ge=0)

    @field_validator("source")
    @classmethod
    def validate_source(cls, value: str) -> str:
        if value not in ("mnist", "synthetic"):
            raise ValueError("source must be 'mnist' or 'synthetic'")
        return value


class MethodSection(_Section):
    """Pruning method and its schedule"""
    name: Method = Method.DENSE
    kappa_final: float = Field(default=0.98, gt=0.0, lt=1.0)
    tau: int = Field(default=settings.PRUNE_INTERVAL, ge=0)
    steps: int = Field(default=settings.PRUNE_STEPS, ge=1)
    epsilon: float = Field(default=0.0, ge=0.0)
    target: Optional[PruneTarget] = Field(default=None, description="Only random pruning may choose its target")
    criterion_size: int = Field(default=settings.CRITERION_BATCH_SIZE, ge=1)
    min_nodes: int = Field(default=1, ge=1)
    rewind_epoch: int = Field(default=settings.REWIND_EPOCH, ge=0)
    imp_interval: int = Field(default=settings.IMP_INTERVAL, ge=1)

    @property
    def resolved_target(self) -> PruneTarget:
        if self.name is Method.RANDOM:
            return self.target or PruneTarget.WEIGHTS
        return METHOD_TARGETS.get(self.name, PruneTarget.WEIGHTS)

    def schedule(self) -> PruneSchedule:
        if self.name is Method.SNIP:
            return PruneSchedule(kappa_final=self.kappa_final, tau=0, steps=1, target=PruneTarget.WEIGHTS)
        return PruneSchedule(kappa_final=self.kappa_final, tau=self.tau, steps=self.steps,
                             epsilon=self.epsilon, target=self.resolved_target)


class OptimSection(_Section):
    learning_rate: float = Field(default=settings.LEARNING_RATE, gt=0.0)
    beta1: float = Field(default=settings.BETA1, ge=0.0, lt=1.0)
    beta2: float = Field(default=settings.BETA2, ge=0.0, lt=1.0)
    eps: float = Field(default=settings.ADAM_EPS, gt=0.0)
    weight_decay: float = Field(default=settings.WEIGHT_DECAY, ge=0.0)
    clip_magnitude: float = Field(default=settings.CLIP_MAGNITUDE, gt=0.0)
    batch_size: int = Field(default=settings.BATCH_SIZE, ge=1)


class RunSection(_Section):
    epochs: int = Field(default=settings.EPOCHS, ge=0)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    output_dir: Path = Field(default=settings.OUTPUT_DIR)
    checkpoint: bool = True


class RunConfig(_Section):
    """Resolved experiment configuration; every field defaults to the training protocol"""
    model: ModelSection = Field(default_factory=ModelSection)
    data: DataSection = Field(default_factory=DataSection)
    method: MethodSection = Field(default_factory=MethodSection)
    optim: OptimSection = Field(default_factory=OptimSection)
    run: RunSection = Field(default_factory=RunSection)

    @model_validator(mode="after")
    def check_method_schedule(self) -> "RunConfig":
        method = self.method
        if method.target is not None and method.name is not Method.RANDOM:
            expected = METHOD_TARGETS.get(method.name)
            if expected is not None and method.target is not expected:
                raise ValueError(f"{method.name.value} prunes {expected.value}, not {method.target.value}")
        if method.name is Method.SNAP_IT and method.tau != 0:
            raise ValueError("snap-it prunes before training: method.tau must be 0")
        if method.name in (Method.SNIP_IT, Method.CNIP_IT, Method.SNAP_IT):
            needed = method.schedule().training_epochs
            if needed > self.run.epochs:
                raise ValueError(f"schedule trains {needed} epochs between events, run.epochs is {self.run.epochs}")
        if method.name is Method.IMP_GLOBAL and method.rewind_epoch > self.run.epochs:
            raise ValueError(f"method.rewind_epoch {method.rewind_epoch} exceeds run.epochs {self.run.epochs}")
        if len(set(self.run.seeds)) != len(self.run.seeds):
            raise ValueError(f"run.seeds contains duplicates: {self.run.seeds}")
        return self

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Copy with dotted overrides applied, e.g. {"method.kappa_final": 0.9}"""
        data = self.model_dump(mode="json")
        for key, value in overrides.items():
            section, name = key.split(".", 1)
            data[section][name] = value
        return build_config(data)


# ==================== Config files ====================

def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Dict[str, Any]]:
    """
    Parse flat `section.key = value` lines into nested dicts.

    Values are read as JSON where possible (numbers, booleans, lists) and as
    bare strings otherwise. Blank lines and `#` comments are skipped.
    """
    sections: Dict[str, Dict[str, Any]] = {}
    problems = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep or "." not in key:
            problems.append(f"{source}:{number}: expected 'section.key = value', got '{line}'")
            continue
        section, name = key.split(".", 1)
        if name in sections.get(section, {}):
            problems.append(f"{source}:{number}: duplicate key {key}")
            continue
        sections.setdefault(section, {})[name] = _parse_value(raw.strip())
    if problems:
        raise ConfigError(problems)
    return sections


def build_config(data: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig(**data)
    except ValidationError as e:
        raise ConfigError([
            f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: {error['msg']}"
            for error in e.errors()
        ]) from e


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Read a config file (or return the defaults when no path is given)"""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"{path}: file not found"])
    return build_config(parse_config_text(path.read_text(), source=str(path)))


# ==================== Result records ====================

class RunManifest(BaseModel):
    """Everything needed to repeat a run bit-for-bit"""
    run_id: str
    version: str = Field(default=settings.VERSION)
    method: str
    seeds: List[int]
    config: Dict[str, Any]
    flags: Dict[str, Any] = Field(default_factory=dict, description="Design decisions in effect")


class SeedResult(BaseModel):
    seed: int
    test_acc: float = Field(..., ge=0.0, le=1.0)
    weight_sparsity: float
    node_sparsity: float
    connected: bool
    inference_flops: int
    train_flops: int
    cumulative_train_flops: int
    dense_inference_flops: int = Field(..., description="Unpruned model of the same architecture")
    dense_train_flops: int
    dense_cumulative_train_flops: int
    dense_bits: int
    csr_bits: int
    epochs_trained: int


class CostSummary(BaseModel):
    inference_flops: float
    train_flops: float
    cumulative_train_flops: float
    csr_bits: float
    inference_flops_reduction: Optional[float] = None
    train_flops_reduction: Optional[float] = None
    cumulative_flops_reduction: Optional[float] = None
    disk_reduction: Optional[float] = None
    flops_mode: str = Field(..., description="structured (shrunk shapes) or theoretical (unmasked counts)")


class RunSummary(BaseModel):
    """Final numbers of a run over all its seeds (percentages for acc/sparsity/hm)"""
    run_id: str
    method: str
    kappa_final: Optional[float] = None
    seeds: List[int]
    acc_mean: float
    acc_ci: Optional[float] = None
    weight_sparsity: float
    node_sparsity: float
    headline_sparsity: float
    hm: Optional[int] = None
    connected: bool
    connected_seeds: int
    costs: CostSummary
    per_seed: List[SeedResult]


class SweepRow(BaseModel):
    kappa: float
    acc_mean: float
    acc_ci: Optional[float] = None
    weight_sparsity: float
    node_sparsity: float
    hm: Optional[int] = None
