from dataclasses import dataclass, field, fields
import logging
import os
from pathlib import Path

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parent.parent

# Resolutions benchmarked by default (width, height).
TIMING_RESOLUTIONS = [(720, 480), (720, 576), (1024, 768), (1920, 1080)]


class ConfigError(Exception):
    """Raised when a configuration file or value cannot be used"""
    pass


def _bool(value: str | None, default: bool) -> bool:
    if value is None:
        return default
    return value.lower() in {"1", "true", "yes", "on"}


def _size_bytes(value: str) -> int:
    """Parse sizes like '10MB' or '512KB' into bytes."""
    text = value.strip().upper()
    for suffix, factor in (("GB", 1024 ** 3), ("MB", 1024 ** 2), ("KB", 1024)):
        if text.endswith(suffix):
            return int(float(text[: -len(suffix)]) * factor)
    return int(text)


def parse_resolutions(text: str) -> list[tuple[int, int]]:
    """
    Parse "720x480,1920x1080" into (width, height) pairs.

    Raises:
        ConfigError: For a malformed item, or a height that is not even and positive
    """
    result = []
    for item in (part.strip() for part in text.split(",")):
        if not item:
            continue
        try:
            width, height = (int(v) for v in item.lower().split("x"))
        except ValueError:
            raise ConfigError(f"Bad resolution {item!r}, expected WIDTHxHEIGHT")
        if width < 1 or height < 2 or height % 2:
            raise ConfigError(f"Resolution {item} needs a positive width and an even height")
        result.append((width, height))
    return result


@dataclass
class TrainConfig:
    """Optimizer and schedule settings for minimizing the deinterlacing loss."""
    learning_rate: float = 0.001
    lambda_tv: float = 2e-8
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    checkpoint_every: int = 10
    train_fraction: float = 0.8
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class ArchitectureConfig:
    """Kernel counts of the five-layer network. Only ablations change these."""
    trunk_kernels: tuple[int, int, int] = (64, 64, 64)
    branch_kernels: int = 32
    padding: str = "replicate"
    shared: bool = True


@dataclass
class DataConfig:
    patch_size: int = 64
    patch_stride: int = 64
    rescale: int = 512


@dataclass
class BenchConfig:
    warmup: int = 5
    frames: int = 50
    resolutions: list[tuple[int, int]] = field(default_factory=lambda: list(TIMING_RESOLUTIONS))


@dataclass
class MonitoringConfig:
    """Logging configuration."""
    log_level: str
    log_to_file: bool
    log_file_path: str
    log_max_size: str
    log_backup_count: int

    @property
    def log_max_bytes(self) -> int:
        return _size_bytes(self.log_max_size)


@dataclass
class Settings:
    threads: int
    seed: int

    train: TrainConfig
    architecture: ArchitectureConfig
    data: DataConfig
    bench: BenchConfig
    monitoring: MonitoringConfig


def load_settings() -> Settings:
    from dotenv import load_dotenv

    load_dotenv(PROJECT_ROOT / ".env")

    threads_str = os.getenv("DINW_THREADS")
    try:
        threads = int(threads_str) if threads_str else (os.cpu_count() or 1)
    except ValueError:
        logger.warning(f"Invalid DINW_THREADS value {threads_str!r}, using 1")
        threads = 1

    seed = int(os.getenv("DINW_SEED", "0"))

    data_config = DataConfig(
        patch_size=int(os.getenv("DINW_PATCH_SIZE", str(DataConfig.patch_size))),
        patch_stride=int(os.getenv("DINW_PATCH_STRIDE", str(DataConfig.patch_stride))),
        rescale=int(os.getenv("DINW_RESCALE", str(DataConfig.rescale))),
    )

    resolutions_str = os.getenv("DINW_BENCH_RESOLUTIONS")
    try:
        resolutions = parse_resolutions(resolutions_str) if resolutions_str else list(TIMING_RESOLUTIONS)
    except ConfigError as e:
        logger.warning(f"Invalid DINW_BENCH_RESOLUTIONS ({e}), using the standard resolutions")
        resolutions = list(TIMING_RESOLUTIONS)

    bench_config = BenchConfig(
        warmup=int(os.getenv("DINW_BENCH_WARMUP", "5")),
        frames=int(os.getenv("DINW_BENCH_FRAMES", "50")),
        resolutions=resolutions,
    )

    monitoring_config = MonitoringConfig(
        log_level=os.getenv("LOG_LEVEL", "INFO"),
        log_to_file=_bool(os.getenv("LOG_TO_FILE"), False),
        log_file_path=os.getenv("LOG_FILE_PATH", "./logs/deint.log"),
        log_max_size=os.getenv("LOG_MAX_SIZE", "10MB"),
        log_backup_count=int(os.getenv("LOG_BACKUP_COUNT", "3")),
    )

    return Settings(
        threads=threads,
        seed=seed,
        train=TrainConfig(seed=seed),
        architecture=ArchitectureConfig(),
        data=data_config,
        bench=bench_config,
        monitoring=monitoring_config,
    )


def validate_train_config(config: TrainConfig) -> list[str]:
    """Validate training settings and return a list of validation errors."""
    errors = []

    for name in ("learning_rate", "lambda_tv", "epochs", "batch_size", "checkpoint_every", "eps"):
        if getattr(config, name) <= 0:
            errors.append(f"{name} must be positive (got {getattr(config, name)})")

    if config.seed < 0:
        errors.append(f"seed must be non-negative (got {config.seed})")

    if not (0.0 < config.train_fraction < 1.0):
        errors.append(f"train_fraction must lie in (0, 1) (got {config.train_fraction})")

    for name in ("beta1", "beta2"):
        if not (0.0 <= getattr(config, name) < 1.0):
            errors.append(f"{name} must lie in [0, 1) (got {getattr(config, name)})")

    return errors


def validate_settings(settings: Settings) -> list[str]:
    """Validate settings and return a list of validation errors."""
    errors = []

    if settings.threads < 1:
        errors.append("DINW_THREADS must be at least 1")

    errors.extend(validate_train_config(settings.train))

    arch = settings.architecture
    if any(k < 1 for k in arch.trunk_kernels) or arch.branch_kernels < 1:
        errors.append("Kernel counts must be positive")
    if arch.padding not in {"replicate", "zero"}:
        errors.append(f"Unknown padding mode: {arch.padding}")

    data = settings.data
    if data.patch_size < 2 or data.patch_size % 2:
        errors.append("patch_size must be an even number of rows")
    if data.patch_stride < 1 or data.patch_stride % 2:
        errors.append("patch_stride must be even so patches keep their parity")

    if data.rescale < 0:
        errors.append("rescale must be 0 (keep the size) or a positive square size")

    if settings.seed < 0:
        errors.append("DINW_SEED must be non-negative")

    if settings.bench.frames < 1 or settings.bench.warmup < 0:
        errors.append("bench needs at least one timed frame and a non-negative warmup")
    if not settings.bench.resolutions:
        errors.append("bench needs at least one resolution")

    if getattr(logging, settings.monitoring.log_level.upper(), None) is None:
        errors.append(f"Unknown LOG_LEVEL: {settings.monitoring.log_level}")

    return errors


def load_config_file(path: str | Path) -> dict[str, str]:
    """
    Parse a flat key=value configuration file.

    Args:
        path: Path to the configuration file

    Returns:
        Mapping of keys to their raw string values

    Raises:
        ConfigError: If the file is unreadable or a line is malformed
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")

    values: dict[str, str] = {}
    for line_no, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            raise ConfigError(f"{path}:{line_no}: empty key")
        if key in values:
            raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
        values[key] = value

    logger.debug(f"Loaded {len(values)} keys from {path}")
    return values


def train_config_from(values: dict[str, object], base: TrainConfig | None = None) -> TrainConfig:
    """Build a TrainConfig from resolved option values, ignoring unrelated keys."""
    base = base or TrainConfig()
    known = {f.name for f in fields(TrainConfig)}
    updates = {k: v for k, v in values.items() if k in known and v is not None}
    config = TrainConfig(**{**base.__dict__, **updates})

    errors = validate_train_config(config)
    if errors:
        raise ConfigError("; ".join(errors))
    return config


def _compact(value: float) -> str:
    """Shortest general format without exponent zero-padding: 2e-08 becomes 2e-8."""
    mantissa, _, exponent = f"{value:g}".partition("e")
    return f"{mantissa}e{int(exponent)}" if exponent else mantissa


def print_environment_summary(settings: Settings, train: TrainConfig | None = None,
                              arch: ArchitectureConfig | None = None) -> None:
    """Print a summary of the run configuration."""
    train = train or settings.train
    arch = arch or settings.architecture
    print(f"\n{'='*60}")
    print("🎞️  Deep Field Deinterlacer - Run Configuration")
    print(f"{'='*60}")
    print(f"Threads: {settings.threads}")
    print(f"\n📉 Training:")
    print(f"  lr={_compact(train.learning_rate)} lambda_tv={_compact(train.lambda_tv)} "
          f"epochs={train.epochs} batch={train.batch_size}")
    print(f"  seed={train.seed} checkpoint_every={train.checkpoint_every} "
          f"train_fraction={_compact(train.train_fraction)}")
    print(f"\n🧱 Architecture:")
    print(f"  trunk={list(arch.trunk_kernels)} "
          f"branch={arch.branch_kernels} "
          f"padding={arch.padding} shared={arch.shared}")
    print(f"\n📝 Logging:")
    print(f"  Level: {settings.monitoring.log_level}")
    print(f"  Log to File: {settings.monitoring.log_to_file}")
    print(f"{'='*60}\n")
