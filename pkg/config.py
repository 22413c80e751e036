"""
Engine Configuration Settings
Protocol defaults for training, pruning and metric estimation
"""

from pathlib import Path

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    """Engine settings, overridable through PRUNEKIT_* environment variables"""

    PROJECT_NAME: str = "ElastiPrune Engine"
    VERSION: str = "1.0.0"

    # ==================== Optimisation ====================

    LEARNING_RATE: float = 2e-3
    BETA1: float = 0.9
    BETA2: float = 0.999
    ADAM_EPS: float = 1e-8
    WEIGHT_DECAY: float = 5e-5
    CLIP_MAGNITUDE: float = 10.0
    BATCH_SIZE: int = 512
    EPOCHS: int = 20

    # ==================== Pruning ====================

    PRUNE_STEPS: int = 5
    PRUNE_INTERVAL: int = 0
    CRITERION_BATCH_SIZE: int = 2560
    CRITERION_SUB_BATCH: int = 512
    REWIND_EPOCH: int = 6
    IMP_INTERVAL: int = 4

    # ==================== Architectures ====================

    LEAKY_SLOPE: float = 0.05
    DROPOUT: float = 0.3
    BN_MOMENTUM: float = 0.1
    BN_EPS: float = 1e-5

    # ==================== Data ====================

    MNIST_MEAN: float = 0.1307
    MNIST_STD: float = 0.3081

    # ==================== Metrics ====================

    FLOAT_BITS: int = 32
    INDEX_BITS: int = 2
    TRAIN_FLOPS_MULTIPLIER: float = 3.0

    # ==================== Runtime ====================

    OUTPUT_DIR: Path = Path("runs")
    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(case_sensitive=True, env_prefix="PRUNEKIT_")


settings = Settings()
