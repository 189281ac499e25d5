from contextlib import contextmanager
from contextvars import ContextVar
from typing import Iterator
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import computed_field, model_validator


class Settings(BaseSettings):
    # ------------------------------------------------------------
    # CORE APP SETTINGS
    # ------------------------------------------------------------
    ENV: str = "production"
    LOG_LEVEL: str = "INFO"

    @computed_field
    @property
    def DEBUG(self) -> bool:
        return self.ENV.lower() == "development"

    # ------------------------------------------------------------
    # NUMERIC TOLERANCES
    # ------------------------------------------------------------
    # Certificate comparisons and the strict ">" of witness searches
    TOLERANCE: float = 1e-9
    # Witness values closer than this are tied (smallest bitmask wins)
    TIE_TOLERANCE: float = 1e-12
    # Ground space weights must sum to 1 within this
    WEIGHT_TOLERANCE: float = 1e-12
    # Floor for the martingale inequality gaps
    GAP_TOLERANCE: float = 1e-9

    # ------------------------------------------------------------
    # SEARCH CAPS
    # ------------------------------------------------------------
    ENUMERATION_CAP: int = 2 ** 24
    CUT_NORM_CAP: int = 20
    HYPERCUBE_MAX_ALPHABET: int = 3
    HYPERCUBE_MAX_LENGTH: int = 3
    BATCH_SIZE: int = 4096

    # ------------------------------------------------------------
    # HEURISTIC ORACLES
    # ------------------------------------------------------------
    HEURISTIC_RESTARTS: int = 8
    DEFAULT_SEED: int = 0

    # ------------------------------------------------------------
    # LOOP & BOUND LIMITS
    # ------------------------------------------------------------
    MAX_REFINEMENT_STEPS: int = 10 ** 6
    GROWTH_CHECK_LIMIT: int = 10 ** 4
    BOUND_DIGIT_LIMIT: int = 10 ** 5
    BOUND_ITERATION_LIMIT: int = 10 ** 6

    @model_validator(mode='after')
    def check_limits(self):
        tolerances = {
            "TOLERANCE": self.TOLERANCE,
            "TIE_TOLERANCE": self.TIE_TOLERANCE,
            "WEIGHT_TOLERANCE": self.WEIGHT_TOLERANCE,
            "GAP_TOLERANCE": self.GAP_TOLERANCE,
        }
        for name, value in tolerances.items():
            if not value > 0:
                raise ValueError(f"❌ {name} must be positive, got {value}")

        caps = {
            "ENUMERATION_CAP": self.ENUMERATION_CAP,
            "CUT_NORM_CAP": self.CUT_NORM_CAP,
            "HYPERCUBE_MAX_ALPHABET": self.HYPERCUBE_MAX_ALPHABET,
            "HYPERCUBE_MAX_LENGTH": self.HYPERCUBE_MAX_LENGTH,
            "BATCH_SIZE": self.BATCH_SIZE,
            "HEURISTIC_RESTARTS": self.HEURISTIC_RESTARTS,
            "MAX_REFINEMENT_STEPS": self.MAX_REFINEMENT_STEPS,
            "GROWTH_CHECK_LIMIT": self.GROWTH_CHECK_LIMIT,
            "BOUND_DIGIT_LIMIT": self.BOUND_DIGIT_LIMIT,
            "BOUND_ITERATION_LIMIT": self.BOUND_ITERATION_LIMIT,
        }
        for name, value in caps.items():
            if value < 1:
                raise ValueError(f"❌ {name} must be at least 1, got {value}")

        if self.LOG_LEVEL.upper() not in {"TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"❌ Unknown LOG_LEVEL '{self.LOG_LEVEL}'")
        return self

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="REGULARITY_",
        extra="ignore",
        case_sensitive=False
    )

settings = Settings()

# ------------------------------------------------------------
# PER-RUN OVERRIDES
# ------------------------------------------------------------
# The CLI narrows tolerances and caps for a single run; library code
# always reads the active settings through current_settings().
_active_settings: ContextVar[Settings] = ContextVar("active_settings", default=settings)


def current_settings() -> Settings:
    return _active_settings.get()


@contextmanager
def settings_scope(**overrides) -> Iterator[Settings]:
    scoped = Settings(**{**current_settings().model_dump(exclude={"DEBUG"}), **overrides})
    token = _active_settings.set(scoped)
    try:
        yield scoped
    finally:
        _active_settings.reset(token)
