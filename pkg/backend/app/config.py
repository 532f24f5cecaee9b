import os
import logging
from dotenv import load_dotenv
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# 1. Try loading from the current directory (Root)
load_dotenv()

# 2. Try loading from the backend directory (Explicit fallback)
env_path = BASE_DIR / ".env"
if os.path.exists(env_path):
    load_dotenv(dotenv_path=env_path)

logger = logging.getLogger("Config")

# ==========================================
# 1. RUNTIME SETTINGS
# ==========================================

LOG_LEVEL = os.getenv("CT_LOG_LEVEL", "INFO").upper()
REDIS_URL = os.getenv("REDIS_URL")
CACHE_TTL = int(os.getenv("CT_CACHE_TTL", "3600"))
CACHE_MAX_ENTRIES = max(1, int(os.getenv("CT_CACHE_MAX_ENTRIES", "256")))
BENCH_WORKERS = max(1, int(os.getenv("CT_BENCH_WORKERS", "4")))

# ==========================================
# 2. OPTIMIZER DEFAULTS
# ==========================================

MAX_ITER = int(os.getenv("CT_MAX_ITER", "2000"))
FTOL = float(os.getenv("CT_FTOL", "1e-8"))
GTOL = float(os.getenv("CT_GTOL", "1e-6"))
OMEGA_FLOOR = float(os.getenv("CT_OMEGA_FLOOR", "1e-4"))


def default_optim_config():
    """OptimConfig built from the environment."""
    from .services.estimation_engine import OptimConfig

    return OptimConfig(max_iter=MAX_ITER, ftol=FTOL, gtol=GTOL, omega_floor=OMEGA_FLOOR)


def configure_logging(level: str = None):
    """Entry points call this once; services only ask for named loggers."""
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL), logging.INFO),
        format="%(asctime)s %(levelname)s [%(name)s] %(message)s",
    )


logger.debug(f"🔧 CONFIG LOADED. Redis URL found: {'YES' if REDIS_URL else 'NO'}")
