import os

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_flag(name: str, default: str = "false") -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


TOOLKIT_VERSION = "0.1.0"

# Census settings
CENSUS_PARALLELISM = int(os.getenv("QDESIGN_PARALLELISM", "4"))  # Worker processes for sampled censuses
CENSUS_SAMPLE_BATCH = int(os.getenv("QDESIGN_SAMPLE_BATCH", "32"))  # Samples per worker task
CENSUS_CHECKPOINT_EVERY = int(os.getenv("QDESIGN_CHECKPOINT_EVERY", "1000"))  # New orbits between flushes
DEFAULT_SEED = int(os.getenv("QDESIGN_SEED", "0"))
MEMBER_CACHE_LIMIT = int(os.getenv("QDESIGN_MEMBER_CACHE_LIMIT", "2000000"))

# Desk-scale guards
FULL_SCAN_LIMIT = int(os.getenv("QDESIGN_FULL_SCAN_LIMIT", str(10**8)))
ELEMENT_BUDGET = int(os.getenv("QDESIGN_ELEMENT_BUDGET", str(10**6)))
SEARCH_NODE_BUDGET = int(os.getenv("QDESIGN_SEARCH_NODE_BUDGET", str(10**7)))

# Persistence
CENSUS_FILE_MAGIC = "qdesign-census v1"
BLOCK_FILE_MAGIC = "qdesign-blocks v1"
LEX_ORDER_TAG = "pivot-rowint-v1"
REPORT_DIR = os.getenv("QDESIGN_REPORT_DIR", os.path.join(os.getcwd(), "reports"))
SHOW_PROGRESS = _env_flag("QDESIGN_SHOW_PROGRESS")

# Default primitive polynomials, coefficients low to high (monic, degree d)
DEFAULT_PRIMITIVE_POLYNOMIALS = {
    (2, 2): (1, 1, 1),  # x^2+x+1
    (2, 3): (1, 1, 0, 1),  # x^3+x+1
    (2, 4): (1, 1, 0, 0, 1),  # x^4+x+1
    (2, 5): (1, 0, 1, 0, 0, 1),  # x^5+x^2+1
    (2, 6): (1, 1, 0, 0, 0, 0, 1),  # x^6+x+1
    (2, 7): (1, 1, 0, 0, 0, 0, 0, 1),  # x^7+x+1
    (2, 11): (1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1),  # x^11+x^2+1
    (3, 2): (2, 1, 1),  # x^2+x+2
    (3, 3): (1, 2, 0, 1),  # x^3+2x+1
}

# Reproduction pipelines
SINGER_SCAN_FIELDS = ((2, 11), (2, 13), (2, 19), (3, 7), (5, 7))
ZSIGMONDY_MAX_E = 20

# Logging settings
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_LEVEL = os.getenv("QDESIGN_LOG_LEVEL", "INFO")
