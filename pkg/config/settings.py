import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

VERSION = "0.4.0"

# Base Paths
BASE_DIR = Path(__file__).resolve().parent.parent
LOGS_DIR = Path(os.getenv("BOLAB_LOGS_DIR", str(BASE_DIR / "logs")))
OUTPUT_DIR = Path(os.getenv("BOLAB_OUTPUT_DIR", str(BASE_DIR / "runs")))
DOCS_DIR = BASE_DIR / "docs"

# Create logs directory if it doesn't exist
LOGS_DIR.mkdir(parents=True, exist_ok=True)

# Logging
LOG_LEVEL = os.getenv("BOLAB_LOG_LEVEL", "INFO").upper()
LOG_MAX_BYTES = 5_242_880  # 5MB
LOG_BACKUP_COUNT = 3

# Grid defaults (the real line is replaced by a periodic box)
DEFAULT_GRID_N = int(os.getenv("BOLAB_GRID_N", "4096"))
DEFAULT_GRID_LENGTH = float(os.getenv("BOLAB_GRID_LENGTH", "400.0"))
MIN_GRID_N = 16
MIN_SPECTRUM_GRID_N = 64

# Time stepping
DEFAULT_DT = float(os.getenv("BOLAB_DT", "1e-3"))
BLOWUP_THRESHOLD = float(os.getenv("BOLAB_BLOWUP_THRESHOLD", "1e6"))
RK4_STAGE_LIMIT = 2.8  # imaginary-axis stability radius of classical RK4, rounded down
ETD_CONTOUR_POINTS = 32

# Modulation
NEWTON_TOL = float(os.getenv("BOLAB_NEWTON_TOL", "1e-12"))
NEWTON_MAX_ITER = int(os.getenv("BOLAB_NEWTON_MAX_ITER", "25"))
TUBE_RADIUS_FRACTION = 0.5
MIN_SEPARATION = float(os.getenv("BOLAB_MIN_SEPARATION", "20.0"))

# Kernel K_phi switches to its Taylor form when |x - y| < fraction * A
KERNEL_TAYLOR_FRACTION = float(os.getenv("BOLAB_KERNEL_TAYLOR_FRACTION", "1e-3"))

# Work queue
MAX_WORKERS = int(os.getenv("BOLAB_MAX_WORKERS", "2"))

# Error messages
ERRORS = {
    "grid_size": "Grid node count must be even and >= {}: got {}",
    "grid_length": "Grid length must be positive: got {}",
    "grid_mismatch": "Fields live on different grids: {} vs {}",
    "shape_mismatch": "Expected {} samples, got {}",
    "negative_order": "Order must be nonnegative: got {}",
    "nonpositive": "{} must be positive: got {}",
    "spectrum_grid": "Spectrum work needs n >= {}: got {}",
    "blowup": "Solution blew up at step {} (t={:.6g}, max|u|={:.3e})",
    "newton_diverged": "Translation fit did not converge in {} iterations (residual {:.3e})",
    "outside_tube": "Initial guess outside the modulation tube: distance {:.3e} > {:.3e}",
    "collision": "Soliton centres collided: gap {:.3e} < {:.3e}",
    "unordered": "Soliton centres must be strictly increasing with gaps >= {}: got {}",
    "bad_header": "Malformed field header: {!r}",
    "config_parse": "Invalid experiment configuration: {}",
    "unknown_key": "Unknown configuration key: {}",
    "missing_seed": "A seed is required for perturbation kind {}",
}

# Validate environment-driven settings
if DEFAULT_GRID_N % 2 or DEFAULT_GRID_N < MIN_GRID_N:
    raise ValueError(ERRORS["grid_size"].format(MIN_GRID_N, DEFAULT_GRID_N))
invalid_vars = [
    name
    for name, value in [
        ("BOLAB_GRID_LENGTH", DEFAULT_GRID_LENGTH),
        ("BOLAB_DT", DEFAULT_DT),
        ("BOLAB_NEWTON_TOL", NEWTON_TOL),
        ("BOLAB_BLOWUP_THRESHOLD", BLOWUP_THRESHOLD),
        ("BOLAB_KERNEL_TAYLOR_FRACTION", KERNEL_TAYLOR_FRACTION),
        ("BOLAB_MIN_SEPARATION", MIN_SEPARATION),
        ("BOLAB_NEWTON_MAX_ITER", NEWTON_MAX_ITER),
        ("BOLAB_MAX_WORKERS", MAX_WORKERS),
    ]
    if not value > 0
]
if invalid_vars:
    raise ValueError(f"Environment variables must be positive: {', '.join(invalid_vars)}")
