"""
Engine Constants
Defines constants used throughout the foliation uniformization engine.
"""

# Application Information
APP_NAME = "unif3"
APP_VERSION = "1.0.0"
APP_DESCRIPTION = "Exact local uniformization of foliations by lines in dimension at most three"

# Files
DEFAULT_CONFIG_NAME = 'engine_config.json'

# Exit codes
EXIT_VERDICT = 0
EXIT_EXHAUSTED = 2
EXIT_ERROR = 3

# Verdicts
VERDICT_LOG_ELEMENTARY = "LogElementary"
VERDICT_ELEMENTARY = "Elementary"
VERDICT_MAXIMAL_CONTACT = "MaximalContact"
VERDICT_MAXIMAL_CONTACT_THEN_LOG_ELEMENTARY = "MaximalContactThenLogElementary"
VERDICT_EXHAUSTED = "Exhausted"
VERDICT_NOT_IMPLEMENTED = "NotImplemented"

# Simple points in dimension two
BRANCH_CORNER = "corner"
BRANCH_FOLLOWED = "branch"

# Run modes
RUN_MODES = ['auto', 'r3', 'r2', 'r1', 'maxcontact', 'lexrank2']
FUZZ_MODES = ['r3', 'r2', 'r1']

# Dimension limits
MAX_DIMENSION = 3

# Default budgets
DEFAULT_PACKAGE_STEP_FACTOR = 10
DEFAULT_GAME_BUDGET_FACTOR = 200
DEFAULT_DRIVER_STEPS = 200
DEFAULT_RANKONE_STEPS = 400
DEFAULT_MAXCONTACT_STEPS = 200
DEFAULT_VALUE_CAP_FACTOR = 12

# Default precision
DEFAULT_ORDER = 12
DEFAULT_SIGN_DIGITS = 64

# Logging
DEFAULT_LOG_MAX_BYTES = 10 * 1024 * 1024
DEFAULT_LOG_BACKUPS = 5

# Trace keywords
TRACE_KEYWORDS = {
    'record': 'step',
    'phase': 'phase',
    'snapshot': 'inv',
    'certificate': 'cert',
    'verdict': 'verdict',
}

# Frame modes for vector field coefficients
FRAME_LOG = 'log'
FRAME_PLAIN = 'plain'
