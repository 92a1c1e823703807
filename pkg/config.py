# config.py
# Repository-wide constants. Scenario parameters live in configs/*.cfg.
DEFAULT_SCENARIO = "configs/paper_defaults.cfg"
RESULTS_DB = "results.db"
LOG_FILE = "risadc_debug.log"
SCHEME_FOLDER = "schemes"

# CSV floats keep 17 significant digits so re-runs compare byte for byte
FLOAT_FORMAT = "{:.17g}"

# The bound printed next to the per-iteration complexity benchmark
REFERENCE_COMPLEXITY = "O(SM^{3.5}+K^{2.5}+KN_{t}+N_{r}N_{t})"
