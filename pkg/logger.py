import logging

import config

# Create a logger
logger = logging.getLogger("risadc")
logger.setLevel(logging.DEBUG)  # handlers decide what gets through

# Console handler
ch = logging.StreamHandler()
ch.setLevel(logging.INFO)

# File handler (opened on first record)
fh = logging.FileHandler(config.LOG_FILE, delay=True)
fh.setLevel(logging.DEBUG)

# Formatter
formatter = logging.Formatter(
    "[%(asctime)s] [%(levelname)s] %(name)s: %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S"
)
ch.setFormatter(formatter)
fh.setFormatter(formatter)

# Add handlers
if not logger.handlers:
    logger.addHandler(ch)
    logger.addHandler(fh)


def set_console_level(level: int) -> None:
    """Used by the CLI's --verbose flag."""
    ch.setLevel(level)
