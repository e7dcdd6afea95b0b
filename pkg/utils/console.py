import sys

from tqdm import tqdm

QUIET = False


def set_quiet(quiet):
    global QUIET
    QUIET = quiet


def say(message):
    """Status line on stderr that plays well with active progress bars"""
    if not QUIET:
        tqdm.write(message, file=sys.stderr)


def ok(message):
    say(f"✓ {message}")


def warn(message):
    say(f"⚠️ {message}")


def fail(message):
    # Errors are shown even in quiet mode
    tqdm.write(f"❌ {message}", file=sys.stderr)


def progress(iterable, desc, total=None):
    return tqdm(iterable, desc=desc, total=total, disable=QUIET, file=sys.stderr, leave=False)
