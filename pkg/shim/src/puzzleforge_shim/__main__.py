import sys

from . import serve

if __name__ == "__main__":
    try:
        serve()
    except (BrokenPipeError, KeyboardInterrupt):
        pass
    sys.exit(0)
