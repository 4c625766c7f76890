import sys

from src.krflow.cli import main


if __name__ == "__main__":
    sys.exit(main())
