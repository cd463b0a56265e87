import sys

from restricted_orbits.cli import main

if __name__ == "__main__":
    sys.exit(main())
