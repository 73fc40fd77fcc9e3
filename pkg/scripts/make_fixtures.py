"""Write the bundled systems and scenarios (same as ``asymtrust fixtures``)."""

import argparse

from asymtrust.fixtures import write_fixtures


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="fixtures")
    args = ap.parse_args()
    for path in write_fixtures(args.out):
        print(path)


if __name__ == "__main__":
    main()
