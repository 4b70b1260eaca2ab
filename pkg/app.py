from __future__ import annotations

import sys

from nsk_capillary.cli import main

if __name__ == "__main__":
    sys.exit(main())
