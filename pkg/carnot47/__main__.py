"""python -m carnot47"""

import sys

from .cli import main

sys.exit(main())
