import sys

from ri3d.cli import main

sys.exit(main())
