import sys

from compound_render.cli import main

sys.exit(main())
