import sys

from erpamark.cli import main

sys.exit(main())
