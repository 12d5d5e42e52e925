import sys

from nbmarkov.cli import main

sys.exit(main())
