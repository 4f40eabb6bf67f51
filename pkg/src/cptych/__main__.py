import sys

from cptych._cli import main

sys.exit(main())
