import sys

from kaczlab.main import main

sys.exit(main())
