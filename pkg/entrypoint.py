#!/usr/bin/env python3

import sys

from landagg.cli import main

sys.exit(main())
