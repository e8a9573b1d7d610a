#!/usr/bin/env python3
"""
Скрипт запуска Broadwell IBVP
"""

import sys

from broadwell.cli import main

if __name__ == "__main__":
    sys.exit(main())
