"""
ris-uav-optimizer 主入口
"""

import sys

from src.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
