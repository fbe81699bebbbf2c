#!/usr/bin/env python
"""
SEC-NoSQL root-level launcher.

    python main.py sweep --model EncM2 --proxies 2,3 --clients 1,2,4,8
    python main.py --help
"""

import sys
from pathlib import Path

# Add project root to sys.path so app module is importable
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from app.main import main

if __name__ == "__main__":
    sys.exit(main())
