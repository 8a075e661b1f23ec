#!/usr/bin/env python3
"""
Package Entry Point
===================

This allows the lab to be run with `python -m`.
"""

import os
import sys

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

if __name__ == "__main__":
    from main import main

    sys.exit(main())
