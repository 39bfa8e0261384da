import os
import sys

# make helpers.py importable regardless of the pytest rootdir
sys.path.insert(0, os.path.dirname(__file__))
