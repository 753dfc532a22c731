#!/usr/bin/env python3
"""Print the spectral and finite-element resolvent-defect tables."""
from spdepath.harness.defects import fem_defects, spectral_defects

if __name__ == "__main__":
    print(spectral_defects((8, 16, 32, 64, 128, 256, 512, 1000)).summary())
    print(fem_defects((8, 16, 32, 64, 128, 256)).summary())
