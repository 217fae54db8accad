"""Street-level flood walkthrough toolkit.

Builds simplified 3D city models from 2D building footprints and a DEM,
aligns them to 360-degree walkthrough camera trajectories, and exports
scene bundles for an interactive flood-evacuation viewer.
"""

__version__ = "0.1.0"

LABEL_OTHER = 0
LABEL_GROUND = 1
LABEL_BUILDING = 2
LABEL_SKY = 3
