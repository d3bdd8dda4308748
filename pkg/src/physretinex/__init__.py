"""physretinex: physically grounded dual-branch Retinex image restoration.

The package is organized as a small numpy-backed library:

- ``engine``     reverse-mode tensor engine (autodiff, conv, FFT, scan, RNG)
- ``priors``     task-specific physical prior extraction
- ``model``      decomposition, prior-modulated attention, restoration network
- ``losses``     multi-level training objective and image metrics
- ``trainer``    AdamW loop, schedules, patch sampling
- ``checkpoint`` binary tensor container with CRC validation
- ``imageio``    8-bit PNG codec boundary
- ``config``     key=value run configuration
- ``tiling``     seam-free overlapped inference
- ``cli``        command-line entry points
"""

__version__ = "0.1.0"
