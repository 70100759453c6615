"""SAR datacube tooling: cube storage, chipping, a small U-Net and input ablations."""

from .cube_store import CHIP_DIMS, CUBE_DIMS, Datacube, GeoTransform, RasterVar, create_cube, open_cube
from .errors import SarCubeError
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "CHIP_DIMS", "CUBE_DIMS", "Datacube", "GeoTransform", "KERNEL_BACKEND", "RasterVar", "SarCubeError",
    "create_cube", "open_cube", "__version__",
]
