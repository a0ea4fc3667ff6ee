"""City-year panel toolkit: agglomeration indices, land-use intensity, Moran's I and spatial panel models."""

__version__ = "0.1.0"
