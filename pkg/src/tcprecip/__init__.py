"""Cyclone-associated precipitation cluster extraction and statistics."""

from tcprecip.grid_io import (
    DaySeries,
    GeoRef,
    Grid,
    GridFormatError,
    PolygonSet,
    Track,
    TrackPoint,
    Zone,
    accumulate_daily,
    read_ascii_grid,
    read_geojson_polygons,
    read_track_csv,
    write_ascii_grid,
)
from tcprecip.geo_project import (
    GeoBounds,
    SinusoidalParams,
    cell_center,
    reproject_to_geographic,
    sinu_forward,
    sinu_inverse,
    subset,
)
from tcprecip.cluster import (
    BinaryMask,
    Cluster,
    LabeledGrid,
    MaskConfig,
    NoClusterError,
    extract_cluster_grid,
    label_components,
    make_mask,
    pixel_counts,
    select_cyclone_cluster,
)
from tcprecip.zonal import (
    AreaModel,
    Footprint,
    ZoneMap,
    ZoneStats,
    assign_zones,
    cell_area,
    cluster_centroid,
    cluster_mean,
    footprint_area,
    union_footprint,
    zonal_stats,
)

__version__ = "0.1.0"

__all__ = [
    "AreaModel",
    "BinaryMask",
    "Cluster",
    "DaySeries",
    "Footprint",
    "GeoBounds",
    "GeoRef",
    "Grid",
    "GridFormatError",
    "LabeledGrid",
    "MaskConfig",
    "NoClusterError",
    "PolygonSet",
    "SinusoidalParams",
    "Track",
    "TrackPoint",
    "Zone",
    "ZoneMap",
    "ZoneStats",
    "accumulate_daily",
    "assign_zones",
    "cell_area",
    "cell_center",
    "cluster_centroid",
    "cluster_mean",
    "extract_cluster_grid",
    "footprint_area",
    "label_components",
    "make_mask",
    "pixel_counts",
    "read_ascii_grid",
    "read_geojson_polygons",
    "read_track_csv",
    "reproject_to_geographic",
    "select_cyclone_cluster",
    "sinu_forward",
    "sinu_inverse",
    "subset",
    "union_footprint",
    "write_ascii_grid",
    "zonal_stats",
]
