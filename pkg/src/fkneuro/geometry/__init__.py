"""Domain representations: meshes, connectomes, atlases, and their files."""

from .atlas import (
    ANATOMICAL_TABLE,
    MACROSTAGE_OF_STAGE,
    SLAB_TABLE,
    STAGE_ORDER,
    BraakAtlas,
    StageTable,
    build_braak_atlas,
    load_region_labels,
    slab_atlas,
)
from .connectome import (
    Connectome,
    generate_connectome,
    load_connectome,
    write_connectome,
)
from .mesh import (
    BoundaryFace,
    DiffusionModel,
    Element,
    InternalFace,
    PolytopalMesh,
    generate_structured_mesh,
    load_mesh,
    polygon_area,
    simplex_measure,
    slab_labeler,
    write_mesh,
)

__all__ = [
    "ANATOMICAL_TABLE",
    "MACROSTAGE_OF_STAGE",
    "SLAB_TABLE",
    "STAGE_ORDER",
    "BoundaryFace",
    "BraakAtlas",
    "Connectome",
    "DiffusionModel",
    "Element",
    "InternalFace",
    "PolytopalMesh",
    "StageTable",
    "build_braak_atlas",
    "generate_connectome",
    "generate_structured_mesh",
    "load_connectome",
    "load_mesh",
    "load_region_labels",
    "polygon_area",
    "simplex_measure",
    "slab_atlas",
    "slab_labeler",
    "write_connectome",
    "write_mesh",
]
