"""Sparse SBP operators on triangles and tetrahedra with tensor structure.

The package builds diagonal-norm summation-by-parts operators on the
reference simplices by splitting them into quadrilateral / hexahedral
subdomains, mapping one-dimensional tensor-product operators onto the
parts, and merging the shared interface nodes. The assembled operators
keep the SBP property exactly, have diagonal boundary operators, and are
markedly sparse; they map onto affine physical elements like any other
element operator. A linear-advection solver, periodic mesh generators,
convergence / stability studies, and a CLI driver sit on top.
"""

from .advect import (
    AdvectionConfig,
    AdvectionDiscretization,
    convergence_study,
    exact_solution,
    max_stable_dt,
    operator_for_config,
    rk4_step,
    solve,
)
from .assembly import (
    AssemblyError,
    SimplexOperator,
    assemble,
    node_count_formula,
    sparsity_formula,
    sparsity_stats,
    verify_simplex_operator,
)
from .exchange import read_operator, write_operator
from .mesh import (
    Mesh,
    MeshError,
    perturb_mesh_2d,
    perturb_mesh_3d,
    quality_report,
    read_mesh,
    uniform_tet_mesh,
    uniform_tri_mesh,
    write_mesh,
)
from .oned import (
    ConstructionError,
    Operator1D,
    build_csbp_operator,
    build_lgl_operator,
    lgl_nodes_weights,
    verify_operator_1d,
)
from .physmap import ElementOperatorCache, ElementOperators, build_element_operators
from .split import GeometryError
from .tensor import TensorOperatorSet, tensor_product

__version__ = "0.1.0"

__all__ = [
    "AdvectionConfig",
    "AdvectionDiscretization",
    "AssemblyError",
    "ConstructionError",
    "ElementOperatorCache",
    "ElementOperators",
    "GeometryError",
    "Mesh",
    "MeshError",
    "Operator1D",
    "SimplexOperator",
    "TensorOperatorSet",
    "assemble",
    "build_csbp_operator",
    "build_element_operators",
    "build_lgl_operator",
    "convergence_study",
    "exact_solution",
    "lgl_nodes_weights",
    "max_stable_dt",
    "node_count_formula",
    "operator_for_config",
    "perturb_mesh_2d",
    "perturb_mesh_3d",
    "quality_report",
    "read_mesh",
    "read_operator",
    "rk4_step",
    "solve",
    "sparsity_formula",
    "sparsity_stats",
    "tensor_product",
    "uniform_tet_mesh",
    "uniform_tri_mesh",
    "verify_operator_1d",
    "verify_simplex_operator",
    "write_mesh",
    "write_operator",
]
