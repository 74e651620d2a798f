from .charts import sphere_to_uv, uv_to_sphere, wrap_u_delta
from .mlp import AffineUvMap, UvMapper

__all__ = ["AffineUvMap", "UvMapper", "sphere_to_uv", "uv_to_sphere", "wrap_u_delta"]
