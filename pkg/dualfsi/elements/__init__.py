"""Element kernels (jax, forward-mode Jacobians)."""
import jax

from dualfsi.config import settings

jax.config.update("jax_enable_x64", settings.JAX_ENABLE_X64)
