"""Plane-strain St. Venant-Kirchhoff quadrilateral, total Lagrangian."""
import jax
import jax.numpy as jnp
import numpy as np

from dualfsi.elements.quadrature import DSHAPES_2X2, GAUSS_2X2_WEIGHTS, SHAPES_2X2


def shape_gradients(coords):
    """Physical shape gradients (4 qp, 4 nodes, 2) and Jacobian determinants (4,)."""
    jac = jnp.einsum("aj,qai->qji", coords, DSHAPES_2X2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = jnp.stack(
        [
            jnp.stack([jac[:, 1, 1], -jac[:, 0, 1]], axis=-1),
            jnp.stack([-jac[:, 1, 0], jac[:, 0, 0]], axis=-1),
        ],
        axis=-2,
    ) / det[:, None, None]
    grads = jnp.einsum("qai,qij->qaj", DSHAPES_2X2, inv)
    return grads, det


def svk_pk2(right_cauchy_green, lame_lambda, lame_mu):
    """Second Piola-Kirchhoff stress S = λ tr(E) I + 2μ E, E = (C - I)/2."""
    strain = 0.5 * (right_cauchy_green - jnp.eye(2))
    return lame_lambda * jnp.trace(strain) * jnp.eye(2) + 2.0 * lame_mu * strain


def deformation_gradients(coords, disp):
    grads, _ = shape_gradients(coords)
    return jnp.eye(2)[None] + jnp.einsum("ai,qaj->qij", disp.reshape(4, 2), grads)


def element_internal_force(coords, disp, lame_lambda, lame_mu):
    """Internal nodal forces (8,), node-major (x0, y0, x1, ...)."""
    grads, det = shape_gradients(coords)
    defgrad = jnp.eye(2)[None] + jnp.einsum("ai,qaj->qij", disp.reshape(4, 2), grads)
    cauchy_green = jnp.einsum("qki,qkj->qij", defgrad, defgrad)
    pk2 = jax.vmap(svk_pk2, in_axes=(0, None, None))(cauchy_green, lame_lambda, lame_mu)
    pk1 = jnp.einsum("qik,qkj->qij", defgrad, pk2)
    force = jnp.einsum("q,qij,qaj->ai", GAUSS_2X2_WEIGHTS * det, pk1, grads)
    return force.reshape(8)


def element_det_f(coords, disp):
    defgrad = deformation_gradients(coords, disp)
    return defgrad[:, 0, 0] * defgrad[:, 1, 1] - defgrad[:, 0, 1] * defgrad[:, 1, 0]


internal_forces = jax.jit(jax.vmap(element_internal_force, in_axes=(0, 0, None, None)))
internal_force_tangents = jax.jit(
    jax.vmap(jax.jacfwd(element_internal_force, argnums=1), in_axes=(0, 0, None, None))
)
det_f = jax.jit(jax.vmap(element_det_f))


def element_masses(coords: np.ndarray, density: float) -> np.ndarray:
    """Consistent mass matrices (n_elems, 8, 8) in reference configuration."""
    _, det = jax.vmap(shape_gradients)(jnp.asarray(coords))
    det = np.asarray(det)
    scalar = np.einsum("eq,qa,qb->eab", det * GAUSS_2X2_WEIGHTS, SHAPES_2X2, SHAPES_2X2)
    return density * np.einsum("eab,ij->eaibj", scalar, np.eye(2)).reshape(-1, 8, 8)
