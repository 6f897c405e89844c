"""Stabilized equal-order Q1Q1 Navier-Stokes element on a moving mesh.

Element unknowns are the new velocity/pressure (12, node-major u, v, p) and the new
grid displacement (8). Jacobians with respect to both come from forward-mode
differentiation, so the shape-derivative block includes every term of the residual.
"""
from dataclasses import dataclass
from typing import Callable, Tuple

import jax
import jax.numpy as jnp

from dualfsi.elements.quadrature import GAUSS_2X2_WEIGHTS, SHAPES_2X2
from dualfsi.elements.solid import shape_gradients


@dataclass(frozen=True)
class FluidKernelParams:
    """Scalars baked into a compiled fluid kernel."""

    kind: str
    dt: float
    density: float
    viscosity: float
    theta: float = 1.0
    alpha_m: float = 1.0
    alpha_f: float = 1.0
    gamma: float = 1.0
    grid_trapezoidal: bool = True
    grad_div: bool = False


def _level_terms(params: FluidKernelParams, coords, vel, pres, grid_vel, acc):
    """Momentum residual (4, 2) and pressure stabilization (4,) at one time level."""
    rho, mu = params.density, params.viscosity
    grads, det = shape_gradients(coords)
    wdet = GAUSS_2X2_WEIGHTS * det
    h2 = jnp.sum(wdet)

    conv_vel = jnp.einsum("qa,ai->qi", SHAPES_2X2, vel - grid_vel)
    acc_q = jnp.einsum("qa,ai->qi", SHAPES_2X2, acc)
    p_q = SHAPES_2X2 @ pres
    grad_u = jnp.einsum("ai,qaj->qij", vel, grads)
    grad_p = jnp.einsum("a,qaj->qj", pres, grads)
    div_u = grad_u[:, 0, 0] + grad_u[:, 1, 1]
    advect = jnp.einsum("qj,qij->qi", conv_vel, grad_u)
    strain2 = grad_u + jnp.swapaxes(grad_u, 1, 2)

    nu = mu / rho
    speed2 = jnp.sum(conv_vel * conv_vel, axis=1)
    tau_m = ((2.0 / params.dt) ** 2 + 4.0 * speed2 / h2 + (4.0 * nu / h2) ** 2) ** -0.5
    strong = rho * (acc_q + advect) + grad_p
    c_grad_n = jnp.einsum("qj,qaj->qa", conv_vel, grads)

    momentum = (
        jnp.einsum("q,qa,qi->ai", wdet, SHAPES_2X2, rho * (acc_q + advect))
        + mu * jnp.einsum("q,qij,qaj->ai", wdet, strain2, grads)
        - jnp.einsum("q,q,qai->ai", wdet, p_q, grads)
        + jnp.einsum("q,q,qa,qi->ai", wdet, tau_m, c_grad_n, strong)
    )
    if params.grad_div:
        tau_c = rho * h2 / (8.0 * tau_m)
        momentum = momentum + jnp.einsum("q,q,q,qai->ai", wdet, tau_c, div_u, grads)
    pspg = jnp.einsum("q,q,qai,qi->a", wdet, tau_m / rho, grads, strong)
    return momentum, pspg


def _grid_velocity(params: FluidKernelParams, dg_new, dg_old, ug_old):
    if params.grid_trapezoidal:
        return 2.0 * (dg_new - dg_old) / params.dt - ug_old
    return (dg_new - dg_old) / params.dt


def make_element_residual(params: FluidKernelParams) -> Callable:
    """Element residual r(up_new, dg_new; coords, up_old, dg_old, ug_old, acc_old)."""

    def residual(up_new, dg_new, coords, up_old, dg_old, ug_old, acc_old):
        up_n, up_o = up_new.reshape(4, 3), up_old.reshape(4, 3)
        u_new, p_new = up_n[:, :2], up_n[:, 2]
        u_old, p_old = up_o[:, :2], up_o[:, 2]
        dgn, dgo = dg_new.reshape(4, 2), dg_old.reshape(4, 2)
        ugo, acco = ug_old.reshape(4, 2), acc_old.reshape(4, 2)
        ugn = _grid_velocity(params, dgn, dgo, ugo)

        if params.kind == "gen_alpha":
            af, am, gam = params.alpha_f, params.alpha_m, params.gamma
            acc_new = (u_new - u_old) / (gam * params.dt) - (1.0 - gam) / gam * acco
            momentum, pspg = _level_terms(
                params,
                coords + af * dgn + (1.0 - af) * dgo,
                af * u_new + (1.0 - af) * u_old,
                af * p_new + (1.0 - af) * p_old,
                af * ugn + (1.0 - af) * ugo,
                am * acc_new + (1.0 - am) * acco,
            )
        else:
            theta = params.theta
            rate = (u_new - u_old) / params.dt
            mom_new, pspg_new = _level_terms(params, coords + dgn, u_new, p_new, ugn, rate)
            mom_old, pspg_old = _level_terms(params, coords + dgo, u_old, p_old, ugo, rate)
            momentum = theta * mom_new + (1.0 - theta) * mom_old
            pspg = theta * pspg_new + (1.0 - theta) * pspg_old

        # continuity is enforced at the new time level
        grads, det = shape_gradients(coords + dgn)
        div_new = jnp.einsum("ai,qai->q", u_new, grads)
        continuity = jnp.einsum("q,qa,q->a", GAUSS_2X2_WEIGHTS * det, SHAPES_2X2, div_new) + pspg
        return jnp.concatenate([momentum, continuity[:, None]], axis=1).reshape(12)

    return residual


def compile_fluid_kernels(params: FluidKernelParams) -> Tuple[Callable, Callable]:
    """Vectorized residual and Jacobians (d/d up_new, d/d dg_new) over elements."""
    residual = make_element_residual(params)
    jac = jax.jacfwd(residual, argnums=(0, 1))
    return jax.jit(jax.vmap(residual)), jax.jit(jax.vmap(jac))
