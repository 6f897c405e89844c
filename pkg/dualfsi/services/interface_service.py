"""Temporal interface logic: conversion, incremental constraint, tractions, energy."""
from __future__ import annotations

from typing import Tuple

import numpy as np

from dualfsi.core.exceptions import ShapeMismatchError
from dualfsi.models.mortar import MortarOperators
from dualfsi.schemas.schemes import ConversionRule, TractionInterpolation


def _same_shape(*vectors: np.ndarray) -> None:
    shapes = {np.shape(v) for v in vectors}
    if len(shapes) > 1:
        raise ShapeMismatchError(f"interface vectors differ in shape: {sorted(shapes)}")


class InterfaceService:
    """Pure functions of their inputs."""

    @staticmethod
    def convert_velocity_increment(
        rule: ConversionRule, du_gamma: np.ndarray, u_n_gamma: np.ndarray, first_iter: bool
    ) -> np.ndarray:
        """Δd^G_Γ = τ Δu_Γ + δ_{i0} dt u^n_Γ."""
        _same_shape(du_gamma, u_n_gamma)
        out = rule.tau * np.asarray(du_gamma, dtype=float)
        if first_iter:
            out = out + rule.dt * np.asarray(u_n_gamma, dtype=float)
        return out

    @staticmethod
    def kinematic_constraint_rhs(
        mortar: MortarOperators,
        dd_p_gamma: np.ndarray,
        u_n_gamma: np.ndarray,
        first_iter: bool,
        dt: float,
    ) -> np.ndarray:
        """δ_{i0}(dt C^F u^n_Γ − C^S Δd_{Γ,p}) on the slave Γ-dofs.

        `dd_p_gamma` is the solid and `u_n_gamma` the fluid interface vector,
        whichever side is master.
        """
        c_s, c_f = mortar.c_structure, mortar.c_fluid
        if c_s.shape[1] != np.shape(dd_p_gamma)[0] or c_f.shape[1] != np.shape(u_n_gamma)[0]:
            raise ShapeMismatchError("interface vectors do not match the mortar operators")
        if not first_iter:
            return np.zeros(mortar.n_slave)
        return dt * (c_f @ u_n_gamma) - c_s @ dd_p_gamma

    @staticmethod
    def traction_residuals(
        interp: TractionInterpolation,
        mortar: MortarOperators,
        lam_n: np.ndarray,
        lam_new: np.ndarray,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """(+C^Fᵀ(bλ^n + (1−b)λ^{n+1}), −C^Sᵀ(aλ^n + (1−a)λ^{n+1}))."""
        _same_shape(lam_n, lam_new)
        if np.shape(lam_n)[0] != mortar.n_slave:
            raise ShapeMismatchError("multiplier does not live on the slave interface")
        a, b = interp.a, interp.b
        fluid = mortar.c_fluid.T @ (b * lam_n + (1.0 - b) * lam_new)
        solid = -(mortar.c_structure.T @ (a * lam_n + (1.0 - a) * lam_new))
        return fluid, solid

    @staticmethod
    def interface_energy_step(
        interp: TractionInterpolation,
        lam_n: np.ndarray,
        lam_new: np.ndarray,
        weighted_increment: np.ndarray,
    ) -> float:
        """ΔE_Γ = [(a−b)λ^n + (b−a)λ^{n+1}] · (C^S (d^{S,n+1}_Γ − d^{S,n}_Γ)).

        The increment is paired in the slave dof basis after mortar weighting.
        """
        _same_shape(lam_n, lam_new, weighted_increment)
        diff = interp.a - interp.b
        return float(np.dot(diff * np.asarray(lam_n) - diff * np.asarray(lam_new), weighted_increment))

    @staticmethod
    def weighted_structure_increment(mortar: MortarOperators, dd_gamma: np.ndarray) -> np.ndarray:
        return mortar.c_structure @ dd_gamma

    @staticmethod
    def constraint_norm(mortar: MortarOperators, d_gamma: np.ndarray, dg_gamma: np.ndarray) -> float:
        """‖C^S d^S_Γ − C^F d^G_Γ‖₂."""
        return float(np.linalg.norm(mortar.c_structure @ d_gamma - mortar.c_fluid @ dg_gamma))


interface_service = InterfaceService()
